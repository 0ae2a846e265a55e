use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use commdet_core::community::detect_in;
use commdet_core::export::{
    curve_csv, fmt_f64, matrix_csv, parse_partition_json, partition_csv, partition_json, sweep_csv,
    threshold_dot, threshold_graphml,
};
use commdet_core::ingest::{
    align_entities, build_layer, BuildReport, CorrelationLayerSpec, MissingPolicy, TimeSeriesTable,
};
use commdet_core::model::{read_multiplex, write_multiplex};
use commdet_core::synth::{planted_cliques, CorrelatedPlanted};
use commdet_core::{
    find_omega_star, multiplex_communicability, nmi, MultiplexNetwork, Normalization, OmegaSearch,
    OmegaSearchResult, Partition,
};
use serde::Serialize;

use crate::config::{OmegaChoice, SourceSpec};
use crate::{Format, SynthKind};

const OMEGA_SEARCH: &str = "omega_search.json";

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, serde_json::to_string_pretty(value)? + "\n")
}

fn load_multiplex(path: &Path) -> Result<MultiplexNetwork> {
    read_multiplex(path).with_context(|| format!("loading multiplex {}", path.display()))
}

fn load_search(out: &Path) -> Result<OmegaSearchResult> {
    let path = out.join(OMEGA_SEARCH);
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading {} (run `optimize` first or pass --omega)", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Resolve `--omega` and the normalization, preferring the optimizer's choice when reusing its result.
fn resolve_omega(
    out: &Path,
    omega: OmegaChoice,
    normalization: Option<Normalization>,
) -> Result<(f64, Normalization)> {
    match omega {
        OmegaChoice::Value(w) => Ok((w, normalization.unwrap_or_default())),
        OmegaChoice::FromOptimize => {
            let search = load_search(out)?;
            Ok((search.omega_star, normalization.unwrap_or(search.normalization)))
        }
    }
}

pub struct IngestRun {
    pub out: PathBuf,
    pub sources: Vec<SourceSpec>,
    pub flows: Vec<SourceSpec>,
    pub alpha: f64,
    pub min_overlap: usize,
    pub missing: MissingPolicy,
    pub from: Option<String>,
    pub to: Option<String>,
    pub pairs: bool,
}

#[derive(Serialize)]
struct AlignmentFile {
    retained: Vec<String>,
    excluded: BTreeMap<String, Vec<String>>,
    /// Fraction of nonzero pairs per layer after alignment
    densities: BTreeMap<String, f64>,
}

pub fn ingest(run: &IngestRun) -> Result<()> {
    let inputs: Vec<(&SourceSpec, bool)> = run
        .sources
        .iter()
        .map(|s| (s, false))
        .chain(run.flows.iter().map(|s| (s, true)))
        .collect();
    if inputs.len() < 2 {
        bail!("ingest needs at least two sources (--source or --flow), got {}", inputs.len());
    }
    let mut names = std::collections::BTreeSet::new();
    for (s, _) in &inputs {
        if !names.insert(s.name.as_str()) {
            bail!("source name `{}` used twice", s.name);
        }
    }
    let spec = CorrelationLayerSpec {
        significance_level: run.alpha,
        min_overlap: run.min_overlap,
        missing_policy: run.missing,
    };
    let mut layers = Vec::with_capacity(inputs.len());
    let mut reports: Vec<BuildReport> = Vec::with_capacity(inputs.len());
    for (source, is_flow) in inputs {
        let file = File::open(&source.path).with_context(|| format!("opening {}", source.path.display()))?;
        let table = if is_flow {
            TimeSeriesTable::from_flow_csv(file)
        } else {
            TimeSeriesTable::from_long_csv(file)
        }
        .with_context(|| format!("reading {}", source.path.display()))?
        .window(run.from.as_deref(), run.to.as_deref());
        let (layer, mut report) =
            build_layer(&source.name, &table, &spec).with_context(|| format!("building layer `{}`", source.name))?;
        if !run.pairs {
            report.pairs = None;
        }
        layers.push(layer);
        reports.push(report);
    }
    let (aligned, align) = align_entities(&layers)?;
    let densities = aligned
        .iter()
        .map(|l| {
            let n = l.n();
            let w = l.weights();
            let nonzero = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).filter(|&(i, j)| w[(i, j)] != 0.0).count();
            let total = n * (n.saturating_sub(1)) / 2;
            (l.name().to_string(), if total == 0 { 0.0 } else { nonzero as f64 / total as f64 })
        })
        .collect();
    let m = MultiplexNetwork::new(aligned, 0.0)?;
    write_multiplex(&run.out.join("layers"), &m)?;
    for report in &reports {
        write_json(&run.out.join("reports").join(format!("{}.json", report.layer)), report)?;
    }
    write_json(
        &run.out.join("alignment.json"),
        &AlignmentFile {
            retained: align.retained,
            excluded: align.excluded,
            densities,
        },
    )?;
    for r in &reports {
        println!(
            "{}: {} entities, {} of {} pairs significant, {} dropped",
            r.layer,
            r.entities.len(),
            r.significant_pairs,
            r.total_pairs,
            r.dropped_entities.len()
        );
    }
    println!("aligned {} layers on {} entities", m.h(), m.n());
    Ok(())
}

pub struct OptimizeRun {
    pub out: PathBuf,
    pub input: PathBuf,
    pub grid_points: usize,
    pub refine_tol: f64,
    pub normalization: Normalization,
}

pub fn optimize(run: &OptimizeRun) -> Result<()> {
    let m = load_multiplex(&run.input)?;
    let params = OmegaSearch {
        grid_points: run.grid_points,
        refine_tol: run.refine_tol,
        normalization: run.normalization,
        ..OmegaSearch::default()
    };
    let result = find_omega_star(&m, &params)?;
    write_json(&run.out.join(OMEGA_SEARCH), &result)?;
    write(&run.out.join("delta_m_curve.csv"), curve_csv(&result.curve))?;
    if result.zero_infeasible {
        println!("omega = 0 is infeasible; search started at {}", result.domain_start);
    }
    println!(
        "omega_star = {}  delta_m = {}{}",
        result.omega_star,
        result.delta_m_star,
        if result.boundary { "  (boundary)" } else { "" }
    );
    Ok(())
}

pub struct DetectRun {
    pub out: PathBuf,
    pub input: PathBuf,
    pub omega: OmegaChoice,
    pub normalization: Option<Normalization>,
    pub formats: Vec<Format>,
}

#[derive(Serialize)]
struct DetectSummary {
    omega: f64,
    normalization: Normalization,
    layers: Vec<LayerSummary>,
}

#[derive(Serialize)]
struct LayerSummary {
    layer: String,
    num_communities: usize,
    quality: f64,
    threshold: f64,
}

fn write_graphs(dir: &Path, p: &Partition, xi: &nalgebra::DMatrix<f64>, formats: &[Format]) -> Result<()> {
    if formats.contains(&Format::Dot) {
        write(&dir.join(format!("{}.dot", p.layer)), threshold_dot(p, xi))?;
    }
    if formats.contains(&Format::Graphml) {
        write(&dir.join(format!("{}.graphml", p.layer)), threshold_graphml(p, xi))?;
    }
    Ok(())
}

pub fn detect(run: &DetectRun) -> Result<()> {
    let m = load_multiplex(&run.input)?;
    let (omega, normalization) = resolve_omega(&run.out, run.omega, run.normalization)?;
    let c = multiplex_communicability(&m, omega, normalization)?;
    let mut summary = DetectSummary {
        omega,
        normalization,
        layers: Vec::with_capacity(m.h()),
    };
    for alpha in 0..m.h() {
        let (p, sweep) = detect_in(&c, &m, alpha)?;
        if run.formats.contains(&Format::Json) {
            write(&run.out.join("partitions").join(format!("{}.json", p.layer)), partition_json(&p)?)?;
        }
        if run.formats.contains(&Format::Csv) {
            write(&run.out.join("partitions").join(format!("{}.csv", p.layer)), partition_csv(&p))?;
            write(&run.out.join("sweeps").join(format!("{}.csv", p.layer)), sweep_csv(&sweep))?;
        }
        write_graphs(&run.out.join("graphs"), &p, &c.layer_distances(alpha)?, &run.formats)?;
        println!(
            "{}: {} communities, Q = {}, threshold = {}",
            p.layer, p.num_communities, p.quality, p.threshold
        );
        summary.layers.push(LayerSummary {
            layer: p.layer.clone(),
            num_communities: p.num_communities,
            quality: p.quality,
            threshold: p.threshold,
        });
    }
    write_json(&run.out.join("detect.json"), &summary)
}

fn partition_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn load_partition(path: &Path) -> Result<Partition> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_partition_json(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn compare(out: &Path, files: &[PathBuf]) -> Result<()> {
    let files = if files.is_empty() {
        partition_files(&out.join("partitions"))?
    } else {
        files.to_vec()
    };
    if files.is_empty() {
        bail!("no partition files to compare");
    }
    let parts = files.iter().map(|f| load_partition(f)).collect::<Result<Vec<_>>>()?;
    let mut names: Vec<String> = Vec::with_capacity(parts.len());
    for p in &parts {
        let mut name = p.layer.clone();
        let mut k = 2;
        while names.contains(&name) {
            name = format!("{}#{k}", p.layer);
            k += 1;
        }
        names.push(name);
    }
    let k = parts.len();
    let mut matrix = nalgebra::DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = nmi(&parts[i], &parts[j])
                .with_context(|| format!("comparing {} with {}", files[i].display(), files[j].display()))?;
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    let text = matrix_csv(&names, &matrix);
    write(&out.join("nmi_matrix.csv"), &text)?;
    print!("{text}");
    Ok(())
}

pub struct ExportRun {
    pub out: PathBuf,
    pub input: PathBuf,
    pub omega: OmegaChoice,
    pub normalization: Option<Normalization>,
    pub formats: Vec<Format>,
}

pub fn export(run: &ExportRun) -> Result<()> {
    let m = load_multiplex(&run.input)?;
    let (omega, normalization) = resolve_omega(&run.out, run.omega, run.normalization)?;
    let dir = run.out.join("export");
    if run.formats.contains(&Format::Csv) {
        let c = multiplex_communicability(&m, omega, normalization)?;
        let headers: Vec<String> = (0..c.size()).map(|k| m.flat_name(k)).collect();
        write(&dir.join("communicability.csv"), matrix_csv(&headers, c.g()))?;
        write(&dir.join("distance.csv"), matrix_csv(&headers, &c.distances().xi))?;
    }
    if run.formats.contains(&Format::Dot) || run.formats.contains(&Format::Graphml) {
        let part_dir = run.out.join("partitions");
        if part_dir.is_dir() {
            for path in partition_files(&part_dir)? {
                let p = load_partition(&path)?;
                let alpha = m
                    .layer_index(&p.layer)
                    .with_context(|| format!("{}: layer `{}` not in the multiplex", path.display(), p.layer))?;
                let layer = &m.layers()[alpha];
                // Partition files list labels by community; put them back in layer order.
                let mut assignment = vec![usize::MAX; layer.n()];
                for (label, &c) in p.labels.iter().zip(&p.assignment) {
                    let i = layer
                        .index_of(label)
                        .with_context(|| format!("{}: unknown label `{label}`", path.display()))?;
                    assignment[i] = c;
                }
                if assignment.contains(&usize::MAX) {
                    bail!("{}: partition does not cover layer `{}`", path.display(), p.layer);
                }
                let mut q = Partition::from_assignment(p.layer.clone(), layer.labels().to_vec(), &assignment)?;
                q.threshold = p.threshold;
                q.quality = p.quality;
                q.omega = p.omega;
                let c = multiplex_communicability(&m, p.omega, normalization)?;
                write_graphs(&dir, &q, &c.layer_distances(alpha)?, &run.formats)?;
            }
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}

pub struct SynthRun {
    pub out: PathBuf,
    pub kind: SynthKind,
    pub seed: u64,
    pub n: usize,
    pub groups: usize,
    pub layers: usize,
    pub observations: usize,
    pub loading: f64,
}

#[derive(Serialize)]
struct Truth {
    labels: Vec<String>,
    assignment: Vec<usize>,
}

pub fn synth(run: &SynthRun) -> Result<()> {
    if run.groups == 0 || run.groups > run.n {
        bail!("groups must be between 1 and n = {}", run.n);
    }
    match run.kind {
        SynthKind::Planted => {
            let (m, truth) = planted_cliques(run.n, run.groups, run.layers, 1.0, 0.0, 0.0)?;
            let path = write_multiplex(&run.out.join("layers"), &m)?;
            write_json(
                &run.out.join("truth.json"),
                &Truth {
                    labels: m.labels().to_vec(),
                    assignment: truth,
                },
            )?;
            println!("wrote {}", path.display());
        }
        SynthKind::Correlated => {
            let cfg = CorrelatedPlanted {
                n: run.n,
                groups: run.groups,
                layers: run.layers,
                observations: run.observations,
                loading: run.loading,
            };
            let (tables, truth) = cfg.tables(run.seed)?;
            for (a, t) in tables.iter().enumerate() {
                let mut text = String::from("entity,date,value\n");
                for (e, entity) in t.entities().iter().enumerate() {
                    for (date, v) in t.times().iter().zip(t.series(e)) {
                        let v = v.map(fmt_f64).unwrap_or_default();
                        let _ = writeln!(text, "{entity},{date},{v}");
                    }
                }
                write(&run.out.join("data").join(format!("layer{a}.csv")), text)?;
            }
            write_json(
                &run.out.join("truth.json"),
                &Truth {
                    labels: tables[0].entities().to_vec(),
                    assignment: truth,
                },
            )?;
            println!("wrote {} series files to {}", tables.len(), run.out.join("data").display());
        }
    }
    Ok(())
}
