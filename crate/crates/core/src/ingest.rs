//! Correlation layers from per-entity time series.
//!
//! Each pair of entities is linked when its Pearson correlation is
//! significant, with weight `d = 1 - sqrt(2 (1 - rho)) / 2` in `[0, 1]`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::LayerNetwork;

/// Values indexed by entity and time; `None` marks a missing observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesTable {
    entities: Vec<String>,
    times: Vec<String>,
    values: Vec<Vec<Option<f64>>>,
}

impl TimeSeriesTable {
    pub fn new(entities: Vec<String>, times: Vec<String>, values: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if values.len() != entities.len() {
            return Err(Error::Parse(format!(
                "{} entities but {} series",
                entities.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|s| s.len() != times.len()) {
            return Err(Error::Parse(format!(
                "series `{}` has {} values for {} time points",
                entities[bad],
                values[bad].len(),
                times.len()
            )));
        }
        if let Some(w) = times.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Parse(format!(
                "time index not strictly increasing at `{}`",
                w[1]
            )));
        }
        let unique: BTreeSet<&String> = entities.iter().collect();
        if unique.len() != entities.len() {
            return Err(Error::Parse("duplicate entity".into()));
        }
        Ok(Self {
            entities,
            times,
            values,
        })
    }

    /// Long-form CSV with header `entity,date,value`; dates are `YYYY-MM-DD`,
    /// an empty value is missing. Entities keep their order of first appearance.
    pub fn from_long_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
        };
        let (ce, cd, cv) = (col("entity")?, col("date")?, col("value")?);
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |c: usize| rec.get(c).unwrap_or("");
            let date = field(cd);
            NaiveDate::parse_from_str(date, "%Y-%m-%d")
                .map_err(|e| Error::Parse(format!("row {}: bad date `{date}`: {e}", line + 2)))?;
            rows.push((field(ce).to_string(), date.to_string(), parse_value(field(cv), line + 2)?));
        }
        Self::from_rows(rows)
    }

    /// Bilateral flow CSV with header `reporter,partner,period,value`, reduced to
    /// each reporter's total per period. Periods must sort chronologically as text
    /// (`YYYY-MM`, `YYYY-MM-DD`, ...).
    pub fn from_flow_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
        };
        let (cr, cp, cv) = (col("reporter")?, col("period")?, col("value")?);
        let mut order: Vec<String> = Vec::new();
        let mut totals: BTreeMap<(String, String), Option<f64>> = BTreeMap::new();
        let mut periods = BTreeSet::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |c: usize| rec.get(c).unwrap_or("");
            let reporter = field(cr).to_string();
            let period = field(cp).to_string();
            if period.is_empty() {
                return Err(Error::Parse(format!("row {}: empty period", line + 2)));
            }
            if !order.contains(&reporter) {
                order.push(reporter.clone());
            }
            periods.insert(period.clone());
            let v = parse_value(field(cv), line + 2)?;
            let slot = totals.entry((reporter, period)).or_insert(None);
            if let Some(v) = v {
                *slot = Some(slot.unwrap_or(0.0) + v);
            }
        }
        let times: Vec<String> = periods.into_iter().collect();
        let values = order
            .iter()
            .map(|e| {
                times
                    .iter()
                    .map(|t| totals.get(&(e.clone(), t.clone())).copied().flatten())
                    .collect()
            })
            .collect();
        Self::new(order, times, values)
    }

    fn from_rows(rows: Vec<(String, String, Option<f64>)>) -> Result<Self> {
        let mut order: Vec<String> = Vec::new();
        let mut seen = HashMap::new();
        let times: Vec<String> = rows
            .iter()
            .map(|r| r.1.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let tindex: HashMap<&str, usize> = times.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let mut values: Vec<Vec<Option<f64>>> = Vec::new();
        let mut filled: Vec<Vec<bool>> = Vec::new();
        for (entity, date, v) in &rows {
            let e = *seen.entry(entity.clone()).or_insert_with(|| {
                order.push(entity.clone());
                values.push(vec![None; times.len()]);
                filled.push(vec![false; times.len()]);
                order.len() - 1
            });
            let t = tindex[date.as_str()];
            if filled[e][t] {
                return Err(Error::Parse(format!("duplicate row for `{entity}` on {date}")));
            }
            filled[e][t] = true;
            values[e][t] = *v;
        }
        Self::new(order, times, values)
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn times(&self) -> &[String] {
        &self.times
    }

    pub fn series(&self, entity: usize) -> &[Option<f64>] {
        &self.values[entity]
    }

    /// Keep time points in `[from, to]` (inclusive, compared as ISO text).
    pub fn window(&self, from: Option<&str>, to: Option<&str>) -> Self {
        let keep: Vec<usize> = self
            .times
            .iter()
            .enumerate()
            .filter(|(_, t)| from.is_none_or(|f| t.as_str() >= f) && to.is_none_or(|u| t.as_str() <= u))
            .map(|(i, _)| i)
            .collect();
        Self {
            entities: self.entities.clone(),
            times: keep.iter().map(|&i| self.times[i].clone()).collect(),
            values: self
                .values
                .iter()
                .map(|s| keep.iter().map(|&i| s[i]).collect())
                .collect(),
        }
    }

    /// Reorder or subset entities.
    pub fn select(&self, entities: &[usize]) -> Self {
        Self {
            entities: entities.iter().map(|&e| self.entities[e].clone()).collect(),
            times: self.times.clone(),
            values: entities.iter().map(|&e| self.values[e].clone()).collect(),
        }
    }
}

fn parse_value(raw: &str, line: usize) -> Result<Option<f64>> {
    if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    raw.parse::<f64>()
        .map(Some)
        .map_err(|e| Error::Parse(format!("row {line}: bad value `{raw}`: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    /// Correlate each pair on the dates both entities report.
    #[default]
    PairwiseComplete,
    /// Drop any entity with a missing observation.
    DropEntity,
}

impl std::str::FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pairwise-complete" | "pairwise" => Ok(MissingPolicy::PairwiseComplete),
            "drop-entity" | "drop" => Ok(MissingPolicy::DropEntity),
            other => Err(Error::InvalidParameter(format!("unknown missing policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationLayerSpec {
    pub significance_level: f64,
    pub min_overlap: usize,
    pub missing_policy: MissingPolicy,
}

impl Default for CorrelationLayerSpec {
    fn default() -> Self {
        Self {
            significance_level: 0.05,
            min_overlap: 10,
            missing_policy: MissingPolicy::PairwiseComplete,
        }
    }
}

impl CorrelationLayerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.significance_level > 0.0 && self.significance_level < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "significance level {} outside (0, 1)",
                self.significance_level
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearsonResult {
    pub rho: f64,
    /// Two-sided p-value of the t test with `n_obs - 2` degrees of freedom.
    pub p: f64,
    pub n_obs: usize,
}

pub fn pearson_with_pvalue(x: &[Option<f64>], y: &[Option<f64>]) -> Result<PearsonResult> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("series of length {} and {}", x.len(), y.len())));
    }
    let pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter_map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() => Some((*a, *b)),
            _ => None,
        })
        .collect();
    let n_obs = pairs.len();
    if n_obs < 3 {
        return Err(Error::InsufficientOverlap { got: n_obs, need: 3 });
    }
    let nf = n_obs as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(a, b) in &pairs {
        let (da, db) = (a - mx, b - my);
        sxx += da * da;
        syy += db * db;
        sxy += da * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantSeries);
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = nf - 2.0;
    let p = if rho.abs() == 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        (2.0 * dist.cdf(-t.abs())).min(1.0)
    };
    Ok(PearsonResult { rho, p, n_obs })
}

/// `1 - sqrt(2 (1 - rho)) / 2`, increasing from 0 at `rho = -1` to 1 at `rho = 1`.
pub fn mantegna_distance(rho: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::CorrelationDomain(rho));
    }
    Ok((1.0 - 0.5 * (2.0 * (1.0 - rho)).sqrt()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatus {
    Significant,
    NotSignificant,
    InsufficientOverlap,
    ConstantSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStat {
    pub a: String,
    pub b: String,
    pub rho: Option<f64>,
    pub p: Option<f64>,
    pub n_obs: usize,
    pub weight: f64,
    pub status: PairStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub layer: String,
    pub entities: Vec<String>,
    pub dropped_entities: Vec<String>,
    pub total_pairs: usize,
    pub significant_pairs: usize,
    pub non_significant_pairs: Vec<[String; 2]>,
    /// Pairs that could not be tested, with the reason.
    pub unusable_pairs: Vec<[String; 3]>,
    /// Fraction of off-diagonal pairs with nonzero weight.
    pub density: f64,
    pub mean_significant_correlation: Option<f64>,
    pub all_significant_positive: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<PairStat>>,
}

fn evaluate_pair(x: &[Option<f64>], y: &[Option<f64>], spec: &CorrelationLayerSpec) -> (Option<PearsonResult>, PairStatus) {
    match pearson_with_pvalue(x, y) {
        Ok(r) if r.n_obs < spec.min_overlap => (Some(r), PairStatus::InsufficientOverlap),
        Ok(r) if r.p < spec.significance_level => (Some(r), PairStatus::Significant),
        Ok(r) => (Some(r), PairStatus::NotSignificant),
        Err(Error::ConstantSeries) => (None, PairStatus::ConstantSeries),
        Err(_) => (None, PairStatus::InsufficientOverlap),
    }
}

/// Correlation layer over the table's usable entities.
///
/// The returned report always carries the per-pair table in `pairs`; callers
/// drop it before serializing when it is not wanted.
pub fn build_layer(
    name: &str,
    table: &TimeSeriesTable,
    spec: &CorrelationLayerSpec,
) -> Result<(LayerNetwork, BuildReport)> {
    spec.validate()?;
    let (kept, dropped): (Vec<usize>, Vec<usize>) = (0..table.entities.len()).partition(|&e| {
        let s = table.series(e);
        match spec.missing_policy {
            MissingPolicy::PairwiseComplete => s.iter().any(|v| v.is_some_and(f64::is_finite)),
            MissingPolicy::DropEntity => s.iter().all(|v| v.is_some_and(f64::is_finite)),
        }
    });
    if kept.len() < 2 {
        return Err(Error::TooFewEntities(name.to_string()));
    }
    let labels: Vec<String> = kept.iter().map(|&e| table.entities[e].clone()).collect();
    let n = kept.len();
    let index_pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let results: Vec<(Option<PearsonResult>, PairStatus)> = index_pairs
        .par_iter()
        .map(|&(i, j)| evaluate_pair(table.series(kept[i]), table.series(kept[j]), spec))
        .collect();

    let mut weights = DMatrix::zeros(n, n);
    let mut stats = Vec::with_capacity(results.len());
    let mut non_significant = Vec::new();
    let mut unusable = Vec::new();
    let mut significant_rhos = Vec::new();
    let mut nonzero = 0usize;
    for (&(i, j), (r, status)) in index_pairs.iter().zip(results) {
        let (a, b) = (labels[i].clone(), labels[j].clone());
        let mut weight = 0.0;
        match status {
            PairStatus::Significant => {
                let rho = r.expect("significant pairs carry a result").rho;
                weight = mantegna_distance(rho)?;
                significant_rhos.push(rho);
            }
            PairStatus::NotSignificant => non_significant.push([a.clone(), b.clone()]),
            PairStatus::InsufficientOverlap => {
                unusable.push([a.clone(), b.clone(), "insufficient_overlap".to_string()]);
            }
            PairStatus::ConstantSeries => {
                unusable.push([a.clone(), b.clone(), "constant_series".to_string()]);
            }
        }
        if weight != 0.0 {
            nonzero += 1;
        }
        weights[(i, j)] = weight;
        weights[(j, i)] = weight;
        stats.push(PairStat {
            a,
            b,
            rho: r.map(|r| r.rho),
            p: r.map(|r| r.p),
            n_obs: r.map_or(0, |r| r.n_obs),
            weight,
            status,
        });
    }
    let layer = LayerNetwork::new(name, labels.clone(), weights)?;
    let total_pairs = index_pairs.len();
    let report = BuildReport {
        layer: name.to_string(),
        entities: labels,
        dropped_entities: dropped.iter().map(|&e| table.entities[e].clone()).collect(),
        total_pairs,
        significant_pairs: significant_rhos.len(),
        non_significant_pairs: non_significant,
        unusable_pairs: unusable,
        density: nonzero as f64 / total_pairs as f64,
        mean_significant_correlation: (!significant_rhos.is_empty())
            .then(|| significant_rhos.iter().sum::<f64>() / significant_rhos.len() as f64),
        all_significant_positive: significant_rhos.iter().all(|&r| r > 0.0),
        pairs: Some(stats),
    };
    Ok((layer, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignReport {
    pub retained: Vec<String>,
    /// Per layer, the entities removed because another layer lacks them.
    pub excluded: BTreeMap<String, Vec<String>>,
}

/// Restrict every layer to the entities present in all of them, in the first layer's order.
pub fn align_entities(layers: &[LayerNetwork]) -> Result<(Vec<LayerNetwork>, AlignReport)> {
    if layers.len() < 2 {
        return Err(Error::InvalidMultiplex(format!(
            "need at least 2 layers to align, got {}",
            layers.len()
        )));
    }
    let sets: Vec<BTreeSet<&str>> = layers
        .iter()
        .map(|l| l.labels().iter().map(String::as_str).collect())
        .collect();
    let retained: Vec<String> = layers[0]
        .labels()
        .iter()
        .filter(|l| sets.iter().all(|s| s.contains(l.as_str())))
        .cloned()
        .collect();
    if retained.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let keep: BTreeSet<&str> = retained.iter().map(String::as_str).collect();
    let mut excluded = BTreeMap::new();
    let mut out = Vec::with_capacity(layers.len());
    for layer in layers {
        excluded.insert(
            layer.name().to_string(),
            layer
                .labels()
                .iter()
                .filter(|l| !keep.contains(l.as_str()))
                .cloned()
                .collect(),
        );
        out.push(layer.restrict(&retained)?);
    }
    Ok((out, AlignReport { retained, excluded }))
}
