//! Communicability `G = exp(S^{-1/2} W S^{-1/2})` and the distances built on it.
//!
//! The communicability distance `xi_ij = G_ii + G_jj - 2 G_ij` is the squared
//! Euclidean distance between rows of `exp(W/2)`, so `sqrt(xi)` is a metric.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dsu::UnionFind;
use crate::error::{Error, Result};
use crate::model::{LayerNetwork, MultiplexNetwork, SupraMatrix};

/// How node strengths enter `S^{-1/2} W S^{-1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Strength of each replica inside its own layer.
    #[default]
    LayerStrength,
    /// Full supra-row sums, intra-layer strength plus `(h - 1) * omega`.
    SupraStrength,
    /// No normalization: `exp(W)` directly, for binary input.
    None,
}

impl Normalization {
    pub fn is_normalized(self) -> bool {
        self != Normalization::None
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::LayerStrength => "layer-strength",
            Normalization::SupraStrength => "supra-strength",
            Normalization::None => "none",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layer-strength" | "layer" => Ok(Normalization::LayerStrength),
            "supra-strength" | "supra" => Ok(Normalization::SupraStrength),
            "none" => Ok(Normalization::None),
            other => Err(Error::InvalidParameter(format!("unknown normalization `{other}`"))),
        }
    }
}

fn scale_by_strengths(s: &DMatrix<f64>, strengths: &[f64]) -> DMatrix<f64> {
    let k = s.nrows();
    let mut out = DMatrix::zeros(k, k);
    for i in 0..k {
        out[(i, i)] = s[(i, i)] / strengths[i];
        for j in (i + 1)..k {
            let v = s[(i, j)] / (strengths[i] * strengths[j]).sqrt();
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Sequential left-to-right sum, so every path computes identical strengths.
fn row_sum(m: &DMatrix<f64>, row: usize, cols: std::ops::Range<usize>) -> f64 {
    cols.fold(0.0, |acc, j| acc + m[(row, j)])
}

fn first_zero(strengths: &[f64]) -> Option<usize> {
    strengths.iter().position(|&d| d <= 0.0)
}

/// `D^{-1/2} s D^{-1/2}` with `D` the row sums of `s`.
pub fn strength_normalize(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let strengths: Vec<f64> = (0..s.nrows()).map(|i| row_sum(s, i, 0..s.ncols())).collect();
    if let Some(k) = first_zero(&strengths) {
        return Err(Error::ZeroStrength {
            node: format!("#{k}"),
        });
    }
    Ok(scale_by_strengths(s, &strengths))
}

/// Normalize by each replica's strength within its own diagonal block.
pub fn layer_strength_normalize(s: &SupraMatrix) -> Result<DMatrix<f64>> {
    let n = s.n();
    let e = s.entries();
    let strengths: Vec<f64> = (0..s.size())
        .map(|k| {
            let start = (k / n) * n;
            row_sum(e, k, start..start + n)
        })
        .collect();
    if let Some(k) = first_zero(&strengths) {
        return Err(Error::ZeroStrength {
            node: format!("#{k}"),
        });
    }
    Ok(scale_by_strengths(e, &strengths))
}

fn check_finite(s: &DMatrix<f64>) -> Result<()> {
    for j in 0..s.ncols() {
        for i in 0..s.nrows() {
            if !s[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Connected components of the nonzero pattern, each as ascending indices.
fn components(s: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let k = s.nrows();
    let mut uf = UnionFind::new(k);
    for i in 0..k {
        for j in (i + 1)..k {
            if s[(i, j)] != 0.0 {
                uf.union(i, j);
            }
        }
    }
    let labels = uf.labels();
    let mut groups = vec![Vec::new(); uf.num_sets()];
    for (i, &c) in labels.iter().enumerate() {
        groups[c].push(i);
    }
    groups
}

/// `exp(s)` for symmetric `s`, via `U exp(Lambda) U^T` on each connected block.
///
/// Splitting into blocks is exact (the exponential of a block-diagonal matrix
/// is block-diagonal) and makes a decoupled layer's block bitwise identical to
/// the exponential of that layer alone.
pub fn expm_symmetric(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if s.nrows() != s.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    check_finite(s)?;
    let k = s.nrows();
    let mut out = DMatrix::zeros(k, k);
    for idx in components(s) {
        if let [i] = idx[..] {
            out[(i, i)] = s[(i, i)].exp();
            continue;
        }
        let m = idx.len();
        let sub = DMatrix::from_fn(m, m, |a, b| s[(idx[a], idx[b])]);
        let eig = SymmetricEigen::try_new(sub, f64::EPSILON, 1000 * m).ok_or(Error::EigenFailure)?;
        let u = &eig.eigenvectors;
        let scaled = DMatrix::from_fn(m, m, |a, b| u[(a, b)] * eig.eigenvalues[b].exp());
        let r = &scaled * u.transpose();
        for a in 0..m {
            out[(idx[a], idx[a])] = r[(a, a)];
            for b in (a + 1)..m {
                let v = 0.5 * (r[(a, b)] + r[(b, a)]);
                out[(idx[a], idx[b])] = v;
                out[(idx[b], idx[a])] = v;
            }
        }
    }
    Ok(out)
}

/// Communicability matrix together with how it was produced.
#[derive(Debug, Clone)]
pub struct CommunicabilityResult {
    g: DMatrix<f64>,
    omega: Option<f64>,
    normalized: bool,
    block: usize,
}

impl CommunicabilityResult {
    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn omega(&self) -> Option<f64> {
        self.omega
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn size(&self) -> usize {
        self.g.nrows()
    }

    /// Nodes per layer; equals `size()` for a plain matrix.
    pub fn layer_size(&self) -> usize {
        self.block
    }

    pub fn num_layers(&self) -> usize {
        self.size() / self.block
    }

    /// Subgraph centralities `G_ii`.
    pub fn subgraph_centrality(&self) -> Vec<f64> {
        (0..self.size()).map(|k| self.g[(k, k)]).collect()
    }

    pub fn distances(&self) -> DistanceSummary {
        distance_matrix(self)
    }

    /// `xi` restricted to layer `alpha`, computed from the full multiplex `G`.
    pub fn layer_distances(&self, alpha: usize) -> Result<DMatrix<f64>> {
        if alpha >= self.num_layers() {
            return Err(Error::OutOfRange(format!(
                "layer {alpha} of {}",
                self.num_layers()
            )));
        }
        let n = self.block;
        let off = alpha * n;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            pair_distance(&self.g, off + i, off + j)
        }))
    }

    pub fn cohesion(&self, scope: CohesionScope) -> Result<DMatrix<f64>> {
        cohesion(self, scope)
    }
}

/// Communicability of a matrix used as-is (no normalization, one block).
pub fn communicability(s: &DMatrix<f64>) -> Result<CommunicabilityResult> {
    Ok(CommunicabilityResult {
        g: expm_symmetric(s)?,
        omega: None,
        normalized: false,
        block: s.nrows().max(1),
    })
}

fn name_zero_strength(err: Error, m: &MultiplexNetwork) -> Error {
    match err {
        Error::ZeroStrength { node } => {
            let k = node.trim_start_matches('#').parse::<usize>().ok();
            Error::ZeroStrength {
                node: k.map(|k| m.flat_name(k)).unwrap_or(node),
            }
        }
        other => other,
    }
}

/// The matrix fed to the exponential for a multiplex at intensity `omega`.
pub fn operator_matrix(
    m: &MultiplexNetwork,
    omega: f64,
    normalization: Normalization,
) -> Result<DMatrix<f64>> {
    let supra = m.supra_at(omega)?;
    let out = match normalization {
        Normalization::LayerStrength => layer_strength_normalize(&supra),
        Normalization::SupraStrength => strength_normalize(supra.entries()),
        Normalization::None => Ok(supra.into_entries()),
    };
    out.map_err(|e| name_zero_strength(e, m))
}

/// `G(omega)` for the whole multiplex.
pub fn multiplex_communicability(
    m: &MultiplexNetwork,
    omega: f64,
    normalization: Normalization,
) -> Result<CommunicabilityResult> {
    let op = operator_matrix(m, omega, normalization)?;
    Ok(CommunicabilityResult {
        g: expm_symmetric(&op)?,
        omega: Some(omega),
        normalized: normalization.is_normalized(),
        block: m.n(),
    })
}

/// Communicability of one layer on its own, the `omega = 0` monoplex case.
pub fn layer_communicability(
    layer: &LayerNetwork,
    normalization: Normalization,
) -> Result<CommunicabilityResult> {
    let w = layer.weights();
    let op = match normalization {
        // A lone layer has no coupling, so both strength variants coincide.
        Normalization::LayerStrength | Normalization::SupraStrength => {
            let strengths: Vec<f64> = (0..layer.n()).map(|i| row_sum(w, i, 0..layer.n())).collect();
            if let Some(k) = first_zero(&strengths) {
                return Err(Error::ZeroStrength {
                    node: format!("{}:{}", layer.name(), layer.labels()[k]),
                });
            }
            scale_by_strengths(w, &strengths)
        }
        Normalization::None => w.clone(),
    };
    Ok(CommunicabilityResult {
        g: expm_symmetric(&op)?,
        omega: Some(0.0),
        normalized: normalization.is_normalized(),
        block: layer.n(),
    })
}

/// Clamps round-off negatives to zero; `xi_ii` is exactly zero.
fn pair_distance(g: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    if i == j {
        return 0.0;
    }
    (g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)]).max(0.0)
}

/// Pairwise distances and their averages over all `nh` nodes.
#[derive(Debug, Clone)]
pub struct DistanceSummary {
    pub xi: DMatrix<f64>,
    /// Mean distance from each node to the other `nh - 1`.
    pub xi_bar_node: Vec<f64>,
    pub xi_bar: f64,
    /// Multiplex total distance, `nh * xi_bar`.
    pub delta_m: f64,
}

/// Row averages (divisor `k - 1`) and grand average of a distance matrix.
fn averages(xi: &DMatrix<f64>) -> (Vec<f64>, f64) {
    let k = xi.nrows();
    let denom = (k - 1) as f64;
    let node: Vec<f64> = (0..k).map(|i| xi.row(i).sum() / denom).collect();
    let all = node.iter().sum::<f64>() / k as f64;
    (node, all)
}

/// `Delta_M = 2 (N tr G - sum G) / (N - 1)`, equal to `sum_ij xi_ij / (N - 1)`.
pub fn total_distance(g: &DMatrix<f64>) -> f64 {
    let big_n = g.nrows() as f64;
    (2.0 / (big_n - 1.0)) * (big_n * g.trace() - g.sum())
}

pub fn distance_matrix(c: &CommunicabilityResult) -> DistanceSummary {
    let k = c.size();
    let xi = DMatrix::from_fn(k, k, |i, j| pair_distance(&c.g, i, j));
    let (xi_bar_node, xi_bar) = averages(&xi);
    DistanceSummary {
        xi,
        xi_bar_node,
        xi_bar,
        delta_m: total_distance(&c.g),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CohesionScope {
    /// All `nh` nodes of the multiplex.
    All,
    /// The `n` replicas living on one layer, with averages taken over that layer only.
    Layer(usize),
}

/// `gamma_ij = (xi_bar_j - xi_bar) - (xi_ij - xi_bar_i)`, including the diagonal.
///
/// With `CohesionScope::All` the ordered double sum over every `(i, j)`,
/// diagonal included, equals `Delta_M`.
pub fn cohesion(c: &CommunicabilityResult, scope: CohesionScope) -> Result<DMatrix<f64>> {
    let xi = match scope {
        CohesionScope::All => distance_matrix(c).xi,
        CohesionScope::Layer(alpha) => c.layer_distances(alpha)?,
    };
    Ok(cohesion_from_distances(&xi))
}

pub fn cohesion_from_distances(xi: &DMatrix<f64>) -> DMatrix<f64> {
    let (node, all) = averages(xi);
    let k = xi.nrows();
    DMatrix::from_fn(k, k, |i, j| (node[j] - all) - (xi[(i, j)] - node[i]))
}
