//! Per-layer communities from thresholded communicability distances.
//!
//! For a threshold `t`, nodes `i != j` are linked when `xi_ij <= t`; the
//! communities are the connected components of that graph. The quality of a
//! partition is the cohesion summed over unordered same-community pairs:
//!
//! ```text
//! Q = sum_{i < j, c(i) = c(j)} gamma_ij
//! ```
//!
//! `Q` is piecewise constant in `t` and can only change when `t` crosses an
//! observed distance, so sweeping the distinct off-diagonal distances is exhaustive.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::communicability::{
    cohesion_from_distances, layer_communicability, multiplex_communicability, CommunicabilityResult,
    Normalization,
};
use crate::dsu::UnionFind;
use crate::error::{Error, Result};
use crate::model::{LayerNetwork, MultiplexNetwork};

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub layer: String,
    pub labels: Vec<String>,
    /// Community id per node, numbered by smallest member.
    pub assignment: Vec<usize>,
    pub threshold: f64,
    pub quality: f64,
    pub num_communities: usize,
    /// Intensity of the communicability the partition was detected on.
    pub omega: f64,
}

impl Partition {
    /// Build from any labeling; ids are renumbered canonically.
    pub fn from_assignment(layer: impl Into<String>, labels: Vec<String>, assignment: &[usize]) -> Result<Self> {
        if labels.len() != assignment.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels, {} assignments",
                labels.len(),
                assignment.len()
            )));
        }
        let assignment = canonical_ids(assignment);
        let num_communities = assignment.iter().max().map_or(0, |m| m + 1);
        Ok(Self {
            layer: layer.into(),
            labels,
            assignment,
            threshold: f64::NAN,
            quality: f64::NAN,
            num_communities,
            omega: f64::NAN,
        })
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    /// Member node indices of each community, in id order.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_communities];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn same_community(&self, i: usize, j: usize) -> bool {
        self.assignment[i] == self.assignment[j]
    }
}

/// Renumber ids in order of first appearance.
pub fn canonical_ids(assignment: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    assignment
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// Every distinct threshold with its quality and partition, in increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSweep {
    pub candidates: Vec<f64>,
    pub q_values: Vec<f64>,
    pub partitions: Vec<Vec<usize>>,
}

impl ThresholdSweep {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn num_communities(&self, k: usize) -> usize {
        self.partitions[k].iter().max().map_or(0, |m| m + 1)
    }
}

/// `m_ij = 1` iff `i != j` and `xi_ij <= threshold`.
pub fn threshold_graph(xi: &DMatrix<f64>, threshold: f64) -> DMatrix<u8> {
    let n = xi.nrows();
    DMatrix::from_fn(n, n, |i, j| u8::from(i != j && xi[(i, j)] <= threshold))
}

/// Connected components, ids ordered by smallest member node.
pub fn communities_from_threshold(adjacency: &DMatrix<u8>) -> Vec<usize> {
    let n = adjacency.nrows();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if adjacency[(i, j)] != 0 {
                uf.union(i, j);
            }
        }
    }
    uf.labels()
}

/// Sum of `gamma_ij` over unordered same-community pairs.
pub fn quality(gamma: &DMatrix<f64>, assignment: &[usize]) -> Result<f64> {
    let n = assignment.len();
    if gamma.nrows() != n || gamma.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} cohesion matrix for {} nodes",
            gamma.nrows(),
            gamma.ncols(),
            n
        )));
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            if assignment[i] == assignment[j] {
                q += gamma[(i, j)];
            }
        }
    }
    Ok(q)
}

/// Sweep all distinct off-diagonal distances, merging components incrementally.
pub fn sweep(xi: &DMatrix<f64>, gamma: &DMatrix<f64>) -> Result<ThresholdSweep> {
    let n = xi.nrows();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((xi[(i, j)], i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut uf = UnionFind::new(n);
    let mut out = ThresholdSweep {
        candidates: Vec::new(),
        q_values: Vec::new(),
        partitions: Vec::new(),
    };
    let mut k = 0;
    while k < pairs.len() {
        let t = pairs[k].0;
        while k < pairs.len() && pairs[k].0 == t {
            uf.union(pairs[k].1, pairs[k].2);
            k += 1;
        }
        let labels = uf.labels();
        out.q_values.push(quality(gamma, &labels)?);
        out.candidates.push(t);
        out.partitions.push(labels);
    }
    Ok(out)
}

/// Index of the best candidate, or `None` when no candidate beats all-singletons (`Q = 0`).
///
/// Qualities within `1e-12` of the running best (relative to the total
/// absolute cohesion) count as ties, and ties keep the smaller threshold.
pub fn best_candidate(sweep: &ThresholdSweep, gamma: &DMatrix<f64>) -> Option<usize> {
    let n = gamma.nrows();
    let mut scale = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            scale += gamma[(i, j)].abs();
        }
    }
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut best = None;
    let mut best_q = 0.0;
    for (k, &q) in sweep.q_values.iter().enumerate() {
        if q > best_q + tol {
            best = Some(k);
            best_q = q;
        }
    }
    best
}

/// Detect communities from a layer's distance matrix.
pub fn detect_from_distances(
    layer: &str,
    labels: &[String],
    xi: &DMatrix<f64>,
    omega: f64,
) -> Result<(Partition, ThresholdSweep)> {
    let n = xi.nrows();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "layer `{layer}` needs at least 2 nodes, has {n}"
        )));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!("{} labels for {n} nodes", labels.len())));
    }
    let gamma = cohesion_from_distances(xi);
    let sweep = sweep(xi, &gamma)?;
    let (assignment, threshold, q) = match best_candidate(&sweep, &gamma) {
        Some(k) => (sweep.partitions[k].clone(), sweep.candidates[k], sweep.q_values[k]),
        None => {
            // Just below the smallest distance, where every node is alone.
            let below = sweep.candidates.first().map_or(0.0, |t| t.next_down());
            ((0..n).collect(), below, 0.0)
        }
    };
    let num_communities = assignment.iter().max().map_or(0, |m| m + 1);
    let partition = Partition {
        layer: layer.to_string(),
        labels: labels.to_vec(),
        assignment,
        threshold,
        quality: q,
        num_communities,
        omega,
    };
    Ok((partition, sweep))
}

/// Detect on layer `alpha` from an already computed multiplex communicability.
pub fn detect_in(
    c: &CommunicabilityResult,
    m: &MultiplexNetwork,
    alpha: usize,
) -> Result<(Partition, ThresholdSweep)> {
    let layer = m
        .layer(alpha)
        .ok_or_else(|| Error::OutOfRange(format!("layer {alpha} of {}", m.h())))?;
    let xi = c.layer_distances(alpha)?;
    detect_from_distances(layer.name(), layer.labels(), &xi, c.omega().unwrap_or(f64::NAN))
}

pub fn detect_layer(
    m: &MultiplexNetwork,
    omega: f64,
    alpha: usize,
    normalization: Normalization,
) -> Result<(Partition, ThresholdSweep)> {
    let c = multiplex_communicability(m, omega, normalization)?;
    detect_in(&c, m, alpha)
}

/// All layers from one evaluation of `G(omega)`.
pub fn detect_layers(
    m: &MultiplexNetwork,
    omega: f64,
    normalization: Normalization,
) -> Result<Vec<(Partition, ThresholdSweep)>> {
    let c = multiplex_communicability(m, omega, normalization)?;
    (0..m.h()).into_par_iter().map(|a| detect_in(&c, m, a)).collect()
}

/// Monoplex detection on one layer taken alone.
pub fn detect_single_layer(
    layer: &LayerNetwork,
    normalization: Normalization,
) -> Result<(Partition, ThresholdSweep)> {
    let c = layer_communicability(layer, normalization)?;
    let xi = c.layer_distances(0)?;
    detect_from_distances(layer.name(), layer.labels(), &xi, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sym(n: usize, entries: &[(usize, usize, f64)]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for &(i, j, x) in entries {
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
        m
    }

    #[test]
    fn threshold_extremes() {
        let xi = sym(3, &[(0, 1, 1.0), (0, 2, 2.0), (1, 2, 3.0)]);
        assert!(threshold_graph(&xi, 0.5).iter().all(|&x| x == 0));
        let full = threshold_graph(&xi, 3.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(full[(i, j)], u8::from(i != j));
            }
        }
        let m = threshold_graph(&xi, 2.0);
        assert_eq!((m[(0, 1)], m[(0, 2)], m[(1, 2)]), (1, 1, 0));
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn components_examples() {
        assert_eq!(communities_from_threshold(&DMatrix::zeros(4, 4)), vec![0, 1, 2, 3]);
        let mut two = DMatrix::zeros(6, 6);
        for &(i, j) in &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
            two[(i, j)] = 1;
            two[(j, i)] = 1;
        }
        assert_eq!(communities_from_threshold(&two), vec![0, 0, 0, 1, 1, 1]);
        // a - b - c with a, c too far apart still forms one community
        let xi = sym(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 5.0)]);
        assert_eq!(communities_from_threshold(&threshold_graph(&xi, 1.0)), vec![0, 0, 0]);
    }

    #[test]
    fn quality_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gamma = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let gamma = (&gamma + gamma.transpose()) * 0.5;
        assert_eq!(quality(&gamma, &[0, 1, 2, 3, 4]).unwrap(), 0.0);
        let mut all = 0.0;
        for i in 0..5 {
            for j in (i + 1)..5 {
                all += gamma[(i, j)];
            }
        }
        assert!((quality(&gamma, &[0; 5]).unwrap() - all).abs() < 1e-14);
        for _ in 0..20 {
            let a: Vec<usize> = (0..5).map(|_| rng.random_range(0..3)).collect();
            let mut q = 0.0;
            for i in 0..5 {
                for j in 0..5 {
                    if i < j && a[i] == a[j] {
                        q += gamma[(i, j)];
                    }
                }
            }
            assert!((quality(&gamma, &a).unwrap() - q).abs() < 1e-14);
        }
        assert!(quality(&gamma, &[0, 0]).is_err());
    }

    #[test]
    fn sweep_ends_complete_and_coarsens() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let n = rng.random_range(2..10);
            let mut xi = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = (rng.random_range(0.0..4.0f64) * 4.0).round() / 4.0;
                    xi[(i, j)] = v;
                    xi[(j, i)] = v;
                }
            }
            let gamma = cohesion_from_distances(&xi);
            let s = sweep(&xi, &gamma).unwrap();
            assert!(s.candidates.windows(2).all(|w| w[0] < w[1]));
            assert!(s.partitions.last().unwrap().iter().all(|&c| c == 0));
            for w in s.partitions.windows(2) {
                for i in 0..n {
                    for j in 0..n {
                        if w[0][i] == w[0][j] {
                            assert_eq!(w[1][i], w[1][j]);
                        }
                    }
                }
            }
            for (k, p) in s.partitions.iter().enumerate() {
                let direct = communities_from_threshold(&threshold_graph(&xi, s.candidates[k]));
                assert_eq!(p, &direct);
            }
        }
    }

    #[test]
    fn two_groups_are_found() {
        let mut xi = DMatrix::from_element(6, 6, 4.0);
        for i in 0..6 {
            for j in 0..6 {
                if i == j {
                    xi[(i, j)] = 0.0;
                } else if (i < 3) == (j < 3) {
                    xi[(i, j)] = 1.0;
                }
            }
        }
        let labels: Vec<String> = (0..6).map(|i| i.to_string()).collect();
        let (p, _) = detect_from_distances("x", &labels, &xi, 0.0).unwrap();
        assert_eq!(p.assignment, vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(p.threshold, 1.0);
        assert!(p.quality > 0.0);
    }

    #[test]
    fn canonical_relabel() {
        assert_eq!(canonical_ids(&[7, 7, 2, 9, 2]), vec![0, 0, 1, 2, 1]);
        let p = Partition::from_assignment("x", vec!["a".into(), "b".into()], &[5, 5]).unwrap();
        assert_eq!(p.num_communities, 1);
    }
}
