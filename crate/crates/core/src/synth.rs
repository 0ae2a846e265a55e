//! Seeded synthetic multiplexes for benchmarks, demos and tests.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{build_layer, CorrelationLayerSpec, TimeSeriesTable};
use crate::model::{LayerNetwork, MultiplexNetwork};

pub fn node_labels(n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len().max(2);
    (0..n).map(|i| format!("N{i:0width$}")).collect()
}

/// Node `i` belongs to group `i * groups / n` (contiguous blocks).
pub fn block_truth(n: usize, groups: usize) -> Vec<usize> {
    (0..n).map(|i| i * groups / n).collect()
}

/// Every layer is the same set of disjoint weighted cliques.
pub fn planted_cliques(
    n: usize,
    groups: usize,
    h: usize,
    within: f64,
    across: f64,
    omega: f64,
) -> Result<(MultiplexNetwork, Vec<usize>)> {
    let truth = block_truth(n, groups);
    let w = DMatrix::from_fn(n, n, |i, j| match (i == j, truth[i] == truth[j]) {
        (true, _) => 0.0,
        (false, true) => within,
        (false, false) => across,
    });
    let layers = (0..h)
        .map(|a| LayerNetwork::new(format!("layer{a}"), node_labels(n), w.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok((MultiplexNetwork::new(layers, omega)?, truth))
}

/// Random weighted layers with a ring backbone, so no node is ever isolated.
pub fn random_multiplex(seed: u64, n: usize, h: usize, density: f64) -> Result<MultiplexNetwork> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = (0..h)
        .map(|a| {
            let mut w = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < density {
                        let x = rng.random_range(0.05..=1.0);
                        w[(i, j)] = x;
                        w[(j, i)] = x;
                    }
                }
            }
            if n > 1 {
                for i in 0..n {
                    let j = (i + 1) % n;
                    if i != j && w[(i, j)] == 0.0 {
                        let x = rng.random_range(0.05..=1.0);
                        w[(i, j)] = x;
                        w[(j, i)] = x;
                    }
                }
            }
            LayerNetwork::new(format!("layer{a}"), node_labels(n), w)
        })
        .collect::<Result<Vec<_>>>()?;
    MultiplexNetwork::new(layers, 0.0)
}

/// Layers built from time series driven by shared group factors.
///
/// Entity `i` of layer `a` follows `loading * F_a[t, group(i)] + noise`, with
/// independent factors per layer. All layers share the planted grouping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedPlanted {
    pub n: usize,
    pub groups: usize,
    pub layers: usize,
    pub observations: usize,
    pub loading: f64,
}

impl Default for CorrelatedPlanted {
    fn default() -> Self {
        Self {
            n: 30,
            groups: 3,
            layers: 3,
            // April 1 to June 30
            observations: 91,
            loading: 0.8,
        }
    }
}

impl CorrelatedPlanted {
    /// One table per layer plus the planted grouping (`i mod groups`).
    pub fn tables(&self, seed: u64) -> Result<(Vec<TimeSeriesTable>, Vec<usize>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<usize> = (0..self.n).map(|i| i % self.groups).collect();
        let start = chrono::NaiveDate::from_ymd_opt(2020, 4, 1).expect("valid date");
        let times: Vec<String> = (0..self.observations)
            .map(|d| (start + chrono::Days::new(d as u64)).format("%Y-%m-%d").to_string())
            .collect();
        let mut tables = Vec::with_capacity(self.layers);
        for _ in 0..self.layers {
            let factors: Vec<Vec<f64>> = (0..self.observations)
                .map(|_| (0..self.groups).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let values = (0..self.n)
                .map(|i| {
                    (0..self.observations)
                        .map(|t| {
                            let noise: f64 = rng.sample(StandardNormal);
                            Some(self.loading * factors[t][truth[i]] + noise)
                        })
                        .collect()
                })
                .collect();
            tables.push(TimeSeriesTable::new(node_labels(self.n), times.clone(), values)?);
        }
        Ok((tables, truth))
    }

    /// Correlation layers built through the ingest path.
    pub fn multiplex(&self, seed: u64, spec: &CorrelationLayerSpec) -> Result<(MultiplexNetwork, Vec<usize>)> {
        let (tables, truth) = self.tables(seed)?;
        let layers = tables
            .iter()
            .enumerate()
            .map(|(a, t)| build_layer(&format!("layer{a}"), t, spec).map(|(l, _)| l))
            .collect::<Result<Vec<_>>>()?;
        Ok((MultiplexNetwork::new(layers, 0.0)?, truth))
    }
}
