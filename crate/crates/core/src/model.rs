//! Layers, multiplexes and the supra-adjacency matrix.
//!
//! Node `i` of layer `alpha` lives at flat index `alpha * n + i`, so each
//! layer occupies one contiguous diagonal block of the supra matrix.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeIndex {
    pub id: usize,
    pub label: String,
}

/// One weighted, undirected layer: symmetric, zero diagonal, weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNetwork {
    name: String,
    labels: Vec<String>,
    weights: DMatrix<f64>,
}

impl LayerNetwork {
    pub fn new(name: impl Into<String>, labels: Vec<String>, weights: DMatrix<f64>) -> Result<Self> {
        let name = name.into();
        let bad = |reason: String| Error::InvalidLayer {
            layer: name.clone(),
            reason,
        };
        let n = labels.len();
        if weights.nrows() != n || weights.ncols() != n {
            return Err(bad(format!(
                "{} labels but a {}x{} weight matrix",
                n,
                weights.nrows(),
                weights.ncols()
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(bad(format!("duplicate label `{label}`")));
            }
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(bad(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !(0.0..=1.0).contains(&w) {
                    return Err(bad(format!("weight {w} at ({i}, {j}) outside [0, 1]")));
                }
                if w != weights[(j, i)] {
                    return Err(bad(format!("asymmetric weight at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            name,
            labels,
            weights,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn node(&self, id: usize) -> Option<NodeIndex> {
        self.labels.get(id).map(|label| NodeIndex {
            id,
            label: label.clone(),
        })
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Sum of incident weights for every node.
    pub fn strengths(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.weights.row(i).sum()).collect()
    }

    /// Restrict to `labels` (which must all be present), in that order.
    pub fn restrict(&self, labels: &[String]) -> Result<Self> {
        let idx: Vec<usize> = labels
            .iter()
            .map(|l| {
                self.index_of(l).ok_or_else(|| Error::InvalidLayer {
                    layer: self.name.clone(),
                    reason: format!("unknown label `{l}`"),
                })
            })
            .collect::<Result<_>>()?;
        let weights = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.weights[(idx[i], idx[j])]);
        Ok(Self {
            name: self.name.clone(),
            labels: labels.to_vec(),
            weights,
        })
    }
}

/// `h >= 2` layers over one node set, coupled replica-to-replica with intensity `omega`.
#[derive(Debug, Clone)]
pub struct MultiplexNetwork {
    layers: Vec<LayerNetwork>,
    omega: f64,
}

fn check_omega(omega: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(Error::InvalidParameter(format!("omega {omega} outside [0, 1]")));
    }
    Ok(())
}

impl MultiplexNetwork {
    pub fn new(layers: Vec<LayerNetwork>, omega: f64) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidMultiplex(format!(
                "need at least 2 layers, got {}",
                layers.len()
            )));
        }
        check_omega(omega)?;
        let first = &layers[0];
        for layer in &layers[1..] {
            if layer.n() != first.n() {
                return Err(Error::InvalidMultiplex(format!(
                    "layer `{}` has {} nodes, layer `{}` has {}",
                    layer.name(),
                    layer.n(),
                    first.name(),
                    first.n()
                )));
            }
            if layer.labels() != first.labels() {
                return Err(Error::InvalidMultiplex(format!(
                    "layer `{}` label order differs from layer `{}`",
                    layer.name(),
                    first.name()
                )));
            }
        }
        Ok(Self { layers, omega })
    }

    pub fn layers(&self) -> &[LayerNetwork] {
        &self.layers
    }

    pub fn layer(&self, alpha: usize) -> Option<&LayerNetwork> {
        self.layers.get(alpha)
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name() == name)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        check_omega(omega)?;
        Ok(Self {
            layers: self.layers.clone(),
            omega,
        })
    }

    /// Nodes per layer.
    pub fn n(&self) -> usize {
        self.layers[0].n()
    }

    /// Number of layers.
    pub fn h(&self) -> usize {
        self.layers.len()
    }

    pub fn labels(&self) -> &[String] {
        self.layers[0].labels()
    }

    pub fn flat_index(&self, layer: usize, node: &NodeIndex) -> Result<usize> {
        flat_index(layer, node.id, self.n(), self.h())
    }

    pub fn unflatten(&self, k: usize) -> Result<(usize, NodeIndex)> {
        let (alpha, i) = unflatten(k, self.n(), self.h())?;
        Ok((alpha, self.layers[0].node(i).expect("in range")))
    }

    /// `"layer:label"` name of a flat index, used in diagnostics and CSV headers.
    pub fn flat_name(&self, k: usize) -> String {
        match unflatten(k, self.n(), self.h()) {
            Ok((alpha, i)) => format!("{}:{}", self.layers[alpha].name(), self.labels()[i]),
            Err(_) => format!("#{k}"),
        }
    }

    /// Supra matrix at an arbitrary intensity, leaving `self.omega` untouched.
    pub fn supra_at(&self, omega: f64) -> Result<SupraMatrix> {
        check_omega(omega)?;
        let n = self.n();
        let h = self.h();
        let mut entries = DMatrix::zeros(n * h, n * h);
        for (alpha, layer) in self.layers.iter().enumerate() {
            entries
                .view_mut((alpha * n, alpha * n), (n, n))
                .copy_from(layer.weights());
            for beta in 0..h {
                if beta != alpha {
                    for i in 0..n {
                        entries[(alpha * n + i, beta * n + i)] = omega;
                    }
                }
            }
        }
        Ok(SupraMatrix { n, h, entries })
    }
}

pub fn flat_index(layer: usize, node: usize, n: usize, h: usize) -> Result<usize> {
    if layer >= h {
        return Err(Error::OutOfRange(format!("layer {layer} with h = {h}")));
    }
    if node >= n {
        return Err(Error::OutOfRange(format!("node {node} with n = {n}")));
    }
    Ok(layer * n + node)
}

pub fn unflatten(k: usize, n: usize, h: usize) -> Result<(usize, usize)> {
    if n == 0 || k >= n * h {
        return Err(Error::OutOfRange(format!("flat index {k} with n = {n}, h = {h}")));
    }
    Ok((k / n, k % n))
}

/// The `nh x nh` weighted supra-adjacency matrix `W_L + C_LL`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupraMatrix {
    n: usize,
    h: usize,
    entries: DMatrix<f64>,
}

impl SupraMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn size(&self) -> usize {
        self.n * self.h
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn block(&self, alpha: usize, beta: usize) -> DMatrix<f64> {
        self.entries
            .view((alpha * self.n, beta * self.n), (self.n, self.n))
            .into_owned()
    }
}

/// `W = W_L + C_LL` with `C_ab = omega * I` for every pair of distinct layers.
pub fn assemble_supra(m: &MultiplexNetwork) -> SupraMatrix {
    m.supra_at(m.omega).expect("omega validated at construction")
}

// ---------------------------------------------------------------------------
// JSON files

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerFile {
    pub name: String,
    pub labels: Vec<String>,
    pub weights: Vec<Vec<f64>>,
}

impl From<&LayerNetwork> for LayerFile {
    fn from(layer: &LayerNetwork) -> Self {
        let w = layer.weights();
        Self {
            name: layer.name().to_string(),
            labels: layer.labels().to_vec(),
            weights: (0..layer.n())
                .map(|i| (0..layer.n()).map(|j| w[(i, j)]).collect())
                .collect(),
        }
    }
}

impl TryFrom<LayerFile> for LayerNetwork {
    type Error = Error;

    fn try_from(file: LayerFile) -> Result<Self> {
        let n = file.labels.len();
        if file.weights.len() != n || file.weights.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidLayer {
                layer: file.name,
                reason: format!("weights must be a full {n}x{n} matrix"),
            });
        }
        let weights = DMatrix::from_fn(n, n, |i, j| file.weights[i][j]);
        LayerNetwork::new(file.name, file.labels, weights)
    }
}

/// Multiplex description: layer file paths (relative to the multiplex file) and `omega`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiplexFile {
    pub layers: Vec<PathBuf>,
    #[serde(default)]
    pub omega: f64,
}

pub fn read_layer(path: &Path) -> Result<LayerNetwork> {
    let text = fs::read_to_string(path)?;
    let file: LayerFile = serde_json::from_str(&text)?;
    file.try_into()
}

pub fn write_layer(path: &Path, layer: &LayerNetwork) -> Result<()> {
    let text = serde_json::to_string_pretty(&LayerFile::from(layer))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_multiplex(path: &Path) -> Result<MultiplexNetwork> {
    let text = fs::read_to_string(path)?;
    let file: MultiplexFile = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let layers = file
        .layers
        .iter()
        .map(|p| read_layer(&base.join(p)))
        .collect::<Result<Vec<_>>>()?;
    MultiplexNetwork::new(layers, file.omega)
}

/// Write each layer as `<dir>/<name>.json` plus `<dir>/multiplex.json` pointing at them.
pub fn write_multiplex(dir: &Path, m: &MultiplexNetwork) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(m.h());
    for layer in m.layers() {
        let rel = PathBuf::from(format!("{}.json", layer.name()));
        write_layer(&dir.join(&rel), layer)?;
        paths.push(rel);
    }
    let file = MultiplexFile {
        layers: paths,
        omega: m.omega(),
    };
    let path = dir.join("multiplex.json");
    fs::write(&path, serde_json::to_string_pretty(&file)? + "\n")?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("N{i}")).collect()
    }

    fn zero_layer(name: &str, n: usize) -> LayerNetwork {
        LayerNetwork::new(name, labels(n), DMatrix::zeros(n, n)).unwrap()
    }

    #[test]
    fn zero_layers_zero_omega_give_zero_supra() {
        let m = MultiplexNetwork::new(vec![zero_layer("a", 2), zero_layer("b", 2)], 0.0).unwrap();
        assert_eq!(assemble_supra(&m).entries(), &DMatrix::<f64>::zeros(4, 4));
    }

    #[test]
    fn coupling_sits_on_replica_pairs() {
        let m = MultiplexNetwork::new(vec![zero_layer("a", 2), zero_layer("b", 2)], 0.5).unwrap();
        let s = assemble_supra(&m);
        for r in 0..4usize {
            for c in 0..4usize {
                let expected = if r.abs_diff(c) == 2 { 0.5 } else { 0.0 };
                assert_eq!(s.entries()[(r, c)], expected);
            }
        }
    }

    #[test]
    fn all_layer_pairs_are_coupled() {
        let layers = (0..3).map(|a| zero_layer(&format!("l{a}"), 1)).collect();
        let m = MultiplexNetwork::new(layers, 0.3).unwrap();
        let s = assemble_supra(&m);
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(s.entries()[(r, c)], if r == c { 0.0 } else { 0.3 });
            }
        }
    }

    #[test]
    fn flat_index_examples() {
        assert_eq!(flat_index(0, 0, 49, 3).unwrap(), 0);
        assert_eq!(flat_index(1, 0, 49, 3).unwrap(), 49);
        assert_eq!(flat_index(2, 48, 49, 3).unwrap(), 146);
        assert_eq!(unflatten(146, 49, 3).unwrap(), (2, 48));
        assert!(flat_index(3, 0, 49, 3).is_err());
        assert!(flat_index(0, 49, 49, 3).is_err());
        assert!(unflatten(147, 49, 3).is_err());
    }

    #[test]
    fn layer_validation() {
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = 0.5;
        assert!(LayerNetwork::new("x", labels(2), w.clone()).is_err(), "asymmetric");
        w[(1, 0)] = 0.5;
        assert!(LayerNetwork::new("x", labels(2), w.clone()).is_ok());
        w[(0, 0)] = 0.1;
        assert!(LayerNetwork::new("x", labels(2), w).is_err(), "self loop");
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = 1.5;
        w[(1, 0)] = 1.5;
        assert!(LayerNetwork::new("x", labels(2), w).is_err(), "range");
        let dup = vec!["A".to_string(), "A".to_string()];
        assert!(LayerNetwork::new("x", dup, DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn multiplex_validation() {
        assert!(MultiplexNetwork::new(vec![zero_layer("a", 2)], 0.1).is_err());
        assert!(MultiplexNetwork::new(vec![zero_layer("a", 2), zero_layer("b", 3)], 0.1).is_err());
        let other = LayerNetwork::new("b", vec!["N1".into(), "N0".into()], DMatrix::zeros(2, 2)).unwrap();
        assert!(MultiplexNetwork::new(vec![zero_layer("a", 2), other], 0.1).is_err());
        assert!(MultiplexNetwork::new(vec![zero_layer("a", 2), zero_layer("b", 2)], 1.1).is_err());
    }

    #[test]
    fn layer_file_round_trip() {
        let dir = std::env::temp_dir().join(format!("commdet-model-{}", std::process::id()));
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 2)] = 0.25;
        w[(2, 0)] = 0.25;
        let a = LayerNetwork::new("a", labels(3), w).unwrap();
        let m = MultiplexNetwork::new(vec![a, zero_layer("b", 3)], 0.4).unwrap();
        let path = write_multiplex(&dir, &m).unwrap();
        let back = read_multiplex(&path).unwrap();
        assert_eq!(back.layers(), m.layers());
        assert_eq!(back.omega(), 0.4);
        std::fs::remove_dir_all(dir).ok();
    }

    fn arb_multiplex() -> impl Strategy<Value = MultiplexNetwork> {
        (1usize..6, 2usize..4, 0.0f64..=1.0).prop_flat_map(|(n, h, omega)| {
            prop::collection::vec(prop::collection::vec(0.0f64..=1.0, n * n), h).prop_map(
                move |raw| {
                    let layers = raw
                        .iter()
                        .enumerate()
                        .map(|(a, v)| {
                            let w = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
                                std::cmp::Ordering::Less => v[i * n + j],
                                std::cmp::Ordering::Greater => v[j * n + i],
                                std::cmp::Ordering::Equal => 0.0,
                            });
                            LayerNetwork::new(format!("l{a}"), labels(n), w).unwrap()
                        })
                        .collect();
                    MultiplexNetwork::new(layers, omega).unwrap()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn supra_is_symmetric_zero_diagonal(m in arb_multiplex()) {
            let s = assemble_supra(&m);
            let e = s.entries();
            prop_assert_eq!(e, &e.transpose());
            for k in 0..s.size() {
                prop_assert_eq!(e[(k, k)], 0.0);
            }
            for a in 0..m.h() {
                prop_assert_eq!(&s.block(a, a), m.layers()[a].weights());
            }
        }

        #[test]
        fn replica_strength_at_least_coupling(m in arb_multiplex()) {
            let s = assemble_supra(&m);
            let floor = (m.h() - 1) as f64 * m.omega();
            for k in 0..s.size() {
                prop_assert!(s.entries().row(k).sum() >= floor - 1e-15);
            }
        }

        #[test]
        fn zero_omega_is_block_diagonal(m in arb_multiplex()) {
            let s = m.supra_at(0.0).unwrap();
            for a in 0..m.h() {
                for b in 0..m.h() {
                    if a != b {
                        prop_assert!(s.block(a, b).iter().all(|&x| x == 0.0));
                    }
                }
            }
        }
    }
}
