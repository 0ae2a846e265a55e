//! Normalized mutual information between partitions.

use std::collections::HashMap;

use crate::community::Partition;
use crate::error::{Error, Result};

/// `2 I(A; B) / (H(A) + H(B))` with natural logarithms.
///
/// Two single-community partitions have `H(A) = H(B) = 0` and score 1.
pub fn nmi_assignments(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::NodeSetMismatch(format!("{} vs {} nodes", a.len(), b.len())));
    }
    let n = a.len();
    if n == 0 {
        return Err(Error::NodeSetMismatch("empty partitions".into()));
    }
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut ca: HashMap<usize, usize> = HashMap::new();
    let mut cb: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    // Entropies from sorted counts: identical partitions give I = H exactly,
    // and swapping the arguments or relabelling cannot change the result.
    let entropy = |counts: Vec<usize>| {
        let mut v = counts;
        v.sort_unstable();
        let nf = n as f64;
        -v.iter()
            .map(|&c| {
                let p = c as f64 / nf;
                p * p.ln()
            })
            .sum::<f64>()
    };
    let ha = entropy(ca.into_values().collect());
    let hb = entropy(cb.into_values().collect());
    if ha + hb == 0.0 {
        return Ok(1.0);
    }
    let hab = entropy(joint.into_values().collect());
    let mi = ha + hb - hab;
    Ok((2.0 * mi / (ha + hb)).clamp(0.0, 1.0))
}

/// NMI between partitions of the same labelled node set, matched by label.
pub fn nmi(a: &Partition, b: &Partition) -> Result<f64> {
    if a.labels == b.labels {
        return nmi_assignments(&a.assignment, &b.assignment);
    }
    if a.labels.len() != b.labels.len() {
        return Err(Error::NodeSetMismatch(format!(
            "`{}` has {} nodes, `{}` has {}",
            a.layer,
            a.labels.len(),
            b.layer,
            b.labels.len()
        )));
    }
    let index: HashMap<&str, usize> = b.labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let aligned = a
        .labels
        .iter()
        .map(|l| {
            index
                .get(l.as_str())
                .map(|&i| b.assignment[i])
                .ok_or_else(|| Error::NodeSetMismatch(format!("`{l}` missing from `{}`", b.layer)))
        })
        .collect::<Result<Vec<_>>>()?;
    nmi_assignments(&a.assignment, &aligned)
}
