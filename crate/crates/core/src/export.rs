//! File formats: partition JSON/CSV, sweep and curve CSV, matrix dumps, DOT and GraphML.
//!
//! Floats in CSV output carry 17 significant digits.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::community::{Partition, ThresholdSweep};
use crate::error::{Error, Result};
use crate::omega::CurvePoint;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub layer: String,
    pub omega_star: f64,
    pub threshold: f64,
    pub quality: f64,
    pub communities: Vec<Vec<String>>,
}

impl From<&Partition> for PartitionFile {
    fn from(p: &Partition) -> Self {
        Self {
            layer: p.layer.clone(),
            omega_star: p.omega,
            threshold: p.threshold,
            quality: p.quality,
            communities: p
                .communities()
                .into_iter()
                .map(|c| c.into_iter().map(|i| p.labels[i].clone()).collect())
                .collect(),
        }
    }
}

impl PartitionFile {
    /// Labels in community order; every label must appear exactly once.
    pub fn to_partition(&self) -> Result<Partition> {
        let mut labels = Vec::new();
        let mut assignment = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (c, members) in self.communities.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::Parse(format!("empty community {c} in `{}`", self.layer)));
            }
            for label in members {
                if !seen.insert(label.clone()) {
                    return Err(Error::Parse(format!("`{label}` listed twice in `{}`", self.layer)));
                }
                labels.push(label.clone());
                assignment.push(c);
            }
        }
        let mut p = Partition::from_assignment(self.layer.clone(), labels, &assignment)?;
        p.threshold = self.threshold;
        p.quality = self.quality;
        p.omega = self.omega_star;
        Ok(p)
    }
}

pub fn partition_json(p: &Partition) -> Result<String> {
    Ok(serde_json::to_string_pretty(&PartitionFile::from(p))? + "\n")
}

pub fn parse_partition_json(text: &str) -> Result<Partition> {
    let file: PartitionFile = serde_json::from_str(text)?;
    file.to_partition()
}

pub fn partition_csv(p: &Partition) -> String {
    let mut out = String::from("label,community_id\n");
    for (label, c) in p.labels.iter().zip(&p.assignment) {
        let _ = writeln!(out, "{},{}", csv_field(label), c);
    }
    out
}

pub fn sweep_csv(s: &ThresholdSweep) -> String {
    let mut out = String::from("threshold,quality,num_communities\n");
    for k in 0..s.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_f64(s.candidates[k]),
            fmt_f64(s.q_values[k]),
            s.num_communities(k)
        );
    }
    out
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("omega,delta_m\n");
    for p in curve {
        let _ = writeln!(out, "{},{}", fmt_f64(p.omega), fmt_f64(p.delta_m));
    }
    out
}

/// Square matrix with row and column headers.
pub fn matrix_csv(headers: &[String], m: &DMatrix<f64>) -> String {
    let mut out = String::from("node");
    for h in headers {
        out.push(',');
        out.push_str(&csv_field(h));
    }
    out.push('\n');
    for (i, h) in headers.iter().enumerate() {
        out.push_str(&csv_field(h));
        for j in 0..m.ncols() {
            out.push(',');
            out.push_str(&fmt_f64(m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf", "#aec7e8", "#ffbb78",
];

pub fn community_color(c: usize) -> &'static str {
    PALETTE[c % PALETTE.len()]
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Thresholded graph `M` as undirected DOT, nodes filled by community.
pub fn threshold_dot(p: &Partition, xi: &DMatrix<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "graph \"{}\" {{", dot_escape(&p.layer));
    let _ = writeln!(out, "  node [style=filled];");
    for (i, label) in p.labels.iter().enumerate() {
        let c = p.assignment[i];
        let _ = writeln!(
            out,
            "  n{i} [label=\"{}\", community={c}, fillcolor=\"{}\"];",
            dot_escape(label),
            community_color(c)
        );
    }
    for i in 0..p.n() {
        for j in (i + 1)..p.n() {
            if xi[(i, j)] <= p.threshold {
                let _ = writeln!(out, "  n{i} -- n{j} [xi={}];", fmt_f64(xi[(i, j)]));
            }
        }
    }
    out.push_str("}\n");
    out
}

/// Thresholded graph `M` as GraphML with `label`, `community`, `color` and edge `xi`.
pub fn threshold_graphml(p: &Partition, xi: &DMatrix<f64>) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    out.push_str("  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n");
    out.push_str("  <key id=\"community\" for=\"node\" attr.name=\"community\" attr.type=\"int\"/>\n");
    out.push_str("  <key id=\"color\" for=\"node\" attr.name=\"color\" attr.type=\"string\"/>\n");
    out.push_str("  <key id=\"xi\" for=\"edge\" attr.name=\"xi\" attr.type=\"double\"/>\n");
    let _ = writeln!(out, "  <graph id=\"{}\" edgedefault=\"undirected\">", xml_escape(&p.layer));
    for (i, label) in p.labels.iter().enumerate() {
        let c = p.assignment[i];
        let _ = writeln!(
            out,
            "    <node id=\"n{i}\"><data key=\"label\">{}</data><data key=\"community\">{c}</data><data key=\"color\">{}</data></node>",
            xml_escape(label),
            community_color(c)
        );
    }
    let mut e = 0;
    for i in 0..p.n() {
        for j in (i + 1)..p.n() {
            if xi[(i, j)] <= p.threshold {
                let _ = writeln!(
                    out,
                    "    <edge id=\"e{e}\" source=\"n{i}\" target=\"n{j}\"><data key=\"xi\">{}</data></edge>",
                    fmt_f64(xi[(i, j)])
                );
                e += 1;
            }
        }
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}
