//! Node and edge salience from the updated features of a GN pass, and
//! Graphviz export of the filtered graph.
//!
//! Nodes and edges are ranked independently by the ℓ2 norm of `v'` and
//! `e'`. The smallest are dropped; any kept edge pulls its two endpoints
//! back in so the overlay stays connected.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gn::GraphState;
use crate::heads::{QaModel, SampleInput};
use crate::scene_graph::SceneGraph;
use crate::tensor::l2_norm;

/// How many elements of each kind survive filtering.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Selection {
    /// The top `ceil(q * n)` elements, `q` in `[0, 1]`.
    Fraction(f64),
    /// The top `k` elements.
    TopK(usize),
}

impl Default for Selection {
    fn default() -> Self {
        Selection::Fraction(0.5)
    }
}

impl Selection {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Selection::Fraction(q) if !(0.0..=1.0).contains(&q) => Err(Error::Config(format!(
                "salience fraction {q} outside [0, 1]"
            ))),
            _ => Ok(()),
        }
    }

    /// Elements kept out of `n` before ties are added.
    pub fn count(&self, n: usize) -> usize {
        match *self {
            Selection::Fraction(q) => ((q * n as f64).ceil() as usize).min(n),
            Selection::TopK(k) => k.min(n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SalienceReport {
    pub node_norms: Vec<f64>,
    pub edge_norms: Vec<f64>,
    /// Node positions, ascending.
    pub kept_nodes: Vec<usize>,
    /// Edge positions, ascending.
    pub kept_edges: Vec<usize>,
    pub selection: Selection,
    /// Smallest norm that passed; `None` when nothing of that kind was kept.
    pub node_threshold: Option<f64>,
    pub edge_threshold: Option<f64>,
}

impl SalienceReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn node_kept(&self, i: usize) -> bool {
        self.kept_nodes.binary_search(&i).is_ok()
    }

    pub fn edge_kept(&self, j: usize) -> bool {
        self.kept_edges.binary_search(&j).is_ok()
    }
}

fn row_norms(data: &[f64], rows: usize) -> Vec<f64> {
    if rows == 0 {
        return Vec::new();
    }
    let width = data.len() / rows;
    (0..rows)
        .map(|r| l2_norm(&data[r * width..(r + 1) * width]))
        .collect()
}

/// Positions whose norm is at least the `count`-th largest.
fn top(norms: &[f64], count: usize) -> (Vec<usize>, Option<f64>) {
    if count == 0 {
        return (Vec::new(), None);
    }
    let mut sorted = norms.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[count - 1];
    let kept = (0..norms.len())
        .filter(|&i| norms[i] >= threshold)
        .collect();
    (kept, Some(threshold))
}

/// Ranks the elements of a GN output.
pub fn salience(state: &GraphState, selection: Selection) -> Result<SalienceReport> {
    selection.validate()?;
    let node_norms = row_norms(state.nodes.data(), state.num_nodes());
    let edge_norms = row_norms(state.edges.data(), state.num_edges());
    let (mut kept_nodes, node_threshold) = top(&node_norms, selection.count(node_norms.len()));
    let (kept_edges, edge_threshold) = top(&edge_norms, selection.count(edge_norms.len()));
    for &j in &kept_edges {
        kept_nodes.push(state.senders[j]);
        kept_nodes.push(state.receivers[j]);
    }
    kept_nodes.sort_unstable();
    kept_nodes.dedup();
    Ok(SalienceReport {
        node_norms,
        edge_norms,
        kept_nodes,
        kept_edges,
        selection,
        node_threshold,
        edge_threshold,
    })
}

/// Runs the model's GN on one sample and ranks its output. A u-GN pass
/// depends on the candidate; `None` uses the predicted one.
pub fn explain_sample(
    model: &QaModel,
    x: &SampleInput,
    candidate: Option<usize>,
    selection: Selection,
) -> Result<(GraphState, SalienceReport)> {
    let candidate = match (model.head(), candidate) {
        (crate::heads::HeadKind::Factorized, _) => None,
        (_, Some(c)) => Some(c),
        (_, None) => Some(model.predict(x)?),
    };
    let out = model.gn_output(x, candidate)?;
    let report = salience(&out, selection)?;
    Ok((out, report))
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

const KEPT: &str = "style=solid, color=black";
const DROPPED: &str = "style=dashed, color=grey, fontcolor=grey";

/// Graphviz digraph of `g` with dropped elements dashed and grey.
pub fn export_dot(g: &SceneGraph, report: &SalienceReport) -> Result<String> {
    if report.node_norms.len() != g.nodes.len() || report.edge_norms.len() != g.edges.len() {
        return Err(Error::Config(format!(
            "salience report covers {} nodes and {} edges, graph has {} and {}",
            report.node_norms.len(),
            report.edge_norms.len(),
            g.nodes.len(),
            g.edges.len()
        )));
    }
    let endpoints = g.endpoints()?;
    let mut out = String::from("digraph scene {\n");
    for (i, node) in g.nodes.iter().enumerate() {
        let label = if node.attributes.is_empty() {
            node.name.clone()
        } else {
            format!("{} [{}]", node.name, node.attributes.join(", "))
        };
        let style = if report.node_kept(i) { KEPT } else { DROPPED };
        let _ = writeln!(out, "  n{i} [label={}, {style}];", quote(&label));
    }
    for (j, (edge, &(s, o))) in g.edges.iter().zip(&endpoints).enumerate() {
        let style = if report.edge_kept(j) { KEPT } else { DROPPED };
        let _ = writeln!(
            out,
            "  n{s} -> n{o} [label={}, {style}];",
            quote(&edge.predicate)
        );
    }
    out.push_str("}\n");
    Ok(out)
}
