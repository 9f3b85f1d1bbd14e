//! Symbolic scene graphs: named, attributed object nodes joined by directed,
//! named relationship edges.
//!
//! JSON layout (one graph per document, or one per line in a corpus):
//!
//! ```json
//! {"image_id": "img-1",
//!  "nodes": [{"id": 0, "name": "man", "attributes": ["tall"], "bbox": [1, 2, 30, 40]},
//!            {"id": 1, "name": "kite", "attributes": []}],
//!  "edges": [{"predicate": "holding", "subject_id": 0, "object_id": 1}]}
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneNode {
    pub id: i64,
    pub name: String,
    #[serde(default)]
    pub attributes: Vec<String>,
    /// `[x, y, w, h]` in pixels. Kept for provenance; not encoded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SceneEdge {
    pub predicate: String,
    pub subject_id: i64,
    pub object_id: i64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_id: Option<String>,
    #[serde(default)]
    pub nodes: Vec<SceneNode>,
    #[serde(default)]
    pub edges: Vec<SceneEdge>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    DuplicateNodeId {
        index: usize,
        id: i64,
    },
    EmptyName {
        index: usize,
        id: i64,
    },
    EmptyPredicate {
        edge: usize,
    },
    DanglingEdge {
        edge: usize,
        role: &'static str,
        id: i64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNodeId { index, id } => {
                write!(f, "node {index} repeats id {id}")
            }
            Violation::EmptyName { index, id } => {
                write!(f, "node {index} (id {id}) has an empty name")
            }
            Violation::EmptyPredicate { edge } => write!(f, "edge {edge} has an empty predicate"),
            Violation::DanglingEdge { edge, role, id } => {
                write!(f, "edge {edge} references missing {role} node id {id}")
            }
        }
    }
}

/// Outcome of [`SceneGraph::validate`]. Notices (self-loops, parallel edges)
/// are informational and never make a graph invalid.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub notices: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl SceneGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut seen = HashSet::new();
        for (index, n) in self.nodes.iter().enumerate() {
            if !seen.insert(n.id) {
                report
                    .violations
                    .push(Violation::DuplicateNodeId { index, id: n.id });
            }
            if n.name.trim().is_empty() {
                report
                    .violations
                    .push(Violation::EmptyName { index, id: n.id });
            }
        }
        let mut pairs = HashMap::new();
        for (edge, e) in self.edges.iter().enumerate() {
            if e.predicate.trim().is_empty() {
                report.violations.push(Violation::EmptyPredicate { edge });
            }
            for (role, id) in [("subject", e.subject_id), ("object", e.object_id)] {
                if !seen.contains(&id) {
                    report
                        .violations
                        .push(Violation::DanglingEdge { edge, role, id });
                }
            }
            if e.subject_id == e.object_id {
                report.notices.push(format!(
                    "edge {edge} is a self-loop on node id {}",
                    e.subject_id
                ));
            }
            if let Some(first) = pairs.insert((e.subject_id, e.object_id), edge) {
                report.notices.push(format!(
                    "edge {edge} is parallel to edge {first} ({} -> {})",
                    e.subject_id, e.object_id
                ));
            }
        }
        report
    }

    /// Maps node ids to list positions. Assumes a valid graph.
    pub fn index_of(&self) -> HashMap<i64, usize> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id, i))
            .collect()
    }

    /// `(subject, object)` list positions for every edge.
    pub fn endpoints(&self) -> Result<Vec<(usize, usize)>> {
        let index = self.index_of();
        self.edges
            .iter()
            .enumerate()
            .map(|(m, e)| {
                let s = index.get(&e.subject_id);
                let o = index.get(&e.object_id);
                match (s, o) {
                    (Some(&s), Some(&o)) => Ok((s, o)),
                    _ => Err(Error::Validation(vec![format!(
                        "edge {m} references a missing node"
                    )])),
                }
            })
            .collect()
    }

    /// The same nodes with every edge removed.
    pub fn without_edges(&self) -> SceneGraph {
        SceneGraph {
            image_id: self.image_id.clone(),
            nodes: self.nodes.clone(),
            edges: Vec::new(),
        }
    }

    /// Reorders the node list so that new position `i` holds old node
    /// `perm[i]`. Ids, and therefore edges, are unaffected.
    pub fn permute_nodes(&self, perm: &[usize]) -> SceneGraph {
        SceneGraph {
            image_id: self.image_id.clone(),
            nodes: perm.iter().map(|&i| self.nodes[i].clone()).collect(),
            edges: self.edges.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scene graphs always serialize")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene graphs always serialize")
    }
}

/// Parses and validates one JSON scene graph.
pub fn parse_scene_graph(text: &str) -> Result<SceneGraph> {
    let g: SceneGraph = serde_json::from_str(text)?;
    let report = g.validate();
    if !report.is_ok() {
        return Err(Error::Validation(
            report.violations.iter().map(ToString::to_string).collect(),
        ));
    }
    for notice in &report.notices {
        log::debug!("{notice}");
    }
    Ok(g)
}

pub fn serialize(g: &SceneGraph) -> String {
    g.to_json()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_graph() {
        let g = parse_scene_graph(r#"{"nodes":[],"edges":[]}"#).unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (0, 0));
        assert_eq!(parse_scene_graph(&serialize(&g)).unwrap(), g);
    }

    #[test]
    fn single_attributed_node() {
        let g = parse_scene_graph(
            r#"{"nodes":[{"id":0,"name":"car","attributes":["red"]}],"edges":[]}"#,
        )
        .unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (1, 0));
        assert_eq!(g.nodes[0].attributes, vec!["red".to_string()]);
    }

    #[test]
    fn directed_edge() {
        let text = r#"{"nodes":[{"id":0,"name":"man"},{"id":1,"name":"kite"}],
                       "edges":[{"predicate":"holding","subject_id":0,"object_id":1}]}"#;
        let g = parse_scene_graph(text).unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (2, 1));
        assert_eq!(g.endpoints().unwrap(), vec![(0, 1)]);
        assert_eq!(g.nodes[g.endpoints().unwrap()[0].0].name, "man");
        let back = parse_scene_graph(&serialize(&g)).unwrap();
        assert_eq!(back, g);
        assert_eq!(
            serialize(&g),
            r#"{"nodes":[{"id":0,"name":"man","attributes":[]},{"id":1,"name":"kite","attributes":[]}],"edges":[{"predicate":"holding","subject_id":0,"object_id":1}]}"#
        );
    }

    #[test]
    fn malformed_json_reports_location() {
        let err = parse_scene_graph("{\n  \"nodes\": [,]\n}").unwrap_err();
        match err {
            Error::Json { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_edge_is_named() {
        let g = SceneGraph {
            image_id: None,
            nodes: vec![SceneNode {
                id: 0,
                name: "cup".into(),
                attributes: vec![],
                bbox: None,
            }],
            edges: vec![SceneEdge {
                predicate: "on".into(),
                subject_id: 0,
                object_id: 99,
            }],
        };
        let report = g.validate();
        assert_eq!(
            report.violations,
            vec![Violation::DanglingEdge {
                edge: 0,
                role: "object",
                id: 99
            }]
        );
        let msg = report.violations[0].to_string();
        assert!(msg.contains("edge 0") && msg.contains("99"));
        assert!(matches!(
            parse_scene_graph(&serialize(&g)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn duplicate_ids_one_violation_each() {
        let node = |id| SceneNode {
            id,
            name: "x".into(),
            attributes: vec![],
            bbox: None,
        };
        let g = SceneGraph {
            image_id: None,
            nodes: vec![node(1), node(1), node(2), node(1), node(2)],
            edges: vec![],
        };
        assert_eq!(g.validate().violations.len(), 3);
    }

    #[test]
    fn self_loops_and_parallel_edges_are_notices() {
        let text = r#"{"nodes":[{"id":0,"name":"a"},{"id":1,"name":"b"}],
            "edges":[{"predicate":"p","subject_id":0,"object_id":0},
                     {"predicate":"p","subject_id":0,"object_id":1},
                     {"predicate":"q","subject_id":0,"object_id":1}]}"#;
        let g = parse_scene_graph(text).unwrap();
        let report = g.validate();
        assert!(report.is_ok());
        assert_eq!(report.notices.len(), 2);
    }

    #[test]
    fn bbox_round_trips() {
        let text = r#"{"image_id":"7","nodes":[{"id":3,"name":"tree","attributes":["green","tall"],"bbox":[1.0,2.0,3.5,4.0]}],"edges":[]}"#;
        let g = parse_scene_graph(text).unwrap();
        assert_eq!(g.nodes[0].bbox, Some([1.0, 2.0, 3.5, 4.0]));
        assert_eq!(serialize(&g), text);
    }
}
