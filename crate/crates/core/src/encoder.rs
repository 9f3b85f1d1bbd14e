//! Word-vector features for scene graphs, questions and answers.
//!
//! Text is normalised (lowercase, punctuation stripped, integers 0..=10
//! spelled out), embedded as the mean of its word vectors and
//! ℓ2-normalised block by block before it reaches any updating function.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene_graph::SceneGraph;
use crate::tensor::{l2_norm, Tensor};

pub const UNK_TOKEN: &str = "UNK";

const NUMBER_WORDS: [&str; 11] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];

/// Spelled-out form of `0..=10`.
pub fn number_word(n: usize) -> Option<&'static str> {
    NUMBER_WORDS.get(n).copied()
}

/// Lowercases, strips punctuation and replaces standalone integers in
/// `0..=10` with English words.
pub fn normalize_text(s: &str) -> Vec<String> {
    let mut cleaned = String::with_capacity(s.len());
    for ch in s.chars() {
        if ch == '\'' || ch == '\u{2019}' {
            continue;
        }
        if ch.is_alphanumeric() || ch.is_whitespace() {
            cleaned.extend(ch.to_lowercase());
        } else {
            cleaned.push(' ');
        }
    }
    cleaned
        .split_whitespace()
        .map(|tok| match tok.parse::<u64>() {
            Ok(n) if n <= 10 => NUMBER_WORDS[n as usize].to_string(),
            _ => tok.to_string(),
        })
        .collect()
}

/// Token -> vector lookup with a fallback vector for unknown tokens.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
    unk: Vec<f64>,
}

impl EmbeddingTable {
    /// Builds a table; `unk` defaults to the zero vector.
    pub fn new(
        dim: usize,
        entries: HashMap<String, Vec<f64>>,
        unk: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        for (tok, v) in &entries {
            if v.len() != dim {
                return Err(Error::Config(format!(
                    "embedding for `{tok}` has width {}, expected {dim}",
                    v.len()
                )));
            }
        }
        let unk = unk.unwrap_or_else(|| vec![0.0; dim]);
        if unk.len() != dim {
            return Err(Error::Config("UNK vector has the wrong width".into()));
        }
        Ok(EmbeddingTable { dim, entries, unk })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    pub fn unk(&self) -> &[f64] {
        &self.unk
    }

    pub fn get(&self, token: &str) -> &[f64] {
        self.entries.get(token).map_or(&self.unk, Vec::as_slice)
    }

    /// Parses the `token v1 .. vd` text format. Returns the table and any
    /// warnings (duplicate tokens, missing UNK row).
    pub fn parse(text: &str, source: &str) -> Result<(Self, Vec<String>)> {
        let mut entries: HashMap<String, Vec<f64>> = HashMap::new();
        let mut unk = None;
        let mut dim = None;
        let mut warnings = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values: Vec<f64> = parts
                .map(|p| {
                    p.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::Format {
                            path: source.to_string(),
                            line: line_no,
                            message: format!("`{p}` is not a finite number"),
                        })
                })
                .collect::<Result<_>>()?;
            let d = *dim.get_or_insert(values.len());
            if d == 0 || values.len() != d {
                return Err(Error::Format {
                    path: source.to_string(),
                    line: line_no,
                    message: format!("row has {} values, expected {d}", values.len()),
                });
            }
            if token == UNK_TOKEN {
                if unk.replace(values).is_some() {
                    warnings.push(format!(
                        "{source}:{line_no}: duplicate UNK row, last one wins"
                    ));
                }
            } else if entries.insert(token.to_string(), values).is_some() {
                warnings.push(format!(
                    "{source}:{line_no}: duplicate token `{token}`, last one wins"
                ));
            }
        }
        let dim = dim.ok_or_else(|| Error::Format {
            path: source.to_string(),
            line: 0,
            message: "embedding file is empty".into(),
        })?;
        if unk.is_none() {
            warnings.push(format!(
                "{source}: no UNK row, unknown tokens map to the zero vector"
            ));
        }
        Ok((EmbeddingTable::new(dim, entries, unk)?, warnings))
    }

    /// Writes the table in the text format, tokens sorted, UNK first.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut row = |tok: &str, v: &[f64]| {
            out.push_str(tok);
            for x in v {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        };
        row(UNK_TOKEN, &self.unk);
        let mut tokens: Vec<_> = self.entries.keys().collect();
        tokens.sort();
        for t in tokens {
            row(t, &self.entries[t]);
        }
        out
    }
}

/// Loads an embedding file, logging any warnings.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (table, warnings) = EmbeddingTable::parse(&text, &path.display().to_string())?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(table)
}

/// Mean of the token vectors; unknown tokens use the UNK vector and an
/// empty phrase is the zero vector.
pub fn embed_phrase<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> Vec<f64> {
    let mut acc = vec![0.0; table.dim()];
    if tokens.is_empty() {
        return acc;
    }
    for t in tokens {
        for (a, x) in acc.iter_mut().zip(table.get(t.as_ref())) {
            *a += x;
        }
    }
    let inv = 1.0 / tokens.len() as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    acc
}

pub fn l2_normalize(v: &[f64]) -> Vec<f64> {
    let n = l2_norm(v);
    if n > 1e-12 {
        v.iter().map(|x| x / n).collect()
    } else {
        v.to_vec()
    }
}

/// `l2_normalize(embed_phrase(normalize_text(text)))`.
pub fn embed_text(text: &str, table: &EmbeddingTable) -> Vec<f64> {
    l2_normalize(&embed_phrase(&normalize_text(text), table))
}

/// Which feature blocks are concatenated, in this order, into the input
/// global vector `u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GlobalMode {
    #[serde(rename = "ciq")]
    CandidateImageQuestion,
    #[serde(rename = "cq")]
    CandidateQuestion,
    #[serde(rename = "iq")]
    ImageQuestion,
    #[serde(rename = "q")]
    Question,
}

impl GlobalMode {
    pub fn includes_candidate(self) -> bool {
        matches!(
            self,
            GlobalMode::CandidateImageQuestion | GlobalMode::CandidateQuestion
        )
    }

    pub fn includes_image(self) -> bool {
        matches!(
            self,
            GlobalMode::CandidateImageQuestion | GlobalMode::ImageQuestion
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GlobalMode::CandidateImageQuestion => "ciq",
            GlobalMode::CandidateQuestion => "cq",
            GlobalMode::ImageQuestion => "iq",
            GlobalMode::Question => "q",
        }
    }
}

impl std::str::FromStr for GlobalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ciq" | "c-i-q" => Ok(GlobalMode::CandidateImageQuestion),
            "cq" | "c-q" => Ok(GlobalMode::CandidateQuestion),
            "iq" | "i-q" => Ok(GlobalMode::ImageQuestion),
            "q" => Ok(GlobalMode::Question),
            other => Err(Error::Config(format!("unknown global mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub d_w: usize,
    pub d_img: usize,
    pub use_attributes: bool,
    pub global_mode: GlobalMode,
}

impl EncoderConfig {
    /// 300-d word vectors and 2048-d image features.
    pub fn reference(global_mode: GlobalMode) -> Self {
        EncoderConfig {
            d_w: 300,
            d_img: 2048,
            use_attributes: true,
            global_mode,
        }
    }

    pub fn use_image(&self) -> bool {
        self.global_mode.includes_image()
    }

    pub fn node_width(&self) -> usize {
        if self.use_attributes {
            2 * self.d_w
        } else {
            self.d_w
        }
    }

    pub fn edge_width(&self) -> usize {
        self.d_w
    }

    pub fn global_width(&self) -> usize {
        let mut w = self.d_w;
        if self.global_mode.includes_candidate() {
            w += self.d_w;
        }
        if self.global_mode.includes_image() {
            w += self.d_img;
        }
        w
    }
}

/// Numeric node and edge features of one scene graph.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedGraph {
    pub nodes: Tensor,
    pub edges: Tensor,
    /// `(subject, object)` node positions per edge.
    pub endpoints: Vec<(usize, usize)>,
}

/// Node features are `[name]` or `[name; mean(attributes)]`, edge features
/// are the predicate phrase; every block is ℓ2-normalised on its own.
pub fn encode_graph(
    g: &SceneGraph,
    table: &EmbeddingTable,
    cfg: &EncoderConfig,
) -> Result<EncodedGraph> {
    if table.dim() != cfg.d_w {
        return Err(Error::Config(format!(
            "embedding table has dimension {}, encoder expects {}",
            table.dim(),
            cfg.d_w
        )));
    }
    let endpoints = g.endpoints()?;
    let node_w = cfg.node_width();
    let mut nodes = Vec::with_capacity(g.nodes.len() * node_w);
    for n in &g.nodes {
        nodes.extend(embed_text(&n.name, table));
        if cfg.use_attributes {
            let tokens: Vec<String> = n
                .attributes
                .iter()
                .flat_map(|a| normalize_text(a))
                .collect();
            nodes.extend(attribute_block(&n.attributes, table, tokens.is_empty()));
        }
    }
    let mut edges = Vec::with_capacity(g.edges.len() * cfg.d_w);
    for e in &g.edges {
        edges.extend(embed_text(&e.predicate, table));
    }
    Ok(EncodedGraph {
        nodes: Tensor::matrix(g.nodes.len(), node_w, nodes)?,
        edges: Tensor::matrix(g.edges.len(), cfg.d_w, edges)?,
        endpoints,
    })
}

/// Averages the per-attribute phrase vectors, then normalises.
fn attribute_block(attributes: &[String], table: &EmbeddingTable, empty: bool) -> Vec<f64> {
    if attributes.is_empty() || empty {
        return vec![0.0; table.dim()];
    }
    let mut acc = vec![0.0; table.dim()];
    for a in attributes {
        for (s, x) in acc.iter_mut().zip(embed_phrase(&normalize_text(a), table)) {
            *s += x;
        }
    }
    let inv = 1.0 / attributes.len() as f64;
    acc.iter_mut().for_each(|s| *s *= inv);
    l2_normalize(&acc)
}

/// Concatenates already-embedded global blocks in `(c, i, q)` order,
/// normalising each one.
pub fn assemble_global(
    candidate: Option<&[f64]>,
    image: Option<&[f64]>,
    question: &[f64],
    cfg: &EncoderConfig,
) -> Result<Vec<f64>> {
    let mode = cfg.global_mode;
    if mode.includes_candidate() != candidate.is_some() {
        return Err(Error::Config(format!(
            "global mode `{}` {} a candidate answer",
            mode.as_str(),
            if mode.includes_candidate() {
                "needs"
            } else {
                "does not take"
            }
        )));
    }
    if mode.includes_image() != image.is_some() {
        return Err(Error::Config(format!(
            "global mode `{}` {} image features",
            mode.as_str(),
            if mode.includes_image() {
                "needs"
            } else {
                "does not take"
            }
        )));
    }
    let mut u = Vec::with_capacity(cfg.global_width());
    if let Some(c) = candidate {
        check_width("candidate", c, cfg.d_w)?;
        u.extend(l2_normalize(c));
    }
    if let Some(i) = image {
        check_width("image", i, cfg.d_img)?;
        u.extend(l2_normalize(i));
    }
    check_width("question", question, cfg.d_w)?;
    u.extend(l2_normalize(question));
    Ok(u)
}

fn check_width(what: &str, v: &[f64], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::Config(format!(
            "{what} features have width {}, expected {expected}",
            v.len()
        )));
    }
    Ok(())
}

/// Builds `u` from raw text and optional image features.
pub fn encode_global(
    question: &str,
    candidate: Option<&str>,
    image: Option<&[f64]>,
    table: &EmbeddingTable,
    cfg: &EncoderConfig,
) -> Result<Vec<f64>> {
    let q = embed_phrase(&normalize_text(question), table);
    let c = candidate.map(|c| embed_phrase(&normalize_text(c), table));
    assemble_global(c.as_deref(), image, &q, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(&str, Vec<f64>)], unk: Option<Vec<f64>>) -> EmbeddingTable {
        let dim = rows.first().map_or(2, |r| r.1.len());
        EmbeddingTable::new(
            dim,
            rows.iter()
                .map(|(t, v)| (t.to_string(), v.clone()))
                .collect(),
            unk,
        )
        .unwrap()
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(
            normalize_text("On the Top-Of"),
            vec!["on", "the", "top", "of"]
        );
        assert_eq!(normalize_text("3 cars"), vec!["three", "cars"]);
        assert!(normalize_text("").is_empty());
        assert_eq!(normalize_text("10 or 11?"), vec!["ten", "or", "11"]);
        assert_eq!(normalize_text("What's 0"), vec!["whats", "zero"]);
    }

    #[test]
    fn phrase_means() {
        let t = table(
            &[
                ("car", vec![1.0, 0.0]),
                ("a", vec![2.0, 0.0]),
                ("b", vec![0.0, 4.0]),
            ],
            Some(vec![0.5, -0.5]),
        );
        assert_eq!(embed_phrase(&["car"], &t), vec![1.0, 0.0]);
        assert_eq!(embed_phrase(&["zzzq"], &t), vec![0.5, -0.5]);
        assert_eq!(embed_phrase(&["a", "b"], &t), vec![1.0, 2.0]);
        assert_eq!(embed_phrase::<&str>(&[], &t), vec![0.0, 0.0]);
    }

    #[test]
    fn l2_examples() {
        assert_eq!(l2_normalize(&[3.0, 4.0]), vec![0.6, 0.8]);
        assert_eq!(l2_normalize(&[0.0, 0.0]), vec![0.0, 0.0]);
        let u = [0.0, 1.0, 0.0];
        assert_eq!(l2_normalize(&u), u.to_vec());
    }

    fn words() -> EmbeddingTable {
        table(
            &[
                ("car", vec![1.0, 2.0, 0.0]),
                ("red", vec![0.0, 3.0, 4.0]),
                ("small", vec![1.0, 0.0, 1.0]),
                ("on", vec![0.0, 0.0, 2.0]),
                ("tree", vec![2.0, 2.0, 1.0]),
            ],
            None,
        )
    }

    fn cfg(use_attributes: bool, mode: GlobalMode) -> EncoderConfig {
        EncoderConfig {
            d_w: 3,
            d_img: 4,
            use_attributes,
            global_mode: mode,
        }
    }

    fn graph(attrs: Vec<&str>) -> SceneGraph {
        crate::scene_graph::parse_scene_graph(&format!(
            r#"{{"nodes":[{{"id":5,"name":"car","attributes":{}}},{{"id":2,"name":"tree"}}],
                "edges":[{{"predicate":"on","subject_id":5,"object_id":2}}]}}"#,
            serde_json::to_string(&attrs).unwrap()
        ))
        .unwrap()
    }

    #[test]
    fn node_with_attribute_has_two_unit_halves() {
        let enc = encode_graph(
            &graph(vec!["red"]),
            &words(),
            &cfg(true, GlobalMode::Question),
        )
        .unwrap();
        assert_eq!(enc.nodes.shape(), &[2, 6]);
        let row = enc.nodes.row(0);
        assert!((l2_norm(&row[..3]) - 1.0).abs() < 1e-12);
        assert!((l2_norm(&row[3..]) - 1.0).abs() < 1e-12);
        assert_eq!(&row[3..], &[0.0, 0.6, 0.8]);
        // "tree" has no attributes: zero block.
        assert_eq!(&enc.nodes.row(1)[3..], &[0.0, 0.0, 0.0]);
        assert_eq!(enc.endpoints, vec![(0, 1)]);
        assert_eq!(enc.edges.row(0), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn multiple_attributes_average_then_normalise() {
        let t = words();
        let enc = encode_graph(
            &graph(vec!["red", "small"]),
            &t,
            &cfg(true, GlobalMode::Question),
        )
        .unwrap();
        // mean((0,3,4), (1,0,1)) = (0.5, 1.5, 2.5)
        let expected = l2_normalize(&[0.5, 1.5, 2.5]);
        for (a, b) in enc.nodes.row(0)[3..].iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn names_only_width() {
        let enc = encode_graph(
            &graph(vec!["red"]),
            &words(),
            &cfg(false, GlobalMode::Question),
        )
        .unwrap();
        assert_eq!(enc.nodes.shape(), &[2, 3]);
    }

    #[test]
    fn global_widths_and_errors() {
        let t = words();
        let reference = EncoderConfig::reference(GlobalMode::CandidateImageQuestion);
        assert_eq!(reference.global_width(), 2648);
        assert_eq!(
            EncoderConfig::reference(GlobalMode::ImageQuestion).node_width(),
            600
        );

        let u = encode_global("", None, None, &t, &cfg(true, GlobalMode::Question)).unwrap();
        assert_eq!(u, vec![0.0; 3]);

        let img = [3.0, 0.0, 4.0, 0.0];
        let u = encode_global(
            "car on",
            None,
            Some(&img),
            &t,
            &cfg(true, GlobalMode::ImageQuestion),
        )
        .unwrap();
        assert_eq!(u.len(), 7);
        assert!((l2_norm(&u[..4]) - 1.0).abs() < 1e-12);
        assert!((l2_norm(&u[4..]) - 1.0).abs() < 1e-12);

        let u = encode_global(
            "car",
            Some("red"),
            Some(&img),
            &t,
            &cfg(true, GlobalMode::CandidateImageQuestion),
        )
        .unwrap();
        assert_eq!(&u[..3], &[0.0, 0.6, 0.8]);
        assert_eq!(&u[3..7], &[0.6, 0.0, 0.8, 0.0]);

        assert!(encode_global(
            "car",
            None,
            Some(&img),
            &t,
            &cfg(true, GlobalMode::CandidateImageQuestion)
        )
        .is_err());
        assert!(encode_global(
            "car",
            Some("red"),
            None,
            &t,
            &cfg(true, GlobalMode::ImageQuestion)
        )
        .is_err());
    }

    #[test]
    fn embedding_file_parsing() {
        let (t, warnings) = EmbeddingTable::parse("a 1 2 3\nb 4 5 6\n", "e.txt").unwrap();
        assert_eq!((t.len(), t.dim()), (2, 3));
        assert_eq!(t.unk(), &[0.0, 0.0, 0.0]);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("UNK"));

        let (t, warnings) = EmbeddingTable::parse("UNK 1 1\na 1 2\na 3 4\n", "e.txt").unwrap();
        assert_eq!(t.get("a"), &[3.0, 4.0]);
        assert_eq!(t.get("nope"), &[1.0, 1.0]);
        assert_eq!(warnings.len(), 1);

        let err = EmbeddingTable::parse("a 1 2 3\nb 4 5\n", "e.txt").unwrap_err();
        assert!(matches!(err, Error::Format { line: 2, .. }), "{err}");

        let (back, _) = EmbeddingTable::parse(&t.to_text(), "round").unwrap();
        assert_eq!(back, t);
    }
}
