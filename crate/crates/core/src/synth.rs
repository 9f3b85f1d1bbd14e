//! Synthetic scene graphs with templated multiple-choice questions whose
//! answers come from graph traversals.
//!
//! Four question kinds:
//!
//! | kind           | pattern                                    | answer        |
//! |----------------|--------------------------------------------|---------------|
//! | `attribute`    | what color is the X                        | X's color     |
//! | `count`        | how many X are there                       | zero .. three |
//! | `relation1hop` | what is P the X                            | subject name  |
//! | `relation2hop` | what is P the thing that is P the X        | subject name  |
//!
//! Relation questions draw at least three decoys from names present in the
//! graph, so node names alone cannot single out the answer.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng as _, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    write_image_features, write_samples, write_scene_graphs, Context, ImageFeatures, QaSample,
};
use crate::encoder::{number_word, EmbeddingTable};
use crate::error::{Error, Result};
use crate::scene_graph::{SceneEdge, SceneGraph, SceneNode};
use crate::Rng;

fn words(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// Vocabularies and size ranges of generated worlds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub names: Vec<String>,
    pub colors: Vec<String>,
    pub materials: Vec<String>,
    pub predicates: Vec<String>,
    pub nodes: (usize, usize),
    pub edges: (usize, usize),
    pub color_prob: f64,
    pub material_prob: f64,
    /// Up to this many extra copies of one name per graph.
    pub max_duplicates: usize,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            names: words(&[
                "cube", "ball", "cup", "table", "dog", "cat", "car", "tree", "box", "lamp",
                "chair", "book",
            ]),
            colors: words(&[
                "red", "blue", "green", "yellow", "purple", "orange", "white", "black",
            ]),
            materials: words(&["metal", "wooden", "plastic"]),
            predicates: words(&["on", "near", "behind"]),
            nodes: (4, 6),
            edges: (3, 7),
            color_prob: 0.8,
            material_prob: 0.5,
            max_duplicates: 2,
        }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("world spec: {m}")));
        if self.names.is_empty() || self.colors.is_empty() || self.predicates.is_empty() {
            return bad("name, color and predicate vocabularies must be non-empty");
        }
        if self.nodes.0 == 0 || self.nodes.0 > self.nodes.1 || self.edges.0 > self.edges.1 {
            return bad("node and edge ranges must be ordered and allow at least one node");
        }
        if self.nodes.1 > self.names.len() {
            return bad("more nodes than distinct names");
        }
        if self.edges.0 > self.nodes.0 * (self.nodes.0 - 1) {
            return bad("minimum edge count exceeds the possible node pairs");
        }
        for (what, p) in [("color", self.color_prob), ("material", self.material_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{what} probability {p} outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// Every token a generated question, graph or answer can contain.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        let mut v: BTreeSet<String> = TEMPLATE_WORDS.iter().map(|s| s.to_string()).collect();
        v.extend((0..=10).filter_map(number_word).map(String::from));
        for list in [&self.names, &self.colors, &self.materials, &self.predicates] {
            for w in list {
                v.extend(crate::encoder::normalize_text(w));
            }
        }
        v
    }
}

const TEMPLATE_WORDS: [&str; 10] = [
    "what", "color", "is", "the", "how", "many", "are", "there", "thing", "that",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QaKind {
    Attribute,
    Count,
    Relation1hop,
    Relation2hop,
}

impl QaKind {
    pub const ALL: [QaKind; 4] = [
        QaKind::Attribute,
        QaKind::Count,
        QaKind::Relation1hop,
        QaKind::Relation2hop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QaKind::Attribute => "attribute",
            QaKind::Count => "count",
            QaKind::Relation1hop => "relation1hop",
            QaKind::Relation2hop => "relation2hop",
        }
    }

    pub fn is_relation(self) -> bool {
        matches!(self, QaKind::Relation1hop | QaKind::Relation2hop)
    }
}

impl fmt::Display for QaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QaKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown question kind `{s}`")))
    }
}

/// A question's template parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Question {
    Attribute { name: String },
    Count { name: String },
    Relation1hop { predicate: String, name: String },
    Relation2hop { predicate: String, name: String },
}

impl Question {
    pub fn kind(&self) -> QaKind {
        match self {
            Question::Attribute { .. } => QaKind::Attribute,
            Question::Count { .. } => QaKind::Count,
            Question::Relation1hop { .. } => QaKind::Relation1hop,
            Question::Relation2hop { .. } => QaKind::Relation2hop,
        }
    }

    pub fn text(&self) -> String {
        match self {
            Question::Attribute { name } => format!("what color is the {name}"),
            Question::Count { name } => format!("how many {name} are there"),
            Question::Relation1hop { predicate, name } => format!("what is {predicate} the {name}"),
            Question::Relation2hop { predicate, name } => {
                format!("what is {predicate} the thing that is {predicate} the {name}")
            }
        }
    }

    /// Inverse of [`Question::text`] for single-token names and predicates.
    pub fn parse(text: &str) -> Option<Question> {
        let t: Vec<&str> = text.split_whitespace().collect();
        match t.as_slice() {
            ["what", "color", "is", "the", name] => Some(Question::Attribute {
                name: name.to_string(),
            }),
            ["how", "many", name, "are", "there"] => Some(Question::Count {
                name: name.to_string(),
            }),
            ["what", "is", p, "the", "thing", "that", "is", p2, "the", name] if p == p2 => {
                Some(Question::Relation2hop {
                    predicate: p.to_string(),
                    name: name.to_string(),
                })
            }
            ["what", "is", p, "the", name] => Some(Question::Relation1hop {
                predicate: p.to_string(),
                name: name.to_string(),
            }),
            _ => None,
        }
    }
}

fn nodes_named<'a>(g: &'a SceneGraph, name: &'a str) -> impl Iterator<Item = usize> + 'a {
    g.nodes
        .iter()
        .enumerate()
        .filter(move |(_, n)| n.name == name)
        .map(|(i, _)| i)
}

fn unique_node(g: &SceneGraph, name: &str) -> Option<usize> {
    let mut it = nodes_named(g, name);
    let first = it.next()?;
    it.next().is_none().then_some(first)
}

/// The single node with a `predicate` edge into `object`, if exactly one.
fn unique_subject(g: &SceneGraph, predicate: &str, object: usize) -> Option<usize> {
    let oid = g.nodes[object].id;
    let index = g.index_of();
    let mut subjects = g
        .edges
        .iter()
        .filter(|e| e.predicate == predicate && e.object_id == oid)
        .map(|e| index[&e.subject_id]);
    let first = subjects.next()?;
    subjects.next().is_none().then_some(first)
}

fn colors_of<'a>(n: &'a SceneNode, spec: &'a WorldSpec) -> Vec<&'a String> {
    n.attributes
        .iter()
        .filter(|a| spec.colors.contains(a))
        .collect()
}

/// Graph-traversal answer; `None` where the question is ill-posed.
pub fn answer_oracle(g: &SceneGraph, q: &Question, spec: &WorldSpec) -> Option<String> {
    match q {
        Question::Attribute { name } => {
            let n = &g.nodes[unique_node(g, name)?];
            match colors_of(n, spec).as_slice() {
                [c] => Some((*c).clone()),
                _ => None,
            }
        }
        Question::Count { name } => number_word(nodes_named(g, name).count()).map(String::from),
        Question::Relation1hop { predicate, name } => {
            let x = unique_node(g, name)?;
            let s = unique_subject(g, predicate, x)?;
            Some(g.nodes[s].name.clone()).filter(|a| a != name)
        }
        Question::Relation2hop { predicate, name } => {
            let x = unique_node(g, name)?;
            let b = unique_subject(g, predicate, x)?;
            let a = unique_subject(g, predicate, b)?;
            (a != x && b != x && a != b)
                .then(|| g.nodes[a].name.clone())
                .filter(|ans| ans != name)
        }
    }
}

/// A random graph with distinct node ids, no self-loops and no parallel
/// edges.
pub fn generate_world(spec: &WorldSpec, rng: &mut Rng) -> SceneGraph {
    let n = rng.random_range(spec.nodes.0..=spec.nodes.1);
    let mut names: Vec<&String> = spec.names.choose_multiple(rng, n).collect();
    names.shuffle(rng);
    let extra = rng.random_range(0..=spec.max_duplicates).min(n - 1);
    if extra > 0 {
        // Copy one name onto `extra` other nodes.
        let src = rng.random_range(0..n);
        let mut others: Vec<usize> = (0..n).filter(|&i| i != src).collect();
        others.shuffle(rng);
        for &i in others.iter().take(extra) {
            names[i] = names[src];
        }
    }
    let nodes = names
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let mut attributes = Vec::new();
            if rng.random_bool(spec.color_prob) {
                attributes.push(spec.colors.choose(rng).expect("non-empty").clone());
            }
            if !spec.materials.is_empty() && rng.random_bool(spec.material_prob) {
                attributes.push(spec.materials.choose(rng).expect("non-empty").clone());
            }
            SceneNode {
                id: i as i64,
                name: name.clone(),
                attributes,
                bbox: None,
            }
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|s| (0..n).filter(move |&o| o != s).map(move |o| (s, o)))
        .collect();
    let m = rng
        .random_range(spec.edges.0..=spec.edges.1)
        .min(pairs.len());
    let edges = pairs
        .choose_multiple(rng, m)
        .map(|&(s, o)| SceneEdge {
            predicate: spec.predicates.choose(rng).expect("non-empty").clone(),
            subject_id: s as i64,
            object_id: o as i64,
        })
        .collect();
    SceneGraph {
        image_id: None,
        nodes,
        edges,
    }
}

/// Draws a question of `kind` about `g` with `k` candidates, or `None` if
/// the graph admits no such question.
pub fn generate_qa(
    g: &SceneGraph,
    kind: QaKind,
    spec: &WorldSpec,
    k: usize,
    rng: &mut Rng,
) -> Option<QaSample> {
    let present: BTreeSet<&str> = g.nodes.iter().map(|n| n.name.as_str()).collect();
    let (question, answer, decoys) = match kind {
        QaKind::Attribute => {
            let options: Vec<Question> = present
                .iter()
                .map(|name| Question::Attribute {
                    name: name.to_string(),
                })
                .filter(|q| answer_oracle(g, q, spec).is_some())
                .collect();
            let q = options.choose(rng)?.clone();
            let answer = answer_oracle(g, &q, spec)?;
            let pool: Vec<&String> = spec.colors.iter().filter(|c| **c != answer).collect();
            let decoys = pick(rng, &pool, &[], k - 1)?;
            (q, answer, decoys)
        }
        QaKind::Count => {
            let mut by_answer: BTreeMap<usize, Vec<&String>> = BTreeMap::new();
            for name in &spec.names {
                let c = nodes_named(g, name).count();
                if c <= 3 {
                    by_answer.entry(c).or_default().push(name);
                }
            }
            let counts: Vec<usize> = by_answer.keys().copied().collect();
            let c = *counts.choose(rng)?;
            let name = by_answer[&c].choose(rng)?;
            let q = Question::Count {
                name: (*name).clone(),
            };
            let answer = answer_oracle(g, &q, spec)?;
            let numbers: Vec<String> = (0..=10).filter_map(number_word).map(String::from).collect();
            let pool: Vec<&String> = numbers.iter().filter(|w| **w != answer).collect();
            let decoys = pick(rng, &pool, &[], k - 1)?;
            (q, answer, decoys)
        }
        QaKind::Relation1hop | QaKind::Relation2hop => {
            let mut options = Vec::new();
            for p in &spec.predicates {
                for name in &present {
                    let q = if kind == QaKind::Relation1hop {
                        Question::Relation1hop {
                            predicate: p.clone(),
                            name: name.to_string(),
                        }
                    } else {
                        Question::Relation2hop {
                            predicate: p.clone(),
                            name: name.to_string(),
                        }
                    };
                    if let Some(a) = answer_oracle(g, &q, spec) {
                        let in_graph = present.iter().filter(|n| **n != a && **n != *name).count();
                        if in_graph >= 3 {
                            options.push((q, a));
                        }
                    }
                }
            }
            let (q, answer) = options.choose(rng)?.clone();
            let (Question::Relation1hop { name, .. } | Question::Relation2hop { name, .. }) = &q
            else {
                unreachable!()
            };
            let in_graph: Vec<&String> = spec
                .names
                .iter()
                .filter(|n| present.contains(n.as_str()) && **n != answer && *n != name)
                .collect();
            let elsewhere: Vec<&String> = spec
                .names
                .iter()
                .filter(|n| !present.contains(n.as_str()))
                .collect();
            let decoys = pick(rng, &in_graph, &elsewhere, k - 1)?;
            (q, answer, decoys)
        }
    };
    let mut candidates: Vec<String> = decoys;
    let correct_index = rng.random_range(0..=candidates.len());
    candidates.insert(correct_index, answer);
    Some(QaSample {
        id: None,
        image_id: String::new(),
        question: question.text(),
        candidates,
        correct_index,
        decoy_groups: None,
        question_type: Some(kind.as_str().to_string()),
    })
}

/// `n` distinct items, preferring `first` and topping up from `fallback`.
fn pick(rng: &mut Rng, first: &[&String], fallback: &[&String], n: usize) -> Option<Vec<String>> {
    let mut out: Vec<String> = first
        .choose_multiple(rng, n.min(first.len()))
        .map(|s| (*s).clone())
        .collect();
    let rest = n - out.len();
    if rest > fallback.len() {
        return None;
    }
    out.extend(fallback.choose_multiple(rng, rest).map(|s| (*s).clone()));
    out.shuffle(rng);
    Some(out)
}

/// How synthetic image features are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageMode {
    /// Per-name object counts, zero-padded to `d_img`.
    BagOfObjects,
    Zeros,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub world: WorldSpec,
    pub kinds: Vec<QaKind>,
    pub sizes: Splits,
    pub seed: u64,
    pub k: usize,
    pub d_w: usize,
    pub d_img: usize,
    pub image_mode: ImageMode,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            world: WorldSpec::default(),
            kinds: QaKind::ALL.to_vec(),
            sizes: Splits {
                train: 4000,
                val: 500,
                test: 1000,
            },
            seed: 0,
            k: 7,
            d_w: 16,
            d_img: 16,
            image_mode: ImageMode::BagOfObjects,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        let err = |m: String| Err(Error::Config(m));
        if self.kinds.is_empty() {
            return err("at least one question kind is needed".into());
        }
        if self.k < 2 {
            return err(format!("{} candidates, need at least 2", self.k));
        }
        if self.sizes.train == 0 || self.sizes.val == 0 || self.sizes.test == 0 {
            return err("split sizes must be positive".into());
        }
        if self.d_w == 0 {
            return err("d_w must be positive".into());
        }
        if self.image_mode == ImageMode::BagOfObjects && self.d_img < self.world.names.len() {
            return err(format!(
                "bag-of-objects features need d_img >= {} (one slot per name)",
                self.world.names.len()
            ));
        }
        for kind in &self.kinds {
            let (pool, what) = match kind {
                QaKind::Attribute => (self.world.colors.len(), "colors"),
                QaKind::Count => (11, "number words"),
                QaKind::Relation1hop | QaKind::Relation2hop => {
                    (self.world.names.len() - 1, "names besides the subject")
                }
            };
            if pool < self.k {
                return err(format!(
                    "{kind} questions need {} distinct candidates but only {pool} {what} exist",
                    self.k
                ));
            }
        }
        Ok(())
    }
}

/// Summary written next to a generated corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub k: usize,
    pub d_w: usize,
    pub d_img: usize,
    pub kinds: Vec<QaKind>,
    /// split -> kind -> number of questions
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
    pub totals: BTreeMap<String, usize>,
    pub vocab: BTreeMap<String, Vec<String>>,
}

/// An in-memory corpus: graphs, image features, three splits and the word
/// vectors they are embedded with.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub graphs: Vec<SceneGraph>,
    pub images: Vec<ImageFeatures>,
    pub train: Vec<QaSample>,
    pub val: Vec<QaSample>,
    pub test: Vec<QaSample>,
    pub embeddings: EmbeddingTable,
    pub manifest: Manifest,
}

impl Corpus {
    pub fn context(&self) -> Context {
        Context {
            graphs: self
                .graphs
                .iter()
                .map(|g| {
                    (
                        g.image_id.clone().expect("generated graphs have ids"),
                        g.clone(),
                    )
                })
                .collect(),
            images: self
                .images
                .iter()
                .map(|r| (r.image_id.clone(), r.features.clone()))
                .collect(),
        }
    }

    /// Writes `embeddings.txt`, `scene_graphs.jsonl`, `image_features.jsonl`,
    /// `train.jsonl`, `val.jsonl`, `test.jsonl` and `manifest.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, text: String| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(p, e))
        };
        put("embeddings.txt", self.embeddings.to_text())?;
        write_scene_graphs(dir.join("scene_graphs.jsonl"), &self.graphs)?;
        write_image_features(dir.join("image_features.jsonl"), &self.images)?;
        write_samples(dir.join("train.jsonl"), &self.train)?;
        write_samples(dir.join("val.jsonl"), &self.val)?;
        write_samples(dir.join("test.jsonl"), &self.test)?;
        put(
            "manifest.json",
            serde_json::to_string_pretty(&self.manifest)? + "\n",
        )
    }
}

/// Gaussian word vectors for every token of the world spec plus `UNK`.
pub fn synth_embeddings(spec: &WorldSpec, d_w: usize, seed: u64) -> Result<EmbeddingTable> {
    let mut rng = Rng::seed_from_u64(seed ^ 0x5eed_e3b0_0000_0001);
    let sample =
        |rng: &mut Rng| -> Vec<f64> { (0..d_w).map(|_| StandardNormal.sample(rng)).collect() };
    let entries: HashMap<String, Vec<f64>> = spec
        .vocabulary()
        .into_iter()
        .map(|w| {
            let v = sample(&mut rng);
            (w, v)
        })
        .collect();
    let unk = sample(&mut rng);
    EmbeddingTable::new(d_w, entries, Some(unk))
}

fn image_features(g: &SceneGraph, cfg: &SynthConfig) -> Vec<f64> {
    let mut f = vec![0.0; cfg.d_img];
    if cfg.image_mode == ImageMode::BagOfObjects {
        for n in &g.nodes {
            if let Some(i) = cfg.world.names.iter().position(|x| *x == n.name) {
                f[i] += 1.0;
            }
        }
    }
    f
}

/// Size of the closed answer set of a kind.
fn answer_classes(kind: QaKind, spec: &WorldSpec) -> usize {
    match kind {
        QaKind::Attribute => spec.colors.len(),
        QaKind::Count => 4,
        QaKind::Relation1hop | QaKind::Relation2hop => spec.names.len(),
    }
}

/// Generates all three splits. Kinds are assigned round-robin; within a
/// split and kind each answer is capped at `ceil(n / classes)` questions,
/// which keeps the answer distribution flat.
pub fn build_corpus(cfg: &SynthConfig) -> Result<Corpus> {
    cfg.validate()?;
    let mut rng = Rng::seed_from_u64(cfg.seed);
    let mut relation_world = cfg.world.clone();
    relation_world.max_duplicates = 0;

    let mut graphs = Vec::new();
    let mut images = Vec::new();
    let mut counts = BTreeMap::new();
    let mut splits: Vec<Vec<QaSample>> = Vec::new();
    let attempts_per_sample = 10_000;

    for (split, size) in [
        ("train", cfg.sizes.train),
        ("val", cfg.sizes.val),
        ("test", cfg.sizes.test),
    ] {
        let per_kind: Vec<usize> = (0..cfg.kinds.len())
            .map(|i| size / cfg.kinds.len() + usize::from(i < size % cfg.kinds.len()))
            .collect();
        let mut used: HashMap<(QaKind, String), usize> = HashMap::new();
        let mut samples = Vec::with_capacity(size);
        for i in 0..size {
            let kind = cfg.kinds[i % cfg.kinds.len()];
            let kind_index = i % cfg.kinds.len();
            let quota = per_kind[kind_index].div_ceil(answer_classes(kind, &cfg.world));
            let world = if kind.is_relation() {
                &relation_world
            } else {
                &cfg.world
            };
            let mut made = None;
            for _ in 0..attempts_per_sample {
                let g = generate_world(world, &mut rng);
                let Some(s) = generate_qa(&g, kind, &cfg.world, cfg.k, &mut rng) else {
                    continue;
                };
                let slot = used.entry((kind, s.answer().to_string())).or_default();
                if *slot < quota {
                    *slot += 1;
                    made = Some((g, s));
                    break;
                }
            }
            let (mut g, mut s) = made.ok_or_else(|| {
                Error::Config(format!(
                    "could not generate a {kind} question within {attempts_per_sample} attempts"
                ))
            })?;
            let image_id = format!("{split}-{i:06}");
            g.image_id = Some(image_id.clone());
            s.image_id = image_id.clone();
            s.id = Some(image_id.clone());
            images.push(ImageFeatures {
                image_id,
                features: image_features(&g, cfg),
            });
            graphs.push(g);
            samples.push(s);
        }
        let mut by_kind: BTreeMap<String, usize> = BTreeMap::new();
        for s in &samples {
            *by_kind.entry(s.question_type().to_string()).or_default() += 1;
        }
        counts.insert(split.to_string(), by_kind);
        splits.push(samples);
    }

    let manifest = Manifest {
        seed: cfg.seed,
        k: cfg.k,
        d_w: cfg.d_w,
        d_img: cfg.d_img,
        kinds: cfg.kinds.clone(),
        totals: counts
            .iter()
            .map(|(s, m)| (s.clone(), m.values().sum()))
            .collect(),
        counts,
        vocab: BTreeMap::from([
            ("names".to_string(), cfg.world.names.clone()),
            ("colors".to_string(), cfg.world.colors.clone()),
            ("materials".to_string(), cfg.world.materials.clone()),
            ("predicates".to_string(), cfg.world.predicates.clone()),
        ]),
    };
    let test = splits.pop().expect("three splits");
    let val = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");
    Ok(Corpus {
        graphs,
        images,
        train,
        val,
        test,
        embeddings: synth_embeddings(&cfg.world, cfg.d_w, cfg.seed)?,
        manifest,
    })
}
