//! Answer scorers on top of the GN stack.
//!
//! * Unfactorized (`ugn`): `u = [c; i; q]`, the stack's global output is a
//!   single logit, so the graph is processed once per candidate.
//! * Factorized (`fgn`): `u = [i; q]`, the stack emits a `d_w` vector `u'`
//!   once per question; candidates are embedded by `beta` and scored by
//!   `gamma([c'; u'; |c' - u'|; c' * u'])`.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::encoder::{
    assemble_global, embed_phrase, encode_graph, l2_normalize, normalize_text, EmbeddingTable,
    EncoderConfig,
};
use crate::error::{Error, Result};
use crate::gn::{GnDims, GnStack, GraphBatch, GraphState};
use crate::nn::{Mlp, MlpDims, Session};
use crate::scene_graph::SceneGraph;
use crate::tensor::{Checkpoint, ParamStore, Tensor, Var};
use crate::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeadKind {
    #[serde(rename = "ugn")]
    Unfactorized,
    #[serde(rename = "fgn")]
    Factorized,
}

impl HeadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Unfactorized => "ugn",
            HeadKind::Factorized => "fgn",
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ugn" | "u-gn" => Ok(HeadKind::Unfactorized),
            "fgn" | "f-gn" => Ok(HeadKind::Factorized),
            other => Err(Error::Config(format!(
                "unknown head `{other}` (expected ugn or fgn)"
            ))),
        }
    }
}

/// Everything needed to rebuild a model's architecture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub head: HeadKind,
    pub encoder: EncoderConfig,
    pub stack: usize,
    pub hidden: usize,
    pub dropout: f64,
    /// Replace every scene graph by the empty graph.
    #[serde(default)]
    pub no_graph: bool,
    /// Drop all edges, leaving isolated nodes.
    #[serde(default)]
    pub no_edges: bool,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let mode = self.encoder.global_mode;
        match self.head {
            HeadKind::Unfactorized if !mode.includes_candidate() => {
                return Err(Error::Config(format!(
                    "the ugn head needs the candidate in u; global mode `{}` omits it",
                    mode.as_str()
                )))
            }
            HeadKind::Factorized if mode.includes_candidate() => {
                return Err(Error::Config(format!(
                    "the fgn head embeds candidates separately; global mode `{}` must not include c",
                    mode.as_str()
                )))
            }
            _ => {}
        }
        if self.stack == 0 || self.hidden == 0 || self.encoder.d_w == 0 {
            return Err(Error::Config(
                "stack, hidden and d_w must be positive".into(),
            ));
        }
        if self.encoder.use_image() && self.encoder.d_img == 0 {
            return Err(Error::Config("image features need d_img > 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    pub fn gn_dims(&self) -> GnDims {
        GnDims {
            node: self.encoder.node_width(),
            edge: self.encoder.edge_width(),
            global: self.encoder.global_width(),
        }
    }
}

/// One question with its graph and candidates, already embedded.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleInput {
    /// Node/edge features; the global vector is left empty.
    pub graph: GraphState,
    /// Mean word vector of the question (not yet normalised).
    pub question: Vec<f64>,
    pub image: Option<Vec<f64>>,
    /// Mean word vector of each candidate (not yet normalised).
    pub candidates: Vec<Vec<f64>>,
}

impl SampleInput {
    /// Encodes a scene graph, question, candidates and optional image
    /// features, honouring the graph ablations in `cfg`.
    pub fn encode(
        graph: &SceneGraph,
        question: &str,
        candidates: &[String],
        image: Option<&[f64]>,
        table: &EmbeddingTable,
        cfg: &ModelConfig,
    ) -> Result<Self> {
        let empty;
        let graph = if cfg.no_graph {
            empty = SceneGraph::default();
            &empty
        } else {
            graph
        };
        let enc = encode_graph(graph, table, &cfg.encoder)?;
        let mut state = GraphState::from_encoded(enc, Vec::new())?;
        if cfg.no_edges {
            state = state.without_edges();
        }
        let image = if cfg.encoder.use_image() {
            let img =
                image.ok_or_else(|| Error::Config("global mode needs image features".into()))?;
            Some(img.to_vec())
        } else {
            None
        };
        Ok(SampleInput {
            graph: state,
            question: embed_phrase(&normalize_text(question), table),
            image,
            candidates: candidates
                .iter()
                .map(|c| embed_phrase(&normalize_text(c), table))
                .collect(),
        })
    }

    pub fn num_candidates(&self) -> usize {
        self.candidates.len()
    }
}

/// Concatenated `gamma` input `[c'; u'; |c' - u'|; c' * u']`.
pub fn match_features(c: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    if c.len() != u.len() {
        return Err(Error::shape(
            "match_features",
            format!("candidate width {} vs question width {}", c.len(), u.len()),
        ));
    }
    let mut out = Vec::with_capacity(4 * c.len());
    out.extend_from_slice(c);
    out.extend_from_slice(u);
    out.extend(c.iter().zip(u).map(|(a, b)| (a - b).abs()));
    out.extend(c.iter().zip(u).map(|(a, b)| a * b));
    Ok(out)
}

/// Index of the largest score; the first one wins ties.
pub fn predict(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// A (sample, candidate) pair inside a scoring batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Instance {
    pub sample: usize,
    pub candidate: usize,
}

/// A GN stack plus, for the factorized head, the answer embedder and the
/// compatibility scorer. Counts every graph it runs through the stack.
#[derive(Debug)]
pub struct QaModel {
    config: ModelConfig,
    store: ParamStore,
    gn: GnStack<Mlp>,
    beta: Option<Mlp>,
    gamma: Option<Mlp>,
    gn_evaluations: AtomicUsize,
}

impl Clone for QaModel {
    fn clone(&self) -> Self {
        QaModel {
            config: self.config.clone(),
            store: self.store.clone(),
            gn: self.gn.clone(),
            beta: self.beta.clone(),
            gamma: self.gamma.clone(),
            gn_evaluations: AtomicUsize::new(self.gn_evaluations()),
        }
    }
}

impl QaModel {
    pub fn new(config: ModelConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let d_w = config.encoder.d_w;
        let global_out = match config.head {
            HeadKind::Unfactorized => 1,
            HeadKind::Factorized => d_w,
        };
        let gn = GnStack::with_mlps(
            &mut store,
            "gn",
            config.gn_dims(),
            config.stack,
            config.hidden,
            global_out,
            config.dropout,
            rng,
        )?;
        let (beta, gamma) = match config.head {
            HeadKind::Unfactorized => (None, None),
            HeadKind::Factorized => {
                let beta = Mlp::new(
                    &mut store,
                    "beta",
                    MlpDims {
                        input: d_w,
                        hidden: config.hidden,
                        output: d_w,
                    },
                    config.dropout,
                    rng,
                );
                let gamma = Mlp::new(
                    &mut store,
                    "gamma",
                    MlpDims {
                        input: 4 * d_w,
                        hidden: config.hidden,
                        output: 1,
                    },
                    config.dropout,
                    rng,
                );
                (Some(beta), Some(gamma))
            }
        };
        Ok(QaModel {
            config,
            store,
            gn,
            beta,
            gamma,
            gn_evaluations: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn head(&self) -> HeadKind {
        self.config.head
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn gn(&self) -> &GnStack<Mlp> {
        &self.gn
    }

    /// Graphs pushed through the GN stack since creation or the last reset.
    pub fn gn_evaluations(&self) -> usize {
        self.gn_evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_gn_evaluations(&self) {
        self.gn_evaluations.store(0, Ordering::Relaxed);
    }

    /// Input global vector for one sample (and candidate, for `ugn`).
    pub fn global_input(&self, x: &SampleInput, candidate: Option<usize>) -> Result<Vec<f64>> {
        let c = match (self.config.head, candidate) {
            (HeadKind::Unfactorized, Some(k)) => Some(
                x.candidates
                    .get(k)
                    .ok_or_else(|| Error::Config(format!("candidate {k} out of range")))?
                    .as_slice(),
            ),
            (HeadKind::Unfactorized, None) => {
                return Err(Error::Config(
                    "the ugn head scores one candidate at a time".into(),
                ))
            }
            (HeadKind::Factorized, _) => None,
        };
        assemble_global(c, x.image.as_deref(), &x.question, &self.config.encoder)
    }

    fn graph_with_global(&self, x: &SampleInput, candidate: Option<usize>) -> Result<GraphState> {
        let mut g = x.graph.clone();
        g.global = self.global_input(x, candidate)?;
        Ok(g)
    }

    /// Runs the GN stack over the graphs and returns the stack output.
    fn run_gn(&self, s: &mut Session<'_>, graphs: &[GraphState]) -> Result<Var> {
        let refs: Vec<&GraphState> = graphs.iter().collect();
        let batch = GraphBatch::new(&refs)?;
        let vars = batch.bind(s);
        let out = self.gn.forward(s, &batch.topology, &vars)?;
        self.gn_evaluations
            .fetch_add(graphs.len(), Ordering::Relaxed);
        Ok(out.globals)
    }

    /// Logits `[instances, 1]` for the given (sample, candidate) pairs.
    pub fn logits(
        &self,
        s: &mut Session<'_>,
        samples: &[&SampleInput],
        instances: &[Instance],
    ) -> Result<Var> {
        for inst in instances {
            let x = samples.get(inst.sample).ok_or_else(|| {
                Error::Config(format!("instance refers to missing sample {}", inst.sample))
            })?;
            if inst.candidate >= x.num_candidates() {
                return Err(Error::Config(format!(
                    "candidate {} out of range for {} candidates",
                    inst.candidate,
                    x.num_candidates()
                )));
            }
        }
        match self.config.head {
            HeadKind::Unfactorized => {
                let graphs = instances
                    .iter()
                    .map(|i| self.graph_with_global(samples[i.sample], Some(i.candidate)))
                    .collect::<Result<Vec<_>>>()?;
                self.run_gn(s, &graphs)
            }
            HeadKind::Factorized => {
                let graphs = samples
                    .iter()
                    .map(|x| self.graph_with_global(x, None))
                    .collect::<Result<Vec<_>>>()?;
                let u = self.run_gn(s, &graphs)?;
                let d_w = self.config.encoder.d_w;
                let mut cand = Vec::with_capacity(instances.len() * d_w);
                for i in instances {
                    cand.extend(l2_normalize(&samples[i.sample].candidates[i.candidate]));
                }
                let c = s.input(Tensor::matrix(instances.len(), d_w, cand)?);
                let owners: Vec<usize> = instances.iter().map(|i| i.sample).collect();
                let u = s.tape.gather_rows(u, &owners)?;
                self.gamma_scores(s, c, u)
            }
        }
    }

    fn gamma_scores(&self, s: &mut Session<'_>, c: Var, u: Var) -> Result<Var> {
        let (beta, gamma) = self.factorized_parts()?;
        let c = beta.forward(s, c)?;
        let diff = s.tape.sub(c, u)?;
        let abs = s.tape.abs(diff);
        let prod = s.tape.mul(c, u)?;
        let x = s.tape.concat_cols(&[c, u, abs, prod])?;
        gamma.forward(s, x)
    }

    fn factorized_parts(&self) -> Result<(&Mlp, &Mlp)> {
        match (&self.beta, &self.gamma) {
            (Some(b), Some(g)) => Ok((b, g)),
            _ => Err(Error::Config("this operation needs the fgn head".into())),
        }
    }

    /// Mean binary cross-entropy of the given instances.
    pub fn loss(
        &self,
        s: &mut Session<'_>,
        samples: &[&SampleInput],
        instances: &[Instance],
        labels: &[f64],
    ) -> Result<Var> {
        let logits = self.logits(s, samples, instances)?;
        s.tape.bce_with_logits(logits, labels)
    }

    /// Evaluation-mode logits for every candidate of one sample.
    pub fn score_candidates(&self, x: &SampleInput) -> Result<Vec<f64>> {
        Ok(self.score_batch(&[x])?.remove(0))
    }

    /// [`QaModel::score_candidates`] for several samples in one pass.
    /// Evaluation-mode rows do not interact, so the result equals the
    /// per-sample one bit for bit.
    pub fn score_batch(&self, xs: &[&SampleInput]) -> Result<Vec<Vec<f64>>> {
        let instances: Vec<Instance> = xs
            .iter()
            .enumerate()
            .flat_map(|(sample, x)| {
                (0..x.num_candidates()).map(move |candidate| Instance { sample, candidate })
            })
            .collect();
        let mut s = Session::eval(&self.store);
        let out = self.logits(&mut s, xs, &instances)?;
        let flat = s.value(out).data();
        let mut at = 0;
        Ok(xs
            .iter()
            .map(|x| {
                let row = flat[at..at + x.num_candidates()].to_vec();
                at += x.num_candidates();
                row
            })
            .collect())
    }

    /// Logit for a single candidate.
    pub fn score(&self, x: &SampleInput, candidate: usize) -> Result<f64> {
        let mut s = Session::eval(&self.store);
        let out = self.logits(
            &mut s,
            &[x],
            &[Instance {
                sample: 0,
                candidate,
            }],
        )?;
        Ok(s.value(out).data()[0])
    }

    pub fn predict(&self, x: &SampleInput) -> Result<usize> {
        Ok(predict(&self.score_candidates(x)?))
    }

    /// Evaluation-mode GN output (updated nodes, edges and `u'`) for one
    /// sample; `ugn` needs the candidate whose `u` is used.
    pub fn gn_output(&self, x: &SampleInput, candidate: Option<usize>) -> Result<GraphState> {
        let g = self.graph_with_global(x, candidate)?;
        let batch = GraphBatch::new(&[&g])?;
        let mut s = Session::eval(&self.store);
        let vars = batch.bind(&mut s);
        let out = self.gn.forward(&mut s, &batch.topology, &vars)?;
        self.gn_evaluations.fetch_add(1, Ordering::Relaxed);
        Ok(batch.unbatch(&s, &out)?.remove(0))
    }

    /// `beta(c)` for a raw candidate vector.
    pub fn embed_answer(&self, c: &[f64]) -> Result<Vec<f64>> {
        let (beta, _) = self.factorized_parts()?;
        let mut s = Session::eval(&self.store);
        let x = s.input(Tensor::row_vector(l2_normalize(c)));
        let out = beta.forward(&mut s, x)?;
        Ok(s.value(out).data().to_vec())
    }

    /// `gamma` on already computed `u'` and `c'`.
    pub fn match_score(&self, u: &[f64], c: &[f64]) -> Result<f64> {
        let (_, gamma) = self.factorized_parts()?;
        let x = match_features(c, u)?;
        let mut s = Session::eval(&self.store);
        let xv = s.input(Tensor::row_vector(x));
        let out = gamma.forward(&mut s, xv)?;
        Ok(s.value(out).data()[0])
    }

    /// Parameters plus the architecture needed to rebuild them.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = serde_json::json!({ "model": self.config });
        self.store.to_checkpoint(meta)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let config: ModelConfig = serde_json::from_value(
            ckpt.metadata
                .get("model")
                .cloned()
                .ok_or_else(|| Error::Checkpoint("metadata has no model configuration".into()))?,
        )
        .map_err(|e| Error::Checkpoint(format!("bad model configuration: {e}")))?;
        let mut model = QaModel::new(config, &mut Rng::seed_from_u64(0))?;
        model.store.load_checkpoint(ckpt)?;
        Ok(model)
    }
}
