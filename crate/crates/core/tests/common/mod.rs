#![allow(dead_code)]

use gnqa::dataset::Dataset;
use gnqa::encoder::{EncoderConfig, GlobalMode};
use gnqa::gn::GraphState;
use gnqa::heads::{HeadKind, ModelConfig, QaModel};
use gnqa::nn::{Session, UpdateFn};
use gnqa::synth::{build_corpus, QaKind, Splits, SynthConfig};
use gnqa::tensor::{Tensor, Var};
use gnqa::trainer::{evaluate, fit, EvalReport, TrainConfig, TrainOutcome};
use gnqa::Rng;
use rand::{Rng as _, SeedableRng};

/// `h ⊙ h + h` with `h = x W` for a fixed matrix `W`: smooth, nonlinear and
/// sensitive to where each input column sits.
#[derive(Clone, Debug)]
pub struct QuadStub {
    pub w: Vec<f64>,
    pub input: usize,
    pub output: usize,
}

impl QuadStub {
    pub fn random(input: usize, output: usize, rng: &mut Rng) -> Self {
        let w = (0..input * output)
            .map(|_| rng.random_range(-0.5..0.5))
            .collect();
        QuadStub { w, input, output }
    }

    /// Literal evaluation on one row.
    pub fn eval_row(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input);
        (0..self.output)
            .map(|j| {
                let mut h = 0.0;
                for (i, xi) in x.iter().enumerate() {
                    h += xi * self.w[i * self.output + j];
                }
                h * h + h
            })
            .collect()
    }
}

impl UpdateFn for QuadStub {
    fn input_width(&self) -> usize {
        self.input
    }

    fn output_width(&self) -> usize {
        self.output
    }

    fn apply(&self, s: &mut Session<'_>, x: Var) -> gnqa::Result<Var> {
        let w = s.input(Tensor::matrix(self.input, self.output, self.w.clone())?);
        let h = s.tape.matmul(x, w)?;
        let sq = s.tape.mul(h, h)?;
        s.tape.add(sq, h)
    }
}

/// Random graph with `1..=max_nodes` nodes and `0..=max_edges` edges;
/// self-loops and repeated pairs are allowed.
pub fn random_state(
    rng: &mut Rng,
    max_nodes: usize,
    max_edges: usize,
    dv: usize,
    de: usize,
    du: usize,
) -> GraphState {
    let n = rng.random_range(1..=max_nodes);
    let m = rng.random_range(0..=max_edges);
    let mut vals = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let nodes = Tensor::matrix(n, dv, vals(n * dv)).unwrap();
    let edges = Tensor::matrix(m, de, vals(m * de)).unwrap();
    let global = vals(du);
    let senders = (0..m).map(|_| rng.random_range(0..n)).collect();
    let receivers = (0..m).map(|_| rng.random_range(0..n)).collect();
    GraphState::new(nodes, edges, senders, receivers, global).unwrap()
}

pub fn random_permutation(rng: &mut Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.random_range(0..=i));
    }
    p
}

/// Reference block written one element at a time, independent of the
/// tape: edge update, mean of incoming edges per receiver, node update,
/// means over all edges and nodes, global update.
#[allow(clippy::needless_range_loop)]
pub fn reference_block(
    g: &GraphState,
    fe: &QuadStub,
    fv: &QuadStub,
    fu: Option<&QuadStub>,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let n = g.num_nodes();
    let m = g.num_edges();
    let node = |i: usize| g.nodes.row(i).to_vec();
    let mut new_edges = Vec::with_capacity(m);
    for k in 0..m {
        let mut x = g.edges.row(k).to_vec();
        x.extend(node(g.senders[k]));
        x.extend(node(g.receivers[k]));
        x.extend(&g.global);
        new_edges.push(fe.eval_row(&x));
    }
    let de = fe.output;
    let mut new_nodes = Vec::with_capacity(n);
    for i in 0..n {
        let mut agg = vec![0.0; de];
        let mut count = 0;
        for k in 0..m {
            if g.receivers[k] == i {
                for d in 0..de {
                    agg[d] += new_edges[k][d];
                }
                count += 1;
            }
        }
        if count > 0 {
            for a in &mut agg {
                *a /= count as f64;
            }
        }
        let mut x = node(i);
        x.extend(agg);
        x.extend(&g.global);
        new_nodes.push(fv.eval_row(&x));
    }
    let global = match fu {
        None => g.global.clone(),
        Some(fu) => {
            let mean = |rows: &[Vec<f64>], width: usize| -> Vec<f64> {
                let mut out = vec![0.0; width];
                for r in rows {
                    for d in 0..width {
                        out[d] += r[d];
                    }
                }
                if !rows.is_empty() {
                    for o in &mut out {
                        *o /= rows.len() as f64;
                    }
                }
                out
            };
            let mut x = mean(&new_edges, de);
            x.extend(mean(&new_nodes, fv.output));
            x.extend(&g.global);
            fu.eval_row(&x)
        }
    };
    (new_edges, new_nodes, global)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Ablation switches of one training run.
#[derive(Clone, Copy, Debug, Default)]
pub struct Variant {
    pub no_graph: bool,
    pub no_edges: bool,
    pub no_attrs: bool,
    pub stack: usize,
}

impl Variant {
    pub fn full() -> Self {
        Variant {
            stack: 1,
            ..Variant::default()
        }
    }
}

/// Corpus sizes and epoch budget shared by the learning criteria.
#[derive(Clone, Debug)]
pub struct Setup {
    pub kinds: Vec<QaKind>,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub epochs: usize,
}

pub fn fgn_config(v: Variant) -> ModelConfig {
    ModelConfig {
        head: HeadKind::Factorized,
        encoder: EncoderConfig {
            d_w: 16,
            d_img: 16,
            use_attributes: !v.no_attrs,
            global_mode: GlobalMode::ImageQuestion,
        },
        stack: v.stack,
        hidden: 64,
        dropout: 0.0,
        no_graph: v.no_graph,
        no_edges: v.no_edges,
    }
}

/// Generates the corpus for `seed`, trains an f-GN and evaluates it on
/// the test split.
pub fn train_fgn(setup: &Setup, seed: u64, variant: Variant) -> (TrainOutcome, EvalReport) {
    let corpus = build_corpus(&SynthConfig {
        kinds: setup.kinds.clone(),
        sizes: Splits {
            train: setup.train,
            val: setup.val,
            test: setup.test,
        },
        seed,
        ..SynthConfig::default()
    })
    .unwrap();
    let cfg = fgn_config(variant);
    let ctx = corpus.context();
    let train = Dataset::new(corpus.train, &ctx, &corpus.embeddings, &cfg).unwrap();
    let val = Dataset::new(corpus.val, &ctx, &corpus.embeddings, &cfg).unwrap();
    let test = Dataset::new(corpus.test, &ctx, &corpus.embeddings, &cfg).unwrap();
    let model = QaModel::new(cfg, &mut Rng::seed_from_u64(seed)).unwrap();
    let tc = TrainConfig {
        max_epochs: setup.epochs,
        seed,
        ..TrainConfig::default()
    };
    let outcome = fit(model, &train, &val, &tc).unwrap();
    let report = evaluate(&outcome.model, &test).unwrap();
    (outcome, report)
}

/// Accuracy over the samples of the given kinds.
pub fn accuracy_on(report: &EvalReport, kinds: &[QaKind]) -> f64 {
    let (mut hit, mut n) = (0.0, 0usize);
    for k in kinds {
        let c = report.per_type_counts.get(k.as_str()).copied().unwrap_or(0);
        hit += report
            .per_type_accuracy
            .get(k.as_str())
            .copied()
            .unwrap_or(0.0)
            * c as f64;
        n += c;
    }
    hit / n as f64
}
