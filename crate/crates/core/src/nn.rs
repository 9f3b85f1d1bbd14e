//! Forward sessions and the one-hidden-layer MLP used for every updating
//! function: FC -> batch norm -> ReLU -> dropout -> FC.

use std::collections::HashMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Gradients, ParamGrads, ParamId, ParamStore, Tape, Tensor, Var};
use crate::Rng;

pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// Batch statistics waiting to be folded into running mean/variance.
#[derive(Clone, Debug)]
pub struct RunningUpdate {
    pub mean: ParamId,
    pub var: ParamId,
    pub rows: usize,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

/// One recorded forward computation against a read-only parameter store.
pub struct Session<'a> {
    pub tape: Tape,
    store: &'a ParamStore,
    mode: Mode,
    rng: Option<&'a mut Rng>,
    bound: HashMap<ParamId, Var>,
    running: Vec<RunningUpdate>,
}

impl<'a> Session<'a> {
    pub fn eval(store: &'a ParamStore) -> Self {
        Session {
            tape: Tape::new(),
            store,
            mode: Mode::Eval,
            rng: None,
            bound: HashMap::new(),
            running: Vec::new(),
        }
    }

    pub fn train(store: &'a ParamStore, rng: &'a mut Rng) -> Self {
        Session {
            tape: Tape::new(),
            store,
            mode: Mode::Train,
            rng: Some(rng),
            bound: HashMap::new(),
            running: Vec::new(),
        }
    }

    pub fn new(store: &'a ParamStore, mode: Mode, rng: Option<&'a mut Rng>) -> Self {
        match (mode, rng) {
            (Mode::Train, Some(rng)) => Session::train(store, rng),
            (Mode::Train, None) => panic!("training sessions need a random source"),
            (Mode::Eval, _) => Session::eval(store),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn store(&self) -> &'a ParamStore {
        self.store
    }

    /// The tape leaf for a parameter; one leaf per parameter per session.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.bound.get(&id) {
            return v;
        }
        let v = self.tape.leaf(self.store.get(id).clone());
        self.bound.insert(id, v);
        v
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.tape.leaf(t)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        self.tape.value(v)
    }

    /// Gradient of `loss` for every registered parameter (zeros where the
    /// parameter did not contribute).
    pub fn param_grads(&self, loss: Var) -> Result<ParamGrads> {
        let grads = self.tape.backward(loss)?;
        Ok(self.collect_grads(&grads))
    }

    pub fn collect_grads(&self, grads: &Gradients) -> ParamGrads {
        let mut out = ParamGrads::zeros_like(self.store);
        for (&id, &v) in &self.bound {
            if let Some(g) = grads.get(v) {
                out.set(id, g);
            }
        }
        out
    }

    pub fn running_updates(&self) -> &[RunningUpdate] {
        &self.running
    }

    pub fn into_running_updates(self) -> Vec<RunningUpdate> {
        self.running
    }

    fn dropout_mask(&mut self, len: usize, rate: f64) -> Vec<f64> {
        let rng = self.rng.as_deref_mut().expect("train session has an rng");
        if rate >= 1.0 {
            return vec![0.0; len];
        }
        let keep = 1.0 - rate;
        let scale = 1.0 / keep;
        (0..len)
            .map(|_| {
                if rng.random::<f64>() < keep {
                    scale
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Folds recorded batch statistics into the running estimates.
pub fn apply_running_updates(store: &mut ParamStore, updates: &[RunningUpdate]) {
    for u in updates {
        if u.rows == 0 {
            continue;
        }
        for (r, b) in store
            .get_mut(u.mean)
            .data_mut()
            .iter_mut()
            .zip(&u.batch_mean)
        {
            *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b;
        }
        if u.rows > 1 {
            let unbias = u.rows as f64 / (u.rows - 1) as f64;
            for (r, b) in store.get_mut(u.var).data_mut().iter_mut().zip(&u.batch_var) {
                *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b * unbias;
            }
        }
    }
}

/// A row-wise function applied to concatenated inputs. Every edge, node or
/// graph row in a batch goes through the same function.
pub trait UpdateFn: Send + Sync {
    fn input_width(&self) -> usize;
    fn output_width(&self) -> usize;
    fn apply(&self, s: &mut Session<'_>, x: Var) -> Result<Var>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpDims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

/// Handles to the tensors of one MLP inside a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Mlp {
    pub dims: MlpDims,
    pub dropout: f64,
    pub w1: ParamId,
    pub b1: ParamId,
    pub bn_scale: ParamId,
    pub bn_shift: ParamId,
    pub bn_mean: ParamId,
    pub bn_var: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl Mlp {
    /// Registers a freshly initialised MLP under `prefix`.
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        dims: MlpDims,
        dropout: f64,
        rng: &mut Rng,
    ) -> Self {
        assert!((0.0..=1.0).contains(&dropout), "dropout rate {dropout}");
        let MlpDims {
            input,
            hidden,
            output,
        } = dims;
        let he = (6.0 / input.max(1) as f64).sqrt();
        let glorot = (6.0 / (hidden + output) as f64).sqrt();
        let mut uniform =
            |n: usize, a: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(-a..a)).collect() };
        let w1 = Tensor::matrix(input, hidden, uniform(input * hidden, he)).expect("dims");
        let w2 = Tensor::matrix(hidden, output, uniform(hidden * output, glorot)).expect("dims");
        Mlp {
            dims,
            dropout,
            w1: store.add(format!("{prefix}.fc1.weight"), w1, true),
            b1: store.add(
                format!("{prefix}.fc1.bias"),
                Tensor::zeros(vec![hidden]),
                true,
            ),
            bn_scale: store.add(
                format!("{prefix}.bn.scale"),
                Tensor::filled(vec![hidden], 1.0),
                true,
            ),
            bn_shift: store.add(
                format!("{prefix}.bn.shift"),
                Tensor::zeros(vec![hidden]),
                true,
            ),
            bn_mean: store.add(
                format!("{prefix}.bn.running_mean"),
                Tensor::zeros(vec![hidden]),
                false,
            ),
            bn_var: store.add(
                format!("{prefix}.bn.running_var"),
                Tensor::filled(vec![hidden], 1.0),
                false,
            ),
            w2: store.add(format!("{prefix}.fc2.weight"), w2, true),
            b2: store.add(
                format!("{prefix}.fc2.bias"),
                Tensor::zeros(vec![output]),
                true,
            ),
        }
    }

    pub fn forward(&self, s: &mut Session<'_>, x: Var) -> Result<Var> {
        let width = s.value(x).cols();
        if width != self.dims.input {
            return Err(Error::shape(
                "mlp_forward",
                format!("input width {width}, MLP expects {}", self.dims.input),
            ));
        }
        let w1 = s.param(self.w1);
        let b1 = s.param(self.b1);
        let h = s.tape.matmul(x, w1)?;
        let h = s.tape.add_bias(h, b1)?;
        let scale = s.param(self.bn_scale);
        let shift = s.param(self.bn_shift);
        let h = match s.mode {
            Mode::Train => {
                let (h, stats) = s.tape.batch_norm(h, scale, shift)?;
                s.running.push(RunningUpdate {
                    mean: self.bn_mean,
                    var: self.bn_var,
                    rows: stats.rows,
                    batch_mean: stats.mean,
                    batch_var: stats.var,
                });
                h
            }
            Mode::Eval => {
                let mean = s.store.get(self.bn_mean).data().to_vec();
                let var = s.store.get(self.bn_var).data().to_vec();
                s.tape.batch_norm_fixed(h, scale, shift, &mean, &var)?
            }
        };
        let h = s.tape.relu(h);
        let h = if s.mode == Mode::Train && self.dropout > 0.0 {
            let len = s.value(h).len();
            let mask = s.dropout_mask(len, self.dropout);
            s.tape.dropout(h, mask)?
        } else {
            h
        };
        let w2 = s.param(self.w2);
        let b2 = s.param(self.b2);
        let out = s.tape.matmul(h, w2)?;
        s.tape.add_bias(out, b2)
    }
}

impl UpdateFn for Mlp {
    fn input_width(&self) -> usize {
        self.dims.input
    }

    fn output_width(&self) -> usize {
        self.dims.output
    }

    fn apply(&self, s: &mut Session<'_>, x: Var) -> Result<Var> {
        self.forward(s, x)
    }
}

/// Convenience wrapper: runs one MLP on a matrix outside any larger model.
pub fn mlp_forward(
    x: &Tensor,
    mlp: &Mlp,
    store: &ParamStore,
    mode: Mode,
    rng: Option<&mut Rng>,
) -> Result<Tensor> {
    let mut s = Session::new(store, mode, rng);
    let xv = s.input(x.clone());
    let out = mlp.forward(&mut s, xv)?;
    Ok(s.value(out).clone())
}

/// Analytic stand-in for an MLP: splits the input row into equal-width
/// blocks and returns their element-wise sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockSum {
    pub width: usize,
    pub blocks: usize,
}

impl UpdateFn for BlockSum {
    fn input_width(&self) -> usize {
        self.width * self.blocks
    }

    fn output_width(&self) -> usize {
        self.width
    }

    fn apply(&self, s: &mut Session<'_>, x: Var) -> Result<Var> {
        let cols = s.value(x).cols();
        if cols != self.input_width() {
            return Err(Error::shape(
                "block_sum",
                format!("input width {cols}, expected {}", self.input_width()),
            ));
        }
        let mut acc = s.tape.slice_cols(x, 0, self.width)?;
        for b in 1..self.blocks {
            let part = s.tape.slice_cols(x, b * self.width, self.width)?;
            acc = s.tape.add(acc, part)?;
        }
        Ok(acc)
    }
}
