//! Reverse-mode differentiation over 2-D matrices.
//!
//! Every operation appends a node holding its forward value and enough
//! cached state to run its adjoint. [`Tape::backward`] walks the nodes in
//! reverse insertion order, which is a valid topological order because a
//! node can only reference nodes created before it.

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Row-segment reductions used by the graph aggregators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduce {
    Mean,
    Sum,
    Max,
}

pub const BN_EPS: f64 = 1e-5;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Abs(Var),
    Relu(Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    SliceCols {
        src: Var,
        start: usize,
    },
    GatherRows {
        src: Var,
        index: Vec<usize>,
    },
    Segment {
        src: Var,
        segments: Vec<usize>,
        reduce: Reduce,
        counts: Vec<usize>,
        // For `Reduce::Max`: source row that won each (segment, column).
        winners: Vec<usize>,
    },
    BatchNorm {
        x: Var,
        scale: Var,
        shift: Var,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Affine {
        x: Var,
        scale: Var,
        shift: Var,
        mean: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    Sum(Var),
    BceWithLogits {
        logits: Var,
        labels: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Batch statistics produced by a training-mode batch-norm node.
#[derive(Clone, Debug)]
pub struct BatchStats {
    pub rows: usize,
    pub mean: Vec<f64>,
    /// Biased (population) variance per column.
    pub var: Vec<f64>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of every node reachable from the differentiated scalar.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

fn as_matrix(t: &Tensor) -> (usize, usize) {
    (t.rows(), t.cols())
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        as_matrix(&self.nodes[v.0].value)
    }

    /// Records a leaf (input or parameter). Leaves are normalised to 2-D.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        let (r, c) = as_matrix(&value);
        let value = Tensor::new(vec![r, c], value.into_data()).expect("same length");
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, k) = self.dims(a);
        let (k2, m) = self.dims(b);
        if k != k2 {
            return Err(Error::shape(
                "matmul",
                format!("[{n} x {k}] * [{k2} x {m}]"),
            ));
        }
        let out = matmul_raw(self.value(a).data(), self.value(b).data(), n, k, m);
        Ok(self.push(Tensor::matrix(n, m, out)?, Op::MatMul(a, b)))
    }

    /// Adds a `1 x m` bias to every row of an `n x m` matrix.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (n, m) = self.dims(a);
        let (br, bc) = self.dims(bias);
        if br != 1 || bc != m {
            return Err(Error::shape(
                "add_bias",
                format!("[{n} x {m}] + bias [{br} x {bc}]"),
            ));
        }
        let b = self.value(bias).data();
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_mut(m.max(1)) {
            for (x, bj) in row.iter_mut().zip(b) {
                *x += bj;
            }
        }
        Ok(self.push(Tensor::matrix(n, m, out)?, Op::AddBias(a, bias)))
    }

    fn elementwise(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let da = self.dims(a);
        let db = self.dims(b);
        if da != db {
            return Err(Error::shape(name, format!("{da:?} vs {db:?}")));
        }
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(self.push(Tensor::matrix(da.0, da.1, out)?, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::abs);
        self.push(v, Op::Abs(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let v = self.value(a).map(|x| x * factor);
        self.push(v, Op::Scale(a, factor))
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::shape("concat_cols", "no inputs"));
        };
        let n = self.dims(first).0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.dims(p);
            if r != n {
                return Err(Error::shape(
                    "concat_cols",
                    format!("row counts differ: {n} vs {r}"),
                ));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(n * total);
        for i in 0..n {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        Ok(self.push(Tensor::matrix(n, total, out)?, Op::Concat(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, src: Var, start: usize, len: usize) -> Result<Var> {
        let (n, m) = self.dims(src);
        if start + len > m {
            return Err(Error::shape(
                "slice_cols",
                format!("columns {start}..{} of width {m}", start + len),
            ));
        }
        let data = self.value(src).data();
        let mut out = Vec::with_capacity(n * len);
        for i in 0..n {
            out.extend_from_slice(&data[i * m + start..i * m + start + len]);
        }
        Ok(self.push(Tensor::matrix(n, len, out)?, Op::SliceCols { src, start }))
    }

    /// `out[i] = src[index[i]]`.
    pub fn gather_rows(&mut self, src: Var, index: &[usize]) -> Result<Var> {
        let (n, m) = self.dims(src);
        let data = self.value(src).data();
        let mut out = Vec::with_capacity(index.len() * m);
        for &r in index {
            if r >= n {
                return Err(Error::shape(
                    "gather_rows",
                    format!("row {r} out of range for {n} rows"),
                ));
            }
            out.extend_from_slice(&data[r * m..(r + 1) * m]);
        }
        Ok(self.push(
            Tensor::matrix(index.len(), m, out)?,
            Op::GatherRows {
                src,
                index: index.to_vec(),
            },
        ))
    }

    /// Reduces the rows of `src` into `num_segments` rows, row `i` going to
    /// segment `segments[i]`. Empty segments produce zero rows.
    pub fn segment_reduce(
        &mut self,
        src: Var,
        segments: &[usize],
        num_segments: usize,
        reduce: Reduce,
    ) -> Result<Var> {
        let (n, m) = self.dims(src);
        if segments.len() != n {
            return Err(Error::shape(
                "segment_reduce",
                format!("{} segment ids for {n} rows", segments.len()),
            ));
        }
        let data = self.value(src).data();
        let mut counts = vec![0usize; num_segments];
        for &s in segments {
            if s >= num_segments {
                return Err(Error::shape(
                    "segment_reduce",
                    format!("segment {s} out of range for {num_segments}"),
                ));
            }
            counts[s] += 1;
        }
        let mut out = vec![0.0; num_segments * m];
        let mut winners = Vec::new();
        match reduce {
            Reduce::Sum | Reduce::Mean => {
                for (i, &s) in segments.iter().enumerate() {
                    for j in 0..m {
                        out[s * m + j] += data[i * m + j];
                    }
                }
                if reduce == Reduce::Mean {
                    for (s, &c) in counts.iter().enumerate() {
                        if c > 0 {
                            let inv = 1.0 / c as f64;
                            out[s * m..(s + 1) * m].iter_mut().for_each(|x| *x *= inv);
                        }
                    }
                }
            }
            Reduce::Max => {
                winners = vec![usize::MAX; num_segments * m];
                for (i, &s) in segments.iter().enumerate() {
                    for j in 0..m {
                        let k = s * m + j;
                        let x = data[i * m + j];
                        if winners[k] == usize::MAX || x > out[k] {
                            out[k] = x;
                            winners[k] = i;
                        }
                    }
                }
            }
        }
        Ok(self.push(
            Tensor::matrix(num_segments, m, out)?,
            Op::Segment {
                src,
                segments: segments.to_vec(),
                reduce,
                counts,
                winners,
            },
        ))
    }

    /// Batch normalization with statistics of the current rows. Returns the
    /// output and the statistics used, so callers can update running values.
    pub fn batch_norm(&mut self, x: Var, scale: Var, shift: Var) -> Result<(Var, BatchStats)> {
        let (n, m) = self.dims(x);
        self.check_row_param("batch_norm", scale, m)?;
        self.check_row_param("batch_norm", shift, m)?;
        let data = self.value(x).data();
        let mut mean = vec![0.0; m];
        let mut var = vec![0.0; m];
        if n > 0 {
            for row in data.chunks(m) {
                for (mu, x) in mean.iter_mut().zip(row) {
                    *mu += x;
                }
            }
            mean.iter_mut().for_each(|mu| *mu /= n as f64);
            for row in data.chunks(m) {
                for ((v, x), mu) in var.iter_mut().zip(row).zip(&mean) {
                    *v += (x - mu) * (x - mu);
                }
            }
            var.iter_mut().for_each(|v| *v /= n as f64);
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let g = self.value(scale).data();
        let b = self.value(shift).data();
        let mut normalized = Vec::with_capacity(n * m);
        let mut out = Vec::with_capacity(n * m);
        for row in data.chunks(m.max(1)).take(n) {
            for j in 0..m {
                let xh = (row[j] - mean[j]) * inv_std[j];
                normalized.push(xh);
                out.push(g[j] * xh + b[j]);
            }
        }
        let stats = BatchStats { rows: n, mean, var };
        let v = self.push(
            Tensor::matrix(n, m, out)?,
            Op::BatchNorm {
                x,
                scale,
                shift,
                normalized,
                inv_std,
            },
        );
        Ok((v, stats))
    }

    /// Batch normalization with fixed (running) statistics.
    pub fn batch_norm_fixed(
        &mut self,
        x: Var,
        scale: Var,
        shift: Var,
        mean: &[f64],
        var: &[f64],
    ) -> Result<Var> {
        let (n, m) = self.dims(x);
        self.check_row_param("batch_norm_fixed", scale, m)?;
        self.check_row_param("batch_norm_fixed", shift, m)?;
        if mean.len() != m || var.len() != m {
            return Err(Error::shape(
                "batch_norm_fixed",
                format!("running stats of width {} for {m} columns", mean.len()),
            ));
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let g = self.value(scale).data();
        let b = self.value(shift).data();
        let data = self.value(x).data();
        let mut out = Vec::with_capacity(n * m);
        for row in data.chunks(m.max(1)).take(n) {
            for j in 0..m {
                out.push(g[j] * (row[j] - mean[j]) * inv_std[j] + b[j]);
            }
        }
        Ok(self.push(
            Tensor::matrix(n, m, out)?,
            Op::Affine {
                x,
                scale,
                shift,
                mean: mean.to_vec(),
                inv_std,
            },
        ))
    }

    fn check_row_param(&self, op: &'static str, p: Var, m: usize) -> Result<()> {
        let (r, c) = self.dims(p);
        if r != 1 || c != m {
            return Err(Error::shape(
                op,
                format!("parameter [{r} x {c}] for width {m}"),
            ));
        }
        Ok(())
    }

    /// Multiplies element-wise by a fixed mask (already carrying any
    /// inverted-dropout scaling).
    pub fn dropout(&mut self, x: Var, mask: Vec<f64>) -> Result<Var> {
        let (n, m) = self.dims(x);
        if mask.len() != n * m {
            return Err(Error::shape("dropout", "mask length mismatch"));
        }
        let out = self
            .value(x)
            .data()
            .iter()
            .zip(&mask)
            .map(|(a, k)| a * k)
            .collect();
        Ok(self.push(Tensor::matrix(n, m, out)?, Op::Dropout { x, mask }))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Mean sigmoid cross-entropy of a column of logits against 0/1 labels.
    pub fn bce_with_logits(&mut self, logits: Var, labels: &[f64]) -> Result<Var> {
        let z = self.value(logits).data();
        if z.len() != labels.len() {
            return Err(Error::shape(
                "bce_with_logits",
                format!("{} logits, {} labels", z.len(), labels.len()),
            ));
        }
        let loss = bce_mean(z, labels);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::BceWithLogits {
                logits,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Reverse sweep from a single-element node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::shape(
                "backward",
                format!(
                    "loss must be a scalar, got shape {:?}",
                    self.nodes[loss.0].value.shape()
                ),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(
            self.nodes[loss.0].value.shape().to_vec(),
            1.0,
        ));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let gd = g.data();
        let (n, m) = as_matrix(&node.value);
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (_, k) = self.dims(*a);
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                // dA = G * B^T, dB = A^T * G
                let da = gemm(n, m, k, gd, (m, 1), bv, (1, m));
                let db = gemm(k, n, m, av, (1, k), gd, (m, 1));
                accumulate(grads, *a, vec![n, k], da);
                accumulate(grads, *b, vec![k, m], db);
            }
            Op::AddBias(a, bias) => {
                let mut db = vec![0.0; m];
                for row in gd.chunks(m.max(1)).take(n) {
                    for (d, x) in db.iter_mut().zip(row) {
                        *d += x;
                    }
                }
                accumulate(grads, *a, vec![n, m], gd.to_vec());
                accumulate(grads, *bias, vec![1, m], db);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, vec![n, m], gd.to_vec());
                accumulate(grads, *b, vec![n, m], gd.to_vec());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, vec![n, m], gd.to_vec());
                accumulate(grads, *b, vec![n, m], gd.iter().map(|x| -x).collect());
            }
            Op::Mul(a, b) => {
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                accumulate(
                    grads,
                    *a,
                    vec![n, m],
                    gd.iter().zip(bv).map(|(g, y)| g * y).collect(),
                );
                accumulate(
                    grads,
                    *b,
                    vec![n, m],
                    gd.iter().zip(av).map(|(g, x)| g * x).collect(),
                );
            }
            Op::Abs(a) => {
                let av = self.value(*a).data();
                let d = gd
                    .iter()
                    .zip(av)
                    .map(|(g, x)| {
                        if *x > 0.0 {
                            *g
                        } else if *x < 0.0 {
                            -g
                        } else {
                            0.0
                        }
                    })
                    .collect();
                accumulate(grads, *a, vec![n, m], d);
            }
            Op::Relu(a) => {
                let av = self.value(*a).data();
                let d = gd
                    .iter()
                    .zip(av)
                    .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                    .collect();
                accumulate(grads, *a, vec![n, m], d);
            }
            Op::Scale(a, f) => {
                accumulate(grads, *a, vec![n, m], gd.iter().map(|g| g * f).collect());
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.dims(p).1;
                    let mut d = Vec::with_capacity(n * w);
                    for i in 0..n {
                        d.extend_from_slice(&gd[i * m + offset..i * m + offset + w]);
                    }
                    accumulate(grads, p, vec![n, w], d);
                    offset += w;
                }
            }
            Op::SliceCols { src, start } => {
                let (sn, sm) = self.dims(*src);
                let mut d = vec![0.0; sn * sm];
                for i in 0..n {
                    d[i * sm + start..i * sm + start + m].copy_from_slice(&gd[i * m..(i + 1) * m]);
                }
                accumulate(grads, *src, vec![sn, sm], d);
            }
            Op::GatherRows { src, index } => {
                let (sn, sm) = self.dims(*src);
                let mut d = vec![0.0; sn * sm];
                for (i, &r) in index.iter().enumerate() {
                    for j in 0..sm {
                        d[r * sm + j] += gd[i * sm + j];
                    }
                }
                accumulate(grads, *src, vec![sn, sm], d);
            }
            Op::Segment {
                src,
                segments,
                reduce,
                counts,
                winners,
            } => {
                let (sn, sm) = self.dims(*src);
                let mut d = vec![0.0; sn * sm];
                match reduce {
                    Reduce::Sum | Reduce::Mean => {
                        for (i, &s) in segments.iter().enumerate() {
                            let w = if *reduce == Reduce::Mean {
                                1.0 / counts[s] as f64
                            } else {
                                1.0
                            };
                            for j in 0..sm {
                                d[i * sm + j] += w * gd[s * sm + j];
                            }
                        }
                    }
                    Reduce::Max => {
                        for (k, &w) in winners.iter().enumerate() {
                            if w != usize::MAX {
                                d[w * sm + k % sm] += gd[k];
                            }
                        }
                    }
                }
                accumulate(grads, *src, vec![sn, sm], d);
            }
            Op::BatchNorm {
                x,
                scale,
                shift,
                normalized,
                inv_std,
            } => {
                let gamma = self.value(*scale).data();
                let mut dgamma = vec![0.0; m];
                let mut dbeta = vec![0.0; m];
                let mut sum_dxh = vec![0.0; m];
                let mut sum_dxh_xh = vec![0.0; m];
                for i in 0..n {
                    for j in 0..m {
                        let k = i * m + j;
                        dgamma[j] += gd[k] * normalized[k];
                        dbeta[j] += gd[k];
                        let dxh = gd[k] * gamma[j];
                        sum_dxh[j] += dxh;
                        sum_dxh_xh[j] += dxh * normalized[k];
                    }
                }
                let mut dx = vec![0.0; n * m];
                let nf = n as f64;
                for i in 0..n {
                    for j in 0..m {
                        let k = i * m + j;
                        let dxh = gd[k] * gamma[j];
                        dx[k] = inv_std[j] / nf
                            * (nf * dxh - sum_dxh[j] - normalized[k] * sum_dxh_xh[j]);
                    }
                }
                accumulate(grads, *x, vec![n, m], dx);
                accumulate(grads, *scale, vec![1, m], dgamma);
                accumulate(grads, *shift, vec![1, m], dbeta);
            }
            Op::Affine {
                x,
                scale,
                shift,
                mean,
                inv_std,
            } => {
                let gamma = self.value(*scale).data();
                let xv = self.value(*x).data();
                let mut dgamma = vec![0.0; m];
                let mut dbeta = vec![0.0; m];
                let mut dx = vec![0.0; n * m];
                for i in 0..n {
                    for j in 0..m {
                        let k = i * m + j;
                        dgamma[j] += gd[k] * (xv[k] - mean[j]) * inv_std[j];
                        dbeta[j] += gd[k];
                        dx[k] = gd[k] * gamma[j] * inv_std[j];
                    }
                }
                accumulate(grads, *x, vec![n, m], dx);
                accumulate(grads, *scale, vec![1, m], dgamma);
                accumulate(grads, *shift, vec![1, m], dbeta);
            }
            Op::Dropout { x, mask } => {
                accumulate(
                    grads,
                    *x,
                    vec![n, m],
                    gd.iter().zip(mask).map(|(g, k)| g * k).collect(),
                );
            }
            Op::Sum(a) => {
                let (an, am) = self.dims(*a);
                accumulate(grads, *a, vec![an, am], vec![gd[0]; an * am]);
            }
            Op::BceWithLogits { logits, labels } => {
                let z = self.value(*logits).data();
                let (ln, lm) = self.dims(*logits);
                let inv = 1.0 / labels.len().max(1) as f64;
                let d = z
                    .iter()
                    .zip(labels)
                    .map(|(&s, &y)| gd[0] * inv * (sigmoid(s) - y))
                    .collect();
                accumulate(grads, *logits, vec![ln, lm], d);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, shape: Vec<usize>, d: Vec<f64>) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.data_mut().iter_mut().zip(d) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(Tensor::new(shape, d).expect("gradient shape")),
    }
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    gemm(n, k, m, a, (k, 1), b, (m, 1))
}

/// `A * B` for an `n x k` and a `k x m` operand given as (row, column)
/// strides, so transposed views cost nothing.
fn gemm(
    n: usize,
    k: usize,
    m: usize,
    a: &[f64],
    sa: (usize, usize),
    b: &[f64],
    sb: (usize, usize),
) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    if n == 0 || m == 0 || k == 0 {
        return out;
    }
    // SAFETY: the strides address exactly the n*k, k*m and n*m elements of
    // the three buffers, whose lengths the tape has already checked.
    unsafe {
        matrixmultiply::dgemm(
            n,
            k,
            m,
            1.0,
            a.as_ptr(),
            sa.0 as isize,
            sa.1 as isize,
            b.as_ptr(),
            sb.0 as isize,
            sb.1 as isize,
            0.0,
            out.as_mut_ptr(),
            m as isize,
            1,
        );
    }
    out
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Stable `mean(-[y log s(z) + (1-y) log(1-s(z))])`, written as
/// `max(z,0) - z*y + log(1 + exp(-|z|))`.
pub fn bce_mean(logits: &[f64], labels: &[f64]) -> f64 {
    if logits.is_empty() {
        return 0.0;
    }
    let total: f64 = logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
        .sum();
    total / logits.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(build: impl Fn(&mut Tape, Var) -> Var, x: Tensor) {
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let out = build(&mut tape, xv);
        let grads = tape.backward(out).unwrap();
        let analytic = grads
            .get(xv)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(vec![x.rows(), x.cols()]));
        let h = 1e-5;
        for i in 0..x.len() {
            let eval = |delta: f64| {
                let mut t = Tape::new();
                let mut xp = x.clone();
                xp.data_mut()[i] += delta;
                let v = t.leaf(xp);
                let o = build(&mut t, v);
                t.value(o).data()[0]
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            let a = analytic.data()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            assert!(rel < 1e-6, "entry {i}: analytic {a} numeric {numeric}");
        }
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row_vector(vec![1.0, -2.0, 3.5]));
        let s = t.sum(x);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn dot_gradient_is_twice_input() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row_vector(vec![1.0, -2.0, 3.5]));
        let sq = t.mul(x, x).unwrap();
        let s = t.sum(sq);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[2.0, -4.0, 7.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row_vector(vec![1.0, 2.0]));
        assert!(matches!(t.backward(x), Err(Error::Shape { .. })));
    }

    #[test]
    fn unused_leaf_gets_no_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row_vector(vec![1.0, 2.0]));
        let y = t.leaf(Tensor::row_vector(vec![3.0]));
        let s = t.sum(x);
        let g = t.backward(s).unwrap();
        assert!(g.get(y).is_none());
    }

    #[test]
    fn matmul_gradient() {
        let w = Tensor::matrix(3, 2, vec![0.3, -0.2, 0.5, 0.1, -0.7, 0.9]).unwrap();
        fd_check(
            move |t, x| {
                let wv = t.leaf(w.clone());
                let y = t.matmul(x, wv).unwrap();
                let y2 = t.mul(y, y).unwrap();
                t.sum(y2)
            },
            Tensor::matrix(2, 3, vec![1.0, 2.0, -1.0, 0.5, 0.25, 3.0]).unwrap(),
        );
    }

    #[test]
    fn batch_norm_gradient() {
        let w = Tensor::matrix(2, 3, vec![0.3, -0.2, 0.5, 0.1, -0.7, 0.9]).unwrap();
        fd_check(
            move |t, x| {
                let g = t.leaf(Tensor::row_vector(vec![1.5, 0.7]));
                let b = t.leaf(Tensor::row_vector(vec![0.1, -0.3]));
                let (y, _) = t.batch_norm(x, g, b).unwrap();
                let wv = t.leaf(w.clone());
                let y = t.matmul(y, wv).unwrap();
                let y = t.mul(y, y).unwrap();
                let z = t.concat_cols(&[y, y]).unwrap();
                let z = t.slice_cols(z, 1, 4).unwrap();
                t.sum(z)
            },
            Tensor::matrix(4, 2, vec![1.0, 2.0, -1.0, 0.5, 0.25, 3.0, 0.9, -1.1]).unwrap(),
        );
    }

    #[test]
    fn segment_and_gather_gradients() {
        fd_check(
            |t, x| {
                let g = t.gather_rows(x, &[2, 0, 0, 1]).unwrap();
                let m = t.segment_reduce(g, &[0, 1, 1, 0], 3, Reduce::Mean).unwrap();
                let mx = t.segment_reduce(x, &[1, 1, 0], 2, Reduce::Max).unwrap();
                let a = t.abs(m);
                let sq = t.mul(mx, mx).unwrap();
                let s1 = t.sum(a);
                let s2 = t.sum(sq);
                let s1 = t.scale(s1, 0.5);
                let s = t.add(s1, s2).unwrap();
                t.relu(s)
            },
            Tensor::matrix(3, 2, vec![1.0, -2.0, 0.3, 0.5, -0.25, 3.0]).unwrap(),
        );
    }

    #[test]
    fn bce_gradient() {
        fd_check(
            |t, x| t.bce_with_logits(x, &[1.0, 0.0, 1.0]).unwrap(),
            Tensor::matrix(3, 1, vec![0.3, -1.2, 2.5]).unwrap(),
        );
    }

    #[test]
    fn bce_reference_values() {
        assert!((bce_mean(&[0.0], &[1.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_mean(&[0.0], &[0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_mean(&[20.0], &[1.0]) < 1e-8);
        assert!(bce_mean(&[-800.0], &[0.0]).is_finite());
        assert!((bce_mean(&[-800.0], &[1.0]) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn empty_segments_are_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::zeros(vec![0, 2]));
        let m = t.segment_reduce(x, &[], 2, Reduce::Mean).unwrap();
        assert_eq!(t.value(m).data(), &[0.0; 4]);
        let mx = t.segment_reduce(x, &[], 1, Reduce::Max).unwrap();
        assert_eq!(t.value(mx).data(), &[0.0; 2]);
    }
}
