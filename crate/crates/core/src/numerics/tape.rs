//! Reverse-mode differentiation over a linear record of primitive operations.
//!
//! A [`Tape`] records every forward operation in execution order; calling
//! [`Tape::backward`] replays the record from the end and accumulates the
//! gradient of a scalar output into every node that depends on a leaf
//! marked as requiring gradients. Parameters are borrowed, not copied.

use std::borrow::Cow;
use std::collections::HashMap;
use std::sync::Arc;

use super::tensor::{gemm, Tensor2D};
use crate::error::{Error, Result};
use crate::spectral::fourier::{bin_weight, forward_parts, half_len, polar, Twiddles, PHASE_EPS};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Layer-norm variance floor.
pub const LAYER_NORM_EPS: f64 = 1e-5;

type BackwardFn = Box<dyn Fn(&Tensor2D, &Tensor2D) -> Tensor2D + Send + Sync>;

enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        shift: Var,
        normed: Tensor2D,
        rstd: Vec<f64>,
    },
    Softmax(Var),
    Transpose(Var),
    MeanRows(Var),
    ConcatCols(Vec<Var>),
    Im2Col {
        x: Var,
        kernel: usize,
    },
    Sum(Var),
    RfftAmplitude {
        x: Var,
        re: Tensor2D,
        im: Tensor2D,
        tw: Arc<Twiddles>,
    },
    RfftPhase {
        x: Var,
        re: Tensor2D,
        im: Tensor2D,
        tw: Arc<Twiddles>,
    },
    Irfft {
        amp: Var,
        phase: Var,
        tw: Arc<Twiddles>,
    },
    Custom {
        x: Var,
        backward: BackwardFn,
    },
}

struct Node<'a> {
    value: Cow<'a, Tensor2D>,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor2D>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor2D> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros of `shape` if nothing reached it.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Tensor2D {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor2D::zeros(shape.0, shape.1))
    }
}

/// Computation record for one forward/backward pass.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    twiddles: HashMap<usize, Arc<Twiddles>>,
}

fn shape_err(op: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Shape(format!("{op}: {}x{} with {}x{}", a.0, a.1, b.0, b.1))
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Tensor2D>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn twiddles(&mut self, n: usize) -> Arc<Twiddles> {
        self.twiddles
            .entry(n)
            .or_insert_with(|| Arc::new(Twiddles::new(n)))
            .clone()
    }

    /// A value that gradients do not flow into.
    pub fn constant(&mut self, t: Tensor2D) -> Var {
        self.push(Cow::Owned(t), Op::Leaf, false)
    }

    /// An owned leaf whose gradient is tracked.
    pub fn variable(&mut self, t: Tensor2D) -> Var {
        self.push(Cow::Owned(t), Op::Leaf, true)
    }

    /// A borrowed leaf whose gradient is tracked.
    pub fn param(&mut self, t: &'a Tensor2D) -> Var {
        self.push(Cow::Borrowed(t), Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor2D {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let t = self.value(v);
        debug_assert_eq!(t.shape(), (1, 1));
        t.data()[0]
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Cow::Owned(value), Op::MatMul(a, b), ng))
    }

    /// `x + row`, broadcasting a 1×cols row over every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (xs, rs) = (self.shape(x), self.shape(row));
        if rs != (1, xs.1) {
            return Err(shape_err("add_row", xs, rs));
        }
        let mut value = self.value(x).clone();
        let r = self.value(row).data().to_vec();
        for i in 0..xs.0 {
            for (v, b) in value.row_mut(i).iter_mut().zip(&r) {
                *v += b;
            }
        }
        let ng = self.needs(x) || self.needs(row);
        Ok(self.push(Cow::Owned(value), Op::AddRow(x, row), ng))
    }

    fn elementwise(&mut self, a: Var, b: Var, name: &str, f: fn(f64, f64) -> f64) -> Result<Tensor2D> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err(name, sa, sb));
        }
        self.value(a).zip_map(self.value(b), f)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.elementwise(a, b, "add", |x, y| x + y)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Cow::Owned(value), Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.elementwise(a, b, "sub", |x, y| x - y)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Cow::Owned(value), Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.elementwise(a, b, "mul", |x, y| x * y)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Cow::Owned(value), Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).scale(s);
        let ng = self.needs(a);
        self.push(Cow::Owned(value), Op::Scale(a, s), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        let ng = self.needs(a);
        self.push(Cow::Owned(value), Op::Relu(a), ng)
    }

    /// Per-row normalisation to zero mean and unit variance, then
    /// `gain * x̂ + shift` with 1×cols `gain` and `shift`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, shift: Var) -> Result<Var> {
        let (rows, cols) = self.shape(x);
        for p in [gain, shift] {
            if self.shape(p) != (1, cols) {
                return Err(shape_err("layer_norm", (rows, cols), self.shape(p)));
            }
        }
        let xv = self.value(x);
        let g = self.value(gain).data();
        let s = self.value(shift).data();
        let mut normed = Tensor2D::zeros(rows, cols);
        let mut out = Tensor2D::zeros(rows, cols);
        let mut rstd = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            rstd.push(inv);
            for c in 0..cols {
                let xh = (row[c] - mean) * inv;
                normed.set(r, c, xh);
                out.set(r, c, xh * g[c] + s[c]);
            }
        }
        let ng = self.needs(x) || self.needs(gain) || self.needs(shift);
        Ok(self.push(
            Cow::Owned(out),
            Op::LayerNorm {
                x,
                gain,
                shift,
                normed,
                rstd,
            },
            ng,
        ))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let value = softmax_rows(self.value(x));
        let ng = self.needs(x);
        self.push(Cow::Owned(value), Op::Softmax(x), ng)
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let value = self.value(x).transpose();
        let ng = self.needs(x);
        self.push(Cow::Owned(value), Op::Transpose(x), ng)
    }

    /// Average over rows, giving a 1×cols node.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let value = self.value(x).mean_rows();
        let ng = self.needs(x);
        self.push(Cow::Owned(value), Op::MeanRows(x), ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let value = {
            let ts: Vec<&Tensor2D> = parts.iter().map(|&p| self.value(p)).collect();
            Tensor2D::hstack(&ts)?
        };
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Cow::Owned(value), Op::ConcatCols(parts.to_vec()), ng))
    }

    /// Unfolds `kernel` neighbouring rows (zero padded, centred) side by side,
    /// so that a same-length 1-D convolution becomes one matrix product.
    pub fn im2col(&mut self, x: Var, kernel: usize) -> Result<Var> {
        if kernel % 2 == 0 {
            return Err(Error::Shape(format!("im2col kernel {kernel} must be odd")));
        }
        let (rows, cols) = self.shape(x);
        let half = kernel / 2;
        let xv = self.value(x);
        let mut out = Tensor2D::zeros(rows, kernel * cols);
        for t in 0..rows {
            for j in 0..kernel {
                let src = t as isize + j as isize - half as isize;
                if src < 0 || src >= rows as isize {
                    continue;
                }
                let dst = &mut out.row_mut(t)[j * cols..(j + 1) * cols];
                dst.copy_from_slice(xv.row(src as usize));
            }
        }
        let ng = self.needs(x);
        Ok(self.push(Cow::Owned(out), Op::Im2Col { x, kernel }, ng))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor2D::filled(1, 1, self.value(x).sum());
        let ng = self.needs(x);
        self.push(Cow::Owned(value), Op::Sum(x), ng)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).len() as f64;
        let s = self.sum(x);
        self.scale(s, 1.0 / n)
    }

    /// Mean squared difference, a 1×1 node.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let d = self.sub(pred, target)?;
        let sq = self.mul(d, d)?;
        Ok(self.mean(sq))
    }

    fn rfft_parts(&mut self, x: Var) -> (Tensor2D, Tensor2D, Arc<Twiddles>) {
        let n = self.shape(x).0;
        let tw = self.twiddles(n);
        let (re, im) = forward_parts(self.value(x), half_len(n), &tw);
        (re, im, tw)
    }

    /// Amplitudes of the non-redundant bins `0..=n/2` of each column.
    pub fn rfft_amplitude(&mut self, x: Var) -> Var {
        let (re, im, tw) = self.rfft_parts(x);
        let value = re.zip_map(&im, |r, i| polar(r, i).0).expect("same shape");
        let ng = self.needs(x);
        self.push(Cow::Owned(value), Op::RfftAmplitude { x, re, im, tw }, ng)
    }

    /// Phases in (-π, π] of the non-redundant bins of each column.
    pub fn rfft_phase(&mut self, x: Var) -> Var {
        let (re, im, tw) = self.rfft_parts(x);
        let value = re.zip_map(&im, |r, i| polar(r, i).1).expect("same shape");
        let ng = self.needs(x);
        self.push(Cow::Owned(value), Op::RfftPhase { x, re, im, tw }, ng)
    }

    /// Real length-`n` signal from half-spectrum amplitude and phase.
    ///
    /// Bins are mirrored with conjugate symmetry, so only the real part of the
    /// DC (and, for even `n`, Nyquist) term contributes and the result is real
    /// for any amplitude/phase pair.
    pub fn irfft(&mut self, amp: Var, phase: Var, n: usize) -> Result<Var> {
        let (sa, sp) = (self.shape(amp), self.shape(phase));
        if sa != sp || sa.0 != half_len(n) {
            return Err(shape_err("irfft", sa, sp));
        }
        let tw = self.twiddles(n);
        let (bins, d) = sa;
        let a = self.value(amp);
        let p = self.value(phase);
        let mut out = Tensor2D::zeros(n, d);
        for k in 0..bins {
            let w = bin_weight(k, n) / n as f64;
            for col in 0..d {
                let ak = a.get(k, col) * w;
                let (ps, pc) = p.get(k, col).sin_cos();
                for i in 0..n {
                    let (c, s) = (tw.cos(k, i), tw.sin(k, i));
                    out.data_mut()[i * d + col] += ak * (pc * c - ps * s);
                }
            }
        }
        let ng = self.needs(amp) || self.needs(phase);
        Ok(self.push(Cow::Owned(out), Op::Irfft { amp, phase, tw }, ng))
    }

    /// Elementwise op with a caller-supplied value and backward rule.
    ///
    /// `backward(x, grad_out)` must return the gradient with respect to `x`.
    pub fn custom(
        &mut self,
        x: Var,
        value: Tensor2D,
        backward: impl Fn(&Tensor2D, &Tensor2D) -> Tensor2D + Send + Sync + 'static,
    ) -> Result<Var> {
        if value.shape() != self.shape(x) {
            return Err(shape_err("custom", self.shape(x), value.shape()));
        }
        let ng = self.needs(x);
        Ok(self.push(
            Cow::Owned(value),
            Op::Custom {
                x,
                backward: Box::new(backward),
            },
            ng,
        ))
    }

    /// Gradients of the 1×1 node `output` with respect to every node.
    pub fn backward(&self, output: Var) -> Gradients {
        let mut grads: Vec<Option<Tensor2D>> = (0..self.nodes.len()).map(|_| None).collect();
        assert_eq!(self.shape(output), (1, 1), "backward needs a scalar output");
        grads[output.0] = Some(Tensor2D::filled(1, 1, 1.0));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, node: &Node<'a>, g: &Tensor2D, grads: &mut [Option<Tensor2D>]) {
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut Tensor2D)| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            let (r, c) = self.shape(v);
            let slot = grads[v.0].get_or_insert_with(|| Tensor2D::zeros(r, c));
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(*a, &mut |ga| gemm(g, false, bv, true, ga, 1.0));
                acc(*b, &mut |gb| gemm(av, true, g, false, gb, 1.0));
            }
            Op::AddRow(x, row) => {
                acc(*x, &mut |gx| gx.add_assign(g));
                acc(*row, &mut |gr| gr.add_assign(&g.col_sums()));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |ga| ga.add_assign(g));
                acc(*b, &mut |gb| gb.add_assign(g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |ga| ga.add_assign(g));
                acc(*b, &mut |gb| gb.add_scaled(g, -1.0));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(*a, &mut |ga| {
                    for ((o, gi), bi) in ga.data_mut().iter_mut().zip(g.data()).zip(bv.data()) {
                        *o += gi * bi;
                    }
                });
                acc(*b, &mut |gb| {
                    for ((o, gi), ai) in gb.data_mut().iter_mut().zip(g.data()).zip(av.data()) {
                        *o += gi * ai;
                    }
                });
            }
            Op::Scale(a, s) => acc(*a, &mut |ga| ga.add_scaled(g, *s)),
            Op::Relu(a) => {
                let av = self.value(*a);
                acc(*a, &mut |ga| {
                    for ((o, gi), x) in ga.data_mut().iter_mut().zip(g.data()).zip(av.data()) {
                        if *x > 0.0 {
                            *o += gi;
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gain,
                shift,
                normed,
                rstd,
            } => {
                let (rows, cols) = normed.shape();
                let gv = self.value(*gain).data();
                acc(*x, &mut |gx| {
                    for r in 0..rows {
                        let xh = normed.row(r);
                        let gr = g.row(r);
                        let mut mean_gh = 0.0;
                        let mut mean_ghx = 0.0;
                        for c in 0..cols {
                            let gh = gr[c] * gv[c];
                            mean_gh += gh;
                            mean_ghx += gh * xh[c];
                        }
                        mean_gh /= cols as f64;
                        mean_ghx /= cols as f64;
                        let out = gx.row_mut(r);
                        for c in 0..cols {
                            let gh = gr[c] * gv[c];
                            out[c] += rstd[r] * (gh - mean_gh - xh[c] * mean_ghx);
                        }
                    }
                });
                acc(*gain, &mut |gg| {
                    for r in 0..rows {
                        for ((o, gi), xh) in gg.data_mut().iter_mut().zip(g.row(r)).zip(normed.row(r)) {
                            *o += gi * xh;
                        }
                    }
                });
                acc(*shift, &mut |gs| gs.add_assign(&g.col_sums()));
            }
            Op::Softmax(x) => {
                let y = &node.value;
                acc(*x, &mut |gx| {
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((o, yi), gi) in gx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *o += yi * (gi - dot);
                        }
                    }
                });
            }
            Op::Transpose(x) => acc(*x, &mut |gx| gx.add_assign(&g.transpose())),
            Op::MeanRows(x) => {
                let rows = self.shape(*x).0;
                acc(*x, &mut |gx| {
                    let s = 1.0 / rows as f64;
                    for r in 0..rows {
                        for (o, gi) in gx.row_mut(r).iter_mut().zip(g.data()) {
                            *o += gi * s;
                        }
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let (rows, cols) = self.shape(*p);
                    acc(*p, &mut |gp| {
                        for r in 0..rows {
                            for (o, gi) in gp.row_mut(r).iter_mut().zip(&g.row(r)[off..off + cols]) {
                                *o += gi;
                            }
                        }
                    });
                    off += cols;
                }
            }
            Op::Im2Col { x, kernel } => {
                let (rows, cols) = self.shape(*x);
                let half = kernel / 2;
                acc(*x, &mut |gx| {
                    for t in 0..rows {
                        for j in 0..*kernel {
                            let src = t as isize + j as isize - half as isize;
                            if src < 0 || src >= rows as isize {
                                continue;
                            }
                            let gsrc = &g.row(t)[j * cols..(j + 1) * cols];
                            for (o, gi) in gx.row_mut(src as usize).iter_mut().zip(gsrc) {
                                *o += gi;
                            }
                        }
                    }
                });
            }
            Op::Sum(x) => {
                let s = g.data()[0];
                acc(*x, &mut |gx| gx.data_mut().iter_mut().for_each(|o| *o += s));
            }
            Op::RfftAmplitude { x, re, im, tw } => {
                let (bins, d) = re.shape();
                let mut g_re = Tensor2D::zeros(bins, d);
                let mut g_im = Tensor2D::zeros(bins, d);
                for idx in 0..bins * d {
                    let (r, i) = (re.data()[idx], im.data()[idx]);
                    let a = r.hypot(i);
                    if a < PHASE_EPS {
                        continue;
                    }
                    g_re.data_mut()[idx] = g.data()[idx] * r / a;
                    g_im.data_mut()[idx] = g.data()[idx] * i / a;
                }
                acc(*x, &mut |gx| spectral_adjoint(&g_re, &g_im, tw, gx));
            }
            Op::RfftPhase { x, re, im, tw } => {
                let (bins, d) = re.shape();
                let mut g_re = Tensor2D::zeros(bins, d);
                let mut g_im = Tensor2D::zeros(bins, d);
                for idx in 0..bins * d {
                    let (r, i) = (re.data()[idx], im.data()[idx]);
                    let a2 = r * r + i * i;
                    if a2.sqrt() < PHASE_EPS {
                        continue;
                    }
                    g_re.data_mut()[idx] = -g.data()[idx] * i / a2;
                    g_im.data_mut()[idx] = g.data()[idx] * r / a2;
                }
                acc(*x, &mut |gx| spectral_adjoint(&g_re, &g_im, tw, gx));
            }
            Op::Irfft { amp, phase, tw } => {
                let n = tw.n();
                let (bins, d) = self.shape(*amp);
                let a = self.value(*amp);
                let p = self.value(*phase);
                // Σ_i g_i cos(p + θ_ki) and Σ_i g_i sin(p + θ_ki)
                let mut cos_sum = Tensor2D::zeros(bins, d);
                let mut sin_sum = Tensor2D::zeros(bins, d);
                for k in 0..bins {
                    for col in 0..d {
                        let (ps, pc) = p.get(k, col).sin_cos();
                        let (mut cs, mut ss) = (0.0, 0.0);
                        for i in 0..n {
                            let (c, s) = (tw.cos(k, i), tw.sin(k, i));
                            let gi = g.get(i, col);
                            cs += gi * (pc * c - ps * s);
                            ss += gi * (ps * c + pc * s);
                        }
                        let w = bin_weight(k, n) / n as f64;
                        cos_sum.set(k, col, w * cs);
                        sin_sum.set(k, col, w * ss);
                    }
                }
                acc(*amp, &mut |ga| ga.add_assign(&cos_sum));
                acc(*phase, &mut |gp| {
                    for ((o, s), av) in gp.data_mut().iter_mut().zip(sin_sum.data()).zip(a.data()) {
                        *o -= av * s;
                    }
                });
            }
            Op::Custom { x, backward } => {
                let gx_val = backward(self.value(*x), g);
                acc(*x, &mut |gx| gx.add_assign(&gx_val));
            }
        }
    }
}

/// Adds `Σ_k g_re[k]·cos(θ_ki) − g_im[k]·sin(θ_ki)` into `gx`, the adjoint
/// of the forward real/imaginary parts.
fn spectral_adjoint(g_re: &Tensor2D, g_im: &Tensor2D, tw: &Twiddles, gx: &mut Tensor2D) {
    let (bins, d) = g_re.shape();
    let n = gx.rows();
    for i in 0..n {
        let out = gx.row_mut(i);
        for k in 0..bins {
            let (c, s) = (tw.cos(k, i), tw.sin(k, i));
            let (gr, gi) = (g_re.row(k), g_im.row(k));
            for col in 0..d {
                out[col] += gr[col] * c - gi[col] * s;
            }
        }
    }
}

/// Row-wise softmax with per-row max subtraction.
pub fn softmax_rows(x: &Tensor2D) -> Tensor2D {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}
