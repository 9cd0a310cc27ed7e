use rand::Rng;

use super::params::{Bound, ParamId, ParameterSet};
use super::tape::{Tape, Var};
use crate::error::Result;

/// Hidden width of every two-layer MLP unless configured otherwise.
pub const DEFAULT_HIDDEN: usize = 512;

/// `y = x·w + b` with the bias broadcast over rows.
pub fn linear(tape: &mut Tape<'_>, x: Var, w: Var, b: Var) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    tape.add_row(xw, b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(
        ps: &mut ParameterSet,
        prefix: &str,
        input: usize,
        output: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let w = ps.add_uniform(format!("{prefix}.w"), input, output, input, rng);
        let b = ps.add_uniform(format!("{prefix}.b"), 1, output, input, rng);
        Self {
            w,
            b,
            input,
            output,
        }
    }

    /// Weights and bias start at zero.
    pub fn zeroed(ps: &mut ParameterSet, prefix: &str, input: usize, output: usize) -> Self {
        let w = ps.add_zeros(format!("{prefix}.w"), input, output);
        let b = ps.add_zeros(format!("{prefix}.b"), 1, output);
        Self {
            w,
            b,
            input,
            output,
        }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, p: &Bound, x: Var) -> Result<Var> {
        linear(tape, x, p.var(self.w), p.var(self.b))
    }

    pub fn ids(&self) -> [ParamId; 2] {
        [self.w, self.b]
    }
}

/// Two linear layers with a rectified-linear activation in between.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FfnParams {
    pub first: Linear,
    pub second: Linear,
}

impl FfnParams {
    pub fn new(
        ps: &mut ParameterSet,
        prefix: &str,
        input: usize,
        hidden: usize,
        output: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            first: Linear::new(ps, &format!("{prefix}.0"), input, hidden, rng),
            second: Linear::new(ps, &format!("{prefix}.1"), hidden, output, rng),
        }
    }

    /// Same as [`FfnParams::new`] but the output layer starts at zero, so the
    /// network initially maps everything to zero.
    pub fn zero_output(
        ps: &mut ParameterSet,
        prefix: &str,
        input: usize,
        hidden: usize,
        output: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            first: Linear::new(ps, &format!("{prefix}.0"), input, hidden, rng),
            second: Linear::zeroed(ps, &format!("{prefix}.1"), hidden, output),
        }
    }

    pub fn input(&self) -> usize {
        self.first.input
    }

    pub fn output(&self) -> usize {
        self.second.output
    }

    pub fn ids(&self) -> [ParamId; 4] {
        [self.first.w, self.first.b, self.second.w, self.second.b]
    }
}

/// `second(relu(first(x)))`
pub fn ffn_apply(tape: &mut Tape<'_>, p: &Bound, ffn: &FfnParams, x: Var) -> Result<Var> {
    let h = ffn.first.forward(tape, p, x)?;
    let h = tape.relu(h);
    ffn.second.forward(tape, p, h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerNormParams {
    pub gain: ParamId,
    pub shift: ParamId,
}

impl LayerNormParams {
    pub fn new(ps: &mut ParameterSet, prefix: &str, width: usize) -> Self {
        let gain = ps.add(
            format!("{prefix}.gain"),
            super::Tensor2D::filled(1, width, 1.0),
        );
        let shift = ps.add_zeros(format!("{prefix}.shift"), 1, width);
        Self { gain, shift }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, p: &Bound, x: Var) -> Result<Var> {
        tape.layer_norm(x, p.var(self.gain), p.var(self.shift))
    }

    pub fn ids(&self) -> [ParamId; 2] {
        [self.gain, self.shift]
    }
}

/// Same-length 1-D convolution over the time axis (rows).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv1d {
    pub kernel: usize,
    pub linear: Linear,
}

impl Conv1d {
    pub fn new(
        ps: &mut ParameterSet,
        prefix: &str,
        input: usize,
        output: usize,
        kernel: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            kernel,
            linear: Linear::new(ps, prefix, kernel * input, output, rng),
        }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, p: &Bound, x: Var) -> Result<Var> {
        let cols = tape.im2col(x, self.kernel)?;
        self.linear.forward(tape, p, cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor2D;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_weights_pass_through() {
        let x = Tensor2D::from_fn(3, 4, |i, j| (i as f64) - 0.5 * j as f64);
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let w = tape.constant(Tensor2D::identity(4));
        let b = tape.constant(Tensor2D::zeros(1, 4));
        let y = linear(&mut tape, xv, w, b).unwrap();
        assert_eq!(tape.value(y), &x);
    }

    #[test]
    fn zero_input_gives_bias() {
        let mut tape = Tape::new();
        let xv = tape.constant(Tensor2D::zeros(2, 3));
        let w = tape.constant(Tensor2D::filled(3, 2, 7.0));
        let b = tape.constant(Tensor2D::row_vector(&[1.0, -2.0]));
        let y = linear(&mut tape, xv, w, b).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, -2.0, 1.0, -2.0]);
    }

    #[test]
    fn linear_rejects_mismatch() {
        let mut tape = Tape::new();
        let xv = tape.constant(Tensor2D::zeros(2, 3));
        let w = tape.constant(Tensor2D::zeros(2, 2));
        let b = tape.constant(Tensor2D::zeros(1, 2));
        assert!(linear(&mut tape, xv, w, b).is_err());
    }

    #[test]
    fn zero_output_ffn_is_zero() {
        let mut ps = ParameterSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ffn = FfnParams::zero_output(&mut ps, "f", 5, 16, 5, &mut rng);
        let mut tape = Tape::new();
        let bound = ps.bind(&mut tape);
        let x = tape.constant(Tensor2D::from_fn(4, 5, |i, j| (i * j) as f64 - 3.0));
        let y = ffn_apply(&mut tape, &bound, &ffn, x).unwrap();
        assert_eq!(tape.value(y), &Tensor2D::zeros(4, 5));
    }

    #[test]
    fn ffn_of_zero_input_with_zero_biases() {
        let mut ps = ParameterSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ffn = FfnParams::new(&mut ps, "f", 3, 8, 2, &mut rng);
        ps.value_mut(ffn.first.b).fill(0.0);
        ps.value_mut(ffn.second.b).fill(0.0);
        let mut tape = Tape::new();
        let bound = ps.bind(&mut tape);
        let x = tape.constant(Tensor2D::zeros(4, 3));
        let y = ffn_apply(&mut tape, &bound, &ffn, x).unwrap();
        assert_eq!(tape.value(y), &Tensor2D::zeros(4, 2));
    }

    #[test]
    fn layer_norm_examples() {
        let mut ps = ParameterSet::new();
        let ln = LayerNormParams::new(&mut ps, "ln", 2);
        let mut tape = Tape::new();
        let bound = ps.bind(&mut tape);
        let x = tape.constant(Tensor2D::from_rows(&[[3.0, 3.0], [1.0, -1.0]]).unwrap());
        let y = ln.forward(&mut tape, &bound, x).unwrap();
        let y = tape.value(y);
        assert_eq!(y.row(0), &[0.0, 0.0]);
        let expect = 1.0 / (1.0 + 1e-5f64).sqrt();
        assert!((y.get(1, 0) - expect).abs() < 1e-15);
        assert!((y.get(1, 1) + expect).abs() < 1e-15);
    }

    #[test]
    fn conv1d_of_impulse_reads_kernel_taps() {
        let mut ps = ParameterSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let conv = Conv1d::new(&mut ps, "c", 1, 1, 3, &mut rng);
        *ps.value_mut(conv.linear.w) = Tensor2D::column_vector(&[1.0, 2.0, 3.0]);
        ps.value_mut(conv.linear.b).fill(0.0);
        let mut tape = Tape::new();
        let bound = ps.bind(&mut tape);
        let x = tape.constant(Tensor2D::column_vector(&[0.0, 1.0, 0.0, 0.0]));
        let y = conv.forward(&mut tape, &bound, x).unwrap();
        // out[t] = 1·x[t-1] + 2·x[t] + 3·x[t+1]
        assert_eq!(tape.value(y).data(), &[3.0, 2.0, 1.0, 0.0]);
    }
}
