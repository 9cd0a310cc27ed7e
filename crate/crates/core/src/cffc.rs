//! Cross Fourier fusion conditioner.
//!
//! Each sub-trajectory is first enhanced in the frequency domain: its
//! amplitude and phase spectra each get a residual update from a normalised
//! feed-forward branch before transforming back. A single-head cross
//! attention then builds queries from the high-frequency stream and keys
//! from the low-frequency stream; one attention matrix mixes both value
//! projections into the two condition sequences.
//!
//! The Fourier branches act on the non-redundant half spectrum (bins
//! `0..=n/2`) and the inverse mirrors it with conjugate symmetry, so the
//! enhanced sequence is real by construction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    ffn_apply, Bound, FfnParams, LayerNormParams, ParamId, ParameterSet, Tape, Tensor2D, Var,
    DEFAULT_HIDDEN,
};
use crate::spectral::SubTrajectoryPair;

pub const DEFAULT_D_MODEL: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CffcConfig {
    pub state_dim: usize,
    pub d_model: usize,
    pub hidden: usize,
}

impl CffcConfig {
    pub fn new(state_dim: usize) -> Self {
        Self {
            state_dim,
            d_model: DEFAULT_D_MODEL,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

/// Amplitude and phase branches, each a layer norm followed by an FFN whose
/// output layer starts at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FourierEnhancerParams {
    pub amp_norm: LayerNormParams,
    pub amp_ffn: FfnParams,
    pub phase_norm: LayerNormParams,
    pub phase_ffn: FfnParams,
}

impl FourierEnhancerParams {
    pub fn new(
        ps: &mut ParameterSet,
        prefix: &str,
        width: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            amp_norm: LayerNormParams::new(ps, &format!("{prefix}.amp_norm"), width),
            amp_ffn: FfnParams::zero_output(ps, &format!("{prefix}.amp_ffn"), width, hidden, width, rng),
            phase_norm: LayerNormParams::new(ps, &format!("{prefix}.phase_norm"), width),
            phase_ffn: FfnParams::zero_output(
                ps,
                &format!("{prefix}.phase_ffn"),
                width,
                hidden,
                width,
                rng,
            ),
        }
    }

    pub fn ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        ids.extend(self.amp_norm.ids());
        ids.extend(self.amp_ffn.ids());
        ids.extend(self.phase_norm.ids());
        ids.extend(self.phase_ffn.ids());
        ids
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CrossAttentionParams {
    pub query: FfnParams,
    pub key: FfnParams,
    pub value_low: FfnParams,
    pub value_high: FfnParams,
    pub d_k: usize,
}

impl CrossAttentionParams {
    pub fn new(
        ps: &mut ParameterSet,
        prefix: &str,
        width: usize,
        hidden: usize,
        d_model: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut ffn = |name: &str| FfnParams::new(ps, &format!("{prefix}.{name}"), width, hidden, d_model, rng);
        Self {
            query: ffn("query"),
            key: ffn("key"),
            value_low: ffn("value_low"),
            value_high: ffn("value_high"),
            d_k: d_model,
        }
    }
}

/// Condition sequences and their pooled vectors, as tape nodes.
#[derive(Clone, Copy, Debug)]
pub struct ConditionVars {
    pub con_low: Var,
    pub con_high: Var,
    pub pooled_low: Var,
    pub pooled_high: Var,
    pub attention: Var,
}

/// Evaluated conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionPair {
    pub con_low: Tensor2D,
    pub con_high: Tensor2D,
    pub pooled_low: Tensor2D,
    pub pooled_high: Tensor2D,
}

impl ConditionPair {
    pub fn from_tape(tape: &Tape<'_>, v: &ConditionVars) -> Self {
        Self {
            con_low: tape.value(v.con_low).clone(),
            con_high: tape.value(v.con_high).clone(),
            pooled_low: tape.value(v.pooled_low).clone(),
            pooled_high: tape.value(v.pooled_high).clone(),
        }
    }
}

/// `IDFT(A + FFN(Norm(A)), P + FFN(Norm(P)))` with `(A, P) = DFT(sub)`.
pub fn fourier_enhance(
    tape: &mut Tape<'_>,
    p: &Bound,
    params: &FourierEnhancerParams,
    sub: Var,
) -> Result<Var> {
    let (n, d) = tape.shape(sub);
    if n < 2 {
        return Err(Error::Length(format!("fourier enhancement needs n >= 2, got {n}")));
    }
    if params.amp_ffn.input() != d {
        return Err(Error::Shape(format!(
            "enhancer expects width {}, got {d}",
            params.amp_ffn.input()
        )));
    }
    let amp = tape.rfft_amplitude(sub);
    let phase = tape.rfft_phase(sub);

    let amp_norm = params.amp_norm.forward(tape, p, amp)?;
    let amp_delta = ffn_apply(tape, p, &params.amp_ffn, amp_norm)?;
    let amp_new = tape.add(amp, amp_delta)?;

    let phase_norm = params.phase_norm.forward(tape, p, phase)?;
    let phase_delta = ffn_apply(tape, p, &params.phase_ffn, phase_norm)?;
    let phase_new = tape.add(phase, phase_delta)?;

    let out = tape.irfft(amp_new, phase_new, n)?;
    tape.value(out).ensure_finite("enhanced sub-trajectory")?;
    Ok(out)
}

/// One shared `softmax(QKᵀ/√d_k)` applied to both value projections.
pub fn cross_attend(
    tape: &mut Tape<'_>,
    p: &Bound,
    params: &CrossAttentionParams,
    low: Var,
    high: Var,
) -> Result<ConditionVars> {
    if tape.shape(low) != tape.shape(high) {
        return Err(Error::Shape(format!(
            "cross attention streams {:?} vs {:?}",
            tape.shape(low),
            tape.shape(high)
        )));
    }
    let q = ffn_apply(tape, p, &params.query, high)?;
    let k = ffn_apply(tape, p, &params.key, low)?;
    let v_low = ffn_apply(tape, p, &params.value_low, low)?;
    let v_high = ffn_apply(tape, p, &params.value_high, high)?;

    let kt = tape.transpose(k);
    let logits = tape.matmul(q, kt)?;
    let logits = tape.scale(logits, 1.0 / (params.d_k as f64).sqrt());
    let attention = tape.softmax_rows(logits);

    let con_low = tape.matmul(attention, v_low)?;
    let con_high = tape.matmul(attention, v_high)?;
    let pooled_low = tape.mean_rows(con_low);
    let pooled_high = tape.mean_rows(con_high);
    Ok(ConditionVars {
        con_low,
        con_high,
        pooled_low,
        pooled_high,
        attention,
    })
}

/// Conditioner parameters for both streams.
#[derive(Clone, Debug, PartialEq)]
pub struct Cffc {
    pub config: CffcConfig,
    pub params: ParameterSet,
    pub enhance_low: FourierEnhancerParams,
    pub enhance_high: FourierEnhancerParams,
    pub attention: CrossAttentionParams,
}

impl Cffc {
    pub fn new(config: CffcConfig, rng: &mut impl Rng) -> Self {
        let mut ps = ParameterSet::new();
        let w = config.state_dim;
        let enhance_low = FourierEnhancerParams::new(&mut ps, "enhance_low", w, config.hidden, rng);
        let enhance_high = FourierEnhancerParams::new(&mut ps, "enhance_high", w, config.hidden, rng);
        let attention =
            CrossAttentionParams::new(&mut ps, "attention", w, config.hidden, config.d_model, rng);
        Self {
            config,
            params: ps,
            enhance_low,
            enhance_high,
            attention,
        }
    }

    /// Condition width handed to each diffusion model: pooled features plus
    /// the normalised return.
    pub fn condition_dim(&self) -> usize {
        self.config.d_model + 1
    }

    pub fn forward(
        &self,
        tape: &mut Tape<'_>,
        p: &Bound,
        low: Var,
        high: Var,
    ) -> Result<ConditionVars> {
        let low = fourier_enhance(tape, p, &self.enhance_low, low)?;
        let high = fourier_enhance(tape, p, &self.enhance_high, high)?;
        cross_attend(tape, p, &self.attention, low, high)
    }

    /// Evaluates the conditioner on a sub-trajectory pair.
    pub fn apply(&self, pair: &SubTrajectoryPair) -> Result<ConditionPair> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let low = tape.constant(pair.low.clone());
        let high = tape.constant(pair.high.clone());
        let vars = self.forward(&mut tape, &bound, low, high)?;
        Ok(ConditionPair::from_tape(&tape, &vars))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(seed: u64, d: usize) -> Cffc {
        let cfg = CffcConfig {
            state_dim: d,
            d_model: 8,
            hidden: 16,
        };
        Cffc::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn signal(n: usize, d: usize, phase: f64) -> Tensor2D {
        Tensor2D::from_fn(n, d, |i, j| ((i as f64 + phase) * (0.3 + 0.2 * j as f64)).sin() + 0.1 * j as f64)
    }

    #[test]
    fn zeroed_enhancer_is_identity() {
        let c = small(1, 3);
        let x = signal(48, 3, 0.0);
        let mut tape = Tape::new();
        let b = c.params.bind(&mut tape);
        let xv = tape.constant(x.clone());
        let y = fourier_enhance(&mut tape, &b, &c.enhance_low, xv).unwrap();
        assert_eq!(tape.shape(y), (48, 3));
        assert!(tape.value(y).max_abs_diff(&x) <= 1e-9);
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let c = small(2, 2);
        let mut tape = Tape::new();
        let b = c.params.bind(&mut tape);
        let lo = tape.constant(signal(6, 2, 0.0));
        let hi = tape.constant(signal(6, 2, 1.0));
        let v = c.forward(&mut tape, &b, lo, hi).unwrap();
        let a = tape.value(v.attention);
        for r in 0..a.rows() {
            assert!((a.row(r).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        assert_eq!(tape.shape(v.pooled_high), (1, 8));
    }

    #[test]
    fn zero_query_gives_uniform_attention() {
        let mut c = small(3, 2);
        for id in c.attention.query.ids() {
            c.params.value_mut(id).fill(0.0);
        }
        let mut tape = Tape::new();
        let b = c.params.bind(&mut tape);
        let lo = tape.constant(signal(5, 2, 0.0));
        let hi = tape.constant(signal(5, 2, 0.5));
        let v = cross_attend(&mut tape, &b, &c.attention, lo, hi).unwrap();
        let vl = ffn_apply(&mut tape, &b, &c.attention.value_low, lo).unwrap();
        let mean = tape.value(vl).mean_rows();
        let con = tape.value(v.con_low);
        for r in 0..con.rows() {
            for (a, m) in con.row(r).iter().zip(mean.data()) {
                assert!((a - m).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_row_passes_value_through() {
        let c = small(4, 2);
        let mut tape = Tape::new();
        let b = c.params.bind(&mut tape);
        let lo = tape.constant(Tensor2D::row_vector(&[0.3, -0.2]));
        let hi = tape.constant(Tensor2D::row_vector(&[1.0, 0.4]));
        let v = cross_attend(&mut tape, &b, &c.attention, lo, hi).unwrap();
        let vl = ffn_apply(&mut tape, &b, &c.attention.value_low, lo).unwrap();
        assert_eq!(tape.value(v.attention).data(), &[1.0]);
        assert_eq!(tape.value(v.con_low), tape.value(vl));
    }

    #[test]
    fn rejects_mismatched_streams() {
        let c = small(5, 2);
        let mut tape = Tape::new();
        let b = c.params.bind(&mut tape);
        let lo = tape.constant(Tensor2D::zeros(4, 2));
        let hi = tape.constant(Tensor2D::zeros(3, 2));
        assert!(cross_attend(&mut tape, &b, &c.attention, lo, hi).is_err());
    }

    #[test]
    fn deterministic_apply() {
        let c = small(6, 2);
        let pair = SubTrajectoryPair::new(signal(8, 2, 0.0), signal(8, 2, 2.0)).unwrap();
        let a = c.apply(&pair).unwrap();
        let b = c.apply(&pair).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.con_low.shape(), (8, 8));
    }
}
