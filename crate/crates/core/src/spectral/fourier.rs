//! Full-length discrete Fourier transform in polar form.
//!
//! The transform is the plain O(n²) definition `F(k) = Σ x_i e^{-j2πki/n}`
//! with the `1/n` factor on the inverse. Sequence lengths in this crate are
//! at most a few hundred samples, and the direct sum keeps the twiddle
//! symmetries exact, which matters for the phase at the DC and Nyquist bins.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::Tensor2D;

/// Amplitudes below this are treated as zero and get phase 0.
pub const PHASE_EPS: f64 = 1e-12;

/// Imaginary residue above this makes an inverse transform fail.
pub const IMAG_TOLERANCE: f64 = 1e-6;

/// `cos(2πm/n)` and `sin(2πm/n)` for `m in 0..n`, exact at quarter turns.
#[derive(Clone, Debug)]
pub struct Twiddles {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Twiddles {
    pub fn new(n: usize) -> Self {
        let mut cos = Vec::with_capacity(n);
        let mut sin = Vec::with_capacity(n);
        for m in 0..n {
            let (s, c) = if (4 * m) % n == 0 {
                match 4 * m / n {
                    0 => (0.0, 1.0),
                    1 => (1.0, 0.0),
                    2 => (0.0, -1.0),
                    _ => (-1.0, 0.0),
                }
            } else {
                (2.0 * PI * m as f64 / n as f64).sin_cos()
            };
            cos.push(c);
            sin.push(s);
        }
        Self { n, cos, sin }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// `cos(2π k i / n)`
    #[inline]
    pub fn cos(&self, k: usize, i: usize) -> f64 {
        self.cos[(k * i) % self.n]
    }

    /// `sin(2π k i / n)`
    #[inline]
    pub fn sin(&self, k: usize, i: usize) -> f64 {
        self.sin[(k * i) % self.n]
    }
}

/// Number of non-redundant bins of a real length-`n` signal.
#[inline]
pub fn half_len(n: usize) -> usize {
    n / 2 + 1
}

/// Multiplicity of bin `k` in the Hermitian-symmetric full spectrum.
#[inline]
pub fn bin_weight(k: usize, n: usize) -> f64 {
    if k == 0 || (n % 2 == 0 && k == n / 2) {
        1.0
    } else {
        2.0
    }
}

/// Real and imaginary parts of bins `0..bins` for every column of `x`.
pub(crate) fn forward_parts(x: &Tensor2D, bins: usize, tw: &Twiddles) -> (Tensor2D, Tensor2D) {
    let (n, d) = x.shape();
    let mut re = Tensor2D::zeros(bins, d);
    let mut im = Tensor2D::zeros(bins, d);
    for k in 0..bins {
        for i in 0..n {
            let (c, s) = (tw.cos(k, i), tw.sin(k, i));
            let row = x.row(i);
            for (col, &v) in row.iter().enumerate() {
                let idx = k * d + col;
                re.data_mut()[idx] += v * c;
                im.data_mut()[idx] -= v * s;
            }
        }
    }
    // -0.0 would put the phase of a real negative bin at -π instead of π.
    im.data_mut().iter_mut().for_each(|v| *v += 0.0);
    (re, im)
}

#[inline]
pub(crate) fn polar(re: f64, im: f64) -> (f64, f64) {
    let amp = re.hypot(im);
    if amp < PHASE_EPS {
        return (amp, 0.0);
    }
    let mut ph = im.atan2(re);
    if ph <= -PI {
        ph = PI;
    }
    (amp, ph)
}

/// Amplitude and phase of a transformed sequence, bins × dims.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumFrame {
    pub amplitude: Tensor2D,
    pub phase: Tensor2D,
}

impl SpectrumFrame {
    pub fn new(amplitude: Tensor2D, phase: Tensor2D) -> Result<Self> {
        if amplitude.shape() != phase.shape() {
            return Err(Error::Shape(format!(
                "amplitude {:?} vs phase {:?}",
                amplitude.shape(),
                phase.shape()
            )));
        }
        Ok(Self { amplitude, phase })
    }

    /// Transform length.
    pub fn n(&self) -> usize {
        self.amplitude.rows()
    }

    /// Squared amplitudes.
    pub fn power(&self) -> Tensor2D {
        self.amplitude.map(|a| a * a)
    }
}

/// Unnormalised forward transform of every column, in polar form.
pub fn dft(seq: &Tensor2D) -> Result<SpectrumFrame> {
    let n = seq.rows();
    if n == 0 {
        return Err(Error::Length("dft of an empty sequence".into()));
    }
    seq.ensure_finite("dft input")?;
    let tw = Twiddles::new(n);
    let (re, im) = forward_parts(seq, n, &tw);
    let mut amplitude = Tensor2D::zeros(n, seq.cols());
    let mut phase = Tensor2D::zeros(n, seq.cols());
    for (idx, (&r, &i)) in re.data().iter().zip(im.data()).enumerate() {
        let (a, p) = polar(r, i);
        amplitude.data_mut()[idx] = a;
        phase.data_mut()[idx] = p;
    }
    Ok(SpectrumFrame { amplitude, phase })
}

/// Inverse transform with the `1/n` prefactor.
///
/// The frame must describe a real signal: an imaginary part larger than
/// [`IMAG_TOLERANCE`] anywhere in the result is an error, smaller residue is
/// dropped.
pub fn idft(frame: &SpectrumFrame) -> Result<Tensor2D> {
    let (n, d) = frame.amplitude.shape();
    if n == 0 {
        return Err(Error::Length("idft of an empty spectrum".into()));
    }
    frame.amplitude.ensure_finite("idft amplitude")?;
    frame.phase.ensure_finite("idft phase")?;
    let tw = Twiddles::new(n);
    let mut out = Tensor2D::zeros(n, d);
    let mut worst_imag = 0.0f64;
    let scale = 1.0 / n as f64;
    for i in 0..n {
        for col in 0..d {
            let (mut re, mut im) = (0.0, 0.0);
            for k in 0..n {
                let a = frame.amplitude.get(k, col);
                if a == 0.0 {
                    continue;
                }
                let (ps, pc) = frame.phase.get(k, col).sin_cos();
                let (c, s) = (tw.cos(k, i), tw.sin(k, i));
                // a·e^{jp}·e^{j2πki/n}
                re += a * (pc * c - ps * s);
                im += a * (ps * c + pc * s);
            }
            out.set(i, col, re * scale);
            worst_imag = worst_imag.max((im * scale).abs());
        }
    }
    if worst_imag > IMAG_TOLERANCE {
        return Err(Error::NotHermitian(worst_imag));
    }
    Ok(out)
}

/// One-sided power spectrum `|F(k)|²` for `k in 0..=n/2`, per column.
pub fn one_sided_power(seq: &Tensor2D) -> Tensor2D {
    let tw = Twiddles::new(seq.rows());
    let (re, im) = forward_parts(seq, half_len(seq.rows()), &tw);
    re.zip_map(&im, |r, i| r * r + i * i)
        .expect("parts share a shape")
}
