//! Energy-density and loss-spectrum diagnostics.

use super::fourier::{dft, half_len, one_sided_power};
use crate::error::{Error, Result};
use crate::numerics::Tensor2D;

/// Number of lowest and highest one-sided modes compared by default.
pub const DEFAULT_BAND_WIDTH: usize = 10;

/// Centred power spectrum normalised to percent per dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyDensity {
    /// Normalised frequency of each row of `density`, ascending in [-0.5, 0.5).
    pub frequencies: Vec<f64>,
    /// bins × dims, each column sums to 100.
    pub density: Tensor2D,
}

impl EnergyDensity {
    /// Percentage of energy in bins with |f| <= `half_width`, per dimension.
    pub fn band_share(&self, half_width: f64) -> Vec<f64> {
        let d = self.density.cols();
        let mut share = vec![0.0; d];
        for (r, f) in self.frequencies.iter().enumerate() {
            if f.abs() <= half_width + 1e-12 {
                for (s, v) in share.iter_mut().zip(self.density.row(r)) {
                    *s += v;
                }
            }
        }
        share
    }
}

/// Signed normalised frequency of the `j`-th bin after centring.
fn centred_bin(j: usize, n: usize) -> (usize, f64) {
    let shift = n.div_ceil(2);
    let k = (j + shift) % n;
    let signed = if k < shift { k as f64 } else { k as f64 - n as f64 };
    (k, signed / n as f64)
}

pub fn energy_density(seq: &Tensor2D) -> Result<EnergyDensity> {
    let (n, d) = seq.shape();
    if n < 2 {
        return Err(Error::Length(format!("energy density needs n >= 2, got {n}")));
    }
    let power = dft(seq)?.power();
    let mut totals = power.col_sums().into_vec();
    if let Some(c) = totals.iter().position(|&t| t <= 0.0) {
        return Err(Error::Degenerate(format!(
            "dimension {c} has zero energy; density is undefined"
        )));
    }
    totals.iter_mut().for_each(|t| *t = 100.0 / *t);
    let mut frequencies = Vec::with_capacity(n);
    let mut density = Tensor2D::zeros(n, d);
    for j in 0..n {
        let (k, f) = centred_bin(j, n);
        frequencies.push(f);
        for c in 0..d {
            density.set(j, c, power.get(k, c) * totals[c]);
        }
    }
    Ok(EnergyDensity {
        frequencies,
        density,
    })
}

/// Mean of the per-sequence densities after removing each sequence's
/// per-dimension mean. All sequences must share one length.
pub fn average_energy_density(seqs: &[Tensor2D]) -> Result<EnergyDensity> {
    let first = seqs
        .first()
        .ok_or_else(|| Error::Length("no sequences to analyse".into()))?;
    let mut acc: Option<EnergyDensity> = None;
    for s in seqs {
        if s.shape() != first.shape() {
            return Err(Error::Shape(format!(
                "sequences must share one shape, got {:?} and {:?}",
                first.shape(),
                s.shape()
            )));
        }
        let mean = s.mean_rows();
        let centred = Tensor2D::from_fn(s.rows(), s.cols(), |r, c| s.get(r, c) - mean.get(0, c));
        for c in 0..s.cols() {
            let spread = centred.column(c).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if spread <= 1e-12 * (1.0 + mean.get(0, c).abs()) {
                return Err(Error::Degenerate(format!("dimension {c} is constant")));
            }
        }
        let ed = energy_density(&centred)?;
        match acc.as_mut() {
            Some(a) => a.density.add_assign(&ed.density),
            None => acc = Some(ed),
        }
    }
    let mut out = acc.expect("at least one sequence");
    out.density = out.density.scale(1.0 / seqs.len() as f64);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossSpectrumReport {
    /// `|F(k)|²` for k in 0..=n/2, per dimension.
    pub one_sided_power: Tensor2D,
    pub low_band_power: f64,
    pub high_band_power: f64,
    /// `low / high`; `None` when the high band carries no power.
    pub ratio: Option<f64>,
}

/// Compares the first and last `band_width` one-sided modes of a residual
/// sequence, summed over dimensions.
pub fn loss_spectrum(residuals: &Tensor2D, band_width: usize) -> Result<LossSpectrumReport> {
    let n = residuals.rows();
    let bins = half_len(n);
    if band_width == 0 || bins < 2 * band_width {
        return Err(Error::Length(format!(
            "{bins} one-sided bins cannot hold two bands of {band_width}"
        )));
    }
    residuals.ensure_finite("residuals")?;
    let power = one_sided_power(residuals);
    let band = |range: std::ops::Range<usize>| -> f64 {
        range.map(|k| power.row(k).iter().sum::<f64>()).sum()
    };
    let low = band(0..band_width);
    let high = band(bins - band_width..bins);
    Ok(LossSpectrumReport {
        one_sided_power: power,
        low_band_power: low,
        high_band_power: high,
        ratio: (high > 0.0).then(|| low / high),
    })
}

/// Low/high band power summed over many residual sequences, and their ratio.
pub fn pooled_band_ratio(residuals: &[Tensor2D], band_width: usize) -> Result<(f64, f64, f64)> {
    let mut low = 0.0;
    let mut high = 0.0;
    for r in residuals {
        let rep = loss_spectrum(r, band_width)?;
        low += rep.low_band_power;
        high += rep.high_band_power;
    }
    if high <= 0.0 {
        return Err(Error::Degenerate("high band carries no power".into()));
    }
    Ok((low, high, low / high))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_tone_splits_between_plus_minus() {
        let x = Tensor2D::from_fn(8, 1, |i, _| (2.0 * PI * i as f64 / 8.0).cos());
        let e = energy_density(&x).unwrap();
        assert_eq!(e.frequencies[0], -0.5);
        assert_eq!(e.frequencies[4], 0.0);
        for (f, d) in e.frequencies.iter().zip(e.density.column(0)) {
            if (f.abs() - 0.125).abs() < 1e-12 {
                assert!((d - 50.0).abs() < 1e-9);
            } else {
                assert!(d.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_is_all_dc() {
        let e = energy_density(&Tensor2D::filled(7, 2, 3.0)).unwrap();
        let centre = e.frequencies.iter().position(|&f| f == 0.0).unwrap();
        assert_eq!(centre, 3);
        assert!((e.density.get(centre, 1) - 100.0).abs() < 1e-9);
        assert!(e.frequencies.windows(2).all(|w| w[0] < w[1]));
        assert!(e.frequencies.iter().all(|f| (-0.5..0.5).contains(f)));
    }

    #[test]
    fn zero_sequence_is_rejected() {
        assert!(matches!(
            energy_density(&Tensor2D::zeros(8, 1)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn band_ratios_of_pure_modes() {
        let n = 96;
        let slow = Tensor2D::from_fn(n, 1, |i, _| (2.0 * PI * i as f64 / n as f64).sin());
        assert!(loss_spectrum(&slow, 10).unwrap().ratio.unwrap() >= 100.0);
        let nyquist = Tensor2D::from_fn(n, 1, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        assert!(loss_spectrum(&nyquist, 10).unwrap().ratio.unwrap() <= 0.01);
    }

    #[test]
    fn too_short_for_band() {
        assert!(matches!(
            loss_spectrum(&Tensor2D::zeros(16, 1), 10),
            Err(Error::Length(_))
        ));
        let r = loss_spectrum(&Tensor2D::zeros(40, 1), 10).unwrap();
        assert_eq!(r.ratio, None);
    }
}
