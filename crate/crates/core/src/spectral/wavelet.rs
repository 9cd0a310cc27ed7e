//! Single-level orthonormal discrete wavelet transform over the time axis.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor2D;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletKind {
    #[default]
    Haar,
    Daubechies2,
}

impl fmt::Display for WaveletKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WaveletKind::Haar => "haar",
            WaveletKind::Daubechies2 => "db2",
        })
    }
}

impl FromStr for WaveletKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "haar" => Ok(WaveletKind::Haar),
            "db2" | "daubechies2" | "daubechies" => Ok(WaveletKind::Daubechies2),
            "morlet" => Err(Error::Config(
                "morlet is a continuous wavelet without a perfect-reconstruction filter bank".into(),
            )),
            other => Err(Error::Config(format!("unknown wavelet `{other}`"))),
        }
    }
}

/// Analysis filters of an orthonormal two-channel filter bank.
///
/// `high_pass[m] = (-1)^m · low_pass[len-1-m]`, so synthesis uses the same
/// taps (the analysis matrix is orthogonal).
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletFilterPair {
    pub kind: WaveletKind,
    pub low_pass: Vec<f64>,
    pub high_pass: Vec<f64>,
}

impl WaveletFilterPair {
    pub fn new(kind: WaveletKind) -> Self {
        let low_pass = match kind {
            WaveletKind::Haar => vec![1.0 / SQRT_2, 1.0 / SQRT_2],
            WaveletKind::Daubechies2 => {
                let s3 = 3f64.sqrt();
                let d = 4.0 * SQRT_2;
                vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d]
            }
        };
        let len = low_pass.len();
        let high_pass = (0..len)
            .map(|m| {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                sign * low_pass[len - 1 - m]
            })
            .collect();
        Self {
            kind,
            low_pass,
            high_pass,
        }
    }

    pub fn haar() -> Self {
        Self::new(WaveletKind::Haar)
    }

    pub fn daubechies2() -> Self {
        Self::new(WaveletKind::Daubechies2)
    }

    pub fn taps(&self) -> usize {
        self.low_pass.len()
    }

    /// Shortest sequence the transform accepts.
    pub fn min_len(&self) -> usize {
        self.taps().max(2)
    }
}

/// Half-length low- and high-frequency streams of one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct SubTrajectoryPair {
    pub low: Tensor2D,
    pub high: Tensor2D,
    pub source_len: usize,
}

impl SubTrajectoryPair {
    pub fn new(low: Tensor2D, high: Tensor2D) -> Result<Self> {
        if low.shape() != high.shape() {
            return Err(Error::Shape(format!(
                "low {:?} vs high {:?}",
                low.shape(),
                high.shape()
            )));
        }
        let source_len = 2 * low.rows();
        Ok(Self {
            low,
            high,
            source_len,
        })
    }
}

/// Splits every column of `seq` (time × dims) into low/high streams with
/// periodic extension at the end of the sequence.
pub fn dwt(seq: &Tensor2D, filter: &WaveletFilterPair) -> Result<SubTrajectoryPair> {
    let (t, d) = seq.shape();
    if t % 2 != 0 {
        return Err(Error::Length(format!("wavelet transform needs even length, got {t}")));
    }
    if t < filter.min_len() {
        return Err(Error::Length(format!(
            "{} transform needs at least {} samples, got {t}",
            filter.kind,
            filter.min_len()
        )));
    }
    seq.ensure_finite("wavelet input")?;
    let half = t / 2;
    let mut low = Tensor2D::zeros(half, d);
    let mut high = Tensor2D::zeros(half, d);
    for k in 0..half {
        for (m, (&lp, &hp)) in filter.low_pass.iter().zip(&filter.high_pass).enumerate() {
            let src = seq.row((2 * k + m) % t);
            for c in 0..d {
                low.data_mut()[k * d + c] += lp * src[c];
                high.data_mut()[k * d + c] += hp * src[c];
            }
        }
    }
    Ok(SubTrajectoryPair {
        low,
        high,
        source_len: t,
    })
}

/// Exact inverse of [`dwt`] under the same filter.
pub fn idwt(pair: &SubTrajectoryPair, filter: &WaveletFilterPair) -> Result<Tensor2D> {
    if pair.low.shape() != pair.high.shape() {
        return Err(Error::Shape(format!(
            "low {:?} vs high {:?}",
            pair.low.shape(),
            pair.high.shape()
        )));
    }
    let (half, d) = pair.low.shape();
    let t = 2 * half;
    if t < filter.min_len() {
        return Err(Error::Length(format!(
            "{} synthesis needs at least {} samples, got {t}",
            filter.kind,
            filter.min_len()
        )));
    }
    let mut out = Tensor2D::zeros(t, d);
    for k in 0..half {
        let (lo, hi) = (pair.low.row(k), pair.high.row(k));
        for (m, (&lp, &hp)) in filter.low_pass.iter().zip(&filter.high_pass).enumerate() {
            let dst = (2 * k + m) % t;
            let row = out.row_mut(dst);
            for c in 0..d {
                row[c] += lp * lo[c] + hp * hi[c];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Tensor2D {
        Tensor2D::column_vector(v)
    }

    #[test]
    fn haar_example() {
        let pair = dwt(&col(&[1.0, 3.0, 2.0, 0.0]), &WaveletFilterPair::haar()).unwrap();
        let r2 = SQRT_2;
        assert!(pair.low.max_abs_diff(&col(&[2.0 * r2, r2])) < 1e-15);
        assert!(pair.high.max_abs_diff(&col(&[-r2, r2])) < 1e-15);
        let back = idwt(&pair, &WaveletFilterPair::haar()).unwrap();
        assert!(back.max_abs_diff(&col(&[1.0, 3.0, 2.0, 0.0])) < 1e-15);
    }

    #[test]
    fn haar_of_constant() {
        let c = -0.7;
        let pair = dwt(&Tensor2D::filled(4, 1, c), &WaveletFilterPair::haar()).unwrap();
        assert!(pair.low.max_abs_diff(&Tensor2D::filled(2, 1, c * SQRT_2)) < 1e-15);
        assert_eq!(pair.high, Tensor2D::zeros(2, 1));
    }

    #[test]
    fn zero_streams_synthesise_zero() {
        for f in [WaveletFilterPair::haar(), WaveletFilterPair::daubechies2()] {
            let pair = SubTrajectoryPair::new(Tensor2D::zeros(3, 2), Tensor2D::zeros(3, 2)).unwrap();
            assert_eq!(idwt(&pair, &f).unwrap(), Tensor2D::zeros(6, 2));
        }
    }

    #[test]
    fn rejects_bad_input() {
        let h = WaveletFilterPair::haar();
        assert!(matches!(dwt(&Tensor2D::zeros(5, 1), &h), Err(Error::Length(_))));
        let mut x = Tensor2D::zeros(4, 1);
        x.set(2, 0, f64::NAN);
        assert!(matches!(dwt(&x, &h), Err(Error::NonFinite(_))));
        assert!(matches!(
            dwt(&Tensor2D::zeros(2, 1), &WaveletFilterPair::daubechies2()),
            Err(Error::Length(_))
        ));
        let bad = SubTrajectoryPair {
            low: Tensor2D::zeros(2, 1),
            high: Tensor2D::zeros(3, 1),
            source_len: 4,
        };
        assert!(matches!(idwt(&bad, &h), Err(Error::Shape(_))));
    }

    #[test]
    fn db2_filters_are_orthonormal() {
        let f = WaveletFilterPair::daubechies2();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        assert!((dot(&f.low_pass, &f.low_pass) - 1.0).abs() < 1e-15);
        assert!((dot(&f.high_pass, &f.high_pass) - 1.0).abs() < 1e-15);
        assert!(dot(&f.low_pass, &f.high_pass).abs() < 1e-15);
        // shifted-by-two orthogonality
        assert!(dot(&f.low_pass[2..], &f.low_pass[..2]).abs() < 1e-15);
    }

    #[test]
    fn parses_names() {
        assert_eq!("Haar".parse::<WaveletKind>().unwrap(), WaveletKind::Haar);
        assert_eq!("db2".parse::<WaveletKind>().unwrap(), WaveletKind::Daubechies2);
        assert!("morlet".parse::<WaveletKind>().is_err());
    }
}
