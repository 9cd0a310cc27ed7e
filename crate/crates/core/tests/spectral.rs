use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use wavediff::numerics::Tensor2D;
use wavediff::spectral::{
    dft, dwt, energy_density, idft, idwt, loss_spectrum, pooled_band_ratio, SubTrajectoryPair,
    WaveletFilterPair,
};

fn uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor2D {
    Tensor2D::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor2D {
    Tensor2D::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn filters() -> [WaveletFilterPair; 2] {
    [WaveletFilterPair::haar(), WaveletFilterPair::daubechies2()]
}

/// Dense analysis matrix: rows 0..T/2 produce the low stream, the rest the
/// high stream, with periodic wrap.
fn analysis_matrix(t: usize, f: &WaveletFilterPair) -> Tensor2D {
    let mut w = Tensor2D::zeros(t, t);
    for k in 0..t / 2 {
        for m in 0..f.taps() {
            let col = (2 * k + m) % t;
            w.set(k, col, w.get(k, col) + f.low_pass[m]);
            w.set(t / 2 + k, col, w.get(t / 2 + k, col) + f.high_pass[m]);
        }
    }
    w
}

#[test]
fn haar_pair_example() {
    let x = Tensor2D::column_vector(&[1.0, 3.0, 2.0, 0.0]);
    let p = dwt(&x, &WaveletFilterPair::haar()).unwrap();
    let r2 = 2f64.sqrt();
    for (got, want) in p.low.data().iter().zip([2.0 * r2, r2]) {
        assert!((got - want).abs() <= 1e-15);
    }
    for (got, want) in p.high.data().iter().zip([-r2, r2]) {
        assert!((got - want).abs() <= 1e-15);
    }
    assert!(idwt(&p, &WaveletFilterPair::haar()).unwrap().max_abs_diff(&x) <= 1e-15);
}

#[test]
fn daubechies_matches_convolution_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = WaveletFilterPair::daubechies2();
    let x = uniform(96, 3, &mut rng);
    let w = analysis_matrix(96, &f);
    let coeffs = w.matmul(&x).unwrap();
    let p = dwt(&x, &f).unwrap();
    assert!(p.low.max_abs_diff(&coeffs.slice_rows(0, 48)) <= 1e-12);
    assert!(p.high.max_abs_diff(&coeffs.slice_rows(48, 96)) <= 1e-12);
    // Orthogonal analysis: synthesis is the transpose.
    let back = w.transpose().matmul(&coeffs).unwrap();
    assert!(idwt(&p, &f).unwrap().max_abs_diff(&back) <= 1e-12);
    assert!(back.max_abs_diff(&x) <= 1e-10);
}

#[test]
fn odd_length_and_mismatched_streams_are_rejected() {
    let f = WaveletFilterPair::haar();
    assert!(dwt(&Tensor2D::zeros(5, 2), &f).is_err());
    assert!(SubTrajectoryPair::new(Tensor2D::zeros(3, 2), Tensor2D::zeros(3, 1)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perfect_reconstruction(seed in any::<u64>(), half in 2usize..40, d in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = uniform(2 * half, d, &mut rng);
        for f in filters() {
            let back = idwt(&dwt(&x, &f).unwrap(), &f).unwrap();
            prop_assert!(back.max_abs_diff(&x) <= 1e-10);
        }
    }

    #[test]
    fn energy_splits_between_bands(seed in any::<u64>(), half in 2usize..40, d in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = uniform(2 * half, d, &mut rng);
        for f in filters() {
            let p = dwt(&x, &f).unwrap();
            let total = x.sum_squares();
            let split = p.low.sum_squares() + p.high.sum_squares();
            prop_assert!((total - split).abs() <= 1e-9 * total);
        }
    }

    #[test]
    fn dwt_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = uniform(32, 3, &mut rng);
        let y = uniform(32, 3, &mut rng);
        let mix = x.zip_map(&y, |u, v| a * u + b * v).unwrap();
        for f in filters() {
            let (px, py, pm) = (dwt(&x, &f).unwrap(), dwt(&y, &f).unwrap(), dwt(&mix, &f).unwrap());
            let low = px.low.zip_map(&py.low, |u, v| a * u + b * v).unwrap();
            let high = px.high.zip_map(&py.high, |u, v| a * u + b * v).unwrap();
            prop_assert!(pm.low.max_abs_diff(&low) <= 1e-10);
            prop_assert!(pm.high.max_abs_diff(&high) <= 1e-10);
        }
    }

    #[test]
    fn energy_density_ignores_scale(seed in any::<u64>(), s in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = uniform(24, 2, &mut rng);
        let a = energy_density(&x).unwrap();
        let b = energy_density(&x.scale(s)).unwrap();
        prop_assert!(a.density.max_abs_diff(&b.density) <= 1e-9);
        for c in 0..2 {
            prop_assert!((a.density.column(c).iter().sum::<f64>() - 100.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn dft_matches_fft_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 48;
    let x = uniform(n, 2, &mut rng);
    let frame = dft(&x).unwrap();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    for c in 0..2 {
        let mut buf: Vec<Complex<f64>> = x.column(c).into_iter().map(|v| Complex::new(v, 0.0)).collect();
        fft.process(&mut buf);
        for (k, z) in buf.iter().enumerate() {
            assert!((frame.amplitude.get(k, c) - z.norm()).abs() <= 1e-10);
            if z.norm() > 1e-9 {
                let dp = (frame.phase.get(k, c) - z.arg()).rem_euclid(2.0 * std::f64::consts::PI);
                assert!(dp.min(2.0 * std::f64::consts::PI - dp) <= 1e-9);
            }
        }
    }
}

#[test]
fn dft_round_trip_and_parseval() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = uniform(48, 3, &mut rng);
    assert!(idft(&dft(&x).unwrap()).unwrap().max_abs_diff(&x) <= 1e-10);

    let y = uniform(96, 2, &mut rng);
    let frame = dft(&y).unwrap();
    for c in 0..2 {
        let direct: f64 = y.column(c).iter().map(|v| v * v).sum();
        let spectral: f64 = frame.amplitude.column(c).iter().map(|a| a * a).sum::<f64>() / 96.0;
        assert!((direct - spectral).abs() <= 1e-8 * direct);
    }
}

#[test]
fn white_noise_density_is_flat() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, draws) = (32, 1000);
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    for _ in 0..draws {
        let e = energy_density(&gaussian(n, 1, &mut rng)).unwrap();
        for (j, v) in e.density.column(0).into_iter().enumerate() {
            sum[j] += v;
            sum_sq[j] += v * v;
        }
    }
    let uniform_share = 100.0 / n as f64;
    for j in 0..n {
        let mean = sum[j] / draws as f64;
        let var = (sum_sq[j] / draws as f64 - mean * mean) * draws as f64 / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!((mean - uniform_share).abs() <= 3.0 * se, "bin {j}: {mean} vs {uniform_share} (se {se})");
    }
}

#[test]
fn loss_spectrum_band_examples() {
    let n = 96;
    let tone = Tensor2D::from_fn(n, 1, |i, _| (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin());
    assert!(loss_spectrum(&tone, 10).unwrap().ratio.unwrap() >= 100.0);
    let nyquist = Tensor2D::from_fn(n, 1, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
    assert!(loss_spectrum(&nyquist, 10).unwrap().ratio.unwrap() <= 0.01);
    assert!(loss_spectrum(&Tensor2D::zeros(16, 1), 10).is_err());
}

#[test]
fn white_noise_pooled_ratio_is_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let draws: Vec<Tensor2D> = (0..1000).map(|_| gaussian(96, 1, &mut rng)).collect();
    let (_, _, ratio) = pooled_band_ratio(&draws, 10).unwrap();
    assert!((ratio - 1.0).abs() <= 0.1, "ratio {ratio}");
}
