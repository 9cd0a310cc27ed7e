use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavediff::cffc::{cross_attend, fourier_enhance, Cffc, CffcConfig};
use wavediff::diffusion::{training_loss, Denoiser, DenoiserConfig, NoiseSchedule, TapeEpsilonModel, TrainingItem};
use wavediff::numerics::{
    ffn_apply, grad_check, linear, Bound, FfnParams, GradCheckOptions, ParameterSet, Tape, Tensor2D, Var,
};
use wavediff::Result;

fn uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor2D {
    Tensor2D::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn inputs(shapes: &[(usize, usize)], seed: u64) -> ParameterSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ps = ParameterSet::new();
    for (k, &(r, c)) in shapes.iter().enumerate() {
        ps.add(format!("in{k}"), uniform(r, c, &mut rng));
    }
    ps
}

/// Every value drawn from [-a, a], so no layer starts at an exact zero.
fn randomize(ps: &mut ParameterSet, a: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = ps.ids().collect();
    for id in ids {
        ps.value_mut(id).data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-a..a));
    }
}

/// Weighted sum so that every output entry gets a distinct cotangent.
fn weighted_sum(tape: &mut Tape<'_>, y: Var, seed: u64) -> Result<Var> {
    let (r, c) = tape.shape(y);
    let w = tape.constant(uniform(r, c, &mut ChaCha8Rng::seed_from_u64(seed)));
    let prod = tape.mul(y, w)?;
    Ok(tape.sum(prod))
}

fn check_primitive<F>(name: &str, shapes: &[(usize, usize)], tol: f64, f: F)
where
    F: for<'a> Fn(&mut Tape<'a>, &[Var]) -> Result<Var>,
{
    let mut sets = [inputs(shapes, 7)];
    let report = grad_check(
        &mut sets,
        |tape, b| {
            let y = f(tape, b[0].vars())?;
            weighted_sum(tape, y, 99)
        },
        tol,
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.passed(), "{name}: {:?}", report.failures());
}

pub fn primitives_match_finite_differences() {
    let tol = 1e-4;
    check_primitive("matmul", &[(3, 4), (4, 2)], tol, |t, v| t.matmul(v[0], v[1]));
    check_primitive("add_row", &[(3, 4), (1, 4)], tol, |t, v| t.add_row(v[0], v[1]));
    check_primitive("add", &[(3, 4), (3, 4)], tol, |t, v| t.add(v[0], v[1]));
    check_primitive("sub", &[(3, 4), (3, 4)], tol, |t, v| t.sub(v[0], v[1]));
    check_primitive("mul", &[(3, 4), (3, 4)], tol, |t, v| t.mul(v[0], v[1]));
    check_primitive("scale", &[(3, 4)], tol, |t, v| Ok(t.scale(v[0], -1.7)));
    check_primitive("relu", &[(3, 4)], tol, |t, v| Ok(t.relu(v[0])));
    check_primitive("transpose", &[(3, 4)], tol, |t, v| Ok(t.transpose(v[0])));
    check_primitive("mean_rows", &[(3, 4)], tol, |t, v| Ok(t.mean_rows(v[0])));
    check_primitive("concat_cols", &[(3, 2), (3, 3)], tol, |t, v| t.concat_cols(&[v[0], v[1]]));
    check_primitive("im2col", &[(6, 3)], tol, |t, v| t.im2col(v[0], 3));
    check_primitive("mean", &[(3, 4)], tol, |t, v| Ok(t.mean(v[0])));
    check_primitive("mse", &[(3, 4), (3, 4)], tol, |t, v| t.mse(v[0], v[1]));
    check_primitive("rfft_amplitude", &[(8, 2)], tol, |t, v| Ok(t.rfft_amplitude(v[0])));
    check_primitive("rfft_phase", &[(8, 2)], tol, |t, v| Ok(t.rfft_phase(v[0])));
    check_primitive("irfft", &[(5, 2), (5, 2)], tol, |t, v| t.irfft(v[0], v[1], 8));
    check_primitive("irfft_odd", &[(4, 2), (4, 2)], tol, |t, v| t.irfft(v[0], v[1], 7));
}

pub fn layer_norm_and_softmax_gradients() {
    check_primitive("layer_norm", &[(4, 6), (1, 6), (1, 6)], 1e-5, |t, v| {
        t.layer_norm(v[0], v[1], v[2])
    });
    check_primitive("softmax_rows", &[(3, 5)], 1e-5, |t, v| Ok(t.softmax_rows(v[0])));
}

pub fn linear_gradient_wrt_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = uniform(5, 3, &mut rng);
    let mut sets = [inputs(&[(3, 4), (1, 4)], 2)];
    let report = grad_check(
        &mut sets,
        |tape, b| {
            let xv = tape.constant(x.clone());
            let y = linear(tape, xv, b[0].vars()[0], b[0].vars()[1])?;
            Ok(tape.sum(y))
        },
        1e-6,
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.passed(), "{report:?}");
}

pub fn ffn_gradient_end_to_end() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ps = ParameterSet::new();
    let ffn = FfnParams::new(&mut ps, "ffn", 8, 16, 3, &mut rng);
    let mut sets = [ps, inputs(&[(4, 8)], 4)];
    let report = grad_check(
        &mut sets,
        |tape, b| {
            let y = ffn_apply(tape, &b[0], &ffn, b[1].vars()[0])?;
            weighted_sum(tape, y, 5)
        },
        1e-4,
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.passed(), "{:?}", report.failures());
}

fn small_cffc(d: usize, seed: u64) -> Cffc {
    let mut c = Cffc::new(
        CffcConfig {
            state_dim: d,
            d_model: 4,
            hidden: 6,
        },
        &mut ChaCha8Rng::seed_from_u64(seed),
    );
    randomize(&mut c.params, 0.5, seed + 1);
    c
}

pub fn fourier_enhance_gradient() {
    let c = small_cffc(3, 10);
    let x = uniform(8, 3, &mut ChaCha8Rng::seed_from_u64(11));
    let enhancer = c.enhance_low;
    let mut sets = [c.params.clone()];
    let report = grad_check(
        &mut sets,
        |tape, b| {
            let xv = tape.constant(x.clone());
            let y = fourier_enhance(tape, &b[0], &enhancer, xv)?;
            Ok(tape.sum(y))
        },
        1e-4,
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.passed(), "{:?}", report.failures());
    let touched = report.params.iter().filter(|p| p.name.starts_with("enhance_low")).count();
    assert_eq!(touched, 12);
}

pub fn cross_attend_gradient() {
    let c = small_cffc(2, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (lo, hi) = (uniform(5, 2, &mut rng), uniform(5, 2, &mut rng));
    let attn = c.attention;
    let mut sets = [c.params.clone()];
    let report = grad_check(
        &mut sets,
        |tape, b| {
            let l = tape.constant(lo.clone());
            let h = tape.constant(hi.clone());
            let v = cross_attend(tape, &b[0], &attn, l, h)?;
            let both = tape.concat_cols(&[v.con_low, v.con_high])?;
            weighted_sum(tape, both, 22)
        },
        1e-4,
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.passed(), "{:?}", report.failures());
}

pub fn cffc_forward_gradient_covers_every_parameter() {
    let c = small_cffc(2, 30);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (lo, hi) = (uniform(6, 2, &mut rng), uniform(6, 2, &mut rng));
    let mut sets = [c.params.clone()];
    let report = grad_check(
        &mut sets,
        |tape, b| {
            let l = tape.constant(lo.clone());
            let h = tape.constant(hi.clone());
            let v = c.forward(tape, &b[0], l, h)?;
            let both = tape.concat_cols(&[v.pooled_low, v.pooled_high])?;
            weighted_sum(tape, both, 32)
        },
        1e-4,
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.passed(), "{:?}", report.failures());
    assert_eq!(report.params.len(), c.params.len());
}

struct Joint {
    cffc: Cffc,
    lfd: Denoiser,
}

fn joint_loss(j: &Joint, tape: &mut Tape<'_>, b: &[Bound], x0: &Tensor2D, lo: &Tensor2D, hi: &Tensor2D) -> Result<Var> {
    let sched = NoiseSchedule::linear(2, 0.1, 0.3)?;
    let l = tape.constant(lo.clone());
    let h = tape.constant(hi.clone());
    let c = j.cffc.forward(tape, &b[0], l, h)?;
    let r = tape.constant(Tensor2D::row_vector(&[0.7]));
    let y = tape.concat_cols(&[c.pooled_low, r])?;
    let batch = [
        TrainingItem { x0, cond: y },
        TrainingItem { x0, cond: y },
        TrainingItem { x0, cond: y },
    ];
    // Same draws on every evaluation, including a dropped condition.
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let out = training_loss(tape, &b[1], &j.lfd, &batch, &sched, 0.5, &mut rng)?;
    assert!(out.dropped.iter().any(|&d| d) && out.dropped.iter().any(|&d| !d));
    Ok(out.loss)
}

pub fn two_step_training_loss_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let cffc = small_cffc(2, 42);
    let mut lfd = Denoiser::new(
        DenoiserConfig {
            state_dim: 2,
            cond_dim: cffc.condition_dim(),
            channels: 4,
            blocks: 1,
            time_dim: 4,
            kernel: 3,
        },
        &mut rng,
    );
    randomize(&mut lfd.params, 0.5, 43);
    let (x0, lo, hi) = (uniform(4, 2, &mut rng), uniform(4, 2, &mut rng), uniform(4, 2, &mut rng));
    let joint = Joint { cffc, lfd };
    let mut sets = [joint.cffc.params.clone(), joint.lfd.params.clone()];
    let report = grad_check(
        &mut sets,
        |tape, b| joint_loss(&joint, tape, b, &x0, &lo, &hi),
        1e-3,
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.passed(), "{:?}", report.failures());
    let null_name = joint.lfd.params.name(joint.lfd.null_id()).to_string();
    assert!(report.params.iter().any(|p| p.set == 1 && p.name == null_name));
}

pub fn null_embedding_gets_gradient_only_when_dropped() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let d = Denoiser::new(
        DenoiserConfig {
            state_dim: 2,
            cond_dim: 3,
            channels: 4,
            blocks: 1,
            time_dim: 4,
            kernel: 3,
        },
        &mut rng,
    );
    let x0 = uniform(4, 2, &mut rng);
    let sched = NoiseSchedule::linear(2, 0.1, 0.3).unwrap();
    for (p_null, expect_null) in [(0.0, false), (1.0, true)] {
        let mut tape = Tape::new();
        let b = d.params.bind(&mut tape);
        let y = tape.variable(Tensor2D::row_vector(&[0.1, -0.2, 0.3]));
        let batch = [TrainingItem { x0: &x0, cond: y }];
        let out = training_loss(&mut tape, &b, &d, &batch, &sched, p_null, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let g = tape.backward(out.loss);
        let null_grad = g.get_or_zeros(b.var(d.null_id()), (1, 3)).max_abs();
        let y_grad = g.get_or_zeros(y, (1, 3)).max_abs();
        assert_eq!(null_grad > 0.0, expect_null);
        assert_eq!(y_grad > 0.0, !expect_null);
        let _ = d.null_condition(&b);
    }
}

#[allow(dead_code)]
pub const ALL: &[(&str, fn())] = &[
    ("primitives", primitives_match_finite_differences),
    ("layer_norm_softmax", layer_norm_and_softmax_gradients),
    ("linear", linear_gradient_wrt_weights),
    ("ffn", ffn_gradient_end_to_end),
    ("fourier_enhance", fourier_enhance_gradient),
    ("cross_attend", cross_attend_gradient),
    ("cffc_forward", cffc_forward_gradient_covers_every_parameter),
    ("training_loss", two_step_training_loss_gradient),
    ("null_embedding", null_embedding_gets_gradient_only_when_dropped),
];
