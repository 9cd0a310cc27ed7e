use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bundle::{Generator, TrainedBundle};
use super::config::{AblationMode, ConditionSource, TrainConfig};
use super::window::{fit_state_normalizer, history_before, window_dataset};
use crate::diffusion::{training_loss, NoiseSchedule, TapeEpsilonModel, TrainingItem};
use crate::error::{Error, Result};
use crate::numerics::{Adam, Tape, Tensor2D};
use crate::spectral::{dwt, idwt, pooled_band_ratio, SubTrajectoryPair};
use crate::worldkit::{
    train_inverse_dynamics, Dataset, InverseDynamicsConfig, InverseDynamicsReport, ReturnNormalizer,
    Standardizer,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub low_power: f64,
    pub high_power: f64,
    pub ratio: f64,
}

/// Per-epoch low/high band ratio of the time-domain training residuals.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyShiftLog {
    pub mode: AblationMode,
    pub band_width: usize,
    pub epochs: Vec<EpochRecord>,
    /// Residuals of the final epoch, one `H × d_s` block per item.
    pub last_residuals: Vec<Tensor2D>,
}

impl FrequencyShiftLog {
    pub fn final_ratio(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.ratio)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub bundle: TrainedBundle,
    pub log: FrequencyShiftLog,
    pub inverse_report: Option<InverseDynamicsReport>,
}

/// Gradient-bearing pieces of one optimisation step.
struct BatchResult {
    loss: f64,
    residuals: Vec<Tensor2D>,
}

/// One wavelet-domain example: the pair being diffused, the pair the
/// conditioner reads, and the normalised return.
struct BandItem {
    target: SubTrajectoryPair,
    cond: SubTrajectoryPair,
    ret: f64,
}

struct Trainer<'c> {
    cfg: &'c TrainConfig,
    schedule: NoiseSchedule,
    adam: Adam,
}

impl Trainer<'_> {
    fn wavelet_batch(
        &self,
        generator: &mut Generator,
        items: &[&BandItem],
        rng: &mut ChaCha8Rng,
    ) -> Result<BatchResult> {
        let Generator::Wavelet { cffc, lfd, hfd } = generator else {
            unreachable!("wavelet batch on a time-domain generator")
        };
        let mode = self.cfg.mode;
        let needs_cffc = mode.uses_low_condition() || mode.uses_high_condition();
        let (loss, low_res, high_res, grads, bounds) = {
            let mut tape = Tape::new();
            let bc = cffc.params.bind(&mut tape);
            let bl = lfd.params.bind(&mut tape);
            let bh = hfd.params.bind(&mut tape);
            let mut low_items = Vec::with_capacity(items.len());
            let mut high_items = Vec::with_capacity(items.len());
            for item in items {
                let (mut y_low, mut y_high) = (lfd.null_condition(&bl), hfd.null_condition(&bh));
                if needs_cffc {
                    let lo = tape.constant(item.cond.low.clone());
                    let hi = tape.constant(item.cond.high.clone());
                    let c = cffc.forward(&mut tape, &bc, lo, hi)?;
                    let r = tape.constant(Tensor2D::row_vector(&[item.ret]));
                    if mode.uses_low_condition() {
                        y_low = tape.concat_cols(&[c.pooled_low, r])?;
                    }
                    if mode.uses_high_condition() {
                        y_high = tape.concat_cols(&[c.pooled_high, r])?;
                    }
                }
                low_items.push(TrainingItem {
                    x0: &item.target.low,
                    cond: y_low,
                });
                high_items.push(TrainingItem {
                    x0: &item.target.high,
                    cond: y_high,
                });
            }
            let lo = training_loss(&mut tape, &bl, lfd, &low_items, &self.schedule, self.cfg.p_null, rng)?;
            let hi = training_loss(&mut tape, &bh, hfd, &high_items, &self.schedule, self.cfg.p_null, rng)?;
            let total = tape.add(lo.loss, hi.loss)?;
            let grads = tape.backward(total);
            (tape.scalar(total), lo.residuals, hi.residuals, grads, [bc, bl, bh])
        };
        let [bc, bl, bh] = bounds;
        cffc.params.accumulate(&bc, &grads);
        lfd.params.accumulate(&bl, &grads);
        hfd.params.accumulate(&bh, &grads);
        self.adam.step(&mut cffc.params)?;
        self.adam.step(&mut lfd.params)?;
        self.adam.step(&mut hfd.params)?;

        let filter = self.cfg.filter();
        let residuals = low_res
            .into_iter()
            .zip(high_res)
            .map(|(l, h)| idwt(&SubTrajectoryPair::new(l, h)?, &filter))
            .collect::<Result<Vec<_>>>()?;
        Ok(BatchResult { loss, residuals })
    }

    fn time_domain_batch(
        &self,
        generator: &mut Generator,
        windows: &[(&Tensor2D, f64)],
        rng: &mut ChaCha8Rng,
    ) -> Result<BatchResult> {
        let Generator::TimeDomain { denoiser } = generator else {
            unreachable!("time-domain batch on a wavelet generator")
        };
        let (loss, residuals, grads, bound) = {
            let mut tape = Tape::new();
            let b = denoiser.params.bind(&mut tape);
            let items: Vec<_> = windows
                .iter()
                .map(|(x0, ret)| TrainingItem {
                    x0,
                    cond: tape.constant(Tensor2D::row_vector(&[*ret])),
                })
                .collect();
            let out = training_loss(&mut tape, &b, denoiser, &items, &self.schedule, self.cfg.p_null, rng)?;
            let grads = tape.backward(out.loss);
            (tape.scalar(out.loss), out.residuals, grads, b)
        };
        denoiser.params.accumulate(&bound, &grads);
        self.adam.step(&mut denoiser.params)?;
        Ok(BatchResult { loss, residuals })
    }
}

/// Trained generator plus the statistics it was fitted with.
pub struct GeneratorOutcome {
    pub generator: Generator,
    pub states: Standardizer,
    pub returns: ReturnNormalizer,
    pub schedule: NoiseSchedule,
    pub log: FrequencyShiftLog,
}

fn check_dataset(dataset: &Dataset, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if dataset.episodes.is_empty() {
        return Err(Error::Length("training dataset is empty".into()));
    }
    Ok(())
}

/// Trains only the trajectory generator (no inverse dynamics).
pub fn train_generator(dataset: &Dataset, cfg: &TrainConfig) -> Result<GeneratorOutcome> {
    check_dataset(dataset, cfg)?;
    let set = window_dataset(dataset, cfg.horizon)?;
    let states = fit_state_normalizer(dataset)?;
    let schedule = cfg.schedule()?;
    let filter = cfg.filter();

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut generator = Generator::new(cfg, dataset.env.state_dim(), &mut init_rng);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let normed: Vec<(Tensor2D, f64)> = set
        .windows
        .iter()
        .map(|w| (states.apply(&w.states), w.ret))
        .collect();
    let mut items: Vec<BandItem> = Vec::new();
    if !cfg.mode.is_baseline() {
        items = normed
            .iter()
            .zip(&set.windows)
            .map(|((x, _), w)| {
                let target = dwt(x, &filter)?;
                let cond = match cfg.condition_source {
                    ConditionSource::Clean => target.clone(),
                    ConditionSource::History => {
                        let episode = &dataset.episodes[w.episode].states;
                        let hist = history_before(episode, w.start, cfg.history)?;
                        dwt(&states.apply(&hist), &filter)?
                    }
                };
                Ok(BandItem {
                    target,
                    cond,
                    ret: w.ret,
                })
            })
            .collect::<Result<_>>()?;
    }

    let trainer = Trainer {
        cfg,
        schedule: schedule.clone(),
        adam: Adam::new(cfg.learning_rate),
    };
    let mut log = FrequencyShiftLog {
        mode: cfg.mode,
        band_width: cfg.band_width,
        epochs: Vec::with_capacity(cfg.epochs),
        last_residuals: Vec::new(),
    };
    for epoch in 1..=cfg.epochs {
        let mut residuals = Vec::with_capacity(cfg.batch_size * cfg.batches_per_epoch);
        let mut loss = 0.0;
        for _ in 0..cfg.batches_per_epoch {
            let idx: Vec<usize> = (0..cfg.batch_size)
                .map(|_| rng.gen_range(0..normed.len()))
                .collect();
            let out = if cfg.mode.is_baseline() {
                let batch: Vec<_> = idx.iter().map(|&i| (&normed[i].0, normed[i].1)).collect();
                trainer.time_domain_batch(&mut generator, &batch, &mut rng)?
            } else {
                let batch: Vec<_> = idx.iter().map(|&i| &items[i]).collect();
                trainer.wavelet_batch(&mut generator, &batch, &mut rng)?
            };
            loss += out.loss;
            residuals.extend(out.residuals);
        }
        let (low_power, high_power, ratio) = pooled_band_ratio(&residuals, cfg.band_width)?;
        log.epochs.push(EpochRecord {
            epoch,
            loss: loss / cfg.batches_per_epoch as f64,
            low_power,
            high_power,
            ratio,
        });
        log.last_residuals = residuals;
    }
    Ok(GeneratorOutcome {
        generator,
        states,
        returns: set.returns,
        schedule,
        log,
    })
}

/// Trains the generator and the inverse-dynamics model into a bundle.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    check_dataset(dataset, cfg)?;
    let g = train_generator(dataset, cfg)?;
    let inv_cfg = InverseDynamicsConfig {
        hidden: cfg.inverse_hidden,
        epochs: cfg.inverse_epochs,
        batch_size: cfg.inverse_batch_size,
        learning_rate: cfg.inverse_learning_rate,
        seed: cfg.seed.wrapping_add(0x1d),
    };
    let (inverse, report) = train_inverse_dynamics(dataset, &inv_cfg)?;
    let bundle = TrainedBundle {
        config: cfg.clone(),
        env: dataset.env,
        states: g.states,
        returns: g.returns,
        schedule: g.schedule,
        generator: g.generator,
        inverse,
        trained: true,
    };
    Ok(TrainOutcome {
        bundle,
        log: g.log,
        inverse_report: Some(report),
    })
}
