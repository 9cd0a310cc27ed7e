use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::cffc::{Cffc, CffcConfig};
use crate::diffusion::{Denoiser, DenoiserConfig, NoiseSchedule};
use crate::error::{Error, Result};
use crate::numerics::{checkpoint, ParameterSet};
use crate::worldkit::{Environment, InverseDynamics, ReturnNormalizer, Standardizer};

/// The trajectory generator: either the two-band model or a single
/// time-domain denoiser.
#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    Wavelet {
        cffc: Cffc,
        lfd: Denoiser,
        hfd: Denoiser,
    },
    TimeDomain {
        denoiser: Denoiser,
    },
}

impl Generator {
    pub fn new(cfg: &TrainConfig, state_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let denoiser_cfg = |cond_dim| DenoiserConfig {
            state_dim,
            cond_dim,
            channels: cfg.channels,
            blocks: cfg.blocks,
            time_dim: cfg.time_dim,
            kernel: 3,
        };
        if cfg.mode.is_baseline() {
            return Generator::TimeDomain {
                denoiser: Denoiser::new(denoiser_cfg(1), rng),
            };
        }
        let cffc = Cffc::new(
            CffcConfig {
                state_dim,
                d_model: cfg.d_model,
                hidden: cfg.cffc_hidden,
            },
            rng,
        );
        let cond = cffc.condition_dim();
        let lfd = Denoiser::new(denoiser_cfg(cond), rng);
        let hfd = Denoiser::new(denoiser_cfg(cond), rng);
        Generator::Wavelet { cffc, lfd, hfd }
    }

    /// Named parameter sets, in a fixed order.
    pub fn parameter_sets(&self) -> Vec<(&'static str, &ParameterSet)> {
        match self {
            Generator::Wavelet { cffc, lfd, hfd } => {
                vec![("cffc", &cffc.params), ("lfd", &lfd.params), ("hfd", &hfd.params)]
            }
            Generator::TimeDomain { denoiser } => vec![("baseline", &denoiser.params)],
        }
    }

    fn parameter_sets_mut(&mut self) -> Vec<(&'static str, &mut ParameterSet)> {
        match self {
            Generator::Wavelet { cffc, lfd, hfd } => vec![
                ("cffc", &mut cffc.params),
                ("lfd", &mut lfd.params),
                ("hfd", &mut hfd.params),
            ],
            Generator::TimeDomain { denoiser } => vec![("baseline", &mut denoiser.params)],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedBundle {
    pub config: TrainConfig,
    pub env: Environment,
    pub states: Standardizer,
    pub returns: ReturnNormalizer,
    pub schedule: NoiseSchedule,
    pub generator: Generator,
    pub inverse: InverseDynamics,
    pub trained: bool,
}

#[derive(Serialize, Deserialize)]
struct BundleMeta {
    config: TrainConfig,
    env: Environment,
    states: Standardizer,
    returns: ReturnNormalizer,
    inverse_inputs: Standardizer,
    trained: bool,
}

const META_FILE: &str = "bundle.json";

impl TrainedBundle {
    /// Freshly initialised models with identity state scaling.
    pub fn untrained(cfg: &TrainConfig, env: &Environment) -> Result<Self> {
        cfg.validate()?;
        let d = env.state_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let generator = Generator::new(cfg, d, &mut rng);
        let inverse = InverseDynamics::new(env, cfg.inverse_hidden, &mut rng);
        Ok(Self {
            config: cfg.clone(),
            env: *env,
            states: Standardizer {
                mean: vec![0.0; d],
                std: vec![1.0; d],
            },
            returns: ReturnNormalizer {
                min_return: 0.0,
                max_return: 0.0,
            },
            schedule: cfg.schedule()?,
            generator,
            inverse,
            trained: false,
        })
    }

    /// Checksums of every parameter set, keyed by file stem.
    pub fn checksums(&self) -> Vec<(String, String)> {
        self.generator
            .parameter_sets()
            .into_iter()
            .chain(std::iter::once(("inverse", &self.inverse.params)))
            .map(|(n, ps)| (n.to_string(), checkpoint::checksum(ps)))
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (stem, ps) in self.generator.parameter_sets() {
            checkpoint::save(ps, dir, stem)?;
        }
        checkpoint::save(&self.inverse.params, dir, "inverse")?;
        let meta = BundleMeta {
            config: self.config.clone(),
            env: self.env,
            states: self.states.clone(),
            returns: self.returns,
            inverse_inputs: self.inverse.inputs.clone(),
            trained: self.trained,
        };
        let text = serde_json::to_string_pretty(&meta).expect("bundle metadata serializes");
        fs::write(dir.join(META_FILE), text + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(META_FILE))?;
        let meta: BundleMeta = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{META_FILE}: {e}")))?;
        let mut bundle = Self::untrained(&meta.config, &meta.env)?;
        for (stem, ps) in bundle.generator.parameter_sets_mut() {
            checkpoint::restore_into(ps, &checkpoint::load(dir, stem)?)?;
        }
        checkpoint::restore_into(&mut bundle.inverse.params, &checkpoint::load(dir, "inverse")?)?;
        bundle.inverse.inputs = meta.inverse_inputs;
        bundle.states = meta.states;
        bundle.returns = meta.returns;
        bundle.trained = meta.trained;
        Ok(bundle)
    }
}
