//! Shared fixtures for the solver benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ris_cpd::channel::composite_map;
use ris_cpd::harness::{draw_scenario, PointSettings};
use ris_cpd::training::{synthesize, Snr};
use ris_cpd::{ChannelRealization, CompositePaths, ComplexTensor3, ExperimentConfig, Profile, TrainingConfig};

/// One desk-profile scenario with its received tensor.
pub struct Fixture {
    pub cfg: ExperimentConfig,
    pub point: PointSettings,
    pub channel: ChannelRealization,
    pub paths: CompositePaths,
    pub training: TrainingConfig,
    pub y: ComplexTensor3,
    pub noise_var: f64,
}

impl Fixture {
    pub fn desk(seed: u64, snr_db: f64) -> Self {
        let cfg = ExperimentConfig::profile(Profile::Desk);
        let point = cfg.point(0).expect("desk profile has a first point");
        let (channel, training) = draw_scenario(&cfg, &point, seed).expect("desk scenario");
        let paths = composite_map(&channel);
        let rx = synthesize(&paths, &training, &point.ofdm, Snr::Db(snr_db), &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed))
            .expect("synthesize");
        Fixture { cfg, point, channel, paths, training, y: rx.y, noise_var: rx.noise_var }
    }

    pub fn rank(&self) -> usize {
        self.paths.len()
    }
}
