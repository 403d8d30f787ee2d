#![allow(dead_code)]

use revise_core::data::{synth_dataset, SliceRecord, Split, SynthConfig};
use revise_core::network::NetworkConfig;
use revise_core::training::{OptimizerSchedule, TrainingConfig};

/// 64×64 slices so that tests run in well under a second per step.
pub fn small_synth() -> SynthConfig {
    SynthConfig {
        size: 64,
        radius_range: (6.0, 12.0),
        area_range: (60, 600),
        max_distractors: 1,
        ..SynthConfig::default()
    }
}

pub fn small_records(n: usize, seed: u64) -> Vec<(Split, SliceRecord)> {
    synth_dataset(n, seed, &small_synth())
}

pub fn small_network() -> NetworkConfig {
    NetworkConfig {
        base_features: 2,
        max_features: 8,
        depth: 6,
        input_size: 64,
        ..NetworkConfig::default()
    }
}

pub fn small_training(iterations: u64) -> TrainingConfig {
    TrainingConfig {
        network: small_network(),
        schedule: OptimizerSchedule::scaled(iterations, 1e-3),
        checkpoint_every: 4,
        ..TrainingConfig::default()
    }
}
