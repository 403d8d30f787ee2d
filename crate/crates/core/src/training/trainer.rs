//! The training loop: online samples, balanced loss, Adam, checkpoints.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, CheckpointHeader};
use super::degrade::degrade_mask;
use super::rollout::{build_online_sample, RolloutConfig, TrainingSample};
use super::schedule::OptimizerSchedule;
use crate::data::{DatasetManifest, SliceRecord, Split};
use crate::error::{Error, Result};
use crate::network::{training_loss, NetworkConfig, RevisionNet};
use crate::optim::Adam;
use crate::scalar::Scalar;

pub const DEFAULT_CHECKPOINT_EVERY: u64 = 5000;

/// Everything a training run is configured by, readable from TOML with
/// `[network]`, `[schedule]` and `[rollout]` tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub network: NetworkConfig,
    pub schedule: OptimizerSchedule,
    pub rollout: RolloutConfig,
    pub checkpoint_every: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            network: NetworkConfig::default(),
            schedule: OptimizerSchedule::default(),
            rollout: RolloutConfig::default(),
            checkpoint_every: DEFAULT_CHECKPOINT_EVERY,
        }
    }
}

impl TrainingConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.schedule.validate()?;
        self.rollout.validate()?;
        if self.checkpoint_every == 0 {
            return Err(Error::InvalidConfig("checkpoint_every must be positive".into()));
        }
        Ok(())
    }
}

/// One line of the progress log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub iteration: u64,
    pub lr: f64,
    pub dice_loss: f64,
    pub hd_loss: f64,
    pub total: f64,
}

/// Independent random streams derived from one seed, so that changing how
/// often one consumer draws never shifts another.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

const SAMPLE_STREAM: u64 = 1;
const ROLLOUT_STREAM: u64 = 2;

pub struct Trainer<T> {
    config: TrainingConfig,
    records: Vec<SliceRecord>,
    net: RevisionNet<T>,
    adam: Adam<T>,
    iteration: u64,
    seed: u64,
    sample_rng: ChaCha8Rng,
    rollout_rng: ChaCha8Rng,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(config: TrainingConfig, records: Vec<SliceRecord>, seed: u64) -> Result<Self> {
        config.validate()?;
        Self::check_records(&records, &config.network)?;
        let net = RevisionNet::new(config.network.clone(), seed)?;
        let adam = Adam::new(&net, config.schedule.beta1, config.schedule.beta2);
        Ok(Self {
            config,
            records,
            net,
            adam,
            iteration: 0,
            seed,
            sample_rng: stream(seed, SAMPLE_STREAM),
            rollout_rng: stream(seed, ROLLOUT_STREAM),
        })
    }

    /// Continues from a checkpoint; the network layout must match `config`.
    pub fn resume(checkpoint: Checkpoint<T>, config: TrainingConfig, records: Vec<SliceRecord>) -> Result<Self> {
        config.validate()?;
        if checkpoint.header.config.network != config.network {
            return Err(Error::CheckpointMismatch(
                "network configuration differs from the checkpoint".into(),
            ));
        }
        Self::check_records(&records, &config.network)?;
        Ok(Self {
            config,
            records,
            net: checkpoint.net,
            adam: checkpoint.adam,
            iteration: checkpoint.header.iteration,
            seed: checkpoint.header.seed,
            sample_rng: checkpoint.header.sample_rng,
            rollout_rng: checkpoint.header.rollout_rng,
        })
    }

    fn check_records(records: &[SliceRecord], network: &NetworkConfig) -> Result<()> {
        if records.is_empty() {
            return Err(Error::InvalidConfig("no training slices".into()));
        }
        for r in records {
            if r.gt_mask.is_empty() {
                return Err(Error::EmptyGroundTruth);
            }
            if r.size != network.input_size {
                return Err(Error::ShapeMismatch {
                    expected: (network.input_size, network.input_size),
                    got: (r.size, r.size),
                });
            }
        }
        Ok(())
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn net(&self) -> &RevisionNet<T> {
        &self.net
    }

    /// Optimizer steps completed.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.config.schedule.total_iterations
    }

    /// Runs one optimizer step on a freshly simulated sample.
    pub fn step(&mut self) -> Result<StepLog> {
        let lr = self.config.schedule.lr_at(self.iteration)?;
        let rollout = &self.config.rollout;
        let record = &self.records[self.sample_rng.gen_range(0..self.records.len())];
        let initial = degrade_mask(&record.gt_mask, &rollout.degrade, &mut self.rollout_rng);
        let sample = TrainingSample::<T>::new(record, initial)?;
        let online = build_online_sample(&sample, &self.net, rollout, &mut self.rollout_rng)?;

        let (prob, trace) = self.net.forward_train(&online.input)?;
        let (loss, grad) = training_loss(&prob, &online.supervision)?;
        if !loss.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            let dump = serde_json::json!({
                "iteration": self.iteration,
                "sample": sample.id,
                "dice_loss": loss.dice_loss.as_f64(),
                "hd_loss": loss.hd_loss.as_f64(),
                "balance_weight": loss.balance_weight.as_f64(),
                "clicks": online.clicks,
                "initial_mask_pixels": sample.initial_mask.count(),
                "current_mask_pixels": online.current_mask.count(),
            });
            return Err(Error::NonFiniteLoss {
                iteration: self.iteration,
                detail: dump.to_string(),
            });
        }
        let grads = self.net.backward(&trace, &grad);
        if grads.slots.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                iteration: self.iteration,
                detail: serde_json::json!({
                    "iteration": self.iteration,
                    "sample": sample.id,
                    "total": loss.total.as_f64(),
                    "reason": "non-finite parameter gradient",
                })
                .to_string(),
            });
        }
        self.adam.update(&mut self.net, &grads, lr);
        let log = StepLog {
            iteration: self.iteration,
            lr,
            dice_loss: loss.dice_loss.as_f64(),
            hd_loss: loss.hd_loss.as_f64(),
            total: loss.total.as_f64(),
        };
        self.iteration += 1;
        Ok(log)
    }

    pub fn checkpoint(&self) -> Checkpoint<T> {
        Checkpoint {
            header: CheckpointHeader {
                scalar: T::NAME.to_string(),
                config: self.config.clone(),
                iteration: self.iteration,
                seed: self.seed,
                sample_rng: self.sample_rng.clone(),
                rollout_rng: self.rollout_rng.clone(),
                adam: self.adam.state(),
                slot_lengths: self.net.slots().iter().map(|s| s.len()).collect(),
            },
            net: self.net.clone(),
            adam: self.adam.clone(),
        }
    }

    /// Trains to the end of the schedule, appending to `out/progress.jsonl`
    /// and checkpointing every `checkpoint_every` steps and at the end.
    /// Returns the path of the final checkpoint.
    pub fn run(&mut self, out: &Path, mut on_step: impl FnMut(&StepLog)) -> Result<PathBuf> {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let log_path = out.join("progress.jsonl");
        let file = File::options()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?;
        let mut log = BufWriter::new(file);
        while !self.is_done() {
            let entry = match self.step() {
                Ok(entry) => entry,
                Err(Error::NonFiniteLoss { iteration, detail }) => {
                    let dump = out.join("nonfinite.json");
                    fs::write(&dump, &detail).map_err(|e| Error::io(&dump, e))?;
                    return Err(Error::NonFiniteLoss {
                        iteration,
                        detail: format!("{detail} (dumped to {})", dump.display()),
                    });
                }
                Err(e) => return Err(e),
            };
            let line = serde_json::to_string(&entry).map_err(|e| Error::Parse(e.to_string()))?;
            writeln!(log, "{line}").map_err(|e| Error::io(&log_path, e))?;
            on_step(&entry);
            if self.iteration % self.config.checkpoint_every == 0 && !self.is_done() {
                log.flush().map_err(|e| Error::io(&log_path, e))?;
                self.checkpoint().write(&out.join(format!("checkpoint_{:06}.ckpt", self.iteration)))?;
            }
        }
        log.flush().map_err(|e| Error::io(&log_path, e))?;
        let last = out.join("final.ckpt");
        self.checkpoint().write(&last)?;
        Ok(last)
    }
}

/// Trains on the training split of `manifest`.
pub fn train<T: Scalar>(manifest: &Path, config: &TrainingConfig, out: &Path, seed: u64) -> Result<PathBuf> {
    let records = DatasetManifest::read(manifest)?.load(Some(Split::Train))?;
    Trainer::<T>::new(config.clone(), records, seed)?.run(out, |_| {})
}
