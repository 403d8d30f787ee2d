//! On-the-fly construction of click-conditioned training inputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::degrade::DegradeParams;
use crate::click::{encode_clicks, training_click, Click, ClickSampling};
use crate::data::SliceRecord;
use crate::error::{Error, Result};
use crate::geometry::{extract_contour, BinaryMask};
use crate::network::{to_mask, RevisionInput, RevisionNet};
use crate::scalar::Scalar;

/// Upper bound on self-revision rounds before the supervised step.
pub const MAX_PRIOR_ROUNDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutConfig {
    /// Rounds of gradient-free revision before the supervised pass; the
    /// count is drawn uniformly from `0..=max_prior_rounds` per sample.
    pub max_prior_rounds: usize,
    /// Encode every click so far; otherwise only the latest one.
    pub clicks_accumulate: bool,
    pub degrade: DegradeParams,
    pub sampling: ClickSampling,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            max_prior_rounds: 2,
            clicks_accumulate: true,
            degrade: DegradeParams::default(),
            sampling: ClickSampling::default(),
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_prior_rounds > MAX_PRIOR_ROUNDS {
            return Err(Error::InvalidConfig(format!(
                "rollout: max_prior_rounds must be at most {MAX_PRIOR_ROUNDS}"
            )));
        }
        if !(self.sampling.temperature > 0.0) {
            return Err(Error::InvalidConfig("rollout: softmax temperature must be positive".into()));
        }
        Ok(())
    }
}

/// One slice with its supervision and the mask the rollout starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample<T> {
    pub id: String,
    pub image: Vec<T>,
    pub gt_mask: BinaryMask,
    pub organ_id: String,
    pub initial_mask: BinaryMask,
}

impl<T: Scalar> TrainingSample<T> {
    pub fn new(record: &SliceRecord, initial_mask: BinaryMask) -> Result<Self> {
        if record.gt_mask.is_empty() {
            return Err(Error::EmptyGroundTruth);
        }
        record.gt_mask.check_shape(&initial_mask)?;
        Ok(Self {
            id: record.id.clone(),
            image: record.image.iter().map(|&v| T::of(f64::from(v))).collect(),
            gt_mask: record.gt_mask.clone(),
            organ_id: record.organ_id.clone(),
            initial_mask,
        })
    }
}

/// Input for the supervised pass plus what went into it.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineSample<T> {
    pub input: RevisionInput<T>,
    pub supervision: BinaryMask,
    /// Every click drawn, in order.
    pub clicks: Vec<Click>,
    /// Mask in the input's mask channel.
    pub current_mask: BinaryMask,
    pub prior_rounds: usize,
}

/// Simulates a short interactive session: a click is drawn against the
/// current mask, and for all but the last round the model revises the mask
/// without gradients. The final input carries the accumulated clicks.
pub fn build_online_sample<T: Scalar, R: Rng + ?Sized>(
    sample: &TrainingSample<T>,
    model: &RevisionNet<T>,
    rollout: &RolloutConfig,
    rng: &mut R,
) -> Result<OnlineSample<T>> {
    let rounds = rng.gen_range(0..=rollout.max_prior_rounds.min(MAX_PRIOR_ROUNDS));
    build_with_rounds(sample, model, rollout, rounds, rng)
}

/// [`build_online_sample`] with a fixed number of prior rounds.
pub fn build_with_rounds<T: Scalar, R: Rng + ?Sized>(
    sample: &TrainingSample<T>,
    model: &RevisionNet<T>,
    rollout: &RolloutConfig,
    prior_rounds: usize,
    rng: &mut R,
) -> Result<OnlineSample<T>> {
    let shape = sample.gt_mask.shape();
    let gt_contour = extract_contour(&sample.gt_mask);
    let mut current = sample.initial_mask.clone();
    let mut clicks: Vec<Click> = Vec::with_capacity(prior_rounds + 1);
    let encode = |clicks: &[Click]| {
        let active = if rollout.clicks_accumulate { clicks } else { &clicks[clicks.len() - 1..] };
        encode_clicks::<T>(active, shape)
    };
    for round in 0..=prior_rounds {
        let point = training_click::<T, R>(&gt_contour, &extract_contour(&current), rollout.sampling, rng)?;
        clicks.push(Click::new(point, round + 1));
        if round < prior_rounds {
            let input = RevisionInput::new(&sample.image, &current, &encode(&clicks)?)?;
            current = to_mask(&model.forward(&input)?);
        }
    }
    let input = RevisionInput::new(&sample.image, &current, &encode(&clicks)?)?;
    Ok(OnlineSample {
        input,
        supervision: sample.gt_mask.clone(),
        clicks,
        current_mask: current,
        prior_rounds,
    })
}
