mod common;

use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use revise_core::click::{ClickEncoding, CLICK_RADIUS};
use revise_core::data::write_dataset;
use revise_core::geometry::{extract_contour, BinaryMask};
use revise_core::network::{RevisionInput, RevisionNet};
use revise_core::training::{
    build_online_sample, build_with_rounds, load_model, train, Checkpoint, DegradeParams, RolloutConfig, StepLog,
    Trainer, TrainingConfig, TrainingSample,
};
use revise_core::Error;

use common::{small_network, small_records, small_training};

fn sample(initial: impl Fn(&BinaryMask) -> BinaryMask) -> TrainingSample<f32> {
    let rec = &small_records(1, 5)[0].1;
    TrainingSample::new(rec, initial(&rec.gt_mask)).unwrap()
}

/// Independent click-map oracle: maximum of truncated Gaussians.
fn encode_oracle(points: &[(usize, usize)], size: usize) -> Vec<f64> {
    let sigma = CLICK_RADIUS / 3.0;
    let mut out = vec![0.0f64; size * size];
    for r in 0..size {
        for c in 0..size {
            for &(pr, pc) in points {
                let d2 = (r as f64 - pr as f64).powi(2) + (c as f64 - pc as f64).powi(2);
                if d2 <= CLICK_RADIUS * CLICK_RADIUS {
                    out[r * size + c] = out[r * size + c].max((-d2 / (2.0 * sigma * sigma)).exp());
                }
            }
        }
    }
    out
}

#[test]
fn single_round_has_one_bump() {
    let net = RevisionNet::<f32>::new(small_network(), 1).unwrap();
    let s = sample(|gt| gt.erode(1));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let out = build_with_rounds(&s, &net, &RolloutConfig::default(), 0, &mut rng).unwrap();
    assert_eq!(out.clicks.len(), 1);
    assert_eq!(out.current_mask, s.initial_mask);
    let ch = out.input.channel(2);
    assert_eq!(ch.iter().filter(|&&v| v == 1.0).count(), 1);
    let c = out.clicks[0];
    assert_eq!(ch[c.row * 64 + c.col], 1.0);
    assert!(extract_contour(&s.gt_mask).contains(c.point()));
}

#[test]
fn three_rounds_accumulate_three_clicks() {
    let net = RevisionNet::<f32>::new(small_network(), 1).unwrap();
    let s = sample(|gt| gt.shift(2, -1));
    let before = s.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let out = build_with_rounds(&s, &net, &RolloutConfig::default(), 2, &mut rng).unwrap();
    assert_eq!(out.clicks.len(), 3);
    assert_eq!(out.clicks.iter().map(|c| c.ordinal).collect::<Vec<_>>(), vec![1, 2, 3]);
    let points: Vec<_> = out.clicks.iter().map(|c| (c.row, c.col)).collect();
    let want = encode_oracle(&points, 64);
    for (got, want) in out.input.channel(2).iter().zip(&want) {
        assert!((f64::from(*got) - want).abs() < 1e-6);
    }
    // The sample is untouched and supervision is the ground truth.
    assert_eq!(s, before);
    assert_eq!(out.supervision, s.gt_mask);
}

#[test]
fn latest_click_only_when_not_accumulating() {
    let net = RevisionNet::<f32>::new(small_network(), 1).unwrap();
    let s = sample(|gt| gt.dilate(2));
    let rollout = RolloutConfig {
        clicks_accumulate: false,
        ..RolloutConfig::default()
    };
    let out = build_with_rounds(&s, &net, &rollout, 2, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let last = out.clicks[2];
    let want = ClickEncoding::default().encode::<f32>(&[last], (64, 64)).unwrap();
    assert_eq!(out.input.channel(2), want.values());
}

#[test]
fn perfect_initial_mask_gives_uniform_clicks() {
    let net = RevisionNet::<f32>::new(small_network(), 1).unwrap();
    let s = sample(|gt| gt.clone());
    let contour = extract_contour(&s.gt_mask);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut counts = std::collections::BTreeMap::new();
    let draws = 40 * contour.len();
    for _ in 0..draws {
        let out = build_with_rounds(&s, &net, &RolloutConfig::default(), 0, &mut rng).unwrap();
        *counts.entry(out.clicks[0].point()).or_insert(0usize) += 1;
    }
    // Every boundary point is drawn, each near 40 times (binomial 3σ ≈ 19).
    assert_eq!(counts.len(), contour.len());
    assert!(counts.values().all(|&n| (15..=70).contains(&n)), "{counts:?}");
}

#[test]
fn prior_rounds_stay_within_the_configured_bound() {
    let net = RevisionNet::<f32>::new(small_network(), 1).unwrap();
    let s = sample(|gt| gt.erode(2));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut seen = [false; 3];
    for _ in 0..30 {
        let out = build_online_sample(&s, &net, &RolloutConfig::default(), &mut rng).unwrap();
        assert!(out.prior_rounds <= 2);
        assert_eq!(out.clicks.len(), out.prior_rounds + 1);
        seen[out.prior_rounds] = true;
    }
    assert_eq!(seen, [true; 3]);
    let bad = RolloutConfig {
        max_prior_rounds: 6,
        ..RolloutConfig::default()
    };
    assert!(bad.validate().is_err());
}

fn train_split() -> Vec<revise_core::data::SliceRecord> {
    small_records(10, 3).into_iter().map(|(_, r)| r).collect()
}

fn run_logs(config: &TrainingConfig, seed: u64, steps: usize) -> Vec<StepLog> {
    let mut t = Trainer::<f32>::new(config.clone(), train_split(), seed).unwrap();
    (0..steps).map(|_| t.step().unwrap()).collect()
}

#[test]
fn smoke_run_writes_checkpoints_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&dir.path().join("data"), &small_records(10, 3)).unwrap();
    let out = dir.path().join("run");
    let last = train::<f32>(&manifest, &small_training(10), &out, 1).unwrap();
    assert_eq!(last, out.join("final.ckpt"));
    let ck = Checkpoint::<f32>::read(&last).unwrap();
    assert_eq!(ck.header.iteration, 10);
    assert_eq!(ck.adam.step, 10);
    assert!(out.join("checkpoint_000004.ckpt").exists() && out.join("checkpoint_000008.ckpt").exists());
    let log = fs::read_to_string(out.join("progress.jsonl")).unwrap();
    let entries: Vec<StepLog> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(entries.len(), 10);
    assert!(entries.iter().all(|e| e.total.is_finite()));
    assert_eq!(entries.iter().map(|e| e.iteration).collect::<Vec<_>>(), (0..10).collect::<Vec<_>>());
    let fields: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    let mut keys: Vec<_> = fields.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(keys, ["dice_loss", "hd_loss", "iteration", "lr", "total"]);
}

#[test]
fn same_seed_same_losses() {
    let config = small_training(6);
    let a = run_logs(&config, 11, 6);
    assert_eq!(a, run_logs(&config, 11, 6));
    assert_ne!(a, run_logs(&config, 12, 6));
}

#[test]
fn balanced_loss_is_twice_the_dice_term() {
    for e in run_logs(&small_training(4), 2, 4) {
        assert!((e.total - 2.0 * e.dice_loss).abs() <= 1e-6 * e.total.max(1.0));
    }
}

#[test]
fn checkpoint_roundtrip_is_bit_exact_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_training(8);
    let mut t = Trainer::<f32>::new(config.clone(), train_split(), 5).unwrap();
    for _ in 0..3 {
        t.step().unwrap();
    }
    let path = dir.path().join("mid.ckpt");
    t.checkpoint().write(&path).unwrap();

    let loaded = Checkpoint::<f32>::read(&path).unwrap();
    assert_eq!(&loaded.net, t.net());
    assert_eq!(loaded.adam, t.checkpoint().adam);
    let rec = &train_split()[0];
    let image: Vec<f32> = rec.image.to_vec();
    let clicks = ClickEncoding::default().encode(&[], (64, 64)).unwrap();
    let input = RevisionInput::new(&image, &rec.gt_mask, &clicks).unwrap();
    assert_eq!(load_model::<f32>(&path).unwrap().forward(&input).unwrap(), t.net().forward(&input).unwrap());

    // Resuming continues the exact same loss sequence.
    let mut resumed = Trainer::resume(loaded, config, train_split()).unwrap();
    for _ in 0..3 {
        assert_eq!(resumed.step().unwrap(), t.step().unwrap());
    }
}

#[test]
fn mismatched_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let t = Trainer::<f32>::new(small_training(4), train_split(), 5).unwrap();
    let path = dir.path().join("a.ckpt");
    t.checkpoint().write(&path).unwrap();

    let mut other = small_training(4);
    other.network.base_features = 4;
    let ck = Checkpoint::<f32>::read(&path).unwrap();
    assert!(matches!(Trainer::resume(ck, other, train_split()), Err(Error::CheckpointMismatch(_))));
    assert!(matches!(Checkpoint::<f64>::read(&path), Err(Error::CheckpointMismatch(_))));

    let mut bytes = fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 3);
    fs::write(&path, &bytes).unwrap();
    assert!(matches!(Checkpoint::<f32>::read(&path), Err(Error::CheckpointMismatch(_))));
    fs::write(&path, b"definitely not a checkpoint").unwrap();
    assert!(matches!(Checkpoint::<f32>::read(&path), Err(Error::CheckpointMismatch(_))));
}

#[test]
fn divergence_aborts_with_a_dump() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_training(20);
    config.schedule.lr_steps = vec![(0, 1e30)];
    let mut t = Trainer::<f32>::new(config, train_split(), 1).unwrap();
    let err = t.run(dir.path(), |_| {}).unwrap_err();
    assert!(matches!(err, Error::NonFiniteLoss { .. }), "{err}");
    assert!(dir.path().join("nonfinite.json").exists());
}

#[test]
fn config_reads_from_toml() {
    let text = r#"
        checkpoint_every = 100

        [network]
        base_features = 8
        max_features = 64

        [schedule]
        total_iterations = 2000
        lr_steps = [[0, 1e-3], [1000, 1e-4], [1500, 1e-5]]

        [rollout]
        max_prior_rounds = 1

        [rollout.degrade]
        max_shift = 3
    "#;
    let c = TrainingConfig::from_toml(text).unwrap();
    assert_eq!(c.network.depth, 8);
    assert_eq!(c.network.base_features, 8);
    assert_eq!(c.schedule.lr_at(1499).unwrap(), 1e-4);
    assert_eq!(c.rollout.max_prior_rounds, 1);
    assert_eq!(c.rollout.degrade, DegradeParams { max_shift: 3, ..DegradeParams::default() });
    assert_eq!(TrainingConfig::from_toml(&c.to_toml()).unwrap(), c);
    assert!(TrainingConfig::from_toml("[schedule]\nlr_steps = [[5, 1e-3]]").is_err());
    assert!(TrainingConfig::from_toml("[network]\ninput_size = 100").is_err());
}
