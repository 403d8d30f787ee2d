use std::fs;
use std::path::Path;
use std::process::Command;

use ndarray::Array3;
use nifti::writer::WriterOptions;
use nifti::NiftiHeader;
use revise_core::data::{DatasetManifest, Split};
use revise_core::eval::BenchmarkReport;
use revise_core::network::NetworkConfig;
use revise_core::training::{Checkpoint, OptimizerSchedule, RolloutConfig, TrainingConfig};

fn revise(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_revise")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "revise {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const TINY: &str = r#"
checkpoint_every = 2

[network]
base_features = 2
max_features = 4

[schedule]
total_iterations = 3
lr_steps = [[0, 1e-3]]

[rollout]
max_prior_rounds = 1
"#;

#[test]
fn synth_train_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    revise(&["synth", "--n", "10", "--seed", "4", "--out", &p("data")]);
    let manifest = DatasetManifest::read(&dir.path().join("data/manifest.jsonl")).unwrap();
    assert_eq!(manifest.len(), 10);

    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let args = ["train", "--manifest", &p("data/manifest.jsonl"), "--config", &p("tiny.toml"), "--out", &p("run")];
    revise(&[&args[..], &["--seed", "1"]].concat());
    let ck = Checkpoint::<f32>::read(&dir.path().join("run/final.ckpt")).unwrap();
    assert_eq!(ck.header.iteration, 3);
    assert!(dir.path().join("run/checkpoint_000002.ckpt").exists());
    assert_eq!(fs::read_to_string(dir.path().join("run/progress.jsonl")).unwrap().lines().count(), 3);

    let stdout = revise(&[
        "evaluate",
        "--checkpoint",
        &p("run/final.ckpt"),
        "--manifest",
        &p("data/manifest.jsonl"),
        "--clicks",
        "3",
        "--seed",
        "2",
        "--out",
        &p("eval"),
    ]);
    assert!(stdout.starts_with("DSC/HD95(mm)\tdata\nInitial\t"), "{stdout}");
    let report = BenchmarkReport::from_csv(&fs::read_to_string(dir.path().join("eval/report.csv")).unwrap()).unwrap();
    assert_eq!(report.max_clicks, 3);
    assert_eq!(report.overall.traces, 1);
    assert!(dir.path().join("eval/report.json").exists() && dir.path().join("eval/table.txt").exists());
}

fn write_volume(path: &Path, f: impl Fn(usize, usize, usize) -> f32) {
    // 2 slices of 260 rows × 270 columns, stored x-fastest.
    let arr = Array3::from_shape_fn((270, 260, 2), |(x, y, z)| f(z, y, x));
    let mut header = NiftiHeader::default();
    header.pixdim = [1.0, 1.1, 1.0, 3.0, 1.0, 1.0, 1.0, 1.0];
    WriterOptions::new(path).reference_header(&header).write_nifti(&arr).unwrap();
}

#[test]
fn ingest_volumes() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["case_a", "case_b"] {
        let v = dir.path().join(name);
        fs::create_dir_all(v.join("masks")).unwrap();
        write_volume(&v.join("image.nii.gz"), |_, r, c| if (60..200).contains(&r) && (50..220).contains(&c) { 40.0 } else { -1000.0 });
        write_volume(&v.join("masks/brainstem.nii.gz"), |z, r, c| f32::from(z == 0 && (120..130).contains(&r) && (130..138).contains(&c)));
    }
    let out = dir.path().join("ingested");
    revise(&[
        "ingest",
        dir.path().join("case_a").to_str().unwrap(),
        dir.path().join("case_b").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--split",
        "validation",
    ]);
    let m = DatasetManifest::read(&out.join("manifest.jsonl")).unwrap();
    let recs = m.load(Some(Split::Validation)).unwrap();
    assert_eq!(recs.len(), 2);
    assert!(recs.iter().all(|r| r.gt_mask.count() == 80 && r.spacing.col_mm > 1.0));
}

#[test]
fn shipped_desk_config_is_the_scaled_desk_schedule() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let config = TrainingConfig::read(&path).unwrap();
    assert_eq!(config.network, NetworkConfig::desk());
    assert_eq!(config.schedule, OptimizerSchedule::scaled(2000, 1e-3));
    assert_eq!(config.rollout, RolloutConfig::default());
}
