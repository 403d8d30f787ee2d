use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use revise_core::data::{crop_axial, ingest_volume, synth_dataset, write_dataset, DatasetManifest, Split, SynthConfig};
use revise_core::eval::{aggregate, emit_report, evaluate_slices, render_table};
use revise_core::training::{Checkpoint, Trainer, TrainingConfig};
use revise_service::AppState;

#[derive(Parser)]
#[command(name = "revise", version, about = "Click-conditioned contour revision")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Crop NIfTI volumes into 256×256 axial slices and write a manifest.
    Ingest {
        /// Volume directories, each holding image.nii[.gz] and masks/<organ>.nii[.gz].
        #[arg(required = true)]
        volumes: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Split for every volume; by default volumes are split 80/10/10 in name order.
        #[arg(long)]
        split: Option<Split>,
    },
    /// Generate a synthetic dataset.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a revision model on the training split of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// TOML file with [network], [schedule] and [rollout] tables.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Simulate clicking on a split and write CSV, JSON and table reports.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 3)]
        clicks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Dataset name in reports; defaults to the manifest's directory name.
        #[arg(long)]
        dataset: Option<String>,
    },
    /// Run the HTTP revision service.
    Serve {
        #[arg(long, env = "REVISE_CHECKPOINT")]
        checkpoint: PathBuf,
        #[arg(long, env = "REVISE_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Idle session lifetime, seconds.
        #[arg(long, env = "REVISE_SESSION_TTL", default_value_t = 3600)]
        ttl: u64,
    },
}

fn split_for(index: usize, n: usize) -> Split {
    let train = ((n as f64) * 0.8).round() as usize;
    let val = ((n as f64) * 0.1).round() as usize;
    if index < train {
        Split::Train
    } else if index < train + val {
        Split::Validation
    } else {
        Split::Test
    }
}

fn ingest(volumes: &[PathBuf], out: &Path, split: Option<Split>) -> Result<()> {
    let mut dirs = volumes.to_vec();
    dirs.sort();
    let mut records = Vec::new();
    for (i, dir) in dirs.iter().enumerate() {
        let volume = ingest_volume(dir).with_context(|| format!("ingesting {}", dir.display()))?;
        let slices = crop_axial(&volume)?;
        let s = split.unwrap_or_else(|| split_for(i, dirs.len()));
        log::info!("{}: {} organ slices -> {s:?}", volume.id, slices.len());
        records.extend(slices.into_iter().map(|r| (s, r)));
    }
    if records.is_empty() {
        bail!("no slice contains any organ");
    }
    let manifest = write_dataset(out, &records)?;
    println!("{} records -> {}", records.len(), manifest.display());
    Ok(())
}

fn train(manifest: &Path, config: Option<&Path>, out: &Path, seed: u64, resume: Option<&Path>) -> Result<()> {
    let config = match config {
        Some(p) => TrainingConfig::read(p)?,
        None => TrainingConfig::default(),
    };
    let records = DatasetManifest::read(manifest)?.load(Some(Split::Train))?;
    let mut trainer = match resume {
        Some(p) => Trainer::<f32>::resume(Checkpoint::read(p)?, config, records)?,
        None => Trainer::<f32>::new(config, records, seed)?,
    };
    let total = trainer.config().schedule.total_iterations;
    let every = (total / 100).max(1);
    let last = trainer.run(out, |s| {
        if (s.iteration + 1) % every == 0 {
            log::info!(
                "iteration {}/{total}: lr {:.1e} dice {:.4} hd {:.4} total {:.4}",
                s.iteration + 1,
                s.lr,
                s.dice_loss,
                s.hd_loss,
                s.total
            );
        }
    })?;
    println!("{}", last.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    checkpoint: &Path,
    manifest: &Path,
    clicks: usize,
    seed: u64,
    out: &Path,
    split: Split,
    dataset: Option<String>,
) -> Result<()> {
    let ck = Checkpoint::<f32>::read(checkpoint)?;
    let slices = DatasetManifest::read(manifest)?.load(Some(split))?;
    if slices.is_empty() {
        bail!("manifest has no {split:?} slices");
    }
    let traces = evaluate_slices(&ck.net, &slices, &ck.header.config.rollout.degrade, clicks, seed)?;
    let dataset = dataset.unwrap_or_else(|| {
        manifest
            .parent()
            .and_then(|p| p.file_name())
            .and_then(|n| n.to_str())
            .unwrap_or("dataset")
            .to_string()
    });
    let checkpoint_id = format!("{}@{}", checkpoint.display(), ck.header.iteration);
    let report = aggregate(&traces, &dataset, &checkpoint_id)?;
    let files = emit_report(&report, Some(&traces), out)?;
    let latencies: Vec<f64> = traces.iter().flat_map(|t| t.latencies_ms.iter().copied()).collect();
    let mean_ms = latencies.iter().sum::<f64>() / latencies.len().max(1) as f64;
    print!("{}", render_table(&[report]));
    println!("mean forward latency: {mean_ms:.1} ms over {} passes", latencies.len());
    println!("reports: {}, {}, {}", files.csv.display(), files.json.display(), files.table.display());
    Ok(())
}

async fn serve(checkpoint: PathBuf, addr: SocketAddr, ttl: u64) -> Result<()> {
    let state = AppState::from_checkpoint(&checkpoint, Duration::from_secs(ttl))?;
    #[cfg(unix)]
    {
        // SIGHUP reloads the checkpoint file in place.
        let state = state.clone();
        let mut hup = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::hangup())?;
        tokio::spawn(async move {
            while hup.recv().await.is_some() {
                match state.reload(&checkpoint) {
                    Ok(()) => log::info!("reloaded {}", checkpoint.display()),
                    Err(e) => log::error!("reload failed, keeping the current model: {e}"),
                }
            }
        });
    }
    revise_service::serve(state, addr).await?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Ingest { volumes, out, split } => ingest(&volumes, &out, split),
        Command::Synth { n, seed, out } => {
            if n == 0 {
                bail!("--n must be at least 1");
            }
            let manifest = write_dataset(&out, &synth_dataset(n, seed, &SynthConfig::default()))?;
            println!("{}", manifest.display());
            Ok(())
        }
        Command::Train {
            manifest,
            config,
            out,
            seed,
            resume,
        } => train(&manifest, config.as_deref(), &out, seed, resume.as_deref()),
        Command::Evaluate {
            checkpoint,
            manifest,
            clicks,
            seed,
            out,
            split,
            dataset,
        } => evaluate(&checkpoint, &manifest, clicks, seed, &out, split, dataset),
        Command::Serve { checkpoint, addr, ttl } => tokio::runtime::Runtime::new()?.block_on(serve(checkpoint, addr, ttl)),
    }
}
