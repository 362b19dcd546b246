use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::info;

use super::config::{TrainConfig, KL_SWEEP};
use super::trainer::{IterationReport, Trainer, TrainerState};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::policy::{load_critic, load_policy, save_critic, save_policy};
use crate::scalar::Scalar;

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const POLICY_FILE: &str = "policy.ckpt";
pub const CRITIC_FILE: &str = "critic.ckpt";
pub const STATE_FILE: &str = "state.json";
pub const CONFIG_FILE: &str = "config.toml";

/// Persist policy, critic and optimiser state so the run can resume exactly.
pub fn save_checkpoint<S: Scalar, E: Environment>(trainer: &Trainer<S, E>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    save_policy(&trainer.policy, &dir.join(POLICY_FILE))?;
    save_critic(&trainer.critic, &dir.join(CRITIC_FILE))?;
    let tmp = dir.join(format!("{STATE_FILE}.tmp"));
    serde_json::to_writer(BufWriter::new(File::create(&tmp)?), &trainer.state())?;
    fs::rename(tmp, dir.join(STATE_FILE))?;
    Ok(())
}

/// Run `trainer` until `config.iterations`, appending one JSON line per
/// iteration to `dir/metrics.jsonl` and checkpointing every
/// `checkpoint_every` iterations and at the end.
pub fn train_run<S: Scalar, E: Environment>(
    trainer: &mut Trainer<S, E>,
    dir: &Path,
    mut on_report: impl FnMut(&IterationReport),
) -> Result<Vec<IterationReport>> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_FILE), trainer.config.to_toml())?;
    let mut metrics = OpenOptions::new().create(true).append(true).open(dir.join(METRICS_FILE))?;
    if trainer.iteration == 0 {
        metrics.set_len(0)?;
    }
    let mut reports = Vec::new();
    while trainer.iteration < trainer.config.iterations {
        let report = trainer.step()?;
        writeln!(metrics, "{}", serde_json::to_string(&report)?)?;
        metrics.flush()?;
        on_report(&report);
        reports.push(report);
        let every = trainer.config.checkpoint_every;
        if every > 0 && trainer.iteration % every == 0 {
            save_checkpoint(trainer, dir)?;
        }
    }
    save_checkpoint(trainer, dir)?;
    info!("run finished after {} iterations in {}", trainer.iteration, dir.display());
    Ok(reports)
}

/// Rebuild a trainer from the last checkpoint in `dir` and cut the metrics
/// log back to the checkpointed iteration. `config` may differ from the saved
/// one only in `iterations` and `checkpoint_every`.
pub fn resume<S: Scalar, E: Environment>(config: TrainConfig, suite: Vec<E>, dir: &Path) -> Result<Trainer<S, E>> {
    let saved = TrainConfig::from_toml(&fs::read_to_string(dir.join(CONFIG_FILE))?)?;
    let comparable = TrainConfig { iterations: saved.iterations, checkpoint_every: saved.checkpoint_every, ..config.clone() };
    if comparable != saved {
        return Err(Error::Config(format!("configuration differs from the run in {}", dir.display())));
    }
    let policy = load_policy(&dir.join(POLICY_FILE))?;
    let critic = load_critic(&dir.join(CRITIC_FILE))?;
    let state: TrainerState = serde_json::from_reader(BufReader::new(File::open(dir.join(STATE_FILE))?))?;
    let mut trainer = Trainer::new(config, suite, policy, critic)?;
    trainer.load_state(&state);
    truncate_metrics(&dir.join(METRICS_FILE), state.iteration)?;
    Ok(trainer)
}

/// Keep only the first `lines` records of a metrics log.
fn truncate_metrics(path: &Path, lines: usize) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let mut kept = Vec::new();
    for line in BufReader::new(File::open(path)?).lines().take(lines) {
        kept.push(line?);
    }
    if kept.len() < lines {
        return Err(Error::Checkpoint(format!("metrics log has {} records, checkpoint expects {lines}", kept.len())));
    }
    let mut f = File::create(path)?;
    for l in kept {
        writeln!(f, "{l}")?;
    }
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<IterationReport>> {
    BufReader::new(File::open(path)?)
        .lines()
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}

/// Run `evaluate` for every KL coefficient in the sweep and keep the best
/// score; ties go to the smaller coefficient.
pub fn sweep_kl(base: &TrainConfig, mut evaluate: impl FnMut(&TrainConfig) -> Result<f64>) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut results = Vec::new();
    for beta in KL_SWEEP {
        let cfg = TrainConfig { kl_coef: beta, seed: 0, ..base.clone() };
        results.push((beta, evaluate(&cfg)?));
    }
    let best = results.iter().fold(results[0], |b, &r| if r.1 > b.1 { r } else { b });
    Ok((best.0, results))
}
