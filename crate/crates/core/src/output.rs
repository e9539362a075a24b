//! Versioned CSV outputs. Floats use Rust's shortest round-trip formatting,
//! so identical runs give byte-identical files.

use std::path::Path;

use crate::agent::{EpisodeRecord, StepRecord};
use crate::config::RunConfig;
use crate::experiment::BaselineRow;
use crate::orbits::TraceRow;
use crate::Result;

pub const TRACE_FILE: &str = "trace.v1.csv";
pub const STEPS_FILE: &str = "steps.v1.csv";
pub const EPISODES_FILE: &str = "episodes.v1.csv";
pub const EVAL_FILE: &str = "eval.v1.csv";
pub const BASELINE_FILE: &str = "baseline.v1.csv";
pub const FROZEN_CONFIG_FILE: &str = "config.frozen.toml";

pub const TRACE_HEADER: &[&str] =
    &["t_s", "serving", "layer", "plane", "slot", "distance_m", "elevation_deg", "handover_flag"];
pub const STEPS_HEADER: &[&str] =
    &["episode", "step", "t_s", "r_con", "reward", "sum_rate", "serving", "handover_flag"];
pub const EPISODES_HEADER: &[&str] = &[
    "episode",
    "mean_reward",
    "mean_sum_rate",
    "actor_loss_proxy",
    "critic_loss",
    "noise_var",
    "handovers_this_episode",
];
pub const EVAL_HEADER: &[&str] =
    &["policy", "episode", "step", "t_s", "r_con", "reward", "sum_rate", "serving", "handover_flag"];
pub const BASELINE_HEADER: &[&str] =
    &["seed", "baseline", "steps", "delay_steps", "mean_sum_rate", "handovers"];

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

fn step_row(s: &StepRecord) -> Vec<String> {
    vec![
        s.episode.to_string(),
        s.step.to_string(),
        s.t.to_string(),
        s.r_con.to_string(),
        s.reward.to_string(),
        s.sum_rate.to_string(),
        s.serving.to_string(),
        flag(s.handover),
    ]
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    write_csv(
        path,
        TRACE_HEADER,
        rows.iter().map(|r| {
            vec![
                r.t.to_string(),
                r.serving.to_string(),
                r.serving.layer.to_string(),
                r.serving.plane.to_string(),
                r.serving.slot.to_string(),
                r.distance.to_string(),
                r.elevation.to_degrees().to_string(),
                flag(r.handover),
            ]
        }),
    )
}

pub fn write_steps(path: &Path, steps: &[StepRecord]) -> Result<()> {
    write_csv(path, STEPS_HEADER, steps.iter().map(step_row))
}

pub fn write_episodes(path: &Path, episodes: &[EpisodeRecord]) -> Result<()> {
    write_csv(
        path,
        EPISODES_HEADER,
        episodes.iter().map(|e| {
            vec![
                e.episode.to_string(),
                e.mean_reward.to_string(),
                e.mean_sum_rate.to_string(),
                e.actor_loss.to_string(),
                e.critic_loss.to_string(),
                e.noise_var.to_string(),
                e.handovers.to_string(),
            ]
        }),
    )
}

/// Policy rows first, then the random reference over the same channels.
pub fn write_eval(path: &Path, policy: &[StepRecord], random: &[StepRecord]) -> Result<()> {
    let tagged = |name: &'static str| {
        move |s: &StepRecord| {
            let mut row = vec![name.to_string()];
            row.extend(step_row(s));
            row
        }
    };
    write_csv(path, EVAL_HEADER, policy.iter().map(tagged("ddpg")).chain(random.iter().map(tagged("random"))))
}

pub fn write_baselines(path: &Path, rows: &[BaselineRow]) -> Result<()> {
    write_csv(
        path,
        BASELINE_HEADER,
        rows.iter().map(|r| {
            vec![
                r.seed.to_string(),
                r.kind.to_string(),
                r.steps.to_string(),
                r.delay_steps.to_string(),
                r.mean_sum_rate.to_string(),
                r.handovers.to_string(),
            ]
        }),
    )
}

pub fn write_frozen_config(dir: &Path, cfg: &RunConfig) -> Result<()> {
    std::fs::write(dir.join(FROZEN_CONFIG_FILE), cfg.to_toml()?)?;
    Ok(())
}
