//! Artifact writers. Everything written here is a pure function of the
//! episode results, so repeated runs produce identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use behex_core::sim::{EpisodeResult, SimConfig, SweepRow, Termination};
use serde::Serialize;

use crate::error::CliError;

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |e| CliError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

#[derive(Serialize)]
struct MetricsRow {
    seed: u64,
    alpha_lo: f64,
    alpha_hi: f64,
    radius: f64,
    noise: u8,
    robots: usize,
    iterations: usize,
    completed: bool,
    termination: Termination,
    total_path: f64,
    final_entropy: f64,
    initial_entropy: f64,
    reallocations: usize,
    partition_violations: usize,
    entropy_increases: usize,
}

#[derive(Serialize)]
struct RobotRow {
    robot: usize,
    alpha: f64,
    path_length: f64,
    start_x: usize,
    start_y: usize,
    end_x: usize,
    end_y: usize,
}

#[derive(Serialize)]
struct TraceRow {
    tick: usize,
    entropy: f64,
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io(dir))
}

/// Writes `metrics.csv`, `robots.csv`, `entropy_trace.csv`,
/// `final_map.ogrid` and any snapshots under `dir`.
pub fn write_episode(dir: &Path, cfg: &SimConfig, r: &EpisodeResult) -> Result<Vec<PathBuf>, CliError> {
    create_dir(dir)?;
    let m = &r.metrics;
    let mut written = Vec::new();

    let path = dir.join("metrics.csv");
    write_csv(
        &path,
        &[MetricsRow {
            seed: cfg.seed,
            alpha_lo: cfg.alpha_range.0,
            alpha_hi: cfg.alpha_range.1,
            radius: cfg.sensing_radius,
            noise: cfg.noise.as_u8(),
            robots: cfg.robots,
            iterations: m.iterations,
            completed: m.completed,
            termination: m.termination,
            total_path: m.total_path,
            final_entropy: m.final_entropy,
            initial_entropy: m.initial_entropy,
            reallocations: m.reallocations,
            partition_violations: m.partition_violations,
            entropy_increases: m.entropy_increases,
        }],
    )?;
    written.push(path);

    let path = dir.join("robots.csv");
    let rows: Vec<RobotRow> = (0..r.alphas.len())
        .map(|i| {
            let traj = &r.trajectories[i];
            let (s, e) = (traj[0], traj[traj.len() - 1]);
            RobotRow {
                robot: i,
                alpha: r.alphas[i],
                path_length: m.robot_paths[i],
                start_x: s.x,
                start_y: s.y,
                end_x: e.x,
                end_y: e.y,
            }
        })
        .collect();
    write_csv(&path, &rows)?;
    written.push(path);

    let path = dir.join("entropy_trace.csv");
    let rows: Vec<TraceRow> =
        m.entropy_trace.iter().enumerate().map(|(tick, &entropy)| TraceRow { tick, entropy }).collect();
    write_csv(&path, &rows)?;
    written.push(path);

    let path = dir.join("final_map.ogrid");
    r.final_map.save(&path)?;
    written.push(path);

    if !r.snapshots.is_empty() {
        let snap = dir.join("snapshots");
        create_dir(&snap)?;
        for (tick, grid) in &r.snapshots {
            let path = snap.join(format!("tick_{tick:05}.ogrid"));
            grid.save(&path)?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn write_dataset(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    write_csv(path, rows)
}

/// Per alpha range: episode count, completions, and cost statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeSummary {
    pub alpha: (f64, f64),
    pub episodes: usize,
    pub completed: usize,
    pub cost_mean: f64,
    pub cost_sd: f64,
    pub iterations_mean: f64,
    pub path_mean: f64,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() < 2 { 0.0 } else { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() };
    (mean, sd)
}

/// Groups rows by alpha range in first-appearance order. Statistics use
/// completed episodes only; the standard deviation is the sample one.
pub fn summarize(rows: &[SweepRow]) -> Vec<RangeSummary> {
    let mut keys: Vec<(f64, f64)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.alpha_lo, r.alpha_hi)) {
            keys.push((r.alpha_lo, r.alpha_hi));
        }
    }
    keys.into_iter()
        .map(|alpha| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| (r.alpha_lo, r.alpha_hi) == alpha).collect();
            let done: Vec<&&SweepRow> = group.iter().filter(|r| r.completed).collect();
            let costs: Vec<f64> = done.iter().filter_map(|r| r.cost).collect();
            let (cost_mean, cost_sd) = mean_sd(&costs);
            let iters: Vec<f64> = done.iter().map(|r| r.iterations as f64).collect();
            let paths: Vec<f64> = done.iter().map(|r| r.total_path).collect();
            RangeSummary {
                alpha,
                episodes: group.len(),
                completed: done.len(),
                cost_mean,
                cost_sd,
                iterations_mean: mean_sd(&iters).0,
                path_mean: mean_sd(&paths).0,
            }
        })
        .collect()
}

pub fn print_summary(out: &mut impl Write, summary: &[RangeSummary]) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<14} {:>8} {:>9} {:>10} {:>10} {:>10} {:>10}",
        "alpha", "episodes", "completed", "cost_mean", "cost_sd", "iters", "path"
    )?;
    for s in summary {
        writeln!(
            out,
            "{:<14} {:>8} {:>9} {:>10.4} {:>10.4} {:>10.2} {:>10.3}",
            format!("[{}, {}]", s.alpha.0, s.alpha.1),
            s.episodes,
            s.completed,
            s.cost_mean,
            s.cost_sd,
            s.iterations_mean,
            s.path_mean
        )?;
    }
    Ok(())
}
