//! Config file schema. Every section is optional except the top-level seed.

use std::path::{Path, PathBuf};

use behex_core::sim::{AllocationConfig, MapSpec, RrtConfig, SimConfig, SweepSpec};
use behex_core::world::{MapKind, NoiseLevel};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub map: MapSection,
    #[serde(default)]
    pub team: TeamSection,
    #[serde(default)]
    pub sensor: SensorSection,
    #[serde(default)]
    pub episode: EpisodeSection,
    #[serde(default)]
    pub allocation: AllocationConfig,
    #[serde(default)]
    pub rrt: RrtConfig,
    #[serde(default)]
    pub output: OutputSection,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSection {
    pub kind: MapKind,
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub file: Option<PathBuf>,
}

impl Default for MapSection {
    fn default() -> Self {
        let m = MapSpec::default();
        Self { kind: m.kind, width: m.width, height: m.height, resolution: m.resolution, file: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeamSection {
    pub robots: usize,
    pub alpha: (f64, f64),
}

impl Default for TeamSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self { robots: d.robots, alpha: d.alpha_range }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    pub radius: f64,
    pub noise: NoiseLevel,
}

impl Default for SensorSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self { radius: d.sensing_radius, noise: d.noise }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSection {
    pub buffer_cap: usize,
    pub completion: f64,
    pub max_ticks: usize,
    pub frontier_radius_factor: f64,
    pub blacklist_ticks: usize,
    pub prior_border: usize,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            buffer_cap: d.buffer_cap,
            completion: d.completion,
            max_ticks: d.max_ticks,
            frontier_radius_factor: d.frontier_radius_factor,
            blacklist_ticks: d.blacklist_ticks,
            prior_border: d.prior_border,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub snapshot_every: usize,
    /// Log filter, e.g. `warn` or `behex_core=debug`.
    pub log: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), snapshot_every: 0, log: "warn".into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub alpha_ranges: Vec<(f64, f64)>,
    pub radii: Vec<f64>,
    pub noise: Vec<NoiseLevel>,
    pub trials: usize,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config {
            path: origin.to_path_buf(),
            msg: e.to_string().trim_end().to_string(),
        })?;
        // Map files are resolved against the config file's directory.
        if let (Some(file), Some(dir)) = (cfg.map.file.as_mut(), origin.parent()) {
            if file.is_relative() {
                *file = dir.join(&*file);
            }
        }
        cfg.sim().validate().map_err(|e| CliError::Config {
            path: origin.to_path_buf(),
            msg: anchor(text, &e.0),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        Self::parse(&text, path)
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            map: MapSpec {
                kind: self.map.kind,
                width: self.map.width,
                height: self.map.height,
                resolution: self.map.resolution,
                file: self.map.file.clone(),
            },
            robots: self.team.robots,
            alpha_range: self.team.alpha,
            sensing_radius: self.sensor.radius,
            noise: self.sensor.noise,
            buffer_cap: self.episode.buffer_cap,
            completion: self.episode.completion,
            max_ticks: self.episode.max_ticks,
            frontier_radius_factor: self.episode.frontier_radius_factor,
            blacklist_ticks: self.episode.blacklist_ticks,
            prior_border: self.episode.prior_border,
            snapshot_every: self.output.snapshot_every,
            allocation: self.allocation.clone(),
            rrt: self.rrt.clone(),
        }
    }

    pub fn sweep_spec(&self) -> Option<SweepSpec> {
        self.sweep.as_ref().map(|s| SweepSpec {
            alpha_ranges: s.alpha_ranges.clone(),
            radii: s.radii.clone(),
            noise: s.noise.clone(),
            trials: s.trials,
        })
    }
}

// Prefixes a validation message with the line of the first key it names.
fn anchor(text: &str, msg: &str) -> String {
    const KEYS: [(&str, &str); 9] = [
        ("robots", "robots"),
        ("alpha", "alpha"),
        ("sensing radius", "radius"),
        ("buffer cap", "buffer_cap"),
        ("completion", "completion"),
        ("frontier radius", "frontier_radius_factor"),
        ("threshold", "threshold"),
        ("period", "period"),
        ("rrt", "step"),
    ];
    let key = KEYS.iter().find(|(needle, _)| msg.contains(needle)).map(|(_, k)| *k);
    let line = key.and_then(|k| {
        text.lines().position(|l| {
            let l = l.trim_start();
            l.starts_with(k) && l[k.len()..].trim_start().starts_with('=')
        })
    });
    match line {
        Some(n) => format!("line {}: {msg}", n + 1),
        None => msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse("seed = 3\n", Path::new("x.toml")).unwrap();
        let s = c.sim();
        assert_eq!(s.seed, 3);
        assert_eq!(s.buffer_cap, 14);
        assert_eq!(s.map.resolution, 0.1);
        assert!(c.sweep.is_none());
    }

    #[test]
    fn missing_seed_is_rejected() {
        let e = RunConfig::parse("[team]\nrobots = 2\n", Path::new("x.toml")).unwrap_err();
        assert!(e.to_string().contains("seed"), "{e}");
    }

    #[test]
    fn validation_errors_name_the_line() {
        let e = RunConfig::parse("seed = 1\n[team]\nrobots = 0\n", Path::new("x.toml")).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = RunConfig::parse("seed = 1\n[sensor]\nnoise = 7\n", Path::new("x.toml")).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn relative_map_file_follows_config() {
        let c = RunConfig::parse("seed = 1\n[map]\nfile = \"m.ogrid\"\n", Path::new("/tmp/cfg/run.toml")).unwrap();
        assert_eq!(c.map.file.unwrap(), PathBuf::from("/tmp/cfg/m.ogrid"));
    }
}
