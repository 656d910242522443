//! Scenario configuration: TOML schema, load-time validation, and the
//! resolved runtime form (medium, obstacle, source, optical distances,
//! time horizons, sweep grid, output location, and a content hash that is
//! embedded in every artifact the pipeline writes).

use crate::error::{Error, Result};
use crate::geometry::{
    optical_distance_sets, LayeredMedium, ObstacleSpec, OpticalDistances, Point3, Shape,
    SourceBall,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// On-disk schema. Every field maps one-to-one onto a TOML table entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub medium: MediumConfig,
    pub obstacle: ObstacleConfig,
    pub source: SourceConfig,
    #[serde(default)]
    pub time: TimeConfig,
    pub grid: GridConfig,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Seed for every randomized check run against this scenario.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumConfig {
    pub gamma_plus: f64,
    pub gamma_minus: f64,
}

// no deny_unknown_fields here: serde cannot combine it with `flatten`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstacleConfig {
    #[serde(flatten)]
    pub shape: Shape,
    pub contrast: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub center: [f64; 3],
    pub radius: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Observation window T. Omit to use `2 l(D,B) + horizon_margin`.
    pub horizon: Option<f64>,
    /// Margin added to the round-trip optical distance when `horizon` is
    /// omitted.
    pub horizon_margin: Option<f64>,
    /// Extra simulated time past T for the background tail transform.
    pub extension: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    /// Absorbing-layer thickness in cells; defaults to the solver's value.
    pub sponge_cells: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Explicit decay-rate list; mutually exclusive with the geometric spec.
    pub tau: Option<Vec<f64>>,
    pub tau_min: Option<f64>,
    pub tau_max: Option<f64>,
    pub tau_count: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// Fully resolved scenario: validated objects plus derived quantities.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub medium: LayeredMedium,
    pub obstacle: ObstacleSpec,
    pub source: SourceBall,
    pub distances: OpticalDistances,
    /// Observation window T of the indicator.
    pub t_window: f64,
    /// Total simulated time (background tail reaches this far).
    pub t_total: f64,
    pub h: f64,
    pub sponge_cells: usize,
    pub taus: Vec<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// SHA-256 of the raw configuration bytes, hex-encoded.
    pub config_hash: String,
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Configuration(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_bytes(&bytes)
    }

    pub fn from_toml_bytes(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| Error::Configuration(format!("configuration is not UTF-8: {e}")))?;
        let cfg: ScenarioConfig = toml::from_str(text)
            .map_err(|e| Error::Configuration(format!("TOML parse error: {e}")))?;
        let hash = hex_digest(bytes);
        Self::resolve(cfg, hash)
    }

    pub fn resolve(cfg: ScenarioConfig, config_hash: String) -> Result<Self> {
        let medium = LayeredMedium::new(cfg.medium.gamma_plus, cfg.medium.gamma_minus)?;
        let obstacle = ObstacleSpec::new(cfg.obstacle.shape, cfg.obstacle.contrast, &medium)?;
        let source = SourceBall::new(
            Point3::new(cfg.source.center[0], cfg.source.center[1], cfg.source.center[2]),
            cfg.source.radius,
            cfg.source.amplitude,
        )?;
        let distances = optical_distance_sets(&obstacle, &source, &medium)?;

        let t_window = match cfg.time.horizon {
            Some(t) => {
                if !(t > 0.0) {
                    return Err(Error::Configuration(format!(
                        "time.horizon must be positive, got {t}"
                    )));
                }
                t
            }
            None => 2.0 * distances.l_db + cfg.time.horizon_margin.unwrap_or(1.0),
        };
        let extension = cfg.time.extension.unwrap_or(2.0);
        if !(extension > 0.0) {
            return Err(Error::Configuration(format!(
                "time.extension must be positive, got {extension}"
            )));
        }

        if !(cfg.grid.h > 0.0) {
            return Err(Error::Configuration(format!(
                "grid.h must be positive, got {}",
                cfg.grid.h
            )));
        }

        let taus = resolve_sweep(&cfg.sweep)?;

        Ok(Scenario {
            medium,
            obstacle,
            source,
            distances,
            t_window,
            t_total: t_window + extension,
            h: cfg.grid.h,
            sponge_cells: cfg.grid.sponge_cells.unwrap_or(crate::fdtd::SPONGE_CELLS),
            taus,
            seed: cfg.seed,
            output_dir: cfg.output.dir.unwrap_or_else(|| PathBuf::from("out")),
            config_hash,
        })
    }
}

fn resolve_sweep(sweep: &SweepConfig) -> Result<Vec<f64>> {
    match (&sweep.tau, sweep.tau_min, sweep.tau_max, sweep.tau_count) {
        (Some(list), None, None, None) => {
            if list.is_empty() {
                return Err(Error::Configuration("sweep.tau must be non-empty".into()));
            }
            if list.iter().any(|&t| !(t > 0.0)) {
                return Err(Error::Configuration(
                    "sweep.tau entries must be positive".into(),
                ));
            }
            let mut sorted = list.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Ok(sorted)
        }
        (None, Some(lo), Some(hi), Some(n)) => {
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::Configuration(format!(
                    "need 0 < tau_min < tau_max, got {lo}, {hi}"
                )));
            }
            if n < 2 {
                return Err(Error::Configuration("sweep.tau_count must be >= 2".into()));
            }
            Ok(crate::indicator::tau_grid(lo, hi, n))
        }
        _ => Err(Error::Configuration(
            "sweep needs either an explicit tau list or tau_min/tau_max/tau_count".into(),
        )),
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
        seed = 7

        [medium]
        gamma_plus = 1.0
        gamma_minus = 2.0

        [obstacle]
        kind = "ball"
        center = { x1 = 0.0, x2 = 0.0, x3 = -1.5 }
        radius = 0.4
        contrast = -0.8

        [source]
        center = [0.0, 0.0, 1.2]
        radius = 0.3

        [grid]
        h = 0.05

        [sweep]
        tau_min = 10.0
        tau_max = 80.0
        tau_count = 12
    "#;

    #[test]
    fn good_config_resolves() {
        let s = Scenario::from_toml_bytes(GOOD.as_bytes()).unwrap();
        assert_eq!(s.taus.len(), 12);
        assert_eq!(s.seed, 7);
        // auto horizon: 2 l(D,B) + 1, with l(D,B) = 1.1/sqrt(2) + 1.2 - 0.3
        let l_db = 1.1 / 2f64.sqrt() + 0.9;
        approx::assert_relative_eq!(s.t_window, 2.0 * l_db + 1.0, epsilon = 1e-6);
        approx::assert_relative_eq!(s.t_total, s.t_window + 2.0, epsilon = 1e-12);
        assert_eq!(s.config_hash.len(), 64);
    }

    #[test]
    fn layer_order_rejected_at_load() {
        let bad = GOOD.replace("gamma_minus = 2.0", "gamma_minus = 0.5");
        let err = Scenario::from_toml_bytes(bad.as_bytes()).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }

    #[test]
    fn unknown_field_rejected() {
        let bad = format!("{GOOD}\n[extra]\nfoo = 1\n");
        assert!(Scenario::from_toml_bytes(bad.as_bytes()).is_err());
    }

    #[test]
    fn sweep_conflicts_rejected() {
        let bad = GOOD.replace("tau_min = 10.0", "tau = [10.0, 20.0]\ntau_min = 10.0");
        assert!(Scenario::from_toml_bytes(bad.as_bytes()).is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = hex_digest(GOOD.as_bytes());
        let b = hex_digest(GOOD.replace("0.4", "0.41").as_bytes());
        assert_ne!(a, b);
    }
}
