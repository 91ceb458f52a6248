//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, keys are lowercase
//! snake case and unknown keys are rejected. `--set key=value` overrides
//! are parsed by the same rules.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bloch_core::kinetics::CollisionParams;
use bloch_core::SystemParams;

use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("model", "sde | effective-bloch | ere | modified-ere | memory-kernel | generalized-ere"),
    ("a", "inversion decay rate A"),
    ("gamma_dc", "dephasing-collision rate"),
    ("delta", "light spectrum FWHM (phase diffusion coefficient)"),
    ("omega0", "Rabi frequency"),
    ("n0", "initial inversion"),
    ("q0", "initial effective coherence (effective-bloch)"),
    ("n_traj", "number of stochastic trajectories"),
    ("t_end", "final time"),
    ("dt", "time step"),
    ("seed", "random seed"),
    ("record_every", "write every k-th grid point"),
    ("gamma_21", "downward radiative-collision rate (generalized-ere)"),
    ("gamma_12", "upward radiative-collision rate (generalized-ere)"),
    ("temperature", "temperature [K] fixing gamma_12 by detailed balance"),
    ("omega21", "atomic resonance; rad/s when used with temperature"),
    ("spectrum_file", "two-column (omega, B W) table for memory-kernel"),
    ("t_obs", "observation time of the decorrelation test"),
    ("decorrelation_points", "number of t' values in [0, t_obs]"),
    ("deltas", "comma-separated delta values (fig1a)"),
    ("n_values", "comma-separated trajectory counts (fig2, fig3)"),
];

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    origin: String,
}

/// Unvalidated key/value pairs with their source locations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

fn check_key(key: &str, origin: &str) -> Result<()> {
    let snake = key.starts_with(|c: char| c.is_ascii_lowercase())
        && key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
    if !snake {
        return Err(CliError::config(origin, format!("key `{key}` must be lowercase snake case")));
    }
    if !KEYS.iter().any(|(k, _)| *k == key) {
        return Err(CliError::config(origin, format!("unknown key `{key}`")));
    }
    Ok(())
}

impl RawConfig {
    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let origin = format!("{name}:{}", i + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::config(origin, "expected `key = value`"));
            };
            let key = key.trim();
            check_key(key, &origin)?;
            if let Some(prev) = cfg.entries.get(key) {
                return Err(CliError::config(
                    origin,
                    format!("duplicate key `{key}` (first set at {})", prev.origin),
                ));
            }
            cfg.insert(key, value.trim(), origin);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Apply a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let origin = format!("--set {assignment}");
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(CliError::config(origin, "expected `key=value`"));
        };
        let key = key.trim();
        check_key(key, &origin)?;
        self.insert(key, value.trim(), origin);
        Ok(())
    }

    fn insert(&mut self, key: &str, value: &str, origin: String) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                origin,
            },
        );
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|err| {
                CliError::config(&e.origin, format!("key `{key}`: cannot parse `{}`: {err}", e.value))
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|s| {
                s.trim().parse().map_err(|err| {
                    CliError::config(&e.origin, format!("key `{key}`: cannot parse `{}`: {err}", s.trim()))
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn origin(&self, key: &str) -> String {
        self.entries
            .get(key)
            .map(|e| e.origin.clone())
            .unwrap_or_else(|| "config".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Sde,
    EffectiveBloch,
    Ere,
    ModifiedEre,
    MemoryKernel,
    GeneralizedEre,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Sde => "sde",
            ModelKind::EffectiveBloch => "effective-bloch",
            ModelKind::Ere => "ere",
            ModelKind::ModifiedEre => "modified-ere",
            ModelKind::MemoryKernel => "memory-kernel",
            ModelKind::GeneralizedEre => "generalized-ere",
        }
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "sde" => ModelKind::Sde,
            "effective-bloch" => ModelKind::EffectiveBloch,
            "ere" => ModelKind::Ere,
            "modified-ere" => ModelKind::ModifiedEre,
            "memory-kernel" => ModelKind::MemoryKernel,
            "generalized-ere" => ModelKind::GeneralizedEre,
            other => return Err(format!("unknown model `{other}`")),
        })
    }
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub params: SystemParams,
    pub n0: f64,
    pub q0: f64,
    pub n_traj: u64,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    pub record_every: usize,
    pub collisions: CollisionParams,
    pub omega21: f64,
    pub spectrum_file: Option<PathBuf>,
    pub t_obs: f64,
    pub decorrelation_points: usize,
    pub deltas: Option<Vec<f64>>,
    pub n_values: Option<Vec<u64>>,
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let d = SystemParams::default();
        let params = SystemParams::new(
            raw.get_or("a", d.a)?,
            raw.get_or("gamma_dc", d.gamma_dc)?,
            raw.get_or("delta", d.delta)?,
            raw.get_or("omega0", d.omega0)?,
        )?;
        let positive = |key: &str, v: f64| -> Result<f64> {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::config(raw.origin(key), format!("`{key}` must be > 0")))
            }
        };
        let t_end = positive("t_end", raw.get_or("t_end", 10.0)?)?;
        let dt = positive("dt", raw.get_or("dt", 1e-3)?)?;
        let n0: f64 = raw.get_or("n0", -1.0)?;
        if !(-1.0..=1.0).contains(&n0) {
            return Err(CliError::config(raw.origin("n0"), "`n0` must lie in [-1, 1]"));
        }
        let n_traj: u64 = raw.get_or("n_traj", 10_000)?;
        if n_traj == 0 {
            return Err(CliError::config(raw.origin("n_traj"), "`n_traj` must be >= 1"));
        }
        let omega21 = raw.get_or("omega21", 0.0)?;
        let gamma_21 = raw.get_or("gamma_21", 0.0)?;
        let collisions = match (raw.get::<f64>("gamma_12")?, raw.get::<f64>("temperature")?) {
            (Some(_), Some(_)) => {
                return Err(CliError::config(
                    raw.origin("temperature"),
                    "set either `gamma_12` or `temperature`, not both",
                ))
            }
            (g12, None) => CollisionParams::new(gamma_21, g12.unwrap_or(0.0)),
            (None, Some(t)) => CollisionParams::from_temperature(gamma_21, omega21, t),
        }
        .map_err(|e| CliError::config(raw.origin("gamma_21"), e.to_string()))?;
        let t_obs = positive("t_obs", raw.get_or("t_obs", t_end)?)?;
        let decorrelation_points: usize = raw.get_or("decorrelation_points", 21)?;
        if decorrelation_points < 2 {
            return Err(CliError::config(
                raw.origin("decorrelation_points"),
                "`decorrelation_points` must be >= 2",
            ));
        }
        let deltas: Option<Vec<f64>> = raw.get_list("deltas")?;
        if deltas.as_ref().is_some_and(|v| v.iter().any(|x| !(*x >= 0.0))) {
            return Err(CliError::config(raw.origin("deltas"), "`deltas` must be >= 0"));
        }
        let n_values: Option<Vec<u64>> = raw.get_list("n_values")?;
        if n_values.as_ref().is_some_and(|v| v.contains(&0)) {
            return Err(CliError::config(raw.origin("n_values"), "`n_values` must be >= 1"));
        }
        Ok(Self {
            model: raw.get_or("model", ModelKind::EffectiveBloch)?,
            params,
            n0,
            q0: raw.get_or("q0", 0.0)?,
            n_traj,
            t_end,
            dt,
            seed: raw.get_or("seed", 1)?,
            record_every: raw.get_or::<usize>("record_every", 10)?.max(1),
            collisions,
            omega21,
            spectrum_file: raw.get::<PathBuf>("spectrum_file")?,
            t_obs,
            decorrelation_points,
            deltas,
            n_values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_defaults() {
        let raw = RawConfig::parse("# run\nmodel = ere  # rate eq\n\ndelta = 5\nomega0=2.5\n", "run.cfg").unwrap();
        let cfg = RunConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.model, ModelKind::Ere);
        assert_eq!(cfg.params.delta, 5.0);
        assert_eq!(cfg.params.omega0, 2.5);
        assert_eq!(cfg.params.a, 1.0);
        assert_eq!(cfg.n0, -1.0);
    }

    #[test]
    fn rejects_unknown_and_malformed_keys() {
        let e = RawConfig::parse("delta = 1\nfoo = 2\n", "x.cfg").unwrap_err();
        assert_eq!(e.to_string(), "x.cfg:2: unknown key `foo`");
        assert!(RawConfig::parse("Delta = 1\n", "x.cfg").is_err());
        assert!(RawConfig::parse("delta 1\n", "x.cfg").is_err());
        assert!(RawConfig::parse("delta = 1\ndelta = 2\n", "x.cfg").is_err());
    }

    #[test]
    fn bad_values_name_their_line() {
        let raw = RawConfig::parse("dt = 1e-3\nt_end = soon\n", "x.cfg").unwrap();
        let e = RunConfig::from_raw(&raw).unwrap_err();
        assert!(e.to_string().starts_with("x.cfg:2: key `t_end`"), "{e}");
        assert_eq!(e.exit_code(), 2);
        let raw = RawConfig::parse("delta = -1\n", "x.cfg").unwrap();
        assert!(RunConfig::from_raw(&raw).is_err());
    }

    #[test]
    fn set_overrides_file() {
        let mut raw = RawConfig::parse("delta = 1\n", "x.cfg").unwrap();
        raw.set("delta=7").unwrap();
        raw.set("deltas = 1, 2.5").unwrap();
        let cfg = RunConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.params.delta, 7.0);
        assert_eq!(cfg.deltas, Some(vec![1.0, 2.5]));
        assert!(raw.set("nope=1").is_err());
        assert!(raw.set("delta").is_err());
    }

    #[test]
    fn collisions_from_rates_or_temperature() {
        let raw = RawConfig::parse("gamma_21 = 1\ngamma_12 = 0.5\n", "x").unwrap();
        assert_eq!(RunConfig::from_raw(&raw).unwrap().collisions.gamma_12, 0.5);
        let raw = RawConfig::parse("gamma_21 = 1\ngamma_12 = 2\n", "x").unwrap();
        assert!(RunConfig::from_raw(&raw).is_err());
        let raw = RawConfig::parse("gamma_21 = 1\ntemperature = 300\nomega21 = 0\n", "x").unwrap();
        assert_eq!(RunConfig::from_raw(&raw).unwrap().collisions.gamma_12, 1.0);
        let raw = RawConfig::parse("gamma_12 = 0\ntemperature = 300\n", "x").unwrap();
        assert!(RunConfig::from_raw(&raw).is_err());
    }
}
