//! Flat `section.key = value` scenario files.
//!
//! All quantities are in canonical units with ħ = 1: `K = P/ħ` is a
//! wavenumber, so `σ_X σ_K ≥ 1/2` and every probe obeys `δ δ̃ ≥ 1/2`.

use std::collections::BTreeMap;
use std::fmt;

use qnd_core::gaussian_prep::ProbePairPreparation;
use qnd_core::moments::{
    canonicalize, validate_scenario, Couplings, CrossCovariances, Ordering, ProbeMoments, Scenario, SystemMoments, Variable,
};
use qnd_core::oracle::{DEFAULT_EXTENT_SIGMAS, DEFAULT_N, DEFAULT_TOLERANCE};

use crate::error::CliError;

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "system.sigma_x",
    "system.sigma_k",
    "system.mean_x",
    "system.mean_k",
    "probe_x.delta",
    "probe_x.delta_tilde",
    "probe_x.mean_j",
    "probe_x.mean_phi",
    "probe_x.resolution",
    "probe_k.delta",
    "probe_k.delta_tilde",
    "probe_k.mean_j",
    "probe_k.mean_phi",
    "probe_k.resolution",
    "cross.kappa",
    "cross.xi",
    "prep.delta_k",
    "prep.delta_tilde_x",
    "prep.r",
    "coupling.lambda_x",
    "coupling.lambda_k",
    "coupling.ordering",
    "grid.n",
    "grid.extent_sigmas",
    "run.tolerance",
    "run.samples",
    "run.seed",
];

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_SEED: u64 = 1;

/// Where a value came from, for error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Override => f.write_str("--set"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Origin)>,
}

fn syntax(origin: Origin, msg: impl Into<String>) -> CliError {
    CliError::Config(format!("{origin}: {}", msg.into()))
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let origin = Origin::Line(i + 1);
            let Some((key, value)) = content.split_once('=') else {
                return Err(syntax(origin, format!("expected `section.key = value`, found `{content}`")));
            };
            let key = key.trim();
            if raw.entries.contains_key(key) {
                return Err(syntax(origin, format!("key `{key}` is set twice")));
            }
            raw.insert(key, value.trim(), origin)?;
        }
        Ok(raw)
    }

    fn insert(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), CliError> {
        if !KEYS.contains(&key) {
            return Err(syntax(origin, format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(syntax(origin, format!("key `{key}` has no value")));
        }
        self.entries.insert(key.to_string(), (value.to_string(), origin));
        Ok(())
    }

    /// Applies a `KEY=VALUE` override; later overrides win.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(syntax(Origin::Override, format!("expected KEY=VALUE, found `{assignment}`")));
        };
        self.insert(key.trim(), value.trim(), Origin::Override)
    }

    fn has_section(&self, section: &str) -> Option<&str> {
        self.entries.keys().find(|k| k.starts_with(section)).map(String::as_str)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, origin)) => v.parse().map(Some).map_err(|_| syntax(*origin, format!("key `{key}`: cannot parse `{v}`"))),
        }
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        self.get(key)?.ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.get(key)?.unwrap_or(default))
    }
}

/// Probe moments given directly or through the Gaussian preparation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeSource {
    Moments { probe_x: ProbeMoments, probe_k: ProbeMoments, cross: CrossCovariances },
    Prep { prep: ProbePairPreparation, resolutions: (f64, f64) },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub system: SystemMoments,
    pub probes: ProbeSource,
    pub couplings: Couplings,
    pub grid_n: usize,
    pub extent_sigmas: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub seed: u64,
}

fn parse_ordering(raw: &RawConfig) -> Result<Ordering, CliError> {
    match raw.entries.get("coupling.ordering") {
        None => Ok(Ordering::XthenK),
        Some((v, origin)) => parse_ordering_name(v)
            .ok_or_else(|| syntax(*origin, format!("key `coupling.ordering`: expected one of xk, kx, joint, found `{v}`"))),
    }
}

pub fn parse_ordering_name(v: &str) -> Option<Ordering> {
    match v {
        "xk" => Some(Ordering::XthenK),
        "kx" => Some(Ordering::KthenX),
        "joint" => Some(Ordering::Joint),
        _ => None,
    }
}

fn probe(raw: &RawConfig, section: &str, label: Variable) -> Result<ProbeMoments, CliError> {
    let delta: f64 = raw.require(&format!("{section}.delta"))?;
    let delta_tilde = raw.or(&format!("{section}.delta_tilde"), 0.5 / delta)?;
    Ok(ProbeMoments::new(label, delta, delta_tilde)
        .with_biases(raw.or(&format!("{section}.mean_j"), 0.0)?, raw.or(&format!("{section}.mean_phi"), 0.0)?)
        .with_resolution(raw.or(&format!("{section}.resolution"), 0.0)?))
}

impl Config {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let sigma_x: f64 = raw.require("system.sigma_x")?;
        let system = SystemMoments::new(sigma_x, raw.or("system.sigma_k", 0.5 / sigma_x)?)
            .with_means(raw.or("system.mean_x", 0.0)?, raw.or("system.mean_k", 0.0)?);

        let probes = if let Some(prep_key) = raw.has_section("prep.") {
            let clash =
                raw.entries.keys().find(|k| (k.starts_with("probe_") && !k.ends_with(".resolution")) || k.starts_with("cross."));
            if let Some(other) = clash {
                return Err(CliError::Config(format!(
                    "`{prep_key}` and `{other}` conflict: a preparation block fixes all probe moments except the readout resolutions"
                )));
            }
            let prep = ProbePairPreparation::new(
                raw.require("prep.delta_k")?,
                raw.require("prep.delta_tilde_x")?,
                raw.require("prep.r")?,
            )?;
            ProbeSource::Prep { prep, resolutions: (raw.or("probe_x.resolution", 0.0)?, raw.or("probe_k.resolution", 0.0)?) }
        } else {
            ProbeSource::Moments {
                probe_x: probe(raw, "probe_x", Variable::X)?,
                probe_k: probe(raw, "probe_k", Variable::K)?,
                cross: CrossCovariances::new(raw.or("cross.kappa", 0.0)?, raw.or("cross.xi", 0.0)?),
            }
        };
        let couplings =
            Couplings::new(raw.or("coupling.lambda_x", 1.0)?, raw.or("coupling.lambda_k", 1.0)?, parse_ordering(raw)?);
        let config = Config {
            system,
            probes,
            couplings,
            grid_n: raw.or("grid.n", DEFAULT_N)?,
            extent_sigmas: raw.or("grid.extent_sigmas", DEFAULT_EXTENT_SIGMAS)?,
            tolerance: raw.or("run.tolerance", DEFAULT_TOLERANCE)?,
            samples: raw.or("run.samples", DEFAULT_SAMPLES)?,
            seed: raw.or("run.seed", DEFAULT_SEED)?,
        };
        if !(config.tolerance > 0.0) {
            return Err(CliError::Config("run.tolerance must be positive".into()));
        }
        config.scenario()?;
        Ok(config)
    }

    /// Physical scenario, validated.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let s = match self.probes {
            ProbeSource::Moments { probe_x, probe_k, cross } => {
                Scenario::new(self.system, probe_x, probe_k, cross, self.couplings)
            }
            ProbeSource::Prep { prep, resolutions } => prep.to_scenario(self.system, resolutions, self.couplings)?,
        };
        let report = validate_scenario(&s);
        if !report.passed() {
            let detail: Vec<String> = report.violations.iter().map(|v| format!("{} ({})", v.name, v.detail)).collect();
            return Err(CliError::Config(format!("scenario violates {}", detail.join("; "))));
        }
        Ok(s)
    }

    /// Canonical scenario with the matching canonical preparation.
    pub fn canonical(&self) -> Result<(Scenario, Option<ProbePairPreparation>), CliError> {
        let s = self.scenario()?;
        let s = if s.canonical { s } else { canonicalize(&s)? };
        let prep = match self.probes {
            ProbeSource::Prep { prep, .. } => Some(prep.canonicalize(self.couplings.lambda_x, self.couplings.lambda_k)?),
            ProbeSource::Moments { .. } => None,
        };
        Ok((s, prep))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Config, CliError> {
        Config::from_raw(&RawConfig::parse(text)?)
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c =
            parse("system.sigma_x = 0.7071067811865476\nprobe_x.delta = 0.5\nprobe_k.delta = 0.5 # pointer spread\n").unwrap();
        let (s, prep) = c.canonical().unwrap();
        assert!(prep.is_none());
        assert_eq!(s.cross, CrossCovariances::default());
        assert_eq!(s.probe_x.delta_tilde, 1.0);
        assert_eq!(s.probe_k.resolution, 0.0);
        assert_eq!((s.couplings.lambda_x, s.couplings.lambda_k), (1.0, 1.0));
        assert_eq!(s.ordering(), Ordering::XthenK);
        assert_eq!(c.grid_n, DEFAULT_N);
    }

    #[test]
    fn errors_name_key_and_line() {
        let e = parse("system.sigma_x = 1\n\nsystem.sigma_z = 2\n").unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("system.sigma_z"), "{e}");
        let e = parse("system.sigma_x = one\n").unwrap_err().to_string();
        assert!(e.contains("line 1") && e.contains("system.sigma_x"), "{e}");
        let e = parse("system.sigma_x 1\n").unwrap_err().to_string();
        assert!(e.contains("line 1"), "{e}");
    }

    #[test]
    fn cauchy_schwarz_is_named() {
        let e = parse("system.sigma_x = 1\nprobe_x.delta = 0.5\nprobe_k.delta = 0.5\ncross.kappa = 2\n").unwrap_err();
        assert!(e.to_string().contains("cauchy_schwarz_kappa"), "{e}");
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn preparation_block() {
        let c = parse("system.sigma_x = 0.7071067811865476\nprep.delta_k = 1\nprep.delta_tilde_x = 1\nprep.r = -0.4\nprobe_k.resolution = 0.1\n").unwrap();
        let (s, prep) = c.canonical().unwrap();
        assert!((s.cross.kappa + 0.4).abs() < 1e-15);
        assert_eq!(s.probe_k.resolution, 0.1);
        assert!(prep.is_some());
        let e = parse("system.sigma_x = 1\nprep.delta_k = 1\nprep.delta_tilde_x = 1\nprep.r = 0\ncross.xi = 0\n").unwrap_err();
        assert!(e.to_string().contains("conflict"), "{e}");
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut raw = RawConfig::parse("system.sigma_x = 1\nprobe_x.delta = 0.5\nprobe_k.delta = 0.5\n").unwrap();
        raw.set("coupling.ordering=joint").unwrap();
        raw.set("system.sigma_x = 2").unwrap();
        let c = Config::from_raw(&raw).unwrap();
        assert_eq!(c.couplings.ordering, Ordering::Joint);
        assert_eq!(c.system.sigma_x, 2.0);
        assert!(raw.set("grid.size=3").unwrap_err().to_string().contains("--set"));
    }
}
