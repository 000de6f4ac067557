//! Flat `key = value` run configuration.
//!
//! One entry per line, `#` starts a comment, grids are comma separated. The
//! echo written with every run parses back to the same configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::env_model::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::estimators::{RegimeRule, Sampler};
use crate::exact_fl::Beta;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!("unknown format `{other}` (json|csv)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvironmentSpec,
    pub regime: RegimeRule,
    pub n_grid: Vec<usize>,
    pub m_samples: u64,
    pub s_grid: Vec<f64>,
    /// `N` of the end window used by `pgf`.
    pub theta_window: usize,
    /// Observation time of `pgf` and `lst`.
    pub transform_n: usize,
    pub beta_grid: Vec<Beta>,
    pub duality_n: usize,
    pub duality_i: usize,
    pub strata_n: usize,
    pub strata_i: usize,
    pub strata_windows: Vec<usize>,
    pub strata_beta: Beta,
    pub horizon: usize,
    pub x_grid: Vec<f64>,
    pub oracle_reps: u64,
    pub seed: u64,
    pub shards: usize,
    pub sampler: Sampler,
    pub allow_violation: bool,
    pub out: Option<PathBuf>,
    pub format: Format,
}

/// Every accepted key, in echo order.
pub const KEYS: [&str; 27] = [
    "family",
    "sigma",
    "halfwidth",
    "step",
    "regime",
    "regime_param",
    "n_grid",
    "m_samples",
    "s_grid",
    "theta_N",
    "transform_n",
    "beta_grid",
    "duality_n",
    "duality_i",
    "strata_n",
    "strata_i",
    "strata_N",
    "strata_beta",
    "horizon",
    "x_grid",
    "oracle_reps",
    "seed",
    "shards",
    "sampler",
    "allow_violation",
    "out",
    "format",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|t| !t.trim().is_empty()).map(|t| num(key, t)).collect()
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Raw entries before interpretation; later entries override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Entries(BTreeMap<String, String>);

impl Entries {
    pub fn parse(text: &str) -> Result<Self> {
        let mut e = Entries::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1)))?;
            e.set(k.trim(), v.trim())?;
        }
        Ok(e)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.0.insert(key.to_string(), value.to_string());
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|s| s.as_str())
    }
}

impl RunConfig {
    /// The default configuration with the mandatory seed filled in.
    pub fn with_seed(seed: u64) -> Self {
        RunConfig {
            env: EnvironmentSpec::default(),
            regime: RegimeRule::EndWindow(3),
            n_grid: (8..=13).map(|k| 1usize << k).collect(),
            m_samples: 100_000,
            s_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            theta_window: 3,
            transform_n: 1024,
            beta_grid: vec![Beta::Finite(1e-4), Beta::Finite(1e-2), Beta::Finite(1.0), Beta::Finite(100.0), Beta::Infinite],
            duality_n: 64,
            duality_i: 48,
            strata_n: 256,
            strata_i: 192,
            strata_windows: vec![5, 20],
            strata_beta: Beta::Finite(1.0),
            horizon: 10_000,
            x_grid: (0..=6).map(|k| k as f64 * 0.5).collect(),
            oracle_reps: 20_000,
            seed,
            shards: 1,
            sampler: Sampler::default(),
            allow_violation: false,
            out: None,
            format: Format::Json,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_entries(&Entries::parse(text)?)
    }

    pub fn from_entries(e: &Entries) -> Result<Self> {
        let seed = e.get("seed").ok_or_else(|| Error::Config("`seed` is mandatory".into())).and_then(|v| num("seed", v))?;
        let mut c = RunConfig::with_seed(seed);

        let family = e.get("family").unwrap_or("gaussian");
        let param_key = match family {
            "gaussian" => "sigma",
            "uniform" => "halfwidth",
            "two_point" => "step",
            other => return Err(Error::Config(format!("unknown family `{other}` (gaussian|uniform|two_point)"))),
        };
        for k in ["sigma", "halfwidth", "step"] {
            if k != param_key && e.get(k).is_some() {
                return Err(Error::Config(format!("`{k}` does not apply to family `{family}`")));
            }
        }
        let p: f64 = e.get(param_key).map(|v| num(param_key, v)).transpose()?.unwrap_or(1.0);
        c.env = match family {
            "gaussian" => EnvironmentSpec::Gaussian { sigma: p },
            "uniform" => EnvironmentSpec::UniformSymmetric { halfwidth: p },
            _ => EnvironmentSpec::TwoPoint { step: p },
        };
        c.env.check_params()?;

        let kind = e.get("regime").unwrap_or(c.regime.name());
        let default_param = match kind {
            "proportional" => 0.5,
            "fixed" => 2.0,
            _ => 3.0,
        };
        let rp = e.get("regime_param").map(|v| num("regime_param", v)).transpose()?.unwrap_or(default_param);
        c.regime = RegimeRule::parse(kind, rp)?;

        macro_rules! scalar {
            ($field:ident, $key:literal) => {
                if let Some(v) = e.get($key) {
                    c.$field = num($key, v)?;
                }
            };
        }
        macro_rules! grid {
            ($field:ident, $key:literal) => {
                if let Some(v) = e.get($key) {
                    c.$field = list($key, v)?;
                }
            };
        }
        grid!(n_grid, "n_grid");
        scalar!(m_samples, "m_samples");
        grid!(s_grid, "s_grid");
        scalar!(theta_window, "theta_N");
        scalar!(transform_n, "transform_n");
        if let Some(v) = e.get("beta_grid") {
            c.beta_grid = v.split(',').filter(|t| !t.trim().is_empty()).map(Beta::parse).collect::<Result<_>>().map_err(as_config)?;
        }
        scalar!(duality_n, "duality_n");
        scalar!(duality_i, "duality_i");
        scalar!(strata_n, "strata_n");
        scalar!(strata_i, "strata_i");
        grid!(strata_windows, "strata_N");
        if let Some(v) = e.get("strata_beta") {
            c.strata_beta = Beta::parse(v).map_err(as_config)?;
        }
        scalar!(horizon, "horizon");
        grid!(x_grid, "x_grid");
        scalar!(oracle_reps, "oracle_reps");
        scalar!(shards, "shards");
        if let Some(v) = e.get("sampler") {
            c.sampler = Sampler::parse(v)?;
        }
        scalar!(allow_violation, "allow_violation");
        c.out = e.get("out").filter(|v| !v.is_empty()).map(PathBuf::from);
        if let Some(v) = e.get("format") {
            c.format = Format::parse(v)?;
        }
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return bad("n_grid must be nonempty with positive entries");
        }
        if self.m_samples < 2 || self.oracle_reps < 2 {
            return bad("m_samples and oracle_reps must be at least 2");
        }
        if self.s_grid.is_empty() || self.s_grid.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return bad("s_grid must be nonempty within [0, 1]");
        }
        if self.beta_grid.is_empty() {
            return bad("beta_grid must be nonempty");
        }
        if self.shards == 0 {
            return bad("shards must be at least 1");
        }
        if self.horizon == 0 || self.x_grid.iter().any(|x| !x.is_finite()) {
            return bad("horizon must be positive and x_grid finite");
        }
        if self.strata_windows.is_empty() {
            return bad("strata_N must be nonempty");
        }
        Ok(())
    }

    /// The configuration as `key = value` text that [`RunConfig::parse`] reads back.
    pub fn echo(&self) -> String {
        let mut lines = vec![
            format!("family = {}", self.env.family_name()),
            format!(
                "{} = {}",
                match self.env {
                    EnvironmentSpec::Gaussian { .. } => "sigma",
                    EnvironmentSpec::UniformSymmetric { .. } => "halfwidth",
                    EnvironmentSpec::TwoPoint { .. } => "step",
                },
                self.env.param()
            ),
            format!("regime = {}", self.regime.name()),
            format!("regime_param = {}", self.regime.param()),
            format!("n_grid = {}", join(&self.n_grid)),
            format!("m_samples = {}", self.m_samples),
            format!("s_grid = {}", join(&self.s_grid)),
            format!("theta_N = {}", self.theta_window),
            format!("transform_n = {}", self.transform_n),
            format!("beta_grid = {}", join(&self.beta_grid)),
            format!("duality_n = {}", self.duality_n),
            format!("duality_i = {}", self.duality_i),
            format!("strata_n = {}", self.strata_n),
            format!("strata_i = {}", self.strata_i),
            format!("strata_N = {}", join(&self.strata_windows)),
            format!("strata_beta = {}", self.strata_beta),
            format!("horizon = {}", self.horizon),
            format!("x_grid = {}", join(&self.x_grid)),
            format!("oracle_reps = {}", self.oracle_reps),
            format!("seed = {}", self.seed),
            format!("shards = {}", self.shards),
            format!("sampler = {}", self.sampler.name()),
            format!("allow_violation = {}", self.allow_violation),
        ];
        if let Some(p) = &self.out {
            lines.push(format!("out = {}", p.display()));
        }
        lines.push(format!("format = {}", self.format.name()));
        lines.join("\n") + "\n"
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    }
}
