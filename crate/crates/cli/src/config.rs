//! Run configuration: a flat `key = value` file merged with command-line
//! overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use euler1d_core::io::read_user_data;
use euler1d_core::{ScenarioKind, ScenarioSpec, SolverConfig, Storage, System};

use crate::CliError;

pub const DEFAULT_N: usize = 1024;
pub const DEFAULT_T_END: f64 = 10.0;
pub const DEFAULT_OUT: &str = "euler1d-run";
/// Snapshots stored per run when no interval or stride is given.
pub const DEFAULT_SNAPSHOTS: f64 = 50.0;
/// Epsilon used for full-Euler data when none is configured.
pub const DEFAULT_FULL_EPSILON: f64 = 0.1;

/// Keys accepted in config files, with a one-line description each.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("scenario", "scenario name (see list-scenarios)"),
    (
        "param.<name>",
        "scenario parameter override, e.g. param.amplitude = 0.8",
    ),
    (
        "user_data",
        "CSV with columns x,u,eta[,m] for the user_defined scenario",
    ),
    (
        "gamma",
        "adiabatic exponent (default 1.4 for entropy_bump, 3 otherwise)",
    ),
    ("k", "pressure constant K (default 1)"),
    ("c_v", "specific heat (default 1)"),
    ("n", "number of cells (default 1024)"),
    ("x_min", "left end of the domain (default: sized from the horizon)"),
    ("x_max", "right end of the domain"),
    ("cfl", "CFL number (default 0.4)"),
    ("t_end", "final time (default 10)"),
    (
        "interval",
        "store snapshots at multiples of this time (default t_end/50)",
    ),
    ("stride", "store every K-th step instead"),
    ("epsilon", "scaling exponent in (0, 1/4) for the full-Euler monitors"),
    ("out", "output directory (EULER1D_OUT and --out take precedence)"),
    ("seeds", "comma-separated seed points for trace"),
];

/// Everything needed to set up one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub user_data: Option<PathBuf>,
    pub gamma: Option<f64>,
    pub k: Option<f64>,
    pub c_v: Option<f64>,
    pub n: Option<usize>,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub cfl: Option<f64>,
    pub t_end: Option<f64>,
    pub interval: Option<f64>,
    pub stride: Option<usize>,
    pub epsilon: Option<f64>,
    pub out: Option<PathBuf>,
    pub seeds: Vec<f64>,
}

fn num(key: &str, v: &str) -> Result<f64, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{key}: '{v}' is not a number")))
}

fn count(key: &str, v: &str) -> Result<usize, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{key}: '{v}' is not a non-negative integer")))
}

pub fn parse_seeds(v: &str) -> Result<Vec<f64>, CliError> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| num("seeds", s))
        .collect()
}

/// Parses `name=value` from the command line.
pub fn parse_param(s: &str) -> Result<(String, f64), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("expected name=value, got '{s}'")))?;
    Ok((k.trim().to_string(), num(k, v)?))
}

impl RunConfig {
    /// Reads a config file. Relative `user_data` paths resolve against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut c = Self::parse(&text)?;
        if let (Some(rel), Some(base)) = (&c.user_data, path.parent()) {
            if rel.is_relative() {
                c.user_data = Some(base.join(rel));
            }
        }
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut c = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "scenario" => c.scenario = Some(value.to_string()),
                "user_data" => c.user_data = Some(PathBuf::from(value)),
                "gamma" => c.gamma = Some(num(key, value)?),
                "k" => c.k = Some(num(key, value)?),
                "c_v" => c.c_v = Some(num(key, value)?),
                "n" => c.n = Some(count(key, value)?),
                "x_min" => c.x_min = Some(num(key, value)?),
                "x_max" => c.x_max = Some(num(key, value)?),
                "cfl" => c.cfl = Some(num(key, value)?),
                "t_end" => c.t_end = Some(num(key, value)?),
                "interval" => c.interval = Some(num(key, value)?),
                "stride" => c.stride = Some(count(key, value)?),
                "epsilon" => c.epsilon = Some(num(key, value)?),
                "out" => c.out = Some(PathBuf::from(value)),
                "seeds" => c.seeds = parse_seeds(value)?,
                _ => match key.strip_prefix("param.") {
                    Some(name) => {
                        c.params.insert(name.to_string(), num(key, value)?);
                    }
                    None => {
                        return Err(CliError::Usage(format!(
                            "config line {}: unknown key '{key}'",
                            lineno + 1
                        )))
                    }
                },
            }
        }
        Ok(c)
    }

    /// Values set in `other` replace those in `self`.
    pub fn merge(mut self, other: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(scenario, user_data, gamma, k, c_v, n, x_min, x_max, cfl, t_end, interval, stride, epsilon, out);
        self.params.extend(other.params);
        if !other.seeds.is_empty() {
            self.seeds = other.seeds;
        }
        self
    }

    pub fn scenario_name(&self) -> Result<&str, CliError> {
        match (self.scenario.as_deref(), &self.user_data) {
            (Some(s), _) => Ok(s),
            (None, Some(_)) => Ok("user_defined"),
            (None, None) => Err(CliError::Usage(
                "no scenario given (use --scenario or a config file)".into(),
            )),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn spec(&self) -> Result<ScenarioSpec, CliError> {
        let name = self.scenario_name()?;
        let kind = if name == "user_defined" {
            if !self.params.is_empty() {
                return Err(CliError::Usage("user_defined takes no parameters".into()));
            }
            let path = self
                .user_data
                .as_ref()
                .ok_or_else(|| CliError::Usage("user_defined needs --user-data FILE".into()))?;
            read_user_data(path)?
        } else {
            if ScenarioKind::describe(name).is_none() && name != "smooth_bump" {
                return Err(CliError::Usage(format!("unknown scenario '{name}'")));
            }
            ScenarioKind::from_params(name, &self.params).map_err(|e| CliError::Usage(e.to_string()))?
        };
        let default_gamma = if matches!(kind, ScenarioKind::EntropyBump { .. }) {
            1.4
        } else {
            3.0
        };
        let mut spec = ScenarioSpec::new(kind, self.gamma.unwrap_or(default_gamma));
        spec.k = self.k.unwrap_or(1.0);
        spec.c_v = self.c_v.unwrap_or(1.0);
        spec.epsilon = self.epsilon;
        if spec.epsilon.is_none() && spec.system() == System::Full {
            spec.epsilon = Some(DEFAULT_FULL_EPSILON);
        }
        spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(spec)
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let t_end = self.t_end.unwrap_or(DEFAULT_T_END);
        let storage = match (self.interval, self.stride) {
            (Some(_), Some(_)) => return Err(CliError::Usage("give either interval or stride, not both".into())),
            (Some(dt), None) => Storage::Interval(dt),
            (None, Some(k)) => Storage::Stride(k),
            (None, None) if t_end > 0.0 => Storage::Interval(t_end / DEFAULT_SNAPSHOTS),
            (None, None) => Storage::Stride(1),
        };
        let mut c = SolverConfig::default().with_t_end(t_end).with_storage(storage);
        if let Some(cfl) = self.cfl {
            c.cfl = cfl;
        }
        c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(c)
    }

    pub fn grid(&self, spec: &ScenarioSpec, t_end: f64) -> Result<euler1d_core::Grid1D, CliError> {
        if let ScenarioKind::UserDefined { x_min, x_max, u, .. } = &spec.kind {
            if self.x_min.is_some() || self.x_max.is_some() || self.n.is_some_and(|n| n != u.len()) {
                return Err(CliError::Usage(
                    "the user_defined grid is fixed by the data file".into(),
                ));
            }
            return Ok(euler1d_core::Grid1D::new(*x_min, *x_max, u.len())?);
        }
        let n = self.n.unwrap_or(DEFAULT_N);
        let (a, b) = match (self.x_min, self.x_max) {
            (Some(a), Some(b)) => (a, b),
            (None, None) => spec.auto_domain(t_end)?,
            _ => return Err(CliError::Usage("give both x_min and x_max or neither".into())),
        };
        euler1d_core::Grid1D::new(a, b, n).map_err(|e| CliError::Usage(e.to_string()))
    }
}
