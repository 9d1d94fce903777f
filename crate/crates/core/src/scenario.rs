//! Built-in initial data.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{EdgeState, EntropyProfile, FieldSnapshot, Frame, Grid1D, System};
use crate::thermo::GasModel;

/// Half-width, in units of the profile width, outside which every built-in
/// profile equals its far-field value to below 1e-9 relative.
const SUPPORT_WIDTHS: f64 = 12.0;

/// Extra room on each side of the support, as a multiple of `c_max * t_end`.
const DOMAIN_SPEED_MARGIN: f64 = 1.2;

/// `eta` of unit density at `K = 1`, `gamma = 1.4`: `2 sqrt(1.4) / 0.4`.
const ENTROPY_BUMP_ETA0: f64 = 5.916079783099616;

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    /// `u = A tanh(x/w)`, uniform eta and entropy.
    DoubleRarefaction { amplitude: f64, width: f64, eta0: f64 },
    /// `u = -A tanh(x/w)`, uniform eta and entropy.
    CompressivePulse { amplitude: f64, width: f64, eta0: f64 },
    /// `u = A sin(k x) exp(-(x/w)^2)`, uniform eta and entropy.
    SmoothBump {
        amplitude: f64,
        wavenumber: f64,
        width: f64,
        eta0: f64,
    },
    /// `m = 1 + a exp(-(x/w)^2)` with eta chosen so the pressure is uniform,
    /// plus a rarefying velocity `u = A tanh(x/w)`.
    EntropyBump {
        entropy_amplitude: f64,
        width: f64,
        velocity_amplitude: f64,
        eta0: f64,
    },
    /// Node samples supplied by the caller on the run's grid.
    UserDefined {
        x_min: f64,
        x_max: f64,
        u: Vec<f64>,
        eta: Vec<f64>,
        m: Vec<f64>,
    },
}

pub const BUILTIN_NAMES: [&str; 5] = [
    "double_rarefaction",
    "compressive_pulse",
    "smooth_periodicish_bump",
    "entropy_bump",
    "user_defined",
];

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::DoubleRarefaction { .. } => "double_rarefaction",
            ScenarioKind::CompressivePulse { .. } => "compressive_pulse",
            ScenarioKind::SmoothBump { .. } => "smooth_periodicish_bump",
            ScenarioKind::EntropyBump { .. } => "entropy_bump",
            ScenarioKind::UserDefined { .. } => "user_defined",
        }
    }

    pub fn describe(name: &str) -> Option<&'static str> {
        Some(match name {
            "double_rarefaction" => "u = A tanh(x/w); two rarefaction waves moving apart (amplitude, width, eta0)",
            "compressive_pulse" => "u = -A tanh(x/w); converging flow, gradient blowup in finite time (amplitude, width, eta0)",
            "smooth_periodicish_bump" => {
                "u = A sin(k x) exp(-(x/w)^2); localized oscillation (amplitude, wavenumber, width, eta0)"
            }
            "entropy_bump" => {
                "m = 1 + a exp(-(x/w)^2), pressure-balanced eta, u = A tanh(x/w) (entropy_amplitude, width, velocity_amplitude, eta0)"
            }
            "user_defined" => "node samples of u, eta, m read from a CSV with columns x,u,eta,m",
            _ => return None,
        })
    }

    /// Built-in scenario with default parameters.
    pub fn default_for(name: &str) -> Result<Self> {
        Ok(match name {
            "double_rarefaction" => ScenarioKind::DoubleRarefaction {
                amplitude: 0.5,
                width: 1.0,
                eta0: 1.0,
            },
            "compressive_pulse" => ScenarioKind::CompressivePulse {
                amplitude: 0.5,
                width: 1.0,
                eta0: 1.0,
            },
            "smooth_periodicish_bump" | "smooth_bump" => ScenarioKind::SmoothBump {
                amplitude: 0.2,
                wavenumber: 1.0,
                width: 3.0,
                eta0: 1.0,
            },
            // eta0 gives unit background density for gamma = 1.4.
            "entropy_bump" => ScenarioKind::EntropyBump {
                entropy_amplitude: 0.1,
                width: 1.0,
                velocity_amplitude: 0.5,
                eta0: ENTROPY_BUMP_ETA0,
            },
            "user_defined" => {
                return Err(Error::InvalidScenario("user_defined needs sampled arrays".into()));
            }
            other => return Err(Error::InvalidScenario(format!("unknown scenario '{other}'"))),
        })
    }

    /// Built-in scenario with defaults overridden by `params`. Unknown keys are rejected.
    pub fn from_params(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let mut kind = Self::default_for(name)?;
        for (key, &value) in params {
            let slot = kind
                .param_mut(key)
                .ok_or_else(|| Error::InvalidScenario(format!("scenario '{name}' has no parameter '{key}'")))?;
            *slot = value;
        }
        Ok(kind)
    }

    fn param_mut(&mut self, key: &str) -> Option<&mut f64> {
        match (self, key) {
            (ScenarioKind::DoubleRarefaction { amplitude, .. }, "amplitude")
            | (ScenarioKind::CompressivePulse { amplitude, .. }, "amplitude")
            | (ScenarioKind::SmoothBump { amplitude, .. }, "amplitude") => Some(amplitude),
            (ScenarioKind::DoubleRarefaction { width, .. }, "width")
            | (ScenarioKind::CompressivePulse { width, .. }, "width")
            | (ScenarioKind::SmoothBump { width, .. }, "width")
            | (ScenarioKind::EntropyBump { width, .. }, "width") => Some(width),
            (ScenarioKind::DoubleRarefaction { eta0, .. }, "eta0")
            | (ScenarioKind::CompressivePulse { eta0, .. }, "eta0")
            | (ScenarioKind::SmoothBump { eta0, .. }, "eta0")
            | (ScenarioKind::EntropyBump { eta0, .. }, "eta0") => Some(eta0),
            (ScenarioKind::SmoothBump { wavenumber, .. }, "wavenumber") => Some(wavenumber),
            (ScenarioKind::EntropyBump { entropy_amplitude, .. }, "entropy_amplitude") => Some(entropy_amplitude),
            (ScenarioKind::EntropyBump { velocity_amplitude, .. }, "velocity_amplitude") => Some(velocity_amplitude),
            _ => None,
        }
    }

    /// Named numeric parameters, for manifests.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            ScenarioKind::DoubleRarefaction { amplitude, width, eta0 }
            | ScenarioKind::CompressivePulse { amplitude, width, eta0 } => {
                vec![("amplitude", amplitude), ("width", width), ("eta0", eta0)]
            }
            ScenarioKind::SmoothBump {
                amplitude,
                wavenumber,
                width,
                eta0,
            } => {
                vec![
                    ("amplitude", amplitude),
                    ("wavenumber", wavenumber),
                    ("width", width),
                    ("eta0", eta0),
                ]
            }
            ScenarioKind::EntropyBump {
                entropy_amplitude,
                width,
                velocity_amplitude,
                eta0,
            } => vec![
                ("entropy_amplitude", entropy_amplitude),
                ("width", width),
                ("velocity_amplitude", velocity_amplitude),
                ("eta0", eta0),
            ],
            ScenarioKind::UserDefined { .. } => Vec::new(),
        }
    }

    fn width(&self) -> f64 {
        match *self {
            ScenarioKind::DoubleRarefaction { width, .. }
            | ScenarioKind::CompressivePulse { width, .. }
            | ScenarioKind::SmoothBump { width, .. }
            | ScenarioKind::EntropyBump { width, .. } => width,
            ScenarioKind::UserDefined { .. } => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if let ScenarioKind::UserDefined {
            x_min,
            x_max,
            u,
            eta,
            m,
        } = self
        {
            if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
                return bad(format!("bad domain [{x_min}, {x_max}]"));
            }
            if u.len() != eta.len() || u.len() != m.len() || u.is_empty() {
                return bad("user arrays must be non-empty and of equal length".into());
            }
            if eta.iter().chain(m.iter()).any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad("user eta and m must be positive and finite".into());
            }
            if u.iter().any(|v| !v.is_finite()) {
                return bad("user velocity must be finite".into());
            }
            return Ok(());
        }
        for (key, v) in self.params() {
            if !v.is_finite() {
                return bad(format!("parameter {key} is not finite"));
            }
        }
        if !(self.width() > 0.0) {
            return bad(format!("width must be positive, got {}", self.width()));
        }
        let eta0 = self
            .params()
            .iter()
            .find(|(k, _)| *k == "eta0")
            .map(|p| p.1)
            .unwrap_or(1.0);
        if !(eta0 > 0.0) {
            return bad(format!("eta0 must be positive (density away from vacuum), got {eta0}"));
        }
        if let ScenarioKind::EntropyBump { entropy_amplitude, .. } = *self {
            if !(entropy_amplitude > -1.0) {
                return bad(format!("entropy_amplitude must exceed -1, got {entropy_amplitude}"));
            }
        }
        Ok(())
    }

    /// Analytic profile `(u, eta, m)` at `x` for the built-in kinds.
    fn profile(&self, x: f64, gamma: f64) -> (f64, f64, f64) {
        match *self {
            ScenarioKind::DoubleRarefaction { amplitude, width, eta0 } => (amplitude * (x / width).tanh(), eta0, 1.0),
            ScenarioKind::CompressivePulse { amplitude, width, eta0 } => (-amplitude * (x / width).tanh(), eta0, 1.0),
            ScenarioKind::SmoothBump {
                amplitude,
                wavenumber,
                width,
                eta0,
            } => {
                let z = x / width;
                (amplitude * (wavenumber * x).sin() * (-z * z).exp(), eta0, 1.0)
            }
            ScenarioKind::EntropyBump {
                entropy_amplitude,
                width,
                velocity_amplitude,
                eta0,
            } => {
                let z = x / width;
                let m = 1.0 + entropy_amplitude * (-z * z).exp();
                // m^2 eta^(2 gamma/(gamma-1)) constant keeps the pressure uniform.
                let eta = eta0 * m.powf(-(gamma - 1.0) / gamma);
                (velocity_amplitude * z.tanh(), eta, m)
            }
            ScenarioKind::UserDefined { .. } => unreachable!("user data is sampled, not analytic"),
        }
    }

    pub fn system(&self) -> System {
        match self {
            ScenarioKind::EntropyBump { .. } => System::Full,
            ScenarioKind::UserDefined { m, .. } if m.iter().any(|&v| v != 1.0) => System::Full,
            _ => System::PSystem,
        }
    }
}

/// Scenario together with the gas parameters and optional epsilon.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub gamma: f64,
    pub k: f64,
    pub c_v: f64,
    pub epsilon: Option<f64>,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, gamma: f64) -> Self {
        Self {
            kind,
            gamma,
            k: 1.0,
            c_v: 1.0,
            epsilon: None,
        }
    }

    pub fn builtin(name: &str, gamma: f64) -> Result<Self> {
        Ok(Self::new(ScenarioKind::default_for(name)?, gamma))
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = Some(eps);
        self
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn model(&self) -> Result<GasModel> {
        GasModel::new(self.k, self.gamma, self.c_v)
    }

    pub fn system(&self) -> System {
        self.kind.system()
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?;
        if let Some(eps) = self.epsilon {
            crate::fields::check_epsilon(eps)?;
        }
        self.kind.validate()
    }

    /// Half-width of the region where the initial data differ from the far field.
    pub fn support_half_width(&self) -> f64 {
        let w = self.kind.width();
        match &self.kind {
            ScenarioKind::UserDefined { x_min, x_max, .. } => 0.5 * (x_max - x_min),
            ScenarioKind::SmoothBump { .. } => 0.5 * SUPPORT_WIDTHS * w,
            _ => SUPPORT_WIDTHS * w,
        }
    }

    /// Largest initial wave speed, probed on a fine sampling of the support.
    pub fn initial_max_speed(&self) -> Result<f64> {
        let model = self.model()?;
        let g = self.gamma;
        if let ScenarioKind::UserDefined { eta, m, .. } = &self.kind {
            return Ok(eta
                .iter()
                .zip(m)
                .map(|(&e, &m)| model.wave_speed_unchecked(e, m))
                .fold(0.0, f64::max));
        }
        let half = self.support_half_width();
        let probes = 4001;
        Ok((0..probes)
            .map(|i| -half + 2.0 * half * i as f64 / (probes - 1) as f64)
            .map(|x| {
                let (_, e, m) = self.kind.profile(x, g);
                model.wave_speed_unchecked(e, m)
            })
            .fold(0.0, f64::max))
    }

    /// Symmetric domain wide enough that signals leaving the support do not
    /// reach the boundary before `t_end`.
    pub fn auto_domain(&self, t_end: f64) -> Result<(f64, f64)> {
        self.validate()?;
        if let ScenarioKind::UserDefined { x_min, x_max, .. } = &self.kind {
            return Ok((*x_min, *x_max));
        }
        let half = self.support_half_width() + DOMAIN_SPEED_MARGIN * self.initial_max_speed()? * t_end.max(0.0);
        Ok((-half, half))
    }

    pub fn auto_grid(&self, n: usize, t_end: f64) -> Result<Grid1D> {
        let (a, b) = self.auto_domain(t_end)?;
        Grid1D::new(a, b, n)
    }
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (gamma = {}", self.name(), self.gamma)?;
        for (k, v) in self.kind.params() {
            write!(f, ", {k} = {v}")?;
        }
        write!(f, ")")
    }
}

/// Samples the scenario on `grid` and returns the `t = 0` snapshot.
pub fn init_scenario(spec: &ScenarioSpec, grid: Grid1D) -> Result<FieldSnapshot> {
    spec.validate()?;
    let model = spec.model()?;
    let n = grid.n();
    let (u, eta, m) = match &spec.kind {
        ScenarioKind::UserDefined {
            u,
            eta,
            m,
            x_min,
            x_max,
        } => {
            if u.len() != n || *x_min != grid.x_min() || *x_max != grid.x_max() {
                return Err(Error::InvalidScenario("user samples do not match the grid".into()));
            }
            (u.clone(), eta.clone(), m.clone())
        }
        kind => {
            let mut u = Vec::with_capacity(n);
            let mut eta = Vec::with_capacity(n);
            let mut m = Vec::with_capacity(n);
            for x in grid.nodes() {
                let (a, b, c) = kind.profile(x, spec.gamma);
                u.push(a);
                eta.push(b);
                m.push(c);
            }
            (u, eta, m)
        }
    };
    let edge = |i: usize| EdgeState {
        u: u[i],
        eta: eta[i],
        m: m[i],
    };
    let frame = Frame {
        grid,
        model,
        system: spec.system(),
        left: edge(0),
        right: edge(n - 1),
    };
    let entropy = Arc::new(EntropyProfile::new(m, &frame)?);
    FieldSnapshot::new(Arc::new(frame), entropy, 0.0, u, eta)
}
