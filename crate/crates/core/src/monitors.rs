//! Executable bound checks.
//!
//! [`bound_constants`] turns initial data into explicit bounds: the
//! invariant-domain level `M`, the scaled level `N`, the density floors, and
//! the uniform bounds on `|u|` and `eta` driven by the total variation of the
//! entropy profile. [`check_bounds`] then evaluates every stored time of a
//! history against those bounds, each up to a discretization slack measured by
//! [`refinement_slack`].

use std::fmt;

use crate::error::{domain, Error, Result};
use crate::fields::{check_epsilon, max_of, min_of, FieldSnapshot, Grid1D, System, MIN_CELLS};
use crate::scenario::{ScenarioKind, ScenarioSpec};
use crate::solver::{restrict_to_coarse, run, SolutionHistory, SolverConfig, Storage};
use crate::thermo::GasModel;

/// Margin added to grid maxima so that the strict bounds hold at `t = 0`.
pub const BOUND_MARGIN: f64 = 1e-9;
/// Smallest slack ever used.
pub const SLACK_FLOOR: f64 = 1e-9;
/// Multiplier applied to the observed level-to-level discrepancy.
pub const SLACK_FACTOR: f64 = 3.0;

/// Discretization allowance per monitored quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slack {
    /// Grid max of `alpha`, `beta`.
    pub gradient: f64,
    /// Grid max of `alpha_eps`, `beta_eps`.
    pub scaled: f64,
    /// Grid min of `rho`.
    pub density: f64,
    /// Grid max of `rho^eps u_x`.
    pub weighted: f64,
    /// Grid max of `rho u_x`.
    pub slope: f64,
    /// Grid max of `|u|`.
    pub velocity: f64,
    /// Grid max of `eta`.
    pub eta: f64,
}

impl Slack {
    pub fn uniform(v: f64) -> Self {
        Self {
            gradient: v,
            scaled: v,
            density: v,
            weighted: v,
            slope: v,
            velocity: v,
            eta: v,
        }
    }

    pub fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("gradient", self.gradient),
            ("scaled", self.scaled),
            ("density", self.density),
            ("weighted", self.weighted),
            ("slope", self.slope),
            ("velocity", self.velocity),
            ("eta", self.eta),
        ]
    }

    pub fn max(&self) -> f64 {
        self.entries().iter().fold(0.0, |a, (_, v)| a.max(*v))
    }

    fn validate(&self) -> Result<()> {
        match self.entries().into_iter().find(|(_, v)| !(*v >= 0.0 && v.is_finite())) {
            Some((k, v)) => domain(format!("{k} slack must be finite and non-negative, got {v}")),
            None => Ok(()),
        }
    }
}

/// Bounds computed from initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundConstants {
    pub gamma: f64,
    /// True when the entropy profile is constant.
    pub isentropic: bool,
    /// Grid max of `alpha`, `beta` at `t = 0` plus [`BOUND_MARGIN`].
    pub m: f64,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    /// Level for `alpha_eps`, `beta_eps`.
    pub n: Option<f64>,
    /// `K_tau^(-eps)`: `rho^eps alpha = K_tau^(-eps) alpha_eps`.
    pub rho_conversion: Option<f64>,
    /// `N K_tau^(-eps)`, the level for `rho^eps u_x`.
    pub n0: Option<f64>,
    pub k1: f64,
    pub k1_hat: Option<f64>,
    pub k2_hat: Option<f64>,
    pub m_l: f64,
    pub m_u: f64,
    pub m_s: f64,
    pub m_r: f64,
    pub max_abs_m_x: f64,
    pub v: f64,
    pub v_bar: f64,
    pub l1: f64,
    pub l2: f64,
    pub eta_bound: f64,
    pub u_bound: f64,
    pub tau_max0: f64,
    /// `floor(t) = m1 / (m2 + t)`.
    pub m1: f64,
    pub m2: f64,
    /// `floor(t) = (n1 / (n2 + t))^(1 + delta)`.
    pub n1: Option<f64>,
    pub n2: Option<f64>,
}

impl BoundConstants {
    /// The floor that applies to this data: the scaled one when `epsilon`
    /// is set, otherwise the isentropic one.
    pub fn floor(&self, t: f64) -> f64 {
        match (self.epsilon, self.n0) {
            (Some(eps), Some(n0)) => full_floor(self.tau_max0, n0, eps, t),
            _ => psystem_floor(self.tau_max0, self.m, t),
        }
    }

    pub fn floor_system(&self) -> System {
        if self.epsilon.is_some() {
            System::Full
        } else {
            System::PSystem
        }
    }

    /// Key-value pairs for manifests and reports; absent values are omitted.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("M", self.m),
            ("K1", self.k1),
            ("M_L", self.m_l),
            ("M_U", self.m_u),
            ("M_s", self.m_s),
            ("M_r", self.m_r),
            ("max_abs_m_x", self.max_abs_m_x),
            ("V", self.v),
            ("V_bar", self.v_bar),
            ("L1", self.l1),
            ("L2", self.l2),
            ("eta_bound", self.eta_bound),
            ("u_bound", self.u_bound),
            ("tau_max0", self.tau_max0),
            ("M1", self.m1),
            ("M2", self.m2),
        ];
        let opt = [
            ("epsilon", self.epsilon),
            ("delta", self.delta),
            ("N", self.n),
            ("rho_conversion", self.rho_conversion),
            ("N0", self.n0),
            ("K1_hat", self.k1_hat),
            ("K2_hat", self.k2_hat),
            ("N1", self.n1),
            ("N2", self.n2),
        ];
        out.extend(opt.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))));
        out
    }
}

/// `max{4(gamma+1) K2_hat / eps, 2 K2_hat / (1 - 4 eps/(gamma+1))}`.
pub fn n_threshold(gamma: f64, eps: f64, k2_hat: f64) -> f64 {
    let a = 4.0 * (gamma + 1.0) * k2_hat / eps;
    let b = 2.0 * k2_hat / (1.0 - 4.0 * eps / (gamma + 1.0));
    a.max(b)
}

pub fn delta_of(eps: f64) -> f64 {
    eps / (1.0 - eps)
}

/// `(M_s + V_bar M_r + V_bar (V_bar M_s + V_bar^2 M_r) e^(V_bar^2))`; swap
/// the first two arguments for `L2`.
pub fn l_constant(first: f64, second: f64, v_bar: f64) -> f64 {
    first + v_bar * second + v_bar * (v_bar * first + v_bar * v_bar * second) * (v_bar * v_bar).exp()
}

/// `1 / (tau_max0 + M t)`, or `+inf` when the bound gives nothing.
pub fn psystem_floor(tau_max0: f64, m: f64, t: f64) -> f64 {
    let d = tau_max0 + m.max(0.0) * t;
    1.0 / d
}

/// `(tau_max0^(1-eps) + (1-eps) N0 t)^(-1/(1-eps))`.
pub fn full_floor(tau_max0: f64, n0: f64, eps: f64, t: f64) -> f64 {
    let base = tau_max0.powf(1.0 - eps) + (1.0 - eps) * n0.max(0.0) * t;
    base.powf(-1.0 / (1.0 - eps))
}

/// Density floor at time `t` for the selected system.
pub fn compute_density_floor(constants: &BoundConstants, t: f64, system: System) -> Result<f64> {
    match system {
        System::PSystem => Ok(psystem_floor(constants.tau_max0, constants.m, t)),
        System::Full => match (constants.epsilon, constants.n0) {
            (Some(eps), Some(n0)) => Ok(full_floor(constants.tau_max0, n0, eps, t)),
            _ => Err(Error::Hypothesis("the scaled floor needs epsilon".into())),
        },
    }
}

/// Trapezoidal `int |m_x| / m dx` over the grid nodes.
pub fn entropy_variation(snap: &FieldSnapshot) -> f64 {
    let h = snap.grid().h();
    let f: Vec<f64> = snap.m_x().iter().zip(snap.m()).map(|(d, m)| d.abs() / m).collect();
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    h * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1]))
}

/// Constants from the initial snapshot. `epsilon` is required for data with a
/// non-constant entropy profile.
pub fn bound_constants(init: &FieldSnapshot, epsilon: Option<f64>) -> Result<BoundConstants> {
    if let Some(e) = epsilon {
        check_epsilon(e)?;
    }
    let model: GasModel = *init.model();
    let g = model.gamma();
    if init.eta().iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::Hypothesis("initial density must be positive and finite".into()));
    }
    let m_arr = init.m();
    let m_x = init.m_x();
    let isentropic = m_x.iter().all(|&v| v == 0.0) && m_arr.iter().all(|&v| v == m_arr[0]);
    if !isentropic && epsilon.is_none() {
        return Err(Error::Hypothesis("data with an entropy gradient needs epsilon".into()));
    }
    let alpha = init.alpha();
    let beta = init.beta();
    let m = max_of(alpha).max(max_of(beta)) + BOUND_MARGIN;

    let v = entropy_variation(init);
    if !v.is_finite() {
        return Err(Error::Hypothesis("entropy profile has unbounded variation".into()));
    }
    let v_bar = v / (2.0 * g);
    let m_l = min_of(m_arr);
    let m_u = max_of(m_arr);
    let (s, r) = crate::fields::riemann_invariants(init);
    let m_s = s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let m_r = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let l1 = l_constant(m_s, m_r, v_bar);
    let l2 = l_constant(m_r, m_s, v_bar);
    let half = 0.5 * (l1 + l2);
    let eta_bound = half * m_l.powf(1.0 / (2.0 * g) - 1.0);
    let u_bound = half * m_u.powf(1.0 / (2.0 * g));
    let max_abs_m_x = m_x.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let lead = (g + 1.0) * model.k_c() / (2.0 * (g - 1.0));
    let k1 = lead * eta_bound.powf(2.0 / (g - 1.0));
    let tau_max0 = max_of(&init.tau());
    let m1 = if m > 0.0 { 1.0 / m } else { f64::INFINITY };
    let m2 = if m > 0.0 { tau_max0 / m } else { f64::INFINITY };

    let mut c = BoundConstants {
        gamma: g,
        isentropic,
        m,
        epsilon,
        delta: None,
        n: None,
        rho_conversion: None,
        n0: None,
        k1,
        k1_hat: None,
        k2_hat: None,
        m_l,
        m_u,
        m_s,
        m_r,
        max_abs_m_x,
        v,
        v_bar,
        l1,
        l2,
        eta_bound,
        u_bound,
        tau_max0,
        m1,
        m2,
        n1: None,
        n2: None,
    };
    if let Some(eps) = epsilon {
        let q = 2.0 * eps / (g - 1.0);
        let k1_hat = lead * eta_bound.powf(2.0 / (g - 1.0) * (1.0 - eps));
        let k2_hat = (g - 1.0) / (g * (g + 1.0)) * eta_bound.powf(1.0 + q) * max_abs_m_x;
        let (ae, be) = crate::fields::scaled_gradients(init, eps)?;
        let initial = max_of(&ae).max(max_of(&be));
        let n = n_threshold(g, eps, k2_hat).max(initial) + BOUND_MARGIN;
        let conv = model.k_tau().powf(-eps);
        let n0 = n * conv;
        let rate = (1.0 - eps) * n0;
        c.delta = Some(delta_of(eps));
        c.n = Some(n);
        c.rho_conversion = Some(conv);
        c.n0 = Some(n0);
        c.k1_hat = Some(k1_hat);
        c.k2_hat = Some(k2_hat);
        if rate > 0.0 {
            c.n1 = Some(1.0 / rate);
            c.n2 = Some(tau_max0.powf(1.0 - eps) / rate);
        }
    }
    Ok(c)
}

/// One bit per check; a set bit means the check failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Check {
    InvariantDomain,
    RunningMax,
    ScaledDomain,
    DensityFloor,
    WeightedSlope,
    VelocityBound,
    EtaBound,
    EulerianSlope,
}

impl Check {
    pub const ALL: [Check; 8] = [
        Check::InvariantDomain,
        Check::RunningMax,
        Check::ScaledDomain,
        Check::DensityFloor,
        Check::WeightedSlope,
        Check::VelocityBound,
        Check::EtaBound,
        Check::EulerianSlope,
    ];

    pub fn bit(self) -> u32 {
        1 << (self as u32)
    }

    pub fn name(self) -> &'static str {
        match self {
            Check::InvariantDomain => "invariant_domain",
            Check::RunningMax => "running_max",
            Check::ScaledDomain => "scaled_domain",
            Check::DensityFloor => "density_floor",
            Check::WeightedSlope => "weighted_slope",
            Check::VelocityBound => "velocity_bound",
            Check::EtaBound => "eta_bound",
            Check::EulerianSlope => "eulerian_slope",
        }
    }

    pub fn from_bits(bits: u32) -> Vec<Check> {
        Check::ALL.into_iter().filter(|c| bits & c.bit() != 0).collect()
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Invariant-domain verdict at one stored time. `None` means not applicable.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainVerdict {
    pub t: f64,
    pub max_alpha: f64,
    pub max_beta: f64,
    pub max_alpha_eps: Option<f64>,
    pub max_beta_eps: Option<f64>,
    pub within_m: Option<bool>,
    pub non_increasing: Option<bool>,
    pub within_n: Option<bool>,
}

/// `max{alpha, beta} <= M + slack` (isentropic data), the same quantity
/// non-increasing between stored times up to slack, and
/// `max{alpha_eps, beta_eps} <= N + slack` when epsilon is set.
pub fn check_invariant_domain(
    history: &SolutionHistory,
    constants: &BoundConstants,
    slack: &Slack,
) -> Result<Vec<DomainVerdict>> {
    let mut out: Vec<DomainVerdict> = Vec::with_capacity(history.len());
    let mut prev: Option<f64> = None;
    for snap in history.snapshots() {
        let max_alpha = max_of(snap.alpha());
        let max_beta = max_of(snap.beta());
        let both = max_alpha.max(max_beta);
        let (max_alpha_eps, max_beta_eps, within_n) = match (constants.epsilon, constants.n) {
            (Some(eps), Some(n)) => {
                let (ae, be) = crate::fields::scaled_gradients(snap, eps)?;
                let (a, b) = (max_of(&ae), max_of(&be));
                (Some(a), Some(b), Some(a.max(b) <= n + slack.scaled))
            }
            _ => (None, None, None),
        };
        let (within_m, non_increasing) = if constants.isentropic {
            (
                Some(both <= constants.m + slack.gradient),
                Some(prev.is_none_or(|p| both <= p + slack.gradient)),
            )
        } else {
            (None, None)
        };
        prev = Some(both);
        out.push(DomainVerdict {
            t: snap.t(),
            max_alpha,
            max_beta,
            max_alpha_eps,
            max_beta_eps,
            within_m,
            non_increasing,
            within_n,
        });
    }
    Ok(out)
}

/// Pointwise Eulerian slope `u_y = rho u_x`.
pub fn eulerian_slope(rho: &[f64], ux: &[f64]) -> Vec<f64> {
    rho.iter().zip(ux).map(|(r, d)| r * d).collect()
}

/// Per-time measurements and verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeRecord {
    pub t: f64,
    pub min_rho: f64,
    pub floor: f64,
    pub max_alpha: f64,
    pub max_beta: f64,
    /// NaN when epsilon is not set.
    pub max_alpha_eps: f64,
    pub max_beta_eps: f64,
    pub max_ux: f64,
    /// NaN when epsilon is not set.
    pub max_rho_eps_ux: f64,
    pub max_u_y: f64,
    pub u_y_bound: f64,
    pub max_abs_u: f64,
    pub max_eta: f64,
    pub eta_bound: f64,
    pub u_bound: f64,
    pub verdict_bits: u32,
}

impl TimeRecord {
    pub fn passed(&self) -> bool {
        self.verdict_bits == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub t: f64,
    pub check: Check,
    pub value: f64,
    pub bound: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at t={}: value {:.6e} exceeds bound {:.6e}",
            self.check, self.t, self.value, self.bound
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    pub scenario: String,
    pub gamma: f64,
    pub epsilon: Option<f64>,
    pub constants: BoundConstants,
    pub slack: Slack,
    pub records: Vec<TimeRecord>,
    pub first_violation: Option<Violation>,
    pub all_pass: bool,
    pub exponent: Option<DecayFit>,
}

impl MonitorReport {
    /// Union of all failed checks.
    pub fn failed_checks(&self) -> Vec<Check> {
        Check::from_bits(self.records.iter().fold(0, |a, r| a | r.verdict_bits))
    }

    pub fn min_rho_series(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.records.iter().map(|r| r.t).collect(),
            self.records.iter().map(|r| r.min_rho).collect(),
        )
    }

    /// Human-readable summary.
    pub fn summary(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let eps = self.epsilon.map_or("none".to_string(), |e| e.to_string());
        let _ = writeln!(
            s,
            "scenario: {}  gamma: {}  epsilon: {}",
            self.scenario, self.gamma, eps
        );
        let _ = writeln!(s, "stored times: {}", self.records.len());
        for (k, v) in self.slack.entries() {
            let _ = writeln!(s, "  slack.{k} = {v:.3e}");
        }
        for (k, v) in self.constants.entries() {
            let _ = writeln!(s, "  {k} = {v:.9e}");
        }
        for c in Check::ALL {
            let fails = self.records.iter().filter(|r| r.verdict_bits & c.bit() != 0).count();
            let _ = writeln!(
                s,
                "  {:<17} {}",
                c.name(),
                if fails == 0 {
                    "pass".into()
                } else {
                    format!("FAIL at {fails} times")
                }
            );
        }
        if let Some(fit) = &self.exponent {
            let _ = writeln!(
                s,
                "decay exponent over [{}, {}]: {:.6} (max residual {:.3e})",
                fit.t_a, fit.t_b, fit.exponent, fit.max_residual
            );
        }
        match &self.first_violation {
            Some(v) => {
                let _ = writeln!(s, "first violation: {v}");
            }
            None => {
                let _ = writeln!(s, "all checks pass");
            }
        }
        s
    }

    /// `{"scenario":...,"gamma":...,"epsilon":...,"exponent":...,"all_pass":...}`.
    pub fn json_fields(&self) -> (String, f64, Option<f64>, Option<f64>, bool) {
        (
            self.scenario.clone(),
            self.gamma,
            self.epsilon,
            self.exponent.as_ref().map(|f| f.exponent),
            self.all_pass,
        )
    }
}

/// Evaluates every check at every stored time.
pub fn check_bounds(
    history: &SolutionHistory,
    constants: &BoundConstants,
    scenario: &str,
    slack: &Slack,
) -> Result<MonitorReport> {
    slack.validate()?;
    let domain_verdicts = check_invariant_domain(history, constants, slack)?;
    let mut records = Vec::with_capacity(history.len());
    let mut first: Option<Violation> = None;
    for (snap, dv) in history.snapshots().iter().zip(&domain_verdicts) {
        let t = snap.t();
        let rho = snap.rho();
        let min_rho = min_of(&rho);
        let max_rho = max_of(&rho);
        let ux = snap.ux();
        let max_ux = max_of(ux);
        let floor = constants.floor(t);
        let u_y = eulerian_slope(&rho, ux);
        let max_u_y = max_of(&u_y);
        let (max_rho_eps_ux, u_y_bound) = match (constants.epsilon, constants.n0) {
            (Some(eps), Some(n0)) => {
                let w = rho
                    .iter()
                    .zip(ux)
                    .map(|(r, d)| r.powf(eps) * d)
                    .fold(f64::NEG_INFINITY, f64::max);
                let hi = rho.iter().map(|r| r.powf(1.0 - eps)).fold(f64::NEG_INFINITY, f64::max);
                let lo = rho.iter().map(|r| r.powf(1.0 - eps)).fold(f64::INFINITY, f64::min);
                let bound = if constants.isentropic {
                    (constants.m * max_rho)
                        .max(constants.m * min_rho)
                        .min((n0 * hi).max(n0 * lo))
                } else {
                    (n0 * hi).max(n0 * lo)
                };
                (w, bound)
            }
            _ => (f64::NAN, (constants.m * max_rho).max(constants.m * min_rho)),
        };
        let max_abs_u = snap.u().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let max_eta = max_of(snap.eta());

        let mut bits = 0u32;
        let mut flag = |check: Check, failed: bool, value: f64, bound: f64| {
            if failed {
                bits |= check.bit();
                if first.is_none() {
                    first = Some(Violation { t, check, value, bound });
                }
            }
        };
        let both = dv.max_alpha.max(dv.max_beta);
        if let Some(ok) = dv.within_m {
            flag(Check::InvariantDomain, !ok, both, constants.m + slack.gradient);
        }
        if let Some(ok) = dv.non_increasing {
            flag(Check::RunningMax, !ok, both, f64::NAN);
        }
        if let (Some(ok), Some(a), Some(b), Some(n)) = (dv.within_n, dv.max_alpha_eps, dv.max_beta_eps, constants.n) {
            flag(Check::ScaledDomain, !ok, a.max(b), n + slack.scaled);
        }
        flag(
            Check::DensityFloor,
            !(min_rho >= floor - slack.density),
            min_rho,
            floor - slack.density,
        );
        if let Some(n0) = constants.n0 {
            flag(
                Check::WeightedSlope,
                !(max_rho_eps_ux <= n0 + slack.weighted),
                max_rho_eps_ux,
                n0 + slack.weighted,
            );
        }
        let u_lim = constants.u_bound + slack.velocity;
        flag(Check::VelocityBound, !(max_abs_u <= u_lim), max_abs_u, u_lim);
        let eta_lim = constants.eta_bound + slack.eta;
        flag(Check::EtaBound, !(max_eta <= eta_lim), max_eta, eta_lim);
        let slope_lim = u_y_bound + slack.slope;
        flag(Check::EulerianSlope, !(max_u_y <= slope_lim), max_u_y, slope_lim);

        records.push(TimeRecord {
            t,
            min_rho,
            floor,
            max_alpha: dv.max_alpha,
            max_beta: dv.max_beta,
            max_alpha_eps: dv.max_alpha_eps.unwrap_or(f64::NAN),
            max_beta_eps: dv.max_beta_eps.unwrap_or(f64::NAN),
            max_ux,
            max_rho_eps_ux,
            max_u_y,
            u_y_bound,
            max_abs_u,
            max_eta,
            eta_bound: constants.eta_bound,
            u_bound: constants.u_bound,
            verdict_bits: bits,
        });
    }
    let all_pass = records.iter().all(TimeRecord::passed);
    let exponent = default_window(&history.times()).and_then(|(a, b)| {
        let (t, v): (Vec<f64>, Vec<f64>) = records.iter().map(|r| (r.t, r.min_rho)).unzip();
        fit_decay_exponent(&t, &v, a, b).ok()
    });
    Ok(MonitorReport {
        scenario: scenario.to_string(),
        gamma: constants.gamma,
        epsilon: constants.epsilon,
        constants: constants.clone(),
        slack: *slack,
        records,
        first_violation: first,
        all_pass,
        exponent,
    })
}

/// Grid-level quantities compared across a refinement study.
fn study_quantities(snap: &FieldSnapshot, eps: Option<f64>) -> Result<Vec<f64>> {
    let rho = snap.rho();
    let ux = snap.ux();
    let mut q = vec![
        max_of(snap.alpha()),
        max_of(snap.beta()),
        min_of(&rho),
        max_of(&eulerian_slope(&rho, ux)),
        snap.u().iter().fold(0.0f64, |a, v| a.max(v.abs())),
        max_of(snap.eta()),
    ];
    if let Some(e) = eps {
        let (ae, be) = crate::fields::scaled_gradients(snap, e)?;
        q.push(max_of(&ae));
        q.push(max_of(&be));
        q.push(
            rho.iter()
                .zip(ux)
                .map(|(r, d)| r.powf(e) * d)
                .fold(f64::NEG_INFINITY, f64::max),
        );
    }
    Ok(q)
}

/// Slack from a refinement study: for each monitored quantity,
/// [`SLACK_FACTOR`] times its largest difference between consecutive levels
/// at the stored times those levels share, floored at [`SLACK_FLOOR`].
///
/// Levels are ordered coarse to fine and must store at common times (use
/// interval storage). Only shared times are compared, so levels that stopped
/// early still contribute.
pub fn refinement_slack(levels: &[&SolutionHistory], epsilon: Option<f64>) -> Result<Slack> {
    if levels.len() < 2 {
        return Err(Error::InvalidConfig(
            "a refinement study needs at least two levels".into(),
        ));
    }
    let mut worst = [0.0f64; 9];
    for pair in levels.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let mut matched = 0usize;
        for sa in a.snapshots() {
            let tol = 1e-9 * sa.t().abs().max(1.0);
            let Some(sb) = b.snapshots().iter().find(|s| (s.t() - sa.t()).abs() <= tol) else {
                continue;
            };
            matched += 1;
            let qa = study_quantities(sa, epsilon)?;
            let qb = study_quantities(sb, epsilon)?;
            for (k, (x, y)) in qa.iter().zip(&qb).enumerate() {
                let d = (x - y).abs();
                if d.is_finite() {
                    worst[k] = worst[k].max(d);
                }
            }
        }
        if matched == 0 {
            return Err(Error::InvalidConfig("refinement levels share no stored times".into()));
        }
    }
    let f = |v: f64| (SLACK_FACTOR * v).max(SLACK_FLOOR);
    Ok(Slack {
        gradient: f(worst[0].max(worst[1])),
        density: f(worst[2]),
        slope: f(worst[3]),
        velocity: f(worst[4]),
        eta: f(worst[5]),
        scaled: f(worst[6].max(worst[7])),
        weighted: f(worst[8]),
    })
}

/// Same scenario on the grid with half as many cells over the same domain.
/// User samples are restricted with the fourth-order midpoint rule.
pub fn coarsen(spec: &ScenarioSpec, grid: &Grid1D) -> Result<(ScenarioSpec, Grid1D)> {
    let n = grid.n();
    if !n.is_multiple_of(2) || n / 2 < MIN_CELLS {
        return Err(Error::InvalidConfig(format!("cannot coarsen a grid of {n} cells")));
    }
    let coarse = Grid1D::new(grid.x_min(), grid.x_max(), n / 2)?;
    let mut spec = spec.clone();
    if let ScenarioKind::UserDefined { u, eta, m, .. } = &mut spec.kind {
        let r = |f: &Vec<f64>| restrict_to_coarse(f, f[0], f[f.len() - 1]);
        *u = r(u);
        *eta = r(eta);
        *m = r(m);
    }
    Ok((spec, coarse))
}

/// Runs the two coarser levels of a three-level study and returns the slack
/// measured against `fine`, which must be the run of `spec` on `grid` with
/// `config`. Stride storage is replaced by interval storage for the coarse
/// runs so that the levels share stored times; `fine` must already store on
/// such an interval for the study to have common times.
pub fn study_slack(
    spec: &ScenarioSpec,
    grid: &Grid1D,
    config: &SolverConfig,
    fine: &SolutionHistory,
    epsilon: Option<f64>,
) -> Result<Slack> {
    let (mid_spec, mid_grid) = coarsen(spec, grid)?;
    let (low_spec, low_grid) = coarsen(&mid_spec, &mid_grid)?;
    let mid = run(&mid_spec, mid_grid, config)?;
    let low = run(&low_spec, low_grid, config)?;
    refinement_slack(&[&low, &mid, fine], epsilon)
}

/// Interval storage used for studies: the configured interval, or
/// `t_end / 50` when the configuration stores by stride.
pub fn study_storage(config: &SolverConfig) -> Storage {
    match config.storage {
        Storage::Interval(dt) => Storage::Interval(dt),
        Storage::Stride(_) if config.t_end > 0.0 => Storage::Interval(config.t_end / 50.0),
        Storage::Stride(k) => Storage::Stride(k),
    }
}

/// Least-squares fit of `ln(min rho)` against `ln(1 + t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub exponent: f64,
    pub intercept: f64,
    pub max_residual: f64,
    pub t_a: f64,
    pub t_b: f64,
    pub points: usize,
}

/// `[5, 50]` when the series reaches 50; otherwise `[t_b/10, t_b]` with
/// `t_b` the last time, when that satisfies the window rules.
pub fn default_window(times: &[f64]) -> Option<(f64, f64)> {
    let last = *times.last()?;
    if last >= 50.0 {
        Some((5.0, 50.0))
    } else if last >= 10.0 {
        Some((last / 10.0, last))
    } else {
        None
    }
}

pub fn fit_decay_exponent(times: &[f64], values: &[f64], t_a: f64, t_b: f64) -> Result<DecayFit> {
    if times.len() != values.len() {
        return domain("times and values differ in length");
    }
    if !(t_a >= 1.0 && t_b >= 10.0 * t_a) {
        return Err(Error::Window { t_a, t_b });
    }
    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
        return Err(Error::Window { t_a, t_b });
    };
    let tol = 1e-9 * t_b;
    if t_a < first - tol || t_b > last + tol {
        return Err(Error::Window { t_a, t_b });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t >= t_a - tol && t <= t_b + tol {
            if !(v > 0.0) {
                return domain(format!("series must be positive, got {v} at t={t}"));
            }
            xs.push((1.0 + t).ln());
            ys.push(v.ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::Window { t_a, t_b });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - exponent * x).abs())
        .fold(0.0, f64::max);
    Ok(DecayFit {
        exponent,
        intercept,
        max_residual,
        t_a,
        t_b,
        points: xs.len(),
    })
}

/// Deliberately corrupted histories for detector sanity checks.
pub mod fixtures {
    use super::*;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Mutation {
        /// Velocity doubled: `alpha`, `beta` leave the invariant domain.
        DoubleVelocity,
        /// Density divided by ten everywhere: drops below the floor.
        DensityCollapse,
        /// Velocity shifted by twice the uniform bound.
        VelocityOffset,
    }

    impl Mutation {
        pub const ALL: [Mutation; 3] = [
            Mutation::DoubleVelocity,
            Mutation::DensityCollapse,
            Mutation::VelocityOffset,
        ];

        /// The check this mutation must trip.
        pub fn target(self) -> Check {
            match self {
                Mutation::DoubleVelocity => Check::InvariantDomain,
                Mutation::DensityCollapse => Check::DensityFloor,
                Mutation::VelocityOffset => Check::VelocityBound,
            }
        }

        pub fn name(self) -> &'static str {
            match self {
                Mutation::DoubleVelocity => "double_velocity",
                Mutation::DensityCollapse => "density_collapse",
                Mutation::VelocityOffset => "velocity_offset",
            }
        }
    }

    /// Applies `mutation` to snapshot `index`.
    pub fn inject(
        history: &SolutionHistory,
        mutation: Mutation,
        index: usize,
        constants: &BoundConstants,
    ) -> Result<SolutionHistory> {
        let snap = history
            .snapshots()
            .get(index)
            .ok_or_else(|| Error::InvalidConfig(format!("no snapshot {index}")))?;
        let g = snap.model().gamma();
        let (u, eta) = match mutation {
            Mutation::DoubleVelocity => (snap.u().iter().map(|v| 2.0 * v).collect(), snap.eta().to_vec()),
            Mutation::DensityCollapse => {
                let f = 10f64.powf(-(g - 1.0) / 2.0);
                (snap.u().to_vec(), snap.eta().iter().map(|e| e * f).collect())
            }
            Mutation::VelocityOffset => {
                let shift = 2.0 * constants.u_bound.max(1.0);
                (snap.u().iter().map(|v| v + shift).collect(), snap.eta().to_vec())
            }
        };
        history.with_replaced(index, snap.with_fields(u, eta)?)
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::{inject, Mutation};
    use super::*;
    use crate::fields::testing::frame;
    use crate::fields::EdgeState;
    use crate::solver::run_from;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn uniform(system: System, t_end: f64) -> SolutionHistory {
        let edge = EdgeState {
            u: 0.0,
            eta: 1.0,
            m: 1.0,
        };
        let fr = frame(-5.0, 5.0, 32, 3.0, system, edge);
        let init = FieldSnapshot::from_arrays(fr, 0.0, vec![0.0; 32], vec![1.0; 32], vec![1.0; 32]).unwrap();
        run_from(
            init,
            &SolverConfig::default()
                .with_t_end(t_end)
                .with_storage(Storage::Interval(0.5)),
        )
        .unwrap()
    }

    #[test]
    fn m_con_threshold_and_delta() {
        assert_relative_eq!(n_threshold(3.0, 0.2, 1.0), 80.0, max_relative = 1e-15);
        assert_relative_eq!(delta_of(0.2), 0.25, max_relative = 1e-15);
        for eps in [1e-3, 0.1, 0.2, 0.2499] {
            assert!(delta_of(eps) > 0.0 && delta_of(eps) < 1.0 / 3.0);
        }
    }

    #[test]
    fn floors() {
        assert_eq!(psystem_floor(1.0, 0.5, 0.0), 1.0);
        assert_relative_eq!(psystem_floor(1.0, 0.5, 2.0), 0.5, max_relative = 1e-15);
        // small eps approaches the p-system formula
        let p = psystem_floor(1.3, 0.7, 4.0);
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
            let d = (full_floor(1.3, 0.7, eps, 4.0) - p).abs();
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 1e-7);
        // doubling M halves the asymptotic slope
        let t = 1e9;
        assert_relative_eq!(
            1.0 / psystem_floor(1.0, 1.0, t) / (1.0 / psystem_floor(1.0, 0.5, t)),
            2.0,
            max_relative = 1e-8
        );
    }

    proptest! {
        #[test]
        fn floors_strictly_decrease(tau in 0.1f64..10.0, m in 0.01f64..10.0, eps in 0.01f64..0.249, t in 0.0f64..100.0, dt in 0.01f64..10.0) {
            prop_assert!(psystem_floor(tau, m, t + dt) < psystem_floor(tau, m, t));
            prop_assert!(full_floor(tau, m, eps, t + dt) < full_floor(tau, m, eps, t));
        }

        #[test]
        fn n1_n2_form_matches(tau in 0.1f64..10.0, n0 in 0.01f64..10.0, eps in 0.01f64..0.249, t in 0.0f64..100.0) {
            let rate = (1.0 - eps) * n0;
            let (n1, n2) = (1.0 / rate, tau.powf(1.0 - eps) / rate);
            let direct = full_floor(tau, n0, eps, t);
            let form = (n1 / (n2 + t)).powf(1.0 + delta_of(eps));
            prop_assert!((direct - form).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn isentropic_constants_reduce() {
        let spec = ScenarioSpec::builtin("double_rarefaction", 3.0).unwrap();
        let h = run(
            &spec,
            spec.auto_grid(256, 0.0).unwrap(),
            &SolverConfig::default().with_t_end(0.0),
        )
        .unwrap();
        let c = bound_constants(h.initial(), None).unwrap();
        assert!(c.isentropic);
        assert_eq!((c.v, c.v_bar), (0.0, 0.0));
        assert_eq!((c.l1, c.l2), (c.m_s, c.m_r));
        assert_eq!((c.m_l, c.m_u), (1.0, 1.0));
        assert_relative_eq!(c.eta_bound, 0.5 * (c.m_s + c.m_r), max_relative = 1e-15);
        // nodes straddle the peak of sech^2
        assert!(c.m <= 0.5 + 1e-6 && c.m > 0.5 - 2e-3, "M = {}", c.m);
        assert_relative_eq!(c.m1, 1.0 / c.m);
        assert_relative_eq!(c.floor(0.0), 1.0 / c.tau_max0);
        assert!(c.n.is_none() && c.floor_system() == System::PSystem);
    }

    #[test]
    fn entropy_constants() {
        let spec = ScenarioSpec::builtin("entropy_bump", 1.4).unwrap().with_epsilon(0.1);
        let h = run(
            &spec,
            spec.auto_grid(2048, 0.0).unwrap(),
            &SolverConfig::default().with_t_end(0.0),
        )
        .unwrap();
        assert!(bound_constants(h.initial(), None).is_err());
        assert!(bound_constants(h.initial(), Some(0.3)).is_err());
        let c = bound_constants(h.initial(), Some(0.1)).unwrap();
        assert!(!c.isentropic);
        assert_relative_eq!(c.v, 2.0 * 1.1f64.ln(), max_relative = 1e-4);
        let k2 = c.k2_hat.unwrap();
        assert!(k2 > 0.0);
        assert!(c.n.unwrap() > n_threshold(1.4, 0.1, k2));
        let model = h.initial().model();
        assert_relative_eq!(
            c.n0.unwrap(),
            c.n.unwrap() * model.k_tau().powf(-0.1),
            max_relative = 1e-15
        );
        let (n1, n2) = (c.n1.unwrap(), c.n2.unwrap());
        for t in [0.0, 1.0, 10.0] {
            assert_relative_eq!(
                c.floor(t),
                (n1 / (n2 + t)).powf(1.0 + c.delta.unwrap()),
                max_relative = 1e-12
            );
        }
        assert!(c.l1 > c.m_s && c.l2 > c.m_r);
    }

    #[test]
    fn uniform_state_passes_trivially() {
        let h = uniform(System::PSystem, 2.0);
        let c = bound_constants(h.initial(), None).unwrap();
        assert_eq!(c.m, BOUND_MARGIN);
        let r = check_bounds(&h, &c, "uniform", &Slack::uniform(SLACK_FLOOR)).unwrap();
        assert!(r.all_pass, "{}", r.summary());
        assert!(r.records.iter().all(|rec| rec.max_alpha == 0.0 && rec.max_beta == 0.0));
        assert!(r.first_violation.is_none());
        assert!(r.exponent.is_none());
        // |u| <= (M_s + M_r)/2 with equality in eta
        assert_relative_eq!(c.eta_bound, 1.0, max_relative = 1e-15);
        let c_eps = bound_constants(h.initial(), Some(0.2)).unwrap();
        assert!(
            check_bounds(&h, &c_eps, "uniform", &Slack::uniform(SLACK_FLOOR))
                .unwrap()
                .all_pass
        );
    }

    #[test]
    fn eulerian_identity() {
        assert_eq!(eulerian_slope(&[2.0], &[3.0]), vec![6.0]);
    }

    #[test]
    fn decay_fits() {
        let t: Vec<f64> = (0..=100).map(|k| k as f64 * 0.5).collect();
        let a: Vec<f64> = t.iter().map(|t| 1.0 / (1.0 + t)).collect();
        let b: Vec<f64> = t.iter().map(|t| (1.0 + t).powf(-1.25)).collect();
        let fa = fit_decay_exponent(&t, &a, 5.0, 50.0).unwrap();
        assert!((fa.exponent + 1.0).abs() < 1e-12 && fa.max_residual < 1e-12);
        assert!((fit_decay_exponent(&t, &b, 5.0, 50.0).unwrap().exponent + 1.25).abs() < 1e-12);
        assert!(matches!(
            fit_decay_exponent(&t, &a, 0.5, 50.0),
            Err(Error::Window { .. })
        ));
        assert!(matches!(
            fit_decay_exponent(&t, &a, 5.0, 40.0),
            Err(Error::Window { .. })
        ));
        assert!(matches!(
            fit_decay_exponent(&t, &a, 6.0, 60.0),
            Err(Error::Window { .. })
        ));
        assert_eq!(default_window(&t), Some((5.0, 50.0)));
        assert_eq!(default_window(&[0.0, 20.0]), Some((2.0, 20.0)));
        assert_eq!(default_window(&[0.0, 5.0]), None);
    }

    #[test]
    fn slack_study_rejects_disjoint_levels() {
        let a = uniform(System::PSystem, 1.0);
        assert!(refinement_slack(&[&a], None).is_err());
        assert_eq!(refinement_slack(&[&a, &a], None).unwrap(), Slack::uniform(SLACK_FLOOR));
    }

    #[test]
    fn study_slack_shrinks_with_resolution() {
        let spec = ScenarioSpec::builtin("double_rarefaction", 3.0).unwrap();
        let cfg = SolverConfig::default()
            .with_t_end(2.0)
            .with_storage(Storage::Interval(0.5));
        // grid extrema are sampled with O(h^2) error, so each doubling cuts
        // the slack by about four
        let mut prev: Option<Slack> = None;
        for n in [128, 256, 512] {
            let grid = spec.auto_grid(n, 2.0).unwrap();
            let fine = run(&spec, grid, &cfg).unwrap();
            let s = study_slack(&spec, &grid, &cfg, &fine, None).unwrap();
            if let Some(p) = prev {
                assert!(s.gradient < p.gradient / 3.0, "{s:?} after {p:?}");
                assert!(s.density < p.density / 3.0, "{s:?} after {p:?}");
            }
            prev = Some(s);
        }
        assert!(prev.unwrap().density < 5e-3);
        let user = ScenarioSpec::new(
            ScenarioKind::UserDefined {
                x_min: -1.0,
                x_max: 1.0,
                u: vec![0.0; 64],
                eta: vec![1.0; 64],
                m: vec![1.0; 64],
            },
            3.0,
        );
        let (c, g) = coarsen(&user, &Grid1D::new(-1.0, 1.0, 64).unwrap()).unwrap();
        assert_eq!(g.n(), 32);
        assert!(matches!(c.kind, ScenarioKind::UserDefined { ref u, .. } if u.len() == 32));
        assert!(coarsen(&user, &Grid1D::new(-1.0, 1.0, 16).unwrap()).is_err());
        assert_eq!(
            study_storage(&SolverConfig::default().with_t_end(5.0)),
            Storage::Interval(0.1)
        );
    }

    #[test]
    fn mutations_trip_their_checks() {
        let spec = ScenarioSpec::builtin("double_rarefaction", 3.0).unwrap();
        let cfg = SolverConfig::default()
            .with_t_end(2.0)
            .with_storage(Storage::Interval(0.5));
        let h = run(&spec, spec.auto_grid(256, 2.0).unwrap(), &cfg).unwrap();
        let c = bound_constants(h.initial(), None).unwrap();
        let clean = check_bounds(&h, &c, "double_rarefaction", &Slack::uniform(1e-4)).unwrap();
        assert!(clean.all_pass, "{}", clean.summary());
        for m in Mutation::ALL {
            let bad = inject(&h, m, 2, &c).unwrap();
            let r = check_bounds(&bad, &c, "double_rarefaction", &Slack::uniform(1e-4)).unwrap();
            assert!(!r.all_pass);
            assert!(r.records[2].verdict_bits & m.target().bit() != 0, "{:?}", m);
            assert!(r.records[1].passed());
            assert_eq!(r.first_violation.as_ref().unwrap().t, 1.0);
        }
    }
}
