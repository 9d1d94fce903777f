//! Characteristic tracing and Riccati integration along characteristics.
//!
//! A stored [`SolutionHistory`] is read as a space-time field: cubic Lagrange
//! in `x` on each snapshot, then cubic Lagrange in `t` across the four stored
//! snapshots around the query time. Paths follow `dx/dt = +c` (forward family)
//! or `dx/dt = -c` (backward family) with RK4 steps that never straddle a
//! stored time, so the interpolant is a single polynomial inside every step.

use crate::error::{domain, Error, Result};
use crate::fields::{check_epsilon, interp_space, System};
use crate::solver::SolutionHistory;
use crate::thermo::GasModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `dx/dt = +c`, carries `s` and `alpha`.
    Forward,
    /// `dx/dt = -c`, carries `r` and `beta`.
    Backward,
}

impl Family {
    pub fn sign(self) -> f64 {
        match self {
            Family::Forward => 1.0,
            Family::Backward => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Forward => "forward",
            Family::Backward => "backward",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "forward" | "+" | "plus" => Ok(Family::Forward),
            "backward" | "-" | "minus" => Ok(Family::Backward),
            other => Err(Error::Parse(format!("unknown family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ForwardInTime,
    BackwardInTime,
}

/// Coefficients of the Riccati equations at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiCoefficients {
    pub k1: f64,
    pub k2: f64,
    pub k1_eps: f64,
    pub k2_eps: f64,
}

impl RiccatiCoefficients {
    /// `eps = None` leaves the scaled coefficients as NaN.
    pub fn at(model: &GasModel, eta: f64, m_x: f64, eps: Option<f64>) -> Self {
        let g = model.gamma();
        let lead = (g + 1.0) * model.k_c() / (2.0 * (g - 1.0));
        let k1 = lead * eta.powf(2.0 / (g - 1.0));
        let k2 = (g - 1.0) / (g * (g + 1.0)) * eta * m_x;
        let (k1_eps, k2_eps) = match eps {
            Some(e) => (
                lead * eta.powf(2.0 / (g - 1.0) * (1.0 - e)),
                (g - 1.0) / (g * (g + 1.0)) * eta.powf(1.0 + 2.0 * e / (g - 1.0)) * m_x,
            ),
            None => (f64::NAN, f64::NAN),
        };
        Self { k1, k2, k1_eps, k2_eps }
    }
}

/// Which Riccati equation is carried along a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiccatiKind {
    /// `k1 (alpha beta - alpha^2)`; needs `m_x == 0`.
    PSystem,
    /// Full equations with the `k2` entropy terms.
    Full,
    /// Scaled variables `alpha_eps`, `beta_eps`.
    Scaled(f64),
}

impl RiccatiKind {
    fn epsilon(self) -> Option<f64> {
        match self {
            RiccatiKind::Scaled(e) => Some(e),
            _ => None,
        }
    }
}

/// Right-hand side of the selected Riccati equation for the carried value `y`
/// given the partner value (beta on forward paths, alpha on backward paths).
pub fn riccati_rhs(
    kind: RiccatiKind,
    family: Family,
    coeffs: &RiccatiCoefficients,
    gamma: f64,
    y: f64,
    partner: f64,
) -> f64 {
    let RiccatiCoefficients { k1, k2, k1_eps, k2_eps } = *coeffs;
    match (kind, family) {
        (RiccatiKind::PSystem, _) => k1 * (y * partner - y * y),
        (RiccatiKind::Full, Family::Forward) => k1 * (k2 * (3.0 * y + partner) + y * partner - y * y),
        (RiccatiKind::Full, Family::Backward) => k1 * (-k2 * (partner + 3.0 * y) + partner * y - y * y),
        (RiccatiKind::Scaled(e), Family::Forward) => {
            let damp = 1.0 - 4.0 * e / (gamma + 1.0);
            k1_eps * (k2_eps * (3.0 * y - 4.0 * e * y + partner) + damp * y * partner - y * y)
        }
        (RiccatiKind::Scaled(e), Family::Backward) => {
            let damp = 1.0 - 4.0 * e / (gamma + 1.0);
            k1_eps * (-k2_eps * (partner + 3.0 * y - 4.0 * e * y) + damp * partner * y - y * y)
        }
    }
}

/// Interpolated local state at one space-time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalValues {
    pub u: f64,
    pub eta: f64,
    pub m: f64,
    pub m_x: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl LocalValues {
    pub fn s(&self) -> f64 {
        self.u + self.m * self.eta
    }
    pub fn r(&self) -> f64 {
        self.u - self.m * self.eta
    }
}

/// Read-only space-time view of a history.
#[derive(Debug, Clone)]
pub struct SpaceTime<'a> {
    history: &'a SolutionHistory,
    times: Vec<f64>,
}

impl<'a> SpaceTime<'a> {
    pub fn new(history: &'a SolutionHistory) -> Self {
        Self {
            history,
            times: history.times(),
        }
    }

    pub fn history(&self) -> &SolutionHistory {
        self.history
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn contains(&self, x: f64, t: f64) -> bool {
        let (t0, t1) = self.t_range();
        let tol = 1e-12 * t1.abs().max(1.0);
        t >= t0 - tol && t <= t1 + tol && self.history.grid().contains(x)
    }

    /// Index `j` with `t_j <= t <= t_{j+1}`.
    fn bracket(&self, t: f64) -> usize {
        let n = self.times.len();
        if n < 2 {
            return 0;
        }
        let j = self.times.partition_point(|&s| s <= t);
        j.saturating_sub(1).min(n - 2)
    }

    /// Snapshot indices and Lagrange weights for time `t`.
    fn time_stencil(&self, t: f64) -> (usize, usize, [f64; 4]) {
        let n = self.times.len();
        let width = n.min(4);
        let j = self.bracket(t);
        let start = j.saturating_sub(1).min(n - width);
        let mut w = [0.0; 4];
        for a in 0..width {
            let ta = self.times[start + a];
            let mut l = 1.0;
            for b in 0..width {
                if a != b {
                    let tb = self.times[start + b];
                    l *= (t - tb) / (ta - tb);
                }
            }
            w[a] = l;
        }
        (start, width, w)
    }

    /// Local values at `(x, t)`.
    pub fn local(&self, x: f64, t: f64) -> Result<LocalValues> {
        if !self.contains(x, t) {
            return Err(Error::OutsideHistory { x, t });
        }
        let frame = self.history.frame();
        let grid = &frame.grid;
        let (start, width, w) = self.time_stencil(t);
        let (mut u, mut eta, mut alpha, mut beta) = (0.0, 0.0, 0.0, 0.0);
        for a in 0..width {
            let s = &self.history.snapshots()[start + a];
            u += w[a] * interp_space(s.u(), frame.left.u, frame.right.u, grid, x)?;
            eta += w[a] * interp_space(s.eta(), frame.left.eta, frame.right.eta, grid, x)?;
            alpha += w[a] * interp_space(s.alpha(), 0.0, 0.0, grid, x)?;
            beta += w[a] * interp_space(s.beta(), 0.0, 0.0, grid, x)?;
        }
        let init = self.history.initial();
        let m = interp_space(init.m(), frame.left.m, frame.right.m, grid, x)?;
        let m_x = interp_space(init.m_x(), 0.0, 0.0, grid, x)?;
        if !(eta > 0.0 && m > 0.0) {
            return Err(Error::Positivity { t });
        }
        let c = frame.model.wave_speed_unchecked(eta, m);
        Ok(LocalValues {
            u,
            eta,
            m,
            m_x,
            c,
            alpha,
            beta,
        })
    }

    /// Step end times covering `[t0, t_stop]`, with `substeps` equal steps per
    /// stored interval and no step crossing a stored time.
    fn schedule(&self, t0: f64, direction: Direction, substeps: usize) -> Vec<f64> {
        let substeps = substeps.max(1);
        let mut out = vec![t0];
        let tol = 1e-12 * self.t_range().1.abs().max(1.0);
        match direction {
            Direction::ForwardInTime => {
                for &tk in self.times.iter().filter(|&&tk| tk > t0 + tol) {
                    let from = *out.last().unwrap();
                    for q in 1..=substeps {
                        out.push(if q == substeps {
                            tk
                        } else {
                            from + (tk - from) * q as f64 / substeps as f64
                        });
                    }
                }
            }
            Direction::BackwardInTime => {
                for &tk in self.times.iter().rev().filter(|&&tk| tk < t0 - tol) {
                    let from = *out.last().unwrap();
                    for q in 1..=substeps {
                        out.push(if q == substeps {
                            tk
                        } else {
                            from + (tk - from) * q as f64 / substeps as f64
                        });
                    }
                }
            }
        }
        out
    }
}

/// One point of a traced characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub x: f64,
    pub local: LocalValues,
    pub coeffs: RiccatiCoefficients,
    /// Riccati-integrated value, once integrated.
    pub carried: Option<f64>,
    /// The same variable read from the finite-difference field.
    pub field: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicPath {
    pub family: Family,
    pub direction: Direction,
    pub epsilon: Option<f64>,
    pub kind: Option<RiccatiKind>,
    pub samples: Vec<PathSample>,
}

impl CharacteristicPath {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
    pub fn xs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.x).collect()
    }
    pub fn start(&self) -> (f64, f64) {
        (self.samples[0].x, self.samples[0].t)
    }
    pub fn end_time(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(f64::NAN)
    }
    pub fn carried(&self) -> Vec<f64> {
        self.samples.iter().filter_map(|s| s.carried).collect()
    }
    /// Largest `|carried - field|` over the samples.
    pub fn max_discrepancy(&self) -> f64 {
        self.samples
            .iter()
            .filter_map(|s| Some((s.carried? - s.field?).abs()))
            .fold(0.0, f64::max)
    }
}

/// Tracing options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    /// RK4 steps per stored interval.
    pub substeps: usize,
    pub epsilon: Option<f64>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            substeps: 2,
            epsilon: None,
        }
    }
}

fn sample_at(st: &SpaceTime<'_>, x: f64, t: f64, eps: Option<f64>) -> Result<PathSample> {
    let local = st.local(x, t)?;
    let coeffs = RiccatiCoefficients::at(&st.history().frame().model, local.eta, local.m_x, eps);
    Ok(PathSample {
        t,
        x,
        local,
        coeffs,
        carried: None,
        field: None,
    })
}

/// Traces the characteristic of `family` through `(x0, t0)`.
pub fn trace(
    history: &SolutionHistory,
    x0: f64,
    t0: f64,
    family: Family,
    direction: Direction,
    options: TraceOptions,
) -> Result<CharacteristicPath> {
    if let Some(e) = options.epsilon {
        check_epsilon(e)?;
    }
    let st = SpaceTime::new(history);
    let first = sample_at(&st, x0, t0, options.epsilon)?;
    let mut samples = vec![first];
    let sign = family.sign();
    let schedule = st.schedule(t0, direction, options.substeps);
    let mut x = x0;
    for w in schedule.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let dt = tb - ta;
        let speed = |x: f64, t: f64| -> Result<f64> { Ok(sign * st.local(x, t)?.c) };
        let step = (|| -> Result<f64> {
            let k1 = speed(x, ta)?;
            let k2 = speed(x + 0.5 * dt * k1, ta + 0.5 * dt)?;
            let k3 = speed(x + 0.5 * dt * k2, ta + 0.5 * dt)?;
            let k4 = speed(x + dt * k3, tb)?;
            Ok(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        })();
        match step.and_then(|xn| sample_at(&st, xn, tb, options.epsilon)) {
            Ok(s) => {
                x = s.x;
                samples.push(s);
            }
            Err(Error::OutsideHistory { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(CharacteristicPath {
        family,
        direction,
        epsilon: options.epsilon,
        kind: None,
        samples,
    })
}

fn field_value(kind: RiccatiKind, family: Family, model: &GasModel, l: &LocalValues) -> (f64, f64) {
    let w = match kind {
        RiccatiKind::Scaled(e) => model.eps_weight(l.eta, e),
        _ => 1.0,
    };
    match family {
        Family::Forward => (w * l.alpha, w * l.beta),
        Family::Backward => (w * l.beta, w * l.alpha),
    }
}

/// Integrates the selected Riccati equation along `path`, re-tracing the
/// path jointly with the carried value over the same step times. The
/// partner gradient is read from the field. Integration stops early if the
/// carried value leaves `[-cap, cap]`.
pub fn integrate_riccati(
    path: &CharacteristicPath,
    history: &SolutionHistory,
    kind: RiccatiKind,
    cap: f64,
) -> Result<CharacteristicPath> {
    if path.direction != Direction::ForwardInTime {
        return domain("Riccati integration runs forward in time only");
    }
    let eps = kind.epsilon();
    if let Some(e) = eps {
        check_epsilon(e)?;
    }
    let st = SpaceTime::new(history);
    let model = history.frame().model;
    let gamma = model.gamma();
    let family = path.family;
    let sign = family.sign();
    let (x0, t0) = path.start();

    let eval = |x: f64, t: f64, y: f64| -> Result<(f64, f64)> {
        let l = st.local(x, t)?;
        let coeffs = RiccatiCoefficients::at(&model, l.eta, l.m_x, eps);
        let (_, partner) = field_value(kind, family, &model, &l);
        Ok((sign * l.c, riccati_rhs(kind, family, &coeffs, gamma, y, partner)))
    };
    let annotate = |x: f64, t: f64, y: f64| -> Result<PathSample> {
        let mut s = sample_at(&st, x, t, eps)?;
        s.carried = Some(y);
        s.field = Some(field_value(kind, family, &model, &s.local).0);
        Ok(s)
    };

    let first = sample_at(&st, x0, t0, eps)?;
    let mut y = field_value(kind, family, &model, &first.local).0;
    let mut x = x0;
    let mut samples = vec![annotate(x, t0, y)?];
    for w in path.samples.windows(2) {
        let (ta, tb) = (w[0].t, w[1].t);
        let dt = tb - ta;
        let tm = ta + 0.5 * dt;
        let step = (|| -> Result<(f64, f64)> {
            let (a1, b1) = eval(x, ta, y)?;
            let (a2, b2) = eval(x + 0.5 * dt * a1, tm, y + 0.5 * dt * b1)?;
            let (a3, b3) = eval(x + 0.5 * dt * a2, tm, y + 0.5 * dt * b2)?;
            let (a4, b4) = eval(x + dt * a3, tb, y + dt * b3)?;
            Ok((
                x + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
                y + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
            ))
        })();
        match step {
            Ok((xn, yn)) if yn.is_finite() && yn.abs() <= cap => {
                x = xn;
                y = yn;
                samples.push(annotate(x, tb, y)?);
            }
            Ok(_) | Err(Error::OutsideHistory { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(CharacteristicPath {
        family,
        direction: path.direction,
        epsilon: eps,
        kind: Some(kind),
        samples,
    })
}

/// Riccati integration for an isentropic history.
pub fn integrate_riccati_psystem(path: &CharacteristicPath, history: &SolutionHistory) -> Result<CharacteristicPath> {
    if history.system() != System::PSystem && history.initial().m_x().iter().any(|&v| v != 0.0) {
        return domain("p-system Riccati integration needs a constant entropy profile");
    }
    integrate_riccati(path, history, RiccatiKind::PSystem, f64::MAX)
}

/// Full-Euler Riccati integration, scaled when `epsilon` is given.
pub fn integrate_riccati_full(
    path: &CharacteristicPath,
    history: &SolutionHistory,
    epsilon: Option<f64>,
) -> Result<CharacteristicPath> {
    let kind = match epsilon {
        Some(e) => {
            check_epsilon(e)?;
            RiccatiKind::Scaled(e)
        }
        None => RiccatiKind::Full,
    };
    integrate_riccati(path, history, kind, f64::MAX)
}

/// Largest residual of the transport identity for eta along the path:
/// `d eta/dt = -K_c eta^p beta - ((gamma-1)/gamma) K_c eta^(p+1) m_x` on
/// forward paths, with `alpha` and the opposite entropy sign on backward
/// paths. The path derivative uses the three-point non-uniform stencil.
pub fn eta_transport_residual(path: &CharacteristicPath, history: &SolutionHistory) -> f64 {
    let model = history.frame().model;
    let g = model.gamma();
    let kc = model.k_c();
    let p = model.speed_exponent();
    let s = &path.samples;
    let mut worst = 0.0f64;
    for k in 1..s.len().saturating_sub(1) {
        let (t0, t1, t2) = (s[k - 1].t, s[k].t, s[k + 1].t);
        let (e0, e1, e2) = (s[k - 1].local.eta, s[k].local.eta, s[k + 1].local.eta);
        let (h0, h1) = (t1 - t0, t2 - t1);
        let deriv = (-h1 / (h0 * (h0 + h1))) * e0 + ((h1 - h0) / (h0 * h1)) * e1 + (h0 / (h1 * (h0 + h1))) * e2;
        let l = &s[k].local;
        let entropy = (g - 1.0) / g * kc * l.eta.powf(p + 1.0) * l.m_x;
        let expected = match path.family {
            Family::Forward => -kc * l.eta.powf(p) * l.beta - entropy,
            Family::Backward => -kc * l.eta.powf(p) * l.alpha + entropy,
        };
        worst = worst.max((deriv - expected).abs());
    }
    worst
}

/// Exact solution of `a' = k (M a - a^2)` with `a(0) = a0`.
pub fn logistic_reference(k: f64, big_m: f64, a0: f64, t: f64) -> Result<f64> {
    if !(k > 0.0) {
        return domain(format!("logistic rate must be positive, got {k}"));
    }
    if !(a0 > 0.0 && a0 < big_m) {
        return domain(format!("initial value {a0} must lie in (0, {big_m})"));
    }
    if !(t >= 0.0) {
        return domain(format!("time must be non-negative, got {t}"));
    }
    Ok(big_m / (1.0 + (-k * big_m * t).exp() * (big_m / a0 - 1.0)))
}

/// Classical RK4 for a scalar autonomous-in-coefficients ODE with fixed step.
/// Returns `(t, y)` samples including the start; stops early if `stop(y)`.
pub fn rk4_scalar(
    f: impl Fn(f64, f64) -> f64,
    y0: f64,
    t0: f64,
    dt: f64,
    steps: usize,
    stop: impl Fn(f64) -> bool,
) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(steps + 1);
    let (mut t, mut y) = (t0, y0);
    out.push((t, y));
    for i in 0..steps {
        let k1 = f(t, y);
        let k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1);
        let k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2);
        let k4 = f(t + dt, y + dt * k3);
        y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = t0 + (i + 1) as f64 * dt;
        out.push((t, y));
        if !y.is_finite() || stop(y) {
            break;
        }
    }
    out
}

/// Blowup time from the quadratic asymptote `y' = -k1 y^2`:
/// `y(t) = -1 / (k1 (t* - t))`, so `t* = t - 1 / (k1 y)`.
pub fn extrapolate_blowup(t: f64, y: f64, k1: f64) -> Option<f64> {
    (y < 0.0 && k1 > 0.0).then(|| t - 1.0 / (k1 * y))
}

/// Frozen-coefficient check of the extrapolator: integrates `y' = -k1 y^2`
/// from `y0 < 0` with step `dt` until `y < -trigger` and extrapolates.
pub fn frozen_blowup_time(k1: f64, y0: f64, dt: f64, trigger: f64) -> Option<f64> {
    let coeffs = RiccatiCoefficients {
        k1,
        k2: 0.0,
        k1_eps: f64::NAN,
        k2_eps: f64::NAN,
    };
    let max_steps = (1e7 as usize).min(((1.0 / (k1 * y0.abs())) / dt * 2.0) as usize + 10);
    let samples = rk4_scalar(
        |_, y| riccati_rhs(RiccatiKind::PSystem, Family::Forward, &coeffs, 3.0, y, 0.0),
        y0,
        0.0,
        dt,
        max_steps,
        |y| y < -trigger,
    );
    let &(t, y) = samples.last()?;
    if y < -trigger && y.is_finite() {
        extrapolate_blowup(t, y, k1)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seed {
    pub x0: f64,
    pub family: Family,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupEstimate {
    pub t_star: f64,
    pub x_star: f64,
    pub family: Family,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupOptions {
    /// Extrapolate once the carried value falls below `-trigger_factor` times
    /// the largest initial gradient magnitude.
    pub trigger_factor: f64,
    pub substeps: usize,
}

impl Default for BlowupOptions {
    fn default() -> Self {
        Self {
            trigger_factor: 10.0,
            substeps: 2,
        }
    }
}

/// Up to `per_family` evenly spaced seeds on each family where the carried
/// gradient is initially negative (compressive).
pub fn compressive_seeds(history: &SolutionHistory, per_family: usize) -> Vec<Seed> {
    let init = history.initial();
    let nodes = init.grid().nodes();
    let mut seeds = Vec::new();
    for (family, g) in [(Family::Forward, init.alpha()), (Family::Backward, init.beta())] {
        let idx: Vec<usize> = (0..g.len()).filter(|&i| g[i] < 0.0).collect();
        if idx.is_empty() || per_family == 0 {
            continue;
        }
        let stride = (idx.len() as f64 / per_family as f64).max(1.0);
        let mut k = 0.0;
        while (k as usize) < idx.len() {
            seeds.push(Seed {
                x0: nodes[idx[k as usize]],
                family,
            });
            k += stride;
        }
    }
    seeds
}

/// Integrates the Riccati equation from each seed at `t = 0` and returns the
/// earliest extrapolated blowup, or `None` if no seed crosses the trigger.
pub fn estimate_blowup_time(
    history: &SolutionHistory,
    seeds: &[Seed],
    options: BlowupOptions,
) -> Result<Option<BlowupEstimate>> {
    let init = history.initial();
    let scale = init
        .alpha()
        .iter()
        .chain(init.beta())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let trigger = options.trigger_factor * scale;
    let kind = if init.m_x().iter().all(|&v| v == 0.0) {
        RiccatiKind::PSystem
    } else {
        RiccatiKind::Full
    };
    let t0 = init.t();
    let mut best: Option<BlowupEstimate> = None;
    for seed in seeds {
        let opts = TraceOptions {
            substeps: options.substeps,
            epsilon: None,
        };
        let path = match trace(history, seed.x0, t0, seed.family, Direction::ForwardInTime, opts) {
            Ok(p) => p,
            Err(Error::OutsideHistory { .. }) => continue,
            Err(e) => return Err(e),
        };
        let carried = integrate_riccati(&path, history, kind, 1e6 * trigger)?;
        let Some(last) = carried.samples.last() else { continue };
        let y = last.carried.unwrap_or(0.0);
        if y >= -trigger {
            continue;
        }
        if let Some(t_star) = extrapolate_blowup(last.t, y, last.coeffs.k1) {
            if best.is_none_or(|b| t_star < b.t_star) {
                best = Some(BlowupEstimate {
                    t_star,
                    x_star: last.x,
                    family: seed.family,
                });
            }
        }
    }
    Ok(best)
}
