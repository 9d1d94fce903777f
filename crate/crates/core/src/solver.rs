//! Method-of-lines integration of the smooth Lagrangian equations.
//!
//! Both systems are evolved in the `(eta, u)` variables with the entropy
//! profile `m(x)` held fixed:
//!
//! ```text
//! eta_t + (c/m) u_x = 0
//! u_t + m c eta_x + 2 (p/m) m_x = 0
//! ```
//!
//! The p-system path is the same system with `m == 1` and no entropy terms.
//! Time stepping is classical RK4; space is the fourth-order central stencil.
//! No dissipation is added, so runs are stopped before a shock forms.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{ddx, max_of, min_of, EntropyProfile, FieldSnapshot, Frame, Grid1D, System};
use crate::scenario::{init_scenario, ScenarioSpec};

/// When to keep a snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Storage {
    /// Every `k` steps.
    Stride(usize),
    /// Exactly at multiples of the interval; steps are shortened to land on them.
    Interval(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryPolicy {
    /// Ghost nodes hold the constant far-field state.
    FarField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub cfl: f64,
    pub t_end: f64,
    pub storage: Storage,
    /// Blowup suspected once `max |u_x|` exceeds this multiple of its initial value.
    pub ux_growth_limit: f64,
    /// Blowup also suspected once the steepest gradient is resolved by fewer
    /// than this many cells (only after `max |u_x|` has grown past
    /// `resolution_growth` times its initial value).
    pub min_resolved_cells: f64,
    pub resolution_growth: f64,
    /// Stop once `min rho` falls below this fraction of its initial value.
    pub rho_floor_fraction: f64,
    pub boundary: BoundaryPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            t_end: 1.0,
            storage: Storage::Stride(4),
            ux_growth_limit: 1e3,
            min_resolved_cells: 10.0,
            resolution_growth: 4.0,
            rho_floor_fraction: 1e-6,
            boundary: BoundaryPolicy::FarField,
        }
    }
}

impl SolverConfig {
    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_storage(mut self, storage: Storage) -> Self {
        self.storage = storage;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return bad(format!("cfl must lie in (0, 1), got {}", self.cfl));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be finite and non-negative, got {}", self.t_end));
        }
        match self.storage {
            Storage::Stride(0) => return bad("storage stride must be at least 1".into()),
            Storage::Interval(dt) if !(dt > 0.0 && dt.is_finite()) => {
                return bad(format!("storage interval must be positive, got {dt}"));
            }
            _ => {}
        }
        if !(self.ux_growth_limit > 1.0 && self.rho_floor_fraction > 0.0 && self.rho_floor_fraction < 1.0) {
            return bad("blowup thresholds out of range".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    HorizonReached,
    BlowupSuspected,
    DensityFloorReached,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::HorizonReached => "horizon_reached",
            StopReason::BlowupSuspected => "blowup_suspected",
            StopReason::DensityFloorReached => "density_floor_reached",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "horizon_reached" => Ok(StopReason::HorizonReached),
            "blowup_suspected" => Ok(StopReason::BlowupSuspected),
            "density_floor_reached" => Ok(StopReason::DensityFloorReached),
            other => Err(Error::Parse(format!("unknown stop reason '{other}'"))),
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Time-ordered snapshots of one run.
#[derive(Debug, Clone)]
pub struct SolutionHistory {
    snapshots: Vec<FieldSnapshot>,
    stop_reason: StopReason,
    stop_time: f64,
    steps: usize,
}

impl SolutionHistory {
    /// Assembles a history from snapshots sharing one frame and entropy profile.
    pub fn from_snapshots(snapshots: Vec<FieldSnapshot>, stop_reason: StopReason, steps: usize) -> Result<Self> {
        let first = snapshots
            .first()
            .ok_or_else(|| Error::InvalidConfig("empty history".into()))?;
        for w in snapshots.windows(2) {
            if !(w[1].t() > w[0].t()) {
                return Err(Error::InvalidConfig(format!(
                    "snapshot times not increasing: {} then {}",
                    w[0].t(),
                    w[1].t()
                )));
            }
        }
        if snapshots
            .iter()
            .any(|s| s.frame() != first.frame() || s.m() != first.m())
        {
            return Err(Error::InvalidConfig(
                "snapshots do not share one frame and entropy profile".into(),
            ));
        }
        let stop_time = snapshots.last().map(|s| s.t()).unwrap_or(0.0);
        Ok(Self {
            snapshots,
            stop_reason,
            stop_time,
            steps,
        })
    }

    pub fn snapshots(&self) -> &[FieldSnapshot] {
        &self.snapshots
    }
    pub fn initial(&self) -> &FieldSnapshot {
        &self.snapshots[0]
    }
    pub fn last(&self) -> &FieldSnapshot {
        self.snapshots.last().expect("history is never empty")
    }
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }
    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t()).collect()
    }
    pub fn frame(&self) -> &Arc<Frame> {
        self.initial().frame()
    }
    pub fn grid(&self) -> &Grid1D {
        self.initial().grid()
    }
    pub fn system(&self) -> System {
        self.frame().system
    }
    pub fn stop_reason(&self) -> StopReason {
        self.stop_reason
    }
    pub fn stop_time(&self) -> f64 {
        self.stop_time
    }
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Copy with snapshot `i` replaced. Used to build corrupted fixtures.
    pub fn with_replaced(&self, i: usize, snap: FieldSnapshot) -> Result<Self> {
        let mut snaps = self.snapshots.clone();
        *snaps
            .get_mut(i)
            .ok_or_else(|| Error::InvalidConfig(format!("no snapshot {i}")))? = snap;
        let mut h = Self::from_snapshots(snaps, self.stop_reason, self.steps)?;
        h.stop_time = self.stop_time;
        Ok(h)
    }
}

struct Workspace {
    ux: Vec<f64>,
    eta_x: Vec<f64>,
}

/// Right-hand side `(d eta/dt, du/dt)` of the semi-discrete system.
fn rhs(
    frame: &Frame,
    entropy: &EntropyProfile,
    u: &[f64],
    eta: &[f64],
    ws: &mut Workspace,
    d_eta: &mut [f64],
    d_u: &mut [f64],
) {
    let h = frame.grid.h();
    ddx(u, frame.left.u, frame.right.u, h, &mut ws.ux);
    ddx(eta, frame.left.eta, frame.right.eta, h, &mut ws.eta_x);
    let model = &frame.model;
    match frame.system {
        System::PSystem => {
            for i in 0..u.len() {
                let c = model.wave_speed_unchecked(eta[i], 1.0);
                d_eta[i] = -c * ws.ux[i];
                d_u[i] = -c * ws.eta_x[i];
            }
        }
        System::Full => {
            let (m, m_x) = (&entropy.m, &entropy.m_x);
            for i in 0..u.len() {
                let c = model.wave_speed_unchecked(eta[i], m[i]);
                let p = model.pressure_unchecked(eta[i], m[i]);
                d_eta[i] = -(c / m[i]) * ws.ux[i];
                d_u[i] = -m[i] * c * ws.eta_x[i] - 2.0 * (p / m[i]) * m_x[i];
            }
        }
    }
}

/// Evaluates the time derivatives of `(eta, u)` for a snapshot.
pub fn time_derivatives(snap: &FieldSnapshot) -> (Vec<f64>, Vec<f64>) {
    let n = snap.len();
    let mut ws = Workspace {
        ux: vec![0.0; n],
        eta_x: vec![0.0; n],
    };
    let (mut de, mut du) = (vec![0.0; n], vec![0.0; n]);
    rhs(
        snap.frame(),
        snap.entropy(),
        snap.u(),
        snap.eta(),
        &mut ws,
        &mut de,
        &mut du,
    );
    (de, du)
}

/// Largest stable step for the snapshot under `cfl`.
pub fn stable_dt(snap: &FieldSnapshot, cfl: f64) -> f64 {
    let cmax = snap.max_wave_speed();
    if cmax > 0.0 {
        cfl * snap.grid().h() / cmax
    } else {
        f64::INFINITY
    }
}

/// One RK4 step of size `dt`. The entropy profile is carried over unchanged.
pub fn step(snap: &FieldSnapshot, dt: f64, config: &SolverConfig) -> Result<FieldSnapshot> {
    let limit = stable_dt(snap, config.cfl);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, limit });
    }
    step_unchecked(snap, dt, snap.t() + dt)
}

fn step_unchecked(snap: &FieldSnapshot, dt: f64, t_new: f64) -> Result<FieldSnapshot> {
    let n = snap.len();
    let frame = snap.frame();
    let entropy = snap.entropy();
    let mut ws = Workspace {
        ux: vec![0.0; n],
        eta_x: vec![0.0; n],
    };
    let (u0, e0) = (snap.u(), snap.eta());
    let mut k_e = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut k_u = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut ut = vec![0.0; n];
    let mut et = vec![0.0; n];
    let positive =
        |e: &[f64], u: &[f64]| e.iter().all(|v| *v > 0.0 && v.is_finite()) && u.iter().all(|v| v.is_finite());

    let stage_weights = [0.5, 0.5, 1.0];
    rhs(frame, entropy, u0, e0, &mut ws, &mut k_e[0], &mut k_u[0]);
    for s in 0..3 {
        let a = stage_weights[s] * dt;
        for i in 0..n {
            et[i] = e0[i] + a * k_e[s][i];
            ut[i] = u0[i] + a * k_u[s][i];
        }
        if !positive(&et, &ut) {
            return Err(Error::Positivity { t: snap.t() });
        }
        let (ke, ku) = (&mut k_e[s + 1], &mut k_u[s + 1]);
        rhs(frame, entropy, &ut, &et, &mut ws, ke, ku);
    }
    let w = dt / 6.0;
    for i in 0..n {
        et[i] = e0[i] + w * (k_e[0][i] + 2.0 * k_e[1][i] + 2.0 * k_e[2][i] + k_e[3][i]);
        ut[i] = u0[i] + w * (k_u[0][i] + 2.0 * k_u[1][i] + 2.0 * k_u[2][i] + k_u[3][i]);
    }
    if !positive(&et, &ut) {
        return Err(Error::Positivity { t: snap.t() });
    }
    FieldSnapshot::new(frame.clone(), entropy.clone(), t_new, ut, et)
}

struct Thresholds {
    ux_limit: f64,
    ux_resolution_gate: f64,
    rho_floor: f64,
    min_resolved_cells: f64,
}

impl Thresholds {
    fn new(init: &FieldSnapshot, config: &SolverConfig) -> Self {
        let ux0 = init.ux().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let scale = if ux0 > 0.0 { ux0 } else { 1.0 };
        Self {
            ux_limit: config.ux_growth_limit * scale,
            ux_resolution_gate: config.resolution_growth * scale,
            rho_floor: config.rho_floor_fraction * min_of(&init.rho()),
            min_resolved_cells: config.min_resolved_cells,
        }
    }

    fn check(&self, snap: &FieldSnapshot) -> Option<StopReason> {
        let uxmax = snap.ux().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !uxmax.is_finite() || uxmax > self.ux_limit {
            return Some(StopReason::BlowupSuspected);
        }
        if uxmax > self.ux_resolution_gate {
            let range = max_of(snap.u()) - min_of(snap.u());
            if uxmax * self.min_resolved_cells * snap.grid().h() > range {
                return Some(StopReason::BlowupSuspected);
            }
        }
        if min_of(&snap.rho()) < self.rho_floor {
            return Some(StopReason::DensityFloorReached);
        }
        None
    }
}

/// Integrates from `init` until `t_end` or a stop criterion fires.
pub fn run_from(init: FieldSnapshot, config: &SolverConfig) -> Result<SolutionHistory> {
    config.validate()?;
    let thresholds = Thresholds::new(&init, config);
    let t_end = config.t_end;
    let time_tol = 1e-12 * t_end.max(1.0);
    let t0 = init.t();
    let mut snaps = vec![init.clone()];
    let mut current = init;
    let mut steps = 0usize;
    let mut stored_last = true;
    // k-th output time, computed directly so rounding does not accumulate
    let out_time = |k: usize| match config.storage {
        Storage::Interval(dt) => {
            let t = t0 + k as f64 * dt;
            if t >= t_end - time_tol {
                t_end
            } else {
                t
            }
        }
        Storage::Stride(_) => t_end,
    };
    let mut out_index = 1usize;
    let mut next_out = out_time(out_index);
    let mut reason = StopReason::HorizonReached;

    while current.t() < t_end - time_tol {
        let mut dt = stable_dt(&current, config.cfl);
        let target = next_out.min(t_end);
        let mut t_new = current.t() + dt;
        let mut on_target = false;
        if t_new >= target - time_tol {
            dt = target - current.t();
            t_new = target;
            on_target = true;
        }
        let next = match step_unchecked(&current, dt, t_new) {
            Ok(s) => s,
            Err(Error::Positivity { .. }) => {
                reason = StopReason::BlowupSuspected;
                break;
            }
            Err(e) => return Err(e),
        };
        steps += 1;
        current = next;
        stored_last = false;
        if let Some(r) = thresholds.check(&current) {
            reason = r;
            snaps.push(current.clone());
            stored_last = true;
            break;
        }
        let store = match config.storage {
            Storage::Stride(k) => steps.is_multiple_of(k),
            Storage::Interval(_) => {
                if on_target {
                    out_index += 1;
                    next_out = out_time(out_index);
                }
                on_target
            }
        };
        if store {
            snaps.push(current.clone());
            stored_last = true;
        }
    }
    if !stored_last {
        snaps.push(current.clone());
    }
    let mut history = SolutionHistory::from_snapshots(snaps, reason, steps)?;
    history.stop_time = current.t();
    Ok(history)
}

/// Samples the scenario on `grid` and integrates it.
pub fn run(spec: &ScenarioSpec, grid: Grid1D, config: &SolverConfig) -> Result<SolutionHistory> {
    let init = init_scenario(spec, grid)?;
    run_from(init, config)
}

/// Discrete integrals `h sum tau` and `h sum u`.
pub fn discrete_integrals(snap: &FieldSnapshot) -> (f64, f64) {
    let h = snap.grid().h();
    (h * snap.tau().iter().sum::<f64>(), h * snap.u().iter().sum::<f64>())
}

/// Fourth-order restriction of node data to the grid with half as many
/// cells: each coarse centre is the midpoint of two fine centres.
pub fn restrict_to_coarse(fine: &[f64], left: f64, right: f64) -> Vec<f64> {
    let n = fine.len() as isize;
    let at = |i: isize| -> f64 {
        if i < 0 {
            left
        } else if i >= n {
            right
        } else {
            fine[i as usize]
        }
    };
    (0..n / 2)
        .map(|j| {
            let i = 2 * j;
            (-at(i - 1) + 9.0 * at(i) + 9.0 * at(i + 1) - at(i + 2)) / 16.0
        })
        .collect()
}
