//! Grid-sampled state, Riemann invariants and the gradient variables.
//!
//! Spatial derivatives use the fourth-order central stencil with two ghost
//! nodes on each side filled from the constant far-field state.

use std::sync::{Arc, OnceLock};

use crate::error::{domain, Error, Result};
use crate::thermo::GasModel;

pub const MIN_CELLS: usize = 16;

/// Uniform cell-centred grid in the Lagrangian mass coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < MIN_CELLS {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least {MIN_CELLS} cells, got {n}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::InvalidConfig(format!("bad grid bounds [{x_min}, {x_max}]")));
        }
        Ok(Self { x_min, x_max, n })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }
    pub fn node(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.h()
    }
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }
    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }
}

/// Which system of equations a state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    /// Isentropic p-system, `m == 1`.
    PSystem,
    /// Full Euler with stationary entropy profile.
    Full,
}

impl System {
    pub fn name(self) -> &'static str {
        match self {
            System::PSystem => "p-system",
            System::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "p-system" | "psystem" | "isentropic" => Ok(System::PSystem),
            "full" => Ok(System::Full),
            other => Err(Error::Parse(format!("unknown system '{other}'"))),
        }
    }
}

/// Constant state assumed beyond the grid ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeState {
    pub u: f64,
    pub eta: f64,
    pub m: f64,
}

/// Everything shared by all snapshots of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub grid: Grid1D,
    pub model: GasModel,
    pub system: System,
    pub left: EdgeState,
    pub right: EdgeState,
}

/// Stationary entropy variable with its derivative.
#[derive(Debug, PartialEq)]
pub struct EntropyProfile {
    pub m: Vec<f64>,
    pub m_x: Vec<f64>,
}

impl EntropyProfile {
    pub fn new(m: Vec<f64>, frame: &Frame) -> Result<Self> {
        if m.len() != frame.grid.n() {
            return Err(Error::InvalidScenario(
                "entropy array length does not match the grid".into(),
            ));
        }
        if let Some(bad) = m.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidScenario(format!(
                "m must be positive everywhere, found {bad}"
            )));
        }
        if frame.system == System::PSystem && m.iter().any(|&v| v != 1.0) {
            return Err(Error::InvalidScenario("p-system states require m == 1".into()));
        }
        let mut m_x = vec![0.0; m.len()];
        ddx(&m, frame.left.m, frame.right.m, frame.grid.h(), &mut m_x);
        Ok(Self { m, m_x })
    }
}

/// Fourth-order central first derivative with far-field ghost values.
pub fn ddx(f: &[f64], left: f64, right: f64, h: f64, out: &mut [f64]) {
    let n = f.len();
    debug_assert_eq!(out.len(), n);
    let at = |i: isize| -> f64 {
        if i < 0 {
            left
        } else if i as usize >= n {
            right
        } else {
            f[i as usize]
        }
    };
    let inv = 1.0 / (12.0 * h);
    for i in 0..n {
        let j = i as isize;
        out[i] = (8.0 * (at(j + 1) - at(j - 1)) - (at(j + 2) - at(j - 2))) * inv;
    }
}

/// Cubic Lagrange interpolation of node data at `x`, using ghost values
/// outside the grid. `x` must lie inside the grid bounds.
pub fn interp_space(f: &[f64], left: f64, right: f64, grid: &Grid1D, x: f64) -> Result<f64> {
    if !grid.contains(x) {
        return Err(Error::OutsideHistory { x, t: f64::NAN });
    }
    let n = f.len() as isize;
    let h = grid.h();
    let s = (x - grid.x_min()) / h - 0.5;
    let i0 = s.floor() as isize;
    let th = s - i0 as f64;
    let at = |i: isize| -> f64 {
        if i < 0 {
            left
        } else if i >= n {
            right
        } else {
            f[i as usize]
        }
    };
    let (fm, f0, f1, f2) = (at(i0 - 1), at(i0), at(i0 + 1), at(i0 + 2));
    // Nodes at -1, 0, 1, 2 in units of h.
    let wm = -th * (th - 1.0) * (th - 2.0) / 6.0;
    let w0 = (th + 1.0) * (th - 1.0) * (th - 2.0) / 2.0;
    let w1 = -(th + 1.0) * th * (th - 2.0) / 2.0;
    let w2 = (th + 1.0) * th * (th - 1.0) / 6.0;
    Ok(wm * fm + w0 * f0 + w1 * f1 + w2 * f2)
}

/// Checks `0 < eps < 1/4`.
pub fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 0.25 {
        Ok(())
    } else {
        domain(format!("epsilon must lie in (0, 1/4), got {eps}"))
    }
}

#[derive(Debug)]
pub struct Derived {
    pub ux: Vec<f64>,
    pub eta_x: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Grid-sampled `(u, eta, m)` at one time.
#[derive(Debug, Clone)]
pub struct FieldSnapshot {
    t: f64,
    u: Vec<f64>,
    eta: Vec<f64>,
    entropy: Arc<EntropyProfile>,
    frame: Arc<Frame>,
    derived: OnceLock<Arc<Derived>>,
}

impl FieldSnapshot {
    pub fn new(frame: Arc<Frame>, entropy: Arc<EntropyProfile>, t: f64, u: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        let n = frame.grid.n();
        if u.len() != n || eta.len() != n || entropy.m.len() != n {
            return Err(Error::InvalidScenario("field arrays do not match the grid".into()));
        }
        if eta.iter().any(|v| !(v.is_finite() && *v > 0.0)) || u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Positivity { t });
        }
        Ok(Self {
            t,
            u,
            eta,
            entropy,
            frame,
            derived: OnceLock::new(),
        })
    }

    /// Builds a snapshot with a fresh frame and entropy profile.
    pub fn from_arrays(frame: Frame, t: f64, u: Vec<f64>, eta: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        let entropy = Arc::new(EntropyProfile::new(m, &frame)?);
        Self::new(Arc::new(frame), entropy, t, u, eta)
    }

    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn u(&self) -> &[f64] {
        &self.u
    }
    pub fn eta(&self) -> &[f64] {
        &self.eta
    }
    pub fn m(&self) -> &[f64] {
        &self.entropy.m
    }
    pub fn m_x(&self) -> &[f64] {
        &self.entropy.m_x
    }
    pub fn entropy(&self) -> &Arc<EntropyProfile> {
        &self.entropy
    }
    pub fn frame(&self) -> &Arc<Frame> {
        &self.frame
    }
    pub fn grid(&self) -> &Grid1D {
        &self.frame.grid
    }
    pub fn model(&self) -> &GasModel {
        &self.frame.model
    }
    pub fn len(&self) -> usize {
        self.u.len()
    }
    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Lazily computed derivatives and gradient variables.
    pub fn derived(&self) -> &Derived {
        self.derived.get_or_init(|| Arc::new(compute_derived(self)))
    }

    pub fn ux(&self) -> &[f64] {
        &self.derived().ux
    }
    pub fn alpha(&self) -> &[f64] {
        &self.derived().alpha
    }
    pub fn beta(&self) -> &[f64] {
        &self.derived().beta
    }

    pub fn tau(&self) -> Vec<f64> {
        let model = self.model();
        self.eta.iter().map(|&e| model.tau_unchecked(e)).collect()
    }

    pub fn rho(&self) -> Vec<f64> {
        let model = self.model();
        self.eta.iter().map(|&e| 1.0 / model.tau_unchecked(e)).collect()
    }

    pub fn pressure(&self) -> Vec<f64> {
        let model = self.model();
        self.eta
            .iter()
            .zip(self.m())
            .map(|(&e, &m)| model.pressure_unchecked(e, m))
            .collect()
    }

    pub fn wave_speed(&self) -> Vec<f64> {
        let model = self.model();
        self.eta
            .iter()
            .zip(self.m())
            .map(|(&e, &m)| model.wave_speed_unchecked(e, m))
            .collect()
    }

    pub fn max_wave_speed(&self) -> f64 {
        self.wave_speed().into_iter().fold(0.0, f64::max)
    }

    /// Same snapshot with replaced velocity and eta; used for fixtures.
    pub fn with_fields(&self, u: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        Self::new(self.frame.clone(), self.entropy.clone(), self.t, u, eta)
    }
}

fn compute_derived(snap: &FieldSnapshot) -> Derived {
    let n = snap.len();
    let f = &snap.frame;
    let h = f.grid.h();
    let mut ux = vec![0.0; n];
    let mut eta_x = vec![0.0; n];
    ddx(&snap.u, f.left.u, f.right.u, h, &mut ux);
    ddx(&snap.eta, f.left.eta, f.right.eta, h, &mut eta_x);
    let (alpha, beta) = gradient_combination(&ux, &eta_x, &snap.eta, snap.m(), snap.m_x(), f.model.gamma());
    Derived { ux, eta_x, alpha, beta }
}

/// `alpha = u_x + m eta_x + ((gamma-1)/gamma) m_x eta`, `beta` with the opposite sign on the eta terms.
pub fn gradient_combination(
    ux: &[f64],
    eta_x: &[f64],
    eta: &[f64],
    m: &[f64],
    m_x: &[f64],
    gamma: f64,
) -> (Vec<f64>, Vec<f64>) {
    let g = (gamma - 1.0) / gamma;
    let mut alpha = Vec::with_capacity(ux.len());
    let mut beta = Vec::with_capacity(ux.len());
    for i in 0..ux.len() {
        let d = m[i] * eta_x[i] + g * m_x[i] * eta[i];
        alpha.push(ux[i] + d);
        beta.push(ux[i] - d);
    }
    (alpha, beta)
}

/// Riemann invariants `s = u + m eta`, `r = u - m eta`.
pub fn riemann_invariants(snap: &FieldSnapshot) -> (Vec<f64>, Vec<f64>) {
    let mut s = Vec::with_capacity(snap.len());
    let mut r = Vec::with_capacity(snap.len());
    for ((&u, &e), &m) in snap.u().iter().zip(snap.eta()).zip(snap.m()) {
        s.push(u + m * e);
        r.push(u - m * e);
    }
    (s, r)
}

/// Gradient variables alpha and beta.
pub fn compute_gradients(snap: &FieldSnapshot) -> (Vec<f64>, Vec<f64>) {
    (snap.alpha().to_vec(), snap.beta().to_vec())
}

/// `alpha_eps = eta^(2 eps/(gamma-1)) alpha`, likewise for beta.
pub fn scaled_gradients(snap: &FieldSnapshot, eps: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_epsilon(eps)?;
    let model = snap.model();
    let w: Vec<f64> = snap.eta().iter().map(|&e| model.eps_weight(e, eps)).collect();
    let a = snap.alpha().iter().zip(&w).map(|(a, w)| a * w).collect();
    let b = snap.beta().iter().zip(&w).map(|(b, w)| b * w).collect();
    Ok((a, b))
}

pub fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}


#[cfg(test)]
mod tests {
    use super::testing::frame;
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const UNIT: EdgeState = EdgeState {
        u: 0.0,
        eta: 1.0,
        m: 1.0,
    };

    #[test]
    fn grid_rejects_small_or_inverted() {
        assert!(Grid1D::new(0.0, 1.0, 15).is_err());
        assert!(Grid1D::new(1.0, 0.0, 32).is_err());
        let g = Grid1D::new(-1.0, 1.0, 16).unwrap();
        assert_relative_eq!(g.h(), 0.125);
        assert_relative_eq!(g.node(0), -0.9375);
    }

    #[test]
    fn riemann_invariants_pointwise() {
        let fr = frame(0.0, 1.0, 16, 3.0, System::Full, UNIT);
        let snap = FieldSnapshot::from_arrays(fr, 0.0, vec![1.0; 16], vec![1.0; 16], vec![1.0; 16]).unwrap();
        let (s, r) = riemann_invariants(&snap);
        assert!(s.iter().all(|&v| v == 2.0) && r.iter().all(|&v| v == 0.0));

        let fr = frame(0.0, 1.0, 16, 3.0, System::Full, UNIT);
        let snap = FieldSnapshot::from_arrays(fr, 0.0, vec![0.0; 16], vec![0.7; 16], vec![1.3; 16]).unwrap();
        let (s, r) = riemann_invariants(&snap);
        for (a, b) in s.iter().zip(&r) {
            assert_eq!(*a, -*b);
            assert_relative_eq!(*a, 0.91, max_relative = 1e-15);
        }
    }

    #[test]
    fn gradient_formula_cases() {
        let (a, b) = gradient_combination(&[1.0], &[0.0], &[1.0], &[1.0], &[0.0], 3.0);
        assert_eq!((a[0], b[0]), (1.0, 1.0));
        let g = 3.0;
        let (a, b) = gradient_combination(&[0.0], &[0.0], &[1.0], &[1.0], &[g / (g - 1.0)], g);
        assert_relative_eq!(a[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(b[0], -1.0, max_relative = 1e-15);
    }

    #[test]
    fn scaled_gradient_values() {
        let fr = frame(
            0.0,
            1.0,
            16,
            3.0,
            System::Full,
            EdgeState {
                u: 0.0,
                eta: 4.0,
                m: 1.0,
            },
        );
        // u_x = 2; node 8 is clear of the ghost nodes.
        let u: Vec<f64> = fr.grid.nodes().iter().map(|x| 2.0 * x).collect();
        let snap = FieldSnapshot::from_arrays(fr, 0.0, u, vec![4.0; 16], vec![1.0; 16]).unwrap();
        let (ae, _) = scaled_gradients(&snap, 0.125).unwrap();
        // Interior node far from ghost mismatch.
        assert_relative_eq!(snap.alpha()[8], 2.0, max_relative = 1e-12);
        assert_relative_eq!(ae[8], 4f64.powf(0.125) * 2.0, max_relative = 1e-12);
        assert_relative_eq!(ae[8], 2.378414230005442, max_relative = 1e-12);
        assert!(scaled_gradients(&snap, 0.0).is_err());
        assert!(scaled_gradients(&snap, 0.25).is_err());
        assert!(scaled_gradients(&snap, -0.1).is_err());
    }

    #[test]
    fn unit_eta_leaves_scaled_gradients_unchanged() {
        let fr = frame(0.0, 2.0 * PI, 64, 1.4, System::Full, UNIT);
        let u: Vec<f64> = fr.grid.nodes().iter().map(|x| x.sin()).collect();
        let snap = FieldSnapshot::from_arrays(fr, 0.0, u, vec![1.0; 64], vec![1.0; 64]).unwrap();
        let (ae, be) = scaled_gradients(&snap, 0.2).unwrap();
        assert_eq!(ae, snap.alpha());
        assert_eq!(be, snap.beta());
    }

    /// Max error of alpha against the analytic s_x for u = sin(x) on [0, 2 pi]
    /// with periodic-compatible ghost values (sin vanishes at both ends).
    fn sine_alpha_error(n: usize) -> f64 {
        let fr = frame(0.0, 2.0 * PI, n, 3.0, System::PSystem, UNIT);
        let nodes = fr.grid.nodes();
        let u: Vec<f64> = nodes.iter().map(|x| x.sin()).collect();
        let snap = FieldSnapshot::from_arrays(fr, 0.0, u, vec![1.0; n], vec![1.0; n]).unwrap();
        // Skip the two nodes on each side that see the constant ghosts.
        (2..n - 2)
            .map(|i| (snap.alpha()[i] - nodes[i].cos()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn sine_profile_converges_fourth_order() {
        let e1 = sine_alpha_error(64);
        let e2 = sine_alpha_error(128);
        let order = (e1 / e2).log2();
        assert!(order > 3.5, "measured order {order}");
        assert!(e2 < 1e-5);
    }

    #[test]
    fn alpha_plus_beta_is_twice_ux() {
        let n = 128;
        let fr = frame(
            -6.0,
            6.0,
            n,
            1.4,
            System::Full,
            EdgeState {
                u: 0.0,
                eta: 1.0,
                m: 1.0,
            },
        );
        let nodes = fr.grid.nodes();
        let u: Vec<f64> = nodes.iter().map(|x| (-(x * x)).exp()).collect();
        let eta: Vec<f64> = nodes.iter().map(|x| 1.0 + 0.3 * (-(x * x)).exp()).collect();
        let m: Vec<f64> = nodes.iter().map(|x| 1.0 + 0.2 * (-(x * x) / 2.0).exp()).collect();
        let snap = FieldSnapshot::from_arrays(fr, 0.0, u, eta, m).unwrap();
        for i in 0..n {
            assert_relative_eq!(snap.alpha()[i] + snap.beta()[i], 2.0 * snap.ux()[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn interpolation_is_exact_for_cubics() {
        let fr = frame(0.0, 1.0, 32, 3.0, System::PSystem, UNIT);
        let g = fr.grid;
        let f = |x: f64| 1.0 + x - 2.0 * x * x + 0.5 * x * x * x;
        let vals: Vec<f64> = g.nodes().iter().map(|&x| f(x)).collect();
        for x in [0.1, 0.33, 0.5, 0.77, 0.9] {
            let v = interp_space(&vals, 0.0, 0.0, &g, x).unwrap();
            assert_relative_eq!(v, f(x), epsilon = 1e-13);
        }
        assert!(interp_space(&vals, 0.0, 0.0, &g, 1.5).is_err());
    }

    #[test]
    fn p_system_requires_unit_entropy() {
        let fr = frame(0.0, 1.0, 16, 3.0, System::PSystem, UNIT);
        assert!(FieldSnapshot::from_arrays(fr, 0.0, vec![0.0; 16], vec![1.0; 16], vec![1.1; 16]).is_err());
    }

    #[test]
    fn rejects_nonpositive_eta() {
        let fr = frame(0.0, 1.0, 16, 3.0, System::Full, UNIT);
        let mut eta = vec![1.0; 16];
        eta[3] = 0.0;
        assert!(FieldSnapshot::from_arrays(fr, 0.0, vec![0.0; 16], eta, vec![1.0; 16]).is_err());
    }

    proptest! {
        #[test]
        fn scaling_preserves_sign(amp in -2.0f64..2.0, eta0 in 0.1f64..5.0, eps in 0.01f64..0.24) {
            let n = 32;
            let fr = frame(-4.0, 4.0, n, 2.0, System::Full, EdgeState { u: 0.0, eta: eta0, m: 1.0 });
            let nodes = fr.grid.nodes();
            let u: Vec<f64> = nodes.iter().map(|x| amp * (-(x * x)).exp() * x).collect();
            let eta: Vec<f64> = nodes.iter().map(|x| eta0 * (1.0 + 0.5 * (-(x * x)).exp())).collect();
            let snap = FieldSnapshot::from_arrays(fr, 0.0, u, eta, vec![1.0; n]).unwrap();
            let (ae, be) = scaled_gradients(&snap, eps).unwrap();
            for i in 0..n {
                prop_assert_eq!(ae[i].signum(), snap.alpha()[i].signum());
                prop_assert_eq!(be[i].signum(), snap.beta()[i].signum());
            }
        }
    }
}
