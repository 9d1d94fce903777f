//! Gamma-law gas closure in the (eta, m) working variables.
//!
//! `eta` replaces the specific volume and `m = exp(S / (2 c_v))` replaces the
//! entropy. With these variables pressure and the Lagrangian sound speed are
//! plain power laws:
//!
//! ```text
//! tau = K_tau eta^(-2/(gamma-1))
//! p   = K_p m^2 eta^(2 gamma/(gamma-1))
//! c   = K_c m   eta^((gamma+1)/(gamma-1))
//! ```

use crate::error::{domain, Result};

const IDENTITY_TOL: f64 = 1e-12;

/// The three positive constants of the gamma-law closure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub k_tau: f64,
    pub k_p: f64,
    pub k_c: f64,
}

/// Computes `K_tau`, `K_p`, `K_c` for pressure constant `k` and exponent `gamma`.
pub fn derive_constants(k: f64, gamma: f64) -> Result<DerivedConstants> {
    if !(k.is_finite() && k > 0.0) {
        return domain(format!("pressure constant must be positive, got {k}"));
    }
    if !(gamma.is_finite() && gamma > 1.0) {
        return domain(format!("gamma must exceed 1, got {gamma}"));
    }
    let root = (k * gamma).sqrt();
    let k_tau = (2.0 * root / (gamma - 1.0)).powf(2.0 / (gamma - 1.0));
    let k_p = k * k_tau.powf(-gamma);
    let k_c = root * k_tau.powf(-(gamma + 1.0) / 2.0);
    if ![k_tau, k_p, k_c].iter().all(|v| v.is_finite() && *v > 0.0) {
        return domain(format!(
            "derived constants are not representable for K = {k}, gamma = {gamma}"
        ));
    }
    Ok(DerivedConstants { k_tau, k_p, k_c })
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Ideal polytropic gas. Immutable once built; construction fails if the
/// derived constants are not finite or violate the closure identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasModel {
    k: f64,
    gamma: f64,
    c_v: f64,
    consts: DerivedConstants,
}

impl GasModel {
    pub fn new(k: f64, gamma: f64, c_v: f64) -> Result<Self> {
        if !(c_v.is_finite() && c_v > 0.0) {
            return domain(format!("c_v must be positive, got {c_v}"));
        }
        let consts = derive_constants(k, gamma)?;
        let DerivedConstants { k_tau, k_p, k_c } = consts;
        let e1 = rel_err(k_p, (gamma - 1.0) / (2.0 * gamma) * k_c);
        let e2 = rel_err(k_tau * k_c, (gamma - 1.0) / 2.0);
        if e1 > IDENTITY_TOL || e2 > IDENTITY_TOL {
            return domain(format!(
                "closure identities fail for K = {k}, gamma = {gamma} (rel errors {e1:e}, {e2:e})"
            ));
        }
        Ok(Self { k, gamma, c_v, consts })
    }

    /// Model with `c_v = 1`.
    pub fn with_unit_cv(k: f64, gamma: f64) -> Result<Self> {
        Self::new(k, gamma, 1.0)
    }

    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn c_v(&self) -> f64 {
        self.c_v
    }
    pub fn constants(&self) -> DerivedConstants {
        self.consts
    }
    pub fn k_tau(&self) -> f64 {
        self.consts.k_tau
    }
    pub fn k_p(&self) -> f64 {
        self.consts.k_p
    }
    pub fn k_c(&self) -> f64 {
        self.consts.k_c
    }

    /// Exponent of eta in the sound speed, `(gamma+1)/(gamma-1)`.
    pub fn speed_exponent(&self) -> f64 {
        (self.gamma + 1.0) / (self.gamma - 1.0)
    }

    pub fn eta_from_tau(&self, tau: f64) -> Result<f64> {
        if !(tau > 0.0) {
            return domain(format!("specific volume must be positive, got {tau}"));
        }
        let g = self.gamma;
        Ok(2.0 * (self.k * g).sqrt() / (g - 1.0) * tau.powf(-(g - 1.0) / 2.0))
    }

    pub fn tau_from_eta(&self, eta: f64) -> Result<f64> {
        if !(eta > 0.0) {
            return domain(format!("eta must be positive, got {eta}"));
        }
        Ok(self.tau_unchecked(eta))
    }

    pub fn eta_from_rho(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return domain(format!("density must be positive, got {rho}"));
        }
        self.eta_from_tau(1.0 / rho)
    }

    pub fn pressure(&self, eta: f64, m: f64) -> Result<f64> {
        check_pair(eta, m)?;
        Ok(self.pressure_unchecked(eta, m))
    }

    pub fn wave_speed(&self, eta: f64, m: f64) -> Result<f64> {
        check_pair(eta, m)?;
        Ok(self.wave_speed_unchecked(eta, m))
    }

    /// Specific internal energy `p tau / (gamma - 1)`.
    pub fn internal_energy(&self, p: f64, tau: f64) -> Result<f64> {
        if !(p > 0.0 && tau > 0.0) {
            return domain(format!("internal energy needs p, tau > 0 (got {p}, {tau})"));
        }
        Ok(p * tau / (self.gamma - 1.0))
    }

    /// Entropy variable `m = exp(S / (2 c_v))`.
    pub fn m_from_entropy(&self, s: f64) -> f64 {
        m_from_entropy(s, self.c_v)
    }

    pub fn entropy_from_m(&self, m: f64) -> Result<f64> {
        if !(m > 0.0) {
            return domain(format!("m must be positive, got {m}"));
        }
        Ok(2.0 * self.c_v * m.ln())
    }

    /// Full thermodynamic state from the working variables.
    pub fn state(&self, u: f64, eta: f64, m: f64) -> Result<ThermoState> {
        check_pair(eta, m)?;
        let tau = self.tau_unchecked(eta);
        let p = self.pressure_unchecked(eta, m);
        Ok(ThermoState {
            u,
            eta,
            m,
            tau,
            rho: 1.0 / tau,
            p,
            c: self.wave_speed_unchecked(eta, m),
            entropy: 2.0 * self.c_v * m.ln(),
            e: p * tau / (self.gamma - 1.0),
        })
    }

    #[inline]
    pub(crate) fn tau_unchecked(&self, eta: f64) -> f64 {
        self.consts.k_tau * eta.powf(-2.0 / (self.gamma - 1.0))
    }

    #[inline]
    pub(crate) fn pressure_unchecked(&self, eta: f64, m: f64) -> f64 {
        self.consts.k_p * m * m * eta.powf(2.0 * self.gamma / (self.gamma - 1.0))
    }

    #[inline]
    pub(crate) fn wave_speed_unchecked(&self, eta: f64, m: f64) -> f64 {
        self.consts.k_c * m * eta.powf(self.speed_exponent())
    }

    /// Weight `eta^(2 eps/(gamma-1))` turning alpha, beta into their scaled forms.
    #[inline]
    pub fn eps_weight(&self, eta: f64, eps: f64) -> f64 {
        eta.powf(2.0 * eps / (self.gamma - 1.0))
    }
}

pub fn m_from_entropy(s: f64, c_v: f64) -> f64 {
    (s / (2.0 * c_v)).exp()
}

fn check_pair(eta: f64, m: f64) -> Result<()> {
    if !(eta > 0.0) {
        return domain(format!("eta must be positive, got {eta}"));
    }
    if !(m > 0.0) {
        return domain(format!("m must be positive, got {m}"));
    }
    Ok(())
}

/// Point state with every derived thermodynamic quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoState {
    pub u: f64,
    pub eta: f64,
    pub m: f64,
    pub tau: f64,
    pub rho: f64,
    pub p: f64,
    pub c: f64,
    pub entropy: f64,
    pub e: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gamma3() -> GasModel {
        GasModel::with_unit_cv(1.0, 3.0).unwrap()
    }

    #[test]
    fn constants_for_gamma_three() {
        let c = derive_constants(1.0, 3.0).unwrap();
        assert_relative_eq!(c.k_tau, 3f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(c.k_p, 3f64.powf(-1.5), max_relative = 1e-14);
        assert_relative_eq!(c.k_c, 1.0 / 3f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(c.k_tau * c.k_c, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(derive_constants(1.0, 1.0).is_err());
        assert!(derive_constants(1.0, 0.5).is_err());
        assert!(derive_constants(0.0, 2.0).is_err());
        assert!(derive_constants(-1.0, 2.0).is_err());
        assert!(GasModel::new(1.0, 2.0, 0.0).is_err());
        // K_tau overflows for gamma this close to 1.
        assert!(derive_constants(500.0, 1.01).is_err());
    }

    #[test]
    fn eta_tau_pair() {
        let g = gamma3();
        assert_relative_eq!(g.eta_from_tau(3f64.sqrt()).unwrap(), 1.0, max_relative = 1e-14);
        for tau in [0.1, 1.0, 10.0] {
            let back = g.tau_from_eta(g.eta_from_tau(tau).unwrap()).unwrap();
            assert_relative_eq!(back, tau, max_relative = 1e-12);
        }
        assert!(g.eta_from_tau(0.0).is_err());
        assert!(g.tau_from_eta(-1.0).is_err());
        let mut prev = f64::INFINITY;
        for tau in [1.0, 1e2, 1e4, 1e8] {
            let eta = g.eta_from_tau(tau).unwrap();
            assert!(eta < prev && eta > 0.0);
            prev = eta;
        }
        assert!(prev < 1e-7);
    }

    #[test]
    fn pressure_and_speed_at_unit_state() {
        let g = gamma3();
        assert_relative_eq!(g.pressure(1.0, 1.0).unwrap(), 0.1924500897298753, max_relative = 1e-12);
        assert_relative_eq!(
            g.wave_speed(1.0, 1.0).unwrap(),
            0.5773502691896258,
            max_relative = 1e-12
        );
        assert_eq!(m_from_entropy(0.0, 3.7), 1.0);
        assert!(g.pressure(0.0, 1.0).is_err());
        assert!(g.wave_speed(1.0, -1.0).is_err());
    }

    #[test]
    fn sound_speed_matches_pressure_derivative() {
        // c^2 = -dp/dtau at fixed entropy, by centered differences in tau.
        for gamma in [1.4, 5.0 / 3.0, 3.0, 7.0] {
            let g = GasModel::with_unit_cv(1.0, gamma).unwrap();
            let (tau, m) = (1.0, 1.0);
            let d = 1e-6 * tau;
            let p = |t: f64| g.pressure(g.eta_from_tau(t).unwrap(), m).unwrap();
            let dpdtau = (p(tau + d) - p(tau - d)) / (2.0 * d);
            let c = g.wave_speed(g.eta_from_tau(tau).unwrap(), m).unwrap();
            assert_relative_eq!(c * c, -dpdtau, max_relative = 1e-6);
        }
    }

    #[test]
    fn state_energy_relation() {
        let g = GasModel::new(2.0, 1.4, 0.7).unwrap();
        let st = g.state(0.3, 1.7, 1.2).unwrap();
        assert_relative_eq!(st.rho * st.tau, 1.0, max_relative = 1e-15);
        assert_relative_eq!(st.e, st.p * st.tau / 0.4, max_relative = 1e-14);
        assert_relative_eq!(g.m_from_entropy(st.entropy), 1.2, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn closure_identities_hold(k in 1e-2f64..1e2, gamma in 1.1f64..10.0) {
            let c = derive_constants(k, gamma).unwrap();
            let e1 = rel_err(c.k_p, (gamma - 1.0) / (2.0 * gamma) * c.k_c);
            let e2 = rel_err(c.k_tau * c.k_c, (gamma - 1.0) / 2.0);
            prop_assert!(e1 <= 1e-12 && e2 <= 1e-12);
        }

        #[test]
        fn unit_entropy_is_p_system_closure(k in 0.1f64..10.0, gamma in 1.05f64..8.0, tau in 0.05f64..20.0) {
            let g = GasModel::with_unit_cv(k, gamma).unwrap();
            let p = g.pressure(g.eta_from_tau(tau).unwrap(), 1.0).unwrap();
            prop_assert!(rel_err(p, k * tau.powf(-gamma)) <= 1e-12);
        }

        #[test]
        fn eta_tau_monotone_inverse(tau in 1e-3f64..1e3, f in 1.001f64..3.0) {
            let g = GasModel::with_unit_cv(1.3, 2.2).unwrap();
            let a = g.eta_from_tau(tau).unwrap();
            let b = g.eta_from_tau(tau * f).unwrap();
            prop_assert!(b < a);
            prop_assert!(rel_err(g.tau_from_eta(a).unwrap(), tau) <= 1e-12);
        }
    }
}
