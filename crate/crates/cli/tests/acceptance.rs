//! Acceptance suite. Each test prints one `PASS criterion N` or
//! `FAIL criterion N` line followed by the measured quantities.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use euler1d_core::characteristics::{
    compressive_seeds, estimate_blowup_time, eta_transport_residual, frozen_blowup_time, integrate_riccati_psystem,
    logistic_reference, riccati_rhs, rk4_scalar, trace, BlowupOptions, Direction, Family, RiccatiCoefficients,
    RiccatiKind, TraceOptions,
};
use euler1d_core::io::{load_history, write_history, Manifest};
use euler1d_core::monitors::fixtures::{inject, Mutation};
use euler1d_core::monitors::{bound_constants, check_bounds, fit_decay_exponent, study_slack, Check, Slack};
use euler1d_core::solver::restrict_to_coarse;
use euler1d_core::{derive_constants, run, ScenarioKind, ScenarioSpec, SolverConfig, StopReason, Storage};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn verdict(n: u32, ok: bool, elapsed: Duration, budget: Duration, detail: &str) {
    let ok = ok && elapsed <= budget;
    let tag = if ok { "PASS" } else { "FAIL" };
    println!(
        "{tag} criterion {n}: {detail} ({:.2}s, budget {}s)",
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    assert!(ok, "criterion {n} failed: {detail}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn criterion_01_closure_identities() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let k = 10f64.powf(rng.random_range(-2.0..2.0));
        let gamma = rng.random_range(1.05..8.0);
        let c = derive_constants(k, gamma).unwrap();
        worst = worst.max(rel(c.k_p, (gamma - 1.0) / (2.0 * gamma) * c.k_c));
        worst = worst.max(rel(c.k_tau * c.k_c, (gamma - 1.0) / 2.0));
    }
    let detail = format!("20 random (K, gamma) pairs, worst relative error {worst:.3e}");
    verdict(1, worst <= 1e-12, start.elapsed(), Duration::from_secs(1), &detail);
}

#[test]
fn criterion_02_logistic_oracle() {
    let start = Instant::now();
    // alpha' = -k1 (alpha^2 - alpha beta) with beta = M frozen is logistic.
    let coeffs = RiccatiCoefficients {
        k1: 1.0,
        k2: 0.0,
        k1_eps: f64::NAN,
        k2_eps: f64::NAN,
    };
    let dt = 1e-3;
    let samples = rk4_scalar(
        |_, y| riccati_rhs(RiccatiKind::PSystem, Family::Forward, &coeffs, 3.0, y, 1.0),
        0.5,
        0.0,
        dt,
        5000,
        |_| false,
    );
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (t, idx) in [(0.5, 500usize), (1.0, 1000), (5.0, 5000)] {
        let (ts, y) = samples[idx];
        assert!((ts - t).abs() < 1e-12);
        let err = (y - logistic_reference(1.0, 1.0, 0.5, t).unwrap()).abs();
        worst = worst.max(err);
        parts.push(format!("t={t}: {err:.2e}"));
    }
    let detail = format!("|error| {}", parts.join(", "));
    verdict(2, worst <= 1e-8, start.elapsed(), Duration::from_secs(1), &detail);
}

#[test]
fn criterion_03_solver_self_convergence() {
    let start = Instant::now();
    let spec = ScenarioSpec::builtin("smooth_bump", 3.0).unwrap();
    let cfg = SolverConfig::default().with_t_end(1.0);
    let last = |n: usize| {
        let h = run(&spec, spec.auto_grid(n, 1.0).unwrap(), &cfg).unwrap();
        assert_eq!(h.stop_reason(), StopReason::HorizonReached);
        h.last().clone()
    };
    let levels = [last(512), last(1024), last(2048)];
    let frame = levels[0].frame().clone();
    let diff = |coarse: &[f64], fine: &[f64], l: f64, r: f64| {
        let fine = restrict_to_coarse(fine, l, r);
        coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let eu = [0, 1].map(|i| diff(levels[i].u(), levels[i + 1].u(), frame.left.u, frame.right.u));
    let ee = [0, 1].map(|i| diff(levels[i].eta(), levels[i + 1].eta(), frame.left.eta, frame.right.eta));
    let ou = (eu[0] / eu[1]).log2();
    let oe = (ee[0] / ee[1]).log2();
    let detail = format!(
        "order u {ou:.3} (diffs {:.2e}, {:.2e}), order eta {oe:.3} (diffs {:.2e}, {:.2e})",
        eu[0], eu[1], ee[0], ee[1]
    );
    verdict(
        3,
        ou >= 3.5 && oe >= 3.5,
        start.elapsed(),
        Duration::from_secs(60),
        &detail,
    );
}

#[test]
fn criterion_04_riemann_invariant_transport() {
    let start = Instant::now();
    let spec = ScenarioSpec::builtin("double_rarefaction", 3.0).unwrap();
    let t_end = 10.0;
    let mut drifts = Vec::new();
    let mut residuals = Vec::new();
    let mut hs = Vec::new();
    for n in [256usize, 512, 1024, 2048] {
        let cfg = SolverConfig::default()
            .with_t_end(t_end)
            .with_storage(Storage::Stride(1));
        let grid = spec.auto_grid(n, t_end).unwrap();
        hs.push(grid.h());
        let h = run(&spec, grid, &cfg).unwrap();
        let path = trace(
            &h,
            -1.0,
            0.0,
            Family::Forward,
            Direction::ForwardInTime,
            TraceOptions::default(),
        )
        .unwrap();
        assert!(path.end_time() > 0.5 * t_end);
        let s0 = path.samples[0].local.s();
        drifts.push(
            path.samples
                .iter()
                .map(|q| (q.local.s() - s0).abs())
                .fold(0.0, f64::max),
        );
        let carried = integrate_riccati_psystem(&path, &h).unwrap();
        residuals.push((carried.max_discrepancy(), eta_transport_residual(&path, &h)));
    }
    let orders: Vec<f64> = drifts.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    // C from the coarsest level bounds every finer level.
    let c = drifts[0] / (hs[0] * hs[0]);
    let within = drifts.iter().zip(&hs).all(|(d, h)| *d <= c * h * h * (1.0 + 1e-12));
    let detail = format!(
        "max |s - s0| {:?}, orders {:?}, riccati/field gap at finest {:.2e}",
        drifts.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>(),
        orders.iter().map(|o| format!("{o:.2}")).collect::<Vec<_>>(),
        residuals.last().unwrap().0,
    );
    let ok = within && orders.iter().all(|&o| o >= 1.8);
    verdict(4, ok, start.elapsed(), Duration::from_secs(60), &detail);
}

#[test]
fn criterion_05_invariant_domain() {
    let start = Instant::now();
    let n = 4096;
    let horizon = 10.0;
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ["double_rarefaction", "smooth_bump", "compressive_pulse"] {
        for gamma in [5.0 / 3.0, 2.0, 3.0, 7.0] {
            let spec = ScenarioSpec::builtin(name, gamma).unwrap();
            let grid = spec.auto_grid(n, horizon).unwrap();
            let probe = run(&spec, grid, &SolverConfig::default().with_t_end(horizon)).unwrap();
            // Monitor strictly before gradient blowup when the probe detects it.
            let t_end = match probe.stop_reason() {
                StopReason::HorizonReached => horizon,
                _ => 0.7 * probe.stop_time(),
            };
            let cfg = SolverConfig::default()
                .with_t_end(t_end)
                .with_storage(Storage::Interval(t_end / 50.0));
            let h = run(&spec, grid, &cfg).unwrap();
            let c = bound_constants(h.initial(), None).unwrap();
            let slack = study_slack(&spec, &grid, &cfg, &h, None).unwrap();
            let report = check_bounds(&h, &c, name, &slack).unwrap();
            let max_g = report
                .records
                .iter()
                .map(|r| r.max_alpha.max(r.max_beta))
                .fold(f64::MIN, f64::max);
            let domain_ok = !report
                .failed_checks()
                .iter()
                .any(|c| matches!(c, Check::InvariantDomain | Check::RunningMax));
            ok &= domain_ok && report.all_pass;
            lines.push(format!(
                "{name} gamma={gamma:.3} t_end={t_end:.2} max grad {max_g:.4e} M {:.4e} slack {:.1e} {}",
                c.m,
                slack.gradient,
                if report.all_pass { "ok" } else { "FAIL" }
            ));
        }
    }
    for l in &lines {
        println!("  {l}");
    }
    verdict(
        5,
        ok,
        start.elapsed(),
        Duration::from_secs(600),
        "12 scenario/gamma combinations at n=4096",
    );
}

#[test]
fn criterion_06_density_decay_sharpness() {
    let start = Instant::now();
    let t_end = 50.0;
    let mut ok = true;
    let mut parts = Vec::new();
    for gamma in [3.0f64, 5.0 / 3.0] {
        // Unit background density; velocity jump large enough to open a vacuum-like expansion.
        let eta0 = 2.0 * gamma.sqrt() / (gamma - 1.0);
        let kind = ScenarioKind::DoubleRarefaction {
            amplitude: 1.25 * eta0,
            width: 1.0,
            eta0,
        };
        let spec = ScenarioSpec::new(kind, gamma);
        let grid = spec.auto_grid(2048, t_end).unwrap();
        let cfg = SolverConfig::default()
            .with_t_end(t_end)
            .with_storage(Storage::Interval(1.0));
        let h = run(&spec, grid, &cfg).unwrap();
        assert_eq!(h.stop_reason(), StopReason::HorizonReached);
        let c = bound_constants(h.initial(), None).unwrap();
        let slack = study_slack(&spec, &grid, &cfg, &h, None).unwrap();
        let report = check_bounds(&h, &c, spec.name(), &slack).unwrap();
        let (times, min_rho) = report.min_rho_series();
        let fit = fit_decay_exponent(&times, &min_rho, 5.0, 50.0).unwrap();
        let floor_ok = report
            .records
            .iter()
            .all(|r| r.verdict_bits & Check::DensityFloor.bit() == 0);
        let exp_ok = (-1.05..=-0.95).contains(&fit.exponent);
        ok &= floor_ok && exp_ok && report.all_pass;
        let margin = report
            .records
            .iter()
            .map(|r| r.min_rho - r.floor)
            .fold(f64::MAX, f64::min);
        parts.push(format!(
            "gamma={gamma:.3} exponent {:.4} over {} points, min(min rho - floor) {margin:.3e}, slack {:.1e}",
            fit.exponent, fit.points, slack.density
        ));
    }
    verdict(6, ok, start.elapsed(), Duration::from_secs(300), &parts.join("; "));
}

fn entropy_runs() -> Vec<(f64, euler1d_core::monitors::MonitorReport)> {
    let t_end = 20.0;
    [0.1, 0.2]
        .into_iter()
        .map(|eps| {
            let spec = ScenarioSpec::builtin("entropy_bump", 1.4).unwrap().with_epsilon(eps);
            let grid = spec.auto_grid(2048, t_end).unwrap();
            let cfg = SolverConfig::default()
                .with_t_end(t_end)
                .with_storage(Storage::Interval(t_end / 50.0));
            let h = run(&spec, grid, &cfg).unwrap();
            assert_eq!(h.stop_reason(), StopReason::HorizonReached);
            let c = bound_constants(h.initial(), Some(eps)).unwrap();
            let slack = study_slack(&spec, &grid, &cfg, &h, Some(eps)).unwrap();
            (eps, check_bounds(&h, &c, "entropy_bump", &slack).unwrap())
        })
        .collect()
}

#[test]
fn criterion_07_08_full_euler_bounds() {
    let start = Instant::now();
    let runs = entropy_runs();
    let elapsed = start.elapsed();
    let mut ok7 = true;
    let mut ok8 = true;
    let mut d7 = Vec::new();
    let mut d8 = Vec::new();
    for (eps, r) in &runs {
        let bits7 = Check::ScaledDomain.bit() | Check::WeightedSlope.bit() | Check::DensityFloor.bit();
        let bits8 = Check::VelocityBound.bit() | Check::EtaBound.bit();
        let fails = r.records.iter().fold(0, |a, t| a | t.verdict_bits);
        ok7 &= fails & bits7 == 0;
        ok8 &= fails & bits8 == 0;
        let c = &r.constants;
        let max_scaled = r
            .records
            .iter()
            .map(|t| t.max_alpha_eps.max(t.max_beta_eps))
            .fold(f64::MIN, f64::max);
        let max_weighted = r.records.iter().map(|t| t.max_rho_eps_ux).fold(f64::MIN, f64::max);
        let margin = r.records.iter().map(|t| t.min_rho - t.floor).fold(f64::MAX, f64::min);
        d7.push(format!(
            "eps={eps}: max scaled {max_scaled:.4} <= N {:.4}, max rho^eps u_x {max_weighted:.4} <= N0 {:.4}, min(min rho - floor) {margin:.3e}",
            c.n.unwrap(),
            c.n0.unwrap()
        ));
        let max_eta = r.records.iter().map(|t| t.max_eta).fold(f64::MIN, f64::max);
        let max_u = r.records.iter().map(|t| t.max_abs_u).fold(f64::MIN, f64::max);
        d8.push(format!(
            "eps={eps}: max eta {max_eta:.4} <= {:.4}, max |u| {max_u:.4} <= {:.4}",
            c.eta_bound, c.u_bound
        ));
    }
    let budget = Duration::from_secs(600);
    let r7 = std::panic::catch_unwind(|| verdict(7, ok7, elapsed, budget, &d7.join("; ")));
    verdict(8, ok8, elapsed, budget, &d8.join("; "));
    assert!(r7.is_ok(), "criterion 7 failed");
}

#[test]
fn criterion_09_blowup_cross_validation() {
    let start = Instant::now();
    let spec = ScenarioSpec::builtin("compressive_pulse", 3.0).unwrap();
    let t_end = 10.0;
    let cfg = SolverConfig::default()
        .with_t_end(t_end)
        .with_storage(Storage::Stride(1));
    let h = run(&spec, spec.auto_grid(4096, t_end).unwrap(), &cfg).unwrap();
    let solver_t = h.stop_time();
    let suspected = h.stop_reason() == StopReason::BlowupSuspected;
    let seeds = compressive_seeds(&h, 16);
    let est = estimate_blowup_time(&h, &seeds, BlowupOptions::default()).unwrap();
    let frozen = frozen_blowup_time(1.0, -1.0, 1e-3, 1e3).unwrap();
    let (gap, t_star) = match est {
        Some(e) => ((e.t_star - solver_t).abs() / solver_t, e.t_star),
        None => (f64::INFINITY, f64::NAN),
    };
    let detail = format!(
        "solver {} at t={solver_t:.4}, Riccati t*={t_star:.4}, gap {:.2}%; frozen t*={frozen:.5}",
        h.stop_reason(),
        100.0 * gap
    );
    let ok = suspected && gap <= 0.05 && (frozen - 1.0).abs() <= 0.01;
    verdict(9, ok, start.elapsed(), Duration::from_secs(120), &detail);
}

fn euler1d(args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_euler1d"))
        .args(args)
        .env_remove("EULER1D_OUT")
        .output()
        .expect("binary runs");
    out.status.code().expect("exit code")
}

fn corrupt_run(dir: &Path, mutation: Mutation) {
    let mut manifest = Manifest::read(dir).unwrap();
    let h = load_history(dir, &manifest).unwrap();
    let c = bound_constants(h.initial(), None).unwrap();
    let bad = inject(&h, mutation, 2, &c).unwrap();
    write_history(dir, &bad, None, &mut manifest).unwrap();
    manifest.write(dir).unwrap();
}

#[test]
fn criterion_10_mutation_detection() {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();

    let spec = ScenarioSpec::builtin("double_rarefaction", 3.0).unwrap();
    let cfg = SolverConfig::default()
        .with_t_end(2.0)
        .with_storage(Storage::Interval(0.5));
    let h = run(&spec, spec.auto_grid(512, 2.0).unwrap(), &cfg).unwrap();
    let c = bound_constants(h.initial(), None).unwrap();
    let slack = Slack::uniform(1e-6);
    let clean = check_bounds(&h, &c, "double_rarefaction", &slack).unwrap();
    ok &= clean.all_pass;
    for m in Mutation::ALL {
        let r = check_bounds(&inject(&h, m, 2, &c).unwrap(), &c, "double_rarefaction", &slack).unwrap();
        let flagged = r.records[2].verdict_bits & m.target().bit() != 0;
        let first = r.first_violation.as_ref().map(|v| v.t);
        ok &= flagged && !r.all_pass && first == Some(h.times()[2]);
        parts.push(format!(
            "{} -> {} {}",
            m.name(),
            m.target().name(),
            if flagged { "flagged" } else { "MISSED" }
        ));
    }

    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    let run_str = run_dir.to_str().unwrap();
    let common = [
        "--scenario",
        "double_rarefaction",
        "--gamma",
        "3",
        "--n",
        "256",
        "--t-end",
        "2",
        "--out",
        run_str,
    ];
    let sim = euler1d(&[&["simulate"][..], &common[..]].concat());
    let clean_code = euler1d(&["verify", run_str]);
    corrupt_run(&run_dir, Mutation::DoubleVelocity);
    let bad_code = euler1d(&["verify", run_str]);
    let bad_eps = euler1d(&["verify", run_str, "--epsilon", "0.3"]);
    let missing = euler1d(&["verify", tmp.path().join("absent").to_str().unwrap()]);
    let codes_ok = sim == 0 && clean_code == 0 && bad_code == 1 && bad_eps == 2 && missing == 2;
    ok &= codes_ok;
    parts.push(format!(
        "exit codes simulate={sim} clean={clean_code} corrupted={bad_code} eps=0.3 -> {bad_eps} missing -> {missing}"
    ));
    verdict(10, ok, start.elapsed(), Duration::from_secs(60), &parts.join(", "));
}
