use std::fs;
use std::path::PathBuf;

use euler1d_core::characteristics::{
    compressive_seeds, estimate_blowup_time, integrate_riccati, trace as trace_path, BlowupOptions, Direction, Family,
    RiccatiKind, TraceOptions,
};
use euler1d_core::fields::{check_epsilon, min_of, System};
use euler1d_core::io::{
    config_from_manifest, load_history, path_table, record_config, record_spec, report_table, spec_from_manifest,
    write_history, Manifest,
};
use euler1d_core::monitors::{bound_constants, check_bounds, fit_decay_exponent, study_slack, study_storage, Slack};
use euler1d_core::{run, Grid1D, ScenarioKind, SolutionHistory, BUILTIN_NAMES};

use crate::config::{RunConfig, DEFAULT_FULL_EPSILON};
use crate::{seeds_from, CliError, DirectionArg, FamilyArg, FitArgs, TraceArgs, VerifyArgs};

/// Runs the configured scenario and writes the run directory. Returns it.
pub fn simulate(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let spec = cfg.spec()?;
    let solver = cfg.solver_config()?;
    let grid = cfg.grid(&spec, solver.t_end)?;
    let out = cfg.out_dir();
    let history = run(&spec, grid, &solver)?;
    let constants = bound_constants(history.initial(), spec.epsilon)?;

    fs::create_dir_all(&out)?;
    let mut manifest = Manifest::new();
    manifest.set("format", euler1d_core::io::MANIFEST_FORMAT);
    record_spec(&mut manifest, &spec, &out)?;
    record_config(&mut manifest, &solver);
    manifest.set("domain", if cfg.x_min.is_some() { "explicit" } else { "auto" });
    if !cfg.seeds.is_empty() {
        let s: Vec<String> = cfg.seeds.iter().map(|v| v.to_string()).collect();
        manifest.set("seeds", s.join(","));
    }
    for (k, v) in constants.entries() {
        manifest.set_f64(format!("constant.{k}"), v);
    }
    write_history(&out, &history, spec.epsilon, &mut manifest)?;
    manifest.write(&out)?;

    println!("scenario: {spec}");
    println!(
        "grid: n = {} on [{}, {}], h = {:.6e}",
        history.grid().n(),
        history.grid().x_min(),
        history.grid().x_max(),
        history.grid().h()
    );
    println!("stop_reason: {}", history.stop_reason());
    println!("stop_time: {}", history.stop_time());
    println!("steps: {}", history.steps());
    println!("snapshots: {}", history.len());
    println!("output: {}", out.display());
    Ok(out)
}

fn manifest_epsilon(
    manifest: &Manifest,
    flag: Option<f64>,
    history: &SolutionHistory,
) -> Result<Option<f64>, CliError> {
    let eps = match flag {
        Some(e) => Some(e),
        None => manifest.opt_f64("epsilon")?,
    };
    if let Some(e) = eps {
        check_epsilon(e).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let isentropic = history.initial().m_x().iter().all(|&v| v == 0.0);
    Ok(if eps.is_none() && !isentropic {
        Some(DEFAULT_FULL_EPSILON)
    } else {
        eps
    })
}

/// Returns `Ok(true)` when every check passes.
pub fn verify(args: &VerifyArgs) -> Result<bool, CliError> {
    if let Some(e) = args.epsilon {
        check_epsilon(e).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(s) = args.slack {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(CliError::Usage(format!(
                "slack must be finite and non-negative, got {s}"
            )));
        }
    }
    let dir = if args.target.is_dir() {
        args.target.clone()
    } else if args.target.is_file() {
        let mut cfg = RunConfig::from_file(&args.target)?;
        if args.out.is_some() {
            cfg.out = args.out.clone();
        }
        if args.epsilon.is_some() {
            cfg.epsilon = args.epsilon;
        }
        simulate(&cfg)?
    } else {
        return Err(CliError::Usage(format!(
            "{} is neither a run directory nor a config file",
            args.target.display()
        )));
    };

    let mut manifest = Manifest::read(&dir)?;
    let history = load_history(&dir, &manifest)?;
    let eps = manifest_epsilon(&manifest, args.epsilon, &history)?;
    let constants = bound_constants(history.initial(), eps)?;
    let scenario = manifest.require("scenario")?.to_string();

    let slack = match args.slack {
        Some(s) => Slack::uniform(s),
        None => {
            let mut spec = spec_from_manifest(&manifest, &dir)?;
            spec.epsilon = eps;
            let mut solver = config_from_manifest(&manifest)?;
            solver.storage = study_storage(&solver);
            let grid = Grid1D::new(manifest.f64("x_min")?, manifest.f64("x_max")?, history.grid().n())?;
            let fine = run(&spec, grid, &solver)?;
            study_slack(&spec, &grid, &solver, &fine, eps)?
        }
    };
    let report = check_bounds(&history, &constants, &scenario, &slack)?;

    fs::write(dir.join("report.txt"), report.summary())?;
    report_table(&report).write(&dir.join("report.csv"))?;
    let json = serde_json::json!({
        "scenario": report.scenario,
        "gamma": report.gamma,
        "epsilon": report.epsilon,
        "exponent": report.exponent.as_ref().map(|f| f.exponent),
        "all_pass": report.all_pass,
    })
    .to_string();
    fs::write(dir.join("report.json"), format!("{json}\n"))?;
    manifest.add_file("report_text", "report.txt");
    manifest.add_file("report_csv", "report.csv");
    manifest.add_file("report_json", "report.json");
    for (k, v) in slack.entries() {
        manifest.set_f64(format!("slack.{k}"), v);
    }
    manifest.set("verify.all_pass", report.all_pass);
    match &report.first_violation {
        Some(v) => {
            manifest.set_f64("verify.first_violation.t", v.t);
            manifest.set("verify.first_violation.check", v.check);
        }
        None => {
            manifest.set("verify.first_violation.t", "none");
            manifest.set("verify.first_violation.check", "none");
        }
    }
    manifest.write(&dir)?;

    print!("{}", report.summary());
    println!("{json}");
    Ok(report.all_pass)
}

pub fn trace(args: &TraceArgs) -> Result<(), CliError> {
    if let Some(e) = args.epsilon {
        check_epsilon(e).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if args.substeps == 0 {
        return Err(CliError::Usage("substeps must be at least 1".into()));
    }
    let mut manifest = Manifest::read(&args.run)?;
    let history = load_history(&args.run, &manifest)?;
    let mut seeds = seeds_from(&args.seeds)?;
    if seeds.is_empty() {
        if let Some(list) = manifest.get("seeds") {
            seeds = crate::config::parse_seeds(list)?;
        }
    }
    if seeds.is_empty() && !args.blowup {
        return Err(CliError::Usage("give at least one --seed (or --blowup)".into()));
    }
    seeds.sort_by(f64::total_cmp);
    let direction = match args.direction {
        DirectionArg::Forward => Direction::ForwardInTime,
        DirectionArg::Backward => Direction::BackwardInTime,
    };
    let t0 = args.t0.unwrap_or(match direction {
        Direction::ForwardInTime => history.initial().t(),
        Direction::BackwardInTime => history.last().t(),
    });
    let families: &[Family] = match args.family {
        FamilyArg::Forward => &[Family::Forward],
        FamilyArg::Backward => &[Family::Backward],
        FamilyArg::Both => &[Family::Forward, Family::Backward],
    };
    let isentropic = history.initial().m_x().iter().all(|&v| v == 0.0);
    let kind = match (args.epsilon, isentropic) {
        (Some(e), _) => RiccatiKind::Scaled(e),
        (None, true) => RiccatiKind::PSystem,
        (None, false) => RiccatiKind::Full,
    };
    let opts = TraceOptions {
        substeps: args.substeps,
        epsilon: args.epsilon,
    };
    let start = manifest.with_prefix("file.path.").count();
    let mut k = start;
    for &family in families {
        for &x0 in &seeds {
            let mut path = trace_path(&history, x0, t0, family, direction, opts)?;
            if direction == Direction::ForwardInTime {
                path = integrate_riccati(&path, &history, kind, f64::MAX)?;
            }
            let name = format!("path_{k:03}.csv");
            path_table(&path).write(&args.run.join(&name))?;
            manifest.add_file(&format!("path.{k:03}"), &name);
            let end = path.samples.last().expect("path has a start sample");
            println!(
                "{name}: family={} x0={} t0={} -> x={} t={} samples={} max_discrepancy={:.3e}",
                family.as_str(),
                x0,
                t0,
                end.x,
                end.t,
                path.samples.len(),
                path.max_discrepancy()
            );
            k += 1;
        }
    }
    if args.blowup {
        let seeds = compressive_seeds(&history, 16);
        match estimate_blowup_time(&history, &seeds, BlowupOptions::default())? {
            Some(b) => {
                println!(
                    "blowup_estimate: t_star={} x={} family={}",
                    b.t_star,
                    b.x_star,
                    b.family.as_str()
                );
                manifest.set_f64("trace.blowup_t_star", b.t_star);
            }
            None => {
                println!("blowup_estimate: none");
                manifest.set("trace.blowup_t_star", "none");
            }
        }
    }
    manifest.write(&args.run)?;
    Ok(())
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let manifest = Manifest::read(&args.run)?;
    let history = load_history(&args.run, &manifest)?;
    let t = history.times();
    let v: Vec<f64> = history.snapshots().iter().map(|s| min_of(&s.rho())).collect();
    let fit = fit_decay_exponent(&t, &v, args.t_a, args.t_b).map_err(|e| CliError::Usage(e.to_string()))?;
    println!(
        "exponent={} max_residual={:.3e} t_a={} t_b={} points={}",
        fit.exponent, fit.max_residual, fit.t_a, fit.t_b, fit.points
    );
    Ok(())
}

pub fn list_scenarios() {
    for name in BUILTIN_NAMES {
        let desc = ScenarioKind::describe(name).unwrap_or("");
        let (system, params) = match ScenarioKind::default_for(name) {
            Ok(kind) => {
                let p: Vec<String> = kind.params().iter().map(|(k, v)| format!("{k}={v}")).collect();
                (kind.system(), p.join(" "))
            }
            Err(_) => (System::Full, "from --user-data".to_string()),
        };
        let system = if name == "user_defined" {
            "p-system or full"
        } else {
            system.name()
        };
        println!("{name}\n  {desc}\n  system: {system}\n  defaults: {params}");
    }
}
