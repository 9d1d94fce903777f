//! Plain-text artifacts: CSV tables, the key-value run manifest, and
//! reloading a stored history.
//!
//! Numbers are written with 17 significant digits so that a reloaded history
//! is bit-identical to the one that was written.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::characteristics::CharacteristicPath;
use crate::error::{Error, Result};
use crate::fields::{
    riemann_invariants, scaled_gradients, EdgeState, EntropyProfile, FieldSnapshot, Frame, Grid1D, System,
};
use crate::monitors::MonitorReport;
use crate::scenario::{ScenarioKind, ScenarioSpec};
use crate::solver::{SolutionHistory, SolverConfig, StopReason, Storage};
use crate::thermo::GasModel;

pub const MANIFEST_NAME: &str = "manifest.txt";
pub const MANIFEST_FORMAT: &str = "euler1d-run-1";
/// Prefix of manifest keys naming emitted files.
pub const FILE_PREFIX: &str = "file.";

pub const SNAPSHOT_COLUMNS: [&str; 12] = ["x", "u", "eta", "m", "tau", "rho", "p", "c", "s", "r", "alpha", "beta"];
pub const PATH_COLUMNS: [&str; 11] = [
    "t",
    "x",
    "eta",
    "m",
    "c",
    "k1",
    "k2",
    "k1_eps",
    "k2_eps",
    "carried_value",
    "field_value",
];
pub const REPORT_COLUMNS: [&str; 12] = [
    "t",
    "min_rho",
    "floor",
    "max_alpha",
    "max_beta",
    "max_alpha_eps",
    "max_beta_eps",
    "max_ux",
    "max_rho_eps_ux",
    "eta_bound",
    "u_bound",
    "verdict_bits",
];

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("not a number: '{s}'")))
}

/// A numeric CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn from_columns(names: &[&str], data: &[&[f64]]) -> Result<Self> {
        let len = data.first().map_or(0, |c| c.len());
        if names.len() != data.len() || data.iter().any(|c| c.len() != len) {
            return Err(Error::InvalidConfig("table columns differ in length".into()));
        }
        let mut t = Self::new(names);
        t.rows = (0..len).map(|i| data.iter().map(|c| c[i]).collect()).collect();
        Ok(t)
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Parse(format!("missing column '{name}'")))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn render(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty table".into()))?;
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let row = line.split(',').map(parse_f64).collect::<Result<Vec<f64>>>()?;
            if row.len() != columns.len() {
                return Err(Error::Parse(format!(
                    "row {} has {} cells, expected {}",
                    k + 1,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?)
    }
}

/// Snapshot table; the scaled gradients are appended when `epsilon` is set.
pub fn snapshot_table(snap: &FieldSnapshot, epsilon: Option<f64>) -> Result<Table> {
    let x = snap.grid().nodes();
    let tau = snap.tau();
    let rho = snap.rho();
    let p = snap.pressure();
    let c = snap.wave_speed();
    let (s, r) = riemann_invariants(snap);
    let mut names: Vec<&str> = SNAPSHOT_COLUMNS.to_vec();
    let mut cols: Vec<&[f64]> = vec![
        &x,
        snap.u(),
        snap.eta(),
        snap.m(),
        &tau,
        &rho,
        &p,
        &c,
        &s,
        &r,
        snap.alpha(),
        snap.beta(),
    ];
    let scaled;
    if let Some(e) = epsilon {
        scaled = scaled_gradients(snap, e)?;
        names.extend(["alpha_eps", "beta_eps"]);
        cols.push(&scaled.0);
        cols.push(&scaled.1);
    }
    Table::from_columns(&names, &cols)
}

pub fn path_table(path: &CharacteristicPath) -> Table {
    let mut t = Table::new(&PATH_COLUMNS);
    for s in &path.samples {
        t.rows.push(vec![
            s.t,
            s.x,
            s.local.eta,
            s.local.m,
            s.local.c,
            s.coeffs.k1,
            s.coeffs.k2,
            s.coeffs.k1_eps,
            s.coeffs.k2_eps,
            s.carried.unwrap_or(f64::NAN),
            s.field.unwrap_or(f64::NAN),
        ]);
    }
    t
}

pub fn report_table(report: &MonitorReport) -> Table {
    let mut t = Table::new(&REPORT_COLUMNS);
    for r in &report.records {
        t.rows.push(vec![
            r.t,
            r.min_rho,
            r.floor,
            r.max_alpha,
            r.max_beta,
            r.max_alpha_eps,
            r.max_beta_eps,
            r.max_ux,
            r.max_rho_eps_ux,
            r.eta_bound,
            r.u_bound,
            r.verdict_bits as f64,
        ]);
    }
    t
}

/// Ordered key-value manifest. Later `set` calls replace earlier values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn set_f64(&mut self, key: impl Into<String>, value: f64) {
        self.set(key, fmt_f64(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Parse(format!("manifest is missing '{key}'")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        parse_f64(self.require(key)?)
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(parse_f64).transpose()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Entries whose key starts with `prefix`, with the prefix removed.
    pub fn with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.entries
            .iter()
            .filter_map(move |(k, v)| k.strip_prefix(prefix).map(|rest| (rest, v.as_str())))
    }

    pub fn add_file(&mut self, role: &str, name: &str) {
        self.set(format!("{FILE_PREFIX}{role}"), name);
    }

    /// Every file the manifest references, in order.
    pub fn files(&self) -> Vec<&str> {
        self.with_prefix(FILE_PREFIX).map(|(_, v)| v).collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Self::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", k + 1)))?;
            m.set(key.trim(), value.trim());
        }
        Ok(m)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let m = Self::parse(&text)?;
        if m.get("format") != Some(MANIFEST_FORMAT) {
            return Err(Error::Parse(format!("{} is not a run manifest", path.display())));
        }
        Ok(m)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(MANIFEST_NAME), self.render())?;
        Ok(())
    }
}

fn storage_str(s: Storage) -> String {
    match s {
        Storage::Stride(k) => format!("stride:{k}"),
        Storage::Interval(dt) => format!("interval:{}", fmt_f64(dt)),
    }
}

pub fn parse_storage(s: &str) -> Result<Storage> {
    match s.split_once(':') {
        Some(("stride", k)) => k
            .trim()
            .parse()
            .map(Storage::Stride)
            .map_err(|_| Error::Parse(format!("bad stride '{k}'"))),
        Some(("interval", dt)) => Ok(Storage::Interval(parse_f64(dt)?)),
        _ => Err(Error::Parse(format!(
            "bad storage '{s}', expected stride:K or interval:DT"
        ))),
    }
}

/// Records the scenario and gas parameters. User-defined samples are written
/// to `user_data.csv` in `dir`.
pub fn record_spec(manifest: &mut Manifest, spec: &ScenarioSpec, dir: &Path) -> Result<()> {
    manifest.set("scenario", spec.name());
    manifest.set_f64("gamma", spec.gamma);
    manifest.set_f64("k", spec.k);
    manifest.set_f64("c_v", spec.c_v);
    if let Some(e) = spec.epsilon {
        manifest.set_f64("epsilon", e);
    }
    for (k, v) in spec.kind.params() {
        manifest.set_f64(format!("param.{k}"), v);
    }
    if let ScenarioKind::UserDefined {
        x_min,
        x_max,
        u,
        eta,
        m,
    } = &spec.kind
    {
        let grid = Grid1D::new(*x_min, *x_max, u.len())?;
        Table::from_columns(&["x", "u", "eta", "m"], &[&grid.nodes(), u, eta, m])?.write(&dir.join("user_data.csv"))?;
        manifest.add_file("user_data", "user_data.csv");
    }
    Ok(())
}

/// Reads node samples `x, u, eta[, m]` on a uniform cell-centred grid.
pub fn read_user_data(path: &Path) -> Result<ScenarioKind> {
    let t = Table::read(path)?;
    let x = t.column("x")?;
    let u = t.column("u")?;
    let eta = t.column("eta")?;
    let m = t.column("m").unwrap_or_else(|_| vec![1.0; x.len()]);
    if x.len() < 2 {
        return Err(Error::InvalidScenario("user data needs at least two nodes".into()));
    }
    let h = x[1] - x[0];
    for (k, w) in x.windows(2).enumerate() {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0) || !(h > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "user nodes are not uniform near row {}",
                k + 1
            )));
        }
    }
    let x_min = x[0] - 0.5 * h;
    let x_max = x[x.len() - 1] + 0.5 * h;
    Ok(ScenarioKind::UserDefined {
        x_min,
        x_max,
        u,
        eta,
        m,
    })
}

pub fn spec_from_manifest(manifest: &Manifest, dir: &Path) -> Result<ScenarioSpec> {
    let name = manifest.require("scenario")?;
    let kind = if name == "user_defined" {
        read_user_data(&dir.join(manifest.require("file.user_data")?))?
    } else {
        let params: BTreeMap<String, f64> = manifest
            .with_prefix("param.")
            .map(|(k, v)| Ok((k.to_string(), parse_f64(v)?)))
            .collect::<Result<_>>()?;
        ScenarioKind::from_params(name, &params)?
    };
    let mut spec = ScenarioSpec::new(kind, manifest.f64("gamma")?);
    spec.k = manifest.f64("k")?;
    spec.c_v = manifest.f64("c_v")?;
    spec.epsilon = manifest.opt_f64("epsilon")?;
    spec.validate()?;
    Ok(spec)
}

pub fn record_config(manifest: &mut Manifest, config: &SolverConfig) {
    manifest.set_f64("cfl", config.cfl);
    manifest.set_f64("t_end", config.t_end);
    manifest.set("storage", storage_str(config.storage));
    manifest.set_f64("ux_growth_limit", config.ux_growth_limit);
    manifest.set_f64("min_resolved_cells", config.min_resolved_cells);
    manifest.set_f64("resolution_growth", config.resolution_growth);
    manifest.set_f64("rho_floor_fraction", config.rho_floor_fraction);
}

pub fn config_from_manifest(manifest: &Manifest) -> Result<SolverConfig> {
    let d = SolverConfig::default();
    let get = |k: &str, dflt: f64| -> Result<f64> { Ok(manifest.opt_f64(k)?.unwrap_or(dflt)) };
    let c = SolverConfig {
        cfl: manifest.f64("cfl")?,
        t_end: manifest.f64("t_end")?,
        storage: parse_storage(manifest.require("storage")?)?,
        ux_growth_limit: get("ux_growth_limit", d.ux_growth_limit)?,
        min_resolved_cells: get("min_resolved_cells", d.min_resolved_cells)?,
        resolution_growth: get("resolution_growth", d.resolution_growth)?,
        rho_floor_fraction: get("rho_floor_fraction", d.rho_floor_fraction)?,
        boundary: d.boundary,
    };
    c.validate()?;
    Ok(c)
}

fn record_edge(manifest: &mut Manifest, side: &str, e: &EdgeState) {
    manifest.set_f64(format!("{side}.u"), e.u);
    manifest.set_f64(format!("{side}.eta"), e.eta);
    manifest.set_f64(format!("{side}.m"), e.m);
}

fn read_edge(manifest: &Manifest, side: &str) -> Result<EdgeState> {
    Ok(EdgeState {
        u: manifest.f64(&format!("{side}.u"))?,
        eta: manifest.f64(&format!("{side}.eta"))?,
        m: manifest.f64(&format!("{side}.m"))?,
    })
}

/// Writes one CSV per stored snapshot into `dir` and records the frame,
/// stop information, stored times and file names in `manifest`.
pub fn write_history(
    dir: &Path,
    history: &SolutionHistory,
    epsilon: Option<f64>,
    manifest: &mut Manifest,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    manifest.set("format", MANIFEST_FORMAT);
    let f = history.frame();
    manifest.set("system", f.system.name());
    manifest.set_f64("x_min", f.grid.x_min());
    manifest.set_f64("x_max", f.grid.x_max());
    manifest.set("n", f.grid.n());
    record_edge(manifest, "left", &f.left);
    record_edge(manifest, "right", &f.right);
    manifest.set("stop_reason", history.stop_reason());
    manifest.set_f64("stop_time", history.stop_time());
    manifest.set("steps", history.steps());
    manifest.set("snapshots", history.len());
    for (k, snap) in history.snapshots().iter().enumerate() {
        let name = format!("snapshot_{k:05}.csv");
        snapshot_table(snap, epsilon)?.write(&dir.join(&name))?;
        manifest.set_f64(format!("time.{k:05}"), snap.t());
        manifest.add_file(&format!("snapshot.{k:05}"), &name);
    }
    Ok(())
}

/// Rebuilds the stored history from the manifest-listed snapshot files.
pub fn load_history(dir: &Path, manifest: &Manifest) -> Result<SolutionHistory> {
    let model = GasModel::new(manifest.f64("k")?, manifest.f64("gamma")?, manifest.f64("c_v")?)?;
    let n: usize = manifest
        .require("n")?
        .parse()
        .map_err(|_| Error::Parse("bad n".into()))?;
    let grid = Grid1D::new(manifest.f64("x_min")?, manifest.f64("x_max")?, n)?;
    let frame = Arc::new(Frame {
        grid,
        model,
        system: System::parse(manifest.require("system")?)?,
        left: read_edge(manifest, "left")?,
        right: read_edge(manifest, "right")?,
    });
    let count: usize = manifest
        .require("snapshots")?
        .parse()
        .map_err(|_| Error::Parse("bad snapshot count".into()))?;
    let mut entropy: Option<Arc<EntropyProfile>> = None;
    let mut snaps = Vec::with_capacity(count);
    for k in 0..count {
        let name = manifest.require(&format!("{FILE_PREFIX}snapshot.{k:05}"))?;
        let t = manifest.f64(&format!("time.{k:05}"))?;
        let table = Table::read(&dir.join(name))?;
        let (u, eta, m) = (table.column("u")?, table.column("eta")?, table.column("m")?);
        if u.len() != n {
            return Err(Error::Parse(format!("{name}: {} rows, expected {n}", u.len())));
        }
        let profile = match &entropy {
            Some(p) if p.m == m => p.clone(),
            Some(_) => {
                return Err(Error::Parse(format!(
                    "{name}: entropy profile differs from the first snapshot"
                )))
            }
            None => {
                let p = Arc::new(EntropyProfile::new(m, &frame)?);
                entropy = Some(p.clone());
                p
            }
        };
        snaps.push(FieldSnapshot::new(frame.clone(), profile, t, u, eta)?);
    }
    let reason = StopReason::parse(manifest.require("stop_reason")?)?;
    let steps = manifest
        .require("steps")?
        .parse()
        .map_err(|_| Error::Parse("bad steps".into()))?;
    SolutionHistory::from_snapshots(snaps, reason, steps)
}
