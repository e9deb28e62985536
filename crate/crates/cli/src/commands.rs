//! The subcommands. Each returns one [`TaskRecord`] per unit of work; a
//! failing unit is recorded and the rest still run.

use std::cell::Cell;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use serde_json::{json, Value};

use mixtop::egp;
use mixtop::gaussian::{FictitiousHamiltonianGrid, GaussianStateSpec};
use mixtop::geometry::{self, CurvatureField, StateGrid, DEFAULT_JUMP_MARGIN};
use mixtop::io::{self, EgpRow, SpectrumTable};
use mixtop::model::{self, ConstantD, DVector, Direction, MomentumGrid, Qwz, SharedModel, TabulatedModel};
use mixtop::uhlmann::{self, Refinement, ScanOptions};

use crate::config::{log_grid, ConfigError, Format, ModelKind, RunConfig, TemperatureSpec};
use crate::manifest::{TaskRecord, TaskStatus};
use crate::tables::{self, WindingRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Band energies on the momentum grid and the gap around `mu`.
    Spectrum,
    /// EGP phase and modulus over the transverse loop, per direction, chain length and temperature.
    EgpProfile,
    /// EGP Chern numbers from the phase windings.
    EgpWinding,
    /// Uhlmann and EGP Chern numbers over a temperature scan.
    InvariantScan,
    /// Band Chern numbers of `h` and of the fictitious Hamiltonian, with plaquette curvature.
    Chern,
    /// Approach of the finite-temperature EGP to its ground-state reference with chain length.
    GaugeReduction,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::EgpProfile => "egp-profile",
            Command::EgpWinding => "egp-winding",
            Command::InvariantScan => "invariant-scan",
            Command::Chern => "chern",
            Command::GaugeReduction => "gauge-reduction",
        }
    }
}

/// Errors that stop a run before its tasks start.
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config error: {m}"),
            RunError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.0)
    }
}

const DEFAULT_T_OVER_GAP: [f64; 3] = [0.1, 1.0, 20.0];
const GAUGE_T_OVER_GAP: f64 = 20.0;
const GAUGE_N_LIST: [usize; 3] = [10, 50, 100];

/// A state to evaluate, with its temperature in both unit systems.
#[derive(Debug, Clone)]
struct StateEntry {
    label: String,
    spec: GaussianStateSpec,
    temperature: Option<f64>,
    t_over_gap: Option<f64>,
    beta: Option<f64>,
}

impl StateEntry {
    fn record(&self, name: String) -> TaskRecord {
        let mut t = TaskRecord::new(name);
        t.temperature = self.temperature;
        t.t_over_gap = self.t_over_gap;
        t.beta = self.beta;
        t
    }

    fn describe(&self) -> Value {
        json!({
            "label": self.label,
            "T": num(self.temperature),
            "T_over_gap": num(self.t_over_gap),
            "beta": num(self.beta),
        })
    }
}

/// JSON number, or the `inf`/`nan` string for non-finite values.
fn num(x: Option<f64>) -> Value {
    match x {
        Some(v) if v.is_finite() => json!(v),
        Some(v) => json!(io::format_float(v)),
        None => Value::Null,
    }
}

pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub format: Format,
    model: SharedModel,
    /// State read from `hfict_file`, replacing the thermal family.
    fixed_state: Option<GaussianStateSpec>,
    /// Grid imposed by tabulated input.
    table_grid: Option<MomentumGrid>,
    gap: Cell<Option<f64>>,
    pub written: Vec<String>,
}

fn read_table(key: &str, path: &std::path::Path) -> Result<model::MatrixGrid, RunError> {
    io::read_matrix_grid(path).map_err(|e| RunError::Config(format!("key `{key}`: {}: {e}", path.display())))
}

impl Context {
    pub fn new(cfg: RunConfig, out: PathBuf, format: Format) -> Result<Self, RunError> {
        let mut table_grid = None;
        let model: SharedModel = match cfg.model {
            ModelKind::Qwz => Arc::new(Qwz { alpha: cfg.alpha, gamma: cfg.gamma, mass: cfg.mass }),
            ModelKind::Atomic => {
                let [dx, dy, dz] = cfg.atomic_d;
                Arc::new(ConstantD(DVector::new(dx, dy, dz)))
            }
            ModelKind::Tabulated => {
                let path = cfg.h_file.as_ref().ok_or_else(|| RunError::Config("key `h_file` is required".into()))?;
                let table = read_table("h_file", path)?;
                table_grid = Some(table.grid);
                Arc::new(TabulatedModel::new(table).map_err(|e| RunError::Config(format!("key `h_file`: {e}")))?)
            }
        };
        let fixed_state = match &cfg.hfict_file {
            Some(path) => {
                let table = read_table("hfict_file", path)?;
                if table_grid.is_some_and(|g| g != table.grid) {
                    return Err(RunError::Config("keys `h_file` and `hfict_file`: grids differ".into()));
                }
                table_grid = Some(table.grid);
                let grid = FictitiousHamiltonianGrid::new(table)
                    .map_err(|e| RunError::Config(format!("key `hfict_file`: {e}")))?;
                let mut spec = GaussianStateSpec::tabulated(grid);
                if let Some(m) = cfg.gap_margin {
                    spec = spec.with_gap_margin(m);
                }
                Some(spec)
            }
            None => None,
        };
        Ok(Self { cfg, out, format, model, fixed_state, table_grid, gap: Cell::new(None), written: Vec::new() })
    }

    /// Momentum grid: the tabulated one if there is one, else `nx x ny`.
    pub fn grid(&self) -> Result<MomentumGrid, RunError> {
        match self.table_grid {
            Some(g) => Ok(g),
            None => MomentumGrid::new(self.cfg.nx, self.cfg.ny).map_err(|e| RunError::Config(e.to_string())),
        }
    }

    /// Direct gap of `h` around `mu` on the grid.
    pub fn gap(&self) -> mixtop::Result<f64> {
        if let Some(g) = self.gap.get() {
            return Ok(g);
        }
        let grid = self.grid().map_err(|e| mixtop::Error::InvalidInput(e.to_string()))?;
        let g = model::band_gap(self.model.as_ref(), &grid, self.cfg.mu)?;
        self.gap.set(Some(g));
        Ok(g)
    }

    pub fn known_gap(&self) -> Option<f64> {
        self.gap.get()
    }

    fn states(&self, default: &[TemperatureSpec]) -> Result<Vec<StateEntry>, RunError> {
        if let Some(spec) = &self.fixed_state {
            return Ok(vec![StateEntry {
                label: "hfict".into(),
                spec: spec.clone(),
                temperature: None,
                t_over_gap: None,
                beta: None,
            }]);
        }
        let requested = self.cfg.temperatures(default);
        let gap = if requested.iter().any(|t| t.needs_gap()) {
            Some(self.gap().map_err(|e| {
                RunError::Numerical(format!("temperatures are in gap units but the gap is undefined: {e}"))
            })?)
        } else {
            self.gap().ok()
        };
        requested
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let beta = t.beta(gap.unwrap_or(f64::NAN));
                let temperature = if beta.is_infinite() { 0.0 } else { 1.0 / beta };
                let spec = GaussianStateSpec::thermal(Arc::clone(&self.model), beta, self.cfg.mu)
                    .map_err(|e| RunError::Config(e.to_string()))?;
                Ok(StateEntry {
                    label: format!("T{i:02}"),
                    spec,
                    temperature: Some(temperature),
                    t_over_gap: gap.map(|g| temperature / g),
                    beta: Some(beta),
                })
            })
            .collect()
    }

    fn put(&mut self, task: &mut TaskRecord, name: String, contents: &str) -> mixtop::Result<()> {
        io::write_atomic(&self.out.join(&name), contents.as_bytes())?;
        task.outputs.push(name.clone());
        self.written.push(name);
        Ok(())
    }

    fn transverse_k(&self) -> f64 {
        self.cfg.transverse_k.unwrap_or(PI / 3.0)
    }
}

fn settle(task: &mut TaskRecord, result: mixtop::Result<Value>) {
    match result {
        Ok(v) => task.results = v,
        Err(e) => task.fail(e),
    }
}

pub fn run(command: Command, ctx: &mut Context) -> Result<Vec<TaskRecord>, RunError> {
    match command {
        Command::Spectrum => Ok(spectrum(ctx)),
        Command::EgpProfile => egp_profiles(ctx),
        Command::EgpWinding => egp_windings(ctx),
        Command::InvariantScan => invariant_scan(ctx),
        Command::Chern => chern(ctx),
        Command::GaugeReduction => gauge_reduction(ctx),
    }
}

// ---- spectrum ----

fn spectrum(ctx: &mut Context) -> Vec<TaskRecord> {
    let mut task = TaskRecord::new("spectrum");
    let result = spectrum_task(ctx, &mut task);
    settle(&mut task, result);
    vec![task]
}

fn spectrum_task(ctx: &mut Context, task: &mut TaskRecord) -> mixtop::Result<Value> {
    let grid = ctx.grid().map_err(|e| mixtop::Error::InvalidInput(e.to_string()))?;
    let table = SpectrumTable::compute(ctx.model.as_ref(), &grid, ctx.cfg.mu)?;
    if let Some(g) = table.gap {
        ctx.gap.set(Some(g));
    }
    match ctx.format {
        Format::Csv => ctx.put(task, "spectrum.csv".into(), &io::spectrum_csv(&table)?)?,
        Format::Json => {
            let points: Vec<Value> = (0..grid.len())
                .map(|idx| {
                    let (i, j) = (idx / grid.ny(), idx % grid.ny());
                    json!({ "kx": grid.kx(i), "ky": grid.ky(j), "energies": table.energies[idx] })
                })
                .collect();
            let doc = json!({ "nx": grid.nx(), "ny": grid.ny(), "mu": ctx.cfg.mu, "gap": num(table.gap), "points": points });
            ctx.put(task, "spectrum.json".into(), &io::to_json(&doc)?)?
        }
    }
    Ok(json!({ "gap": num(table.gap), "nx": grid.nx(), "ny": grid.ny() }))
}

// ---- egp-profile ----

fn default_temperatures() -> Vec<TemperatureSpec> {
    DEFAULT_T_OVER_GAP.iter().map(|&t| TemperatureSpec::GapUnits(t)).collect()
}

fn egp_profiles(ctx: &mut Context) -> Result<Vec<TaskRecord>, RunError> {
    let states = ctx.states(&default_temperatures())?;
    let mut tasks = Vec::new();
    for st in &states {
        for dir in ctx.cfg.directions.clone() {
            for n in ctx.cfg.chain_lengths() {
                let mut task = st.record(format!("egp_{dir}_N{n}_{}", st.label));
                let result = egp_profile_task(ctx, st, dir, n, &mut task);
                settle(&mut task, result);
                tasks.push(task);
            }
        }
    }
    Ok(tasks)
}

fn egp_profile_task(
    ctx: &mut Context,
    st: &StateEntry,
    dir: Direction,
    n: usize,
    task: &mut TaskRecord,
) -> mixtop::Result<Value> {
    let scan = egp::egp_profile(&st.spec, dir, n, ctx.cfg.n_transverse)?;
    let winding = geometry::winding_of_phase_profile(&scan.profile).ok();
    // C_x is the x-chain winding over ky, C_y minus the y-chain winding over kx
    let chern = winding.map(|w| if dir == Direction::X { w } else { -w });
    let (jump_at, jump) = scan.profile.max_jump();
    let min_modulus = scan.components.iter().map(|c| c.log_modulus).fold(f64::INFINITY, f64::min);
    let summary = json!({
        "state": st.describe(),
        "direction": dir,
        "n_cells": n,
        "n_transverse": ctx.cfg.n_transverse,
        "winding": winding,
        "chern": chern,
        "under_resolved": scan.profile.is_under_resolved(DEFAULT_JUMP_MARGIN),
        "max_jump": jump,
        "max_jump_index": jump_at,
        "min_log_modulus": num(Some(min_modulus)),
    });
    let stem = task.name.clone();
    match ctx.format {
        Format::Csv => {
            let rows: Vec<EgpRow> = scan.components.iter().map(EgpRow::from).collect();
            ctx.put(task, format!("{stem}.csv"), &io::egp_csv(&rows)?)?;
            ctx.put(task, format!("{stem}.profile.csv"), &io::phase_profile_csv(&scan.profile)?)?;
            let mut meta = summary.clone();
            meta["kind"] = json!(scan.profile.kind);
            meta["temperature"] = num(scan.profile.temperature);
            ctx.put(task, format!("{stem}.json"), &io::to_json(&meta)?)?;
        }
        Format::Json => {
            let mut doc = summary.clone();
            doc["profile"] = serde_json::to_value(&scan.profile)?;
            doc["components"] = serde_json::to_value(&scan.components)?;
            ctx.put(task, format!("{stem}.json"), &io::to_json(&doc)?)?;
        }
    }
    Ok(summary)
}

// ---- egp-winding ----

fn egp_windings(ctx: &mut Context) -> Result<Vec<TaskRecord>, RunError> {
    let states = ctx.states(&default_temperatures())?;
    let mut tasks = Vec::new();
    let mut rows = Vec::new();
    for st in &states {
        for n in ctx.cfg.chain_lengths() {
            let mut task = st.record(format!("egp_winding_N{n}_{}", st.label));
            let mut row = WindingRow {
                label: st.label.clone(),
                temperature: st.temperature.unwrap_or(f64::NAN),
                t_over_gap: st.t_over_gap.unwrap_or(f64::NAN),
                beta: st.beta.unwrap_or(f64::NAN),
                n_cells: n,
                cx: None,
                cy: None,
                samples_x: 0,
                samples_y: 0,
                status: "ok".into(),
            };
            match egp::egp_windings_up_to(&st.spec, n, ctx.cfg.n_transverse, ctx.cfg.max_transverse) {
                Ok(w) => {
                    row.cx = Some(w.cx);
                    row.cy = Some(w.cy);
                    row.samples_x = w.x.profile.len();
                    row.samples_y = w.y.profile.len();
                    task.results = json!({ "Cx": w.cx, "Cy": w.cy, "samples_x": row.samples_x, "samples_y": row.samples_y });
                }
                Err(e) => {
                    row.status = e.to_string();
                    task.fail(e);
                }
            }
            rows.push(row);
            tasks.push(task);
        }
    }
    let mut table = TaskRecord::new("egp_winding_table");
    let result = (|| -> mixtop::Result<Value> {
        match ctx.format {
            Format::Csv => ctx.put(&mut table, "egp_windings.csv".into(), &tables::winding_csv(&rows)?)?,
            Format::Json => ctx.put(&mut table, "egp_windings.json".into(), &io::to_json(&rows)?)?,
        }
        Ok(json!({ "rows": rows.len() }))
    })();
    settle(&mut table, result);
    tasks.push(table);
    Ok(tasks)
}

// ---- invariant-scan ----

fn invariant_scan(ctx: &mut Context) -> Result<Vec<TaskRecord>, RunError> {
    if ctx.fixed_state.is_some() {
        return Err(RunError::Config("key `hfict_file`: invariant-scan needs a Hamiltonian and temperatures".into()));
    }
    let gap = ctx.gap().map_err(|e| RunError::Numerical(format!("gap around mu is undefined: {e}")))?;
    let default: Vec<TemperatureSpec> = log_grid(1e-2, 1e2, 41).into_iter().map(TemperatureSpec::GapUnits).collect();
    let temperatures: Vec<f64> = ctx
        .cfg
        .temperatures(&default)
        .into_iter()
        .map(|t| {
            let b = t.beta(gap);
            if b.is_infinite() { 0.0 } else { 1.0 / b }
        })
        .collect();
    let options = ScanOptions {
        n_cells: ctx.cfg.n_cells,
        n_transverse: ctx.cfg.n_transverse,
        ground_grid: ctx.cfg.nx.max(ctx.cfg.ny),
        refinement: Refinement {
            initial_samples: ctx.cfg.m_path,
            max_samples: ctx.cfg.m_path_max,
            tolerance: ctx.cfg.path_tolerance,
        },
    };
    let mut task = TaskRecord::new("invariant_scan");
    let result = (|| -> mixtop::Result<Value> {
        let rows = uhlmann::uhlmann_temperature_scan(Arc::clone(&ctx.model), ctx.cfg.mu, &temperatures, &options)?;
        match ctx.format {
            Format::Csv => ctx.put(&mut task, "invariant_scan.csv".into(), &io::invariant_report_csv(&rows)?)?,
            Format::Json => ctx.put(&mut task, "invariant_scan.json".into(), &io::to_json(&rows)?)?,
        }
        let asymmetric: Vec<Value> = rows
            .iter()
            .filter(|r| r.uhlmann_asymmetric())
            .map(|r| json!({ "T": r.temperature, "T_over_gap": r.temperature / gap, "Cx": r.cx_uhlmann, "Cy": r.cy_uhlmann }))
            .collect();
        let window: Vec<f64> = rows.iter().filter(|r| r.uhlmann_asymmetric()).map(|r| r.temperature / gap).collect();
        let window = (!window.is_empty()).then(|| {
            [window.iter().copied().fold(f64::INFINITY, f64::min), window.iter().copied().fold(0.0, f64::max)]
        });
        let egp_agrees = rows
            .iter()
            .filter(|r| r.cx_egp == Some(r.c_ground) && r.cy_egp == Some(r.c_ground))
            .count();
        let failed: Vec<Value> =
            rows.iter().filter(|r| !r.is_ok()).map(|r| json!({ "T": r.temperature, "status": r.status })).collect();
        if !failed.is_empty() {
            task.status = TaskStatus::Partial;
            task.message = Some(format!("{} of {} temperatures failed", failed.len(), rows.len()));
        }
        let summary = json!({
            "gap": gap,
            "rows": rows.len(),
            "c_ground": rows.first().map(|r| r.c_ground),
            "egp_equals_ground": egp_agrees,
            "uhlmann_asymmetric": asymmetric,
            "asymmetric_window_T_over_gap": window,
            "failed": failed,
        });
        ctx.put(&mut task, "invariant_scan_summary.json".into(), &io::to_json(&summary)?)?;
        Ok(summary)
    })();
    settle(&mut task, result);
    Ok(vec![task])
}

// ---- chern ----

fn write_curvature(ctx: &mut Context, task: &mut TaskRecord, stem: String, field: &CurvatureField) -> mixtop::Result<()> {
    match ctx.format {
        Format::Csv => ctx.put(task, format!("{stem}.csv"), &io::curvature_csv(field)?),
        Format::Json => ctx.put(task, format!("{stem}.json"), &io::to_json(field)?),
    }
}

fn chern(ctx: &mut Context) -> Result<Vec<TaskRecord>, RunError> {
    let grid = ctx.grid()?;
    let states = ctx.states(&[])?;
    let mut tasks = Vec::new();

    let mut task = TaskRecord::new("chern_h");
    let result = (|| -> mixtop::Result<Value> {
        let mut numbers = Vec::new();
        for n in 0..ctx.model.dim() {
            let field = geometry::berry_curvature_plaquette(&StateGrid::bands(ctx.model.as_ref(), &grid, n..n + 1)?)?;
            numbers.push(geometry::chern_number(&field)?);
            write_curvature(ctx, &mut task, format!("curvature_h_band{n}"), &field)?;
        }
        Ok(json!({ "chern": numbers }))
    })();
    settle(&mut task, result);
    tasks.push(task);

    for st in &states {
        let mut task = st.record(format!("chern_hfict_{}", st.label));
        let result = (|| -> mixtop::Result<Value> {
            let mut numbers = Vec::new();
            for n in 0..st.spec.dim() {
                let field = geometry::berry_curvature_plaquette(&StateGrid::fictitious_band(&st.spec, &grid, n)?)?;
                numbers.push(geometry::chern_number(&field)?);
                write_curvature(ctx, &mut task, format!("curvature_hfict_{}_band{n}", st.label), &field)?;
            }
            Ok(json!({ "state": st.describe(), "chern": numbers }))
        })();
        settle(&mut task, result);
        tasks.push(task);
    }

    let mut summary = TaskRecord::new("chern_summary");
    let doc = json!({
        "nx": grid.nx(),
        "ny": grid.ny(),
        "tasks": tasks.iter().map(|t| json!({ "name": t.name, "status": t.status, "results": t.results })).collect::<Vec<_>>(),
    });
    let result = io::to_json(&doc).and_then(|text| ctx.put(&mut summary, "chern.json".into(), &text)).map(|_| Value::Null);
    settle(&mut summary, result);
    tasks.push(summary);
    Ok(tasks)
}

// ---- gauge-reduction ----

fn gauge_reduction(ctx: &mut Context) -> Result<Vec<TaskRecord>, RunError> {
    let states = ctx.states(&[TemperatureSpec::GapUnits(GAUGE_T_OVER_GAP)])?;
    let n_list = ctx.cfg.n_list.clone().unwrap_or_else(|| GAUGE_N_LIST.to_vec());
    let k = ctx.transverse_k();
    let mut tasks = Vec::new();
    for st in &states {
        for dir in ctx.cfg.directions.clone() {
            let mut task = st.record(format!("gauge_reduction_{dir}_{}", st.label));
            let result = (|| -> mixtop::Result<Value> {
                let g = egp::gauge_reduction(&st.spec, dir, k, &n_list)?;
                let summary = json!({
                    "state": st.describe(),
                    "direction": dir,
                    "transverse_k": k,
                    "alpha": g.alpha,
                    "strictly_decreasing": g.is_strictly_decreasing(),
                });
                let stem = task.name.clone();
                match ctx.format {
                    Format::Csv => {
                        ctx.put(&mut task, format!("{stem}.csv"), &io::gauge_reduction_csv(&g.rows)?)?;
                        ctx.put(&mut task, format!("{stem}.json"), &io::to_json(&summary)?)?;
                    }
                    Format::Json => {
                        let mut doc = summary.clone();
                        doc["rows"] = serde_json::to_value(&g.rows)?;
                        ctx.put(&mut task, format!("{stem}.json"), &io::to_json(&doc)?)?;
                    }
                }
                Ok(summary)
            })();
            settle(&mut task, result);
            tasks.push(task);
        }
    }
    Ok(tasks)
}
