//! One function per subcommand: run, write files, return the summary.

use crate::config::RunConfig;
use crate::output::Output;
use plugflow::analysis::{
    build_m0, entropy_estimates, growth_function, growth_type_fit, minimal_set_sample, separation_curve, EntropyEstimates, GrowthTypeReport,
    LevelSummary, SeparationCurve,
};
use plugflow::geom::CylPoint;
use plugflow::insertion::validate_insertions;
use plugflow::quotient::flow::Direction;
use plugflow::quotient::{classify_orbit, flow_orbit, periodic_orbit_search, Budgets, Classification, End, EventKind, PlugSpec, SearchConfig, SearchResult};
use plugflow::report::ValidationReport;
use plugflow::wilson::validate_wilson;
use serde::Serialize;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable config, bad flags or a plug that fails its conditions.
    Config(String),
    /// A run failed.
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Run(m) => write!(f, "run error: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

fn run_err(e: plugflow::Error) -> CliError {
    CliError::Run(e.to_string())
}

fn spec_at(cfg: &RunConfig, epsilon: f64) -> Result<PlugSpec, CliError> {
    cfg.spec_at(epsilon).map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateSummary {
    pub pass: bool,
    /// `inadmissible` when an advisory admissibility bound fails.
    pub tags: Vec<String>,
    pub grid: usize,
    pub epsilon: f64,
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
    pub report: ValidationReport,
}

/// Every condition of the configured plug at the configured grid; never builds the plug.
pub fn cmd_validate(cfg: &RunConfig, out: &mut Output) -> Result<ValidateSummary, CliError> {
    let grid = cfg.validate.grid;
    let ins = cfg.insertions(cfg.plug.epsilon);
    let mut report = validate_wilson(&cfg.plug.wilson, grid);
    let shape_ok = ins.is_empty() || (ins.len() == 2 && ins[0].index == 1 && ins[1].index == 2);
    report.push_with("S.insertions", shape_ok, if shape_ok { 1.0 } else { -1.0 }, vec![ins.len() as f64], "no insertions, or insertion 1 then insertion 2");
    report.extend(validate_insertions(&ins, &cfg.plug.wilson, grid));
    let failures: Vec<String> = report.failures().iter().map(|c| c.id.clone()).collect();
    let warnings: Vec<String> = report.warnings().iter().map(|c| c.id.clone()).collect();
    let tags = if warnings.iter().any(|w| w.contains("admissible")) { vec!["inadmissible".to_string()] } else { Vec::new() };
    let s = ValidateSummary { pass: report.all_pass(), tags, grid, epsilon: cfg.plug.epsilon, failures, warnings, report };
    out.json("validate.json", &s)?;
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitSummary {
    pub start: CylPoint,
    pub forward: End,
    pub backward: End,
    pub classification: Classification,
    pub samples: usize,
    pub events: usize,
    pub secondary_entries: usize,
    /// Smallest `r' - (r - eps)` over the secondary entries.
    pub min_radius_margin: Option<f64>,
    pub max_level: i32,
    pub min_level: i32,
    pub max_return_defect: f64,
}

pub fn cmd_orbit(cfg: &RunConfig, out: &mut Output, start: CylPoint, direction: Direction) -> Result<OrbitSummary, CliError> {
    let spec = spec_at(cfg, cfg.plug.epsilon)?;
    let trace = flow_orbit(&spec, start, direction).map_err(run_err)?;
    let eps = spec.epsilon();
    let margins: Vec<f64> = trace.events.iter().filter_map(|e| e.radius_margin(eps)).collect();
    let s = OrbitSummary {
        start,
        forward: trace.forward,
        backward: trace.backward,
        classification: classify_orbit(&trace, cfg.orbit.return_tol),
        samples: trace.samples.len(),
        events: trace.events.len(),
        secondary_entries: trace.events.iter().filter(|e| matches!(e.kind, EventKind::SecondaryEntry(_))).count(),
        min_radius_margin: margins.iter().copied().reduce(f64::min),
        max_level: trace.samples.iter().map(|x| x.level).max().unwrap_or(0),
        min_level: trace.samples.iter().map(|x| x.level).min().unwrap_or(0),
        max_return_defect: trace.max_return_defect,
    };
    out.text("orbit.csv", |w, h| trace.write_csv(w, h))?;
    #[derive(Serialize)]
    struct Full<'a> {
        summary: &'a OrbitSummary,
        events: &'a [plugflow::quotient::TransitionEvent],
    }
    out.json("orbit.json", &Full { summary: &s, events: &trace.events })?;
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimalRow {
    pub t_max: f64,
    pub hausdorff_12: f64,
    pub min_radius: f64,
    /// Largest distance from the level-0 Reeb cylinder grid to the sampled closures.
    pub cylinder_to_closure: f64,
    pub samples: usize,
}

/// Grid on `{r = 2, |z| <= 1}` at spacing about `h`, minus the tube interiors.
pub fn reeb_cylinder_grid(spec: &PlugSpec, h: f64) -> Vec<CylPoint> {
    let nt = (std::f64::consts::TAU * 2.0 / h).ceil() as usize;
    let nz = (2.0 / h).ceil() as usize;
    let mut out = Vec::new();
    for j in 0..nt {
        for k in 0..=nz {
            let p = CylPoint::new(2.0, std::f64::consts::TAU * j as f64 / nt as f64, -1.0 + 2.0 * k as f64 / nz as f64);
            if spec.in_tube(&p).is_none() {
                out.push(p);
            }
        }
    }
    out
}

/// The special orbits sampled at each budget of `minimal.t_grid`.
pub fn cmd_minimal(cfg: &RunConfig, out: &mut Output) -> Result<Vec<MinimalRow>, CliError> {
    let spec = spec_at(cfg, cfg.plug.epsilon)?;
    let cyl = reeb_cylinder_grid(&spec, 0.1);
    let mut rows = Vec::new();
    for &t in &cfg.minimal.t_grid {
        let m = minimal_set_sample(&spec, Budgets { t_max: t, max_events: cfg.minimal.max_events }, cfg.minimal.dt).map_err(run_err)?;
        rows.push(MinimalRow {
            t_max: t,
            hausdorff_12: m.hausdorff_12,
            min_radius: m.min_radius,
            cylinder_to_closure: m.distance_from(&spec, &cyl, 0.05),
            samples: m.orbits.iter().map(|o| o.points.len()).sum(),
        });
    }
    out.text("minimal.csv", |w, h| {
        use std::io::Write;
        writeln!(w, "{h}")?;
        writeln!(w, "t_max,hausdorff_12,min_radius,cylinder_to_closure,samples")?;
        for r in &rows {
            writeln!(w, "{:.6},{:.12},{:.15},{:.12},{}", r.t_max, r.hausdorff_12, r.min_radius, r.cylinder_to_closure, r.samples)?;
        }
        Ok(())
    })?;
    #[derive(Serialize)]
    struct Doc<'a> {
        rows: &'a [MinimalRow],
    }
    out.json("minimal.json", &Doc { rows: &rows })?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicSummary {
    pub epsilon: f64,
    pub search: SearchConfig,
    pub result: SearchResult,
}

pub fn cmd_periodic(cfg: &RunConfig, out: &mut Output) -> Result<PeriodicSummary, CliError> {
    let spec = spec_at(cfg, cfg.plug.epsilon)?;
    let search = cfg.search_config();
    let result = periodic_orbit_search(&spec, &search).map_err(run_err)?;
    let s = PeriodicSummary { epsilon: cfg.plug.epsilon, search, result };
    out.json("periodic.json", &s)?;
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct M0Summary {
    pub nodes: usize,
    pub edges: usize,
    pub cells: usize,
    pub strands: usize,
    pub frontier: usize,
    pub area: f64,
    pub levels: LevelSummary,
    pub s_onset: f64,
    pub s_valid: f64,
    pub unreachable: usize,
    pub fit: Option<GrowthTypeReport>,
    pub fit_error: Option<String>,
}

pub fn cmd_m0(cfg: &RunConfig, out: &mut Output) -> Result<M0Summary, CliError> {
    let spec = spec_at(cfg, cfg.plug.epsilon)?;
    let mesh = build_m0(&spec, &cfg.m0.mesh).map_err(run_err)?;
    let curve = growth_function(&mesh, cfg.m0.s_max, cfg.m0.ds);
    let (fit, fit_error) = match growth_type_fit(&curve.propeller_range()) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let s = M0Summary {
        nodes: mesh.nodes.len(),
        edges: mesh.edges.len(),
        cells: mesh.cells.len(),
        strands: mesh.strands.len(),
        frontier: mesh.frontier.len(),
        area: mesh.area(),
        levels: mesh.levels(),
        s_onset: curve.s_onset,
        s_valid: curve.s_valid,
        unreachable: curve.unreachable,
        fit,
        fit_error,
    };
    out.text("growth.csv", |w, h| curve.write_csv(w, h))?;
    out.json("m0.json", &s)?;
    if cfg.m0.export_mesh {
        let hash = out.hash.clone();
        out.text("mesh.json", |w, _| mesh.write_json(w, &hash))?;
        out.text("mesh_nodes.csv", |w, h| mesh.write_nodes_csv(w, h))?;
    }
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropySummary {
    pub epsilon: f64,
    pub curve: SeparationCurve,
    pub estimates: EntropyEstimates,
}

fn entropy_run(cfg: &RunConfig, epsilon: f64) -> Result<EntropySummary, CliError> {
    let spec = spec_at(cfg, epsilon)?.with_budgets(Budgets { t_max: 0.0, max_events: cfg.entropy.max_events });
    let e = &cfg.entropy;
    let curve = separation_curve(&spec, &cfg.entropy_seeds(), &e.t_grid, &e.eps_grid, e.dt).map_err(run_err)?;
    let estimates = entropy_estimates(&curve, &e.alphas).map_err(run_err)?;
    Ok(EntropySummary { epsilon, curve, estimates })
}

pub fn cmd_entropy(cfg: &RunConfig, out: &mut Output) -> Result<EntropySummary, CliError> {
    let s = entropy_run(cfg, cfg.plug.epsilon)?;
    out.text("separation.csv", |w, h| s.curve.write_csv(w, h))?;
    out.json("entropy.json", &s)?;
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub periodic_orbits: Option<usize>,
    pub trapped_fraction: Option<f64>,
    /// Slope of log s against T at the finest separation scale.
    pub separation_slope: Option<f64>,
    pub h_top: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub warnings: Vec<String>,
}

/// Drops repeated values, keeping the first occurrence.
pub fn dedup_epsilons(eps: &[f64]) -> (Vec<f64>, Vec<String>) {
    let mut kept: Vec<f64> = Vec::new();
    let mut warnings = Vec::new();
    for &e in eps {
        if kept.iter().any(|k| k.to_bits() == e.to_bits() || (*k == 0.0 && e == 0.0)) {
            warnings.push(format!("duplicate epsilon {e} dropped"));
        } else {
            kept.push(e);
        }
    }
    (kept, warnings)
}

fn sweep_row(cfg: &RunConfig, epsilon: f64) -> Result<SweepRow, CliError> {
    let spec = spec_at(cfg, epsilon)?;
    let p = periodic_orbit_search(&spec, &cfg.search_config()).map_err(run_err)?;
    let e = entropy_run(cfg, epsilon)?;
    let finest = &e.estimates.scales[0];
    Ok(SweepRow {
        epsilon,
        periodic_orbits: Some(p.orbits.len()),
        trapped_fraction: Some(if p.seeds == 0 { 0.0 } else { p.trapped as f64 / p.seeds as f64 }),
        separation_slope: Some(finest.slope),
        h_top: Some(finest.h_top),
        error: None,
    })
}

pub fn cmd_sweep(cfg: &RunConfig, out: &mut Output, epsilons: &[f64]) -> Result<SweepSummary, CliError> {
    let (eps, warnings) = dedup_epsilons(epsilons);
    let rows: Vec<SweepRow> = eps
        .iter()
        .map(|&e| {
            sweep_row(cfg, e).unwrap_or_else(|err| SweepRow {
                epsilon: e,
                periodic_orbits: None,
                trapped_fraction: None,
                separation_slope: None,
                h_top: None,
                error: Some(err.to_string()),
            })
        })
        .collect();
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.9e}"));
    out.text("sweep.csv", |w, h| {
        use std::io::Write;
        writeln!(w, "{h}")?;
        writeln!(w, "epsilon,periodic_orbits,trapped_fraction,separation_slope,h_top,error")?;
        for r in &rows {
            let n = r.periodic_orbits.map_or(String::new(), |n| n.to_string());
            let err = r.error.clone().unwrap_or_default().replace(',', ";");
            writeln!(w, "{},{n},{},{},{},{err}", r.epsilon, opt(r.trapped_fraction), opt(r.separation_slope), opt(r.h_top))?;
        }
        Ok(())
    })?;
    let s = SweepSummary { rows, warnings };
    out.json("sweep.json", &s)?;
    Ok(s)
}
