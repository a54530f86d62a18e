//! Solve pipelines and the reproducible studies built on them.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::errors::{compute_errors, eoc, layer_excluded_errors, log_log_slope, Eoc, ErrorRow};
use super::problems::Problem;
use crate::forms::{
    assemble_advection_reaction, assemble_ghost, assemble_load, assemble_load_with, assemble_mass, assemble_stationary,
    derived_scalars, AssembledSystem, FormsError, GhostRealization, SpaceTimeField, StabilizationConfig,
};
use crate::geometry::{LevelSet, QuadratureConfig, QuadratureSet};
use crate::linalg::{condition_number, cut_moments, ConditionMode, Factorization, SolveError};
use crate::mesh::{build_active, ActiveMesh, BackgroundMesh, BoundingBox, ElementKind, MeshError};
use crate::space::{BrokenSpace, FeFunction, SpaceError};
use crate::timestep::{evolve, CutOdeSystem, Forcing, LoadFn, TimeConfig, TimeError};
use crate::Vec2;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("space: {0}")]
    Space(#[from] SpaceError),
    #[error("assembly: {0}")]
    Forms(#[from] FormsError),
    #[error("linear solve: {0}")]
    Solve(#[from] SolveError),
    #[error("time stepping: {0}")]
    Time(#[from] TimeError),
    #[error("{0}")]
    Invalid(String),
}

/// Active mesh, space and cut quadrature for one geometry and mesh.
pub struct Discretization {
    pub mesh: Arc<ActiveMesh>,
    pub space: BrokenSpace,
    pub quad: QuadratureSet,
}

impl Discretization {
    pub fn new(
        level_set: &LevelSet,
        background: BackgroundMesh,
        degree: usize,
        quadrature: Option<QuadratureConfig>,
    ) -> Result<Self, AnalysisError> {
        let family = match background.kind {
            ElementKind::TriangleSplit => crate::space::Family::P,
            ElementKind::Quadrilateral => crate::space::Family::Q,
        };
        let config = quadrature.unwrap_or_else(|| QuadratureConfig::for_degree(degree));
        let mesh = Arc::new(build_active(&background, level_set, config.classify_depth)?);
        let space = BrokenSpace::new(mesh.clone(), family, degree)?;
        let quad = QuadratureSet::build(&mesh, level_set, config);
        Ok(Discretization { mesh, space, quad })
    }

    /// The problem's own mesh family at `level`.
    pub fn for_problem(
        problem: &Problem,
        level: usize,
        degree: usize,
        quadrature: Option<QuadratureConfig>,
    ) -> Result<Self, AnalysisError> {
        Discretization::new(&problem.level_set, problem.mesh.mesh(level)?, degree, quadrature)
    }
}

/// Assembles and solves the stationary problem.
pub fn solve_stationary<'d>(
    problem: &Problem,
    disc: &'d Discretization,
    stab: &StabilizationConfig,
) -> Result<(FeFunction<'d>, AssembledSystem), AnalysisError> {
    let system = assemble_stationary(&disc.space, &problem.coefficients, &disc.quad, stab)?;
    let x = Factorization::lu(&system.a)?.solve(&system.load)?;
    Ok((disc.space.function(x), system))
}

#[derive(Clone, Debug)]
pub struct ConvergenceSettings {
    pub degree: usize,
    pub levels: Vec<usize>,
    pub stabilization: StabilizationConfig,
    pub quadrature: Option<QuadratureConfig>,
    /// Width of the layer tube left out of the restricted errors.
    pub exclusion: Option<f64>,
}

impl ConvergenceSettings {
    pub fn new(degree: usize, levels: impl IntoIterator<Item = usize>) -> Self {
        ConvergenceSettings {
            degree,
            levels: levels.into_iter().collect(),
            stabilization: StabilizationConfig::default(),
            quadrature: None,
            exclusion: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceLevel {
    pub level: usize,
    pub errors: ErrorRow,
    pub excluded: Option<ErrorRow>,
}

/// Solves on each refinement level in turn.
pub fn run_convergence(problem: &Problem, settings: &ConvergenceSettings) -> Result<Vec<ConvergenceLevel>, AnalysisError> {
    let mut out = Vec::new();
    for &level in &settings.levels {
        let disc = Discretization::for_problem(problem, level, settings.degree, settings.quadrature)?;
        let (uh, _) = solve_stationary(problem, &disc, &settings.stabilization)?;
        let errors = compute_errors(&uh, problem, &disc.quad, 0.0);
        let excluded = settings
            .exclusion
            .map(|d| layer_excluded_errors(&uh, problem, &disc.quad, d));
        log::info!(
            "{} level {level}: n = {}, dofs = {}, e_l2 = {:.3e}",
            problem.name,
            errors.n,
            errors.n_dofs,
            errors.e_l2
        );
        out.push(ConvergenceLevel { level, errors, excluded });
    }
    Ok(out)
}

/// Rates of one metric across the rows.
pub fn metric_eoc(rows: &[ErrorRow], metric: &str) -> Vec<Eoc> {
    let e: Vec<f64> = rows.iter().map(|r| r.metric(metric).unwrap_or(f64::NAN)).collect();
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    eoc(&e, &h)
}

fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6e}")
    } else {
        String::new()
    }
}

pub const CONVERGE_HEADER: &str = "level,h,N,e_l2,eoc_l2,e_up,eoc_up,e_sd,eoc_sd,e_gw,eoc_gw,e_g,eoc_g,e_inf,eoc_inf";
pub const SCAN_HEADER: &str = "delta,variant,e_l2,e_sd,kappa,status";
pub const EVOLVE_HEADER: &str = "level,h,N,dt,e_l2,eoc_l2,e_b,eoc_b";

/// Convergence table as CSV.
pub fn converge_csv(levels: &[usize], rows: &[ErrorRow]) -> String {
    let metrics = ["e_l2", "e_up", "e_sd", "e_gw", "e_g", "e_inf"];
    let rates: Vec<Vec<Eoc>> = metrics.iter().map(|m| metric_eoc(rows, m)).collect();
    let mut s = String::from(CONVERGE_HEADER);
    s.push('\n');
    for (k, r) in rows.iter().enumerate() {
        s += &format!("{},{},{}", levels[k], sci(r.h), r.n);
        for (m, rate) in metrics.iter().zip(&rates) {
            s += &format!(",{},{}", sci(r.metric(m).unwrap()), rate[k].cell());
        }
        s.push('\n');
    }
    s
}

/// Stabilization variants compared in the translation scans.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ScanVariant {
    Full,
    GcOnly,
    GbOnly,
    Unstabilized,
}

impl ScanVariant {
    pub const ALL: [ScanVariant; 4] = [
        ScanVariant::Full,
        ScanVariant::GcOnly,
        ScanVariant::GbOnly,
        ScanVariant::Unstabilized,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScanVariant::Full => "full",
            ScanVariant::GcOnly => "gc-only",
            ScanVariant::GbOnly => "gb-only",
            ScanVariant::Unstabilized => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ScanVariant::ALL.into_iter().find(|v| v.as_str() == s)
    }

    /// `full` selects the realization of the fully stabilized variant; the
    /// partial variants always use the split face penalties.
    pub fn stabilization(self, gamma: f64, full: GhostRealization) -> StabilizationConfig {
        match self {
            ScanVariant::Full => match full {
                GhostRealization::FaceUnified => StabilizationConfig::face_unified(gamma),
                GhostRealization::VolumeSplit => StabilizationConfig::volume_split(gamma, gamma),
                GhostRealization::VolumeUnified => StabilizationConfig::volume_unified(gamma),
                GhostRealization::None => StabilizationConfig::none(),
                GhostRealization::FaceSplit => StabilizationConfig::face_split(gamma, gamma),
            },
            ScanVariant::GcOnly => StabilizationConfig::face_split(gamma, 0.0),
            ScanVariant::GbOnly => StabilizationConfig::face_split(0.0, gamma),
            ScanVariant::Unstabilized => StabilizationConfig::none(),
        }
    }
}

/// A family of domains moved along `direction`: the domain at `δ` is the
/// base domain shifted by `(δ - offset) direction`.
#[derive(Clone, Debug)]
pub struct ScanSettings {
    pub bbox: BoundingBox,
    pub n: usize,
    pub kind: ElementKind,
    pub degree: usize,
    pub direction: Vec2,
    pub offset: f64,
    pub deltas: Vec<f64>,
    pub variants: Vec<ScanVariant>,
    pub gamma: f64,
    /// Ghost penalty of the fully stabilized variant.
    pub full: GhostRealization,
    pub errors: bool,
    pub condition: bool,
    pub condition_mode: ConditionMode,
    pub quadrature: Option<QuadratureConfig>,
}

impl ScanSettings {
    /// Circle of radius 0.25 in `[-0.35, 0.35]^2` with `N` cells per side,
    /// moved diagonally by up to one cell; `count` equidistant steps
    /// `δ_k = k / count`.
    pub fn translation(n: usize, count: usize) -> Self {
        let h = 0.7 / n as f64;
        ScanSettings {
            bbox: BoundingBox::square(0.35),
            n,
            kind: ElementKind::TriangleSplit,
            degree: 1,
            direction: Vec2::new(h, h) / 2f64.sqrt(),
            offset: 0.0,
            deltas: (0..count).map(|k| k as f64 / count as f64).collect(),
            variants: vec![ScanVariant::Full, ScanVariant::Unstabilized],
            gamma: 0.01,
            full: GhostRealization::FaceSplit,
            errors: true,
            condition: true,
            condition_mode: ConditionMode::DenseExact,
            quadrature: None,
        }
    }

    pub fn shift(&self, delta: f64) -> Vec2 {
        self.direction * (delta - self.offset)
    }

    pub fn background(&self) -> Result<BackgroundMesh, MeshError> {
        BackgroundMesh::new(self.bbox, self.n, self.n, self.kind)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ScanStatus {
    Ok,
    Failed(String),
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub delta: f64,
    pub variant: ScanVariant,
    pub e_l2: Option<f64>,
    pub e_sd: Option<f64>,
    pub kappa: Option<f64>,
    pub status: ScanStatus,
}

impl ScanRow {
    pub fn failed(&self) -> bool {
        matches!(self.status, ScanStatus::Failed(_))
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_default()
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut s = String::from(SCAN_HEADER);
    s.push('\n');
    for r in rows {
        let status = match &r.status {
            ScanStatus::Ok => "ok",
            ScanStatus::Failed(_) => "failed",
        };
        s += &format!(
            "{:.6},{},{},{},{},{}\n",
            r.delta,
            r.variant.as_str(),
            opt_cell(r.e_l2),
            opt_cell(r.e_sd),
            opt_cell(r.kappa),
            status
        );
    }
    s
}

fn scan_point(
    family: &(dyn Fn(Vec2) -> Problem + Sync),
    settings: &ScanSettings,
    delta: f64,
) -> Result<Vec<ScanRow>, AnalysisError> {
    let problem = family(settings.shift(delta));
    let disc = Discretization::new(&problem.level_set, settings.background()?, settings.degree, settings.quadrature)?;
    let co = &problem.coefficients;
    let scalars = derived_scalars(co, &disc.mesh, &disc.quad)?;
    let transport = assemble_advection_reaction(&disc.space, co, &disc.quad);
    let load = if settings.errors {
        assemble_load(&disc.space, co, &disc.quad, 0.0)
    } else {
        Vec::new()
    };
    let mut rows = Vec::new();
    for &variant in &settings.variants {
        let stab = variant.stabilization(settings.gamma, settings.full);
        let a = if stab.realization == GhostRealization::None {
            transport.clone()
        } else {
            transport.add_scaled(&assemble_ghost(&disc.space, co, &disc.quad, &scalars, &stab), 1.0)
        };
        let mut row = ScanRow {
            delta,
            variant,
            e_l2: None,
            e_sd: None,
            kappa: None,
            status: ScanStatus::Ok,
        };
        if settings.condition {
            match condition_number(&a, settings.condition_mode) {
                Ok(k) => row.kappa = Some(k),
                Err(e) => row.status = ScanStatus::Failed(e.to_string()),
            }
        }
        if settings.errors {
            match Factorization::lu(&a).and_then(|f| f.solve(&load)) {
                Ok(x) => {
                    let e = compute_errors(&disc.space.function(x), &problem, &disc.quad, 0.0);
                    if e.e_l2.is_finite() {
                        row.e_l2 = Some(e.e_l2);
                        row.e_sd = Some(e.e_sd);
                    } else {
                        row.status = ScanStatus::Failed("non-finite error".into());
                    }
                }
                Err(e) => row.status = ScanStatus::Failed(e.to_string()),
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Per-δ errors and condition numbers for each stabilization variant.
/// Singular solves become failure rows; rows are ordered by δ, then variant.
pub fn translation_scan(
    family: &(dyn Fn(Vec2) -> Problem + Sync),
    settings: &ScanSettings,
) -> Result<Vec<ScanRow>, AnalysisError> {
    let per_delta: Vec<Result<Vec<ScanRow>, AnalysisError>> = settings
        .deltas
        .par_iter()
        .map(|&d| scan_point(family, settings, d))
        .collect();
    let mut rows = Vec::new();
    for r in per_delta {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Max, min and mean of a metric over successful rows of one variant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Envelope {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub count: usize,
    pub failures: usize,
}

impl Envelope {
    pub fn ratio(&self) -> f64 {
        self.max / self.min
    }
}

pub fn envelope(rows: &[ScanRow], variant: ScanVariant, metric: fn(&ScanRow) -> Option<f64>) -> Option<Envelope> {
    let sel: Vec<&ScanRow> = rows.iter().filter(|r| r.variant == variant).collect();
    let failures = sel.iter().filter(|r| r.failed()).count();
    let vals: Vec<f64> = sel.iter().filter_map(|r| metric(r)).filter(|v| v.is_finite()).collect();
    if vals.is_empty() {
        return None;
    }
    Some(Envelope {
        max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min: vals.iter().copied().fold(f64::INFINITY, f64::min),
        mean: vals.iter().sum::<f64>() / vals.len() as f64,
        count: vals.len(),
        failures,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaSummary {
    pub gamma: f64,
    pub kappa: Envelope,
}

/// Condition number envelopes over the scan for each ghost penalty weight,
/// all weights scaled together. `γ = 0` is the unstabilized scan.
pub fn gamma_scan(
    family: &(dyn Fn(Vec2) -> Problem + Sync),
    settings: &ScanSettings,
    gammas: &[f64],
) -> Result<Vec<GammaSummary>, AnalysisError> {
    gammas
        .iter()
        .map(|&gamma| {
            let variant = if gamma == 0.0 { ScanVariant::Unstabilized } else { ScanVariant::Full };
            let s = ScanSettings {
                variants: vec![variant],
                gamma,
                errors: false,
                condition: true,
                ..settings.clone()
            };
            let rows = translation_scan(family, &s)?;
            let kappa = envelope(&rows, variant, |r| r.kappa)
                .ok_or_else(|| AnalysisError::Invalid(format!("no condition number obtained for gamma = {gamma}")))?;
            Ok(GammaSummary { gamma, kappa })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionRow {
    pub level: usize,
    pub h: f64,
    pub n: usize,
    pub n_dofs: usize,
    pub kappa: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionStudy {
    pub rows: Vec<ConditionRow>,
    /// Slope of `log κ` against `log(1/h)`; absent for a single level.
    pub slope: Option<f64>,
}

/// Condition number of the stabilized operator under refinement. On each
/// level `κ` is averaged over `samples` diagonal shifts `k / samples` of a
/// cell, which smooths out the dependence on a single cut configuration.
pub fn condition_vs_h(
    family: &(dyn Fn(Vec2) -> Problem + Sync),
    levels: &[usize],
    degree: usize,
    stab: &StabilizationConfig,
    mode: ConditionMode,
    samples: usize,
) -> Result<ConditionStudy, AnalysisError> {
    let samples = samples.max(1);
    let base = family(Vec2::zeros());
    let mut rows = Vec::new();
    for &level in levels {
        let background = base.mesh.mesh(level)?;
        let side = background.hx();
        let mut sum = 0.0;
        let mut n_dofs = 0;
        for k in 0..samples {
            let shift = Vec2::new(side, side) / 2f64.sqrt() * (k as f64 / samples as f64);
            let problem = family(shift);
            let disc = Discretization::new(&problem.level_set, background.clone(), degree, None)?;
            let sys = assemble_stationary(&disc.space, &problem.coefficients, &disc.quad, stab)?;
            sum += condition_number(&sys.a, mode)?;
            n_dofs = disc.space.n_dofs();
        }
        let kappa = sum / samples as f64;
        log::info!("condition level {level}: dofs = {n_dofs}, kappa = {kappa:.3e}");
        rows.push(ConditionRow {
            level,
            h: background.h(),
            n: background.nx,
            n_dofs,
            kappa,
        });
    }
    let inv_h: Vec<f64> = rows.iter().map(|r| 1.0 / r.h).collect();
    let k: Vec<f64> = rows.iter().map(|r| r.kappa).collect();
    Ok(ConditionStudy {
        slope: log_log_slope(&inv_h, &k),
        rows,
    })
}

#[derive(Clone, Debug)]
pub struct EvolveSettings {
    pub degree: usize,
    pub time: TimeConfig,
    pub stabilization: StabilizationConfig,
    pub quadrature: Option<QuadratureConfig>,
    pub snapshot_times: Vec<f64>,
}

impl EvolveSettings {
    pub fn new(degree: usize, time: TimeConfig) -> Self {
        EvolveSettings {
            degree,
            time,
            stabilization: StabilizationConfig::face_unified(0.01),
            quadrature: None,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvolveRow {
    pub level: usize,
    /// Cell side length.
    pub h: f64,
    pub n: usize,
    pub dt: f64,
    pub steps: usize,
    pub e_l2: f64,
    pub e_b: f64,
}

pub struct EvolveOutcome {
    pub row: EvolveRow,
    pub state: Vec<f64>,
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

/// Load reassembled at every stage; analytic time derivatives of the data
/// are used when the problem provides them.
fn general_forcing(disc: &Discretization, co: &crate::forms::Coefficients, tau_c: f64) -> Forcing {
    let shared = Arc::new((disc.space.clone(), disc.quad.clone(), co.clone()));
    let s = shared.clone();
    let load: LoadFn = Arc::new(move |t| assemble_load(&s.0, &s.2, &s.1, t));
    let derivative = |f: Option<SpaceTimeField>, g: Option<SpaceTimeField>| -> Option<LoadFn> {
        let (f, g) = (f?, g?);
        let s = shared.clone();
        Some(Arc::new(move |t| {
            let b = s.2.velocity.clone();
            assemble_load_with(&s.0, &|x| b(x), &s.1, &|x| f(x, t), &|x| g(x, t))
        }))
    };
    Forcing::General {
        load,
        load_dt: derivative(co.source_dt.clone(), co.inflow_dt.clone()),
        load_dtt: derivative(co.source_dtt.clone(), co.inflow_dtt.clone()),
        fd_step: 1e-5 * tau_c,
    }
}

/// Runs a time-dependent problem on a given background mesh from the
/// stabilized L2 projection of the initial state to the end time.
pub fn run_evolution_on(
    problem: &Problem,
    background: BackgroundMesh,
    level: usize,
    settings: &EvolveSettings,
) -> Result<(EvolveOutcome, Discretization), AnalysisError> {
    if !problem.is_time_dependent() {
        return Err(AnalysisError::Invalid(format!("problem {} is stationary", problem.name)));
    }
    let disc = Discretization::new(&problem.level_set, background, settings.degree, settings.quadrature)?;
    settings.stabilization.validate()?;
    let co = &problem.coefficients;
    let scalars = derived_scalars(co, &disc.mesh, &disc.quad)?;
    let a = assemble_advection_reaction(&disc.space, co, &disc.quad)
        .add_scaled(&assemble_ghost(&disc.space, co, &disc.quad, &scalars, &settings.stabilization), 1.0);
    let mass = assemble_mass(&disc.space, &disc.quad, &scalars, &settings.stabilization);
    let forcing = if problem.separable.is_empty() {
        general_forcing(&disc, co, scalars.tau_c)
    } else {
        Forcing::separable(&disc.space, &|x| co.b(x), &disc.quad, &problem.separable)
    };
    let sys = CutOdeSystem::new(&mass, a, forcing)?;
    let exact0 = |x: Vec2| problem.u(x, 0.0);
    let u0 = sys.mass.solve(&cut_moments(&disc.space, &disc.quad, &exact0))?;
    let dt = settings.time.step_size(disc.mesh.h_s());
    let result = evolve(&sys, &u0, &settings.time, dt, &settings.snapshot_times)?;
    let errors = compute_errors(
        &disc.space.function(result.state.clone()),
        problem,
        &disc.quad,
        settings.time.end_time,
    );
    let row = EvolveRow {
        level,
        h: disc.mesh.h_s(),
        n: disc.mesh.background.nx,
        dt,
        steps: result.steps,
        e_l2: errors.e_l2,
        e_b: errors.e_b,
    };
    log::info!(
        "{} level {level}: dofs = {}, steps = {}, e_l2 = {:.3e}, e_b = {:.3e}",
        problem.name,
        disc.space.n_dofs(),
        row.steps,
        row.e_l2,
        row.e_b
    );
    Ok((
        EvolveOutcome {
            row,
            state: result.state,
            snapshots: result.snapshots,
        },
        disc,
    ))
}

/// Time-dependent convergence over the problem's own mesh family.
pub fn run_evolution(problem: &Problem, levels: &[usize], settings: &EvolveSettings) -> Result<Vec<EvolveRow>, AnalysisError> {
    levels
        .iter()
        .map(|&level| Ok(run_evolution_on(problem, problem.mesh.mesh(level)?, level, settings)?.0.row))
        .collect()
}

pub fn evolve_csv(rows: &[EvolveRow]) -> String {
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let r_l2 = eoc(&rows.iter().map(|r| r.e_l2).collect::<Vec<_>>(), &h);
    let r_b = eoc(&rows.iter().map(|r| r.e_b).collect::<Vec<_>>(), &h);
    let mut s = String::from(EVOLVE_HEADER);
    s.push('\n');
    for (k, r) in rows.iter().enumerate() {
        s += &format!(
            "{},{},{},{},{},{},{},{}\n",
            r.level,
            sci(r.h),
            r.n,
            sci(r.dt),
            sci(r.e_l2),
            r_l2[k].cell(),
            sci(r.e_b),
            r_b[k].cell()
        );
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaEvolveRow {
    pub delta: f64,
    pub e_l2: f64,
    pub e_b: f64,
}

/// Final-time errors for the time-dependent problem with the domain moved
/// by `(δ - ½) t`, `t = (h, h)` with `h` the cell diameter, on a fixed `n × n`
/// mesh.
pub fn evolution_delta_scan(
    family: &(dyn Fn(Vec2) -> Problem + Sync),
    n: usize,
    deltas: &[f64],
    settings: &EvolveSettings,
) -> Result<Vec<DeltaEvolveRow>, AnalysisError> {
    let base = family(Vec2::zeros());
    let background = BackgroundMesh::new(base.mesh.bbox, n, n, base.mesh.kind)?;
    let h = background.h();
    deltas
        .par_iter()
        .map(|&delta| {
            let problem = family(Vec2::new(h, h) * (delta - 0.5));
            let (out, _) = run_evolution_on(&problem, background.clone(), 0, settings)?;
            Ok(DeltaEvolveRow {
                delta,
                e_l2: out.row.e_l2,
                e_b: out.row.e_b,
            })
        })
        .collect()
}

/// Snapshot coefficients as CSV.
pub fn snapshot_csv(space: &BrokenSpace, coeffs: &[f64]) -> String {
    let mut s = String::from("element_id,local_dof,coefficient\n");
    for a in 0..space.mesh.n_active() {
        for (i, c) in coeffs[space.dofs(a)].iter().enumerate() {
            s += &format!("{},{},{:.17e}\n", space.mesh.elements[a], i, c);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in ScanVariant::ALL {
            assert_eq!(ScanVariant::parse(v.as_str()), Some(v));
        }
    }

    #[test]
    fn single_delta_scan_matches_direct_run() {
        let mut s = ScanSettings::translation(10, 1);
        s.deltas = vec![0.37];
        s.variants = vec![ScanVariant::Full];
        let rows = translation_scan(&Problem::translated_circle, &s).unwrap();
        assert_eq!(rows.len(), 1);
        let p = Problem::translated_circle(s.shift(0.37));
        let disc = Discretization::new(&p.level_set, s.background().unwrap(), 1, None).unwrap();
        let (uh, sys) = solve_stationary(&p, &disc, &ScanVariant::Full.stabilization(0.01, GhostRealization::FaceSplit)).unwrap();
        let e = compute_errors(&uh, &p, &disc.quad, 0.0);
        assert!((rows[0].e_l2.unwrap() - e.e_l2).abs() <= 1e-12 * e.e_l2);
        let k = condition_number(&sys.a, ConditionMode::DenseExact).unwrap();
        assert!((rows[0].kappa.unwrap() - k).abs() <= 1e-9 * k);
    }

    #[test]
    fn csv_headers() {
        assert!(converge_csv(&[], &[]).starts_with(CONVERGE_HEADER));
        assert!(scan_csv(&[]).starts_with(SCAN_HEADER));
        assert!(evolve_csv(&[]).starts_with(EVOLVE_HEADER));
    }
}
