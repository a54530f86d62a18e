//! `cutdg` experiment runner.

mod config;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use cutdg::analysis::{
    self, converge_csv, envelope, evolve_csv, gamma_scan, metric_eoc, run_convergence, scan_csv, snapshot_csv,
    translation_scan, AnalysisError, ConvergenceSettings, Discretization, ErrorRow, EvolveSettings, Problem,
    ScanSettings, ScanVariant,
};
use cutdg::geometry::LevelSet;
use cutdg::mesh::BackgroundMesh;
use cutdg::Vec2;

use config::{parse_levels, ConfigError, RunConfig, Shape};
use plot::{line_chart, Series};

#[derive(Parser, Debug)]
#[command(name = "cutdg", version, about = "Cut DG experiments for advection-reaction problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (`key = value` lines under `[section]` headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Refinement levels `k0..k1`; overrides `mesh.levels`.
    #[arg(long, global = true)]
    levels: Option<String>,
    /// Seed of the sampled registry self-check.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Refinement study: converge.csv.
    Converge,
    /// Refinement study with errors away from the internal layer.
    ConvergeExcluded,
    /// Errors and condition numbers over translated domains: scan.csv.
    ScanTranslate,
    /// Condition number envelopes per ghost penalty weight: gamma.csv.
    ScanGamma,
    /// Condition number under refinement: condition.csv.
    ScanConditionH,
    /// Time-dependent refinement study: evolve.csv and snapshots.
    Evolve,
    /// Per-element quadrature weight sums: quadrature.csv.
    QuadratureCheck,
    /// Active mesh summary as JSON.
    MeshInfo,
}

enum Failure {
    Config(String),
    Solver(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Space(_) => Failure::Config(e.to_string()),
            e => Failure::Solver(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Solver(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Solver(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(l) = &cli.levels {
        cfg.levels = parse_levels(l)?;
    }
    Ok(cfg)
}

/// The registry problem with the geometry and mesh overrides applied.
fn build_problem(cfg: &RunConfig) -> Problem {
    let mut p = Problem::by_name(&cfg.problem, cfg.eps).expect("validated problem name");
    match cfg.shape {
        Shape::Problem => {}
        Shape::Box => p.level_set = LevelSet::Everywhere,
        Shape::Circle(r) => p.level_set = LevelSet::circle(Vec2::zeros(), r),
    }
    if let Some(n) = cfg.n {
        p.mesh.base_n = n;
    }
    if let Some(k) = cfg.kind {
        p.mesh.kind = k;
    }
    if let Some(b) = cfg.bbox {
        p.mesh.bbox = b;
    }
    p
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let problem = build_problem(&cfg);
    let residual = problem.self_check(1000, cli.seed);
    if residual > 1e-8 {
        log::warn!("registry self-check residual {residual:.3e} exceeds 1e-8");
    }
    match cli.command {
        Command::Converge => converge(&cfg, &problem, false),
        Command::ConvergeExcluded => converge(&cfg, &problem, true),
        Command::ScanTranslate => scan_translate(&cfg, &problem),
        Command::ScanGamma => scan_gamma(&cfg, &problem),
        Command::ScanConditionH => scan_condition(&cfg, &problem),
        Command::Evolve => evolve(&cfg, &problem),
        Command::QuadratureCheck => quadrature_check(&cfg, &problem),
        Command::MeshInfo => mesh_info(&cfg, &problem),
    }
}

fn convergence_plot(title: &str, rows: &[ErrorRow]) -> String {
    let series: Vec<Series> = ErrorRow::METRICS
        .iter()
        .map(|m| Series {
            name: m.to_string(),
            points: rows.iter().map(|r| (r.h, r.metric(m).unwrap())).collect(),
        })
        .collect();
    line_chart(title, "h", "error", &series, true, true)
}

fn converge(cfg: &RunConfig, problem: &Problem, excluded: bool) -> Result<(), Failure> {
    let mut settings = ConvergenceSettings::new(cfg.degree, cfg.levels.clone());
    settings.stabilization = cfg.stabilization;
    settings.quadrature = cfg.quadrature;
    if excluded {
        if problem.layer.is_none() {
            return Err(Failure::Config(format!("problem {} has no internal layer", problem.name)));
        }
        settings.exclusion = Some(cfg.exclusion);
    }
    let levels = run_convergence(problem, &settings)?;
    let ids: Vec<usize> = levels.iter().map(|l| l.level).collect();
    let rows: Vec<ErrorRow> = levels.iter().map(|l| l.errors).collect();
    write(&cfg.out, "converge.csv", &converge_csv(&ids, &rows))?;
    if cfg.plots {
        write(&cfg.out, "converge.svg", &convergence_plot(&problem.name, &rows))?;
    }
    let mut summary = json!({
        "problem": problem.name,
        "degree": cfg.degree,
        "final_eoc_l2": metric_eoc(&rows, "e_l2").last().and_then(|e| e.value()),
    });
    if excluded {
        let ex: Vec<ErrorRow> = levels.iter().map(|l| l.excluded.unwrap()).collect();
        if ex.iter().any(|r| r.empty) {
            log::warn!("the exclusion width {} removes every element on some level", cfg.exclusion);
        }
        write(&cfg.out, "converge_excluded.csv", &converge_csv(&ids, &ex))?;
        summary["final_eoc_l2_excluded"] = json!(metric_eoc(&ex, "e_l2").last().and_then(|e| e.value()));
        summary["empty_levels"] = json!(ex.iter().filter(|r| r.empty).count());
    }
    if cfg.matrix {
        let last = *cfg.levels.end();
        let disc = Discretization::for_problem(problem, last, cfg.degree, cfg.quadrature)?;
        let (_, sys) = analysis::solve_stationary(problem, &disc, &cfg.stabilization)?;
        let path = cfg.out.join(format!("matrix_level{last}.mtx"));
        fs::create_dir_all(&cfg.out)?;
        sys.a
            .write_matrix_market(&mut fs::File::create(&path)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(())
}

fn scan_settings(cfg: &RunConfig, problem: &Problem) -> Result<ScanSettings, Failure> {
    let mut s = ScanSettings::translation(cfg.scan_n, cfg.scan_count);
    s.bbox = problem.mesh.bbox;
    s.kind = problem.mesh.kind;
    let h = (s.bbox.x_max - s.bbox.x_min) / cfg.scan_n as f64;
    s.direction = Vec2::new(h, h) / 2f64.sqrt();
    s.degree = cfg.degree;
    s.variants = cfg.variants.iter().map(|v| ScanVariant::parse(v).unwrap()).collect();
    s.full = cfg.full;
    s.gamma = match cfg.full {
        cutdg::forms::GhostRealization::FaceUnified | cutdg::forms::GhostRealization::VolumeUnified => {
            cfg.stabilization.gamma
        }
        _ => cfg.stabilization.gamma_c,
    };
    s.errors = cfg.scan_errors;
    s.condition = cfg.scan_condition;
    s.condition_mode = cfg.condition;
    s.quadrature = cfg.quadrature;
    Ok(s)
}

fn translated_family(problem: &Problem) -> impl Fn(Vec2) -> Problem + Sync + '_ {
    move |shift| {
        let mut p = problem.clone();
        p.level_set = problem.level_set.clone().translate(shift);
        p
    }
}

fn scan_translate(cfg: &RunConfig, problem: &Problem) -> Result<(), Failure> {
    let settings = scan_settings(cfg, problem)?;
    let family = translated_family(problem);
    let rows = translation_scan(&family, &settings)?;
    write(&cfg.out, "scan.csv", &scan_csv(&rows))?;
    let mut summary = serde_json::Map::new();
    for &v in &settings.variants {
        summary.insert(
            v.as_str().to_string(),
            json!({
                "e_l2": envelope(&rows, v, |r| r.e_l2),
                "e_sd": envelope(&rows, v, |r| r.e_sd),
                "kappa": envelope(&rows, v, |r| r.kappa),
                "failures": rows.iter().filter(|r| r.variant == v && r.failed()).count(),
            }),
        );
    }
    if cfg.plots {
        let series = |metric: fn(&analysis::ScanRow) -> Option<f64>| -> Vec<Series> {
            settings
                .variants
                .iter()
                .map(|&v| Series {
                    name: v.as_str().to_string(),
                    points: rows
                        .iter()
                        .filter(|r| r.variant == v)
                        .filter_map(|r| metric(r).map(|m| (r.delta, m)))
                        .collect(),
                })
                .collect()
        };
        if settings.errors {
            write(
                &cfg.out,
                "scan_l2.svg",
                &line_chart("L2 error", "delta", "e_l2", &series(|r| r.e_l2), false, true),
            )?;
        }
        if settings.condition {
            write(
                &cfg.out,
                "scan_kappa.svg",
                &line_chart("condition number", "delta", "kappa", &series(|r| r.kappa), false, true),
            )?;
        }
    }
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(())
}

fn scan_gamma(cfg: &RunConfig, problem: &Problem) -> Result<(), Failure> {
    let settings = scan_settings(cfg, problem)?;
    let family = translated_family(problem);
    let summary = gamma_scan(&family, &settings, &cfg.gammas)?;
    let mut csv = String::from("gamma,kappa_max,kappa_min,kappa_mean,failures\n");
    for g in &summary {
        csv += &format!(
            "{:e},{:.6e},{:.6e},{:.6e},{}\n",
            g.gamma, g.kappa.max, g.kappa.min, g.kappa.mean, g.kappa.failures
        );
    }
    write(&cfg.out, "gamma.csv", &csv)?;
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(())
}

fn scan_condition(cfg: &RunConfig, problem: &Problem) -> Result<(), Failure> {
    let family = translated_family(problem);
    let levels: Vec<usize> = cfg.levels.clone().collect();
    let study = analysis::condition_vs_h(
        &family,
        &levels,
        cfg.degree,
        &cfg.stabilization,
        cfg.condition,
        cfg.condition_samples,
    )?;
    let mut csv = String::from("level,h,N,n_dofs,kappa\n");
    for r in &study.rows {
        csv += &format!("{},{:.6e},{},{},{:.6e}\n", r.level, r.h, r.n, r.n_dofs, r.kappa);
    }
    write(&cfg.out, "condition.csv", &csv)?;
    println!("{}", serde_json::to_string_pretty(&study).unwrap());
    Ok(())
}

fn evolve(cfg: &RunConfig, problem: &Problem) -> Result<(), Failure> {
    if !problem.is_time_dependent() {
        return Err(Failure::Config(format!("problem {} is stationary", problem.name)));
    }
    let mut settings = EvolveSettings::new(cfg.degree, cfg.time.clone());
    settings.stabilization = cfg.stabilization;
    settings.quadrature = cfg.quadrature;
    let mut rows = Vec::new();
    let last = *cfg.levels.end();
    for level in cfg.levels.clone() {
        if level == last {
            settings.snapshot_times = cfg.snapshots.clone();
        }
        let (out, disc) = analysis::run_evolution_on(problem, problem.mesh.mesh(level).map_err(AnalysisError::from)?, level, &settings)?;
        for (t, state) in &out.snapshots {
            write(
                &cfg.out,
                &format!("snapshot_level{level}_t{t:.4}.csv"),
                &snapshot_csv(&disc.space, state),
            )?;
        }
        rows.push(out.row);
    }
    write(&cfg.out, "evolve.csv", &evolve_csv(&rows))?;
    let mut summary = json!({ "levels": rows });
    if cfg.delta_scan {
        settings.snapshot_times.clear();
        let deltas: Vec<f64> = (1..=cfg.delta_count)
            .map(|k| k as f64 / (cfg.delta_count + 1) as f64)
            .collect();
        let base = problem.clone();
        let family = move |shift: Vec2| {
            let mut p = base.clone();
            p.level_set = base.level_set.clone().translate(shift);
            p
        };
        let scan = analysis::evolution_delta_scan(&family, cfg.delta_n, &deltas, &settings)?;
        let mut csv = String::from("delta,e_l2,e_b\n");
        for r in &scan {
            csv += &format!("{:.6},{:.6e},{:.6e}\n", r.delta, r.e_l2, r.e_b);
        }
        write(&cfg.out, "evolve_delta.csv", &csv)?;
        let max = scan.iter().map(|r| r.e_l2).fold(0.0, f64::max);
        let min = scan.iter().map(|r| r.e_l2).fold(f64::INFINITY, f64::min);
        summary["delta_scan_l2_ratio"] = json!(max / min);
    }
    if cfg.plots {
        let series = vec![
            Series {
                name: "e_l2".into(),
                points: rows.iter().map(|r| (r.h, r.e_l2)).collect(),
            },
            Series {
                name: "e_b".into(),
                points: rows.iter().map(|r| (r.h, r.e_b)).collect(),
            },
        ];
        write(&cfg.out, "evolve.svg", &line_chart(&problem.name, "h", "error", &series, true, true))?;
    }
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(())
}

fn quadrature_check(cfg: &RunConfig, problem: &Problem) -> Result<(), Failure> {
    let level = *cfg.levels.start();
    let disc = Discretization::for_problem(problem, level, cfg.degree, cfg.quadrature)?;
    let mut csv = String::from("element_id,class,vol_weight_sum,iface_weight_sum\n");
    for a in 0..disc.mesh.n_active() {
        let e = &disc.quad.elements[a];
        csv += &format!(
            "{},{},{:.17e},{:.17e}\n",
            disc.mesh.elements[a],
            disc.mesh.classes[a].as_str(),
            e.volume.iter().map(|q| q.w).sum::<f64>(),
            e.interface.iter().map(|q| q.w).sum::<f64>()
        );
    }
    write(&cfg.out, "quadrature.csv", &csv)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "volume": disc.quad.volume_measure(),
            "interface": disc.quad.interface_measure(),
        }))
        .unwrap()
    );
    Ok(())
}

fn mesh_info(cfg: &RunConfig, problem: &Problem) -> Result<(), Failure> {
    let level = *cfg.levels.start();
    let background: BackgroundMesh = problem.mesh.mesh(level).map_err(AnalysisError::from)?;
    let depth = cfg
        .quadrature
        .map(|q| q.classify_depth)
        .unwrap_or(cutdg::geometry::QuadratureConfig::for_degree(cfg.degree).classify_depth);
    let active = Arc::new(cutdg::mesh::build_active(&background, &problem.level_set, depth).map_err(AnalysisError::from)?);
    let info = json!({
        "problem": problem.name,
        "level": level,
        "nx": background.nx,
        "ny": background.ny,
        "h": background.h(),
        "summary": active.summary(),
        "n_active": active.n_active(),
    });
    let text = serde_json::to_string_pretty(&info).unwrap();
    write(&cfg.out, "mesh.json", &text)?;
    println!("{text}");
    Ok(())
}
