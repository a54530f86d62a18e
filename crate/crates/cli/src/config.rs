//! Run configuration: flat `key = value` lines grouped under `[section]`
//! headers. `#` starts a comment, lists are comma-separated.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::path::PathBuf;

use cutdg::forms::{GhostRealization, MassScaling, StabilizationConfig};
use cutdg::geometry::QuadratureConfig;
use cutdg::linalg::ConditionMode;
use cutdg::mesh::{BoundingBox, ElementKind};
use cutdg::timestep::{Scheme, TimeConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Every accepted key, as `section.key`.
pub const KEYS: &[&str] = &[
    "problem.name",
    "problem.eps",
    "geometry.shape",
    "geometry.radius",
    "mesh.n",
    "mesh.kind",
    "mesh.box",
    "mesh.levels",
    "space.degree",
    "stabilization.realization",
    "stabilization.gamma_c",
    "stabilization.gamma_b",
    "stabilization.gamma",
    "stabilization.gamma_mass",
    "stabilization.mass_scaling",
    "quadrature.order",
    "quadrature.depth",
    "quadrature.classify_depth",
    "solver.condition",
    "solver.condition_samples",
    "time.end_time",
    "time.cfl",
    "time.scheme",
    "time.literal_rk3",
    "time.snapshots",
    "time.delta_scan",
    "time.delta_n",
    "time.delta_count",
    "scan.n",
    "scan.count",
    "scan.variants",
    "scan.full",
    "scan.gammas",
    "scan.errors",
    "scan.condition",
    "exclusion.delta",
    "output.dir",
    "output.plots",
    "output.matrix",
];

/// Parsed `section.key -> value` pairs.
#[derive(Debug, Default, Clone)]
pub struct RawConfig {
    pub entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut section = String::new();
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return err(format!("line {}: unterminated section header", i + 1));
                };
                section = name.trim().to_string();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`", i + 1));
            };
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            if !KEYS.contains(&key.as_str()) {
                return err(format!("line {}: unknown key `{key}`", i + 1));
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return err(format!("line {}: duplicate key `{key}`", i + 1));
            }
        }
        Ok(RawConfig { entries })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| ConfigError(format!("`{key}`: cannot parse `{s}`"))))
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }
}

/// `k0..k1` (inclusive) or a single level.
pub fn parse_levels(s: &str) -> Result<RangeInclusive<usize>, ConfigError> {
    let bad = || ConfigError(format!("levels `{s}`: expected `k0..k1`"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (s, s),
    };
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// The problem's own domain.
    Problem,
    /// The whole mesh box.
    Box,
    Circle(f64),
}

/// Fully resolved run configuration with defaults applied.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: String,
    pub eps: f64,
    pub shape: Shape,
    pub n: Option<usize>,
    pub kind: Option<ElementKind>,
    pub bbox: Option<BoundingBox>,
    pub levels: RangeInclusive<usize>,
    pub degree: usize,
    pub stabilization: StabilizationConfig,
    pub quadrature: Option<QuadratureConfig>,
    pub condition: ConditionMode,
    pub condition_samples: usize,
    pub time: TimeConfig,
    pub snapshots: Vec<f64>,
    pub delta_scan: bool,
    pub delta_n: usize,
    pub delta_count: usize,
    pub scan_n: usize,
    pub scan_count: usize,
    pub variants: Vec<String>,
    pub full: GhostRealization,
    pub gammas: Vec<f64>,
    pub scan_errors: bool,
    pub scan_condition: bool,
    pub exclusion: f64,
    pub out: PathBuf,
    pub plots: bool,
    pub matrix: bool,
}

pub fn parse_realization(s: &str) -> Result<GhostRealization, ConfigError> {
    Ok(match s {
        "face-split" => GhostRealization::FaceSplit,
        "face-unified" => GhostRealization::FaceUnified,
        "volume-split" => GhostRealization::VolumeSplit,
        "volume-unified" => GhostRealization::VolumeUnified,
        "none" => GhostRealization::None,
        _ => return err(format!("unknown ghost penalty `{s}`")),
    })
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let problem = raw.get("problem.name").unwrap_or("flower").to_string();
        if cutdg::analysis::Problem::by_name(&problem, 1.0).is_none() {
            return err(format!(
                "unknown problem `{problem}`; expected one of {}",
                cutdg::analysis::PROBLEM_NAMES.join(", ")
            ));
        }
        let shape = match raw.get("geometry.shape").unwrap_or("problem") {
            "problem" => Shape::Problem,
            "box" => Shape::Box,
            "circle" => Shape::Circle(raw.parse_as("geometry.radius")?.unwrap_or(0.25)),
            s => return err(format!("unknown geometry shape `{s}`")),
        };
        let kind = match raw.get("mesh.kind") {
            None => None,
            Some("triangles") => Some(ElementKind::TriangleSplit),
            Some("quads") => Some(ElementKind::Quadrilateral),
            Some(s) => return err(format!("unknown element kind `{s}`; expected triangles or quads")),
        };
        let bbox = match raw.list::<f64>("mesh.box")? {
            None => None,
            Some(v) if v.len() == 4 => Some(BoundingBox::new(v[0], v[1], v[2], v[3])),
            Some(v) if v.len() == 1 => Some(BoundingBox::square(v[0])),
            Some(_) => return err("`mesh.box`: expected half width or x_min, x_max, y_min, y_max"),
        };
        let levels = parse_levels(raw.get("mesh.levels").unwrap_or("0..3"))?;

        let realization = parse_realization(raw.get("stabilization.realization").unwrap_or("face-split"))?;
        let mut stabilization = match realization {
            GhostRealization::None => StabilizationConfig::none(),
            r => StabilizationConfig {
                realization: r,
                ..Default::default()
            },
        };
        if let Some(v) = raw.parse_as("stabilization.gamma_c")? {
            stabilization.gamma_c = v;
        }
        if let Some(v) = raw.parse_as("stabilization.gamma_b")? {
            stabilization.gamma_b = v;
        }
        if let Some(v) = raw.parse_as("stabilization.gamma")? {
            stabilization.gamma = v;
        }
        if let Some(v) = raw.parse_as("stabilization.gamma_mass")? {
            stabilization.gamma_mass = v;
        }
        stabilization.mass_scaling = match raw.get("stabilization.mass_scaling").unwrap_or("plain") {
            "plain" => MassScaling::Plain,
            "reaction" => MassScaling::FromReaction,
            s => return err(format!("unknown mass scaling `{s}`")),
        };
        stabilization
            .validate()
            .map_err(|e| ConfigError(format!("stabilization: {e}")))?;

        let degree: usize = raw.parse_as("space.degree")?.unwrap_or(1);
        let quadrature = if raw.get("quadrature.order").is_some()
            || raw.get("quadrature.depth").is_some()
            || raw.get("quadrature.classify_depth").is_some()
        {
            let d = QuadratureConfig::for_degree(degree);
            Some(QuadratureConfig {
                order: raw.parse_as("quadrature.order")?.unwrap_or(d.order),
                depth: raw.parse_as("quadrature.depth")?.unwrap_or(d.depth),
                classify_depth: raw.parse_as("quadrature.classify_depth")?.unwrap_or(d.classify_depth),
            })
        } else {
            None
        };
        let condition = match raw.get("solver.condition").unwrap_or("auto") {
            "dense" => ConditionMode::DenseExact,
            "iterative" => ConditionMode::Iterative,
            "auto" => ConditionMode::Auto,
            s => return err(format!("unknown condition mode `{s}`")),
        };
        let scheme = match raw.get("time.scheme").unwrap_or("rk3") {
            "euler" => Scheme::Euler,
            "rk3" => Scheme::Rk3,
            s => return err(format!("unknown time scheme `{s}`")),
        };
        let time = TimeConfig {
            end_time: raw.parse_as("time.end_time")?.unwrap_or(1.0),
            cfl: raw.parse_as("time.cfl")?.unwrap_or(0.1),
            scheme,
            rk3_literal_stage: raw.parse_as("time.literal_rk3")?.unwrap_or(false),
        };
        if !(time.cfl > 0.0) || !(time.end_time >= 0.0) {
            return err("time: cfl must be positive and end_time non-negative");
        }
        let variants: Vec<String> = raw
            .list("scan.variants")?
            .unwrap_or_else(|| vec!["full".to_string(), "none".to_string()]);
        for v in &variants {
            if cutdg::analysis::ScanVariant::parse(v).is_none() {
                return err(format!("unknown scan variant `{v}`; expected full, gc-only, gb-only or none"));
            }
        }
        Ok(RunConfig {
            eps: raw.parse_as("problem.eps")?.unwrap_or(1.0),
            problem,
            shape,
            n: raw.parse_as("mesh.n")?,
            kind,
            bbox,
            levels,
            degree,
            stabilization,
            quadrature,
            condition,
            condition_samples: raw.parse_as("solver.condition_samples")?.unwrap_or(1),
            time,
            snapshots: raw.list("time.snapshots")?.unwrap_or_default(),
            delta_scan: raw.parse_as("time.delta_scan")?.unwrap_or(false),
            delta_n: raw.parse_as("time.delta_n")?.unwrap_or(25),
            delta_count: raw.parse_as("time.delta_count")?.unwrap_or(1000),
            scan_n: raw.parse_as("scan.n")?.unwrap_or(10),
            scan_count: raw.parse_as("scan.count")?.unwrap_or(1000),
            variants,
            full: parse_realization(raw.get("scan.full").unwrap_or("face-split"))?,
            gammas: raw.list("scan.gammas")?.unwrap_or_else(|| vec![1e-4, 1e-2, 1.0, 1e2]),
            scan_errors: raw.parse_as("scan.errors")?.unwrap_or(true),
            scan_condition: raw.parse_as("scan.condition")?.unwrap_or(true),
            exclusion: raw.parse_as("exclusion.delta")?.unwrap_or(0.25),
            out: PathBuf::from(raw.get("output.dir").unwrap_or("out")),
            plots: raw.parse_as("output.plots")?.unwrap_or(false),
            matrix: raw.parse_as("output.matrix")?.unwrap_or(false),
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        RunConfig::from_raw(&RawConfig::parse(text)?)
    }
}
