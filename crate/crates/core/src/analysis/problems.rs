//! Built-in manufactured problems.
//!
//! Every problem carries the exact solution as a function returning value and
//! gradient (via [`Dual2`]). Sources are derived from it, so
//! [`Problem::self_check`] verifies the derivation independently with finite
//! differences.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dual::Dual2;
use crate::forms::{Coefficients, JacobianField, ScalarField, VectorField};
use crate::geometry::LevelSet;
use crate::mesh::{BackgroundMesh, BoundingBox, ElementKind, MeshError};
use crate::space::Family;
use crate::timestep::SeparableMode;
use crate::Vec2;

/// `u(x, t)` with its spatial gradient.
pub type ExactFn = Arc<dyn Fn(Vec2, f64) -> Dual2 + Send + Sync>;

/// Background mesh family of a problem: `n = base_n * 2^level` cells per
/// direction over `bbox`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshSpec {
    pub bbox: BoundingBox,
    pub base_n: usize,
    pub kind: ElementKind,
}

impl MeshSpec {
    pub fn cells(&self, level: usize) -> usize {
        self.base_n << level
    }

    pub fn mesh(&self, level: usize) -> Result<BackgroundMesh, MeshError> {
        let n = self.cells(level);
        BackgroundMesh::new(self.bbox, n, n, self.kind)
    }

    pub fn family(&self) -> Family {
        match self.kind {
            ElementKind::TriangleSplit => Family::P,
            ElementKind::Quadrilateral => Family::Q,
        }
    }
}

#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub level_set: LevelSet,
    pub coefficients: Coefficients,
    pub exact: ExactFn,
    /// `∂_t u`; `None` for stationary problems.
    pub exact_dt: Option<Arc<dyn Fn(Vec2, f64) -> f64 + Send + Sync>>,
    /// Product decomposition of `f` and `g` in time, when available.
    pub separable: Vec<SeparableMode>,
    /// Layer coordinate `λ` of the wavy problem.
    pub layer: Option<ScalarField>,
    pub mesh: MeshSpec,
    /// Points with `|λ|` below this are skipped by the self-check.
    check_layer_gap: f64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("level_set", &self.level_set)
            .field("mesh", &self.mesh)
            .finish_non_exhaustive()
    }
}

/// Names accepted by [`Problem::by_name`].
pub const PROBLEM_NAMES: [&str; 7] = [
    "flower",
    "flower-constant",
    "wavy",
    "wavy-affine",
    "translated-circle",
    "time-dependent-circle",
    "constant",
];

/// Coefficients of a stationary problem with source `b·∇u + c u` and inflow
/// `u`, both derived from the exact solution.
fn stationary_coefficients(velocity: VectorField, jacobian: JacobianField, reaction: ScalarField, exact: ExactFn) -> Coefficients {
    let (b, c, u) = (velocity.clone(), reaction.clone(), exact.clone());
    let source = Arc::new(move |x: Vec2, t: f64| {
        let d = u(x, t);
        b(x).dot(&d.d) + c(x) * d.v
    });
    let u = exact.clone();
    Coefficients::new(velocity, jacobian, reaction)
        .with_source(source)
        .with_inflow(Arc::new(move |x, t| u(x, t).v))
}

fn constant_velocity(b: Vec2) -> (VectorField, JacobianField) {
    (Arc::new(move |_| b), Arc::new(|_| Matrix2::zeros()))
}

fn flower_exact() -> ExactFn {
    Arc::new(|p, _| {
        let (x, y) = Dual2::point(p);
        ((1.0 + x) * (1.0 + y).powi(2) * (PI / 8.0)).sin() + 1.0
    })
}

fn wavy_velocity() -> (VectorField, JacobianField) {
    let b: VectorField = Arc::new(|p: Vec2| {
        let (x, y) = (p.x, p.y);
        Vec2::new((1.0 - x * x) * PI * (2.0 * PI * y).cos() / 25.0, (1.0 + 4.0 * x * x) / 5.0)
    });
    let j: JacobianField = Arc::new(|p: Vec2| {
        let (x, y) = (p.x, p.y);
        let (s, c) = (2.0 * PI * y).sin_cos();
        Matrix2::new(
            -2.0 * x * PI * c / 25.0,
            -(1.0 - x * x) * 2.0 * PI * PI * s / 25.0,
            8.0 * x / 5.0,
            0.0,
        )
    });
    (b, j)
}

fn wavy_layer(p: Vec2) -> f64 {
    (p.x - 0.1 * (2.0 * PI * p.y).sin()) / 5.0
}

fn wavy_exact(eps: f64) -> ExactFn {
    Arc::new(move |p, _| {
        let (x, y) = Dual2::point(p);
        let lambda = (x - (y * (2.0 * PI)).sin() * 0.1) / 5.0;
        let b1 = (1.0 - x * x) * (y * (2.0 * PI)).cos() * (PI / 25.0);
        (lambda * b1.asin()).exp() * (lambda / eps).atan()
    })
}

/// Modes of `cos(ω(s - β t))` in one coordinate `s`.
fn cosine_modes(omega: f64, beta: f64, axis: usize, c: f64) -> [SeparableMode; 2] {
    let k = omega * beta;
    let coord = move |x: Vec2| if axis == 0 { x.x } else { x.y };
    let cos_mode = SeparableMode {
        source: Arc::new(move |x| c * (omega * coord(x)).cos()),
        inflow: Arc::new(move |x| (omega * coord(x)).cos()),
        time: Arc::new(move |t| {
            let (s, co) = (k * t).sin_cos();
            [co, -k * s, -k * k * co]
        }),
    };
    let sin_mode = SeparableMode {
        source: Arc::new(move |x| c * (omega * coord(x)).sin()),
        inflow: Arc::new(move |x| (omega * coord(x)).sin()),
        time: Arc::new(move |t| {
            let (s, co) = (k * t).sin_cos();
            [s, k * co, -k * k * s]
        }),
    };
    [cos_mode, sin_mode]
}

impl Problem {
    /// Flower-shaped domain with a smooth solution.
    pub fn flower() -> Self {
        let (b, j) = constant_velocity(Vec2::new(0.8, 0.6));
        let exact = flower_exact();
        Problem {
            name: "flower".into(),
            level_set: LevelSet::flower(0.5, 0.15),
            coefficients: stationary_coefficients(b, j, Arc::new(|_| 1.0), exact.clone()),
            exact,
            exact_dt: None,
            separable: Vec::new(),
            layer: None,
            mesh: MeshSpec {
                bbox: BoundingBox::square(1.0),
                base_n: 8,
                kind: ElementKind::TriangleSplit,
            },
            check_layer_gap: 0.0,
        }
    }

    /// The flower domain with `u = 1`.
    pub fn flower_constant() -> Self {
        let mut p = Problem::constant(LevelSet::flower(0.5, 0.15), Vec2::new(0.8, 0.6), 1.0, 1.0);
        p.name = "flower-constant".into();
        p
    }

    /// `u = value` on an arbitrary domain over `[-1, 1]^2`.
    pub fn constant(level_set: LevelSet, b: Vec2, c: f64, value: f64) -> Self {
        Problem {
            name: "constant".into(),
            level_set,
            coefficients: Coefficients::constant(b, c, c * value, value),
            exact: Arc::new(move |_, _| Dual2::constant(value)),
            exact_dt: None,
            separable: Vec::new(),
            layer: None,
            mesh: MeshSpec {
                bbox: BoundingBox::square(1.0),
                base_n: 8,
                kind: ElementKind::TriangleSplit,
            },
            check_layer_gap: 0.0,
        }
    }

    /// Band with wavy inflow and outflow boundaries; small `eps` gives an
    /// internal layer along `λ = 0`.
    pub fn wavy(eps: f64) -> Self {
        let (b, j) = wavy_velocity();
        let exact = wavy_exact(eps);
        Problem {
            name: "wavy".into(),
            level_set: LevelSet::wavy_band(0.1, 8.0, 0.85),
            coefficients: stationary_coefficients(b, j, Arc::new(|_| 1.0), exact.clone()),
            exact,
            exact_dt: None,
            separable: Vec::new(),
            layer: Some(Arc::new(wavy_layer)),
            mesh: MeshSpec {
                bbox: BoundingBox::square(1.0),
                base_n: 8,
                kind: ElementKind::TriangleSplit,
            },
            // the finite-difference check cannot resolve the layer itself
            check_layer_gap: if eps < 1e-3 { 0.01 } else { 0.0 },
        }
    }

    /// Wavy data on a band with straight boundaries, so that the cut
    /// geometry is resolved exactly and high-order rates are visible.
    pub fn wavy_affine(eps: f64) -> Self {
        let mut p = Problem::wavy(eps);
        p.name = "wavy-affine".into();
        p.level_set = LevelSet::Intersection(vec![
            LevelSet::half_plane(Vec2::new(-0.1, 1.0), 0.83),
            LevelSet::half_plane(Vec2::new(-0.07, -1.0), 0.81),
        ]);
        p
    }

    /// Circle of radius 0.25 moved by `shift`, with the flower data.
    pub fn translated_circle(shift: Vec2) -> Self {
        let (b, j) = constant_velocity(Vec2::new(0.8, 0.6));
        let exact = flower_exact();
        Problem {
            name: "translated-circle".into(),
            level_set: LevelSet::circle(Vec2::zeros(), 0.25).translate(shift),
            coefficients: stationary_coefficients(b, j, Arc::new(|_| 1.0), exact.clone()),
            exact,
            exact_dt: None,
            separable: Vec::new(),
            layer: None,
            mesh: MeshSpec {
                bbox: BoundingBox::square(0.35),
                base_n: 10,
                kind: ElementKind::TriangleSplit,
            },
            check_layer_gap: 0.0,
        }
    }

    /// Transport of `Θ(x) = cos(8πx) + cos(8πy)` through a circle moved by
    /// `shift`: `u = Θ(x - b t)`, `f = c u`, `g = u`.
    pub fn time_dependent_circle(shift: Vec2) -> Self {
        let bv = Vec2::new(0.6, 0.8);
        let c = 1.0;
        let omega = 8.0 * PI;
        let (b, j) = constant_velocity(bv);
        let exact: ExactFn = Arc::new(move |p, t| {
            let (x, y) = Dual2::point(p - bv * t);
            (x * omega).cos() + (y * omega).cos()
        });
        let exact_dt = Arc::new(move |p: Vec2, t: f64| {
            let q = p - bv * t;
            omega * (bv.x * (omega * q.x).sin() + bv.y * (omega * q.y).sin())
        });
        let mut coefficients = Coefficients::new(b, j, Arc::new(move |_| c));
        let u = exact.clone();
        coefficients.source = Arc::new(move |x, t| c * u(x, t).v);
        let u = exact.clone();
        coefficients.inflow = Arc::new(move |x, t| u(x, t).v);
        let ud = exact_dt.clone();
        coefficients.inflow_dt = Some(ud.clone());
        coefficients.source_dt = Some(Arc::new(move |x, t| c * ud(x, t)));
        let second = Arc::new(move |p: Vec2, t: f64| {
            let q = p - bv * t;
            -omega * omega * (bv.x * bv.x * (omega * q.x).cos() + bv.y * bv.y * (omega * q.y).cos())
        });
        coefficients.inflow_dtt = Some(second.clone());
        coefficients.source_dtt = Some(Arc::new(move |x, t| c * second(x, t)));
        let mut separable = Vec::new();
        separable.extend(cosine_modes(omega, bv.x, 0, c));
        separable.extend(cosine_modes(omega, bv.y, 1, c));
        Problem {
            name: "time-dependent-circle".into(),
            level_set: LevelSet::circle(Vec2::zeros(), 0.25).translate(shift),
            coefficients,
            exact,
            exact_dt: Some(exact_dt),
            separable,
            layer: None,
            mesh: MeshSpec {
                bbox: BoundingBox::square(0.35),
                base_n: 40,
                kind: ElementKind::Quadrilateral,
            },
            check_layer_gap: 0.0,
        }
    }

    /// Registry lookup. `eps` only affects the wavy problems.
    pub fn by_name(name: &str, eps: f64) -> Option<Self> {
        Some(match name {
            "flower" => Problem::flower(),
            "flower-constant" => Problem::flower_constant(),
            "wavy" => Problem::wavy(eps),
            "wavy-affine" => Problem::wavy_affine(eps),
            "translated-circle" => Problem::translated_circle(Vec2::zeros()),
            "time-dependent-circle" => Problem::time_dependent_circle(Vec2::zeros()),
            "constant" => Problem::constant(LevelSet::circle(Vec2::zeros(), 0.6), Vec2::new(1.0, 0.5), 1.0, 1.0),
            _ => return None,
        })
    }

    pub fn is_time_dependent(&self) -> bool {
        self.exact_dt.is_some()
    }

    pub fn u(&self, x: Vec2, t: f64) -> f64 {
        (self.exact)(x, t).v
    }

    pub fn grad_u(&self, x: Vec2, t: f64) -> Vec2 {
        (self.exact)(x, t).d
    }

    /// Largest relative residual `|u_t + b·∇u + c u - f| / (1 + |f|)` over
    /// `samples` random points of the mesh box, with all derivatives taken by
    /// fourth-order finite differences of `u`.
    pub fn self_check(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bb = self.mesh.bbox;
        let hd = 1e-4;
        let u = |x: Vec2, t: f64| self.u(x, t);
        let d4 = |f: &dyn Fn(f64) -> f64| (8.0 * (f(hd) - f(-hd)) - (f(2.0 * hd) - f(-2.0 * hd))) / (12.0 * hd);
        let mut worst: f64 = 0.0;
        let mut taken = 0;
        while taken < samples {
            let x = Vec2::new(rng.gen_range(bb.x_min..bb.x_max), rng.gen_range(bb.y_min..bb.y_max));
            let t = if self.is_time_dependent() { rng.gen_range(0.0..1.0) } else { 0.0 };
            if let Some(l) = &self.layer {
                if l(x).abs() < self.check_layer_gap {
                    continue;
                }
            }
            taken += 1;
            let ux = d4(&|s| u(x + Vec2::new(s, 0.0), t));
            let uy = d4(&|s| u(x + Vec2::new(0.0, s), t));
            let ut = if self.is_time_dependent() { d4(&|s| u(x, t + s)) } else { 0.0 };
            let co = &self.coefficients;
            let f = (co.source)(x, t);
            let r = ut + co.b(x).dot(&Vec2::new(ux, uy)) + co.c(x) * u(x, t) - f;
            worst = worst.max(r.abs() / (1.0 + f.abs()));
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_complete() {
        for name in PROBLEM_NAMES {
            let p = Problem::by_name(name, 1.0).unwrap();
            assert_eq!(p.name, name);
        }
        assert!(Problem::by_name("popcorn", 1.0).is_none());
    }

    #[test]
    fn separable_modes_reproduce_the_source() {
        let p = Problem::time_dependent_circle(Vec2::zeros());
        for &(x, t) in &[(Vec2::new(0.1, -0.2), 0.3), (Vec2::new(-0.31, 0.05), 0.97)] {
            let mut f = 0.0;
            let mut g = 0.0;
            let mut fd = 0.0;
            for m in &p.separable {
                let th = (m.time)(t);
                f += th[0] * (m.source)(x);
                g += th[0] * (m.inflow)(x);
                fd += th[1] * (m.source)(x);
            }
            assert!((f - (p.coefficients.source)(x, t)).abs() < 1e-12);
            assert!((g - p.u(x, t)).abs() < 1e-12);
            assert!((fd - (p.coefficients.source_dt.as_ref().unwrap())(x, t)).abs() < 1e-9);
        }
    }

    #[test]
    fn time_derivatives_match_finite_differences() {
        let p = Problem::time_dependent_circle(Vec2::zeros());
        let x = Vec2::new(0.07, 0.13);
        let t = 0.4;
        let h = 1e-5;
        let d = (p.coefficients.inflow)(x, t + h) - (p.coefficients.inflow)(x, t - h);
        let dd = (p.coefficients.inflow_dt.as_ref().unwrap())(x, t + h)
            - (p.coefficients.inflow_dt.as_ref().unwrap())(x, t - h);
        assert!((d / (2.0 * h) - (p.coefficients.inflow_dt.as_ref().unwrap())(x, t)).abs() < 1e-4);
        assert!((dd / (2.0 * h) - (p.coefficients.inflow_dtt.as_ref().unwrap())(x, t)).abs() < 1e-2);
    }

    #[test]
    fn wavy_velocity_jacobian_matches_finite_differences() {
        let (b, j) = wavy_velocity();
        let x = Vec2::new(0.3, -0.45);
        let h = 1e-6;
        let jx = (b(x + Vec2::new(h, 0.0)) - b(x - Vec2::new(h, 0.0))) / (2.0 * h);
        let jy = (b(x + Vec2::new(0.0, h)) - b(x - Vec2::new(0.0, h))) / (2.0 * h);
        let m = j(x);
        assert!((m[(0, 0)] - jx.x).abs() < 1e-8 && (m[(1, 0)] - jx.y).abs() < 1e-8);
        assert!((m[(0, 1)] - jy.x).abs() < 1e-8 && (m[(1, 1)] - jy.y).abs() < 1e-8);
    }

    #[test]
    fn wavy_layer_sign_change() {
        let p = Problem::wavy(1e-8);
        assert!(p.u(Vec2::new(0.2, 0.0), 0.0) > 1.0);
        assert!(p.u(Vec2::new(-0.2, 0.0), 0.0) < -1.0);
    }
}
