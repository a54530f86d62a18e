use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;
use serde::Serialize;

use super::FormsError;
use crate::geometry::QuadratureSet;
use crate::mesh::ActiveMesh;
use crate::Vec2;

pub type VectorField = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;
pub type JacobianField = Arc<dyn Fn(Vec2) -> Matrix2<f64> + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
pub type SpaceTimeField = Arc<dyn Fn(Vec2, f64) -> f64 + Send + Sync>;

/// Data of `b·∇u + cu = f` in Ω, `u = g` on the inflow boundary, optionally
/// time dependent through `f` and `g`.
#[derive(Clone)]
pub struct Coefficients {
    pub velocity: VectorField,
    /// `J[(i, j)] = ∂b_i/∂x_j`.
    pub jacobian: JacobianField,
    pub reaction: ScalarField,
    pub source: SpaceTimeField,
    pub inflow: SpaceTimeField,
    pub source_dt: Option<SpaceTimeField>,
    pub source_dtt: Option<SpaceTimeField>,
    pub inflow_dt: Option<SpaceTimeField>,
    pub inflow_dtt: Option<SpaceTimeField>,
}

impl fmt::Debug for Coefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficients")
            .field("time_derivatives", &self.source_dt.is_some())
            .finish_non_exhaustive()
    }
}

impl Coefficients {
    pub fn new(velocity: VectorField, jacobian: JacobianField, reaction: ScalarField) -> Self {
        Coefficients {
            velocity,
            jacobian,
            reaction,
            source: Arc::new(|_, _| 0.0),
            inflow: Arc::new(|_, _| 0.0),
            source_dt: None,
            source_dtt: None,
            inflow_dt: None,
            inflow_dtt: None,
        }
    }

    /// Constant `b`, `c`, `f`, `g`.
    pub fn constant(b: Vec2, c: f64, f: f64, g: f64) -> Self {
        let mut co = Coefficients::new(Arc::new(move |_| b), Arc::new(|_| Matrix2::zeros()), Arc::new(move |_| c));
        co.source = Arc::new(move |_, _| f);
        co.inflow = Arc::new(move |_, _| g);
        co
    }

    pub fn with_source(mut self, f: SpaceTimeField) -> Self {
        self.source = f;
        self
    }

    pub fn with_inflow(mut self, g: SpaceTimeField) -> Self {
        self.inflow = g;
        self
    }

    pub fn divergence(&self, x: Vec2) -> f64 {
        (self.jacobian)(x).trace()
    }

    pub fn b(&self, x: Vec2) -> Vec2 {
        (self.velocity)(x)
    }

    pub fn c(&self, x: Vec2) -> f64 {
        (self.reaction)(x)
    }
}

/// Reference scales of the problem on a given mesh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivedScalars {
    /// `max |b|`.
    pub b_c: f64,
    /// `1 / (max |c| + max |∇b|)`.
    pub tau_c: f64,
    /// `h / b_c`.
    pub phi_b: f64,
    /// `min (c - div b / 2)`.
    pub c0: f64,
    pub h: f64,
}

/// Estimates the reference scales by sampling at all volume and boundary
/// quadrature points.
pub fn derived_scalars(coeffs: &Coefficients, active: &ActiveMesh, quad: &QuadratureSet) -> Result<DerivedScalars, FormsError> {
    let mut b_c: f64 = 0.0;
    let mut c_max: f64 = 0.0;
    let mut grad_max: f64 = 0.0;
    let mut c0 = f64::INFINITY;
    for (a, e) in quad.elements.iter().enumerate() {
        let pts = e.volume.iter().map(|q| q.x).chain(quad.boundary(a).map(|q| q.x));
        for x in pts {
            let b = coeffs.b(x);
            let c = coeffs.c(x);
            let j = (coeffs.jacobian)(x);
            b_c = b_c.max(b.norm());
            c_max = c_max.max(c.abs());
            grad_max = grad_max.max(spectral_norm(&j));
            c0 = c0.min(c - 0.5 * j.trace());
        }
    }
    if !(c0 > 0.0) {
        return Err(FormsError::NonCoercive { c0 });
    }
    if b_c == 0.0 {
        return Err(FormsError::AdvectionInactive);
    }
    let h = active.h();
    let tau_c = 1.0 / (c_max + grad_max);
    if h > b_c * tau_c {
        log::warn!("mesh is under-resolved: h = {h:.3e} exceeds b_c tau_c = {:.3e}", b_c * tau_c);
    }
    Ok(DerivedScalars {
        b_c,
        tau_c,
        phi_b: h / b_c,
        c0,
        h,
    })
}

pub(crate) fn spectral_norm(m: &Matrix2<f64>) -> f64 {
    let ata = m.transpose() * m;
    let tr = ata.trace();
    let det = ata.determinant();
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    (0.5 * tr + disc).max(0.0).sqrt()
}
