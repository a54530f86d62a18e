//! Error functionals and convergence rates.

use serde::Serialize;

use super::problems::Problem;
use crate::geometry::QuadratureSet;
use crate::space::FeFunction;
use crate::Vec2;

/// All error metrics of one discrete solution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ErrorRow {
    /// Element diameter.
    pub h: f64,
    /// Cells per box side.
    pub n: usize,
    pub n_dofs: usize,
    pub e_l2: f64,
    /// `(1/√2) ‖|b·n|^½ [e]‖` over the faces restricted to the domain.
    pub e_up: f64,
    /// `‖φ_b^½ b·∇e‖`, elementwise.
    pub e_sd: f64,
    /// `(1/√2) ‖|b·n|^½ e‖_∂Ω`.
    pub e_gw: f64,
    pub e_g: f64,
    /// Maximum over volume quadrature points.
    pub e_inf: f64,
    /// Boundary semi-norm with jumps over full faces.
    pub e_b: f64,
    /// No element passed the inclusion filter.
    pub empty: bool,
}

impl ErrorRow {
    pub const METRICS: [&'static str; 7] = ["e_l2", "e_up", "e_sd", "e_gw", "e_g", "e_inf", "e_b"];

    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "e_l2" => self.e_l2,
            "e_up" => self.e_up,
            "e_sd" => self.e_sd,
            "e_gw" => self.e_gw,
            "e_g" => self.e_g,
            "e_inf" => self.e_inf,
            "e_b" => self.e_b,
            _ => return None,
        })
    }
}

/// Errors of `uh` against the exact solution at time `t` over the whole
/// active domain.
pub fn compute_errors(uh: &FeFunction<'_>, problem: &Problem, quad: &QuadratureSet, t: f64) -> ErrorRow {
    compute_errors_filtered(uh, problem, quad, t, None)
}

/// Like [`compute_errors`] but restricted to the elements flagged in
/// `include`; faces count only if both neighbors are included.
pub fn compute_errors_filtered(
    uh: &FeFunction<'_>,
    problem: &Problem,
    quad: &QuadratureSet,
    t: f64,
    include: Option<&[bool]>,
) -> ErrorRow {
    let space = uh.space;
    let mesh = &space.mesh;
    let co = &problem.coefficients;
    let keep = |a: usize| include.map_or(true, |m| m[a]);

    let mut b_c: f64 = 0.0;
    for e in &quad.elements {
        for q in &e.volume {
            b_c = b_c.max(co.b(q.x).norm());
        }
    }
    let phi_b = if b_c > 0.0 { mesh.h() / b_c } else { 0.0 };

    let (mut l2, mut sd, mut gw, mut g, mut inf, mut up, mut jb) = (0.0, 0.0, 0.0, 0.0, 0.0f64, 0.0, 0.0);
    let mut any = false;
    for a in 0..mesh.n_active() {
        if !keep(a) {
            continue;
        }
        any = true;
        let eq = &quad.elements[a];
        let pts: Vec<Vec2> = eq.volume.iter().map(|q| q.x).collect();
        for (q, (v, dv)) in eq.volume.iter().zip(uh.evaluate_with_gradient(a, &pts)) {
            let ex = (problem.exact)(q.x, t);
            let e = ex.v - v;
            let de = ex.d - dv;
            l2 += q.w * e * e;
            sd += q.w * phi_b * co.b(q.x).dot(&de).powi(2);
            inf = inf.max(e.abs());
        }
        let bpts: Vec<_> = quad.boundary(a).collect();
        let xs: Vec<Vec2> = bpts.iter().map(|q| q.x).collect();
        for (q, v) in bpts.iter().zip(uh.evaluate(a, &xs)) {
            let e = problem.u(q.x, t) - v;
            g += q.w * e * e;
            gw += 0.5 * q.w * co.b(q.x).dot(&q.n).abs() * e * e;
        }
    }
    for (k, f) in mesh.faces.iter().enumerate() {
        if !(keep(f.plus) && keep(f.minus)) {
            continue;
        }
        // the exact solution is continuous, so [e] = -[u_h]
        let jump_sq = |pts: &[crate::geometry::QuadPoint]| {
            let xs: Vec<Vec2> = pts.iter().map(|q| q.x).collect();
            let vp = uh.evaluate(f.plus, &xs);
            let vm = uh.evaluate(f.minus, &xs);
            pts.iter()
                .zip(vp.iter().zip(&vm))
                .map(|(q, (p, m))| 0.5 * q.w * co.b(q.x).dot(&f.normal).abs() * (p - m).powi(2))
                .sum::<f64>()
        };
        up += jump_sq(&quad.faces[k]);
        jb += jump_sq(&quad.full_face(f));
    }
    ErrorRow {
        h: mesh.h(),
        n: mesh.background.nx,
        n_dofs: space.n_dofs(),
        e_l2: l2.sqrt(),
        e_up: up.sqrt(),
        e_sd: sd.sqrt(),
        e_gw: gw.sqrt(),
        e_g: g.sqrt(),
        e_inf: inf,
        e_b: (gw + jb).sqrt(),
        empty: !any,
    }
}

/// Elements lying wholly outside the layer tube `|5λ| ≤ δ`, tested at the
/// vertices and volume quadrature points. `δ ≤ 0` keeps everything.
pub fn layer_mask(problem: &Problem, quad: &QuadratureSet, mesh: &crate::mesh::ActiveMesh, delta: f64) -> Vec<bool> {
    let Some(layer) = &problem.layer else {
        return vec![true; mesh.n_active()];
    };
    if delta <= 0.0 {
        return vec![true; mesh.n_active()];
    }
    (0..mesh.n_active())
        .map(|a| {
            let geom = mesh.geometry(a);
            let outside = |x: Vec2| (5.0 * layer(x)).abs() > delta;
            geom.vertices().iter().all(|&v| outside(v)) && quad.elements[a].volume.iter().all(|q| outside(q.x))
        })
        .collect()
}

/// Errors restricted to the region away from the internal layer.
pub fn layer_excluded_errors(uh: &FeFunction<'_>, problem: &Problem, quad: &QuadratureSet, delta: f64) -> ErrorRow {
    let mask = layer_mask(problem, quad, &uh.space.mesh, delta);
    compute_errors_filtered(uh, problem, quad, 0.0, Some(&mask))
}

/// Experimental order of convergence between consecutive levels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Eoc {
    /// First level.
    Undefined,
    Value(f64),
    /// A zero error makes the rate meaningless.
    Saturated,
}

impl Eoc {
    pub fn value(self) -> Option<f64> {
        match self {
            Eoc::Value(v) => Some(v),
            _ => None,
        }
    }

    /// CSV cell text.
    pub fn cell(self) -> String {
        match self {
            Eoc::Undefined => String::new(),
            Eoc::Value(v) => format!("{v:.4}"),
            Eoc::Saturated => "saturated".into(),
        }
    }
}

/// `log(E_{k-1}/E_k) / log(h_{k-1}/h_k)` per level.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Vec<Eoc> {
    assert_eq!(errors.len(), hs.len(), "one h per error");
    (0..errors.len())
        .map(|k| {
            if k == 0 {
                Eoc::Undefined
            } else if errors[k] <= 0.0 || errors[k - 1] <= 0.0 {
                Eoc::Saturated
            } else {
                Eoc::Value((errors[k - 1] / errors[k]).ln() / (hs[k - 1] / hs[k]).ln())
            }
        })
        .collect()
}

/// Mean of the defined rates over the last `n` levels.
pub fn mean_final_eoc(rates: &[Eoc], n: usize) -> Option<f64> {
    let tail: Vec<f64> = rates.iter().rev().take(n).filter_map(|e| e.value()).collect();
    if tail.is_empty() || tail.len() < n {
        None
    } else {
        Some(tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}
