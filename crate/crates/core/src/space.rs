//! Broken polynomial spaces on the active mesh.
//!
//! Every local basis is stored as a coefficient matrix over scaled monomials
//! `((x - xc)/sx)^a ((y - yc)/sy)^b`, so derivatives of any order in physical
//! coordinates come from the same code path for both families.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{full_element_rule, ReferenceRules};
use crate::mesh::{ActiveMesh, ElementKind};
use crate::Vec2;

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("{family:?}{degree} is not supported on {kind:?} meshes")]
    Unsupported {
        family: Family,
        degree: usize,
        kind: ElementKind,
    },
    #[error("local mass matrix of element {0} is singular")]
    SingularMass(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// Complete polynomials of total degree `p` on triangles.
    P,
    /// Tensor-product polynomials of degree `p` per direction on quadrilaterals.
    Q,
}

/// Number of partial derivatives of order `<= k`.
pub fn n_derivatives(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Position of `D^(dx,dy)` in derivative-ordered storage.
pub fn derivative_index(dx: usize, dy: usize) -> usize {
    let k = dx + dy;
    k * (k + 1) / 2 + dy
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn falling(a: usize, k: usize) -> f64 {
    (0..k).map(|i| (a - i) as f64).product()
}

/// Terms `(derivative index, weight)` of `Σ_{|α|=j} D^α n^α / α!`.
pub fn normal_derivative_weights(j: usize, n: Vec2) -> Vec<(usize, f64)> {
    (0..=j)
        .map(|a| {
            let b = j - a;
            (
                derivative_index(a, b),
                n.x.powi(a as i32) * n.y.powi(b as i32) / (factorial(a) * factorial(b)),
            )
        })
        .collect()
}

#[derive(Clone, Debug)]
struct LocalBasis {
    exps: Vec<(usize, usize)>,
    /// Row `i` holds the monomial coefficients of basis function `i`.
    coeffs: DMatrix<f64>,
    sx: f64,
    sy: f64,
    max_exp: usize,
}

impl LocalBasis {
    fn n(&self) -> usize {
        self.coeffs.nrows()
    }
}

fn lagrange_1d(nodes: &[f64]) -> Vec<Vec<f64>> {
    // coefficients in increasing powers
    nodes
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let mut poly = vec![1.0];
            for (k, &xk) in nodes.iter().enumerate() {
                if k == i {
                    continue;
                }
                let mut next = vec![0.0; poly.len() + 1];
                for (d, &c) in poly.iter().enumerate() {
                    next[d + 1] += c / (xi - xk);
                    next[d] -= c * xk / (xi - xk);
                }
                poly = next;
            }
            poly
        })
        .collect()
}

fn gll_nodes(p: usize) -> Vec<f64> {
    match p {
        0 => vec![0.0],
        1 => vec![-1.0, 1.0],
        2 => vec![-1.0, 0.0, 1.0],
        _ => unreachable!(),
    }
}

/// Scalar values (`derivative_index` ordered, basis-fastest) of the local
/// basis at a set of points.
#[derive(Clone, Debug)]
pub struct BasisValues {
    pub n_points: usize,
    pub n_derivs: usize,
    pub n_local: usize,
    data: Vec<f64>,
}

impl BasisValues {
    /// All basis functions' `D^(dx,dy)` at point `q`.
    pub fn deriv(&self, q: usize, dx: usize, dy: usize) -> &[f64] {
        self.by_index(q, derivative_index(dx, dy))
    }

    pub fn by_index(&self, q: usize, d: usize) -> &[f64] {
        let start = (q * self.n_derivs + d) * self.n_local;
        &self.data[start..start + self.n_local]
    }

    pub fn values(&self, q: usize) -> &[f64] {
        self.by_index(q, 0)
    }

    /// Gradient of basis function `i` at point `q`.
    pub fn gradient(&self, q: usize, i: usize) -> Vec2 {
        Vec2::new(self.deriv(q, 1, 0)[i], self.deriv(q, 0, 1)[i])
    }
}

#[derive(Clone, Debug)]
pub struct BrokenSpace {
    pub mesh: Arc<ActiveMesh>,
    pub family: Family,
    pub degree: usize,
    pub n_local: usize,
    bases: Vec<LocalBasis>,
    centers: Vec<Vec2>,
}

impl BrokenSpace {
    pub fn new(mesh: Arc<ActiveMesh>, family: Family, degree: usize) -> Result<Self, SpaceError> {
        let kind = mesh.background.kind;
        let ok = match (family, kind) {
            (Family::P, ElementKind::TriangleSplit) => degree <= 3,
            (Family::Q, ElementKind::Quadrilateral) => degree <= 2,
            _ => false,
        };
        if !ok {
            return Err(SpaceError::Unsupported { family, degree, kind });
        }
        let bg = &mesh.background;
        let bases = (0..bg.n_shape_classes())
            .map(|class| {
                let e = (0..bg.n_elements()).find(|&e| bg.shape_class(e) == class).unwrap();
                match family {
                    Family::P => modal_basis(&bg.element(e), degree, bg.h_s()),
                    Family::Q => tensor_basis(degree, 0.5 * bg.hx(), 0.5 * bg.hy()),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let centers = (0..mesh.n_active())
            .map(|a| mesh.geometry(a).centroid())
            .collect();
        let n_local = bases[0].n();
        Ok(BrokenSpace {
            mesh,
            family,
            degree,
            n_local,
            bases,
            centers,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.n_local * self.mesh.n_active()
    }

    /// Global index of local DOF `i` on active element `a`.
    pub fn dof(&self, a: usize, i: usize) -> usize {
        a * self.n_local + i
    }

    pub fn dofs(&self, a: usize) -> std::ops::Range<usize> {
        a * self.n_local..(a + 1) * self.n_local
    }

    pub fn center(&self, a: usize) -> Vec2 {
        self.centers[a]
    }

    fn basis(&self, a: usize) -> &LocalBasis {
        &self.bases[self.mesh.shape_class(a)]
    }

    /// Values and partial derivatives up to order `max_deriv` in physical
    /// coordinates. Points may lie outside the element (natural extension).
    pub fn eval_basis(&self, a: usize, points: &[Vec2], max_deriv: usize) -> BasisValues {
        let basis = self.basis(a);
        let center = self.centers[a];
        let n_derivs = n_derivatives(max_deriv);
        let n_local = basis.n();
        let n_mono = basis.exps.len();
        let mut data = vec![0.0; points.len() * n_derivs * n_local];
        let mut mono = vec![0.0; n_mono];
        let mut px = vec![0.0; basis.max_exp + 1];
        let mut py = vec![0.0; basis.max_exp + 1];
        for (q, p) in points.iter().enumerate() {
            let xi = (p.x - center.x) / basis.sx;
            let eta = (p.y - center.y) / basis.sy;
            px[0] = 1.0;
            py[0] = 1.0;
            for k in 1..=basis.max_exp {
                px[k] = px[k - 1] * xi;
                py[k] = py[k - 1] * eta;
            }
            for k in 0..=max_deriv {
                for dy in 0..=k {
                    let dx = k - dy;
                    let scale = basis.sx.powi(-(dx as i32)) * basis.sy.powi(-(dy as i32));
                    for (m, &(ea, eb)) in basis.exps.iter().enumerate() {
                        mono[m] = if dx > ea || dy > eb {
                            0.0
                        } else {
                            falling(ea, dx) * falling(eb, dy) * px[ea - dx] * py[eb - dy] * scale
                        };
                    }
                    let d = derivative_index(dx, dy);
                    let out = &mut data[(q * n_derivs + d) * n_local..(q * n_derivs + d + 1) * n_local];
                    for (i, o) in out.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for m in 0..n_mono {
                            s += basis.coeffs[(i, m)] * mono[m];
                        }
                        *o = s;
                    }
                }
            }
        }
        BasisValues {
            n_points: points.len(),
            n_derivs,
            n_local,
            data,
        }
    }

    pub fn zero_function(&self) -> FeFunction<'_> {
        FeFunction {
            space: self,
            coeffs: vec![0.0; self.n_dofs()],
        }
    }

    pub fn function(&self, coeffs: Vec<f64>) -> FeFunction<'_> {
        assert_eq!(coeffs.len(), self.n_dofs());
        FeFunction { space: self, coeffs }
    }
}

fn modal_basis(geom: &crate::mesh::ElementGeometry, p: usize, scale: f64) -> Result<LocalBasis, SpaceError> {
    let mut exps = Vec::new();
    for k in 0..=p {
        for b in 0..=k {
            exps.push((k - b, b));
        }
    }
    let n = exps.len();
    let center = geom.centroid();
    let rules = ReferenceRules::new(2 * p);
    let pts = full_element_rule(geom, &rules);
    let area = geom.area();
    let mut gram = DMatrix::zeros(n, n);
    for q in &pts {
        let xi = (q.x.x - center.x) / scale;
        let eta = (q.x.y - center.y) / scale;
        let vals: Vec<f64> = exps
            .iter()
            .map(|&(a, b)| xi.powi(a as i32) * eta.powi(b as i32))
            .collect();
        for i in 0..n {
            for j in 0..n {
                gram[(i, j)] += q.w * vals[i] * vals[j] / area;
            }
        }
    }
    let chol = gram.cholesky().ok_or(SpaceError::SingularMass(0))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or(SpaceError::SingularMass(0))?;
    Ok(LocalBasis {
        exps,
        coeffs: l_inv,
        sx: scale,
        sy: scale,
        max_exp: p,
    })
}

fn tensor_basis(p: usize, sx: f64, sy: f64) -> Result<LocalBasis, SpaceError> {
    let l = lagrange_1d(&gll_nodes(p));
    let mut exps = Vec::new();
    for b in 0..=p {
        for a in 0..=p {
            exps.push((a, b));
        }
    }
    let n = (p + 1) * (p + 1);
    let mut coeffs = DMatrix::zeros(n, n);
    // basis (i, j) = l_i(xi) l_j(eta), numbered with i fastest
    for j in 0..=p {
        for i in 0..=p {
            let row = j * (p + 1) + i;
            for (m, &(a, b)) in exps.iter().enumerate() {
                coeffs[(row, m)] = l[i][a] * l[j][b];
            }
        }
    }
    Ok(LocalBasis {
        exps,
        coeffs,
        sx,
        sy,
        max_exp: p,
    })
}

/// A discrete function: element-major coefficients in a [`BrokenSpace`].
#[derive(Clone, Debug)]
pub struct FeFunction<'s> {
    pub space: &'s BrokenSpace,
    pub coeffs: Vec<f64>,
}

impl<'s> FeFunction<'s> {
    pub fn local(&self, a: usize) -> &[f64] {
        &self.coeffs[self.space.dofs(a)]
    }

    pub fn evaluate(&self, a: usize, points: &[Vec2]) -> Vec<f64> {
        evaluate(self, a, points)
    }

    /// Values and gradients on element `a`.
    pub fn evaluate_with_gradient(&self, a: usize, points: &[Vec2]) -> Vec<(f64, Vec2)> {
        let bv = self.space.eval_basis(a, points, 1);
        let c = self.local(a);
        (0..points.len())
            .map(|q| {
                let v = dot(bv.values(q), c);
                let gx = dot(bv.deriv(q, 1, 0), c);
                let gy = dot(bv.deriv(q, 0, 1), c);
                (v, Vec2::new(gx, gy))
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ_i c_i φ_i(x)` on element `a`.
pub fn evaluate(fe: &FeFunction<'_>, a: usize, points: &[Vec2]) -> Vec<f64> {
    let bv = fe.space.eval_basis(a, points, 0);
    let c = fe.local(a);
    (0..points.len()).map(|q| dot(bv.values(q), c)).collect()
}

/// Jump `[∂_n^j v]` at `point` between local coefficient vectors of the two
/// elements of `face`.
pub fn normal_derivative_jump(
    space: &BrokenSpace,
    face: &crate::mesh::Face,
    normal: Vec2,
    j: usize,
    coeffs_plus: &[f64],
    coeffs_minus: &[f64],
    point: Vec2,
) -> f64 {
    let weights = normal_derivative_weights(j, normal);
    let side = |a: usize, c: &[f64]| {
        let bv = space.eval_basis(a, &[point], j);
        weights
            .iter()
            .map(|&(d, w)| w * dot(bv.by_index(0, d), c))
            .sum::<f64>()
    };
    side(face.plus, coeffs_plus) - side(face.minus, coeffs_minus)
}

/// Elementwise projection where the target may depend on the element, e.g.
/// an extension evaluated per element.
pub fn elementwise_l2_project_local<'s, F>(
    space: &'s BrokenSpace,
    rules: &ReferenceRules,
    f: F,
) -> Result<FeFunction<'s>, SpaceError>
where
    F: Fn(usize, Vec2) -> f64,
{
    let n = space.n_local;
    let mut coeffs = vec![0.0; space.n_dofs()];
    for a in 0..space.mesh.n_active() {
        let pts = full_element_rule(&space.mesh.geometry(a), rules);
        let xs: Vec<Vec2> = pts.iter().map(|q| q.x).collect();
        let bv = space.eval_basis(a, &xs, 0);
        let mut mass = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for (q, qp) in pts.iter().enumerate() {
            let v = bv.values(q);
            let fv = f(a, qp.x);
            for i in 0..n {
                rhs[i] += qp.w * fv * v[i];
                for j in 0..n {
                    mass[(i, j)] += qp.w * v[i] * v[j];
                }
            }
        }
        let chol = mass.cholesky().ok_or(SpaceError::SingularMass(a))?;
        let sol = chol.solve(&rhs);
        coeffs[space.dofs(a)].copy_from_slice(sol.as_slice());
    }
    Ok(space.function(coeffs))
}

/// Projection over whole elements (not clipped to the domain).
pub fn elementwise_l2_project<'s, F>(f: F, space: &'s BrokenSpace, rules: &ReferenceRules) -> Result<FeFunction<'s>, SpaceError>
where
    F: Fn(Vec2) -> f64,
{
    elementwise_l2_project_local(space, rules, |_, x| f(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LevelSet;
    use crate::mesh::{build_active, BackgroundMesh, BoundingBox};
    use approx::assert_relative_eq;

    fn space(kind: ElementKind, family: Family, p: usize, n: usize) -> BrokenSpace {
        let mesh = BackgroundMesh::new(BoundingBox::new(0.0, 1.0, 0.0, 1.0), n, n, kind).unwrap();
        let act = build_active(&mesh, &LevelSet::Everywhere, 1).unwrap();
        BrokenSpace::new(Arc::new(act), family, p).unwrap()
    }

    #[test]
    fn p0_is_constant_one() {
        let s = space(ElementKind::TriangleSplit, Family::P, 0, 2);
        let bv = s.eval_basis(3, &[Vec2::new(0.7, 0.9), Vec2::new(0.1, 0.2)], 1);
        for q in 0..2 {
            assert_relative_eq!(bv.values(q)[0], 1.0, epsilon = 1e-14);
            assert_eq!(bv.gradient(q, 0), Vec2::zeros());
        }
    }

    #[test]
    fn unsupported_combinations() {
        let mesh = BackgroundMesh::new(BoundingBox::new(0.0, 1.0, 0.0, 1.0), 2, 2, ElementKind::Quadrilateral).unwrap();
        let act = Arc::new(build_active(&mesh, &LevelSet::Everywhere, 1).unwrap());
        assert!(BrokenSpace::new(act.clone(), Family::P, 1).is_err());
        assert!(BrokenSpace::new(act, Family::Q, 3).is_err());
    }

    #[test]
    fn modal_basis_is_orthonormal() {
        for p in 0..=3 {
            let s = space(ElementKind::TriangleSplit, Family::P, p, 3);
            let rules = ReferenceRules::new(2 * p + 2);
            for a in [0, 1, 7] {
                let geom = s.mesh.geometry(a);
                let pts = full_element_rule(&geom, &rules);
                let xs: Vec<Vec2> = pts.iter().map(|q| q.x).collect();
                let bv = s.eval_basis(a, &xs, 0);
                for i in 0..s.n_local {
                    for j in 0..s.n_local {
                        let g: f64 = pts
                            .iter()
                            .enumerate()
                            .map(|(q, qp)| qp.w * bv.values(q)[i] * bv.values(q)[j])
                            .sum::<f64>()
                            / geom.area();
                        assert_relative_eq!(g, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn barycentric_functions_at_centroid() {
        let s = space(ElementKind::TriangleSplit, Family::P, 1, 1);
        let rules = ReferenceRules::new(4);
        // element 0 is (0,0),(1,0),(1,1): barycentric coordinates
        let lambdas: [fn(Vec2) -> f64; 3] = [|p| 1.0 - p.x, |p| p.x - p.y, |p| p.y];
        let c = s.mesh.geometry(0).centroid();
        for l in lambdas {
            let fe = elementwise_l2_project(l, &s, &rules).unwrap();
            assert_relative_eq!(fe.evaluate(0, &[c])[0], 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn q_basis_partition_of_unity() {
        for p in 0..=2 {
            let s = space(ElementKind::Quadrilateral, Family::Q, p, 3);
            let pts = [Vec2::new(0.4, 0.5), Vec2::new(0.45, 0.38)];
            let bv = s.eval_basis(4, &pts, 1);
            for q in 0..2 {
                assert_relative_eq!(bv.values(q).iter().sum::<f64>(), 1.0, epsilon = 1e-13);
                assert!(bv.deriv(q, 1, 0).iter().sum::<f64>().abs() < 1e-11);
                assert!(bv.deriv(q, 0, 1).iter().sum::<f64>().abs() < 1e-11);
            }
        }
    }

    #[test]
    fn q2_second_derivatives_match_finite_differences() {
        let s = space(ElementKind::Quadrilateral, Family::Q, 2, 3);
        let p = Vec2::new(0.41, 0.52);
        let h = 1e-4;
        let bv = s.eval_basis(4, &[p], 2);
        let f = |x: Vec2| s.eval_basis(4, &[x], 0).values(0).to_vec();
        let ex = Vec2::new(h, 0.0);
        let ey = Vec2::new(0.0, h);
        for i in 0..s.n_local {
            let dxx = (f(p + ex)[i] - 2.0 * f(p)[i] + f(p - ex)[i]) / (h * h);
            let dxy = (f(p + ex + ey)[i] - f(p + ex - ey)[i] - f(p - ex + ey)[i] + f(p - ex - ey)[i]) / (4.0 * h * h);
            let dyy = (f(p + ey)[i] - 2.0 * f(p)[i] + f(p - ey)[i]) / (h * h);
            for (exact, fd) in [
                (bv.deriv(0, 2, 0)[i], dxx),
                (bv.deriv(0, 1, 1)[i], dxy),
                (bv.deriv(0, 0, 2)[i], dyy),
            ] {
                assert!((exact - fd).abs() <= 1e-6 * exact.abs().max(1.0), "{exact} vs {fd}");
            }
        }
    }

    #[test]
    fn derivatives_beyond_degree_vanish() {
        let s = space(ElementKind::TriangleSplit, Family::P, 1, 2);
        let bv = s.eval_basis(2, &[Vec2::new(0.3, 0.1)], 3);
        for d in 3..bv.n_derivs {
            assert!(bv.by_index(0, d).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn normal_derivative_jump_of_x_squared() {
        let s = space(ElementKind::Quadrilateral, Family::Q, 2, 2);
        let rules = ReferenceRules::new(6);
        let fe = elementwise_l2_project(|p| p.x * p.x, &s, &rules).unwrap();
        let face = s.mesh.faces.iter().find(|f| f.normal.x > 0.5).unwrap().clone();
        let zero = vec![0.0; s.n_local];
        let x = face.midpoint();
        let j2 = normal_derivative_jump(&s, &face, face.normal, 2, fe.local(face.plus), &zero, x);
        assert_relative_eq!(j2, 1.0, epsilon = 1e-10);
        let j3 = normal_derivative_jump(&s, &face, face.normal, 3, fe.local(face.plus), &zero, x);
        assert_eq!(j3, 0.0);
        let j0 = normal_derivative_jump(&s, &face, face.normal, 0, fe.local(face.plus), fe.local(face.minus), x);
        assert!(j0.abs() < 1e-12);
    }

    #[test]
    fn projection_of_x_onto_p0_is_centroid() {
        let s = space(ElementKind::TriangleSplit, Family::P, 0, 2);
        let rules = ReferenceRules::new(2);
        let fe = elementwise_l2_project(|p| p.x, &s, &rules).unwrap();
        for a in 0..s.mesh.n_active() {
            let c = s.mesh.geometry(a).centroid();
            assert_relative_eq!(fe.evaluate(a, &[c])[0], c.x, epsilon = 1e-13);
        }
    }

    #[test]
    fn projection_reproduces_polynomials_and_is_idempotent() {
        for (kind, family, p) in [
            (ElementKind::TriangleSplit, Family::P, 3),
            (ElementKind::Quadrilateral, Family::Q, 2),
        ] {
            let s = space(kind, family, p, 3);
            let rules = ReferenceRules::new(2 * p + 2);
            let poly = |x: Vec2| 1.0 + 2.0 * x.x - x.y + 0.5 * x.x * x.y + x.y * x.y;
            let fe = elementwise_l2_project(poly, &s, &rules).unwrap();
            let test = Vec2::new(0.77, 0.21);
            let a = s.mesh.n_active() - 2;
            let got = fe.evaluate(a, &[test])[0];
            assert_relative_eq!(got, poly(test), max_relative = 1e-12);
            let again = elementwise_l2_project_local(&s, &rules, |e, x| fe.evaluate(e, &[x])[0]).unwrap();
            for (u, v) in again.coeffs.iter().zip(&fe.coeffs) {
                assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }
    }
}
