//! Quadrature on cut elements, cut faces and the embedded interface.
//!
//! Cut elements are subdivided into a lattice of sub-triangles; on each one the
//! level set is replaced by its linear interpolant, the negative part is clipped
//! out and fan-triangulated, and the zero chord carries the interface rule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{LevelSet, ReferenceRules};
use crate::mesh::{ActiveMesh, ElementClass, ElementGeometry, Face};
use crate::Vec2;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("element lies outside the domain and has no volume rule")]
    OutsideElement,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadPoint {
    pub x: Vec2,
    pub w: f64,
}

/// Boundary quadrature point with the outward unit normal of the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub x: Vec2,
    pub w: f64,
    pub n: Vec2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowSide {
    Inflow,
    Outflow,
    Characteristic,
}

/// Pointwise classification of a boundary point by the sign of `b . n`.
pub fn boundary_orientation(normal: Vec2, b: Vec2) -> FlowSide {
    let bn = b.dot(&normal);
    if bn < 0.0 {
        FlowSide::Inflow
    } else if bn > 0.0 {
        FlowSide::Outflow
    } else {
        FlowSide::Characteristic
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Polynomial degree integrated exactly by the base rules.
    pub order: usize,
    /// Subdivision depth for cut elements and faces.
    pub depth: u32,
    /// Lattice depth used by the element classifier.
    pub classify_depth: u32,
}

impl QuadratureConfig {
    /// Defaults for polynomial degree `p`.
    pub fn for_degree(p: usize) -> Self {
        QuadratureConfig {
            order: 2 * p + 2,
            depth: if p <= 1 { 2 } else { 4 },
            classify_depth: 3,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CutElement {
    pub volume: Vec<QuadPoint>,
    pub interface: Vec<BoundaryPoint>,
}

/// Standard rule on the whole element.
pub fn full_element_rule(geom: &ElementGeometry, rules: &ReferenceRules) -> Vec<QuadPoint> {
    let jac = geom.jacobian().abs();
    let reference = if geom.is_triangle() {
        &rules.triangle
    } else {
        &rules.square
    };
    reference
        .iter()
        .map(|(p, w)| QuadPoint {
            x: geom.map(p[0], p[1]),
            w: w * jac,
        })
        .collect()
}

/// Gauss rule on the whole segment.
pub fn full_segment_rule(p0: Vec2, p1: Vec2, rules: &ReferenceRules) -> Vec<QuadPoint> {
    let mut out = Vec::with_capacity(rules.line.len());
    segment_rule(p0, p1, 0.0, 1.0, rules, &mut out);
    out
}

fn segment_rule(p0: Vec2, p1: Vec2, t0: f64, t1: f64, rules: &ReferenceRules, out: &mut Vec<QuadPoint>) {
    let len = (p1 - p0).norm() * (t1 - t0);
    for &(s, w) in &rules.line {
        let t = t0 + (t1 - t0) * s;
        out.push(QuadPoint {
            x: p0 + (p1 - p0) * t,
            w: w * len,
        });
    }
}

fn push_triangle(tri: [Vec2; 3], rules: &ReferenceRules, out: &mut Vec<QuadPoint>) {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let jac = (e1.x * e2.y - e1.y * e2.x).abs();
    if jac == 0.0 {
        return;
    }
    for (p, w) in &rules.triangle {
        out.push(QuadPoint {
            x: tri[0] + e1 * p[0] + e2 * p[1],
            w: w * jac,
        });
    }
}

fn clip_triangle(
    p: [Vec2; 3],
    phi: [f64; 3],
    ls: &LevelSet,
    rules: &ReferenceRules,
    out: &mut CutElement,
) {
    let inside = [phi[0] < 0.0, phi[1] < 0.0, phi[2] < 0.0];
    let n_in = inside.iter().filter(|&&b| b).count();
    if n_in == 3 {
        push_triangle(p, rules, &mut out.volume);
        return;
    }
    if n_in == 0 {
        return;
    }
    let mut poly: [Vec2; 4] = [Vec2::zeros(); 4];
    let mut n_poly = 0;
    let mut crossings = [Vec2::zeros(); 2];
    let mut n_cross = 0;
    for k in 0..3 {
        let l = (k + 1) % 3;
        if inside[k] {
            poly[n_poly] = p[k];
            n_poly += 1;
        }
        if inside[k] != inside[l] {
            let t = phi[k] / (phi[k] - phi[l]);
            let c = p[k] + (p[l] - p[k]) * t;
            poly[n_poly] = c;
            n_poly += 1;
            crossings[n_cross] = c;
            n_cross += 1;
        }
    }
    for k in 1..n_poly - 1 {
        push_triangle([poly[0], poly[k], poly[k + 1]], rules, &mut out.volume);
    }
    let (c0, c1) = (crossings[0], crossings[1]);
    let chord = c1 - c0;
    let len = chord.norm();
    if len == 0.0 {
        return;
    }
    let mut chord_normal = Vec2::new(chord.y, -chord.x) / len;
    let outside_vertex = (0..3).find(|&k| !inside[k]).unwrap();
    if chord_normal.dot(&(p[outside_vertex] - c0)) < 0.0 {
        chord_normal = -chord_normal;
    }
    for &(s, w) in &rules.line {
        let x = c0 + chord * s;
        let g = ls.gradient(x);
        let gn = g.norm();
        let n = if gn > 1e-12 { g / gn } else { chord_normal };
        out.interface.push(BoundaryPoint { x, w: w * len, n });
    }
}

/// Volume and interface rules of an element cut by `ls`, from a subdivision
/// with `2^depth` intervals per reference direction.
pub fn cut_element(geom: &ElementGeometry, ls: &LevelSet, rules: &ReferenceRules, depth: u32) -> CutElement {
    let m = 1usize << depth;
    let mf = m as f64;
    let stride = m + 1;
    let mut pts = vec![Vec2::zeros(); stride * stride];
    let mut phi = vec![0.0; stride * stride];
    let tri = geom.is_triangle();
    for j in 0..=m {
        let imax = if tri { m - j } else { m };
        for i in 0..=imax {
            let x = geom.map(i as f64 / mf, j as f64 / mf);
            pts[j * stride + i] = x;
            phi[j * stride + i] = ls.value(x);
        }
    }
    let id = |i: usize, j: usize| j * stride + i;
    let mut out = CutElement::default();
    let emit = |a: usize, b: usize, c: usize, out: &mut CutElement| {
        clip_triangle([pts[a], pts[b], pts[c]], [phi[a], phi[b], phi[c]], ls, rules, out);
    };
    if tri {
        for j in 0..m {
            for i in 0..m - j {
                emit(id(i, j), id(i + 1, j), id(i, j + 1), &mut out);
                if i + j + 1 < m {
                    emit(id(i + 1, j), id(i + 1, j + 1), id(i, j + 1), &mut out);
                }
            }
        }
    } else {
        for j in 0..m {
            for i in 0..m {
                emit(id(i, j), id(i + 1, j), id(i + 1, j + 1), &mut out);
                emit(id(i, j), id(i + 1, j + 1), id(i, j + 1), &mut out);
            }
        }
    }
    out
}

/// Rule on `T ∩ Ω`.
pub fn volume_rule(
    geom: &ElementGeometry,
    class: ElementClass,
    ls: &LevelSet,
    rules: &ReferenceRules,
    depth: u32,
) -> Result<Vec<QuadPoint>, GeometryError> {
    match class {
        ElementClass::Inside => Ok(full_element_rule(geom, rules)),
        ElementClass::Cut => Ok(cut_element(geom, ls, rules, depth).volume),
        ElementClass::Outside => Err(GeometryError::OutsideElement),
    }
}

/// Rule on `Γ ∩ T` with normals from the level-set gradient.
pub fn interface_rule(geom: &ElementGeometry, ls: &LevelSet, rules: &ReferenceRules, depth: u32) -> Vec<BoundaryPoint> {
    cut_element(geom, ls, rules, depth).interface
}

/// Rule on the part of the segment `p0 p1` where `φ < 0`. Roots are bracketed
/// on a lattice of `2^(depth+2)` intervals and bisected to `1e-13 h`.
pub fn face_rule(p0: Vec2, p1: Vec2, ls: &LevelSet, rules: &ReferenceRules, depth: u32, h: f64) -> Vec<QuadPoint> {
    let m = 1usize << (depth + 2);
    let len = (p1 - p0).norm();
    let at = |t: f64| ls.value(p0 + (p1 - p0) * t);
    let vals: Vec<f64> = (0..=m).map(|k| at(k as f64 / m as f64)).collect();
    if vals.iter().all(|&v| v < 0.0) {
        let mut out = Vec::new();
        segment_rule(p0, p1, 0.0, 1.0, rules, &mut out);
        return out;
    }
    let mut breaks = vec![0.0];
    for k in 0..m {
        let (a, b) = (vals[k] < 0.0, vals[k + 1] < 0.0);
        if a != b {
            let mut lo = k as f64 / m as f64;
            let mut hi = (k + 1) as f64 / m as f64;
            for _ in 0..200 {
                if (hi - lo) * len <= 1e-13 * h {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if (at(mid) < 0.0) == a {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            breaks.push(0.5 * (lo + hi));
        }
    }
    breaks.push(1.0);
    let mut out = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] && at(0.5 * (w[0] + w[1])) < 0.0 {
            segment_rule(p0, p1, w[0], w[1], rules, &mut out);
        }
    }
    out
}

#[derive(Clone, Debug, Default)]
pub struct ElementQuadrature {
    pub volume: Vec<QuadPoint>,
    pub interface: Vec<BoundaryPoint>,
    /// Points on edges of the element lying on the mesh bounding box.
    pub box_boundary: Vec<BoundaryPoint>,
}

/// All cut rules of an active mesh.
#[derive(Clone, Debug)]
pub struct QuadratureSet {
    pub config: QuadratureConfig,
    pub rules: ReferenceRules,
    pub elements: Vec<ElementQuadrature>,
    /// Clipped rule per interior face.
    pub faces: Vec<Vec<QuadPoint>>,
}

impl QuadratureSet {
    pub fn build(active: &ActiveMesh, ls: &LevelSet, config: QuadratureConfig) -> Self {
        let rules = ReferenceRules::new(config.order);
        let h = active.h();
        let mut elements: Vec<ElementQuadrature> = (0..active.n_active())
            .into_par_iter()
            .map(|a| {
                let geom = active.geometry(a);
                match active.classes[a] {
                    ElementClass::Cut => {
                        let c = cut_element(&geom, ls, &rules, config.depth);
                        ElementQuadrature {
                            volume: c.volume,
                            interface: c.interface,
                            box_boundary: Vec::new(),
                        }
                    }
                    _ => ElementQuadrature {
                        volume: full_element_rule(&geom, &rules),
                        ..Default::default()
                    },
                }
            })
            .collect();
        for e in &active.boundary_edges {
            let pts = face_rule(e.p0, e.p1, ls, &rules, config.depth, h);
            elements[e.element]
                .box_boundary
                .extend(pts.into_iter().map(|q| BoundaryPoint {
                    x: q.x,
                    w: q.w,
                    n: e.normal,
                }));
        }
        let faces = active
            .faces
            .par_iter()
            .map(|f| {
                let both_inside = active.classes[f.plus] == ElementClass::Inside
                    && active.classes[f.minus] == ElementClass::Inside;
                if both_inside {
                    full_segment_rule(f.p0, f.p1, &rules)
                } else {
                    face_rule(f.p0, f.p1, ls, &rules, config.depth, h)
                }
            })
            .collect();
        QuadratureSet {
            config,
            rules,
            elements,
            faces,
        }
    }

    /// Interface and box-boundary points of element `a`.
    pub fn boundary(&self, a: usize) -> impl Iterator<Item = &BoundaryPoint> {
        let e = &self.elements[a];
        e.interface.iter().chain(e.box_boundary.iter())
    }

    pub fn full_element(&self, geom: &ElementGeometry) -> Vec<QuadPoint> {
        full_element_rule(geom, &self.rules)
    }

    pub fn full_face(&self, face: &Face) -> Vec<QuadPoint> {
        full_segment_rule(face.p0, face.p1, &self.rules)
    }

    pub fn volume_measure(&self) -> f64 {
        self.elements.iter().flat_map(|e| e.volume.iter()).map(|q| q.w).sum()
    }

    pub fn interface_measure(&self) -> f64 {
        self.elements.iter().flat_map(|e| e.interface.iter()).map(|q| q.w).sum()
    }
}
