use rayon::prelude::*;

use super::coefficients::{Coefficients, DerivedScalars};
use super::ghost::{face_jump_blocks, JumpScales, StabilizationConfig};
use super::sparse::{CsrMatrix, TripletBuilder};
use crate::geometry::QuadratureSet;
use crate::space::BrokenSpace;
use crate::Vec2;

/// Switches for the individual terms of the transport form, used to isolate
/// terms in tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FormTerms {
    pub advection: bool,
    pub reaction: bool,
    pub inflow: bool,
    pub face_central: bool,
    pub face_upwind: bool,
}

impl FormTerms {
    pub const ALL: FormTerms = FormTerms {
        advection: true,
        reaction: true,
        inflow: true,
        face_central: true,
        face_upwind: true,
    };

    pub const REACTION_ONLY: FormTerms = FormTerms {
        advection: false,
        reaction: true,
        inflow: false,
        face_central: false,
        face_upwind: false,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Variant {
    Primal,
    Dual,
    Symmetric,
}

/// A dense `n x n` block coupling test element `row` with trial element `col`.
pub(crate) struct LocalBlock {
    pub row: usize,
    pub col: usize,
    pub data: Vec<f64>,
}

pub(crate) fn collect_blocks(space: &BrokenSpace, blocks: impl IntoIterator<Item = LocalBlock>) -> CsrMatrix {
    let n = space.n_local;
    let nd = space.n_dofs();
    let mut b = TripletBuilder::new(nd, nd);
    for blk in blocks {
        b.add_block(blk.row * n, blk.col * n, n, n, &blk.data);
    }
    b.build()
}

fn element_blocks(space: &BrokenSpace, coeffs: &Coefficients, quad: &QuadratureSet, variant: Variant, terms: FormTerms) -> Vec<LocalBlock> {
    let n = space.n_local;
    (0..space.mesh.n_active())
        .into_par_iter()
        .map(|a| {
            let mut m = vec![0.0; n * n];
            let eq = &quad.elements[a];
            let xs: Vec<Vec2> = eq.volume.iter().map(|q| q.x).collect();
            let bv = space.eval_basis(a, &xs, 1);
            for (q, qp) in eq.volume.iter().enumerate() {
                let b = coeffs.b(qp.x);
                let c = coeffs.c(qp.x);
                let div = coeffs.divergence(qp.x);
                let v = bv.values(q);
                let dx = bv.deriv(q, 1, 0);
                let dy = bv.deriv(q, 0, 1);
                for i in 0..n {
                    let bgrad_i = b.x * dx[i] + b.y * dy[i];
                    for j in 0..n {
                        let bgrad_j = b.x * dx[j] + b.y * dy[j];
                        let mut s = 0.0;
                        match variant {
                            Variant::Primal => {
                                if terms.advection {
                                    s += bgrad_j * v[i];
                                }
                                if terms.reaction {
                                    s += c * v[j] * v[i];
                                }
                            }
                            Variant::Dual => {
                                if terms.advection {
                                    s -= v[j] * bgrad_i + div * v[j] * v[i];
                                }
                                if terms.reaction {
                                    s += c * v[j] * v[i];
                                }
                            }
                            Variant::Symmetric => {
                                if terms.advection {
                                    s -= 0.5 * div * v[j] * v[i];
                                }
                                if terms.reaction {
                                    s += c * v[j] * v[i];
                                }
                            }
                        }
                        m[i * n + j] += qp.w * s;
                    }
                }
            }
            if terms.inflow {
                let bpts: Vec<_> = quad.boundary(a).copied().collect();
                let xs: Vec<Vec2> = bpts.iter().map(|q| q.x).collect();
                let bv = space.eval_basis(a, &xs, 0);
                for (q, bp) in bpts.iter().enumerate() {
                    let bn = coeffs.b(bp.x).dot(&bp.n);
                    let factor = match variant {
                        Variant::Primal if bn < 0.0 => -bn,
                        Variant::Dual if bn > 0.0 => bn,
                        Variant::Symmetric => 0.5 * bn.abs(),
                        _ => continue,
                    };
                    let v = bv.values(q);
                    for i in 0..n {
                        for j in 0..n {
                            m[i * n + j] += bp.w * factor * v[j] * v[i];
                        }
                    }
                }
            }
            LocalBlock { row: a, col: a, data: m }
        })
        .collect()
}

fn face_blocks(space: &BrokenSpace, coeffs: &Coefficients, quad: &QuadratureSet, variant: Variant, terms: FormTerms) -> Vec<LocalBlock> {
    let n = space.n_local;
    let faces = &space.mesh.faces;
    let per_face: Vec<[LocalBlock; 4]> = (0..faces.len())
        .into_par_iter()
        .map(|f| {
            let face = &faces[f];
            let pts = &quad.faces[f];
            // [side_test][side_trial]
            let mut blk = [[vec![0.0; n * n], vec![0.0; n * n]], [vec![0.0; n * n], vec![0.0; n * n]]];
            if !pts.is_empty() {
                let xs: Vec<Vec2> = pts.iter().map(|q| q.x).collect();
                let bvs = [space.eval_basis(face.plus, &xs, 0), space.eval_basis(face.minus, &xs, 0)];
                let sigma = [1.0, -1.0];
                for (q, qp) in pts.iter().enumerate() {
                    let bn = coeffs.b(qp.x).dot(&face.normal);
                    for ti in 0..2 {
                        let vi = bvs[ti].values(q);
                        for tj in 0..2 {
                            let vj = bvs[tj].values(q);
                            let (si, sj) = (sigma[ti], sigma[tj]);
                            let mut central = 0.0;
                            if terms.face_central {
                                central = match variant {
                                    // -(b.n [v], {w})
                                    Variant::Primal => -bn * sj * 0.5,
                                    // +(b.n {v}, [w])
                                    Variant::Dual => bn * 0.5 * si,
                                    Variant::Symmetric => 0.0,
                                };
                            }
                            let upwind = if terms.face_upwind { 0.5 * bn.abs() * si * sj } else { 0.0 };
                            let k = qp.w * (central + upwind);
                            if k == 0.0 {
                                continue;
                            }
                            let out = &mut blk[ti][tj];
                            for i in 0..n {
                                for j in 0..n {
                                    out[i * n + j] += k * vj[j] * vi[i];
                                }
                            }
                        }
                    }
                }
            }
            let [[pp, pm], [mp, mm]] = blk;
            [
                LocalBlock { row: face.plus, col: face.plus, data: pp },
                LocalBlock { row: face.plus, col: face.minus, data: pm },
                LocalBlock { row: face.minus, col: face.plus, data: mp },
                LocalBlock { row: face.minus, col: face.minus, data: mm },
            ]
        })
        .collect();
    per_face.into_iter().flatten().collect()
}

fn assemble_variant(space: &BrokenSpace, coeffs: &Coefficients, quad: &QuadratureSet, variant: Variant, terms: FormTerms) -> CsrMatrix {
    let mut blocks = element_blocks(space, coeffs, quad, variant, terms);
    if terms.face_central || terms.face_upwind {
        blocks.extend(face_blocks(space, coeffs, quad, variant, terms));
    }
    collect_blocks(space, blocks)
}

/// The upwind transport operator: element advection and reaction, weak inflow
/// condition, central and upwind face fluxes. Row `i`, column `j` holds
/// `a_h(φ_j, φ_i)`.
pub fn assemble_advection_reaction(space: &BrokenSpace, coeffs: &Coefficients, quad: &QuadratureSet) -> CsrMatrix {
    assemble_variant(space, coeffs, quad, Variant::Primal, FormTerms::ALL)
}

/// [`assemble_advection_reaction`] with selected terms only.
pub fn assemble_advection_reaction_terms(space: &BrokenSpace, coeffs: &Coefficients, quad: &QuadratureSet, terms: FormTerms) -> CsrMatrix {
    assemble_variant(space, coeffs, quad, Variant::Primal, terms)
}

/// The same bilinear form after elementwise integration by parts.
pub fn assemble_dual_form(space: &BrokenSpace, coeffs: &Coefficients, quad: &QuadratureSet) -> CsrMatrix {
    assemble_variant(space, coeffs, quad, Variant::Dual, FormTerms::ALL)
}

/// The symmetric part of the transport form, assembled directly.
pub fn assemble_symmetric_part(space: &BrokenSpace, coeffs: &Coefficients, quad: &QuadratureSet) -> CsrMatrix {
    assemble_variant(space, coeffs, quad, Variant::Symmetric, FormTerms::ALL)
}

/// Load vector for arbitrary source and inflow data.
pub fn assemble_load_with(
    space: &BrokenSpace,
    velocity: &(dyn Fn(Vec2) -> Vec2 + Sync),
    quad: &QuadratureSet,
    f: &(dyn Fn(Vec2) -> f64 + Sync),
    g: &(dyn Fn(Vec2) -> f64 + Sync),
) -> Vec<f64> {
    let n = space.n_local;
    let locals: Vec<Vec<f64>> = (0..space.mesh.n_active())
        .into_par_iter()
        .map(|a| {
            let mut l = vec![0.0; n];
            let eq = &quad.elements[a];
            let xs: Vec<Vec2> = eq.volume.iter().map(|q| q.x).collect();
            let bv = space.eval_basis(a, &xs, 0);
            for (q, qp) in eq.volume.iter().enumerate() {
                let fv = f(qp.x) * qp.w;
                for (li, vi) in l.iter_mut().zip(bv.values(q)) {
                    *li += fv * vi;
                }
            }
            let bpts: Vec<_> = quad.boundary(a).copied().collect();
            let xs: Vec<Vec2> = bpts.iter().map(|q| q.x).collect();
            let bv = space.eval_basis(a, &xs, 0);
            for (q, bp) in bpts.iter().enumerate() {
                let bn = velocity(bp.x).dot(&bp.n);
                if bn < 0.0 {
                    let gv = bp.w * bn * g(bp.x);
                    for (li, vi) in l.iter_mut().zip(bv.values(q)) {
                        *li -= gv * vi;
                    }
                }
            }
            l
        })
        .collect();
    locals.concat()
}

/// `(f(t), w)_Ω - (b·n g(t), w)_{Γ⁻}`.
pub fn assemble_load(space: &BrokenSpace, coeffs: &Coefficients, quad: &QuadratureSet, t: f64) -> Vec<f64> {
    let f = |x: Vec2| (coeffs.source)(x, t);
    let g = |x: Vec2| (coeffs.inflow)(x, t);
    assemble_load_with(space, &|x| coeffs.b(x), quad, &f, &g)
}

/// Unstabilized mass matrix on the cut domain.
pub fn assemble_cut_mass(space: &BrokenSpace, quad: &QuadratureSet) -> CsrMatrix {
    let n = space.n_local;
    let blocks: Vec<LocalBlock> = (0..space.mesh.n_active())
        .into_par_iter()
        .map(|a| {
            let eq = &quad.elements[a];
            let xs: Vec<Vec2> = eq.volume.iter().map(|q| q.x).collect();
            let bv = space.eval_basis(a, &xs, 0);
            let mut m = vec![0.0; n * n];
            for (q, qp) in eq.volume.iter().enumerate() {
                let v = bv.values(q);
                for i in 0..n {
                    for j in 0..n {
                        m[i * n + j] += qp.w * v[i] * v[j];
                    }
                }
            }
            LocalBlock { row: a, col: a, data: m }
        })
        .collect();
    collect_blocks(space, blocks)
}

/// Stabilized mass: cut mass plus the face ghost penalty on all derivative
/// jumps, `γ_m Σ_j h^(2j+1) ([∂_n^j v], [∂_n^j w])`.
pub fn assemble_mass(space: &BrokenSpace, quad: &QuadratureSet, scalars: &DerivedScalars, config: &StabilizationConfig) -> CsrMatrix {
    let cut = assemble_cut_mass(space, quad);
    let gamma = config.gamma_mass * config.mass_scaling.factor(scalars);
    if gamma == 0.0 {
        return cut;
    }
    let h = space.mesh.h();
    let scales = JumpScales {
        value: Box::new(move |j| gamma * h.powi(2 * j as i32 + 1)),
        streamline: None,
    };
    let g = collect_blocks(space, face_jump_blocks(space, quad, &scales, config.max_jump_order));
    cut.add_scaled(&g, 1.0)
}
