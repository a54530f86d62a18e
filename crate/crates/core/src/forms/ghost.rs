use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assembly::{collect_blocks, LocalBlock};
use super::coefficients::{Coefficients, DerivedScalars};
use super::sparse::CsrMatrix;
use super::FormsError;
use crate::geometry::full_element_rule;
use crate::geometry::QuadratureSet;
use crate::space::{derivative_index, normal_derivative_weights, BrokenSpace};
use crate::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GhostRealization {
    /// Reaction- and streamline-type face penalties with separate weights.
    FaceSplit,
    /// A single face penalty weighted by `c0 + b_c / h`.
    FaceUnified,
    /// Patch-jump penalties on the two-element patches of ghost faces.
    VolumeSplit,
    /// Patch-jump penalty weighted by `c0 + b_c / h`.
    VolumeUnified,
    None,
}

/// How the mass ghost penalty is scaled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MassScaling {
    /// `γ_m Σ_j h^(2j+1) (...)`.
    Plain,
    /// Additionally multiplied by `τ_c c0`.
    FromReaction,
}

impl MassScaling {
    pub fn factor(self, s: &DerivedScalars) -> f64 {
        match self {
            MassScaling::Plain => 1.0,
            MassScaling::FromReaction => s.tau_c * s.c0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilizationConfig {
    pub realization: GhostRealization,
    /// Weight of the reaction-type split penalty.
    pub gamma_c: f64,
    /// Weight of the streamline-type split penalty.
    pub gamma_b: f64,
    /// Weight of the unified penalties.
    pub gamma: f64,
    pub gamma_mass: f64,
    pub mass_scaling: MassScaling,
    /// Highest derivative jump penalized; clamped to the polynomial degree.
    pub max_jump_order: Option<usize>,
}

impl Default for StabilizationConfig {
    fn default() -> Self {
        StabilizationConfig {
            realization: GhostRealization::FaceSplit,
            gamma_c: 0.01,
            gamma_b: 0.01,
            gamma: 0.01,
            gamma_mass: 0.03,
            mass_scaling: MassScaling::Plain,
            max_jump_order: None,
        }
    }
}

impl StabilizationConfig {
    pub fn face_split(gamma_c: f64, gamma_b: f64) -> Self {
        StabilizationConfig {
            realization: GhostRealization::FaceSplit,
            gamma_c,
            gamma_b,
            ..Default::default()
        }
    }

    pub fn face_unified(gamma: f64) -> Self {
        StabilizationConfig {
            realization: GhostRealization::FaceUnified,
            gamma,
            ..Default::default()
        }
    }

    pub fn volume_split(gamma_c: f64, gamma_b: f64) -> Self {
        StabilizationConfig {
            realization: GhostRealization::VolumeSplit,
            gamma_c,
            gamma_b,
            ..Default::default()
        }
    }

    pub fn volume_unified(gamma: f64) -> Self {
        StabilizationConfig {
            realization: GhostRealization::VolumeUnified,
            gamma,
            ..Default::default()
        }
    }

    /// No ghost penalty on the operator nor on the mass.
    pub fn none() -> Self {
        StabilizationConfig {
            realization: GhostRealization::None,
            gamma_c: 0.0,
            gamma_b: 0.0,
            gamma: 0.0,
            gamma_mass: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), FormsError> {
        for (name, v) in [
            ("gamma_c", self.gamma_c),
            ("gamma_b", self.gamma_b),
            ("gamma", self.gamma),
            ("gamma_mass", self.gamma_mass),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(FormsError::InvalidParameter { name, value: v });
            }
        }
        Ok(())
    }
}

/// Per-order weights of the value jump and of the streamline-derivative jump.
pub(crate) struct JumpScales {
    pub value: Box<dyn Fn(usize) -> f64 + Sync>,
    pub streamline: Option<(Box<dyn Fn(usize) -> f64 + Sync>, Box<dyn Fn(Vec2) -> Vec2 + Sync>)>,
}

/// Face penalties on `[∂_n^j v]` (and `[b_P·∇∂_n^j v]`) over full ghost faces.
pub(crate) fn face_jump_blocks(space: &BrokenSpace, quad: &QuadratureSet, scales: &JumpScales, max_order: Option<usize>) -> Vec<LocalBlock> {
    let n = space.n_local;
    let p = space.degree;
    let jmax = max_order.unwrap_or(p).min(p);
    let mesh = &space.mesh;
    let per_face: Vec<[LocalBlock; 4]> = mesh
        .ghost_faces
        .par_iter()
        .map(|&f| {
            let face = &mesh.faces[f];
            let pts = quad.full_face(face);
            let xs: Vec<Vec2> = pts.iter().map(|q| q.x).collect();
            let order = if scales.streamline.is_some() { jmax + 1 } else { jmax };
            let bvs = [space.eval_basis(face.plus, &xs, order), space.eval_basis(face.minus, &xs, order)];
            let b_face = scales.streamline.as_ref().map(|(_, b)| b(face.midpoint()));
            let mut blk = vec![0.0; 4 * n * n];
            let mut jv = vec![0.0; 2 * n];
            let mut jb = vec![0.0; 2 * n];
            for j in 0..=jmax {
                let weights = normal_derivative_weights(j, face.normal);
                let sv = (scales.value)(j);
                let sb = scales.streamline.as_ref().map(|(s, _)| s(j)).unwrap_or(0.0);
                for (q, qp) in pts.iter().enumerate() {
                    for (side, sign) in [(0usize, 1.0), (1usize, -1.0)] {
                        for i in 0..n {
                            let mut v = 0.0;
                            let mut vb = 0.0;
                            for &(d, w) in &weights {
                                v += w * bvs[side].by_index(q, d)[i];
                            }
                            if let Some(b) = b_face {
                                for a in 0..=j {
                                    let w = weights[a].1;
                                    let ix = derivative_index(a + 1, j - a);
                                    let iy = derivative_index(a, j - a + 1);
                                    vb += w * (b.x * bvs[side].by_index(q, ix)[i] + b.y * bvs[side].by_index(q, iy)[i]);
                                }
                            }
                            jv[side * n + i] = sign * v;
                            jb[side * n + i] = sign * vb;
                        }
                    }
                    let kv = qp.w * sv;
                    let kb = qp.w * sb;
                    for r in 0..2 * n {
                        for c in 0..2 * n {
                            blk[r * 2 * n + c] += kv * jv[r] * jv[c] + kb * jb[r] * jb[c];
                        }
                    }
                }
            }
            split_patch_block(&blk, n, face.plus, face.minus)
        })
        .collect();
    per_face.into_iter().flatten().collect()
}

fn split_patch_block(blk: &[f64], n: usize, plus: usize, minus: usize) -> [LocalBlock; 4] {
    let sub = |r0: usize, c0: usize| {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = blk[(r0 + i) * 2 * n + c0 + j];
            }
        }
        out
    };
    [
        LocalBlock { row: plus, col: plus, data: sub(0, 0) },
        LocalBlock { row: plus, col: minus, data: sub(0, n) },
        LocalBlock { row: minus, col: plus, data: sub(n, 0) },
        LocalBlock { row: minus, col: minus, data: sub(n, n) },
    ]
}

/// Patch penalties `([v]_P, [w]_P)_P` and `([b_P·∇v]_P, [b_P·∇w]_P)_P` on the
/// patches of ghost faces, integrating both polynomial extensions over the
/// whole patch.
fn volume_jump_blocks(space: &BrokenSpace, quad: &QuadratureSet, value_scale: f64, streamline: Option<(f64, &(dyn Fn(Vec2) -> Vec2 + Sync))>) -> Vec<LocalBlock> {
    let n = space.n_local;
    let mesh = &space.mesh;
    let per_face: Vec<[LocalBlock; 4]> = mesh
        .ghost_faces
        .par_iter()
        .map(|&f| {
            let face = &mesh.faces[f];
            let gp = mesh.geometry(face.plus);
            let gm = mesh.geometry(face.minus);
            let mut pts = full_element_rule(&gp, &quad.rules);
            pts.extend(full_element_rule(&gm, &quad.rules));
            let xs: Vec<Vec2> = pts.iter().map(|q| q.x).collect();
            let bvs = [space.eval_basis(face.plus, &xs, 1), space.eval_basis(face.minus, &xs, 1)];
            let centroid = (gp.centroid() * gp.area() + gm.centroid() * gm.area()) / (gp.area() + gm.area());
            let bp = streamline.map(|(s, b)| (s, b(centroid)));
            let mut blk = vec![0.0; 4 * n * n];
            let mut jv = vec![0.0; 2 * n];
            let mut jb = vec![0.0; 2 * n];
            for (q, qp) in pts.iter().enumerate() {
                for (side, sign) in [(0usize, 1.0), (1usize, -1.0)] {
                    for i in 0..n {
                        jv[side * n + i] = sign * bvs[side].values(q)[i];
                        if let Some((_, b)) = bp {
                            jb[side * n + i] = sign * b.dot(&bvs[side].gradient(q, i));
                        }
                    }
                }
                let kv = qp.w * value_scale;
                let kb = qp.w * bp.map(|(s, _)| s).unwrap_or(0.0);
                for r in 0..2 * n {
                    for c in 0..2 * n {
                        blk[r * 2 * n + c] += kv * jv[r] * jv[c] + kb * jb[r] * jb[c];
                    }
                }
            }
            split_patch_block(&blk, n, face.plus, face.minus)
        })
        .collect();
    per_face.into_iter().flatten().collect()
}

/// Face-based ghost penalty (split or unified, per `config.realization`).
pub fn assemble_ghost_face(space: &BrokenSpace, coeffs: &Coefficients, quad: &QuadratureSet, scalars: &DerivedScalars, config: &StabilizationConfig) -> CsrMatrix {
    let h = scalars.h;
    let s = *scalars;
    let scales = match config.realization {
        GhostRealization::FaceUnified | GhostRealization::VolumeUnified => {
            let g = config.gamma * (s.c0 + s.b_c / h);
            JumpScales {
                value: Box::new(move |j| g * h.powi(2 * j as i32 + 1)),
                streamline: None,
            }
        }
        _ => {
            let (gc, gb) = (config.gamma_c * s.c0, config.gamma_b * s.phi_b);
            let velocity = coeffs.velocity.clone();
            JumpScales {
                value: Box::new(move |j| gc * h.powi(2 * j as i32 + 1)),
                streamline: (gb != 0.0).then(|| {
                    (
                        Box::new(move |j: usize| gb * h.powi(2 * j as i32 + 1)) as Box<dyn Fn(usize) -> f64 + Sync>,
                        Box::new(move |x| velocity(x)) as Box<dyn Fn(Vec2) -> Vec2 + Sync>,
                    )
                }),
            }
        }
    };
    collect_blocks(space, face_jump_blocks(space, quad, &scales, config.max_jump_order))
}

/// Volume-based ghost penalty on two-element patches.
pub fn assemble_ghost_volume(space: &BrokenSpace, coeffs: &Coefficients, quad: &QuadratureSet, scalars: &DerivedScalars, config: &StabilizationConfig) -> CsrMatrix {
    let s = scalars;
    let velocity = |x: Vec2| coeffs.b(x);
    let blocks = match config.realization {
        GhostRealization::FaceUnified | GhostRealization::VolumeUnified => {
            volume_jump_blocks(space, quad, config.gamma * (s.c0 + s.b_c / s.h), None)
        }
        _ => {
            let gb = config.gamma_b * s.phi_b;
            volume_jump_blocks(space, quad, config.gamma_c * s.c0, (gb != 0.0).then_some((gb, &velocity as &(dyn Fn(Vec2) -> Vec2 + Sync))))
        }
    };
    collect_blocks(space, blocks)
}

/// Ghost penalty of the configured realization; zero for `None`.
pub fn assemble_ghost(space: &BrokenSpace, coeffs: &Coefficients, quad: &QuadratureSet, scalars: &DerivedScalars, config: &StabilizationConfig) -> CsrMatrix {
    match config.realization {
        GhostRealization::None => CsrMatrix::zeros(space.n_dofs(), space.n_dofs()),
        GhostRealization::FaceSplit | GhostRealization::FaceUnified => assemble_ghost_face(space, coeffs, quad, scalars, config),
        GhostRealization::VolumeSplit | GhostRealization::VolumeUnified => assemble_ghost_volume(space, coeffs, quad, scalars, config),
    }
}

/// `sqrt(vᵀ G v)`; fails if the quadratic form is significantly negative.
pub fn ghost_seminorm(g: &CsrMatrix, v: &[f64]) -> Result<f64, FormsError> {
    let q = g.quadratic_form(v);
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let bound = 1e-10 * g.norm_inf() * vv;
    if q < -bound {
        return Err(FormsError::NotPositiveSemidefinite { value: q });
    }
    Ok(q.max(0.0).sqrt())
}
