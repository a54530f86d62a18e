//! Discrete forms: upwind transport operator, ghost penalties, mass and load.

mod assembly;
mod coefficients;
mod ghost;
pub mod sparse;

use thiserror::Error;

pub use assembly::{
    assemble_advection_reaction, assemble_advection_reaction_terms, assemble_cut_mass, assemble_dual_form, assemble_load,
    assemble_load_with, assemble_mass, assemble_symmetric_part, FormTerms,
};
pub use coefficients::{
    derived_scalars, Coefficients, DerivedScalars, JacobianField, ScalarField, SpaceTimeField, VectorField,
};
pub use ghost::{
    assemble_ghost, assemble_ghost_face, assemble_ghost_volume, ghost_seminorm, GhostRealization, MassScaling,
    StabilizationConfig,
};
pub use sparse::{CsrMatrix, TripletBuilder};

use crate::geometry::QuadratureSet;
use crate::space::BrokenSpace;

#[derive(Debug, Error, PartialEq)]
pub enum FormsError {
    #[error("reaction is not coercive: min(c - div b / 2) = {c0:.3e} <= 0")]
    NonCoercive { c0: f64 },
    #[error("velocity vanishes on the domain; the streamline scale h / b_c is undefined")]
    AdvectionInactive,
    #[error("stabilization parameter {name} = {value} must be finite and non-negative")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("quadratic form is negative ({value:.3e}); matrix is not positive semidefinite")]
    NotPositiveSemidefinite { value: f64 },
}

/// Everything needed for a stationary solve or a time-dependent run.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    /// Transport operator plus ghost penalty.
    pub a: CsrMatrix,
    /// Stabilized mass.
    pub mass: CsrMatrix,
    pub load: Vec<f64>,
    /// Ghost penalty alone.
    pub ghost: CsrMatrix,
    pub scalars: DerivedScalars,
}

/// Assembles operator, ghost penalty, stabilized mass and the load at `t = 0`.
pub fn assemble_system(
    space: &BrokenSpace,
    coeffs: &Coefficients,
    quad: &QuadratureSet,
    stab: &StabilizationConfig,
) -> Result<AssembledSystem, FormsError> {
    stab.validate()?;
    let scalars = derived_scalars(coeffs, &space.mesh, quad)?;
    let transport = assemble_advection_reaction(space, coeffs, quad);
    let ghost = assemble_ghost(space, coeffs, quad, &scalars, stab);
    let a = transport.add_scaled(&ghost, 1.0);
    let mass = assemble_mass(space, quad, &scalars, stab);
    let load = assemble_load(space, coeffs, quad, 0.0);
    Ok(AssembledSystem {
        a,
        mass,
        load,
        ghost,
        scalars,
    })
}

/// Like [`assemble_system`] but skips the mass matrix (left empty).
pub fn assemble_stationary(
    space: &BrokenSpace,
    coeffs: &Coefficients,
    quad: &QuadratureSet,
    stab: &StabilizationConfig,
) -> Result<AssembledSystem, FormsError> {
    stab.validate()?;
    let scalars = derived_scalars(coeffs, &space.mesh, quad)?;
    let transport = assemble_advection_reaction(space, coeffs, quad);
    let ghost = assemble_ghost(space, coeffs, quad, &scalars, stab);
    let a = transport.add_scaled(&ghost, 1.0);
    let load = assemble_load(space, coeffs, quad, 0.0);
    Ok(AssembledSystem {
        a,
        mass: CsrMatrix::zeros(0, 0),
        load,
        ghost,
        scalars,
    })
}
