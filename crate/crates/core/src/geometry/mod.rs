//! Level sets and cut quadrature.

mod cut;
mod levelset;
mod rules;

pub use cut::{
    boundary_orientation, cut_element, face_rule, full_element_rule, full_segment_rule, interface_rule,
    volume_rule, BoundaryPoint, CutElement, ElementQuadrature, FlowSide, GeometryError, QuadPoint,
    QuadratureConfig, QuadratureSet,
};
pub use levelset::LevelSet;
pub use rules::{gauss_legendre, points_for_order, ReferenceRules};
