//! Two-dimensional staggered (marker-and-cell) discretization.

mod field;
mod masks;
mod measure;
mod mesh;
mod ops;

pub use field::{Field, Velocity};
pub use masks::{build_masks, MaskSet, MIN_CELLS_ACROSS_GAP};
pub use measure::{
    cell_gradients, centreline_gradient, max_gradient_fluid, max_gradient_in_gap,
    pressure_oscillation, write_field_csv, GapSampler,
};
pub use mesh::{GapAdaptedRule, GridRule, StaggeredGrid};
pub use ops::{
    advect, cell_inner, divergence, face_inner, gradient, interpolate_cells, interpolate_velocity,
    laplacian, WallData,
};
pub(crate) use ops::{
    face_value, face_volume, is_boundary_u, is_boundary_v, viscous_stencil, Neighbour,
};
