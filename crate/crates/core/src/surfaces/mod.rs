//! Discrete spacelike disks: meshes, surfaces over a pointed plane and their geometry.

pub mod geometry;
pub mod mesh;
pub mod surface;

pub use geometry::{
    acausality_check, area_gradient, dual_areas, g2_gram, gauss_curvature, gauss_lift_defect, gauss_lift_residual, induced_gram,
    local_fit, local_fit_any, mean_curvature_residual, second_fundamental_norm, spacelike_margin, total_area,
    AcausalityReport, G2Gram, LocalFit, ResidualReport,
};
pub use mesh::{DiskMesh, Grading, MeshOptions};
pub use surface::{rescale, DiscreteSurface};
