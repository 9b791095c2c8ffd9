//! Affine differential geometry of convex cones and hyperbolic affine spheres.

mod cone;
mod sector;
mod solver;
mod surface;

pub use cone::{ChartDomain, ConvexCone, Frame};
pub use sector::{
    affine_domination_check, benoist_hulin_gap, domination_function, sector_curve, DominationReport, DominationSample, GapReport,
    SectorCurve,
};
pub use solver::{solve_affine_sphere, AffineSolution, AffineSphereProblem, NewtonParams};
pub use surface::{
    chart_lattice, AffineHypersurface, AffineStructure, Basepoint, EmbeddingJet, PotentialJet, SphereCheck, Transversal,
};
