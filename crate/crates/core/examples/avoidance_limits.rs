//! Rescaled limits of divergent sequences in SO(2,2): the image of φᵗ is
//! totally isotropic, so φ cannot kill a spacelike plane.

use std::sync::Arc;

use nalgebra::DMatrix;
use robust_families::forms::{avoidance_margin, boost, isotropy_defect, kernel_and_image, rescaled_limit, rotation, QuadraticForm};
use robust_families::hpq::{PoincareModel, SpacelikeGraph};
use robust_families::lattice::DiskLattice;

fn main() -> robust_families::error::Result<()> {
    let form = QuadraticForm::hpq(2, 1)?;
    let model = PoincareModel::standard(2, 1)?;
    let lat = Arc::new(DiskLattice::new(2, 17, 0.95)?);
    let h2 = SpacelikeGraph::totally_geodesic(model, lat, &DMatrix::identity(4, 4))?;
    let families: Vec<(&str, Box<dyn Fn(f64) -> DMatrix<f64>>)> = vec![
        ("boost", Box::new(|t| boost(4, 0, 3, t))),
        ("two commuting boosts", Box::new(|t| boost(4, 0, 3, t) * boost(4, 1, 2, t))),
        ("rotated boost", Box::new(|t| rotation(4, 0, 1, 0.7) * boost(4, 0, 3, t) * rotation(4, 2, 3, 1.1))),
    ];
    for (name, f) in families {
        let seq: Vec<DMatrix<f64>> = (1..=30).map(|n| f(n as f64)).collect();
        let lim = rescaled_limit(&seq, 1e-6)?;
        let phi = lim.limit;
        let ki = kernel_and_image(&phi, 1e-8);
        let im_t = kernel_and_image(&phi.transpose(), 1e-8).image;
        println!(
            "{name}: rank {}, dim Ker φ = {}, Gram defect of Im φᵗ = {:.1e}, escape of H² from Ker φ = {:.3}",
            ki.rank(),
            ki.kernel.ncols(),
            isotropy_defect(&im_t, &form),
            avoidance_margin(&phi, &h2.positions())
        );
    }
    Ok(())
}
