//! The lightlike obstruction: a graph containing an isometric ray of the
//! boundary is flagged, a maximal disc is not.

use std::sync::Arc;

use nalgebra::DVector;
use robust_families::forms::boost;
use robust_families::hpq::{detect_lightlike_ray, PoincareModel, SpacelikeGraph};
use robust_families::lattice::DiskLattice;

fn main() -> robust_families::error::Result<()> {
    let model = PoincareModel::standard(2, 1)?;
    let lat = Arc::new(DiskLattice::new(2, 33, 0.95)?);
    // f(x) = arcsin(2x₁ / (1 + |x|²)) makes the x₁-axis a spherical isometry
    let ray = SpacelikeGraph::from_fn(model.clone(), lat.clone(), |x| {
        let f = (2.0 * x[0] / (1.0 + x[0] * x[0] + x[1] * x[1])).asin();
        DVector::from_vec(vec![f.cos(), f.sin()])
    })?;
    let disc = SpacelikeGraph::totally_geodesic(model, lat, &boost(4, 0, 3, 0.8))?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for dir in [[1.0, 0.0], [0.0, 1.0], [h, h]] {
        println!(
            "direction {dir:?}: isometric-ray graph {}, boosted disc {}",
            detect_lightlike_ray(&ray, &dir, 1e-3),
            detect_lightlike_ray(&disc, &dir, 1e-3)
        );
    }
    println!("Lipschitz constants: ray graph {:.4}, boosted disc {:.4}", ray.lipschitz_constant()?, disc.lipschitz_constant()?);
    Ok(())
}
