//! Solve a Plateau problem in H^{2,1} with a wavy boundary and report the
//! flow history. `cargo run --example maximal_surface -- out.problem` also
//! writes the problem file for `robustfam solve-maximal`.

use std::sync::Arc;

use nalgebra::DVector;
use robust_families::hpq::PoincareModel;
use robust_families::io;
use robust_families::lattice::DiskLattice;
use robust_families::maximal::{solve_maximal, FlowParams, PlateauProblem};

fn main() -> robust_families::error::Result<()> {
    let model = PoincareModel::standard(2, 1)?;
    let lat = Arc::new(DiskLattice::new(2, 25, 0.95)?);
    let boundary: Vec<(usize, DVector<f64>)> = lat
        .boundary_nodes()
        .map(|k| {
            let x = lat.x(k);
            let b = 0.3 * (2.0 * x[1].atan2(x[0])).sin();
            (k, DVector::from_vec(vec![b.cos(), b.sin()]))
        })
        .collect();
    let params = FlowParams::default();
    if let Some(path) = std::env::args().nth(1) {
        io::write_file(&path, &io::write_problem(&model, &lat, &boundary, &params))?;
        println!("wrote {path}");
    }
    let prob = PlateauProblem::from_boundary(model, lat, &boundary, params)?;
    let sol = solve_maximal(&prob)?;
    for (i, r) in sol.history.iter().enumerate().step_by(10) {
        println!("iter {i:4}  residual {r:.3e}");
    }
    println!(
        "converged {} after {} iterations, residual {:.3e}, spacelike {}",
        sol.converged,
        sol.iterations,
        sol.residual,
        sol.graph.is_spacelike()
    );
    Ok(())
}
