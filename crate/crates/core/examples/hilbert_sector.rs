//! Hilbert distances on cones, and the sector curves that carry the
//! domination function of an affine sphere.

use nalgebra::DVector;
use robust_families::affine::{benoist_hulin_gap, domination_function, sector_curve, AffineHypersurface, ConvexCone};

fn main() -> robust_families::error::Result<()> {
    // quadrant: points on the hyperbola xy = 1 are 2|t - s| apart
    let quadrant = ConvexCone::orthant(1)?;
    let on = |t: f64| DVector::from_vec(vec![t.exp(), (-t).exp()]);
    for (t, s) in [(0.0, 1.0), (-0.5, 0.7), (2.0, -1.0)] {
        println!("quadrant h({t}, {s}) = {:.12}   2|t-s| = {}", quadrant.hilbert_distance(&on(t), &on(s))?, 2.0 * f64::abs(t - s));
    }

    // round cone: twice the hyperbolic distance on the hyperboloid
    let round = ConvexCone::standard_round(2);
    let a = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let b = DVector::from_vec(vec![1.2f64.sinh(), 0.0, 1.2f64.cosh()]);
    println!("round cone h = {:.12} (2·1.2 = 2.4)", round.hilbert_distance(&a, &b)?);

    // Ţiţeica: sector curves through the centre; α̇₀ ≠ 0 off the symmetric sections,
    // where only the minus-sign law matches
    let octant = ConvexCone::orthant(2)?;
    let k = 27f64.powf(-0.5);
    let m = AffineHypersurface::over_cone(&octant, 33, 3.0, true, |d| (k / d.product()).cbrt())?;
    let o = m.minimal_norm_basepoint()?;
    println!("Ţiţeica basepoint {:?}", o.point.as_slice());
    for node in [100, 300, 500, 700] {
        let x = m.point(node % m.len());
        let Ok(c) = sector_curve(&m, &o, &x, 21) else { continue };
        println!(
            "  node {node:4}: t_x {:.4}  α̇₀ {:+.4}  sup|α̇| {:.4}  law residual {:.1e}  flipped-sign residual {:.1e}  log φ_o(x) {:.4}",
            c.t_x,
            c.alpha_dot0,
            c.max_alpha_dot(),
            c.law_residual(),
            c.flipped_law_residual(),
            domination_function(&m, &o, &x)?
        );
    }
    let pairs: Vec<(usize, usize)> = m.lattice().interior_nodes().map(|k| (o.node, k)).collect();
    let gap = benoist_hulin_gap(&m, &octant, &pairs)?;
    println!("measured comparison constant ĉ = max d_M / h_M = {:.4} over {} pairs", gap.c_hat, gap.pairs_used);
    Ok(())
}
