//! Solve for the hyperbolic affine sphere over a cone (round, octant, or a
//! cone file given as the first argument) and check it against closed forms.

use robust_families::affine::{AffineSphereProblem, ConvexCone, NewtonParams};
use robust_families::io;

fn main() -> robust_families::error::Result<()> {
    let cones = match std::env::args().nth(1) {
        Some(path) => vec![(path.clone(), io::read_cone(&io::read_file(&path)?)?)],
        None => vec![
            ("round".to_string(), ConvexCone::standard_round(2)),
            ("octant".to_string(), ConvexCone::orthant(2)?),
        ],
    };
    for (name, cone) in cones {
        let prob = AffineSphereProblem::new(&cone, 33)?;
        // start off the solution so Newton has something to do
        let w0 = prob.initial_guess()?.iter().map(|w| 1.5 * w).collect();
        let sol = prob.solve_from(w0, NewtonParams::default())?;
        println!("{name}: {} Newton steps, residuals {:?}", sol.iterations, sol.history.iter().map(|r| format!("{r:.1e}")).collect::<Vec<_>>());
        let check = sol.sphere.is_affine_sphere(1e-5)?;
        println!("  affine normals meet the origin: max angle {:.2e}", check.max_angle);
        let pts = sol.sphere.points();
        let spread = |f: &dyn Fn(&nalgebra::DVector<f64>) -> f64| {
            pts.iter().map(f).fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)))
        };
        match name.as_str() {
            "round" => println!("  x₃² − x₁² − x₂² ∈ {:?} (hyperboloid: 1)", spread(&|x| x[2] * x[2] - x[0] * x[0] - x[1] * x[1])),
            "octant" => println!("  x₁x₂x₃ ∈ {:?} (Ţiţeica: {:.17})", spread(&|x| x.iter().product()), 27f64.sqrt().recip()),
            _ => {}
        }
        let o = sol.sphere.minimal_norm_basepoint()?;
        println!("  minimal-norm basepoint {:?}", o.point.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>());
    }
    Ok(())
}
