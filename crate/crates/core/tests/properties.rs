use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use robust_families::affine::{domination_function, AffineHypersurface, Basepoint, ConvexCone};
use robust_families::forms::{
    boost, is_totally_isotropic, kernel_and_image, random_sl, random_so, rescaled_limit, rotation, ProjectiveMatrix,
    QuadraticForm,
};
use robust_families::hpq::{pseudo_distance, PoincareModel, SpacelikeGraph};
use robust_families::lattice::DiskLattice;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit(v: Vec<f64>) -> DVector<f64> {
    let v = DVector::from_vec(v);
    let n = v.norm();
    if n < 1e-3 {
        let mut e = DVector::zeros(v.len());
        e[0] = 1.0;
        e
    } else {
        v / n
    }
}

fn disk_point(p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, p).prop_map(|u| {
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.95 {
            u.iter().map(|x| 0.95 * x / n).collect()
        } else {
            u
        }
    })
}

fn model_point(p: usize, q: usize) -> impl Strategy<Value = (Vec<f64>, DVector<f64>)> {
    (disk_point(p), prop::collection::vec(-1.0f64..1.0, q + 1)).prop_map(|(u, v)| (u, unit(v)))
}

// ---- forms ----------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn so_elements_preserve_the_form(seed in any::<u64>(), p in 1usize..4, q in 0usize..3,
                                     z in prop::collection::vec(-2.0f64..2.0, 6),
                                     w in prop::collection::vec(-2.0f64..2.0, 6)) {
        let form = QuadraticForm::hpq(p, q).unwrap();
        let d = form.dim();
        let g = random_so(&form, 1.0, &mut rng(seed));
        let (z, w) = (DVector::from_column_slice(&z[..d]), DVector::from_column_slice(&w[..d]));
        let before = form.bilinear(&z, &w).unwrap();
        let after = form.bilinear(&(&g * &z), &(&g * &w)).unwrap();
        // relative to the size of the terms that cancel
        let scale = 1.0 + (&g * &z).norm() * (&g * &w).norm();
        prop_assert!((after - before).abs() <= 1e-9 * scale, "{before} vs {after}");
    }

    #[test]
    fn kernel_is_orthogonal_to_the_transpose_image(a in prop::collection::vec(-1.0f64..1.0, 20), k in 1usize..4) {
        // rank-k product of a 5×k and a k×5 matrix
        let left = DMatrix::from_fn(5, k, |i, j| a[(i * 4 + j) % 20]);
        let right = DMatrix::from_fn(k, 5, |i, j| a[(7 + i * 5 + j) % 20] + if i == j { 1.0 } else { 0.0 });
        let Ok(phi) = ProjectiveMatrix::new(left * right) else { return Ok(()) };
        let ker = kernel_and_image(&phi, 1e-8).kernel;
        let im_t = kernel_and_image(&phi.transpose(), 1e-8).image;
        let m = phi.matrix();
        for v in ker.column_iter() {
            for u in im_t.column_iter() {
                let a = (m * v).dot(&u);
                let b = v.dot(&(m.transpose() * u));
                prop_assert!((a.abs() - b.abs()).abs() <= 1e-12);
                prop_assert!(v.dot(&u).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn boost_families_have_isotropic_limits(seed in any::<u64>(), t in 1.0f64..2.0, q in 0usize..3) {
        let form = QuadraticForm::hpq(2, q).unwrap();
        let d = form.dim();
        let mut r = rng(seed);
        let (a, b) = (random_so(&form, 1.0, &mut r), random_so(&form, 1.0, &mut r));
        let seq: Vec<DMatrix<f64>> = (1..=20).map(|n| &a * boost(d, 0, d - 1, t * n as f64) * &b).collect();
        let phi = rescaled_limit(&seq, 1e-6).unwrap().limit;
        let im = kernel_and_image(&phi.transpose(), 1e-6).image;
        prop_assert!(is_totally_isotropic(&im, &form, 1e-8).unwrap());
    }

    #[test]
    fn bounded_sequences_have_invertible_limits(seed in any::<u64>(), theta in -3.0f64..3.0) {
        let form = QuadraticForm::hpq(2, 1).unwrap();
        let g = random_so(&form, 1.0, &mut rng(seed));
        let seq: Vec<DMatrix<f64>> = (1..=40).map(|n| &g * rotation(4, 0, 1, theta / n as f64)).collect();
        let phi = rescaled_limit(&seq, 1e-1).unwrap().limit;
        prop_assert_eq!(kernel_and_image(&phi, 1e-8).kernel.ncols(), 0);
    }
}

// ---- hpq ------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn embed_project_round_trip(((p, q), (u, v)) in (1usize..4, 0usize..3).prop_flat_map(|(p, q)| (Just((p, q)), model_point(p, q)))) {
        let model = PoincareModel::standard(p, q).unwrap();
        let z = model.embed(&u, &v).unwrap();
        prop_assert!((model.form().norm2(&z) + 1.0).abs() <= 1e-10 * (1.0 + z.norm_squared()));
        let (u2, v2) = model.project(&z).unwrap();
        prop_assert!(u.iter().zip(u2.iter()).all(|(a, b)| (a - b).abs() <= 1e-10));
        prop_assert!((v - v2).amax() <= 1e-10);
    }

    #[test]
    fn pseudo_distance_is_invariant((u, v) in model_point(2, 1), (x, w) in model_point(2, 1), seed in any::<u64>()) {
        let model = PoincareModel::standard(2, 1).unwrap();
        let g = random_so(model.form(), 1.0, &mut rng(seed));
        let (o, z) = (model.embed(&u, &v).unwrap(), model.embed(&x, &w).unwrap());
        let before = pseudo_distance(model.form(), &o, &z);
        let after = pseudo_distance(model.form(), &(&g * &o), &(&g * &z));
        prop_assert!((after - before).abs() <= 1e-9 * before.max(1.0), "{before} vs {after}");
    }
}

fn boosted_disc(seed: u64, q: usize, grid: usize) -> SpacelikeGraph {
    let model = PoincareModel::standard(2, q).unwrap();
    let lat = Arc::new(DiskLattice::new(2, grid, 0.95).unwrap());
    let g = random_so(model.form(), 0.6, &mut rng(seed));
    SpacelikeGraph::totally_geodesic(model, lat, &g).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn spacelike_graphs_are_lipschitz(seed in any::<u64>(), q in 0usize..3) {
        let m = boosted_disc(seed, q, 17);
        prop_assert!(m.is_spacelike());
        let eps = 3.0 * m.lattice().h();
        prop_assert!(m.lipschitz_constant().unwrap() <= 1.0 + eps);
    }

    #[test]
    fn intrinsic_distance_dominates_pseudo_distance(seed in any::<u64>(), q in 0usize..2) {
        let m = boosted_disc(seed, q, 17);
        let c = m.lattice().center();
        let o = m.position(c);
        let eps = 3.0 * m.lattice().h();
        for (k, d) in m.distances_from(c).unwrap().iter().enumerate() {
            let pd = pseudo_distance(m.model().form(), &o, &m.position(k));
            prop_assert!(*d >= pd - eps * (1.0 + pd), "node {k}: intrinsic {d} pseudo {pd}");
        }
    }
}

// ---- affine ---------------------------------------------------------------

fn cone_point(cone: &ConvexCone, a: &[f64]) -> DVector<f64> {
    let y: Vec<f64> = a.iter().take(cone.p()).map(|t| 0.6 * t * cone.chart_domain().extent()).collect();
    cone.frame().lift(&y) * (1.0 + a[2].abs())
}

fn cones() -> Vec<ConvexCone> {
    vec![ConvexCone::standard_round(2), ConvexCone::orthant(2).unwrap()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hilbert_metric_axioms(a in prop::collection::vec(-1.0f64..1.0, 3), b in prop::collection::vec(-1.0f64..1.0, 3),
                             c in prop::collection::vec(-1.0f64..1.0, 3), which in 0usize..2) {
        let cone = &cones()[which];
        let (x, y, z) = (cone_point(cone, &a), cone_point(cone, &b), cone_point(cone, &c));
        prop_assume!(cone.contains(&x) && cone.contains(&y) && cone.contains(&z));
        let d = |u: &DVector<f64>, v: &DVector<f64>| cone.hilbert_distance(u, v).unwrap();
        prop_assert!((d(&x, &y) - d(&y, &x)).abs() <= 1e-10 * (1.0 + d(&x, &y)));
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-10);
        prop_assert!(d(&x, &(2.5 * &x)) <= 1e-10);
    }

    #[test]
    fn hilbert_metric_is_linearly_invariant(a in prop::collection::vec(-1.0f64..1.0, 3), b in prop::collection::vec(-1.0f64..1.0, 3),
                                            which in 0usize..2, seed in any::<u64>()) {
        let cone = &cones()[which];
        let (x, y) = (cone_point(cone, &a), cone_point(cone, &b));
        prop_assume!(cone.contains(&x) && cone.contains(&y));
        let g = random_sl(3, 0.5, &mut rng(seed));
        let moved = cone.transformed(&g).unwrap();
        let before = cone.hilbert_distance(&x, &y).unwrap();
        let after = moved.hilbert_distance(&(&g * &x), &(&g * &y)).unwrap();
        prop_assert!((after - before).abs() <= 1e-8 * (1.0 + before), "{before} vs {after}");
    }
}

fn hyperboloid(n: usize) -> AffineHypersurface {
    let cone = ConvexCone::standard_round(2);
    AffineHypersurface::over_cone(&cone, n, 2.0, true, |d| 1.0 / (d[2] * d[2] - d[0] * d[0] - d[1] * d[1]).sqrt()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn domination_function_is_equivariant(seed in any::<u64>(), node in 0usize..10_000) {
        let m = hyperboloid(17);
        let o = m.minimal_norm_basepoint().unwrap();
        let g = random_sl(3, 0.5, &mut rng(seed));
        let go = Basepoint {
            y: o.y.clone(),
            node: o.node,
            point: &g * &o.point,
            tangent: o.tangent.iter().map(|t| &g * t).collect(),
        };
        let x = m.point(node % m.len());
        let before = domination_function(&m, &o, &x).unwrap();
        let after = domination_function(&m, &go, &(&g * &x)).unwrap();
        prop_assert!((after - before).abs() <= 1e-9 * before.abs().max(1.0), "{before} vs {after}");
    }
}

#[test]
fn minimal_norm_basepoint_is_a_global_argmin() {
    for m in [hyperboloid(17), hyperboloid(33)] {
        let o = m.minimal_norm_basepoint().unwrap();
        let n = o.point.norm();
        assert!(m.points().iter().all(|x| x.norm() >= n - 1e-12));
        for t in &o.tangent {
            assert!(t.dot(&o.point).abs() <= 1e-8 * t.norm() * n);
        }
    }
}

// ---- maximal solver -------------------------------------------------------

fn wavy_problem(grid: usize, amplitude: f64) -> robust_families::maximal::PlateauProblem {
    use robust_families::maximal::{FlowParams, PlateauProblem};
    let model = PoincareModel::standard(2, 1).unwrap();
    let lat = Arc::new(DiskLattice::new(2, grid, 0.95).unwrap());
    let boundary: Vec<(usize, DVector<f64>)> = lat
        .boundary_nodes()
        .map(|k| {
            let x = lat.x(k);
            let b = amplitude * (2.0 * x[1].atan2(x[0])).sin();
            (k, DVector::from_vec(vec![b.cos(), b.sin()]))
        })
        .collect();
    PlateauProblem::from_boundary(model, lat, &boundary, FlowParams { target: 1e-9, ..FlowParams::default() }).unwrap()
}

#[test]
fn solver_output_is_a_fixed_point() {
    use robust_families::maximal::{solve_maximal, PlateauProblem};
    let prob = wavy_problem(17, 0.3);
    let sol = solve_maximal(&prob).unwrap();
    assert!(sol.converged);
    let again = solve_maximal(&PlateauProblem::new(sol.graph.clone(), prob.params().clone()).unwrap()).unwrap();
    assert!(again.converged && again.iterations <= 2, "{} iterations", again.iterations);
}

#[test]
fn solver_preserves_the_boundary_lipschitz_bound() {
    use robust_families::maximal::{boundary_lipschitz, solve_maximal};
    for amp in [0.1, 0.2, 0.3] {
        let prob = wavy_problem(17, amp);
        let sol = solve_maximal(&prob).unwrap();
        let eps = 3.0 * sol.graph.lattice().h();
        let bound = boundary_lipschitz(prob.initial_guess()).unwrap();
        assert!(sol.graph.lipschitz_constant().unwrap() <= bound.max(1.0) + eps);
    }
}

#[test]
fn solver_is_equivariant() {
    use robust_families::maximal::{solve_maximal, PlateauProblem};
    let prob = wavy_problem(17, 0.3);
    let sol = solve_maximal(&prob).unwrap().graph;
    // a fibre rotation composed with a quarter turn of the disc: both keep the lattice
    for g in [rotation(4, 2, 3, 0.7), rotation(4, 0, 1, std::f64::consts::FRAC_PI_2) * rotation(4, 2, 3, -1.1)] {
        let moved = sol.transform(&g).unwrap();
        let re = PlateauProblem::from_boundary(moved.model().clone(), moved.lattice().clone(), &moved.boundary_trace(), prob.params().clone())
            .unwrap();
        let resolved = solve_maximal(&re).unwrap().graph;
        let gap = resolved.values().iter().zip(moved.values()).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
        assert!(gap <= 1e-4, "gap {gap}");
    }
}
