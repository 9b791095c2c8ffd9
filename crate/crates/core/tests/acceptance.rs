//! Acceptance suite: one PASS/FAIL line per criterion, details indented
//! below. Exits nonzero if a criterion fails, except those whose failure is
//! documented as unattainable (still printed as FAIL).

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robust_families::affine::{
    benoist_hulin_gap, sector_curve, AffineHypersurface, AffineSolution, AffineSphereProblem, ConvexCone, NewtonParams,
};
use robust_families::forms::{
    avoidance_check, avoidance_margin, boost, is_totally_isotropic, isotropy_defect, kernel_and_image, random_so,
    rescaled_limit, GroupTag, QuadraticForm,
};
use robust_families::hpq::{detect_lightlike_ray, pseudo_distance, PoincareModel, SpacelikeGraph};
use robust_families::harness::{closedness_scenario, Context, Scenario};
use robust_families::lattice::DiskLattice;
use robust_families::reps::{genus_two, renormalization_pipeline, triangle_237, FamilyTag, Member, PipelineParams};
use robust_families::maximal::{solve_maximal, FlowParams, MaximalSolution, PlateauProblem};

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { pass: true, details: Vec::new() }
    }

    /// Records a clause; `ok` decides, `line` explains.
    fn clause(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.details.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, line: String) {
        self.details.push(format!("     {line}"));
    }
}

fn rng(salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn disk(grid: usize) -> Arc<DiskLattice> {
    Arc::new(DiskLattice::new(2, grid, 0.95).unwrap())
}

// ---- 1 ----------------------------------------------------------------------

/// Worst `|Q(Π(u,v)) + 1|` and round-trip error over `n` samples with
/// `|u| < radius`.
fn poincare_sweep(n: usize, radius: f64, salt: u64) -> (f64, f64) {
    let model = PoincareModel::standard(2, 1).unwrap();
    let mut r = rng(salt);
    let (mut worst_norm, mut worst_trip) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let u = loop {
            let u = [r.gen_range(-radius..radius), r.gen_range(-radius..radius)];
            if u[0] * u[0] + u[1] * u[1] < radius * radius {
                break u;
            }
        };
        let a: f64 = r.gen_range(0.0..std::f64::consts::TAU);
        let v = DVector::from_vec(vec![a.cos(), a.sin()]);
        let z = model.embed(&u, &v).unwrap();
        worst_norm = worst_norm.max((model.form().bilinear(&z, &z).unwrap() + 1.0).abs());
        let (u2, v2) = model.project(&z).unwrap();
        let trip = (u[0] - u2[0]).abs().max((u[1] - u2[1]).abs()).max((v - v2).amax());
        worst_trip = worst_trip.max(trip);
    }
    (worst_norm, worst_trip)
}

fn poincare_identity() -> Outcome {
    let mut out = Outcome::new();
    let t = Instant::now();
    // the chart disc every graph lives on
    let (worst_norm, worst_trip) = poincare_sweep(1000, 0.95, 1);
    let el = t.elapsed().as_secs_f64();
    out.clause(worst_norm <= 1e-12, format!("|u| < 0.95: max |Q(Π(u,v)) + 1| = {worst_norm:.2e} (≤ 1e-12)"));
    out.clause(worst_trip <= 1e-10, format!("|u| < 0.95: max round-trip error = {worst_trip:.2e} (≤ 1e-10)"));
    out.clause(el < 1.0, format!("runtime {el:.3} s (< 1 s)"));
    let (open_norm, open_trip) = poincare_sweep(1000, 1.0, 1);
    out.note(format!("whole open disc: {open_norm:.2e} / {open_trip:.2e}; Q(z) cancels to ~ε|z|², |z| ~ 2/(1-|u|²)"));
    out
}

// ---- 2 ----------------------------------------------------------------------

/// Largest relative gap between grid geodesic distance and the hyperbolic
/// distance from the centre, over nodes at distance ≥ 0.5.
fn q_zero_gap(grid: usize) -> f64 {
    let model = PoincareModel::standard(2, 0).unwrap();
    let lat = disk(grid);
    let m = SpacelikeGraph::constant(model, lat.clone(), &DVector::from_element(1, 1.0)).unwrap();
    let c = lat.center();
    let o = m.position(c);
    let d = m.distances_from(c).unwrap();
    (0..lat.len())
        .filter_map(|k| {
            let pd = pseudo_distance(m.model().form(), &o, &m.position(k));
            (pd >= 0.5).then(|| (d[k] - pd).abs() / pd)
        })
        .fold(0.0, f64::max)
}

fn q_zero_equality() -> Outcome {
    let mut out = Outcome::new();
    let t = Instant::now();
    let coarse = q_zero_gap(129);
    let fine = q_zero_gap(257);
    let el = t.elapsed().as_secs_f64();
    out.clause(coarse <= 0.02, format!("129²: max relative gap {coarse:.4} (≤ 2%)"));
    out.clause(fine < 0.01, format!("257²: max relative gap {fine:.4} (< 1%)"));
    out.clause(fine < coarse, "gap shrinks under refinement".into());
    out.clause(el < 30.0, format!("runtime {el:.1} s (< 30 s)"));
    out
}

// ---- 3 ----------------------------------------------------------------------

fn solve_boundary(lat: &Arc<DiskLattice>, boundary: &[(usize, DVector<f64>)], target: f64) -> MaximalSolution {
    let model = PoincareModel::standard(2, 1).unwrap();
    let params = FlowParams { target, ..FlowParams::default() };
    solve_maximal(&PlateauProblem::from_boundary(model, lat.clone(), boundary, params).unwrap()).unwrap()
}

fn wave(lat: &Arc<DiskLattice>, amplitude: f64, mode: f64, phase: f64) -> Vec<(usize, DVector<f64>)> {
    lat.boundary_nodes()
        .map(|k| {
            let x = lat.x(k);
            let b = amplitude * (mode * x[1].atan2(x[0]) + phase).sin();
            (k, DVector::from_vec(vec![b.cos(), b.sin()]))
        })
        .collect()
}

fn domination_inequality() -> Outcome {
    let mut out = Outcome::new();
    let t = Instant::now();
    let lat = disk(33);
    let eps = 3.0 * lat.h();
    let model = PoincareModel::standard(2, 1).unwrap();
    let boosted = SpacelikeGraph::totally_geodesic(model, lat.clone(), &(boost(4, 0, 3, 0.5) * boost(4, 1, 2, 0.3)))
        .unwrap()
        .boundary_trace();
    let cases: Vec<(String, Vec<(usize, DVector<f64>)>)> = vec![
        ("wave 0.3·sin 2θ".into(), wave(&lat, 0.3, 2.0, 0.0)),
        ("wave 0.2·sin 3θ".into(), wave(&lat, 0.2, 3.0, 0.4)),
        ("wave 0.4·sin θ".into(), wave(&lat, 0.4, 1.0, 1.0)),
        ("wave 0.15·sin 4θ".into(), wave(&lat, 0.15, 4.0, 0.0)),
        ("wave 0.25·sin 2θ + shift".into(), wave(&lat, 0.25, 2.0, 2.0)),
        ("boosted disc trace".into(), boosted),
    ];
    let mut solved = 0;
    for (name, boundary) in cases {
        let sol = solve_boundary(&lat, &boundary, 1e-6);
        solved += sol.converged as usize;
        let m = sol.graph;
        let c = lat.center();
        let o = m.position(c);
        let d = m.distances_from(c).unwrap();
        let (mut below, mut above, mut violations) = (0.0f64, 0.0f64, 0);
        for (k, dk) in d.iter().enumerate() {
            let pd = pseudo_distance(m.model().form(), &o, &m.position(k));
            below = below.max(pd - dk);
            above = above.max(dk - pd);
            violations += (*dk < pd - eps) as usize;
        }
        out.clause(
            sol.converged && violations == 0,
            format!("{name}: residual {:.1e}, max(pseudo − d_M) = {below:.4}, violations {violations}", sol.residual),
        );
        out.note(format!("{name}: max(d_M − pseudo) = {above:.4} (reverse direction, informational)"));
    }
    let el = t.elapsed().as_secs_f64();
    out.clause(solved >= 5, format!("{solved} converged solver graphs (≥ 5), ε_grid = 3h = {eps:.4}"));
    out.clause(el < 120.0, format!("runtime {el:.1} s (< 2 min)"));
    out
}

// ---- 4 ----------------------------------------------------------------------

fn maximal_oracles() -> Outcome {
    let mut out = Outcome::new();
    let t = Instant::now();
    let lat = disk(33);
    let constant: Vec<(usize, DVector<f64>)> = lat.boundary_nodes().map(|k| (k, DVector::from_vec(vec![0.6, 0.8]))).collect();
    let sol = solve_boundary(&lat, &constant, 1e-10);
    out.clause(sol.residual < 1e-8, format!("constant boundary: residual {:.2e} (< 1e-8)", sol.residual));

    let model = PoincareModel::standard(2, 1).unwrap();
    for (name, g) in [
        ("boost 0.4", boost(4, 0, 3, 0.4)),
        ("boost 0.3 ∘ boost 0.3", boost(4, 0, 3, 0.3) * boost(4, 1, 2, 0.3)),
    ] {
        let exact = SpacelikeGraph::totally_geodesic(model.clone(), lat.clone(), &g).unwrap();
        let sol = solve_boundary(&lat, &exact.boundary_trace(), 1e-9);
        let gap = sol.graph.values().iter().zip(exact.values()).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
        out.clause(gap <= 1e-4, format!("{name}: sup-norm gap to g·H² = {gap:.2e} (≤ 1e-4)"));
    }
    let el = t.elapsed().as_secs_f64();
    out.clause(el < 60.0, format!("runtime {el:.1} s (< 1 min)"));
    out
}

// ---- 5 ----------------------------------------------------------------------

/// The default start is exact for these cones up to scale; rescaling it
/// makes Newton do the work.
fn solve_from_scaled(cone: &ConvexCone, grid: usize, scale: f64) -> AffineSolution {
    let prob = AffineSphereProblem::new(cone, grid).unwrap();
    let w0 = prob.initial_guess().unwrap().iter().map(|w| scale * w).collect();
    prob.solve_from(w0, NewtonParams::default()).unwrap()
}

fn affine_oracles() -> Outcome {
    let mut out = Outcome::new();
    let t = Instant::now();
    let grid = 65;
    let round = solve_from_scaled(&ConvexCone::standard_round(2), grid, 1.7);
    let radial = round
        .sphere
        .points()
        .iter()
        .map(|x| {
            let exact = (x[2] * x[2] - x[0] * x[0] - x[1] * x[1]).sqrt();
            // |x| / r_exact(x̂) − 1, with r_exact = |x| / sqrt(−Q(x))
            (exact - 1.0).abs()
        })
        .fold(0.0, f64::max);
    out.clause(radial <= 1e-3, format!("round cone: max relative radius error to the hyperboloid = {radial:.2e} (≤ 1e-3)"));

    let orthant = solve_from_scaled(&ConvexCone::orthant(2).unwrap(), grid, 0.6);
    out.note(format!("Newton iterations from rescaled starts: round {}, octant {}", round.iterations, orthant.iterations));
    let products: Vec<f64> = orthant.sphere.points().iter().map(|x| x.iter().product()).collect();
    let mean = products.iter().sum::<f64>() / products.len() as f64;
    let spread = products.iter().map(|p| (p / mean - 1.0).abs()).fold(0.0, f64::max);
    out.clause(spread <= 1e-3, format!("octant: max relative deviation of x₁x₂x₃ from its mean {mean:.6} = {spread:.2e} (≤ 1e-3)"));

    for (name, sol) in [("round", &round), ("octant", &orthant)] {
        let check = sol.sphere.is_affine_sphere(1e-5).unwrap();
        out.clause(check.max_angle <= 1e-5, format!("{name}: affine normals through the origin, max angle {:.2e} (≤ 1e-5)", check.max_angle));
    }
    let el = t.elapsed().as_secs_f64();
    out.clause(el < 120.0, format!("runtime {el:.1} s at {grid}² (< 2 min)"));
    out
}

// ---- 6 ----------------------------------------------------------------------

fn hilbert_closed_form() -> Outcome {
    let mut out = Outcome::new();
    let cone = ConvexCone::orthant(1).unwrap();
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (t, s): (f64, f64) = (r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0));
        let x = DVector::from_vec(vec![t.exp(), (-t).exp()]);
        let y = DVector::from_vec(vec![s.exp(), (-s).exp()]);
        let h = cone.hilbert_distance(&x, &y).unwrap();
        worst = worst.max((h - 2.0 * (t - s).abs()).abs());
    }
    out.clause(worst <= 1e-9, format!("max |h - 2|t-s|| over 200 hyperbola pairs = {worst:.2e} (≤ 1e-9)"));
    out
}

// ---- 7 ----------------------------------------------------------------------

struct SectorSweep {
    curves: usize,
    plus: f64,
    minus: f64,
    max_alpha_dot: f64,
    c_hat: f64,
}

fn sector_sweep(cone: &ConvexCone, m: &AffineHypersurface, stride: usize) -> SectorSweep {
    let o = m.minimal_norm_basepoint().unwrap();
    let nodes: Vec<usize> = m.lattice().interior_nodes().filter(|&k| k != o.node).step_by(stride).collect();
    let pairs: Vec<(usize, usize)> = m.lattice().interior_nodes().map(|k| (o.node, k)).collect();
    let c_hat = benoist_hulin_gap(m, cone, &pairs).unwrap().c_hat;
    let mut sw = SectorSweep { curves: 0, plus: 0.0, minus: 0.0, max_alpha_dot: 0.0, c_hat };
    for k in nodes {
        let Ok(curve) = sector_curve(m, &o, &m.point(k), 21) else { continue };
        sw.curves += 1;
        sw.plus = sw.plus.max(curve.flipped_law_residual());
        sw.minus = sw.minus.max(curve.law_residual());
        sw.max_alpha_dot = sw.max_alpha_dot.max(curve.max_alpha_dot());
    }
    sw
}

fn sector_law() -> Outcome {
    let mut out = Outcome::new();
    let quadrant = ConvexCone::orthant(1).unwrap();
    let hyperbola = AffineHypersurface::over_cone(&quadrant, 41, 2.0, true, |d| 1.0 / (d[0] * d[1]).sqrt()).unwrap();
    let round = ConvexCone::standard_round(2);
    let octant = ConvexCone::orthant(2).unwrap();
    let spheres = [
        ("hyperbola", 1e-6, quadrant.clone(), hyperbola, 1),
        ("solver hyperboloid", 1e-3, round.clone(), solve_from_scaled(&round, 33, 1.7).sphere, 7),
        ("solver Ţiţeica", 1e-3, octant.clone(), solve_from_scaled(&octant, 33, 0.6).sphere, 7),
    ];
    for (name, tol, cone, m, stride) in spheres {
        let sw = sector_sweep(&cone, &m, stride);
        let c = 1.1 * sw.c_hat;
        let a_literal = 1.0 - 1.0 / c;
        let a_t_units = 1.0 - 1.0 / (2.0 * c);
        out.clause(sw.plus <= tol, format!("{name}: printed law e^(α−α₀)(cosh t + α̇₀ sinh t), worst relative error {:.2e} over {} curves (≤ {tol:.0e})", sw.plus, sw.curves));
        out.clause(
            sw.max_alpha_dot <= a_literal,
            format!("{name}: sup|α̇| = {:.4} against 1 − 1/c = {a_literal:.4} (c = 1.1·ĉ = {c:.4})", sw.max_alpha_dot),
        );
        out.note(format!(
            "{name}: derived law (cosh t − α̇₀ sinh t) worst error {:.2e}; sup|α̇| against 1 − 1/(2c) = {a_t_units:.4}: {}",
            sw.minus,
            if sw.max_alpha_dot <= a_t_units + 1e-9 { "holds" } else { "fails" }
        ));
    }
    out
}

// ---- 8 ----------------------------------------------------------------------

fn avoidance_isotropy() -> Outcome {
    let mut out = Outcome::new();
    let form = QuadraticForm::hpq(2, 1).unwrap();
    let lat = disk(33);
    let model = PoincareModel::standard(2, 1).unwrap();
    let corpus: Vec<(&str, SpacelikeGraph)> = vec![
        ("H²", SpacelikeGraph::totally_geodesic(model.clone(), lat.clone(), &DMatrix::identity(4, 4)).unwrap()),
        ("boosted H²", SpacelikeGraph::totally_geodesic(model.clone(), lat.clone(), &boost(4, 0, 3, 0.6)).unwrap()),
        ("solver graph", solve_boundary(&lat, &wave(&lat, 0.3, 2.0, 0.0), 1e-6).graph),
    ];
    let mut r = rng(8);
    let mut families: Vec<(String, Box<dyn Fn(f64) -> DMatrix<f64>>)> = vec![
        ("boost e₁/f₂".into(), Box::new(|s| boost(4, 0, 3, s))),
        ("boost e₂/f₁".into(), Box::new(|s| boost(4, 1, 2, s))),
        ("double boost".into(), Box::new(|s| boost(4, 0, 3, s) * boost(4, 1, 2, s))),
        ("boost + half boost".into(), Box::new(|s| boost(4, 0, 3, s) * boost(4, 1, 2, 0.5 * s))),
    ];
    for i in 0..4 {
        let (a, b) = (random_so(&form, 1.0, &mut r), random_so(&form, 1.0, &mut r));
        families.push((format!("conjugated boost #{i}"), Box::new(move |s| &a * boost(4, 0, 3, s) * &b)));
    }
    let (mut worst_gram, mut worst_escape) = (0.0f64, f64::INFINITY);
    for (name, family) in &families {
        let seq: Vec<DMatrix<f64>> = (1..=40).map(|n| family(n as f64)).collect();
        let phi = rescaled_limit(&seq, 1e-6).unwrap().limit;
        let im = kernel_and_image(&phi.transpose(), 1e-8).image;
        let gram = isotropy_defect(&im, &form);
        worst_gram = worst_gram.max(gram);
        let isotropic = is_totally_isotropic(&im, &form, 1e-8).unwrap();
        out.clause(isotropic, format!("{name}: rank {} image of φᵗ, Gram defect {gram:.2e} (≤ 1e-8)", im.ncols()));
        for (mname, m) in &corpus {
            let escape = avoidance_margin(&phi, &m.positions());
            worst_escape = worst_escape.min(escape);
            out.pass &= avoidance_check(&phi, &m.positions(), 1e-6);
            if escape <= 1e-6 {
                out.clause(false, format!("{name}: {mname} lies in Ker φ (escape {escape:.2e})"));
            }
        }
    }
    out.clause(worst_escape > 1e-6, format!("no corpus manifold in Ker φ: min escape {worst_escape:.3} over {} limits × {} manifolds", families.len(), corpus.len()));
    out.note(format!("worst Gram defect {worst_gram:.2e}"));
    out
}

// ---- 9 ----------------------------------------------------------------------

fn pipeline_bounded() -> Outcome {
    let mut out = Outcome::new();
    let t = Instant::now();
    let lat = disk(33);
    let model = PoincareModel::standard(2, 1).unwrap();
    let so21 = GroupTag::So(QuadraticForm::hpq(2, 1).unwrap());
    for (name, base) in [("(2,3,7) triangle group", triangle_237()), ("genus-2 surface group", genus_two())] {
        let rho = base.block_embed(so21.clone()).unwrap();
        let (mut rhos, mut members) = (Vec::new(), Vec::new());
        for n in 1..=8 {
            let h = boost(4, 0, 3, 0.5 * n as f64);
            rhos.push(rho.conjugate(&h).unwrap());
            members.push(Member::Hpq(SpacelikeGraph::totally_geodesic(model.clone(), lat.clone(), &h).unwrap()));
        }
        let rep = renormalization_pipeline(&rhos, &members, FamilyTag::MaximalHpq, PipelineParams::default()).unwrap();
        let input_growth = rhos.last().unwrap().generator_norm() / rhos[0].generator_norm();
        let sup = rep.generator_norms.iter().copied().fold(0.0, f64::max);
        let cap = 10.0 * rep.generator_norms[0];
        out.clause(sup <= cap, format!("{name}: sup renormalized generator norm {sup:.4} ≤ 10 × {:.4} (input norms grew ×{input_growth:.1})", rep.generator_norms[0]));
        out.clause(
            rep.limit_residual <= 2.0 * rep.input_floor,
            format!("{name}: limit invariance residual {:.2e} ≤ 2 × input floor {:.2e}", rep.limit_residual, rep.input_floor),
        );
    }
    let el = t.elapsed().as_secs_f64();
    out.clause(el < 300.0, format!("runtime {el:.1} s (< 5 min)"));
    out
}

// ---- 10 ---------------------------------------------------------------------

fn ray_directions() -> Vec<[f64; 2]> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [h, h], [h, -h], [-h, h], [-h, -h]]
}

fn lightlike_obstruction() -> Outcome {
    let mut out = Outcome::new();
    let data = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    for file in ["h21_oracle.toml", "genus2_fuchsian.toml"] {
        let ctx = Context::build(Scenario::load(&data.join(file)).unwrap()).unwrap();
        let closed = closedness_scenario(&ctx).unwrap();
        if !closed.passed() {
            out.note(format!("{file}: closedness did not pass; not a qualifying scenario"));
            continue;
        }
        let seq = ctx.sequence.as_ref().unwrap();
        let rep = renormalization_pipeline(&seq.rhos, &seq.members, ctx.tag, PipelineParams::default()).unwrap();
        let Member::Hpq(limit) = seq.members.last().unwrap().transform(rep.renormalizers.last().unwrap()).unwrap() else {
            unreachable!("graph scenario")
        };
        let hits: Vec<[f64; 2]> = ray_directions().into_iter().filter(|d| detect_lightlike_ray(&limit, d, 1e-3)).collect();
        out.clause(hits.is_empty(), format!("{file}: closedness passes; lightlike rays in u_∞: {hits:?}"));
    }
    let model = PoincareModel::standard(2, 1).unwrap();
    let iso = SpacelikeGraph::from_fn(model, disk(33), |x| {
        let f = (2.0 * x[0] / (1.0 + x[0] * x[0] + x[1] * x[1])).asin();
        DVector::from_vec(vec![f.cos(), f.sin()])
    })
    .unwrap();
    out.clause(detect_lightlike_ray(&iso, &[1.0, 0.0], 1e-3), "synthetic isometric-ray graph: ray along e₁ detected".into());
    out
}

// -----------------------------------------------------------------------------

/// Criteria that fail for documented reasons: printed as FAIL, not fatal.
/// 7: the printed sector law has the wrong sign in front of α̇₀ (off by 81%
/// on Ţiţeica sections), and 1 − 1/c is negative for the configured c while
/// Ţiţeica has |α̇| = 1/3 exactly.
const UNATTAINABLE: &[usize] = &[7];

fn main() {
    let criteria: Vec<(usize, &str, fn() -> Outcome)> = vec![
        (1, "Poincaré identity and embed/project round trip", poincare_identity),
        (2, "domination equality at q = 0", q_zero_equality),
        (3, "domination inequality at q = 1 on solver graphs", domination_inequality),
        (4, "maximal solver oracles", maximal_oracles),
        (5, "affine-sphere solver oracles", affine_oracles),
        (6, "Hilbert metric closed form on the quadrant", hilbert_closed_form),
        (7, "sector-curve law and slope bound", sector_law),
        (8, "avoidance and isotropy of rescaled limits", avoidance_isotropy),
        (9, "renormalization pipeline on divergent conjugates", pipeline_bounded),
        (10, "lightlike obstruction", lightlike_obstruction),
    ];
    // ACCEPTANCE_STRICT=1 makes the documented failures fatal too
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1");
    let total = criteria.len();
    let mut passed = 0;
    let mut fatal = Vec::new();
    for (n, name, run) in criteria {
        let t = Instant::now();
        let o = run();
        println!("criterion {n:2}: {} — {name} ({:.1} s)", if o.pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
        for d in &o.details {
            println!("    {d}");
        }
        if !o.pass && (strict || !UNATTAINABLE.contains(&n)) {
            fatal.push(n);
        }
        passed += o.pass as usize;
    }
    println!("{passed}/{total} criteria pass; known unattainable: {UNATTAINABLE:?}");
    if !fatal.is_empty() {
        eprintln!("failed criteria: {fatal:?}");
        std::process::exit(1);
    }
}
