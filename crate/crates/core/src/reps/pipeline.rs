//! Conjugated-sequence analysis: renormalize a sequence of invariant pointed
//! members, conjugate the representations accordingly and watch the result
//! stay bounded; displacement growth and properness probes.

use nalgebra::{DMatrix, DVector};

use super::member::{invariance_residual, renormalize, select_basepoint, FamilyTag, Member, PointedMember};
use super::{ball, Representation, Word};
use crate::affine::{domination_function, Basepoint};
use crate::error::{Error, Result};
use crate::hpq::pseudo_distance;

/// Probe flags: large norm with small displacement.
pub const PROBE_NORM: f64 = 1e3;
pub const PROBE_DISPLACEMENT: f64 = 1e-3;

#[derive(Clone, Copy, Debug)]
pub struct PipelineParams {
    /// Fraction of the sequence forming the tail in which convergence is judged.
    pub window_fraction: f64,
    /// Cauchy tolerance on generator images, relative to their size.
    pub cauchy_tol: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self { window_fraction: 1.0 / 3.0, cauchy_tol: 1e-3 }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub renormalizers: Vec<DMatrix<f64>>,
    pub renormalization_residuals: Vec<f64>,
    /// `ρ̄_n = g_n ρ_n g_n⁻¹`.
    pub conjugated: Vec<Representation>,
    /// Largest generator norm of each `ρ̄_n`.
    pub generator_norms: Vec<f64>,
    /// First index of the tail window.
    pub window_start: usize,
    pub cauchy_gap: f64,
    pub converged: bool,
    /// Last term of the tail.
    pub limit: Representation,
    /// `g_N M_N` for the last term.
    pub limit_member: Member,
    /// Largest input invariance residual over the tail and the generators.
    pub input_floor: f64,
    /// Invariance residual of the limit on the limit member.
    pub limit_residual: f64,
    /// Domination function at `ρ_n(s) o_n`, per term and generator.
    pub displacements: Vec<Vec<f64>>,
    pub displacement_bound: f64,
}

/// The domination function of the pointed member at `x`.
pub fn domination_value(pm: &PointedMember, x: &DVector<f64>) -> Result<f64> {
    match &pm.member {
        Member::Hpq(g) => Ok(pseudo_distance(g.model().form(), &pm.point, x)),
        Member::Affine { sphere, .. } => {
            let y = sphere.frame().chart(&pm.point).ok_or(Error::OutsideCone)?;
            let o = Basepoint { y, node: pm.node, point: pm.point.clone(), tangent: pm.tangent.clone() };
            domination_function(sphere, &o, x)
        }
    }
}

/// Select basepoints, renormalize, conjugate, and extract a limit from the
/// best-converging tail.
pub fn renormalization_pipeline(
    rhos: &[Representation],
    members: &[Member],
    tag: FamilyTag,
    params: PipelineParams,
) -> Result<PipelineReport> {
    if rhos.is_empty() || rhos.len() != members.len() {
        return Err(Error::InvalidParameter(format!(
            "{} representations for {} members",
            rhos.len(),
            members.len()
        )));
    }
    if !(params.window_fraction > 0.0 && params.window_fraction <= 1.0 && params.cauchy_tol > 0.0) {
        return Err(Error::InvalidParameter("pipeline window and tolerance must be positive".into()));
    }
    let n = rhos.len();
    let gens: Vec<Word> = (0..rhos[0].group().rank()).map(|i| vec![i as i32 + 1]).collect();
    let mut out_g = Vec::with_capacity(n);
    let mut out_res = Vec::with_capacity(n);
    let mut conj = Vec::with_capacity(n);
    let mut norms = Vec::with_capacity(n);
    let mut disp = Vec::with_capacity(n);
    let mut pointed = Vec::with_capacity(n);
    for (rho, m) in rhos.iter().zip(members) {
        let pm = select_basepoint(m, tag)?;
        let r = renormalize(&pm, tag)?;
        let bar = rho.conjugate(&r.g)?;
        norms.push(bar.generator_norm());
        disp.push(
            gens.iter().map(|w| domination_value(&pm, &(rho.evaluate(w) * &pm.point))).collect::<Result<Vec<_>>>()?,
        );
        out_g.push(r.g);
        out_res.push(r.residual);
        conj.push(bar);
        pointed.push(pm);
    }
    let len = ((n as f64 * params.window_fraction).ceil() as usize).clamp(1, n);
    let start = n - len;
    let mut gap = 0.0f64;
    for i in start..n {
        for j in (i + 1)..n {
            let scale = conj[i].generator_norm().max(conj[j].generator_norm()).max(1.0);
            gap = gap.max(conj[i].distance(&conj[j]) / scale);
        }
    }
    let mut floor = 0.0f64;
    for i in start..n {
        for w in &gens {
            floor = floor.max(invariance_residual(&rhos[i], &members[i], w)?.residual);
        }
    }
    let limit = conj[n - 1].clone();
    let limit_member = members[n - 1].transform(&out_g[n - 1])?;
    let mut limit_residual = 0.0f64;
    for w in &gens {
        limit_residual = limit_residual.max(invariance_residual(&limit, &limit_member, w)?.residual);
    }
    let bound = disp.iter().flatten().copied().fold(0.0, f64::max);
    Ok(PipelineReport {
        renormalizers: out_g,
        renormalization_residuals: out_res,
        conjugated: conj,
        generator_norms: norms,
        window_start: start,
        cauchy_gap: gap,
        converged: gap <= params.cauchy_tol,
        limit,
        limit_member,
        input_floor: floor,
        limit_residual,
        displacements: disp,
        displacement_bound: bound,
    })
}

/// Where `x` lands on the member's lattice, if inside the chart.
fn locate(m: &Member, x: &DVector<f64>) -> Option<usize> {
    match m {
        Member::Hpq(g) => {
            let lat = g.lattice();
            let (u, _) = g.model().project(x).ok()?;
            (u.norm() <= lat.r0() - lat.h()).then(|| lat.nearest(u.as_slice()))
        }
        Member::Affine { sphere, .. } => {
            let y = sphere.frame().chart(x)?;
            crate::jets::ConvexDomain::contains(sphere.domain(), &y).then(|| sphere.lattice().nearest(&y))
        }
    }
}

fn distances(m: &Member, node: usize) -> Result<Vec<f64>> {
    match m {
        Member::Hpq(g) => g.distances_from(node),
        Member::Affine { sphere, .. } => sphere.intrinsic_distances(node),
    }
}

/// Lower bound for `d_M(a, b)` off the chart, where one is available: on
/// graphs `d_M(a, b) ≥ d_{(M,a)}(b)`, the pseudo-distance.
fn off_chart(m: &Member, a: &DVector<f64>, b: &DVector<f64>) -> Option<f64> {
    match m {
        Member::Hpq(g) => Some(pseudo_distance(g.model().form(), a, b)),
        Member::Affine { .. } => None,
    }
}

#[derive(Clone, Debug)]
pub struct DisplacementFit {
    /// Largest `κ` with `d_M(o, ρ(γ) o) ≥ κ |γ| - 1/κ` on every sample;
    /// `+∞` when no nontrivial word was measured.
    pub kappa: f64,
    /// `(word, length, distance)`.
    pub samples: Vec<(Word, usize, f64)>,
    /// Samples off the chart measured by the pseudo-distance lower bound.
    pub lower_bounded: usize,
    /// Samples that could not be measured at all.
    pub skipped: usize,
}

pub fn displacement_fit(rho: &Representation, pm: &PointedMember, radius: usize) -> Result<DisplacementFit> {
    if rho.dim() != pm.member.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: pm.member.ambient_dim(), got: rho.dim() });
    }
    let dist = distances(&pm.member, pm.node)?;
    let mut fit = DisplacementFit { kappa: f64::INFINITY, samples: Vec::new(), lower_bounded: 0, skipped: 0 };
    for w in ball(rho.group().rank(), radius) {
        let x = rho.evaluate(&w) * &pm.point;
        let d = match locate(&pm.member, &x) {
            Some(k) if dist[k].is_finite() => dist[k],
            _ => match off_chart(&pm.member, &pm.point, &x) {
                Some(d) => {
                    fit.lower_bounded += 1;
                    d
                }
                None => {
                    fit.skipped += 1;
                    continue;
                }
            },
        };
        let l = w.len();
        if l > 0 {
            let lf = l as f64;
            fit.kappa = fit.kappa.min((d + (d * d + 4.0 * lf).sqrt()) / (2.0 * lf));
        }
        fit.samples.push((w, l, d));
    }
    Ok(fit)
}

#[derive(Clone, Debug)]
pub struct ProbeSample {
    pub norm: f64,
    /// `sup_x d_M(x, g x)` over the probe points.
    pub displacement: f64,
    pub measured: usize,
}

#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub samples: Vec<ProbeSample>,
    /// Indices with norm above `PROBE_NORM` and displacement below
    /// `PROBE_DISPLACEMENT`.
    pub flagged: Vec<usize>,
}

/// Pairs `|g|` with the displacement of `g` on a few points around the basepoint.
pub fn stabilizer_properness_probe(pm: &PointedMember, samples: &[DMatrix<f64>]) -> Result<ProbeReport> {
    let m = &pm.member;
    let d = m.ambient_dim();
    let (lat, reach) = match m {
        Member::Hpq(g) => (g.lattice().clone(), 0.3 * g.lattice().r0()),
        Member::Affine { sphere, .. } => (sphere.lattice().clone(), 0.3 * sphere.domain().extent()),
    };
    let p = lat.p();
    let base = lat.x(pm.node).to_vec();
    let mut nodes = vec![pm.node];
    for i in 0..p {
        for s in [-1.0, 1.0] {
            let mut y = base.clone();
            y[i] += s * reach;
            let k = lat.nearest(&y);
            if !nodes.contains(&k) {
                nodes.push(k);
            }
        }
    }
    let pts: Vec<DVector<f64>> = nodes
        .iter()
        .map(|&k| match m {
            Member::Hpq(g) => g.position(k),
            Member::Affine { sphere, .. } => sphere.point(k),
        })
        .collect();
    let dists = nodes.iter().map(|&k| distances(m, k)).collect::<Result<Vec<_>>>()?;
    let mut report = ProbeReport { samples: Vec::with_capacity(samples.len()), flagged: Vec::new() };
    for (i, g) in samples.iter().enumerate() {
        if g.nrows() != d || g.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: g.nrows() });
        }
        let mut s = ProbeSample { norm: g.norm(), displacement: 0.0, measured: 0 };
        for (x, dist) in pts.iter().zip(&dists) {
            let gx = g * x;
            let v = match locate(m, &gx) {
                Some(k) if dist[k].is_finite() => Some(dist[k]),
                _ => off_chart(m, x, &gx),
            };
            if let Some(v) = v {
                s.displacement = s.displacement.max(v);
                s.measured += 1;
            }
        }
        if s.norm > PROBE_NORM && s.displacement < PROBE_DISPLACEMENT {
            report.flagged.push(i);
        }
        report.samples.push(s);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{boost, GroupTag, QuadraticForm};
    use crate::hpq::{PoincareModel, SpacelikeGraph};
    use crate::lattice::DiskLattice;
    use crate::reps::{genus_two, triangle_237, FinGenGroup};
    use std::sync::Arc;

    fn h2(q: usize, n: usize) -> SpacelikeGraph {
        let m = PoincareModel::standard(2, q).unwrap();
        let lat = Arc::new(DiskLattice::new(2, n, 0.95).unwrap());
        let mut v0 = DVector::zeros(q + 1);
        v0[0] = 1.0;
        SpacelikeGraph::constant(m, lat, &v0).unwrap()
    }

    fn so(p: usize, q: usize) -> GroupTag {
        GroupTag::So(QuadraticForm::hpq(p, q).unwrap())
    }

    #[test]
    fn constant_sequence_keeps_the_representation() {
        let rho = genus_two().block_embed(so(2, 1)).unwrap();
        let m = Member::Hpq(h2(1, 17));
        let rep = renormalization_pipeline(&vec![rho.clone(); 3], &vec![m; 3], FamilyTag::MaximalHpq, PipelineParams::default())
            .unwrap();
        assert!(rep.converged && rep.cauchy_gap == 0.0);
        assert!(rep.limit.distance(&rho) < 1e-12);
        assert!(rep.limit_residual < 1e-10);
    }

    #[test]
    fn conjugated_sequence_is_brought_back() {
        let rho = genus_two().block_embed(so(2, 1)).unwrap();
        let base = h2(1, 33);
        let (mut rhos, mut members) = (Vec::new(), Vec::new());
        for n in 1..=6 {
            let h = boost(4, 0, 3, 0.5 * n as f64);
            rhos.push(rho.conjugate(&h).unwrap());
            let m = SpacelikeGraph::totally_geodesic(base.model().clone(), base.lattice().clone(), &h).unwrap();
            members.push(Member::Hpq(m));
        }
        let rep = renormalization_pipeline(&rhos, &members, FamilyTag::MaximalHpq, PipelineParams::default()).unwrap();
        assert!(rhos[5].generator_norm() > 5.0 * rhos[0].generator_norm());
        let cap = 10.0 * rep.generator_norms[0];
        assert!(rep.generator_norms.iter().all(|&g| g <= cap), "{:?}", rep.generator_norms);
        assert!(rep.limit_residual <= 2.0 * rep.input_floor, "{} vs {}", rep.limit_residual, rep.input_floor);
        assert!(rep.displacement_bound.is_finite());
    }

    #[test]
    fn displacement_examples() {
        let pm = select_basepoint(&Member::Hpq(h2(0, 33)), FamilyTag::MaximalHpq).unwrap();
        let rho = genus_two();
        let zero = displacement_fit(&rho, &pm, 0).unwrap();
        assert_eq!(zero.kappa, f64::INFINITY);
        let fit = displacement_fit(&rho, &pm, 3).unwrap();
        assert!(fit.kappa > 0.1, "{}", fit.kappa);
        let tri = displacement_fit(&triangle_237(), &pm, 4).unwrap();
        assert!(tri.kappa > 0.0 && tri.kappa.is_finite());

        // exp of a nilpotent element of so(2,1): parabolic
        let parabolic = DMatrix::from_row_slice(3, 3, &[0.5, -1.0, -0.5, 1.0, 1.0, 1.0, 0.5, 1.0, 1.5]);
        let group = FinGenGroup::free(1).unwrap();
        let rho = Representation::new(group, so(2, 0), vec![parabolic]).unwrap();
        let k: Vec<f64> = [2, 8, 32].iter().map(|&n| displacement_fit(&rho, &pm, n).unwrap().kappa).collect();
        assert!(k[0] > k[1] && k[1] > k[2] && k[2] < 0.5 * k[0], "{k:?}");
    }

    #[test]
    fn probe_examples() {
        let pm = select_basepoint(&Member::Hpq(h2(1, 33)), FamilyTag::MaximalHpq).unwrap();
        let mut gs = vec![DMatrix::identity(4, 4)];
        gs.extend([0.5, 1.0, 2.0, 4.0, 8.0].iter().map(|&t| boost(4, 0, 2, t)));
        let r = stabilizer_properness_probe(&pm, &gs).unwrap();
        assert_eq!(r.samples[0].displacement, 0.0);
        assert!((r.samples[0].norm - 2.0).abs() < 1e-15);
        let d: Vec<f64> = r.samples.iter().map(|s| s.displacement).collect();
        assert!(d.windows(2).all(|w| w[1] > w[0]), "{d:?}");
        assert!(r.flagged.is_empty());
    }
}
