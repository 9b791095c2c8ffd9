//! Members of the two implemented families, as seen by a group action:
//! invariance residuals, basepoint selection and renormalization.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};

use super::Representation;
use crate::affine::{AffineHypersurface, ConvexCone};
use crate::error::{Error, Result};
use crate::forms::GroupTag;
use crate::hpq::SpacelikeGraph;

/// Samples for invariance residuals stay within this fraction of the chart.
const SAMPLE_FRACTION: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyTag {
    /// Maximal spacelike `p`-submanifolds of `H^{p,q}`, group `SO(p, q+1)`.
    MaximalHpq,
    /// Hyperbolic affine spheres centred at the origin, group `SL(p+1, R)`.
    AffineSphere,
}

impl FamilyTag {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyTag::MaximalHpq => "maximal_hpq",
            FamilyTag::AffineSphere => "affine_sphere",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "maximal_hpq" => Ok(FamilyTag::MaximalHpq),
            "affine_sphere" => Ok(FamilyTag::AffineSphere),
            _ => Err(Error::TagMismatch(format!("unknown family {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Member {
    Hpq(SpacelikeGraph),
    Affine { cone: ConvexCone, sphere: AffineHypersurface },
}

impl Member {
    pub fn tag(&self) -> FamilyTag {
        match self {
            Member::Hpq(_) => FamilyTag::MaximalHpq,
            Member::Affine { .. } => FamilyTag::AffineSphere,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Member::Hpq(g) => g.model().dim(),
            Member::Affine { cone, .. } => cone.dim(),
        }
    }

    /// The group tag acting on this family.
    pub fn group(&self) -> GroupTag {
        match self {
            Member::Hpq(g) => GroupTag::So(*g.model().form()),
            Member::Affine { cone, .. } => GroupTag::Sl(cone.dim()),
        }
    }

    /// Ambient sample points in the inner part of the chart.
    pub fn samples(&self) -> Vec<DVector<f64>> {
        match self {
            Member::Hpq(g) => {
                let lat = g.lattice();
                let r = SAMPLE_FRACTION * lat.r0();
                lat.interior_nodes().filter(|&k| lat.radius2(k) <= r * r).map(|k| g.position(k)).collect()
            }
            Member::Affine { sphere, .. } => {
                let lat = sphere.lattice();
                let r = SAMPLE_FRACTION * sphere.domain().extent();
                lat.interior_nodes()
                    .filter(|&k| lat.x(k).iter().map(|t| t * t).sum::<f64>() <= r * r)
                    .map(|k| sphere.point(k))
                    .collect()
            }
        }
    }

    /// Distance from `z` to the member along the chart fibre through `z`:
    /// the `S^q` direction for graphs, the ray direction for affine spheres.
    /// `None` if the fibre misses the sampled region.
    pub fn fibre_gap(&self, z: &DVector<f64>) -> Option<f64> {
        match self {
            Member::Hpq(g) => {
                let model = g.model();
                let lat = g.lattice();
                let (u, _) = model.project(z).ok()?;
                if u.norm() > lat.r0() - 2.0 * lat.h() {
                    return None;
                }
                let on = model.embed_unchecked(u.as_slice(), &g.sample_u(u.as_slice()));
                Some((z - on).norm())
            }
            Member::Affine { sphere, .. } => sphere.point_on_ray(z).map(|on| (z.norm() - on.norm()).abs()),
        }
    }

    /// `g M`, sampled on the same kind of lattice. For graphs, target nodes
    /// outside the image are filled by clamped extrapolation.
    pub fn transform(&self, g: &DMatrix<f64>) -> Result<Member> {
        match self {
            Member::Hpq(m) => Ok(Member::Hpq(m.resample(g, m.lattice().clone())?.graph)),
            Member::Affine { cone, sphere } => {
                let gi = g.clone().try_inverse().ok_or(Error::Degenerate("singular linear map"))?;
                let image = cone.transformed(g)?;
                let missed = Cell::new(false);
                let t = AffineHypersurface::over_cone(
                    &image,
                    sphere.lattice().n(),
                    sphere.exponent(),
                    sphere.zero_boundary(),
                    |d| match sphere.point_on_ray(&(&gi * d)) {
                        Some(x) => (g * x).norm(),
                        None => {
                            missed.set(true);
                            1.0
                        }
                    },
                )?;
                if missed.get() {
                    return Err(Error::Uncovered { count: 1 });
                }
                Ok(Member::Affine { cone: image, sphere: t })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Invariance {
    /// Largest fibre gap of `ρ(γ) x` over measured samples.
    pub residual: f64,
    pub measured: usize,
    /// Samples whose image left the chart.
    pub skipped: usize,
}

/// `max_x dist(ρ(γ) x, M)` over inner samples `x ∈ M`, with the distance
/// measured along chart fibres (an upper bound for the nearest-point distance).
pub fn invariance_residual(rho: &Representation, m: &Member, w: &[i32]) -> Result<Invariance> {
    if rho.dim() != m.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: m.ambient_dim(), got: rho.dim() });
    }
    rho.group().check_word(w)?;
    let g = rho.evaluate(w);
    let mut out = Invariance { residual: 0.0, measured: 0, skipped: 0 };
    for x in m.samples() {
        match m.fibre_gap(&(&g * x)) {
            Some(d) => {
                out.residual = out.residual.max(d);
                out.measured += 1;
            }
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

/// A member with a marked point and tangent frame there.
#[derive(Clone, Debug)]
pub struct PointedMember {
    pub member: Member,
    /// Nearest lattice node.
    pub node: usize,
    pub point: DVector<f64>,
    pub tangent: Vec<DVector<f64>>,
}

/// The family's basepoint: `Π(0, u(0))` for graphs, the point of minimal
/// Euclidean norm for affine spheres.
pub fn select_basepoint(m: &Member, tag: FamilyTag) -> Result<PointedMember> {
    if m.tag() != tag {
        return Err(Error::TagMismatch(format!("member is {}, asked for {}", m.tag().name(), tag.name())));
    }
    match m {
        Member::Hpq(g) => {
            let lat = g.lattice();
            let node = lat.center();
            if lat.radius2(node) > 0.0 {
                return Err(Error::Degenerate("lattice has no node at the origin"));
            }
            let h = lat.h();
            let tangent = (0..lat.p())
                .map(|i| {
                    let (Some(a), Some(b)) = (lat.step(node, i, 1), lat.step(node, i, -1)) else {
                        return Err(Error::NotInterior(node));
                    };
                    Ok((g.position(a) - g.position(b)) / (2.0 * h))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PointedMember { member: m.clone(), node, point: g.position(node), tangent })
        }
        Member::Affine { sphere, .. } => {
            let b = sphere.minimal_norm_basepoint()?;
            Ok(PointedMember { member: m.clone(), node: b.node, point: b.point, tangent: b.tangent })
        }
    }
}

#[derive(Clone, Debug)]
pub struct Renormalization {
    pub g: DMatrix<f64>,
    /// Re-measured distance of `(g o, g T_o M)` from the canonical position.
    pub residual: f64,
}

/// Group element taking the basepoint to the canonical point and its
/// tangent space to the canonical subspace.
///
/// Graphs: `o ↦ Π(0, f_0)`, `T_o M ↦ E`, built from a `Q`-orthonormal frame
/// `(t_1..t_p, o, n_1..n_q)`. Affine spheres: `o ↦ (1,…,1)/√(p+1)`,
/// `T_o M ↦` its orthogonal complement, the affine-metric Gram–Schmidt of
/// the given tangent frame going to a fixed orthonormal one (up to the common scale making `det g = 1`,
/// which is one on a normalized sphere). What is left free is compact in
/// both cases.
pub fn renormalize(pm: &PointedMember, tag: FamilyTag) -> Result<Renormalization> {
    if pm.member.tag() != tag {
        return Err(Error::TagMismatch(format!("member is {}, asked for {}", pm.member.tag().name(), tag.name())));
    }
    match &pm.member {
        Member::Hpq(graph) => renormalize_hpq(graph, pm),
        Member::Affine { .. } => renormalize_affine(pm),
    }
}

fn renormalize_hpq(graph: &SpacelikeGraph, pm: &PointedMember) -> Result<Renormalization> {
    let model = graph.model();
    let form = *model.form();
    let (p, d) = (model.p(), model.dim());
    let pair = |a: &DVector<f64>, b: &DVector<f64>| form.pair(a, b);
    let o = &pm.point;
    let on = pair(o, o);
    if !(on < 0.0) {
        return Err(Error::NotOnHpq(on));
    }
    let o = o / (-on).sqrt();
    let mut pos: Vec<DVector<f64>> = Vec::with_capacity(p);
    for v in &pm.tangent {
        let mut v = v + &o * pair(v, &o);
        for t in &pos {
            v -= t * pair(&v, t);
        }
        let n2 = pair(&v, &v);
        if !(n2 > 1e-10 * v.norm_squared()) {
            return Err(Error::Degenerate("tangent frame"));
        }
        pos.push(v / n2.sqrt());
    }
    let mut neg = vec![o.clone()];
    let candidates = model
        .f_basis()
        .column_iter()
        .skip(1)
        .map(|c| c.into_owned())
        .chain((0..d).map(|i| DVector::from_fn(d, |r, _| if r == i { 1.0 } else { 0.0 })))
        .collect::<Vec<_>>();
    for c in candidates {
        if neg.len() == d - p {
            break;
        }
        let mut v = c;
        for t in &pos {
            v -= t * pair(&v, t);
        }
        for n in &neg {
            v += n * pair(&v, n);
        }
        let n2 = pair(&v, &v);
        if n2 < -1e-6 * v.norm_squared() {
            neg.push(v / (-n2).sqrt());
        }
    }
    if neg.len() != d - p {
        return Err(Error::Degenerate("normal frame"));
    }
    let cols: Vec<DVector<f64>> = pos.iter().chain(neg.iter()).cloned().collect();
    let mut frame = DMatrix::from_columns(&cols);
    let mut target = model.e_basis().clone().resize_horizontally(d, 0.0);
    target.view_mut((0, p), (d, d - p)).copy_from(model.f_basis());
    let j = form.signature_matrix();
    if target.determinant() * frame.determinant() < 0.0 {
        // flip a vector that is neither o nor needed for the tangent span
        let c = if d - p > 1 { d - 1 } else { p - 1 };
        frame.column_mut(c).neg_mut();
    }
    let g = &target * &j * frame.transpose() * &j;
    let f0 = model.f_basis().column(0).into_owned();
    let mut residual = (&g * &pm.point / (-on).sqrt() - &f0).amax();
    for t in &pos {
        let gt = &g * t;
        for fj in model.f_basis().column_iter() {
            residual = residual.max(pair(&gt, &fj.into_owned()).abs());
        }
    }
    Ok(Renormalization { g, residual })
}

fn renormalize_affine(pm: &PointedMember) -> Result<Renormalization> {
    let d = pm.point.len();
    let p = d - 1;
    let cstar = DVector::from_element(d, 1.0 / (d as f64).sqrt());
    // orthonormal basis of cstar^⊥ from the coordinate axes
    let mut b: Vec<DVector<f64>> = Vec::with_capacity(p);
    for i in 0..d {
        if b.len() == p {
            break;
        }
        let mut v = DVector::from_fn(d, |r, _| if r == i { 1.0 } else { 0.0 });
        v -= &cstar * cstar.dot(&v);
        for u in &b {
            v -= u * u.dot(&v);
        }
        if v.norm() > 1e-6 {
            b.push(v.normalize());
        }
    }
    let Member::Affine { sphere, .. } = &pm.member else { unreachable!("affine member") };
    let y = sphere.frame().chart(&pm.point).ok_or(Error::OutsideCone)?;
    // the affine metric comes in the chart basis ∂_i X; rewrite it in the
    // basis of the given tangent vectors
    let chart_metric = sphere.affine_metric_at(&y)?;
    let ej = sphere.embedding_at(&y)?;
    let mut chart_basis = DMatrix::zeros(d, d);
    chart_basis.set_column(0, &ej.x);
    for (i, t) in ej.dx.iter().enumerate() {
        chart_basis.set_column(i + 1, t);
    }
    let chart_lu = chart_basis.lu();
    let mut change = DMatrix::zeros(p, p);
    for (j, t) in pm.tangent.iter().enumerate() {
        let c = chart_lu.solve(t).ok_or(Error::Degenerate("chart frame"))?;
        change.set_column(j, &c.rows(1, p));
    }
    let metric = change.transpose() * chart_metric * change;
    let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &metric * b)[0];
    // Gram–Schmidt of the given frame itself, so that pushing (M, o) and its
    // frame by any g leaves the renormalized member unchanged
    let mut coords: Vec<DVector<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let mut a = DVector::zeros(p);
        a[j] = 1.0;
        for c in &coords {
            a -= c * ip(c, &a);
        }
        let n2 = ip(&a, &a);
        if !(n2 > 1e-20) {
            return Err(Error::Degenerate("tangent frame"));
        }
        coords.push(a / n2.sqrt());
    }
    let ts: Vec<DVector<f64>> = coords
        .iter()
        .map(|a| pm.tangent.iter().zip(a.iter()).fold(DVector::zeros(d), |acc, (t, c)| acc + t * *c))
        .collect();
    let mut target = DMatrix::zeros(d, d);
    target.set_column(0, &cstar);
    for (i, v) in b.iter().enumerate() {
        target.set_column(i + 1, v);
    }
    let mut frame = DMatrix::zeros(d, d);
    frame.set_column(0, &pm.point);
    for (i, t) in ts.iter().enumerate() {
        frame.set_column(i + 1, t);
    }
    let mut ratio = target.determinant() / frame.determinant();
    if ratio < 0.0 {
        frame.column_mut(p).neg_mut();
        ratio = -ratio;
    }
    let lambda = ratio.powf(1.0 / p as f64);
    for i in 1..d {
        frame.column_mut(i).scale_mut(lambda);
    }
    let g = &target * frame.try_inverse().ok_or(Error::Degenerate("tangent frame"))?;
    let mut residual = (&g * &pm.point - &cstar).amax().max((g.determinant() - 1.0).abs());
    for t in &pm.tangent {
        let gt = &g * t;
        residual = residual.max(gt.dot(&cstar).abs() / gt.norm());
    }
    Ok(Renormalization { g, residual })
}
