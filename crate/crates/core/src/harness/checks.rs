use nalgebra::{DMatrix, DVector};

use super::{from_rows, rows, Clause, Context, Margin, Property, PropertyReport, Witness};
use crate::affine::{affine_domination_check, benoist_hulin_gap, domination_function, Basepoint};
use crate::error::{Error, Result};
use crate::forms::{
    avoidance_margin, is_unbounded, isotropy_defect, kernel_and_image, rescaled_limit, GroupTag, QuadraticForm,
};
use crate::hpq::{detect_lightlike_ray, pointed_c2_compare, pseudo_distance, PointedSubmanifold, SpacelikeGraph};
use crate::lattice::Lattice;
use crate::reps::{
    invariance_residual, renormalize, select_basepoint, renormalization_pipeline, Member, PipelineParams, PipelineReport,
    PointedMember,
};

const SALT_INVARIANCE: u64 = 1;
const SALT_AVOIDANCE: u64 = 3;
const SALT_DOMINATION: u64 = 4;

/// Powers in the avoidance sequences; `e^20` clears the unboundedness threshold.
const AVOIDANCE_STEPS: usize = 20;
/// Relative singular-value cutoff for the rank of a rescaled limit; finite
/// powers leave spurious singular values of order `e^{-steps}`.
const RANK_CUTOFF: f64 = 1e-6;
const AVOIDANCE_RAPIDITY: f64 = 1.0;
/// Pushes `h^n (M, o)` for the compactness recipe.
const PUSH_STEPS: usize = 6;
const PUSH_RAPIDITY: f64 = 0.5;
/// Intrinsic radius of the pointed comparison ball.
const C2_RADIUS: f64 = 1.0;
/// Nodes sampled per member for pointwise margins.
const NODE_SAMPLES: usize = 24;

/// Recomputes the margin a witness stands for.
pub fn replay(ctx: &Context, w: &Witness) -> Result<f64> {
    match w {
        Witness::TransformedResidual { member, g } => transformed_residual(ctx, *member, &from_rows(g)?),
        Witness::TransformedMetric { member, g } => transformed_metric(ctx, *member, &from_rows(g)?),
        Witness::PushedGap { member, g } => pushed_gap(ctx, *member, &from_rows(g)?),
        Witness::SequenceGap { step } => sequence_gap(ctx, &pipeline(ctx)?, *step),
        Witness::Escape { member, phi } => escape(ctx, *member, &from_rows(phi)?),
        Witness::Isotropy { phi } => isotropy(ctx, &from_rows(phi)?),
        Witness::Equivariance { member, g, node } => equivariance(ctx, *member, &from_rows(g)?, *node),
        Witness::Inequality { member, node, clause } => {
            Ok(inequality_excesses(ctx, *member, &[*node])?.into_iter().find(|e| e.0 == *clause).map_or(f64::NAN, |e| e.2))
        }
        Witness::Displacement { generator } => {
            let rep = pipeline(ctx)?;
            Ok(running_sup_excess(&column(&rep, *generator)))
        }
        Witness::NormRatio => Ok(norm_ratio(&pipeline(ctx)?)),
        Witness::BaseInvariance { generator } => base_invariance(ctx, *generator),
        Witness::LimitInvariance => {
            let rep = pipeline(ctx)?;
            Ok(rep.limit_residual)
        }
        Witness::UniformGap => uniform_gap(ctx, &pipeline(ctx)?),
        Witness::LightlikeRay { direction } => lightlike(ctx, &pipeline(ctx)?, direction),
    }
}

/// About `NODE_SAMPLES` interior nodes, evenly strided.
fn sample_nodes(m: &Member) -> Vec<usize> {
    let lat = match m {
        Member::Hpq(g) => g.lattice(),
        Member::Affine { sphere, .. } => sphere.lattice(),
    };
    let all: Vec<usize> = lat.interior_nodes().collect();
    let stride = (all.len() / NODE_SAMPLES).max(1);
    all.into_iter().step_by(stride).collect()
}

// ---- invariance ----------------------------------------------------------

/// Defining residual of `g M`: the maximality residual of the transformed
/// immersion, or the worst affine-normal angle of the transformed sphere.
fn transformed_residual(ctx: &Context, i: usize, g: &DMatrix<f64>) -> Result<f64> {
    match &ctx.members[i] {
        Member::Hpq(m) => {
            let pos: Vec<DVector<f64>> = m.positions().iter().map(|x| g * x).collect();
            let mut worst = 0.0f64;
            for k in m.lattice().interior_nodes() {
                worst = worst.max(m.mean_curvature_cached(k, Some(&pos))?.residual);
            }
            Ok(worst)
        }
        member @ Member::Affine { .. } => match member.transform(g)? {
            Member::Affine { sphere, .. } => Ok(sphere.is_affine_sphere(ctx.scenario.tolerances.sphere_angle)?.max_angle),
            Member::Hpq(_) => unreachable!(),
        },
    }
}

/// Chart metric from central differences of node positions.
fn chart_metric(lat: &Lattice, form: &QuadraticForm, pos: &[DVector<f64>], k: usize) -> Option<DMatrix<f64>> {
    let p = lat.p();
    let h = lat.h();
    let d: Vec<DVector<f64>> = (0..p)
        .map(|i| Some((&pos[lat.step(k, i, 1)?] - &pos[lat.step(k, i, -1)?]) / (2.0 * h)))
        .collect::<Option<_>>()?;
    Some(DMatrix::from_fn(p, p, |a, b| form.pair(&d[a], &d[b])))
}

/// Disagreement of the metrics of `M` and `g M` at corresponding points:
/// chart metrics for graphs, the relative gap between the affine metric of
/// `M` and the pull-back of that of `g M` for affine spheres.
fn transformed_metric(ctx: &Context, i: usize, g: &DMatrix<f64>) -> Result<f64> {
    match &ctx.members[i] {
        Member::Hpq(m) => {
            let form = *m.model().form();
            let pos = m.positions();
            let gpos: Vec<DVector<f64>> = pos.iter().map(|x| g * x).collect();
            let lat = m.lattice();
            let mut worst = 0.0f64;
            for k in lat.interior_nodes() {
                if let (Some(a), Some(b)) = (chart_metric(lat, &form, &pos, k), chart_metric(lat, &form, &gpos, k)) {
                    worst = worst.max((a - b).amax());
                }
            }
            Ok(worst)
        }
        member @ Member::Affine { sphere, .. } => {
            let Member::Affine { sphere: image, .. } = member.transform(g)? else { unreachable!() };
            let p = sphere.p();
            let mut worst = 0.0f64;
            for k in sample_nodes(member) {
                let y = sphere.lattice().x(k).to_vec();
                let ej = sphere.embedding_at(&y)?;
                let gx = g * &ej.x;
                let Some(y2) = image.frame().chart(&gx) else { continue };
                if !crate::jets::ConvexDomain::contains(image.domain(), &y2) {
                    continue;
                }
                let ej2 = image.embedding_at(&y2)?;
                let mut basis = DMatrix::zeros(p + 1, p + 1);
                basis.set_column(0, &ej2.x);
                for (i, t) in ej2.dx.iter().enumerate() {
                    basis.set_column(i + 1, t);
                }
                let lu = basis.lu();
                let mut change = DMatrix::zeros(p, p);
                for (j, t) in ej.dx.iter().enumerate() {
                    let c = lu.solve(&(g * t)).ok_or(Error::Degenerate("chart frame"))?;
                    change.set_column(j, &c.rows(1, p));
                }
                let pulled = change.transpose() * image.affine_metric_at(&y2)? * change;
                let own = sphere.affine_metric_at(&y)?;
                worst = worst.max((pulled - &own).amax() / own.amax());
            }
            Ok(worst)
        }
    }
}

/// Property 1: random `g` keep members in the family with the same metric.
pub fn check_invariance(ctx: &Context) -> Result<PropertyReport> {
    let mut rep = PropertyReport::new(Property::Invariance);
    let mut gs = vec![DMatrix::identity(ctx.dim(), ctx.dim())];
    gs.extend(ctx.random_elements(SALT_INVARIANCE, ctx.scenario.random_elements));
    let t = &ctx.scenario.tolerances;
    for (i, m) in ctx.members.iter().enumerate() {
        let (name, limit) = match m {
            Member::Hpq(_) => ("maximality residual of g M", t.residual),
            Member::Affine { .. } => ("affine normal angle of g M", t.sphere_angle),
        };
        let eps = ctx.eps_grid(m);
        for g in &gs {
            let w = Witness::TransformedResidual { member: i, g: rows(g) };
            rep.worst(Margin::at_most(name, replay(ctx, &w)?, limit, Some(w)));
            let w = Witness::TransformedMetric { member: i, g: rows(g) };
            rep.worst(Margin::at_most("metric disagreement", replay(ctx, &w)?, eps, Some(w)));
        }
    }
    Ok(rep)
}

// ---- compactness ---------------------------------------------------------

/// `R M`, with `R` the renormalizer of the pointed member `(g M, g o)`.
fn renormalized_push(ctx: &Context, i: usize, g: &DMatrix<f64>) -> Result<Member> {
    let m = &ctx.members[i];
    let pm = select_basepoint(m, ctx.tag)?;
    // graphs only need the model from the carrier; affine spheres need the
    // affine metric of g M at g o
    let carrier = match m {
        Member::Hpq(_) => m.clone(),
        Member::Affine { .. } => m.transform(g)?,
    };
    let pushed = PointedMember {
        member: carrier,
        node: pm.node,
        point: g * &pm.point,
        tangent: pm.tangent.iter().map(|t| g * t).collect(),
    };
    let r = renormalize(&pushed, ctx.tag)?;
    m.transform(&(r.g * g))
}

/// Gap between two renormalized members: the `C²` gap of the chart metrics
/// over the pointed ball for graphs, the relative radial gap for spheres.
fn member_gap(a: &Member, b: &Member) -> Result<f64> {
    match (a, b) {
        (Member::Hpq(x), Member::Hpq(y)) => {
            let c = x.lattice().center();
            let cmp = pointed_c2_compare(
                &PointedSubmanifold::new(x.clone(), c)?,
                &PointedSubmanifold::new(y.clone(), c)?,
                C2_RADIUS,
            )?;
            Ok(cmp.metric_c2_gap.max(cmp.embedding_gap))
        }
        (Member::Affine { .. }, Member::Affine { .. }) => {
            let mut worst = 0.0f64;
            for x in a.samples() {
                if let Some(d) = b.fibre_gap(&x) {
                    worst = worst.max(d / x.norm());
                }
            }
            Ok(worst)
        }
        _ => Err(Error::TagMismatch("members of different families".into())),
    }
}

fn pushed_gap(ctx: &Context, i: usize, g: &DMatrix<f64>) -> Result<f64> {
    let id = DMatrix::identity(ctx.dim(), ctx.dim());
    member_gap(&renormalized_push(ctx, i, &id)?, &renormalized_push(ctx, i, g)?)
}

fn sequence_gap(ctx: &Context, rep: &PipelineReport, step: usize) -> Result<f64> {
    let seq = ctx.sequence.as_ref().ok_or_else(|| Error::InvalidParameter("no sequence".into()))?;
    let n = seq.members.len();
    let last = seq.members[n - 1].transform(&rep.renormalizers[n - 1])?;
    member_gap(&seq.members[step].transform(&rep.renormalizers[step])?, &last)
}

/// Property 2: divergent pushes of a pointed member renormalize back.
pub fn check_compactness(ctx: &Context) -> Result<PropertyReport> {
    let mut rep = PropertyReport::new(Property::Compactness);
    let tol = ctx.scenario.tolerances.compactness;
    let window = PUSH_STEPS - PUSH_STEPS / 3;
    for i in 0..ctx.members.len() {
        let mut gaps = Vec::with_capacity(PUSH_STEPS);
        for n in 1..=PUSH_STEPS {
            let g = ctx.divergent(PUSH_RAPIDITY * n as f64);
            let w = Witness::PushedGap { member: i, g: rows(&g) };
            let gap = replay(ctx, &w)?;
            gaps.push(gap);
            if n > window {
                rep.worst(Margin::at_most("renormalized push gap (last third)", gap, tol, Some(w)));
            }
        }
        rep.worst(Margin::at_most("push gap growth over the last third", trend(&gaps[window - 1..]), tol, None).informational());
    }
    if let Some(seq) = &ctx.sequence {
        let n = seq.members.len();
        let start = n - (n / 3).max(1);
        let mut gaps = Vec::new();
        for step in start..n - 1 {
            let w = Witness::SequenceGap { step };
            let gap = replay(ctx, &w)?;
            gaps.push(gap);
            rep.worst(Margin::at_most("renormalized sequence gap to the last term", gap, tol, Some(w)));
        }
        if gaps.len() > 1 {
            rep.worst(Margin::at_most("sequence gap growth", trend(&gaps), tol, None).informational());
        }
    }
    rep.notes.push("only the generated push and sequence recipes are tested, not arbitrary sequences".into());
    Ok(rep)
}

/// Largest increase between consecutive entries.
fn trend(xs: &[f64]) -> f64 {
    xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

// ---- avoidance -----------------------------------------------------------

fn escape(ctx: &Context, i: usize, phi: &DMatrix<f64>) -> Result<f64> {
    let phi = crate::forms::ProjectiveMatrix::new(phi.clone())?;
    Ok(avoidance_margin(&phi, &ctx.members[i].samples()))
}

fn isotropy(ctx: &Context, phi: &DMatrix<f64>) -> Result<f64> {
    let GroupTag::So(form) = ctx.group() else {
        return Err(Error::TagMismatch("isotropy needs an invariant form".into()));
    };
    let phi = crate::forms::ProjectiveMatrix::new(phi.clone())?;
    let ki = kernel_and_image(&phi.transpose(), RANK_CUTOFF);
    Ok(isotropy_defect(&ki.image, &form))
}

/// Property 3: rescaled limits of divergent sequences never swallow a member.
pub fn check_avoidance(ctx: &Context) -> Result<PropertyReport> {
    let mut rep = PropertyReport::new(Property::Avoidance);
    let t = &ctx.scenario.tolerances;
    let d = ctx.dim();
    let mut conj = vec![DMatrix::identity(d, d)];
    conj.extend(ctx.random_elements(SALT_AVOIDANCE, ctx.scenario.random_elements));
    // the identity sequence has no boundary point
    let bounded = vec![DMatrix::<f64>::identity(d, d); AVOIDANCE_STEPS];
    if !is_unbounded(&bounded) {
        rep.notes.push("identity sequence: bounded, no rescaled limit (vacuous)".into());
    }
    for r in &conj {
        let ri = r.clone().try_inverse().ok_or(Error::Degenerate("singular conjugator"))?;
        let seq: Vec<DMatrix<f64>> =
            (1..=AVOIDANCE_STEPS).map(|n| r * ctx.divergent(AVOIDANCE_RAPIDITY * n as f64) * &ri).collect();
        if !is_unbounded(&seq) {
            rep.notes.push("a generated sequence stayed bounded; skipped".into());
            continue;
        }
        let phi = rescaled_limit(&seq, 1e-6)?.limit.matrix().clone();
        for i in 0..ctx.members.len() {
            let w = Witness::Escape { member: i, phi: rows(&phi) };
            rep.worst(Margin::at_least("escape from Ker φ", replay(ctx, &w)?, t.avoidance, Some(w)));
        }
        if let GroupTag::So(_) = ctx.group() {
            let w = Witness::Isotropy { phi: rows(&phi) };
            rep.worst(Margin::at_most("Gram defect of Im φᵗ", replay(ctx, &w)?, t.isotropy, Some(w)));
        }
    }
    Ok(rep)
}

// ---- domination ----------------------------------------------------------

fn affine_basepoint(m: &Member) -> Result<Basepoint> {
    match m {
        Member::Affine { sphere, .. } => sphere.minimal_norm_basepoint(),
        Member::Hpq(_) => Err(Error::TagMismatch("not an affine sphere".into())),
    }
}

/// `|d_{g(M,o)}(g x) - d_{(M,o)}(x)| / max(1, d_{(M,o)}(x))`.
fn equivariance(ctx: &Context, i: usize, g: &DMatrix<f64>, node: usize) -> Result<f64> {
    let m = &ctx.members[i];
    let (before, after) = match m {
        Member::Hpq(graph) => {
            let form = graph.model().form();
            let o = graph.position(graph.lattice().center());
            let x = graph.position(node);
            (pseudo_distance(form, &o, &x), pseudo_distance(form, &(g * &o), &(g * &x)))
        }
        Member::Affine { sphere, .. } => {
            let o = affine_basepoint(m)?;
            let go = Basepoint {
                y: o.y.clone(),
                node: o.node,
                point: g * &o.point,
                tangent: o.tangent.iter().map(|t| g * t).collect(),
            };
            let x = sphere.point(node);
            (domination_function(sphere, &o, &x)?, domination_function(sphere, &go, &(g * x))?)
        }
    };
    Ok((after - before).abs() / before.abs().max(1.0))
}

/// Comparison constant for affine domination: configured, or 1.1 times the
/// measured ratio `d_M / h_M` over pairs from the basepoint.
fn comparison_constant(ctx: &Context, i: usize) -> Result<f64> {
    if let Some(c) = ctx.scenario.tolerances.comparison {
        return Ok(c);
    }
    let Member::Affine { cone, sphere } = &ctx.members[i] else {
        return Err(Error::TagMismatch("not an affine sphere".into()));
    };
    let o = sphere.minimal_norm_basepoint()?;
    let pairs: Vec<(usize, usize)> = sphere.lattice().interior_nodes().map(|k| (o.node, k)).collect();
    Ok(1.1 * benoist_hulin_gap(sphere, cone, &pairs)?.c_hat)
}

/// Excesses of every clause at the given nodes: `(clause, node, excess)`.
fn inequality_excesses(ctx: &Context, i: usize, nodes: &[usize]) -> Result<Vec<(Clause, usize, f64)>> {
    let m = &ctx.members[i];
    let mut out = Vec::new();
    match m {
        Member::Hpq(graph) => {
            let c = graph.lattice().center();
            let d = graph.distances_from(c)?;
            let o = graph.position(c);
            let form = graph.model().form();
            for &k in nodes {
                let pseudo = pseudo_distance(form, &o, &graph.position(k));
                out.push((Clause::PseudoOverIntrinsic, k, pseudo - d[k]));
                out.push((Clause::IntrinsicOverPseudo, k, d[k] - pseudo));
            }
        }
        Member::Affine { cone, sphere } => {
            let o = affine_basepoint(m)?;
            let c = comparison_constant(ctx, i)?;
            let r = affine_domination_check(sphere, cone, &o, nodes, c, 0.0)?;
            let floor = ((1.0 - r.a) / 2.0).ln();
            for s in &r.samples {
                let k = s.node;
                out.push((Clause::Domination, k, s.intrinsic - 2.0 * c / (1.0 - r.a) * (s.log_phi - floor)));
                out.push((Clause::Comparison, k, s.intrinsic - c * s.hilbert));
                out.push((Clause::Growth, k, (1.0 - r.a) * s.t_x.abs() + floor - s.log_phi));
                out.push((Clause::Slope, k, s.max_alpha_dot - r.a));
            }
        }
    }
    Ok(out)
}

fn clause_margin(clause: Clause, eps: f64) -> (&'static str, f64, bool) {
    match clause {
        Clause::PseudoOverIntrinsic => ("pseudo-distance over intrinsic distance", eps, true),
        Clause::IntrinsicOverPseudo => ("intrinsic distance over pseudo-distance", eps, false),
        Clause::Domination => ("intrinsic distance over the support-functional bound", eps, true),
        Clause::Comparison => ("intrinsic distance over c times Hilbert distance", eps, true),
        Clause::Growth => ("support-functional growth deficit", 0.0, false),
        Clause::Slope => ("sector slope over a", 0.0, false),
    }
}

fn column(rep: &PipelineReport, generator: usize) -> Vec<f64> {
    rep.displacements.iter().map(|d| d[generator]).collect()
}

/// Excess of the running sup over a logarithmic growth allowance: negative
/// when the sup is attained before the last 20% of the terms, otherwise the
/// growth across that tail minus `log(N / k)`.
pub fn running_sup_excess(values: &[f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return -1.0;
    }
    let tail = n - n / 5;
    let arg = (0..n).fold(0, |a, k| if values[k] > values[a] { k } else { a });
    if arg < tail || tail == 0 {
        return -1.0;
    }
    let before = values[..tail].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sup = values[arg];
    (sup - before) - (n as f64 / tail as f64).ln()
}

/// The finite-sequence proxy for a uniform bound.
pub fn running_sup_bounded(values: &[f64]) -> bool {
    running_sup_excess(values) <= 0.0
}

/// Property 4: equivariance, the inequality against the intrinsic distance,
/// and bounded displacement along the scenario's sequence.
pub fn check_domination(ctx: &Context) -> Result<PropertyReport> {
    let mut rep = PropertyReport::new(Property::Domination);
    let t = &ctx.scenario.tolerances;
    let gs = ctx.random_elements(SALT_DOMINATION, ctx.scenario.random_elements);
    for (i, m) in ctx.members.iter().enumerate() {
        let nodes = sample_nodes(m);
        for g in &gs {
            for &k in &nodes {
                let w = Witness::Equivariance { member: i, g: rows(g), node: k };
                rep.worst(Margin::at_most("equivariance defect", replay(ctx, &w)?, t.equivariance, Some(w)));
            }
        }
        let all: Vec<usize> = match m {
            Member::Hpq(g) => (0..g.lattice().len()).collect(),
            Member::Affine { sphere, .. } => sphere.lattice().interior_nodes().step_by(3).collect(),
        };
        let eps = ctx.eps_grid(m);
        for (clause, k, excess) in inequality_excesses(ctx, i, &all)? {
            let (name, limit, gating) = clause_margin(clause, eps);
            let mut margin = Margin::at_most(name, excess, limit, Some(Witness::Inequality { member: i, node: k, clause }));
            margin.gating = gating;
            rep.worst(margin);
        }
    }
    if ctx.sequence.is_some() {
        let pipe = pipeline(ctx)?;
        let names = ctx.representation.as_ref().map(|r| r.group().names().to_vec()).unwrap_or_default();
        for (s, name) in names.iter().enumerate() {
            let vals = column(&pipe, s);
            let sup = vals.iter().copied().fold(0.0, f64::max);
            rep.margins.push(Margin::at_most(&format!("sup displacement of {name}"), sup, f64::INFINITY, None).informational());
            let w = Witness::Displacement { generator: s };
            rep.worst(Margin::at_most("running-sup growth beyond log n", running_sup_excess(&vals), 0.0, Some(w)));
        }
    } else {
        rep.notes.push("no representation sequence: bounded displacement not exercised".into());
    }
    Ok(rep)
}

// ---- closedness ----------------------------------------------------------

fn pipeline(ctx: &Context) -> Result<PipelineReport> {
    let seq = ctx.sequence.as_ref().ok_or_else(|| Error::InvalidParameter("scenario has no sequence".into()))?;
    renormalization_pipeline(&seq.rhos, &seq.members, ctx.tag, PipelineParams::default())
}

fn norm_ratio(rep: &PipelineReport) -> f64 {
    rep.generator_norms.iter().copied().fold(0.0, f64::max) / rep.generator_norms[0]
}

/// Invariance residual of a generator of the base representation on the
/// corpus member it is meant to preserve.
fn base_invariance(ctx: &Context, generator: usize) -> Result<f64> {
    let (Some(rho), Some(spec)) = (&ctx.representation, &ctx.scenario.sequence) else {
        return Err(Error::InvalidParameter("scenario has no sequence".into()));
    };
    Ok(invariance_residual(rho, &ctx.members[spec.member], &[generator as i32 + 1])?.residual)
}

/// Renormalized graphs of the last two terms; the last one stands for the
/// pointwise limit `u_∞`.
fn limit_graphs(ctx: &Context, rep: &PipelineReport) -> Result<Option<(SpacelikeGraph, SpacelikeGraph)>> {
    let seq = ctx.sequence.as_ref().ok_or_else(|| Error::InvalidParameter("scenario has no sequence".into()))?;
    let n = seq.members.len();
    let get = |k: usize| -> Result<Option<SpacelikeGraph>> {
        Ok(match seq.members[k].transform(&rep.renormalizers[k])? {
            Member::Hpq(g) => Some(g),
            Member::Affine { .. } => None,
        })
    };
    Ok(match (get(n - 2)?, get(n - 1)?) {
        (Some(a), Some(b)) => Some((a, b)),
        _ => None,
    })
}

/// Sup over nodes of the spherical distance between the last two
/// renormalized graphs.
fn uniform_gap(ctx: &Context, rep: &PipelineReport) -> Result<f64> {
    let Some((a, b)) = limit_graphs(ctx, rep)? else { return Ok(0.0) };
    Ok((0..a.lattice().len()).map(|k| a.value(k).dot(b.value(k)).clamp(-1.0, 1.0).acos()).fold(0.0, f64::max))
}

fn lightlike(ctx: &Context, rep: &PipelineReport, direction: &[f64]) -> Result<f64> {
    let Some((_, limit)) = limit_graphs(ctx, rep)? else { return Ok(0.0) };
    Ok(if detect_lightlike_ray(&limit, direction, ctx.scenario.tolerances.lightlike) { 1.0 } else { 0.0 })
}

fn ray_directions(p: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..p {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; p];
            v[i] = s;
            out.push(v);
        }
    }
    if p >= 2 {
        for (a, b) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let mut v = vec![0.0; p];
            v[0] = a;
            v[1] = b;
            out.push(v);
        }
    }
    out
}

/// Replays the closedness argument on the scenario's sequence.
pub fn closedness_scenario(ctx: &Context) -> Result<PropertyReport> {
    let mut rep = PropertyReport::new(Property::Closedness);
    let Some(rho) = &ctx.representation else {
        rep.notes.push("no representation sequence: nothing to close".into());
        return Ok(rep);
    };
    if ctx.sequence.is_none() {
        rep.notes.push("no representation sequence: nothing to close".into());
        return Ok(rep);
    }
    let t = &ctx.scenario.tolerances;
    for s in 0..rho.group().rank() {
        let w = Witness::BaseInvariance { generator: s };
        rep.worst(Margin::at_most("input invariance residual", replay(ctx, &w)?, t.invariance, Some(w)));
    }
    let pipe = pipeline(ctx)?;
    rep.margins.push(Margin::at_most("generator norm ratio", norm_ratio(&pipe), t.norm_factor, Some(Witness::NormRatio)));
    rep.margins.push(Margin::at_most(
        "limit invariance residual",
        pipe.limit_residual,
        2.0 * pipe.input_floor.max(1e-12),
        Some(Witness::LimitInvariance),
    ));
    rep.margins.push(Margin::at_most("input invariance floor of the tail", pipe.input_floor, f64::INFINITY, None).informational());
    rep.margins.push(Margin::at_most("tail Cauchy gap", pipe.cauchy_gap, PipelineParams::default().cauchy_tol, None).informational());
    if let Some((_, limit)) = limit_graphs(ctx, &pipe)? {
        rep.margins.push(Margin::at_most(
            "uniform gap of the last renormalized graphs",
            uniform_gap(ctx, &pipe)?,
            t.compactness,
            Some(Witness::UniformGap),
        ));
        for dir in ray_directions(limit.lattice().p()) {
            let w = Witness::LightlikeRay { direction: dir };
            rep.worst(Margin::at_most("lightlike ray in the limit graph", replay(ctx, &w)?, 0.5, Some(w)));
        }
    } else {
        rep.notes.push("affine family: no lightlike obstruction to test".into());
    }
    Ok(rep)
}
