use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::cone::{ChartDomain, ConvexCone, Frame};
use crate::error::{Error, Result};
use crate::jets::{build_stencils, ConvexDomain, Stencil};
use crate::lattice::{geodesic_distances, Lattice, MetricField};

/// Chart lattice of `n` points per axis over a cross-section, centred at the
/// chart origin and keeping the strictly interior nodes. Nodes within a
/// rounding margin of the boundary (e.g. on an edge through lattice points)
/// are dropped too.
pub fn chart_lattice(domain: &ChartDomain, n: usize) -> Result<Lattice> {
    let p = domain.dim();
    let half = domain.extent();
    let margin = 1e-6 * 2.0 * half / (n.max(2) - 1) as f64;
    Lattice::masked(p, n, &vec![0.0; p], half, |y| {
        domain.contains(y)
            && (0..p).all(|a| {
                [1.0, -1.0].iter().all(|&sg| {
                    let mut d = vec![0.0; p];
                    d[a] = sg;
                    domain.exit(y, &d) > margin
                })
            })
    })
}

/// Derivatives of the radial potential `u = -|P| / r` (negative) at a point.
#[derive(Clone, Debug)]
pub struct PotentialJet {
    pub u: f64,
    pub du: DVector<f64>,
    pub d2u: DMatrix<f64>,
    /// `d3u[(i p + j) p + k]`.
    pub d3u: Vec<f64>,
}

/// Embedding `X = -P / u` and its first two coordinate derivatives.
#[derive(Clone, Debug)]
pub struct EmbeddingJet {
    pub x: DVector<f64>,
    pub dx: Vec<DVector<f64>>,
    /// `ddx[i * p + j] = ∂_i ∂_j X`.
    pub ddx: Vec<DVector<f64>>,
}

/// Transverse fields for [`AffineHypersurface::affine_structure`].
#[derive(Clone, Debug)]
pub enum Transversal {
    /// `ξ = scale · X`.
    Radial { scale: f64 },
    /// A parallel field.
    Constant(DVector<f64>),
    AffineNormal,
}

/// `D_U V = ∇_U V + σ(U, V) ξ` and `D_U ξ = -S U + τ(U) ξ`, in the coordinate
/// basis `∂_1 X, .., ∂_p X`; `shape[(j, i)]` is the `∂_j` component of `S ∂_i`.
#[derive(Clone, Debug)]
pub struct AffineStructure {
    pub sigma: DMatrix<f64>,
    pub shape: DMatrix<f64>,
    pub tau: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct SphereCheck {
    pub is_sphere: bool,
    /// Worst angle (radians) between an affine normal line and the line to the origin.
    pub max_angle: f64,
    pub worst_node: usize,
    /// Affine normals point away from the centre.
    pub hyperbolic: bool,
}

/// A point of the surface with its tangent frame.
#[derive(Clone, Debug)]
pub struct Basepoint {
    pub y: Vec<f64>,
    pub node: usize,
    pub point: DVector<f64>,
    pub tangent: Vec<DVector<f64>>,
}

/// A radial graph `ω ↦ r(ω) ω` over a region of directions, sampled on a
/// chart lattice. Internally `w = (|P| / r)^k` is fitted by local cubics;
/// `k = 2` makes quadrics polynomial, `k = p + 1` does so for simplicial cones.
#[derive(Clone, Debug)]
pub struct AffineHypersurface {
    frame: Frame,
    domain: ChartDomain,
    lattice: Arc<Lattice>,
    stencils: Arc<Vec<Stencil>>,
    k: f64,
    zero_boundary: bool,
    radii: Vec<f64>,
    w: Vec<f64>,
    fits: Vec<Vec<f64>>,
}

impl AffineHypersurface {
    /// `zero_boundary` declares the surface asymptotic to the cone over the
    /// whole chart domain, so `w` vanishes on its boundary.
    pub fn from_radii(
        frame: Frame,
        domain: ChartDomain,
        lattice: Arc<Lattice>,
        k: f64,
        zero_boundary: bool,
        radii: Vec<f64>,
    ) -> Result<Self> {
        let stencils = Arc::new(build_stencils(&lattice, &domain, zero_boundary)?);
        Self::assemble(frame, domain, lattice, stencils, k, zero_boundary, radii)
    }

    /// Radii from a function of the unit direction.
    pub fn from_fn(
        frame: Frame,
        domain: ChartDomain,
        lattice: Arc<Lattice>,
        k: f64,
        zero_boundary: bool,
        radius: impl Fn(&DVector<f64>) -> f64,
    ) -> Result<Self> {
        let radii = (0..lattice.len())
            .map(|node| {
                let d = frame.lift(lattice.x(node));
                radius(&(&d / d.norm()))
            })
            .collect();
        Self::from_radii(frame, domain, lattice, k, zero_boundary, radii)
    }

    /// Radial graph over the full cross-section of `cone`.
    pub fn over_cone(cone: &ConvexCone, n: usize, k: f64, zero_boundary: bool, radius: impl Fn(&DVector<f64>) -> f64) -> Result<Self> {
        let domain = cone.chart_domain();
        let lattice = Arc::new(chart_lattice(&domain, n)?);
        Self::from_fn(cone.frame().clone(), domain, lattice, k, zero_boundary, radius)
    }

    pub(crate) fn assemble(
        frame: Frame,
        domain: ChartDomain,
        lattice: Arc<Lattice>,
        stencils: Arc<Vec<Stencil>>,
        k: f64,
        zero_boundary: bool,
        radii: Vec<f64>,
    ) -> Result<Self> {
        if radii.len() != lattice.len() {
            return Err(Error::DimensionMismatch { expected: lattice.len(), got: radii.len() });
        }
        if frame.p() != lattice.p() || domain.dim() != lattice.p() {
            return Err(Error::DimensionMismatch { expected: lattice.p(), got: frame.p() });
        }
        if !(k >= 1.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!("substitution exponent {k} must be >= 1")));
        }
        if let Some(bad) = radii.iter().position(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidParameter(format!("radius at node {bad} is not positive")));
        }
        let w: Vec<f64> = radii
            .iter()
            .enumerate()
            .map(|(node, r)| (frame.lift(lattice.x(node)).norm() / r).powf(k))
            .collect();
        let fits = stencils.iter().map(|s| s.fit(&w)).collect();
        Ok(Self { frame, domain, lattice, stencils, k, zero_boundary, radii, w, fits })
    }

    /// Same chart and lattice, new radii.
    pub fn with_radii(&self, radii: Vec<f64>) -> Result<Self> {
        Self::assemble(
            self.frame.clone(),
            self.domain.clone(),
            self.lattice.clone(),
            self.stencils.clone(),
            self.k,
            self.zero_boundary,
            radii,
        )
    }

    pub fn p(&self) -> usize {
        self.lattice.p()
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.domain
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn exponent(&self) -> f64 {
        self.k
    }

    pub fn zero_boundary(&self) -> bool {
        self.zero_boundary
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn direction(&self, node: usize) -> DVector<f64> {
        let d = self.frame.lift(self.lattice.x(node));
        &d / d.norm()
    }

    pub fn directions(&self) -> Vec<DVector<f64>> {
        (0..self.len()).map(|k| self.direction(k)).collect()
    }

    pub fn point(&self, node: usize) -> DVector<f64> {
        self.direction(node) * self.radii[node]
    }

    pub fn points(&self) -> Vec<DVector<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    fn potential(&self, w_jet: crate::jets::Jet) -> Result<PotentialJet> {
        let p = self.p();
        let w = w_jet.value;
        if !(w > 0.0) {
            return Err(Error::Degenerate("surface potential vanishes"));
        }
        let s = 1.0 / self.k;
        let f1 = -s * w.powf(s - 1.0);
        let f2 = -s * (s - 1.0) * w.powf(s - 2.0);
        let f3 = -s * (s - 1.0) * (s - 2.0) * w.powf(s - 3.0);
        let g = &w_jet.grad;
        let hw = &w_jet.hess;
        let du = g * f1;
        let d2u = DMatrix::from_fn(p, p, |i, j| f2 * g[i] * g[j] + f1 * hw[(i, j)]);
        let mut d3u = vec![0.0; p * p * p];
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    d3u[(i * p + j) * p + k] = f3 * g[i] * g[j] * g[k]
                        + f2 * (hw[(i, j)] * g[k] + hw[(i, k)] * g[j] + hw[(j, k)] * g[i])
                        + f1 * w_jet.third(i, j, k);
                }
            }
        }
        Ok(PotentialJet { u: -w.powf(s), du, d2u, d3u })
    }

    pub fn potential_at_node(&self, node: usize) -> Result<PotentialJet> {
        let mut jet = self.stencils[node].jet_at(&self.fits[node], &vec![0.0; self.p()]);
        jet.value = self.w[node];
        self.potential(jet)
    }

    /// Taylor evaluation from the nearest node's local fit.
    pub fn potential_at(&self, y: &[f64]) -> Result<PotentialJet> {
        let node = self.lattice.nearest(y);
        let dy: Vec<f64> = y.iter().zip(self.lattice.x(node)).map(|(a, b)| a - b).collect();
        if dy.iter().all(|t| *t == 0.0) {
            return self.potential_at_node(node);
        }
        self.potential(self.stencils[node].jet_at(&self.fits[node], &dy))
    }

    fn embedding(&self, y: &[f64], pj: &PotentialJet) -> EmbeddingJet {
        let p = self.p();
        let pt = self.frame.lift(y);
        let u = pj.u;
        let x = &pt * (-1.0 / u);
        let ei = |i: usize| self.frame.e.column(i).into_owned();
        let dx = (0..p).map(|i| ei(i) * (-1.0 / u) + &pt * (pj.du[i] / (u * u))).collect();
        let mut ddx = Vec::with_capacity(p * p);
        for i in 0..p {
            for j in 0..p {
                ddx.push(
                    ei(i) * (pj.du[j] / (u * u)) + ei(j) * (pj.du[i] / (u * u))
                        + &pt * (pj.d2u[(i, j)] / (u * u) - 2.0 * pj.du[i] * pj.du[j] / (u * u * u)),
                );
            }
        }
        EmbeddingJet { x, dx, ddx }
    }

    pub fn embedding_at_node(&self, node: usize) -> Result<EmbeddingJet> {
        let pj = self.potential_at_node(node)?;
        Ok(self.embedding(self.lattice.x(node), &pj))
    }

    pub fn embedding_at(&self, y: &[f64]) -> Result<EmbeddingJet> {
        let pj = self.potential_at(y)?;
        Ok(self.embedding(y, &pj))
    }

    /// `(ε, φ, ∇φ)` with `ε σ^X` positive definite and `φ` the rescaling
    /// taking `ε X` to the volume-normalized transversal.
    fn normalization(&self, pj: &PotentialJet, node: usize) -> Result<(f64, f64, DVector<f64>)> {
        let p = self.p();
        let h = &pj.d2u;
        let eig = h.clone().symmetric_eigen();
        let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
        let eps = if lo > 0.0 {
            1.0
        } else if hi < 0.0 {
            -1.0
        } else {
            return Err(Error::NotConvex(node));
        };
        let det = h.determinant().abs();
        let au = pj.u.abs();
        let phi = (det * au.powi(p as i32 + 2)).powf(1.0 / (p as f64 + 2.0));
        let hinv = h.clone().try_inverse().ok_or(Error::NotConvex(node))?;
        let grad = DVector::from_fn(p, |k, _| {
            let mut tr = 0.0;
            for i in 0..p {
                for j in 0..p {
                    tr += hinv[(i, j)] * pj.d3u[(j * p + i) * p + k];
                }
            }
            phi * (tr / (p as f64 + 2.0) + pj.du[k] / pj.u)
        });
        Ok((eps, phi, grad))
    }

    fn normal_from(&self, pj: &PotentialJet, ej: &EmbeddingJet, node: usize) -> Result<DVector<f64>> {
        let (eps, phi, grad) = self.normalization(pj, node)?;
        let ht = &pj.d2u * (eps / pj.u.abs());
        let z = ht.try_inverse().ok_or(Error::NotConvex(node))? * grad;
        let mut xi = &ej.x * (eps * phi);
        for (i, t) in ej.dx.iter().enumerate() {
            xi -= t * z[i];
        }
        Ok(xi)
    }

    /// The affine (Blaschke) normal: the transversal with `τ = 0` whose
    /// induced volume equals the volume of its second fundamental form.
    pub fn affine_normal(&self, node: usize) -> Result<DVector<f64>> {
        let pj = self.potential_at_node(node)?;
        let ej = self.embedding(self.lattice.x(node), &pj);
        self.normal_from(&pj, &ej, node)
    }

    /// `σ^ξ` for the affine normal, in the coordinate basis.
    pub fn affine_metric(&self, node: usize) -> Result<DMatrix<f64>> {
        let pj = self.potential_at_node(node)?;
        let (eps, phi, _) = self.normalization(&pj, node)?;
        Ok(&pj.d2u * (eps / (pj.u.abs() * phi)))
    }

    /// Affine metric at a chart point, from the nearest node's local fit.
    pub fn affine_metric_at(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let pj = self.potential_at(y)?;
        let (eps, phi, _) = self.normalization(&pj, self.lattice.nearest(y))?;
        Ok(&pj.d2u * (eps / (pj.u.abs() * phi)))
    }

    pub fn affine_metric_field(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len() * self.p() * self.p());
        for node in 0..self.len() {
            let g = self.affine_metric(node)?;
            out.extend(g.transpose().iter());
        }
        Ok(out)
    }

    /// Grid shortest-path distances from `source` under the affine metric.
    pub fn intrinsic_distances(&self, source: usize) -> Result<Vec<f64>> {
        let entries = self.affine_metric_field()?;
        let field = MetricField::new(&self.lattice, entries)?;
        Ok(geodesic_distances(&field, source))
    }

    fn transversal_at(&self, node: usize, t: &Transversal) -> Result<DVector<f64>> {
        match t {
            Transversal::Radial { scale } => Ok(self.point(node) * *scale),
            Transversal::Constant(v) => Ok(v.clone()),
            Transversal::AffineNormal => self.affine_normal(node),
        }
    }

    /// Split of the flat connection along `T_x M ⊕ span(ξ)` at a node.
    pub fn affine_structure(&self, node: usize, transversal: &Transversal) -> Result<AffineStructure> {
        let p = self.p();
        let ej = self.embedding_at_node(node)?;
        let xi = self.transversal_at(node, transversal)?;
        if xi.len() != p + 1 {
            return Err(Error::DimensionMismatch { expected: p + 1, got: xi.len() });
        }
        let mut cols = ej.dx.clone();
        cols.push(xi.clone());
        let basis = DMatrix::from_columns(&cols);
        let scale: f64 = cols.iter().map(|c| c.norm()).product();
        if !(basis.determinant().abs() > 1e-10 * scale) {
            return Err(Error::NotTransverse);
        }
        let lu = basis.lu();
        let solve = |v: &DVector<f64>| lu.solve(v).ok_or(Error::NotTransverse);
        let mut sigma = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                sigma[(i, j)] = solve(&ej.ddx[i * p + j])?[p];
            }
        }
        // derivatives of ξ along the coordinate directions
        let dxi: Vec<DVector<f64>> = match transversal {
            Transversal::Radial { scale } => ej.dx.iter().map(|t| t * *scale).collect(),
            Transversal::Constant(_) => vec![DVector::zeros(p + 1); p],
            Transversal::AffineNormal => {
                let h = self.lattice.h();
                (0..p)
                    .map(|a| {
                        let fwd = self.lattice.step(node, a, 1);
                        let bwd = self.lattice.step(node, a, -1);
                        match (fwd, bwd) {
                            (Some(f), Some(b)) => Ok((self.affine_normal(f)? - self.affine_normal(b)?) / (2.0 * h)),
                            (Some(f), None) => Ok((self.affine_normal(f)? - &xi) / h),
                            (None, Some(b)) => Ok((&xi - self.affine_normal(b)?) / h),
                            (None, None) => Err(Error::Degenerate("isolated node")),
                        }
                    })
                    .collect::<Result<_>>()?
            }
        };
        let mut shape = DMatrix::zeros(p, p);
        let mut tau = DVector::zeros(p);
        for i in 0..p {
            let c = solve(&dxi[i])?;
            for j in 0..p {
                shape[(j, i)] = -c[j];
            }
            tau[i] = c[p];
        }
        Ok(AffineStructure { sigma, shape, tau })
    }

    /// Concurrency of the affine normals at the origin, over interior nodes.
    pub fn is_affine_sphere(&self, tol: f64) -> Result<SphereCheck> {
        let mut max_angle = 0.0f64;
        let mut worst_node = 0;
        let mut outward = 0usize;
        let mut count = 0usize;
        for node in self.lattice.interior_nodes() {
            let pj = self.potential_at_node(node)?;
            let ej = self.embedding(self.lattice.x(node), &pj);
            let xi = self.normal_from(&pj, &ej, node)?;
            let xh = &ej.x / ej.x.norm();
            let along = xi.dot(&xh);
            let off = (&xi - &xh * along).norm();
            let angle = off.atan2(along.abs());
            if angle > max_angle {
                max_angle = angle;
                worst_node = node;
            }
            count += 1;
            if along > 0.0 {
                outward += 1;
            }
        }
        if count == 0 {
            return Err(Error::Degenerate("no interior nodes"));
        }
        Ok(SphereCheck { is_sphere: max_angle <= tol, max_angle, worst_node, hyperbolic: outward == count })
    }

    pub fn basepoint_at(&self, y: &[f64]) -> Result<Basepoint> {
        let ej = self.embedding_at(y)?;
        Ok(Basepoint { y: y.to_vec(), node: self.lattice.nearest(y), point: ej.x, tangent: ej.dx })
    }

    pub fn basepoint_at_node(&self, node: usize) -> Result<Basepoint> {
        let ej = self.embedding_at_node(node)?;
        Ok(Basepoint { y: self.lattice.x(node).to_vec(), node, point: ej.x, tangent: ej.dx })
    }

    /// Point of minimal Euclidean norm: grid argmin refined by Newton on the
    /// local fits, so that `T_o M ⊥ o`.
    pub fn minimal_norm_basepoint(&self) -> Result<Basepoint> {
        let p = self.p();
        let node = (0..self.len())
            .min_by(|&a, &b| self.radii[a].total_cmp(&self.radii[b]))
            .ok_or(Error::Degenerate("empty surface"))?;
        let mut y = self.lattice.x(node).to_vec();
        for _ in 0..30 {
            let ej = self.embedding_at(&y)?;
            let g = DVector::from_fn(p, |i, _| ej.x.dot(&ej.dx[i]));
            if g.norm() <= 1e-15 * ej.x.norm_squared() {
                break;
            }
            let hess = DMatrix::from_fn(p, p, |i, j| ej.dx[i].dot(&ej.dx[j]) + ej.x.dot(&ej.ddx[i * p + j]));
            let Some(step) = hess.cholesky().map(|c| c.solve(&g)) else { break };
            let next: Vec<f64> = y.iter().zip(step.iter()).map(|(a, b)| a - b).collect();
            if !self.domain.contains(&next) || step.norm() > 2.0 * self.lattice.h() {
                break;
            }
            y = next;
        }
        self.basepoint_at(&y)
    }

    /// The linear functional vanishing on `T_o M` with value 1 at `o`.
    pub fn support_functional(&self, o: &Basepoint) -> Result<DVector<f64>> {
        let n = o.point.len();
        let mut rows = DMatrix::zeros(n, n);
        for (i, t) in o.tangent.iter().enumerate() {
            rows.set_row(i, &t.transpose());
        }
        rows.set_row(n - 1, &o.point.transpose());
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        rows.lu().solve(&rhs).ok_or(Error::Degenerate("tangent data at the basepoint"))
    }

    /// The point of the surface on the ray through `d`, if the ray meets the chart region.
    pub fn point_on_ray(&self, d: &DVector<f64>) -> Option<DVector<f64>> {
        let y = self.frame.chart(d)?;
        if !self.domain.contains(&y) {
            return None;
        }
        let u = self.potential_at(&y).ok()?.u;
        Some(d / (self.frame.c.dot(d) * -u))
    }

    /// `max |x| / r(x) - 1` over points on rays meeting this surface's chart.
    pub fn radial_mismatch<'a>(&self, points: impl IntoIterator<Item = &'a DVector<f64>>) -> f64 {
        points
            .into_iter()
            .filter_map(|x| self.point_on_ray(x).map(|on| (x.norm() / on.norm() - 1.0).abs()))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyperboloid(n: usize) -> AffineHypersurface {
        let cone = ConvexCone::standard_round(2);
        // radius of {x3^2 - |x'|^2 = 1} along a unit direction
        AffineHypersurface::over_cone(&cone, n, 2.0, true, |d| 1.0 / (d[2] * d[2] - d[0] * d[0] - d[1] * d[1]).sqrt()).unwrap()
    }

    #[test]
    fn hyperboloid_is_a_hyperbolic_affine_sphere() {
        let m = hyperboloid(21);
        let check = m.is_affine_sphere(1e-9).unwrap();
        assert!(check.is_sphere && check.hyperbolic, "{check:?}");
        // and the affine normal is exactly the position vector
        for node in m.lattice().interior_nodes() {
            assert!((m.affine_normal(node).unwrap() - m.point(node)).amax() < 1e-9);
        }
    }

    #[test]
    fn ellipsoid_normals_point_at_the_centre() {
        let q = [1.0, 4.0, 2.25];
        let cone = ConvexCone::standard_round(2);
        let dom = cone.chart_domain();
        // a cap of directions well inside the cone
        let lat = Arc::new(Lattice::masked(2, 17, &[0.0, 0.0], 0.5, |y| y[0] * y[0] + y[1] * y[1] < 0.25).unwrap());
        let m = AffineHypersurface::from_fn(cone.frame().clone(), dom, lat, 2.0, false, |d| {
            1.0 / (q[0] * d[0] * d[0] + q[1] * d[1] * d[1] + q[2] * d[2] * d[2]).sqrt()
        })
        .unwrap();
        let check = m.is_affine_sphere(1e-6).unwrap();
        assert!(check.is_sphere && !check.hyperbolic, "{check:?}");
    }

    #[test]
    fn round_sphere_and_hyperboloid_structures() {
        // unit sphere with inward radial transversal: σ is the identity in an orthonormal basis
        let cone = ConvexCone::standard_round(2);
        let lat = Arc::new(Lattice::masked(2, 13, &[0.0, 0.0], 0.4, |y| y[0] * y[0] + y[1] * y[1] < 0.16).unwrap());
        let sphere = AffineHypersurface::from_fn(cone.frame().clone(), cone.chart_domain(), lat, 2.0, false, |_| 1.0).unwrap();
        let hyp = hyperboloid(21);
        for m in [&sphere, &hyp] {
            for node in [0, m.len() / 3, m.lattice().center()] {
                if !m.lattice().is_interior(node) {
                    continue;
                }
                let st = m.affine_structure(node, &Transversal::Radial { scale: -1.0 }).unwrap();
                let ej = m.embedding_at_node(node).unwrap();
                // induced metric: Euclidean on the sphere, Lorentzian restriction on the hyperboloid
                let is_hyp = std::ptr::eq(m, &hyp);
                let g = DMatrix::from_fn(2, 2, |i, j| {
                    let (a, b) = (&ej.dx[i], &ej.dx[j]);
                    if is_hyp { a[0] * b[0] + a[1] * b[1] - a[2] * b[2] } else { a.dot(b) }
                });
                // the hyperboloid ⟨z,z⟩ = -1 with ξ = -z gives σ = -g (see ledger)
                let expected = if is_hyp { -&g } else { g.clone() };
                assert!((&st.sigma - &expected).amax() < 1e-8, "{} vs {}", st.sigma, expected);
                assert!((&st.sigma - st.sigma.transpose()).amax() == 0.0);
                assert!((&st.shape - DMatrix::identity(2, 2)).amax() < 1e-12);
                assert!(st.tau.amax() < 1e-12);
            }
        }
    }

    #[test]
    fn tangent_transversal_is_rejected() {
        let m = hyperboloid(11);
        let c = m.lattice().center();
        let t = m.embedding_at_node(c).unwrap().dx[0].clone();
        assert!(matches!(m.affine_structure(c, &Transversal::Constant(t)), Err(Error::NotTransverse)));
    }

    #[test]
    fn minimal_norm_basepoint_and_support_functional() {
        let m = hyperboloid(21);
        let o = m.minimal_norm_basepoint().unwrap();
        assert!((o.point.clone() - DVector::from_vec(vec![0.0, 0.0, 1.0])).amax() < 1e-12);
        let phi = m.support_functional(&o).unwrap();
        assert!((phi.dot(&o.point) - 1.0).abs() < 1e-14);
        let expect = &o.point / o.point.norm_squared();
        assert!((phi - expect).amax() < 1e-12);
    }

    #[test]
    fn hyperbola_support_functional() {
        let cone = ConvexCone::orthant(1).unwrap();
        let m = AffineHypersurface::over_cone(&cone, 31, 2.0, true, |d| 1.0 / (d[0] * d[1]).sqrt()).unwrap();
        let o = m.minimal_norm_basepoint().unwrap();
        assert!((&o.point - DVector::from_vec(vec![1.0, 1.0])).amax() < 1e-10, "{}", o.point);
        let phi = m.support_functional(&o).unwrap();
        assert!((phi - DVector::from_vec(vec![0.5, 0.5])).amax() < 1e-10);
    }

    #[test]
    fn perturbed_hyperboloid_is_not_a_sphere() {
        let m = hyperboloid(21);
        let mut last = 0.0;
        for eps in [1e-3, 4e-3] {
            let radii: Vec<f64> = (0..m.len())
                .map(|k| {
                    let d = m.direction(k);
                    m.radii()[k] * (1.0 + eps * d[0] * d[0])
                })
                .collect();
            let pm = m.with_radii(radii).unwrap();
            let check = pm.is_affine_sphere(1e-6).unwrap();
            assert!(!check.is_sphere);
            if last > 0.0 {
                let ratio = check.max_angle / last;
                assert!(ratio > 2.5 && ratio < 6.0, "ratio {ratio}");
            }
            last = check.max_angle;
        }
    }
}
