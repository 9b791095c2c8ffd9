//! Pseudo-hyperbolic space `H^{p,q}` in a Poincaré model, and spacelike
//! submanifolds sampled as graphs of maps `D^p -> S^q`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::forms::QuadraticForm;
use crate::lattice::{geodesic_distances, DiskLattice, MetricField};

/// Tolerance on `|v| = 1` for stored sphere values.
pub const UNIT_TOL: f64 = 1e-12;

/// An orthogonal splitting `R^{p,q+1} = E ⊕ F` with `Q|_E > 0` and `Q|_F < 0`,
/// identifying `D^p x S^q` with `H^{p,q}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoincareModel {
    form: QuadraticForm,
    e: DMatrix<f64>,
    f: DMatrix<f64>,
}

impl PoincareModel {
    /// The coordinate splitting: `E` spanned by the first `p` axes.
    pub fn standard(p: usize, q: usize) -> Result<Self> {
        let form = QuadraticForm::hpq(p, q)?;
        let d = form.dim();
        let id = DMatrix::<f64>::identity(d, d);
        Ok(Self {
            form,
            e: id.columns(0, p).into_owned(),
            f: id.columns(p, q + 1).into_owned(),
        })
    }

    /// A general splitting, given by `Q`-orthonormal bases as matrix columns.
    pub fn new(form: QuadraticForm, e: DMatrix<f64>, f: DMatrix<f64>) -> Result<Self> {
        let d = form.dim();
        if e.nrows() != d || f.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, got: e.nrows().min(f.nrows()) });
        }
        if e.ncols() != form.p() || f.ncols() != form.q_plus_1() {
            return Err(Error::InvalidParameter("splitting does not match the signature".into()));
        }
        let ge = form.gram(&e) - DMatrix::identity(e.ncols(), e.ncols());
        let gf = form.gram(&f) + DMatrix::identity(f.ncols(), f.ncols());
        let jf = form.signature_matrix() * &f;
        let cross = e.transpose() * jf;
        if ge.amax() > 1e-10 || gf.amax() > 1e-10 || cross.amax() > 1e-10 {
            return Err(Error::InvalidParameter("splitting is not Q-orthonormal".into()));
        }
        Ok(Self { form, e, f })
    }

    pub fn form(&self) -> &QuadraticForm {
        &self.form
    }

    pub fn p(&self) -> usize {
        self.form.p()
    }

    pub fn q(&self) -> usize {
        self.form.q_plus_1() - 1
    }

    pub fn dim(&self) -> usize {
        self.form.dim()
    }

    pub fn e_basis(&self) -> &DMatrix<f64> {
        &self.e
    }

    pub fn f_basis(&self) -> &DMatrix<f64> {
        &self.f
    }

    /// `Π(u, v) = 2u/(1-|u|²) + (1+|u|²)/(1-|u|²) v`.
    pub fn embed(&self, u: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
        if u.len() != self.p() {
            return Err(Error::DimensionMismatch { expected: self.p(), got: u.len() });
        }
        if v.len() != self.q() + 1 {
            return Err(Error::DimensionMismatch { expected: self.q() + 1, got: v.len() });
        }
        let r = u.iter().map(|t| t * t).sum::<f64>().sqrt();
        if r >= 1.0 {
            return Err(Error::OutsideDisk(r));
        }
        if (v.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("sphere point has norm {}", v.norm())));
        }
        Ok(self.embed_unchecked(u, v))
    }

    pub(crate) fn embed_unchecked(&self, u: &[f64], v: &DVector<f64>) -> DVector<f64> {
        let r2: f64 = u.iter().map(|t| t * t).sum();
        let a = 2.0 / (1.0 - r2);
        let c = (1.0 + r2) / (1.0 - r2);
        let mut z = &self.f * v * c;
        for (i, ui) in u.iter().enumerate() {
            z.axpy(a * ui, &self.e.column(i), 1.0);
        }
        z
    }

    /// Inverse of [`embed`](Self::embed).
    pub fn project(&self, z: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        let n2 = self.form.norm2(z);
        if (n2 + 1.0).abs() > 1e-8 * z.norm_squared().max(1.0) {
            return Err(Error::NotOnHpq(n2));
        }
        Ok(self.project_unchecked(z))
    }

    pub(crate) fn project_unchecked(&self, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let a = DVector::from_fn(self.p(), |i, _| self.form.pair(z, &self.e.column(i).into_owned()));
        let b = DVector::from_fn(self.q() + 1, |j, _| -self.form.pair(z, &self.f.column(j).into_owned()));
        let s = b.norm();
        (a / (s + 1.0), b / s)
    }

    /// Basepoint `Π(0, f_0)` of the canonical position.
    pub fn canonical_point(&self) -> DVector<f64> {
        self.f.column(0).into_owned()
    }
}

/// Spherical distance on the disk: `cos d = (4<u,u'> + (1-|u|²)(1-|u'|²)) / ((1+|u|²)(1+|u'|²))`.
pub fn spherical_dist_disk(u: &[f64], w: &[f64]) -> Result<f64> {
    if u.len() != w.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), got: w.len() });
    }
    let (a, b) = (norm2(u), norm2(w));
    for r2 in [a, b] {
        if r2 >= 1.0 {
            return Err(Error::OutsideDisk(r2.sqrt()));
        }
    }
    let dot: f64 = u.iter().zip(w).map(|(s, t)| s * t).sum();
    let c = (4.0 * dot + (1.0 - a) * (1.0 - b)) / ((1.0 + a) * (1.0 + b));
    Ok(c.clamp(-1.0, 1.0).acos())
}

/// Spherical distance on `S^q` up to the antipodal map: `cos d = |<v,v'>|`.
pub fn spherical_dist_sphere(v: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
    if v.len() != w.len() {
        return Err(Error::DimensionMismatch { expected: v.len(), got: w.len() });
    }
    for x in [v, w] {
        if (x.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("sphere point has norm {}", x.norm())));
        }
    }
    Ok(v.dot(w).abs().min(1.0).acos())
}

fn norm2(u: &[f64]) -> f64 {
    u.iter().map(|t| t * t).sum()
}

/// `arccosh(max(|<o,x>|, 1))`.
///
/// Pairings within rounding of 1 (relative to the Euclidean sizes of `o` and
/// `x`) are snapped to 1, since `arccosh` turns an `eps` error into `sqrt(eps)`.
pub fn pseudo_distance(form: &QuadraticForm, o: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let c = form.pair(o, x).abs();
    let slack = 8.0 * f64::EPSILON * o.norm() * x.norm();
    if c <= 1.0 + slack {
        0.0
    } else {
        c.acosh()
    }
}

/// Mean curvature at a node, `H = g^{ij} II_{ij}`.
#[derive(Clone, Debug)]
pub struct MeanCurvature {
    /// `H` as an ambient vector.
    pub vector: DVector<f64>,
    /// Coefficients of `H` in a `Q`-orthonormal frame of the normal space
    /// (dimension `q`).
    pub coeffs: DVector<f64>,
    /// `sqrt |<H, H>|`, the maximality residual.
    pub residual: f64,
}

/// A spacelike `p`-submanifold of `H^{p,q}` as the graph of `u: D^p -> S^q`
/// sampled on a truncated disk lattice.
#[derive(Clone, Debug)]
pub struct SpacelikeGraph {
    model: PoincareModel,
    lattice: Arc<DiskLattice>,
    values: Vec<DVector<f64>>,
}

impl SpacelikeGraph {
    pub fn new(model: PoincareModel, lattice: Arc<DiskLattice>, values: Vec<DVector<f64>>) -> Result<Self> {
        if lattice.p() != model.p() {
            return Err(Error::DimensionMismatch { expected: model.p(), got: lattice.p() });
        }
        if values.len() != lattice.len() {
            return Err(Error::DimensionMismatch { expected: lattice.len(), got: values.len() });
        }
        for v in &values {
            if v.len() != model.q() + 1 {
                return Err(Error::DimensionMismatch { expected: model.q() + 1, got: v.len() });
            }
            if !((v.norm() - 1.0).abs() <= UNIT_TOL) {
                return Err(Error::InvalidParameter(format!("graph value has norm {}", v.norm())));
            }
        }
        Ok(Self { model, lattice, values })
    }

    /// Graph of `f`, whose values are normalized onto the sphere.
    pub fn from_fn(
        model: PoincareModel,
        lattice: Arc<DiskLattice>,
        f: impl Fn(&[f64]) -> DVector<f64>,
    ) -> Result<Self> {
        let values = (0..lattice.len())
            .map(|k| {
                let v = f(lattice.x(k));
                let n = v.norm();
                if !(n > 0.0) {
                    return Err(Error::Degenerate("graph value vanishes"));
                }
                Ok(v / n)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(model, lattice, values)
    }

    pub fn constant(model: PoincareModel, lattice: Arc<DiskLattice>, v0: &DVector<f64>) -> Result<Self> {
        Self::from_fn(model, lattice, |_| v0.clone())
    }

    /// The image under `g ∈ SO(p, q+1)` of the totally geodesic copy of `H^p`
    /// in `span(E, f_0)`, written as a graph over the same chart.
    pub fn totally_geodesic(model: PoincareModel, lattice: Arc<DiskLattice>, g: &DMatrix<f64>) -> Result<Self> {
        let form = *model.form();
        let q = model.q();
        let f = model.f_basis().clone();
        let normals: Vec<DVector<f64>> = (1..=q).map(|k| g * f.column(k)).collect();
        let w = g * f.column(0);
        // A[k][j] = <F_j, n_k>
        let a = DMatrix::from_fn(q, q + 1, |k, j| form.pair(&f.column(j).into_owned(), &normals[k]));
        let (pinv, kernel) = if q == 0 {
            (DMatrix::zeros(1, 0), DVector::from_element(1, 1.0))
        } else {
            let svd = a.clone().svd(true, true);
            let v_t = svd.v_t.clone().expect("requested V^T");
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
            if svd.singular_values[order[q - 1]] < 1e-12 {
                return Err(Error::Degenerate("subspace is not transverse to the fibres"));
            }
            let pinv = svd.pseudo_inverse(1e-12).map_err(|_| Error::Degenerate("pseudo-inverse"))?;
            // the right-singular direction missing from the q singular values
            let mut kern = DVector::from_element(q + 1, 0.0);
            let mut basis = DMatrix::identity(q + 1, q + 1);
            for &r in order.iter().take(q) {
                let row = v_t.row(r).transpose();
                for c in 0..=q {
                    let col = basis.column(c).into_owned();
                    let proj = row.dot(&col);
                    basis.set_column(c, &(col - &row * proj));
                }
            }
            let mut best = 0.0;
            for c in 0..=q {
                let col = basis.column(c);
                if col.norm() > best {
                    best = col.norm();
                    kern = col / best;
                }
            }
            (pinv, kern)
        };
        let e = model.e_basis().clone();
        let values = (0..lattice.len())
            .map(|node| {
                let x = lattice.x(node);
                let r2 = norm2(x);
                let c = (1.0 + r2) / (1.0 - r2);
                let mut xe = DVector::zeros(form.dim());
                for (i, xi) in x.iter().enumerate() {
                    xe.axpy(2.0 * xi / (1.0 - r2), &e.column(i), 1.0);
                }
                let b = DVector::from_fn(q, |k, _| -form.pair(&xe, &normals[k]) / c);
                let vp = &pinv * b;
                let t2 = 1.0 - vp.norm_squared();
                if t2 < -1e-12 {
                    return Err(Error::NotSpacelike { node });
                }
                let t = t2.max(0.0).sqrt();
                let plus = &vp + &kernel * t;
                let z = model.embed_unchecked(x, &plus);
                let v = if form.pair(&z, &w) < 0.0 { plus } else { &vp - &kernel * t };
                Ok(&v / v.norm())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(model, lattice, values)
    }

    pub fn model(&self) -> &PoincareModel {
        &self.model
    }

    pub fn lattice(&self) -> &Arc<DiskLattice> {
        &self.lattice
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn value(&self, node: usize) -> &DVector<f64> {
        &self.values[node]
    }

    pub fn into_values(self) -> Vec<DVector<f64>> {
        self.values
    }

    /// Same chart and model, new values (normalized).
    pub fn with_values(&self, values: Vec<DVector<f64>>) -> Result<Self> {
        let values = values.into_iter().map(|v| v.normalize()).collect();
        Self::new(self.model.clone(), self.lattice.clone(), values)
    }

    /// Ambient point `Π(x, u(x))` of a node.
    pub fn position(&self, node: usize) -> DVector<f64> {
        self.model.embed_unchecked(self.lattice.x(node), &self.values[node])
    }

    pub fn positions(&self) -> Vec<DVector<f64>> {
        (0..self.lattice.len()).map(|k| self.position(k)).collect()
    }

    pub fn boundary_trace(&self) -> Vec<(usize, DVector<f64>)> {
        self.lattice.boundary_nodes().map(|k| (k, self.values[k].clone())).collect()
    }

    /// Largest ratio `d_S(u(x), u(x')) / d_D(x, x')` over stencil edges.
    pub fn lipschitz_constant(&self) -> Result<f64> {
        let lat = &self.lattice;
        let mut worst = 0.0f64;
        for k in 0..lat.len() {
            for off in lat.offsets() {
                // visit each undirected edge once
                if off.iter().find(|&&d| d != 0).copied() != Some(1) {
                    continue;
                }
                let Some(nb) = lat.neighbor(k, off) else { continue };
                let dd = spherical_dist_disk(lat.x(k), lat.x(nb))?;
                if dd <= 0.0 {
                    return Err(Error::Degenerate("coincident grid nodes"));
                }
                let ds = self.values[k].dot(&self.values[nb]).abs().min(1.0).acos();
                worst = worst.max(ds / dd);
            }
        }
        Ok(worst)
    }

    /// Centered first and second differences of `X` at an interior node.
    fn derivatives(
        &self,
        node: usize,
        cache: Option<&[DVector<f64>]>,
    ) -> Result<(DVector<f64>, Vec<DVector<f64>>, Vec<DVector<f64>>)> {
        let lat = &self.lattice;
        if !lat.is_interior(node) {
            return Err(Error::NotInterior(node));
        }
        let p = lat.p();
        let h = lat.h();
        let pos = |k: usize| match cache {
            Some(c) => c[k].clone(),
            None => self.position(k),
        };
        let x0 = pos(node);
        let at = |off: &[isize]| pos(lat.neighbor(node, off).expect("interior stencil"));
        let mut first = Vec::with_capacity(p);
        let mut second = vec![DVector::zeros(0); p * p];
        let mut off = vec![0isize; p];
        for i in 0..p {
            off[i] = 1;
            let xp = at(&off);
            off[i] = -1;
            let xm = at(&off);
            off[i] = 0;
            first.push((&xp - &xm) / (2.0 * h));
            second[i * p + i] = (&xp - &x0 * 2.0 + &xm) / (h * h);
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let mut corner = |si: isize, sj: isize| {
                    off[i] = si;
                    off[j] = sj;
                    let v = at(&off);
                    off[i] = 0;
                    off[j] = 0;
                    v
                };
                let pp = corner(1, 1);
                let pm = corner(1, -1);
                let mp = corner(-1, 1);
                let mm = corner(-1, -1);
                let d = (pp - pm - mp + mm) / (4.0 * h * h);
                second[i * p + j] = d.clone();
                second[j * p + i] = d;
            }
        }
        Ok((x0, first, second))
    }

    fn gram_of(&self, first: &[DVector<f64>]) -> DMatrix<f64> {
        let form = self.model.form();
        let p = first.len();
        DMatrix::from_fn(p, p, |i, j| form.pair(&first[i], &first[j]))
    }

    /// `g_ij = <∂_i X, ∂_j X>` by centered differences; must be positive definite.
    pub fn induced_metric(&self, node: usize) -> Result<DMatrix<f64>> {
        let (_, first, _) = self.derivatives(node, None)?;
        let g = self.gram_of(&first);
        if g.clone().cholesky().is_none() {
            return Err(Error::NotSpacelike { node });
        }
        Ok(g)
    }

    /// Metric at any node: centered differences where both neighbours exist,
    /// one-sided otherwise. Nodes lacking both neighbours along some axis
    /// borrow the metric of their inward neighbour.
    pub fn metric_any(&self, node: usize) -> DMatrix<f64> {
        let lat = &self.lattice;
        let p = lat.p();
        let h = lat.h();
        let x0 = self.position(node);
        let mut first = Vec::with_capacity(p);
        for i in 0..p {
            let d = match (lat.step(node, i, 1), lat.step(node, i, -1)) {
                (Some(a), Some(b)) => (self.position(a) - self.position(b)) / (2.0 * h),
                (Some(a), None) => (self.position(a) - &x0) / h,
                (None, Some(b)) => (&x0 - self.position(b)) / h,
                (None, None) => {
                    let x = lat.x(node);
                    let axis = (0..p).max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs())).unwrap();
                    let inward = if x[axis] > 0.0 { -1 } else { 1 };
                    let nb = lat.step(node, axis, inward).expect("inward neighbour exists");
                    return self.metric_any(nb);
                }
            };
            first.push(d);
        }
        self.gram_of(&first)
    }

    pub fn is_spacelike(&self) -> bool {
        self.lattice.interior_nodes().all(|k| self.induced_metric(k).is_ok())
    }

    /// Mean curvature vector via a `Q`-orthonormal frame of the normal space
    /// obtained by projecting the `F`-basis off `span(∂X, X)`.
    pub fn mean_curvature(&self, node: usize) -> Result<MeanCurvature> {
        self.mean_curvature_cached(node, None)
    }

    /// As [`mean_curvature`](Self::mean_curvature), reading node positions
    /// from `positions` when given (as returned by [`positions`](Self::positions)).
    pub fn mean_curvature_cached(&self, node: usize, positions: Option<&[DVector<f64>]>) -> Result<MeanCurvature> {
        let form = *self.model.form();
        let (x0, first, second) = self.derivatives(node, positions)?;
        let p = first.len();
        let q = self.model.q();
        let g = self.gram_of(&first);
        let ginv = g.clone().cholesky().ok_or(Error::NotSpacelike { node })?.inverse();
        let mut hraw = DVector::zeros(form.dim());
        for i in 0..p {
            for j in 0..p {
                hraw.axpy(ginv[(i, j)], &second[i * p + j], 1.0);
            }
        }
        let mut t = DMatrix::zeros(form.dim(), p + 1);
        for (i, d) in first.iter().enumerate() {
            t.set_column(i, d);
        }
        t.set_column(p, &x0);
        let gt = form.gram(&t);
        let gt_inv = gt.try_inverse().ok_or(Error::Degenerate("tangent frame"))?;
        let j = form.signature_matrix();
        let proj = &t * gt_inv * t.transpose() * &j;
        let f = self.model.f_basis();
        let w = f - &proj * f;
        let gw = form.gram(&w);
        let eig = gw.symmetric_eigen();
        let mut order: Vec<usize> = (0..=q).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let scale = eig.eigenvalues.amax().max(1.0);
        let mut coeffs = DVector::zeros(q);
        let mut vector = DVector::zeros(form.dim());
        for (a, &idx) in order.iter().take(q).enumerate() {
            let lam = eig.eigenvalues[idx];
            if lam > -1e-12 * scale {
                return Err(Error::Degenerate("normal frame"));
            }
            let n = &w * eig.eigenvectors.column(idx) / (-lam).sqrt();
            let c = -form.pair(&hraw, &n);
            coeffs[a] = c;
            vector.axpy(c, &n, 1.0);
        }
        let residual = coeffs.norm();
        Ok(MeanCurvature { vector, coeffs, residual })
    }

    /// Sup of the maximality residual over interior nodes.
    pub fn max_residual(&self) -> Result<f64> {
        let pos = self.positions();
        let mut worst = 0.0f64;
        for k in self.lattice.interior_nodes() {
            worst = worst.max(self.mean_curvature_cached(k, Some(&pos))?.residual);
        }
        Ok(worst)
    }

    /// Root mean square of the residual, weighted by the area element.
    pub fn rms_residual(&self) -> Result<f64> {
        let pos = self.positions();
        let (mut num, mut den) = (0.0, 0.0);
        for k in self.lattice.interior_nodes() {
            let r = self.mean_curvature_cached(k, Some(&pos))?.residual;
            let (_, first, _) = self.derivatives(k, Some(&pos))?;
            let a = self.gram_of(&first).determinant().max(0.0).sqrt();
            num += a * r * r;
            den += a;
        }
        Ok((num / den).sqrt())
    }

    /// Metric of every node, row-major, for shortest-path queries.
    pub fn metric_entries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.lattice.len() * self.lattice.p().pow(2));
        for k in 0..self.lattice.len() {
            out.extend(self.metric_any(k).transpose().iter());
        }
        out
    }

    /// Intrinsic distances from `source` to every node.
    pub fn distances_from(&self, source: usize) -> Result<Vec<f64>> {
        if source >= self.lattice.len() {
            return Err(Error::InvalidParameter(format!("node {source} out of range")));
        }
        let field = MetricField::new(&self.lattice, self.metric_entries())?;
        Ok(geodesic_distances(&field, source))
    }

    pub fn intrinsic_distance(&self, a: usize, b: usize) -> Result<f64> {
        if b >= self.lattice.len() {
            return Err(Error::InvalidParameter(format!("node {b} out of range")));
        }
        let d = self.distances_from(a)?[b];
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::Disconnected)
        }
    }

    /// `u` at an arbitrary chart point, multilinearly interpolated and
    /// renormalized.
    pub fn sample_u(&self, x: &[f64]) -> DVector<f64> {
        let mut w = Vec::new();
        self.lattice.interp_weights(x, &mut w);
        let mut v = DVector::zeros(self.model.q() + 1);
        for (k, c) in w {
            v.axpy(c, &self.values[k], 1.0);
        }
        v.normalize()
    }

    /// `g·M` resampled onto `target` (p = 2 only). Target nodes not covered
    /// by the image triangulation are filled by clamped extrapolation from
    /// the closest image triangle and listed in the result.
    pub fn resample(&self, g: &DMatrix<f64>, target: Arc<DiskLattice>) -> Result<Resampled> {
        if self.lattice.p() != 2 || target.p() != 2 {
            return Err(Error::InvalidParameter("resampling is implemented for p = 2".into()));
        }
        let lat = &self.lattice;
        let n = lat.n() as isize;
        let images: Vec<(DVector<f64>, DVector<f64>)> =
            (0..lat.len()).map(|k| self.model.project_unchecked(&(g * self.position(k)))).collect();
        let mut tris: Vec<[usize; 3]> = Vec::new();
        for k in 0..lat.len() {
            let m = lat.multi_index(k);
            if m[0] as isize + 1 >= n || m[1] as isize + 1 >= n {
                continue;
            }
            let (i, j) = (m[0] as isize, m[1] as isize);
            let c = [
                lat.index_of(&[i, j]),
                lat.index_of(&[i + 1, j]),
                lat.index_of(&[i, j + 1]),
                lat.index_of(&[i + 1, j + 1]),
            ];
            match c {
                [Some(a), Some(b), Some(cc), Some(d)] => {
                    tris.push([a, b, d]);
                    tris.push([a, d, cc]);
                }
                [Some(a), Some(b), Some(cc), None] => tris.push([a, b, cc]),
                [Some(a), Some(b), None, Some(d)] => tris.push([a, b, d]),
                [Some(a), None, Some(cc), Some(d)] => tris.push([a, d, cc]),
                [None, Some(b), Some(cc), Some(d)] => tris.push([b, d, cc]),
                _ => {}
            }
        }
        // bucket triangles by bounding box over [-1, 1]^2
        let nb = (target.n()).max(8);
        let cell = 2.0 / nb as f64;
        let bucket = |t: f64| (((t + 1.0) / cell).floor() as isize).clamp(0, nb as isize - 1) as usize;
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); nb * nb];
        for (ti, tri) in tris.iter().enumerate() {
            let xs: Vec<&DVector<f64>> = tri.iter().map(|&k| &images[k].0).collect();
            let (x0, x1) = (
                xs.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min),
                xs.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max),
            );
            let (y0, y1) = (
                xs.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min),
                xs.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max),
            );
            for bx in bucket(x0)..=bucket(x1) {
                for by in bucket(y0)..=bucket(y1) {
                    buckets[bx * nb + by].push(ti);
                }
            }
        }
        let bary = |tri: &[usize; 3], x: &[f64]| -> [f64; 3] {
            let a = &images[tri[0]].0;
            let b = &images[tri[1]].0;
            let c = &images[tri[2]].0;
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
            let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
            [1.0 - l1 - l2, l1, l2]
        };
        let mut values = Vec::with_capacity(target.len());
        let mut uncovered = Vec::new();
        for k in 0..target.len() {
            let x = target.x(k);
            let (bx, by) = (bucket(x[0]), bucket(x[1]));
            let mut best: Option<(f64, usize, [f64; 3])> = None;
            for radius in 0..=2isize {
                for dx in -radius..=radius {
                    for dy in -radius..=radius {
                        let (cx, cy) = (bx as isize + dx, by as isize + dy);
                        if cx < 0 || cy < 0 || cx >= nb as isize || cy >= nb as isize {
                            continue;
                        }
                        for &ti in &buckets[cx as usize * nb + cy as usize] {
                            let l = bary(&tris[ti], x);
                            let m = l[0].min(l[1]).min(l[2]);
                            if best.as_ref().map_or(true, |b| m > b.0) {
                                best = Some((m, ti, l));
                            }
                        }
                    }
                }
                if best.as_ref().is_some_and(|b| b.0 >= -1e-12) {
                    break;
                }
            }
            let v = match best {
                Some((m, ti, l)) => {
                    if m < -1e-12 {
                        uncovered.push(k);
                    }
                    let l: Vec<f64> = if m < -1e-12 {
                        let c: Vec<f64> = l.iter().map(|t| t.max(0.0)).collect();
                        let s: f64 = c.iter().sum();
                        c.iter().map(|t| t / s).collect()
                    } else {
                        l.to_vec()
                    };
                    let tri = tris[ti];
                    (&images[tri[0]].1 * l[0] + &images[tri[1]].1 * l[1] + &images[tri[2]].1 * l[2])
                        .normalize()
                }
                None => {
                    uncovered.push(k);
                    let j = (0..images.len())
                        .min_by(|&a, &b| {
                            let da = (images[a].0[0] - x[0]).powi(2) + (images[a].0[1] - x[1]).powi(2);
                            let db = (images[b].0[0] - x[0]).powi(2) + (images[b].0[1] - x[1]).powi(2);
                            da.total_cmp(&db)
                        })
                        .expect("nonempty lattice");
                    images[j].1.clone()
                }
            };
            values.push(v);
        }
        let graph = SpacelikeGraph::new(self.model.clone(), target, values)?;
        Ok(Resampled { graph, uncovered })
    }

    /// `g·M` on the same lattice; every node must be covered.
    pub fn transform(&self, g: &DMatrix<f64>) -> Result<SpacelikeGraph> {
        let r = self.resample(g, self.lattice.clone())?;
        if r.uncovered.is_empty() {
            Ok(r.graph)
        } else {
            Err(Error::Uncovered { count: r.uncovered.len() })
        }
    }
}

#[derive(Clone, Debug)]
pub struct Resampled {
    pub graph: SpacelikeGraph,
    /// Target nodes outside the image of the source chart.
    pub uncovered: Vec<usize>,
}

/// Whether `u` is isometric on the ray from the origin towards `direction`:
/// `|d_S(u(r·dir), u(0)) - d_D(0, r·dir)| <= tol` at every sampled radius.
/// Radii are spaced by the lattice step, up to `r0`.
pub fn detect_lightlike_ray(m: &SpacelikeGraph, direction: &[f64], tol: f64) -> bool {
    let lat = m.lattice();
    let len = norm2(direction).sqrt();
    if !(len > 0.0) || direction.len() != lat.p() {
        return false;
    }
    let u0 = m.value(lat.center()).clone();
    let samples = (lat.n() - 1) / 2;
    let origin = vec![0.0; lat.p()];
    for k in 1..=samples {
        let r = lat.r0() * k as f64 / samples as f64;
        let x: Vec<f64> = direction.iter().map(|t| t / len * r).collect();
        let ds = m.sample_u(&x).dot(&u0).abs().min(1.0).acos();
        let dd = spherical_dist_disk(&origin, &x).expect("inside the chart");
        if (ds - dd).abs() > tol {
            return false;
        }
    }
    true
}

/// A submanifold with a marked node.
#[derive(Clone, Debug)]
pub struct PointedSubmanifold<M> {
    pub submanifold: M,
    pub basepoint: usize,
}

impl PointedSubmanifold<SpacelikeGraph> {
    pub fn new(submanifold: SpacelikeGraph, basepoint: usize) -> Result<Self> {
        if basepoint >= submanifold.lattice().len() {
            return Err(Error::InvalidParameter(format!("basepoint {basepoint} out of range")));
        }
        Ok(Self { submanifold, basepoint })
    }

    pub fn basepoint_position(&self) -> DVector<f64> {
        self.submanifold.position(self.basepoint)
    }
}

/// Result of comparing two pointed graphs over an intrinsic ball.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct C2Comparison {
    /// Sup over the ball of the metric difference and its first and second
    /// chart differences.
    pub metric_c2_gap: f64,
    /// Sup of the ambient Euclidean distance between corresponding points.
    pub embedding_gap: f64,
    /// Bilipschitz constant of the identity chart map between the metrics.
    pub bilip_const: f64,
}

/// Compare `B` to `A` on the intrinsic ball `B_A(o, R)`, using the identity of
/// the shared chart as the comparison map.
pub fn pointed_c2_compare(
    a: &PointedSubmanifold<SpacelikeGraph>,
    b: &PointedSubmanifold<SpacelikeGraph>,
    radius: f64,
) -> Result<C2Comparison> {
    let la = a.submanifold.lattice();
    let lb = b.submanifold.lattice();
    if la.p() != lb.p() || la.n() != lb.n() || la.r0() != lb.r0() {
        return Err(Error::InvalidParameter("graphs are sampled on different charts".into()));
    }
    if a.basepoint != b.basepoint {
        return Err(Error::InvalidParameter("basepoints differ in the shared chart".into()));
    }
    let dist = a.submanifold.distances_from(a.basepoint)?;
    let ball: Vec<usize> = (0..la.len()).filter(|&k| dist[k] <= radius).collect();
    if ball.iter().any(|&k| la.is_boundary(k)) {
        return Err(Error::BallExitsChart { radius });
    }
    let p = la.p();
    let h = la.h();
    let mut memo_a: Vec<Option<DMatrix<f64>>> = vec![None; la.len()];
    let mut memo_b: Vec<Option<DMatrix<f64>>> = vec![None; la.len()];
    let mut metric = |which: usize, k: usize| -> DMatrix<f64> {
        let (memo, g) = if which == 0 { (&mut memo_a, &a.submanifold) } else { (&mut memo_b, &b.submanifold) };
        memo[k].get_or_insert_with(|| g.metric_any(k)).clone()
    };
    let mut c2 = 0.0f64;
    let mut emb = 0.0f64;
    let mut bilip = 1.0f64;
    for &k in &ball {
        let ga = metric(0, k);
        let gb = metric(1, k);
        c2 = c2.max((&gb - &ga).amax());
        for i in 0..p {
            let (Some(kp), Some(km)) = (la.step(k, i, 1), la.step(k, i, -1)) else { continue };
            let (ap, am, bp, bm) = (metric(0, kp), metric(0, km), metric(1, kp), metric(1, km));
            let d1 = ((&bp - &bm) - (&ap - &am)) / (2.0 * h);
            let d2 = ((&bp - &gb * 2.0 + &bm) - (&ap - &ga * 2.0 + &am)) / (h * h);
            c2 = c2.max(d1.amax()).max(d2.amax());
        }
        emb = emb.max((b.submanifold.position(k) - a.submanifold.position(k)).norm());
        let chol = ga.clone().cholesky().ok_or(Error::NotSpacelike { node: k })?;
        let linv = chol.l().try_inverse().ok_or(Error::NotSpacelike { node: k })?;
        let m = &linv * &gb * linv.transpose();
        let ev = m.symmetric_eigen().eigenvalues;
        let (lo, hi) = (ev.min(), ev.max());
        if !(lo > 0.0) {
            return Err(Error::NotSpacelike { node: k });
        }
        bilip = bilip.max(hi.sqrt()).max(1.0 / lo.sqrt());
    }
    Ok(C2Comparison { metric_c2_gap: c2, embedding_gap: emb, bilip_const: bilip })
}
