use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jets::ConvexDomain;

const CONE_TOL: f64 = 1e-12;

/// An orthonormal basis `(e_1, .., e_p, c)` of `R^{p+1}` with positive
/// orientation; the affine chart is `P(y) = E y + c`.
#[derive(Clone, Debug)]
pub struct Frame {
    pub e: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl Frame {
    pub fn around(c: &DVector<f64>) -> Result<Self> {
        let n = c.len();
        let norm = c.norm();
        if n < 2 || !(norm > 0.0) {
            return Err(Error::Degenerate("chart direction"));
        }
        let c = c / norm;
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
        // Gram-Schmidt on the coordinate axes, skipping the one closest to c
        let skip = c.iamax();
        for i in (0..n).filter(|&i| i != skip) {
            let mut v = DVector::zeros(n);
            v[i] = 1.0;
            v -= &c * c[i];
            for b in &basis {
                let d = b.dot(&v);
                v -= b * d;
            }
            basis.push(v.normalize());
        }
        let mut e = DMatrix::from_columns(&basis);
        let mut full = e.clone().insert_column(n - 1, 0.0);
        full.set_column(n - 1, &c);
        if full.determinant() < 0.0 {
            let flipped = -e.column(0);
            e.set_column(0, &flipped);
        }
        Ok(Self { e, c })
    }

    pub fn p(&self) -> usize {
        self.e.ncols()
    }

    pub fn lift(&self, y: &[f64]) -> DVector<f64> {
        &self.e * DVector::from_column_slice(y) + &self.c
    }

    /// Chart coordinates of the ray through `x`; needs `c . x > 0`.
    pub fn chart(&self, x: &DVector<f64>) -> Option<Vec<f64>> {
        let s = self.c.dot(x);
        if !(s > 0.0) {
            return None;
        }
        Some((self.e.transpose() * x / s).iter().copied().collect())
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Polyhedral { rays: Vec<DVector<f64>>, normals: Vec<DVector<f64>> },
    Round { q: DMatrix<f64>, e: DVector<f64> },
}

/// An open convex cone containing no lines: either polyhedral (p <= 2, given
/// by its extremal rays in cyclic order) or round (one negative eigenvalue).
#[derive(Clone, Debug)]
pub struct ConvexCone {
    kind: Kind,
    frame: Frame,
}

fn inward_normals(rays: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let dim = rays[0].len();
    let m = rays.len();
    let mut normals = Vec::with_capacity(m);
    let pairs: Vec<(usize, usize)> = if dim == 2 { vec![(0, 1), (1, 0)] } else { (0..m).map(|i| (i, (i + 1) % m)).collect() };
    for (f, &(i, j)) in pairs.iter().enumerate() {
        let n = if dim == 2 {
            DVector::from_vec(vec![-rays[i][1], rays[i][0]])
        } else {
            rays[i].cross(&rays[j])
        };
        let scale = rays[i].norm() * rays[j].norm();
        if n.norm() <= 1e-12 * scale {
            return Err(Error::Degenerate("parallel consecutive rays"));
        }
        let mut n = n.normalize();
        let mut pos = false;
        let mut neg = false;
        for (k, r) in rays.iter().enumerate() {
            if dim == 3 && (k == i || k == j) {
                continue;
            }
            if dim == 2 && k == i {
                continue;
            }
            let s = n.dot(r) / r.norm();
            if s > CONE_TOL {
                pos = true;
            } else if s < -CONE_TOL {
                neg = true;
            }
        }
        match (pos, neg) {
            (true, true) => return Err(Error::NotConvex(f)),
            (false, false) => return Err(Error::Degenerate("flat cone")),
            (false, true) => n = -n,
            _ => {}
        }
        normals.push(n);
    }
    Ok(normals)
}

impl ConvexCone {
    /// Cone over the convex polygon (p = 2) or interval (p = 1) spanned by
    /// `rays`, listed in cyclic order.
    pub fn polyhedral(rays: Vec<DVector<f64>>) -> Result<Self> {
        let dim = rays.first().map(|r| r.len()).unwrap_or(0);
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidParameter(format!("polyhedral cones need ambient dimension 2 or 3, got {dim}")));
        }
        if let Some(bad) = rays.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
        }
        if (dim == 2 && rays.len() != 2) || (dim == 3 && rays.len() < 3) {
            return Err(Error::InvalidParameter(format!("{} rays do not bound a cone in R^{dim}", rays.len())));
        }
        let normals = inward_normals(&rays)?;
        let unit = |v: &DVector<f64>| v / v.norm();
        let mut c = normals.iter().fold(DVector::zeros(dim), |acc, n| acc + n);
        if !normals.iter().all(|n| n.dot(&c) > CONE_TOL * c.norm()) {
            c = rays.iter().fold(DVector::zeros(dim), |acc, r| acc + unit(r));
        }
        let inside = normals.iter().all(|n| n.dot(&c) > CONE_TOL * c.norm());
        let dual = rays.iter().all(|r| r.dot(&c) > CONE_TOL * c.norm() * r.norm());
        if !(inside && dual) {
            return Err(Error::ContainsLine);
        }
        let frame = Frame::around(&c)?;
        Ok(Self { kind: Kind::Polyhedral { rays, normals }, frame })
    }

    /// The nappe of `{x^T Q x < 0}` containing `e`.
    pub fn round(q: DMatrix<f64>, e: DVector<f64>) -> Result<Self> {
        let n = q.nrows();
        if q.ncols() != n || e.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: e.len() });
        }
        if (&q - q.transpose()).amax() > 1e-12 * q.amax() {
            return Err(Error::InvalidParameter("quadratic form not symmetric".into()));
        }
        let eig = q.clone().symmetric_eigen();
        let scale = eig.eigenvalues.amax();
        let negatives: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] < 0.0).collect();
        if negatives.len() != 1 || eig.eigenvalues.iter().any(|l| l.abs() <= 1e-12 * scale) {
            return Err(Error::InvalidParameter("round cones need signature (n-1, 1)".into()));
        }
        if !(e.dot(&(&q * &e)) < 0.0) {
            return Err(Error::OutsideCone);
        }
        let mut c = eig.eigenvectors.column(negatives[0]).into_owned();
        if c.dot(&(&q * &e)) > 0.0 {
            c = -c;
        }
        let frame = Frame::around(&c)?;
        Ok(Self { kind: Kind::Round { q, e }, frame })
    }

    /// `{x_{p+1} > |x'|}` in `R^{p+1}`.
    pub fn standard_round(p: usize) -> Self {
        let mut q = DMatrix::identity(p + 1, p + 1);
        q[(p, p)] = -1.0;
        let mut e = DVector::zeros(p + 1);
        e[p] = 1.0;
        Self::round(q, e).expect("standard round cone")
    }

    /// The positive orthant of `R^{p+1}`, p = 1 or 2.
    pub fn orthant(p: usize) -> Result<Self> {
        let n = p + 1;
        Self::polyhedral((0..n).map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })).collect())
    }

    pub fn dim(&self) -> usize {
        self.frame.c.len()
    }

    pub fn p(&self) -> usize {
        self.dim() - 1
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn is_round(&self) -> bool {
        matches!(self.kind, Kind::Round { .. })
    }

    pub fn rays(&self) -> Option<&[DVector<f64>]> {
        match &self.kind {
            Kind::Polyhedral { rays, .. } => Some(rays),
            Kind::Round { .. } => None,
        }
    }

    pub fn quadric(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        match &self.kind {
            Kind::Round { q, e } => Some((q, e)),
            Kind::Polyhedral { .. } => None,
        }
    }

    pub fn facet_count(&self) -> usize {
        match &self.kind {
            Kind::Polyhedral { normals, .. } => normals.len(),
            Kind::Round { .. } => 0,
        }
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match &self.kind {
            Kind::Polyhedral { normals, .. } => {
                let s = x.norm();
                normals.iter().all(|n| n.dot(x) > CONE_TOL * s)
            }
            Kind::Round { q, e } => {
                let qx = q * x;
                let s = x.norm_squared() * q.amax();
                x.dot(&qx) < -CONE_TOL * s && qx.dot(e) < 0.0
            }
        }
    }

    /// Image `g C`.
    pub fn transformed(&self, g: &DMatrix<f64>) -> Result<Self> {
        let n = self.dim();
        if g.nrows() != n || g.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: g.nrows() });
        }
        match &self.kind {
            Kind::Polyhedral { rays, .. } => Self::polyhedral(rays.iter().map(|r| g * r).collect()),
            Kind::Round { q, e } => {
                let gi = g.clone().try_inverse().ok_or(Error::Degenerate("singular linear map"))?;
                let qn = gi.transpose() * q * &gi;
                let qn = (&qn + qn.transpose()) * 0.5;
                Self::round(qn, g * e)
            }
        }
    }

    /// The cross-section `{y : P(y) in C}` in the cone's chart.
    pub fn chart_domain(&self) -> ChartDomain {
        let f = &self.frame;
        match &self.kind {
            Kind::Polyhedral { normals, .. } => ChartDomain::Polyhedral {
                a: normals.iter().map(|n| -(f.e.transpose() * n)).collect(),
                b: normals.iter().map(|n| n.dot(&f.c)).collect(),
            },
            Kind::Round { q, .. } => ChartDomain::Quadric {
                m: f.e.transpose() * q * &f.e,
                l: f.e.transpose() * (q * &f.c),
                k0: f.c.dot(&(q * &f.c)),
            },
        }
    }

    /// Hilbert distance `log B(a, x, y, b)`, with `a`, `b` the boundary rays
    /// of the sector `C ∩ span{x, y}` on the sides of `x` and `y`.
    pub fn hilbert_distance(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        if !self.contains(x) || !self.contains(y) {
            return Err(Error::OutsideCone);
        }
        let (xn, yn) = (x / x.norm(), y / y.norm());
        if (&xn - &yn).norm() <= 1e-14 {
            return Ok(0.0);
        }
        let d = y - x;
        let (lo, hi) = self.line_interval(x, &d);
        if !(lo < 0.0 && hi > 1.0) {
            return Err(Error::OutsideCone);
        }
        let left = if lo.is_finite() { (1.0 - lo) / (-lo) } else { 1.0 };
        let right = if hi.is_finite() { hi / (hi - 1.0) } else { 1.0 };
        Ok((left * right).ln().max(0.0))
    }

    /// Parameter interval `(lo, hi)` of `{s : x + s d in C}` for `x` in `C`.
    pub(crate) fn line_interval(&self, x: &DVector<f64>, d: &DVector<f64>) -> (f64, f64) {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        match &self.kind {
            Kind::Polyhedral { normals, .. } => {
                for n in normals {
                    let a = n.dot(x);
                    let b = n.dot(d);
                    if b > 0.0 {
                        lo = lo.max(-a / b);
                    } else if b < 0.0 {
                        hi = hi.min(-a / b);
                    }
                }
            }
            Kind::Round { q, .. } => {
                let qd = q * d;
                let qa = d.dot(&qd);
                let qb = x.dot(&qd);
                let qc = x.dot(&(q * x));
                let scale = d.norm_squared() * q.amax();
                if qa.abs() <= 1e-14 * scale {
                    if qb > 0.0 {
                        hi = -qc / (2.0 * qb);
                    } else if qb < 0.0 {
                        lo = -qc / (2.0 * qb);
                    }
                } else {
                    let disc = qb * qb - qa * qc;
                    if disc > 0.0 {
                        let sq = disc.sqrt();
                        // stable roots of qa s^2 + 2 qb s + qc
                        let t = -(qb + qb.signum() * sq);
                        let (r1, r2) = {
                            let a = t / qa;
                            let b = qc / t;
                            if a < b { (a, b) } else { (b, a) }
                        };
                        if qa > 0.0 {
                            lo = r1;
                            hi = r2;
                        } else if r2 < 0.0 {
                            lo = r2;
                        } else {
                            hi = r1;
                        }
                    }
                }
            }
        }
        (lo, hi)
    }
}

/// A bounded convex chart region: `{a_i . y < b_i}` or `{y^T M y + 2 l . y + k0 < 0}`.
#[derive(Clone, Debug)]
pub enum ChartDomain {
    Polyhedral { a: Vec<DVector<f64>>, b: Vec<f64> },
    Quadric { m: DMatrix<f64>, l: DVector<f64>, k0: f64 },
}

impl ChartDomain {
    /// Half-width of a box about the chart origin containing the region.
    pub fn extent(&self) -> f64 {
        match self {
            ChartDomain::Quadric { m, l, k0 } => {
                let mi = m.clone().try_inverse().expect("elliptic cross-section");
                let y0 = -(&mi * l);
                let rho = l.dot(&(&mi * l)) - k0;
                (0..l.len())
                    .map(|i| y0[i].abs() + (rho * mi[(i, i)]).max(0.0).sqrt())
                    .fold(0.0, f64::max)
            }
            ChartDomain::Polyhedral { a, b } => {
                // vertices are intersections of p of the bounding hyperplanes
                let p = a[0].len();
                let mut best = 0.0f64;
                let m = a.len();
                let mut visit = |rows: &[usize]| {
                    let mat = DMatrix::from_fn(p, p, |r, c| a[rows[r]][c]);
                    let rhs = DVector::from_fn(p, |r, _| b[rows[r]]);
                    if let Some(v) = mat.lu().solve(&rhs) {
                        if a.iter().zip(b).all(|(ai, bi)| ai.dot(&v) <= bi + 1e-9 * (1.0 + bi.abs())) {
                            best = best.max(v.amax());
                        }
                    }
                };
                if p == 1 {
                    for i in 0..m {
                        visit(&[i]);
                    }
                } else {
                    for i in 0..m {
                        for j in (i + 1)..m {
                            visit(&[i, j]);
                        }
                    }
                }
                best
            }
        }
    }
}

impl ConvexDomain for ChartDomain {
    fn dim(&self) -> usize {
        match self {
            ChartDomain::Polyhedral { a, .. } => a[0].len(),
            ChartDomain::Quadric { l, .. } => l.len(),
        }
    }

    fn contains(&self, y: &[f64]) -> bool {
        let y = DVector::from_column_slice(y);
        match self {
            ChartDomain::Polyhedral { a, b } => a.iter().zip(b).all(|(ai, bi)| ai.dot(&y) < *bi),
            ChartDomain::Quadric { m, l, k0 } => y.dot(&(m * &y)) + 2.0 * l.dot(&y) + k0 < 0.0,
        }
    }

    fn exit(&self, y: &[f64], d: &[f64]) -> f64 {
        let y = DVector::from_column_slice(y);
        let d = DVector::from_column_slice(d);
        match self {
            ChartDomain::Polyhedral { a, b } => {
                let mut t = f64::INFINITY;
                for (ai, bi) in a.iter().zip(b) {
                    let rate = ai.dot(&d);
                    if rate > 0.0 {
                        t = t.min((bi - ai.dot(&y)) / rate);
                    }
                }
                t
            }
            ChartDomain::Quadric { m, l, k0 } => {
                let md = m * &d;
                let qa = d.dot(&md);
                let qb = y.dot(&md) + l.dot(&d);
                let qc = y.dot(&(m * &y)) + 2.0 * l.dot(&y) + k0;
                let sq = (qb * qb - qa * qc).max(0.0).sqrt();
                if qb > 0.0 {
                    -qc / (qb + sq)
                } else {
                    (sq - qb) / qa
                }
            }
        }
    }
}
