//! Quadratic-form linear algebra on R^{p,q+1}.
//!
//! The signature form is `J = diag(+1 x p, -1 x (q+1))`. Everything here is a
//! pure function of immutable values: group membership tests for
//! `SO(p,q+1)` and `SL(d,R)`, rescaled limits of divergent matrix sequences
//! (points of the boundary of `G` in the projectivized matrix space), and the
//! kernel/image/isotropy tests built on top of them.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for group membership.
pub const TOL_GROUP: f64 = 1e-9;

/// Singular values below `RANK_CUTOFF * sigma_max` count as zero.
pub const RANK_CUTOFF: f64 = 1e-8;

/// Frobenius norm above which a group sequence is treated as unbounded.
pub const UNBOUNDED_NORM: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QuadraticForm {
    p: usize,
    q_plus_1: usize,
}

impl QuadraticForm {
    pub fn new(p: usize, q_plus_1: usize) -> Result<Self> {
        if p == 0 || q_plus_1 == 0 {
            return Err(Error::InvalidParameter(format!(
                "signature counts must be positive (p = {p}, q + 1 = {q_plus_1})"
            )));
        }
        Ok(Self { p, q_plus_1 })
    }

    /// The form of `R^{p,q}` in the convention where `H^{p,q}` lives in
    /// `R^{p+q+1}`, i.e. signature `(p, q+1)`.
    pub fn hpq(p: usize, q: usize) -> Result<Self> {
        Self::new(p, q + 1)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q_plus_1(&self) -> usize {
        self.q_plus_1
    }

    pub fn dim(&self) -> usize {
        self.p + self.q_plus_1
    }

    /// Sign of the `i`-th diagonal entry.
    #[inline]
    pub fn sign(&self, i: usize) -> f64 {
        if i < self.p {
            1.0
        } else {
            -1.0
        }
    }

    pub fn signature_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| if i == j { self.sign(i) } else { 0.0 })
    }

    pub fn bilinear(&self, z: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
        let d = self.dim();
        for v in [z, w] {
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.len() });
            }
        }
        Ok(self.pair(z, w))
    }

    /// Unchecked `z^T J w`; callers guarantee matching dimensions.
    #[inline]
    pub fn pair(&self, z: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for i in 0..z.len() {
            acc += self.sign(i) * z[i] * w[i];
        }
        acc
    }

    #[inline]
    pub fn norm2(&self, z: &DVector<f64>) -> f64 {
        self.pair(z, z)
    }

    /// Gram matrix `W^T J W` of the columns of `w`.
    pub fn gram(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let jw = DMatrix::from_fn(w.nrows(), w.ncols(), |i, j| self.sign(i) * w[(i, j)]);
        w.transpose() * jw
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GroupTag {
    /// `SO(p, q+1)`: preserves the signature form, determinant one.
    So(QuadraticForm),
    /// `SL(d, R)`.
    Sl(usize),
}

impl GroupTag {
    pub fn dim(&self) -> usize {
        match self {
            GroupTag::So(q) => q.dim(),
            GroupTag::Sl(d) => *d,
        }
    }
}

/// Membership test with relative tolerance `tol`.
///
/// For `SO` the defect `|g^T J g - J|_inf` is measured relative to
/// `max(1, |g|_inf^2)`, so large boosts are not rejected for rounding alone.
pub fn is_member(g: &DMatrix<f64>, tag: GroupTag, tol: f64) -> bool {
    let d = tag.dim();
    if g.nrows() != d || g.ncols() != d {
        return false;
    }
    if g.iter().any(|x| !x.is_finite()) {
        return false;
    }
    match tag {
        GroupTag::So(form) => {
            let j = form.signature_matrix();
            let defect = (g.transpose() * &j * g - &j).amax();
            let scale = g.amax().powi(2).max(1.0);
            let det = g.determinant();
            defect <= tol * scale && (det - 1.0).abs() <= tol * scale.powf(d as f64 / 2.0)
        }
        GroupTag::Sl(_) => {
            let det = g.determinant();
            let scale = g.amax().powi(d as i32).max(1.0);
            (det - 1.0).abs() <= tol * scale
        }
    }
}

/// A nonzero matrix up to positive scale, normalized to unit Frobenius norm
/// with the first entry of magnitude above rounding made positive.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectiveMatrix {
    matrix: DMatrix<f64>,
}

impl ProjectiveMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let norm = m.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Degenerate("zero matrix has no projective class"));
        }
        let mut matrix = m / norm;
        // row-major scan for the sign-fixing entry
        let cut = 1e-12;
        'outer: for i in 0..matrix.nrows() {
            for j in 0..matrix.ncols() {
                let x = matrix[(i, j)];
                if x.abs() > cut {
                    if x < 0.0 {
                        matrix.neg_mut();
                    }
                    break 'outer;
                }
            }
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn transpose(&self) -> ProjectiveMatrix {
        ProjectiveMatrix::new(self.matrix.transpose()).expect("transpose of a unit matrix is nonzero")
    }

    /// `phi^t`, the adjoint of `phi` with respect to the signature form:
    /// `<phi v, u> = <v, phi^t u>`.
    pub fn form_adjoint(&self, form: &QuadraticForm) -> ProjectiveMatrix {
        let j = form.signature_matrix();
        ProjectiveMatrix::new(&j * self.matrix.transpose() * &j)
            .expect("adjoint of a unit matrix is nonzero")
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }
}

/// Outcome of [`rescaled_limit`].
#[derive(Clone, Debug)]
pub struct RescaledLimit {
    pub limit: ProjectiveMatrix,
    /// Frobenius distance between the last two normalized iterates.
    pub residual: f64,
    /// The scale `a_n = 1 / |g_n|_F` of the last iterate.
    pub last_scale: f64,
}

/// Limit of `g_n / |g_n|_F`, approximated by the last iterate.
///
/// The residual is the distance between the last two normalized iterates;
/// above `tol` the sequence is reported as having no projective limit.
pub fn rescaled_limit(seq: &[DMatrix<f64>], tol: f64) -> Result<RescaledLimit> {
    let last = seq.last().ok_or(Error::Degenerate("empty matrix sequence"))?;
    let normalized: Vec<ProjectiveMatrix> = seq
        .iter()
        .rev()
        .take(2)
        .map(|g| ProjectiveMatrix::new(g.clone()))
        .collect::<Result<_>>()?;
    let residual = if normalized.len() == 2 {
        (normalized[0].matrix() - normalized[1].matrix()).norm()
    } else {
        0.0
    };
    if residual > tol {
        return Err(Error::NoProjectiveLimit { residual });
    }
    Ok(RescaledLimit {
        limit: normalized.into_iter().next().unwrap(),
        residual,
        last_scale: 1.0 / last.norm(),
    })
}

/// Whether a sequence leaves every bounded set at the configured threshold.
pub fn is_unbounded(seq: &[DMatrix<f64>]) -> bool {
    seq.iter().any(|g| g.norm() > UNBOUNDED_NORM)
}

/// Orthonormal bases (as matrix columns) of `Ker phi` and `Im phi`.
#[derive(Clone, Debug)]
pub struct KernelImage {
    pub kernel: DMatrix<f64>,
    pub image: DMatrix<f64>,
    pub singular_values: Vec<f64>,
}

impl KernelImage {
    pub fn rank(&self) -> usize {
        self.image.ncols()
    }
}

/// Rank-revealing split via SVD; singular values at or below
/// `tol * sigma_max` are treated as zero.
pub fn kernel_and_image(phi: &ProjectiveMatrix, tol: f64) -> KernelImage {
    let m = phi.matrix();
    let d = m.nrows();
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma_max = svd.singular_values[order[0]];
    let cut = tol * sigma_max;
    let rank = order.iter().filter(|&&k| svd.singular_values[k] > cut).count();
    // φ·v_i lies in the range to rounding even where the SVD's left vectors
    // carry its (looser) convergence error; U only fixes the orientation
    let pushed = DMatrix::from_fn(d, rank, |i, c| (m.row(i) * v_t.row(order[c]).transpose())[(0, 0)]);
    let mut image = pushed.qr().q();
    for c in 0..rank {
        let sign = (0..d).map(|i| image[(i, c)] * u[(i, order[c])]).sum::<f64>().signum();
        image.column_mut(c).scale_mut(sign);
    }
    let kernel = DMatrix::from_fn(d, d - rank, |i, c| v_t[(order[rank + c], i)]);
    KernelImage {
        kernel,
        image,
        singular_values: order.iter().map(|&k| svd.singular_values[k]).collect(),
    }
}

/// Whether every Gram entry `w_i^T J w_j` is within `tol` of zero.
pub fn is_totally_isotropic(w: &DMatrix<f64>, form: &QuadraticForm, tol: f64) -> Result<bool> {
    if w.ncols() == 0 {
        return Err(Error::TrivialSubspace);
    }
    if w.nrows() != form.dim() {
        return Err(Error::DimensionMismatch { expected: form.dim(), got: w.nrows() });
    }
    Ok(form.gram(w).amax() <= tol)
}

/// Largest Gram entry of the columns of `w`.
pub fn isotropy_defect(w: &DMatrix<f64>, form: &QuadraticForm) -> f64 {
    if w.ncols() == 0 {
        return 0.0;
    }
    form.gram(w).amax()
}

/// True iff some sample point escapes `Ker phi`, i.e. `|phi x| > tol |x|`.
pub fn avoidance_check(phi: &ProjectiveMatrix, sample: &[DVector<f64>], tol: f64) -> bool {
    sample.iter().any(|x| phi.apply(x).norm() > tol * x.norm())
}

/// Largest relative escape `|phi x| / |x|` over the sample.
pub fn avoidance_margin(phi: &ProjectiveMatrix, sample: &[DVector<f64>]) -> f64 {
    sample
        .iter()
        .filter(|x| x.norm() > 0.0)
        .map(|x| phi.apply(x).norm() / x.norm())
        .fold(0.0, f64::max)
}

/// Boost of rapidity `t` in the coordinate plane `(i, j)`, with `i` positive
/// and `j` negative for the form.
pub fn boost(d: usize, i: usize, j: usize, t: f64) -> DMatrix<f64> {
    let mut g = DMatrix::identity(d, d);
    let (c, s) = (t.cosh(), t.sinh());
    g[(i, i)] = c;
    g[(j, j)] = c;
    g[(i, j)] = s;
    g[(j, i)] = s;
    g
}

/// Rotation by angle `t` in the coordinate plane `(i, j)`.
pub fn rotation(d: usize, i: usize, j: usize, t: f64) -> DMatrix<f64> {
    let mut g = DMatrix::identity(d, d);
    let (c, s) = (t.cos(), t.sin());
    g[(i, i)] = c;
    g[(j, j)] = c;
    g[(i, j)] = -s;
    g[(j, i)] = s;
    g
}

/// Inverse of an `SO(p,q+1)` element via `J g^T J`.
pub fn so_inverse(g: &DMatrix<f64>, form: &QuadraticForm) -> DMatrix<f64> {
    let j = form.signature_matrix();
    &j * g.transpose() * &j
}

/// Random element of `SO(p, q+1)`: a product of plane rotations inside the
/// positive and negative blocks and boosts between them, rapidities bounded
/// by `max_rapidity`.
pub fn random_so<R: rand::Rng>(form: &QuadraticForm, max_rapidity: f64, rng: &mut R) -> DMatrix<f64> {
    let d = form.dim();
    let p = form.p();
    let mut g = DMatrix::identity(d, d);
    for _ in 0..3 {
        for i in 0..d {
            for j in (i + 1)..d {
                let both_pos = j < p;
                let both_neg = i >= p;
                let m = if both_pos || both_neg {
                    rotation(d, i, j, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
                } else {
                    boost(d, i, j, rng.gen_range(-max_rapidity..max_rapidity) / 3.0)
                };
                g = m * g;
            }
        }
    }
    g
}

/// Random element of `SL(d, R)` near the identity: `exp`-free construction
/// by a product of shears and a unimodular diagonal.
pub fn random_sl<R: rand::Rng>(d: usize, spread: f64, rng: &mut R) -> DMatrix<f64> {
    let mut g = DMatrix::identity(d, d);
    for i in 0..d {
        for j in 0..d {
            if i != j {
                let mut s = DMatrix::identity(d, d);
                s[(i, j)] = rng.gen_range(-spread..spread);
                g = s * g;
            }
        }
    }
    let mut logs: Vec<f64> = (0..d).map(|_| rng.gen_range(-spread..spread)).collect();
    let mean = logs.iter().sum::<f64>() / d as f64;
    for l in &mut logs {
        *l -= mean;
    }
    let diag = DMatrix::from_fn(d, d, |i, j| if i == j { logs[i].exp() } else { 0.0 });
    diag * g
}
