//! Finitely generated groups acting by matrices.
//!
//! Words are sequences of signed letters: `i + 1` is the generator `i` and
//! `-(i + 1)` its inverse.

mod member;
mod pipeline;

pub use member::{
    invariance_residual, renormalize, select_basepoint, FamilyTag, Invariance, Member, PointedMember, Renormalization,
};
pub use pipeline::{
    displacement_fit, stabilizer_properness_probe, renormalization_pipeline, DisplacementFit, PipelineParams,
    PipelineReport, ProbeReport, ProbeSample,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::forms::{is_member, so_inverse, GroupTag, QuadraticForm, TOL_GROUP};

/// Relators must evaluate to the identity within this (relative) tolerance.
pub const TOL_REP: f64 = 1e-8;

pub type Word = Vec<i32>;

pub fn letter(generator: usize, inverse: bool) -> i32 {
    let l = generator as i32 + 1;
    if inverse {
        -l
    } else {
        l
    }
}

pub fn inverse_word(w: &[i32]) -> Word {
    w.iter().rev().map(|l| -l).collect()
}

/// Free cancellation of adjacent inverse pairs.
pub fn free_reduce(w: &[i32]) -> Word {
    let mut out: Word = Vec::with_capacity(w.len());
    for &l in w {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

pub fn word_length(w: &[i32]) -> usize {
    free_reduce(w).len()
}

/// All reduced words of length at most `n` in `rank` free generators,
/// ordered by length.
pub fn ball(rank: usize, n: usize) -> Vec<Word> {
    let letters: Vec<i32> = (0..rank).flat_map(|i| [letter(i, false), letter(i, true)]).collect();
    let mut out = vec![Word::new()];
    let mut shell = vec![Word::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(shell.len() * letters.len());
        for w in &shell {
            for &l in &letters {
                if w.last() == Some(&-l) {
                    continue;
                }
                let mut v = w.clone();
                v.push(l);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        shell = next;
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinGenGroup {
    names: Vec<String>,
    relators: Vec<Word>,
}

impl FinGenGroup {
    pub fn new(names: Vec<String>, relators: Vec<Word>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidParameter("a group needs at least one generator".into()));
        }
        let r = names.len() as i32;
        for w in &relators {
            if w.iter().any(|&l| l == 0 || l.abs() > r) {
                return Err(Error::InvalidParameter(format!("relator {w:?} uses an unknown generator")));
            }
        }
        Ok(Self { names, relators })
    }

    /// Free group on generators `a0, a1, ...`.
    pub fn free(rank: usize) -> Result<Self> {
        Self::new((0..rank).map(|i| format!("a{i}")).collect(), Vec::new())
    }

    pub fn rank(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn relators(&self) -> &[Word] {
        &self.relators
    }

    pub fn check_word(&self, w: &[i32]) -> Result<()> {
        let r = self.rank() as i32;
        match w.iter().find(|&&l| l == 0 || l.abs() > r) {
            Some(l) => Err(Error::InvalidParameter(format!("letter {l} is not a generator"))),
            None => Ok(()),
        }
    }

    /// Parses `"a0 a3 a2^-1"`; `"1"` or the empty string is the identity.
    pub fn parse_word(&self, s: &str) -> Result<Word> {
        let mut w = Word::new();
        for tok in s.split_whitespace() {
            if tok == "1" {
                continue;
            }
            let (name, inv) = match tok.strip_suffix("^-1") {
                Some(n) => (n, true),
                None => (tok, false),
            };
            let i = self
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown generator {name:?}")))?;
            w.push(letter(i, inv));
        }
        Ok(w)
    }

    pub fn format_word(&self, w: &[i32]) -> String {
        if w.is_empty() {
            return "1".into();
        }
        w.iter()
            .map(|&l| {
                let n = &self.names[(l.unsigned_abs() - 1) as usize];
                if l < 0 {
                    format!("{n}^-1")
                } else {
                    n.clone()
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// A homomorphism from a finitely presented group into `SO(p, q+1)` or
/// `SL(d, R)`, given by generator images.
#[derive(Clone, Debug)]
pub struct Representation {
    group: FinGenGroup,
    tag: GroupTag,
    matrices: Vec<DMatrix<f64>>,
    inverses: Vec<DMatrix<f64>>,
}

fn group_inverse(g: &DMatrix<f64>, tag: GroupTag) -> Result<DMatrix<f64>> {
    match tag {
        GroupTag::So(form) => Ok(so_inverse(g, &form)),
        GroupTag::Sl(_) => g.clone().try_inverse().ok_or(Error::Degenerate("singular generator")),
    }
}

impl Representation {
    pub fn new(group: FinGenGroup, tag: GroupTag, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        if matrices.len() != group.rank() {
            return Err(Error::DimensionMismatch { expected: group.rank(), got: matrices.len() });
        }
        for (i, g) in matrices.iter().enumerate() {
            if !is_member(g, tag, TOL_GROUP) {
                return Err(Error::InvalidParameter(format!("generator {} is not in the group", group.names[i])));
            }
        }
        let inverses = matrices.iter().map(|g| group_inverse(g, tag)).collect::<Result<Vec<_>>>()?;
        let rho = Self { group, tag, matrices, inverses };
        let defect = rho.relator_defect();
        if defect > TOL_REP {
            return Err(Error::InvalidParameter(format!("relators fail by {defect:.3e}")));
        }
        Ok(rho)
    }

    pub fn group(&self) -> &FinGenGroup {
        &self.group
    }

    pub fn tag(&self) -> GroupTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.tag.dim()
    }

    pub fn generators(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn evaluate(&self, w: &[i32]) -> DMatrix<f64> {
        let d = self.dim();
        let mut g = DMatrix::identity(d, d);
        for &l in w {
            let i = (l.unsigned_abs() - 1) as usize;
            g *= if l > 0 { &self.matrices[i] } else { &self.inverses[i] };
        }
        g
    }

    /// Largest relator defect `|R - I|_max`, relative to the squared size of
    /// the generators (conjugating by a large element amplifies rounding).
    pub fn relator_defect(&self) -> f64 {
        let d = self.dim();
        let scale = self.matrices.iter().map(|g| g.amax()).fold(1.0, f64::max).powi(2);
        self.group
            .relators
            .iter()
            .map(|r| (self.evaluate(r) - DMatrix::identity(d, d)).amax() / scale)
            .fold(0.0, f64::max)
    }

    /// `g ρ g⁻¹`.
    pub fn conjugate(&self, g: &DMatrix<f64>) -> Result<Self> {
        let gi = group_inverse(g, self.tag)?;
        let matrices = self.matrices.iter().map(|m| g * m * &gi).collect();
        Self::new(self.group.clone(), self.tag, matrices)
    }

    /// Largest Frobenius norm of a generator image.
    pub fn generator_norm(&self) -> f64 {
        self.matrices.iter().map(|g| g.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise gap between generator images.
    pub fn distance(&self, other: &Self) -> f64 {
        self.matrices.iter().zip(&other.matrices).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max)
    }

    /// The same matrices read in another group of the same dimension.
    pub fn retagged(&self, tag: GroupTag) -> Result<Self> {
        Self::new(self.group.clone(), tag, self.matrices.clone())
    }

    /// Block embedding `g ↦ diag(g, I)` into a larger group; the new
    /// coordinates are appended after the old ones.
    pub fn block_embed(&self, tag: GroupTag) -> Result<Self> {
        let (d, n) = (self.dim(), tag.dim());
        if n < d {
            return Err(Error::DimensionMismatch { expected: d, got: n });
        }
        let matrices = self
            .matrices
            .iter()
            .map(|g| {
                let mut m = DMatrix::identity(n, n);
                m.view_mut((0, 0), (d, d)).copy_from(g);
                m
            })
            .collect();
        Self::new(self.group.clone(), tag, matrices)
    }
}

fn so21() -> GroupTag {
    GroupTag::So(QuadraticForm::hpq(2, 0).expect("valid signature"))
}

/// Reflection of `R^{2,1}` in the form-orthogonal complement of a spacelike `v`.
fn reflection(v: &nalgebra::DVector<f64>) -> DMatrix<f64> {
    let j = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, -1.0]));
    let jv = &j * v;
    let n2 = v.dot(&jv);
    DMatrix::identity(3, 3) - v * jv.transpose() * (2.0 / n2)
}

/// Orientation-preserving `(2,3,7)` triangle group in `SO(2,1)`:
/// `⟨a, b | a², b³, (ab)⁷⟩`, from reflections in a hyperbolic triangle with
/// angles `π/2, π/3, π/7`.
pub fn triangle_237() -> Representation {
    use std::f64::consts::PI;
    let m = [[1.0, 2.0, 7.0], [2.0, 1.0, 3.0], [7.0, 3.0, 1.0]];
    // Gram matrix of the unit mirror normals: <v_i, v_j> = -cos(π / m_ij)
    let gram = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { -(PI / m[i][j]).cos() });
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    // rows: sqrt|λ| · eigenvector, the negative eigenvalue last
    let v = DMatrix::from_fn(3, 3, |r, c| eig.eigenvalues[order[r]].abs().sqrt() * eig.eigenvectors[(c, order[r])]);
    let r: Vec<DMatrix<f64>> = (0..3).map(|i| reflection(&v.column(i).into_owned())).collect();
    let a = &r[0] * &r[1];
    let b = &r[1] * &r[2];
    let group = FinGenGroup::new(
        vec!["a".into(), "b".into()],
        vec![vec![1, 1], vec![2, 2, 2], [1, 2].repeat(7)],
    )
    .expect("valid presentation");
    Representation::new(group, so21(), vec![a, b]).expect("triangle group")
}

/// Genus-two surface group in `SO(2,1)` from the regular octagon with
/// angles `π/4`: `A_k` translates along the axis at angle `kπ/4` by twice
/// the inradius, and `A0 A3 A2⁻¹ A1 A0⁻¹ A3⁻¹ A2 A1⁻¹ = 1`.
pub fn genus_two() -> Representation {
    use crate::forms::{boost, rotation};
    use std::f64::consts::PI;
    let len = 2.0 * (1.0 / (PI / 8.0).tan()).acosh();
    let matrices = (0..4)
        .map(|k| {
            let t = k as f64 * PI / 4.0;
            rotation(3, 0, 1, t) * boost(3, 0, 2, len) * rotation(3, 0, 1, -t)
        })
        .collect();
    let names = (0..4).map(|k| format!("A{k}")).collect();
    let group = FinGenGroup::new(names, vec![vec![1, 4, -3, 2, -1, -4, 3, -2]]).expect("valid presentation");
    Representation::new(group, so21(), matrices).expect("surface group")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::boost;
    use proptest::prelude::*;

    #[test]
    fn word_examples() {
        assert_eq!(word_length(&[]), 0);
        assert_eq!(word_length(&[2]), 1);
        assert_eq!(word_length(&[1, 2, -2, -1, 3]), 1);
        let b = ball(2, 3);
        assert_eq!(b.len(), 1 + 4 + 12 + 36);
        assert!(b.iter().all(|w| word_length(w) == w.len()));
        assert_eq!(ball(3, 0), vec![Word::new()]);
    }

    #[test]
    fn parse_and_format_round_trip() {
        let g = genus_two();
        let w = g.group().parse_word("A0 A3 A2^-1 A1").unwrap();
        assert_eq!(w, vec![1, 4, -3, 2]);
        assert_eq!(g.group().format_word(&w), "A0 A3 A2^-1 A1");
        assert_eq!(g.group().parse_word("1").unwrap(), Word::new());
        assert!(g.group().parse_word("B7").is_err());
    }

    #[test]
    fn evaluate_examples() {
        let rho = genus_two();
        assert_eq!(rho.evaluate(&[]), DMatrix::identity(3, 3));
        let e = rho.evaluate(&[3, -3]);
        assert!((e - DMatrix::identity(3, 3)).amax() < 1e-12);
        assert!(rho.relator_defect() < TOL_REP);
        let t = triangle_237();
        assert!(t.relator_defect() < TOL_REP);
        // a has order exactly 2, b order 3, ab order 7
        for (w, k) in [(vec![1], 2), (vec![2], 3), (vec![1, 2], 7)] {
            let g = t.evaluate(&w);
            let mut p = g.clone();
            for m in 1..k {
                assert!((&p - DMatrix::identity(3, 3)).amax() > 1e-3, "order of {w:?} divides {m}");
                p = &p * &g;
            }
        }
    }

    #[test]
    fn embeddings_keep_relators() {
        let so22 = GroupTag::So(QuadraticForm::hpq(2, 1).unwrap());
        let rho = genus_two().block_embed(so22).unwrap();
        assert!(rho.relator_defect() < TOL_REP);
        assert_eq!(rho.generators()[0][(3, 3)], 1.0);
        let sl = genus_two().retagged(GroupTag::Sl(3)).unwrap();
        assert!(sl.relator_defect() < TOL_REP);
        let bad = FinGenGroup::new(vec!["x".into()], vec![vec![1]]).unwrap();
        assert!(Representation::new(bad, so21(), vec![boost(3, 0, 2, 0.3)]).is_err());
        assert!(FinGenGroup::new(vec!["x".into()], vec![vec![2]]).is_err());
    }

    fn word_strategy(rank: i32) -> impl Strategy<Value = Word> {
        prop::collection::vec((1..=rank, any::<bool>()).prop_map(|(l, s)| if s { l } else { -l }), 0..=8)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn conjugation_covariance(w in word_strategy(4), t in -1.5f64..1.5, s in -1.5f64..1.5) {
            let rho = genus_two();
            let g = boost(3, 1, 2, t) * crate::forms::rotation(3, 0, 1, s);
            let conj = rho.conjugate(&g).unwrap();
            let lhs = conj.evaluate(&w);
            let rhs = &g * rho.evaluate(&w) * so_inverse(&g, &QuadraticForm::hpq(2, 0).unwrap());
            let scale = rhs.amax().max(1.0);
            prop_assert!((lhs - rhs).amax() <= 1e-9 * scale);
        }

        #[test]
        fn reduction_preserves_the_element(w in word_strategy(2)) {
            let rho = triangle_237();
            let r = free_reduce(&w);
            prop_assert!(r.len() <= w.len());
            prop_assert!((rho.evaluate(&w) - rho.evaluate(&r)).amax() < 1e-8 * rho.evaluate(&w).amax().max(1.0));
            prop_assert_eq!(word_length(&inverse_word(&w)), word_length(&w));
        }
    }
}
