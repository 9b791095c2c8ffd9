//! Least-squares cubic jets on lattice stencils.
//!
//! Each node gets a 5^p stencil. Stencil points outside the domain are, in
//! the zero-boundary mode, replaced by the point where the ray from the node
//! through them leaves the domain, carrying the value zero; otherwise they are
//! dropped. A cubic is fitted in the least-squares sense (a quadratic where
//! the cubic fit is rank deficient), so cubic data are differentiated exactly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// Stencil half-width in lattice steps.
pub const REACH: isize = 2;

/// A bounded open convex set with a ray-exit query.
pub trait ConvexDomain {
    fn dim(&self) -> usize;
    fn contains(&self, y: &[f64]) -> bool;
    /// Largest `t` with `y + s d` inside for all `s in [0, t)`; `y` must be
    /// inside and `d` nonzero.
    fn exit(&self, y: &[f64], d: &[f64]) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Node(usize),
    /// A boundary point where the fitted function vanishes.
    Zero,
}

/// Monomial exponents of total degree at most `deg` in `p` variables, graded.
pub fn monomials(p: usize, deg: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for d in 0..=deg {
        match p {
            1 => out.push(vec![d]),
            2 => {
                for a in (0..=d).rev() {
                    out.push(vec![a, d - a]);
                }
            }
            _ => {
                for a in (0..=d).rev() {
                    for b in (0..=(d - a)).rev() {
                        out.push(vec![a, b, d - a - b]);
                    }
                }
            }
        }
    }
    out
}

fn factorial(k: usize) -> f64 {
    (1..=k).product::<usize>() as f64
}

fn mono_eval(e: &[usize], x: &[f64]) -> f64 {
    e.iter().zip(x).map(|(&k, &t)| t.powi(k as i32)).product()
}

#[derive(Clone, Debug)]
pub struct Stencil {
    pub sources: Vec<Source>,
    /// Point offsets in units of the lattice step.
    pub offsets: Vec<Vec<f64>>,
    degree: usize,
    monos: Vec<Vec<usize>>,
    /// Least-squares map from point values to monomial coefficients.
    pinv: DMatrix<f64>,
    h: f64,
}

impl Stencil {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Weights `c_m` with `∂^alpha w(node) ≈ Σ c_m w_m` over stencil points.
    /// Exponents above the fitted degree give zero weights.
    pub fn derivative_weights(&self, alpha: &[usize]) -> Vec<f64> {
        let order: usize = alpha.iter().sum();
        match self.monos.iter().position(|e| e.as_slice() == alpha) {
            Some(row) => {
                let s = alpha.iter().map(|&k| factorial(k)).product::<f64>() / self.h.powi(order as i32);
                self.pinv.row(row).iter().map(|c| c * s).collect()
            }
            None => vec![0.0; self.sources.len()],
        }
    }

    /// Monomial coefficients (in step units) of the fit to `values`.
    pub fn fit(&self, values: &[f64]) -> Vec<f64> {
        let data = DVector::from_iterator(
            self.sources.len(),
            self.sources.iter().map(|s| match s {
                Source::Node(j) => values[*j],
                Source::Zero => 0.0,
            }),
        );
        (&self.pinv * data).iter().copied().collect()
    }

    /// Fitted polynomial at chart displacement `dy` from the node.
    pub fn eval(&self, coeffs: &[f64], dy: &[f64]) -> f64 {
        let x: Vec<f64> = dy.iter().map(|t| t / self.h).collect();
        self.monos.iter().zip(coeffs).map(|(e, c)| c * mono_eval(e, &x)).sum()
    }

    /// Full derivative jet of the fit (value, gradient, Hessian, third
    /// derivatives) at displacement `dy` from the node.
    pub fn jet_at(&self, coeffs: &[f64], dy: &[f64]) -> Jet {
        let p = dy.len();
        let x: Vec<f64> = dy.iter().map(|t| t / self.h).collect();
        // derivative of Σ c_e x^e with respect to the scaled variables
        let deriv = |alpha: &[usize]| -> f64 {
            let mut acc = 0.0;
            for (e, c) in self.monos.iter().zip(coeffs) {
                if e.iter().zip(alpha).any(|(a, b)| a < b) {
                    continue;
                }
                let mut term = *c;
                for a in 0..p {
                    for k in 0..alpha[a] {
                        term *= (e[a] - k) as f64;
                    }
                    term *= x[a].powi((e[a] - alpha[a]) as i32);
                }
                acc += term;
            }
            let order: usize = alpha.iter().sum();
            acc / self.h.powi(order as i32)
        };
        let unit = |idx: &[usize]| {
            let mut a = vec![0usize; p];
            for &i in idx {
                a[i] += 1;
            }
            a
        };
        let value = deriv(&vec![0; p]);
        let grad = DVector::from_fn(p, |i, _| deriv(&unit(&[i])));
        let hess = DMatrix::from_fn(p, p, |i, j| deriv(&unit(&[i, j])));
        let mut third = vec![0.0; p * p * p];
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    third[(i * p + j) * p + k] = deriv(&unit(&[i, j, k]));
                }
            }
        }
        Jet { value, grad, hess, third }
    }
}

/// Value and first three derivatives at a point.
#[derive(Clone, Debug)]
pub struct Jet {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
    /// `third[(i p + j) p + k] = ∂_i ∂_j ∂_k`.
    pub third: Vec<f64>,
}

impl Jet {
    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        let p = self.grad.len();
        self.third[(i * p + j) * p + k]
    }
}

fn gcd(a: isize, b: isize) -> isize {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Stencils for every lattice node.
pub fn build_stencils(lat: &Lattice, domain: &dyn ConvexDomain, zero_boundary: bool) -> Result<Vec<Stencil>> {
    let p = lat.p();
    if domain.dim() != p {
        return Err(Error::DimensionMismatch { expected: p, got: domain.dim() });
    }
    let h = lat.h();
    let width = (2 * REACH + 1) as usize;
    let mut all_offsets = Vec::new();
    for code in 0..width.pow(p as u32) {
        let mut c = code;
        let off: Vec<isize> = (0..p)
            .map(|_| {
                let d = (c % width) as isize - REACH;
                c /= width;
                d
            })
            .collect();
        all_offsets.push(off);
    }
    let cubic = monomials(p, 3);
    let quadratic = monomials(p, 2);
    (0..lat.len())
        .map(|node| {
            let y0 = lat.x(node);
            let mut sources = Vec::new();
            let mut offsets: Vec<Vec<f64>> = Vec::new();
            let mut exits: Vec<Vec<isize>> = Vec::new();
            for off in &all_offsets {
                if let Some(j) = lat.neighbor(node, off) {
                    sources.push(Source::Node(j));
                    offsets.push(off.iter().map(|&t| t as f64).collect());
                } else if zero_boundary {
                    let g = off.iter().fold(0, |a, &b| gcd(a, b));
                    let dir: Vec<isize> = off.iter().map(|t| t / g).collect();
                    if exits.contains(&dir) {
                        continue;
                    }
                    let d: Vec<f64> = dir.iter().map(|&t| t as f64 * h).collect();
                    let t = domain.exit(y0, &d);
                    if !(t.is_finite() && t > 0.0) {
                        return Err(Error::Degenerate("stencil ray does not leave the domain"));
                    }
                    exits.push(dir.clone());
                    sources.push(Source::Zero);
                    offsets.push(dir.iter().map(|&s| s as f64 * t).collect());
                }
            }
            for (degree, monos) in [(3, &cubic), (2, &quadratic)] {
                if offsets.len() < monos.len() {
                    continue;
                }
                let v = DMatrix::from_fn(offsets.len(), monos.len(), |r, c| mono_eval(&monos[c], &offsets[r]));
                let svd = v.svd(true, true);
                let smax = svd.singular_values.max();
                let smin = svd.singular_values.min();
                if smin <= 1e-9 * smax {
                    continue;
                }
                let pinv = svd.pseudo_inverse(0.0).map_err(|_| Error::Degenerate("jet fit"))?;
                return Ok(Stencil {
                    sources,
                    offsets,
                    degree,
                    monos: monos.clone(),
                    pinv,
                    h,
                });
            }
            Err(Error::Degenerate("stencil too small for a quadratic fit"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Disk(f64);

    impl ConvexDomain for Disk {
        fn dim(&self) -> usize {
            2
        }
        fn contains(&self, y: &[f64]) -> bool {
            y[0] * y[0] + y[1] * y[1] < self.0 * self.0
        }
        fn exit(&self, y: &[f64], d: &[f64]) -> f64 {
            let a = d[0] * d[0] + d[1] * d[1];
            let b = y[0] * d[0] + y[1] * d[1];
            let c = y[0] * y[0] + y[1] * y[1] - self.0 * self.0;
            (-b + (b * b - a * c).sqrt()) / a
        }
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(monomials(1, 3).len(), 4);
        assert_eq!(monomials(2, 3).len(), 10);
        assert_eq!(monomials(3, 2).len(), 10);
    }

    #[test]
    fn cubic_vanishing_on_the_boundary_is_differentiated_exactly() {
        let disk = Disk(1.0);
        let lat = Lattice::masked(2, 21, &[0.0, 0.0], 1.0, |y| disk.contains(y)).unwrap();
        let st = build_stencils(&lat, &disk, true).unwrap();
        // w = (1 - |y|²)(1 + y_0 / 2) vanishes on the circle
        let f = |y: &[f64]| (1.0 - y[0] * y[0] - y[1] * y[1]) * (1.0 + 0.5 * y[0]);
        let vals: Vec<f64> = (0..lat.len()).map(|k| f(lat.x(k))).collect();
        let mut worst = 0.0f64;
        for k in 0..lat.len() {
            let y = lat.x(k);
            let c = st[k].fit(&vals);
            let jet = st[k].jet_at(&c, &[0.0, 0.0]);
            let (a, b) = (y[0], y[1]);
            // ∂_0 f, ∂_1 ∂_1 f and ∂_0 ∂_0 ∂_0 f by hand
            let f0 = -2.0 * a * (1.0 + 0.5 * a) + 0.5 * (1.0 - a * a - b * b);
            let f11 = -2.0 * (1.0 + 0.5 * a);
            let f000 = -3.0;
            worst = worst
                .max((jet.grad[0] - f0).abs())
                .max((jet.hess[(1, 1)] - f11).abs())
                .max((jet.third(0, 0, 0) - f000).abs());
            let w = st[k].derivative_weights(&[1, 1]);
            let direct: f64 = st[k]
                .sources
                .iter()
                .zip(&w)
                .map(|(s, c)| match s {
                    Source::Node(j) => c * vals[*j],
                    Source::Zero => 0.0,
                })
                .sum();
            worst = worst.max((direct - jet.hess[(0, 1)]).abs());
        }
        assert!(worst < 1e-8, "worst {worst}");
    }
}
