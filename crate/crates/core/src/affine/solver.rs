use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::cone::{ChartDomain, ConvexCone, Frame};
use super::surface::{chart_lattice, AffineHypersurface};
use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::jets::{build_stencils, Source, Stencil};
use crate::lattice::Lattice;

/// The radial potential `u < 0` of the sphere solves `det D²u = |u|^{-(p+2)}`
/// on the cone's cross-section with `u = 0` on its boundary. The unknown is
/// `w = |u|^k`, which turns the equation into
/// `w det A + (1 - 1/k) gᵀ adj(A) g = k^p w^e`, `A = -D²w`, `g = ∇w`,
/// `e = p + 1 - (2p + 2)/k`; it is polynomial for quadric and simplicial cones.
#[derive(Clone, Debug)]
pub struct AffineSphereProblem {
    cone: ConvexCone,
    frame: Frame,
    domain: ChartDomain,
    lattice: Arc<Lattice>,
    stencils: Arc<Vec<Stencil>>,
    k: f64,
    /// Per node: unknown index and weights `[∂_a w .., ∂_a∂_b w ..]`.
    terms: Vec<Vec<(usize, Vec<f64>)>>,
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonParams {
    pub max_iter: usize,
    /// On `max |F| / k^p`.
    pub tol: f64,
    pub max_backtracks: usize,
}

impl Default for NewtonParams {
    fn default() -> Self {
        Self { max_iter: 60, tol: 1e-10, max_backtracks: 30 }
    }
}

#[derive(Clone, Debug)]
pub struct AffineSolution {
    pub sphere: AffineHypersurface,
    /// Scaled sup residual of every accepted iterate, starting with the guess.
    pub history: Vec<f64>,
    /// Smallest eigenvalue of `D²u` over the nodes, per accepted iterate.
    pub convexity: Vec<f64>,
    pub iterations: usize,
}

struct Local {
    f: f64,
    /// `∂F/∂w` at the node itself.
    dw: f64,
    /// `∂F/∂(∂_a w)` then `∂F/∂(∂_a∂_b w)`.
    dderiv: Vec<f64>,
    min_eig: f64,
}

impl AffineSphereProblem {
    pub fn new(cone: &ConvexCone, n: usize) -> Result<Self> {
        let p = cone.p();
        let k = if cone.is_round() { 2.0 } else { (p + 1) as f64 };
        let domain = cone.chart_domain();
        let lattice = Arc::new(chart_lattice(&domain, n)?);
        let stencils = Arc::new(build_stencils(&lattice, &domain, true)?);
        let mut alphas: Vec<Vec<usize>> = Vec::new();
        for a in 0..p {
            let mut e = vec![0; p];
            e[a] = 1;
            alphas.push(e);
        }
        for a in 0..p {
            for b in 0..p {
                let mut e = vec![0; p];
                e[a] += 1;
                e[b] += 1;
                alphas.push(e);
            }
        }
        let terms = stencils
            .iter()
            .map(|st| {
                let weights: Vec<Vec<f64>> = alphas.iter().map(|al| st.derivative_weights(al)).collect();
                st.sources
                    .iter()
                    .enumerate()
                    .filter_map(|(m, src)| match src {
                        Source::Node(j) => Some((*j, weights.iter().map(|w| w[m]).collect())),
                        Source::Zero => None,
                    })
                    .collect()
            })
            .collect();
        Ok(Self { cone: cone.clone(), frame: cone.frame().clone(), domain, lattice, stencils, k, terms })
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn exponent(&self) -> f64 {
        self.k
    }

    fn p(&self) -> usize {
        self.lattice.p()
    }

    fn rhs_scale(&self) -> f64 {
        self.k.powi(self.p() as i32)
    }

    fn power(&self) -> f64 {
        let p = self.p() as f64;
        p + 1.0 - (2.0 * p + 2.0) / self.k
    }

    fn derivs(&self, node: usize, w: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.p();
        let mut acc = vec![0.0; p + p * p];
        for (j, c) in &self.terms[node] {
            for (a, v) in acc.iter_mut().zip(c) {
                *a += v * w[*j];
            }
        }
        let g = DVector::from_column_slice(&acc[..p]);
        let a = DMatrix::from_fn(p, p, |i, j| -0.5 * (acc[p + i * p + j] + acc[p + j * p + i]));
        (g, a)
    }

    fn local(&self, node: usize, w: &[f64]) -> Option<Local> {
        let p = self.p();
        let wi = w[node];
        if !(wi > 0.0) {
            return None;
        }
        let s = 1.0 / self.k;
        let (g, a) = self.derivs(node, w);
        let b = &a + &g * g.transpose() * ((1.0 - s) / wi);
        let eig = b.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.min();
        if !(min_eig > 0.0) {
            return None;
        }
        let det = eig.eigenvalues.product();
        let adj = b.try_inverse()? * det;
        let kp = self.rhs_scale();
        let e = self.power();
        let f = wi * det - kp * wi.powf(e);
        let ag = &adj * &g;
        let dw = det - e * kp * wi.powf(e - 1.0) - (1.0 - s) * g.dot(&ag) / wi;
        let mut dderiv = vec![0.0; p + p * p];
        for i in 0..p {
            dderiv[i] = 2.0 * (1.0 - s) * ag[i];
            for j in 0..p {
                // A = -D²w
                dderiv[p + i * p + j] = -wi * adj[(i, j)];
            }
        }
        // D²u = s w^{s-1} B, so its eigenvalues share signs with B's
        Some(Local { f, dw, dderiv, min_eig: s * wi.powf(s - 1.0) * min_eig })
    }

    /// Residual of the discrete equation, or `None` if `w` is not admissible
    /// (nonpositive somewhere, or the potential not locally uniformly convex).
    pub fn residual(&self, w: &[f64]) -> Option<Vec<f64>> {
        (0..self.lattice.len()).into_par_iter().map(|i| self.local(i, w).map(|l| l.f)).collect()
    }

    fn eval(&self, w: &[f64]) -> Option<(Vec<Local>, f64)> {
        let locals: Vec<Local> = (0..self.lattice.len()).into_par_iter().map(|i| self.local(i, w)).collect::<Option<_>>()?;
        let min_eig = locals.iter().map(|l| l.min_eig).fold(f64::INFINITY, f64::min);
        Some((locals, min_eig))
    }

    fn jacobian(&self, locals: &[Local]) -> BandedMatrix {
        let n = self.lattice.len();
        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, t) in self.terms.iter().enumerate() {
            for (j, _) in t {
                if *j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let mut jac = BandedMatrix::zeros(n, kl, ku);
        for (i, loc) in locals.iter().enumerate() {
            jac.add(i, i, loc.dw);
            for (j, c) in &self.terms[i] {
                let v: f64 = c.iter().zip(&loc.dderiv).map(|(a, b)| a * b).sum();
                jac.add(i, *j, v);
            }
        }
        jac
    }

    fn profile(&self) -> Result<Vec<f64>> {
        let n = self.lattice.len();
        let pts: Vec<DVector<f64>> = (0..n).map(|i| self.frame.lift(self.lattice.x(i))).collect();
        if let Some((q, _)) = self.cone.quadric() {
            return Ok(pts.iter().map(|x| -x.dot(&(q * x))).collect());
        }
        let m = self.cone.facet_count() as f64;
        let ChartDomain::Polyhedral { a, b } = &self.domain else {
            return Err(Error::Degenerate("cone kind"));
        };
        Ok((0..n)
            .map(|i| {
                let y = DVector::from_column_slice(self.lattice.x(i));
                a.iter().zip(b).map(|(ai, bi)| (bi - ai.dot(&y)).powf(self.k / m)).product()
            })
            .collect())
    }

    /// A multiple of the exact solution's profile for quadric and simplicial
    /// cones (the product of facet distances otherwise), scaled to solve the
    /// equation at the chart centre.
    pub fn initial_guess(&self) -> Result<Vec<f64>> {
        let p = self.p();
        let phi = self.profile()?;
        let c = self.lattice.nearest(&vec![0.0; p]);
        let (g, a) = self.derivs(c, &phi);
        let adj = if p == 1 { DMatrix::identity(1, 1) } else { a.clone().try_inverse().ok_or(Error::NotConvex(c))? * a.determinant() };
        let s = 1.0 / self.k;
        let lead = phi[c] * a.determinant() + (1.0 - s) * g.dot(&(&adj * &g));
        if !(lead > 0.0) {
            return Err(Error::NotConvex(c));
        }
        let e = self.power();
        let kappa = (self.rhs_scale() * phi[c].powf(e) / lead).powf(1.0 / (p as f64 + 1.0 - e));
        Ok(phi.iter().map(|v| v * kappa).collect())
    }

    pub fn sphere_from(&self, w: &[f64]) -> Result<AffineHypersurface> {
        let radii = w
            .iter()
            .enumerate()
            .map(|(i, wi)| self.frame.lift(self.lattice.x(i)).norm() / wi.powf(1.0 / self.k))
            .collect();
        AffineHypersurface::assemble(
            self.frame.clone(),
            self.domain.clone(),
            self.lattice.clone(),
            self.stencils.clone(),
            self.k,
            true,
            radii,
        )
    }

    /// Damped Newton from `w0`; every accepted iterate keeps `w > 0` and the
    /// potential locally uniformly convex.
    pub fn solve_from(&self, w0: Vec<f64>, params: NewtonParams) -> Result<AffineSolution> {
        let scale = self.rhs_scale();
        let sup = |ls: &[Local]| ls.iter().map(|l| l.f.abs()).fold(0.0, f64::max) / scale;
        let l2 = |ls: &[Local]| ls.iter().map(|l| l.f * l.f).sum::<f64>().sqrt();
        let mut w = w0;
        let (mut locals, mut min_eig) = self.eval(&w).ok_or(Error::NotConvex(0))?;
        let mut history = vec![sup(&locals)];
        let mut convexity = vec![min_eig];
        let mut iterations = 0;
        while *history.last().unwrap() > params.tol {
            if iterations == params.max_iter {
                return Err(Error::NewtonDivergence { history });
            }
            let rhs = DVector::from_iterator(locals.len(), locals.iter().map(|l| -l.f));
            let step = self.jacobian(&locals).solve(&rhs)?;
            let merit = l2(&locals);
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..=params.max_backtracks {
                let trial: Vec<f64> = w.iter().zip(step.iter()).map(|(a, b)| a + lambda * b).collect();
                if let Some((ls, me)) = self.eval(&trial) {
                    if l2(&ls) <= (1.0 - 1e-4 * lambda) * merit {
                        accepted = Some((trial, ls, me));
                        break;
                    }
                }
                lambda *= 0.5;
            }
            let Some((trial, ls, me)) = accepted else {
                return Err(Error::NewtonDivergence { history });
            };
            w = trial;
            locals = ls;
            min_eig = me;
            iterations += 1;
            history.push(sup(&locals));
            convexity.push(min_eig);
        }
        Ok(AffineSolution { sphere: self.sphere_from(&w)?, history, convexity, iterations })
    }

    pub fn solve(&self, params: NewtonParams) -> Result<AffineSolution> {
        self.solve_from(self.initial_guess()?, params)
    }
}

/// Discrete hyperbolic affine sphere asymptotic to `cone`, centred at the
/// origin, on an `n`-point-per-axis chart lattice.
pub fn solve_affine_sphere(cone: &ConvexCone, n: usize) -> Result<AffineHypersurface> {
    Ok(AffineSphereProblem::new(cone, n)?.solve(NewtonParams::default())?.sphere)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_cone_gives_the_hyperboloid() {
        let cone = ConvexCone::standard_round(2);
        let prob = AffineSphereProblem::new(&cone, 21).unwrap();
        // start away from the solution: the profile is exact only up to scale
        let w0: Vec<f64> = prob.initial_guess().unwrap().iter().map(|v| 1.7 * v).collect();
        let sol = prob.solve_from(w0, NewtonParams::default()).unwrap();
        assert!(sol.iterations >= 2);
        for (x, r) in sol.sphere.directions().iter().zip(sol.sphere.radii()) {
            let exact = 1.0 / (x[2] * x[2] - x[0] * x[0] - x[1] * x[1]).sqrt();
            assert!((r / exact - 1.0).abs() < 1e-8);
        }
        assert!(sol.convexity.iter().all(|&c| c > 0.0));
    }

    #[test]
    fn interval_cone_gives_the_hyperbola() {
        let cone = ConvexCone::orthant(1).unwrap();
        let m = solve_affine_sphere(&cone, 41).unwrap();
        for x in m.points() {
            // this normalization puts the quadrant's sphere at xy = 1/2
            assert!((x[0] * x[1] - 0.5).abs() < 1e-8, "{}", x[0] * x[1]);
        }
    }

    #[test]
    fn square_cone_stalls_at_the_corners_with_history() {
        // the corner singularity leaves the discrete system without an
        // admissible solution at this resolution; the failure carries the history
        let v = |a: f64, b: f64| DVector::from_vec(vec![a, b, 1.0]);
        let cone = ConvexCone::polyhedral(vec![v(1.0, 1.0), v(-1.0, 1.0), v(-1.0, -1.0), v(1.0, -1.0)]).unwrap();
        let prob = AffineSphereProblem::new(&cone, 21).unwrap();
        match prob.solve(NewtonParams::default()) {
            Err(Error::NewtonDivergence { history }) => {
                assert!(history.len() > 3);
                assert!(history.last().unwrap() < &(history[0] * 1e-2));
            }
            Ok(sol) => assert!(sol.history.last().unwrap() <= &1e-10),
            Err(e) => panic!("{e}"),
        }
    }
}
