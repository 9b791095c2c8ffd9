//! Asymptotic Plateau problem on a truncated chart: evolve a spacelike graph
//! with fixed boundary values until its mean curvature vanishes.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hpq::{spherical_dist_disk, PoincareModel, SpacelikeGraph};
use crate::lattice::DiskLattice;

/// Maximum number of consecutive step halvings before giving up.
pub const MAX_HALVINGS: usize = 30;

/// Relative sup-residual increase tolerated before a step is rejected.
pub const GROWTH_SLACK: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowParams {
    /// Initial step; `None` means `0.2 h²`.
    pub dt0: Option<f64>,
    pub max_iter: usize,
    /// Target for the sup-norm maximality residual.
    pub target: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self { dt0: None, max_iter: 20_000, target: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct PlateauProblem {
    initial: SpacelikeGraph,
    params: FlowParams,
}

impl PlateauProblem {
    /// The boundary data are the initial guess's values on boundary nodes.
    pub fn new(initial: SpacelikeGraph, params: FlowParams) -> Result<Self> {
        if !(params.target > 0.0) || params.dt0.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::InvalidParameter("flow parameters must be positive".into()));
        }
        let lip = boundary_lipschitz(&initial)?;
        if lip > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter(format!("boundary data has Lipschitz constant {lip} > 1")));
        }
        if !initial.is_spacelike() {
            return Err(Error::InvalidParameter("initial guess is not spacelike".into()));
        }
        Ok(Self { initial, params })
    }

    /// Problem with the default radial-interpolation initial guess.
    pub fn from_boundary(
        model: PoincareModel,
        lattice: Arc<DiskLattice>,
        boundary: &[(usize, DVector<f64>)],
        params: FlowParams,
    ) -> Result<Self> {
        Self::new(radial_interpolation(model, lattice, boundary)?, params)
    }

    pub fn initial_guess(&self) -> &SpacelikeGraph {
        &self.initial
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    pub fn boundary_data(&self) -> Vec<(usize, DVector<f64>)> {
        self.initial.boundary_trace()
    }
}

/// Discrete Lipschitz constant over stencil edges joining two boundary nodes.
pub fn boundary_lipschitz(m: &SpacelikeGraph) -> Result<f64> {
    let lat = m.lattice();
    let mut worst = 0.0f64;
    for k in lat.boundary_nodes() {
        for off in lat.offsets() {
            let Some(nb) = lat.neighbor(k, off) else { continue };
            if nb <= k || lat.is_interior(nb) {
                continue;
            }
            let dd = spherical_dist_disk(lat.x(k), lat.x(nb))?;
            let ds = m.value(k).dot(m.value(nb)).abs().min(1.0).acos();
            worst = worst.max(ds / dd);
        }
    }
    Ok(worst)
}

/// Blend `normalize((1-s) c + s b(θ))` of the mean boundary value `c` and the
/// boundary value `b` in the direction of the node, `s = |x| / r0`.
pub fn radial_interpolation(
    model: PoincareModel,
    lattice: Arc<DiskLattice>,
    boundary: &[(usize, DVector<f64>)],
) -> Result<SpacelikeGraph> {
    let expected = lattice.boundary_nodes().count();
    if boundary.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: boundary.len() });
    }
    let mut fixed: Vec<Option<DVector<f64>>> = vec![None; lattice.len()];
    for (k, v) in boundary {
        if *k >= lattice.len() || lattice.is_interior(*k) {
            return Err(Error::InvalidParameter(format!("node {k} is not a boundary node")));
        }
        fixed[*k] = Some(v.normalize());
    }
    let sum: DVector<f64> = boundary.iter().map(|(_, v)| v.clone()).sum();
    let center = if sum.norm() > 1e-9 { sum.normalize() } else { boundary[0].1.normalize() };
    let dirs: Vec<(Vec<f64>, &DVector<f64>)> = boundary
        .iter()
        .map(|(k, v)| {
            let x = lattice.x(*k);
            let r = x.iter().map(|t| t * t).sum::<f64>().sqrt();
            (x.iter().map(|t| t / r).collect(), v)
        })
        .collect();
    let r0 = lattice.r0();
    let lat = lattice.clone();
    SpacelikeGraph::from_fn(model, lattice, |x| {
        let k = lat.nearest(x);
        if let Some(v) = &fixed[k] {
            if lat.x(k) == x {
                return v.clone();
            }
        }
        let r = x.iter().map(|t| t * t).sum::<f64>().sqrt();
        if r == 0.0 {
            return center.clone();
        }
        // inverse-angle weighting over the two closest boundary directions
        let mut best = [(f64::INFINITY, 0usize); 2];
        for (i, (d, _)) in dirs.iter().enumerate() {
            let c: f64 = d.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / r;
            let ang = c.clamp(-1.0, 1.0).acos();
            if ang < best[0].0 {
                best[1] = best[0];
                best[0] = (ang, i);
            } else if ang < best[1].0 {
                best[1] = (ang, i);
            }
        }
        let b = if best[0].0 < 1e-14 || best[1].0.is_infinite() {
            dirs[best[0].1].1.clone()
        } else {
            let (w0, w1) = (best[1].0, best[0].0);
            (dirs[best[0].1].1 * w0 + dirs[best[1].1].1 * w1) / (w0 + w1)
        };
        let s = (r / r0).min(1.0);
        &center * (1.0 - s) + b * s
    })
}

/// Per-node update direction: the fibre component of `H`, rescaled by the
/// local conformal factors and projected onto `T_v S^q`.
fn update_direction(m: &SpacelikeGraph, positions: &[DVector<f64>], node: usize) -> Result<(DVector<f64>, f64)> {
    let mc = m.mean_curvature_cached(node, Some(positions))?;
    let model = m.model();
    let form = model.form();
    let f = model.f_basis();
    let q1 = model.q() + 1;
    let b = DVector::from_fn(q1, |j, _| -form.pair(&mc.vector, &f.column(j).into_owned()));
    let v = m.value(node);
    let tangential = &b - v * v.dot(&b);
    let r2 = m.lattice().radius2(node);
    // (1-r²)/(1+r²) converts ambient motion to fibre motion; 4/(1-r²)² undoes
    // the conformal factor of the chart so one step size fits every node
    let scale = (1.0 - r2) / (1.0 + r2) * 4.0 / (1.0 - r2).powi(2);
    Ok((tangential * scale, mc.residual))
}

fn step_with(m: &SpacelikeGraph, dt: f64, positions: &[DVector<f64>]) -> Result<(SpacelikeGraph, f64)> {
    let lat = m.lattice();
    let updates: Vec<Result<(DVector<f64>, f64)>> = (0..lat.len())
        .into_par_iter()
        .map(|k| {
            if lat.is_interior(k) {
                let (d, res) = update_direction(m, positions, k)?;
                Ok(((m.value(k) + d * dt).normalize(), res))
            } else {
                Ok((m.value(k).clone(), 0.0))
            }
        })
        .collect();
    let mut values = Vec::with_capacity(lat.len());
    let mut residual = 0.0f64;
    for u in updates {
        let (v, r) = u?;
        residual = residual.max(r);
        values.push(v);
    }
    Ok((m.with_values(values)?, residual))
}

/// One explicit Euler step of the preconditioned mean-curvature flow in graph
/// form. Boundary values are untouched; `dt` is measured in chart units where
/// the flow behaves like the heat equation, so `dt ≲ h²/4` is stable.
pub fn flow_step(m: &SpacelikeGraph, dt: f64) -> Result<SpacelikeGraph> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("step size {dt} must be positive")));
    }
    Ok(step_with(m, dt, &m.positions())?.0)
}

#[derive(Clone, Debug)]
pub struct MaximalSolution {
    pub graph: SpacelikeGraph,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual of every accepted iterate, starting with the initial guess.
    pub history: Vec<f64>,
}

/// Flow the initial guess until the sup-norm residual meets the target.
///
/// Steps that leave the spacelike cone or increase the residual are retried
/// with half the step; after [`MAX_HALVINGS`] consecutive failures the solve
/// stops. Hitting the iteration cap returns the best iterate unconverged.
pub fn solve_maximal(prob: &PlateauProblem) -> Result<MaximalSolution> {
    let h = prob.initial.lattice().h();
    let dt0 = prob.params.dt0.unwrap_or(0.2 * h * h);
    let mut current = prob.initial.clone();
    let mut residual = current.max_residual()?;
    let mut best = (residual, current.clone());
    let mut history = vec![residual];
    let mut dt = dt0;
    let mut halvings = 0;
    let mut iterations = 0;
    while best.0 > prob.params.target && iterations < prob.params.max_iter {
        let positions = current.positions();
        let candidate = step_with(&current, dt, &positions).and_then(|(g, _)| {
            let r = g.max_residual()?;
            Ok((g, r))
        });
        match candidate {
            // the sup-norm is not monotone along the flow when its location
            // moves; only a clear increase signals an unstable step
            Ok((g, r)) if r <= residual * (1.0 + GROWTH_SLACK) => {
                current = g;
                residual = r;
                history.push(r);
                iterations += 1;
                halvings = 0;
                dt = (dt * 1.25).min(dt0);
                if r < best.0 {
                    best = (r, current.clone());
                }
            }
            Ok(_) | Err(Error::NotSpacelike { .. }) => {
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    return Err(Error::LeftSpacelikeCone);
                }
                dt *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    let (residual, graph) = best;
    Ok(MaximalSolution {
        converged: residual <= prob.params.target,
        graph,
        residual,
        iterations,
        history,
    })
}
