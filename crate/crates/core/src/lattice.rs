//! Tensor-product lattices truncated to a convex region, and shortest paths on
//! them under a node-sampled Riemannian metric.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const INACTIVE: u32 = u32::MAX;

/// The nodes of a square lattice with `n` points per axis on the box
/// `center + [-half, half]^p` that satisfy a membership predicate; the usual
/// case is the closed ball `|x| <= r0` (see [`Lattice::new`]).
///
/// A node is *interior* when all `3^p - 1` stencil neighbours are present and
/// *boundary* otherwise; boundary nodes carry the Dirichlet data of the solvers.
#[derive(Clone, Debug)]
pub struct Lattice {
    p: usize,
    n: usize,
    r0: f64,
    origin: Vec<f64>,
    h: f64,
    coords: Vec<f64>,
    multi: Vec<usize>,
    lookup: Vec<u32>,
    interior: Vec<bool>,
    offsets: Vec<Vec<isize>>,
}

/// Lattices over the truncated Poincaré chart are the ball case.
pub type DiskLattice = Lattice;

impl Lattice {
    /// Nodes in the closed ball of radius `r0 < 1` about the origin.
    pub fn new(p: usize, n: usize, r0: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0 < 1.0) {
            return Err(Error::InvalidParameter(format!("truncation radius {r0} not in (0, 1)")));
        }
        // small slack so that nodes exactly on the sphere survive rounding
        let cut = r0 * r0 * (1.0 + 1e-12);
        Self::masked(p, n, &vec![0.0; p], r0, |x| x.iter().map(|t| t * t).sum::<f64>() <= cut)
    }

    /// Nodes of the box `center + [-half, half]^p` for which `inside` holds.
    pub fn masked(p: usize, n: usize, center: &[f64], half: f64, inside: impl Fn(&[f64]) -> bool) -> Result<Self> {
        if p == 0 || p > 3 {
            return Err(Error::InvalidParameter(format!("lattice dimension {p} not in 1..=3")));
        }
        if center.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: center.len() });
        }
        if n < 5 || n % 2 == 0 {
            return Err(Error::InvalidParameter(format!("grid size {n} must be odd and >= 5")));
        }
        if !(half > 0.0 && half.is_finite()) {
            return Err(Error::InvalidParameter(format!("box half-width {half} must be positive")));
        }
        let h = 2.0 * half / (n - 1) as f64;
        let origin: Vec<f64> = center.iter().map(|c| c - half).collect();
        let total = n.pow(p as u32);
        let mut lookup = vec![INACTIVE; total];
        let mut coords = Vec::new();
        let mut multi = Vec::new();
        let mut idx = vec![0usize; p];
        for flat in 0..total {
            let mut rem = flat;
            for a in (0..p).rev() {
                idx[a] = rem % n;
                rem /= n;
            }
            // the middle node sits exactly on the center
            let x: Vec<f64> = idx
                .iter()
                .zip(center)
                .map(|(&i, c)| c + (i as f64 - (n / 2) as f64) * h)
                .collect();
            if inside(&x) {
                lookup[flat] = (coords.len() / p) as u32;
                coords.extend_from_slice(&x);
                multi.extend_from_slice(&idx);
            }
        }
        if coords.is_empty() {
            return Err(Error::InvalidParameter("lattice has no active nodes".into()));
        }
        let mut offsets = Vec::new();
        for code in 0..3usize.pow(p as u32) {
            let mut c = code;
            let off: Vec<isize> = (0..p)
                .map(|_| {
                    let d = (c % 3) as isize - 1;
                    c /= 3;
                    d
                })
                .collect();
            if off.iter().any(|&d| d != 0) {
                offsets.push(off);
            }
        }
        let mut lat = Self {
            p,
            n,
            r0: half,
            origin,
            h,
            coords,
            multi,
            lookup,
            interior: Vec::new(),
            offsets,
        };
        lat.interior = (0..lat.len())
            .map(|k| lat.offsets.iter().all(|o| lat.neighbor(k, o).is_some()))
            .collect();
        Ok(lat)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Nodes per axis of the bounding box.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Ball radius, or the box half-width for masked lattices.
    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// Box center.
    pub fn center_point(&self) -> Vec<f64> {
        self.origin.iter().map(|o| o + self.r0).collect()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.p
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn x(&self, node: usize) -> &[f64] {
        &self.coords[node * self.p..(node + 1) * self.p]
    }

    pub fn multi_index(&self, node: usize) -> &[usize] {
        &self.multi[node * self.p..(node + 1) * self.p]
    }

    pub fn radius2(&self, node: usize) -> f64 {
        self.x(node).iter().map(|t| t * t).sum()
    }

    pub fn index_of(&self, idx: &[isize]) -> Option<usize> {
        let mut flat = 0usize;
        for &i in idx {
            if i < 0 || i >= self.n as isize {
                return None;
            }
            flat = flat * self.n + i as usize;
        }
        match self.lookup[flat] {
            INACTIVE => None,
            k => Some(k as usize),
        }
    }

    pub fn neighbor(&self, node: usize, offset: &[isize]) -> Option<usize> {
        let m = self.multi_index(node);
        let mut idx = [0isize; 3];
        for a in 0..self.p {
            idx[a] = m[a] as isize + offset[a];
        }
        self.index_of(&idx[..self.p])
    }

    /// Neighbour one step along `axis` in direction `sign` (+1 or -1).
    pub fn step(&self, node: usize, axis: usize, sign: isize) -> Option<usize> {
        let mut off = [0isize; 3];
        off[axis] = sign;
        self.neighbor(node, &off[..self.p])
    }

    /// Nonzero offsets of the full `3^p - 1` stencil.
    pub fn offsets(&self) -> &[Vec<isize>] {
        &self.offsets
    }

    pub fn is_interior(&self, node: usize) -> bool {
        self.interior[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        !self.interior[node]
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&k| self.interior[k])
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&k| !self.interior[k])
    }

    /// The node at the box center, or the active node closest to it.
    pub fn center(&self) -> usize {
        let c = (self.n / 2) as isize;
        match self.index_of(&vec![c; self.p]) {
            Some(k) => k,
            None => self.nearest(&self.center_point()),
        }
    }

    /// Closest active node to `x` (by rounding, then by scan if that node is
    /// inactive).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let idx: Vec<isize> = x
            .iter()
            .zip(&self.origin)
            .map(|(t, o)| ((t - o) / self.h).round() as isize)
            .collect();
        if let Some(k) = self.index_of(&idx) {
            return k;
        }
        (0..self.len())
            .min_by(|&a, &b| dist2(self.x(a), x).total_cmp(&dist2(self.x(b), x)))
            .expect("lattice is nonempty")
    }

    /// Multilinear interpolation weights at `x` over the active corners of the
    /// enclosing cell, renormalized to sum to one. Falls back to the nearest
    /// node when no corner is active.
    pub fn interp_weights(&self, x: &[f64], out: &mut Vec<(usize, f64)>) {
        out.clear();
        let p = self.p;
        let mut base = [0isize; 3];
        let mut frac = [0f64; 3];
        for a in 0..p {
            let s = (x[a] - self.origin[a]) / self.h;
            let i = (s.floor() as isize).clamp(0, self.n as isize - 2);
            base[a] = i;
            frac[a] = (s - i as f64).clamp(0.0, 1.0);
        }
        let mut total = 0.0;
        for corner in 0..(1usize << p) {
            let mut idx = [0isize; 3];
            let mut w = 1.0;
            for a in 0..p {
                let bit = (corner >> a) & 1;
                idx[a] = base[a] + bit as isize;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            if let Some(k) = self.index_of(&idx[..p]) {
                out.push((k, w));
                total += w;
            }
        }
        if total > 0.0 {
            for e in out.iter_mut() {
                e.1 /= total;
            }
        } else {
            out.push((self.nearest(x), 1.0));
        }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(s, t)| (s - t) * (s - t)).sum()
}

/// A symmetric `p x p` metric sampled at every lattice node, stored flat.
#[derive(Clone, Debug)]
pub struct MetricField<'a> {
    lattice: &'a DiskLattice,
    entries: Vec<f64>,
}

impl<'a> MetricField<'a> {
    /// `entries` holds `p * p` row-major values per node.
    pub fn new(lattice: &'a DiskLattice, entries: Vec<f64>) -> Result<Self> {
        let pp = lattice.p() * lattice.p();
        if entries.len() != pp * lattice.len() {
            return Err(Error::DimensionMismatch { expected: pp * lattice.len(), got: entries.len() });
        }
        Ok(Self { lattice, entries })
    }

    fn quad_at(&self, x: &[f64], d: &[f64], scratch: &mut Vec<(usize, f64)>) -> f64 {
        let p = self.lattice.p();
        self.lattice.interp_weights(x, scratch);
        let mut acc = 0.0;
        for &(k, w) in scratch.iter() {
            let g = &self.entries[k * p * p..(k + 1) * p * p];
            let mut q = 0.0;
            for i in 0..p {
                for j in 0..p {
                    q += d[i] * g[i * p + j] * d[j];
                }
            }
            acc += w * q;
        }
        acc.max(0.0)
    }

    /// Length of the straight chart segment from node `a` to node `b`,
    /// trapezoid rule with sub-steps no longer than `h / 2`.
    pub fn segment_length(&self, a: usize, b: usize, scratch: &mut Vec<(usize, f64)>) -> f64 {
        let p = self.lattice.p();
        let xa = self.lattice.x(a);
        let xb = self.lattice.x(b);
        let mut d = [0f64; 3];
        for i in 0..p {
            d[i] = xb[i] - xa[i];
        }
        let euclid = d[..p].iter().map(|t| t * t).sum::<f64>().sqrt();
        let m = ((2.0 * euclid / self.lattice.h()).ceil() as usize).max(1);
        let mut x = [0f64; 3];
        let mut acc = 0.0;
        for s in 0..=m {
            let t = s as f64 / m as f64;
            for i in 0..p {
                x[i] = xa[i] + t * d[i];
            }
            let w = if s == 0 || s == m { 0.5 } else { 1.0 };
            acc += w * self.quad_at(&x[..p], &d[..p], scratch).sqrt();
        }
        acc / m as f64
    }
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Single-source shortest-path lengths over the full stencil graph, with
/// any-angle shortcuts: a node may connect straight to its predecessor's
/// parent whenever that is shorter (lattice regions are convex, so such
/// segments stay inside it). Unreachable nodes get `f64::INFINITY`.
pub fn geodesic_distances(field: &MetricField<'_>, source: usize) -> Vec<f64> {
    let lat = field.lattice;
    let mut dist = vec![f64::INFINITY; lat.len()];
    let mut parent = vec![usize::MAX; lat.len()];
    let mut done = vec![false; lat.len()];
    let mut heap = BinaryHeap::new();
    let mut scratch = Vec::with_capacity(8);
    dist[source] = 0.0;
    parent[source] = source;
    heap.push(Item(0.0, source));
    while let Some(Item(d, s)) = heap.pop() {
        if done[s] {
            continue;
        }
        done[s] = true;
        let ps = parent[s];
        for off in lat.offsets() {
            let Some(nb) = lat.neighbor(s, off) else { continue };
            if done[nb] {
                continue;
            }
            let mut best = d + field.segment_length(s, nb, &mut scratch);
            let mut best_parent = s;
            if ps != s {
                let via = dist[ps] + field.segment_length(ps, nb, &mut scratch);
                if via < best {
                    best = via;
                    best_parent = ps;
                }
            }
            if best < dist[nb] {
                dist[nb] = best;
                parent[nb] = best_parent;
                heap.push(Item(best, nb));
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_counts_and_classes() {
        let lat = DiskLattice::new(2, 9, 0.9).unwrap();
        let c = lat.center();
        assert_eq!(lat.x(c), &[0.0, 0.0]);
        assert!(lat.is_interior(c));
        for k in 0..lat.len() {
            assert!(lat.radius2(k) <= 0.81 + 1e-12);
        }
        // the four axis extremes are boundary nodes
        for idx in [[0, 4], [8, 4], [4, 0], [4, 8]] {
            let k = lat.index_of(&idx).unwrap();
            assert!(lat.is_boundary(k));
        }
        assert!(DiskLattice::new(2, 8, 0.9).is_err());
        assert!(DiskLattice::new(2, 9, 1.0).is_err());
    }

    #[test]
    fn one_dimensional_lattice_is_an_interval() {
        let lat = DiskLattice::new(1, 11, 0.5).unwrap();
        assert_eq!(lat.len(), 11);
        assert_eq!(lat.boundary_nodes().count(), 2);
    }

    #[test]
    fn interpolation_weights_reproduce_linear_functions() {
        let lat = DiskLattice::new(2, 17, 0.9).unwrap();
        let mut w = Vec::new();
        for x in [[0.1, -0.23], [0.31, 0.4], [-0.5, 0.05]] {
            lat.interp_weights(&x, &mut w);
            let s: f64 = w.iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-14);
            let f: f64 = w.iter().map(|&(k, c)| c * (2.0 * lat.x(k)[0] - lat.x(k)[1])).sum();
            assert!((f - (2.0 * x[0] - x[1])).abs() < 1e-13);
        }
    }

    #[test]
    fn euclidean_distances_are_nearly_exact() {
        let lat = DiskLattice::new(2, 41, 0.9).unwrap();
        let mut g = Vec::new();
        for _ in 0..lat.len() {
            g.extend_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        }
        let field = MetricField::new(&lat, g).unwrap();
        let c = lat.center();
        let d = geodesic_distances(&field, c);
        let worst = (0..lat.len())
            .map(|k| (d[k] - lat.radius2(k).sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12, "worst deviation {worst}");
    }
}
