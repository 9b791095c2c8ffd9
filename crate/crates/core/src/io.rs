//! Plain-text file formats.
//!
//! Every format is line oriented: a kind keyword, `key value...` header
//! lines, then whitespace-delimited tables. `#` starts a comment. Reals are
//! written with 17 significant digits, so files round-trip bit for bit.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::affine::{chart_lattice, AffineHypersurface, ConvexCone};
use crate::error::{Error, Result};
use crate::forms::{GroupTag, QuadraticForm};
use crate::hpq::{PoincareModel, SpacelikeGraph};
use crate::lattice::DiskLattice;
use crate::maximal::{FlowParams, PlateauProblem};
use crate::reps::{FinGenGroup, Representation};

/// Exact decimal form of a real.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_row(out: &mut String, xs: impl IntoIterator<Item = f64>) {
    let row: Vec<String> = xs.into_iter().map(real).collect();
    out.push_str(&row.join(" "));
    out.push('\n');
}

/// Content lines with their 1-based numbers.
struct Reader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Self { lines, pos: 0 }
    }

    fn last_line(&self) -> usize {
        self.lines.last().map_or(1, |l| l.0)
    }

    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        let (n, l) = *self.lines.get(self.pos).ok_or_else(|| Error::parse(self.last_line(), "unexpected end of file"))?;
        self.pos += 1;
        Ok((n, l.split_whitespace().collect()))
    }

    fn peek_key(&self) -> Option<&'a str> {
        self.lines.get(self.pos).and_then(|(_, l)| l.split_whitespace().next())
    }

    fn done(&self) -> Result<()> {
        match self.lines.get(self.pos) {
            Some((n, l)) => Err(Error::parse(*n, format!("unexpected trailing content {l:?}"))),
            None => Ok(()),
        }
    }

    fn kind(&mut self, kind: &str) -> Result<()> {
        let (n, t) = self.next()?;
        if t != [kind] {
            return Err(Error::parse(n, format!("expected {kind:?}, found {:?}", t.join(" "))));
        }
        Ok(())
    }

    /// `key v1 v2 ...`, returning the values.
    fn key(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, t) = self.next()?;
        if t.first() != Some(&key) {
            return Err(Error::parse(n, format!("expected key {key:?}")));
        }
        Ok((n, t[1..].to_vec()))
    }

    fn one<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (n, v) = self.key(key)?;
        match v.as_slice() {
            [x] => x.parse().map_err(|_| Error::parse(n, format!("bad value {x:?} for {key}"))),
            _ => Err(Error::parse(n, format!("{key} takes one value"))),
        }
    }

    fn row(&mut self, width: usize) -> Result<(usize, Vec<f64>)> {
        let (n, t) = self.next()?;
        let row = reals(n, &t)?;
        if row.len() != width {
            return Err(Error::parse(n, format!("expected {width} columns, found {}", row.len())));
        }
        Ok((n, row))
    }
}

fn reals(line: usize, t: &[&str]) -> Result<Vec<f64>> {
    t.iter()
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::parse(line, format!("bad number {s:?}")))
        })
        .collect()
}

fn at_line<T>(line: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { .. } | Error::ContainsLine => e,
        other => Error::parse(line, other.to_string()),
    })
}

pub fn read_file(path: impl AsRef<Path>) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

pub fn write_file(path: impl AsRef<Path>, text: &str) -> Result<()> {
    if let Some(dir) = path.as_ref().parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(std::fs::write(path, text)?)
}

// ---------------------------------------------------------------- matrices

/// Row-major CSV.
pub fn write_matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|&x| real(x)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn read_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        let t: Vec<&str> = l.split(',').map(str::trim).collect();
        let row = reals(i + 1, &t)?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(i + 1, "ragged matrix"));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(1, "empty matrix"));
    }
    Ok(DMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c]))
}

// ------------------------------------------------------------------ graphs

fn graph_header(out: &mut String, g: &SpacelikeGraph) {
    let lat = g.lattice();
    let _ = writeln!(out, "p {}\nq {}\nr0 {}\ngrid {}", lat.p(), g.model().q(), real(lat.r0()), lat.n());
}

/// Header `(p, q, r0, grid)` and a node table `x_1..x_p v_0..v_q`.
pub fn write_graph(g: &SpacelikeGraph) -> String {
    let mut out = String::from("graph\n");
    graph_header(&mut out, g);
    let lat = g.lattice();
    let _ = writeln!(out, "nodes {}", lat.len());
    for k in 0..lat.len() {
        push_row(&mut out, lat.x(k).iter().copied().chain(g.value(k).iter().copied()));
    }
    out
}

fn read_chart(r: &mut Reader) -> Result<(PoincareModel, Arc<DiskLattice>)> {
    let p: usize = r.one("p")?;
    let (nq, qv) = r.key("q")?;
    let q: usize = qv.first().and_then(|s| s.parse().ok()).ok_or_else(|| Error::parse(nq, "bad q"))?;
    let (n0, r0v) = r.key("r0")?;
    let r0 = *reals(n0, &r0v)?.first().ok_or_else(|| Error::parse(n0, "missing r0"))?;
    let grid: usize = r.one("grid")?;
    let model = at_line(nq, PoincareModel::standard(p, q))?;
    let lat = at_line(n0, DiskLattice::new(p, grid, r0))?;
    Ok((model, Arc::new(lat)))
}

/// Rows `x v`, matched to lattice nodes by coordinates.
fn read_node_rows(
    r: &mut Reader,
    lat: &DiskLattice,
    count: usize,
    width: usize,
) -> Result<Vec<(usize, usize, Vec<f64>)>> {
    let p = lat.p();
    (0..count)
        .map(|_| {
            let (n, row) = r.row(p + width)?;
            let k = lat.nearest(&row[..p]);
            let off = lat.x(k).iter().zip(&row[..p]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if off > 1e-9 {
                return Err(Error::parse(n, "coordinates are not a lattice node"));
            }
            Ok((n, k, row[p..].to_vec()))
        })
        .collect()
}

pub fn read_graph(text: &str) -> Result<SpacelikeGraph> {
    let mut r = Reader::new(text);
    r.kind("graph")?;
    let (model, lat) = read_chart(&mut r)?;
    let count: usize = r.one("nodes")?;
    if count != lat.len() {
        return Err(Error::parse(r.last_line(), format!("grid has {} nodes, file lists {count}", lat.len())));
    }
    let rows = read_node_rows(&mut r, &lat, count, model.q() + 1)?;
    r.done()?;
    let mut values: Vec<Option<DVector<f64>>> = vec![None; lat.len()];
    for (n, k, v) in rows {
        if values[k].is_some() {
            return Err(Error::parse(n, "node listed twice"));
        }
        values[k] = Some(DVector::from_vec(v));
    }
    let values: Vec<DVector<f64>> = values.into_iter().map(|v| v.expect("all nodes listed")).collect();
    SpacelikeGraph::new(model, lat, values)
}

/// Graph header, optional flow parameters, then a boundary block.
pub fn write_problem(
    model: &PoincareModel,
    lat: &DiskLattice,
    boundary: &[(usize, DVector<f64>)],
    params: &FlowParams,
) -> String {
    let mut out = String::from("maximal_problem\n");
    let _ = writeln!(out, "p {}\nq {}\nr0 {}\ngrid {}", lat.p(), model.q(), real(lat.r0()), lat.n());
    let _ = writeln!(out, "target {}\nmax_iter {}", real(params.target), params.max_iter);
    let _ = writeln!(out, "boundary {}", boundary.len());
    for (k, v) in boundary {
        push_row(&mut out, lat.x(*k).iter().copied().chain(v.iter().copied()));
    }
    out
}

pub fn read_problem(text: &str) -> Result<PlateauProblem> {
    let mut r = Reader::new(text);
    r.kind("maximal_problem")?;
    let (model, lat) = read_chart(&mut r)?;
    let mut params = FlowParams::default();
    if r.peek_key() == Some("target") {
        params.target = r.one("target")?;
    }
    if r.peek_key() == Some("max_iter") {
        params.max_iter = r.one("max_iter")?;
    }
    let count: usize = r.one("boundary")?;
    let rows = read_node_rows(&mut r, &lat, count, model.q() + 1)?;
    r.done()?;
    let line = rows.first().map_or(r.last_line(), |x| x.0);
    let boundary: Vec<(usize, DVector<f64>)> = rows.into_iter().map(|(_, k, v)| (k, DVector::from_vec(v))).collect();
    at_line(line, PlateauProblem::from_boundary(model, lat, &boundary, params))
}

// ------------------------------------------------------------------- cones

fn cone_block(out: &mut String, cone: &ConvexCone) {
    let _ = writeln!(out, "dim {}", cone.dim());
    if let Some(rays) = cone.rays() {
        let _ = writeln!(out, "rays {}", rays.len());
        for v in rays {
            push_row(out, v.iter().copied());
        }
    } else if let Some((q, e)) = cone.quadric() {
        out.push_str("quadric\n");
        for r in 0..q.nrows() {
            push_row(out, q.row(r).iter().copied());
        }
        out.push_str("axis ");
        push_row(out, e.iter().copied());
    }
}

/// `rays m` with extremal rays in cyclic order, or `quadric` (a matrix of
/// signature `(d-1, 1)`) with an `axis` inside the cone.
pub fn write_cone(cone: &ConvexCone) -> String {
    let mut out = String::from("cone\n");
    cone_block(&mut out, cone);
    out
}

fn read_cone_block(r: &mut Reader) -> Result<ConvexCone> {
    let d: usize = r.one("dim")?;
    if d < 2 {
        return Err(Error::parse(r.last_line(), "dimension must be at least 2"));
    }
    match r.peek_key() {
        Some("rays") => {
            let (n, v) = r.key("rays")?;
            let m: usize = v.first().and_then(|s| s.parse().ok()).ok_or_else(|| Error::parse(n, "bad ray count"))?;
            let rays = (0..m).map(|_| r.row(d).map(|x| DVector::from_vec(x.1))).collect::<Result<Vec<_>>>()?;
            at_line(n, ConvexCone::polyhedral(rays))
        }
        Some("quadric") => {
            let (n, _) = r.key("quadric")?;
            let rows = (0..d).map(|_| r.row(d).map(|x| x.1)).collect::<Result<Vec<_>>>()?;
            let (na, a) = r.key("axis")?;
            let axis = reals(na, &a)?;
            if axis.len() != d {
                return Err(Error::parse(na, "axis has the wrong length"));
            }
            let q = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
            at_line(n, ConvexCone::round(q, DVector::from_vec(axis)))
        }
        _ => Err(Error::parse(r.last_line(), "expected rays or quadric")),
    }
}

pub fn read_cone(text: &str) -> Result<ConvexCone> {
    let mut r = Reader::new(text);
    r.kind("cone")?;
    let c = read_cone_block(&mut r)?;
    r.done()?;
    Ok(c)
}

// ----------------------------------------------------------------- spheres

/// The asymptotic cone, the chart grid, and a direction/radius table.
pub fn write_sphere(cone: &ConvexCone, m: &AffineHypersurface) -> String {
    let mut out = String::from("sphere\n");
    cone_block(&mut out, cone);
    let _ = writeln!(out, "exponent {}\nzero_boundary {}\ngrid {}", real(m.exponent()), m.zero_boundary(), m.lattice().n());
    let _ = writeln!(out, "nodes {}", m.len());
    for k in 0..m.len() {
        push_row(&mut out, m.direction(k).iter().copied().chain([m.radii()[k]]));
    }
    out
}

pub fn read_sphere(text: &str) -> Result<(ConvexCone, AffineHypersurface)> {
    let mut r = Reader::new(text);
    r.kind("sphere")?;
    let cone = read_cone_block(&mut r)?;
    let k: f64 = r.one("exponent")?;
    let zb: bool = r.one("zero_boundary")?;
    let grid: usize = r.one("grid")?;
    let count: usize = r.one("nodes")?;
    let domain = cone.chart_domain();
    let lat = Arc::new(at_line(r.last_line(), chart_lattice(&domain, grid))?);
    if count != lat.len() {
        return Err(Error::parse(r.last_line(), format!("grid has {} nodes, file lists {count}", lat.len())));
    }
    let d = cone.dim();
    let mut radii = Vec::with_capacity(count);
    for node in 0..count {
        let (n, row) = r.row(d + 1)?;
        let dir = cone.frame().lift(lat.x(node)).normalize();
        let off = dir.iter().zip(&row[..d]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if off > 1e-9 {
            return Err(Error::parse(n, "direction does not match the chart grid"));
        }
        radii.push(row[d]);
    }
    r.done()?;
    let sphere = AffineHypersurface::from_radii(cone.frame().clone(), domain, lat, k, zb, radii)?;
    Ok((cone, sphere))
}

// --------------------------------------------------------- representations

pub fn write_representation(rho: &Representation) -> String {
    let mut out = String::from("representation\n");
    match rho.tag() {
        GroupTag::So(f) => {
            let _ = writeln!(out, "group so {} {}", f.p(), f.q_plus_1());
        }
        GroupTag::Sl(d) => {
            let _ = writeln!(out, "group sl {d}");
        }
    }
    let g = rho.group();
    let _ = writeln!(out, "generators {}", g.names().join(" "));
    for w in g.relators() {
        let _ = writeln!(out, "relator {}", g.format_word(w));
    }
    for (name, m) in g.names().iter().zip(rho.generators()) {
        let _ = writeln!(out, "matrix {name}");
        for r in 0..m.nrows() {
            push_row(&mut out, m.row(r).iter().copied());
        }
    }
    out
}

pub fn read_representation(text: &str) -> Result<Representation> {
    let mut r = Reader::new(text);
    r.kind("representation")?;
    let (ng, g) = r.key("group")?;
    let num = |s: Option<&&str>| s.and_then(|x| x.parse::<usize>().ok()).ok_or_else(|| Error::parse(ng, "bad group"));
    let tag = match g.first().copied() {
        Some("so") => GroupTag::So(at_line(ng, QuadraticForm::new(num(g.get(1))?, num(g.get(2))?))?),
        Some("sl") => GroupTag::Sl(num(g.get(1))?),
        _ => return Err(Error::parse(ng, "group must be `so p q+1` or `sl d`")),
    };
    let (nn, names) = r.key("generators")?;
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let group0 = at_line(nn, FinGenGroup::new(names.clone(), Vec::new()))?;
    let mut relators = Vec::new();
    while r.peek_key() == Some("relator") {
        let (n, w) = r.key("relator")?;
        relators.push(at_line(n, group0.parse_word(&w.join(" ")))?);
    }
    let group = at_line(nn, FinGenGroup::new(names.clone(), relators))?;
    let d = tag.dim();
    let mut mats = Vec::with_capacity(names.len());
    for name in &names {
        let (n, v) = r.key("matrix")?;
        if v != [name.as_str()] {
            return Err(Error::parse(n, format!("expected matrix {name}")));
        }
        let rows = (0..d).map(|_| r.row(d).map(|x| x.1)).collect::<Result<Vec<_>>>()?;
        mats.push(DMatrix::from_fn(d, d, |i, j| rows[i][j]));
    }
    r.done()?;
    at_line(nn, Representation::new(group, tag, mats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reps::genus_two;

    #[test]
    fn graph_round_trip_is_bit_exact() {
        let m = PoincareModel::standard(2, 1).unwrap();
        let lat = Arc::new(DiskLattice::new(2, 9, 0.95).unwrap());
        let g = SpacelikeGraph::totally_geodesic(m, lat, &crate::forms::boost(4, 0, 3, 0.4)).unwrap();
        let text = write_graph(&g);
        let back = read_graph(&text).unwrap();
        assert_eq!(back.values(), g.values());
        assert_eq!(write_graph(&back), text);
    }

    #[test]
    fn malformed_graphs_report_a_line() {
        assert!(matches!(read_graph("graph\np 2\nq x\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(read_graph("cone\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_graph(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn representation_and_cone_round_trip() {
        let rho = genus_two();
        let text = write_representation(&rho);
        let back = read_representation(&text).unwrap();
        assert_eq!(back.generators(), rho.generators());
        assert_eq!(back.group(), rho.group());

        let cone = ConvexCone::orthant(2).unwrap();
        let c = read_cone(&write_cone(&cone)).unwrap();
        assert_eq!(c.rays().unwrap(), cone.rays().unwrap());
        let round = ConvexCone::standard_round(2);
        let c = read_cone(&write_cone(&round)).unwrap();
        assert_eq!(c.quadric().unwrap().0, round.quadric().unwrap().0);
        let line = "cone\ndim 3\nrays 2\n1 0 0\n-1 0 0\n";
        assert!(read_cone(line).is_err());
    }

    #[test]
    fn sphere_and_matrix_round_trip() {
        let cone = ConvexCone::standard_round(2);
        let m = AffineHypersurface::over_cone(&cone, 9, 2.0, true, |d| 1.0 / (d[2] * d[2] - d[0] * d[0] - d[1] * d[1]).sqrt())
            .unwrap();
        let text = write_sphere(&cone, &m);
        let (_, back) = read_sphere(&text).unwrap();
        assert_eq!(back.radii(), m.radii());
        let g = crate::forms::boost(3, 0, 2, 0.3);
        assert_eq!(read_matrix_csv(&write_matrix_csv(&g)).unwrap(), g);
        assert!(read_matrix_csv("1,2\n3\n").is_err());
    }
}
