//! Property suites probing the four robust-family axioms on concrete
//! instances, driven by declarative TOML scenarios.
//!
//! A check produces margins; each margin is evaluated from a [`Witness`], so
//! a failure can be replayed from its witness alone.

mod checks;

pub use checks::{
    check_avoidance, check_compactness, check_domination, check_invariance, closedness_scenario, replay,
    running_sup_bounded,
};

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affine::{solve_affine_sphere, AffineHypersurface, ConvexCone};
use crate::error::{Error, Result};
use crate::forms::{boost, random_sl, random_so, GroupTag, QuadraticForm};
use crate::hpq::{PoincareModel, SpacelikeGraph};
use crate::io;
use crate::lattice::DiskLattice;
use crate::maximal::{solve_maximal, FlowParams, PlateauProblem};
use crate::reps::{genus_two, triangle_237, FamilyTag, Member, Representation};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// `maximal_hpq` or `affine_sphere`.
    pub family: String,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default = "defaults::grid")]
    pub grid: usize,
    #[serde(default = "defaults::p")]
    pub p: usize,
    #[serde(default = "defaults::q")]
    pub q: usize,
    /// Chart radius of graph lattices.
    #[serde(default = "defaults::r0")]
    pub r0: f64,
    /// Random group elements per corpus member.
    #[serde(default = "defaults::random_elements")]
    pub random_elements: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub corpus: Vec<CorpusEntry>,
    pub representation: Option<RepSpec>,
    pub sequence: Option<SequenceSpec>,
    /// Directory that relative file paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

mod defaults {
    pub fn seed() -> u64 {
        1
    }
    pub fn grid() -> usize {
        33
    }
    pub fn p() -> usize {
        2
    }
    pub fn q() -> usize {
        1
    }
    pub fn r0() -> f64 {
        0.95
    }
    pub fn random_elements() -> usize {
        4
    }
    pub fn yes() -> bool {
        true
    }
    pub fn steps() -> usize {
        8
    }
    pub fn seq_rapidity() -> f64 {
        0.5
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Maximality residual of transformed graphs.
    pub residual: f64,
    /// Affine-normal angle (radians) of transformed spheres.
    pub sphere_angle: f64,
    /// `ε_grid = grid_factor · h`.
    pub grid_factor: f64,
    pub equivariance: f64,
    pub compactness: f64,
    /// Gram defect of `Im φᵗ`.
    pub isotropy: f64,
    /// Smallest relative escape `|φ x| / |x|` that counts as leaving `Ker φ`.
    pub avoidance: f64,
    /// Invariance residual of the base representation on its member.
    pub invariance: f64,
    pub lightlike: f64,
    /// Renormalized generator norms must stay below this multiple of the first.
    pub norm_factor: f64,
    /// Rapidity / spread of random group elements.
    pub rapidity: f64,
    /// Comparison constant `c` for affine domination; measured when absent.
    pub comparison: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: 1e-6,
            sphere_angle: 1e-4,
            grid_factor: 3.0,
            equivariance: 1e-9,
            compactness: 1e-3,
            isotropy: 1e-8,
            avoidance: 1e-6,
            invariance: 1e-3,
            lightlike: 1e-3,
            norm_factor: 10.0,
            rapidity: 0.5,
            comparison: None,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        let named = [
            ("residual", self.residual),
            ("sphere_angle", self.sphere_angle),
            ("grid_factor", self.grid_factor),
            ("equivariance", self.equivariance),
            ("compactness", self.compactness),
            ("isotropy", self.isotropy),
            ("avoidance", self.avoidance),
            ("invariance", self.invariance),
            ("lightlike", self.lightlike),
            ("norm_factor", self.norm_factor),
            ("rapidity", self.rapidity),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        if let Some(c) = self.comparison {
            if !(c > 0.5) {
                return Err(Error::InvalidParameter(format!("comparison constant {c} must exceed 1/2")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    #[serde(default = "defaults::yes")]
    pub invariance: bool,
    #[serde(default = "defaults::yes")]
    pub compactness: bool,
    #[serde(default = "defaults::yes")]
    pub avoidance: bool,
    #[serde(default = "defaults::yes")]
    pub domination: bool,
    #[serde(default = "defaults::yes")]
    pub closedness: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Self { invariance: true, compactness: true, avoidance: true, domination: true, closedness: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusEntry {
    /// `boost(e_0, f_q; rapidity)` applied to the totally geodesic `H^p`.
    TotallyGeodesic {
        #[serde(default)]
        rapidity: f64,
    },
    /// Solver graph with boundary values `cos b f_0 + sin b f_1`,
    /// `b = amplitude · sin(mode θ)`.
    Boundary {
        amplitude: f64,
        #[serde(default = "one")]
        mode: usize,
    },
    GraphFile { path: String },
    /// Exact `x_{p+1}² - |x'|² = 1`.
    Hyperboloid,
    /// Exact `x_1 ⋯ x_{p+1} = (p+1)^{-(p+1)/2}`.
    Titeica,
    /// Solver sphere over the round cone.
    RoundCone,
    /// Solver sphere over the positive orthant.
    Orthant,
    ConeFile { path: String },
    SphereFile { path: String },
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepSpec {
    /// `triangle_237` or `genus_two`.
    pub builtin: Option<String>,
    pub file: Option<String>,
    /// `so22` (block embedding into `SO(2,2)`) or `sl3`.
    pub embed: Option<String>,
    /// Conjugate by this boost (or diagonal) after embedding; a nonzero value
    /// breaks invariance of the base member.
    #[serde(default)]
    pub planted_boost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    /// `ρ_n = ρ`, `M_n = M`.
    Constant,
    /// `ρ_n = h_n ρ h_n⁻¹`, `M_n = h_n M` with `h_n` the `n`-th power of a boost.
    Conjugated,
    /// A bounded conjugation path `c_n → c`, `M_n` re-solved from the
    /// boundary (or cone) of `c_n M`.
    FuchsianPath,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub kind: SequenceKind,
    #[serde(default = "defaults::steps")]
    pub steps: usize,
    #[serde(default = "defaults::seq_rapidity")]
    pub rapidity: f64,
    /// Corpus index of the member preserved by the base representation.
    #[serde(default)]
    pub member: usize,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::parse(line, e.message().to_string())
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut s = Self::from_toml(&io::read_file(path)?)?;
        s.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenarios serialize")
    }

    pub fn tag(&self) -> Result<FamilyTag> {
        FamilyTag::parse(&self.family)
    }

    fn resolve(&self, path: &str) -> PathBuf {
        self.base_dir.join(path)
    }

    /// Checks that do not require building anything.
    pub fn validate(&self) -> Result<()> {
        self.tag()?;
        if self.corpus.is_empty() {
            return Err(Error::InvalidParameter("scenario has an empty corpus".into()));
        }
        if self.grid < 5 || self.grid % 2 == 0 {
            return Err(Error::InvalidParameter(format!("grid {} must be odd and at least 5", self.grid)));
        }
        if !(self.r0 > 0.0 && self.r0 < 1.0) {
            return Err(Error::InvalidParameter(format!("chart radius {} must lie in (0, 1)", self.r0)));
        }
        if self.p == 0 {
            return Err(Error::InvalidParameter("p must be positive".into()));
        }
        self.tolerances.validate()?;
        if let Some(seq) = &self.sequence {
            if seq.steps < 2 {
                return Err(Error::InvalidParameter("a sequence needs at least two steps".into()));
            }
            if seq.member >= self.corpus.len() {
                return Err(Error::InvalidParameter(format!("sequence member {} is not in the corpus", seq.member)));
            }
            if self.representation.is_none() {
                return Err(Error::InvalidParameter("a sequence needs a representation".into()));
            }
        }
        Ok(())
    }
}

/// A representation sequence with invariant members.
#[derive(Clone, Debug)]
pub struct Sequence {
    pub rhos: Vec<Representation>,
    pub members: Vec<Member>,
}

/// A validated scenario with its corpus and sequence built.
#[derive(Clone, Debug)]
pub struct Context {
    pub scenario: Scenario,
    pub tag: FamilyTag,
    /// Chart of graph members (unused for affine spheres).
    pub chart: Option<(PoincareModel, Arc<DiskLattice>)>,
    pub members: Vec<Member>,
    pub representation: Option<Representation>,
    pub sequence: Option<Sequence>,
}

impl Context {
    pub fn build(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let tag = scenario.tag()?;
        let chart = match tag {
            FamilyTag::MaximalHpq => Some((
                PoincareModel::standard(scenario.p, scenario.q)?,
                Arc::new(DiskLattice::new(scenario.p, scenario.grid, scenario.r0)?),
            )),
            FamilyTag::AffineSphere => None,
        };
        let mut ctx = Self { scenario, tag, chart, members: Vec::new(), representation: None, sequence: None };
        for (i, entry) in ctx.scenario.corpus.clone().iter().enumerate() {
            let m = ctx.build_member(entry)?;
            if m.tag() != tag {
                return Err(Error::TagMismatch(format!("corpus entry {i} is {}, scenario is {}", m.tag().name(), tag.name())));
            }
            ctx.members.push(m);
        }
        let dim = ctx.members[0].ambient_dim();
        if let Some(i) = ctx.members.iter().position(|m| m.ambient_dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: ctx.members[i].ambient_dim() });
        }
        if let Some(spec) = ctx.scenario.representation.clone() {
            ctx.representation = Some(ctx.build_representation(&spec)?);
        }
        if let Some(spec) = ctx.scenario.sequence.clone() {
            ctx.sequence = Some(ctx.build_sequence(&spec)?);
        }
        Ok(ctx)
    }

    pub fn dim(&self) -> usize {
        self.members[0].ambient_dim()
    }

    pub fn group(&self) -> GroupTag {
        self.members[0].group()
    }

    /// `ε_grid` of a member: `grid_factor` chart steps.
    pub fn eps_grid(&self, m: &Member) -> f64 {
        let h = match m {
            Member::Hpq(g) => g.lattice().h(),
            Member::Affine { sphere, .. } => sphere.lattice().h(),
        };
        self.scenario.tolerances.grid_factor * h
    }

    fn chart(&self) -> Result<(PoincareModel, Arc<DiskLattice>)> {
        self.chart.clone().ok_or_else(|| Error::TagMismatch("graph entry in an affine scenario".into()))
    }

    fn build_member(&self, entry: &CorpusEntry) -> Result<Member> {
        let s = &self.scenario;
        let affine_p = s.p;
        Ok(match entry {
            CorpusEntry::TotallyGeodesic { rapidity } => {
                let (model, lat) = self.chart()?;
                let g = boost(model.dim(), 0, model.dim() - 1, *rapidity);
                Member::Hpq(SpacelikeGraph::totally_geodesic(model, lat, &g)?)
            }
            CorpusEntry::Boundary { amplitude, mode } => Member::Hpq(self.solve_boundary(*amplitude, *mode)?),
            CorpusEntry::GraphFile { path } => {
                let g = io::read_graph(&io::read_file(s.resolve(path))?)?;
                if !g.is_spacelike() {
                    return Err(Error::InvalidParameter(format!("graph {path} is not spacelike")));
                }
                Member::Hpq(g)
            }
            CorpusEntry::Hyperboloid => {
                let cone = ConvexCone::standard_round(affine_p);
                let sphere = AffineHypersurface::over_cone(&cone, s.grid, 2.0, true, |d| {
                    let last = d[affine_p];
                    1.0 / (last * last - d.rows(0, affine_p).norm_squared()).sqrt()
                })?;
                Member::Affine { cone, sphere }
            }
            CorpusEntry::Titeica => {
                let cone = ConvexCone::orthant(affine_p)?;
                let d1 = (affine_p + 1) as f64;
                let k = d1.powf(-d1 / 2.0);
                let sphere = AffineHypersurface::over_cone(&cone, s.grid, d1, true, |d| (k / d.product()).powf(1.0 / d1))?;
                Member::Affine { cone, sphere }
            }
            CorpusEntry::RoundCone => solved(ConvexCone::standard_round(affine_p), s.grid)?,
            CorpusEntry::Orthant => solved(ConvexCone::orthant(affine_p)?, s.grid)?,
            CorpusEntry::ConeFile { path } => solved(io::read_cone(&io::read_file(s.resolve(path))?)?, s.grid)?,
            CorpusEntry::SphereFile { path } => {
                let (cone, sphere) = io::read_sphere(&io::read_file(s.resolve(path))?)?;
                Member::Affine { cone, sphere }
            }
        })
    }

    fn flow_params(&self) -> FlowParams {
        FlowParams { target: 0.5 * self.scenario.tolerances.residual, ..FlowParams::default() }
    }

    fn solve_boundary(&self, amplitude: f64, mode: usize) -> Result<SpacelikeGraph> {
        let (model, lat) = self.chart()?;
        let q = model.q();
        if q == 0 {
            return Err(Error::InvalidParameter("boundary bumps need q >= 1".into()));
        }
        let boundary: Vec<(usize, DVector<f64>)> = lat
            .boundary_nodes()
            .map(|k| {
                let x = lat.x(k);
                let theta = if x.len() > 1 { x[1].atan2(x[0]) } else { x[0].signum() * std::f64::consts::FRAC_PI_2 };
                let b = amplitude * (mode as f64 * theta).sin();
                let mut v = DVector::zeros(q + 1);
                v[0] = b.cos();
                v[1] = b.sin();
                (k, v)
            })
            .collect();
        let prob = PlateauProblem::from_boundary(model, lat, &boundary, self.flow_params())?;
        self.converged(solve_maximal(&prob)?)
    }

    fn converged(&self, sol: crate::maximal::MaximalSolution) -> Result<SpacelikeGraph> {
        if !sol.converged {
            return Err(Error::NonConvergent { gap: sol.residual });
        }
        Ok(sol.graph)
    }

    fn build_representation(&self, spec: &RepSpec) -> Result<Representation> {
        let base = match (&spec.builtin, &spec.file) {
            (Some(b), None) => match b.as_str() {
                "triangle_237" => triangle_237(),
                "genus_two" => genus_two(),
                other => return Err(Error::InvalidParameter(format!("unknown builtin representation {other:?}"))),
            },
            (None, Some(f)) => io::read_representation(&io::read_file(self.scenario.resolve(f))?)?,
            _ => return Err(Error::InvalidParameter("representation needs exactly one of builtin and file".into())),
        };
        let rho = match spec.embed.as_deref() {
            None => base,
            Some("so22") => base.block_embed(GroupTag::So(QuadraticForm::hpq(2, 1)?))?,
            Some("sl3") => base.retagged(GroupTag::Sl(3))?,
            Some(other) => return Err(Error::InvalidParameter(format!("unknown embedding {other:?}"))),
        };
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rho.dim() });
        }
        if spec.planted_boost != 0.0 {
            return rho.conjugate(&self.divergent(spec.planted_boost));
        }
        Ok(rho)
    }

    /// One-parameter subgroup used for divergent recipes: a boost between
    /// the first positive and last negative direction, or a unimodular
    /// diagonal `diag(e^t, 1, …, 1, e^{-t})`.
    pub fn divergent(&self, t: f64) -> DMatrix<f64> {
        let d = self.dim();
        match self.tag {
            FamilyTag::MaximalHpq => boost(d, 0, d - 1, t),
            FamilyTag::AffineSphere => {
                let mut g = DMatrix::identity(d, d);
                g[(0, 0)] = t.exp();
                g[(d - 1, d - 1)] = (-t).exp();
                g
            }
        }
    }

    /// `h M` for corpus member `i`, exactly where the recipe allows it.
    pub fn push(&self, i: usize, h: &DMatrix<f64>) -> Result<Member> {
        if let CorpusEntry::TotallyGeodesic { rapidity } = self.scenario.corpus[i] {
            let (model, lat) = self.chart()?;
            let g = h * boost(model.dim(), 0, model.dim() - 1, rapidity);
            return Ok(Member::Hpq(SpacelikeGraph::totally_geodesic(model, lat, &g)?));
        }
        self.members[i].transform(h)
    }

    fn build_sequence(&self, spec: &SequenceSpec) -> Result<Sequence> {
        let rho = self.representation.clone().ok_or_else(|| Error::InvalidParameter("missing representation".into()))?;
        let i = spec.member;
        let mut out = Sequence { rhos: Vec::new(), members: Vec::new() };
        for n in 1..=spec.steps {
            let (r, m) = match spec.kind {
                SequenceKind::Constant => (rho.clone(), self.members[i].clone()),
                SequenceKind::Conjugated => {
                    let h = self.divergent(spec.rapidity * n as f64);
                    (rho.conjugate(&h)?, self.push(i, &h)?)
                }
                SequenceKind::FuchsianPath => {
                    let c = self.divergent(spec.rapidity * (1.0 - 0.5f64.powi(n as i32)));
                    let m = match self.push(i, &c)? {
                        Member::Hpq(g) => {
                            let (model, lat) = self.chart()?;
                            let prob = PlateauProblem::from_boundary(model, lat, &g.boundary_trace(), self.flow_params())?;
                            Member::Hpq(self.converged(solve_maximal(&prob)?)?)
                        }
                        Member::Affine { cone, .. } => solved(cone, self.scenario.grid)?,
                    };
                    (rho.conjugate(&c)?, m)
                }
            };
            out.rhos.push(r);
            out.members.push(m);
        }
        Ok(out)
    }

    /// Deterministic random group elements; `salt` separates the checks so
    /// that disabling one does not shift another's stream.
    pub fn random_elements(&self, salt: u64, count: usize) -> Vec<DMatrix<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.scenario.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let t = self.scenario.tolerances.rapidity;
        (0..count)
            .map(|_| match self.group() {
                GroupTag::So(form) => random_so(&form, t, &mut rng),
                GroupTag::Sl(d) => random_sl(d, t, &mut rng),
            })
            .collect()
    }
}

fn solved(cone: ConvexCone, grid: usize) -> Result<Member> {
    let sphere = solve_affine_sphere(&cone, grid)?;
    Ok(Member::Affine { cone, sphere })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Invariance,
    Compactness,
    Avoidance,
    Domination,
    Closedness,
}

impl Property {
    pub const ALL: [Property; 5] =
        [Property::Invariance, Property::Compactness, Property::Avoidance, Property::Domination, Property::Closedness];

    pub fn name(&self) -> &'static str {
        match self {
            Property::Invariance => "invariance",
            Property::Compactness => "compactness",
            Property::Avoidance => "avoidance",
            Property::Domination => "domination",
            Property::Closedness => "closedness",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    AtMost,
    AtLeast,
}

/// Data from which a margin is recomputed; matrices are stored row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Defining residual of `g M`.
    TransformedResidual { member: usize, g: Vec<Vec<f64>> },
    /// Metric disagreement between `M` and `g M`.
    TransformedMetric { member: usize, g: Vec<Vec<f64>> },
    /// Gap between the renormalizations of `(M, o)` and `g (M, o)`.
    PushedGap { member: usize, g: Vec<Vec<f64>> },
    /// Gap between the renormalized sequence terms `step` and last.
    SequenceGap { step: usize },
    /// Largest relative escape of the member from `Ker φ`.
    Escape { member: usize, phi: Vec<Vec<f64>> },
    /// Gram defect of `Im φᵗ`.
    Isotropy { phi: Vec<Vec<f64>> },
    /// `|d_{g(M,o)}(g x) - d_{(M,o)}(x)|` at a node.
    Equivariance { member: usize, g: Vec<Vec<f64>>, node: usize },
    /// Excess in one clause of the domination inequality at a node.
    Inequality { member: usize, node: usize, clause: Clause },
    /// Running-sup excess of `d_{(M_n,o_n)}(ρ_n(γ) o_n)` for a generator.
    Displacement { generator: usize },
    /// Largest renormalized generator norm over the first.
    NormRatio,
    BaseInvariance { generator: usize },
    LimitInvariance,
    /// Sup-distance between the last two renormalized graphs.
    UniformGap,
    /// Worst isometry defect along a ray of the limit graph.
    LightlikeRay { direction: Vec<f64> },
}

/// Clauses of the domination inequality, each measured as an excess.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// Graphs: `d_{(M,o)}(x) - d_M(o, x)`.
    PseudoOverIntrinsic,
    /// Graphs: `d_M(o, x) - d_{(M,o)}(x)`.
    IntrinsicOverPseudo,
    /// Affine: `d_M - (2c / (1 - a)) (log|φ_o| - log((1 - a)/2))`.
    Domination,
    /// Affine: `d_M - c h_M`.
    Comparison,
    /// Affine: `(1 - a)|t| + log((1 - a)/2) - log|φ_o|`.
    Growth,
    /// Affine: `sup |α̇| - a` along the sector curve.
    Slope,
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn from_rows(r: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = r.len();
    let m = r.first().map_or(0, Vec::len);
    if n == 0 || r.iter().any(|row| row.len() != m) {
        return Err(Error::InvalidParameter("ragged or empty matrix".into()));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| r[i][j]))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Margin {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub sense: Sense,
    /// Informational margins do not decide the property.
    pub gating: bool,
    pub witness: Option<Witness>,
}

impl Margin {
    pub fn at_most(name: &str, value: f64, limit: f64, witness: Option<Witness>) -> Self {
        Self { name: name.into(), value, limit, sense: Sense::AtMost, gating: true, witness }
    }

    pub fn at_least(name: &str, value: f64, limit: f64, witness: Option<Witness>) -> Self {
        Self { name: name.into(), value, limit, sense: Sense::AtLeast, gating: true, witness }
    }

    pub fn informational(mut self) -> Self {
        self.gating = false;
        self
    }

    pub fn passed(&self) -> bool {
        match self.sense {
            Sense::AtMost => self.value <= self.limit,
            Sense::AtLeast => self.value >= self.limit,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: Property,
    pub margins: Vec<Margin>,
    pub notes: Vec<String>,
}

impl PropertyReport {
    pub fn new(property: Property) -> Self {
        Self { property, margins: Vec::new(), notes: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.margins.iter().all(|m| !m.gating || m.passed())
    }

    pub fn failures(&self) -> impl Iterator<Item = &Margin> {
        self.margins.iter().filter(|m| m.gating && !m.passed())
    }

    /// Keep the worse of `m` and an existing margin of the same name.
    pub fn worst(&mut self, m: Margin) {
        match self.margins.iter_mut().find(|x| x.name == m.name) {
            Some(x) => {
                let worse = match m.sense {
                    Sense::AtMost => m.value > x.value,
                    Sense::AtLeast => m.value < x.value,
                };
                if worse || m.value.is_nan() {
                    *x = m;
                }
            }
            None => self.margins.push(m),
        }
    }
}

/// Runs the enabled checks in parallel, in a fixed order.
pub fn run_all(ctx: &Context) -> Vec<Result<PropertyReport>> {
    use rayon::prelude::*;
    let c = ctx.scenario.checks;
    let enabled: Vec<Property> = Property::ALL
        .into_iter()
        .filter(|p| match p {
            Property::Invariance => c.invariance,
            Property::Compactness => c.compactness,
            Property::Avoidance => c.avoidance,
            Property::Domination => c.domination,
            Property::Closedness => c.closedness,
        })
        .collect();
    enabled
        .par_iter()
        .map(|p| match p {
            Property::Invariance => check_invariance(ctx),
            Property::Compactness => check_compactness(ctx),
            Property::Avoidance => check_avoidance(ctx),
            Property::Domination => check_domination(ctx),
            Property::Closedness => closedness_scenario(ctx),
        })
        .collect()
}

/// Tab-separated margins table.
pub fn render_table(reports: &[PropertyReport]) -> String {
    let mut out = String::from("property\tmargin\tvalue\tlimit\tsense\tgating\tstatus\n");
    for r in reports {
        for m in &r.margins {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.property.name(),
                m.name,
                io::real(m.value),
                io::real(m.limit),
                if m.sense == Sense::AtMost { "<=" } else { ">=" },
                m.gating,
                match (m.gating, m.passed()) {
                    (false, _) => "info",
                    (true, true) => "pass",
                    (true, false) => "fail",
                },
            ));
        }
    }
    out
}

pub fn render_summary(name: &str, reports: &[PropertyReport]) -> String {
    let mut out = format!("scenario {name}\n");
    for r in reports {
        out.push_str(&format!("{:<12} {}\n", r.property.name(), if r.passed() { "PASS" } else { "FAIL" }));
        for m in r.failures() {
            out.push_str(&format!("  {}: {:.3e} (limit {:.3e})\n", m.name, m.value, m.limit));
        }
        for n in &r.notes {
            out.push_str(&format!("  note: {n}\n"));
        }
    }
    out
}

/// A failed margin with everything needed to recompute it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessFile {
    /// Directory the scenario's relative paths were resolved against.
    #[serde(default)]
    pub base_dir: String,
    pub scenario: Scenario,
    pub property: Property,
    pub margin: String,
    pub value: f64,
    pub witness: Witness,
}

impl WitnessFile {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("witnesses serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(1, e.message().to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ORACLE: &str = r#"
name = "oracle"
family = "maximal_hpq"
grid = 17
random_elements = 2
[[corpus]]
kind = "totally_geodesic"
[[corpus]]
kind = "totally_geodesic"
rapidity = 0.4
[representation]
builtin = "triangle_237"
embed = "so22"
[sequence]
kind = "conjugated"
steps = 4
"#;

    fn ctx(text: &str) -> Context {
        Context::build(Scenario::from_toml(text).unwrap()).unwrap()
    }

    fn reports(c: &Context) -> Vec<PropertyReport> {
        run_all(c).into_iter().map(|r| r.unwrap()).collect()
    }

    #[test]
    fn scenario_defaults_and_validation() {
        let s = Scenario::from_toml("name = \"x\"\nfamily = \"maximal_hpq\"\n[[corpus]]\nkind = \"totally_geodesic\"\n").unwrap();
        assert_eq!((s.grid, s.p, s.q, s.seed), (33, 2, 1, 1));
        assert!(s.validate().is_ok());
        let empty = Scenario::from_toml("name = \"x\"\nfamily = \"maximal_hpq\"\n").unwrap();
        assert!(matches!(empty.validate(), Err(Error::InvalidParameter(_))));
        let even = Scenario { grid: 16, ..s.clone() };
        assert!(even.validate().is_err());
        let mut bad_tol = s.clone();
        bad_tol.tolerances.isotropy = 0.0;
        assert!(bad_tol.validate().is_err());
        let unknown = Scenario::from_toml("name = \"x\"\nfamily = \"maximal_hpq\"\ncolour = 3\n");
        assert!(matches!(unknown, Err(Error::Parse { line: 3, .. })), "{unknown:?}");
        let s2 = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(s2.to_toml(), s.to_toml());
    }

    #[test]
    fn family_mismatch_is_rejected() {
        let text = "name = \"x\"\nfamily = \"affine_sphere\"\n[[corpus]]\nkind = \"totally_geodesic\"\n";
        assert!(Context::build(Scenario::from_toml(text).unwrap()).is_err());
    }

    #[test]
    fn oracle_scenario_passes_everything() {
        let c = ctx(ORACLE);
        let reps = reports(&c);
        assert_eq!(reps.len(), 5);
        for r in &reps {
            assert!(r.passed(), "{}", render_table(std::slice::from_ref(r)));
        }
    }

    #[test]
    fn identity_is_an_exact_pass() {
        let c = ctx(ORACLE);
        let id = DMatrix::identity(4, 4);
        let w = Witness::TransformedMetric { member: 1, g: rows(&id) };
        assert_eq!(replay(&c, &w).unwrap(), 0.0);
        let Member::Hpq(m) = &c.members[1] else { panic!() };
        let w = Witness::TransformedResidual { member: 1, g: rows(&id) };
        assert_eq!(replay(&c, &w).unwrap(), m.max_residual().unwrap());
    }

    #[test]
    fn checks_are_independent() {
        let all = reports(&ctx(ORACLE));
        let mut s = Scenario::from_toml(ORACLE).unwrap();
        s.checks.compactness = false;
        s.checks.closedness = false;
        let some = reports(&Context::build(s).unwrap());
        assert_eq!(some.len(), 3);
        for r in &some {
            let full = all.iter().find(|x| x.property == r.property).unwrap();
            assert_eq!(render_table(std::slice::from_ref(r)), render_table(std::slice::from_ref(full)));
        }
    }

    #[test]
    fn planted_failure_replays_from_its_witness() {
        let text = ORACLE.replace("embed = \"so22\"", "embed = \"so22\"\nplanted_boost = 0.5");
        let c = ctx(&text);
        let r = closedness_scenario(&c).unwrap();
        assert!(!r.passed());
        let failed = r.failures().next().unwrap();
        let file = WitnessFile {
            base_dir: String::new(),
            scenario: c.scenario.clone(),
            property: r.property,
            margin: failed.name.clone(),
            value: failed.value,
            witness: failed.witness.clone().unwrap(),
        };
        let back = WitnessFile::from_toml(&file.to_toml()).unwrap();
        let again = replay(&Context::build(back.scenario).unwrap(), &back.witness).unwrap();
        assert!((again - back.value).abs() <= 1e-12, "{again} vs {}", back.value);
    }

    #[test]
    fn running_sup_rule() {
        assert!(running_sup_bounded(&[1.0; 10]));
        assert!(running_sup_bounded(&[0.0, 2.0, 1.0, 1.5, 1.9, 1.9, 1.9, 1.9, 1.9, 1.9]));
        // slow growth in the tail is tolerated, fast growth is not
        let slow: Vec<f64> = (1..=10).map(|n| 0.5 * (n as f64).ln()).collect();
        assert!(running_sup_bounded(&slow));
        let fast: Vec<f64> = (1..=10).map(|n| n as f64).collect();
        assert!(!running_sup_bounded(&fast));
    }

    #[test]
    fn q_zero_domination_is_tight() {
        let text = "name = \"h2\"\nfamily = \"maximal_hpq\"\ngrid = 33\nq = 0\n[[corpus]]\nkind = \"totally_geodesic\"\nrapidity = 0.3\n";
        let c = ctx(text);
        let r = check_domination(&c).unwrap();
        assert!(r.passed(), "{}", render_table(std::slice::from_ref(&r)));
        let reverse = r.margins.iter().find(|m| m.name.starts_with("intrinsic distance over")).unwrap();
        assert!(reverse.passed());
    }

    #[test]
    fn affine_oracles_pass() {
        let text = r#"
name = "affine"
family = "affine_sphere"
grid = 17
random_elements = 2
[[corpus]]
kind = "hyperboloid"
[representation]
builtin = "triangle_237"
embed = "sl3"
[sequence]
kind = "conjugated"
steps = 4
"#;
        for r in reports(&ctx(text)) {
            assert!(r.passed(), "{}", render_table(std::slice::from_ref(&r)));
        }
    }

    #[test]
    fn divergent_recipes_fail_isotropy_only_when_not_null() {
        // a sanity check of the avoidance machinery itself
        let c = ctx(ORACLE);
        let r = check_avoidance(&c).unwrap();
        assert!(r.passed());
        let phi = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]));
        assert!(replay(&c, &Witness::Isotropy { phi: rows(&phi) }).unwrap() > 0.5);
    }
}
