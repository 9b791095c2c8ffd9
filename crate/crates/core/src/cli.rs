//! The `robustfam` command line: solvers, scenario checks and plot-data export.
//!
//! Exit codes: 0 success, 1 a property or convergence target failed,
//! 2 invalid input.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::affine::{AffineSphereProblem, NewtonParams};
use crate::error::{Error, Result};
use crate::forms::{is_member, TOL_GROUP};
use crate::harness::{self, Context, PropertyReport, Scenario, WitnessFile};
use crate::hpq::pseudo_distance;
use crate::io::{self, real};
use crate::maximal::{solve_maximal, FlowParams, PlateauProblem};
use crate::reps::TOL_REP;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "robustfam", version, about = "Maximal submanifolds, affine spheres and robust-family checks")]
pub struct Cli {
    /// Configuration file (TOML); flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Lattice size per axis (odd).
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Convergence target of the solvers; the maximality tolerance for `check`.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve a maximal-graph Plateau problem file.
    SolveMaximal { problem: PathBuf },
    /// Solve for the hyperbolic affine sphere over a cone file.
    SolveAffine { cone: PathBuf },
    /// Run a scenario's property checks.
    Check { scenario: PathBuf },
    /// Write columnar plot data.
    Export {
        file: PathBuf,
        #[arg(long, value_enum)]
        kind: ExportKind,
    },
    /// Recompute the margin recorded in a witness file.
    Replay { witness: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportKind {
    /// Graph file → x, then the S^q components.
    Graph,
    /// Graph file → pseudo-distance and intrinsic distance from the centre.
    Pairs,
    /// Report file → margins table.
    Report,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub tol_group: f64,
    pub tol_rep: f64,
    /// `ε_grid = grid_factor · h`; overrides scenario files when set.
    pub grid_factor: Option<f64>,
    pub residual_target: f64,
    pub newton_tol: f64,
    /// Lattice size; overrides scenario files when set. Default 33 for the
    /// affine solver.
    pub grid: Option<usize>,
    /// Comparison constant `c` per affine dimension `p`, keyed by `p`.
    pub comparison: BTreeMap<String, f64>,
    pub output: PathBuf,
    /// Overrides scenario seeds when set.
    pub seed: Option<u64>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            tol_group: TOL_GROUP,
            tol_rep: TOL_REP,
            grid_factor: None,
            residual_target: FlowParams::default().target,
            newton_tol: NewtonParams::default().tol,
            grid: None,
            comparison: BTreeMap::new(),
            output: PathBuf::from("out"),
            seed: None,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_file(path)?;
        toml::from_str(&text).map_err(|e| {
            let line = e.span().map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::parse(line, e.message().to_string())
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tol_group", self.tol_group),
            ("tol_rep", self.tol_rep),
            ("grid_factor", self.grid_factor.unwrap_or(1.0)),
            ("residual_target", self.residual_target),
            ("newton_tol", self.newton_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(g) = self.grid.filter(|g| *g < 5 || g % 2 == 0) {
            return Err(Error::InvalidParameter(format!("grid {g} must be odd and at least 5")));
        }
        for (p, c) in &self.comparison {
            if p.parse::<usize>().is_err() || !(*c > 0.5) {
                return Err(Error::InvalidParameter(format!("comparison constant {p} = {c}: need p integer and c > 1/2")));
            }
        }
        Ok(())
    }

    /// File config overridden by flags.
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let mut c = match &cli.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        c.seed = cli.seed.or(c.seed);
        c.grid = cli.grid.or(c.grid);
        if let Some(t) = cli.tol {
            c.residual_target = t;
            c.newton_tol = t;
        }
        if let Some(o) = &cli.out {
            c.output = o.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

/// What a command hands back: an exit code and the text for stdout.
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Parse { .. }
            | Error::Io(_)
            | Error::InvalidParameter(_)
            | Error::ContainsLine
            | Error::NotConvex(_)
            | Error::DimensionMismatch { .. }
            | Error::TagMismatch(_)
            | Error::TrivialSubspace
            | Error::NotSpacelike { .. }
    )
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Outcome {
    let result = Config::resolve(cli).and_then(|cfg| match &cli.command {
        Command::SolveMaximal { problem } => cmd_solve_maximal(&cfg, problem),
        Command::SolveAffine { cone } => cmd_solve_affine(&cfg, cone),
        Command::Check { scenario } => cmd_check(&cfg, cli, scenario),
        Command::Export { file, kind } => cmd_export(&cfg, file, *kind),
        Command::Replay { witness } => cmd_replay(witness),
    });
    match result {
        Ok(o) => o,
        Err(e) => {
            let code = if is_input_error(&e) { EXIT_INPUT } else { EXIT_FAILED };
            Outcome { code, stdout: format!("error: {e}\n") }
        }
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let o = run(&cli);
    if o.code == EXIT_OK {
        print!("{}", o.stdout);
    } else {
        eprint!("{}", o.stdout);
    }
    o.code
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned())
}

fn history_log(history: &[f64]) -> String {
    let mut out = String::from("iteration\tresidual\n");
    for (i, r) in history.iter().enumerate() {
        let _ = writeln!(out, "{i}\t{}", real(*r));
    }
    out
}

pub fn cmd_solve_maximal(cfg: &Config, path: &Path) -> Result<Outcome> {
    let prob = io::read_problem(&io::read_file(path)?)?;
    let params = FlowParams { target: cfg.residual_target, ..*prob.params() };
    let target = params.target;
    let prob = PlateauProblem::new(prob.initial_guess().clone(), params)?;
    let sol = solve_maximal(&prob)?;
    let name = stem(path);
    let graph_path = cfg.output.join(format!("{name}.graph"));
    io::write_file(&graph_path, &io::write_graph(&sol.graph))?;
    io::write_file(cfg.output.join(format!("{name}.residuals.tsv")), &history_log(&sol.history))?;
    let stdout = format!(
        "{}: residual {:.3e} after {} iterations (target {:.1e}) -> {}\n",
        if sol.converged { "converged" } else { "not converged" },
        sol.residual,
        sol.iterations,
        target,
        graph_path.display()
    );
    Ok(Outcome { code: if sol.converged { EXIT_OK } else { EXIT_FAILED }, stdout })
}

pub fn cmd_solve_affine(cfg: &Config, path: &Path) -> Result<Outcome> {
    let cone = io::read_cone(&io::read_file(path)?)?;
    let params = NewtonParams { tol: cfg.newton_tol, ..NewtonParams::default() };
    let sol = match AffineSphereProblem::new(&cone, cfg.grid.unwrap_or(33))?.solve(params) {
        Ok(s) => s,
        Err(Error::NewtonDivergence { history }) => {
            io::write_file(cfg.output.join(format!("{}.residuals.tsv", stem(path))), &history_log(&history))?;
            return Err(Error::NewtonDivergence { history });
        }
        Err(e) => return Err(e),
    };
    let name = stem(path);
    let sphere_path = cfg.output.join(format!("{name}.sphere"));
    io::write_file(&sphere_path, &io::write_sphere(&cone, &sol.sphere))?;
    io::write_file(cfg.output.join(format!("{name}.residuals.tsv")), &history_log(&sol.history))?;
    let check = sol.sphere.is_affine_sphere(1e-5)?;
    let stdout = format!(
        "converged: residual {:.3e} after {} iterations, max affine-normal angle {:.3e} -> {}\n",
        sol.history.last().copied().unwrap_or(f64::NAN),
        sol.iterations,
        check.max_angle,
        sphere_path.display()
    );
    Ok(Outcome { code: EXIT_OK, stdout })
}

/// Scenario with the resolved configuration (flags over config file) laid
/// on top.
fn prepared_scenario(cfg: &Config, cli: &Cli, path: &Path) -> Result<Scenario> {
    let mut s = Scenario::load(path)?;
    if let Some(seed) = cfg.seed {
        s.seed = seed;
    }
    if let Some(g) = cfg.grid {
        s.grid = g;
    }
    if let Some(f) = cfg.grid_factor {
        s.tolerances.grid_factor = f;
    }
    if let Some(t) = cli.tol {
        s.tolerances.residual = t;
    }
    if s.tolerances.comparison.is_none() {
        s.tolerances.comparison = cfg.comparison.get(&s.p.to_string()).copied();
    }
    s.validate()?;
    Ok(s)
}

fn validate_representation(cfg: &Config, ctx: &Context) -> Result<()> {
    if let Some(rho) = &ctx.representation {
        let defect = rho.relator_defect();
        if defect > cfg.tol_rep {
            return Err(Error::InvalidParameter(format!("relator defect {defect:.3e} exceeds tol_rep {:.1e}", cfg.tol_rep)));
        }
        if let Some(i) = rho.generators().iter().position(|g| !is_member(g, rho.tag(), cfg.tol_group)) {
            return Err(Error::InvalidParameter(format!("generator {i} is not in the group within tol_group")));
        }
    }
    Ok(())
}

pub fn cmd_check(cfg: &Config, cli: &Cli, path: &Path) -> Result<Outcome> {
    let scenario = prepared_scenario(cfg, cli, path)?;
    let ctx = Context::build(scenario)?;
    validate_representation(cfg, &ctx)?;
    let name = ctx.scenario.name.clone();
    let mut reports: Vec<PropertyReport> = Vec::new();
    let mut errors = String::new();
    for r in harness::run_all(&ctx) {
        match r {
            Ok(r) => reports.push(r),
            Err(e) => {
                let _ = writeln!(errors, "check aborted: {e}");
            }
        }
    }
    let out = &cfg.output;
    io::write_file(out.join(format!("{name}.report.tsv")), &harness::render_table(&reports))?;
    io::write_file(
        out.join(format!("{name}.report.toml")),
        &toml::to_string(&ReportFile { scenario: name.clone(), reports: reports.clone() }).expect("reports serialize"),
    )?;
    let mut summary = harness::render_summary(&name, &reports);
    summary.push_str(&errors);
    let base_dir = ctx.scenario.base_dir.to_string_lossy().into_owned();
    for r in &reports {
        for (k, m) in r.failures().enumerate() {
            let Some(w) = &m.witness else { continue };
            let file = WitnessFile {
                base_dir: base_dir.clone(),
                scenario: ctx.scenario.clone(),
                property: r.property,
                margin: m.name.clone(),
                value: m.value,
                witness: w.clone(),
            };
            let wp = out.join(format!("{name}.witness-{}-{k}.toml", r.property.name()));
            io::write_file(&wp, &file.to_toml())?;
            let _ = writeln!(summary, "witness: {}", wp.display());
        }
    }
    io::write_file(out.join(format!("{name}.summary.txt")), &summary)?;
    let failed = !errors.is_empty() || reports.iter().any(|r| !r.passed());
    Ok(Outcome { code: if failed { EXIT_FAILED } else { EXIT_OK }, stdout: summary })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportFile {
    pub scenario: String,
    pub reports: Vec<PropertyReport>,
}

pub fn cmd_export(cfg: &Config, path: &Path, kind: ExportKind) -> Result<Outcome> {
    let text = io::read_file(path)?;
    let name = stem(path);
    let (suffix, table) = match kind {
        ExportKind::Graph => ("graph.tsv", export_graph(&io::read_graph(&text)?)),
        ExportKind::Pairs => ("pairs.tsv", export_pairs(&io::read_graph(&text)?)?),
        ExportKind::Report => {
            let r: ReportFile = toml::from_str(&text).map_err(|e| Error::parse(1, e.message().to_string()))?;
            ("margins.tsv", export_margins(&r.reports))
        }
    };
    let target = cfg.output.join(format!("{name}.{suffix}"));
    io::write_file(&target, &table)?;
    Ok(Outcome { code: EXIT_OK, stdout: format!("{}\n", target.display()) })
}

pub fn export_graph(g: &crate::hpq::SpacelikeGraph) -> String {
    let lat = g.lattice();
    let mut out = String::new();
    let mut head: Vec<String> = (1..=lat.p()).map(|i| format!("x{i}")).collect();
    head.extend((0..=g.model().q()).map(|i| format!("s{i}")));
    out.push_str(&head.join("\t"));
    out.push('\n');
    for k in 0..lat.len() {
        let row: Vec<String> = lat.x(k).iter().chain(g.value(k).iter()).map(|v| real(*v)).collect();
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

/// Pseudo-distance and intrinsic distance from the centre node to every node.
pub fn export_pairs(g: &crate::hpq::SpacelikeGraph) -> Result<String> {
    let c = g.lattice().center();
    let d = g.distances_from(c)?;
    let o = g.position(c);
    let mut out = String::from("node\tpseudo\tintrinsic\n");
    for (k, dk) in d.iter().enumerate() {
        let _ = writeln!(out, "{k}\t{}\t{}", real(pseudo_distance(g.model().form(), &o, &g.position(k))), real(*dk));
    }
    Ok(out)
}

pub fn export_margins(reports: &[PropertyReport]) -> String {
    let mut out = String::from("property\tmargin\tvalue\tlimit\tslack\tstatus\n");
    for r in reports {
        for m in &r.margins {
            let slack = match m.sense {
                harness::Sense::AtMost => m.limit - m.value,
                harness::Sense::AtLeast => m.value - m.limit,
            };
            let status = match (m.gating, m.passed()) {
                (false, _) => "info",
                (true, true) => "pass",
                (true, false) => "fail",
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{status}",
                r.property.name(),
                m.name,
                real(m.value),
                real(m.limit),
                real(slack)
            );
        }
    }
    out
}

pub fn cmd_replay(path: &Path) -> Result<Outcome> {
    let file = WitnessFile::from_toml(&io::read_file(path)?)?;
    let mut scenario = file.scenario.clone();
    scenario.base_dir = PathBuf::from(&file.base_dir);
    let ctx = Context::build(scenario)?;
    let value = harness::replay(&ctx, &file.witness)?;
    let gap = (value - file.value).abs();
    let same = gap <= 1e-12 || (value.is_nan() && file.value.is_nan());
    let stdout = format!(
        "{} / {}: recorded {}, replayed {} ({})\n",
        file.property.name(),
        file.margin,
        real(file.value),
        real(value),
        if same { "reproduced" } else { "differs" }
    );
    Ok(Outcome { code: if same { EXIT_OK } else { EXIT_FAILED }, stdout })
}
