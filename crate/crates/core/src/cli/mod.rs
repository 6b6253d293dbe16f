//! Command-line front end. Every command writes JSON (stdout or --out), with a
//! manifest of its inputs, and CSV for grid data when --csv is given.
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

mod verify;

use crate::edgefn::EdgeFunction;
use crate::error::{invalid, Error, Result};
use crate::graph::{GraphPoint, MetricGraph};
use crate::kernel::{kernel_eval, semigroup_apply, GraphKernelRequest, SemigroupKind, Targets};
use crate::pam::{intermittency_report, lyapunov_table, PotentialLaw};
use crate::spectral::{eigenvalues_via_reduction, krein_resolvent, EdgePotential};
use crate::stochastic::{feynman_kac, simulate_one, Scale, WalkConfig};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

pub use verify::{verify_graph, VerifyRow};

/// Reported accuracy of a polished eigenvalue, relative to max(1, |lambda|).
const EIGEN_TOL: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(name = "mgkernel", version, about = "Kernels, spectra and random walks on metric graphs")]
struct Cli {
    /// worker threads (default: all cores)
    #[arg(long, env = "MGKERNEL_WORKERS", global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Output {
    /// JSON destination (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// also write the manifest to this file
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// K(x, y) by the path sum
    Kernel {
        #[arg(long)]
        graph: PathBuf,
        /// source point, edge:position
        #[arg(long)]
        x: String,
        /// target points, edge:position
        #[arg(long, num_args = 1..)]
        y: Vec<String>,
        /// evaluate on a grid with this many samples per unit length
        #[arg(long)]
        grid: Option<f64>,
        #[arg(long)]
        t: f64,
        /// heat or poly:m
        #[arg(long, default_value = "heat")]
        kind: String,
        #[arg(long, default_value_t = 1e-8)]
        eps: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// e^{-v0 t} (k_t * u0) on a grid
    Solve {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value = "heat")]
        kind: String,
        /// const:v or bump:edge:center:radius
        #[arg(long)]
        init: String,
        /// zero or const:v0
        #[arg(long, default_value = "zero")]
        potential: String,
        #[arg(long, default_value_t = 32.0)]
        per_unit: f64,
        #[arg(long, default_value_t = 1e-8)]
        eps: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// eigenvalues in a window via the vertex reduction
    Spectrum {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, num_args = 2, allow_negative_numbers = true)]
        window: Vec<f64>,
        #[arg(long, default_value = "zero")]
        potential: String,
        #[command(flatten)]
        output: Output,
    },
    /// (H - z)^{-1} g
    Resolvent {
        #[arg(long)]
        graph: PathBuf,
        /// re or re,im
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        /// const:v or bump:edge:center:radius
        #[arg(long)]
        rhs: String,
        #[arg(long, default_value = "zero")]
        potential: String,
        #[arg(long, default_value_t = 32.0)]
        per_unit: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Walsh Brownian motion and Feynman-Kac estimates
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        /// starting point, edge:position
        #[arg(long)]
        start: String,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// delta (variance 2t) or half (variance t)
        #[arg(long, default_value = "delta")]
        scale: String,
        #[arg(long, default_value = "zero")]
        potential: String,
        /// observable f(X_t): const:v or bump:edge:center:radius
        #[arg(long, default_value = "const:1")]
        observable: String,
        /// CSV of trajectory 0 (time, edge, xi)
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// moment Lyapunov table and intermittency report
    Pam {
        #[arg(long)]
        graph: PathBuf,
        /// bernoulli:p:lo:hi, uniform:lo:hi or constant:v0
        #[arg(long)]
        law: String,
        #[arg(long)]
        tmax: f64,
        /// intervals in the uniform grid on [0, tmax]
        #[arg(long, default_value_t = 8)]
        tsteps: usize,
        #[arg(long, default_value_t = 3)]
        pmax: u32,
        #[arg(long, default_value_t = 100)]
        realizations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// cross-checks against the reference solvers; exit 0 iff all pass
    Verify {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    /// arguments other than output destinations and worker count
    args: Vec<String>,
    graph: Option<GraphSummary>,
    seeds: Vec<u64>,
    tolerances: BTreeMap<&'static str, f64>,
}

#[derive(Serialize)]
struct GraphSummary {
    path: String,
    vertices: usize,
    edges: usize,
    total_length: f64,
}

impl Manifest {
    fn new(command: &'static str, args: &[String], graph: Option<(&Path, &MetricGraph)>) -> Self {
        Manifest {
            tool: "mgkernel",
            version: env!("CARGO_PKG_VERSION"),
            command,
            args: args.to_vec(),
            graph: graph.map(|(p, g)| GraphSummary {
                path: p.display().to_string(),
                vertices: g.vertex_count(),
                edges: g.edge_count(),
                total_length: g.total_measure(),
            }),
            seeds: Vec::new(),
            tolerances: BTreeMap::new(),
        }
    }

    fn tol(mut self, name: &'static str, v: f64) -> Self {
        self.tolerances.insert(name, v);
        self
    }

    fn seed(mut self, s: u64) -> Self {
        self.seeds.push(s);
        self
    }
}

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = cli.workers {
        // only the first call in a process can size the global pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let recorded = record_args(&args);
    match dispatch(cli.command, &recorded) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input() {
                2
            } else {
                3
            }
        }
    }
}

fn record_args(args: &[OsString]) -> Vec<String> {
    let skip = ["--out", "--manifest", "--csv", "--trajectory", "--workers"];
    let mut out = Vec::new();
    let mut it = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned());
    while let Some(a) = it.next() {
        if skip.contains(&a.as_str()) {
            it.next();
        } else if !skip.iter().any(|s| a.starts_with(&format!("{s}="))) {
            out.push(a);
        }
    }
    out
}

fn load_graph(path: &Path) -> Result<MetricGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    MetricGraph::from_json(&text)
}

fn emit(output: &Output, manifest: Manifest, mut body: Value) -> Result<()> {
    let m = serde_json::to_value(&manifest)?;
    if let Some(path) = &output.manifest {
        std::fs::write(path, serde_json::to_string_pretty(&m)? + "\n")?;
    }
    body["manifest"] = m;
    let text = serde_json::to_string_pretty(&body)? + "\n";
    match &output.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

type Field = Box<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// `const:v` or `bump:edge:center:radius`; the bump is cos^2 on [c - r, c + r].
fn parse_field(g: &MetricGraph, s: &str) -> Result<Field> {
    if let Some(v) = s.strip_prefix("const:") {
        let v: f64 = v.parse().map_err(|_| Error::Invalid(format!("bad constant in {s:?}")))?;
        return Ok(Box::new(move |_, _| v));
    }
    if let Some(rest) = s.strip_prefix("bump:") {
        let parts: Vec<&str> = rest.rsplitn(3, ':').collect();
        if parts.len() != 3 {
            return invalid(format!("bump {s:?} is not bump:edge:center:radius"));
        }
        let (r, c, id) = (parts[0], parts[1], parts[2]);
        let e = g.edge_index(id).ok_or_else(|| Error::UnknownEdge(id.to_string()))?;
        let c: f64 = c.parse().map_err(|_| Error::Invalid(format!("bad center in {s:?}")))?;
        let r: f64 = r.parse().map_err(|_| Error::Invalid(format!("bad radius in {s:?}")))?;
        if !(r > 0.0) {
            return invalid("bump radius must be positive");
        }
        return Ok(Box::new(move |edge, x| {
            let d = (x - c).abs();
            if edge == e && d < r {
                (std::f64::consts::FRAC_PI_2 * d / r).cos().powi(2)
            } else {
                0.0
            }
        }));
    }
    invalid(format!("cannot parse {s:?}; expected const:v or bump:edge:center:radius"))
}

fn parse_constant_potential(s: &str) -> Result<f64> {
    if s == "zero" {
        return Ok(0.0);
    }
    s.strip_prefix("const:")
        .and_then(|v| v.parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Invalid(format!("potential {s:?} is not zero or const:v0")))
}

fn parse_z(s: &str) -> Result<C> {
    let bad = || Error::Invalid(format!("z {s:?} is not re or re,im"));
    let mut it = s.split(',').map(|p| p.trim().parse::<f64>());
    let re = it.next().ok_or_else(bad)?.map_err(|_| bad())?;
    let im = match it.next() {
        Some(v) => v.map_err(|_| bad())?,
        None => 0.0,
    };
    if it.next().is_some() {
        return Err(bad());
    }
    Ok(C::new(re, im))
}

fn point_json(g: &MetricGraph, p: &GraphPoint) -> String {
    p.label(g)
}

fn dispatch(cmd: Command, args: &[String]) -> Result<i32> {
    match cmd {
        Command::Kernel { graph, x, y, grid, t, kind, eps, csv, output } => {
            let g = load_graph(&graph)?;
            let x = g.parse_point(&x)?;
            let kind = SemigroupKind::parse(&kind)?;
            let targets = match (grid, y.is_empty()) {
                (Some(per_unit), true) if per_unit > 0.0 => Targets::Grid { per_unit },
                (None, false) => Targets::Points(y.iter().map(|s| g.parse_point(s)).collect::<Result<_>>()?),
                _ => return invalid("give either --y points or a positive --grid"),
            };
            let req = GraphKernelRequest { x, targets, profile: kind.profile(t)?, eps };
            let k = kernel_eval(&g, &req)?;
            let tol = k.truncation_bound;
            let values: Vec<Value> = k
                .points
                .iter()
                .zip(&k.values)
                .map(|(p, v)| json!({"y": point_json(&g, p), "value": v, "tolerance": tol}))
                .collect();
            if let Some(path) = csv {
                write_csv(&path, &["edge", "xi", "value", "tolerance"], k.points.iter().zip(&k.values).map(|(p, v)| {
                    vec![g.edge(p.edge).id.clone(), format!("{:e}", p.xi), format!("{v:e}"), format!("{tol:e}")]
                }))?;
            }
            let m = Manifest::new("kernel", args, Some((&graph, &g))).tol("eps", eps);
            emit(&output, m, json!({"kind": kind, "t": t, "x": point_json(&g, &x), "values": values, "truncation_bound": tol, "steps": k.steps}))?;
            Ok(0)
        }
        Command::Solve { graph, t, kind, init, potential, per_unit, eps, csv, output } => {
            let g = load_graph(&graph)?;
            let kind = SemigroupKind::parse(&kind)?;
            let v0 = parse_constant_potential(&potential)?;
            let f = parse_field(&g, &init)?;
            if !(per_unit > 0.0) {
                return invalid("--per-unit must be positive");
            }
            let u0 = EdgeFunction::from_fn(&g, per_unit, |e, x| f(e, x));
            let c = semigroup_apply(&g, kind, t, -v0, &u0, eps)?;
            let tol = c.truncation_bound + c.quadrature_tol;
            if let Some(path) = csv {
                let mut rows = Vec::new();
                for e in 0..g.edge_count() {
                    for (k, v) in c.values.samples(e).iter().enumerate() {
                        rows.push(vec![g.edge(e).id.clone(), format!("{:e}", c.values.node(e, k)), format!("{v:e}"), format!("{tol:e}")]);
                    }
                }
                write_csv(&path, &["edge", "xi", "value", "tolerance"], rows)?;
            }
            let m = Manifest::new("solve", args, Some((&graph, &g))).tol("eps", eps);
            emit(&output, m, json!({
                "kind": kind, "t": t, "potential": v0,
                "integral": {"value": c.values.integrate(&g), "tolerance": tol * g.total_measure()},
                "sup": {"value": c.values.sup_norm(), "tolerance": tol},
                "truncation_bound": c.truncation_bound,
                "quadrature_tol": c.quadrature_tol,
                "continuity_spread": c.continuity_spread,
                "steps": c.steps,
            }))?;
            Ok(0)
        }
        Command::Spectrum { graph, window, potential, output } => {
            let g = load_graph(&graph)?;
            let v = EdgePotential::constant(parse_constant_potential(&potential)?)?;
            let (a, b) = (window[0], window[1]);
            let r = eigenvalues_via_reduction(&g, &v, (a, b))?;
            let eig: Vec<Value> = r
                .eigenvalues
                .iter()
                .map(|e| json!({"lambda": e.lambda, "tolerance": EIGEN_TOL * e.lambda.abs().max(1.0), "multiplicity": e.multiplicity, "source_mu": e.source_mu, "kirchhoff_residual": e.kirchhoff_residual}))
                .collect();
            let dir: Vec<Value> = r.dirichlet.iter().map(|l| json!({"lambda": l, "tolerance": EIGEN_TOL * l.abs().max(1.0)})).collect();
            let m = Manifest::new("spectrum", args, Some((&graph, &g))).tol("eigenvalue_relative", EIGEN_TOL);
            emit(&output, m, json!({"window": [a, b], "eigenvalues": eig, "dirichlet": dir, "flagged": r.flagged}))?;
            Ok(0)
        }
        Command::Resolvent { graph, z, rhs, potential, per_unit, csv, output } => {
            let g = load_graph(&graph)?;
            let z = parse_z(&z)?;
            let v = EdgePotential::constant(parse_constant_potential(&potential)?)?;
            let f = parse_field(&g, &rhs)?;
            if !(per_unit > 0.0) {
                return invalid("--per-unit must be positive");
            }
            let rhs = EdgeFunction::<C>::from_fn(&g, per_unit, |e, x| C::new(f(e, x), 0.0));
            let s = krein_resolvent(&g, &v, z, &rhs)?;
            if let Some(path) = csv {
                let mut rows = Vec::new();
                for e in 0..g.edge_count() {
                    for (k, u) in s.u.samples(e).iter().enumerate() {
                        rows.push(vec![g.edge(e).id.clone(), format!("{:e}", s.u.node(e, k)), format!("{:e}", u.re), format!("{:e}", u.im), format!("{:e}", s.relative_residual)]);
                    }
                }
                write_csv(&path, &["edge", "xi", "re", "im", "tolerance"], rows)?;
            }
            let vv: Vec<Value> = s
                .vertex_values
                .iter()
                .enumerate()
                .map(|(i, u)| json!({"vertex": g.vertex_id(i), "re": u.re, "im": u.im, "tolerance": s.relative_residual}))
                .collect();
            let m = Manifest::new("resolvent", args, Some((&graph, &g)));
            emit(&output, m, json!({"z": [z.re, z.im], "vertex_values": vv, "residual": s.residual, "relative_residual": s.relative_residual, "condition": s.condition}))?;
            Ok(0)
        }
        Command::Simulate { graph, start, t, dt, n, seed, scale, potential, observable, trajectory, output } => {
            let g = load_graph(&graph)?;
            let x = g.parse_point(&start)?;
            let cfg = WalkConfig::new(t, dt, Scale::parse(&scale)?, seed, n)?;
            let v0 = parse_constant_potential(&potential)?;
            let f = parse_field(&g, &observable)?;
            let est = feynman_kac(&g, &x, |_, _| v0, |e, y| f(e, y), &cfg)?;
            if let Some(path) = trajectory {
                let tr = simulate_one(&g, &x, &cfg, 0, |_, _| v0);
                write_csv(&path, &["time", "edge", "xi"], tr.times.iter().zip(&tr.points).map(|(t, p)| {
                    vec![format!("{t:e}"), g.edge(p.edge).id.clone(), format!("{:e}", p.xi)]
                }))?;
            }
            let m = Manifest::new("simulate", args, Some((&graph, &g))).seed(seed).tol("dt", cfg.step());
            emit(&output, m, json!({"estimate": est.estimate, "se": est.se, "n": est.n, "config": cfg}))?;
            Ok(0)
        }
        Command::Pam { graph, law, tmax, tsteps, pmax, realizations, seed, csv, output } => {
            let g = load_graph(&graph)?;
            let law = PotentialLaw::parse(&law)?;
            if !(tmax > 0.0 && tmax.is_finite()) || tsteps == 0 {
                return invalid("need tmax > 0 and tsteps >= 1");
            }
            let dt = tmax / tsteps as f64;
            let times: Vec<f64> = (0..=tsteps).map(|k| k as f64 * dt).collect();
            let table = lyapunov_table(&g, &law, &times, pmax, realizations, seed)?;
            let report = intermittency_report(&table)?;
            if let Some(path) = csv {
                table.write_csv(std::fs::File::create(path)?)?;
            }
            let m = Manifest::new("pam", args, Some((&graph, &g))).seed(seed).tol("ci_level", 0.95);
            emit(&output, m, json!({"law": law, "realizations": realizations, "table": table, "report": report}))?;
            Ok(0)
        }
        Command::Verify { graph, seed, output } => {
            let g = load_graph(&graph)?;
            let rows = verify_graph(&g, seed)?;
            let all = rows.iter().all(|r| r.pass);
            eprintln!("{:<28} {:>14} {:>14}  result", "check", "value", "tolerance");
            for r in &rows {
                eprintln!("{:<28} {:>14.6e} {:>14.6e}  {}", r.check, r.value, r.tolerance, if r.pass { "PASS" } else { "FAIL" });
            }
            let mut m = Manifest::new("verify", args, Some((&graph, &g))).seed(seed);
            for r in &rows {
                m = m.tol(r.check, r.tolerance);
            }
            emit(&output, m, json!({"checks": rows, "pass": all}))?;
            Ok(if all { 0 } else { 3 })
        }
    }
}
