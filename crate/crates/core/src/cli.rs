//! Command-line front end.
//!
//! Exit codes: 0 success, 1 other failure, 2 bad flags or parameters,
//! 3 size cap exceeded, 4 invalid input file, 5 non-finite solver iterate.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::bounds::{bennett_bound, theorem1_bound, theorem2_vertex_form};
use crate::error::Error;
use crate::experiment::{
    run_experiment, seeded_instance, write_csv, write_summary, ExperimentConfig, OutputFormat,
};
use crate::generators::{
    derive_seed, gen_chain, gen_random_tree, gen_regular_tree_capped, LevelProfile, TreeModel,
    WeightLaw, DEFAULT_VERTEX_CAP,
};
use crate::io::Instance;
use crate::operator::{mixed_operator_norm, operator_norm, SolverOptions};
use crate::partition::{
    build_partition, partition_stats, reduce, uw_block_bound_check, verify_partition,
    VerifyOptions, DEFAULT_SIGMA,
};
use crate::tree::{Exponents, RootedTree};

#[derive(Debug, Parser)]
#[command(
    name = "hardy-tree",
    version,
    about = "Weighted summation operators on rooted trees"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Source exponent, 1 < p < inf.
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Target exponent, 1 < q < inf.
    #[arg(long, global = true)]
    q: Option<f64>,
    /// Partition parameter in (0, 1) [default: 0.1].
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Master seed [default: 0].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Random restarts of the norm solver [default: 32].
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Relative stopping tolerance of the norm solver [default: 1e-10].
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Iteration cap per start [default: 10000].
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Input file (instance, or experiment config).
    #[arg(short, long, global = true)]
    input: Option<PathBuf>,
    /// Output file [default: standard output].
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    format: Option<OutputFormat>,
    /// Also write a Graphviz rendering to this path.
    #[arg(long, global = true)]
    dot: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a tree with weights.
    Gen(GenArgs),
    /// Estimate the operator norm.
    Norm(NormArgs),
    /// Compute the closed-form bound quantities.
    Bound,
    /// Build and verify the sigma-partition; `-o` receives the reduced tree.
    Partition,
    /// Run a ratio study described by a JSON config (`-i`).
    Experiment,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("shape").required(true).args(["chain", "regular", "random"])))]
struct GenArgs {
    /// Path with N vertices.
    #[arg(long, value_name = "N")]
    chain: Option<usize>,
    /// Regular tree with the given per-level branching, e.g. 2,2,2.
    #[arg(long, value_name = "B0,B1,..", value_delimiter = ',')]
    regular: Option<Vec<usize>>,
    /// Random tree with N vertices.
    #[arg(long, value_name = "N")]
    random: Option<usize>,
    /// Random tree model: uniform-attachment | bounded-branching:K.
    #[arg(long, default_value = "uniform-attachment")]
    model: String,
    /// Weight law for u: constant:C | geometric:RHO | loguniform:LO:HI | levels:A,B,..
    #[arg(long, default_value = "constant:1")]
    u: String,
    /// Weight law for w (same syntax as --u).
    #[arg(long, default_value = "constant:1")]
    w: String,
    /// Largest number of vertices allowed.
    #[arg(long, default_value_t = DEFAULT_VERTEX_CAP)]
    cap: usize,
}

#[derive(Debug, Args)]
struct NormArgs {
    /// Estimate the l_q(l_p) -> l_q norm instead of l_p -> l_q.
    #[arg(long)]
    mixed: bool,
    /// Skip the path-certificate starts.
    #[arg(long)]
    no_certificates: bool,
}

/// Failure carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::SizeCapExceeded { .. } => 3,
            Error::Format(_) => 4,
            Error::NonFiniteIterate => 5,
            Error::InvalidExponent(_)
            | Error::InvalidSigma(_)
            | Error::InvalidLaw(_)
            | Error::InfeasibleModel(_)
            | Error::InvalidProfile(_)
            | Error::InvalidSize(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let g = &cli.global;
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(g, a, out),
        Command::Norm(a) => cmd_norm(g, a, out),
        Command::Bound => cmd_bound(g, out),
        Command::Partition => cmd_partition(g, out),
        Command::Experiment => cmd_experiment(g, out, err),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn exponents(g: &Global, default_p: Option<f64>) -> std::result::Result<Exponents, Failure> {
    let q = g.q.ok_or_else(|| usage("--q is required"))?;
    let p = g.p.or(default_p).ok_or_else(|| usage("--p is required"))?;
    Ok(Exponents::new(p, q)?)
}

fn solver(g: &Global) -> SolverOptions {
    let d = SolverOptions::default();
    SolverOptions {
        restarts: g.restarts.unwrap_or(d.restarts),
        max_iter: g.max_iter.unwrap_or(d.max_iter),
        tol: g.tol.unwrap_or(d.tol),
        seed: g.seed.unwrap_or(0),
        ..d
    }
}

fn load(g: &Global) -> std::result::Result<Instance, Failure> {
    let path = g
        .input
        .as_ref()
        .ok_or_else(|| usage("-i/--input is required"))?;
    Ok(Instance::load(path)?)
}

fn write_to(path: Option<&Path>, text: &str, out: &mut dyn Write) -> std::io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => out.write_all(text.as_bytes()),
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Array(_) | Value::Object(_) => None,
        Value::String(s) => Some(s.clone()),
        other => Some(other.to_string()),
    }
}

/// Renders a flat JSON report in the requested format. CSV keeps the scalar
/// fields only.
fn render(report: &Value, format: OutputFormat) -> String {
    let fields = report.as_object().expect("reports are objects");
    match format {
        OutputFormat::Json => {
            serde_json::to_string_pretty(report).expect("report serializes") + "\n"
        }
        OutputFormat::Human => fields
            .iter()
            .map(|(k, v)| format!("{k}: {}\n", scalar(v).unwrap_or_else(|| v.to_string())))
            .collect(),
        OutputFormat::Csv => {
            let (keys, vals): (Vec<_>, Vec<_>) = fields
                .iter()
                .filter_map(|(k, v)| scalar(v).map(|s| (k.clone(), s)))
                .unzip();
            format!("{}\n{}\n", keys.join(","), vals.join(","))
        }
    }
}

fn emit(g: &Global, report: &Value, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let text = render(report, g.format.unwrap_or(OutputFormat::Json));
    Ok(write_to(g.output.as_deref(), &text, out)?)
}

fn cmd_gen(g: &Global, a: &GenArgs, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let seed = g.seed.unwrap_or(0);
    let cap_check = |n: usize| {
        if n > a.cap {
            Err(Error::SizeCapExceeded {
                requested: n as u128,
                cap: a.cap,
            })
        } else {
            Ok(())
        }
    };
    let tree: RootedTree = if let Some(n) = a.chain {
        cap_check(n)?;
        gen_chain(n)?
    } else if let Some(b) = &a.regular {
        gen_regular_tree_capped(&LevelProfile::new(b.clone())?, a.cap)?
    } else {
        let n = a.random.expect("clap enforces one shape");
        cap_check(n)?;
        let model: TreeModel = a.model.parse()?;
        gen_random_tree(n, derive_seed(seed, 0), model)?
    };
    let u: WeightLaw = a.u.parse()?;
    let w: WeightLaw = a.w.parse()?;
    let inst = seeded_instance(tree, &u, &w, seed)?;
    if let Some(dot) = &g.dot {
        fs::write(dot, inst.to_dot())?;
    }
    Ok(write_to(g.output.as_deref(), &inst.to_json(), out)?)
}

fn cmd_norm(g: &Global, a: &NormArgs, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let inst = load(g)?;
    let e = exponents(g, None)?;
    let mut opts = solver(g);
    opts.include_certificate_starts = !a.no_certificates;
    let (t, wt) = (&inst.tree, &inst.weights);
    let est = if a.mixed {
        mixed_operator_norm(t, wt, &e, &opts)?
    } else {
        operator_norm(t, wt, &e, &opts)?
    };
    let report = json!({
        "kind": if a.mixed { "mixed" } else { "lp" },
        "n": t.len(),
        "p": e.p,
        "q": e.q,
        "value": est.value,
        "converged": est.converged,
        "iterations": est.iterations,
        "restarts_used": est.restarts_used,
        "start": est.start_label.to_string(),
        "maximizer": est.maximizer,
    });
    emit(g, &report, out)
}

/// Vertices of a path tree in root-to-leaf order, or `None` for branching trees.
fn chain_order(t: &RootedTree) -> Option<Vec<usize>> {
    let mut order = vec![t.root()];
    loop {
        match t.children(*order.last().unwrap()) {
            [] => return Some(order),
            [c] => order.push(*c),
            _ => return None,
        }
    }
}

fn cmd_bound(g: &Global, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let inst = load(g)?;
    let e = exponents(g, None)?;
    let (t, wt) = (&inst.tree, &inst.weights);
    let m = theorem1_bound(t, wt, &e)?;
    let vertex = theorem2_vertex_form(t, wt, &e)?;
    let mut report = json!({
        "n": t.len(),
        "p": e.p,
        "q": e.q,
        "M": m.value,
        "argmax": m.argmax,
        "in_regime": m.in_regime,
        "theorem2_vertex": vertex.value,
        "theorem2_vertex_argmax": vertex.argmax,
        "terms": m.terms,
    });
    if let (Some(order), true) = (chain_order(t), e.p <= e.q) {
        let pick = |x: &[f64]| order.iter().map(|&v| x[v]).collect::<Vec<_>>();
        let b = bennett_bound(&pick(&wt.u), &pick(&wt.w), &e)?;
        report["bennett"] = json!(b.value);
        report["bennett_argmax"] = json!(order[b.argmax]);
    }
    emit(g, &report, out)
}

fn cmd_partition(g: &Global, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let inst = load(g)?;
    // Without --p the reduced weights and the domination check use p = q.
    let e = exponents(g, g.q)?;
    let sigma = g.sigma.unwrap_or(DEFAULT_SIGMA);
    let (t, wt) = (&inst.tree, &inst.weights);
    let part = reduce(t, wt, &e, build_partition(t, &wt.w, e.q, sigma)?)?;
    let stats = partition_stats(t, &wt.w, &part)?;
    let vopts = VerifyOptions {
        solver: solver(g),
        ..VerifyOptions::default()
    };
    let checks = verify_partition(t, wt, &e, &part, &vopts)?;
    let uw = uw_block_bound_check(t, wt, &e, sigma)?;
    let reduced = part
        .reduced
        .as_ref()
        .expect("reduce fills the reduced tree");
    let d = Instance::new(reduced.tree.clone(), reduced.weights())?;
    if let Some(path) = &g.output {
        d.save(path)?;
    }
    if let Some(dot) = &g.dot {
        fs::write(dot, d.to_dot())?;
    }
    let report = json!({
        "n": t.len(),
        "p": e.p,
        "q": e.q,
        "sigma": sigma,
        "block_count": part.block_count(),
        "degenerate_blocks": part.degenerate_blocks,
        "max_vmax_card": stats.max_vmax_card,
        "min_succession_ratio": stats.min_succession_ratio,
        "max_succession_ratio": stats.max_succession_ratio,
        "all_passed": checks.all_passed() && uw.all_passed(),
        "blocks": part.blocks,
        "membership": part.membership,
        "u_hat": reduced.u_hat,
        "w_hat": reduced.w_hat,
        "checks": checks.checks,
        "block_bound_checks": uw.checks,
    });
    let text = render(&report, g.format.unwrap_or(OutputFormat::Json));
    Ok(out.write_all(text.as_bytes())?)
}

fn cmd_experiment(
    g: &Global,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    let path = g
        .input
        .as_ref()
        .ok_or_else(|| usage("-i/--input (experiment config) is required"))?;
    let text =
        fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(s) = g.seed {
        config.seed = s;
    }
    if let Some(r) = g.restarts {
        config.solver.restarts = r;
    }
    if let Some(t) = g.tol {
        config.solver.tol = t;
    }
    if let Some(m) = g.max_iter {
        config.solver.max_iter = m;
    }
    if let Some(s) = g.sigma {
        config.sigmas = vec![s];
    }
    let result = run_experiment(&config)?;
    let format = g.format.or(config.format).unwrap_or(OutputFormat::Csv);
    let mut buf = Vec::new();
    match format {
        OutputFormat::Csv => {
            write_csv(&result.records, &mut buf)?;
            write_summary(&result.summary, &mut *err)?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut buf, &result).map_err(Error::from)?;
            buf.push(b'\n');
        }
        OutputFormat::Human => write_summary(&result.summary, &mut buf)?,
    }
    let target = g.output.as_deref().or(config.output.as_deref());
    Ok(write_to(
        target,
        &String::from_utf8(buf).expect("utf-8 output"),
        out,
    )?)
}
