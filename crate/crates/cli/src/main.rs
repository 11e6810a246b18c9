use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lyapunov_verify::arrangement::{enumerate_regions, EnumerationConfig, RegionSet, DEFAULT_REGION_CAP};
use lyapunov_verify::combinatorics::{region_upper_bound, DEFAULT_PLANE_LIMIT};
use lyapunov_verify::dynamics::{builtin, DynamicsModel};
use lyapunov_verify::geometry::AxisBox;
use lyapunov_verify::gopt::Budget;
use lyapunov_verify::network::ShallowReluNet;
use lyapunov_verify::verifier::{
    verify_detailed, Counterexample, Verdict, VerificationReport, VerifyConfig, DEFAULT_HOLE_FRAC,
};
use serde_json::{json, Value};

/// Verify shallow ReLU Lyapunov candidates region by region.
#[derive(Parser)]
#[command(name = "lyapverify", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full check; exit 0 if verified, 1 if falsified, 2 on error.
    Verify(VerifyArgs),
    /// Dump every linear region inside the box as JSON lines.
    Regions(RegionsArgs),
    /// Print the characteristic polynomial and the Zaslavsky region bound.
    Bound(BoundArgs),
    /// Print V, the activation pattern, the gradient and Vdot at one point.
    CheckPoint(CheckPointArgs),
}

#[derive(Args)]
struct NetArg {
    /// Network JSON file, or `l1_p<k>` for the built-in k-dimensional L1 norm.
    #[arg(long)]
    net: String,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct DynamicsArg {
    /// Built-in system: neg_cubic, bilinear_osc or coupled_bilinear.
    #[arg(long)]
    builtin: Option<String>,
    /// Dynamics JSON file (`{"dim": p, "equations": [...]}`).
    #[arg(long)]
    dynamics: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct BoxArg {
    /// Box `lo,hi` applied to every dimension, e.g. `-10,10`.
    #[arg(long = "box", allow_hyphen_values = true, value_name = "LO,HI")]
    cube: Option<String>,
    /// Per-dimension box JSON file (`{"lo": [...], "hi": [...]}`).
    #[arg(long)]
    box_file: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    net: NetArg,
    #[command(flatten)]
    dynamics: DynamicsArg,
    #[command(flatten)]
    bx: BoxArg,
    /// Fraction of the box volume excluded around the origin.
    #[arg(long, default_value_t = DEFAULT_HOLE_FRAC)]
    hole_frac: f64,
    /// Sobol samples per global maximization (default 64 * 2^min(p, 4)).
    #[arg(long)]
    samples: Option<usize>,
    /// Iteration cap per local ascent.
    #[arg(long, default_value_t = Budget::default().max_iters)]
    iters: usize,
    /// Local ascents started per global maximization.
    #[arg(long, default_value_t = Budget::default().max_local_starts)]
    local_starts: usize,
    /// Eight times the samples plus an ascent from every polytope vertex.
    #[arg(long)]
    paranoid: bool,
    /// Report a decrease violation when the rotated Vdot is at least -MARGIN.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    margin: f64,
    /// Worker threads (default: available parallelism).
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    workers: Option<u16>,
    /// Abort when the box holds more regions than this.
    #[arg(long, default_value_t = DEFAULT_REGION_CAP)]
    region_cap: usize,
    /// Skip the Zaslavsky bound in the report.
    #[arg(long)]
    no_bound: bool,
    /// Hyperplane limit for the Zaslavsky bound.
    #[arg(long, default_value_t = DEFAULT_PLANE_LIMIT)]
    plane_limit: usize,
    /// Report path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the region dump with the counterexamples overlaid.
    #[arg(long)]
    dump_regions: Option<PathBuf>,
}

#[derive(Args)]
struct RegionsArgs {
    #[command(flatten)]
    net: NetArg,
    #[command(flatten)]
    bx: BoxArg,
    #[arg(long, default_value_t = DEFAULT_REGION_CAP)]
    region_cap: usize,
    /// Append the counterexamples of a report written by `verify`.
    #[arg(long, value_name = "REPORT")]
    overlay: Option<PathBuf>,
    /// Dump path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    net: NetArg,
    /// Maximum number of distinct hyperplanes (at most 64).
    #[arg(long, default_value_t = DEFAULT_PLANE_LIMIT)]
    limit: usize,
    /// Print a JSON object instead of the one-line summary.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CheckPointArgs {
    #[command(flatten)]
    net: NetArg,
    #[command(flatten)]
    dynamics: DynamicsArg,
    /// Comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true, value_name = "X1,X2,...")]
    point: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Verify(a) => cmd_verify(a),
        Command::Regions(a) => cmd_regions(a),
        Command::Bound(a) => cmd_bound(a),
        Command::CheckPoint(a) => cmd_check_point(a),
    }
}

fn cmd_verify(a: VerifyArgs) -> Result<ExitCode> {
    let net = load_net(&a.net.net)?;
    let model = load_dynamics(&a.dynamics, net.input_dim())?;
    let bx = load_box(&a.bx, net.input_dim())?;
    let config = VerifyConfig {
        hole_frac: a.hole_frac,
        budget: Budget {
            samples: a.samples,
            max_iters: a.iters,
            max_local_starts: a.local_starts,
            paranoid: a.paranoid,
            ..Budget::default()
        },
        margin: a.margin,
        workers: a.workers.map(usize::from),
        region_cap: a.region_cap,
        compute_bound: !a.no_bound,
        plane_limit: a.plane_limit,
    };
    let outcome = verify_detailed(&net, &model, &bx, &config)?;
    let report = &outcome.report;
    emit(a.out.as_deref(), &(report.to_json() + "\n"))?;
    if let Some(path) = &a.dump_regions {
        write_atomic(path, &region_dump(&outcome.regions, &report.counterexamples))?;
    }
    eprintln!(
        "{:?}: {} counterexamples, {} regions, {} pieces, {:.3}s",
        report.verdict,
        report.counterexamples.len(),
        report.region_count,
        report.piece_count,
        report.timings.total
    );
    Ok(match report.verdict {
        Verdict::Verified => ExitCode::SUCCESS,
        Verdict::Falsified => ExitCode::from(1),
    })
}

fn cmd_regions(a: RegionsArgs) -> Result<ExitCode> {
    let net = load_net(&a.net.net)?;
    let bx = load_box(&a.bx, net.input_dim())?;
    let overlay = match &a.overlay {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let report: VerificationReport =
                serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))?;
            report.counterexamples
        }
        None => Vec::new(),
    };
    let cfg = EnumerationConfig { region_cap: a.region_cap, ..EnumerationConfig::default() };
    let regions = enumerate_regions(&net, &bx, &cfg)?;
    emit(a.out.as_deref(), &region_dump(&regions, &overlay))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_bound(a: BoundArgs) -> Result<ExitCode> {
    let net = load_net(&a.net.net)?;
    let b = region_upper_bound(&net, a.limit)?;
    if a.json {
        let out = json!({
            "coefficients": b.polynomial.coeffs,
            "polynomial": b.polynomial.to_string(),
            "regions": b.regions,
            "hidden_units": net.hidden_dim(),
            "distinct_planes": b.plane_count,
            "flats": b.flat_count,
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("{}; regions ≤ {}", b.polynomial, b.regions);
        if b.plane_count < net.hidden_dim() {
            println!("note: {} hidden units share {} distinct hyperplanes", net.hidden_dim(), b.plane_count);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check_point(a: CheckPointArgs) -> Result<ExitCode> {
    let net = load_net(&a.net.net)?;
    let model = load_dynamics(&a.dynamics, net.input_dim())?;
    let x = parse_list(&a.point).context("invalid point")?;
    if x.len() != net.input_dim() {
        bail!("point has {} coordinates, the network expects {}", x.len(), net.input_dim());
    }
    let pattern = net.activation_pattern(&x)?;
    let f = model.eval_f(&x)?;
    let out = json!({
        "point": x,
        "v": net.eval_v(&x)?,
        "pattern": pattern,
        "gradient": net.region_gradient(&pattern)?,
        "f": f,
        "v_dot": net.eval_v_dot(&pattern, &f)?,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::SUCCESS)
}

fn load_net(spec: &str) -> Result<ShallowReluNet> {
    if let Some(p) = spec.strip_prefix("l1_p") {
        if let Ok(p) = p.parse::<usize>() {
            if p == 0 {
                bail!("l1_p0 has no inputs");
            }
            return Ok(ShallowReluNet::l1_norm(p));
        }
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading network {spec}"))?;
    ShallowReluNet::from_json(&text).with_context(|| format!("parsing network {spec}"))
}

fn load_dynamics(arg: &DynamicsArg, dim: usize) -> Result<DynamicsModel> {
    let model = match (&arg.builtin, &arg.dynamics) {
        (Some(name), _) => builtin(name, dim)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading dynamics {}", path.display()))?;
            DynamicsModel::from_json(&text).with_context(|| format!("parsing dynamics {}", path.display()))?
        }
        (None, None) => bail!("one of --builtin or --dynamics is required"),
    };
    if model.dim() != dim {
        bail!("dynamics have dimension {}, the network expects {dim}", model.dim());
    }
    Ok(model)
}

fn load_box(arg: &BoxArg, dim: usize) -> Result<AxisBox> {
    let bx = match (&arg.cube, &arg.box_file) {
        (Some(pair), _) => {
            let v = parse_list(pair).context("invalid box")?;
            let [lo, hi] = v[..] else { bail!("invalid box: expected LO,HI, got `{pair}`") };
            AxisBox::cube(lo, hi, dim)?
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading box {}", path.display()))?;
            let raw: AxisBox =
                serde_json::from_str(&text).with_context(|| format!("invalid box file {}", path.display()))?;
            AxisBox::new(raw.lo, raw.hi)?
        }
        (None, None) => bail!("one of --box or --box-file is required"),
    };
    if bx.dim() != dim {
        bail!("invalid box: {} dimensions, the network expects {dim}", bx.dim());
    }
    Ok(bx)
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse::<f64>().with_context(|| format!("`{t}` is not a number"))).collect()
}

/// One JSON object per line: every region, then every counterexample.
fn region_dump(regions: &RegionSet, overlay: &[Counterexample]) -> String {
    let mut out = String::new();
    for r in &regions.regions {
        let line = json!({
            "type": "region",
            "id": r.id,
            "pattern": r.pattern,
            "vertices": r.ordered_polygon(),
            "interior_point": r.interior_point,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    for c in overlay {
        let mut line = serde_json::to_value(c).expect("counterexample serializes");
        if let Value::Object(map) = &mut line {
            map.insert("type".into(), "counterexample".into());
        }
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
