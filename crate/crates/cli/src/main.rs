//! `henonlab`: command-line driver for Green functions, tropical orbits,
//! degeneration experiments and normalization of Hénon families.
//!
//! Exit codes: 0 success, 1 other failure, 2 parse or usage error,
//! 3 insufficient precision or overflow, 4 unresolved tropical tie,
//! 5 certified-bound violation (reports are still written).

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use henonlab_core::homogenization::homogenize_datum;
use henonlab_core::hybrid::{
    default_observables, rng_from_env, run_green_uniformity, run_lyapunov_degeneration, run_measure_convergence,
    HybridBase, DEFAULT_LADDER,
};
use henonlab_core::json::{laurent_from_json, laurent_to_json};
use henonlab_core::measure::{DEFAULT_EPS_CELLS, DEFAULT_RESOLUTION};
use henonlab_core::na::{NAHenon, ValPoint};
use henonlab_core::normalize::{normalize_family, GeneralFamily};
use henonlab_core::{
    Branch, ComplexHenon, Error, ExtRational, FamilySpec, GreenBudget, GreenEstimate, GreenStatus, HybridNormParams,
    NAPoint, Prec, Region, C2,
};
use num_complex::Complex64;
use num_rational::BigRational;
use serde_json::{json, Value};

/// Sum residual above which the Lyapunov experiment reports a violation.
const LYAPUNOV_TOLERANCE: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(name = "henonlab", version, about = "Degenerating complex Hénon families: Green functions, measures and tropical limits")]
struct Cli {
    /// Cap on the worker pool.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certified Green function G = max(G⁺, G⁻) at one point of H_t.
    Green(GreenArgs),
    /// Valuation orbit and exact non-archimedean Green value.
    Tropical(TropicalArgs),
    /// Run a degeneration experiment and write its reports.
    Experiment(ExperimentArgs),
    /// Conjugate a general family to monic form.
    Normalize(NormalizeArgs),
}

#[derive(Args, Debug)]
struct GreenArgs {
    /// Family JSON file.
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// Parameter value t.
    #[arg(long, value_name = "RE,IM", allow_hyphen_values = true)]
    t: String,
    /// Point as four reals.
    #[arg(long, value_name = "XRE,XIM,YRE,YIM", allow_hyphen_values = true)]
    point: String,
    /// Filtration constant, overriding the spec.
    #[arg(long, value_name = "C")]
    c: Option<f64>,
    /// Maximum number of iterations per branch.
    #[arg(long, value_name = "N")]
    budget: Option<usize>,
    /// Target absolute error.
    #[arg(long, value_name = "E", default_value_t = 1e-12)]
    eps: f64,
}

#[derive(Args, Debug)]
struct TropicalArgs {
    /// Family JSON file.
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// Orders (u, v) as rationals or `inf`.
    #[arg(long, value_name = "U,V", allow_hyphen_values = true)]
    point: Option<String>,
    /// Exact x coordinate as a JSON term list; resolves ties.
    #[arg(long, value_name = "TERMS", requires = "y")]
    x: Option<String>,
    /// Exact y coordinate as a JSON term list.
    #[arg(long, value_name = "TERMS", requires = "x")]
    y: Option<String>,
    /// Base of the non-archimedean absolute value, overriding the spec.
    #[arg(long, value_name = "R")]
    r: Option<f64>,
    /// Filtration constant, overriding the spec.
    #[arg(long, value_name = "C")]
    c: Option<f64>,
    /// Maximum number of steps per branch.
    #[arg(long, value_name = "N", default_value_t = 32)]
    budget: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Experiment {
    Uniformity,
    Measure,
    Lyapunov,
    Homogenization,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(value_enum)]
    which: Experiment,
    /// Family JSON file.
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Hybrid base in (0, 1); the t-ladder is |t| = r^k, k = 1, 2, 4, 8, 16 (uniformity stops at 8).
    #[arg(long, value_name = "R")]
    r: Option<f64>,
    /// Filtration constant, overriding the spec.
    #[arg(long, value_name = "C")]
    c: Option<f64>,
    /// Uniformity: sample points per parameter. Lyapunov: orbit length.
    /// Homogenization: largest iterate n.
    #[arg(long, value_name = "N")]
    budget: Option<usize>,
    /// Measure: grid points per real axis.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_RESOLUTION)]
    resolution: usize,
    /// Measure: mollifier width in grid cells.
    #[arg(long, value_name = "E", default_value_t = DEFAULT_EPS_CELLS)]
    eps: f64,
}

#[derive(Args, Debug)]
struct NormalizeArgs {
    /// General family: `coeffs` a₀…a_d, `a`, `b` as term lists.
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    #[arg(long, value_name = "C")]
    c: Option<f64>,
    #[arg(long, value_name = "R")]
    r: Option<f64>,
    /// Series length when a₀ is not a monomial.
    #[arg(long, value_name = "N", default_value_t = 16)]
    budget: usize,
    /// Also write the normalized family spec to DIR/normalized.json.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    Io(String),
    /// Output was produced, then a tie or violation decides the exit code.
    Reported(u8),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) => 2,
        Error::InsufficientPrecision(_) | Error::Overflow { .. } => 3,
        Error::TropicalTie { .. } => 4,
        _ => 1,
    }
}

fn parse_err(msg: impl Into<String>) -> Failure {
    Failure::Lib(Error::Parse(msg.into()))
}

fn parse_reals(s: &str, n: usize, what: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| parse_err(format!("{what}: {p:?}: {e}"))))
        .collect::<Result<_, _>>()?;
    if parts.len() != n || parts.iter().any(|x| !x.is_finite()) {
        return Err(parse_err(format!("{what}: expected {n} finite comma-separated reals, got {s:?}")));
    }
    Ok(parts)
}

/// `RE,IM` or a bare real.
fn parse_t(s: &str) -> Result<Complex64, Failure> {
    if s.contains(',') {
        let v = parse_reals(s, 2, "--t")?;
        Ok(Complex64::new(v[0], v[1]))
    } else {
        Ok(Complex64::new(parse_reals(s, 1, "--t")?[0], 0.0))
    }
}

fn parse_order(s: &str) -> Result<ExtRational, Failure> {
    let s = s.trim();
    if s == "inf" {
        return Ok(ExtRational::Infinity);
    }
    s.parse::<BigRational>()
        .map(ExtRational::Finite)
        .map_err(|e| parse_err(format!("order {s:?}: {e}")))
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| parse_err(format!("{}: {e}", path.display())))
}

fn load_spec(path: &Path, c: Option<f64>, r: Option<f64>) -> Result<FamilySpec, Failure> {
    let mut spec = FamilySpec::from_json(&read_json(path)?)?;
    if let Some(c) = c {
        spec.family = spec.family.with_c(c).map_err(|e| parse_err(e.to_string()))?;
    }
    if let Some(r) = r {
        spec.r = HybridNormParams::new(r).map_err(|e| parse_err(e.to_string()))?;
    }
    Ok(spec)
}

fn c64_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn estimate_json(e: &GreenEstimate) -> Value {
    json!({
        "value": e.value,
        "err_bound": e.err_bound,
        "n_used": e.n_used,
        "status": e.status,
        "escape_time": e.escape_time,
    })
}

fn cmd_green(args: &GreenArgs) -> Result<Value, Failure> {
    let spec = load_spec(&args.spec, args.c, None)?;
    let t = parse_t(&args.t)?;
    let p = parse_reals(&args.point, 4, "--point")?;
    let z = C2::new(Complex64::new(p[0], p[1]), Complex64::new(p[2], p[3]));
    let h = ComplexHenon::from_family(&spec.family, t)?;
    if !(args.eps > 0.0) {
        return Err(parse_err("--eps must be positive"));
    }
    let max_iter = args.budget.unwrap_or_else(|| GreenBudget::default_for(h.degree(), t.norm()).max_iter);
    let g = h.green_certified_max(z, GreenBudget::new(args.eps, max_iter));
    let status = if g.plus.status == GreenStatus::EscapedPlus && g.plus.value >= g.minus.value {
        GreenStatus::EscapedPlus
    } else if g.minus.status == GreenStatus::EscapedMinus {
        GreenStatus::EscapedMinus
    } else if g.plus.status == GreenStatus::EscapedPlus {
        GreenStatus::EscapedPlus
    } else {
        GreenStatus::BoundedToBudget
    };
    Ok(json!({
        "t": c64_json(t),
        "point": [p[0], p[1], p[2], p[3]],
        "region": h.classify(z),
        "value": g.value(),
        "err_bound": g.err_bound(),
        "status": status,
        "plus": estimate_json(&g.plus),
        "minus": estimate_json(&g.minus),
    }))
}

fn target(branch: Branch) -> Region {
    match branch {
        Branch::Plus => Region::VPlus,
        Branch::Minus => Region::VMinus,
    }
}

/// Tropical orbit until `V^±` or the budget; a tie ends it with a diagnostic.
fn tropical_branch(h: &NAHenon, w: &ValPoint, budget: usize, branch: Branch) -> Result<(Value, bool), Failure> {
    let mut orbit = vec![w.clone()];
    let mut tie = Value::Null;
    while orbit.len() <= budget && h.classify(orbit.last().expect("nonempty")) != target(branch) {
        match h.tropical_step_branch(orbit.last().expect("nonempty"), branch) {
            Ok(next) => orbit.push(next),
            Err(Error::TropicalTie { terms, value }) => {
                tie = json!({ "step": orbit.len() - 1, "terms": terms, "value": value.to_json() });
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let green = if tie.is_null() { h.green_val(w, budget, branch)?.to_json() } else { Value::Null };
    let tied = !tie.is_null();
    Ok((
        json!({
            "orbit": orbit.iter().map(ValPoint::to_json).collect::<Vec<_>>(),
            "green": green,
            "tie": tie,
        }),
        tied,
    ))
}

/// Exact orbit orders; ties are resolved by the exact arithmetic.
fn exact_branch(h: &NAHenon, p: &NAPoint, budget: usize, branch: Branch) -> Result<Value, Failure> {
    let g = h.green_point(p, budget, branch)?;
    let steps = g.escape_time.unwrap_or(budget);
    let orbit = h.orbit_orders(p, steps, branch)?;
    Ok(json!({
        "orbit": orbit.iter().map(ValPoint::to_json).collect::<Vec<_>>(),
        "green": g.to_json(),
        "tie": Value::Null,
    }))
}

fn cmd_tropical(args: &TropicalArgs) -> Result<Value, Failure> {
    let spec = load_spec(&args.spec, args.c, args.r)?;
    let h = NAHenon::new(&spec.family, spec.r);
    let mut out = json!({
        "r": spec.r.r(),
        "radius_order": henonlab_core::json::rational_to_json(h.radius_order()),
    });
    let mut tied = false;
    match (&args.point, &args.x, &args.y) {
        (None, Some(x), Some(y)) => {
            let parse = |s: &str| -> Result<_, Failure> {
                let v: Value = serde_json::from_str(s).map_err(|e| parse_err(format!("term list {s:?}: {e}")))?;
                Ok(laurent_from_json(&v)?)
            };
            let p = NAPoint::exact(&parse(x)?, &parse(y)?, spec.r);
            let w = henonlab_core::na::na_val(&p)?;
            out["point"] = w.to_json();
            out["region"] = json!(h.classify(&w));
            out["plus"] = exact_branch(&h, &p, args.budget, Branch::Plus)?;
            out["minus"] = exact_branch(&h, &p, args.budget, Branch::Minus)?;
        }
        (Some(pt), None, None) => {
            let parts: Vec<&str> = pt.split(',').collect();
            if parts.len() != 2 {
                return Err(parse_err(format!("--point: expected U,V, got {pt:?}")));
            }
            let w = ValPoint::new(parse_order(parts[0])?, parse_order(parts[1])?);
            out["point"] = w.to_json();
            out["region"] = json!(h.classify(&w));
            for (key, branch) in [("plus", Branch::Plus), ("minus", Branch::Minus)] {
                let (v, t) = tropical_branch(&h, &w, args.budget, branch)?;
                out[key] = v;
                tied |= t;
            }
        }
        _ => return Err(parse_err("give either --point U,V or both --x and --y")),
    }
    if tied {
        emit(&out);
        return Err(Failure::Reported(4));
    }
    Ok(out)
}

fn write_file(dir: &Path, name: &str, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<String, Failure> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    let path = dir.join(name);
    fs::write(&path, buf).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(name.to_string())
}

fn write_json_file(dir: &Path, name: &str, v: &Value) -> Result<String, Failure> {
    write_file(dir, name, |b| {
        b.extend_from_slice(output::render(v).as_bytes());
        Ok(())
    })
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<(Value, bool), Failure> {
    let spec = load_spec(&args.spec, args.c, args.r)?;
    let r = spec.r.r();
    fs::create_dir_all(&args.out).map_err(|e| Failure::Io(format!("{}: {e}", args.out.display())))?;
    let dir = args.out.as_path();
    let ladder = HybridBase::ladder(r, &DEFAULT_LADDER)?;
    match args.which {
        Experiment::Uniformity => {
            let base = HybridBase::ladder(r, &DEFAULT_LADDER[..4])?;
            let samples = args.budget.unwrap_or(4000);
            let rep = run_green_uniformity(&spec.family, &base, 2..=8, samples, &mut rng_from_env(1))?;
            let files = vec![
                write_json_file(dir, "uniformity.json", &rep.to_json())?,
                write_file(dir, "uniformity.csv", |b| rep.write_csv(b))?,
                write_file(dir, "uniformity.dat", |b| rep.write_dat(b))?,
            ];
            let spread: Vec<Value> = rep.spread.iter().map(|(n, s)| json!([n, s])).collect();
            let ok = rep.violations == 0;
            Ok((json!({ "experiment": "uniformity", "violations": rep.violations, "spread": spread, "files": files }), ok))
        }
        Experiment::Measure => {
            let obs = default_observables();
            let rep = run_measure_convergence(&spec.family, &ladder, &obs, args.resolution, args.eps)?;
            let names: Vec<&str> = obs.iter().map(|o| o.name).collect();
            let files = vec![
                write_json_file(dir, "measure.json", &rep.to_json())?,
                write_file(dir, "measure.csv", |b| rep.write_csv(b, &names))?,
                write_file(dir, "measure.dat", |b| rep.write_dat(b))?,
            ];
            let summary: Vec<Value> = rep
                .observables
                .iter()
                .map(|o| json!({ "name": o.name, "stabilized": o.stabilized, "relative_error": o.final_relative_error }))
                .collect();
            Ok((
                json!({ "experiment": "measure", "tie_free": rep.tropical.tie_free, "observables": summary, "files": files }),
                true,
            ))
        }
        Experiment::Lyapunov => {
            let rep = run_lyapunov_degeneration(&spec.family, &ladder, args.budget.unwrap_or(10_000))?;
            let files = vec![
                write_json_file(dir, "lyapunov.json", &rep.to_json())?,
                write_file(dir, "lyapunov.csv", |b| rep.write_csv(b))?,
                write_file(dir, "lyapunov.dat", |b| rep.write_dat(b))?,
            ];
            let ok = rep.max_sum_residual <= LYAPUNOV_TOLERANCE;
            Ok((
                json!({
                    "experiment": "lyapunov",
                    "max_sum_residual": rep.max_sum_residual,
                    "final_slope_residual": rep.final_slope_residual,
                    "files": files,
                }),
                ok,
            ))
        }
        Experiment::Homogenization => {
            let n_max = args.budget.unwrap_or(3) as u32;
            let d = spec.family.degree() as u64;
            let mut files = Vec::new();
            let mut failures = Vec::new();
            for n in 1..=n_max {
                let budget = d.checked_pow(n).ok_or_else(|| Error::BudgetExceeded { degree: u64::MAX, budget: u64::MAX })?;
                let datum = homogenize_datum(&spec.family, n, budget)?;
                if let Err(e) = datum.check_structure() {
                    failures.push(json!({ "n": n, "error": e.to_string() }));
                }
                files.push(write_json_file(dir, &format!("homogenization_n{n}.json"), &datum.to_json())?);
            }
            let ok = failures.is_empty();
            Ok((json!({ "experiment": "homogenization", "failures": failures, "files": files }), ok))
        }
    }
}

fn prec_json(p: Prec) -> Value {
    match p {
        Prec::Exact => json!("exact"),
        Prec::Below(k) => json!({ "below": k }),
    }
}

fn cmd_normalize(args: &NormalizeArgs) -> Result<Value, Failure> {
    let v = read_json(&args.spec)?;
    let field = |k: &str| v.get(k).ok_or_else(|| parse_err(format!("missing field {k:?}")));
    let coeffs = field("coeffs")?
        .as_array()
        .ok_or_else(|| parse_err("\"coeffs\" must be an array"))?
        .iter()
        .map(laurent_from_json)
        .collect::<Result<Vec<_>, _>>()?;
    let g = GeneralFamily::new(coeffs, laurent_from_json(field("a")?)?, laurent_from_json(field("b")?)?)?;
    let c = args.c.or_else(|| v.get("c").and_then(Value::as_f64)).unwrap_or(henonlab_core::family::DEFAULT_C);
    let r = args.r.or_else(|| v.get("r").and_then(Value::as_f64)).unwrap_or(0.5);
    let r = HybridNormParams::new(r).map_err(|e| parse_err(e.to_string()))?;
    let n = normalize_family(&g, args.budget, c)?;
    let family = FamilySpec { family: n.family, r }.to_json();
    let mut files = Vec::new();
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        files.push(write_json_file(dir, "normalized.json", &family)?);
    }
    Ok(json!({
        "family": family,
        "substitution": n.substitution,
        "lambda": { "terms": laurent_to_json(&n.lambda.known_part()), "prec": prec_json(n.lambda.prec()) },
        "precision": prec_json(n.precision),
        "residual": n.residual,
        "files": files,
    }))
}

/// Prints to stdout; a closed pipe is not an error.
fn emit(v: &Value) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(output::render(v).as_bytes());
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Failure::Io(e.to_string()))?;
    }
    let (out, ok) = match &cli.command {
        Command::Green(a) => (cmd_green(a)?, true),
        Command::Tropical(a) => (cmd_tropical(a)?, true),
        Command::Experiment(a) => cmd_experiment(a)?,
        Command::Normalize(a) => (cmd_normalize(a)?, true),
    };
    emit(&out);
    Ok(if ok { 0 } else { 5 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Reported(code)) => ExitCode::from(code),
        Err(Failure::Lib(e)) => {
            eprintln!("henonlab: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Io(msg)) => {
            eprintln!("henonlab: {msg}");
            ExitCode::from(1)
        }
    }
}
