use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gateway_tomo::estimation::{estimate_spectrum_fft, extrapolate_t0, Window};
use gateway_tomo::graph::{
    classify_topology, compute_access_plan, compute_aggressive_plan, infection_closure, is_estimable,
    minimum_infecting_sets, AccessPlan, TopologyClass,
};
use gateway_tomo::measurement::{
    measure_decaying, measure_exact, measure_shots, signal_f11, DecayModel, DecaySeries, SpectralMeasurement,
    TimeSignal,
};
use gateway_tomo::pipeline::{default_reference, roundtrip, MeasurementMode, RoundtripOptions};
use gateway_tomo::reconstruction::{reconstruct, ReconstructOptions};
use gateway_tomo::spectral::{assemble_single_excitation, eigendecompose, gauge_fix, EigenSystem, HamiltonianParams};
use gateway_tomo::{Error, NetworkGraph, NodeId, Tolerances};
use log::{info, warn};
use serde_json::{json, Value};

/// Minimum infecting sets are listed for graphs up to this size.
const SMALL_GRAPH: usize = 12;

/// A comma-separated list parsed as one argument (clap would otherwise read
/// a bare `Vec` field as repeated values).
type List = Vec<f64>;

#[derive(Parser)]
#[command(name = "gateway-tomo", version, about = "Hamiltonian tomography of pseudo-spin networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write the JSON report to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Topology class, estimability and infection data for a graph.
    Classify {
        #[arg(long)]
        graph: PathBuf,
        /// Seed set whose infection closure should be reported, e.g. "1,5".
        #[arg(long, value_parser = parse_nodes)]
        infect: Option<BTreeSet<NodeId>>,
    },
    /// Access plan for a graph.
    Plan {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Simulate measurements on the access set of a planted Hamiltonian.
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Eigenvalues and weights from the Fourier transform of a return amplitude.
    Spectrum {
        /// Recorded signal (JSON with times, re, im).
        #[arg(long, conflicts_with_all = ["graph", "params"])]
        signal: Option<PathBuf>,
        #[arg(long, requires = "params")]
        graph: Option<PathBuf>,
        #[arg(long, requires = "graph")]
        params: Option<PathBuf>,
        /// Site whose return amplitude is simulated.
        #[arg(long)]
        reference: Option<NodeId>,
        /// Record length when simulating.
        #[arg(long = "T", value_parser = parse_positive)]
        total_time: Option<f64>,
        /// Sampling step when simulating.
        #[arg(long, value_parser = parse_positive)]
        dt: Option<f64>,
        /// Number of peaks to report; defaults to the number of sites.
        #[arg(long)]
        peaks: Option<usize>,
        #[arg(long, value_enum, default_value_t = WindowArg::Rect)]
        window: WindowArg,
    },
    /// Extrapolate a decaying amplitude series back to t = 0.
    Extrapolate {
        #[arg(long)]
        measurement: PathBuf,
    },
    /// Reconstruct fields and couplings from a spectral measurement.
    Reconstruct {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        measurement: PathBuf,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Simulate, reconstruct and compare against the planted parameters.
    Roundtrip {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        sampling: SamplingArgs,
        /// Largest acceptable relative parameter error.
        #[arg(long, default_value_t = 1e-8, value_parser = parse_positive)]
        tol: f64,
    },
}

#[derive(Args)]
struct PlanArgs {
    /// Gauge reference site; defaults to the smallest leaf.
    #[arg(long)]
    reference: Option<NodeId>,
    /// Experimental plan that accesses fewer leaves.
    #[arg(long = "aggressive-plan")]
    aggressive: bool,
}

#[derive(Args)]
struct SamplingArgs {
    /// Projective shots per accessed site, e.g. 1e6.
    #[arg(long, value_parser = parse_count, conflicts_with = "times")]
    shots: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample times for decaying amplitudes, e.g. "0,10,20".
    #[arg(long, value_parser = parse_list, requires = "gamma")]
    times: Option<List>,
    /// Decay rates, one per eigenstate or a single shared value.
    #[arg(long, value_parser = parse_list, requires = "times")]
    gamma: Option<List>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Rect,
    Hann,
}

impl From<WindowArg> for Window {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::Rect => Window::Rect,
            WindowArg::Hann => Window::Hann,
        }
    }
}

fn parse_list(s: &str) -> Result<List, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

fn parse_nodes(s: &str) -> Result<BTreeSet<NodeId>, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<NodeId>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(_) => Err(format!("`{s}` must be positive")),
        Err(e) => Err(e.to_string()),
    }
}

/// Accepts `1000000` as well as `1e6`.
fn parse_count(s: &str) -> Result<u64, String> {
    let x = parse_positive(s)?;
    if x.fract() != 0.0 || x > u64::MAX as f64 {
        return Err(format!("`{s}` is not a whole number"));
    }
    Ok(x as u64)
}

/// A failed command: exit code, message and machine-readable flags.
struct Failure {
    code: u8,
    message: String,
    flags: Vec<String>,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
            flags: vec!["InputError".into()],
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_input() { 2 } else { 1 },
            message: e.to_string(),
            flags: vec![e.flag().to_string()],
        }
    }
}

struct Outcome {
    summary: String,
    report: Value,
    code: u8,
}

impl Outcome {
    fn ok(summary: String, report: Value) -> Self {
        Outcome { summary, report, code: 0 }
    }
}

type CmdResult = Result<Outcome, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load<T>(path: &Path, parse: impl FnOnce(&str) -> gateway_tomo::Result<T>) -> Result<T, Failure> {
    parse(&read(path)?).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn load_model(graph: &Path, params: &Path) -> Result<(NetworkGraph, HamiltonianParams), Failure> {
    let g = load(graph, NetworkGraph::from_json)?;
    let p = load(params, HamiltonianParams::from_json)?;
    p.validate(&g)?;
    Ok((g, p))
}

fn fmt_set(s: &BTreeSet<NodeId>) -> String {
    let items: Vec<String> = s.iter().map(|n| n.to_string()).collect();
    format!("{{{}}}", items.join(","))
}

fn make_plan(g: &NetworkGraph, args: &PlanArgs) -> gateway_tomo::Result<AccessPlan> {
    let reference = args.reference.or_else(|| Some(default_reference(g)));
    if args.aggressive {
        warn!("aggressive plan is experimental and goes beyond the published access rule");
        compute_aggressive_plan(g, reference)
    } else {
        compute_access_plan(g, reference)
    }
}

fn gauged_eigensystem(g: &NetworkGraph, p: &HamiltonianParams, reference: NodeId) -> gateway_tomo::Result<EigenSystem> {
    let eig = eigendecompose(&assemble_single_excitation(g, p)?)?;
    gauge_fix(&eig, reference, &Tolerances::default())
}

fn decay_rates(gamma: &[f64], n: usize) -> Result<Vec<f64>, Failure> {
    match gamma.len() {
        1 => Ok(vec![gamma[0]; n]),
        len if len == n => Ok(gamma.to_vec()),
        len => Err(Failure::input(format!("--gamma has {len} values, expected 1 or {n}"))),
    }
}

fn measurement_mode(s: &SamplingArgs, n: usize) -> Result<MeasurementMode, Failure> {
    Ok(match (&s.times, &s.gamma, s.shots) {
        (Some(times), Some(gamma), _) => MeasurementMode::Decaying {
            gamma: decay_rates(gamma, n)?,
            times: times.clone(),
        },
        (_, _, Some(count)) => MeasurementMode::Shots { count, seed: s.seed },
        _ => MeasurementMode::Exact,
    })
}

fn cmd_classify(graph: &Path, infect: Option<&BTreeSet<NodeId>>) -> CmdResult {
    let g = load(graph, NetworkGraph::from_json)?;
    let class = classify_topology(&g);
    let verdict = is_estimable(&g);
    let mut report = json!({ "topology": class, "estimability": verdict });
    let mut summary = String::new();

    if verdict.estimable {
        let plan = compute_access_plan(&g, None)?;
        let _ = write!(summary, "{}, estimable, access set {}", class.name(), fmt_set(&plan.access_set));
        if let TopologyClass::Unicyclic { cycle } = &class {
            let _ = write!(summary, " (cycle {cycle:?})");
        }
        report["access_set"] = json!(plan.access_set);
    } else {
        let _ = write!(summary, "{}, not estimable: {}", class.name(), verdict.reason);
    }
    summary.push('\n');

    if let Some(seed) = infect {
        let closure = infection_closure(&g, seed)?;
        let full = closure.len() == g.node_count();
        let _ = writeln!(
            summary,
            "infection of {} reaches {} ({})",
            fmt_set(seed),
            fmt_set(&closure),
            if full { "infecting" } else { "not infecting" }
        );
        report["infection"] = json!({ "seed": seed, "closure": closure, "infecting": full });
    }
    if g.node_count() <= SMALL_GRAPH {
        let sets = minimum_infecting_sets(&g, SMALL_GRAPH)?;
        let listed: Vec<String> = sets.iter().map(fmt_set).collect();
        let _ = writeln!(summary, "minimum infecting sets: {}", listed.join(" "));
        report["minimum_infecting_sets"] = json!(sets);
    }
    Ok(Outcome {
        summary,
        report,
        code: if verdict.estimable { 0 } else { 1 },
    })
}

fn cmd_plan(graph: &Path, args: &PlanArgs) -> CmdResult {
    let g = load(graph, NetworkGraph::from_json)?;
    let plan = make_plan(&g, args)?;
    let mut summary = format!(
        "reference {}, access set {}\nreference path {:?}\n",
        plan.reference,
        fmt_set(&plan.access_set),
        plan.reference_path
    );
    for peel in &plan.peel_schedule {
        let _ = writeln!(summary, "peel from {} along {:?} to {}", peel.leaf, peel.path, peel.terminal);
    }
    for seg in plan.link_schedule.iter().chain(&plan.forward_schedule) {
        let _ = writeln!(summary, "continue from {} along {:?}", seg.junction, seg.path);
    }
    if let Some(c) = &plan.cycle_plan {
        let _ = writeln!(summary, "loop {:?}, measured {}", c.cycle, fmt_set(&c.measured));
    }
    Ok(Outcome::ok(summary, json!(plan)))
}

fn cmd_simulate(graph: &Path, params: &Path, args: &PlanArgs, s: &SamplingArgs) -> CmdResult {
    let (g, p) = load_model(graph, params)?;
    let plan = make_plan(&g, args)?;
    let eig = gauged_eigensystem(&g, &p, plan.reference)?;
    let access = &plan.access_set;
    let (report, what) = match measurement_mode(s, g.node_count())? {
        MeasurementMode::Exact => (measurement_value(&measure_exact(&eig, access)?), "exact moduli".to_string()),
        MeasurementMode::Shots { count, seed } => (
            measurement_value(&measure_shots(&eig, access, count, seed)?),
            format!("{count} shots per site, seed {seed}"),
        ),
        MeasurementMode::Decaying { gamma, times } => {
            let series = measure_decaying(&eig, access, &DecayModel::new(gamma)?, &times)?;
            (
                serde_json::from_str(&series.to_json()).expect("valid JSON"),
                format!("decaying amplitudes at {} times", times.len()),
            )
        }
    };
    let summary = format!(
        "simulated {what} on {} (reference {})\n",
        fmt_set(access),
        plan.reference
    );
    Ok(Outcome::ok(summary, report))
}

fn measurement_value(m: &SpectralMeasurement) -> Value {
    serde_json::from_str(&m.to_json()).expect("valid JSON")
}

#[allow(clippy::too_many_arguments)]
fn cmd_spectrum(
    signal: Option<&Path>,
    model: Option<(&Path, &Path)>,
    reference: Option<NodeId>,
    total_time: Option<f64>,
    dt: Option<f64>,
    peaks: Option<usize>,
    window: Window,
) -> CmdResult {
    let mut warnings = Vec::new();
    let (sig, exact) = match (signal, model) {
        (Some(path), _) => (load(path, TimeSignal::from_json)?, None),
        (None, Some((graph, params))) => {
            let (g, p) = load_model(graph, params)?;
            let (Some(t), Some(dt)) = (total_time, dt) else {
                return Err(Failure::input("simulating a signal needs --T and --dt"));
            };
            let reference = reference.unwrap_or_else(|| default_reference(&g));
            let eig = eigendecompose(&assemble_single_excitation(&g, &p)?)?;
            let emax = eig.eigenvalues().iter().fold(0.0f64, |m, e| m.max(e.abs()));
            if dt >= PI / emax {
                let msg = format!("Aliasing: dt = {dt} is not below pi / max|E| = {:.6}", PI / emax);
                warn!("{msg}");
                warnings.push(msg);
            }
            let count = (t / dt).round() as usize;
            let sig = signal_f11(&eig, reference, &TimeSignal::uniform_times(dt, count))?;
            let weights: Vec<f64> = eig.components(reference)?.iter().map(|x| x * x).collect();
            (sig, Some((eig.eigenvalues().to_vec(), weights)))
        }
        (None, None) => return Err(Failure::input("give either --signal or --graph with --params")),
    };
    let n_peaks = match (peaks, &exact) {
        (Some(k), _) => k,
        (None, Some((e, _))) => e.len(),
        (None, None) => return Err(Failure::input("--peaks is required with --signal")),
    };
    let est = estimate_spectrum_fft(&sig, n_peaks, window)?;
    let step = gateway_tomo::estimation::uniform_step(&sig.times)?;
    if est.near_band_edge(step) {
        let msg = "Aliasing: a peak sits at the edge of the sampled band".to_string();
        warn!("{msg}");
        warnings.push(msg);
    }

    let mut summary = format!("resolution 2pi/T = {:.6}\n", est.resolution);
    let mut report = json!({ "peaks": est.peaks, "resolution": est.resolution, "warnings": warnings });
    match &exact {
        Some((energies, weights)) => {
            let _ = writeln!(summary, "{:>12} {:>12} {:>10} {:>10}", "E est", "E exact", "w est", "w exact");
            let rows: Vec<Value> = est
                .peaks
                .iter()
                .zip(energies.iter().zip(weights))
                .map(|(pk, (e, w))| {
                    let _ = writeln!(summary, "{:>12.6} {:>12.6} {:>10.5} {:>10.5}", pk.energy, e, pk.weight, w);
                    json!({ "E": pk.energy, "E_exact": e, "w": pk.weight, "w_exact": w })
                })
                .collect();
            report["comparison"] = json!(rows);
        }
        None => {
            for pk in &est.peaks {
                let _ = writeln!(summary, "E = {:>12.6}  w = {:.5}", pk.energy, pk.weight);
            }
        }
    }
    for w in &warnings {
        let _ = writeln!(summary, "warning: {w}");
    }
    Ok(Outcome::ok(summary, report))
}

fn cmd_extrapolate(path: &Path) -> CmdResult {
    let series = load(path, DecaySeries::from_json)?;
    let fit = extrapolate_t0(&series)?;
    for w in &fit.warnings {
        warn!("{w}");
    }
    let mut summary = format!(
        "extrapolated {} sites from {} times; largest log-residual {:.3e}\n",
        fit.moduli.len(),
        fit.times.len(),
        fit.max_residual()
    );
    let rates: Vec<String> = fit.gamma.iter().map(|g| format!("{g:.4e}")).collect();
    let _ = writeln!(summary, "decay rates: {}", rates.join(" "));
    let report = json!({
        "fit": fit,
        "measurement": measurement_value(&fit.to_measurement()),
    });
    Ok(Outcome::ok(summary, report))
}

fn result_summary(params: &HamiltonianParams, flags: &[impl std::fmt::Display]) -> String {
    let mut s = String::new();
    for (n, b) in &params.fields {
        let _ = writeln!(s, "b{n:<6} {b:>14.9}");
    }
    for (e, c) in &params.couplings {
        let _ = writeln!(s, "c{:<6} {c:>14.9}", e.to_string());
    }
    let names: Vec<String> = flags.iter().map(|f| f.to_string()).collect();
    let _ = writeln!(s, "flags: {}", if names.is_empty() { "none".into() } else { names.join(", ") });
    s
}

fn cmd_reconstruct(graph: &Path, measurement: &Path, args: &PlanArgs) -> CmdResult {
    let g = load(graph, NetworkGraph::from_json)?;
    let meas = load(measurement, SpectralMeasurement::from_json)?;
    let plan = make_plan(&g, args)?;
    let result = reconstruct(&g, &plan, &meas, &ReconstructOptions::default())?;
    info!("largest residual {:.3e}", result.max_residual());
    Ok(Outcome::ok(result_summary(&result.params, &result.flags), result.to_json_value()))
}

fn cmd_roundtrip(graph: &Path, params: &Path, args: &PlanArgs, s: &SamplingArgs, tol: f64) -> CmdResult {
    let (g, p) = load_model(graph, params)?;
    if args.aggressive {
        warn!("aggressive plan is experimental and goes beyond the published access rule");
    }
    let opts = RoundtripOptions {
        reference: args.reference,
        mode: measurement_mode(s, g.node_count())?,
        aggressive: args.aggressive,
        reconstruct: ReconstructOptions::default(),
    };
    let rep = roundtrip(&g, &p, &opts)?;
    let passed = rep.max_relative_error < tol;

    let mut summary = format!(
        "access set {} (reference {})\n{:<8} {:>14} {:>14} {:>10}\n",
        fmt_set(&rep.plan.access_set),
        rep.plan.reference,
        "param",
        "planted",
        "estimated",
        "rel. err"
    );
    for row in &rep.errors {
        let _ = writeln!(
            summary,
            "{:<8} {:>14.9} {:>14.9} {:>10.2e}",
            row.name, row.planted, row.estimated, row.relative
        );
    }
    let names: Vec<String> = rep.result.flags.iter().map(|f| f.to_string()).collect();
    let _ = writeln!(
        summary,
        "flags: {}\nmax relative error {:.3e} (tol {tol:e}): {}",
        if names.is_empty() { "none".into() } else { names.join(", ") },
        rep.max_relative_error,
        if passed { "PASS" } else { "FAIL" }
    );

    let report = json!({
        "plan": rep.plan,
        "measurement": measurement_value(&rep.measurement),
        "extrapolation": rep.extrapolation,
        "result": rep.result.to_json_value(),
        "comparison": rep.errors,
        "max_relative_error": rep.max_relative_error,
        "tol": tol,
        "passed": passed,
        "flags": rep.result.flags,
    });
    Ok(Outcome {
        summary,
        report,
        code: if passed { 0 } else { 1 },
    })
}

fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Classify { graph, infect } => cmd_classify(graph, infect.as_ref()),
        Command::Plan { graph, plan } => cmd_plan(graph, plan),
        Command::Simulate {
            graph,
            params,
            plan,
            sampling,
        } => cmd_simulate(graph, params, plan, sampling),
        Command::Spectrum {
            signal,
            graph,
            params,
            reference,
            total_time,
            dt,
            peaks,
            window,
        } => cmd_spectrum(
            signal.as_deref(),
            graph.as_deref().zip(params.as_deref()),
            *reference,
            *total_time,
            *dt,
            *peaks,
            (*window).into(),
        ),
        Command::Extrapolate { measurement } => cmd_extrapolate(measurement),
        Command::Reconstruct {
            graph,
            measurement,
            plan,
        } => cmd_reconstruct(graph, measurement, plan),
        Command::Roundtrip {
            graph,
            params,
            plan,
            sampling,
            tol,
        } => cmd_roundtrip(graph, params, plan, sampling, *tol),
    }
}

fn write_report(path: &Path, report: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GATEWAY_TOMO_LOG", "warn")).init();
    let cli = Cli::parse();
    let (code, report) = match run(&cli) {
        Ok(out) => {
            print!("{}", out.summary);
            (out.code, out.report)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            let report = json!({ "error": f.message, "flags": f.flags });
            (f.code, report)
        }
    };
    if let Some(path) = &cli.out {
        if let Err(f) = write_report(path, &report) {
            eprintln!("error: {}", f.message);
            return ExitCode::from(2);
        }
    }
    ExitCode::from(code)
}
