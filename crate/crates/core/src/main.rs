//! Command-line front end: scenario simulation, clock analysis, basin
//! classification, network realization, the loop demos, and parameter
//! sweeps. Exit codes: 0 success, 1 analysis failure, 2 input error,
//! 3 numerical failure.

use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crn_clockwork::computation::{compose_loop, compose_terminating_loop};
use crn_clockwork::dynamics::{high_phases, integrate, SolverConfig, Trace};
use crn_clockwork::oscillator::{
    classify_initial, equilibrium_character, validate_clock, ClockThresholds, CubicGeometry,
    EquilibriumKind, OscillatorConfig, OscillatorError,
};
use crn_clockwork::period::{period_report, phase_thresholds, predict_periods};
use crn_clockwork::PolynomialOde;

#[derive(Parser)]
#[command(name = "crn-clockwork", version, about = "Relaxation-oscillator clock signals driving chemical computation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and export the trace
    Simulate(SimulateArgs),
    /// Validate the clock criteria and compare measured periods against
    /// the quadrature prediction (exit 1 when validation fails)
    Analyze(AnalyzeArgs),
    /// Classify an initial point of the driving subsystem (A1, A2 or
    /// Equilibrium)
    Classify(ClassifyArgs),
    /// Realize a polynomial ODE JSON file as an abstract reaction network
    Realize(RealizeArgs),
    /// Run the clock-gated iteration loop and report the staircase
    DemoLoop(DemoLoopArgs),
    /// Run the counter-terminated loop and report the final state
    DemoTerminate(DemoTerminateArgs),
    /// Predict and measure periods over a grid of ell and eta1 values
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Scenario {
    /// Full 4-species oscillator (x, y, u, v)
    Standard,
    /// 2-species driving subsystem only (x, y)
    Vdp2d,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Shared oscillator/solver parameters; a JSON config file provides
/// defaults and explicit flags win over it.
#[derive(Args, Clone, Default)]
struct ParamArgs {
    /// Flat JSON config file; command-line flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long)]
    eta1: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    y0: Option<f64>,
    #[arg(long)]
    u0: Option<f64>,
    #[arg(long)]
    v0: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    /// Dense-output sample interval
    #[arg(long)]
    sample: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Absolute tolerance for the period quadrature
    #[arg(long, default_value_t = 1e-10)]
    quad_tol: f64,
    /// Maximum transition width as a fraction of the period
    #[arg(long)]
    abruptness: Option<f64>,
    /// Low-phase bound as a fraction of the high amplitude
    #[arg(long)]
    low_level_factor: Option<f64>,
}

#[derive(Args)]
struct ClassifyArgs {
    x0: f64,
    y0: f64,
    /// Radius around (3, 3) classified as the equilibrium
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct RealizeArgs {
    /// Polynomial ODE JSON file ("-" for stdin)
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DemoLoopArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Initial s1, s2, s3 (s3 is the per-cycle increment)
    #[arg(long, default_value_t = 0.0)]
    s1: f64,
    #[arg(long, default_value_t = 0.0)]
    s2: f64,
    #[arg(long, default_value_t = 1.0)]
    s3: f64,
    /// Write the full trace here (CSV)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DemoTerminateArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 0.0)]
    s1: f64,
    #[arg(long, default_value_t = 0.0)]
    s2: f64,
    #[arg(long, default_value_t = 1.0)]
    s3: f64,
    /// Iteration target (concentration of the termination species L)
    #[arg(long, default_value_t = 4.0)]
    l: f64,
    /// Initial counter concentration; defaults to l
    #[arg(long)]
    w0: Option<f64>,
    /// Counter rate constant
    #[arg(long, default_value_t = 50.0)]
    eta3: f64,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Comma-separated ell values
    #[arg(long, default_value = "2.5,3.0,3.5")]
    ell_values: String,
    /// Comma-separated eta1 values
    #[arg(long, default_value = "0.1")]
    eta1_values: String,
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Skip the simulations and only report predictions
    #[arg(long)]
    predict_only: bool,
}

/// Flat key-value config file; every key mirrors a flag.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scenario: Option<Scenario>,
    eps1: Option<f64>,
    eps2: Option<f64>,
    eta1: Option<f64>,
    p: Option<f64>,
    ell: Option<f64>,
    x0: Option<f64>,
    y0: Option<f64>,
    u0: Option<f64>,
    v0: Option<f64>,
    t_end: Option<f64>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    sample: Option<f64>,
}

/// Fully resolved run parameters: defaults, then config file, then flags.
struct Resolved {
    osc: OscillatorConfig,
    x0: f64,
    y0: f64,
    u0: f64,
    v0: f64,
    t_end: f64,
    solver: SolverConfig,
    scenario: Scenario,
}

enum CliError {
    Input(String),
    Analysis(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Analysis(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Analysis(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<crn_clockwork::DynamicsError> for CliError {
    fn from(e: crn_clockwork::DynamicsError) -> Self {
        use crn_clockwork::DynamicsError as E;
        match e {
            E::InvalidConfig(_) | E::InvalidInput(_) | E::UnknownSpecies(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

fn resolve(params: &ParamArgs, scenario: Option<Scenario>) -> Result<Resolved, CliError> {
    let file: FileConfig = match &params.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("bad config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let defaults = OscillatorConfig::default();
    let pick = |flag: Option<f64>, file_v: Option<f64>, def: f64| flag.or(file_v).unwrap_or(def);
    let osc = OscillatorConfig {
        eps1: pick(params.eps1, file.eps1, defaults.eps1),
        eps2: pick(params.eps2, file.eps2, defaults.eps2),
        eta1: pick(params.eta1, file.eta1, defaults.eta1),
        p: pick(params.p, file.p, defaults.p),
        ell: pick(params.ell, file.ell, defaults.ell),
    };
    let sample = pick(params.sample, file.sample, 0.01);
    let solver = SolverConfig {
        rel_tol: pick(params.rel_tol, file.rel_tol, 1e-8),
        abs_tol: pick(params.abs_tol, file.abs_tol, 1e-10),
        max_step: sample,
        clamp_nonnegative: true,
        sample_interval: sample,
    };
    Ok(Resolved {
        osc,
        x0: pick(params.x0, file.x0, 5.0),
        y0: pick(params.y0, file.y0, 5.0),
        u0: pick(params.u0, file.u0, 0.0),
        v0: pick(params.v0, file.v0, 0.0),
        t_end: pick(params.t_end, file.t_end, 100.0),
        solver,
        scenario: scenario.or(file.scenario).unwrap_or(Scenario::Standard),
    })
}

fn validate_and_warn(osc: &OscillatorConfig) -> Result<(), CliError> {
    let warnings = osc
        .validate()
        .map_err(|e| CliError::Input(e.to_string()))?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn write_output(path: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, content)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            io::stdout()
                .write_all(content.as_bytes())
                .map_err(|e| CliError::Numeric(format!("stdout: {e}")))?;
            Ok(())
        }
    }
}

fn trace_to_string(trace: &Trace, format: Format) -> Result<String, CliError> {
    match format {
        Format::Csv => Ok(trace.to_csv_string()),
        Format::Json => serde_json::to_string_pretty(trace)
            .map_err(|e| CliError::Numeric(format!("serializing trace: {e}"))),
    }
}

fn run_scenario(r: &Resolved) -> Result<Trace, CliError> {
    let (sys, init) = match r.scenario {
        Scenario::Standard => (
            r.osc.build_oscillator(),
            vec![r.x0, r.y0, r.u0, r.v0],
        ),
        Scenario::Vdp2d => (r.osc.build_subsystem_xy(), vec![r.x0, r.y0]),
    };
    Ok(integrate(&sys, &init, (0.0, r.t_end), &r.solver)?)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let r = resolve(&args.params, args.scenario)?;
    validate_and_warn(&r.osc)?;
    let (ex, ey) = r.osc.equilibrium();
    if (r.x0 - ex).abs() < 1e-9 && (r.y0 - ey).abs() < 1e-9 {
        eprintln!(
            "warning: initial point ({}, {}) is the unstable equilibrium; x and y will not move",
            r.x0, r.y0
        );
    }
    let trace = run_scenario(&r)?;
    for name in trace.species_names() {
        let (lo, hi) = trace.min_max(name).map_err(CliError::from)?;
        eprintln!("{name}: min = {lo:.6e}, max = {hi:.6e}");
    }
    let format = args.format.unwrap_or(Format::Csv);
    write_output(&args.out, &trace_to_string(&trace, format)?)
}

#[derive(Serialize)]
struct AnalyzeOutput<'a> {
    clock: &'a crn_clockwork::ClockReport,
    periods: &'a crn_clockwork::PeriodReport,
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let r = resolve(&args.params, Some(Scenario::Standard))?;
    validate_and_warn(&r.osc)?;
    let trace = run_scenario(&r)?;

    let thresholds = ClockThresholds {
        abruptness_fraction: args.abruptness.unwrap_or(0.02),
        low_level_factor: args.low_level_factor,
        ..Default::default()
    };
    let clock = match validate_clock(&trace, &r.osc, &thresholds) {
        Ok(report) => report,
        Err(OscillatorError::NoOscillation { .. }) => {
            let (kind, _) = equilibrium_character(r.osc.ell);
            let why = match kind {
                EquilibriumKind::Stable => "no oscillation: stable equilibrium",
                EquilibriumKind::FoldDegenerate => "no oscillation: equilibrium at a fold point",
                EquilibriumKind::Oscillatory => "no oscillation detected in the trace",
            };
            return Err(CliError::Analysis(why.into()));
        }
        Err(e) => return Err(CliError::Input(e.to_string())),
    };
    let periods = period_report(&trace, r.osc.ell, r.osc.eta1, r.osc.p, args.quad_tol)
        .map_err(|e| CliError::Analysis(e.to_string()))?;

    let out = AnalyzeOutput {
        clock: &clock,
        periods: &periods,
    };
    let text = serde_json::to_string_pretty(&out)
        .map_err(|e| CliError::Numeric(format!("serializing report: {e}")))?;
    write_output(&args.out, &format!("{text}\n"))?;
    if !clock.passes {
        return Err(CliError::Analysis(
            "clock validation failed (see report)".into(),
        ));
    }
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> Result<(), CliError> {
    let region = classify_initial(args.x0, args.y0, &CubicGeometry::default(), args.tol)
        .map_err(|e| CliError::Input(e.to_string()))?;
    println!("{region}");
    Ok(())
}

fn cmd_realize(args: RealizeArgs) -> Result<(), CliError> {
    let text = if args.input.as_os_str() == "-" {
        let mut buf = String::new();
        io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| CliError::Input(format!("stdin: {e}")))?;
        buf
    } else {
        fs::read_to_string(&args.input)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", args.input.display())))?
    };
    let ode: PolynomialOde =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("bad polynomial JSON: {e}")))?;
    let net = ode
        .realize_network()
        .map_err(|e| CliError::Input(e.to_string()))?;
    let out = serde_json::to_string_pretty(&net)
        .map_err(|e| CliError::Numeric(format!("serializing network: {e}")))?;
    write_output(&args.out, &format!("{out}\n"))
}

#[derive(Serialize)]
struct CycleRow {
    cycle: usize,
    time: f64,
    s1: f64,
}

fn staircase(trace: &Trace, p: f64) -> Result<Vec<CycleRow>, CliError> {
    let (tau_u, _) = phase_thresholds(p);
    let phases = high_phases(trace, "u", tau_u, 0.5 * tau_u)?;
    let s1 = trace.series("s1")?;
    let times = trace.times();
    // s1 after k complete cycles, read at the (k+1)-th rising edge of u.
    Ok(phases
        .iter()
        .skip(1)
        .enumerate()
        .map(|(k, (rise, _))| {
            let i = times.partition_point(|t| t < rise);
            CycleRow {
                cycle: k + 1,
                time: *rise,
                s1: s1[i.min(s1.len() - 1)],
            }
        })
        .collect())
}

fn cmd_demo_loop(args: DemoLoopArgs) -> Result<(), CliError> {
    let mut params = args.params.clone();
    params.t_end = params.t_end.or(Some(120.0));
    let r = resolve(&params, Some(Scenario::Standard))?;
    let composed = compose_loop(&r.osc, (args.s1, args.s2, args.s3))
        .map_err(|e| CliError::Input(e.to_string()))?;
    for w in &composed.warnings {
        eprintln!("warning: {w}");
    }
    let trace = integrate(
        &composed.system,
        &composed.initial_state,
        (0.0, r.t_end),
        &r.solver,
    )?;
    let rows = staircase(&trace, r.osc.p)?;
    let mut report = serde_json::Map::new();
    report.insert(
        "cycles".into(),
        serde_json::to_value(&rows).map_err(|e| CliError::Numeric(e.to_string()))?,
    );
    let last = trace.states().last().unwrap();
    let idx = |n: &str| trace.index_of(n).map_err(CliError::from);
    report.insert(
        "final".into(),
        serde_json::json!({
            "t": trace.times().last().unwrap(),
            "s1": last[idx("s1")?],
            "s2": last[idx("s2")?],
            "s3": last[idx("s3")?],
        }),
    );
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::Value::Object(report))
            .map_err(|e| CliError::Numeric(e.to_string()))?
    );
    if let Some(out) = &args.out {
        write_output(&Some(out.clone()), &trace.to_csv_string())?;
    }
    Ok(())
}

fn cmd_demo_terminate(args: DemoTerminateArgs) -> Result<(), CliError> {
    let mut params = args.params.clone();
    params.t_end = params.t_end.or(Some(100.0));
    let r = resolve(&params, Some(Scenario::Standard))?;
    let w0 = args.w0.unwrap_or(args.l);
    let composed = compose_terminating_loop(
        &r.osc,
        (args.s1, args.s2, args.s3),
        args.l,
        w0,
        args.eta3,
    )
    .map_err(|e| CliError::Input(e.to_string()))?;
    for w in &composed.warnings {
        eprintln!("warning: {w}");
    }
    let trace = integrate(
        &composed.system,
        &composed.initial_state,
        (0.0, r.t_end),
        &r.solver,
    )?;
    let last = trace.states().last().unwrap();
    let idx = |n: &str| trace.index_of(n).map_err(CliError::from);
    let report = serde_json::json!({
        "target_l": args.l,
        "eta3": args.eta3,
        "final": {
            "t": trace.times().last().unwrap(),
            "s1": last[idx("s1")?],
            "s2": last[idx("s2")?],
            "w": last[idx("w")?],
        },
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Numeric(e.to_string()))?
    );
    if let Some(out) = &args.out {
        write_output(&Some(out.clone()), &trace.to_csv_string())?;
    }
    Ok(())
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Input(format!("bad {what} value `{s}`: {e}")))
        })
        .collect()
}

fn sweep_threads(jobs: usize) -> usize {
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let cap = std::env::var("CRN_CLOCKWORK_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(available);
    cap.min(jobs).max(1)
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let mut params = args.params.clone();
    params.t_end = params.t_end.or(Some(140.0));
    let r = resolve(&params, Some(Scenario::Standard))?;
    let ells = parse_list(&args.ell_values, "ell")?;
    let etas = parse_list(&args.eta1_values, "eta1")?;
    let jobs: Vec<(f64, f64)> = ells
        .iter()
        .flat_map(|&ell| etas.iter().map(move |&eta1| (ell, eta1)))
        .collect();

    let results: Mutex<Vec<Option<Result<String, String>>>> =
        Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = sweep_threads(jobs.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let (ell, eta1) = jobs[i];
                let row = sweep_row(&r, ell, eta1, args.predict_only);
                results.lock().unwrap()[i] = Some(row);
            });
        }
    });

    let mut out = String::from("ell,eta1,T_l_pred,T_h_pred,T1_meas,T2_meas\n");
    for slot in results.into_inner().unwrap() {
        match slot.expect("all jobs ran") {
            Ok(row) => out.push_str(&row),
            Err(e) => return Err(CliError::Numeric(e)),
        }
    }
    write_output(&args.out, &out)
}

fn sweep_row(r: &Resolved, ell: f64, eta1: f64, predict_only: bool) -> Result<String, String> {
    let pred = predict_periods(ell, eta1, 1e-10).map_err(|e| e.to_string())?;
    let (t1, t2) = if predict_only {
        (f64::NAN, f64::NAN)
    } else {
        let osc = OscillatorConfig { ell, eta1, ..r.osc };
        let sys = osc.build_oscillator();
        let trace = integrate(&sys, &[r.x0, r.y0, r.u0, r.v0], (0.0, r.t_end), &r.solver)
            .map_err(|e| e.to_string())?;
        crn_clockwork::measure_periods(&trace, osc.p).map_err(|e| e.to_string())?
    };
    Ok(format!(
        "{ell},{eta1},{:.6},{:.6},{:.6},{:.6}\n",
        pred.t_low, pred.t_high, t1, t2
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Realize(args) => cmd_realize(args),
        Command::DemoLoop(args) => cmd_demo_loop(args),
        Command::DemoTerminate(args) => cmd_demo_terminate(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
