//! `qrisk`: batch front end for the loaders, sweeps, GCI risk pipeline,
//! transpiler and SPAM statistics. Angles are degrees on the command line
//! and in every file written here.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use qrisk_core::circuits::{
    build_gci_ideal, build_loader, run_sweep, sweep_csv, AngleRange, GaussianLoaderParams, InitialState,
    SweepAnsatz, SweepNoise, SweepSpec,
};
use qrisk_core::exec::Execution;
use qrisk_core::finmodel::{GciModel, GciModelSpec};
use qrisk_core::noise::{inject_cz_phase, spam_statistics, ConfusionMatrix, ReadoutSpec, SpamNoise};
use qrisk_core::riskpipe::{cdf_csv, run_gci_pipeline, GciCircuitChoice, PipelineConfig};
use qrisk_core::simkit::{circuit_unitary, Circuit};
use qrisk_core::transpiler::{equivalence_error, layout_permutation, route, CouplingMap, TranspileOptions};
use qrisk_core::variational::{train_loader, TrainConfig};

const EXIT_USAGE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_IO: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "qrisk", version, about = "Quantum credit-risk toolkit")]
struct Cli {
    /// Master RNG seed; overrides any seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Run batches on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit loader angles to a discretized Gaussian with Adam.
    Train(TrainArgs),
    /// Evaluate a loader or GCI circuit over an angle grid.
    Sweep(SweepArgs),
    /// Run the GCI risk pipeline and write the loss distribution.
    Gci(GciArgs),
    /// Lower a circuit to CZ-native gates on a coupling map.
    Transpile(TranspileArgs),
    /// Repeat a shot experiment and report symmetric-pair asymmetries.
    Spam(SpamArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training config JSON.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<TrainPreset>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TrainPreset {
    /// N(0,1) on two qubits, z_max = 1.
    Normal2,
    /// N(0,1) on three qubits, z_max = 1.
    Normal3,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_enum, conflicts_with = "ansatz")]
    preset: Option<SweepPreset>,
    #[arg(long, value_enum)]
    ansatz: Option<AnsatzKind>,
    /// `start:stop:step` or a single value, degrees.
    #[arg(long)]
    theta0: Option<String>,
    #[arg(long)]
    theta1: Option<String>,
    #[arg(long)]
    theta2: Option<String>,
    /// Sample this many shots per grid point.
    #[arg(long)]
    shots: Option<u64>,
    /// Per-qubit readout fidelity (symmetric confusion).
    #[arg(long)]
    readout_fidelity: Option<f64>,
    /// Concavity classification tolerance on probabilities.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SweepPreset {
    /// theta0 = 90, theta1 in [90, 450] step 21.
    TwoQubitTrend,
    /// Three-qubit coarse grid, 36 degree steps.
    ThreeQubitCoarse,
    /// Three-qubit refined grid.
    ThreeQubitFine,
    /// theta3 x theta4 hyper-tuning grid of the hardware GCI circuit.
    GciTuning,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AnsatzKind {
    TwoQubit,
    ThreeQubit,
}

#[derive(Args, Debug)]
struct GciArgs {
    /// Model JSON {p0, rho, lgd, n_z, z_max}.
    #[arg(long, conflicts_with = "preset")]
    model: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<GciPreset>,
    /// Pipeline JSON {circuit, noise, levels, coupling_map}; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    circuit: Option<CircuitKind>,
    /// Two loader angles for the ideal circuit, e.g. `90,102.63`.
    #[arg(long, value_delimiter = ',')]
    loader_deg: Option<Vec<f64>>,
    /// Five angles theta0..theta4 for the transpiled circuit.
    #[arg(long, value_delimiter = ',')]
    angles_deg: Option<Vec<f64>>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    readout_fidelity: Option<f64>,
    /// Inject the coupling map's CZ phase errors.
    #[arg(long)]
    cz_phase: bool,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GciPreset {
    /// p0 = 0.25, rho = 0.027, LGD = 1000, two z qubits, z_max = 1.
    PaperGci,
    /// As paper-gci with rho = 0.
    RhoZero,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CircuitKind {
    Ideal,
    Transpiled,
}

#[derive(Args, Debug)]
struct TranspileArgs {
    /// Circuit JSON {n_qubits, bit_order, gates: [{kind, qubits, angle_deg}]}.
    #[arg(long, conflicts_with = "preset")]
    circuit: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<CircuitPreset>,
    /// Coupling map JSON; defaults to the contralto-3q preset.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Physical qubit for each logical qubit, e.g. `0,1,2`.
    #[arg(long, value_delimiter = ',')]
    layout: Option<Vec<usize>>,
    /// Lower CNOTs without counter-phase RZ gates.
    #[arg(long)]
    no_counter_phase: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CircuitPreset {
    /// Ideal GCI circuit for the paper-gci model with the N(0,1) loader.
    GciIdeal,
    /// Three-qubit loader at (90, 212.5, 104.5).
    Loader3,
}

#[derive(Args, Debug)]
struct SpamArgs {
    /// Loader angles (2 or 3 values).
    #[arg(long, value_delimiter = ',', default_value = "90,191")]
    angles_deg: Vec<f64>,
    /// Start from |1...1> instead of |0...0>.
    #[arg(long)]
    ones: bool,
    #[arg(long, default_value_t = 100)]
    repetitions: usize,
    #[arg(long, default_value_t = 1024)]
    shots: u64,
    #[arg(long)]
    readout_fidelity: Option<f64>,
    /// Lower on the contralto-3q map and inject its CZ phase errors.
    #[arg(long)]
    cz_phase: bool,
}

/// Error with an exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(msg: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_USAGE, message: msg.to_string() }
    }

    fn io(msg: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_IO, message: msg.to_string() }
    }
}

type CmdResult = Result<Outcome, Failure>;

/// What a command produced, before the manifest is written.
struct Outcome {
    config: Value,
    seed: u64,
    code: u8,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: &'a Value,
    seed: u64,
    tool_version: &'a str,
    started_unix_ms: u128,
    finished_unix_ms: u128,
    outputs: &'a [String],
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Writer { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut s = serde_json::to_string_pretty(value).map_err(Failure::io)?;
        s.push('\n');
        self.text(name, &s)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let raw = fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn execution(cli: &Cli) -> Execution {
    if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn readout(fidelity: Option<f64>) -> Option<ReadoutSpec> {
    fidelity.map(|f| ReadoutSpec::Uniform { fidelity: f })
}

fn cmd_train(cli: &Cli, args: &TrainArgs, w: &mut Writer) -> CmdResult {
    let mut cfg = match (&args.config, args.preset) {
        (Some(path), _) => read_json::<TrainConfig>(path)?,
        (None, Some(TrainPreset::Normal2)) => TrainConfig::new(2, 0.0, 1.0, 1.0),
        (None, Some(TrainPreset::Normal3)) => TrainConfig::new(3, 0.0, 1.0, 1.0),
        (None, None) => return Err(Failure::usage("train needs --config or --preset")),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let target = cfg.target().map_err(Failure::usage)?;
    let report = train_loader(cfg.n_qubits, &target, &cfg).map_err(Failure::usage)?;
    w.json("train_report.json", &json!({ "config": cfg, "target": target, "report": report }))?;
    let mut csv = String::from("iteration,loss\n");
    for (i, l) in report.loss_history.iter().enumerate() {
        csv.push_str(&format!("{i},{l:?}\n"));
    }
    w.text("loss_history.csv", &csv)?;
    if !report.converged {
        eprintln!("not converged after {} iterations, loss {:e}", report.iterations, report.final_loss);
    }
    Ok(Outcome {
        config: serde_json::to_value(&cfg).map_err(Failure::io)?,
        seed: cfg.seed,
        code: if report.converged { 0 } else { EXIT_NOT_CONVERGED },
    })
}

fn axis(arg: &Option<String>, default: &str) -> Result<Vec<f64>, Failure> {
    let r = AngleRange::parse(arg.as_deref().unwrap_or(default)).map_err(Failure::usage)?;
    Ok(r.points())
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs, w: &mut Writer) -> CmdResult {
    let mut spec = match (args.preset, args.ansatz) {
        (Some(SweepPreset::TwoQubitTrend), _) => SweepSpec::two_qubit_trend(),
        (Some(SweepPreset::ThreeQubitCoarse), _) => SweepSpec::three_qubit_coarse(),
        (Some(SweepPreset::ThreeQubitFine), _) => SweepSpec::three_qubit_fine(),
        (Some(SweepPreset::GciTuning), _) => SweepSpec::gci_hypertuning(),
        (None, Some(AnsatzKind::TwoQubit)) => SweepSpec::new(SweepAnsatz::TwoQubit {
            theta0: axis(&args.theta0, "90")?,
            theta1: axis(&args.theta1, "90:450:21")?,
        }),
        (None, Some(AnsatzKind::ThreeQubit)) => SweepSpec::new(SweepAnsatz::ThreeQubit {
            theta0: axis(&args.theta0, "90")?,
            theta1: axis(&args.theta1, "90:450:36")?,
            theta2: axis(&args.theta2, "90:450:36")?,
        }),
        (None, None) => return Err(Failure::usage("sweep needs --preset or --ansatz")),
    };
    if let Some(t) = args.tol {
        spec.concavity_tol = t;
    }
    let seed = cli.seed.unwrap_or(0);
    if args.shots == Some(0) {
        return Err(Failure::usage("shots must be positive"));
    }
    let readout_cm = match args.readout_fidelity {
        Some(f) => Some(ConfusionMatrix::uniform_fidelity(spec.n_qubits(), f).map_err(Failure::usage)?),
        None => None,
    };
    if args.shots.is_some() || readout_cm.is_some() {
        spec.noise = Some(SweepNoise { shots: args.shots, readout: readout_cm, seed });
    }
    let rows = run_sweep(&spec, execution(cli)).map_err(Failure::usage)?;
    w.text("sweep.csv", &sweep_csv(&spec, &rows))?;
    let config = json!({
        "ansatz": spec.ansatz,
        "concavity_tol": spec.concavity_tol,
        "shots": args.shots,
        "readout_fidelity": args.readout_fidelity,
        "rows": rows.len(),
    });
    Ok(Outcome { config, seed, code: 0 })
}

fn reference_model_spec() -> GciModelSpec {
    GciModelSpec { p0: 0.25, rho: 0.027, lgd: 1000.0, n_z: 2, z_max: 1.0 }
}

fn cmd_gci(cli: &Cli, args: &GciArgs, w: &mut Writer) -> CmdResult {
    let spec = match (&args.model, args.preset) {
        (Some(path), _) => read_json::<GciModelSpec>(path)?,
        (None, Some(GciPreset::RhoZero)) => GciModelSpec { rho: 0.0, ..reference_model_spec() },
        (None, Some(GciPreset::PaperGci)) | (None, None) => reference_model_spec(),
    };
    let model = GciModel::from_spec(spec).map_err(|e| Failure::usage(format!("invalid model: {e}")))?;
    let mut cfg = match &args.config {
        Some(path) => read_json::<PipelineConfig>(path)?,
        None => PipelineConfig::new(GciCircuitChoice::gaussian_ideal()),
    };
    match args.circuit {
        Some(CircuitKind::Ideal) => {
            let loader = args.loader_deg.clone().unwrap_or_else(|| match GciCircuitChoice::gaussian_ideal() {
                GciCircuitChoice::Ideal { loader_deg } => loader_deg,
                GciCircuitChoice::Transpiled { .. } => unreachable!(),
            });
            cfg.circuit = GciCircuitChoice::Ideal { loader_deg: loader };
        }
        Some(CircuitKind::Transpiled) => {
            let angles = match &args.angles_deg {
                Some(a) => <[f64; 5]>::try_from(a.as_slice())
                    .map_err(|_| Failure::usage("--angles-deg takes five values"))?,
                None => match GciCircuitChoice::hardware_transpiled() {
                    GciCircuitChoice::Transpiled { angles_deg } => angles_deg,
                    GciCircuitChoice::Ideal { .. } => unreachable!(),
                },
            };
            cfg.circuit = GciCircuitChoice::Transpiled { angles_deg: angles };
        }
        None => {
            if let (Some(l), GciCircuitChoice::Ideal { loader_deg }) = (&args.loader_deg, &mut cfg.circuit) {
                *loader_deg = l.clone();
            }
        }
    }
    if args.shots.is_some() {
        cfg.noise.shots = args.shots;
    }
    if args.readout_fidelity.is_some() {
        cfg.noise.readout = readout(args.readout_fidelity);
    }
    if args.cz_phase {
        cfg.noise.cz_phase = true;
    }
    if let Some(levels) = &args.levels {
        cfg.levels = levels.clone();
    }
    if let Some(s) = cli.seed {
        cfg.noise.seed = s;
    }
    let report = run_gci_pipeline(&model, &cfg).map_err(Failure::usage)?;
    let config_echo = json!({ "model": spec, "derived": model.derived(), "pipeline": cfg });
    let mut body = serde_json::to_value(&report).map_err(Failure::io)?;
    body["config_echo"] = config_echo.clone();
    w.json("gci_report.json", &body)?;
    w.text("cdf.csv", &cdf_csv(&report.distribution))?;
    Ok(Outcome { config: config_echo, seed: cfg.noise.seed, code: 0 })
}

fn cmd_transpile(cli: &Cli, args: &TranspileArgs, w: &mut Writer) -> CmdResult {
    let (circuit, source) = match (&args.circuit, args.preset) {
        (Some(path), _) => (read_json::<Circuit>(path)?, json!(path.display().to_string())),
        (None, Some(CircuitPreset::Loader3)) => (
            build_loader(&GaussianLoaderParams::from_degrees(&[90.0, 212.5, 104.5]).map_err(Failure::usage)?)
                .map_err(Failure::usage)?,
            json!("loader3"),
        ),
        (None, Some(CircuitPreset::GciIdeal)) | (None, None) => {
            let model = GciModel::from_spec(reference_model_spec()).map_err(Failure::usage)?;
            let loader = match GciCircuitChoice::gaussian_ideal() {
                GciCircuitChoice::Ideal { loader_deg } => loader_deg,
                GciCircuitChoice::Transpiled { .. } => unreachable!(),
            };
            let loader = GaussianLoaderParams::from_degrees(&loader).map_err(Failure::usage)?;
            (build_gci_ideal(&model, &loader).map_err(Failure::usage)?, json!("gci-ideal"))
        }
    };
    let map = match &args.map {
        Some(path) => read_json::<CouplingMap>(path)?,
        None => CouplingMap::contralto_3q(),
    };
    let options = TranspileOptions { counter_phase: !args.no_counter_phase, ..TranspileOptions::default() };
    let report = route(&circuit, &map, args.layout.as_deref(), options).map_err(Failure::usage)?;
    // logical content: same routing with plain CNOT lowering
    let ideal = route(&circuit, &map, args.layout.as_deref(), TranspileOptions { counter_phase: false, ..options })
        .map_err(Failure::usage)?;
    let eq_err = equivalence_error(&circuit, &ideal).map_err(Failure::usage)?;
    // device model: counter-phased output with the map's CZ errors injected
    let device = inject_cz_phase(&report.output, &map).map_err(Failure::usage)?;
    let device_err = device_error(&circuit, &device, &report.initial_layout, &report.final_layout)?;

    w.json("transpiled_circuit.json", &report.output)?;
    let summary = json!({
        "router": report.router,
        "swap_count": report.swap_count,
        "cz_count": report.cz_count,
        "depth": report.depth,
        "gate_count": report.output.len(),
        "initial_layout": report.initial_layout,
        "final_layout": report.final_layout,
        "physical_qubits": map.names(),
        "counter_phase": options.counter_phase,
        "equivalence_error": eq_err,
        "equivalent": eq_err < 1e-9,
        "device_error": device_err,
    });
    w.json("transpile_report.json", &summary)?;
    let config = json!({ "circuit": source, "map": map, "layout": args.layout, "counter_phase": options.counter_phase });
    Ok(Outcome { config, seed: cli.seed.unwrap_or(0), code: 0 })
}

fn device_error(input: &Circuit, device: &Circuit, initial: &[usize], fin: &[usize]) -> Result<f64, Failure> {
    let mut padded = Circuit::new(device.n_qubits()).map_err(Failure::usage)?;
    padded.extend(input.gates().iter().copied()).map_err(Failure::usage)?;
    let u = circuit_unitary(&padded).map_err(Failure::usage)?;
    let expected = layout_permutation(fin).mul(&u).mul(&layout_permutation(initial).adjoint());
    let got = circuit_unitary(device).map_err(Failure::usage)?;
    Ok(got.max_diff_up_to_phase(&expected))
}

fn cmd_spam(cli: &Cli, args: &SpamArgs, w: &mut Writer) -> CmdResult {
    let initial = if args.ones { InitialState::Ones } else { InitialState::Zeros };
    let params = GaussianLoaderParams::from_degrees(&args.angles_deg).map_err(Failure::usage)?.with_initial_state(initial);
    let mut circuit = build_loader(&params).map_err(Failure::usage)?;
    let n = circuit.n_qubits();
    let mut noise = SpamNoise::default();
    if let Some(f) = args.readout_fidelity {
        noise.readout = Some(ConfusionMatrix::uniform_fidelity(n, f).map_err(Failure::usage)?);
    }
    if args.cz_phase {
        let map = CouplingMap::contralto_3q();
        let routed = route(&circuit, &map, None, TranspileOptions::default()).map_err(Failure::usage)?;
        if routed.swap_count > 0 {
            return Err(Failure::usage("loader does not fit the device map without SWAPs"));
        }
        let mut lowered = Circuit::new(n).map_err(Failure::usage)?;
        lowered.extend(routed.output.gates().iter().copied()).map_err(Failure::usage)?;
        circuit = lowered;
        noise.cz_phase = Some(map);
    }
    if args.shots == 0 {
        return Err(Failure::usage("shots must be positive"));
    }
    let seed = cli.seed.unwrap_or(0);
    let report = spam_statistics(&circuit, &noise, args.repetitions, Some(args.shots), seed, execution(cli))
        .map_err(Failure::usage)?;
    w.json("spam_report.json", &report)?;
    let config = json!({
        "angles_deg": args.angles_deg,
        "initial_state": initial,
        "repetitions": args.repetitions,
        "shots": args.shots,
        "readout_fidelity": args.readout_fidelity,
        "cz_phase": args.cz_phase,
    });
    Ok(Outcome { config, seed, code: 0 })
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let started = now_ms();
    let mut w = Writer::new(&cli.out_dir)?;
    let (name, outcome) = match &cli.command {
        Command::Train(a) => ("train", cmd_train(cli, a, &mut w)?),
        Command::Sweep(a) => ("sweep", cmd_sweep(cli, a, &mut w)?),
        Command::Gci(a) => ("gci", cmd_gci(cli, a, &mut w)?),
        Command::Transpile(a) => ("transpile", cmd_transpile(cli, a, &mut w)?),
        Command::Spam(a) => ("spam", cmd_spam(cli, a, &mut w)?),
    };
    let outputs = w.files.clone();
    let manifest = RunManifest {
        command: name,
        config: &outcome.config,
        seed: outcome.seed,
        tool_version: env!("CARGO_PKG_VERSION"),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        outputs: &outputs,
    };
    w.json("manifest.json", &manifest)?;
    Ok(outcome.code)
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code.clamp(0, 255) as u8;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
