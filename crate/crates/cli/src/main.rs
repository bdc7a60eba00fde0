//! `hpn`: validate, simulate, analyze and translate hybrid Petri net models.
//!
//! Exit status: 0 success, 1 semantic failure, 2 I/O or usage failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hpn_core::ccpn::{evolution_graph, macro_reachability_graph, simulate_ccpn};
use hpn_core::ha::{export_ha, import_ha, simulate_ha, translate_detailed, HaFormat};
use hpn_core::hybrid::{simulate_hybrid, FiringPolicy};
use hpn_core::rational::{self, Rational};
use hpn_core::vcpn::{simulate_vcpn, VcpnTolerances};
use hpn_core::{parse_model, validate_structure, HybridNet, NetClass};

#[derive(Parser)]
#[command(name = "hpn", version, about = "Hybrid Petri net simulator and hybrid automaton translator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model against the structural rules of its class.
    Validate(Common),
    /// Simulate a model and write its trajectory (and event log).
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        engine: Engine,
        #[arg(long)]
        horizon: String,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Relative tolerance of the variable-speed integrator.
        #[arg(long, default_value_t = 1e-9)]
        rel_tol: f64,
        /// Event localisation tolerance of the variable-speed integrator.
        #[arg(long, default_value_t = 1e-9)]
        event_tol: f64,
        #[arg(long, value_delimiter = ',', default_value = "csv")]
        format: Vec<Format>,
    },
    /// Build the macro-marking graph or the evolution graph of a continuous net.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "evolution_graph", required_unless_present = "evolution_graph")]
        macro_graph: bool,
        #[arg(long)]
        evolution_graph: bool,
        /// Truncates the evolution graph; unbounded when absent.
        #[arg(long)]
        horizon: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "dot,structured")]
        format: Vec<Format>,
    },
    /// Translate a D-elementary net into a hybrid automaton.
    Translate {
        #[command(flatten)]
        common: Common,
        /// Maximal number of reachable discrete markings.
        #[arg(long, default_value_t = 10_000)]
        cap: usize,
        #[arg(long, value_delimiter = ',', default_value = "dot,structured")]
        format: Vec<Format>,
    },
    /// Compare the hybrid engine with a simulation of the translated automaton.
    CheckEquivalence {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        horizon: String,
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long, default_value_t = 10_000)]
        cap: usize,
        /// Use this structured automaton instead of translating (debugging aid).
        #[arg(long)]
        ha: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Model files; several files are processed independently.
    #[arg(required = true)]
    models: Vec<PathBuf>,
    /// Output root; results go to `<out>/<model>-<command>[-<policy>]/`.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of models processed in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct PolicyArgs {
    /// earliest, latest, random, or script=<file>.
    #[arg(long, default_value = "earliest")]
    policy: String,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Ccpn,
    Vcpn,
    Hybrid,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Dot,
    Structured,
}

enum Failure {
    Semantic(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Semantic(_) => 1,
            Failure::Usage(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Semantic(m) | Failure::Usage(m) => m,
        }
    }
}

fn semantic(e: impl std::fmt::Display) -> Failure {
    Failure::Semantic(e.to_string())
}

type Outcome = Result<String, Failure>;

fn parse_horizon(text: &str) -> Result<Rational, Failure> {
    match rational::parse(text) {
        Some(h) if h > rational::zero() => Ok(h),
        _ => Err(Failure::Usage(format!("horizon must be a positive rational, got `{text}`"))),
    }
}

fn parse_policy(args: &PolicyArgs) -> Result<FiringPolicy, Failure> {
    let policy = match args.policy.as_str() {
        "earliest" => FiringPolicy::Earliest,
        "latest" => FiringPolicy::Latest,
        "random" => {
            let seed = args.seed.ok_or_else(|| Failure::Usage("--policy random requires --seed".into()))?;
            FiringPolicy::UniformRandom(seed)
        }
        other => match other.strip_prefix("script=") {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{path}: {e}")))?;
                FiringPolicy::parse_script(&text).map_err(|e| Failure::Usage(format!("{path}: {e}")))?
            }
            None => return Err(Failure::Usage(format!("unknown policy `{other}`"))),
        },
    };
    if args.seed.is_some() && !matches!(policy, FiringPolicy::UniformRandom(_)) {
        return Err(Failure::Usage("--seed only applies to --policy random".into()));
    }
    Ok(policy)
}

fn load(path: &Path) -> Result<HybridNet, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_valid(path: &Path) -> Result<HybridNet, Failure> {
    let net = load(path)?;
    let report = validate_structure(&net);
    if !report.is_empty() {
        return Err(Failure::Semantic(format!("{}: invalid model\n{report}", path.display())));
    }
    Ok(net)
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(out: &Path, model: &Path, command: &str, policy: Option<&FiringPolicy>) -> Result<Self, Failure> {
        let stem = model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
        let name = match policy {
            Some(p) => format!("{stem}-{command}-{}", p.name()),
            None => format!("{stem}-{command}"),
        };
        let dir = out.join(name);
        fs::create_dir_all(&dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
        Ok(Output { dir })
    }

    fn write(&self, name: &str, contents: &str) -> Result<String, Failure> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        Ok(format!("wrote {}\n", path.display()))
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<String, Failure> {
        self.write(name, &(serde_json::to_string_pretty(value).expect("json values serialise") + "\n"))
    }
}

fn tuple(values: &[Rational]) -> String {
    let parts: Vec<String> = values.iter().map(rational::format).collect();
    format!("({})", parts.join(","))
}

fn cmd_validate(path: &Path) -> Outcome {
    let net = load(path)?;
    let report = validate_structure(&net);
    if report.is_empty() {
        Ok(format!("{}: valid {} net\n", path.display(), net.class))
    } else {
        Err(Failure::Semantic(format!("{}: {} violation(s)\n{report}", path.display(), report.violations.len())))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &Path,
    out: &Path,
    engine: Engine,
    horizon: &Rational,
    policy: &FiringPolicy,
    tolerances: VcpnTolerances,
    formats: &[Format],
) -> Outcome {
    let net = load_valid(path)?;
    let mut report = String::new();
    match engine {
        Engine::Ccpn => {
            if net.class != NetClass::Ccpn {
                return Err(Failure::Semantic(format!("engine ccpn does not apply to a {} net", net.class)));
            }
            let graph = evolution_graph(&net, Some(horizon)).map_err(semantic)?;
            let traj = simulate_ccpn(&net, horizon).map_err(semantic)?;
            for (k, p) in graph.phases.iter().enumerate() {
                let _ = writeln!(
                    report,
                    "phase {k}: t0 = {}, d = {}, v = {}, dm/dt = {}",
                    rational::format(&p.start),
                    rational::format_extended(p.duration.as_ref()),
                    tuple(&p.speeds.0),
                    tuple(&p.derivative)
                );
            }
            let out = Output::new(out, path, "simulate", None)?;
            if formats.contains(&Format::Csv) {
                report += &out.write("trajectory.csv", &traj.to_csv())?;
            }
            if formats.contains(&Format::Structured) {
                report += &out.write_json("trajectory.json", &traj.to_json())?;
            }
            if formats.contains(&Format::Dot) {
                report += &out.write("evolution-graph.dot", &graph.to_dot())?;
            }
        }
        Engine::Vcpn => {
            if net.class != NetClass::Vcpn {
                return Err(Failure::Semantic(format!("engine vcpn does not apply to a {} net", net.class)));
            }
            let traj = simulate_vcpn(&net, rational::to_f64(horizon), tolerances).map_err(semantic)?;
            let _ = writeln!(report, "{} breakpoints, {} region events", traj.points.len(), traj.events.len());
            let out = Output::new(out, path, "simulate", None)?;
            if formats.contains(&Format::Csv) {
                report += &out.write("trajectory.csv", &traj.to_csv())?;
            }
            if formats.contains(&Format::Structured) {
                report += &out.write_json("trajectory.json", &traj.to_json())?;
            }
        }
        Engine::Hybrid => {
            if !net.class.is_hybrid() {
                return Err(Failure::Semantic(format!("engine hybrid does not apply to a {} net", net.class)));
            }
            let run = simulate_hybrid(&net, horizon, policy).map_err(semantic)?;
            let _ = writeln!(
                report,
                "{} events, {} discrete firings",
                run.log.events.len(),
                run.log.firings().count()
            );
            for (t, id) in run.log.firings() {
                let _ = writeln!(report, "  t = {}: {id}", rational::format(t));
            }
            let out = Output::new(out, path, "simulate", Some(policy))?;
            if formats.contains(&Format::Csv) {
                report += &out.write("trajectory.csv", &run.trajectory.to_csv())?;
                report += &out.write("events.csv", &run.log.to_csv())?;
            }
            if formats.contains(&Format::Structured) {
                report += &out.write_json("trajectory.json", &run.trajectory.to_json())?;
                report += &out.write_json("events.json", &run.log.to_json())?;
            }
        }
    }
    Ok(report)
}

fn cmd_analyze(path: &Path, out: &Path, macro_graph: bool, horizon: Option<&Rational>, formats: &[Format]) -> Outcome {
    let net = load_valid(path)?;
    let mut report = String::new();
    if macro_graph {
        let graph = macro_reachability_graph(&net).map_err(semantic)?;
        let _ = writeln!(report, "{} nodes, {} edges", graph.nodes.len(), graph.edges.len());
        let out = Output::new(out, path, "macro-graph", None)?;
        if formats.contains(&Format::Dot) {
            report += &out.write("macro-graph.dot", &graph.to_dot())?;
        }
        if formats.contains(&Format::Structured) {
            report += &out.write_json("macro-graph.json", &graph.to_json())?;
        }
    } else {
        let graph = evolution_graph(&net, horizon).map_err(semantic)?;
        let _ = writeln!(report, "{} phases, terminal: {:?}", graph.phases.len(), graph.terminal);
        let out = Output::new(out, path, "evolution-graph", None)?;
        if formats.contains(&Format::Dot) {
            report += &out.write("evolution-graph.dot", &graph.to_dot())?;
        }
        if formats.contains(&Format::Structured) {
            report += &out.write_json("evolution-graph.json", &graph.to_json())?;
        }
    }
    Ok(report)
}

fn cmd_translate(path: &Path, out: &Path, cap: usize, formats: &[Format]) -> Outcome {
    let net = load_valid(path)?;
    if net.class == NetClass::Ccpn {
        eprintln!("warning: {} has no discrete part; emitting its macro-marking automaton", path.display());
    }
    let t = translate_detailed(&net, cap).map_err(semantic)?;
    let mut report = format!(
        "n = {}, m = {}, locations = {}, edges = {}, bound {}\n",
        t.timed.automaton.locations.len(),
        t.continuous_places,
        t.automaton.locations.len(),
        t.automaton.edges.len(),
        t.location_bound()
    );
    let out = Output::new(out, path, "translate", None)?;
    if formats.contains(&Format::Dot) {
        report += &out.write("ha.dot", &export_ha(&t.automaton, HaFormat::Dot))?;
        report += &out.write("ta.dot", &export_ha(&t.timed.automaton, HaFormat::Dot))?;
    }
    if formats.contains(&Format::Structured) {
        report += &out.write("ha.json", &export_ha(&t.automaton, HaFormat::Structured))?;
        report += &out.write("ta.json", &export_ha(&t.timed.automaton, HaFormat::Structured))?;
    }
    Ok(report)
}

fn cmd_check_equivalence(
    path: &Path,
    horizon: &Rational,
    policy: &FiringPolicy,
    cap: usize,
    ha_file: Option<&Path>,
) -> Outcome {
    let net = load_valid(path)?;
    if net.class != NetClass::DElementary {
        return Err(Failure::Semantic(format!("check-equivalence needs a d-elementary net, got {}", net.class)));
    }
    let ha = match ha_file {
        Some(file) => {
            let text = fs::read_to_string(file).map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?;
            import_ha(&text).map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?
        }
        None => translate_detailed(&net, cap).map_err(semantic)?.automaton,
    };
    let engine = simulate_hybrid(&net, horizon, policy).map_err(semantic)?.log.project(&ha.variables);
    let automaton = simulate_ha(&ha, horizon, policy)
        .map_err(|e| Failure::Semantic(format!("automaton run failed: {e}")))?
        .log;
    match engine.first_divergence(&automaton) {
        None => Ok(format!("equivalent: {} events agree\n", engine.events.len())),
        Some(d) => {
            let show = |e: &Option<hpn_core::hybrid::LoggedEvent>| e.as_ref().map_or("<end of log>".into(), |e| e.to_string());
            let time = d.expected.as_ref().or(d.got.as_ref()).map(|e| rational::format(&e.time)).unwrap_or_default();
            Err(Failure::Semantic(format!(
                "divergence at event {} (t = {time})\n  expected: {}\n  got:      {}",
                d.index,
                show(&d.expected),
                show(&d.got)
            )))
        }
    }
}

/// Runs `job` on every model, at most `jobs` at a time, and reports in input order.
fn fan_out(models: &[PathBuf], jobs: usize, job: impl Fn(&Path) -> Outcome + Sync) -> ExitCode {
    let results: Vec<Mutex<Option<Outcome>>> = models.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, models.len().max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(model) = models.get(k) else { break };
                *results[k].lock().expect("result slot") = Some(job(model));
            });
        }
    });
    let mut code = 0;
    for slot in results {
        match slot.into_inner().expect("result slot").expect("every model ran") {
            Ok(text) => print!("{text}"),
            Err(failure) => {
                eprintln!("error: {}", failure.message());
                code = code.max(failure.code());
            }
        }
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let usage = |f: Failure| {
        eprintln!("error: {}", f.message());
        ExitCode::from(f.code())
    };
    match cli.command {
        Command::Validate(common) => fan_out(&common.models, common.jobs, cmd_validate),
        Command::Simulate { common, engine, horizon, policy, rel_tol, event_tol, format } => {
            let horizon = match parse_horizon(&horizon) {
                Ok(h) => h,
                Err(f) => return usage(f),
            };
            let policy = match parse_policy(&policy) {
                Ok(p) => p,
                Err(f) => return usage(f),
            };
            let tolerances = VcpnTolerances { rel_tol, event_tol, max_step: None };
            fan_out(&common.models, common.jobs, |m| {
                cmd_simulate(m, &common.out, engine, &horizon, &policy, tolerances, &format)
            })
        }
        Command::Analyze { common, macro_graph, evolution_graph: _, horizon, format } => {
            let horizon = match horizon.as_deref().map(parse_horizon).transpose() {
                Ok(h) => h,
                Err(f) => return usage(f),
            };
            fan_out(&common.models, common.jobs, |m| cmd_analyze(m, &common.out, macro_graph, horizon.as_ref(), &format))
        }
        Command::Translate { common, cap, format } => {
            fan_out(&common.models, common.jobs, |m| cmd_translate(m, &common.out, cap, &format))
        }
        Command::CheckEquivalence { common, horizon, policy, cap, ha } => {
            let horizon = match parse_horizon(&horizon) {
                Ok(h) => h,
                Err(f) => return usage(f),
            };
            let policy = match parse_policy(&policy) {
                Ok(p) => p,
                Err(f) => return usage(f),
            };
            fan_out(&common.models, common.jobs, |m| cmd_check_equivalence(m, &horizon, &policy, cap, ha.as_deref()))
        }
    }
}
