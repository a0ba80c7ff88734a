//! The `loccforge` command line.
//!
//! Exit codes: 0 protocol found or nothing to report, 1 input error,
//! 2 impossibility proved or no-go witness found, 3 budget exhausted.

pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use loccforge::io::{
    export_dot, matrix_rows, parse_config, parse_measurement_document, to_json, DocumentError, ProtocolDocument,
};
use loccforge::lift::lift;
use loccforge::nogo::{corollary1_check, theorem1_check, ScanResult};
use loccforge::synth::{orderings, synthesize, Mode, RunConfig, Verdict};
use loccforge::tree::{extract_measurement, LocalParts};
use loccforge::SeparableMeasurement;
use serde::Serialize;

use report::{
    LiftReport, NoGoReport, ProtocolSummary, SynthesisReport, TailEntryReport, TailReport, ValidateReport,
    WitnessReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_IMPOSSIBLE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

pub const CONFIG_ENV: &str = "LOCCFORGE_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "loccforge", version, about = "Search for finite-round LOCC protocols implementing separable measurements")]
pub struct Cli {
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: Format,

    /// JSON run configuration; defaults to the file named by LOCCFORGE_CONFIG
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a measurement document and certify completeness
    Validate { file: PathBuf },
    /// Look for certificates that no finite-round protocol exists
    CheckNogo { file: PathBuf },
    /// Search for a protocol
    Synthesize {
        file: PathBuf,
        /// Maximum number of rounds (default 4)
        #[arg(long)]
        rounds: Option<usize>,
        /// Keep searching after the first protocol and report all orderings
        #[arg(long)]
        exhaustive: bool,
        /// Write the protocol tree as a Graphviz file
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Save the protocol for `lift`
        #[arg(long)]
        save: Option<PathBuf>,
        /// Lower bound on coefficients in the final feasibility check
        #[arg(long)]
        delta: Option<f64>,
        /// Stop after storing this many trees
        #[arg(long)]
        max_trees: Option<usize>,
        /// Largest number of trees merged at once
        #[arg(long)]
        max_subset: Option<usize>,
        /// Stop after solving this many linear programs
        #[arg(long)]
        max_lps: Option<usize>,
        /// Skip the no-go analyzers before searching
        #[arg(long)]
        no_precheck: bool,
        /// Also merge trees whose first measurement is by the free party
        #[arg(long)]
        same_party: bool,
    },
    /// Add the unitaries that realize the measurement's Kraus operators
    Lift {
        file: PathBuf,
        /// Protocol saved by `synthesize --save`
        #[arg(long)]
        protocol: PathBuf,
    },
}

struct Failure(String);

impl From<DocumentError> for Failure {
    fn from(e: DocumentError) -> Self {
        Failure(e.to_string())
    }
}

impl From<loccforge::Error> for Failure {
    fn from(e: loccforge::Error) -> Self {
        Failure(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn load_config(explicit: Option<&Path>) -> Result<RunConfig, Failure> {
    let env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    match explicit.map(Path::to_path_buf).or(env) {
        Some(path) => Ok(parse_config(&read(&path)?).map_err(|e| Failure(format!("{}: {e}", path.display())))?),
        None => Ok(RunConfig::default()),
    }
}

fn load_measurement(path: &Path, cfg: &RunConfig) -> Result<SeparableMeasurement, Failure> {
    let doc = parse_measurement_document(&read(path)?).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    Ok(doc.to_measurement(&cfg.tolerances)?)
}

fn emit<T: Serialize>(out: &mut dyn Write, format: Format, report: &T, text: String) {
    let s = match format {
        Format::Json => to_json(report),
        Format::Text => text,
    };
    let _ = out.write_all(s.as_bytes());
}

/// Runs the command line and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INPUT
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Validate { file } => validate(file, &cfg, cli.format, out),
        Command::CheckNogo { file } => check_nogo(file, &cfg, cli.format, out),
        Command::Synthesize {
            file,
            rounds,
            exhaustive,
            dot,
            save,
            delta,
            max_trees,
            max_subset,
            max_lps,
            no_precheck,
            same_party,
        } => {
            if let Some(r) = rounds {
                cfg.rounds = *r;
            }
            if *exhaustive {
                cfg.mode = Mode::Exhaustive;
            }
            if let Some(d) = delta {
                cfg.delta = *d;
            }
            if let Some(v) = max_trees {
                cfg.caps.max_trees = *v;
            }
            if let Some(v) = max_subset {
                cfg.caps.max_subset = *v;
            }
            if let Some(v) = max_lps {
                cfg.caps.max_lps = *v;
            }
            if *no_precheck {
                cfg.nogo_precheck = false;
            }
            if *same_party {
                cfg.allow_same_party = true;
            }
            cfg.validate()?;
            run_synthesize(file, &cfg, dot.as_deref(), save.as_deref(), cli.format, out)
        }
        Command::Lift { file, protocol } => run_lift(file, protocol, &cfg, cli.format, out),
    }
}

fn validate(file: &Path, cfg: &RunConfig, format: Format, out: &mut dyn Write) -> Result<i32, Failure> {
    let doc = parse_measurement_document(&read(file)?).map_err(|e| Failure(format!("{}: {e}", file.display())))?;
    let parties = doc.parties.iter().map(|p| p.name.clone()).collect();
    let operators = doc.operators.len();
    let mut report = ValidateReport {
        valid: false,
        parties,
        operators,
        diagnostics: Vec::new(),
        weights: None,
        residual: None,
        unique_weights: None,
    };
    match doc.to_measurement(&cfg.tolerances) {
        Ok(m) => {
            report.operators = m.num_ops();
            match m.completeness_certificate(cfg.delta, &cfg.tolerances) {
                Ok(cert) => {
                    report.valid = true;
                    report.weights = Some(cert.weights);
                    report.residual = Some(cert.residual);
                    report.unique_weights = Some(cert.unique);
                }
                Err(e) => report.diagnostics.push(format!("not complete: {e}")),
            }
        }
        Err(DocumentError::Invalid(diags)) => {
            report.diagnostics = diags.iter().map(ToString::to_string).collect();
        }
        Err(e) => report.diagnostics.push(e.to_string()),
    }
    let code = if report.valid { EXIT_OK } else { EXIT_INPUT };
    emit(out, format, &report, report.text());
    Ok(code)
}

fn nogo_report(m: &SeparableMeasurement, cfg: &RunConfig) -> Result<NoGoReport, Failure> {
    let tol = &cfg.tolerances;
    let single = corollary1_check(m, tol)?.map(|w| WitnessReport::new(&w, m));
    let (bipartition, exhaustive) = match theorem1_check(m, cfg.caps.theorem1_exhaustive_n, tol)? {
        ScanResult::Witness(w) => (Some(WitnessReport::new(&w, m)), true),
        ScanResult::NoneFound { exhaustive } => (None, exhaustive),
    };
    Ok(NoGoReport {
        singular_extreme_ray: single,
        bipartition,
        exhaustive,
    })
}

fn check_nogo(file: &Path, cfg: &RunConfig, format: Format, out: &mut dyn Write) -> Result<i32, Failure> {
    let m = load_measurement(file, cfg)?;
    let report = nogo_report(&m, cfg)?;
    let code = if report.found() { EXIT_IMPOSSIBLE } else { EXIT_OK };
    emit(out, format, &report, report.text());
    Ok(code)
}

fn names(m: &SeparableMeasurement, order: &[usize]) -> Vec<String> {
    order.iter().map(|&a| m.parties()[a].name.clone()).collect()
}

fn run_synthesize(
    file: &Path,
    cfg: &RunConfig,
    dot: Option<&Path>,
    save: Option<&Path>,
    format: Format,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let m = load_measurement(file, cfg)?;
    let result = synthesize(&m, cfg)?;
    let mut report = SynthesisReport {
        verdict: "",
        reason: None,
        rounds: result.stats.rounds,
        trees: result.stats.trees,
        lps: result.stats.lps,
        candidates: result.stats.candidates,
        protocol: None,
        protocols_found: result.protocols.len(),
        witness: None,
    };
    let code = match &result.verdict {
        Verdict::Protocol(p) => {
            report.verdict = "protocol";
            let parts = LocalParts::from_measurement(&m);
            let ext = extract_measurement(&p.tree, &parts, &p.assignment, &cfg.tolerances)?;
            let mut orders: Vec<Vec<usize>> = orderings(&result.protocols);
            orders.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
            let longest = orderings(std::slice::from_ref(p))
                .into_iter()
                .max_by(|a, b| a.len().cmp(&b.len()).then_with(|| b.cmp(a)))
                .unwrap_or_default();
            report.protocol = Some(ProtocolSummary {
                round: p.round,
                order: names(&m, &longest),
                orders: orders.iter().map(|o| names(&m, o)).collect(),
                leaves: p.tree.leaves().len(),
                nodes: p.tree.num_nodes(),
                depth: p.tree.depth(),
                weights: ext.weights_for(&m, &cfg.tolerances)?,
                residual: ext.completeness_residual()?,
            });
            if let Some(path) = dot {
                write_file(path, &export_dot(&p.tree, &m, Some(&p.assignment)))?;
            }
            if let Some(path) = save {
                write_file(path, &to_json(&ProtocolDocument::new(&m, &p.tree, &p.assignment, p.round)))?;
            }
            EXIT_OK
        }
        Verdict::ProvedImpossible { witness } => {
            report.verdict = "impossible";
            report.witness = witness.as_ref().map(|w| WitnessReport::new(w, &m));
            if report.witness.is_none() {
                report.reason = Some("no new mergers are possible".into());
            }
            EXIT_IMPOSSIBLE
        }
        Verdict::BudgetExhausted { reason, .. } => {
            report.verdict = "budget-exhausted";
            report.reason = Some(
                serde_json::to_value(reason)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default(),
            );
            EXIT_BUDGET
        }
    };
    emit(out, format, &report, report.text());
    Ok(code)
}

fn run_lift(file: &Path, protocol: &Path, cfg: &RunConfig, format: Format, out: &mut dyn Write) -> Result<i32, Failure> {
    let m = load_measurement(file, cfg)?;
    let doc = ProtocolDocument::parse(&read(protocol)?).map_err(|e| Failure(format!("{}: {e}", protocol.display())))?;
    if !doc.matches(&m) {
        return Err(Failure("protocol was saved for a different measurement".into()));
    }
    let parts = LocalParts::from_measurement(&m);
    if !loccforge::synth::verify_protocol(&doc.tree, &doc.assignment, &m, &parts, &cfg.tolerances)? {
        return Err(Failure("saved protocol does not implement the measurement".into()));
    }
    let lifted = lift(&doc.tree, &doc.assignment, &m, &cfg.tolerances)?;
    let kraus = m.kraus().expect("lift succeeded");
    let mut max_residual: f64 = 0.0;
    let mut tails = Vec::with_capacity(lifted.tails.len());
    for tail in &lifted.tails {
        let errors = tail.reconstruction_errors(&m)?;
        let entries = tail
            .entries
            .iter()
            .zip(errors)
            .map(|(e, (res, norm))| {
                let rel = res / (1.0 + norm);
                max_residual = max_residual.max(rel);
                TailEntryReport {
                    kraus: kraus.labels[e.kraus].clone(),
                    probability: e.probability,
                    unitaries: e.unitaries.iter().map(matrix_rows).collect(),
                    residual: rel,
                }
            })
            .collect();
        tails.push(TailReport {
            leaf: tail.leaf,
            operator: m.labels()[tail.op].clone(),
            share: tail.share,
            entries,
        });
    }
    let report = LiftReport {
        coin_rounds: lifted.coin_rounds,
        max_residual,
        tails,
    };
    emit(out, format, &report, report.text());
    Ok(EXIT_OK)
}
