//! Command-line front end for the transfinite machine engine.
//!
//! Results go to stdout, diagnostics to stderr. Identical invocations
//! produce byte-identical output. Exit codes: 0 success, 1 usage error,
//! 2 input parse or validation error, 3 horizon exceeded under `--strict`,
//! 4 internal invariant violation.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ittm::forcing::{self, CollapseReport, ForcedFactTable, RowView};
use ittm::runner::{Eventual, Trace, TraceFile};
use ittm::{
    asm, classify_eventual, jump_approx, programs, BitGenerator, Condition, ForcingConfig,
    OrderSpec, Program, ProgramEnumeration, RunConfig, RunOutcome, Runner, Tape,
};

#[derive(Parser)]
#[command(
    name = "ittm",
    version,
    about = "Run, classify, enumerate, and shadow transfinite machine programs",
    after_help = "Exit codes: 0 success, 1 usage, 2 bad input, 3 horizon under --strict, \
                  4 internal invariant violation."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Human-readable lines.
    Text,
    /// JSON that round-trips through the library serializations.
    Structured,
}

#[derive(Args, Clone, Copy)]
struct HorizonFlags {
    /// Successor steps explored per block before giving up.
    #[arg(long, default_value_t = 4096)]
    max_steps: usize,
    /// Highest limit level; reachable stages stay below w^(tower+1).
    #[arg(long, default_value_t = 4)]
    tower: u32,
    /// Snapshots or records retained per level.
    #[arg(long, default_value_t = 512)]
    max_history: usize,
}

impl HorizonFlags {
    fn config(self) -> RunConfig {
        RunConfig {
            max_steps_per_block: self.max_steps,
            max_tower: self.tower,
            max_history: self.max_history,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Assemble a program file and print its canonical listing.
    Asm {
        /// Path to a `.itm` source file.
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run a program on a tape expression and print the outcome.
    Run {
        /// Library program name or path to a `.itm` file.
        #[arg(long)]
        program: String,
        /// Tape expression: const(0|1), periodic(bits;bits), ordercode(spec).
        #[arg(long)]
        input: String,
        /// Oracle tape expression, for programs with four-component rules.
        #[arg(long)]
        oracle: Option<String>,
        /// Also print the stage-by-stage history.
        #[arg(long)]
        trace: bool,
        /// Exit 3 when the run exceeds its horizon.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        horizon: HorizonFlags,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run a program and classify the long-run behavior of its output tape.
    Classify {
        #[arg(long)]
        program: String,
        #[arg(long)]
        input: String,
        #[arg(long)]
        oracle: Option<String>,
        /// Exit 3 when the verdict is unknown because the horizon ran out.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        horizon: HorizonFlags,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Partition the first programs of the canonical enumeration by outcome.
    Jump {
        #[arg(long)]
        input: String,
        /// How many programs, starting from index 0.
        #[arg(long, default_value_t = 100)]
        count: u64,
        /// State budget of the enumeration.
        #[arg(long, default_value_t = 4)]
        max_states: u16,
        /// Exit 3 when any program stays unresolved.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        horizon: HorizonFlags,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Decide well-foundedness of an order spec with the native oracle.
    Wo {
        /// Order spec: fin(n), omega, omegastar, sum(s,t), prod(s,t).
        #[arg(long)]
        spec: String,
        /// Also run the library semidecider on the coded order and compare.
        #[arg(long)]
        run_count_through: bool,
        #[command(flatten)]
        horizon: HorizonFlags,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print stage-by-stage forced facts for a program.
    Force {
        #[arg(long)]
        program: String,
        /// Successor stages to derive.
        #[arg(long, default_value_t = 6)]
        steps: usize,
        /// Cells per tape the tables describe.
        #[arg(long, default_value_t = 64)]
        window: u64,
        /// Longest input prefix used as a forcing condition.
        #[arg(long, default_value_t = 16)]
        depth: usize,
        /// Also derive the table at the first limit stage.
        #[arg(long)]
        limit: bool,
        /// Collapse the tables against this concrete input and report.
        #[arg(long)]
        collapse: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// List the library programs.
    Stdlib {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Re-render the history of a structured trace file.
    History {
        /// Path to a JSON trace produced by `run --format structured`.
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

enum CliError {
    Input(String),
    Horizon(String),
}

impl CliError {
    fn input(msg: impl Into<String>) -> CliError {
        CliError::Input(msg.into())
    }
}

fn main() {
    // die quietly when the consumer closes the pipe, as line tools do
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let code = match std::panic::catch_unwind(real_main) {
        Ok(code) => code,
        Err(_) => {
            eprintln!("internal invariant violation");
            4
        }
    };
    std::process::exit(code);
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => 0,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Horizon(msg)) => {
            eprintln!("{msg}");
            3
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Asm { file, format } => cmd_asm(&file, format),
        Command::Run { program, input, oracle, trace, strict, horizon, format } => {
            cmd_run(&program, &input, oracle.as_deref(), trace, strict, horizon.config(), format)
        }
        Command::Classify { program, input, oracle, strict, horizon, format } => {
            cmd_classify(&program, &input, oracle.as_deref(), strict, horizon.config(), format)
        }
        Command::Jump { input, count, max_states, strict, horizon, format } => {
            cmd_jump(&input, count, max_states, strict, horizon.config(), format)
        }
        Command::Wo { spec, run_count_through, horizon, format } => {
            cmd_wo(&spec, run_count_through, horizon.config(), format)
        }
        Command::Force { program, steps, window, depth, limit, collapse, format } => {
            let cfg = ForcingConfig { window, condition_len: depth, max_steps: steps.max(1) };
            cmd_force(&program, steps, limit, collapse.as_deref(), &cfg, format)
        }
        Command::Stdlib { format } => cmd_stdlib(format),
        Command::History { file, format } => cmd_history(&file, format),
    }
}

/// Library name first, then the filesystem.
fn load_program(source: &str) -> Result<Program, CliError> {
    if let Ok(p) = programs::stdlib_program(source) {
        return Ok(p);
    }
    let text = std::fs::read_to_string(source)
        .map_err(|e| CliError::input(format!("cannot read {source}: {e}")))?;
    asm::assemble(&text).map_err(|e| CliError::input(format!("{source}: {e}")))
}

fn parse_generator(expr: &str) -> Result<BitGenerator, CliError> {
    expr.parse::<BitGenerator>().map_err(|e| CliError::input(format!("{expr:?}: {e}")))
}

fn parse_tape(expr: &str) -> Result<Tape, CliError> {
    parse_generator(expr).map(Tape::new)
}

fn outcome_caps(o: &RunOutcome) -> String {
    match o {
        RunOutcome::Halted { stage, .. } => format!("HALTED stage={stage}"),
        RunOutcome::Diverges { witness, .. } => format!("DIVERGES level={}", witness.level),
        RunOutcome::HorizonExceeded { stage_reached } => format!("HORIZON stage={stage_reached}"),
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("library types serialize")
}

fn cmd_asm(file: &PathBuf, format: Format) -> Result<(), CliError> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", file.display())))?;
    let p = asm::assemble(&text).map_err(|e| CliError::input(format!("{}: {e}", file.display())))?;
    match format {
        Format::Text => print!("{}", asm::disassemble(&p)),
        Format::Structured => println!("{}", json(&p)),
    }
    Ok(())
}

/// Runs `program` on `input`, validating the oracle arity up front so a
/// mismatch is a diagnosable input error rather than a crash.
fn execute(
    program: &str,
    input: &str,
    oracle: Option<&str>,
    cfg: RunConfig,
    with_trace: bool,
) -> Result<(Program, RunOutcome, Trace), CliError> {
    let p = load_program(program)?;
    let x = parse_tape(input)?;
    let z = oracle.map(parse_generator).transpose()?;
    if p.uses_oracle() && z.is_none() {
        return Err(CliError::input(format!("{program} scans an oracle component; pass --oracle")));
    }
    if !p.uses_oracle() && z.is_some() {
        return Err(CliError::input(format!("{program} takes no oracle")));
    }
    let mut runner = Runner::new(&p).config(cfg).record_trace(with_trace);
    if let Some(z) = &z {
        runner = runner.oracle(z);
    }
    let (outcome, trace) = runner.run(x);
    Ok((p, outcome, trace))
}

fn cmd_run(
    program: &str,
    input: &str,
    oracle: Option<&str>,
    trace: bool,
    strict: bool,
    cfg: RunConfig,
    format: Format,
) -> Result<(), CliError> {
    let (p, outcome, tr) = execute(program, input, oracle, cfg, trace)?;
    match format {
        Format::Text => {
            if trace {
                print!("{}", TraceFile::new(&p, tr, outcome.clone()).history());
            }
            println!("{}", outcome_caps(&outcome));
        }
        Format::Structured => {
            println!("{}", json(&TraceFile::new(&p, tr, outcome.clone())));
        }
    }
    if strict {
        if let RunOutcome::HorizonExceeded { stage_reached } = &outcome {
            return Err(CliError::Horizon(format!("horizon exceeded at stage {stage_reached}")));
        }
    }
    Ok(())
}

fn cmd_classify(
    program: &str,
    input: &str,
    oracle: Option<&str>,
    strict: bool,
    cfg: RunConfig,
    format: Format,
) -> Result<(), CliError> {
    let (_, outcome, _) = execute(program, input, oracle, cfg, false)?;
    let eventual = classify_eventual(&outcome);
    match format {
        Format::Text => match &eventual {
            Eventual::Stabilizes(t) => println!("STABILIZES output={t}"),
            other => println!("{}", other.label().to_uppercase()),
        },
        Format::Structured => println!("{}", json(&eventual)),
    }
    if strict && matches!(eventual, Eventual::Unknown) {
        return Err(CliError::Horizon("classification unresolved within the horizon".into()));
    }
    Ok(())
}

fn cmd_jump(
    input: &str,
    count: u64,
    max_states: u16,
    strict: bool,
    cfg: RunConfig,
    format: Format,
) -> Result<(), CliError> {
    let x = parse_tape(input)?;
    let enumeration = ProgramEnumeration::new(max_states, false)
        .map_err(|e| CliError::input(e.to_string()))?;
    let approx = jump_approx(&enumeration, &x, count, cfg);
    match format {
        Format::Text => {
            println!("input {input}");
            println!(
                "halted {} diverges {} unknown {}",
                approx.halted.len(),
                approx.diverges.len(),
                approx.unknown.len()
            );
            for i in 0..count {
                if let Some(stage) = approx.halted.get(&i) {
                    println!("{i}\thalted stage={stage}");
                } else if let Some(w) = approx.diverges.get(&i) {
                    println!("{i}\tdiverges level={}", w.level);
                } else {
                    println!("{i}\tunknown");
                }
            }
        }
        Format::Structured => println!("{}", json(&approx)),
    }
    if strict && !approx.unknown.is_empty() {
        return Err(CliError::Horizon(format!(
            "{} programs unresolved within the horizon",
            approx.unknown.len()
        )));
    }
    Ok(())
}

fn cmd_wo(
    spec: &str,
    run_count_through: bool,
    cfg: RunConfig,
    format: Format,
) -> Result<(), CliError> {
    let spec: OrderSpec =
        spec.parse().map_err(|e| CliError::input(format!("{spec:?}: {e}")))?;
    let wf = programs::well_founded(&spec);
    let ty = programs::order_type(&spec).ok();
    if run_count_through {
        let report = programs::count_through_contract(&spec, cfg);
        match format {
            Format::Text => {
                print_wo_header(&spec, wf, ty.as_ref());
                println!("run {}", outcome_caps(&report.outcome));
                println!("verdict {}", report.verdict);
            }
            Format::Structured => println!("{}", json(&report)),
        }
    } else {
        match format {
            Format::Text => print_wo_header(&spec, wf, ty.as_ref()),
            Format::Structured => {
                let row = serde_json::json!({
                    "spec": spec,
                    "well_founded": wf,
                    "order_type": ty,
                });
                println!("{}", serde_json::to_string_pretty(&row).expect("plain values"));
            }
        }
    }
    Ok(())
}

fn print_wo_header(spec: &OrderSpec, wf: bool, ty: Option<&ittm::Ordinal>) {
    println!("spec {spec}");
    println!("well-founded {wf}");
    println!("order type {}", ty.map_or_else(|| "-".to_string(), ToString::to_string));
}

fn condition_text(c: &Condition) -> String {
    if c.is_empty() {
        "e".to_string()
    } else {
        c.to_string()
    }
}

fn render_table(t: &ForcedFactTable, p: &Program, out: &mut String) {
    let _ = writeln!(out, "stage {}", t.stage());
    for (fact, row) in t.rows() {
        let cell = match row {
            RowView::Antichain(cs) => {
                let mut s = String::new();
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        s.push(' ');
                    }
                    s.push_str(&condition_text(c));
                }
                s
            }
            RowView::AnyWithInputBit { position, bit } => {
                format!("any(input[{position}]={})", u8::from(bit))
            }
        };
        let _ = writeln!(out, "  {} <- {}", fact.label(p), cell);
    }
}

fn render_collapse(report: &CollapseReport, p: &Program, against: &str, out: &mut String) {
    let _ = writeln!(out, "collapse against {against}");
    let _ = writeln!(out, "stages compared {}", report.steps_compared);
    let _ = writeln!(out, "limit compared {}", report.limit_compared);
    if let Some(err) = &report.aborted {
        let _ = writeln!(out, "aborted: {err}");
    }
    for m in &report.mismatches {
        let _ = writeln!(
            out,
            "mismatch at stage {}: {} under {}",
            m.stage,
            m.fact.label(p),
            condition_text(&m.condition)
        );
    }
    let _ = writeln!(out, "result {}", if report.passes() { "PASS" } else { "FAIL" });
}

fn cmd_force(
    program: &str,
    steps: usize,
    limit: bool,
    collapse: Option<&str>,
    cfg: &ForcingConfig,
    format: Format,
) -> Result<(), CliError> {
    let p = load_program(program)?;
    if p.uses_oracle() {
        return Err(CliError::input("forced-fact tables cover oracle-free programs"));
    }
    let mut tables = vec![forcing::initial_table(&p, cfg)];
    let mut abort = None;
    for _ in 0..steps {
        match forcing::boolean_step(&p, tables.last().expect("nonempty"), cfg) {
            Ok(t) => tables.push(t),
            Err(e) => {
                abort = Some(e);
                break;
            }
        }
    }
    let limit_result = if limit && abort.is_none() {
        Some(forcing::boolean_limit(&tables, cfg))
    } else {
        None
    };
    let collapse_report = match collapse {
        Some(expr) if abort.is_none() => {
            let x = parse_tape(expr)?;
            Some((expr, forcing::collapse_check(&p, &x, cfg)))
        }
        _ => None,
    };
    match format {
        Format::Text => {
            let mut out = String::new();
            for t in &tables {
                render_table(t, &p, &mut out);
            }
            match &limit_result {
                Some(Ok(t)) => render_table(t, &p, &mut out),
                Some(Err(e)) => {
                    let _ = writeln!(out, "limit unavailable ({e})");
                }
                None => {}
            }
            if let Some((expr, report)) = &collapse_report {
                render_collapse(report, &p, expr, &mut out);
            }
            print!("{out}");
        }
        Format::Structured => {
            let row = serde_json::json!({
                "tables": tables,
                "limit": limit_result.as_ref().and_then(|r| r.as_ref().ok()),
                "limit_error": limit_result
                    .as_ref()
                    .and_then(|r| r.as_ref().err())
                    .map(ToString::to_string),
                "collapse": collapse_report.as_ref().map(|(_, r)| r),
            });
            println!("{}", serde_json::to_string_pretty(&row).expect("library types serialize"));
        }
    }
    match abort {
        Some(e) => Err(CliError::input(format!("derivation stopped: {e}"))),
        None => Ok(()),
    }
}

fn cmd_stdlib(format: Format) -> Result<(), CliError> {
    let entries = programs::stdlib();
    match format {
        Format::Text => {
            for e in &entries {
                println!("{:<24} {:>2} states  {}", e.name, e.program.state_count(), e.certified);
            }
        }
        Format::Structured => {
            let rows: Vec<serde_json::Value> = entries
                .iter()
                .map(|e| {
                    serde_json::json!({
                        "name": e.name,
                        "states": e.program.state_count(),
                        "certified": e.certified,
                    })
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&rows).expect("plain values"));
        }
    }
    Ok(())
}

fn cmd_history(file: &PathBuf, format: Format) -> Result<(), CliError> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", file.display())))?;
    let tf: TraceFile = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{}: not a trace file: {e}", file.display())))?;
    match format {
        Format::Text => print!("{}", tf.history()),
        Format::Structured => println!("{}", json(&tf)),
    }
    Ok(())
}
