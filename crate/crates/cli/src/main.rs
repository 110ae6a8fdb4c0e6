mod inputs;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};

use dynshort::concrete::{run_concrete, ConcreteState, Outcome};
use dynshort::domain::Domain;
use dynshort::interp::{views_from_json, AnalysisSettings, InterpError, ViewMap};
use dynshort::lang::{format_program, parse_program, validate, Program};
use dynshort::oracle::{check_run_validity, check_soundness, generate_program, OracleCaps, Shape, ValidityReport};
use dynshort::sealed::Budgets;
use dynshort::shortcut::{
    analyze_with_shortcuts, compare_precision, shortcut_graph_dot, Metrics, ShortcutPolicy, ShortcutResult,
};

/// Failures that map to an exit code other than success.
#[derive(Debug)]
enum Failure {
    /// Bad input, configuration or file: exit 3.
    Config(String),
    /// The analysis gave up: exit 1.
    Analysis(String),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Config(e.to_string())
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn config<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Config(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Parser, Debug)]
#[command(name = "dynshort", version, about = "Abstract interpretation with dynamic shortcuts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute a program on concrete inputs.
    Run(RunArgs),
    /// Analyze a program from abstract inputs.
    Analyze(AnalyzeArgs),
    /// Check an analysis result against concrete executions.
    Check(CheckArgs),
    /// Compare two results for precision and cost.
    Compare(CompareArgs),
    /// Print a random program and its inputs.
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Program source file.
    #[arg(long)]
    program: PathBuf,
    /// Inputs as inline JSON or a path to a JSON file.
    #[arg(long)]
    inputs: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalysisOpts {
    /// `sign` or `kset:<k>`.
    #[arg(long, default_value = "sign", value_parser = parse_domain)]
    domain: Domain,
    /// `off`, `every-view` or `function`.
    #[arg(long, default_value = "off", value_parser = parse_policy)]
    policy: ShortcutPolicy,
    /// Step budget of each sealed run.
    #[arg(long, default_value_t = Budgets::default().max_steps, value_parser = positive)]
    budget_steps: usize,
    /// Wall-clock budget of each sealed run.
    #[arg(long, default_value_t = Budgets::default().wall_clock.as_millis() as usize, value_parser = positive)]
    timeout_ms: usize,
}

impl AnalysisOpts {
    fn budgets(&self) -> Budgets {
        Budgets {
            max_steps: self.budget_steps,
            wall_clock: std::time::Duration::from_millis(self.timeout_ms as u64),
        }
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 10_000, value_parser = positive)]
    budget_steps: usize,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    opts: AnalysisOpts,
    /// Also write the shortcut event graph in DOT form.
    #[arg(long)]
    emit_graph: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    opts: AnalysisOpts,
    /// A result file from `analyze`; without one the program is analyzed
    /// first and its sealed runs are checked for validity too.
    #[arg(long)]
    result: Option<PathBuf>,
    /// Integers enumerated from an infinite abstract value: -n..=n.
    #[arg(long, default_value_t = OracleCaps::default().int_cap, value_parser = positive_i64)]
    cap_int: i64,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Two result files from `analyze`.
    #[arg(long, num_args = 1)]
    result: Vec<PathBuf>,
    /// Program to analyze under two policies instead of reading results.
    #[arg(long, requires = "inputs")]
    program: Option<PathBuf>,
    #[arg(long)]
    inputs: Option<String>,
    #[arg(long, default_value = "sign", value_parser = parse_domain)]
    domain: Domain,
    /// Two policies, e.g. `--policy every-view --policy off`.
    #[arg(long, value_parser = parse_policy)]
    policy: Vec<ShortcutPolicy>,
    #[arg(long, default_value_t = Budgets::default().max_steps, value_parser = positive)]
    budget_steps: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "sign", value_parser = parse_domain)]
    domain: Domain,
    #[arg(long, default_value_t = Shape::default().max_lines, value_parser = positive)]
    max_lines: usize,
    #[arg(long, default_value_t = Shape::default().max_calls)]
    max_calls: usize,
    #[arg(long)]
    no_objects: bool,
    /// `text` prints the program; `json` bundles program and inputs.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the inputs when printing text.
    #[arg(long)]
    inputs_out: Option<PathBuf>,
}

fn parse_domain(s: &str) -> std::result::Result<Domain, String> {
    s.parse().map_err(|e: dynshort::domain::DomainError| e.to_string())
}

fn parse_policy(s: &str) -> std::result::Result<ShortcutPolicy, String> {
    s.parse().map_err(|e: dynshort::shortcut::BadPolicy| e.to_string())
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("expected a positive integer, found {s:?}")),
    }
}

fn positive_i64(s: &str) -> std::result::Result<i64, String> {
    match s.parse::<i64>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("expected a positive integer, found {s:?}")),
    }
}

fn load_program(path: &Path) -> Result<Program> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let p = parse_program(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let diags = validate(&p);
    if !diags.is_empty() {
        let msgs: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        return Err(Failure::Config(format!("{}: {}", path.display(), msgs.join("; "))));
    }
    Ok(p)
}

fn read_json(path: &Path) -> Result<Json> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn pretty(j: &Json) -> String {
    serde_json::to_string_pretty(j).expect("JSON values serialize")
}

fn analyze(program: &Program, initial: &ViewMap, opts: &AnalysisOpts) -> Result<ShortcutResult> {
    let settings = AnalysisSettings::new(opts.domain);
    analyze_with_shortcuts(program, initial, opts.policy, opts.budgets(), &settings).map_err(|e| match e {
        InterpError::NonEnumerableKey { .. } | InterpError::IterationCapExceeded { .. } => {
            Failure::Analysis(e.to_string())
        }
        other => Failure::Config(other.to_string()),
    })
}

/// The result schema of the shortcut engine, tagged with its domain.
fn result_json(r: &ShortcutResult, domain: Domain, policy: ShortcutPolicy) -> Json {
    let mut j = r.to_json();
    j["domain"] = json!(domain.to_string());
    j["policy"] = json!(policy.to_string());
    j
}

fn views_text(views: &ViewMap) -> String {
    let mut out = String::new();
    for (l, s) in views {
        let vars: Vec<String> = s.memory.iter().map(|(loc, v)| format!("{loc} = {v}")).collect();
        out.push_str(&format!("{l} [{}] {}\n", s.env, vars.join(", ")));
    }
    out
}

fn cmd_run(args: &RunArgs) -> Result<u8> {
    let p = load_program(&args.common.program)?;
    let vars = inputs::concrete(args.common.inputs.as_deref())?;
    let run = run_concrete(&p, ConcreteState::initial(&p, vars), args.budget_steps);
    let (code, outcome) = match &run.outcome {
        Outcome::Halt(v) => (0, json!({ "halt": v.to_json() })),
        Outcome::Stuck(e) => (1, json!({ "stuck": e.to_string() })),
        Outcome::BudgetExceeded => (4, json!("budget-exceeded")),
    };
    log::info!("run finished after {} states", run.trace.len());
    let text = match args.common.format {
        Format::Json => pretty(&json!({
            "trace": run.trace.iter().map(ConcreteState::to_json).collect::<Vec<_>>(),
            "outcome": outcome,
        })),
        Format::Text => {
            let mut out = String::new();
            for s in &run.trace {
                let vars: Vec<String> = s.memory.iter().map(|(l, v)| format!("{l} = {v}")).collect();
                out.push_str(&format!("{} [{}] {}\n", s.label, s.env, vars.join(", ")));
            }
            match &run.outcome {
                Outcome::Halt(v) => out.push_str(&format!("halt {v}\n")),
                Outcome::Stuck(e) => out.push_str(&format!("stuck: {e}\n")),
                Outcome::BudgetExceeded => out.push_str("budget exceeded\n"),
            }
            out
        }
    };
    emit(args.common.out.as_deref(), &text)?;
    Ok(code)
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<u8> {
    let p = load_program(&args.common.program)?;
    let initial = inputs::abstract_views(&p, args.common.inputs.as_deref(), args.opts.domain)?;
    let r = analyze(&p, &initial, &args.opts)?;
    log::info!(
        "analysis: {} iterations, {} shortcuts taken",
        r.iterations,
        r.metrics.shortcuts_taken
    );
    let text = match args.common.format {
        Format::Json => pretty(&result_json(&r, args.opts.domain, args.opts.policy)),
        Format::Text => {
            let m = &r.metrics;
            format!(
                "{}abstract_transitions {}\nsealed_steps {}\nshortcuts_taken {}\n",
                views_text(&r.views),
                m.abstract_transitions,
                m.sealed_steps,
                m.shortcuts_taken
            )
        }
    };
    emit(args.common.out.as_deref(), &text)?;
    if let Some(g) = &args.emit_graph {
        fs::write(g, shortcut_graph_dot(&r.shortcuts))?;
    }
    Ok(0)
}

fn result_domain(j: &Json, fallback: Domain) -> Result<Domain> {
    match j.get("domain").and_then(Json::as_str) {
        Some(d) => parse_domain(d).map_err(Failure::Config),
        None => Ok(fallback),
    }
}

fn load_result(path: &Path, fallback: Domain) -> Result<(Domain, ViewMap, Option<Metrics>)> {
    let j = read_json(path)?;
    let domain = result_domain(&j, fallback)?;
    let views = j
        .get("views")
        .ok_or_else(|| Failure::Config(format!("{}: no `views` field", path.display())))?;
    let views = views_from_json(views, domain).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let metrics = j.get("metrics").map(|m| Metrics {
        abstract_transitions: m["abstract_transitions"].as_u64().unwrap_or(0),
        sealed_steps: m["sealed_steps"].as_u64().unwrap_or(0),
        shortcuts_taken: m["shortcuts_taken"].as_u64().unwrap_or(0),
    });
    Ok((domain, views, metrics))
}

fn cmd_check(args: &CheckArgs) -> Result<u8> {
    let p = load_program(&args.common.program)?;
    let caps = OracleCaps {
        int_cap: args.cap_int,
        ..OracleCaps::default()
    };
    let (domain, views, validity) = match &args.result {
        Some(path) => {
            let (d, v, _) = load_result(path, args.opts.domain)?;
            (d, v, None)
        }
        None => {
            let initial = inputs::abstract_views(&p, args.common.inputs.as_deref(), args.opts.domain)?;
            let r = analyze(&p, &initial, &args.opts)?;
            let mut valid = ValidityReport::default();
            for pair in &r.sealed_runs {
                valid.merge(check_run_validity(&p, pair, &caps, caps.max_initial_states));
            }
            (args.opts.domain, r.views, Some(valid))
        }
    };
    let initial = inputs::abstract_views(&p, args.common.inputs.as_deref(), domain)?;
    let sound = check_soundness(&p, &views, &initial, &caps);
    let pass = sound.passed() && validity.as_ref().is_none_or(ValidityReport::passed);
    let text = match args.common.format {
        Format::Json => {
            let mut j = json!({ "pass": pass, "soundness": sound.to_json() });
            if let Some(v) = &validity {
                j["validity"] = v.to_json();
            }
            pretty(&j)
        }
        Format::Text => {
            let mut out = format!(
                "soundness: {} ({} states checked, {} violations, {} skipped)\n",
                if sound.passed() { "pass" } else { "FAIL" },
                sound.states_checked,
                sound.violations.len(),
                sound.skipped.len()
            );
            for v in sound.violations.iter().take(10) {
                out.push_str(&format!("  at {}: {}\n", v.view, v.reason));
            }
            for s in &sound.skipped {
                out.push_str(&format!("  skipped: {s}\n"));
            }
            if let Some(v) = &validity {
                out.push_str(&format!(
                    "validity: {} ({} confirmed, {} justified, {} skipped, {} failures)\n",
                    if v.passed() { "pass" } else { "FAIL" },
                    v.next_confirmed,
                    v.bot_justified,
                    v.skipped.len(),
                    v.failures.len()
                ));
            }
            out
        }
    };
    emit(args.common.out.as_deref(), &text)?;
    Ok(if pass { 0 } else { 2 })
}

fn cmd_compare(args: &CompareArgs) -> Result<u8> {
    let sides: Vec<(String, Domain, ViewMap, Option<Metrics>)> = match (&args.program, args.result.len()) {
        (None, 2) => args
            .result
            .iter()
            .map(|path| {
                let (d, v, m) = load_result(path, args.domain)?;
                Ok((path.display().to_string(), d, v, m))
            })
            .collect::<Result<_>>()?,
        (Some(path), 0) => {
            if args.policy.len() != 2 {
                return Err(Failure::Config("compare needs exactly two --policy values".into()));
            }
            let p = load_program(path)?;
            let initial = inputs::abstract_views(&p, args.inputs.as_deref(), args.domain)?;
            args.policy
                .iter()
                .map(|policy| {
                    let opts = AnalysisOpts {
                        domain: args.domain,
                        policy: *policy,
                        budget_steps: args.budget_steps,
                        timeout_ms: Budgets::default().wall_clock.as_millis() as usize,
                    };
                    let r = analyze(&p, &initial, &opts)?;
                    Ok((policy.to_string(), args.domain, r.views, Some(r.metrics)))
                })
                .collect::<Result<_>>()?
        }
        _ => {
            return Err(Failure::Config(
                "compare needs two --result files, or --program with two --policy values".into(),
            ))
        }
    };
    let (a, b) = (&sides[0], &sides[1]);
    if a.1 != b.1 {
        return Err(Failure::Config(format!("DomainMismatch: {} vs {}", a.1, b.1)));
    }
    let report = compare_precision(&a.2, &b.2).map_err(config)?;
    let delta = match (&a.3, &b.3) {
        (Some(x), Some(y)) => Some(json!({
            "abstract_transitions": [x.abstract_transitions, y.abstract_transitions],
            "sealed_steps": [x.sealed_steps, y.sealed_steps],
            "shortcuts_taken": [x.shortcuts_taken, y.shortcuts_taken],
        })),
        _ => None,
    };
    let text = match args.format {
        Format::Json => pretty(&json!({
            "left": a.0,
            "right": b.0,
            "equal_everywhere": report.all_equal(),
            "precision": report.to_json(),
            "metrics": delta,
        })),
        Format::Text => {
            let mut out = format!("{} vs {}\n", a.0, b.0);
            if report.all_equal() {
                out.push_str("equal everywhere\n");
            } else {
                for (l, v) in &report.per_view {
                    out.push_str(&format!("{l}: {}\n", v.name()));
                }
            }
            if let (Some(x), Some(y)) = (&a.3, &b.3) {
                out.push_str(&format!(
                    "abstract_transitions {} vs {}\nsealed_steps {} vs {}\nshortcuts_taken {} vs {}\n",
                    x.abstract_transitions,
                    y.abstract_transitions,
                    x.sealed_steps,
                    y.sealed_steps,
                    x.shortcuts_taken,
                    y.shortcuts_taken
                ));
            }
            out
        }
    };
    emit(args.out.as_deref(), &text)?;
    Ok(0)
}

fn cmd_generate(args: &GenerateArgs) -> Result<u8> {
    let shape = Shape {
        max_lines: args.max_lines,
        max_calls: args.max_calls,
        use_objects: !args.no_objects,
    };
    let (p, initial) = generate_program(args.seed, shape, args.domain);
    let source = format_program(&p);
    let inputs = inputs::views_to_inputs(&p, &initial);
    match args.format {
        Format::Json => emit(
            args.out.as_deref(),
            &pretty(&json!({ "program": source, "inputs": inputs, "domain": args.domain.to_string() })),
        )?,
        Format::Text => {
            emit(args.out.as_deref(), &source)?;
            if let Some(path) = &args.inputs_out {
                fs::write(path, pretty(&inputs) + "\n")?;
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("DS_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Check(a) => cmd_check(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Analysis(m)) => {
            eprintln!("analysis aborted: {m}");
            ExitCode::from(1)
        }
    }
}
