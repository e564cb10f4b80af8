//! lapo-lab: the LAPO simulation lab from the command line.
//!
//! Subcommands: train, eval, ablate, analyze, report. Exit codes are a
//! stable contract for scripting: 0 success, 2 config/usage error, 3
//! output I/O error. Log verbosity comes from the LAPO_LAB_LOG env var
//! (error/warn/info/debug; rendered budget prompts show up at debug).

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lapo_core::ablation::{
    config_diff_keys, run_guidance_ablation, run_target_statistic_ablation, AblationArm,
};
use lapo_core::analysis::{analyze_traces_file, KeywordCategoryConfig, TraceAnalysis};
use lapo_core::config::RunConfig;
use lapo_core::eval::{
    difficulty_allocation, evaluate, format_pass1, format_tokens, BudgetMode, EvalReport,
};
use lapo_core::length_map::LengthMap;
use lapo_core::pipeline::{run_lapo, StepRecord};
use lapo_core::policy_env::PolicyTable;
use lapo_core::rewards::GuidanceMode;
use lapo_core::stats::TargetStatistic;
use lapo_core::types::{default_bank, load_bank, Problem};

#[derive(Parser)]
#[command(name = "lapo-lab", version, about = "Length-Adaptive Policy Optimization simulation lab")]
struct Cli {
    /// Cap the worker thread pool (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run two-stage LAPO training and write the run artifacts
    Train(TrainArgs),
    /// Evaluate saved policy params on a problem bank
    Eval(EvalArgs),
    /// Run an ablation sweep (target statistic or guidance mode)
    Ablate(AblateArgs),
    /// Keyword-frequency analysis of reasoning traces
    Analyze(AnalyzeArgs),
    /// Evaluate a finished run's checkpoints into report tables
    Report(ReportArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Run config TOML; the calibrated bundled config when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory (default: output_dir from the config)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overwrite an existing non-empty run directory
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Policy params JSON (as written by train)
    #[arg(long)]
    params: PathBuf,
    /// Length map JSON; required with --budget-from-map
    #[arg(long)]
    map: Option<PathBuf>,
    /// Problem bank JSON (default: the bank named in the config, else the
    /// bundled 5-tier bank)
    #[arg(long)]
    bank: Option<PathBuf>,
    /// Config supplying the environment and eval seed (default: bundled)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Samples per problem (pass@1 averages over these)
    #[arg(long, default_value_t = 4)]
    samples: u32,
    /// Condition generation on each problem's map target
    #[arg(long, requires = "map")]
    budget_from_map: bool,
    /// Report CSV path
    #[arg(long, default_value = "eval.csv")]
    out: PathBuf,
    /// Overwrite an existing report file
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AblationAxis {
    /// Map target statistic: median / mean / minimum
    Statistic,
    /// Internalization guidance: exact / range / implicit
    Guidance,
}

impl AblationAxis {
    fn label(self) -> &'static str {
        match self {
            AblationAxis::Statistic => "statistic",
            AblationAxis::Guidance => "guidance",
        }
    }
}

#[derive(Args)]
struct AblateArgs {
    /// Baseline run config TOML; the bundled config when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Which single config field the arms sweep
    #[arg(long, value_enum)]
    which: AblationAxis,
    /// Sweep directory (default: "<output_dir>-ablate-<which>")
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overwrite an existing non-empty sweep directory
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// JSONL traces: one {"text", "stage_label"} record per line
    #[arg(long)]
    traces: PathBuf,
    /// Keyword lexicon TOML (category = ["keyword", ...]); default: the
    /// four built-in categories
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Output TSV path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite an existing output file
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// A finished train run directory
    #[arg(long)]
    run_dir: PathBuf,
    /// Optional reasoning traces to fold into the report
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Keyword lexicon for --traces
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Report directory (default: "<run_dir>/report")
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overwrite an existing non-empty report directory
    #[arg(long)]
    force: bool,
}

/// A subcommand failure carrying its exit code: 2 for config/usage
/// problems (including unreadable or invalid inputs), 3 for output I/O.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(err: impl std::fmt::Display) -> Self {
        Failure { code: 2, message: err.to_string() }
    }

    fn io(err: impl std::fmt::Display) -> Self {
        Failure { code: 3, message: err.to_string() }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("LAPO_LAB_LOG", "warn"))
        .format_timestamp(None)
        .init();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

// ===== shared plumbing =====

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::from_path(p).map_err(Failure::usage),
        None => Ok(RunConfig::bundled()),
    }
}

/// Bank precedence: explicit --bank flag, then the config's bank_path,
/// then the bundled 5-tier synthetic bank.
fn load_bank_for(cfg: &RunConfig, flag: Option<&Path>) -> Result<Vec<Problem>, Failure> {
    match flag.or(cfg.bank_path.as_deref()) {
        Some(p) => load_bank(p).map_err(Failure::usage),
        None => Ok(default_bank()),
    }
}

/// Refuse to reuse a non-empty directory unless --force; create it.
fn prepare_dir(dir: &Path, force: bool) -> CmdResult {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?;
        if entries.next().is_some() && !force {
            return Err(Failure::usage(format!(
                "output directory {} already exists and is not empty (pass --force to overwrite)",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))
}

fn guard_file(path: &Path, force: bool) -> CmdResult {
    if path.exists() && !force {
        return Err(Failure::usage(format!(
            "{} already exists (pass --force to overwrite)",
            path.display()
        )));
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

/// JSONL step-log writer for use inside a training sink, which cannot
/// return errors; the first write failure is held and surfaced by finish().
struct StepLog {
    out: BufWriter<fs::File>,
    path: PathBuf,
    records: u64,
    err: Option<std::io::Error>,
}

impl StepLog {
    fn create(path: PathBuf) -> Result<Self, Failure> {
        let file = fs::File::create(&path)
            .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        Ok(StepLog { out: BufWriter::new(file), path, records: 0, err: None })
    }

    fn push(&mut self, record: &StepRecord) {
        if self.err.is_some() {
            return;
        }
        let line = serde_json::to_string(record).expect("step record serializes");
        match writeln!(self.out, "{line}") {
            Ok(()) => self.records += 1,
            Err(e) => self.err = Some(e),
        }
    }

    fn finish(mut self) -> Result<u64, Failure> {
        if let Some(e) = self.err.take() {
            return Err(Failure::io(format!("{}: {e}", self.path.display())));
        }
        self.out
            .flush()
            .map_err(|e| Failure::io(format!("{}: {e}", self.path.display())))?;
        Ok(self.records)
    }
}

fn save_policy(table: &PolicyTable, path: &Path) -> CmdResult {
    table.save(path).map_err(Failure::io)
}

// ===== train =====

fn cmd_train(args: TrainArgs) -> CmdResult {
    let cfg = load_config(args.config.as_deref())?;
    let bank = load_bank_for(&cfg, None)?;
    let out_dir = args.out_dir.unwrap_or_else(|| cfg.output_dir.clone());
    prepare_dir(&out_dir, args.force)?;

    write_text(&out_dir.join("config.toml"), &cfg.echo_toml())?;
    let mut step_log = StepLog::create(out_dir.join("steps.jsonl"))?;
    let outcome = run_lapo(&cfg, &bank, &mut |r| step_log.push(r)).map_err(Failure::usage)?;
    let records = step_log.finish()?;

    save_policy(&outcome.policy, &out_dir.join("params.json"))?;
    outcome.map.save(&out_dir.join("map.json")).map_err(Failure::io)?;
    save_policy(&outcome.policy_init, &out_dir.join("params_init.json"))?;
    save_policy(&outcome.policy_after_discovery, &out_dir.join("params_discovery.json"))?;
    let metrics = serde_json::to_string_pretty(&outcome.metrics).expect("metrics serialize");
    write_text(&out_dir.join("metrics.json"), &metrics)?;

    match outcome.metrics.last() {
        Some(last) => println!(
            "train: {} steps, {} step records -> {} (final batch: mean length {:.1}, accuracy {:.3})",
            outcome.metrics.len(),
            records,
            out_dir.display(),
            last.mean_length,
            last.accuracy,
        ),
        None => println!(
            "train: 0 steps (both stages have episodes = 0) -> {}",
            out_dir.display()
        ),
    }
    Ok(())
}

// ===== eval =====

fn eval_csv(report: &EvalReport) -> String {
    let mut csv = String::from("benchmark,Pass@1,#Tok\n");
    for b in &report.benchmarks {
        let _ = writeln!(
            csv,
            "{},{},{}",
            b.benchmark_tag,
            format_pass1(b.pass1),
            format_tokens(b.avg_tokens)
        );
    }
    let _ = writeln!(
        csv,
        "overall,{},{}",
        format_pass1(report.pass1),
        format_tokens(report.avg_tokens)
    );
    csv
}

fn cmd_eval(args: EvalArgs) -> CmdResult {
    let cfg = load_config(args.config.as_deref())?;
    let params = PolicyTable::load(&args.params).map_err(Failure::usage)?;
    let map = match &args.map {
        Some(p) => Some(LengthMap::load(p).map_err(Failure::usage)?),
        None => None,
    };
    let bank = load_bank_for(&cfg, args.bank.as_deref())?;
    let budget = match (&map, args.budget_from_map) {
        (Some(m), true) => BudgetMode::FromMap(m),
        _ => BudgetMode::Unconditioned,
    };
    let report = evaluate(
        &params,
        &cfg.env,
        &bank,
        args.samples,
        budget,
        cfg.seed,
        cfg.max_generation_length(),
    )
    .map_err(Failure::usage)?;

    guard_file(&args.out, args.force)?;
    write_text(&args.out, &eval_csv(&report))?;
    println!(
        "eval: Pass@1 {}, #Tok {} over {} problems x {} samples -> {}",
        format_pass1(report.pass1),
        format_tokens(report.avg_tokens),
        bank.len(),
        args.samples,
        args.out.display()
    );
    Ok(())
}

// ===== ablate =====

fn arm_config(base: &RunConfig, axis: AblationAxis, name: &str) -> RunConfig {
    let mut cfg = base.clone();
    match axis {
        AblationAxis::Statistic => {
            cfg.target_statistic = match name {
                "median" => TargetStatistic::Median,
                "mean" => TargetStatistic::Mean,
                "minimum" => TargetStatistic::Minimum,
                other => unreachable!("unknown statistic arm {other}"),
            }
        }
        AblationAxis::Guidance => {
            cfg.guidance_mode = match name {
                "exact" => GuidanceMode::Exact,
                "range" => GuidanceMode::Range,
                "implicit" => GuidanceMode::Implicit,
                other => unreachable!("unknown guidance arm {other}"),
            }
        }
    }
    cfg
}

fn ablation_csv(arms: &[AblationArm], diff_keys: &[String]) -> String {
    let mut csv = format!("# arms differ only in: {}\n", diff_keys.join(", "));
    csv.push_str("arm,benchmark,Pass@1,#Tok\n");
    for arm in arms {
        for b in &arm.report.benchmarks {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                arm.name,
                b.benchmark_tag,
                format_pass1(b.pass1),
                format_tokens(b.avg_tokens)
            );
        }
    }
    csv
}

fn cmd_ablate(args: AblateArgs) -> CmdResult {
    let cfg = load_config(args.config.as_deref())?;
    let bank = load_bank_for(&cfg, None)?;
    let out_dir = args.out_dir.unwrap_or_else(|| {
        PathBuf::from(format!("{}-ablate-{}", cfg.output_dir.display(), args.which.label()))
    });
    prepare_dir(&out_dir, args.force)?;

    let arm_names: &[&str] = match args.which {
        AblationAxis::Statistic => &["median", "mean", "minimum"],
        AblationAxis::Guidance => &["exact", "range", "implicit"],
    };
    let mut logs: Vec<(&str, StepLog)> = Vec::with_capacity(arm_names.len());
    for name in arm_names {
        let dir = out_dir.join(name);
        prepare_dir(&dir, args.force)?;
        logs.push((name, StepLog::create(dir.join("steps.jsonl"))?));
    }

    let mut sink = |arm: &str, record: &StepRecord| {
        let log = logs
            .iter_mut()
            .find(|(name, _)| *name == arm)
            .map(|(_, log)| log)
            .expect("driver emits only known arm names");
        log.push(record);
    };
    let arms = match args.which {
        AblationAxis::Statistic => run_target_statistic_ablation(&cfg, &bank, &mut sink),
        AblationAxis::Guidance => run_guidance_ablation(&cfg, &bank, &mut sink),
    }
    .map_err(Failure::usage)?;
    for (_, log) in logs {
        log.finish()?;
    }

    let arm_cfgs: Vec<RunConfig> = arms
        .iter()
        .map(|a| arm_config(&cfg, args.which, a.name))
        .collect();
    for (arm, arm_cfg) in arms.iter().zip(&arm_cfgs) {
        let dir = out_dir.join(arm.name);
        write_text(&dir.join("config.toml"), &arm_cfg.echo_toml())?;
        save_policy(&arm.outcome.policy, &dir.join("params.json"))?;
        arm.outcome.map.save(&dir.join("map.json")).map_err(Failure::io)?;
    }

    let mut diff_keys: Vec<String> = Vec::new();
    for pair in arm_cfgs.windows(2) {
        for key in config_diff_keys(&pair[0], &pair[1]) {
            if !diff_keys.contains(&key) {
                diff_keys.push(key);
            }
        }
    }
    write_text(&out_dir.join("ablation.csv"), &ablation_csv(&arms, &diff_keys))?;

    println!("ablate --which {} -> {}", args.which.label(), out_dir.display());
    for arm in &arms {
        println!(
            "  {:<8} Pass@1 {}, #Tok {}",
            arm.name,
            format_pass1(arm.pass1()),
            format_tokens(arm.avg_tokens())
        );
    }
    Ok(())
}

// ===== analyze =====

fn traces_tsv(analysis: &TraceAnalysis) -> String {
    let mut tsv = String::from("stage\tcategory\tfreq_per_1000_tokens\n");
    for (stage, stats) in &analysis.stages {
        for (category, freq) in &stats.per_1000_tokens {
            let _ = writeln!(tsv, "{stage}\t{category}\t{freq:.4}");
        }
    }
    if analysis.skipped_records > 0 {
        let _ = writeln!(tsv, "# skipped_records\t{}", analysis.skipped_records);
    }
    tsv
}

fn cmd_analyze(args: AnalyzeArgs) -> CmdResult {
    let lexicon = match &args.lexicon {
        Some(p) => KeywordCategoryConfig::load(p).map_err(Failure::usage)?,
        None => KeywordCategoryConfig::default(),
    };
    let analysis = analyze_traces_file(&args.traces, &lexicon).map_err(Failure::usage)?;
    if analysis.skipped_records > 0 {
        eprintln!(
            "warning: skipped {} malformed trace record(s)",
            analysis.skipped_records
        );
    }
    let tsv = traces_tsv(&analysis);
    match &args.out {
        Some(path) => {
            guard_file(path, args.force)?;
            write_text(path, &tsv)?;
            println!(
                "analyze: {} stage(s), {} categories -> {}",
                analysis.stages.len(),
                lexicon.categories.len(),
                path.display()
            );
        }
        None => print!("{tsv}"),
    }
    Ok(())
}

// ===== report =====

fn report_csv(rows: &[(&str, &EvalReport)]) -> String {
    let mut csv = String::from("stage,benchmark,Pass@1,#Tok\n");
    for (stage, report) in rows {
        for b in &report.benchmarks {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                stage,
                b.benchmark_tag,
                format_pass1(b.pass1),
                format_tokens(b.avg_tokens)
            );
        }
    }
    csv
}

fn cmd_report(args: ReportArgs) -> CmdResult {
    let run_dir = &args.run_dir;
    let cfg = RunConfig::from_path(&run_dir.join("config.toml")).map_err(Failure::usage)?;
    let params_init = PolicyTable::load(&run_dir.join("params_init.json")).map_err(Failure::usage)?;
    let params_discovery =
        PolicyTable::load(&run_dir.join("params_discovery.json")).map_err(Failure::usage)?;
    let params_final = PolicyTable::load(&run_dir.join("params.json")).map_err(Failure::usage)?;
    let map = LengthMap::load(&run_dir.join("map.json")).map_err(Failure::usage)?;
    let bank = load_bank_for(&cfg, None)?;

    let k = cfg.eval.samples_per_problem;
    let run_eval = |params: &PolicyTable, budget: BudgetMode| -> Result<EvalReport, Failure> {
        evaluate(params, &cfg.env, &bank, k, budget, cfg.seed, cfg.max_generation_length())
            .map_err(Failure::usage)
    };
    let baseline = run_eval(&params_init, BudgetMode::Unconditioned)?;
    let discovery = run_eval(&params_discovery, BudgetMode::Unconditioned)?;
    let conditioned = cfg.internalization_stage().episodes > 0
        && cfg.guidance_mode != GuidanceMode::Implicit;
    let final_budget = if conditioned {
        BudgetMode::FromMap(&map)
    } else {
        BudgetMode::Unconditioned
    };
    let internalization = run_eval(&params_final, final_budget)?;

    let out_dir = args.out_dir.unwrap_or_else(|| run_dir.join("report"));
    prepare_dir(&out_dir, args.force)?;

    let rows = [
        ("baseline", &baseline),
        ("discovery", &discovery),
        ("internalization", &internalization),
    ];
    write_text(&out_dir.join("report.csv"), &report_csv(&rows))?;

    match difficulty_allocation(&internalization) {
        Ok(allocation) => {
            let mut tsv = format!("# spearman_rho\t{:.4}\n", allocation.spearman_rho);
            tsv.push_str("tier\tmean_length\n");
            for t in &allocation.tiers {
                let _ = writeln!(tsv, "{}\t{:.2}", t.difficulty, t.mean_length);
            }
            write_text(&out_dir.join("allocation.tsv"), &tsv)?;
            println!(
                "report: spearman(difficulty, length) = {:.3} over {} tiers",
                allocation.spearman_rho,
                allocation.tiers.len()
            );
        }
        Err(e) => println!("report: skipping allocation.tsv ({e})"),
    }

    if let Some(traces) = &args.traces {
        let lexicon = match &args.lexicon {
            Some(p) => KeywordCategoryConfig::load(p).map_err(Failure::usage)?,
            None => KeywordCategoryConfig::default(),
        };
        let analysis = analyze_traces_file(traces, &lexicon).map_err(Failure::usage)?;
        write_text(&out_dir.join("traces.tsv"), &traces_tsv(&analysis))?;
    }

    for (stage, report) in rows {
        println!(
            "  {:<16} Pass@1 {}, #Tok {}",
            stage,
            format_pass1(report.pass1),
            format_tokens(report.avg_tokens)
        );
    }
    println!("report tables -> {}", out_dir.display());
    Ok(())
}
