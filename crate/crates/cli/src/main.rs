use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use munchkin_core::callgraph::build_callgraph;
use munchkin_core::executor::{run_concrete, DEFAULT_STEP_LIMIT};
use munchkin_core::fuzzer::{fuzz_campaign, FuzzConfig};
use munchkin_core::generator::{generate_program, GenParams, TABLE1_GRID};
use munchkin_core::ir::{parse_program, serialize_program, InputVector, Program};
use munchkin_core::orchestrator::{run_all, run_baselines, run_hybrid, CampaignReport, HybridConfig, Mode};
use munchkin_core::report::{
    average_plot_data, emit_plot_dat, parse_plot_dat, render_depth_tsv, render_plot_dat, render_summary_tsv,
    report_to_json,
};
use munchkin_core::symex::{symex_campaign, Strategy, SymexConfig, SymexLimits, DEFAULT_MAX_INPUTS};

#[derive(Parser, Debug)]
#[command(
    name = "munchkin",
    version,
    about = "Hybrid fuzzing and directed symbolic execution over .mir programs"
)]
struct Cli {
    /// TOML file of default option values (key = value).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an artificial call-tree program.
    Generate(GenerateArgs),
    /// Print the call graph of a program.
    Callgraph(CallgraphArgs),
    /// Execute a program on one test case.
    Run(RunArgs),
    /// Run the fuzzer alone.
    Fuzz(FuzzArgs),
    /// Run symbolic execution alone.
    Symex(SymexArgs),
    /// Run an FS or SF hybrid campaign.
    Hybrid(HybridArgs),
    /// Run the fuzz-only and symex-only baselines.
    Baselines(BaselineArgs),
    /// Run all four techniques and write reports and plot data, or average plot files.
    Report(ReportArgs),
    /// Run every technique over the twelve-program grid and print a summary.
    Table1(Table1Args),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, short = 'b')]
    branching: u32,
    #[arg(long, short = 'd')]
    depth: u32,
    /// Non-zero seeds salt the generated function names.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CallgraphArgs {
    file: PathBuf,
    /// Graphviz output.
    #[arg(long, conflicts_with = "depths")]
    dot: bool,
    /// One `function<TAB>depth` line per function.
    #[arg(long)]
    depths: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    file: PathBuf,
    /// Test-case file, one value per line.
    #[arg(long, conflicts_with = "values")]
    input: Option<PathBuf>,
    /// Comma-separated input values.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    values: Vec<i32>,
    #[arg(long)]
    step_limit: Option<u64>,
}

/// Budget and seed options shared by the campaign subcommands. Unset values
/// fall back to the config file, then to built-in defaults.
#[derive(Args, Debug, Default, Clone)]
struct CampaignOpts {
    #[arg(long)]
    rng_seed: Option<u64>,
    /// Fuzzer executions after the seeds.
    #[arg(long)]
    fuzz_budget: Option<u64>,
    /// Query limit of a whole symbolic-execution campaign.
    #[arg(long)]
    symex_queries: Option<u64>,
    /// State limit of a symbolic-execution campaign (per target in FS).
    #[arg(long)]
    symex_states: Option<u64>,
    /// Query budget of each FS target.
    #[arg(long)]
    per_target_queries: Option<u64>,
    #[arg(long)]
    step_limit: Option<u64>,
    #[arg(long)]
    max_inputs: Option<u32>,
    /// Directory of seed test cases.
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// Output directory; defaults to $MUNCHKIN_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FuzzArgs {
    file: PathBuf,
    #[command(flatten)]
    opts: CampaignOpts,
    /// Alias of --fuzz-budget.
    #[arg(long)]
    budget: Option<u64>,
    /// Optional wall-clock cap in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
}

#[derive(Args, Debug)]
struct SymexArgs {
    file: PathBuf,
    #[command(flatten)]
    opts: CampaignOpts,
    #[arg(long, default_value = "baseline")]
    search: Strategy,
    /// Function to reach; required for sonar search.
    #[arg(long)]
    target: Option<String>,
}

#[derive(Args, Debug)]
struct HybridArgs {
    file: PathBuf,
    #[command(flatten)]
    opts: CampaignOpts,
    #[arg(long)]
    mode: Mode,
    /// Run the FS targets of each frontier wave concurrently.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    file: PathBuf,
    #[command(flatten)]
    opts: CampaignOpts,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Program to evaluate.
    #[arg(required_unless_present = "average")]
    file: Option<PathBuf>,
    #[command(flatten)]
    opts: CampaignOpts,
    /// Average these plot files instead of running campaigns.
    #[arg(long, num_args = 1.., conflicts_with = "file")]
    average: Vec<PathBuf>,
    /// Plot-data output path; defaults to plot-<program>.dat in the output directory.
    #[arg(long)]
    dat: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Table1Args {
    #[command(flatten)]
    opts: CampaignOpts,
}

/// Config-file keys, matching the long flag names with `_` for `-`.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    rng_seed: Option<u64>,
    fuzz_budget: Option<u64>,
    symex_queries: Option<u64>,
    symex_states: Option<u64>,
    per_target_queries: Option<u64>,
    step_limit: Option<u64>,
    max_inputs: Option<u32>,
    seeds: Option<PathBuf>,
    out: Option<PathBuf>,
}

/// Error in the invocation rather than in a campaign; exits with status 1.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

/// Resolved campaign options: flags, then config file, then defaults.
struct Resolved {
    hybrid: HybridConfig,
    out: Option<PathBuf>,
}

fn resolve(opts: &CampaignOpts, file: &FileConfig) -> Result<Resolved> {
    let d = HybridConfig::default();
    let seeds_dir = opts.seeds.clone().or_else(|| file.seeds.clone());
    let seeds = match seeds_dir {
        Some(dir) => read_seeds(&dir)?,
        None => Vec::new(),
    };
    let out = opts
        .out
        .clone()
        .or_else(|| file.out.clone())
        .or_else(|| std::env::var_os("MUNCHKIN_OUT").map(PathBuf::from));
    let hybrid = HybridConfig {
        rng_seed: opts.rng_seed.or(file.rng_seed).unwrap_or(d.rng_seed),
        fuzz_budget: opts.fuzz_budget.or(file.fuzz_budget).unwrap_or(d.fuzz_budget),
        symex_limits: SymexLimits {
            max_states: opts
                .symex_states
                .or(file.symex_states)
                .unwrap_or(d.symex_limits.max_states),
            max_queries: opts
                .symex_queries
                .or(file.symex_queries)
                .unwrap_or(d.symex_limits.max_queries),
        },
        per_target_query_budget: opts
            .per_target_queries
            .or(file.per_target_queries)
            .unwrap_or(d.per_target_query_budget),
        step_limit: opts.step_limit.or(file.step_limit).unwrap_or(DEFAULT_STEP_LIMIT),
        max_inputs: opts.max_inputs.or(file.max_inputs).unwrap_or(DEFAULT_MAX_INPUTS),
        seeds,
        ..d
    };
    Ok(Resolved { hybrid, out })
}

/// Reads every regular file of `dir` as a test case, in file-name order.
fn read_seeds(dir: &Path) -> Result<Vec<InputVector>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading seed directory {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.is_file());
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            InputVector::parse_text(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect()
}

fn load_program(path: &Path) -> Result<Program> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let p = parse_program(&text).with_context(|| format!("parsing {}", path.display()))?;
    for w in p.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(p)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_report(dir: &Path, name: &str, report: &CampaignReport) -> Result<()> {
    write_file(&dir.join(format!("{name}.json")), &report_to_json(report))?;
    write_file(
        &dir.join(format!("{name}-depth.tsv")),
        &render_depth_tsv(&report.per_depth),
    )
}

fn report_file_stem(r: &CampaignReport) -> String {
    r.technique.label().to_ascii_lowercase()
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let params = GenParams::new(args.branching, args.depth).with_seed(args.seed);
    params.validate().map_err(|e| usage(e.to_string()))?;
    let p = generate_program(&params)?;
    let text = serialize_program(&p);
    match &args.out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_callgraph(args: &CallgraphArgs) -> Result<()> {
    let p = load_program(&args.file)?;
    let cg = build_callgraph(&p);
    if args.dot {
        print!("{}", cg.to_dot(p.name()));
    } else if args.depths {
        print!("{}", cg.depths_tsv());
    } else {
        println!("functions\t{}", cg.nodes().len());
        println!("reachable\t{}", cg.num_reachable());
        for (depth, n) in cg.depth_histogram() {
            println!("depth {depth}\t{n}");
        }
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let p = load_program(&args.file)?;
    let input = match &args.input {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            InputVector::parse_text(&text)?
        }
        None => InputVector::new(args.values.clone()),
    };
    let r = run_concrete(&p, &input, args.step_limit.unwrap_or(DEFAULT_STEP_LIMIT));
    for v in &r.printed {
        println!("{v}");
    }
    eprintln!("outcome: {:?}", r.outcome);
    eprintln!(
        "covered: {}",
        r.coverage.functions().iter().cloned().collect::<Vec<_>>().join(" ")
    );
    Ok(())
}

fn cmd_fuzz(args: &FuzzArgs, file: &FileConfig) -> Result<()> {
    let p = load_program(&args.file)?;
    let r = resolve(&args.opts, file)?;
    let time_limit = match args.time_limit {
        Some(s) if !(s.is_finite() && s > 0.0) => return Err(usage("--time-limit must be positive")),
        Some(s) => Some(Duration::from_secs_f64(s)),
        None => None,
    };
    let cfg = FuzzConfig {
        rng_seed: r.hybrid.rng_seed,
        budget: args.budget.unwrap_or(r.hybrid.fuzz_budget),
        step_limit: r.hybrid.step_limit,
        time_limit,
        ..FuzzConfig::default()
    };
    let res = fuzz_campaign(&p, &r.hybrid.seeds, &cfg);
    if let Some(out) = &r.out {
        res.corpus
            .write_to(&out.join("queue"))
            .with_context(|| format!("writing corpus to {}", out.display()))?;
    }
    println!("executions\t{}", res.executions);
    println!("corpus\t{}", res.corpus.len());
    println!("edges\t{}", res.cumulative.edge_count());
    println!("faults\t{}", res.faults.len());
    println!("functions\t{}/{}", res.cumulative.functions().len(), p.num_functions());
    Ok(())
}

fn cmd_symex(args: &SymexArgs, file: &FileConfig) -> Result<()> {
    let p = load_program(&args.file)?;
    let r = resolve(&args.opts, file)?;
    if args.search == Strategy::Sonar && args.target.is_none() {
        return Err(usage("--search sonar requires --target"));
    }
    let cfg = SymexConfig {
        search: args.search,
        target: args.target.clone(),
        limits: r.hybrid.symex_limits,
        max_inputs: r.hybrid.max_inputs,
        rng_seed: r.hybrid.rng_seed,
        step_limit: r.hybrid.step_limit,
    };
    let res = symex_campaign(&p, &cfg).map_err(|e| usage(e.to_string()))?;
    if let Some(out) = &r.out {
        for (i, t) in res.test_cases.iter().enumerate() {
            write_file(&out.join("tests").join(format!("test-{i}.txt")), &t.input.to_text())?;
        }
    }
    println!("termination\t{:?}", res.termination);
    println!("states\t{}", res.states_explored);
    println!("queries\t{}", res.stats.queries);
    println!("tests\t{}", res.test_cases.len());
    println!("functions\t{}/{}", res.coverage.functions().len(), p.num_functions());
    Ok(())
}

fn cmd_hybrid(args: &HybridArgs, file: &FileConfig) -> Result<()> {
    let p = load_program(&args.file)?;
    let r = resolve(&args.opts, file)?;
    let cfg = HybridConfig {
        mode: args.mode,
        parallel: args.parallel,
        ..r.hybrid
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let report = run_hybrid(&p, &cfg)?;
    if let Some(out) = &r.out {
        write_report(out, &report_file_stem(&report), &report)?;
    }
    print!("{}", render_summary_tsv(std::slice::from_ref(&report)));
    Ok(())
}

fn cmd_baselines(args: &BaselineArgs, file: &FileConfig) -> Result<()> {
    let p = load_program(&args.file)?;
    let r = resolve(&args.opts, file)?;
    let (fuzz, symex) = run_baselines(&p, &r.hybrid)?;
    if let Some(out) = &r.out {
        write_report(out, &report_file_stem(&fuzz), &fuzz)?;
        write_report(out, &report_file_stem(&symex), &symex)?;
    }
    print!("{}", render_summary_tsv(&[fuzz, symex]));
    Ok(())
}

fn cmd_report(args: &ReportArgs, file: &FileConfig) -> Result<()> {
    let r = resolve(&args.opts, file)?;
    if !args.average.is_empty() {
        let files = args
            .average
            .iter()
            .map(|path| {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                parse_plot_dat(&text).with_context(|| format!("parsing {}", path.display()))
            })
            .collect::<Result<Vec<_>>>()?;
        let body = render_plot_dat(&average_plot_data(&files));
        match args
            .dat
            .clone()
            .or_else(|| r.out.as_ref().map(|o| o.join("plot-avg.dat")))
        {
            Some(path) => write_file(&path, &body)?,
            None => print!("{body}"),
        }
        return Ok(());
    }

    let path = args.file.as_ref().expect("clap enforces file or --average");
    let p = load_program(path)?;
    let reports = run_all(&p, &r.hybrid)?;
    if let Some(out) = &r.out {
        for rep in &reports {
            write_report(out, &report_file_stem(rep), rep)?;
        }
    }
    let tables = [0, 1, 2, 3].map(|i| reports[i].per_depth.as_slice());
    match args
        .dat
        .clone()
        .or_else(|| r.out.as_ref().map(|o| o.join(format!("plot-{}.dat", p.name()))))
    {
        Some(dat) => {
            if let Some(parent) = dat.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            emit_plot_dat(tables, &dat)?;
        }
        None => print!("{}", render_plot_dat(&munchkin_core::report::plot_rows(tables)?)),
    }
    print!("{}", render_summary_tsv(&reports));
    Ok(())
}

/// Text of the grid summary; depends only on the resolved options.
fn table1_summary(cfg: &HybridConfig) -> Result<String> {
    let mut out = String::from("prog\tb\td\tfuncs\tsymex%\tsymex_queries\tafl%\tfs%\tfs_queries\tsf%\tsf_queries\n");
    for (i, (b, d)) in TABLE1_GRID.iter().enumerate() {
        let p = generate_program(&GenParams::new(*b, *d))?;
        let [symex, fuzz, fs, sf] = run_all(&p, cfg)?;
        let _ = writeln!(
            out,
            "P{}\t{b}\t{d}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            i + 1,
            p.num_functions(),
            symex.percent(),
            symex.solver_stats.queries,
            fuzz.percent(),
            fs.percent(),
            fs.solver_stats.queries,
            sf.percent(),
            sf.solver_stats.queries,
        );
    }
    Ok(out)
}

fn cmd_table1(args: &Table1Args, file: &FileConfig) -> Result<()> {
    let r = resolve(&args.opts, file)?;
    let summary = table1_summary(&r.hybrid)?;
    if let Some(out) = &r.out {
        write_file(&out.join("table1.tsv"), &summary)?;
    }
    print!("{summary}");
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let file = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Callgraph(a) => cmd_callgraph(a),
        Command::Run(a) => cmd_run(a),
        Command::Fuzz(a) => cmd_fuzz(a, &file),
        Command::Symex(a) => cmd_symex(a, &file),
        Command::Hybrid(a) => cmd_hybrid(a, &file),
        Command::Baselines(a) => cmd_baselines(a, &file),
        Command::Report(a) => cmd_report(a, &file),
        Command::Table1(a) => cmd_table1(a, &file),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let file = FileConfig {
            fuzz_budget: Some(7),
            rng_seed: Some(3),
            ..FileConfig::default()
        };
        let opts = CampaignOpts {
            rng_seed: Some(9),
            ..CampaignOpts::default()
        };
        let r = resolve(&opts, &file).unwrap();
        assert_eq!(r.hybrid.rng_seed, 9);
        assert_eq!(r.hybrid.fuzz_budget, 7);
        assert_eq!(
            r.hybrid.per_target_query_budget,
            HybridConfig::default().per_target_query_budget
        );
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let err = toml::from_str::<FileConfig>("fuzz_budgett = 3").unwrap_err();
        assert!(err.to_string().contains("fuzz_budgett"));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn grid_summary_is_keyed_by_program() {
        let cfg = HybridConfig {
            fuzz_budget: 50,
            ..HybridConfig::default()
        };
        let s = table1_summary(&cfg).unwrap();
        assert_eq!(s.lines().count(), 13);
        assert!(s.lines().nth(1).unwrap().starts_with("P1\t2\t1\t4\t100"));
    }
}
