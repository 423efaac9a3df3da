use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use pocl::bench::{self, BenchConfig, LimitKind};
use pocl::domain::{parse, Definition, Domain, Problem};
use pocl::flaw::CostMode;
use pocl::strategy::BUILTINS;
use pocl::{RankWeights, SearchConfig, Status, Strategy, Task};

#[derive(Parser)]
#[command(name = "pocl", version, about = "Partial-order causal-link planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and print the plan.
    Plan(PlanArgs),
    /// Run a strategy-by-problem matrix and write CSV.
    Bench(BenchArgs),
    /// Check that a strategy is well formed and exhaustive.
    Validate {
        #[arg(long)]
        strategy: String,
    },
    /// Print the builtin strategies.
    ListStrategies,
}

#[derive(Args)]
struct SearchArgs {
    /// Node ranking, e.g. "S+OC" or "S+OC+.1UC".
    #[arg(long, default_value = "S+OC")]
    rank: String,
    /// Stop after this many generated nodes (default: no limit).
    #[arg(long)]
    node_limit: Option<u64>,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Add each new step's preconditions to the agenda in reverse order.
    #[arg(long)]
    reverse_preconds: bool,
    /// Compute each flaw's repair cost once, when it is added.
    #[arg(long)]
    qlcfr: bool,
    /// Prune nodes whose nonseparable threats cannot all be ordered away.
    #[arg(long)]
    dmin: bool,
    /// Treat same-sign effects as threats too.
    #[arg(long)]
    systematic: bool,
    /// Keep nodes that contain a flaw with no repairs.
    #[arg(long)]
    no_prune: bool,
    #[arg(long, env = "POCL_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PlanArgs {
    /// Domain definition file.
    #[arg(long, requires = "problem", conflicts_with = "bundled")]
    domain: Option<PathBuf>,
    /// Problem definition file for that domain.
    #[arg(long, requires = "domain")]
    problem: Option<PathBuf>,
    /// A bundled domain: blocks, briefcase or tileworld.
    #[arg(long, required_unless_present = "domain")]
    bundled: Option<String>,
    /// Problem name within the bundled domain (default: the first).
    #[arg(long, requires = "bundled")]
    instance: Option<String>,
    /// Strategy notation or builtin name.
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    strategy: Option<String>,
    /// Builtin strategy name, see list-strategies.
    #[arg(long)]
    builtin: Option<String>,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory holding one .dom file and any number of .prob files.
    #[arg(long, conflicts_with = "bundled", required_unless_present = "bundled")]
    suite: Option<PathBuf>,
    /// Bundled domain name, or "all".
    #[arg(long)]
    bundled: Option<String>,
    /// Comma-separated builtin names (default: all builtins).
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<String>,
    /// Additional strategy in notation form; may be repeated.
    #[arg(long = "strategy")]
    extra: Vec<String>,
    /// Node ranking; may be repeated.
    #[arg(long = "rank", default_values_t = vec!["S+OC".to_string()])]
    ranks: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    node_limit: u64,
    /// Skip the node-limit pass.
    #[arg(long)]
    no_node_limit: bool,
    /// Whole seconds; adds a time-limit pass.
    #[arg(long)]
    time_limit: Option<u64>,
    #[arg(long)]
    reverse_preconds: bool,
    /// Run both precondition orders.
    #[arg(long, conflicts_with = "reverse_preconds")]
    both_orders: bool,
    #[arg(long)]
    dmin: bool,
    #[arg(long)]
    systematic: bool,
    /// Record wall-clock seconds for node-limit rows too.
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, env = "POCL_SEED", default_value_t = 0)]
    seed: u64,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print average %-overrun per strategy to standard error.
    #[arg(long)]
    summary: bool,
}

enum Failure {
    Usage(String),
    Planner(String),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan(a) => run_plan(a),
        Command::Bench(a) => run_bench(a),
        Command::Validate { strategy } => run_validate(&strategy),
        Command::ListStrategies => list_strategies(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Planner(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn parse_rank(text: &str) -> Result<RankWeights, Failure> {
    RankWeights::parse(text).map_err(|e| {
        let hint = if text.contains('F') {
            " (the F term has no definition and is not supported)"
        } else {
            ""
        };
        Failure::Usage(format!("--rank {text:?}: {e}{hint}"))
    })
}

fn read_definition(path: &Path) -> Result<Definition, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn read_domain(path: &Path) -> Result<Domain, Failure> {
    match read_definition(path)? {
        Definition::Domain(d) => Ok(d),
        Definition::Problem(_) => Err(Failure::Usage(format!(
            "{}: expected a domain definition",
            path.display()
        ))),
    }
}

fn read_problem(path: &Path) -> Result<Problem, Failure> {
    match read_definition(path)? {
        Definition::Problem(p) => Ok(p),
        Definition::Domain(_) => Err(Failure::Usage(format!(
            "{}: expected a problem definition",
            path.display()
        ))),
    }
}

fn make_task(d: &Domain, p: &Problem) -> Result<Task, Failure> {
    Task::new(d, p).map_err(|e| Failure::Usage(e.to_string()))
}

fn resolve_strategy(text: &str) -> Result<Strategy, Failure> {
    let s = Strategy::resolve(text).map_err(|e| Failure::Usage(e.to_string()))?;
    for w in s.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(s)
}

fn run_plan(a: PlanArgs) -> Result<(), Failure> {
    let task = match (&a.domain, &a.problem, &a.bundled) {
        (Some(d), Some(p), _) => make_task(&read_domain(d)?, &read_problem(p)?)?,
        (_, _, Some(name)) => {
            let (d, problems) =
                pocl::bundled::bundled(name).map_err(|e| Failure::Usage(e.to_string()))?;
            let p = match &a.instance {
                Some(i) => problems
                    .iter()
                    .find(|p| p.name.as_str() == i)
                    .ok_or_else(|| Failure::Usage(format!("no problem '{i}' in '{name}'")))?,
                None => &problems[0],
            };
            make_task(&d, p)?
        }
        _ => {
            return Err(Failure::Usage(
                "give --domain and --problem, or --bundled".into(),
            ))
        }
    };
    let strategy = resolve_strategy(
        a.strategy
            .as_deref()
            .or(a.builtin.as_deref())
            .unwrap_or_default(),
    )?;
    let s = &a.search;
    if s.time_limit.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
        return Err(Failure::Usage(
            "--time-limit must be a positive number of seconds".into(),
        ));
    }
    let config = SearchConfig {
        rank: parse_rank(&s.rank)?,
        node_limit: s.node_limit,
        time_limit: s.time_limit.map(Duration::from_secs_f64),
        reverse_preconditions: s.reverse_preconds,
        cost_mode: if s.qlcfr {
            CostMode::Cached
        } else {
            CostMode::Exact
        },
        dead_end_pruning: !s.no_prune,
        dmin: s.dmin,
        systematic: s.systematic,
        seed: s.seed,
    };
    let out = pocl::plan(&task, &strategy, &config).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut stdout = io::stdout().lock();
    writeln!(
        stdout,
        "problem {}  strategy {}  status {}",
        task.problem_name,
        strategy.label(),
        out.status
    )?;
    if let Some(v) = &out.validation {
        for (i, action) in v.actions.iter().enumerate() {
            writeln!(stdout, "{:3}. {action}", i + 1)?;
        }
        if v.grounded_vars > 0 {
            writeln!(stdout, "({} free variable(s) grounded)", v.grounded_vars)?;
        }
    }
    let st = &out.stats;
    writeln!(
        stdout,
        "generated {}  expanded {}  pruned {}  max-frontier {}  seconds {:.3}  seed {}",
        st.generated, st.expanded, st.pruned, st.max_frontier, st.seconds, st.seed
    )?;
    if out.status == Status::Solved {
        Ok(())
    } else {
        Err(Failure::Planner(format!("no plan found: {}", out.status)))
    }
}

fn suite_tasks(dir: &Path) -> Result<Vec<Task>, Failure> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    let ext = |p: &Path, e: &str| p.extension().is_some_and(|x| x == e);
    let domains: Vec<_> = entries.iter().filter(|p| ext(p, "dom")).collect();
    let [domain] = domains.as_slice() else {
        return Err(Failure::Usage(format!(
            "{}: expected exactly one .dom file, found {}",
            dir.display(),
            domains.len()
        )));
    };
    let domain = read_domain(domain)?;
    entries
        .iter()
        .filter(|p| ext(p, "prob"))
        .map(|p| make_task(&domain, &read_problem(p)?))
        .collect()
}

fn run_bench(a: BenchArgs) -> Result<(), Failure> {
    let tasks = match (&a.suite, &a.bundled) {
        (Some(dir), _) => suite_tasks(dir)?,
        (None, Some(name)) if name == "all" => pocl::bundled::all_tasks(),
        (None, Some(name)) => {
            let (d, ps) =
                pocl::bundled::bundled(name).map_err(|e| Failure::Usage(e.to_string()))?;
            ps.iter()
                .map(|p| make_task(&d, p))
                .collect::<Result<_, _>>()?
        }
        (None, None) => unreachable!("clap requires a problem source"),
    };
    if tasks.is_empty() {
        return Err(Failure::Usage("no problems to run".into()));
    }
    let mut strategies = Vec::new();
    if a.strategies.is_empty() && a.extra.is_empty() {
        for (name, _) in BUILTINS {
            strategies.push(Strategy::builtin(name).expect("builtin"));
        }
    }
    for name in &a.strategies {
        strategies.push(Strategy::builtin(name.trim()).map_err(|e| Failure::Usage(e.to_string()))?);
    }
    for text in &a.extra {
        strategies.push(resolve_strategy(text)?);
    }
    let ranks = a
        .ranks
        .iter()
        .map(|r| Ok((r.clone(), parse_rank(r)?)))
        .collect::<Result<Vec<_>, Failure>>()?;
    if a.no_node_limit && a.time_limit.is_none() {
        return Err(Failure::Usage(
            "bench needs a node limit or a time limit".into(),
        ));
    }
    let cfg = BenchConfig {
        ranks,
        node_limit: (!a.no_node_limit).then_some(a.node_limit),
        time_limit: a.time_limit,
        reverse: if a.both_orders {
            vec![false, true]
        } else {
            vec![a.reverse_preconds]
        },
        search: SearchConfig {
            dmin: a.dmin,
            systematic: a.systematic,
            seed: a.seed,
            ..SearchConfig::default()
        },
        record_time: a.timing,
        jobs: a.jobs,
    };
    let records = bench::run_matrix(&tasks, &strategies, &cfg);
    let text = bench::csv_string(&records);
    match &a.out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    if a.summary {
        let table = bench::OverrunTable::from_records(&records);
        for (k, avg) in &table.averages {
            let order = if k.reverse { " reversed" } else { "" };
            eprintln!(
                "{:10} {:8} {:5}{order}: average %-overrun {} over {} problem(s)",
                k.strategy,
                k.rank,
                k.limit_kind,
                bench::format_pct(avg.mean),
                avg.problems
            );
        }
        for row in bench::ceiling_report(&records) {
            if row.group.limit_kind == LimitKind::Nodes {
                eprintln!(
                    "{} {}: second-worst {} ({} the limit)",
                    row.group.problem,
                    row.group.rank,
                    row.second_worst,
                    if row.below_limit { "below" } else { "at" }
                );
            }
        }
    }
    Ok(())
}

fn run_validate(text: &str) -> Result<(), Failure> {
    let s = resolve_strategy(text)?;
    println!("ok: {s}");
    Ok(())
}

fn list_strategies() -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    for (name, _) in BUILTINS {
        let s = Strategy::builtin(name).expect("builtin");
        let note = if s.cost_mode == CostMode::Cached {
            "  (costs cached at insertion)"
        } else {
            ""
        };
        writeln!(out, "{name:10} {s}{note}")?;
    }
    Ok(())
}
