//! Strategy-by-problem benchmark matrices and %-overrun statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::time::Duration;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::search::{plan, RankWeights, SearchConfig, Status};
use crate::strategy::Strategy;
use crate::task::Task;

pub type Pct = Ratio<i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitKind {
    Nodes,
    Time,
}

impl fmt::Display for LimitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LimitKind::Nodes => "nodes",
            LimitKind::Time => "time",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BenchError {
    #[error("%-overrun needs a positive minimum count")]
    ZeroMinimum,
    #[error("problem '{0}' has fewer than two records")]
    TooFewRecords(String),
    #[error("bad CSV record: {0}")]
    Csv(String),
}

/// `((c - m) / m) * 100`, exact.
pub fn pct_overrun(c: u64, m: u64) -> Result<Pct, BenchError> {
    if m == 0 {
        return Err(BenchError::ZeroMinimum);
    }
    Ok(Pct::new((c as i64 - m as i64) * 100, m as i64))
}

/// Fixed two-decimal rendering, rounding half away from zero.
pub fn format_pct(p: Pct) -> String {
    let scaled = (p * 100).round().to_integer();
    let sign = if scaled < 0 { "-" } else { "" };
    let a = scaled.abs();
    format!("{sign}{}.{:02}", a / 100, a % 100)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub strategy: String,
    pub problem: String,
    pub rank: String,
    pub limit_kind: LimitKind,
    /// Node count, or whole seconds for time limits.
    pub limit_value: u64,
    pub status: Status,
    /// Set when a cell failed for a reason other than search failure.
    pub error: Option<String>,
    pub nodes: u64,
    pub seconds: f64,
    /// Whether `seconds` belongs in the persisted output.
    pub timed: bool,
    pub seed: u64,
    pub reverse: bool,
    pub grounded_vars: usize,
}

impl RunRecord {
    pub fn solved(&self) -> bool {
        self.status == Status::Solved && self.error.is_none()
    }

    fn status_label(&self) -> &str {
        if self.error.is_some() {
            "error"
        } else {
            self.status.as_str()
        }
    }

    /// The cost fed into %-overrun: nodes for node-limit rows and
    /// microseconds for time-limit rows; failures count at the nominal limit.
    pub fn cost(&self) -> u64 {
        match (self.limit_kind, self.solved()) {
            (LimitKind::Nodes, true) => self.nodes,
            (LimitKind::Nodes, false) => self.limit_value,
            (LimitKind::Time, true) => ((self.seconds * 1e6).round() as u64).max(1),
            (LimitKind::Time, false) => self.limit_value * 1_000_000,
        }
    }

    fn group(&self) -> GroupKey {
        GroupKey {
            problem: self.problem.clone(),
            rank: self.rank.clone(),
            limit_kind: self.limit_kind,
            limit_value: self.limit_value,
            reverse: self.reverse,
        }
    }

    fn sort_key(&self) -> (&str, &str, LimitKind, &str, bool, u64) {
        (
            &self.strategy,
            &self.problem,
            self.limit_kind,
            &self.rank,
            self.reverse,
            self.limit_value,
        )
    }
}

/// Records compared with one another: the same problem under the same
/// node ranking, limit and precondition order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub problem: String,
    pub rank: String,
    pub limit_kind: LimitKind,
    pub limit_value: u64,
    pub reverse: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SeriesKey {
    pub strategy: String,
    pub rank: String,
    pub limit_kind: LimitKind,
    pub reverse: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Average {
    pub problems: usize,
    pub mean: Pct,
}

/// %-overrun of every record and per-strategy averages.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OverrunTable {
    /// Best cost per group; absent when no strategy solved the problem.
    pub minimum: BTreeMap<GroupKey, u64>,
    /// Overrun per record index, `None` for excluded problems.
    pub overrun: Vec<Option<Pct>>,
    pub averages: BTreeMap<SeriesKey, Average>,
}

impl OverrunTable {
    pub fn from_records(records: &[RunRecord]) -> OverrunTable {
        let mut minimum: BTreeMap<GroupKey, u64> = BTreeMap::new();
        for r in records.iter().filter(|r| r.solved()) {
            let m = minimum.entry(r.group()).or_insert(u64::MAX);
            *m = (*m).min(r.cost());
        }
        let overrun: Vec<Option<Pct>> = records
            .iter()
            .map(|r| {
                minimum
                    .get(&r.group())
                    .map(|&m| pct_overrun(r.cost(), m).expect("costs are positive"))
            })
            .collect();
        let mut sums: BTreeMap<SeriesKey, (usize, Pct)> = BTreeMap::new();
        for (r, o) in records.iter().zip(&overrun) {
            let key = SeriesKey {
                strategy: r.strategy.clone(),
                rank: r.rank.clone(),
                limit_kind: r.limit_kind,
                reverse: r.reverse,
            };
            let slot = sums.entry(key).or_insert((0, Pct::from_integer(0)));
            if let Some(o) = o {
                slot.0 += 1;
                slot.1 += o;
            }
        }
        let averages = sums
            .into_iter()
            .map(|(k, (n, sum))| {
                let mean = if n == 0 { sum } else { sum / n as i64 };
                (k, Average { problems: n, mean })
            })
            .collect();
        OverrunTable {
            minimum,
            overrun,
            averages,
        }
    }
}

/// Second-largest cost among the records for `problem`.
pub fn second_worst(records: &[RunRecord], problem: &str) -> Result<u64, BenchError> {
    let mut costs: Vec<u64> = records
        .iter()
        .filter(|r| r.problem == problem)
        .map(RunRecord::cost)
        .collect();
    if costs.len() < 2 {
        return Err(BenchError::TooFewRecords(problem.to_string()));
    }
    costs.sort_unstable_by(|a, b| b.cmp(a));
    Ok(costs[1])
}

/// A problem group where the second-worst strategy still finished below
/// the limit, so the limit did not cap the comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CeilingRow {
    pub group: GroupKey,
    pub second_worst: u64,
    pub below_limit: bool,
}

pub fn ceiling_report(records: &[RunRecord]) -> Vec<CeilingRow> {
    let mut groups: BTreeMap<GroupKey, Vec<RunRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.limit_kind == LimitKind::Nodes) {
        groups.entry(r.group()).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .filter_map(|(g, rs)| {
            let sw = second_worst(&rs, &g.problem).ok()?;
            Some(CeilingRow {
                below_limit: sw < g.limit_value,
                second_worst: sw,
                group: g,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Node-ranking functions as (label, weights).
    pub ranks: Vec<(String, RankWeights)>,
    pub node_limit: Option<u64>,
    /// Whole seconds.
    pub time_limit: Option<u64>,
    pub reverse: Vec<bool>,
    /// Base search settings; limits, rank and reversal are set per cell.
    pub search: SearchConfig,
    /// Keep wall-clock seconds for node-limit rows too.
    pub record_time: bool,
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            ranks: vec![("S+OC".into(), RankWeights::s_oc())],
            node_limit: Some(10_000),
            time_limit: None,
            reverse: vec![false],
            search: SearchConfig::default(),
            record_time: false,
            jobs: 1,
        }
    }
}

struct Cell<'a> {
    task: &'a Task,
    strategy: &'a Strategy,
    rank: &'a (String, RankWeights),
    limit: (LimitKind, u64),
    reverse: bool,
}

fn run_cell(cell: &Cell, cfg: &BenchConfig) -> RunRecord {
    let mut search = cfg.search.clone();
    search.rank = cell.rank.1;
    search.reverse_preconditions = cell.reverse;
    match cell.limit {
        (LimitKind::Nodes, n) => {
            search.node_limit = Some(n);
            search.time_limit = None;
        }
        (LimitKind::Time, s) => {
            search.node_limit = None;
            search.time_limit = Some(Duration::from_secs(s));
        }
    }
    let mut record = RunRecord {
        strategy: cell.strategy.label(),
        problem: cell.task.problem_name.to_string(),
        rank: cell.rank.0.clone(),
        limit_kind: cell.limit.0,
        limit_value: cell.limit.1,
        status: Status::Exhausted,
        error: None,
        nodes: 0,
        seconds: 0.0,
        timed: cfg.record_time || cell.limit.0 == LimitKind::Time,
        seed: search.seed,
        reverse: cell.reverse,
        grounded_vars: 0,
    };
    match plan(cell.task, cell.strategy, &search) {
        Ok(out) => {
            record.status = out.status;
            record.nodes = out.stats.generated;
            record.seconds = out.stats.seconds;
            record.grounded_vars = out.validation.map_or(0, |v| v.grounded_vars);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Runs every (strategy, problem, rank, limit, order) cell, `jobs` at a
/// time, and returns the records in a fixed order.
pub fn run_matrix(tasks: &[Task], strategies: &[Strategy], cfg: &BenchConfig) -> Vec<RunRecord> {
    let mut limits = Vec::new();
    if let Some(n) = cfg.node_limit {
        limits.push((LimitKind::Nodes, n));
    }
    if let Some(s) = cfg.time_limit {
        limits.push((LimitKind::Time, s));
    }
    let mut cells = Vec::new();
    for strategy in strategies {
        for task in tasks {
            for rank in &cfg.ranks {
                for &limit in &limits {
                    for &reverse in &cfg.reverse {
                        cells.push(Cell {
                            task,
                            strategy,
                            rank,
                            limit,
                            reverse,
                        });
                    }
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .expect("thread pool");
    let mut records: Vec<RunRecord> =
        pool.install(|| cells.par_iter().map(|c| run_cell(c, cfg)).collect());
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    records
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    strategy: String,
    problem: String,
    rank: String,
    limit_kind: LimitKind,
    limit_value: u64,
    status: String,
    nodes: u64,
    seconds: String,
    seed: u64,
    reverse: bool,
    overrun_pct: String,
}

/// Writes the records with their overruns, header first.
pub fn write_csv<W: io::Write>(out: W, records: &[RunRecord]) -> csv::Result<()> {
    let table = OverrunTable::from_records(records);
    let mut w = csv::Writer::from_writer(out);
    for (r, o) in records.iter().zip(&table.overrun) {
        w.serialize(CsvRow {
            strategy: r.strategy.clone(),
            problem: r.problem.clone(),
            rank: r.rank.clone(),
            limit_kind: r.limit_kind,
            limit_value: r.limit_value,
            status: r.status_label().to_string(),
            nodes: r.nodes,
            seconds: if r.timed {
                format!("{:.6}", r.seconds)
            } else {
                String::new()
            },
            seed: r.seed,
            reverse: r.reverse,
            overrun_pct: o.map(format_pct).unwrap_or_default(),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(records: &[RunRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

/// Reads records back from [`write_csv`] output.
pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<RunRecord>, BenchError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize::<CsvRow>() {
        let row = row.map_err(|e| BenchError::Csv(e.to_string()))?;
        let (status, error) = match row.status.as_str() {
            "solved" => (Status::Solved, None),
            "exhausted" => (Status::Exhausted, None),
            "node-limit" => (Status::NodeLimit, None),
            "time-limit" => (Status::TimeLimit, None),
            "error" => (Status::Exhausted, Some("error".to_string())),
            other => return Err(BenchError::Csv(format!("unknown status '{other}'"))),
        };
        let timed = !row.seconds.is_empty();
        let seconds = if timed {
            row.seconds
                .parse()
                .map_err(|_| BenchError::Csv(format!("bad seconds '{}'", row.seconds)))?
        } else {
            0.0
        };
        out.push(RunRecord {
            strategy: row.strategy,
            problem: row.problem,
            rank: row.rank,
            limit_kind: row.limit_kind,
            limit_value: row.limit_value,
            status,
            error,
            nodes: row.nodes,
            seconds,
            timed,
            seed: row.seed,
            reverse: row.reverse,
            grounded_vars: 0,
        });
    }
    Ok(out)
}
