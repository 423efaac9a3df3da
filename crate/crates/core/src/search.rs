//! Best-first plan-space search.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::flaw::{
    detect_new_threats, enumerate_repairs, exact_cost, refresh_flaw, repair_cost, CostMode,
    FlawContext, FlawKind, FlawType, Refresh, Repair,
};
use crate::ordering::{StepId, START};
use crate::plan::{validate_solution, PartialPlan, RankInputs, Validation, ValidationError};
use crate::strategy::Strategy;
use crate::task::Task;

pub type Rank = Ratio<i64>;

/// Coefficients of steps, open conditions and threats in the node rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankWeights {
    pub steps: Rank,
    pub open: Rank,
    pub threats: Rank,
}

impl RankWeights {
    /// `S + OC`.
    pub fn s_oc() -> Self {
        RankWeights {
            steps: Rank::from_integer(1),
            open: Rank::from_integer(1),
            threats: Rank::from_integer(0),
        }
    }

    /// Parses sums of weighted terms such as `S+OC`, `S + OC + .1UC` or
    /// `2S+OC`.
    pub fn parse(text: &str) -> Result<RankWeights, String> {
        let mut w = RankWeights {
            steps: Rank::from_integer(0),
            open: Rank::from_integer(0),
            threats: Rank::from_integer(0),
        };
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err("empty rank function".into());
        }
        for term in compact.split('+') {
            let split = term
                .find(|c: char| c.is_ascii_alphabetic())
                .ok_or_else(|| format!("term '{term}' names no quantity"))?;
            let (coef, name) = term.split_at(split);
            let coef = if coef.is_empty() {
                Rank::from_integer(1)
            } else {
                parse_decimal(coef).ok_or_else(|| format!("bad coefficient '{coef}'"))?
            };
            let slot = match name {
                "S" => &mut w.steps,
                "OC" => &mut w.open,
                "UC" => &mut w.threats,
                other => return Err(format!("unknown rank quantity '{other}'")),
            };
            *slot += coef;
        }
        Ok(w)
    }
}

fn parse_decimal(text: &str) -> Option<Rank> {
    let (whole, frac) = text.split_once('.').unwrap_or((text, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole
        .chars()
        .chain(frac.chars())
        .all(|c| c.is_ascii_digit())
        || frac.len() > 9
    {
        return None;
    }
    let w: i64 = if whole.is_empty() {
        0
    } else {
        whole.parse().ok()?
    };
    let f: i64 = if frac.is_empty() {
        0
    } else {
        frac.parse().ok()?
    };
    let denom = 10i64.pow(frac.len() as u32);
    Some(Rank::from_integer(w) + Rank::new(f, denom))
}

pub fn rank(inputs: RankInputs, w: &RankWeights) -> Rank {
    w.steps * i64::from(inputs.steps)
        + w.open * i64::from(inputs.open_conditions)
        + w.threats * i64::from(inputs.threats)
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub rank: RankWeights,
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
    pub reverse_preconditions: bool,
    pub cost_mode: CostMode,
    pub dead_end_pruning: bool,
    pub dmin: bool,
    pub systematic: bool,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            rank: RankWeights::s_oc(),
            node_limit: Some(10_000),
            time_limit: None,
            reverse_preconditions: false,
            cost_mode: CostMode::Exact,
            dead_end_pruning: true,
            dmin: false,
            systematic: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Status {
    Solved,
    Exhausted,
    NodeLimit,
    TimeLimit,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Solved => "solved",
            Status::Exhausted => "exhausted",
            Status::NodeLimit => "node-limit",
            Status::TimeLimit => "time-limit",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stats {
    /// Every node created, the root and pruned children included.
    pub generated: u64,
    pub expanded: u64,
    pub pruned: u64,
    pub max_frontier: usize,
    pub seconds: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub status: Status,
    pub plan: Option<PartialPlan>,
    pub validation: Option<Validation>,
    pub stats: Stats,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SearchError {
    #[error("returned plan failed validation: {0}")]
    Unsound(ValidationError),
    #[error("inconsistent configuration: {0}")]
    Config(String),
}

/// Effective knobs of one run, shared by refinement and pruning.
#[derive(Debug, Clone, Copy)]
pub struct Refiner<'a> {
    pub ctx: FlawContext<'a>,
    pub reverse: bool,
    pub pruning: bool,
    pub dmin: bool,
}

impl<'a> Refiner<'a> {
    pub fn new(task: &'a Task, strategy: &Strategy, config: &SearchConfig) -> Self {
        let mode = config.cost_mode.max(strategy.cost_mode);
        Refiner {
            ctx: FlawContext {
                task,
                mode,
                systematic: config.systematic,
            },
            reverse: config.reverse_preconditions,
            pruning: config.dead_end_pruning,
            dmin: config.dmin,
        }
    }

    /// The root node, refreshed and costed like any child.
    pub fn root(&self) -> PartialPlan {
        let mut p = PartialPlan::skeletal(self.ctx.task, self.reverse);
        self.settle(&mut p, 0);
        p
    }

    /// One child per consistent repair of agenda entry `index`.
    pub fn refinements(&self, plan: &PartialPlan, index: usize) -> Vec<PartialPlan> {
        let kind = plan.agenda()[index].kind;
        enumerate_repairs(plan, self.ctx.task, kind)
            .into_iter()
            .filter_map(|r| self.apply(plan, index, r))
            .collect()
    }

    /// Applies `repair` to the flaw at agenda `index`; `None` when the
    /// result would be inconsistent.
    pub fn apply(&self, plan: &PartialPlan, index: usize, repair: Repair) -> Option<PartialPlan> {
        let mut child = plan.clone();
        let first_stamp = child.next_stamp;
        for f in &mut child.agenda {
            f.cost = None;
        }
        let flaw = child.remove_flaw(index);
        let task = self.ctx.task;
        let mut new_step = None;
        let mut new_link = None;
        match (flaw.kind, repair) {
            (FlawKind::Open { step, precondition }, r) => {
                let (producer, effect) = match r {
                    Repair::Start { effect } => (START, effect),
                    Repair::Reuse { step: s, effect } => (s, Some(effect)),
                    Repair::NewStep { operator, effect } => {
                        let s = child.add_step(operator, &task.operators[operator]);
                        let n = child.step(s).preconditions.len();
                        child.push_opens(s, n, self.reverse);
                        new_step = Some(s);
                        (s, Some(effect))
                    }
                    _ => return None,
                };
                if let Some(e) = effect {
                    let q = &child.step(step).preconditions[precondition];
                    let eff = &child.step(producer).effects[e];
                    child.bindings = child.bindings.unify(q, eff)?;
                }
                if !child.orderings.insert(producer, step) {
                    return None;
                }
                new_link = Some(child.add_link(producer, effect, step, precondition));
            }
            (FlawKind::Threat { step, link, .. }, r) => {
                let l = *child.link(link);
                match r {
                    Repair::Promote => {
                        if !child.orderings.insert(l.consumer, step) {
                            return None;
                        }
                    }
                    Repair::Demote => {
                        if !child.orderings.insert(step, l.producer) {
                            return None;
                        }
                    }
                    Repair::Separate { a, b } => {
                        child.bindings = child.bindings.add_noncodesignation(a, b)?;
                    }
                    _ => return None,
                }
            }
        }
        for kind in detect_new_threats(&child, new_step, new_link, self.ctx.systematic) {
            child.push_flaw(kind, None);
        }
        self.settle(&mut child, first_stamp);
        Some(child)
    }

    /// Drops vanished threats, reclassifies forced ones, records insertion
    /// costs of flaws stamped from `first_stamp` on and memoizes exact
    /// costs when they are going to be needed.
    fn settle(&self, plan: &mut PartialPlan, first_stamp: u64) {
        let mut i = 0;
        while i < plan.agenda.len() {
            match refresh_flaw(plan, &plan.agenda[i]) {
                Refresh::Live => i += 1,
                Refresh::Vanished => {
                    plan.remove_flaw(i);
                }
                Refresh::Reclassified => {
                    if let FlawKind::Threat { separable, .. } = &mut plan.agenda[i].kind {
                        *separable = !*separable;
                    }
                    i += 1;
                }
            }
        }
        let task = self.ctx.task;
        if self.ctx.mode == CostMode::Cached {
            for i in 0..plan.agenda.len() {
                if plan.agenda[i].inserted_at >= first_stamp && plan.agenda[i].cached_cost.is_none()
                {
                    let c = exact_cost(plan, task, plan.agenda[i].kind);
                    plan.agenda[i].cached_cost = Some(c);
                }
            }
        }
        if self.pruning || self.dmin {
            for i in 0..plan.agenda.len() {
                if plan.agenda[i].cost.is_none() {
                    let c = exact_cost(plan, task, plan.agenda[i].kind);
                    plan.agenda[i].cost = Some(c);
                }
            }
        }
    }

    /// Whether a freshly created node is a dead end that need not be queued.
    pub fn is_dead_end(&self, plan: &PartialPlan) -> bool {
        if self.pruning
            && plan
                .agenda
                .iter()
                .any(|f| repair_cost(plan, f, &self.ctx) == 0)
        {
            return true;
        }
        if self.dmin {
            let forced = plan.agenda.iter().any(|f| {
                f.flaw_type() == FlawType::Nonseparable
                    && f.cost
                        .unwrap_or_else(|| exact_cost(plan, self.ctx.task, f.kind))
                        <= 1
            });
            if !forced && !dmin_feasible(plan) {
                return true;
            }
        }
        false
    }
}

/// Whether every nonseparable threat can be resolved at once by some
/// choice of promotion or demotion for each.
pub fn dmin_feasible(plan: &PartialPlan) -> bool {
    let choices: Vec<[(StepId, StepId); 2]> = plan
        .agenda()
        .iter()
        .filter_map(|f| match f.kind {
            FlawKind::Threat {
                step,
                link,
                separable: false,
                ..
            } => {
                let l = plan.link(link);
                Some([(l.consumer, step), (step, l.producer)])
            }
            _ => None,
        })
        .collect();
    fn go(orderings: &crate::ordering::OrderingStore, rest: &[[(StepId, StepId); 2]]) -> bool {
        let Some((first, rest)) = rest.split_first() else {
            return true;
        };
        first
            .iter()
            .any(|&(a, b)| orderings.with(a, b).is_some_and(|next| go(&next, rest)))
    }
    go(plan.orderings(), &choices)
}

struct Entry {
    rank: Rank,
    generation: u64,
    plan: PartialPlan,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.rank == other.rank && self.generation == other.generation
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (Reverse(self.rank), self.generation).cmp(&(Reverse(other.rank), other.generation))
    }
}

/// Runs the search to a solution, exhaustion or a limit.
pub fn plan(
    task: &Task,
    strategy: &Strategy,
    config: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    plan_observed(task, strategy, config, |_| {})
}

/// Like [`plan`], calling `observe` on every node put on the frontier.
pub fn plan_observed(
    task: &Task,
    strategy: &Strategy,
    config: &SearchConfig,
    mut observe: impl FnMut(&PartialPlan),
) -> Result<SearchOutcome, SearchError> {
    if config.node_limit == Some(0) {
        return Err(SearchError::Config("node limit must be positive".into()));
    }
    let started = Instant::now();
    let refiner = Refiner::new(task, strategy, config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stats = Stats {
        seed: config.seed,
        ..Stats::default()
    };
    let mut frontier = BinaryHeap::new();
    let root = refiner.root();
    stats.generated = 1;
    if refiner.is_dead_end(&root) {
        stats.pruned = 1;
    } else {
        observe(&root);
        frontier.push(Entry {
            rank: rank(root.rank_inputs(), &config.rank),
            generation: 0,
            plan: root,
        });
    }
    stats.max_frontier = frontier.len();
    let finish = |status, plan: Option<PartialPlan>, validation, mut stats: Stats| {
        stats.seconds = started.elapsed().as_secs_f64();
        SearchOutcome {
            status,
            plan,
            validation,
            stats,
        }
    };
    let timed_out = || config.time_limit.is_some_and(|t| started.elapsed() >= t);

    while let Some(Entry { plan: node, .. }) = frontier.pop() {
        if node.is_complete() {
            let v = validate_solution(&node, task).map_err(SearchError::Unsound)?;
            return Ok(finish(Status::Solved, Some(node), Some(v), stats));
        }
        stats.expanded += 1;
        let index = strategy
            .select(&node, &refiner.ctx, &mut rng)
            .expect("incomplete node has flaws");
        let kind = node.agenda()[index].kind;
        for repair in enumerate_repairs(&node, task, kind) {
            let Some(child) = refiner.apply(&node, index, repair) else {
                continue;
            };
            stats.generated += 1;
            if refiner.is_dead_end(&child) {
                stats.pruned += 1;
            } else {
                observe(&child);
                frontier.push(Entry {
                    rank: rank(child.rank_inputs(), &config.rank),
                    generation: stats.generated,
                    plan: child,
                });
            }
            if stats.generated.is_multiple_of(64) && timed_out() {
                return Ok(finish(Status::TimeLimit, None, None, stats));
            }
        }
        stats.max_frontier = stats.max_frontier.max(frontier.len());
        if config.node_limit.is_some_and(|n| stats.generated >= n) {
            return Ok(finish(Status::NodeLimit, None, None, stats));
        }
    }
    Ok(finish(Status::Exhausted, None, None, stats))
}
