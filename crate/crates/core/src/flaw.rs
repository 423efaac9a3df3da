//! Flaws, their classification, repair enumeration and repair cost.

use std::fmt;

use crate::ordering::{StepId, START};
use crate::plan::{LinkId, PartialPlan};
use crate::task::Task;
use crate::term::{Literal, Rep, Term};

/// The three flaw types strategies discriminate on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlawType {
    Open,
    Nonseparable,
    Separable,
}

impl FlawType {
    pub const ALL: [FlawType; 3] = [FlawType::Open, FlawType::Nonseparable, FlawType::Separable];

    pub fn letter(self) -> char {
        match self {
            FlawType::Open => 'o',
            FlawType::Nonseparable => 'n',
            FlawType::Separable => 's',
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            FlawType::Open => "open conditions",
            FlawType::Nonseparable => "nonseparable threats",
            FlawType::Separable => "separable threats",
        }
    }
}

impl fmt::Display for FlawType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlawKind {
    /// Precondition `precondition` of `step` has no causal link yet.
    Open { step: StepId, precondition: usize },
    /// Effect `effect` of `step` may clobber `link`.
    Threat {
        step: StepId,
        effect: usize,
        link: LinkId,
        separable: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flaw {
    pub kind: FlawKind,
    pub inserted_at: u64,
    /// Cost recorded when the flaw entered the agenda (cached-cost mode).
    pub cached_cost: Option<u32>,
    /// Exact cost memo, valid only for the plan currently holding the flaw.
    pub(crate) cost: Option<u32>,
}

impl Flaw {
    pub fn flaw_type(&self) -> FlawType {
        match self.kind {
            FlawKind::Open { .. } => FlawType::Open,
            FlawKind::Threat {
                separable: true, ..
            } => FlawType::Separable,
            FlawKind::Threat { .. } => FlawType::Nonseparable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Repair {
    /// Link from the start step. `effect: None` is closed-world support of a
    /// negative condition whose atom is absent from the initial state.
    Start {
        effect: Option<usize>,
    },
    Reuse {
        step: StepId,
        effect: usize,
    },
    NewStep {
        operator: usize,
        effect: usize,
    },
    /// Order the threat after the link's consumer.
    Promote,
    /// Order the threat before the link's producer.
    Demote,
    Separate {
        a: Term,
        b: Term,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CostMode {
    Exact,
    /// Costs are computed once, when a flaw enters the agenda.
    Cached,
}

/// What the flaw engine needs besides the plan itself.
#[derive(Debug, Clone, Copy)]
pub struct FlawContext<'a> {
    pub task: &'a Task,
    pub mode: CostMode,
    /// Treat effects that could re-establish a linked condition as threats.
    pub systematic: bool,
}

impl<'a> FlawContext<'a> {
    pub fn new(task: &'a Task) -> Self {
        FlawContext {
            task,
            mode: CostMode::Exact,
            systematic: false,
        }
    }
}

/// Liveness of a threat ignoring polarity: `Some(separable)` while the
/// step still sits inside the link's span and its effect can still unify
/// with the linked condition.
pub fn threat_status(
    plan: &PartialPlan,
    step: StepId,
    effect: usize,
    link: LinkId,
) -> Option<bool> {
    let l = plan.link(link);
    if step == l.producer
        || step == l.consumer
        || plan.precedes(step, l.producer)
        || plan.precedes(l.consumer, step)
    {
        return None;
    }
    let e = &plan.step(step).effects[effect];
    let q = plan.link_condition(link);
    if !e.same_shape(q) || !plan.bindings.unifiable_args(&e.args, &q.args) {
        return None;
    }
    let forced = e
        .args
        .iter()
        .zip(&q.args)
        .all(|(&a, &b)| plan.bindings.codesignates(a, b));
    Some(!forced)
}

fn threatening_polarity(e: &Literal, q: &Literal, systematic: bool) -> bool {
    e.positive != q.positive || systematic
}

/// Threats created by a new step and/or a new link, ordered by link id,
/// then step id, then effect index.
pub fn detect_new_threats(
    plan: &PartialPlan,
    new_step: Option<StepId>,
    new_link: Option<LinkId>,
    systematic: bool,
) -> Vec<FlawKind> {
    let mut candidates: Vec<(LinkId, StepId, usize)> = Vec::new();
    if let Some(s) = new_step {
        let n = plan.step(s).effects.len();
        for l in 0..plan.links.len() as LinkId {
            candidates.extend((0..n).map(|e| (l, s, e)));
        }
    }
    if let Some(l) = new_link {
        for s in plan.steps() {
            if Some(s.id) == new_step {
                continue;
            }
            candidates.extend((0..s.effects.len()).map(|e| (l, s.id, e)));
        }
    }
    candidates.sort_unstable();
    candidates
        .into_iter()
        .filter(|&(l, s, e)| {
            threatening_polarity(&plan.step(s).effects[e], plan.link_condition(l), systematic)
        })
        .filter_map(|(link, step, effect)| {
            threat_status(plan, step, effect, link).map(|separable| FlawKind::Threat {
                step,
                effect,
                link,
                separable,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refresh {
    Live,
    Vanished,
    /// A separable threat whose unification has become forced.
    Reclassified,
}

pub fn refresh_flaw(plan: &PartialPlan, flaw: &Flaw) -> Refresh {
    match flaw.kind {
        FlawKind::Open { .. } => Refresh::Live,
        FlawKind::Threat {
            step,
            effect,
            link,
            separable,
        } => match threat_status(plan, step, effect, link) {
            None => Refresh::Vanished,
            Some(s) if s == separable => Refresh::Live,
            Some(_) => Refresh::Reclassified,
        },
    }
}

/// Calls `visit` on every repair of open condition `precondition` of
/// `step`, in the order start, existing steps, new steps.
pub fn visit_open_repairs(
    plan: &PartialPlan,
    task: &Task,
    step: StepId,
    precondition: usize,
    mut visit: impl FnMut(Repair),
) {
    let q = &plan.step(step).preconditions[precondition];
    let b = &plan.bindings;
    let start = plan.step(START);
    for (j, e) in start.effects.iter().enumerate() {
        if b.unifiable(q, e) {
            visit(Repair::Start { effect: Some(j) });
        }
    }
    if !q.positive {
        // no binding can turn the atom into an initial fact
        let atom = q.negated();
        if !start.effects.iter().any(|e| b.unifiable(&atom, e)) {
            visit(Repair::Start { effect: None });
        }
    }
    for s in &plan.steps[2..] {
        if s.id == step || plan.precedes(step, s.id) {
            continue;
        }
        for (j, e) in s.effects.iter().enumerate() {
            if b.unifiable(q, e) {
                visit(Repair::Reuse {
                    step: s.id,
                    effect: j,
                });
            }
        }
    }
    for (k, op) in task.operators.iter().enumerate() {
        for (j, e) in op.effects.iter().enumerate() {
            if b.unifiable_with_template(q, e, &op.neq) {
                visit(Repair::NewStep {
                    operator: k,
                    effect: j,
                });
            }
        }
    }
}

/// Calls `visit` on every repair of a threat: promotion, demotion, then
/// one separation per argument pair not yet decided either way.
pub fn visit_threat_repairs(
    plan: &PartialPlan,
    step: StepId,
    effect: usize,
    link: LinkId,
    separable: bool,
    mut visit: impl FnMut(Repair),
) {
    let l = plan.link(link);
    if !plan.precedes(step, l.consumer) {
        visit(Repair::Promote);
    }
    if !plan.precedes(l.producer, step) {
        visit(Repair::Demote);
    }
    if !separable {
        return;
    }
    let e = &plan.step(step).effects[effect];
    let q = plan.link_condition(link);
    let b = &plan.bindings;
    let mut seen: Vec<(Rep, Rep)> = Vec::new();
    for (&x, &y) in e.args.iter().zip(&q.args) {
        if b.codesignates(x, y) || b.noncodesignates(x, y) {
            continue;
        }
        let (rx, ry) = (b.rep(x), b.rep(y));
        let key = if rx <= ry { (rx, ry) } else { (ry, rx) };
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        visit(Repair::Separate { a: x, b: y });
    }
}

pub fn visit_repairs(plan: &PartialPlan, task: &Task, kind: FlawKind, visit: impl FnMut(Repair)) {
    match kind {
        FlawKind::Open { step, precondition } => {
            visit_open_repairs(plan, task, step, precondition, visit)
        }
        FlawKind::Threat {
            step,
            effect,
            link,
            separable,
        } => visit_threat_repairs(plan, step, effect, link, separable, visit),
    }
}

pub fn enumerate_repairs(plan: &PartialPlan, task: &Task, kind: FlawKind) -> Vec<Repair> {
    let mut out = Vec::new();
    visit_repairs(plan, task, kind, |r| out.push(r));
    out
}

/// Number of repairs of `kind` in `plan`, counted without allocation.
pub fn exact_cost(plan: &PartialPlan, task: &Task, kind: FlawKind) -> u32 {
    let mut n = 0;
    visit_repairs(plan, task, kind, |_| n += 1);
    n
}

/// Repair cost of agenda entry `flaw` under the given mode.
pub fn repair_cost(plan: &PartialPlan, flaw: &Flaw, ctx: &FlawContext) -> u32 {
    if ctx.mode == CostMode::Cached {
        if let Some(c) = flaw.cached_cost {
            return c;
        }
    }
    flaw.cost
        .unwrap_or_else(|| exact_cost(plan, ctx.task, flaw.kind))
}

/// Open-condition repair mix used by the `New` tie-break: lower ranks are
/// preferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RepairMix {
    NewOnly,
    ReuseOnly,
    StartOnly,
    Mixed,
}

pub fn repair_mix(plan: &PartialPlan, task: &Task, kind: FlawKind) -> RepairMix {
    let FlawKind::Open { step, precondition } = kind else {
        return RepairMix::Mixed;
    };
    let (mut start, mut reuse, mut new) = (0u32, 0u32, 0u32);
    visit_open_repairs(plan, task, step, precondition, |r| match r {
        Repair::Start { .. } => start += 1,
        Repair::Reuse { .. } => reuse += 1,
        _ => new += 1,
    });
    match (start, reuse, new) {
        (0, 0, n) if n > 0 => RepairMix::NewOnly,
        (0, r, 0) if r > 0 => RepairMix::ReuseOnly,
        (s, 0, 0) if s > 0 => RepairMix::StartOnly,
        _ => RepairMix::Mixed,
    }
}
