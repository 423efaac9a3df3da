//! Steps, causal links and the immutable partial-plan search node.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use crate::domain::Operator;
use crate::flaw::{Flaw, FlawKind};
use crate::ordering::{OrderingStore, StepId, GOAL, START};
use crate::symbol::Symbol;
use crate::task::Task;
use crate::term::{BindingStore, Literal, Rep, Term, Var};

pub type LinkId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub id: StepId,
    /// Index into the task's operator library; `None` for the dummies.
    pub operator: Option<usize>,
    pub name: Symbol,
    pub args: Vec<Term>,
    pub preconditions: Vec<Literal>,
    pub effects: Vec<Literal>,
    pub created_at: u64,
}

impl Step {
    /// A fresh instance of `op` whose parameters become variables
    /// `first_var..first_var + params`. Returns the step and the instance's
    /// noncodesignation constraints.
    pub fn instantiate(
        id: StepId,
        index: usize,
        op: &Operator,
        first_var: u32,
        created_at: u64,
    ) -> (Step, Vec<(Term, Term)>) {
        let fresh = |v: Var| Term::Var(Var(first_var + v.0));
        let rename = |t: Term| match t {
            Term::Var(v) => fresh(v),
            c => c,
        };
        let step = Step {
            id,
            operator: Some(index),
            name: op.name,
            args: (0..op.params.len() as u32).map(|i| fresh(Var(i))).collect(),
            preconditions: op.preconditions.iter().map(|l| l.map_vars(fresh)).collect(),
            effects: op.effects.iter().map(|l| l.map_vars(fresh)).collect(),
            created_at,
        };
        let neq = op
            .neq
            .iter()
            .map(|&(a, b)| (rename(a), rename(b)))
            .collect();
        (step, neq)
    }

    pub fn is_dummy(&self) -> bool {
        self.operator.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CausalLink {
    pub producer: StepId,
    pub consumer: StepId,
    /// Index of the supported precondition in the consumer.
    pub precondition: usize,
    /// Index of the producing effect; `None` when the start step supports a
    /// negative condition by the closed-world assumption.
    pub effect: Option<usize>,
    pub created_at: u64,
}

/// A node of the plan-space search. Refinements clone the parent and
/// extend the copy; a plan is never modified once it has been enqueued.
#[derive(Debug, Clone)]
pub struct PartialPlan {
    pub(crate) steps: Vec<Arc<Step>>,
    pub(crate) links: Vec<CausalLink>,
    pub(crate) orderings: OrderingStore,
    pub(crate) bindings: BindingStore,
    pub(crate) agenda: Vec<Flaw>,
    pub(crate) next_var: u32,
    pub(crate) next_stamp: u64,
    pub(crate) open_count: u32,
    pub(crate) threat_count: u32,
}

/// The three quantities node-ranking functions are built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RankInputs {
    /// Steps, excluding the two dummies.
    pub steps: u32,
    pub open_conditions: u32,
    pub threats: u32,
}

impl PartialPlan {
    /// The initial node: start holds the initial state as effects, goal
    /// holds the goal as preconditions, and every goal literal is an open
    /// condition. With `reverse`, the goal conditions enter the agenda last
    /// to first.
    pub fn skeletal(task: &Task, reverse: bool) -> PartialPlan {
        let start = Step {
            id: START,
            operator: None,
            name: Symbol::intern("start"),
            args: Vec::new(),
            preconditions: Vec::new(),
            effects: task.init.clone(),
            created_at: 0,
        };
        let goal = Step {
            id: GOAL,
            operator: None,
            name: Symbol::intern("goal"),
            args: Vec::new(),
            preconditions: task.goal.clone(),
            effects: Vec::new(),
            created_at: 0,
        };
        let mut plan = PartialPlan {
            steps: vec![Arc::new(start), Arc::new(goal)],
            links: Vec::new(),
            orderings: OrderingStore::new(),
            bindings: BindingStore::new(),
            agenda: Vec::new(),
            next_var: 0,
            next_stamp: 1,
            open_count: 0,
            threat_count: 0,
        };
        plan.push_opens(GOAL, task.goal.len(), reverse);
        plan
    }

    pub fn steps(&self) -> &[Arc<Step>] {
        &self.steps
    }

    pub fn step(&self, id: StepId) -> &Step {
        &self.steps[id as usize]
    }

    pub fn links(&self) -> &[CausalLink] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &CausalLink {
        &self.links[id as usize]
    }

    pub fn link_condition(&self, id: LinkId) -> &Literal {
        let link = self.link(id);
        &self.step(link.consumer).preconditions[link.precondition]
    }

    pub fn orderings(&self) -> &OrderingStore {
        &self.orderings
    }

    pub fn bindings(&self) -> &BindingStore {
        &self.bindings
    }

    pub fn agenda(&self) -> &[Flaw] {
        &self.agenda
    }

    pub fn is_complete(&self) -> bool {
        self.agenda.is_empty()
    }

    pub fn precedes(&self, a: StepId, b: StepId) -> bool {
        self.orderings.precedes(a, b)
    }

    /// A copy of the plan with `before ≺ after` added, or `None` on a cycle.
    pub fn add_ordering(&self, before: StepId, after: StepId) -> Option<PartialPlan> {
        let orderings = self.orderings.with(before, after)?;
        Some(PartialPlan {
            orderings,
            ..self.clone()
        })
    }

    pub fn linearize(&self) -> Option<Vec<StepId>> {
        self.orderings.linearize()
    }

    pub fn rank_inputs(&self) -> RankInputs {
        RankInputs {
            steps: self.steps.len() as u32 - 2,
            open_conditions: self.open_count,
            threats: self.threat_count,
        }
    }

    /// Rank inputs recounted from the agenda.
    pub fn recount(&self) -> RankInputs {
        let opens = self
            .agenda
            .iter()
            .filter(|f| matches!(f.kind, FlawKind::Open { .. }))
            .count() as u32;
        RankInputs {
            steps: self.steps.len() as u32 - 2,
            open_conditions: opens,
            threats: self.agenda.len() as u32 - opens,
        }
    }

    pub(crate) fn stamp(&mut self) -> u64 {
        let s = self.next_stamp;
        self.next_stamp += 1;
        s
    }

    pub(crate) fn push_flaw(&mut self, kind: FlawKind, cached_cost: Option<u32>) {
        let inserted_at = self.stamp();
        match kind {
            FlawKind::Open { .. } => self.open_count += 1,
            FlawKind::Threat { .. } => self.threat_count += 1,
        }
        self.agenda.push(Flaw {
            kind,
            inserted_at,
            cached_cost,
            cost: None,
        });
    }

    pub(crate) fn remove_flaw(&mut self, index: usize) -> Flaw {
        let f = self.agenda.remove(index);
        match f.kind {
            FlawKind::Open { .. } => self.open_count -= 1,
            FlawKind::Threat { .. } => self.threat_count -= 1,
        }
        f
    }

    pub(crate) fn push_opens(&mut self, step: StepId, count: usize, reverse: bool) {
        let order: Vec<usize> = if reverse {
            (0..count).rev().collect()
        } else {
            (0..count).collect()
        };
        for precondition in order {
            self.push_flaw(FlawKind::Open { step, precondition }, None);
        }
    }

    /// Adds a fresh instance of library operator `index`, ordered between
    /// the dummies. Its own disequalities are added to the bindings.
    pub(crate) fn add_step(&mut self, index: usize, op: &Operator) -> StepId {
        let id = self.orderings.add_step();
        debug_assert_eq!(id as usize, self.steps.len());
        let created_at = self.stamp();
        let (step, neq) = Step::instantiate(id, index, op, self.next_var, created_at);
        self.next_var += op.params.len() as u32;
        for (a, b) in neq {
            // parameters are fresh, so the only failure is a (not (= c c))
            // on two identical constants
            match self.bindings.add_noncodesignation(a, b) {
                Some(s) => self.bindings = s,
                None => debug_assert!(false, "operator forbids equal constants"),
            }
        }
        self.steps.push(Arc::new(step));
        id
    }

    pub(crate) fn add_link(
        &mut self,
        producer: StepId,
        effect: Option<usize>,
        consumer: StepId,
        precondition: usize,
    ) -> LinkId {
        let created_at = self.stamp();
        self.links.push(CausalLink {
            producer,
            consumer,
            precondition,
            effect,
            created_at,
        });
        self.links.len() as LinkId - 1
    }

    /// Deterministic text form: steps, links, orderings, bindings, agenda.
    /// Insertion stamps and cost memos are left out.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PartialPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "steps:")?;
        for s in &self.steps {
            write!(f, "  {} {}", s.id, s.name)?;
            if !s.args.is_empty() {
                f.write_str("(")?;
                for (i, a) in s.args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")?;
            }
            writeln!(f)?;
        }
        writeln!(f, "links:")?;
        for (i, l) in self.links.iter().enumerate() {
            writeln!(
                f,
                "  {} --{}--> {}",
                l.producer,
                self.link_condition(i as LinkId),
                l.consumer
            )?;
        }
        write!(f, "orderings:")?;
        let mut edges = self.orderings.edges().to_vec();
        edges.sort_unstable();
        for (a, b) in edges {
            write!(f, " {a}<{b}")?;
        }
        writeln!(f)?;
        write!(f, "bindings:")?;
        for (rep, members) in self.bindings.classes() {
            f.write_str(" {")?;
            for m in members {
                write!(f, "{} ", Term::Var(m))?;
            }
            match rep {
                Rep::Const(c) => write!(f, "= {c}}}")?,
                Rep::Var(v) => write!(f, "= {}}}", Term::Var(v))?,
            }
        }
        for (a, b) in self.bindings.neq_pairs() {
            write!(f, " {a}!={b}")?;
        }
        writeln!(f)?;
        writeln!(f, "agenda:")?;
        for flaw in &self.agenda {
            match flaw.kind {
                FlawKind::Open { step, precondition } => writeln!(
                    f,
                    "  o {}#{} {}",
                    step,
                    precondition,
                    self.step(step).preconditions[precondition]
                )?,
                FlawKind::Threat {
                    step,
                    effect,
                    link,
                    separable,
                } => writeln!(
                    f,
                    "  {} {} {} vs link {}",
                    if separable { "s" } else { "n" },
                    step,
                    self.step(step).effects[effect],
                    link
                )?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("plan still has {0} flaw(s)")]
    Incomplete(usize),
    #[error("invariant breach: {0}")]
    InvariantBreach(String),
    #[error("cannot ground variable {0} consistently with the binding constraints")]
    Ungroundable(Term),
    #[error("step {position} ({step}) of the linearization: precondition {literal} does not hold")]
    Precondition {
        position: usize,
        step: String,
        literal: Literal,
    },
    #[error("goal {0} does not hold at the end of the plan")]
    Goal(Literal),
}

/// A successful validation: the executed order, the grounded actions and
/// how many free variable classes had to be grounded arbitrarily.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validation {
    pub order: Vec<StepId>,
    pub actions: Vec<String>,
    pub grounded_vars: usize,
}

/// Soundness check: linearize, ground leftover variables, and execute the
/// result from the initial state under the closed-world assumption.
pub fn validate_solution(plan: &PartialPlan, task: &Task) -> Result<Validation, ValidationError> {
    if !plan.agenda.is_empty() {
        return Err(ValidationError::Incomplete(plan.agenda.len()));
    }
    check_invariants(plan)?;
    let order = plan.linearize().ok_or_else(|| {
        ValidationError::InvariantBreach("ordering constraints are cyclic".into())
    })?;
    let (ground, grounded_vars) = ground_variables(plan, task)?;
    let ground_lit = |l: &Literal| Literal {
        positive: true,
        predicate: l.predicate,
        args: l.args.iter().map(|&t| Term::Const(ground(t))).collect(),
    };

    let mut state: HashSet<Literal> = task.init.iter().cloned().collect();
    let mut actions = Vec::new();
    for (position, &id) in order.iter().enumerate() {
        if id == START {
            continue;
        }
        let step = plan.step(id);
        for pre in &step.preconditions {
            let atom = ground_lit(pre);
            if state.contains(&atom) != pre.positive {
                let literal = Literal {
                    positive: pre.positive,
                    ..atom
                };
                return Err(if id == GOAL {
                    ValidationError::Goal(literal)
                } else {
                    ValidationError::Precondition {
                        position,
                        step: step.name.to_string(),
                        literal,
                    }
                });
            }
        }
        if id == GOAL {
            continue;
        }
        for eff in step.effects.iter().filter(|e| !e.positive) {
            state.remove(&ground_lit(eff));
        }
        for eff in step.effects.iter().filter(|e| e.positive) {
            state.insert(ground_lit(eff));
        }
        let args: Vec<String> = step.args.iter().map(|&t| ground(t).to_string()).collect();
        actions.push(format!("({} {})", step.name, args.join(" ")).replace(" )", ")"));
    }
    Ok(Validation {
        order,
        actions,
        grounded_vars,
    })
}

/// Checks the structural invariants a complete plan must satisfy before
/// it is worth simulating.
pub fn check_invariants(plan: &PartialPlan) -> Result<(), ValidationError> {
    let mut supported = HashSet::new();
    for (i, l) in plan.links.iter().enumerate() {
        if !plan.precedes(l.producer, l.consumer) {
            return Err(ValidationError::InvariantBreach(format!(
                "link {i} producer {} does not precede consumer {}",
                l.producer, l.consumer
            )));
        }
        if !supported.insert((l.consumer, l.precondition)) {
            return Err(ValidationError::InvariantBreach(format!(
                "precondition {}#{} has two links",
                l.consumer, l.precondition
            )));
        }
    }
    let open: HashSet<(StepId, usize)> = plan
        .agenda
        .iter()
        .filter_map(|f| match f.kind {
            FlawKind::Open { step, precondition } => Some((step, precondition)),
            _ => None,
        })
        .collect();
    for s in &plan.steps {
        for i in 0..s.preconditions.len() {
            let linked = supported.contains(&(s.id, i));
            if linked == open.contains(&(s.id, i)) {
                return Err(ValidationError::InvariantBreach(format!(
                    "precondition {}#{} must be either linked or open",
                    s.id, i
                )));
            }
        }
    }
    Ok(())
}

/// Assigns every unbound variable class the lowest-named constant that
/// respects the noncodesignation constraints.
fn ground_variables<'a>(
    plan: &'a PartialPlan,
    task: &Task,
) -> Result<(impl Fn(Term) -> Symbol + 'a, usize), ValidationError> {
    let mut roots: Vec<Var> = Vec::new();
    for s in &plan.steps {
        let terms = s
            .args
            .iter()
            .chain(s.preconditions.iter().flat_map(|l| &l.args))
            .chain(s.effects.iter().flat_map(|l| &l.args));
        for &t in terms {
            if let Rep::Var(v) = plan.bindings.rep(t) {
                roots.push(v);
            }
        }
    }
    roots.sort_unstable();
    roots.dedup();

    let mut constants = task.constants.clone();
    constants.sort();
    let mut chosen: BTreeMap<Var, Symbol> = BTreeMap::new();
    for &root in &roots {
        let ok = |c: Symbol, chosen: &BTreeMap<Var, Symbol>| {
            plan.bindings.neq_pairs().iter().all(|&(x, y)| {
                let (rx, ry) = (plan.bindings.rep(x), plan.bindings.rep(y));
                let other = if rx == Rep::Var(root) {
                    ry
                } else if ry == Rep::Var(root) {
                    rx
                } else {
                    return true;
                };
                match other {
                    Rep::Const(d) => d != c,
                    Rep::Var(o) => chosen.get(&o) != Some(&c),
                }
            })
        };
        let c = constants
            .iter()
            .copied()
            .find(|&c| ok(c, &chosen))
            .ok_or(ValidationError::Ungroundable(Term::Var(root)))?;
        chosen.insert(root, c);
    }
    let count = chosen.len();
    let bindings = &plan.bindings;
    let ground = move |t: Term| match bindings.rep(t) {
        Rep::Const(c) => c,
        Rep::Var(v) => chosen[&v],
    };
    Ok((ground, count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{parse_domain_text, parse_problem_text};

    fn sussman() -> Task {
        crate::bundled::task("blocks", "sussman").unwrap()
    }

    #[test]
    fn empty_goal_gives_flawless_plan() {
        let d = parse_domain_text("(define (domain e) (:predicates (p)))").unwrap();
        let p = parse_problem_text(
            "(define (problem e) (:domain e) (:objects) (:init (p)) (:goal (and)))",
        )
        .unwrap();
        let task = Task::new(&d, &p).unwrap();
        let plan = PartialPlan::skeletal(&task, false);
        assert!(plan.is_complete());
        let v = validate_solution(&plan, &task).unwrap();
        assert_eq!(v.order, vec![0, 1]);
    }

    #[test]
    fn sussman_skeleton_counts() {
        let plan = PartialPlan::skeletal(&sussman(), false);
        assert_eq!(
            plan.rank_inputs(),
            RankInputs {
                steps: 0,
                open_conditions: 2,
                threats: 0
            }
        );
        assert_eq!(plan.rank_inputs(), plan.recount());
    }

    #[test]
    fn single_goal_agenda() {
        let d = parse_domain_text("(define (domain b) (:predicates (on ?x ?y)))").unwrap();
        let p = parse_problem_text(
            "(define (problem b) (:domain b) (:objects A B) (:init) (:goal (on A B)))",
        )
        .unwrap();
        let plan = PartialPlan::skeletal(&Task::new(&d, &p).unwrap(), false);
        assert_eq!(plan.agenda().len(), 1);
        assert_eq!(
            plan.agenda()[0].kind,
            FlawKind::Open {
                step: GOAL,
                precondition: 0
            }
        );
    }

    #[test]
    fn reversed_goal_insertion() {
        let plan = PartialPlan::skeletal(&sussman(), true);
        let order: Vec<_> = plan
            .agenda()
            .iter()
            .map(|f| match f.kind {
                FlawKind::Open { precondition, .. } => precondition,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(order, vec![1, 0]);
    }

    #[test]
    fn add_ordering_rejects_cycles_and_keeps_parent() {
        let task = sussman();
        let mut plan = PartialPlan::skeletal(&task, false);
        let a = plan.add_step(0, &task.operators[0]);
        let b = plan.add_step(0, &task.operators[0]);
        let before = plan.render();
        let child = plan.add_ordering(a, b).unwrap();
        assert_eq!(plan.render(), before);
        assert!(child.precedes(a, b));
        assert!(child.add_ordering(b, a).is_none());
        assert!(child.add_ordering(START, b).is_some());
    }

    #[test]
    fn demoted_producer_is_flagged_before_simulation() {
        let task = sussman();
        let mut plan = PartialPlan::skeletal(&task, false);
        let a = plan.add_step(0, &task.operators[0]);
        let b = plan.add_step(0, &task.operators[0]);
        plan.orderings.insert(b, a);
        // a link whose producer now comes after its consumer
        plan.add_link(a, Some(0), b, 0);
        plan.agenda.clear();
        let err = check_invariants(&plan).unwrap_err();
        assert!(matches!(err, ValidationError::InvariantBreach(_)), "{err}");
    }
}
