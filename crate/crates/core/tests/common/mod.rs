//! Ground forward-search oracle, independent of the plan-space machinery.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use pocl::domain::Operator;
use pocl::symbol::Symbol;
use pocl::term::{Literal, Term};
use pocl::Task;

/// A ground atom as (predicate, args).
pub type Atom = (Symbol, Vec<Symbol>);
pub type State = BTreeSet<Atom>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Action {
    pub name: Symbol,
    pub args: Vec<Symbol>,
    pub pre_pos: Vec<Atom>,
    pub pre_neg: Vec<Atom>,
    pub add: Vec<Atom>,
    pub del: Vec<Atom>,
}

fn ground(lit: &Literal, binding: &[Symbol]) -> Atom {
    let args = lit
        .args
        .iter()
        .map(|t| match *t {
            Term::Const(c) => c,
            Term::Var(v) => binding[v.0 as usize],
        })
        .collect();
    (lit.predicate, args)
}

fn max_var(lit: &Literal) -> Option<usize> {
    lit.args
        .iter()
        .filter_map(|t| match t {
            Term::Var(v) => Some(v.0 as usize),
            _ => None,
        })
        .max()
}

fn term_value(t: Term, binding: &[Symbol]) -> Option<Symbol> {
    match t {
        Term::Const(c) => Some(c),
        Term::Var(v) => binding.get(v.0 as usize).copied(),
    }
}

/// Ground instances of `op` applicable in `state`, found by assigning
/// parameters left to right and checking each precondition as soon as
/// its variables are bound.
fn applicable(op: &Operator, constants: &[Symbol], state: &State, out: &mut Vec<Action>) {
    fn go(
        op: &Operator,
        constants: &[Symbol],
        state: &State,
        binding: &mut Vec<Symbol>,
        out: &mut Vec<Action>,
    ) {
        let k = binding.len();
        let ready = |lit: &Literal| max_var(lit).map_or(k == 0, |m| m + 1 == k);
        for lit in op.preconditions.iter().filter(|l| ready(l)) {
            let atom = ground(lit, binding);
            if state.contains(&atom) != lit.positive {
                return;
            }
        }
        for &(a, b) in &op.neq {
            if let (Some(x), Some(y)) = (term_value(a, binding), term_value(b, binding)) {
                if x == y {
                    return;
                }
            }
        }
        if k == op.params.len() {
            let split = |lits: &[Literal], positive: bool| -> Vec<Atom> {
                lits.iter()
                    .filter(|l| l.positive == positive)
                    .map(|l| ground(l, binding))
                    .collect()
            };
            out.push(Action {
                name: op.name,
                args: binding.clone(),
                pre_pos: split(&op.preconditions, true),
                pre_neg: split(&op.preconditions, false),
                add: split(&op.effects, true),
                del: split(&op.effects, false),
            });
            return;
        }
        for &c in constants {
            binding.push(c);
            go(op, constants, state, binding, out);
            binding.pop();
        }
    }
    go(op, constants, state, &mut Vec::new(), out);
}

pub fn successors(task: &Task, state: &State) -> Vec<(Action, State)> {
    let mut actions = Vec::new();
    for op in &task.operators {
        applicable(op, &task.constants, state, &mut actions);
    }
    actions
        .into_iter()
        .map(|a| {
            let mut next = state.clone();
            for d in &a.del {
                next.remove(d);
            }
            for d in &a.add {
                next.insert(d.clone());
            }
            (a, next)
        })
        .collect()
}

pub fn initial_state(task: &Task) -> State {
    task.init.iter().map(|l| ground(l, &[])).collect()
}

pub fn satisfies(state: &State, goal: &[Literal]) -> bool {
    goal.iter()
        .all(|l| state.contains(&ground(l, &[])) == l.positive)
}

/// Length of a shortest ground plan, searching breadth first up to
/// `max_depth` actions.
pub fn shortest_plan(task: &Task, max_depth: usize) -> Option<Vec<Action>> {
    let start = initial_state(task);
    let mut parent: HashMap<State, Option<(State, Action)>> = HashMap::new();
    parent.insert(start.clone(), None);
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some((s, depth)) = queue.pop_front() {
        if satisfies(&s, &task.goal) {
            let mut plan = Vec::new();
            let mut cur = s;
            while let Some(Some((prev, a))) = parent.get(&cur).cloned() {
                plan.push(a);
                cur = prev;
            }
            plan.reverse();
            return Some(plan);
        }
        if depth == max_depth {
            continue;
        }
        for (a, next) in successors(task, &s) {
            if !parent.contains_key(&next) {
                parent.insert(next.clone(), Some((s.clone(), a)));
                queue.push_back((next, depth + 1));
            }
        }
    }
    None
}

/// Greedy best-first search on the number of unmet goals; finds some
/// plan for problems too large for breadth-first search.
pub fn solvable_greedy(task: &Task, max_states: usize) -> bool {
    let unmet = |s: &State| {
        task.goal
            .iter()
            .filter(|l| !satisfies(s, std::slice::from_ref(l)))
            .count()
    };
    let start = initial_state(task);
    let mut seen = HashSet::from([start.clone()]);
    let mut frontier = std::collections::BinaryHeap::new();
    frontier.push((std::cmp::Reverse(unmet(&start)), 0usize, start));
    let mut counter = 0usize;
    while let Some((_, _, s)) = frontier.pop() {
        if satisfies(&s, &task.goal) {
            return true;
        }
        if seen.len() > max_states {
            return false;
        }
        for (_, next) in successors(task, &s) {
            if seen.insert(next.clone()) {
                counter += 1;
                frontier.push((std::cmp::Reverse(unmet(&next)), usize::MAX - counter, next));
            }
        }
    }
    false
}

/// States reachable from the initial state in at most `depth` actions,
/// each with the length of its shortest path.
pub fn reachable(task: &Task, depth: usize) -> Vec<(State, usize)> {
    let start = initial_state(task);
    let mut dist: HashMap<State, usize> = HashMap::from([(start.clone(), 0)]);
    let mut order = vec![(start.clone(), 0)];
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some((s, d)) = queue.pop_front() {
        if d == depth {
            continue;
        }
        for (_, next) in successors(task, &s) {
            if !dist.contains_key(&next) {
                dist.insert(next.clone(), d + 1);
                order.push((next.clone(), d + 1));
                queue.push_back((next, d + 1));
            }
        }
    }
    order
}

pub fn atom_literal(atom: &Atom) -> Literal {
    Literal {
        positive: true,
        predicate: atom.0,
        args: atom.1.iter().map(|&c| Term::Const(c)).collect(),
    }
}

pub fn task_from(domain: &str, problem: &str) -> Task {
    let d = pocl::domain::parse_domain_text(domain).expect("domain parses");
    let p = pocl::domain::parse_problem_text(problem).expect("problem parses");
    Task::new(&d, &p).expect("problem checks")
}

/// Replays a validated action sequence such as `["(move-b-to-t C A)"]`
/// from the initial state and reports whether the goal holds at the end.
pub fn simulate(task: &Task, actions: &[String]) -> Result<bool, String> {
    let mut state = initial_state(task);
    for (i, text) in actions.iter().enumerate() {
        let inner = text.trim().trim_start_matches('(').trim_end_matches(')');
        let mut words = inner.split_whitespace();
        let name = words.next().ok_or_else(|| format!("empty action at {i}"))?;
        let args: Vec<Symbol> = words.map(Symbol::intern).collect();
        let op = task
            .operators
            .iter()
            .find(|o| o.name.as_str() == name)
            .ok_or_else(|| format!("unknown operator {name}"))?;
        if args.len() != op.params.len() {
            return Err(format!("arity mismatch in {text}"));
        }
        for &(a, b) in &op.neq {
            if term_value(a, &args) == term_value(b, &args) {
                return Err(format!("disequality violated by {text}"));
            }
        }
        for lit in &op.preconditions {
            if state.contains(&ground(lit, &args)) != lit.positive {
                return Err(format!(
                    "precondition {lit} of {text} fails at position {i}"
                ));
            }
        }
        for lit in op.effects.iter().filter(|l| !l.positive) {
            state.remove(&ground(lit, &args));
        }
        for lit in op.effects.iter().filter(|l| l.positive) {
            state.insert(ground(lit, &args));
        }
    }
    Ok(satisfies(&state, &task.goal))
}

/// Small problems over every bundled initial state: each state reachable
/// in one or two actions yields its full change set as a goal, and each
/// changed literal alone as another goal.
pub fn two_action_problems() -> Vec<Task> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for base in pocl::bundled::all_tasks() {
        let init = initial_state(&base);
        for (state, depth) in reachable(&base, 2) {
            if depth == 0 {
                continue;
            }
            let mut delta: Vec<Literal> = state.difference(&init).map(atom_literal).collect();
            delta.extend(init.difference(&state).map(|a| atom_literal(a).negated()));
            if delta.is_empty() {
                continue;
            }
            let mut goals = vec![delta.clone()];
            if delta.len() > 1 {
                goals.extend(delta.iter().map(|l| vec![l.clone()]));
            }
            for goal in goals {
                let key = (
                    base.problem_name,
                    goal.iter().map(|l| l.to_string()).collect::<Vec<_>>(),
                );
                if seen.insert(key) {
                    let mut t = base.clone();
                    t.goal = goal;
                    out.push(t);
                }
            }
        }
    }
    out
}

/// Agenda index of the open condition on `step` whose predicate and sign
/// match `cond`, written like `(q)` or `(not (p))`.
pub fn open_index(plan: &pocl::plan::PartialPlan, step: u32, cond: &str) -> usize {
    let positive = !cond.starts_with("(not");
    let pred = cond
        .trim_start_matches("(not")
        .trim_start()
        .trim_start_matches('(')
        .split([' ', ')'])
        .next()
        .unwrap_or_default();
    plan.agenda()
        .iter()
        .position(|f| match f.kind {
            pocl::flaw::FlawKind::Open {
                step: s,
                precondition,
            } => {
                let lit = &plan.step(s).preconditions[precondition];
                s == step && lit.positive == positive && lit.predicate.as_str() == pred
            }
            _ => false,
        })
        .unwrap_or_else(|| panic!("no open {cond} on step {step}"))
}

pub fn threat_index(plan: &pocl::plan::PartialPlan) -> usize {
    plan.agenda()
        .iter()
        .position(|f| matches!(f.kind, pocl::flaw::FlawKind::Threat { .. }))
        .expect("a threat on the agenda")
}
