//! A problem bound to its domain, ready for planning.

use std::collections::HashSet;

use crate::domain::{Domain, DomainError, Operator, Problem};
use crate::symbol::Symbol;
use crate::term::Literal;

/// The read-only inputs of one planning run: the operator library, the
/// initial state and the goal.
#[derive(Debug, Clone)]
pub struct Task {
    pub domain_name: Symbol,
    pub problem_name: Symbol,
    pub operators: Vec<Operator>,
    pub init: Vec<Literal>,
    pub goal: Vec<Literal>,
    /// Objects and domain constants, in declaration order.
    pub constants: Vec<Symbol>,
    init_atoms: HashSet<Literal>,
}

impl Task {
    pub fn new(domain: &Domain, problem: &Problem) -> Result<Task, DomainError> {
        problem.check(domain)?;
        Ok(Task {
            domain_name: domain.name,
            problem_name: problem.name,
            operators: domain.operators.clone(),
            init: problem.init.clone(),
            goal: problem.goal.clone(),
            constants: problem.all_constants(domain),
            init_atoms: problem.init.iter().cloned().collect(),
        })
    }

    /// Closed-world truth of a ground positive atom in the initial state.
    pub fn initially_true(&self, atom: &Literal) -> bool {
        debug_assert!(atom.positive);
        self.init_atoms.contains(atom)
    }

    pub fn operator(&self, name: &str) -> Option<(usize, &Operator)> {
        self.operators
            .iter()
            .enumerate()
            .find(|(_, op)| op.name.as_str() == name)
    }
}
