//! Domain and problem definitions and their s-expression format.
//!
//! ```text
//! (define (domain N)
//!   (:predicates (p ?a ?b) ...)
//!   (:constants C ...)                       ; optional
//!   (:operator N :parameters (?v ...)
//!      :precondition (and L ...) :effect (and L ...)) ...)
//! (define (problem N) (:domain N) (:objects ...) (:init L ...) (:goal (and L ...)))
//! ```
//!
//! `(not L)` negates a literal. In preconditions, `(not (= ?a ?b))` is a
//! noncodesignation constraint on the operator's parameters rather than a
//! literal. Precondition order is preserved exactly as written.

use std::collections::BTreeMap;
use std::fmt;

use crate::sexpr::{read_all, Pos, Sexp, SyntaxError};
use crate::symbol::Symbol;
use crate::term::{Literal, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DomainError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{pos}: predicate `{predicate}` expects {expected} argument(s), found {found}")]
    Arity {
        predicate: String,
        expected: usize,
        found: usize,
        pos: Pos,
    },
    #[error("{pos}: undeclared {kind} `{name}`")]
    Undeclared {
        kind: &'static str,
        name: String,
        pos: Pos,
    },
    #[error("{pos}: {message}")]
    Invalid { pos: Pos, message: String },
    #[error("problem `{problem}` targets domain `{expected}`, not `{found}`")]
    DomainMismatch {
        problem: String,
        expected: String,
        found: String,
    },
}

const TEXT_START: Pos = Pos { line: 1, col: 1 };

fn invalid(pos: Pos, message: impl Into<String>) -> DomainError {
    DomainError::Invalid {
        pos,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operator {
    pub name: Symbol,
    /// Parameter names without the leading `?`. In literals, parameter `i`
    /// appears as `Term::Var(Var(i))`.
    pub params: Vec<Symbol>,
    pub preconditions: Vec<Literal>,
    pub neq: Vec<(Term, Term)>,
    pub effects: Vec<Literal>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub name: Symbol,
    pub predicates: BTreeMap<Symbol, usize>,
    pub constants: Vec<Symbol>,
    pub operators: Vec<Operator>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub name: Symbol,
    pub domain: Symbol,
    pub objects: Vec<Symbol>,
    pub init: Vec<Literal>,
    pub goal: Vec<Literal>,
    /// Source positions of `init` and `goal` entries, for diagnostics.
    init_pos: Vec<Pos>,
    goal_pos: Vec<Pos>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Definition {
    Domain(Domain),
    Problem(Problem),
}

/// Parses a single domain or problem definition.
pub fn parse(text: &str) -> Result<Definition, DomainError> {
    let exprs = read_all(text)?;
    let [expr] = exprs.as_slice() else {
        let pos = exprs.get(1).map_or(TEXT_START, Sexp::pos);
        return Err(invalid(pos, "expected exactly one (define ...) form"));
    };
    let items = expect_list(expr)?;
    match items {
        [head, kind, rest @ ..]
            if head
                .atom()
                .is_some_and(|a| a.eq_ignore_ascii_case("define")) =>
        {
            let header = expect_list(kind)?;
            match header {
                [k, name] if k.atom() == Some("domain") => {
                    Ok(Definition::Domain(parse_domain(expect_atom(name)?, rest)?))
                }
                [k, name] if k.atom() == Some("problem") => Ok(Definition::Problem(parse_problem(
                    expect_atom(name)?,
                    rest,
                )?)),
                _ => Err(invalid(kind.pos(), "expected (domain N) or (problem N)")),
            }
        }
        _ => Err(invalid(expr.pos(), "expected (define ...)")),
    }
}

pub fn parse_domain_text(text: &str) -> Result<Domain, DomainError> {
    match parse(text)? {
        Definition::Domain(d) => Ok(d),
        Definition::Problem(_) => Err(invalid(TEXT_START, "expected a domain definition")),
    }
}

pub fn parse_problem_text(text: &str) -> Result<Problem, DomainError> {
    match parse(text)? {
        Definition::Problem(p) => Ok(p),
        Definition::Domain(_) => Err(invalid(TEXT_START, "expected a problem definition")),
    }
}

fn expect_list(e: &Sexp) -> Result<&[Sexp], DomainError> {
    e.list().ok_or_else(|| invalid(e.pos(), "expected a list"))
}

fn expect_atom(e: &Sexp) -> Result<&str, DomainError> {
    e.atom()
        .ok_or_else(|| invalid(e.pos(), "expected a symbol"))
}

fn is_variable(s: &str) -> bool {
    s.starts_with('?')
}

fn parse_domain(name: &str, sections: &[Sexp]) -> Result<Domain, DomainError> {
    let mut domain = Domain {
        name: Symbol::intern(name),
        predicates: BTreeMap::new(),
        constants: Vec::new(),
        operators: Vec::new(),
    };
    // predicates must be known before operators are checked
    let mut operator_forms = Vec::new();
    for section in sections {
        let items = expect_list(section)?;
        let Some(tag) = items.first().and_then(Sexp::atom) else {
            return Err(invalid(section.pos(), "expected a section keyword"));
        };
        match tag {
            ":predicates" => {
                for p in &items[1..] {
                    let parts = expect_list(p)?;
                    let Some((head, args)) = parts.split_first() else {
                        return Err(invalid(p.pos(), "empty predicate declaration"));
                    };
                    for a in args {
                        if !is_variable(expect_atom(a)?) {
                            return Err(invalid(
                                a.pos(),
                                "predicate parameters must be ?variables",
                            ));
                        }
                    }
                    let sym = Symbol::intern(expect_atom(head)?);
                    if domain.predicates.insert(sym, args.len()).is_some() {
                        return Err(invalid(
                            head.pos(),
                            format!("predicate `{sym}` declared twice"),
                        ));
                    }
                }
            }
            ":constants" => {
                for c in &items[1..] {
                    let s = expect_atom(c)?;
                    if is_variable(s) {
                        return Err(invalid(c.pos(), "constants cannot be variables"));
                    }
                    domain.constants.push(Symbol::intern(s));
                }
            }
            ":operator" | ":action" => operator_forms.push(section),
            other => {
                return Err(invalid(
                    section.pos(),
                    format!("unknown domain section `{other}`"),
                ))
            }
        }
    }
    for form in operator_forms {
        let op = parse_operator(&domain, expect_list(form)?, form.pos())?;
        if domain.operators.iter().any(|o| o.name == op.name) {
            return Err(invalid(
                form.pos(),
                format!("operator `{}` defined twice", op.name),
            ));
        }
        domain.operators.push(op);
    }
    Ok(domain)
}

fn parse_operator(domain: &Domain, items: &[Sexp], pos: Pos) -> Result<Operator, DomainError> {
    let name = items
        .get(1)
        .ok_or_else(|| invalid(pos, "operator needs a name"))
        .and_then(expect_atom)?;
    let mut params: Vec<Symbol> = Vec::new();
    let mut pre_form = None;
    let mut eff_form = None;
    let mut rest = items[2..].iter();
    while let Some(key) = rest.next() {
        let value = rest
            .next()
            .ok_or_else(|| invalid(key.pos(), "keyword without a value"))?;
        match expect_atom(key)? {
            ":parameters" => {
                for p in expect_list(value)? {
                    let s = expect_atom(p)?;
                    if !is_variable(s) {
                        return Err(invalid(p.pos(), "parameters must be ?variables"));
                    }
                    let sym = Symbol::intern(&s[1..]);
                    if params.contains(&sym) {
                        return Err(invalid(p.pos(), format!("parameter `{s}` repeated")));
                    }
                    params.push(sym);
                }
            }
            ":precondition" => pre_form = Some(value),
            ":effect" => eff_form = Some(value),
            other => {
                return Err(invalid(
                    key.pos(),
                    format!("unknown operator keyword `{other}`"),
                ))
            }
        }
    }
    let scope = Scope(&params);
    let mut preconditions = Vec::new();
    let mut neq = Vec::new();
    if let Some(form) = pre_form {
        for conj in conjuncts(form)? {
            if let Some((a, b)) = parse_disequality(conj, &scope, domain)? {
                neq.push((a, b));
            } else {
                preconditions.push(parse_literal(conj, &scope, domain)?);
            }
        }
    }
    let mut effects = Vec::new();
    if let Some(form) = eff_form {
        for conj in conjuncts(form)? {
            effects.push(parse_literal(conj, &scope, domain)?);
        }
    }
    Ok(Operator {
        name: Symbol::intern(name),
        params,
        preconditions,
        neq,
        effects,
    })
}

/// Splits `(and L ...)` into its conjuncts; a lone literal is a conjunction
/// of one and `(and)` is empty.
fn conjuncts(form: &Sexp) -> Result<&[Sexp], DomainError> {
    let items = expect_list(form)?;
    match items.first().and_then(Sexp::atom) {
        Some("and") => Ok(&items[1..]),
        _ if items.is_empty() => Ok(items),
        _ => Ok(std::slice::from_ref(form)),
    }
}

/// Operator parameters in scope for a literal.
struct Scope<'a>(&'a [Symbol]);

fn parse_term(e: &Sexp, scope: &Scope, domain: &Domain) -> Result<Term, DomainError> {
    let s = expect_atom(e)?;
    if is_variable(s) {
        let params = scope.0;
        let sym = Symbol::intern(&s[1..]);
        return params
            .iter()
            .position(|&p| p == sym)
            .map(|i| Term::Var(Var(i as u32)))
            .ok_or_else(|| DomainError::Undeclared {
                kind: "parameter",
                name: s.to_owned(),
                pos: e.pos(),
            });
    }
    let sym = Symbol::intern(s);
    if !domain.constants.contains(&sym) {
        return Err(DomainError::Undeclared {
            kind: "constant",
            name: s.to_owned(),
            pos: e.pos(),
        });
    }
    Ok(Term::Const(sym))
}

fn parse_disequality(
    e: &Sexp,
    scope: &Scope,
    domain: &Domain,
) -> Result<Option<(Term, Term)>, DomainError> {
    let Some([not, inner]) = e.list() else {
        return Ok(None);
    };
    if not.atom() != Some("not") {
        return Ok(None);
    }
    match inner.list() {
        Some([eq, a, b]) if eq.atom() == Some("=") => Ok(Some((
            parse_term(a, scope, domain)?,
            parse_term(b, scope, domain)?,
        ))),
        _ => Ok(None),
    }
}

fn parse_literal(e: &Sexp, scope: &Scope, domain: &Domain) -> Result<Literal, DomainError> {
    let items = expect_list(e)?;
    let (positive, atom) = match items {
        [not, inner] if not.atom() == Some("not") => (false, inner),
        _ => (true, e),
    };
    let parts = expect_list(atom)?;
    let Some((head, args)) = parts.split_first() else {
        return Err(invalid(atom.pos(), "empty literal"));
    };
    let pred_name = expect_atom(head)?;
    if pred_name == "=" {
        return Err(invalid(
            head.pos(),
            "equality is only supported as (not (= a b)) in preconditions",
        ));
    }
    let predicate = Symbol::intern(pred_name);
    let Some(&arity) = domain.predicates.get(&predicate) else {
        return Err(DomainError::Undeclared {
            kind: "predicate",
            name: pred_name.to_owned(),
            pos: head.pos(),
        });
    };
    if arity != args.len() {
        return Err(DomainError::Arity {
            predicate: pred_name.to_owned(),
            expected: arity,
            found: args.len(),
            pos: head.pos(),
        });
    }
    let args = args
        .iter()
        .map(|a| parse_term(a, scope, domain))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Literal {
        positive,
        predicate,
        args,
    })
}

fn parse_problem(name: &str, sections: &[Sexp]) -> Result<Problem, DomainError> {
    let mut problem = Problem {
        name: Symbol::intern(name),
        domain: Symbol::intern(""),
        objects: Vec::new(),
        init: Vec::new(),
        goal: Vec::new(),
        init_pos: Vec::new(),
        goal_pos: Vec::new(),
    };
    let mut saw_domain = false;
    for section in sections {
        let items = expect_list(section)?;
        let Some(tag) = items.first().and_then(Sexp::atom) else {
            return Err(invalid(section.pos(), "expected a section keyword"));
        };
        match tag {
            ":domain" => {
                let [_, d] = items else {
                    return Err(invalid(section.pos(), "expected (:domain N)"));
                };
                problem.domain = Symbol::intern(expect_atom(d)?);
                saw_domain = true;
            }
            ":objects" => {
                for o in &items[1..] {
                    let s = expect_atom(o)?;
                    if is_variable(s) {
                        return Err(invalid(o.pos(), "objects cannot be variables"));
                    }
                    problem.objects.push(Symbol::intern(s));
                }
            }
            ":init" => {
                for l in &items[1..] {
                    let lit = parse_ground_literal(l)?;
                    if !lit.positive {
                        return Err(invalid(
                            l.pos(),
                            "negative literals are not allowed in :init (closed world)",
                        ));
                    }
                    problem.init.push(lit);
                    problem.init_pos.push(l.pos());
                }
            }
            ":goal" => {
                let [_, g] = items else {
                    return Err(invalid(section.pos(), "expected (:goal L)"));
                };
                for l in conjuncts(g)? {
                    problem.goal.push(parse_ground_literal(l)?);
                    problem.goal_pos.push(l.pos());
                }
            }
            other => {
                return Err(invalid(
                    section.pos(),
                    format!("unknown problem section `{other}`"),
                ))
            }
        }
    }
    if !saw_domain {
        return Err(invalid(TEXT_START, "problem lacks a (:domain N) section"));
    }
    Ok(problem)
}

fn parse_ground_literal(e: &Sexp) -> Result<Literal, DomainError> {
    let items = expect_list(e)?;
    let (positive, atom) = match items {
        [not, inner] if not.atom() == Some("not") => (false, inner),
        _ => (true, e),
    };
    let parts = expect_list(atom)?;
    let Some((head, args)) = parts.split_first() else {
        return Err(invalid(atom.pos(), "empty literal"));
    };
    let args = args
        .iter()
        .map(|a| {
            let s = expect_atom(a)?;
            if is_variable(s) {
                Err(invalid(a.pos(), "problem literals must be ground"))
            } else {
                Ok(Term::Const(Symbol::intern(s)))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Literal {
        positive,
        predicate: Symbol::intern(expect_atom(head)?),
        args,
    })
}

impl Problem {
    /// Checks the problem against `domain`: matching domain name, declared
    /// predicates with the right arity, and declared objects or constants.
    pub fn check(&self, domain: &Domain) -> Result<(), DomainError> {
        if self.domain != domain.name {
            return Err(DomainError::DomainMismatch {
                problem: self.name.to_string(),
                expected: self.domain.to_string(),
                found: domain.name.to_string(),
            });
        }
        let lits = self
            .init
            .iter()
            .zip(
                self.init_pos
                    .iter()
                    .copied()
                    .chain(std::iter::repeat(Pos::default())),
            )
            .chain(
                self.goal.iter().zip(
                    self.goal_pos
                        .iter()
                        .copied()
                        .chain(std::iter::repeat(Pos::default())),
                ),
            );
        for (lit, pos) in lits {
            let Some(&arity) = domain.predicates.get(&lit.predicate) else {
                return Err(DomainError::Undeclared {
                    kind: "predicate",
                    name: lit.predicate.to_string(),
                    pos,
                });
            };
            if arity != lit.args.len() {
                return Err(DomainError::Arity {
                    predicate: lit.predicate.to_string(),
                    expected: arity,
                    found: lit.args.len(),
                    pos,
                });
            }
            for t in &lit.args {
                if let Term::Const(c) = t {
                    if !self.objects.contains(c) && !domain.constants.contains(c) {
                        return Err(DomainError::Undeclared {
                            kind: "object",
                            name: c.to_string(),
                            pos,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Every constant available for grounding: objects, then domain constants.
    pub fn all_constants(&self, domain: &Domain) -> Vec<Symbol> {
        let mut out = self.objects.clone();
        for c in &domain.constants {
            if !out.contains(c) {
                out.push(*c);
            }
        }
        out
    }

    /// Builds a problem programmatically (positions are left unknown).
    pub fn new(
        name: &str,
        domain: Symbol,
        objects: Vec<Symbol>,
        init: Vec<Literal>,
        goal: Vec<Literal>,
    ) -> Problem {
        Problem {
            name: Symbol::intern(name),
            domain,
            objects,
            init,
            goal,
            init_pos: Vec::new(),
            goal_pos: Vec::new(),
        }
    }
}

struct TemplateLiteral<'a>(&'a Literal, &'a [Symbol]);

impl fmt::Display for TemplateLiteral<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let TemplateLiteral(lit, params) = *self;
        if !lit.positive {
            f.write_str("(not ")?;
        }
        write!(f, "({}", lit.predicate)?;
        for a in &lit.args {
            match a {
                Term::Var(v) => write!(f, " ?{}", params[v.0 as usize])?,
                Term::Const(c) => write!(f, " {c}")?,
            }
        }
        f.write_str(")")?;
        if !lit.positive {
            f.write_str(")")?;
        }
        Ok(())
    }
}

fn template_term(t: Term, params: &[Symbol]) -> String {
    match t {
        Term::Var(v) => format!("?{}", params[v.0 as usize]),
        Term::Const(c) => c.to_string(),
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(:operator {}\n    :parameters (", self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "?{p}")?;
        }
        f.write_str(")\n    :precondition (and")?;
        for p in &self.preconditions {
            write!(f, " {}", TemplateLiteral(p, &self.params))?;
        }
        for &(a, b) in &self.neq {
            write!(
                f,
                " (not (= {} {}))",
                template_term(a, &self.params),
                template_term(b, &self.params)
            )?;
        }
        f.write_str(")\n    :effect (and")?;
        for e in &self.effects {
            write!(f, " {}", TemplateLiteral(e, &self.params))?;
        }
        f.write_str("))")
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (domain {})", self.name)?;
        f.write_str("  (:predicates")?;
        for (p, &arity) in &self.predicates {
            write!(f, " ({p}")?;
            for i in 0..arity {
                write!(f, " ?a{i}")?;
            }
            f.write_str(")")?;
        }
        f.write_str(")")?;
        if !self.constants.is_empty() {
            f.write_str("\n  (:constants")?;
            for c in &self.constants {
                write!(f, " {c}")?;
            }
            f.write_str(")")?;
        }
        for op in &self.operators {
            write!(f, "\n  {op}")?;
        }
        f.write_str(")\n")
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (problem {})", self.name)?;
        writeln!(f, "  (:domain {})", self.domain)?;
        f.write_str("  (:objects")?;
        for o in &self.objects {
            write!(f, " {o}")?;
        }
        f.write_str(")\n  (:init")?;
        for l in &self.init {
            write!(f, " {l}")?;
        }
        f.write_str(")\n  (:goal (and")?;
        for l in &self.goal {
            write!(f, " {l}")?;
        }
        f.write_str(")))\n")
    }
}
