//! Terms, literals and the binding-constraint store.
//!
//! Terms are flat: a term is either a variable or a constant, never a
//! compound. A [`BindingStore`] records codesignation as a union-find over
//! variables (each class optionally pinned to one constant) plus a list of
//! noncodesignation pairs. Every operation that adds a constraint returns a
//! new store and leaves the receiver untouched.

use std::fmt;

use smallvec::SmallVec;

use crate::symbol::Symbol;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Var(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Term {
    Var(Var),
    Const(Symbol),
}

impl Term {
    pub fn constant(name: &str) -> Term {
        Term::Const(Symbol::intern(name))
    }

    pub fn var(id: u32) -> Term {
        Term::Var(Var(id))
    }

    pub fn is_var(self) -> bool {
        matches!(self, Term::Var(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?v{}", v.0),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Literal {
    pub positive: bool,
    pub predicate: Symbol,
    pub args: Vec<Term>,
}

impl Literal {
    pub fn new(positive: bool, predicate: &str, args: Vec<Term>) -> Literal {
        Literal {
            positive,
            predicate: Symbol::intern(predicate),
            args,
        }
    }

    pub fn pos(predicate: &str, args: Vec<Term>) -> Literal {
        Literal::new(true, predicate, args)
    }

    pub fn neg(predicate: &str, args: Vec<Term>) -> Literal {
        Literal::new(false, predicate, args)
    }

    pub fn negated(&self) -> Literal {
        Literal {
            positive: !self.positive,
            ..self.clone()
        }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    /// Rewrites every variable through `f`, leaving constants alone.
    pub fn map_vars(&self, mut f: impl FnMut(Var) -> Term) -> Literal {
        Literal {
            positive: self.positive,
            predicate: self.predicate,
            args: self
                .args
                .iter()
                .map(|t| match *t {
                    Term::Var(v) => f(v),
                    c => c,
                })
                .collect(),
        }
    }

    pub fn same_shape(&self, other: &Literal) -> bool {
        self.predicate == other.predicate && self.args.len() == other.args.len()
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("(not ")?;
        }
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")?;
        if !self.positive {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Canonical representative of a codesignation class.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Rep {
    Var(Var),
    Const(Symbol),
}

/// Key used by the scratch unifier: either a class of the store or a
/// parameter of an operator template that has not been instantiated yet.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Key {
    Rep(Rep),
    Param(u32),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BindingStore {
    parent: Vec<u32>,
    value: Vec<Option<Symbol>>,
    neq: Vec<(Term, Term)>,
}

impl BindingStore {
    pub fn new() -> BindingStore {
        BindingStore::default()
    }

    fn root(&self, v: Var) -> u32 {
        let mut cur = v.0;
        while let Some(&p) = self.parent.get(cur as usize) {
            if p == cur {
                break;
            }
            cur = p;
        }
        cur
    }

    fn root_value(&self, root: u32) -> Option<Symbol> {
        self.value.get(root as usize).copied().flatten()
    }

    pub fn rep(&self, t: Term) -> Rep {
        match t {
            Term::Const(c) => Rep::Const(c),
            Term::Var(v) => {
                let r = self.root(v);
                match self.root_value(r) {
                    Some(c) => Rep::Const(c),
                    None => Rep::Var(Var(r)),
                }
            }
        }
    }

    /// Resolves `t` to the constant it is bound to, or to its class root.
    pub fn resolve(&self, t: Term) -> Term {
        match self.rep(t) {
            Rep::Const(c) => Term::Const(c),
            Rep::Var(v) => Term::Var(v),
        }
    }

    pub fn resolve_literal(&self, lit: &Literal) -> Literal {
        Literal {
            positive: lit.positive,
            predicate: lit.predicate,
            args: lit.args.iter().map(|&t| self.resolve(t)).collect(),
        }
    }

    pub fn codesignates(&self, a: Term, b: Term) -> bool {
        a == b || self.rep(a) == self.rep(b)
    }

    fn reps_separated(&self, ra: Rep, rb: Rep) -> bool {
        if ra == rb {
            return false;
        }
        if let (Rep::Const(_), Rep::Const(_)) = (ra, rb) {
            return true;
        }
        self.neq.iter().any(|&(x, y)| {
            let (rx, ry) = (self.rep(x), self.rep(y));
            (rx == ra && ry == rb) || (rx == rb && ry == ra)
        })
    }

    /// True when `a` and `b` can never be made equal: distinct constants or
    /// an explicit noncodesignation between their classes.
    pub fn noncodesignates(&self, a: Term, b: Term) -> bool {
        self.reps_separated(self.rep(a), self.rep(b))
    }

    pub fn neq_pairs(&self) -> &[(Term, Term)] {
        &self.neq
    }

    fn ensure(&mut self, v: Var) {
        let need = v.0 as usize + 1;
        if self.parent.len() < need {
            let start = self.parent.len() as u32;
            self.parent.extend(start..need as u32);
            self.value.resize(need, None);
        }
    }

    /// Merges the classes of `a` and `b` in place. Returns false when this
    /// would equate two distinct constants or violate a noncodesignation.
    fn merge(&mut self, a: Term, b: Term) -> bool {
        let (ra, rb) = (self.rep(a), self.rep(b));
        if ra == rb {
            return true;
        }
        if self.reps_separated(ra, rb) {
            return false;
        }
        match (ra, rb) {
            (Rep::Const(_), Rep::Const(_)) => return false,
            (Rep::Var(v), Rep::Const(c)) | (Rep::Const(c), Rep::Var(v)) => {
                self.ensure(v);
                self.value[v.0 as usize] = Some(c);
            }
            (Rep::Var(x), Rep::Var(y)) => {
                self.ensure(x);
                self.ensure(y);
                let (keep, drop) = if x.0 < y.0 { (x, y) } else { (y, x) };
                self.parent[drop.0 as usize] = keep.0;
            }
        }
        true
    }

    /// Pairwise codesignation of two argument lists, as a new store.
    pub fn unify_args(&self, a: &[Term], b: &[Term]) -> Option<BindingStore> {
        if a.len() != b.len() {
            return None;
        }
        if a.iter().zip(b).all(|(&x, &y)| self.codesignates(x, y)) {
            return Some(self.clone());
        }
        let mut next = self.clone();
        for (&x, &y) in a.iter().zip(b) {
            if !next.merge(x, y) {
                return None;
            }
        }
        Some(next)
    }

    /// Unifies two literals of the same polarity and predicate.
    pub fn unify(&self, a: &Literal, b: &Literal) -> Option<BindingStore> {
        if a.positive != b.positive || !a.same_shape(b) {
            return None;
        }
        self.unify_args(&a.args, &b.args)
    }

    pub fn add_noncodesignation(&self, a: Term, b: Term) -> Option<BindingStore> {
        if self.codesignates(a, b) {
            return None;
        }
        let mut next = self.clone();
        if !next.noncodesignates(a, b) {
            next.neq.push((a, b));
        }
        Some(next)
    }

    /// Checks, without building a store, whether the argument lists could be
    /// unified. Cheaper than [`BindingStore::unify_args`].
    pub fn unifiable_args(&self, a: &[Term], b: &[Term]) -> bool {
        if a.len() != b.len() {
            return false;
        }
        let pairs = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| (Key::Rep(self.rep(x)), Key::Rep(self.rep(y))));
        self.check_overlay(pairs, &[])
    }

    pub fn unifiable(&self, a: &Literal, b: &Literal) -> bool {
        a.positive == b.positive && a.same_shape(b) && self.unifiable_args(&a.args, &b.args)
    }

    /// Whether `lit` could unify with a fresh instance of `template`, where
    /// the template's variables are operator parameters and `template_neq`
    /// holds the instance's own noncodesignation constraints.
    pub fn unifiable_with_template(
        &self,
        lit: &Literal,
        template: &Literal,
        template_neq: &[(Term, Term)],
    ) -> bool {
        if lit.positive != template.positive || !lit.same_shape(template) {
            return false;
        }
        let key = |t: Term| match t {
            Term::Var(v) => Key::Param(v.0),
            Term::Const(c) => Key::Rep(Rep::Const(c)),
        };
        let pairs = lit
            .args
            .iter()
            .zip(&template.args)
            .map(|(&x, &y)| (Key::Rep(self.rep(x)), key(y)));
        let extra: SmallVec<[(Key, Key); 4]> = template_neq
            .iter()
            .map(|&(x, y)| (key(x), key(y)))
            .collect();
        self.check_overlay(pairs, &extra)
    }

    fn check_overlay(
        &self,
        pairs: impl Iterator<Item = (Key, Key)>,
        extra_neq: &[(Key, Key)],
    ) -> bool {
        let mut overlay = Overlay::default();
        let mut touched = false;
        for (x, y) in pairs {
            if x == y {
                continue;
            }
            touched = true;
            if !overlay.union(x, y) {
                return false;
            }
        }
        if !touched {
            return true;
        }
        for &(x, y) in &self.neq {
            let (kx, ky) = (Key::Rep(self.rep(x)), Key::Rep(self.rep(y)));
            if overlay.same(kx, ky) {
                return false;
            }
        }
        extra_neq.iter().all(|&(x, y)| !overlay.same(x, y))
    }

    /// Every variable class with its member variables, roots ascending.
    pub fn classes(&self) -> Vec<(Rep, Vec<Var>)> {
        let mut out: Vec<(Rep, Vec<Var>)> = Vec::new();
        for v in 0..self.parent.len() as u32 {
            let rep = self.rep(Term::Var(Var(v)));
            if rep == Rep::Var(Var(v)) {
                continue;
            }
            match out.iter_mut().find(|(r, _)| *r == rep) {
                Some((_, members)) => members.push(Var(v)),
                None => out.push((rep, vec![Var(v)])),
            }
        }
        out
    }
}

/// Tiny union-find over [`Key`]s, used to test a handful of equations
/// against a store without cloning it.
#[derive(Default)]
struct Overlay {
    keys: SmallVec<[Key; 12]>,
    parent: SmallVec<[usize; 12]>,
    konst: SmallVec<[Option<Symbol>; 12]>,
}

impl Overlay {
    fn index(&mut self, k: Key) -> usize {
        if let Some(i) = self.keys.iter().position(|&x| x == k) {
            return i;
        }
        self.keys.push(k);
        self.parent.push(self.keys.len() - 1);
        self.konst.push(match k {
            Key::Rep(Rep::Const(c)) => Some(c),
            _ => None,
        });
        self.keys.len() - 1
    }

    fn find(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: Key, b: Key) -> bool {
        let (ia, ib) = (self.index(a), self.index(b));
        let (ra, rb) = (self.find(ia), self.find(ib));
        if ra == rb {
            return true;
        }
        match (self.konst[ra], self.konst[rb]) {
            (Some(x), Some(y)) if x != y => return false,
            (None, Some(y)) => self.konst[ra] = Some(y),
            _ => {}
        }
        self.parent[rb] = ra;
        true
    }

    fn same(&self, a: Key, b: Key) -> bool {
        let lookup = |k: Key| self.keys.iter().position(|&x| x == k);
        match (lookup(a), lookup(b)) {
            (Some(ia), Some(ib)) => self.find(ia) == self.find(ib),
            _ => false,
        }
    }
}

/// Nonseparable-threat test: `e` and the complement of `f` share predicate
/// and arity and every argument pair is identical or forced equal.
pub fn forced_complementary(e: &Literal, f: &Literal, s: &BindingStore) -> bool {
    e.positive != f.positive && forced_same(e, f, s)
}

/// Like [`forced_complementary`] but ignoring polarity.
pub fn forced_same(e: &Literal, f: &Literal, s: &BindingStore) -> bool {
    e.same_shape(f)
        && e.args
            .iter()
            .zip(&f.args)
            .all(|(&a, &b)| s.codesignates(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(id: u32) -> Term {
        Term::var(id)
    }

    fn c(name: &str) -> Term {
        Term::constant(name)
    }

    #[test]
    fn identity_unification_leaves_store_unchanged() {
        let s = BindingStore::new();
        let p = Literal::pos("p", vec![c("A"), c("A")]);
        assert_eq!(s.unify(&p, &p), Some(BindingStore::new()));
    }

    #[test]
    fn noncodesignation_blocks_unification() {
        let s = BindingStore::new()
            .add_noncodesignation(v(0), v(1))
            .unwrap();
        let a = Literal::pos("p", vec![v(0)]);
        let b = Literal::pos("p", vec![v(1)]);
        assert!(s.unify(&a, &b).is_none());
        assert!(!s.unifiable(&a, &b));
    }

    #[test]
    fn three_argument_unification_binds_pairwise() {
        let s = BindingStore::new();
        let a = Literal::pos("P", vec![v(0), v(1), v(2)]);
        let b = Literal::pos("P", vec![v(3), v(4), v(5)]);
        let u = s.unify(&a, &b).unwrap();
        assert!(u.codesignates(v(0), v(3)));
        assert!(u.codesignates(v(1), v(4)));
        assert!(u.codesignates(v(2), v(5)));
        assert!(!u.codesignates(v(0), v(1)));
        // the original is untouched
        assert!(!s.codesignates(v(0), v(3)));
    }

    #[test]
    fn polarity_and_predicate_must_match() {
        let s = BindingStore::new();
        let a = Literal::pos("p", vec![c("A")]);
        assert!(s.unify(&a, &a.negated()).is_none());
        assert!(s.unify(&a, &Literal::pos("q", vec![c("A")])).is_none());
    }

    #[test]
    fn distinct_constants_never_unify() {
        let s = BindingStore::new();
        assert!(s.unify_args(&[c("A")], &[c("B")]).is_none());
        let bound = s.unify_args(&[v(0)], &[c("A")]).unwrap();
        assert!(bound.unify_args(&[v(0)], &[c("B")]).is_none());
        assert!(!bound.unifiable_args(&[v(0)], &[c("B")]));
    }

    #[test]
    fn joint_unification_respects_disequality() {
        // x != y, then p(x, y) against p(z, z) forces x = y.
        let s = BindingStore::new()
            .add_noncodesignation(v(0), v(1))
            .unwrap();
        assert!(!s.unifiable_args(&[v(0), v(1)], &[v(2), v(2)]));
        assert!(s.unify_args(&[v(0), v(1)], &[v(2), v(2)]).is_none());
    }

    #[test]
    fn forced_complementary_cases() {
        let s = BindingStore::new();
        let pa = Literal::pos("p", vec![c("a")]);
        assert!(forced_complementary(&pa.negated(), &pa, &s));

        let e = Literal::pos("p", vec![v(0), v(1)]);
        let f = Literal::neg("p", vec![v(0), v(2)]);
        assert!(!forced_complementary(&e, &f, &s));
        let bound = s.unify_args(&[v(1)], &[v(2)]).unwrap();
        assert!(forced_complementary(&e, &f, &bound));

        let px = Literal::pos("p", vec![v(0)]);
        let ny = Literal::neg("p", vec![v(1)]);
        assert!(!forced_complementary(&px, &ny, &s));
    }

    #[test]
    fn add_noncodesignation_cases() {
        let s = BindingStore::new();
        let sep = s.add_noncodesignation(v(0), v(1)).unwrap();
        assert!(sep.noncodesignates(v(0), v(1)));

        let eq = s.unify_args(&[v(0)], &[v(1)]).unwrap();
        assert!(eq.add_noncodesignation(v(0), v(1)).is_none());

        assert!(s.add_noncodesignation(c("a"), c("a")).is_none());
    }

    #[test]
    fn template_unification_uses_fresh_parameters() {
        let s = BindingStore::new();
        let open = Literal::pos("on", vec![c("A"), c("A")]);
        let effect = Literal::pos("on", vec![v(0), v(1)]);
        assert!(s.unifiable_with_template(&open, &effect, &[]));
        // the template forbids its own parameters from coinciding
        assert!(!s.unifiable_with_template(&open, &effect, &[(v(0), v(1))]));
        // template parameter ids do not alias plan variables
        let bound = s.unify_args(&[v(0)], &[c("B")]).unwrap();
        assert!(bound.unifiable_with_template(&open, &effect, &[]));
    }

    #[test]
    fn merging_classes_carries_constants() {
        let s = BindingStore::new()
            .unify_args(&[v(0)], &[v(1)])
            .unwrap()
            .unify_args(&[v(1)], &[c("K")])
            .unwrap();
        assert_eq!(s.resolve(v(0)), c("K"));
        assert!(s.noncodesignates(v(0), c("J")));
    }
}
