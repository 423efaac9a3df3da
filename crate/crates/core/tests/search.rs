mod common;

use std::collections::HashSet;

use pocl::bundled;
use pocl::flaw::{enumerate_repairs, exact_cost, FlawKind, Repair};
use pocl::search::Refiner;
use pocl::strategy::BUILTINS;
use pocl::{plan, plan_observed, SearchConfig, Status, Strategy};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn oracle_agrees_on_sussman() {
    let task = bundled::task("blocks", "sussman").unwrap();
    let oracle = common::shortest_plan(&task, 6).expect("sussman is solvable");
    assert_eq!(oracle.len(), 3);
    let out = plan(
        &task,
        &Strategy::builtin("LCFR").unwrap(),
        &SearchConfig::default(),
    )
    .unwrap();
    let v = out.validation.unwrap();
    assert_eq!(v.actions.len(), 3);
    assert_eq!(common::simulate(&task, &v.actions), Ok(true));
}

#[test]
fn every_bundled_problem_is_solvable() {
    for task in bundled::all_tasks() {
        assert!(
            common::solvable_greedy(&task, 200_000),
            "{}",
            task.problem_name
        );
    }
}

#[test]
fn plans_are_never_shorter_than_the_oracle() {
    for (d, p) in [
        ("blocks", "sussman"),
        ("blocks", "tower3"),
        ("briefcase", "get-paid"),
    ] {
        let task = bundled::task(d, p).unwrap();
        let best = common::shortest_plan(&task, 8)
            .expect("within eight actions")
            .len();
        for (name, _) in BUILTINS {
            let out = plan(
                &task,
                &Strategy::builtin(name).unwrap(),
                &SearchConfig::default(),
            )
            .unwrap();
            if let Some(v) = out.validation {
                assert!(v.actions.len() >= best, "{name} on {p}");
            }
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let task = bundled::task("briefcase", "get-paid").unwrap();
    for notation in ["LCFR", "ZLIFO", "{n,s}R / {o}R", "{o,n,s}LC / {o,n,s}R"] {
        let s = Strategy::resolve(notation).unwrap();
        let cfg = SearchConfig {
            seed: 11,
            ..SearchConfig::default()
        };
        let a = plan(&task, &s, &cfg).unwrap();
        let b = plan(&task, &s, &cfg).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.stats.generated, b.stats.generated);
        assert_eq!(a.plan.map(|p| p.render()), b.plan.map(|p| p.render()));
    }
}

#[test]
fn systematic_search_never_repeats_a_node() {
    let cfg = SearchConfig {
        systematic: true,
        node_limit: Some(3_000),
        ..SearchConfig::default()
    };
    for (d, p) in [
        ("blocks", "sussman"),
        ("blocks", "tower3"),
        ("briefcase", "get-paid"),
        ("tileworld", "tw1"),
    ] {
        let task = bundled::task(d, p).unwrap();
        for name in ["UCPOP", "LCFR", "DUnf"] {
            let mut seen = HashSet::new();
            let out = plan_observed(&task, &Strategy::builtin(name).unwrap(), &cfg, |n| {
                assert!(seen.insert(n.render()), "{name} on {p} queued a node twice");
            })
            .unwrap();
            assert_ne!(out.status, Status::Exhausted, "{name} on {p}");
        }
    }
}

#[test]
fn dead_ends_are_never_queued() {
    let task = bundled::task("blocks", "invert4").unwrap();
    let r = Refiner::new(
        &task,
        &Strategy::builtin("LCFR").unwrap(),
        &SearchConfig::default(),
    );
    let out = plan_observed(
        &task,
        &Strategy::builtin("LCFR").unwrap(),
        &SearchConfig::default(),
        |n| {
            for f in n.agenda() {
                assert!(exact_cost(n, &task, f.kind) > 0);
            }
            assert!(!r.is_dead_end(n));
        },
    )
    .unwrap();
    assert!(out.stats.pruned > 0);
}

const NEW_DOMAIN: &str = "(define (domain nd) (:predicates (a) (b))
  (:operator mk-b :parameters () :precondition () :effect (b)))";

#[test]
fn zlifo_prefers_forced_flaws_needing_a_new_step() {
    for goal in ["(and (b) (a))", "(and (a) (b))"] {
        let task = common::task_from(
            NEW_DOMAIN,
            &format!("(define (problem nd) (:domain nd) (:objects) (:init (a)) (:goal {goal}))"),
        );
        let z = Strategy::builtin("ZLIFO").unwrap();
        let r = Refiner::new(&task, &z, &SearchConfig::default());
        let root = r.root();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pick = z.select(&root, &r.ctx, &mut rng).unwrap();
        assert_eq!(pick, common::open_index(&root, 1, "(b)"), "goal {goal}");
        let lifo = Strategy::builtin("LIFO").unwrap();
        let last = lifo.select(&root, &r.ctx, &mut rng).unwrap();
        assert_eq!(last, root.agenda().len() - 1);
    }
}

const BOTH_DOMAIN: &str = "(define (domain both) (:predicates (pa) (pb))
  (:operator both :parameters () :precondition () :effect (and (pa) (pb))))";

#[test]
fn open_condition_cost_can_grow() {
    let task = common::task_from(
        BOTH_DOMAIN,
        "(define (problem both) (:domain both) (:objects) (:init) (:goal (and (pa) (pb))))",
    );
    let r = Refiner::new(
        &task,
        &Strategy::builtin("LCFR").unwrap(),
        &SearchConfig::default(),
    );
    let root = r.root();
    let pa = common::open_index(&root, 1, "(pa)");
    assert_eq!(exact_cost(&root, &task, root.agenda()[pa].kind), 1);
    let child = r
        .apply(
            &root,
            common::open_index(&root, 1, "(pb)"),
            Repair::NewStep {
                operator: 0,
                effect: 1,
            },
        )
        .unwrap();
    let pa = common::open_index(&child, 1, "(pa)");
    assert_eq!(exact_cost(&child, &task, child.agenda()[pa].kind), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn costs_match_repair_enumeration(seed in any::<u64>(), which in 0usize..9) {
        let task = &bundled::all_tasks()[which];
        let r = Refiner::new(task, &Strategy::builtin("LCFR").unwrap(), &SearchConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = r.root();
        for _ in 0..15 {
            for f in p.agenda() {
                let repairs = enumerate_repairs(&p, task, f.kind);
                prop_assert_eq!(exact_cost(&p, task, f.kind) as usize, repairs.len());
                if let FlawKind::Threat { separable: false, .. } = f.kind {
                    prop_assert!(repairs.len() <= 2);
                    prop_assert!(repairs.iter().all(|r| matches!(r, Repair::Promote | Repair::Demote)));
                }
            }
            if p.agenda().is_empty() {
                break;
            }
            let idx = rng.gen_range(0..p.agenda().len());
            let kids = r.refinements(&p, idx);
            if kids.is_empty() {
                break;
            }
            let next = kids[rng.gen_range(0..kids.len())].clone();
            prop_assert_eq!(next.rank_inputs(), next.recount());
            p = next;
        }
    }
}
