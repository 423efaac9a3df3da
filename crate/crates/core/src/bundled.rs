//! Domains and problems shipped with the library.

use crate::domain::{parse_domain_text, parse_problem_text, Domain, DomainError, Problem};
use crate::task::Task;

struct Bundle {
    name: &'static str,
    domain: &'static str,
    problems: &'static [&'static str],
}

const BUNDLES: &[Bundle] = &[
    Bundle {
        name: "blocks",
        domain: include_str!("../domains/blocks/domain.dom"),
        problems: &[
            include_str!("../domains/blocks/sussman.prob"),
            include_str!("../domains/blocks/tower3.prob"),
            include_str!("../domains/blocks/invert4.prob"),
        ],
    },
    Bundle {
        name: "briefcase",
        domain: include_str!("../domains/briefcase/domain.dom"),
        problems: &[
            include_str!("../domains/briefcase/get-paid.prob"),
            include_str!("../domains/briefcase/get-paid-at-work.prob"),
        ],
    },
    Bundle {
        name: "tileworld",
        domain: include_str!("../domains/tileworld/domain.dom"),
        problems: &[
            include_str!("../domains/tileworld/tw1.prob"),
            include_str!("../domains/tileworld/tw2.prob"),
            include_str!("../domains/tileworld/tw3.prob"),
            include_str!("../domains/tileworld/tw4.prob"),
        ],
    },
];

pub const NAMES: [&str; 3] = ["blocks", "briefcase", "tileworld"];

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("no bundled domain named '{0}' (available: blocks, briefcase, tileworld)")]
    UnknownDomain(String),
    #[error("bundled domain '{domain}' has no problem '{problem}'")]
    UnknownProblem { domain: String, problem: String },
    #[error(transparent)]
    Parse(#[from] DomainError),
}

/// A bundled domain with its problems, in their fixed order.
pub fn bundled(name: &str) -> Result<(Domain, Vec<Problem>), BundleError> {
    let b = BUNDLES
        .iter()
        .find(|b| b.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| BundleError::UnknownDomain(name.to_string()))?;
    let domain = parse_domain_text(b.domain)?;
    let problems = b
        .problems
        .iter()
        .map(|t| parse_problem_text(t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((domain, problems))
}

pub fn task(domain: &str, problem: &str) -> Result<Task, BundleError> {
    let (d, problems) = bundled(domain)?;
    let p = problems
        .iter()
        .find(|p| p.name.as_str() == problem)
        .ok_or_else(|| BundleError::UnknownProblem {
            domain: domain.to_string(),
            problem: problem.to_string(),
        })?;
    Ok(Task::new(&d, p)?)
}

/// Every bundled problem as a task, domain by domain.
pub fn all_tasks() -> Vec<Task> {
    NAMES
        .iter()
        .flat_map(|n| {
            let (d, ps) = bundled(n).expect("bundled files parse");
            ps.iter()
                .map(|p| Task::new(&d, p).expect("bundled problems check"))
                .collect::<Vec<_>>()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn everything_parses_and_checks() {
        assert_eq!(all_tasks().len(), 9);
    }

    #[test]
    fn tileworld_first_problem_has_one_hole() {
        let t = task("tileworld", "tw1").unwrap();
        assert_eq!(t.goal.len(), 1);
        assert_eq!(t.goal[0].to_string(), "(filled h1)");
    }

    #[test]
    fn briefcase_paycheck_starts_inside() {
        let t = task("briefcase", "get-paid").unwrap();
        assert_eq!(t.goal.len(), 3);
        assert!(t.init.iter().any(|l| l.to_string() == "(in P)"));
    }

    #[test]
    fn unknown_names() {
        assert!(matches!(
            bundled("trains"),
            Err(BundleError::UnknownDomain(_))
        ));
        assert!(matches!(
            task("blocks", "x"),
            Err(BundleError::UnknownProblem { .. })
        ));
    }
}
