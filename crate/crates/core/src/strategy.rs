//! Flaw selection strategies: the preference-sequence notation, the named
//! builtins and selection over an agenda.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::flaw::{repair_cost, repair_mix, CostMode, FlawContext, FlawType};
use crate::plan::PartialPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tiebreak {
    Lifo,
    Fifo,
    /// Least cost, ties by LIFO.
    Lc,
    /// Uniform over the matches.
    Random,
    /// Prefer opens only a new step can establish.
    New,
}

impl Tiebreak {
    fn keyword(self) -> &'static str {
        match self {
            Tiebreak::Lifo => "LIFO",
            Tiebreak::Fifo => "FIFO",
            Tiebreak::Lc => "LC",
            Tiebreak::Random => "R",
            Tiebreak::New => "New",
        }
    }
}

/// Inclusive cost bounds; `hi == None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostRange {
    pub lo: u32,
    pub hi: Option<u32>,
}

impl CostRange {
    pub fn contains(self, cost: u32) -> bool {
        cost >= self.lo && self.hi.is_none_or(|h| cost <= h)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preference {
    pub types: Vec<FlawType>,
    pub range: Option<CostRange>,
    pub tiebreak: Tiebreak,
}

impl Preference {
    fn needs_cost(&self) -> bool {
        self.range.is_some() || matches!(self.tiebreak, Tiebreak::Lc)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strategy {
    pub name: Option<String>,
    pub prefs: Vec<Preference>,
    pub cost_mode: CostMode,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StrategyError {
    #[error("strategy syntax error at offset {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("strategy is not exhaustive: {} uncovered (e.g. cost {cost})", flaw_type.description())]
    Uncovered { flaw_type: FlawType, cost: u32 },
    #[error("unknown strategy '{0}'")]
    Unknown(String),
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.text[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.text[self.pos..].chars().next()
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, StrategyError> {
        Err(StrategyError::Syntax {
            pos: self.pos,
            message: message.into(),
        })
    }

    fn expect(&mut self, c: char) -> Result<(), StrategyError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn word(&mut self) -> &'a str {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let len = rest
            .find(|c: char| !c.is_ascii_alphanumeric())
            .unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn int(&mut self) -> Result<u32, StrategyError> {
        let start = self.pos;
        let w = self.word();
        w.parse().or_else(|_| {
            self.pos = start;
            self.err(format!("expected an integer, found '{w}'"))
        })
    }
}

fn parse_pref(lx: &mut Lexer) -> Result<Preference, StrategyError> {
    lx.expect('{')?;
    let mut types = Vec::new();
    loop {
        let at = lx.pos;
        let t = match lx.word() {
            "o" => FlawType::Open,
            "n" => FlawType::Nonseparable,
            "s" => FlawType::Separable,
            other => {
                lx.pos = at;
                return lx.err(format!("expected flaw type o, n or s, found '{other}'"));
            }
        };
        if types.contains(&t) {
            lx.pos = at;
            return lx.err(format!("flaw type '{t}' repeated"));
        }
        types.push(t);
        match lx.peek() {
            Some(',') => lx.pos += 1,
            Some('}') => {
                lx.pos += 1;
                break;
            }
            _ => return lx.err("expected ',' or '}'"),
        }
    }
    let range = if lx.peek().is_some_and(|c| c.is_ascii_digit()) {
        let lo = lx.int()?;
        let hi = if lx.peek() == Some('-') {
            lx.pos += 1;
            let at = lx.pos;
            if lx.peek().is_some_and(|c| c.is_ascii_digit()) {
                let hi = lx.int()?;
                if hi < lo {
                    lx.pos = at;
                    return lx.err(format!("empty cost range {lo}-{hi}"));
                }
                Some(hi)
            } else if lx.word() == "inf" {
                None
            } else {
                lx.pos = at;
                return lx.err("expected an integer or 'inf'");
            }
        } else {
            Some(lo)
        };
        Some(CostRange { lo, hi })
    } else {
        None
    };
    let at = lx.pos;
    let tiebreak = match lx.word() {
        "LIFO" => Tiebreak::Lifo,
        "FIFO" => Tiebreak::Fifo,
        "LC" => Tiebreak::Lc,
        "R" => Tiebreak::Random,
        "New" => Tiebreak::New,
        other => {
            lx.pos = at;
            return lx.err(format!(
                "expected LIFO, FIFO, LC, R or New, found '{other}'"
            ));
        }
    };
    Ok(Preference {
        types,
        range,
        tiebreak,
    })
}

impl Strategy {
    /// Parses `pref ("/" pref)*` and checks that every flaw is covered.
    pub fn parse(text: &str) -> Result<Strategy, StrategyError> {
        let mut lx = Lexer { text, pos: 0 };
        let mut prefs = vec![parse_pref(&mut lx)?];
        while lx.peek() == Some('/') {
            lx.pos += 1;
            prefs.push(parse_pref(&mut lx)?);
        }
        if lx.peek().is_some() {
            return lx.err("unexpected trailing input");
        }
        let s = Strategy {
            name: None,
            prefs,
            cost_mode: CostMode::Exact,
        };
        s.check_exhaustive()?;
        Ok(s)
    }

    /// Costs past the largest bound mentioned behave like that bound plus
    /// one, so checking up to there covers every cost.
    pub fn check_exhaustive(&self) -> Result<(), StrategyError> {
        let max_bound = self
            .prefs
            .iter()
            .filter_map(|p| p.range)
            .flat_map(|r| [Some(r.lo), r.hi])
            .flatten()
            .max()
            .unwrap_or(0);
        for t in FlawType::ALL {
            for cost in 0..=max_bound + 1 {
                let covered = self
                    .prefs
                    .iter()
                    .any(|p| p.types.contains(&t) && p.range.is_none_or(|r| r.contains(cost)));
                if !covered {
                    return Err(StrategyError::Uncovered { flaw_type: t, cost });
                }
            }
        }
        Ok(())
    }

    /// Preferences using `New` outside the cost range 1..1.
    pub fn warnings(&self) -> Vec<String> {
        self.prefs
            .iter()
            .filter(|p| {
                p.tiebreak == Tiebreak::New && p.range != Some(CostRange { lo: 1, hi: Some(1) })
            })
            .map(|p| format!("'{p}' uses New outside cost 1"))
            .collect()
    }

    pub fn builtin(name: &str) -> Result<Strategy, StrategyError> {
        let (canonical, text) = BUILTINS
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .ok_or_else(|| StrategyError::Unknown(name.to_string()))?;
        let mut s = Strategy::parse(text).expect("builtin strategies are well formed");
        s.name = Some(canonical.to_string());
        if canonical.eq_ignore_ascii_case("QLCFR") {
            s.cost_mode = CostMode::Cached;
        }
        Ok(s)
    }

    /// A builtin name, or else the notation itself.
    pub fn resolve(text: &str) -> Result<Strategy, StrategyError> {
        match Strategy::builtin(text.trim()) {
            Ok(s) => Ok(s),
            Err(StrategyError::Unknown(_)) if text.contains('{') => Strategy::parse(text),
            Err(e) => Err(e),
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.to_string())
    }

    /// Chooses an agenda index, or `None` for an empty agenda. The agenda is
    /// assumed refreshed.
    pub fn select(
        &self,
        plan: &PartialPlan,
        ctx: &FlawContext,
        rng: &mut ChaCha8Rng,
    ) -> Option<usize> {
        let agenda = plan.agenda();
        if agenda.is_empty() {
            return None;
        }
        let ctx = FlawContext {
            mode: if self.cost_mode == CostMode::Cached {
                CostMode::Cached
            } else {
                ctx.mode
            },
            ..*ctx
        };
        let mut costs: Vec<Option<u32>> = vec![None; agenda.len()];
        let mut cost =
            |i: usize| *costs[i].get_or_insert_with(|| repair_cost(plan, &agenda[i], &ctx));
        for pref in &self.prefs {
            let mut matches: Vec<usize> = Vec::new();
            for (i, f) in agenda.iter().enumerate() {
                if !pref.types.contains(&f.flaw_type()) {
                    continue;
                }
                if let Some(r) = pref.range {
                    if !r.contains(cost(i)) {
                        continue;
                    }
                }
                matches.push(i);
            }
            if matches.is_empty() {
                continue;
            }
            let lifo = |i: &usize| agenda[*i].inserted_at;
            let pick = match pref.tiebreak {
                Tiebreak::Lifo => matches.iter().copied().max_by_key(lifo),
                Tiebreak::Fifo => matches.iter().copied().min_by_key(lifo),
                Tiebreak::Lc => matches
                    .iter()
                    .copied()
                    .min_by_key(|&i| (cost(i), std::cmp::Reverse(agenda[i].inserted_at))),
                Tiebreak::Random => Some(matches[rng.gen_range(0..matches.len())]),
                Tiebreak::New => matches.iter().copied().min_by_key(|&i| {
                    (
                        repair_mix(plan, ctx.task, agenda[i].kind),
                        std::cmp::Reverse(agenda[i].inserted_at),
                    )
                }),
            };
            debug_assert!(!pref.needs_cost() || pick.is_some());
            return pick;
        }
        unreachable!("exhaustive strategy matched no flaw")
    }
}

/// Builtin names and their notation.
pub const BUILTINS: &[(&str, &str)] = &[
    ("UCPOP", "{n,s}LIFO / {o}LIFO"),
    ("UCPOP-LC", "{n,s}LIFO / {o}LC"),
    ("DSep", "{n}LIFO / {o}LIFO / {s}LIFO"),
    ("DSep-LC", "{n}LIFO / {o}LC / {s}LIFO"),
    ("DSep-FIFO", "{n}LIFO / {o}FIFO / {s}LIFO"),
    (
        "DUnf",
        "{n,s}0 LIFO / {n,s}1 LIFO / {o}LIFO / {n,s}2-inf LIFO",
    ),
    (
        "DUnf-LC",
        "{n,s}0 LIFO / {n,s}1 LIFO / {o}LC / {n,s}2-inf LIFO",
    ),
    (
        "DUnf-FIFO",
        "{n,s}0 LIFO / {n,s}1 LIFO / {o}FIFO / {n,s}2-inf LIFO",
    ),
    (
        "DUnf-Gen",
        "{n,s,o}0 LIFO / {n,s,o}1 LIFO / {n,s,o}2-inf LIFO",
    ),
    ("LCFR", "{o,n,s}LC"),
    ("LCFR-DSep", "{n,o}LC / {s}LC"),
    (
        "ZLIFO",
        "{n}LIFO / {o}0 LIFO / {o}1 New / {o}2-inf LIFO / {s}LIFO",
    ),
    ("LIFO", "{o,n,s}LIFO"),
    ("QLCFR", "{o,n,s}LC"),
];

impl fmt::Display for Preference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, t) in self.types.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str("}")?;
        match self.range {
            None => {}
            Some(CostRange { lo, hi: Some(hi) }) if hi == lo => write!(f, "{lo} ")?,
            Some(CostRange { lo, hi: Some(hi) }) => write!(f, "{lo}-{hi} ")?,
            Some(CostRange { lo, hi: None }) => write!(f, "{lo}-inf ")?,
        }
        f.write_str(self.tiebreak.keyword())
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.prefs.iter().enumerate() {
            if i > 0 {
                f.write_str(" / ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}
