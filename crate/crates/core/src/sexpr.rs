//! Minimal s-expression reader with line/column positions.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items, _) => Some(items),
            Sexp::Atom(..) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {message}")]
pub struct SyntaxError {
    pub pos: Pos,
    pub message: String,
}

impl SyntaxError {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        SyntaxError {
            pos,
            message: message.into(),
        }
    }
}

/// Reads every top-level expression in `text`. Comments run from `;` to
/// the end of the line.
pub fn read_all(text: &str) -> Result<Vec<Sexp>, SyntaxError> {
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    let mut top = Vec::new();
    let mut line = 1u32;
    let mut col = 0u32;
    let mut chars = text.chars().peekable();
    let mut atom = String::new();
    let mut atom_pos = Pos::default();

    fn flush(atom: &mut String, pos: Pos, stack: &mut [(Vec<Sexp>, Pos)], top: &mut Vec<Sexp>) {
        if atom.is_empty() {
            return;
        }
        let node = Sexp::Atom(std::mem::take(atom), pos);
        match stack.last_mut() {
            Some((items, _)) => items.push(node),
            None => top.push(node),
        }
    }

    while let Some(ch) = chars.next() {
        col += 1;
        let here = Pos { line, col };
        match ch {
            ';' => {
                flush(&mut atom, atom_pos, &mut stack, &mut top);
                for c in chars.by_ref() {
                    if c == '\n' {
                        line += 1;
                        col = 0;
                        break;
                    }
                }
            }
            '(' => {
                flush(&mut atom, atom_pos, &mut stack, &mut top);
                stack.push((Vec::new(), here));
            }
            ')' => {
                flush(&mut atom, atom_pos, &mut stack, &mut top);
                let (items, start) = stack
                    .pop()
                    .ok_or_else(|| SyntaxError::new(here, "unbalanced ')'"))?;
                let node = Sexp::List(items, start);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(node),
                    None => top.push(node),
                }
            }
            c if c.is_whitespace() => {
                flush(&mut atom, atom_pos, &mut stack, &mut top);
                if c == '\n' {
                    line += 1;
                    col = 0;
                }
            }
            c => {
                if atom.is_empty() {
                    atom_pos = here;
                }
                atom.push(c);
            }
        }
    }
    flush(&mut atom, atom_pos, &mut stack, &mut top);
    if let Some((_, start)) = stack.last() {
        return Err(SyntaxError::new(*start, "unclosed '('"));
    }
    Ok(top)
}
