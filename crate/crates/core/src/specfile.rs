//! Plain-text format for distributions and games.
//!
//! ```text
//! # perfectly correlated bit
//! dist "coin"
//! alphabet X: 0 1
//! alphabet Y: 0 1
//! pmf: 1/2 0 / 0 1/2
//! ```
//!
//! Games use `game "name"`, `actions A:`/`actions B:` and the matrices
//! `u1:` and `u2:`. Matrix rows index the first alphabet and are separated
//! by a standalone `/`; a matrix may continue over following lines. Numbers
//! are integers or `p/q` literals. `#` starts a comment.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::game::Game;
use crate::prob::{Alphabet, JointPMF};
use crate::rational::{parse_rational, Rational};

#[derive(Debug, Clone, PartialEq)]
pub enum SpecBody {
    Dist(JointPMF),
    Game(Game),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecFile {
    pub name: String,
    pub body: SpecBody,
}

impl SpecFile {
    pub fn kind(&self) -> &'static str {
        match self.body {
            SpecBody::Dist(_) => "dist",
            SpecBody::Game(_) => "game",
        }
    }
}

#[derive(Debug, Clone)]
struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(line_no: usize, line: &str) -> Vec<Token<'_>> {
    let code = line.split('#').next().unwrap_or("");
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in code.char_indices().chain(std::iter::once((code.len(), ' '))) {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                tokens.push(Token {
                    text: &code[s..i],
                    line: line_no,
                    column: code[..s].chars().count() + 1,
                });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Dist,
    Game,
}

struct Matrix<'a> {
    keyword: Token<'a>,
    rows: Vec<(Token<'a>, Vec<Rational>)>,
}

fn parse_header(line_no: usize, line: &str, tokens: &[Token<'_>]) -> Result<(Kind, String)> {
    let first = &tokens[0];
    let kind = match first.text {
        "dist" => Kind::Dist,
        "game" => Kind::Game,
        other => {
            return Err(syntax(
                line_no,
                first.column,
                format!("expected `dist` or `game`, found `{other}`"),
            ))
        }
    };
    let code = line.split('#').next().unwrap_or("");
    let after = code.find(first.text).expect("token in line") + first.text.len();
    let rest = &code[after..];
    let open = rest
        .find('"')
        .filter(|&i| rest[..i].trim().is_empty())
        .ok_or_else(|| syntax(line_no, code[..after].chars().count() + 2, "expected quoted name"))?;
    let body = &rest[open + 1..];
    let close = body
        .find('"')
        .ok_or_else(|| syntax(line_no, code.chars().count() + 1, "unterminated name"))?;
    let tail = &body[close + 1..];
    if !tail.trim().is_empty() {
        let col = code.len() - tail.trim_start().len();
        return Err(syntax(line_no, code[..col].chars().count() + 1, "unexpected text after name"));
    }
    Ok((kind, body[..close].to_string()))
}

fn matrix_rows<'a>(keyword: Token<'a>, tokens: &[Token<'a>]) -> Result<Matrix<'a>> {
    let mut rows = Vec::new();
    let mut current: Option<(Token<'a>, Vec<Rational>)> = None;
    for t in tokens {
        if t.text == "/" {
            match current.take() {
                Some(row) => rows.push(row),
                None => return Err(syntax(t.line, t.column, "empty matrix row")),
            }
            continue;
        }
        let value = parse_rational(t.text)
            .ok_or_else(|| syntax(t.line, t.column, format!("invalid number `{}`", t.text)))?;
        current
            .get_or_insert_with(|| (t.clone(), Vec::new()))
            .1
            .push(value);
    }
    match current {
        Some(row) => rows.push(row),
        None => {
            let (line, column) = tokens.last().map_or((keyword.line, keyword.column), |t| (t.line, t.column));
            return Err(syntax(line, column, "matrix must end with a row"));
        }
    }
    Ok(Matrix { keyword, rows })
}

fn check_shape(m: &Matrix<'_>, rows: &Alphabet, cols: &Alphabet) -> Result<Vec<Vec<Rational>>> {
    if m.rows.len() != rows.len() {
        return Err(syntax(
            m.keyword.line,
            m.keyword.column,
            format!("expected {} rows, found {}", rows.len(), m.rows.len()),
        ));
    }
    for (start, row) in &m.rows {
        if row.len() != cols.len() {
            return Err(syntax(
                start.line,
                start.column,
                format!("row has {} entries, expected {}", row.len(), cols.len()),
            ));
        }
    }
    Ok(m.rows.iter().map(|(_, r)| r.clone()).collect())
}

fn validation(e: Error) -> Error {
    match e {
        Error::Validation(_) => e,
        other => Error::Validation(other.to_string()),
    }
}

pub fn parse_spec(text: &str) -> Result<SpecFile> {
    let lines: Vec<(usize, &str, Vec<Token<'_>>)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l, tokenize(i + 1, l)))
        .filter(|(_, _, t)| !t.is_empty())
        .collect();
    let Some((header_line, header_text, header_tokens)) = lines.first() else {
        return Err(syntax(1, 1, "empty spec"));
    };
    let (kind, name) = parse_header(*header_line, header_text, header_tokens)?;

    let mut alphabets: [Option<(Token<'_>, Alphabet)>; 2] = [None, None];
    let mut matrices: Vec<(String, Vec<Token<'_>>, Token<'_>)> = Vec::new();
    let mut open: Option<usize> = None;
    for (_, _, tokens) in &lines[1..] {
        let first = &tokens[0];
        match first.text {
            "alphabet" | "actions" => {
                open = None;
                let expected = if kind == Kind::Dist { "alphabet" } else { "actions" };
                if first.text != expected {
                    return Err(syntax(first.line, first.column, format!("expected `{expected}`")));
                }
                let labels = if kind == Kind::Dist { ["X:", "Y:"] } else { ["A:", "B:"] };
                let slot_token = tokens
                    .get(1)
                    .ok_or_else(|| syntax(first.line, first.column + first.text.len() + 1, "missing axis"))?;
                let slot = labels.iter().position(|l| *l == slot_token.text).ok_or_else(|| {
                    syntax(
                        slot_token.line,
                        slot_token.column,
                        format!("expected `{}` or `{}`", labels[0], labels[1]),
                    )
                })?;
                if alphabets[slot].is_some() {
                    return Err(syntax(first.line, first.column, "duplicate alphabet"));
                }
                if tokens.len() < 3 {
                    return Err(syntax(slot_token.line, slot_token.column, "alphabet needs labels"));
                }
                let alphabet = Alphabet::new(tokens[2..].iter().map(|t| t.text)).map_err(validation)?;
                alphabets[slot] = Some((first.clone(), alphabet));
            }
            "pmf:" | "u1:" | "u2:" => {
                let allowed: &[&str] = if kind == Kind::Dist { &["pmf:"] } else { &["u1:", "u2:"] };
                if !allowed.contains(&first.text) {
                    return Err(syntax(first.line, first.column, format!("`{}` not allowed here", first.text)));
                }
                if matrices.iter().any(|(k, _, _)| k == first.text) {
                    return Err(syntax(first.line, first.column, "duplicate matrix"));
                }
                matrices.push((first.text.to_string(), tokens[1..].to_vec(), first.clone()));
                open = Some(matrices.len() - 1);
            }
            "dist" | "game" => return Err(syntax(first.line, first.column, "duplicate header")),
            _ => match open {
                Some(i) => matrices[i].1.extend(tokens.iter().cloned()),
                None => {
                    return Err(syntax(first.line, first.column, format!("unexpected `{}`", first.text)))
                }
            },
        }
    }

    let end = lines.last().map_or(1, |(l, _, _)| *l);
    let [ax, ay] = alphabets;
    let names = if kind == Kind::Dist { ["alphabet X", "alphabet Y"] } else { ["actions A", "actions B"] };
    let ax = ax.ok_or_else(|| syntax(end, 1, format!("missing `{}`", names[0])))?.1;
    let ay = ay.ok_or_else(|| syntax(end, 1, format!("missing `{}`", names[1])))?.1;
    let mut take = |key: &str| -> Result<Vec<Vec<Rational>>> {
        let i = matrices
            .iter()
            .position(|(k, _, _)| k == key)
            .ok_or_else(|| syntax(end, 1, format!("missing `{key}`")))?;
        let (_, tokens, keyword) = matrices.swap_remove(i);
        check_shape(&matrix_rows(keyword, &tokens)?, &ax, &ay)
    };
    let body = match kind {
        Kind::Dist => {
            let mass = take("pmf:")?;
            SpecBody::Dist(JointPMF::new(ax.clone(), ay.clone(), mass).map_err(validation)?)
        }
        Kind::Game => {
            let u1 = take("u1:")?;
            let u2 = take("u2:")?;
            SpecBody::Game(Game::new(ax.clone(), ay.clone(), u1, u2).map_err(validation)?)
        }
    };
    Ok(SpecFile { name, body })
}

fn render_matrix(out: &mut String, key: &str, m: &[Vec<Rational>]) {
    let rows: Vec<String> = m
        .iter()
        .map(|r| r.iter().map(ToString::to_string).collect::<Vec<_>>().join(" "))
        .collect();
    let _ = writeln!(out, "{key}");
    let _ = writeln!(out, "  {}", rows.join(" /\n  "));
}

pub fn render_spec(spec: &SpecFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} \"{}\"", spec.kind(), spec.name);
    match &spec.body {
        SpecBody::Dist(p) => {
            let _ = writeln!(out, "alphabet X: {}", p.alphabet_x());
            let _ = writeln!(out, "alphabet Y: {}", p.alphabet_y());
            render_matrix(&mut out, "pmf:", p.mass());
        }
        SpecBody::Game(g) => {
            let _ = writeln!(out, "actions A: {}", g.actions_a());
            let _ = writeln!(out, "actions B: {}", g.actions_b());
            render_matrix(&mut out, "u1:", g.u1());
            render_matrix(&mut out, "u2:", g.u2());
        }
    }
    out
}

pub fn parse_dist(text: &str) -> Result<JointPMF> {
    match parse_spec(text)?.body {
        SpecBody::Dist(p) => Ok(p),
        SpecBody::Game(_) => Err(Error::Validation("expected a `dist` spec, found a game".into())),
    }
}

pub fn parse_game(text: &str) -> Result<Game> {
    match parse_spec(text)?.body {
        SpecBody::Game(g) => Ok(g),
        SpecBody::Dist(_) => Err(Error::Validation("expected a `game` spec, found a dist".into())),
    }
}
