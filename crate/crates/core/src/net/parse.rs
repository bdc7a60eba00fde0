//! Line-oriented model format.
//!
//! ```text
//! # comment
//! class ccpn                          (optional; inferred when absent)
//! place P1 continuous = 25
//! place Open1 discrete = 1
//! transition T1 continuous speed=2
//! transition close1 discrete interval=[3,inf]
//! transition refill discrete duration=3
//! arc P1 -> T3 weight=2               (weight defaults to 1)
//! arc T3 -> P3
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use super::{
    DiscreteTiming, FiringInterval, HybridNet, Marking, NetClass, NodeKind, Place, Transition,
    TransitionKind,
};
use crate::rational::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{line}:{column}: reference to undeclared {what} `{id}`")]
    Undeclared { line: usize, column: usize, what: &'static str, id: String },
    #[error("{line}:{column}: duplicate identifier `{id}`")]
    Duplicate { line: usize, column: usize, id: String },
    #[error("{line}:{column}: negative {what} `{value}`")]
    Negative { line: usize, column: usize, what: &'static str, value: String },
    #[error("{line}:{column}: malformed interval: {message}")]
    Interval { line: usize, column: usize, message: String },
    #[error("net must have ≥1 place")]
    NoPlaces,
}

impl ParseError {
    /// `(line, column)` of the offending token, 1-based.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            ParseError::Syntax { line, column, .. }
            | ParseError::Undeclared { line, column, .. }
            | ParseError::Duplicate { line, column, .. }
            | ParseError::Negative { line, column, .. }
            | ParseError::Interval { line, column, .. } => Some((*line, *column)),
            ParseError::NoPlaces => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (idx, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                tokens.push(Token { text: &line[s..idx], column: s + 1 });
                start = None;
            }
            (false, None) => start = Some(idx),
            _ => {}
        }
    }
    if let Some(s) = start {
        tokens.push(Token { text: &line[s..], column: s + 1 });
    }
    tokens
}

struct LineCtx<'a> {
    number: usize,
    text: &'a str,
}

impl LineCtx<'_> {
    fn syntax(&self, column: usize, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { line: self.number, column, message: message.into() }
    }

    fn end_column(&self) -> usize {
        self.text.trim_end().len() + 1
    }

    /// Joins every token from `from` on, so `interval=[3, inf]` survives spacing.
    fn rest(&self, tokens: &[Token<'_>], from: usize) -> Option<(String, usize)> {
        let first = tokens.get(from)?;
        let joined: String = tokens[from..].iter().map(|t| t.text).collect();
        Some((joined, first.column))
    }
}

fn check_id(ctx: &LineCtx<'_>, tok: Token<'_>) -> Result<String, ParseError> {
    let valid_start = tok.text.chars().next().is_some_and(|c| c.is_alphanumeric() || c == '_');
    let valid_rest = tok
        .text
        .chars()
        .all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '\''));
    if valid_start && valid_rest {
        Ok(tok.text.to_string())
    } else {
        Err(ctx.syntax(tok.column, format!("invalid identifier `{}`", tok.text)))
    }
}

fn non_negative(
    ctx: &LineCtx<'_>,
    column: usize,
    text: &str,
    what: &'static str,
) -> Result<Rational, ParseError> {
    let value = rational::parse(text)
        .ok_or_else(|| ctx.syntax(column, format!("expected a rational number, found `{text}`")))?;
    if value.is_negative() {
        return Err(ParseError::Negative { line: ctx.number, column, what, value: text.to_string() });
    }
    Ok(value)
}

fn parse_interval(ctx: &LineCtx<'_>, column: usize, text: &str) -> Result<FiringInterval, ParseError> {
    let malformed = |message: &str| ParseError::Interval {
        line: ctx.number,
        column,
        message: message.to_string(),
    };
    let inner = text
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| malformed("expected `[<rational>,<rational>|inf]`"))?;
    let (lo, hi) = inner
        .split_once(',')
        .ok_or_else(|| malformed("expected two comma-separated bounds"))?;
    let earliest = rational::parse(lo).ok_or_else(|| malformed("lower bound is not a rational"))?;
    let latest = rational::parse_extended(hi)
        .ok_or_else(|| malformed("upper bound is not a rational or `inf`"))?;
    if earliest.is_negative() || latest.as_ref().is_some_and(|l| l.is_negative()) {
        return Err(ParseError::Negative {
            line: ctx.number,
            column,
            what: "interval bound",
            value: text.to_string(),
        });
    }
    let interval = FiringInterval::new(earliest, latest);
    if !interval.is_ordered() {
        return Err(malformed("α > β"));
    }
    Ok(interval)
}

struct PendingArc {
    line: usize,
    from: (String, usize),
    to: (String, usize),
    weight: Rational,
}

pub fn parse_model(text: &str) -> Result<HybridNet, ParseError> {
    let mut class: Option<NetClass> = None;
    let mut places: Vec<Place> = Vec::new();
    let mut initial: Vec<Rational> = Vec::new();
    let mut transitions: Vec<Transition> = Vec::new();
    let mut arcs: Vec<PendingArc> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        let ctx = LineCtx { number: idx + 1, text: content };
        let tokens = tokenize(content);
        let Some(head) = tokens.first() else { continue };
        match head.text {
            "class" => {
                let tok = tokens.get(1).ok_or_else(|| ctx.syntax(ctx.end_column(), "expected a net class"))?;
                class = Some(NetClass::from_keyword(tok.text).ok_or_else(|| {
                    ctx.syntax(tok.column, format!("unknown net class `{}`", tok.text))
                })?);
                if let Some(extra) = tokens.get(2) {
                    return Err(ctx.syntax(extra.column, "unexpected trailing input"));
                }
            }
            "place" => {
                let id_tok = tokens.get(1).ok_or_else(|| ctx.syntax(ctx.end_column(), "expected a place identifier"))?;
                let id = check_id(&ctx, *id_tok)?;
                let kind_tok = tokens.get(2).ok_or_else(|| ctx.syntax(ctx.end_column(), "expected `continuous` or `discrete`"))?;
                let kind = match kind_tok.text {
                    "continuous" => NodeKind::Continuous,
                    "discrete" => NodeKind::Discrete,
                    other => return Err(ctx.syntax(kind_tok.column, format!("expected `continuous` or `discrete`, found `{other}`"))),
                };
                let (rest, col) = ctx
                    .rest(&tokens, 3)
                    .ok_or_else(|| ctx.syntax(ctx.end_column(), "expected `= <initial marking>`"))?;
                let value_text = rest
                    .strip_prefix('=')
                    .ok_or_else(|| ctx.syntax(col, "expected `= <initial marking>`"))?;
                let value = rational::parse(value_text).ok_or_else(|| {
                    ctx.syntax(col, format!("expected a rational initial marking, found `{value_text}`"))
                })?;
                if !seen.insert(id.clone()) {
                    return Err(ParseError::Duplicate { line: ctx.number, column: id_tok.column, id });
                }
                places.push(Place { id, kind });
                initial.push(value);
            }
            "transition" => {
                let id_tok = tokens.get(1).ok_or_else(|| ctx.syntax(ctx.end_column(), "expected a transition identifier"))?;
                let id = check_id(&ctx, *id_tok)?;
                let kind_tok = tokens.get(2).ok_or_else(|| ctx.syntax(ctx.end_column(), "expected `continuous` or `discrete`"))?;
                let attr = ctx.rest(&tokens, 3);
                let kind = match kind_tok.text {
                    "continuous" => match attr {
                        None => TransitionKind::Continuous { max_speed: None },
                        Some((text, col)) => {
                            let value = text
                                .strip_prefix("speed=")
                                .ok_or_else(|| ctx.syntax(col, "expected `speed=<rational>`"))?;
                            TransitionKind::Continuous {
                                max_speed: Some(non_negative(&ctx, col, value, "speed")?),
                            }
                        }
                    },
                    "discrete" => {
                        let (text, col) = attr.ok_or_else(|| {
                            ctx.syntax(ctx.end_column(), "expected `duration=<rational>` or `interval=[a,b]`")
                        })?;
                        if let Some(value) = text.strip_prefix("duration=") {
                            TransitionKind::Discrete(DiscreteTiming::Duration(non_negative(&ctx, col, value, "duration")?))
                        } else if let Some(value) = text.strip_prefix("interval=") {
                            TransitionKind::Discrete(DiscreteTiming::Interval(parse_interval(&ctx, col, value)?))
                        } else {
                            return Err(ctx.syntax(col, "expected `duration=<rational>` or `interval=[a,b]`"));
                        }
                    }
                    other => return Err(ctx.syntax(kind_tok.column, format!("expected `continuous` or `discrete`, found `{other}`"))),
                };
                if !seen.insert(id.clone()) {
                    return Err(ParseError::Duplicate { line: ctx.number, column: id_tok.column, id });
                }
                transitions.push(Transition { id, kind });
            }
            "arc" => {
                let from = tokens.get(1).ok_or_else(|| ctx.syntax(ctx.end_column(), "expected arc source"))?;
                let arrow = tokens.get(2).ok_or_else(|| ctx.syntax(ctx.end_column(), "expected `->`"))?;
                if arrow.text != "->" {
                    return Err(ctx.syntax(arrow.column, format!("expected `->`, found `{}`", arrow.text)));
                }
                let to = tokens.get(3).ok_or_else(|| ctx.syntax(ctx.end_column(), "expected arc target"))?;
                let weight = match ctx.rest(&tokens, 4) {
                    None => Rational::one(),
                    Some((text, col)) => {
                        let inner = text
                            .strip_prefix('[')
                            .and_then(|t| t.strip_suffix(']'))
                            .unwrap_or(&text);
                        let value = inner
                            .strip_prefix("weight=")
                            .ok_or_else(|| ctx.syntax(col, "expected `weight=<rational>`"))?;
                        non_negative(&ctx, col, value, "weight")?
                    }
                };
                arcs.push(PendingArc {
                    line: ctx.number,
                    from: (check_id(&ctx, *from)?, from.column),
                    to: (check_id(&ctx, *to)?, to.column),
                    weight,
                });
            }
            other => {
                return Err(ctx.syntax(head.column, format!("unknown statement `{other}`")));
            }
        }
    }

    if places.is_empty() {
        return Err(ParseError::NoPlaces);
    }

    let class = class.unwrap_or_else(|| infer_class(&places, &transitions));
    let mut net = HybridNet::new(class, places, transitions);
    net.initial = Marking(initial);
    let mut declared_arcs: HashSet<(usize, usize, bool)> = HashSet::new();

    for arc in arcs {
        let (from_id, from_col) = &arc.from;
        let (to_id, to_col) = &arc.to;
        let (place, transition, is_pre, place_col) =
            match (net.place_index(from_id), net.transition_index(to_id)) {
                (Some(p), Some(t)) => (p, t, true, *from_col),
                _ => match (net.transition_index(from_id), net.place_index(to_id)) {
                    (Some(t), Some(p)) => (p, t, false, *to_col),
                    _ => {
                        let undeclared = |id: &str, col: usize| {
                            (net.place_index(id).is_none() && net.transition_index(id).is_none())
                                .then(|| ParseError::Undeclared {
                                    line: arc.line,
                                    column: col,
                                    what: "node",
                                    id: id.to_string(),
                                })
                        };
                        return Err(undeclared(from_id, *from_col)
                            .or_else(|| undeclared(to_id, *to_col))
                            .unwrap_or(ParseError::Syntax {
                                line: arc.line,
                                column: *from_col,
                                message: "an arc must connect a place and a transition".into(),
                            }));
                    }
                },
            };
        if !declared_arcs.insert((place, transition, is_pre)) {
            return Err(ParseError::Syntax {
                line: arc.line,
                column: place_col,
                message: format!("duplicate arc between `{from_id}` and `{to_id}`"),
            });
        }
        if is_pre {
            net.pre[place][transition] = arc.weight;
        } else {
            net.post[place][transition] = arc.weight;
        }
    }
    Ok(net)
}

fn infer_class(places: &[Place], transitions: &[Transition]) -> NetClass {
    let has_discrete = places.iter().any(|p| p.kind == NodeKind::Discrete)
        || transitions.iter().any(|t| !t.is_continuous());
    if has_discrete {
        let has_interval = transitions
            .iter()
            .any(|t| matches!(t.kind, TransitionKind::Discrete(DiscreteTiming::Interval(_))));
        if has_interval {
            NetClass::DElementary
        } else {
            NetClass::HybridTimed
        }
    } else if transitions.iter().any(|t| t.max_speed().is_some()) {
        NetClass::Ccpn
    } else {
        NetClass::AutonomousContinuous
    }
}

/// Emits the model grammar; `parse_model(serialize_model(n)) == n`.
pub fn serialize_model(net: &HybridNet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "class {}", net.class.keyword());
    for (place, amount) in net.places.iter().zip(&net.initial.0) {
        let _ = writeln!(out, "place {} {} = {}", place.id, place.kind.keyword(), rational::format(amount));
    }
    for t in &net.transitions {
        let attr = match &t.kind {
            TransitionKind::Continuous { max_speed: Some(v) } => format!(" speed={}", rational::format(v)),
            TransitionKind::Continuous { max_speed: None } => String::new(),
            TransitionKind::Discrete(DiscreteTiming::Duration(d)) => format!(" duration={}", rational::format(d)),
            TransitionKind::Discrete(DiscreteTiming::Interval(i)) => format!(" interval={i}"),
        };
        let _ = writeln!(out, "transition {} {}{}", t.id, t.node_kind().keyword(), attr);
    }
    let weight = |w: &Rational| {
        if w.is_one() {
            String::new()
        } else {
            format!(" weight={}", rational::format(w))
        }
    };
    for (j, t) in net.transitions.iter().enumerate() {
        for (i, p) in net.places.iter().enumerate() {
            if !net.pre[i][j].is_zero() {
                let _ = writeln!(out, "arc {} -> {}{}", p.id, t.id, weight(&net.pre[i][j]));
            }
        }
        for (i, p) in net.places.iter().enumerate() {
            if !net.post[i][j].is_zero() {
                let _ = writeln!(out, "arc {} -> {}{}", t.id, p.id, weight(&net.post[i][j]));
            }
        }
    }
    out
}
