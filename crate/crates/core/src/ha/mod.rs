//! Hybrid automata with constant flows, the translation of D-elementary nets
//! into them, and a simulator that replays the hybrid engine's policies on an
//! automaton.
//!
//! Clocks always advance at rate 1 and are not listed in location flows.

mod export;
mod simulate;
mod translate;

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::ccpn::CcpnError;
use crate::hybrid::HybridError;
use crate::net::{Marking, NetClass};
use crate::rational::{self, Rational};

pub use export::{export_ha, import_ha, HaFormat, SCHEMA_VERSION};
pub use simulate::{simulate_ha, simulate_ha_with};
pub use translate::{
    ccpn_configuration, ccpn_to_ha, extract_discrete_part, flatten, timepn_to_timed_automaton, translate,
    translate_detailed, InnerAutomaton, Translation,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HaError {
    #[error("a {0} net cannot be translated (expected d-elementary or ccpn)")]
    NotTranslatable(NetClass),
    #[error("more than {cap} reachable discrete markings")]
    MarkingCapExceeded { cap: usize },
    #[error(transparent)]
    Flow(#[from] CcpnError),
    #[error(transparent)]
    Run(#[from] HybridError),
    #[error("malformed automaton: {0}")]
    Malformed(String),
    #[error("invariant `{constraint}` of location {location} violated at t = {time}")]
    InvariantViolation { location: String, constraint: String, time: String },
    #[error("guard `{constraint}` of edge {label} from {location} violated at t = {time}")]
    GuardViolation { location: String, label: String, constraint: String, time: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }

    pub fn from_symbol(text: &str) -> Option<Relation> {
        match text {
            "<=" => Some(Relation::Le),
            ">=" => Some(Relation::Ge),
            "=" | "==" => Some(Relation::Eq),
            _ => None,
        }
    }
}

/// `Σ coef · name  rel  constant`, over variables and clocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearConstraint {
    pub terms: Vec<(String, Rational)>,
    pub relation: Relation,
    pub constant: Rational,
}

impl LinearConstraint {
    pub fn atom(name: impl Into<String>, relation: Relation, constant: Rational) -> Self {
        LinearConstraint { terms: vec![(name.into(), rational::one())], relation, constant }
    }

    /// Single-term constraint `name rel c` with unit coefficient.
    pub fn as_atom(&self) -> Option<(&str, Relation, &Rational)> {
        match self.terms.as_slice() {
            [(name, coef)] if coef == &rational::one() => Some((name, self.relation, &self.constant)),
            _ => None,
        }
    }

    pub fn holds(&self, value: impl Fn(&str) -> Rational) -> bool {
        let lhs: Rational = self.terms.iter().map(|(name, coef)| coef * value(name)).sum();
        match self.relation {
            Relation::Le => lhs <= self.constant,
            Relation::Ge => lhs >= self.constant,
            Relation::Eq => lhs == self.constant,
        }
    }
}

impl fmt::Display for LinearConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .terms
            .iter()
            .map(|(name, coef)| {
                if coef == &rational::one() {
                    name.clone()
                } else {
                    format!("{}*{name}", rational::format(coef))
                }
            })
            .collect();
        write!(f, "{} {} {}", terms.join(" + "), self.relation.symbol(), rational::format(&self.constant))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub id: String,
    /// Rate of every variable, aligned with `HybridAutomaton::variables`.
    pub flow: Vec<Rational>,
    pub invariant: Vec<LinearConstraint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub label: String,
    pub guard: Vec<LinearConstraint>,
    /// Clocks set to zero.
    pub resets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HybridAutomaton {
    /// Continuous place ids.
    pub variables: Vec<String>,
    /// `x_<transition>`, one per entry of `labels`, same order.
    pub clocks: Vec<String>,
    /// Discrete transition ids. Edges whose label is not listed here are
    /// `<place> = 0` edges taken when the place empties.
    pub labels: Vec<String>,
    pub locations: Vec<Location>,
    pub edges: Vec<Edge>,
    pub initial: usize,
    /// Initial variable values; every clock starts at 0.
    pub initial_valuation: Vec<Rational>,
}

pub fn clock_name(transition: &str) -> String {
    format!("x_{transition}")
}

pub fn zero_label(place: &str) -> String {
    format!("{place} = 0")
}

impl HybridAutomaton {
    pub fn location_index(&self, id: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.id == id)
    }

    pub fn outgoing(&self, location: usize) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.source == location)
    }

    pub fn is_discrete_label(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    /// Structural well-formedness: indices in range, unique ids, declared names
    /// only, one clock per label.
    pub fn check(&self) -> Result<(), HaError> {
        let bad = |msg: String| Err(HaError::Malformed(msg));
        if self.clocks.len() != self.labels.len() {
            return bad("clock count differs from label count".into());
        }
        for (c, l) in self.clocks.iter().zip(&self.labels) {
            if c != &clock_name(l) {
                return bad(format!("clock `{c}` does not belong to label `{l}`"));
            }
        }
        if self.initial >= self.locations.len() {
            return bad("initial location out of range".into());
        }
        if self.initial_valuation.len() != self.variables.len() {
            return bad("initial valuation does not cover the variables".into());
        }
        let mut ids = HashSet::new();
        let names: HashSet<&str> = self.variables.iter().chain(&self.clocks).map(String::as_str).collect();
        let known = |c: &LinearConstraint| c.terms.iter().all(|(n, _)| names.contains(n.as_str()));
        for loc in &self.locations {
            if !ids.insert(loc.id.as_str()) {
                return bad(format!("duplicate location `{}`", loc.id));
            }
            if loc.flow.len() != self.variables.len() {
                return bad(format!("flow of `{}` does not cover the variables", loc.id));
            }
            if let Some(c) = loc.invariant.iter().find(|c| !known(c)) {
                return bad(format!("invariant `{c}` of `{}` uses an undeclared name", loc.id));
            }
        }
        for e in &self.edges {
            if e.source >= self.locations.len() || e.target >= self.locations.len() {
                return bad(format!("edge `{}` points outside the location list", e.label));
            }
            if let Some(c) = e.guard.iter().find(|c| !known(c)) {
                return bad(format!("guard `{c}` of edge `{}` uses an undeclared name", e.label));
            }
            if let Some(r) = e.resets.iter().find(|r| !self.clocks.contains(r)) {
                return bad(format!("edge `{}` resets unknown clock `{r}`", e.label));
            }
        }
        Ok(())
    }
}

/// Marking-graph automaton of a time Petri net. `markings[k]` is the discrete
/// marking (over the time net's places) of location `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedAutomaton {
    pub automaton: HybridAutomaton,
    pub places: Vec<String>,
    pub markings: Vec<Marking>,
}
