use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Edge, HaError, HybridAutomaton, LinearConstraint, Location, Relation};
use crate::rational::{self, Rational};

pub const SCHEMA_VERSION: &str = "hpn-ha/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaFormat {
    Dot,
    Structured,
}

#[derive(Serialize, Deserialize)]
struct Document {
    schema: String,
    variables: Vec<String>,
    clocks: Vec<String>,
    labels: Vec<String>,
    locations: Vec<LocationDoc>,
    edges: Vec<EdgeDoc>,
    init: InitDoc,
}

#[derive(Serialize, Deserialize)]
struct LocationDoc {
    id: String,
    /// Variable → rate, in variable order.
    flow: Vec<(String, String)>,
    invariant: Vec<ConstraintDoc>,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    src: String,
    dst: String,
    label: String,
    guards: Vec<ConstraintDoc>,
    resets: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ConstraintDoc {
    terms: Vec<(String, String)>,
    op: String,
    rhs: String,
}

#[derive(Serialize, Deserialize)]
struct InitDoc {
    location: String,
    valuation: Vec<(String, String)>,
}

fn constraint_doc(c: &LinearConstraint) -> ConstraintDoc {
    ConstraintDoc {
        terms: c.terms.iter().map(|(n, k)| (n.clone(), rational::format(k))).collect(),
        op: c.relation.symbol().to_string(),
        rhs: rational::format(&c.constant),
    }
}

fn number(text: &str) -> Result<Rational, HaError> {
    rational::parse(text).ok_or_else(|| HaError::Malformed(format!("`{text}` is not a rational")))
}

fn constraint_from(doc: ConstraintDoc) -> Result<LinearConstraint, HaError> {
    Ok(LinearConstraint {
        terms: doc.terms.into_iter().map(|(n, k)| Ok((n, number(&k)?))).collect::<Result<_, HaError>>()?,
        relation: Relation::from_symbol(&doc.op)
            .ok_or_else(|| HaError::Malformed(format!("unknown relation `{}`", doc.op)))?,
        constant: number(&doc.rhs)?,
    })
}

fn dot_escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

fn to_dot(ha: &HybridAutomaton) -> String {
    let mut out = String::from("digraph ha {\n  rankdir=LR;\n  node [shape=box];\n");
    if !ha.variables.is_empty() {
        let legend: Vec<String> = ha.variables.iter().enumerate().map(|(k, v)| format!("m{}={v}", k + 1)).collect();
        let _ = writeln!(out, "  label=\"{}\";", dot_escape(&legend.join(", ")));
    }
    for (k, loc) in ha.locations.iter().enumerate() {
        let flow: Vec<String> = loc
            .flow
            .iter()
            .enumerate()
            .map(|(i, r)| format!("dm{}/dt={}", i + 1, rational::format(r)))
            .collect();
        let inv: Vec<String> = loc.invariant.iter().map(|c| c.to_string()).collect();
        let mut label = loc.id.clone();
        if !flow.is_empty() {
            label.push_str(&format!("\n{}", flow.join(", ")));
        }
        if !inv.is_empty() {
            label.push_str(&format!("\n{}", inv.join(" && ")));
        }
        let shape = if k == ha.initial { ", peripheries=2" } else { "" };
        let _ = writeln!(out, "  \"{}\" [label=\"{}\"{shape}];", dot_escape(&loc.id), dot_escape(&label).replace('\n', "\\n"));
    }
    for e in &ha.edges {
        let guard: Vec<String> = e.guard.iter().map(|c| c.to_string()).collect();
        let mut label = format!("{}\n[{}]", e.label, guard.join(" && "));
        if !e.resets.is_empty() {
            label.push_str(&format!("\n{} := 0", e.resets.join(", ")));
        }
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"{}\"];",
            dot_escape(&ha.locations[e.source].id),
            dot_escape(&ha.locations[e.target].id),
            dot_escape(&label).replace('\n', "\\n")
        );
    }
    out.push_str("}\n");
    out
}

fn to_document(ha: &HybridAutomaton) -> Document {
    Document {
        schema: SCHEMA_VERSION.to_string(),
        variables: ha.variables.clone(),
        clocks: ha.clocks.clone(),
        labels: ha.labels.clone(),
        locations: ha
            .locations
            .iter()
            .map(|l| LocationDoc {
                id: l.id.clone(),
                flow: ha.variables.iter().cloned().zip(l.flow.iter().map(rational::format)).collect(),
                invariant: l.invariant.iter().map(constraint_doc).collect(),
            })
            .collect(),
        edges: ha
            .edges
            .iter()
            .map(|e| EdgeDoc {
                src: ha.locations[e.source].id.clone(),
                dst: ha.locations[e.target].id.clone(),
                label: e.label.clone(),
                guards: e.guard.iter().map(constraint_doc).collect(),
                resets: e.resets.clone(),
            })
            .collect(),
        init: InitDoc {
            location: ha.locations[ha.initial].id.clone(),
            valuation: ha.variables.iter().cloned().zip(ha.initial_valuation.iter().map(rational::format)).collect(),
        },
    }
}

/// DOT or the versioned JSON document (rationals as `"p/q"` strings).
pub fn export_ha(ha: &HybridAutomaton, format: HaFormat) -> String {
    match format {
        HaFormat::Dot => to_dot(ha),
        HaFormat::Structured => {
            serde_json::to_string_pretty(&to_document(ha)).expect("documents always serialise") + "\n"
        }
    }
}

/// Reads a structured document back.
pub fn import_ha(text: &str) -> Result<HybridAutomaton, HaError> {
    let doc: Document = serde_json::from_str(text).map_err(|e| HaError::Malformed(e.to_string()))?;
    if doc.schema != SCHEMA_VERSION {
        return Err(HaError::Malformed(format!("unsupported schema `{}`", doc.schema)));
    }
    let ordered = |pairs: Vec<(String, String)>, what: &str| -> Result<Vec<Rational>, HaError> {
        if pairs.len() != doc.variables.len() || pairs.iter().zip(&doc.variables).any(|((n, _), v)| n != v) {
            return Err(HaError::Malformed(format!("{what} must list every variable in order")));
        }
        pairs.iter().map(|(_, r)| number(r)).collect()
    };
    let ids: Vec<String> = doc.locations.iter().map(|l| l.id.clone()).collect();
    let find = |id: &str| {
        ids.iter().position(|l| l == id).ok_or_else(|| HaError::Malformed(format!("unknown location `{id}`")))
    };
    let mut locations = Vec::new();
    for l in doc.locations {
        locations.push(Location {
            flow: ordered(l.flow, &format!("flow of `{}`", l.id))?,
            invariant: l.invariant.into_iter().map(constraint_from).collect::<Result<_, _>>()?,
            id: l.id,
        });
    }
    let mut edges = Vec::new();
    for e in doc.edges {
        edges.push(Edge {
            source: find(&e.src)?,
            target: find(&e.dst)?,
            label: e.label,
            guard: e.guards.into_iter().map(constraint_from).collect::<Result<_, _>>()?,
            resets: e.resets,
        });
    }
    let ha = HybridAutomaton {
        initial: find(&doc.init.location)?,
        initial_valuation: ordered(doc.init.valuation, "initial valuation")?,
        variables: doc.variables,
        clocks: doc.clocks,
        labels: doc.labels,
        locations,
        edges,
    };
    ha.check()?;
    Ok(ha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ha::{ccpn_to_ha, translate};
    use crate::net::parse_model;

    #[test]
    fn single_location_dot() {
        let src = "class ccpn\nplace A continuous = 0\ntransition s continuous speed=1\narc s -> A\n";
        let dot = export_ha(&ccpn_to_ha(&parse_model(src).unwrap()).unwrap(), HaFormat::Dot);
        assert_eq!(dot.matches(" [label=").count(), 1);
        assert!(!dot.contains("->"));
    }

    #[test]
    fn tanks3_delem_round_trip_and_annotation() {
        let ha = translate(&parse_model(include_str!("../../../../models/tanks3_delem.model")).unwrap(), 100).unwrap();
        let doc = export_ha(&ha, HaFormat::Structured);
        let back = import_ha(&doc).unwrap();
        assert_eq!(back, ha);
        assert_eq!(export_ha(&back, HaFormat::Structured), doc);
        assert!(doc.contains(SCHEMA_VERSION));
        let dot = export_ha(&ha, HaFormat::Dot);
        let initial = dot.lines().find(|l| l.contains("peripheries=2")).unwrap();
        assert!(initial.contains("dm1/dt=-1"));
    }

    #[test]
    fn import_rejects_bad_documents() {
        assert!(matches!(import_ha("{}"), Err(HaError::Malformed(_))));
        let ha = ccpn_to_ha(&parse_model(include_str!("../../../../models/tanks3.model")).unwrap()).unwrap();
        let doc = export_ha(&ha, HaFormat::Structured).replace(SCHEMA_VERSION, "hpn-ha/0");
        assert!(matches!(import_ha(&doc), Err(HaError::Malformed(_))));
    }
}
