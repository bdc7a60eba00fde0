use std::fmt;

use num_traits::{Signed, Zero};

use super::{DiscreteTiming, HybridNet, NetClass, NodeKind, TransitionKind};
use crate::rational;

/// Structural rules a net must satisfy for its class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// D-elementary nets: no arc may connect a continuous place and a discrete transition.
    NoContinuousPlaceDiscreteTransitionArc,
    /// Hybrid nets: a discrete place touches a continuous transition only through a
    /// loop with `pre == post`.
    DiscretePlaceLoop,
    NonNegativeMarking,
    IntegerDiscreteMarking,
    /// Discrete place / discrete transition arcs carry whole tokens.
    IntegerDiscreteWeight,
    NonNegativeWeight,
    /// Speeds on continuous transitions, durations or intervals on discrete ones,
    /// as the net class requires.
    TimingMatchesClass,
    /// Continuous-only classes contain no discrete node.
    NodeKindMatchesClass,
    IntervalOrdered,
}

impl Rule {
    pub fn code(self) -> &'static str {
        match self {
            Rule::NoContinuousPlaceDiscreteTransitionArc => "no-cplace-dtransition-arc",
            Rule::DiscretePlaceLoop => "dplace-ctransition-loop",
            Rule::NonNegativeMarking => "non-negative-marking",
            Rule::IntegerDiscreteMarking => "integer-discrete-marking",
            Rule::IntegerDiscreteWeight => "integer-discrete-weight",
            Rule::NonNegativeWeight => "non-negative-weight",
            Rule::TimingMatchesClass => "timing-matches-class",
            Rule::NodeKindMatchesClass => "node-kind-matches-class",
            Rule::IntervalOrdered => "interval-ordered",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Rule::NoContinuousPlaceDiscreteTransitionArc => {
                "no arcs connect continuous places to discrete transitions in a D-elementary net"
            }
            Rule::DiscretePlaceLoop => {
                "an arc between a discrete place and a continuous transition must be matched by a return arc of equal weight"
            }
            Rule::NonNegativeMarking => "initial markings are non-negative",
            Rule::IntegerDiscreteMarking => "discrete places hold a whole number of tokens",
            Rule::IntegerDiscreteWeight => "arcs between discrete nodes carry whole tokens",
            Rule::NonNegativeWeight => "arc weights and speeds are non-negative",
            Rule::TimingMatchesClass => "transition timing matches the node kind and net class",
            Rule::NodeKindMatchesClass => "continuous net classes contain only continuous nodes",
            Rule::IntervalOrdered => "firing intervals satisfy earliest <= latest",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    /// Offending element, e.g. `P1 -> close1` or `P3`.
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {} ({})", self.rule.code(), self.subject, self.message, self.rule.description())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn cites(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    fn push(&mut self, rule: Rule, subject: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { rule, subject: subject.into(), message: message.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_structure(net: &HybridNet) -> ValidationReport {
    let mut report = ValidationReport::default();
    let class = net.class;

    for (i, place) in net.places.iter().enumerate() {
        let amount = &net.initial[i];
        if amount.is_negative() {
            report.push(
                Rule::NonNegativeMarking,
                &place.id,
                format!("initial marking {} is negative", rational::format(amount)),
            );
        }
        if place.kind == NodeKind::Discrete {
            if !amount.is_integer() {
                report.push(
                    Rule::IntegerDiscreteMarking,
                    &place.id,
                    format!("initial marking {} is not an integer", rational::format(amount)),
                );
            }
            if class.is_continuous_only() {
                report.push(Rule::NodeKindMatchesClass, &place.id, format!("discrete place in a {class} net"));
            }
        }
    }

    for t in &net.transitions {
        match &t.kind {
            TransitionKind::Continuous { max_speed } => match max_speed {
                None if class != NetClass::AutonomousContinuous => {
                    report.push(Rule::TimingMatchesClass, &t.id, format!("continuous transition without a speed in a {class} net"));
                }
                Some(v) if v.is_negative() => {
                    report.push(Rule::NonNegativeWeight, &t.id, "negative maximal speed");
                }
                _ => {}
            },
            TransitionKind::Discrete(timing) => {
                if class.is_continuous_only() {
                    report.push(Rule::NodeKindMatchesClass, &t.id, format!("discrete transition in a {class} net"));
                }
                match (class, timing) {
                    (NetClass::HybridTimed, DiscreteTiming::Interval(_)) => {
                        report.push(Rule::TimingMatchesClass, &t.id, "hybrid nets use fixed durations, found an interval");
                    }
                    (NetClass::DElementary, DiscreteTiming::Duration(_)) => {
                        report.push(Rule::TimingMatchesClass, &t.id, "D-elementary nets use firing intervals, found a duration");
                    }
                    _ => {}
                }
                match timing {
                    DiscreteTiming::Duration(d) if d.is_negative() => {
                        report.push(Rule::NonNegativeWeight, &t.id, "negative duration");
                    }
                    DiscreteTiming::Interval(interval) => {
                        if !interval.is_ordered() {
                            report.push(Rule::IntervalOrdered, &t.id, format!("interval {interval} has α > β"));
                        }
                        if interval.earliest.is_negative() {
                            report.push(Rule::NonNegativeWeight, &t.id, "negative interval bound");
                        }
                    }
                    _ => {}
                }
            }
        }
    }

    for (i, place) in net.places.iter().enumerate() {
        for (j, t) in net.transitions.iter().enumerate() {
            let pre = &net.pre[i][j];
            let post = &net.post[i][j];
            if pre.is_negative() || post.is_negative() {
                report.push(Rule::NonNegativeWeight, format!("{} / {}", place.id, t.id), "negative arc weight");
            }
            match (place.kind, t.node_kind()) {
                (NodeKind::Continuous, NodeKind::Discrete) if class == NetClass::DElementary => {
                    if !pre.is_zero() {
                        report.push(
                            Rule::NoContinuousPlaceDiscreteTransitionArc,
                            format!("{} -> {}", place.id, t.id),
                            format!("arc of weight {}", rational::format(pre)),
                        );
                    }
                    if !post.is_zero() {
                        report.push(
                            Rule::NoContinuousPlaceDiscreteTransitionArc,
                            format!("{} -> {}", t.id, place.id),
                            format!("arc of weight {}", rational::format(post)),
                        );
                    }
                }
                (NodeKind::Discrete, NodeKind::Continuous) if class.is_hybrid() => {
                    if pre != post {
                        report.push(
                            Rule::DiscretePlaceLoop,
                            format!("{} <-> {}", place.id, t.id),
                            format!(
                                "pre weight {} differs from post weight {}",
                                rational::format(pre),
                                rational::format(post)
                            ),
                        );
                    }
                }
                (NodeKind::Discrete, NodeKind::Discrete) => {
                    if !pre.is_integer() || !post.is_integer() {
                        report.push(
                            Rule::IntegerDiscreteWeight,
                            format!("{} / {}", place.id, t.id),
                            "fractional weight between discrete nodes",
                        );
                    }
                }
                _ => {}
            }
        }
    }
    report
}
