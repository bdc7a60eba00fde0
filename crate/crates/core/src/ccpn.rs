//! Constant-speed continuous Petri net semantics.
//!
//! A marking is abstracted by its macro-marking (which continuous places are
//! positive). For a fixed macro-marking the instantaneous speeds are constant,
//! so the trajectory is piecewise linear and every phase boundary is the exact
//! rational instant at which some place empties.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::net::{HybridNet, Marking, NetClass, NetError};
use crate::rational::{self, Rational};
use crate::trajectory::{Trajectory, TrajectoryPoint};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CcpnError {
    #[error("speed sharing did not converge; oscillating places: {}", .places.join(", "))]
    NonConvergence { places: Vec<String> },
    #[error("continuous transition `{0}` has no maximal speed")]
    MissingSpeed(String),
    #[error("a {0} net cannot be analysed as a continuous net")]
    NotContinuous(NetClass),
    #[error("horizon must be positive")]
    InvalidHorizon,
    #[error("more than {0} phases; aborting")]
    TooManyPhases(usize),
}

pub const MAX_PHASES: usize = 1_000_000;

/// Sign vector over the continuous places (declaration order): `true` = positive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MacroMarking(pub Vec<bool>);

impl MacroMarking {
    pub fn from_bits(bits: &str) -> Self {
        MacroMarking(bits.chars().map(|c| c == '1').collect())
    }

    pub fn positive_count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }
}

impl fmt::Display for MacroMarking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Componentwise `m_i > 0` over the net's continuous places.
pub fn macro_marking(net: &HybridNet, marking: &Marking) -> MacroMarking {
    MacroMarking(net.continuous_places().into_iter().map(|i| marking[i].is_positive()).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroEdge {
    pub from: usize,
    pub transition: String,
    pub to: usize,
}

/// Reachable macro-markings of an untimed continuous net.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroGraph {
    pub places: Vec<String>,
    pub nodes: Vec<MacroMarking>,
    pub edges: Vec<MacroEdge>,
}

/// Explores macro-markings from `macro(M0)`. A transition whose continuous
/// inputs are all positive may fire; firing makes its outputs positive and may
/// empty any subset of its inputs that are not also outputs.
pub fn macro_reachability_graph(net: &HybridNet) -> Result<MacroGraph, CcpnError> {
    if !net.class.is_continuous_only() {
        return Err(CcpnError::NotContinuous(net.class));
    }
    let places = net.continuous_places();
    let pos: HashMap<usize, usize> = places.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let start = macro_marking(net, &net.initial);
    let mut nodes = vec![start.clone()];
    let mut index: HashMap<MacroMarking, usize> = HashMap::from([(start, 0)]);
    let mut edges = Vec::new();
    let mut seen_edges = HashSet::new();
    let mut queue = VecDeque::from([0usize]);

    while let Some(current) = queue.pop_front() {
        let node = nodes[current].clone();
        for j in net.continuous_transitions() {
            let inputs: Vec<usize> = (0..net.places.len())
                .filter(|&i| net.pre[i][j].is_positive())
                .filter_map(|i| pos.get(&i).copied())
                .collect();
            let outputs: Vec<usize> = (0..net.places.len())
                .filter(|&i| net.post[i][j].is_positive())
                .filter_map(|i| pos.get(&i).copied())
                .collect();
            if !inputs.iter().all(|&k| node.0[k]) {
                continue;
            }
            let free: Vec<usize> = inputs.iter().copied().filter(|k| !outputs.contains(k)).collect();
            for subset in 0u64..(1u64 << free.len()) {
                let mut next = node.clone();
                for &k in &outputs {
                    next.0[k] = true;
                }
                for (bit, &k) in free.iter().enumerate() {
                    if subset & (1 << bit) != 0 {
                        next.0[k] = false;
                    }
                }
                let target = match index.get(&next) {
                    Some(&t) => t,
                    None => {
                        nodes.push(next.clone());
                        index.insert(next, nodes.len() - 1);
                        queue.push_back(nodes.len() - 1);
                        nodes.len() - 1
                    }
                };
                if seen_edges.insert((current, j, target)) {
                    edges.push(MacroEdge { from: current, transition: net.transitions[j].id.clone(), to: target });
                }
            }
        }
    }
    Ok(MacroGraph {
        places: places.iter().map(|&i| net.places[i].id.clone()).collect(),
        nodes,
        edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Enabling {
    Strong,
    Weak,
}

/// Strong iff every continuous input place is positive (vacuously for sources).
pub fn enabling_state(net: &HybridNet, marking: &Marking, transition: &str) -> Result<Enabling, NetError> {
    let j = net
        .transition_index(transition)
        .ok_or_else(|| NetError::UnknownTransition(transition.to_string()))?;
    let weak = net
        .continuous_places()
        .into_iter()
        .any(|i| net.pre[i][j].is_positive() && !marking[i].is_positive());
    Ok(if weak { Enabling::Weak } else { Enabling::Strong })
}

/// Instantaneous speeds indexed like `HybridNet::continuous_transitions()`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpeedVector(pub Vec<Rational>);

/// Continuous part of a net: its continuous places and transitions, plus the
/// speed-sharing rule. Shared by the CCPN, hybrid and translation code.
#[derive(Debug, Clone)]
pub(crate) struct FlowModel<'a> {
    pub net: &'a HybridNet,
    pub places: Vec<usize>,
    pub transitions: Vec<usize>,
}

/// Dynamics of one phase: effective sign vector, speeds, and `dm/dt` over the
/// continuous places.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct FlowState {
    pub sign: Vec<bool>,
    pub speeds: Vec<Rational>,
    pub derivative: Vec<Rational>,
}

impl<'a> FlowModel<'a> {
    pub fn new(net: &'a HybridNet) -> Self {
        FlowModel { net, places: net.continuous_places(), transitions: net.continuous_transitions() }
    }

    pub fn all_active(&self) -> Vec<bool> {
        vec![true; self.transitions.len()]
    }

    fn max_speed(&self, k: usize) -> Result<Rational, CcpnError> {
        let t = &self.net.transitions[self.transitions[k]];
        t.max_speed().cloned().ok_or_else(|| CcpnError::MissingSpeed(t.id.clone()))
    }

    fn pre(&self, p: usize, k: usize) -> &Rational {
        &self.net.pre[self.places[p]][self.transitions[k]]
    }

    fn post(&self, p: usize, k: usize) -> &Rational {
        &self.net.post[self.places[p]][self.transitions[k]]
    }

    fn flows(&self, p: usize, speeds: &[Rational]) -> (Rational, Rational) {
        let mut inflow = Rational::zero();
        let mut outflow = Rational::zero();
        for (k, v) in speeds.iter().enumerate() {
            inflow += self.post(p, k) * v;
            outflow += self.pre(p, k) * v;
        }
        (inflow, outflow)
    }

    /// Proportional sharing: start from `V_j` for active transitions, then, for
    /// every empty place whose outflow exceeds its inflow, scale its output
    /// transitions by `inflow / outflow`; repeat until nothing changes.
    pub fn speeds(&self, sign: &[bool], active: &[bool]) -> Result<Vec<Rational>, CcpnError> {
        let mut speeds = Vec::with_capacity(self.transitions.len());
        for k in 0..self.transitions.len() {
            speeds.push(if active[k] { self.max_speed(k)? } else { Rational::zero() });
        }
        let n = self.places.len() as u32;
        let bound = 2u64.saturating_pow(n.min(40)).saturating_mul(self.transitions.len() as u64).max(1);
        for _ in 0..bound {
            let mut changed = false;
            for p in (0..self.places.len()).filter(|&p| !sign[p]) {
                let (inflow, outflow) = self.flows(p, &speeds);
                if outflow > inflow {
                    let factor = &inflow / &outflow;
                    for (k, v) in speeds.iter_mut().enumerate() {
                        if self.pre(p, k).is_positive() {
                            *v *= &factor;
                        }
                    }
                    changed = true;
                }
            }
            if !changed {
                return Ok(speeds);
            }
        }
        let places = (0..self.places.len())
            .filter(|&p| !sign[p])
            .filter(|&p| {
                let (inflow, outflow) = self.flows(p, &speeds);
                outflow > inflow
            })
            .map(|p| self.net.places[self.places[p]].id.clone())
            .collect();
        Err(CcpnError::NonConvergence { places })
    }

    /// `W · v` restricted to the continuous places.
    pub fn derivative(&self, speeds: &[Rational]) -> Vec<Rational> {
        (0..self.places.len())
            .map(|p| {
                let (inflow, outflow) = self.flows(p, speeds);
                inflow - outflow
            })
            .collect()
    }

    fn evaluate(&self, sign: Vec<bool>, active: &[bool]) -> Result<FlowState, CcpnError> {
        let speeds = self.speeds(&sign, active)?;
        let derivative = self.derivative(&speeds);
        Ok(FlowState { sign, speeds, derivative })
    }

    /// Effective sign vector of a phase: an empty place whose inflow exceeds its
    /// outflow is positive right after the instant, so it is promoted before the
    /// phase dynamics are fixed. A promotion that would make the place drain
    /// again is reverted and the place stays empty.
    pub fn normalize(&self, sign: Vec<bool>, active: &[bool]) -> Result<FlowState, CcpnError> {
        let mut pinned = vec![false; self.places.len()];
        let mut state = self.evaluate(sign, active)?;
        for _ in 0..=self.places.len() {
            let promote: Vec<usize> = (0..self.places.len())
                .filter(|&p| !state.sign[p] && !pinned[p] && state.derivative[p].is_positive())
                .collect();
            if promote.is_empty() {
                return Ok(state);
            }
            let mut sign = state.sign.clone();
            for &p in &promote {
                sign[p] = true;
            }
            let promoted = self.evaluate(sign, active)?;
            let reverted: Vec<usize> =
                promote.iter().copied().filter(|&p| promoted.derivative[p].is_negative()).collect();
            if reverted.is_empty() {
                state = promoted;
            } else {
                let mut sign = promoted.sign;
                for p in reverted {
                    sign[p] = false;
                    pinned[p] = true;
                }
                state = self.evaluate(sign, active)?;
            }
        }
        Ok(state)
    }

    /// Sign vector of the actual marking (continuous places only).
    pub fn sign_of(&self, marking: &Marking) -> Vec<bool> {
        self.places.iter().map(|&i| marking[i].is_positive()).collect()
    }

    /// Processes zero crossings at an instant: while some place that the
    /// current phase treats as positive is empty and not filling, move it to the
    /// empty set and renormalise. Returns the emptied places in processing order.
    pub fn settle(
        &self,
        mut state: FlowState,
        marking: &Marking,
        active: &[bool],
    ) -> Result<(FlowState, Vec<usize>), CcpnError> {
        let mut emptied = Vec::new();
        for _ in 0..=self.places.len() {
            let next = (0..self.places.len()).find(|&p| {
                state.sign[p] && marking[self.places[p]].is_zero() && !state.derivative[p].is_positive()
            });
            let Some(p) = next else { break };
            let mut sign = state.sign.clone();
            sign[p] = false;
            state = self.normalize(sign, active)?;
            emptied.push(p);
        }
        Ok((state, emptied))
    }

    /// Earliest instant at which a positive, draining place empties.
    pub fn next_zero(&self, marking: &Marking, state: &FlowState) -> ZeroEvent {
        let values: Vec<Rational> = self.places.iter().map(|&i| marking[i].clone()).collect();
        next_zero_event(&values, &state.derivative)
    }
}

/// Speeds for a macro-marking with every continuous transition active.
pub fn compute_speeds(net: &HybridNet, macro_marking: &MacroMarking) -> Result<SpeedVector, CcpnError> {
    let model = FlowModel::new(net);
    model.speeds(&macro_marking.0, &model.all_active()).map(SpeedVector)
}

/// Exact `W·v` over the continuous places.
pub fn marking_derivative(net: &HybridNet, speeds: &SpeedVector) -> Vec<Rational> {
    FlowModel::new(net).derivative(&speeds.0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroEvent {
    /// `None` when no place ever empties.
    pub delay: Option<Rational>,
    /// Every index attaining the minimum.
    pub places: Vec<usize>,
}

/// `Δt = min { m_i / -ṁ_i : m_i > 0, ṁ_i < 0 }`.
pub fn next_zero_event(marking: &[Rational], derivative: &[Rational]) -> ZeroEvent {
    let mut best: Option<Rational> = None;
    let mut places = Vec::new();
    for (i, (m, d)) in marking.iter().zip(derivative).enumerate() {
        if !m.is_positive() || !d.is_negative() {
            continue;
        }
        let dt = m / -d;
        match &best {
            Some(b) if &dt > b => {}
            Some(b) if &dt == b => places.push(i),
            _ => {
                best = Some(dt);
                places = vec![i];
            }
        }
    }
    ZeroEvent { delay: best, places }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Terminal {
    SteadyState,
    HorizonReached,
    /// A (macro-marking, speeds) pair repeated under an unbounded horizon.
    Cycle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phase {
    pub macro_marking: MacroMarking,
    pub speeds: SpeedVector,
    pub derivative: Vec<Rational>,
    pub start: Rational,
    /// `None` is an unbounded (steady-state) phase.
    pub duration: Option<Rational>,
    /// Continuous place ids whose marking becomes nil at the end of the phase.
    pub exit_event: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvolutionGraph {
    pub places: Vec<String>,
    pub transitions: Vec<String>,
    pub phases: Vec<Phase>,
    pub terminal: Terminal,
}

fn run_phases(
    net: &HybridNet,
    horizon: Option<&Rational>,
) -> Result<(EvolutionGraph, Vec<TrajectoryPoint>), CcpnError> {
    if !matches!(net.class, NetClass::Ccpn) {
        return Err(CcpnError::NotContinuous(net.class));
    }
    if horizon.is_some_and(|h| !h.is_positive()) {
        return Err(CcpnError::InvalidHorizon);
    }
    let model = FlowModel::new(net);
    let active = model.all_active();
    let mut marking = net.initial.clone();
    let mut now = Rational::zero();
    let (mut state, _) = model.settle(model.normalize(model.sign_of(&marking), &active)?, &marking, &active)?;
    let mut phases = Vec::new();
    let mut points = vec![TrajectoryPoint { time: now.clone(), marking: marking.clone() }];
    let mut seen = HashSet::new();
    let place_id = |p: usize| net.places[model.places[p]].id.clone();

    let terminal = loop {
        if phases.len() >= MAX_PHASES {
            return Err(CcpnError::TooManyPhases(MAX_PHASES));
        }
        seen.insert((state.sign.clone(), state.speeds.clone()));
        let event = model.next_zero(&marking, &state);
        let until_horizon = horizon.map(|h| h - &now);
        let mut phase = Phase {
            macro_marking: MacroMarking(state.sign.clone()),
            speeds: SpeedVector(state.speeds.clone()),
            derivative: state.derivative.clone(),
            start: now.clone(),
            duration: None,
            exit_event: Vec::new(),
        };
        let Some(dt) = event.delay else {
            if let Some(rest) = until_horizon {
                advance(&model, &mut marking, &state, &rest);
                points.push(TrajectoryPoint { time: now + rest, marking: marking.clone() });
            }
            phases.push(phase);
            break Terminal::SteadyState;
        };
        if let Some(rest) = until_horizon.filter(|rest| &dt >= rest) {
            advance(&model, &mut marking, &state, &rest);
            now += &rest;
            points.push(TrajectoryPoint { time: now.clone(), marking: marking.clone() });
            phase.duration = Some(rest);
            phases.push(phase);
            break Terminal::HorizonReached;
        }
        advance(&model, &mut marking, &state, &dt);
        now += &dt;
        phase.duration = Some(dt);
        phase.exit_event = event.places.iter().map(|&p| place_id(p)).collect();
        phases.push(phase);
        points.push(TrajectoryPoint { time: now.clone(), marking: marking.clone() });
        state = model.settle(state, &marking, &active)?.0;
        if horizon.is_none() && seen.contains(&(state.sign.clone(), state.speeds.clone())) {
            break Terminal::Cycle;
        }
    };

    let graph = EvolutionGraph {
        places: model.places.iter().map(|&i| net.places[i].id.clone()).collect(),
        transitions: model.transitions.iter().map(|&j| net.transitions[j].id.clone()).collect(),
        phases,
        terminal,
    };
    Ok((graph, points))
}

fn advance(model: &FlowModel<'_>, marking: &mut Marking, state: &FlowState, dt: &Rational) {
    for (p, &i) in model.places.iter().enumerate() {
        marking[i] += &state.derivative[p] * dt;
    }
}

/// Phases of a CCPN run from `M0`; `horizon == None` runs to steady state.
pub fn evolution_graph(net: &HybridNet, horizon: Option<&Rational>) -> Result<EvolutionGraph, CcpnError> {
    run_phases(net, horizon).map(|(graph, _)| graph)
}

/// Breakpoints at `t = 0`, every phase boundary, and the horizon.
pub fn simulate_ccpn(net: &HybridNet, horizon: &Rational) -> Result<Trajectory, CcpnError> {
    let (_, points) = run_phases(net, Some(horizon))?;
    Ok(Trajectory { places: net.places.iter().map(|p| p.id.clone()).collect(), points })
}

fn tuple(values: &[Rational]) -> String {
    let parts: Vec<String> = values.iter().map(rational::format).collect();
    format!("({})", parts.join(","))
}

impl EvolutionGraph {
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph evolution {\n  rankdir=TB;\n  node [shape=box];\n");
        for (k, phase) in self.phases.iter().enumerate() {
            let duration = rational::format_extended(phase.duration.as_ref());
            out.push_str(&format!(
                "  phase{k} [label=\"v = {}\\ndm/dt = {}\\nm* = {}\\nt0 = {}, d = {}\"];\n",
                tuple(&phase.speeds.0),
                tuple(&phase.derivative),
                phase.macro_marking,
                rational::format(&phase.start),
                duration
            ));
        }
        for (k, pair) in self.phases.windows(2).enumerate() {
            let event: Vec<String> = pair[0].exit_event.iter().map(|p| format!("m({p}) = 0")).collect();
            out.push_str(&format!(
                "  phase{k} -> phase{} [label=\"{} / {}\"];\n",
                k + 1,
                event.join(", "),
                rational::format_extended(pair[0].duration.as_ref())
            ));
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let phases: Vec<serde_json::Value> = self
            .phases
            .iter()
            .map(|phase| {
                serde_json::json!({
                    "macro_marking": phase.macro_marking.to_string(),
                    "speeds": phase.speeds.0.iter().map(rational::format).collect::<Vec<_>>(),
                    "derivative": phase.derivative.iter().map(rational::format).collect::<Vec<_>>(),
                    "start": rational::format(&phase.start),
                    "duration": rational::format_extended(phase.duration.as_ref()),
                    "event": phase.exit_event,
                })
            })
            .collect();
        serde_json::json!({
            "version": "hpn-evolution/1",
            "places": self.places,
            "transitions": self.transitions,
            "terminal": self.terminal,
            "phases": phases,
        })
    }
}

impl MacroGraph {
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph macro_markings {\n");
        for (k, node) in self.nodes.iter().enumerate() {
            out.push_str(&format!("  m{k} [label=\"{node}\"];\n"));
        }
        for e in &self.edges {
            out.push_str(&format!("  m{} -> m{} [label=\"{}\"];\n", e.from, e.to, e.transition));
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "version": "hpn-macro-graph/1",
            "places": self.places,
            "nodes": self.nodes.iter().map(|n| n.to_string()).collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|e| serde_json::json!({
                "from": e.from, "transition": e.transition, "to": e.to
            })).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::parse_model;
    use crate::rational::int;

    fn tanks3() -> HybridNet {
        parse_model(include_str!("../../../models/tanks3.model")).unwrap()
    }

    fn ints(values: &[i64]) -> Vec<Rational> {
        values.iter().map(|&v| int(v)).collect()
    }

    #[test]
    fn macro_marking_examples() {
        let net = tanks3();
        assert_eq!(macro_marking(&net, &Marking(ints(&[25, 10, 5]))).to_string(), "111");
        assert_eq!(macro_marking(&net, &Marking(ints(&[15, 0, 95]))).to_string(), "101");
        assert_eq!(macro_marking(&net, &Marking(ints(&[0, 0, 0]))).to_string(), "000");
    }

    #[test]
    fn enabling_examples() {
        let net = tanks3();
        let m0 = net.initial.clone();
        for t in ["T1", "T2", "T3", "T4"] {
            assert_eq!(enabling_state(&net, &m0, t).unwrap(), Enabling::Strong);
        }
        let m = Marking(ints(&[15, 0, 95]));
        assert_eq!(enabling_state(&net, &m, "T4").unwrap(), Enabling::Weak);
        assert_eq!(enabling_state(&net, &Marking(ints(&[0, 0, 0])), "T1").unwrap(), Enabling::Strong);
    }

    #[test]
    fn speeds_for_each_tanks3_phase() {
        let net = tanks3();
        let cases = [("111", [2, 5, 3, 6]), ("101", [2, 5, 3, 5]), ("001", [2, 5, 2, 5])];
        for (bits, want) in cases {
            let v = compute_speeds(&net, &MacroMarking::from_bits(bits)).unwrap();
            assert_eq!(v.0, ints(&want), "macro {bits}");
        }
    }

    #[test]
    fn derivative_examples() {
        let net = tanks3();
        assert_eq!(marking_derivative(&net, &SpeedVector(ints(&[2, 5, 3, 6]))), ints(&[-1, -1, 9]));
        assert_eq!(marking_derivative(&net, &SpeedVector(ints(&[2, 5, 3, 5]))), ints(&[-1, 0, 8]));
        assert_eq!(marking_derivative(&net, &SpeedVector(ints(&[0, 0, 0, 0]))), ints(&[0, 0, 0]));
    }

    #[test]
    fn zero_event_examples() {
        let e = next_zero_event(&ints(&[25, 10, 5]), &ints(&[-1, -1, 9]));
        assert_eq!(e, ZeroEvent { delay: Some(int(10)), places: vec![1] });
        let e = next_zero_event(&ints(&[15, 0, 95]), &ints(&[-1, 0, 8]));
        assert_eq!(e, ZeroEvent { delay: Some(int(15)), places: vec![0] });
        let e = next_zero_event(&ints(&[1, 2]), &ints(&[0, 3]));
        assert_eq!(e, ZeroEvent { delay: None, places: vec![] });
        let e = next_zero_event(&ints(&[2, 4]), &ints(&[-1, -2]));
        assert_eq!(e.places, vec![0, 1]);
    }

    #[test]
    fn tanks3_evolution_graph() {
        let g = evolution_graph(&tanks3(), None).unwrap();
        assert_eq!(g.phases.len(), 3);
        assert_eq!(g.terminal, Terminal::SteadyState);
        let durations: Vec<_> = g.phases.iter().map(|p| p.duration.clone()).collect();
        assert_eq!(durations, vec![Some(int(10)), Some(int(15)), None]);
        assert_eq!(g.phases[0].exit_event, vec!["P2"]);
        assert_eq!(g.phases[1].exit_event, vec!["P1"]);
        assert_eq!(g.phases[2].derivative, ints(&[0, 0, 7]));
    }

    #[test]
    fn horizon_truncates_first_phase() {
        let g = evolution_graph(&tanks3(), Some(&int(5))).unwrap();
        assert_eq!(g.phases.len(), 1);
        assert_eq!(g.phases[0].duration, Some(int(5)));
        assert_eq!(g.terminal, Terminal::HorizonReached);
    }

    #[test]
    fn sources_only_is_one_steady_phase() {
        let net = parse_model("class ccpn\nplace P continuous = 0\ntransition T continuous speed=1\narc T -> P\n").unwrap();
        let g = evolution_graph(&net, None).unwrap();
        assert_eq!(g.phases.len(), 1);
        assert_eq!(g.phases[0].duration, None);
    }

    #[test]
    fn trajectory_checkpoints() {
        let traj = simulate_ccpn(&tanks3(), &int(40)).unwrap();
        assert_eq!(traj.at(&int(10)).unwrap().0, ints(&[15, 0, 95]));
        assert_eq!(traj.at(&int(25)).unwrap().0, ints(&[0, 0, 215]));
        assert_eq!(traj.at(&int(40)).unwrap().0, ints(&[0, 0, 320]));
        let times: Vec<_> = traj.points.iter().map(|p| p.time.clone()).collect();
        assert_eq!(times, ints(&[0, 10, 25, 40]));
    }

    #[test]
    fn cyclic_zero_places_do_not_converge() {
        // an empty place that returns half of what it consumes: the share halves forever
        let src = "class ccpn\nplace A continuous = 0\ntransition T continuous speed=1\n\
                   arc A -> T weight=2\narc T -> A\n";
        let net = parse_model(src).unwrap();
        let err = compute_speeds(&net, &MacroMarking::from_bits("0")).unwrap_err();
        assert!(matches!(err, CcpnError::NonConvergence { .. }), "{err:?}");
    }

    #[test]
    fn zero_place_with_surplus_is_promoted() {
        let src = "class ccpn\nplace A continuous = 0\ntransition In continuous speed=3\n\
                   transition Out continuous speed=1\narc In -> A\narc A -> Out\n";
        let net = parse_model(src).unwrap();
        let g = evolution_graph(&net, None).unwrap();
        assert_eq!(g.phases.len(), 1);
        assert_eq!(g.phases[0].macro_marking.to_string(), "1");
        assert_eq!(g.phases[0].derivative, ints(&[2]));
    }

    #[test]
    fn macro_graph_rejects_hybrid_nets() {
        let net = parse_model("place P discrete = 1\ntransition D discrete duration=1\narc P -> D\n").unwrap();
        assert_eq!(macro_reachability_graph(&net), Err(CcpnError::NotContinuous(NetClass::HybridTimed)));
    }

    #[test]
    fn dot_uses_phase_notation() {
        let dot = evolution_graph(&tanks3(), None).unwrap().to_dot();
        assert!(dot.contains("v = (2,5,3,6)"));
        assert!(dot.contains("m(P2) = 0 / 10"));
    }
}
