use std::collections::{HashMap, VecDeque};

use num_traits::Signed;

use super::{clock_name, zero_label, Edge, HaError, HybridAutomaton, LinearConstraint, Location, Relation, TimedAutomaton};
use crate::ccpn::{FlowModel, FlowState, MacroMarking};
use crate::hybrid::active_configuration;
use crate::net::{HybridNet, Marking, NetClass};
use crate::rational::Rational;

/// Time Petri net made of the discrete places and transitions; loop arcs to
/// continuous transitions disappear with them.
pub fn extract_discrete_part(net: &HybridNet) -> HybridNet {
    let places = net.discrete_places();
    let transitions = net.discrete_transitions();
    let mut tpn = HybridNet::new(
        NetClass::DElementary,
        places.iter().map(|&i| net.places[i].clone()).collect(),
        transitions.iter().map(|&j| net.transitions[j].clone()).collect(),
    );
    for (a, &i) in places.iter().enumerate() {
        for (b, &j) in transitions.iter().enumerate() {
            tpn.pre[a][b] = net.pre[i][j].clone();
            tpn.post[a][b] = net.post[i][j].clone();
        }
        tpn.initial[a] = net.initial[i].clone();
    }
    tpn
}

fn enabled_in(tpn: &HybridNet, marking: &[Rational], j: usize) -> bool {
    (0..tpn.places.len()).all(|i| marking[i] >= tpn.pre[i][j])
}

/// Breadth-first marking graph with one clock per transition. A clock is reset
/// when its transition is newly enabled by the edge, the fired transition
/// included.
pub fn timepn_to_timed_automaton(tpn: &HybridNet, marking_cap: usize) -> Result<TimedAutomaton, HaError> {
    let n_t = tpn.transitions.len();
    let labels: Vec<String> = tpn.transitions.iter().map(|t| t.id.clone()).collect();
    let clocks: Vec<String> = labels.iter().map(|l| clock_name(l)).collect();
    let intervals: Vec<_> = tpn.transitions.iter().map(|t| t.interval().expect("time net")).collect();

    let mut index: HashMap<Vec<Rational>, usize> = HashMap::new();
    let mut markings: Vec<Vec<Rational>> = vec![tpn.initial.0.clone()];
    index.insert(tpn.initial.0.clone(), 0);
    let mut queue = VecDeque::from([0usize]);
    let mut edges = Vec::new();
    if marking_cap == 0 {
        return Err(HaError::MarkingCapExceeded { cap: marking_cap });
    }

    while let Some(q) = queue.pop_front() {
        let m = markings[q].clone();
        for j in (0..n_t).filter(|&j| enabled_in(tpn, &m, j)) {
            let intermediate: Vec<Rational> = (0..m.len()).map(|i| &m[i] - &tpn.pre[i][j]).collect();
            let next: Vec<Rational> = (0..m.len()).map(|i| &intermediate[i] + &tpn.post[i][j]).collect();
            let resets = (0..n_t)
                .filter(|&k| enabled_in(tpn, &next, k) && (k == j || !enabled_in(tpn, &intermediate, k)))
                .map(|k| clocks[k].clone())
                .collect();
            let target = match index.get(&next) {
                Some(&t) => t,
                None => {
                    if markings.len() >= marking_cap {
                        return Err(HaError::MarkingCapExceeded { cap: marking_cap });
                    }
                    markings.push(next.clone());
                    index.insert(next, markings.len() - 1);
                    queue.push_back(markings.len() - 1);
                    markings.len() - 1
                }
            };
            edges.push(Edge {
                source: q,
                target,
                label: labels[j].clone(),
                guard: vec![LinearConstraint::atom(&clocks[j], Relation::Ge, intervals[j].earliest.clone())],
                resets,
            });
        }
    }

    let locations = markings
        .iter()
        .enumerate()
        .map(|(q, m)| Location {
            id: format!("S{q}"),
            flow: Vec::new(),
            invariant: (0..n_t)
                .filter(|&k| enabled_in(tpn, m, k))
                .filter_map(|k| {
                    intervals[k].latest.as_ref().map(|b| LinearConstraint::atom(&clocks[k], Relation::Le, b.clone()))
                })
                .collect(),
        })
        .collect();

    Ok(TimedAutomaton {
        automaton: HybridAutomaton {
            variables: Vec::new(),
            clocks,
            labels,
            locations,
            edges,
            initial: 0,
            initial_valuation: Vec::new(),
        },
        places: tpn.places.iter().map(|p| p.id.clone()).collect(),
        markings: markings.into_iter().map(Marking).collect(),
    })
}

/// CCPN over the continuous places holding the continuous transitions active
/// under `d_marking` (given over the net's discrete places, in order).
pub fn ccpn_configuration(net: &HybridNet, d_marking: &Marking) -> HybridNet {
    let mut full = net.initial.clone();
    for (k, &i) in net.discrete_places().iter().enumerate() {
        full[i] = d_marking[k].clone();
    }
    let active = active_configuration(net, &full);
    let places = net.continuous_places();
    let transitions: Vec<usize> =
        net.continuous_transitions().into_iter().zip(active).filter_map(|(j, a)| a.then_some(j)).collect();
    let mut ccpn = HybridNet::new(
        NetClass::Ccpn,
        places.iter().map(|&i| net.places[i].clone()).collect(),
        transitions.iter().map(|&j| net.transitions[j].clone()).collect(),
    );
    for (a, &i) in places.iter().enumerate() {
        for (b, &j) in transitions.iter().enumerate() {
            ccpn.pre[a][b] = net.pre[i][j].clone();
            ccpn.post[a][b] = net.post[i][j].clone();
        }
        ccpn.initial[a] = net.initial[i].clone();
    }
    ccpn
}

/// Inner automaton of one macro-location, generated on demand: every sign
/// vector maps to its normalised phase.
#[derive(Debug, Clone)]
pub struct InnerAutomaton {
    pub ccpn: HybridNet,
}

impl InnerAutomaton {
    pub fn new(ccpn: HybridNet) -> Self {
        InnerAutomaton { ccpn }
    }

    pub(crate) fn locate(&self, sign: Vec<bool>) -> Result<FlowState, HaError> {
        let model = FlowModel::new(&self.ccpn);
        Ok(model.normalize(sign, &model.all_active())?)
    }

    pub(crate) fn initial_sign(&self, valuation: &[Rational]) -> Vec<bool> {
        valuation.iter().map(|v| v.is_positive()).collect()
    }

    /// `(place, target sign)` for every positive place that is not filling.
    pub(crate) fn zero_edges(&self, state: &FlowState) -> Result<Vec<(usize, FlowState)>, HaError> {
        let mut out = Vec::new();
        for p in 0..state.sign.len() {
            if state.sign[p] && !state.derivative[p].is_positive() {
                let mut sign = state.sign.clone();
                sign[p] = false;
                out.push((p, self.locate(sign)?));
            }
        }
        Ok(out)
    }
}

fn bits(sign: &[bool]) -> String {
    MacroMarking(sign.to_vec()).to_string()
}

fn positivity(variables: &[String], sign: &[bool]) -> Vec<LinearConstraint> {
    variables
        .iter()
        .zip(sign)
        .filter(|(_, s)| **s)
        .map(|(v, _)| LinearConstraint::atom(v, Relation::Ge, Rational::from_integer(0.into())))
        .collect()
}

fn variable_names(ccpn: &HybridNet) -> Vec<String> {
    ccpn.places.iter().map(|p| p.id.clone()).collect()
}

/// Macro-marking automaton of a CCPN, reachable from its initial marking.
/// Location ids are the sign vectors as bit strings.
pub fn ccpn_to_ha(ccpn: &HybridNet) -> Result<HybridAutomaton, HaError> {
    if ccpn.class != NetClass::Ccpn {
        return Err(HaError::NotTranslatable(ccpn.class));
    }
    let inner = InnerAutomaton::new(ccpn.clone());
    let variables = variable_names(ccpn);
    let start = inner.locate(inner.initial_sign(&ccpn.initial.0))?;
    let mut index: HashMap<Vec<bool>, usize> = HashMap::from([(start.sign.clone(), 0)]);
    let mut states = vec![start];
    let mut edges = Vec::new();
    let mut k = 0;
    while k < states.len() {
        for (p, target) in inner.zero_edges(&states[k].clone())? {
            let t = *index.entry(target.sign.clone()).or_insert_with(|| {
                states.push(target);
                states.len() - 1
            });
            edges.push(zero_edge(&variables, k, t, p));
        }
        k += 1;
    }
    Ok(HybridAutomaton {
        locations: states
            .iter()
            .map(|s| Location {
                id: bits(&s.sign),
                flow: s.derivative.clone(),
                invariant: positivity(&variables, &s.sign),
            })
            .collect(),
        variables,
        clocks: Vec::new(),
        labels: Vec::new(),
        edges,
        initial: 0,
        initial_valuation: ccpn.initial.0.clone(),
    })
}

fn zero_edge(variables: &[String], source: usize, target: usize, place: usize) -> Edge {
    Edge {
        source,
        target,
        label: zero_label(&variables[place]),
        guard: vec![LinearConstraint::atom(&variables[place], Relation::Eq, Rational::from_integer(0.into()))],
        resets: Vec::new(),
    }
}

/// Product of the timed automaton with its inner automata, reachable part
/// only. A discrete edge keeps the sign vector and lets the target
/// configuration normalise it.
pub fn flatten(
    ta: &TimedAutomaton,
    inner: &[InnerAutomaton],
    initial_valuation: &[Rational],
) -> Result<HybridAutomaton, HaError> {
    let timed = &ta.automaton;
    if inner.len() != timed.locations.len() {
        return Err(HaError::Malformed("one inner automaton per timed location is required".into()));
    }
    let variables = inner.first().map(|i| variable_names(&i.ccpn)).unwrap_or_default();
    let name = |q: usize, sign: &[bool]| {
        if variables.is_empty() {
            timed.locations[q].id.clone()
        } else {
            format!("{}.{}", timed.locations[q].id, bits(sign))
        }
    };

    let q0 = timed.initial;
    let start = inner[q0].locate(inner[q0].initial_sign(initial_valuation))?;
    let mut index: HashMap<(usize, Vec<bool>), usize> = HashMap::from([((q0, start.sign.clone()), 0)]);
    let mut nodes: Vec<(usize, FlowState)> = vec![(q0, start)];
    let mut edges = Vec::new();
    let mut k = 0;
    while k < nodes.len() {
        let (q, state) = nodes[k].clone();
        let mut targets: Vec<(usize, FlowState, Option<&Edge>, Option<usize>)> = Vec::new();
        for (p, target) in inner[q].zero_edges(&state)? {
            targets.push((q, target, None, Some(p)));
        }
        for (_, e) in timed.outgoing(q) {
            targets.push((e.target, inner[e.target].locate(state.sign.clone())?, Some(e), None));
        }
        for (q2, target, ta_edge, place) in targets {
            let key = (q2, target.sign.clone());
            let t = match index.get(&key) {
                Some(&t) => t,
                None => {
                    nodes.push((q2, target));
                    index.insert(key, nodes.len() - 1);
                    nodes.len() - 1
                }
            };
            edges.push(match (ta_edge, place) {
                (Some(e), _) => Edge { source: k, target: t, ..e.clone() },
                (None, Some(p)) => zero_edge(&variables, k, t, p),
                (None, None) => unreachable!("every flat edge comes from a zero crossing or a timed edge"),
            });
        }
        k += 1;
    }

    let locations = nodes
        .iter()
        .map(|(q, s)| {
            let mut invariant = timed.locations[*q].invariant.clone();
            invariant.extend(positivity(&variables, &s.sign));
            Location { id: name(*q, &s.sign), flow: s.derivative.clone(), invariant }
        })
        .collect();
    Ok(HybridAutomaton {
        variables,
        clocks: timed.clocks.clone(),
        labels: timed.labels.clone(),
        locations,
        edges,
        initial: 0,
        initial_valuation: initial_valuation.to_vec(),
    })
}

/// Intermediate products of a translation, for reporting.
#[derive(Debug, Clone)]
pub struct Translation {
    pub timed: TimedAutomaton,
    pub automaton: HybridAutomaton,
    /// Number of continuous places.
    pub continuous_places: usize,
}

impl Translation {
    /// `n · 2^m` with `n` timed locations and `m` continuous places.
    pub fn location_bound(&self) -> u128 {
        (self.timed.automaton.locations.len() as u128) << self.continuous_places.min(100)
    }
}

pub fn translate_detailed(net: &HybridNet, marking_cap: usize) -> Result<Translation, HaError> {
    if !matches!(net.class, NetClass::DElementary | NetClass::Ccpn) {
        return Err(HaError::NotTranslatable(net.class));
    }
    let tpn = extract_discrete_part(net);
    let timed = timepn_to_timed_automaton(&tpn, marking_cap)?;
    let continuous = net.continuous_places();
    let valuation: Vec<Rational> = continuous.iter().map(|&i| net.initial[i].clone()).collect();
    let automaton = if tpn.transitions.is_empty() && tpn.places.is_empty() {
        ccpn_to_ha(&ccpn_configuration(net, &Marking(Vec::new())))?
    } else {
        let inner: Vec<InnerAutomaton> =
            timed.markings.iter().map(|m| InnerAutomaton::new(ccpn_configuration(net, m))).collect();
        flatten(&timed, &inner, &valuation)?
    };
    Ok(Translation { timed, automaton, continuous_places: continuous.len() })
}

pub fn translate(net: &HybridNet, marking_cap: usize) -> Result<HybridAutomaton, HaError> {
    translate_detailed(net, marking_cap).map(|t| t.automaton)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{parse_model, NodeKind};
    use crate::rational::int;

    fn delem() -> HybridNet {
        parse_model(include_str!("../../../../models/tanks3_delem.model")).unwrap()
    }

    fn tanks3() -> HybridNet {
        parse_model(include_str!("../../../../models/tanks3.model")).unwrap()
    }

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn discrete_part_of_tanks3_delem() {
        let tpn = extract_discrete_part(&delem());
        assert_eq!(tpn.places.len(), 4);
        assert_eq!(tpn.transitions.len(), 4);
        assert!(tpn.places.iter().all(|p| p.kind == NodeKind::Discrete));
        assert_eq!(tpn.initial.0, ints(&[1, 0, 1, 0]));
        let empty = extract_discrete_part(&tanks3());
        assert!(empty.places.is_empty() && empty.transitions.is_empty());
    }

    #[test]
    fn timed_automaton_of_the_valves() {
        let ta = timepn_to_timed_automaton(&extract_discrete_part(&delem()), 100).unwrap();
        assert_eq!(ta.automaton.locations.len(), 4);
        assert_eq!(ta.automaton.clocks.len(), 4);
        assert_eq!(ta.markings[0].0, ints(&[1, 0, 1, 0]));
        assert!(ta.automaton.locations[0].invariant.is_empty());
        let closed = ta.markings.iter().position(|m| m.0 == ints(&[0, 1, 0, 1])).unwrap();
        let inv: Vec<String> = ta.automaton.locations[closed].invariant.iter().map(|c| c.to_string()).collect();
        assert_eq!(inv, vec!["x_open_1 <= 10", "x_open_2 <= 10"]);
        assert_eq!(
            timepn_to_timed_automaton(&extract_discrete_part(&delem()), 1),
            Err(HaError::MarkingCapExceeded { cap: 1 })
        );
    }

    #[test]
    fn point_interval_is_urgent() {
        let src = "class d-elementary\nplace A discrete = 1\nplace B discrete = 0\n\
                   transition t discrete interval=[10,10]\narc A -> t\narc t -> B\n";
        let ta = timepn_to_timed_automaton(&parse_model(src).unwrap(), 10).unwrap();
        assert_eq!(ta.automaton.edges[0].guard[0].to_string(), "x_t >= 10");
        assert_eq!(ta.automaton.locations[0].invariant[0].to_string(), "x_t <= 10");
    }

    #[test]
    fn configurations() {
        let net = delem();
        let open = ccpn_configuration(&net, &Marking(ints(&[1, 0, 1, 0])));
        let ids = |n: &HybridNet| n.transitions.iter().map(|t| t.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&open), ["T1", "T2", "T3", "T4"]);
        assert_eq!(open.pre, tanks3().pre);
        assert_eq!(open.post, tanks3().post);
        assert_eq!(ids(&ccpn_configuration(&net, &Marking(ints(&[0, 1, 1, 0])))), ["T2", "T3", "T4"]);
        assert_eq!(ids(&ccpn_configuration(&net, &Marking(ints(&[0, 1, 0, 1])))), ["T3", "T4"]);
    }

    #[test]
    fn tanks3_inner_automaton() {
        let ha = ccpn_to_ha(&tanks3()).unwrap();
        assert_eq!(ha.locations[0].flow, ints(&[-1, -1, 9]));
        let (_, e) = ha.outgoing(0).find(|(_, e)| e.guard[0].to_string() == "P2 = 0").unwrap();
        assert_eq!(ha.locations[e.target].flow, ints(&[-1, 0, 8]));
        assert!(ha.locations.len() <= 8);
        ha.check().unwrap();

        let src = "class ccpn\nplace A continuous = 0\ntransition s continuous speed=1\narc s -> A\n";
        let single = ccpn_to_ha(&parse_model(src).unwrap()).unwrap();
        assert_eq!((single.locations.len(), single.edges.len()), (1, 0));
    }

    #[test]
    fn flat_tanks3_delem() {
        let t = translate_detailed(&delem(), 100).unwrap();
        let ha = &t.automaton;
        ha.check().unwrap();
        assert_eq!(t.location_bound(), 32);
        assert!((ha.locations.len() as u128) < 32);
        assert_eq!(ha.clocks.len(), 4);
        assert_eq!(ha.variables.len(), 3);
        assert_eq!(ha.locations[ha.initial].flow, ints(&[-1, -1, 9]));
        assert_eq!(ha.locations[0].id, "S0.111");
    }

    #[test]
    fn degenerate_pipelines() {
        assert_eq!(translate(&tanks3(), 10).unwrap(), ccpn_to_ha(&tanks3()).unwrap());
        let src = "class d-elementary\nplace A discrete = 1\nplace B discrete = 0\n\
                   transition t discrete interval=[1,2]\ntransition u discrete interval=[0,inf]\n\
                   arc A -> t\narc t -> B\narc B -> u\narc u -> A\n";
        let net = parse_model(src).unwrap();
        let ta = timepn_to_timed_automaton(&extract_discrete_part(&net), 10).unwrap();
        assert_eq!(translate(&net, 10).unwrap(), ta.automaton);
    }

    #[test]
    fn translation_is_deterministic() {
        assert_eq!(translate(&delem(), 100).unwrap(), translate(&delem(), 100).unwrap());
    }
}
