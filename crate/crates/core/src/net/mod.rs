//! Net data model shared by all four net classes: autonomous continuous,
//! constant-speed (CCPN), variable-speed (VCPN), hybrid with fixed discrete
//! durations, and D-elementary hybrid nets with firing intervals.
//!
//! Places and transitions keep declaration order; every iteration in the
//! crate follows it so outputs are reproducible.

mod parse;
mod validate;

pub use parse::{parse_model, serialize_model, ParseError};
pub use validate::{validate_structure, Rule, ValidationReport, Violation};

use std::fmt;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::rational::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Continuous,
    Discrete,
}

impl NodeKind {
    pub fn keyword(self) -> &'static str {
        match self {
            NodeKind::Continuous => "continuous",
            NodeKind::Discrete => "discrete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetClass {
    AutonomousContinuous,
    Ccpn,
    Vcpn,
    HybridTimed,
    DElementary,
}

impl NetClass {
    pub const ALL: [NetClass; 5] = [
        NetClass::AutonomousContinuous,
        NetClass::Ccpn,
        NetClass::Vcpn,
        NetClass::HybridTimed,
        NetClass::DElementary,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            NetClass::AutonomousContinuous => "autonomous",
            NetClass::Ccpn => "ccpn",
            NetClass::Vcpn => "vcpn",
            NetClass::HybridTimed => "hybrid",
            NetClass::DElementary => "d-elementary",
        }
    }

    pub fn from_keyword(word: &str) -> Option<NetClass> {
        NetClass::ALL.into_iter().find(|c| c.keyword() == word)
    }

    /// Classes whose nodes are all continuous.
    pub fn is_continuous_only(self) -> bool {
        matches!(
            self,
            NetClass::AutonomousContinuous | NetClass::Ccpn | NetClass::Vcpn
        )
    }

    pub fn is_hybrid(self) -> bool {
        matches!(self, NetClass::HybridTimed | NetClass::DElementary)
    }
}

impl fmt::Display for NetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Place {
    pub id: String,
    pub kind: NodeKind,
}

/// Static firing interval `[earliest, latest]`; `latest == None` is +infinity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FiringInterval {
    pub earliest: Rational,
    pub latest: Option<Rational>,
}

impl FiringInterval {
    pub fn new(earliest: Rational, latest: Option<Rational>) -> Self {
        FiringInterval { earliest, latest }
    }

    pub fn point(at: Rational) -> Self {
        FiringInterval { earliest: at.clone(), latest: Some(at) }
    }

    pub fn is_ordered(&self) -> bool {
        self.latest.as_ref().is_none_or(|l| &self.earliest <= l)
    }
}

impl fmt::Display for FiringInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{},{}]",
            rational::format(&self.earliest),
            rational::format_extended(self.latest.as_ref())
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiscreteTiming {
    /// Fixed firing duration of a T-timed transition.
    Duration(Rational),
    /// Firing interval of a time transition.
    Interval(FiringInterval),
}

impl DiscreteTiming {
    /// A duration `d` behaves exactly as the point interval `[d,d]`.
    pub fn as_interval(&self) -> FiringInterval {
        match self {
            DiscreteTiming::Duration(d) => FiringInterval::point(d.clone()),
            DiscreteTiming::Interval(i) => i.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransitionKind {
    /// `max_speed` is absent only for autonomous nets.
    Continuous { max_speed: Option<Rational> },
    Discrete(DiscreteTiming),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub id: String,
    pub kind: TransitionKind,
}

impl Transition {
    pub fn continuous(id: impl Into<String>, max_speed: Option<Rational>) -> Self {
        Transition { id: id.into(), kind: TransitionKind::Continuous { max_speed } }
    }

    pub fn discrete(id: impl Into<String>, timing: DiscreteTiming) -> Self {
        Transition { id: id.into(), kind: TransitionKind::Discrete(timing) }
    }

    pub fn node_kind(&self) -> NodeKind {
        match self.kind {
            TransitionKind::Continuous { .. } => NodeKind::Continuous,
            TransitionKind::Discrete(_) => NodeKind::Discrete,
        }
    }

    pub fn is_continuous(&self) -> bool {
        self.node_kind() == NodeKind::Continuous
    }

    pub fn max_speed(&self) -> Option<&Rational> {
        match &self.kind {
            TransitionKind::Continuous { max_speed } => max_speed.as_ref(),
            TransitionKind::Discrete(_) => None,
        }
    }

    pub fn interval(&self) -> Option<FiringInterval> {
        match &self.kind {
            TransitionKind::Discrete(timing) => Some(timing.as_interval()),
            TransitionKind::Continuous { .. } => None,
        }
    }
}

/// Per-place amounts, indexed like `HybridNet::places`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Marking(pub Vec<Rational>);

impl Marking {
    pub fn zeros(len: usize) -> Self {
        Marking(vec![Rational::zero(); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_non_negative(&self) -> bool {
        self.0.iter().all(|v| !v.is_negative())
    }
}

impl std::ops::Index<usize> for Marking {
    type Output = Rational;
    fn index(&self, idx: usize) -> &Rational {
        &self.0[idx]
    }
}

impl std::ops::IndexMut<usize> for Marking {
    fn index_mut(&mut self, idx: usize) -> &mut Rational {
        &mut self.0[idx]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HybridNet {
    pub class: NetClass,
    pub places: Vec<Place>,
    pub transitions: Vec<Transition>,
    /// `pre[place][transition]`
    pub pre: Vec<Vec<Rational>>,
    /// `post[place][transition]`
    pub post: Vec<Vec<Rational>>,
    pub initial: Marking,
}

impl HybridNet {
    /// Builds a net with all-zero arc weights and marking.
    pub fn new(class: NetClass, places: Vec<Place>, transitions: Vec<Transition>) -> Self {
        let zero_rows = vec![vec![Rational::zero(); transitions.len()]; places.len()];
        HybridNet {
            class,
            initial: Marking::zeros(places.len()),
            pre: zero_rows.clone(),
            post: zero_rows,
            places,
            transitions,
        }
    }

    pub fn place_index(&self, id: &str) -> Option<usize> {
        self.places.iter().position(|p| p.id == id)
    }

    pub fn transition_index(&self, id: &str) -> Option<usize> {
        self.transitions.iter().position(|t| t.id == id)
    }

    pub fn pre(&self, place: usize, transition: usize) -> &Rational {
        &self.pre[place][transition]
    }

    pub fn post(&self, place: usize, transition: usize) -> &Rational {
        &self.post[place][transition]
    }

    pub fn places_of_kind(&self, kind: NodeKind) -> Vec<usize> {
        (0..self.places.len()).filter(|&i| self.places[i].kind == kind).collect()
    }

    pub fn transitions_of_kind(&self, kind: NodeKind) -> Vec<usize> {
        (0..self.transitions.len())
            .filter(|&j| self.transitions[j].node_kind() == kind)
            .collect()
    }

    pub fn continuous_places(&self) -> Vec<usize> {
        self.places_of_kind(NodeKind::Continuous)
    }

    pub fn discrete_places(&self) -> Vec<usize> {
        self.places_of_kind(NodeKind::Discrete)
    }

    pub fn continuous_transitions(&self) -> Vec<usize> {
        self.transitions_of_kind(NodeKind::Continuous)
    }

    pub fn discrete_transitions(&self) -> Vec<usize> {
        self.transitions_of_kind(NodeKind::Discrete)
    }

    /// Sets `pre(place, transition)` by id, for programmatic construction.
    pub fn set_pre(&mut self, place: &str, transition: &str, weight: Rational) -> Result<(), NetError> {
        let (i, j) = self.arc_indices(place, transition)?;
        self.pre[i][j] = weight;
        Ok(())
    }

    pub fn set_post(&mut self, place: &str, transition: &str, weight: Rational) -> Result<(), NetError> {
        let (i, j) = self.arc_indices(place, transition)?;
        self.post[i][j] = weight;
        Ok(())
    }

    pub fn set_initial(&mut self, place: &str, amount: Rational) -> Result<(), NetError> {
        let i = self
            .place_index(place)
            .ok_or_else(|| NetError::UnknownPlace(place.to_string()))?;
        self.initial[i] = amount;
        Ok(())
    }

    fn arc_indices(&self, place: &str, transition: &str) -> Result<(usize, usize), NetError> {
        let i = self
            .place_index(place)
            .ok_or_else(|| NetError::UnknownPlace(place.to_string()))?;
        let j = self
            .transition_index(transition)
            .ok_or_else(|| NetError::UnknownTransition(transition.to_string()))?;
        Ok((i, j))
    }

    pub fn incidence_matrix(&self) -> IncidenceMatrix {
        incidence_matrix(self)
    }

    pub fn adjacency(&self, transition: &str) -> Result<Adjacency, NetError> {
        adjacency(self, transition)
    }
}

/// `W = Post - Pre`, one row per place and one column per transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    pub rows: Vec<Vec<Rational>>,
}

impl IncidenceMatrix {
    pub fn get(&self, place: usize, transition: usize) -> &Rational {
        &self.rows[place][transition]
    }

    pub fn row(&self, place: usize) -> &[Rational] {
        &self.rows[place]
    }

    pub fn column(&self, transition: usize) -> Vec<Rational> {
        self.rows.iter().map(|r| r[transition].clone()).collect()
    }
}

pub fn incidence_matrix(net: &HybridNet) -> IncidenceMatrix {
    let rows = net
        .post
        .iter()
        .zip(&net.pre)
        .map(|(post, pre)| post.iter().zip(pre).map(|(o, i)| o - i).collect())
        .collect();
    IncidenceMatrix { rows }
}

/// Input (`°T`) and output (`T°`) places of a transition, as place indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
}

pub fn adjacency(net: &HybridNet, transition: &str) -> Result<Adjacency, NetError> {
    let j = net
        .transition_index(transition)
        .ok_or_else(|| NetError::UnknownTransition(transition.to_string()))?;
    Ok(adjacency_of(net, j))
}

pub(crate) fn adjacency_of(net: &HybridNet, j: usize) -> Adjacency {
    let positive = |weights: &Vec<Vec<Rational>>| -> Vec<usize> {
        (0..net.places.len()).filter(|&i| weights[i][j].is_positive()).collect()
    };
    Adjacency { inputs: positive(&net.pre), outputs: positive(&net.post) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    const TANKS3: &str = "\
class ccpn
place P1 continuous = 25
place P2 continuous = 10
place P3 continuous = 5
transition T1 continuous speed=2
transition T2 continuous speed=5
transition T3 continuous speed=3
transition T4 continuous speed=6
arc T1 -> P1
arc T2 -> P2
arc P1 -> T3
arc T3 -> P3
arc P2 -> T4
arc T4 -> P3
";

    fn ids(net: &HybridNet, idx: &[usize]) -> Vec<String> {
        idx.iter().map(|&i| net.places[i].id.clone()).collect()
    }

    #[test]
    fn tanks3_incidence_rows() {
        let net = parse_model(TANKS3).unwrap();
        let w = net.incidence_matrix();
        let expect = [[1, 0, -1, 0], [0, 1, 0, -1], [0, 0, 1, 1]];
        for (i, row) in expect.iter().enumerate() {
            let got: Vec<Rational> = w.row(i).to_vec();
            let want: Vec<Rational> = row.iter().map(|&v| int(v)).collect();
            assert_eq!(got, want, "row {i}");
        }
        // W·(2,5,3,6) = (-1,-1,9)
        let v = [int(2), int(5), int(3), int(6)];
        let d: Vec<Rational> = (0..3).map(|i| crate::rational::dot(w.row(i), &v)).collect();
        assert_eq!(d, vec![int(-1), int(-1), int(9)]);
    }

    #[test]
    fn self_loop_cancels_and_single_output() {
        let src = "place P continuous = 1\ntransition T continuous speed=1\narc P -> T weight=3\narc T -> P weight=3\n";
        let net = parse_model(src).unwrap();
        assert_eq!(net.incidence_matrix().get(0, 0), &int(0));

        let src = "place P continuous = 1\ntransition T continuous speed=1\narc P -> T weight=2\n";
        let net = parse_model(src).unwrap();
        assert_eq!(net.incidence_matrix().rows, vec![vec![int(-2)]]);
    }

    #[test]
    fn adjacency_sets() {
        let net = parse_model(TANKS3).unwrap();
        let t3 = net.adjacency("T3").unwrap();
        assert_eq!(ids(&net, &t3.inputs), vec!["P1"]);
        assert_eq!(ids(&net, &t3.outputs), vec!["P3"]);
        let t1 = net.adjacency("T1").unwrap();
        assert!(t1.inputs.is_empty());
        assert_eq!(
            net.adjacency("T9"),
            Err(NetError::UnknownTransition("T9".into()))
        );
        let src = "place P continuous = 1\ntransition T continuous speed=1\n";
        let lone = parse_model(src).unwrap();
        let a = lone.adjacency("T").unwrap();
        assert!(a.inputs.is_empty() && a.outputs.is_empty());
    }

    #[test]
    fn incidence_is_deterministic() {
        let net = parse_model(TANKS3).unwrap();
        assert_eq!(net.incidence_matrix(), net.incidence_matrix());
    }

    #[test]
    fn duration_is_a_point_interval() {
        let t = Transition::discrete("d", DiscreteTiming::Duration(int(3)));
        assert_eq!(t.interval(), Some(FiringInterval::point(int(3))));
    }
}
