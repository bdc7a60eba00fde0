use num_traits::{Signed, Zero};

use super::{HaError, HybridAutomaton, Relation};
use crate::hybrid::{
    select_firing_time, EventKind, EventLog, FiringPolicy, FiringTime, HybridConfig, HybridError, HybridRun,
    LoggedEvent,
};
use crate::net::{FiringInterval, Marking};
use crate::rational::{self, Rational};
use crate::trajectory::{Trajectory, TrajectoryPoint};

pub fn simulate_ha(ha: &HybridAutomaton, horizon: &Rational, policy: &FiringPolicy) -> Result<HybridRun, HaError> {
    simulate_ha_with(ha, horizon, policy, HybridConfig::default())
}

/// Replays `policy` on the automaton: labelled edges fire at policy-chosen
/// instants, `<place> = 0` edges are taken as soon as their guard holds.
pub fn simulate_ha_with(
    ha: &HybridAutomaton,
    horizon: &Rational,
    policy: &FiringPolicy,
    config: HybridConfig,
) -> Result<HybridRun, HaError> {
    ha.check()?;
    if !horizon.is_positive() {
        return Err(HybridError::InvalidHorizon.into());
    }
    let mut sim = Simulator {
        ha,
        horizon,
        policy,
        max_events: config.max_events,
        now: Rational::zero(),
        location: ha.initial,
        values: ha.initial_valuation.clone(),
        reset_at: vec![Rational::zero(); ha.labels.len()],
        enabled: vec![false; ha.labels.len()],
        scheduled: vec![FiringTime::Never; ha.labels.len()],
        fired: vec![0; ha.labels.len()],
        events: Vec::new(),
        points: Vec::new(),
    };
    sim.run()?;
    Ok(HybridRun {
        trajectory: Trajectory { places: ha.variables.clone(), points: sim.points },
        log: EventLog { places: ha.variables.clone(), events: sim.events },
    })
}

struct Simulator<'a> {
    ha: &'a HybridAutomaton,
    horizon: &'a Rational,
    policy: &'a FiringPolicy,
    max_events: usize,
    now: Rational,
    location: usize,
    values: Vec<Rational>,
    reset_at: Vec<Rational>,
    enabled: Vec<bool>,
    scheduled: Vec<FiringTime>,
    fired: Vec<usize>,
    events: Vec<LoggedEvent>,
    points: Vec<TrajectoryPoint>,
}

impl Simulator<'_> {
    fn value(&self, name: &str) -> Rational {
        if let Some(i) = self.ha.variables.iter().position(|v| v == name) {
            return self.values[i].clone();
        }
        let k = self.ha.clocks.iter().position(|c| c == name).expect("checked automaton");
        &self.now - &self.reset_at[k]
    }

    fn log(&mut self, kind: EventKind) -> Result<(), HaError> {
        if self.events.len() >= self.max_events {
            return Err(HybridError::ZenoSuspect { limit: self.max_events, time: rational::format(&self.now) }.into());
        }
        self.events.push(LoggedEvent { time: self.now.clone(), kind, marking: self.values.clone() });
        Ok(())
    }

    fn record_point(&mut self) {
        let point = TrajectoryPoint { time: self.now.clone(), marking: Marking(self.values.clone()) };
        if self.points.last() != Some(&point) {
            self.points.push(point);
        }
    }

    fn discrete_edge(&self, location: usize, k: usize) -> Option<usize> {
        self.ha.outgoing(location).find(|(_, e)| e.label == self.ha.labels[k]).map(|(i, _)| i)
    }

    fn enabled_at(&self, location: usize) -> Vec<bool> {
        (0..self.ha.labels.len()).map(|k| self.discrete_edge(location, k).is_some()).collect()
    }

    /// `[α, β]` read from the edge guard and the location invariant.
    fn interval(&self, k: usize) -> FiringInterval {
        let clock = &self.ha.clocks[k];
        let bound = |constraints: &[super::LinearConstraint], rel: Relation| {
            constraints.iter().find_map(|c| match c.as_atom() {
                Some((name, r, value)) if name == clock && r == rel => Some(value.clone()),
                _ => None,
            })
        };
        let edge = &self.ha.edges[self.discrete_edge(self.location, k).expect("enabled label")];
        FiringInterval::new(
            bound(&edge.guard, Relation::Ge).unwrap_or_else(Rational::zero),
            bound(&self.ha.locations[self.location].invariant, Relation::Le),
        )
    }

    fn enable(&mut self, k: usize) -> Result<(), HaError> {
        let interval = self.interval(k);
        self.scheduled[k] = select_firing_time(
            self.policy,
            &self.ha.labels[k],
            &interval,
            &self.reset_at[k],
            self.horizon,
            self.fired[k],
        )?;
        self.enabled[k] = true;
        self.log(EventKind::EnableChange { transition: self.ha.labels[k].clone(), enabled: true })
    }

    fn disable(&mut self, k: usize) -> Result<(), HaError> {
        self.enabled[k] = false;
        self.scheduled[k] = FiringTime::Never;
        self.log(EventKind::EnableChange { transition: self.ha.labels[k].clone(), enabled: false })
    }

    fn check_invariant(&self) -> Result<(), HaError> {
        let loc = &self.ha.locations[self.location];
        match loc.invariant.iter().find(|c| !c.holds(|n| self.value(n))) {
            Some(c) => Err(HaError::InvariantViolation {
                location: loc.id.clone(),
                constraint: c.to_string(),
                time: rational::format(&self.now),
            }),
            None => Ok(()),
        }
    }

    /// Forced `<place> = 0` edges, lowest variable first.
    fn settle(&mut self) -> Result<(), HaError> {
        loop {
            let next = self
                .ha
                .outgoing(self.location)
                .filter(|(_, e)| !self.ha.is_discrete_label(&e.label))
                .filter(|(_, e)| e.guard.iter().all(|c| c.holds(|n| self.value(n))))
                .filter_map(|(i, e)| {
                    let var = e.guard.iter().find_map(|c| c.as_atom().map(|(n, _, _)| n.to_string()))?;
                    Some((self.ha.variables.iter().position(|v| v == &var)?, i))
                })
                .min();
            let Some((var, edge)) = next else { return Ok(()) };
            self.location = self.ha.edges[edge].target;
            self.log(EventKind::ContinuousZero(self.ha.variables[var].clone()))?;
        }
    }

    fn fire(&mut self, k: usize) -> Result<(), HaError> {
        let Some(edge_index) = self.discrete_edge(self.location, k) else {
            return Err(HaError::GuardViolation {
                location: self.ha.locations[self.location].id.clone(),
                label: self.ha.labels[k].clone(),
                constraint: "edge present".into(),
                time: rational::format(&self.now),
            });
        };
        let edge = &self.ha.edges[edge_index];
        if let Some(c) = edge.guard.iter().find(|c| !c.holds(|n| self.value(n))) {
            return Err(HaError::GuardViolation {
                location: self.ha.locations[self.location].id.clone(),
                label: edge.label.clone(),
                constraint: c.to_string(),
                time: rational::format(&self.now),
            });
        }
        self.fired[k] += 1;
        self.enabled[k] = false;
        self.scheduled[k] = FiringTime::Never;
        self.log(EventKind::DiscreteFire(self.ha.labels[k].clone()))?;

        let resets: Vec<bool> = self.ha.clocks.iter().map(|c| edge.resets.contains(c)).collect();
        self.location = edge.target;
        for (q, reset) in resets.iter().enumerate() {
            if *reset {
                self.reset_at[q] = self.now.clone();
            }
        }
        let next = self.enabled_at(self.location);
        for q in 0..self.ha.labels.len() {
            let was = self.enabled[q];
            if was && (!next[q] || resets[q]) {
                self.disable(q)?;
            }
            if next[q] && (resets[q] || !was) {
                self.enable(q)?;
            }
        }
        self.settle()
    }

    fn due_now(&self) -> Option<usize> {
        (0..self.ha.labels.len()).find(|&k| matches!(&self.scheduled[k], FiringTime::At(t) if t == &self.now))
    }

    fn next_event(&self) -> Option<Rational> {
        let flow = &self.ha.locations[self.location].flow;
        let zero = self
            .ha
            .outgoing(self.location)
            .filter(|(_, e)| !self.ha.is_discrete_label(&e.label))
            .filter_map(|(_, e)| {
                let (var, _, _) = e.guard.first()?.as_atom()?;
                let i = self.ha.variables.iter().position(|v| v == var)?;
                (self.values[i].is_positive() && flow[i].is_negative()).then(|| &self.now + &self.values[i] / -&flow[i])
            });
        let fires = self.scheduled.iter().filter_map(|s| match s {
            FiringTime::At(t) => Some(t.clone()),
            FiringTime::Never => None,
        });
        zero.chain(fires).min()
    }

    fn advance_to(&mut self, t: &Rational) -> Result<(), HaError> {
        let dt = t - &self.now;
        let flow = &self.ha.locations[self.location].flow;
        for (v, r) in self.values.iter_mut().zip(flow) {
            *v += r * &dt;
        }
        self.now = t.clone();
        self.check_invariant()
    }

    fn run(&mut self) -> Result<(), HaError> {
        self.check_invariant()?;
        self.record_point();
        let initially = self.enabled_at(self.location);
        for k in (0..self.ha.labels.len()).filter(|&k| initially[k]) {
            self.enable(k)?;
        }
        loop {
            self.settle()?;
            while let Some(k) = self.due_now() {
                self.fire(k)?;
            }
            self.record_point();
            match self.next_event() {
                Some(t) if &t <= self.horizon => {
                    self.advance_to(&t)?;
                    self.record_point();
                }
                _ => {
                    let end = self.horizon.clone();
                    self.advance_to(&end)?;
                    self.record_point();
                    return Ok(());
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccpn::simulate_ccpn;
    use crate::ha::{ccpn_to_ha, translate};
    use crate::hybrid::simulate_hybrid;
    use crate::net::{parse_model, HybridNet};
    use crate::rational::int;

    fn delem() -> HybridNet {
        parse_model(include_str!("../../../../models/tanks3_delem.model")).unwrap()
    }

    fn tanks3() -> HybridNet {
        parse_model(include_str!("../../../../models/tanks3.model")).unwrap()
    }

    #[test]
    fn latest_matches_the_pure_ccpn_run() {
        let ha = translate(&delem(), 100).unwrap();
        let run = simulate_ha(&ha, &int(30), &FiringPolicy::Latest).unwrap();
        let ccpn = simulate_ccpn(&tanks3(), &int(30)).unwrap();
        for t in [0, 4, 10, 20, 25, 30] {
            assert_eq!(run.trajectory.at(&int(t)), ccpn.at(&int(t)));
        }
    }

    #[test]
    fn earliest_valve_times() {
        let ha = translate(&delem(), 100).unwrap();
        let run = simulate_ha(&ha, &int(30), &FiringPolicy::Earliest).unwrap();
        let times: Vec<Rational> = run.log.firings().map(|(t, _)| t.clone()).collect();
        let expected: Vec<Rational> = [3, 3, 13, 13, 16, 16, 26, 26, 29, 29].into_iter().map(int).collect();
        assert_eq!(times, expected);
    }

    #[test]
    fn logs_match_the_hybrid_engine() {
        let net = delem();
        let ha = translate(&net, 100).unwrap();
        for policy in [FiringPolicy::Earliest, FiringPolicy::Latest, FiringPolicy::UniformRandom(3)] {
            let engine = simulate_hybrid(&net, &int(50), &policy).unwrap().log.project(&ha.variables);
            let automaton = simulate_ha(&ha, &int(50), &policy).unwrap().log;
            assert_eq!(engine.first_divergence(&automaton), None, "{policy:?}");
        }
    }

    #[test]
    fn empty_discrete_part_is_a_ccpn_run() {
        let ha = ccpn_to_ha(&tanks3()).unwrap();
        let run = simulate_ha(&ha, &int(40), &FiringPolicy::Earliest).unwrap();
        assert_eq!(run.trajectory, simulate_ccpn(&tanks3(), &int(40)).unwrap());
    }
}
