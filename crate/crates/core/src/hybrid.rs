//! Hybrid (T-timed) and D-elementary nets: CCPN phases interleaved with
//! discrete firings chosen by a [`FiringPolicy`].

use std::fmt::Write as _;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ccpn::{CcpnError, FlowModel, FlowState};
use crate::net::{FiringInterval, HybridNet, Marking, NetClass, NodeKind};
use crate::rational::{self, Rational};
use crate::trajectory::{Trajectory, TrajectoryPoint};

pub const DEFAULT_MAX_EVENTS: usize = 1_000_000;

/// Number of equally spaced candidate instants drawn from by `UniformRandom`.
pub const RANDOM_GRID: i64 = 1024;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HybridError {
    #[error("a {0} net cannot be simulated by the hybrid engine")]
    NotHybrid(NetClass),
    #[error("horizon must be positive")]
    InvalidHorizon,
    #[error(transparent)]
    Flow(#[from] CcpnError),
    #[error("firing `{transition}` would make place `{place}` negative")]
    FiringUnderflow { transition: String, place: String },
    #[error("scripted firing of `{transition}` at {time} is outside {interval} relative to enabling time {since}")]
    ScriptViolation { transition: String, time: String, since: String, interval: String },
    #[error("more than {limit} events before t = {time}; the run looks Zeno")]
    ZenoSuspect { limit: usize, time: String },
    #[error("`{0}` is not a discrete transition")]
    NotDiscrete(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FiringPolicy {
    Earliest,
    Latest,
    UniformRandom(u64),
    /// `(transition, absolute time)`; the k-th entry for a transition is its
    /// k-th firing. A transition with no entry left never fires.
    Scripted(Vec<(String, Rational)>),
}

impl FiringPolicy {
    /// Short name used in output directory names.
    pub fn name(&self) -> String {
        match self {
            FiringPolicy::Earliest => "earliest".into(),
            FiringPolicy::Latest => "latest".into(),
            FiringPolicy::UniformRandom(seed) => format!("random{seed}"),
            FiringPolicy::Scripted(_) => "script".into(),
        }
    }

    /// Script format: one `<transition> <absolute time>` per line; `#` comments.
    pub fn parse_script(text: &str) -> Result<FiringPolicy, String> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let (Some(t), Some(time), None) = (words.next(), words.next(), words.next()) else {
                return Err(format!("line {}: expected `<transition> <time>`", n + 1));
            };
            let time = rational::parse(time).ok_or_else(|| format!("line {}: bad time `{time}`", n + 1))?;
            entries.push((t.to_string(), time));
        }
        Ok(FiringPolicy::Scripted(entries))
    }

    /// Script recording every firing in `log`, replaying the same run.
    pub fn script_from_log(log: &EventLog) -> FiringPolicy {
        FiringPolicy::Scripted(
            log.events
                .iter()
                .filter_map(|e| match &e.kind {
                    EventKind::DiscreteFire(t) => Some((t.clone(), e.time.clone())),
                    _ => None,
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FiringTime {
    At(Rational),
    Never,
}

fn random_stream(seed: u64, transition: &str, since: &Rational) -> ChaCha8Rng {
    let text = format!("{transition}@{since}");
    let mix = text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&mix.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Firing instant of a transition enabled since `enabled_since`. `fired` is how
/// many times it already fired in this run (used by scripted policies).
pub fn select_firing_time(
    policy: &FiringPolicy,
    transition: &str,
    interval: &FiringInterval,
    enabled_since: &Rational,
    horizon: &Rational,
    fired: usize,
) -> Result<FiringTime, HybridError> {
    let earliest = enabled_since + &interval.earliest;
    let latest = interval.latest.as_ref().map(|b| enabled_since + b);
    Ok(match policy {
        FiringPolicy::Earliest => FiringTime::At(earliest),
        FiringPolicy::Latest => latest.map_or(FiringTime::Never, FiringTime::At),
        FiringPolicy::UniformRandom(seed) => {
            if &earliest > horizon {
                return Ok(FiringTime::Never);
            }
            let hi = latest.map_or(horizon.clone(), |l| l.min(horizon.clone()));
            let k: i64 = random_stream(*seed, transition, enabled_since).gen_range(0..=RANDOM_GRID);
            FiringTime::At(&earliest + (hi - &earliest) * rational::ratio(k, RANDOM_GRID))
        }
        FiringPolicy::Scripted(entries) => {
            match entries.iter().filter(|(t, _)| t == transition).nth(fired) {
                None => FiringTime::Never,
                Some((_, time)) => {
                    if time < &earliest || latest.as_ref().is_some_and(|l| time > l) {
                        return Err(HybridError::ScriptViolation {
                            transition: transition.to_string(),
                            time: rational::format(time),
                            since: rational::format(enabled_since),
                            interval: interval.to_string(),
                        });
                    }
                    FiringTime::At(time.clone())
                }
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    ContinuousZero(String),
    DiscreteFire(String),
    EnableChange { transition: String, enabled: bool },
}

impl EventKind {
    pub fn code(&self) -> &'static str {
        match self {
            EventKind::ContinuousZero(_) => "continuous-zero",
            EventKind::DiscreteFire(_) => "discrete-fire",
            EventKind::EnableChange { .. } => "enable-change",
        }
    }

    pub fn detail(&self) -> String {
        match self {
            EventKind::ContinuousZero(p) => p.clone(),
            EventKind::DiscreteFire(t) => t.clone(),
            EventKind::EnableChange { transition, enabled: true } => format!("{transition} enabled"),
            EventKind::EnableChange { transition, enabled: false } => format!("{transition} disabled"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedEvent {
    pub time: Rational,
    pub kind: EventKind,
    /// Marking right after the event, over `EventLog::places`.
    pub marking: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLog {
    pub places: Vec<String>,
    pub events: Vec<LoggedEvent>,
}

/// First position where two logs disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub index: usize,
    pub expected: Option<LoggedEvent>,
    pub got: Option<LoggedEvent>,
}

impl EventLog {
    pub fn firings(&self) -> impl Iterator<Item = (&Rational, &str)> {
        self.events.iter().filter_map(|e| match &e.kind {
            EventKind::DiscreteFire(t) => Some((&e.time, t.as_str())),
            _ => None,
        })
    }

    /// Same events with snapshots restricted to `places`.
    pub fn project(&self, places: &[String]) -> EventLog {
        let cols: Vec<usize> =
            places.iter().filter_map(|p| self.places.iter().position(|q| q == p)).collect();
        EventLog {
            places: cols.iter().map(|&c| self.places[c].clone()).collect(),
            events: self
                .events
                .iter()
                .map(|e| LoggedEvent {
                    time: e.time.clone(),
                    kind: e.kind.clone(),
                    marking: cols.iter().map(|&c| e.marking[c].clone()).collect(),
                })
                .collect(),
        }
    }

    pub fn first_divergence(&self, other: &EventLog) -> Option<Divergence> {
        let len = self.events.len().max(other.events.len());
        (0..len).find_map(|i| {
            let (a, b) = (self.events.get(i), other.events.get(i));
            (a != b).then(|| Divergence { index: i, expected: a.cloned(), got: b.cloned() })
        })
    }

    /// `time,kind,detail,<places...>`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("time,kind,detail,{}\n", self.places.join(","));
        for e in &self.events {
            let row: Vec<String> = e.marking.iter().map(rational::format_decimal).collect();
            let _ = writeln!(
                out,
                "{},{},{},{}",
                rational::format_decimal(&e.time),
                e.kind.code(),
                e.kind.detail(),
                row.join(",")
            );
        }
        out
    }
}

impl EventLog {
    /// Exact form: rationals as `"p/q"` strings.
    pub fn to_json(&self) -> serde_json::Value {
        let events: Vec<serde_json::Value> = self
            .events
            .iter()
            .map(|e| {
                serde_json::json!({
                    "time": rational::format(&e.time),
                    "kind": e.kind.code(),
                    "detail": e.kind.detail(),
                    "marking": e.marking.iter().map(rational::format).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({ "version": "hpn-events/1", "places": self.places, "events": events })
    }
}

impl std::fmt::Display for LoggedEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let marking: Vec<String> = self.marking.iter().map(rational::format).collect();
        write!(f, "t={} {} {} [{}]", rational::format(&self.time), self.kind.code(), self.kind.detail(), marking.join(" "))
    }
}

/// Enabling clock of every discrete transition, indexed like
/// `HybridNet::discrete_transitions()`; `None` is `Disabled`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimerState(pub Vec<Option<Rational>>);

fn check_discrete(net: &HybridNet, j: usize) -> Result<(), HybridError> {
    if net.transitions[j].is_continuous() {
        return Err(HybridError::NotDiscrete(net.transitions[j].id.clone()));
    }
    Ok(())
}

/// `m_i ≥ Pre(P_i, T_j)` for every input place of the discrete transition `j`.
pub fn d_enabled(net: &HybridNet, marking: &Marking, j: usize) -> Result<bool, HybridError> {
    check_discrete(net, j)?;
    Ok((0..net.places.len()).all(|i| marking[i] >= net.pre[i][j]))
}

/// `m − Pre(·,T_j) + Post(·,T_j)`.
pub fn fire_discrete(net: &HybridNet, marking: &Marking, j: usize) -> Result<Marking, HybridError> {
    check_discrete(net, j)?;
    let mut next = marking.clone();
    for i in 0..net.places.len() {
        next[i] = &marking[i] - &net.pre[i][j] + &net.post[i][j];
        if next[i].is_negative() {
            return Err(HybridError::FiringUnderflow {
                transition: net.transitions[j].id.clone(),
                place: net.places[i].id.clone(),
            });
        }
    }
    Ok(next)
}

/// Activity flag per continuous transition (indexed like
/// `HybridNet::continuous_transitions()`): every discrete input place must
/// hold at least the arc weight.
pub fn active_configuration(net: &HybridNet, marking: &Marking) -> Vec<bool> {
    let discrete = net.discrete_places();
    net.continuous_transitions()
        .into_iter()
        .map(|j| discrete.iter().all(|&i| marking[i] >= net.pre[i][j]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HybridConfig {
    pub max_events: usize,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig { max_events: DEFAULT_MAX_EVENTS }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HybridRun {
    pub trajectory: Trajectory,
    pub log: EventLog,
}

pub fn simulate_hybrid(net: &HybridNet, horizon: &Rational, policy: &FiringPolicy) -> Result<HybridRun, HybridError> {
    simulate_hybrid_with(net, horizon, policy, HybridConfig::default())
}

pub fn simulate_hybrid_with(
    net: &HybridNet,
    horizon: &Rational,
    policy: &FiringPolicy,
    config: HybridConfig,
) -> Result<HybridRun, HybridError> {
    if !net.class.is_hybrid() {
        return Err(HybridError::NotHybrid(net.class));
    }
    if !horizon.is_positive() {
        return Err(HybridError::InvalidHorizon);
    }
    let mut run = Engine::new(net, horizon, policy, config)?;
    run.run()?;
    let places = run.place_ids();
    Ok(HybridRun {
        trajectory: Trajectory { places: places.clone(), points: run.points },
        log: EventLog { places, events: run.events },
    })
}

struct Engine<'a> {
    net: &'a HybridNet,
    flow: FlowModel<'a>,
    horizon: &'a Rational,
    policy: &'a FiringPolicy,
    max_events: usize,
    discrete: Vec<usize>,
    intervals: Vec<FiringInterval>,
    now: Rational,
    marking: Marking,
    active: Vec<bool>,
    state: FlowState,
    timers: TimerState,
    scheduled: Vec<FiringTime>,
    fired: Vec<usize>,
    events: Vec<LoggedEvent>,
    points: Vec<TrajectoryPoint>,
}

impl<'a> Engine<'a> {
    fn new(
        net: &'a HybridNet,
        horizon: &'a Rational,
        policy: &'a FiringPolicy,
        config: HybridConfig,
    ) -> Result<Self, HybridError> {
        let flow = FlowModel::new(net);
        let discrete = net.discrete_transitions();
        let intervals = discrete.iter().map(|&j| net.transitions[j].interval().expect("discrete")).collect();
        let marking = net.initial.clone();
        let active = active_configuration(net, &marking);
        let state = flow.normalize(flow.sign_of(&marking), &active)?;
        let n = discrete.len();
        Ok(Engine {
            net,
            flow,
            horizon,
            policy,
            max_events: config.max_events,
            discrete,
            intervals,
            now: Rational::zero(),
            marking,
            active,
            state,
            timers: TimerState(vec![None; n]),
            scheduled: vec![FiringTime::Never; n],
            fired: vec![0; n],
            events: Vec::new(),
            points: Vec::new(),
        })
    }

    fn place_ids(&self) -> Vec<String> {
        self.net.places.iter().map(|p| p.id.clone()).collect()
    }

    fn log(&mut self, kind: EventKind) -> Result<(), HybridError> {
        if self.events.len() >= self.max_events {
            return Err(HybridError::ZenoSuspect { limit: self.max_events, time: rational::format(&self.now) });
        }
        self.events.push(LoggedEvent { time: self.now.clone(), kind, marking: self.marking.0.clone() });
        Ok(())
    }

    fn record_point(&mut self) {
        let point = TrajectoryPoint { time: self.now.clone(), marking: self.marking.clone() };
        if self.points.last() != Some(&point) {
            self.points.push(point);
        }
    }

    fn derivative_of(&self, place: usize) -> Option<&Rational> {
        self.flow.places.iter().position(|&i| i == place).map(|p| &self.state.derivative[p])
    }

    /// Enabling that holds on a right neighbourhood of `now`: a continuous
    /// threshold exactly met while the place drains does not count.
    fn enabled_now(&self, k: usize) -> bool {
        let j = self.discrete[k];
        (0..self.net.places.len()).all(|i| {
            let w = &self.net.pre[i][j];
            let m = &self.marking[i];
            if !w.is_positive() || self.net.places[i].kind == NodeKind::Discrete {
                return m >= w;
            }
            m > w || (m == w && !self.derivative_of(i).is_some_and(|d| d.is_negative()))
        })
    }

    fn enable(&mut self, k: usize) -> Result<(), HybridError> {
        let id = &self.net.transitions[self.discrete[k]].id;
        self.scheduled[k] =
            select_firing_time(self.policy, id, &self.intervals[k], &self.now, self.horizon, self.fired[k])?;
        self.timers.0[k] = Some(self.now.clone());
        self.log(EventKind::EnableChange { transition: id.clone(), enabled: true })
    }

    fn disable(&mut self, k: usize) -> Result<(), HybridError> {
        self.timers.0[k] = None;
        self.scheduled[k] = FiringTime::Never;
        let id = self.net.transitions[self.discrete[k]].id.clone();
        self.log(EventKind::EnableChange { transition: id, enabled: false })
    }

    fn settle(&mut self) -> Result<(), HybridError> {
        let (state, emptied) = self.flow.settle(self.state.clone(), &self.marking, &self.active)?;
        self.state = state;
        for p in emptied {
            let id = self.net.places[self.flow.places[p]].id.clone();
            self.log(EventKind::ContinuousZero(id))?;
        }
        Ok(())
    }

    /// Enabling changes caused by continuous thresholds.
    fn refresh(&mut self) -> Result<(), HybridError> {
        for k in 0..self.discrete.len() {
            match (self.timers.0[k].is_some(), self.enabled_now(k)) {
                (false, true) => self.enable(k)?,
                (true, false) => self.disable(k)?,
                _ => {}
            }
        }
        Ok(())
    }

    fn due_now(&self) -> Option<usize> {
        (0..self.discrete.len()).find(|&k| matches!(&self.scheduled[k], FiringTime::At(t) if t == &self.now))
    }

    fn fire(&mut self, k: usize) -> Result<(), HybridError> {
        let j = self.discrete[k];
        let before = self.marking.clone();
        let mut intermediate = before.clone();
        for i in 0..self.net.places.len() {
            intermediate[i] -= &self.net.pre[i][j];
        }
        self.marking = fire_discrete(self.net, &before, j)?;
        self.fired[k] += 1;
        self.timers.0[k] = None;
        self.scheduled[k] = FiringTime::Never;
        self.log(EventKind::DiscreteFire(self.net.transitions[j].id.clone()))?;

        // effective signs survive the jump unless the firing moved the place
        let mut sign = self.state.sign.clone();
        for (p, &i) in self.flow.places.iter().enumerate() {
            if self.marking[i] != before[i] {
                sign[p] = self.marking[i].is_positive();
            }
        }
        self.active = active_configuration(self.net, &self.marking);
        self.state = self.flow.normalize(sign, &self.active)?;

        for q in 0..self.discrete.len() {
            let was = self.timers.0[q].is_some();
            let now_enabled = self.enabled_now(q);
            let newly = now_enabled
                && (q == k || !(0..self.net.places.len()).all(|i| intermediate[i] >= self.net.pre[i][self.discrete[q]]));
            if was && (!now_enabled || newly) {
                self.disable(q)?;
            }
            if now_enabled && (newly || !was) {
                self.enable(q)?;
            }
        }
        self.settle()
    }

    fn instant(&mut self) -> Result<(), HybridError> {
        self.settle()?;
        self.refresh()?;
        while let Some(k) = self.due_now() {
            self.fire(k)?;
            self.refresh()?;
        }
        Ok(())
    }

    fn next_event(&self) -> Option<Rational> {
        let mut best = self.flow.next_zero(&self.marking, &self.state).delay.map(|d| &self.now + d);
        let mut consider = |t: Rational| {
            if best.as_ref().is_none_or(|b| &t < b) {
                best = Some(t);
            }
        };
        for s in &self.scheduled {
            if let FiringTime::At(t) = s {
                consider(t.clone());
            }
        }
        for &j in &self.discrete {
            for (p, &i) in self.flow.places.iter().enumerate() {
                let w = &self.net.pre[i][j];
                let d = &self.state.derivative[p];
                if w.is_positive() && !d.is_zero() {
                    let tau = (w - &self.marking[i]) / d;
                    if tau.is_positive() {
                        consider(&self.now + tau);
                    }
                }
            }
        }
        best
    }

    fn advance_to(&mut self, t: &Rational) {
        let dt = t - &self.now;
        for (p, &i) in self.flow.places.iter().enumerate() {
            let delta = &self.state.derivative[p] * &dt;
            self.marking[i] += delta;
        }
        self.now = t.clone();
    }

    fn run(&mut self) -> Result<(), HybridError> {
        self.record_point();
        for k in 0..self.discrete.len() {
            if self.enabled_now(k) {
                self.enable(k)?;
            }
        }
        loop {
            self.instant()?;
            self.record_point();
            let next = match self.next_event() {
                Some(t) if &t <= self.horizon => t,
                _ => {
                    let end = self.horizon.clone();
                    self.advance_to(&end);
                    self.record_point();
                    return Ok(());
                }
            };
            self.advance_to(&next);
            self.record_point();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccpn::simulate_ccpn;
    use crate::net::parse_model;
    use crate::rational::{int, ratio};

    fn delem() -> HybridNet {
        parse_model(include_str!("../../../models/tanks3_delem.model")).unwrap()
    }

    fn thresholds() -> HybridNet {
        parse_model(include_str!("../../../models/tanks3_thresholds.model")).unwrap()
    }

    fn idx(net: &HybridNet, id: &str) -> usize {
        net.transition_index(id).unwrap()
    }

    #[test]
    fn threshold_enabling() {
        let net = thresholds();
        let sense = idx(&net, "sense_1");
        let p5 = net.place_index("P5").unwrap();
        let mut m = net.initial.clone();
        m[p5] = int(17);
        assert!(d_enabled(&net, &m, sense).unwrap());
        m[p5] = ratio(169, 10);
        assert!(!d_enabled(&net, &m, sense).unwrap());
        m[p5] = int(20);
        let after = fire_discrete(&net, &m, sense).unwrap();
        assert_eq!(after[p5], int(3));
        assert!(d_enabled(&net, &net.initial, idx(&net, "sense_1")).is_ok_and(|e| !e));
        assert_eq!(d_enabled(&net, &m, idx(&net, "T1")), Err(HybridError::NotDiscrete("T1".into())));
    }

    #[test]
    fn firing_close_moves_the_token() {
        let net = delem();
        let m = fire_discrete(&net, &net.initial, idx(&net, "close_1")).unwrap();
        assert_eq!(m[net.place_index("Open_1").unwrap()], int(0));
        assert_eq!(m[net.place_index("Closed_1").unwrap()], int(1));
        assert!(matches!(
            fire_discrete(&net, &net.initial, idx(&net, "open_1")),
            Err(HybridError::FiringUnderflow { .. })
        ));
    }

    #[test]
    fn configurations() {
        let net = delem();
        assert_eq!(active_configuration(&net, &net.initial), vec![true; 4]);
        let m = fire_discrete(&net, &net.initial, idx(&net, "close_1")).unwrap();
        assert_eq!(active_configuration(&net, &m), vec![false, true, true, true]);
        let ccpn = parse_model(include_str!("../../../models/tanks3.model")).unwrap();
        assert_eq!(active_configuration(&ccpn, &ccpn.initial), vec![true; 4]);
    }

    #[test]
    fn policy_selection() {
        let ten = FiringInterval::point(int(10));
        let open = FiringInterval::new(int(3), None);
        let h = int(30);
        assert_eq!(select_firing_time(&FiringPolicy::Earliest, "open_1", &ten, &int(3), &h, 0), Ok(FiringTime::At(int(13))));
        assert_eq!(select_firing_time(&FiringPolicy::Latest, "close_1", &open, &int(0), &h, 0), Ok(FiringTime::Never));
        let r = select_firing_time(&FiringPolicy::UniformRandom(7), "close_1", &open, &int(2), &h, 0).unwrap();
        let FiringTime::At(t) = &r else { panic!("random draw should fire") };
        assert!(t >= &int(5) && t <= &h);
        assert_eq!(select_firing_time(&FiringPolicy::UniformRandom(7), "close_1", &open, &int(2), &h, 0).unwrap(), r);
        assert_eq!(
            select_firing_time(&FiringPolicy::UniformRandom(7), "close_1", &open, &int(28), &h, 0),
            Ok(FiringTime::Never)
        );
        let script = FiringPolicy::parse_script("close_1 4\n# c\nclose_1 9/2\n").unwrap();
        assert_eq!(select_firing_time(&script, "close_1", &open, &int(0), &h, 0), Ok(FiringTime::At(int(4))));
        assert!(matches!(
            select_firing_time(&script, "close_1", &open, &int(3), &h, 1),
            Err(HybridError::ScriptViolation { .. })
        ));
        assert_eq!(select_firing_time(&script, "close_1", &open, &int(0), &h, 2), Ok(FiringTime::Never));
    }

    #[test]
    fn latest_never_closes_the_valves() {
        let net = delem();
        let run = simulate_hybrid(&net, &int(30), &FiringPolicy::Latest).unwrap();
        assert_eq!(run.log.firings().count(), 0);
        let ccpn = simulate_ccpn(&parse_model(include_str!("../../../models/tanks3.model")).unwrap(), &int(30)).unwrap();
        for t in [0, 5, 10, 17, 25, 30] {
            let m = run.trajectory.at(&int(t)).unwrap();
            assert_eq!(m.0[..3], ccpn.at(&int(t)).unwrap().0[..]);
        }
    }

    #[test]
    fn earliest_valve_cycle() {
        let net = delem();
        let run = simulate_hybrid(&net, &int(30), &FiringPolicy::Earliest).unwrap();
        let fires: Vec<(Rational, &str)> = run.log.firings().map(|(t, id)| (t.clone(), id)).collect();
        let expected: Vec<(Rational, &str)> = [
            (3, "close_1"), (3, "close_2"), (13, "open_1"), (13, "open_2"),
            (16, "close_1"), (16, "close_2"), (26, "open_1"), (26, "open_2"),
            (29, "close_1"), (29, "close_2"),
        ]
        .into_iter()
        .map(|(t, id)| (int(t), id))
        .collect();
        assert_eq!(fires, expected);
    }

    #[test]
    fn single_duration_fires_once() {
        let src = "class hybrid\nplace A discrete = 1\nplace B discrete = 0\n\
                   transition t discrete duration=3\narc A -> t\narc t -> B\n";
        let run = simulate_hybrid(&parse_model(src).unwrap(), &int(10), &FiringPolicy::Earliest).unwrap();
        let fires: Vec<_> = run.log.firings().collect();
        assert_eq!(fires, vec![(&int(3), "t")]);
    }

    #[test]
    fn threshold_fires_when_meter_reaches_weight() {
        let net = thresholds();
        let run = simulate_hybrid(&net, &int(20), &FiringPolicy::Earliest).unwrap();
        let p5 = net.place_index("P5").unwrap();
        let first = run.log.events.iter().find(|e| e.kind == EventKind::DiscreteFire("sense_1".into())).unwrap();
        assert_eq!(first.time, ratio(17, 3));
        assert_eq!(first.marking[p5], int(0));
    }

    #[test]
    fn zeno_is_reported() {
        let src = "class hybrid\nplace A discrete = 1\ntransition t discrete duration=0\narc A -> t\narc t -> A\n";
        let cfg = HybridConfig { max_events: 100 };
        let err = simulate_hybrid_with(&parse_model(src).unwrap(), &int(1), &FiringPolicy::Earliest, cfg);
        assert!(matches!(err, Err(HybridError::ZenoSuspect { limit: 100, .. })));
    }

    #[test]
    fn rejects_continuous_nets() {
        let ccpn = parse_model(include_str!("../../../models/tanks3.model")).unwrap();
        assert_eq!(
            simulate_hybrid(&ccpn, &int(1), &FiringPolicy::Earliest),
            Err(HybridError::NotHybrid(NetClass::Ccpn))
        );
    }

    #[test]
    fn csv_header() {
        let run = simulate_hybrid(&delem(), &int(5), &FiringPolicy::Earliest).unwrap();
        let csv = run.log.to_csv();
        assert!(csv.starts_with("time,kind,detail,P1,P2,P3,Open_1"));
        assert!(csv.contains("3,discrete-fire,close_1,"));
    }
}
