//! Random net generators and independent oracles shared by the integration
//! and acceptance tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::fmt::Write as _;

use hpn_core::hybrid::{EventKind, EventLog};
use hpn_core::net::{NetClass, NodeKind};
use hpn_core::rational::{self, Rational};
use hpn_core::{parse_model, HybridNet};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn model(name: &str) -> HybridNet {
    let path = format!("{}/../../models/{name}.model", env!("CARGO_MANIFEST_DIR"));
    parse_model(&std::fs::read_to_string(&path).expect("model file")).expect("valid model")
}

fn halves(rng: &mut impl Rng, lo: i64, hi: i64) -> String {
    rational::format(&rational::ratio(rng.gen_range(2 * lo..=2 * hi), 2))
}

/// Continuous net in which every transition has at most one input place and
/// only feeds places with a larger index, so no set of empty places can feed
/// itself.
pub fn random_ccpn(rng: &mut impl Rng, places: usize, transitions: usize) -> HybridNet {
    let mut src = String::from("class ccpn\n");
    for i in 0..places {
        let _ = writeln!(src, "place P{i} continuous = {}", halves(rng, 0, 10));
    }
    let mut arcs = String::new();
    for j in 0..transitions {
        let _ = writeln!(src, "transition T{j} continuous speed={}", halves(rng, 1, 5));
        let input = if rng.gen_bool(0.75) { Some(rng.gen_range(0..places)) } else { None };
        if let Some(i) = input {
            let _ = writeln!(arcs, "arc P{i} -> T{j} weight={}", rng.gen_range(1..=2));
        }
        let first_out = input.map_or(0, |i| i + 1);
        if first_out < places && (input.is_none() || rng.gen_bool(0.7)) {
            for o in first_out..places {
                if rng.gen_bool(0.5) || o == places - 1 {
                    let _ = writeln!(arcs, "arc T{j} -> P{o} weight={}", rng.gen_range(1..=2));
                    if rng.gen_bool(0.6) {
                        break;
                    }
                }
            }
        }
    }
    parse_model(&(src + &arcs)).expect("generated net parses")
}

/// Transfers of one unit between two places (lower to higher index): every
/// column of the incidence matrix sums to zero.
pub fn random_conservative_ccpn(rng: &mut impl Rng, places: usize, transitions: usize) -> HybridNet {
    let mut src = String::from("class ccpn\n");
    for i in 0..places {
        let _ = writeln!(src, "place P{i} continuous = {}", halves(rng, 0, 10));
    }
    let mut arcs = String::new();
    for j in 0..transitions {
        let _ = writeln!(src, "transition T{j} continuous speed={}", halves(rng, 1, 5));
        let a = rng.gen_range(0..places - 1);
        let b = rng.gen_range(a + 1..places);
        let _ = writeln!(arcs, "arc P{a} -> T{j}\narc T{j} -> P{b}");
    }
    parse_model(&(src + &arcs)).expect("generated net parses")
}

/// Autonomous continuous net with arbitrary (possibly cyclic) arcs.
pub fn random_autonomous(rng: &mut impl Rng, places: usize, transitions: usize) -> HybridNet {
    let mut src = String::from("class autonomous\n");
    for i in 0..places {
        let _ = writeln!(src, "place P{i} continuous = {}", if rng.gen_bool(0.5) { 1 } else { 0 });
    }
    let mut arcs = String::new();
    for j in 0..transitions {
        let _ = writeln!(src, "transition T{j} continuous");
        for i in 0..places {
            match rng.gen_range(0..6) {
                0 => { let _ = writeln!(arcs, "arc P{i} -> T{j}"); }
                1 => { let _ = writeln!(arcs, "arc T{j} -> P{i}"); }
                _ => {}
            }
        }
    }
    parse_model(&(src + &arcs)).expect("generated net parses")
}

/// Variable-speed net whose transitions have at most one input place, so the
/// argmin (and the affine dynamics) never change.
pub fn random_one_region_vcpn(rng: &mut impl Rng) -> HybridNet {
    let places = rng.gen_range(1..=3);
    let transitions = rng.gen_range(1..=4);
    let mut src = String::from("class vcpn\n");
    for i in 0..places {
        let _ = writeln!(src, "place P{i} continuous = {}", halves(rng, 0, 10));
    }
    let mut arcs = String::new();
    for j in 0..transitions {
        let _ = writeln!(src, "transition T{j} continuous speed={}", halves(rng, 1, 3));
        if rng.gen_bool(0.7) {
            let i = rng.gen_range(0..places);
            let _ = writeln!(arcs, "arc P{i} -> T{j}");
        }
        if rng.gen_bool(0.7) {
            let o = rng.gen_range(0..places);
            let _ = writeln!(arcs, "arc T{j} -> P{o} weight={}", rng.gen_range(1..=2));
        }
    }
    parse_model(&(src + &arcs)).expect("generated net parses")
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    /// `duration=d`, class hybrid.
    Durations,
    /// `interval=[a,b]`, class d-elementary.
    Intervals,
}

/// Up to three continuous places fed, drained and moved by continuous
/// transitions, some gated by places of up to three independent discrete
/// cycles. No continuous place feeds a discrete transition.
pub fn random_hybrid(rng: &mut impl Rng, timing: Timing) -> HybridNet {
    let class = match timing {
        Timing::Durations => "hybrid",
        Timing::Intervals => "d-elementary",
    };
    let mut src = format!("class {class}\n");
    let mut arcs = String::new();
    let cplaces = rng.gen_range(1..=3);
    for i in 0..cplaces {
        let _ = writeln!(src, "place C{i} continuous = {}", rng.gen_range(0..=20));
    }
    let cycles = rng.gen_range(1..=3);
    let mut dplaces = Vec::new();
    for k in 0..cycles {
        let len = rng.gen_range(2..=3);
        for i in 0..len {
            let _ = writeln!(src, "place D{k}_{i} discrete = {}", if i == 0 { 1 } else { 0 });
            dplaces.push(format!("D{k}_{i}"));
        }
        for i in 0..len {
            let alpha = rng.gen_range(1..=6);
            let timing = match timing {
                Timing::Durations => format!("duration={alpha}"),
                Timing::Intervals => match rng.gen_range(0..3) {
                    0 => format!("interval=[{alpha},{alpha}]"),
                    1 => format!("interval=[{alpha},{}]", alpha + rng.gen_range(1..=5)),
                    _ => format!("interval=[{alpha},inf]"),
                },
            };
            let _ = writeln!(src, "transition d{k}_{i} discrete {timing}");
            let _ = writeln!(arcs, "arc D{k}_{i} -> d{k}_{i}\narc d{k}_{i} -> D{k}_{}", (i + 1) % len);
        }
    }
    let ctrans = rng.gen_range(1..=4);
    for j in 0..ctrans {
        let _ = writeln!(src, "transition T{j} continuous speed={}", rng.gen_range(1..=6));
        let input = if rng.gen_bool(0.7) { Some(rng.gen_range(0..cplaces)) } else { None };
        if let Some(i) = input {
            let _ = writeln!(arcs, "arc C{i} -> T{j}");
        }
        let first_out = input.map_or(0, |i| i + 1);
        if first_out < cplaces && (input.is_none() || rng.gen_bool(0.6)) {
            let o = rng.gen_range(first_out..cplaces);
            let _ = writeln!(arcs, "arc T{j} -> C{o}");
        }
        if rng.gen_bool(0.6) {
            let d = &dplaces[rng.gen_range(0..dplaces.len())];
            let _ = writeln!(arcs, "arc {d} -> T{j}\narc T{j} -> {d}");
        }
    }
    parse_model(&(src + &arcs)).expect("generated net parses")
}

/// Same net with every `duration=d` read as `[d,d]`.
pub fn as_point_intervals(net: &HybridNet) -> HybridNet {
    let text = hpn_core::serialize_model(net);
    let mut out = String::new();
    for line in text.lines() {
        let line = match line.split_once(" duration=") {
            Some((head, d)) => format!("{head} interval=[{d},{d}]"),
            None => line.replace("class hybrid", "class d-elementary"),
        };
        out.push_str(&line);
        out.push('\n');
    }
    let converted = parse_model(&out).expect("converted net parses");
    assert_eq!(converted.class, NetClass::DElementary);
    converted
}

/// Fixed-step fluid emulator for nets produced by [`random_ccpn`]: per step,
/// places are visited in index order and an emptying place shares what it
/// holds among its output transitions in proportion to their demand.
pub fn euler_oracle(net: &HybridNet, step: f64, steps_per_sample: usize, samples: usize) -> Vec<Vec<f64>> {
    let n = net.places.len();
    let speeds: Vec<f64> = net.transitions.iter().map(|t| rational::to_f64(t.max_speed().unwrap())).collect();
    let w = |r: &Rational| rational::to_f64(r);
    let input: Vec<Option<usize>> =
        (0..net.transitions.len()).map(|j| (0..n).find(|&i| net.pre[i][j] > rational::zero())).collect();
    let mut m: Vec<f64> = net.initial.0.iter().map(w).collect();
    let mut out = vec![m.clone()];
    for _ in 0..samples {
        for _ in 0..steps_per_sample {
            let mut inflow = vec![0.0; n];
            let mut scale = vec![1.0; net.transitions.len()];
            for j in (0..net.transitions.len()).filter(|&j| input[j].is_none()) {
                for o in 0..n {
                    inflow[o] += w(&net.post[o][j]) * speeds[j] * step;
                }
            }
            for i in 0..n {
                let outs: Vec<usize> = (0..net.transitions.len()).filter(|&j| input[j] == Some(i)).collect();
                let demand: f64 = outs.iter().map(|&j| w(&net.pre[i][j]) * speeds[j] * step).sum();
                let available = m[i] + inflow[i];
                let factor = if demand > available { available / demand } else { 1.0 };
                for &j in &outs {
                    scale[j] = factor;
                    for o in 0..n {
                        inflow[o] += w(&net.post[o][j]) * speeds[j] * step * factor;
                    }
                }
                m[i] = (available - demand * factor).max(0.0);
                inflow[i] = 0.0;
            }
        }
        out.push(m.clone());
    }
    out
}

/// Every firing happens within its interval measured from the latest
/// `enabled` entry of the same transition.
pub fn check_interval_discipline(net: &HybridNet, log: &EventLog) -> Result<(), String> {
    let mut since: HashMap<&str, &Rational> = HashMap::new();
    for e in &log.events {
        match &e.kind {
            EventKind::EnableChange { transition, enabled: true } => {
                since.insert(transition, &e.time);
            }
            EventKind::EnableChange { transition, enabled: false } => {
                since.remove(transition.as_str());
            }
            EventKind::DiscreteFire(t) => {
                let start = since.remove(t.as_str()).ok_or_else(|| format!("{t} fired while disabled"))?;
                let interval = net.transitions[net.transition_index(t).unwrap()].interval().unwrap();
                let elapsed = &e.time - start;
                if elapsed < interval.earliest || interval.latest.as_ref().is_some_and(|b| &elapsed > b) {
                    return Err(format!("{t} fired after {elapsed}, outside {interval}"));
                }
            }
            EventKind::ContinuousZero(_) => {}
        }
    }
    Ok(())
}

/// Discrete entries are non-negative integers, continuous ones non-negative.
pub fn check_marking_types(net: &HybridNet, log: &EventLog) -> Result<(), String> {
    for e in &log.events {
        for (i, v) in e.marking.iter().enumerate() {
            if *v < rational::zero() {
                return Err(format!("{} negative at t = {}", log.places[i], e.time));
            }
            if net.places[i].kind == NodeKind::Discrete && !rational::is_integer(v) {
                return Err(format!("{} fractional at t = {}", log.places[i], e.time));
            }
        }
    }
    Ok(())
}

pub fn continuous_ids(net: &HybridNet) -> Vec<String> {
    net.continuous_places().into_iter().map(|i| net.places[i].id.clone()).collect()
}
