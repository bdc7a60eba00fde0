//! Variable-speed continuous Petri nets: `v_j = V_j · min_{P_i ∈ °T_j} m_i`.
//!
//! Inside a region (fixed argmin place per transition) the dynamics are the
//! affine system `dm/dt = A·m + b`. The simulator integrates each region with
//! adaptive classical RK4 and localises region switches by bisection.

use num_traits::Signed;
use thiserror::Error;

use crate::net::{HybridNet, NetClass};
use crate::rational;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VcpnError {
    #[error("a {0} net cannot be simulated with variable speeds")]
    NotVcpn(NetClass),
    #[error("continuous transition `{0}` has no maximal speed")]
    MissingSpeed(String),
    #[error("horizon must be finite and positive")]
    InvalidHorizon,
    #[error("tolerances must be positive")]
    InvalidTolerance,
    #[error("step size underflow at t = {time}: events cannot be separated at the configured tolerance")]
    StepUnderflow { time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VcpnTolerances {
    pub rel_tol: f64,
    pub event_tol: f64,
    /// Defaults to `horizon / 1000`.
    pub max_step: Option<f64>,
}

impl Default for VcpnTolerances {
    fn default() -> Self {
        VcpnTolerances { rel_tol: 1e-9, event_tol: 1e-9, max_step: None }
    }
}

/// Argmin place per continuous transition and the induced affine dynamics,
/// both over the net's continuous places.
#[derive(Debug, Clone, PartialEq)]
pub struct VcpnRegion {
    /// Place index (into `HybridNet::places`) realising the min; `None` for sources.
    pub argmin: Vec<Option<usize>>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl VcpnRegion {
    fn same_region(&self, other: &VcpnRegion) -> bool {
        self.argmin == other.argmin
    }

    fn rate(&self, m: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, b)| row.iter().zip(m).map(|(a, x)| a * x).sum::<f64>() + b)
            .collect()
    }
}

struct Structure {
    places: Vec<usize>,
    transitions: Vec<usize>,
    speeds: Vec<f64>,
    inputs: Vec<Vec<usize>>,
    /// `W[p][k]` over continuous places/transitions.
    incidence: Vec<Vec<f64>>,
}

impl Structure {
    fn new(net: &HybridNet) -> Result<Self, VcpnError> {
        let places = net.continuous_places();
        let transitions = net.continuous_transitions();
        let mut speeds = Vec::new();
        for &j in &transitions {
            let t = &net.transitions[j];
            let v = t.max_speed().ok_or_else(|| VcpnError::MissingSpeed(t.id.clone()))?;
            speeds.push(rational::to_f64(v));
        }
        let inputs = transitions
            .iter()
            .map(|&j| places.iter().copied().filter(|&i| net.pre[i][j].is_positive()).collect())
            .collect();
        let incidence = places
            .iter()
            .map(|&i| {
                transitions
                    .iter()
                    .map(|&j| rational::to_f64(&(&net.post[i][j] - &net.pre[i][j])))
                    .collect()
            })
            .collect();
        Ok(Structure { places, transitions, speeds, inputs, incidence })
    }

    /// `m` is indexed like `HybridNet::places`.
    fn argmin(&self, m: &[f64]) -> Vec<Option<usize>> {
        self.inputs
            .iter()
            .map(|inputs| {
                inputs.iter().copied().fold(None, |best: Option<usize>, i| match best {
                    Some(b) if m[b] <= m[i] => Some(b),
                    _ => Some(i),
                })
            })
            .collect()
    }

    fn region(&self, m: &[f64]) -> VcpnRegion {
        let argmin = self.argmin(m);
        let n = self.places.len();
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for (k, choice) in argmin.iter().enumerate() {
            match choice {
                Some(place) => {
                    let col = self.places.iter().position(|p| p == place).expect("continuous input");
                    for p in 0..n {
                        a[p][col] += self.incidence[p][k] * self.speeds[k];
                    }
                }
                None => {
                    for p in 0..n {
                        b[p] += self.incidence[p][k] * self.speeds[k];
                    }
                }
            }
        }
        VcpnRegion { argmin, a, b }
    }

    fn full(&self, net_len: usize, cont: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; net_len];
        for (p, &i) in self.places.iter().enumerate() {
            m[i] = cont[p];
        }
        m
    }
}

/// Speeds over the continuous transitions for a marking indexed like the
/// net's places. Sources fire at `V_j`.
pub fn vcpn_speeds(net: &HybridNet, marking: &[f64]) -> Result<Vec<f64>, VcpnError> {
    let s = Structure::new(net)?;
    Ok(s.inputs
        .iter()
        .zip(&s.speeds)
        .map(|(inputs, v)| {
            if inputs.is_empty() {
                *v
            } else {
                v * inputs.iter().map(|&i| marking[i]).fold(f64::INFINITY, f64::min)
            }
        })
        .collect())
}

/// Ties go to the earliest declared place.
pub fn region_of(net: &HybridNet, marking: &[f64]) -> Result<VcpnRegion, VcpnError> {
    Ok(Structure::new(net)?.region(marking))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcpnEvent {
    pub time: f64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcpnPoint {
    pub time: f64,
    /// Over all places, clamped at zero.
    pub marking: Vec<f64>,
    /// `dm/dt` in the region active right after this point.
    pub rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcpnTrajectory {
    pub places: Vec<String>,
    pub points: Vec<VcpnPoint>,
    pub events: Vec<VcpnEvent>,
}

impl VcpnTrajectory {
    /// Cubic Hermite interpolation between breakpoints.
    pub fn at(&self, time: f64) -> Option<Vec<f64>> {
        let idx = self.points.iter().rposition(|p| p.time <= time)?;
        let left = &self.points[idx];
        if left.time == time {
            return Some(left.marking.clone());
        }
        let right = self.points.get(idx + 1)?;
        let h = right.time - left.time;
        let s = (time - left.time) / h;
        let (h00, h10, h01, h11) = (
            2.0 * s.powi(3) - 3.0 * s * s + 1.0,
            s.powi(3) - 2.0 * s * s + s,
            -2.0 * s.powi(3) + 3.0 * s * s,
            s.powi(3) - s * s,
        );
        Some(
            (0..left.marking.len())
                .map(|i| {
                    h00 * left.marking[i] + h10 * h * left.rate[i] + h01 * right.marking[i]
                        + h11 * h * right.rate[i]
                })
                .map(|v| v.max(0.0))
                .collect(),
        )
    }

    /// Trajectory CSV with `# event,<time>,<description>` rows appended.
    pub fn to_csv(&self) -> String {
        let mut out = format!("time,{}\n", self.places.join(","));
        for p in &self.points {
            let row: Vec<String> = p.marking.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{},{}\n", p.time, row.join(",")));
        }
        for e in &self.events {
            out.push_str(&format!("# event,{},{}\n", e.time, e.description));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let points: Vec<serde_json::Value> =
            self.points.iter().map(|p| serde_json::json!({ "time": p.time, "marking": p.marking })).collect();
        let events: Vec<serde_json::Value> = self
            .events
            .iter()
            .map(|e| serde_json::json!({ "time": e.time, "description": e.description }))
            .collect();
        serde_json::json!({ "version": "hpn-vcpn-trajectory/1", "places": self.places, "points": points, "events": events })
    }
}

fn rk4(region: &VcpnRegion, y: &[f64], h: f64) -> Vec<f64> {
    let axpy = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let k1 = region.rate(y);
    let k2 = region.rate(&axpy(y, &k1, h / 2.0));
    let k3 = region.rate(&axpy(y, &k2, h / 2.0));
    let k4 = region.rate(&axpy(y, &k3, h));
    (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// One step-doubled RK4 step with Richardson correction; returns the new state
/// and the estimated local error relative to the state scale.
fn doubled_step(region: &VcpnRegion, y: &[f64], h: f64) -> (Vec<f64>, f64) {
    let coarse = rk4(region, y, h);
    let fine = rk4(region, &rk4(region, y, h / 2.0), h / 2.0);
    let mut err: f64 = 0.0;
    let corrected: Vec<f64> = fine
        .iter()
        .zip(&coarse)
        .map(|(f, c)| {
            let diff = (f - c) / 15.0;
            err = err.max(diff.abs() / (1.0 + f.abs()));
            f + diff
        })
        .collect();
    (corrected, err)
}

const MAX_EVENTS_AT_ONE_INSTANT: usize = 64;

pub fn simulate_vcpn(
    net: &HybridNet,
    horizon: f64,
    tolerances: VcpnTolerances,
) -> Result<VcpnTrajectory, VcpnError> {
    if net.class != NetClass::Vcpn {
        return Err(VcpnError::NotVcpn(net.class));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(VcpnError::InvalidHorizon);
    }
    let VcpnTolerances { rel_tol, event_tol, max_step } = tolerances;
    let max_step = max_step.unwrap_or(horizon / 1000.0);
    if !(rel_tol > 0.0 && event_tol > 0.0 && max_step > 0.0) {
        return Err(VcpnError::InvalidTolerance);
    }
    let s = Structure::new(net)?;
    let n_all = net.places.len();
    let place_ids: Vec<String> = net.places.iter().map(|p| p.id.clone()).collect();
    let mut y: Vec<f64> = s.places.iter().map(|&i| rational::to_f64(&net.initial[i])).collect();
    let mut t = 0.0;
    let mut region = s.region(&s.full(n_all, &y));
    let mut h = max_step;
    let min_step = 1e-15 * horizon.max(1.0);
    let local_tol = rel_tol * 1e-2;

    let point = |t: f64, y: &[f64], region: &VcpnRegion| {
        let rate = region.rate(y);
        VcpnPoint {
            time: t,
            marking: s.full(n_all, &y.iter().map(|v| v.max(0.0)).collect::<Vec<_>>()),
            rate: s.full(n_all, &rate),
        }
    };
    let mut points = vec![point(t, &y, &region)];
    let mut events = Vec::new();
    let mut tight_events = 0usize;

    while t < horizon {
        let step = h.min(max_step).min(horizon - t);
        let (candidate, err) = doubled_step(&region, &y, step);
        if err > local_tol && step > min_step {
            h = (step * (0.9 * (local_tol / err).powf(0.2)).clamp(0.1, 0.5)).max(min_step);
            continue;
        }
        if step <= min_step && err > local_tol {
            return Err(VcpnError::StepUnderflow { time: t });
        }
        let crossed = |state: &[f64]| {
            state.iter().any(|v| *v < -event_tol)
                || !s.region(&s.full(n_all, state)).same_region(&region)
        };
        if !crossed(&candidate) {
            y = candidate;
            t += step;
            if horizon - t < min_step {
                t = horizon;
            }
            points.push(point(t, &y, &region));
            tight_events = 0;
            if err > 0.0 {
                h = step * (0.9 * (local_tol / err).powf(0.2)).clamp(0.2, 5.0);
            } else {
                h = step * 5.0;
            }
            continue;
        }

        // bisection on the step length: `lo` stays in the current region, `hi` has left it
        let (mut lo, mut hi) = (0.0, step);
        let mut hi_state = candidate;
        while hi - lo > event_tol {
            let mid = 0.5 * (lo + hi);
            let (state, _) = doubled_step(&region, &y, mid);
            if crossed(&state) {
                hi = mid;
                hi_state = state;
            } else {
                lo = mid;
            }
        }
        if hi <= event_tol {
            tight_events += 1;
            if tight_events > MAX_EVENTS_AT_ONE_INSTANT {
                return Err(VcpnError::StepUnderflow { time: t });
            }
        } else {
            tight_events = 0;
        }
        t += hi;
        y = hi_state;
        let mut description = Vec::new();
        for (p, v) in y.iter_mut().enumerate() {
            if *v < 0.0 {
                *v = 0.0;
                description.push(format!("{} reaches zero", net.places[s.places[p]].id));
            }
        }
        let next = s.region(&s.full(n_all, &y));
        for (k, (before, after)) in region.argmin.iter().zip(&next.argmin).enumerate() {
            if before != after {
                let name = |p: &Option<usize>| p.map(|i| net.places[i].id.clone()).unwrap_or_default();
                description.push(format!(
                    "argmin of {} switches from {} to {}",
                    net.transitions[s.transitions[k]].id,
                    name(before),
                    name(after)
                ));
            }
        }
        region = next;
        events.push(VcpnEvent { time: t, description: description.join("; ") });
        points.push(point(t, &y, &region));
        h = max_step;
    }

    Ok(VcpnTrajectory { places: place_ids, points, events })
}
