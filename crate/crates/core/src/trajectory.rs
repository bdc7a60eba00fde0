//! Piecewise-linear trajectories and their CSV form.

use std::fmt::Write as _;

use crate::net::Marking;
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryPoint {
    pub time: Rational,
    pub marking: Marking,
}

/// Exact breakpoints; the marking between two breakpoints is their linear
/// interpolation. Two points may share a time stamp when a discrete firing
/// makes the marking jump.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub places: Vec<String>,
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    /// Marking at `time`; at a jump instant the post-jump value is returned.
    pub fn at(&self, time: &Rational) -> Option<Marking> {
        let last = self.points.iter().rposition(|p| &p.time <= time)?;
        let left = &self.points[last];
        if &left.time == time {
            return Some(left.marking.clone());
        }
        let right = self.points.get(last + 1)?;
        let span = &right.time - &left.time;
        let frac = (time - &left.time) / span;
        Some(Marking(
            left.marking
                .0
                .iter()
                .zip(&right.marking.0)
                .map(|(a, b)| a + (b - a) * &frac)
                .collect(),
        ))
    }

    pub fn end_time(&self) -> Option<&Rational> {
        self.points.last().map(|p| &p.time)
    }

    /// `time,<place ids...>` with plot-friendly decimals.
    pub fn to_csv(&self) -> String {
        let mut out = format!("time,{}\n", self.places.join(","));
        for p in &self.points {
            let row: Vec<String> = p.marking.0.iter().map(rational::format_decimal).collect();
            let _ = writeln!(out, "{},{}", rational::format_decimal(&p.time), row.join(","));
        }
        out
    }

    /// Exact form: rationals as `"p/q"` strings.
    pub fn to_json(&self) -> serde_json::Value {
        let points: Vec<serde_json::Value> = self
            .points
            .iter()
            .map(|p| {
                serde_json::json!({
                    "time": rational::format(&p.time),
                    "marking": p.marking.0.iter().map(rational::format).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({ "version": "hpn-trajectory/1", "places": self.places, "points": points })
    }
}
