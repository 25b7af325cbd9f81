//! Steering-maneuver detection and left/right turn extraction.

use crate::error::{Error, Result};
use crate::trace::AlignedTrace;
use serde::{Deserialize, Serialize};

/// Yaw-rate magnitude that marks a steering maneuver, rad/s.
pub const DEFAULT_DELTA_BUMP: f64 = 0.15;
/// Yaw-rate magnitude treated as "no rotation" when extending boundaries, rad/s.
pub const DEFAULT_EPSILON: f64 = 0.02;
/// Interpolated turn length.
pub const DEFAULT_TURN_LEN: usize = 100;
pub const TURN_MIN_DEG: f64 = 70.0;
pub const TURN_MAX_DEG: f64 = 110.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Left => "left",
            Direction::Right => "right",
        })
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Direction::Left),
            "right" => Ok(Direction::Right),
            other => Err(Error::Parse(format!("unknown direction '{other}'"))),
        }
    }
}

/// Inclusive sample range of one steering maneuver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SteeringEvent {
    pub start: usize,
    pub end: usize,
}

impl SteeringEvent {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One extracted left or right turn.
///
/// All series share one time grid starting at the turn's first sample.
/// `heading[0]` is zero and `heading[last]` equals `theta_final`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnSegment {
    pub direction: Direction,
    /// Net heading change, radians, clockwise positive.
    pub theta_final: f64,
    pub start_s: f64,
    pub end_s: f64,
    /// Spacing of the series below, seconds.
    pub sample_period: f64,
    pub yaw: Vec<f64>,
    pub yaw_raw: Vec<f64>,
    pub accel_en: Vec<[f64; 2]>,
    pub heading: Vec<f64>,
    /// Unit vector (East, North) of the vehicle heading at the start of the turn.
    pub sot_axis: [f64; 2],
}

impl TurnSegment {
    pub fn len(&self) -> usize {
        self.yaw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.yaw.is_empty()
    }

    pub fn theta_final_deg(&self) -> f64 {
        self.theta_final.to_degrees()
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(&TurnRecord::from(self))?)
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let record: TurnRecord = serde_json::from_str(line)?;
        record.try_into()
    }
}

/// On-disk form of a turn, one JSON object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TurnRecord {
    direction: Direction,
    theta_final_deg: f64,
    start_s: f64,
    end_s: f64,
    #[serde(rename = "L")]
    len: usize,
    sample_period: f64,
    sot_axis: [f64; 2],
    yaw: Vec<f64>,
    yaw_raw: Vec<f64>,
    accel_en: Vec<[f64; 2]>,
    heading: Vec<f64>,
}

impl From<&TurnSegment> for TurnRecord {
    fn from(t: &TurnSegment) -> Self {
        Self {
            direction: t.direction,
            theta_final_deg: t.theta_final_deg(),
            start_s: t.start_s,
            end_s: t.end_s,
            len: t.len(),
            sample_period: t.sample_period,
            sot_axis: t.sot_axis,
            yaw: t.yaw.clone(),
            yaw_raw: t.yaw_raw.clone(),
            accel_en: t.accel_en.clone(),
            heading: t.heading.clone(),
        }
    }
}

impl TryFrom<TurnRecord> for TurnSegment {
    type Error = Error;

    fn try_from(r: TurnRecord) -> Result<Self> {
        let n = r.yaw.len();
        if r.len != n || r.yaw_raw.len() != n || r.accel_en.len() != n || r.heading.len() != n {
            return Err(Error::Parse(format!("turn record series lengths disagree with L={}", r.len)));
        }
        // The heading series is authoritative; the degree field is informational.
        let theta_final = *r.heading.last().ok_or_else(|| Error::Parse("empty turn record".into()))?;
        Ok(Self {
            direction: r.direction,
            theta_final,
            start_s: r.start_s,
            end_s: r.end_s,
            sample_period: r.sample_period,
            yaw: r.yaw,
            yaw_raw: r.yaw_raw,
            accel_en: r.accel_en,
            heading: r.heading,
            sot_axis: r.sot_axis,
        })
    }
}

/// Cumulative heading change by the rectangle rule: `theta[0] = 0`,
/// `theta[n] = sum_{k=1..n} yaw[k] * dt`.
pub fn heading_series(yaw: &[f64], sample_period: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(yaw.len());
    let mut acc = 0.0;
    for (k, y) in yaw.iter().enumerate() {
        if k > 0 {
            acc += y * sample_period;
        }
        out.push(acc);
    }
    out
}

/// Find bump-shaped yaw excursions: each maximal run with `|Y| > delta_bump`
/// is widened in both directions until `|Y| <= epsilon`. Runs whose widened
/// ranges touch or overlap are merged. Excursions that never settle before
/// the trace ends are dropped.
pub fn detect_steering_events(trace: &AlignedTrace, delta_bump: f64, epsilon: f64) -> Result<Vec<SteeringEvent>> {
    if !(epsilon > 0.0 && epsilon < delta_bump) {
        return Err(Error::InvalidParameter(format!("need 0 < epsilon ({epsilon}) < delta_bump ({delta_bump})")));
    }
    let yaw = &trace.yaw;
    let n = yaw.len();
    let mut events: Vec<SteeringEvent> = Vec::new();
    let mut i = 0;
    while i < n {
        if yaw[i].abs() <= delta_bump {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < n && yaw[i].abs() > delta_bump {
            i += 1;
        }
        let run_end = i - 1;

        let mut start = run_start;
        while start > 0 && yaw[start].abs() > epsilon {
            start -= 1;
        }
        let mut end = run_end;
        while end + 1 < n && yaw[end].abs() > epsilon {
            end += 1;
        }
        if yaw[start].abs() > epsilon || yaw[end].abs() > epsilon {
            continue;
        }
        match events.last_mut() {
            Some(last) if start <= last.end => last.end = last.end.max(end),
            _ => events.push(SteeringEvent { start, end }),
        }
        i = i.max(end + 1);
    }
    Ok(events)
}

fn rotate_ccw(v: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Rotate an (East, North) vector clockwise, i.e. by a positive heading change.
pub fn rotate_cw(v: [f64; 2], angle: f64) -> [f64; 2] {
    rotate_ccw(v, -angle)
}

/// Heading of the vehicle at the first sample of a maneuver.
///
/// The velocity at step n is `v0 * h0 + u_n` (with `u_n` the integrated
/// horizontal acceleration) and must point along `h0` rotated clockwise by
/// `theta_n`. Undoing that rotation, `cross(h0, q_n) + v0 * sin(theta_n) = 0`
/// for every n, where `q_n` is `u_n` rotated back. The unit `h0` minimizing
/// the squared residuals is the smallest eigenvector of the 2x2 Schur
/// complement; its sign is chosen so the vehicle moves forward.
pub fn estimate_sot_axis(accel_en: &[[f64; 2]], heading: &[f64], sample_period: f64) -> Option<[f64; 2]> {
    let n = accel_en.len().min(heading.len());
    if n < 3 {
        return None;
    }
    let mut u = [0.0f64; 2];
    let mut m = [[0.0f64; 3]; 3];
    let mut qs = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 {
            u[0] += accel_en[k][0] * sample_period;
            u[1] += accel_en[k][1] * sample_period;
        }
        let q = rotate_ccw(u, heading[k]);
        let a = [q[1], -q[0], heading[k].sin()];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += a[r] * a[c];
            }
        }
        qs.push(q);
    }
    if m[2][2] < 1e-9 {
        return None;
    }
    let s00 = m[0][0] - m[0][2] * m[0][2] / m[2][2];
    let s01 = m[0][1] - m[0][2] * m[1][2] / m[2][2];
    let s11 = m[1][1] - m[1][2] * m[1][2] / m[2][2];
    // Smallest eigenvalue of [[s00, s01], [s01, s11]].
    let mean = 0.5 * (s00 + s11);
    let diff = 0.5 * (s00 - s11);
    let lambda = mean - (diff * diff + s01 * s01).sqrt();
    let (x, y) = if s01.abs() > 1e-300 {
        (lambda - s11, s01)
    } else if s00 <= s11 {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let norm = (x * x + y * y).sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return None;
    }
    let mut h = [x / norm, y / norm];
    let v0 = -(h[0] * m[0][2] + h[1] * m[1][2]) / m[2][2];
    let forward: f64 = qs.iter().zip(heading).map(|(q, th)| v0 * th.cos() + h[0] * q[0] + h[1] * q[1]).sum();
    if forward < 0.0 {
        h = [-h[0], -h[1]];
    }
    Some(h)
}

/// Why a steering event was not kept as a turn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectedEvent {
    pub event: SteeringEvent,
    pub theta_final: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub turns: Vec<TurnSegment>,
    pub rejected: Vec<RejectedEvent>,
}

/// Keep events whose net heading change lies within 70..=110 degrees in magnitude.
pub fn classify_and_filter_turns(trace: &AlignedTrace, events: &[SteeringEvent]) -> Extraction {
    let dt = trace.sample_period;
    let mut out = Extraction::default();
    for ev in events {
        let range = ev.start..=ev.end;
        let yaw = &trace.yaw[range.clone()];
        let heading = heading_series(yaw, dt);
        let theta_final = *heading.last().expect("event is nonempty");
        let magnitude = theta_final.abs().to_degrees();
        if !(TURN_MIN_DEG..=TURN_MAX_DEG).contains(&magnitude) {
            out.rejected.push(RejectedEvent { event: *ev, theta_final });
            continue;
        }
        let accel_en = trace.accel_en[range.clone()].to_vec();
        let sot_axis = estimate_sot_axis(&accel_en, &heading, dt).unwrap_or([0.0, 1.0]);
        out.turns.push(TurnSegment {
            direction: if theta_final > 0.0 { Direction::Right } else { Direction::Left },
            theta_final,
            start_s: trace.t[ev.start],
            end_s: trace.t[ev.end],
            sample_period: dt,
            yaw: yaw.to_vec(),
            yaw_raw: trace.yaw_raw[range].to_vec(),
            accel_en,
            heading,
            sot_axis,
        });
    }
    out
}

/// Detect and filter in one step.
pub fn extract_turns(trace: &AlignedTrace, delta_bump: f64, epsilon: f64) -> Result<Extraction> {
    let events = detect_steering_events(trace, delta_bump, epsilon)?;
    Ok(classify_and_filter_turns(trace, &events))
}

fn resample(x: &[f64], target: usize) -> Vec<f64> {
    let n = x.len();
    let span = (n - 1) as f64;
    let denom = (target - 1) as f64;
    (0..target)
        .map(|j| {
            let pos = j as f64 * span / denom;
            let i = pos.floor() as usize;
            if i >= n - 1 {
                return x[n - 1];
            }
            let frac = pos - i as f64;
            if frac == 0.0 {
                x[i]
            } else {
                x[i] + frac * (x[i + 1] - x[i])
            }
        })
        .collect()
}

/// Linearly resample every series of the turn onto `len` evenly spaced
/// points spanning the same interval. Endpoints are kept exactly.
pub fn interpolate_turn(turn: &TurnSegment, len: usize) -> Result<TurnSegment> {
    if len < 20 || !len.is_multiple_of(5) {
        return Err(Error::InvalidParameter(format!("turn length {len} must be >= 20 and divisible by 5")));
    }
    let n = turn.len();
    if n < 2 {
        return Err(Error::SeriesTooShort { need: 2, got: n });
    }
    if turn.yaw_raw.len() != n || turn.accel_en.len() != n || turn.heading.len() != n {
        return Err(Error::InvalidParameter("turn series lengths disagree".into()));
    }
    let east: Vec<f64> = turn.accel_en.iter().map(|a| a[0]).collect();
    let north: Vec<f64> = turn.accel_en.iter().map(|a| a[1]).collect();
    let east = resample(&east, len);
    let north = resample(&north, len);
    Ok(TurnSegment {
        direction: turn.direction,
        theta_final: turn.theta_final,
        start_s: turn.start_s,
        end_s: turn.end_s,
        sample_period: turn.sample_period * (n - 1) as f64 / (len - 1) as f64,
        yaw: resample(&turn.yaw, len),
        yaw_raw: resample(&turn.yaw_raw, len),
        accel_en: east.into_iter().zip(north).map(|(e, n)| [e, n]).collect(),
        heading: resample(&turn.heading, len),
        sot_axis: turn.sot_axis,
    })
}
