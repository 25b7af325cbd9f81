use crate::error::{Error, Result};
use crate::seed;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Behavioral knobs of one synthetic driver.
///
/// ```json
/// {"onset_frac": 0.3, "peak_yaw": 0.5, "yaw_jerk": 0.8, "pedal_gain": 0.8,
///  "pedal_timing": 0.25, "steering_jitter_sd": 0.003, "accel_noise_sd": 0.02,
///  "maneuver_spread": 0.08}
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverProfile {
    /// How far into the first half of the turn the driver creeps, nearly straight, before steering in; in [0, 1].
    pub onset_frac: f64,
    /// Comfortable yaw rate at the reference radius, rad/s; sets turn duration.
    pub peak_yaw: f64,
    /// Steering speed: steepest yaw-rate slope of the turn shape when it peaks at `peak_yaw`, rad/s^2.
    pub yaw_jerk: f64,
    /// Amplitude of the longitudinal acceleration cycle during a turn, m/s^2.
    pub pedal_gain: f64,
    /// Phase of that cycle as a fraction of the turn, in [0, 1).
    pub pedal_timing: f64,
    /// Per-sample steering jitter on the yaw rate, rad/s.
    pub steering_jitter_sd: f64,
    /// Per-sample pedal jitter on the longitudinal acceleration, m/s^2.
    pub accel_noise_sd: f64,
    /// Relative turn-to-turn variation of the knobs above.
    #[serde(default = "default_spread")]
    pub maneuver_spread: f64,
}

fn default_spread() -> f64 {
    DEFAULT_MANEUVER_SPREAD
}

pub const DEFAULT_MANEUVER_SPREAD: f64 = 0.12;

impl Default for DriverProfile {
    fn default() -> Self {
        Self {
            onset_frac: 0.3,
            peak_yaw: 0.5,
            yaw_jerk: 0.8,
            pedal_gain: 0.8,
            pedal_timing: 0.25,
            steering_jitter_sd: 0.003,
            accel_noise_sd: 0.02,
            maneuver_spread: DEFAULT_MANEUVER_SPREAD,
        }
    }
}

impl DriverProfile {
    pub fn validate(&self, delta_bump: f64) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("driver profile: {what}")));
        let finite = [
            self.onset_frac,
            self.peak_yaw,
            self.yaw_jerk,
            self.pedal_gain,
            self.pedal_timing,
            self.steering_jitter_sd,
            self.accel_noise_sd,
            self.maneuver_spread,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return bad("non-finite knob");
        }
        if !(0.0..=1.0).contains(&self.onset_frac) {
            return bad("onset_frac outside [0, 1]");
        }
        if self.peak_yaw <= delta_bump {
            return bad("peak_yaw must exceed the bump threshold");
        }
        if self.yaw_jerk <= 0.0 {
            return bad("yaw_jerk must be positive");
        }
        if self.pedal_gain < 0.0 || !(0.0..1.0).contains(&self.pedal_timing) {
            return bad("pedal_gain must be >= 0 and pedal_timing in [0, 1)");
        }
        if self.steering_jitter_sd < 0.0 || self.accel_noise_sd < 0.0 || self.maneuver_spread < 0.0 {
            return bad("noise levels and spread must be >= 0");
        }
        Ok(())
    }

    /// Same behavior without per-sample jitter.
    pub fn noise_free(&self) -> Self {
        Self { steering_jitter_sd: 0.0, accel_noise_sd: 0.0, ..*self }
    }
}

/// Closed ranges from which synthetic populations are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRanges {
    pub onset_frac: (f64, f64),
    pub peak_yaw: (f64, f64),
    pub yaw_jerk: (f64, f64),
    pub pedal_gain: (f64, f64),
    pub pedal_timing: (f64, f64),
    pub steering_jitter_sd: (f64, f64),
    pub accel_noise_sd: (f64, f64),
    pub maneuver_spread: f64,
}

impl Default for ProfileRanges {
    fn default() -> Self {
        Self {
            onset_frac: (0.0, 0.5),
            peak_yaw: (0.42, 0.58),
            yaw_jerk: (0.25, 2.0),
            pedal_gain: (0.1, 1.5),
            pedal_timing: (0.0, 0.8),
            steering_jitter_sd: (0.001, 0.004),
            accel_noise_sd: (0.005, 0.03),
            maneuver_spread: DEFAULT_MANEUVER_SPREAD,
        }
    }
}

/// Candidate designs tried by [`population`].
pub const MAXIMIN_CANDIDATES: usize = 64;
const KNOBS: usize = 7;

fn latin_hypercube<R: Rng>(n: usize, rng: &mut R) -> Vec<[f64; KNOBS]> {
    let mut design = vec![[0.0; KNOBS]; n];
    for k in 0..KNOBS {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (row, s) in design.iter_mut().zip(strata) {
            row[k] = (s as f64 + 0.25 + 0.5 * rng.random::<f64>()) / n as f64;
        }
    }
    design
}

fn min_pair_distance(design: &[[f64; KNOBS]]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in design.iter().enumerate() {
        for b in &design[i + 1..] {
            best = best.min(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>());
        }
    }
    best
}

/// Maximin Latin-hypercube draw of `n` drivers. Along every knob each
/// driver lands in the middle half of its own `1/n` slice of the range;
/// among [`MAXIMIN_CANDIDATES`] such designs the one whose closest pair of
/// drivers is farthest apart is kept.
pub fn population(n: usize, ranges: &ProfileRanges, root_seed: u64) -> Vec<DriverProfile> {
    let mut rng = seed::rng(seed::derive(root_seed, "population"));
    let mut best = latin_hypercube(n, &mut rng);
    let mut best_score = min_pair_distance(&best);
    for _ in 1..MAXIMIN_CANDIDATES {
        let candidate = latin_hypercube(n, &mut rng);
        let score = min_pair_distance(&candidate);
        if score > best_score {
            best = candidate;
            best_score = score;
        }
    }
    let scale = |u: f64, (lo, hi): (f64, f64)| lo + u * (hi - lo);
    best.iter()
        .map(|u| DriverProfile {
            onset_frac: scale(u[0], ranges.onset_frac),
            peak_yaw: scale(u[1], ranges.peak_yaw),
            yaw_jerk: scale(u[2], ranges.yaw_jerk),
            pedal_gain: scale(u[3], ranges.pedal_gain),
            pedal_timing: scale(u[4], ranges.pedal_timing),
            steering_jitter_sd: scale(u[5], ranges.steering_jitter_sd),
            accel_noise_sd: scale(u[6], ranges.accel_noise_sd),
            maneuver_spread: ranges.maneuver_spread,
        })
        .collect()
}
