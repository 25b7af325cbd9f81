//! Deterministic synthetic trips.
//!
//! A [`DriverProfile`] shapes how turns are driven and a [`RouteScript`]
//! says which maneuvers happen. [`generate_trip`] integrates the vehicle's
//! heading and speed sample by sample and emits the IMU readings it would
//! produce, together with the exact maneuver intervals.
//!
//! Turn yaw rate is a raised-cosine rise, a plateau, and a raised-cosine
//! fall, shaped like a bump peaking at `peak_yaw` with steepest slope
//! `yaw_jerk` and stretched to last
//! `theta / (peak_yaw * NOMINAL_SHAPE_AREA) * sqrt(radius / REFERENCE_RADIUS)`.
//! Late turners then hold a slight creep (`CREEP_YAW`) through the first
//! `onset_frac` of the rise and steer in abruptly, so the first stage of
//! their turns is nearly straight while the end of the turn is unchanged.
//! The area always equals the 90 degree heading change (180 for U-turns).

mod profile;
mod route;

pub use profile::{population, DriverProfile, ProfileRanges, DEFAULT_MANEUVER_SPREAD};
pub use route::{random_route, RouteMix, RouteScript, Segment, DEFAULT_U_TURN_RADIUS};

use crate::error::{Error, Result};
use crate::seed;
use crate::trace::{ImuSample, RawTrace, Vec3};
use crate::turns::DEFAULT_DELTA_BUMP;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

pub const GRAVITY: f64 = 9.81;
/// Radius at which a driver reaches `peak_yaw`, m.
pub const REFERENCE_RADIUS: f64 = 10.0;
/// Mean of a typical turn bump relative to its peak.
pub const NOMINAL_SHAPE_AREA: f64 = 0.6;
/// Yaw rate held while creeping into a turn, rad/s: above the event
/// boundary tolerance, far below the bump threshold.
pub const CREEP_YAW: f64 = 0.04;
/// Time to ease into the creep, s.
pub const CREEP_RAMP: f64 = 0.5;
/// Late steering rejoins the unhurried bump at this fraction of the turn.
pub const ONSET_MERGE: f64 = 0.75;
/// Turns are shortened until their peak reaches this multiple of the bump threshold.
pub const MIN_PEAK_OVER_THRESHOLD: f64 = 1.6;
/// Correlation time of the driver's steering and pedal jitter, seconds.
pub const JITTER_TIME_CONSTANT: f64 = 0.5;
/// Highest yaw rate a segment may demand, rad/s.
pub const MAX_YAW_RATE: f64 = 3.0;
pub const LANE_CHANGE_PEAK: f64 = 0.25;
/// Duration of each of the two lane-change lobes, s.
pub const LANE_CHANGE_LOBE: f64 = 2.0;
/// Peak acceleration or deceleration while changing speed on a straight or braking, m/s^2.
pub const SPEED_CHANGE_ACCEL: f64 = 2.0;
const MIN_TURN_SPEED: f64 = 0.5;

/// Per-channel white noise of the phone's sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoise {
    pub gyro_sd: f64,
    pub accel_sd: f64,
    pub mag_sd: f64,
}

impl SensorNoise {
    pub fn zero() -> Self {
        Self { gyro_sd: 0.0, accel_sd: 0.0, mag_sd: 0.0 }
    }
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self { gyro_sd: 0.004, accel_sd: 0.03, mag_sd: 0.2 }
    }
}

/// Fixed orientation of the phone in the car, applied as roll about the
/// car's forward axis, then pitch about its right axis, then yaw about up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceMount {
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    /// Horizontal and downward geomagnetic field, uT.
    pub field_horizontal: f64,
    pub field_down: f64,
}

impl Default for DeviceMount {
    fn default() -> Self {
        Self { roll_deg: 20.0, pitch_deg: -35.0, yaw_deg: 70.0, field_horizontal: 20.0, field_down: 45.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripOptions {
    pub sample_period: f64,
    pub seed: u64,
    pub sensor: SensorNoise,
    /// `None` emits readings already in the East-North-Up frame.
    pub mount: Option<DeviceMount>,
    /// Initial heading, degrees clockwise from North.
    pub initial_heading_deg: f64,
}

impl TripOptions {
    pub fn new(sample_period: f64, seed: u64) -> Self {
        Self { sample_period, seed, sensor: SensorNoise::default(), mount: None, initial_heading_deg: 0.0 }
    }

    pub fn noise_free(self) -> Self {
        Self { sensor: SensorNoise::zero(), ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManeuverKind {
    Straight,
    LeftTurn,
    RightTurn,
    LaneChange,
    UTurn,
    Stop,
}

impl ManeuverKind {
    pub fn is_turn(self) -> bool {
        matches!(self, ManeuverKind::LeftTurn | ManeuverKind::RightTurn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Maneuver {
    pub kind: ManeuverKind,
    pub start_s: f64,
    pub end_s: f64,
    /// Scripted net heading change, degrees, clockwise positive.
    pub heading_change_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripTruth {
    pub seed: u64,
    pub sample_period: f64,
    pub maneuvers: Vec<Maneuver>,
}

impl TripTruth {
    pub fn turns(&self) -> impl Iterator<Item = &Maneuver> {
        self.maneuvers.iter().filter(|m| m.kind.is_turn())
    }
}

/// Yaw-rate bump of a single turn; times in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Bump {
    peak: f64,
    rise: f64,
    plateau: f64,
    fall: f64,
    /// Late steering: creep at `creep_yaw` until `creep`, then the base
    /// bump up to `merge` squeezed into what is left plus a `lift` lobe.
    creep: f64,
    creep_yaw: f64,
    merge: f64,
    lift: f64,
}

fn raised(x: f64) -> f64 {
    (1.0 - (PI * x).cos()) / 2.0
}

impl Bump {
    /// Bump to `peak` whose steepest slope is `jerk`.
    fn core(theta: f64, peak: f64, jerk: f64) -> Self {
        let mut rise = PI * peak / (2.0 * jerk);
        let mut fall = rise;
        let mut plateau = theta / peak - (rise + fall) / 2.0;
        if plateau < 0.0 {
            let s = theta / peak / ((rise + fall) / 2.0);
            rise *= s;
            fall *= s;
            plateau = 0.0;
        }
        Self { peak, rise, plateau, fall, creep: 0.0, creep_yaw: 0.0, merge: 0.0, lift: 0.0 }
    }

    /// Same shape and area stretched to `duration`.
    fn with_duration(&self, duration: f64) -> Self {
        let stretch = duration / self.duration();
        Self {
            peak: self.peak / stretch,
            rise: self.rise * stretch,
            plateau: self.plateau * stretch,
            fall: self.fall * stretch,
            creep: self.creep * stretch,
            creep_yaw: self.creep_yaw / stretch,
            merge: self.merge * stretch,
            lift: self.lift / stretch,
        }
    }

    /// Creep through `onset` of the first half of the turn, then catch up
    /// before the last quarter, which is left untouched along with the
    /// duration and the area. The creep is `CREEP_YAW`, lowered for small
    /// onsets where there is little area to make up.
    fn with_onset(&self, onset: f64) -> Self {
        let d = self.duration();
        let creep = onset.clamp(0.0, 1.0) * d / 2.0;
        if creep <= 0.0 {
            return Self { creep: 0.0, creep_yaw: 0.0, merge: 0.0, lift: 0.0, ..*self };
        }
        let merge = ONSET_MERGE * d;
        let span = merge - creep;
        let early = self.base_area(merge);
        let ramped = creep - creep.min(CREEP_RAMP) / 2.0;
        let owed = early * creep / merge;
        let creep_yaw = CREEP_YAW.min(owed / (ramped + span / 2.0));
        let lift = 2.0 * (owed - creep_yaw * (ramped + span / 2.0)) / span;
        Self { creep, creep_yaw, merge, lift, ..*self }
    }

    fn duration(&self) -> f64 {
        self.rise + self.plateau + self.fall
    }

    /// Highest yaw rate reached, up to the lift lobe's overlap.
    fn max_yaw(&self) -> f64 {
        self.peak + self.lift
    }

    fn base(&self, t: f64) -> f64 {
        if t < 0.0 {
            0.0
        } else if t < self.rise {
            self.peak * raised(t / self.rise)
        } else if t < self.rise + self.plateau {
            self.peak
        } else if t < self.duration() {
            self.peak * (1.0 - raised((t - self.rise - self.plateau) / self.fall))
        } else {
            0.0
        }
    }

    /// Integral of the base bump over `[0, t]`.
    fn base_area(&self, t: f64) -> f64 {
        let p = self.peak;
        let x = t.clamp(0.0, self.rise);
        let mut area = p / 2.0 * (x - self.rise / PI * (PI * x / self.rise).sin());
        area += p * (t - self.rise).clamp(0.0, self.plateau);
        let y = (t - self.rise - self.plateau).clamp(0.0, self.fall);
        area + p / 2.0 * (y + self.fall / PI * (PI * y / self.fall).sin())
    }

    fn value(&self, tau: f64) -> f64 {
        if self.creep <= 0.0 || tau >= self.merge {
            return self.base(tau);
        }
        if tau < self.creep {
            return self.creep_yaw * raised((tau / self.creep.min(CREEP_RAMP)).min(1.0));
        }
        let u = (tau - self.creep) / (self.merge - self.creep);
        self.base(u * self.merge) + self.lift * (PI * u).sin().powi(2) + self.creep_yaw * (1.0 - u)
    }
}

/// What a segment commands at time `tau` after it starts.
#[derive(Debug, Clone, Copy)]
enum Plan {
    SpeedChange { from: f64, to: f64, ramp: f64 },
    Turn { bump: Bump, sign: f64, pedal_gain: f64, pedal_timing: f64 },
    LaneChange { sign: f64 },
    Stop { from: f64, brake: f64 },
}

impl Plan {
    /// (yaw rate, longitudinal acceleration)
    fn command(&self, tau: f64) -> (f64, f64) {
        match *self {
            Plan::SpeedChange { from, to, ramp } => {
                if ramp <= 0.0 || tau >= ramp {
                    (0.0, 0.0)
                } else {
                    (0.0, (to - from) * PI / (2.0 * ramp) * (PI * tau / ramp).sin())
                }
            }
            Plan::Turn { bump, sign, pedal_gain, pedal_timing } => {
                // The pedal cycle starts when the driver commits to the turn.
                let active = bump.duration() - bump.creep;
                let accel = if tau < bump.creep {
                    0.0
                } else {
                    pedal_gain * (2.0 * PI * ((tau - bump.creep) / active - pedal_timing)).sin()
                };
                (sign * bump.value(tau), accel)
            }
            Plan::LaneChange { sign } => {
                let lobe = LANE_CHANGE_LOBE;
                let shape = LANE_CHANGE_PEAK * (1.0 - (2.0 * PI * tau / lobe).cos()) / 2.0;
                if tau < lobe {
                    (sign * shape, 0.0)
                } else if tau < 2.0 * lobe {
                    (-sign * shape, 0.0)
                } else {
                    (0.0, 0.0)
                }
            }
            Plan::Stop { from, brake } => Plan::SpeedChange { from, to: 0.0, ramp: brake }.command(tau),
        }
    }
}

fn speed_ramp(from: f64, to: f64) -> f64 {
    PI * (to - from).abs() / (2.0 * SPEED_CHANGE_ACCEL)
}

struct Knobs {
    peak: f64,
    jerk: f64,
    onset: f64,
    gain: f64,
    timing: f64,
}

fn turn_knobs(profile: &DriverProfile, rng: &mut ChaCha8Rng) -> Knobs {
    let s = profile.maneuver_spread;
    let mut z = || -> f64 { rng.sample(StandardNormal) };
    let peak = profile.peak_yaw * (s * z()).exp();
    let jerk = profile.yaw_jerk * (s * z()).exp();
    let gain = profile.pedal_gain * (s * z()).exp();
    let onset = (profile.onset_frac + 0.5 * s * z()).clamp(0.0, 1.0);
    let timing = (profile.pedal_timing + 0.5 * s * z()).rem_euclid(1.0);
    Knobs { peak, jerk, onset, gain, timing }
}

fn plan_turn(knobs: &Knobs, theta: f64, radius: f64, entry_speed: f64, index: usize) -> Result<(Plan, f64)> {
    let core_duration = theta.abs() / (knobs.peak * NOMINAL_SHAPE_AREA) * (radius / REFERENCE_RADIUS).sqrt();
    let shape = Bump::core(theta.abs(), knobs.peak, knobs.jerk);
    let build = |d: f64| shape.with_duration(d).with_onset(knobs.onset);
    let mut bump = build(core_duration);
    // Nobody takes a corner so slowly that the steering never registers.
    let floor = MIN_PEAK_OVER_THRESHOLD * DEFAULT_DELTA_BUMP;
    let mut d = core_duration;
    for _ in 0..50 {
        if bump.peak >= floor * (1.0 - 1e-9) {
            break;
        }
        d *= bump.peak / floor;
        bump = build(d);
    }
    let peak = bump.max_yaw();
    if peak > MAX_YAW_RATE {
        return Err(Error::InfeasibleSegment(format!(
            "segment {index}: radius {radius} m needs yaw rate {peak:.2} rad/s (limit {MAX_YAW_RATE})"
        )));
    }
    if entry_speed < MIN_TURN_SPEED {
        return Err(Error::InfeasibleSegment(format!(
            "segment {index}: turn entered at {entry_speed:.2} m/s; precede it with a straight"
        )));
    }
    let d = bump.duration();
    let dip = knobs.gain * d / (2.0 * PI) * (1.0 - (2.0 * PI * knobs.timing).cos());
    if entry_speed - dip < MIN_TURN_SPEED {
        return Err(Error::InfeasibleSegment(format!(
            "segment {index}: pedal cycle would stop the car mid-turn ({entry_speed:.2} m/s entry, {dip:.2} m/s dip)"
        )));
    }
    let plan = Plan::Turn { bump, sign: theta.signum(), pedal_gain: knobs.gain, pedal_timing: knobs.timing };
    Ok((plan, d))
}

type Mat3 = [[f64; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [0, 1, 2].map(|r| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2])
}

/// Maps car-frame (right, forward, up) vectors to device coordinates.
fn mount_matrix(m: &DeviceMount) -> Mat3 {
    let (sr, cr) = m.roll_deg.to_radians().sin_cos();
    let (sp, cp) = m.pitch_deg.to_radians().sin_cos();
    let (sy, cy) = m.yaw_deg.to_radians().sin_cos();
    let roll = [[cr, 0.0, sr], [0.0, 1.0, 0.0], [-sr, 0.0, cr]];
    let pitch = [[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]];
    let yaw = [[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]];
    mat_mul(&yaw, &mat_mul(&pitch, &roll))
}

/// Generate one trip with default sensor noise and device-aligned output.
pub fn generate_trip(
    profile: &DriverProfile,
    route: &RouteScript,
    sample_period: f64,
    seed: u64,
) -> Result<(RawTrace, TripTruth)> {
    generate_trip_with(profile, route, &TripOptions::new(sample_period, seed))
}

pub fn generate_trip_with(
    profile: &DriverProfile,
    route: &RouteScript,
    options: &TripOptions,
) -> Result<(RawTrace, TripTruth)> {
    profile.validate(DEFAULT_DELTA_BUMP)?;
    route.validate()?;
    let dt = options.sample_period;
    if !(dt > 0.0 && dt <= 0.1) {
        return Err(Error::InvalidParameter(format!("sample period {dt} outside (0, 0.1] s")));
    }
    let sensor = options.sensor;
    if !(sensor.gyro_sd >= 0.0 && sensor.accel_sd >= 0.0 && sensor.mag_sd >= 0.0) {
        return Err(Error::InvalidParameter("sensor noise must be >= 0".into()));
    }
    let mut maneuver_rng = seed::rng(seed::derive(options.seed, "maneuver"));
    let mut jitter_rng = seed::rng(seed::derive(options.seed, "driver-jitter"));
    let mut sensor_rng = seed::rng(seed::derive(options.seed, "sensor"));
    let normal = |sd: f64| Normal::new(0.0, sd).expect("sd validated");
    // Ornstein-Uhlenbeck jitter with the profile's stationary spread.
    let decay = (-dt / JITTER_TIME_CONSTANT).exp();
    let innovation = (1.0 - decay * decay).sqrt();
    let (yaw_jitter, pedal_jitter) =
        (normal(innovation * profile.steering_jitter_sd), normal(innovation * profile.accel_noise_sd));
    let mut jitter = [
        normal(profile.steering_jitter_sd).sample(&mut jitter_rng),
        normal(profile.accel_noise_sd).sample(&mut jitter_rng),
    ];
    let (gyro_noise, accel_noise, mag_noise) = (normal(sensor.gyro_sd), normal(sensor.accel_sd), normal(sensor.mag_sd));
    let mount = options.mount.as_ref().map(|m| (mount_matrix(m), m));

    let mut samples = Vec::new();
    let mut maneuvers = Vec::with_capacity(route.segments.len());
    let mut psi = options.initial_heading_deg.to_radians();
    let mut v = 0.0f64;
    let mut seg_start = 0.0;
    let mut k = 0usize;
    let last = route.segments.len() - 1;
    for (index, seg) in route.segments.iter().enumerate() {
        let (plan, duration, kind, heading_change) = match *seg {
            Segment::Straight { duration, speed } => {
                let ramp = speed_ramp(v, speed).min(duration);
                (Plan::SpeedChange { from: v, to: speed, ramp }, duration, ManeuverKind::Straight, 0.0)
            }
            Segment::LeftTurn { radius } | Segment::RightTurn { radius } => {
                let right = matches!(seg, Segment::RightTurn { .. });
                let theta = if right { FRAC_PI_2 } else { -FRAC_PI_2 };
                let knobs = turn_knobs(profile, &mut maneuver_rng);
                let (plan, d) = plan_turn(&knobs, theta, radius, v, index)?;
                let kind = if right { ManeuverKind::RightTurn } else { ManeuverKind::LeftTurn };
                (plan, d, kind, theta.to_degrees())
            }
            Segment::UTurn { radius } => {
                let knobs = turn_knobs(profile, &mut maneuver_rng);
                let (plan, d) = plan_turn(&knobs, -PI, radius, v, index)?;
                (plan, d, ManeuverKind::UTurn, -180.0)
            }
            Segment::LaneChange { to_left } => {
                let sign = if to_left { -1.0 } else { 1.0 };
                (Plan::LaneChange { sign }, 2.0 * LANE_CHANGE_LOBE, ManeuverKind::LaneChange, 0.0)
            }
            Segment::Stop { duration } => {
                let brake = speed_ramp(v, 0.0);
                (Plan::Stop { from: v, brake }, brake + duration, ManeuverKind::Stop, 0.0)
            }
        };
        let seg_end = seg_start + duration;
        maneuvers.push(Maneuver { kind, start_s: seg_start, end_s: seg_end, heading_change_deg: heading_change });
        loop {
            let t = k as f64 * dt;
            if t >= seg_end && !(index == last && t <= seg_end + 1e-9) {
                break;
            }
            if t > seg_end {
                break;
            }
            let (yaw_cmd, accel_cmd) = plan.command(t - seg_start);
            let engaged = (v / 2.0).min(1.0);
            if k > 0 {
                jitter[0] = decay * jitter[0] + yaw_jitter.sample(&mut jitter_rng);
                jitter[1] = decay * jitter[1] + pedal_jitter.sample(&mut jitter_rng);
            }
            let yaw = yaw_cmd + engaged * jitter[0];
            let along = accel_cmd + engaged * jitter[1];
            if k > 0 {
                psi += yaw * dt;
                v = (v + along * dt).max(0.0);
            }
            let (sp, cp) = psi.sin_cos();
            let heading = [sp, cp];
            let right = [cp, -sp];
            let lateral = v * yaw;
            let world_accel =
                [along * heading[0] + lateral * right[0], along * heading[1] + lateral * right[1], GRAVITY];
            let world_gyro = [0.0, 0.0, -yaw];
            let (gyro, accel, mag) = match &mount {
                None => (world_gyro, world_accel, None),
                Some((m, spec)) => {
                    let to_car =
                        |w: Vec3| [w[0] * right[0] + w[1] * right[1], w[0] * heading[0] + w[1] * heading[1], w[2]];
                    let field = [0.0, spec.field_horizontal, -spec.field_down];
                    (mat_vec(m, to_car(world_gyro)), mat_vec(m, to_car(world_accel)), Some(mat_vec(m, to_car(field))))
                }
            };
            let mut noisy = |x: Vec3, d: &Normal<f64>| x.map(|c| c + d.sample(&mut sensor_rng));
            let gyro = noisy(gyro, &gyro_noise);
            let accel = noisy(accel, &accel_noise);
            let mag = mag.map(|m| noisy(m, &mag_noise));
            samples.push(ImuSample { t, gyro, accel, mag });
            k += 1;
        }
        seg_start = seg_end;
    }
    let trace = RawTrace::new(samples, dt, options.mount.is_none())?;
    let truth = TripTruth { seed: options.seed, sample_period: dt, maneuvers };
    Ok((trace, truth))
}
