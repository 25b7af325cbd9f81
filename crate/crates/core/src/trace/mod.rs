//! IMU trace ingestion and pre-processing.
//!
//! A [`RawTrace`] holds device-frame samples. [`align_to_geo_frame`] rotates
//! them into East-North-Up and keeps the quantities the rest of the pipeline
//! needs: the vertical rotation rate (yaw) and the horizontal acceleration.
//! [`despike`] and [`lowpass_smooth`] then clean the aligned channels.
//!
//! Sign convention: yaw rate is positive for clockwise rotation seen from
//! above, so right turns are positive. In a right-handed ENU frame that is
//! the negated Up component of the angular velocity.

mod align;
pub mod csv;
mod filter;

pub use align::{align_to_geo_frame, geo_rotation};
pub use filter::{despike, despike_with_window, lowpass_smooth, moving_average_len, DESPIKE_WINDOW};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

/// Default sampling rate of generated and recorded traces.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 100.0;
pub const DEFAULT_DESPIKE_Z: f64 = 6.0;
pub const DEFAULT_CUTOFF_HZ: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    /// Seconds since trace start.
    pub t: f64,
    /// Angular velocity, rad/s.
    pub gyro: Vec3,
    /// Specific force, m/s^2.
    pub accel: Vec3,
    /// Magnetic field, uT.
    pub mag: Option<Vec3>,
}

impl ImuSample {
    pub fn new(t: f64, gyro: Vec3, accel: Vec3) -> Self {
        Self { t, gyro, accel, mag: None }
    }

    fn is_finite(&self) -> bool {
        let finite3 = |v: &Vec3| v.iter().all(|x| x.is_finite());
        self.t.is_finite() && finite3(&self.gyro) && finite3(&self.accel) && self.mag.as_ref().is_none_or(finite3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTrace {
    samples: Vec<ImuSample>,
    sample_period: f64,
    already_aligned: bool,
}

impl RawTrace {
    /// Validates ordering, finiteness and sampling regularity.
    pub fn new(samples: Vec<ImuSample>, sample_period: f64, already_aligned: bool) -> Result<Self> {
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(Error::InvalidTrace(format!("sample period {sample_period} must be positive")));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidTrace(format!("need at least 2 samples, got {}", samples.len())));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::InvalidTrace(format!("non-finite value in sample {i}")));
            }
            if s.t < 0.0 {
                return Err(Error::InvalidTrace(format!("negative timestamp in sample {i}")));
            }
        }
        for (i, w) in samples.windows(2).enumerate() {
            let dt = w[1].t - w[0].t;
            if dt <= 0.0 {
                return Err(Error::InvalidTrace(format!("timestamps not increasing at sample {}", i + 1)));
            }
            if (dt - sample_period).abs() > 0.5 * sample_period {
                return Err(Error::InvalidTrace(format!(
                    "gap of {dt:.6} s at sample {} deviates more than 50% from the sample period {sample_period}",
                    i + 1
                )));
            }
        }
        Ok(Self { samples, sample_period, already_aligned })
    }

    /// Like [`RawTrace::new`], taking the sample period as the median timestamp gap.
    pub fn with_inferred_period(samples: Vec<ImuSample>, already_aligned: bool) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidTrace(format!("need at least 2 samples, got {}", samples.len())));
        }
        let mut gaps: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
        gaps.sort_by(f64::total_cmp);
        let period = gaps[gaps.len() / 2];
        Self::new(samples, period, already_aligned)
    }

    pub fn samples(&self) -> &[ImuSample] {
        &self.samples
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn already_aligned(&self) -> bool {
        self.already_aligned
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn has_magnetometer(&self) -> bool {
        self.samples.iter().all(|s| s.mag.is_some())
    }

    pub fn into_samples(self) -> Vec<ImuSample> {
        self.samples
    }
}

/// Geo-aligned trace, stored column-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedTrace {
    pub t: Vec<f64>,
    /// Vertical rotation rate, clockwise positive (smoothed once filtered).
    pub yaw: Vec<f64>,
    /// Horizontal acceleration in (East, North).
    pub accel_en: Vec<[f64; 2]>,
    /// Yaw after alignment and despiking, never low-pass filtered.
    pub yaw_raw: Vec<f64>,
    pub sample_period: f64,
}

impl AlignedTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Knobs for the full pre-processing chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub despike_z: f64,
    pub cutoff_hz: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { despike_z: DEFAULT_DESPIKE_Z, cutoff_hz: DEFAULT_CUTOFF_HZ }
    }
}

/// Align, despike and smooth.
pub fn preprocess(trace: &RawTrace, config: &PreprocessConfig) -> Result<AlignedTrace> {
    let aligned = align_to_geo_frame(trace)?;
    let clean = despike(&aligned, config.despike_z)?;
    lowpass_smooth(&clean, config.cutoff_hz)
}
