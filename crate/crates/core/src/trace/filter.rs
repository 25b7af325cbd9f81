use super::AlignedTrace;
use crate::error::{Error, Result};

/// Width of the sliding median used by [`despike`].
pub const DESPIKE_WINDOW: usize = 11;
/// Lower bound on the robust scale so flat stretches do not flag rounding noise.
const DESPIKE_MIN_SCALE: f64 = 1e-3;
/// Consistency constant turning a MAD into a Gaussian standard deviation.
const MAD_TO_SD: f64 = 1.4826;
/// Number of moving-average passes in the smoothing cascade.
const CASCADE_PASSES: usize = 3;
/// For a 3-pass box cascade the -3 dB point sits near 0.36 * fs / N.
const CASCADE_CUTOFF_FACTOR: f64 = 0.36;

fn median_in_place(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn despike_channel(x: &[f64], window: usize, z_thresh: f64) -> Vec<f64> {
    let half = window / 2;
    let n = x.len();
    let mut out = x.to_vec();
    let mut buf = Vec::with_capacity(window);
    let mut dev = Vec::with_capacity(window);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        buf.clear();
        buf.extend_from_slice(&x[lo..hi]);
        let med = median_in_place(&mut buf);
        dev.clear();
        dev.extend(x[lo..hi].iter().map(|v| (v - med).abs()));
        let scale = (MAD_TO_SD * median_in_place(&mut dev)).max(DESPIKE_MIN_SCALE);
        if (x[i] - med).abs() > z_thresh * scale {
            out[i] = med;
        }
    }
    out
}

/// Replace samples that sit more than `z_thresh` robust deviations away
/// from the median of their centred window. Every channel, including
/// `yaw_raw`, is cleaned independently.
pub fn despike(trace: &AlignedTrace, z_thresh: f64) -> Result<AlignedTrace> {
    despike_with_window(trace, z_thresh, DESPIKE_WINDOW)
}

pub fn despike_with_window(trace: &AlignedTrace, z_thresh: f64, window: usize) -> Result<AlignedTrace> {
    if !(z_thresh.is_finite() && z_thresh > 0.0) {
        return Err(Error::InvalidParameter(format!("z_thresh must be positive, got {z_thresh}")));
    }
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("despike window must be odd, got {window}")));
    }
    if window > trace.len() {
        return Err(Error::WindowTooLong { window, len: trace.len() });
    }
    let east: Vec<f64> = trace.accel_en.iter().map(|a| a[0]).collect();
    let north: Vec<f64> = trace.accel_en.iter().map(|a| a[1]).collect();
    let east = despike_channel(&east, window, z_thresh);
    let north = despike_channel(&north, window, z_thresh);
    Ok(AlignedTrace {
        t: trace.t.clone(),
        yaw: despike_channel(&trace.yaw, window, z_thresh),
        accel_en: east.into_iter().zip(north).map(|(e, n)| [e, n]).collect(),
        yaw_raw: despike_channel(&trace.yaw_raw, window, z_thresh),
        sample_period: trace.sample_period,
    })
}

/// Odd box length of each pass for the requested cutoff.
pub fn moving_average_len(sample_period: f64, cutoff_hz: f64) -> usize {
    let fs = 1.0 / sample_period;
    let n = (CASCADE_CUTOFF_FACTOR * fs / cutoff_hz).round().max(1.0) as usize;
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

/// Centred moving average; near the edges the window shrinks to the
/// available samples, so constants pass unchanged.
fn box_pass(x: &[f64], len: usize) -> Vec<f64> {
    let half = len / 2;
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn smooth_channel(x: &[f64], len: usize) -> Vec<f64> {
    let mut y = x.to_vec();
    if len > 1 {
        for _ in 0..CASCADE_PASSES {
            y = box_pass(&y, len);
        }
    }
    y
}

/// Zero-phase low-pass of `yaw` and `accel_en`; `yaw_raw` is copied through.
pub fn lowpass_smooth(trace: &AlignedTrace, cutoff_hz: f64) -> Result<AlignedTrace> {
    let nyquist = 0.5 / trace.sample_period;
    if !(cutoff_hz.is_finite() && cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(Error::InvalidParameter(format!("cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz")));
    }
    let len = moving_average_len(trace.sample_period, cutoff_hz);
    let east: Vec<f64> = trace.accel_en.iter().map(|a| a[0]).collect();
    let north: Vec<f64> = trace.accel_en.iter().map(|a| a[1]).collect();
    let east = smooth_channel(&east, len);
    let north = smooth_channel(&north, len);
    Ok(AlignedTrace {
        t: trace.t.clone(),
        yaw: smooth_channel(&trace.yaw, len),
        accel_en: east.into_iter().zip(north).map(|(e, n)| [e, n]).collect(),
        yaw_raw: trace.yaw_raw.clone(),
        sample_period: trace.sample_period,
    })
}
