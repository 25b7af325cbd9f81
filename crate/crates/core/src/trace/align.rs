use super::{AlignedTrace, RawTrace, Vec3};
use crate::error::{Error, Result};

/// Length of the gravity estimation window, seconds.
const GRAVITY_WINDOW_S: f64 = 2.0;
const MIN_GRAVITY_NORM: f64 = 1.0;

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Rotation whose rows are East, North and Up expressed in device coordinates.
///
/// `up` is the gravity direction (mean specific force), `mag` the magnetic
/// field; its horizontal projection defines North.
pub fn geo_rotation(up: &Vec3, mag: &Vec3) -> Result<[Vec3; 3]> {
    let up_norm = norm(up);
    if up_norm < MIN_GRAVITY_NORM {
        return Err(Error::DegenerateGravity(up_norm));
    }
    let u = [up[0] / up_norm, up[1] / up_norm, up[2] / up_norm];
    let along = dot(mag, &u);
    let horizontal = [mag[0] - along * u[0], mag[1] - along * u[1], mag[2] - along * u[2]];
    let h_norm = norm(&horizontal);
    if h_norm < 1e-9 * norm(mag).max(1e-300) || h_norm == 0.0 {
        return Err(Error::InvalidTrace("magnetic field is parallel to gravity".into()));
    }
    let n = [horizontal[0] / h_norm, horizontal[1] / h_norm, horizontal[2] / h_norm];
    let e = cross(&n, &u);
    Ok([e, n, u])
}

fn rotate(r: &[Vec3; 3], v: &Vec3) -> Vec3 {
    [dot(&r[0], v), dot(&r[1], v), dot(&r[2], v)]
}

/// Mean accel over the 2 s window with the least variance (the most
/// stationary stretch of the trip).
fn estimate_up(trace: &RawTrace) -> Vec3 {
    let samples = trace.samples();
    let n = samples.len();
    let w = ((GRAVITY_WINDOW_S / trace.sample_period()).round() as usize).clamp(1, n);

    let mut sum = vec![[0.0f64; 3]; n + 1];
    let mut sq = vec![0.0f64; n + 1];
    for (i, s) in samples.iter().enumerate() {
        for k in 0..3 {
            sum[i + 1][k] = sum[i][k] + s.accel[k];
        }
        sq[i + 1] = sq[i] + dot(&s.accel, &s.accel);
    }
    let mut best = (f64::INFINITY, 0usize);
    for start in 0..=(n - w) {
        let end = start + w;
        let mean: Vec3 = std::array::from_fn(|k| (sum[end][k] - sum[start][k]) / w as f64);
        let var = (sq[end] - sq[start]) / w as f64 - dot(&mean, &mean);
        if var < best.0 - 1e-12 {
            best = (var, start);
        }
    }
    let start = best.1;
    std::array::from_fn(|k| (sum[start + w][k] - sum[start][k]) / w as f64)
}

/// Rotate device readings into East-North-Up and keep yaw plus horizontal
/// acceleration. Traces flagged as already aligned pass through unrotated.
pub fn align_to_geo_frame(trace: &RawTrace) -> Result<AlignedTrace> {
    let samples = trace.samples();
    let n = samples.len();
    let mut out = AlignedTrace {
        t: Vec::with_capacity(n),
        yaw: Vec::with_capacity(n),
        accel_en: Vec::with_capacity(n),
        yaw_raw: Vec::with_capacity(n),
        sample_period: trace.sample_period(),
    };

    if trace.already_aligned() {
        for s in samples {
            out.t.push(s.t);
            out.yaw.push(-s.gyro[2]);
            out.accel_en.push([s.accel[0], s.accel[1]]);
        }
        out.yaw_raw = out.yaw.clone();
        return Ok(out);
    }

    if !trace.has_magnetometer() {
        return Err(Error::MissingMagnetometer);
    }
    let up = estimate_up(trace);
    for s in samples {
        let mag = s.mag.ok_or(Error::MissingMagnetometer)?;
        let r = geo_rotation(&up, &mag)?;
        let gyro = rotate(&r, &s.gyro);
        let accel = rotate(&r, &s.accel);
        out.t.push(s.t);
        out.yaw.push(-gyro[2]);
        out.accel_en.push([accel[0], accel[1]]);
    }
    out.yaw_raw = out.yaw.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::ImuSample;
    use proptest::prelude::*;

    const G: f64 = 9.81;

    fn rot_z(angle: f64) -> [Vec3; 3] {
        let (s, c) = angle.sin_cos();
        [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
    }

    fn mat_vec(m: &[Vec3; 3], v: &Vec3) -> Vec3 {
        rotate(m, v)
    }

    fn transpose(m: &[Vec3; 3]) -> [Vec3; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| m[j][i]))
    }

    #[test]
    fn already_aligned_is_identity() {
        let samples: Vec<_> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.01;
                ImuSample::new(t, [0.1, 0.2, 0.3 * t.sin()], [0.7 * t, -0.4, G])
            })
            .collect();
        let trace = RawTrace::new(samples.clone(), 0.01, true).unwrap();
        let aligned = align_to_geo_frame(&trace).unwrap();
        for (i, s) in samples.iter().enumerate() {
            assert_eq!(aligned.yaw[i].to_bits(), (-s.gyro[2]).to_bits());
            assert_eq!(aligned.accel_en[i][0].to_bits(), s.accel[0].to_bits());
            assert_eq!(aligned.accel_en[i][1].to_bits(), s.accel[1].to_bits());
        }
        assert_eq!(aligned.yaw, aligned.yaw_raw);
    }

    #[test]
    fn device_rotated_about_vertical_is_undone() {
        // Device frame = ENU rotated by +90 deg about Up. Readings in the
        // device frame are R^T * v_enu.
        let device_from_enu = transpose(&rot_z(std::f64::consts::FRAC_PI_2));
        let mag_enu = [0.0, 20.0, -40.0];
        let moving = |t: f64| t >= 2.5;
        let samples: Vec<_> = (0..600)
            .map(|i| {
                let t = i as f64 * 0.01;
                let (gyro_enu, acc_enu) = if moving(t) {
                    ([0.0, 0.0, -0.3 * (t * 2.0).sin()], [0.5 * t.cos(), 1.5, G])
                } else {
                    ([0.0; 3], [0.0, 0.0, G])
                };
                ImuSample {
                    t,
                    gyro: mat_vec(&device_from_enu, &gyro_enu),
                    accel: mat_vec(&device_from_enu, &acc_enu),
                    mag: Some(mat_vec(&device_from_enu, &mag_enu)),
                }
            })
            .collect();
        let trace = RawTrace::new(samples, 0.01, false).unwrap();
        let aligned = align_to_geo_frame(&trace).unwrap();
        for i in 0..600 {
            let t = i as f64 * 0.01;
            let (yaw, east, north) =
                if moving(t) { (0.3 * (t * 2.0).sin(), 0.5 * t.cos(), 1.5) } else { (0.0, 0.0, 0.0) };
            assert!((aligned.yaw[i] - yaw).abs() < 1e-9);
            assert!((aligned.accel_en[i][0] - east).abs() < 1e-9, "east at {i}");
            assert!((aligned.accel_en[i][1] - north).abs() < 1e-9, "north at {i}");
        }
    }

    #[test]
    fn rotation_about_z_with_level_device_is_exact() {
        let device_from_enu = transpose(&rot_z(std::f64::consts::FRAC_PI_2));
        let r = geo_rotation(&[0.0, 0.0, G], &mat_vec(&device_from_enu, &[0.0, 25.0, -30.0])).unwrap();
        let acc_enu = [1.0, 2.0, G];
        let back = rotate(&r, &mat_vec(&device_from_enu, &acc_enu));
        for k in 0..3 {
            assert!((back[k] - acc_enu[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_trace_has_no_yaw_or_horizontal_accel() {
        let samples: Vec<_> = (0..300)
            .map(|i| ImuSample {
                t: i as f64 * 0.01,
                gyro: [0.0; 3],
                accel: [0.0, 0.0, G],
                mag: Some([0.0, 22.0, -41.0]),
            })
            .collect();
        let aligned = align_to_geo_frame(&RawTrace::new(samples, 0.01, false).unwrap()).unwrap();
        assert!(aligned.yaw.iter().all(|y| *y == 0.0));
        assert!(aligned.accel_en.iter().all(|a| a[0].abs() < 1e-12 && a[1].abs() < 1e-12));
    }

    #[test]
    fn missing_magnetometer_and_free_fall_are_errors() {
        let samples: Vec<_> = (0..10).map(|i| ImuSample::new(i as f64 * 0.01, [0.0; 3], [0.0, 0.0, G])).collect();
        let trace = RawTrace::new(samples, 0.01, false).unwrap();
        assert!(matches!(align_to_geo_frame(&trace), Err(Error::MissingMagnetometer)));

        let falling: Vec<_> = (0..10)
            .map(|i| ImuSample { t: i as f64 * 0.01, gyro: [0.0; 3], accel: [0.0; 3], mag: Some([0.0, 20.0, -40.0]) })
            .collect();
        let trace = RawTrace::new(falling, 0.01, false).unwrap();
        assert!(matches!(align_to_geo_frame(&trace), Err(Error::DegenerateGravity(_))));
    }

    proptest! {
        #[test]
        fn rotation_preserves_norms(
            up in prop::array::uniform3(-10.0f64..10.0),
            mag in prop::array::uniform3(-50.0f64..50.0),
            v in prop::array::uniform3(-20.0f64..20.0),
        ) {
            prop_assume!(norm(&up) > 2.0);
            let u = up.map(|x| x / norm(&up));
            let along = dot(&mag, &u);
            prop_assume!(norm(&[mag[0] - along * u[0], mag[1] - along * u[1], mag[2] - along * u[2]]) > 1.0);
            let r = geo_rotation(&up, &mag).unwrap();
            let w = rotate(&r, &v);
            prop_assert!((norm(&w) - norm(&v)).abs() < 1e-9);
        }
    }
}
