use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use turnprint_core::config::RunConfig;
use turnprint_core::features::build_feature_vector;
use turnprint_core::pipeline::extract;
use turnprint_core::simgen::{generate_trip_with, DriverProfile, RouteScript, Segment, TripOptions};
use turnprint_core::turns::{interpolate_turn, Direction, TurnSegment};

/// Piecewise-linear function through `knots` spaced `step` apart, sampled every `dt`.
fn sample_linear(knots: &[f64], step: f64, dt: f64) -> Vec<f64> {
    let span = step * (knots.len() - 1) as f64;
    let n = (span / dt).round() as usize;
    (0..=n)
        .map(|i| {
            let x = (i as f64 * dt / step).min((knots.len() - 1) as f64);
            let k = (x.floor() as usize).min(knots.len() - 2);
            let w = x - k as f64;
            knots[k] * (1.0 - w) + knots[k + 1] * w
        })
        .collect()
}

fn segment_at(knots: &[Vec<f64>; 5], step: f64, dt: f64) -> TurnSegment {
    let [yaw, yaw_raw, east, north, heading] = knots.each_ref().map(|k| sample_linear(k, step, dt));
    TurnSegment {
        direction: Direction::Right,
        theta_final: *heading.last().unwrap(),
        start_s: 10.0,
        end_s: 10.0 + step * (knots[0].len() - 1) as f64,
        sample_period: dt,
        yaw,
        yaw_raw,
        accel_en: east.into_iter().zip(north).map(|(e, n)| [e, n]).collect(),
        heading,
        sot_axis: [0.6, 0.8],
    }
}

#[test]
fn features_agree_at_fifty_and_hundred_hz() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let step = 0.02;
    let n = 201;
    let mut knots: [Vec<f64>; 5] = Default::default();
    for series in knots.iter_mut().take(4) {
        *series = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    }
    let mut heading = vec![0.0];
    for _ in 1..n {
        let last = *heading.last().unwrap();
        heading.push(last + rng.random_range(0.0..0.016));
    }
    knots[4] = heading;

    let config = RunConfig::default();
    let slow = segment_at(&knots, step, 0.02);
    let fast = segment_at(&knots, step, 0.01);
    assert_eq!((slow.len(), fast.len()), (201, 401));
    let a = build_feature_vector(&interpolate_turn(&slow, config.turn_len).unwrap()).unwrap();
    let b = build_feature_vector(&interpolate_turn(&fast, config.turn_len).unwrap()).unwrap();
    let worst = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "largest feature difference {worst:e}");
}

#[test]
fn short_clean_turn_is_kept_whole() {
    let profile = DriverProfile {
        onset_frac: 0.0,
        peak_yaw: 1.0,
        yaw_jerk: 3.0,
        maneuver_spread: 0.0,
        ..DriverProfile::default()
    };
    let route = RouteScript::new(vec![
        Segment::Straight { duration: 5.0, speed: 6.0 },
        Segment::LeftTurn { radius: 6.0 },
        Segment::Straight { duration: 5.0, speed: 6.0 },
    ])
    .unwrap();
    let options = TripOptions::new(0.01, 3).noise_free();
    let (trace, truth) = generate_trip_with(&profile, &route, &options).unwrap();
    let scripted = truth.turns().next().unwrap();
    assert!(scripted.end_s - scripted.start_s < 3.0, "turn lasts {:.2} s", scripted.end_s - scripted.start_s);

    let turns = extract(&trace, &RunConfig::default()).unwrap().turns;
    assert_eq!(turns.len(), 1);
    let turn = &turns[0];
    assert_eq!(turn.direction, Direction::Left);
    assert!((turn.theta_final_deg() + 90.0).abs() < 3.0, "{}", turn.theta_final_deg());
    assert!(turn.start_s <= scripted.start_s + 0.3 && turn.end_s >= scripted.end_s - 0.3);
    assert!(turn.end_s - turn.start_s < 3.5);
}
