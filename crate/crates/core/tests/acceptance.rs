//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test --release -p turnprint-core --test acceptance`.

use rand::Rng;
use std::process::ExitCode;
use std::time::{Duration, Instant};
use turnprint_core::classify::{argmax, fuse_log_scores, ModelKind};
use turnprint_core::config::RunConfig;
use turnprint_core::enroll::{EnrollConfig, ProfileTable};
use turnprint_core::eval::{
    factor_analysis, interpolation_ablation, label_noise_sweep, maneuver_report, simulate_corpus, trip_curve, Corpus,
    CorpusSpec, FactorSetup,
};
use turnprint_core::features::{build_feature_vector, feature_names, PERCENTILES, VECTOR_LEN};
use turnprint_core::label::DriverLabel;
use turnprint_core::pipeline::{extract, trace_features};
use turnprint_core::seed;
use turnprint_core::simgen::{
    generate_trip, generate_trip_with, population, random_route, DriverProfile, ManeuverKind, ProfileRanges, RouteMix,
    SensorNoise, TripOptions,
};
use turnprint_core::turns::{heading_series, interpolate_turn, Direction, TurnSegment};

const ROOT_SEED: u64 = 2024;
const DT: f64 = 0.01;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn heading_exactness() -> Outcome {
    let start = Instant::now();
    let mut worst_const = 0.0f64;
    for (omega, n) in [(0.3, 101usize), (-1.7, 501), (0.05, 2001), (2.9, 37)] {
        let yaw = vec![omega; n];
        let d = (n - 1) as f64 * DT;
        let theta = heading_series(&yaw, DT);
        worst_const = worst_const.max((theta[n - 1] - omega * d).abs());
    }
    let mut rng = seed::rng(seed::derive(ROOT_SEED, "c1"));
    let mut worst_series = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..2000);
        let yaw: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let theta = heading_series(&yaw, DT);
        let mut acc = 0.0;
        for k in 0..n {
            if k > 0 {
                acc += yaw[k] * DT;
            }
            worst_series = worst_series.max((theta[k] - acc).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_const <= 1e-9 && worst_series <= 1e-12 && within(elapsed, 1.0),
        format!("constant err {worst_const:.1e}, series err {worst_series:.1e}, {elapsed:.2?}"),
    )
}

fn extraction_oracle() -> Outcome {
    let start = Instant::now();
    let config = RunConfig::default();
    let profiles = population(50, &ProfileRanges::default(), seed::derive(ROOT_SEED, "c2-pop"));
    let mix = RouteMix { turns: 8, ..RouteMix::default() }.with_distractors();
    let (mut scripted, mut extracted, mut matched, mut distractors, mut admitted) = (0, 0, 0, 0, 0);
    for (i, profile) in profiles.iter().enumerate() {
        let trip_seed = seed::derive_indexed(ROOT_SEED, "c2-trip", i as u64);
        let route = random_route(&mix, trip_seed);
        let options = TripOptions::new(DT, trip_seed).noise_free();
        let (trace, truth) = generate_trip_with(&profile.noise_free(), &route, &options).unwrap();
        let turns = extract(&trace, &config).unwrap().turns;
        scripted += truth.turns().count();
        distractors +=
            truth.maneuvers.iter().filter(|m| matches!(m.kind, ManeuverKind::LaneChange | ManeuverKind::UTurn)).count();
        extracted += turns.len();
        let mut used = vec![false; truth.maneuvers.len()];
        for turn in &turns {
            let mid = 0.5 * (turn.start_s + turn.end_s);
            let Some(j) = truth.maneuvers.iter().position(|m| m.start_s <= mid && mid <= m.end_s) else {
                continue;
            };
            let expected = match truth.maneuvers[j].kind {
                ManeuverKind::LeftTurn => Some(Direction::Left),
                ManeuverKind::RightTurn => Some(Direction::Right),
                ManeuverKind::LaneChange | ManeuverKind::UTurn => {
                    admitted += 1;
                    None
                }
                _ => None,
            };
            if expected == Some(turn.direction) && !used[j] {
                used[j] = true;
                matched += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        matched == scripted && matched == extracted && admitted == 0 && within(elapsed, 10.0),
        format!(
            "{matched}/{scripted} turns recalled, {matched}/{extracted} precise, {admitted} of {distractors} distractors admitted, {elapsed:.2?}"
        ),
    )
}

fn oracle_percentile(x: &[f64], p: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (s.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    s[lo] + (rank - lo as f64) * (s[hi] - s[lo])
}

fn oracle_autocorr(x: &[f64], k: usize) -> f64 {
    let n = x.len();
    let mut mean = 0.0;
    for v in x {
        mean += v;
    }
    mean /= n as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        den += (x[i] - mean) * (x[i] - mean);
        for j in 0..n {
            if j == i + k {
                num += (x[i] - mean) * (x[j] - mean);
            }
        }
    }
    if den < 1e-12 {
        0.0
    } else {
        num / den
    }
}

fn oracle_vector(turn: &TurnSegment) -> Vec<f64> {
    let f1: Vec<f64> = (0..turn.len())
        .map(|n| {
            let (s, c) = turn.heading[n].sin_cos();
            let [ax, ay] = turn.sot_axis;
            let h = [ax * c + ay * s, -ax * s + ay * c];
            (turn.accel_en[n][0] * h[0] + turn.accel_en[n][1] * h[1]) * s
        })
        .collect();
    let diff = |x: &[f64]| x.windows(2).map(|w| w[1] - w[0]).collect::<Vec<f64>>();
    let n = turn.len();
    let stage = |s: usize| s * n / 5..(s + 1) * n / 5;
    let mut out = Vec::new();
    for f in 0..3 {
        for s in 0..5 {
            let series = match f {
                0 => f1[stage(s)].to_vec(),
                1 => diff(&f1[stage(s)]),
                _ => diff(&turn.yaw_raw[stage(s)]),
            };
            out.extend(PERCENTILES.iter().map(|p| oracle_percentile(&series, *p)));
            out.extend((1..=10).map(|k| oracle_autocorr(&series, k)));
        }
    }
    out
}

fn feature_contract() -> Outcome {
    let config = RunConfig::default();
    let names = feature_names();
    let mut names_ok = names.len() == VECTOR_LEN;
    for f in 0..3 {
        for s in 0..5 {
            names_ok &= names[(f * 5 + s) * 15] == format!("f{}_s{}_p10", f + 1, s + 1);
            names_ok &= names[(f * 5 + s) * 15 + 14] == format!("f{}_s{}_ac10", f + 1, s + 1);
        }
    }
    let profiles = population(4, &ProfileRanges::default(), seed::derive(ROOT_SEED, "c3-pop"));
    let (mut turns_seen, mut all_225, mut worst) = (0, true, 0.0f64);
    for (i, p) in profiles.iter().enumerate() {
        let s = seed::derive_indexed(ROOT_SEED, "c3-trip", i as u64);
        let (trace, _) = generate_trip(p, &random_route(&RouteMix::default(), s), DT, s).unwrap();
        for turn in extract(&trace, &config).unwrap().turns {
            let turn = interpolate_turn(&turn, config.turn_len).unwrap();
            let v = build_feature_vector(&turn).unwrap();
            all_225 &= v.dim() == VECTOR_LEN;
            for (a, b) in v.values.iter().zip(oracle_vector(&turn)) {
                worst = worst.max((a - b).abs());
            }
            turns_seen += 1;
        }
    }
    let flat = TurnSegment {
        direction: Direction::Right,
        theta_final: 0.0,
        start_s: 0.0,
        end_s: 0.99,
        sample_period: DT,
        yaw: vec![0.4; 100],
        yaw_raw: vec![0.4; 100],
        accel_en: vec![[0.0, 0.0]; 100],
        heading: vec![0.0; 100],
        sot_axis: [0.0, 1.0],
    };
    let fv = build_feature_vector(&flat).unwrap();
    let degenerate_zero = (0..15).all(|b| fv.values[b * 15 + 5..b * 15 + 15].iter().all(|&v| v == 0.0));
    outcome(
        names_ok && all_225 && turns_seen > 0 && worst <= 1e-12 && degenerate_zero,
        format!("{turns_seen} turns x {VECTOR_LEN} values, max oracle err {worst:.1e}, degenerate entries zero: {degenerate_zero}"),
    )
}

fn map_equivalence() -> Outcome {
    let mut rng = seed::rng(seed::derive(ROOT_SEED, "c4"));
    let mut agree = 0;
    for _ in 0..200 {
        let classes = rng.random_range(3..=5);
        let turns = rng.random_range(1..=5);
        let raw: Vec<f64> = (0..classes).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let priors: Vec<f64> = raw.iter().map(|p| p / total).collect();
        let lik: Vec<Vec<f64>> =
            (0..turns).map(|_| (0..classes).map(|_| rng.random_range(1e-3..1.0)).collect()).collect();
        let product: Vec<f64> = (0..classes).map(|k| priors[k] * lik.iter().map(|t| t[k]).product::<f64>()).collect();
        let mut brute = 0;
        for k in 1..classes {
            if product[k] > product[brute] {
                brute = k;
            }
        }
        let log_priors: Vec<f64> = priors.iter().map(|p| p.ln()).collect();
        let log_lik: Vec<Vec<f64>> = lik.iter().map(|t| t.iter().map(|p| p.ln()).collect()).collect();
        agree += usize::from(argmax(&fuse_log_scores(&log_priors, &log_lik)) == brute);
    }
    outcome(agree == 200, format!("{agree}/200 cases agree"))
}

fn fingerprint_corpus(config: &RunConfig) -> Corpus {
    let spec = CorpusSpec {
        drivers: population(12, &ProfileRanges::default(), seed::derive(ROOT_SEED, "population")),
        trips_per_driver: 8,
        route: RouteMix { turns: 12, ..RouteMix::default() },
        trip: TripOptions::new(DT, 0),
        shared_routes: false,
    };
    simulate_corpus(&spec, config, seed::derive(ROOT_SEED, "corpus")).unwrap()
}

fn rf_accuracy(corpus: &Corpus, config: &RunConfig) -> f64 {
    let data = corpus.vectors(config, true).unwrap();
    maneuver_report(&data, ModelKind::RandomForest, config).unwrap().accuracy
}

fn random_subset(drivers: &[DriverLabel], size: usize, draw: u64) -> Vec<DriverLabel> {
    let mut rng = seed::rng(seed::derive_indexed(ROOT_SEED, &format!("subset/{size}"), draw));
    rand::seq::index::sample(&mut rng, drivers.len(), size).into_iter().map(|i| drivers[i].clone()).collect()
}

const SUBSET_DRAWS: u64 = 4;

fn synthetic_fingerprinting(corpus: &Corpus, config: &RunConfig, sim_time: Duration) -> Outcome {
    let start = Instant::now();
    let drivers = corpus.drivers();
    let min_turns = drivers
        .iter()
        .map(|d| corpus.trips.iter().filter(|t| &t.driver == d).map(|t| t.turns.len()).sum::<usize>())
        .min()
        .unwrap_or(0);
    let acc12 = rf_accuracy(corpus, config);
    let mean_over = |size: usize| {
        (0..SUBSET_DRAWS)
            .map(|draw| rf_accuracy(&corpus.restricted_to(&random_subset(&drivers, size, draw)), config))
            .sum::<f64>()
            / SUBSET_DRAWS as f64
    };
    let acc5 = mean_over(5);
    let acc8 = mean_over(8);
    let elapsed = start.elapsed() + sim_time;
    outcome(
        drivers.len() == 12 && min_turns >= 40 && acc12 >= 0.85 && acc5 >= acc8 && acc8 >= acc12 && within(elapsed, 300.0),
        format!(
            "{} drivers, min {min_turns} turns each; RF accuracy 12: {acc12:.3}, 8: {acc8:.3}, 5: {acc5:.3} (subset means over {SUBSET_DRAWS} draws), {elapsed:.1?}",
            drivers.len()
        ),
    )
}

fn trip_improvement(corpus: &Corpus, config: &RunConfig) -> Outcome {
    let start = Instant::now();
    let data = corpus.vectors(config, true).unwrap();
    let curve = trip_curve(&data, config, 500, 8).unwrap();
    let (one, eight) = (curve[0].accuracy, curve[7].accuracy);
    let elapsed = start.elapsed();
    outcome(
        curve[0].turns == 1 && curve[7].turns == 8 && eight >= 0.95 && eight - one >= 0.05 && within(elapsed, 600.0),
        format!("1 turn {one:.3}, 8 turns {eight:.3}, gain {:.1} points, {elapsed:.1?}", 100.0 * (eight - one)),
    )
}

fn factor_pattern(config: &RunConfig) -> Outcome {
    let drivers = population(2, &ProfileRanges::default(), seed::derive(ROOT_SEED, "c7-pop"));
    let setup = FactorSetup {
        drivers: [drivers[0], drivers[1]],
        cars: [SensorNoise::default(), SensorNoise { gyro_sd: 0.0045, accel_sd: 0.035, mag_sd: 0.25 }],
        route: RouteMix { turns: 12, ..RouteMix::default() },
        trips_per_side: 4,
        sample_period: DT,
    };
    let cases = factor_analysis(&setup, config, seed::derive(ROOT_SEED, "c7")).unwrap();
    let pass =
        cases.iter().all(|c| if c.differentiated.contains("driver") { c.accuracy >= 0.90 } else { c.accuracy <= 0.70 });
    let detail = cases.iter().map(|c| format!("{} {} {:.2}", c.name, c.differentiated, c.accuracy)).collect::<Vec<_>>();
    outcome(pass && cases.len() == 6, detail.join(", "))
}

fn gate_trip(
    profile: &DriverProfile,
    pair: u64,
    j: u64,
    config: &RunConfig,
) -> Vec<turnprint_core::features::FeatureVector> {
    let mix = RouteMix { turns: 8, ..RouteMix::default() };
    let route = random_route(&mix, seed::derive_indexed(pair, "gate-route", j));
    let (trace, _) = generate_trip(profile, &route, DT, seed::derive_indexed(pair, "gate-trip", j)).unwrap();
    trace_features(&trace, config).unwrap()
}

fn gmm_gate(config: &RunConfig) -> Outcome {
    let mut ok = 0;
    for pair in 0..100u64 {
        let pair_seed = seed::derive_indexed(ROOT_SEED, "c8-pair", pair);
        let pop = population(2, &ProfileRanges::default(), pair_seed);
        let enrol: Vec<_> = (0..3).flat_map(|j| gate_trip(&pop[0], pair_seed, j, config)).collect();
        let ec = EnrollConfig { components: config.gmm_components, threshold: config.gate_threshold, seed: pair_seed };
        let mut table = ProfileTable::new();
        let label = table.assign_or_new_driver(&enrol, &ec).unwrap().label;
        let entry = table.get(&label).unwrap();
        let same = entry.score(&gate_trip(&pop[0], pair_seed, 3, config)).unwrap();
        let other = entry.score(&gate_trip(&pop[1], pair_seed, 4, config)).unwrap();
        ok += usize::from(same >= config.gate_threshold && other < config.gate_threshold);
    }
    outcome(ok >= 95, format!("{ok}/100 pairs gated correctly"))
}

fn label_robustness(corpus: &Corpus, config: &RunConfig) -> Outcome {
    let five: Vec<DriverLabel> = corpus.drivers().into_iter().take(5).collect();
    let data = corpus.restricted_to(&five).vectors(config, true).unwrap();
    let sweep = label_noise_sweep(&data, ModelKind::RandomForest, &[0.0, 20.0], config).unwrap();
    let (clean, noisy) = (sweep[0].1, sweep[1].1);
    outcome(noisy >= 0.8 * clean, format!("p_err 0: {clean:.3}, p_err 20: {noisy:.3} ({:.2}x)", noisy / clean))
}

fn ablation(config: &RunConfig) -> Outcome {
    let spec = CorpusSpec {
        drivers: population(12, &ProfileRanges::default(), seed::derive(ROOT_SEED, "population")),
        trips_per_driver: 4,
        route: RouteMix { turns: 12, left_radius: (3.0, 30.0), right_radius: (9.0, 11.0), ..RouteMix::default() },
        trip: TripOptions::new(DT, 0),
        shared_routes: false,
    };
    let corpus = simulate_corpus(&spec, config, seed::derive(ROOT_SEED, "c10")).unwrap();
    let r = interpolation_ablation(&corpus, config).unwrap();
    outcome(
        r.interpolated.overall >= r.native.overall && r.left_gap() >= r.right_gap(),
        format!(
            "interpolated {:.3} vs native {:.3}; left gap {:+.3}, right gap {:+.3}",
            r.interpolated.overall,
            r.native.overall,
            r.left_gap(),
            r.right_gap()
        ),
    )
}

fn main() -> ExitCode {
    let config = RunConfig::default();
    let mut failed = 0;
    let mut report = |n: usize, name: &str, o: Outcome| {
        println!("criterion {n:>2} {:<28} {}  {}", name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    };
    report(1, "heading exactness", heading_exactness());
    report(2, "turn extraction oracle", extraction_oracle());
    report(3, "feature contract", feature_contract());
    report(4, "MAP fusion equivalence", map_equivalence());
    let start = Instant::now();
    let corpus = fingerprint_corpus(&config);
    let sim_time = start.elapsed();
    report(5, "synthetic fingerprinting", synthetic_fingerprinting(&corpus, &config, sim_time));
    report(6, "trip-based improvement", trip_improvement(&corpus, &config));
    report(7, "factor-analysis pattern", factor_pattern(&config));
    report(8, "GMM gate", gmm_gate(&config));
    report(9, "erroneous-label robustness", label_robustness(&corpus, &config));
    report(10, "interpolation ablation", ablation(&config));
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
