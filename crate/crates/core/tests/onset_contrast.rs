use turnprint_core::config::RunConfig;
use turnprint_core::features::{build_feature_vector, percentile, PERCENTILES, STATS_PER_BLOCK};
use turnprint_core::pipeline::extract;
use turnprint_core::simgen::{generate_trip, random_route, DriverProfile, RouteMix};
use turnprint_core::turns::interpolate_turn;

const TURNS: usize = 30;

struct Sample {
    /// Stage-1 F1 autocorrelations, lags 1..=10.
    stage1_ac: Vec<Vec<f64>>,
    /// Stage-5 percentiles of |yaw|.
    stage5_yaw: Vec<Vec<f64>>,
}

fn sample(onset: f64) -> Sample {
    let config = RunConfig::default();
    let profile = DriverProfile { onset_frac: onset, ..DriverProfile::default() };
    let mut out = Sample { stage1_ac: Vec::new(), stage5_yaw: Vec::new() };
    let mut seed = 0;
    while out.stage1_ac.len() < TURNS {
        let route = random_route(&RouteMix { turns: 10, ..RouteMix::default() }, seed);
        let (trace, _) = generate_trip(&profile, &route, 0.01, seed).unwrap();
        for turn in extract(&trace, &config).unwrap().turns {
            let turn = interpolate_turn(&turn, config.turn_len).unwrap();
            let v = build_feature_vector(&turn).unwrap();
            out.stage1_ac.push(v.values[PERCENTILES.len()..STATS_PER_BLOCK].to_vec());
            let last = &turn.yaw[config.turn_len * 4 / 5..];
            let abs: Vec<f64> = last.iter().map(|y| y.abs()).collect();
            out.stage5_yaw.push(PERCENTILES.iter().map(|&p| percentile(&abs, p).unwrap()).collect());
        }
        seed += 1;
    }
    out.stage1_ac.truncate(TURNS);
    out.stage5_yaw.truncate(TURNS);
    out
}

fn mean_sd(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let dim = rows[0].len();
    let mean: Vec<f64> = (0..dim).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let sd =
        (0..dim).map(|j| (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()).collect();
    (mean, sd)
}

#[test]
fn late_turners_differ_in_stage_one_but_not_stage_five() {
    let early = sample(0.1);
    let late = sample(0.5);

    let (ea, es) = mean_sd(&early.stage1_ac);
    let (la, ls) = mean_sd(&late.stage1_ac);
    let separated = (0..ea.len()).filter(|&k| (ea[k] - la[k]).abs() > es[k].max(ls[k])).count();
    assert!(separated >= 2, "stage-1 autocorrelations: early {ea:.3?} late {la:.3?}, sd {es:.3?} / {ls:.3?}");
    let block_gap = ea.iter().zip(&la).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let within = (es.iter().chain(&ls).map(|s| s * s).sum::<f64>() / (2 * ea.len()) as f64).sqrt();
    assert!(block_gap > within, "block gap {block_gap:.3} vs within sd {within:.3}");

    let (ey, eys) = mean_sd(&early.stage5_yaw);
    let (ly, lys) = mean_sd(&late.stage5_yaw);
    for q in 0..ey.len() {
        let pooled = ((eys[q].powi(2) + lys[q].powi(2)) / 2.0).sqrt();
        assert!((ey[q] - ly[q]).abs() < 0.5 * pooled, "stage-5 yaw p{}: {:.3} vs {:.3}", PERCENTILES[q], ey[q], ly[q]);
    }
}
