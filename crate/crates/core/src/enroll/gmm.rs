//! Diagonal-covariance Gaussian mixture fitted by EM.

use crate::error::{Error, Result};
use crate::seed;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const GMM_VARIANCE_FLOOR: f64 = 1e-6;
pub const GMM_TOLERANCE: f64 = 1e-6;
pub const GMM_MAX_ITER: usize = 200;
const LN_2PI: f64 = 1.837_877_066_409_345_3;
const MIN_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub seed: u64,
    pub iterations: usize,
    /// Total training log likelihood at the returned parameters.
    pub log_likelihood: f64,
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn component_log_density(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    x.iter().zip(mean).zip(var).map(|((xi, m), v)| -0.5 * (LN_2PI + v.ln()) - (xi - m) * (xi - m) / (2.0 * v)).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first centre uniform, then proportional to squared
/// distance from the nearest chosen centre.
fn kmeans_pp(data: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut centers = vec![data[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = data.iter().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(data[pick].clone());
        for (d, x) in nearest.iter_mut().zip(data) {
            *d = d.min(sq_dist(x, &centers[centers.len() - 1]));
        }
    }
    centers
}

impl GmmModel {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    fn weighted_log_densities(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.weights[k].ln() + component_log_density(x, &self.means[k], &self.variances[k]);
        }
    }

    /// Log density of one vector under the mixture.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let mut buf = vec![0.0; self.n_components()];
        self.weighted_log_densities(x, &mut buf);
        Ok(log_sum_exp(&buf))
    }
}

/// Fit a `k`-component diagonal GMM. Stops when the total log likelihood
/// improves by less than 1e-6 or after 200 iterations.
pub fn fit_gmm(data: &[Vec<f64>], k: usize, seed: u64) -> Result<GmmModel> {
    if k == 0 {
        return Err(Error::InvalidParameter("GMM needs at least one component".into()));
    }
    if data.len() < k {
        return Err(Error::InsufficientData(format!("{} vectors cannot support {k} components", data.len())));
    }
    let dim = data[0].len();
    if let Some(bad) = data.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
    }
    let n = data.len();
    let mut rng = seed::rng(seed::derive(seed, "gmm-init"));

    let global_mean: Vec<f64> = (0..dim).map(|d| data.iter().map(|x| x[d]).sum::<f64>() / n as f64).collect();
    let global_var: Vec<f64> = (0..dim)
        .map(|d| {
            let v = data.iter().map(|x| (x[d] - global_mean[d]).powi(2)).sum::<f64>() / n as f64;
            v.max(GMM_VARIANCE_FLOOR)
        })
        .collect();
    let means = if k == 1 { vec![global_mean] } else { kmeans_pp(data, k, &mut rng) };
    let mut model = GmmModel {
        weights: vec![1.0 / k as f64; k],
        means,
        variances: vec![global_var; k],
        seed,
        iterations: 0,
        log_likelihood: f64::NEG_INFINITY,
    };

    let mut resp = vec![vec![0.0; k]; n];
    let mut prev = f64::NEG_INFINITY;
    for iter in 0..GMM_MAX_ITER {
        // E-step.
        let mut total = 0.0;
        for (x, r) in data.iter().zip(resp.iter_mut()) {
            model.weighted_log_densities(x, r);
            let lse = log_sum_exp(r);
            total += lse;
            r.iter_mut().for_each(|v| *v = (*v - lse).exp());
        }
        model.log_likelihood = total;
        model.iterations = iter;
        if total - prev < GMM_TOLERANCE {
            break;
        }
        prev = total;

        // M-step.
        for c in 0..k {
            let nk: f64 = resp.iter().map(|r| r[c]).sum();
            if nk < MIN_WEIGHT * n as f64 {
                model.weights[c] = MIN_WEIGHT;
                continue;
            }
            model.weights[c] = nk / n as f64;
            let mean: Vec<f64> =
                (0..dim).map(|d| data.iter().zip(&resp).map(|(x, r)| r[c] * x[d]).sum::<f64>() / nk).collect();
            model.variances[c] = (0..dim)
                .map(|d| {
                    let v = data.iter().zip(&resp).map(|(x, r)| r[c] * (x[d] - mean[d]).powi(2)).sum::<f64>() / nk;
                    v.max(GMM_VARIANCE_FLOOR)
                })
                .collect();
            model.means[c] = mean;
        }
        let sum: f64 = model.weights.iter().sum();
        model.weights.iter_mut().for_each(|w| *w /= sum);
    }
    Ok(model)
}

/// Mean per-vector log density, so the value does not grow with trip length.
pub fn trip_loglikelihood(model: &GmmModel, vectors: &[Vec<f64>]) -> Result<f64> {
    if vectors.is_empty() {
        return Err(Error::EmptyTrip);
    }
    let mut total = 0.0;
    for v in vectors {
        total += model.log_density(v)?;
    }
    Ok(total / vectors.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn cluster(center: &[f64], sd: f64, n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        let noise = Normal::new(0.0, sd).unwrap();
        (0..n).map(|_| center.iter().map(|c| c + noise.sample(rng)).collect()).collect()
    }

    #[test]
    fn single_component_is_the_sample_mle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let data = cluster(&[1.0, -2.0, 0.5], 0.7, 200, &mut rng);
        let gmm = fit_gmm(&data, 1, 3).unwrap();
        for d in 0..3 {
            let mean = data.iter().map(|x| x[d]).sum::<f64>() / 200.0;
            let var = data.iter().map(|x| (x[d] - mean).powi(2)).sum::<f64>() / 200.0;
            assert!((gmm.means[0][d] - mean).abs() < 1e-12);
            assert!((gmm.variances[0][d] - var).abs() < 1e-12);
        }
        assert_eq!(gmm.weights, vec![1.0]);
        assert!(gmm.iterations <= 1);
    }

    #[test]
    fn two_separated_clusters_are_recovered() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let a = [0.0, 0.0, 0.0, 0.0];
        let b = [8.0, -6.0, 5.0, 9.0];
        let mut data = cluster(&a, 1.0, 300, &mut rng);
        data.extend(cluster(&b, 1.0, 300, &mut rng));
        let gmm = fit_gmm(&data, 2, 11).unwrap();
        for center in [&a, &b] {
            let closest = gmm.means.iter().map(|m| sq_dist(m, center).sqrt()).fold(f64::INFINITY, f64::min);
            // 0.1 cluster sigma per dimension, over 4 dimensions.
            assert!(closest < 0.1 * 2.0, "{closest}");
        }
        assert!((gmm.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_data_floors_variances() {
        let data = vec![vec![3.0, 3.0]; 10];
        let gmm = fit_gmm(&data, 2, 0).unwrap();
        assert!(gmm.variances.iter().flatten().all(|v| *v == GMM_VARIANCE_FLOOR));
        assert!(gmm.log_likelihood.is_finite());
    }

    #[test]
    fn refit_is_deterministic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let data = cluster(&[0.0; 5], 1.0, 60, &mut rng);
        assert_eq!(fit_gmm(&data, 2, 9).unwrap(), fit_gmm(&data, 2, 9).unwrap());
    }

    #[test]
    fn density_falls_away_from_training_mass() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let data = cluster(&[1.0, 2.0, 3.0], 0.5, 80, &mut rng);
        let gmm = fit_gmm(&data, 2, 1).unwrap();
        let shifted: Vec<Vec<f64>> = data.iter().map(|x| x.iter().map(|v| v + 10.0 * 0.5).collect()).collect();
        assert!(trip_loglikelihood(&gmm, &data).unwrap() >= trip_loglikelihood(&gmm, &shifted).unwrap());
        assert!(trip_loglikelihood(&gmm, &[vec![0.0; 4]]).is_err());
    }

    #[test]
    fn too_few_vectors() {
        assert!(fit_gmm(&[vec![1.0]], 2, 0).is_err());
    }
}
