use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const VARIANCE_FLOOR: f64 = 1e-9;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Gaussian naive Bayes over dense features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub log_prior: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
}

impl GaussianNb {
    /// `y[i]` indexes the class of row `x[i]`; every class needs a row.
    pub fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<Self> {
        let dim = x.first().map_or(0, Vec::len);
        let mut count = vec![0usize; n_classes];
        let mut mean = vec![vec![0.0; dim]; n_classes];
        for (row, &c) in x.iter().zip(y) {
            count[c] += 1;
            for (m, v) in mean[c].iter_mut().zip(row) {
                *m += v;
            }
        }
        if let Some(c) = count.iter().position(|&n| n == 0) {
            return Err(Error::InsufficientData(format!("class {c} has no samples")));
        }
        for (m, &n) in mean.iter_mut().zip(&count) {
            m.iter_mut().for_each(|v| *v /= n as f64);
        }
        let mut var = vec![vec![0.0; dim]; n_classes];
        for (row, &c) in x.iter().zip(y) {
            for ((s, v), m) in var[c].iter_mut().zip(row).zip(&mean[c]) {
                *s += (v - m) * (v - m);
            }
        }
        for (s, &n) in var.iter_mut().zip(&count) {
            s.iter_mut().for_each(|v| *v = (*v / n as f64).max(VARIANCE_FLOOR));
        }
        let total = x.len() as f64;
        let log_prior = count.iter().map(|&n| (n as f64 / total).ln()).collect();
        Ok(Self { log_prior, mean, var })
    }

    pub fn dim(&self) -> usize {
        self.mean.first().map_or(0, Vec::len)
    }

    pub fn n_classes(&self) -> usize {
        self.mean.len()
    }

    /// Class-conditional log density `log p(x | class)` for every class.
    pub fn log_likelihood(&self, x: &[f64]) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.var)
            .map(|(mu, var)| {
                mu.iter()
                    .zip(var)
                    .zip(x)
                    .map(|((m, v), xi)| -0.5 * (LN_2PI + v.ln()) - (xi - m) * (xi - m) / (2.0 * v))
                    .sum()
            })
            .collect()
    }

    /// Log likelihood plus the training-frequency log prior.
    pub fn joint_log_scores(&self, x: &[f64]) -> Vec<f64> {
        self.log_likelihood(x).into_iter().zip(&self.log_prior).map(|(l, p)| l + p).collect()
    }
}
