//! Two-sample Kolmogorov–Smirnov test, summaries, model disagreement.

use serde::Serialize;

use crate::data::LabeledDataset;
use crate::model::{argmax, MlpModel};
use crate::{Error, Result, Scalar};

/// Series terms below this magnitude end the Kolmogorov sum.
const SERIES_TOL: f64 = 1e-12;

/// Below this λ the Kolmogorov survival function is 1 to within 1e-12 while
/// its alternating series converges slowly.
const SMALL_LAMBDA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    /// Largest vertical distance between the two ECDFs.
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

impl KsResult {
    pub fn rejects_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn sorted_finite<T: Scalar>(values: &[T], which: &str) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::param(format!("{which} sample is empty")));
    }
    let mut v: Vec<f64> = values.iter().map(|x| x.as_f64()).collect();
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::param(format!("{which} sample contains NaN")));
    }
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Exact statistic by a merged sweep over both sorted samples; ties are
/// resolved by evaluating both right-continuous ECDFs after each distinct value.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    d
}

/// Asymptotic Kolmogorov survival function
/// `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} exp(−2 j² λ²)`, clamped to `[0, 1]`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < SMALL_LAMBDA {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=10_000u32 {
        let j = j as f64;
        let term = 2.0 * sign * (-2.0 * j * j * lambda * lambda).exp();
        sum += term;
        if term.abs() < SERIES_TOL {
            break;
        }
        sign = -sign;
    }
    sum.clamp(0.0, 1.0)
}

/// Two-sample KS test with the asymptotic p-value at effective size
/// `n1 n2 / (n1 + n2)` and the `0.12 + 0.11/√n` small-sample correction.
pub fn ks_two_sample<T: Scalar>(a: &[T], b: &[T]) -> Result<KsResult> {
    let a = sorted_finite(a, "first")?;
    let b = sorted_finite(b, "second")?;
    let statistic = ks_statistic(&a, &b);
    let (n1, n2) = (a.len(), b.len());
    let ne = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * statistic;
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_survival(lambda),
        n1,
        n2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistributionSummary {
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator; 0 for one value).
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

pub fn summarize<T: Scalar>(values: &[T]) -> Result<DistributionSummary> {
    if values.is_empty() {
        return Err(Error::param("cannot summarize an empty sample"));
    }
    let v: Vec<f64> = values.iter().map(|x| x.as_f64()).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("sample contains non-finite values".into()));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(DistributionSummary {
        mean: mean.clamp(min, max),
        std,
        min,
        max,
        count: v.len(),
    })
}

/// Indices of points on which the models do not all predict the same class.
pub fn find_disagreements<T: Scalar>(models: &[MlpModel<T>], data: &LabeledDataset<T>) -> Result<Vec<usize>> {
    if models.len() < 2 {
        return Err(Error::param(format!(
            "need at least 2 models to compare, got {}",
            models.len()
        )));
    }
    let (d, c) = (models[0].input_dim(), models[0].num_classes());
    if let Some(i) = models.iter().position(|m| m.input_dim() != d || m.num_classes() != c) {
        return Err(Error::param(format!(
            "model {i} is {}→{} but model 0 is {d}→{c}",
            models[i].input_dim(),
            models[i].num_classes()
        )));
    }
    if data.dim() != d {
        return Err(Error::InputShape {
            expected: d,
            actual: data.dim(),
        });
    }
    Ok((0..data.len())
        .filter(|&i| {
            let x = data.input(i);
            let first = argmax(&models[0].logits_unchecked(x));
            models[1..]
                .iter()
                .any(|m| argmax(&m.logits_unchecked(x)) != first)
        })
        .collect())
}
