//! Base-`C` entropy and its Monte Carlo expectation over a scan zone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{argmax, softmax, MlpModel, ProbVector};
use crate::sampler::{BallRegion, SeededStream};
use crate::{Error, Result, Scalar};

/// Samples per work unit. Fixed so the reduction order, and therefore the
/// result, does not depend on how many threads run the scan.
const CHUNK: usize = 256;

/// Shannon entropy with logarithm base `C = p.len()`, so the result lies in
/// `[0, 1]`. Uses `0 · log 0 = 0`.
pub fn entropy<T: Scalar>(p: &[T]) -> Result<T> {
    let p = ProbVector::new(p.to_vec())?;
    Ok(p.entropy())
}

pub(crate) fn entropy_unchecked<T: Scalar>(p: &[T]) -> T {
    let h: T = p
        .iter()
        .filter(|&&v| v > T::zero())
        .map(|&v| -v * v.ln())
        .sum();
    let c = T::from_usize(p.len()).expect("class count fits scalar");
    (h / c.ln()).max(T::zero()).min(T::one())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub radius: f64,
    pub num_samples: usize,
    pub seed: u64,
    /// Keep the per-sample entropies in the report.
    #[serde(default)]
    pub keep_samples: bool,
}

impl ScanConfig {
    pub fn new(radius: f64, num_samples: usize, seed: u64) -> Self {
        ScanConfig {
            radius,
            num_samples,
            seed,
            keep_samples: false,
        }
    }

    pub fn keep_samples(mut self, keep: bool) -> Self {
        self.keep_samples = keep;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_samples == 0 {
            return Err(Error::param("num_samples must be at least 1"));
        }
        if !self.radius.is_finite() || self.radius < 0.0 {
            return Err(Error::param(format!(
                "radius must be finite and nonnegative, got {}",
                self.radius
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport<T: Scalar> {
    /// Mean base-`C` entropy over the sampled zone.
    pub index_value: T,
    /// Sample standard deviation of the per-sample entropies.
    pub std_dev: T,
    /// Mean confidence per class over the sampled zone.
    pub mean_confidence: Vec<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy_samples: Option<Vec<T>>,
    pub config: ScanConfig,
    pub stream_id: u64,
}

struct Chunk<T> {
    entropies: Vec<T>,
    confidence_sum: Vec<T>,
}

/// Monte Carlo estimate of the index around `x`, drawing from stream 0.
pub fn scan<T: Scalar>(model: &MlpModel<T>, x: &[T], config: &ScanConfig) -> Result<ScanReport<T>> {
    scan_stream(model, x, config, 0)
}

/// As [`scan`], drawing samples from the given stream of `config.seed`.
pub fn scan_stream<T: Scalar>(
    model: &MlpModel<T>,
    x: &[T],
    config: &ScanConfig,
    stream_id: u64,
) -> Result<ScanReport<T>> {
    config.validate()?;
    if x.len() != model.input_dim() {
        return Err(Error::InputShape {
            expected: model.input_dim(),
            actual: x.len(),
        });
    }
    let region = BallRegion::new(x, T::lit(config.radius))?;
    let stream = SeededStream::new(config.seed, stream_id);
    let k = config.num_samples;
    let c = model.num_classes();
    let d = model.input_dim();

    let chunks = (0..k.div_ceil(CHUNK))
        .into_par_iter()
        .map(|ci| {
            let start = ci * CHUNK;
            let len = CHUNK.min(k - start);
            let mut points = vec![T::zero(); len * d];
            region.sample_into(&stream, start as u64, &mut points);
            let mut chunk = Chunk {
                entropies: Vec::with_capacity(len),
                confidence_sum: vec![T::zero(); c],
            };
            for point in points.chunks_exact(d) {
                let logits = model.logits_unchecked(point);
                if logits.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric("non-finite logit during scan".into()));
                }
                let p = softmax(&logits);
                chunk.entropies.push(entropy_unchecked(&p));
                for (acc, v) in chunk.confidence_sum.iter_mut().zip(&p) {
                    *acc += *v;
                }
            }
            Ok(chunk)
        })
        .collect::<Result<Vec<_>>>()?;

    let kt = T::from_usize(k).expect("sample count fits scalar");
    let mut entropies = Vec::with_capacity(k);
    let mut confidence = vec![T::zero(); c];
    for chunk in chunks {
        entropies.extend(chunk.entropies);
        for (acc, v) in confidence.iter_mut().zip(chunk.confidence_sum) {
            *acc += v;
        }
    }
    let mean = entropies.iter().copied().fold(T::zero(), |a, b| a + b) / kt;
    let std_dev = if k > 1 {
        let ss = entropies
            .iter()
            .fold(T::zero(), |a, &e| a + (e - mean) * (e - mean));
        (ss / (kt - T::one())).sqrt()
    } else {
        T::zero()
    };
    let mean_confidence = confidence
        .into_iter()
        .map(|s| (s / kt).max(T::zero()).min(T::one()))
        .collect();

    Ok(ScanReport {
        index_value: mean.max(T::zero()).min(T::one()),
        std_dev,
        mean_confidence,
        entropy_samples: config.keep_samples.then_some(entropies),
        config: *config,
        stream_id,
    })
}

/// One scan per radius; the `i`-th radius draws from stream `i` of `seed`.
pub fn radius_sweep<T: Scalar>(
    model: &MlpModel<T>,
    x: &[T],
    radii: &[f64],
    num_samples: usize,
    seed: u64,
) -> Result<Vec<ScanReport<T>>> {
    if radii.is_empty() {
        return Err(Error::param("radius list is empty"));
    }
    if let Some(r) = radii.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::param(format!("radius {r} outside [0, 1]")));
    }
    if radii.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("radii must be in ascending order"));
    }
    radii
        .iter()
        .enumerate()
        .map(|(i, &r)| scan_stream(model, x, &ScanConfig::new(r, num_samples, seed), i as u64))
        .collect()
}

/// Fraction of `[0,1]^d` assigned to each class, estimated from `num_samples`
/// uniform points. Argmax ties go to the lowest class index.
pub fn class_surface<T: Scalar>(model: &MlpModel<T>, num_samples: usize, seed: u64) -> Result<Vec<f64>> {
    if num_samples == 0 {
        return Err(Error::param("num_samples must be at least 1"));
    }
    let region = BallRegion::<T>::unit(model.input_dim())?;
    let stream = SeededStream::new(seed, 0);
    let d = model.input_dim();
    let counts = (0..num_samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|ci| {
            let start = ci * CHUNK;
            let len = CHUNK.min(num_samples - start);
            let mut points = vec![T::zero(); len * d];
            region.sample_into(&stream, start as u64, &mut points);
            let mut counts = vec![0usize; model.num_classes()];
            for point in points.chunks_exact(d) {
                let logits = model.logits_unchecked(point);
                if logits.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric("non-finite logit during surface estimate".into()));
                }
                counts[argmax(&logits)] += 1;
            }
            Ok(counts)
        })
        .try_reduce(
            || vec![0usize; model.num_classes()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(counts
        .into_iter()
        .map(|n| n as f64 / num_samples as f64)
        .collect())
}
