//! Fast gradient method (untargeted, single step).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::model::{argmax, MlpModel};
use crate::training::input_gradient;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub epsilon: f64,
    /// Only used to pick which inputs get attacked.
    pub seed: u64,
}

impl AttackConfig {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self> {
        let cfg = AttackConfig { epsilon, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::param(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// `clip(x + ε · sign(∇ₓ loss(x, true_label)), 0, 1)` with `sign(0) = 0`.
pub fn fgm<T: Scalar>(model: &MlpModel<T>, x: &[T], true_label: usize, config: &AttackConfig) -> Result<Vec<T>> {
    config.validate()?;
    let grad = input_gradient(model, x, true_label)?;
    let eps = T::lit(config.epsilon);
    Ok(x.iter()
        .zip(&grad)
        .map(|(&xi, &g)| {
            let step = if g > T::zero() {
                eps
            } else if g < T::zero() {
                -eps
            } else {
                T::zero()
            };
            (xi + step).max(T::zero()).min(T::one())
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversarialPair<T: Scalar> {
    /// Position of the source point in the dataset.
    pub index: usize,
    pub original: Vec<T>,
    pub adversarial: Vec<T>,
    pub orig_label: usize,
    /// Model prediction on the adversarial input.
    pub adv_label: usize,
    pub linf_distance: f64,
}

impl<T: Scalar> AdversarialPair<T> {
    pub fn is_successful(&self) -> bool {
        self.adv_label != self.orig_label
    }
}

/// Indices of points the model classifies correctly, in a seed-determined order.
pub fn shuffled_correct<T: Scalar>(model: &MlpModel<T>, data: &LabeledDataset<T>, seed: u64) -> Result<Vec<usize>> {
    if data.dim() != model.input_dim() {
        return Err(Error::InputShape {
            expected: model.input_dim(),
            actual: data.dim(),
        });
    }
    let mut correct: Vec<usize> = (0..data.len())
        .filter(|&i| argmax(&model.logits_unchecked(data.input(i))) == data.label(i))
        .collect();
    correct.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(correct)
}

pub fn attack_point<T: Scalar>(
    model: &MlpModel<T>,
    data: &LabeledDataset<T>,
    index: usize,
    config: &AttackConfig,
) -> Result<AdversarialPair<T>> {
    let original = data.input(index).to_vec();
    let orig_label = data.label(index);
    let adversarial = fgm(model, &original, orig_label, config)?;
    let adv_label = argmax(&model.forward_logits(&adversarial)?);
    let linf_distance = original
        .iter()
        .zip(&adversarial)
        .map(|(a, b)| (*a - *b).abs().as_f64())
        .fold(0.0, f64::max);
    Ok(AdversarialPair {
        index,
        original,
        adversarial,
        orig_label,
        adv_label,
        linf_distance,
    })
}

/// Attacks `n` correctly-classified points of `data`, chosen by `config.seed`.
pub fn generate_adversarial_set<T: Scalar>(
    model: &MlpModel<T>,
    data: &LabeledDataset<T>,
    n: usize,
    config: &AttackConfig,
) -> Result<Vec<AdversarialPair<T>>> {
    config.validate()?;
    if n == 0 {
        return Err(Error::param("number of adversarial examples must be at least 1"));
    }
    if n > data.len() {
        return Err(Error::param(format!(
            "requested {n} adversarial examples from {} points",
            data.len()
        )));
    }
    let correct = shuffled_correct(model, data, config.seed)?;
    if correct.len() < n {
        return Err(Error::param(format!(
            "only {} points are classified correctly, {n} requested",
            correct.len()
        )));
    }
    correct[..n]
        .par_iter()
        .map(|&i| attack_point(model, data, i, config))
        .collect()
}

pub fn pairs_csv<T: Scalar>(pairs: &[AdversarialPair<T>]) -> String {
    let mut s = String::from("index,orig_label,adv_label,linf_distance\n");
    for p in pairs {
        s.push_str(&format!("{},{},{},{}\n", p.index, p.orig_label, p.adv_label, p.linf_distance));
    }
    s
}
