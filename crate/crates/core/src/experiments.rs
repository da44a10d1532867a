//! The three distribution experiments: adversarial inputs, corner cases on
//! which models disagree, and boundary shift caused by watermark finetuning.
//!
//! Each input is scanned on its own sampler stream, so results do not depend
//! on how the per-input scans are scheduled across threads.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::attacks::{attack_point, generate_adversarial_set, shuffled_correct, AdversarialPair, AttackConfig};
use crate::data::LabeledDataset;
use crate::index::{scan_stream, ScanConfig};
use crate::model::MlpModel;
use crate::stats::{find_disagreements, ks_two_sample, summarize, DistributionSummary, KsResult};
use crate::training::{watermark_finetune, EpochRecord, TrainConfig, WatermarkKey};
use crate::{Error, Result, Scalar};

/// Index value for each point, point `i` drawing from stream `stream(i)`.
pub fn scan_points<T: Scalar, X: AsRef<[T]> + Sync>(
    model: &MlpModel<T>,
    points: &[X],
    config: &ScanConfig,
    stream: impl Fn(usize) -> u64 + Sync,
) -> Result<Vec<T>> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, x)| scan_stream(model, x.as_ref(), config, stream(i)).map(|r| r.index_value))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct AdversarialExperiment<T: Scalar> {
    #[serde(skip)]
    pub pairs: Vec<AdversarialPair<T>>,
    /// Fraction of attacked inputs whose predicted class changed.
    pub attack_success_rate: f64,
    pub clean_scores: Vec<T>,
    pub adversarial_scores: Vec<T>,
    pub clean_summary: DistributionSummary,
    pub adversarial_summary: DistributionSummary,
    pub ks: KsResult,
}

/// Scans `n` correctly-classified points and their FGM counterparts. Clean
/// point `i` uses stream `2i`, its adversarial stream `2i + 1`.
pub fn adversarial_experiment<T: Scalar>(
    model: &MlpModel<T>,
    data: &LabeledDataset<T>,
    n: usize,
    attack: &AttackConfig,
    scan: &ScanConfig,
) -> Result<AdversarialExperiment<T>> {
    scan.validate()?;
    let pairs = generate_adversarial_set(model, data, n, attack)?;
    let originals: Vec<&[T]> = pairs.iter().map(|p| p.original.as_slice()).collect();
    let adversarials: Vec<&[T]> = pairs.iter().map(|p| p.adversarial.as_slice()).collect();
    let clean_scores = scan_points(model, &originals, scan, |i| 2 * i as u64)?;
    let adversarial_scores = scan_points(model, &adversarials, scan, |i| 2 * i as u64 + 1)?;
    let successes = pairs.iter().filter(|p| p.is_successful()).count();
    Ok(AdversarialExperiment {
        attack_success_rate: successes as f64 / pairs.len() as f64,
        clean_summary: summarize(&clean_scores)?,
        adversarial_summary: summarize(&adversarial_scores)?,
        ks: ks_two_sample(&clean_scores, &adversarial_scores)?,
        pairs,
        clean_scores,
        adversarial_scores,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelDistributions<T: Scalar> {
    pub corner_scores: Vec<T>,
    pub baseline_scores: Vec<T>,
    pub corner_summary: Option<DistributionSummary>,
    pub baseline_summary: DistributionSummary,
    /// `None` when there are no corner cases to compare.
    pub ks: Option<KsResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DisagreementExperiment<T: Scalar> {
    pub corner_indices: Vec<usize>,
    pub baseline_indices: Vec<usize>,
    /// One entry per model, in the order given.
    pub per_model: Vec<ModelDistributions<T>>,
}

/// Corner cases (points the models disagree on) against `baseline` random
/// points of `data`, scanned under every model. Point `i` of the dataset
/// always uses stream `i`.
pub fn disagreement_experiment<T: Scalar>(
    models: &[MlpModel<T>],
    data: &LabeledDataset<T>,
    baseline: usize,
    scan: &ScanConfig,
) -> Result<DisagreementExperiment<T>> {
    scan.validate()?;
    if baseline == 0 {
        return Err(Error::param("baseline sample size must be at least 1"));
    }
    let corner_indices = find_disagreements(models, data)?;
    let mut baseline_indices: Vec<usize> = (0..data.len()).collect();
    baseline_indices.shuffle(&mut ChaCha8Rng::seed_from_u64(scan.seed));
    baseline_indices.truncate(baseline.min(data.len()));

    let corner_points: Vec<&[T]> = corner_indices.iter().map(|&i| data.input(i)).collect();
    let baseline_points: Vec<&[T]> = baseline_indices.iter().map(|&i| data.input(i)).collect();
    let per_model = models
        .iter()
        .map(|m| {
            let corner_scores = scan_points(m, &corner_points, scan, |j| corner_indices[j] as u64)?;
            let baseline_scores = scan_points(m, &baseline_points, scan, |j| baseline_indices[j] as u64)?;
            let (corner_summary, ks) = if corner_scores.is_empty() {
                (None, None)
            } else {
                (
                    Some(summarize(&corner_scores)?),
                    Some(ks_two_sample(&corner_scores, &baseline_scores)?),
                )
            };
            Ok(ModelDistributions {
                baseline_summary: summarize(&baseline_scores)?,
                corner_scores,
                baseline_scores,
                corner_summary,
                ks,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DisagreementExperiment {
        corner_indices,
        baseline_indices,
        per_model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WatermarkSettings {
    pub key_size: usize,
    pub attack: AttackConfig,
    pub finetune: TrainConfig,
    /// Independent scans per key input.
    pub runs: usize,
    pub scan: ScanConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuiltKey<T: Scalar> {
    pub key: WatermarkKey<T>,
    /// Dataset index each key input was derived from.
    pub source_indices: Vec<usize>,
    /// The first `adversarial_count` key inputs are adversarial examples.
    pub adversarial_count: usize,
}

/// Key of `key_size` inputs: `key_size / 2` successful FGM adversarials
/// labeled with their source class, the rest correctly classified clean
/// points with their own labels.
pub fn build_watermark_key<T: Scalar>(
    model: &MlpModel<T>,
    data: &LabeledDataset<T>,
    key_size: usize,
    attack: &AttackConfig,
) -> Result<BuiltKey<T>> {
    attack.validate()?;
    if key_size == 0 {
        return Err(Error::param("key size must be at least 1"));
    }
    let n_adv = key_size / 2;
    let n_clean = key_size - n_adv;
    let order = shuffled_correct(model, data, attack.seed)?;

    let mut adversarial = Vec::with_capacity(n_adv);
    let mut spare = Vec::new();
    let mut rest = order.iter();
    while adversarial.len() < n_adv {
        let Some(&i) = rest.next() else { break };
        let pair = attack_point(model, data, i, attack)?;
        if pair.is_successful() {
            adversarial.push(pair);
        } else {
            spare.push(i);
        }
    }
    if adversarial.len() < n_adv {
        return Err(Error::param(format!(
            "only {} of the {n_adv} required adversarial key inputs could be generated",
            adversarial.len()
        )));
    }
    let clean: Vec<usize> = spare.into_iter().chain(rest.copied()).take(n_clean).collect();
    if clean.len() < n_clean {
        return Err(Error::param(format!(
            "not enough correctly classified points for {n_clean} clean key inputs"
        )));
    }

    let mut inputs = Vec::with_capacity(key_size);
    let mut targets = Vec::with_capacity(key_size);
    let mut source_indices = Vec::with_capacity(key_size);
    for p in adversarial {
        inputs.push(p.adversarial);
        targets.push(p.orig_label);
        source_indices.push(p.index);
    }
    for i in clean {
        inputs.push(data.input(i).to_vec());
        targets.push(data.label(i));
        source_indices.push(i);
    }
    Ok(BuiltKey {
        key: WatermarkKey::new(inputs, targets)?,
        source_indices,
        adversarial_count: n_adv,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WatermarkExperiment<T: Scalar> {
    pub key: BuiltKey<T>,
    #[serde(skip)]
    pub watermarked: MlpModel<T>,
    pub key_accuracy_before: f64,
    pub key_accuracy_after: f64,
    pub reached_target: bool,
    pub finetune_history: Vec<EpochRecord>,
    pub before_scores: Vec<T>,
    pub after_scores: Vec<T>,
    pub before_summary: DistributionSummary,
    pub after_summary: DistributionSummary,
    pub ks: KsResult,
}

/// Embeds a key by finetuning, then compares index distributions over the
/// key before and after. Run `t` on key input `j` uses stream
/// `j * runs + t` for both models.
pub fn watermark_experiment<T: Scalar>(
    model: &MlpModel<T>,
    data: &LabeledDataset<T>,
    settings: &WatermarkSettings,
) -> Result<WatermarkExperiment<T>> {
    settings.scan.validate()?;
    if settings.runs == 0 {
        return Err(Error::param("runs must be at least 1"));
    }
    let key = build_watermark_key(model, data, settings.key_size, &settings.attack)?;
    let key_accuracy_before = key.key.accuracy(model);
    let outcome = watermark_finetune(model, &key.key, &settings.finetune)?;

    let runs = settings.runs;
    let jobs: Vec<&[T]> = key
        .key
        .inputs
        .iter()
        .flat_map(|x| std::iter::repeat_n(x.as_slice(), runs))
        .collect();
    let before_scores = scan_points(model, &jobs, &settings.scan, |i| i as u64)?;
    let after_scores = scan_points(&outcome.model, &jobs, &settings.scan, |i| i as u64)?;

    Ok(WatermarkExperiment {
        key_accuracy_before,
        key_accuracy_after: outcome.key_accuracy,
        reached_target: outcome.reached_target,
        finetune_history: outcome.history,
        before_summary: summarize(&before_scores)?,
        after_summary: summarize(&after_scores)?,
        ks: ks_two_sample(&before_scores, &after_scores)?,
        watermarked: outcome.model,
        key,
        before_scores,
        after_scores,
    })
}
