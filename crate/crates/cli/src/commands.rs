use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;
use zonescan_core::experiments::{
    adversarial_experiment, disagreement_experiment, watermark_experiment, WatermarkSettings,
};
use zonescan_core::attacks::pairs_csv;
use zonescan_core::model::model_to_json;
use zonescan_core::training::accuracy;
use zonescan_core::{
    class_surface, ks_two_sample, load_model, radius_sweep, scan as scan_point,
    train as train_model, Activation, AttackConfig, MlpModel, ScanConfig, Split, TrainConfig,
};

use crate::config::KvConfig;
use crate::data_source::DataSource;
use crate::error::CliError;
use crate::output::{csv_line, OutDir};

pub struct Context {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub cfg: KvConfig,
}

impl Context {
    fn out(&self) -> OutDir {
        OutDir::new(self.out_dir.clone())
    }

    fn data(&self, cli: Option<String>, key: &str) -> Result<DataSource, CliError> {
        self.cfg.require::<String>(cli, key)?.parse()
    }

    fn model(&self, cli: Option<PathBuf>, key: &str) -> Result<MlpModel, CliError> {
        let path: PathBuf = self.cfg.require(cli, key)?;
        read_model(&path)
    }

    fn scan_config(&self, radius: Option<f64>, samples: Option<usize>, default_r: Option<f64>, default_k: usize) -> Result<ScanConfig, CliError> {
        let radius = match default_r {
            Some(r) => self.cfg.or(radius, "radius", r)?,
            None => self.cfg.require(radius, "radius")?,
        };
        let cfg = ScanConfig::new(radius, self.cfg.or(samples, "samples", default_k)?, self.seed);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_model(path: &Path) -> Result<MlpModel, CliError> {
    if !path.is_file() {
        return Err(CliError::Io(format!("model file {} does not exist", path.display())));
    }
    load_model(path).map_err(|e| match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn parse_list<T: std::str::FromStr>(what: &str, s: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| CliError::Validation(format!("{what}: cannot parse '{}'", v.trim())))
        })
        .collect()
}

/// `start:end:step` (inclusive of `end` within rounding) or a comma list.
pub fn parse_radii(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 1 {
        return parse_list("radii", s);
    }
    let [a, b, step] = parts[..] else {
        return Err(CliError::Validation(format!("radii '{s}': expected start:end:step")));
    };
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Validation(format!("radii: cannot parse '{v}'")))
    };
    let (a, b, step) = (num(a)?, num(b)?, num(step)?);
    if !step.is_finite() || step <= 0.0 || a.is_nan() || b.is_nan() || b < a {
        return Err(CliError::Validation(format!("radii '{s}': need end >= start and step > 0")));
    }
    let n = ((b - a) / step + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|i| {
            let r = a + i as f64 * step;
            ((r * 1e12).round() / 1e12).min(b)
        })
        .collect())
}

fn fmt_row(lead: impl IntoIterator<Item = String>, xs: &[f64]) -> String {
    csv_line(lead.into_iter().chain(xs.iter().map(f64::to_string)))
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training data spec: blobs[:k=v,...], idx:<images>,<labels>[,limit=N], csv:<path>,classes=C
    #[arg(long)]
    data: Option<String>,
    /// Optional held-out data spec; its accuracy is reported
    #[arg(long)]
    test_data: Option<String>,
    /// Hidden layer widths, comma separated [default: 32,32]
    #[arg(long)]
    hidden: Option<String>,
    /// Hidden activation: relu, sigmoid, tanh, identity [default: tanh]
    #[arg(long)]
    activation: Option<Activation>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
}

pub fn train(ctx: &Context, a: TrainArgs) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &ctx.cfg;
    let source = ctx.data(a.data, "data")?;
    let test_source = cfg.get::<String>(a.test_data, "test-data")?.map(|s| s.parse::<DataSource>()).transpose()?;
    source.check()?;
    if let Some(t) = &test_source {
        t.check()?;
    }
    let hidden: Vec<usize> = parse_list("hidden", &cfg.or(a.hidden, "hidden", "32,32".to_string())?)?;
    let activation = cfg.or(a.activation, "activation", Activation::Tanh)?;
    let config = TrainConfig {
        learning_rate: cfg.or(a.lr, "lr", 0.1)?,
        epochs: cfg.or(a.epochs, "epochs", 50)?,
        batch_size: cfg.or(a.batch_size, "batch-size", 32)?,
        seed: ctx.seed,
    };

    let data = source.load()?;
    let mut dims = vec![data.dim()];
    dims.extend(&hidden);
    dims.push(data.num_classes());
    let init = MlpModel::init(&dims, activation, ctx.seed)?;
    let outcome = train_model(&init, &data, &config)?;
    let inputs: Vec<&[f64]> = data.iter_inputs().collect();
    let train_acc = accuracy(&outcome.model, &inputs, data.labels());
    let test_acc = match test_source {
        Some(t) => {
            let test = t.load()?.with_split(Split::Test);
            let ti: Vec<&[f64]> = test.iter_inputs().collect();
            Some(accuracy(&outcome.model, &ti, test.labels()))
        }
        None => None,
    };
    println!("train accuracy {train_acc:.4}{}", test_acc.map_or(String::new(), |t| format!(", test accuracy {t:.4}")));

    let mut out = ctx.out();
    out.add("model.json", model_to_json(&outcome.model));
    out.add("history.csv", outcome.history_csv());
    out.add_report(
        "train_report.json",
        "train",
        json!({"data": format!("{source:?}"), "dims": dims, "activation": activation.name(), "config": config}),
        json!({"train_accuracy": train_acc, "test_accuracy": test_acc, "final_loss": outcome.history.last().map(|h| h.loss)}),
    )?;
    out.commit()
}

#[derive(Debug, Args)]
pub struct PointArgs {
    /// Input coordinates, comma separated, each in [0,1]
    #[arg(long, conflicts_with = "data")]
    point: Option<String>,
    /// Take the input from a dataset instead (with --index)
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    index: Option<usize>,
}

impl PointArgs {
    fn resolve(self, ctx: &Context) -> Result<Vec<f64>, CliError> {
        let cfg = &ctx.cfg;
        if let Some(p) = cfg.get::<String>(self.point, "point")? {
            return parse_list("point", &p);
        }
        let Some(spec) = cfg.get::<String>(self.data, "data")? else {
            return Err(CliError::Validation("give either --point or --data with --index".into()));
        };
        let data = spec.parse::<DataSource>()?.load()?;
        let i: usize = cfg.require(self.index, "index")?;
        if i >= data.len() {
            return Err(CliError::Validation(format!("--index {i} out of range for {} points", data.len())));
        }
        Ok(data.input(i).to_vec())
    }
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    point: PointArgs,
    /// L-infinity radius in [0,1]
    #[arg(long)]
    radius: Option<f64>,
    /// Monte Carlo sample count [default: 10000]
    #[arg(long)]
    samples: Option<usize>,
    /// Also write every sampled entropy to scan_entropies.csv
    #[arg(long)]
    keep_samples: bool,
}

pub fn scan_cmd_config(ctx: &Context, a: &ScanArgs) -> Result<ScanConfig, CliError> {
    Ok(ctx
        .scan_config(a.radius, a.samples, None, 10_000)?
        .keep_samples(ctx.cfg.flag(a.keep_samples, "keep-samples")?))
}

pub fn scan(ctx: &Context, a: ScanArgs) -> Result<Vec<PathBuf>, CliError> {
    let model = ctx.model(a.model.clone(), "model")?;
    let config = scan_cmd_config(ctx, &a)?;
    let x = a.point.resolve(ctx)?;
    let report = scan_point(&model, &x, &config)?;
    let at_point = model.forward(&x)?;
    println!("index {:.6} (std {:.6})", report.index_value, report.std_dev);

    let mut out = ctx.out();
    if let Some(samples) = &report.entropy_samples {
        let mut s = String::from("sample,entropy\n");
        for (i, h) in samples.iter().enumerate() {
            s.push_str(&format!("{i},{h}\n"));
        }
        out.add("scan_entropies.csv", s);
    }
    out.add_report(
        "scan.json",
        "scan",
        json!({"point": x, "radius": config.radius, "samples": config.num_samples, "seed": config.seed}),
        json!({
            "index": report.index_value,
            "std_dev": report.std_dev,
            "mean_confidence": report.mean_confidence,
            "entropy_at_point": at_point.entropy(),
            "predicted_class": at_point.argmax(),
        }),
    )?;
    out.commit()
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    point: PointArgs,
    /// start:end:step or a comma list [default: 0:1:0.05]
    #[arg(long)]
    radii: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
}

pub fn sweep(ctx: &Context, a: SweepArgs) -> Result<Vec<PathBuf>, CliError> {
    let model = ctx.model(a.model, "model")?;
    let radii = parse_radii(&ctx.cfg.or(a.radii, "radii", "0:1:0.05".to_string())?)?;
    let samples = ctx.cfg.or(a.samples, "samples", 10_000)?;
    let x = a.point.resolve(ctx)?;
    let reports = radius_sweep(&model, &x, &radii, samples, ctx.seed)?;

    let mut csv = csv_line(
        ["radius", "index", "std"]
            .map(String::from)
            .into_iter()
            .chain((0..model.num_classes()).map(|j| format!("class_{j}"))),
    );
    for (r, rep) in radii.iter().zip(&reports) {
        csv.push_str(&fmt_row([r.to_string(), rep.index_value.to_string(), rep.std_dev.to_string()], &rep.mean_confidence));
    }
    let mut out = ctx.out();
    out.add("sweep.csv", csv);
    out.commit()
}

#[derive(Debug, Args)]
pub struct AdvArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<String>,
    /// Number of correctly classified inputs to attack [default: 500]
    #[arg(long)]
    n: Option<usize>,
    /// FGM step size [default: 0.2]
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
}

pub fn adv(ctx: &Context, a: AdvArgs) -> Result<Vec<PathBuf>, CliError> {
    let source = ctx.data(a.data, "data")?;
    source.check()?;
    let model = ctx.model(a.model, "model")?;
    let n = ctx.cfg.or(a.n, "n", 500)?;
    if n == 0 {
        return Err(CliError::Validation("--n must be at least 1".into()));
    }
    let attack = AttackConfig::new(ctx.cfg.or(a.epsilon, "epsilon", 0.2)?, ctx.seed)?;
    let scan = ctx.scan_config(a.radius, a.samples, Some(0.025), 10_000)?;
    let data = source.load()?;
    let exp = adversarial_experiment(&model, &data, n, &attack, &scan)?;
    println!(
        "attack success {:.3}; mean index clean {:.4} vs adversarial {:.4}; KS D={:.4} p={:.3e}",
        exp.attack_success_rate, exp.clean_summary.mean, exp.adversarial_summary.mean, exp.ks.statistic, exp.ks.p_value
    );

    let mut scores = String::from("index,clean,adversarial\n");
    for ((p, c), v) in exp.pairs.iter().zip(&exp.clean_scores).zip(&exp.adversarial_scores) {
        scores.push_str(&format!("{},{c},{v}\n", p.index));
    }
    let mut out = ctx.out();
    out.add("adv_scores.csv", scores);
    out.add("adv_pairs.csv", pairs_csv(&exp.pairs));
    out.add_report(
        "adv_report.json",
        "adv",
        json!({"n": n, "attack": attack, "scan": scan}),
        json!({
            "attack_success_rate": exp.attack_success_rate,
            "clean": exp.clean_summary,
            "adversarial": exp.adversarial_summary,
            "ks": exp.ks,
        }),
    )?;
    out.commit()
}

#[derive(Debug, Args)]
pub struct DisagreeArgs {
    /// Model file; repeat for every model (at least two)
    #[arg(long = "model")]
    models: Vec<PathBuf>,
    #[arg(long)]
    data: Option<String>,
    /// Random baseline points [default: 200]
    #[arg(long)]
    baseline: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
}

pub fn disagree(ctx: &Context, a: DisagreeArgs) -> Result<Vec<PathBuf>, CliError> {
    let paths: Vec<PathBuf> = if a.models.is_empty() {
        ctx.cfg.raw("models").map_or_else(Vec::new, |s| s.split(',').map(|p| PathBuf::from(p.trim())).collect())
    } else {
        a.models
    };
    if paths.len() < 2 {
        return Err(CliError::Validation("disagree needs at least two --model files".into()));
    }
    let source = ctx.data(a.data, "data")?;
    source.check()?;
    let models = paths.iter().map(|p| read_model(p)).collect::<Result<Vec<_>, _>>()?;
    let baseline = ctx.cfg.or(a.baseline, "baseline", 200)?;
    let scan = ctx.scan_config(a.radius, a.samples, Some(0.025), 10_000)?;
    let data = source.load()?;
    let exp = disagreement_experiment(&models, &data, baseline, &scan)?;
    let status = if exp.corner_indices.is_empty() { "no corner cases" } else { "ok" };
    println!("{} corner cases ({status})", exp.corner_indices.len());

    let mut scores = String::from("model,set,dataset_index,index\n");
    for (m, dist) in exp.per_model.iter().enumerate() {
        for (i, v) in exp.corner_indices.iter().zip(&dist.corner_scores) {
            scores.push_str(&format!("{m},corner,{i},{v}\n"));
        }
        for (i, v) in exp.baseline_indices.iter().zip(&dist.baseline_scores) {
            scores.push_str(&format!("{m},baseline,{i},{v}\n"));
        }
    }
    let per_model: Vec<_> = exp
        .per_model
        .iter()
        .zip(&paths)
        .map(|(d, p)| json!({"model": p, "corner": d.corner_summary, "baseline": d.baseline_summary, "ks": d.ks}))
        .collect();
    let mut out = ctx.out();
    out.add("disagree_scores.csv", scores);
    out.add_report(
        "disagree_report.json",
        "disagree",
        json!({"models": paths, "baseline": baseline, "scan": scan}),
        json!({
            "status": status,
            "corner_count": exp.corner_indices.len(),
            "corner_indices": exp.corner_indices,
            "per_model": per_model,
        }),
    )?;
    out.commit()
}

#[derive(Debug, Args)]
pub struct WatermarkArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<String>,
    /// Key inputs; half adversarial, half clean [default: 100]
    #[arg(long)]
    key_size: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Scans per key input and model [default: 100]
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    /// Samples per scan [default: 1000]
    #[arg(long)]
    samples: Option<usize>,
    /// Finetuning learning rate [default: 0.5]
    #[arg(long)]
    lr: Option<f64>,
    /// Finetuning epoch limit [default: 1000]
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
}

pub fn watermark(ctx: &Context, a: WatermarkArgs) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &ctx.cfg;
    let source = ctx.data(a.data, "data")?;
    source.check()?;
    let model = ctx.model(a.model, "model")?;
    let settings = WatermarkSettings {
        key_size: cfg.or(a.key_size, "key-size", 100)?,
        attack: AttackConfig::new(cfg.or(a.epsilon, "epsilon", 0.2)?, ctx.seed)?,
        finetune: TrainConfig {
            learning_rate: cfg.or(a.lr, "lr", 0.5)?,
            epochs: cfg.or(a.epochs, "epochs", 1000)?,
            batch_size: cfg.or(a.batch_size, "batch-size", 10)?,
            seed: ctx.seed,
        },
        runs: cfg.or(a.runs, "runs", 100)?,
        scan: ctx.scan_config(a.radius, a.samples, Some(0.025), 1000)?,
    };
    if settings.key_size == 0 {
        return Err(CliError::Validation("--key-size must be at least 1".into()));
    }
    let data = source.load()?;
    let exp = watermark_experiment(&model, &data, &settings)?;
    println!(
        "key accuracy {:.3} -> {:.3}; mean index before {:.4} vs after {:.4}; KS D={:.4} p={:.3e}",
        exp.key_accuracy_before, exp.key_accuracy_after, exp.before_summary.mean, exp.after_summary.mean, exp.ks.statistic, exp.ks.p_value
    );
    if !exp.reached_target {
        eprintln!("warning: key accuracy target not reached within the epoch limit");
    }

    let runs = settings.runs;
    let mut scores = String::from("key_input,run,before,after\n");
    for (i, (b, af)) in exp.before_scores.iter().zip(&exp.after_scores).enumerate() {
        scores.push_str(&format!("{},{},{b},{af}\n", i / runs, i % runs));
    }
    let key = &exp.key;
    let mut key_csv = csv_line(
        ["source_index", "kind", "target_label"]
            .map(String::from)
            .into_iter()
            .chain((0..data.dim()).map(|j| format!("x{j}"))),
    );
    for (j, x) in key.key.inputs.iter().enumerate() {
        let kind = if j < key.adversarial_count { "adversarial" } else { "clean" };
        key_csv.push_str(&fmt_row(
            [key.source_indices[j].to_string(), kind.to_string(), key.key.target_labels[j].to_string()],
            x,
        ));
    }
    let mut out = ctx.out();
    out.add("watermark_scores.csv", scores);
    out.add("watermark_key.csv", key_csv);
    out.add("watermarked_model.json", model_to_json(&exp.watermarked));
    out.add_report(
        "watermark_report.json",
        "watermark",
        json!({"settings": settings}),
        json!({
            "key_accuracy_before": exp.key_accuracy_before,
            "key_accuracy_after": exp.key_accuracy_after,
            "reached_target": exp.reached_target,
            "finetune_epochs": exp.finetune_history.len(),
            "before": exp.before_summary,
            "after": exp.after_summary,
            "ks": exp.ks,
        }),
    )?;
    out.commit()
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
}

pub fn surface(ctx: &Context, a: SurfaceArgs) -> Result<Vec<PathBuf>, CliError> {
    let model = ctx.model(a.model, "model")?;
    let samples = ctx.cfg.or(a.samples, "samples", 10_000)?;
    let fractions = class_surface(&model, samples, ctx.seed)?;
    for (j, f) in fractions.iter().enumerate() {
        println!("class {j}: {f:.4}");
    }
    let mut out = ctx.out();
    out.add_report(
        "surface.json",
        "surface",
        json!({"samples": samples, "seed": ctx.seed}),
        json!({"fractions": fractions}),
    )?;
    out.commit()
}

#[derive(Debug, Args)]
pub struct KsArgs {
    /// File with one value per line
    #[arg(long)]
    a: Option<PathBuf>,
    #[arg(long)]
    b: Option<PathBuf>,
}

fn read_values(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|_| {
                CliError::Validation(format!("{} line {}: '{}' is not a number", path.display(), i + 1, l.trim()))
            })
        })
        .collect()
}

pub fn ks(ctx: &Context, a: KsArgs) -> Result<Vec<PathBuf>, CliError> {
    let pa: PathBuf = ctx.cfg.require(a.a, "a")?;
    let pb: PathBuf = ctx.cfg.require(a.b, "b")?;
    let (va, vb) = (read_values(&pa)?, read_values(&pb)?);
    let result = ks_two_sample(&va, &vb)?;
    println!("D = {:.6}, p = {:.6e}", result.statistic, result.p_value);
    let mut out = ctx.out();
    out.add_report("ks.json", "ks", json!({"a": pa, "b": pb}), result)?;
    out.commit()
}
