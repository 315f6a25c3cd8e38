//! Stage orchestration: ingest, normalise, pad, split, train, evaluate, explain.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use log::info;
use serde::Serialize;

use clusterlens_core::data::{
    load_cluster_labels, load_dataset, normalize_per_individual, pad_and_mask, temporal_split,
};
use clusterlens_core::ensemble::{evaluate, train_ensemble};
use clusterlens_core::explain::{explain_all, export, AttentionTable, ExplainTargets, ExplanationBundleOut};
use clusterlens_core::model::{Checkpoint, CHECKPOINT_VERSION};
use clusterlens_core::synth::{generate, GroundTruthSpec};
use clusterlens_core::{AccuracyReport, ClusterLabels, EnsembleModel, MtsDataset, PaddedDataset, Variant};

use crate::config::{ConfigError, PipelineConfig};
use crate::output::{file_stem, sha256_hex, OutputTree, RunManifest, StageTiming};
use crate::svg::{render_svg, Artifact};

/// Inputs after ingestion, ready for training and explanation.
#[derive(Debug, Clone)]
pub struct PreparedData {
    /// As loaded or generated, before normalisation.
    pub raw: MtsDataset,
    pub labels: ClusterLabels,
    pub ground_truth: Option<GroundTruthSpec>,
    pub padded: PaddedDataset,
    pub train: PaddedDataset,
    pub test: PaddedDataset,
}

impl PreparedData {
    pub fn feature_names(&self) -> &[String] {
        &self.padded.feature_names
    }
}

struct Timer {
    timings: Vec<StageTiming>,
}

impl Timer {
    fn new() -> Self {
        Timer { timings: Vec::new() }
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        info!("stage {name}");
        let start = Instant::now();
        let out = f().with_context(|| format!("stage '{name}' failed"))?;
        self.timings.push(StageTiming {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }
}

/// Hash of the settings that influence results (everything but the output path).
pub fn config_hash(cfg: &PipelineConfig) -> String {
    let mut c = cfg.clone();
    c.output_dir = Default::default();
    sha256_hex(serde_json::to_string(&c).expect("config serialises").as_bytes())
}

fn load_inputs(cfg: &PipelineConfig) -> Result<(MtsDataset, ClusterLabels, Option<GroundTruthSpec>)> {
    if let Some(s) = &cfg.synth {
        let mut sc = s.config.clone();
        sc.seed = cfg.seed;
        let (ds, labels, spec) = generate(&sc, &s.spec())?;
        return Ok((ds, labels, Some(spec)));
    }
    let d = cfg
        .data
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("no input configured".into()))?;
    let labels_path = d
        .labels
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("[data] needs a labels path".into()))?;
    let k = d.k.ok_or_else(|| ConfigError::Invalid("[data] needs k".into()))?;
    let ds = load_dataset(&d.dataset, &d.ingest())?;
    let labels = load_cluster_labels(labels_path, k)?;
    Ok((ds, labels, None))
}

fn prepare_from(cfg: &PipelineConfig, raw: MtsDataset, labels: ClusterLabels, gt: Option<GroundTruthSpec>) -> Result<PreparedData> {
    let normalized = normalize_per_individual(&raw, cfg.normalization);
    let padded = pad_and_mask(&normalized, cfg.t_cap)?;
    labels.aligned(&padded.ids)?;
    let (train, test) = temporal_split(&padded, cfg.split)?;
    Ok(PreparedData {
        raw,
        labels,
        ground_truth: gt,
        padded,
        train,
        test,
    })
}

/// Ingests and preprocesses the configured input without writing anything.
pub fn prepare_data(cfg: &PipelineConfig) -> Result<PreparedData> {
    cfg.validate()?;
    let (raw, labels, gt) = load_inputs(cfg)?;
    prepare_from(cfg, raw, labels, gt)
}

fn write_inputs(out: &mut OutputTree, data: &PreparedData) -> Result<()> {
    let mut buf = Vec::new();
    data.raw.write_csv(&mut buf)?;
    out.write("data/dataset.csv", &buf)?;
    let mut buf = Vec::new();
    data.labels.write_csv(&mut buf)?;
    out.write("data/labels.csv", &buf)?;
    if let Some(gt) = &data.ground_truth {
        out.write_str("data/ground_truth.json", &serde_json::to_string_pretty(gt)?)?;
    }
    Ok(())
}

pub fn model_path(variant: Variant, index: usize) -> String {
    format!("models/{}/model_{index}.json", variant.name())
}

fn write_models(out: &mut OutputTree, ens: &EnsembleModel) -> Result<()> {
    for (i, m) in ens.models.iter().enumerate() {
        out.write_str(&model_path(ens.variant(), i), &Checkpoint::from(m).to_json()?)?;
    }
    Ok(())
}

/// Reads the checkpoints written by a previous `train` or `run`.
pub fn load_models(dir: &Path, variant: Variant, k: usize) -> Result<EnsembleModel> {
    let n = if k == 2 { 1 } else { k };
    let models = (0..n)
        .map(|i| {
            let path = dir.join(model_path(variant, i));
            Checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleModel::new(models, k)?)
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    n_individuals: usize,
    k: usize,
    n_features: usize,
    split: f64,
    checkpoint_version: u32,
    accuracy: &'a AccuracyReport,
}

fn report_text(report: &AccuracyReport) -> String {
    let mut s = String::from("Correctly classified individuals (mean over one-vs-rest models)\n\n");
    s.push_str(&report.to_table());
    s.push('\n');
    for row in &report.rows {
        for m in &row.per_model {
            s.push_str(&format!(
                "{} model for cluster {}: train {}/{}, test {}/{}\n",
                row.variant, m.positive_cluster, m.train_correct, report.n, m.test_correct, report.n
            ));
        }
    }
    s
}

fn write_report(out: &mut OutputTree, data: &PreparedData, cfg: &PipelineConfig, report: &AccuracyReport) -> Result<()> {
    let r = Report {
        n_individuals: data.padded.len(),
        k: data.labels.k(),
        n_features: data.padded.n_features(),
        split: cfg.split,
        checkpoint_version: CHECKPOINT_VERSION,
        accuracy: report,
    };
    out.write_str("report.json", &serde_json::to_string_pretty(&r)?)?;
    out.write_str("report.txt", &report_text(report))?;
    Ok(())
}

/// Feature indices and individuals named in the config, resolved against the data.
pub fn explain_targets(cfg: &PipelineConfig, data: &PreparedData) -> Result<ExplainTargets> {
    let names = data.feature_names();
    let e = &cfg.explain;
    let individuals = if e.individuals.is_empty() {
        let clusters = data.labels.aligned(&data.train.ids)?;
        (0..data.labels.k())
            .filter_map(|c| clusters.iter().position(|&x| x == c).map(|i| data.train.ids[i].clone()))
            .collect()
    } else {
        e.individuals.clone()
    };
    Ok(ExplainTargets {
        scatter_feature: e.scatter_feature.resolve(names)?,
        pair: (e.pair.0.resolve(names)?, e.pair.1.resolve(names)?),
        individuals,
    })
}

/// Computes the explanation outputs of one ensemble on the training split.
pub fn explain_ensemble(cfg: &PipelineConfig, data: &PreparedData, ens: &EnsembleModel) -> Result<ExplanationBundleOut> {
    let targets = explain_targets(cfg, data)?;
    let table = AttentionTable::compute(ens, &data.train, &data.labels, cfg.explain.core())?;
    Ok(explain_all(&table, &data.labels, &targets)?)
}

fn write_explanations(
    out: &mut OutputTree,
    cfg: &PipelineConfig,
    data: &PreparedData,
    variant: Variant,
    b: &ExplanationBundleOut,
) -> Result<()> {
    let names = data.feature_names();
    let targets = explain_targets(cfg, data)?;
    let dir = format!("explain/{}", variant.name());
    let plots = format!("plots/{}", variant.name());
    let (fa, fb) = targets.pair;
    let scatter_name = &names[targets.scatter_feature];

    out.write_str(&format!("{dir}/correlation_profiles.csv"), &export::correlation_profiles_csv(&b.profiles, names)?)?;
    for h in &b.heatmaps {
        out.write_str(&format!("{dir}/heatmap_cluster{}.csv", h.cluster), &export::heatmap_csv(h, names)?)?;
    }
    out.write_str(
        &format!("{dir}/attention_vs_{}.csv", file_stem(scatter_name)),
        &export::attention_vs_feature_csv(&b.attention_vs_feature, scatter_name)?,
    )?;
    out.write_str(
        &format!("{dir}/interaction_{}_{}.csv", file_stem(&names[fa]), file_stem(&names[fb])),
        &export::interaction_csv(&b.interactions, &names[fa], &names[fb])?,
    )?;
    for s in &b.summaries {
        out.write_str(&format!("{dir}/summary_{}.csv", file_stem(&s.id)), &export::individual_summary_csv(s, names)?)?;
    }
    for (id, rows) in &b.cross_model {
        out.write_str(
            &format!("{dir}/cross_model_{}.csv", file_stem(id)),
            &export::cross_model_csv(rows, &names[fa], &names[fb])?,
        )?;
    }

    let p = &cfg.plots;
    if p.corr_bars {
        for prof in &b.profiles {
            let svg = render_svg(&Artifact::CorrBars {
                profile: prof,
                feature_names: names,
            })?;
            out.write_str(&format!("{plots}/corr_bars_cluster{}.svg", prof.cluster), &svg)?;
        }
    }
    if p.heatmap {
        for h in &b.heatmaps {
            let svg = render_svg(&Artifact::Heatmap {
                heatmap: h,
                feature_names: names,
            })?;
            out.write_str(&format!("{plots}/heatmap_cluster{}.svg", h.cluster), &svg)?;
        }
    }
    if p.scatter {
        let svg = render_svg(&Artifact::Scatter {
            records: &b.attention_vs_feature,
            feature_name: scatter_name,
        })?;
        out.write_str(&format!("{plots}/scatter.svg"), &svg)?;
    }
    if p.summary {
        for s in &b.summaries {
            let svg = render_svg(&Artifact::Summary {
                summary: s,
                feature_names: names,
                top_n: cfg.explain.summary_top_n,
            })?;
            out.write_str(&format!("{plots}/summary_{}.svg", file_stem(&s.id)), &svg)?;
        }
    }
    Ok(())
}

fn finish(out: &mut OutputTree, cfg: &PipelineConfig, timer: Timer) -> Result<RunManifest> {
    let versions = BTreeMap::from([
        ("clusterlens-core".to_string(), clusterlens_core::VERSION.to_string()),
        ("clusterlens-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("checkpoint-format".to_string(), CHECKPOINT_VERSION.to_string()),
    ]);
    let manifest = RunManifest {
        config_hash: config_hash(cfg),
        versions,
        timings: timer.timings,
        files: out.entries(),
    };
    out.write_str("manifest.json", &serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn train_and_report(
    cfg: &PipelineConfig,
    data: &PreparedData,
    out: &mut OutputTree,
    timer: &mut Timer,
) -> Result<Vec<EnsembleModel>> {
    let mut ensembles = Vec::new();
    let mut report: Option<AccuracyReport> = None;
    for &variant in &cfg.variants {
        let ens = timer.stage(&format!("train:{variant}"), || {
            Ok(train_ensemble(&data.train, &data.labels, &cfg.hyperparams(variant))?)
        })?;
        let r = timer.stage(&format!("evaluate:{variant}"), || {
            Ok(evaluate(&ens, &data.train, &data.test, &data.labels)?)
        })?;
        report = Some(match report {
            None => r,
            Some(prev) => prev.merge(r)?,
        });
        write_models(out, &ens)?;
        ensembles.push(ens);
    }
    write_report(out, data, cfg, report.as_ref().expect("at least one variant"))?;
    Ok(ensembles)
}

fn explain_stage(
    cfg: &PipelineConfig,
    data: &PreparedData,
    ensembles: &[EnsembleModel],
    out: &mut OutputTree,
    timer: &mut Timer,
) -> Result<()> {
    let mut similarity_written = false;
    for ens in ensembles.iter().filter(|e| e.variant().has_temporal_attention()) {
        let variant = ens.variant();
        let bundle = timer.stage(&format!("explain:{variant}"), || explain_ensemble(cfg, data, ens))?;
        timer.stage(&format!("render:{variant}"), || write_explanations(out, cfg, data, variant, &bundle))?;
        if !similarity_written {
            out.write_str(
                "explain/similarity.csv",
                &export::similarity_csv(&bundle.similarity, data.labels.k())?,
            )?;
            similarity_written = true;
        }
    }
    Ok(())
}

/// Full chain: ingest, preprocess, train and evaluate every variant, explain
/// the attention variants, render plots and write the manifest.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let mut timer = Timer::new();
    let data = timer.stage("ingest", || {
        let (raw, labels, gt) = load_inputs(cfg)?;
        prepare_from(cfg, raw, labels, gt)
    })?;
    let mut out = OutputTree::create(&cfg.output_dir)?;
    if cfg.synth.is_some() {
        write_inputs(&mut out, &data)?;
    }
    let ensembles = train_and_report(cfg, &data, &mut out, &mut timer)?;
    explain_stage(cfg, &data, &ensembles, &mut out, &mut timer)?;
    finish(&mut out, cfg, timer)
}

/// Training and evaluation only; checkpoints land under `models/`.
pub fn run_train(cfg: &PipelineConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let mut timer = Timer::new();
    let data = timer.stage("ingest", || prepare_data(cfg))?;
    let mut out = OutputTree::create(&cfg.output_dir)?;
    train_and_report(cfg, &data, &mut out, &mut timer)?;
    finish(&mut out, cfg, timer)
}

/// Explanations from checkpoints previously written under `models_dir`.
pub fn run_explain(cfg: &PipelineConfig, models_dir: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut timer = Timer::new();
    let data = timer.stage("ingest", || prepare_data(cfg))?;
    let ensembles = cfg
        .variants
        .iter()
        .filter(|v| v.has_temporal_attention())
        .map(|&v| load_models(models_dir, v, data.labels.k()))
        .collect::<Result<Vec<_>>>()?;
    let mut out = OutputTree::create(&cfg.output_dir)?;
    explain_stage(cfg, &data, &ensembles, &mut out, &mut timer)?;
    finish(&mut out, cfg, timer)
}

/// Generates the configured synthetic dataset and writes it under `data/`.
pub fn run_synth(cfg: &PipelineConfig) -> Result<RunManifest> {
    if cfg.synth.is_none() {
        return Err(ConfigError::Invalid("synth needs a [synth] table".into()).into());
    }
    cfg.validate()?;
    let mut timer = Timer::new();
    let data = timer.stage("generate", || prepare_data(cfg))?;
    let mut out = OutputTree::create(&cfg.output_dir)?;
    write_inputs(&mut out, &data)?;
    finish(&mut out, cfg, timer)
}
