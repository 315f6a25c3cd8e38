//! Pipeline configuration, read from a TOML file.
//!
//! A minimal file needs either a `[data]` table pointing at a long-format CSV
//! plus a labels CSV, or a `[synth]` table. Everything else has defaults:
//!
//! ```toml
//! seed = 7
//! split = 0.7
//! variants = ["recurrent_baseline", "temporal_only", "dual"]
//!
//! [synth]
//! n_per_cluster = 20
//! k = 3
//!
//! [hyper]
//! epochs = 300
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use clusterlens_core::data::{IngestConfig, Normalization};
use clusterlens_core::explain::{AveragingAxis, CorrelationMethod, ExplainConfig, RenormOrder};
use clusterlens_core::model::{ClassWeighting, Hyperparams};
use clusterlens_core::synth::{GroundTruthSpec, SignalKind, SynthConfig};
use clusterlens_core::Variant;

/// Environment variable that overrides `output_dir`.
pub const OUT_DIR_ENV: &str = "CLUSTERLENS_OUT";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub dataset: PathBuf,
    pub labels: Option<PathBuf>,
    pub k: Option<usize>,
    #[serde(default = "default_id_column")]
    pub id_column: String,
    #[serde(default = "default_time_column")]
    pub time_column: String,
}

fn default_id_column() -> String {
    IngestConfig::default().id_column
}

fn default_time_column() -> String {
    IngestConfig::default().time_column
}

impl DataSection {
    pub fn ingest(&self) -> IngestConfig {
        IngestConfig {
            id_column: self.id_column.clone(),
            time_column: self.time_column.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSection {
    #[serde(flatten)]
    pub config: SynthConfig,
    #[serde(default = "default_signal")]
    pub signal: SignalKind,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Explicit planted signals; replaces `signal`/`amplitude` when present.
    #[serde(default)]
    pub ground_truth: Option<GroundTruthSpec>,
}

fn default_signal() -> SignalKind {
    SignalKind::MeanShift
}

fn default_amplitude() -> f64 {
    0.3
}

impl SynthSection {
    pub fn spec(&self) -> GroundTruthSpec {
        self.ground_truth.clone().unwrap_or_else(|| {
            GroundTruthSpec::planted(self.config.k, self.config.v, self.signal, self.amplitude)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    #[serde(default = "d_k")]
    pub d_k: usize,
    #[serde(default = "d_f")]
    pub d_f: usize,
    #[serde(default = "lr")]
    pub lr: f64,
    #[serde(default = "epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub class_weighting: ClassWeighting,
}

fn d_k() -> usize {
    Hyperparams::default().d_k
}
fn d_f() -> usize {
    Hyperparams::default().d_f
}
fn lr() -> f64 {
    Hyperparams::default().lr
}
fn epochs() -> usize {
    Hyperparams::default().epochs
}

impl Default for HyperSection {
    fn default() -> Self {
        Self {
            d_k: d_k(),
            d_f: d_f(),
            lr: lr(),
            epochs: epochs(),
            class_weighting: ClassWeighting::None,
        }
    }
}

/// A feature given by column name or by index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureRef {
    Index(usize),
    Name(String),
}

impl FeatureRef {
    pub fn resolve(&self, names: &[String]) -> Result<usize, ConfigError> {
        match self {
            FeatureRef::Index(i) if *i < names.len() => Ok(*i),
            FeatureRef::Index(i) => invalid(format!("feature index {i} out of range (V = {})", names.len())),
            FeatureRef::Name(n) => names
                .iter()
                .position(|x| x == n)
                .ok_or_else(|| ConfigError::Invalid(format!("unknown feature '{n}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainSection {
    #[serde(default)]
    pub averaging_axis: AveragingAxis,
    #[serde(default)]
    pub renorm_order: RenormOrder,
    #[serde(default)]
    pub correlation: CorrelationMethod,
    /// Feature whose per-individual mean goes on the scatter x-axis.
    #[serde(default = "first_feature")]
    pub scatter_feature: FeatureRef,
    #[serde(default = "first_pair")]
    pub pair: (FeatureRef, FeatureRef),
    /// Individuals with per-individual summaries; empty means the first
    /// member of every cluster.
    #[serde(default)]
    pub individuals: Vec<String>,
    #[serde(default = "top_n")]
    pub summary_top_n: usize,
}

fn first_feature() -> FeatureRef {
    FeatureRef::Index(0)
}
fn first_pair() -> (FeatureRef, FeatureRef) {
    (FeatureRef::Index(0), FeatureRef::Index(1))
}
fn top_n() -> usize {
    5
}

impl Default for ExplainSection {
    fn default() -> Self {
        Self {
            averaging_axis: AveragingAxis::default(),
            renorm_order: RenormOrder::default(),
            correlation: CorrelationMethod::default(),
            scatter_feature: first_feature(),
            pair: first_pair(),
            individuals: Vec::new(),
            summary_top_n: top_n(),
        }
    }
}

impl ExplainSection {
    pub fn core(&self) -> ExplainConfig {
        ExplainConfig {
            averaging_axis: self.averaging_axis,
            renorm_order: self.renorm_order,
            correlation: self.correlation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotToggles {
    #[serde(default = "yes")]
    pub corr_bars: bool,
    #[serde(default = "yes")]
    pub heatmap: bool,
    #[serde(default = "yes")]
    pub scatter: bool,
    #[serde(default = "yes")]
    pub summary: bool,
}

fn yes() -> bool {
    true
}

impl Default for PlotToggles {
    fn default() -> Self {
        Self {
            corr_bars: true,
            heatmap: true,
            scatter: true,
            summary: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seeds the synthetic generator and model initialisation.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_split")]
    pub split: f64,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default = "all_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub normalization: Normalization,
    /// Pad every series to this length instead of the longest one.
    #[serde(default)]
    pub t_cap: Option<usize>,
    #[serde(default)]
    pub data: Option<DataSection>,
    #[serde(default)]
    pub synth: Option<SynthSection>,
    #[serde(default)]
    pub hyper: HyperSection,
    #[serde(default)]
    pub explain: ExplainSection,
    #[serde(default)]
    pub plots: PlotToggles,
}

fn default_split() -> f64 {
    0.7
}
fn default_out() -> PathBuf {
    PathBuf::from("clusterlens-out")
}
fn all_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a config file; relative data paths are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(d) = cfg.data.as_mut() {
            d.dataset = base.join(&d.dataset);
            d.labels = d.labels.as_ref().map(|l| base.join(l));
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    /// Output directory after the environment override.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
    }

    pub fn hyperparams(&self, variant: Variant) -> Hyperparams {
        Hyperparams {
            d_k: self.hyper.d_k,
            d_f: self.hyper.d_f,
            lr: self.hyper.lr,
            epochs: self.hyper.epochs,
            seed: self.seed,
            variant,
            class_weighting: self.hyper.class_weighting,
        }
    }

    /// Checks everything that can be checked without touching the data.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return invalid(format!("split = {} must lie in (0, 1)", self.split));
        }
        if self.variants.is_empty() {
            return invalid("no variants selected");
        }
        let mut seen = self.variants.clone();
        seen.sort_by_key(|v| v.name());
        seen.dedup();
        if seen.len() != self.variants.len() {
            return invalid("variants listed more than once");
        }
        match (&self.data, &self.synth) {
            (Some(_), Some(_)) => return invalid("give either [data] or [synth], not both"),
            (None, None) => return invalid("no input: add a [data] or [synth] table"),
            (Some(d), None) => {
                let Some(labels) = &d.labels else {
                    return invalid("[data] needs a labels path (or use [synth])");
                };
                if d.k.is_none() {
                    return invalid("[data] needs k, the number of clusters");
                }
                for p in [&d.dataset, labels] {
                    if !p.is_file() {
                        return invalid(format!("{} does not exist", p.display()));
                    }
                }
            }
            (None, Some(_)) => {}
        }
        if let Err(e) = self.hyperparams(Variant::Dual).validate() {
            return invalid(e.to_string());
        }
        if self.explain.summary_top_n == 0 {
            return invalid("summary_top_n must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let cfg = PipelineConfig::from_toml("[synth]\nk = 3\n").unwrap();
        assert_eq!(cfg.split, 0.7);
        assert_eq!(cfg.variants, Variant::ALL.to_vec());
        assert_eq!(cfg.hyper.epochs, 300);
        assert_eq!(cfg.synth.as_ref().unwrap().config.n_per_cluster, 20);
        cfg.validate().unwrap();
    }

    #[test]
    fn labels_are_required_without_synth() {
        let cfg = PipelineConfig::from_toml("[data]\ndataset = \"x.csv\"\nk = 3\n").unwrap();
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_toml("sead = 3\n").is_err());
    }

    #[test]
    fn split_out_of_range() {
        let cfg = PipelineConfig::from_toml("split = 1.0\n[synth]\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn feature_refs() {
        let names: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        assert_eq!(FeatureRef::Name("b".into()).resolve(&names).unwrap(), 1);
        assert!(FeatureRef::Index(2).resolve(&names).is_err());
    }
}
