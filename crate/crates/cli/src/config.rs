use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use gramforge::categories::CategoryConfig;
use gramforge::induction::{EvaluationMode, InductionConfig};
use gramforge::oracle::RemoteConfig;
use gramforge::poc::PocConfig;
use gramforge::wsd::WsdConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const CONFIG_ENV: &str = "GRAMFORGE_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NgramSpec {
    pub order: usize,
    pub smoothing_k: f64,
}

impl Default for NgramSpec {
    fn default() -> Self {
        NgramSpec {
            order: 3,
            smoothing_k: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OracleSpec {
    Ngram(NgramSpec),
    Remote(RemoteConfig),
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec::Ngram(NgramSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PocSettings {
    pub corpus_sentences: usize,
    pub order: usize,
    pub smoothing_k: f64,
}

impl Default for PocSettings {
    fn default() -> Self {
        let d = PocConfig::default();
        PocSettings {
            corpus_sentences: d.corpus_sentences,
            order: d.order,
            smoothing_k: d.smoothing_k,
        }
    }
}

/// Everything a run depends on. `seed` drives every random stream; the
/// seeds inside `wsd` and `induction` are overwritten with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    #[serde(skip_serializing)]
    pub log_level: String,
    #[serde(skip_serializing)]
    pub jobs: usize,
    pub seed: u64,
    pub oracle: OracleSpec,
    pub wsd: WsdConfig,
    pub categories: CategoryConfig,
    pub induction: InductionConfig,
    pub poc: PocSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: None,
            output_dir: PathBuf::from("gramforge-out"),
            log_level: "info".into(),
            jobs: 0,
            seed: 0,
            oracle: OracleSpec::default(),
            wsd: WsdConfig::default(),
            categories: CategoryConfig::default(),
            induction: InductionConfig::default(),
            poc: PocSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Ngram,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Mutation,
    Reference,
}

/// Flags that override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML config file (default: $GRAMFORGE_CONFIG)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Corpus: one sentence per line, or JSON lines with a "tokens" array
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Artifact directory
    #[arg(long = "out", global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub log_level: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub oracle: Option<OracleKind>,
    /// n-gram order
    #[arg(long, global = true)]
    pub order: Option<usize>,
    /// Add-k smoothing constant
    #[arg(long, global = true)]
    pub smoothing_k: Option<f64>,
    /// Oracle service URL
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    /// Oracle request timeout in seconds
    #[arg(long, global = true)]
    pub timeout: Option<f64>,
    #[arg(long, global = true)]
    pub max_inflight: Option<usize>,
    /// Senses per word
    #[arg(long, global = true)]
    pub wsd_k: Option<usize>,
    /// Fraction of least frequent words kept at one sense
    #[arg(long, global = true)]
    pub filter_fraction: Option<f64>,
    /// OPTICS minimum neighbourhood size
    #[arg(long, global = true)]
    pub min_samples: Option<usize>,
    #[arg(long, global = true)]
    pub xi: Option<f64>,
    /// Acceptance threshold in nats
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Sentences generated per rule
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
}

fn config_error(path: &Path, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {message}", path.display()))
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads the file named by `--config` or the environment fallback.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let env_path = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let Some(path) = path.map(Path::to_path_buf).or(env_path) else {
            return Ok(PipelineConfig::default());
        };
        let text = fs::read_to_string(&path).map_err(|e| config_error(&path, e))?;
        PipelineConfig::from_toml(&text).map_err(|e| config_error(&path, e))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(v) = &o.corpus {
            self.corpus = Some(v.clone());
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.jobs {
            self.jobs = v;
        }
        if let Some(v) = &o.log_level {
            self.log_level = v.clone();
        }
        match (o.oracle, &self.oracle) {
            (Some(OracleKind::Ngram), OracleSpec::Remote(_)) => self.oracle = OracleSpec::default(),
            (Some(OracleKind::Remote), OracleSpec::Ngram(_)) => {
                self.oracle = OracleSpec::Remote(RemoteConfig::default())
            }
            _ => {}
        }
        match &mut self.oracle {
            OracleSpec::Ngram(spec) => {
                if o.endpoint.is_some() || o.timeout.is_some() || o.max_inflight.is_some() {
                    return Err(CliError::Usage(
                        "--endpoint, --timeout and --max-inflight need the remote oracle (--oracle remote)".into(),
                    ));
                }
                if let Some(v) = o.order {
                    spec.order = v;
                }
                if let Some(v) = o.smoothing_k {
                    spec.smoothing_k = v;
                }
            }
            OracleSpec::Remote(remote) => {
                if o.order.is_some() || o.smoothing_k.is_some() {
                    return Err(CliError::Usage(
                        "--order and --smoothing-k need the n-gram oracle (--oracle ngram)".into(),
                    ));
                }
                if let Some(v) = &o.endpoint {
                    remote.endpoint = v.clone();
                }
                if let Some(v) = o.timeout {
                    remote.timeout_secs = v;
                }
                if let Some(v) = o.max_inflight {
                    remote.max_inflight = v;
                }
            }
        }
        if let Some(v) = o.wsd_k {
            self.wsd.k = v;
        }
        if let Some(v) = o.filter_fraction {
            self.wsd.filter_fraction = v;
        }
        if let Some(v) = o.min_samples {
            self.categories.min_samples = v;
        }
        if let Some(v) = o.xi {
            self.categories.xi = v;
        }
        if let Some(v) = o.threshold {
            self.induction.threshold = v;
        }
        if let Some(v) = o.samples {
            self.induction.samples_per_rule = v;
        }
        if let Some(v) = o.mode {
            self.induction.mode = match v {
                ModeArg::Mutation => EvaluationMode::Mutation,
                ModeArg::Reference => EvaluationMode::Reference,
            };
        }
        self.wsd.seed = self.seed;
        self.induction.seed = self.seed;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(p) = &self.corpus {
            if !p.is_file() {
                return bad(format!("corpus {} does not exist", p.display()));
            }
        }
        if log::LevelFilter::from_str(&self.log_level).is_err() {
            return bad(format!("unknown log level {:?}", self.log_level));
        }
        match &self.oracle {
            OracleSpec::Ngram(s) => {
                if s.order == 0 {
                    return bad("oracle.order must be at least 1".into());
                }
                if !(s.smoothing_k > 0.0 && s.smoothing_k.is_finite()) {
                    return bad(format!("oracle.smoothing_k must be positive, got {}", s.smoothing_k));
                }
            }
            OracleSpec::Remote(r) => {
                if !(r.endpoint.starts_with("http://") || r.endpoint.starts_with("https://")) {
                    return bad(format!("oracle.endpoint must be an http(s) URL, got {:?}", r.endpoint));
                }
                if !(r.timeout_secs > 0.0 && r.timeout_secs.is_finite()) {
                    return bad(format!("oracle.timeout_secs must be positive, got {}", r.timeout_secs));
                }
                if r.max_inflight == 0 {
                    return bad("oracle.max_inflight must be at least 1".into());
                }
            }
        }
        if self.wsd.k == 0 || self.wsd.per_word_k.values().any(|&k| k == 0) {
            return bad("wsd.k must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.wsd.filter_fraction) {
            return bad(format!("wsd.filter_fraction must be in [0, 1), got {}", self.wsd.filter_fraction));
        }
        if self.wsd.n_init == 0 || self.wsd.max_iters == 0 {
            return bad("wsd.n_init and wsd.max_iters must be at least 1".into());
        }
        if self.categories.min_samples < 2 {
            return bad("categories.min_samples must be at least 2".into());
        }
        if !(self.categories.xi > 0.0 && self.categories.xi < 1.0) {
            return bad(format!("categories.xi must be in (0, 1), got {}", self.categories.xi));
        }
        if self.induction.samples_per_rule == 0 {
            return bad("induction.samples_per_rule must be at least 1".into());
        }
        if !(self.induction.threshold >= 0.0 && self.induction.threshold.is_finite()) {
            return bad(format!("induction.threshold must be non-negative, got {}", self.induction.threshold));
        }
        if self.poc.corpus_sentences == 0 || self.poc.order == 0 {
            return bad("poc.corpus_sentences and poc.order must be at least 1".into());
        }
        if !(self.poc.smoothing_k > 0.0 && self.poc.smoothing_k.is_finite()) {
            return bad(format!("poc.smoothing_k must be positive, got {}", self.poc.smoothing_k));
        }
        Ok(())
    }

    pub fn poc_config(&self) -> PocConfig {
        PocConfig {
            corpus_sentences: self.poc.corpus_sentences,
            order: self.poc.order,
            smoothing_k: self.poc.smoothing_k,
            induction: self.induction.clone(),
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_defaults() {
        let c = PipelineConfig::from_toml(
            "seed = 4\n[oracle]\nkind = \"remote\"\nendpoint = \"http://h:1\"\n[wsd]\nk = 3\n",
        )
        .unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.wsd.k, 3);
        assert_eq!(c.wsd.filter_fraction, WsdConfig::default().filter_fraction);
        let OracleSpec::Remote(r) = &c.oracle else { panic!("{:?}", c.oracle) };
        assert_eq!(r.endpoint, "http://h:1");
        assert_eq!(r.max_inflight, RemoteConfig::default().max_inflight);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_toml("sed = 4\n").is_err());
        assert!(PipelineConfig::from_toml("[oracle]\nkind = \"ngram\"\nordr = 2\n").is_err());
    }

    #[test]
    fn flags_win() {
        let mut c = PipelineConfig::from_toml("seed = 4\n[oracle]\nkind = \"ngram\"\norder = 2\n").unwrap();
        let o = Overrides {
            seed: Some(9),
            order: Some(5),
            ..Default::default()
        };
        c.apply(&o).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.oracle, OracleSpec::Ngram(NgramSpec { order: 5, smoothing_k: 0.1 }));
        assert_eq!((c.wsd.seed, c.induction.seed), (9, 9));
    }

    #[test]
    fn remote_flags_need_the_remote_oracle() {
        let o = Overrides {
            endpoint: Some("http://x".into()),
            ..Default::default()
        };
        assert!(matches!(PipelineConfig::default().apply(&o), Err(CliError::Usage(_))));
    }

    #[test]
    fn hash_ignores_output_placement() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        b.jobs = 3;
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
