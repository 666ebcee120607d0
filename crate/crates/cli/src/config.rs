//! Run configuration: a TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vrn_core::eval::SupervisedConfig;
use vrn_core::infer::InferenceConfig;
use vrn_core::pipeline::DatasetConfig;
use vrn_core::train::TrainConfig;
use vrn_core::ModelConfig;

/// Configuration problems exit with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct ConfigError {
    pub message: String,
    /// Offending key, when one can be named.
    pub key: Option<String>,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self { message: message.into(), key: None }
    }

    fn with_key(message: impl Into<String>, key: &str) -> Self {
        Self { message: message.into(), key: Some(key.to_owned()) }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Root seed; every section seed is derived from it.
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub data: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub inference: InferenceConfig,
    pub supervised: SupervisedConfig,
}

/// Keys that mirror another setting and may not be set by hand.
const DERIVED: [(&str, &str); 8] = [
    ("data.seed", "seed"),
    ("data.kg.seed", "seed"),
    ("data.noise.seed", "seed"),
    ("train.seed", "seed"),
    ("supervised.seed", "seed"),
    ("train.hops", "data.hops"),
    ("inference.hops", "data.hops"),
    ("train.label_fraction", "data.label_fraction"),
];

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub hops: Option<usize>,
    pub label_fraction: Option<f64>,
    pub beam: Option<usize>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

fn unknown_field(msg: &str) -> Option<&str> {
    let rest = &msg[msg.find("unknown field `")? + "unknown field `".len()..];
    Some(&rest[..rest.find('`')?])
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn check_derived(raw: &toml::Table) -> Result<(), ConfigError> {
    for (path, source) in DERIVED {
        let mut parts = path.split('.');
        let first = raw.get(parts.next().expect("nonempty path"));
        if parts.try_fold(first, |v, k| v.map(|v| v.get(k))).flatten().is_some() {
            return Err(ConfigError::with_key(format!("`{path}` is derived from `{source}`; set that instead"), path));
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: toml::Table = text.parse().map_err(|e: toml::de::Error| syntax_error(text, &e))?;
        check_derived(&raw)?;
        toml::from_str(text).map_err(|e| syntax_error(text, &e))
    }

    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    /// Applies flag overrides, propagates shared settings and validates.
    pub fn resolve(mut self, o: &Overrides) -> Result<Self, ConfigError> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(h) = o.hops {
            self.data.hops = h;
        }
        if let Some(f) = o.label_fraction {
            self.data.label_fraction = f;
        }
        if let Some(b) = o.beam {
            self.inference.beam = b;
        }
        if let Some(w) = o.workers {
            self.train.workers = w;
        }
        if o.out.is_some() {
            self.out.clone_from(&o.out);
        }
        self.data.seed = self.seed;
        self.data.kg.seed = self.seed;
        self.data.noise.seed = self.seed;
        self.train.seed = self.seed;
        self.supervised.seed = self.seed;
        self.train.hops = self.data.hops;
        self.inference.hops = self.data.hops;
        self.train.label_fraction = self.data.label_fraction;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let wrap = |section: &str, r: vrn_core::Result<()>| r.map_err(|e| ConfigError::with_key(format!("{section}: {e}"), section));
        wrap("data", self.data.validate())?;
        wrap("train", self.train.validate())?;
        wrap("inference", self.inference.validate())?;
        if self.model.dim == 0 {
            return Err(ConfigError::with_key("model.dim must be >= 1", "model.dim"));
        }
        if self.model.init_scale.is_nan() || self.model.init_scale <= 0.0 {
            return Err(ConfigError::with_key("model.init_scale must be > 0", "model.init_scale"));
        }
        if self.train.workers == 0 {
            return Err(ConfigError::with_key("train.workers must be >= 1", "train.workers"));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("run"))
    }

    pub fn regime(&self) -> &'static str {
        if self.data.label_fraction >= 1.0 {
            "vanilla"
        } else {
            "eu"
        }
    }
}

fn syntax_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let msg = e.message().replace('\n', " ");
    let line = e.span().map(|s| format!(" (line {})", line_of(text, s.start))).unwrap_or_default();
    match unknown_field(&msg) {
        Some(key) => ConfigError::with_key(format!("unknown config key `{key}`{line}: {msg}"), key),
        None => ConfigError::new(format!("config{line}: {msg}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn nested_sections() {
        let c = RunConfig::parse("seed = 4\n[data]\nhops = 2\n[data.kg]\nmovies = 30\n[train]\nepochs = 3\n").unwrap();
        let c = c.resolve(&Overrides::default()).unwrap();
        assert_eq!(c.data.kg.movies, 30);
        assert_eq!((c.train.hops, c.inference.hops, c.train.seed, c.data.kg.seed), (2, 2, 4, 4));
    }

    #[test]
    fn unknown_key_is_named() {
        let e = RunConfig::parse("[train]\nlearning_rat = 1.0\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("learning_rat"));
        assert!(e.message.contains("learning_rat") && e.message.contains("line 2"), "{}", e.message);
        assert!(!e.message.contains('\n'));
    }

    #[test]
    fn derived_keys_rejected() {
        let e = RunConfig::parse("[train]\nhops = 2\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("train.hops"));
    }

    #[test]
    fn flags_win() {
        let c = RunConfig::parse("seed = 1\n[data]\nhops = 1\n").unwrap();
        let o = Overrides { seed: Some(9), hops: Some(3), beam: Some(4), ..Default::default() };
        let c = c.resolve(&o).unwrap();
        assert_eq!((c.seed, c.data.hops, c.inference.beam), (9, 3, 4));
        let bad = Overrides { hops: Some(4), ..Default::default() };
        assert!(RunConfig::default().resolve(&bad).is_err());
    }
}
