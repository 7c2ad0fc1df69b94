//! Training settings resolution: built-in defaults, then a key=value config
//! file, then command-line flags. The resolved settings are echoed into the
//! output directory for reproducibility.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hyperkge::error::{Error, Result};
use hyperkge::eval::EvalMode;
use hyperkge::train::{Precision, TrainConfig};

/// Optional overrides collected from the config file or the command line.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub model: Option<String>,
    pub norm: Option<String>,
    pub dim: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub batch_size: Option<usize>,
    pub label_smoothing: Option<f64>,
    pub seed: Option<u64>,
    pub filters: Option<usize>,
    pub kernel_size: Option<usize>,
    pub dropout_input: Option<f64>,
    pub dropout_feature: Option<f64>,
    pub dropout_hidden: Option<f64>,
    pub precision: Option<String>,
}

impl Overrides {
    /// Parse a `key=value` file; `#` starts a comment, blank lines ignored.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut over = Overrides::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config(format!(
                "config line {}: expected key=value, got {raw:?}",
                idx + 1
            )))?;
            over.set(key.trim(), value.trim())?;
        }
        Ok(over)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("config key {key}: bad value {value:?}")))
        }
        match key {
            "model" => self.model = Some(value.to_string()),
            "norm" => self.norm = Some(value.to_string()),
            "dim" => self.dim = Some(num(key, value)?),
            "epochs" => self.epochs = Some(num(key, value)?),
            "lr" => self.lr = Some(num(key, value)?),
            "beta1" => self.beta1 = Some(num(key, value)?),
            "beta2" => self.beta2 = Some(num(key, value)?),
            "batch_size" => self.batch_size = Some(num(key, value)?),
            "label_smoothing" => self.label_smoothing = Some(num(key, value)?),
            "seed" => self.seed = Some(num(key, value)?),
            "filters" => self.filters = Some(num(key, value)?),
            "kernel_size" => self.kernel_size = Some(num(key, value)?),
            "dropout_input" => self.dropout_input = Some(num(key, value)?),
            "dropout_feature" => self.dropout_feature = Some(num(key, value)?),
            "dropout_hidden" => self.dropout_hidden = Some(num(key, value)?),
            "precision" => self.precision = Some(value.to_string()),
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Apply on top of a config; `self` wins where set.
    pub fn apply(&self, config: &mut TrainConfig) -> Result<()> {
        if let Some(m) = &self.model {
            config.kind = m.parse()?;
        }
        if let Some(n) = &self.norm {
            config.norm = n.parse()?;
        }
        if let Some(v) = self.dim {
            config.dim = v;
        }
        if let Some(v) = self.epochs {
            config.epochs = v;
        }
        if let Some(v) = self.lr {
            config.lr = v;
        }
        if let Some(v) = self.beta1 {
            config.beta1 = v;
        }
        if let Some(v) = self.beta2 {
            config.beta2 = v;
        }
        if let Some(v) = self.batch_size {
            config.batch_size = v;
        }
        if let Some(v) = self.label_smoothing {
            config.label_smoothing = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.filters {
            config.conv.filters = v;
        }
        if let Some(v) = self.kernel_size {
            config.conv.kernel_size = v;
        }
        if let Some(v) = self.dropout_input {
            config.conv.dropout_input = v;
        }
        if let Some(v) = self.dropout_feature {
            config.conv.dropout_feature = v;
        }
        if let Some(v) = self.dropout_hidden {
            config.conv.dropout_hidden = v;
        }
        if let Some(p) = &self.precision {
            config.precision = p.parse()?;
        }
        Ok(())
    }
}

/// Resolve defaults → config file → flags into one training config.
pub fn resolve(config_file: Option<&Path>, flags: &Overrides) -> Result<TrainConfig> {
    let mut config = TrainConfig::default();
    if let Some(path) = config_file {
        Overrides::from_file(path)?.apply(&mut config)?;
    }
    flags.apply(&mut config)?;
    config.validate()?;
    Ok(config)
}

/// Render the fully resolved settings as stable key=value text.
pub fn echo(config: &TrainConfig, dataset: &Path, eval_mode: EvalMode, threads: usize) -> String {
    let mut map = BTreeMap::new();
    map.insert("batch_size", config.batch_size.to_string());
    map.insert("beta1", config.beta1.to_string());
    map.insert("beta2", config.beta2.to_string());
    map.insert("dataset", dataset.display().to_string());
    map.insert("dim", config.dim.to_string());
    map.insert("dropout_feature", config.conv.dropout_feature.to_string());
    map.insert("dropout_hidden", config.conv.dropout_hidden.to_string());
    map.insert("dropout_input", config.conv.dropout_input.to_string());
    map.insert("epochs", config.epochs.to_string());
    map.insert("eval_mode", eval_mode.to_string());
    map.insert("filters", config.conv.filters.to_string());
    map.insert("kernel_size", config.conv.kernel_size.to_string());
    map.insert("label_smoothing", config.label_smoothing.to_string());
    map.insert("lr", config.lr.to_string());
    map.insert("model", config.kind.to_string());
    map.insert("norm", config.norm.to_string());
    map.insert(
        "precision",
        match config.precision {
            Precision::F32 => "32".into(),
            Precision::F64 => "64".into(),
        },
    );
    map.insert("seed", config.seed.to_string());
    map.insert("threads", threads.to_string());
    let mut out = String::new();
    for (k, v) in map {
        let _ = writeln!(out, "{k}={v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use hyperkge::model::ModelKind;

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.conf");
        fs::write(&file, "model=convq\nlr=0.01 # tuned\n\n# comment\nepochs=7\n").unwrap();
        let flags = Overrides { lr: Some(0.5), ..Overrides::default() };
        let config = resolve(Some(file.as_path()), &flags).unwrap();
        assert_eq!(config.kind, ModelKind::ConvQ);
        assert_eq!(config.lr, 0.5);
        assert_eq!(config.epochs, 7);
        assert_eq!(config.batch_size, 256);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("bad.conf");
        fs::write(&file, "wat=1\n").unwrap();
        assert!(resolve(Some(file.as_path()), &Overrides::default()).is_err());
        fs::write(&file, "epochs=soon\n").unwrap();
        assert!(resolve(Some(file.as_path()), &Overrides::default()).is_err());
    }
}
