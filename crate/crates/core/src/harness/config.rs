use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::detector::DetectorKind;
use crate::error::{Error, Result};
use crate::model::Constellation;
use crate::tabu::TabuParams;

/// One experiment: a system size, a detector set and an SNR grid.
///
/// Config files are flat `key = value` text. Recognized keys mirror the CLI
/// flags: `nt`, `nr`, `mod`, `snr`, `trials`, `iters`, `tabu`, `detectors`,
/// `ordering`, `seed`, `out`. Lists are comma separated, `#` starts a comment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub nt: usize,
    pub nr: usize,
    pub constellation: Constellation,
    pub detectors: Vec<DetectorKind>,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub iterations: usize,
    /// Tabu list length; `None` means `iterations / 2`.
    pub tabu: Option<usize>,
    /// Adds the channel-ordered variant of every detector that has one.
    pub ordering: bool,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            nt: 4,
            nr: 4,
            constellation: Constellation::Qam16,
            detectors: vec![DetectorKind::Conventional, DetectorKind::Ngts],
            snr_db: vec![10.0],
            trials: 1000,
            iterations: 100,
            tabu: None,
            ordering: false,
            seed: 1,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "nt" => self.nt = parse(key, value)?,
            "nr" => self.nr = parse(key, value)?,
            "mod" | "modulation" => self.constellation = value.parse()?,
            "snr" | "snr_db" => self.snr_db = parse_list(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "iters" | "iterations" => self.iterations = parse(key, value)?,
            "tabu" => self.tabu = Some(parse(key, value)?),
            "detectors" => self.detectors = parse_list(key, value)?,
            "ordering" => self.ordering = parse_bool(value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn tabu_capacity(&self) -> usize {
        self.tabu.unwrap_or((self.iterations / 2).max(1))
    }

    pub fn params(&self) -> TabuParams {
        TabuParams::new(self.iterations, self.tabu_capacity())
    }

    /// Detector list with ordered variants appended when `ordering` is set.
    pub fn effective_detectors(&self) -> Vec<DetectorKind> {
        let mut out = Vec::new();
        for &d in &self.detectors {
            if !out.contains(&d) {
                out.push(d);
            }
            if self.ordering {
                if let Some(o) = d.ordered() {
                    if !out.contains(&o) {
                        out.push(o);
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.nt == 0 || self.nr == 0 {
            return Err(Error::Config("nt and nr must be at least 1".into()));
        }
        if self.nr < self.nt {
            return Err(Error::Config(format!(
                "nr = {} < nt = {} leaves the channel rank deficient",
                self.nr, self.nt
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.detectors.is_empty() {
            return Err(Error::Config("no detectors selected".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Config("snr list is empty".into()));
        }
        if let Some(bad) = self
            .snr_db
            .iter()
            .find(|v| v.is_nan() || **v == f64::NEG_INFINITY)
        {
            return Err(Error::Config(format!("invalid snr {bad}")));
        }
        if self.tabu_capacity() == 0 {
            return Err(Error::Config("tabu list length must be at least 1".into()));
        }
        Ok(())
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|v| parse(key, v))
        .collect()
}

fn parse_bool(value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{value}'"))),
    }
}
