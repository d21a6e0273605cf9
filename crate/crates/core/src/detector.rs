//! Detector selection by name.

use std::fmt;
use std::str::FromStr;

use crate::complexity::{OpCount, OpLedger};
use crate::error::{Error, Result};
use crate::linalg::qr_householder;
use crate::model::{RealSystem, Symbol};
use crate::ngts::ngts_detect;
use crate::oracle::{brute_force_ml, se_sphere_decode};
use crate::tabu::{conventional_ts, qr_ts, Detection, SearchTrace, TabuParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    Conventional,
    QrTs,
    QrTsCo,
    Ngts,
    NgtsCo,
    SeSd,
    Ml,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 7] = [
        DetectorKind::Conventional,
        DetectorKind::QrTs,
        DetectorKind::QrTsCo,
        DetectorKind::Ngts,
        DetectorKind::NgtsCo,
        DetectorKind::SeSd,
        DetectorKind::Ml,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Conventional => "conventional",
            DetectorKind::QrTs => "qrts",
            DetectorKind::QrTsCo => "qrts-co",
            DetectorKind::Ngts => "ngts",
            DetectorKind::NgtsCo => "ngts-co",
            DetectorKind::SeSd => "sesd",
            DetectorKind::Ml => "ml",
        }
    }

    pub fn is_tabu(self) -> bool {
        !matches!(self, DetectorKind::SeSd | DetectorKind::Ml)
    }

    /// Channel-ordered counterpart, if any.
    pub fn ordered(self) -> Option<DetectorKind> {
        match self {
            DetectorKind::QrTs => Some(DetectorKind::QrTsCo),
            DetectorKind::Ngts => Some(DetectorKind::NgtsCo),
            _ => None,
        }
    }

    pub fn run(self, sys: &RealSystem, params: TabuParams) -> Result<Outcome> {
        let tabu = |d: Detection| Outcome {
            solution: d.solution,
            metric: d.metric,
            ledger: d.ledger,
            trace: Some(d.trace),
            nodes: 0,
        };
        Ok(match self {
            DetectorKind::Conventional => tabu(conventional_ts(sys, params)?),
            DetectorKind::QrTs => tabu(qr_ts(sys, params, false)?),
            DetectorKind::QrTsCo => tabu(qr_ts(sys, params, true)?),
            DetectorKind::Ngts => tabu(ngts_detect(sys, params, false)?),
            DetectorKind::NgtsCo => tabu(ngts_detect(sys, params, true)?),
            DetectorKind::SeSd => {
                let qr = qr_householder(&sys.h, &mut OpCount::default())?;
                let ml = se_sphere_decode(sys, &qr)?;
                Outcome {
                    solution: ml.s_ml,
                    metric: ml.metric,
                    ledger: OpLedger::new(),
                    trace: None,
                    nodes: ml.nodes,
                }
            }
            DetectorKind::Ml => {
                let ml = brute_force_ml(sys)?;
                Outcome {
                    solution: ml.s_ml,
                    metric: ml.metric,
                    ledger: OpLedger::new(),
                    trace: None,
                    nodes: ml.nodes,
                }
            }
        })
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        let kind = match key.as_str() {
            "conventional" | "conventional-ts" | "conv" | "ts" => DetectorKind::Conventional,
            "qrts" | "qr-ts" => DetectorKind::QrTs,
            "qrts-co" | "qr-ts-co" => DetectorKind::QrTsCo,
            "ngts" | "ng-ts" => DetectorKind::Ngts,
            "ngts-co" | "ng-ts-co" => DetectorKind::NgtsCo,
            "sesd" | "se-sd" | "sd" => DetectorKind::SeSd,
            "ml" | "brute-force" => DetectorKind::Ml,
            _ => return Err(Error::Config(format!("unknown detector '{s}'"))),
        };
        Ok(kind)
    }
}

/// Uniform result of any detector.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub solution: Vec<Symbol>,
    pub metric: f64,
    pub ledger: OpLedger,
    pub trace: Option<SearchTrace>,
    pub nodes: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for d in DetectorKind::ALL {
            assert_eq!(d.name().parse::<DetectorKind>().unwrap(), d);
        }
        assert!("zf".parse::<DetectorKind>().is_err());
    }
}
