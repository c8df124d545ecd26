use std::path::PathBuf;

use clap::ValueEnum;
use patholab_core::families::DEFAULT_MARGIN;
use patholab_core::norms::Functional;
use patholab_core::{FamilyKind, FamilyParams, R0Choice};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown functional `{0}` (expected llogl, lp:P, exp:C or hessian:P)")]
    Functional(String),
    #[error("invalid family parameters: {0}")]
    Family(#[from] patholab_core::Error),
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Families,
    VerifyIdentity,
    WeakForm,
    Norms,
    Asymptotics,
    Nonunique,
    FullSuite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Families => "families",
            Command::VerifyIdentity => "verify-identity",
            Command::WeakForm => "weak-form",
            Command::Norms => "norms",
            Command::Asymptotics => "asymptotics",
            Command::Nonunique => "nonunique",
            Command::FullSuite => "full-suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyChoice {
    Power,
    W11,
    LipschitzLog,
    BmoLogsq,
}

impl FamilyChoice {
    pub fn kind(self) -> FamilyKind {
        match self {
            FamilyChoice::Power => FamilyKind::Power,
            FamilyChoice::W11 => FamilyKind::W11LogPow,
            FamilyChoice::LipschitzLog => FamilyKind::LipschitzLog,
            FamilyChoice::BmoLogsq => FamilyKind::BmoLogSq,
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub family: FamilyChoice,
    pub n: usize,
    pub beta: f64,
    pub a: f64,
    /// `None` selects the smallest admissible offset.
    pub r0: Option<f64>,
    pub margin: f64,
    pub samples: usize,
    pub annuli: u32,
    pub p_grid: Vec<f64>,
    pub c_grid: Vec<f64>,
    pub rho_min: f64,
    pub seed: u64,
    pub functional: Option<String>,
    pub strict: bool,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            family: FamilyChoice::W11,
            n: 2,
            beta: 2.0,
            a: 0.5,
            r0: None,
            margin: DEFAULT_MARGIN,
            samples: 1000,
            annuli: 48,
            p_grid: vec![1.0, 1.01, 1.05, 1.5, 2.0, 4.0, 10.0],
            c_grid: vec![0.1, 1.0, 10.0],
            rho_min: 2f64.powi(-24),
            seed: 7,
            functional: None,
            strict: false,
            out: PathBuf::from("patholab-out"),
        }
    }

    pub fn family_params(&self) -> Result<FamilyParams, ConfigError> {
        let r0 = match self.r0 {
            Some(v) => R0Choice::Explicit(v),
            None => R0Choice::Auto,
        };
        Ok(FamilyParams::new(self.family.kind(), self.n, self.beta, self.a, r0, self.margin)?)
    }

    pub fn parsed_functional(&self) -> Result<Option<Functional>, ConfigError> {
        self.functional.as_deref().map(parse_functional).transpose()
    }
}

pub fn parse_functional(s: &str) -> Result<Functional, ConfigError> {
    let bad = || ConfigError::Functional(s.to_string());
    let lower = s.trim().to_ascii_lowercase();
    if lower == "llogl" {
        return Ok(Functional::LLogL);
    }
    let (head, tail) = lower.split_once(':').ok_or_else(bad)?;
    let value: f64 = tail.parse().map_err(|_| bad())?;
    match head {
        "lp" if value >= 1.0 => Ok(Functional::Lp(value)),
        "exp" if value > 0.0 => Ok(Functional::Exp(value)),
        "hessian" if value >= 1.0 => Ok(Functional::HessianLp(value)),
        _ => Err(bad()),
    }
}

/// Short identifier such as `w11-n2-b2` used in check names and file names.
pub fn family_tag(p: &FamilyParams) -> String {
    match p.kind {
        FamilyKind::W11LogPow => format!("w11-n{}-b{}", p.n, p.beta),
        FamilyKind::LipschitzLog => format!("lipschitz-log-n{}", p.n),
        FamilyKind::BmoLogSq => format!("bmo-logsq-n{}", p.n),
        FamilyKind::Power => format!("power-n{}-a{}", p.n, p.a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn functional_names() {
        assert_eq!(parse_functional("llogl").unwrap(), Functional::LLogL);
        assert_eq!(parse_functional("lp:1.5").unwrap(), Functional::Lp(1.5));
        assert_eq!(parse_functional("exp:10").unwrap(), Functional::Exp(10.0));
        assert!(parse_functional("lp:0.5").is_err());
        assert!(parse_functional("sobolev").is_err());
    }

    #[test]
    fn config_round_trips() {
        let mut c = RunConfig::new(Command::Norms);
        c.r0 = Some(60.0);
        c.functional = Some("llogl".into());
        let text = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(c, back);
    }
}
