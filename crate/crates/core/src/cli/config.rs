//! Run configuration: a strict JSON document, overridden by flags.

use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};

use super::problem::ProblemSource;
use crate::riccati::InversionPolicy;
use crate::verify::{
    check_budget, ladder, RandomScales, ScalarFamily, Structure, SuiteConfig, Tolerances,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveRiccati,
    Simulate,
    Verify,
    Converge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        self != Format::Json
    }

    pub fn json(self) -> bool {
        self != Format::Csv
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<Command>,
    /// File holding a [`ProblemSource`]; exclusive with `problem`.
    pub spec: Option<PathBuf>,
    pub problem: Option<ProblemSource>,
    pub out: PathBuf,
    pub format: Format,
    pub seed: u64,
    pub substeps: usize,
    pub policy: InversionPolicy,
    /// Worker threads; defaults to the available cores.
    pub parallel: Option<usize>,
    pub tolerances: Tolerances,
    pub modes: Vec<usize>,
    pub controls: Vec<usize>,
    pub problems: usize,
    pub samples: usize,
    pub ladder_start: usize,
    pub halvings: usize,
    pub structure: Structure,
    pub scales: RandomScales,
    pub family: ScalarFamily,
}

impl Default for RunConfig {
    fn default() -> Self {
        let suite = SuiteConfig::default();
        Self {
            command: None,
            spec: None,
            problem: None,
            out: PathBuf::from("qslq-out"),
            format: Format::Csv,
            seed: suite.seed,
            substeps: suite.substeps,
            policy: suite.policy,
            parallel: None,
            tolerances: suite.tolerances,
            modes: suite.modes,
            controls: suite.controls,
            problems: suite.problems,
            samples: suite.samples,
            ladder_start: suite.ladder_start,
            halvings: suite.halvings,
            structure: suite.structure,
            scales: suite.scales,
            family: suite.family,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl RunConfig {
    /// Strict parse: unknown and duplicate keys are errors, reported with
    /// line and column.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn command(&self) -> Command {
        self.command.unwrap_or(Command::Verify)
    }

    pub fn suite(&self) -> SuiteConfig {
        SuiteConfig {
            modes: self.modes.clone(),
            controls: self.controls.clone(),
            problems: self.problems,
            samples: self.samples,
            ladder_start: self.ladder_start,
            halvings: self.halvings,
            tolerances: self.tolerances,
            seed: self.seed,
            structure: self.structure,
            policy: self.policy,
            substeps: self.substeps,
            scales: self.scales,
            family: self.family,
            mutation: None,
        }
    }

    /// Reads the problem file if one was named and fills in the parallelism
    /// degree, so the manifest shows what actually ran.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        if self.command.is_none() {
            return Err(ConfigError("missing field `command`".into()));
        }
        if let Some(path) = &self.spec {
            if self.problem.is_some() {
                return Err(ConfigError(
                    "`spec` and `problem` are mutually exclusive".into(),
                ));
            }
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read spec {}: {e}", path.display())))?;
            let source: ProblemSource = serde_json::from_str(&text)
                .map_err(|e| ConfigError(format!("spec {}: {e}", path.display())))?;
            self.problem = Some(source);
            self.spec = None;
        }
        if self.parallel.is_none() {
            self.parallel = Some(std::thread::available_parallelism().map_or(1, |n| n.get()));
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError(msg));
        if self.substeps == 0 {
            return bad("field `substeps`: must be at least 1".into());
        }
        if self.parallel == Some(0) {
            return bad("field `parallel`: must be at least 1".into());
        }
        if let InversionPolicy::PseudoInverse { ridge } = self.policy {
            if !(ridge >= 0.0 && ridge.is_finite()) {
                return bad(format!(
                    "field `policy.ridge`: must be finite and nonnegative, got {ridge}"
                ));
            }
        }
        self.tolerances
            .validate()
            .map_err(|e| ConfigError(format!("field `tolerances`: {e}")))?;
        match self.command() {
            Command::Verify => {
                if self.problems == 0 {
                    return bad("field `problems`: must be at least 1".into());
                }
                self.suite()
                    .validate()
                    .map_err(|e| ConfigError(format!("suite: {e}")))?;
                for &n in &self.modes {
                    check_budget(n).map_err(|e| ConfigError(format!("field `modes`: {e}")))?;
                }
                ladder(self.ladder_start, self.halvings)
                    .map_err(|e| ConfigError(format!("fields `ladder_start`/`halvings`: {e}")))?;
            }
            Command::Converge => {
                ladder(self.ladder_start, self.halvings)
                    .map_err(|e| ConfigError(format!("fields `ladder_start`/`halvings`: {e}")))?;
            }
            Command::SolveRiccati | Command::Simulate => match &self.problem {
                None => return bad("this command needs a `problem` or a `spec` file".into()),
                Some(p) => check_budget(p.modes())
                    .map_err(|e| ConfigError(format!("field `problem.modes`: {e}")))?,
            },
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qslq",
    version,
    about = "Quantum stochastic LQ control on the finite Clifford model"
)]
pub struct Flags {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub command: Option<Command>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub substeps: Option<usize>,
    #[arg(long)]
    pub parallel: Option<usize>,
}

type TolOverrides = Vec<(String, f64)>;

/// Splits `--tol-KEY VALUE` and `--tol-KEY=VALUE` out of the argument list,
/// since clap cannot declare flags with open-ended names.
pub fn split_tolerance_flags(
    args: Vec<String>,
) -> Result<(Vec<String>, TolOverrides), ConfigError> {
    let mut rest = Vec::new();
    let mut tols = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--tol-") else {
            rest.push(arg);
            continue;
        };
        let (key, raw) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| ConfigError(format!("flag --tol-{body} needs a value")))?;
                (body.to_string(), v)
            }
        };
        let key = key.replace('-', "_");
        let value: f64 = raw
            .parse()
            .map_err(|_| ConfigError(format!("flag --tol-{key}: {raw:?} is not a number")))?;
        tols.push((key, value));
    }
    Ok((rest, tols))
}

/// Outcome of argument parsing: either a configuration or text to print
/// (help, version).
#[derive(Debug)]
pub enum Parsed {
    Run(Box<RunConfig>),
    Print(String),
}

/// Loads the file named by `--config`, applies flags on top and resolves.
pub fn parse_args(args: Vec<String>) -> Result<Parsed, ConfigError> {
    let (rest, tols) = split_tolerance_flags(args)?;
    let flags = match Flags::try_parse_from(rest) {
        Ok(f) => f,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    Ok(Parsed::Print(e.to_string()))
                }
                _ => Err(ConfigError(e.to_string())),
            };
        }
    };
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(c) = flags.command {
        cfg.command = Some(c);
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(o) = flags.out {
        cfg.out = o;
    }
    if let Some(f) = flags.format {
        cfg.format = f;
    }
    if let Some(s) = flags.substeps {
        cfg.substeps = s;
    }
    if let Some(p) = flags.parallel {
        cfg.parallel = Some(p);
    }
    for (key, value) in tols {
        cfg.tolerances
            .set(&key, value)
            .map_err(|e| ConfigError(format!("flag --tol-{key}: {e}")))?;
    }
    Ok(Parsed::Run(Box::new(cfg.resolve()?)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<String> {
        std::iter::once("qslq")
            .chain(list.iter().copied())
            .map(String::from)
            .collect()
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::from_json(r#"{"command": "verify", "seed": 7}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.modes, vec![4, 6, 8]);
        assert_eq!(cfg.controls, vec![1, 2]);
        assert_eq!(cfg.substeps, 4);
    }

    #[test]
    fn duplicate_key_is_named() {
        let e = RunConfig::from_json(r#"{"command": "verify", "seed": 1, "seed": 2}"#).unwrap_err();
        assert!(e.0.contains("duplicate field `seed`"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let e =
            RunConfig::from_json("{\n  \"command\": \"verify\",\n  \"sede\": 1\n}").unwrap_err();
        assert!(e.0.contains("sede") && e.0.contains("line 3"), "{e}");
        let e = RunConfig::from_json(r#"{"tolerances": {"valu_c": 1.0}}"#).unwrap_err();
        assert!(e.0.contains("valu_c"), "{e}");
    }

    #[test]
    fn tolerance_flags_in_both_spellings() {
        let (rest, tols) = split_tolerance_flags(args(&[
            "--tol-value_c",
            "0.7",
            "--tol-exact=1e-11",
            "--seed",
            "3",
        ]))
        .unwrap();
        assert_eq!(rest, args(&["--seed", "3"]));
        assert_eq!(tols, vec![("value_c".into(), 0.7), ("exact".into(), 1e-11)]);
    }

    #[test]
    fn flags_override_and_validate() {
        let Parsed::Run(cfg) = parse_args(args(&[
            "--command",
            "verify",
            "--substeps",
            "8",
            "--tol-value_c",
            "0.7",
        ]))
        .unwrap() else {
            panic!("expected a run");
        };
        assert_eq!(cfg.substeps, 8);
        assert_eq!(cfg.tolerances.value_c, 0.7);
        assert!(cfg.parallel.unwrap() >= 1);
        assert!(parse_args(args(&["--command", "verify", "--tol-nope", "1"])).is_err());
        assert!(parse_args(args(&["--command", "verify", "--tol-exact", "-1"])).is_err());
        assert!(parse_args(args(&["--command", "verify", "--substeps", "0"])).is_err());
        assert!(parse_args(args(&["--command", "solve-riccati"])).is_err());
    }

    #[test]
    fn oversized_modes_are_a_config_error() {
        let cfg = RunConfig::from_json(r#"{"command": "verify", "modes": [16]}"#).unwrap();
        assert!(cfg.resolve().is_err());
    }
}
