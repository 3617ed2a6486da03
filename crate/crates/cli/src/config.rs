//! Run configuration and rule files, both TOML.
//!
//! Config keys:
//!
//! ```toml
//! ledger_path = "ledger.jsonl"        # required
//! output_dir = "out"                  # required
//! prune_height1 = true
//! keep_two_vertex = false
//! trivial_rules_path = "trivial.toml" # extra trivial-script rules
//! filter_rules_path = "filters.toml"  # replaces the built-in filter rules
//! seed = 42                           # recorded in the manifest
//! threads = 4
//! ```
//!
//! Relative paths are taken from the config file's directory. Rule files
//! hold `[[rule]]` tables with `name` and `pattern` keys; patterns match
//! disassembled script text such as `OP_DUP OP_HASH160 <hex> ...`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use unktx_core::script::{
    default_matcher, default_trivial_matcher, RuleSpec, ScriptMatcher,
};

use crate::error::{CliError, CliResult};

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub ledger_path: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "yes")]
    pub prune_height1: bool,
    #[serde(default)]
    pub keep_two_vertex: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trivial_rules_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_rules_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub threads: usize,
}

impl PipelineConfig {
    pub fn new(ledger_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            ledger_path: ledger_path.into(),
            output_dir: output_dir.into(),
            prune_height1: true,
            keep_two_vertex: false,
            trivial_rules_path: None,
            filter_rules_path: None,
            seed: None,
            threads: 1,
        }
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let c: PipelineConfig = toml::from_str(text).map_err(CliError::input)?;
        if c.threads == 0 {
            return Err(CliError::input(anyhow::anyhow!("`threads` must be positive")));
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads a config file and makes its paths absolute.
    pub fn load(path: &Path) -> CliResult<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(CliError::Input)?;
        let mut c = Self::parse(&text).map_err(|e| e.context(format!("config {}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        c.resolve(base);
        c.check()?;
        Ok((c, text))
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.ledger_path);
        fix(&mut self.output_dir);
        if let Some(p) = self.trivial_rules_path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.filter_rules_path.as_mut() {
            fix(p);
        }
    }

    /// Input files must exist before any stage runs.
    pub fn check(&self) -> CliResult<()> {
        let mut missing = vec![&self.ledger_path];
        missing.extend(self.trivial_rules_path.as_ref());
        missing.extend(self.filter_rules_path.as_ref());
        for p in missing {
            if !p.is_file() {
                return Err(CliError::input(anyhow::anyhow!("no such file: {}", p.display())));
            }
        }
        Ok(())
    }

    pub fn trivial_matcher(&self) -> CliResult<ScriptMatcher> {
        let mut specs = default_trivial_matcher().specs();
        if let Some(p) = &self.trivial_rules_path {
            specs.extend(read_rules(p)?);
        }
        ScriptMatcher::new(specs).map_err(CliError::input)
    }

    pub fn filter_matcher(&self) -> CliResult<ScriptMatcher> {
        match &self.filter_rules_path {
            Some(p) => ScriptMatcher::new(read_rules(p)?).map_err(CliError::input),
            None => Ok(default_matcher()),
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    #[serde(default)]
    rule: Vec<RuleSpec>,
}

pub fn read_rules(path: &Path) -> CliResult<Vec<RuleSpec>> {
    let load = || -> anyhow::Result<Vec<RuleSpec>> {
        let text = std::fs::read_to_string(path)?;
        let f: RuleFile = toml::from_str(&text)?;
        if f.rule.is_empty() {
            bail!("no [[rule]] entries");
        }
        Ok(f.rule)
    };
    load()
        .with_context(|| format!("rule file {}", path.display()))
        .map_err(CliError::Input)
}

pub fn rules_to_toml(rules: &[RuleSpec]) -> String {
    toml::to_string(&RuleFile { rule: rules.to_vec() }).expect("rules serialize")
}
