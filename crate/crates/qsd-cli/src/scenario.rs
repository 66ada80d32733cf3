use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_MAX_ORDER: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Narrow,
    Flatness,
    Cone,
    Compact,
    Narrowqsd,
    Gamma,
    Invariants,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Narrow,
        Suite::Flatness,
        Suite::Cone,
        Suite::Compact,
        Suite::Narrowqsd,
        Suite::Gamma,
        Suite::Invariants,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Narrow => "narrow",
            Suite::Flatness => "flatness",
            Suite::Cone => "cone",
            Suite::Compact => "compact",
            Suite::Narrowqsd => "narrowqsd",
            Suite::Gamma => "gamma",
            Suite::Invariants => "invariants",
        }
    }

    pub fn parse(s: &str) -> Result<Vec<Suite>, CliError> {
        if s == "all" {
            return Ok(Suite::ALL.to_vec());
        }
        Suite::ALL
            .iter()
            .find(|x| x.name() == s)
            .map(|x| vec![*x])
            .ok_or_else(|| CliError::InvalidScenario(format!("unknown suite `{s}`")))
    }
}

fn default_suites() -> Vec<String> {
    vec!["all".into()]
}

fn default_cache() -> bool {
    true
}

/// One verification request as written in a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub space: String,
    pub bundle: Vec<i64>,
    #[serde(alias = "D")]
    pub order: usize,
    #[serde(default = "default_suites")]
    pub suites: Vec<String>,
    #[serde(default = "default_cache")]
    pub cache: bool,
}

/// A validated scenario; suites are deduplicated and in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scenario {
    pub space: String,
    pub bundle: Vec<i64>,
    pub order: usize,
    pub suites: Vec<Suite>,
    pub cache: bool,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.space[1..].parse().expect("validated")
    }
}

impl ScenarioSpec {
    pub fn validate(&self, max_order: usize) -> Result<Scenario, CliError> {
        let dim = self
            .space
            .strip_prefix('P')
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|d| (1..=4).contains(d))
            .ok_or_else(|| CliError::InvalidScenario(format!("space `{}` is not one of P1..P4", self.space)))?;
        if self.order > max_order {
            return Err(CliError::InvalidScenario(format!("order {} exceeds the maximum {max_order}", self.order)));
        }
        let mut suites = Vec::new();
        for s in &self.suites {
            suites.extend(Suite::parse(s)?);
        }
        if suites.is_empty() {
            return Err(CliError::InvalidScenario("no suites requested".into()));
        }
        suites.sort();
        suites.dedup();
        Ok(Scenario { space: format!("P{dim}"), bundle: self.bundle.clone(), order: self.order, suites, cache: self.cache })
    }
}

/// A scenario file holds one scenario, a list, or `{"scenarios": [...]}`.
#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioFile {
    One(ScenarioSpec),
    Many(Vec<ScenarioSpec>),
    Wrapped { scenarios: Vec<ScenarioSpec> },
}

pub fn parse_scenarios(text: &str, max_order: usize) -> Result<Vec<Scenario>, CliError> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|e| CliError::InvalidScenario(format!("unreadable scenario file: {e}")))?;
    let specs = match file {
        ScenarioFile::One(s) => vec![s],
        ScenarioFile::Many(v) | ScenarioFile::Wrapped { scenarios: v } => v,
    };
    specs.iter().map(|s| s.validate(max_order)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_the_short_order_key() {
        let s = parse_scenarios(r#"{"space": "P2", "bundle": [3], "D": 2, "suites": ["invariants"]}"#, 6).unwrap();
        assert_eq!(s[0].order, 2);
        assert_eq!(s[0].suites, vec![Suite::Invariants]);
    }

    #[test]
    fn expands_all_and_orders_suites() {
        let s = parse_scenarios(r#"[{"space": "P1", "bundle": [1], "order": 3, "suites": ["gamma", "all"]}]"#, 6)
            .unwrap();
        assert_eq!(s[0].suites, Suite::ALL.to_vec());
    }

    #[test]
    fn rejects_out_of_range_input() {
        assert!(parse_scenarios(r#"{"space": "P5", "bundle": [], "order": 1}"#, 6).is_err());
        assert!(parse_scenarios(r#"{"space": "P2", "bundle": [], "order": 7}"#, 6).is_err());
        assert!(parse_scenarios(r#"{"space": "P2", "bundle": [], "order": 2, "suites": ["x"]}"#, 6).is_err());
    }
}
