//! Problem specification files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use schubert_core::{
    BoxShape, ConditionKind, Partition, SchubertProblem, SpecialCondition, SpecialInstance,
    TrackerConfig,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub kind: ConditionKind,
    pub a: usize,
    pub s: f64,
}

/// A problem as written in a spec file.
///
/// ```toml
/// m = 2
/// p = 2
/// seed = 7
/// conditions = [
///   { kind = "row", a = 1, s = 1.0 },
///   { kind = "row", a = 1, s = 2.0 },
///   { kind = "row", a = 1, s = 3.0 },
///   { kind = "row", a = 1, s = 4.0 },
/// ]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub m: usize,
    pub p: usize,
    #[serde(default)]
    pub at_zero: Vec<usize>,
    #[serde(default)]
    pub at_infinity: Vec<usize>,
    #[serde(default)]
    pub conditions: Vec<ConditionSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Overrides of the tracker defaults.
    #[serde(default)]
    pub solver: Option<TrackerConfig>,
}

impl ProblemSpec {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Spec(e.to_string()))
    }

    pub fn shape(&self) -> Result<BoxShape, CliError> {
        BoxShape::new(self.m, self.p).map_err(|e| CliError::Spec(e.to_string()))
    }

    pub fn special_conditions(&self) -> Vec<SpecialCondition> {
        self.conditions
            .iter()
            .map(|c| SpecialCondition { kind: c.kind, a: c.a })
            .collect()
    }

    pub fn partitions(&self) -> Result<(Partition, Partition), CliError> {
        let zero = Partition::new(self.at_zero.clone()).map_err(|e| CliError::Spec(format!("at_zero: {e}")))?;
        let inf =
            Partition::new(self.at_infinity.clone()).map_err(|e| CliError::Spec(format!("at_infinity: {e}")))?;
        Ok((zero, inf))
    }

    /// The validated problem.
    pub fn problem(&self) -> Result<SchubertProblem, CliError> {
        let (zero, inf) = self.partitions()?;
        let special = self
            .conditions
            .iter()
            .map(|c| SpecialInstance {
                condition: SpecialCondition { kind: c.kind, a: c.a },
                s: c.s,
            })
            .collect();
        SchubertProblem::new(self.shape()?, zero, inf, special).map_err(|e| CliError::Spec(e.to_string()))
    }

    /// Tracker defaults with the spec's overrides.
    pub fn config(&self) -> Result<TrackerConfig, CliError> {
        let cfg = self.solver.clone().unwrap_or_default();
        cfg.validate().map_err(|e| CliError::Spec(e.to_string()))?;
        Ok(cfg)
    }
}

/// Parses `R2,C2,R1` style condition lists.
pub fn parse_conditions(text: &str) -> Result<Vec<SpecialCondition>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let head = t.chars().next().unwrap_or_default();
            let a: usize = t[head.len_utf8()..]
                .parse()
                .map_err(|_| CliError::Spec(format!("bad condition `{t}`, expected R<a> or C<a>")))?;
            match head {
                'R' | 'r' => Ok(SpecialCondition::row(a)),
                'C' | 'c' => Ok(SpecialCondition::column(a)),
                _ => Err(CliError::Spec(format!("bad condition `{t}`, expected R<a> or C<a>"))),
            }
        })
        .collect()
}

pub fn parse_partition(text: &str) -> Result<Partition, CliError> {
    let parts = text
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|_| CliError::Spec(format!("bad partition part `{t}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    Partition::new(parts).map_err(|e| CliError::Spec(e.to_string()))
}

/// Row(1) conditions filling the box when none are given.
pub fn conditions_or_default(
    text: Option<&str>,
    shape: &BoxShape,
    zero: &Partition,
    inf: &Partition,
) -> Result<Vec<SpecialCondition>, CliError> {
    match text {
        Some(t) => parse_conditions(t),
        None => {
            let used = zero.weight() + inf.weight();
            let n = shape
                .dimension()
                .checked_sub(used)
                .ok_or_else(|| CliError::Spec("conditions at the ends exceed the dimension".into()))?;
            Ok(vec![SpecialCondition::row(1); n])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_spec() {
        let spec = ProblemSpec::parse(
            r#"
            m = 2
            p = 3
            at_zero = [1]
            seed = 5
            conditions = [
              { kind = "row", a = 2, s = 1.0 },
              { kind = "column", a = 2, s = 2.0 },
              { kind = "row", a = 1, s = 3.0 },
            ]
            [solver]
            retries = 1
            "#,
        )
        .unwrap();
        assert_eq!(spec.seed, Some(5));
        assert_eq!(spec.config().unwrap().retries, 1);
        assert_eq!(spec.problem().unwrap().special.len(), 3);
    }

    #[test]
    fn dimension_mismatch_names_the_invariant() {
        let spec = ProblemSpec::parse(
            "m = 2\np = 2\nconditions = [{ kind = \"row\", a = 1, s = 1.0 }]",
        )
        .unwrap();
        let err = spec.problem().unwrap_err().to_string();
        assert!(err.contains("dimension"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ProblemSpec::parse("m = 2\np = 2\nfoo = 1").is_err());
    }

    #[test]
    fn condition_lists() {
        let c = parse_conditions("R2, C2,r1").unwrap();
        assert_eq!(c, vec![SpecialCondition::row(2), SpecialCondition::column(2), SpecialCondition::row(1)]);
        assert!(parse_conditions("X1").is_err());
        assert!(parse_conditions("R").is_err());
        assert!(parse_conditions("é1").is_err());
    }
}
