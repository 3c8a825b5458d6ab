//! Versioned JSON check reports.
//!
//! Output is byte-stable: entries keep insertion order, metadata keys are
//! sorted and floats are printed by the shortest round-trip formatter.

use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;

pub const SCHEMA: &str = "rigidlab-report/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Identity,
    Inequality,
    Kernel,
    Condition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Skip,
    Indeterminate,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub kind: CheckKind,
    pub module: String,
    /// The relation being verified, written out as a formula.
    pub anchor: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub verdict: Verdict,
    pub metadata: BTreeMap<String, Value>,
}

impl CheckEntry {
    fn base(name: &str, kind: CheckKind, module: &str, anchor: &str, verdict: Verdict) -> Self {
        CheckEntry {
            name: name.to_string(),
            kind,
            module: module.to_string(),
            anchor: anchor.to_string(),
            max_residual: None,
            value: None,
            tolerance: None,
            verdict,
            metadata: BTreeMap::new(),
        }
    }

    /// Passes iff `residual ≤ tolerance`; a NaN residual fails.
    pub fn residual(name: &str, module: &str, anchor: &str, residual: f64, tolerance: f64) -> Self {
        let verdict = if residual <= tolerance { Verdict::Pass } else { Verdict::Fail };
        let mut e = Self::base(name, CheckKind::Identity, module, anchor, verdict);
        e.max_residual = Some(residual);
        e.tolerance = Some(tolerance);
        e
    }

    /// Passes iff `value ≤ bound`.
    pub fn upper_bound(name: &str, module: &str, anchor: &str, value: f64, bound: f64) -> Self {
        let verdict = if value <= bound { Verdict::Pass } else { Verdict::Fail };
        let mut e = Self::base(name, CheckKind::Inequality, module, anchor, verdict);
        e.value = Some(value);
        e.tolerance = Some(bound);
        e
    }

    /// A boolean side condition with an optional measured value.
    pub fn condition(name: &str, module: &str, anchor: &str, holds: bool, value: Option<f64>) -> Self {
        let verdict = if holds { Verdict::Pass } else { Verdict::Fail };
        let mut e = Self::base(name, CheckKind::Condition, module, anchor, verdict);
        e.value = value;
        e
    }

    pub fn kernel(name: &str, module: &str, anchor: &str, verdict: Verdict, value: f64) -> Self {
        let mut e = Self::base(name, CheckKind::Kernel, module, anchor, verdict);
        e.value = Some(value);
        e
    }

    pub fn skip(name: &str, kind: CheckKind, module: &str, anchor: &str, reason: &str) -> Self {
        Self::base(name, kind, module, anchor, Verdict::Skip).with("reason", reason)
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.metadata.insert(key.to_string(), v);
        self
    }

    /// Turns the entry into a kind other than the constructor's default.
    pub fn as_kind(mut self, kind: CheckKind) -> Self {
        self.kind = kind;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub seed: u64,
    pub verdict: Verdict,
    pub inputs: BTreeMap<String, Value>,
    pub checks: Vec<CheckEntry>,
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Self {
        Report {
            schema: SCHEMA,
            command: command.to_string(),
            seed,
            verdict: Verdict::Pass,
            inputs: BTreeMap::new(),
            checks: Vec::new(),
        }
    }

    pub fn input(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.inputs.insert(key.to_string(), v);
    }

    pub fn push(&mut self, entry: CheckEntry) {
        self.checks.push(entry);
        self.verdict = self.overall();
    }

    /// `fail` dominates `indeterminate`, which dominates `pass`; skips are
    /// ignored.
    pub fn overall(&self) -> Verdict {
        self.checks
            .iter()
            .map(|c| c.verdict)
            .filter(|v| *v != Verdict::Skip)
            .max()
            .unwrap_or(Verdict::Pass)
    }

    pub fn exit_code(&self) -> i32 {
        match self.overall() {
            Verdict::Pass | Verdict::Skip => 0,
            Verdict::Fail => 2,
            Verdict::Indeterminate => 3,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts_follow_residuals() {
        assert_eq!(CheckEntry::residual("a", "m", "x = x", 1e-9, 1e-8).verdict, Verdict::Pass);
        assert_eq!(CheckEntry::residual("a", "m", "x = x", 1e-7, 1e-8).verdict, Verdict::Fail);
        assert_eq!(CheckEntry::residual("a", "m", "x = x", f64::NAN, 1e-8).verdict, Verdict::Fail);
        assert_eq!(CheckEntry::upper_bound("b", "m", "q <= 0", -1.0, 0.0).verdict, Verdict::Pass);
    }

    #[test]
    fn overall_verdict_and_exit_codes() {
        let mut r = Report::new("t", 0);
        assert_eq!(r.exit_code(), 0);
        r.push(CheckEntry::skip("s", CheckKind::Identity, "m", "a", "degenerate"));
        assert_eq!(r.exit_code(), 0);
        r.push(CheckEntry::kernel("k", "flex", "dim ker = 6", Verdict::Indeterminate, 7.0));
        assert_eq!(r.exit_code(), 3);
        r.push(CheckEntry::residual("a", "m", "a", 1.0, 0.0));
        assert_eq!(r.exit_code(), 2);
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn json_is_stable_and_sorted() {
        let mut r = Report::new("t", 3);
        r.push(CheckEntry::residual("a", "m", "a", 0.1, 1.0).with("z", 1).with("b", [1.5, 2.0]));
        let j = r.to_json();
        assert_eq!(j, r.clone().to_json());
        assert!(j.contains("\"schema\": \"rigidlab-report/1\""));
        assert!(j.find("\"b\"").unwrap() < j.find("\"z\"").unwrap());
        assert!(!j.contains("\"value\""));
    }
}
