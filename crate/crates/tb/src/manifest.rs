//! Run manifest: config hash, code version, wall time and one record per
//! declared gate.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// |measured - target| <= tolerance
    Within,
    /// measured <= target
    AtMost,
    /// measured >= target
    AtLeast,
    /// measured > target
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub note: String,
}

impl Gate {
    fn build(name: &str, measured: f64, target: f64, tolerance: f64, comparison: Comparison) -> Gate {
        let pass = match comparison {
            Comparison::Within => (measured - target).abs() <= tolerance,
            Comparison::AtMost => measured <= target,
            Comparison::AtLeast => measured >= target,
            Comparison::Above => measured > target,
        };
        Gate { name: name.into(), measured, target, tolerance, comparison, pass, note: String::new() }
    }

    pub fn within(name: &str, measured: f64, target: f64, tolerance: f64) -> Gate {
        Self::build(name, measured, target, tolerance, Comparison::Within)
    }

    pub fn at_most(name: &str, measured: f64, limit: f64) -> Gate {
        Self::build(name, measured, limit, 0.0, Comparison::AtMost)
    }

    pub fn at_least(name: &str, measured: f64, limit: f64) -> Gate {
        Self::build(name, measured, limit, 0.0, Comparison::AtLeast)
    }

    pub fn above(name: &str, measured: f64, limit: f64) -> Gate {
        Self::build(name, measured, limit, 0.0, Comparison::Above)
    }

    pub fn note(mut self, s: impl Into<String>) -> Gate {
        self.note = s.into();
        self
    }

    pub fn describe(&self) -> String {
        let rule = match self.comparison {
            Comparison::Within => format!("{:.6} +- {:.3e}", self.target, self.tolerance),
            Comparison::AtMost => format!("<= {:.6}", self.target),
            Comparison::AtLeast => format!(">= {:.6}", self.target),
            Comparison::Above => format!("> {:.6}", self.target),
        };
        let mut s = format!("{} = {:.6e} (gate {rule})", self.name, self.measured);
        if !self.note.is_empty() {
            s.push_str(&format!(" [{}]", self.note));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub study: String,
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    pub gates: Vec<Gate>,
    /// checks reported for reference; they do not affect the exit status
    #[serde(default)]
    pub reports: Vec<Gate>,
    pub files: Vec<String>,
    pub pass: bool,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

pub fn config_hash(normalized_toml: &str) -> String {
    let d = Sha256::digest(normalized_toml.as_bytes());
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Every declared gate must appear exactly once, and nothing else.
pub fn check_completeness(declared: &[String], gates: &[Gate]) -> Result<(), String> {
    for d in declared {
        let n = gates.iter().filter(|g| &g.name == d).count();
        if n != 1 {
            return Err(format!("gate {d} recorded {n} times"));
        }
    }
    if gates.len() != declared.len() {
        return Err(format!("{} gates recorded, {} declared", gates.len(), declared.len()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_rules() {
        assert!(Gate::within("a", 1.049, 1.0, 0.05).pass);
        assert!(!Gate::within("a", 1.06, 1.0, 0.05).pass);
        assert!(Gate::at_most("b", 3.0, 3.0).pass);
        assert!(!Gate::at_least("c", 1.9, 2.0).pass);
        assert!(!Gate::above("d", 0.0, 0.0).pass);
        assert!(!Gate::within("e", f64::NAN, 0.0, 1.0).pass);
    }

    #[test]
    fn completeness() {
        let d = vec!["x".to_string(), "y".to_string()];
        let g = vec![Gate::at_most("x", 0.0, 1.0), Gate::at_most("y", 0.0, 1.0)];
        assert!(check_completeness(&d, &g).is_ok());
        assert!(check_completeness(&d, &g[..1]).is_err());
        let dup = vec![g[0].clone(), g[0].clone()];
        assert!(check_completeness(&d, &dup).is_err());
    }

    #[test]
    fn hash_is_stable_hex() {
        let h = config_hash("study = \"pulse\"\n");
        assert_eq!(h.len(), 64);
        assert_eq!(h, config_hash("study = \"pulse\"\n"));
        assert_ne!(h, config_hash("study = \"coherent\"\n"));
    }
}
