use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    pub detail: String,
}

/// Outcome of a diagnostic check. Empty means valid.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, code: &str, detail: impl Into<String>) {
        self.violations.push(Violation { code: code.to_string(), detail: detail.into() });
    }

    pub fn has(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        for v in &mut self.violations {
            v.detail = format!("{prefix}: {}", v.detail);
        }
        self
    }
}
