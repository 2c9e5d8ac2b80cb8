use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use lcum_core::io::rational_to_json;
use lcum_core::Rational;

/// One named check with its residual.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub check: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes iff the exact residual is zero.
    pub fn exact(name: impl Into<String>, residual: &Rational) -> Self {
        Check {
            check: name.into(),
            pass: is_zero(residual),
            residual: Some(rational_to_json(residual)),
            detail: None,
        }
    }

    pub fn float(name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Check {
            check: name.into(),
            pass: residual.is_finite() && residual.abs() <= tol,
            residual: Some(serde_json::json!(residual)),
            detail: None,
        }
    }

    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        Check {
            check: name.into(),
            pass,
            residual: None,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.check = format!("{prefix}{}", self.check);
        self
    }
}

fn is_zero(r: &Rational) -> bool {
    *r.numer() == 0.into()
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub pass: bool,
}

/// Machine-readable outcome of a `verify` run. Deterministic for a fixed
/// command line, input files and seed.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub inputs_digest: String,
    pub results: Vec<Check>,
    pub summary: Summary,
}

impl RunReport {
    pub fn new(command: Vec<String>, inputs_digest: String, results: Vec<Check>) -> Self {
        let passed = results.iter().filter(|c| c.pass).count();
        let total = results.len();
        RunReport {
            command,
            inputs_digest,
            summary: Summary {
                total,
                passed,
                failed: total - passed,
                pass: passed == total,
            },
            results,
        }
    }
}

/// SHA-256 over the command line and the contents of every input file, in
/// the order they were read.
#[derive(Default)]
pub struct InputDigest {
    hasher: Sha256,
}

impl InputDigest {
    pub fn new(args: &[String]) -> Self {
        let mut hasher = Sha256::new();
        for a in args {
            hasher.update(a.as_bytes());
            hasher.update([0u8]);
        }
        InputDigest { hasher }
    }

    pub fn add(&mut self, bytes: &[u8]) {
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(bytes);
    }

    pub fn finish(self) -> String {
        self.hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
