use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default absolute floor added to every right-hand side.
pub const DEFAULT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// `lhs ≤ rhs (1 + slack) + floor`
    Inequality,
    /// A measured ratio with no threshold; `lhs` holds the ratio.
    Ratio,
}

/// One checked inequality instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub suite: String,
    pub id: String,
    /// Neutral statement of the inequality being checked.
    pub statement: String,
    pub fixture: String,
    pub inputs_digest: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub floor: f64,
    pub passed: bool,
    pub status: Status,
    pub kind: Kind,
    pub pairs_scanned: u64,
    pub full_scan: bool,
    pub note: String,
}

pub fn holds(lhs: f64, rhs: f64, slack: f64, floor: f64) -> bool {
    lhs <= rhs * (1.0 + slack) + floor
}

impl VerificationRecord {
    pub fn inequality(
        suite: &str,
        id: impl Into<String>,
        statement: &str,
        fixture: impl Into<String>,
        lhs: f64,
        rhs: f64,
        slack: f64,
    ) -> Self {
        let passed = holds(lhs, rhs, slack, DEFAULT_FLOOR);
        VerificationRecord {
            suite: suite.into(),
            id: id.into(),
            statement: statement.into(),
            fixture: fixture.into(),
            inputs_digest: String::new(),
            lhs,
            rhs,
            slack,
            floor: DEFAULT_FLOOR,
            passed,
            status: if passed { Status::Pass } else { Status::Fail },
            kind: Kind::Inequality,
            pairs_scanned: 0,
            full_scan: true,
            note: String::new(),
        }
    }

    /// A finite measured ratio passes; `rhs` is recorded as `f64::MAX`.
    pub fn ratio(suite: &str, id: impl Into<String>, statement: &str, fixture: impl Into<String>, ratio: f64) -> Self {
        let mut r = Self::inequality(suite, id, statement, fixture, ratio, f64::MAX, 0.0);
        r.kind = Kind::Ratio;
        r.passed = ratio.is_finite();
        r.status = if r.passed { Status::Pass } else { Status::Fail };
        r
    }

    pub fn not_applicable(
        suite: &str,
        id: impl Into<String>,
        statement: &str,
        fixture: impl Into<String>,
        reason: impl Into<String>,
    ) -> Self {
        let mut r = Self::inequality(suite, id, statement, fixture, 0.0, 0.0, 0.0);
        r.passed = true;
        r.status = Status::NotApplicable;
        r.note = reason.into();
        r
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        if self.kind == Kind::Inequality && self.status != Status::NotApplicable {
            self.passed = holds(self.lhs, self.rhs, self.slack, floor);
            self.status = if self.passed { Status::Pass } else { Status::Fail };
        }
        self
    }

    pub fn with_pairs(mut self, pairs_scanned: u64, full_scan: bool) -> Self {
        self.pairs_scanned = pairs_scanned;
        self.full_scan = full_scan;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn with_digest(mut self, digest: String) -> Self {
        self.inputs_digest = digest;
        self
    }

    /// Force failure (e.g. when a companion condition of the record fails).
    pub fn fail(mut self, why: impl Into<String>) -> Self {
        self.passed = false;
        self.status = Status::Fail;
        let why = why.into();
        self.note = if self.note.is_empty() {
            why
        } else {
            format!("{}; {why}", self.note)
        };
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    /// Decode one JSON Lines record.
    pub fn from_json(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::invalid(format!("record: {e}")))
    }
}

/// SHA-256 over a text tag and the little-endian bytes of numeric inputs.
pub fn digest(tag: &str, parts: &[&[f64]]) -> String {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        for v in *p {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}
