use std::fmt;

use serde::{Deserialize, Serialize};

use super::inequality::{Inequality, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Assumption {
    H1,
    H2,
    H3,
    H1a,
    H1b,
    H4,
    A1,
    A2,
    A3,
}

impl Assumption {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_uppercase().as_str() {
            "H1" => Assumption::H1,
            "H2" => Assumption::H2,
            "H3" => Assumption::H3,
            "H1A" => Assumption::H1a,
            "H1B" => Assumption::H1b,
            "H4" => Assumption::H4,
            "A1" => Assumption::A1,
            "A2" => Assumption::A2,
            "A3" => Assumption::A3,
            _ => return None,
        })
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Assumption::H1 => "H1",
            Assumption::H2 => "H2",
            Assumption::H3 => "H3",
            Assumption::H1a => "H1a",
            Assumption::H1b => "H1b",
            Assumption::H4 => "H4",
            Assumption::A1 => "A1",
            Assumption::A2 => "A2",
            Assumption::A3 => "A3",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Undetermined,
}

impl Verdict {
    /// Fail dominates undetermined, which dominates pass.
    pub fn combine(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Undetermined, _) | (_, Verdict::Undetermined) => Verdict::Undetermined,
            _ => Verdict::Pass,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Undetermined => "undetermined",
        })
    }
}

/// A sampled argument tuple with both sides of the tested inequality
/// `lhs ≤ rhs`. `slack = rhs − lhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub sample: u64,
    pub point: Point,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
}

impl Witness {
    pub fn violates(&self) -> bool {
        self.slack < -self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubCheck {
    pub name: String,
    pub verdict: Verdict,
    /// The inequality tested on the sample cloud, when there is one.
    pub inequality: Option<Inequality>,
    pub samples: u64,
    /// Draws outside the generator's declared domain.
    pub skipped: u64,
    /// The sample with the smallest normalized slack.
    pub worst: Option<Witness>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub assumption: Assumption,
    pub generator: String,
    pub verdict: Verdict,
    pub seed: u64,
    pub checks: Vec<SubCheck>,
}

impl ConditionReport {
    pub fn new(assumption: Assumption, generator: String, seed: u64, checks: Vec<SubCheck>) -> Self {
        let verdict = checks.iter().fold(Verdict::Pass, |v, c| v.combine(c.verdict));
        ConditionReport {
            assumption,
            generator,
            verdict,
            seed,
            checks,
        }
    }

    pub fn check(&self, name: &str) -> Option<&SubCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// The witness of the first failing sub-check.
    pub fn failing_witness(&self) -> Option<&Witness> {
        self.checks
            .iter()
            .filter(|c| c.verdict == Verdict::Fail)
            .find_map(|c| c.worst.as_ref())
    }

    /// Plain-text rendering: one block per sub-check.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "assumption: {}\ngenerator: {}\nverdict: {}\nseed: {}\n",
            self.assumption, self.generator, self.verdict, self.seed
        );
        for c in &self.checks {
            s.push_str(&format!(
                "- check: {}\n  verdict: {}\n  samples: {}\n  skipped: {}\n",
                c.name, c.verdict, c.samples, c.skipped
            ));
            if let Some(w) = &c.worst {
                s.push_str(&format!(
                    "  worst: t={:e} y1={:?} y2={:?} z1={:?} z2={:?} b={:?}\n  lhs: {:e}\n  rhs: {:e}\n  slack: {:e}\n",
                    w.point.t, w.point.y1, w.point.y2, w.point.z1, w.point.z2, w.point.b, w.lhs, w.rhs, w.slack
                ));
            }
            if let Some(n) = &c.note {
                s.push_str(&format!("  note: {n}\n"));
            }
        }
        s
    }
}
