//! Pass/fail bookkeeping for the acceptance suite.

use std::io::Write;
use std::time::Duration;

/// One named sub-check of a criterion.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    /// `|value - target| <= tol`.
    pub fn close(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        let err = (value - target).abs();
        Check::new(
            name,
            err <= tol,
            format!("{value:.9} vs {target:.9}, |diff| {err:.2e} <= {tol:.0e}"),
        )
    }

    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check::new(name, value <= limit, format!("{value:.3e} <= {limit:.0e}"))
    }
}

pub struct Criterion {
    pub number: u32,
    pub title: &'static str,
    pub checks: Vec<Check>,
}

impl Criterion {
    pub fn new(number: u32, title: &'static str) -> Self {
        Criterion {
            number,
            title,
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn runtime(&mut self, elapsed: Duration, limit: Duration) {
        self.push(Check::new(
            "runtime",
            elapsed <= limit,
            format!(
                "{:.3} s < {:.0} s",
                elapsed.as_secs_f64(),
                limit.as_secs_f64()
            ),
        ));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Summary line plus one indented line per sub-check.
    pub fn render(&self) -> String {
        let mut out = format!(
            "criterion {}: {} {}\n",
            self.number,
            if self.passed() { "PASS" } else { "FAIL" },
            self.title
        );
        for c in &self.checks {
            out.push_str(&format!(
                "    [{}] {}: {}\n",
                if c.pass { "ok" } else { "FAILED" },
                c.name,
                c.detail
            ));
        }
        out
    }

    /// Prints to stderr directly so the harness does not capture it.
    pub fn emit(&self) {
        let _ = std::io::stderr().write_all(self.render().as_bytes());
    }
}
