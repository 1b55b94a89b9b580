use std::path::Path;

use serde::Serialize;
use turlab_core::verify::{run_suite, Suite, SuiteConfig, SuiteReport};

use crate::failure::Failure;

#[derive(Serialize)]
struct VerifyReport<'a> {
    config: &'a SuiteConfig,
    passed: bool,
    suites: &'a [SuiteReport],
}

pub fn run(
    names: &[String],
    trials: usize,
    seed: u64,
    json: Option<&Path>,
    inject_fault: bool,
) -> Result<(), Failure> {
    let suites: Vec<Suite> = if names.is_empty() {
        Suite::ALL.to_vec()
    } else {
        names
            .iter()
            .map(|n| n.parse::<Suite>())
            .collect::<Result<_, _>>()?
    };
    let config = SuiteConfig {
        trials,
        seed,
        inject_fault,
    };
    let mut reports = Vec::with_capacity(suites.len());
    for suite in suites {
        let r = run_suite(suite, &config)?;
        println!(
            "{} {:<10} {:>4} checks  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.suite.name(),
            r.checks,
            r.detail
        );
        reports.push(r);
    }
    let passed = reports.iter().all(|r| r.passed);
    if let Some(path) = json {
        let body = serde_json::to_string_pretty(&VerifyReport {
            config: &config,
            passed,
            suites: &reports,
        })
        .map_err(|e| Failure::Input(format!("serializing report: {e}")))?;
        std::fs::write(path, body + "\n").map_err(|e| Failure::io(path.display(), e))?;
    }
    if passed {
        Ok(())
    } else {
        let failing: Vec<String> = reports
            .iter()
            .filter(|r| !r.passed)
            .map(|r| format!("{} ({})", r.suite.name(), r.property))
            .collect();
        Err(Failure::Invariant(format!(
            "failing suites: {}",
            failing.join(", ")
        )))
    }
}
