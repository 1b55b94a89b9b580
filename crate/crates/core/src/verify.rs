//! Invariant suites run over the randomized experiment family.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::correlator::{exact_correlator, protocol_correlator};
use crate::error::{Error, Result};
use crate::harness::{generate_trial, median, ExperimentConfig, TrialInputs};
use crate::linalg::{identity, ComplexMatrix};
use crate::random::random_hermitian;
use crate::tur::{
    check_general_tur, expectation_derivative_from, joint_layout, no_jump_moments,
    no_jump_probability, perturbed_expectation, purify, qfi_from_derivatives, sld,
    survival_activity, survival_activity_protocol_sim, survival_activity_series,
};

pub const QFI_TOL: f64 = 1e-8;
pub const SCALING_TOL: f64 = 1e-6;
pub const SCALING_STEP: f64 = 1e-5;
pub const PROTOCOL_TOL: f64 = 1e-10;
pub const SATURATION_TOL: f64 = 1e-6;
pub const MOMENT_TOL: f64 = 1e-10;
/// Highest truncation order whose convergence is checked.
pub const SERIES_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Qfi,
    Scaling,
    Protocol,
    Saturation,
    Series,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Qfi,
        Suite::Scaling,
        Suite::Protocol,
        Suite::Saturation,
        Suite::Series,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Qfi => "qfi",
            Suite::Scaling => "scaling",
            Suite::Protocol => "protocol",
            Suite::Saturation => "saturation",
            Suite::Series => "series",
        }
    }

    /// Property checked by the suite, for reports.
    pub fn property(self) -> &'static str {
        match self {
            Suite::Qfi => "Fisher information at θ=0 equals survival activity",
            Suite::Scaling => "∂θ<G> = <G> − Q_G",
            Suite::Protocol => "ancilla protocol reproduces Tr[ρ A(T) B]",
            Suite::Saturation => "G = SLD saturates the TUR",
            Suite::Series => "truncated Ξ series converges; protocol moments match powers",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s.trim())
            .ok_or_else(|| {
                Error::Contract(format!(
                    "unknown suite '{s}' (expected qfi, scaling, protocol, saturation or series)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub trials: usize,
    pub seed: u64,
    /// Negates `dV0/dθ` wherever the suites use the analytic derivative.
    pub inject_fault: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 0,
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub property: String,
    pub checks: usize,
    pub failures: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// First failing case, or a summary line.
    pub detail: String,
}

struct Tally {
    checks: usize,
    failures: usize,
    max_error: f64,
    first_failure: Option<String>,
    tolerance: f64,
}

impl Tally {
    fn new(tolerance: f64) -> Self {
        Self {
            checks: 0,
            failures: 0,
            max_error: 0.0,
            first_failure: None,
            tolerance,
        }
    }

    fn record(&mut self, error: f64, what: impl FnOnce() -> String) {
        self.checks += 1;
        if error.is_nan() || error > self.max_error {
            self.max_error = error;
        }
        // written so NaN counts as a failure
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(error <= self.tolerance) {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }

    fn fail(&mut self, what: String) {
        self.checks += 1;
        self.failures += 1;
        if self.first_failure.is_none() {
            self.first_failure = Some(what);
        }
    }

    fn finish(self, suite: Suite) -> SuiteReport {
        let passed = self.failures == 0 && self.checks > 0;
        let detail = self.first_failure.unwrap_or_else(|| {
            format!(
                "{} checks, max error {:.3e} (tolerance {:.0e})",
                self.checks, self.max_error, self.tolerance
            )
        });
        SuiteReport {
            suite,
            property: suite.property().into(),
            checks: self.checks,
            failures: self.failures,
            max_error: self.max_error,
            tolerance: self.tolerance,
            passed,
            detail,
        }
    }
}

fn instances(cfg: &SuiteConfig, gamma_range: (f64, f64)) -> Vec<TrialInputs> {
    let config = ExperimentConfig {
        seed: cfg.seed,
        gamma_range,
        ..ExperimentConfig::default()
    };
    (0..cfg.trials as u64)
        .map(|id| generate_trial(&config, id))
        .collect()
}

fn derivatives(ch: &crate::KrausChannel, fault: bool) -> Result<Vec<ComplexMatrix>> {
    let mut d = ch.kraus_derivatives()?;
    if fault {
        let k = ch.no_jump_index();
        d[k] = -d[k].clone();
    }
    Ok(d)
}

fn suite_qfi(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut tally = Tally::new(QFI_TOL);
    for t in instances(cfg, (0.0, 0.75)) {
        let (rho, ch) = (t.state(), t.channel()?);
        let ps = purify(&rho)?;
        let j = qfi_from_derivatives(&ch, &ps, &derivatives(&ch, cfg.inject_fault)?)?;
        let xi = survival_activity(&rho, &ch)?;
        tally.record((j - xi).abs(), || {
            format!("trial {}: J = {j:.12e}, Ξ = {xi:.12e}", t.trial_id)
        });
    }
    Ok(tally.finish(Suite::Qfi))
}

fn suite_scaling(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut tally = Tally::new(SCALING_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for t in instances(cfg, (0.0, 0.75)) {
        let (rho, ch) = (t.state(), t.channel()?);
        let ps = purify(&rho)?;
        let g = random_hermitian(joint_layout(&ps, &ch).total_dim(), &mut rng);
        let h = SCALING_STEP;
        let fd = (perturbed_expectation(&g, &ps, &ch, h)?
            - perturbed_expectation(&g, &ps, &ch, -h)?)
            / (2.0 * h);
        let report = check_general_tur(&g, &ps, &ch)?;
        let baseline_form = report.mean - report.q_baseline;
        let analytic =
            expectation_derivative_from(&g, &ps, &ch, &derivatives(&ch, cfg.inject_fault)?);
        let err = (fd - baseline_form).abs().max((fd - analytic).abs());
        tally.record(err, || {
            format!(
                "trial {}: finite difference {fd:.10e}, <G> − Q = {baseline_form:.10e}, analytic {analytic:.10e}",
                t.trial_id
            )
        });
    }
    Ok(tally.finish(Suite::Scaling))
}

fn suite_protocol(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut tally = Tally::new(PROTOCOL_TOL);
    for t in instances(cfg, (0.0, 0.75)) {
        let (rho, ch) = (t.state(), t.channel()?);
        let (a, b) = t.observables();
        let p = protocol_correlator(&rho, &ch, &a, &b)?;
        let e = exact_correlator(&rho, &ch, &a, &b)?;
        tally.record((p - e).norm(), || {
            format!("trial {}: protocol {p} vs exact {e}", t.trial_id)
        });
    }
    Ok(tally.finish(Suite::Protocol))
}

fn suite_saturation(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut tally = Tally::new(SATURATION_TOL);
    // keep Ξ away from zero so the ratio is well conditioned
    for t in instances(cfg, (0.1, 0.75)) {
        let (rho, ch) = (t.state(), t.channel()?);
        let ps = purify(&rho)?;
        let l = sld(&ps, &ch)?.matrix;
        let g = l + identity(joint_layout(&ps, &ch).total_dim()).scale(0.25);
        let report = check_general_tur(&g, &ps, &ch)?;
        let ratio = report.ratio();
        tally.record((ratio - 1.0).abs(), || {
            format!("trial {}: ratio {ratio:.12}", t.trial_id)
        });
    }
    Ok(tally.finish(Suite::Saturation))
}

fn suite_series(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut tally = Tally::new(MOMENT_TOL);
    let mut errors = vec![Vec::new(); SERIES_ORDER];
    for t in instances(cfg, (0.0, 0.75)) {
        let (rho, ch) = (t.state(), t.channel()?);
        let xi = survival_activity(&rho, &ch)?;
        let est = survival_activity_series(&rho, &ch, SERIES_ORDER)?;
        for (k, e) in est.iter().enumerate() {
            errors[k].push((e - xi).abs());
        }
        let first = 1.0 - no_jump_probability(&rho, &ch);
        tally.record((est[0] - first).abs(), || {
            format!(
                "trial {}: first-order estimate {} vs 1 − p0 = {first}",
                t.trial_id, est[0]
            )
        });
        let sim = survival_activity_protocol_sim(&rho, &ch, SERIES_ORDER + 2)?;
        let direct = no_jump_moments(&rho, &ch, SERIES_ORDER + 2);
        let worst = sim
            .iter()
            .zip(&direct)
            .map(|(s, d)| (s - d).abs())
            .fold(0.0, f64::max);
        tally.record(worst, || {
            format!(
                "trial {}: protocol moments differ by {worst:.3e}",
                t.trial_id
            )
        });
    }
    let medians: Vec<f64> = errors.iter().filter_map(|e| median(e)).collect();
    if medians.len() == SERIES_ORDER && !medians.windows(2).all(|w| w[1] < w[0]) {
        tally.fail(format!(
            "median error not strictly decreasing over N = 1..{SERIES_ORDER}: {medians:?}"
        ));
    }
    let mut report = tally.finish(Suite::Series);
    if report.passed {
        report.detail = format!(
            "{}; median errors N=1..{SERIES_ORDER}: {}",
            report.detail,
            medians
                .iter()
                .map(|m| format!("{m:.3e}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    Ok(report)
}

pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<SuiteReport> {
    if cfg.trials == 0 {
        return Err(Error::Contract("a suite needs at least one trial".into()));
    }
    match suite {
        Suite::Qfi => suite_qfi(cfg),
        Suite::Scaling => suite_scaling(cfg),
        Suite::Protocol => suite_protocol(cfg),
        Suite::Saturation => suite_saturation(cfg),
        Suite::Series => suite_series(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn tally_counts_nan_as_failure() {
        let mut t = Tally::new(1e-3);
        t.record(f64::NAN, || "nan".into());
        let r = t.finish(Suite::Qfi);
        assert!(!r.passed);
        assert_eq!(r.detail, "nan");
    }
}
