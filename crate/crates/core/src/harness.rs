//! Randomized two-qubit experiment family and its evaluation.
//!
//! System `S` is two qubits (`q0` first), environment `E` one qubit. Angle
//! assignment: `θ1..θ4` prepare `S` as `RY(θ2)RX(θ1)|0> ⊗ RY(θ4)RX(θ3)|0>`;
//! the dilation is `(W2 ⊗ I)·CRY(πγ)·(W1 ⊗ I)` with the controlled-RY
//! controlled by `q0` and targeting `E`, `W1 = RY(θ6)RX(θ5) ⊗ RY(θ8)RX(θ7)` and
//! `W2 = RY(θ10)RX(θ9) ⊗ RY(θ12)RX(θ11)`.

use std::collections::BTreeSet;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::KrausChannel;
use crate::correlator::{
    correlator_bound, sampled_bound, BoundReport, BoundVariant, Part, QReading,
};
use crate::error::{Error, Result};
use crate::gates::{cry, pauli_pair, rx, ry};
use crate::linalg::{
    embed, identity, ket, projector, tensor_product, ComplexMatrix, SubsystemLayout,
};
use crate::random::random_hermitian;
use crate::tur::{check_general_tur, check_separable_tur, purify, SeparableObservable, TurReport};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "TURLAB_THREADS";

/// Stream offset separating parameter draws from shot sampling streams.
const PARAM_STREAM: u64 = 1 << 63;
/// Stream offset for the random observables of the per-trial exact checks.
const CHECK_STREAM: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Exact,
    Neumann1,
    Sampled,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(Variant::Exact),
            "neumann1" | "approx" => Ok(Variant::Neumann1),
            "sampled" => Ok(Variant::Sampled),
            other => Err(Error::Contract(format!(
                "unknown variant '{other}' (expected exact, neumann1 or sampled)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_trials: usize,
    pub shots: u64,
    pub gamma_range: (f64, f64),
    pub theta_range: (f64, f64),
    pub variants: BTreeSet<Variant>,
    pub reading: QReading,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_trials: 50,
            shots: 1000,
            gamma_range: (0.0, 0.75),
            theta_range: (0.0, std::f64::consts::PI),
            variants: [Variant::Exact, Variant::Neumann1, Variant::Sampled]
                .into_iter()
                .collect(),
            reading: QReading::Linear,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let (g0, g1) = self.gamma_range;
        if !(0.0..1.0).contains(&g0) || !(0.0..1.0).contains(&g1) || g0 > g1 {
            return Err(Error::Contract(format!(
                "gamma range [{g0}, {g1}] must be an ordered subinterval of [0, 1)"
            )));
        }
        let (t0, t1) = self.theta_range;
        let two_pi = 2.0 * std::f64::consts::PI;
        if !(0.0..=two_pi).contains(&t0) || !(0.0..=two_pi).contains(&t1) || t0 > t1 {
            return Err(Error::Contract(format!(
                "theta range [{t0}, {t1}] must be an ordered subinterval of [0, 2π]"
            )));
        }
        if self.n_trials == 0 {
            return Err(Error::Contract("at least one trial is required".into()));
        }
        if self.variants.contains(&Variant::Sampled) && self.shots == 0 {
            return Err(Error::Contract("sampled variant needs shots > 0".into()));
        }
        Ok(())
    }

    fn wants(&self, v: Variant) -> bool {
        self.variants.contains(&v)
    }
}

/// Randomly drawn inputs of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialInputs {
    pub trial_id: u64,
    pub gamma: f64,
    pub theta: [f64; 12],
    pub a: (usize, usize),
    pub b: (usize, usize),
}

fn pauli_index(k: usize) -> (usize, usize) {
    (k / 4, k % 4)
}

fn param_rng(seed: u64, trial_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PARAM_STREAM | trial_id);
    rng
}

/// Deterministic in `(config.seed, trial_id)`.
pub fn generate_trial(config: &ExperimentConfig, trial_id: u64) -> TrialInputs {
    let mut rng = param_rng(config.seed, trial_id);
    let (g0, g1) = config.gamma_range;
    let gamma = rng.random_range(g0..=g1);
    let (t0, t1) = config.theta_range;
    let theta = std::array::from_fn(|_| rng.random_range(t0..=t1));
    let a = pauli_index(rng.random_range(1..16));
    let b = pauli_index(rng.random_range(1..16));
    TrialInputs {
        trial_id,
        gamma,
        theta,
        a,
        b,
    }
}

fn local_rotation(tx: f64, ty: f64) -> ComplexMatrix {
    ry(ty) * rx(tx)
}

/// Initial system state from `θ1..θ4`.
pub fn family_state(theta: &[f64; 12]) -> ComplexMatrix {
    let q0 = local_rotation(theta[0], theta[1]) * ket(2, 0);
    let q1 = local_rotation(theta[2], theta[3]) * ket(2, 0);
    projector(&crate::linalg::tensor_vec(&q0, &q1))
}

/// Dilation unitary on `S ⊗ E` from `θ5..θ12` and `γ`.
pub fn family_unitary(gamma: f64, theta: &[f64; 12]) -> Result<ComplexMatrix> {
    let layout = SubsystemLayout::new(vec![2, 2, 2], vec!["q0", "q1", "E"])?;
    let w1 = tensor_product(
        &local_rotation(theta[4], theta[5]),
        &local_rotation(theta[6], theta[7]),
    );
    let w2 = tensor_product(
        &local_rotation(theta[8], theta[9]),
        &local_rotation(theta[10], theta[11]),
    );
    let coupling = embed(&cry(std::f64::consts::PI * gamma), &layout, &[0, 2])?;
    let id_e = identity(2);
    Ok(tensor_product(&w2, &id_e) * coupling * tensor_product(&w1, &id_e))
}

pub fn family_channel(gamma: f64, theta: &[f64; 12]) -> Result<KrausChannel> {
    let layout = SubsystemLayout::new(vec![4, 2], vec!["S", "E"])?;
    KrausChannel::from_unitary(&family_unitary(gamma, theta)?, &layout, 0)
}

impl TrialInputs {
    pub fn state(&self) -> ComplexMatrix {
        family_state(&self.theta)
    }

    pub fn channel(&self) -> Result<KrausChannel> {
        family_channel(self.gamma, &self.theta)
    }

    pub fn observables(&self) -> (ComplexMatrix, ComplexMatrix) {
        (
            pauli_pair(self.a.0, self.a.1),
            pauli_pair(self.b.0, self.b.1),
        )
    }
}

/// Bound and TUR values of one variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantValues {
    pub c_real: f64,
    pub xi_b: f64,
    pub q_ab: f64,
    pub lower: f64,
    pub upper: f64,
    /// `Var[G]/(<G> − Q)²`; NaN when degenerate.
    pub tur_lhs: f64,
    pub bound_holds: bool,
    pub tur_holds: bool,
    pub degenerate: bool,
    /// Distance of `Re C` from the nearer interval end (negative outside).
    pub margin: f64,
}

impl VariantValues {
    fn new(
        c_real: f64,
        lower: f64,
        upper: f64,
        q_ab: f64,
        xi_b: f64,
        bound_holds: bool,
        tur: &TurReport,
    ) -> Self {
        Self {
            c_real,
            xi_b,
            q_ab,
            lower,
            upper,
            tur_lhs: tur.lhs,
            bound_holds,
            tur_holds: tur.holds,
            degenerate: tur.degenerate,
            margin: (c_real - lower).min(upper - c_real),
        }
    }

    fn from_report(r: &BoundReport) -> Self {
        Self::new(
            r.correlator,
            r.lower,
            r.upper,
            r.q_ab,
            r.xi_b,
            r.holds,
            &r.as_tur(),
        )
    }

    pub fn violated(&self) -> bool {
        !(self.bound_holds && self.tur_holds)
    }
}

/// Additional exact checks run on every trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactChecks {
    pub imag: VariantValues,
    /// General TUR for a random observable on `R ⊗ S ⊗ E`.
    pub general_tur: TurReport,
    /// Separable TUR for random blocks on `R ⊗ S`.
    pub separable_tur: TurReport,
}

impl ExactChecks {
    pub fn all_hold(&self) -> bool {
        !self.imag.violated() && self.general_tur.holds && self.separable_tur.holds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledValues {
    pub values: VariantValues,
    pub shots: u64,
    pub p0: f64,
    pub nested_survivals: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub inputs: TrialInputs,
    /// Exact `p0 = Tr[ρ_B V0†V0]`.
    pub postselect_p0: Option<f64>,
    pub exact: Option<VariantValues>,
    pub checks: Option<ExactChecks>,
    pub approx: Option<VariantValues>,
    pub sampled: Option<SampledValues>,
    /// Set when the trial could not be evaluated.
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn violated_exact(&self) -> bool {
        self.exact.is_some_and(|v| v.violated())
    }

    pub fn violated_approx(&self) -> bool {
        self.approx.is_some_and(|v| v.violated())
    }

    pub fn violated_sampled(&self) -> bool {
        self.sampled.as_ref().is_some_and(|s| s.values.violated())
    }

    /// `|upper_approx − upper_exact|`.
    pub fn approx_gap(&self) -> Option<f64> {
        Some((self.approx?.upper - self.exact?.upper).abs())
    }
}

fn exact_checks(
    seed: u64,
    inputs: &TrialInputs,
    rho: &ComplexMatrix,
    ch: &KrausChannel,
) -> Result<ExactChecks> {
    let (a, b) = inputs.observables();
    let imag = correlator_bound(
        rho,
        ch,
        &a,
        &b,
        Part::Imag,
        BoundVariant::Exact,
        QReading::Linear,
    )?;
    let ps = purify(rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CHECK_STREAM | inputs.trial_id);
    let rs = ps.dim() * ch.dim();
    let g = random_hermitian(rs * ch.num_operators(), &mut rng);
    let general_tur = check_general_tur(&g, &ps, ch)?;
    let blocks = (0..ch.num_operators())
        .map(|_| random_hermitian(rs, &mut rng))
        .collect();
    let separable_tur = check_separable_tur(&SeparableObservable { blocks }, &ps, ch)?;
    Ok(ExactChecks {
        imag: VariantValues::from_report(&imag),
        general_tur,
        separable_tur,
    })
}

/// Evaluates every requested variant of one trial. The exact variant is
/// always evaluated.
pub fn evaluate_trial(config: &ExperimentConfig, inputs: TrialInputs) -> TrialRecord {
    let mut record = TrialRecord {
        inputs,
        postselect_p0: None,
        exact: None,
        checks: None,
        approx: None,
        sampled: None,
        error: None,
    };
    if let Err(e) = fill_trial(config, &mut record) {
        record.error = Some(e.to_string());
    }
    record
}

fn fill_trial(config: &ExperimentConfig, record: &mut TrialRecord) -> Result<()> {
    let inputs = &record.inputs;
    let rho = inputs.state();
    let ch = inputs.channel()?;
    let (a, b) = inputs.observables();
    let exact = correlator_bound(
        &rho,
        &ch,
        &a,
        &b,
        Part::Real,
        BoundVariant::Exact,
        config.reading,
    )?;
    record.postselect_p0 = Some(exact.p0);
    record.exact = Some(VariantValues::from_report(&exact));
    record.checks = Some(exact_checks(config.seed, inputs, &rho, &ch)?);
    if config.wants(Variant::Neumann1) {
        let r = correlator_bound(
            &rho,
            &ch,
            &a,
            &b,
            Part::Real,
            BoundVariant::Neumann1,
            config.reading,
        )?;
        record.approx = Some(VariantValues::from_report(&r));
    }
    if config.wants(Variant::Sampled) {
        let s = sampled_bound(
            &rho,
            &ch,
            &a,
            &b,
            Part::Real,
            config.reading,
            config.shots,
            config.seed,
            inputs.trial_id,
        )?;
        let values = VariantValues::new(s.correlator, s.lower, s.upper, s.q, s.xi, s.holds, &s.tur);
        record.sampled = Some(SampledValues {
            values,
            shots: config.shots,
            p0: s.p0,
            nested_survivals: s.nested_shots.count_where(|k| k[1] == b'0'),
        });
    }
    Ok(())
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| {
            Error::Contract(format!(
                "{THREADS_ENV} must be a positive integer, got '{v}'"
            ))
        })?;
        if n == 0 {
            return Err(Error::Contract(format!("{THREADS_ENV} must be at least 1")));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Contract(format!("thread pool: {e}")))
}

/// Runs all trials in parallel; records come back ordered by trial id.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(Vec<TrialRecord>, RunSummary)> {
    config.validate()?;
    let pool = thread_pool()?;
    let records: Vec<TrialRecord> = pool.install(|| {
        (0..config.n_trials as u64)
            .into_par_iter()
            .map(|id| evaluate_trial(config, generate_trial(config, id)))
            .collect()
    });
    let summary = summarize(&records, config.gamma_range)?;
    Ok((records, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantStats {
    pub evaluated: usize,
    pub violations: usize,
    pub bound_violations: usize,
    pub tur_violations: usize,
    pub degenerate: usize,
    /// Over non-degenerate trials; `None` when there are none.
    pub min_margin: Option<f64>,
    pub median_margin: Option<f64>,
}

impl VariantStats {
    fn from_values<'a>(values: impl Iterator<Item = &'a VariantValues>) -> Option<Self> {
        let values: Vec<&VariantValues> = values.collect();
        if values.is_empty() {
            return None;
        }
        let margins: Vec<f64> = values
            .iter()
            .filter(|v| !v.degenerate)
            .map(|v| v.margin)
            .collect();
        Some(Self {
            evaluated: values.len(),
            violations: values.iter().filter(|v| v.violated()).count(),
            bound_violations: values.iter().filter(|v| !v.bound_holds).count(),
            tur_violations: values.iter().filter(|v| !v.tur_holds).count(),
            degenerate: values.iter().filter(|v| v.degenerate).count(),
            min_margin: margins.iter().copied().reduce(f64::min),
            median_margin: median(&margins),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapBucket {
    pub gamma_low: f64,
    pub gamma_high: f64,
    pub count: usize,
    pub median_gap: Option<f64>,
    pub max_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub trials: usize,
    pub failed_trials: Vec<u64>,
    pub exact: Option<VariantStats>,
    pub exact_imag: Option<VariantStats>,
    pub general_tur_violations: usize,
    pub separable_tur_violations: usize,
    pub approx: Option<VariantStats>,
    pub sampled: Option<VariantStats>,
    pub gap_by_gamma: Vec<GapBucket>,
}

/// Number of equal-width γ buckets for the gap statistics.
pub const GAP_BUCKETS: usize = 4;

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

pub fn summarize(records: &[TrialRecord], gamma_range: (f64, f64)) -> Result<RunSummary> {
    if records.is_empty() {
        return Err(Error::Contract("cannot summarize an empty run".into()));
    }
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.inputs.trial_id);
    let checks: Vec<&ExactChecks> = sorted.iter().filter_map(|r| r.checks.as_ref()).collect();

    let (lo, hi) = gamma_range;
    let width = (hi - lo) / GAP_BUCKETS as f64;
    let gap_by_gamma = (0..GAP_BUCKETS)
        .map(|k| {
            let low = lo + k as f64 * width;
            let high = if k + 1 == GAP_BUCKETS {
                hi
            } else {
                low + width
            };
            let gaps: Vec<f64> = sorted
                .iter()
                .filter(|r| {
                    let g = r.inputs.gamma;
                    g >= low && (g < high || (k + 1 == GAP_BUCKETS && g <= high))
                })
                .filter_map(|r| r.approx_gap())
                .collect();
            GapBucket {
                gamma_low: low,
                gamma_high: high,
                count: gaps.len(),
                median_gap: median(&gaps),
                max_gap: gaps.iter().copied().reduce(f64::max),
            }
        })
        .collect();

    Ok(RunSummary {
        trials: sorted.len(),
        failed_trials: sorted
            .iter()
            .filter(|r| r.error.is_some())
            .map(|r| r.inputs.trial_id)
            .collect(),
        exact: VariantStats::from_values(sorted.iter().filter_map(|r| r.exact.as_ref())),
        exact_imag: VariantStats::from_values(checks.iter().map(|c| &c.imag)),
        general_tur_violations: checks.iter().filter(|c| !c.general_tur.holds).count(),
        separable_tur_violations: checks.iter().filter(|c| !c.separable_tur.holds).count(),
        approx: VariantStats::from_values(sorted.iter().filter_map(|r| r.approx.as_ref())),
        sampled: VariantStats::from_values(
            sorted
                .iter()
                .filter_map(|r| r.sampled.as_ref().map(|s| &s.values)),
        ),
        gap_by_gamma,
    })
}

/// Median `|upper_approx − upper_exact|` at each fixed γ over `trials` draws
/// of the remaining parameters.
pub fn approximation_gap_sweep(seed: u64, gammas: &[f64], trials: usize) -> Result<Vec<f64>> {
    gammas
        .iter()
        .map(|&gamma| {
            let config = ExperimentConfig {
                seed,
                n_trials: trials,
                gamma_range: (gamma, gamma),
                variants: [Variant::Exact, Variant::Neumann1].into_iter().collect(),
                ..ExperimentConfig::default()
            };
            config.validate()?;
            let gaps: Vec<f64> = (0..trials as u64)
                .into_par_iter()
                .map(|id| {
                    let inputs = generate_trial(&config, id);
                    let rho = inputs.state();
                    let ch = inputs.channel()?;
                    let (a, b) = inputs.observables();
                    let bound =
                        |v| correlator_bound(&rho, &ch, &a, &b, Part::Real, v, config.reading);
                    let exact = bound(BoundVariant::Exact)?;
                    let approx = bound(BoundVariant::Neumann1)?;
                    Ok((approx.upper - exact.upper).abs())
                })
                .collect::<Result<_>>()?;
            median(&gaps).ok_or_else(|| Error::Contract("gap sweep needs trials > 0".into()))
        })
        .collect()
}

/// Fixed CSV header.
pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = vec!["trial_id".into(), "gamma".into()];
    h.extend((1..=12).map(|i| format!("theta_{i}")));
    h.extend(["a_i", "a_j", "b_i", "b_j"].map(String::from));
    for suffix in ["exact", "approx", "sampled"] {
        for col in ["c_real", "xi_b", "q_ab", "lower", "upper", "tur_lhs"] {
            h.push(format!("{col}_{suffix}"));
        }
    }
    h.extend(
        [
            "postselect_p0",
            "postselect_p0_sampled",
            "shots",
            "violated_exact",
            "violated_approx",
            "violated_sampled",
            "error",
        ]
        .map(String::from),
    );
    h
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn variant_cells(v: Option<&VariantValues>) -> Vec<String> {
    match v {
        Some(v) => [v.c_real, v.xi_b, v.q_ab, v.lower, v.upper, v.tur_lhs]
            .map(num)
            .to_vec(),
        None => vec![String::new(); 6],
    }
}

fn flag(present: bool, violated: bool) -> String {
    if present {
        violated.to_string()
    } else {
        String::new()
    }
}

/// CSV rows with numbers at 17 significant digits.
pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Contract(format!("csv write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header()).map_err(io)?;
    for r in records {
        let i = &r.inputs;
        let mut row = vec![i.trial_id.to_string(), num(i.gamma)];
        row.extend(i.theta.iter().map(|&t| num(t)));
        row.extend([i.a.0, i.a.1, i.b.0, i.b.1].map(|k| k.to_string()));
        row.extend(variant_cells(r.exact.as_ref()));
        row.extend(variant_cells(r.approx.as_ref()));
        row.extend(variant_cells(r.sampled.as_ref().map(|s| &s.values)));
        row.push(opt_num(r.postselect_p0));
        row.push(opt_num(r.sampled.as_ref().map(|s| s.p0)));
        row.push(
            r.sampled
                .as_ref()
                .map(|s| s.shots.to_string())
                .unwrap_or_default(),
        );
        row.push(flag(r.exact.is_some(), r.violated_exact()));
        row.push(flag(r.approx.is_some(), r.violated_approx()));
        row.push(flag(r.sampled.is_some(), r.violated_sampled()));
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Contract(format!("csv flush failed: {e}")))?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(value: &T, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, value)
        .map_err(|e| Error::Contract(format!("json write failed: {e}")))
}
