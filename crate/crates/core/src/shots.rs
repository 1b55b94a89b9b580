//! Finite-shot sampling of computational-basis measurements.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, SubsystemLayout};

/// Where a protocol circuit is when its state is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Prepared,
    AfterUb,
    AfterChannel,
    AfterUa,
    Premeasure,
}

/// Density matrix of a protocol circuit together with the factors that are
/// read out in the computational basis.
#[derive(Debug, Clone)]
pub struct ProtocolState {
    pub layout: SubsystemLayout,
    pub rho: ComplexMatrix,
    pub stage: Stage,
    pub measured: Vec<usize>,
}

impl ProtocolState {
    /// Joint distribution of the measured factors, keyed by their digits.
    pub fn outcome_probabilities(&self) -> Result<BTreeMap<String, f64>> {
        for &f in &self.measured {
            let d = *self
                .layout
                .dims()
                .get(f)
                .ok_or_else(|| Error::Layout(format!("measured factor {f} not in layout")))?;
            if d > 10 {
                return Err(Error::Contract(format!(
                    "measured factor {f} has dimension {d}; outcomes are single digits"
                )));
            }
        }
        let mut out = BTreeMap::new();
        for i in 0..self.layout.total_dim() {
            let p = self.rho[(i, i)].re.max(0.0);
            let digits = self.layout.digits(i);
            let key: String = self
                .measured
                .iter()
                .map(|&f| char::from_digit(digits[f] as u32, 10).unwrap())
                .collect();
            *out.entry(key).or_insert(0.0) += p;
        }
        Ok(out)
    }
}

/// Counts per outcome string (one digit per measured factor, in measurement order).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotResult {
    pub counts: BTreeMap<String, u64>,
    pub shots: u64,
    pub seed: u64,
    pub stream: u64,
}

impl ShotResult {
    fn matching(&self, pred: impl Fn(&[u8]) -> bool) -> impl Iterator<Item = (&[u8], u64)> {
        self.counts
            .iter()
            .map(|(k, &n)| (k.as_bytes(), n))
            .filter(move |(k, _)| pred(k))
    }

    /// Number of shots whose outcome satisfies `pred` (outcome bytes are ASCII digits).
    pub fn count_where(&self, pred: impl Fn(&[u8]) -> bool) -> u64 {
        self.matching(pred).map(|(_, n)| n).sum()
    }

    pub fn frequency_where(&self, pred: impl Fn(&[u8]) -> bool) -> f64 {
        self.count_where(pred) as f64 / self.shots as f64
    }

    /// Sum of `±1` (qubit `pos` reads 0 or 1) over shots satisfying `pred`.
    pub fn z_sum_where(&self, pos: usize, pred: impl Fn(&[u8]) -> bool) -> i64 {
        self.matching(pred)
            .map(|(k, n)| {
                if k[pos] == b'0' {
                    n as i64
                } else {
                    -(n as i64)
                }
            })
            .sum()
    }
}

/// Multinomial draw of `shots` outcomes from the state's measured factors.
///
/// The generator is ChaCha8 keyed by `seed` on stream `stream`, so each
/// `(seed, stream)` pair is an independent reproducible sequence.
pub fn sample_shots(
    state: &ProtocolState,
    shots: u64,
    seed: u64,
    stream: u64,
) -> Result<ShotResult> {
    let probs = state.outcome_probabilities()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let total: f64 = probs.values().sum();
    let mut remaining_shots = shots;
    let mut remaining_mass = total;
    let mut counts = BTreeMap::new();
    let n = probs.len();
    for (k, (key, &p)) in probs.iter().enumerate() {
        let draw = if k + 1 == n {
            remaining_shots
        } else if remaining_shots == 0 || p <= 0.0 {
            0
        } else {
            let q = (p / remaining_mass).clamp(0.0, 1.0);
            Binomial::new(remaining_shots, q)
                .map_err(|e| Error::Contract(format!("binomial draw: {e}")))?
                .sample(&mut rng)
        };
        remaining_shots -= draw;
        remaining_mass -= p;
        if draw > 0 {
            counts.insert(key.clone(), draw);
        }
    }
    Ok(ShotResult {
        counts,
        shots,
        seed,
        stream,
    })
}
