//! Two-time correlators `C(T) = Tr[ρ A(T) B]` measured with an ancilla, and
//! the uncertainty bound they obey.

use serde::{Deserialize, Serialize};

use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::gates::{controlled, hadamard, pauli, s_gate};
use crate::linalg::{
    c, embed, factor_projector, hermitian_inverse, identity, ket, partial_trace, projector,
    require_hermitian, require_unitary, tensor_all, tensor_product, trace, validate_density,
    ComplexMatrix, SubsystemLayout, SINGULAR_EPS,
};
use crate::shots::{sample_shots, ProtocolState, ShotResult, Stage};
use crate::tur::{no_jump_probability, survival_activity, TurReport};

/// Absolute slack on the interval ends.
pub const BOUND_SLACK: f64 = 1e-9;

/// Which part of the correlator the ancilla readout targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Real,
    Imag,
}

impl Part {
    fn ancilla_pauli(self) -> ComplexMatrix {
        match self {
            Part::Real => pauli(1),
            Part::Imag => pauli(2),
        }
    }

    /// Rotation mapping the ancilla's `σx` (real) or `σy` (imaginary) onto `σz`.
    fn basis_change(self) -> ComplexMatrix {
        match self {
            Part::Real => hadamard(),
            Part::Imag => hadamard() * s_gate().adjoint(),
        }
    }
}

/// How the bound's `Ξ` and `Q` are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    Exact,
    /// First-order Neumann truncation of `(V0†V0)⁻¹` and `(V0V0†)⁻¹`.
    Neumann1,
}

/// Coefficient in front of the nested term of the truncated baseline.
///
/// `Linear`: `Q ≈ 2 p0 Tr[ρ^{V0} G] − p0 Re Tr[ρ^{V0} G (I ⊗ V0V0†)]`, the
/// expansion of `(V0V0†)⁻¹ ≈ 2I − V0V0†` inside the exact expression.
/// `Quadratic`: same with `p0²` on the nested term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QReading {
    #[default]
    Linear,
    Quadratic,
}

fn check_inputs(
    rho: &ComplexMatrix,
    ch: &KrausChannel,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
) -> Result<()> {
    validate_density(rho)?;
    let n = ch.dim();
    if rho.nrows() != n {
        return Err(Error::dims(format!("{n}x{n} system state"), rho.nrows()));
    }
    for (m, what) in [(a, "observable A"), (b, "observable B")] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::dims(format!("{n}x{n} {what}"), m.nrows()));
        }
        require_hermitian(m, what)?;
        require_unitary(m, what)?;
    }
    Ok(())
}

/// `Tr[ρ E†(A) B]`, computed directly.
pub fn exact_correlator(
    rho: &ComplexMatrix,
    ch: &KrausChannel,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
) -> Result<num_complex::Complex64> {
    check_inputs(rho, ch, a, b)?;
    Ok(trace(&(rho * ch.heisenberg(a)? * b)))
}

const ANC: usize = 0;
const SYS: usize = 1;
const ENV: usize = 2;

/// States of the ancilla circuit on `S' ⊗ S ⊗ E` after each step.
///
/// 1. `S'` in `|+>`, `S` in `ρ`, `E` in its initial state;
/// 2. controlled-`B` from `S'` onto `S`;
/// 3. the dilation unitary on `S ⊗ E`;
/// 4. controlled-`A` from `S'` onto `S`;
/// 5. the basis change on `S'` for the requested part.
///
/// The ancilla and environment are the measured factors.
pub fn correlator_circuit(
    rho: &ComplexMatrix,
    ch: &KrausChannel,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    part: Part,
) -> Result<Vec<ProtocolState>> {
    check_inputs(rho, ch, a, b)?;
    let dil = ch.dilation_or_synthesize()?;
    let ds = ch.dim();
    let de = dil.env_dim;
    let layout = SubsystemLayout::new(vec![2, ds, de], vec!["S'", "S", "E"])?;
    let plus = projector(&((ket(2, 0) + ket(2, 1)).unscale(2f64.sqrt())));
    let env0 = projector(&ket(de, dil.env_initial));
    let steps: [(Stage, ComplexMatrix); 4] = [
        (Stage::AfterUb, embed(&controlled(b), &layout, &[ANC, SYS])?),
        (
            Stage::AfterChannel,
            embed(&dil.unitary, &layout, &[SYS, ENV])?,
        ),
        (Stage::AfterUa, embed(&controlled(a), &layout, &[ANC, SYS])?),
        (
            Stage::Premeasure,
            embed(&part.basis_change(), &layout, &[ANC])?,
        ),
    ];
    let mut state = ProtocolState {
        layout: layout.clone(),
        rho: tensor_all(&[&plus, rho, &env0]),
        stage: Stage::Prepared,
        measured: vec![ANC, ENV],
    };
    let mut out = vec![state.clone()];
    for (stage, u) in steps {
        state.rho = &u * &state.rho * u.adjoint();
        state.stage = stage;
        out.push(state.clone());
    }
    Ok(out)
}

fn ancilla_z(state: &ProtocolState, anc: usize) -> Result<f64> {
    let z = embed(&pauli(3), &state.layout, &[anc])?;
    Ok(trace(&(&z * &state.rho)).re)
}

/// Correlator from the ancilla readouts: `<σz>` after the X-basis and
/// Y-basis circuits give the real and imaginary parts.
pub fn protocol_correlator(
    rho: &ComplexMatrix,
    ch: &KrausChannel,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
) -> Result<num_complex::Complex64> {
    let mut parts = [0.0; 2];
    for (slot, part) in parts.iter_mut().zip([Part::Real, Part::Imag]) {
        let states = correlator_circuit(rho, ch, a, b, part)?;
        *slot = ancilla_z(states.last().unwrap(), ANC)?;
    }
    Ok(c(parts[0], parts[1]))
}

/// Ancilla-system state after controlled-`B`, `U_B^c (|+><+| ⊗ ρ) U_B^c†`.
fn prepared_pair(rho: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let plus = projector(&((ket(2, 0) + ket(2, 1)).unscale(2f64.sqrt())));
    let ub = controlled(b);
    &ub * tensor_product(&plus, rho) * ub.adjoint()
}

/// `U_A^c† (σ ⊗ I) U_A^c`, whose expectation after the channel gives the part.
fn pair_observable(a: &ComplexMatrix, part: Part) -> ComplexMatrix {
    let ua = controlled(a);
    let s = tensor_product(&part.ancilla_pauli(), &identity(a.nrows()));
    ua.adjoint() * s * &ua
}

/// Quantities shared by the exact and truncated bounds.
#[derive(Debug, Clone)]
struct PairSetup {
    g: ComplexMatrix,
    /// `(I ⊗ V0) ρ' (I ⊗ V0†) / p0`.
    conditioned: ComplexMatrix,
    p0: f64,
    rho_b: ComplexMatrix,
}

fn pair_setup(
    rho: &ComplexMatrix,
    ch: &KrausChannel,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    part: Part,
) -> Result<PairSetup> {
    check_inputs(rho, ch, a, b)?;
    let ds = ch.dim();
    let pair = prepared_pair(rho, b);
    let layout = SubsystemLayout::from_dims(&[2, ds])?;
    let rho_b = partial_trace(&pair, &layout, &[1])?;
    let p0 = no_jump_probability(&rho_b, ch);
    if p0 <= SINGULAR_EPS {
        return Err(Error::DegenerateChannel { probability: p0 });
    }
    let lift = tensor_product(&identity(2), ch.no_jump());
    let conditioned = (&lift * &pair * lift.adjoint()).unscale(p0);
    Ok(PairSetup {
        g: pair_observable(a, part),
        conditioned,
        p0,
        rho_b,
    })
}

/// Bound `|C − Q_{A,B}| ≤ √Ξ_B` on one part of the correlator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub part: Part,
    pub variant: BoundVariant,
    /// Real or imaginary part of the exact correlator.
    pub correlator: f64,
    pub q_ab: f64,
    pub xi_b: f64,
    pub p0: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

impl BoundReport {
    fn new(
        part: Part,
        variant: BoundVariant,
        correlator: f64,
        q_ab: f64,
        xi_b: f64,
        p0: f64,
    ) -> Self {
        let half = xi_b.max(0.0).sqrt();
        let (lower, upper) = (q_ab - half, q_ab + half);
        Self {
            part,
            variant,
            correlator,
            q_ab,
            xi_b,
            p0,
            lower,
            upper,
            holds: correlator >= lower - BOUND_SLACK && correlator <= upper + BOUND_SLACK,
        }
    }

    /// The same inequality in TUR form, with `Var = 1 − C²` for the
    /// involutive pair observable.
    pub fn as_tur(&self) -> TurReport {
        TurReport::from_terms(
            self.correlator,
            1.0 - self.correlator * self.correlator,
            self.q_ab,
            self.xi_b,
        )
    }
}

/// Truncated estimates entering the `Neumann1` bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxQuantities {
    pub p0: f64,
    /// `Tr[ρ^{V0} G]`.
    pub conditioned_g: f64,
    /// `Re Tr[ρ^{V0} G (I ⊗ V0V0†)]`.
    pub nested: f64,
    pub xi: f64,
    pub q: f64,
}

impl ApproxQuantities {
    pub fn from_parts(p0: f64, conditioned_g: f64, nested: f64, reading: QReading) -> Self {
        let weight = match reading {
            QReading::Linear => p0,
            QReading::Quadratic => p0 * p0,
        };
        Self {
            p0,
            conditioned_g,
            nested,
            xi: 1.0 - p0,
            q: 2.0 * p0 * conditioned_g - weight * nested,
        }
    }
}

pub fn approx_bound_quantities(
    rho: &ComplexMatrix,
    ch: &KrausChannel,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    part: Part,
    reading: QReading,
) -> Result<ApproxQuantities> {
    let s = pair_setup(rho, ch, a, b, part)?;
    let conditioned_g = trace(&(&s.conditioned * &s.g)).re;
    let v0 = ch.no_jump();
    let k = tensor_product(&identity(2), &(v0 * v0.adjoint()));
    let nested = trace(&(&s.conditioned * &s.g * k)).re;
    Ok(ApproxQuantities::from_parts(
        s.p0,
        conditioned_g,
        nested,
        reading,
    ))
}

/// Bound for one part of the correlator. The system is the ancilla-system
/// pair under `I ⊗ E`, started in `U_B^c(|+><+| ⊗ ρ)U_B^c†`.
pub fn correlator_bound(
    rho: &ComplexMatrix,
    ch: &KrausChannel,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    part: Part,
    variant: BoundVariant,
    reading: QReading,
) -> Result<BoundReport> {
    let value = exact_correlator(rho, ch, a, b)?;
    let value = match part {
        Part::Real => value.re,
        Part::Imag => value.im,
    };
    match variant {
        BoundVariant::Exact => {
            let s = pair_setup(rho, ch, a, b, part)?;
            let xi = survival_activity(&s.rho_b, ch)?;
            let v0 = ch.no_jump();
            let k = tensor_product(&identity(2), &hermitian_inverse(&(v0 * v0.adjoint()))?);
            let h = (&s.g * &k + &k * &s.g).scale(0.5);
            let q = s.p0 * trace(&(&s.conditioned * h)).re;
            Ok(BoundReport::new(part, variant, value, q, xi, s.p0))
        }
        BoundVariant::Neumann1 => {
            let ap = approx_bound_quantities(rho, ch, a, b, part, reading)?;
            Ok(BoundReport::new(part, variant, value, ap.q, ap.xi, ap.p0))
        }
    }
}

/// Pair state `U_B^c(|+><+| ⊗ ρ)U_B^c†` and observable `U_A^c†(σ ⊗ I)U_A^c`,
/// for checking the bound against the general TUR machinery.
pub fn pair_problem(
    rho: &ComplexMatrix,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    part: Part,
) -> (ComplexMatrix, ComplexMatrix) {
    (prepared_pair(rho, b), pair_observable(a, part))
}

/// Separable TUR for the pair observable, `Var = 1 − <G>²`.
pub fn separable_tur_protocol_check(
    rho: &ComplexMatrix,
    ch: &KrausChannel,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    part: Part,
    variant: BoundVariant,
    reading: QReading,
) -> Result<TurReport> {
    Ok(correlator_bound(rho, ch, a, b, part, variant, reading)?.as_tur())
}

const N_ANC: usize = 0;
const N_PAIR: usize = 1;
const N_SYS: usize = 2;
const N_E1: usize = 3;
const N_E2: usize = 4;

/// Outcome of the nested circuit with mid-circuit postselection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedResult {
    /// `Re Tr[ρ^{V0} G (I ⊗ V0V0†)]`.
    pub value: f64,
    /// Probability that the first environment is found in its initial state.
    pub p_first: f64,
    /// Same for the second environment, given the first succeeded.
    pub p_second_given_first: f64,
    /// `<σz>` of the outer ancilla given both postselections.
    pub z_conditional: f64,
}

type NestedGates = (
    SubsystemLayout,
    usize,
    ComplexMatrix,
    Vec<ComplexMatrix>,
    Vec<ComplexMatrix>,
);

/// Unitary part of the nested circuit on `S'1 ⊗ S' ⊗ S ⊗ E1 ⊗ E2`, returned
/// as the initial state and the gates in order. The first gate block ends
/// where `E1` is postselected.
fn nested_gates(
    rho: &ComplexMatrix,
    ch: &KrausChannel,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    part: Part,
) -> Result<NestedGates> {
    check_inputs(rho, ch, a, b)?;
    let dil = ch.dilation_or_synthesize()?;
    let ds = ch.dim();
    let de = dil.env_dim;
    let layout = SubsystemLayout::new(vec![2, 2, ds, de, de], vec!["S'1", "S'", "S", "E1", "E2"])?;
    let plus = projector(&((ket(2, 0) + ket(2, 1)).unscale(2f64.sqrt())));
    let zero = projector(&ket(2, 0));
    let env0 = projector(&ket(de, dil.env_initial));
    let init = tensor_all(&[&zero, &plus, rho, &env0, &env0]);
    let g = pair_observable(a, part);
    let first = vec![
        embed(&controlled(b), &layout, &[N_PAIR, N_SYS])?,
        embed(&dil.unitary, &layout, &[N_SYS, N_E1])?,
    ];
    let second = vec![
        embed(&hadamard(), &layout, &[N_ANC])?,
        embed(&controlled(&g), &layout, &[N_ANC, N_PAIR, N_SYS])?,
        embed(&dil.unitary.adjoint(), &layout, &[N_SYS, N_E2])?,
        embed(&hadamard(), &layout, &[N_ANC])?,
    ];
    Ok((layout, dil.env_initial, init, first, second))
}

fn conjugate(rho: &ComplexMatrix, gates: &[ComplexMatrix]) -> ComplexMatrix {
    gates.iter().fold(rho.clone(), |r, u| u * r * u.adjoint())
}

/// Runs the nested circuit with postselection on both environments.
pub fn nested_expectation(
    rho: &ComplexMatrix,
    ch: &KrausChannel,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    part: Part,
) -> Result<NestedResult> {
    let (layout, e0, init, first, second) = nested_gates(rho, ch, a, b, part)?;
    let postselect = |r: &ComplexMatrix, factor: usize| -> Result<(ComplexMatrix, f64)> {
        let p = factor_projector(&layout, factor, e0)?;
        let kept = &p * r * &p;
        let prob = trace(&kept).re;
        if prob <= SINGULAR_EPS {
            return Err(Error::DegenerateChannel { probability: prob });
        }
        Ok((kept.unscale(prob), prob))
    };
    let (r, p_first) = postselect(&conjugate(&init, &first), N_E1)?;
    let (r, p_second) = postselect(&conjugate(&r, &second), N_E2)?;
    let state = ProtocolState {
        layout: layout.clone(),
        rho: r,
        stage: Stage::Premeasure,
        measured: vec![N_ANC],
    };
    let z = ancilla_z(&state, N_ANC)?;
    Ok(NestedResult {
        value: p_second * z,
        p_first,
        p_second_given_first: p_second,
        z_conditional: z,
    })
}

/// Nested circuit without mid-circuit postselection; `S'1`, `E1` and `E2`
/// are read out at the end.
pub fn nested_circuit_state(
    rho: &ComplexMatrix,
    ch: &KrausChannel,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    part: Part,
) -> Result<ProtocolState> {
    let (layout, _, init, first, second) = nested_gates(rho, ch, a, b, part)?;
    let r = conjugate(&conjugate(&init, &first), &second);
    Ok(ProtocolState {
        layout,
        rho: r,
        stage: Stage::Premeasure,
        measured: vec![N_ANC, N_E1, N_E2],
    })
}

/// Finite-shot estimates of the correlator and the truncated bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledBound {
    pub correlator: f64,
    pub p0: f64,
    pub conditioned_g: f64,
    pub nested: f64,
    pub xi: f64,
    pub q: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
    pub tur: TurReport,
    pub main_shots: ShotResult,
    pub nested_shots: ShotResult,
}

/// Runs both circuits for `shots` each. The main circuit uses stream
/// `2·stream` and the nested one `2·stream + 1`.
#[allow(clippy::too_many_arguments)]
pub fn sampled_bound(
    rho: &ComplexMatrix,
    ch: &KrausChannel,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    part: Part,
    reading: QReading,
    shots: u64,
    seed: u64,
    stream: u64,
) -> Result<SampledBound> {
    if shots == 0 {
        return Err(Error::Contract(
            "sampled bound needs at least one shot".into(),
        ));
    }
    let dil = ch.dilation_or_synthesize()?;
    let e0 = char::from_digit(dil.env_initial as u32, 10)
        .ok_or_else(|| Error::Contract("environment initial index must be a single digit".into()))?
        as u8;
    let main_state = correlator_circuit(rho, ch, a, b, part)?.pop().unwrap();
    let main = sample_shots(&main_state, shots, seed, 2 * stream)?;
    let nested_state = nested_circuit_state(rho, ch, a, b, part)?;
    let nested_shots = sample_shots(&nested_state, shots, seed, 2 * stream + 1)?;

    let n = shots as f64;
    let correlator = main.z_sum_where(0, |_| true) as f64 / n;
    let survived = main.count_where(|k| k[1] == e0);
    if survived == 0 {
        return Err(Error::DegenerateChannel { probability: 0.0 });
    }
    let p0 = survived as f64 / n;
    let conditioned_g = main.z_sum_where(0, |k| k[1] == e0) as f64 / survived as f64;
    let first = nested_shots.count_where(|k| k[1] == e0);
    if first == 0 {
        return Err(Error::DegenerateChannel { probability: 0.0 });
    }
    let nested = nested_shots.z_sum_where(0, |k| k[1] == e0 && k[2] == e0) as f64 / first as f64;
    let ap = ApproxQuantities::from_parts(p0, conditioned_g, nested, reading);
    let report = BoundReport::new(part, BoundVariant::Neumann1, correlator, ap.q, ap.xi, p0);
    Ok(SampledBound {
        correlator,
        p0,
        conditioned_g,
        nested,
        xi: ap.xi,
        q: ap.q,
        lower: report.lower,
        upper: report.upper,
        holds: report.holds,
        tur: report.as_tur(),
        main_shots: main,
        nested_shots,
    })
}
