//! Thermodynamic quantities and uncertainty relations for a channel acting on a
//! purified initial state.
//!
//! The initial state `ρ` of S is purified by a reference R of the same
//! dimension, `|Ψ_RS> = Σ_i √p_i |ψ_i>_R |ψ_i>_S` over the eigenbasis of `ρ`.
//! Joint vectors are laid out as `R ⊗ S ⊗ E`, with the environment dimension
//! equal to the number of Kraus operators and `|φ_0>` the no-jump outcome.

use serde::{Deserialize, Serialize};

use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::linalg::{
    c, expectation, hermitian_eigen, hermitian_inverse, identity, ket, matrix_element, outer,
    partial_trace, projector, require_hermitian, spectral, tensor_product, tensor_vec, trace,
    validate_density, ComplexMatrix, StateVector, SubsystemLayout, SINGULAR_EPS,
};

/// `|mean − Q|` at or below this is reported as the 0/0 case.
pub const DEGENERACY_TOL: f64 = 1e-10;
/// Slack on `lhs ≥ rhs`, relative to `max(1, rhs)`.
pub const TUR_SLACK: f64 = 1e-9;
/// Eigenvalues of `ρ` below this are dropped from the purification.
const SUPPORT_EPS: f64 = 1e-14;
/// Survival activity at or below this is treated as zero (rounding of `Tr ρ − 1`).
pub const XI_ZERO_TOL: f64 = 1e-14;

/// Canonical purification of a density matrix.
#[derive(Debug, Clone)]
pub struct PurifiedState {
    probabilities: Vec<f64>,
    basis: Vec<StateVector>,
    dim: usize,
    joint: StateVector,
}

/// Purifies `rho` over its eigenbasis; only the support is kept, but R always
/// has the dimension of S.
pub fn purify(rho: &ComplexMatrix) -> Result<PurifiedState> {
    validate_density(rho)?;
    let dim = rho.nrows();
    let (values, vectors) = hermitian_eigen(rho)?;
    let mut probabilities = Vec::new();
    let mut basis = Vec::new();
    for (p, v) in values.into_iter().zip(vectors) {
        if p > SUPPORT_EPS {
            probabilities.push(p);
            basis.push(v);
        }
    }
    let total: f64 = probabilities.iter().sum();
    for p in &mut probabilities {
        *p /= total;
    }
    let joint = probabilities
        .iter()
        .zip(&basis)
        .fold(StateVector::zeros(dim * dim), |acc, (&p, v)| {
            acc + tensor_vec(v, v).scale(p.sqrt())
        });
    Ok(PurifiedState {
        probabilities,
        basis,
        dim,
        joint,
    })
}

impl PurifiedState {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn basis(&self) -> &[StateVector] {
        &self.basis
    }

    /// Dimension of S (and of R).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `|Ψ_RS(0)>`.
    pub fn joint_vector(&self) -> &StateVector {
        &self.joint
    }

    /// `ρ_S(0) = Σ p_i |ψ_i><ψ_i|`.
    pub fn rho(&self) -> ComplexMatrix {
        self.probabilities
            .iter()
            .zip(&self.basis)
            .fold(ComplexMatrix::zeros(self.dim, self.dim), |acc, (&p, v)| {
                acc + projector(v).scale(p)
            })
    }

    /// `|Ψ_RS><Ψ_RS|`.
    pub fn rho_rs(&self) -> ComplexMatrix {
        projector(&self.joint)
    }

    pub fn layout_rs(&self) -> SubsystemLayout {
        SubsystemLayout::new(vec![self.dim, self.dim], vec!["R", "S"]).expect("nonzero dims")
    }
}

/// `R ⊗ S ⊗ E` layout for a purified state evolved by `ch`.
pub fn joint_layout(ps: &PurifiedState, ch: &KrausChannel) -> SubsystemLayout {
    SubsystemLayout::new(
        vec![ps.dim, ps.dim, ch.num_operators()],
        vec!["R", "S", "E"],
    )
    .expect("nonzero dims")
}

fn check_system(ps: &PurifiedState, ch: &KrausChannel) -> Result<()> {
    if ps.dim != ch.dim() {
        return Err(Error::dims(
            format!("state on dimension {}", ch.dim()),
            format!("dimension {}", ps.dim),
        ));
    }
    Ok(())
}

fn check_joint_operator(g: &ComplexMatrix, ps: &PurifiedState, ch: &KrausChannel) -> Result<()> {
    require_hermitian(g, "observable")?;
    joint_layout(ps, ch).check(g)
}

/// `Σ_m (I_R ⊗ V_m)|Ψ_RS> ⊗ |m>` for an arbitrary Kraus list.
pub fn joint_state_from_kraus(ps: &PurifiedState, operators: &[ComplexMatrix]) -> StateVector {
    let de = operators.len();
    let id_r = identity(ps.dim);
    operators
        .iter()
        .enumerate()
        .fold(StateVector::zeros(ps.dim * ps.dim * de), |acc, (m, v)| {
            let branch = tensor_product(&id_r, v) * &ps.joint;
            acc + tensor_vec(&branch, &ket(de, m))
        })
}

/// `|Ψ_RSE(T)> = (I_R ⊗ U_SE)(|Ψ_RS(0)> ⊗ |0_E>)`, using the channel's dilation
/// (synthesized when absent).
pub fn final_joint_state(ps: &PurifiedState, ch: &KrausChannel) -> Result<StateVector> {
    check_system(ps, ch)?;
    let d = ch.dilation_or_synthesize()?;
    let initial = tensor_vec(&ps.joint, &ket(d.env_dim, d.env_initial));
    Ok(tensor_product(&identity(ps.dim), &d.unitary) * initial)
}

/// Unnormalized `|Ψ̃_RSE(0)> = (I_R ⊗ (V0⁻¹)† ⊗ I_E)|Ψ_RS(0)> ⊗ |φ_0>`.
pub fn tilde_state(ps: &PurifiedState, ch: &KrausChannel) -> Result<StateVector> {
    check_system(ps, ch)?;
    let inv_dag = ch.no_jump_inverse()?.adjoint();
    let rs = tensor_product(&identity(ps.dim), &inv_dag) * &ps.joint;
    Ok(tensor_vec(
        &rs,
        &ket(ch.num_operators(), ch.no_jump_index()),
    ))
}

/// Survival activity `Ξ = Tr[ρ (V0†V0)⁻¹] − 1`.
pub fn survival_activity(rho: &ComplexMatrix, ch: &KrausChannel) -> Result<f64> {
    if rho.shape() != (ch.dim(), ch.dim()) {
        return Err(Error::dims(
            format!("{0}x{0} state", ch.dim()),
            format!("{}x{}", rho.nrows(), rho.ncols()),
        ));
    }
    let inv = hermitian_inverse(&ch.no_jump_gram())?;
    Ok(trace(&(rho * inv)).re - 1.0)
}

/// No-jump probability `p0 = Tr[ρ V0†V0]`.
pub fn no_jump_probability(rho: &ComplexMatrix, ch: &KrausChannel) -> f64 {
    trace(&(rho * ch.no_jump_gram())).re
}

/// Moments `Tr[ρ (V0†V0)^n]` for `n = 0..=order`, by direct matrix powers.
pub fn no_jump_moments(rho: &ComplexMatrix, ch: &KrausChannel, order: usize) -> Vec<f64> {
    let gram = ch.no_jump_gram();
    let mut power = identity(ch.dim());
    let mut out = Vec::with_capacity(order + 1);
    for _ in 0..=order {
        out.push(trace(&(rho * &power)).re);
        power *= &gram;
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Truncated estimate of `Ξ` from the moments `Tr[ρ(V0†V0)^n]`, `n = 0..=order`,
/// using the binomial rearrangement of the Neumann series of `(V0†V0)⁻¹`.
pub fn survival_activity_from_moments(moments: &[f64]) -> f64 {
    let order = moments.len() - 1;
    let sum: f64 = moments
        .iter()
        .enumerate()
        .map(|(n, &m)| {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(order + 1, n + 1) * m
        })
        .sum();
    sum - 1.0
}

/// Truncated estimates of `Ξ` for `N = 1..=order`.
pub fn survival_activity_series(
    rho: &ComplexMatrix,
    ch: &KrausChannel,
    order: usize,
) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::Contract("series order must be at least 1".into()));
    }
    let moments = no_jump_moments(rho, ch, order);
    Ok((1..=order)
        .map(|n| survival_activity_from_moments(&moments[..=n]))
        .collect())
}

/// Simulates the iterative postselection protocol: `ρ^(n+1)` is obtained from
/// `ρ^(n)` by applying `U` (even `n`) or `U†` (odd `n`) with the environment in
/// `|0>`, then projecting the environment onto `|0>`. Returns the success
/// probabilities `Tr[ρ^(n)] = Tr[ρ(V0†V0)^n]` for `n = 0..=order`.
pub fn survival_activity_protocol_sim(
    rho: &ComplexMatrix,
    ch: &KrausChannel,
    order: usize,
) -> Result<Vec<f64>> {
    let d = ch.dilation_or_synthesize()?;
    if rho.shape() != (d.system_dim, d.system_dim) {
        return Err(Error::dims(
            format!("{0}x{0} state", d.system_dim),
            format!("{}x{}", rho.nrows(), rho.ncols()),
        ));
    }
    let (ds, de, e0) = (d.system_dim, d.env_dim, d.env_initial);
    let env0 = projector(&ket(de, e0));
    let u_dag = d.unitary.adjoint();
    let mut state = rho.clone();
    let mut out = vec![trace(&state).re];
    for n in 0..order {
        let w = if n % 2 == 0 { &d.unitary } else { &u_dag };
        let evolved = w * tensor_product(&state, &env0) * w.adjoint();
        state = ComplexMatrix::from_fn(ds, ds, |s, t| evolved[(s * de + e0, t * de + e0)]);
        out.push(trace(&state).re);
    }
    Ok(out)
}

/// No-cost baseline `Q_G = Re <Ψ̃_RSE(0)| G |Ψ_RSE(T)>`.
pub fn q_baseline_general(g: &ComplexMatrix, ps: &PurifiedState, ch: &KrausChannel) -> Result<f64> {
    check_joint_operator(g, ps, ch)?;
    let tilde = tilde_state(ps, ch)?;
    let fin = final_joint_state(ps, ch)?;
    Ok(matrix_element(&tilde, g, &fin).re)
}

/// Baseline for an observable separable between R+S and E, from its block `G0`
/// on R+S conditioned on the no-jump outcome:
/// `Q = p0 Tr[ρ_RS^{V0} H]` with `H = ½{G0, I_R ⊗ (V0 V0†)⁻¹}`.
pub fn q_baseline_separable(
    g0: &ComplexMatrix,
    ps: &PurifiedState,
    ch: &KrausChannel,
) -> Result<f64> {
    check_system(ps, ch)?;
    require_hermitian(g0, "separable observable block")?;
    ps.layout_rs().check(g0)?;
    let rho = ps.rho();
    let p0 = no_jump_probability(&rho, ch);
    if p0 <= SINGULAR_EPS {
        return Err(Error::DegenerateChannel { probability: p0 });
    }
    let v0 = ch.no_jump();
    let lift = tensor_product(&identity(ps.dim), v0);
    let conditioned = (&lift * ps.rho_rs() * lift.adjoint()).unscale(p0);
    let k = tensor_product(&identity(ps.dim), &hermitian_inverse(&(v0 * v0.adjoint()))?);
    let h = (g0 * &k + &k * g0).scale(0.5);
    Ok(p0 * trace(&(conditioned * h)).re)
}

/// Quantum Fisher information at θ = 0 from `J = 4[<H1> − <H2>²]` with
/// `H1 = Σ dV_m†dV_m` and `H2 = i Σ dV_m† V_m`.
pub fn qfi(ch: &KrausChannel, ps: &PurifiedState) -> Result<f64> {
    check_system(ps, ch)?;
    let derivs = ch.kraus_derivatives()?;
    qfi_from_derivatives(ch, ps, &derivs)
}

pub(crate) fn qfi_from_derivatives(
    ch: &KrausChannel,
    ps: &PurifiedState,
    derivs: &[ComplexMatrix],
) -> Result<f64> {
    let n = ch.dim();
    let (h1, h2) = ch.operators().iter().zip(derivs).fold(
        (ComplexMatrix::zeros(n, n), ComplexMatrix::zeros(n, n)),
        |(h1, h2), (v, dv)| (h1 + dv.adjoint() * dv, h2 + dv.adjoint() * v),
    );
    let h2 = h2 * c(0.0, 1.0);
    let id_r = identity(ps.dim);
    let e1 = expectation(&ps.joint, &tensor_product(&id_r, &h1)).re;
    let e2 = expectation(&ps.joint, &tensor_product(&id_r, &h2)).re;
    Ok(4.0 * (e1 - e2 * e2))
}

/// `∂_θ <G>_θ` at θ = 0 from the analytic Kraus derivatives.
pub fn expectation_derivative(
    g: &ComplexMatrix,
    ps: &PurifiedState,
    ch: &KrausChannel,
) -> Result<f64> {
    check_joint_operator(g, ps, ch)?;
    let derivs = ch.kraus_derivatives()?;
    Ok(expectation_derivative_from(g, ps, ch, &derivs))
}

pub(crate) fn expectation_derivative_from(
    g: &ComplexMatrix,
    ps: &PurifiedState,
    ch: &KrausChannel,
    derivs: &[ComplexMatrix],
) -> f64 {
    let psi = joint_state_from_kraus(ps, ch.operators());
    let dpsi = joint_state_from_kraus(ps, derivs);
    2.0 * matrix_element(&dpsi, g, &psi).re
}

/// `<G>` on the joint state of the θ-perturbed channel.
pub fn perturbed_expectation(
    g: &ComplexMatrix,
    ps: &PurifiedState,
    ch: &KrausChannel,
    theta: f64,
) -> Result<f64> {
    check_joint_operator(g, ps, ch)?;
    let p = ch.perturbed(theta)?;
    let psi = joint_state_from_kraus(ps, &p.operators);
    Ok(expectation(&psi, g).re)
}

/// Symmetric logarithmic derivative of the final pure state.
#[derive(Debug, Clone)]
pub struct SldOperator {
    pub matrix: ComplexMatrix,
}

/// SLD `L = 2 ∂_θ ρ_RSE(T)` at θ = 0. Because `∂_θ|Ψ(T)> = ½(|Ψ(T)> − |Ψ̃(0)>)`,
/// this is `2|Ψ><Ψ| − (|Ψ̃><Ψ| + |Ψ><Ψ̃|)`.
pub fn sld(ps: &PurifiedState, ch: &KrausChannel) -> Result<SldOperator> {
    let psi = final_joint_state(ps, ch)?;
    let tilde = tilde_state(ps, ch)?;
    let matrix = projector(&psi).scale(2.0) - outer(&tilde, &psi) - outer(&psi, &tilde);
    Ok(SldOperator { matrix })
}

/// One evaluation of `Var[G] / (<G> − Q)² ≥ 1/Ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurReport {
    pub mean: f64,
    pub variance: f64,
    pub q_baseline: f64,
    pub xi: f64,
    /// `Var / (mean − Q)²`; NaN when degenerate.
    pub lhs: f64,
    /// `1/Ξ`; infinite when `Ξ = 0`.
    pub rhs: f64,
    pub holds: bool,
    pub margin: f64,
    pub degenerate: bool,
}

impl TurReport {
    pub fn from_terms(mean: f64, variance: f64, q_baseline: f64, xi: f64) -> Self {
        let variance = if variance < 0.0 && variance > -1e-10 {
            0.0
        } else {
            variance
        };
        let diff = mean - q_baseline;
        let degenerate = diff.abs() <= DEGENERACY_TOL;
        let lhs = if degenerate {
            f64::NAN
        } else {
            variance / (diff * diff)
        };
        let rhs = if xi > XI_ZERO_TOL {
            1.0 / xi
        } else {
            f64::INFINITY
        };
        let holds = degenerate || lhs >= rhs - TUR_SLACK * rhs.max(1.0);
        Self {
            mean,
            variance,
            q_baseline,
            xi,
            lhs,
            rhs,
            holds,
            margin: lhs - rhs,
            degenerate,
        }
    }

    /// `Var·Ξ / (<G> − Q)²`, equal to one at saturation.
    pub fn ratio(&self) -> f64 {
        self.lhs * self.xi
    }
}

fn moments_on(psi: &StateVector, g: &ComplexMatrix) -> (f64, f64) {
    let gpsi = g * psi;
    let mean = psi.dotc(&gpsi).re;
    let second = gpsi.norm_squared();
    (mean, second - mean * mean)
}

/// General TUR for an observable on R ⊗ S ⊗ E.
pub fn check_general_tur(
    g: &ComplexMatrix,
    ps: &PurifiedState,
    ch: &KrausChannel,
) -> Result<TurReport> {
    check_joint_operator(g, ps, ch)?;
    let psi = final_joint_state(ps, ch)?;
    let (mean, variance) = moments_on(&psi, g);
    let q = q_baseline_general(g, ps, ch)?;
    let xi = survival_activity(&ps.rho(), ch)?;
    Ok(TurReport::from_terms(mean, variance, q, xi))
}

/// Observable `Σ_m G_m ⊗ |m><m|`, separable between R+S and E, given by one
/// R+S block per environment outcome.
#[derive(Debug, Clone)]
pub struct SeparableObservable {
    pub blocks: Vec<ComplexMatrix>,
}

impl SeparableObservable {
    pub fn to_matrix(&self) -> ComplexMatrix {
        let de = self.blocks.len();
        let n = self.blocks[0].nrows();
        self.blocks
            .iter()
            .enumerate()
            .fold(ComplexMatrix::zeros(n * de, n * de), |acc, (m, b)| {
                acc + tensor_product(b, &projector(&ket(de, m)))
            })
    }
}

/// Separable TUR: moments over the full final state, baseline from the
/// no-jump block.
pub fn check_separable_tur(
    g: &SeparableObservable,
    ps: &PurifiedState,
    ch: &KrausChannel,
) -> Result<TurReport> {
    if g.blocks.len() != ch.num_operators() {
        return Err(Error::dims(
            format!("{} environment blocks", ch.num_operators()),
            g.blocks.len(),
        ));
    }
    let full = g.to_matrix();
    check_joint_operator(&full, ps, ch)?;
    let psi = final_joint_state(ps, ch)?;
    let (mean, variance) = moments_on(&psi, &full);
    let q = q_baseline_separable(&g.blocks[ch.no_jump_index()], ps, ch)?;
    let xi = survival_activity(&ps.rho(), ch)?;
    Ok(TurReport::from_terms(mean, variance, q, xi))
}

/// Result of the environment-observable trade-off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    /// `Var[G]/(<G> − g0)² ≥ 1/Ξ`.
    pub tur: TurReport,
    pub g0: f64,
    pub gmax: f64,
    /// `|<G> − g0|`.
    pub deviation: f64,
    /// `√(g_max² Ξ)`.
    pub cap: f64,
    pub evolution_holds: bool,
    /// With `g0 = 0` the TUR reads `Var[G]/<G>² ≥ 1/Ξ`.
    pub zero_baseline: bool,
}

/// Checks the trade-off for `G = I_R ⊗ I_S ⊗ G_E`, where the no-jump outcome
/// `|φ_0>` is an eigenvector of `G_E` with eigenvalue `g0` and `gmax` is the
/// largest eigenvalue modulus of `G_E`.
pub fn check_observable_evolution_bound(
    ch: &KrausChannel,
    rho: &ComplexMatrix,
    g_e: &ComplexMatrix,
    g0: f64,
    gmax: f64,
) -> Result<EvolutionReport> {
    require_hermitian(g_e, "environment observable")?;
    let de = ch.num_operators();
    if g_e.nrows() != de {
        return Err(Error::dims(
            format!("{de}x{de} environment observable"),
            g_e.nrows(),
        ));
    }
    let phi0 = ket(de, ch.no_jump_index());
    let residual = (g_e * &phi0 - phi0.scale(g0)).norm();
    if residual > 1e-9 {
        return Err(Error::Contract(format!(
            "no-jump outcome is not an eigenvector of G_E with eigenvalue {g0} (residual {residual:e})"
        )));
    }
    let spectrum_max = spectral(g_e)?.max_abs_eigenvalue();
    if (spectrum_max - gmax).abs() > 1e-9 {
        return Err(Error::Contract(format!(
            "gmax = {gmax} but the largest |eigenvalue| of G_E is {spectrum_max}"
        )));
    }
    let ps = purify(rho)?;
    let dim = ps.dim;
    let g = tensor_product(&identity(dim * dim), g_e);
    let tur = check_general_tur(&g, &ps, ch)?;
    let deviation = (tur.mean - g0).abs();
    let cap = (gmax * gmax * tur.xi.max(0.0)).sqrt();
    Ok(EvolutionReport {
        tur,
        g0,
        gmax,
        deviation,
        cap,
        evolution_holds: deviation <= cap + 1e-9,
        zero_baseline: g0 == 0.0,
    })
}

/// Reference-system correlator and its thermodynamic bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBound {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub q_baseline: f64,
    pub xi: f64,
    pub gmax: f64,
}

impl CorrelationBound {
    pub fn contains(&self, tol: f64) -> bool {
        self.lower - tol <= self.value && self.value <= self.upper + tol
    }
}

/// `R(0,T) = Σ_ij √(p_i p_j) Tr[G_R |ψ_i><ψ_j|] Tr[G_S E(|ψ_i><ψ_j|)]` together
/// with `Q_G ± √(g_max² Ξ)` for `G = G_R ⊗ G_S ⊗ I_E`.
pub fn classical_correlation_bound(
    ch: &KrausChannel,
    rho: &ComplexMatrix,
    g_r: &ComplexMatrix,
    g_s: &ComplexMatrix,
) -> Result<CorrelationBound> {
    require_hermitian(g_r, "reference observable")?;
    require_hermitian(g_s, "system observable")?;
    let ps = purify(rho)?;
    check_system(&ps, ch)?;
    if g_r.nrows() != ps.dim || g_s.nrows() != ps.dim {
        return Err(Error::dims(
            format!("{0}x{0} observables", ps.dim),
            format!(
                "{}x{} and {}x{}",
                g_r.nrows(),
                g_r.ncols(),
                g_s.nrows(),
                g_s.ncols()
            ),
        ));
    }
    let mut value = c(0.0, 0.0);
    for (pi, psi_i) in ps.probabilities.iter().zip(&ps.basis) {
        for (pj, psi_j) in ps.probabilities.iter().zip(&ps.basis) {
            let cross = outer(psi_i, psi_j);
            let r_part = trace(&(g_r * &cross));
            let s_part = trace(&(g_s * ch.apply(&cross)?));
            value += r_part * s_part * (pi * pj).sqrt();
        }
    }
    let g = tensor_product(&tensor_product(g_r, g_s), &identity(ch.num_operators()));
    let q = q_baseline_general(&g, &ps, ch)?;
    let xi = survival_activity(&ps.rho(), ch)?;
    let gmax = spectral(g_r)?.max_abs_eigenvalue() * spectral(g_s)?.max_abs_eigenvalue();
    let half_width = (gmax * gmax * xi.max(0.0)).sqrt();
    Ok(CorrelationBound {
        lower: q - half_width,
        value: value.re,
        upper: q + half_width,
        q_baseline: q,
        xi,
        gmax,
    })
}

/// Reduced state of S after tracing R and E out of `|Ψ_RSE(T)>`.
pub fn final_system_state(ps: &PurifiedState, ch: &KrausChannel) -> Result<ComplexMatrix> {
    let psi = final_joint_state(ps, ch)?;
    partial_trace(&projector(&psi), &joint_layout(ps, ch), &[1])
}
