//! Trace-preserving completely positive maps in Kraus form.
//!
//! A [`KrausChannel`] keeps its operators in environment-outcome order: operator
//! `m` is the Kraus operator for finding the environment in computational basis
//! state `|m>`. One of them is distinguished as the no-jump operator `V0`, the
//! outcome in which the environment is found back in its initial state.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::gates;
use crate::linalg::{
    complete_unitary, hermitian_inverse, identity, max_abs_diff, polar_unitary, psd_sqrt,
    require_square, require_unitary, spectral, tensor_product, ComplexMatrix, StateVector,
    SubsystemLayout,
};

/// Tolerance on `‖Σ V_m† V_m − I‖_max`.
pub const COMPLETENESS_TOL: f64 = 1e-9;
/// Margin keeping `I − e^θ Σ_{m≥1} V_m†V_m` strictly positive.
pub const ADMISSIBILITY_MARGIN: f64 = 1e-12;

/// Unitary `U` on `S ⊗ E` with the environment starting in `|env_initial>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dilation {
    pub unitary: ComplexMatrix,
    pub system_dim: usize,
    pub env_dim: usize,
    pub env_initial: usize,
}

impl Dilation {
    pub fn layout(&self) -> SubsystemLayout {
        SubsystemLayout::new(vec![self.system_dim, self.env_dim], vec!["S", "E"])
            .expect("dilation dimensions are nonzero")
    }

    /// Block `(I ⊗ <out|) U (I ⊗ |inp>)`.
    pub fn block(&self, out: usize, inp: usize) -> ComplexMatrix {
        block_of(&self.unitary, self.system_dim, self.env_dim, out, inp)
    }
}

fn block_of(u: &ComplexMatrix, ds: usize, de: usize, out: usize, inp: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(ds, ds, |s, t| u[(s * de + out, t * de + inp)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    operators: Vec<ComplexMatrix>,
    no_jump_index: usize,
    dilation: Option<Dilation>,
}

fn completeness_defect(ops: &[ComplexMatrix]) -> f64 {
    let n = ops[0].nrows();
    let sum = ops
        .iter()
        .fold(ComplexMatrix::zeros(n, n), |acc, v| acc + v.adjoint() * v);
    max_abs_diff(&sum, &identity(n))
}

impl KrausChannel {
    /// Builds a channel from square Kraus operators satisfying completeness.
    pub fn new(operators: Vec<ComplexMatrix>, no_jump_index: usize) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::Contract(
                "channel needs at least one Kraus operator".into(),
            ));
        }
        let n = operators[0].nrows();
        for (m, v) in operators.iter().enumerate() {
            if v.nrows() != n || v.ncols() != n {
                return Err(Error::dims(
                    format!("{n}x{n} Kraus operator"),
                    format!("{}x{} at index {m}", v.nrows(), v.ncols()),
                ));
            }
        }
        if no_jump_index >= operators.len() {
            return Err(Error::Contract(format!(
                "no-jump index {no_jump_index} out of range for {} operators",
                operators.len()
            )));
        }
        let defect = completeness_defect(&operators);
        if defect > COMPLETENESS_TOL {
            return Err(Error::Contract(format!(
                "Kraus operators are not complete (max |Σ V†V − I| = {defect:e})"
            )));
        }
        Ok(Self {
            operators,
            no_jump_index,
            dilation: None,
        })
    }

    /// Reads one Kraus operator per environment basis state out of a unitary on
    /// `S ⊗ E`; `layout` must be `[dim_S, dim_E]`.
    pub fn from_unitary(
        u: &ComplexMatrix,
        layout: &SubsystemLayout,
        env_initial: usize,
    ) -> Result<Self> {
        if layout.len() != 2 {
            return Err(Error::Layout(format!(
                "dilation layout must have two factors (S, E), got {}",
                layout.len()
            )));
        }
        layout.check(u)?;
        require_unitary(u, "dilation")?;
        let (ds, de) = (layout.dims()[0], layout.dims()[1]);
        if env_initial >= de {
            return Err(Error::Contract(format!(
                "initial environment state {env_initial} out of range for dimension {de}"
            )));
        }
        let operators = (0..de)
            .map(|m| block_of(u, ds, de, m, env_initial))
            .collect();
        Ok(Self {
            operators,
            no_jump_index: env_initial,
            dilation: Some(Dilation {
                unitary: u.clone(),
                system_dim: ds,
                env_dim: de,
                env_initial,
            }),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            operators: vec![identity(dim)],
            no_jump_index: 0,
            dilation: Some(Dilation {
                unitary: identity(dim),
                system_dim: dim,
                env_dim: 1,
                env_initial: 0,
            }),
        }
    }

    /// Qubit amplitude damping with decay probability `gamma`, dilated by a
    /// controlled-RY(2 asin √γ) from S onto E followed by a CNOT from E onto S.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Contract(format!(
                "damping probability {gamma} outside [0, 1]"
            )));
        }
        let coupling = gates::cry(2.0 * gamma.sqrt().asin());
        // CNOT with E (second factor) as control and S as target
        let swap_cnot = {
            let x = gates::pauli(1);
            let p0 = ComplexMatrix::from_diagonal(&StateVector::from_vec(vec![
                crate::linalg::c(1., 0.),
                crate::linalg::c(0., 0.),
            ]));
            let p1 = identity(2) - &p0;
            tensor_product(&identity(2), &p0) + tensor_product(&x, &p1)
        };
        let u = swap_cnot * coupling;
        let layout = SubsystemLayout::new(vec![2, 2], vec!["S", "E"])?;
        Self::from_unitary(&u, &layout, 0)
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn no_jump_index(&self) -> usize {
        self.no_jump_index
    }

    /// `V0`.
    pub fn no_jump(&self) -> &ComplexMatrix {
        &self.operators[self.no_jump_index]
    }

    pub fn dim(&self) -> usize {
        self.operators[0].nrows()
    }

    pub fn num_operators(&self) -> usize {
        self.operators.len()
    }

    pub fn dilation(&self) -> Option<&Dilation> {
        self.dilation.as_ref()
    }

    /// Stored dilation, or one synthesized by completing the isometry
    /// `|s> ⊗ |v> ↦ Σ_m V_m|s> ⊗ |m>` (environment of dimension = operator count,
    /// initial state = no-jump index) to a unitary.
    pub fn dilation_or_synthesize(&self) -> Result<Cow<'_, Dilation>> {
        if let Some(d) = &self.dilation {
            return Ok(Cow::Borrowed(d));
        }
        let ds = self.dim();
        let de = self.operators.len();
        let e0 = self.no_jump_index;
        let n = ds * de;
        let fixed: Vec<(usize, StateVector)> = (0..ds)
            .map(|t| {
                let mut col = StateVector::zeros(n);
                for (m, v) in self.operators.iter().enumerate() {
                    for s in 0..ds {
                        col[s * de + m] = v[(s, t)];
                    }
                }
                (t * de + e0, col)
            })
            .collect();
        let unitary = complete_unitary(n, &fixed)?;
        Ok(Cow::Owned(Dilation {
            unitary,
            system_dim: ds,
            env_dim: de,
            env_initial: e0,
        }))
    }

    /// Returns the channel with a dilation attached (synthesizing one if absent).
    pub fn with_dilation(mut self) -> Result<Self> {
        if self.dilation.is_none() {
            let d = self.dilation_or_synthesize()?.into_owned();
            self.dilation = Some(d);
        }
        Ok(self)
    }

    fn check_operand(&self, m: &ComplexMatrix, what: &str) -> Result<()> {
        require_square(m, what)?;
        if m.nrows() != self.dim() {
            return Err(Error::dims(
                format!("{0}x{0} {what}", self.dim()),
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        Ok(())
    }

    /// Schrödinger picture: `ρ ↦ Σ V_m ρ V_m†`.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_operand(rho, "state")?;
        let n = self.dim();
        Ok(self
            .operators
            .iter()
            .fold(ComplexMatrix::zeros(n, n), |acc, v| {
                acc + v * rho * v.adjoint()
            }))
    }

    /// Heisenberg picture: `A ↦ Σ V_m† A V_m`.
    pub fn heisenberg(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_operand(a, "observable")?;
        let n = self.dim();
        Ok(self
            .operators
            .iter()
            .fold(ComplexMatrix::zeros(n, n), |acc, v| {
                acc + v.adjoint() * a * v
            }))
    }

    /// `Σ_{m ≠ 0} V_m† V_m = I − V0†V0`.
    pub fn jump_sum(&self) -> ComplexMatrix {
        let n = self.dim();
        self.operators
            .iter()
            .enumerate()
            .filter(|(m, _)| *m != self.no_jump_index)
            .fold(ComplexMatrix::zeros(n, n), |acc, (_, v)| {
                acc + v.adjoint() * v
            })
    }

    /// `V0† V0`.
    pub fn no_jump_gram(&self) -> ComplexMatrix {
        let v0 = self.no_jump();
        v0.adjoint() * v0
    }

    /// `V0⁻¹`, computed as `(V0†V0)⁻¹ V0†`.
    pub fn no_jump_inverse(&self) -> Result<ComplexMatrix> {
        Ok(hermitian_inverse(&self.no_jump_gram())? * self.no_jump().adjoint())
    }

    /// Kraus operators of the θ-perturbed family: jump operators scaled by
    /// `e^{θ/2}` and the no-jump operator replaced by
    /// `U_V sqrt(I − e^θ Σ_{m≥1} V_m†V_m)`.
    pub fn perturbed(&self, theta: f64) -> Result<PerturbedChannel> {
        let jumps = self.jump_sum();
        let max_jump = spectral(&jumps)?.max_eigenvalue();
        if theta.exp() * max_jump > 1.0 - ADMISSIBILITY_MARGIN {
            return Err(Error::Admissibility { theta, max_jump });
        }
        let polar = polar_unitary(self.no_jump())?;
        let n = self.dim();
        let v0 = polar * psd_sqrt(&(identity(n) - jumps.scale(theta.exp())))?;
        let scale = crate::linalg::c((theta / 2.0).exp(), 0.0);
        let operators = self
            .operators
            .iter()
            .enumerate()
            .map(|(m, v)| {
                if m == self.no_jump_index {
                    v0.clone()
                } else {
                    v * scale
                }
            })
            .collect();
        Ok(PerturbedChannel {
            theta,
            no_jump_index: self.no_jump_index,
            operators,
        })
    }

    /// `dV0/dθ` at θ = 0, equal to `½(V0 − (V0⁻¹)†)`.
    pub fn dv0_dtheta(&self) -> Result<ComplexMatrix> {
        let inv = self.no_jump_inverse()?;
        Ok((self.no_jump() - inv.adjoint()).scale(0.5))
    }

    /// `dV_m/dθ` at θ = 0 for every operator, in channel order.
    pub fn kraus_derivatives(&self) -> Result<Vec<ComplexMatrix>> {
        let dv0 = self.dv0_dtheta()?;
        Ok(self
            .operators
            .iter()
            .enumerate()
            .map(|(m, v)| {
                if m == self.no_jump_index {
                    dv0.clone()
                } else {
                    v.scale(0.5)
                }
            })
            .collect())
    }
}

/// Kraus operators `{V_m(θ)}` of the virtually perturbed map.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedChannel {
    pub theta: f64,
    pub no_jump_index: usize,
    pub operators: Vec<ComplexMatrix>,
}

impl PerturbedChannel {
    pub fn completeness_defect(&self) -> f64 {
        completeness_defect(&self.operators)
    }

    pub fn into_channel(self) -> Result<KrausChannel> {
        KrausChannel::new(self.operators, self.no_jump_index)
    }
}

/// Free-function form of [`KrausChannel::from_unitary`].
pub fn kraus_from_unitary(
    u: &ComplexMatrix,
    layout: &SubsystemLayout,
    env_initial: usize,
) -> Result<KrausChannel> {
    KrausChannel::from_unitary(u, layout, env_initial)
}
