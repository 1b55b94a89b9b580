//! Dense complex linear algebra on small Hilbert spaces.
//!
//! Every operator in the crate is a [`ComplexMatrix`]. Composite spaces are
//! described by a [`SubsystemLayout`]: factors are listed slowest-varying first,
//! so for a layout `[d0, d1, d2]` the basis index of `|i0 i1 i2>` is
//! `(i0 * d1 + i1) * d2 + i2`, which is the Kronecker convention used by
//! [`tensor_product`]. TUR computations use the order `R ⊗ S ⊗ E`; protocol
//! circuits use `S' ⊗ S ⊗ E` with extra environments appended.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type StateVector = DVector<Complex64>;

/// Entrywise tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Entrywise tolerance for unitarity checks.
pub const UNITARY_TOL: f64 = 1e-10;
/// Eigenvalues closer than this are grouped into one eigenspace.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Eigenvalues at or below this magnitude make an operator singular.
pub const SINGULAR_EPS: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Computational basis vector `|index>` in dimension `dim`.
pub fn ket(dim: usize, index: usize) -> StateVector {
    let mut v = StateVector::zeros(dim);
    v[index] = c(1.0, 0.0);
    v
}

/// Rank-one operator `|a><b|`.
pub fn outer(a: &StateVector, b: &StateVector) -> ComplexMatrix {
    a * b.adjoint()
}

pub fn projector(v: &StateVector) -> ComplexMatrix {
    outer(v, v)
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff: shape mismatch");
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    m.is_square() && max_abs_diff(m, &m.adjoint()) <= tol
}

pub fn is_unitary(m: &ComplexMatrix, tol: f64) -> bool {
    m.is_square() && max_abs_diff(&(m.adjoint() * m), &identity(m.nrows())) <= tol
}

/// `<v|op|v>`.
pub fn expectation(v: &StateVector, op: &ComplexMatrix) -> Complex64 {
    v.dotc(&(op * v))
}

/// `<a|op|b>`.
pub fn matrix_element(a: &StateVector, op: &ComplexMatrix, b: &StateVector) -> Complex64 {
    a.dotc(&(op * b))
}

/// Kronecker product; `a` supplies the slow-varying index.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn tensor_vec(a: &StateVector, b: &StateVector) -> StateVector {
    a.kronecker(b)
}

/// Kronecker product of a list of factors, left to right.
pub fn tensor_all(factors: &[&ComplexMatrix]) -> ComplexMatrix {
    let mut out = identity(1);
    for f in factors {
        out = out.kronecker(*f);
    }
    out
}

pub(crate) fn require_square(m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

pub(crate) fn require_hermitian(m: &ComplexMatrix, what: &str) -> Result<()> {
    require_square(m, what)?;
    let dev = max_abs_diff(m, &m.adjoint());
    if dev <= HERMITIAN_TOL {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "{what} is not Hermitian (max |M - M†| = {dev:e})"
        )))
    }
}

pub(crate) fn require_unitary(m: &ComplexMatrix, what: &str) -> Result<()> {
    require_square(m, what)?;
    let dev = max_abs_diff(&(m.adjoint() * m), &identity(m.nrows()));
    if dev <= UNITARY_TOL {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "{what} is not unitary (max |M†M - I| = {dev:e})"
        )))
    }
}

/// Checks that `rho` is a density matrix: Hermitian, unit trace, and positive
/// semidefinite within [`HERMITIAN_TOL`].
pub fn validate_density(rho: &ComplexMatrix) -> Result<()> {
    require_hermitian(rho, "density matrix")?;
    let tr = trace(rho);
    if (tr - c(1.0, 0.0)).norm() > HERMITIAN_TOL {
        return Err(Error::Contract(format!(
            "density matrix has trace {} instead of 1",
            tr.re
        )));
    }
    let (values, _) = hermitian_eigen(rho)?;
    if let Some(&min) = values.last() {
        if min < -HERMITIAN_TOL {
            return Err(Error::Contract(format!(
                "density matrix is not positive semidefinite (eigenvalue {min:e})"
            )));
        }
    }
    Ok(())
}

/// Ordered tensor factors of a composite Hilbert space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemLayout {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl SubsystemLayout {
    pub fn new<S: Into<String>>(dims: Vec<usize>, labels: Vec<S>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Layout("layout needs at least one factor".into()));
        }
        if dims.len() != labels.len() {
            return Err(Error::Layout(format!(
                "{} dimensions but {} labels",
                dims.len(),
                labels.len()
            )));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Layout(format!("factor {pos} has dimension 0")));
        }
        Ok(Self {
            dims,
            labels: labels.into_iter().map(Into::into).collect(),
        })
    }

    /// Layout with generic labels `f0, f1, ...`.
    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        let labels = (0..dims.len()).map(|i| format!("f{i}")).collect();
        Self::new(dims.to_vec(), labels)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Checks that a square matrix lives on this space.
    pub fn check(&self, m: &ComplexMatrix) -> Result<()> {
        let n = self.total_dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Layout(format!(
                "layout {:?} has dimension {n} but matrix is {}x{}",
                self.dims,
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(())
    }

    /// Mixed-radix digits of a flat basis index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (k, &d) in self.dims.iter().enumerate().rev() {
            out[k] = index % d;
            index /= d;
        }
        out
    }

    fn check_factors(&self, factors: &[usize]) -> Result<()> {
        for (n, &f) in factors.iter().enumerate() {
            if f >= self.dims.len() {
                return Err(Error::Layout(format!(
                    "factor index {f} out of range for {} factors",
                    self.dims.len()
                )));
            }
            if factors[..n].contains(&f) {
                return Err(Error::Layout(format!("factor {f} listed twice")));
            }
        }
        Ok(())
    }
}

/// Reduced operator on the `keep` factors (taken in layout order).
pub fn partial_trace(
    m: &ComplexMatrix,
    layout: &SubsystemLayout,
    keep: &[usize],
) -> Result<ComplexMatrix> {
    require_square(m, "partial_trace input")?;
    layout.check(m)?;
    layout.check_factors(keep)?;
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    let traced: Vec<usize> = (0..layout.len()).filter(|k| !keep.contains(k)).collect();

    let n = layout.total_dim();
    let kept_dim: usize = keep.iter().map(|&k| layout.dims[k]).product();
    let compose = |digits: &[usize], factors: &[usize]| {
        factors
            .iter()
            .fold(0usize, |acc, &f| acc * layout.dims[f] + digits[f])
    };
    let split: Vec<(usize, usize)> = (0..n)
        .map(|i| {
            let d = layout.digits(i);
            (compose(&d, &keep), compose(&d, &traced))
        })
        .collect();

    let mut out = ComplexMatrix::zeros(kept_dim, kept_dim);
    for i in 0..n {
        let (ki, ti) = split[i];
        for j in 0..n {
            let (kj, tj) = split[j];
            if ti == tj {
                out[(ki, kj)] += m[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Lifts `op`, acting on `targets` (in the listed order), to the full layout.
pub fn embed(
    op: &ComplexMatrix,
    layout: &SubsystemLayout,
    targets: &[usize],
) -> Result<ComplexMatrix> {
    require_square(op, "embedded operator")?;
    layout.check_factors(targets)?;
    let target_dim: usize = targets.iter().map(|&t| layout.dims[t]).product();
    if op.nrows() != target_dim {
        return Err(Error::Layout(format!(
            "operator is {}x{} but target factors {:?} span dimension {target_dim}",
            op.nrows(),
            op.ncols(),
            targets
        )));
    }
    let rest: Vec<usize> = (0..layout.len()).filter(|k| !targets.contains(k)).collect();
    let n = layout.total_dim();
    let compose = |digits: &[usize], factors: &[usize]| {
        factors
            .iter()
            .fold(0usize, |acc, &f| acc * layout.dims[f] + digits[f])
    };
    let split: Vec<(usize, usize)> = (0..n)
        .map(|i| {
            let d = layout.digits(i);
            (compose(&d, targets), compose(&d, &rest))
        })
        .collect();

    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let (ti, ri) = split[i];
        for j in 0..n {
            let (tj, rj) = split[j];
            if ri == rj {
                out[(i, j)] = op[(ti, tj)];
            }
        }
    }
    Ok(out)
}

/// Projector onto basis state `index` of one factor, lifted to the full layout.
pub fn factor_projector(
    layout: &SubsystemLayout,
    factor: usize,
    index: usize,
) -> Result<ComplexMatrix> {
    layout.check_factors(&[factor])?;
    let d = layout.dims[factor];
    if index >= d {
        return Err(Error::Layout(format!(
            "basis index {index} out of range for factor of dimension {d}"
        )));
    }
    embed(&projector(&ket(d, index)), layout, &[factor])
}

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted descending.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, Vec<StateVector>)> {
    require_hermitian(m, "spectral input")?;
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| eig.eigenvectors.column(k).into_owned())
        .collect();
    Ok((values, vectors))
}

/// Eigenvalues with their eigenspace projectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Distinct eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub projectors: Vec<ComplexMatrix>,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map(|x| x)
    }

    /// `Σ f(ζ_n) Π_n`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.projectors.first().map_or(0, |p| p.nrows());
        self.eigenvalues
            .iter()
            .zip(&self.projectors)
            .fold(ComplexMatrix::zeros(n, n), |acc, (&z, p)| {
                acc + p.scale(f(z))
            })
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// Largest eigenvalue modulus.
    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |acc, z| acc.max(z.abs()))
    }
}

/// Spectral decomposition with eigenvalues within [`DEGENERACY_TOL`] grouped.
pub fn spectral(m: &ComplexMatrix) -> Result<SpectralDecomposition> {
    let (values, vectors) = hermitian_eigen(m)?;
    let mut eigenvalues: Vec<f64> = Vec::new();
    let mut projectors: Vec<ComplexMatrix> = Vec::new();
    let mut group_head = f64::NAN;
    let mut group_sum = 0.0;
    let mut group_len = 0usize;
    for (z, v) in values.into_iter().zip(vectors) {
        if group_len > 0 && (group_head - z).abs() <= DEGENERACY_TOL {
            group_sum += z;
            group_len += 1;
            *projectors.last_mut().unwrap() += projector(&v);
            *eigenvalues.last_mut().unwrap() = group_sum / group_len as f64;
        } else {
            group_head = z;
            group_sum = z;
            group_len = 1;
            eigenvalues.push(z);
            projectors.push(projector(&v));
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        projectors,
    })
}

/// `f(m) = Σ f(ζ_n) Π_n` for Hermitian `m`.
pub fn hermitian_function(m: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    Ok(spectral(m)?.map(f))
}

/// Inverse of a Hermitian matrix; fails with [`Error::SingularOperator`] when an
/// eigenvalue has modulus at or below [`SINGULAR_EPS`].
pub fn hermitian_inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let sd = spectral(m)?;
    if let Some(&z) = sd
        .eigenvalues
        .iter()
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
    {
        if z.abs() <= SINGULAR_EPS {
            return Err(Error::SingularOperator { eigenvalue: z });
        }
    }
    Ok(sd.map(|z| 1.0 / z))
}

/// Square root of a positive semidefinite matrix. Eigenvalues in
/// `[-SINGULAR_EPS, 0)` are clamped to zero.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let sd = spectral(m)?;
    let min = sd.min_eigenvalue();
    if min < -SINGULAR_EPS {
        return Err(Error::Contract(format!(
            "square root of a matrix with negative eigenvalue {min:e}"
        )));
    }
    Ok(sd.map(|z| z.max(0.0).sqrt()))
}

/// Unitary factor `U` of the polar decomposition `v = U sqrt(v†v)`.
pub fn polar_unitary(v: &ComplexMatrix) -> Result<ComplexMatrix> {
    require_square(v, "polar input")?;
    let gram = v.adjoint() * v;
    let sd = spectral(&gram)?;
    let min = sd.min_eigenvalue();
    if min <= SINGULAR_EPS {
        return Err(Error::SingularOperator { eigenvalue: min });
    }
    Ok(v * sd.map(|z| 1.0 / z.sqrt()))
}

/// Completes the orthonormal columns in `fixed` (indexed by their target column
/// positions) to a full unitary, filling the remaining columns by Gram-Schmidt
/// over the computational basis.
pub fn complete_unitary(dim: usize, fixed: &[(usize, StateVector)]) -> Result<ComplexMatrix> {
    let mut columns: Vec<Option<StateVector>> = vec![None; dim];
    let mut basis: Vec<StateVector> = Vec::with_capacity(dim);
    for (pos, v) in fixed {
        if *pos >= dim || v.len() != dim {
            return Err(Error::dims(format!("column in dimension {dim}"), v.len()));
        }
        columns[*pos] = Some(v.clone());
        basis.push(v.clone());
    }
    let mut candidates = (0..dim).map(|k| ket(dim, k));
    for slot in columns.iter_mut().filter(|s| s.is_none()) {
        loop {
            let Some(mut w) = candidates.next() else {
                return Err(Error::Contract(
                    "fixed columns are not orthonormal; cannot complete to a unitary".into(),
                ));
            };
            for b in &basis {
                let overlap = b.dotc(&w);
                w -= b * overlap;
            }
            // second pass for numerical orthogonality
            for b in &basis {
                let overlap = b.dotc(&w);
                w -= b * overlap;
            }
            let norm = w.norm();
            if norm > 1e-6 {
                let w = w.unscale(norm);
                basis.push(w.clone());
                *slot = Some(w);
                break;
            }
        }
    }
    let cols: Vec<StateVector> = columns.into_iter().map(Option::unwrap).collect();
    let u = ComplexMatrix::from_columns(&cols);
    require_unitary(&u, "completed dilation")?;
    Ok(u)
}

/// Matrix power by repeated multiplication.
pub fn matrix_power(m: &ComplexMatrix, n: usize) -> ComplexMatrix {
    (0..n).fold(identity(m.nrows()), |acc, _| acc * m)
}
