//! Standard single- and two-qubit gates.

use crate::linalg::{c, identity, tensor_product, ComplexMatrix};

/// Pauli matrix `σ_i` with `σ_0 = I`, `σ_1 = X`, `σ_2 = Y`, `σ_3 = Z`.
pub fn pauli(i: usize) -> ComplexMatrix {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i_ = c(0.0, 1.0);
    match i {
        0 => identity(2),
        1 => ComplexMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        2 => ComplexMatrix::from_row_slice(2, 2, &[z, -i_, i_, z]),
        3 => ComplexMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
        _ => panic!("pauli index {i} out of range 0..=3"),
    }
}

/// Two-qubit Pauli string `σ_i ⊗ σ_j`.
pub fn pauli_pair(i: usize, j: usize) -> ComplexMatrix {
    tensor_product(&pauli(i), &pauli(j))
}

pub fn hadamard() -> ComplexMatrix {
    let s = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    ComplexMatrix::from_row_slice(2, 2, &[s, s, s, -s])
}

/// Phase gate `diag(1, i)`.
pub fn s_gate() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 1.)])
}

pub fn rx(theta: f64) -> ComplexMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    ComplexMatrix::from_row_slice(2, 2, &[c(co, 0.), c(0., -s), c(0., -s), c(co, 0.)])
}

pub fn ry(theta: f64) -> ComplexMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    ComplexMatrix::from_row_slice(2, 2, &[c(co, 0.), c(-s, 0.), c(s, 0.), c(co, 0.)])
}

/// `|0><0| ⊗ I + |1><1| ⊗ u`, control first.
pub fn controlled(u: &ComplexMatrix) -> ComplexMatrix {
    let n = u.nrows();
    let mut out = ComplexMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(&identity(n));
    out.view_mut((n, n), (n, n)).copy_from(u);
    out
}

pub fn cnot() -> ComplexMatrix {
    controlled(&pauli(1))
}

pub fn cry(alpha: f64) -> ComplexMatrix {
    controlled(&ry(alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{is_unitary, max_abs_diff};

    #[test]
    fn paulis_are_hermitian_unitary_involutions() {
        for i in 0..4 {
            let p = pauli(i);
            assert!(is_unitary(&p, 1e-15));
            assert_eq!(p.adjoint(), p);
            assert!(max_abs_diff(&(&p * &p), &identity(2)) < 1e-15);
        }
    }

    #[test]
    fn basis_change_for_y_measurement() {
        // (H S†)† Z (H S†) = Y
        let u = hadamard() * s_gate().adjoint();
        let y = u.adjoint() * pauli(3) * &u;
        assert!(max_abs_diff(&y, &pauli(2)) < 1e-15);
        let x = hadamard() * pauli(3) * hadamard();
        assert!(max_abs_diff(&x, &pauli(1)) < 1e-15);
    }

    #[test]
    fn ry_rotates_zero_towards_one() {
        let r = ry(std::f64::consts::PI);
        assert!((r[(1, 0)].re - 1.0).abs() < 1e-15);
    }
}
