//! Random states, observables and channels for property checks.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::channels::KrausChannel;
use crate::error::Result;
use crate::linalg::{c, spectral, trace, ComplexMatrix, StateVector, SubsystemLayout};

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phase fix).
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let qr = ginibre(n, n, rng).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            c(1.0, 0.0)
        };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(n, n, rng);
    (&g + g.adjoint()).scale(0.5)
}

/// Full-rank density matrix `G G† / Tr(G G†)`.
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(n, n, rng);
    let m = &g * g.adjoint();
    let tr = trace(&m);
    let mut out = m.unscale(tr.re);
    // exact Hermiticity
    out = (&out + out.adjoint()).scale(0.5);
    out
}

pub fn random_pure_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> StateVector {
    let v = ginibre(n, 1, rng).column(0).into_owned();
    let norm = v.norm();
    v.unscale(norm)
}

/// Channel dilated by a Haar unitary on `S ⊗ E`, redrawn until the smallest
/// eigenvalue of `V0†V0` is at least `min_survival`.
pub fn random_channel<R: Rng + ?Sized>(
    system_dim: usize,
    env_dim: usize,
    min_survival: f64,
    rng: &mut R,
) -> Result<KrausChannel> {
    let layout = SubsystemLayout::new(vec![system_dim, env_dim], vec!["S", "E"])?;
    loop {
        let u = random_unitary(system_dim * env_dim, rng);
        let ch = KrausChannel::from_unitary(&u, &layout, 0)?;
        if spectral(&ch.no_jump_gram())?.min_eigenvalue() >= min_survival {
            return Ok(ch);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{is_hermitian, is_unitary, validate_density};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_respect_their_contracts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1, 2, 5] {
            assert!(is_unitary(&random_unitary(n, &mut rng), 1e-12));
            assert!(is_hermitian(&random_hermitian(n, &mut rng), 0.0));
            validate_density(&random_density(n, &mut rng)).unwrap();
            assert!((random_pure_state(n, &mut rng).norm() - 1.0).abs() < 1e-14);
        }
        let ch = random_channel(2, 2, 0.2, &mut rng).unwrap();
        assert!(spectral(&ch.no_jump_gram()).unwrap().min_eigenvalue() >= 0.2);
    }
}
