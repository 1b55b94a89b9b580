use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use turlab_core::linalg::*;
use turlab_core::random::{random_density, random_hermitian};

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tensor_product_is_associative(seed in any::<u64>(), da in 1usize..4, db in 1usize..4, dc in 1usize..4) {
        let mut rng = seeded(seed);
        let a = random_hermitian(da, &mut rng);
        let b = random_hermitian(db, &mut rng);
        let c_ = random_hermitian(dc, &mut rng);
        let left = tensor_product(&tensor_product(&a, &b), &c_);
        let right = tensor_product(&a, &tensor_product(&b, &c_));
        prop_assert!(max_abs_diff(&left, &right) < 1e-13);
    }

    #[test]
    fn partial_trace_of_product_state(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let mut rng = seeded(seed);
        let a = random_density(da, &mut rng);
        let b = random_density(db, &mut rng);
        let layout = SubsystemLayout::from_dims(&[da, db]).unwrap();
        let ab = tensor_product(&a, &b);
        prop_assert!(max_abs_diff(&partial_trace(&ab, &layout, &[0]).unwrap(), &a) < 1e-13);
        prop_assert!(max_abs_diff(&partial_trace(&ab, &layout, &[1]).unwrap(), &b) < 1e-13);
    }

    #[test]
    fn embedding_matches_explicit_tensor(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let op = random_hermitian(3, &mut rng);
        let layout = SubsystemLayout::from_dims(&[2, 3, 2]).unwrap();
        let direct = tensor_all(&[&identity(2), &op, &identity(2)]);
        prop_assert!(max_abs_diff(&embed(&op, &layout, &[1]).unwrap(), &direct) < 1e-15);
    }

    #[test]
    fn spectral_identity_function_reconstructs(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = seeded(seed);
        let m = random_hermitian(n, &mut rng);
        let back = hermitian_function(&m, |x| x).unwrap();
        prop_assert!(max_abs_diff(&back, &m) < 1e-10);
        let tr: f64 = hermitian_eigen(&m).unwrap().0.iter().sum();
        prop_assert!((tr - trace(&m).re).abs() < 1e-10);
    }

    #[test]
    fn inverse_and_square_root_of_positive_matrices(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = seeded(seed);
        let rho = random_density(n, &mut rng) + identity(n).scale(0.1);
        let inv = hermitian_inverse(&rho).unwrap();
        prop_assert!(max_abs_diff(&(&inv * &rho), &identity(n)) < 1e-9);
        let s = psd_sqrt(&rho).unwrap();
        prop_assert!(max_abs_diff(&(&s * &s), &rho) < 1e-12);
    }
}

#[test]
fn swapped_targets_reverse_factor_order() {
    let mut rng = seeded(1);
    let a = random_hermitian(2, &mut rng);
    let b = random_hermitian(3, &mut rng);
    let layout = SubsystemLayout::from_dims(&[2, 3]).unwrap();
    let ba = tensor_product(&b, &a);
    let embedded = embed(&ba, &layout, &[1, 0]).unwrap();
    assert!(max_abs_diff(&embedded, &tensor_product(&a, &b)) < 1e-15);
}
