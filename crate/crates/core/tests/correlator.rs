use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use turlab_core::correlator::*;
use turlab_core::gates::{pauli, pauli_pair};
use turlab_core::harness::{generate_trial, ExperimentConfig, TrialInputs};
use turlab_core::linalg::{identity, ket, projector, tensor_product, trace, ComplexMatrix};
use turlab_core::random::{random_channel, random_density};
use turlab_core::tur::{expectation_derivative, purify, q_baseline_general, survival_activity};
use turlab_core::{Error, KrausChannel};

fn trials(n: u64) -> Vec<TrialInputs> {
    let config = ExperimentConfig {
        seed: 2024,
        ..ExperimentConfig::default()
    };
    (0..n).map(|id| generate_trial(&config, id)).collect()
}

/// `I_2 ⊗ E` on the ancilla-system pair.
fn lifted(ch: &KrausChannel) -> KrausChannel {
    let ops = ch
        .operators()
        .iter()
        .map(|v| tensor_product(&identity(2), v))
        .collect();
    KrausChannel::new(ops, ch.no_jump_index()).unwrap()
}

/// `Tr[ρ (Σ V† A V) B]` with the Heisenberg map written out by hand.
fn correlator_oracle(
    rho: &ComplexMatrix,
    ch: &KrausChannel,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
) -> Complex64 {
    let heis = ch
        .operators()
        .iter()
        .fold(ComplexMatrix::zeros(a.nrows(), a.nrows()), |acc, v| {
            acc + v.adjoint() * a * v
        });
    trace(&(rho * heis * b))
}

#[test]
fn protocol_matches_exact_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for t in trials(60) {
        let (a, b) = t.observables();
        let ch = t.channel().unwrap();
        let rho = t.state();
        let direct = correlator_oracle(&rho, &ch, &a, &b);
        assert!((protocol_correlator(&rho, &ch, &a, &b).unwrap() - direct).norm() <= 1e-10);
        assert!((exact_correlator(&rho, &ch, &a, &b).unwrap() - direct).norm() <= 1e-10);
    }
    // mixed inputs and channels whose dilation is synthesized from Kraus operators
    for _ in 0..40 {
        let ch = random_channel(4, 2, 0.05, &mut rng).unwrap();
        let ch = KrausChannel::new(ch.operators().to_vec(), 0).unwrap();
        let rho = random_density(4, &mut rng);
        let a = pauli_pair(rng.random_range(0..4), rng.random_range(1..4));
        let b = pauli_pair(rng.random_range(1..4), rng.random_range(0..4));
        let direct = correlator_oracle(&rho, &ch, &a, &b);
        assert!((protocol_correlator(&rho, &ch, &a, &b).unwrap() - direct).norm() <= 1e-10);
    }
}

#[test]
fn exact_bound_agrees_with_general_machinery_on_the_pair() {
    for t in trials(40) {
        let (a, b) = t.observables();
        let ch = t.channel().unwrap();
        let rho = t.state();
        let pair_ch = lifted(&ch);
        for part in [Part::Real, Part::Imag] {
            let report = correlator_bound(
                &rho,
                &ch,
                &a,
                &b,
                part,
                BoundVariant::Exact,
                QReading::Linear,
            )
            .unwrap();
            let (pair, g) = pair_problem(&rho, &a, &b, part);
            let ps = purify(&pair).unwrap();
            let g_full = tensor_product(&tensor_product(&identity(ps.dim()), &g), &identity(2));
            let q = q_baseline_general(&g_full, &ps, &pair_ch).unwrap();
            let xi = survival_activity(&pair, &pair_ch).unwrap();
            assert!(
                (report.q_ab - q).abs() <= 1e-9,
                "trial {} Q {} vs {}",
                t.trial_id,
                report.q_ab,
                q
            );
            assert!((report.xi_b - xi).abs() <= 1e-9);
            // <G> − Q is the derivative under the perturbation
            let d = expectation_derivative(&g_full, &ps, &pair_ch).unwrap();
            assert!((report.correlator - report.q_ab - d).abs() <= 1e-9);
            assert!(report.holds, "trial {} {:?}", t.trial_id, report);
            assert!(report.as_tur().holds);
            assert!((report.upper - report.lower - 2.0 * report.xi_b.sqrt()).abs() <= 1e-12);
        }
    }
}

#[test]
fn identity_channel_bound_collapses() {
    let ch = KrausChannel::identity(4);
    let t = &trials(1)[0];
    let (a, b) = t.observables();
    let r = correlator_bound(
        &t.state(),
        &ch,
        &a,
        &b,
        Part::Real,
        BoundVariant::Exact,
        QReading::Linear,
    )
    .unwrap();
    assert!(r.xi_b.abs() < 1e-14);
    assert!((r.upper - r.lower).abs() < 1e-14);
    assert!((r.correlator - r.q_ab).abs() < 1e-12);
    assert!(r.as_tur().degenerate);
    let ap =
        approx_bound_quantities(&t.state(), &ch, &a, &b, Part::Real, QReading::Linear).unwrap();
    assert!(ap.xi.abs() < 1e-14);
    assert!((ap.q - r.q_ab).abs() < 1e-12);
}

#[test]
fn amplitude_damping_closed_form() {
    let ch = KrausChannel::amplitude_damping(0.5).unwrap();
    let rho = projector(&ket(2, 1));
    let z = pauli(3);
    let r = correlator_bound(
        &rho,
        &ch,
        &z,
        &z,
        Part::Real,
        BoundVariant::Exact,
        QReading::Linear,
    )
    .unwrap();
    // E†(Z) = diag(1, 2γ − 1), so C = −(2γ − 1) = 0
    assert!(r.correlator.abs() < 1e-14);
    // ρ_B = |1><1|, V0†V0 = diag(1, 1/2)
    assert!((r.p0 - 0.5).abs() < 1e-14);
    assert!((r.xi_b - 1.0).abs() < 1e-12);
    assert!(r.lower <= 0.0 && 0.0 <= r.upper);
}

#[test]
fn nested_circuit_matches_matrix_product() {
    for t in trials(30) {
        let (a, b) = t.observables();
        let ch = t.channel().unwrap();
        let rho = t.state();
        let (pair, g) = pair_problem(&rho, &a, &b, Part::Real);
        let v0 = ch.no_jump();
        let lift = tensor_product(&identity(2), v0);
        let unnorm = &lift * &pair * lift.adjoint();
        let p0 = trace(&unnorm).re;
        let direct =
            trace(&(unnorm.unscale(p0) * &g * tensor_product(&identity(2), &(v0 * v0.adjoint()))))
                .re;
        let n = nested_expectation(&rho, &ch, &a, &b, Part::Real).unwrap();
        assert!((n.value - direct).abs() <= 1e-9, "trial {}", t.trial_id);
        assert!((n.p_first - p0).abs() <= 1e-10);
        // joint success from the unpostselected circuit
        let state = nested_circuit_state(&rho, &ch, &a, &b, Part::Real).unwrap();
        let probs = state.outcome_probabilities().unwrap();
        let joint: f64 = probs
            .iter()
            .filter(|(k, _)| &k[1..] == "00")
            .map(|(_, p)| p)
            .sum();
        assert!((n.p_first * n.p_second_given_first - joint).abs() <= 1e-10);
        let ap = approx_bound_quantities(&rho, &ch, &a, &b, Part::Real, QReading::Linear).unwrap();
        assert!((ap.nested - n.value).abs() <= 1e-9);
    }
}

#[test]
fn nested_identity_channel_reduces_to_pair_expectation() {
    let ch = KrausChannel::identity(4);
    let t = &trials(2)[1];
    let (a, b) = t.observables();
    let rho = t.state();
    let (pair, g) = pair_problem(&rho, &a, &b, Part::Real);
    let n = nested_expectation(&rho, &ch, &a, &b, Part::Real).unwrap();
    assert!((n.value - trace(&(pair * g)).re).abs() < 1e-12);
}

#[test]
fn truncation_error_shrinks_with_coupling() {
    // fixed angles, growing coupling
    let t = &trials(3)[2];
    let (a, b) = t.observables();
    let rho = t.state();
    let err = |gamma: f64| {
        let ch = turlab_core::harness::family_channel(gamma, &t.theta).unwrap();
        let ex = correlator_bound(
            &rho,
            &ch,
            &a,
            &b,
            Part::Real,
            BoundVariant::Exact,
            QReading::Linear,
        )
        .unwrap();
        let ap = approx_bound_quantities(&rho, &ch, &a, &b, Part::Real, QReading::Linear).unwrap();
        ((ap.xi - ex.xi_b).abs(), (ap.q - ex.q_ab).abs())
    };
    let (xi1, _) = err(0.1);
    let (xi5, _) = err(0.5);
    assert!(xi1 < xi5);
}

#[test]
fn linear_reading_converges_faster_than_quadratic() {
    // Halving γ should shrink the linear-reading error by about 2⁴ (error
    // O(γ⁴)) and the quadratic-reading error by about 2² (error O(γ²)).
    let mut lin_ratios = Vec::new();
    let mut quad_ratios = Vec::new();
    for t in trials(20) {
        let (a, b) = t.observables();
        let rho = t.state();
        let err = |gamma: f64, reading| {
            let ch = turlab_core::harness::family_channel(gamma, &t.theta).unwrap();
            let ex = correlator_bound(&rho, &ch, &a, &b, Part::Real, BoundVariant::Exact, reading)
                .unwrap();
            let ap = approx_bound_quantities(&rho, &ch, &a, &b, Part::Real, reading).unwrap();
            (ap.q - ex.q_ab).abs()
        };
        let (l1, l2) = (err(0.02, QReading::Linear), err(0.01, QReading::Linear));
        let (q1, q2) = (
            err(0.02, QReading::Quadratic),
            err(0.01, QReading::Quadratic),
        );
        if l2 > 1e-15 && q2 > 1e-15 {
            lin_ratios.push(l1 / l2);
            quad_ratios.push(q1 / q2);
        }
    }
    let med = |v: &[f64]| turlab_core::harness::median(v).unwrap();
    assert!(med(&lin_ratios) > 10.0, "linear {:?}", lin_ratios);
    assert!(med(&quad_ratios) < 6.0, "quadratic {:?}", quad_ratios);
}

#[test]
fn sampled_estimates_converge_with_shots() {
    let t = &trials(5)[4];
    let (a, b) = t.observables();
    let ch = t.channel().unwrap();
    let rho = t.state();
    let ap = approx_bound_quantities(&rho, &ch, &a, &b, Part::Real, QReading::Linear).unwrap();
    let exact_c = exact_correlator(&rho, &ch, &a, &b).unwrap().re;
    let err = |shots| {
        let mut total = 0.0;
        for seed in 0..20 {
            let s = sampled_bound(
                &rho,
                &ch,
                &a,
                &b,
                Part::Real,
                QReading::Linear,
                shots,
                seed,
                0,
            )
            .unwrap();
            total +=
                (s.correlator - exact_c).powi(2) + (s.p0 - ap.p0).powi(2) + (s.q - ap.q).powi(2);
        }
        (total / 20.0).sqrt()
    };
    let coarse = err(1_000);
    let fine = err(100_000);
    // O(1/√shots): a factor 100 in shots gives about a factor 10
    assert!(fine < coarse / 4.0, "coarse {coarse} fine {fine}");
    assert!(fine < 0.02);
}

#[test]
fn sampled_runs_are_reproducible() {
    let t = &trials(1)[0];
    let (a, b) = t.observables();
    let ch = t.channel().unwrap();
    let rho = t.state();
    let run =
        || sampled_bound(&rho, &ch, &a, &b, Part::Real, QReading::Linear, 1000, 77, 3).unwrap();
    assert_eq!(run(), run());
}

#[test]
fn rejects_non_unitary_observables() {
    let ch = KrausChannel::identity(2);
    let rho = projector(&ket(2, 0));
    let bad = pauli(3).scale(2.0);
    assert!(matches!(
        exact_correlator(&rho, &ch, &bad, &pauli(1)),
        Err(Error::Contract(_))
    ));
}
