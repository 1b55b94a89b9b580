use turlab_core::harness::*;

fn exact_only(seed: u64, n: usize) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        n_trials: n,
        shots: 0,
        variants: [Variant::Exact].into_iter().collect(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn default_run_has_no_exact_violations() {
    let (records, summary) = run_experiment(&ExperimentConfig::default()).unwrap();
    assert_eq!(records.len(), 50);
    assert!(summary.failed_trials.is_empty());
    let exact = summary.exact.unwrap();
    assert_eq!(exact.violations, 0);
    assert_eq!(summary.exact_imag.unwrap().violations, 0);
    assert_eq!(summary.general_tur_violations, 0);
    assert_eq!(summary.separable_tur_violations, 0);
    assert!(summary.sampled.is_some() && summary.approx.is_some());
    for (k, r) in records.iter().enumerate() {
        assert_eq!(r.inputs.trial_id, k as u64);
    }
}

#[test]
fn zero_coupling_gives_zero_width_bound() {
    let config = ExperimentConfig {
        gamma_range: (0.0, 0.0),
        ..exact_only(3, 10)
    };
    let (records, summary) = run_experiment(&config).unwrap();
    for r in &records {
        let e = r.exact.unwrap();
        assert!(e.xi_b.abs() < 1e-12);
        assert!((e.upper - e.lower).abs() < 1e-5);
        assert!(e.bound_holds && e.degenerate);
    }
    let stats = summary.exact.unwrap();
    assert_eq!(stats.violations, 0);
    assert_eq!(stats.degenerate, 10);
    assert_eq!(stats.min_margin, None);
}

#[test]
fn bound_width_shrinks_continuously_along_a_coupling_sweep() {
    let base = generate_trial(&exact_only(4, 1), 0);
    let mut last = f64::INFINITY;
    for k in (0..=10).rev() {
        let gamma = 0.07 * k as f64;
        let inputs = TrialInputs {
            gamma,
            ..base.clone()
        };
        let r = evaluate_trial(&exact_only(4, 1), inputs);
        let e = r.exact.unwrap();
        let width = e.upper - e.lower;
        assert!(width <= last + 1e-12);
        last = width;
    }
    assert!(last < 1e-6);
}

#[test]
fn summary_statistics_match_a_direct_scan() {
    let (records, summary) = run_experiment(&exact_only(5, 40)).unwrap();
    let margins: Vec<f64> = records
        .iter()
        .filter_map(|r| r.exact)
        .filter(|v| !v.degenerate)
        .map(|v| v.margin)
        .collect();
    let brute = margins.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(summary.exact.unwrap().min_margin, Some(brute));

    let one = summarize(&records[..1], (0.0, 0.75)).unwrap();
    let twice = summarize(&[records[0].clone(), records[0].clone()], (0.0, 0.75)).unwrap();
    assert_eq!(
        one.exact.unwrap().min_margin,
        twice.exact.unwrap().min_margin
    );
    assert_eq!(
        one.exact.unwrap().median_margin,
        twice.exact.unwrap().median_margin
    );
}

#[test]
fn runs_are_reproducible_to_the_byte() {
    let config = ExperimentConfig {
        n_trials: 8,
        seed: 99,
        ..ExperimentConfig::default()
    };
    let render = || {
        let (records, summary) = run_experiment(&config).unwrap();
        let mut csv = Vec::new();
        write_csv(&records, &mut csv).unwrap();
        let mut json = Vec::new();
        write_json(&summary, &mut json).unwrap();
        (csv, json)
    };
    assert_eq!(render(), render());
}

#[test]
fn csv_has_fixed_header_and_one_row_per_trial() {
    let (records, _) = run_experiment(&exact_only(7, 5)).unwrap();
    let mut buf = Vec::new();
    write_csv(&records, &mut buf).unwrap();
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, csv_header());
    assert_eq!(&header[..3], ["trial_id", "gamma", "theta_1"]);
    let rows: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 5);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for (row, rec) in rows.iter().zip(&records) {
        assert_eq!(&row[col("violated_exact")], "false");
        assert_eq!(&row[col("c_real_sampled")], "");
        let c: f64 = row[col("c_real_exact")].parse().unwrap();
        assert!((c - rec.exact.unwrap().c_real).abs() <= 1e-15 * c.abs().max(1.0));
    }
}

#[test]
fn invalid_configurations_are_rejected() {
    let bad = [
        ExperimentConfig {
            gamma_range: (0.2, 1.0),
            ..ExperimentConfig::default()
        },
        ExperimentConfig {
            gamma_range: (0.5, 0.2),
            ..ExperimentConfig::default()
        },
        ExperimentConfig {
            n_trials: 0,
            ..ExperimentConfig::default()
        },
        ExperimentConfig {
            shots: 0,
            ..ExperimentConfig::default()
        },
        ExperimentConfig {
            theta_range: (0.0, 7.0),
            ..ExperimentConfig::default()
        },
    ];
    for c in bad {
        assert!(run_experiment(&c).is_err(), "{c:?}");
    }
}
