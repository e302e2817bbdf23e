use seqregret::impossibility::{
    build_instance, choose_parameters, closed_form_kl, closed_form_vt, lower_bound_rhs,
    regret_closed_form, verify_lower_bound, SearchCaps, PSI_CHOICE,
};
use seqregret::Error;

#[test]
fn closed_form_examples() {
    assert!((closed_form_vt(0.25, 0.125, 9) - 0.194_444_444_444_444_4).abs() < 1e-15);
    assert_eq!(closed_form_vt(0.25, 0.125, 1), 0.0);
    assert!(closed_form_vt(0.25, 1.0 - 1e-12, 9) < 1e-12);
    assert!((closed_form_kl(0.25, 0.125, 9) - 2.0 * 8f64.ln()).abs() < 1e-14);
    assert_eq!(closed_form_kl(0.25, 0.125, 1), 0.0);
    assert!((regret_closed_form(0, 9).unwrap() - 8.0 / 9.0).abs() < 1e-15);
    assert_eq!(regret_closed_form(1, 9).unwrap(), 0.0);
    assert_eq!(regret_closed_form(2, 9).unwrap(), 0.0);
    assert!(regret_closed_form(3, 9).is_err());
}

#[test]
fn parameter_range() {
    assert!(matches!(
        build_instance(0.3, 0.25, 5),
        Err(Error::InvalidInput(_))
    ));
    assert!(build_instance(0.0, 0.1, 5).is_err());
    assert!(build_instance(0.2, 0.1, 0).is_err());
    assert!(build_instance(0.2, 0.2, 5).is_ok());
}

/// Brute-force version of the search with `ε ≡ 0`: `T_n = n` and both
/// right-hand sides compared directly.
fn first_admissible_n_without_epsilon() -> u64 {
    (1u64..)
        .find(|&n| {
            let delta = 1.0 / (n as f64 + 3.0);
            let ratio = (n as f64 - 1.0) / n as f64;
            let r1 = 0.875 * ratio * delta;
            let r2 = (ratio * 8f64.ln()).sqrt() * delta.sqrt();
            r1 < ratio && r2 < ratio
        })
        .unwrap()
}

#[test]
fn search_without_epsilon() {
    let zero = |_: u64, _: f64| 0.0;
    let w = choose_parameters(1.0, 0.0, 0.0, &zero, SearchCaps::default()).unwrap();
    assert_eq!(w.n, first_admissible_n_without_epsilon());
    assert_eq!(w.horizons, (1..=w.n).collect::<Vec<_>>());
    assert_eq!(w.psi, PSI_CHOICE);
    assert_eq!(w.delta, 1.0 / (w.n as f64 + 3.0));
}

#[test]
fn search_with_inverse_sqrt_epsilon() {
    let eps = |t: u64, _: f64| 1.0 / (t as f64).sqrt();
    let w = choose_parameters(1.0, 0.5, 0.25, &eps, SearchCaps::default()).unwrap();
    for (i, &t) in w.horizons.iter().enumerate() {
        let n = i as u64 + 1;
        assert!(t > n * n, "T_{n} = {t}");
    }
    assert!(w.horizons.windows(2).all(|p| p[1] > p[0]));
    let (r1, r2) = lower_bound_rhs(1.0, 0.5, 0.25, w.horizon, w.delta, w.epsilon);
    assert_eq!((r1, r2), (w.r1, w.r2));
    assert!(w.r1 < w.high_regret && w.r2 < w.high_regret);

    let v = verify_lower_bound(&w, 10_000, 1).unwrap();
    assert!(v.passed, "{v:?}");
    assert!((v.exact_probability_r1 - w.delta).abs() < 1e-12);
}

#[test]
fn search_cap_is_a_capacity_error() {
    let zero = |_: u64, _: f64| 0.0;
    // δ_n^{0.01} must fall below about 1/87.5, far beyond any cap
    match choose_parameters(
        100.0,
        0.99,
        0.0,
        &zero,
        SearchCaps {
            max_n: 2_000,
            max_horizon: 10_000,
        },
    ) {
        Err(Error::Capacity(msg)) => assert!(msg.contains("2000")),
        other => panic!("{other:?}"),
    }
    let slow = |_: u64, _: f64| 1.0;
    assert!(matches!(
        choose_parameters(1.0, 0.0, 0.0, &slow, SearchCaps::default()),
        Err(Error::Capacity(_))
    ));
}

#[test]
fn bad_search_arguments() {
    let zero = |_: u64, _: f64| 0.0;
    for (c, a, b) in [
        (0.0, 0.0, 0.0),
        (1.0, 1.0, 0.0),
        (1.0, 0.0, 0.5),
        (f64::INFINITY, 0.0, 0.0),
    ] {
        assert!(matches!(
            choose_parameters(c, a, b, &zero, SearchCaps::default()),
            Err(Error::InvalidInput(_))
        ));
    }
    let negative = |_: u64, _: f64| -1.0;
    assert!(choose_parameters(1.0, 0.0, 0.0, &negative, SearchCaps::default()).is_err());
}

#[test]
fn malformed_witness_fails_loudly() {
    let zero = |_: u64, _: f64| 0.0;
    let mut w = choose_parameters(1.0, 0.0, 0.0, &zero, SearchCaps::default()).unwrap();
    w.r1 = w.high_regret;
    assert!(matches!(
        verify_lower_bound(&w, 100, 0),
        Err(Error::Verification(_))
    ));
}
