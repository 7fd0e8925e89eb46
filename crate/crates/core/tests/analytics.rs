use blockade_core::correlations::{
    b_coeff_t0, b_table_auto, b_table_numeric, g2_approx, g2_integral, g2_min, g2_series, BCoeffTable, G2MinMode,
    SeriesEvaluator,
};
use blockade_core::spectral::{delta_g, f2_highq, f2_kernel, SpectralDensity};
use blockade_core::spectrum::{a_coeff, s_integral, s_series, SidebandSeriesA};
use blockade_core::{Error, QuadratureSpec, SystemParams};
use proptest::prelude::*;

#[test]
fn thermal_kernel_matches_high_q_form() {
    let p = SystemParams::dimensionless(0.5, 0.2).with_q(1e4);
    let sd = SpectralDensity::from_params(&p).unwrap();
    let spec = QuadratureSpec::default();
    for i in 1..=20 {
        let tau = i as f64 * 10.0 / p.kappa / 20.0;
        let quad = f2_kernel(tau, &sd, 0.0, &spec).unwrap();
        let closed = f2_highq(tau, &p).unwrap();
        assert!(
            (quad - closed).norm() / (1.0 + closed.norm()) <= 1e-3,
            "tau {tau}: {quad} vs {closed}"
        );
    }
}

#[test]
fn kernel_needs_no_infrared_cutoff_at_finite_temperature() {
    let p = SystemParams::dimensionless(0.3, 0.2).with_q(50.0).with_nbar(2.0);
    let sd = SpectralDensity::from_params(&p).unwrap();
    let f = f2_kernel(3.0, &sd, p.temperature, &QuadratureSpec::default()).unwrap();
    assert!(f.re.is_finite() && f.im.is_finite() && f.re > 0.0);
}

#[test]
fn nonlinearity_quadrature_recovers_single_mode_value() {
    let spec = QuadratureSpec::default();
    for q in [1e2, 1e3, 1e4] {
        let sd = SpectralDensity::new(1.0, q, 0.5).unwrap();
        let dg = delta_g(&sd, &spec).unwrap();
        assert!((dg - 0.25).abs() < 1e-9, "Q {q}: {dg}");
    }
}

#[test]
fn spectrum_bounded_and_positive() {
    for (eta, kappa, nbar) in [(0.25, 0.05, 0.0), (0.5, 0.1, 0.0), (1.0, 0.3, 0.0), (0.5, 0.1, 0.5)] {
        let p = SystemParams::dimensionless(eta, kappa).with_nbar(nbar);
        for i in 0..400 {
            let d = -4.0 + 8.0 * i as f64 / 399.0;
            let s = s_series(d, &p, None).unwrap().value;
            assert!(s > 0.0 && s <= 1.0, "S({d}) = {s}");
        }
    }
}

#[test]
fn sideband_peaks_sit_at_multiples_of_the_mechanical_frequency() {
    let p = SystemParams::dimensionless(0.7, 0.05);
    let dg = p.delta_g();
    let s = |d: f64| s_series(d, &p, None).unwrap().value;
    for n in 0..3 {
        let centre = -dg + n as f64;
        // Locate the maximum on a fine grid within one linewidth.
        let best = (0..=2000)
            .map(|i| centre - p.kappa + 2.0 * p.kappa * i as f64 / 2000.0)
            .max_by(|a, b| s(*a).total_cmp(&s(*b)))
            .unwrap();
        assert!((best - centre).abs() <= p.kappa / 2.0, "peak {n} at {best}, expected {centre}");
        assert!(s(centre) > s(centre - p.kappa) && s(centre) > s(centre + p.kappa));
    }
}

#[test]
fn finite_q_spectrum_converges_to_infinite_q() {
    let spec = QuadratureSpec::default();
    let ideal = SystemParams::dimensionless(0.5, 0.1);
    let d = -ideal.delta_g();
    let reference = s_integral(d, &ideal, &spec).unwrap();
    let high_q = s_integral(d, &ideal.with_q(1e5), &spec).unwrap();
    assert!((high_q - reference).abs() / reference < 1e-3);
}

#[test]
fn sideband_table_reports_truncation() {
    let p = SystemParams::dimensionless(1.0, 0.1);
    let full = SidebandSeriesA::new(&p, None).unwrap();
    assert!(full.truncation_error < 1e-12);
    let short = SidebandSeriesA::new(&p, Some(2)).unwrap();
    let expected: f64 = (3..60).map(|n| a_coeff(n, 1.0, 0.0)).sum();
    assert!((short.truncation_error - expected).abs() < 1e-14);
}

#[test]
fn numeric_table_symmetric_under_index_swap() {
    let table = b_table_numeric(0.6, 0.7, 64).unwrap();
    for (n, m, p, b) in table.iter() {
        assert!((b - table.get(m, n, p)).abs() <= 1e-8);
    }
}

#[test]
fn numeric_table_sum_rule_at_moderate_coupling() {
    // The 64-point grid loses mass here and must be refined.
    let p = SystemParams::dimensionless(0.75, 0.1).with_nbar(0.5);
    let table = b_table_auto(0.75, p.nbar()).unwrap();
    assert!((table.sum() - 1.0).abs() < 1e-8);
    assert!(table.truncation_error < 1e-8);
}

#[test]
fn closed_form_coefficients_are_exactly_symmetric() {
    for eta in [0.3, 0.8, 1.3] {
        for n in 0..12 {
            for m in 0..12 {
                for p in 0..12 {
                    assert_eq!(b_coeff_t0(n, m, p, eta).unwrap(), b_coeff_t0(m, n, p, eta).unwrap());
                }
            }
        }
    }
}

#[test]
fn series_rejects_mismatched_table() {
    let table = BCoeffTable::closed_form(0.5).unwrap();
    let p = SystemParams::dimensionless(0.4, 0.1);
    assert!(matches!(g2_series(-0.16, &p, &table, None), Err(Error::InvalidParameter { .. })));
}

#[test]
fn coherent_light_for_vanishing_coupling() {
    let spec = QuadratureSpec::default();
    let p = SystemParams::dimensionless(1e-4, 0.1);
    let evaluator = SeriesEvaluator::new(&p).unwrap();
    // Away from the one-phonon sideband resonance at +omega_m.
    let detunings: Vec<f64> = (0..=40)
        .map(|i| -2.0 + 0.1 * i as f64)
        .filter(|d| (d - 1.0).abs() > 0.15)
        .collect();
    for &d in &detunings {
        let series = evaluator.eval(d).g2;
        let approx = g2_approx(d, &p).unwrap();
        assert!((series - 1.0).abs() <= 1e-6, "series {series} at {d}");
        assert!((approx - 1.0).abs() <= 1e-6, "approx {approx} at {d}");
    }
    for d in [-1.5, 0.0, 0.7, 1.5] {
        let quad = g2_integral(d, &p, &spec).unwrap().g2;
        assert!((quad - 1.0).abs() <= 1e-6, "integral {quad} at {d}");
    }
}

#[test]
fn weak_coupling_bunching_on_the_sideband_resonance() {
    // On the one-phonon resonance g2 - 1 ~ 2 eta^2 / kappa^2, which exceeds
    // 1e-6 at eta = 1e-4, kappa = 0.1; both routes must agree on it.
    let spec = QuadratureSpec::default();
    for eta in [1e-4, 1e-3] {
        let p = SystemParams::dimensionless(eta, 0.1);
        let series = SeriesEvaluator::new(&p).unwrap().eval(1.0).g2 - 1.0;
        let quad = g2_integral(1.0, &p, &spec).unwrap().g2 - 1.0;
        let scaled = series / (eta * eta);
        assert!((190.0..205.0).contains(&scaled), "eta {eta}: (g2-1)/eta^2 = {scaled}");
        assert!((quad - series).abs() < 1e-7, "eta {eta}: {quad} vs {series}");
    }
}

#[test]
fn no_antibunching_without_strong_coupling() {
    for kappa in [0.1, 0.3, 0.5] {
        for frac in [0.2, 0.5] {
            let p = SystemParams::dimensionless(frac * kappa, kappa);
            let m = g2_min(&p, G2MinMode::Scan).unwrap();
            assert!(m.g2_min >= 0.9, "g0 {} kappa {kappa}: {}", frac * kappa, m.g2_min);
        }
    }
}

#[test]
fn finite_temperature_series_uses_numeric_table() {
    let p = SystemParams::dimensionless(0.5, 0.15).with_nbar(0.5);
    let evaluator = SeriesEvaluator::new(&p).unwrap();
    let cold = SeriesEvaluator::new(&SystemParams::dimensionless(0.5, 0.15)).unwrap();
    let d = -p.delta_g();
    // Thermal motion washes out the blockade.
    assert!(evaluator.eval(d).g2 > cold.eval(d).g2);
    assert!(evaluator.table().truncation_error < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sideband_sum_rules(eta in 0.0f64..2.0, nbar in 0.0f64..10.0) {
        let (mut total, mut moment) = (0.0, 0.0);
        for n in -600..=600 {
            let a = a_coeff(n, eta, nbar);
            prop_assert!(a >= 0.0);
            total += a;
            moment += n as f64 * a;
        }
        prop_assert!((total - 1.0).abs() <= 1e-10);
        prop_assert!((moment - eta * eta).abs() <= 1e-10);
    }

    #[test]
    fn series_matches_integral(eta in 0.05f64..1.0, kappa in 0.05f64..0.5, offset in -3.0f64..3.0) {
        let p = SystemParams::dimensionless(eta, kappa);
        let d = -p.delta_g() + offset;
        let a = s_series(d, &p, None).unwrap().value;
        let b = s_integral(d, &p, &QuadratureSpec::default()).unwrap();
        prop_assert!(((a - b) / a).abs() <= 1e-6);
    }

    #[test]
    fn closed_form_table_sums_to_one(eta in 0.05f64..1.0) {
        let t = BCoeffTable::closed_form(eta).unwrap();
        prop_assert!((t.sum() - 1.0).abs() <= 1e-8);
    }
}
