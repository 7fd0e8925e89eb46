//! End-to-end checks of the three routes against each other and against the
//! published magnitudes. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use blockade_core::correlations::{
    b_table_auto, g2_bad_cavity, g2_integral, g2_min, BCoeffTable, G2MinMode, SeriesEvaluator,
};
use blockade_core::oracle::{
    steady_state, weak_drive_extrapolation, DensityMatrix, EvolutionSpec, LindbladSystem, SteadyStateMethod,
    TruncationSpec,
};
use blockade_core::spectral::gamma_dephasing;
use blockade_core::spectrum::{a_coeff, s_integral, s_series};
use blockade_core::{QuadratureSpec, SystemParams};
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn within_budget(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() <= limit_s
}

fn series_vs_integral_spectrum() -> Outcome {
    let start = Instant::now();
    let spec = QuadratureSpec::default();
    let mut cases = Vec::new();
    for eta in [0.25, 0.5, 1.0] {
        for kappa in [0.05, 0.1, 0.3] {
            for d in linspace(-eta * eta - 3.0, -eta * eta + 3.0, 50) {
                cases.push((eta, kappa, d));
            }
        }
    }
    let worst = cases
        .par_iter()
        .map(|&(eta, kappa, d)| {
            let p = SystemParams::dimensionless(eta, kappa);
            let a = s_series(d, &p, None).expect("series").value;
            let b = s_integral(d, &p, &spec).expect("integral");
            (rel(b, a), eta, kappa, d)
        })
        .reduce(|| (0.0, 0.0, 0.0, 0.0), |x, y| if y.0 > x.0 { y } else { x });
    let elapsed = start.elapsed();
    outcome(
        worst.0 <= 1e-6 && within_budget(elapsed, 10.0),
        format!(
            "max rel dev {:.2e} (eta {}, k {}, d0 {:.3}) over {} points in {:.2?}",
            worst.0,
            worst.1,
            worst.2,
            worst.3,
            cases.len(),
            elapsed
        ),
    )
}

fn sum_rules() -> Outcome {
    let start = Instant::now();
    let mut worst_a: f64 = 0.0;
    let mut worst_moment: f64 = 0.0;
    for eta in [0.1, 0.5, 1.0, 1.5, 2.0] {
        for nbar in [0.0, 0.5, 5.0] {
            let (mut total, mut moment) = (0.0, 0.0);
            for n in -400..=400 {
                let a = a_coeff(n, eta, nbar);
                total += a;
                moment += n as f64 * a;
            }
            worst_a = worst_a.max((total - 1.0).abs());
            worst_moment = worst_moment.max((moment - eta * eta).abs());
        }
    }
    let mut worst_b: f64 = 0.0;
    for eta in [0.25, 0.5, 0.75, 1.0] {
        let closed = BCoeffTable::closed_form(eta).expect("closed-form table");
        worst_b = worst_b.max((closed.sum() - 1.0).abs());
        let p = SystemParams::dimensionless(eta, 0.1).with_nbar(0.5);
        let numeric = b_table_auto(eta, p.nbar()).expect("numeric table");
        worst_b = worst_b.max((numeric.sum() - 1.0).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst_a <= 1e-10 && worst_moment <= 1e-10 && worst_b <= 1e-8 && within_budget(elapsed, 5.0),
        format!(
            "|sum A - 1| {worst_a:.1e}, |sum nA - eta^2| {worst_moment:.1e}, |sum B - 1| {worst_b:.1e} in {elapsed:.2?}"
        ),
    )
}

fn series_vs_integral_g2() -> Outcome {
    let start = Instant::now();
    let spec = QuadratureSpec::default();
    let mut cases = Vec::new();
    for eta in linspace(0.1, 0.7, 5) {
        for kappa in linspace(0.05, 0.3, 5) {
            cases.push((eta, kappa));
        }
    }
    let worst = cases
        .par_iter()
        .map(|&(eta, kappa)| {
            let p = SystemParams::dimensionless(eta, kappa);
            let d = -p.delta_g();
            let a = SeriesEvaluator::new(&p).expect("series").eval(d).g2;
            let b = g2_integral(d, &p, &spec).expect("triple integral").g2;
            (rel(b, a), eta, kappa)
        })
        .reduce(|| (0.0, 0.0, 0.0), |x, y| if y.0 > x.0 { y } else { x });
    let elapsed = start.elapsed();
    outcome(
        worst.0 <= 1e-4 && within_budget(elapsed, 300.0),
        format!(
            "max rel dev {:.2e} (eta {:.2}, k {:.4}) on 5x5 grid in {:.2?}",
            worst.0, worst.1, worst.2, elapsed
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let (eta, kappa) = (0.5, 0.15);
    let base = SystemParams::dimensionless(eta, kappa).with_q(1e5);
    let trunc = TruncationSpec::new(4, 24);
    let drives = [0.01 * kappa, 0.02 * kappa];
    let dg = base.delta_g();
    let offsets = [-0.5 * kappa, 0.0, 0.5 * kappa, 1.0 - 0.5 * kappa, 1.0];
    let runs: Vec<_> = offsets
        .par_iter()
        .map(|&off| {
            let d = -dg + off;
            let oracle = weak_drive_extrapolation(&base.with_detuning(d), &trunc, &drives).expect("oracle run");
            (d, oracle)
        })
        .collect();
    // At T = 0 the analytic routes see no mechanical damping.
    let analytic = SystemParams::dimensionless(eta, kappa);
    let evaluator = SeriesEvaluator::new(&analytic).expect("series");
    let mut detail = String::new();
    let mut worst_s: f64 = 0.0;
    let mut g2_dev = f64::NAN;
    for (d, oracle) in &runs {
        let s = s_series(*d, &analytic, None).expect("series").value;
        let dev = rel(oracle.spectrum, s);
        worst_s = worst_s.max(dev);
        detail.push_str(&format!(" S({:+.3})={:.4}/{:.4}", d, oracle.spectrum, s));
        if *d == -dg {
            let g2 = evaluator.eval(*d).g2;
            g2_dev = rel(oracle.g2, g2);
            detail.push_str(&format!(" g2={:.5}/{:.5}", oracle.g2, g2));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        g2_dev <= 0.05 && worst_s <= 0.02 && within_budget(elapsed, 600.0),
        format!(
            "g2 rel dev {g2_dev:.3e}, max S rel dev {worst_s:.3e} (oracle/series:{detail}) in {elapsed:.2?}"
        ),
    )
}

fn blockade_magnitude() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut detail = String::new();
    for kappa in [0.05, 0.1] {
        let m = g2_min(&SystemParams::dimensionless(0.5, kappa), G2MinMode::Scan).expect("scan");
        let target = 20.0 * kappa * kappa;
        pass &= (m.g2_min / target - 1.0).abs() <= 0.3;
        detail.push_str(&format!(" k {kappa}: {:.4} vs {:.4};", m.g2_min, target));
    }
    let elapsed = start.elapsed();
    outcome(pass && within_budget(elapsed, 60.0), format!("min g2{detail} in {elapsed:.2?}"))
}

fn strong_coupling_formula() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for eta in linspace(0.2, 0.4, 5) {
        let p = SystemParams::dimensionless(eta, 0.1);
        let formula = g2_min(&p, G2MinMode::Formula).expect("formula").g2_min;
        let scan = g2_min(&p, G2MinMode::Scan).expect("scan").g2_min;
        worst = worst.max(rel(formula, scan));
        detail.push_str(&format!(" eta {eta:.2}: {formula:.4}/{scan:.4};"));
    }
    outcome(worst <= 0.1, format!("max rel dev {worst:.3} (formula/scan:{detail})"))
}

fn classical_quantum_boundary() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut detail = String::new();
    for kappa in [1.5, 2.0, 3.0, 4.0] {
        let m = g2_min(&SystemParams::dimensionless(0.5, kappa), G2MinMode::Scan).expect("scan").g2_min;
        pass &= m >= 0.9;
        detail.push_str(&format!(" k {kappa}: {m:.4};"));
    }
    for kappa in [0.05, 0.1] {
        let m = g2_min(&SystemParams::dimensionless(0.5, kappa), G2MinMode::Scan).expect("scan").g2_min;
        pass &= m <= 0.5;
        detail.push_str(&format!(" k {kappa}: {m:.4};"));
    }
    let elapsed = start.elapsed();
    outcome(pass && within_budget(elapsed, 120.0), format!("min g2{detail} in {elapsed:.2?}"))
}

fn bad_cavity() -> Outcome {
    let start = Instant::now();
    let kappa = 4.0;
    // At T = 0, 1/T_phi = sqrt(2) g0; pick g0 so that kappa T_phi = 1/2.
    let g0 = kappa * 2.0 / 2f64.sqrt();
    let p = SystemParams::new(g0, 1.0, kappa);
    let t_phi = 1.0 / gamma_dephasing(&p).1;
    let spec = QuadratureSpec::default();
    let mut worst: f64 = 0.0;
    for d in linspace(-1.5 / t_phi, 1.5 / t_phi, 13) {
        let s = s_integral(d, &p, &spec).expect("integral");
        let gauss = std::f64::consts::PI.sqrt() * kappa * t_phi * (-(d * t_phi).powi(2)).exp();
        worst = worst.max(rel(s, gauss));
    }
    let g2 = g2_bad_cavity(0.0, &p).expect("bad-cavity g2");
    let elapsed = start.elapsed();
    outcome(
        worst <= 0.1 && g2 > 1.0 && within_budget(elapsed, 30.0),
        format!(
            "kappa T_phi {:.3}: max lineshape rel dev {worst:.3}, g2(0) {g2:.4} in {elapsed:.2?}",
            kappa * t_phi
        ),
    )
}

fn oracle_exact_limits() -> Outcome {
    let mut worst_n: f64 = 0.0;
    let mut worst_g2: f64 = 0.0;
    let trunc = TruncationSpec::new(4, 4);
    for d0 in [0.0, 0.1, -0.3] {
        let kappa = 0.2;
        let drive = 0.01 * kappa;
        // Finite Q damps the decoupled phonons and makes the steady state unique.
        let p = SystemParams::dimensionless(0.0, kappa).with_q(100.0).with_detuning(d0).with_drive(drive);
        let r = steady_state(&p, &trunc, SteadyStateMethod::Nullspace).expect("steady state");
        worst_n = worst_n.max(rel(r.mean_photon, drive * drive / (kappa * kappa + d0 * d0)));
        worst_g2 = worst_g2.max((r.g2 - 1.0).abs());
    }

    let eta = 0.3;
    let trunc = TruncationSpec::new(2, 14);
    let p = SystemParams::dimensionless(eta, 0.1);
    let system = LindbladSystem::closed(&p, &trunc).expect("closed system");
    let times = linspace(0.0, 4.0 * std::f64::consts::PI, 41);
    let states = system
        .evolve(&DensityMatrix::fock(&trunc, 1, 0), &times, &EvolutionSpec::default())
        .expect("evolution");
    let worst_b = times
        .iter()
        .zip(&states)
        .map(|(t, rho)| (rho.mean_phonon() - 2.0 * eta * eta * (1.0 - t.cos())).abs())
        .fold(0.0, f64::max);
    outcome(
        worst_n <= 1e-8 && worst_g2 <= 1e-8 && worst_b <= 1e-6,
        format!("empty cavity: n rel dev {worst_n:.1e}, |g2-1| {worst_g2:.1e}; displaced phonon dev {worst_b:.1e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, fn() -> Outcome); 9] = [
        ("A1", "spectrum series vs time integral", series_vs_integral_spectrum),
        ("A2", "sideband and correlation sum rules", sum_rules),
        ("A3", "g2 series vs triple integral", series_vs_integral_g2),
        ("A4", "master-equation oracle vs series", oracle_equivalence),
        ("A5", "blockade magnitude 20 (k/w)^2", blockade_magnitude),
        ("A6", "strong-coupling minimum formula vs scan", strong_coupling_formula),
        ("A7", "classical/quantum boundary", classical_quantum_boundary),
        ("A8", "bad-cavity lineshape and bunching", bad_cavity),
        ("A9", "oracle exactly solvable limits", oracle_exact_limits),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let result = check();
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} {id} {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
