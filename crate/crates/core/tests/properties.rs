use nalgebra::DMatrix;
use proptest::prelude::*;

use qes_core::closed_form::{self, RootSign};
use qes_core::linalg::hessenberg_eigenvalues;
use qes_core::model::{build_matrix, potential_eval};
use qes_core::oracle::{self, GridSpec, ParityLabel};
use qes_core::solve::{self, NewtonSettings, ScanSettings};
use qes_core::{wavefield, ExponentParams, Parity, PotentialCoeffs, QesProblem, QesSolution};

// Polynomials as ascending coefficient vectors.

fn mul(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len() + y.len() - 1];
    for (i, a) in x.iter().enumerate() {
        for (j, b) in y.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len().max(y.len())];
    for (i, a) in x.iter().enumerate() {
        out[i] += a;
    }
    for (i, b) in y.iter().enumerate() {
        out[i] += b;
    }
    out
}

fn scale(x: &[f64], c: f64) -> Vec<f64> {
    x.iter().map(|v| v * c).collect()
}

fn deriv(x: &[f64]) -> Vec<f64> {
    if x.len() < 2 {
        return vec![0.0];
    }
    x.iter().enumerate().skip(1).map(|(i, v)| i as f64 * v).collect()
}

/// Coefficients of `-P'' - 2 P' W' + (V - W'^2 - W'' - E) P` on the left
/// branch, built straight from the Schrodinger equation, with the size of
/// the largest contributing term for each power.
fn schrodinger_series(coeffs: &PotentialCoeffs, params: ExponentParams, energy: f64, v: &[f64]) -> (Vec<f64>, f64) {
    let w1 = [params.b, 2.0 * params.a, 1.0];
    let w2 = [2.0 * params.a, 2.0];
    let pot = [0.0, coeffs.q, coeffs.r, coeffs.s, 1.0];
    let effective = add(&add(&pot, &scale(&mul(&w1, &w1), -1.0)), &scale(&w2, -1.0));
    let effective = add(&effective, &[-energy]);
    let dp = deriv(v);
    let terms = [
        scale(&deriv(&dp), -1.0),
        scale(&mul(&dp, &w1), -2.0),
        mul(&effective, v),
    ];
    let mut total = vec![0.0];
    let mut size = 0.0f64;
    for t in &terms {
        size = size.max(t.iter().fold(0.0, |m, x| m.max(x.abs())));
        total = add(&total, t);
    }
    (total, size.max(1.0))
}

fn nalgebra_real_parts(m: Vec<Vec<f64>>) -> Vec<(f64, f64)> {
    let n = m.len();
    let dense = DMatrix::from_fn(n, n, |i, j| m[i][j]);
    let mut out: Vec<(f64, f64)> = dense.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
    out.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    out
}

fn parity_strategy() -> impl Strategy<Value = Parity> {
    prop_oneof![Just(Parity::Even), Just(Parity::Odd)]
}

fn nonzero_b() -> impl Strategy<Value = f64> {
    prop_oneof![-1.5f64..-0.3, 0.3f64..1.5]
}

fn check_found_state(sol: &QesSolution) -> Result<(), TestCaseError> {
    let b = sol.params.b;
    match sol.parity() {
        Parity::Even => prop_assert_eq!(sol.v[1] + b * sol.v[0], 0.0),
        Parity::Odd => prop_assert_eq!(sol.v[0], 0.0),
    }
    let (series, size) = schrodinger_series(&sol.coeffs, sol.params, sol.energy, &sol.v);
    for (k, c) in series.iter().enumerate() {
        prop_assert!(c.abs() <= 1e-9 * size, "power {} leaves {:e} (size {:e})", k, c, size);
    }
    let gap = solve::eigen_crosscheck(sol).unwrap().distance;
    prop_assert!(gap <= 1e-9 * (1.0 + sol.p.abs()), "eigen gap {:e}", gap);
    let residual = oracle::residual_check(sol, &oracle::uniform_points(6.0, 200)).unwrap();
    prop_assert!(residual <= 1e-8, "residual {:e}", residual);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn couplings_cancel_the_high_powers(a in -3.0f64..3.0, b in -3.0f64..3.0, n in 0usize..8) {
        let c = PotentialCoeffs::from_exponent(ExponentParams::new(a, b), n);
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE);
        prop_assert!(rel(c.s, 4.0 * a) <= 1e-14);
        prop_assert!(rel(c.r, 4.0 * a * a + 2.0 * b) <= 1e-14);
        prop_assert!(rel(c.q, 4.0 * a * b + 2.0 * n as f64 + 2.0) <= 1e-14);
        let (big_a, big_b, big_c) = c.abstract_form();
        prop_assert_eq!((big_a, big_b, big_c), (-c.q, c.r, -c.s));
        prop_assert_eq!(PotentialCoeffs::from_abstract(big_a, big_b, big_c), c);

        // V - W'^2 - W'' must reduce to 2N x - b^2 - 2a
        let w1 = [b, 2.0 * a, 1.0];
        let pot = [0.0, c.q, c.r, c.s, 1.0];
        let rest = add(&add(&pot, &scale(&mul(&w1, &w1), -1.0)), &[-2.0 * a, -2.0]);
        let size = 1.0 + 16.0 * a.abs().powi(2) + 4.0 * b.abs() + c.q.abs();
        prop_assert!((rest[0] + b * b + 2.0 * a).abs() <= 1e-13 * size);
        prop_assert!((rest[1] - 2.0 * n as f64).abs() <= 1e-13 * size);
        for k in 2..5 {
            prop_assert!(rest[k].abs() <= 1e-13 * size, "x^{} keeps {:e}", k, rest[k]);
        }
    }

    #[test]
    fn potential_is_mirror_exact(q in -20.0f64..20.0, r in -20.0f64..20.0, s in -10.0f64..10.0, x in -10.0f64..10.0) {
        let c = PotentialCoeffs::new(q, r, s);
        prop_assert_eq!(potential_eval(&c, x).to_bits(), potential_eval(&c, -x).to_bits());
        if x < 0.0 {
            prop_assert_eq!(potential_eval(&c, x), c.left_branch(x));
        }
    }

    #[test]
    fn wave_function_has_exact_parity(x in 0.0f64..6.0, b in prop_oneof![Just(1.0), Just(-1.0)]) {
        let sol = closed_form::solution_n2(b, RootSign::Plus, RootSign::Plus).unwrap();
        prop_assert_eq!(wavefield::psi_eval(&sol, x).to_bits(), wavefield::psi_eval(&sol, -x).to_bits());
    }

    #[test]
    fn recurrence_solves_the_low_powers(
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        p in -15.0f64..15.0,
        n in 1usize..7,
        parity in parity_strategy(),
    ) {
        let params = ExponentParams::new(a, b);
        let rec = solve::propagate_coefficients(params, p, n, parity).unwrap();
        match parity {
            Parity::Even => prop_assert_eq!(rec.v[1] + b * rec.v[0], 0.0),
            Parity::Odd => prop_assert_eq!(rec.v[0], 0.0),
        }
        let coeffs = PotentialCoeffs::from_exponent(params, n);
        let (series, size) = schrodinger_series(&coeffs, params, -p, &rec.v);
        let tol = 1e-11 * size;
        for k in 0..n.saturating_sub(1) {
            prop_assert!(series[k].abs() <= tol, "power {} leaves {:e}", k, series[k]);
        }
        prop_assert!((series[n - 1] + rec.residual_1).abs() <= tol);
        prop_assert!((series[n] + rec.residual_2).abs() <= tol);
        for k in n + 1..series.len() {
            prop_assert!(series[k].abs() <= tol);
        }
    }

    #[test]
    fn matrix_spectrum_matches_nalgebra(a in -2.0f64..2.0, b in -2.0f64..2.0, n in 0usize..8) {
        let m = build_matrix(ExponentParams::new(a, b), n);
        let mut ours: Vec<(f64, f64)> = hessenberg_eigenvalues(m.to_dense()).unwrap().iter().map(|e| (e.re, e.im)).collect();
        ours.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        let theirs = nalgebra_real_parts(m.to_dense());
        prop_assert_eq!(ours.len(), theirs.len());
        // match each eigenvalue to its nearest counterpart
        for z in &ours {
            let d = theirs.iter().map(|w| (z.0 - w.0).hypot(z.1 - w.1)).fold(f64::INFINITY, f64::min);
            prop_assert!(d <= 1e-7 * (1.0 + z.0.hypot(z.1)), "{:?} has no partner, nearest {:e}", z, d);
        }
    }

    #[test]
    fn root_pairs_obey_vieta(a in -2.0f64..2.0, b in nonzero_b()) {
        prop_assume!(closed_form::v_discriminant(a, b) >= 0.0);
        let vp = closed_form::v_pm(a, b, RootSign::Plus).unwrap();
        let vm = closed_form::v_pm(a, b, RootSign::Minus).unwrap();
        let size = 1.0 + vp.abs().max(vm.abs());
        prop_assert!((vp * vm - b / 2.0).abs() <= 1e-12 * size * size);
        prop_assert!((vp + vm - (1.0 - a * b) / b).abs() <= 1e-12 * size / b.abs().min(1.0));
        for v in [vp, vm] {
            let quad = 4.0 * b * v * v + 4.0 * (a * b - 1.0) * v + 2.0 * b * b;
            prop_assert!(quad.abs() <= 1e-11 * size * size * (1.0 + a.abs()));
        }
    }

    #[test]
    fn exponent_roots_obey_vieta(b in prop_oneof![-3.0f64..-0.2, 0.2f64..1.15, 2.2f64..3.0]) {
        let ap = closed_form::a_pm(b, RootSign::Plus).unwrap();
        let am = closed_form::a_pm(b, RootSign::Minus).unwrap();
        let sum = -(7.0 * b.powi(3) + 8.0) / (10.0 * b);
        let product = (b.powi(5) + 5.5 * b * b - 2.0 / b) / (10.0 * b);
        prop_assert!((ap + am - sum).abs() <= 1e-12 * (1.0 + sum.abs()));
        prop_assert!((ap * am - product).abs() <= 1e-11 * (1.0 + product.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn found_states_satisfy_every_invariant(n in 2usize..5, parity in parity_strategy(), b in nonzero_b()) {
        let problem = QesProblem::new(n, parity, b);
        let found = solve::find_solutions(&problem, &ScanSettings::for_problem(&problem), &NewtonSettings::default()).unwrap_or_default();
        for sol in &found {
            check_found_state(sol)?;
            prop_assert_eq!(sol.problem.branch, solve::eigen_crosscheck(sol).unwrap().branch);
        }
        for w in found.windows(2) {
            prop_assert!(w[0].energy <= w[1].energy);
        }
    }

    #[test]
    fn grid_spectrum_obeys_sturm_and_alternation(q in -4.0f64..4.0, r in 0.0f64..4.0, s in -1.5f64..1.5) {
        let c = PotentialCoeffs::new(q, r, s);
        let spec = GridSpec::new(5.0, 0.05).unwrap();
        let k = 6;
        let spectrum = oracle::grid_spectrum(&c, &spec, k).unwrap();
        for j in 0..k {
            prop_assert_eq!(spectrum.nodes[j], j);
            let want = if j % 2 == 0 { Parity::Even } else { Parity::Odd };
            prop_assert_eq!(spectrum.parities[j], ParityLabel::Definite(want));
        }

        // dense symmetric eigen-solve of the same grid as an independent check
        let m = 2 * spec.half_intervals() - 1;
        let inv_h2 = 1.0 / (spec.step * spec.step);
        let dense = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                2.0 * inv_h2 + potential_eval(&c, -spec.half_width + (i + 1) as f64 * spec.step)
            } else if i.abs_diff(j) == 1 {
                -inv_h2
            } else {
                0.0
            }
        });
        let mut reference: Vec<f64> = dense.symmetric_eigenvalues().iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for j in 0..k {
            let e = spectrum.eigenvalues[j];
            prop_assert!((e - reference[j]).abs() <= 1e-9 * (1.0 + e.abs()), "level {}: {} vs {}", j, e, reference[j]);
        }
    }
}
