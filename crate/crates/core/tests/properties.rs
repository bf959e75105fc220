use cbf_servo::numerics::{care_solve, Matrix};
use cbf_servo::servo::saturate;
use cbf_servo::{kkt_residual, oracle_solve, ConstraintMaps, MultiplierMode, QpInstance};
use proptest::prelude::*;

fn well_conditioned(m: usize) -> impl Strategy<Value = Matrix> {
    (proptest::collection::vec(-1.0..1.0_f64, m * m), proptest::collection::vec(any::<bool>(), m)).prop_map(
        move |(data, signs)| {
            let mut a = Matrix::new(m, m, data).unwrap();
            for (i, s) in signs.iter().enumerate() {
                a[(i, i)] += if *s { 2.5 } else { -2.5 };
            }
            a
        },
    )
}

fn maps(m: usize) -> impl Strategy<Value = ConstraintMaps> {
    (well_conditioned(m), well_conditioned(m), well_conditioned(m), 0.2..5.0_f64, 0.2..5.0_f64)
        .prop_map(|(gv, gw, hw, rv, rw)| ConstraintMaps::new(gv, gw, hw, rv, rw).unwrap())
}

/// Offsets shaped like the controller's: `Δ₁ = s + a`, `Δ₂ = −s + b` with
/// `a, b ≤ 0`, so the two opposite rows of each pair leave a nonempty slab.
fn paired(m: usize) -> impl Strategy<Value = Vec<f64>> {
    (
        proptest::collection::vec(-3.0..3.0_f64, m),
        proptest::collection::vec(-3.0..0.0_f64, 2 * m),
    )
        .prop_map(move |(s, ab)| {
            let mut d: Vec<f64> = s.iter().zip(&ab[..m]).map(|(s, a)| s + a).collect();
            d.extend(s.iter().zip(&ab[m..]).map(|(s, b)| -s + b));
            d
        })
}

fn case() -> impl Strategy<Value = (ConstraintMaps, Vec<f64>, Vec<f64>)> {
    (1usize..=3).prop_flat_map(|m| (maps(m), paired(m), paired(m)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn inactive_offsets_give_no_augmentation((maps, dg, dh) in case()) {
        let neg = |d: &[f64]| d.iter().map(|x| -x.abs()).collect::<Vec<_>>();
        let (dg, dh) = (neg(&dg), neg(&dh));
        for mode in [MultiplierMode::Scaled, MultiplierMode::Exact] {
            let (v, w, _) = maps.solve(&dg, &dh, mode);
            prop_assert!(v.iter().chain(&w).all(|&x| x == 0.0));
        }
        // Full mode: non-positive R⁻¹Δ for the G blocks (R_λλ is a multiple of I).
        let (v, _, mult) = maps.solve(&dg, &vec![-1e3; dh.len()], MultiplierMode::Full);
        prop_assert!(mult.lambda().iter().all(|&x| x == 0.0));
        prop_assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn multipliers_are_nonnegative((maps, dg, dh) in case()) {
        for mode in [MultiplierMode::Full, MultiplierMode::Scaled, MultiplierMode::Exact] {
            let mult = maps.solve_multipliers(&dg, &dh, mode);
            prop_assert!(mult.lambda().iter().chain(mult.gamma().iter()).all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn exact_mode_is_the_qp_optimum((maps, dg, dh) in case()) {
        let inst = QpInstance::from_maps(&maps, &dg, &dh);
        let sol = oracle_solve(&inst).unwrap();
        let (v, w, mult) = maps.solve(&dg, &dh, MultiplierMode::Exact);
        let scale = 1.0 + sol.v.iter().chain(&sol.w).fold(0.0_f64, |a, x| a.max(x.abs()));
        for (a, b) in v.iter().chain(&w).zip(sol.v.iter().chain(&sol.w)) {
            prop_assert!((a - b).abs() <= 1e-8 * scale);
        }
        prop_assert!(kkt_residual(&inst, &v, &w, &mult.lambda(), &mult.gamma()) <= 1e-7 * scale);
    }

    #[test]
    fn oracle_objective_is_minimal_among_closed_forms((maps, dg, dh) in case()) {
        let inst = QpInstance::from_maps(&maps, &dg, &dh);
        let sol = oracle_solve(&inst).unwrap();
        let tol = 1e-9 * (1.0 + dg.iter().chain(&dh).fold(0.0_f64, |a, x| a.max(x.abs())));
        prop_assert!(inst.constraint_values(&sol.v, &sol.w).iter().all(|&c| c <= tol));
        for mode in [MultiplierMode::Full, MultiplierMode::Scaled] {
            let (v, w, _) = maps.solve(&dg, &dh, mode);
            if inst.constraint_values(&v, &w).iter().all(|&c| c <= tol) {
                prop_assert!(inst.objective(&sol.v, &sol.w) <= inst.objective(&v, &w) + 1e-9);
            }
        }
    }

    #[test]
    fn saturation_stays_in_the_box(u in proptest::collection::vec(-10.0..10.0_f64, 3), half in proptest::collection::vec(0.1..5.0_f64, 3)) {
        let lo: Vec<f64> = half.iter().map(|h| -h).collect();
        let s = saturate(&u, &lo, &half).unwrap();
        for i in 0..3 {
            prop_assert!(s[i] >= lo[i] && s[i] <= half[i]);
            if u[i].abs() <= half[i] {
                prop_assert_eq!(s[i], u[i]);
            }
        }
        prop_assert_eq!(saturate(&s, &lo, &half).unwrap(), s);
    }

    #[test]
    fn scalar_care_matches_closed_form(a in -3.0..3.0_f64, b in 0.2..3.0_f64, q in 0.1..5.0_f64, r in 0.1..5.0_f64) {
        let s = |x: f64| Matrix::from_rows(&[[x]]).unwrap();
        let p = care_solve(&s(a), &s(b), &s(q), &s(r)).unwrap()[(0, 0)];
        let expected = r * (a + (a * a + b * b * q / r).sqrt()) / (b * b);
        prop_assert!((p - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
    }
}
