use inplane_dirac::gauge::{b_profile, phi_second_difference, quantize_positions, FieldConfig};
use inplane_dirac::ring::{s_matrix_with, ArmModel, DerivedRing, RingParams};
use inplane_dirac::spin::{make_cyl_basis, make_inplane_basis, majorana_check};
use inplane_dirac::table::{Column, ResultTable};
use inplane_dirac::zeromodes::{lattice_assemble, random_gauge_function, FluxProfile2D};
use inplane_dirac::{ChargeConjugation, Spinor2, SpinOperator, C64};
use proptest::prelude::*;

fn c64() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn spinor() -> impl Strategy<Value = Spinor2> {
    (c64(), c64()).prop_map(|(u, d)| Spinor2::new(u, d))
}

fn close(a: &SpinOperator, b: &SpinOperator) -> bool {
    a.max_abs_diff(b) < 1e-14
}

proptest! {
    #[test]
    fn inplane_frame_is_a_pauli_pair(omega in -10.0..10.0f64) {
        let (b, p) = make_inplane_basis(omega).unwrap();
        let id = SpinOperator::identity();
        prop_assert!(b.is_hermitian(1e-15) && p.is_hermitian(1e-15));
        prop_assert!(close(&(b * b), &id) && close(&(p * p), &id));
        prop_assert!(b.anticommutator(&p).max_abs_diff(&id.scale(C64::new(0.0, 0.0))) < 1e-14);
        // sigma_B sigma_perp = i sigma_z for a right-handed in-plane frame.
        prop_assert!(close(&(b * p), &SpinOperator::sigma_z().scale(C64::new(0.0, 1.0))));
    }

    #[test]
    fn cylindrical_frame_rotates_rigidly(phi in -7.0..7.0f64, omega in -7.0..7.0f64) {
        let c = make_cyl_basis(phi, omega).unwrap();
        let (b, _) = make_inplane_basis(omega).unwrap();
        let rho = c.sigma_rho;
        prop_assert!(rho.anticommutator(&c.sigma_phi).max_abs_diff(&SpinOperator::identity().scale(C64::new(0.0, 0.0))) < 1e-14);
        // sigma_rho . sigma_B = cos(phi - omega).
        let dot = (rho * b + b * rho).trace().re / 4.0;
        prop_assert!((dot - (phi - omega).cos()).abs() < 1e-14);
    }

    #[test]
    fn charge_conjugation_is_antilinear_involution(psi in spinor(), chi in spinor(), a in c64(), b in c64()) {
        let cc = ChargeConjugation::standard();
        let lhs = cc.apply(&(psi.scale(a) + chi.scale(b)));
        let rhs = cc.apply(&psi).scale(a.conj()) + cc.apply(&chi).scale(b.conj());
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-13);
        prop_assert!(cc.apply(&cc.apply(&psi)).max_abs_diff(&psi) < 1e-15);
    }

    #[test]
    fn majorana_phase_rotates_twice_against_global_phase(f in c64(), gamma in -3.0..3.0f64) {
        prop_assume!(f.norm() > 1e-3);
        let psi = Spinor2::new(f, f.conj());
        let base = majorana_check(&psi, 1e-12).unwrap();
        prop_assert!(base.is_majorana);
        let rotated = majorana_check(&psi.scale(C64::from_polar(1.0, gamma)), 1e-12).unwrap();
        prop_assert!(rotated.is_majorana);
        let expect = base.phase.unwrap() * C64::from_polar(1.0, -2.0 * gamma);
        prop_assert!((rotated.phase.unwrap() - expect).norm() < 1e-12);
    }

    #[test]
    fn phi_curvature_is_field_profile(flux in -3.0..3.0f64, l0 in 0.2..5.0f64, x in 0.05..20.0f64) {
        let cfg = FieldConfig::new(flux, l0);
        let h = 1e-3 * x;
        // phi = -i Phi g, so Im(phi'') = -Phi/x = -B.
        let d2 = phi_second_difference(&cfg, x, h).unwrap() / (h * h);
        let b = b_profile(&cfg, x).unwrap();
        prop_assert!((d2.im + b).abs() <= 1e-6 * b.abs().max(1e-3), "{} vs {}", d2.im, b);
    }

    #[test]
    fn quantized_positions_increase(flux in 0.05..5.0f64, l0 in 0.2..4.0f64) {
        let roots = quantize_positions(&FieldConfig::new(flux, l0), 6).unwrap();
        prop_assert!((roots[0].x_perp / (std::f64::consts::E * l0) - 1.0).abs() < 1e-12);
        for w in roots.windows(2) {
            prop_assert!(w[1].x_perp > w[0].x_perp);
        }
        for r in &roots {
            prop_assert!(r.residual <= 1e-9 * (r.n as f64 * std::f64::consts::PI).max(1.0));
        }
    }

    #[test]
    fn phi_t_derivative_matches_difference(rho in 0.2..3.0f64, xi in -4.0..4.0f64) {
        let d = DerivedRing::from_xi(rho, xi);
        let h = 1e-5;
        let fd = (DerivedRing::from_xi(rho, xi + h).phi_t - DerivedRing::from_xi(rho, xi - h).phi_t) / (2.0 * h);
        prop_assert!((fd - d.phi_t_derivative()).abs() < 1e-7 * (1.0 + fd.abs()));
        prop_assert!(d.phi_t >= 0.0);
    }

    #[test]
    fn table_encodings_round_trip(rows in prop::collection::vec(prop::collection::vec(any::<f64>(), 3), 1..6)) {
        let mut t = ResultTable::new(vec![
            Column::real("a", "1", "x"),
            Column::real("b, c", "m/s", "y"),
            Column::real("d", "1", "z"),
        ]);
        for r in rows {
            t.push(r).unwrap();
        }
        let same = |x: f64, y: f64| x == y || (x.is_nan() && y.is_nan());
        let csv = ResultTable::from_csv(&t.to_csv().unwrap()).unwrap();
        for (a, b) in csv.rows.iter().flatten().zip(t.rows.iter().flatten()) {
            prop_assert!(same(*a, *b), "csv {a} vs {b}");
        }
        let json = ResultTable::from_json(&t.to_json().unwrap()).unwrap();
        for (a, b) in json.rows.iter().flatten().zip(t.rows.iter().flatten()) {
            // JSON has no infinities; they come back as NaN.
            prop_assert!(same(*a, *b) || (!b.is_finite() && a.is_nan()), "json {a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ring_s_matrix_is_unitary(
        rho in 0.3..3.0f64,
        theta in -3.0..3.0f64,
        b_pl in -1.0..1.0f64,
        energy in 0.05..20.0f64,
        exact in any::<bool>(),
    ) {
        let model = if exact { ArmModel::ExactEigenstates } else { ArmModel::TiltedFrame };
        let s = s_matrix_with(&RingParams::new(rho, theta, b_pl), energy, model).unwrap();
        prop_assert!(s.unitarity_defect() < 1e-10, "defect {}", s.unitarity_defect());
        let t = s.transmissions();
        for v in t.as_array() {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lattice_spectrum_is_gauge_invariant(fq in -2.5..2.5f64, seed in any::<u64>()) {
        let l = 12;
        let op = lattice_assemble(&FluxProfile2D::gaussian(l, 1.0, fq, 1.0).unwrap(), 1.0).unwrap();
        let chi = random_gauge_function(l, 1.0, seed);
        let moved = op.gauge_transformed(&chi).unwrap();
        for p in 0..l - 1 {
            for q in 0..l - 1 {
                prop_assert!((op.plaquette_phase(p, q) - moved.plaquette_phase(p, q)).norm() < 1e-12);
            }
        }
        let sv = |m: &inplane_dirac::zeromodes::LatticeDiracOp| {
            let mut v: Vec<f64> = m.dense().singular_values().iter().cloned().collect();
            v.sort_by(f64::total_cmp);
            v
        };
        for (a, b) in sv(&op).iter().zip(sv(&moved)) {
            prop_assert!((a - b).abs() < 1e-11);
        }
    }
}
