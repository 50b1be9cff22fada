//! Acceptance criteria, one line each.
//!
//! Every criterion is checked at its stated tolerance. Failing criteria are
//! reported, not hidden; the process exits non-zero on any failure only when
//! `ACCEPTANCE_STRICT=1`, so that the rest of `cargo test` still runs.

use std::f64::consts::PI;
use std::time::Instant;

use inplane_dirac::gauge::{
    gauge_removal_integration, hall_current, quantize_positions, FieldConfig, SampledSpinorField,
};
use inplane_dirac::ring::{
    derive, filter_case_a_roots, hamiltonian_perpendicular, perpendicular_flux, s_matrix, sigma_rho_coefficient,
    transmissions_analytic, u_phase_eigenvectors, DerivedRing, RingParams,
};
use inplane_dirac::spin::{
    apply_charge_conjugation, generalized_momentum_identity, majorana_check, ChargeConjugation,
};
use inplane_dirac::zeromodes::{ac_theorem_check, FluxProfile2D, ZeroModeOptions};
use inplane_dirac::{Spinor2, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_spinor(rng: &mut ChaCha8Rng) -> Spinor2 {
    Spinor2::new(
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
    )
}

fn criterion_1() -> Outcome {
    let fluxes = [0.5, 1.5, 2.5, 3.5];
    let expected = [0usize, 1, 2, 3];
    let opts = ZeroModeOptions::default();
    let mut counts = [[0usize; 4]; 2];
    let mut gaps = [f64::NAN; 4];
    let mut slowest: f64 = 0.0;
    for (li, l) in [48usize, 64].into_iter().enumerate() {
        for (k, &fq) in fluxes.iter().enumerate() {
            let t = Instant::now();
            let f = FluxProfile2D::gaussian(l, 1.0, fq, 1.0).expect("flux profile");
            let rep = ac_theorem_check(&f, &opts).expect("zero-mode count");
            slowest = slowest.max(t.elapsed().as_secs_f64());
            counts[li][k] = rep.observed_n;
            if l == 64 {
                gaps[k] = rep.gap_ratio;
            }
        }
    }
    let counts_ok = counts[1] == expected;
    let agree = counts[0] == counts[1];
    let gap_ok = gaps.iter().zip(&expected).all(|(g, &n)| n == 0 || *g >= 1e3);
    let time_ok = slowest < 60.0;
    outcome(
        counts_ok && agree && gap_ok && time_ok,
        format!(
            "L=64 counts {:?} (want {:?}), L=48 counts {:?}, gap ratios {:?} (want >= 1e3), slowest case {:.1}s",
            counts[1],
            expected,
            counts[0],
            gaps.iter().map(|g| format!("{g:.2}")).collect::<Vec<_>>(),
            slowest
        ),
    )
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let mut orders = Vec::new();
    let mut constants = Vec::new();
    // Constant spinor with flux, and an entire function without flux.
    let cases: [(f64, f64, bool); 2] = [(1.0, 0.3, false), (0.0, 0.9, true)];
    for (flux, omega, holomorphic) in cases {
        let cfg = FieldConfig { omega, ..FieldConfig::new(flux, 1.0) };
        let mk = |n: usize| {
            let h = 1.0 / (n - 1) as f64;
            SampledSpinorField::from_fn((0.0, h, n), (0.5, h, n), |b, p| {
                if holomorphic {
                    Spinor2::new(C64::new(b, p).exp(), C64::new(0.0, 0.0))
                } else {
                    Spinor2::real(1.0, 0.0)
                }
            })
            .expect("grid")
        };
        let (n1, n2) = (33, 65);
        let r1 = gauge_removal_integration(&cfg, &mk(n1), 1).expect("removal").core_residual;
        let r2 = gauge_removal_integration(&cfg, &mk(n2), 1).expect("removal").core_residual;
        let h2 = 1.0 / (n2 - 1) as f64;
        orders.push((r1 / r2).log2());
        constants.push(r2 / (h2 * h2));
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = orders.iter().all(|o| (1.9..=2.1).contains(o)) && secs < 10.0;
    outcome(
        pass,
        format!(
            "orders {:?} (want [1.9, 2.1]), residual/h^2 {:?}, runtime {:.2}s",
            orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>(),
            constants.iter().map(|c| format!("{c:.3e}")).collect::<Vec<_>>(),
            secs
        ),
    )
}

fn criterion_3() -> Outcome {
    let p = RingParams::new(1.0, 1.0, 0.25);
    let d = derive(&p).expect("derive");
    let mut t = Vec::new();
    for i in 0..50 {
        let e = 0.05 + 0.37 * i as f64;
        let s = s_matrix(&p, e).expect("S-matrix");
        t.push(s.transmissions());
    }
    let spread = |f: &dyn Fn(&inplane_dirac::ring::TransmissionSet) -> f64| {
        let v: Vec<f64> = t.iter().map(f).collect();
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let spreads = [spread(&|x| x.t_uu), spread(&|x| x.t_ud), spread(&|x| x.t_du), spread(&|x| x.t_dd)];
    let worst = spreads.iter().cloned().fold(0.0, f64::max);
    outcome(
        d.xi == 0.0 && d.phi_t == 0.0 && worst <= 1e-10,
        format!("xi = {}, phi_T = {}, transmission spread over 50 energies {:.3e} (want <= 1e-10)", d.xi, d.phi_t, worst),
    )
}

fn criterion_4() -> Outcome {
    let roots = filter_case_a_roots(1.0, 3).expect("roots");
    let mut worst_an: f64 = 0.0;
    let mut worst_s: f64 = 0.0;
    for r in &roots {
        let p = RingParams::new(1.0, r.xi, 0.0);
        let d = derive(&p).expect("derive");
        worst_an = worst_an.max(transmissions_analytic(&d).as_array().into_iter().fold(0.0, f64::max));
        for e in [0.3, 1.1, 2.9, 6.4, 13.0] {
            let t = s_matrix(&p, e).expect("S-matrix").transmissions();
            worst_s = worst_s.max(t.as_array().into_iter().fold(0.0, f64::max));
        }
    }
    let dev = roots[0].approx_deviation;
    outcome(
        worst_an <= 1e-20 && worst_s <= 1e-10,
        format!(
            "max analytic T {worst_an:.2e} (want <= 1e-20), max S-matrix T {worst_s:.2e} (want <= 1e-10); small-radius approximation sqrt(3/2) gives phi_T deviation {dev:.4} at n=0"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut unitarity: f64 = 0.0;
    let mut ratios = [Vec::new(), Vec::new()];
    for _ in 0..100 {
        let xi = rng.gen_range(-3.0..3.0);
        let e = rng.gen_range(0.05..20.0);
        let p = RingParams::new(1.0, xi, 0.0);
        let s = s_matrix(&p, e).expect("S-matrix");
        unitarity = unitarity.max(s.unitarity_defect());
        let an = transmissions_analytic(&derive(&p).expect("derive"));
        let t = s.transmissions();
        ratios[0].push(t.t_uu / an.t_uu);
        ratios[1].push(t.t_dd / an.t_dd);
    }
    let spread = ratios
        .iter()
        .map(|r| r.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - r.iter().cloned().fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    outcome(
        unitarity <= 1e-10 && spread <= 1e-8,
        format!("max |S^H S - I| {unitarity:.2e} (want <= 1e-10), spread of T/|1+e^(2 pi i phi_T)|^2 ratio {spread:.3e} (want <= 1e-8)"),
    )
}

fn criterion_6() -> Outcome {
    let cfg = FieldConfig::new(1.0, 1.0);
    let roots = quantize_positions(&cfg, 50).expect("roots");
    let f = |x: f64, n: u32| x * (x.ln() - 1.0) - n as f64 * PI;
    let mut agree: f64 = 0.0;
    let mut resid: f64 = 0.0;
    for r in &roots {
        // Independent bracket on the branch x >= e.
        let (mut a, mut b) = (std::f64::consts::E, std::f64::consts::E);
        while f(b, r.n) < 0.0 {
            b *= 2.0;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if f(m, r.n) < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        let oracle = if f(a, r.n).abs() <= f(b, r.n).abs() { a } else { b };
        agree = agree.max((oracle - r.x_perp).abs());
        resid = resid.max(r.residual);
    }
    let x = 3.7;
    let k1 = hall_current(1, x).expect("current");
    let hall: f64 = (1..=50).map(|n| (hall_current(n, x).expect("current") / k1 - n as f64).abs()).fold(0.0, f64::max);
    outcome(
        agree <= 1e-12 && resid <= 1e-12 && hall <= 1e-13,
        format!("Lambert vs bisection {agree:.2e}, max residual {resid:.2e} (want <= 1e-12), max |K(N)/K(1) - N| {hall:.1e} for N <= 50"),
    )
}

fn criterion_7() -> Outcome {
    let mut limit: f64 = 0.0;
    for k in 12..=16 {
        let xi = 10f64.powi(-k);
        for sgn in [1.0, -1.0] {
            let c = u_phase_eigenvectors(&DerivedRing::from_xi(1.0, sgn * xi));
            limit = limit
                .max(c.plus.max_abs_diff(&Spinor2::real(1.0, 0.0)))
                .max(c.minus.max_abs_diff(&Spinor2::real(0.0, -1.0)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut ratio: f64 = 0.0;
    for _ in 0..100 {
        let d = DerivedRing::from_xi(1.0, rng.gen_range(-10.0..10.0));
        let c = u_phase_eigenvectors(&d);
        ratio = ratio.max(((c.plus.down / c.plus.up).re - (d.beta / 2.0).tan()).abs());
    }
    outcome(
        limit <= 1e-12 && ratio <= 1e-13,
        format!("component error for xi <= 1e-12: {limit:.2e} (want <= 1e-12), half-angle identity {ratio:.2e} (want <= 1e-13)"),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let cc = ChargeConjugation::standard();
    let mut doublets_ok = true;
    for _ in 0..1000 {
        let f = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let m = majorana_check(&Spinor2::new(f, f.conj()), 1e-14).expect("check");
        doublets_ok &= m.is_majorana && m.phase.map_or(false, |c| (c - 1.0).norm() <= 1e-14);
    }
    let mut anti: f64 = 0.0;
    let mut invol: f64 = 0.0;
    for _ in 0..1000 {
        let psi = random_spinor(&mut rng);
        let a = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let lhs = apply_charge_conjugation(&cc, &psi.scale(a));
        let rhs = apply_charge_conjugation(&cc, &psi).scale(a.conj());
        anti = anti.max(lhs.max_abs_diff(&rhs));
        invol = invol.max(apply_charge_conjugation(&cc, &apply_charge_conjugation(&cc, &psi)).max_abs_diff(&psi));
    }
    let mut ident: f64 = 0.0;
    for _ in 0..100 {
        let r = generalized_momentum_identity(rng.gen_range(-5.0..5.0), rng.gen_range(-PI..PI)).expect("identity");
        ident = ident.max(r);
    }
    outcome(
        doublets_ok && anti <= 1e-14 && invol <= 1e-14 && ident <= 1e-13,
        format!("doublets c=1: {doublets_ok}, antilinearity {anti:.1e}, involution {invol:.1e}, momentum identity {ident:.1e}"),
    )
}

fn criterion_9() -> Outcome {
    let base = RingParams::new(1.0, 1.0, 0.0);
    let eps = base.energy_scale();
    let coeffs: Vec<f64> = (0..41)
        .map(|j| {
            let b_z = -2.0 + 0.1 * j as f64;
            let h = hamiltonian_perpendicular(&base, b_z, 32).expect("hamiltonian");
            sigma_rho_coefficient(&h, eps, perpendicular_flux(&base, b_z)).expect("coefficient")
        })
        .collect();
    let mean = coeffs.iter().sum::<f64>() / coeffs.len() as f64;
    let variance = coeffs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / coeffs.len() as f64;
    let centre = base.theta / (4.0 * base.charge);
    let min_xi = (-10..=10)
        .map(|j| {
            let p = RingParams { b_pl: centre + 0.01 * j as f64, ..base };
            derive(&p).expect("derive").xi.abs()
        })
        .fold(f64::INFINITY, f64::min);
    outcome(
        min_xi == 0.0 && variance == 0.0,
        format!("min |xi| over B_pl sweep {min_xi:e}, sigma_rho coefficient {mean} with variance {variance:e} over B_z sweep"),
    )
}

fn main() {
    let started = Instant::now();
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("zero-mode count", criterion_1),
        ("gauge removal convergence", criterion_2),
        ("case-b constant transmission", criterion_3),
        ("case-a destructive filter", criterion_4),
        ("S-matrix health", criterion_5),
        ("quantization roots", criterion_6),
        ("eigenvector limit", criterion_7),
        ("Majorana machinery", criterion_8),
        ("screening contrast", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {} [{}]: {} | {}", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!(
        "acceptance: {} passed, {} failed, {:.1}s",
        criteria.len() - failed,
        failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").map_or(false, |v| v == "1") {
        std::process::exit(1);
    }
}
