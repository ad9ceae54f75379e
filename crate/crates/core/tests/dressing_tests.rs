use approx::assert_abs_diff_eq;
use lindstedt_core::dressing::{
    approximant_h, reexpand_in_eps, self_energy_value_two_node, Dressing, DressingError,
};
use lindstedt_core::fourier::{golden_pendulum, Mode, SystemSpec, Tensor, TrigPoly};
use lindstedt_core::freq::{build_scale_sequence, golden_frequency, ScaleSequence};
use lindstedt_core::recursion::{loglog_slope, solve_up_to};
use lindstedt_core::trees::Scheme;
use num::complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn seq_p12() -> &'static ScaleSequence {
    static SEQ: std::sync::OnceLock<ScaleSequence> = std::sync::OnceLock::new();
    SEQ.get_or_init(|| build_scale_sequence(&golden_frequency(), 12, 3).unwrap())
}

#[test]
fn truncation_below_two_rejected() {
    let sys = golden_pendulum();
    let seq = seq_p12();
    match Dressing::new(&sys, seq, 1) {
        Err(DressingError::TruncationExceeded(1)) => {}
        Err(other) => panic!("expected TruncationExceeded, got {other:?}"),
        Ok(_) => panic!("expected TruncationExceeded, got Ok"),
    }
}

#[test]
fn m_le_zero_is_eta2_m0() {
    let sys = golden_pendulum();
    let seq = seq_p12();
    let dr = Dressing::new(&sys, seq, 3).unwrap();
    let x = sys.freq.small_divisor([1, 0]);
    let eta = 0.07;
    let m = dr.build_m_le(0, &x, eta);
    let m0 = sys.m0_full();
    for i in 0..sys.dim() {
        for j in 0..sys.dim() {
            assert_abs_diff_eq!(m[(i, j)].re, eta * eta * m0[(i, j)], epsilon = 1e-15);
            assert_abs_diff_eq!(m[(i, j)].im, 0.0, epsilon = 1e-18);
        }
    }
}

#[test]
fn g0_closed_form_and_alpha_block() {
    let sys = golden_pendulum();
    let seq = seq_p12();
    let dr = Dressing::new(&sys, seq, 3).unwrap();
    let x = sys.freq.small_divisor([1, 0]); // scale 0
    let eta = 0.08;
    let g = dr.dressed_propagator(Scheme::A, &x, eta).unwrap();
    let e2 = eta * eta;
    // alpha block: exactly eta^2/x^2 * I2
    assert_abs_diff_eq!(g[(0, 0)].re, e2 / 1.0, epsilon = 1e-18);
    assert_abs_diff_eq!(g[(1, 1)].re, e2 / 1.0, epsilon = 1e-18);
    assert_eq!(g[(0, 1)], c(0.0, 0.0));
    assert_eq!(g[(0, 2)], c(0.0, 0.0));
    // beta block: eta^2/(x^2 + eta^2 M0) with x = 1, M0 = 1
    assert_abs_diff_eq!(g[(2, 2)].re, e2 / (1.0 + e2), epsilon = 1e-15);
    // eta -> 0 limit like eta^2/x^2
    let g_small = dr.dressed_propagator(Scheme::A, &x, 1e-6).unwrap();
    assert_abs_diff_eq!(g_small[(2, 2)].re / 1e-12, 1.0, epsilon = 1e-9);
}

#[test]
fn self_energy_grading_matches_eta4() {
    let sys = golden_pendulum();
    let seq = seq_p12();
    let dr = Dressing::new(&sys, seq, 3).unwrap();
    // entering divisor at a deep Fibonacci mode: x = omega.(3,-5) (scale >= 1)
    let x = sys.freq.small_divisor([3, -5]);
    let n = lindstedt_core::freq::scale_of(&x, false, seq).unwrap();
    assert!(n >= 1, "sample divisor must be below gamma_0");
    let etas = [0.1, 0.05, 0.025];
    let norms: Vec<f64> = etas
        .iter()
        .map(|&eta| {
            let m = dr.build_m_le(n, &x, eta);
            let m0 = sys.m0_full();
            let mut diff: f64 = 0.0;
            for i in 0..sys.dim() {
                for j in 0..sys.dim() {
                    let v = m[(i, j)] - c(eta * eta * m0[(i, j)], 0.0);
                    diff = diff.max(v.norm());
                }
            }
            diff
        })
        .collect();
    let slope = loglog_slope(&etas, &norms);
    assert!(slope >= 3.9, "M - eta^2 M0 must vanish at least like eta^4, slope {slope:.3}");
}

#[test]
fn minimal_two_node_self_energy_value() {
    let sys = golden_pendulum();
    let seq = seq_p12();
    let dr = Dressing::new(&sys, seq, 3).unwrap();
    let x = sys.freq.small_divisor([3, -5]);
    // V for the sandwich with modes (1,0), (-1,0): eta^4 leading order
    let etas = [0.1, 0.05, 0.025];
    let vals: Vec<f64> = etas
        .iter()
        .map(|&eta| {
            let v = self_energy_value_two_node(&dr, [[1, 0], [-1, 0]], &x, eta).unwrap();
            v.iter().map(|e| e.norm()).fold(0.0, f64::max)
        })
        .collect();
    let slope = loglog_slope(&etas, &vals);
    assert!((slope - 4.0).abs() < 0.1, "two-node value must be eta^4 at leading order: {slope}");

    // reflection family: summing the value over swapped node labels gives a
    // symmetric matrix (real couplings)
    let eta = 0.05;
    let a = self_energy_value_two_node(&dr, [[1, 0], [-1, 0]], &x, eta).unwrap();
    let b = self_energy_value_two_node(&dr, [[-1, 0], [1, 0]], &x, eta).unwrap();
    let sum = &a + &b;
    for i in 0..sys.dim() {
        for j in 0..sys.dim() {
            assert!(
                (sum[(i, j)] - sum[(j, i)]).norm() <= 1e-12 * (1.0 + sum[(i, j)].norm()),
                "symmetry defect at ({i},{j})"
            );
        }
    }
}

#[test]
fn m_le_hermitian_for_real_eta() {
    let sys = golden_pendulum();
    let seq = seq_p12();
    let dr = Dressing::new(&sys, seq, 3).unwrap();
    let x = sys.freq.small_divisor([3, -5]);
    let n = lindstedt_core::freq::scale_of(&x, false, seq).unwrap();
    let m = dr.build_m_le(n, &x, 0.06);
    for i in 0..sys.dim() {
        for j in 0..sys.dim() {
            let defect = (m[(i, j)] - m[(j, i)].conj()).norm();
            assert!(defect < 1e-12, "hermitian defect {defect:.2e} at ({i},{j})");
        }
    }
}

#[test]
fn scheme_b_freezes_at_scale() {
    let sys = golden_pendulum();
    let seq = seq_p12();
    let dr = Dressing::new(&sys, seq, 3).unwrap();
    let x = sys.freq.small_divisor([3, -5]);
    let n = lindstedt_core::freq::scale_of(&x, false, seq).unwrap();
    let eta = 0.05;
    let m_n = dr.build_m_b(n, &x, eta);
    for k in n..=(n + 3) {
        let m_k = dr.build_m_b(k, &x, eta);
        for i in 0..sys.dim() {
            for j in 0..sys.dim() {
                assert_eq!(m_k[(i, j)], m_n[(i, j)], "flow must freeze at k = n");
            }
        }
    }
    let (_fixed, stop) = dr.build_m_b_fixed(&x, eta);
    assert!(stop <= n, "fixed point reached no later than the scale of x");
}

#[test]
fn propagator_positive_definite_symmetric_part() {
    let sys = golden_pendulum();
    let seq = seq_p12();
    let dr = Dressing::new(&sys, seq, 3).unwrap();
    for nu in [[1i64, 0i64], [0, 1], [2, -3], [3, -5], [5, -8]] {
        let x = sys.freq.small_divisor(nu);
        let n = lindstedt_core::freq::scale_of(&x, false, seq).unwrap();
        for eta in [0.02, 0.05, 0.1] {
            let m = dr.build_m_le(n, &x, eta);
            let xf = x.to_f64();
            let d = sys.dim();
            let mut a = nalgebra::DMatrix::<f64>::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    a[(i, j)] = (m[(i, j)].re + m[(j, i)].re) / 2.0;
                }
                a[(i, i)] += xf * xf;
            }
            let eigs = a.symmetric_eigen().eigenvalues;
            let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min > 0.0, "denominator loses positivity at nu={nu:?} eta={eta}: {min}");
        }
    }
}

#[test]
fn approximant_first_order_closed_form() {
    let sys = golden_pendulum();
    let seq = seq_p12();
    let dr = Dressing::new(&sys, seq, 3).unwrap();
    let eta = 0.05;
    let coeffs = approximant_h(&dr, 1, 12, eta, Scheme::A).unwrap();
    let e2 = eta * eta;
    // beta component at mode (1,0): eta^2 (x^2 + eta^2 M0)^(-1) [df/dbeta]_nu
    // with [grad f]_(1,0) = (i/2, 0, i/2) and x = 1.
    let v = coeffs.get(&[1, 0]).unwrap();
    assert_abs_diff_eq!(v[2].im, e2 / (1.0 + e2) * 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(v[2].re, 0.0, epsilon = 1e-18);
    // alpha component: bare eta^2/x^2 times i/2
    assert_abs_diff_eq!(v[0].im, e2 * 0.5, epsilon = 1e-15);
}

#[test]
fn beta_only_system_has_zero_approximant() {
    let freq = golden_frequency();
    let mut f = TrigPoly::zero(1, 1, 0);
    f.add_term(Mode { nu: [0, 0], mu: vec![1] }, Tensor::scalar(c(0.5, 0.0)));
    f.add_term(Mode { nu: [0, 0], mu: vec![-1] }, Tensor::scalar(c(0.5, 0.0)));
    let sys = SystemSpec::new(freq, 1, f, vec![0.0], 0.1).unwrap();
    let seq = build_scale_sequence(&sys.freq, 12, 3).unwrap();
    let dr = Dressing::new(&sys, &seq, 3).unwrap();
    let coeffs = approximant_h(&dr, 3, 12, 0.05, Scheme::A).unwrap();
    assert!(coeffs.is_empty(), "no fast forcing, no response: {coeffs:?}");
}

#[test]
fn approximant_agrees_with_recursion_at_small_eta() {
    let sys = golden_pendulum();
    let seq = seq_p12();
    let dr = Dressing::new(&sys, seq, 3).unwrap();
    let eta = 0.05;
    let k = 3;
    let coeffs = approximant_h(&dr, k, 6, eta, Scheme::A).unwrap();
    let conj = solve_up_to(&sys, k).unwrap();
    let eps = eta * eta;
    // compare coefficient tables: sum_k eps^k h^(k)_nu vs dressed sum
    let mut worst: f64 = 0.0;
    for (nu, v) in &coeffs {
        let mut expect = vec![c(0.0, 0.0); sys.dim()];
        let mut w = 1.0;
        for kk in 0..=k {
            if let Some(t) = conj.order(kk).coeff(&Mode::psi(*nu)) {
                for (e, x) in expect.iter_mut().zip(&t.data) {
                    *e += x * w;
                }
            }
            w *= eps;
        }
        for g in 0..sys.dim() {
            worst = worst.max((v[g] - expect[g]).norm());
        }
    }
    // truncation error: O(eta^8) from both the series and K_se
    let bound = 50.0 * eta.powi(8);
    assert!(worst <= bound, "approximant deviates {worst:.3e} > {bound:.3e}");
}

#[test]
fn reexpansion_first_order_exact() {
    let sys = golden_pendulum();
    let seq = seq_p12();
    let dr = Dressing::new(&sys, seq, 3).unwrap();
    let conj = solve_up_to(&sys, 1).unwrap();
    for scheme in [Scheme::A, Scheme::B] {
        let re = reexpand_in_eps(&dr, scheme, 1).unwrap();
        for (m, t) in &conj.order(1).terms {
            let got = re.orders[1].coeff(m).expect("mode present");
            for g in 0..sys.dim() {
                assert!(
                    (got.data[g] - t.data[g]).norm() <= 1e-12,
                    "{scheme:?} k=1 nu={:?} g={g}",
                    m.nu
                );
            }
        }
    }
}

#[test]
fn scheme_uniqueness_through_eps3() {
    let sys = golden_pendulum();
    let seq = seq_p12();
    let dr = Dressing::new(&sys, seq, 3).unwrap();
    let k_max = 3;
    let conj = solve_up_to(&sys, k_max).unwrap();
    let re_a = reexpand_in_eps(&dr, Scheme::A, k_max).unwrap();
    let re_b = reexpand_in_eps(&dr, Scheme::B, k_max).unwrap();
    let mut worst_ab: f64 = 0.0;
    let mut worst_ar: f64 = 0.0;
    for k in 1..=k_max {
        let rec = conj.order(k);
        for (m, t) in &rec.terms {
            for g in 0..sys.dim() {
                let expect = t.data[g];
                let va = re_a.orders[k].coeff(m).map(|x| x.data[g]).unwrap_or(c(0.0, 0.0));
                let vb = re_b.orders[k].coeff(m).map(|x| x.data[g]).unwrap_or(c(0.0, 0.0));
                let scale = 1.0 + expect.norm();
                worst_ab = worst_ab.max((va - vb).norm() / scale);
                worst_ar = worst_ar.max((va - expect).norm() / scale);
            }
        }
        // no spurious modes in either expansion
        for (m, t) in &re_a.orders[k].terms {
            if rec.coeff(m).is_none() {
                worst_ar = worst_ar.max(t.max_abs());
            }
        }
        for (m, t) in &re_b.orders[k].terms {
            if rec.coeff(m).is_none() {
                worst_ab = worst_ab.max(t.max_abs());
            }
        }
    }
    eprintln!("scheme A vs B: {worst_ab:.3e}; scheme A vs recursion: {worst_ar:.3e}");
    assert!(worst_ab <= 1e-9, "A vs B deviation {worst_ab:.3e}");
    assert!(worst_ar <= 1e-9, "A vs recursion deviation {worst_ar:.3e}");
}
