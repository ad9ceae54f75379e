use lindstedt_core::fourier::{golden_pendulum, Mode};
use lindstedt_core::recursion::solve_up_to;
use lindstedt_core::trees::formal_tree_sum;
use std::time::Instant;

#[test]
fn oracle_equivalence_through_order_four() {
    let sys = golden_pendulum();
    let t0 = Instant::now();
    let sums = formal_tree_sum(&sys, 4);
    let t1 = Instant::now();
    let conj = solve_up_to(&sys, 4).unwrap();
    let t2 = Instant::now();
    eprintln!("tree sum: {:?}, recursion: {:?}", t1 - t0, t2 - t1);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for k in 1..=4usize {
        for (m, t) in &conj.order(k).terms {
            let got = sums.get(&m.nu).map(|v| v[k].clone());
            for g in 0..sys.dim() {
                let expect = t.data[g];
                let gv = got.as_ref().map(|v| v[g]).unwrap_or_default();
                let err = (gv - expect).norm() / (1.0 + expect.norm());
                worst = worst.max(err);
                if err > 1e-10 {
                    eprintln!("MISMATCH k={k} nu={:?} g={g}: tree {gv:?} recursion {expect:?}", m.nu);
                }
                checked += 1;
            }
        }
        for (nu, v) in &sums {
            if conj.order(k).coeff(&Mode::psi(*nu)).is_none() {
                for g in 0..sys.dim() {
                    let err = v[k][g].norm();
                    worst = worst.max(err);
                    if err > 1e-10 {
                        eprintln!("SPURIOUS k={k} nu={nu:?} g={g}: {:?}", v[k][g]);
                    }
                }
            }
        }
    }
    eprintln!("checked {checked} coefficients, worst relative deviation {worst:.3e}");
    assert!(worst <= 1e-10, "worst {worst:.3e}");
}
