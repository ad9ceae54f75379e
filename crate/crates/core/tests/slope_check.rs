use lindstedt_core::fourier::golden_pendulum;
use lindstedt_core::recursion::{loglog_slope, residual, solve_up_to};

#[test]
fn print_slopes() {
    let sys = golden_pendulum();
    let etas = [0.05, 0.025, 0.0125];
    for k in 1..=4usize {
        let conj = solve_up_to(&sys, k).unwrap();
        let vals: Vec<f64> = etas.iter().map(|&e| residual(&sys, &conj, e, 64)).collect();
        let slope = loglog_slope(&etas, &vals);
        eprintln!("K={k}: residuals {vals:?} slope {slope:.4} (expect {})", 2 * (k + 1));
    }
}
