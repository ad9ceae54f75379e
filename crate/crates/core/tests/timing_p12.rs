use lindstedt_core::freq::{build_scale_sequence, golden_frequency, verify_scale_sequence};
use std::time::Instant;

#[test]
fn p12_build_and_verify_under_a_minute() {
    let t0 = Instant::now();
    let freq = golden_frequency();
    let t1 = Instant::now();
    let seq = build_scale_sequence(&freq, 12, 3).unwrap();
    let t2 = Instant::now();
    let report = verify_scale_sequence(&seq, &freq);
    let t3 = Instant::now();
    eprintln!(
        "freq: {:?}  build: {:?}  verify: {:?}  pairs: {}",
        t1 - t0,
        t2 - t1,
        t3 - t2,
        report.pairs_checked
    );
    assert!(report.ok, "{:?}", report.first_violation);
    assert!((t3 - t1).as_secs() < 60);
    for (p, g) in seq.gammas().iter().enumerate() {
        eprintln!("gamma_{p} = {}/{} = {:.6e}", g.numer(), g.denom(), *g.numer() as f64 / *g.denom() as f64);
    }
}
