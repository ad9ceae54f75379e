//! Frequency vectors, small divisors and the multiscale sequence.
//!
//! The frequency vector has quadratic-irrational components, so every
//! comparison against divisor values and scale thresholds is decided in exact
//! field arithmetic. The scale sequence `{gamma_p}` lives in dyadic windows
//! `C0*[2^(-p-2), 2^(-p-1))` and additionally keeps away from all small
//! divisors with `|nu| <= 2^(n-3)` by at least `C0*2^(-n)`, for every
//! `n <= P`.

use crate::qi::{Qi, Rat};
use rayon::prelude::*;
use std::cmp::Ordering;

pub const DEFAULT_NU_MAX_C0: i64 = 1 << 15;
pub const DEFAULT_EXCLUSION_OFFSET: u32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum FreqError {
    #[error("frequency components are rationally dependent")]
    RationallyDependent,
    #[error("scale window p={p} exhausted by exclusion intervals")]
    SequenceInfeasible { p: usize },
    #[error("divisor magnitude {x} below gamma_P (deepest scale {p_max}); extend the sequence")]
    ScaleOutOfRange { x: f64, p_max: usize },
}

/// Two-dimensional Diophantine frequency vector with tau = 1.
#[derive(Debug, Clone)]
pub struct FrequencyVector {
    omega: [Qi; 2],
    /// Rational round-down of the exhaustive Diophantine constant.
    c0: Rat,
    /// |nu| bound used for the exhaustive constant.
    nu_max: i64,
}

impl FrequencyVector {
    /// Build and validate: components must be rationally independent.
    /// `nu_max` is the exhaustive search bound for the constant C0.
    pub fn new(omega: [Qi; 2], nu_max: i64) -> Result<Self, FreqError> {
        if omega[0].is_zero() || omega[1].is_zero() {
            return Err(FreqError::RationallyDependent);
        }
        // omega.nu = 0 for nu != 0 iff omega1/omega2 is rational.
        if omega[1].div(&omega[0]).is_rational() {
            return Err(FreqError::RationallyDependent);
        }
        let exact = exact_diophantine_min(&omega, nu_max);
        // Round down to a dyadic rational so that all later checks stay exact
        // and conservative.
        let c0 = round_down_dyadic(&exact, 32);
        assert!(c0 > Rat::new(0, 1), "diophantine constant must be positive");
        Ok(FrequencyVector { omega, c0, nu_max })
    }

    pub fn omega(&self) -> &[Qi; 2] {
        &self.omega
    }

    pub fn c0(&self) -> Rat {
        self.c0
    }

    pub fn tau(&self) -> u32 {
        1
    }

    pub fn nu_max(&self) -> i64 {
        self.nu_max
    }

    /// Exact small divisor `omega . nu`.
    pub fn small_divisor(&self, nu: [i64; 2]) -> Qi {
        self.omega[0]
            .mul_int(nu[0] as i128)
            .add(&self.omega[1].mul_int(nu[1] as i128))
    }

    /// `omega . nu` as f64 (via the exact value).
    pub fn small_divisor_f64(&self, nu: [i64; 2]) -> f64 {
        self.small_divisor(nu).to_f64()
    }

    /// Exhaustive Diophantine estimate `min |omega.nu| * |nu|` over `0 < |nu| <= nu_max`
    /// (max-norm). Monotone non-increasing in `nu_max`.
    pub fn diophantine_constant(&self, nu_max: i64) -> Qi {
        exact_diophantine_min(&self.omega, nu_max)
    }

    /// Brute-force variant over the full lattice square; test oracle for the
    /// candidate enumeration in `diophantine_constant`.
    pub fn diophantine_constant_brute(&self, nu_max: i64) -> Qi {
        let mut best: Option<Qi> = None;
        for n1 in -nu_max..=nu_max {
            for n2 in -nu_max..=nu_max {
                if n1 == 0 && n2 == 0 {
                    continue;
                }
                let norm = n1.abs().max(n2.abs()) as i128;
                let cand = self.small_divisor([n1, n2]).abs().mul_int(norm);
                if best.as_ref().map_or(true, |b| cand < *b) {
                    best = Some(cand);
                }
            }
        }
        best.expect("nu_max >= 1")
    }
}

/// Candidates with one coordinate at +-t bracket the per-norm minimum.
fn exact_diophantine_min(omega: &[Qi; 2], nu_max: i64) -> Qi {
    assert!(nu_max >= 1);
    let ratio21 = omega[1].div(&omega[0]); // minimize |n1 + t*ratio21| over n1
    let ratio12 = omega[0].div(&omega[1]);
    let mut best: Option<Qi> = None;
    let mut consider = |nu: [i64; 2], omega: &[Qi; 2]| {
        let norm = nu[0].abs().max(nu[1].abs()) as i128;
        if norm == 0 || norm > nu_max as i128 {
            return;
        }
        let v = omega[0]
            .mul_int(nu[0] as i128)
            .add(&omega[1].mul_int(nu[1] as i128))
            .abs()
            .mul_int(norm);
        if best.as_ref().map_or(true, |b| v < *b) {
            best = Some(v);
        }
    };
    for t in 1..=nu_max {
        // nu2 = t, nu1 near -t*omega2/omega1
        let target = ratio21.mul_int(-(t as i128));
        let f = target.floor();
        for m in [f, f + 1] {
            let m = m.clamp(-(t as i128), t as i128) as i64;
            consider([m, t], omega);
        }
        // nu1 = t, nu2 near -t*omega1/omega2
        let target = ratio12.mul_int(-(t as i128));
        let f = target.floor();
        for m in [f, f + 1] {
            let m = m.clamp(-(t as i128), t as i128) as i64;
            consider([t, m], omega);
        }
        // axis points
        consider([t, 0], omega);
        consider([0, t], omega);
    }
    best.expect("nu_max >= 1")
}

fn round_down_dyadic(x: &Qi, bits: u32) -> Rat {
    let scaled = x.mul_int(1i128 << bits);
    Rat::new(scaled.floor(), 1i128 << bits)
}

/// The multiscale sequence `gamma_0 > gamma_1 > ... > gamma_P`.
#[derive(Debug, Clone)]
pub struct ScaleSequence {
    gammas: Vec<Rat>,
    c0: Rat,
    exclusion_offset: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Condition (1) fails: `|omega.nu| < C0 / |nu|`.
    Diophantine { n: usize, nu: [i64; 2] },
    /// Condition (2) fails: `||omega.nu| - gamma_p| <= C0 2^-n`.
    NearGamma { n: usize, p: usize, nu: [i64; 2] },
    /// A gamma escapes its dyadic window or monotonicity fails.
    WindowBroken { p: usize },
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub ok: bool,
    pub first_violation: Option<Violation>,
    pub pairs_checked: u64,
}

impl ScaleSequence {
    pub fn p_max(&self) -> usize {
        self.gammas.len() - 1
    }

    pub fn gamma(&self, p: usize) -> Rat {
        self.gammas[p]
    }

    pub fn gammas(&self) -> &[Rat] {
        &self.gammas
    }

    pub fn c0(&self) -> Rat {
        self.c0
    }

    pub fn exclusion_offset(&self) -> u32 {
        self.exclusion_offset
    }

    /// Replace one gamma (test hook for planted violations).
    pub fn with_gamma(mut self, p: usize, value: Rat) -> Self {
        self.gammas[p] = value;
        self
    }

    /// CSV rows `(p, numerator, denominator, float)`.
    pub fn csv_rows(&self) -> Vec<(usize, i128, i128, f64)> {
        self.gammas
            .iter()
            .enumerate()
            .map(|(p, g)| (p, *g.numer(), *g.denom(), *g.numer() as f64 / *g.denom() as f64))
            .collect()
    }
}

/// Scale label of a divisor: -1 for the zero mode, 0 for `|x| >= gamma_0`,
/// otherwise the unique p with `gamma_p <= |x| < gamma_(p-1)`.
pub fn scale_of(x: &Qi, nu_is_zero: bool, seq: &ScaleSequence) -> Result<i32, FreqError> {
    if nu_is_zero {
        return Ok(-1);
    }
    let ax = x.abs();
    if ax.cmp_rat(&seq.gamma(0)) != Ordering::Less {
        return Ok(0);
    }
    for p in 1..=seq.p_max() {
        if ax.cmp_rat(&seq.gamma(p)) != Ordering::Less {
            return Ok(p as i32);
        }
    }
    Err(FreqError::ScaleOutOfRange { x: ax.to_f64(), p_max: seq.p_max() })
}

/// Smallest n with `|nu| <= 2^(n-offset)`, i.e. the scale from which the
/// exclusion condition starts applying to this mode.
fn first_applicable_n(nu_norm: i64, offset: u32) -> u32 {
    let mut n = offset;
    while (1i64 << (n - offset)) < nu_norm {
        n += 1;
    }
    n
}

/// Deterministic construction: in each window exclude closed intervals of
/// radius `C0 2^-n` around every applicable divisor, then take a dyadic point
/// near the midpoint of the largest remaining gap.
pub fn build_scale_sequence(
    freq: &FrequencyVector,
    p_max: usize,
    exclusion_offset: u32,
) -> Result<ScaleSequence, FreqError> {
    let c0 = freq.c0();
    let off = exclusion_offset;
    let mut gammas = Vec::with_capacity(p_max + 1);
    let nu_bound = if p_max as u32 >= off { 1i64 << (p_max as u32 - off) } else { 0 };

    // Window-relevant divisors: |omega.nu| within reach of a gamma window.
    // Collected once, reused per window.
    let mut divisors: Vec<(Qi, i64)> = Vec::new(); // (|omega.nu|, |nu|_inf)
    for n2 in 0..=nu_bound {
        let n1_range = if n2 == 0 { 1..=nu_bound } else { -nu_bound..=nu_bound };
        for n1 in n1_range {
            if n1 == 0 && n2 == 0 {
                continue;
            }
            let norm = n1.abs().max(n2.abs());
            if norm > nu_bound {
                continue;
            }
            divisors.push((freq.small_divisor([n1, n2]).abs(), norm));
        }
    }

    for p in 0..=p_max {
        let wlo = c0 / Rat::from_integer(1i128 << (p + 2));
        let whi = c0 / Rat::from_integer(1i128 << (p + 1));
        let wlo_q = Qi::from_rat(wlo);
        let whi_q = Qi::from_rat(whi);

        // Exclusion intervals intersecting the window.
        let mut intervals: Vec<(Qi, Qi)> = Vec::new();
        for (x, norm) in &divisors {
            let n_first = first_applicable_n(*norm, off).max(p as u32);
            if n_first > p_max as u32 {
                continue;
            }
            let radius = c0 / Rat::from_integer(1i128 << n_first);
            let lo = x.sub(&Qi::from_rat(radius));
            let hi = x.add(&Qi::from_rat(radius));
            if hi.cmp_exact(&wlo_q) != Ordering::Less && lo.cmp_exact(&whi_q) != Ordering::Greater {
                intervals.push((lo, hi));
            }
        }
        intervals.sort_by(|a, b| a.0.cmp_exact(&b.0));

        // Sweep for the largest gap inside [wlo, whi).
        let mut cursor = wlo_q;
        let mut best_gap: Option<(Qi, Qi)> = None;
        let push_gap = |lo: Qi, hi: Qi, best: &mut Option<(Qi, Qi)>| {
            if hi.cmp_exact(&lo) == Ordering::Greater {
                let width = hi.sub(&lo);
                let better = best
                    .as_ref()
                    .map_or(true, |(blo, bhi)| width.cmp_exact(&bhi.sub(blo)) == Ordering::Greater);
                if better {
                    *best = Some((lo, hi));
                }
            }
        };
        for (lo, hi) in &intervals {
            push_gap(cursor, (*lo).min(whi_q), &mut best_gap);
            if hi.cmp_exact(&cursor) == Ordering::Greater {
                cursor = *hi;
            }
            if cursor.cmp_exact(&whi_q) != Ordering::Less {
                break;
            }
        }
        push_gap(cursor, whi_q, &mut best_gap);

        let (glo, ghi) = best_gap.ok_or(FreqError::SequenceInfeasible { p })?;
        gammas.push(dyadic_near_midpoint(&glo, &ghi));
    }

    Ok(ScaleSequence { gammas, c0, exclusion_offset: off })
}

/// Simplest dyadic rational strictly inside `(lo, hi)`, preferring the point
/// nearest the midpoint at the first feasible denominator.
fn dyadic_near_midpoint(lo: &Qi, hi: &Qi) -> Rat {
    let two = Qi::from_int(2);
    let mid = lo.add(hi).div(&two);
    for k in 0..=96u32 {
        let scale = 1i128 << k.min(96);
        let m_min = lo.mul_int(scale).floor() + 1;
        let mut m_max = hi.mul_int(scale).floor();
        if Qi::from_rat(Rat::new(m_max, scale)).cmp_exact(hi) != Ordering::Less {
            m_max -= 1;
        }
        if m_min > m_max {
            continue;
        }
        let mc = mid.mul_int(scale).floor();
        let cand = [mc, mc + 1]
            .into_iter()
            .map(|m| m.clamp(m_min, m_max))
            .min_by(|a, b| {
                let da = mid.sub(&Qi::from_rat(Rat::new(*a, scale))).abs();
                let db = mid.sub(&Qi::from_rat(Rat::new(*b, scale))).abs();
                da.cmp_exact(&db).then(a.cmp(b))
            })
            .unwrap();
        return Rat::new(cand, scale);
    }
    unreachable!("gap narrower than 2^-96 at desk scale");
}

/// Exhaustive exact verification of both conditions of the scale sequence,
/// for all `n <= P` and `0 < |nu| <= 2^(n-offset)`.
pub fn verify_scale_sequence(seq: &ScaleSequence, freq: &FrequencyVector) -> VerifyReport {
    let c0 = seq.c0;
    let off = seq.exclusion_offset;
    let p_max = seq.p_max();

    // Window and monotonicity invariants first.
    for p in 0..=p_max {
        let wlo = c0 / Rat::from_integer(1i128 << (p + 2));
        let whi = c0 / Rat::from_integer(1i128 << (p + 1));
        let g = seq.gamma(p);
        if g < wlo || g >= whi || (p > 0 && g >= seq.gamma(p - 1)) {
            return VerifyReport {
                ok: false,
                first_violation: Some(Violation::WindowBroken { p }),
                pairs_checked: 0,
            };
        }
    }

    let nu_bound = if p_max as u32 >= off { 1i64 << (p_max as u32 - off) } else { 0 };
    // Half lattice (condition symmetric under nu -> -nu).
    let rows: Vec<i64> = (0..=nu_bound).collect();
    let gammas: Vec<Rat> = seq.gammas().to_vec();

    let result = rows
        .par_iter()
        .map(|&n2| {
            let mut checked = 0u64;
            let mut first: Option<(usize, usize, [i64; 2], u8)> = None;
            let n1_range: Vec<i64> = if n2 == 0 {
                (1..=nu_bound).collect()
            } else {
                (-nu_bound..=nu_bound).collect()
            };
            for n1 in n1_range {
                let norm = n1.abs().max(n2.abs());
                if norm == 0 || norm > nu_bound {
                    continue;
                }
                let x = freq.small_divisor([n1, n2]).abs();
                let n_first = first_applicable_n(norm, off) as usize;
                if n_first > p_max {
                    continue;
                }
                // Condition (1): |omega.nu| >= C0/|nu|.
                checked += 1;
                if x.cmp_rat(&(c0 / Rat::from_integer(norm as i128))) == Ordering::Less {
                    let v = (n_first, 0usize, [n1, n2], 1u8);
                    if first.map_or(true, |f| v < f) {
                        first = Some(v);
                    }
                    continue;
                }
                // Condition (2): distances to all gammas, prefix minima over p <= n.
                let dists: Vec<Qi> =
                    gammas.iter().map(|g| x.sub(&Qi::from_rat(*g)).abs()).collect();
                let mut prefix_min = dists[0];
                let mut prefix_arg = 0usize;
                for n in n_first..=p_max {
                    while prefix_arg < n.min(dists.len() - 1) {
                        let q = prefix_arg + 1;
                        if dists[q].cmp_exact(&prefix_min) == Ordering::Less {
                            prefix_min = dists[q];
                        }
                        prefix_arg = q;
                    }
                    checked += 1;
                    let threshold = c0 / Rat::from_integer(1i128 << n);
                    if prefix_min.cmp_rat(&threshold) != Ordering::Greater {
                        // identify the offending p
                        let p_bad = (0..=n.min(gammas.len() - 1))
                            .min_by(|a, b| dists[*a].cmp_exact(&dists[*b]))
                            .unwrap();
                        let v = (n, p_bad, [n1, n2], 2u8);
                        if first.map_or(true, |f| v < f) {
                            first = Some(v);
                        }
                        break;
                    }
                }
            }
            (first, checked)
        })
        .reduce(
            || (None, 0u64),
            |(a, ca), (b, cb)| {
                let first = match (a, b) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    (x, y) => x.or(y),
                };
                (first, ca + cb)
            },
        );

    let (first, pairs_checked) = result;
    let first_violation = first.map(|(n, p, nu, kind)| {
        if kind == 1 {
            Violation::Diophantine { n, nu }
        } else {
            Violation::NearGamma { n, p, nu }
        }
    });
    VerifyReport { ok: first_violation.is_none(), first_violation, pairs_checked }
}

/// The golden-mean frequency vector `omega = (1, (sqrt 5 - 1)/2)`.
pub fn golden_frequency() -> FrequencyVector {
    let one = Qi::from_int(1);
    let phi = Qi::new(-1, 1, 2, 5).unwrap();
    FrequencyVector::new([one, phi], DEFAULT_NU_MAX_C0).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qi::Qi;

    fn golden_small(nu_max: i64) -> FrequencyVector {
        let one = Qi::from_int(1);
        let phi = Qi::new(-1, 1, 2, 5).unwrap();
        FrequencyVector::new([one, phi], nu_max).unwrap()
    }

    #[test]
    fn small_divisor_examples() {
        let freq = golden_small(64);
        assert!(freq.small_divisor([0, 0]).is_zero());
        assert_eq!(freq.small_divisor([1, 0]), Qi::from_int(1));
        // (-1, 2): -1 + 2*(sqrt5-1)/2 = sqrt5 - 2
        let x = freq.small_divisor([-1, 2]);
        assert_eq!(x, Qi::new(-2, 1, 1, 5).unwrap());
        assert!((x.to_f64() - 0.23606797749978969).abs() < 1e-15);
    }

    #[test]
    fn rational_dependence_rejected() {
        let two = Qi::from_int(2);
        let one = Qi::from_int(1);
        assert!(matches!(
            FrequencyVector::new([one, two], 16),
            Err(FreqError::RationallyDependent)
        ));
    }

    #[test]
    fn diophantine_constant_examples() {
        let freq = golden_small(64);
        // nu_max = 1: minimum over the 8 unit-box modes; attained at (1,-1):
        // |1 - phi| = phi^2 = (3 - sqrt5)/2
        let c1 = freq.diophantine_constant(1);
        assert_eq!(c1, Qi::new(3, -1, 2, 5).unwrap());
        assert_eq!(c1, freq.diophantine_constant_brute(1));
        // Candidate enumeration agrees with brute force at larger bounds.
        for bound in [2, 3, 5, 8, 13, 21] {
            assert_eq!(
                freq.diophantine_constant(bound),
                freq.diophantine_constant_brute(bound),
                "bound {bound}"
            );
        }
        // Monotone non-increasing and stabilized for the golden mean:
        let big = freq.diophantine_constant(1 << 12);
        assert!(big <= c1);
        assert_eq!(big, c1, "golden-mean constant stabilizes at phi^2");
        assert!(big.sign() > 0);
    }

    #[test]
    fn build_p0_single_window() {
        let freq = golden_small(256);
        let seq = build_scale_sequence(&freq, 0, DEFAULT_EXCLUSION_OFFSET).unwrap();
        let c0 = freq.c0();
        assert!(seq.gamma(0) >= c0 / Rat::from_integer(4));
        assert!(seq.gamma(0) < c0 / Rat::from_integer(2));
    }

    #[test]
    fn build_and_verify_p5() {
        let freq = golden_small(1024);
        let seq = build_scale_sequence(&freq, 5, DEFAULT_EXCLUSION_OFFSET).unwrap();
        let report = verify_scale_sequence(&seq, &freq);
        assert!(report.ok, "violation: {:?}", report.first_violation);
    }

    #[test]
    fn verify_vacuous_for_small_p() {
        let freq = golden_small(64);
        let seq = build_scale_sequence(&freq, 2, DEFAULT_EXCLUSION_OFFSET).unwrap();
        let report = verify_scale_sequence(&seq, &freq);
        assert!(report.ok);
        assert_eq!(report.pairs_checked, 0, "condition (2) vacuous below n = 3");
    }

    #[test]
    fn planted_violation_detected() {
        let freq = golden_small(1024);
        let seq = build_scale_sequence(&freq, 5, DEFAULT_EXCLUSION_OFFSET).unwrap();
        // Plant gamma_3 next to |omega.(1,-1)| = phi^2 (rational approximation
        // well inside the exclusion radius C0/8).
        let near = Rat::new(382, 1000);
        let planted = seq.clone().with_gamma(3, near);
        let report = verify_scale_sequence(&planted, &freq);
        assert!(!report.ok);
        match report.first_violation {
            // The window invariant fires first: phi^2 is far above window 3.
            Some(Violation::WindowBroken { p }) => assert_eq!(p, 3),
            other => panic!("unexpected violation: {other:?}"),
        }
        // Now plant *inside* the window but inside an exclusion zone:
        // take a point within C0*2^-5 of the divisor nearest window 3.
        let mut planted_in_window = None;
        let c0 = freq.c0();
        let wlo = c0 / Rat::from_integer(1 << 5);
        let whi = c0 / Rat::from_integer(1 << 4);
        for n2 in -8i64..=8 {
            for n1 in -8i64..=8 {
                if (n1, n2) == (0, 0) {
                    continue;
                }
                let x = freq.small_divisor([n1, n2]).abs();
                if x.cmp_rat(&wlo) != Ordering::Less && x.cmp_rat(&whi) == Ordering::Less {
                    planted_in_window = Some(x);
                }
            }
        }
        if let Some(x) = planted_in_window {
            // dyadic point just below x
            let g = Rat::new(x.mul_int(1 << 40).floor(), 1 << 40);
            let seq2 = seq.with_gamma(3, g);
            let report = verify_scale_sequence(&seq2, &freq);
            assert!(!report.ok);
            assert!(matches!(
                report.first_violation,
                Some(Violation::NearGamma { p: 3, .. }) | Some(Violation::WindowBroken { p: 3 })
            ));
        }
    }

    #[test]
    fn scale_of_partitions() {
        let freq = golden_small(4096);
        let seq = build_scale_sequence(&freq, 12, DEFAULT_EXCLUSION_OFFSET).unwrap();
        assert_eq!(scale_of(&Qi::zero(), true, &seq).unwrap(), -1);
        assert_eq!(scale_of(&Qi::from_int(1), false, &seq).unwrap(), 0);
        // sqrt5 - 2 = phi^3 ~ 0.236 >= gamma_0 (< C0/2 <= 0.191): scale 0
        let x = freq.small_divisor([-1, 2]);
        assert_eq!(scale_of(&x, false, &seq).unwrap(), 0);
        // Exhaustive partition check on a box: exactly one label, consistent
        // with a direct exact window scan.
        for n1 in -20i64..=20 {
            for n2 in -20i64..=20 {
                if (n1, n2) == (0, 0) {
                    continue;
                }
                let x = freq.small_divisor([n1, n2]);
                let label = scale_of(&x, false, &seq).unwrap();
                assert!(label >= 0);
                let ax = x.abs();
                let expected = {
                    let mut lab = 0i32;
                    for p in 1..=seq.p_max() {
                        if ax.cmp_rat(&seq.gamma(p - 1)) == Ordering::Less
                            && ax.cmp_rat(&seq.gamma(p)) != Ordering::Less
                        {
                            lab = p as i32;
                        }
                    }
                    lab
                };
                assert_eq!(label, expected, "nu = ({n1},{n2})");
            }
        }
    }

    #[test]
    fn deep_divisor_out_of_range() {
        let freq = golden_small(256);
        let seq = build_scale_sequence(&freq, 2, DEFAULT_EXCLUSION_OFFSET).unwrap();
        // Fibonacci mode (34, -55): |omega.nu| = phi^10 ~ 8.1e-3 < gamma_2
        let x = freq.small_divisor([34, -55]);
        assert!(matches!(
            scale_of(&x, false, &seq),
            Err(FreqError::ScaleOutOfRange { .. })
        ));
    }
}
