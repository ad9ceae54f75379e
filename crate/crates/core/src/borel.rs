//! Borel transforms, convolution, Laplace summation, contour inversion and
//! factorial-growth diagnostics.
//!
//! A truncated Borel polynomial stores the coefficients `c_k` of
//! `sum_(k>=1) c_k p^(k-1)/(k-1)!`; the transform of `sum c_k eta^k` is the
//! coefficient-wise identity in this basis, and multiplication of series
//! corresponds to convolution `(p^a/a!) * (p^b/b!) = p^(a+b+1)/(a+b+1)!`.

use num::complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum BorelError {
    #[error("Laplace tail not negligible: e^(-p_max/eta) * bound = {est:.3e} > {tol:.3e}")]
    TailNotNegligible { est: f64, tol: f64 },
    #[error("contour truncation too small: tail bound {est:.3e} > {tol:.3e}")]
    ContourTruncationTooSmall { est: f64, tol: f64 },
    #[error("growth fit needs at least {need} nonzero coefficients, got {got}")]
    InsufficientData { need: usize, got: usize },
}

/// Truncated Borel-transform polynomial: `coeffs[k-1]` multiplies
/// `p^(k-1)/(k-1)!`, k = 1..=K.
#[derive(Debug, Clone, PartialEq)]
pub struct BorelPoly {
    pub coeffs: Vec<Complex64>,
}

impl BorelPoly {
    pub fn truncation(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm() == 0.0)
    }

    /// Evaluate at real `p`.
    pub fn eval(&self, p: f64) -> Complex64 {
        let mut out = Complex64::new(0.0, 0.0);
        let mut monom = 1.0f64; // p^(k-1)/(k-1)!
        for (i, c) in self.coeffs.iter().enumerate() {
            out += c * monom;
            monom *= p / (i as f64 + 1.0);
        }
        out
    }
}

/// Coefficient-wise Borel transform of `sum_(k>=1) series[k-1] eta^k`.
pub fn borel_transform(series: &[Complex64]) -> BorelPoly {
    BorelPoly { coeffs: series.to_vec() }
}

/// Inverse of `borel_transform` at the coefficient level.
pub fn borel_coefficients(poly: &BorelPoly) -> Vec<Complex64> {
    poly.coeffs.clone()
}

/// Convolution `(F_B * G_B)(p) = int_0^p F_B(p') G_B(p - p') dp'`, i.e. the
/// Cauchy product in the factorial monomial basis.
pub fn borel_convolve(f: &BorelPoly, g: &BorelPoly, k_max: usize) -> BorelPoly {
    let mut out = vec![Complex64::new(0.0, 0.0); k_max];
    for (i, a) in f.coeffs.iter().enumerate() {
        let ki = i + 1;
        for (j, b) in g.coeffs.iter().enumerate() {
            let kj = j + 1;
            if ki + kj <= k_max {
                out[ki + kj - 1] += a * b;
            }
        }
    }
    BorelPoly { coeffs: out }
}

/// Tanh-sinh (double exponential) quadrature on `[0, upper]`.
fn tanh_sinh<F: Fn(f64) -> Complex64>(f: F, upper: f64, rel_tol: f64) -> Complex64 {
    let half = upper / 2.0;
    let t_cut = 4.0;
    let eval = |t: f64| -> Complex64 {
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let x = half * (1.0 + u.tanh());
        let w = half * std::f64::consts::FRAC_PI_2 * t.cosh() / (u.cosh() * u.cosh());
        if !w.is_finite() || w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        f(x) * w
    };
    let mut h = 1.0f64;
    let mut sum = eval(0.0);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        if t > t_cut {
            break;
        }
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut prev = sum * h;
    for _level in 0..10 {
        h /= 2.0;
        // add the new midpoints
        let mut extra = Complex64::new(0.0, 0.0);
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            if t > t_cut {
                break;
            }
            extra += eval(t) + eval(-t);
            k += 2; // odd multiples only
        }
        let cur = prev / 2.0 + extra * h;
        if (cur - prev).norm() <= rel_tol * cur.norm().max(1e-300) {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// Truncated Laplace sum `int_0^p_max e^(-p/eta) F(p) dp` by tanh-sinh
/// quadrature. `bound_at_tail` must dominate `|F|` near `p_max`; the
/// neglected tail is checked against `tail_tol`.
pub fn laplace_sum_fn<F: Fn(f64) -> Complex64>(
    f: F,
    eta: f64,
    p_max: f64,
    bound_at_tail: f64,
    tail_tol: f64,
) -> Result<(Complex64, f64), BorelError> {
    assert!(eta > 0.0 && p_max > 0.0);
    let est = (-p_max / eta).exp() * bound_at_tail * eta;
    if est > tail_tol {
        return Err(BorelError::TailNotNegligible { est, tol: tail_tol });
    }
    let val = tanh_sinh(|p| f(p) * (-p / eta).exp(), p_max, 1e-13);
    Ok((val, est))
}

/// Laplace sum of a truncated Borel polynomial.
pub fn laplace_sum_poly(
    poly: &BorelPoly,
    eta: f64,
    p_max: f64,
    tail_tol: f64,
) -> Result<(Complex64, f64), BorelError> {
    let bound = poly.eval(p_max).norm() + 1.0;
    laplace_sum_fn(|p| poly.eval(p), eta, p_max, bound, tail_tol)
}

/// Inverse Laplace transform along the vertical line `Re z = rho`, truncated
/// to `|Im z| <= t_max`:
/// `int e^(z p) F(1/z) dz/(2 pi i)`.
///
/// The tail estimate `2 e^(rho p) |F(1/(rho + i t_max))| / (pi p)` assumes
/// `|F(1/z)|` decreases monotonically along the tails.
pub fn inverse_laplace_contour<F: Fn(Complex64) -> Complex64>(
    f_of_eta: F,
    rho: f64,
    p: f64,
    t_max: f64,
    tail_tol: f64,
) -> Result<(Complex64, f64), BorelError> {
    assert!(rho > 0.0 && p > 0.0 && t_max > 0.0);
    let tail_f = f_of_eta(Complex64::new(rho, t_max).inv()).norm();
    let est = 2.0 * (rho * p).exp() * tail_f / (std::f64::consts::PI * p);
    if est > tail_tol {
        return Err(BorelError::ContourTruncationTooSmall { est, tol: tail_tol });
    }

    // 16-point Gauss-Legendre nodes/weights on [-1, 1].
    const GL_X: [f64; 8] = [
        0.0950125098376374,
        0.2816035507792589,
        0.4580167776572274,
        0.6178762444026438,
        0.7554044083550030,
        0.8656312023878318,
        0.9445750230732326,
        0.9894009349916499,
    ];
    const GL_W: [f64; 8] = [
        0.1894506104550685,
        0.1826034150449236,
        0.1691565193950025,
        0.1495959888165767,
        0.1246289712555339,
        0.0951585116824928,
        0.0622535239386479,
        0.0271524594117541,
    ];

    // Graded panels: fine near t = 0 where F(1/z) varies on the scale of
    // rho, growing geometrically up to two oscillation periods.
    let period = std::f64::consts::TAU / p;
    let w_max = 2.0 * period;
    let w0 = (rho.min(period) / 8.0).min(w_max);
    let mut bounds = vec![0.0f64];
    let mut t = 0.0;
    let mut w = w0;
    while t < t_max {
        t = (t + w).min(t_max);
        bounds.push(t);
        w = (w * 1.3).min(w_max);
    }

    let integrand = |t: f64| -> Complex64 {
        let z = Complex64::new(rho, t);
        (z * p).exp() * f_of_eta(z.inv())
    };

    // Kahan-compensated accumulation in a fixed order.
    let mut sum = Complex64::new(0.0, 0.0);
    let mut comp = Complex64::new(0.0, 0.0);
    let mut add = |v: Complex64, sum: &mut Complex64, comp: &mut Complex64| {
        let y = v - *comp;
        let t = *sum + y;
        *comp = (t - *sum) - y;
        *sum = t;
    };
    for half in [1.0f64, -1.0] {
        for pair in bounds.windows(2) {
            let (a, b) = (half * pair[0], half * pair[1]);
            let mid = (a + b) / 2.0;
            let hw = (b - a) / 2.0;
            for (x, w) in GL_X.iter().zip(GL_W.iter()) {
                add(integrand(mid + hw * x) * (w * hw.abs()), &mut sum, &mut comp);
                add(integrand(mid - hw * x) * (w * hw.abs()), &mut sum, &mut comp);
            }
        }
    }
    // dz = i dt and the 1/(2 pi i) prefactor leave dt/(2 pi)
    Ok((sum / std::f64::consts::TAU, est))
}

/// Fitted factorial-growth envelope `|c_k| <= D C^k (k!)^tau`.
#[derive(Debug, Clone)]
pub struct GrowthFit {
    pub d: f64,
    pub c: f64,
    pub tau_est: f64,
    pub residual: f64,
}

/// Least-squares fit of `log |c_k|` against `log D + k log C + tau log k!`;
/// with `tau_fixed` the exponent is pinned (tau = 1 for the envelope checks).
/// The returned constants are adjusted so the envelope holds for every
/// supplied nonzero coefficient.
pub fn growth_fit(coeffs: &[(usize, f64)], tau_fixed: Option<f64>) -> Result<GrowthFit, BorelError> {
    let data: Vec<(f64, f64, f64)> = coeffs
        .iter()
        .filter(|(_, c)| *c > 0.0)
        .map(|&(k, c)| {
            let logfact: f64 = (1..=k).map(|v| (v as f64).ln()).sum();
            (k as f64, logfact, c.ln())
        })
        .collect();
    if data.len() < 4 {
        return Err(BorelError::InsufficientData { need: 4, got: data.len() });
    }

    let (log_d, log_c, tau) = match tau_fixed {
        Some(tau) => {
            // fit y - tau*logfact = a + b k
            let n = data.len() as f64;
            let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
            for &(k, lf, y) in &data {
                let yy = y - tau * lf;
                sx += k;
                sy += yy;
                sxx += k * k;
                sxy += k * yy;
            }
            let b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            let a = (sy - b * sx) / n;
            (a, b, tau)
        }
        None => {
            // normal equations for [1, k, logfact]
            let mut m = [[0.0f64; 3]; 3];
            let mut rhs = [0.0f64; 3];
            for &(k, lf, y) in &data {
                let row = [1.0, k, lf];
                for i in 0..3 {
                    for j in 0..3 {
                        m[i][j] += row[i] * row[j];
                    }
                    rhs[i] += row[i] * y;
                }
            }
            let sol = solve3(m, rhs);
            (sol[0], sol[1], sol[2])
        }
    };

    let mut d = log_d.exp();
    let c = log_c.exp();
    let mut residual: f64 = 0.0;
    for &(k, lf, y) in &data {
        let fit = log_d + log_c * k + tau * lf;
        residual += (y - fit) * (y - fit);
    }
    residual = (residual / data.len() as f64).sqrt();
    // envelope adjustment: raise D until the bound majorizes every point
    for &(k, lf, y) in &data {
        let need = (y - log_c * k - tau * lf).exp();
        if need > d {
            d = need * (1.0 + 1e-12);
        }
    }
    Ok(GrowthFit { d, c, tau_est: tau, residual })
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        m.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in (row + 1)..3 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn transform_of_monomials() {
        // eta^k -> p^(k-1)/(k-1)!
        let mut series = vec![c(0.0, 0.0); 5];
        series[3] = c(1.0, 0.0); // eta^4
        let b = borel_transform(&series);
        for p in [0.3f64, 1.0, 2.7] {
            assert_abs_diff_eq!(b.eval(p).re, p.powi(3) / 6.0, epsilon = 1e-14);
        }
        // zero series -> zero polynomial
        assert!(borel_transform(&[c(0.0, 0.0); 4]).is_zero());
    }

    #[test]
    fn transform_of_geometric_series_is_exponential() {
        // eta/(1 - alpha eta) = sum alpha^(k-1) eta^k -> e^(alpha p)
        let alpha = -1.0f64;
        let series: Vec<Complex64> = (1..=30).map(|k| c(alpha.powi(k - 1), 0.0)).collect();
        let b = borel_transform(&series);
        for p in [0.1f64, 0.7, 2.0, 5.0] {
            assert_abs_diff_eq!(b.eval(p).re, (alpha * p).exp(), epsilon = 1e-12);
            assert_abs_diff_eq!(b.eval(p).im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn monomial_convolution_rule() {
        // (p^k1/k1!) * (p^k2/k2!) = p^(k1+k2+1)/(k1+k2+1)! exactly
        let (k1, k2) = (2usize, 3usize);
        let mut f = vec![c(0.0, 0.0); 8];
        f[k1] = c(1.0, 0.0); // p^k1/k1! is index k1 (k = k1+1)
        let mut g = vec![c(0.0, 0.0); 8];
        g[k2] = c(1.0, 0.0);
        let conv = borel_convolve(&BorelPoly { coeffs: f }, &BorelPoly { coeffs: g }, 8);
        let mut expect = vec![c(0.0, 0.0); 8];
        expect[k1 + k2 + 1] = c(1.0, 0.0);
        assert_eq!(conv.coeffs, expect);
    }

    #[test]
    fn exponential_convolution_identity() {
        // e^(ap) p^k1/k1! * e^(ap) p^k2/k2! = e^(ap) p^(k1+k2+1)/(k1+k2+1)!
        let a = 0.5f64;
        let kk = 40usize;
        let (k1, k2) = (1usize, 2usize);
        let shifted = |k0: usize| -> BorelPoly {
            // coefficients of e^(ap) p^k0/k0! in the factorial basis:
            // sum_j a^j p^(j+k0)/(j! k0!) = sum_j a^j binom(j+k0, k0) p^(j+k0)/(j+k0)!
            let mut coeffs = vec![c(0.0, 0.0); kk];
            for j in 0..(kk - k0) {
                let binom: f64 = (1..=k0).map(|i| (j + i) as f64 / i as f64).product();
                coeffs[j + k0] = c(a.powi(j as i32) * binom, 0.0);
            }
            BorelPoly { coeffs }
        };
        let conv = borel_convolve(&shifted(k1), &shifted(k2), kk);
        let expect = shifted(k1 + k2 + 1);
        for p in [0.2f64, 1.0, 2.5] {
            assert_abs_diff_eq!(conv.eval(p).re, expect.eval(p).re, epsilon = 1e-9);
        }
    }

    #[test]
    fn convolution_matches_series_product() {
        // transform(A*B) = transform(A) * transform(B), K = 8, fixed coeffs
        let a: Vec<Complex64> =
            (1..=8).map(|k| c(0.3 * k as f64, 0.1 - 0.02 * k as f64)).collect();
        let b: Vec<Complex64> =
            (1..=8).map(|k| c(1.0 / k as f64, 0.05 * k as f64)).collect();
        // series product (both start at eta^1)
        let mut prod = vec![c(0.0, 0.0); 8];
        for i in 1..=8usize {
            for j in 1..=8usize {
                if i + j <= 8 {
                    prod[i + j - 1] += a[i - 1] * b[j - 1];
                }
            }
        }
        let conv = borel_convolve(&borel_transform(&a), &borel_transform(&b), 8);
        for k in 0..8 {
            assert!(
                (conv.coeffs[k] - prod[k]).norm() <= 1e-12 * (1.0 + prod[k].norm()),
                "k={k}"
            );
        }
    }

    #[test]
    fn laplace_sum_basics() {
        // F_B = 1 (transform of eta): integral = eta (1 - e^(-p_max/eta))
        let eta = 0.25;
        let (val, _) =
            laplace_sum_fn(|_| c(1.0, 0.0), eta, 14.0 * eta, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(val.re, eta * (1.0 - (-14.0f64).exp()), epsilon = 1e-10);
        // F_B = p (transform of eta^2)
        let (val2, _) = laplace_sum_fn(|p| c(p, 0.0), eta, 40.0 * eta, 40.0 * eta, 1e-12).unwrap();
        assert_abs_diff_eq!(val2.re, eta * eta, epsilon = 1e-10);
    }

    #[test]
    fn laplace_sum_geometric_pair() {
        // F_B = e^(alpha p), alpha = -1, eta = 0.1: integral = eta/(1 - alpha eta)
        let eta = 0.1;
        let alpha = -1.0;
        let (val, _) =
            laplace_sum_fn(|p| c((alpha * p).exp(), 0.0), eta, 4.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(val.re, eta / (1.0 - alpha * eta), epsilon = 1e-8);
    }

    #[test]
    fn laplace_tail_check_fires() {
        let err = laplace_sum_fn(|_| c(1.0, 0.0), 0.5, 1.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, BorelError::TailNotNegligible { .. }));
    }

    #[test]
    fn contour_recovers_known_pairs() {
        // F(eta) = eta^2: F(1/z) = 1/z^2, inverse transform is p
        for p in [0.5f64, 1.0, 2.0] {
            let (val, _) = inverse_laplace_contour(
                |eta| eta * eta,
                1.0 / p.max(0.7),
                p,
                4.0e4,
                1e-7,
            )
            .unwrap();
            assert_abs_diff_eq!(val.re, p, epsilon = 2e-6);
            assert!(val.im.abs() < 1e-6);
        }
    }

    #[test]
    fn contour_truncation_error_fires() {
        let err = inverse_laplace_contour(|eta| eta / (1.0 + eta), 0.5, 1.0, 10.0, 1e-9)
            .unwrap_err();
        assert!(matches!(err, BorelError::ContourTruncationTooSmall { .. }));
    }

    #[test]
    fn growth_fit_recovers_factorial_and_geometric() {
        let fact: Vec<(usize, f64)> =
            (1..=10).map(|k| (k, (1..=k).map(|v| v as f64).product())).collect();
        let fit = growth_fit(&fact, None).unwrap();
        assert!((fit.tau_est - 1.0).abs() < 0.1, "tau {}", fit.tau_est);
        assert!((fit.c - 1.0).abs() < 0.1, "C {}", fit.c);

        let geo: Vec<(usize, f64)> = (1..=10).map(|k| (k, 2f64.powi(k as i32))).collect();
        let fit = growth_fit(&geo, None).unwrap();
        assert!(fit.tau_est.abs() < 0.1, "tau {}", fit.tau_est);
        assert!((fit.c - 2.0).abs() < 0.2, "C {}", fit.c);

        // envelope property holds after adjustment
        let fit = growth_fit(&fact, Some(1.0)).unwrap();
        for &(k, v) in &fact {
            let logfact: f64 = (1..=k).map(|x| (x as f64).ln()).sum();
            let bound = fit.d * fit.c.powi(k as i32) * logfact.exp();
            assert!(v <= bound * (1.0 + 1e-9), "k={k}: {v} > {bound}");
        }
    }

    #[test]
    fn insufficient_data_rejected() {
        let few = [(1usize, 1.0f64), (2, 2.0), (3, 6.0)];
        assert!(matches!(
            growth_fit(&few, None),
            Err(BorelError::InsufficientData { .. })
        ));
    }
}
