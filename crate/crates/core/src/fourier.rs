//! Trigonometric-polynomial algebra on `T^2 x T^s` and graded power series
//! in `eps = eta^2`.
//!
//! Component indices run `0..2+s`: indices 0,1 are the fast angles, indices
//! `2..2+s` the slow ones. The symbolic derivative rule is multiplication by
//! `i*nu_g` for a fast index and by `i*mu_(g-2)` for a slow index.

use crate::freq::FrequencyVector;
use nalgebra::DMatrix;
use num::complex::Complex64;
use std::collections::BTreeMap;

pub const PRUNE_REL_TOL: f64 = 1e-16;
pub const EQUILIBRIUM_TOL: f64 = 1e-12;
pub const HYPERBOLIC_MIN_EIG: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum FourierError {
    #[error("operand ranks are incompatible ({0} vs {1})")]
    RankMismatch(usize, usize),
    #[error("slow dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("effective potential is not hyperbolic at beta0 (min eigenvalue {min_eig:.3e})")]
    NotHyperbolic { min_eig: f64 },
    #[error("beta0 is not an equilibrium of the effective potential (|grad| = {grad_norm:.3e})")]
    EquilibriumViolated { grad_norm: f64 },
    #[error("coefficients are not conjugate-symmetric (worst defect {defect:.3e})")]
    RealityViolated { defect: f64 },
}

/// Fourier mode on `T^2 x T^s`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mode {
    pub nu: [i64; 2],
    pub mu: Vec<i64>,
}

impl Mode {
    pub fn psi(nu: [i64; 2]) -> Self {
        Mode { nu, mu: Vec::new() }
    }

    pub fn conj(&self) -> Self {
        Mode { nu: [-self.nu[0], -self.nu[1]], mu: self.mu.iter().map(|m| -m).collect() }
    }

    pub fn norm_inf(&self) -> i64 {
        self.nu
            .iter()
            .map(|v| v.abs())
            .chain(self.mu.iter().map(|v| v.abs()))
            .max()
            .unwrap_or(0)
    }

    /// `i * nu_g` or `i * mu_(g-2)`, the symbolic derivative factor.
    pub fn deriv_factor(&self, g: usize) -> Complex64 {
        let v = if g < 2 { self.nu[g] } else { self.mu[g - 2] };
        Complex64::new(0.0, v as f64)
    }
}

/// Dense little tensor with `rank` indices each of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dim: usize,
    pub rank: usize,
    pub data: Vec<Complex64>,
}

impl Tensor {
    pub fn zeros(dim: usize, rank: usize) -> Self {
        Tensor { dim, rank, data: vec![Complex64::new(0.0, 0.0); dim.pow(rank as u32)] }
    }

    pub fn scalar(c: Complex64) -> Self {
        Tensor { dim: 1, rank: 0, data: vec![c] }
    }

    pub fn vector(v: Vec<Complex64>) -> Self {
        Tensor { dim: v.len(), rank: 1, data: v }
    }

    pub fn as_scalar(&self) -> Complex64 {
        debug_assert_eq!(self.rank, 0);
        self.data[0]
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.data[self.flat(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: Complex64) {
        let i = self.flat(idx);
        self.data[i] = v;
    }

    fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&self, c: Complex64) -> Tensor {
        Tensor { dim: self.dim, rank: self.rank, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Finite Fourier sum with tensor coefficients: `sum_m T_m e^(i(nu.alpha + mu.beta))`.
#[derive(Debug, Clone)]
pub struct TrigPoly {
    /// Slow mode dimension of the *keys* (0 for pure psi-polynomials).
    pub s_modes: usize,
    /// Tensor index dimension (2+s for vector/tensor-valued polynomials).
    pub dim: usize,
    pub rank: usize,
    pub terms: BTreeMap<Mode, Tensor>,
}

impl TrigPoly {
    pub fn zero(s_modes: usize, dim: usize, rank: usize) -> Self {
        TrigPoly { s_modes, dim, rank, terms: BTreeMap::new() }
    }

    pub fn constant(s_modes: usize, c: Complex64) -> Self {
        let mut p = TrigPoly::zero(s_modes, 1, 0);
        p.add_term(Mode { nu: [0, 0], mu: vec![0; s_modes] }, Tensor::scalar(c));
        p
    }

    pub fn add_term(&mut self, mode: Mode, t: Tensor) {
        debug_assert_eq!(mode.mu.len(), self.s_modes);
        debug_assert_eq!(t.rank, self.rank);
        match self.terms.get_mut(&mode) {
            Some(existing) => existing.add_assign(&t),
            None => {
                self.terms.insert(mode, t);
            }
        }
    }

    pub fn coeff(&self, mode: &Mode) -> Option<&Tensor> {
        self.terms.get(mode)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|t| t.max_abs() == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|t| t.max_abs()).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        let mut out = self.clone();
        for (m, t) in &other.terms {
            out.add_term(m.clone(), t.clone());
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> TrigPoly {
        TrigPoly {
            s_modes: self.s_modes,
            dim: self.dim,
            rank: self.rank,
            terms: self.terms.iter().map(|(m, t)| (m.clone(), t.scale(c))).collect(),
        }
    }

    pub fn sub(&self, other: &TrigPoly) -> TrigPoly {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Drop terms below `PRUNE_REL_TOL` relative to the largest coefficient.
    pub fn prune(&mut self) {
        let cutoff = PRUNE_REL_TOL * self.max_abs();
        self.terms.retain(|_, t| t.max_abs() > cutoff);
    }

    /// Fourier product. One operand must be rank 0.
    pub fn mul(&self, other: &TrigPoly) -> Result<TrigPoly, FourierError> {
        if self.s_modes != other.s_modes {
            return Err(FourierError::DimensionMismatch(self.s_modes, other.s_modes));
        }
        let (scalar, tensor) = match (self.rank, other.rank) {
            (0, _) => (self, other),
            (_, 0) => (other, self),
            (a, b) => return Err(FourierError::RankMismatch(a, b)),
        };
        let mut out = TrigPoly::zero(tensor.s_modes, tensor.dim, tensor.rank);
        for (ma, ta) in &scalar.terms {
            let ca = ta.as_scalar();
            for (mb, tb) in &tensor.terms {
                let mode = Mode {
                    nu: [ma.nu[0] + mb.nu[0], ma.nu[1] + mb.nu[1]],
                    mu: ma.mu.iter().zip(&mb.mu).map(|(x, y)| x + y).collect(),
                };
                out.add_term(mode, tb.scale(ca));
            }
        }
        out.prune();
        Ok(out)
    }

    /// Symbolic derivative in direction `g` (0-based component index).
    pub fn diff(&self, g: usize) -> TrigPoly {
        let mut out = TrigPoly::zero(self.s_modes, self.dim, self.rank);
        for (m, t) in &self.terms {
            let f = m.deriv_factor(g);
            if f.im != 0.0 {
                out.add_term(m.clone(), t.scale(f));
            }
        }
        out
    }

    /// Gradient: prepends one index running over all `0..dim` directions.
    pub fn gradient(&self) -> TrigPoly {
        let dim = self.dim.max(2 + self.s_modes);
        let mut out = TrigPoly::zero(self.s_modes, dim, self.rank + 1);
        for (m, t) in &self.terms {
            let mut nt = Tensor::zeros(dim, self.rank + 1);
            let block = dim.pow(self.rank as u32);
            for g in 0..dim {
                let f = m.deriv_factor(g);
                if f.im == 0.0 {
                    continue;
                }
                for (j, v) in t.data.iter().enumerate() {
                    nt.data[g * block + j] = v * f;
                }
            }
            if nt.max_abs() > 0.0 {
                out.add_term(m.clone(), nt);
            }
        }
        out
    }

    /// Evaluate at a real point; angles split as `(alpha, beta)`.
    pub fn eval(&self, alpha: [f64; 2], beta: &[f64]) -> Tensor {
        let mut out = Tensor::zeros(self.dim.max(1), self.rank);
        for (m, t) in &self.terms {
            let mut phase = m.nu[0] as f64 * alpha[0] + m.nu[1] as f64 * alpha[1];
            for (mu, b) in m.mu.iter().zip(beta) {
                phase += *mu as f64 * b;
            }
            let e = Complex64::new(phase.cos(), phase.sin());
            for (o, v) in out.data.iter_mut().zip(&t.data) {
                *o += v * e;
            }
        }
        out
    }

    /// Largest conjugate-symmetry defect `|c(-m) - conj(c(m))|`.
    pub fn reality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (m, t) in &self.terms {
            let conj_mode = m.conj();
            match self.terms.get(&conj_mode) {
                None => worst = worst.max(t.max_abs()),
                Some(u) => {
                    for (a, b) in t.data.iter().zip(&u.data) {
                        worst = worst.max((a.conj() - b).norm());
                    }
                }
            }
        }
        worst
    }

    pub fn psi_support_bound(&self) -> i64 {
        self.terms.keys().map(|m| m.nu[0].abs().max(m.nu[1].abs())).max().unwrap_or(0)
    }
}

/// Restriction of `f` to its zero fast modes: the effective potential `f_0(beta)`.
pub fn effective_potential(f: &TrigPoly) -> TrigPoly {
    let mut out = TrigPoly::zero(f.s_modes, f.dim, f.rank);
    for (m, t) in &f.terms {
        if m.nu == [0, 0] {
            out.add_term(m.clone(), t.clone());
        }
    }
    out
}

/// `M0 = -Hess f_0(beta0)`, symmetrized; errors if any eigenvalue is not
/// safely positive.
pub fn hessian_at(f0: &TrigPoly, beta0: &[f64]) -> Result<DMatrix<f64>, FourierError> {
    let s = beta0.len();
    let mut m0 = DMatrix::<f64>::zeros(s, s);
    for i in 0..s {
        for j in 0..s {
            let d2 = f0.diff(2 + i).diff(2 + j);
            let v = d2.eval([0.0, 0.0], beta0).as_scalar();
            m0[(i, j)] += -v.re;
        }
    }
    let m0 = (&m0 + m0.transpose()) * 0.5;
    let eigs = m0.clone().symmetric_eigen().eigenvalues;
    let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_eig > HYPERBOLIC_MIN_EIG) {
        return Err(FourierError::NotHyperbolic { min_eig });
    }
    Ok(m0)
}

/// The system under study: frequency, perturbation and hyperbolic equilibrium.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub freq: FrequencyVector,
    pub s: usize,
    pub f: TrigPoly,
    pub beta0: Vec<f64>,
    pub m0: DMatrix<f64>,
    pub eta0: f64,
    /// Per fast-mode data for node factors: `nu -> [(mu, coeff * e^(i mu.beta0))]`.
    f_by_nu: BTreeMap<[i64; 2], Vec<(Vec<i64>, Complex64)>>,
    nu_support: Vec<[i64; 2]>,
}

impl SystemSpec {
    pub fn new(
        freq: FrequencyVector,
        s: usize,
        f: TrigPoly,
        beta0: Vec<f64>,
        eta0: f64,
    ) -> Result<Self, FourierError> {
        assert_eq!(f.rank, 0, "perturbation must be a scalar polynomial");
        assert_eq!(f.s_modes, s);
        assert_eq!(beta0.len(), s);
        let defect = f.reality_defect();
        if defect > 1e-12 * (1.0 + f.max_abs()) {
            return Err(FourierError::RealityViolated { defect });
        }
        let f0 = effective_potential(&f);
        let mut grad_norm: f64 = 0.0;
        for i in 0..s {
            let g = f0.diff(2 + i).eval([0.0, 0.0], &beta0).as_scalar();
            grad_norm = grad_norm.max(g.norm());
        }
        if grad_norm > EQUILIBRIUM_TOL {
            return Err(FourierError::EquilibriumViolated { grad_norm });
        }
        let m0 = hessian_at(&f0, &beta0)?;

        let mut f_by_nu: BTreeMap<[i64; 2], Vec<(Vec<i64>, Complex64)>> = BTreeMap::new();
        for (m, t) in &f.terms {
            let phase: f64 = m.mu.iter().zip(&beta0).map(|(mu, b)| *mu as f64 * b).sum();
            let eff = t.as_scalar() * Complex64::new(phase.cos(), phase.sin());
            f_by_nu.entry(m.nu).or_default().push((m.mu.clone(), eff));
        }
        let nu_support = f_by_nu.keys().cloned().collect();
        Ok(SystemSpec { freq, s, f, beta0, m0, eta0, f_by_nu, nu_support })
    }

    pub fn dim(&self) -> usize {
        2 + self.s
    }

    /// Fast-mode support of `f`.
    pub fn nu_support(&self) -> &[[i64; 2]] {
        &self.nu_support
    }

    pub fn degree(&self) -> i64 {
        self.nu_support.iter().map(|n| n[0].abs().max(n[1].abs())).max().unwrap_or(0)
    }

    pub fn f_terms_at_nu(&self, nu: [i64; 2]) -> Option<&Vec<(Vec<i64>, Complex64)>> {
        self.f_by_nu.get(&nu)
    }

    /// `M0` embedded in the full `(2+s) x (2+s)` block matrix (zero fast block).
    pub fn m0_full(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::<f64>::zeros(d, d);
        for i in 0..self.s {
            for j in 0..self.s {
                m[(2 + i, 2 + j)] = self.m0[(i, j)];
            }
        }
        m
    }
}

/// Formal power series in `eps = eta^2` with `TrigPoly` coefficients over
/// psi-modes only.
#[derive(Debug, Clone)]
pub struct EpsSeries {
    pub orders: Vec<TrigPoly>,
}

impl EpsSeries {
    pub fn zero(k_max: usize, dim: usize, rank: usize) -> Self {
        EpsSeries { orders: (0..=k_max).map(|_| TrigPoly::zero(0, dim, rank)).collect() }
    }

    pub fn k_max(&self) -> usize {
        self.orders.len() - 1
    }

    pub fn order(&self, k: usize) -> &TrigPoly {
        &self.orders[k]
    }

    pub fn add(&self, other: &EpsSeries) -> EpsSeries {
        let k = self.k_max().min(other.k_max());
        EpsSeries { orders: (0..=k).map(|i| self.orders[i].add(&other.orders[i])).collect() }
    }

    pub fn scale(&self, c: Complex64) -> EpsSeries {
        EpsSeries { orders: self.orders.iter().map(|p| p.scale(c)).collect() }
    }

    /// Truncated product of two scalar (rank-0) series.
    pub fn mul(&self, other: &EpsSeries) -> Result<EpsSeries, FourierError> {
        let k_max = self.k_max().min(other.k_max());
        let mut out = EpsSeries::zero(k_max, 1, 0);
        for i in 0..=k_max {
            if self.orders[i].terms.is_empty() {
                continue;
            }
            for j in 0..=(k_max - i) {
                if other.orders[j].terms.is_empty() {
                    continue;
                }
                let prod = self.orders[i].mul(&other.orders[j])?;
                out.orders[i + j] = out.orders[i + j].add(&prod);
            }
        }
        for o in &mut out.orders {
            o.prune();
        }
        Ok(out)
    }

    /// Extract one vector component as a scalar series.
    pub fn component(&self, g: usize) -> EpsSeries {
        let mut out = EpsSeries::zero(self.k_max(), 1, 0);
        for (k, p) in self.orders.iter().enumerate() {
            for (m, t) in &p.terms {
                let v = t.data[g];
                if v.norm() > 0.0 {
                    out.orders[k].add_term(m.clone(), Tensor::scalar(v));
                }
            }
        }
        out
    }

    /// Sum the series at a fixed `eps`, returning a single polynomial.
    pub fn eval_eps(&self, eps: f64) -> TrigPoly {
        let dim = self.orders[0].dim;
        let rank = self.orders[0].rank;
        let mut out = TrigPoly::zero(0, dim, rank);
        let mut w = 1.0;
        for p in &self.orders {
            out = out.add(&p.scale(Complex64::new(w, 0.0)));
            w *= eps;
        }
        out
    }

    pub fn max_abs_order(&self, k: usize) -> f64 {
        self.orders[k].max_abs()
    }
}

/// `exp` of a scalar series with vanishing order-0 term.
pub fn exp_series(phi: &EpsSeries, k_max: usize) -> EpsSeries {
    debug_assert!(phi.orders[0].is_zero(), "exp_series needs a series vanishing at order 0");
    let mut out = EpsSeries::zero(k_max, 1, 0);
    out.orders[0] = TrigPoly::constant(0, Complex64::new(1.0, 0.0));
    let mut term = out.clone();
    for m in 1..=k_max {
        term = term.mul(phi).unwrap();
        term = term.scale(Complex64::new(1.0 / m as f64, 0.0));
        out = out.add(&term);
    }
    out
}

/// The eps-series of `grad f(psi + a(psi), beta0 + b(psi))` through order
/// `k_max`, where `(a, b)` are the components of `h`.
pub fn compose_f(sys: &SystemSpec, h: &EpsSeries, k_max: usize) -> EpsSeries {
    let d = sys.dim();
    debug_assert!(h.orders[0].is_zero(), "conjugation must vanish at order 0");
    let mut out = EpsSeries::zero(k_max, d, 1);

    // Scalar component series of h, reused across f-terms.
    let comps: Vec<EpsSeries> = (0..d).map(|g| h.component(g)).collect();

    for (m, t) in &sys.f.terms {
        let c = t.as_scalar();
        let beta_phase: f64 = m.mu.iter().zip(&sys.beta0).map(|(mu, b)| *mu as f64 * b).sum();
        let c_eff = c * Complex64::new(beta_phase.cos(), beta_phase.sin());

        // Phi = i (nu.a + mu.b)
        let mut phi = EpsSeries::zero(k_max, 1, 0);
        for g in 0..d {
            let factor = m.deriv_factor(g);
            if factor.im == 0.0 {
                continue;
            }
            phi = phi.add(&comps[g].scale(factor));
        }
        let e = exp_series(&phi, k_max);

        for k in 0..=k_max {
            for (em, et) in &e.orders[k].terms {
                let shifted = Mode::psi([em.nu[0] + m.nu[0], em.nu[1] + m.nu[1]]);
                let base = c_eff * et.as_scalar();
                let mut vec = Tensor::zeros(d, 1);
                for g0 in 0..d {
                    vec.data[g0] = base * m.deriv_factor(g0);
                }
                if vec.max_abs() > 0.0 {
                    out.orders[k].add_term(shifted, vec);
                }
            }
        }
    }
    for o in &mut out.orders {
        o.prune();
    }
    out
}

/// Reference system: golden-mean frequency, `f = cos(beta) + cos(alpha1 + beta)
/// + cos(alpha2)`, `beta0 = 0`, `s = 1`.
pub fn golden_pendulum() -> SystemSpec {
    let freq = crate::freq::golden_frequency();
    let mut f = TrigPoly::zero(1, 1, 0);
    let half = Complex64::new(0.5, 0.0);
    for (nu, mu) in [([0i64, 0i64], 1i64), ([1, 0], 1), ([0, 1], 0)] {
        f.add_term(Mode { nu, mu: vec![mu] }, Tensor::scalar(half));
        f.add_term(Mode { nu: [-nu[0], -nu[1]], mu: vec![-mu] }, Tensor::scalar(half));
    }
    SystemSpec::new(freq, 1, f, vec![0.0], 0.1).expect("reference system is valid")
}
