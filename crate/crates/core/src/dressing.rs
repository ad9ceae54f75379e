//! Dressed propagators and self-energy matrices, in two resummation schemes.
//!
//! Scheme A assigns one propagator per scale:
//! `g^[n](x; eta) = eta^2 (x^2 I + M^[<=n](x; eta))^(-1)` with
//! `M^[<=n] = eta^2 M0 + sum_(j=1..n) M^[j]`, where `M^[j]` sums renormalized
//! self-energy clusters of maximal internal scale j-1, evaluated with the
//! propagators of scales below j. Scheme B iterates one global propagator:
//! `g^[k] = eta^2 (x^2 + M^[k](x; eta))^(-1)` where `M^[k]` sums the clusters
//! separated from the dressed line by at least three scales, evaluated with
//! the previous iterate; the flow freezes at `k = n` for `x` on scale `n`.
//!
//! All evaluations run over an abstract coefficient ring so that the same
//! code produces numeric values at fixed `eta` and truncated power series in
//! `eps = eta^2` (used to re-expand the resummed series for comparison with
//! the direct recursion).

use crate::fourier::{EpsSeries, Mode, SystemSpec, Tensor};
use crate::freq::{scale_of, FreqError, ScaleSequence};
use crate::qi::Qi;
use crate::trees::{
    assign_scales, enumerate_trees, find_resonances, DecoratedTree, Scheme, TreeCtx, TreeNode,
    SCHEME_B_SEPARATION,
};
use nalgebra::DMatrix;
use num::complex::Complex64;
use std::collections::{BTreeMap, HashMap};
use std::sync::RwLock;

pub const DEFAULT_K_SE: usize = 3;
pub const SCHEME_B_FIXED_POINT_TOL: f64 = 1e-14;
pub const SINGULAR_DENOMINATOR_TOL: f64 = 1e-14;

#[derive(Debug, thiserror::Error)]
pub enum DressingError {
    #[error("self-energy truncation K_se={0} below 2: no self-energy exists under eta^4")]
    TruncationExceeded(usize),
    #[error("singular propagator denominator: |det| = {det:.3e} < {floor:.3e}")]
    SingularDenominator { det: f64, floor: f64 },
    #[error(transparent)]
    Scale(#[from] FreqError),
}

// ---------------------------------------------------------------------------
// Coefficient rings
// ---------------------------------------------------------------------------

/// Ring of coefficients for tree and cluster values, with the inversion and
/// memo hooks each concrete ring needs.
pub trait Ring: Sized {
    type El: Clone + std::fmt::Debug;
    fn zero(&self) -> Self::El;
    fn add(&self, a: &Self::El, b: &Self::El) -> Self::El;
    fn mul(&self, a: &Self::El, b: &Self::El) -> Self::El;
    fn from_c(&self, c: Complex64) -> Self::El;
    fn scale(&self, a: &Self::El, c: Complex64) -> Self::El;
    /// The expansion element: `eta^2` numerically, the monomial for series.
    fn eps(&self) -> Self::El;
    fn is_exact_zero(&self, a: &Self::El) -> bool;
    /// Inverse of `x^2 I + M` (`M` given flat row-major, vanishing at eps^0
    /// in the series case).
    fn inverse(&self, m: &[Self::El], x2: f64, d: usize) -> Result<Vec<Self::El>, DressingError>;
    fn fetch_a(&self, dr: &Dressing<'_>, n: i32, x: &Qi, xf: f64) -> Vec<Self::El>;
    fn fetch_b(&self, dr: &Dressing<'_>, k_eff: i32, x: &Qi, xf: f64, n_x: i32) -> Vec<Self::El>;
}

/// Numeric evaluation at fixed eta.
#[derive(Clone, Copy)]
pub struct NumericRing {
    pub eta: f64,
}

impl Ring for NumericRing {
    type El = Complex64;
    fn zero(&self) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn add(&self, a: &Complex64, b: &Complex64) -> Complex64 {
        a + b
    }
    fn mul(&self, a: &Complex64, b: &Complex64) -> Complex64 {
        a * b
    }
    fn from_c(&self, c: Complex64) -> Complex64 {
        c
    }
    fn scale(&self, a: &Complex64, c: Complex64) -> Complex64 {
        a * c
    }
    fn eps(&self) -> Complex64 {
        Complex64::new(self.eta * self.eta, 0.0)
    }
    fn is_exact_zero(&self, a: &Complex64) -> bool {
        a.re == 0.0 && a.im == 0.0
    }

    fn inverse(&self, m: &[Complex64], x2: f64, d: usize) -> Result<Vec<Complex64>, DressingError> {
        let mut a = DMatrix::<Complex64>::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                a[(i, j)] = m[i * d + j];
            }
            a[(i, i)] += Complex64::new(x2, 0.0);
        }
        let det = a.determinant().norm();
        let floor = SINGULAR_DENOMINATOR_TOL * x2.powi(d as i32);
        if det < floor {
            return Err(DressingError::SingularDenominator { det, floor });
        }
        let inv = a.try_inverse().ok_or(DressingError::SingularDenominator { det, floor })?;
        let mut out = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = inv[(i, j)];
            }
        }
        Ok(out)
    }

    fn fetch_a(&self, dr: &Dressing<'_>, n: i32, x: &Qi, xf: f64) -> Vec<Complex64> {
        let key = (n, x.parts(), self.eta.to_bits());
        if let Some(v) = dr.memo_a_num.read().unwrap().get(&key) {
            return v.clone();
        }
        let v = dr.m_le_n(self, n, x, xf);
        dr.memo_a_num.write().unwrap().entry(key).or_insert_with(|| v.clone());
        v
    }

    fn fetch_b(&self, dr: &Dressing<'_>, k_eff: i32, x: &Qi, xf: f64, n_x: i32) -> Vec<Complex64> {
        let key = (k_eff, x.parts(), self.eta.to_bits());
        if let Some(v) = dr.memo_b_num.read().unwrap().get(&key) {
            return v.clone();
        }
        let v = dr.m_b(self, k_eff, x, xf, n_x);
        dr.memo_b_num.write().unwrap().entry(key).or_insert_with(|| v.clone());
        v
    }
}

/// Truncated power series in eps with complex coefficients; fixed length.
#[derive(Clone, Copy)]
pub struct SeriesRing {
    pub k_max: usize,
}

pub type EpsPoly = Vec<Complex64>;

impl Ring for SeriesRing {
    type El = EpsPoly;
    fn zero(&self) -> EpsPoly {
        vec![Complex64::new(0.0, 0.0); self.k_max + 1]
    }
    fn add(&self, a: &EpsPoly, b: &EpsPoly) -> EpsPoly {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }
    fn mul(&self, a: &EpsPoly, b: &EpsPoly) -> EpsPoly {
        let mut out = self.zero();
        for (i, x) in a.iter().enumerate() {
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                if i + j > self.k_max {
                    break;
                }
                out[i + j] += x * y;
            }
        }
        out
    }
    fn from_c(&self, c: Complex64) -> EpsPoly {
        let mut v = self.zero();
        v[0] = c;
        v
    }
    fn scale(&self, a: &EpsPoly, c: Complex64) -> EpsPoly {
        a.iter().map(|x| x * c).collect()
    }
    fn eps(&self) -> EpsPoly {
        let mut v = self.zero();
        if self.k_max >= 1 {
            v[1] = Complex64::new(1.0, 0.0);
        }
        v
    }
    fn is_exact_zero(&self, a: &EpsPoly) -> bool {
        a.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    fn inverse(&self, m: &[EpsPoly], x2: f64, d: usize) -> Result<Vec<EpsPoly>, DressingError> {
        // A = x2 I + M with M starting at order >= 1; invert order by order:
        // B_0 = I/x2, B_p = -(1/x2) sum_(q=1..p) M_q B_(p-q).
        let kk = self.k_max;
        let zero = Complex64::new(0.0, 0.0);
        let mut b: Vec<Vec<Complex64>> = vec![vec![zero; d * d]; kk + 1];
        for i in 0..d {
            b[0][i * d + i] = Complex64::new(1.0 / x2, 0.0);
        }
        for p in 1..=kk {
            let mut cp = vec![zero; d * d];
            for q in 1..=p {
                for i in 0..d {
                    for l in 0..d {
                        let a_il = m[i * d + l][q];
                        if a_il.re == 0.0 && a_il.im == 0.0 {
                            continue;
                        }
                        for j in 0..d {
                            cp[i * d + j] += a_il * b[p - q][l * d + j];
                        }
                    }
                }
            }
            for (t, c) in b[p].iter_mut().zip(&cp) {
                *t = -c / x2;
            }
        }
        let mut out = vec![vec![zero; kk + 1]; d * d];
        for p in 0..=kk {
            for e in 0..d * d {
                out[e][p] = b[p][e];
            }
        }
        Ok(out)
    }

    fn fetch_a(&self, dr: &Dressing<'_>, n: i32, x: &Qi, xf: f64) -> Vec<EpsPoly> {
        let key = (n, x.parts(), self.k_max);
        if let Some(v) = dr.memo_a_ser.read().unwrap().get(&key) {
            return v.clone();
        }
        let v = dr.m_le_n(self, n, x, xf);
        dr.memo_a_ser.write().unwrap().entry(key).or_insert_with(|| v.clone());
        v
    }

    fn fetch_b(&self, dr: &Dressing<'_>, k_eff: i32, x: &Qi, xf: f64, n_x: i32) -> Vec<EpsPoly> {
        let key = (k_eff, x.parts(), self.k_max);
        if let Some(v) = dr.memo_b_ser.read().unwrap().get(&key) {
            return v.clone();
        }
        let v = dr.m_b(self, k_eff, x, xf, n_x);
        dr.memo_b_ser.write().unwrap().entry(key).or_insert_with(|| v.clone());
        v
    }
}

// Small dense matrix/vector helpers over a ring (flat row-major d x d).

fn mat_zero<R: Ring>(ring: &R, d: usize) -> Vec<R::El> {
    vec![ring.zero(); d * d]
}

fn mat_add<R: Ring>(ring: &R, a: &[R::El], b: &[R::El]) -> Vec<R::El> {
    a.iter().zip(b).map(|(x, y)| ring.add(x, y)).collect()
}

fn mat_mul<R: Ring>(ring: &R, d: usize, a: &[R::El], b: &[R::El]) -> Vec<R::El> {
    let mut out = mat_zero(ring, d);
    for i in 0..d {
        for k in 0..d {
            let aik = &a[i * d + k];
            if ring.is_exact_zero(aik) {
                continue;
            }
            for j in 0..d {
                let p = ring.mul(aik, &b[k * d + j]);
                out[i * d + j] = ring.add(&out[i * d + j], &p);
            }
        }
    }
    out
}

fn mat_vec<R: Ring>(ring: &R, d: usize, a: &[R::El], v: &[R::El]) -> Vec<R::El> {
    let mut out = vec![ring.zero(); d];
    for i in 0..d {
        for j in 0..d {
            let p = ring.mul(&a[i * d + j], &v[j]);
            out[i] = ring.add(&out[i], &p);
        }
    }
    out
}

fn mat_from_real<R: Ring>(ring: &R, m: &DMatrix<f64>) -> Vec<R::El> {
    let d = m.nrows();
    let mut out = mat_zero(ring, d);
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = ring.from_c(Complex64::new(m[(i, j)], 0.0));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Ring-generic node contractions
// ---------------------------------------------------------------------------

fn node_contract_ring<R: Ring>(
    ring: &R,
    sys: &SystemSpec,
    nu: [i64; 2],
    children: &[&[R::El]],
) -> Option<Vec<R::El>> {
    let d = sys.dim();
    let terms = sys.f_terms_at_nu(nu)?;
    let i_unit = Complex64::new(0.0, 1.0);
    let mut out = vec![ring.zero(); d];
    for (mu, ceff) in terms {
        let mut prod = ring.from_c(*ceff);
        for u in children {
            let mut dot = ring.zero();
            for (g, uv) in u.iter().enumerate() {
                let w = if g < 2 { nu[g] as f64 } else { mu[g - 2] as f64 };
                if w != 0.0 {
                    dot = ring.add(&dot, &ring.scale(uv, Complex64::new(w, 0.0)));
                }
            }
            prod = ring.mul(&prod, &ring.scale(&dot, i_unit));
        }
        for (g0, o) in out.iter_mut().enumerate() {
            let dg = if g0 < 2 { nu[g0] as f64 } else { mu[g0 - 2] as f64 };
            if dg != 0.0 {
                *o = ring.add(o, &ring.scale(&prod, i_unit * dg));
            }
        }
    }
    Some(out)
}

/// Contraction of a path node: pendant children as vectors plus at most one
/// matrix-valued child (the chain from the entering side). Returns the
/// matrix `[g0][g_free]`; with no matrix child the free slot is the node's
/// own second derivative index (entry node case).
fn node_contract_path<R: Ring>(
    ring: &R,
    sys: &SystemSpec,
    nu: [i64; 2],
    pendants: &[&[R::El]],
    mat_child: Option<&[R::El]>,
) -> Option<Vec<R::El>> {
    let d = sys.dim();
    let terms = sys.f_terms_at_nu(nu)?;
    let i_unit = Complex64::new(0.0, 1.0);
    let mut out = mat_zero(ring, d);
    for (mu, ceff) in terms {
        let mut prod = ring.from_c(*ceff);
        for u in pendants {
            let mut dot = ring.zero();
            for (g, uv) in u.iter().enumerate() {
                let w = if g < 2 { nu[g] as f64 } else { mu[g - 2] as f64 };
                if w != 0.0 {
                    dot = ring.add(&dot, &ring.scale(uv, Complex64::new(w, 0.0)));
                }
            }
            prod = ring.mul(&prod, &ring.scale(&dot, i_unit));
        }
        match mat_child {
            Some(mat) => {
                // dot_col[gf] = i sum_g D_g mat[g][gf]
                let mut dot_col = vec![ring.zero(); d];
                for g in 0..d {
                    let w = if g < 2 { nu[g] as f64 } else { mu[g - 2] as f64 };
                    if w == 0.0 {
                        continue;
                    }
                    for (gf, dc) in dot_col.iter_mut().enumerate() {
                        *dc = ring.add(dc, &ring.scale(&mat[g * d + gf], i_unit * w));
                    }
                }
                for g0 in 0..d {
                    let dg0 = if g0 < 2 { nu[g0] as f64 } else { mu[g0 - 2] as f64 };
                    if dg0 == 0.0 {
                        continue;
                    }
                    let front = ring.scale(&prod, i_unit * dg0);
                    for gf in 0..d {
                        let term = ring.mul(&front, &dot_col[gf]);
                        out[g0 * d + gf] = ring.add(&out[g0 * d + gf], &term);
                    }
                }
            }
            None => {
                for g0 in 0..d {
                    let dg0 = if g0 < 2 { nu[g0] as f64 } else { mu[g0 - 2] as f64 };
                    if dg0 == 0.0 {
                        continue;
                    }
                    for gf in 0..d {
                        let dgf = if gf < 2 { nu[gf] as f64 } else { mu[gf - 2] as f64 };
                        if dgf == 0.0 {
                            continue;
                        }
                        let term = ring.scale(&prod, (i_unit * dg0) * (i_unit * dgf));
                        out[g0 * d + gf] = ring.add(&out[g0 * d + gf], &term);
                    }
                }
            }
        }
    }
    Some(out)
}

// ---------------------------------------------------------------------------
// Proto-clusters (self-energy structures keyed on the entering divisor)
// ---------------------------------------------------------------------------

/// A self-energy cluster shape: a chain of path nodes from the entry point
/// to the exit node, each carrying a multiset of pendant subtrees. All mode
/// labels sum to zero, so the entering and exiting momenta agree and the
/// value depends on the entering momentum only through its divisor `x`.
#[derive(Debug, Clone)]
struct ProtoCluster {
    path_modes: Vec<[i64; 2]>,
    /// Pendant pool indices per path node (sorted, with repetitions).
    pendants: Vec<Vec<usize>>,
    /// Product of 1/mult! over repeated pendants.
    weight: f64,
    /// Integer shift of path line i (mode sums through it), i < L.
    partial: Vec<[i64; 2]>,
    /// eta-power: 1 + path lines + pendant nonzero lines.
    order: usize,
}

struct PendantPool {
    trees: Vec<DecoratedTree>,
    max_scale: Vec<i32>,
    resonant_a: Vec<bool>,
    resonant_b: Vec<bool>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Owns the scale sequence reference, the proto-cluster catalogue and the
/// memo tables for self-energy matrices in both schemes.
pub struct Dressing<'a> {
    pub sys: &'a SystemSpec,
    pub seq: &'a ScaleSequence,
    pub k_se: usize,
    ctx: TreeCtx<'a>,
    pool: PendantPool,
    protos: Vec<ProtoCluster>,
    memo_a_num: RwLock<HashMap<(i32, (i128, i128, i128, i128), u64), Vec<Complex64>>>,
    memo_a_ser: RwLock<HashMap<(i32, (i128, i128, i128, i128), usize), Vec<EpsPoly>>>,
    memo_b_num: RwLock<HashMap<(i32, (i128, i128, i128, i128), u64), Vec<Complex64>>>,
    memo_b_ser: RwLock<HashMap<(i32, (i128, i128, i128, i128), usize), Vec<EpsPoly>>>,
}

impl<'a> Dressing<'a> {
    pub fn new(
        sys: &'a SystemSpec,
        seq: &'a ScaleSequence,
        k_se: usize,
    ) -> Result<Self, DressingError> {
        if k_se < 2 {
            return Err(DressingError::TruncationExceeded(k_se));
        }
        let ctx = TreeCtx::new(sys);
        let pool = build_pendant_pool(sys, seq, k_se)?;
        let protos = enumerate_protos(sys, &pool, k_se);
        Ok(Dressing {
            sys,
            seq,
            k_se,
            ctx,
            pool,
            protos,
            memo_a_num: RwLock::new(HashMap::new()),
            memo_a_ser: RwLock::new(HashMap::new()),
            memo_b_num: RwLock::new(HashMap::new()),
            memo_b_ser: RwLock::new(HashMap::new()),
        })
    }

    pub fn proto_cluster_count(&self) -> usize {
        self.protos.len()
    }

    /// `M^[<=n](x; .)` over the given ring (scheme A).
    fn m_le_n<R: Ring>(&self, ring: &R, n: i32, x: &Qi, xf: f64) -> Vec<R::El> {
        let m0 = mat_from_real(ring, &self.sys.m0_full());
        let eps = ring.eps();
        let mut total: Vec<R::El> = m0.iter().map(|e| ring.mul(&eps, e)).collect();
        for j in 1..=n {
            let mj = self.m_j(ring, j, x, xf);
            total = mat_add(ring, &total, &mj);
        }
        total
    }

    /// `M^[j](x; .)`, j >= 1: renormalized self-energy clusters with maximal
    /// internal scale exactly j-1, inner lines dressed on scales < j.
    fn m_j<R: Ring>(&self, ring: &R, j: i32, x: &Qi, xf: f64) -> Vec<R::El> {
        let d = self.sys.dim();
        let mut total = mat_zero(ring, d);
        for pi in 0..self.protos.len() {
            if let Some(v) = self.eval_proto::<R>(ring, pi, x, xf, Scheme::A, Some(j), 0) {
                total = mat_add(ring, &total, &v);
            }
        }
        total
    }

    /// `M^[k](x; .)` of the iterative scheme; `k_eff` is already capped at
    /// the scale of `x` (the frozen value).
    fn m_b<R: Ring>(&self, ring: &R, k_eff: i32, x: &Qi, xf: f64, _n_x: i32) -> Vec<R::El> {
        let d = self.sys.dim();
        if k_eff < 1 {
            return mat_zero(ring, d);
        }
        let mut total = mat_zero(ring, d);
        for pi in 0..self.protos.len() {
            if let Some(v) = self.eval_proto::<R>(ring, pi, x, xf, Scheme::B, None, k_eff) {
                total = mat_add(ring, &total, &v);
            }
        }
        total
    }

    /// Evaluate one proto-cluster at entering divisor `x` under the scheme's
    /// admissibility filters. Scheme A with `Some(j)`: maximal internal scale
    /// must equal j-1, inner lines dressed at their own scales. Scheme B at
    /// iteration `b_k`: internal scales capped at `min(b_k, n_x) - 3`, inner
    /// lines dressed with the previous iterate.
    fn eval_proto<R: Ring>(
        &self,
        ring: &R,
        pi: usize,
        x: &Qi,
        xf: f64,
        scheme: Scheme,
        scheme_a_j: Option<i32>,
        b_k: i32,
    ) -> Option<Vec<R::El>> {
        let _ = xf;
        let proto = &self.protos[pi];
        let d = self.sys.dim();

        match scheme {
            Scheme::A => {
                if proto.order < 2 || proto.order > self.k_se {
                    return None;
                }
            }
            Scheme::B => {
                if proto.order > self.k_se {
                    return None;
                }
            }
        }

        // Path line divisors and scales; track the maximal internal scale.
        let l = proto.path_modes.len() - 1;
        let mut path_divisors: Vec<(Qi, f64)> = Vec::with_capacity(l);
        let mut path_scales: Vec<i32> = Vec::with_capacity(l);
        let mut max_internal: i32 = -1;
        for i in 0..l {
            let shift = self.ctx.divisor(proto.partial[i]);
            let xd = x.add(&shift.0);
            let sc = scale_of(&xd, false, self.seq).ok()?;
            max_internal = max_internal.max(sc);
            path_divisors.push((xd.clone(), xd.to_f64()));
            path_scales.push(sc);
        }
        for pends in &proto.pendants {
            for &pid in pends {
                max_internal = max_internal.max(self.pool.max_scale[pid]);
            }
        }

        // Renormalized class: no resonances inside pendants...
        for pends in &proto.pendants {
            for &pid in pends {
                let resonant = match scheme {
                    Scheme::A => self.pool.resonant_a[pid],
                    Scheme::B => self.pool.resonant_b[pid],
                };
                if resonant {
                    return None;
                }
            }
        }
        // ...and no single-node resonances on the path.
        for i in 1..l {
            if proto.path_modes[i] == [0, 0] && proto.pendants[i].is_empty() {
                let through_scale = path_scales[i - 1];
                let excluded = match scheme {
                    Scheme::A => true,
                    Scheme::B => through_scale >= -1 + SCHEME_B_SEPARATION,
                };
                if excluded {
                    return None;
                }
            }
        }

        // Scale admissibility.
        match scheme {
            Scheme::A => {
                let j = scheme_a_j.unwrap();
                if max_internal != j - 1 {
                    return None;
                }
            }
            Scheme::B => {
                let n_x = scale_of(x, false, self.seq).ok()?;
                if max_internal > b_k.min(n_x) - SCHEME_B_SEPARATION {
                    return None;
                }
            }
        }

        // Pendant values.
        let mut pendant_vals: Vec<Vec<Vec<R::El>>> = Vec::with_capacity(proto.pendants.len());
        for pends in &proto.pendants {
            let mut vals = Vec::with_capacity(pends.len());
            for &pid in pends {
                let v = self.eval_tree::<R>(ring, &self.pool.trees[pid], scheme, b_k - 1).ok()?;
                vals.push(v);
            }
            pendant_vals.push(vals);
        }

        // Chain from the entry node to the exit node.
        let mut mat: Option<Vec<R::El>> = None;
        for i in 0..=l {
            let pv: Vec<&[R::El]> = pendant_vals[i].iter().map(|v| v.as_slice()).collect();
            let contracted =
                node_contract_path(ring, self.sys, proto.path_modes[i], &pv, mat.as_deref())?;
            if i < l {
                let (xd, xdf) = &path_divisors[i];
                let g = match scheme {
                    Scheme::A => self.g_matrix::<R>(ring, xd, *xdf, path_scales[i]).ok()?,
                    Scheme::B => self.g_matrix_b::<R>(ring, xd, *xdf, b_k - 1).ok()?,
                };
                mat = Some(mat_mul(ring, d, &g, &contracted));
            } else {
                mat = Some(contracted);
            }
        }
        let mat = mat.unwrap();
        let eps = ring.eps();
        let pref = ring.scale(&eps, Complex64::new(-proto.weight, 0.0));
        let out: Vec<R::El> = mat.iter().map(|e| ring.mul(&pref, e)).collect();
        if out.iter().all(|e| ring.is_exact_zero(e)) {
            None
        } else {
            Some(out)
        }
    }

    /// Scheme A propagator: `g^[n] = eps (x^2 I + M^[<=n])^(-1)`.
    fn g_matrix<R: Ring>(
        &self,
        ring: &R,
        x: &Qi,
        xf: f64,
        scale: i32,
    ) -> Result<Vec<R::El>, DressingError> {
        let d = self.sys.dim();
        if scale < 0 {
            return Ok(self.gm1_matrix(ring));
        }
        let m = ring.fetch_a(self, scale, x, xf);
        let inv = ring.inverse(&m, xf * xf, d)?;
        let eps = ring.eps();
        Ok(inv.iter().map(|e| ring.mul(&eps, e)).collect())
    }

    /// Scheme B propagator at iteration `k_iter` (`k_iter <= 0` is bare).
    fn g_matrix_b<R: Ring>(
        &self,
        ring: &R,
        x: &Qi,
        xf: f64,
        k_iter: i32,
    ) -> Result<Vec<R::El>, DressingError> {
        let d = self.sys.dim();
        let n_x = scale_of(x, false, self.seq)?;
        let m = if k_iter <= 0 {
            mat_zero(ring, d)
        } else {
            ring.fetch_b(self, k_iter.min(n_x), x, xf, n_x)
        };
        let inv = ring.inverse(&m, xf * xf, d)?;
        let eps = ring.eps();
        Ok(inv.iter().map(|e| ring.mul(&eps, e)).collect())
    }

    fn gm1_matrix<R: Ring>(&self, ring: &R) -> Vec<R::El> {
        let d = self.sys.dim();
        let mut inv = DMatrix::<f64>::zeros(d, d);
        let m0inv = self.sys.m0.clone().try_inverse().expect("M0 invertible");
        for i in 0..self.sys.s {
            for j in 0..self.sys.s {
                inv[(2 + i, 2 + j)] = m0inv[(i, j)];
            }
        }
        mat_from_real(ring, &inv)
    }

    /// Evaluate a decorated tree with dressed propagators. `b_k` selects the
    /// scheme-B iteration for all lines; ignored in scheme A.
    pub fn eval_tree<R: Ring>(
        &self,
        ring: &R,
        tree: &DecoratedTree,
        scheme: Scheme,
        b_k: i32,
    ) -> Result<Vec<R::El>, DressingError> {
        fn rec<R: Ring>(
            dr: &Dressing<'_>,
            ring: &R,
            tree: &DecoratedTree,
            i: usize,
            scheme: Scheme,
            b_k: i32,
        ) -> Result<Vec<R::El>, DressingError> {
            let d = dr.sys.dim();
            let mut child_vals: Vec<Vec<R::El>> = Vec::new();
            for &c in &tree.nodes[i].children {
                child_vals.push(rec(dr, ring, tree, c, scheme, b_k)?);
            }
            let refs: Vec<&[R::El]> = child_vals.iter().map(|v| v.as_slice()).collect();
            let contracted = match node_contract_ring(ring, dr.sys, tree.nodes[i].mode, &refs) {
                Some(v) => v,
                None => return Ok(vec![ring.zero(); d]),
            };
            let momentum = tree.nodes[i].momentum;
            let g = if momentum == [0, 0] {
                dr.gm1_matrix(ring)
            } else {
                let (x, xf) = dr.ctx.divisor(momentum);
                match scheme {
                    Scheme::A => {
                        let sc = scale_of(&x, false, dr.seq)?;
                        dr.g_matrix(ring, &x, xf, sc)?
                    }
                    Scheme::B => dr.g_matrix_b(ring, &x, xf, b_k)?,
                }
            };
            Ok(mat_vec(ring, d, &g, &contracted))
        }
        let v = rec(self, ring, tree, 0, scheme, b_k)?;
        Ok(v.iter().map(|e| ring.scale(e, Complex64::new(tree.weight, 0.0))).collect())
    }

    // -- public numeric API --------------------------------------------------

    /// `M^[<=n](x; eta)` as a complex matrix (scheme A).
    pub fn build_m_le(&self, n: i32, x: &Qi, eta: f64) -> DMatrix<Complex64> {
        let ring = NumericRing { eta };
        let xf = x.to_f64();
        flat_to_dmatrix(&ring.fetch_a(self, n, x, xf), self.sys.dim())
    }

    /// Scheme B matrix at a fixed iteration index.
    pub fn build_m_b(&self, k_iter: i32, x: &Qi, eta: f64) -> DMatrix<Complex64> {
        let ring = NumericRing { eta };
        let xf = x.to_f64();
        let n_x = scale_of(x, false, self.seq).expect("divisor in range");
        flat_to_dmatrix(&ring.fetch_b(self, k_iter.min(n_x), x, xf, n_x), self.sys.dim())
    }

    /// Iterate scheme B to its fixed point, reporting the stop index.
    pub fn build_m_b_fixed(&self, x: &Qi, eta: f64) -> (DMatrix<Complex64>, i32) {
        let ring = NumericRing { eta };
        let xf = x.to_f64();
        let n_x = scale_of(x, false, self.seq).expect("divisor in range");
        let mut prev = ring.fetch_b(self, 1.min(n_x), x, xf, n_x);
        let mut k = 1;
        while k < n_x {
            let next = ring.fetch_b(self, (k + 1).min(n_x), x, xf, n_x);
            let diff: f64 =
                prev.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prev = next;
            k += 1;
            if diff < SCHEME_B_FIXED_POINT_TOL {
                break;
            }
        }
        (flat_to_dmatrix(&prev, self.sys.dim()), k)
    }

    /// Dressed propagator at the line's own scale (scheme A) or the frozen
    /// scheme-B iterate.
    pub fn dressed_propagator(
        &self,
        scheme: Scheme,
        x: &Qi,
        eta: f64,
    ) -> Result<DMatrix<Complex64>, DressingError> {
        let ring = NumericRing { eta };
        let xf = x.to_f64();
        let flat = match scheme {
            Scheme::A => {
                let sc = scale_of(x, false, self.seq)?;
                self.g_matrix(&ring, x, xf, sc)?
            }
            Scheme::B => {
                let n_x = scale_of(x, false, self.seq)?;
                self.g_matrix_b(&ring, x, xf, n_x)?
            }
        };
        Ok(flat_to_dmatrix(&flat, self.sys.dim()))
    }
}

fn flat_to_dmatrix(flat: &[Complex64], d: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(d, d, |i, j| flat[i * d + j])
}

// ---------------------------------------------------------------------------
// Pendant pool and proto-cluster enumeration
// ---------------------------------------------------------------------------

fn build_pendant_pool(
    sys: &SystemSpec,
    seq: &ScaleSequence,
    k_se: usize,
) -> Result<PendantPool, DressingError> {
    let budget = k_se - 1;
    let mut trees = Vec::new();
    for m in 1..=(2 * budget + 1) {
        for t in enumerate_trees(sys, m, None) {
            // order-0 pendants (all lines at zero momentum) vanish with the
            // equilibrium gradient and would never consume budget
            if t.eps_order >= 1 && t.eps_order <= budget {
                trees.push(t);
            }
        }
    }
    let mut max_scale = Vec::with_capacity(trees.len());
    let mut resonant_a = Vec::with_capacity(trees.len());
    let mut resonant_b = Vec::with_capacity(trees.len());
    for t in &trees {
        let scaled = assign_scales(t, sys, seq)?;
        max_scale.push(scaled.scales.iter().cloned().max().unwrap_or(-1));
        let res = find_resonances(&scaled);
        resonant_a.push(res.iter().any(|r| r.resummed_in(Scheme::A)));
        resonant_b.push(res.iter().any(|r| r.resummed_in(Scheme::B)));
    }
    Ok(PendantPool { trees, max_scale, resonant_a, resonant_b })
}

fn enumerate_protos(sys: &SystemSpec, pool: &PendantPool, k_se: usize) -> Vec<ProtoCluster> {
    let mut out = Vec::new();
    let modes: Vec<[i64; 2]> = sys.nu_support().to_vec();
    for l in 0..=(k_se - 1) {
        let mut path = vec![[0i64, 0i64]; l + 1];
        assign_path(pool, &modes, &mut path, 0, l, k_se, &mut out);
    }
    out
}

fn assign_path(
    pool: &PendantPool,
    modes: &[[i64; 2]],
    path: &mut Vec<[i64; 2]>,
    idx: usize,
    l: usize,
    k_se: usize,
    out: &mut Vec<ProtoCluster>,
) {
    if idx > l {
        let budget = k_se - 1 - l;
        let mut pendants: Vec<Vec<usize>> = vec![Vec::new(); l + 1];
        attach_pendants(pool, path, 0, budget, &mut pendants, out, l);
        return;
    }
    for &m in modes {
        path[idx] = m;
        assign_path(pool, modes, path, idx + 1, l, k_se, out);
    }
}

/// Distribute pendant multisets over path nodes within the nonzero-line
/// budget; pendant ids chosen non-increasing per node for canonical order.
fn attach_pendants(
    pool: &PendantPool,
    path: &[[i64; 2]],
    node_idx: usize,
    budget: usize,
    pendants: &mut Vec<Vec<usize>>,
    out: &mut Vec<ProtoCluster>,
    l: usize,
) {
    if node_idx > l {
        finalize_proto(pool, path, pendants, out, l);
        return;
    }
    fn rec(
        pool: &PendantPool,
        path: &[[i64; 2]],
        node_idx: usize,
        budget: usize,
        start: usize,
        pendants: &mut Vec<Vec<usize>>,
        out: &mut Vec<ProtoCluster>,
        l: usize,
    ) {
        attach_pendants(pool, path, node_idx + 1, budget, pendants, out, l);
        for pid in start..pool.trees.len() {
            let cost = pool.trees[pid].eps_order;
            if cost > budget {
                continue;
            }
            pendants[node_idx].push(pid);
            rec(pool, path, node_idx, budget - cost, pid, pendants, out, l);
            pendants[node_idx].pop();
        }
    }
    rec(pool, path, node_idx, budget, 0, pendants, out, l);
}

fn finalize_proto(
    pool: &PendantPool,
    path: &[[i64; 2]],
    pendants: &Vec<Vec<usize>>,
    out: &mut Vec<ProtoCluster>,
    l: usize,
) {
    let mut total = [0i64, 0i64];
    for (i, m) in path.iter().enumerate() {
        total[0] += m[0];
        total[1] += m[1];
        for &pid in &pendants[i] {
            let pm = pool.trees[pid].root_momentum();
            total[0] += pm[0];
            total[1] += pm[1];
        }
    }
    if total != [0, 0] {
        return;
    }
    let mut order = 1 + l;
    for pends in pendants.iter() {
        for &pid in pends {
            order += pool.trees[pid].eps_order;
        }
    }
    let mut partial = Vec::with_capacity(l);
    let mut acc = [0i64, 0i64];
    for i in 0..l {
        acc[0] += path[i][0];
        acc[1] += path[i][1];
        for &pid in &pendants[i] {
            let pm = pool.trees[pid].root_momentum();
            acc[0] += pm[0];
            acc[1] += pm[1];
        }
        partial.push(acc);
    }
    let mut weight = 1.0;
    for pends in pendants.iter() {
        if pends.is_empty() {
            continue;
        }
        let mut run = 1usize;
        for w in pends.windows(2) {
            if w[0] == w[1] {
                run += 1;
            } else {
                weight /= factorial(run);
                run = 1;
            }
        }
        weight /= factorial(run);
    }
    out.push(ProtoCluster {
        path_modes: path.to_vec(),
        pendants: pendants.clone(),
        weight,
        partial,
        order,
    });
}

// ---------------------------------------------------------------------------
// Resummed tree sums: approximants and eps re-expansion
// ---------------------------------------------------------------------------

/// Numeric approximant `h^(N)`: dressed, resummed tree sum over allowed
/// trees with at most `k_nodes` nodes and all line scales `<= n_max`,
/// returned as Fourier coefficients per root momentum.
pub fn approximant_h(
    dressing: &Dressing<'_>,
    k_nodes: usize,
    n_max: i32,
    eta: f64,
    scheme: Scheme,
) -> Result<BTreeMap<[i64; 2], Vec<Complex64>>, DressingError> {
    let ring = NumericRing { eta };
    let sys = dressing.sys;
    let b_iter = dressing.seq.p_max() as i32;
    let mut out: BTreeMap<[i64; 2], Vec<Complex64>> = BTreeMap::new();
    for m in 1..=k_nodes {
        for tree in enumerate_trees(sys, m, None) {
            let scaled = assign_scales(&tree, sys, dressing.seq)?;
            if scaled.scales.iter().any(|&s| s > n_max) {
                continue;
            }
            if !crate::trees::is_allowed(&scaled, scheme) {
                continue;
            }
            let v = dressing.eval_tree(&ring, &tree, scheme, b_iter)?;
            let entry = out
                .entry(tree.root_momentum())
                .or_insert_with(|| vec![Complex64::new(0.0, 0.0); sys.dim()]);
            for (e, x) in entry.iter_mut().zip(&v) {
                *e += x;
            }
        }
    }
    out.retain(|_, v| v.iter().any(|c| c.norm() > 0.0));
    Ok(out)
}

/// Sample a coefficient table on a uniform psi grid (real part).
pub fn sample_on_grid(
    coeffs: &BTreeMap<[i64; 2], Vec<Complex64>>,
    dim: usize,
    grid_n: usize,
) -> Vec<Vec<f64>> {
    let two_pi = std::f64::consts::TAU;
    let mut out = Vec::with_capacity(grid_n * grid_n);
    for i in 0..grid_n {
        for j in 0..grid_n {
            let psi = [two_pi * i as f64 / grid_n as f64, two_pi * j as f64 / grid_n as f64];
            let mut v = vec![Complex64::new(0.0, 0.0); dim];
            for (nu, c) in coeffs {
                let phase = nu[0] as f64 * psi[0] + nu[1] as f64 * psi[1];
                let e = Complex64::new(phase.cos(), phase.sin());
                for (o, x) in v.iter_mut().zip(c) {
                    *o += x * e;
                }
            }
            out.push(v.iter().map(|c| c.re).collect());
        }
    }
    out
}

struct ReClass {
    tree: DecoratedTree,
    momentum: [i64; 2],
    order: usize,
    size: usize,
    value: Vec<EpsPoly>,
}

/// Symbolic eps re-expansion of the dressed resummed tree sum through order
/// `eps^k_max`, comparable term by term with the direct recursion.
pub fn reexpand_in_eps(
    dressing: &Dressing<'_>,
    scheme: Scheme,
    k_max: usize,
) -> Result<EpsSeries, DressingError> {
    let ring = SeriesRing { k_max };
    let sys = dressing.sys;
    let d = sys.dim();
    let b_iter = dressing.seq.p_max() as i32;

    let mut classes: Vec<ReClass> = Vec::new();
    let mut by_size: Vec<Vec<usize>> = vec![Vec::new()];
    let size_cap = 3 * k_max;

    while by_size.len() <= size_cap {
        let m = by_size.len();
        let mut level = Vec::new();
        let modes: Vec<[i64; 2]> = sys.nu_support().to_vec();
        for mode in modes {
            let mut chosen: Vec<(usize, usize)> = Vec::new();
            re_combine(
                dressing, &ring, scheme, b_iter, &mut classes, &mut chosen, m - 1, usize::MAX,
                mode, k_max, &mut level,
            )?;
        }
        by_size.push(level);
    }

    let mut out = EpsSeries::zero(k_max, d, 1);
    for level in &by_size {
        for &id in level {
            let cls = &classes[id];
            for k in 1..=k_max {
                let mut vec = Tensor::zeros(d, 1);
                let mut any = false;
                for g in 0..d {
                    let c = cls.value[g][k];
                    if c.norm() > 0.0 {
                        any = true;
                    }
                    vec.data[g] = c;
                }
                if any {
                    out.orders[k].add_term(Mode::psi(cls.momentum), vec);
                }
            }
        }
    }
    for o in &mut out.orders {
        o.prune();
    }
    // Same saturation argument as the formal sum: contributors stop at
    // 3*k_max - 1 nodes, so the last level must be free of them.
    for &id in &by_size[size_cap] {
        assert!(classes[id].order > k_max, "re-expansion size cap too small at {size_cap} nodes");
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn re_combine(
    dressing: &Dressing<'_>,
    ring: &SeriesRing,
    scheme: Scheme,
    b_iter: i32,
    classes: &mut Vec<ReClass>,
    chosen: &mut Vec<(usize, usize)>,
    budget: usize,
    limit: usize,
    mode: [i64; 2],
    k_max: usize,
    level: &mut Vec<usize>,
) -> Result<(), DressingError> {
    if budget == 0 {
        if let Some(cls) = re_make(dressing, ring, scheme, b_iter, classes, &mode, chosen, k_max)? {
            let id = classes.len();
            classes.push(cls);
            level.push(id);
        }
        return Ok(());
    }
    let cands: Vec<usize> =
        (0..classes.len().min(limit)).filter(|&id| classes[id].size <= budget).collect();
    for id in cands {
        let max_mult = budget / classes[id].size;
        for mult in 1..=max_mult {
            chosen.push((id, mult));
            re_combine(
                dressing, ring, scheme, b_iter, classes, chosen,
                budget - mult * classes[id].size, id, mode, k_max, level,
            )?;
            chosen.pop();
        }
    }
    Ok(())
}

fn re_copy_tree(src: &DecoratedTree, si: usize, parent: Option<usize>, nodes: &mut Vec<TreeNode>) -> usize {
    let me = nodes.len();
    nodes.push(TreeNode {
        mode: src.nodes[si].mode,
        parent,
        children: Vec::new(),
        momentum: src.nodes[si].momentum,
        number_label: 0,
    });
    for &c in &src.nodes[si].children {
        let ch = re_copy_tree(src, c, Some(me), nodes);
        nodes[me].children.push(ch);
    }
    me
}

#[allow(clippy::too_many_arguments)]
fn re_make(
    dressing: &Dressing<'_>,
    ring: &SeriesRing,
    scheme: Scheme,
    b_iter: i32,
    classes: &[ReClass],
    mode: &[i64; 2],
    children: &[(usize, usize)],
    k_max: usize,
) -> Result<Option<ReClass>, DressingError> {
    let sys = dressing.sys;
    let d = sys.dim();
    let mut momentum = *mode;
    let mut size = 1usize;
    let mut order = 0usize;
    let mut child_count = 0usize;
    for &(id, mult) in children {
        let c = &classes[id];
        momentum[0] += mult as i64 * c.momentum[0];
        momentum[1] += mult as i64 * c.momentum[1];
        size += mult * c.size;
        order += mult * c.order;
        child_count += mult;
    }
    if momentum != [0, 0] {
        order += 1;
    }
    if order > k_max {
        return Ok(None);
    }
    if *mode == [0, 0] && child_count == 1 && classes[children[0].0].momentum == [0, 0] {
        return Ok(None);
    }
    if sys.f_terms_at_nu(*mode).is_none() {
        return Ok(None);
    }

    // Materialize the subtree for the resonance analysis.
    let mut nodes: Vec<TreeNode> = Vec::new();
    nodes.push(TreeNode {
        mode: *mode,
        parent: None,
        children: Vec::new(),
        momentum,
        number_label: 0,
    });
    let mut node_weight = 1.0f64;
    let mut weight = 1.0f64;
    for &(id, mult) in children {
        node_weight /= factorial(mult);
        for _ in 0..mult {
            let ch = re_copy_tree(&classes[id].tree, 0, Some(0), &mut nodes);
            nodes[0].children.push(ch);
            weight *= classes[id].tree.weight;
        }
    }
    weight *= node_weight;
    let eps_order = nodes.iter().filter(|n| n.momentum != [0, 0]).count();
    for (i, n) in nodes.iter_mut().enumerate() {
        n.number_label = i + 1;
    }
    let tree = DecoratedTree { nodes, weight, eps_order };

    let scaled = assign_scales(&tree, sys, dressing.seq)?;
    if !crate::trees::is_allowed(&scaled, scheme) {
        return Ok(None);
    }

    // Dressed series value: own propagator times the children contraction.
    let mut child_refs: Vec<&[EpsPoly]> = Vec::new();
    for &(id, mult) in children {
        for _ in 0..mult {
            child_refs.push(&classes[id].value);
        }
    }
    let contracted = match node_contract_ring(ring, sys, *mode, &child_refs) {
        Some(v) => v,
        None => return Ok(None),
    };
    let weighted: Vec<EpsPoly> =
        contracted.iter().map(|e| ring.scale(e, Complex64::new(node_weight, 0.0))).collect();
    let g = if momentum == [0, 0] {
        dressing.gm1_matrix(ring)
    } else {
        let (x, xf) = dressing.ctx.divisor(momentum);
        match scheme {
            Scheme::A => {
                let sc = scale_of(&x, false, dressing.seq)?;
                dressing.g_matrix(ring, &x, xf, sc)?
            }
            Scheme::B => dressing.g_matrix_b(ring, &x, xf, b_iter)?,
        }
    };
    let value = mat_vec(ring, d, &g, &weighted);
    if value.iter().all(|e| ring.is_exact_zero(e)) {
        return Ok(None);
    }
    Ok(Some(ReClass { tree, momentum, order, size, value }))
}

/// Self-energy value of the minimal two-node sandwich around an entering
/// divisor `x`: entry node `modes[0]`, internal dressed line, exit node
/// `modes[1]` (modes must sum to zero). Exposed for tests and diagnostics.
pub fn self_energy_value_two_node(
    dressing: &Dressing<'_>,
    modes: [[i64; 2]; 2],
    x: &Qi,
    eta: f64,
) -> Option<DMatrix<Complex64>> {
    assert_eq!([modes[0][0] + modes[1][0], modes[0][1] + modes[1][1]], [0, 0]);
    let ring = NumericRing { eta };
    let sys = dressing.sys;
    let d = sys.dim();
    let shift = sys.freq.small_divisor(modes[0]);
    let xd = x.add(&shift);
    let xdf = xd.to_f64();
    let sc = scale_of(&xd, false, dressing.seq).ok()?;
    let b0 = node_contract_path(&ring, sys, modes[0], &[], None)?;
    let g = dressing.g_matrix(&ring, &xd, xdf, sc).ok()?;
    let chained = mat_mul(&ring, d, &g, &b0);
    let b1 = node_contract_path(&ring, sys, modes[1], &[], Some(&chained))?;
    let eps = ring.eps();
    let pref = ring.scale(&eps, Complex64::new(-1.0, 0.0));
    let flat: Vec<Complex64> = b1.iter().map(|e| ring.mul(&pref, e)).collect();
    Some(flat_to_dmatrix(&flat, d))
}
