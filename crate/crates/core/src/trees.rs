//! Decorated-tree expansion: enumeration, cluster decomposition, resonance
//! (self-energy) detection, and bare tree values.
//!
//! Tree conventions: node 0 is the root node; the exiting line of node `i`
//! points to its parent (for node 0, to the formal root vertex). A line is
//! identified with the node it exits from. The eps-order of a tree is the
//! number of lines carrying nonzero momentum: those are exactly the lines
//! that carry an `eta^2` factor, while zero-momentum lines carry the constant
//! slow block `g^[-1] = (0, (-Hess f_0(beta0))^(-1))`.
//!
//! One label arrangement is excluded from *every* enumeration (it is what
//! the slow zero-mode solve of the recursion removes): a node with zero mode
//! label, exactly one entering line, and zero momentum on both of its lines.
//! Resonances (self-energy clusters, including single nodes with zero mode
//! label and equal nonzero in/out momenta) stay in the formal series and are
//! excluded from resummed enumerations per scheme.

use crate::fourier::SystemSpec;
use crate::freq::{scale_of, FreqError, ScaleSequence};
use crate::qi::Qi;
use num::complex::Complex64;
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Scale-by-scale dressing: `g^[n] = eta^2 (x^2 + M^[<=n](x; eta))^(-1)`,
    /// all resonances excluded from the tree sum.
    A,
    /// Iterative dressing: one global propagator per iteration step,
    /// resonances excluded only when separated by at least three scales.
    B,
}

/// Minimum scale separation (external minus internal) for a resonance to be
/// resummed in scheme B.
pub const SCHEME_B_SEPARATION: i32 = 3;

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub mode: [i64; 2],
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Momentum of the exiting line (sum of modes in this node's subtree).
    pub momentum: [i64; 2],
    /// Number label of the exiting line (preorder, 1-based).
    pub number_label: usize,
}

#[derive(Debug, Clone)]
pub struct DecoratedTree {
    pub nodes: Vec<TreeNode>,
    /// Symmetry weight: product over nodes of 1/(multiplicities!). Together
    /// with canonical (multiset) enumeration this realizes the 1/k! count of
    /// number-labeled trees.
    pub weight: f64,
    /// Number of nonzero-momentum lines.
    pub eps_order: usize,
}

impl DecoratedTree {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root_momentum(&self) -> [i64; 2] {
        self.nodes[0].momentum
    }

    pub fn zero_momentum_lines(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].momentum == [0, 0]).collect()
    }

    /// Momentum conservation on every line (exact integer identity).
    pub fn momenta_consistent(&self) -> bool {
        for i in 0..self.nodes.len() {
            let mut sum = self.nodes[i].mode;
            let mut stack: Vec<usize> = self.nodes[i].children.clone();
            while let Some(j) = stack.pop() {
                sum[0] += self.nodes[j].mode[0];
                sum[1] += self.nodes[j].mode[1];
                stack.extend(&self.nodes[j].children);
            }
            if sum != self.nodes[i].momentum {
                return false;
            }
        }
        true
    }

    /// Number labels are a bijection onto 1..=line count.
    pub fn number_labels_valid(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        for n in &self.nodes {
            if n.number_label == 0 || n.number_label > self.nodes.len() {
                return false;
            }
            if seen[n.number_label - 1] {
                return false;
            }
            seen[n.number_label - 1] = true;
        }
        true
    }
}

/// Shared evaluation context: divisor cache and the slow-block solve.
pub struct TreeCtx<'a> {
    pub sys: &'a SystemSpec,
    divisors: std::cell::RefCell<HashMap<[i64; 2], (Qi, f64)>>,
    m0_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<'a> TreeCtx<'a> {
    pub fn new(sys: &'a SystemSpec) -> Self {
        TreeCtx {
            sys,
            divisors: std::cell::RefCell::new(HashMap::new()),
            m0_lu: sys.m0.clone().lu(),
        }
    }

    pub fn divisor(&self, nu: [i64; 2]) -> (Qi, f64) {
        if let Some(v) = self.divisors.borrow().get(&nu) {
            return v.clone();
        }
        let x = self.sys.freq.small_divisor(nu);
        let xf = x.to_f64();
        self.divisors.borrow_mut().insert(nu, (x, xf));
        (x, xf)
    }

    /// Apply `g^[-1]`: zero the fast components, solve `M0` on the slow ones.
    pub fn apply_gm1(&self, u: &[Complex64]) -> Vec<Complex64> {
        let s = self.sys.s;
        let mut re = nalgebra::DVector::<f64>::zeros(s);
        let mut im = nalgebra::DVector::<f64>::zeros(s);
        for i in 0..s {
            re[i] = u[2 + i].re;
            im[i] = u[2 + i].im;
        }
        let sre = self.m0_lu.solve(&re).expect("M0 invertible");
        let sim = self.m0_lu.solve(&im).expect("M0 invertible");
        let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
        for i in 0..s {
            out[2 + i] = Complex64::new(sre[i], sim[i]);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Canonical enumeration
// ---------------------------------------------------------------------------

/// Structural subtree class used by both the explicit enumeration and the
/// memoized formal sum. `children` lists (class id, multiplicity) with ids
/// strictly decreasing, so every (mode, multiset) combination is built
/// exactly once.
#[derive(Debug, Clone)]
struct SubtreeClass {
    mode: [i64; 2],
    children: Vec<(usize, usize)>,
    size: usize,
    momentum: [i64; 2],
    /// Nonzero-momentum lines in the subtree, own exiting line included.
    order: usize,
    /// This node's 1/(multiplicities!) factor.
    node_weight: f64,
    /// Bare value including the exiting-line propagator and all weights
    /// below; None when values are not tracked.
    value: Option<Vec<Complex64>>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

struct ClassArena<'a> {
    ctx: &'a TreeCtx<'a>,
    classes: Vec<SubtreeClass>,
    by_size: Vec<Vec<usize>>,
    with_values: bool,
}

impl<'a> ClassArena<'a> {
    fn new(ctx: &'a TreeCtx<'a>, with_values: bool) -> Self {
        ClassArena { ctx, classes: Vec::new(), by_size: vec![Vec::new()], with_values }
    }

    /// Extend the arena to subtrees of up to `max_size` nodes, keeping only
    /// classes whose eps-order does not exceed `max_order`.
    fn grow(&mut self, max_size: usize, max_order: usize) {
        while self.by_size.len() <= max_size {
            let m = self.by_size.len();
            let mut level: Vec<usize> = Vec::new();
            let modes: Vec<[i64; 2]> = self.ctx.sys.nu_support().to_vec();
            for mode in modes {
                let mut chosen: Vec<(usize, usize)> = Vec::new();
                self.combine(m - 1, usize::MAX, &mode, &mut chosen, max_order, &mut level);
            }
            self.by_size.push(level);
        }
    }

    /// Enumerate child multisets with total size `budget`, choosing class ids
    /// strictly below `limit` (canonical non-increasing id order).
    fn combine(
        &mut self,
        budget: usize,
        limit: usize,
        mode: &[i64; 2],
        chosen: &mut Vec<(usize, usize)>,
        max_order: usize,
        level: &mut Vec<usize>,
    ) {
        if budget == 0 {
            if let Some(class) = self.make_class(*mode, chosen, max_order) {
                let id = self.classes.len();
                self.classes.push(class);
                level.push(id);
            }
            return;
        }
        let candidates: Vec<usize> = (0..self.classes.len().min(limit))
            .filter(|&id| self.classes[id].size <= budget)
            .collect();
        for id in candidates {
            let max_mult = budget / self.classes[id].size;
            for mult in 1..=max_mult {
                chosen.push((id, mult));
                self.combine(
                    budget - mult * self.classes[id].size,
                    id,
                    mode,
                    chosen,
                    max_order,
                    level,
                );
                chosen.pop();
            }
        }
    }

    fn make_class(
        &self,
        mode: [i64; 2],
        children: &[(usize, usize)],
        max_order: usize,
    ) -> Option<SubtreeClass> {
        let mut momentum = mode;
        let mut size = 1usize;
        let mut order = 0usize;
        let mut child_count = 0usize;
        for &(id, mult) in children {
            let c = &self.classes[id];
            momentum[0] += mult as i64 * c.momentum[0];
            momentum[1] += mult as i64 * c.momentum[1];
            size += mult * c.size;
            order += mult * c.order;
            child_count += mult;
        }
        if momentum != [0, 0] {
            order += 1;
        }
        if order > max_order {
            return None;
        }
        // Excluded arrangement: zero mode label, one entering line, zero
        // momentum through both lines.
        if mode == [0, 0] && child_count == 1 {
            let (id, _) = children[0];
            if self.classes[id].momentum == [0, 0] {
                return None;
            }
        }
        let node_weight = children.iter().map(|&(_, m)| 1.0 / factorial(m)).product();

        let value = if self.with_values {
            Some(self.bare_value(mode, children, momentum, node_weight)?)
        } else {
            None
        };
        Some(SubtreeClass {
            mode,
            children: children.to_vec(),
            size,
            momentum,
            order,
            node_weight,
            value,
        })
    }

    /// Bare value including the exiting propagator; None when identically
    /// zero (exact floating zero, from vanishing node factors).
    fn bare_value(
        &self,
        mode: [i64; 2],
        children: &[(usize, usize)],
        momentum: [i64; 2],
        node_weight: f64,
    ) -> Option<Vec<Complex64>> {
        let mut child_vals: Vec<&[Complex64]> = Vec::new();
        for &(id, mult) in children {
            let v = self.classes[id].value.as_ref()?;
            for _ in 0..mult {
                child_vals.push(v);
            }
        }
        let contracted = node_contract(self.ctx.sys, mode, &child_vals)?;
        let weighted: Vec<Complex64> = contracted.iter().map(|c| c * node_weight).collect();
        let out = if momentum == [0, 0] {
            self.ctx.apply_gm1(&weighted)
        } else {
            let (_, xf) = self.ctx.divisor(momentum);
            let x2 = xf * xf;
            weighted.iter().map(|c| c / x2).collect()
        };
        if out.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
            None
        } else {
            Some(out)
        }
    }
}

/// Node-factor contraction
/// `U_g0 = sum_mu c_eff (i D_g0) prod_j i(nu.u_j^fast + mu.u_j^slow)`.
/// Returns None when `nu` is outside the support of `f`.
pub fn node_contract(
    sys: &SystemSpec,
    nu: [i64; 2],
    children: &[&[Complex64]],
) -> Option<Vec<Complex64>> {
    let d = sys.dim();
    let terms = sys.f_terms_at_nu(nu)?;
    let mut out = vec![Complex64::new(0.0, 0.0); d];
    for (mu, ceff) in terms {
        let mut prod = *ceff;
        for u in children {
            let mut dot = Complex64::new(0.0, 0.0);
            dot += u[0] * nu[0] as f64;
            dot += u[1] * nu[1] as f64;
            for (k, m) in mu.iter().enumerate() {
                dot += u[2 + k] * *m as f64;
            }
            prod *= Complex64::new(0.0, 1.0) * dot;
        }
        for (g0, o) in out.iter_mut().enumerate() {
            let dg = if g0 < 2 { nu[g0] as f64 } else { mu[g0 - 2] as f64 };
            *o += prod * Complex64::new(0.0, dg);
        }
    }
    Some(out)
}

/// Matrix variant with one free contraction slot (for self-energy values):
/// returns `U[g0][g_free]`.
pub fn node_contract_free(
    sys: &SystemSpec,
    nu: [i64; 2],
    children: &[&[Complex64]],
) -> Option<Vec<Vec<Complex64>>> {
    let d = sys.dim();
    let terms = sys.f_terms_at_nu(nu)?;
    let mut out = vec![vec![Complex64::new(0.0, 0.0); d]; d];
    for (mu, ceff) in terms {
        let mut prod = *ceff;
        for u in children {
            let mut dot = Complex64::new(0.0, 0.0);
            dot += u[0] * nu[0] as f64;
            dot += u[1] * nu[1] as f64;
            for (k, m) in mu.iter().enumerate() {
                dot += u[2 + k] * *m as f64;
            }
            prod *= Complex64::new(0.0, 1.0) * dot;
        }
        for g0 in 0..d {
            let dg0 = if g0 < 2 { nu[g0] as f64 } else { mu[g0 - 2] as f64 };
            for gf in 0..d {
                let dgf = if gf < 2 { nu[gf] as f64 } else { mu[gf - 2] as f64 };
                out[g0][gf] += prod * Complex64::new(0.0, dg0) * Complex64::new(0.0, dgf);
            }
        }
    }
    Some(out)
}

// ---------------------------------------------------------------------------
// Explicit enumeration
// ---------------------------------------------------------------------------

/// All canonical decorated trees with exactly `node_count` nodes, optionally
/// filtered by root momentum. No value-based pruning: vanishing trees are
/// enumerated too. Intended for desk-scale node counts.
pub fn enumerate_trees(
    sys: &SystemSpec,
    node_count: usize,
    root_momentum: Option<[i64; 2]>,
) -> Vec<DecoratedTree> {
    let ctx = TreeCtx::new(sys);
    let mut arena = ClassArena::new(&ctx, false);
    arena.grow(node_count, usize::MAX);
    let mut out = Vec::new();
    for &id in &arena.by_size[node_count] {
        if let Some(req) = root_momentum {
            if arena.classes[id].momentum != req {
                continue;
            }
        }
        out.push(materialize(&arena, id));
    }
    out
}

fn materialize(arena: &ClassArena<'_>, id: usize) -> DecoratedTree {
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut weight = 1.0f64;
    build_nodes(arena, id, None, &mut nodes, &mut weight);
    let mut eps_order = 0;
    for (i, n) in nodes.iter_mut().enumerate() {
        n.number_label = i + 1;
        if n.momentum != [0, 0] {
            eps_order += 1;
        }
    }
    DecoratedTree { nodes, weight, eps_order }
}

fn build_nodes(
    arena: &ClassArena<'_>,
    id: usize,
    parent: Option<usize>,
    nodes: &mut Vec<TreeNode>,
    weight: &mut f64,
) -> usize {
    let class = &arena.classes[id];
    let me = nodes.len();
    nodes.push(TreeNode {
        mode: class.mode,
        parent,
        children: Vec::new(),
        momentum: class.momentum,
        number_label: 0,
    });
    *weight *= class.node_weight;
    for &(cid, mult) in &class.children {
        for _ in 0..mult {
            let child = build_nodes(arena, cid, Some(me), nodes, weight);
            nodes[me].children.push(child);
        }
    }
    me
}

// ---------------------------------------------------------------------------
// Formal (bare) tree sums
// ---------------------------------------------------------------------------

/// Coefficients of the formal Lindstedt series obtained by summing bare tree
/// values: `coeffs[nu][k][g]` is the order-`eps^k` coefficient of mode nu,
/// component g. Identically-zero subtree classes are pruned during the
/// memoized generation; this only drops vanishing contributions.
pub fn formal_tree_sum(
    sys: &SystemSpec,
    k_max: usize,
) -> BTreeMap<[i64; 2], Vec<Vec<Complex64>>> {
    let ctx = TreeCtx::new(sys);
    let mut arena = ClassArena::new(&ctx, true);
    let size_cap = 3 * k_max;
    arena.grow(size_cap, k_max);

    let d = sys.dim();
    let mut out: BTreeMap<[i64; 2], Vec<Vec<Complex64>>> = BTreeMap::new();
    for level in &arena.by_size {
        for &id in level {
            let class = &arena.classes[id];
            if class.order == 0 || class.order > k_max {
                continue;
            }
            let value = class.value.as_ref().expect("value-tracked arena");
            let entry = out
                .entry(class.momentum)
                .or_insert_with(|| vec![vec![Complex64::new(0.0, 0.0); d]; k_max + 1]);
            for (g, v) in value.iter().enumerate() {
                entry[class.order][g] += v;
            }
        }
    }
    // Saturation check. A nonvanishing tree of order k has at most 2k-1
    // zero lines (every zero line charges a distinct nonzero line, and
    // branching zero nodes number one less than the charged ones), hence at
    // most 3k-1 nodes; the 3k level must therefore be empty of contributors.
    for &id in &arena.by_size[size_cap] {
        assert!(
            arena.classes[id].order > k_max,
            "tree size cap too small: contributing class with {size_cap} nodes"
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Scales, clusters, resonances
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct ScaledTree<'t> {
    pub tree: &'t DecoratedTree,
    /// Scale label per line (indexed by the node the line exits).
    pub scales: Vec<i32>,
    pub divisors: Vec<(Qi, f64)>,
}

pub fn assign_scales<'t>(
    tree: &'t DecoratedTree,
    sys: &SystemSpec,
    seq: &ScaleSequence,
) -> Result<ScaledTree<'t>, FreqError> {
    let mut scales = Vec::with_capacity(tree.nodes.len());
    let mut divisors = Vec::with_capacity(tree.nodes.len());
    for n in &tree.nodes {
        let x = sys.freq.small_divisor(n.momentum);
        let sc = scale_of(&x, n.momentum == [0, 0], seq)?;
        let xf = x.to_f64();
        scales.push(sc);
        divisors.push((x, xf));
    }
    Ok(ScaledTree { tree, scales, divisors })
}

#[derive(Debug, Clone)]
pub struct Cluster {
    pub scale: i32,
    /// Internal lines (by exiting node).
    pub lines: Vec<usize>,
    pub nodes: Vec<usize>,
    /// Entering external lines (by exiting node, which lies outside).
    pub entering: Vec<usize>,
    /// The exiting external line (by the inside node it exits from); None
    /// when the cluster contains the root line.
    pub exiting: Option<usize>,
}

/// Hierarchically ordered clusters: for every scale `n` present, the maximal
/// connected sets of lines with `n_l <= n` containing at least one line at
/// scale exactly `n`.
pub fn cluster_decomposition(scaled: &ScaledTree<'_>) -> Vec<Cluster> {
    let tree = scaled.tree;
    let n_nodes = tree.nodes.len();
    let mut present: Vec<i32> = scaled.scales.iter().cloned().filter(|&s| s >= 0).collect();
    present.sort_unstable();
    present.dedup();

    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        let mut i = i;
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }

    let mut out = Vec::new();
    for &n in &present {
        let mut parent: Vec<usize> = (0..n_nodes).collect();
        for i in 0..n_nodes {
            if scaled.scales[i] <= n {
                if let Some(pa) = tree.nodes[i].parent {
                    let a = find(&mut parent, i);
                    let b = find(&mut parent, pa);
                    if a != b {
                        parent[a] = b;
                    }
                }
            }
        }
        let mut comp_lines: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n_nodes {
            if scaled.scales[i] <= n && tree.nodes[i].parent.is_some() {
                let root = find(&mut parent, i);
                comp_lines.entry(root).or_default().push(i);
            }
        }
        // The root line (exiting node 0) has no parent entry above; treat it
        // as a line of its own component through node 0.
        if scaled.scales[0] <= n {
            let root = find(&mut parent, 0);
            comp_lines.entry(root).or_default().push(0);
        }
        for (_, mut lines) in comp_lines {
            lines.sort_unstable();
            lines.dedup();
            if !lines.iter().any(|&l| scaled.scales[l] == n) {
                continue;
            }
            let mut nodes: Vec<usize> = Vec::new();
            for &l in &lines {
                nodes.push(l);
                if let Some(p) = tree.nodes[l].parent {
                    nodes.push(p);
                }
            }
            nodes.sort_unstable();
            nodes.dedup();
            let is_internal = |i: usize| lines.binary_search(&i).is_ok();
            let mut entering = Vec::new();
            let mut exiting = None;
            for &v in &nodes {
                if !is_internal(v) {
                    exiting = Some(v);
                }
                for &c in &tree.nodes[v].children {
                    if !is_internal(c) {
                        entering.push(c);
                    }
                }
            }
            entering.sort_unstable();
            out.push(Cluster { scale: n, lines, nodes, entering, exiting });
        }
    }
    out
}

/// A cluster is a self-energy cluster when it has exactly one entering line,
/// the entering and exiting momenta agree, and no zero-momentum line lies on
/// the path joining them.
pub fn is_self_energy(cluster: &Cluster, scaled: &ScaledTree<'_>) -> bool {
    let tree = scaled.tree;
    if cluster.entering.len() != 1 {
        return false;
    }
    let Some(exit) = cluster.exiting else {
        return false;
    };
    let entering = cluster.entering[0];
    if tree.nodes[entering].momentum != tree.nodes[exit].momentum {
        return false;
    }
    // path from the entry attachment node up to the exit node
    let mut v = tree.nodes[entering].parent.expect("entering line ends inside the cluster");
    while v != exit {
        if tree.nodes[v].momentum == [0, 0] {
            return false;
        }
        v = tree.nodes[v].parent.expect("exit node is an ancestor of the entry node");
    }
    true
}

/// A resonance found in a tree: a self-energy cluster or a single node with
/// zero mode label passing nonzero momentum through.
#[derive(Debug, Clone)]
pub struct Resonance {
    /// Maximal internal scale (-1 for single-node resonances).
    pub internal_scale: i32,
    /// Common scale of the entering/exiting lines.
    pub external_scale: i32,
}

impl Resonance {
    /// Is this resonance resummed (hence excluded from the tree sum) in the
    /// given scheme?
    pub fn resummed_in(&self, scheme: Scheme) -> bool {
        match scheme {
            Scheme::A => true,
            Scheme::B => self.external_scale >= self.internal_scale + SCHEME_B_SEPARATION,
        }
    }
}

/// All resonances of a tree: self-energy clusters from the decomposition
/// plus single-node resonances.
pub fn find_resonances(scaled: &ScaledTree<'_>) -> Vec<Resonance> {
    let tree = scaled.tree;
    let mut out = Vec::new();
    for cluster in cluster_decomposition(scaled) {
        if is_self_energy(&cluster, scaled) {
            let internal = cluster.lines.iter().map(|&l| scaled.scales[l]).max().unwrap_or(-1);
            let external = scaled.scales[cluster.entering[0]];
            out.push(Resonance { internal_scale: internal, external_scale: external });
        }
    }
    for (i, n) in tree.nodes.iter().enumerate() {
        if n.mode == [0, 0] && n.children.len() == 1 {
            let c = n.children[0];
            if tree.nodes[c].momentum != [0, 0] {
                debug_assert_eq!(tree.nodes[c].momentum, n.momentum);
                out.push(Resonance { internal_scale: -1, external_scale: scaled.scales[i] });
            }
        }
    }
    out
}

/// True when the tree survives the resummed enumeration of `scheme`.
pub fn is_allowed(scaled: &ScaledTree<'_>, scheme: Scheme) -> bool {
    find_resonances(scaled).iter().all(|r| !r.resummed_in(scheme))
}

/// Bare value of one decorated tree: symmetry weight times node factors
/// times `1/x^2` per nonzero line and `g^[-1]` per zero line; the result is
/// the coefficient of `eps^(eps_order)` as a vector over the root component.
pub fn tree_value_bare(ctx: &TreeCtx<'_>, tree: &DecoratedTree) -> Vec<Complex64> {
    fn rec(ctx: &TreeCtx<'_>, tree: &DecoratedTree, i: usize) -> Vec<Complex64> {
        let d = ctx.sys.dim();
        let child_vals: Vec<Vec<Complex64>> =
            tree.nodes[i].children.iter().map(|&c| rec(ctx, tree, c)).collect();
        let refs: Vec<&[Complex64]> = child_vals.iter().map(|v| v.as_slice()).collect();
        let contracted = match node_contract(ctx.sys, tree.nodes[i].mode, &refs) {
            Some(v) => v,
            None => return vec![Complex64::new(0.0, 0.0); d],
        };
        if tree.nodes[i].momentum == [0, 0] {
            ctx.apply_gm1(&contracted)
        } else {
            let (_, xf) = ctx.divisor(tree.nodes[i].momentum);
            let x2 = xf * xf;
            contracted.iter().map(|c| c / x2).collect()
        }
    }
    let v = rec(ctx, tree, 0);
    v.iter().map(|c| c * tree.weight).collect()
}
