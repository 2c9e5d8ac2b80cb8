//! Model builders and identity verifiers: two-state general Markov models on
//! trees, the secant parametrization, and binary hidden Markov chains.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::moments::{
    conditional_moments, multiset_of, CoordinateSystem, CoordinateVector, DiscreteDistribution, Mode, StateSpace,
};
use crate::radical::Radical;
use crate::scalar::{int, Rational, Scalar};
use crate::trees::{EdgeTable, GmmParams, TreeTopology};

/// Leaf distribution of the general Markov model, summing out inner nodes
/// bottom-up.
pub fn gmm_distribution(tree: &TreeTopology, params: &GmmParams) -> Result<DiscreteDistribution> {
    let n = tree.n_leaves();
    let n_nodes = tree.n_nodes();
    let mut children = vec![Vec::new(); n_nodes];
    for (u, v, _) in params.edges() {
        children[u].push(v);
    }
    // msg[v][x_v] is a table over the leaves below v, listed in leaves[v]
    let mut msg: Vec<Option<[Vec<Rational>; 2]>> = vec![None; n_nodes];
    let mut leaves: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    let order = tree.bfs_order(params.root());
    for &v in order.iter().rev() {
        if let Some(l) = tree.leaf_of(v) {
            if children[v].is_empty() {
                msg[v] = Some([vec![int(1), int(0)], vec![int(0), int(1)]]);
                leaves[v] = vec![l];
                continue;
            }
        }
        let mut acc: [Vec<Rational>; 2] = [vec![int(1)], vec![int(1)]];
        let mut below = Vec::new();
        if let Some(l) = tree.leaf_of(v) {
            // a leaf used as the root still emits its own value
            acc = [vec![int(1), int(0)], vec![int(0), int(1)]];
            below.push(l);
        }
        for &c in &children[v] {
            let t = params.table(c).expect("child table");
            let m = msg[c].take().expect("child message");
            for (xv, slot) in acc.iter_mut().enumerate() {
                let pushed: Vec<Rational> = (0..m[0].len())
                    .map(|k| &t[xv][0] * &m[0][k] + &t[xv][1] * &m[1][k])
                    .collect();
                *slot = slot.iter().flat_map(|a| pushed.iter().map(move |b| a * b)).collect();
            }
            below.append(&mut leaves[c]);
        }
        msg[v] = Some(acc);
        leaves[v] = below;
    }
    let root = params.root();
    let m = msg[root].take().expect("root message");
    let joint: Vec<Rational> = (0..m[0].len())
        .map(|k| &params.root_dist()[0] * &m[0][k] + &params.root_dist()[1] * &m[1][k])
        .collect();
    // reorder from the traversal's leaf order to label order
    let order_leaves = &leaves[root];
    let mut table = vec![Rational::zero(); 1 << n];
    for (k, p) in joint.into_iter().enumerate() {
        let mut idx = 0;
        for (pos, &l) in order_leaves.iter().enumerate() {
            let bit = (k >> (n - 1 - pos)) & 1;
            idx |= bit << (n - 1 - l);
        }
        table[idx] = p;
    }
    let mode = if params.is_probabilistic() {
        Mode::Probabilistic
    } else {
        Mode::Algebraic
    };
    DiscreteDistribution::new(StateSpace::binary(n), table, mode)
}

/// Mixture of two product measures in the affine chart `mu_empty = 1`:
/// `mu_I = (1 - t) prod a_i + t prod b_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecantParams {
    pub t: Rational,
    pub a: Vec<Rational>,
    pub b: Vec<Rational>,
}

impl SecantParams {
    pub fn new(t: Rational, a: Vec<Rational>, b: Vec<Rational>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::InvalidArgument(
                "a and b must be nonempty and of equal length".into(),
            ));
        }
        Ok(SecantParams { t, a, b })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// The same point as a star model: hidden root with `P(Y = 1) = t`, leaf
    /// `i` with `P(X_i = 1 | Y = 0) = a_i` and `P(X_i = 1 | Y = 1) = b_i`.
    pub fn star_model(&self) -> Result<(TreeTopology, GmmParams)> {
        let tree = TreeTopology::star(self.n())?;
        let h = tree.node_by_name("h").expect("star centre");
        let edges = (0..self.n())
            .map(|i| {
                let t: EdgeTable = [
                    [int(1) - &self.a[i], self.a[i].clone()],
                    [int(1) - &self.b[i], self.b[i].clone()],
                ];
                (h, tree.leaf_node(i), t)
            })
            .collect();
        let params = GmmParams::new(&tree, [int(1) - &self.t, self.t.clone()], edges)?;
        Ok((tree, params))
    }
}

pub fn secant_moments(p: &SecantParams) -> CoordinateVector {
    let space = StateSpace::binary(p.n());
    let one_minus_t = int(1) - &p.t;
    CoordinateVector::from_fn(space, CoordinateSystem::Moments, |x| {
        let mut pa = Rational::one();
        let mut pb = Rational::one();
        for (i, &k) in x.iter().enumerate() {
            if k == 1 {
                pa *= &p.a[i];
                pb *= &p.b[i];
            }
        }
        &one_minus_t * pa + &p.t * pb
    })
}

/// Closed-form tree cumulants of the secant point on the caterpillar:
/// `t_I = t(1 - t)(1 - 2t)^{|I| - 2} prod_{i in I} (b_i - a_i)` for `|I| >= 2`.
pub fn secant_tree_cumulants(p: &SecantParams) -> Result<CoordinateVector> {
    if p.n() < 2 {
        return Err(Error::InvalidArgument("need at least two variables".into()));
    }
    let tree = TreeTopology::caterpillar(p.n())?;
    let space = StateSpace::binary(p.n());
    let var = &p.t * (int(1) - &p.t);
    let skew = int(1) - int(2) * &p.t;
    let values = space
        .states()
        .map(|x| {
            let idx = multiset_of(&x);
            match idx.len() {
                0 => Rational::zero(),
                1 => (int(1) - &p.t) * &p.a[idx[0]] + &p.t * &p.b[idx[0]],
                d => idx
                    .iter()
                    .fold(&var * Scalar::pow(&skew, d - 2), |acc, &i| acc * (&p.b[i] - &p.a[i])),
            }
        })
        .collect();
    CoordinateVector::new(space, CoordinateSystem::tree(tree), values)
}

/// Outcome of evaluating the binomials of one split.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitReport<S: Scalar = Rational> {
    pub side_a: Vec<usize>,
    pub side_b: Vec<usize>,
    pub checked: usize,
    pub max_residual: S,
    /// Largest violation, 0-based, when nonzero.
    pub witness: Option<BinomialWitness>,
}

/// `(I, J, I', J')` of the binomial `t_{I+J} t_{I'+J'} - t_{I+J'} t_{I'+J}`.
pub type BinomialWitness = (Vec<usize>, Vec<usize>, Vec<usize>, Vec<usize>);

impl<S: Scalar> SplitReport<S> {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_residual.is_near_zero(tol)
    }
}

fn nonempty_subsets(set: &[usize]) -> Vec<Vec<usize>> {
    (1u32..(1 << set.len()))
        .map(|mask| {
            set.iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect()
}

/// Every `t_{I+J} t_{I'+J'} - t_{I+J'} t_{I'+J}` for nonempty `I, I'` in `A`
/// and `J, J'` in `B`, with the largest absolute value reported.
pub fn verify_split_binomials<S: Scalar>(tv: &CoordinateVector<S>, a: &[usize], b: &[usize]) -> Result<SplitReport<S>> {
    let n = tv.space().n_vars();
    if !tv.space().is_binary() {
        return Err(Error::Unsupported("split binomials need a binary space".into()));
    }
    let mut seen = vec![false; n];
    for &v in a.iter().chain(b) {
        if v >= n || seen[v] {
            return Err(Error::InvalidArgument(
                "A and B must be disjoint sets of variables".into(),
            ));
        }
        seen[v] = true;
    }
    let value = |s: &[usize], t: &[usize]| {
        let mut x = vec![0; n];
        for &v in s.iter().chain(t) {
            x[v] = 1;
        }
        tv.get(&x).clone()
    };
    let sa = nonempty_subsets(a);
    let sb = nonempty_subsets(b);
    let mut report = SplitReport {
        side_a: a.to_vec(),
        side_b: b.to_vec(),
        checked: 0,
        max_residual: S::zero(),
        witness: None,
    };
    for i in &sa {
        for i2 in &sa {
            for j in &sb {
                for j2 in &sb {
                    let r = (value(i, j) * value(i2, j2) - value(i, j2) * value(i2, j)).abs_value();
                    report.checked += 1;
                    if r > report.max_residual {
                        report.max_residual = r;
                        report.witness = Some((i.clone(), j.clone(), i2.clone(), j2.clone()));
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Split binomials of every edge of `tree`.
pub fn verify_tree_splits<S: Scalar>(tv: &CoordinateVector<S>, tree: &TreeTopology) -> Result<Vec<SplitReport<S>>> {
    tree.edge_splits()
        .into_iter()
        .map(|(a, b)| verify_split_binomials(tv, &a, &b))
        .collect()
}

/// Emission law of one observed variable: its value map and
/// `table[h][x] = P(X = x | H = h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Emission {
    pub values: Vec<Rational>,
    pub table: [Vec<Rational>; 2],
}

impl Emission {
    pub fn binary(p0: Rational, p1: Rational) -> Self {
        Emission {
            values: vec![int(0), int(1)],
            table: [vec![int(1) - &p0, p0], vec![int(1) - &p1, p1]],
        }
    }

    fn mean_given(&self, h: usize) -> Rational {
        self.values.iter().zip(&self.table[h]).map(|(v, p)| v * p).sum()
    }
}

/// Binary hidden Markov chain `H_1 -> ... -> H_n`, each `X_i` emitted from
/// `H_i` alone.
#[derive(Clone, Debug, PartialEq)]
pub struct HmmParams {
    initial: [Rational; 2],
    transitions: Vec<EdgeTable>,
    emissions: Vec<Emission>,
}

impl HmmParams {
    pub fn new(initial: [Rational; 2], transitions: Vec<EdgeTable>, emissions: Vec<Emission>) -> Result<Self> {
        let n = emissions.len();
        if n == 0 || transitions.len() + 1 != n {
            return Err(Error::InvalidArgument(format!(
                "{n} emissions need {} transitions, got {}",
                n.saturating_sub(1),
                transitions.len()
            )));
        }
        let sums_to_one =
            |row: &[Rational]| row.iter().sum::<Rational>().is_one() && row.iter().all(|p| !p.is_negative());
        if !sums_to_one(&initial) {
            return Err(Error::InvalidDistribution("initial distribution".into()));
        }
        for (k, t) in transitions.iter().enumerate() {
            if !t.iter().all(|row| sums_to_one(row)) {
                return Err(Error::InvalidDistribution(format!("transition {} -> {}", k + 1, k + 2)));
            }
        }
        for (k, e) in emissions.iter().enumerate() {
            if e.values.len() < 2
                || e.table
                    .iter()
                    .any(|row| row.len() != e.values.len() || !sums_to_one(row))
            {
                return Err(Error::InvalidDistribution(format!("emission {}", k + 1)));
            }
        }
        let p = HmmParams {
            initial,
            transitions,
            emissions,
        };
        if let Some(i) = p.hidden_means().iter().position(|m| m.is_zero() || m.is_one()) {
            return Err(Error::Degenerate(format!("hidden state {} is constant", i + 1)));
        }
        Ok(p)
    }

    /// Homogeneous chain started from its stationary law
    /// `P(H = 1) = p01 / (p01 + p10)`.
    pub fn homogeneous(n: usize, p01: Rational, p10: Rational, emission: Emission) -> Result<Self> {
        let total = &p01 + &p10;
        if total.is_zero() {
            return Err(Error::Degenerate("chain never moves".into()));
        }
        let pi1 = &p01 / &total;
        let t: EdgeTable = [[int(1) - &p01, p01.clone()], [p10.clone(), int(1) - &p10]];
        Self::new([int(1) - &pi1, pi1], vec![t; n.saturating_sub(1)], vec![emission; n])
    }

    pub fn n(&self) -> usize {
        self.emissions.len()
    }

    pub fn emissions(&self) -> &[Emission] {
        &self.emissions
    }

    pub fn transitions(&self) -> &[EdgeTable] {
        &self.transitions
    }

    pub fn initial(&self) -> &[Rational; 2] {
        &self.initial
    }

    pub fn space(&self) -> Result<StateSpace> {
        let arities: Vec<usize> = self.emissions.iter().map(|e| e.values.len()).collect();
        StateSpace::with_values(&arities, self.emissions.iter().map(|e| e.values.clone()).collect())
    }

    /// `P(H_i = 1)`.
    pub fn hidden_means(&self) -> Vec<Rational> {
        let mut out = vec![self.initial[1].clone()];
        for t in &self.transitions {
            let p = out.last().expect("nonempty").clone();
            out.push((int(1) - &p) * &t[0][1] + &p * &t[1][1]);
        }
        out
    }

    /// `rho_{i,i+1} = Corr(H_i, H_{i+1})`.
    pub fn rho(&self) -> Vec<Radical> {
        let p = self.hidden_means();
        self.transitions
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let eta = &t[1][1] - &t[0][1];
                let ratio = bern_var(&p[i]) / bern_var(&p[i + 1]);
                &Radical::from_rational(eta) * &Radical::sqrt(&ratio).expect("positive variances")
            })
            .collect()
    }

    /// Skewness of `H_i`: `(1 - 2p) / sqrt(p(1 - p))`.
    pub fn gamma(&self) -> Vec<Radical> {
        self.hidden_means()
            .iter()
            .map(|p| {
                let s = Radical::sqrt(&bern_var(p))
                    .expect("positive variance")
                    .recip()
                    .expect("nonzero");
                &Radical::from_rational(int(1) - int(2) * p) * &s
            })
            .collect()
    }

    /// `b_i = Corr(H_i, X_i)`; fails when some `X_i` is constant.
    pub fn b(&self) -> Result<Vec<Radical>> {
        let p = self.hidden_means();
        self.emissions
            .iter()
            .zip(&p)
            .enumerate()
            .map(|(i, (e, p))| {
                let (m0, m1) = (e.mean_given(0), e.mean_given(1));
                let mean = (int(1) - p) * &m0 + p * &m1;
                let second: Rational = (0..2)
                    .map(|h| {
                        let w = if h == 0 { int(1) - p } else { p.clone() };
                        w * e
                            .values
                            .iter()
                            .zip(&e.table[h])
                            .map(|(v, q)| v * v * q)
                            .sum::<Rational>()
                    })
                    .sum();
                let var_x = second - &mean * &mean;
                if !var_x.is_positive() {
                    return Err(Error::Degenerate(format!("X_{} is constant", i + 1)));
                }
                Ok(&Radical::from_rational(m1 - m0) * &Radical::sqrt(&(bern_var(p) / var_x))?)
            })
            .collect()
    }

    /// Hidden chain with each observation hung off its hidden node; inner
    /// nodes are named `h1, h2, ...` and the tree is rooted at `h1`.
    pub fn tree(&self) -> Result<TreeTopology> {
        let n = self.n();
        let mut names: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
        names.extend((1..=n).map(|i| format!("h{i}")));
        let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (n + i, i)).collect();
        edges.extend((0..n.saturating_sub(1)).map(|i| (n + i, n + i + 1)));
        if n == 1 {
            return Err(Error::InvalidTree("a single observation has no tree cumulants".into()));
        }
        TreeTopology::from_parts(names, &edges, Some(n))
    }
}

fn bern_var(p: &Rational) -> Rational {
    p * (int(1) - p)
}

/// Exact joint law of `(X_1, ..., X_n)` by the forward recursion over the
/// hidden chain.
pub fn hmm_distribution(params: &HmmParams) -> Result<DiscreteDistribution> {
    let space = params.space()?;
    // alpha[k][h] = P(x_1..x_i, H_i = h) with prefixes in mixed radix
    let e0 = &params.emissions[0];
    let mut alpha: Vec<[Rational; 2]> = (0..e0.values.len())
        .map(|x| {
            [
                &params.initial[0] * &e0.table[0][x],
                &params.initial[1] * &e0.table[1][x],
            ]
        })
        .collect();
    for (t, e) in params.transitions.iter().zip(&params.emissions[1..]) {
        let r = e.values.len();
        let mut next = Vec::with_capacity(alpha.len() * r);
        for a in &alpha {
            let pred = [&a[0] * &t[0][0] + &a[1] * &t[1][0], &a[0] * &t[0][1] + &a[1] * &t[1][1]];
            for x in 0..r {
                next.push([&pred[0] * &e.table[0][x], &pred[1] * &e.table[1][x]]);
            }
        }
        alpha = next;
    }
    let table = alpha.into_iter().map(|[a, b]| a + b).collect();
    DiscreteDistribution::new(space, table, Mode::Probabilistic)
}

/// Closed-form normalized tree cumulants of the chain: for `I = {i_1 < ... < i_d}`,
/// `prod_{j=2}^{d-1} gamma_{i_j} prod_{i=i_1}^{i_d - 1} rho_{i,i+1} prod_{i in I} b_i`.
/// Keys are 0-based index sets with `|I| >= 2`.
pub fn hmm_normalized_tree_cumulants(params: &HmmParams) -> Result<BTreeMap<Vec<usize>, Radical>> {
    let n = params.n();
    let rho = params.rho();
    let gamma = params.gamma();
    let b = params.b()?;
    let mut out = BTreeMap::new();
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let d = idx.len();
        if d < 2 {
            continue;
        }
        let mut v = Radical::from_rational(int(1));
        for &i in &idx[1..d - 1] {
            v = &v * &gamma[i];
        }
        for r in &rho[idx[0]..idx[d - 1]] {
            v = &v * r;
        }
        for &i in &idx {
            v = &v * &b[i];
        }
        out.insert(idx, v);
    }
    Ok(out)
}

/// Outcome of the homogeneous-chain identities.
#[derive(Clone, Debug, PartialEq)]
pub struct HmmIdentityReport {
    pub equalities_checked: usize,
    pub equality_failures: usize,
    pub inequalities_checked: usize,
    pub inequality_failures: usize,
    /// Largest `|lhs - rhs|` over the equalities, in floating point.
    pub max_residual: f64,
}

impl HmmIdentityReport {
    pub fn holds(&self) -> bool {
        self.equality_failures == 0 && self.inequality_failures == 0
    }
}

/// `t_{i,i+2} t_{j,j+2} = t_{k,k+3} t_{l,l+1}` for all admissible `i, j, k, l`
/// and `t_ij t_ik t_jk >= 0` for `i < j < k`, on normalized tree cumulants.
pub fn verify_homogeneous_identities(norm: &BTreeMap<Vec<usize>, Radical>, n: usize) -> Result<HmmIdentityReport> {
    let get = |i: usize, j: usize| {
        norm.get(&vec![i, j])
            .ok_or_else(|| Error::InvalidArgument(format!("missing entry {}{}", i + 1, j + 1)))
    };
    let mut r = HmmIdentityReport {
        equalities_checked: 0,
        equality_failures: 0,
        inequalities_checked: 0,
        inequality_failures: 0,
        max_residual: 0.0,
    };
    if n >= 4 {
        for i in 0..n - 2 {
            for j in 0..n - 2 {
                for k in 0..n - 3 {
                    for l in 0..n - 1 {
                        let lhs = get(i, i + 2)? * get(j, j + 2)?;
                        let rhs = get(k, k + 3)? * get(l, l + 1)?;
                        r.equalities_checked += 1;
                        if lhs != rhs {
                            r.equality_failures += 1;
                        }
                        r.max_residual = r.max_residual.max((lhs.to_f64() - rhs.to_f64()).abs());
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let p = &(get(i, j)? * get(i, k)?) * get(j, k)?;
                r.inequalities_checked += 1;
                if p.signum() == std::cmp::Ordering::Less {
                    r.inequality_failures += 1;
                }
            }
        }
    }
    Ok(r)
}

/// Float version of [`verify_homogeneous_identities`] with absolute tolerance.
pub fn verify_homogeneous_identities_f64(
    norm: &BTreeMap<Vec<usize>, f64>,
    n: usize,
    tol: f64,
) -> Result<HmmIdentityReport> {
    let get = |i: usize, j: usize| {
        norm.get(&vec![i, j])
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("missing entry {}{}", i + 1, j + 1)))
    };
    let mut r = HmmIdentityReport {
        equalities_checked: 0,
        equality_failures: 0,
        inequalities_checked: 0,
        inequality_failures: 0,
        max_residual: 0.0,
    };
    if n >= 4 {
        for i in 0..n - 2 {
            for j in 0..n - 2 {
                for k in 0..n - 3 {
                    for l in 0..n - 1 {
                        let res = (get(i, i + 2)? * get(j, j + 2)? - get(k, k + 3)? * get(l, l + 1)?).abs();
                        r.equalities_checked += 1;
                        if res > tol {
                            r.equality_failures += 1;
                        }
                        r.max_residual = r.max_residual.max(res);
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                r.inequalities_checked += 1;
                if get(i, j)? * get(i, k)? * get(j, k)? < -tol {
                    r.inequality_failures += 1;
                }
            }
        }
    }
    Ok(r)
}

/// Regression quantities of a binary `X_r`: `eta_{rA} = mu'_{rA} / k_rr` and
/// `tau_r = k_rrr / k_rr`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryRegression {
    pub r: usize,
    pub k_rr: Rational,
    pub tau: Rational,
}

impl BinaryRegression {
    pub fn new(dist: &DiscreteDistribution, r: usize) -> Result<Self> {
        if dist.space().arities().get(r) != Some(&2) {
            return Err(Error::InvalidArgument(format!("X_{} is not binary", r + 1)));
        }
        let k_rr = dist.variance(r);
        if k_rr.is_zero() {
            return Err(Error::Degenerate(format!("X_{} has zero variance", r + 1)));
        }
        let mean = dist.mean(r);
        let k_rrr = dist.expectation(|x| Scalar::pow(&(dist.value_at(r, x) - &mean), 3));
        Ok(BinaryRegression {
            r,
            tau: k_rrr / &k_rr,
            k_rr,
        })
    }

    /// `eta_{rA}` for a set `A` of variables.
    pub fn eta(&self, dist: &DiscreteDistribution, a: &[usize]) -> Rational {
        let mut idx = vec![self.r];
        idx.extend_from_slice(a);
        central_product(dist, &idx) / &self.k_rr
    }
}

fn central_product(dist: &DiscreteDistribution, vars: &[usize]) -> Rational {
    let means: Vec<Rational> = vars.iter().map(|&v| dist.mean(v)).collect();
    dist.expectation(|x| vars.iter().zip(&means).map(|(&v, m)| dist.value_at(v, x) - m).product())
}

/// Result of a regression identity check.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionReport {
    /// Whether `X_i`, `X_j` and `X_C` are mutually independent given `X_r`.
    pub applicable: bool,
    pub lhs: Rational,
    pub rhs: Rational,
    pub residual: Rational,
}

/// `mu'_{ijC} = eta_ri eta_rj k_rr mu'_C + eta_ri eta_rj mu'_{rC} tau_r`,
/// valid when `X_r` is binary and `X_i, X_j, X_C` are independent given it.
pub fn binary_regression_identity_check(
    dist: &DiscreteDistribution,
    i: usize,
    j: usize,
    c: &[usize],
    r: usize,
) -> Result<RegressionReport> {
    let mut all = vec![i, j, r];
    all.extend_from_slice(c);
    let mut sorted = all.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != all.len() || sorted.last().is_some_and(|&v| v >= dist.space().n_vars()) {
        return Err(Error::InvalidArgument(
            "i, j, r and C must be distinct variables".into(),
        ));
    }
    let reg = BinaryRegression::new(dist, r)?;
    let (eta_i, eta_j) = (reg.eta(dist, &[i]), reg.eta(dist, &[j]));
    let mut ijc = vec![i, j];
    ijc.extend_from_slice(c);
    let mut rc = vec![r];
    rc.extend_from_slice(c);
    let lhs = central_product(dist, &ijc);
    let rhs = &eta_i * &eta_j * (&reg.k_rr * central_product(dist, c) + central_product(dist, &rc) * &reg.tau);
    let mut groups: Vec<Vec<usize>> = vec![vec![i], vec![j]];
    groups.extend(c.iter().map(|&v| vec![v]));
    Ok(RegressionReport {
        applicable: conditionally_independent(dist, &groups, r)?,
        residual: &lhs - &rhs,
        lhs,
        rhs,
    })
}

/// Whether the groups of variables are mutually independent given `X_r`.
pub fn conditionally_independent(dist: &DiscreteDistribution, groups: &[Vec<usize>], r: usize) -> Result<bool> {
    let mut vars: Vec<usize> = groups.concat();
    vars.push(r);
    let joint = dist.marginal(&vars)?;
    let pos = |v: usize| vars.iter().position(|&u| u == v).expect("listed");
    for xr in 0..dist.space().arities()[r] {
        let pr: Rational = joint
            .space()
            .states()
            .filter(|x| x[pos(r)] == xr)
            .map(|x| joint.prob(&x).clone())
            .sum();
        if pr.is_zero() {
            continue;
        }
        for x in joint.space().states().filter(|x| x[pos(r)] == xr) {
            let mut product = Rational::one();
            for g in groups {
                let m: Rational = joint
                    .space()
                    .states()
                    .filter(|y| y[pos(r)] == xr && g.iter().all(|&v| y[pos(v)] == x[pos(v)]))
                    .map(|y| joint.prob(&y).clone())
                    .sum();
                product *= m / &pr;
            }
            if joint.prob(&x) / &pr != product {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `E[X | Y = y] - (EX + Cov(X, Y) Var(Y)^{-1} (y - EY))` at both values of a
/// binary `Y`; zero for every joint law.
pub fn regression_line_residuals(dist: &DiscreteDistribution, x: usize, y: usize) -> Result<[Rational; 2]> {
    if dist.space().arities()[y] != 2 {
        return Err(Error::InvalidArgument(format!("X_{} is not binary", y + 1)));
    }
    let var_y = dist.variance(y);
    if var_y.is_zero() {
        return Err(Error::Degenerate(format!("X_{} has zero variance", y + 1)));
    }
    let slope = dist.covariance(x, y) / var_y;
    let (mx, my) = (dist.mean(x), dist.mean(y));
    let cond = conditional_moments(dist, &[x], &[y])?;
    let mut out = [Rational::zero(), Rational::zero()];
    for (state, value) in cond {
        let yv = dist.space().value(y, state[0]);
        let fitted = &mx + &slope * (yv - &my);
        out[state[0]] = value.map(|v| v - fitted).unwrap_or_default();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeFamily;
    use crate::lcumulant::{conditional_collapse, cumulants, detect_independence_structure, to_lcumulants};
    use crate::moments::moments_from_distribution;
    use crate::scalar::rat;
    use crate::trees::{
        contracted_tree_cumulants, gmm_tree_cumulants, normalized_tree_cumulants, subset_moments, tree_cumulants,
    };

    fn secant4() -> SecantParams {
        SecantParams::new(
            rat(2, 7),
            vec![rat(1, 3), rat(1, 5), rat(3, 4), rat(1, 2)],
            vec![rat(5, 6), rat(2, 3), rat(1, 9), rat(4, 7)],
        )
        .unwrap()
    }

    #[test]
    fn secant_simple_point() {
        let p = SecantParams::new(rat(1, 3), vec![int(0); 4], vec![int(1); 4]).unwrap();
        let m = secant_moments(&p);
        for (x, v) in m.iter() {
            let expect = if x.iter().all(|&k| k == 0) { int(1) } else { rat(1, 3) };
            assert_eq!(v, &expect);
        }
        let tc = secant_tree_cumulants(&p).unwrap();
        assert_eq!(tc.label(&[1, 2, 3, 4]), &rat(2, 81));
        let k = cumulants(&m).unwrap();
        assert_eq!(k.label(&[1, 2, 3, 4]), &rat(-2, 27));
        assert_eq!(k.label(&[1, 3]), &rat(2, 9));
    }

    #[test]
    fn secant_classical_cumulants() {
        let p = secant4();
        let k = cumulants(&secant_moments(&p)).unwrap();
        let t = &p.t;
        let d: Vec<Rational> = (0..4).map(|i| &p.b[i] - &p.a[i]).collect();
        let v = t * (int(1) - t);
        assert_eq!(k.label(&[2, 4]), &(&v * &d[1] * &d[3]));
        assert_eq!(
            k.label(&[1, 2, 4]),
            &(&v * (int(1) - int(2) * t) * &d[0] * &d[1] * &d[3])
        );
        let c4 = int(6) * t * t - int(6) * t + int(1);
        assert_eq!(k.label(&[1, 2, 3, 4]), &(&v * c4 * &d[0] * &d[1] * &d[2] * &d[3]));
    }

    #[test]
    fn secant_tree_cumulants_match_pipeline() {
        for n in 2..=5 {
            let p = SecantParams::new(
                rat(3, 11),
                (0..n).map(|i| rat(i as i64 + 1, 9)).collect(),
                (0..n).map(|i| rat(7 - i as i64, 8)).collect(),
            )
            .unwrap();
            let t = TreeTopology::caterpillar(n).unwrap();
            assert_eq!(
                tree_cumulants(&secant_moments(&p), &t).unwrap(),
                secant_tree_cumulants(&p).unwrap()
            );
        }
    }

    #[test]
    fn secant_one_cluster_coefficient() {
        let p = secant4();
        let oc = to_lcumulants(&secant_moments(&p), &LatticeFamily::OneCluster).unwrap();
        let t = &p.t;
        let prod: Rational = (0..4).map(|i| &p.b[i] - &p.a[i]).product();
        let coef = t * (int(1) - t) * (int(3) * t * t - int(3) * t + int(1));
        assert_eq!(oc.label(&[1, 2, 3, 4]), &(coef * prod));
    }

    #[test]
    fn secant_as_star_model() {
        let p = secant4();
        let (tree, params) = p.star_model().unwrap();
        let d = gmm_distribution(&tree, &params).unwrap();
        assert_eq!(moments_from_distribution(&d), secant_moments(&p));
        let (_, contracted) = contracted_tree_cumulants(&tree, &params).unwrap();
        assert_eq!(contracted.values(), secant_tree_cumulants(&p).unwrap().values());
        // collapse through the hidden root gives the top tree cumulant of the star
        let means = vec![p.a.clone(), p.b.clone()];
        let star = LatticeFamily::tree(tree.clone());
        let collapsed = conditional_collapse(&[int(1) - &p.t, p.t.clone()], &means, &star).unwrap();
        let direct = tree_cumulants(&secant_moments(&p), &tree).unwrap();
        assert_eq!(&collapsed, direct.label(&[1, 2, 3, 4]));
    }

    #[test]
    fn split_binomials_on_model_and_off() {
        let p = secant4();
        let tc = secant_tree_cumulants(&p).unwrap();
        let t = TreeTopology::caterpillar(4).unwrap();
        for r in verify_tree_splits(&tc, &t).unwrap() {
            assert!(r.holds(0.0));
        }
        let mut bad = tc.clone();
        bad.set(&[1, 0, 1, 0], rat(1, 2));
        let r = verify_split_binomials(&bad, &[0, 1], &[2, 3]).unwrap();
        assert!(!r.holds(0.0));
        assert_eq!(r.checked, 81);
    }

    #[test]
    fn gmm_quartet_pipeline() {
        let t = TreeTopology::quartet();
        let id = |s: &str| t.node_by_name(s).unwrap();
        let tb = |a: Rational, b: Rational| -> EdgeTable { [[int(1) - &a, a], [int(1) - &b, b]] };
        let params = GmmParams::new(
            &t,
            [rat(1, 4), rat(3, 4)],
            vec![
                (id("a"), id("1"), tb(rat(1, 7), rat(5, 8))),
                (id("a"), id("2"), tb(rat(2, 7), rat(1, 8))),
                (id("a"), id("b"), tb(rat(1, 3), rat(5, 6))),
                (id("b"), id("3"), tb(rat(4, 9), rat(1, 10))),
                (id("b"), id("4"), tb(rat(1, 11), rat(6, 11))),
            ],
        )
        .unwrap();
        let d = gmm_distribution(&t, &params).unwrap();
        assert_eq!(d.table().iter().sum::<Rational>(), int(1));
        let tc = tree_cumulants(&moments_from_distribution(&d), &t).unwrap();
        assert_eq!(tc, gmm_tree_cumulants(&t, &params).unwrap());
        let (t2, p2) = params.reroot(&t, id("3")).unwrap();
        assert_eq!(gmm_distribution(&t2, &p2).unwrap(), d);
    }

    fn hmm3() -> HmmParams {
        let tb = |a: Rational, b: Rational| -> EdgeTable { [[int(1) - &a, a], [int(1) - &b, b]] };
        HmmParams::new(
            [rat(1, 3), rat(2, 3)],
            vec![tb(rat(1, 4), rat(3, 5)), tb(rat(1, 6), rat(4, 7))],
            vec![
                Emission::binary(rat(1, 5), rat(3, 4)),
                Emission {
                    values: vec![int(-1), int(0), int(2)],
                    table: [
                        vec![rat(1, 2), rat(1, 3), rat(1, 6)],
                        vec![rat(1, 8), rat(1, 4), rat(5, 8)],
                    ],
                },
                Emission::binary(rat(2, 3), rat(1, 9)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn hmm_closed_form_matches_pipeline() {
        let p = hmm3();
        let d = hmm_distribution(&p).unwrap();
        assert_eq!(d.table().iter().sum::<Rational>(), int(1));
        let m = moments_from_distribution(&d);
        let tc = tree_cumulants(&subset_moments(&m).unwrap(), &p.tree().unwrap()).unwrap();
        let pipeline = normalized_tree_cumulants(&tc, &m).unwrap();
        assert_eq!(pipeline, hmm_normalized_tree_cumulants(&p).unwrap());
    }

    #[test]
    fn iid_chain_gives_independent_observations() {
        let t: EdgeTable = [[rat(2, 3), rat(1, 3)], [rat(2, 3), rat(1, 3)]];
        let p = HmmParams::new(
            [rat(2, 3), rat(1, 3)],
            vec![t.clone(), t],
            vec![Emission::binary(rat(1, 5), rat(1, 2)); 3],
        )
        .unwrap();
        let d = hmm_distribution(&p).unwrap();
        let k = cumulants(&moments_from_distribution(&d)).unwrap();
        assert!(detect_independence_structure(&k).unwrap().is_bottom());
    }

    #[test]
    fn homogeneous_identities() {
        let p = HmmParams::homogeneous(6, rat(1, 4), rat(1, 3), Emission::binary(rat(1, 6), rat(2, 3))).unwrap();
        let norm = hmm_normalized_tree_cumulants(&p).unwrap();
        let r = verify_homogeneous_identities(&norm, 6).unwrap();
        assert!(r.holds() && r.equalities_checked > 0 && r.max_residual < 1e-12);
        let hm = p.hidden_means();
        assert!(hm.iter().all(|m| m == &rat(3, 7)));
    }

    #[test]
    fn regression_identities() {
        let p = hmm3();
        let d = hmm_distribution(&p).unwrap();
        // rebuild with H_2 observed as an extra binary variable: star around it
        let space = StateSpace::binary(4);
        let star = SecantParams::new(
            rat(2, 5),
            vec![rat(1, 3), rat(1, 4), rat(3, 5)],
            vec![rat(3, 4), rat(1, 2), rat(1, 6)],
        )
        .unwrap();
        let mut table = vec![Rational::zero(); 16];
        for x in space.states() {
            let (w, col) = if x[3] == 1 {
                (star.t.clone(), &star.b)
            } else {
                (int(1) - &star.t, &star.a)
            };
            let mut pr = w;
            for i in 0..3 {
                pr *= if x[i] == 1 { col[i].clone() } else { int(1) - &col[i] };
            }
            table[space.index_of(&x)] = pr;
        }
        let joint = DiscreteDistribution::new(space, table, Mode::Probabilistic).unwrap();
        for c in [vec![], vec![2]] {
            let r = binary_regression_identity_check(&joint, 0, 1, &c, 3).unwrap();
            assert!(r.applicable);
            assert_eq!(r.residual, int(0));
        }
        let r = binary_regression_identity_check(&d, 0, 2, &[], 1);
        assert!(r.is_err(), "X_2 has three states");
        let r = binary_regression_identity_check(&d, 1, 2, &[], 0).unwrap();
        assert!(!r.applicable);
        for (x, y) in [(1, 0), (0, 2), (2, 0)] {
            assert_eq!(regression_line_residuals(&d, x, y).unwrap(), [int(0), int(0)]);
        }
    }
}
