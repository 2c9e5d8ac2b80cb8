//! Moments to L-cumulants and back, plus the identities built on them.
//!
//! For an index multiset `A` the L-cumulant is
//! `l_A = sum_{pi in L(A)} m(pi, top) prod_{B in pi} mu_B`, where blocks of
//! positions are mapped back to sub-multisets of `A`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::lattice::{check_condition, quotient, Condition, LatticeFamily, PartitionLattice, CONDITION_CHECK_LIMIT};
use crate::moments::{
    distribution_from_moments, multiset_label, multiset_of, transform_values, CoordinateSystem, CoordinateVector,
    DiscreteDistribution, StateSpace,
};
use crate::partition::{enumerate_full, GroundSet, SetPartition};
use crate::scalar::{int, Rational, Scalar, DEFAULT_TOLERANCE};

/// Lattices of one family over the index multisets of one state space.
pub struct LCumulantSystem {
    family: LatticeFamily,
    space: StateSpace,
    lattices: RwLock<HashMap<Vec<usize>, Arc<PartitionLattice>>>,
    product_form: OnceLock<bool>,
}

impl LCumulantSystem {
    pub fn new(family: LatticeFamily, space: StateSpace) -> Result<Self> {
        match &family {
            LatticeFamily::Tree(t) => {
                if !space.is_binary() {
                    return Err(Error::Unsupported("tree cumulants need a binary state space".into()));
                }
                if space.n_vars() != t.n_leaves() {
                    return Err(Error::GroundMismatch(format!(
                        "{} variables for a tree with {} leaves",
                        space.n_vars(),
                        t.n_leaves()
                    )));
                }
            }
            LatticeFamily::Custom => {
                return Err(Error::Unsupported("a custom lattice does not define a family".into()))
            }
            _ => {}
        }
        Ok(LCumulantSystem {
            family,
            space,
            lattices: RwLock::new(HashMap::new()),
            product_form: OnceLock::new(),
        })
    }

    pub fn family(&self) -> &LatticeFamily {
        &self.family
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// `L(A)` for a multiset given as a sorted list of variables. Positional
    /// families share one lattice per size; trees key by leaf set.
    pub fn lattice(&self, multiset: &[usize]) -> Result<Arc<PartitionLattice>> {
        let key = if self.family.is_positional() {
            vec![multiset.len()]
        } else {
            multiset.to_vec()
        };
        if let Some(l) = self.lattices.read().expect("lattice cache poisoned").get(&key) {
            return Ok(l.clone());
        }
        let ground = if self.family.is_positional() {
            GroundSet::simple(multiset.len())
        } else {
            GroundSet::from_aliases(multiset.to_vec())
        };
        let lat = Arc::new(PartitionLattice::build(self.family.clone(), ground)?);
        Ok(self
            .lattices
            .write()
            .expect("lattice cache poisoned")
            .entry(key)
            .or_insert(lat)
            .clone())
    }

    fn max_order(&self) -> usize {
        self.space.arities().iter().map(|r| r - 1).sum()
    }

    /// Whether the product-form inverse has been verified for every index
    /// size this space produces.
    pub fn product_form_verified(&self) -> bool {
        *self.product_form.get_or_init(|| {
            let d = self.max_order();
            let size = match &self.family {
                LatticeFamily::Tree(t) => t.n_leaves(),
                _ => d,
            };
            size <= CONDITION_CHECK_LIMIT
                && matches!(check_condition(&self.family, Condition::C0, d), Ok(o) if o.holds() == Some(true))
        })
    }

    pub fn system(&self) -> CoordinateSystem {
        CoordinateSystem::Cumulants(self.family.clone())
    }
}

/// Exponent vector of the sub-multiset picked out by `positions` of `a`.
fn sub_exponents(n: usize, a: &[usize], positions: &[usize]) -> Vec<usize> {
    let mut y = vec![0; n];
    for &p in positions {
        y[a[p]] += 1;
    }
    y
}

fn block_product<S: Scalar>(v: &CoordinateVector<S>, a: &[usize], pi: &SetPartition) -> S {
    let n = v.space().n_vars();
    pi.blocks()
        .iter()
        .fold(S::one(), |acc, b| acc * v.get(&sub_exponents(n, a, b)).clone())
}

fn require_moments<S: Scalar>(mv: &CoordinateVector<S>) -> Result<()> {
    if mv.system() != &CoordinateSystem::Moments {
        return Err(Error::InvalidArgument(format!("expected moments, got {}", mv.system())));
    }
    Ok(())
}

/// Moments to L-cumulants of `family`. The entry at the empty index is 0.
pub fn to_lcumulants<S: Scalar>(mv: &CoordinateVector<S>, family: &LatticeFamily) -> Result<CoordinateVector<S>> {
    let sys = LCumulantSystem::new(family.clone(), mv.space().clone())?;
    to_lcumulants_with(&sys, mv)
}

pub fn to_lcumulants_with<S: Scalar>(sys: &LCumulantSystem, mv: &CoordinateVector<S>) -> Result<CoordinateVector<S>> {
    require_moments(mv)?;
    let space = mv.space().clone();
    let mut values = Vec::with_capacity(space.size());
    for x in space.states() {
        let a = multiset_of(&x);
        if a.is_empty() {
            values.push(S::zero());
            continue;
        }
        let lat = sys.lattice(&a)?;
        let mut acc = S::zero();
        for (pi, m) in lat.elements().iter().zip(lat.mobius_to_top()) {
            if !m.is_zero() {
                acc = acc + S::from_rational(m) * block_product(mv, &a, pi);
            }
        }
        values.push(acc);
    }
    CoordinateVector::new(space, sys.system(), values)
}

/// Inverse of [`to_lcumulants`]; the family is read from the vector's tag.
pub fn from_lcumulants<S: Scalar>(lv: &CoordinateVector<S>) -> Result<CoordinateVector<S>> {
    let family = lv
        .system()
        .family()
        .ok_or_else(|| Error::InvalidArgument(format!("expected L-cumulants, got {}", lv.system())))?;
    let sys = LCumulantSystem::new(family.clone(), lv.space().clone())?;
    if sys.product_form_verified() {
        from_lcumulants_product(&sys, lv)
    } else {
        from_lcumulants_triangular(&sys, lv)
    }
}

/// `mu_A = sum_{pi in L(A)} prod_{B in pi} l_B`, valid when intervals factor.
pub fn from_lcumulants_product<S: Scalar>(
    sys: &LCumulantSystem,
    lv: &CoordinateVector<S>,
) -> Result<CoordinateVector<S>> {
    let space = lv.space().clone();
    let mut values = Vec::with_capacity(space.size());
    for x in space.states() {
        let a = multiset_of(&x);
        if a.is_empty() {
            values.push(S::one());
            continue;
        }
        let lat = sys.lattice(&a)?;
        let mut acc = S::zero();
        for pi in lat.elements() {
            acc = acc + block_product(lv, &a, pi);
        }
        values.push(acc);
    }
    CoordinateVector::new(space, CoordinateSystem::Moments, values)
}

/// Order-by-order inverse: `mu_A = l_A - sum_{pi < top} m(pi, top) prod mu_B`,
/// where every block is a strictly smaller index.
pub fn from_lcumulants_triangular<S: Scalar>(
    sys: &LCumulantSystem,
    lv: &CoordinateVector<S>,
) -> Result<CoordinateVector<S>> {
    let space = lv.space().clone();
    let mut order: Vec<Vec<usize>> = space.states().collect();
    order.sort_by_key(|x| x.iter().sum::<usize>());
    let mut mv = CoordinateVector::new(space.clone(), CoordinateSystem::Moments, vec![S::zero(); space.size()])?;
    for x in order {
        let a = multiset_of(&x);
        if a.is_empty() {
            mv.set(&x, S::one());
            continue;
        }
        let lat = sys.lattice(&a)?;
        let mut acc = lv.get(&x).clone();
        for (pi, m) in lat.elements().iter().zip(lat.mobius_to_top()) {
            if !pi.is_top() && !m.is_zero() {
                acc = acc - S::from_rational(m) * block_product(&mv, &a, pi);
            }
        }
        mv.set(&x, acc);
    }
    Ok(mv)
}

/// L-cumulants from classical cumulants: `l_A = sum prod_{B} k_B` over the
/// partitions of `A` whose closure in `L(A)` is the top.
pub fn l_from_classical<S: Scalar>(kv: &CoordinateVector<S>, family: &LatticeFamily) -> Result<CoordinateVector<S>> {
    if kv.system() != &CoordinateSystem::Cumulants(LatticeFamily::Full) {
        return Err(Error::InvalidArgument(format!(
            "expected classical cumulants, got {}",
            kv.system()
        )));
    }
    let sys = LCumulantSystem::new(family.clone(), kv.space().clone())?;
    let space = kv.space().clone();
    let mut full_by_size: HashMap<usize, Vec<SetPartition>> = HashMap::new();
    let mut values = Vec::with_capacity(space.size());
    for x in space.states() {
        let a = multiset_of(&x);
        if a.is_empty() {
            values.push(S::zero());
            continue;
        }
        let lat = sys.lattice(&a)?;
        let all = match full_by_size.get(&a.len()) {
            Some(v) => v,
            None => full_by_size.entry(a.len()).or_insert(enumerate_full(a.len())?),
        };
        let mut acc = S::zero();
        for delta in all {
            if lat.closure(delta)?.is_top() {
                acc = acc + block_product(kv, &a, delta);
            }
        }
        values.push(acc);
    }
    CoordinateVector::new(space, sys.system(), values)
}

/// Classical cumulants.
pub fn cumulants<S: Scalar>(mv: &CoordinateVector<S>) -> Result<CoordinateVector<S>> {
    to_lcumulants(mv, &LatticeFamily::Full)
}

/// Source of moments `E[X_{i_1} ... X_{i_d}]` for arbitrary index lists,
/// including orders above what a state space aliases.
pub trait MomentSource {
    fn n_vars(&self) -> usize;
    fn moment(&self, indices: &[usize]) -> Rational;
}

/// Moments read off a probability table; memoized by sorted index list.
pub struct TableMoments {
    dist: DiscreteDistribution,
    memo: RwLock<HashMap<Vec<usize>, Rational>>,
}

impl TableMoments {
    pub fn new(dist: DiscreteDistribution) -> Self {
        TableMoments {
            dist,
            memo: RwLock::new(HashMap::new()),
        }
    }
}

impl MomentSource for TableMoments {
    fn n_vars(&self) -> usize {
        self.dist.space().n_vars()
    }

    fn moment(&self, indices: &[usize]) -> Rational {
        let mut key = indices.to_vec();
        key.sort_unstable();
        if let Some(v) = self.memo.read().expect("moment cache poisoned").get(&key) {
            return v.clone();
        }
        let v = self
            .dist
            .expectation(|x| key.iter().map(|&i| self.dist.value_at(i, x).clone()).product());
        self.memo.write().expect("moment cache poisoned").insert(key, v.clone());
        v
    }
}

/// Moments of `QX` by multilinear expansion of the moments of `X`.
pub struct LinearImage<'a> {
    base: &'a dyn MomentSource,
    q: Vec<Vec<Rational>>,
}

impl<'a> LinearImage<'a> {
    pub fn new(base: &'a dyn MomentSource, q: Vec<Vec<Rational>>) -> Result<Self> {
        if q.is_empty() || q.iter().any(|row| row.len() != base.n_vars()) {
            return Err(Error::InvalidArgument(format!(
                "Q must have {} columns and at least one row",
                base.n_vars()
            )));
        }
        Ok(LinearImage { base, q })
    }
}

impl MomentSource for LinearImage<'_> {
    fn n_vars(&self) -> usize {
        self.q.len()
    }

    fn moment(&self, indices: &[usize]) -> Rational {
        let n = self.base.n_vars();
        let d = indices.len();
        let mut acc = Rational::zero();
        let mut tuple = vec![0usize; d];
        for flat in 0..n.pow(d as u32) {
            let mut rest = flat;
            for slot in tuple.iter_mut().rev() {
                *slot = rest % n;
                rest /= n;
            }
            let coef: Rational = indices
                .iter()
                .zip(&tuple)
                .map(|(&j, &i)| self.q[j][i].clone())
                .product();
            if !coef.is_zero() {
                acc += coef * self.base.moment(&tuple);
            }
        }
        acc
    }
}

/// Order-`d` tensor of L-cumulants over index tuples, entry `(i_1..i_d)`
/// stored at the mixed-radix position with `i_1` most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulantTensor {
    n: usize,
    order: usize,
    entries: Vec<Rational>,
}

impl CumulantTensor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    pub fn get(&self, index: &[usize]) -> &Rational {
        &self.entries[index.iter().fold(0, |acc, &i| acc * self.n + i)]
    }

    fn tuples(n: usize, d: usize) -> impl Iterator<Item = Vec<usize>> {
        (0..n.pow(d as u32)).map(move |mut flat| {
            let mut t = vec![0; d];
            for slot in t.iter_mut().rev() {
                *slot = flat % n;
                flat /= n;
            }
            t
        })
    }
}

fn require_c2(family: &LatticeFamily) -> Result<()> {
    if family.is_positional() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "the {family} family does not give the same lattice for every index of a given size"
        )))
    }
}

/// Tensor of L-cumulants of order `d` computed from any moment source.
pub fn cumulant_tensor_from(source: &dyn MomentSource, family: &LatticeFamily, d: usize) -> Result<CumulantTensor> {
    require_c2(family)?;
    if d == 0 {
        return Err(Error::InvalidArgument("tensor order must be positive".into()));
    }
    let lat = PartitionLattice::simple(family.clone(), d)?;
    let n = source.n_vars();
    let entries = CumulantTensor::tuples(n, d)
        .map(|tuple| {
            let mut acc = Rational::zero();
            for (pi, m) in lat.elements().iter().zip(lat.mobius_to_top()) {
                if m.is_zero() {
                    continue;
                }
                let mut prod = m.clone();
                for b in pi.blocks() {
                    let idx: Vec<usize> = b.iter().map(|&p| tuple[p]).collect();
                    prod *= source.moment(&idx);
                }
                acc += prod;
            }
            acc
        })
        .collect();
    Ok(CumulantTensor { n, order: d, entries })
}

/// Tensor of L-cumulants of order `d`; higher moments than the space
/// aliases are read off the distribution the moments determine.
pub fn cumulant_tensor(mv: &CoordinateVector<Rational>, family: &LatticeFamily, d: usize) -> Result<CumulantTensor> {
    require_moments(mv)?;
    let source = TableMoments::new(distribution_from_moments(mv)?);
    cumulant_tensor_from(&source, family, d)
}

/// `(Q . T)_{j_1..j_d} = sum_{i} q_{j_1 i_1} ... q_{j_d i_d} T_{i_1..i_d}`,
/// applied one mode at a time.
pub fn multilinear_action(q: &[Vec<Rational>], t: &CumulantTensor) -> Result<CumulantTensor> {
    let m = q.len();
    if m == 0 || q.iter().any(|row| row.len() != t.n) {
        return Err(Error::InvalidArgument(format!("Q must have {} columns", t.n)));
    }
    let d = t.order;
    let mut cur = t.entries.clone();
    // dims[k] is the current extent of mode k
    let mut dims = vec![t.n; d];
    for mode in 0..d {
        let outer: usize = dims[..mode].iter().product();
        let inner: usize = dims[mode + 1..].iter().product();
        let mut next = vec![Rational::zero(); outer * m * inner];
        for o in 0..outer {
            for j in 0..m {
                for i in 0..t.n {
                    let c = &q[j][i];
                    if c.is_zero() {
                        continue;
                    }
                    for r in 0..inner {
                        next[(o * m + j) * inner + r] += c * &cur[(o * t.n + i) * inner + r];
                    }
                }
            }
        }
        dims[mode] = m;
        cur = next;
    }
    Ok(CumulantTensor {
        n: m,
        order: d,
        entries: cur,
    })
}

/// Result of comparing L-cumulants before and after `X -> X + a`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftReport<S: Scalar> {
    /// Whether every split `i | A \ i` lies in the family's lattices.
    pub splits_present: bool,
    /// `max |l~_A - l_A|` over indices with `|A| >= 2`.
    pub higher_order_residual: S,
    /// `max |l~_i - l_i - a_i|`.
    pub first_order_residual: S,
    /// First index where a higher-order L-cumulant changed.
    pub witness: Option<String>,
}

impl<S: Scalar> ShiftReport<S> {
    pub fn invariant(&self) -> bool {
        self.higher_order_residual.is_near_zero(DEFAULT_TOLERANCE)
            && self.first_order_residual.is_near_zero(DEFAULT_TOLERANCE)
    }
}

pub fn shift_invariance_check<S: Scalar>(
    mv: &CoordinateVector<S>,
    family: &LatticeFamily,
    shift: &[Rational],
) -> Result<ShiftReport<S>> {
    let n = mv.space().n_vars();
    let ones = vec![int(1); n];
    let before = to_lcumulants(mv, family)?;
    let after = to_lcumulants(&transform_values(mv, &ones, shift)?, family)?;
    let mut higher = S::zero();
    let mut first = S::zero();
    let mut witness = None;
    for (x, b) in before.iter() {
        let order: usize = x.iter().sum();
        let a = after.get(&x).clone();
        if order == 1 {
            let i = x.iter().position(|&k| k == 1).expect("order one");
            let r = (a - b.clone() - S::from_rational(&shift[i])).abs_value();
            if r > first {
                first = r;
            }
        } else if order >= 2 {
            let r = (a - b.clone()).abs_value();
            if witness.is_none() && !r.is_near_zero(DEFAULT_TOLERANCE) {
                witness = Some(multiset_label(&x));
            }
            if r > higher {
                higher = r;
            }
        }
    }
    let splits_present = match family {
        LatticeFamily::Tree(_) => true,
        f => matches!(
            check_condition(f, Condition::C1, mv.space().arities().iter().map(|r| r - 1).sum::<usize>().min(CONDITION_CHECK_LIMIT)),
            Ok(o) if o.holds() == Some(true)
        ),
    };
    Ok(ShiftReport {
        splits_present,
        higher_order_residual: higher,
        first_order_residual: first,
        witness,
    })
}

/// Finest `pi0` in `L([n])` such that every L-cumulant whose index meets two
/// blocks vanishes, and `pi0` induces an element of `L(A)` on every index.
/// Returns the top partition when nothing finer is certified.
pub fn detect_independence_structure<S: Scalar>(lv: &CoordinateVector<S>) -> Result<SetPartition> {
    let family = lv
        .system()
        .family()
        .ok_or_else(|| Error::InvalidArgument(format!("expected L-cumulants, got {}", lv.system())))?;
    let sys = LCumulantSystem::new(family.clone(), lv.space().clone())?;
    let n = lv.space().n_vars();
    let all: Vec<usize> = (0..n).collect();
    let candidates = sys.lattice(&all)?;
    let states: Vec<Vec<usize>> = lv.space().states().collect();
    'candidates: for pi0 in candidates.elements() {
        if pi0.is_top() {
            return Ok(pi0.clone());
        }
        for x in &states {
            let a = multiset_of(x);
            if a.is_empty() {
                continue;
            }
            let labels: Vec<usize> = a.iter().map(|&v| pi0.block_of(v)).collect();
            let induced = SetPartition::from_labels(&labels);
            if induced.is_top() {
                continue;
            }
            if !sys.lattice(&a)?.contains(&induced) {
                continue 'candidates;
            }
            if !lv.get(x).is_near_zero(DEFAULT_TOLERANCE) {
                continue 'candidates;
            }
        }
        return Ok(pi0.clone());
    }
    Ok(SetPartition::top(n))
}

fn brillinger_family_ok(family: &LatticeFamily) -> Result<()> {
    match family {
        LatticeFamily::Full | LatticeFamily::Interval => Ok(()),
        LatticeFamily::Tree(t) if t.is_caterpillar() => Ok(()),
        other => Err(Error::Unsupported(format!(
            "upper intervals of the {other} family are not copies of the family lattice; \
             go through classical cumulants instead"
        ))),
    }
}

fn check_mixture<S: Scalar>(weights: &[Rational], conds: &[CoordinateVector<S>]) -> Result<()> {
    if weights.is_empty() || weights.len() != conds.len() {
        return Err(Error::InvalidArgument(
            "one conditional vector per value of Y is required".into(),
        ));
    }
    let total: Rational = weights.iter().sum();
    if !total.is_one() {
        return Err(Error::InvalidDistribution(format!("weights of Y sum to {total}")));
    }
    let space = conds[0].space();
    if conds.iter().any(|c| c.space().arities() != space.arities()) {
        return Err(Error::GroundMismatch(
            "conditional vectors over different spaces".into(),
        ));
    }
    Ok(())
}

/// Unconditional L-cumulants from conditional ones:
/// `l_A = sum_{pi in L(A)} l^_pi`, where `l^_pi` is the L-cumulant of the
/// vector of conditional L-cumulants `(l^Y_B)_{B in pi}` with Y random.
pub fn brillinger<S: Scalar>(
    weights: &[Rational],
    conds: &[CoordinateVector<S>],
    family: &LatticeFamily,
) -> Result<CoordinateVector<S>> {
    brillinger_family_ok(family)?;
    check_mixture(weights, conds)?;
    let want = CoordinateSystem::Cumulants(family.clone());
    if conds.iter().any(|c| c.system() != &want) {
        return Err(Error::InvalidArgument(format!(
            "conditional vectors must hold {want} coordinates"
        )));
    }
    let space = conds[0].space().clone();
    let sys = LCumulantSystem::new(family.clone(), space.clone())?;
    let w: Vec<S> = weights.iter().map(S::from_rational).collect();
    let n = space.n_vars();
    let mut block_lattices: HashMap<usize, PartitionLattice> = HashMap::new();
    let mut values = Vec::with_capacity(space.size());
    for x in space.states() {
        let a = multiset_of(&x);
        if a.is_empty() {
            values.push(S::zero());
            continue;
        }
        let lat = sys.lattice(&a)?;
        let mut total = S::zero();
        for pi in lat.elements() {
            let blocks = pi.blocks();
            // coarsenings of pi with their Mobius weights, via blocks-as-points
            let uppers: Vec<(SetPartition, Rational)> = match family {
                LatticeFamily::Tree(_) => {
                    let id = lat.id_of(pi).expect("element");
                    lat.up_set(id)
                        .iter()
                        .map(|&j| (quotient(pi, lat.element(j)), lat.mobius_to_top()[j].clone()))
                        .collect()
                }
                _ => {
                    let k = blocks.len();
                    if let std::collections::hash_map::Entry::Vacant(e) = block_lattices.entry(k) {
                        e.insert(PartitionLattice::simple(family.clone(), k)?);
                    }
                    let bl = &block_lattices[&k];
                    bl.elements()
                        .iter()
                        .cloned()
                        .zip(bl.mobius_to_top().iter().cloned())
                        .collect()
                }
            };
            let cond_values: Vec<Vec<S>> = conds
                .iter()
                .map(|c| blocks.iter().map(|b| c.get(&sub_exponents(n, &a, b)).clone()).collect())
                .collect();
            let mut hat = S::zero();
            for (sigma, m) in uppers {
                if m.is_zero() {
                    continue;
                }
                let mut prod = S::from_rational(&m);
                for group in sigma.blocks() {
                    let mut e = S::zero();
                    for (y, cv) in cond_values.iter().enumerate() {
                        let term = group.iter().fold(S::one(), |acc, &b| acc * cv[b].clone());
                        e = e + w[y].clone() * term;
                    }
                    prod = prod * e;
                }
                hat = hat + prod;
            }
            total = total + hat;
        }
        values.push(total);
    }
    CoordinateVector::new(space, sys.system(), values)
}

/// `l_{1..n}` of the vector of conditional means `(mu_1^Y, ..., mu_n^Y)`,
/// which equals `l_{1..n}` of `X` when the `X_i` are independent given `Y`.
pub fn conditional_collapse<S: Scalar>(
    weights: &[Rational],
    cond_means: &[Vec<S>],
    family: &LatticeFamily,
) -> Result<S> {
    if weights.is_empty() || weights.len() != cond_means.len() {
        return Err(Error::InvalidArgument(
            "one mean vector per value of Y is required".into(),
        ));
    }
    let n = cond_means[0].len();
    if n == 0 || cond_means.iter().any(|m| m.len() != n) {
        return Err(Error::InvalidArgument(
            "mean vectors must share a positive length".into(),
        ));
    }
    let lat = match family {
        LatticeFamily::Tree(t) => {
            if t.n_leaves() != n {
                return Err(Error::GroundMismatch(format!(
                    "{n} means for a tree with {} leaves",
                    t.n_leaves()
                )));
            }
            PartitionLattice::build(family.clone(), GroundSet::simple(n))?
        }
        LatticeFamily::Custom => return Err(Error::Unsupported("custom family".into())),
        f => PartitionLattice::simple(f.clone(), n)?,
    };
    let w: Vec<S> = weights.iter().map(S::from_rational).collect();
    let mut acc = S::zero();
    for (pi, m) in lat.elements().iter().zip(lat.mobius_to_top()) {
        if m.is_zero() {
            continue;
        }
        let mut prod = S::from_rational(m);
        for b in pi.blocks() {
            let mut e = S::zero();
            for (y, means) in cond_means.iter().enumerate() {
                e = e + w[y].clone() * b.iter().fold(S::one(), |acc, &i| acc * means[i].clone());
            }
            prod = prod * e;
        }
        acc = acc + prod;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{central_moments, moments_from_distribution, Mode};
    use crate::scalar::rat;
    use crate::trees::TreeTopology;
    use rand::{Rng, SeedableRng};

    fn random_dist(arities: &[usize], seed: u64) -> DiscreteDistribution {
        let space = StateSpace::new(arities).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let raw: Vec<i64> = (0..space.size()).map(|_| rng.gen_range(1..30)).collect();
        let total: i64 = raw.iter().sum();
        DiscreteDistribution::new(space, raw.iter().map(|&w| rat(w, total)).collect(), Mode::Probabilistic).unwrap()
    }

    #[test]
    fn second_order_is_covariance_for_every_family() {
        let m = moments_from_distribution(&random_dist(&[2, 2, 2, 2], 1));
        let fams = [
            LatticeFamily::Full,
            LatticeFamily::NonCrossing,
            LatticeFamily::Interval,
            LatticeFamily::OneCluster,
            LatticeFamily::tree(TreeTopology::quartet()),
        ];
        for f in fams {
            let l = to_lcumulants(&m, &f).unwrap();
            assert_eq!(l.label(&[2]), m.label(&[2]));
            assert_eq!(l.label(&[1, 3]), &(m.label(&[1, 3]) - m.label(&[1]) * m.label(&[3])));
        }
    }

    #[test]
    fn third_order_cumulants() {
        let m = moments_from_distribution(&random_dist(&[2, 2, 2], 2));
        let mu = |l: &[usize]| m.label(l).clone();
        let k = cumulants(&m).unwrap();
        let expect = mu(&[1, 2, 3]) - mu(&[1]) * mu(&[2, 3]) - mu(&[2]) * mu(&[1, 3]) - mu(&[1, 2]) * mu(&[3])
            + int(2) * mu(&[1]) * mu(&[2]) * mu(&[3]);
        assert_eq!(k.label(&[1, 2, 3]), &expect);
        let b = to_lcumulants(&m, &LatticeFamily::Interval).unwrap();
        let expect_b =
            mu(&[1, 2, 3]) - mu(&[1]) * mu(&[2, 3]) - mu(&[1, 2]) * mu(&[3]) + mu(&[1]) * mu(&[2]) * mu(&[3]);
        assert_eq!(b.label(&[1, 2, 3]), &expect_b);
    }

    #[test]
    fn multiset_cumulant() {
        let m = moments_from_distribution(&random_dist(&[3, 2], 3));
        let mu = |l: &[usize]| m.label(l).clone();
        let k = cumulants(&m).unwrap();
        let expect = mu(&[1, 1, 2]) - int(2) * mu(&[1]) * mu(&[1, 2]) - mu(&[1, 1]) * mu(&[2])
            + int(2) * mu(&[1]) * mu(&[1]) * mu(&[2]);
        assert_eq!(k.label(&[1, 1, 2]), &expect);
    }

    #[test]
    fn one_cluster_gives_central_moments() {
        let m = moments_from_distribution(&random_dist(&[3, 2, 2], 4));
        let c = to_lcumulants(&m, &LatticeFamily::OneCluster).unwrap();
        let cm = central_moments(&m).unwrap();
        for (x, v) in c.iter() {
            if x.iter().sum::<usize>() >= 2 {
                assert_eq!(v, cm.get(&x));
            }
        }
    }

    #[test]
    fn round_trips_both_inverses() {
        let m = moments_from_distribution(&random_dist(&[2, 3, 2], 5));
        for f in [
            LatticeFamily::Full,
            LatticeFamily::NonCrossing,
            LatticeFamily::Interval,
            LatticeFamily::OneCluster,
        ] {
            let l = to_lcumulants(&m, &f).unwrap();
            let sys = LCumulantSystem::new(f.clone(), m.space().clone()).unwrap();
            assert!(sys.product_form_verified());
            assert_eq!(from_lcumulants_product(&sys, &l).unwrap(), m);
            assert_eq!(from_lcumulants_triangular(&sys, &l).unwrap(), m);
        }
    }

    #[test]
    fn classical_bridge() {
        let m = moments_from_distribution(&random_dist(&[2, 2, 2, 2], 6));
        let k = cumulants(&m).unwrap();
        let cat = LatticeFamily::tree(TreeTopology::caterpillar(4).unwrap());
        let t = l_from_classical(&k, &cat).unwrap();
        assert_eq!(t, to_lcumulants(&m, &cat).unwrap());
        let kk = |l: &[usize]| k.label(l).clone();
        let expect = kk(&[1, 2, 3, 4]) + kk(&[1, 3]) * kk(&[2, 4]) + kk(&[1, 4]) * kk(&[2, 3]);
        assert_eq!(t.label(&[1, 2, 3, 4]), &expect);
        assert_eq!(l_from_classical(&k, &LatticeFamily::Full).unwrap(), k);
    }

    #[test]
    fn tensor_law_small() {
        let m = moments_from_distribution(&random_dist(&[2, 2, 2], 7));
        let q = vec![vec![rat(1, 2), int(-1), int(3)], vec![int(0), rat(2, 3), int(1)]];
        let base = TableMoments::new(distribution_from_moments(&m).unwrap());
        let image = LinearImage::new(&base, q.clone()).unwrap();
        for f in [LatticeFamily::Full, LatticeFamily::Interval] {
            let t = cumulant_tensor(&m, &f, 3).unwrap();
            let lhs = cumulant_tensor_from(&image, &f, 3).unwrap();
            assert_eq!(multilinear_action(&q, &t).unwrap(), lhs);
        }
        let b = cumulant_tensor(&m, &LatticeFamily::Interval, 3).unwrap();
        assert_ne!(b.get(&[0, 1, 2]), b.get(&[1, 0, 2]));
        assert!(cumulant_tensor(&m, &LatticeFamily::tree(TreeTopology::caterpillar(3).unwrap()), 2).is_err());
    }

    #[test]
    fn shifts() {
        let m = moments_from_distribution(&random_dist(&[2, 2, 2], 8));
        let a = vec![rat(1, 3), rat(-2, 5), rat(7, 2)];
        for f in [
            LatticeFamily::Full,
            LatticeFamily::NonCrossing,
            LatticeFamily::OneCluster,
        ] {
            let r = shift_invariance_check(&m, &f, &a).unwrap();
            assert!(r.invariant() && r.splits_present, "{f}");
        }
        let r = shift_invariance_check(&m, &LatticeFamily::Interval, &a).unwrap();
        assert!(!r.splits_present);
        assert_eq!(r.witness.as_deref(), Some("123"));
    }

    #[test]
    fn detects_product_structure() {
        let s = StateSpace::binary(3);
        let d = DiscreteDistribution::product(
            s,
            &[
                vec![rat(1, 3), rat(2, 3)],
                vec![rat(1, 4), rat(3, 4)],
                vec![rat(1, 2), rat(1, 2)],
            ],
        )
        .unwrap();
        let l = cumulants(&moments_from_distribution(&d)).unwrap();
        assert!(detect_independence_structure(&l).unwrap().is_bottom());
        // X2 independent of (X1, X3): the interval family cannot see it
        let pair = random_dist(&[2, 2], 9);
        let mut table = vec![Rational::zero(); 8];
        for x1 in 0..2 {
            for x2 in 0..2 {
                for x3 in 0..2 {
                    let p2 = if x2 == 0 { rat(1, 5) } else { rat(4, 5) };
                    table[x1 * 4 + x2 * 2 + x3] = pair.prob(&[x1, x3]) * p2;
                }
            }
        }
        let d = DiscreteDistribution::new(StateSpace::binary(3), table, Mode::Probabilistic).unwrap();
        let m = moments_from_distribution(&d);
        let full = detect_independence_structure(&cumulants(&m).unwrap()).unwrap();
        assert_eq!(full.to_string(), "13|2");
        let iv = detect_independence_structure(&to_lcumulants(&m, &LatticeFamily::Interval).unwrap()).unwrap();
        assert!(iv.is_top());
    }

    #[test]
    fn brillinger_covariance() {
        let comps = [random_dist(&[2, 2], 10), random_dist(&[2, 2], 11)];
        let w = [rat(1, 3), rat(2, 3)];
        let conds: Vec<_> = comps
            .iter()
            .map(|d| cumulants(&moments_from_distribution(d)).unwrap())
            .collect();
        let mix_table: Vec<Rational> = (0..4)
            .map(|i| &w[0] * &comps[0].table()[i] + &w[1] * &comps[1].table()[i])
            .collect();
        let mix = DiscreteDistribution::new(StateSpace::binary(2), mix_table, Mode::Probabilistic).unwrap();
        let direct = cumulants(&moments_from_distribution(&mix)).unwrap();
        assert_eq!(brillinger(&w, &conds, &LatticeFamily::Full).unwrap(), direct);
        assert!(brillinger(&w, &conds, &LatticeFamily::OneCluster).is_err());
        let single = brillinger(&[rat(1, 1)], &conds[..1], &LatticeFamily::Full).unwrap();
        assert_eq!(single, conds[0]);
    }

    #[test]
    fn collapse_of_constant_means() {
        let means = vec![vec![rat(1, 2), rat(1, 3), rat(1, 5)]; 2];
        for f in [LatticeFamily::Full, LatticeFamily::OneCluster, LatticeFamily::Interval] {
            assert!(conditional_collapse(&[rat(1, 4), rat(3, 4)], &means, &f)
                .unwrap()
                .is_zero());
        }
    }
}
