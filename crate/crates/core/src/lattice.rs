//! Explicit partition lattices, their Möbius functions and structural checks.
//!
//! A lattice stores its elements in graded order (more blocks first), which is
//! a linear extension of refinement, so every recursion over it can run in a
//! single forward or backward sweep.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock, RwLock};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{
    check_capacity, enumerate_unchecked, graded_cmp, is_interval, is_noncrossing, is_one_cluster, meet_unchecked,
    refines_unchecked, GroundSet, SetPartition,
};
use crate::scalar::{format_rational, int, Rational};
use crate::trees::TreeTopology;

/// Which partitions of each index set make up the lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LatticeFamily {
    Full,
    NonCrossing,
    Interval,
    OneCluster,
    /// Partitions of leaves induced by deleting edges of the tree.
    Tree(Arc<TreeTopology>),
    /// A user-supplied element list; only available through
    /// [`PartitionLattice::from_elements`].
    Custom,
}

impl LatticeFamily {
    pub fn tree(t: TreeTopology) -> Self {
        LatticeFamily::Tree(Arc::new(t))
    }

    pub fn name(&self) -> &'static str {
        match self {
            LatticeFamily::Full => "full",
            LatticeFamily::NonCrossing => "noncrossing",
            LatticeFamily::Interval => "interval",
            LatticeFamily::OneCluster => "onecluster",
            LatticeFamily::Tree(_) => "tree",
            LatticeFamily::Custom => "custom",
        }
    }

    /// Families whose lattice on `A` depends only on `|A|` and position order.
    pub fn is_positional(&self) -> bool {
        !matches!(self, LatticeFamily::Tree(_) | LatticeFamily::Custom)
    }

    pub fn tree_topology(&self) -> Option<&TreeTopology> {
        match self {
            LatticeFamily::Tree(t) => Some(t),
            _ => None,
        }
    }

    fn admits(&self, pi: &SetPartition) -> bool {
        match self {
            LatticeFamily::Full => true,
            LatticeFamily::NonCrossing => is_noncrossing(pi),
            LatticeFamily::Interval => is_interval(pi),
            LatticeFamily::OneCluster => is_one_cluster(pi),
            LatticeFamily::Tree(_) | LatticeFamily::Custom => unreachable!("not a predicate family"),
        }
    }
}

impl FromStr for LatticeFamily {
    type Err = Error;

    /// Parses the positional family names; trees need a topology and are
    /// built with [`LatticeFamily::tree`].
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "full" | "pi" | "classical" => Ok(LatticeFamily::Full),
            "noncrossing" | "nc" | "free" => Ok(LatticeFamily::NonCrossing),
            "interval" | "boolean" => Ok(LatticeFamily::Interval),
            "onecluster" | "central" => Ok(LatticeFamily::OneCluster),
            _ => Err(Error::InvalidArgument(format!("unknown lattice family {s:?}"))),
        }
    }
}

impl fmt::Display for LatticeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

type Row = Arc<HashMap<usize, Rational>>;

pub struct PartitionLattice {
    family: LatticeFamily,
    ground: GroundSet,
    elements: Vec<SetPartition>,
    index: HashMap<SetPartition, usize>,
    up: OnceLock<Vec<Vec<usize>>>,
    to_top: OnceLock<Vec<Rational>>,
    rows: RwLock<HashMap<usize, Row>>,
}

/// Above this many elements up-sets are not materialized pairwise.
const PAIRWISE_LIMIT: usize = 6000;

/// Largest ground set for which build-time meet closure is verified.
const MEET_CHECK_LIMIT: usize = 5;

impl PartitionLattice {
    pub fn build(family: LatticeFamily, ground: GroundSet) -> Result<Self> {
        let d = ground.len();
        if d == 0 {
            return Err(Error::EmptySubset);
        }
        check_capacity(d)?;
        let elements = match &family {
            LatticeFamily::Tree(t) => {
                if !ground.is_simple() {
                    return Err(Error::Unsupported(
                        "tree partitions are only defined when every variable appears once".into(),
                    ));
                }
                let mut leaves = Vec::with_capacity(d);
                for &a in ground.aliases() {
                    if a >= t.n_leaves() {
                        return Err(Error::GroundMismatch(format!(
                            "variable {} is not a leaf of a tree with {} leaves",
                            a + 1,
                            t.n_leaves()
                        )));
                    }
                    leaves.push(t.leaf_node(a));
                }
                let sub = t.induced_subtree(ground.aliases())?;
                crate::trees::forest_partitions(t.n_nodes(), &sub.edges, &leaves)
            }
            LatticeFamily::Custom => {
                return Err(Error::InvalidArgument(
                    "custom lattices are built from an explicit element list".into(),
                ))
            }
            f => enumerate_unchecked(d).into_iter().filter(|p| f.admits(p)).collect(),
        };
        let lat = Self::assemble(family, ground, elements);
        if d <= MEET_CHECK_LIMIT {
            lat.verify_meets()?;
        }
        Ok(lat)
    }

    /// Lattice on `[d]` for a positional family.
    pub fn simple(family: LatticeFamily, d: usize) -> Result<Self> {
        Self::build(family, GroundSet::simple(d))
    }

    /// A user-supplied partition lattice. Accepted when it contains the
    /// bottom and top partitions and every pair has a greatest lower bound.
    pub fn from_elements(ground: GroundSet, elements: Vec<SetPartition>) -> Result<Self> {
        let d = ground.len();
        if d == 0 {
            return Err(Error::EmptySubset);
        }
        check_capacity(d)?;
        if let Some(bad) = elements.iter().find(|p| p.len() != d) {
            return Err(Error::GroundMismatch(format!(
                "{bad} is not a partition of {d} elements"
            )));
        }
        let mut unique: Vec<SetPartition> = elements.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        unique.sort_by(graded_cmp);
        let lat = Self::assemble(LatticeFamily::Custom, ground, unique);
        if !lat.contains(&SetPartition::bottom(d)) || !lat.contains(&SetPartition::top(d)) {
            return Err(Error::InvalidLattice("bottom and top partitions are required".into()));
        }
        for i in 0..lat.len() {
            for j in i + 1..lat.len() {
                lat.meet_in_ids(i, j)?;
            }
        }
        Ok(lat)
    }

    fn assemble(family: LatticeFamily, ground: GroundSet, mut elements: Vec<SetPartition>) -> Self {
        elements.sort_by(graded_cmp);
        let index = elements.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        PartitionLattice {
            family,
            ground,
            elements,
            index,
            up: OnceLock::new(),
            to_top: OnceLock::new(),
            rows: RwLock::new(HashMap::new()),
        }
    }

    fn verify_meets(&self) -> Result<()> {
        for (i, a) in self.elements.iter().enumerate() {
            for b in &self.elements[i + 1..] {
                let m = meet_unchecked(a, b);
                if !self.index.contains_key(&m) {
                    return Err(Error::InvalidLattice(format!(
                        "meet of {a} and {b} in the full lattice is {m}, which is missing"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn family(&self) -> &LatticeFamily {
        &self.family
    }

    pub fn ground(&self) -> &GroundSet {
        &self.ground
    }

    pub fn ground_size(&self) -> usize {
        self.ground.len()
    }

    /// Elements in graded order: finest first, top last.
    pub fn elements(&self) -> &[SetPartition] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, pi: &SetPartition) -> bool {
        self.index.contains_key(pi)
    }

    pub fn id_of(&self, pi: &SetPartition) -> Option<usize> {
        self.index.get(pi).copied()
    }

    pub fn element(&self, id: usize) -> &SetPartition {
        &self.elements[id]
    }

    pub fn bottom_id(&self) -> usize {
        0
    }

    pub fn top_id(&self) -> usize {
        self.elements.len() - 1
    }

    fn require(&self, pi: &SetPartition) -> Result<usize> {
        if pi.len() != self.ground_size() {
            return Err(Error::GroundMismatch(format!(
                "{pi} has {} elements, lattice ground has {}",
                pi.len(),
                self.ground_size()
            )));
        }
        self.id_of(pi)
            .ok_or_else(|| Error::InvalidArgument(format!("{pi} is not in the {} lattice", self.family)))
    }

    /// Ids of all elements above `id` (inclusive), ascending.
    pub fn up_set(&self, id: usize) -> &[usize] {
        &self.up_sets()[id]
    }

    fn up_sets(&self) -> &Vec<Vec<usize>> {
        self.up.get_or_init(|| {
            let n = self.elements.len();
            if n <= PAIRWISE_LIMIT {
                (0..n)
                    .map(|i| {
                        (i..n)
                            .filter(|&j| refines_unchecked(&self.elements[i], &self.elements[j]))
                            .collect()
                    })
                    .collect()
            } else {
                self.up_sets_by_coarsening()
            }
        })
    }

    fn up_sets_by_coarsening(&self) -> Vec<Vec<usize>> {
        let mut full_by_size: HashMap<usize, Vec<SetPartition>> = HashMap::new();
        self.elements
            .iter()
            .map(|pi| {
                let k = pi.num_blocks();
                let coarse = full_by_size.entry(k).or_insert_with(|| enumerate_unchecked(k));
                let mut ids: Vec<usize> = coarse.iter().filter_map(|s| self.id_of(&pi.coarsen(s))).collect();
                ids.sort_unstable();
                ids
            })
            .collect()
    }

    pub fn leq(&self, a: usize, b: usize) -> bool {
        a <= b && self.up_sets()[a].binary_search(&b).is_ok()
    }

    /// Möbius function `m(pi, nu)`; fails unless `pi <= nu` in the lattice.
    pub fn mobius(&self, pi: &SetPartition, nu: &SetPartition) -> Result<Rational> {
        let (a, b) = (self.require(pi)?, self.require(nu)?);
        self.mobius_ids(a, b)
    }

    pub fn mobius_ids(&self, a: usize, b: usize) -> Result<Rational> {
        if !self.leq(a, b) {
            return Err(Error::NotComparable(format!(
                "{} is not below {}",
                self.elements[a], self.elements[b]
            )));
        }
        Ok(self.row(a).get(&b).cloned().expect("row covers the up-set"))
    }

    /// `m(pi, delta)` for every `delta >= pi`, from the defining recursion
    /// `m(pi, delta) = -sum_{pi <= delta' < delta} m(pi, delta')`.
    fn row(&self, a: usize) -> Row {
        if let Some(r) = self.rows.read().expect("mobius cache poisoned").get(&a) {
            return r.clone();
        }
        let up = self.up_set(a);
        let mut values: Vec<Rational> = Vec::with_capacity(up.len());
        for (k, &delta) in up.iter().enumerate() {
            if k == 0 {
                values.push(Rational::one());
                continue;
            }
            let mut acc = Rational::zero();
            for (k2, &lower) in up[..k].iter().enumerate() {
                if self.leq(lower, delta) {
                    acc += &values[k2];
                }
            }
            values.push(-acc);
        }
        let row: Row = Arc::new(up.iter().copied().zip(values).collect());
        // a concurrent fill computes the same values; whichever lands wins
        self.rows
            .write()
            .expect("mobius cache poisoned")
            .entry(a)
            .or_insert(row)
            .clone()
    }

    /// `m(pi, top)` for every element, indexed like [`Self::elements`].
    pub fn mobius_to_top(&self) -> &[Rational] {
        self.to_top.get_or_init(|| {
            if self.elements.len() > PAIRWISE_LIMIT && self.quotient_is_family() {
                self.mobius_to_top_by_quotient()
            } else {
                self.mobius_to_top_recursive()
            }
        })
    }

    pub fn mobius_to_top_of(&self, pi: &SetPartition) -> Result<Rational> {
        let id = self.require(pi)?;
        Ok(self.mobius_to_top()[id].clone())
    }

    /// Column recursion `m(pi, top) = -sum_{pi < delta <= top} m(delta, top)`.
    pub(crate) fn mobius_to_top_recursive(&self) -> Vec<Rational> {
        let n = self.elements.len();
        let mut col = vec![Rational::zero(); n];
        col[n - 1] = Rational::one();
        for i in (0..n - 1).rev() {
            let mut acc = Rational::zero();
            for &j in &self.up_set(i)[1..] {
                acc += &col[j];
            }
            col[i] = -acc;
        }
        col
    }

    /// Full and interval lattices have `[pi, top]` isomorphic to the family
    /// lattice on `|pi|` points, so the column recursion collapses to one
    /// value per block count.
    fn quotient_is_family(&self) -> bool {
        matches!(self.family, LatticeFamily::Full | LatticeFamily::Interval)
    }

    pub(crate) fn mobius_to_top_by_quotient(&self) -> Vec<Rational> {
        let d = self.ground_size();
        // counts[k][j]: elements of the family lattice on [k] with j blocks
        let mut by_blocks: Vec<Rational> = vec![Rational::zero(); d + 1];
        by_blocks[1] = Rational::one();
        for k in 2..=d {
            let mut counts = vec![0u64; k + 1];
            if k == d {
                for e in &self.elements {
                    counts[e.num_blocks()] += 1;
                }
            } else {
                for e in enumerate_unchecked(k) {
                    if self.family.admits(&e) {
                        counts[e.num_blocks()] += 1;
                    }
                }
            }
            let mut acc = Rational::zero();
            for (j, &c) in counts.iter().enumerate().take(k).skip(1) {
                acc += &by_blocks[j] * int(c as i64);
            }
            by_blocks[k] = -acc;
        }
        self.elements
            .iter()
            .map(|e| by_blocks[e.num_blocks()].clone())
            .collect()
    }

    /// Smallest lattice element above a partition of the ground set.
    pub fn closure(&self, delta: &SetPartition) -> Result<SetPartition> {
        if delta.len() != self.ground_size() {
            return Err(Error::GroundMismatch(format!(
                "{delta} does not partition the lattice ground"
            )));
        }
        if self.contains(delta) {
            return Ok(delta.clone());
        }
        let uppers: Vec<usize> = (0..self.len())
            .filter(|&i| refines_unchecked(delta, &self.elements[i]))
            .collect();
        let mut meet = self.elements[uppers[0]].clone();
        for &u in &uppers[1..] {
            meet = meet_unchecked(&meet, &self.elements[u]);
        }
        if self.contains(&meet) {
            return Ok(meet);
        }
        let minimal: Vec<usize> = uppers
            .iter()
            .copied()
            .filter(|&u| !uppers.iter().any(|&v| v != u && self.leq(v, u)))
            .collect();
        match minimal.as_slice() {
            [only] => Ok(self.elements[*only].clone()),
            _ => Err(Error::InvalidLattice(format!("{delta} has no unique closure"))),
        }
    }

    /// Greatest lower bound inside the lattice.
    pub fn meet_in(&self, pi: &SetPartition, nu: &SetPartition) -> Result<SetPartition> {
        let (a, b) = (self.require(pi)?, self.require(nu)?);
        Ok(self.elements[self.meet_in_ids(a, b)?].clone())
    }

    pub fn meet_in_ids(&self, a: usize, b: usize) -> Result<usize> {
        let m = meet_unchecked(&self.elements[a], &self.elements[b]);
        if let Some(id) = self.id_of(&m) {
            return Ok(id);
        }
        let lower: Vec<usize> = (0..self.len()).filter(|&i| self.leq(i, a) && self.leq(i, b)).collect();
        let maximal: Vec<usize> = lower
            .iter()
            .copied()
            .filter(|&l| !lower.iter().any(|&o| o != l && self.leq(l, o)))
            .collect();
        match maximal.as_slice() {
            [only] => Ok(*only),
            _ => Err(Error::InvalidLattice(format!(
                "{} and {} have no greatest lower bound",
                self.elements[a], self.elements[b]
            ))),
        }
    }

    /// `sum_{pi : pi ^ pi0 = delta} m(pi, top)`, which vanishes whenever
    /// `pi0` is not the top.
    pub fn weisner_sum(&self, pi0: &SetPartition, delta: &SetPartition) -> Result<Rational> {
        let p0 = self.require(pi0)?;
        let dl = self.require(delta)?;
        if p0 == self.top_id() {
            return Err(Error::InvalidArgument(
                "the fixed element must differ from the top".into(),
            ));
        }
        let to_top = self.mobius_to_top();
        let mut acc = Rational::zero();
        for (pi, m) in to_top.iter().enumerate() {
            if self.meet_in_ids(pi, p0)? == dl {
                acc += m;
            }
        }
        Ok(acc)
    }

    pub fn interval(&self, bottom: &SetPartition, top: &SetPartition) -> Result<LatticeInterval<'_>> {
        let (b, t) = (self.require(bottom)?, self.require(top)?);
        if !self.leq(b, t) {
            return Err(Error::NotComparable(format!("{bottom} is not below {top}")));
        }
        let elements = self.up_set(b).iter().copied().filter(|&x| self.leq(x, t)).collect();
        Ok(LatticeInterval {
            lattice: self,
            bottom: b,
            top: t,
            elements,
        })
    }

    /// The blocks-as-points picture of `[pi, top]`: each `delta >= pi` as a
    /// partition of the blocks of `pi`, numbered by their minimal elements.
    pub fn upper_quotients(&self, pi: &SetPartition) -> Result<Vec<SetPartition>> {
        let id = self.require(pi)?;
        Ok(self
            .up_set(id)
            .iter()
            .map(|&j| quotient(pi, &self.elements[j]))
            .collect())
    }

    pub fn dump(&self) -> LatticeDump {
        LatticeDump {
            family: self.family.name().to_string(),
            ground_size: self.ground_size(),
            elements: self.elements.iter().map(rgs_string).collect(),
            blocks: self.elements.iter().map(|e| e.to_string()).collect(),
            mobius_to_top: self.mobius_to_top().iter().map(format_rational).collect(),
        }
    }
}

impl fmt::Debug for PartitionLattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartitionLattice")
            .field("family", &self.family.name())
            .field("ground", &self.ground)
            .field("elements", &self.elements.len())
            .finish()
    }
}

/// `delta` (coarser than `pi`) as a partition of the blocks of `pi`.
pub fn quotient(pi: &SetPartition, delta: &SetPartition) -> SetPartition {
    let labels: Vec<usize> = pi.blocks().iter().map(|b| delta.block_of(b[0])).collect();
    SetPartition::from_labels(&labels)
}

fn rgs_string(p: &SetPartition) -> String {
    if p.num_blocks() <= 10 {
        p.rgs().iter().map(|&c| char::from(b'0' + c)).collect()
    } else {
        p.rgs().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
    }
}

/// Elements between two comparable lattice elements, with the Möbius values
/// inherited from the lattice.
pub struct LatticeInterval<'a> {
    lattice: &'a PartitionLattice,
    bottom: usize,
    top: usize,
    elements: Vec<usize>,
}

impl LatticeInterval<'_> {
    pub fn bottom(&self) -> &SetPartition {
        self.lattice.element(self.bottom)
    }

    pub fn top(&self) -> &SetPartition {
        self.lattice.element(self.top)
    }

    pub fn elements(&self) -> impl Iterator<Item = &SetPartition> + '_ {
        self.elements.iter().map(|&i| self.lattice.element(i))
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn mobius(&self, pi: &SetPartition, nu: &SetPartition) -> Result<Rational> {
        let (a, b) = (self.lattice.require(pi)?, self.lattice.require(nu)?);
        if !self.elements.contains(&a) || !self.elements.contains(&b) {
            return Err(Error::InvalidArgument("element outside the interval".into()));
        }
        self.lattice.mobius_ids(a, b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeDump {
    pub family: String,
    pub ground_size: usize,
    pub elements: Vec<String>,
    pub blocks: Vec<String>,
    pub mobius_to_top: Vec<String>,
}

/// Known closed forms for `m(pi, top)`, used to cross-check the recursion.
pub fn closed_form_mobius_to_top(family: &LatticeFamily, pi: &SetPartition) -> Option<Rational> {
    let k = pi.num_blocks() as i64;
    let sign = if k % 2 == 1 { 1 } else { -1 };
    match family {
        LatticeFamily::Full => Some(int(sign * (1..k).product::<i64>())),
        LatticeFamily::Interval => Some(int(sign)),
        LatticeFamily::OneCluster => {
            let n = pi.len() as i64;
            if pi.is_bottom() && n >= 2 {
                Some(int(if n % 2 == 1 { n - 1 } else { -(n - 1) }))
            } else {
                Some(int(sign))
            }
        }
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Condition {
    /// Intervals factor as products of block lattices.
    C0,
    /// Every split `i | A \ i` is in the lattice.
    C1,
    /// The lattice on `A` depends only on `|A|`.
    C2,
    /// Upper intervals `[pi, top]` look like the family lattice on `|pi|` points.
    C3,
}

impl FromStr for Condition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "C0" => Ok(Condition::C0),
            "C1" => Ok(Condition::C1),
            "C2" => Ok(Condition::C2),
            "C3" => Ok(Condition::C3),
            _ => Err(Error::InvalidArgument(format!("unknown condition {s:?}"))),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConditionOutcome {
    Holds,
    Fails { witness: String },
    NotChecked { reason: String },
}

impl ConditionOutcome {
    pub fn holds(&self) -> Option<bool> {
        match self {
            ConditionOutcome::Holds => Some(true),
            ConditionOutcome::Fails { .. } => Some(false),
            ConditionOutcome::NotChecked { .. } => None,
        }
    }

    pub fn witness(&self) -> Option<&str> {
        match self {
            ConditionOutcome::Fails { witness } => Some(witness),
            _ => None,
        }
    }
}

/// Largest ground set examined by [`check_condition`].
pub const CONDITION_CHECK_LIMIT: usize = 6;

/// Exhaustive check of a structural condition on every index set of size at
/// most `d` (positional families) or every leaf subset (trees, where `d` is
/// ignored and the leaf count must be within the limit).
pub fn check_condition(family: &LatticeFamily, which: Condition, d: usize) -> Result<ConditionOutcome> {
    let size = match family {
        LatticeFamily::Tree(t) => t.n_leaves(),
        LatticeFamily::Custom => {
            return Ok(ConditionOutcome::NotChecked {
                reason: "conditions are defined for lattice families, not single lattices".into(),
            })
        }
        _ => d,
    };
    if size == 0 {
        return Err(Error::EmptySubset);
    }
    if size > CONDITION_CHECK_LIMIT {
        return Ok(ConditionOutcome::NotChecked {
            reason: format!("size {size} is above the exhaustive limit {CONDITION_CHECK_LIMIT}"),
        });
    }
    let grounds = index_grounds(family, size);
    let mut cache: HashMap<Vec<usize>, Arc<PartitionLattice>> = HashMap::new();
    let mut get = |g: &GroundSet| -> Result<Arc<PartitionLattice>> {
        let key = g.aliases().to_vec();
        if let Some(l) = cache.get(&key) {
            return Ok(l.clone());
        }
        let l = Arc::new(PartitionLattice::build(family.clone(), g.clone())?);
        cache.insert(key, l.clone());
        Ok(l)
    };
    let outcome = match which {
        Condition::C0 => {
            for g in &grounds {
                let lat = get(g)?;
                for a in 0..lat.len() {
                    for &b in lat.up_set(a) {
                        let (pi, nu) = (lat.element(a), lat.element(b));
                        let interval = lat.up_set(a).iter().filter(|&&x| lat.leq(x, b)).count();
                        let mut product = 1usize;
                        for block in nu.blocks() {
                            let sub = get(&g.restrict(&block))?;
                            let bottom = sub.require(&pi.restrict(&block)?)?;
                            product *= sub.up_set(bottom).len();
                        }
                        if interval != product {
                            return Ok(ConditionOutcome::Fails {
                                witness: format!("[{pi}, {nu}] has {interval} elements, the block product {product}"),
                            });
                        }
                    }
                }
            }
            ConditionOutcome::Holds
        }
        Condition::C1 => {
            for g in &grounds {
                let lat = get(g)?;
                let k = g.len();
                if k < 2 {
                    continue;
                }
                for i in 0..k {
                    let rest: Vec<usize> = (0..k).filter(|&j| j != i).collect();
                    let split = SetPartition::from_blocks(k, &[vec![i], rest.clone()])?;
                    if !lat.contains(&split) {
                        let names: String = rest.iter().map(|&j| (g.alias(j) + 1).to_string()).collect();
                        return Ok(ConditionOutcome::Fails {
                            witness: format!("split {}|{}", g.alias(i) + 1, names),
                        });
                    }
                }
            }
            ConditionOutcome::Holds
        }
        Condition::C2 => match family {
            LatticeFamily::Tree(_) => {
                let mut seen: HashMap<usize, (Vec<usize>, Vec<SetPartition>)> = HashMap::new();
                for g in &grounds {
                    let lat = get(g)?;
                    let els = lat.elements().to_vec();
                    match seen.get(&g.len()) {
                        Some((other, prev)) if *prev != els => {
                            return Ok(ConditionOutcome::Fails {
                                witness: format!(
                                    "leaf sets {} and {} carry different lattices",
                                    label_list(other),
                                    label_list(g.aliases())
                                ),
                            });
                        }
                        None => {
                            seen.insert(g.len(), (g.aliases().to_vec(), els));
                        }
                        _ => {}
                    }
                }
                ConditionOutcome::Fails {
                    witness: "the repeated index 11 has no tree-partition lattice".into(),
                }
            }
            _ => ConditionOutcome::Holds,
        },
        Condition::C3 => {
            for g in &grounds {
                let lat = get(g)?;
                for a in 0..lat.len() {
                    let pi = lat.element(a).clone();
                    let quotients: BTreeSet<SetPartition> = lat.upper_quotients(&pi)?.into_iter().collect();
                    let reference: Option<BTreeSet<SetPartition>> = match family {
                        LatticeFamily::Tree(t) => contracted_leaf_lattice(t, g.aliases(), &pi)?,
                        _ => Some(
                            get(&GroundSet::simple(pi.num_blocks()))?
                                .elements()
                                .iter()
                                .cloned()
                                .collect(),
                        ),
                    };
                    if reference.as_ref() != Some(&quotients) {
                        return Ok(ConditionOutcome::Fails {
                            witness: format!(
                                "[{}, top] on {} has {} elements, not the family lattice on {} points",
                                relabel(&pi, g),
                                label_list(g.aliases()),
                                quotients.len(),
                                pi.num_blocks()
                            ),
                        });
                    }
                }
            }
            ConditionOutcome::Holds
        }
    };
    Ok(outcome)
}

fn label_list(aliases: &[usize]) -> String {
    aliases
        .iter()
        .map(|a| (a + 1).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Partition written with the ground set's own labels.
fn relabel(pi: &SetPartition, g: &GroundSet) -> String {
    pi.blocks()
        .iter()
        .map(|b| b.iter().map(|&p| (g.alias(p) + 1).to_string()).collect::<String>())
        .collect::<Vec<_>>()
        .join("|")
}

/// Ground sets the conditions quantify over.
fn index_grounds(family: &LatticeFamily, size: usize) -> Vec<GroundSet> {
    match family {
        LatticeFamily::Tree(_) => (1u32..(1 << size))
            .map(|mask| GroundSet::from_aliases((0..size).filter(|&i| mask & (1 << i) != 0).collect()))
            .collect(),
        _ => (1..=size).map(GroundSet::simple).collect(),
    }
}

/// Contract each block's spanning subtree of `T(leaves)` to one node. When
/// every block ends up as a leaf, the result is a tree on `|pi|` labeled
/// leaves and its tree-partition lattice is returned; otherwise `None`.
fn contracted_leaf_lattice(
    t: &TreeTopology,
    leaves: &[usize],
    pi: &SetPartition,
) -> Result<Option<BTreeSet<SetPartition>>> {
    let blocks = pi.blocks();
    let mut group: HashMap<usize, usize> = HashMap::new();
    for (bi, block) in blocks.iter().enumerate() {
        let members: Vec<usize> = block.iter().map(|&p| leaves[p]).collect();
        for v in t.induced_subtree(&members)?.nodes {
            group.insert(v, bi);
        }
    }
    let sub = t.induced_subtree(leaves)?;
    let k = blocks.len();
    let mut ids: HashMap<usize, usize> = HashMap::new();
    let mut names: Vec<String> = (1..=k).map(|i| i.to_string()).collect();
    let mut node_id = |v: usize, names: &mut Vec<String>| -> usize {
        if let Some(&b) = group.get(&v) {
            return b;
        }
        *ids.entry(v).or_insert_with(|| {
            names.push(format!("_v{v}"));
            names.len() - 1
        })
    };
    let mut edges = Vec::new();
    for &(u, v) in &sub.edges {
        let (a, b) = (node_id(u, &mut names), node_id(v, &mut names));
        if a != b {
            edges.push((a, b));
        }
    }
    let mut degree = vec![0usize; names.len()];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    if k > 1 && degree[..k].iter().any(|&deg| deg != 1) {
        return Ok(None);
    }
    if k == 1 {
        return Ok(Some(std::iter::once(SetPartition::top(1)).collect()));
    }
    let contracted = TreeTopology::from_parts(names, &edges, None)?;
    let all: Vec<usize> = (0..k).collect();
    Ok(Some(contracted.tree_partitions(&all)?.into_iter().collect()))
}

/// Runs the build-time sanity checks that [`PartitionLattice::build`] skips
/// for larger ground sets.
pub fn verify_meet_closure(lat: &PartitionLattice) -> Result<()> {
    lat.verify_meets()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::int;

    fn p(s: &str) -> SetPartition {
        s.parse().unwrap()
    }

    #[test]
    fn family_sizes() {
        let sizes: Vec<usize> = [
            LatticeFamily::Full,
            LatticeFamily::NonCrossing,
            LatticeFamily::Interval,
            LatticeFamily::OneCluster,
        ]
        .into_iter()
        .map(|f| PartitionLattice::simple(f, 4).unwrap().len())
        .collect();
        assert_eq!(sizes, vec![15, 14, 8, 12]);
        let cat = LatticeFamily::tree(TreeTopology::caterpillar(4).unwrap());
        assert_eq!(PartitionLattice::simple(cat, 4).unwrap().len(), 13);
        let star = LatticeFamily::tree(TreeTopology::star(4).unwrap());
        let star_lat = PartitionLattice::simple(star, 4).unwrap();
        let oc = PartitionLattice::simple(LatticeFamily::OneCluster, 4).unwrap();
        assert_eq!(star_lat.elements(), oc.elements());
        assert_eq!(PartitionLattice::simple(LatticeFamily::Interval, 1).unwrap().len(), 1);
    }

    #[test]
    fn mobius_examples() {
        let full = PartitionLattice::simple(LatticeFamily::Full, 3).unwrap();
        assert_eq!(full.mobius(&p("1|2|3"), &p("123")).unwrap(), int(2));
        let values: Vec<Rational> = full.mobius_to_top().to_vec();
        assert_eq!(values, vec![int(2), int(-1), int(-1), int(-1), int(1)]);
        let iv = PartitionLattice::simple(LatticeFamily::Interval, 3).unwrap();
        assert_eq!(iv.mobius(&p("1|2|3"), &p("123")).unwrap(), int(1));
        let oc = PartitionLattice::simple(LatticeFamily::OneCluster, 4).unwrap();
        assert_eq!(oc.mobius(&p("1|2|3|4"), &p("1234")).unwrap(), int(-3));
        assert_eq!(oc.mobius(&p("12|3|4"), &p("12|3|4")).unwrap(), int(1));
        assert!(matches!(
            full.mobius(&p("12|3"), &p("13|2")),
            Err(Error::NotComparable(_))
        ));
    }

    #[test]
    fn row_and_column_recursions_agree() {
        for f in [
            LatticeFamily::Full,
            LatticeFamily::NonCrossing,
            LatticeFamily::OneCluster,
        ] {
            let lat = PartitionLattice::simple(f, 5).unwrap();
            let col = lat.mobius_to_top().to_vec();
            for (i, c) in col.iter().enumerate() {
                assert_eq!(&lat.mobius_ids(i, lat.top_id()).unwrap(), c);
            }
        }
    }

    #[test]
    fn quotient_shortcut_matches_recursion() {
        for f in [LatticeFamily::Full, LatticeFamily::Interval] {
            let lat = PartitionLattice::simple(f, 6).unwrap();
            assert_eq!(lat.mobius_to_top_by_quotient(), lat.mobius_to_top_recursive());
        }
    }

    #[test]
    fn closures_and_meets() {
        let cat = LatticeFamily::tree(TreeTopology::caterpillar(4).unwrap());
        let t = PartitionLattice::simple(cat, 4).unwrap();
        assert_eq!(t.closure(&p("13|24")).unwrap(), p("1234"));
        assert_eq!(t.closure(&p("1|2|3|4")).unwrap(), p("1|2|3|4"));
        assert_eq!(t.meet_in(&p("1|234"), &p("123|4")).unwrap(), p("1|23|4"));
        let iv = PartitionLattice::simple(LatticeFamily::Interval, 3).unwrap();
        assert_eq!(iv.closure(&p("13|2")).unwrap(), p("123"));
        let nc = PartitionLattice::simple(LatticeFamily::NonCrossing, 4).unwrap();
        assert_eq!(nc.meet_in(&p("12|34"), &p("14|23")).unwrap(), p("1|2|3|4"));
    }

    #[test]
    fn weisner_examples() {
        let full = PartitionLattice::simple(LatticeFamily::Full, 3).unwrap();
        assert!(full.weisner_sum(&p("1|23"), &p("1|2|3")).unwrap().is_zero());
        let iv = PartitionLattice::simple(LatticeFamily::Interval, 4).unwrap();
        assert!(iv.weisner_sum(&p("12|3|4"), &p("1|2|3|4")).unwrap().is_zero());
        let cat = LatticeFamily::tree(TreeTopology::caterpillar(4).unwrap());
        let t = PartitionLattice::simple(cat, 4).unwrap();
        assert!(t.weisner_sum(&p("12|34"), &p("1|2|3|4")).unwrap().is_zero());
        assert!(t.weisner_sum(&p("1234"), &p("1|2|3|4")).is_err());
    }

    #[test]
    fn conditions() {
        let c1 = check_condition(&LatticeFamily::Interval, Condition::C1, 3).unwrap();
        assert_eq!(c1.witness(), Some("split 2|13"));
        assert_eq!(
            check_condition(&LatticeFamily::Full, Condition::C3, 5).unwrap(),
            ConditionOutcome::Holds
        );
        assert_eq!(
            check_condition(&LatticeFamily::Interval, Condition::C3, 5)
                .unwrap()
                .holds(),
            Some(true)
        );
        assert_eq!(
            check_condition(&LatticeFamily::OneCluster, Condition::C3, 4)
                .unwrap()
                .holds(),
            Some(false)
        );
        assert_eq!(
            check_condition(&LatticeFamily::NonCrossing, Condition::C3, 4)
                .unwrap()
                .holds(),
            Some(false)
        );
        for f in [
            LatticeFamily::Full,
            LatticeFamily::NonCrossing,
            LatticeFamily::Interval,
            LatticeFamily::OneCluster,
        ] {
            assert_eq!(
                check_condition(&f, Condition::C0, 5).unwrap().holds(),
                Some(true),
                "{f}"
            );
        }
        let cat = LatticeFamily::tree(TreeTopology::caterpillar(4).unwrap());
        assert_eq!(check_condition(&cat, Condition::C0, 0).unwrap().holds(), Some(true));
        assert_eq!(check_condition(&cat, Condition::C1, 0).unwrap().holds(), Some(true));
        assert_eq!(check_condition(&cat, Condition::C2, 0).unwrap().holds(), Some(false));
        assert!(matches!(
            check_condition(&LatticeFamily::Full, Condition::C0, 7).unwrap(),
            ConditionOutcome::NotChecked { .. }
        ));
    }

    #[test]
    fn custom_lattices() {
        let two = PartitionLattice::from_elements(GroundSet::simple(3), vec![p("1|2|3"), p("123")]).unwrap();
        assert_eq!(two.mobius_to_top().to_vec(), vec![int(-1), int(1)]);
        // 12|3 and 1|23 have the missing bottom as their only lower bound
        assert!(PartitionLattice::from_elements(GroundSet::simple(3), vec![p("12|3"), p("1|23"), p("123")]).is_err());
        let els = vec![p("1|2|3|4"), p("1|23|4"), p("13|2|4"), p("123|4"), p("1234")];
        assert!(PartitionLattice::from_elements(GroundSet::simple(4), els).is_ok());
    }

    #[test]
    fn dump_format() {
        let d = PartitionLattice::simple(LatticeFamily::Full, 3).unwrap().dump();
        assert_eq!(d.elements, vec!["012", "001", "010", "011", "000"]);
        assert_eq!(d.mobius_to_top, vec!["2", "-1", "-1", "-1", "1"]);
    }
}
