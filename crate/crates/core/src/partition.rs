//! Set partitions of finite ordered ground sets.
//!
//! A partition of `d` positions is stored as its restricted-growth sequence
//! (`rgs[0] = 0`, `rgs[i] <= 1 + max(rgs[..i])`), which is canonical: two
//! partitions are equal iff their sequences are equal. Positions are ordered,
//! which is what the non-crossing and interval predicates refer to. A
//! [`GroundSet`] additionally records, for every position, the variable index
//! it stands for, so the multisets of moment aliasing reuse the same
//! machinery.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Default cap on enumeration size (Bell(12) = 4 213 597).
pub const DEFAULT_CAPACITY: usize = 12;

static CAPACITY: AtomicUsize = AtomicUsize::new(DEFAULT_CAPACITY);

/// Current process-wide cap on ground-set size for exhaustive enumeration.
pub fn capacity_limit() -> usize {
    CAPACITY.load(Ordering::Relaxed)
}

/// Overrides the enumeration cap.
pub fn set_capacity_limit(limit: usize) {
    CAPACITY.store(limit.max(1), Ordering::Relaxed);
}

pub(crate) fn check_capacity(d: usize) -> Result<()> {
    let limit = capacity_limit();
    if d > limit {
        Err(Error::Capacity { requested: d, limit })
    } else {
        Ok(())
    }
}

/// Ordered positions `0..d`, each aliasing an original variable index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroundSet {
    aliases: Vec<usize>,
}

impl GroundSet {
    /// Positions `0..d` standing for variables `0..d`.
    pub fn simple(d: usize) -> Self {
        GroundSet {
            aliases: (0..d).collect(),
        }
    }

    /// Positions standing for the given variable indices, in the given order.
    pub fn from_aliases(aliases: Vec<usize>) -> Self {
        GroundSet { aliases }
    }

    /// Multiset ground set of an exponent vector: variable `i` repeated
    /// `exponent[i]` times, in increasing variable order.
    pub fn from_exponents(exponent: &[usize]) -> Self {
        let mut aliases = Vec::with_capacity(exponent.iter().sum());
        for (var, &count) in exponent.iter().enumerate() {
            aliases.extend(std::iter::repeat_n(var, count));
        }
        GroundSet { aliases }
    }

    pub fn len(&self) -> usize {
        self.aliases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aliases.is_empty()
    }

    pub fn alias(&self, position: usize) -> usize {
        self.aliases[position]
    }

    pub fn aliases(&self) -> &[usize] {
        &self.aliases
    }

    /// True when no variable index repeats.
    pub fn is_simple(&self) -> bool {
        let mut seen = self.aliases.clone();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }

    pub fn restrict(&self, positions: &[usize]) -> GroundSet {
        GroundSet {
            aliases: positions.iter().map(|&p| self.aliases[p]).collect(),
        }
    }
}

pub(crate) type Rgs = SmallVec<[u8; 16]>;

/// A set partition in canonical restricted-growth form.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetPartition {
    rgs: Rgs,
}

impl SetPartition {
    /// Builds a partition from arbitrary block labels, canonicalizing them.
    pub fn from_labels<T: Eq + Copy>(labels: &[T]) -> Self {
        let mut seen: SmallVec<[T; 16]> = SmallVec::new();
        let mut rgs = Rgs::with_capacity(labels.len());
        for &l in labels {
            let id = match seen.iter().position(|&s| s == l) {
                Some(i) => i,
                None => {
                    seen.push(l);
                    seen.len() - 1
                }
            };
            rgs.push(id as u8);
        }
        SetPartition { rgs }
    }

    /// Builds a partition of `0..d` from blocks of positions.
    pub fn from_blocks(d: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![usize::MAX; d];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidArgument("empty block".into()));
            }
            for &p in block {
                if p >= d {
                    return Err(Error::InvalidArgument(format!("position {p} outside 0..{d}")));
                }
                if labels[p] != usize::MAX {
                    return Err(Error::InvalidArgument(format!("position {p} in two blocks")));
                }
                labels[p] = b;
            }
        }
        if labels.contains(&usize::MAX) {
            return Err(Error::InvalidArgument("blocks do not cover the ground set".into()));
        }
        Ok(Self::from_labels(&labels))
    }

    /// Validates and wraps a restricted-growth sequence.
    pub fn from_rgs(rgs: &[u8]) -> Result<Self> {
        let mut max: i32 = -1;
        for &r in rgs {
            if r as i32 > max + 1 {
                return Err(Error::InvalidArgument(format!(
                    "not a restricted-growth sequence: {rgs:?}"
                )));
            }
            max = max.max(r as i32);
        }
        Ok(SetPartition {
            rgs: rgs.iter().copied().collect(),
        })
    }

    /// `1|2|...|d`.
    pub fn bottom(d: usize) -> Self {
        SetPartition {
            rgs: (0..d).map(|i| i as u8).collect(),
        }
    }

    /// The one-block partition.
    pub fn top(d: usize) -> Self {
        SetPartition {
            rgs: std::iter::repeat_n(0, d).collect(),
        }
    }

    pub fn rgs(&self) -> &[u8] {
        &self.rgs
    }

    /// Size of the ground set.
    pub fn len(&self) -> usize {
        self.rgs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rgs.is_empty()
    }

    pub fn num_blocks(&self) -> usize {
        self.rgs.iter().map(|&r| r as usize + 1).max().unwrap_or(0)
    }

    pub fn block_of(&self, position: usize) -> usize {
        self.rgs[position] as usize
    }

    /// Blocks in order of their minimal element; positions ascending.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.num_blocks()];
        for (p, &r) in self.rgs.iter().enumerate() {
            blocks[r as usize].push(p);
        }
        blocks
    }

    pub fn is_top(&self) -> bool {
        self.rgs.iter().all(|&r| r == 0)
    }

    pub fn is_bottom(&self) -> bool {
        self.num_blocks() == self.len()
    }

    pub fn has_singleton(&self) -> bool {
        let mut counts = vec![0usize; self.num_blocks()];
        for &r in &self.rgs {
            counts[r as usize] += 1;
        }
        counts.contains(&1)
    }

    /// Partition induced on the sorted positions `subset`, relabeled `0..|subset|`.
    pub fn restrict(&self, subset: &[usize]) -> Result<SetPartition> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(&p) = subset.iter().find(|&&p| p >= self.len()) {
            return Err(Error::InvalidArgument(format!("position {p} outside the ground set")));
        }
        let labels: Vec<u8> = subset.iter().map(|&p| self.rgs[p]).collect();
        Ok(Self::from_labels(&labels))
    }

    /// Merges blocks according to a partition of the block indices.
    pub fn coarsen(&self, blocks_partition: &SetPartition) -> SetPartition {
        let labels: Vec<u8> = self.rgs.iter().map(|&r| blocks_partition.rgs[r as usize]).collect();
        Self::from_labels(&labels)
    }
}

impl fmt::Display for SetPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wide = self.len() > 9;
        let parts: Vec<String> = self
            .blocks()
            .iter()
            .map(|b| {
                let items: Vec<String> = b.iter().map(|p| (p + 1).to_string()).collect();
                items.join(if wide { "," } else { "" })
            })
            .collect();
        write!(f, "{}", parts.join("|"))
    }
}

impl fmt::Debug for SetPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SetPartition({self})")
    }
}

impl FromStr for SetPartition {
    type Err = Error;

    /// Parses `"13|2|4"` (single-digit elements) or `"1,10|2,...` (comma
    /// separated). Elements are 1-based and must cover `1..=d`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |col: usize, msg: &str| Error::parse("partition", 1, col, msg);
        if s.is_empty() {
            return Err(bad(1, "empty partition"));
        }
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut column = 1;
        let comma = s.contains(',');
        for part in s.split('|') {
            let mut block = Vec::new();
            if part.is_empty() {
                return Err(bad(column, "empty block"));
            }
            if comma {
                for (k, item) in part.split(',').enumerate() {
                    let v: usize = item
                        .trim()
                        .parse()
                        .map_err(|_| bad(column + k, "expected a positive integer"))?;
                    if v == 0 {
                        return Err(bad(column + k, "elements are 1-based"));
                    }
                    block.push(v - 1);
                }
            } else {
                for (k, c) in part.chars().enumerate() {
                    let v = c.to_digit(10).ok_or_else(|| bad(column + k, "expected a digit"))? as usize;
                    if v == 0 {
                        return Err(bad(column + k, "elements are 1-based"));
                    }
                    block.push(v - 1);
                }
            }
            column += part.chars().count() + 1;
            blocks.push(block);
        }
        let d = blocks.iter().flatten().max().map_or(0, |m| m + 1);
        SetPartition::from_blocks(d, &blocks).map_err(|e| bad(1, &e.to_string()))
    }
}

fn ensure_same_ground(pi: &SetPartition, nu: &SetPartition) -> Result<()> {
    if pi.len() != nu.len() {
        Err(Error::GroundMismatch(format!(
            "partitions of {} and {} elements",
            pi.len(),
            nu.len()
        )))
    } else {
        Ok(())
    }
}

/// All restricted-growth sequences of length `d` in lexicographic order.
fn rgs_lex(d: usize) -> Vec<SetPartition> {
    if d == 0 {
        return vec![SetPartition { rgs: Rgs::new() }];
    }
    let mut out = Vec::new();
    let mut rgs: Rgs = std::iter::repeat_n(0, d).collect();
    // prefix maxima: max[i] = max(rgs[0..=i])
    let mut max = vec![0u8; d];
    loop {
        out.push(SetPartition { rgs: rgs.clone() });
        // find rightmost position that can be incremented
        let mut i = d - 1;
        loop {
            if i == 0 {
                return out;
            }
            if rgs[i] <= max[i - 1] {
                break;
            }
            i -= 1;
        }
        rgs[i] += 1;
        max[i] = max[i - 1].max(rgs[i]);
        for j in i + 1..d {
            rgs[j] = 0;
            max[j] = max[i];
        }
    }
}

/// Sort key used for every listing of partitions: finer partitions first
/// (more blocks), ties broken by the restricted-growth sequence.
pub fn graded_cmp(a: &SetPartition, b: &SetPartition) -> std::cmp::Ordering {
    b.num_blocks().cmp(&a.num_blocks()).then_with(|| a.rgs.cmp(&b.rgs))
}

/// All partitions of `d` positions, each exactly once, finest first.
pub fn enumerate_full(d: usize) -> Result<Vec<SetPartition>> {
    if d == 0 {
        return Err(Error::InvalidArgument("ground set must be nonempty".into()));
    }
    check_capacity(d)?;
    Ok(enumerate_unchecked(d))
}

pub(crate) fn enumerate_unchecked(d: usize) -> Vec<SetPartition> {
    let mut all = rgs_lex(d);
    all.sort_by(graded_cmp);
    all
}

/// `pi <= nu` in refinement order.
pub fn refines(pi: &SetPartition, nu: &SetPartition) -> Result<bool> {
    ensure_same_ground(pi, nu)?;
    Ok(refines_unchecked(pi, nu))
}

pub(crate) fn refines_unchecked(pi: &SetPartition, nu: &SetPartition) -> bool {
    let mut image = [u8::MAX; 256];
    for (a, b) in pi.rgs.iter().zip(nu.rgs.iter()) {
        let slot = &mut image[*a as usize];
        if *slot == u8::MAX {
            *slot = *b;
        } else if *slot != *b {
            return false;
        }
    }
    true
}

/// Common refinement (blockwise intersections).
pub fn meet_full(pi: &SetPartition, nu: &SetPartition) -> Result<SetPartition> {
    ensure_same_ground(pi, nu)?;
    Ok(meet_unchecked(pi, nu))
}

pub(crate) fn meet_unchecked(pi: &SetPartition, nu: &SetPartition) -> SetPartition {
    let labels: Vec<(u8, u8)> = pi.rgs.iter().copied().zip(nu.rgs.iter().copied()).collect();
    SetPartition::from_labels(&labels)
}

/// Finest common coarsening (transitive closure of both relations).
pub fn join_full(pi: &SetPartition, nu: &SetPartition) -> Result<SetPartition> {
    ensure_same_ground(pi, nu)?;
    Ok(join_unchecked(pi, nu))
}

pub(crate) fn join_unchecked(pi: &SetPartition, nu: &SetPartition) -> SetPartition {
    let d = pi.len();
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for part in [pi, nu] {
        let mut first = [usize::MAX; 256];
        for p in 0..d {
            let b = part.rgs[p] as usize;
            if first[b] == usize::MAX {
                first[b] = p;
            } else {
                let (x, y) = (find(&mut parent, first[b]), find(&mut parent, p));
                parent[x.max(y)] = x.min(y);
            }
        }
    }
    let labels: Vec<usize> = (0..d).map(|p| find(&mut parent, p)).collect();
    SetPartition::from_labels(&labels)
}

/// No `i < j < k < l` with `i ~ k`, `j ~ l` and `i !~ j`.
pub fn is_noncrossing(pi: &SetPartition) -> bool {
    let r = &pi.rgs;
    let d = r.len();
    for i in 0..d {
        for k in i + 2..d {
            if r[i] != r[k] {
                continue;
            }
            for j in i + 1..k {
                if r[j] == r[i] {
                    continue;
                }
                if (k + 1..d).any(|l| r[l] == r[j]) {
                    return false;
                }
            }
        }
    }
    true
}

/// Every block is a contiguous run of positions.
pub fn is_interval(pi: &SetPartition) -> bool {
    pi.blocks().iter().all(|b| b[b.len() - 1] - b[0] + 1 == b.len())
}

/// At most one block with more than one element.
pub fn is_one_cluster(pi: &SetPartition) -> bool {
    pi.blocks().iter().filter(|b| b.len() > 1).count() <= 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> SetPartition {
        s.parse().unwrap()
    }

    #[test]
    fn enumerates_three_elements() {
        let all = enumerate_full(3).unwrap();
        let shown: Vec<String> = all.iter().map(|x| x.to_string()).collect();
        assert_eq!(shown, ["1|2|3", "12|3", "13|2", "1|23", "123"]);
        assert_eq!(enumerate_full(1).unwrap().len(), 1);
    }

    #[test]
    fn capacity_is_enforced() {
        assert!(matches!(
            enumerate_full(DEFAULT_CAPACITY + 1),
            Err(Error::Capacity { .. })
        ));
        assert!(enumerate_full(0).is_err());
    }

    #[test]
    fn refinement_examples() {
        assert!(refines(&p("13|4|25"), &p("1235|4")).unwrap());
        assert!(refines(&p("12|3"), &p("12|3")).unwrap());
        assert!(!refines(&p("12|3"), &p("13|2")).unwrap());
        assert!(refines(&p("12|3"), &p("1|23")).is_ok());
        assert!(matches!(refines(&p("12|3"), &p("1|2")), Err(Error::GroundMismatch(_))));
    }

    #[test]
    fn meet_and_join_examples() {
        assert_eq!(meet_full(&p("12|3"), &p("13|2")).unwrap(), p("1|2|3"));
        assert_eq!(join_full(&p("12|3"), &p("1|23")).unwrap(), p("123"));
        assert_eq!(meet_full(&p("13|24"), &p("13|24")).unwrap(), p("13|24"));
        assert!(join_full(&p("12"), &p("1|2|3")).is_err());
    }

    #[test]
    fn restriction_examples() {
        assert_eq!(p("1235|4").restrict(&[0, 3]).unwrap(), p("1|2"));
        assert_eq!(p("123").restrict(&[1, 2]).unwrap(), p("12"));
        assert_eq!(p("1|2|3|4").restrict(&[0, 2, 3]).unwrap(), p("1|2|3"));
        assert_eq!(p("12").restrict(&[]), Err(Error::EmptySubset));
    }

    #[test]
    fn predicate_examples() {
        assert!(!is_noncrossing(&p("13|24")));
        assert!(is_noncrossing(&p("14|23")));
        assert!(is_noncrossing(&SetPartition::bottom(6)));
        assert!(is_interval(&p("12|34")));
        assert!(!is_interval(&p("13|2|4")));
        assert!(is_interval(&SetPartition::top(5)));
        assert!(is_one_cluster(&p("134|2")));
        assert!(!is_one_cluster(&p("12|34")));
        assert!(is_one_cluster(&p("1|2|3|4")));
    }

    #[test]
    fn notation_round_trips() {
        for s in ["13|2|4", "1|2|3", "1234", "14|23"] {
            assert_eq!(p(s).to_string(), s);
        }
        let wide = SetPartition::from_blocks(11, &[(0..10).collect(), vec![10]]).unwrap();
        let text = wide.to_string();
        assert_eq!(text, "1,2,3,4,5,6,7,8,9,10|11");
        assert_eq!(text.parse::<SetPartition>().unwrap(), wide);
        assert!("1|1".parse::<SetPartition>().is_err());
        assert!("13|4".parse::<SetPartition>().is_err());
        assert!("1a|2".parse::<SetPartition>().is_err());
    }

    #[test]
    fn multiset_ground_sets() {
        let g = GroundSet::from_exponents(&[2, 0, 1]);
        assert_eq!(g.aliases(), &[0, 0, 2]);
        assert!(!g.is_simple());
        assert!(GroundSet::simple(3).is_simple());
    }

    #[test]
    fn coarsening_merges_blocks() {
        let pi = p("13|2|4");
        assert_eq!(pi.coarsen(&p("12|3")), p("123|4"));
    }
}
