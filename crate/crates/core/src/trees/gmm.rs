use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::moments::{multiset_of, CoordinateSystem, CoordinateVector, StateSpace};
use crate::scalar::{int, Rational};
use crate::trees::TreeTopology;

/// Conditional table `table[x_u][x_v] = p(x_v | x_u)` of a binary edge.
pub type EdgeTable = [[Rational; 2]; 2];

/// Two-state general Markov model on a rooted tree: a root distribution
/// and one conditional table per node, indexed by the child node id.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmParams {
    root: usize,
    root_dist: [Rational; 2],
    parent: Vec<Option<usize>>,
    tables: Vec<Option<EdgeTable>>,
}

impl GmmParams {
    /// `edges` lists `(parent, child, table)` for every non-root node; the
    /// tree must carry a root.
    pub fn new(tree: &TreeTopology, root_dist: [Rational; 2], edges: Vec<(usize, usize, EdgeTable)>) -> Result<Self> {
        let root = tree
            .root()
            .ok_or_else(|| Error::InvalidTree("the model needs a rooted tree".into()))?;
        let parent = tree.parents_from(root);
        let mut tables = vec![None; tree.n_nodes()];
        for (u, v, table) in edges {
            if v >= tree.n_nodes() || parent[v] != Some(u) {
                return Err(Error::InvalidDistribution(format!(
                    "edge {} -> {} does not point away from the root",
                    tree.name(u.min(tree.n_nodes() - 1)),
                    tree.name(v.min(tree.n_nodes() - 1))
                )));
            }
            if tables[v].is_some() {
                return Err(Error::InvalidDistribution(format!(
                    "two tables for node {}",
                    tree.name(v)
                )));
            }
            tables[v] = Some(table);
        }
        if let Some(v) = (0..tree.n_nodes()).find(|&v| v != root && tables[v].is_none()) {
            return Err(Error::InvalidDistribution(format!(
                "no table for node {}",
                tree.name(v)
            )));
        }
        let p = GmmParams {
            root,
            root_dist,
            parent,
            tables,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(&self.root_dist[0] + &self.root_dist[1]).is_one() {
            return Err(Error::InvalidDistribution("root distribution does not sum to 1".into()));
        }
        for (v, t) in self.tables.iter().enumerate() {
            if let Some(t) = t {
                for row in t {
                    if !(&row[0] + &row[1]).is_one() {
                        return Err(Error::InvalidDistribution(format!(
                            "row of table for node {v} does not sum to 1"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether every probability is nonnegative.
    pub fn is_probabilistic(&self) -> bool {
        self.root_dist.iter().all(|p| !p.is_negative())
            && self
                .tables
                .iter()
                .flatten()
                .flatten()
                .flatten()
                .all(|p| !p.is_negative())
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn root_dist(&self) -> &[Rational; 2] {
        &self.root_dist
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn table(&self, v: usize) -> Option<&EdgeTable> {
        self.tables[v].as_ref()
    }

    /// `(parent, child, table)` for every edge.
    pub fn edges(&self) -> Vec<(usize, usize, EdgeTable)> {
        (0..self.tables.len())
            .filter_map(|v| Some((self.parent[v]?, v, self.tables[v].clone()?)))
            .collect()
    }

    /// `eta_{uv} = p_{v|u}(1|1) - p_{v|u}(1|0)` for the edge into `v`.
    pub fn eta(&self, v: usize) -> Option<Rational> {
        self.tables[v].as_ref().map(|t| &t[1][1] - &t[0][1])
    }

    /// `mu_v = P(X_v = 1)` for every node.
    pub fn means(&self) -> Vec<Rational> {
        let n = self.tables.len();
        let mut mu = vec![Rational::zero(); n];
        mu[self.root] = self.root_dist[1].clone();
        for v in self.top_down() {
            if let (Some(u), Some(t)) = (self.parent[v], &self.tables[v]) {
                mu[v] = (Rational::one() - &mu[u]) * &t[0][1] + &mu[u] * &t[1][1];
            }
        }
        mu
    }

    /// `mu_bar_v = 1 - 2 mu_v`.
    pub fn mu_bar(&self) -> Vec<Rational> {
        self.means().iter().map(|m| Rational::one() - int(2) * m).collect()
    }

    /// Nodes with every parent before its children.
    fn top_down(&self) -> Vec<usize> {
        let n = self.tables.len();
        let mut children = vec![Vec::new(); n];
        for v in 0..n {
            if let Some(u) = self.parent[v] {
                children[u].push(v);
            }
        }
        let mut order = vec![self.root];
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            order.extend(children[u].iter().copied());
        }
        order
    }

    /// The same leaf distribution hung from `new_root`: edges are reversed
    /// by Bayes' rule along the path between the two roots.
    pub fn reroot(&self, tree: &TreeTopology, new_root: usize) -> Result<(TreeTopology, GmmParams)> {
        let rerooted = tree.with_root(new_root)?;
        let mu = self.means();
        let marginal = |v: usize| [Rational::one() - &mu[v], mu[v].clone()];
        let new_parent = rerooted.parents_from(new_root);
        let mut edges = Vec::new();
        for (v, &p) in new_parent.iter().enumerate() {
            let Some(u) = p else { continue };
            if self.parent[v] == Some(u) {
                edges.push((u, v, self.tables[v].clone().expect("non-root table")));
                continue;
            }
            // edge was v -> u; reverse it
            let t = self.tables[u].clone().expect("non-root table");
            let pv = marginal(v);
            let pu = marginal(u);
            let mut rev: EdgeTable = Default::default();
            for (xu, row) in rev.iter_mut().enumerate() {
                if pu[xu].is_zero() {
                    return Err(Error::Degenerate(format!(
                        "node {} never takes value {xu}; cannot reverse its edge",
                        tree.name(u)
                    )));
                }
                for (xv, cell) in row.iter_mut().enumerate() {
                    *cell = &pv[xv] * &t[xv][xu] / &pu[xu];
                }
            }
            edges.push((u, v, rev));
        }
        let params = GmmParams::new(&rerooted, marginal(new_root), edges)?;
        Ok((rerooted, params))
    }
}

/// Node of the induced subtree `T(I)` nearest the root.
fn top_of(tree: &TreeTopology, root: usize, nodes: &[usize]) -> usize {
    let order = tree.bfs_order(root);
    *order.iter().find(|v| nodes.contains(v)).expect("subtree is nonempty")
}

fn closed_form(tree: &TreeTopology, params: &GmmParams, exponent: impl Fn(usize) -> usize) -> Result<CoordinateVector> {
    let n = tree.n_leaves();
    let mu = params.means();
    let mu_bar = params.mu_bar();
    let space = StateSpace::binary(n);
    let mut values = Vec::with_capacity(space.size());
    for x in space.states() {
        let leaves = multiset_of(&x);
        let v = match leaves.len() {
            0 => Rational::zero(),
            1 => mu[tree.leaf_node(leaves[0])].clone(),
            _ => {
                let sub = tree.induced_subtree(&leaves)?;
                let r = top_of(tree, params.root(), &sub.nodes);
                let mut acc = (Rational::one() - &mu_bar[r] * &mu_bar[r]) / int(4);
                for &v in &sub.nodes {
                    let d = sub.degree(v);
                    if !tree.is_leaf(v) && d >= 3 {
                        acc *= crate::scalar::Scalar::pow(&mu_bar[v], exponent(d));
                    }
                }
                for &(a, b) in &sub.edges {
                    let child = if params.parent(b) == Some(a) { b } else { a };
                    acc *= params.eta(child).expect("non-root edge");
                }
                acc
            }
        };
        values.push(v);
    }
    CoordinateVector::new(space, CoordinateSystem::tree(tree.clone()), values)
}

/// Monomial parametrization of tree cumulants on a trivalent tree:
/// `t_I = 1/4 (1 - mu_bar_r^2) prod_{deg 3} mu_bar_v prod_{E(I)} eta_uv`,
/// degrees taken in `T(I)` and `r` its node nearest the root.
pub fn gmm_tree_cumulants(tree: &TreeTopology, params: &GmmParams) -> Result<CoordinateVector> {
    if !tree.is_trivalent() {
        return Err(Error::Unsupported(
            "closed form needs a trivalent tree; use contracted_tree_cumulants".into(),
        ));
    }
    closed_form(tree, params, |_| 1)
}

/// The contracted closed form evaluated on any tree, with
/// `mu_bar_v^{deg(v) - 2}` for inner nodes of `T(I)`. The result is the
/// tree cumulant vector of the canonical trivalent refinement.
pub fn contracted_closed_form(tree: &TreeTopology, params: &GmmParams) -> Result<CoordinateVector> {
    let (refined, _) = trivalent_refinement(tree, params)?;
    let v = closed_form(tree, params, |d| d - 2)?;
    Ok(v.with_system(CoordinateSystem::tree(refined)))
}

/// Tree cumulants, in the coordinates of the canonical trivalent refinement
/// `T*`, of the model on `T`. Returns `T*` with the coordinates.
pub fn contracted_tree_cumulants(tree: &TreeTopology, params: &GmmParams) -> Result<(TreeTopology, CoordinateVector)> {
    let (refined, rp) = trivalent_refinement(tree, params)?;
    let v = gmm_tree_cumulants(&refined, &rp)?;
    Ok((refined, v))
}

/// Smallest leaf label reachable from `v` away from `from`.
fn min_leaf(tree: &TreeTopology, v: usize, from: usize) -> usize {
    let mut best = usize::MAX;
    let mut stack = vec![(v, from)];
    while let Some((x, p)) = stack.pop() {
        if let Some(l) = tree.leaf_of(x) {
            best = best.min(l);
        }
        for &y in tree.neighbors(x) {
            if y != p {
                stack.push((y, x));
            }
        }
    }
    best
}

/// Canonical trivalent refinement: a node of degree `k > 3` becomes a
/// left-combed path of `k - 2` nodes. Its parent edge attaches to the first
/// node, then children follow ordered by their smallest leaf. Degree-2
/// inner nodes are kept. New edges carry the identity table (`eta = 1`), so
/// the model on `T` is the model on `T*` with equal `mu_bar` along each path.
#[allow(clippy::needless_range_loop)]
pub fn trivalent_refinement(tree: &TreeTopology, params: &GmmParams) -> Result<(TreeTopology, GmmParams)> {
    if tree.inner_nodes().iter().any(|&v| tree.degree(v) == 2) {
        return Err(Error::Unsupported(
            "trees with degree-2 inner nodes have no trivalent refinement".into(),
        ));
    }
    let root = params.root();
    let mut names: Vec<String> = (0..tree.n_nodes()).map(|v| tree.name(v).to_string()).collect();
    // edges as (parent, child) plus table of the child
    let mut edges: Vec<(usize, usize, EdgeTable)> = Vec::new();
    let identity: EdgeTable = [[int(1), int(0)], [int(0), int(1)]];
    // attach[v][c] = node of v's comb that child c hangs from
    let mut attach: Vec<Vec<(usize, usize)>> = vec![Vec::new(); tree.n_nodes()];
    for v in 0..tree.n_nodes() {
        let parent = params.parent(v);
        let mut kids: Vec<usize> = tree
            .neighbors(v)
            .iter()
            .copied()
            .filter(|&u| Some(u) != parent)
            .collect();
        kids.sort_by_key(|&c| min_leaf(tree, c, v));
        let k = tree.degree(v);
        if tree.is_leaf(v) || k <= 3 {
            attach[v] = kids.into_iter().map(|c| (c, v)).collect();
            continue;
        }
        // neighbours in comb order: parent (if any) first, then children
        let mut nb: Vec<Option<usize>> = Vec::with_capacity(k);
        if parent.is_some() {
            nb.push(None);
        }
        nb.extend(kids.iter().map(|&c| Some(c)));
        let mut comb = vec![v];
        for j in 2..=k - 2 {
            names.push(format!("{}.{}", tree.name(v), j));
            let id = names.len() - 1;
            edges.push((*comb.last().expect("comb"), id, identity.clone()));
            comb.push(id);
        }
        for (pos, c) in nb.iter().enumerate() {
            let Some(c) = c else { continue };
            let slot = pos.saturating_sub(1).min(k - 3);
            attach[v].push((*c, comb[slot]));
        }
    }
    for (v, list) in attach.iter().enumerate() {
        for &(c, holder) in list {
            debug_assert_eq!(params.parent(c), Some(v));
            edges.push((holder, c, params.table(c).expect("non-root table").clone()));
        }
    }
    let plain: Vec<(usize, usize)> = edges.iter().map(|&(u, v, _)| (u, v)).collect();
    let refined = TreeTopology::from_parts(names, &plain, Some(root))?;
    let rp = GmmParams::new(&refined, params.root_dist().clone(), edges)?;
    Ok((refined, rp))
}
