use std::collections::{BTreeSet, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::partition::SetPartition;

/// An undirected tree whose leaves carry the labels `1..=n`.
///
/// Leaves are addressed by their 0-based index (`leaf i` is labeled `i + 1`);
/// nodes by an internal id. Inner nodes have degree at least two. Two trees
/// are equal when they have the same named edges and the same root name.
#[derive(Clone)]
pub struct TreeTopology {
    names: Vec<String>,
    leaf_of_node: Vec<Option<usize>>,
    leaf_nodes: Vec<usize>,
    adj: Vec<Vec<usize>>,
    root: Option<usize>,
}

impl TreeTopology {
    /// Builds a tree from node names and undirected edges between them.
    /// Names that parse as positive integers are leaves.
    pub fn from_edges(names: &[&str], edges: &[(&str, &str)], root: Option<&str>) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let id = |s: &str| {
            names
                .iter()
                .position(|n| n == s)
                .ok_or_else(|| Error::InvalidTree(format!("unknown node {s:?}")))
        };
        let mut pairs = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            pairs.push((id(u)?, id(v)?));
        }
        let root = root.map(id).transpose()?;
        Self::from_parts(names, &pairs, root)
    }

    pub(crate) fn from_parts(names: Vec<String>, edges: &[(usize, usize)], root: Option<usize>) -> Result<Self> {
        let n_nodes = names.len();
        if n_nodes == 0 {
            return Err(Error::InvalidTree("no nodes".into()));
        }
        let unique: HashSet<&String> = names.iter().collect();
        if unique.len() != n_nodes {
            return Err(Error::InvalidTree("duplicate node names".into()));
        }
        if edges.len() + 1 != n_nodes {
            return Err(Error::InvalidTree(format!(
                "{} nodes need {} edges, got {}",
                n_nodes,
                n_nodes - 1,
                edges.len()
            )));
        }
        let mut adj = vec![Vec::new(); n_nodes];
        for &(u, v) in edges {
            if u == v || u >= n_nodes || v >= n_nodes {
                return Err(Error::InvalidTree(format!("bad edge ({u}, {v})")));
            }
            if adj[u].contains(&v) {
                return Err(Error::InvalidTree("repeated edge".into()));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
        }
        // connectivity (with n-1 edges this also rules out cycles)
        let mut seen = vec![false; n_nodes];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidTree("not connected".into()));
        }
        let mut leaf_of_node = vec![None; n_nodes];
        let mut labeled = Vec::new();
        for (v, name) in names.iter().enumerate() {
            if let Ok(label) = name.parse::<usize>() {
                if label == 0 {
                    return Err(Error::InvalidTree("leaf labels start at 1".into()));
                }
                if adj[v].len() > 1 {
                    return Err(Error::InvalidTree(format!("leaf {label} has degree {}", adj[v].len())));
                }
                leaf_of_node[v] = Some(label - 1);
                labeled.push((label - 1, v));
            } else if adj[v].len() < 2 {
                return Err(Error::InvalidTree(format!(
                    "inner node {name:?} has degree {}",
                    adj[v].len()
                )));
            }
        }
        labeled.sort_unstable();
        if labeled.is_empty() || labeled.iter().enumerate().any(|(i, &(l, _))| i != l) {
            return Err(Error::InvalidTree("leaf labels must be exactly 1..n".into()));
        }
        let leaf_nodes = labeled.into_iter().map(|(_, v)| v).collect();
        Ok(TreeTopology {
            names,
            leaf_of_node,
            leaf_nodes,
            adj,
            root,
        })
    }

    /// Trivalent caterpillar: leaves 1, 2 hang off the first spine node,
    /// leaf `k` off spine node `k - 1`, and leaves `n - 1`, `n` off the last.
    /// Spine nodes are named `a1, a2, ...`; the tree is rooted at `a1`.
    pub fn caterpillar(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidTree("a caterpillar needs at least two leaves".into()));
        }
        let spine = n.saturating_sub(2).max(1);
        let mut names: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
        names.extend((1..=spine).map(|k| format!("a{k}")));
        let node = |k: usize| n + k - 1;
        let mut edges = Vec::new();
        for k in 1..spine {
            edges.push((node(k), node(k + 1)));
        }
        for leaf in 0..n {
            let k = (leaf.max(1)).min(spine);
            edges.push((leaf, node(k)));
        }
        Self::from_parts(names, &edges, Some(node(1)))
    }

    /// Quartet tree `12|34` with inner nodes `a` (leaves 1, 2) and `b`
    /// (leaves 3, 4), rooted at `a`.
    pub fn quartet() -> Self {
        Self::from_edges(
            &["1", "2", "3", "4", "a", "b"],
            &[("a", "1"), ("a", "2"), ("a", "b"), ("b", "3"), ("b", "4")],
            Some("a"),
        )
        .expect("quartet is a valid tree")
    }

    /// Star with `n` leaves around the inner node `h`, rooted at `h`.
    pub fn star(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidTree("a star needs at least two leaves".into()));
        }
        let mut names: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
        names.push("h".into());
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (n, i)).collect();
        Self::from_parts(names, &edges, Some(n))
    }

    /// Parses Newick text such as `((1,2)a,(3,4)b)r;`. Leaves must be
    /// labeled by positive integers; unlabeled inner nodes get generated
    /// names. The outermost node becomes the root. Branch lengths are ignored.
    pub fn parse_newick(text: &str) -> Result<Self> {
        let mut parser = NewickParser::new(text);
        let mut names = Vec::new();
        let mut edges = Vec::new();
        let root = parser.subtree(&mut names, &mut edges)?;
        parser.skip_ws();
        if parser.peek() == Some(';') {
            parser.bump();
        }
        parser.skip_ws();
        if parser.peek().is_some() {
            return Err(parser.error("trailing characters"));
        }
        Self::from_parts(names, &edges, Some(root))
    }

    /// Newick rendering with inner node names; round-trips through
    /// [`TreeTopology::parse_newick`] up to the root. A leaf root cannot be
    /// the outermost Newick node, so output then starts at its neighbour.
    pub fn to_newick(&self) -> String {
        let mut root = self
            .root
            .unwrap_or_else(|| self.inner_nodes().first().copied().unwrap_or(0));
        if self.is_leaf(root) && self.n_nodes() > 1 {
            root = self.adj[root][0];
        }
        fn rec(t: &TreeTopology, v: usize, parent: Option<usize>, out: &mut String) {
            let kids: Vec<usize> = t.adj[v].iter().copied().filter(|&u| Some(u) != parent).collect();
            if !kids.is_empty() {
                out.push('(');
                for (i, &k) in kids.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    rec(t, k, Some(v), out);
                }
                out.push(')');
            }
            out.push_str(&t.names[v]);
        }
        let mut out = String::new();
        rec(self, root, None, &mut out);
        out.push(';');
        out
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_nodes.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    /// Node id of leaf `i` (0-based).
    pub fn leaf_node(&self, leaf: usize) -> usize {
        self.leaf_nodes[leaf]
    }

    pub fn leaf_of(&self, node: usize) -> Option<usize> {
        self.leaf_of_node[node]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.leaf_of_node[node].is_some()
    }

    pub fn name(&self, node: usize) -> &str {
        &self.names[node]
    }

    pub fn node_by_name(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adj[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj[node].len()
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    pub fn with_root(&self, root: usize) -> Result<Self> {
        if root >= self.n_nodes() {
            return Err(Error::InvalidTree(format!("no node {root}")));
        }
        let mut t = self.clone();
        t.root = Some(root);
        Ok(t)
    }

    pub fn inner_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&v| !self.is_leaf(v)).collect()
    }

    /// Undirected edges with `u < v`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n_nodes() {
            for &v in &self.adj[u] {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Parent of every node when the tree is hung from `root`.
    pub fn parents_from(&self, root: usize) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.n_nodes()];
        let mut seen = vec![false; self.n_nodes()];
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(u) = stack.pop() {
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some(u);
                    stack.push(v);
                }
            }
        }
        parent
    }

    /// Nodes in breadth-first order from `root`.
    pub fn bfs_order(&self, root: usize) -> Vec<usize> {
        let mut order = vec![root];
        let mut seen = vec![false; self.n_nodes()];
        seen[root] = true;
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    order.push(v);
                }
            }
        }
        order
    }

    pub fn is_trivalent(&self) -> bool {
        self.inner_nodes().iter().all(|&v| self.degree(v) == 3)
    }

    /// Trivalent with all inner nodes on one path.
    pub fn is_caterpillar(&self) -> bool {
        if !self.is_trivalent() {
            return false;
        }
        let inner = self.inner_nodes();
        if inner.len() <= 1 {
            return true;
        }
        let inner_degree = |v: usize| self.adj[v].iter().filter(|&&u| !self.is_leaf(u)).count();
        inner.iter().all(|&v| inner_degree(v) <= 2) && inner.iter().filter(|&&v| inner_degree(v) == 1).count() == 2
    }

    /// Leaves in the order they hang off the spine of a caterpillar.
    pub fn spine_leaf_order(&self) -> Option<Vec<usize>> {
        if !self.is_caterpillar() {
            return None;
        }
        let inner = self.inner_nodes();
        let inner_degree = |v: usize| self.adj[v].iter().filter(|&&u| !self.is_leaf(u)).count();
        let start = *inner.iter().find(|&&v| inner_degree(v) <= 1)?;
        let mut order = Vec::new();
        let mut prev = usize::MAX;
        let mut cur = start;
        loop {
            let mut leaves: Vec<usize> = self.adj[cur].iter().filter_map(|&u| self.leaf_of(u)).collect();
            leaves.sort_unstable();
            order.extend(leaves);
            let next = self.adj[cur].iter().copied().find(|&u| !self.is_leaf(u) && u != prev);
            match next {
                Some(nx) => {
                    prev = cur;
                    cur = nx;
                }
                None => break,
            }
        }
        Some(order)
    }

    /// Minimal subtree containing the given leaves (degree-2 nodes kept).
    pub fn induced_subtree(&self, leaves: &[usize]) -> Result<Subtree> {
        if leaves.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(&l) = leaves.iter().find(|&&l| l >= self.n_leaves()) {
            return Err(Error::InvalidArgument(format!("no leaf {}", l + 1)));
        }
        let keep_leaf: HashSet<usize> = leaves.iter().map(|&l| self.leaf_nodes[l]).collect();
        let mut alive = vec![true; self.n_nodes()];
        let mut deg: Vec<usize> = self.adj.iter().map(|a| a.len()).collect();
        let mut stack: Vec<usize> = (0..self.n_nodes())
            .filter(|&v| deg[v] <= 1 && !keep_leaf.contains(&v))
            .collect();
        while let Some(v) = stack.pop() {
            if !alive[v] {
                continue;
            }
            alive[v] = false;
            for &u in &self.adj[v] {
                if alive[u] {
                    deg[u] -= 1;
                    if deg[u] <= 1 && !keep_leaf.contains(&u) {
                        stack.push(u);
                    }
                }
            }
        }
        let nodes: Vec<usize> = (0..self.n_nodes()).filter(|&v| alive[v]).collect();
        let edges: Vec<(usize, usize)> = self
            .edges()
            .into_iter()
            .filter(|&(u, v)| alive[u] && alive[v])
            .collect();
        let mut sorted_leaves = leaves.to_vec();
        sorted_leaves.sort_unstable();
        sorted_leaves.dedup();
        Ok(Subtree {
            nodes,
            edges,
            leaves: sorted_leaves,
        })
    }

    /// Leaf sets on the two sides of every edge, as `(side containing the
    /// smaller endpoint id, other side)`.
    pub fn edge_splits(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut out = Vec::new();
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        for (u, v) in self.edges() {
            let side = self.side_of(u, v);
            let other: Vec<usize> = (0..self.n_leaves()).filter(|l| !side.contains(l)).collect();
            let key = if side.first() < other.first() {
                side.clone()
            } else {
                other.clone()
            };
            if seen.insert(key) && !side.is_empty() && !other.is_empty() {
                out.push((side, other));
            }
        }
        out
    }

    /// Leaves reachable from `u` without crossing the edge `u - v`.
    fn side_of(&self, u: usize, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![(u, v)];
        while let Some((x, from)) = stack.pop() {
            if let Some(l) = self.leaf_of(x) {
                out.push(l);
            }
            for &y in &self.adj[x] {
                if y != from {
                    stack.push((y, x));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Tree partitions of the given leaves: every way of deleting edges of
    /// the induced subtree, restricted to those leaves, deduplicated and
    /// sorted finest first. Positions follow the ascending leaf order.
    pub fn tree_partitions(&self, leaves: &[usize]) -> Result<Vec<SetPartition>> {
        let sub = self.induced_subtree(leaves)?;
        crate::partition::check_capacity(sub.leaves.len())?;
        let labeled: Vec<usize> = sub.leaves.iter().map(|&l| self.leaf_nodes[l]).collect();
        Ok(forest_partitions(self.n_nodes(), &sub.edges, &labeled))
    }
}

/// Distinct partitions of `labeled` (positions in the given order) induced by
/// deleting any subset of `edges`, finest first.
pub(crate) fn forest_partitions(n_nodes: usize, edges: &[(usize, usize)], labeled: &[usize]) -> Vec<SetPartition> {
    let m = edges.len();
    assert!(m < 31, "too many edges for exhaustive forest enumeration");
    let mut out: HashSet<SetPartition> = HashSet::new();
    let mut parent = vec![0usize; n_nodes];
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for mask in 0u32..(1u32 << m) {
        for (i, p) in parent.iter_mut().enumerate() {
            *p = i;
        }
        for (k, &(u, v)) in edges.iter().enumerate() {
            if mask & (1 << k) != 0 {
                let (a, b) = (find(&mut parent, u), find(&mut parent, v));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let labels: Vec<usize> = labeled.iter().map(|&v| find(&mut parent, v)).collect();
        out.insert(SetPartition::from_labels(&labels));
    }
    let mut v: Vec<SetPartition> = out.into_iter().collect();
    v.sort_by(crate::partition::graded_cmp);
    v
}

/// Minimal subtree spanning a set of leaves, as a view into its parent tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subtree {
    pub nodes: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    pub leaves: Vec<usize>,
}

impl Subtree {
    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|&&(u, v)| u == node || v == node).count()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }
}

impl TreeTopology {
    fn named_edges(&self) -> BTreeSet<(&str, &str)> {
        self.edges()
            .into_iter()
            .map(|(u, v)| {
                let (a, b) = (self.names[u].as_str(), self.names[v].as_str());
                if a <= b {
                    (a, b)
                } else {
                    (b, a)
                }
            })
            .collect()
    }
}

impl PartialEq for TreeTopology {
    fn eq(&self, other: &Self) -> bool {
        self.root.map(|r| &self.names[r]) == other.root.map(|r| &other.names[r])
            && self.named_edges() == other.named_edges()
    }
}

impl Eq for TreeTopology {}

impl fmt::Debug for TreeTopology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TreeTopology({})", self.to_newick())
    }
}

struct NewickParser<'a> {
    chars: Vec<char>,
    pos: usize,
    _text: &'a str,
    auto: usize,
}

impl<'a> NewickParser<'a> {
    fn new(text: &'a str) -> Self {
        NewickParser {
            chars: text.chars().collect(),
            pos: 0,
            _text: text,
            auto: 0,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) {
        self.pos += 1;
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_whitespace()) {
            self.bump();
        }
    }

    fn error(&self, msg: &str) -> Error {
        let mut line = 1;
        let mut col = 1;
        for &c in &self.chars[..self.pos.min(self.chars.len())] {
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        Error::parse("newick", line, col, msg)
    }

    fn label(&mut self) -> String {
        self.skip_ws();
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if "(),:;".contains(c) || c.is_whitespace() {
                break;
            }
            s.push(c);
            self.bump();
        }
        // branch length, ignored
        self.skip_ws();
        if self.peek() == Some(':') {
            self.bump();
            self.skip_ws();
            while self.peek().is_some_and(|c| !"(),;".contains(c) && !c.is_whitespace()) {
                self.bump();
            }
        }
        s
    }

    fn subtree(&mut self, names: &mut Vec<String>, edges: &mut Vec<(usize, usize)>) -> Result<usize> {
        self.skip_ws();
        if self.peek() == Some('(') {
            self.bump();
            let mut kids = vec![self.subtree(names, edges)?];
            loop {
                self.skip_ws();
                match self.peek() {
                    Some(',') => {
                        self.bump();
                        kids.push(self.subtree(names, edges)?);
                    }
                    Some(')') => {
                        self.bump();
                        break;
                    }
                    _ => return Err(self.error("expected ',' or ')'")),
                }
            }
            let at = self.pos;
            let mut name = self.label();
            if name.is_empty() {
                self.auto += 1;
                name = format!("_n{}", self.auto);
            } else if name.parse::<usize>().is_ok() {
                self.pos = at;
                return Err(self.error("inner nodes must not carry integer labels"));
            }
            names.push(name);
            let id = names.len() - 1;
            for k in kids {
                edges.push((id, k));
            }
            Ok(id)
        } else {
            let at = self.pos;
            let name = self.label();
            if name.parse::<usize>().map_or(true, |v| v == 0) {
                self.pos = at;
                return Err(self.error("leaves must be labeled by positive integers"));
            }
            names.push(name);
            Ok(names.len() - 1)
        }
    }
}
