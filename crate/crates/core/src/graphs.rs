//! Graphs over latent variables: DAG validation, d-separation, Markov
//! equivalence, CPDAG computation, Meek closure, composite graphs, and
//! structural Hamming distance.
//!
//! Nodes are labeled `0..k-1`. All graph values are immutable after
//! construction and every operation here is a pure function.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::QMatrix;

/// A directed acyclic graph over `k` latent nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentDag {
    k: usize,
    edges: BTreeSet<(usize, usize)>,
}

/// A partially directed graph over `k` nodes.
///
/// Construction only enforces that the directed and undirected parts are
/// disjoint on skeleton pairs; values produced by [`dag_to_cpdag`] or
/// [`meek_closure`] are completed PDAGs (closed under the Meek rules, with a
/// consistent DAG extension).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cpdag {
    k: usize,
    directed: BTreeSet<(usize, usize)>,
    undirected: BTreeSet<(usize, usize)>,
}

/// The latent CPDAG together with the directed bipartite latent → observed
/// edges induced by a measurement matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositeGraph {
    pub latent: Cpdag,
    /// Edges `(latent k, observed j)`.
    pub q_edges: BTreeSet<(usize, usize)>,
    /// Number of observed nodes.
    pub n_observed: usize,
}

/// Edge status of an unordered node pair, the unit the Hamming distance
/// counts over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairStatus {
    Absent,
    Undirected,
    /// Directed low → high.
    Forward,
    /// Directed high → low.
    Backward,
}

impl LatentDag {
    /// Build a DAG, validating labels, self-loops, and acyclicity.
    pub fn new(k: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let edges: BTreeSet<(usize, usize)> = edges.into_iter().collect();
        for &(a, b) in &edges {
            if a >= k || b >= k {
                return Err(Error::InvalidInput(format!(
                    "edge ({a},{b}) out of range for k={k}"
                )));
            }
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop at node {a}")));
            }
        }
        if !is_acyclic(&edges, k)? {
            return Err(Error::InvalidInput("edge set contains a directed cycle".into()));
        }
        Ok(Self { k, edges })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a, b))
    }

    pub fn parents(&self, v: usize) -> Vec<usize> {
        self.edges.iter().filter(|&&(_, b)| b == v).map(|&(a, _)| a).collect()
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        self.edges.iter().filter(|&&(a, _)| a == v).map(|&(_, b)| b).collect()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    /// Unordered skeleton pairs.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edges
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect()
    }

    /// V-structures `a → b ← c` (a < c, a and c non-adjacent), returned as
    /// `(a, b, c)`.
    pub fn v_structures(&self) -> BTreeSet<(usize, usize, usize)> {
        let mut out = BTreeSet::new();
        for b in 0..self.k {
            let pa = self.parents(b);
            for i in 0..pa.len() {
                for j in (i + 1)..pa.len() {
                    let (a, c) = (pa[i].min(pa[j]), pa[i].max(pa[j]));
                    if !self.adjacent(a, c) {
                        out.insert((a, b, c));
                    }
                }
            }
        }
        out
    }
}

impl Cpdag {
    /// Build a PDAG from directed and undirected edge sets.
    ///
    /// Undirected pairs are normalized to `(min, max)`. Fails if a pair
    /// appears in both parts or an edge is out of range.
    pub fn new(
        k: usize,
        directed: impl IntoIterator<Item = (usize, usize)>,
        undirected: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let directed: BTreeSet<(usize, usize)> = directed.into_iter().collect();
        let undirected: BTreeSet<(usize, usize)> = undirected
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        for &(a, b) in directed.iter().chain(undirected.iter()) {
            if a >= k || b >= k {
                return Err(Error::InvalidInput(format!(
                    "edge ({a},{b}) out of range for k={k}"
                )));
            }
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop at node {a}")));
            }
        }
        for &(a, b) in &directed {
            if directed.contains(&(b, a)) {
                return Err(Error::InvalidInput(format!("both orientations of ({a},{b}) present")));
            }
            if undirected.contains(&(a.min(b), a.max(b))) {
                return Err(Error::InvalidInput(format!(
                    "pair ({a},{b}) is both directed and undirected"
                )));
            }
        }
        Ok(Self { k, directed, undirected })
    }

    /// The fully undirected graph on `k` nodes with no edges.
    pub fn empty(k: usize) -> Self {
        Self { k, directed: BTreeSet::new(), undirected: BTreeSet::new() }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn directed(&self) -> &BTreeSet<(usize, usize)> {
        &self.directed
    }

    pub fn undirected(&self) -> &BTreeSet<(usize, usize)> {
        &self.undirected
    }

    pub fn n_edges(&self) -> usize {
        self.directed.len() + self.undirected.len()
    }

    pub fn has_directed(&self, a: usize, b: usize) -> bool {
        self.directed.contains(&(a, b))
    }

    pub fn has_undirected(&self, a: usize, b: usize) -> bool {
        self.undirected.contains(&(a.min(b), a.max(b)))
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_directed(a, b) || self.has_directed(b, a) || self.has_undirected(a, b)
    }

    /// Directed parents of `v`.
    pub fn parents(&self, v: usize) -> Vec<usize> {
        (0..self.k).filter(|&u| self.has_directed(u, v)).collect()
    }

    /// Undirected neighbors of `v`.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.k).filter(|&u| self.has_undirected(u, v)).collect()
    }

    /// All nodes adjacent to `v` regardless of orientation.
    pub fn adjacencies(&self, v: usize) -> Vec<usize> {
        (0..self.k).filter(|&u| u != v && self.adjacent(u, v)).collect()
    }

    /// Relabel nodes: old label `v` becomes `new_of_old[v]`.
    pub fn relabel(&self, new_of_old: &[usize]) -> Cpdag {
        let directed = self
            .directed
            .iter()
            .map(|&(a, b)| (new_of_old[a], new_of_old[b]))
            .collect();
        let undirected = self
            .undirected
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (new_of_old[a], new_of_old[b]);
                (x.min(y), x.max(y))
            })
            .collect();
        Cpdag { k: self.k, directed, undirected }
    }

    fn status(&self, a: usize, b: usize) -> PairStatus {
        debug_assert!(a < b);
        if self.has_undirected(a, b) {
            PairStatus::Undirected
        } else if self.has_directed(a, b) {
            PairStatus::Forward
        } else if self.has_directed(b, a) {
            PairStatus::Backward
        } else {
            PairStatus::Absent
        }
    }
}

impl CompositeGraph {
    pub fn n_edges(&self) -> usize {
        self.latent.n_edges() + self.q_edges.len()
    }
}

/// True iff `edges` over nodes `0..k-1` admit a topological order.
pub fn is_acyclic(edges: &BTreeSet<(usize, usize)>, k: usize) -> Result<bool> {
    let mut indeg = vec![0usize; k];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &(a, b) in edges {
        if a >= k || b >= k {
            return Err(Error::InvalidInput(format!(
                "edge ({a},{b}) out of range for k={k}"
            )));
        }
        if a == b {
            return Ok(false);
        }
        indeg[b] += 1;
        children[a].push(b);
    }
    let mut queue: Vec<usize> = (0..k).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0usize;
    while let Some(v) = queue.pop() {
        seen += 1;
        for &c in &children[v] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                queue.push(c);
            }
        }
    }
    Ok(seen == k)
}

/// Topological order of a valid DAG; ties broken toward the lowest label.
pub fn topological_order(dag: &LatentDag) -> Vec<usize> {
    let k = dag.k();
    let mut indeg = vec![0usize; k];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &(a, b) in dag.edges() {
        indeg[b] += 1;
        children[a].push(b);
    }
    let mut ready: BTreeSet<usize> = (0..k).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(k);
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        order.push(v);
        for &c in &children[v] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert(c);
            }
        }
    }
    order
}

/// Standard d-separation via the reachability ("Bayes ball") algorithm.
///
/// Returns true iff every path between `a` and `b` is blocked given `c`.
/// The three sets must be pairwise disjoint.
pub fn d_separated(
    dag: &LatentDag,
    a: &BTreeSet<usize>,
    b: &BTreeSet<usize>,
    c: &BTreeSet<usize>,
) -> Result<bool> {
    let k = dag.k();
    for &v in a.iter().chain(b).chain(c) {
        if v >= k {
            return Err(Error::InvalidInput(format!("node {v} out of range for k={k}")));
        }
    }
    if !a.is_disjoint(b) || !a.is_disjoint(c) || !b.is_disjoint(c) {
        return Err(Error::InvalidInput("a, b, c must be pairwise disjoint".into()));
    }

    // Ancestors of the conditioning set (needed to open colliders).
    let mut an_c = vec![false; k];
    let mut stack: Vec<usize> = c.iter().copied().collect();
    while let Some(v) = stack.pop() {
        if an_c[v] {
            continue;
        }
        an_c[v] = true;
        stack.extend(dag.parents(v));
    }
    let in_c = |v: usize| c.contains(&v);

    // Trail states: (node, entered-via). `true` = entered from a child
    // (moving up), `false` = entered from a parent (moving down).
    let mut visited = vec![[false; 2]; k];
    let mut frontier: Vec<(usize, bool)> = a.iter().map(|&v| (v, true)).collect();
    while let Some((v, up)) = frontier.pop() {
        let idx = usize::from(up);
        if visited[v][idx] {
            continue;
        }
        visited[v][idx] = true;
        if b.contains(&v) {
            return Ok(false);
        }
        if up {
            // Entered from a child: trail may continue to parents (chain)
            // and to children (fork), unless v is conditioned on.
            if !in_c(v) {
                for p in dag.parents(v) {
                    frontier.push((p, true));
                }
                for ch in dag.children(v) {
                    frontier.push((ch, false));
                }
            }
        } else {
            // Entered from a parent: continue to children unless blocked;
            // continue to parents only if v is a collider opened by c.
            if !in_c(v) {
                for ch in dag.children(v) {
                    frontier.push((ch, false));
                }
            }
            if an_c[v] {
                for p in dag.parents(v) {
                    frontier.push((p, true));
                }
            }
        }
    }
    Ok(true)
}

/// True iff the two DAGs have the same skeleton and the same v-structures.
pub fn markov_equivalent(g1: &LatentDag, g2: &LatentDag) -> Result<bool> {
    if g1.k() != g2.k() {
        return Err(Error::InvalidInput(format!(
            "node-count mismatch: {} vs {}",
            g1.k(),
            g2.k()
        )));
    }
    Ok(g1.skeleton() == g2.skeleton() && g1.v_structures() == g2.v_structures())
}

/// Edge ordering used by the compelled-edge labeling procedure.
fn order_edges(dag: &LatentDag) -> Vec<(usize, usize)> {
    let order = topological_order(dag);
    let mut pos = vec![0usize; dag.k()];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut unordered: BTreeSet<(usize, usize)> = dag.edges().clone();
    let mut out = Vec::with_capacity(unordered.len());
    while !unordered.is_empty() {
        // Lowest-ordered node y with an unordered edge into it.
        let y = *order
            .iter()
            .find(|&&y| unordered.iter().any(|&(_, b)| b == y))
            .expect("nonempty unordered set has a sink node");
        // Highest-ordered x with x -> y unordered.
        let x = *order
            .iter()
            .rev()
            .find(|&&x| unordered.contains(&(x, y)))
            .expect("y chosen to have an unordered incoming edge");
        unordered.remove(&(x, y));
        out.push((x, y));
    }
    out
}

/// Compute the CPDAG of a DAG's Markov equivalence class.
///
/// Edges are labeled compelled or reversible by the standard ordered-edge
/// labeling procedure; compelled edges stay directed, reversible ones become
/// undirected.
pub fn dag_to_cpdag(dag: &LatentDag) -> Cpdag {
    #[derive(Clone, Copy, PartialEq)]
    enum Label {
        Unknown,
        Compelled,
        Reversible,
    }
    let ordered = order_edges(dag);
    let mut label: std::collections::BTreeMap<(usize, usize), Label> =
        ordered.iter().map(|&e| (e, Label::Unknown)).collect();

    for &(x, y) in &ordered {
        if label[&(x, y)] != Label::Unknown {
            continue;
        }
        let mut done = false;
        // Every compelled w -> x forces either w -> y compelled or the whole
        // family of y compelled.
        let compelled_into_x: Vec<usize> = dag
            .parents(x)
            .into_iter()
            .filter(|&w| label.get(&(w, x)) == Some(&Label::Compelled))
            .collect();
        for w in compelled_into_x {
            if !dag.has_edge(w, y) {
                for p in dag.parents(y) {
                    *label.get_mut(&(p, y)).unwrap() = Label::Compelled;
                }
                done = true;
                break;
            } else {
                *label.get_mut(&(w, y)).unwrap() = Label::Compelled;
            }
        }
        if done {
            continue;
        }
        let exists_z = dag
            .parents(y)
            .into_iter()
            .any(|z| z != x && !dag.has_edge(z, x));
        let new_label = if exists_z { Label::Compelled } else { Label::Reversible };
        for p in dag.parents(y) {
            let l = label.get_mut(&(p, y)).unwrap();
            if *l == Label::Unknown {
                *l = new_label;
            }
        }
    }

    let mut directed = BTreeSet::new();
    let mut undirected = BTreeSet::new();
    for (&(a, b), &l) in &label {
        match l {
            Label::Compelled => {
                directed.insert((a, b));
            }
            _ => {
                undirected.insert((a.min(b), a.max(b)));
            }
        }
    }
    Cpdag { k: dag.k(), directed, undirected }
}

/// True iff a directed path runs from `src` to `dst`.
fn has_directed_path(g: &Cpdag, src: usize, dst: usize) -> bool {
    let mut seen = vec![false; g.k()];
    let mut stack = vec![src];
    while let Some(v) = stack.pop() {
        if seen[v] {
            continue;
        }
        seen[v] = true;
        for &(a, b) in g.directed() {
            if a == v {
                if b == dst {
                    return true;
                }
                stack.push(b);
            }
        }
    }
    false
}

/// Close a PDAG under the four Meek orientation rules.
///
/// Fails if an orientation conflict or a directed cycle shows the input has
/// no consistent DAG extension.
pub fn meek_closure(pdag: &Cpdag) -> Result<Cpdag> {
    let k = pdag.k();
    // The rules orient greedily and cannot themselves certify the
    // precondition, so check extendability up front.
    pdag_to_dag(pdag)?;
    let mut g = pdag.clone();

    // Orient a -- b as a -> b, detecting conflicts.
    fn orient(g: &mut Cpdag, a: usize, b: usize) -> Result<bool> {
        if g.has_directed(a, b) {
            return Ok(false);
        }
        if g.has_directed(b, a) {
            return Err(Error::Inconsistent(format!(
                "rules force both orientations of ({a},{b})"
            )));
        }
        g.undirected.remove(&(a.min(b), a.max(b)));
        g.directed.insert((a, b));
        Ok(true)
    }

    let mut changed = true;
    while changed {
        changed = false;
        let und: Vec<(usize, usize)> = g.undirected.iter().copied().collect();
        for (p, q) in und {
            // Each rule may fire for either orientation of the pair.
            for (a, b) in [(p, q), (q, p)] {
                if !g.has_undirected(a, b) {
                    continue;
                }
                // Rule 1: c -> a, a -- b, c and b non-adjacent  =>  a -> b.
                let r1 = g.parents(a).iter().any(|&c| !g.adjacent(c, b));
                // Rule 2: a -> c -> b with a -- b  =>  a -> b.
                let r2 = (0..k).any(|c| g.has_directed(a, c) && g.has_directed(c, b));
                // Rule 3: a -- c, a -- d, c -> b, d -> b, c and d
                // non-adjacent  =>  a -> b.
                let nbrs = g.neighbors(a);
                let mut r3 = false;
                for i in 0..nbrs.len() {
                    for j in (i + 1)..nbrs.len() {
                        let (c, d) = (nbrs[i], nbrs[j]);
                        if g.has_directed(c, b) && g.has_directed(d, b) && !g.adjacent(c, d) {
                            r3 = true;
                        }
                    }
                }
                // Rule 4: a -- b with a directed path a => b; orienting
                // b -> a would close a cycle in every extension.
                let r4 = has_directed_path(&g, a, b);
                if r1 || r2 || r3 || r4 {
                    if orient(&mut g, a, b)? {
                        changed = true;
                    }
                    break;
                }
            }
        }
    }

    if !is_acyclic(&g.directed, k)? {
        return Err(Error::Inconsistent("directed part acquired a cycle".into()));
    }
    Ok(g)
}

/// Find a consistent DAG extension of a PDAG.
///
/// Repeatedly peels a node with no outgoing directed edges whose undirected
/// neighbors are adjacent to all its other adjacencies, orienting the
/// undirected edges into it. Fails if no extension exists.
pub fn pdag_to_dag(pdag: &Cpdag) -> Result<LatentDag> {
    let k = pdag.k();
    let mut directed = pdag.directed.clone();
    let mut undirected = pdag.undirected.clone();
    let mut active: BTreeSet<usize> = (0..k).collect();
    let mut out: BTreeSet<(usize, usize)> = directed.iter().copied().collect();

    let has_dir = |d: &BTreeSet<(usize, usize)>, a: usize, b: usize| d.contains(&(a, b));
    let has_und = |u: &BTreeSet<(usize, usize)>, a: usize, b: usize| {
        u.contains(&(a.min(b), a.max(b)))
    };

    while !active.is_empty() {
        let mut found = None;
        'search: for &x in &active {
            // (a) sink in the directed part
            if active.iter().any(|&y| has_dir(&directed, x, y)) {
                continue;
            }
            // (b) undirected neighbors adjacent to every other adjacency of x
            let und_nbrs: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&y| y != x && has_und(&undirected, x, y))
                .collect();
            let adjs: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&y| {
                    y != x
                        && (has_und(&undirected, x, y)
                            || has_dir(&directed, x, y)
                            || has_dir(&directed, y, x))
                })
                .collect();
            for &u in &und_nbrs {
                for &w in &adjs {
                    if w == u {
                        continue;
                    }
                    let adj = has_und(&undirected, u, w)
                        || has_dir(&directed, u, w)
                        || has_dir(&directed, w, u);
                    if !adj {
                        continue 'search;
                    }
                }
            }
            found = Some((x, und_nbrs));
            break;
        }
        let Some((x, und_nbrs)) = found else {
            return Err(Error::Inconsistent("PDAG has no consistent DAG extension".into()));
        };
        for u in und_nbrs {
            out.insert((u, x));
            undirected.remove(&(u.min(x), u.max(x)));
        }
        let incident: Vec<(usize, usize)> = directed
            .iter()
            .copied()
            .filter(|&(a, b)| a == x || b == x)
            .collect();
        for e in incident {
            directed.remove(&e);
        }
        active.remove(&x);
    }
    LatentDag::new(k, out)
}

/// Combine a latent CPDAG with a measurement matrix into a composite graph.
pub fn composite_graph(g: &Cpdag, q: &QMatrix) -> Result<CompositeGraph> {
    if q.k() != g.k() {
        return Err(Error::InvalidInput(format!(
            "q has {} columns but graph has {} nodes",
            q.k(),
            g.k()
        )));
    }
    let mut q_edges = BTreeSet::new();
    for j in 0..q.j() {
        for k in 0..q.k() {
            if q.get(j, k) {
                q_edges.insert((k, j));
            }
        }
    }
    Ok(CompositeGraph { latent: g.clone(), q_edges, n_observed: q.j() })
}

/// Structural Hamming distance between two partially directed graphs.
///
/// Each unordered node pair has status in {absent, undirected, →, ←};
/// every pair whose status differs contributes exactly 1.
pub fn shd(g1: &Cpdag, g2: &Cpdag) -> Result<usize> {
    if g1.k() != g2.k() {
        return Err(Error::InvalidInput(format!(
            "node-count mismatch: {} vs {}",
            g1.k(),
            g2.k()
        )));
    }
    let k = g1.k();
    let mut dist = 0usize;
    for a in 0..k {
        for b in (a + 1)..k {
            if g1.status(a, b) != g2.status(a, b) {
                dist += 1;
            }
        }
    }
    Ok(dist)
}

/// Structural Hamming distance on composite graphs: latent pairs plus the
/// latent → observed bipartite pairs.
pub fn shd_composite(g1: &CompositeGraph, g2: &CompositeGraph) -> Result<usize> {
    if g1.n_observed != g2.n_observed {
        return Err(Error::InvalidInput(format!(
            "observed-count mismatch: {} vs {}",
            g1.n_observed, g2.n_observed
        )));
    }
    let latent = shd(&g1.latent, &g2.latent)?;
    let bipartite = g1.q_edges.symmetric_difference(&g2.q_edges).count();
    Ok(latent + bipartite)
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

/// Serialized form shared by DAGs, CPDAGs, and composite graphs.
#[derive(Debug, Serialize, Deserialize)]
pub struct GraphJson {
    pub k: usize,
    pub directed: Vec<[usize; 2]>,
    #[serde(default)]
    pub undirected: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_edges: Option<Vec<[usize; 2]>>,
}

impl From<&LatentDag> for GraphJson {
    fn from(g: &LatentDag) -> Self {
        GraphJson {
            k: g.k(),
            directed: g.edges().iter().map(|&(a, b)| [a, b]).collect(),
            undirected: Vec::new(),
            q_edges: None,
        }
    }
}

impl From<&Cpdag> for GraphJson {
    fn from(g: &Cpdag) -> Self {
        GraphJson {
            k: g.k(),
            directed: g.directed().iter().map(|&(a, b)| [a, b]).collect(),
            undirected: g.undirected().iter().map(|&(a, b)| [a, b]).collect(),
            q_edges: None,
        }
    }
}

impl From<&CompositeGraph> for GraphJson {
    fn from(g: &CompositeGraph) -> Self {
        GraphJson {
            k: g.latent.k(),
            directed: g.latent.directed().iter().map(|&(a, b)| [a, b]).collect(),
            undirected: g.latent.undirected().iter().map(|&(a, b)| [a, b]).collect(),
            q_edges: Some(g.q_edges.iter().map(|&(a, b)| [a, b]).collect()),
        }
    }
}

impl GraphJson {
    pub fn to_cpdag(&self) -> Result<Cpdag> {
        Cpdag::new(
            self.k,
            self.directed.iter().map(|e| (e[0], e[1])),
            self.undirected.iter().map(|e| (e[0], e[1])),
        )
    }

    pub fn to_dag(&self) -> Result<LatentDag> {
        if !self.undirected.is_empty() {
            return Err(Error::InvalidInput("expected a fully directed graph".into()));
        }
        LatentDag::new(self.k, self.directed.iter().map(|e| (e[0], e[1])))
    }
}
