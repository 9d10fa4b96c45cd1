//! Partition trees: layered families of interval partitions whose leaf
//! ancestor chains load-balance clique listing. Covers plain clique trees
//! (one universe, three balancing constraints) and split trees (outer
//! layers partition V2, inner layers V1, six constraints). Parts are id
//! intervals; membership is interval-and-universe intersection.

pub mod algos;
pub mod build;

use crate::graph::{Graph, SplitGraph, Vertex};
use std::collections::BTreeSet;
use std::fmt;

/// Closed id interval; empty when `lo > hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Interval {
    pub lo: Vertex,
    pub hi: Vertex,
}

impl Interval {
    pub const EMPTY: Interval = Interval { lo: 1, hi: 0 };

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.lo <= v && v <= self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

pub type Path = Vec<u16>;

#[derive(Debug, Clone)]
pub enum TreeKind {
    /// Every layer partitions the same universe.
    Clique { universe: Vec<Vertex> },
    /// The first `pi` layers partition `v2`, the remaining ones `v1`.
    Split { pi: usize, v1: Vec<Vertex>, v2: Vec<Vertex> },
}

#[derive(Debug, Clone)]
pub struct PartitionTree {
    pub kind: TreeKind,
    /// Number of layers; nodes live at depths 0..p-1.
    pub p: usize,
    /// Branching bounds: (inner/clique bound, outer bound).
    pub a_bound: usize,
    pub b_bound: usize,
    pub nodes: std::collections::BTreeMap<Path, Vec<Interval>>,
}

impl PartitionTree {
    /// The ordered universe that partitions at node depth `d` split.
    pub fn layer_universe(&self, d: usize) -> &[Vertex] {
        match &self.kind {
            TreeKind::Clique { universe } => universe,
            TreeKind::Split { pi, v1, v2 } => {
                if d < *pi {
                    v2
                } else {
                    v1
                }
            }
        }
    }

    pub fn branching_at(&self, d: usize) -> usize {
        match &self.kind {
            TreeKind::Clique { .. } => self.a_bound,
            TreeKind::Split { pi, .. } => {
                if d < *pi {
                    self.b_bound
                } else {
                    self.a_bound
                }
            }
        }
    }

    /// Members of a part at depth `d`.
    pub fn members(&self, d: usize, iv: &Interval) -> Vec<Vertex> {
        self.layer_universe(d)
            .iter()
            .copied()
            .filter(|&v| iv.contains(v))
            .collect()
    }

    /// The part chain root -> leaf for leaf part (`path`, `j`):
    /// `(depth, interval)` per layer, the leaf part last.
    pub fn anc_parts(&self, path: &Path, j: u16) -> Vec<(usize, Interval)> {
        let mut out = Vec::with_capacity(path.len() + 1);
        for t in 0..path.len() {
            let node: Path = path[..t].to_vec();
            out.push((t, self.nodes[&node][path[t] as usize]));
        }
        out.push((path.len(), self.nodes[path][j as usize]));
        out
    }

    /// All leaf parts `(node path, part index)` at depth p-1, sorted.
    pub fn leaf_parts(&self) -> Vec<(Path, u16)> {
        let mut out = Vec::new();
        for (path, parts) in &self.nodes {
            if path.len() == self.p - 1 {
                for j in 0..parts.len() as u16 {
                    out.push((path.clone(), j));
                }
            }
        }
        out
    }

    /// Dump: one line per part, `path=(l1,...,li) j lo hi`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (path, parts) in &self.nodes {
            let p: Vec<String> = path.iter().map(|x| x.to_string()).collect();
            for (j, iv) in parts.iter().enumerate() {
                s.push_str(&format!("path=({}) {} {} {}\n", p.join(","), j, iv.lo, iv.hi));
            }
        }
        s
    }
}

/// Balancing constants for clique trees (defaults from the layer
/// construction's counting argument).
#[derive(Debug, Clone, Copy)]
pub struct K3Constraints {
    pub c1: u64,
    pub c2: u64,
    pub c3: u64,
}

impl Default for K3Constraints {
    fn default() -> Self {
        K3Constraints { c1: 9, c2: 36, c3: 4 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SplitConstraints {
    pub c1: u64,
    pub c2: u64,
}

impl Default for SplitConstraints {
    fn default() -> Self {
        SplitConstraints { c1: 8, c2: 36 }
    }
}

pub fn ceil_div(a: u64, b: u64) -> u64 {
    assert!(b > 0);
    a.div_ceil(b)
}

#[derive(Debug, Clone)]
pub struct TreeReport {
    pub pass: bool,
    pub violations: Vec<String>,
}

fn check_partition_shape(
    tree: &PartitionTree,
    path: &Path,
    parts: &[Interval],
    violations: &mut Vec<String>,
) {
    let d = path.len();
    let universe = tree.layer_universe(d);
    if parts.len() > tree.branching_at(d) && !universe.is_empty() {
        violations.push(format!(
            "node {path:?}: {} parts exceed the branching bound {}",
            parts.len(),
            tree.branching_at(d)
        ));
    }
    let mut covered: BTreeSet<Vertex> = BTreeSet::new();
    for (j, iv) in parts.iter().enumerate() {
        for v in tree.members(d, iv) {
            if !covered.insert(v) {
                violations.push(format!("node {path:?}: vertex {v} in two parts (part {j})"));
            }
        }
    }
    for &v in universe {
        if !covered.contains(&v) {
            violations.push(format!("node {path:?}: vertex {v} in no part"));
        }
    }
}

/// Recount every clique-tree bound from raw edges. Degree-sum convention:
/// the edge counts are sums of member degrees into the target set, exactly
/// the quantity the streaming constructor's counters bound.
pub fn verify_clique_tree(tree: &PartitionTree, g: &Graph, cons: &K3Constraints) -> TreeReport {
    let universe: Vec<Vertex> = match &tree.kind {
        TreeKind::Clique { universe } => universe.clone(),
        _ => {
            return TreeReport {
                pass: false,
                violations: vec!["not a clique tree".into()],
            }
        }
    };
    let uni_set: BTreeSet<Vertex> = universe.iter().copied().collect();
    let k = universe.len() as u64;
    let m: u64 = universe
        .iter()
        .map(|&v| g.neighbor_set(v).iter().filter(|u| uni_set.contains(u)).count() as u64)
        .sum::<u64>()
        / 2;
    let x = (k as f64).powf(1.0 / tree.p as f64).ceil().max(1.0) as u64;
    let m_tilde = m.max(k * x);
    let p = tree.p as u64;
    let mut violations = Vec::new();
    if k == 0 {
        return TreeReport { pass: true, violations };
    }
    for (path, parts) in &tree.nodes {
        check_partition_shape(tree, path, parts, &mut violations);
        let d = path.len() as u64;
        let anc: Vec<Interval> = (0..path.len())
            .map(|t| tree.nodes[&path[..t].to_vec()][path[t] as usize])
            .collect();
        let t_deg = ceil_div(cons.c1 * m_tilde, x);
        let t_up = ceil_div(cons.c2 * d * m_tilde + cons.c3 * p * k * x, x * x);
        let t_sz = ceil_div(cons.c3 * k, x);
        for (j, iv) in parts.iter().enumerate() {
            let members = tree.members(path.len(), iv);
            let sz = members.len() as u64;
            let deg_sum: u64 = members
                .iter()
                .map(|&v| g.neighbor_set(v).iter().filter(|u| uni_set.contains(u)).count() as u64)
                .sum();
            let up_sum: u64 = members
                .iter()
                .map(|&v| {
                    anc.iter()
                        .map(|w| g.neighbor_set(v).iter().filter(|u| w.contains(**u) && uni_set.contains(u)).count() as u64)
                        .sum::<u64>()
                })
                .sum();
            if deg_sum > t_deg {
                violations.push(format!(
                    "Consdeg at {path:?}/{j}: {deg_sum} > {t_deg}"
                ));
            }
            if up_sum > t_up {
                violations.push(format!("Consupdeg at {path:?}/{j}: {up_sum} > {t_up}"));
            }
            if sz > t_sz {
                violations.push(format!("Conssz at {path:?}/{j}: {sz} > {t_sz}"));
            }
        }
    }
    TreeReport { pass: violations.is_empty(), violations }
}

/// Recount the six split-tree bounds against a split graph.
pub fn verify_split_tree(tree: &PartitionTree, sg: &SplitGraph, cons: &SplitConstraints) -> TreeReport {
    let pi = match &tree.kind {
        TreeKind::Split { pi, .. } => *pi,
        _ => {
            return TreeReport {
                pass: false,
                violations: vec!["not a split tree".into()],
            }
        }
    };
    let mut violations = Vec::new();
    let (a, b) = (tree.a_bound as u64, tree.b_bound as u64);
    let n = sg.n() as u64;
    let k = sg.k() as u64;
    let (m1, m2, m12) = (sg.m1() as u64, sg.m2() as u64, sg.m12() as u64);
    let mt1 = m1.max(k * a);
    let mt2 = m2.max(n * b);
    let mt12 = m12.max(n * a);
    for (path, parts) in &tree.nodes {
        check_partition_shape(tree, path, parts, &mut violations);
        let d = path.len();
        let anc: Vec<(usize, Interval)> = (0..d)
            .map(|t| (t, tree.nodes[&path[..t].to_vec()][path[t] as usize]))
            .collect();
        for (j, iv) in parts.iter().enumerate() {
            let members = tree.members(d, iv);
            let deg1: u64 = members.iter().map(|&v| sg.deg_into_v1(v) as u64).sum();
            let deg2: u64 = members.iter().map(|&v| sg.deg_into_v2(v) as u64).sum();
            let up = |side1: bool, layers: &dyn Fn(usize) -> bool| -> u64 {
                members
                    .iter()
                    .map(|&v| {
                        anc.iter()
                            .filter(|(t, _)| layers(*t))
                            .map(|(t, w)| {
                                let anc_side1 = *t >= pi;
                                let _ = side1;
                                sg.deg_into_interval(v, w.lo, w.hi, anc_side1) as u64
                            })
                            .sum::<u64>()
                    })
                    .sum()
            };
            if d < pi {
                // outer layer: Consdegbb, Consupdegbb, Consdegba
                let t1 = ceil_div(cons.c1 * m2, b) + n;
                let t2 = ceil_div(cons.c2 * d as u64 * mt2, b * b) + n;
                let t3 = ceil_div(cons.c1 * m12, b) + n;
                if deg2 > t1 {
                    violations.push(format!("Consdegbb at {path:?}/{j}: {deg2} > {t1}"));
                }
                let up2 = up(false, &|t| t < pi);
                if up2 > t2 {
                    violations.push(format!("Consupdegbb at {path:?}/{j}: {up2} > {t2}"));
                }
                if deg1 > t3 {
                    violations.push(format!("Consdegba at {path:?}/{j}: {deg1} > {t3}"));
                }
            } else {
                // inner layer: Consdegaa, Consupdegaa, Consupdegab
                let t1 = ceil_div(cons.c1 * m1, a) + k;
                let t2 = ceil_div(cons.c2 * (d - pi) as u64 * mt1, a * a) + k;
                let t3 = ceil_div(cons.c2 * pi as u64 * mt12, a * b) + n;
                if deg1 > t1 {
                    violations.push(format!("Consdegaa at {path:?}/{j}: {deg1} > {t1}"));
                }
                let up1 = up(true, &|t| t >= pi);
                if up1 > t2 {
                    violations.push(format!("Consupdegaa at {path:?}/{j}: {up1} > {t2}"));
                }
                let upx = up(true, &|t| t < pi);
                if upx > t3 {
                    violations.push(format!("Consupdegab at {path:?}/{j}: {upx} > {t3}"));
                }
            }
        }
    }
    TreeReport { pass: violations.is_empty(), violations }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverError {
    WrongSideCount { in_v1: usize, needed: usize },
    NoPart { depth: usize, vertex: Vertex },
    EdgeNotCovered { a: Vertex, b: Vertex },
}

impl fmt::Display for CoverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoverError::WrongSideCount { in_v1, needed } => {
                write!(f, "clique has {in_v1} inner vertices, the tree places {needed}")
            }
            CoverError::NoPart { depth, vertex } => {
                write!(f, "no part contains vertex {vertex} at depth {depth}")
            }
            CoverError::EdgeNotCovered { a, b } => {
                write!(f, "edge ({a}, {b}) not covered by the ancestor parts")
            }
        }
    }
}

impl std::error::Error for CoverError {}

/// Root-to-leaf walk: choose, per layer, the part containing the next
/// clique vertex (outer-side vertices first for split trees). Errors here
/// falsify the coverage guarantee, so callers treat them as tripwires.
pub fn covering_leaf(tree: &PartitionTree, clique: &[Vertex]) -> Result<(Path, u16), CoverError> {
    assert_eq!(clique.len(), tree.p, "clique size must match the tree depth");
    let order: Vec<Vertex> = match &tree.kind {
        TreeKind::Clique { .. } => {
            let mut c = clique.to_vec();
            c.sort();
            c
        }
        TreeKind::Split { pi, v1, .. } => {
            let v1set: BTreeSet<Vertex> = v1.iter().copied().collect();
            let mut inner: Vec<Vertex> = clique.iter().copied().filter(|v| v1set.contains(v)).collect();
            let mut outer: Vec<Vertex> = clique.iter().copied().filter(|v| !v1set.contains(v)).collect();
            inner.sort();
            outer.sort();
            let needed = tree.p - *pi;
            if inner.len() != needed {
                return Err(CoverError::WrongSideCount { in_v1: inner.len(), needed });
            }
            outer.extend(inner);
            outer
        }
    };
    let mut path: Path = Vec::new();
    let mut leaf_j = 0u16;
    for (d, &v) in order.iter().enumerate() {
        let parts = &tree.nodes[&path];
        let j = parts
            .iter()
            .position(|iv| iv.contains(v))
            .ok_or(CoverError::NoPart { depth: d, vertex: v })? as u16;
        if d + 1 == tree.p {
            leaf_j = j;
        } else {
            path.push(j);
        }
    }
    // tripwire: each clique edge crosses two distinct ancestor parts
    let anc = tree.anc_parts(&path, leaf_j);
    for s in 0..order.len() {
        for t in (s + 1)..order.len() {
            let (a, b) = (order[s], order[t]);
            let hit = anc.iter().enumerate().any(|(i1, (_, p1))| {
                anc.iter().enumerate().any(|(i2, (_, p2))| {
                    i1 != i2 && p1.contains(a) && p2.contains(b)
                })
            });
            if !hit {
                return Err(CoverError::EdgeNotCovered { a, b });
            }
        }
    }
    Ok((path, leaf_j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn tiny_tree() -> PartitionTree {
        // universe 1..=4, p=3, manual singleton-ish tree
        let mut nodes: BTreeMap<Path, Vec<Interval>> = BTreeMap::new();
        let half = vec![Interval { lo: 1, hi: 2 }, Interval { lo: 3, hi: 4 }];
        nodes.insert(vec![], half.clone());
        for l1 in 0..2u16 {
            nodes.insert(vec![l1], half.clone());
            for l2 in 0..2u16 {
                nodes.insert(vec![l1, l2], half.clone());
            }
        }
        PartitionTree {
            kind: TreeKind::Clique { universe: vec![1, 2, 3, 4] },
            p: 3,
            a_bound: 2,
            b_bound: 2,
            nodes,
        }
    }

    #[test]
    fn coverage_walk_on_k4() {
        let tree = tiny_tree();
        let g = crate::gen::complete(4);
        for c in g.brute_force_cliques(3) {
            let (path, j) = covering_leaf(&tree, &c).unwrap();
            let anc = tree.anc_parts(&path, j);
            assert_eq!(anc.len(), 3);
        }
    }

    #[test]
    fn clique_in_one_part_still_covered() {
        let tree = tiny_tree();
        // 1 and 2 share every part they appear in; a triangle with both
        // plus vertex 3 must still walk to a leaf
        let (path, j) = covering_leaf(&tree, &[1, 2, 3]).unwrap();
        assert_eq!(path, vec![0, 0]);
        assert_eq!(j, 1);
    }

    #[test]
    fn verify_flags_injected_size_violation() {
        let g = crate::gen::complete(4);
        let mut tree = tiny_tree();
        let rep = verify_clique_tree(&tree, &g, &K3Constraints::default());
        assert!(rep.pass, "{:?}", rep.violations);
        // inflate one leaf part to the whole universe: overlap violation
        tree.nodes.get_mut(&vec![0u16, 0]).unwrap()[0] = Interval { lo: 1, hi: 4 };
        let rep = verify_clique_tree(&tree, &g, &K3Constraints::default());
        assert!(!rep.pass);
    }

    #[test]
    fn empty_universe_tree_vacuously_passes() {
        let mut nodes: BTreeMap<Path, Vec<Interval>> = BTreeMap::new();
        nodes.insert(vec![], vec![Interval::EMPTY]);
        let tree = PartitionTree {
            kind: TreeKind::Clique { universe: vec![] },
            p: 1,
            a_bound: 1,
            b_bound: 1,
            nodes,
        };
        let g = crate::gen::complete(2);
        assert!(verify_clique_tree(&tree, &g, &K3Constraints::default()).pass);
    }

    #[test]
    fn tree_dump_is_line_per_part() {
        let tree = tiny_tree();
        let dump = tree.dump();
        assert!(dump.lines().count() == 2 * tree.nodes.len());
        assert!(dump.contains("path=(0,1) 0 1 2"));
    }
}
