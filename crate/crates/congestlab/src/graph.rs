//! Undirected simple graphs on vertices `1..=n`, the edge-list text format,
//! split graphs, and the brute-force clique oracle.

use std::collections::BTreeSet;
use std::fmt;

pub type Vertex = u32;

/// Unordered edge, stored with the smaller endpoint first.
pub fn norm_edge(u: Vertex, v: Vertex) -> (Vertex, Vertex) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphError {
    SelfLoop(Vertex),
    VertexOutOfRange { v: Vertex, n: usize },
    NotASubsetOfEdges { edge: (Vertex, Vertex) },
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::SelfLoop(v) => write!(f, "self-loop at vertex {v}"),
            GraphError::VertexOutOfRange { v, n } => {
                write!(f, "vertex {v} outside 1..={n}")
            }
            GraphError::NotASubsetOfEdges { edge } => {
                write!(f, "edge ({}, {}) is not an edge of the graph", edge.0, edge.1)
            }
        }
    }
}

impl std::error::Error for GraphError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    MissingHeader,
    BadHeader { line: usize, text: String },
    BadLine { line: usize, text: String },
    SelfLoop { line: usize, v: Vertex },
    OutOfRange { line: usize, v: Vertex, n: usize },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::MissingHeader => write!(f, "missing 'n m' header line"),
            ParseError::BadHeader { line, text } => {
                write!(f, "line {line}: bad header {text:?}")
            }
            ParseError::BadLine { line, text } => {
                write!(f, "line {line}: expected 'u v', got {text:?}")
            }
            ParseError::SelfLoop { line, v } => {
                write!(f, "line {line}: self-loop at vertex {v}")
            }
            ParseError::OutOfRange { line, v, n } => {
                write!(f, "line {line}: vertex {v} outside 1..={n}")
            }
        }
    }
}

impl std::error::Error for ParseError {}

/// Simple undirected graph. Vertices are dense 1-based ids; isolated
/// vertices are allowed and a subgraph keeps the original numbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<BTreeSet<Vertex>>, // index 0 unused
    m: usize,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph {
            n,
            adj: vec![BTreeSet::new(); n + 1],
            m: 0,
        }
    }

    pub fn from_edges(n: usize, edges: &[(Vertex, Vertex)]) -> Result<Self, GraphError> {
        let mut g = Graph::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn add_edge(&mut self, u: Vertex, v: Vertex) -> Result<(), GraphError> {
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        for w in [u, v] {
            if w == 0 || w as usize > self.n {
                return Err(GraphError::VertexOutOfRange { v: w, n: self.n });
            }
        }
        if self.adj[u as usize].insert(v) {
            self.adj[v as usize].insert(u);
            self.m += 1;
        }
        Ok(())
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        u != v
            && u as usize <= self.n
            && v as usize <= self.n
            && u > 0
            && self.adj[u as usize].contains(&v)
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adj[v as usize].len()
    }

    pub fn neighbors(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.adj[v as usize].iter().copied()
    }

    pub fn neighbor_set(&self, v: Vertex) -> &BTreeSet<Vertex> {
        &self.adj[v as usize]
    }

    /// All edges `(u, v)` with `u < v`, ascending.
    pub fn edges(&self) -> Vec<(Vertex, Vertex)> {
        let mut out = Vec::with_capacity(self.m);
        for u in 1..=self.n as Vertex {
            for &v in &self.adj[u as usize] {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> {
        1..=self.n as Vertex
    }

    /// Vertices with at least one incident edge.
    pub fn active_vertices(&self) -> BTreeSet<Vertex> {
        (1..=self.n as Vertex)
            .filter(|&v| !self.adj[v as usize].is_empty())
            .collect()
    }

    /// `|{u in s : (v, u) in E}|`.
    pub fn degree_into(&self, v: Vertex, s: &BTreeSet<Vertex>) -> usize {
        if s.len() < self.degree(v) {
            s.iter().filter(|&&u| self.has_edge(v, u)).count()
        } else {
            self.adj[v as usize].iter().filter(|u| s.contains(u)).count()
        }
    }

    /// Subgraph induced by an edge subset; vertex numbering is preserved and
    /// the vertex set is the set of endpoints.
    pub fn induced_by_edges(&self, sub: &BTreeSet<(Vertex, Vertex)>) -> Result<Graph, GraphError> {
        let mut g = Graph::new(self.n);
        for &(u, v) in sub {
            let (u, v) = norm_edge(u, v);
            if !self.has_edge(u, v) {
                return Err(GraphError::NotASubsetOfEdges { edge: (u, v) });
            }
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Sum of degrees over `s`.
    pub fn volume(&self, s: &BTreeSet<Vertex>) -> u64 {
        s.iter().map(|&v| self.degree(v) as u64).sum()
    }

    /// Number of edges with exactly one endpoint in `s`.
    pub fn boundary(&self, s: &BTreeSet<Vertex>) -> u64 {
        let mut b = 0u64;
        for &v in s {
            for &u in &self.adj[v as usize] {
                if !s.contains(&u) {
                    b += 1;
                }
            }
        }
        b
    }

    /// Connected components over vertices with positive degree, each as a
    /// sorted vertex set.
    pub fn components(&self) -> Vec<BTreeSet<Vertex>> {
        let mut seen = vec![false; self.n + 1];
        let mut out = Vec::new();
        for start in 1..=self.n as Vertex {
            if seen[start as usize] || self.adj[start as usize].is_empty() {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut stack = vec![start];
            seen[start as usize] = true;
            while let Some(v) = stack.pop() {
                comp.insert(v);
                for &u in &self.adj[v as usize] {
                    if !seen[u as usize] {
                        seen[u as usize] = true;
                        stack.push(u);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// Parse the edge-list format: header `n m`, then `u v` lines; `#` starts
    /// a comment. Duplicate edge lines collapse.
    pub fn parse(text: &str) -> Result<Graph, ParseError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(ParseError::MissingHeader)?;
        let mut it = header.split_whitespace();
        let n: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(ParseError::BadHeader {
                line: hline,
                text: header.to_string(),
            })?;
        let _m: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(ParseError::BadHeader {
                line: hline,
                text: header.to_string(),
            })?;
        if it.next().is_some() {
            return Err(ParseError::BadHeader {
                line: hline,
                text: header.to_string(),
            });
        }
        let mut g = Graph::new(n);
        for (lno, line) in lines {
            let mut it = line.split_whitespace();
            let (u, v) = match (
                it.next().and_then(|t| t.parse::<Vertex>().ok()),
                it.next().and_then(|t| t.parse::<Vertex>().ok()),
                it.next(),
            ) {
                (Some(u), Some(v), None) => (u, v),
                _ => {
                    return Err(ParseError::BadLine {
                        line: lno,
                        text: line.to_string(),
                    })
                }
            };
            match g.add_edge(u, v) {
                Ok(()) => {}
                Err(GraphError::SelfLoop(v)) => return Err(ParseError::SelfLoop { line: lno, v }),
                Err(GraphError::VertexOutOfRange { v, n }) => {
                    return Err(ParseError::OutOfRange { line: lno, v, n })
                }
                Err(_) => unreachable!(),
            }
        }
        Ok(g)
    }

    /// Render in the same edge-list format `parse` reads.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.m);
        for (u, v) in self.edges() {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }

    /// All vertex sets of size `p` inducing a complete subgraph, each sorted,
    /// listed in lexicographic order. Independent oracle for every listing
    /// algorithm in this crate.
    pub fn brute_force_cliques(&self, p: usize) -> Vec<Vec<Vertex>> {
        assert!(p >= 1);
        let mut out = Vec::new();
        let mut cur: Vec<Vertex> = Vec::with_capacity(p);
        for v in 1..=self.n as Vertex {
            cur.push(v);
            if p == 1 {
                out.push(cur.clone());
            } else {
                let cands: Vec<Vertex> =
                    self.adj[v as usize].iter().copied().filter(|&u| u > v).collect();
                self.extend_clique(&mut cur, &cands, p, &mut out);
            }
            cur.pop();
        }
        out
    }

    fn extend_clique(
        &self,
        cur: &mut Vec<Vertex>,
        cands: &[Vertex],
        p: usize,
        out: &mut Vec<Vec<Vertex>>,
    ) {
        if cur.len() + cands.len() < p {
            return;
        }
        for (i, &v) in cands.iter().enumerate() {
            cur.push(v);
            if cur.len() == p {
                out.push(cur.clone());
            } else {
                let next: Vec<Vertex> = cands[i + 1..]
                    .iter()
                    .copied()
                    .filter(|&u| self.has_edge(u, v))
                    .collect();
                self.extend_clique(cur, &next, p, out);
            }
            cur.pop();
        }
    }
}

/// Cut statistics for a vertex set: volume, boundary, conductance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutMetrics {
    pub cut: BTreeSet<Vertex>,
    pub volume: u64,
    pub boundary: u64,
    pub conductance: crate::rational::Ratio,
}

impl CutMetrics {
    /// Metrics of a nontrivial cut of `g` restricted to `universe`.
    /// Degrees and boundaries are taken within `g`.
    pub fn of(g: &Graph, s: &BTreeSet<Vertex>) -> CutMetrics {
        let vol_s = g.volume(s);
        let total: u64 = 2 * g.m() as u64;
        let vol_rest = total - vol_s;
        let b = g.boundary(s);
        let denom = vol_s.min(vol_rest);
        let phi = if denom == 0 {
            crate::rational::Ratio::ZERO
        } else {
            crate::rational::Ratio::new(b, denom)
        };
        CutMetrics {
            cut: s.clone(),
            volume: vol_s,
            boundary: b,
            conductance: phi,
        }
    }
}

/// A graph together with a two-sided vertex split and the three induced
/// edge classes: inside `v1`, inside `v2`, and crossing.
#[derive(Debug, Clone)]
pub struct SplitGraph {
    pub v1: BTreeSet<Vertex>,
    pub v2: BTreeSet<Vertex>,
    pub e1: BTreeSet<(Vertex, Vertex)>,
    pub e2: BTreeSet<(Vertex, Vertex)>,
    pub e12: BTreeSet<(Vertex, Vertex)>,
    adj1: std::collections::BTreeMap<Vertex, BTreeSet<Vertex>>, // within e1 ∪ e12 heads etc.
    adj2: std::collections::BTreeMap<Vertex, BTreeSet<Vertex>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitError {
    Overlap(Vertex),
    MisplacedEdge {
        class: &'static str,
        edge: (Vertex, Vertex),
    },
    DuplicateEdge((Vertex, Vertex)),
}

impl fmt::Display for SplitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitError::Overlap(v) => write!(f, "vertex {v} in both sides of the split"),
            SplitError::MisplacedEdge { class, edge } => {
                write!(f, "edge ({}, {}) violates the {class} side condition", edge.0, edge.1)
            }
            SplitError::DuplicateEdge(e) => {
                write!(f, "edge ({}, {}) appears in two classes", e.0, e.1)
            }
        }
    }
}

impl std::error::Error for SplitError {}

impl SplitGraph {
    pub fn new(
        v1: BTreeSet<Vertex>,
        v2: BTreeSet<Vertex>,
        e1: BTreeSet<(Vertex, Vertex)>,
        e2: BTreeSet<(Vertex, Vertex)>,
        e12: BTreeSet<(Vertex, Vertex)>,
    ) -> Result<SplitGraph, SplitError> {
        if let Some(&v) = v1.intersection(&v2).next() {
            return Err(SplitError::Overlap(v));
        }
        let e1: BTreeSet<_> = e1.into_iter().map(|(u, v)| norm_edge(u, v)).collect();
        let e2: BTreeSet<_> = e2.into_iter().map(|(u, v)| norm_edge(u, v)).collect();
        let e12: BTreeSet<_> = e12.into_iter().map(|(u, v)| norm_edge(u, v)).collect();
        for &(u, v) in &e1 {
            if !(v1.contains(&u) && v1.contains(&v)) {
                return Err(SplitError::MisplacedEdge { class: "inner", edge: (u, v) });
            }
        }
        for &(u, v) in &e2 {
            if !(v2.contains(&u) && v2.contains(&v)) {
                return Err(SplitError::MisplacedEdge { class: "outer", edge: (u, v) });
            }
        }
        for &(u, v) in &e12 {
            let ok = (v1.contains(&u) && v2.contains(&v)) || (v2.contains(&u) && v1.contains(&v));
            if !ok {
                return Err(SplitError::MisplacedEdge { class: "crossing", edge: (u, v) });
            }
        }
        if let Some(&e) = e1.intersection(&e2).next() {
            return Err(SplitError::DuplicateEdge(e));
        }
        if let Some(&e) = e1.intersection(&e12).next() {
            return Err(SplitError::DuplicateEdge(e));
        }
        if let Some(&e) = e2.intersection(&e12).next() {
            return Err(SplitError::DuplicateEdge(e));
        }
        let mut sg = SplitGraph {
            v1,
            v2,
            e1,
            e2,
            e12,
            adj1: Default::default(),
            adj2: Default::default(),
        };
        sg.rebuild_adj();
        Ok(sg)
    }

    fn rebuild_adj(&mut self) {
        self.adj1.clear();
        self.adj2.clear();
        let all = self.e1.iter().chain(self.e2.iter()).chain(self.e12.iter());
        for &(u, v) in all {
            for (a, b) in [(u, v), (v, u)] {
                let tgt = if self.v1.contains(&b) {
                    self.adj1.entry(a).or_default()
                } else {
                    self.adj2.entry(a).or_default()
                };
                tgt.insert(b);
            }
        }
    }

    pub fn n(&self) -> usize {
        self.v1.len() + self.v2.len()
    }

    pub fn k(&self) -> usize {
        self.v1.len()
    }

    pub fn m1(&self) -> usize {
        self.e1.len()
    }

    pub fn m2(&self) -> usize {
        self.e2.len()
    }

    pub fn m12(&self) -> usize {
        self.e12.len()
    }

    /// Neighbors of `v` on side 1 (over all three edge classes).
    pub fn neighbors_in_v1(&self, v: Vertex) -> Option<&BTreeSet<Vertex>> {
        self.adj1.get(&v)
    }

    pub fn neighbors_in_v2(&self, v: Vertex) -> Option<&BTreeSet<Vertex>> {
        self.adj2.get(&v)
    }

    pub fn deg_into_v1(&self, v: Vertex) -> usize {
        self.adj1.get(&v).map_or(0, |s| s.len())
    }

    pub fn deg_into_v2(&self, v: Vertex) -> usize {
        self.adj2.get(&v).map_or(0, |s| s.len())
    }

    pub fn has_any_edge(&self, u: Vertex, v: Vertex) -> bool {
        let e = norm_edge(u, v);
        self.e1.contains(&e) || self.e2.contains(&e) || self.e12.contains(&e)
    }

    /// Degree of `v` into an id interval restricted to one side.
    pub fn deg_into_interval(&self, v: Vertex, lo: Vertex, hi: Vertex, side1: bool) -> usize {
        let adj = if side1 { self.adj1.get(&v) } else { self.adj2.get(&v) };
        adj.map_or(0, |s| s.range(lo..=hi).count())
    }
}
