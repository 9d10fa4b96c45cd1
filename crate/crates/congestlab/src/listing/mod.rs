//! Clique listing: the exhaustive 2-hop search, in-cluster listing over
//! partition trees, and the recursive wrappers tying decomposition,
//! imports, and deferral together. Every path is oracle-checked in tests.

pub mod cliques;
pub mod triangles;

use crate::graph::{Graph, Vertex};
use crate::sim::{self, Pay, RoundCtx, RoundTrace, SimConfig, VertexProgram};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Where a clique was first listed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Exhaustive { level: u32 },
    Cluster { level: u32, cluster: u32 },
    Fallback { level: u32 },
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Exhaustive { level } => write!(f, "exhaustive@{level}"),
            Phase::Cluster { level, cluster } => write!(f, "cluster@{level}/{cluster}"),
            Phase::Fallback { level } => write!(f, "fallback@{level}"),
        }
    }
}

/// Canonical clique set plus per-clique attribution and the merged trace.
#[derive(Debug, Default)]
pub struct ListingResult {
    pub cliques: Vec<Vec<Vertex>>,
    pub attribution: BTreeMap<Vec<Vertex>, Phase>,
    pub depth: usize,
    pub trace: RoundTrace,
    pub notes: Vec<String>,
}

impl ListingResult {
    pub fn absorb(&mut self, found: Vec<Vec<Vertex>>, phase: Phase) {
        for c in found {
            debug_assert!(c.windows(2).all(|w| w[0] < w[1]));
            self.attribution.entry(c).or_insert(phase);
        }
    }

    pub fn finish(&mut self) {
        self.cliques = self.attribution.keys().cloned().collect();
    }

    /// One sorted vertex set per line, sets in lexicographic order.
    pub fn render_cliques(&self) -> String {
        let mut s = String::new();
        for c in &self.cliques {
            let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            s.push_str(&parts.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn render_attribution(&self) -> String {
        let mut s = String::new();
        for (c, ph) in &self.attribution {
            let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            s.push_str(&format!("{} {}\n", parts.join(" "), ph));
        }
        s
    }
}

/// Tunables for the wrappers. Defaults are the production constants; the
/// threshold scale is a test-only knob that shrinks the n^(1-2/p)-style
/// cutoffs so the cluster machinery engages on small graphs.
#[derive(Debug, Clone, Copy)]
pub struct ListingParams {
    pub slack: f64,
    pub thresh_scale: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eps_num: u64,
    pub eps_den: u64,
    pub sim: SimConfig,
}

impl ListingParams {
    pub fn for_p(p: usize) -> ListingParams {
        let (eps_num, eps_den, gamma) = match p {
            3 => (1, 6, 12.0),
            4 => (1, 12, 4.0),
            _ => (1, 18, 12.0),
        };
        ListingParams {
            slack: 8.0,
            thresh_scale: 1.0,
            beta: 24.0,
            gamma,
            eps_num,
            eps_den,
            sim: SimConfig::default(),
        }
    }

    pub fn degree_threshold(&self, n: usize, p: usize) -> f64 {
        self.beta * (n as f64).powf(1.0 - 2.0 / p as f64) * self.thresh_scale
    }
}

struct TwoHop {
    me: Vertex,
    participate: bool,
    neighbors: Vec<Vertex>,
    p: usize,
    replies_pending: usize,
    learned: BTreeMap<Vertex, BTreeSet<Vertex>>,
    listed: bool,
}

impl VertexProgram for TwoHop {
    fn on_round(&mut self, ctx: &mut RoundCtx<'_>) {
        if ctx.round == 1 && self.participate {
            self.replies_pending = self.neighbors.len();
            for &u in &self.neighbors {
                ctx.send(u, Pay::Ids { tag: 0, ids: self.neighbors.clone() });
            }
            if self.replies_pending == 0 {
                self.listed = true; // isolated participant: nothing to list
            }
        }
        let inbox: Vec<(Vertex, Pay)> = ctx.inbox.to_vec();
        for (from, pay) in inbox {
            match pay {
                Pay::Ids { tag: 0, ids } => {
                    // a row request: reply with my adjacency inside it
                    let row: BTreeSet<Vertex> = ids.into_iter().collect();
                    let mine: Vec<Vertex> =
                        self.neighbors.iter().copied().filter(|u| row.contains(u)).collect();
                    ctx.send(from, Pay::Ids { tag: 1, ids: mine });
                }
                Pay::Ids { tag: 1, ids } => {
                    for w in ids {
                        self.learned.entry(from).or_default().insert(w);
                        self.learned.entry(w).or_default().insert(from);
                    }
                    self.replies_pending -= 1;
                    if self.replies_pending == 0 && !self.listed {
                        self.listed = true;
                        self.emit_cliques(ctx);
                    }
                }
                _ => {}
            }
        }
    }
}

impl TwoHop {
    fn emit_cliques(&self, ctx: &mut RoundCtx<'_>) {
        // candidates: my neighbors, with learned adjacency among them
        let mut cur = vec![self.me];
        let cands: Vec<Vertex> = self.neighbors.clone();
        self.extend(&mut cur, &cands, ctx);
    }

    fn extend(&self, cur: &mut Vec<Vertex>, cands: &[Vertex], ctx: &mut RoundCtx<'_>) {
        if cur.len() == self.p {
            let mut c: Vec<u64> = cur.iter().map(|&v| v as u64).collect();
            c.sort();
            ctx.output(c);
            return;
        }
        if cur.len() + cands.len() < self.p {
            return;
        }
        for (i, &v) in cands.iter().enumerate() {
            cur.push(v);
            let next: Vec<Vertex> = cands[i + 1..]
                .iter()
                .copied()
                .filter(|&u| self.learned.get(&v).is_some_and(|s| s.contains(&u)))
                .collect();
            self.extend(cur, &next, ctx);
            cur.pop();
        }
    }
}

/// Every vertex of degree at most `alpha` (and inside `restrict`, when
/// given) learns its induced 2-hop neighborhood over the network `g` and
/// lists every p-clique through itself.
pub fn exhaustive_two_hop(
    g: &Graph,
    alpha: u64,
    p: usize,
    restrict: Option<&BTreeSet<Vertex>>,
    cfg: &SimConfig,
) -> Result<(Vec<Vec<Vertex>>, RoundTrace), sim::SimError> {
    let programs: BTreeMap<Vertex, Box<dyn VertexProgram>> = g
        .vertices()
        .map(|v| {
            let participate = g.degree(v) as u64 <= alpha
                && g.degree(v) > 0
                && restrict.is_none_or(|r| r.contains(&v));
            (
                v,
                Box::new(TwoHop {
                    me: v,
                    participate,
                    neighbors: g.neighbors(v).collect(),
                    p,
                    replies_pending: 0,
                    learned: BTreeMap::new(),
                    listed: false,
                }) as Box<dyn VertexProgram>,
            )
        })
        .collect();
    let res = sim::run(g, programs, cfg)?;
    let mut found: BTreeSet<Vec<Vertex>> = BTreeSet::new();
    for out in res.outputs.values() {
        for c in out {
            found.insert(c.iter().map(|&x| x as Vertex).collect());
        }
    }
    Ok((found.into_iter().collect(), res.trace))
}

/// Depth cap for every recursive wrapper: ceil(log2 |E|) + 1.
pub fn depth_cap(m: usize) -> usize {
    if m <= 1 {
        1
    } else {
        (usize::BITS - (m - 1).leading_zeros()) as usize + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;

    #[test]
    fn star_has_no_triangles() {
        let g = gen::star(4);
        let (out, _) = exhaustive_two_hop(&g, 4, 3, None, &SimConfig::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn k4_lists_all_triangles() {
        let g = gen::complete(4);
        let (out, trace) = exhaustive_two_hop(&g, 3, 3, None, &SimConfig::default()).unwrap();
        assert_eq!(out.len(), 4);
        assert!(trace.total_messages() > 0);
    }

    #[test]
    fn wheel_w5_matches_oracle() {
        let g = gen::wheel(5);
        let (out, _) = exhaustive_two_hop(&g, 3, 3, None, &SimConfig::default()).unwrap();
        // hub has degree 5 > alpha, every rim vertex has degree 3
        assert_eq!(out, g.brute_force_cliques(3));
    }

    #[test]
    fn alpha_cutoff_excludes_high_degree_vertices() {
        let g = gen::complete(5);
        // nobody participates below the cutoff
        let (out, trace) = exhaustive_two_hop(&g, 2, 3, None, &SimConfig::default()).unwrap();
        assert!(out.is_empty());
        assert_eq!(trace.total_messages(), 0);
    }

    #[test]
    fn restriction_limits_participants() {
        let g = gen::complete(4);
        let only: BTreeSet<Vertex> = [1].into_iter().collect();
        let (out, _) = exhaustive_two_hop(&g, 9, 3, Some(&only), &SimConfig::default()).unwrap();
        // vertex 1 alone still lists every triangle through itself
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn depth_cap_values() {
        assert_eq!(depth_cap(1), 1);
        assert_eq!(depth_cap(2), 2);
        assert_eq!(depth_cap(21), 6);
    }
}
