//! Triangle listing: in-cluster listing over the clique partition tree,
//! and the recursive wrapper over the expander decomposition.

use super::{depth_cap, exhaustive_two_hop, ListingParams, ListingResult, Phase};
use crate::expander::{build_communication_clusters, decompose, CommunicationCluster, DecompParams, DeltaRule};
use crate::graph::{Graph, Vertex};
use crate::ptree::build::{build_k3_tree, vlist_graph, BuildCfg, BuildError, ExecMode};
use crate::ptree::{Interval, K3Constraints};
use crate::routing::{self, Demand};
use crate::sim::Pay;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug)]
pub enum ListError {
    Build(BuildError),
    Sim(crate::sim::SimError),
    Route(crate::routing::RouteError),
    DepthBreach { depth: usize, cap: usize },
    Accounting(String),
}

impl std::fmt::Display for ListError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ListError::Build(e) => write!(f, "tree build: {e}"),
            ListError::Sim(e) => write!(f, "simulation: {e}"),
            ListError::Route(e) => write!(f, "routing: {e}"),
            ListError::DepthBreach { depth, cap } => {
                write!(f, "recursion depth {depth} breached the cap {cap}")
            }
            ListError::Accounting(s) => write!(f, "accounting breach: {s}"),
        }
    }
}

impl std::error::Error for ListError {}

impl From<BuildError> for ListError {
    fn from(e: BuildError) -> Self {
        ListError::Build(e)
    }
}

impl From<crate::sim::SimError> for ListError {
    fn from(e: crate::sim::SimError) -> Self {
        ListError::Sim(e)
    }
}

impl From<crate::routing::RouteError> for ListError {
    fn from(e: crate::routing::RouteError) -> Self {
        ListError::Route(e)
    }
}

/// All triangles of the cluster reachable by its own machinery: exhaustive
/// 2-hop for the sub-threshold vertices, and the partition-tree protocol
/// for V_list. Returns the triangles with the merged trace.
pub fn list_triangles_in_cluster(
    cluster: &CommunicationCluster,
    params: &ListingParams,
) -> Result<(Vec<Vec<Vertex>>, crate::sim::RoundTrace), ListError> {
    let mut trace = crate::sim::RoundTrace::default();
    let cg = cluster.cluster_graph();
    let mut found: BTreeSet<Vec<Vertex>> = BTreeSet::new();

    // low-degree phase over the cluster network
    let low: BTreeSet<Vertex> =
        cluster.nodes.iter().copied().filter(|v| !cluster.v_list.contains(v)).collect();
    if !low.is_empty() {
        let (out, t) = exhaustive_two_hop(&cg, cluster.delta, 3, Some(&low), &params.sim)?;
        trace.append(t);
        found.extend(out);
    }

    // high-degree phase: tree, leaf assignment, two-step edge learning
    if !cluster.v_list.is_empty() {
        let build = build_k3_tree(cluster, &K3Constraints::default(), &build_cfg(params), ExecMode::Distributed)?;
        trace.append(build.trace);
        let g1 = vlist_graph(cluster);
        let report = crate::ptree::verify_clique_tree(&build.tree, &g1, &K3Constraints::default());
        if !report.pass {
            return Err(ListError::Build(BuildError::Verify(report.violations)));
        }

        // step 1: per assigned leaf, ask every member of each ancestor
        // part for its edges into the other ancestor parts
        let mut asks: BTreeSet<(Vertex, Vertex, Interval)> = BTreeSet::new();
        for (&v, leaves) in &build.leaf_assignment {
            for (path, j) in leaves {
                let anc = build.tree.anc_parts(path, *j);
                for (ai, (_, part)) in anc.iter().enumerate() {
                    for u in build.tree.members(0, part) {
                        for (bi, (_, other)) in anc.iter().enumerate() {
                            if ai != bi {
                                asks.insert((v, u, *other));
                            }
                        }
                    }
                }
            }
        }
        let step1: Vec<Demand> = asks
            .iter()
            .map(|&(v, u, iv)| Demand {
                src: v,
                dst: u,
                pay: Pay::Interval { lo: iv.lo, hi: iv.hi, tag: v as u64 },
            })
            .collect();
        let out = routing::route_auto(cluster, step1, &params.sim)?;
        trace.append(out.trace);

        // step 2: members reply with their edges into the interval
        let mut step2: Vec<Demand> = Vec::new();
        for (u, arrived) in out.delivered {
            for (_, pay) in arrived {
                if let Pay::Interval { lo, hi, tag } = pay {
                    let asker = tag as Vertex;
                    for w in g1.neighbors(u) {
                        if lo <= w && w <= hi {
                            step2.push(Demand { src: u, dst: asker, pay: Pay::Edge(u, w) });
                        }
                    }
                }
            }
        }
        let out = routing::route_auto(cluster, step2, &params.sim)?;
        trace.append(out.trace);

        // per-vertex received volume against the k^(1/3) * deg bound
        let k13 = (cluster.k() as f64).powf(1.0 / 3.0).ceil();
        let logn2 = (cluster.n_global.max(2) as f64).log2().powi(2);
        for (&v, got) in &out.delivered {
            let cap = params.slack * k13 * cluster.deg_c(v) as f64 * logn2;
            if got.len() as f64 > cap {
                return Err(ListError::Accounting(format!(
                    "vertex {v} learned {} edges, above the k^(1/3)*deg bound {cap:.0}",
                    got.len()
                )));
            }
        }

        // local listing over pooled learned edges plus native rows
        for (&v, arrived) in &out.delivered {
            let mut adj: BTreeMap<Vertex, BTreeSet<Vertex>> = BTreeMap::new();
            for (_, pay) in arrived {
                if let Pay::Edge(a, b) = pay {
                    adj.entry(*a).or_default().insert(*b);
                    adj.entry(*b).or_default().insert(*a);
                }
            }
            for u in g1.neighbors(v) {
                adj.entry(v).or_default().insert(u);
                adj.entry(u).or_default().insert(v);
            }
            let verts: Vec<Vertex> = adj.keys().copied().collect();
            for &a in &verts {
                for &b in adj[&a].range((a + 1)..) {
                    for &c in adj[&b].range((b + 1)..) {
                        if adj[&a].contains(&c) {
                            found.insert(vec![a, b, c]);
                        }
                    }
                }
            }
        }
    }
    Ok((found.into_iter().collect(), trace))
}

fn build_cfg(params: &ListingParams) -> BuildCfg {
    BuildCfg { sim: params.sim, slack: params.slack }
}

/// The recursive triangle wrapper: decompose, list inside every cluster,
/// recurse on the edges outside the inner sets.
pub fn list_triangles(g: &Graph, params: &ListingParams) -> Result<ListingResult, ListError> {
    let mut result = ListingResult::default();
    let cap = depth_cap(g.m().max(1));
    let mut current = g.clone();
    let mut level: u32 = 0;
    while current.m() > 0 {
        if level as usize >= cap {
            return Err(ListError::DepthBreach { depth: level as usize, cap });
        }
        let d = decompose(&current, params.eps_num, params.eps_den, &DecompParams::default());
        let (clusters, acct) = build_communication_clusters(&current, &d, DeltaRule::K3, g.n());
        if acct.max_eplus_membership > 2 {
            return Err(ListError::Accounting(format!(
                "an edge landed in {} augmented cluster edge sets",
                acct.max_eplus_membership
            )));
        }
        if acct.outside_inner_sum * params.eps_den > 2 * params.eps_num * current.m() as u64 {
            return Err(ListError::Accounting(format!(
                "sum |E_i minus inner| = {} above 2*eps*|E|",
                acct.outside_inner_sum
            )));
        }
        let mut eliminated: BTreeSet<(Vertex, Vertex)> = BTreeSet::new();
        for c in &clusters {
            let (tris, t) = list_triangles_in_cluster(c, params)?;
            result.trace.append(t);
            result.absorb(tris, Phase::Cluster { level, cluster: c.id as u32 });
            // an inner edge retires only when every triangle through it is
            // listable by this cluster: both other edges inside E_C and
            // the third vertex either in V_list or under the low-degree
            // cutoff (otherwise the triangle survives into the recursion)
            for &(a, b) in &c.e_minus {
                let safe = current
                    .neighbor_set(a)
                    .intersection(current.neighbor_set(b))
                    .all(|&w| {
                        let aw = c.adj.get(&a).is_some_and(|s| s.contains(&w));
                        let bw = c.adj.get(&b).is_some_and(|s| s.contains(&w));
                        let listable =
                            c.v_list.contains(&w) || c.deg_c(w) as u64 <= c.delta;
                        aw && bw && listable
                    });
                if safe {
                    eliminated.insert((a, b));
                }
            }
        }
        let next: BTreeSet<(Vertex, Vertex)> = current
            .edges()
            .into_iter()
            .filter(|e| !eliminated.contains(e))
            .collect();
        if 2 * next.len() > current.m() {
            // elimination fell short of the halving guarantee: complete
            // the residual exhaustively so the depth cap always holds
            let (out, t) =
                exhaustive_two_hop(&current, current.n() as u64, 3, None, &params.sim)?;
            result.trace.append(t);
            result.absorb(out, Phase::Fallback { level });
            result.notes.push(format!(
                "level {level}: fallback, {} of {} edges kept",
                next.len(),
                current.m()
            ));
            break;
        }
        current = current.induced_by_edges(&next).expect("subset of current edges");
        level += 1;
    }
    result.depth = level as usize + 1;
    result.finish();
    Ok(result)
}
