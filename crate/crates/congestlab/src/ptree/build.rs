//! Distributed construction of partition trees inside a cluster, plus the
//! three redistribution subroutines every build leans on: the
//! gather-and-double broadcast, the two-phase amplifier broadcast, and
//! the degree-proportional leaf distribution.

use super::algos::{k3_layer_stream, split_layer_stream, BalanceAlgo, K3LayerAlgo, SplitLayerAlgo};
use super::{ceil_div, Interval, K3Constraints, PartitionTree, Path, SplitConstraints, TreeKind};
use crate::expander::CommunicationCluster;
use crate::graph::{Graph, SplitGraph, Vertex};
use crate::routing::{self, Demand, RouteError};
use crate::sim::{Pay, RoundTrace, SimConfig, Wire};
use crate::skipstream::distributed::{
    simulate_in_cluster, AlgoInput, AlgoSlice, DistError, StreamingInputCluster,
};
use crate::skipstream::{run_sequential, Token, TokenStream};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug)]
pub enum BuildError {
    Route(RouteError),
    Dist(DistError),
    Contract(String),
    Verify(Vec<String>),
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::Route(e) => write!(f, "routing: {e}"),
            BuildError::Dist(e) => write!(f, "simulation: {e}"),
            BuildError::Contract(s) => write!(f, "contract violation: {s}"),
            BuildError::Verify(v) => write!(f, "tree verification failed: {}", v.join("; ")),
        }
    }
}

impl std::error::Error for BuildError {}

impl From<RouteError> for BuildError {
    fn from(e: RouteError) -> Self {
        BuildError::Route(e)
    }
}

impl From<DistError> for BuildError {
    fn from(e: DistError) -> Self {
        BuildError::Dist(e)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BuildCfg {
    pub sim: SimConfig,
    pub slack: f64,
}

impl Default for BuildCfg {
    fn default() -> Self {
        BuildCfg { sim: SimConfig::default(), slack: 8.0 }
    }
}

fn log2n(n: usize) -> f64 {
    (n.max(2) as f64).log2()
}

/// Gather every item at the lowest-id V_list vertex, then doubling rounds:
/// each informed vertex transmits the whole set to one uninformed vertex.
/// Afterwards all of V_list knows all items.
type BroadcastOutcome = (Vec<Pay>, RoundTrace);

pub fn broadcast_n_messages(
    cluster: &CommunicationCluster,
    items: Vec<(Vertex, Pay)>,
    cfg: &BuildCfg,
) -> Result<BroadcastOutcome, BuildError> {
    let ranks = cluster.vlist_ranked();
    let k = ranks.len();
    if k == 0 {
        return Err(BuildError::Contract("broadcast on an empty V_list".into()));
    }
    let mut trace = RoundTrace::default();
    let v_hat = ranks[0];
    let gather: Vec<Demand> = items
        .iter()
        .map(|(holder, pay)| Demand { src: *holder, dst: v_hat, pay: pay.clone() })
        .collect();
    let out = routing::route_auto(cluster, gather, &cfg.sim)?;
    trace.append(out.trace);
    let all: Vec<Pay> = items.into_iter().map(|(_, p)| p).collect();
    let mut informed = 1usize;
    while informed < k {
        let mut step: Vec<Demand> = Vec::new();
        for i in 0..informed {
            let tgt = informed + i;
            if tgt >= k {
                break;
            }
            for pay in &all {
                step.push(Demand { src: ranks[i], dst: ranks[tgt], pay: pay.clone() });
            }
        }
        let out = routing::route_auto(cluster, step, &cfg.sim)?;
        trace.append(out.trace);
        informed = (2 * informed).min(k);
    }
    Ok((all, trace))
}

/// Two-phase amplifier broadcast: each item's holder sends it to the
/// members of the item's amplifier chain, and each member fans it out to
/// its assigned rank block. Every V_list vertex ends up knowing every item.
type AmplifyOutcome = (Vec<Pay>, BTreeMap<Vertex, u64>, RoundTrace);

pub fn amplify_broadcast(
    cluster: &CommunicationCluster,
    items: Vec<(Vertex, Pay)>,
    cfg: &BuildCfg,
) -> Result<AmplifyOutcome, BuildError> {
    let ranks = cluster.vlist_ranked();
    let k = ranks.len();
    if k == 0 {
        return Err(BuildError::Contract("amplify on an empty V_list".into()));
    }
    let mut trace = RoundTrace::default();
    if items.is_empty() {
        return Ok((Vec::new(), BTreeMap::new(), trace));
    }
    let k13 = (k as f64).powf(1.0 / 3.0).ceil();
    let k23 = (k as f64).powf(2.0 / 3.0).ceil();
    // preconditions: O(k^{2/3}) items, O(k^{1/3}) per holder
    if items.len() as f64 > cfg.slack * k23 {
        return Err(BuildError::Contract(format!(
            "{} items exceed the k^(2/3) precondition ({})",
            items.len(),
            k23
        )));
    }
    let mut per_holder: BTreeMap<Vertex, u64> = BTreeMap::new();
    for (h, _) in &items {
        *per_holder.entry(*h).or_default() += 1;
    }
    if let Some((&h, &c)) = per_holder.iter().max_by_key(|(_, c)| **c) {
        if c as f64 > cfg.slack * k13 {
            return Err(BuildError::Contract(format!(
                "holder {h} has {c} items, above the k^(1/3) precondition"
            )));
        }
    }
    let beta_a = k23 as usize;
    let lam_a = k.div_ceil(beta_a);
    let chain_members = |j: usize| -> Vec<Vertex> {
        (0..lam_a).map(|i| ranks[(j * lam_a + i) % k]).collect()
    };
    // phase 1: holders -> chain members
    let mut phase1: Vec<Demand> = Vec::new();
    for (j, (holder, pay)) in items.iter().enumerate() {
        for m in chain_members(j) {
            phase1.push(Demand {
                src: *holder,
                dst: m,
                pay: Pay::Item { id: j as u64, inner: Box::new(pay.clone()) },
            });
        }
    }
    let out = routing::route_auto(cluster, phase1, &cfg.sim)?;
    trace.append(out.trace);
    // phase 2: members -> their rank blocks
    let mut phase2: Vec<Demand> = Vec::new();
    let mut recv_counts: BTreeMap<Vertex, u64> = BTreeMap::new();
    for (j, (_, pay)) in items.iter().enumerate() {
        let members = chain_members(j);
        let chain = crate::skipstream::VertexChain::new(ranks.clone(), beta_a, &members)
            .map_err(|e| BuildError::Contract(e.to_string()))?;
        for (i, &m) in chain.members.iter().enumerate() {
            for &u in chain.block(i) {
                *recv_counts.entry(u).or_default() += 1;
                phase2.push(Demand {
                    src: m,
                    dst: u,
                    pay: Pay::Item { id: j as u64, inner: Box::new(pay.clone()) },
                });
            }
        }
    }
    let out = routing::route_auto(cluster, phase2, &cfg.sim)?;
    trace.append(out.trace);
    // every vertex got every item exactly once in phase 2
    for &u in &ranks {
        if recv_counts.get(&u).copied().unwrap_or(0) != items.len() as u64 {
            return Err(BuildError::Contract(format!(
                "vertex {u} missed an amplified item"
            )));
        }
    }
    Ok((items.into_iter().map(|(_, p)| p).collect(), recv_counts, trace))
}

/// Degree-proportional distribution of numbered items over V_hd:
/// re-index to rank holders, allocate intervals with the balancing
/// machine in-cluster, deliver each interval to its subject, and let
/// subjects pull their items. Each v ends up with at most
/// `2 * ceil(M * deg_C(v) / m)` items; below-half-average vertices with
/// none.
type Assignment = BTreeMap<Vertex, Vec<(u64, Pay)>>;

pub fn degree_balanced_distribute(
    cluster: &CommunicationCluster,
    items: Vec<(Vertex, u64, Pay)>,
    m_cap: u64,
    cfg: &BuildCfg,
) -> Result<(Assignment, RoundTrace), BuildError> {
    let ranks = cluster.vlist_ranked();
    let k = ranks.len() as u64;
    if k == 0 {
        return Err(BuildError::Contract("distribute on an empty V_list".into()));
    }
    let mut trace = RoundTrace::default();
    let m_total = cluster.comm_deg_sum();
    // half-average mass: V_hd carries at least half the communication
    // volume, which is what makes the interval allocation cover M
    let hd_sum: u64 = cluster.v_hd().iter().map(|&v| cluster.deg_c(v) as u64).sum();
    if 2 * hd_sum < m_total {
        return Err(BuildError::Contract(format!(
            "V_hd mass {hd_sum} below half of the total degree {m_total}"
        )));
    }
    let k13 = (k as f64).powf(1.0 / 3.0).ceil();
    let mut per_holder: BTreeMap<Vertex, u64> = BTreeMap::new();
    for (h, id, _) in &items {
        *per_holder.entry(*h).or_default() += 1;
        if *id == 0 || *id > m_cap {
            return Err(BuildError::Contract(format!("item id {id} outside 1..={m_cap}")));
        }
    }
    if let Some(&c) = per_holder.values().max() {
        if c as f64 > cfg.slack * k13 {
            return Err(BuildError::Contract(format!(
                "a holder has {c} items, above the k^(1/3) precondition"
            )));
        }
    }
    let c = ceil_div(m_cap.max(1), k);
    let rank_of_item = |id: u64| ranks[((id - 1) / c) as usize];
    // (i) re-index to the rank holders
    let reindex: Vec<Demand> = items
        .iter()
        .map(|(h, id, pay)| Demand {
            src: *h,
            dst: rank_of_item(*id),
            pay: Pay::Item { id: *id, inner: Box::new(pay.clone()) },
        })
        .collect();
    let out = routing::route_auto(cluster, reindex, &cfg.sim)?;
    trace.append(out.trace);
    let mut rank_holdings: BTreeMap<Vertex, BTreeMap<u64, Pay>> = BTreeMap::new();
    for (v, arrived) in out.delivered {
        for (_, pay) in arrived {
            if let Pay::Item { id, inner } = pay {
                rank_holdings.entry(v).or_default().insert(id, *inner);
            }
        }
    }
    // (ii) run the balancing machine in-cluster
    let algo = BalanceAlgo::new(k, m_total, m_cap, Wire::new(cluster.n_global, 8).count_bits());
    let slices: BTreeMap<Vertex, AlgoSlice> = ranks
        .iter()
        .map(|&v| (v, AlgoSlice::mains_only(vec![vec![v as u64, cluster.deg_c(v) as u64]])))
        .collect();
    let sic = StreamingInputCluster::new(cluster, vec![AlgoInput { algo: Box::new(algo), slices }], 1)?;
    let lambda = (k13 as usize).clamp(1, k as usize);
    let dist = simulate_in_cluster(&sic, lambda, &cfg.sim, cfg.slack)?;
    trace.append(dist.trace);
    // (iii) deliver each interval token to its subject
    let mut deliver: Vec<Demand> = Vec::new();
    for (&writer, toks) in &dist.outputs[0] {
        for (_, t) in toks {
            let (v, lo, hi) = (t[0] as Vertex, t[1], t[2]);
            deliver.push(Demand { src: writer, dst: v, pay: Pay::Interval { lo: lo as Vertex, hi: hi as Vertex, tag: 0 } });
        }
    }
    let out = routing::route_auto(cluster, deliver, &cfg.sim)?;
    trace.append(out.trace);
    let mut subject_interval: BTreeMap<Vertex, (u64, u64)> = BTreeMap::new();
    for (v, arrived) in out.delivered {
        for (_, pay) in arrived {
            if let Pay::Interval { lo, hi, .. } = pay {
                subject_interval.insert(v, (lo as u64, hi as u64));
            }
        }
    }
    // allocation must cover all item numbers
    let top = subject_interval.values().map(|&(_, hi)| hi).max().unwrap_or(0);
    if m_cap > 0 && top < m_cap {
        return Err(BuildError::Contract(format!(
            "allocated intervals stop at {top}, below M = {m_cap}"
        )));
    }
    // (iv) subjects pull their items from the rank holders
    let mut pulls: Vec<Demand> = Vec::new();
    for (&v, &(lo, hi)) in &subject_interval {
        for id in lo..=hi.min(m_cap) {
            if lo > hi {
                continue;
            }
            pulls.push(Demand { src: v, dst: rank_of_item(id), pay: Pay::Count(v, id) });
        }
    }
    let out = routing::route_auto(cluster, pulls, &cfg.sim)?;
    trace.append(out.trace);
    let mut responses: Vec<Demand> = Vec::new();
    for (holder, arrived) in out.delivered {
        for (_, pay) in arrived {
            if let Pay::Count(subject, id) = pay {
                if let Some(item) = rank_holdings.get(&holder).and_then(|h| h.get(&id)) {
                    responses.push(Demand {
                        src: holder,
                        dst: subject,
                        pay: Pay::Item { id, inner: Box::new(item.clone()) },
                    });
                }
            }
        }
    }
    let out = routing::route_auto(cluster, responses, &cfg.sim)?;
    trace.append(out.trace);
    let mut assignment: BTreeMap<Vertex, Vec<(u64, Pay)>> = BTreeMap::new();
    let mut seen: BTreeSet<u64> = BTreeSet::new();
    for (v, arrived) in out.delivered {
        for (_, pay) in arrived {
            if let Pay::Item { id, inner } = pay {
                seen.insert(id);
                assignment.entry(v).or_default().push((id, *inner));
            }
        }
    }
    if seen.len() != items.len() {
        return Err(BuildError::Contract(format!(
            "{} of {} items were never pulled",
            items.len() - seen.len(),
            items.len()
        )));
    }
    // per-subject exactness: count <= 2 * ceil(M * deg / m); only V_hd
    let v_hd = cluster.v_hd();
    for (&v, got) in &assignment {
        let bound = 2 * ceil_div(m_cap * cluster.deg_c(v) as u64, m_total);
        if got.len() as u64 > bound {
            return Err(BuildError::Contract(format!(
                "vertex {v} holds {} items, above 2*ceil(M*deg/m) = {bound}",
                got.len()
            )));
        }
        if !got.is_empty() && !v_hd.contains(&v) {
            return Err(BuildError::Contract(format!(
                "below-half-average vertex {v} was assigned items"
            )));
        }
    }
    Ok((assignment, trace))
}

pub struct K3TreeBuild {
    pub tree: PartitionTree,
    /// V_hd vertex -> assigned leaf parts.
    pub leaf_assignment: BTreeMap<Vertex, Vec<(Path, u16)>>,
    pub trace: RoundTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Distributed,
    /// Single-machine differential reference: identical layer logic run
    /// through the sequential executor.
    Sequential,
}

/// The graph the clique tree is built over: cluster edges among V_list.
pub fn vlist_graph(cluster: &CommunicationCluster) -> Graph {
    let mut g = Graph::new(cluster.n_global);
    for (&v, nbrs) in &cluster.adj {
        if !cluster.v_list.contains(&v) {
            continue;
        }
        for &u in nbrs {
            if u > v && cluster.v_list.contains(&u) {
                g.add_edge(v, u).unwrap();
            }
        }
    }
    g
}

/// Build the 3-layer clique partition tree of C[V_list]: one streamed
/// layer per level, amplifier broadcasts after layers 1 and 2, and the
/// degree-balanced leaf distribution after layer 3.
pub fn build_k3_tree(
    cluster: &CommunicationCluster,
    cons: &K3Constraints,
    cfg: &BuildCfg,
    mode: ExecMode,
) -> Result<K3TreeBuild, BuildError> {
    let expected_delta = (cluster.big_k() as f64).powf(1.0 / 3.0).ceil() as u64;
    if cluster.delta < expected_delta {
        return Err(BuildError::Contract(format!(
            "cluster delta {} below the K^(1/3) threshold {expected_delta}",
            cluster.delta
        )));
    }
    let ranks = cluster.vlist_ranked();
    let k = ranks.len();
    if k == 0 {
        return Err(BuildError::Contract("tree over an empty V_list".into()));
    }
    let g1 = vlist_graph(cluster);
    let m = g1.m() as u64;
    let x = (k as f64).powf(1.0 / 3.0).ceil().max(1.0) as usize;
    let lambda = x.min(k);
    let field_bits = Wire::new(cluster.n_global, 8).count_bits();
    let mut trace = RoundTrace::default();
    let mut nodes: BTreeMap<Path, Vec<Interval>> = BTreeMap::new();
    let mut frontier: Vec<Path> = vec![vec![]];

    let mut leaf_writers: Vec<(Path, u64, Vertex, Interval)> = Vec::new();
    for depth in 0..3usize {
        let mut inputs: Vec<AlgoInput> = Vec::new();
        let mut streams: Vec<TokenStream> = Vec::new();
        for path in &frontier {
            let anc: Vec<Interval> =
                (0..path.len()).map(|t| nodes[&path[..t].to_vec()][path[t] as usize]).collect();
            let stream = k3_layer_stream(&ranks, &g1, &anc);
            let algo = K3LayerAlgo::new(k as u64, m, 3, depth as u64, cons, field_bits);
            let slices: BTreeMap<Vertex, AlgoSlice> = ranks
                .iter()
                .zip(&stream.mains)
                .map(|(&v, t)| (v, AlgoSlice::mains_only(vec![t.clone()])))
                .collect();
            streams.push(stream);
            inputs.push(AlgoInput { algo: Box::new(algo), slices });
        }
        let (parts_per_node, writers) = run_layer(cluster, inputs, &streams, 1, lambda, cfg, mode, &mut trace)?;
        for (j, path) in frontier.iter().enumerate() {
            let parts: Vec<Interval> = parts_per_node[j]
                .iter()
                .map(|t| Interval { lo: t[0] as Vertex, hi: t[1] as Vertex })
                .collect();
            if parts.len() > x {
                return Err(BuildError::Contract(format!(
                    "node {path:?} got {} parts, branching bound {x}",
                    parts.len()
                )));
            }
            nodes.insert(path.clone(), parts);
        }
        if depth < 2 {
            if mode == ExecMode::Distributed {
                let mut items: Vec<(Vertex, Pay)> = Vec::new();
                for (j, path) in frontier.iter().enumerate() {
                    for (writer, seq, t) in &writers[j] {
                        items.push((
                            *writer,
                            Pay::Part {
                                path: path.clone(),
                                j: *seq as u16,
                                lo: t[0] as Vertex,
                                hi: t[1] as Vertex,
                            },
                        ));
                    }
                }
                let (_, _, t) = amplify_broadcast(cluster, items, cfg)?;
                trace.append(t);
            }
            let mut next = Vec::new();
            for path in &frontier {
                for j in 0..nodes[path].len() as u16 {
                    let mut p = path.clone();
                    p.push(j);
                    next.push(p);
                }
            }
            frontier = next;
        } else {
            for (j, path) in frontier.iter().enumerate() {
                for (writer, seq, t) in &writers[j] {
                    leaf_writers.push((
                        path.clone(),
                        *seq,
                        *writer,
                        Interval { lo: t[0] as Vertex, hi: t[1] as Vertex },
                    ));
                }
            }
        }
    }

    let tree = PartitionTree {
        kind: TreeKind::Clique { universe: ranks.clone() },
        p: 3,
        a_bound: x,
        b_bound: x,
        nodes,
    };

    // leaf distribution: number leaves inside per-node slots of width x+1
    let mut leaf_assignment: BTreeMap<Vertex, Vec<(Path, u16)>> = BTreeMap::new();
    if mode == ExecMode::Distributed {
        let mut leaf_nodes: Vec<Path> = frontier.clone();
        leaf_nodes.sort();
        let node_index: BTreeMap<Path, u64> =
            leaf_nodes.iter().enumerate().map(|(i, p)| (p.clone(), i as u64)).collect();
        let m_cap = leaf_nodes.len() as u64 * (x as u64 + 1);
        let mut items: Vec<(Vertex, u64, Pay)> = Vec::new();
        for (path, seq, writer, iv) in leaf_writers {
            let id = node_index[&path] * (x as u64 + 1) + seq + 1;
            items.push((
                writer,
                id,
                Pay::Part { path: path.clone(), j: seq as u16, lo: iv.lo, hi: iv.hi },
            ));
        }
        let (assignment, t) = degree_balanced_distribute(cluster, items, m_cap, cfg)?;
        trace.append(t);
        for (v, got) in assignment {
            for (_, pay) in got {
                if let Pay::Part { path, j, .. } = pay {
                    leaf_assignment.entry(v).or_default().push((path, j));
                }
            }
        }
        // every leaf part must be assigned somewhere
        let assigned: BTreeSet<(Path, u16)> =
            leaf_assignment.values().flatten().cloned().collect();
        for lp in tree.leaf_parts() {
            if !assigned.contains(&lp) {
                return Err(BuildError::Contract(format!("leaf {lp:?} assigned to nobody")));
            }
        }
    } else {
        // sequential reference: deterministic round-robin over V_hd
        let v_hd: Vec<Vertex> = cluster.v_hd().into_iter().collect();
        for (i, lp) in tree.leaf_parts().into_iter().enumerate() {
            leaf_assignment.entry(v_hd[i % v_hd.len()]).or_default().push(lp);
        }
    }
    Ok(K3TreeBuild { tree, leaf_assignment, trace })
}

type LayerParts = Vec<Vec<Token>>;
type LayerWriters = Vec<Vec<(Vertex, u64, Token)>>;

#[allow(clippy::too_many_arguments)]
fn run_layer(
    cluster: &CommunicationCluster,
    inputs: Vec<AlgoInput>,
    streams: &[TokenStream],
    t_max: usize,
    lambda: usize,
    cfg: &BuildCfg,
    mode: ExecMode,
    trace: &mut RoundTrace,
) -> Result<(LayerParts, LayerWriters), BuildError> {
    match mode {
        ExecMode::Sequential => {
            let mut parts = Vec::new();
            for (inp, stream) in inputs.iter().zip(streams) {
                let (out, _) = run_sequential(inp.algo.as_ref(), stream)
                    .map_err(|v| BuildError::Dist(DistError::Budget { algo: 0, violation: v }))?;
                parts.push(out);
            }
            let writers = parts
                .iter()
                .map(|toks| {
                    toks.iter()
                        .enumerate()
                        .map(|(s, t)| (cluster.vlist_ranked()[0], s as u64, t.clone()))
                        .collect()
                })
                .collect();
            Ok((parts, writers))
        }
        ExecMode::Distributed => {
            let sic = StreamingInputCluster::new(cluster, inputs, t_max)?;
            let dist = simulate_in_cluster(&sic, lambda, &cfg.sim, cfg.slack)?;
            trace.append(dist.trace);
            let mut writers: LayerWriters = Vec::new();
            for per_vertex in &dist.outputs {
                let mut w: Vec<(Vertex, u64, Token)> = Vec::new();
                for (&v, toks) in per_vertex {
                    for (seq, t) in toks {
                        w.push((v, *seq, t.clone()));
                    }
                }
                w.sort_by_key(|(_, seq, _)| *seq);
                writers.push(w);
            }
            Ok((dist.merged, writers))
        }
    }
}

/// Greedy sentdeg-weighted cut of 1..n into k ownership intervals, one per
/// V_list rank, quotas proportional to communication degree. A pure
/// function of broadcast-known data, so every vertex derives it alone.
pub fn edge_chain(cluster: &CommunicationCluster) -> Vec<Interval> {
    let ranks = cluster.vlist_ranked();
    let k = ranks.len();
    let n = cluster.n_global as Vertex;
    let mut sentdeg: BTreeMap<Vertex, u64> = BTreeMap::new();
    for (t, _) in cluster.imports.ebar.iter().chain(cluster.imports.eprime.iter()) {
        *sentdeg.entry(*t).or_default() += 1;
    }
    let total: u64 = sentdeg.values().sum();
    let weight_total: u64 = cluster.comm_deg_sum().max(1);
    let mut quotas: Vec<u64> = Vec::with_capacity(k);
    let mut wsum = 0u64;
    for &v in &ranks {
        wsum += cluster.deg_c(v) as u64;
        quotas.push(ceil_div(total * wsum, weight_total).min(total));
    }
    let mut out = Vec::with_capacity(k);
    let mut u: Vertex = 1;
    let mut cum = 0u64;
    for (i, &q) in quotas.iter().enumerate() {
        if i + 1 == k {
            out.push(Interval { lo: u, hi: n });
            break;
        }
        let lo = u;
        while u <= n && cum < q {
            cum += sentdeg.get(&u).copied().unwrap_or(0);
            u += 1;
        }
        out.push(Interval { lo, hi: u.wrapping_sub(1) });
    }
    out
}

pub struct SplitTreeBuild {
    pub tree: PartitionTree,
    pub split: SplitGraph,
    pub chain: Vec<Interval>,
    pub trace: RoundTrace,
}

/// Build the (p', p)-split tree of a cluster carrying imported input.
/// First rearranges the imports onto the ownership chain (broadcasting the
/// input degrees, then re-routing every directed copy to its tail owner),
/// then streams one layer per level with a broadcast after each.
pub fn build_split_tree(
    cluster: &CommunicationCluster,
    p: usize,
    p_prime: usize,
    cons: &SplitConstraints,
    cfg: &BuildCfg,
    mode: ExecMode,
) -> Result<SplitTreeBuild, BuildError> {
    assert!(p >= 2 && p_prime >= 2 && p_prime <= p);
    let pi = p - p_prime;
    let ranks = cluster.vlist_ranked();
    let k = ranks.len();
    if k == 0 {
        return Err(BuildError::Contract("split tree over an empty V_list".into()));
    }
    let mut trace = RoundTrace::default();

    // rearrangement: broadcast input degrees, re-route copies to owners
    let chain = edge_chain(cluster);
    if mode == ExecMode::Distributed {
        let sent_items: Vec<(Vertex, Pay)> = cluster
            .imports
            .sentdeg
            .iter()
            .map(|(&tail, &(holder, deg))| (holder, Pay::Count(tail, deg)))
            .collect();
        let (_, t) = broadcast_n_messages(cluster, sent_items, cfg)?;
        trace.append(t);
        let owner_of = |tail: Vertex| -> Vertex {
            let i = chain.iter().position(|iv| iv.contains(tail)).expect("chain covers 1..n");
            ranks[i]
        };
        let mut reroute: Vec<Demand> = Vec::new();
        for &(t0, h0) in &cluster.imports.eprime {
            let holder = cluster.imports.eprime_holder.get(&(t0, h0)).copied().unwrap_or_else(|| owner_of(t0));
            reroute.push(Demand { src: holder, dst: owner_of(t0), pay: Pay::Edge(t0, h0) });
        }
        for &(t0, h0) in &cluster.imports.ebar {
            // the V_list head knows the edge natively
            reroute.push(Demand { src: h0, dst: owner_of(t0), pay: Pay::Edge(t0, h0) });
        }
        let out = routing::route_auto(cluster, reroute, &cfg.sim)?;
        trace.append(out.trace);
        // per-owner volume within the Õ(n^(1-2/p) * deg) contract
        let thresh = (cluster.n_global as f64).powf(1.0 - 2.0 / p as f64);
        for (&v, arrived) in &out.delivered {
            let load = arrived.len() as f64;
            let cap = cfg.slack * thresh * cluster.deg_c(v) as f64 * log2n(cluster.n_global).powi(2)
                + sentdeg_max(cluster) as f64;
            if load > cap {
                return Err(BuildError::Contract(format!(
                    "owner {v} received {load} imported copies, above the input-degree bound {cap:.0}"
                )));
            }
        }
    }

    // the split graph the constraints are recounted against
    let v1: BTreeSet<Vertex> = cluster.v_list.clone();
    let v2: BTreeSet<Vertex> = (1..=cluster.n_global as Vertex).filter(|v| !v1.contains(v)).collect();
    let e1: BTreeSet<(Vertex, Vertex)> = vlist_graph(cluster).edges().into_iter().collect();
    let e2: BTreeSet<(Vertex, Vertex)> = cluster
        .imports
        .eprime
        .iter()
        .map(|&(t, h)| crate::graph::norm_edge(t, h))
        .collect();
    let e12: BTreeSet<(Vertex, Vertex)> = cluster
        .imports
        .ebar
        .iter()
        .map(|&(t, h)| crate::graph::norm_edge(t, h))
        .collect();
    let sg = SplitGraph::new(v1.clone(), v2.clone(), e1, e2, e12)
        .map_err(|e| BuildError::Contract(e.to_string()))?;

    let a = (k as f64).powf(1.0 / p as f64).ceil().max(1.0) as usize;
    let b = a;
    let counts = (sg.n() as u64, sg.k() as u64, sg.m1() as u64, sg.m2() as u64, sg.m12() as u64);
    let field_bits = Wire::new(cluster.n_global, 8).count_bits();
    let v1_span = (*v1.iter().next().unwrap() as u64, *v1.iter().last().unwrap() as u64);
    let v2_span = if v2.is_empty() {
        (1u64, 0u64)
    } else {
        (*v2.iter().next().unwrap() as u64, *v2.iter().last().unwrap() as u64)
    };
    let v1_sigma: Vec<Interval> = ranks.iter().map(|&v| Interval { lo: v, hi: v }).collect();

    let mut nodes: BTreeMap<Path, Vec<Interval>> = BTreeMap::new();
    let mut frontier: Vec<Path> = vec![vec![]];
    for depth in 0..p {
        let side1 = depth >= pi;
        let sigma = if side1 { &v1_sigma } else { &chain };
        let w_span = if side1 { v1_span } else { v2_span };
        let branching = if side1 { a } else { b };
        let mut inputs = Vec::new();
        let mut streams = Vec::new();
        for path in &frontier {
            let anc: Vec<(usize, Interval)> =
                (0..path.len()).map(|t| (t, nodes[&path[..t].to_vec()][path[t] as usize])).collect();
            let stream = split_layer_stream(&sg, sigma, side1, &anc, pi);
            let algo = SplitLayerAlgo::new(
                counts,
                a as u64,
                b as u64,
                pi,
                depth,
                cons,
                w_span,
                k as u64,
                field_bits,
            );
            let slices: BTreeMap<Vertex, AlgoSlice> = ranks
                .iter()
                .enumerate()
                .map(|(l, &v)| {
                    (
                        v,
                        AlgoSlice {
                            mains: vec![stream.mains[l].clone()],
                            auxes: vec![stream.auxes[l].clone()],
                        },
                    )
                })
                .collect();
            streams.push(stream);
            inputs.push(AlgoInput { algo: Box::new(algo), slices });
        }
        let (parts_per_node, writers) = run_layer(cluster, inputs, &streams, 1, 1, cfg, mode, &mut trace)?;
        if mode == ExecMode::Distributed {
            let mut items: Vec<(Vertex, Pay)> = Vec::new();
            for (j, path) in frontier.iter().enumerate() {
                for (writer, seq, t) in &writers[j] {
                    items.push((
                        *writer,
                        Pay::Part { path: path.clone(), j: *seq as u16, lo: t[0] as Vertex, hi: t[1] as Vertex },
                    ));
                }
            }
            let (_, t) = broadcast_n_messages(cluster, items, cfg)?;
            trace.append(t);
        }
        for (j, path) in frontier.iter().enumerate() {
            let parts: Vec<Interval> = parts_per_node[j]
                .iter()
                .map(|t| Interval { lo: t[0] as Vertex, hi: t[1] as Vertex })
                .collect();
            if parts.len() > branching {
                return Err(BuildError::Contract(format!(
                    "split node {path:?} got {} parts, bound {branching}",
                    parts.len()
                )));
            }
            nodes.insert(path.clone(), parts);
        }
        if depth + 1 < p {
            let mut next = Vec::new();
            for path in &frontier {
                for j in 0..nodes[path].len() as u16 {
                    let mut q = path.clone();
                    q.push(j);
                    next.push(q);
                }
            }
            frontier = next;
        }
    }

    let tree = PartitionTree {
        kind: TreeKind::Split {
            pi,
            v1: v1.iter().copied().collect(),
            v2: v2.iter().copied().collect(),
        },
        p,
        a_bound: a,
        b_bound: b,
        nodes,
    };
    let report = super::verify_split_tree(&tree, &sg, cons);
    if !report.pass {
        return Err(BuildError::Verify(report.violations));
    }
    Ok(SplitTreeBuild { tree, split: sg, chain, trace })
}

fn sentdeg_max(cluster: &CommunicationCluster) -> u64 {
    let mut sentdeg: BTreeMap<Vertex, u64> = BTreeMap::new();
    for (t, _) in cluster.imports.ebar.iter().chain(cluster.imports.eprime.iter()) {
        *sentdeg.entry(*t).or_default() += 1;
    }
    sentdeg.values().copied().max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expander::{standalone_cluster, DeltaRule, ImportedInput};
    use crate::gen;
    use crate::ptree::{covering_leaf, verify_clique_tree, verify_split_tree};

    fn k3_cluster(g: &Graph) -> CommunicationCluster {
        standalone_cluster(g, DeltaRule::K3, g.n())
    }

    #[test]
    fn amplify_single_item_reaches_all_of_k8() {
        let c = k3_cluster(&gen::complete(8));
        let holder = c.vlist_ranked()[3];
        let (items, recv, trace) =
            amplify_broadcast(&c, vec![(holder, Pay::Id(42))], &BuildCfg::default()).unwrap();
        assert_eq!(items.len(), 1);
        assert!(trace.total_messages() > 0);
        for v in c.vlist_ranked() {
            assert_eq!(recv.get(&v).copied(), Some(1));
        }
    }

    #[test]
    fn amplify_no_items_is_a_no_op() {
        let c = k3_cluster(&gen::complete(4));
        let (items, _, trace) = amplify_broadcast(&c, vec![], &BuildCfg::default()).unwrap();
        assert!(items.is_empty());
        assert_eq!(trace.total_messages(), 0);
    }

    #[test]
    fn amplify_nine_items_over_k27() {
        let c = k3_cluster(&gen::complete(27));
        let ranks = c.vlist_ranked();
        let items: Vec<(Vertex, Pay)> =
            (0..9).map(|i| (ranks[i], Pay::Count(ranks[i], i as u64))).collect();
        let (all, recv, _) = amplify_broadcast(&c, items, &BuildCfg::default()).unwrap();
        assert_eq!(all.len(), 9);
        for v in &ranks {
            // every vertex receives each item exactly once in phase 2
            assert_eq!(recv[v], 9);
        }
    }

    #[test]
    fn broadcast_gather_and_double() {
        let c = k3_cluster(&gen::complete(4));
        let ranks = c.vlist_ranked();
        let items: Vec<(Vertex, Pay)> =
            (0..3).map(|i| (ranks[i], Pay::Id(ranks[i]))).collect();
        let (all, trace) = broadcast_n_messages(&c, items, &BuildCfg::default()).unwrap();
        assert_eq!(all.len(), 3);
        assert!(trace.total_messages() > 0);
    }

    #[test]
    fn broadcast_on_single_vertex_vlist_sends_nothing() {
        let c = k3_cluster(&gen::star(4));
        assert_eq!(c.k(), 1);
        let v = c.vlist_ranked()[0];
        let (all, trace) = broadcast_n_messages(&c, vec![(v, Pay::Id(v))], &BuildCfg::default()).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(trace.total_messages(), 0);
    }

    #[test]
    fn distribute_uniform_degrees_gives_two_slot_intervals() {
        let c = k3_cluster(&gen::complete(9));
        let ranks = c.vlist_ranked();
        let m_cap = 9u64;
        let items: Vec<(Vertex, u64, Pay)> = (1..=m_cap)
            .map(|id| (ranks[(id - 1) as usize], id, Pay::Count(id as Vertex, id)))
            .collect();
        let (assignment, _) =
            degree_balanced_distribute(&c, items, m_cap, &BuildCfg::default()).unwrap();
        let mut seen = 0u64;
        for (&v, got) in &assignment {
            let bound = 2 * ceil_div(m_cap * c.deg_c(v) as u64, c.comm_deg_sum());
            assert_eq!(bound, 2);
            assert!(got.len() as u64 <= bound);
            seen += got.len() as u64;
        }
        assert_eq!(seen, m_cap);
    }

    #[test]
    fn distribute_skips_below_average_vertex() {
        // K9 core plus vertex 10 attached by three edges: it clears the
        // delta threshold but sits below half the average degree
        let mut edges = gen::complete(9).edges();
        edges.extend([(1, 10), (2, 10), (3, 10)]);
        let g = Graph::from_edges(10, &edges).unwrap();
        let c = standalone_cluster(&g, DeltaRule::K3, 10);
        assert!(c.v_list.contains(&10));
        let sum = c.comm_deg_sum();
        assert!(2 * c.deg_c(10) as u64 * c.k() as u64 > sum || c.deg_c(10) == 3);
        let ranks = c.vlist_ranked();
        let items: Vec<(Vertex, u64, Pay)> =
            (1..=5u64).map(|id| (ranks[0], id, Pay::Count(id as Vertex, id))).collect();
        let (assignment, _) =
            degree_balanced_distribute(&c, items, 5, &BuildCfg::default()).unwrap();
        // vertex 10 has degree 1 < mu/2: must receive nothing
        assert!(assignment.get(&10).map_or(true, |v| v.is_empty()));
        let got: u64 = assignment.values().map(|v| v.len() as u64).sum();
        assert_eq!(got, 5);
    }

    #[test]
    fn distribute_zero_items() {
        let c = k3_cluster(&gen::complete(5));
        let (assignment, _) =
            degree_balanced_distribute(&c, vec![], 0, &BuildCfg::default()).unwrap();
        assert!(assignment.is_empty());
    }

    #[test]
    fn k3_tree_on_k27_verifies_and_covers() {
        let g = gen::complete(27);
        let c = k3_cluster(&g);
        assert_eq!(c.k(), 27);
        let build = build_k3_tree(&c, &K3Constraints::default(), &BuildCfg::default(), ExecMode::Distributed)
            .unwrap();
        let g1 = vlist_graph(&c);
        for (_, parts) in &build.tree.nodes {
            assert!(parts.len() <= 3);
        }
        let rep = verify_clique_tree(&build.tree, &g1, &K3Constraints::default());
        assert!(rep.pass, "{:?}", rep.violations);
        // coverage tripwire over the full oracle
        let oracle = g1.brute_force_cliques(3);
        assert_eq!(oracle.len(), 2925);
        for t in &oracle {
            covering_leaf(&build.tree, t).unwrap();
        }
        // leaf distribution postconditions
        let v_hd = c.v_hd();
        for (v, leaves) in &build.leaf_assignment {
            assert!(v_hd.contains(v));
            assert!(!leaves.is_empty());
        }
    }

    #[test]
    fn k3_tree_distributed_equals_sequential() {
        for (g, label) in [
            (gen::complete(27), "k27"),
            (gen::gnp(24, 0.7, 3), "gnp24"),
        ] {
            let c = k3_cluster(&g);
            if c.k() == 0 {
                continue;
            }
            let a = build_k3_tree(&c, &K3Constraints::default(), &BuildCfg::default(), ExecMode::Distributed)
                .unwrap();
            let b = build_k3_tree(&c, &K3Constraints::default(), &BuildCfg::default(), ExecMode::Sequential)
                .unwrap();
            assert_eq!(a.tree.nodes, b.tree.nodes, "differential mismatch on {label}");
        }
    }

    #[test]
    fn k3_tree_on_single_vertex_vlist() {
        let c = k3_cluster(&gen::star(4));
        assert_eq!(c.k(), 1);
        let build = build_k3_tree(&c, &K3Constraints::default(), &BuildCfg::default(), ExecMode::Distributed)
            .unwrap();
        for (_, parts) in &build.tree.nodes {
            assert_eq!(parts.len(), 1);
            assert_eq!(build.tree.members(0, &parts[0]), vec![1]);
        }
    }

    #[test]
    fn edge_chain_covers_all_ids_in_order() {
        let g = gen::complete(6);
        let mut c = standalone_cluster(&g, DeltaRule::K3, 10);
        c.imports = ImportedInput::default();
        for t in [7u32, 8, 9] {
            c.imports.ebar.insert((t, 1));
            c.imports.ebar.insert((t, 2));
        }
        let chain = edge_chain(&c);
        assert_eq!(chain.len(), c.k());
        let mut next = 1u32;
        for iv in &chain {
            assert_eq!(iv.lo, next);
            if !iv.is_empty() {
                next = iv.hi + 1;
            }
        }
        assert_eq!(chain.last().unwrap().hi, 10);
    }

    fn cross_gadget() -> CommunicationCluster {
        // V_list = {1,2} joined by an edge; outside pair {3,4} with the
        // crossing edges imported as ebar and (3,4) as eprime
        let g = Graph::from_edges(4, &[(1, 2)]).unwrap();
        let mut c = standalone_cluster(&g, DeltaRule::K3, 4);
        c.delta = 1;
        c.v_list = [1, 2].into_iter().collect();
        c.imports.ebar =
            [(3, 1), (3, 2), (4, 1), (4, 2)].into_iter().collect();
        c.imports.eprime = [(3, 4), (4, 3)].into_iter().collect();
        c.imports.eprime_holder = [((3, 4), 1), ((4, 3), 2)].into_iter().collect();
        c.imports.sentdeg = [(3, (1, 3)), (4, (1, 3))].into_iter().collect();
        c
    }

    #[test]
    fn split_tree_on_cross_gadget() {
        let c = cross_gadget();
        let build = build_split_tree(&c, 4, 2, &SplitConstraints::default(), &BuildCfg::default(), ExecMode::Distributed)
            .unwrap();
        let rep = verify_split_tree(&build.tree, &build.split, &SplitConstraints::default());
        assert!(rep.pass, "{:?}", rep.violations);
        // the cross clique 1-2-3-4 with two inner vertices is covered
        let (path, j) = covering_leaf(&build.tree, &[1, 2, 3, 4]).unwrap();
        assert_eq!(build.tree.anc_parts(&path, j).len(), 4);
    }

    #[test]
    fn split_tree_distributed_equals_sequential() {
        let c = cross_gadget();
        let a = build_split_tree(&c, 4, 2, &SplitConstraints::default(), &BuildCfg::default(), ExecMode::Distributed)
            .unwrap();
        let b = build_split_tree(&c, 4, 2, &SplitConstraints::default(), &BuildCfg::default(), ExecMode::Sequential)
            .unwrap();
        assert_eq!(a.tree.nodes, b.tree.nodes);
    }

    #[test]
    fn split_tree_degenerates_cleanly_without_imports() {
        let c = k3_cluster(&gen::complete(12));
        for p_prime in 2..=4usize {
            let build = build_split_tree(&c, 4, p_prime, &SplitConstraints::default(), &BuildCfg::default(), ExecMode::Distributed)
                .unwrap();
            let rep = verify_split_tree(&build.tree, &build.split, &SplitConstraints::default());
            assert!(rep.pass, "p'={p_prime}: {:?}", rep.violations);
        }
    }
}

#[cfg(test)]
mod mass_tests {
    use super::*;
    use crate::expander::{standalone_cluster, DeltaRule};
    use crate::gen;

    #[test]
    fn v_hd_carries_at_least_half_the_volume() {
        for seed in 1..6u64 {
            let g = gen::gnp(20, 0.6, seed);
            if g.components().len() != 1 {
                continue;
            }
            let c = standalone_cluster(&g, DeltaRule::K3, 20);
            let hd: u64 = c.v_hd().iter().map(|&v| c.deg_c(v) as u64).sum();
            assert!(2 * hd >= c.comm_deg_sum());
        }
    }
}
