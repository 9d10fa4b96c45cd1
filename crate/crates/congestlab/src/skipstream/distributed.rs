//! Distributed execution of skip-stream algorithms on a communication
//! cluster. Phase 0 assigns disjoint simulator chains locally; Phase 1
//! routes every main token to its chain member; Phase 2 walks the state
//! through the chain, shipping it to the origin vertex whenever an AUX
//! expansion is needed, in q+1 barrier steps so a vertex answers at most
//! one AUX request per algorithm per step. The concatenated distributed
//! output must equal the sequential run bit for bit.

use super::{BudgetViolation, Shell, SkipAlgo, Token, TokenStream, UsageStats, VertexChain};
use crate::expander::CommunicationCluster;
use crate::graph::Vertex;
use crate::routing::{self, Demand, RouteError};
use crate::sim::{Pay, RoundTrace, SimConfig};
use std::collections::{BTreeMap, VecDeque};
use std::fmt;

/// A vertex's contiguous share of one algorithm's stream, with the
/// auxiliary runs co-located next to their main tokens.
#[derive(Debug, Clone, Default)]
pub struct AlgoSlice {
    pub mains: Vec<Token>,
    pub auxes: Vec<Vec<Token>>,
}

impl AlgoSlice {
    pub fn mains_only(mains: Vec<Token>) -> AlgoSlice {
        let auxes = vec![Vec::new(); mains.len()];
        AlgoSlice { mains, auxes }
    }
}

pub struct AlgoInput {
    pub algo: Box<dyn SkipAlgo>,
    pub slices: BTreeMap<Vertex, AlgoSlice>,
}

pub struct StreamingInputCluster<'a> {
    pub cluster: &'a CommunicationCluster,
    pub algos: Vec<AlgoInput>,
    pub t_max: usize,
}

#[derive(Debug)]
pub enum DistError {
    Precondition(String),
    Budget { algo: usize, violation: BudgetViolation },
    Route(RouteError),
    Traffic(String),
}

impl fmt::Display for DistError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistError::Precondition(s) => write!(f, "precondition: {s}"),
            DistError::Budget { algo, violation } => {
                write!(f, "algorithm {algo}: {violation}")
            }
            DistError::Route(e) => write!(f, "routing: {e}"),
            DistError::Traffic(s) => write!(f, "traffic bound breached: {s}"),
        }
    }
}

impl std::error::Error for DistError {}

impl From<RouteError> for DistError {
    fn from(e: RouteError) -> Self {
        DistError::Route(e)
    }
}

impl<'a> StreamingInputCluster<'a> {
    pub fn new(
        cluster: &'a CommunicationCluster,
        algos: Vec<AlgoInput>,
        t_max: usize,
    ) -> Result<Self, DistError> {
        for (j, a) in algos.iter().enumerate() {
            let mut total = 0u64;
            for (&v, slice) in &a.slices {
                if !cluster.v_list.contains(&v) {
                    return Err(DistError::Precondition(format!(
                        "algorithm {j}: slice holder {v} not in V_list"
                    )));
                }
                if slice.mains.len() > t_max {
                    return Err(DistError::Precondition(format!(
                        "algorithm {j}: vertex {v} holds {} mains > T_max = {t_max}",
                        slice.mains.len()
                    )));
                }
                if slice.mains.len() != slice.auxes.len() {
                    return Err(DistError::Precondition(format!(
                        "algorithm {j}: vertex {v} has mismatched aux runs"
                    )));
                }
                total += slice.mains.len() as u64;
            }
            if total != a.algo.params().n_in {
                return Err(DistError::Precondition(format!(
                    "algorithm {j}: slices hold {total} mains, N_in = {}",
                    a.algo.params().n_in
                )));
            }
        }
        Ok(StreamingInputCluster { cluster, algos, t_max })
    }

    /// Concatenation of the per-vertex slices in V_list id order: the
    /// stream the sequential executor sees.
    pub fn assembled_stream(&self, j: usize) -> TokenStream {
        let mut mains = Vec::new();
        let mut auxes = Vec::new();
        for v in &self.cluster.v_list {
            if let Some(slice) = self.algos[j].slices.get(v) {
                mains.extend(slice.mains.iter().cloned());
                auxes.extend(slice.auxes.iter().cloned());
            }
        }
        TokenStream::new(mains, auxes)
    }
}

#[derive(Debug, Clone, Default)]
pub struct DistStats {
    pub handoffs: u64,
    pub aux_roundtrips: u64,
    pub phase1_max_sent: u64,
    pub phase1_max_recv: u64,
    pub max_step_aux_per_holder: u64,
    pub max_outputs_per_vertex: u64,
}

pub struct DistOutcome {
    /// Per algorithm: (write sequence, token) at the vertex holding it.
    pub outputs: Vec<BTreeMap<Vertex, Vec<(u64, Token)>>>,
    /// Per algorithm: outputs merged in write order.
    pub merged: Vec<Vec<Token>>,
    pub usage: Vec<UsageStats>,
    pub stats: Vec<DistStats>,
    pub trace: RoundTrace,
}

enum MemberEvent {
    Done,
    Handoff,
    NeedAux { holder: Vertex, idx: u32 },
}

fn member_loop(
    algo: &dyn SkipAlgo,
    shell: &mut Shell,
    tokens: &[(Vertex, u32, Token)],
    cursor: &mut usize,
    sink: &mut Vec<(u64, Token)>,
) -> Result<MemberEvent, BudgetViolation> {
    let p = algo.params().clone();
    let mut feed: Option<Token> = None;
    loop {
        if shell.halted {
            return Ok(MemberEvent::Done);
        }
        if shell.awaiting_read {
            if *cursor < tokens.len() {
                let (origin, idx, t) = &tokens[*cursor];
                *cursor += 1;
                shell.on_main_read(&p, t, Some((*origin, *idx)))?;
                shell.awaiting_read = false;
                feed = Some(t.clone());
            } else {
                return Ok(MemberEvent::Handoff);
            }
        }
        let op = algo.step(&mut shell.machine, feed.take().as_ref());
        shell.after_step(&p)?;
        match op {
            super::Op::Read => shell.awaiting_read = true,
            super::Op::Aux => {
                shell.on_aux_op(&p)?;
                let (holder, idx) = shell.last_main.expect("aux after a main read");
                return Ok(MemberEvent::NeedAux { holder, idx });
            }
            super::Op::Write(t) => {
                shell.on_write(&p, &t)?;
                sink.push((shell.write_seq - 1, t));
            }
            super::Op::Halt => {
                shell.max_window = shell.max_window.max(shell.window_writes);
                shell.halted = true;
                return Ok(MemberEvent::Done);
            }
        }
    }
}

/// Runs at the origin vertex of the expanded main token: feed the local
/// auxiliary run until the machine asks for the next main, keeping any
/// outputs written here.
fn holder_loop(
    algo: &dyn SkipAlgo,
    shell: &mut Shell,
    aux_run: &[Token],
    sink: &mut Vec<(u64, Token)>,
) -> Result<bool, BudgetViolation> {
    let p = algo.params().clone();
    let mut pending: VecDeque<Token> = aux_run.iter().cloned().collect();
    let mut feed: Option<Token> = None;
    loop {
        if shell.halted {
            return Ok(true);
        }
        if shell.awaiting_read {
            if let Some(t) = pending.pop_front() {
                shell.on_aux_read(&p, &t)?;
                shell.awaiting_read = false;
                feed = Some(t);
            } else {
                return Ok(false); // next read is the next main token
            }
        }
        let op = algo.step(&mut shell.machine, feed.take().as_ref());
        shell.after_step(&p)?;
        match op {
            super::Op::Read => shell.awaiting_read = true,
            super::Op::Aux => {
                shell.on_aux_op(&p)?;
                for t in aux_run.iter().rev() {
                    pending.push_front(t.clone());
                }
            }
            super::Op::Write(t) => {
                shell.on_write(&p, &t)?;
                sink.push((shell.write_seq - 1, t));
            }
            super::Op::Halt => {
                shell.max_window = shell.max_window.max(shell.window_writes);
                shell.halted = true;
                return Ok(true);
            }
        }
    }
}

enum Loc {
    Member(usize),
    AtHolder { holder: Vertex, member_idx: usize, main_idx: u32 },
    Done,
}

/// Simulate all algorithms of a streaming input cluster in parallel with
/// chains of `lambda` members each. When `lambda * zeta` exceeds k the
/// algorithms run in sequential batches so the chains stay disjoint.
pub fn simulate_in_cluster(
    sic: &StreamingInputCluster<'_>,
    lambda: usize,
    cfg: &SimConfig,
    slack: f64,
) -> Result<DistOutcome, DistError> {
    let cluster = sic.cluster;
    let k = cluster.k();
    if k == 0 {
        return Err(DistError::Precondition("cluster has an empty V_list".into()));
    }
    if lambda < 1 || lambda > k {
        return Err(DistError::Precondition(format!("lambda = {lambda} outside 1..={k}")));
    }
    let ranks: Vec<Vertex> = cluster.vlist_ranked();
    let beta = k.div_ceil(lambda);
    let batch_size = (k / lambda).max(1);
    let zeta_total = sic.algos.len();

    let mut outputs: Vec<BTreeMap<Vertex, Vec<(u64, Token)>>> =
        vec![BTreeMap::new(); zeta_total];
    let mut usage: Vec<UsageStats> = vec![UsageStats::default(); zeta_total];
    let mut stats: Vec<DistStats> = vec![DistStats::default(); zeta_total];
    let mut trace = RoundTrace::default();

    let all: Vec<usize> = (0..zeta_total).collect();
    for batch in all.chunks(batch_size) {
        run_batch(sic, batch, lambda, beta, &ranks, cfg, &mut outputs, &mut usage, &mut stats, &mut trace)?;
    }

    // output distribution: per-vertex holdings against the theorem bound
    for (j, per_vertex) in outputs.iter().enumerate() {
        let p = sic.algos[j].algo.params();
        let zeta_batch = batch_size.min(zeta_total) as u64;
        let exact_member_bound = p.y * (sic.t_max as u64 * beta as u64 + 1);
        for (&v, toks) in per_vertex {
            let count = toks.len() as u64;
            stats[j].max_outputs_per_vertex = stats[j].max_outputs_per_vertex.max(count);
            let theorem = if p.q == 0 {
                p.n_out.min(exact_member_bound)
            } else {
                ((zeta_batch * p.n_out).min(p.y * sic.t_max as u64 * beta as u64 + p.y) as f64
                    * slack) as u64
            };
            if p.q == 0 {
                if count > theorem {
                    return Err(DistError::Traffic(format!(
                        "algorithm {j}: vertex {v} holds {count} outputs, bound {theorem}"
                    )));
                }
            } else if count as f64 > (theorem as f64).max(1.0) * slack {
                return Err(DistError::Traffic(format!(
                    "algorithm {j}: vertex {v} holds {count} outputs, slack bound {theorem}"
                )));
            }
        }
    }

    let mut merged = Vec::with_capacity(zeta_total);
    for per_vertex in &outputs {
        let mut all: Vec<(u64, Token)> =
            per_vertex.values().flat_map(|v| v.iter().cloned()).collect();
        all.sort_by_key(|(seq, _)| *seq);
        for (i, (seq, _)) in all.iter().enumerate() {
            assert_eq!(*seq, i as u64, "write sequence must be dense");
        }
        merged.push(all.into_iter().map(|(_, t)| t).collect());
    }
    Ok(DistOutcome { outputs, merged, usage, stats, trace })
}

#[allow(clippy::too_many_arguments)]
fn run_batch(
    sic: &StreamingInputCluster<'_>,
    batch: &[usize],
    lambda: usize,
    beta: usize,
    ranks: &[Vertex],
    cfg: &SimConfig,
    outputs: &mut [BTreeMap<Vertex, Vec<(u64, Token)>>],
    usage: &mut [UsageStats],
    stats: &mut [DistStats],
    trace: &mut RoundTrace,
) -> Result<(), DistError> {
    let cluster = sic.cluster;
    let zeta_batch = batch.len();

    // Phase 0: disjoint simulator chains, a pure function of (V_list, j).
    let mut chains: BTreeMap<usize, VertexChain> = BTreeMap::new();
    for (jj, &j) in batch.iter().enumerate() {
        let pool = &ranks[jj * lambda..];
        let chain = VertexChain::new(ranks.to_vec(), beta, pool)
            .map_err(|e| DistError::Precondition(e.to_string()))?;
        chains.insert(j, chain);
    }

    // Phase 1: ship every main token to its chain member.
    let mut demands: Vec<Demand> = Vec::new();
    let mut sent_per_vertex: BTreeMap<Vertex, u64> = BTreeMap::new();
    for &j in batch {
        let chain = &chains[&j];
        for (&v, slice) in &sic.algos[j].slices {
            for (idx, t) in slice.mains.iter().enumerate() {
                let dst = chain.member_for(v);
                *sent_per_vertex.entry(v).or_default() += 1;
                demands.push(Demand {
                    src: v,
                    dst,
                    pay: Pay::Token { algo: j as u32, origin: v, idx: idx as u32, fields: t.clone() },
                });
            }
        }
    }
    for (&v, &count) in &sent_per_vertex {
        if count > zeta_batch as u64 * sic.t_max as u64 {
            return Err(DistError::Traffic(format!(
                "phase 1: vertex {v} sends {count} tokens > zeta*T_max = {}",
                zeta_batch * sic.t_max
            )));
        }
    }
    let out = routing::route_auto(cluster, demands, cfg)?;
    trace.append(out.trace);
    type MemberTokens = BTreeMap<(usize, usize), Vec<(Vertex, u32, Token)>>;
    let mut member_tokens: MemberTokens = BTreeMap::new();
    let mut recv_per_vertex: BTreeMap<Vertex, u64> = BTreeMap::new();
    for (&v, items) in &out.delivered {
        for (_, pay) in items {
            if let Pay::Token { algo, origin, idx, fields } = pay {
                let j = *algo as usize;
                *recv_per_vertex.entry(v).or_default() += 1;
                let chain = &chains[&j];
                let member_idx = chain
                    .members
                    .iter()
                    .position(|&m| m == v)
                    .expect("token delivered to a chain member");
                member_tokens
                    .entry((j, member_idx))
                    .or_default()
                    .push((*origin, *idx, fields.clone()));
            }
        }
    }
    for list in member_tokens.values_mut() {
        list.sort_by_key(|(origin, idx, _)| (*origin, *idx));
    }
    for (&v, &count) in &recv_per_vertex {
        if count > (beta * sic.t_max) as u64 {
            return Err(DistError::Traffic(format!(
                "phase 1: member {v} receives {count} tokens > (k/lambda)*T_max = {}",
                beta * sic.t_max
            )));
        }
    }
    for &j in batch {
        stats[j].phase1_max_sent = sent_per_vertex.values().copied().max().unwrap_or(0);
        stats[j].phase1_max_recv = recv_per_vertex.values().copied().max().unwrap_or(0);
    }

    // Phase 2: q+1 barrier steps.
    let q_max = batch.iter().map(|&j| sic.algos[j].algo.params().q).max().unwrap_or(0);
    let mut loc: BTreeMap<usize, Loc> = BTreeMap::new();
    let mut shells: BTreeMap<usize, Shell> = BTreeMap::new();
    let mut cursors: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &j in batch {
        shells.insert(j, Shell::new(sic.algos[j].algo.init_state()));
        loc.insert(j, Loc::Member(0));
    }

    let empty: Vec<(Vertex, u32, Token)> = Vec::new();
    for _step in 0..=q_max {
        // answer the AUX requests that arrived at the end of the last step
        let mut served_here: BTreeMap<(Vertex, usize), u64> = BTreeMap::new();
        let mut responses: Vec<Demand> = Vec::new();
        let mut response_dst: BTreeMap<usize, usize> = BTreeMap::new();
        for &j in batch {
            if let Loc::AtHolder { holder, member_idx, main_idx } = loc[&j] {
                let count = served_here.entry((holder, j)).or_default();
                *count += 1;
                stats[j].max_step_aux_per_holder = stats[j].max_step_aux_per_holder.max(*count);
                if *count > 1 {
                    return Err(DistError::Traffic(format!(
                        "vertex {holder} asked to serve two AUX requests for algorithm {j} in one step"
                    )));
                }
                let shell = shells.get_mut(&j).unwrap();
                let slice = &sic.algos[j].slices[&holder];
                let sink = outputs[j].entry(holder).or_default();
                let done = holder_loop(
                    sic.algos[j].algo.as_ref(),
                    shell,
                    &slice.auxes[main_idx as usize],
                    sink,
                )
                .map_err(|violation| DistError::Budget { algo: j, violation })?;
                stats[j].aux_roundtrips += 1;
                if done {
                    loc.insert(j, Loc::Done);
                    usage[j] = shell.stats();
                } else {
                    let member_v = chains[&j].members[member_idx];
                    responses.push(Demand {
                        src: holder,
                        dst: member_v,
                        pay: Pay::State { algo: j as u32, words: shell.encode() },
                    });
                    response_dst.insert(j, member_idx);
                }
            }
        }
        if !responses.is_empty() {
            let out = routing::route_auto(cluster, responses, cfg)?;
            trace.append(out.trace);
            for (_, items) in out.delivered {
                for (_, pay) in items {
                    if let Pay::State { algo, words } = pay {
                        let j = algo as usize;
                        shells.insert(j, Shell::decode(&words));
                        loc.insert(j, Loc::Member(response_dst[&j]));
                    }
                }
            }
        }

        // advance chains, flushing hand-off bursts within the step
        let mut aux_requests: Vec<Demand> = Vec::new();
        loop {
            let mut handoffs: Vec<Demand> = Vec::new();
            let mut handoff_dst: BTreeMap<usize, usize> = BTreeMap::new();
            for &j in batch {
                let member_idx = match loc[&j] {
                    Loc::Member(mi) => mi,
                    _ => continue,
                };
                let chain = &chains[&j];
                let member_v = chain.members[member_idx];
                let shell = shells.get_mut(&j).unwrap();
                let tokens = member_tokens.get(&(j, member_idx)).unwrap_or(&empty);
                let cursor = cursors.entry((j, member_idx)).or_insert(0);
                let sink = outputs[j].entry(member_v).or_default();
                let ev = member_loop(sic.algos[j].algo.as_ref(), shell, tokens, cursor, sink)
                    .map_err(|violation| DistError::Budget { algo: j, violation })?;
                match ev {
                    MemberEvent::Done => {
                        loc.insert(j, Loc::Done);
                        usage[j] = shell.stats();
                    }
                    MemberEvent::Handoff => {
                        if member_idx + 1 >= chain.member_count() {
                            return Err(DistError::Budget {
                                algo: j,
                                violation: BudgetViolation::ReadPastEnd {
                                    mains_read: shell.main_reads,
                                },
                            });
                        }
                        stats[j].handoffs += 1;
                        let next_v = chain.members[member_idx + 1];
                        handoffs.push(Demand {
                            src: member_v,
                            dst: next_v,
                            pay: Pay::State { algo: j as u32, words: shell.encode() },
                        });
                        handoff_dst.insert(j, member_idx + 1);
                        loc.insert(j, Loc::Done); // placeholder until arrival
                    }
                    MemberEvent::NeedAux { holder, idx } => {
                        aux_requests.push(Demand {
                            src: member_v,
                            dst: holder,
                            pay: Pay::State { algo: j as u32, words: shell.encode() },
                        });
                        loc.insert(j, Loc::AtHolder { holder, member_idx, main_idx: idx });
                    }
                }
            }
            if handoffs.is_empty() {
                break;
            }
            let out = routing::route_auto(cluster, handoffs, cfg)?;
            trace.append(out.trace);
            for (_, items) in out.delivered {
                for (_, pay) in items {
                    if let Pay::State { algo, words } = pay {
                        let j = algo as usize;
                        shells.insert(j, Shell::decode(&words));
                        loc.insert(j, Loc::Member(handoff_dst[&j]));
                    }
                }
            }
        }
        if !aux_requests.is_empty() {
            let out = routing::route_auto(cluster, aux_requests, cfg)?;
            trace.append(out.trace);
            for (_, items) in out.delivered {
                for (_, pay) in items {
                    if let Pay::State { algo, words } = pay {
                        let j = algo as usize;
                        shells.insert(j, Shell::decode(&words));
                        // location already set to AtHolder with the right coordinates
                    }
                }
            }
        }
    }

    for &j in batch {
        match loc[&j] {
            Loc::Done => {}
            _ => {
                return Err(DistError::Precondition(format!(
                    "algorithm {j} did not finish within q+1 steps"
                )))
            }
        }
        let chain = &chains[&j];
        if stats[j].handoffs + 1 > chain.member_count() as u64 {
            return Err(DistError::Traffic(format!(
                "algorithm {j}: {} hand-offs with a {}-member chain",
                stats[j].handoffs,
                chain.member_count()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expander::{standalone_cluster, DeltaRule};
    use crate::gen;
    use crate::skipstream::{run_sequential, CopyAlgo, ThresholdAlgo};

    fn test_cluster(n: usize) -> crate::expander::CommunicationCluster {
        standalone_cluster(&gen::complete(n), DeltaRule::K3, n)
    }

    fn spread_tokens(
        mains: Vec<Token>,
        auxes: Vec<Vec<Token>>,
        holders: &[Vertex],
        per: usize,
    ) -> BTreeMap<Vertex, AlgoSlice> {
        let mut slices: BTreeMap<Vertex, AlgoSlice> = BTreeMap::new();
        for (i, (m, a)) in mains.into_iter().zip(auxes).enumerate() {
            let v = holders[(i / per).min(holders.len() - 1)];
            let e = slices.entry(v).or_default();
            e.mains.push(m);
            e.auxes.push(a);
        }
        slices
    }

    #[test]
    fn copy_algo_matches_sequential_with_handoffs() {
        let cluster = test_cluster(4);
        let holders: Vec<Vertex> = cluster.vlist_ranked();
        let mains: Vec<Token> = (1..=8u64).map(|i| vec![i, i * i]).collect();
        let auxes = vec![Vec::new(); 8];
        let slices = spread_tokens(mains.clone(), auxes, &holders, 2);
        let algo = CopyAlgo::new(8, 16, 2);
        let seq = run_sequential(&algo, &TokenStream::without_auxes(mains)).unwrap();
        let sic = StreamingInputCluster::new(
            &cluster,
            vec![AlgoInput { algo: Box::new(CopyAlgo::new(8, 16, 2)), slices }],
            2,
        )
        .unwrap();
        let out = simulate_in_cluster(&sic, 2, &SimConfig::default(), 8.0).unwrap();
        assert_eq!(out.merged[0], seq.0);
        assert_eq!(out.stats[0].handoffs, 1); // 2-member chain
        assert_eq!(out.stats[0].aux_roundtrips, 0);
        assert!(out.trace.total_messages() > 0);
    }

    #[test]
    fn lambda_one_means_single_member_and_no_handoffs() {
        let cluster = test_cluster(4);
        let holders: Vec<Vertex> = cluster.vlist_ranked();
        let mains: Vec<Token> = (1..=4u64).map(|i| vec![i, 7]).collect();
        let slices = spread_tokens(mains.clone(), vec![Vec::new(); 4], &holders, 1);
        let algo = CopyAlgo::new(4, 16, 2);
        let seq = run_sequential(&algo, &TokenStream::without_auxes(mains)).unwrap();
        let sic = StreamingInputCluster::new(
            &cluster,
            vec![AlgoInput { algo: Box::new(CopyAlgo::new(4, 16, 2)), slices }],
            1,
        )
        .unwrap();
        let out = simulate_in_cluster(&sic, 1, &SimConfig::default(), 8.0).unwrap();
        assert_eq!(out.merged[0], seq.0);
        assert_eq!(out.stats[0].handoffs, 0);
    }

    #[test]
    fn aux_path_round_trips_and_matches_sequential() {
        let cluster = test_cluster(6);
        let holders: Vec<Vertex> = cluster.vlist_ranked();
        // six mains, three of them heavy with aux runs
        let mut mains = Vec::new();
        let mut auxes = Vec::new();
        for i in 1..=6u64 {
            if i % 2 == 0 {
                let run: Vec<Token> = (1..=3u64).map(|s| vec![i, s, 10 * i + s]).collect();
                mains.push(vec![i, 3, 100]);
                auxes.push(run);
            } else {
                mains.push(vec![i, 0, 1]);
                auxes.push(Vec::new());
            }
        }
        let algo = ThresholdAlgo::new(6, 5, 3);
        let seq = run_sequential(&algo, &TokenStream::new(mains.clone(), auxes.clone())).unwrap();
        assert!(seq.1.aux_invocations == 3);
        let slices = spread_tokens(mains, auxes, &holders, 1);
        let sic = StreamingInputCluster::new(
            &cluster,
            vec![AlgoInput { algo: Box::new(ThresholdAlgo::new(6, 5, 3)), slices }],
            1,
        )
        .unwrap();
        let out = simulate_in_cluster(&sic, 3, &SimConfig::default(), 8.0).unwrap();
        assert_eq!(out.merged[0], seq.0);
        assert_eq!(out.stats[0].aux_roundtrips, 3);
        assert!(out.stats[0].handoffs <= 2);
        assert_eq!(out.usage[0].aux_invocations, 3);
    }

    #[test]
    fn multiple_algorithms_run_in_parallel_batches() {
        let cluster = test_cluster(6);
        let holders: Vec<Vertex> = cluster.vlist_ranked();
        let mut inputs = Vec::new();
        let mut expected = Vec::new();
        for a in 0..4u64 {
            let mains: Vec<Token> = (1..=6u64).map(|i| vec![i + 100 * a, i]).collect();
            let slices = spread_tokens(mains.clone(), vec![Vec::new(); 6], &holders, 1);
            let algo = CopyAlgo::new(6, 16, 2);
            expected.push(run_sequential(&algo, &TokenStream::without_auxes(mains)).unwrap().0);
            inputs.push(AlgoInput { algo: Box::new(CopyAlgo::new(6, 16, 2)), slices });
        }
        let sic = StreamingInputCluster::new(&cluster, inputs, 1).unwrap();
        // lambda * zeta = 3 * 4 > 6 forces batching
        let out = simulate_in_cluster(&sic, 3, &SimConfig::default(), 8.0).unwrap();
        for (j, want) in expected.iter().enumerate() {
            assert_eq!(&out.merged[j], want);
        }
    }

    #[test]
    fn phase1_traffic_respects_t_max_bounds() {
        let cluster = test_cluster(5);
        let holders: Vec<Vertex> = cluster.vlist_ranked();
        let mains: Vec<Token> = (1..=10u64).map(|i| vec![i]).collect();
        let slices = spread_tokens(mains, vec![Vec::new(); 10], &holders, 2);
        let sic = StreamingInputCluster::new(
            &cluster,
            vec![AlgoInput { algo: Box::new(CopyAlgo::new(10, 16, 1)), slices }],
            2,
        )
        .unwrap();
        let out = simulate_in_cluster(&sic, 5, &SimConfig::default(), 8.0).unwrap();
        assert!(out.stats[0].phase1_max_sent <= 2);
        assert!(out.stats[0].phase1_max_recv <= 2); // beta = 1, t_max = 2
    }
}
