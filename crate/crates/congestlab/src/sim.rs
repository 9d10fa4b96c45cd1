//! Round-synchronous message-passing simulator with a hard per-message
//! bandwidth bound and a complete per-fragment accounting trace.
//!
//! One message per directed edge per round. A payload wider than the
//! bandwidth `B` is fragmented by the engine into consecutive fragments on
//! the same directed edge and delivered whole one round after its last
//! fragment; accounting counts fragments. Listing output leaves through a
//! dedicated per-vertex channel, never through messages.

use crate::graph::{Graph, Vertex};
use std::collections::{BTreeMap, VecDeque};
use std::fmt;

/// Bit-widths for message fields, fixed by the vertex-count of the graph.
/// Ids are `ceil(log2(n+1))` bits, counts twice that, and the per-round
/// bandwidth is `c_b * ceil(log2 n)` bits (at least one id wide).
#[derive(Debug, Clone, Copy)]
pub struct Wire {
    pub n: usize,
    pub id_bits: u64,
    pub b: u64,
}

impl Wire {
    pub fn new(n: usize, c_b: u64) -> Wire {
        let id_bits = 64 - (n as u64).leading_zeros() as u64; // ceil(log2(n+1))
        let log_n = (64 - (n.max(2) as u64 - 1).leading_zeros() as u64).max(1); // ceil(log2 n)
        Wire {
            n,
            id_bits: id_bits.max(1),
            b: (c_b * log_n).max(id_bits.max(1)),
        }
    }

    pub fn count_bits(&self) -> u64 {
        2 * self.id_bits
    }
}

/// Protocol payloads. `bits` is the logical encoded size used for
/// fragmentation and accounting: ids cost `id_bits`, counts and tags cost
/// `2 * id_bits`, algorithm states are opaque 64-bit word blobs, plus a
/// 4-bit kind tag on every variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pay {
    /// Opaque bit string (raw, unfragmented sends must fit in B).
    Raw { bits: u64, label: u64 },
    Id(Vertex),
    /// Directed or undirected vertex pair, context-dependent.
    Edge(Vertex, Vertex),
    /// Edge plus a small tag (cluster index, chunk id, ...).
    EdgeTagged(Vertex, Vertex, u64),
    /// Per-vertex counter, e.g. an input degree.
    Count(Vertex, u64),
    /// Id interval with a tag.
    Interval { lo: Vertex, hi: Vertex, tag: u64 },
    /// Partition-tree part: node path, part index, id interval.
    Part { path: Vec<u16>, j: u16, lo: Vertex, hi: Vertex },
    /// Stream main token: owning algorithm, origin vertex, position within
    /// the origin's interval, field values.
    Token { algo: u32, origin: Vertex, idx: u32, fields: Vec<u64> },
    /// Skip-stream execution state in transit (shell + machine words).
    State { algo: u32, words: Vec<u64> },
    /// Routed unit: headers plus the wrapped payload.
    Routed { src: Vertex, dst: Vertex, inner: Box<Pay> },
    /// Numbered item: id tag plus the wrapped payload.
    Item { id: u64, inner: Box<Pay> },
    /// Tagged id list (adjacency rows and row replies).
    Ids { tag: u64, ids: Vec<Vertex> },
}

impl Pay {
    pub fn bits(&self, w: &Wire) -> u64 {
        let id = w.id_bits;
        let cnt = w.count_bits();
        4 + match self {
            Pay::Raw { bits, .. } => *bits,
            Pay::Id(_) => id,
            Pay::Edge(_, _) => 2 * id,
            Pay::EdgeTagged(_, _, _) => 2 * id + cnt,
            Pay::Count(_, _) => id + cnt,
            Pay::Interval { .. } => 2 * id + cnt,
            Pay::Part { path, .. } => (path.len() as u64 + 1) * id + 2 * id,
            Pay::Token { fields, .. } => id + cnt + cnt + fields.len() as u64 * cnt,
            Pay::State { words, .. } => cnt + words.len() as u64 * 64,
            Pay::Routed { inner, .. } => 2 * id + inner.bits(w),
            Pay::Item { inner, .. } => cnt + inner.bits(w),
            Pay::Ids { ids, .. } => cnt + ids.len() as u64 * id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimError {
    Oversized { vertex: Vertex, to: Vertex, round: u64, bits: u64, b: u64 },
    NotAnEdge { vertex: Vertex, to: Vertex },
    MaxRounds { max_rounds: u64 },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Oversized { vertex, to, round, bits, b } => write!(
                f,
                "vertex {vertex} sent {bits} bits (> B = {b}) on edge ({vertex}, {to}) in round {round}"
            ),
            SimError::NotAnEdge { vertex, to } => {
                write!(f, "vertex {vertex} addressed non-neighbor {to}")
            }
            SimError::MaxRounds { max_rounds } => {
                write!(f, "simulation did not terminate within {max_rounds} rounds")
            }
        }
    }
}

impl std::error::Error for SimError {}

/// One transmitted fragment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEntry {
    pub round: u64,
    pub u: Vertex,
    pub v: Vertex,
    /// true: fragment traveled u -> v.
    pub from_u: bool,
    pub bits: u64,
}

#[derive(Debug, Clone, Default)]
pub struct RoundTrace {
    pub entries: Vec<TraceEntry>,
    pub rounds: u64,
}

impl RoundTrace {
    /// Per-vertex (sent, received) fragment totals.
    pub fn per_vertex_totals(&self) -> BTreeMap<Vertex, (u64, u64)> {
        let mut m: BTreeMap<Vertex, (u64, u64)> = BTreeMap::new();
        for e in &self.entries {
            let (src, dst) = if e.from_u { (e.u, e.v) } else { (e.v, e.u) };
            m.entry(src).or_default().0 += 1;
            m.entry(dst).or_default().1 += 1;
        }
        m
    }

    pub fn total_messages(&self) -> u64 {
        self.entries.len() as u64
    }

    /// Asserts the bandwidth discipline: at most one fragment per directed
    /// edge per round, every fragment at most `b` bits.
    pub fn check_bandwidth(&self, b: u64) -> Result<(), String> {
        let mut seen: std::collections::BTreeSet<(u64, Vertex, Vertex, bool)> =
            Default::default();
        for e in &self.entries {
            if e.bits > b {
                return Err(format!(
                    "fragment of {} bits exceeds B={} on ({}, {}) round {}",
                    e.bits, b, e.u, e.v, e.round
                ));
            }
            if !seen.insert((e.round, e.u, e.v, e.from_u)) {
                return Err(format!(
                    "two fragments on directed edge ({}, {}, fwd={}) in round {}",
                    e.u, e.v, e.from_u, e.round
                ));
            }
        }
        Ok(())
    }

    /// Line-oriented export: `round,edge_u,edge_v,dir,bits`.
    pub fn export(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                e.round,
                e.u,
                e.v,
                if e.from_u { "fwd" } else { "rev" },
                e.bits
            ));
        }
        s
    }

    /// Concatenate a later phase, shifting its round numbers past ours.
    pub fn append(&mut self, mut other: RoundTrace) {
        let shift = self.rounds;
        for e in &mut other.entries {
            e.round += shift;
        }
        self.entries.extend(other.entries);
        self.rounds += other.rounds;
    }
}

/// Summary of a trace, serializable as a single-line JSON document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccountingReport {
    pub max_sent: u64,
    pub max_recv: u64,
    pub rounds: u64,
    pub total_messages: u64,
}

impl AccountingReport {
    pub fn of(trace: &RoundTrace) -> AccountingReport {
        let totals = trace.per_vertex_totals();
        AccountingReport {
            max_sent: totals.values().map(|t| t.0).max().unwrap_or(0),
            max_recv: totals.values().map(|t| t.1).max().unwrap_or(0),
            rounds: trace.rounds,
            total_messages: trace.total_messages(),
        }
    }

    pub fn serialize(&self) -> String {
        format!(
            "{{\"max_sent\":{},\"max_recv\":{},\"rounds\":{},\"total_messages\":{}}}",
            self.max_sent, self.max_recv, self.rounds, self.total_messages
        )
    }

    pub fn parse(s: &str) -> Option<AccountingReport> {
        let mut vals = BTreeMap::new();
        for kv in s.trim().trim_start_matches('{').trim_end_matches('}').split(',') {
            let (k, v) = kv.split_once(':')?;
            vals.insert(k.trim().trim_matches('"').to_string(), v.trim().parse::<u64>().ok()?);
        }
        Some(AccountingReport {
            max_sent: *vals.get("max_sent")?,
            max_recv: *vals.get("max_recv")?,
            rounds: *vals.get("rounds")?,
            total_messages: *vals.get("total_messages")?,
        })
    }
}

/// Per-round context handed to a vertex program. Sends are collected and
/// enqueued by the engine after the handler returns.
pub struct RoundCtx<'a> {
    pub me: Vertex,
    pub round: u64,
    pub inbox: &'a [(Vertex, Pay)],
    pub(crate) sends: Vec<(Vertex, Pay)>,
    pub(crate) raw_oversize: Option<(Vertex, u64)>,
    pub(crate) outputs: Vec<Vec<u64>>,
    pub(crate) busy: bool,
    wire: Wire,
}

impl<'a> RoundCtx<'a> {
    /// Send a payload to a neighbor; fragmented by the engine if needed.
    pub fn send(&mut self, to: Vertex, pay: Pay) {
        self.sends.push((to, pay));
    }

    /// Send a raw bit string; errors the run if it exceeds B.
    pub fn send_raw(&mut self, to: Vertex, bits: u64, label: u64) {
        if bits + 4 > self.wire.b {
            self.raw_oversize.get_or_insert((to, bits + 4));
        }
        self.sends.push((to, Pay::Raw { bits, label }));
    }

    /// Emit on the listing output channel (not a message; not in the trace).
    pub fn output(&mut self, item: Vec<u64>) {
        self.outputs.push(item);
    }

    /// Declare that this vertex still has local work pending, keeping the
    /// simulation alive even with no traffic in flight.
    pub fn keep_running(&mut self) {
        self.busy = true;
    }
}

pub trait VertexProgram {
    fn on_round(&mut self, ctx: &mut RoundCtx<'_>);
}

pub struct RunResult {
    pub outputs: BTreeMap<Vertex, Vec<Vec<u64>>>,
    pub trace: RoundTrace,
    pub wire: Wire,
}

#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub c_b: u64,
    pub max_rounds: u64,
    /// Permutes the order vertex handlers run within a round. The result
    /// must not depend on it; tests exercise that.
    pub perm_seed: Option<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { c_b: 8, max_rounds: 4_000_000, perm_seed: None }
    }
}

struct FragQueue {
    queue: VecDeque<(Pay, u64, u64)>, // payload, total frags, frags sent
}

/// Execute programs on `g` until quiescence: no fragments in flight, no
/// pending deliveries, and no handler asking to keep running.
pub fn run(
    g: &Graph,
    mut programs: BTreeMap<Vertex, Box<dyn VertexProgram>>,
    cfg: &SimConfig,
) -> Result<RunResult, SimError> {
    let wire = Wire::new(g.n(), cfg.c_b);
    let mut order: Vec<Vertex> = programs.keys().copied().collect();
    if let Some(seed) = cfg.perm_seed {
        let mut rng = crate::gen::SplitMix64::new(seed);
        for i in (1..order.len()).rev() {
            let j = rng.next_below(i as u64 + 1) as usize;
            order.swap(i, j);
        }
    }
    let mut queues: BTreeMap<(Vertex, Vertex), FragQueue> = BTreeMap::new();
    let mut staged: BTreeMap<Vertex, Vec<(Vertex, Pay)>> = BTreeMap::new();
    let mut outputs: BTreeMap<Vertex, Vec<Vec<u64>>> = BTreeMap::new();
    let mut trace = RoundTrace::default();

    for round in 1..=cfg.max_rounds {
        let inboxes = std::mem::take(&mut staged);
        let had_deliveries = !inboxes.is_empty();
        let mut any_busy = false;
        let mut any_send = false;
        for &v in &order {
            let mut inbox = inboxes.get(&v).cloned().unwrap_or_default();
            inbox.sort_by_key(|(from, _)| *from);
            let mut ctx = RoundCtx {
                me: v,
                round,
                inbox: &inbox,
                sends: Vec::new(),
                raw_oversize: None,
                outputs: Vec::new(),
                busy: false,
                wire,
            };
            programs.get_mut(&v).unwrap().on_round(&mut ctx);
            if let Some((to, bits)) = ctx.raw_oversize {
                return Err(SimError::Oversized { vertex: v, to, round, bits, b: wire.b });
            }
            any_busy |= ctx.busy;
            if !ctx.outputs.is_empty() {
                outputs.entry(v).or_default().extend(ctx.outputs);
            }
            for (to, pay) in ctx.sends {
                if !g.has_edge(v, to) {
                    return Err(SimError::NotAnEdge { vertex: v, to });
                }
                any_send = true;
                let bits = pay.bits(&wire);
                let frags = bits.div_ceil(wire.b).max(1);
                queues
                    .entry((v, to))
                    .or_insert_with(|| FragQueue { queue: VecDeque::new() })
                    .queue
                    .push_back((pay, frags, 0));
            }
        }
        // transmit one fragment per directed edge, in sorted edge order
        let mut in_flight = false;
        for ((src, dst), fq) in queues.iter_mut() {
            if let Some((pay, total, sent)) = fq.queue.front_mut() {
                *sent += 1;
                let payload_bits = pay.bits(&wire);
                let frag_bits = if *sent == *total {
                    payload_bits - (*total - 1) * wire.b.min(payload_bits)
                } else {
                    wire.b
                };
                let frag_bits = frag_bits.min(wire.b);
                let (u, v, from_u) = if src < dst { (*src, *dst, true) } else { (*dst, *src, false) };
                trace.entries.push(TraceEntry { round, u, v, from_u, bits: frag_bits });
                if *sent == *total {
                    let (pay, _, _) = fq.queue.pop_front().unwrap();
                    staged.entry(*dst).or_default().push((*src, pay));
                }
            }
            in_flight |= !fq.queue.is_empty();
        }
        trace.rounds = round;
        if !in_flight && staged.is_empty() && !any_busy && !any_send && !had_deliveries && round > 1
        {
            trace.rounds = round - 1;
            break;
        }
        if !in_flight && staged.is_empty() && !any_busy && !any_send && round == 1 {
            break;
        }
        if round == cfg.max_rounds {
            return Err(SimError::MaxRounds { max_rounds: cfg.max_rounds });
        }
    }
    Ok(RunResult { outputs, trace, wire })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;

    /// Sends own id to every neighbor in round 1, records the inbox.
    struct Flood {
        neighbors: Vec<Vertex>,
        pub got: Vec<Vertex>,
    }

    impl VertexProgram for Flood {
        fn on_round(&mut self, ctx: &mut RoundCtx<'_>) {
            if ctx.round == 1 {
                for &u in &self.neighbors {
                    ctx.send(u, Pay::Id(ctx.me));
                }
            }
            for (from, pay) in ctx.inbox {
                if let Pay::Id(v) = pay {
                    self.got.push(*v);
                    ctx.output(vec![*from as u64, *v as u64]);
                }
            }
        }
    }

    fn flood_programs(g: &Graph) -> BTreeMap<Vertex, Box<dyn VertexProgram>> {
        g.vertices()
            .map(|v| {
                (
                    v,
                    Box::new(Flood { neighbors: g.neighbors(v).collect(), got: vec![] })
                        as Box<dyn VertexProgram>,
                )
            })
            .collect()
    }

    #[test]
    fn flood_on_triangle() {
        let g = gen::complete(3);
        let res = run(&g, flood_programs(&g), &SimConfig::default()).unwrap();
        assert_eq!(res.trace.total_messages(), 6);
        assert_eq!(res.trace.rounds, 2);
        // every vertex got 2 messages
        for v in 1..=3 {
            assert_eq!(res.outputs.get(&v).map(|o| o.len()), Some(2));
        }
        res.trace.check_bandwidth(res.wire.b).unwrap();
    }

    #[test]
    fn silence_terminates_immediately() {
        struct Quiet;
        impl VertexProgram for Quiet {
            fn on_round(&mut self, _ctx: &mut RoundCtx<'_>) {}
        }
        let g = gen::complete(3);
        let programs = g
            .vertices()
            .map(|v| (v, Box::new(Quiet) as Box<dyn VertexProgram>))
            .collect();
        let res = run(&g, programs, &SimConfig::default()).unwrap();
        assert_eq!(res.trace.total_messages(), 0);
        assert_eq!(res.trace.rounds, 1);
    }

    #[test]
    fn permuted_scheduling_gives_identical_traces() {
        let g = gen::gnp(12, 0.5, 9);
        let base = run(&g, flood_programs(&g), &SimConfig::default()).unwrap();
        for seed in [1u64, 7, 99] {
            let cfg = SimConfig { perm_seed: Some(seed), ..SimConfig::default() };
            let r = run(&g, flood_programs(&g), &cfg).unwrap();
            assert_eq!(r.trace.entries, base.trace.entries);
            assert_eq!(r.outputs, base.outputs);
        }
    }

    #[test]
    fn oversized_raw_send_aborts_with_location() {
        struct Shout {
            to: Vertex,
        }
        impl VertexProgram for Shout {
            fn on_round(&mut self, ctx: &mut RoundCtx<'_>) {
                if ctx.round == 1 && ctx.me == 1 {
                    ctx.send_raw(self.to, 10_000, 0);
                }
            }
        }
        let g = gen::complete(3);
        let programs = g
            .vertices()
            .map(|v| (v, Box::new(Shout { to: if v == 1 { 2 } else { 1 } }) as Box<dyn VertexProgram>))
            .collect();
        match run(&g, programs, &SimConfig::default()) {
            Err(SimError::Oversized { vertex: 1, to: 2, round: 1, .. }) => {}
            other => panic!("expected oversize abort, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn fragmentation_counts_fragments() {
        struct Big {
            sent: bool,
        }
        impl VertexProgram for Big {
            fn on_round(&mut self, ctx: &mut RoundCtx<'_>) {
                if ctx.me == 1 && !self.sent {
                    self.sent = true;
                    // 10 words = 640 bits of state, B = 8*ceil(log2 3) = 16
                    ctx.send(2, Pay::State { algo: 0, words: vec![7; 10] });
                }
                for (_, pay) in ctx.inbox {
                    if let Pay::State { words, .. } = pay {
                        ctx.output(words.clone());
                    }
                }
            }
        }
        let g = gen::path(2);
        let programs = (1..=2)
            .map(|v| (v, Box::new(Big { sent: false }) as Box<dyn VertexProgram>))
            .collect();
        let res = run(&g, programs, &SimConfig::default()).unwrap();
        let wire = res.wire;
        let bits = Pay::State { algo: 0, words: vec![7; 10] }.bits(&wire);
        assert_eq!(res.trace.total_messages(), bits.div_ceil(wire.b));
        // delivered intact
        assert_eq!(res.outputs[&2], vec![vec![7u64; 10]]);
        res.trace.check_bandwidth(wire.b).unwrap();
    }

    #[test]
    fn nontermination_hits_the_round_cap() {
        struct Chatter;
        impl VertexProgram for Chatter {
            fn on_round(&mut self, ctx: &mut RoundCtx<'_>) {
                if ctx.me == 1 {
                    ctx.send(2, Pay::Id(1));
                }
            }
        }
        let g = gen::path(2);
        let programs = (1..=2)
            .map(|v| (v, Box::new(Chatter) as Box<dyn VertexProgram>))
            .collect();
        let cfg = SimConfig { max_rounds: 50, ..SimConfig::default() };
        match run(&g, programs, &cfg) {
            Err(SimError::MaxRounds { max_rounds: 50 }) => {}
            other => panic!("expected a round-cap abort, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn accounting_report_round_trips() {
        let g = gen::complete(3);
        let res = run(&g, flood_programs(&g), &SimConfig::default()).unwrap();
        let rep = AccountingReport::of(&res.trace);
        assert_eq!(rep.max_sent, 2);
        assert_eq!(rep.max_recv, 2);
        assert_eq!(AccountingReport::parse(&rep.serialize()), Some(rep));
        let empty = AccountingReport::of(&RoundTrace::default());
        assert_eq!(empty.max_sent, 0);
        assert_eq!(empty.total_messages, 0);
    }
}
