//! The three counter-based skip-stream constructors: one clique-tree layer,
//! the degree-balancing allocator, and one split-tree layer (the
//! rollback-and-expand machine). Each is a pure state machine over word
//! blobs so it can ship between vertices mid-run.

use super::{ceil_div, Interval, K3Constraints, SplitConstraints};
use crate::graph::{Graph, SplitGraph, Vertex};
use crate::skipstream::{Op, SkipAlgo, SkipParams, Token, TokenStream};
use std::collections::BTreeSet;

/// One layer of a clique partition tree: greedily pack ascending vertices
/// into a part until a balancing counter would overflow, then close the
/// part and seed the next with the overflowing vertex.
pub struct K3LayerAlgo {
    params: SkipParams,
    pub x: u64,
    pub t_deg: u64,
    pub t_up: u64,
    pub t_sz: u64,
}

impl K3LayerAlgo {
    /// `depth` = number of ancestor parts of the partition under
    /// construction (0 for the root layer).
    pub fn new(k: u64, m: u64, p: u64, depth: u64, cons: &K3Constraints, field_bits: u64) -> K3LayerAlgo {
        let x = (k as f64).powf(1.0 / p as f64).ceil().max(1.0) as u64;
        let m_tilde = m.max(k * x);
        let t_deg = ceil_div(cons.c1 * m_tilde, x);
        let t_up = ceil_div(cons.c2 * depth * m_tilde + cons.c3 * p * k * x, x * x);
        let t_sz = ceil_div(cons.c3 * k, x);
        let l_bits = (2 + depth) * field_bits;
        K3LayerAlgo {
            params: SkipParams::with_default_cap(l_bits, k, x.max(1), 0, x.max(1), field_bits),
            x,
            t_deg,
            t_up,
            t_sz,
        }
    }

    pub fn poisoned(state: &[u64]) -> bool {
        state[10] == 1
    }
}

const K3_MAINS: usize = 0;
const K3_START: usize = 1;
const K3_CDEG: usize = 2;
const K3_CUP: usize = 3;
const K3_CSZ: usize = 4;
const K3_PREV: usize = 5;
const K3_PFLAG: usize = 6;
const K3_PLO: usize = 7;
const K3_PHI: usize = 8;
const K3_FINAL: usize = 9;
const K3_POISON: usize = 10;

impl SkipAlgo for K3LayerAlgo {
    fn params(&self) -> &SkipParams {
        &self.params
    }

    fn init_state(&self) -> Vec<u64> {
        vec![0; 11]
    }

    fn step(&self, s: &mut Vec<u64>, read: Option<&Token>) -> Op {
        if let Some(t) = read {
            let id = t[0];
            let deg = t[1];
            let up: u64 = t[2..].iter().sum();
            s[K3_MAINS] += 1;
            if s[K3_PREV] != 0 && id <= s[K3_PREV] {
                s[K3_POISON] = 1;
            } else if s[K3_START] == 0 {
                s[K3_START] = id;
                s[K3_CDEG] = deg;
                s[K3_CUP] = up;
                s[K3_CSZ] = 1;
                s[K3_PREV] = id;
            } else {
                s[K3_CDEG] += deg;
                s[K3_CUP] += up;
                s[K3_CSZ] += 1;
                if s[K3_CDEG] > self.t_deg || s[K3_CUP] > self.t_up || s[K3_CSZ] > self.t_sz {
                    s[K3_PFLAG] = 1;
                    s[K3_PLO] = s[K3_START];
                    s[K3_PHI] = s[K3_PREV];
                    s[K3_START] = id;
                    s[K3_CDEG] = deg;
                    s[K3_CUP] = up;
                    s[K3_CSZ] = 1;
                }
                s[K3_PREV] = id;
            }
        }
        if s[K3_POISON] == 1 {
            return Op::Halt;
        }
        if s[K3_PFLAG] == 1 {
            s[K3_PFLAG] = 0;
            return Op::Write(vec![s[K3_PLO], s[K3_PHI]]);
        }
        if s[K3_MAINS] < self.params.n_in {
            return Op::Read;
        }
        if s[K3_FINAL] == 0 {
            s[K3_FINAL] = 1;
            return if s[K3_START] == 0 {
                Op::Write(vec![1, 0]) // empty universe: one empty part
            } else {
                Op::Write(vec![s[K3_START], s[K3_PREV]])
            };
        }
        Op::Halt
    }
}

/// Stream for one clique-layer instance: per universe vertex, ascending,
/// `[id, deg_into_universe, deg into each ancestor part]`.
pub fn k3_layer_stream(universe: &[Vertex], g: &Graph, anc: &[Interval]) -> TokenStream {
    let uni: BTreeSet<Vertex> = universe.iter().copied().collect();
    let mains = universe
        .iter()
        .map(|&v| {
            let mut t = vec![v as u64, g.neighbor_set(v).iter().filter(|u| uni.contains(u)).count() as u64];
            for iv in anc {
                t.push(
                    g.neighbor_set(v)
                        .iter()
                        .filter(|&&u| iv.contains(u) && uni.contains(&u))
                        .count() as u64,
                );
            }
            t
        })
        .collect();
    TokenStream::without_auxes(mains)
}

/// Degree-proportional interval allocator: reads `(v, deg)` ascending and
/// writes `(v, lo, hi)`, giving below-half-average vertices the empty
/// interval and everyone else `2 * ceil(M * deg / m)` message slots.
pub struct BalanceAlgo {
    params: SkipParams,
    pub k: u64,
    pub m_total: u64,
    pub m_cap: u64,
}

impl BalanceAlgo {
    pub fn new(k: u64, m_total: u64, m_cap: u64, field_bits: u64) -> BalanceAlgo {
        assert!(m_total > 0, "total communication degree must be positive");
        BalanceAlgo {
            params: SkipParams::with_default_cap(3 * field_bits, k, k, 0, 1, field_bits),
            k,
            m_total,
            m_cap,
        }
    }
}

impl SkipAlgo for BalanceAlgo {
    fn params(&self) -> &SkipParams {
        &self.params
    }

    fn init_state(&self) -> Vec<u64> {
        // [mains_read, leaf, pend_flag, pv, plo, phi]
        vec![0; 6]
    }

    fn step(&self, s: &mut Vec<u64>, read: Option<&Token>) -> Op {
        if let Some(t) = read {
            let (v, deg) = (t[0], t[1]);
            s[0] += 1;
            s[2] = 1;
            s[3] = v;
            if 2 * deg * self.k < self.m_total {
                s[4] = 1;
                s[5] = 0; // empty interval
            } else {
                let l = 2 * ceil_div(self.m_cap * deg, self.m_total);
                s[4] = s[1] + 1;
                s[5] = s[1] + l;
                s[1] += l;
            }
        }
        if s[2] == 1 {
            s[2] = 0;
            return Op::Write(vec![s[3], s[4], s[5]]);
        }
        if s[0] < self.params.n_in {
            Op::Read
        } else {
            Op::Halt
        }
    }
}

/// One layer of a split tree. Mains aggregate a whole ownership interval;
/// on overflow the aggregate is rolled back, the auxiliaries are expanded,
/// and parts close at per-vertex granularity.
pub struct SplitLayerAlgo {
    params: SkipParams,
    /// Thresholds for the three counters active on this side.
    pub t: [u64; 3],
    /// Leading ancestor fields that belong to outer-side layers.
    pub outer_ancestors: usize,
    pub depth: usize,
    pub side1: bool,
    pub w_lo: u64,
    pub w_hi: u64,
}

impl SplitLayerAlgo {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sg_counts: (u64, u64, u64, u64, u64), // (n, k, m1, m2, m12)
        a: u64,
        b: u64,
        pi: usize,
        depth: usize,
        cons: &SplitConstraints,
        w_span: (u64, u64),
        n_in: u64,
        field_bits: u64,
    ) -> SplitLayerAlgo {
        let (n, k, m1, m2, m12) = sg_counts;
        let mt1 = m1.max(k * a);
        let mt2 = m2.max(n * b);
        let mt12 = m12.max(n * a);
        let side1 = depth >= pi;
        let t = if !side1 {
            [
                ceil_div(cons.c1 * m2, b) + n,
                ceil_div(cons.c2 * depth as u64 * mt2, b * b) + n,
                ceil_div(cons.c1 * m12, b) + n,
            ]
        } else {
            [
                ceil_div(cons.c1 * m1, a) + k,
                ceil_div(cons.c2 * (depth - pi) as u64 * mt1, a * a) + k,
                ceil_div(cons.c2 * pi as u64 * mt12, a * b) + n,
            ]
        };
        let branching = if side1 { a } else { b };
        let l_bits = (5 + depth as u64) * field_bits;
        SplitLayerAlgo {
            params: SkipParams::with_default_cap(
                l_bits,
                n_in,
                branching.max(1),
                branching.max(1),
                branching.max(1),
                field_bits,
            ),
            t,
            outer_ancestors: depth.min(pi),
            depth,
            side1,
            w_lo: w_span.0,
            w_hi: w_span.1,
        }
    }

    /// Test constructor with raw thresholds.
    #[allow(clippy::too_many_arguments)]
    pub fn with_thresholds(
        t: [u64; 3],
        outer_ancestors: usize,
        depth: usize,
        side1: bool,
        w_span: (u64, u64),
        n_in: u64,
        branching: u64,
        field_bits: u64,
    ) -> SplitLayerAlgo {
        let l_bits = (5 + depth as u64) * field_bits;
        SplitLayerAlgo {
            params: SkipParams::with_default_cap(
                l_bits,
                n_in,
                branching.max(1),
                branching.max(1),
                branching.max(1),
                field_bits,
            ),
            t,
            outer_ancestors,
            depth,
            side1,
            w_lo: w_span.0,
            w_hi: w_span.1,
        }
    }

    /// Counter deltas from (e1, e2, ancestor fields).
    fn deltas(&self, e1: u64, e2: u64, anc: &[u64]) -> [u64; 3] {
        debug_assert_eq!(anc.len(), self.depth);
        if !self.side1 {
            [e2, anc.iter().sum(), e1]
        } else {
            let outer: u64 = anc[..self.outer_ancestors].iter().sum();
            let inner: u64 = anc[self.outer_ancestors..].iter().sum();
            [e1, inner, outer]
        }
    }

    pub fn poisoned(state: &[u64]) -> bool {
        state[SL_POISON] == 1
    }
}

const SL_MODE: usize = 0;
const SL_MAINS: usize = 1;
const SL_AUXREM: usize = 2;
const SL_START: usize = 3;
const SL_C0: usize = 4;
const SL_C1: usize = 5;
const SL_C2: usize = 6;
const SL_PFLAG: usize = 7;
const SL_PLO: usize = 8;
const SL_PHI: usize = 9;
const SL_WANTAUX: usize = 10;
const SL_FINAL: usize = 11;
const SL_POISON: usize = 12;

impl SkipAlgo for SplitLayerAlgo {
    fn params(&self) -> &SkipParams {
        &self.params
    }

    fn init_state(&self) -> Vec<u64> {
        let mut s = vec![0; 13];
        s[SL_START] = self.w_lo;
        s
    }

    fn step(&self, s: &mut Vec<u64>, read: Option<&Token>) -> Op {
        if let Some(t) = read {
            if s[SL_MODE] == 0 {
                // main token [lo, hi, cnt, e1, e2, anc..]
                s[SL_MAINS] += 1;
                let cnt = t[2];
                let d = self.deltas(t[3], t[4], &t[5..]);
                s[SL_C0] += d[0];
                s[SL_C1] += d[1];
                s[SL_C2] += d[2];
                let over = s[SL_C0] > self.t[0] || s[SL_C1] > self.t[1] || s[SL_C2] > self.t[2];
                if over {
                    s[SL_C0] -= d[0];
                    s[SL_C1] -= d[1];
                    s[SL_C2] -= d[2];
                    if cnt == 0 {
                        s[SL_POISON] = 1; // an empty aggregate cannot overflow
                    } else {
                        s[SL_MODE] = 1;
                        s[SL_AUXREM] = cnt;
                        s[SL_WANTAUX] = 1;
                    }
                }
            } else {
                // aux token [v, e1, e2, anc..]
                let v = t[0];
                let d = self.deltas(t[1], t[2], &t[3..]);
                s[SL_AUXREM] -= 1;
                s[SL_C0] += d[0];
                s[SL_C1] += d[1];
                s[SL_C2] += d[2];
                if s[SL_C0] > self.t[0] || s[SL_C1] > self.t[1] || s[SL_C2] > self.t[2] {
                    s[SL_PFLAG] = 1;
                    s[SL_PLO] = s[SL_START];
                    s[SL_PHI] = v - 1;
                    s[SL_C0] = d[0];
                    s[SL_C1] = d[1];
                    s[SL_C2] = d[2];
                    s[SL_START] = v;
                }
                if s[SL_AUXREM] == 0 {
                    s[SL_MODE] = 0;
                }
            }
        }
        if s[SL_POISON] == 1 {
            return Op::Halt;
        }
        if s[SL_WANTAUX] == 1 {
            s[SL_WANTAUX] = 0;
            return Op::Aux;
        }
        if s[SL_PFLAG] == 1 {
            s[SL_PFLAG] = 0;
            return Op::Write(vec![s[SL_PLO], s[SL_PHI]]);
        }
        if s[SL_MODE] == 1 {
            return Op::Read;
        }
        if s[SL_MAINS] < self.params.n_in {
            return Op::Read;
        }
        if s[SL_FINAL] == 0 {
            s[SL_FINAL] = 1;
            return Op::Write(vec![s[SL_START], self.w_hi]);
        }
        Op::Halt
    }
}

/// Stream for one split-layer instance over ownership intervals `sigma`
/// (covering the layer universe `w` in order). Main tokens aggregate the
/// interval; auxiliaries carry the per-vertex values.
pub fn split_layer_stream(
    sg: &SplitGraph,
    sigma: &[Interval],
    w_side1: bool,
    anc: &[(usize, Interval)],
    pi: usize,
) -> TokenStream {
    let w: Vec<Vertex> = if w_side1 {
        sg.v1.iter().copied().collect()
    } else {
        sg.v2.iter().copied().collect()
    };
    let mut mains = Vec::new();
    let mut auxes = Vec::new();
    for iv in sigma {
        let members: Vec<Vertex> = w.iter().copied().filter(|&v| iv.contains(v)).collect();
        let per_vertex: Vec<Token> = members
            .iter()
            .map(|&v| {
                let mut t = vec![v as u64, sg.deg_into_v1(v) as u64, sg.deg_into_v2(v) as u64];
                for (layer, aiv) in anc {
                    let anc_side1 = *layer >= pi;
                    t.push(sg.deg_into_interval(v, aiv.lo, aiv.hi, anc_side1) as u64);
                }
                t
            })
            .collect();
        let mut main = vec![
            iv.lo as u64,
            iv.hi as u64,
            members.len() as u64,
            per_vertex.iter().map(|t| t[1]).sum(),
            per_vertex.iter().map(|t| t[2]).sum(),
        ];
        for f in 0..anc.len() {
            main.push(per_vertex.iter().map(|t| t[3 + f]).sum());
        }
        mains.push(main);
        auxes.push(per_vertex);
    }
    TokenStream::new(mains, auxes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skipstream::run_sequential;

    #[test]
    fn production_constants_close_the_part_count_argument() {
        // clique trees: 2x/(c1-1) + c1 x/c2 + x/c3 + 1 <= x for x >= 4
        let (c1, c2, c3) = (9.0f64, 36.0, 4.0);
        for x in 4..200 {
            let x = x as f64;
            assert!(2.0 * x / (c1 - 1.0) + c1 * x / c2 + x / c3 + 1.0 <= x);
        }
        // split trees: both side sums stay strictly under a resp. b
        let (c1, c2) = (8.0f64, 36.0);
        for v in 4..200 {
            let v = v as f64;
            assert!(2.0 * v / c1 + (c1 + 1.0) * v / c2 + (c1 + 1.0) * v / c2 < v);
            assert!(2.0 * v / c1 + (c1 + 1.0) * v / c2 + 2.0 * v / c1 < v);
        }
    }

    #[test]
    fn k3_layer_on_k8_keeps_one_part() {
        // k=8 gives x=2; no counter can bind below x=5, so the whole
        // stream lands in a single part
        let g = crate::gen::complete(8);
        let universe: Vec<Vertex> = (1..=8).collect();
        let algo = K3LayerAlgo::new(8, 28, 3, 0, &K3Constraints::default(), 16);
        let stream = k3_layer_stream(&universe, &g, &[]);
        let (out, stats) = run_sequential(&algo, &stream).unwrap();
        assert_eq!(out, vec![vec![1, 8]]);
        assert_eq!(stats.aux_invocations, 0);
        assert_eq!(stats.main_reads, 8);
    }

    #[test]
    fn k3_layer_singleton_universe() {
        let g = crate::gen::complete(1);
        let algo = K3LayerAlgo::new(1, 0, 3, 0, &K3Constraints::default(), 16);
        let stream = k3_layer_stream(&[1], &g, &[]);
        let (out, _) = run_sequential(&algo, &stream).unwrap();
        assert_eq!(out, vec![vec![1, 1]]);
    }

    #[test]
    fn k3_layer_closes_on_size_when_x_exceeds_c3() {
        // k=243 => x=7 > c3=4: Conssz = ceil(4*243/7) = 139 binds
        let k = 243u64;
        let algo = K3LayerAlgo::new(k, 0, 3, 0, &K3Constraints::default(), 32);
        let mains: Vec<Token> = (1..=k).map(|v| vec![v, 0]).collect();
        let stream = TokenStream::without_auxes(mains);
        let (out, _) = run_sequential(&algo, &stream).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], vec![1, 139]);
        assert_eq!(out[1], vec![140, 243]);
        assert!(out.len() as u64 <= algo.x);
    }

    #[test]
    fn k3_layer_poisons_on_descending_stream() {
        let algo = K3LayerAlgo::new(3, 3, 3, 0, &K3Constraints::default(), 16);
        let stream = TokenStream::without_auxes(vec![vec![2, 1], vec![1, 1], vec![3, 1]]);
        // the machine halts as soon as it sees the order violation,
        // without emitting any interval
        let (out, stats) = run_sequential(&algo, &stream).unwrap();
        assert!(out.is_empty());
        assert_eq!(stats.main_reads, 2);
    }

    #[test]
    fn balance_algo_uniform_degrees() {
        // all degrees equal, M = k: every interval has length 2*ceil(M/k)=2
        let k = 6u64;
        let algo = BalanceAlgo::new(k, 6 * 5, 6, 16);
        let mains: Vec<Token> = (1..=k).map(|v| vec![v, 5]).collect();
        let (out, stats) = run_sequential(&algo, &TokenStream::without_auxes(mains)).unwrap();
        assert_eq!(stats.max_writes_between_main_reads, 1);
        for (i, t) in out.iter().enumerate() {
            let lo = 2 * i as u64 + 1;
            assert_eq!(t, &vec![i as u64 + 1, lo, lo + 1]);
        }
        // all M message slots are covered
        assert!(out.last().unwrap()[2] >= 6);
    }

    #[test]
    fn balance_algo_skips_low_degree_vertices() {
        // degrees (1, 9, 9, 9): mu = 7, vertex 1 below mu/2 gets the
        // empty interval
        let algo = BalanceAlgo::new(4, 28, 4, 16);
        let mains = vec![vec![1, 1], vec![2, 9], vec![3, 9], vec![4, 9]];
        let (out, _) = run_sequential(&algo, &TokenStream::without_auxes(mains)).unwrap();
        assert_eq!(out[0], vec![1, 1, 0]); // empty
        let l = 2 * ceil_div(4 * 9, 28);
        assert_eq!(out[1], vec![2, 1, l]);
        let covered = out.iter().map(|t| t[2].saturating_sub(t[1]) + 1).max().unwrap();
        assert!(covered >= 1);
        // allocation covers all M items
        assert!(out.last().unwrap()[2] >= 4);
    }

    #[test]
    fn balance_algo_zero_items() {
        let algo = BalanceAlgo::new(3, 9, 0, 16);
        let mains = vec![vec![1, 3], vec![2, 3], vec![3, 3]];
        let (out, _) = run_sequential(&algo, &TokenStream::without_auxes(mains)).unwrap();
        for t in out {
            assert!(t[2] < t[1], "interval must be empty when M = 0");
        }
    }

    #[test]
    fn split_layer_skips_everything_when_nothing_overflows() {
        let algo = SplitLayerAlgo::with_thresholds([100, 100, 100], 0, 0, true, (1, 9), 3, 4, 16);
        let mains = vec![
            vec![1, 3, 3, 5, 0],
            vec![4, 6, 3, 5, 0],
            vec![7, 9, 3, 5, 0],
        ];
        let auxes = vec![
            (1..=3u64).map(|v| vec![v, 2, 0]).collect(),
            (4..=6u64).map(|v| vec![v, 2, 0]).collect(),
            (7..=9u64).map(|v| vec![v, 2, 0]).collect(),
        ];
        let (out, stats) = run_sequential(&algo, &TokenStream::new(mains, auxes)).unwrap();
        assert_eq!(stats.aux_invocations, 0);
        assert_eq!(out, vec![vec![1, 9]]);
    }

    #[test]
    fn split_layer_expands_once_and_closes_between_aux_2_and_3() {
        // single aggregate of 3 auxiliaries; threshold admits two of them
        let algo = SplitLayerAlgo::with_thresholds([4, 100, 100], 0, 0, true, (1, 3), 1, 4, 16);
        let mains = vec![vec![1, 3, 3, 6, 0]];
        let auxes = vec![(1..=3u64).map(|v| vec![v, 2, 0]).collect()];
        let (out, stats) = run_sequential(&algo, &TokenStream::new(mains, auxes)).unwrap();
        assert_eq!(stats.aux_invocations, 1);
        assert_eq!(out, vec![vec![1, 2], vec![3, 3]]);
    }

    #[test]
    fn split_layer_stream_aggregates_interval_sums() {
        use std::collections::BTreeSet;
        let v1: BTreeSet<Vertex> = [1, 2].into_iter().collect();
        let v2: BTreeSet<Vertex> = [3, 4].into_iter().collect();
        let e1: BTreeSet<_> = [(1, 2)].into_iter().collect();
        let e2: BTreeSet<_> = [(3, 4)].into_iter().collect();
        let e12: BTreeSet<_> = [(1, 3), (2, 4)].into_iter().collect();
        let sg = SplitGraph::new(v1, v2, e1, e2, e12).unwrap();
        let sigma = [Interval { lo: 3, hi: 4 }];
        let stream = split_layer_stream(&sg, &sigma, false, &[], 1);
        assert_eq!(stream.mains.len(), 1);
        // two members, each one edge into V1 and one into V2
        assert_eq!(stream.mains[0], vec![3, 4, 2, 2, 2]);
        assert_eq!(stream.auxes[0].len(), 2);
        assert_eq!(stream.auxes[0][0], vec![3, 1, 1]);
    }
}
