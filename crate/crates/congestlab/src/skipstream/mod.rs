//! Skip-stream algorithms: streaming state machines over main tokens that
//! summarize runs of auxiliary tokens, with hard budgets on auxiliary
//! expansions (q), writes between consecutive main reads (y), token width
//! (L bits), output count, and state size. The sequential executor here is
//! the ground truth the distributed simulation must match bit for bit.

pub mod distributed;

use crate::graph::Vertex;
use std::collections::VecDeque;
use std::fmt;

pub type Token = Vec<u64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkipParams {
    /// Max token width in bits.
    pub l_bits: u64,
    /// Number of main tokens in an admissible stream.
    pub n_in: u64,
    /// Max output tokens.
    pub n_out: u64,
    /// Max total AUX invocations.
    pub q: u64,
    /// Max WRITEs between reads of consecutive main tokens.
    pub y: u64,
    /// Bits per token field, for the L check.
    pub field_bits: u64,
    /// State cap: the "polynomial in L" space bound, in bits.
    pub state_cap_bits: u64,
}

impl SkipParams {
    /// Default state cap 64 * L^2 bits.
    pub fn with_default_cap(l_bits: u64, n_in: u64, n_out: u64, q: u64, y: u64, field_bits: u64) -> Self {
        SkipParams {
            l_bits,
            n_in,
            n_out,
            q,
            y,
            field_bits,
            state_cap_bits: 64 * l_bits * l_bits,
        }
    }

    pub fn token_bits(&self, t: &Token) -> u64 {
        t.len() as u64 * self.field_bits
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Read,
    Aux,
    Write(Token),
    Halt,
}

/// A deterministic skip-stream machine. State is an opaque word blob the
/// executor meters and ships; `step` is called with `Some(token)` exactly
/// when the previous operation was a satisfied `Read`.
pub trait SkipAlgo {
    fn params(&self) -> &SkipParams;
    fn init_state(&self) -> Vec<u64>;
    fn step(&self, state: &mut Vec<u64>, read: Option<&Token>) -> Op;
}

/// Main tokens plus their co-located auxiliary runs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream {
    pub mains: Vec<Token>,
    pub auxes: Vec<Vec<Token>>,
}

impl TokenStream {
    pub fn new(mains: Vec<Token>, auxes: Vec<Vec<Token>>) -> TokenStream {
        assert_eq!(mains.len(), auxes.len(), "one aux run per main token");
        TokenStream { mains, auxes }
    }

    pub fn without_auxes(mains: Vec<Token>) -> TokenStream {
        let auxes = vec![Vec::new(); mains.len()];
        TokenStream { mains, auxes }
    }

    pub fn len(&self) -> usize {
        self.mains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mains.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BudgetViolation {
    TokenTooWide { after_mains: u64, bits: u64, l: u64 },
    StateTooBig { bits: u64, cap: u64 },
    AuxExceeded { q: u64 },
    AuxBeforeFirstMain,
    WritesExceeded { y: u64, after_mains: u64 },
    OutputsExceeded { n_out: u64 },
    ReadPastEnd { mains_read: u64 },
    StreamMismatch { declared_n_in: u64, stream_len: u64 },
}

impl fmt::Display for BudgetViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BudgetViolation::TokenTooWide { after_mains, bits, l } => {
                write!(f, "token of {bits} bits exceeds L={l} after {after_mains} main reads")
            }
            BudgetViolation::StateTooBig { bits, cap } => {
                write!(f, "state of {bits} bits exceeds cap {cap}")
            }
            BudgetViolation::AuxExceeded { q } => write!(f, "AUX budget q={q} exceeded"),
            BudgetViolation::AuxBeforeFirstMain => write!(f, "AUX before any main token was read"),
            BudgetViolation::WritesExceeded { y, after_mains } => {
                write!(f, "write budget y={y} exceeded after {after_mains} main reads")
            }
            BudgetViolation::OutputsExceeded { n_out } => {
                write!(f, "output budget N_out={n_out} exceeded")
            }
            BudgetViolation::ReadPastEnd { mains_read } => {
                write!(f, "READ past end of stream after {mains_read} mains")
            }
            BudgetViolation::StreamMismatch { declared_n_in, stream_len } => {
                write!(f, "stream has {stream_len} mains, algorithm declares N_in={declared_n_in}")
            }
        }
    }
}

impl std::error::Error for BudgetViolation {}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UsageStats {
    pub reads_total: u64,
    pub main_reads: u64,
    pub aux_invocations: u64,
    pub writes: u64,
    pub max_writes_between_main_reads: u64,
    pub max_state_bits: u64,
}

/// The budget bookkeeping that travels with a machine between vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shell {
    pub machine: Vec<u64>,
    pub write_seq: u64,
    pub window_writes: u64,
    pub aux_used: u64,
    pub main_reads: u64,
    pub reads_total: u64,
    pub max_window: u64,
    pub max_state_bits: u64,
    /// Origin vertex and in-interval index of the last-read main token.
    pub last_main: Option<(Vertex, u32)>,
    /// An unsatisfied Read request is outstanding.
    pub awaiting_read: bool,
    pub halted: bool,
}

impl Shell {
    pub fn new(machine: Vec<u64>) -> Shell {
        Shell {
            machine,
            write_seq: 0,
            window_writes: 0,
            aux_used: 0,
            main_reads: 0,
            reads_total: 0,
            max_window: 0,
            max_state_bits: 0,
            last_main: None,
            awaiting_read: false,
            halted: false,
        }
    }

    const FIXED: usize = 11;

    pub fn encode(&self) -> Vec<u64> {
        let (lm_o, lm_i) = self.last_main.map_or((0, 0), |(o, i)| (o as u64, i as u64 + 1));
        let mut w = vec![
            self.write_seq,
            self.window_writes,
            self.aux_used,
            self.main_reads,
            self.reads_total,
            self.max_window,
            self.max_state_bits,
            lm_o,
            lm_i,
            self.awaiting_read as u64,
            self.halted as u64,
        ];
        w.extend(self.machine.iter().copied());
        w
    }

    pub fn decode(words: &[u64]) -> Shell {
        assert!(words.len() >= Self::FIXED, "truncated shell");
        let last_main = if words[8] == 0 {
            None
        } else {
            Some((words[7] as Vertex, (words[8] - 1) as u32))
        };
        Shell {
            machine: words[Self::FIXED..].to_vec(),
            write_seq: words[0],
            window_writes: words[1],
            aux_used: words[2],
            main_reads: words[3],
            reads_total: words[4],
            max_window: words[5],
            max_state_bits: words[6],
            last_main,
            awaiting_read: words[9] == 1,
            halted: words[10] == 1,
        }
    }

    pub fn stats(&self) -> UsageStats {
        UsageStats {
            reads_total: self.reads_total,
            main_reads: self.main_reads,
            aux_invocations: self.aux_used,
            writes: self.write_seq,
            max_writes_between_main_reads: self.max_window.max(self.window_writes),
            max_state_bits: self.max_state_bits,
        }
    }

    fn after_step(&mut self, p: &SkipParams) -> Result<(), BudgetViolation> {
        let bits = self.machine.len() as u64 * 64;
        self.max_state_bits = self.max_state_bits.max(bits);
        if bits > p.state_cap_bits {
            return Err(BudgetViolation::StateTooBig { bits, cap: p.state_cap_bits });
        }
        Ok(())
    }

    fn on_main_read(&mut self, p: &SkipParams, t: &Token, origin: Option<(Vertex, u32)>) -> Result<(), BudgetViolation> {
        let bits = p.token_bits(t);
        if bits > p.l_bits {
            return Err(BudgetViolation::TokenTooWide { after_mains: self.main_reads, bits, l: p.l_bits });
        }
        self.max_window = self.max_window.max(self.window_writes);
        self.window_writes = 0;
        self.main_reads += 1;
        self.reads_total += 1;
        self.last_main = origin;
        Ok(())
    }

    fn on_aux_read(&mut self, p: &SkipParams, t: &Token) -> Result<(), BudgetViolation> {
        let bits = p.token_bits(t);
        if bits > p.l_bits {
            return Err(BudgetViolation::TokenTooWide { after_mains: self.main_reads, bits, l: p.l_bits });
        }
        self.reads_total += 1;
        Ok(())
    }

    fn on_write(&mut self, p: &SkipParams, t: &Token) -> Result<(), BudgetViolation> {
        let bits = p.token_bits(t);
        if bits > p.l_bits {
            return Err(BudgetViolation::TokenTooWide { after_mains: self.main_reads, bits, l: p.l_bits });
        }
        self.write_seq += 1;
        self.window_writes += 1;
        if self.write_seq > p.n_out {
            return Err(BudgetViolation::OutputsExceeded { n_out: p.n_out });
        }
        if self.window_writes > p.y {
            return Err(BudgetViolation::WritesExceeded { y: p.y, after_mains: self.main_reads });
        }
        Ok(())
    }

    fn on_aux_op(&mut self, p: &SkipParams) -> Result<(), BudgetViolation> {
        if self.last_main.is_none() {
            return Err(BudgetViolation::AuxBeforeFirstMain);
        }
        self.aux_used += 1;
        if self.aux_used > p.q {
            return Err(BudgetViolation::AuxExceeded { q: p.q });
        }
        Ok(())
    }
}

/// Execute a skip-stream algorithm on an assembled stream, enforcing every
/// budget. Outputs come back in write order.
pub fn run_sequential(
    algo: &dyn SkipAlgo,
    stream: &TokenStream,
) -> Result<(Vec<Token>, UsageStats), BudgetViolation> {
    let p = algo.params().clone();
    if p.n_in != stream.len() as u64 {
        return Err(BudgetViolation::StreamMismatch {
            declared_n_in: p.n_in,
            stream_len: stream.len() as u64,
        });
    }
    let mut shell = Shell::new(algo.init_state());
    let mut pending: VecDeque<Token> = VecDeque::new();
    let mut next_main = 0usize;
    let mut outputs = Vec::new();
    let mut feed: Option<Token> = None;
    loop {
        if shell.awaiting_read {
            if let Some(t) = pending.pop_front() {
                shell.on_aux_read(&p, &t)?;
                feed = Some(t);
            } else if next_main < stream.mains.len() {
                let t = stream.mains[next_main].clone();
                shell.on_main_read(&p, &t, Some((0, next_main as u32)))?;
                next_main += 1;
                feed = Some(t);
            } else {
                return Err(BudgetViolation::ReadPastEnd { mains_read: shell.main_reads });
            }
            shell.awaiting_read = false;
        }
        let op = algo.step(&mut shell.machine, feed.take().as_ref());
        shell.after_step(&p)?;
        match op {
            Op::Read => shell.awaiting_read = true,
            Op::Aux => {
                shell.on_aux_op(&p)?;
                let (_, idx) = shell.last_main.unwrap();
                for t in stream.auxes[idx as usize].iter().rev() {
                    pending.push_front(t.clone());
                }
            }
            Op::Write(t) => {
                shell.on_write(&p, &t)?;
                outputs.push(t);
            }
            Op::Halt => {
                shell.max_window = shell.max_window.max(shell.window_writes);
                shell.halted = true;
                break;
            }
        }
    }
    Ok((outputs, shell.stats()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainError {
    PoolTooSmall { needed: usize, pool: usize },
}

impl fmt::Display for ChainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainError::PoolTooSmall { needed, pool } => {
                write!(f, "vertex chain needs {needed} members, pool has {pool}")
            }
        }
    }
}

impl std::error::Error for ChainError {}

/// A vertex chain: member i is responsible for the i-th rank block of beta
/// targets. Locally computable from (targets, beta, pool) alone.
#[derive(Debug, Clone)]
pub struct VertexChain {
    pub targets: Vec<Vertex>,
    pub beta: usize,
    pub members: Vec<Vertex>,
}

impl VertexChain {
    pub fn new(targets: Vec<Vertex>, beta: usize, pool: &[Vertex]) -> Result<VertexChain, ChainError> {
        assert!(beta >= 1);
        let needed = targets.len().div_ceil(beta);
        if pool.len() < needed {
            return Err(ChainError::PoolTooSmall { needed, pool: pool.len() });
        }
        Ok(VertexChain { targets, beta, members: pool[..needed].to_vec() })
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    /// Member responsible for target `u` (must be a target).
    pub fn member_for(&self, u: Vertex) -> Vertex {
        let rank = self.targets.binary_search(&u).expect("not a chain target");
        self.members[rank / self.beta]
    }

    /// Targets assigned to member index `i` (0-based), contiguously ranked.
    pub fn block(&self, i: usize) -> &[Vertex] {
        let lo = i * self.beta;
        let hi = ((i + 1) * self.beta).min(self.targets.len());
        &self.targets[lo..hi]
    }
}

/// Copies every main token to the output: the identity pass.
pub struct CopyAlgo {
    params: SkipParams,
}

impl CopyAlgo {
    pub fn new(n_in: u64, field_bits: u64, max_fields: u64) -> CopyAlgo {
        CopyAlgo {
            params: SkipParams::with_default_cap(
                max_fields * field_bits,
                n_in,
                n_in,
                0,
                1,
                field_bits,
            ),
        }
    }
}

impl SkipAlgo for CopyAlgo {
    fn params(&self) -> &SkipParams {
        &self.params
    }

    fn init_state(&self) -> Vec<u64> {
        vec![0, 0] // [mains read, holding flag] + held token appended
    }

    fn step(&self, state: &mut Vec<u64>, read: Option<&Token>) -> Op {
        if let Some(t) = read {
            state[0] += 1;
            state[1] = 1;
            state.truncate(2);
            state.extend(t.iter().copied());
            return Op::Write(t.clone());
        }
        if state[1] == 1 {
            state[1] = 0;
            state.truncate(2);
        }
        if state[0] >= self.params.n_in {
            Op::Halt
        } else {
            Op::Read
        }
    }
}

/// Halts before touching the stream.
pub struct HaltAlgo {
    params: SkipParams,
}

impl HaltAlgo {
    pub fn new(n_in: u64) -> HaltAlgo {
        HaltAlgo { params: SkipParams::with_default_cap(64, n_in, 0, 0, 0, 16) }
    }
}

impl SkipAlgo for HaltAlgo {
    fn params(&self) -> &SkipParams {
        &self.params
    }

    fn init_state(&self) -> Vec<u64> {
        vec![]
    }

    fn step(&self, _state: &mut Vec<u64>, _read: Option<&Token>) -> Op {
        Op::Halt
    }
}

/// Test machine with a real AUX path: each main is [idx, count, sum]; if
/// sum exceeds the threshold the machine expands it and writes every aux
/// token [idx, sub, value] whose value exceeds the threshold.
pub struct ThresholdAlgo {
    params: SkipParams,
    pub threshold: u64,
}

impl ThresholdAlgo {
    pub fn new(n_in: u64, threshold: u64, max_aux: u64) -> ThresholdAlgo {
        ThresholdAlgo {
            params: SkipParams::with_default_cap(3 * 16, n_in, n_in * max_aux, n_in, max_aux.max(1), 16),
            threshold,
        }
    }
}

impl SkipAlgo for ThresholdAlgo {
    fn params(&self) -> &SkipParams {
        &self.params
    }

    fn init_state(&self) -> Vec<u64> {
        // [mains_read, aux_remaining, pend_write_flag, pw0, pw1, pw2]
        vec![0, 0, 0, 0, 0, 0]
    }

    fn step(&self, state: &mut Vec<u64>, read: Option<&Token>) -> Op {
        if state[2] == 1 {
            state[2] = 0;
            return Op::Write(vec![state[3], state[4], state[5]]);
        }
        match read {
            Some(t) if state[1] > 0 => {
                // aux token [idx, sub, value]
                state[1] -= 1;
                if t[2] > self.threshold {
                    state[2] = 1;
                    state[3] = t[0];
                    state[4] = t[1];
                    state[5] = t[2];
                    return self.step(state, None);
                }
                self.step(state, None)
            }
            Some(t) => {
                // main token [idx, count, sum]
                state[0] += 1;
                if t[2] > self.threshold && t[1] > 0 {
                    state[1] = t[1];
                    return Op::Aux;
                }
                self.step(state, None)
            }
            None => {
                if state[1] > 0 {
                    Op::Read
                } else if state[0] >= self.params.n_in {
                    Op::Halt
                } else {
                    Op::Read
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halt_immediately_is_all_zero() {
        let algo = HaltAlgo::new(3);
        let stream = TokenStream::without_auxes(vec![vec![1], vec![2], vec![3]]);
        let (out, stats) = run_sequential(&algo, &stream).unwrap();
        assert!(out.is_empty());
        assert_eq!(stats.reads_total, 0);
        assert_eq!(stats.aux_invocations, 0);
        assert_eq!(stats.writes, 0);
    }

    #[test]
    fn copy_is_identity_with_zero_aux() {
        let mains: Vec<Token> = (1..=5u64).map(|i| vec![i, 10 * i]).collect();
        let algo = CopyAlgo::new(5, 16, 2);
        let stream = TokenStream::without_auxes(mains.clone());
        let (out, stats) = run_sequential(&algo, &stream).unwrap();
        assert_eq!(out, mains);
        assert_eq!(stats.aux_invocations, 0);
        assert_eq!(stats.main_reads, 5);
        assert_eq!(stats.max_writes_between_main_reads, 1);
    }

    #[test]
    fn threshold_machine_expands_only_heavy_mains() {
        // main 1 light, main 2 heavy with 3 auxes (two above threshold)
        let mains = vec![vec![1, 2, 3], vec![2, 3, 40]];
        let auxes = vec![
            vec![vec![1, 1, 1], vec![1, 2, 2]],
            vec![vec![2, 1, 30], vec![2, 2, 4], vec![2, 3, 6]],
        ];
        let algo = ThresholdAlgo::new(2, 5, 3);
        let stream = TokenStream::new(mains, auxes);
        let (out, stats) = run_sequential(&algo, &stream).unwrap();
        assert_eq!(out, vec![vec![2, 1, 30], vec![2, 3, 6]]);
        assert_eq!(stats.aux_invocations, 1);
        assert_eq!(stats.reads_total, 2 + 3);
    }

    #[test]
    fn read_past_end_is_reported() {
        let algo = CopyAlgo::new(6, 16, 2);
        let stream = TokenStream::without_auxes(vec![vec![1]; 6]);
        // lie about the stream: shorter than declared
        let short = TokenStream::without_auxes(vec![vec![1]; 4]);
        assert!(matches!(
            run_sequential(&algo, &short),
            Err(BudgetViolation::StreamMismatch { .. })
        ));
        let _ = run_sequential(&algo, &stream).unwrap();
    }

    #[test]
    fn budget_violations_are_named() {
        struct Chatty(SkipParams);
        impl SkipAlgo for Chatty {
            fn params(&self) -> &SkipParams {
                &self.0
            }
            fn init_state(&self) -> Vec<u64> {
                vec![0]
            }
            fn step(&self, state: &mut Vec<u64>, _read: Option<&Token>) -> Op {
                state[0] += 1;
                if state[0] == 1 {
                    Op::Read
                } else {
                    Op::Write(vec![state[0]])
                }
            }
        }
        let p = SkipParams::with_default_cap(16, 1, 100, 0, 2, 16);
        let stream = TokenStream::without_auxes(vec![vec![9]]);
        match run_sequential(&Chatty(p), &stream) {
            Err(BudgetViolation::WritesExceeded { y: 2, after_mains: 1 }) => {}
            other => panic!("expected write budget violation, got {other:?}"),
        }
    }

    #[test]
    fn vertex_chain_examples() {
        // targets 1..10, beta 5, pool (7, 9)
        let chain = VertexChain::new((1..=10).collect(), 5, &[7, 9]).unwrap();
        assert_eq!(chain.member_count(), 2);
        assert_eq!(chain.block(0), &[1, 2, 3, 4, 5]);
        assert_eq!(chain.block(1), &[6, 7, 8, 9, 10]);
        assert_eq!(chain.member_for(3), 7);
        assert_eq!(chain.member_for(6), 9);

        let single = VertexChain::new(vec![4], 3, &[11]).unwrap();
        assert_eq!(single.member_count(), 1);
        assert_eq!(single.block(0), &[4]);

        let thirds = VertexChain::new((1..=9).collect(), 3, &[2, 5, 8]).unwrap();
        assert_eq!(thirds.member_count(), 3);
        for i in 0..3 {
            assert_eq!(thirds.block(i).len(), 3);
        }

        assert!(VertexChain::new((1..=10).collect(), 2, &[1, 2]).is_err());
    }
}
