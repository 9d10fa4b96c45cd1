//! Graph conductance: exact minimization by cut enumeration for small
//! graphs, and a certified spectral lower bound with a sweep-cut upper
//! bound above the enumeration cutoff.

use crate::graph::{CutMetrics, Graph, Vertex};
use crate::rational::Ratio;
use std::collections::BTreeSet;

/// Components of at most this many active vertices get exact conductance
/// (2^19 cut classes at the limit).
pub const EXACT_CUTOFF: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondMode {
    Exact,
    Spectral,
    Disconnected,
}

#[derive(Debug, Clone)]
pub struct ConductanceReport {
    pub mode: CondMode,
    /// Exact minimum conductance when `mode == Exact`, else the best
    /// (sweep-cut) upper bound found; `0` when disconnected.
    pub upper: Ratio,
    /// Certified lower bound: equals `upper` in exact mode, `lambda2 / 2`
    /// (Cheeger) in spectral mode, `0` when disconnected.
    pub lower: f64,
    /// A cut attaining `upper` (a component when disconnected).
    pub witness: BTreeSet<Vertex>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CondError {
    TooSmall,
}

impl std::fmt::Display for CondError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CondError::TooSmall => write!(f, "conductance needs at least two active vertices"),
        }
    }
}

impl std::error::Error for CondError {}

/// Minimum conductance over all nontrivial cuts of the active vertex set.
pub fn conductance(g: &Graph) -> Result<ConductanceReport, CondError> {
    let comps = g.components();
    let active: BTreeSet<Vertex> = g.active_vertices();
    if active.len() < 2 {
        return Err(CondError::TooSmall);
    }
    if comps.len() > 1 {
        return Ok(ConductanceReport {
            mode: CondMode::Disconnected,
            upper: Ratio::ZERO,
            lower: 0.0,
            witness: comps[0].clone(),
        });
    }
    if active.len() <= EXACT_CUTOFF {
        let best = exact_sparsest_cut(g, &active);
        Ok(ConductanceReport {
            mode: CondMode::Exact,
            lower: best.conductance.as_f64(),
            upper: best.conductance,
            witness: best.cut,
        })
    } else {
        let (lambda2, sweep) = spectral_cut(g, &active);
        Ok(ConductanceReport {
            mode: CondMode::Spectral,
            lower: (lambda2 / 2.0).max(0.0),
            upper: sweep.conductance,
            witness: sweep.cut,
        })
    }
}

/// Exact minimizer of cut conductance by enumerating every cut class that
/// contains the lowest-numbered active vertex. Ties break toward the
/// lexicographically smallest membership mask.
pub fn exact_sparsest_cut(g: &Graph, active: &BTreeSet<Vertex>) -> CutMetrics {
    let verts: Vec<Vertex> = active.iter().copied().collect();
    let t = verts.len();
    assert!((2..=EXACT_CUTOFF).contains(&t));
    let idx_of = |v: Vertex| verts.binary_search(&v).unwrap();
    let mut adj_bits = vec![0u32; t];
    let mut deg = vec![0u64; t];
    for (i, &v) in verts.iter().enumerate() {
        deg[i] = g.degree(v) as u64;
        for u in g.neighbors(v) {
            adj_bits[i] |= 1 << idx_of(u);
        }
    }
    let total_vol: u64 = deg.iter().sum();
    let full: u32 = if t == 32 { u32::MAX } else { (1 << t) - 1 };
    let mut best: Option<(Ratio, u32, u64, u64)> = None;
    // every cut class has a unique representative containing vertex index 0
    let mut mask: u32 = 1;
    while mask <= full {
        if mask & 1 == 1 && mask != full {
            let mut vol = 0u64;
            let mut bnd = 0u64;
            let mut m = mask;
            while m != 0 {
                let i = m.trailing_zeros() as usize;
                m &= m - 1;
                vol += deg[i];
                bnd += (adj_bits[i] & !mask).count_ones() as u64;
            }
            let denom = vol.min(total_vol - vol);
            if denom > 0 {
                let phi = Ratio::new(bnd, denom);
                if best.as_ref().is_none_or(|(b, _, _, _)| phi < *b) {
                    best = Some((phi, mask, vol, bnd));
                }
            }
        }
        mask += 2; // masks without bit 0 are complements of ones with it
    }
    let (phi, mask, vol, bnd) = best.expect("connected graph with >=2 vertices has a cut");
    let cut: BTreeSet<Vertex> = verts
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, &v)| v)
        .collect();
    CutMetrics {
        cut,
        volume: vol,
        boundary: bnd,
        conductance: phi,
    }
}

/// `(lambda2, best sweep cut)` of the normalized Laplacian over `active`.
pub fn spectral_cut(g: &Graph, active: &BTreeSet<Vertex>) -> (f64, CutMetrics) {
    let verts: Vec<Vertex> = active.iter().copied().collect();
    let t = verts.len();
    let idx_of = |v: Vertex| verts.binary_search(&v).unwrap();
    let mut lap = vec![vec![0f64; t]; t];
    let deg: Vec<f64> = verts.iter().map(|&v| g.degree(v) as f64).collect();
    for i in 0..t {
        lap[i][i] = 1.0;
        for u in g.neighbors(verts[i]) {
            let j = idx_of(u);
            lap[i][j] -= 1.0 / (deg[i] * deg[j]).sqrt();
        }
    }
    let (eigvals, eigvecs) = jacobi_eigen(&mut lap);
    // index of second-smallest eigenvalue
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| eigvals[a].partial_cmp(&eigvals[b]).unwrap());
    let lambda2 = eigvals[order[1]];
    // Fiedler embedding y = D^{-1/2} x, swept in increasing order
    let fiedler: Vec<f64> = (0..t).map(|i| eigvecs[i][order[1]] / deg[i].sqrt()).collect();
    let mut sweep: Vec<usize> = (0..t).collect();
    sweep.sort_by(|&a, &b| {
        fiedler[a]
            .partial_cmp(&fiedler[b])
            .unwrap()
            .then(verts[a].cmp(&verts[b]))
    });
    let mut best: Option<CutMetrics> = None;
    let mut s: BTreeSet<Vertex> = BTreeSet::new();
    for &i in sweep.iter().take(t - 1) {
        s.insert(verts[i]);
        let cm = CutMetrics::of(g, &s);
        if best.as_ref().is_none_or(|b| cm.conductance < b.conductance) {
            best = Some(cm);
        }
    }
    (lambda2, best.expect("nonempty sweep"))
}

/// Cyclic Jacobi eigensolver for a symmetric matrix. Returns eigenvalues and
/// the orthogonal matrix of eigenvectors (column `k` pairs with value `k`).
#[allow(clippy::needless_range_loop)]
fn jacobi_eigen(a: &mut [Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0f64; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-14 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals = (0..n).map(|i| a[i][i]).collect();
    (vals, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_has_conductance_one() {
        let g = Graph::from_edges(3, &[(1, 2), (2, 3), (1, 3)]).unwrap();
        let r = conductance(&g).unwrap();
        assert_eq!(r.mode, CondMode::Exact);
        assert_eq!(r.upper, Ratio::ONE);
    }

    #[test]
    fn four_cycle_has_conductance_half() {
        let g = Graph::from_edges(4, &[(1, 2), (2, 3), (3, 4), (4, 1)]).unwrap();
        let r = conductance(&g).unwrap();
        assert_eq!(r.upper, Ratio::new(1, 2));
    }

    #[test]
    fn single_edge_has_conductance_one() {
        let g = Graph::from_edges(2, &[(1, 2)]).unwrap();
        let r = conductance(&g).unwrap();
        assert_eq!(r.upper, Ratio::ONE);
    }

    #[test]
    fn disconnected_graph_reports_zero_with_witness() {
        let g = Graph::from_edges(4, &[(1, 2), (3, 4)]).unwrap();
        let r = conductance(&g).unwrap();
        assert_eq!(r.mode, CondMode::Disconnected);
        assert!(r.upper.is_zero());
        assert_eq!(r.witness, [1, 2].into_iter().collect());
    }

    #[test]
    fn witness_identity_holds_exactly() {
        // phi(S) * min(vol(S), vol(rest)) == boundary(S), in exact arithmetic
        let g = crate::gen::gnp(12, 0.5, 7);
        for s_seed in 1u64..40 {
            let mut s = BTreeSet::new();
            let mut x = s_seed;
            for v in 1..=12u32 {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if x >> 63 == 1 {
                    s.insert(v);
                }
            }
            if s.is_empty() || s.len() == 12 {
                continue;
            }
            let cm = CutMetrics::of(&g, &s);
            let denom = cm.volume.min(2 * g.m() as u64 - cm.volume);
            if denom > 0 {
                assert_eq!(
                    cm.conductance.num() as u128 * denom as u128,
                    cm.boundary as u128 * cm.conductance.den() as u128
                );
            }
        }
    }

    #[test]
    fn exact_minimum_is_no_larger_than_any_enumerated_cut() {
        let g = crate::gen::gnp(10, 0.4, 3);
        if g.components().len() != 1 {
            return;
        }
        let r = conductance(&g).unwrap();
        let active = g.active_vertices();
        let verts: Vec<Vertex> = active.iter().copied().collect();
        for mask in 1u32..(1 << verts.len()) - 1 {
            let s: BTreeSet<Vertex> = verts
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &v)| v)
                .collect();
            let cm = CutMetrics::of(&g, &s);
            if !cm.conductance.is_zero() || g.boundary(&s) == 0 {
                assert!(r.upper <= cm.conductance);
            }
        }
        // returned witness attains the minimum
        assert_eq!(CutMetrics::of(&g, &r.witness).conductance, r.upper);
    }

    #[test]
    fn spectral_mode_bounds_bracket_truth_on_k30() {
        let g = crate::gen::complete(30);
        let r = conductance(&g).unwrap();
        assert_eq!(r.mode, CondMode::Spectral);
        // K30: phi = 15*15 / (15*29)
        let truth = Ratio::new(15 * 15, 15 * 29);
        assert!(r.upper >= truth);
        assert!(r.lower <= truth.as_f64() + 1e-9);
        assert!(r.lower > 0.2, "lambda2/2 of a complete graph is ~1/2");
    }
}
