//! Deterministic graph generators. Random graphs use SplitMix64 with the
//! standard constants so an identical (kind, params, seed) always yields an
//! identical edge set, independent of platform.

use crate::graph::{Graph, Vertex};

/// SplitMix64: gamma 0x9E3779B97F4A7C15, mix constants
/// 0xBF58476D1CE4E5B9 / 0x94D049BB133111EB.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53-bit precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in 0..bound (bound > 0), by rejection.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % bound;
            }
        }
    }
}

pub fn complete(n: usize) -> Graph {
    let mut g = Graph::new(n);
    for u in 1..=n as Vertex {
        for v in (u + 1)..=n as Vertex {
            g.add_edge(u, v).unwrap();
        }
    }
    g
}

/// K_{a,b}: sides 1..=a and a+1..=a+b.
pub fn complete_bipartite(a: usize, b: usize) -> Graph {
    let mut g = Graph::new(a + b);
    for u in 1..=a as Vertex {
        for v in (a as Vertex + 1)..=(a + b) as Vertex {
            g.add_edge(u, v).unwrap();
        }
    }
    g
}

/// G(n, p): edge (u, v), u < v in ascending order, kept when the next
/// SplitMix64 draw is below p.
pub fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = SplitMix64::new(seed);
    let mut g = Graph::new(n);
    for u in 1..=n as Vertex {
        for v in (u + 1)..=n as Vertex {
            if rng.next_f64() < p {
                g.add_edge(u, v).unwrap();
            }
        }
    }
    g
}

/// Two disjoint K_c joined by the single bridge (c, c+1).
pub fn bridged_cliques(c: usize) -> Graph {
    let mut g = Graph::new(2 * c);
    for base in [0usize, c] {
        for i in 1..=c {
            for j in (i + 1)..=c {
                g.add_edge((base + i) as Vertex, (base + j) as Vertex).unwrap();
            }
        }
    }
    g.add_edge(c as Vertex, (c + 1) as Vertex).unwrap();
    g
}

/// Two K_c sharing a common K_s (vertices 1..=s are shared).
pub fn glued_cliques(c: usize, s: usize) -> Graph {
    assert!(s < c);
    let n = 2 * c - s;
    let mut g = Graph::new(n);
    let first: Vec<Vertex> = (1..=c as Vertex).collect();
    let second: Vec<Vertex> = (1..=s as Vertex)
        .chain((c as Vertex + 1)..=(n as Vertex))
        .collect();
    for side in [&first, &second] {
        for i in 0..side.len() {
            for j in (i + 1)..side.len() {
                g.add_edge(side[i], side[j]).unwrap();
            }
        }
    }
    g
}

/// Petersen graph: outer 5-cycle 1..=5, inner pentagram 6..=10, spokes.
pub fn petersen() -> Graph {
    let mut g = Graph::new(10);
    for i in 0..5u32 {
        g.add_edge(i + 1, (i + 1) % 5 + 1).unwrap();
        g.add_edge(i + 6, (i + 2) % 5 + 6).unwrap();
        g.add_edge(i + 1, i + 6).unwrap();
    }
    g
}

/// Wheel W_r: hub vertex 1 plus a cycle on 2..=r+1.
pub fn wheel(r: usize) -> Graph {
    assert!(r >= 3);
    let mut g = Graph::new(r + 1);
    for i in 0..r as Vertex {
        let a = 2 + i;
        let b = 2 + (i + 1) % r as Vertex;
        g.add_edge(a, b).unwrap();
        g.add_edge(1, a).unwrap();
    }
    g
}

/// Path on n vertices.
pub fn path(n: usize) -> Graph {
    let mut g = Graph::new(n);
    for u in 1..n as Vertex {
        g.add_edge(u, u + 1).unwrap();
    }
    g
}

/// Star: center 1, leaves 2..=n.
pub fn star(leaves: usize) -> Graph {
    let mut g = Graph::new(leaves + 1);
    for v in 2..=(leaves + 1) as Vertex {
        g.add_edge(1, v).unwrap();
    }
    g
}
