//! End-to-end and property-based checks that cut across modules.

use congestlab::expander::{standalone_cluster, DeltaRule};
use congestlab::gen;
use congestlab::graph::{Graph, Vertex};
use congestlab::harness::{run_experiment, ExperimentConfig};
use congestlab::listing::cliques::{list_kp, list_kp_in_cluster};
use congestlab::listing::ListingParams;
use proptest::prelude::*;
use std::collections::BTreeSet;

fn arb_graph() -> impl Strategy<Value = Graph> {
    (2usize..14, 0.0f64..1.0, any::<u64>())
        .prop_map(|(n, d, seed)| gen::gnp(n, d, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Clique listing by brute force is invariant under relabeling
    /// followed by normalization.
    #[test]
    fn oracle_is_relabeling_invariant(g in arb_graph(), shift in 1u32..13) {
        let n = g.n() as u32;
        let relabel = |v: Vertex| -> Vertex { (v + shift - 1) % n + 1 };
        let mut h = Graph::new(g.n());
        for (u, v) in g.edges() {
            h.add_edge(relabel(u), relabel(v)).unwrap();
        }
        for p in 3..=4usize {
            let want: BTreeSet<Vec<Vertex>> = g
                .brute_force_cliques(p)
                .into_iter()
                .map(|c| {
                    let mut c: Vec<Vertex> = c.into_iter().map(relabel).collect();
                    c.sort();
                    c
                })
                .collect();
            let got: BTreeSet<Vec<Vertex>> =
                h.brute_force_cliques(p).into_iter().collect();
            prop_assert_eq!(want, got);
        }
    }

    /// Parse of a rendered edge list reproduces the graph.
    #[test]
    fn edge_list_round_trips(g in arb_graph()) {
        let h = Graph::parse(&g.to_edge_list()).unwrap();
        prop_assert_eq!(g, h);
    }

    /// The exact conductance identity: phi * min-volume equals the
    /// boundary on the returned witness, in rational arithmetic.
    #[test]
    fn conductance_witness_identity(g in arb_graph()) {
        if g.active_vertices().len() < 2 {
            return Ok(());
        }
        let r = congestlab::conductance::conductance(&g).unwrap();
        let cm = congestlab::graph::CutMetrics::of(&g, &r.witness);
        let total = 2 * g.m() as u64;
        let denom = cm.volume.min(total - cm.volume);
        if denom > 0 {
            prop_assert_eq!(
                cm.conductance.num() as u128 * denom as u128,
                cm.boundary as u128 * cm.conductance.den() as u128
            );
        }
    }

    /// Whole-pipeline triangle listing agrees with the oracle on random
    /// inputs, not just the fixed corpus.
    #[test]
    fn random_graphs_list_triangles_exactly(n in 4usize..26, d in 0.1f64..0.9, seed in any::<u64>()) {
        let g = gen::gnp(n, d, seed);
        let r = list_kp(&g, 3, &ListingParams::for_p(3)).unwrap();
        prop_assert_eq!(r.cliques, g.brute_force_cliques(3));
    }
}

#[test]
fn mixed_gadget_union_matches_structural_oracle() {
    // K8 core as V_list, outside K4 on 9..=12, full bipartite crossing:
    // the in-cluster listing must produce exactly the 4-cliques with at
    // least two core vertices
    let core = gen::complete(8);
    let mut c = standalone_cluster(&core, DeltaRule::K3, 12);
    for u in 9..=12u32 {
        for v in 1..=8u32 {
            c.imports.ebar.insert((u, v));
        }
    }
    for u in 9..=12u32 {
        for w in 9..=12u32 {
            if u != w {
                c.imports.eprime.insert((u, w));
                c.imports.eprime_holder.insert((u, w), u - 8);
            }
        }
    }
    for u in 9..=12u32 {
        c.imports.sentdeg.insert(u, (1, 11));
    }
    let (listed, _) = list_kp_in_cluster(&c, 4, &ListingParams::for_p(4)).unwrap();

    let mut combined = Graph::new(12);
    for (u, v) in core.edges() {
        combined.add_edge(u, v).unwrap();
    }
    for &(u, v) in c.imports.ebar.iter().chain(c.imports.eprime.iter()) {
        combined.add_edge(u, v).unwrap();
    }
    let expected: Vec<Vec<Vertex>> = combined
        .brute_force_cliques(4)
        .into_iter()
        .filter(|cl| cl.iter().filter(|&&v| v <= 8).count() >= 2)
        .collect();
    assert_eq!(listed, expected);
}

#[test]
fn experiment_outputs_are_byte_identical_across_runs() {
    let cfg = ExperimentConfig::new("gen:gnp:24:0.5:3".into(), 3);
    let dir_a = std::env::temp_dir().join("congestlab-accept-a");
    let dir_b = std::env::temp_dir().join("congestlab-accept-b");
    for d in [&dir_a, &dir_b] {
        let _ = std::fs::remove_dir_all(d);
    }
    assert!(run_experiment(&cfg, Some(&dir_a)).unwrap());
    assert!(run_experiment(&cfg, Some(&dir_b)).unwrap());
    for name in ["cliques.txt", "attribution.txt", "accounting.json", "trace.log", "report.txt"] {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn wheel_corpus_matches_oracle_for_all_p() {
    for r in 5..=9 {
        let g = gen::wheel(r);
        for p in 3..=5 {
            let res = list_kp(&g, p, &ListingParams::for_p(p)).unwrap();
            assert_eq!(res.cliques, g.brute_force_cliques(p), "W{r} p={p}");
        }
    }
}
