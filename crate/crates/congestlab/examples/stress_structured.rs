// stress: multi-blob graphs with scaled thresholds so imports, bad sets,
// and the pairwise cover pass all engage
use congestlab::gen;
use congestlab::graph::Graph;
use congestlab::listing::cliques::list_kp;
use congestlab::listing::{ListingParams, Phase};

fn blobs(rng: &mut gen::SplitMix64) -> Graph {
    let b = 2 + rng.next_below(2) as usize; // 2..3 blobs
    let per = 8 + rng.next_below(8) as usize;
    let n = b * per;
    let mut g = Graph::new(n);
    for bi in 0..b {
        let base = (bi * per) as u32;
        let dens = 0.7 + 0.3 * rng.next_f64();
        for i in 1..=per as u32 {
            for j in (i + 1)..=per as u32 {
                if rng.next_f64() < dens {
                    g.add_edge(base + i, base + j).unwrap();
                }
            }
        }
    }
    // sparse cross edges
    let crossings = 1 + rng.next_below((n / 2) as u64) as usize;
    for _ in 0..crossings {
        let u = 1 + rng.next_below(n as u64) as u32;
        let v = 1 + rng.next_below(n as u64) as u32;
        if u != v {
            let _ = g.add_edge(u, v);
        }
    }
    g
}

fn main() {
    let mut rng = gen::SplitMix64::new(0x51AB1E);
    let mut fails = 0;
    let mut cluster_engaged = 0;
    for case in 0..200 {
        let g = blobs(&mut rng);
        for p in [3usize, 4, 5] {
            let mut params = ListingParams::for_p(p);
            params.thresh_scale = 0.01 + 0.15 * rng.next_f64();
            match list_kp(&g, p, &params) {
                Ok(r) => {
                    if r.attribution.values().any(|ph| matches!(ph, Phase::Cluster { .. })) {
                        cluster_engaged += 1;
                    }
                    let oracle = g.brute_force_cliques(p);
                    if r.cliques != oracle {
                        fails += 1;
                        println!(
                            "MISMATCH case={case} p={p} n={} m={} scale={:.3} listed={} oracle={}",
                            g.n(), g.m(), params.thresh_scale, r.cliques.len(), oracle.len()
                        );
                    }
                }
                Err(e) => {
                    fails += 1;
                    println!("ERROR case={case} p={p}: {e}");
                }
            }
        }
        if case % 50 == 49 {
            println!("... {} cases, cluster path engaged {} times", case + 1, cluster_engaged);
        }
    }
    println!("structured stress done, {fails} failures, cluster path engaged {cluster_engaged} times");
}
