// stress: random graphs, all p, plus scaled thresholds
use congestlab::gen;
use congestlab::listing::cliques::list_kp;
use congestlab::listing::ListingParams;

fn main() {
    let mut rng = gen::SplitMix64::new(0xABCDEF);
    let mut fails = 0;
    for case in 0..400 {
        let n = 6 + rng.next_below(40) as usize;
        let d = 0.05 + 0.9 * rng.next_f64();
        let seed = rng.next_u64();
        let g = gen::gnp(n, d, seed);
        for p in [3usize, 4, 5] {
            let mut params = ListingParams::for_p(p);
            // every third case shrinks thresholds so clusters engage
            if case % 3 == 0 {
                params.thresh_scale = 0.02 + 0.2 * rng.next_f64();
            }
            match list_kp(&g, p, &params) {
                Ok(r) => {
                    let oracle = g.brute_force_cliques(p);
                    if r.cliques != oracle {
                        fails += 1;
                        println!("MISMATCH n={n} d={d:.3} seed={seed} p={p} scale={} listed={} oracle={}",
                            params.thresh_scale, r.cliques.len(), oracle.len());
                        let missing: Vec<_> = oracle.iter().filter(|c| !r.cliques.contains(c)).take(3).collect();
                        let extra: Vec<_> = r.cliques.iter().filter(|c| !oracle.contains(c)).take(3).collect();
                        println!("  missing={missing:?} extra={extra:?}");
                    }
                }
                Err(e) => {
                    fails += 1;
                    println!("ERROR n={n} d={d:.3} seed={seed} p={p} scale={}: {e}", params.thresh_scale);
                }
            }
        }
        if case % 100 == 99 { println!("... {} cases done", case + 1); }
    }
    println!("stress done, {fails} failures");
}
