//! Experiment harness: graph sources, the all-in verification pipeline
//! (listing vs oracle, decomposition and tree checks, trace invariants),
//! and diff-friendly line-oriented reports.

use crate::conductance::CondMode;
use crate::expander::{build_communication_clusters, decompose, verify_decomposition, DecompParams, DeltaRule};
use crate::gen;
use crate::graph::Graph;
use crate::listing::{cliques::list_kp, ListingParams, ListingResult};
use crate::ptree::build::{build_k3_tree, vlist_graph, BuildCfg, ExecMode};
use crate::ptree::K3Constraints;
use crate::sim::{AccountingReport, Wire};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum GenKind {
    Complete { n: usize },
    Bipartite { a: usize, b: usize },
    Gnp { n: usize, p: f64, seed: u64 },
    BridgedCliques { c: usize },
    GluedCliques { c: usize, s: usize },
    Petersen,
    Wheel { r: usize },
    Path { n: usize },
    Star { leaves: usize },
}

impl GenKind {
    pub fn build(&self) -> Graph {
        match *self {
            GenKind::Complete { n } => gen::complete(n),
            GenKind::Bipartite { a, b } => gen::complete_bipartite(a, b),
            GenKind::Gnp { n, p, seed } => gen::gnp(n, p, seed),
            GenKind::BridgedCliques { c } => gen::bridged_cliques(c),
            GenKind::GluedCliques { c, s } => gen::glued_cliques(c, s),
            GenKind::Petersen => gen::petersen(),
            GenKind::Wheel { r } => gen::wheel(r),
            GenKind::Path { n } => gen::path(n),
            GenKind::Star { leaves } => gen::star(leaves),
        }
    }

    /// Spec strings like `complete:5`, `gnp:30:0.5:42`, `bipartite:3:3`.
    pub fn parse(s: &str) -> Result<GenKind, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let usize_at = |i: usize| -> Result<usize, String> {
            parts
                .get(i)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| format!("bad integer in generator spec {s:?}"))
        };
        match parts[0] {
            "complete" => Ok(GenKind::Complete { n: usize_at(1)? }),
            "bipartite" => Ok(GenKind::Bipartite { a: usize_at(1)?, b: usize_at(2)? }),
            "gnp" => {
                let n = usize_at(1)?;
                let p: f64 = parts
                    .get(2)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| format!("bad density in {s:?}"))?;
                let seed: u64 = parts.get(3).and_then(|t| t.parse().ok()).unwrap_or(1);
                Ok(GenKind::Gnp { n, p, seed })
            }
            "bridged" => Ok(GenKind::BridgedCliques { c: usize_at(1)? }),
            "glued" => Ok(GenKind::GluedCliques { c: usize_at(1)?, s: usize_at(2)? }),
            "petersen" => Ok(GenKind::Petersen),
            "wheel" => Ok(GenKind::Wheel { r: usize_at(1)? }),
            "path" => Ok(GenKind::Path { n: usize_at(1)? }),
            "star" => Ok(GenKind::Star { leaves: usize_at(1)? }),
            other => Err(format!("unknown generator kind {other:?}")),
        }
    }

    pub fn spec_string(&self) -> String {
        match *self {
            GenKind::Complete { n } => format!("complete:{n}"),
            GenKind::Bipartite { a, b } => format!("bipartite:{a}:{b}"),
            GenKind::Gnp { n, p, seed } => format!("gnp:{n}:{p}:{seed}"),
            GenKind::BridgedCliques { c } => format!("bridged:{c}"),
            GenKind::GluedCliques { c, s } => format!("glued:{c}:{s}"),
            GenKind::Petersen => "petersen".into(),
            GenKind::Wheel { r } => format!("wheel:{r}"),
            GenKind::Path { n } => format!("path:{n}"),
            GenKind::Star { leaves } => format!("star:{leaves}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: String, // file path or gen:<spec>
    pub p: usize,
    pub params: ListingParams,
    pub verify: bool,
}

impl ExperimentConfig {
    pub fn new(source: String, p: usize) -> ExperimentConfig {
        ExperimentConfig { source, p, params: ListingParams::for_p(p), verify: true }
    }

    pub fn serialize(&self) -> String {
        format!(
            "source={}\np={}\neps={}/{}\nbeta={}\ngamma={}\nslack={}\nscale={}\nverify={}\n",
            self.source,
            self.p,
            self.params.eps_num,
            self.params.eps_den,
            self.params.beta,
            self.params.gamma,
            self.params.slack,
            self.params.thresh_scale,
            self.verify
        )
    }

    pub fn load_graph(&self) -> Result<Graph, String> {
        if let Some(spec) = self.source.strip_prefix("gen:") {
            Ok(GenKind::parse(spec)?.build())
        } else {
            let text = std::fs::read_to_string(&self.source)
                .map_err(|e| format!("cannot read {}: {e}", self.source))?;
            Graph::parse(&text).map_err(|e| e.to_string())
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckEntry {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug)]
pub struct CheckReport {
    pub pass: bool,
    pub entries: Vec<CheckEntry>,
    pub listing: Option<ListingResult>,
    pub accounting: AccountingReport,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verdict={}", if self.pass { "pass" } else { "fail" })?;
        for e in &self.entries {
            writeln!(f, "check {}={} {}", e.name, if e.pass { "pass" } else { "fail" }, e.detail)?;
        }
        Ok(())
    }
}

/// Run the listing pipeline and every verifier: oracle diff, decomposition
/// contract, a tree rebuild with constraint recount, and the trace
/// bandwidth invariants.
pub fn check_all(g: &Graph, p: usize, params: &ListingParams) -> CheckReport {
    let mut entries = Vec::new();
    let mut push = |name: &str, pass: bool, detail: String| {
        entries.push(CheckEntry { name: name.into(), pass, detail });
    };

    let listing = match list_kp(g, p, params) {
        Ok(r) => r,
        Err(e) => {
            push("listing", false, e.to_string());
            return CheckReport {
                pass: false,
                entries,
                listing: None,
                accounting: AccountingReport {
                    max_sent: 0,
                    max_recv: 0,
                    rounds: 0,
                    total_messages: 0,
                },
            };
        }
    };
    let oracle = g.brute_force_cliques(p);
    let matches = listing.cliques == oracle;
    push(
        "oracle",
        matches,
        format!("listed={} oracle={}", listing.cliques.len(), oracle.len()),
    );

    // attribution covers the oracle exactly once
    let attributed_ok = oracle.iter().all(|c| listing.attribution.contains_key(c))
        && listing.attribution.len() == oracle.len();
    push("attribution", attributed_ok, format!("phases={}", listing.attribution.len()));

    // decomposition contract on a fresh run
    let d = decompose(g, params.eps_num, params.eps_den, &DecompParams::default());
    let rep = verify_decomposition(g, &d);
    push(
        "decomposition",
        rep.pass,
        if rep.pass { format!("parts={}", d.parts.len()) } else { rep.issues.join("; ") },
    );
    let rule = if p == 3 {
        DeltaRule::K3
    } else {
        DeltaRule::Kp { p: p as u32, beta: params.beta, scale: params.thresh_scale }
    };
    let (clusters, acct) = build_communication_clusters(g, &d, rule, g.n());
    let charge_ok = acct.outside_inner_sum * params.eps_den <= 2 * params.eps_num * g.m() as u64
        && acct.edges_not_in_any_e_minus * params.eps_den <= 3 * params.eps_num * g.m() as u64;
    push(
        "edge-accounting",
        charge_ok,
        format!(
            "outside_inner={} not_in_minus={} eplus_max={}",
            acct.outside_inner_sum, acct.edges_not_in_any_e_minus, acct.max_eplus_membership
        ),
    );
    push("eplus-membership", acct.max_eplus_membership <= 2, String::new());

    // tree rebuild on the largest usable cluster
    if let Some(c) = clusters.iter().filter(|c| !c.is_search_only()).max_by_key(|c| c.k()) {
        let bcfg = BuildCfg { sim: params.sim, slack: params.slack };
        let delta_ok = (c.big_k() as f64).powf(1.0 / 3.0).ceil() as u64 <= c.delta.max(1);
        if delta_ok {
            match build_k3_tree(c, &K3Constraints::default(), &bcfg, ExecMode::Distributed) {
                Ok(build) => {
                    let g1 = vlist_graph(c);
                    let tr = crate::ptree::verify_clique_tree(&build.tree, &g1, &K3Constraints::default());
                    push(
                        "tree",
                        tr.pass,
                        if tr.pass { format!("k={}", c.k()) } else { tr.violations.join("; ") },
                    );
                    let mut cover_ok = true;
                    for t in g1.brute_force_cliques(3) {
                        if crate::ptree::covering_leaf(&build.tree, &t).is_err() {
                            cover_ok = false;
                            break;
                        }
                    }
                    push("coverage", cover_ok, String::new());
                }
                Err(e) => push("tree", false, e.to_string()),
            }
        }
    }

    // trace invariants over the merged pipeline trace
    let wire = Wire::new(g.n(), params.sim.c_b);
    let bw = listing.trace.check_bandwidth(wire.b);
    push("bandwidth", bw.is_ok(), bw.err().unwrap_or_default());
    let depth_ok = listing.depth <= crate::listing::depth_cap(g.m().max(1));
    push("depth", depth_ok, format!("depth={}", listing.depth));

    // conductance identity on a sample cut, exact arithmetic
    if g.m() > 0 {
        let active = g.active_vertices();
        if active.len() >= 2 {
            let r = crate::conductance::conductance(g).unwrap();
            let witness_ok = match r.mode {
                CondMode::Disconnected => r.upper.is_zero(),
                _ => {
                    let cm = crate::graph::CutMetrics::of(g, &r.witness);
                    cm.conductance == r.upper
                }
            };
            push("conductance-witness", witness_ok, format!("phi<= {}", r.upper));
        }
    }

    let accounting = AccountingReport::of(&listing.trace);
    let pass = entries.iter().all(|e| e.pass);
    CheckReport { pass, entries, listing: Some(listing), accounting }
}

/// The full line-oriented run report.
pub fn render_report(cfg: &ExperimentConfig, g: &Graph, report: &CheckReport) -> String {
    let mut s = String::new();
    s.push_str(&format!("# run report\n{}", cfg.serialize()));
    s.push_str(&format!("n={} m={}\n", g.n(), g.m()));
    if let Some(l) = &report.listing {
        s.push_str(&format!("cliques={}\n", l.cliques.len()));
        s.push_str(&format!("depth={}\n", l.depth));
        let mut by_phase: std::collections::BTreeMap<String, usize> = Default::default();
        for ph in l.attribution.values() {
            *by_phase.entry(ph.to_string()).or_default() += 1;
        }
        for (ph, count) in by_phase {
            s.push_str(&format!("phase {ph}={count}\n"));
        }
        for n in &l.notes {
            s.push_str(&format!("note {n}\n"));
        }
    }
    s.push_str(&format!("accounting={}\n", report.accounting.serialize()));
    if cfg.verify {
        s.push_str(&report.to_string());
    }
    s
}

/// Execute a config: write cliques, attribution, accounting, trace, and
/// the report under `out_dir`. Returns the verdict.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&std::path::Path>) -> Result<bool, String> {
    let g = cfg.load_graph()?;
    let report = check_all(&g, cfg.p, &cfg.params);
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {dir:?}: {e}"))?;
        let l = report.listing.as_ref().ok_or("listing failed".to_string())?;
        let write = |name: &str, content: &str| -> Result<(), String> {
            std::fs::write(dir.join(name), content)
                .map_err(|e| format!("cannot write {name}: {e}"))
        };
        write("cliques.txt", &l.render_cliques())?;
        write("attribution.txt", &l.render_attribution())?;
        write("accounting.json", &report.accounting.serialize())?;
        write("trace.log", &l.trace.export())?;
        write("report.txt", &render_report(cfg, &g, &report))?;
        write("config.txt", &cfg.serialize())?;
    }
    Ok(report.pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_all_k6_p4() {
        let g = gen::complete(6);
        let r = check_all(&g, 4, &ListingParams::for_p(4));
        assert!(r.pass, "{r}");
        assert_eq!(r.listing.as_ref().unwrap().cliques.len(), 15);
    }

    #[test]
    fn check_all_petersen_p3() {
        let g = gen::petersen();
        let r = check_all(&g, 3, &ListingParams::for_p(3));
        assert!(r.pass, "{r}");
        assert!(r.listing.as_ref().unwrap().cliques.is_empty());
    }

    #[test]
    fn check_all_gnp_p3() {
        let g = gen::gnp(40, 0.5, 7);
        let r = check_all(&g, 3, &ListingParams::for_p(3));
        assert!(r.pass, "{r}");
    }

    #[test]
    fn genkind_round_trips() {
        for spec in ["complete:5", "gnp:30:0.5:42", "bipartite:3:3", "petersen", "wheel:7"] {
            let k = GenKind::parse(spec).unwrap();
            assert_eq!(k.spec_string(), spec);
            let _ = k.build();
        }
        assert!(GenKind::parse("nope:1").is_err());
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = ExperimentConfig::new("gen:gnp:25:0.4:9".into(), 3);
        let g = cfg.load_graph().unwrap();
        let a = render_report(&cfg, &g, &check_all(&g, 3, &cfg.params));
        let b = render_report(&cfg, &g, &check_all(&g, 3, &cfg.params));
        assert_eq!(a, b);
    }

    #[test]
    fn disabled_verification_omits_the_verdict_section() {
        let mut cfg = ExperimentConfig::new("gen:complete:5".into(), 3);
        cfg.verify = false;
        let g = cfg.load_graph().unwrap();
        let rep = render_report(&cfg, &g, &check_all(&g, 3, &cfg.params));
        assert!(!rep.contains("verdict="));
        cfg.verify = true;
        let rep = render_report(&cfg, &g, &check_all(&g, 3, &cfg.params));
        assert!(rep.contains("verdict=pass"));
    }

    #[test]
    fn missing_file_is_a_named_error() {
        let cfg = ExperimentConfig::new("/nonexistent/graph.txt".into(), 3);
        let err = run_experiment(&cfg, None).unwrap_err();
        assert!(err.contains("/nonexistent/graph.txt"));
    }
}
