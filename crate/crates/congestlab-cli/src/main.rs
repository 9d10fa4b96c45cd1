//! Command-line surface over the listing laboratory: run a listing
//! pipeline with verification, re-check stored outputs, sweep scaling
//! tables, or expose the decomposition directly.

use clap::{Args, Parser, Subcommand};
use congestlab::expander::{decompose, verify_decomposition, DecompParams};
use congestlab::gen::SplitMix64;
use congestlab::harness::{check_all, render_report, ExperimentConfig, GenKind};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "congestlab", about = "deterministic clique listing laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct SourceArgs {
    /// Edge-list file ("n m" header, then "u v" lines).
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Generator spec: complete:N, bipartite:A:B, gnp:N:P:SEED,
    /// bridged:C, glued:C:S, petersen, wheel:R, path:N, star:L.
    #[arg(long)]
    gen: Option<String>,
    /// Seed for gnp specs that omit one.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl SourceArgs {
    fn source_string(&self) -> Result<String, String> {
        match (&self.graph, &self.gen) {
            (Some(path), None) => Ok(path.display().to_string()),
            (None, Some(spec)) => {
                let mut kind = GenKind::parse(spec)?;
                if let GenKind::Gnp { seed, .. } = &mut kind {
                    if spec.matches(':').count() < 3 {
                        *seed = self.seed;
                    }
                }
                Ok(format!("gen:{}", kind.spec_string()))
            }
            _ => Err("exactly one of --graph / --gen is required".into()),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the listing pipeline, verify, and write the outputs.
    List {
        #[command(flatten)]
        src: SourceArgs,
        /// Clique size.
        #[arg(long, default_value_t = 3)]
        p: usize,
        /// Decomposition epsilon as "num/den".
        #[arg(long)]
        epsilon: Option<String>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Test-only threshold scale.
        #[arg(long)]
        scale: Option<f64>,
        /// Skip the verification suite.
        #[arg(long, default_value_t = false)]
        no_verify: bool,
        /// Output directory for the report files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a stored clique list against the brute-force oracle.
    Verify {
        #[command(flatten)]
        src: SourceArgs,
        #[arg(long, default_value_t = 3)]
        p: usize,
        /// Stored clique list (one sorted vertex set per line).
        #[arg(long)]
        cliques: PathBuf,
    },
    /// Rounds-versus-size tables over a graph family (not a gate).
    Sweep {
        /// gnp density.
        #[arg(long, default_value_t = 0.4)]
        density: f64,
        #[arg(long, default_value_t = 3)]
        p: usize,
        /// Comma-separated vertex counts.
        #[arg(long, default_value = "20,30,40")]
        sizes: String,
        #[arg(long, default_value_t = 3)]
        seeds: u64,
    },
    /// Run the expander decomposition and print the dump plus verdict.
    Decompose {
        #[command(flatten)]
        src: SourceArgs,
        #[arg(long)]
        epsilon: Option<String>,
    },
}

fn parse_eps(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once('/').ok_or_else(|| format!("epsilon {s:?} is not num/den"))?;
    let num = a.trim().parse().map_err(|_| format!("bad epsilon numerator {a:?}"))?;
    let den = b.trim().parse().map_err(|_| format!("bad epsilon denominator {b:?}"))?;
    if num == 0 || den == 0 || num >= den {
        return Err(format!("epsilon {s:?} outside (0, 1)"));
    }
    Ok((num, den))
}

fn slack_from_env() -> Option<f64> {
    std::env::var("CONGESTLAB_SLACK").ok().and_then(|v| v.parse().ok())
}

fn run() -> Result<bool, String> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::List { src, p, epsilon, beta, gamma, scale, no_verify, out } => {
            let mut cfg = ExperimentConfig::new(src.source_string()?, p);
            cfg.verify = !no_verify;
            if let Some(e) = epsilon {
                let (num, den) = parse_eps(&e)?;
                cfg.params.eps_num = num;
                cfg.params.eps_den = den;
            }
            if let Some(b) = beta {
                cfg.params.beta = b;
            }
            if let Some(g) = gamma {
                cfg.params.gamma = g;
            }
            if let Some(s) = scale {
                cfg.params.thresh_scale = s;
            }
            if let Some(s) = slack_from_env() {
                cfg.params.slack = s;
            }
            let g = cfg.load_graph()?;
            let report = check_all(&g, cfg.p, &cfg.params);
            print!("{}", render_report(&cfg, &g, &report));
            if let Some(dir) = out {
                congestlab::harness::run_experiment(&cfg, Some(&dir))?;
                eprintln!("outputs written under {}", dir.display());
            }
            Ok(report.pass || no_verify)
        }
        Cmd::Verify { src, p, cliques } => {
            let cfg = ExperimentConfig::new(src.source_string()?, p);
            let g = cfg.load_graph()?;
            let stored = std::fs::read_to_string(&cliques)
                .map_err(|e| format!("cannot read {}: {e}", cliques.display()))?;
            let mut listed: Vec<Vec<u32>> = Vec::new();
            for line in stored.lines() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let set: Result<Vec<u32>, _> =
                    line.split_whitespace().map(|t| t.parse()).collect();
                listed.push(set.map_err(|_| format!("bad clique line {line:?}"))?);
            }
            let oracle = g.brute_force_cliques(p);
            let ok = listed == oracle;
            println!(
                "verdict={} stored={} oracle={}",
                if ok { "pass" } else { "fail" },
                listed.len(),
                oracle.len()
            );
            Ok(ok)
        }
        Cmd::Sweep { density, p, sizes, seeds } => {
            let sizes: Vec<usize> = sizes
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| format!("bad size {t:?}")))
                .collect::<Result<_, _>>()?;
            println!("# n seed rounds messages cliques  (density={density} p={p})");
            let mut rng = SplitMix64::new(0xC0FFEE);
            for n in sizes {
                for s in 0..seeds {
                    let seed = rng.next_u64().wrapping_add(s);
                    let cfg = ExperimentConfig::new(format!("gen:gnp:{n}:{density}:{seed}"), p);
                    let g = cfg.load_graph()?;
                    let report = check_all(&g, p, &cfg.params);
                    let l = report.listing.as_ref().ok_or("listing failed".to_string())?;
                    println!(
                        "{n} {seed} {} {} {}",
                        report.accounting.rounds,
                        report.accounting.total_messages,
                        l.cliques.len()
                    );
                }
            }
            Ok(true)
        }
        Cmd::Decompose { src, epsilon } => {
            let cfg = ExperimentConfig::new(src.source_string()?, 3);
            let g = cfg.load_graph()?;
            let (num, den) = epsilon.as_deref().map(parse_eps).transpose()?.unwrap_or((1, 6));
            let d = decompose(&g, num, den, &DecompParams::default());
            print!("{}", d.dump());
            let rep = verify_decomposition(&g, &d);
            println!("verdict={}", if rep.pass { "pass" } else { "fail" });
            for issue in &rep.issues {
                println!("issue {issue}");
            }
            Ok(rep.pass)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
