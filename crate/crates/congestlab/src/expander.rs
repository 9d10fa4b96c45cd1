//! Expander decomposition behind the standard contract: vertex-disjoint
//! high-conductance edge parts plus a bounded remainder. The reference
//! construction is recursive sparsest-cut bisection; the verifier, not the
//! construction, carries the correctness burden. Also builds the
//! communication clusters (V^in, E^-, E^+, V_list) every wrapper consumes.

use crate::conductance::{exact_sparsest_cut, spectral_cut, EXACT_CUTOFF};
use crate::graph::{Graph, Vertex};
use crate::rational::Ratio;
use std::collections::{BTreeMap, BTreeSet};

pub type Edge = (Vertex, Vertex);

/// Conductance certificate for one part.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiCert {
    Exact(Ratio),
    /// Cheeger bound lambda2 / 2 from the normalized Laplacian.
    SpectralLower(f64),
}

impl PhiCert {
    pub fn lower(&self) -> f64 {
        match self {
            PhiCert::Exact(r) => r.as_f64(),
            PhiCert::SpectralLower(l) => *l,
        }
    }

    /// Rendered as `num/den`; spectral bounds are rationalized over 1e9.
    pub fn display_fraction(&self) -> String {
        match self {
            PhiCert::Exact(r) => r.to_string(),
            PhiCert::SpectralLower(l) => {
                format!("{}/1000000000", (l.max(0.0) * 1e9).round() as u64)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecompPart {
    pub edges: BTreeSet<Edge>,
    pub cert: PhiCert,
}

#[derive(Debug, Clone)]
pub struct ExpanderDecomposition {
    pub parts: Vec<DecompPart>,
    pub e_rem: BTreeSet<Edge>,
    pub eps_num: u64,
    pub eps_den: u64,
}

impl ExpanderDecomposition {
    /// The achieved conductance floor over all parts.
    pub fn phi_lower(&self) -> f64 {
        self.parts.iter().map(|p| p.cert.lower()).fold(f64::INFINITY, f64::min).min(1.0)
    }

    /// Dump format: `part i num/den` then one edge per line, then `rem`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (i, p) in self.parts.iter().enumerate() {
            s.push_str(&format!("part {} {}\n", i, p.cert.display_fraction()));
            for (u, v) in &p.edges {
                s.push_str(&format!("{u} {v}\n"));
            }
        }
        s.push_str("rem\n");
        for (u, v) in &self.e_rem {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DecompParams {
    /// Accept a component as a part once its certified conductance reaches
    /// this target.
    pub phi_target_num: u64,
    pub phi_target_den: u64,
}

impl Default for DecompParams {
    fn default() -> Self {
        DecompParams { phi_target_num: 1, phi_target_den: 4 }
    }
}

/// Recursive sparsest-cut decomposition: split a component while its
/// certified conductance is below target and the removed cut still fits in
/// the epsilon budget; otherwise keep it as a part with its achieved
/// certificate.
pub fn decompose(g: &Graph, eps_num: u64, eps_den: u64, params: &DecompParams) -> ExpanderDecomposition {
    assert!(eps_den > 0 && eps_num < eps_den, "epsilon must be in (0,1)");
    let mut budget = (g.m() as u64 * eps_num) / eps_den;
    let mut e_rem: BTreeSet<Edge> = BTreeSet::new();
    let mut parts: Vec<DecompPart> = Vec::new();
    let mut work: Graph = g.clone();
    let mut queue: Vec<BTreeSet<Vertex>> = work.components();

    while let Some(comp) = queue.pop() {
        if comp.len() < 2 {
            continue;
        }
        let sub = subgraph_on(&work, &comp);
        let (cert, cut) = certify_or_cut(&sub, &comp);
        let target_ok = match &cert {
            PhiCert::Exact(r) => r.cmp_frac(params.phi_target_num, params.phi_target_den)
                != std::cmp::Ordering::Less,
            PhiCert::SpectralLower(l) => {
                *l * params.phi_target_den as f64 >= params.phi_target_num as f64
            }
        };
        if target_ok {
            parts.push(DecompPart { edges: sub.edges().into_iter().collect(), cert });
            continue;
        }
        match cut {
            Some(s) if !s.is_empty() && s.len() < comp.len() => {
                let crossing: Vec<Edge> = sub
                    .edges()
                    .into_iter()
                    .filter(|&(u, v)| s.contains(&u) != s.contains(&v))
                    .collect();
                if (crossing.len() as u64) <= budget && !crossing.is_empty() {
                    budget -= crossing.len() as u64;
                    for &(u, v) in &crossing {
                        e_rem.insert((u, v));
                        remove_edge(&mut work, u, v);
                    }
                    let halves = subgraph_on(&work, &comp).components();
                    queue.extend(halves);
                } else {
                    parts.push(DecompPart { edges: sub.edges().into_iter().collect(), cert });
                }
            }
            _ => {
                // no usable cut: fall back to single-edge parts, each a
                // cluster of conductance 1
                for (u, v) in sub.edges() {
                    parts.push(DecompPart {
                        edges: [(u, v)].into_iter().collect(),
                        cert: PhiCert::Exact(Ratio::ONE),
                    });
                }
            }
        }
    }
    parts.sort_by(|a, b| a.edges.iter().next().cmp(&b.edges.iter().next()));
    ExpanderDecomposition { parts, e_rem, eps_num, eps_den }
}

fn subgraph_on(g: &Graph, comp: &BTreeSet<Vertex>) -> Graph {
    let mut sub = Graph::new(g.n());
    for &v in comp {
        for u in g.neighbors(v) {
            if u > v && comp.contains(&u) {
                sub.add_edge(v, u).unwrap();
            }
        }
    }
    sub
}

fn remove_edge(g: &mut Graph, u: Vertex, v: Vertex) {
    let edges: BTreeSet<Edge> = g
        .edges()
        .into_iter()
        .filter(|&e| e != crate::graph::norm_edge(u, v))
        .collect();
    *g = g.induced_by_edges(&edges).unwrap();
}

fn certify_or_cut(sub: &Graph, comp: &BTreeSet<Vertex>) -> (PhiCert, Option<BTreeSet<Vertex>>) {
    if comp.len() <= EXACT_CUTOFF {
        let best = exact_sparsest_cut(sub, comp);
        (PhiCert::Exact(best.conductance), Some(best.cut))
    } else {
        let (lambda2, sweep) = spectral_cut(sub, comp);
        if lambda2 <= 1e-12 {
            (PhiCert::SpectralLower(0.0), None)
        } else {
            (PhiCert::SpectralLower(lambda2 / 2.0), Some(sweep.cut))
        }
    }
}

/// Verification report; failures are entries, never panics.
#[derive(Debug, Clone)]
pub struct DecompReport {
    pub pass: bool,
    pub issues: Vec<String>,
    pub part_phis: Vec<String>,
}

pub fn verify_decomposition(g: &Graph, d: &ExpanderDecomposition) -> DecompReport {
    let mut issues = Vec::new();
    let mut seen_edges: BTreeMap<Edge, usize> = BTreeMap::new();
    let mut seen_vertices: BTreeMap<Vertex, usize> = BTreeMap::new();
    for (i, p) in d.parts.iter().enumerate() {
        for &e in &p.edges {
            if let Some(j) = seen_edges.insert(e, i) {
                issues.push(format!("edge ({}, {}) in parts {j} and {i}", e.0, e.1));
            }
        }
        let verts: BTreeSet<Vertex> = p.edges.iter().flat_map(|&(u, v)| [u, v]).collect();
        for &v in &verts {
            if let Some(j) = seen_vertices.insert(v, i) {
                issues.push(format!("vertex {v} shared by parts {j} and {i}"));
            }
        }
    }
    // union with remainder must equal E
    let mut all: BTreeSet<Edge> = seen_edges.keys().copied().collect();
    for &e in &d.e_rem {
        if !all.insert(e) {
            issues.push(format!("remainder edge ({}, {}) also in a part", e.0, e.1));
        }
    }
    let g_edges: BTreeSet<Edge> = g.edges().into_iter().collect();
    if all != g_edges {
        issues.push("parts plus remainder do not partition E".to_string());
    }
    if d.e_rem.len() as u64 * d.eps_den > g.m() as u64 * d.eps_num {
        issues.push(format!(
            "|E_rem| = {} exceeds eps*|E| = {}*{}/{}",
            d.e_rem.len(),
            g.m(),
            d.eps_num,
            d.eps_den
        ));
    }
    let mut part_phis = Vec::new();
    for (i, p) in d.parts.iter().enumerate() {
        let sub = g.induced_by_edges(&p.edges).unwrap_or_else(|_| Graph::new(g.n()));
        let verts = sub.active_vertices();
        if sub.components().len() != 1 {
            issues.push(format!("part {i} is not connected"));
            part_phis.push("0/1".to_string());
            continue;
        }
        if verts.len() <= EXACT_CUTOFF {
            let best = exact_sparsest_cut(&sub, &verts);
            match &p.cert {
                PhiCert::Exact(claimed) if *claimed == best.conductance => {}
                other => issues.push(format!(
                    "part {i}: claimed {:?}, recomputed exact {}",
                    other, best.conductance
                )),
            }
            part_phis.push(format!("{}", best.conductance));
        } else {
            let (lambda2, _) = spectral_cut(&sub, &verts);
            let lower = (lambda2 / 2.0).max(0.0);
            if p.cert.lower() > lower + 1e-9 {
                issues.push(format!(
                    "part {i}: claimed lower {} above recomputed spectral bound {lower}",
                    p.cert.lower()
                ));
            }
            part_phis.push(format!("certified >= {}/1000000000", (lower * 1e9).round() as u64));
        }
    }
    DecompReport { pass: issues.is_empty(), issues, part_phis }
}

/// Rule mapping a cluster to its communication-degree threshold delta.
#[derive(Debug, Clone, Copy)]
pub enum DeltaRule {
    /// Triangle setting: delta = ceil(K^(1/3)).
    K3,
    /// Larger cliques: delta = ceil(beta * n^(1-2/p) * scale); `scale` is a
    /// test-only knob, 1.0 in production.
    Kp { p: u32, beta: f64, scale: f64 },
}

impl DeltaRule {
    pub fn delta(&self, big_k: usize, n_global: usize) -> u64 {
        match self {
            DeltaRule::K3 => (big_k as f64).powf(1.0 / 3.0).ceil() as u64,
            DeltaRule::Kp { p, beta, scale } => {
                let thresh = beta * (n_global as f64).powf(1.0 - 2.0 / *p as f64) * scale;
                (thresh.ceil() as u64).max(1)
            }
        }
    }
}

/// Directed imported edge sets and the per-tail input-degree table.
#[derive(Debug, Clone, Default)]
pub struct ImportedInput {
    /// Directed copies (tail, head), tail outside V_list, head in V_list.
    pub ebar: BTreeSet<(Vertex, Vertex)>,
    /// Directed copies (tail, head), both endpoints outside V_list.
    pub eprime: BTreeSet<(Vertex, Vertex)>,
    /// For each tail with at least one imported edge, the unique V_list
    /// holder of its input degree, and the degree itself.
    pub sentdeg: BTreeMap<Vertex, (Vertex, u64)>,
    /// Which V_list vertex currently holds each directed eprime copy.
    pub eprime_holder: BTreeMap<(Vertex, Vertex), Vertex>,
}

/// A phi-cluster plus the designated V_list and the derived degree data.
#[derive(Debug, Clone)]
pub struct CommunicationCluster {
    pub id: usize,
    pub n_global: usize,
    pub nodes: BTreeSet<Vertex>,
    pub adj: BTreeMap<Vertex, BTreeSet<Vertex>>,
    pub part_edges: BTreeSet<Edge>,
    pub e_minus: BTreeSet<Edge>,
    pub e_plus: BTreeSet<Edge>,
    pub v_inner: BTreeSet<Vertex>,
    pub v_list: BTreeSet<Vertex>,
    pub delta: u64,
    pub imports: ImportedInput,
}

impl CommunicationCluster {
    pub fn deg_c(&self, v: Vertex) -> usize {
        self.adj.get(&v).map_or(0, |s| s.len())
    }

    pub fn big_k(&self) -> usize {
        self.nodes.len()
    }

    pub fn k(&self) -> usize {
        self.v_list.len()
    }

    /// Sum of communication degrees over V_list (k * mu).
    pub fn comm_deg_sum(&self) -> u64 {
        self.v_list.iter().map(|&v| self.deg_c(v) as u64).sum()
    }

    pub fn mu(&self) -> Ratio {
        if self.k() == 0 {
            Ratio::ZERO
        } else {
            Ratio::new(self.comm_deg_sum(), self.k() as u64)
        }
    }

    /// Vertices of V_list with at least half-average communication degree.
    pub fn v_hd(&self) -> BTreeSet<Vertex> {
        let sum = self.comm_deg_sum();
        let k = self.k() as u64;
        self.v_list
            .iter()
            .copied()
            .filter(|&v| 2 * self.deg_c(v) as u64 * k >= sum)
            .collect()
    }

    /// Clusters whose V_list is empty are handled purely by exhaustive
    /// search.
    pub fn is_search_only(&self) -> bool {
        self.v_list.is_empty()
    }

    /// The cluster as a graph over the ambient vertex numbering.
    pub fn cluster_graph(&self) -> Graph {
        let mut g = Graph::new(self.n_global);
        for (&v, nbrs) in &self.adj {
            for &u in nbrs {
                if u > v {
                    g.add_edge(v, u).unwrap();
                }
            }
        }
        g
    }

    /// V_list ranks in id order (1-based).
    pub fn vlist_ranked(&self) -> Vec<Vertex> {
        self.v_list.iter().copied().collect()
    }

    pub fn rank_of(&self, v: Vertex) -> Option<usize> {
        self.vlist_ranked().binary_search(&v).ok().map(|i| i + 1)
    }
}

/// Edge bookkeeping over a whole decomposition, for the remainder-charge
/// and membership invariants.
#[derive(Debug, Clone)]
pub struct ClusterAccounting {
    /// sum over parts of |E_i \ E_i^-|
    pub outside_inner_sum: u64,
    /// edges of the ambient graph not inside any E_i^-
    pub edges_not_in_any_e_minus: u64,
    /// max, over edges, of the number of E^+ sets containing the edge
    pub max_eplus_membership: usize,
}

/// Derive a communication cluster from every part: V^in by the majority
/// rule (ties stay in), E^- inside V^in, E^+ = E_i plus E(V^in, V^in), and
/// V_list by the delta rule over V^in.
pub fn build_communication_clusters(
    g: &Graph,
    d: &ExpanderDecomposition,
    rule: DeltaRule,
    n_global: usize,
) -> (Vec<CommunicationCluster>, ClusterAccounting) {
    let mut clusters = Vec::new();
    let mut eplus_count: BTreeMap<Edge, usize> = BTreeMap::new();
    let mut outside_inner_sum = 0u64;
    let mut union_e_minus: BTreeSet<Edge> = BTreeSet::new();
    for (i, p) in d.parts.iter().enumerate() {
        let verts: BTreeSet<Vertex> = p.edges.iter().flat_map(|&(u, v)| [u, v]).collect();
        let mut deg_in: BTreeMap<Vertex, usize> = BTreeMap::new();
        for &(u, v) in &p.edges {
            *deg_in.entry(u).or_default() += 1;
            *deg_in.entry(v).or_default() += 1;
        }
        let v_inner: BTreeSet<Vertex> = verts
            .iter()
            .copied()
            .filter(|&v| 2 * deg_in[&v] >= g.degree(v))
            .collect();
        let e_minus: BTreeSet<Edge> = p
            .edges
            .iter()
            .copied()
            .filter(|&(u, v)| v_inner.contains(&u) && v_inner.contains(&v))
            .collect();
        let mut e_plus: BTreeSet<Edge> = p.edges.clone();
        for &v in &v_inner {
            for u in g.neighbors(v) {
                if u > v && v_inner.contains(&u) {
                    e_plus.insert((v, u));
                }
            }
        }
        outside_inner_sum += (p.edges.len() - e_minus.len()) as u64;
        union_e_minus.extend(e_minus.iter().copied());
        for &e in &e_plus {
            *eplus_count.entry(e).or_default() += 1;
        }
        let nodes: BTreeSet<Vertex> = e_plus.iter().flat_map(|&(u, v)| [u, v]).collect();
        let mut adj: BTreeMap<Vertex, BTreeSet<Vertex>> = BTreeMap::new();
        for &(u, v) in &e_plus {
            adj.entry(u).or_default().insert(v);
            adj.entry(v).or_default().insert(u);
        }
        let delta = rule.delta(nodes.len(), n_global);
        let v_list: BTreeSet<Vertex> = v_inner
            .iter()
            .copied()
            .filter(|&v| adj.get(&v).map_or(0, |s| s.len()) as u64 >= delta)
            .collect();
        clusters.push(CommunicationCluster {
            id: i,
            n_global,
            nodes,
            adj,
            part_edges: p.edges.clone(),
            e_minus,
            e_plus,
            v_inner,
            v_list,
            delta,
            imports: ImportedInput::default(),
        });
    }
    let edges_not_in_any_e_minus =
        g.edges().iter().filter(|e| !union_e_minus.contains(e)).count() as u64;
    let max_eplus_membership = eplus_count.values().copied().max().unwrap_or(0);
    (
        clusters,
        ClusterAccounting { outside_inner_sum, edges_not_in_any_e_minus, max_eplus_membership },
    )
}

/// Build a standalone cluster from a whole graph, for direct exercises of
/// the in-cluster machinery: E^+ = E, V^in = all endpoints.
pub fn standalone_cluster(g: &Graph, rule: DeltaRule, n_global: usize) -> CommunicationCluster {
    let edges: BTreeSet<Edge> = g.edges().into_iter().collect();
    let nodes: BTreeSet<Vertex> = g.active_vertices();
    let mut adj: BTreeMap<Vertex, BTreeSet<Vertex>> = BTreeMap::new();
    for &(u, v) in &edges {
        adj.entry(u).or_default().insert(v);
        adj.entry(v).or_default().insert(u);
    }
    let delta = rule.delta(nodes.len(), n_global);
    let v_list: BTreeSet<Vertex> = nodes
        .iter()
        .copied()
        .filter(|&v| adj.get(&v).map_or(0, |s| s.len()) as u64 >= delta)
        .collect();
    CommunicationCluster {
        id: 0,
        n_global,
        nodes: nodes.clone(),
        adj,
        part_edges: edges.clone(),
        e_minus: edges.clone(),
        e_plus: edges,
        v_inner: nodes,
        v_list,
        delta,
        imports: ImportedInput::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;

    #[test]
    fn k8_stays_whole() {
        let g = gen::complete(8);
        let d = decompose(&g, 1, 4, &DecompParams::default());
        assert_eq!(d.parts.len(), 1);
        assert!(d.e_rem.is_empty());
        assert!(verify_decomposition(&g, &d).pass);
    }

    #[test]
    fn bridged_k5s_split_at_the_bridge() {
        let g = gen::bridged_cliques(5);
        let d = decompose(&g, 1, 4, &DecompParams::default());
        assert_eq!(d.parts.len(), 2);
        assert_eq!(d.e_rem.len(), 1);
        assert!(d.e_rem.contains(&(5, 6)));
        assert!(verify_decomposition(&g, &d).pass);
    }

    #[test]
    fn single_edge_is_one_part() {
        let g = Graph::from_edges(2, &[(1, 2)]).unwrap();
        let d = decompose(&g, 1, 2, &DecompParams::default());
        assert_eq!(d.parts.len(), 1);
        assert!(verify_decomposition(&g, &d).pass);
    }

    #[test]
    fn verifier_flags_overlap_and_remainder_violations() {
        let g = gen::bridged_cliques(3);
        let d = decompose(&g, 1, 4, &DecompParams::default());
        assert!(verify_decomposition(&g, &d).pass);

        let mut broken = d.clone();
        // duplicate one part: shared vertices and edges
        let p = broken.parts[0].clone();
        broken.parts.push(p);
        let rep = verify_decomposition(&g, &broken);
        assert!(!rep.pass);
        assert!(rep.issues.iter().any(|s| s.contains("shared by parts")));

        let mut over = d.clone();
        // move a part edge into the remainder to overflow the budget
        let e = *over.parts[0].edges.iter().next().unwrap();
        over.parts[0].edges.remove(&e);
        over.e_rem.insert(e);
        over.eps_num = 0;
        over.eps_den = 1;
        let rep = verify_decomposition(&g, &over);
        assert!(!rep.pass);
    }

    #[test]
    fn clusters_on_bridged_k5s() {
        let g = gen::bridged_cliques(5);
        let d = decompose(&g, 1, 4, &DecompParams::default());
        let (clusters, acct) = build_communication_clusters(&g, &d, DeltaRule::K3, g.n());
        assert_eq!(clusters.len(), 2);
        for c in &clusters {
            // bridge endpoints keep 4 of 5 edges inside: still in V^in
            assert_eq!(c.v_inner.len(), 5);
            assert_eq!(c.e_plus, c.part_edges);
            assert_eq!(c.e_minus, c.part_edges);
        }
        // remainder charge: sum |E_i \ E_i^-| <= 2 eps |E|
        assert!(acct.outside_inner_sum <= 2 * g.m() as u64 / 4);
        assert!(acct.max_eplus_membership <= 2);
        assert!(acct.edges_not_in_any_e_minus <= 3 * g.m() as u64 / 4);
    }

    #[test]
    fn single_edge_part_is_search_only() {
        let g = Graph::from_edges(2, &[(1, 2)]).unwrap();
        let d = decompose(&g, 1, 2, &DecompParams::default());
        let (clusters, _) = build_communication_clusters(&g, &d, DeltaRule::K3, g.n());
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].v_inner.len(), 2);
        // delta = ceil(2^(1/3)) = 2 > 1 = deg, so no V_list
        assert!(clusters[0].is_search_only());
    }

    #[test]
    fn closed_k8_cluster_accounting() {
        let g = gen::complete(8);
        let d = decompose(&g, 1, 4, &DecompParams::default());
        let (clusters, acct) = build_communication_clusters(&g, &d, DeltaRule::K3, g.n());
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].e_plus, clusters[0].part_edges);
        assert_eq!(acct.outside_inner_sum, 0);
        // K = 8, delta = 2, all degrees 7
        assert_eq!(clusters[0].v_list.len(), 8);
        let mu = clusters[0].mu();
        assert_eq!(mu, Ratio::new(7, 1));
        assert_eq!(clusters[0].v_hd().len(), 8);
    }

    #[test]
    fn eplus_conductance_at_least_half_of_part() {
        // two K5s bridged: parts are the K5s; E+ = E_i so the ratio is 1
        let g = gen::bridged_cliques(5);
        let d = decompose(&g, 1, 4, &DecompParams::default());
        let (clusters, _) = build_communication_clusters(&g, &d, DeltaRule::K3, g.n());
        for (c, p) in clusters.iter().zip(&d.parts) {
            let plus = g.induced_by_edges(&c.e_plus).unwrap();
            let part = g.induced_by_edges(&p.edges).unwrap();
            let phi_plus = crate::conductance::conductance(&plus).unwrap().upper;
            let phi_part = crate::conductance::conductance(&part).unwrap().upper;
            assert!(phi_plus.cmp_frac(phi_part.num(), 2 * phi_part.den()) != std::cmp::Ordering::Less);
        }
    }
}
