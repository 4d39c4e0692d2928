//! Variable interaction networks.
//!
//! Nodes are variables; an edge `u -> v` with weight `w` says input `u` has
//! normalized impact `w` on the model for `v`. Models whose NMSE exceeds the
//! configured threshold contribute no edges, and impacts below the impact
//! threshold are pruned.
//!
//! The acyclic variant adds edges greedily, one incoming edge per node per
//! round in order of decreasing impact, and after every round deletes the
//! weakest edge of a shortest cycle until no cycle is left. Ties are broken
//! lexicographically so construction is deterministic, and a deleted edge is
//! never offered again.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impacts::ImpactVector;
use crate::regression::QualityReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Largest model NMSE that still contributes edges.
    pub nmse_threshold: f64,
    /// Smallest impact kept as an edge.
    pub impact_threshold: f64,
    pub acyclic: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            nmse_threshold: 0.2,
            impact_threshold: 0.1,
            acyclic: false,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.nmse_threshold) {
            return Err(Error::InvalidArgument(format!(
                "nmse_threshold {} outside [0, 1]",
                self.nmse_threshold
            )));
        }
        if !(0.0..1.0).contains(&self.impact_threshold) {
            return Err(Error::InvalidArgument(format!(
                "impact_threshold {} outside [0, 1)",
                self.impact_threshold
            )));
        }
        Ok(())
    }

    pub fn admits(&self, q: &QualityReport) -> bool {
        q.nmse <= self.nmse_threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    nodes: BTreeSet<String>,
    /// Keyed by `(source, target)`.
    #[serde(with = "edge_list")]
    edges: BTreeMap<(String, String), f64>,
    acyclic: bool,
}

/// Edges as a list of `{source, target, weight}` records in serialized form.
mod edge_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Edge;

    pub fn serialize<S: Serializer>(
        edges: &BTreeMap<(String, String), f64>,
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        edges
            .iter()
            .map(|((source, target), weight)| Edge {
                source: source.clone(),
                target: target.clone(),
                weight: *weight,
            })
            .collect::<Vec<_>>()
            .serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> Result<BTreeMap<(String, String), f64>, D::Error> {
        Ok(Vec::<Edge>::deserialize(de)?
            .into_iter()
            .map(|e| ((e.source, e.target), e.weight))
            .collect())
    }
}

impl Network {
    /// Builds a network from explicit edges. Self-loops and non-positive
    /// weights are rejected; edge endpoints are added as nodes.
    pub fn from_edges<S: Into<String>>(
        nodes: impl IntoIterator<Item = S>,
        edges: impl IntoIterator<Item = (S, S, f64)>,
    ) -> Result<Self> {
        let mut net = Self {
            nodes: nodes.into_iter().map(Into::into).collect(),
            edges: BTreeMap::new(),
            acyclic: false,
        };
        for (s, t, w) in edges {
            let (s, t) = (s.into(), t.into());
            if s == t {
                return Err(Error::InvalidArgument(format!("self-loop on `{s}`")));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "edge {s} -> {t} weight {w} outside (0, 1]"
                )));
            }
            net.nodes.insert(s.clone());
            net.nodes.insert(t.clone());
            if net.edges.insert((s.clone(), t.clone()), w).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate edge {s} -> {t}")));
            }
        }
        Ok(net)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    pub fn node_names(&self) -> Vec<String> {
        self.nodes.iter().cloned().collect()
    }

    /// Edges in lexicographic `(source, target)` order.
    pub fn edges(&self) -> Vec<Edge> {
        self.edges
            .iter()
            .map(|((s, t), w)| Edge {
                source: s.clone(),
                target: t.clone(),
                weight: *w,
            })
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn weight(&self, source: &str, target: &str) -> Option<f64> {
        self.edges
            .get(&(source.to_string(), target.to_string()))
            .copied()
    }

    /// Incoming `(source, weight)` pairs of `target`.
    pub fn incoming(&self, target: &str) -> Vec<(&str, f64)> {
        self.edges
            .iter()
            .filter(|((_, t), _)| t == target)
            .map(|((s, _), w)| (s.as_str(), *w))
            .collect()
    }

    pub fn is_acyclic_build(&self) -> bool {
        self.acyclic
    }

    /// Kahn's algorithm; `None` if the graph has a directed cycle.
    pub fn topological_order(&self) -> Option<Vec<String>> {
        let mut indeg: BTreeMap<&str, usize> = self.nodes.iter().map(|n| (n.as_str(), 0)).collect();
        for (_, t) in self.edges.keys() {
            *indeg.get_mut(t.as_str()).unwrap() += 1;
        }
        let mut ready: VecDeque<&str> =
            indeg.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_front() {
            order.push(n.to_string());
            for (s, t) in self.edges.keys() {
                if s == n {
                    let d = indeg.get_mut(t.as_str()).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        ready.push_back(t);
                    }
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    /// DOT digraph with lexicographically ordered nodes and edges and weights
    /// printed with two decimals.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph {\n");
        for n in &self.nodes {
            writeln!(s, "  {};", dot_id(n)).unwrap();
        }
        for ((a, b), w) in &self.edges {
            writeln!(s, "  {} -> {} [label=\"{:.2}\"];", dot_id(a), dot_id(b), w).unwrap();
        }
        s.push_str("}\n");
        s
    }

    /// CSV edge list `source,target,weight`.
    pub fn to_edge_csv(&self) -> String {
        let mut s = String::from("source,target,weight\n");
        for ((a, b), w) in &self.edges {
            writeln!(s, "{a},{b},{w}").unwrap();
        }
        s
    }
}

fn dot_id(name: &str) -> String {
    let plain = name
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if plain {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

pub fn export_dot(net: &Network) -> String {
    net.to_dot()
}

/// All directed cycles of minimal length. Each cycle starts at its
/// lexicographically smallest node; the list is sorted.
pub fn find_shortest_cycles(net: &Network) -> Vec<Vec<String>> {
    shortest_cycles(&net.nodes, &net.edges)
}

fn shortest_cycles(
    nodes: &BTreeSet<String>,
    edges: &BTreeMap<(String, String), f64>,
) -> Vec<Vec<String>> {
    let mut adj: BTreeMap<&str, Vec<&str>> = nodes.iter().map(|n| (n.as_str(), vec![])).collect();
    for (s, t) in edges.keys() {
        adj.entry(s.as_str()).or_default().push(t.as_str());
        adj.entry(t.as_str()).or_default();
    }

    // girth: shortest path s ~> u plus the closing edge u -> s
    let mut girth = usize::MAX;
    for &s in adj.keys() {
        let mut dist: BTreeMap<&str, usize> = BTreeMap::from([(s, 0)]);
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u];
            if du + 1 >= girth {
                break;
            }
            for &v in &adj[u] {
                if v == s {
                    girth = girth.min(du + 1);
                } else if !dist.contains_key(v) {
                    dist.insert(v, du + 1);
                    queue.push_back(v);
                }
            }
        }
    }
    if girth == usize::MAX {
        return Vec::new();
    }

    // enumerate simple cycles of that length, rooted at their smallest node
    fn extend<'a>(
        adj: &BTreeMap<&'a str, Vec<&'a str>>,
        root: &'a str,
        len: usize,
        path: &mut Vec<&'a str>,
        out: &mut Vec<Vec<String>>,
    ) {
        let last = *path.last().unwrap();
        for &v in &adj[last] {
            if v == root && path.len() == len {
                out.push(path.iter().map(|s| s.to_string()).collect());
            } else if v > root && path.len() < len && !path.contains(&v) {
                path.push(v);
                extend(adj, root, len, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    for &root in adj.keys() {
        extend(&adj, root, girth, &mut vec![root], &mut out);
    }
    out.sort();
    out
}

/// Admissible incoming candidates per target, strongest first.
fn candidates(
    impacts: &[ImpactVector],
    qualities: &BTreeMap<String, QualityReport>,
    cfg: &NetworkConfig,
) -> Result<(BTreeSet<String>, BTreeMap<String, Vec<(String, f64)>>)> {
    cfg.validate()?;
    let mut nodes = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut out = BTreeMap::new();
    for v in impacts {
        if !seen.insert(v.target.clone()) {
            return Err(Error::DuplicateTarget(v.target.clone()));
        }
        nodes.insert(v.target.clone());
        nodes.extend(v.entries.iter().map(|e| e.input.clone()));
        let admitted = qualities.get(&v.target).is_some_and(|q| cfg.admits(q));
        if !admitted {
            continue;
        }
        let mut c: Vec<(String, f64)> = v
            .entries
            .iter()
            .filter(|e| e.input != v.target && e.impact > 0.0 && e.impact >= cfg.impact_threshold)
            .map(|e| (e.input.clone(), e.impact.min(1.0)))
            .collect();
        c.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out.insert(v.target.clone(), c);
    }
    Ok((nodes, out))
}

/// Every admissible impact becomes an edge.
pub fn build_cyclic(
    impacts: &[ImpactVector],
    qualities: &BTreeMap<String, QualityReport>,
    cfg: &NetworkConfig,
) -> Result<Network> {
    let (nodes, cands) = candidates(impacts, qualities, cfg)?;
    let edges = cands
        .into_iter()
        .flat_map(|(t, c)| c.into_iter().map(move |(s, w)| ((s, t.clone()), w)))
        .collect();
    Ok(Network {
        nodes,
        edges,
        acyclic: false,
    })
}

/// Greedy acyclic construction with weakest-link cycle breaking.
pub fn build_acyclic(
    impacts: &[ImpactVector],
    qualities: &BTreeMap<String, QualityReport>,
    cfg: &NetworkConfig,
) -> Result<Network> {
    let (nodes, cands) = candidates(impacts, qualities, cfg)?;
    let mut cursor: BTreeMap<&str, usize> = cands.keys().map(|t| (t.as_str(), 0)).collect();
    let mut edges: BTreeMap<(String, String), f64> = BTreeMap::new();

    let mut add_round = |edges: &mut BTreeMap<(String, String), f64>| -> bool {
        let mut added = false;
        for (target, list) in &cands {
            let pos = cursor.get_mut(target.as_str()).unwrap();
            if let Some((s, w)) = list.get(*pos) {
                *pos += 1;
                edges.insert((s.clone(), target.clone()), *w);
                added = true;
            }
        }
        added
    };

    let mut added = add_round(&mut edges);
    while added {
        loop {
            let cycles = shortest_cycles(&nodes, &edges);
            let Some(cycle) = cycles.first() else { break };
            let weakest = cycle
                .iter()
                .zip(cycle.iter().cycle().skip(1))
                .map(|(s, t)| (s.clone(), t.clone()))
                .min_by(|a, b| edges[a].total_cmp(&edges[b]).then_with(|| a.cmp(b)))
                .expect("cycle has edges");
            edges.remove(&weakest);
        }
        added = add_round(&mut edges);
    }
    Ok(Network {
        nodes,
        edges,
        acyclic: true,
    })
}

/// Dispatches on `cfg.acyclic`.
pub fn build(
    impacts: &[ImpactVector],
    qualities: &BTreeMap<String, QualityReport>,
    cfg: &NetworkConfig,
) -> Result<Network> {
    if cfg.acyclic {
        build_acyclic(impacts, qualities, cfg)
    } else {
        build_cyclic(impacts, qualities, cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(target: &str, entries: &[(&str, f64)]) -> ImpactVector {
        ImpactVector {
            target: target.into(),
            entries: entries
                .iter()
                .map(|(i, w)| crate::impacts::ImpactEntry {
                    input: i.to_string(),
                    impact: *w,
                    raw_increase: *w,
                })
                .collect(),
        }
    }

    fn good(targets: &[&str]) -> BTreeMap<String, QualityReport> {
        targets
            .iter()
            .map(|t| (t.to_string(), QualityReport { r2: 1.0, nmse: 0.0 }))
            .collect()
    }

    fn edge_set(n: &Network) -> Vec<(String, String)> {
        n.edges().into_iter().map(|e| (e.source, e.target)).collect()
    }

    fn pair(a: &str, b: &str) -> (String, String) {
        (a.to_string(), b.to_string())
    }

    #[test]
    fn pruning_rule() {
        let v = [iv("y", &[("a", 1.0), ("b", 0.05)])];
        let n = build_cyclic(&v, &good(&["y"]), &NetworkConfig::default()).unwrap();
        assert_eq!(edge_set(&n), vec![pair("a", "y")]);
        assert_eq!(n.node_names(), vec!["a", "b", "y"]);
    }

    #[test]
    fn poor_models_contribute_nothing() {
        let v = [iv("y", &[("a", 1.0)])];
        let q = BTreeMap::from([("y".to_string(), QualityReport { r2: 0.5, nmse: 0.5 })]);
        let n = build_cyclic(&v, &q, &NetworkConfig::default()).unwrap();
        assert_eq!(n.edge_count(), 0);
        assert_eq!(n.node_names(), vec!["a", "y"]);
    }

    #[test]
    fn cyclic_mode_keeps_two_cycle() {
        let v = [iv("a", &[("b", 1.0)]), iv("b", &[("a", 1.0)])];
        let n = build_cyclic(&v, &good(&["a", "b"]), &NetworkConfig::default()).unwrap();
        assert_eq!(n.edge_count(), 2);
        assert!(n.topological_order().is_none());
    }

    #[test]
    fn duplicate_target_rejected() {
        let v = [iv("a", &[("b", 1.0)]), iv("a", &[("c", 1.0)])];
        assert!(matches!(
            build_cyclic(&v, &good(&["a"]), &NetworkConfig::default()),
            Err(Error::DuplicateTarget(_))
        ));
    }

    #[test]
    fn three_cycle_loses_weakest_link() {
        // hand execution: round 1 adds a->b, b->c, c->a; the only cycle is
        // (a, b, c) and c->a (0.7) is its weakest edge; no further candidates
        let v = [
            iv("b", &[("a", 0.9)]),
            iv("c", &[("b", 0.8)]),
            iv("a", &[("c", 0.7)]),
        ];
        let n = build_acyclic(&v, &good(&["a", "b", "c"]), &NetworkConfig::default()).unwrap();
        assert_eq!(edge_set(&n), vec![pair("a", "b"), pair("b", "c")]);
        assert!(n.is_acyclic_build());
    }

    #[test]
    fn three_cycle_with_second_round() {
        let v = [
            iv("b", &[("a", 0.9), ("c", 0.3)]),
            iv("c", &[("b", 0.8)]),
            iv("a", &[("c", 0.7), ("b", 0.5)]),
        ];
        let n = build_acyclic(&v, &good(&["a", "b", "c"]), &NetworkConfig::default()).unwrap();
        // round 1 as above, c->a deleted. round 2 adds b->a (0.5) and c->b (0.3),
        // closing 2-cycles (a, b) and (b, c); each loses its added edge
        assert_eq!(edge_set(&n), vec![pair("a", "b"), pair("b", "c")]);
    }

    #[test]
    fn tie_break_deletes_smaller_source() {
        let v = [iv("a", &[("b", 0.6)]), iv("b", &[("a", 0.6)])];
        let n = build_acyclic(&v, &good(&["a", "b"]), &NetworkConfig::default()).unwrap();
        assert_eq!(edge_set(&n), vec![pair("b", "a")]);
    }

    #[test]
    fn star_is_unchanged() {
        let v = [iv("y", &[("x1", 1.0), ("x2", 0.4)])];
        let q = good(&["y"]);
        let cfg = NetworkConfig::default();
        assert_eq!(
            edge_set(&build_acyclic(&v, &q, &cfg).unwrap()),
            edge_set(&build_cyclic(&v, &q, &cfg).unwrap())
        );
    }

    #[test]
    fn shortest_cycle_examples() {
        let dag = Network::from_edges(["a", "b", "c"], [("a", "b", 0.5), ("b", "c", 0.5)]).unwrap();
        assert!(find_shortest_cycles(&dag).is_empty());
        let two = Network::from_edges(["a", "b"], [("a", "b", 0.5), ("b", "a", 0.5)]).unwrap();
        assert_eq!(find_shortest_cycles(&two), vec![vec!["a".to_string(), "b".to_string()]]);
        let mixed = Network::from_edges(
            ["a", "b", "c", "d", "e"],
            [
                ("a", "b", 0.5),
                ("b", "a", 0.5),
                ("c", "d", 0.5),
                ("d", "e", 0.5),
                ("e", "c", 0.5),
            ],
        )
        .unwrap();
        assert_eq!(find_shortest_cycles(&mixed), vec![vec!["a".to_string(), "b".to_string()]]);
    }

    #[test]
    fn dot_format() {
        let empty = Network::from_edges(Vec::<&str>::new(), vec![]).unwrap();
        assert_eq!(empty.to_dot(), "digraph {\n}\n");
        let n = Network::from_edges(["b", "a"], [("a", "b", 0.5)]).unwrap();
        let dot = n.to_dot();
        assert_eq!(dot, "digraph {\n  a;\n  b;\n  a -> b [label=\"0.50\"];\n}\n");
        assert_eq!(dot, export_dot(&n));
        let odd = Network::from_edges(["x y"], vec![]).unwrap();
        assert!(odd.to_dot().contains("\"x y\";"));
    }

    #[test]
    fn from_edges_validation() {
        assert!(Network::from_edges(["a"], [("a", "a", 0.5)]).is_err());
        assert!(Network::from_edges(["a", "b"], [("a", "b", 0.0)]).is_err());
        assert!(Network::from_edges(["a", "b"], [("a", "b", 0.5), ("a", "b", 0.4)]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(NetworkConfig { impact_threshold: 1.0, ..Default::default() }.validate().is_err());
        assert!(NetworkConfig { nmse_threshold: -0.1, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let net = Network::from_edges(["a", "b", "c"], [("a", "b", 0.5), ("c", "b", 1.0)]).unwrap();
        let text = serde_json::to_string(&net).unwrap();
        assert!(text.contains(r#"{"source":"a","target":"b","weight":0.5}"#));
        assert_eq!(serde_json::from_str::<Network>(&text).unwrap(), net);
    }
}
