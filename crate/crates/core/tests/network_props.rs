use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::toposort;
use petgraph::graph::DiGraph;
use proptest::prelude::*;
use vindrift::impacts::ImpactVector;
use vindrift::network::{build_acyclic, build_cyclic, find_shortest_cycles};
use vindrift::{Network, NetworkConfig, QualityReport};

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

/// Impact vectors from a row-major matrix of raw increases; `m[t][s]` is the
/// raw impact of `s` on `t`, the diagonal is ignored.
fn impacts_of(m: &[Vec<f64>]) -> (Vec<ImpactVector>, BTreeMap<String, QualityReport>) {
    let vars = names(m.len());
    let impacts = m
        .iter()
        .enumerate()
        .map(|(t, row)| {
            let raw = row
                .iter()
                .enumerate()
                .filter(|(s, _)| *s != t)
                .map(|(s, v)| (vars[s].clone(), *v))
                .collect();
            ImpactVector::from_raw(vars[t].clone(), raw)
        })
        .collect();
    let q = vars
        .iter()
        .map(|v| (v.clone(), QualityReport { r2: 1.0, nmse: 0.0 }))
        .collect();
    (impacts, q)
}

fn matrix(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (3..=max).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0.0..1.0f64, n), n))
}

fn petgraph_acyclic(net: &Network) -> bool {
    let mut g = DiGraph::<(), ()>::new();
    let idx: BTreeMap<String, _> = net.node_names().into_iter().map(|n| (n, g.add_node(()))).collect();
    for e in net.edges() {
        g.add_edge(idx[&e.source], idx[&e.target], ());
    }
    toposort(&g, None).is_ok()
}

/// Every simple cycle by brute force over node sequences, keeping the
/// shortest ones, rotated to start at their smallest node.
fn brute_force_cycles(net: &Network) -> Vec<Vec<String>> {
    let nodes = net.node_names();
    let mut found: BTreeSet<Vec<String>> = BTreeSet::new();
    fn walk(net: &Network, nodes: &[String], path: &mut Vec<String>, found: &mut BTreeSet<Vec<String>>) {
        let last = path.last().unwrap().clone();
        if path.len() >= 2 && net.weight(&last, &path[0]).is_some() {
            let k = path.iter().enumerate().min_by(|a, b| a.1.cmp(b.1)).unwrap().0;
            let mut c = path.clone();
            c.rotate_left(k);
            found.insert(c);
        }
        for v in nodes {
            if !path.contains(v) && net.weight(&last, v).is_some() {
                path.push(v.clone());
                walk(net, nodes, path, found);
                path.pop();
            }
        }
    }
    for n in &nodes {
        walk(net, &nodes, &mut vec![n.clone()], &mut found);
    }
    let Some(min) = found.iter().map(Vec::len).min() else {
        return vec![];
    };
    found.into_iter().filter(|c| c.len() == min).collect()
}

fn cfg(threshold: f64) -> NetworkConfig {
    NetworkConfig {
        impact_threshold: threshold,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn acyclic_build_has_topological_order(m in matrix(10), th in 0.0..0.5f64) {
        let (imp, q) = impacts_of(&m);
        let net = build_acyclic(&imp, &q, &cfg(th)).unwrap();
        prop_assert!(petgraph_acyclic(&net));
        prop_assert!(net.topological_order().is_some());
        prop_assert!(find_shortest_cycles(&net).is_empty());
    }

    #[test]
    fn acyclic_edges_are_cyclic_edges(m in matrix(8), th in 0.0..0.5f64) {
        let (imp, q) = impacts_of(&m);
        let cyc = build_cyclic(&imp, &q, &cfg(th)).unwrap();
        let acy = build_acyclic(&imp, &q, &cfg(th)).unwrap();
        for e in acy.edges() {
            prop_assert_eq!(cyc.weight(&e.source, &e.target), Some(e.weight));
        }
    }

    #[test]
    fn shortest_cycles_match_brute_force(m in matrix(5), th in 0.0..0.9f64) {
        let (imp, q) = impacts_of(&m);
        let net = build_cyclic(&imp, &q, &cfg(th)).unwrap();
        prop_assert_eq!(find_shortest_cycles(&net), brute_force_cycles(&net));
    }

    #[test]
    fn raising_threshold_only_removes_edges(m in matrix(8), a in 0.0..0.9f64, b in 0.0..0.9f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (imp, q) = impacts_of(&m);
        let loose = build_cyclic(&imp, &q, &cfg(lo)).unwrap();
        let tight = build_cyclic(&imp, &q, &cfg(hi)).unwrap();
        prop_assert!(tight.edge_count() <= loose.edge_count());
        for e in tight.edges() {
            prop_assert!(e.weight >= hi);
            prop_assert_eq!(loose.weight(&e.source, &e.target), Some(e.weight));
        }
    }
}

#[test]
fn rejected_models_contribute_no_edges() {
    let m = vec![vec![0.0, 1.0, 0.5], vec![1.0, 0.0, 0.5], vec![0.3, 0.9, 0.0]];
    let (imp, mut q) = impacts_of(&m);
    q.insert("v1".into(), QualityReport { r2: 0.1, nmse: 0.9 });
    let net = build_cyclic(&imp, &q, &cfg(0.1)).unwrap();
    assert!(net.incoming("v1").is_empty());
    assert!(!net.incoming("v0").is_empty());
    assert_eq!(net.node_names().len(), 3);
}
