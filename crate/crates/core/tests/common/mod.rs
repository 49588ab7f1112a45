#![allow(dead_code)]

use flowfit::demand::OdMatrix;
use flowfit::network::{Link, Network, Node};
use rand::seq::SliceRandom;
use rand::Rng;

/// A strongly connected random network on `n` nodes: a ring plus random
/// chords, at most one link per ordered node pair, with continuous times.
pub struct RandomNet {
    pub network: Network,
    pub times: Vec<f64>,
    pub anchors: Vec<usize>,
}

pub fn random_network<R: Rng>(rng: &mut R, n: usize, n_zones: usize) -> RandomNet {
    let nodes: Vec<Node> = (0..n).map(|i| Node::new(format!("v{i}"), i as f64, 0.0)).collect();
    let mut links = Vec::new();
    let mut add = |a: usize, b: usize, rng: &mut R| {
        let t0 = rng.random_range(1.0..20.0);
        links.push(Link::new(format!("v{a}>v{b}"), format!("v{a}"), format!("v{b}"), t0, 1000.0));
    };
    for a in 0..n {
        for b in 0..n {
            let ring = b == (a + 1) % n && n > 1;
            if a != b && (ring || rng.random_bool(0.35)) {
                add(a, b, rng);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let zone_nodes = &order[..n_zones.min(n)];
    let anchors = zone_nodes
        .iter()
        .enumerate()
        .map(|(k, &v)| (format!("z{k}"), format!("v{v}")))
        .collect();
    let network = Network::validated(nodes, links, anchors).expect("ring keeps it connected");
    let times = network.free_flow_times();
    let anchors = network.anchor_nodes().unwrap();
    RandomNet {
        network,
        times,
        anchors,
    }
}

/// Every simple path from `from` to `to`, as (cost, link indices).
pub fn simple_paths(network: &Network, times: &[f64], from: usize, to: usize) -> Vec<(f64, Vec<usize>)> {
    fn walk(
        network: &Network,
        times: &[f64],
        at: usize,
        to: usize,
        visited: &mut Vec<bool>,
        path: &mut Vec<usize>,
        cost: f64,
        out: &mut Vec<(f64, Vec<usize>)>,
    ) {
        if at == to {
            out.push((cost, path.clone()));
            return;
        }
        for l in 0..network.links().len() {
            let (a, b) = network.link_ends(l).unwrap();
            if a == at && !visited[b] {
                visited[b] = true;
                path.push(l);
                walk(network, times, b, to, visited, path, cost + times[l], out);
                path.pop();
                visited[b] = false;
            }
        }
    }
    let mut visited = vec![false; network.nodes().len()];
    visited[from] = true;
    let mut out = Vec::new();
    walk(network, times, from, to, &mut visited, &mut Vec::new(), 0.0, &mut out);
    out
}

/// The cheapest simple path, or `None` when two paths tie within `eps`.
pub fn unique_shortest(network: &Network, times: &[f64], from: usize, to: usize, eps: f64) -> Option<(f64, Vec<usize>)> {
    let mut paths = simple_paths(network, times, from, to);
    paths.sort_by(|a, b| a.0.total_cmp(&b.0));
    match paths.as_slice() {
        [best] => Some(best.clone()),
        [best, second, ..] if second.0 - best.0 > eps => Some(best.clone()),
        _ => None,
    }
}

pub fn integer_od<R: Rng>(rng: &mut R, zone_ids: Vec<String>) -> OdMatrix {
    let mut od = OdMatrix::zeros(zone_ids);
    let n = od.len();
    for i in 0..n {
        for j in 0..n {
            od.trips[[i, j]] = rng.random_range(0..50) as f64;
        }
    }
    od
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
