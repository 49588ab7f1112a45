//! Directed road network, volume-delay travel times, shortest paths and
//! interzonal skim matrices.
//!
//! Nodes and links are stored sorted by identifier, so everything derived
//! from a [`Network`] is independent of the order the input rows came in.
//! Identifiers compare lexicographically; that order is also the tie-break
//! order for equal-length shortest paths.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA1: f64 = 0.15;
pub const DEFAULT_ALPHA2: f64 = 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub node_id: String,
    /// Planar coordinates in km.
    pub x: f64,
    pub y: f64,
}

impl Node {
    pub fn new(node_id: impl Into<String>, x: f64, y: f64) -> Self {
        Self {
            node_id: node_id.into(),
            x,
            y,
        }
    }
}

/// A directed road section.
#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub link_id: String,
    pub from_node: String,
    pub to_node: String,
    /// Free-flow travel time in minutes.
    pub t0: f64,
    /// One-directional capacity in veh/24h.
    pub q_max: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Length in km, reporting only.
    pub length: Option<f64>,
}

impl Link {
    /// A link with the default BPR constants.
    pub fn new(
        link_id: impl Into<String>,
        from_node: impl Into<String>,
        to_node: impl Into<String>,
        t0: f64,
        q_max: f64,
    ) -> Self {
        Self {
            link_id: link_id.into(),
            from_node: from_node.into(),
            to_node: to_node.into(),
            t0,
            q_max,
            alpha1: DEFAULT_ALPHA1,
            alpha2: DEFAULT_ALPHA2,
            length: None,
        }
    }

    pub fn with_bpr(mut self, alpha1: f64, alpha2: f64) -> Self {
        self.alpha1 = alpha1;
        self.alpha2 = alpha2;
        self
    }

    fn check(&self) -> Option<String> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            Some(format!("free-flow time must be positive, got {}", self.t0))
        } else if !(self.q_max > 0.0 && self.q_max.is_finite()) {
            Some(format!("capacity must be positive, got {}", self.q_max))
        } else if !(self.alpha1 >= 0.0 && self.alpha1.is_finite()) {
            Some(format!("alpha1 must be nonnegative, got {}", self.alpha1))
        } else if !(self.alpha2 >= 1.0 && self.alpha2.is_finite()) {
            Some(format!("alpha2 must be at least 1, got {}", self.alpha2))
        } else if self.from_node == self.to_node {
            Some(format!("self-loop on node {}", self.from_node))
        } else {
            None
        }
    }
}

/// BPR travel time `t0 * (1 + alpha1 * (flow / q_max)^alpha2)` in minutes.
pub fn volume_delay(link: &Link, flow: f64) -> Result<f64> {
    if !(flow >= 0.0) {
        return Err(Error::Domain(format!(
            "negative flow {flow} on link {}",
            link.link_id
        )));
    }
    if flow == 0.0 {
        return Ok(link.t0);
    }
    Ok(link.t0 * (1.0 + link.alpha1 * (flow / link.q_max).powf(link.alpha2)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    DuplicateNode { node: String },
    DuplicateLink { link: String },
    MissingNode { link: String, node: String },
    InvalidLink { link: String, reason: String },
    DuplicateZone { zone: String },
    MissingAnchor { zone: String, node: String },
    NoOutgoingLinks { zone: String, node: String },
    NoIncomingLinks { zone: String, node: String },
    Unreachable { from: String, to: String },
    UnknownCountLink { link: String },
    DuplicateCount { link: String },
    UnknownAttribute { stratum: String, attribute: String },
    /// Another diagnostic located at a data row.
    AtRow {
        file: String,
        line: u64,
        detail: Box<Diagnostic>,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DuplicateNode { node } => write!(f, "duplicate node id {node}"),
            Diagnostic::DuplicateLink { link } => write!(f, "duplicate link id {link}"),
            Diagnostic::MissingNode { link, node } => {
                write!(f, "link {link} references missing node {node}")
            }
            Diagnostic::InvalidLink { link, reason } => write!(f, "link {link}: {reason}"),
            Diagnostic::DuplicateZone { zone } => write!(f, "duplicate zone id {zone}"),
            Diagnostic::MissingAnchor { zone, node } => {
                write!(f, "zone {zone} is anchored at missing node {node}")
            }
            Diagnostic::NoOutgoingLinks { zone, node } => write!(
                f,
                "connectivity: anchor node {node} of zone {zone} has no outgoing links"
            ),
            Diagnostic::NoIncomingLinks { zone, node } => write!(
                f,
                "connectivity: anchor node {node} of zone {zone} has no incoming links"
            ),
            Diagnostic::Unreachable { from, to } => {
                write!(f, "connectivity: zone {to} is not reachable from zone {from}")
            }
            Diagnostic::UnknownCountLink { link } => write!(f, "count references unknown link {link}"),
            Diagnostic::DuplicateCount { link } => write!(f, "link {link} is counted more than once"),
            Diagnostic::UnknownAttribute { stratum, attribute } => write!(
                f,
                "stratum {stratum} uses attribute {attribute:?}, which no zone declares or derives"
            ),
            Diagnostic::AtRow { file, line, detail } => write!(f, "{file}:{line}: {detail}"),
        }
    }
}

/// Link flows in veh/24h, keyed by link id.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowMap {
    link_ids: Arc<[String]>,
    values: Vec<f64>,
}

impl FlowMap {
    pub fn zeros(network: &Network) -> Self {
        Self {
            link_ids: Arc::clone(&network.link_ids),
            values: vec![0.0; network.links.len()],
        }
    }

    /// Wrap a dense vector aligned with [`Network::links`].
    pub fn from_values(network: &Network, values: Vec<f64>) -> Result<Self> {
        if values.len() != network.links.len() {
            return Err(Error::Dimension(format!(
                "{} flow values for {} links",
                values.len(),
                network.links.len()
            )));
        }
        Ok(Self {
            link_ids: Arc::clone(&network.link_ids),
            values,
        })
    }

    pub fn get(&self, link_id: &str) -> Option<f64> {
        self.index_of(link_id).map(|i| self.values[i])
    }

    pub(crate) fn index_of(&self, link_id: &str) -> Option<usize> {
        self.link_ids
            .binary_search_by(|id| id.as_str().cmp(link_id))
            .ok()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn link_ids(&self) -> &[String] {
        &self.link_ids
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.link_ids
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().copied())
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Elementwise sum; both maps must cover the same links.
    pub fn add(&mut self, other: &FlowMap) -> Result<()> {
        if self.link_ids != other.link_ids {
            return Err(Error::Dimension("flow maps cover different links".into()));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }
}

/// Interzonal travel times in minutes.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    pub zone_ids: Vec<String>,
    pub values: Array2<f64>,
}

impl CostMatrix {
    pub fn new(zone_ids: Vec<String>, values: Array2<f64>) -> Result<Self> {
        let n = zone_ids.len();
        if values.dim() != (n, n) {
            return Err(Error::Dimension(format!(
                "cost matrix of shape {:?} for {n} zones",
                values.dim()
            )));
        }
        if values.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::Domain("cost matrix entries must be finite and >= 0".into()));
        }
        Ok(Self { zone_ids, values })
    }

    pub fn len(&self) -> usize {
        self.zone_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zone_ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }
}

/// Replace the diagonal with half the smallest off-diagonal cost of each row.
/// A 1x1 matrix has no off-diagonal entries and gets 0.
pub fn fill_intrazonal(values: &mut Array2<f64>) {
    let n = values.nrows();
    for i in 0..n {
        let min_off = (0..n)
            .filter(|&j| j != i)
            .map(|j| values[[i, j]])
            .fold(f64::INFINITY, f64::min);
        values[[i, i]] = if min_off.is_finite() { 0.5 * min_off } else { 0.0 };
    }
}

/// Result of a single-origin label-setting search.
#[derive(Clone, Debug, PartialEq)]
pub struct ShortestPathTree {
    pub origin: usize,
    /// Distance per node index, `f64::INFINITY` when unreachable.
    pub distances: Vec<f64>,
    /// Link index used to enter each node, `None` for the origin and
    /// unreachable nodes.
    pub predecessors: Vec<Option<usize>>,
}

impl ShortestPathTree {
    pub fn is_reachable(&self, node: usize) -> bool {
        self.distances[node].is_finite()
    }

    pub fn distance(&self, node: usize) -> f64 {
        self.distances[node]
    }

    /// Link indices from the origin to `target`, in travel order.
    pub fn path_links(&self, network: &Network, target: usize) -> Option<Vec<usize>> {
        if !self.is_reachable(target) {
            return None;
        }
        let mut path = Vec::new();
        let mut node = target;
        while let Some(link) = self.predecessors[node] {
            path.push(link);
            node = network.link_ends[link].expect("tree links are resolved").0;
        }
        path.reverse();
        Some(path)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    nodes: Vec<Node>,
    links: Vec<Link>,
    link_ids: Arc<[String]>,
    node_index: HashMap<String, usize>,
    zone_anchors: Vec<(String, String)>,
    anchor_index: Vec<Option<usize>>,
    link_ends: Vec<Option<(usize, usize)>>,
    outgoing: Vec<Vec<usize>>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.links == other.links
            && self.zone_anchors == other.zone_anchors
    }
}

impl Network {
    /// Build a network without validating it; see [`Network::validated`].
    ///
    /// `zone_anchors` pairs each zone id with its anchor node id and fixes
    /// the zone order of every skim and OD matrix.
    pub fn new(
        mut nodes: Vec<Node>,
        mut links: Vec<Link>,
        zone_anchors: Vec<(String, String)>,
    ) -> Self {
        nodes.sort_by(|a, b| a.node_id.cmp(&b.node_id));
        links.sort_by(|a, b| a.link_id.cmp(&b.link_id));
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            node_index.entry(n.node_id.clone()).or_insert(i);
        }
        let link_ends: Vec<_> = links
            .iter()
            .map(|l| {
                let from = node_index.get(&l.from_node)?;
                let to = node_index.get(&l.to_node)?;
                Some((*from, *to))
            })
            .collect();
        let mut outgoing = vec![Vec::new(); nodes.len()];
        for (li, ends) in link_ends.iter().enumerate() {
            if let Some((from, _)) = ends {
                outgoing[*from].push(li);
            }
        }
        let anchor_index = zone_anchors
            .iter()
            .map(|(_, node)| node_index.get(node).copied())
            .collect();
        let link_ids = links.iter().map(|l| l.link_id.clone()).collect();
        Self {
            nodes,
            links,
            link_ids,
            node_index,
            zone_anchors,
            anchor_index,
            link_ends,
            outgoing,
        }
    }

    /// Build and validate; any diagnostic becomes [`Error::Validation`].
    pub fn validated(
        nodes: Vec<Node>,
        links: Vec<Link>,
        zone_anchors: Vec<(String, String)>,
    ) -> Result<Self> {
        let network = Self::new(nodes, links, zone_anchors);
        let diags = validate(&network);
        if diags.is_empty() {
            Ok(network)
        } else {
            Err(Error::Validation(diags))
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn zone_anchors(&self) -> &[(String, String)] {
        &self.zone_anchors
    }

    pub fn zone_ids(&self) -> Vec<String> {
        self.zone_anchors.iter().map(|(z, _)| z.clone()).collect()
    }

    pub fn node_index(&self, node_id: &str) -> Option<usize> {
        self.node_index.get(node_id).copied()
    }

    pub fn link_index(&self, link_id: &str) -> Option<usize> {
        self.link_ids
            .binary_search_by(|id| id.as_str().cmp(link_id))
            .ok()
    }

    /// Node index of each zone's anchor, in zone order.
    pub fn anchor_nodes(&self) -> Result<Vec<usize>> {
        self.anchor_index
            .iter()
            .zip(&self.zone_anchors)
            .map(|(idx, (zone, node))| {
                idx.ok_or_else(|| {
                    Error::Validation(vec![Diagnostic::MissingAnchor {
                        zone: zone.clone(),
                        node: node.clone(),
                    }])
                })
            })
            .collect()
    }

    /// Tail and head node indices of a link.
    pub fn link_ends(&self, link: usize) -> Option<(usize, usize)> {
        self.link_ends[link]
    }

    pub fn free_flow_times(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.t0).collect()
    }

    /// Congested link times for the given flows.
    pub fn link_times(&self, flows: &FlowMap) -> Result<Vec<f64>> {
        if flows.link_ids != self.link_ids {
            return Err(Error::Dimension("flow map belongs to another network".into()));
        }
        self.links
            .iter()
            .zip(flows.values())
            .map(|(l, &q)| volume_delay(l, q))
            .collect()
    }

    /// Decompose into owned nodes, links and zone anchors.
    pub fn into_parts(self) -> (Vec<Node>, Vec<Link>, Vec<(String, String)>) {
        (self.nodes, self.links, self.zone_anchors)
    }

    fn reachable_from(&self, start: usize, reverse: bool) -> Vec<bool> {
        let mut incoming = Vec::new();
        if reverse {
            incoming = vec![Vec::new(); self.nodes.len()];
            for ends in self.link_ends.iter().flatten() {
                incoming[ends.1].push(ends.0);
            }
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            let next: Vec<usize> = if reverse {
                incoming[u].clone()
            } else {
                self.outgoing[u]
                    .iter()
                    .filter_map(|&l| self.link_ends[l].map(|e| e.1))
                    .collect()
            };
            for v in next {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}

/// Check every network invariant, returning all violations found.
pub fn validate(network: &Network) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for pair in network.nodes.windows(2) {
        if pair[0].node_id == pair[1].node_id {
            diags.push(Diagnostic::DuplicateNode {
                node: pair[0].node_id.clone(),
            });
        }
    }
    for pair in network.links.windows(2) {
        if pair[0].link_id == pair[1].link_id {
            diags.push(Diagnostic::DuplicateLink {
                link: pair[0].link_id.clone(),
            });
        }
    }
    for link in &network.links {
        for node in [&link.from_node, &link.to_node] {
            if !network.node_index.contains_key(node) {
                diags.push(Diagnostic::MissingNode {
                    link: link.link_id.clone(),
                    node: node.clone(),
                });
            }
        }
        if let Some(reason) = link.check() {
            diags.push(Diagnostic::InvalidLink {
                link: link.link_id.clone(),
                reason,
            });
        }
    }
    let mut seen_zones = HashSet::new();
    for (zone, _) in &network.zone_anchors {
        if !seen_zones.insert(zone) {
            diags.push(Diagnostic::DuplicateZone { zone: zone.clone() });
        }
    }
    let mut anchors = Vec::new();
    for ((zone, node), idx) in network.zone_anchors.iter().zip(&network.anchor_index) {
        match idx {
            Some(i) => anchors.push((zone, *i)),
            None => diags.push(Diagnostic::MissingAnchor {
                zone: zone.clone(),
                node: node.clone(),
            }),
        }
    }
    if anchors.len() < 2 {
        return diags;
    }
    let mut incoming_count = vec![0usize; network.nodes.len()];
    for ends in network.link_ends.iter().flatten() {
        incoming_count[ends.1] += 1;
    }
    let mut isolated = false;
    for (zone, idx) in &anchors {
        let node = network.nodes[*idx].node_id.clone();
        if network.outgoing[*idx].is_empty() {
            isolated = true;
            diags.push(Diagnostic::NoOutgoingLinks {
                zone: (*zone).clone(),
                node: node.clone(),
            });
        }
        if incoming_count[*idx] == 0 {
            isolated = true;
            diags.push(Diagnostic::NoIncomingLinks {
                zone: (*zone).clone(),
                node,
            });
        }
    }
    if isolated {
        return diags;
    }
    // Strong connectivity over anchors: every anchor reaches the first and
    // is reached by it.
    let (root_zone, root) = anchors[0];
    let forward = network.reachable_from(root, false);
    let backward = network.reachable_from(root, true);
    for (zone, idx) in &anchors[1..] {
        if !forward[*idx] {
            diags.push(Diagnostic::Unreachable {
                from: root_zone.clone(),
                to: (*zone).clone(),
            });
        }
        if !backward[*idx] {
            diags.push(Diagnostic::Unreachable {
                from: (*zone).clone(),
                to: root_zone.clone(),
            });
        }
    }
    diags
}

fn check_times(network: &Network, link_times: &[f64]) -> Result<()> {
    if link_times.len() != network.links.len() {
        return Err(Error::Dimension(format!(
            "{} link times for {} links",
            link_times.len(),
            network.links.len()
        )));
    }
    if let Some((i, t)) = link_times
        .iter()
        .enumerate()
        .find(|(_, t)| !(**t > 0.0) || !t.is_finite())
    {
        return Err(Error::Domain(format!(
            "link {} has nonpositive or non-finite time {t}",
            network.links[i].link_id
        )));
    }
    Ok(())
}

pub(crate) fn tree_from(network: &Network, link_times: &[f64], origin: usize) -> ShortestPathTree {
    let n = network.nodes.len();
    let mut distances = vec![f64::INFINITY; n];
    let mut predecessors: Vec<Option<usize>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    distances[origin] = 0.0;
    heap.push(Reverse(Key(0.0, origin)));
    while let Some(Reverse(Key(d, u))) = heap.pop() {
        if settled[u] {
            continue;
        }
        settled[u] = true;
        for &li in &network.outgoing[u] {
            let Some((_, v)) = network.link_ends[li] else {
                continue;
            };
            if settled[v] {
                continue;
            }
            let candidate = d + link_times[li];
            let better = match candidate.total_cmp(&distances[v]) {
                Ordering::Less => true,
                // Equal distance: keep the predecessor with the smallest
                // node id, then the smallest link id.
                Ordering::Equal => predecessors[v].is_some_and(|p| {
                    let pu = network.link_ends[p].expect("resolved").0;
                    (u, li) < (pu, p)
                }),
                Ordering::Greater => false,
            };
            if better {
                distances[v] = candidate;
                predecessors[v] = Some(li);
                heap.push(Reverse(Key(candidate, v)));
            }
        }
    }
    ShortestPathTree {
        origin,
        distances,
        predecessors,
    }
}

/// Label-setting shortest paths from `origin` under the given link times.
pub fn shortest_path_tree(
    network: &Network,
    link_times: &[f64],
    origin: &str,
) -> Result<ShortestPathTree> {
    check_times(network, link_times)?;
    let origin = network
        .node_index(origin)
        .ok_or_else(|| Error::Domain(format!("unknown origin node {origin}")))?;
    Ok(tree_from(network, link_times, origin))
}

/// Shortest-path trees rooted at every zone anchor, in zone order.
pub fn anchor_trees(network: &Network, link_times: &[f64]) -> Result<Vec<ShortestPathTree>> {
    check_times(network, link_times)?;
    let anchors = network.anchor_nodes()?;
    Ok(anchors
        .par_iter()
        .map(|&a| tree_from(network, link_times, a))
        .collect())
}

/// Skim matrix from precomputed anchor trees.
pub fn skim_from_trees(network: &Network, trees: &[ShortestPathTree]) -> Result<CostMatrix> {
    let anchors = network.anchor_nodes()?;
    let n = anchors.len();
    let mut values = Array2::zeros((n, n));
    for (i, tree) in trees.iter().enumerate() {
        for (j, &dest) in anchors.iter().enumerate() {
            if i == j {
                continue;
            }
            if !tree.is_reachable(dest) {
                return Err(Error::Disconnected {
                    from: network.zone_anchors[i].0.clone(),
                    to: network.zone_anchors[j].0.clone(),
                });
            }
            values[[i, j]] = tree.distance(dest);
        }
    }
    fill_intrazonal(&mut values);
    CostMatrix::new(network.zone_ids(), values)
}

/// Interzonal shortest-path travel times between zone anchors.
pub fn skim_matrix(network: &Network, link_times: &[f64]) -> Result<CostMatrix> {
    let trees = anchor_trees(network, link_times)?;
    skim_from_trees(network, &trees)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anchors(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|(z, n)| (z.to_string(), n.to_string()))
            .collect()
    }

    fn bpr_link() -> Link {
        Link::new("l", "a", "b", 10.0, 1000.0)
    }

    #[test]
    fn volume_delay_examples() {
        assert_eq!(volume_delay(&bpr_link(), 0.0).unwrap(), 10.0);
        assert!((volume_delay(&bpr_link(), 1000.0).unwrap() - 11.5).abs() < 1e-12);
        assert!((volume_delay(&bpr_link(), 2000.0).unwrap() - 34.0).abs() < 1e-12);
        assert!(matches!(
            volume_delay(&bpr_link(), -1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn two_node_tree() {
        let net = Network::new(
            vec![Node::new("a", 0.0, 0.0), Node::new("b", 1.0, 0.0)],
            vec![Link::new("ab", "a", "b", 5.0, 100.0)],
            vec![],
        );
        let tree = shortest_path_tree(&net, &[5.0], "a").unwrap();
        let b = net.node_index("b").unwrap();
        assert_eq!(tree.distance(b), 5.0);
        assert_eq!(tree.path_links(&net, b).unwrap().len(), 1);
        let a = net.node_index("a").unwrap();
        assert_eq!(tree.distance(a), 0.0);
        assert!(tree.path_links(&net, a).unwrap().is_empty());

        let back = shortest_path_tree(&net, &[5.0], "b").unwrap();
        assert!(!back.is_reachable(a));
        assert!(shortest_path_tree(&net, &[0.0], "a").is_err());
    }

    #[test]
    fn diamond_prefers_shorter_branch() {
        let nodes = ["s", "u", "v", "t"]
            .iter()
            .map(|n| Node::new(*n, 0.0, 0.0))
            .collect();
        let links = vec![
            Link::new("su", "s", "u", 2.0, 100.0),
            Link::new("ut", "u", "t", 2.0, 100.0),
            Link::new("sv", "s", "v", 1.0, 100.0),
            Link::new("vt", "v", "t", 4.0, 100.0),
        ];
        let net = Network::new(nodes, links, vec![]);
        let times = net.free_flow_times();
        let tree = shortest_path_tree(&net, &times, "s").unwrap();
        let t = net.node_index("t").unwrap();
        assert_eq!(tree.distance(t), 4.0);
        let ids: Vec<_> = tree
            .path_links(&net, t)
            .unwrap()
            .into_iter()
            .map(|l| net.links()[l].link_id.as_str())
            .collect();
        assert_eq!(ids, ["su", "ut"]);
    }

    #[test]
    fn equal_paths_break_ties_on_smallest_node() {
        let nodes = ["s", "b", "a", "t"]
            .iter()
            .map(|n| Node::new(*n, 0.0, 0.0))
            .collect();
        let links = vec![
            Link::new("l1", "s", "b", 1.0, 100.0),
            Link::new("l2", "b", "t", 1.0, 100.0),
            Link::new("l3", "s", "a", 1.0, 100.0),
            Link::new("l4", "a", "t", 1.0, 100.0),
        ];
        let net = Network::new(nodes, links, vec![]);
        let tree = shortest_path_tree(&net, &net.free_flow_times(), "s").unwrap();
        let t = net.node_index("t").unwrap();
        let enter = tree.predecessors[t].unwrap();
        assert_eq!(net.links()[enter].from_node, "a");
    }

    #[test]
    fn skim_examples() {
        let single = Network::new(
            vec![Node::new("n", 0.0, 0.0)],
            vec![],
            anchors(&[("z", "n")]),
        );
        let c = skim_matrix(&single, &[]).unwrap();
        assert_eq!(c.values.dim(), (1, 1));
        assert_eq!(c.get(0, 0), 0.0);

        let pair = Network::new(
            vec![Node::new("a", 0.0, 0.0), Node::new("b", 1.0, 0.0)],
            vec![
                Link::new("ab", "a", "b", 12.0, 100.0),
                Link::new("ba", "b", "a", 12.0, 100.0),
            ],
            anchors(&[("A", "a"), ("B", "b")]),
        );
        let c = skim_matrix(&pair, &pair.free_flow_times()).unwrap();
        assert_eq!(c.get(0, 1), 12.0);
        assert_eq!(c.get(1, 0), 12.0);
        assert_eq!(c.get(0, 0), 6.0);

        let line = Network::new(
            vec![
                Node::new("a", 0.0, 0.0),
                Node::new("b", 1.0, 0.0),
                Node::new("c", 2.0, 0.0),
            ],
            vec![
                Link::new("ab", "a", "b", 5.0, 100.0),
                Link::new("ba", "b", "a", 5.0, 100.0),
                Link::new("bc", "b", "c", 7.0, 100.0),
                Link::new("cb", "c", "b", 7.0, 100.0),
            ],
            anchors(&[("1", "a"), ("2", "b"), ("3", "c")]),
        );
        let c = skim_matrix(&line, &line.free_flow_times()).unwrap();
        assert_eq!(c.get(0, 2), 12.0);
        assert_eq!(c.get(2, 0), 12.0);
        assert_eq!(c.get(1, 1), 2.5);
    }

    #[test]
    fn skim_reports_disconnected_pair() {
        let net = Network::new(
            vec![Node::new("a", 0.0, 0.0), Node::new("b", 1.0, 0.0)],
            vec![Link::new("ab", "a", "b", 3.0, 100.0)],
            anchors(&[("A", "a"), ("B", "b")]),
        );
        match skim_matrix(&net, &[3.0]) {
            Err(Error::Disconnected { from, to }) => {
                assert_eq!((from.as_str(), to.as_str()), ("B", "A"))
            }
            other => panic!("expected disconnection, got {other:?}"),
        }
    }

    #[test]
    fn validate_reports_missing_node() {
        let net = Network::new(
            vec![Node::new("a", 0.0, 0.0)],
            vec![Link::new("ax", "a", "x", 3.0, 100.0)],
            vec![],
        );
        let diags = validate(&net);
        assert_eq!(
            diags,
            vec![Diagnostic::MissingNode {
                link: "ax".into(),
                node: "x".into()
            }]
        );
    }

    #[test]
    fn validate_reports_sink_anchor() {
        let net = Network::new(
            vec![Node::new("a", 0.0, 0.0), Node::new("b", 1.0, 0.0)],
            vec![Link::new("ab", "a", "b", 3.0, 100.0)],
            anchors(&[("A", "a"), ("B", "b")]),
        );
        let diags = validate(&net);
        assert!(diags.contains(&Diagnostic::NoOutgoingLinks {
            zone: "B".into(),
            node: "b".into()
        }));
        assert!(Network::validated(
            net.nodes().to_vec(),
            net.links().to_vec(),
            net.zone_anchors().to_vec()
        )
        .is_err());
    }

    #[test]
    fn validate_reports_bad_link_fields() {
        let mut link = Link::new("ab", "a", "b", 0.0, 100.0);
        link.alpha2 = 0.5;
        let net = Network::new(
            vec![Node::new("a", 0.0, 0.0), Node::new("b", 1.0, 0.0)],
            vec![link, Link::new("ab", "b", "a", 1.0, 100.0)],
            vec![],
        );
        let diags = validate(&net);
        assert!(diags.contains(&Diagnostic::DuplicateLink { link: "ab".into() }));
        assert!(diags
            .iter()
            .any(|d| matches!(d, Diagnostic::InvalidLink { link, .. } if link == "ab")));
    }

    #[test]
    fn flow_map_lookup_and_sum() {
        let net = Network::new(
            vec![Node::new("a", 0.0, 0.0), Node::new("b", 1.0, 0.0)],
            vec![
                Link::new("ba", "b", "a", 1.0, 100.0),
                Link::new("ab", "a", "b", 1.0, 100.0),
            ],
            vec![],
        );
        let mut f = FlowMap::from_values(&net, vec![30.0, 1.0]).unwrap();
        let g = FlowMap::from_values(&net, vec![70.0, 2.0]).unwrap();
        f.add(&g).unwrap();
        assert_eq!(f.get("ab"), Some(100.0));
        assert_eq!(f.get("ba"), Some(3.0));
        assert_eq!(f.get("zz"), None);
        assert!(FlowMap::from_values(&net, vec![1.0]).is_err());
    }
}
