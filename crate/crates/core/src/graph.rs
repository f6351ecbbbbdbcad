//! Speaker interaction networks and their 2-core.
//!
//! Speakers are nodes; an undirected edge between two speakers carries
//! `alpha * (replies both ways) + beta * (quotes both ways)`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;

use thiserror::Error;

use crate::corpus::{ConversationTree, SpeakerId};

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("invalid edge weights alpha={alpha}, beta={beta}: both must be >= 0 and not both 0")]
    InvalidWeights { alpha: f64, beta: f64 },
}

/// Reply (`alpha`) and quote (`beta`) weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightConfig {
    alpha: f64,
    beta: f64,
}

impl WeightConfig {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, GraphError> {
        if !(alpha >= 0.0 && beta >= 0.0 && alpha + beta > 0.0) || !(alpha + beta).is_finite() {
            return Err(GraphError::InvalidWeights { alpha, beta });
        }
        Ok(WeightConfig { alpha, beta })
    }

    /// Quote-heavy forums where replies mostly target the OP.
    pub fn quote_heavy() -> Self {
        WeightConfig {
            alpha: 0.02,
            beta: 1.0,
        }
    }

    /// Reply-only weighting, for platforms where quoting is rare.
    pub fn reply_only() -> Self {
        WeightConfig {
            alpha: 1.0,
            beta: 0.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig::reply_only()
    }
}

/// Undirected weighted speaker graph. No self-loops; every stored weight is
/// strictly positive.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractionNetwork {
    adj: BTreeMap<SpeakerId, BTreeMap<SpeakerId, f64>>,
    op: Option<SpeakerId>,
}

impl InteractionNetwork {
    pub fn new(op: Option<SpeakerId>) -> Self {
        InteractionNetwork {
            adj: BTreeMap::new(),
            op,
        }
    }

    pub fn add_node(&mut self, s: SpeakerId) {
        self.adj.entry(s).or_default();
    }

    /// Adds `w` to the weight of `{u, v}`. Self-loops and non-positive
    /// increments are ignored.
    pub fn add_weight(&mut self, u: &SpeakerId, v: &SpeakerId, w: f64) {
        if u == v || w <= 0.0 {
            self.add_node(u.clone());
            self.add_node(v.clone());
            return;
        }
        *self
            .adj
            .entry(u.clone())
            .or_default()
            .entry(v.clone())
            .or_insert(0.0) += w;
        *self
            .adj
            .entry(v.clone())
            .or_default()
            .entry(u.clone())
            .or_insert(0.0) += w;
    }

    pub fn op(&self) -> Option<&SpeakerId> {
        self.op.as_ref()
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(BTreeMap::len).sum::<usize>() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn contains(&self, s: &SpeakerId) -> bool {
        self.adj.contains_key(s)
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &SpeakerId> {
        self.adj.keys()
    }

    /// Each edge once, as `(u, v, w)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (&SpeakerId, &SpeakerId, f64)> {
        self.adj.iter().flat_map(|(u, nbrs)| {
            nbrs.range((std::ops::Bound::Excluded(u), std::ops::Bound::Unbounded))
                .map(move |(v, &w)| (u, v, w))
        })
    }

    pub fn neighbors(&self, s: &SpeakerId) -> impl Iterator<Item = (&SpeakerId, f64)> {
        self.adj
            .get(s)
            .into_iter()
            .flat_map(|n| n.iter().map(|(v, &w)| (v, w)))
    }

    pub fn degree(&self, s: &SpeakerId) -> usize {
        self.adj.get(s).map_or(0, BTreeMap::len)
    }

    pub fn weight(&self, u: &SpeakerId, v: &SpeakerId) -> Option<f64> {
        self.adj.get(u).and_then(|n| n.get(v)).copied()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges().map(|(_, _, w)| w).sum()
    }

    /// Subgraph induced by `keep`; the OP is retained only if kept.
    pub fn induced<'a>(&self, keep: impl IntoIterator<Item = &'a SpeakerId>) -> InteractionNetwork {
        let keep: BTreeSet<&SpeakerId> = keep.into_iter().filter(|s| self.contains(s)).collect();
        let adj = keep
            .iter()
            .map(|&u| {
                let nbrs = self.adj[u]
                    .iter()
                    .filter(|(v, _)| keep.contains(v))
                    .map(|(v, &w)| (v.clone(), w))
                    .collect();
                (u.clone(), nbrs)
            })
            .collect();
        InteractionNetwork {
            adj,
            op: self.op.clone().filter(|o| keep.contains(o)),
        }
    }

    /// Writes `u,v,weight` rows (with header) for every edge.
    pub fn write_edge_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["u", "v", "weight"])?;
        for (u, v, weight) in self.edges() {
            w.write_record([u.as_str(), v.as_str(), &weight.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the interaction network of one conversation. Every author is a
/// node; self-interactions and quotes of non-participants contribute nothing.
pub fn build_network(tree: &ConversationTree, cfg: &WeightConfig) -> InteractionNetwork {
    let mut g = InteractionNetwork::new(Some(tree.op().clone()));
    let authors = tree.authors();
    for a in &authors {
        g.add_node(a.clone());
    }
    let post_author = tree.post_authors();

    // Accumulate integer counts first so the weights are exactly
    // alpha * replies + beta * quotes.
    let mut replies: BTreeMap<(&SpeakerId, &SpeakerId), u64> = BTreeMap::new();
    let mut quotes: BTreeMap<(&SpeakerId, &SpeakerId), u64> = BTreeMap::new();
    for post in tree.posts() {
        let u = &post.author;
        if let Some(pid) = &post.parent_id {
            let v = post_author[pid.as_str()];
            if u != v {
                let k = if u < v { (u, v) } else { (v, u) };
                *replies.entry(k).or_insert(0) += 1;
            }
        }
        for v in &post.quoted_authors {
            if v != u {
                if let Some(v) = authors.get(v) {
                    let k = if u < v { (u, v) } else { (v, u) };
                    *quotes.entry(k).or_insert(0) += 1;
                }
            }
        }
    }
    let pairs: BTreeSet<_> = replies.keys().chain(quotes.keys()).copied().collect();
    for (u, v) in pairs {
        let r = replies.get(&(u, v)).copied().unwrap_or(0) as f64;
        let q = quotes.get(&(u, v)).copied().unwrap_or(0) as f64;
        let w = cfg.alpha * r + cfg.beta * q;
        if w > 0.0 {
            g.add_weight(u, v, w);
        }
    }
    g
}

/// The 2-core of a network, with the peeled speakers in removal order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreSubgraph {
    pub subgraph: InteractionNetwork,
    pub removed: Vec<SpeakerId>,
}

impl CoreSubgraph {
    pub fn is_empty(&self) -> bool {
        self.subgraph.is_empty()
    }
}

/// Peels nodes of degree < 2 until none remain. Among peelable nodes the
/// smallest id goes first, which fixes `removed`; the core itself does not
/// depend on the order.
pub fn two_core(g: &InteractionNetwork) -> CoreSubgraph {
    let mut degree: BTreeMap<&SpeakerId, usize> = g.nodes().map(|s| (s, g.degree(s))).collect();
    let mut ready: BTreeSet<&SpeakerId> = degree
        .iter()
        .filter(|(_, &d)| d < 2)
        .map(|(&s, _)| s)
        .collect();
    let mut gone: BTreeSet<&SpeakerId> = BTreeSet::new();
    let mut removed = Vec::new();
    while let Some(s) = ready.pop_first() {
        gone.insert(s);
        removed.push(s.clone());
        for (v, _) in g.neighbors(s) {
            if gone.contains(v) {
                continue;
            }
            let d = degree.get_mut(v).expect("neighbor is a node");
            *d -= 1;
            if *d < 2 {
                ready.insert(v);
            }
        }
    }
    let core = g.induced(g.nodes().filter(|s| !gone.contains(s)));
    CoreSubgraph {
        subgraph: core,
        removed,
    }
}

/// Maximal connected subgraphs, ordered by their smallest speaker.
pub fn connected_components(g: &InteractionNetwork) -> Vec<InteractionNetwork> {
    let mut seen: BTreeSet<&SpeakerId> = BTreeSet::new();
    let mut out = Vec::new();
    for start in g.nodes() {
        if seen.contains(start) {
            continue;
        }
        let mut members = vec![start];
        seen.insert(start);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for (v, _) in g.neighbors(u) {
                if seen.insert(v) {
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
        out.push(g.induced(members));
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::corpus::tests::post;
    use crate::corpus::Post;
    use proptest::prelude::*;

    pub fn s(x: &str) -> SpeakerId {
        SpeakerId::from(x)
    }

    pub fn net(edges: &[(&str, &str, f64)]) -> InteractionNetwork {
        let mut g = InteractionNetwork::new(edges.first().map(|e| s(e.0)));
        for &(u, v, w) in edges {
            g.add_weight(&s(u), &s(v), w);
        }
        g
    }

    fn reply_tree(replies: &[(&str, &str)]) -> ConversationTree {
        // Root by the first replier's target; each reply is to the latest
        // post of the target author.
        let root_author = replies.first().map_or("A", |r| r.1);
        let mut posts = vec![post("p0", root_author, None)];
        let mut last: BTreeMap<&str, String> = BTreeMap::from([(root_author, "p0".to_string())]);
        for (i, &(from, to)) in replies.iter().enumerate() {
            let id = format!("p{}", i + 1);
            let parent = last.get(to).cloned().expect("target posted before");
            posts.push(post(&id, from, Some(&parent)));
            last.insert(from, id);
        }
        ConversationTree::new("c", "t", posts).unwrap()
    }

    #[test]
    fn reply_counts_both_directions() {
        // B posts root; A replies to B three times, B replies to A twice.
        let t = reply_tree(&[
            ("A", "B"),
            ("B", "A"),
            ("A", "B"),
            ("B", "A"),
            ("A", "B"),
        ]);
        let g = build_network(&t, &WeightConfig::reply_only());
        assert_eq!(g.weight(&s("A"), &s("B")), Some(5.0));
        assert_eq!(g.weight(&s("B"), &s("A")), Some(5.0));
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn quote_weight_quote_heavy_setting() {
        // B posts the root, C replies, A replies to C while quoting B: the
        // only A-B interaction is one quote.
        let mut quoting: Post = post("p3", "A", Some("p2"));
        quoting.quoted_authors = vec![s("B")];
        let t = ConversationTree::new(
            "c",
            "t",
            vec![post("p1", "B", None), post("p2", "C", Some("p1")), quoting],
        )
        .unwrap();
        let g = build_network(&t, &WeightConfig::quote_heavy());
        assert_eq!(g.weight(&s("A"), &s("B")), Some(1.0));
        assert!((g.weight(&s("A"), &s("C")).unwrap() - 0.02).abs() < 1e-15);

        // a post that both replies to and quotes the same speaker counts twice
        let mut both = post("p2", "A", Some("p1"));
        both.quoted_authors = vec![s("B")];
        let t = ConversationTree::new("c", "t", vec![post("p1", "B", None), both]).unwrap();
        let g = build_network(&t, &WeightConfig::quote_heavy());
        assert!((g.weight(&s("A"), &s("B")).unwrap() - 1.02).abs() < 1e-12);
    }

    #[test]
    fn single_speaker_network() {
        let t = ConversationTree::new(
            "c",
            "t",
            vec![post("p1", "A", None), post("p2", "A", Some("p1"))],
        )
        .unwrap();
        let g = build_network(&t, &WeightConfig::reply_only());
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn zero_weight_pairs_have_no_edge() {
        let t = reply_tree(&[("A", "B")]);
        let g = build_network(&t, &WeightConfig::new(0.0, 1.0).unwrap());
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn invalid_weights() {
        assert!(WeightConfig::new(0.0, 0.0).is_err());
        assert!(WeightConfig::new(-1.0, 2.0).is_err());
        assert!(WeightConfig::new(f64::NAN, 1.0).is_err());
        assert!(WeightConfig::new(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn core_of_path_is_empty() {
        let c = two_core(&net(&[("A", "B", 1.0), ("B", "C", 1.0)]));
        assert!(c.is_empty());
        assert_eq!(c.removed, vec![s("A"), s("B"), s("C")]);
    }

    #[test]
    fn core_of_triangle_is_whole() {
        let g = net(&[("A", "B", 1.0), ("B", "C", 1.0), ("A", "C", 1.0)]);
        let c = two_core(&g);
        assert_eq!(c.subgraph, g);
        assert!(c.removed.is_empty());
    }

    #[test]
    fn pendant_removed() {
        let g = net(&[("A", "B", 1.0), ("B", "C", 1.0), ("A", "C", 1.0), ("D", "A", 1.0)]);
        let c = two_core(&g);
        assert_eq!(c.subgraph.nodes().cloned().collect::<Vec<_>>(), vec![s("A"), s("B"), s("C")]);
        assert_eq!(c.removed, vec![s("D")]);
        assert_eq!(c.subgraph.op(), Some(&s("A")));
    }

    #[test]
    fn components() {
        let g = net(&[("A", "B", 1.0), ("C", "D", 1.0)]);
        assert_eq!(connected_components(&g).len(), 2);
        let tri = net(&[("A", "B", 1.0), ("B", "C", 1.0), ("A", "C", 1.0)]);
        assert_eq!(connected_components(&tri).len(), 1);
        assert!(connected_components(&InteractionNetwork::default()).is_empty());
    }

    #[test]
    fn edge_csv() {
        let g = net(&[("B", "A", 2.5), ("A", "C", 1.0)]);
        let mut buf = Vec::new();
        g.write_edge_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "u,v,weight\nA,B,2.5\nA,C,1\n");
    }

    fn arb_edges() -> impl Strategy<Value = Vec<(u8, u8)>> {
        prop::collection::vec((0u8..8, 0u8..8), 0..24)
    }

    fn graph_from(edges: &[(u8, u8)]) -> InteractionNetwork {
        let mut g = InteractionNetwork::new(None);
        for &(a, b) in edges {
            g.add_weight(&s(&format!("n{a}")), &s(&format!("n{b}")), 1.0);
        }
        g
    }

    proptest! {
        #[test]
        fn two_core_idempotent_and_min_degree(edges in arb_edges()) {
            let g = graph_from(&edges);
            let c = two_core(&g);
            for v in c.subgraph.nodes() {
                prop_assert!(c.subgraph.degree(v) >= 2);
            }
            let again = two_core(&c.subgraph);
            prop_assert_eq!(&again.subgraph, &c.subgraph);
            prop_assert!(again.removed.is_empty());

            // replay the removal order
            let mut alive: BTreeSet<SpeakerId> = g.nodes().cloned().collect();
            for r in &c.removed {
                let d = g.neighbors(r).filter(|(v, _)| alive.contains(*v)).count();
                prop_assert!(d <= 1);
                alive.remove(r);
            }
            prop_assert_eq!(alive.len(), c.subgraph.node_count());
        }

        #[test]
        fn build_symmetric_and_monotone(
            replies in prop::collection::vec((0u8..5, 0u8..5), 1..20),
            alpha in 0.0f64..3.0,
            beta in 0.01f64..3.0,
        ) {
            // chain of posts where post i replies to post `target`
            let mut posts = vec![post("p0", "s0", None)];
            for (i, &(author, target)) in replies.iter().enumerate() {
                let parent = format!("p{}", (target as usize).min(i));
                let mut p = post(&format!("p{}", i + 1), &format!("s{author}"), Some(&parent));
                p.quoted_authors = vec![s(&format!("s{target}"))];
                posts.push(p);
            }
            let cfg = WeightConfig::new(alpha, beta).unwrap();
            let t = ConversationTree::new("c", "t", posts.clone()).unwrap();
            let g = build_network(&t, &cfg);
            for (u, v, w) in g.edges() {
                prop_assert!(w > 0.0);
                prop_assert_eq!(g.weight(v, u), Some(w));
                prop_assert!(u != v);
            }
            // one more reply between s0 and s1
            let n = posts.len();
            posts.push(post(&format!("p{n}"), "s1", Some("p0")));
            let t2 = ConversationTree::new("c", "t", posts).unwrap();
            let g2 = build_network(&t2, &cfg);
            let before = g.weight(&s("s0"), &s("s1")).unwrap_or(0.0);
            let after = g2.weight(&s("s0"), &s("s1")).unwrap_or(0.0);
            prop_assert!(after >= before);
        }
    }
}
