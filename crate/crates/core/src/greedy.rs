//! Greedy speaker labelling: grow a labelled set from the OP along the
//! heaviest outgoing edge, giving each newcomer the label opposite to the
//! speaker it attached through (Prim's algorithm with alternating labels).

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use crate::corpus::{SpeakerId, StanceLabel};
use crate::graph::InteractionNetwork;

/// One step of the expansion. Seeds (the OP, and the first speaker of every
/// component not containing it) have no attaching edge.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyStep {
    pub speaker: SpeakerId,
    pub via: Option<SpeakerId>,
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult {
    pub labels: BTreeMap<SpeakerId, StanceLabel>,
    pub visit_order: Vec<GreedyStep>,
}

struct Frontier<'a> {
    weight: f64,
    // (min endpoint, max endpoint) for the tie-break
    key: (&'a SpeakerId, &'a SpeakerId),
    from: &'a SpeakerId,
    to: &'a SpeakerId,
}

impl PartialEq for Frontier<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier<'_> {}

impl PartialOrd for Frontier<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier<'_> {
    // Max-heap order: heavier first, then the lexicographically smaller pair.
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then_with(|| Reverse(self.key).cmp(&Reverse(other.key)))
    }
}

/// Labels every speaker of `g`. The OP (or, without one, the smallest
/// speaker) seeds the first expansion with `SideA`; each component the
/// expansion cannot reach is seeded from its smallest unlabelled speaker.
pub fn greedy_label(g: &InteractionNetwork) -> GreedyResult {
    let mut labels: BTreeMap<SpeakerId, StanceLabel> = BTreeMap::new();
    let mut visit_order = Vec::with_capacity(g.node_count());
    let mut heap: BinaryHeap<Frontier<'_>> = BinaryHeap::new();

    let first = g.op().filter(|o| g.contains(o)).or_else(|| g.nodes().next());
    let mut seeds = first.into_iter().chain(g.nodes());

    while labels.len() < g.node_count() {
        let seed = seeds
            .find(|s| !labels.contains_key(*s))
            .expect("an unlabelled node remains");
        labels.insert(seed.clone(), StanceLabel::SideA);
        visit_order.push(GreedyStep {
            speaker: seed.clone(),
            via: None,
            weight: None,
        });
        push_edges(g, seed, &labels, &mut heap);

        while let Some(edge) = heap.pop() {
            if labels.contains_key(edge.to) {
                continue;
            }
            let label = labels[edge.from].flip();
            labels.insert(edge.to.clone(), label);
            visit_order.push(GreedyStep {
                speaker: edge.to.clone(),
                via: Some(edge.from.clone()),
                weight: Some(edge.weight),
            });
            push_edges(g, edge.to, &labels, &mut heap);
        }
    }

    GreedyResult {
        labels,
        visit_order,
    }
}

fn push_edges<'a>(
    g: &'a InteractionNetwork,
    from: &'a SpeakerId,
    labels: &BTreeMap<SpeakerId, StanceLabel>,
    heap: &mut BinaryHeap<Frontier<'a>>,
) {
    for (to, weight) in g.neighbors(from) {
        if labels.contains_key(to) {
            continue;
        }
        let key = if from < to { (from, to) } else { (to, from) };
        heap.push(Frontier {
            weight,
            key,
            from,
            to,
        });
    }
}
