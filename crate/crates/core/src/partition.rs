//! From speaker embedding to stance partition.
//!
//! Core speakers are split by the best of several random hyperplanes through
//! the origin. The two resulting label classes form cones on the unit sphere
//! whose diameters give a confidence score. Speakers peeled off during the
//! 2-core computation are then labelled outward from the core, each taking
//! the label opposite to its attaching neighbour.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{validate_conversation, ConversationTree, SpeakerId, StanceLabel};
use crate::embed::{dot, norm, solve_embedding, SolverConfig, SpeakerEmbedding};
use crate::graph::{build_network, connected_components, two_core, CoreSubgraph, InteractionNetwork, WeightConfig};
use crate::greedy::greedy_label;

/// Slack on the in-cone distance test, so vectors that coincide with their
/// center up to rounding count as inside a zero-diameter cone.
const CONE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundingConfig {
    pub num_hyperplanes: usize,
    pub seed: u64,
    /// Diameter used to fill `StancePartition::in_cone`. `None` keeps every
    /// core speaker.
    pub cone_diameter_threshold: Option<f64>,
}

impl Default for RoundingConfig {
    fn default() -> Self {
        RoundingConfig {
            num_hyperplanes: 100,
            seed: 0,
            cone_diameter_threshold: None,
        }
    }
}

impl RoundingConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.num_hyperplanes == 0 {
            return Err("num_hyperplanes must be at least 1".into());
        }
        if let Some(d) = self.cone_diameter_threshold {
            if d.is_nan() || d < 0.0 {
                return Err(format!("cone diameter must be >= 0, got {d}"));
            }
        }
        Ok(())
    }
}

/// One label class viewed as a cone of unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCone {
    /// Normalised mean of the member vectors; `None` for an empty class.
    pub center: Option<Vec<f64>>,
    /// Largest pairwise Euclidean distance between members, in `[0, 2]`.
    pub diameter: f64,
    pub members: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeStats {
    /// Indexed by `StanceLabel::index()`.
    pub classes: [ClassCone; 2],
    /// `1 - max(diameter) / 2`.
    pub confidence: f64,
}

impl ConeStats {
    pub fn class(&self, label: StanceLabel) -> &ClassCone {
        &self.classes[label.index()]
    }

    pub fn diameters(&self) -> [f64; 2] {
        [self.classes[0].diameter, self.classes[1].diameter]
    }
}

/// Cone statistics of a labelled embedding.
pub fn cone_stats(emb: &SpeakerEmbedding, labels: &BTreeMap<SpeakerId, StanceLabel>) -> ConeStats {
    let mut members: [Vec<&[f64]>; 2] = [Vec::new(), Vec::new()];
    for (s, v) in emb.order.iter().zip(&emb.vectors) {
        if let Some(l) = labels.get(s) {
            members[l.index()].push(v);
        }
    }
    let classes = members.map(|vs| {
        let mut diameter: f64 = 0.0;
        for (i, a) in vs.iter().enumerate() {
            for b in &vs[i + 1..] {
                let d: f64 = a.iter().zip(*b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                diameter = diameter.max(d);
            }
        }
        let center = vs.first().map(|first| {
            let mut mean = vec![0.0; first.len()];
            for v in &vs {
                for (m, x) in mean.iter_mut().zip(v.iter()) {
                    *m += x;
                }
            }
            let n = norm(&mean);
            if n > 1e-12 {
                mean.iter_mut().for_each(|m| *m /= n);
                mean
            } else {
                // members cancel out; fall back to the first member
                first.to_vec()
            }
        });
        ClassCone {
            center,
            diameter: diameter.min(2.0),
            members: vs.len(),
        }
    });
    let widest = classes[0].diameter.max(classes[1].diameter);
    ConeStats {
        classes,
        confidence: (1.0 - widest / 2.0).clamp(0.0, 1.0),
    }
}

/// A speaker is inside the cone of diameter `d` around its class center when
/// its vector lies within `d / 2` of that center.
pub fn cone_membership(
    emb: &SpeakerEmbedding,
    labels: &BTreeMap<SpeakerId, StanceLabel>,
    stats: &ConeStats,
    d: f64,
) -> BTreeMap<SpeakerId, bool> {
    emb.order
        .iter()
        .zip(&emb.vectors)
        .filter_map(|(s, v)| {
            let label = labels.get(s)?;
            let center = stats.class(*label).center.as_ref()?;
            let dist: f64 = v.iter().zip(center).map(|(x, c)| (x - c).powi(2)).sum::<f64>().sqrt();
            Some((s.clone(), dist <= d / 2.0 + CONE_EPS))
        })
        .collect()
}

/// Total weight of edges whose endpoints carry different labels.
pub fn cut_weight(g: &InteractionNetwork, labels: &BTreeMap<SpeakerId, StanceLabel>) -> f64 {
    g.edges()
        .filter(|(u, v, _)| matches!((labels.get(*u), labels.get(*v)), (Some(a), Some(b)) if a != b))
        .map(|(_, _, w)| w)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rounding {
    pub core_labels: BTreeMap<SpeakerId, StanceLabel>,
    pub cut_value: f64,
    pub cone_stats: ConeStats,
}

/// Splits the embedded speakers by random hyperplanes through the origin and
/// keeps the split with the heaviest cut on `g` (first one wins ties).
pub fn round_embedding(emb: &SpeakerEmbedding, g: &InteractionNetwork, cfg: &RoundingConfig) -> Rounding {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dim = emb.vectors.first().map_or(0, Vec::len);
    let mut best: Option<(f64, BTreeMap<SpeakerId, StanceLabel>)> = None;
    for _ in 0..cfg.num_hyperplanes.max(1) {
        let normal: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let labels: BTreeMap<SpeakerId, StanceLabel> = emb
            .order
            .iter()
            .zip(&emb.vectors)
            .map(|(s, v)| {
                let side = if dot(&normal, v) >= 0.0 {
                    StanceLabel::SideA
                } else {
                    StanceLabel::SideB
                };
                (s.clone(), side)
            })
            .collect();
        let cut = cut_weight(g, &labels);
        if best.as_ref().is_none_or(|(c, _)| cut > *c) {
            best = Some((cut, labels));
        }
    }
    let (cut_value, core_labels) = best.expect("at least one hyperplane");
    let cone_stats = cone_stats(emb, &core_labels);
    Rounding {
        core_labels,
        cut_value,
        cone_stats,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub labels: BTreeMap<SpeakerId, StanceLabel>,
    /// Non-core speakers labelled by the interchanging rule, with the
    /// neighbour they attached through, in processing order.
    pub attachments: Vec<(SpeakerId, SpeakerId)>,
    /// Speakers in components that never touch the core; labelled by greedy
    /// expansion inside their component.
    pub fallback: BTreeSet<SpeakerId>,
}

/// Extends `core_labels` to every speaker of `full`, walking the 2-core
/// removal order backwards.
pub fn propagate_labels(
    full: &InteractionNetwork,
    core: &CoreSubgraph,
    core_labels: &BTreeMap<SpeakerId, StanceLabel>,
) -> Propagation {
    let mut labels = core_labels.clone();
    let mut attachments = Vec::new();
    let mut fallback = BTreeSet::new();

    let mut pending: Vec<&SpeakerId> = core.removed.iter().rev().collect();
    // Nodes the caller left out of both the core and the removal list.
    pending.extend(full.nodes().filter(|s| !labels.contains_key(*s) && !core.removed.contains(s)));

    for s in pending {
        if labels.contains_key(s) {
            continue;
        }
        let attach = full
            .neighbors(s)
            .filter(|(v, _)| labels.contains_key(*v))
            .fold(None::<(&SpeakerId, f64)>, |best, (v, w)| match best {
                Some((_, bw)) if bw >= w => best,
                _ => Some((v, w)),
            });
        match attach {
            Some((via, _)) => {
                labels.insert(s.clone(), labels[via].flip());
                attachments.push((s.clone(), via.clone()));
            }
            None => {
                let component = component_of(full, s);
                let greedy = greedy_label(&component);
                for (speaker, label) in greedy.labels {
                    if let std::collections::btree_map::Entry::Vacant(e) = labels.entry(speaker) {
                        fallback.insert(e.key().clone());
                        e.insert(label);
                    }
                }
            }
        }
    }
    Propagation {
        labels,
        attachments,
        fallback,
    }
}

fn component_of(g: &InteractionNetwork, s: &SpeakerId) -> InteractionNetwork {
    let mut seen = BTreeSet::from([s]);
    let mut stack = vec![s];
    while let Some(u) = stack.pop() {
        for (v, _) in g.neighbors(u) {
            if seen.insert(v) {
                stack.push(v);
            }
        }
    }
    g.induced(seen)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Stem,
    Greedy,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Stem => "stem",
            Algorithm::Greedy => "greedy",
        })
    }
}

/// Hard two-way labelling of every speaker in a conversation.
#[derive(Debug, Clone, PartialEq)]
pub struct StancePartition {
    pub conversation_id: String,
    pub algorithm: Algorithm,
    pub labels: BTreeMap<SpeakerId, StanceLabel>,
    pub core_labels: BTreeMap<SpeakerId, StanceLabel>,
    /// Cut weight of `core_labels` on the core subgraph.
    pub cut_value: f64,
    pub cone_stats: Option<ConeStats>,
    /// `None` for greedy partitions; 0 when the core was too small to embed.
    pub confidence: Option<f64>,
    pub in_cone: BTreeMap<SpeakerId, bool>,
    pub low_confidence: BTreeSet<SpeakerId>,
    pub warnings: Vec<String>,
}

impl StancePartition {
    pub fn core_speakers(&self) -> impl Iterator<Item = &SpeakerId> {
        self.core_labels.keys()
    }

    pub fn to_record(&self) -> PartitionRecord {
        PartitionRecord {
            conversation_id: self.conversation_id.clone(),
            algorithm: self.algorithm,
            labels: self.labels.clone(),
            core_speakers: self.core_labels.keys().cloned().collect(),
            cut_value: self.cut_value,
            confidence: self.confidence,
            cone_diameters: self.cone_stats.as_ref().map(ConeStats::diameters),
            in_cone: self.in_cone.clone(),
            low_confidence: self.low_confidence.iter().cloned().collect(),
            warnings: self.warnings.clone(),
        }
    }
}

/// Partition file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRecord {
    pub conversation_id: String,
    pub algorithm: Algorithm,
    pub labels: BTreeMap<SpeakerId, StanceLabel>,
    pub core_speakers: Vec<SpeakerId>,
    pub cut_value: f64,
    pub confidence: Option<f64>,
    pub cone_diameters: Option<[f64; 2]>,
    pub in_cone: BTreeMap<SpeakerId, bool>,
    #[serde(default)]
    pub low_confidence: Vec<SpeakerId>,
    pub warnings: Vec<String>,
}

impl PartitionRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("partition serializes")
    }
}

/// Everything the pipeline computed for one conversation.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub partition: StancePartition,
    pub network: InteractionNetwork,
    pub core: CoreSubgraph,
    pub embedding: Option<SpeakerEmbedding>,
}

fn tree_warnings(tree: &ConversationTree) -> Vec<String> {
    validate_conversation(tree).iter().map(ToString::to_string).collect()
}

/// Runs the full embedding pipeline and keeps the intermediate results.
pub fn run_stem(
    tree: &ConversationTree,
    wcfg: &WeightConfig,
    scfg: &SolverConfig,
    rcfg: &RoundingConfig,
) -> PipelineOutput {
    let network = build_network(tree, wcfg);
    let core = two_core(&network);
    let mut warnings = tree_warnings(tree);

    let embedding = if core.subgraph.node_count() >= 2 {
        match solve_embedding(&core.subgraph, scfg) {
            Ok(e) => Some(e),
            Err(e) => {
                warnings.push(format!("{}: {e}", tree.conversation_id()));
                None
            }
        }
    } else {
        None
    };

    let Some(embedding) = embedding else {
        warnings.push(format!(
            "{}: CoreEmpty: 2-core has {} speakers; labels from greedy expansion, confidence 0",
            tree.conversation_id(),
            core.subgraph.node_count()
        ));
        let greedy = greedy_label(&network);
        let core_labels: BTreeMap<_, _> = core
            .subgraph
            .nodes()
            .map(|s| (s.clone(), greedy.labels[s]))
            .collect();
        let partition = StancePartition {
            conversation_id: tree.conversation_id().to_owned(),
            algorithm: Algorithm::Stem,
            cut_value: cut_weight(&core.subgraph, &core_labels),
            low_confidence: greedy.labels.keys().cloned().collect(),
            labels: greedy.labels,
            core_labels,
            cone_stats: None,
            confidence: Some(0.0),
            in_cone: BTreeMap::new(),
            warnings,
        };
        return PipelineOutput {
            partition,
            network,
            core,
            embedding: None,
        };
    };

    if !embedding.converged {
        warnings.push(format!(
            "{}: NonConvergence: solver stopped after {} sweeps without meeting rel_tol",
            tree.conversation_id(),
            embedding.iterations
        ));
    }
    let rounding = round_embedding(&embedding, &core.subgraph, rcfg);
    let in_cone = match rcfg.cone_diameter_threshold {
        Some(d) => cone_membership(&embedding, &rounding.core_labels, &rounding.cone_stats, d),
        None => rounding.core_labels.keys().map(|s| (s.clone(), true)).collect(),
    };
    let prop = propagate_labels(&network, &core, &rounding.core_labels);
    if !prop.fallback.is_empty() {
        warnings.push(format!(
            "{}: {} speakers outside any core-connected component labelled by greedy expansion",
            tree.conversation_id(),
            prop.fallback.len()
        ));
    }
    let partition = StancePartition {
        conversation_id: tree.conversation_id().to_owned(),
        algorithm: Algorithm::Stem,
        labels: prop.labels,
        core_labels: rounding.core_labels,
        cut_value: rounding.cut_value,
        confidence: Some(rounding.cone_stats.confidence),
        cone_stats: Some(rounding.cone_stats),
        in_cone,
        low_confidence: prop.fallback,
        warnings,
    };
    PipelineOutput {
        partition,
        network,
        core,
        embedding: Some(embedding),
    }
}

/// Conversation tree to stance partition: interaction network, 2-core,
/// embedding, rounding, propagation.
pub fn stem_pipeline(
    tree: &ConversationTree,
    wcfg: &WeightConfig,
    scfg: &SolverConfig,
    rcfg: &RoundingConfig,
) -> StancePartition {
    run_stem(tree, wcfg, scfg, rcfg).partition
}

/// Greedy labelling of the whole network, reported in the same shape.
pub fn run_greedy(tree: &ConversationTree, wcfg: &WeightConfig) -> PipelineOutput {
    let network = build_network(tree, wcfg);
    let core = two_core(&network);
    let greedy = greedy_label(&network);
    let core_labels: BTreeMap<_, _> = core
        .subgraph
        .nodes()
        .map(|s| (s.clone(), greedy.labels[s]))
        .collect();
    let components = connected_components(&network);
    let op = network.op();
    let low_confidence = components
        .iter()
        .filter(|c| op.is_none_or(|o| !c.contains(o)))
        .flat_map(|c| c.nodes().cloned().collect::<Vec<_>>())
        .collect();
    let partition = StancePartition {
        conversation_id: tree.conversation_id().to_owned(),
        algorithm: Algorithm::Greedy,
        cut_value: cut_weight(&core.subgraph, &core_labels),
        labels: greedy.labels,
        core_labels,
        cone_stats: None,
        confidence: None,
        in_cone: BTreeMap::new(),
        low_confidence,
        warnings: tree_warnings(tree),
    };
    PipelineOutput {
        partition,
        network,
        core,
        embedding: None,
    }
}
