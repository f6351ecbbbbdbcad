//! Accuracy of stance partitions against gold labels.
//!
//! Labels produced by the pipeline are abstract, so every connected component
//! of the evaluated graph is scored under both orientations and the better one
//! is kept. Scores are reported at post and author level, over core speakers
//! and over all speakers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{ConversationTree, GoldLabels, SpeakerId, StanceLabel};
use crate::graph::{connected_components, InteractionNetwork};
use crate::partition::{Algorithm, PartitionRecord};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("conversation {0}: no post-level gold labels")]
    NoLabels(String),
    #[error("conversation {conversation}: nothing to score at {level} level over {scope} speakers")]
    NothingToScore {
        conversation: String,
        scope: Scope,
        level: Level,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Core,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Post,
    Author,
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scope::Core => "core",
            Scope::Full => "full",
        })
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Level::Post => "post",
            Level::Author => "author",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthorLift {
    pub labels: BTreeMap<SpeakerId, StanceLabel>,
    /// Authors whose labelled posts split evenly; left out of author scoring.
    pub ties: Vec<SpeakerId>,
}

/// Majority vote over each author's labelled posts.
pub fn lift_post_labels_to_authors(gold: &GoldLabels, tree: &ConversationTree) -> Result<AuthorLift, EvalError> {
    let posts = gold
        .post_labels
        .as_ref()
        .filter(|m| !m.is_empty())
        .ok_or_else(|| EvalError::NoLabels(tree.conversation_id().to_owned()))?;
    let mut votes: BTreeMap<&SpeakerId, [usize; 2]> = BTreeMap::new();
    for post in tree.posts() {
        if let Some(l) = posts.get(&post.post_id) {
            votes.entry(&post.author).or_default()[l.index()] += 1;
        }
    }
    let mut labels = BTreeMap::new();
    let mut ties = Vec::new();
    for (author, [a, b]) in votes {
        match a.cmp(&b) {
            std::cmp::Ordering::Greater => {
                labels.insert(author.clone(), StanceLabel::SideA);
            }
            std::cmp::Ordering::Less => {
                labels.insert(author.clone(), StanceLabel::SideB);
            }
            std::cmp::Ordering::Equal => ties.push(author.clone()),
        }
    }
    Ok(AuthorLift { labels, ties })
}

/// Every post inherits its author's label; posts by unlabelled authors are
/// left out.
pub fn lift_author_labels_to_posts(
    author_labels: &BTreeMap<SpeakerId, StanceLabel>,
    tree: &ConversationTree,
) -> BTreeMap<String, StanceLabel> {
    tree.posts()
        .iter()
        .filter_map(|p| author_labels.get(&p.author).map(|&l| (p.post_id.clone(), l)))
        .collect()
}

/// Gold labels at both levels, filling whichever level is missing from the
/// other.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedGold {
    pub posts: BTreeMap<String, StanceLabel>,
    pub authors: BTreeMap<SpeakerId, StanceLabel>,
    pub tied_authors: Vec<SpeakerId>,
}

pub fn resolve_gold(gold: &GoldLabels, tree: &ConversationTree) -> ResolvedGold {
    let (authors, tied_authors) = match &gold.author_labels {
        Some(a) if !a.is_empty() => (a.clone(), Vec::new()),
        _ => match lift_post_labels_to_authors(gold, tree) {
            Ok(lift) => (lift.labels, lift.ties),
            Err(_) => (BTreeMap::new(), Vec::new()),
        },
    };
    let posts = match &gold.post_labels {
        Some(p) if !p.is_empty() => p.clone(),
        _ => lift_author_labels_to_posts(&authors, tree),
    };
    ResolvedGold {
        posts,
        authors,
        tied_authors,
    }
}

/// Orientation chosen for one connected component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentOrientation {
    /// Smallest speaker id of the component.
    pub anchor: SpeakerId,
    pub flipped: bool,
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Score {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    pub components: Vec<ComponentOrientation>,
}

/// Accuracy of `pred` against `gold`, choosing the orientation of each
/// connected component of the evaluated graph independently. `network` is
/// the full interaction network of `tree`; with `Scope::Core` it is
/// restricted to the partition's core speakers.
pub fn score(
    pred: &PartitionRecord,
    gold: &ResolvedGold,
    tree: &ConversationTree,
    network: &InteractionNetwork,
    scope: Scope,
    level: Level,
) -> Result<Score, EvalError> {
    let evaluated = match scope {
        Scope::Full => network.clone(),
        Scope::Core => network.induced(&pred.core_speakers),
    };
    let mut correct = 0;
    let mut total = 0;
    let mut components = Vec::new();
    for comp in connected_components(&evaluated) {
        let members: BTreeSet<&SpeakerId> = comp.nodes().collect();
        // (agree, units) under the identity orientation
        let (agree, units) = match level {
            Level::Author => members
                .iter()
                .filter_map(|s| Some((*pred.labels.get(*s)? == *gold.authors.get(*s)?) as usize))
                .fold((0, 0), |(a, n), x| (a + x, n + 1)),
            Level::Post => tree
                .posts()
                .iter()
                .filter(|p| members.contains(&p.author))
                .filter_map(|p| Some((*pred.labels.get(&p.author)? == *gold.posts.get(&p.post_id)?) as usize))
                .fold((0, 0), |(a, n), x| (a + x, n + 1)),
        };
        if units == 0 {
            continue;
        }
        let flipped = units - agree > agree;
        let best = agree.max(units - agree);
        correct += best;
        total += units;
        components.push(ComponentOrientation {
            anchor: (*members.first().expect("components are nonempty")).clone(),
            flipped,
            correct: best,
            total: units,
        });
    }
    if total == 0 {
        return Err(EvalError::NothingToScore {
            conversation: tree.conversation_id().to_owned(),
            scope,
            level,
        });
    }
    Ok(Score {
        correct,
        total,
        accuracy: correct as f64 / total as f64,
        components,
    })
}

pub const METRICS: [(Level, Scope); 4] = [
    (Level::Post, Scope::Full),
    (Level::Post, Scope::Core),
    (Level::Author, Scope::Full),
    (Level::Author, Scope::Core),
];

pub fn metric_name(level: Level, scope: Scope) -> String {
    format!("{level}s_{scope}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConversationEval {
    pub conversation_id: String,
    pub topic: String,
    pub algorithm: Algorithm,
    pub confidence: Option<f64>,
    /// Keyed by metric name, e.g. `posts_core`.
    pub scores: BTreeMap<String, Score>,
    pub excluded_tied_authors: usize,
    pub errors: Vec<String>,
}

impl ConversationEval {
    pub fn score(&self, level: Level, scope: Scope) -> Option<&Score> {
        self.scores.get(&metric_name(level, scope))
    }
}

/// Scores one conversation on all four metrics. Metrics with nothing to
/// score are recorded in `errors` instead.
pub fn evaluate_conversation(
    pred: &PartitionRecord,
    gold: &GoldLabels,
    tree: &ConversationTree,
    network: &InteractionNetwork,
) -> ConversationEval {
    let resolved = resolve_gold(gold, tree);
    let mut scores = BTreeMap::new();
    let mut errors = Vec::new();
    for (level, scope) in METRICS {
        match score(pred, &resolved, tree, network, scope, level) {
            Ok(s) => {
                scores.insert(metric_name(level, scope), s);
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    ConversationEval {
        conversation_id: tree.conversation_id().to_owned(),
        topic: tree.topic().to_owned(),
        algorithm: pred.algorithm,
        confidence: pred.confidence,
        scores,
        excluded_tied_authors: resolved.tied_authors.len(),
        errors,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricAggregate {
    /// Pooled over units.
    pub micro: f64,
    /// Mean of per-conversation accuracies.
    #[serde(rename = "macro")]
    pub macro_avg: f64,
    pub units: usize,
    pub conversations: usize,
}

/// Aggregates for one (algorithm, topic) group, keyed by metric name.
pub type GroupAggregate = BTreeMap<String, MetricAggregate>;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub conversations: Vec<ConversationEval>,
    /// algorithm -> topic -> metric
    pub by_topic: BTreeMap<Algorithm, BTreeMap<String, GroupAggregate>>,
    /// algorithm -> metric
    pub overall: BTreeMap<Algorithm, GroupAggregate>,
}

fn aggregate_group<'a>(evals: impl Iterator<Item = &'a ConversationEval> + Clone) -> GroupAggregate {
    let mut out = BTreeMap::new();
    for (level, scope) in METRICS {
        let scores: Vec<&Score> = evals.clone().filter_map(|e| e.score(level, scope)).collect();
        if scores.is_empty() {
            continue;
        }
        let correct: usize = scores.iter().map(|s| s.correct).sum();
        let units: usize = scores.iter().map(|s| s.total).sum();
        let macro_avg = scores.iter().map(|s| s.accuracy).sum::<f64>() / scores.len() as f64;
        out.insert(
            metric_name(level, scope),
            MetricAggregate {
                micro: correct as f64 / units as f64,
                macro_avg,
                units,
                conversations: scores.len(),
            },
        );
    }
    out
}

/// Micro and macro averages per algorithm, per topic and overall.
pub fn aggregate(evals: Vec<ConversationEval>) -> EvalReport {
    let mut by_topic: BTreeMap<Algorithm, BTreeMap<String, GroupAggregate>> = BTreeMap::new();
    let mut overall = BTreeMap::new();
    let algorithms: BTreeSet<Algorithm> = evals.iter().map(|e| e.algorithm).collect();
    for algo in algorithms {
        let mine = || evals.iter().filter(move |e| e.algorithm == algo);
        let topics: BTreeSet<&str> = mine().map(|e| e.topic.as_str()).collect();
        let per_topic = topics
            .into_iter()
            .map(|t| (t.to_owned(), aggregate_group(mine().filter(move |e| e.topic == t))))
            .collect();
        by_topic.insert(algo, per_topic);
        overall.insert(algo, aggregate_group(mine()));
    }
    EvalReport {
        conversations: evals,
        by_topic,
        overall,
    }
}

impl EvalReport {
    /// Fixed-width tables, one per level: a row per algorithm and scope, a
    /// column per topic, then the micro and macro averages.
    pub fn to_table(&self) -> String {
        let topics: BTreeSet<&str> = self
            .by_topic
            .values()
            .flat_map(|t| t.keys().map(String::as_str))
            .collect();
        let mut out = String::new();
        for level in [Level::Post, Level::Author] {
            let _ = writeln!(out, "Accuracy ({level} level)");
            let _ = write!(out, "{:<16}", "");
            for t in &topics {
                let _ = write!(out, " {:>12}", truncate(t, 12));
            }
            let _ = writeln!(out, " {:>12} {:>12}", "Average", "Avg (macro)");
            for (algo, per_topic) in &self.by_topic {
                for scope in [Scope::Core, Scope::Full] {
                    let name = metric_name(level, scope);
                    let row = format!("{} ({scope})", algo.to_string().to_uppercase());
                    let _ = write!(out, "{row:<16}");
                    for t in &topics {
                        let cell = per_topic.get(*t).and_then(|g| g.get(&name)).map(|m| m.micro);
                        let _ = write!(out, " {:>12}", fmt_cell(cell));
                    }
                    let all = self.overall.get(algo).and_then(|g| g.get(&name));
                    let _ = writeln!(
                        out,
                        " {:>12} {:>12}",
                        fmt_cell(all.map(|m| m.micro)),
                        fmt_cell(all.map(|m| m.macro_avg))
                    );
                }
            }
            out.push('\n');
        }
        out
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{x:.2}"))
}
