//! Synthetic conversations with two planted factions.
//!
//! Speakers are split into factions A and B. Each new post replies to an
//! earlier post whose author is in the opposite faction with probability
//! `p_cross`, otherwise in the author's own faction. Reply targets are chosen
//! with weight `activity^reply_target_bias`, where activity is the number of
//! posts a speaker has written so far.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{AuthorLabelSidecar, ConversationTree, GoldLabels, Post, SpeakerId, StanceLabel};

#[derive(Debug, Error, PartialEq)]
#[error("invalid generator config: {0}")]
pub struct SynthError(String);

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_speakers: usize,
    /// Fraction of speakers in faction A.
    pub faction_split: f64,
    pub num_posts: usize,
    pub p_cross: f64,
    pub p_quote: f64,
    pub reply_target_bias: f64,
    /// Every reply targets the root post (star-shaped conversations).
    pub root_only: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_speakers: 20,
            faction_split: 0.5,
            num_posts: 200,
            p_cross: 0.9,
            p_quote: 0.0,
            reply_target_bias: 1.0,
            root_only: false,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(SynthError(format!("{name} must lie in [0, 1], got {p}")))
            }
        };
        prob("faction_split", self.faction_split)?;
        prob("p_cross", self.p_cross)?;
        prob("p_quote", self.p_quote)?;
        if self.num_speakers < 2 {
            return Err(SynthError(format!("need at least 2 speakers, got {}", self.num_speakers)));
        }
        if self.num_posts < self.num_speakers {
            return Err(SynthError(format!(
                "num_posts ({}) must be at least num_speakers ({})",
                self.num_posts, self.num_speakers
            )));
        }
        if !self.reply_target_bias.is_finite() || self.reply_target_bias < 0.0 {
            return Err(SynthError(format!(
                "reply_target_bias must be a finite nonnegative number, got {}",
                self.reply_target_bias
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConversation {
    pub tree: ConversationTree,
    pub gold: GoldLabels,
    /// Planted faction of every speaker, including ones that never posted.
    pub factions: BTreeMap<SpeakerId, StanceLabel>,
}

impl SynthConversation {
    pub fn sidecar(&self) -> AuthorLabelSidecar {
        AuthorLabelSidecar {
            conversation_id: self.tree.conversation_id().to_owned(),
            author_labels: self.gold.author_labels.clone().unwrap_or_default(),
        }
    }
}

const MAX_TRIES: usize = 10_000;

struct State {
    faction: Vec<StanceLabel>,
    activity: Vec<usize>,
    posts_by: Vec<Vec<usize>>,
}

impl State {
    /// Picks a speaker other than `author` from `faction` who has posted,
    /// weighted by activity.
    fn pick_target(&self, rng: &mut ChaCha8Rng, author: usize, faction: StanceLabel, bias: f64) -> Option<usize> {
        let candidates: Vec<usize> = (0..self.faction.len())
            .filter(|&j| j != author && self.faction[j] == faction && self.activity[j] > 0)
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let weights: Vec<f64> = candidates.iter().map(|&j| (self.activity[j] as f64).powf(bias)).collect();
        let dist = WeightedIndex::new(&weights).ok()?;
        Some(candidates[dist.sample(rng)])
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthConversation, SynthError> {
    generate_with_id(cfg, &format!("synth-{}", cfg.seed), "synthetic")
}

/// Generates one conversation. Deterministic in `cfg`.
pub fn generate_with_id(cfg: &SynthConfig, conversation_id: &str, topic: &str) -> Result<SynthConversation, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.num_speakers;
    let width = (n - 1).to_string().len().max(2);
    let ids: Vec<SpeakerId> = (0..n).map(|i| SpeakerId::new(format!("s{i:0width$}"))).collect();

    let count_a = ((cfg.faction_split * n as f64).round() as usize).clamp(1, n - 1);
    let mut faction: Vec<StanceLabel> = (0..n)
        .map(|i| if i < count_a { StanceLabel::SideA } else { StanceLabel::SideB })
        .collect();
    faction.shuffle(&mut rng);
    let faction_a: Vec<usize> = (0..n).filter(|&i| faction[i] == StanceLabel::SideA).collect();
    let op = faction_a[rng.random_range(0..faction_a.len())];

    let mut st = State {
        faction,
        activity: vec![0; n],
        posts_by: vec![Vec::new(); n],
    };
    let mut posts = Vec::with_capacity(cfg.num_posts);
    let mut authors = Vec::with_capacity(cfg.num_posts);
    let post_id = |k: usize| format!("{conversation_id}-p{k}");

    posts.push(Post {
        post_id: post_id(0),
        author: ids[op].clone(),
        parent_id: None,
        quoted_authors: vec![],
        gold_label: Some(st.faction[op]),
    });
    authors.push(op);
    st.activity[op] += 1;
    st.posts_by[op].push(0);

    for k in 1..cfg.num_posts {
        let mut chosen = None;
        for _ in 0..MAX_TRIES {
            let author = rng.random_range(0..n);
            if cfg.root_only {
                if author != op {
                    chosen = Some((author, 0));
                    break;
                }
                continue;
            }
            let cross = rng.random_bool(cfg.p_cross);
            let want = if cross { st.faction[author].flip() } else { st.faction[author] };
            if let Some(target) = st.pick_target(&mut rng, author, want, cfg.reply_target_bias) {
                let theirs = &st.posts_by[target];
                chosen = Some((author, theirs[rng.random_range(0..theirs.len())]));
                break;
            }
        }
        // Only reachable with vanishing probability: reply to the root from
        // the other faction.
        let (author, parent) = chosen.unwrap_or_else(|| {
            let b = (0..n).find(|&i| st.faction[i] != st.faction[op]).expect("both factions nonempty");
            (b, 0)
        });

        let mut quoted_authors = Vec::new();
        if cfg.p_quote > 0.0 && rng.random_bool(cfg.p_quote) {
            let cross = rng.random_bool(cfg.p_cross);
            let want = if cross { st.faction[author].flip() } else { st.faction[author] };
            if let Some(q) = st.pick_target(&mut rng, author, want, cfg.reply_target_bias) {
                quoted_authors.push(ids[q].clone());
            }
        }

        posts.push(Post {
            post_id: post_id(k),
            author: ids[author].clone(),
            parent_id: Some(post_id(parent)),
            quoted_authors,
            gold_label: Some(st.faction[author]),
        });
        authors.push(author);
        st.activity[author] += 1;
        st.posts_by[author].push(k);
    }

    let tree = ConversationTree::new(conversation_id, topic, posts).expect("generator builds a valid tree");
    let factions: BTreeMap<SpeakerId, StanceLabel> = ids.iter().cloned().zip(st.faction.iter().copied()).collect();
    let author_labels = tree.authors().into_iter().map(|a| {
        let l = factions[&a];
        (a, l)
    });
    let gold = tree.gold_labels().with_author_labels(author_labels.collect());
    Ok(SynthConversation { tree, gold, factions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_network, WeightConfig};

    fn cfg(seed: u64) -> SynthConfig {
        SynthConfig {
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn validation() {
        assert!(SynthConfig { num_speakers: 1, ..cfg(0) }.validate().is_err());
        assert!(SynthConfig { p_cross: 1.5, ..cfg(0) }.validate().is_err());
        assert!(SynthConfig { num_posts: 5, ..cfg(0) }.validate().is_err());
        assert!(SynthConfig { reply_target_bias: -1.0, ..cfg(0) }.validate().is_err());
        assert!(cfg(0).validate().is_ok());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&cfg(42)).unwrap();
        let b = generate(&cfg(42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tree.to_json(), b.tree.to_json());
        assert_ne!(a.tree, generate(&cfg(43)).unwrap().tree);
    }

    #[test]
    fn pure_cross_is_bipartite() {
        for seed in 0..20 {
            let c = generate(&SynthConfig {
                p_cross: 1.0,
                p_quote: 0.3,
                ..cfg(seed)
            })
            .unwrap();
            let g = build_network(&c.tree, &WeightConfig::new(1.0, 1.0).unwrap());
            for (u, v, _) in g.edges() {
                assert_ne!(c.factions[u], c.factions[v], "seed {seed}: {u}-{v}");
            }
            assert_eq!(c.factions[c.tree.op()], StanceLabel::SideA);
        }
    }

    #[test]
    fn two_speakers_make_a_dialogue() {
        for p_cross in [0.0, 0.5, 1.0] {
            let c = generate(&SynthConfig {
                num_speakers: 2,
                num_posts: 10,
                p_cross,
                ..cfg(1)
            })
            .unwrap();
            let g = build_network(&c.tree, &WeightConfig::default());
            assert_eq!(g.node_count(), 2);
            assert_eq!(g.edge_count(), 1);
        }
    }

    #[test]
    fn mixed_edges_and_labels() {
        let c = generate(&SynthConfig { p_cross: 0.5, ..cfg(3) }).unwrap();
        let g = build_network(&c.tree, &WeightConfig::default());
        let cross = g.edges().filter(|(u, v, _)| c.factions[*u] != c.factions[*v]).count();
        assert!(cross > 0 && cross < g.edge_count());
        let gold = c.gold.author_labels.as_ref().unwrap();
        assert_eq!(gold.len(), c.tree.authors().len());
        assert!(c.tree.posts().iter().all(|p| p.gold_label == Some(c.factions[&p.author])));
    }

    #[test]
    fn root_only_is_a_star() {
        let c = generate(&SynthConfig {
            root_only: true,
            reply_target_bias: 0.0,
            ..cfg(5)
        })
        .unwrap();
        let g = build_network(&c.tree, &WeightConfig::default());
        let op = c.tree.op();
        assert!(g.edges().all(|(u, v, _)| u == op || v == op));
        assert!(crate::graph::two_core(&g).is_empty());
    }

    #[test]
    fn cross_reply_fraction_tracks_p_cross() {
        for p in [0.3, 0.75] {
            let mut cross = 0usize;
            let mut total = 0usize;
            for seed in 0..100 {
                let c = generate(&SynthConfig { p_cross: p, ..cfg(seed) }).unwrap();
                let by_id = c.tree.post_authors();
                for post in c.tree.posts() {
                    if let Some(pid) = &post.parent_id {
                        total += 1;
                        cross += (c.factions[&post.author] != c.factions[by_id[pid.as_str()]]) as usize;
                    }
                }
            }
            let frac = cross as f64 / total as f64;
            assert!((frac - p).abs() <= 0.03, "p_cross {p}: observed {frac}");
        }
    }
}
