//! Unsupervised stance detection from conversation structure.
//!
//! A threaded conversation becomes a weighted speaker interaction network.
//! Its 2-core is embedded on the unit sphere by the max-cut semidefinite
//! relaxation, rounded into two stance groups with random hyperplanes, and
//! the labels are propagated to the remaining speakers. A greedy Prim-style
//! labeller, an evaluation harness and a planted-faction generator round out
//! the crate.

pub mod batch;
pub mod corpus;
pub mod embed;
pub mod eval;
pub mod graph;
pub mod greedy;
pub mod partition;
pub mod pca;
pub mod synth;

pub use corpus::{
    parse_conversation, parse_conversations, validate_corpus, ConversationTree, CorpusError, GoldLabels, Post, SpeakerId,
    StanceLabel,
};
pub use embed::{brute_force_maxcut, objective_value, solve_embedding, EmbedError, SolverConfig, SpeakerEmbedding};
pub use graph::{build_network, connected_components, two_core, CoreSubgraph, InteractionNetwork, WeightConfig};
pub use greedy::{greedy_label, GreedyResult};
pub use partition::{
    cone_membership, propagate_labels, round_embedding, stem_pipeline, Algorithm, ConeStats, PartitionRecord,
    RoundingConfig, StancePartition,
};
