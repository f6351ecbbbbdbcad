//! Threaded conversations: data model, JSON ingestion and validation.
//!
//! A conversation is a rooted reply tree of posts. Each post names its author,
//! its parent post (absent only for the root), the authors it quotes and an
//! optional binary gold stance.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while ingesting conversations or gold-label sidecars.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("conversation {conversation}: reply links form a cycle through post {post}")]
    CycleDetected { conversation: String, post: String },
    #[error("conversation {conversation}: multiple root posts ({first}, {second})")]
    MultipleRoots {
        conversation: String,
        first: String,
        second: String,
    },
    #[error("conversation {conversation}: post {post} replies to unknown post {parent}")]
    DanglingParent {
        conversation: String,
        post: String,
        parent: String,
    },
    #[error("conversation {conversation}: duplicate post id {post}")]
    DuplicatePost { conversation: String, post: String },
    #[error("conversation {0}: no posts")]
    EmptyConversation(String),
    #[error("conversation {conversation}: empty author on post {post}")]
    EmptySpeaker { conversation: String, post: String },
    #[error("conversation {conversation}: unsupported stance label {value:?} on {unit} (expected \"A\" or \"B\")")]
    InvalidLabel {
        conversation: String,
        unit: String,
        value: String,
    },
}

/// Opaque speaker identifier. Ordering is lexicographic on the raw string and
/// is used for every deterministic tie-break in the crate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeakerId(String);

impl SpeakerId {
    pub fn new(id: impl Into<String>) -> Self {
        SpeakerId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SpeakerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SpeakerId {
    fn from(s: &str) -> Self {
        SpeakerId(s.to_owned())
    }
}

impl From<String> for SpeakerId {
    fn from(s: String) -> Self {
        SpeakerId(s)
    }
}

/// Abstract two-sided stance. Which side is "pro" only becomes meaningful
/// once a partition is compared against gold labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StanceLabel {
    #[serde(rename = "A", alias = "pro")]
    SideA,
    #[serde(rename = "B", alias = "con")]
    SideB,
}

impl StanceLabel {
    pub fn flip(self) -> Self {
        match self {
            StanceLabel::SideA => StanceLabel::SideB,
            StanceLabel::SideB => StanceLabel::SideA,
        }
    }

    /// Short wire code, `"A"` or `"B"`.
    pub fn code(self) -> &'static str {
        match self {
            StanceLabel::SideA => "A",
            StanceLabel::SideB => "B",
        }
    }

    /// Accepts the wire codes and the `pro`/`con` aliases.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "A" | "a" | "pro" => Some(StanceLabel::SideA),
            "B" | "b" | "con" => Some(StanceLabel::SideB),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            StanceLabel::SideA => 0,
            StanceLabel::SideB => 1,
        }
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StanceLabel::SideA => f.write_str("pro"),
            StanceLabel::SideB => f.write_str("con"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Post {
    pub post_id: String,
    pub author: SpeakerId,
    pub parent_id: Option<String>,
    pub quoted_authors: Vec<SpeakerId>,
    pub gold_label: Option<StanceLabel>,
}

/// A validated conversation: exactly one root, every post reachable from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversationTree {
    conversation_id: String,
    topic: String,
    posts: Vec<Post>,
    op: SpeakerId,
    root: usize,
}

impl ConversationTree {
    /// Validates the reply structure and builds the tree. Post order is kept
    /// as given.
    pub fn new(
        conversation_id: impl Into<String>,
        topic: impl Into<String>,
        posts: Vec<Post>,
    ) -> Result<Self, CorpusError> {
        let conversation_id = conversation_id.into();
        let topic = topic.into();
        if posts.is_empty() {
            return Err(CorpusError::EmptyConversation(conversation_id));
        }

        let mut index: HashMap<&str, usize> = HashMap::with_capacity(posts.len());
        for (i, post) in posts.iter().enumerate() {
            if post.author.as_str().is_empty() {
                return Err(CorpusError::EmptySpeaker {
                    conversation: conversation_id,
                    post: post.post_id.clone(),
                });
            }
            if index.insert(post.post_id.as_str(), i).is_some() {
                return Err(CorpusError::DuplicatePost {
                    conversation: conversation_id,
                    post: post.post_id.clone(),
                });
            }
        }

        let mut root: Option<usize> = None;
        let mut parent: Vec<Option<usize>> = Vec::with_capacity(posts.len());
        for (i, post) in posts.iter().enumerate() {
            match &post.parent_id {
                None => {
                    if let Some(r) = root {
                        return Err(CorpusError::MultipleRoots {
                            conversation: conversation_id,
                            first: posts[r].post_id.clone(),
                            second: post.post_id.clone(),
                        });
                    }
                    root = Some(i);
                    parent.push(None);
                }
                Some(pid) => match index.get(pid.as_str()) {
                    Some(&p) => parent.push(Some(p)),
                    None => {
                        return Err(CorpusError::DanglingParent {
                            conversation: conversation_id,
                            post: post.post_id.clone(),
                            parent: pid.clone(),
                        })
                    }
                },
            }
        }

        // Every post must reach the root by following parents; anything that
        // does not is on (or hangs off) a cycle.
        let Some(root) = root else {
            return Err(CorpusError::CycleDetected {
                conversation: conversation_id,
                post: posts[0].post_id.clone(),
            });
        };
        // 0 = unknown, 1 = on the current walk, 2 = reaches root
        let mut state = vec![0u8; posts.len()];
        state[root] = 2;
        let mut walk = Vec::new();
        for start in 0..posts.len() {
            let mut cur = start;
            while state[cur] == 0 {
                state[cur] = 1;
                walk.push(cur);
                cur = parent[cur].expect("only the root lacks a parent");
            }
            if state[cur] == 1 {
                return Err(CorpusError::CycleDetected {
                    conversation: conversation_id,
                    post: posts[cur].post_id.clone(),
                });
            }
            for i in walk.drain(..) {
                state[i] = 2;
            }
        }

        let op = posts[root].author.clone();
        Ok(ConversationTree {
            conversation_id,
            topic,
            posts,
            op,
            root,
        })
    }

    pub fn conversation_id(&self) -> &str {
        &self.conversation_id
    }

    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    /// Author of the root post.
    pub fn op(&self) -> &SpeakerId {
        &self.op
    }

    pub fn root(&self) -> &Post {
        &self.posts[self.root]
    }

    pub fn post(&self, post_id: &str) -> Option<&Post> {
        self.posts.iter().find(|p| p.post_id == post_id)
    }

    /// Map from post id to its author.
    pub fn post_authors(&self) -> HashMap<&str, &SpeakerId> {
        self.posts
            .iter()
            .map(|p| (p.post_id.as_str(), &p.author))
            .collect()
    }

    /// Distinct authors of posts in this conversation.
    pub fn authors(&self) -> BTreeSet<SpeakerId> {
        self.posts.iter().map(|p| p.author.clone()).collect()
    }

    /// Gold labels carried on the posts themselves.
    pub fn post_gold(&self) -> BTreeMap<String, StanceLabel> {
        self.posts
            .iter()
            .filter_map(|p| p.gold_label.map(|l| (p.post_id.clone(), l)))
            .collect()
    }

    /// Gold labels for this conversation built from the post annotations.
    pub fn gold_labels(&self) -> GoldLabels {
        let posts = self.post_gold();
        GoldLabels {
            post_labels: if posts.is_empty() { None } else { Some(posts) },
            author_labels: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&RawConversation::from(self)).expect("conversation serializes")
    }
}

/// Per-post and per-author gold stance, either of which may be missing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldLabels {
    pub post_labels: Option<BTreeMap<String, StanceLabel>>,
    pub author_labels: Option<BTreeMap<SpeakerId, StanceLabel>>,
}

impl GoldLabels {
    pub fn is_empty(&self) -> bool {
        self.post_labels.as_ref().is_none_or(|m| m.is_empty())
            && self.author_labels.as_ref().is_none_or(|m| m.is_empty())
    }

    /// Overlays a sidecar's author labels onto these labels.
    pub fn with_author_labels(mut self, labels: BTreeMap<SpeakerId, StanceLabel>) -> Self {
        self.author_labels = Some(labels);
        self
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawPost {
    post_id: String,
    author: String,
    #[serde(default)]
    parent_id: Option<String>,
    #[serde(default)]
    quoted_authors: Vec<String>,
    #[serde(default)]
    gold_label: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawConversation {
    conversation_id: String,
    #[serde(default)]
    topic: String,
    posts: Vec<RawPost>,
}

impl From<&ConversationTree> for RawConversation {
    fn from(t: &ConversationTree) -> Self {
        RawConversation {
            conversation_id: t.conversation_id.clone(),
            topic: t.topic.clone(),
            posts: t
                .posts
                .iter()
                .map(|p| RawPost {
                    post_id: p.post_id.clone(),
                    author: p.author.0.clone(),
                    parent_id: p.parent_id.clone(),
                    quoted_authors: p.quoted_authors.iter().map(|a| a.0.clone()).collect(),
                    gold_label: p.gold_label.map(|l| l.code().to_owned()),
                })
                .collect(),
        }
    }
}

impl TryFrom<RawConversation> for ConversationTree {
    type Error = CorpusError;

    fn try_from(raw: RawConversation) -> Result<Self, CorpusError> {
        let mut posts = Vec::with_capacity(raw.posts.len());
        for p in raw.posts {
            let gold_label = match p.gold_label {
                None => None,
                Some(v) => Some(StanceLabel::parse(&v).ok_or_else(|| CorpusError::InvalidLabel {
                    conversation: raw.conversation_id.clone(),
                    unit: format!("post {}", p.post_id),
                    value: v,
                })?),
            };
            posts.push(Post {
                post_id: p.post_id,
                author: SpeakerId(p.author),
                parent_id: p.parent_id,
                quoted_authors: p.quoted_authors.into_iter().map(SpeakerId).collect(),
                gold_label,
            });
        }
        ConversationTree::new(raw.conversation_id, raw.topic, posts)
    }
}

/// Parses a single conversation object.
pub fn parse_conversation(bytes: &[u8]) -> Result<ConversationTree, CorpusError> {
    let raw: RawConversation =
        serde_json::from_slice(bytes).map_err(|e| CorpusError::MalformedInput(e.to_string()))?;
    raw.try_into()
}

/// Parses a stream of conversation objects: a single object, or several
/// separated by whitespace (newline-delimited JSON).
pub fn parse_conversations(bytes: &[u8]) -> Result<Vec<ConversationTree>, CorpusError> {
    serde_json::Deserializer::from_slice(bytes)
        .into_iter::<RawConversation>()
        .map(|raw| {
            raw.map_err(|e| CorpusError::MalformedInput(e.to_string()))?
                .try_into()
        })
        .collect()
}

/// Author-level gold labels for one conversation, read from a sidecar file.
#[derive(Debug, Clone, PartialEq)]
pub struct AuthorLabelSidecar {
    pub conversation_id: String,
    pub author_labels: BTreeMap<SpeakerId, StanceLabel>,
}

#[derive(Serialize, Deserialize)]
struct RawSidecar {
    conversation_id: String,
    author_labels: BTreeMap<String, String>,
}

impl AuthorLabelSidecar {
    pub fn to_json(&self) -> String {
        let raw = RawSidecar {
            conversation_id: self.conversation_id.clone(),
            author_labels: self
                .author_labels
                .iter()
                .map(|(k, v)| (k.0.clone(), v.code().to_owned()))
                .collect(),
        };
        serde_json::to_string(&raw).expect("sidecar serializes")
    }
}

/// Parses one or more newline-delimited gold sidecar objects.
pub fn parse_gold_sidecars(bytes: &[u8]) -> Result<Vec<AuthorLabelSidecar>, CorpusError> {
    serde_json::Deserializer::from_slice(bytes)
        .into_iter::<RawSidecar>()
        .map(|raw| {
            let raw = raw.map_err(|e| CorpusError::MalformedInput(e.to_string()))?;
            let mut author_labels = BTreeMap::new();
            for (author, v) in raw.author_labels {
                let label = StanceLabel::parse(&v).ok_or_else(|| CorpusError::InvalidLabel {
                    conversation: raw.conversation_id.clone(),
                    unit: format!("author {author}"),
                    value: v.clone(),
                })?;
                author_labels.insert(SpeakerId(author), label);
            }
            Ok(AuthorLabelSidecar {
                conversation_id: raw.conversation_id,
                author_labels,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WarningKind {
    SelfReply { post_id: String },
    SelfQuote { post_id: String },
    UnknownQuotedAuthor { post_id: String, author: SpeakerId },
    SingleSpeaker,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Warning {
    pub conversation_id: String,
    #[serde(flatten)]
    pub kind: WarningKind,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.conversation_id;
        match &self.kind {
            WarningKind::SelfReply { post_id } => {
                write!(f, "{c}: post {post_id} replies to its own author; self-interaction ignored")
            }
            WarningKind::SelfQuote { post_id } => {
                write!(f, "{c}: post {post_id} quotes its own author; self-interaction ignored")
            }
            WarningKind::UnknownQuotedAuthor { post_id, author } => write!(
                f,
                "{c}: post {post_id} quotes {author}, who never posts in this conversation; quote ignored"
            ),
            WarningKind::SingleSpeaker => {
                write!(f, "{c}: only one speaker, no interaction edges")
            }
        }
    }
}

/// Lists the structural oddities that graph construction will skip over.
pub fn validate_conversation(tree: &ConversationTree) -> Vec<Warning> {
    let mut out = Vec::new();
    let authors = tree.authors();
    let post_author = tree.post_authors();
    let warn = |kind| Warning {
        conversation_id: tree.conversation_id.clone(),
        kind,
    };
    for post in &tree.posts {
        if let Some(pid) = &post.parent_id {
            if post_author[pid.as_str()] == &post.author {
                out.push(warn(WarningKind::SelfReply {
                    post_id: post.post_id.clone(),
                }));
            }
        }
        for q in &post.quoted_authors {
            if q == &post.author {
                out.push(warn(WarningKind::SelfQuote {
                    post_id: post.post_id.clone(),
                }));
            } else if !authors.contains(q) {
                out.push(warn(WarningKind::UnknownQuotedAuthor {
                    post_id: post.post_id.clone(),
                    author: q.clone(),
                }));
            }
        }
    }
    if authors.len() < 2 {
        out.push(warn(WarningKind::SingleSpeaker));
    }
    out
}

pub fn validate_corpus(convs: &[ConversationTree]) -> Vec<Warning> {
    convs.iter().flat_map(validate_conversation).collect()
}
