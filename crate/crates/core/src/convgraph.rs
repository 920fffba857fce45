//! Speaker-aware directed acyclic conversation graphs.
//!
//! Each utterance is a node. Utterance `i` receives edges from earlier
//! utterances found by scanning backwards from `i - 1`; the scan stops once
//! it has connected `omega` utterances by the same speaker as `i`. Edges
//! between the same speaker carry relation 1, all others relation 0.

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::Conversation;
use crate::error::{Error, Result};

/// Same-speaker look-back limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "OmegaRepr", into = "OmegaRepr")]
pub enum Omega {
    Finite(usize),
    Unbounded,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum OmegaRepr {
    Count(usize),
    Word(String),
}

impl TryFrom<OmegaRepr> for Omega {
    type Error = String;

    fn try_from(r: OmegaRepr) -> Result<Self, String> {
        match r {
            OmegaRepr::Count(n) => Ok(Omega::Finite(n)),
            OmegaRepr::Word(w) => w.parse().map_err(|e: Error| e.to_string()),
        }
    }
}

impl From<Omega> for OmegaRepr {
    fn from(o: Omega) -> Self {
        match o {
            Omega::Finite(n) => OmegaRepr::Count(n),
            Omega::Unbounded => OmegaRepr::Word("unbounded".into()),
        }
    }
}

impl Omega {
    pub fn validate(self) -> Result<Self> {
        match self {
            Omega::Finite(0) => Err(Error::Config("omega must be at least 1".into())),
            o => Ok(o),
        }
    }

    fn limit(self) -> usize {
        match self {
            Omega::Finite(n) => n,
            Omega::Unbounded => usize::MAX,
        }
    }
}

impl fmt::Display for Omega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Omega::Finite(n) => write!(f, "{n}"),
            Omega::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl FromStr for Omega {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "unbounded" | "inf" | "infinity" | "∞" => Ok(Omega::Unbounded),
            t => t
                .parse::<usize>()
                .map(Omega::Finite)
                .map_err(|_| Error::Config(format!("invalid omega `{s}`"))),
        }
    }
}

/// Edge relation: same speaker at both ends or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    OtherSpeaker = 0,
    SameSpeaker = 1,
}

impl Relation {
    pub fn index(self) -> usize {
        self as usize
    }

    fn between(a: u32, b: u32) -> Self {
        if a == b {
            Relation::SameSpeaker
        } else {
            Relation::OtherSpeaker
        }
    }
}

/// A directed edge between 1-based utterance indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub relation: Relation,
}

impl Edge {
    pub fn new(source: usize, target: usize, relation: Relation) -> Self {
        Self {
            source,
            target,
            relation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversationDag {
    n_nodes: usize,
    omega: Omega,
    /// Interned speaker per node (0-based node position).
    speakers: Vec<u32>,
    /// Sorted by `(target, source)`.
    edges: Vec<Edge>,
    /// `incoming[i - 1]` holds the sources of node `i` in increasing order.
    incoming: Vec<Vec<(usize, Relation)>>,
    validated: bool,
}

/// Interns speaker names in order of first appearance.
pub fn intern_speakers<S: AsRef<str>>(speakers: &[S]) -> Vec<u32> {
    let mut ids: HashMap<&str, u32> = HashMap::new();
    speakers
        .iter()
        .map(|s| {
            let next = ids.len() as u32;
            *ids.entry(s.as_ref()).or_insert(next)
        })
        .collect()
}

/// Builds the graph for a conversation.
pub fn build_dag(conversation: &Conversation, omega: Omega) -> Result<ConversationDag> {
    let mut seen = BTreeSet::new();
    for u in &conversation.utterances {
        if !seen.insert(u.index) {
            return Err(Error::Format(format!(
                "conversation `{}` repeats utterance index {}",
                conversation.id, u.index
            )));
        }
    }
    let speakers: Vec<&str> = conversation
        .utterances
        .iter()
        .map(|u| u.speaker.as_str())
        .collect();
    build_dag_from_speakers(&speakers, omega)
}

/// Builds the graph from the speaker sequence alone.
///
/// For each target the scan start is found directly: with per-speaker
/// position lists, the `omega`-th previous same-speaker utterance bounds the
/// window, and every utterance inside it is a source.
pub fn build_dag_from_speakers<S: AsRef<str>>(speakers: &[S], omega: Omega) -> Result<ConversationDag> {
    let omega = omega.validate()?;
    if speakers.is_empty() {
        return Err(Error::Data("conversation has no utterances".into()));
    }
    let ids = intern_speakers(speakers);
    let n = ids.len();
    let mut positions: HashMap<u32, Vec<usize>> = HashMap::new();
    let mut incoming = Vec::with_capacity(n);
    let mut edges = Vec::new();
    for (t, &spk) in ids.iter().enumerate() {
        let own = positions.entry(spk).or_default();
        // own holds earlier 0-based positions of this speaker
        let start = match own.len().checked_sub(omega.limit()) {
            Some(k) => own[k],
            None => 0,
        };
        own.push(t);
        let preds: Vec<(usize, Relation)> = (start..t)
            .map(|s| (s + 1, Relation::between(ids[s], spk)))
            .collect();
        edges.extend(preds.iter().map(|&(s, r)| Edge::new(s, t + 1, r)));
        incoming.push(preds);
    }
    Ok(ConversationDag {
        n_nodes: n,
        omega,
        speakers: ids,
        edges,
        incoming,
        validated: true,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Edge does not point forward in time.
    NotForward(Edge),
    /// Endpoint outside `1..=n_nodes`.
    OutOfRange(Edge),
    /// Relation disagrees with the speakers at the endpoints.
    RelationMismatch(Edge),
    /// More same-speaker sources than omega allows.
    TooManySameSpeaker { target: usize, count: usize },
    /// The first utterance has an incoming edge.
    FirstHasIncoming(Edge),
    DuplicateEdge(Edge),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotForward(e) => write!(f, "edge {e:?} violates source < target"),
            Violation::OutOfRange(e) => write!(f, "edge {e:?} has an endpoint out of range"),
            Violation::RelationMismatch(e) => write!(f, "edge {e:?} has a relation/speaker mismatch"),
            Violation::TooManySameSpeaker { target, count } => {
                write!(f, "node {target} has {count} same-speaker sources, above omega")
            }
            Violation::FirstHasIncoming(e) => write!(f, "edge {e:?} enters node 1"),
            Violation::DuplicateEdge(e) => write!(f, "edge {e:?} appears twice"),
        }
    }
}

impl ConversationDag {
    /// Assembles a graph from explicit edges. The result is unvalidated:
    /// run [`validate_dag`] before handing it to the model.
    pub fn from_edges<S: AsRef<str>>(speakers: &[S], omega: Omega, mut edges: Vec<Edge>) -> Self {
        let ids = intern_speakers(speakers);
        let n = ids.len();
        edges.sort_by_key(|e| (e.target, e.source));
        let mut incoming = vec![Vec::new(); n];
        for e in &edges {
            if (1..=n).contains(&e.target) {
                incoming[e.target - 1].push((e.source, e.relation));
            }
        }
        Self {
            n_nodes: n,
            omega,
            speakers: ids,
            edges,
            incoming,
            validated: false,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn omega(&self) -> Omega {
        self.omega
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    pub fn edge_set(&self) -> BTreeSet<(usize, usize, usize)> {
        self.edges
            .iter()
            .map(|e| (e.source, e.target, e.relation.index()))
            .collect()
    }

    /// Sources of node `i` (1-based) in increasing order.
    pub fn predecessors(&self, i: usize) -> Result<&[(usize, Relation)]> {
        if i == 0 || i > self.n_nodes {
            return Err(Error::Index(format!(
                "node {i} outside 1..={}",
                self.n_nodes
            )));
        }
        Ok(&self.incoming[i - 1])
    }

    /// Edge-list text: one `source target relation` line per edge, sorted by
    /// `(target, source)`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {}", e.source, e.target, e.relation.index());
        }
        out
    }
}

pub fn predecessors(dag: &ConversationDag, i: usize) -> Result<&[(usize, Relation)]> {
    dag.predecessors(i)
}

/// Checks every graph invariant and reports all violations found. On
/// success the graph is marked validated.
pub fn validate_dag(dag: &mut ConversationDag) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut same_counts = vec![0usize; dag.n_nodes];
    for &e in &dag.edges {
        if !seen.insert((e.source, e.target)) {
            out.push(Violation::DuplicateEdge(e));
        }
        let in_range = (1..=dag.n_nodes).contains(&e.source) && (1..=dag.n_nodes).contains(&e.target);
        if !in_range {
            out.push(Violation::OutOfRange(e));
            continue;
        }
        if e.source >= e.target {
            out.push(Violation::NotForward(e));
        }
        if e.target == 1 {
            out.push(Violation::FirstHasIncoming(e));
        }
        let expected = Relation::between(dag.speakers[e.source - 1], dag.speakers[e.target - 1]);
        if e.relation != expected {
            out.push(Violation::RelationMismatch(e));
        }
        if expected == Relation::SameSpeaker {
            same_counts[e.target - 1] += 1;
        }
    }
    for (i, &count) in same_counts.iter().enumerate() {
        if count > dag.omega.limit() {
            out.push(Violation::TooManySameSpeaker { target: i + 1, count });
        }
    }
    dag.validated = out.is_empty();
    out
}

/// Parses edge-list text. Blank lines and lines starting with `#` are skipped.
pub fn parse_edge_list(text: &str) -> Result<Vec<Edge>> {
    let mut edges = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse { line: n + 1, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [s, t, r] = fields[..] else {
            return Err(bad(format!("expected `source target relation`, got `{line}`")));
        };
        let num = |x: &str| x.parse::<usize>().map_err(|_| bad(format!("not an index: `{x}`")));
        let relation = match r {
            "0" => Relation::OtherSpeaker,
            "1" => Relation::SameSpeaker,
            other => return Err(bad(format!("relation must be 0 or 1, got `{other}`"))),
        };
        edges.push(Edge::new(num(s)?, num(t)?, relation));
    }
    Ok(edges)
}
