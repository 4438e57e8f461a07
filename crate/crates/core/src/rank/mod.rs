//! Top-K ranking of target attributes: prompt construction, ranker
//! backends, response parsing and per-table mapping.

mod mapping;
mod parse;
mod prompt;
mod ranker;

pub use mapping::{create_topk_mapping, MappingRequest, TableMapping};
pub use parse::{extract_entries, parse_topk_response, ParsedEntry, ParsedResponse};
pub use prompt::{build_match_prompt, system_text, MatchPrompt, PromptInputs};
pub use ranker::{
    GenerationParams, LocalOracleRanker, RankRequest, Ranker, RankerSpec, RemoteRanker, TranscriptLog, TranscriptRecord,
};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::EmbedError;
use crate::http::RemoteError;
use crate::retrieve::RetrieveError;
use crate::schema::{AttrRef, NA};

#[derive(Debug, Error)]
pub enum RankError {
    #[error("no document for {0}")]
    MissingDocument(String),
    #[error("no candidate tables for source table {0}")]
    NoCandidates(String),
    #[error("K must be at least 1")]
    InvalidK,
    #[error("prompt of {chars} characters exceeds the budget of {budget}")]
    ContextOverflow { chars: usize, budget: usize },
    #[error("no mapping object found in response: {0}")]
    Unparseable(String),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Retrieve(#[from] RetrieveError),
    #[error("transcript: {0}")]
    Transcript(#[from] std::io::Error),
}

/// One predicted slot of a ranked row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Target {
    Attribute(AttrRef),
    /// The explicit "no match" answer.
    Na,
    /// No prediction in this slot.
    Empty,
}

impl Target {
    pub fn attribute(table: &str, attribute: &str) -> Self {
        Target::Attribute(AttrRef::new(table, attribute))
    }

    pub fn as_attr(&self) -> Option<&AttrRef> {
        match self {
            Target::Attribute(a) => Some(a),
            _ => None,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Attribute(a) => write!(f, "{a}"),
            Target::Na => f.write_str(NA),
            Target::Empty => f.write_str("-"),
        }
    }
}

impl Serialize for Target {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Target::Attribute(a) => (&a.table, &a.attribute).serialize(s),
            Target::Na => (NA, NA).serialize(s),
            Target::Empty => s.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match Option::<(String, String)>::deserialize(d)? {
            None => Target::Empty,
            Some((t, a)) if t == NA && a == NA => Target::Na,
            Some((t, a)) => Target::Attribute(AttrRef::new(t, a)),
        })
    }
}

/// One row of the prediction matrix: K ranked targets for a source
/// attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedRow {
    pub src_table: String,
    pub src_attr: String,
    pub targets: Vec<Target>,
    /// Set when the ranker never produced this row and it was padded.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unresolved: bool,
}

impl RankedRow {
    pub fn source(&self) -> AttrRef {
        AttrRef::new(&self.src_table, &self.src_attr)
    }

    pub fn unresolved(src_table: &str, src_attr: &str, k: usize) -> Self {
        Self {
            src_table: src_table.to_string(),
            src_attr: src_attr.to_string(),
            targets: vec![Target::Empty; k],
            unresolved: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticKind {
    /// An expected source attribute is absent from the response.
    MissingRow,
    /// A response row for an attribute that was not asked about, or a repeat.
    ExtraRow,
    /// A target that is not an attribute of any candidate table.
    HallucinatedTarget,
    /// `NA` listed more than once in a row.
    DuplicateNa,
    /// Fewer than K targets in a row.
    ShortRow,
    /// A target with only one half, or only one half `NA`.
    MalformedTarget,
    /// A row still missing after the re-ask; padded with empty slots.
    Unresolved,
    /// A response with no recognizable mapping object.
    Unparseable,
    /// The prompt exceeded the budget and candidates were batched.
    ContextSplit,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("serializes");
        f.write_str(s.as_str().expect("unit variant"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub src_table: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_attr: Option<String>,
    pub detail: String,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, src_table: &str, src_attr: Option<&str>, detail: impl Into<String>) -> Self {
        Self {
            kind,
            src_table: src_table.to_string(),
            src_attr: src_attr.map(str::to_string),
            detail: detail.into(),
        }
    }
}
