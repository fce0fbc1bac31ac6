//! Label space for scientific NER: seven entity types in a BIO scheme
//! (15 model classes) plus the `amb` gating marker.
//!
//! Class indices are stable and used everywhere a probability vector appears:
//! `O = 0`, `B-<type> = 1..=7`, `I-<type> = 8..=14`, in [`EntityType::ALL`]
//! order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of classifier outputs. `amb` is not a class.
pub const NUM_CLASSES: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityType {
    MethodName,
    TaskName,
    DatasetName,
    MetricName,
    MetricValue,
    HyperparameterName,
    HyperparameterValue,
}

impl EntityType {
    pub const ALL: [EntityType; 7] = [
        EntityType::MethodName,
        EntityType::TaskName,
        EntityType::DatasetName,
        EntityType::MetricName,
        EntityType::MetricValue,
        EntityType::HyperparameterName,
        EntityType::HyperparameterValue,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::MethodName => "MethodName",
            EntityType::TaskName => "TaskName",
            EntityType::DatasetName => "DatasetName",
            EntityType::MetricName => "MetricName",
            EntityType::MetricValue => "MetricValue",
            EntityType::HyperparameterName => "HyperparameterName",
            EntityType::HyperparameterValue => "HyperparameterValue",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EntityType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::argument(format!("unknown entity type `{s}`")))
    }
}

/// A word label. `Amb` marks a word whose prediction was rejected by the
/// confidence gate; it never appears as a classifier output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    O,
    B(EntityType),
    I(EntityType),
    Amb,
}

impl Label {
    /// Every model class in index order.
    pub fn classes() -> impl Iterator<Item = Label> {
        (0..NUM_CLASSES).map(|i| Label::from_index(i).expect("index in range"))
    }

    /// Classifier index, `None` for `Amb`.
    pub fn index(self) -> Option<usize> {
        match self {
            Label::O => Some(0),
            Label::B(t) => Some(1 + t.code()),
            Label::I(t) => Some(8 + t.code()),
            Label::Amb => None,
        }
    }

    pub fn from_index(index: usize) -> Option<Label> {
        match index {
            0 => Some(Label::O),
            1..=7 => EntityType::from_code(index - 1).map(Label::B),
            8..=14 => EntityType::from_code(index - 8).map(Label::I),
            _ => None,
        }
    }

    pub fn entity_type(self) -> Option<EntityType> {
        match self {
            Label::B(t) | Label::I(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_amb(self) -> bool {
        self == Label::Amb
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::O => f.write_str("O"),
            Label::B(t) => write!(f, "B-{t}"),
            Label::I(t) => write!(f, "I-{t}"),
            Label::Amb => f.write_str("amb"),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "O" => Ok(Label::O),
            "amb" => Ok(Label::Amb),
            _ => {
                let bad = || Error::argument(format!("unknown label `{s}`"));
                let (prefix, ty) = s.split_once('-').ok_or_else(bad)?;
                let ty: EntityType = ty.parse().map_err(|_| bad())?;
                match prefix {
                    "B" => Ok(Label::B(ty)),
                    "I" => Ok(Label::I(ty)),
                    _ => Err(bad()),
                }
            }
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Is `next` allowed to follow `prev`? `prev = None` is the start of the
/// sequence.
///
/// `amb` is a wildcard on both sides: anything may precede or follow it.
pub fn is_legal_transition(prev: Option<Label>, next: Label) -> bool {
    match (prev, next) {
        (_, Label::Amb) | (Some(Label::Amb), _) => true,
        (_, Label::O) | (_, Label::B(_)) => true,
        (None, Label::I(_)) | (Some(Label::O), Label::I(_)) => false,
        (Some(Label::B(a)), Label::I(b)) | (Some(Label::I(a)), Label::I(b)) => a == b,
    }
}

/// An illegal adjacent pair. `position` is the index of `next`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub position: usize,
    pub prev: Option<Label>,
    pub next: Label,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.prev {
            Some(p) => write!(f, "position {}: {} -> {}", self.position, p, self.next),
            None => write!(f, "position {}: <start> -> {}", self.position, self.next),
        }
    }
}

pub fn validate_sequence(labels: &[Label]) -> Vec<Violation> {
    let mut prev = None;
    let mut out = Vec::new();
    for (position, &next) in labels.iter().enumerate() {
        if !is_legal_transition(prev, next) {
            out.push(Violation { position, prev, next });
        }
        prev = Some(next);
    }
    out
}

/// A typed entity over word indices `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub entity_type: EntityType,
    pub start: usize,
    pub end: usize,
}

/// Maximal B-then-I runs of one type. `amb` and `O` close an open span; a
/// stray `I-X` with no open span of type X opens a new one.
pub fn spans_from_labels(labels: &[Label]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<(EntityType, usize)> = None;
    for (i, &label) in labels.iter().enumerate() {
        match label {
            Label::I(t) if matches!(open, Some((ot, _)) if ot == t) => {}
            Label::B(t) | Label::I(t) => {
                if let Some((ot, start)) = open.take() {
                    spans.push(Span { entity_type: ot, start, end: i });
                }
                open = Some((t, i));
            }
            Label::O | Label::Amb => {
                if let Some((ot, start)) = open.take() {
                    spans.push(Span { entity_type: ot, start, end: i });
                }
            }
        }
    }
    if let Some((ot, start)) = open {
        spans.push(Span { entity_type: ot, start, end: labels.len() });
    }
    spans
}

pub fn labels_from_spans(spans: &[Span], length: usize) -> Result<Vec<Label>> {
    let mut labels = vec![Label::O; length];
    let mut taken = vec![false; length];
    for span in spans {
        if span.start >= span.end || span.end > length {
            return Err(Error::argument(format!(
                "span {}..{} out of range for length {length}",
                span.start, span.end
            )));
        }
        for i in span.start..span.end {
            if taken[i] {
                return Err(Error::argument(format!(
                    "overlapping spans at word {i}"
                )));
            }
            taken[i] = true;
            labels[i] = if i == span.start {
                Label::B(span.entity_type)
            } else {
                Label::I(span.entity_type)
            };
        }
    }
    Ok(labels)
}
