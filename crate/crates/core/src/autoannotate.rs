//! Word-level pseudo-labels from subword probabilities.
//!
//! A word's score for class `c` is the product of its subwords' `p(c)`. The
//! decoder walks the paragraph left to right, keeps only classes that may
//! legally follow the previous label, takes the best of those, and accepts it
//! only if its score reaches `gamma`; otherwise the word becomes `amb`.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AnnotatedParagraph, Paragraph, Provenance};
use crate::error::{Error, Result};
use crate::tag_schema::{is_legal_transition, Label, NUM_CLASSES};
use crate::tagger::{ExternalProbRecord, TaggerModel, TokenProbs};

/// Per-class product of subword probabilities. Does not sum to one for
/// multi-piece words.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordProbs(pub [f64; NUM_CLASSES]);

impl WordProbs {
    /// Highest score and its class; ties go to the lowest index.
    pub fn argmax(&self) -> (usize, f64) {
        argmax_where(&self.0, |_| true).expect("non-empty class set")
    }
}

fn argmax_where(scores: &[f64; NUM_CLASSES], allowed: impl Fn(usize) -> bool) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (c, &s) in scores.iter().enumerate() {
        if allowed(c) && best.is_none_or(|(_, b)| s > b) {
            best = Some((c, s));
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub gamma: f64,
}

pub const DEFAULT_GAMMA: f64 = 0.98;

impl GateConfig {
    /// Rejects `gamma` outside `(0, 1]`.
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma <= 1.0 {
            Ok(GateConfig { gamma })
        } else {
            Err(Error::argument(format!("gamma must be in (0, 1], got {gamma}")))
        }
    }
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig { gamma: DEFAULT_GAMMA }
    }
}

pub fn aggregate_word_probs(subwords: &[TokenProbs]) -> Result<WordProbs> {
    match subwords {
        [] => Err(Error::argument("a word needs at least one subword")),
        [single] => Ok(WordProbs(single.0)),
        many => {
            let mut log = [0.0f64; NUM_CLASSES];
            for sw in many {
                for (acc, p) in log.iter_mut().zip(sw.0) {
                    *acc += p.ln();
                }
            }
            Ok(WordProbs(log.map(f64::exp)))
        }
    }
}

/// Argmax class if its score is at least `gamma`, else `amb`.
pub fn gate_label(word: &WordProbs, config: &GateConfig) -> Label {
    let (class, score) = word.argmax();
    gate(class, score, config)
}

fn gate(class: usize, score: f64, config: &GateConfig) -> Label {
    if score >= config.gamma {
        Label::from_index(class).expect("class index in range")
    } else {
        Label::Amb
    }
}

/// Labels plus the score of each word's best legal class.
pub fn constrained_decode_scored(words: &[WordProbs], config: &GateConfig) -> Vec<(Label, f64)> {
    let mut prev: Option<Label> = None;
    let mut out = Vec::with_capacity(words.len());
    for w in words {
        let legal = |c: usize| is_legal_transition(prev, Label::from_index(c).expect("class index"));
        let (class, score) = argmax_where(&w.0, legal).expect("O is always legal");
        let label = gate(class, score, config);
        out.push((label, score));
        prev = Some(label);
    }
    out
}

pub fn constrained_decode(words: &[WordProbs], config: &GateConfig) -> Vec<Label> {
    constrained_decode_scored(words, config).into_iter().map(|(l, _)| l).collect()
}

/// Where subword probabilities come from.
#[derive(Clone, Copy)]
pub enum ProbSource<'a> {
    Model(&'a TaggerModel),
    External(&'a [ExternalProbRecord]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateStats {
    pub paragraphs: usize,
    pub total_words: usize,
    pub amb_words: usize,
    /// Accepted words per class, indexed like the classifier.
    pub accepted: Vec<usize>,
}

impl Default for GateStats {
    fn default() -> Self {
        GateStats { paragraphs: 0, total_words: 0, amb_words: 0, accepted: vec![0; NUM_CLASSES] }
    }
}

impl GateStats {
    pub fn amb_fraction(&self) -> f64 {
        if self.total_words == 0 {
            0.0
        } else {
            self.amb_words as f64 / self.total_words as f64
        }
    }

    fn add(&mut self, labels: &[Label]) {
        self.paragraphs += 1;
        self.total_words += labels.len();
        for l in labels {
            match l.index() {
                Some(i) => self.accepted[i] += 1,
                None => self.amb_words += 1,
            }
        }
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "paragraphs    {}", self.paragraphs).unwrap();
        writeln!(s, "words         {}", self.total_words).unwrap();
        writeln!(s, "amb           {} ({:.2}%)", self.amb_words, 100.0 * self.amb_fraction()).unwrap();
        for (label, n) in Label::classes().zip(&self.accepted) {
            writeln!(s, "{:<24}{n}", label.to_string()).unwrap();
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        let accepted: serde_json::Map<String, serde_json::Value> = Label::classes()
            .zip(&self.accepted)
            .map(|(l, n)| (l.to_string(), (*n).into()))
            .collect();
        serde_json::json!({
            "paragraphs": self.paragraphs,
            "total_words": self.total_words,
            "amb_words": self.amb_words,
            "amb_fraction": self.amb_fraction(),
            "accepted": accepted,
        })
    }
}

fn word_probs_from_model(model: &TaggerModel, words: &[String]) -> Vec<WordProbs> {
    let mut grouped: Vec<Vec<TokenProbs>> = vec![Vec::new(); words.len()];
    for sp in model.predict_probs(words) {
        grouped[sp.word_index].push(sp.probs);
    }
    grouped
        .iter()
        .map(|g| aggregate_word_probs(g).expect("every word has a subword"))
        .collect()
}

fn word_probs_from_records(p: &Paragraph, records: &[ExternalProbRecord]) -> Result<Vec<WordProbs>> {
    let misaligned = |message: String| Error::Alignment {
        paper_id: p.paper_id.clone(),
        paragraph: p.paragraph_index,
        message,
    };
    let mut grouped: Vec<Vec<TokenProbs>> = vec![Vec::new(); p.words.len()];
    for r in records {
        let slot = grouped
            .get_mut(r.word_index)
            .ok_or_else(|| misaligned(format!("word index {} beyond {} words", r.word_index, p.words.len())))?;
        if r.subword_index != slot.len() {
            return Err(misaligned(format!("word {} subword {} out of sequence", r.word_index, r.subword_index)));
        }
        slot.push(r.token_probs());
    }
    if let Some(w) = grouped.iter().position(Vec::is_empty) {
        return Err(misaligned(format!("no probabilities for word {w}")));
    }
    grouped.iter().map(|g| aggregate_word_probs(g)).collect()
}

/// Pseudo-label every paragraph. Output order follows input order.
pub fn annotate_corpus(source: ProbSource<'_>, paragraphs: &[Paragraph], config: &GateConfig) -> Result<(Vec<AnnotatedParagraph>, GateStats)> {
    let index: HashMap<(&str, usize), &[ExternalProbRecord]> = match source {
        ProbSource::External(records) => group_records(records),
        ProbSource::Model(_) => HashMap::new(),
    };

    let annotated: Vec<AnnotatedParagraph> = paragraphs
        .par_iter()
        .map(|p| {
            let word_probs = match source {
                ProbSource::Model(model) => word_probs_from_model(model, &p.words),
                ProbSource::External(_) => {
                    let records = index.get(&(p.paper_id.as_str(), p.paragraph_index)).copied().unwrap_or(&[]);
                    word_probs_from_records(p, records)?
                }
            };
            let (labels, confidence): (Vec<Label>, Vec<f64>) =
                constrained_decode_scored(&word_probs, config).into_iter().unzip();
            Ok(AnnotatedParagraph {
                paper_id: p.paper_id.clone(),
                paragraph_index: p.paragraph_index,
                words: p.words.clone(),
                labels,
                provenance: Provenance::Auto,
                annotator: None,
                confidence: Some(confidence),
            })
        })
        .collect::<Result<_>>()?;

    let mut stats = GateStats::default();
    for p in &annotated {
        stats.add(&p.labels);
    }
    Ok((annotated, stats))
}

/// Ungated constrained decoding with a trained model, for evaluation.
pub fn predict_labels(model: &TaggerModel, paragraphs: &[Paragraph]) -> Vec<AnnotatedParagraph> {
    let ungated = GateConfig { gamma: 0.0 };
    annotate_corpus(ProbSource::Model(model), paragraphs, &ungated)
        .expect("model-backed annotation cannot misalign")
        .0
}

fn group_records(records: &[ExternalProbRecord]) -> HashMap<(&str, usize), &[ExternalProbRecord]> {
    let mut out = HashMap::new();
    let mut start = 0;
    for i in 1..=records.len() {
        let boundary = i == records.len()
            || records[i].paper_id != records[start].paper_id
            || records[i].paragraph != records[start].paragraph;
        if boundary {
            out.insert((records[start].paper_id.as_str(), records[start].paragraph), &records[start..i]);
            start = i;
        }
    }
    out
}
