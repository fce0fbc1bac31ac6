//! Scoring, bootstrap comparison of two prediction sets, label histograms and
//! correct/incorrect prediction markup.
//!
//! Ratios with a zero denominator are reported as 0. `amb` predictions count
//! as wrong for accuracy and as "no prediction" for precision and spans.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::AnnotatedParagraph;
use crate::error::{Error, Result};
use crate::tag_schema::{spans_from_labels, EntityType, Label, Span, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassMetrics {
    fn new(name: String, counts: Counts) -> Self {
        ClassMetrics { name, counts, precision: counts.precision(), recall: counts.recall(), f1: counts.f1() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub tokens: usize,
    pub correct_tokens: usize,
    pub token_accuracy: f64,
    /// Micro-averaged over the 14 entity classes (token level).
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub gold_spans: usize,
    pub predicted_spans: usize,
    pub span_precision: f64,
    pub span_recall: f64,
    pub span_f1: f64,
    pub per_type_spans: Vec<ClassMetrics>,
}

/// Headline metrics, in report order.
pub const METRIC_NAMES: [&str; 7] = [
    "token_accuracy",
    "precision",
    "recall",
    "f1",
    "span_precision",
    "span_recall",
    "span_f1",
];

impl MetricSet {
    pub fn headline(&self) -> [f64; 7] {
        [
            self.token_accuracy,
            self.precision,
            self.recall,
            self.f1,
            self.span_precision,
            self.span_recall,
            self.span_f1,
        ]
    }
}

fn check_aligned(gold: &[AnnotatedParagraph], predicted: &[AnnotatedParagraph]) -> Result<()> {
    if gold.len() != predicted.len() {
        return Err(Error::argument(format!(
            "{} gold paragraphs but {} predicted",
            gold.len(),
            predicted.len()
        )));
    }
    for (k, (g, p)) in gold.iter().zip(predicted).enumerate() {
        if g.paper_id != p.paper_id || g.paragraph_index != p.paragraph_index || g.words.len() != p.words.len() {
            return Err(Error::argument(format!(
                "paragraph {k}: gold {}#{} ({} words) does not match prediction {}#{} ({} words)",
                g.paper_id,
                g.paragraph_index,
                g.words.len(),
                p.paper_id,
                p.paragraph_index,
                p.words.len()
            )));
        }
        if g.labels.len() != p.labels.len() {
            return Err(Error::argument(format!("paragraph {k}: label counts differ")));
        }
    }
    Ok(())
}

#[derive(Default, Clone)]
struct Tally {
    tokens: usize,
    correct: usize,
    class: [Counts; NUM_CLASSES],
    gold_spans: usize,
    predicted_spans: usize,
    span: [Counts; 7],
}

impl Tally {
    fn add(&mut self, gold: &[Label], pred: &[Label]) {
        for (&g, &p) in gold.iter().zip(pred) {
            self.tokens += 1;
            if g == p {
                self.correct += 1;
            }
            let gi = g.index().unwrap_or(0);
            let pi = p.index();
            match pi {
                Some(pi) if pi != 0 && pi == gi => self.class[pi].tp += 1,
                Some(pi) if pi != 0 => {
                    self.class[pi].fp += 1;
                    if gi != 0 {
                        self.class[gi].fn_ += 1;
                    }
                }
                _ => {
                    if gi != 0 {
                        self.class[gi].fn_ += 1;
                    }
                }
            }
        }
        let gold_spans: HashSet<Span> = spans_from_labels(gold).into_iter().collect();
        let pred_spans = spans_from_labels(pred);
        self.gold_spans += gold_spans.len();
        self.predicted_spans += pred_spans.len();
        for s in &pred_spans {
            let t = s.entity_type.code();
            if gold_spans.contains(s) {
                self.span[t].tp += 1;
            } else {
                self.span[t].fp += 1;
            }
        }
        let pred_set: HashSet<&Span> = pred_spans.iter().collect();
        for s in &gold_spans {
            if !pred_set.contains(s) {
                self.span[s.entity_type.code()].fn_ += 1;
            }
        }
    }

    fn finish(&self) -> MetricSet {
        let mut micro = Counts::default();
        for c in &self.class[1..] {
            micro.tp += c.tp;
            micro.fp += c.fp;
            micro.fn_ += c.fn_;
        }
        let mut span = Counts::default();
        for c in &self.span {
            span.tp += c.tp;
            span.fp += c.fp;
            span.fn_ += c.fn_;
        }
        MetricSet {
            tokens: self.tokens,
            correct_tokens: self.correct,
            token_accuracy: ratio(self.correct, self.tokens),
            precision: micro.precision(),
            recall: micro.recall(),
            f1: micro.f1(),
            per_class: Label::classes()
                .skip(1)
                .map(|l| ClassMetrics::new(l.to_string(), self.class[l.index().unwrap()]))
                .collect(),
            gold_spans: self.gold_spans,
            predicted_spans: self.predicted_spans,
            span_precision: span.precision(),
            span_recall: span.recall(),
            span_f1: span.f1(),
            per_type_spans: EntityType::ALL
                .iter()
                .map(|t| ClassMetrics::new(t.to_string(), self.span[t.code()]))
                .collect(),
        }
    }
}

pub fn score(gold: &[AnnotatedParagraph], predicted: &[AnnotatedParagraph]) -> Result<MetricSet> {
    check_aligned(gold, predicted)?;
    Ok(score_indices(gold, predicted, 0..gold.len()))
}

fn score_indices(gold: &[AnnotatedParagraph], predicted: &[AnnotatedParagraph], indices: impl Iterator<Item = usize>) -> MetricSet {
    let mut tally = Tally::default();
    for i in indices {
        tally.add(&gold[i].labels, &predicted[i].labels);
    }
    tally.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub mean: f64,
    /// Sample standard deviation across draws (0 for a single draw).
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

fn summarize(draws: &[MetricSet]) -> Vec<MetricSummary> {
    METRIC_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let values: Vec<f64> = draws.iter().map(|m| m.headline()[k]).collect();
            let n = values.len() as f64;
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = (values.iter().sum::<f64>() / n).clamp(min, max);
            let std = if values.len() > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            MetricSummary { name: name.to_string(), mean, std, min, max }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub draws: usize,
    pub draw_size: usize,
    pub seed: u64,
    /// Paragraph indices of each draw.
    pub samples: Vec<Vec<usize>>,
    pub per_draw_a: Vec<MetricSet>,
    pub per_draw_b: Vec<MetricSet>,
    pub summary_a: Vec<MetricSummary>,
    pub summary_b: Vec<MetricSummary>,
}

pub const DEFAULT_DRAWS: usize = 12;
pub const DEFAULT_DRAW_SIZE: usize = 50;

/// Score both prediction sets on `draws` random subsets of `draw_size`
/// paragraphs, each drawn without replacement from the evaluation set.
pub fn bootstrap_compare(
    gold: &[AnnotatedParagraph],
    predictions_a: &[AnnotatedParagraph],
    predictions_b: &[AnnotatedParagraph],
    draws: usize,
    draw_size: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    check_aligned(gold, predictions_a)?;
    check_aligned(gold, predictions_b)?;
    if draws == 0 || draw_size == 0 {
        return Err(Error::argument("draws and draw size must be positive"));
    }
    if draw_size > gold.len() {
        return Err(Error::argument(format!(
            "draw size {draw_size} exceeds evaluation set of {} paragraphs",
            gold.len()
        )));
    }
    let samples: Vec<Vec<usize>> = (0..draws)
        .map(|d| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(d as u64);
            let mut idx = rand::seq::index::sample(&mut rng, gold.len(), draw_size).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect();
    let (per_draw_a, per_draw_b): (Vec<MetricSet>, Vec<MetricSet>) = samples
        .par_iter()
        .map(|idx| {
            (
                score_indices(gold, predictions_a, idx.iter().copied()),
                score_indices(gold, predictions_b, idx.iter().copied()),
            )
        })
        .unzip();
    Ok(BootstrapResult {
        draws,
        draw_size,
        seed,
        summary_a: summarize(&per_draw_a),
        summary_b: summarize(&per_draw_b),
        samples,
        per_draw_a,
        per_draw_b,
    })
}

impl BootstrapResult {
    /// Aligned table of mean ± std per metric for both models.
    pub fn render_table(&self, name_a: &str, name_b: &str) -> String {
        let mut s = String::new();
        writeln!(s, "bootstrap: {} draws of {} paragraphs (seed {})", self.draws, self.draw_size, self.seed).unwrap();
        writeln!(s, "{:<16} {:>20} {:>20} {:>10}", "metric", name_a, name_b, "diff").unwrap();
        for (a, b) in self.summary_a.iter().zip(&self.summary_b) {
            writeln!(
                s,
                "{:<16} {:>20} {:>20} {:>+10.4}",
                a.name,
                format!("{:.4} ± {:.4}", a.mean, a.std),
                format!("{:.4} ± {:.4}", b.mean, b.std),
                b.mean - a.mean
            )
            .unwrap();
        }
        s
    }
}

/// Non-`O` label histogram: all 14 entity classes (zero included), plus
/// `amb` when present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub counts: Vec<(Label, usize)>,
}

impl LabelCounts {
    pub fn get(&self, label: Label) -> usize {
        self.counts.iter().find(|(l, _)| *l == label).map_or(0, |(_, n)| *n)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|(_, n)| n).sum()
    }

    /// Largest count first; ties keep class order.
    pub fn render_table(&self) -> String {
        let mut rows = self.counts.clone();
        rows.sort_by_key(|r| std::cmp::Reverse(r.1));
        let mut s = String::new();
        for (label, n) in rows {
            writeln!(s, "{:<24}{n:>8}", label.to_string()).unwrap();
        }
        s
    }
}

pub fn label_counts(paragraphs: &[AnnotatedParagraph]) -> LabelCounts {
    let mut by_class = [0usize; NUM_CLASSES];
    let mut amb = 0;
    for l in paragraphs.iter().flat_map(|p| &p.labels) {
        match l.index() {
            Some(i) => by_class[i] += 1,
            None => amb += 1,
        }
    }
    let mut counts: Vec<(Label, usize)> = Label::classes().skip(1).map(|l| (l, by_class[l.index().unwrap()])).collect();
    if amb > 0 {
        counts.push((Label::Amb, amb));
    }
    LabelCounts { counts }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffStyle {
    /// Blue for correct, red for incorrect.
    Ansi,
    /// `[+word|LABEL]` correct, `[-word|PRED|GOLD]` incorrect.
    Brackets,
}

const BLUE: &str = "\x1b[34m";
const RED: &str = "\x1b[31m";
const RESET: &str = "\x1b[0m";

/// One block per paragraph: a `# paper_id paragraph` header and the words on
/// one line. A word is marked when its gold or predicted label is not `O`.
pub fn diff_report(gold: &[AnnotatedParagraph], predicted: &[AnnotatedParagraph], style: DiffStyle) -> Result<String> {
    check_aligned(gold, predicted)?;
    let mut s = String::new();
    for (g, p) in gold.iter().zip(predicted) {
        writeln!(s, "# {} {}", g.paper_id, g.paragraph_index).unwrap();
        let rendered: Vec<String> = g
            .words
            .iter()
            .zip(g.labels.iter().zip(&p.labels))
            .map(|(w, (&gl, &pl))| {
                if gl == Label::O && pl == Label::O {
                    return match style {
                        DiffStyle::Brackets if w.starts_with(['[', '#', '\\']) => format!("\\{w}"),
                        _ => w.clone(),
                    };
                }
                match (style, gl == pl) {
                    (DiffStyle::Brackets, true) => format!("[+{w}|{pl}]"),
                    (DiffStyle::Brackets, false) => format!("[-{w}|{pl}|{gl}]"),
                    (DiffStyle::Ansi, true) => format!("{BLUE}{w}/{pl}{RESET}"),
                    (DiffStyle::Ansi, false) => format!("{RED}{w}/{pl}(gold {gl}){RESET}"),
                }
            })
            .collect();
        writeln!(s, "{}", rendered.join(" ")).unwrap();
        writeln!(s).unwrap();
    }
    Ok(s)
}

/// Recover per-word marks from bracket markup: `Some(true)` correct,
/// `Some(false)` incorrect, `None` unmarked.
pub fn parse_diff_markup(text: &str) -> Vec<Vec<Option<bool>>> {
    text.lines()
        .filter(|l| !l.is_empty() && !l.starts_with("# "))
        .map(|line| {
            line.split(' ')
                .map(|tok| {
                    if tok.len() >= 3 && tok.ends_with(']') {
                        if tok.starts_with("[+") {
                            return Some(true);
                        }
                        if tok.starts_with("[-") {
                            return Some(false);
                        }
                    }
                    None
                })
                .collect()
        })
        .collect()
}
