//! Template-generated scientific paragraphs with known gold labels, used for
//! the end-to-end benchmark and for scale tests.
//!
//! Entity names are partly drawn from fixed lists and partly composed from
//! parts, so a small manual sample never covers every surface form and the
//! tagger has to lean on context for the rest.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{AnnotatedParagraph, Paragraph, Provenance};
use crate::ingest::hash_url;
use crate::tag_schema::{EntityType, Label};

const METHOD_FIXED: &[&str] = &[
    "BERT", "RoBERTa", "XLNet", "ELMo", "GloVe", "word2vec", "BiLSTM", "CRF", "Transformer", "SpanBERT",
    "DeBERTa", "ALBERT", "Longformer", "conditional random field", "pointer network", "beam search",
    "graph attention network", "BART", "T5", "GPT - 2",
];
const METHOD_HEADS: &[&str] = &[
    "Span", "Graph", "Pointer", "Tree", "Deep", "Sparse", "Cross", "Dual", "Meta", "Hyper", "Prompt", "Syntax",
    "Entity", "Multi", "Contrast", "Retro",
];
const METHOD_TAILS: &[&str] = &["BERT", "Net", "Former", "LSTM", "GAN", "Tagger", "Parser", "Encoder", "Fusion", "Align"];

const TASKS: &[&str] = &[
    "named entity recognition", "machine translation", "question answering", "relation extraction",
    "sentiment analysis", "summarization", "dependency parsing", "coreference resolution", "text classification",
    "semantic role labeling", "entity linking", "natural language inference", "dialogue state tracking",
    "part - of - speech tagging", "event extraction", "keyphrase extraction", "paraphrase detection",
    "document retrieval", "slot filling", "grammatical error correction",
];

const DATASET_FIXED: &[&str] = &[
    "SQuAD", "CoNLL - 2003", "OntoNotes", "Penn Treebank", "MultiNLI", "SNLI", "GLUE", "SuperGLUE", "WMT14",
    "CNN / DailyMail", "XSum", "HotpotQA", "TACRED", "SciERC", "MS MARCO", "Natural Questions",
];
const DATASET_HEADS: &[&str] = &["Sci", "Bio", "Med", "Fin", "Legal", "News", "Wiki", "Code", "Chem", "Geo", "Poly", "Twit"];
const DATASET_TAILS: &[&str] = &["QA", "NER", "Bench", "Corpus", "Set", "Eval", "Docs", "RE"];

const METRICS: &[&str] = &[
    "F1", "accuracy", "BLEU", "ROUGE - L", "exact match", "perplexity", "precision", "recall", "METEOR",
    "macro F1", "micro F1", "Spearman correlation", "AUC",
];
const HYPER_NAMES: &[&str] = &[
    "learning rate", "batch size", "dropout", "warmup steps", "weight decay", "hidden size", "number of layers",
    "beam size", "epochs", "label smoothing", "maximum sequence length",
];

/// Sentence templates; `{X}` slots are filled with an entity of that type.
const TEMPLATES: &[&str] = &[
    "We propose {M} , a novel approach to {T} .",
    "{M} achieves {V} {N} on {D} .",
    "We evaluate our model on the {D} dataset for {T} .",
    "The {H} is set to {W} .",
    "We train with a {H} of {W} and a {H} of {W} .",
    "On {D} , {M} obtains an {N} of {V} .",
    "Prior work on {T} relies on {M} .",
    "Results are reported in terms of {N} on the {D} test set .",
    "Compared to {M} , our method improves {N} by {V} points .",
    "For {T} we fine - tune {M} with a {H} of {W} .",
    "{D} is a standard benchmark for {T} .",
    "We use {M} as the encoder and report {N} .",
];

const FILLERS: &[&str] = &[
    "This section describes the experimental setup .",
    "We discuss limitations in Section 6 .",
    "Table 2 summarizes the main results .",
    "Our code is publicly available .",
    "Figure 3 shows the learning curves over 10 runs .",
    "We thank the anonymous reviewers for their feedback .",
    "The annotation guidelines were refined over 3 rounds .",
    "In this paper we study a related problem .",
    "All experiments were run on 2 GPUs .",
    "The accuracy of the annotations was checked manually .",
];

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

fn entity_tokens(ty: EntityType, rng: &mut ChaCha8Rng) -> Vec<String> {
    let text = match ty {
        EntityType::MethodName => {
            if rng.gen_bool(0.4) {
                pick(rng, METHOD_FIXED).to_string()
            } else {
                format!("{}{}", pick(rng, METHOD_HEADS), pick(rng, METHOD_TAILS))
            }
        }
        EntityType::TaskName => pick(rng, TASKS).to_string(),
        EntityType::DatasetName => {
            if rng.gen_bool(0.5) {
                pick(rng, DATASET_FIXED).to_string()
            } else {
                format!("{}{}", pick(rng, DATASET_HEADS), pick(rng, DATASET_TAILS))
            }
        }
        EntityType::MetricName => pick(rng, METRICS).to_string(),
        EntityType::MetricValue => match rng.gen_range(0..3) {
            0 => format!("{:.1}", rng.gen_range(20.0..99.9)),
            1 => format!("{:.2}", rng.gen_range(0.1..0.99)),
            _ => format!("{:.1} %", rng.gen_range(20.0..99.9)),
        },
        EntityType::HyperparameterName => pick(rng, HYPER_NAMES).to_string(),
        EntityType::HyperparameterValue => match rng.gen_range(0..4) {
            0 => format!("{}e-{}", rng.gen_range(1..10), rng.gen_range(3..7)),
            1 => [8, 16, 32, 64, 128, 256, 512][rng.gen_range(0..7)].to_string(),
            2 => format!("0.{}", rng.gen_range(1..6)),
            _ => rng.gen_range(2..25).to_string(),
        },
    };
    text.split(' ').map(str::to_string).collect()
}

fn slot_type(slot: &str) -> Option<EntityType> {
    Some(match slot {
        "{M}" => EntityType::MethodName,
        "{T}" => EntityType::TaskName,
        "{D}" => EntityType::DatasetName,
        "{N}" => EntityType::MetricName,
        "{V}" => EntityType::MetricValue,
        "{H}" => EntityType::HyperparameterName,
        "{W}" => EntityType::HyperparameterValue,
        _ => return None,
    })
}

/// One gold-labeled paragraph of 2 to 4 sentences.
pub fn generate_paragraph(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<Label>) {
    let mut words = Vec::new();
    let mut labels = Vec::new();
    let sentences = rng.gen_range(2..=4);
    for _ in 0..sentences {
        let template = if rng.gen_bool(0.75) { pick(rng, TEMPLATES) } else { pick(rng, FILLERS) };
        for tok in template.split(' ') {
            match slot_type(tok) {
                Some(ty) => {
                    for (k, w) in entity_tokens(ty, rng).into_iter().enumerate() {
                        words.push(w);
                        labels.push(if k == 0 { Label::B(ty) } else { Label::I(ty) });
                    }
                }
                None => {
                    words.push(tok.to_string());
                    labels.push(Label::O);
                }
            }
        }
    }
    (words, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub manual: usize,
    pub auto: usize,
    pub test: usize,
    pub paragraphs_per_paper: usize,
    pub annotators: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    /// 100 manual, 1,700 auto and 200 test paragraphs.
    fn default() -> Self {
        SyntheticConfig { manual: 100, auto: 1700, test: 200, paragraphs_per_paper: 10, annotators: 3, seed: 2024 }
    }
}

/// Gold-labeled splits. `auto` keeps its gold labels so pseudo-label quality
/// can be measured; the loop only ever sees its words.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub manual: Vec<AnnotatedParagraph>,
    pub auto: Vec<AnnotatedParagraph>,
    pub test: Vec<AnnotatedParagraph>,
}

impl SyntheticCorpus {
    pub fn auto_paragraphs(&self) -> Vec<Paragraph> {
        self.auto.iter().map(AnnotatedParagraph::as_paragraph).collect()
    }
}

fn paper_id(k: usize) -> String {
    hash_url(&format!("https://example.org/synthetic/{k}.pdf")).expect("non-empty url")
}

pub fn generate(config: &SyntheticConfig) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let per_paper = config.paragraphs_per_paper.max(1);
    let total = config.manual + config.test + config.auto;
    let mut all: Vec<AnnotatedParagraph> = (0..total)
        .map(|i| {
            let (words, labels) = generate_paragraph(&mut rng);
            let paper = i / per_paper;
            AnnotatedParagraph {
                paper_id: paper_id(paper),
                paragraph_index: i % per_paper,
                words,
                labels,
                provenance: Provenance::Manual,
                annotator: Some(format!("annotator{}", paper % config.annotators.max(1) + 1)),
                confidence: None,
            }
        })
        .collect();
    let auto = all.split_off(config.manual + config.test);
    let test = all.split_off(config.manual);
    let strip = |mut p: AnnotatedParagraph| {
        p.annotator = None;
        p
    };
    SyntheticCorpus {
        manual: all,
        auto: auto.into_iter().map(strip).collect(),
        test: test.into_iter().map(strip).collect(),
    }
}

/// Unlabeled paragraphs for throughput tests, `paragraphs_per_paper` per id.
pub fn generate_unlabeled(count: usize, paragraphs_per_paper: usize, seed: u64) -> Vec<Paragraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_paper = paragraphs_per_paper.max(1);
    (0..count)
        .map(|i| {
            let (words, _) = generate_paragraph(&mut rng);
            Paragraph { paper_id: paper_id(1_000_000 + i / per_paper), paragraph_index: i % per_paper, words }
        })
        .collect()
}
