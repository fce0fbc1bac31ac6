//! The self-training loop.
//!
//! Each iteration: (1) train a model on the manual set, (2) pseudo-label the
//! auto corpus with it under the confidence gate, (3) keep training the same
//! model on manual plus pseudo-labeled paragraphs. The loop repeats this
//! `iterations` times; pseudo-labels are regenerated every iteration.
//!
//! With a run directory, every iteration leaves behind
//! `iteration-<k>.json`, `iteration-<k>.step1.model`, `iteration-<k>.model`
//! and `iteration-<k>.auto.conll`. A rerun with the same configuration and
//! data picks up completed iterations from those files instead of
//! recomputing them.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autoannotate::{annotate_corpus, predict_labels, GateConfig, GateStats, ProbSource};
use crate::dataset::{merge_for_retraining, read_annotations, write_annotations, AmbPolicy, AnnotatedParagraph, Paragraph, TrainingExample};
use crate::error::{Error, Result};
use crate::eval::{score, MetricSet};
use crate::fsutil::{open_read, write_atomic, write_string_atomic};
use crate::tagger::{train, TaggerModel, TrainConfig, DEFAULT_FEATURE_BITS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub iterations: usize,
    pub step1: TrainConfig,
    pub step3: TrainConfig,
    pub gate: GateConfig,
    pub amb_policy: AmbPolicy,
    /// Master seed; every training run gets its own seed derived from it.
    pub seed: u64,
    /// Start each Step-1 from the previous iteration's final model instead
    /// of a fresh one.
    pub carry_weights: bool,
    pub feature_bits: u32,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            iterations: 2,
            step1: TrainConfig::initial(),
            step3: TrainConfig::retrain(),
            gate: GateConfig::default(),
            amb_policy: AmbPolicy::default(),
            seed: 0,
            carry_weights: false,
            feature_bits: DEFAULT_FEATURE_BITS,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::argument("iterations must be at least 1"));
        }
        self.step1.validate()?;
        self.step3.validate()?;
        // Above 1 is allowed here: it rejects every word, which the loop
        // handles by training on manual data only.
        if !(self.gate.gamma > 0.0 && self.gate.gamma.is_finite()) {
            return Err(Error::argument(format!("gamma must be positive, got {}", self.gate.gamma)));
        }
        if !(1..=31).contains(&self.feature_bits) {
            return Err(Error::argument("feature_bits must be in 1..=31"));
        }
        Ok(())
    }

    /// Short stable digest of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex_prefix(&Sha256::digest(json.as_bytes()), 16)
    }
}

fn hex_prefix(bytes: &[u8], chars: usize) -> String {
    let mut s: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
    s.truncate(chars);
    s
}

/// Seed for one training step, mixed from the master seed with splitmix64.
pub fn derive_seed(master: u64, iteration: usize, step: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(iteration as u64 * 4 + step + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    /// Digest of the configuration and input data this record belongs to.
    pub fingerprint: String,
    pub step1_seed: u64,
    pub step3_seed: u64,
    pub gate_stats: GateStats,
    pub manual_paragraphs: usize,
    /// Auto paragraphs that went into Step-3 training.
    pub auto_paragraphs_used: usize,
    pub step1_losses: Vec<f64>,
    pub step3_losses: Vec<f64>,
    /// Held-out scores of the Step-1 model and of the iteration's final
    /// model. `None` without a test set.
    pub step1_metrics: Option<MetricSet>,
    pub metrics: Option<MetricSet>,
    /// File names inside the run directory.
    pub step1_model_path: Option<String>,
    pub model_path: Option<String>,
    pub annotations_path: Option<String>,
    pub duration_secs: f64,
    pub warnings: Vec<String>,
}

impl IterationRecord {
    /// Equality ignoring wall-clock duration.
    pub fn same_outcome(&self, other: &IterationRecord) -> bool {
        IterationRecord { duration_secs: 0.0, ..self.clone() } == IterationRecord { duration_secs: 0.0, ..other.clone() }
    }
}

/// Everything one iteration produced.
#[derive(Debug, Clone)]
pub struct IterationOutput {
    pub step1_model: TaggerModel,
    pub model: TaggerModel,
    pub annotations: Vec<AnnotatedParagraph>,
    pub record: IterationRecord,
}

/// Steps 1 to 3. `init` seeds Step-1 (a fresh model when `None`).
pub fn run_iteration(
    manual: &[AnnotatedParagraph],
    auto: &[Paragraph],
    test: &[AnnotatedParagraph],
    config: &LoopConfig,
    iteration: usize,
    init: Option<TaggerModel>,
) -> Result<IterationOutput> {
    if manual.is_empty() {
        return Err(Error::argument("manual training set is empty"));
    }
    config.validate()?;
    let started = Instant::now();
    let mut warnings = Vec::new();

    let step1 = TrainConfig { seed: derive_seed(config.seed, iteration, 1), ..config.step1.clone() };
    let manual_examples: Vec<TrainingExample> = manual.iter().map(TrainingExample::from_annotated).collect();
    let init = init.unwrap_or_else(|| TaggerModel::new(config.feature_bits));
    let step1_model = train(&manual_examples, &step1, Some(init))?;

    let (annotations, gate_stats) = annotate_corpus(ProbSource::Model(&step1_model), auto, &config.gate)?;

    let all_rejected = gate_stats.total_words > 0 && gate_stats.amb_words == gate_stats.total_words;
    let usable: &[AnnotatedParagraph] = if all_rejected {
        warnings.push(format!(
            "gate (gamma = {}) rejected every auto-annotated word; Step-3 trains on manual data only",
            config.gate.gamma
        ));
        &[]
    } else {
        &annotations
    };
    let merged = merge_for_retraining(manual, usable, config.amb_policy);
    let auto_paragraphs_used = merged.len() - manual.len();

    let step3 = TrainConfig { seed: derive_seed(config.seed, iteration, 3), ..config.step3.clone() };
    let model = train(&merged, &step3, Some(step1_model.clone()))?;

    let evaluate = |m: &TaggerModel| -> Result<Option<MetricSet>> {
        if test.is_empty() {
            return Ok(None);
        }
        let paragraphs: Vec<Paragraph> = test.iter().map(AnnotatedParagraph::as_paragraph).collect();
        score(test, &predict_labels(m, &paragraphs)).map(Some)
    };

    let record = IterationRecord {
        iteration,
        fingerprint: String::new(),
        step1_seed: step1.seed,
        step3_seed: step3.seed,
        gate_stats,
        manual_paragraphs: manual.len(),
        auto_paragraphs_used,
        step1_losses: step1_model.meta.epoch_losses.clone(),
        step3_losses: model.meta.epoch_losses.clone(),
        step1_metrics: evaluate(&step1_model)?,
        metrics: evaluate(&model)?,
        step1_model_path: None,
        model_path: None,
        annotations_path: None,
        duration_secs: started.elapsed().as_secs_f64(),
        warnings,
    };
    Ok(IterationOutput { step1_model, model, annotations, record })
}

#[derive(Debug, Clone)]
pub struct LoopOutcome {
    pub records: Vec<IterationRecord>,
    /// Step-1 model of the first iteration: the manual-only baseline.
    pub baseline_model: TaggerModel,
    pub final_model: TaggerModel,
    /// Pseudo-labels of each iteration.
    pub annotations: Vec<Vec<AnnotatedParagraph>>,
    /// Iterations loaded from the run directory rather than recomputed.
    pub resumed: usize,
}

/// Digest of a loop configuration together with its input data. The
/// iteration count is left out so a finished run can be extended.
pub fn fingerprint(config: &LoopConfig, manual: &[AnnotatedParagraph], auto: &[Paragraph], test: &[AnnotatedParagraph]) -> String {
    let mut h = Sha256::new();
    let config = LoopConfig { iterations: 0, ..config.clone() };
    h.update(serde_json::to_string(&config).expect("config serializes"));
    for p in auto {
        feed_words(&mut h, "auto", &p.paper_id, p.paragraph_index, &p.words);
    }
    for (tag, ps) in [("manual", manual), ("test", test)] {
        for p in ps {
            feed_words(&mut h, tag, &p.paper_id, p.paragraph_index, &p.words);
            let labels: Vec<String> = p.labels.iter().map(ToString::to_string).collect();
            h.update(labels.join(" "));
        }
    }
    hex_prefix(&h.finalize(), 16)
}

fn feed_words(h: &mut Sha256, tag: &str, id: &str, idx: usize, words: &[String]) {
    h.update(format!("\u{1}{tag}\u{1}{id}\u{1}{idx}"));
    for w in words {
        h.update([0u8]);
        h.update(w.as_bytes());
    }
}

fn artifact_names(k: usize) -> (String, String, String, String) {
    (
        format!("iteration-{k}.json"),
        format!("iteration-{k}.step1.model"),
        format!("iteration-{k}.model"),
        format!("iteration-{k}.auto.conll"),
    )
}

fn load_model(path: &Path) -> Result<TaggerModel> {
    TaggerModel::read(open_read(path)?).map_err(|e| match e {
        Error::Format { location, message } => Error::format(format!("{}: {location}", path.display()), message),
        other => other,
    })
}

fn save_model(path: &Path, model: &TaggerModel) -> Result<()> {
    write_atomic(path, |w| model.write(w))
}

/// A completed iteration from an earlier run, if its record matches.
fn try_resume(dir: &Path, k: usize, fingerprint: &str) -> Result<Option<IterationOutput>> {
    let (record_name, step1_name, model_name, auto_name) = artifact_names(k);
    let record_path = dir.join(&record_name);
    if !record_path.exists() {
        return Ok(None);
    }
    let record: IterationRecord = serde_json::from_reader(open_read(&record_path)?)
        .map_err(|e| Error::format(record_path.display().to_string(), e.to_string()))?;
    if record.fingerprint != fingerprint || record.iteration != k {
        return Ok(None);
    }
    let step1_model = load_model(&dir.join(step1_name))?;
    let model = load_model(&dir.join(model_name))?;
    let annotations = read_annotations(&auto_name, open_read(&dir.join(&auto_name))?)?;
    Ok(Some(IterationOutput { step1_model, model, annotations, record }))
}

fn persist(dir: &Path, out: &mut IterationOutput) -> Result<()> {
    let (record_name, step1_name, model_name, auto_name) = artifact_names(out.record.iteration);
    save_model(&dir.join(&step1_name), &out.step1_model)?;
    save_model(&dir.join(&model_name), &out.model)?;
    write_atomic(&dir.join(&auto_name), |w| write_annotations(&out.annotations, w))?;
    out.record.step1_model_path = Some(step1_name);
    out.record.model_path = Some(model_name);
    out.record.annotations_path = Some(auto_name);
    let json = serde_json::to_string_pretty(&out.record).expect("record serializes");
    // The record goes last: its presence marks the iteration as complete.
    write_string_atomic(&dir.join(record_name), &(json + "\n"))
}

/// Run `config.iterations` iterations, persisting each one to `run_dir` when
/// given. The final model is the last iteration's Step-3 output.
pub fn run_loop(
    manual: &[AnnotatedParagraph],
    auto: &[Paragraph],
    test: &[AnnotatedParagraph],
    config: &LoopConfig,
    run_dir: Option<&Path>,
) -> Result<LoopOutcome> {
    config.validate()?;
    if manual.is_empty() {
        return Err(Error::argument("manual training set is empty"));
    }
    let fp = fingerprint(config, manual, auto, test);
    let mut records = Vec::with_capacity(config.iterations);
    let mut annotations = Vec::with_capacity(config.iterations);
    let mut baseline = None;
    let mut previous: Option<TaggerModel> = None;
    let mut resumed = 0;

    for k in 1..=config.iterations {
        let wrap = |e: Error| Error::Iteration { iteration: k, source: Box::new(e) };
        let loaded = match run_dir {
            Some(dir) => try_resume(dir, k, &fp).map_err(wrap)?,
            None => None,
        };
        let out = match loaded {
            Some(out) => {
                resumed += 1;
                out
            }
            None => {
                let init = if config.carry_weights { previous.take() } else { None };
                let mut out = run_iteration(manual, auto, test, config, k, init).map_err(wrap)?;
                out.record.fingerprint = fp.clone();
                if let Some(dir) = run_dir {
                    persist(dir, &mut out).map_err(wrap)?;
                }
                out
            }
        };
        if baseline.is_none() {
            baseline = Some(out.step1_model);
        }
        records.push(out.record);
        annotations.push(out.annotations);
        previous = Some(out.model);
    }

    Ok(LoopOutcome {
        records,
        baseline_model: baseline.expect("at least one iteration"),
        final_model: previous.expect("at least one iteration"),
        annotations,
        resumed,
    })
}

/// Default run directory name for a fingerprint.
pub fn run_dir_name(fingerprint: &str) -> PathBuf {
    PathBuf::from(format!("run-{fingerprint}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, SyntheticConfig};

    fn small() -> (Vec<AnnotatedParagraph>, Vec<Paragraph>, Vec<AnnotatedParagraph>) {
        let c = generate(&SyntheticConfig { manual: 20, auto: 40, test: 10, ..Default::default() });
        let auto = c.auto_paragraphs();
        (c.manual, auto, c.test)
    }

    fn quick() -> LoopConfig {
        LoopConfig {
            step1: TrainConfig { epochs: 3, ..TrainConfig::initial() },
            step3: TrainConfig { epochs: 1, ..TrainConfig::retrain() },
            feature_bits: 16,
            ..LoopConfig::default()
        }
    }

    #[test]
    fn seeds_differ_per_step_and_iteration() {
        let seeds = [derive_seed(7, 1, 1), derive_seed(7, 1, 3), derive_seed(7, 2, 1), derive_seed(8, 1, 1)];
        for i in 0..seeds.len() {
            for j in i + 1..seeds.len() {
                assert_ne!(seeds[i], seeds[j]);
            }
        }
    }

    #[test]
    fn empty_manual_is_rejected() {
        let (_, auto, test) = small();
        assert!(matches!(run_iteration(&[], &auto, &test, &quick(), 1, None), Err(Error::Argument(_))));
        assert!(matches!(run_loop(&[], &auto, &test, &quick(), None), Err(Error::Argument(_))));
    }

    #[test]
    fn iterations_are_deterministic() {
        let (manual, auto, test) = small();
        let a = run_iteration(&manual, &auto, &test, &quick(), 1, None).unwrap();
        let b = run_iteration(&manual, &auto, &test, &quick(), 1, None).unwrap();
        assert!(a.record.same_outcome(&b.record));
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn impossible_gate_falls_back_to_manual() {
        let (manual, auto, test) = small();
        let cfg = LoopConfig { gate: GateConfig { gamma: 1.0 + 1e-9 }, ..quick() };
        let r = run_iteration(&manual, &auto, &test, &cfg, 1, None).unwrap();
        assert_eq!(r.record.gate_stats.amb_words, r.record.gate_stats.total_words);
        assert_eq!(r.record.auto_paragraphs_used, 0);
        assert_eq!(r.record.warnings.len(), 1);
        let manual_only = TrainConfig { seed: r.record.step3_seed, ..cfg.step3.clone() };
        let examples: Vec<TrainingExample> = manual.iter().map(TrainingExample::from_annotated).collect();
        assert_eq!(train(&examples, &manual_only, Some(r.step1_model.clone())).unwrap(), r.model);
    }

    #[test]
    fn one_record_per_iteration_and_manual_untouched() {
        let (manual, auto, test) = small();
        let out = run_loop(&manual, &auto, &test, &LoopConfig { iterations: 1, ..quick() }, None).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].iteration, 1);
        assert_eq!(out.annotations[0].len(), auto.len());
        assert!(out.annotations[0].iter().all(|p| p.confidence.is_some()));
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let (manual, auto, test) = small();
        let cfg = quick();
        let full = run_loop(&manual, &auto, &test, &cfg, None).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let one = LoopConfig { iterations: 1, ..cfg.clone() };
        run_loop(&manual, &auto, &test, &one, Some(dir.path())).unwrap();

        let resumed = run_loop(&manual, &auto, &test, &cfg, Some(dir.path())).unwrap();
        assert_eq!(resumed.resumed, 1);
        assert_eq!(resumed.final_model, full.final_model);
        assert_eq!(resumed.records[1].metrics, full.records[1].metrics);

        let again = run_loop(&manual, &auto, &test, &cfg, Some(dir.path())).unwrap();
        assert_eq!(again.resumed, 2);
        assert_eq!(again.final_model, full.final_model);

        let other_seed = LoopConfig { seed: 5, ..cfg };
        assert_eq!(run_loop(&manual, &auto, &test, &other_seed, Some(dir.path())).unwrap().resumed, 0);
    }
}
