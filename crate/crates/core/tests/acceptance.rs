//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sciner_core::autoannotate::{
    aggregate_word_probs, annotate_corpus, constrained_decode, gate_label, GateConfig, ProbSource, WordProbs,
};
use sciner_core::dataset::{AnnotatedParagraph, TrainingExample};
use sciner_core::eval::{bootstrap_compare, score};
use sciner_core::ingest::{
    hash_url, parse_bibtex, tokenize, write_catalog_csv, Clock, Downloader, Fetcher, PaperRecord, CATALOG_COLUMNS,
};
use sciner_core::selftrain::{run_loop, LoopConfig};
use sciner_core::synthetic::{generate, generate_unlabeled, SyntheticConfig};
use sciner_core::tag_schema::{validate_sequence, Label, NUM_CLASSES};
use sciner_core::tagger::{train, EncodedExample, TaggerModel, TokenProbs, TrainConfig};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_dist(rng: &mut ChaCha8Rng) -> [f64; NUM_CLASSES] {
    // Peaked distributions so products near the gate are exercised too.
    let sharp = rng.gen_range(0.5..20.0);
    let mut a = [0.0; NUM_CLASSES];
    for x in a.iter_mut() {
        *x = (rng.gen::<f64>() * sharp).exp();
    }
    let s: f64 = a.iter().sum();
    a.map(|x| x / s)
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=5);
        let pieces: Vec<TokenProbs> = (0..n).map(|_| TokenProbs(random_dist(&mut rng))).collect();
        let got = aggregate_word_probs(&pieces).unwrap();
        for c in 0..NUM_CLASSES {
            let mut brute = 1.0;
            for p in &pieces {
                brute *= p.0[c];
            }
            worst = worst.max((got.0[c] - brute).abs());
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(worst < 1e-12 && secs < 5.0, format!("max abs error {worst:.2e}, {secs:.2}s"))
}

fn criterion_2() -> Outcome {
    let cfg = GateConfig::default();
    let mut at = [0.0; NUM_CLASSES];
    at[6] = 0.98;
    let mut below = [0.0; NUM_CLASSES];
    below[6] = 0.98 - 1e-9;
    let boundary_ok = gate_label(&WordProbs(at), &cfg) == Label::from_index(6).unwrap()
        && gate_label(&WordProbs(below), &cfg) == Label::Amb;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = 0;
    for _ in 0..10_000 {
        let mut w = random_dist(&mut rng);
        if rng.gen_bool(0.3) {
            // Exact ties: the lowest index must win.
            let (i, j) = (rng.gen_range(0..NUM_CLASSES), rng.gen_range(0..NUM_CLASSES));
            w[j] = w[i];
        }
        let gamma = rng.gen_range(0.05..1.0);
        let label = gate_label(&WordProbs(w), &GateConfig::new(gamma).unwrap());
        let mut best = 0;
        for c in 1..NUM_CLASSES {
            if w[c] > w[best] {
                best = c;
            }
        }
        let expected = if w[best] >= gamma { Label::from_index(best).unwrap() } else { Label::Amb };
        if label != expected {
            bad += 1;
        }
    }
    outcome(boundary_ok && bad == 0, format!("boundary ok = {boundary_ok}, {bad} of 10000 random cases off the argmax"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    let mut explicit = 0;
    let mut words_total = 0;
    for _ in 0..10_000 {
        let len = rng.gen_range(1..40);
        let gamma = [0.0001, 0.3, 0.98][rng.gen_range(0..3)];
        let stream: Vec<WordProbs> = (0..len)
            .map(|_| {
                let pieces: Vec<TokenProbs> = (0..rng.gen_range(1..=3)).map(|_| TokenProbs(random_dist(&mut rng))).collect();
                aggregate_word_probs(&pieces).unwrap()
            })
            .collect();
        let labels = constrained_decode(&stream, &GateConfig { gamma });
        words_total += labels.len();
        violations += validate_sequence(&labels).len();
        for pair in labels.windows(2) {
            match (pair[0], pair[1]) {
                (Label::O, Label::I(_)) => explicit += 1,
                (Label::I(x), Label::I(y)) if x != y => explicit += 1,
                _ => {}
            }
        }
        if let Some(Label::I(_)) = labels.first() {
            explicit += 1;
        }
    }
    outcome(
        violations == 0 && explicit == 0,
        format!("{violations} violations, {explicit} O->I / I-X->I-Y / leading-I pairs over {words_total} words"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let corpus = generate(&SyntheticConfig { manual: 6, auto: 0, test: 0, ..Default::default() });
    let mut model = TaggerModel::new(10);
    let mut batch: Vec<EncodedExample> = corpus
        .manual
        .iter()
        .map(|p| model.encode(&TrainingExample::from_annotated(p)))
        .collect();
    // Mask a few positions so the masking path is covered too.
    for ex in &mut batch {
        for t in ex.targets.iter_mut() {
            if rng.gen_bool(0.1) {
                *t = None;
            }
        }
    }
    let mut features: Vec<u32> = batch.iter().flat_map(|e| e.features.iter().flatten().copied()).collect();
    features.sort_unstable();
    features.dedup();
    for &f in &features {
        for c in 0..NUM_CLASSES {
            model.set_weight(f, c, rng.gen_range(-0.5..0.5));
        }
    }
    let (_, grad) = model.loss_and_gradient(&batch);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let f = features[rng.gen_range(0..features.len())];
        let c = rng.gen_range(0..NUM_CLASSES);
        let w = model.weight(f, c);
        let mut plus = model.clone();
        plus.set_weight(f, c, w + h);
        let mut minus = model.clone();
        minus.set_weight(f, c, w - h);
        let numeric = (plus.loss(&batch) - minus.loss(&batch)) / (2.0 * h);
        let analytic = grad.get(&f).map_or(0.0, |g| g[c]);
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.2e} over 20 coordinates"))
}

/// Entity-token precision of the gated labels: among words given a non-O,
/// non-amb label, the share matching gold.
fn gated_precision(gold: &[AnnotatedParagraph], auto: &[AnnotatedParagraph]) -> f64 {
    score(gold, auto).unwrap().precision
}

fn criterion_5() -> Outcome {
    let started = Instant::now();
    let corpus = generate(&SyntheticConfig::default());
    let config = LoopConfig { seed: 2024, ..LoopConfig::default() };
    let out = run_loop(&corpus.manual, &corpus.auto_paragraphs(), &corpus.test, &config, None).unwrap();
    let secs = started.elapsed().as_secs_f64();

    let precisions: Vec<f64> = out.annotations.iter().map(|a| gated_precision(&corpus.auto, a)).collect();
    let baseline = out.records[0].step1_metrics.as_ref().unwrap().span_f1;
    let last = out.records.last().unwrap();
    let final_f1 = last.metrics.as_ref().unwrap().span_f1;
    let ambs: Vec<String> = out.records.iter().map(|r| format!("{:.3}", r.gate_stats.amb_fraction())).collect();

    let a = precisions.iter().all(|p| *p >= 0.90);
    let b = final_f1 >= baseline - 0.02;
    let c = secs < 600.0;
    outcome(
        a && b && c,
        format!(
            "(a) gated precision {:?} (b) span-F1 step1 {baseline:.4} -> final {final_f1:.4} (c) {secs:.1}s; amb fraction {}",
            precisions.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>(),
            ambs.join(" -> ")
        ),
    )
}

fn corrupt(gold: &[AnnotatedParagraph], rate: f64, seed: u64) -> Vec<AnnotatedParagraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gold.iter()
        .map(|p| {
            let mut q = p.clone();
            for l in q.labels.iter_mut() {
                if rng.gen_bool(rate) {
                    *l = Label::O;
                }
            }
            q
        })
        .collect()
}

fn criterion_6() -> Outcome {
    let gold = generate(&SyntheticConfig { manual: 0, auto: 0, test: 300, seed: 6, ..Default::default() }).test;
    let a = corrupt(&gold, 0.1, 1);
    let b = corrupt(&gold, 0.3, 2);
    let r1 = bootstrap_compare(&gold, &a, &b, 12, 50, 77).unwrap();
    let r2 = bootstrap_compare(&gold, &a, &b, 12, 50, 77).unwrap();
    let identical = r1 == r2
        && serde_json::to_string(&r1).unwrap() == serde_json::to_string(&r2).unwrap()
        && r1.draws == 12
        && r1.draw_size == 50;

    let full = bootstrap_compare(&gold, &a, &b, 12, 300, 77).unwrap();
    let (sa, sb) = (score(&gold, &a).unwrap(), score(&gold, &b).unwrap());
    let exact = full.per_draw_a.iter().all(|m| *m == sa) && full.per_draw_b.iter().all(|m| *m == sb);
    outcome(identical && exact, format!("same-seed identical = {identical}, full-size draws equal full score = {exact}"))
}

const PROCEEDINGS_BIB: &str = r#"@proceedings{proc-2023-sanskrit,
  title = "Proceedings of the Computational (S)anskrit (V6) Digital Humanities: Selected Papers",
  editor = "Mulkarni, Amba and
  Helliwig, Oliver",
  month = jan,
  year = "2023",
  address = "Canberra, Australia (Online mode)",
  publisher = "Association for Computational Linguistics",
  url = "https://aclanthology.org/2023-wsc-csdh.e",
  }
"#;

struct FlakyFetcher {
    calls: AtomicUsize,
    failing: std::collections::HashSet<String>,
}

impl Fetcher for FlakyFetcher {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if self.failing.contains(url) {
            Err("503 Service Unavailable".into())
        } else {
            Ok(format!("%PDF-1.4 {url}").into_bytes())
        }
    }
}

struct NoSleep;

impl Clock for NoSleep {
    fn sleep(&self, _: Duration) {}
}

fn criterion_7() -> Outcome {
    let mut notes = Vec::new();

    let parsed = parse_bibtex(PROCEEDINGS_BIB);
    let mut csv = Vec::new();
    write_catalog_csv(&parsed.records, &mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    let mut lines = csv.lines();
    let header_ok = lines.next() == Some(CATALOG_COLUMNS.join(",").as_str())
        && CATALOG_COLUMNS.join(",") == "Unnamed: 0,title,editor,month,year,address,publisher,url,author,booktitle,pages";
    let row = lines.next().unwrap_or_default();
    let expected_row = "0,Proceedings of the Computational (S)anskrit (V6) Digital Humanities: Selected Papers,\
\"Mulkarni, Amba and Helliwig, Oliver\",Jan,2023,\"Canberra, Australia (Online mode)\",\
Association for Computational Linguistics,https://aclanthology.org/2023-wsc-csdh.e,,,";
    let published_prefix = "0,Proceedings of the Computational (S)anskrit (V6) Digital Humanities: Selected";
    let row_ok = row == expected_row && row.starts_with(published_prefix) && parsed.records.len() == 1;
    notes.push(format!("csv header+row {}", if header_ok && row_ok { "match" } else { "DIFFER" }));

    let cases = [
        ("Proceedings of the Twenty-Fourth Conference", "Proceedings of the Twenty - Fourth Conference"),
        ("Speech Processing (ROCLING 2022) :", "Speech Processing ( ROCLING 2022 ) :"),
        ("(1) (2) 188-3,2", "( 1 ) ( 2 ) 188 - 3,2"),
    ];
    let tok_ok = cases.iter().all(|(input, want)| tokenize(input).join(" ") == *want);
    notes.push(format!("tokenizer {}", if tok_ok { "match" } else { "DIFFER" }));

    let sha_ok = hash_url("abc").unwrap() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        && hash_url("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq").unwrap()
            == "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1";
    notes.push(format!("sha256 {}", if sha_ok { "match" } else { "DIFFER" }));

    let records: Vec<PaperRecord> = (0..1000)
        .map(|i| PaperRecord::new(format!("Paper {i}"), format!("https://example.org/{i}.pdf")).unwrap())
        .collect();
    let failing = (0..12).map(|i| format!("https://example.org/{}.pdf", i * 83 + 5)).collect();
    let fetcher = Arc::new(FlakyFetcher { calls: AtomicUsize::new(0), failing });
    let dir = tempfile::tempdir().unwrap();
    let dl = Downloader::new(fetcher.clone()).clock(Arc::new(NoSleep)).max_attempts(2).parallelism(8);
    let manifest = dl.run(&records, dir.path(), None).unwrap();
    let first_calls = fetcher.calls.load(Ordering::SeqCst);
    let rerun = dl.run(&records, dir.path(), Some(&manifest)).unwrap();
    let rerun_calls = fetcher.calls.load(Ordering::SeqCst) - first_calls;
    let fetch_ok = manifest.success_percent() == "98.8%"
        && manifest.summary() == "988 of 1,000 (98.8%)"
        && first_calls == 988 + 12 * 2
        && rerun_calls == 12 * 2
        && rerun.ok_count() == 988;
    notes.push(format!("fetch {} ({} calls, rerun {})", manifest.summary(), first_calls, rerun_calls));

    outcome(header_ok && row_ok && tok_ok && sha_ok && fetch_ok, notes.join("; "))
}

fn criterion_8() -> Outcome {
    let corpus = generate(&SyntheticConfig { manual: 100, auto: 0, test: 0, ..Default::default() });
    let examples: Vec<TrainingExample> = corpus.manual.iter().map(TrainingExample::from_annotated).collect();
    let model = train(&examples, &TrainConfig::initial(), None).unwrap();
    let paragraphs = generate_unlabeled(86_000, 10, 8);
    let expected_words: usize = paragraphs.iter().map(|p| p.words.len()).sum();

    let started = Instant::now();
    let (annotated, stats) = annotate_corpus(ProbSource::Model(&model), &paragraphs, &GateConfig::default()).unwrap();
    let secs = started.elapsed().as_secs_f64();

    let counted: usize = stats.accepted.iter().sum::<usize>() + stats.amb_words;
    let labeled: usize = annotated.iter().map(|p| p.labels.len()).sum();
    let mut per_label: HashMap<Option<usize>, usize> = HashMap::new();
    for p in &annotated {
        for l in &p.labels {
            *per_label.entry(l.index()).or_default() += 1;
        }
    }
    let histogram_ok = (0..NUM_CLASSES).all(|c| per_label.get(&Some(c)).copied().unwrap_or(0) == stats.accepted[c])
        && per_label.get(&None).copied().unwrap_or(0) == stats.amb_words;
    let conserved = stats.total_words == expected_words && counted == expected_words && labeled == expected_words;
    let order_ok = annotated.len() == paragraphs.len()
        && annotated.iter().zip(&paragraphs).all(|(a, p)| a.paper_id == p.paper_id && a.paragraph_index == p.paragraph_index);
    outcome(
        conserved && histogram_ok && order_ok && stats.paragraphs == 86_000 && secs < 900.0,
        format!(
            "{} paragraphs, {} words, amb {:.2}%, {secs:.1}s with {} threads",
            stats.paragraphs,
            stats.total_words,
            100.0 * stats.amb_fraction(),
            rayon::current_num_threads()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 word aggregation matches brute-force product", criterion_1),
        ("2 confidence gate contract", criterion_2),
        ("3 constrained decoding obeys BIO rules", criterion_3),
        ("4 gradient matches finite differences", criterion_4),
        ("5 synthetic self-training benchmark", criterion_5),
        ("6 bootstrap determinism and full-size exactness", criterion_6),
        ("7 ingestion fidelity", criterion_7),
        ("8 scale smoke test", criterion_8),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let o = check();
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
