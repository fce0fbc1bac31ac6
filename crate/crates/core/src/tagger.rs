//! Token-level probability source: a hashed-feature softmax classifier over
//! fixed-width subword pieces, plus a reader for externally computed
//! probabilities (e.g. a transformer's per-token outputs).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hasher;
use std::io::{BufRead, BufReader, Read, Write};

use fnv::{FnvBuildHasher, FnvHasher};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::TrainingExample;
use crate::error::{Error, Result};
use crate::tag_schema::NUM_CLASSES;

/// Maximum characters per subword piece.
pub const PIECE_CHARS: usize = 4;
pub const CONTINUATION_MARKER: &str = "##";
pub const DEFAULT_FEATURE_BITS: u32 = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordToken {
    /// Piece text; pieces after the first carry the `##` marker.
    pub text: String,
    pub word_index: usize,
    pub subword_index: usize,
}

impl SubwordToken {
    pub fn is_continuation(&self) -> bool {
        self.subword_index > 0
    }

    /// Piece text without the continuation marker.
    pub fn surface(&self) -> &str {
        if self.is_continuation() {
            &self.text[CONTINUATION_MARKER.len()..]
        } else {
            &self.text
        }
    }
}

/// Cut `word` into pieces of at most four characters, left to right.
pub fn segment_word(word: &str, word_index: usize) -> Vec<SubwordToken> {
    let chars: Vec<char> = word.chars().collect();
    if chars.is_empty() {
        return vec![SubwordToken { text: String::new(), word_index, subword_index: 0 }];
    }
    chars
        .chunks(PIECE_CHARS)
        .enumerate()
        .map(|(k, piece)| {
            let mut text = String::with_capacity(piece.len() + 2);
            if k > 0 {
                text.push_str(CONTINUATION_MARKER);
            }
            text.extend(piece);
            SubwordToken { text, word_index, subword_index: k }
        })
        .collect()
}

pub fn segment_paragraph<S: AsRef<str>>(words: &[S]) -> Vec<SubwordToken> {
    words
        .iter()
        .enumerate()
        .flat_map(|(i, w)| segment_word(w.as_ref(), i))
        .collect()
}

/// A probability distribution over the 15 classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenProbs(pub [f64; NUM_CLASSES]);

impl TokenProbs {
    pub fn uniform() -> Self {
        TokenProbs([1.0 / NUM_CLASSES as f64; NUM_CLASSES])
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// One subword's distribution, positioned in its paragraph.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordProbs {
    pub word_index: usize,
    pub subword_index: usize,
    pub probs: TokenProbs,
}

fn word_shape(word: &str) -> String {
    word.chars()
        .map(|c| {
            if c.is_uppercase() {
                'X'
            } else if c.is_lowercase() {
                'x'
            } else if c.is_ascii_digit() {
                'd'
            } else {
                c
            }
        })
        .collect()
}

fn short_shape(shape: &str) -> String {
    let mut out = String::new();
    for c in shape.chars() {
        if !out.ends_with(c) {
            out.push(c);
        }
    }
    out
}

fn hash_parts(parts: &[&str]) -> u64 {
    let mut h = FnvHasher::default();
    for p in parts {
        h.write(p.as_bytes());
        h.write_u8(0xff);
    }
    h.finish()
}

/// Sparse binary features for one subword in its paragraph, hashed into
/// `[0, 2^bits)`. Sorted, no duplicates.
pub fn featurize<S: AsRef<str>>(subword: &SubwordToken, words: &[S], bits: u32) -> Vec<u32> {
    let mask = (1u64 << bits) - 1;
    let word = words[subword.word_index].as_ref();
    let lower = word.to_lowercase();
    let shape = word_shape(word);
    let chars: Vec<char> = word.chars().collect();
    let mut keys: Vec<u64> = Vec::with_capacity(24);

    keys.push(hash_parts(&["bias"]));
    keys.push(hash_parts(&["sw", &subword.text]));
    keys.push(hash_parts(&["w", word]));
    keys.push(hash_parts(&["lw", &lower]));
    keys.push(hash_parts(&["shape", &shape]));
    keys.push(hash_parts(&["sshape", &short_shape(&shape)]));
    for n in 1..=3.min(chars.len()) {
        let prefix: String = chars[..n].iter().collect();
        let suffix: String = chars[chars.len() - n..].iter().collect();
        keys.push(hash_parts(&["pre", &prefix]));
        keys.push(hash_parts(&["suf", &suffix]));
    }
    for offset in [-2i64, -1, 1, 2] {
        let j = subword.word_index as i64 + offset;
        let neighbor = if j < 0 {
            "<s>".to_string()
        } else if j as usize >= words.len() {
            "</s>".to_string()
        } else {
            words[j as usize].as_ref().to_lowercase()
        };
        let tag = offset.to_string();
        keys.push(hash_parts(&["ctx", &tag, &neighbor]));
    }
    let position = if subword.is_continuation() { "cont" } else { "first" };
    keys.push(hash_parts(&["pos", position]));
    keys.push(hash_parts(&["pos-lw", position, &lower]));

    let mut out: Vec<u32> = keys.into_iter().map(|k| (k & mask) as u32).collect();
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

/// Step size used by the defaults.
pub const DEFAULT_LEARNING_RATE: f64 = 0.1;

impl TrainConfig {
    /// Training on manual data: 20 epochs, batch size 8.
    pub fn initial() -> Self {
        TrainConfig { epochs: 20, learning_rate: DEFAULT_LEARNING_RATE, batch_size: 8, seed: 0 }
    }

    /// Retraining on manual + auto data: 5 epochs, batch size 8.
    pub fn retrain() -> Self {
        TrainConfig { epochs: 5, ..Self::initial() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::argument("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::argument("learning rate must be positive and finite"));
        }
        if self.batch_size < 1 {
            return Err(Error::argument("batch size must be at least 1"));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::initial()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    /// Epochs summed over every training run on this model.
    pub epochs_run: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Mean per-paragraph loss of each epoch of the latest run.
    pub epoch_losses: Vec<f64>,
}

type WeightMap = HashMap<u32, [f64; NUM_CLASSES], FnvBuildHasher>;

/// A paragraph's features and per-subword targets.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub features: Vec<Vec<u32>>,
    pub targets: Vec<Option<usize>>,
}

/// Multinomial logistic regression over hashed features.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    bits: u32,
    weights: WeightMap,
    pub meta: TrainingMeta,
}

pub const MODEL_MAGIC: &str = "sciner-tagger";
pub const MODEL_VERSION: u32 = 1;

impl TaggerModel {
    pub fn new(bits: u32) -> Self {
        assert!((1..=31).contains(&bits), "feature bits must be in 1..=31");
        TaggerModel { bits, weights: WeightMap::default(), meta: TrainingMeta::default() }
    }

    pub fn feature_bits(&self) -> u32 {
        self.bits
    }

    pub fn weight(&self, feature: u32, class: usize) -> f64 {
        self.weights.get(&feature).map_or(0.0, |w| w[class])
    }

    pub fn set_weight(&mut self, feature: u32, class: usize, value: f64) {
        self.weights.entry(feature).or_insert([0.0; NUM_CLASSES])[class] = value;
    }

    /// Number of features with a stored weight row.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.values().all(|row| row.iter().all(|w| w.is_finite()))
    }

    pub fn encode(&self, example: &TrainingExample) -> EncodedExample {
        let subwords = segment_paragraph(&example.words);
        EncodedExample {
            features: subwords.iter().map(|s| featurize(s, &example.words, self.bits)).collect(),
            targets: subwords.iter().map(|s| example.targets[s.word_index]).collect(),
        }
    }

    fn scores(&self, features: &[u32]) -> [f64; NUM_CLASSES] {
        let mut s = [0.0; NUM_CLASSES];
        for f in features {
            if let Some(row) = self.weights.get(f) {
                for (acc, w) in s.iter_mut().zip(row) {
                    *acc += w;
                }
            }
        }
        s
    }

    pub fn probs_for_features(&self, features: &[u32]) -> TokenProbs {
        TokenProbs(softmax(self.scores(features)))
    }

    /// Softmax distribution for every subword of the paragraph, in order.
    pub fn predict_probs<S: AsRef<str>>(&self, words: &[S]) -> Vec<SubwordProbs> {
        segment_paragraph(words)
            .iter()
            .map(|s| SubwordProbs {
                word_index: s.word_index,
                subword_index: s.subword_index,
                probs: self.probs_for_features(&featurize(s, words, self.bits)),
            })
            .collect()
    }

    /// Summed cross-entropy over unmasked subwords divided by the number of
    /// paragraphs in the batch, and its gradient.
    pub fn loss_and_gradient(&self, batch: &[EncodedExample]) -> (f64, HashMap<u32, [f64; NUM_CLASSES], FnvBuildHasher>) {
        self.batch_loss_and_gradient(batch.iter())
    }

    fn batch_loss_and_gradient<'a, I>(&self, batch: I) -> (f64, WeightMap)
    where
        I: ExactSizeIterator<Item = &'a EncodedExample>,
    {
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut loss = 0.0;
        let mut grad = WeightMap::default();
        for ex in batch {
            for (features, target) in ex.features.iter().zip(&ex.targets) {
                let Some(target) = *target else { continue };
                let p = softmax(self.scores(features));
                loss -= p[target].max(f64::MIN_POSITIVE).ln() * scale;
                let mut delta = p;
                delta[target] -= 1.0;
                for f in features {
                    let row = grad.entry(*f).or_insert([0.0; NUM_CLASSES]);
                    for (g, d) in row.iter_mut().zip(&delta) {
                        *g += d * scale;
                    }
                }
            }
        }
        (loss, grad)
    }

    pub fn loss(&self, batch: &[EncodedExample]) -> f64 {
        self.loss_and_gradient(batch).0
    }

    pub fn write<W: Write>(&self, mut sink: W) -> Result<()> {
        let m = &self.meta;
        writeln!(sink, "{MODEL_MAGIC} {MODEL_VERSION}")?;
        writeln!(sink, "feature_bits {}", self.bits)?;
        writeln!(sink, "epochs_run {}", m.epochs_run)?;
        writeln!(sink, "learning_rate {:?}", m.learning_rate)?;
        writeln!(sink, "batch_size {}", m.batch_size)?;
        writeln!(sink, "seed {}", m.seed)?;
        let losses: Vec<String> = m.epoch_losses.iter().map(|l| format!("{l:?}")).collect();
        writeln!(sink, "epoch_losses {}", losses.join(" ").trim())?;
        let mut ids: Vec<&u32> = self.weights.keys().collect();
        ids.sort_unstable();
        writeln!(sink, "weights {}", ids.len())?;
        let mut line = String::new();
        for id in ids {
            line.clear();
            write!(line, "{id}").unwrap();
            for w in &self.weights[id] {
                write!(line, " {w:?}").unwrap();
            }
            writeln!(sink, "{line}")?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(source: R) -> Result<Self> {
        let mut lines = BufReader::new(source).lines().enumerate();
        let mut next = |key: &str| -> Result<(usize, String)> {
            let (i, line) = lines
                .next()
                .ok_or_else(|| Error::format("model", format!("unexpected end of file, expected `{key}`")))?;
            let line = line?;
            let rest = line
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' ').or(r.is_empty().then_some("")))
                .ok_or_else(|| Error::format(format!("model line {}", i + 1), format!("expected `{key}`")))?;
            Ok((i + 1, rest.to_string()))
        };
        fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
            s.trim()
                .parse()
                .map_err(|_| Error::format(format!("model line {line}"), format!("bad number `{s}`")))
        }

        let (l, version) = next(MODEL_MAGIC)?;
        if num::<u32>(l, &version)? != MODEL_VERSION {
            return Err(Error::format("model line 1", format!("unsupported model version {version}")));
        }
        let (l, bits) = next("feature_bits")?;
        let bits: u32 = num(l, &bits)?;
        if !(1..=31).contains(&bits) {
            return Err(Error::format(format!("model line {l}"), "feature_bits out of range"));
        }
        let mut model = TaggerModel::new(bits);
        let (l, v) = next("epochs_run")?;
        model.meta.epochs_run = num(l, &v)?;
        let (l, v) = next("learning_rate")?;
        model.meta.learning_rate = num(l, &v)?;
        let (l, v) = next("batch_size")?;
        model.meta.batch_size = num(l, &v)?;
        let (l, v) = next("seed")?;
        model.meta.seed = num(l, &v)?;
        let (l, v) = next("epoch_losses")?;
        model.meta.epoch_losses = v.split_whitespace().map(|x| num(l, x)).collect::<Result<_>>()?;
        let (l, v) = next("weights")?;
        let count: usize = num(l, &v)?;
        for _ in 0..count {
            let (line_no, line) = lines
                .next()
                .ok_or_else(|| Error::format("model", "truncated weight table"))?;
            let line = line?;
            let mut parts = line.split(' ');
            let id: u32 = num(line_no + 1, parts.next().unwrap_or(""))?;
            let mut row = [0.0f64; NUM_CLASSES];
            for slot in row.iter_mut() {
                *slot = num(line_no + 1, parts.next().unwrap_or(""))?;
            }
            if parts.next().is_some() || id as u64 >= 1u64 << bits {
                return Err(Error::format(format!("model line {}", line_no + 1), "malformed weight row"));
            }
            if row.iter().any(|w| !w.is_finite()) {
                return Err(Error::format(format!("model line {}", line_no + 1), "non-finite weight"));
            }
            model.weights.insert(id, row);
        }
        Ok(model)
    }
}

pub fn softmax(scores: [f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = scores.map(|s| (s - max).exp());
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// Mini-batch gradient descent with a fixed step on the masked cross-entropy.
/// Paragraph order is reshuffled every epoch from `config.seed`.
pub fn train(data: &[TrainingExample], config: &TrainConfig, init: Option<TaggerModel>) -> Result<TaggerModel> {
    config.validate()?;
    let mut model = init.unwrap_or_else(|| TaggerModel::new(DEFAULT_FEATURE_BITS));
    if !model.is_finite() {
        return Err(Error::argument("initial model has non-finite weights"));
    }
    for (i, ex) in data.iter().enumerate() {
        if ex.words.len() != ex.targets.len() {
            return Err(Error::argument(format!("example {i}: words and targets differ in length")));
        }
        if ex.targets.iter().flatten().any(|&t| t >= NUM_CLASSES) {
            return Err(Error::argument(format!("example {i}: target class out of range")));
        }
    }
    let encoded: Vec<EncodedExample> = data
        .iter()
        .map(|ex| model.encode(ex))
        .filter(|e| e.targets.iter().any(Option::is_some))
        .collect();
    if encoded.is_empty() {
        return Err(Error::argument("no unmasked training targets"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (loss, grad) = model.batch_loss_and_gradient(chunk.iter().map(|&i| &encoded[i]));
            epoch_loss += loss * chunk.len() as f64;
            for (f, g) in grad {
                let row = model.weights.entry(f).or_insert([0.0; NUM_CLASSES]);
                for (w, d) in row.iter_mut().zip(g) {
                    *w -= config.learning_rate * d;
                }
            }
        }
        epoch_losses.push(epoch_loss / encoded.len() as f64);
    }

    model.meta = TrainingMeta {
        epochs_run: model.meta.epochs_run + config.epochs,
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        seed: config.seed,
        epoch_losses,
    };
    Ok(model)
}

/// One line of an external probability file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalProbRecord {
    pub paper_id: String,
    pub paragraph: usize,
    pub word_index: usize,
    pub subword_index: usize,
    pub probs: Vec<f64>,
}

/// Largest accepted deviation of a distribution's sum from 1.
pub const EXTERNAL_SUM_TOLERANCE: f64 = 1e-6;

/// Read JSON-lines probability records. Distributions within 1e-6 of summing
/// to one are renormalized; anything else is rejected.
pub fn load_external_probs<R: Read>(source: R) -> Result<Vec<ExternalProbRecord>> {
    let mut out: Vec<ExternalProbRecord> = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let at = || format!("record {}", i + 1);
        let mut rec: ExternalProbRecord =
            serde_json::from_str(&line).map_err(|e| Error::format(at(), e.to_string()))?;
        if rec.probs.len() != NUM_CLASSES {
            return Err(Error::format(at(), format!("expected {NUM_CLASSES} probabilities, found {}", rec.probs.len())));
        }
        if rec.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::format(at(), "negative or non-finite probability"));
        }
        let sum: f64 = rec.probs.iter().sum();
        if (sum - 1.0).abs() > EXTERNAL_SUM_TOLERANCE {
            return Err(Error::format(at(), format!("probabilities sum to {sum}")));
        }
        for p in &mut rec.probs {
            *p /= sum;
        }
        if let Some(prev) = out.last() {
            let same_paper = prev.paper_id == rec.paper_id;
            let key = (rec.paragraph, rec.word_index, rec.subword_index);
            let prev_key = (prev.paragraph, prev.word_index, prev.subword_index);
            if same_paper && key <= prev_key {
                return Err(Error::format(at(), "records out of (paragraph, word_index, subword_index) order"));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

impl ExternalProbRecord {
    pub fn token_probs(&self) -> TokenProbs {
        let mut a = [0.0; NUM_CLASSES];
        a.copy_from_slice(&self.probs);
        TokenProbs(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(s: &str) -> Vec<String> {
        s.split(' ').map(str::to_string).collect()
    }

    #[test]
    fn segmentation_widths() {
        assert_eq!(segment_word("BERT", 0).len(), 1);
        let pieces = segment_word("Hyperparameter", 3);
        let sizes: Vec<usize> = pieces.iter().map(|p| p.surface().chars().count()).collect();
        assert_eq!(sizes, [4, 4, 4, 2]);
        assert_eq!(pieces[1].text, "##rpar");
        assert!(pieces.iter().all(|p| p.word_index == 3));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn pieces_reconstruct_word(w in "[^\\s]{1,30}") {
            let pieces = segment_word(&w, 0);
            prop_assert!(!pieces.is_empty());
            let joined: String = pieces.iter().map(|p| p.surface()).collect();
            prop_assert_eq!(joined, w);
        }
    }

    #[test]
    fn features_are_deterministic() {
        let ws = words("We train on 2022 data");
        let subs = segment_paragraph(&ws);
        let sub = subs.iter().find(|s| s.word_index == 3).unwrap();
        assert_eq!(featurize(sub, &ws, 20), featurize(sub, &ws, 20));
        assert_eq!(word_shape("2022"), "dddd");
        let shape_feature = (hash_parts(&["shape", "dddd"]) & ((1 << 20) - 1)) as u32;
        assert!(featurize(sub, &ws, 20).contains(&shape_feature));
    }

    #[test]
    fn context_changes_features() {
        let a = words("we use BERT for tagging");
        let b = words("they fine-tune BERT on parsing");
        let fa = featurize(&segment_word("BERT", 2)[0], &a, 20);
        let fb = featurize(&segment_word("BERT", 2)[0], &b, 20);
        assert_ne!(fa, fb);
        let shared = fa.iter().filter(|f| fb.contains(f)).count();
        assert!(shared > 0 && shared < fa.len());
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = TaggerModel::new(16);
        let out = m.predict_probs(&words("a longerword here"));
        assert_eq!(out.len(), 1 + 3 + 1);
        for sp in out {
            for p in sp.probs.0 {
                assert!((p - 1.0 / 15.0).abs() < 1e-15);
            }
        }
        assert!(m.predict_probs::<String>(&[]).is_empty());
    }

    #[test]
    fn raising_a_weight_raises_its_class() {
        let ws = words("the SQuAD dataset");
        let mut m = TaggerModel::new(16);
        let sub = &segment_paragraph(&ws)[1];
        let feats = featurize(sub, &ws, 16);
        let before = m.probs_for_features(&feats).0[3];
        m.set_weight(feats[0], 3, 0.5);
        let after = m.probs_for_features(&feats).0[3];
        assert!(after > before);
    }

    #[test]
    fn config_validation() {
        let ex = TrainingExample { words: words("a"), targets: vec![Some(0)] };
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::initial() };
        assert!(matches!(train(std::slice::from_ref(&ex), &cfg, None), Err(Error::Argument(_))));
        let masked = TrainingExample { words: words("a"), targets: vec![None] };
        assert!(matches!(train(&[masked], &TrainConfig::initial(), None), Err(Error::Argument(_))));
        assert!(matches!(train(&[], &TrainConfig::initial(), None), Err(Error::Argument(_))));
    }

    #[test]
    fn masked_positions_have_no_gradient() {
        let m = TaggerModel::new(12);
        let ex = TrainingExample { words: words("alpha beta"), targets: vec![Some(1), None] };
        let enc = m.encode(&ex);
        let (_, grad) = m.loss_and_gradient(std::slice::from_ref(&enc));
        let last = enc.features.len() - 1;
        assert_eq!(enc.targets[last], None);
        let only_beta: Vec<u32> = enc.features[last]
            .iter()
            .copied()
            .filter(|f| !enc.features[..last].iter().any(|fs| fs.contains(f)))
            .collect();
        assert!(!only_beta.is_empty());
        for f in only_beta {
            assert!(!grad.contains_key(&f));
        }
    }

    #[test]
    fn model_file_round_trip() {
        let data = vec![
            TrainingExample { words: words("we use BERT"), targets: vec![Some(0), Some(0), Some(1)] },
            TrainingExample { words: words("on SQuAD today"), targets: vec![Some(0), Some(3), Some(0)] },
        ];
        let cfg = TrainConfig { epochs: 3, learning_rate: 0.5, batch_size: 1, seed: 9 };
        let m = train(&data, &cfg, Some(TaggerModel::new(18))).unwrap();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let back = TaggerModel::read(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        let ws = words("we use SQuAD");
        assert_eq!(back.predict_probs(&ws), m.predict_probs(&ws));
        assert!(TaggerModel::read("sciner-tagger 2\n".as_bytes()).is_err());
    }

    #[test]
    fn external_probs() {
        let mut p = vec![0.0; 15];
        p[0] = 1.0;
        let line = |w: usize, probs: &[f64]| {
            serde_json::to_string(&ExternalProbRecord {
                paper_id: "x".into(),
                paragraph: 0,
                word_index: w,
                subword_index: 0,
                probs: probs.to_vec(),
            })
            .unwrap()
        };
        let text = format!("{}\n{}\n", line(0, &p), line(1, &p));
        assert_eq!(load_external_probs(text.as_bytes()).unwrap().len(), 2);

        let short = format!("{}\n", line(0, &p[..14]));
        let err = load_external_probs(short.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("record 1"));

        let mut near = p.clone();
        near[0] = 1.0 + 5e-7;
        let rec = &load_external_probs(format!("{}\n", line(0, &near)).as_bytes()).unwrap()[0];
        assert!((rec.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let mut far = p.clone();
        far[0] = 1.0 + 2e-6;
        assert!(load_external_probs(format!("{}\n", line(0, &far)).as_bytes()).is_err());

        let mut neg = p.clone();
        neg[1] = -0.1;
        neg[0] = 1.1;
        assert!(load_external_probs(format!("{}\n", line(0, &neg)).as_bytes()).is_err());

        let unordered = format!("{}\n{}\n", line(1, &p), line(0, &p));
        assert!(load_external_probs(unordered.as_bytes()).is_err());
    }
}
