//! Annotated paragraphs, corpus categories, the manual train/test split and
//! the manual + auto merge used for retraining.
//!
//! Annotation file format (UTF-8, LF):
//!
//! ```text
//! # paper_id=<id> paragraph=<n> annotator=<name> provenance=<manual|auto>
//! word<TAB>label[<TAB>confidence]
//! ...
//! <blank line>
//! ```
//!
//! `annotator` and `provenance` are optional (default provenance is manual).
//! The confidence column is present exactly when provenance is auto.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{PaperRecord, TokenizedDocument};
use crate::tag_schema::{validate_sequence, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Manual,
    Auto,
    Unannotated,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Manual => "manual",
            Provenance::Auto => "auto",
            Provenance::Unannotated => "unannotated",
        })
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "manual" => Ok(Provenance::Manual),
            "auto" => Ok(Provenance::Auto),
            "unannotated" => Ok(Provenance::Unannotated),
            _ => Err(Error::argument(format!("unknown provenance `{s}`"))),
        }
    }
}

/// An unlabeled tokenized paragraph awaiting annotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paragraph {
    pub paper_id: String,
    pub paragraph_index: usize,
    pub words: Vec<String>,
}

impl Paragraph {
    pub fn from_documents(docs: &[TokenizedDocument]) -> Vec<Paragraph> {
        docs.iter()
            .flat_map(|d| {
                d.paragraphs.iter().enumerate().map(|(i, words)| Paragraph {
                    paper_id: d.paper_id.clone(),
                    paragraph_index: i,
                    words: words.clone(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedParagraph {
    pub paper_id: String,
    pub paragraph_index: usize,
    pub words: Vec<String>,
    pub labels: Vec<Label>,
    pub provenance: Provenance,
    pub annotator: Option<String>,
    /// Per-word gate score; present iff provenance is auto.
    pub confidence: Option<Vec<f64>>,
}

impl AnnotatedParagraph {
    pub fn manual(paper_id: impl Into<String>, paragraph_index: usize, words: Vec<String>, labels: Vec<Label>) -> Result<Self> {
        let p = AnnotatedParagraph {
            paper_id: paper_id.into(),
            paragraph_index,
            words,
            labels,
            provenance: Provenance::Manual,
            annotator: None,
            confidence: None,
        };
        p.check()?;
        Ok(p)
    }

    pub fn with_annotator(mut self, annotator: impl Into<String>) -> Self {
        self.annotator = Some(annotator.into());
        self
    }

    pub fn as_paragraph(&self) -> Paragraph {
        Paragraph {
            paper_id: self.paper_id.clone(),
            paragraph_index: self.paragraph_index,
            words: self.words.clone(),
        }
    }

    /// Enforce the stored-paragraph invariants.
    pub fn check(&self) -> Result<()> {
        if self.words.len() != self.labels.len() {
            return Err(Error::argument(format!(
                "{} words but {} labels",
                self.words.len(),
                self.labels.len()
            )));
        }
        if self.provenance == Provenance::Manual && self.labels.iter().any(|l| l.is_amb()) {
            return Err(Error::argument("manual annotations cannot contain `amb`"));
        }
        match (&self.confidence, self.provenance) {
            (Some(c), Provenance::Auto) => {
                if c.len() != self.words.len() {
                    return Err(Error::argument("confidence length differs from word count"));
                }
                if c.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(Error::argument("confidence outside [0, 1]"));
                }
            }
            (None, Provenance::Auto) => return Err(Error::argument("auto paragraph without confidence")),
            (Some(_), _) => return Err(Error::argument("confidence only allowed on auto paragraphs")),
            (None, _) => {}
        }
        if let Some(v) = validate_sequence(&self.labels).first() {
            return Err(Error::argument(format!("illegal transition at {v}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusPartition {
    pub manual: BTreeSet<String>,
    pub auto: BTreeSet<String>,
    pub unannotated: BTreeSet<String>,
}

impl CorpusPartition {
    pub fn category(&self, paper_id: &str) -> Option<Provenance> {
        if self.manual.contains(paper_id) {
            Some(Provenance::Manual)
        } else if self.auto.contains(paper_id) {
            Some(Provenance::Auto)
        } else if self.unannotated.contains(paper_id) {
            Some(Provenance::Unannotated)
        } else {
            None
        }
    }
}

/// Manual papers as given; ACL/EMNLP/NAACL papers from 2022 or 2023 go to
/// auto; everything else, including unparseable years, is unannotated.
pub fn partition_corpus(catalog: &[PaperRecord], manual_ids: &BTreeSet<String>) -> Result<CorpusPartition> {
    let known: HashSet<&str> = catalog.iter().map(|r| r.paper_id.as_str()).collect();
    if let Some(missing) = manual_ids.iter().find(|id| !known.contains(id.as_str())) {
        return Err(Error::argument(format!("manual paper id {missing} is not in the catalog")));
    }
    let mut partition = CorpusPartition {
        manual: manual_ids.clone(),
        ..Default::default()
    };
    for r in catalog {
        if manual_ids.contains(&r.paper_id) {
            continue;
        }
        let recent = matches!(r.year_value(), Some(2022 | 2023));
        if r.venue.is_target() && recent {
            partition.auto.insert(r.paper_id.clone());
        } else {
            partition.unannotated.insert(r.paper_id.clone());
        }
    }
    Ok(partition)
}

/// Hold out `held_out_per_annotator` whole papers per annotator, chosen by a
/// seeded shuffle. Paragraphs without an annotator are grouped together.
pub fn split_train_test(
    manual: &[AnnotatedParagraph],
    held_out_per_annotator: usize,
    seed: u64,
) -> Result<(Vec<AnnotatedParagraph>, Vec<AnnotatedParagraph>)> {
    let mut papers_by_annotator: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for p in manual {
        papers_by_annotator
            .entry(p.annotator.as_deref().unwrap_or(""))
            .or_default()
            .insert(p.paper_id.as_str());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_papers: HashSet<&str> = HashSet::new();
    for (annotator, papers) in &papers_by_annotator {
        if papers.len() <= held_out_per_annotator && held_out_per_annotator > 0 {
            return Err(Error::argument(format!(
                "annotator `{annotator}` has {} papers, need more than {held_out_per_annotator}",
                papers.len()
            )));
        }
        let mut papers: Vec<&str> = papers.iter().copied().collect();
        papers.shuffle(&mut rng);
        test_papers.extend(papers.into_iter().take(held_out_per_annotator));
    }
    let (test, train): (Vec<_>, Vec<_>) = manual
        .iter()
        .cloned()
        .partition(|p| test_papers.contains(p.paper_id.as_str()));
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbPolicy {
    /// Keep the paragraph; `amb` words stay as context but carry no loss.
    #[default]
    IgnorePositions,
    DropParagraph,
}

impl FromStr for AmbPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ignore_positions" => Ok(AmbPolicy::IgnorePositions),
            "drop_paragraph" => Ok(AmbPolicy::DropParagraph),
            _ => Err(Error::argument(format!("unknown amb policy `{s}`"))),
        }
    }
}

impl fmt::Display for AmbPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AmbPolicy::IgnorePositions => "ignore_positions",
            AmbPolicy::DropParagraph => "drop_paragraph",
        })
    }
}

/// A paragraph ready for training. `targets[i] = None` masks word `i` out of
/// the loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub words: Vec<String>,
    pub targets: Vec<Option<usize>>,
}

impl TrainingExample {
    pub fn from_annotated(p: &AnnotatedParagraph) -> Self {
        TrainingExample {
            words: p.words.clone(),
            targets: p.labels.iter().map(|l| l.index()).collect(),
        }
    }

    pub fn masked_positions(&self) -> usize {
        self.targets.iter().filter(|t| t.is_none()).count()
    }
}

/// Manual paragraphs first (unchanged), then auto paragraphs under the
/// chosen `amb` policy.
pub fn merge_for_retraining(manual: &[AnnotatedParagraph], auto: &[AnnotatedParagraph], policy: AmbPolicy) -> Vec<TrainingExample> {
    let manual = manual.iter().map(TrainingExample::from_annotated);
    let auto = auto
        .iter()
        .filter(|p| policy == AmbPolicy::IgnorePositions || !p.labels.iter().any(|l| l.is_amb()))
        .map(TrainingExample::from_annotated);
    manual.chain(auto).collect()
}

pub fn write_annotations<W: Write>(paragraphs: &[AnnotatedParagraph], mut sink: W) -> Result<()> {
    for (k, p) in paragraphs.iter().enumerate() {
        p.check()
            .map_err(|e| Error::argument(format!("paragraph {k} ({}): {e}", p.paper_id)))?;
        if p.words.iter().any(|w| w.is_empty() || w.contains(char::is_whitespace)) {
            return Err(Error::argument(format!("paragraph {k}: word contains whitespace")));
        }
        if p.paper_id.contains(char::is_whitespace) || p.annotator.as_deref().is_some_and(|a| a.contains(char::is_whitespace)) {
            return Err(Error::argument(format!("paragraph {k}: header value contains whitespace")));
        }
        write!(sink, "# paper_id={} paragraph={}", p.paper_id, p.paragraph_index)?;
        if let Some(a) = &p.annotator {
            write!(sink, " annotator={a}")?;
        }
        if p.provenance != Provenance::Manual {
            write!(sink, " provenance={}", p.provenance)?;
        }
        writeln!(sink)?;
        for (i, (w, l)) in p.words.iter().zip(&p.labels).enumerate() {
            match &p.confidence {
                Some(c) => writeln!(sink, "{w}\t{l}\t{:?}", c[i])?,
                None => writeln!(sink, "{w}\t{l}")?,
            }
        }
        writeln!(sink)?;
    }
    sink.flush()?;
    Ok(())
}

/// Parse an annotation file. `name` is used in diagnostics (`name:line`).
pub fn read_annotations<R: Read>(name: &str, source: R) -> Result<Vec<AnnotatedParagraph>> {
    let mut out = Vec::new();
    let mut current: Option<(usize, AnnotatedParagraph)> = None;

    let finish = |slot: &mut Option<(usize, AnnotatedParagraph)>, out: &mut Vec<AnnotatedParagraph>| -> Result<()> {
        if let Some((line, p)) = slot.take() {
            if let Some(v) = validate_sequence(&p.labels).first() {
                let at = format!("{name}:{}", line + v.position + 1);
                return Err(Error::format(at, format!("illegal transition at {v}")));
            }
            p.check().map_err(|e| Error::format(format!("{name}:{line}"), e.to_string()))?;
            out.push(p);
        }
        Ok(())
    };

    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let at = || format!("{name}:{lineno}");
        if line.is_empty() {
            finish(&mut current, &mut out)?;
            continue;
        }
        // words never contain spaces, so `# ` can only start a header
        if let Some(header) = line.strip_prefix("# ") {
            finish(&mut current, &mut out)?;
            current = Some((lineno, parse_header(header).map_err(|m| Error::format(at(), m))?));
            continue;
        }
        let Some((_, p)) = current.as_mut() else {
            return Err(Error::format(at(), "token line before any `# paper_id=` header"));
        };
        let cols: Vec<&str> = line.split('\t').collect();
        let expected = if p.provenance == Provenance::Auto { 3 } else { 2 };
        if cols.len() != expected {
            return Err(Error::format(at(), format!("expected {expected} tab-separated columns, found {}", cols.len())));
        }
        let label: Label = cols[1].parse().map_err(|e: Error| Error::format(at(), e.to_string()))?;
        p.words.push(cols[0].to_string());
        p.labels.push(label);
        if let Some(c) = p.confidence.as_mut() {
            let value: f64 = cols[2]
                .parse()
                .map_err(|_| Error::format(at(), format!("bad confidence `{}`", cols[2])))?;
            c.push(value);
        }
    }
    finish(&mut current, &mut out)?;
    Ok(out)
}

fn parse_header(header: &str) -> std::result::Result<AnnotatedParagraph, String> {
    let mut paper_id = None;
    let mut paragraph = None;
    let mut annotator = None;
    let mut provenance = Provenance::Manual;
    for kv in header.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("malformed header field `{kv}`"))?;
        match k {
            "paper_id" => paper_id = Some(v.to_string()),
            "paragraph" => paragraph = Some(v.parse::<usize>().map_err(|_| format!("bad paragraph index `{v}`"))?),
            "annotator" => annotator = Some(v.to_string()),
            "provenance" => provenance = v.parse().map_err(|e: Error| e.to_string())?,
            _ => return Err(format!("unknown header field `{k}`")),
        }
    }
    Ok(AnnotatedParagraph {
        paper_id: paper_id.ok_or("header missing paper_id")?,
        paragraph_index: paragraph.ok_or("header missing paragraph")?,
        words: Vec::new(),
        labels: Vec::new(),
        provenance,
        annotator,
        confidence: (provenance == Provenance::Auto).then(Vec::new),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::PaperRecord;
    use crate::tag_schema::{is_legal_transition, EntityType::*, NUM_CLASSES};
    use proptest::prelude::*;

    fn record(url: &str, year: &str) -> PaperRecord {
        let mut r = PaperRecord::new("t", url).unwrap();
        r.year = Some(year.into());
        r.refresh_derived().unwrap();
        r
    }

    #[test]
    fn partition_examples() {
        let acl = record("https://aclanthology.org/2022.acl-long.1", "2022");
        let old = record("https://aclanthology.org/2019.emnlp-main.1", "2019");
        let weird = record("https://aclanthology.org/2023.naacl-main.1", "n.d.");
        let catalog = vec![acl.clone(), old.clone(), weird.clone()];

        let p = partition_corpus(&catalog, &BTreeSet::new()).unwrap();
        assert_eq!(p.auto, BTreeSet::from([acl.paper_id.clone()]));
        assert!(p.unannotated.contains(&old.paper_id));
        assert!(p.unannotated.contains(&weird.paper_id));

        let p = partition_corpus(&catalog, &BTreeSet::from([acl.paper_id.clone()])).unwrap();
        assert_eq!(p.manual, BTreeSet::from([acl.paper_id.clone()]));
        assert!(p.auto.is_empty());

        let err = partition_corpus(&catalog, &BTreeSet::from(["nope".to_string()])).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    fn manual_corpus(counts: &[usize]) -> Vec<AnnotatedParagraph> {
        let mut out = Vec::new();
        for (a, &n) in counts.iter().enumerate() {
            for paper in 0..n {
                for para in 0..3 {
                    out.push(
                        AnnotatedParagraph::manual(format!("a{a}p{paper}"), para, vec!["w".into()], vec![Label::O])
                            .unwrap()
                            .with_annotator(format!("ann{a}")),
                    );
                }
            }
        }
        out
    }

    fn paper_count(ps: &[AnnotatedParagraph]) -> usize {
        ps.iter().map(|p| p.paper_id.as_str()).collect::<HashSet<_>>().len()
    }

    #[test]
    fn split_holds_out_two_papers_per_annotator() {
        let manual = manual_corpus(&[11, 12, 12]);
        let (train, test) = split_train_test(&manual, 2, 7).unwrap();
        assert_eq!(paper_count(&test), 6);
        assert_eq!(paper_count(&train), 29);
        let train_ids: HashSet<_> = train.iter().map(|p| &p.paper_id).collect();
        assert!(test.iter().all(|p| !train_ids.contains(&p.paper_id)));
        for a in 0..3 {
            let n = paper_count(
                &test.iter().filter(|p| p.annotator.as_deref() == Some(&format!("ann{a}"))).cloned().collect::<Vec<_>>(),
            );
            assert_eq!(n, 2);
        }
        assert_eq!(split_train_test(&manual, 2, 7).unwrap(), (train, test));
    }

    #[test]
    fn split_edge_cases() {
        let manual = manual_corpus(&[2, 5]);
        let (train, test) = split_train_test(&manual, 0, 1).unwrap();
        assert!(test.is_empty());
        assert_eq!(train.len(), manual.len());
        assert!(matches!(split_train_test(&manual, 2, 1), Err(Error::Argument(_))));
    }

    fn auto_paragraph(labels: Vec<Label>) -> AnnotatedParagraph {
        AnnotatedParagraph {
            paper_id: "x".into(),
            paragraph_index: 0,
            words: labels.iter().map(|_| "w".to_string()).collect(),
            confidence: Some(vec![0.5; labels.len()]),
            labels,
            provenance: Provenance::Auto,
            annotator: None,
        }
    }

    #[test]
    fn merge_policies() {
        assert!(merge_for_retraining(&[], &[], AmbPolicy::IgnorePositions).is_empty());
        let auto = auto_paragraph(vec![Label::B(TaskName), Label::Amb, Label::O]);
        let merged = merge_for_retraining(&[], std::slice::from_ref(&auto), AmbPolicy::IgnorePositions);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].masked_positions(), 1);
        assert_eq!(merged[0].targets, vec![Some(1 + TaskName.code()), None, Some(0)]);
        assert!(merge_for_retraining(&[], &[auto], AmbPolicy::DropParagraph).is_empty());
    }

    #[test]
    fn merge_keeps_manual_first() {
        let manual = manual_corpus(&[1]);
        let auto = auto_paragraph(vec![Label::O]);
        let merged = merge_for_retraining(&manual, &[auto], AmbPolicy::DropParagraph);
        assert_eq!(merged.len(), manual.len() + 1);
        assert_eq!(merged[..manual.len()], manual.iter().map(TrainingExample::from_annotated).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn read_simple_record() {
        let text = "# paper_id=p1 paragraph=0 annotator=alice\nSciNER\tB-TaskName\ntask\tI-TaskName\n\n";
        let ps = read_annotations("t.conll", text.as_bytes()).unwrap();
        assert_eq!(ps.len(), 1);
        assert_eq!(ps[0].labels, vec![Label::B(TaskName), Label::I(TaskName)]);
        assert_eq!(crate::tag_schema::spans_from_labels(&ps[0].labels).len(), 1);
        assert_eq!(ps[0].annotator.as_deref(), Some("alice"));
    }

    #[test]
    fn read_errors_carry_location() {
        let unknown = "# paper_id=p paragraph=0\nfoo\tI-Foo\n";
        let err = read_annotations("f.conll", unknown.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("f.conll:2"), "{err}");

        let illegal = "# paper_id=p paragraph=0\na\tO\nb\tI-TaskName\n";
        let err = read_annotations("f.conll", illegal.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("f.conll:3"), "{err}");

        let short = "# paper_id=p paragraph=0\na\n";
        assert!(read_annotations("f.conll", short.as_bytes()).is_err());

        let manual_amb = "# paper_id=p paragraph=0\na\tamb\n";
        assert!(read_annotations("f.conll", manual_amb.as_bytes()).is_err());
    }

    fn legal_labels(choices: Vec<usize>, amb_mask: Vec<bool>, allow_amb: bool) -> Vec<Label> {
        let mut out: Vec<Label> = Vec::new();
        for (c, amb) in choices.into_iter().zip(amb_mask) {
            if allow_amb && amb {
                out.push(Label::Amb);
                continue;
            }
            let prev = out.last().copied();
            let legal: Vec<Label> = Label::classes().filter(|&l| is_legal_transition(prev, l)).collect();
            out.push(legal[c % legal.len()]);
        }
        out
    }

    fn paragraph_strategy() -> impl Strategy<Value = AnnotatedParagraph> {
        (
            "[a-f0-9]{8}",
            0usize..50,
            proptest::collection::vec((0..NUM_CLASSES, proptest::bool::weighted(0.15), "[^\\s]{1,6}", 0.0f64..=1.0), 1..15),
            proptest::bool::ANY,
            proptest::option::of("[a-z]{1,6}"),
        )
            .prop_map(|(paper_id, idx, words, auto, annotator)| {
                let labels = legal_labels(
                    words.iter().map(|w| w.0).collect(),
                    words.iter().map(|w| w.1).collect(),
                    auto,
                );
                AnnotatedParagraph {
                    paper_id,
                    paragraph_index: idx,
                    words: words.iter().map(|w| w.2.clone()).collect(),
                    labels,
                    provenance: if auto { Provenance::Auto } else { Provenance::Manual },
                    annotator,
                    confidence: auto.then(|| words.iter().map(|w| w.3).collect()),
                }
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn annotation_round_trip(ps in proptest::collection::vec(paragraph_strategy(), 0..4)) {
            let mut buf = Vec::new();
            write_annotations(&ps, &mut buf).unwrap();
            prop_assert_eq!(read_annotations("rt", buf.as_slice()).unwrap(), ps);
        }

        #[test]
        fn merge_never_changes_non_amb_labels(p in paragraph_strategy()) {
            let merged = merge_for_retraining(&[], std::slice::from_ref(&p), AmbPolicy::IgnorePositions);
            prop_assert_eq!(merged.len(), 1);
            for (l, t) in p.labels.iter().zip(&merged[0].targets) {
                prop_assert_eq!(l.index(), *t);
            }
        }

        #[test]
        fn partition_is_disjoint_and_covering(
            specs in proptest::collection::vec((0usize..4, 2018u32..2025, proptest::bool::weighted(0.2)), 0..30)
        ) {
            let venues = ["acl-long", "emnlp-main", "naacl-main", "wsc"];
            let catalog: Vec<PaperRecord> = specs
                .iter()
                .enumerate()
                .map(|(i, (v, y, _))| record(&format!("https://aclanthology.org/{y}.{}.{i}", venues[*v]), &y.to_string()))
                .collect();
            let manual: BTreeSet<String> = catalog
                .iter()
                .zip(&specs)
                .filter(|(_, s)| s.2)
                .map(|(r, _)| r.paper_id.clone())
                .collect();
            let p = partition_corpus(&catalog, &manual).unwrap();
            prop_assert!(p.manual.is_disjoint(&p.auto));
            prop_assert!(p.manual.is_disjoint(&p.unannotated));
            prop_assert!(p.auto.is_disjoint(&p.unannotated));
            prop_assert_eq!(p.manual.len() + p.auto.len() + p.unannotated.len(), catalog.len());
        }
    }
}
