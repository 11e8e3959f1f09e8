//! Data model for multi-source text corpora: JSONL ingestion, quality
//! metadata, stratified splitting, and a synthetic corpus generator with
//! controllable cross-source heterogeneity.
//!
//! A corpus file is JSON Lines. The first line is a header declaring the
//! number of sources `k`, the number of topics `c`, and the metadata
//! dimension `dm`; every following line is one document record:
//!
//! ```text
//! {"k":3,"c":3,"dm":4}
//! {"src":0,"text":"...","ts":1700000000,"meta":[0.1,0.2,0.3,0.4],"topic":1,"sent":"pos"}
//! ```
//!
//! Missing metadata entries are stored as `null` and surface in memory as
//! `NaN`; the quality vector's completeness component counts the finite
//! entries. Optional `asr` and `vis` fields carry extra modalities.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CrafError, Result};
use crate::rng::rng_for;
use crate::text::tokenize;

/// Three-class sentiment label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sentiment {
    #[serde(rename = "pos")]
    Positive,
    #[serde(rename = "neu")]
    Neutral,
    #[serde(rename = "neg")]
    Negative,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Positive, Sentiment::Neutral, Sentiment::Negative];

    /// Dense class index used by the sentiment head.
    pub fn index(self) -> usize {
        match self {
            Sentiment::Positive => 0,
            Sentiment::Neutral => 1,
            Sentiment::Negative => 2,
        }
    }

    pub fn from_index(i: usize) -> Sentiment {
        Self::ALL[i]
    }
}

mod meta_serde {
    //! Metadata entries round-trip NaN (missing) as JSON `null`.
    use serde::de::{SeqAccess, Visitor};
    use serde::ser::SerializeSeq;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            if x.is_finite() {
                seq.serialize_element(x)?;
            } else {
                seq.serialize_element(&Option::<f64>::None)?;
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Vec<f64>;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("array of numbers or nulls")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some(x) = seq.next_element::<Option<f64>>()? {
                    out.push(x.unwrap_or(f64::NAN));
                }
                Ok(out)
            }
        }
        d.deserialize_seq(V)
    }
}

/// One text instance from one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    #[serde(rename = "src")]
    pub source_id: usize,
    pub text: String,
    #[serde(rename = "ts")]
    pub timestamp: i64,
    #[serde(rename = "meta", with = "meta_serde")]
    pub metadata: Vec<f64>,
    #[serde(rename = "topic")]
    pub topic_label: Option<usize>,
    #[serde(rename = "sent")]
    pub sentiment_label: Option<Sentiment>,
    /// Audio-transcript modality, when present.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub asr: Option<String>,
    /// Visual frame-feature modality, when present.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vis: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct Header {
    k: usize,
    c: usize,
    dm: usize,
}

/// A collection of documents spanning `num_sources` heterogeneous sources.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub num_sources: usize,
    pub num_topics: usize,
    pub metadata_dim: usize,
}

impl Corpus {
    pub fn new(num_sources: usize, num_topics: usize, metadata_dim: usize) -> Self {
        Self { documents: Vec::new(), num_sources, num_topics, metadata_dim }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Checks structural invariants: source ids in range, labels in range,
    /// metadata dimension consistent, and at least one document per source.
    pub fn validate(&self) -> Result<()> {
        if self.num_sources == 0 {
            return Err(CrafError::Schema("corpus declares zero sources".into()));
        }
        let mut seen = vec![false; self.num_sources];
        for (i, doc) in self.documents.iter().enumerate() {
            if doc.source_id >= self.num_sources {
                return Err(CrafError::Schema(format!(
                    "document {i}: source_id {} out of range (K={})",
                    doc.source_id, self.num_sources
                )));
            }
            seen[doc.source_id] = true;
            if doc.metadata.len() != self.metadata_dim {
                return Err(CrafError::Schema(format!(
                    "document {i}: metadata dimension {} != declared {}",
                    doc.metadata.len(),
                    self.metadata_dim
                )));
            }
            if let Some(t) = doc.topic_label {
                if t >= self.num_topics {
                    return Err(CrafError::Schema(format!(
                        "document {i}: topic label {t} out of range (C={})",
                        self.num_topics
                    )));
                }
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(CrafError::Schema(format!("source {k} has no documents")));
        }
        Ok(())
    }

    /// Documents of a single source, by index into `documents`.
    pub fn source_indices(&self, source: usize) -> Vec<usize> {
        self.documents
            .iter()
            .enumerate()
            .filter(|(_, d)| d.source_id == source)
            .map(|(i, _)| i)
            .collect()
    }

    /// Keeps only documents from the listed sources (ids unchanged).
    pub fn filter_sources(&self, sources: &[usize]) -> Corpus {
        let keep: BTreeSet<usize> = sources.iter().copied().collect();
        Corpus {
            documents: self
                .documents
                .iter()
                .filter(|d| keep.contains(&d.source_id))
                .cloned()
                .collect(),
            num_sources: self.num_sources,
            num_topics: self.num_topics,
            metadata_dim: self.metadata_dim,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        file.write_all(self.to_jsonl()?.as_bytes())?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        let header = Header { k: self.num_sources, c: self.num_topics, dm: self.metadata_dim };
        out.push_str(&serde_json::to_string(&header)?);
        out.push('\n');
        for doc in &self.documents {
            out.push_str(&serde_json::to_string(doc)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Loads a JSONL corpus. Line numbers in errors are 1-based.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let (_, first) = lines
        .next()
        .ok_or_else(|| CrafError::Parse { line: 1, message: "empty file, expected header".into() })?;
    let header: Header = serde_json::from_str(&first?)
        .map_err(|e| CrafError::Parse { line: 1, message: format!("bad header: {e}") })?;

    let mut corpus = Corpus::new(header.k, header.c, header.dm);
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| CrafError::Parse { line: idx + 1, message: e.to_string() })?;
        if doc.metadata.len() != header.dm {
            return Err(CrafError::Schema(format!(
                "line {}: metadata dimension {} != declared {}",
                idx + 1,
                doc.metadata.len(),
                header.dm
            )));
        }
        corpus.documents.push(doc);
    }
    Ok(corpus)
}

/// Corpus-level statistics backing the per-document quality vector.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CorpusStats {
    pub mean_tokens: f64,
    pub std_tokens: f64,
    pub vocabulary: BTreeSet<String>,
}

impl CorpusStats {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut vocabulary = BTreeSet::new();
        let mut lengths = Vec::with_capacity(corpus.len());
        for doc in &corpus.documents {
            let tokens = tokenize(&doc.text);
            lengths.push(tokens.len() as f64);
            vocabulary.extend(tokens);
        }
        let n = lengths.len().max(1) as f64;
        let mean = lengths.iter().sum::<f64>() / n;
        let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
        Self { mean_tokens: mean, std_tokens: var.sqrt(), vocabulary }
    }
}

/// Number of quality components appended to the raw metadata.
pub const QUALITY_DIM: usize = 4;

/// Quality vector for one document:
/// `[length z-score, OOV fraction, metadata completeness, duplicate-token fraction]`.
///
/// The z-score is clamped to `[-5, 5]`; the three fractions lie in `[0, 1]`.
/// Never NaN, for any input text. The choice of components is a stand-in:
/// it is computable from text alone and tracks how noisy a document is.
pub fn compute_quality(doc: &Document, stats: &CorpusStats) -> [f64; QUALITY_DIM] {
    let tokens = tokenize(&doc.text);
    let n = tokens.len();

    let z = if stats.std_tokens > 0.0 {
        ((n as f64 - stats.mean_tokens) / stats.std_tokens).clamp(-5.0, 5.0)
    } else {
        0.0
    };

    let oov = if n == 0 {
        0.0
    } else {
        tokens.iter().filter(|t| !stats.vocabulary.contains(*t)).count() as f64 / n as f64
    };

    let completeness = if doc.metadata.is_empty() {
        1.0
    } else {
        doc.metadata.iter().filter(|m| m.is_finite()).count() as f64 / doc.metadata.len() as f64
    };

    let dup = if n == 0 {
        0.0
    } else {
        let unique: BTreeSet<&String> = tokens.iter().collect();
        (n - unique.len()) as f64 / n as f64
    };

    [z, oov, completeness, dup]
}

/// Raw metadata concatenated with the quality vector: the conditioning
/// input of the fusion gate and the residual map.
pub fn metadata_with_quality(doc: &Document, stats: &CorpusStats) -> Vec<f64> {
    let mut m: Vec<f64> = doc.metadata.iter().map(|x| if x.is_finite() { *x } else { 0.0 }).collect();
    m.extend(compute_quality(doc, stats));
    m
}

// ---------------------------------------------------------------------------
// Synthetic corpus generation
// ---------------------------------------------------------------------------

/// Recipe for a synthetic multi-source corpus.
///
/// Each topic owns a vocabulary block; each sentiment class owns a smaller
/// indicator block; the remainder is shared background. Every source
/// reweights the whole vocabulary multiplicatively (`exp(shift * gaussian)`),
/// which divides sources lexically by one scalar knob. `noise_rate` replaces
/// that fraction of tokens with uniform-random vocabulary tokens.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_sources: usize,
    pub num_topics: usize,
    pub docs_per_source: usize,
    pub vocab_size: usize,
    /// Per-source vocabulary-shift strength in [0, 1].
    pub shift_strength: f64,
    /// Per-source token noise rate in [0, 1].
    pub noise_rate: f64,
    /// Sentiment skew per topic in [0, 1]: 0 = uniform labels, 1 = each topic
    /// pinned to its preferred sentiment (topic index mod 3).
    pub sentiment_skew: f64,
    pub seed: u64,
    /// Mean document length in tokens; lengths vary uniformly around it.
    #[serde(default = "default_tokens_per_doc")]
    pub tokens_per_doc: usize,
    #[serde(default = "default_metadata_dim")]
    pub metadata_dim: usize,
}

fn default_tokens_per_doc() -> usize {
    40
}

fn default_metadata_dim() -> usize {
    4
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_sources == 0 || self.num_topics == 0 || self.docs_per_source == 0 {
            return Err(CrafError::Config("sources, topics and docs_per_source must be positive".into()));
        }
        if self.vocab_size < self.num_topics * 4 + 12 {
            return Err(CrafError::Config(format!(
                "vocab_size {} too small for {} topics",
                self.vocab_size, self.num_topics
            )));
        }
        for (name, v) in [
            ("shift_strength", self.shift_strength),
            ("noise_rate", self.noise_rate),
            ("sentiment_skew", self.sentiment_skew),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CrafError::Config(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        if self.tokens_per_doc < 2 {
            return Err(CrafError::Config("tokens_per_doc must be at least 2".into()));
        }
        Ok(())
    }
}

/// Token-sampling mixture weights of the generator.
const TOPIC_MASS: f64 = 0.55;
const SENTIMENT_MASS: f64 = 0.20;

struct VocabLayout {
    topic_blocks: Vec<(usize, usize)>,
    sentiment_blocks: [(usize, usize); 3],
    vocab_size: usize,
}

impl VocabLayout {
    fn new(spec: &SynthSpec) -> Self {
        let v = spec.vocab_size;
        let topic_span = v / 2;
        let per_topic = (topic_span / spec.num_topics).max(2);
        let topic_blocks: Vec<(usize, usize)> =
            (0..spec.num_topics).map(|c| (c * per_topic, per_topic)).collect();
        let sent_start = spec.num_topics * per_topic;
        let per_sent = ((v - sent_start) / 6).max(2);
        let sentiment_blocks = [
            (sent_start, per_sent),
            (sent_start + per_sent, per_sent),
            (sent_start + 2 * per_sent, per_sent),
        ];
        Self { topic_blocks, sentiment_blocks, vocab_size: v }
    }

    /// Base token distribution given a topic and sentiment label.
    fn base_distribution(&self, topic: usize, sentiment: Sentiment) -> Vec<f64> {
        let mut p = vec![(1.0 - TOPIC_MASS - SENTIMENT_MASS) / self.vocab_size as f64; self.vocab_size];
        let (ts, tl) = self.topic_blocks[topic];
        for x in &mut p[ts..ts + tl] {
            *x += TOPIC_MASS / tl as f64;
        }
        let (ss, sl) = self.sentiment_blocks[sentiment.index()];
        for x in &mut p[ss..ss + sl] {
            *x += SENTIMENT_MASS / sl as f64;
        }
        p
    }
}

fn token_name(i: usize) -> String {
    format!("tok{i}")
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf = Vec::with_capacity(p.len());
    for x in p {
        acc += x;
        cdf.push(acc);
    }
    cdf
}

fn sample_cdf(cdf: &[f64], u: f64) -> usize {
    let target = u * cdf.last().copied().unwrap_or(1.0);
    cdf.partition_point(|&c| c < target).min(cdf.len() - 1)
}

/// Generates a corpus from `spec`. Pure in the spec: the same spec (seed
/// included) always produces byte-identical output.
pub fn synthesize_corpus(spec: &SynthSpec) -> Result<Corpus> {
    spec.validate()?;
    let layout = VocabLayout::new(spec);

    // Per-source multiplicative reweighting of the whole vocabulary.
    let mut source_weights = Vec::with_capacity(spec.num_sources);
    for k in 0..spec.num_sources {
        let mut rng = rng_for(spec.seed, &format!("synth.shift.{k}"));
        let w: Vec<f64> = (0..spec.vocab_size)
            .map(|_| {
                let g: f64 = rng.sample(rand_distr_standard_normal());
                (spec.shift_strength * g).exp()
            })
            .collect();
        source_weights.push(w);
    }

    let mut corpus = Corpus::new(spec.num_sources, spec.num_topics, spec.metadata_dim);
    let base_ts: i64 = 1_700_000_000;
    let mut doc_counter: i64 = 0;

    for k in 0..spec.num_sources {
        // Shifted distributions for every (topic, sentiment) pair of this source.
        let mut cdfs = Vec::with_capacity(spec.num_topics * 3);
        for c in 0..spec.num_topics {
            for s in Sentiment::ALL {
                let mut p = layout.base_distribution(c, s);
                for (pi, wi) in p.iter_mut().zip(&source_weights[k]) {
                    *pi *= wi;
                }
                cdfs.push(cumulative(&p));
            }
        }

        let mut rng = rng_for(spec.seed, &format!("synth.docs.{k}"));
        for _ in 0..spec.docs_per_source {
            let topic = rng.gen_range(0..spec.num_topics);
            let preferred = topic % 3;
            let sentiment = if rng.gen::<f64>() < spec.sentiment_skew {
                Sentiment::from_index(preferred)
            } else {
                Sentiment::from_index(rng.gen_range(0..3))
            };

            let lo = (spec.tokens_per_doc / 2).max(2);
            let hi = spec.tokens_per_doc + spec.tokens_per_doc / 2;
            let len = rng.gen_range(lo..=hi);
            let cdf = &cdfs[topic * 3 + sentiment.index()];
            let mut words = Vec::with_capacity(len);
            for _ in 0..len {
                let mut tok = sample_cdf(cdf, rng.gen::<f64>());
                if spec.noise_rate > 0.0 && rng.gen::<f64>() < spec.noise_rate {
                    tok = rng.gen_range(0..spec.vocab_size);
                }
                words.push(token_name(tok));
            }

            let metadata: Vec<f64> = (0..spec.metadata_dim).map(|_| rng.gen::<f64>()).collect();
            corpus.documents.push(Document {
                source_id: k,
                text: words.join(" "),
                timestamp: base_ts + doc_counter * 60,
                metadata,
                topic_label: Some(topic),
                sentiment_label: Some(sentiment),
                asr: None,
                vis: None,
            });
            doc_counter += 1;
        }
    }
    Ok(corpus)
}

/// Standard normal via Box-Muller free of extra dependencies' version churn.
fn rand_distr_standard_normal() -> StandardNormal {
    StandardNormal
}

pub(crate) struct StandardNormal;

impl rand::distributions::Distribution<f64> for StandardNormal {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // Box-Muller; u1 in (0,1] avoids ln(0).
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

/// Largest-remainder allocation of `n` items over `ratios`.
fn allocate(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts = [quotas[0].floor() as usize, quotas[1].floor() as usize, quotas[2].floor() as usize];
    let mut rem: Vec<(usize, f64)> =
        (0..3).map(|i| (i, quotas[i] - quotas[i].floor())).collect();
    rem.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut left = n - counts.iter().sum::<usize>();
    for (i, _) in rem {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Splits a corpus into train/val/test, stratified by `(source_id,
/// topic_label)` where labels exist. Strata smaller than 3 documents fall
/// back to a shared unstratified pool (logged). Deterministic in `seed`;
/// the three parts are disjoint and exhaustive.
pub fn split(corpus: &Corpus, ratios: (f64, f64, f64), seed: u64) -> Result<(Corpus, Corpus, Corpus)> {
    let r = [ratios.0, ratios.1, ratios.2];
    if r.iter().any(|x| *x < 0.0) {
        return Err(CrafError::Config("split ratios must be nonnegative".into()));
    }
    if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(CrafError::Config(format!(
            "split ratios must sum to 1, got {}",
            r.iter().sum::<f64>()
        )));
    }

    let mut strata: BTreeMap<(usize, i64), Vec<usize>> = BTreeMap::new();
    for (i, doc) in corpus.documents.iter().enumerate() {
        let label = doc.topic_label.map_or(-1, |t| t as i64);
        strata.entry((doc.source_id, label)).or_default().push(i);
    }

    let mut pool: Vec<usize> = Vec::new();
    let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for ((src, label), mut idxs) in strata {
        if idxs.len() < 3 {
            log::warn!(
                "stratum (source {src}, topic {label}) has {} document(s); splitting unstratified",
                idxs.len()
            );
            pool.extend(idxs);
            continue;
        }
        let mut rng = rng_for(seed, &format!("split.{src}.{label}"));
        idxs.shuffle(&mut rng);
        let counts = allocate(idxs.len(), &r);
        let mut cursor = 0;
        for (part, &count) in parts.iter_mut().zip(&counts) {
            part.extend_from_slice(&idxs[cursor..cursor + count]);
            cursor += count;
        }
    }
    if !pool.is_empty() {
        let mut rng = rng_for(seed, "split.pool");
        pool.shuffle(&mut rng);
        let counts = allocate(pool.len(), &r);
        let mut cursor = 0;
        for (part, &count) in parts.iter_mut().zip(&counts) {
            part.extend_from_slice(&pool[cursor..cursor + count]);
            cursor += count;
        }
    }

    let build = |mut idxs: Vec<usize>| -> Corpus {
        idxs.sort_unstable();
        Corpus {
            documents: idxs.iter().map(|&i| corpus.documents[i].clone()).collect(),
            num_sources: corpus.num_sources,
            num_topics: corpus.num_topics,
            metadata_dim: corpus.metadata_dim,
        }
    };
    let [train, val, test] = parts;
    Ok((build(train), build(val), build(test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn doc(src: usize, text: &str, topic: Option<usize>, sent: Option<Sentiment>) -> Document {
        Document {
            source_id: src,
            text: text.to_string(),
            timestamp: 0,
            metadata: vec![0.0; 4],
            topic_label: topic,
            sentiment_label: sent,
            asr: None,
            vis: None,
        }
    }

    fn small_spec(seed: u64) -> SynthSpec {
        SynthSpec {
            num_sources: 2,
            num_topics: 3,
            docs_per_source: 50,
            vocab_size: 120,
            shift_strength: 0.3,
            noise_rate: 0.1,
            sentiment_skew: 0.6,
            seed,
            tokens_per_doc: 20,
            metadata_dim: 4,
        }
    }

    #[test]
    fn load_header_only_file_gives_empty_corpus_failing_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(&path, "{\"k\":2,\"c\":3,\"dm\":4}\n").unwrap();
        let corpus = load_corpus(&path).unwrap();
        assert_eq!(corpus.len(), 0);
        assert!(corpus.validate().is_err(), "source coverage must fail");
    }

    #[test]
    fn load_minimal_two_source_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"k\":2,\"c\":1,\"dm\":1}\n",
                "{\"src\":0,\"text\":\"a\",\"ts\":1,\"meta\":[0.5],\"topic\":0,\"sent\":\"pos\"}\n",
                "{\"src\":1,\"text\":\"b\",\"ts\":2,\"meta\":[0.5],\"topic\":null,\"sent\":null}\n",
            ),
        )
        .unwrap();
        let corpus = load_corpus(&path).unwrap();
        assert_eq!(corpus.num_sources, 2);
        assert_eq!(corpus.len(), 2);
        corpus.validate().unwrap();
    }

    #[test]
    fn malformed_line_names_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(&path, "{\"k\":1,\"c\":1,\"dm\":0}\nnot json\n").unwrap();
        match load_corpus(&path) {
            Err(CrafError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_metadata_dim_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(
            &path,
            "{\"k\":1,\"c\":1,\"dm\":2}\n{\"src\":0,\"text\":\"a\",\"ts\":1,\"meta\":[0.5],\"topic\":null,\"sent\":null}\n",
        )
        .unwrap();
        assert!(matches!(load_corpus(&path), Err(CrafError::Schema(_))));
    }

    #[test]
    fn round_trip_preserves_documents_exactly() {
        let corpus = synthesize_corpus(&small_spec(9)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        corpus.save(&path).unwrap();
        let reloaded = load_corpus(&path).unwrap();
        // Equality oracle over serialized records.
        assert_eq!(corpus.to_jsonl().unwrap(), reloaded.to_jsonl().unwrap());
        assert_eq!(corpus, reloaded);
    }

    #[test]
    fn metadata_nan_round_trips_as_null() {
        let mut d = doc(0, "x", None, None);
        d.metadata = vec![1.0, f64::NAN, 0.25, f64::NAN];
        let line = serde_json::to_string(&d).unwrap();
        assert!(line.contains("[1.0,null,0.25,null]"), "{line}");
        let back: Document = serde_json::from_str(&line).unwrap();
        assert!(back.metadata[1].is_nan() && back.metadata[3].is_nan());
    }

    #[test]
    fn synthesis_is_deterministic() {
        let a = synthesize_corpus(&small_spec(7)).unwrap();
        let b = synthesize_corpus(&small_spec(7)).unwrap();
        assert_eq!(a.to_jsonl().unwrap(), b.to_jsonl().unwrap());
        let c = synthesize_corpus(&small_spec(8)).unwrap();
        assert_ne!(a.to_jsonl().unwrap(), c.to_jsonl().unwrap());
    }

    #[test]
    fn zero_shift_zero_noise_sources_share_topic_distributions() {
        // Chi-square oracle on per-topic token counts between the two sources.
        let mut spec = small_spec(11);
        spec.shift_strength = 0.0;
        spec.noise_rate = 0.0;
        spec.docs_per_source = 400;
        let corpus = synthesize_corpus(&spec).unwrap();

        for topic in 0..spec.num_topics {
            let mut counts: [HashMap<String, f64>; 2] = [HashMap::new(), HashMap::new()];
            let mut totals = [0.0f64; 2];
            for d in &corpus.documents {
                if d.topic_label != Some(topic) {
                    continue;
                }
                for t in tokenize(&d.text) {
                    *counts[d.source_id].entry(t).or_insert(0.0) += 1.0;
                    totals[d.source_id] += 1.0;
                }
            }
            let tokens: BTreeSet<String> =
                counts[0].keys().chain(counts[1].keys()).cloned().collect();
            let mut chi2 = 0.0;
            let mut dof = 0.0;
            for t in &tokens {
                let o0 = counts[0].get(t).copied().unwrap_or(0.0);
                let o1 = counts[1].get(t).copied().unwrap_or(0.0);
                let pooled = (o0 + o1) / (totals[0] + totals[1]);
                let (e0, e1) = (pooled * totals[0], pooled * totals[1]);
                if o0 + o1 < 10.0 {
                    continue; // low-count cells break the chi-square approximation
                }
                chi2 += (o0 - e0).powi(2) / e0 + (o1 - e1).powi(2) / e1;
                dof += 1.0;
            }
            assert!(dof > 10.0, "too few informative tokens");
            // Far beyond the 99.9th percentile of chi-square(dof).
            let bound = dof + 6.0 * (2.0 * dof).sqrt();
            assert!(chi2 < bound, "topic {topic}: chi2 {chi2:.1} exceeds {bound:.1} (dof {dof})");
        }
    }

    #[test]
    fn topic_labels_near_uniform() {
        let mut spec = small_spec(13);
        spec.num_topics = 3;
        spec.docs_per_source = 300;
        spec.num_sources = 1;
        let corpus = synthesize_corpus(&spec).unwrap();
        let mut counts = [0usize; 3];
        for d in &corpus.documents {
            counts[d.topic_label.unwrap()] += 1;
        }
        for c in counts {
            let frac = c as f64 / corpus.len() as f64;
            assert!((frac - 1.0 / 3.0).abs() < 0.05, "topic fraction {frac}");
        }
    }

    #[test]
    fn quality_empty_text() {
        let corpus = synthesize_corpus(&small_spec(3)).unwrap();
        let stats = CorpusStats::from_corpus(&corpus);
        let q = compute_quality(&doc(0, "", None, None), &stats);
        assert_eq!(q[1], 0.0, "OOV is vacuous on empty text");
        assert_eq!(q[3], 0.0, "no duplicates on empty text");
        assert!(q[0] <= 0.0 && q[0] >= -5.0, "z-score at distribution minimum");
        assert!(q.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn quality_mean_length_and_full_metadata() {
        let stats = CorpusStats {
            mean_tokens: 3.0,
            std_tokens: 1.0,
            vocabulary: ["a", "b", "c"].iter().map(|s| s.to_string()).collect(),
        };
        let d = doc(0, "a b c", None, None);
        let q = compute_quality(&d, &stats);
        assert_eq!(q[0], 0.0);
        assert_eq!(q[2], 1.0);
    }

    #[test]
    fn quality_duplicate_fraction_hand_count() {
        let stats = CorpusStats {
            mean_tokens: 4.0,
            std_tokens: 1.0,
            vocabulary: ["a", "b"].iter().map(|s| s.to_string()).collect(),
        };
        let q = compute_quality(&doc(0, "a a a b", None, None), &stats);
        assert_eq!(q[3], 0.5, "2 repeated of 4");
        assert_eq!(q[1], 0.0, "no OOV");
    }

    #[test]
    fn quality_never_nan_on_odd_inputs() {
        let stats = CorpusStats { mean_tokens: 0.0, std_tokens: 0.0, vocabulary: BTreeSet::new() };
        for text in ["", "   ", "!!!", "a", "\u{1F600}\u{1F600}"] {
            let q = compute_quality(&doc(0, text, None, None), &stats);
            assert!(q.iter().all(|x| x.is_finite()), "{text:?} -> {q:?}");
        }
    }

    #[test]
    fn split_all_train() {
        let corpus = synthesize_corpus(&small_spec(5)).unwrap();
        let (train, val, test) = split(&corpus, (1.0, 0.0, 0.0), 1).unwrap();
        assert_eq!(train.len(), corpus.len());
        assert!(val.is_empty() && test.is_empty());
    }

    #[test]
    fn split_exact_sizes_single_stratum() {
        let mut corpus = Corpus::new(1, 1, 0);
        for i in 0..100 {
            let mut d = doc(0, &format!("w{i}"), None, None);
            d.metadata = vec![];
            corpus.documents.push(d);
        }
        let (train, val, test) = split(&corpus, (0.8, 0.1, 0.1), 7).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (80, 10, 10));
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let corpus = synthesize_corpus(&small_spec(21)).unwrap();
        let (a1, b1, c1) = split(&corpus, (0.6, 0.2, 0.2), 3).unwrap();
        let (a2, b2, c2) = split(&corpus, (0.6, 0.2, 0.2), 3).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert_eq!(c1, c2);

        let mut all: Vec<String> = a1
            .documents
            .iter()
            .chain(&b1.documents)
            .chain(&c1.documents)
            .map(|d| serde_json::to_string(d).unwrap())
            .collect();
        all.sort();
        let mut orig: Vec<String> =
            corpus.documents.iter().map(|d| serde_json::to_string(d).unwrap()).collect();
        orig.sort();
        assert_eq!(all, orig, "split must partition the corpus");
    }

    #[test]
    fn tiny_stratum_falls_back_to_pool() {
        let mut corpus = Corpus::new(2, 2, 4);
        corpus.documents.push(doc(0, "a", Some(0), None));
        corpus.documents.push(doc(0, "b", Some(1), None));
        corpus.documents.push(doc(1, "c", Some(0), None));
        corpus.documents.push(doc(1, "d", Some(1), None));
        let (train, val, test) = split(&corpus, (0.5, 0.25, 0.25), 11).unwrap();
        assert_eq!(train.len() + val.len() + test.len(), 4);
    }

    #[test]
    fn bad_ratios_rejected() {
        let corpus = synthesize_corpus(&small_spec(2)).unwrap();
        assert!(split(&corpus, (0.5, 0.2, 0.2), 1).is_err());
        assert!(split(&corpus, (-0.1, 0.6, 0.5), 1).is_err());
    }
}
