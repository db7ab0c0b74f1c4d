//! CBOW word embeddings trained with negative sampling.
//!
//! The trainer follows the usual word2vec recipe: the mean of the context
//! input vectors predicts the center token through a logistic loss on the
//! true center and `negatives` tokens drawn from the unigram^0.75
//! distribution. Frequent tokens are subsampled and the learning rate decays
//! linearly from `lr0` to `lr_min` over all processed tokens.
//!
//! Two execution modes exist. [`TrainMode::Deterministic`] runs a single
//! worker from a fixed seed and produces bit-identical models across runs.
//! [`TrainMode::Parallel`] shards sentences over several workers that update
//! the shared matrices without locking; updates may interleave, so results
//! are not reproducible in that mode.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "emojisem-embedding 1";
const CONTEXT_MARKER: &str = "# context-vectors";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    total: u64,
    min_count: u64,
}

impl Vocabulary {
    /// Builds a vocabulary from `(token, count)` pairs; indices follow
    /// descending count, ties by token.
    pub fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Result<Self> {
        let mut kept: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c >= min_count.max(1)).collect();
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary { min_count });
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let total = kept.iter().map(|(_, c)| c).sum();
        let index = kept.iter().enumerate().map(|(i, (t, _))| (t.clone(), i)).collect();
        let (tokens, counts) = kept.into_iter().unzip();
        Ok(Self {
            tokens,
            counts,
            index,
            total,
            min_count,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    pub fn count(&self, idx: usize) -> u64 {
        self.counts[idx]
    }

    pub fn count_of(&self, token: &str) -> u64 {
        self.get(token).map(|i| self.counts[i]).unwrap_or(0)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Sum of the counts of all kept tokens.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Maps each stream to vocabulary indices, dropping unknown tokens.
    pub fn encode<S: AsRef<[String]>>(&self, streams: &[S]) -> Vec<Vec<u32>> {
        streams
            .iter()
            .map(|s| {
                s.as_ref()
                    .iter()
                    .filter_map(|t| self.get(t).map(|i| i as u32))
                    .collect()
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "# min_count {}", self.min_count).map_err(io)?;
        for (t, c) in self.tokens.iter().zip(&self.counts) {
            writeln!(w, "{t}\t{c}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let name = path.display().to_string();
        let mut min_count = 1;
        let mut counts = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if let Some(rest) = line.strip_prefix("# min_count ") {
                min_count = rest
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(&name, i + 1, "bad min_count"))?;
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (t, c) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(&name, i + 1, "expected token<TAB>count"))?;
            let c: u64 = c.parse().map_err(|_| Error::parse(&name, i + 1, "bad count"))?;
            counts.insert(t.to_string(), c);
        }
        Self::from_counts(counts, min_count)
    }
}

/// Counts tokens over all streams and keeps those with `count >= min_count`.
pub fn build_vocabulary<S: AsRef<[String]>>(streams: &[S], min_count: u64) -> Result<Vocabulary> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for s in streams {
        for t in s.as_ref() {
            if let Some(c) = counts.get_mut(t.as_str()) {
                *c += 1;
            } else {
                counts.insert(t.clone(), 1);
            }
        }
    }
    Vocabulary::from_counts(counts, min_count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub dim: usize,
    pub epochs: usize,
    pub lr0: f64,
    pub lr_min: f64,
    pub window: usize,
    pub negatives: usize,
    /// Subsampling threshold; `0` disables subsampling.
    pub subsample: f64,
    pub min_count: u64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            dim: 100,
            epochs: 10,
            lr0: 0.025,
            lr_min: 1e-4,
            window: 5,
            negatives: 5,
            subsample: 1e-4,
            min_count: 5,
            seed: 1,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Params(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if !(self.lr_min > 0.0 && self.lr0 > self.lr_min) || !self.lr0.is_finite() {
            return bad("need lr0 > lr_min > 0");
        }
        if self.window == 0 {
            return bad("window must be >= 1");
        }
        if self.subsample.is_nan() || self.subsample < 0.0 {
            return bad("subsample must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainMode {
    Deterministic,
    Parallel { threads: usize },
}

impl TrainMode {
    fn workers(self) -> usize {
        match self {
            TrainMode::Deterministic => 1,
            TrainMode::Parallel { threads } => threads.max(1),
        }
    }
}

/// Linear decay from `lr0` to `lr_min` over the fraction of processed tokens.
#[derive(Debug, Clone, Copy)]
pub struct LearningRate {
    pub lr0: f64,
    pub lr_min: f64,
}

impl LearningRate {
    pub fn at(&self, fraction: f64) -> f64 {
        let f = fraction.clamp(0.0, 1.0);
        self.lr0 + f * (self.lr_min - self.lr0)
    }
}

/// Probability of keeping one occurrence of a token with `count` out of
/// `total` tokens: `(sqrt(c / (t*total)) + 1) * (t*total) / c`, capped at 1.
/// A threshold of 0 keeps everything.
pub fn keep_probability(count: u64, total: u64, threshold: f64) -> f64 {
    if threshold <= 0.0 || count == 0 {
        return 1.0;
    }
    let limit = threshold * total as f64;
    let c = count as f64;
    (((c / limit).sqrt() + 1.0) * limit / c).min(1.0)
}

pub fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// `ln(sigmoid(x))`, stable for large |x|.
pub fn log_sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        -((-x).exp()).ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Negative-sampling loss of one prediction and its gradient.
///
/// `targets` holds the output row of the center token (label `true`) and of
/// each sampled negative (label `false`). The loss is
/// `-Σ ln σ(±⟨u_t, h⟩)`; gradients with respect to `hidden` and to every
/// target row are written to `grad_hidden` (overwritten) and `grad_targets`.
pub fn ns_loss_and_gradients<F: Float>(
    hidden: &[F],
    targets: &[(&[F], bool)],
    grad_hidden: &mut [F],
    grad_targets: &mut [Vec<F>],
) -> F {
    grad_hidden.iter_mut().for_each(|g| *g = F::zero());
    let mut loss = F::zero();
    for ((row, label), gt) in targets.iter().zip(grad_targets.iter_mut()) {
        let score = dot(hidden, row);
        let sign = if *label { F::one() } else { -F::one() };
        loss = loss - log_sigmoid(sign * score);
        // d/ds of -ln σ(sign*s) = sigmoid(s) - label
        let label_value = if *label { F::one() } else { F::zero() };
        let g = sigmoid(score) - label_value;
        gt.clear();
        gt.extend(hidden.iter().map(|h| g * *h));
        for (gh, u) in grad_hidden.iter_mut().zip(row.iter()) {
            *gh = *gh + g * *u;
        }
    }
    loss
}

/// CBOW loss as a function of the raw context input rows.
pub fn cbow_loss<F: Float>(context: &[Vec<F>], targets: &[(&[F], bool)]) -> F {
    let hidden = mean_rows(context);
    let mut gh = vec![F::zero(); hidden.len()];
    let mut gt = vec![Vec::new(); targets.len()];
    ns_loss_and_gradients(&hidden, targets, &mut gh, &mut gt)
}

/// Gradients of [`cbow_loss`]: one per context row (identical, the hidden
/// gradient divided by the context size) and one per target row.
pub fn cbow_gradients<F: Float>(context: &[Vec<F>], targets: &[(&[F], bool)]) -> (Vec<Vec<F>>, Vec<Vec<F>>) {
    let hidden = mean_rows(context);
    let mut gh = vec![F::zero(); hidden.len()];
    let mut gt = vec![Vec::new(); targets.len()];
    ns_loss_and_gradients(&hidden, targets, &mut gh, &mut gt);
    let n = F::from(context.len()).unwrap();
    let per_row: Vec<F> = gh.iter().map(|g| *g / n).collect();
    (vec![per_row; context.len()], gt)
}

fn mean_rows<F: Float>(rows: &[Vec<F>]) -> Vec<F> {
    let d = rows.first().map(Vec::len).unwrap_or(0);
    let mut out = vec![F::zero(); d];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r) {
            *o = *o + *v;
        }
    }
    let n = F::from(rows.len().max(1)).unwrap();
    out.iter_mut().for_each(|o| *o = *o / n);
    out
}

fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (x, y)| acc + *x * *y)
}

/// Cumulative unigram^0.75 table for drawing negatives.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    cumulative: Vec<u64>,
}

impl NegativeSampler {
    pub fn new(vocab: &Vocabulary) -> Self {
        const DOMAIN: f64 = (1u64 << 40) as f64;
        let weights: Vec<f64> = (0..vocab.len()).map(|i| (vocab.count(i) as f64).powf(0.75)).collect();
        let z: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut last = 0u64;
        for w in weights {
            acc += w;
            let v = ((acc / z) * DOMAIN).round() as u64;
            // strictly increasing so every token stays drawable
            last = v.max(last + 1);
            cumulative.push(last);
        }
        Self { cumulative }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        let hi = *self.cumulative.last().unwrap_or(&1);
        let r = rng.random_range(0..hi);
        self.cumulative.partition_point(|&c| c <= r) as u32
    }
}

/// Dense row-major `rows × cols` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub params: TrainParams,
    pub mode: String,
    pub epoch_loss: Vec<f64>,
}

/// One trained CBOW model.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    pub input: Matrix,
    pub context: Option<Matrix>,
    pub meta: ModelMeta,
}

impl EmbeddingModel {
    pub fn new(tokens: Vec<String>, input: Matrix, context: Option<Matrix>, meta: ModelMeta) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            tokens,
            index,
            input,
            context,
            meta,
        }
    }

    pub fn dim(&self) -> usize {
        self.input.cols
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn seed(&self) -> u64 {
        self.meta.params.seed
    }

    /// Input vector of a token; this is the representation used downstream.
    pub fn vector(&self, token: &str) -> Option<&[f32]> {
        self.index_of(token).map(|i| self.input.row(i))
    }

    pub fn vector_f64(&self, token: &str) -> Option<Vec<f64>> {
        self.vector(token).map(|v| v.iter().map(|&x| x as f64).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.input.data.iter().all(|v| v.is_finite())
            && self
                .context
                .as_ref()
                .is_none_or(|m| m.data.iter().all(|v| v.is_finite()))
    }
}

struct SharedMatrix {
    cols: usize,
    data: Vec<AtomicU32>,
}

impl SharedMatrix {
    fn from_matrix(m: &Matrix) -> Self {
        Self {
            cols: m.cols,
            data: m.data.iter().map(|v| AtomicU32::new(v.to_bits())).collect(),
        }
    }

    #[inline]
    fn get(&self, row: usize, col: usize) -> f32 {
        f32::from_bits(self.data[row * self.cols + col].load(Ordering::Relaxed))
    }

    #[inline]
    fn add(&self, row: usize, col: usize, delta: f32) {
        let cell = &self.data[row * self.cols + col];
        let v = f32::from_bits(cell.load(Ordering::Relaxed)) + delta;
        cell.store(v.to_bits(), Ordering::Relaxed);
    }

    fn read_row(&self, row: usize, out: &mut [f32]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.get(row, c);
        }
    }

    fn into_matrix(self, rows: usize) -> Matrix {
        Matrix {
            rows,
            cols: self.cols,
            data: self.data.into_iter().map(|a| f32::from_bits(a.into_inner())).collect(),
        }
    }
}

struct Shared<'a> {
    input: SharedMatrix,
    output: SharedMatrix,
    processed: AtomicU64,
    total_work: u64,
    schedule: LearningRate,
    keep: Vec<f64>,
    sampler: NegativeSampler,
    params: &'a TrainParams,
}

#[derive(Default, Clone)]
struct EpochStats {
    loss: f64,
    events: u64,
}

fn run_worker(shared: &Shared<'_>, sentences: &[&[u32]], seed: u64) -> std::result::Result<Vec<EpochStats>, u64> {
    let p = shared.params;
    let d = p.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = vec![EpochStats::default(); p.epochs];
    let mut kept: Vec<u32> = Vec::new();
    let mut context: Vec<u32> = Vec::new();
    let mut hidden = vec![0f32; d];
    let mut grad_hidden = vec![0f32; d];
    let mut target_ids: Vec<u32> = Vec::with_capacity(p.negatives + 1);
    let mut target_rows: Vec<Vec<f32>> = vec![vec![0f32; d]; p.negatives + 1];
    let mut grad_targets: Vec<Vec<f32>> = vec![Vec::with_capacity(d); p.negatives + 1];

    for stat in stats.iter_mut() {
        for sentence in sentences {
            let done = shared.processed.load(Ordering::Relaxed);
            let lr = shared.schedule.at(done as f64 / shared.total_work as f64) as f32;

            kept.clear();
            for &w in sentence.iter() {
                let keep = shared.keep[w as usize];
                if keep >= 1.0 || rng.random::<f64>() < keep {
                    kept.push(w);
                }
            }

            for pos in 0..kept.len() {
                let reduced = rng.random_range(0..p.window);
                let span = p.window - reduced;
                let lo = pos.saturating_sub(span);
                let hi = (pos + span + 1).min(kept.len());
                context.clear();
                context.extend((lo..hi).filter(|&j| j != pos).map(|j| kept[j]));
                if context.is_empty() {
                    continue;
                }
                hidden.iter_mut().for_each(|h| *h = 0.0);
                for &c in &context {
                    for (k, h) in hidden.iter_mut().enumerate() {
                        *h += shared.input.get(c as usize, k);
                    }
                }
                let inv = 1.0 / context.len() as f32;
                hidden.iter_mut().for_each(|h| *h *= inv);

                let center = kept[pos];
                target_ids.clear();
                target_ids.push(center);
                for _ in 0..p.negatives {
                    let neg = shared.sampler.sample(&mut rng);
                    if neg != center {
                        target_ids.push(neg);
                    }
                }
                for (slot, &t) in target_ids.iter().enumerate() {
                    shared.output.read_row(t as usize, &mut target_rows[slot]);
                }
                let targets: Vec<(&[f32], bool)> = target_rows[..target_ids.len()]
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (r.as_slice(), i == 0))
                    .collect();
                let loss = ns_loss_and_gradients(&hidden, &targets, &mut grad_hidden, &mut grad_targets);
                if !loss.is_finite() {
                    return Err(shared.processed.load(Ordering::Relaxed));
                }
                stat.loss += loss as f64;
                stat.events += 1;

                for (slot, &t) in target_ids.iter().enumerate() {
                    for (k, g) in grad_targets[slot].iter().enumerate() {
                        shared.output.add(t as usize, k, -lr * g);
                    }
                }
                let scale = -lr * inv;
                for &c in &context {
                    for (k, g) in grad_hidden.iter().enumerate() {
                        shared.input.add(c as usize, k, scale * g);
                    }
                }
            }
            shared.processed.fetch_add(sentence.len() as u64, Ordering::Relaxed);
        }
    }
    Ok(stats)
}

/// Trains one CBOW model on encoded sentences (see [`Vocabulary::encode`]).
pub fn train_cbow(
    sentences: &[Vec<u32>],
    vocab: &Vocabulary,
    params: &TrainParams,
    mode: TrainMode,
) -> Result<EmbeddingModel> {
    params.validate()?;
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary {
            min_count: vocab.min_count(),
        });
    }
    let v = vocab.len();
    let d = params.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut input = Matrix::zeros(v, d);
    let half = 0.5 / d as f32;
    for x in input.data.iter_mut() {
        *x = rng.random_range(-half..half);
    }
    let output = Matrix::zeros(v, d);

    let corpus_tokens: u64 = sentences.iter().map(|s| s.len() as u64).sum();
    let keep = (0..v)
        .map(|i| keep_probability(vocab.count(i), vocab.total(), params.subsample))
        .collect();
    let shared = Shared {
        input: SharedMatrix::from_matrix(&input),
        output: SharedMatrix::from_matrix(&output),
        processed: AtomicU64::new(0),
        total_work: (corpus_tokens * params.epochs as u64).max(1),
        schedule: LearningRate {
            lr0: params.lr0,
            lr_min: params.lr_min,
        },
        keep,
        sampler: NegativeSampler::new(vocab),
        params,
    };

    let workers = mode.workers();
    let shards: Vec<Vec<&[u32]>> = (0..workers)
        .map(|w| sentences.iter().skip(w).step_by(workers).map(Vec::as_slice).collect())
        .collect();
    let base_seed = rng.random::<u64>();
    let results: Vec<std::result::Result<Vec<EpochStats>, u64>> = if workers == 1 {
        vec![run_worker(&shared, &shards[0], base_seed)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = shards
                .iter()
                .enumerate()
                .map(|(w, shard)| {
                    let shared = &shared;
                    scope.spawn(move || run_worker(shared, shard, base_seed.wrapping_add(w as u64)))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training worker panicked"))
                .collect()
        })
    };

    let mut epoch_totals = vec![EpochStats::default(); params.epochs];
    for r in results {
        let stats = r.map_err(|tokens| Error::NonFinite {
            what: "negative-sampling loss",
            tokens,
            seed: params.seed,
        })?;
        for (tot, s) in epoch_totals.iter_mut().zip(stats) {
            tot.loss += s.loss;
            tot.events += s.events;
        }
    }
    let epoch_loss = epoch_totals
        .iter()
        .map(|s| if s.events > 0 { s.loss / s.events as f64 } else { 0.0 })
        .collect();

    let processed = shared.processed.load(Ordering::Relaxed);
    let model = EmbeddingModel::new(
        vocab.tokens().to_vec(),
        shared.input.into_matrix(v),
        Some(shared.output.into_matrix(v)),
        ModelMeta {
            params: params.clone(),
            mode: match mode {
                TrainMode::Deterministic => "deterministic".into(),
                TrainMode::Parallel { threads } => format!("parallel:{threads}"),
            },
            epoch_loss,
        },
    );
    if !model.is_finite() {
        return Err(Error::NonFinite {
            what: "embedding parameters",
            tokens: processed,
            seed: params.seed,
        });
    }
    Ok(model)
}

/// `runs` models sharing one vocabulary, seeded `params.seed + r`.
#[derive(Debug, Clone)]
pub struct RunSet {
    pub corpus_id: String,
    pub models: Vec<EmbeddingModel>,
}

impl RunSet {
    pub fn seeds(&self) -> Vec<u64> {
        self.models.iter().map(EmbeddingModel::seed).collect()
    }
}

pub fn train_run_set(
    corpus_id: &str,
    sentences: &[Vec<u32>],
    vocab: &Vocabulary,
    params: &TrainParams,
    runs: usize,
    mode: TrainMode,
) -> Result<RunSet> {
    let models = (0..runs)
        .map(|r| {
            let p = TrainParams {
                seed: params.seed.wrapping_add(r as u64),
                ..params.clone()
            };
            train_cbow(sentences, vocab, &p, mode)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunSet {
        corpus_id: corpus_id.to_string(),
        models,
    })
}

/// The `k` nearest tokens by cosine similarity, self excluded.
pub fn neighbors(model: &EmbeddingModel, token: &str, k: usize) -> Result<Vec<(String, f64)>> {
    let idx = model
        .index_of(token)
        .ok_or_else(|| Error::NotFound(token.to_string()))?;
    if k == 0 {
        return Ok(Vec::new());
    }
    let q = model.input.row(idx);
    let qn = norm(q);
    let mut scored: Vec<(usize, f64)> = (0..model.len())
        .filter(|&i| i != idx)
        .filter_map(|i| {
            let r = model.input.row(i);
            let rn = norm(r);
            if qn == 0.0 || rn == 0.0 {
                return None;
            }
            let dotp: f64 = q.iter().zip(r).map(|(a, b)| *a as f64 * *b as f64).sum();
            Some((i, dotp / (qn * rn)))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored.into_iter().map(|(i, c)| (model.tokens[i].clone(), c)).collect())
}

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|x| *x as f64 * *x as f64).sum::<f64>().sqrt()
}

fn write_rows(out: &mut String, tokens: &[String], m: &Matrix) {
    for (i, t) in tokens.iter().enumerate() {
        out.push_str(t);
        for v in m.row(i) {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
}

/// Writes the model as text: `#` metadata lines, the `|V| d` header, one
/// `token v1 … vd` line per token, then (if present) the context matrix
/// after a `# context-vectors` marker. Values use shortest round-trip
/// formatting, so a reload is bit-identical.
pub fn save_model(model: &EmbeddingModel, path: &Path) -> Result<()> {
    let mut out = String::new();
    let p = &model.meta.params;
    let _ = writeln!(out, "# {FORMAT_TAG}");
    let _ = writeln!(out, "# seed {}", p.seed);
    let _ = writeln!(out, "# dim {}", p.dim);
    let _ = writeln!(out, "# epochs {}", p.epochs);
    let _ = writeln!(out, "# lr0 {}", p.lr0);
    let _ = writeln!(out, "# lr_min {}", p.lr_min);
    let _ = writeln!(out, "# window {}", p.window);
    let _ = writeln!(out, "# negatives {}", p.negatives);
    let _ = writeln!(out, "# subsample {}", p.subsample);
    let _ = writeln!(out, "# min_count {}", p.min_count);
    let _ = writeln!(out, "# mode {}", model.meta.mode);
    let losses: Vec<String> = model.meta.epoch_loss.iter().map(|l| l.to_string()).collect();
    let _ = writeln!(out, "# epoch_loss {}", losses.join(" "));
    let _ = writeln!(out, "{} {}", model.len(), model.dim());
    write_rows(&mut out, &model.tokens, &model.input);
    if let Some(ctx) = &model.context {
        let _ = writeln!(out, "{CONTEXT_MARKER}");
        write_rows(&mut out, &model.tokens, ctx);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<EmbeddingModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fail = |m: String| Error::ModelFormat {
        path: path.to_path_buf(),
        message: m,
    };
    let mut lines = text.lines().peekable();
    let mut meta: HashMap<String, String> = HashMap::new();
    let mut tagged = false;
    while let Some(line) = lines.peek() {
        let Some(body) = line.strip_prefix('#') else { break };
        let body = body.trim();
        if body == FORMAT_TAG {
            tagged = true;
        } else if let Some((k, v)) = body.split_once(' ') {
            meta.insert(k.to_string(), v.to_string());
        } else if body.starts_with("emojisem-embedding") {
            return Err(fail(format!("unsupported format version {body:?}")));
        }
        lines.next();
    }
    if !tagged {
        return Err(fail(format!("missing `# {FORMAT_TAG}` line")));
    }
    let header = lines.next().ok_or_else(|| fail("missing `|V| d` header".into()))?;
    let mut hp = header.split_whitespace();
    let (Some(nv), Some(nd), None) = (hp.next(), hp.next(), hp.next()) else {
        return Err(fail(format!("bad header {header:?}")));
    };
    let nv: usize = nv.parse().map_err(|_| fail(format!("bad vocabulary size {nv:?}")))?;
    let nd: usize = nd.parse().map_err(|_| fail(format!("bad dimension {nd:?}")))?;

    let num = |k: &str| -> Result<Option<f64>> {
        meta.get(k)
            .map(|v| v.parse::<f64>().map_err(|_| fail(format!("bad metadata {k} = {v:?}"))))
            .transpose()
    };
    let defaults = TrainParams::default();
    let params = TrainParams {
        dim: num("dim")?.map(|v| v as usize).unwrap_or(nd),
        epochs: num("epochs")?.map(|v| v as usize).unwrap_or(defaults.epochs),
        lr0: num("lr0")?.unwrap_or(defaults.lr0),
        lr_min: num("lr_min")?.unwrap_or(defaults.lr_min),
        window: num("window")?.map(|v| v as usize).unwrap_or(defaults.window),
        negatives: num("negatives")?.map(|v| v as usize).unwrap_or(defaults.negatives),
        subsample: num("subsample")?.unwrap_or(defaults.subsample),
        min_count: num("min_count")?.map(|v| v as u64).unwrap_or(defaults.min_count),
        seed: meta
            .get("seed")
            .map(|s| s.parse::<u64>().map_err(|_| fail(format!("bad seed {s:?}"))))
            .transpose()?
            .unwrap_or(defaults.seed),
    };
    if params.dim != nd {
        return Err(fail(format!(
            "dimension mismatch: metadata {} vs header {nd}",
            params.dim
        )));
    }
    let epoch_loss = match meta.get("epoch_loss") {
        Some(s) => s
            .split_whitespace()
            .map(|x| x.parse::<f64>().map_err(|_| fail(format!("bad epoch_loss {x:?}"))))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };

    let read_block = |lines: &mut dyn Iterator<Item = &str>, what: &str| -> Result<(Vec<String>, Matrix)> {
        let mut tokens = Vec::with_capacity(nv);
        let mut m = Matrix::zeros(nv, nd);
        for i in 0..nv {
            let line = lines
                .next()
                .ok_or_else(|| fail(format!("truncated {what}: expected {nv} rows, found {i}")))?;
            let mut parts = line.split(' ');
            let tok = parts.next().unwrap_or("");
            if tok.is_empty() {
                return Err(fail(format!("{what} row {} has no token", i + 1)));
            }
            let row = m.row_mut(i);
            let mut n = 0;
            for v in parts {
                if n >= nd {
                    return Err(fail(format!("{what} row {} has more than {nd} values", i + 1)));
                }
                row[n] = v
                    .parse()
                    .map_err(|_| fail(format!("{what} row {}: bad value {v:?}", i + 1)))?;
                n += 1;
            }
            if n != nd {
                return Err(fail(format!("{what} row {} has {n} values, expected {nd}", i + 1)));
            }
            tokens.push(tok.to_string());
        }
        Ok((tokens, m))
    };
    let (tokens, input) = read_block(&mut lines, "vector block")?;
    let context = match lines.next() {
        None => None,
        Some(CONTEXT_MARKER) => {
            let (ctx_tokens, ctx) = read_block(&mut lines, "context block")?;
            if ctx_tokens != tokens {
                return Err(fail("context block token order differs from vector block".into()));
            }
            Some(ctx)
        }
        Some(other) => return Err(fail(format!("unexpected line after vectors: {other:?}"))),
    };
    let mode = meta.get("mode").cloned().unwrap_or_else(|| "unknown".into());
    Ok(EmbeddingModel::new(
        tokens,
        input,
        context,
        ModelMeta {
            params,
            mode,
            epoch_loss,
        },
    ))
}
