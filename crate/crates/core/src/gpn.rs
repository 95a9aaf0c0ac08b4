//! Goal proposal network.
//!
//! Input is the per-predicate count change between the initial and current
//! state, one-hot over 9 signed buckets. Each (row, bucket) has an embedding;
//! the row embeddings are summed, passed through a rectified hidden layer and
//! mapped to one softmax head of 9 count classes per predicate.

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::goals::{GoalSpec, Predicate, PredicateVocabulary, COUNT_BUCKETS};
use crate::worldsim::SceneGraph;

pub const EMBED_DIM: usize = 100;
pub const HIDDEN_DIM: usize = 128;
/// Bucket of a zero count change.
pub const ZERO_BUCKET: usize = COUNT_BUCKETS / 2;

const MAGIC: &[u8; 8] = b"OWAHGPN\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GpnError {
    #[error("incompatible vocabulary: expected {expected} rows, got {got}")]
    IncompatibleVocabulary { expected: usize, got: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
}

/// Bucket index of each vocabulary row.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeltaMatrix {
    buckets: Vec<u8>,
}

impl DeltaMatrix {
    pub fn from_buckets(buckets: Vec<u8>) -> Result<Self, GpnError> {
        if let Some(b) = buckets.iter().find(|&&b| b as usize >= COUNT_BUCKETS) {
            return Err(GpnError::Shape(format!("bucket {b} out of range")));
        }
        Ok(DeltaMatrix { buckets })
    }

    /// All-zero change for `rows` predicates.
    pub fn zero(rows: usize) -> Self {
        DeltaMatrix { buckets: vec![ZERO_BUCKET as u8; rows] }
    }

    pub fn rows(&self) -> usize {
        self.buckets.len()
    }

    pub fn buckets(&self) -> &[u8] {
        &self.buckets
    }

    /// Dense `rows x 9` one-hot form.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.rows(), COUNT_BUCKETS));
        for (i, &b) in self.buckets.iter().enumerate() {
            m[[i, b as usize]] = 1.0;
        }
        m
    }
}

/// Bucket of a signed count change: clamp to [-4, 4], then shift by 4.
pub fn delta_bucket(change: i64) -> u8 {
    let half = ZERO_BUCKET as i64;
    (change.clamp(-half, half) + half) as u8
}

pub fn encode_delta(s0: &SceneGraph, st: &SceneGraph, vocab: &PredicateVocabulary) -> Result<DeltaMatrix, GpnError> {
    for s in [s0, st] {
        if !vocab.matches_scene(s) {
            let got = PredicateVocabulary::for_scene(s).len();
            return Err(GpnError::IncompatibleVocabulary { expected: vocab.len(), got });
        }
    }
    let (c0, ct) = (vocab.counts(s0), vocab.counts(st));
    let buckets = c0.iter().zip(&ct).map(|(&a, &b)| delta_bucket(b as i64 - a as i64)).collect();
    Ok(DeltaMatrix { buckets })
}

/// Network weights. Embedding row `i * 9 + b` belongs to predicate `i` at
/// bucket `b`; output column `i * 9 + k` is the logit of count `k` for
/// predicate `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct GpnParams {
    pub embed: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Per-predicate count distributions, `rows x 9`, each row summing to 1.
pub type Heads = Array2<f64>;

struct Cache {
    pooled: Array2<f64>,
    hidden_pre: Array2<f64>,
    hidden: Array2<f64>,
    probs: Array2<f64>,
}

impl GpnParams {
    /// Uniform Glorot initialization; output biases start at zero.
    pub fn init(rows: usize, embed_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut glorot = |fan_in: usize, fan_out: usize, shape: (usize, usize)| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Array2::from_shape_simple_fn(shape, || rng.gen_range(-a..a))
        };
        let out = rows * COUNT_BUCKETS;
        let w1 = glorot(embed_dim, hidden_dim, (embed_dim, hidden_dim));
        let w2 = glorot(hidden_dim, out, (hidden_dim, out));
        // pooled sum over `rows` embeddings has roughly unit norm
        let a = (3.0 / (rows * embed_dim).max(1) as f64).sqrt();
        let embed = Array2::from_shape_simple_fn((out, embed_dim), || rng.gen_range(-a..a));
        GpnParams { embed, w1, b1: Array1::zeros(hidden_dim), w2, b2: Array1::zeros(out) }
    }

    /// Default-sized network (d = 100, h = 128) for `rows` predicates.
    pub fn for_vocab(vocab: &PredicateVocabulary, seed: u64) -> Self {
        Self::init(vocab.len(), EMBED_DIM, HIDDEN_DIM, seed)
    }

    pub fn rows(&self) -> usize {
        self.b2.len() / COUNT_BUCKETS
    }

    pub fn embed_dim(&self) -> usize {
        self.embed.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.b1.len()
    }

    fn check_shapes(&self) -> Result<(), GpnError> {
        let (p, d, h) = (self.rows(), self.embed_dim(), self.hidden_dim());
        let ok = self.b2.len() == p * COUNT_BUCKETS
            && self.embed.dim() == (p * COUNT_BUCKETS, d)
            && self.w1.dim() == (d, h)
            && self.w2.dim() == (h, p * COUNT_BUCKETS);
        if ok {
            Ok(())
        } else {
            Err(GpnError::Shape("inconsistent parameter dimensions".into()))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    fn tensors(&self) -> [ndarray::ArrayViewD<'_, f64>; 5] {
        [
            self.embed.view().into_dyn(),
            self.w1.view().into_dyn(),
            self.b1.view().into_dyn(),
            self.w2.view().into_dyn(),
            self.b2.view().into_dyn(),
        ]
    }

    fn tensors_mut(&mut self) -> [ndarray::ArrayViewMutD<'_, f64>; 5] {
        [
            self.embed.view_mut().into_dyn(),
            self.w1.view_mut().into_dyn(),
            self.b1.view_mut().into_dyn(),
            self.w2.view_mut().into_dyn(),
            self.b2.view_mut().into_dyn(),
        ]
    }

    fn zeros_like(&self) -> Self {
        GpnParams {
            embed: Array2::zeros(self.embed.dim()),
            w1: Array2::zeros(self.w1.dim()),
            b1: Array1::zeros(self.b1.len()),
            w2: Array2::zeros(self.w2.dim()),
            b2: Array1::zeros(self.b2.len()),
        }
    }

    fn check_input(&self, delta: &DeltaMatrix) -> Result<(), GpnError> {
        if delta.rows() != self.rows() {
            return Err(GpnError::Shape(format!("delta has {} rows, network expects {}", delta.rows(), self.rows())));
        }
        Ok(())
    }

    fn forward_batch(&self, deltas: &[&DeltaMatrix]) -> Cache {
        let mut pooled = Array2::zeros((deltas.len(), self.embed_dim()));
        for (mut row, delta) in pooled.rows_mut().into_iter().zip(deltas) {
            for (i, &b) in delta.buckets.iter().enumerate() {
                row += &self.embed.row(i * COUNT_BUCKETS + b as usize);
            }
        }
        let hidden_pre = pooled.dot(&self.w1) + &self.b1;
        let hidden = hidden_pre.mapv(|x| x.max(0.0));
        let logits = hidden.dot(&self.w2) + &self.b2;
        let probs = softmax_heads(logits);
        Cache { pooled, hidden_pre, hidden, probs }
    }

    /// Count distributions for every predicate row.
    pub fn forward(&self, delta: &DeltaMatrix) -> Result<Heads, GpnError> {
        self.check_shapes()?;
        self.check_input(delta)?;
        let probs = self.forward_batch(&[delta]).probs;
        Ok(probs.into_shape_with_order((self.rows(), COUNT_BUCKETS)).expect("row-major reshape"))
    }

    /// Mean summed cross-entropy over the batch and its exact gradient.
    pub fn loss_and_grad(&self, batch: &[GpnExample]) -> Result<(f64, GpnParams), GpnError> {
        self.check_shapes()?;
        if batch.is_empty() {
            return Err(GpnError::Config("empty batch".into()));
        }
        for ex in batch {
            self.check_example(ex)?;
        }
        let deltas: Vec<&DeltaMatrix> = batch.iter().map(|e| &e.delta).collect();
        let cache = self.forward_batch(&deltas);
        let n = batch.len() as f64;
        let mut loss = 0.0;
        let mut dlogits = cache.probs.clone();
        for (b, ex) in batch.iter().enumerate() {
            for (i, &k) in ex.target.iter().enumerate() {
                let col = i * COUNT_BUCKETS + k as usize;
                loss -= cache.probs[[b, col]].max(f64::MIN_POSITIVE).ln();
                dlogits[[b, col]] -= 1.0;
            }
        }
        dlogits /= n;
        let mut g = self.zeros_like();
        g.w2 = cache.hidden.t().dot(&dlogits);
        g.b2 = dlogits.sum_axis(Axis(0));
        let mut dhidden = dlogits.dot(&self.w2.t());
        Zip::from(&mut dhidden).and(&cache.hidden_pre).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0;
            }
        });
        g.w1 = cache.pooled.t().dot(&dhidden);
        g.b1 = dhidden.sum_axis(Axis(0));
        let dpooled = dhidden.dot(&self.w1.t());
        for (b, ex) in batch.iter().enumerate() {
            let d = dpooled.row(b);
            for (i, &bucket) in ex.delta.buckets.iter().enumerate() {
                let mut row = g.embed.row_mut(i * COUNT_BUCKETS + bucket as usize);
                row += &d;
            }
        }
        Ok((loss / n, g))
    }

    /// Mean loss without gradients.
    pub fn loss(&self, data: &[GpnExample]) -> Result<f64, GpnError> {
        self.check_shapes()?;
        if data.is_empty() {
            return Err(GpnError::Config("empty dataset".into()));
        }
        let mut total = 0.0;
        for chunk in data.chunks(512) {
            for ex in chunk {
                self.check_example(ex)?;
            }
            let deltas: Vec<&DeltaMatrix> = chunk.iter().map(|e| &e.delta).collect();
            let probs = self.forward_batch(&deltas).probs;
            for (b, ex) in chunk.iter().enumerate() {
                for (i, &k) in ex.target.iter().enumerate() {
                    total -= probs[[b, i * COUNT_BUCKETS + k as usize]].max(f64::MIN_POSITIVE).ln();
                }
            }
        }
        Ok(total / data.len() as f64)
    }

    fn check_example(&self, ex: &GpnExample) -> Result<(), GpnError> {
        self.check_input(&ex.delta)?;
        if ex.target.len() != self.rows() || ex.target.iter().any(|&k| k as usize >= COUNT_BUCKETS) {
            return Err(GpnError::Shape("target does not match the network".into()));
        }
        Ok(())
    }

    /// Versioned little-endian checkpoint: magic, version, (p, c, d, h),
    /// then every tensor in declaration order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.tensors().iter().map(|t| t.len()).sum::<usize>());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for dim in [self.rows(), COUNT_BUCKETS, self.embed_dim(), self.hidden_dim()] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for t in self.tensors() {
            for x in t.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    /// Parses a checkpoint, refusing one built for a different vocabulary size.
    pub fn from_bytes(bytes: &[u8], expected_rows: Option<usize>) -> Result<Self, GpnError> {
        let bad = |m: &str| GpnError::Checkpoint(m.into());
        if bytes.len() < MAGIC.len() + 20 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(bad("missing header"));
        }
        let word = |i: usize| {
            let at = MAGIC.len() + 4 * i;
            u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize
        };
        if word(0) != FORMAT_VERSION as usize {
            return Err(bad("unsupported version"));
        }
        let (p, c, d, h) = (word(1), word(2), word(3), word(4));
        if c != COUNT_BUCKETS {
            return Err(bad("bucket count mismatch"));
        }
        if let Some(expected) = expected_rows {
            if p != expected {
                return Err(GpnError::IncompatibleVocabulary { expected, got: p });
            }
        }
        let out = p.checked_mul(c).ok_or_else(|| bad("dimensions overflow"))?;
        let sizes = [out.checked_mul(d), d.checked_mul(h), Some(h), h.checked_mul(out), Some(out)];
        let mut total = 0usize;
        for s in sizes {
            total = s.and_then(|s| total.checked_add(s)).ok_or_else(|| bad("dimensions overflow"))?;
        }
        let body = &bytes[MAGIC.len() + 20..];
        if Some(body.len()) != total.checked_mul(8) {
            return Err(bad("payload length does not match dimensions"));
        }
        let mut vals = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let mut take = |n: usize| -> Vec<f64> { vals.by_ref().take(n).collect() };
        let shape = |v: Vec<f64>, r: usize, c: usize| Array2::from_shape_vec((r, c), v).expect("sized above");
        let params = GpnParams {
            embed: shape(take(out * d), out, d),
            w1: shape(take(d * h), d, h),
            b1: Array1::from(take(h)),
            w2: shape(take(h * out), h, out),
            b2: Array1::from(take(out)),
        };
        if !params.is_finite() {
            return Err(bad("non-finite weight"));
        }
        Ok(params)
    }
}

fn softmax_heads(mut logits: Array2<f64>) -> Array2<f64> {
    for mut row in logits.rows_mut() {
        for mut head in row.exact_chunks_mut(COUNT_BUCKETS) {
            let max = head.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            head.mapv_inplace(|x| (x - max).exp());
            let z = head.sum();
            head /= z;
        }
    }
    logits
}

/// One training pair: a delta and the true per-row goal counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpnExample {
    pub delta: DeltaMatrix,
    pub target: Vec<u8>,
}

impl GpnExample {
    pub fn new(
        s0: &SceneGraph,
        st: &SceneGraph,
        goal: &GoalSpec,
        vocab: &PredicateVocabulary,
    ) -> Result<Self, GpnError> {
        let delta = encode_delta(s0, st, vocab)?;
        let target = vocab.goal_counts(s0, goal).into_iter().map(|c| c.min(COUNT_BUCKETS as u8 - 1)).collect();
        Ok(GpnExample { delta, target })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.0009, batch_size: 256, epochs: 20, seed: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GpnError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(GpnError::Config("learning_rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(GpnError::Config("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return Err(GpnError::Config("Adam constants out of range".into()));
        }
        Ok(())
    }
}

/// Trained weights and the mean training loss after each epoch.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: GpnParams,
    pub initial_loss: f64,
    pub epoch_losses: Vec<f64>,
}

/// Adam on shuffled minibatches, starting from `GpnParams::init` seeded by
/// `cfg.seed`.
pub fn train_gpn(data: &[GpnExample], embed_dim: usize, hidden_dim: usize, cfg: &TrainConfig) -> Result<TrainOutcome, GpnError> {
    cfg.validate()?;
    let first = data.first().ok_or_else(|| GpnError::Config("empty dataset".into()))?;
    let mut params = GpnParams::init(first.delta.rows(), embed_dim, hidden_dim, cfg.seed);
    let initial_loss = params.loss(data)?;
    let mut m = params.zeros_like();
    let mut v = params.zeros_like();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step = 0i32;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<GpnExample> = idx.iter().map(|&i| data[i].clone()).collect();
            let (loss, grad) = params.loss_and_grad(&batch)?;
            sum += loss * batch.len() as f64;
            step += 1;
            let (c1, c2) = (1.0 - cfg.beta1.powi(step), 1.0 - cfg.beta2.powi(step));
            for (((mut p, mut m), mut v), g) in
                params.tensors_mut().into_iter().zip(m.tensors_mut()).zip(v.tensors_mut()).zip(grad.tensors())
            {
                Zip::from(&mut p).and(&mut m).and(&mut v).and(&g).for_each(|p, m, v, &g| {
                    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                    *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.eps);
                });
            }
        }
        epoch_losses.push(sum / data.len() as f64);
    }
    Ok(TrainOutcome { params, initial_loss, epoch_losses })
}

/// Number of independent redraws before the single-predicate fallback.
pub const SAMPLE_RETRIES: usize = 10;

/// Draws a goal by sampling one count per goal-capable row. Rows whose
/// location class is not a goal location in `scene` are ignored.
pub fn sample_goal<R: Rng + ?Sized>(
    heads: &Heads,
    vocab: &PredicateVocabulary,
    scene: &SceneGraph,
    rng: &mut R,
) -> Result<GoalSpec, GpnError> {
    if heads.nrows() != vocab.len() || heads.ncols() != COUNT_BUCKETS {
        return Err(GpnError::Shape(format!("heads are {:?}, vocabulary has {} rows", heads.dim(), vocab.len())));
    }
    let rows: Vec<(usize, Predicate)> = (0..vocab.len())
        .filter(|&i| vocab.entries()[i].loc_class.is_goal_location())
        .filter_map(|i| vocab.predicate(scene, i).map(|p| (i, p)))
        .collect();
    let dists: Vec<Option<WeightedIndex<f64>>> =
        rows.iter().map(|&(i, _)| WeightedIndex::new(heads.row(i).iter().copied()).ok()).collect();
    for _ in 0..SAMPLE_RETRIES {
        let items = rows
            .iter()
            .zip(&dists)
            .filter_map(|(&(_, p), d)| d.as_ref().map(|d| (p, d.sample(rng) as u8)));
        let goal = GoalSpec::from_counts(items).expect("counts below 9 on goal relations");
        if !goal.is_empty() {
            return Ok(goal);
        }
    }
    let best = rows
        .iter()
        .map(|&(i, p)| (1.0 - heads[[i, 0]], p))
        .fold(None, |acc: Option<(f64, Predicate)>, (w, p)| match acc {
            Some((bw, _)) if bw >= w => acc,
            _ => Some((w, p)),
        });
    match best {
        Some((_, p)) => Ok(GoalSpec::new([(p, 1)]).expect("single predicate")),
        None => Err(GpnError::Shape("scene has no goal locations".into())),
    }
}

/// Most probable count of every goal-capable row (the network's point estimate).
pub fn argmax_goal(heads: &Heads, vocab: &PredicateVocabulary, scene: &SceneGraph) -> GoalSpec {
    let items = (0..vocab.len().min(heads.nrows()))
        .filter(|&i| vocab.entries()[i].loc_class.is_goal_location())
        .filter_map(|i| {
            let p = vocab.predicate(scene, i)?;
            let k = argmax(heads.slice(s![i, ..]).iter().copied());
            Some((p, k as u8))
        });
    GoalSpec::from_counts(items).expect("counts below 9 on goal relations")
}

fn argmax(xs: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in xs.enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best.0
}
