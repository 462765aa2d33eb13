//! Span-pair relation classification over pooled word embeddings.
//!
//! Each side of a pair is a [`ContextWindow`]. Masked pooling looks only at the span's
//! own tokens, while unmasked pooling averages every token in the window. The pair
//! representation concatenates both pooled vectors, their absolute difference and
//! product, histograms of the two context position sequences, a signed sentence-distance
//! one-hot and the lexical overlap of the spans. A standardized multinomial logistic
//! model scores the three labels.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use log::{debug, info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ContextWindow, PairExample, POSITION_CLAMP};
use crate::embeddings::{EmbeddingTable, Vector};
use crate::error::{Error, Result};
use crate::num::{log_sum_exp, Scalar};
use crate::protocol::RelationLabel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PoolingMode {
    MaskedAvg,
    MaskedMax,
    UnmaskedAvg,
}

impl PoolingMode {
    pub const ALL: [PoolingMode; 3] = [PoolingMode::MaskedAvg, PoolingMode::MaskedMax, PoolingMode::UnmaskedAvg];

    pub fn as_str(self) -> &'static str {
        match self {
            PoolingMode::MaskedAvg => "masked-avg",
            PoolingMode::MaskedMax => "masked-max",
            PoolingMode::UnmaskedAvg => "unmasked-avg",
        }
    }
}

impl fmt::Display for PoolingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PoolingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PoolingMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s.to_ascii_lowercase().replace('_', "-"))
            .ok_or_else(|| Error::Config(format!("unknown pooling mode '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReConfig {
    pub pooling: PoolingMode,
    pub position_buckets: usize,
    pub position_emb_dim: usize,
    pub k: usize,
}

impl Default for ReConfig {
    fn default() -> Self {
        ReConfig {
            pooling: PoolingMode::MaskedAvg,
            position_buckets: 2 * POSITION_CLAMP as usize + 1,
            position_emb_dim: 30,
            k: 2,
        }
    }
}

impl ReConfig {
    pub fn validate(&self) -> Result<()> {
        if self.position_buckets % 2 == 0 || self.position_buckets < 2 * POSITION_CLAMP as usize + 1 {
            return Err(Error::Config(format!(
                "position_buckets must be odd and cover [-{POSITION_CLAMP}, {POSITION_CLAMP}], got {}",
                self.position_buckets
            )));
        }
        Ok(())
    }

    fn bucket(&self, pos: i32) -> usize {
        let half = (self.position_buckets / 2) as i32;
        (pos.clamp(-half, half) + half) as usize
    }
}

/// Pools a window into one vector. Returns a zero vector when no pooled token is in the
/// vocabulary.
pub fn masked_pool<T: Scalar>(w: &ContextWindow, emb: &EmbeddingTable<T>, mode: PoolingMode) -> Vector<T> {
    let vectors: Vec<&Vector<T>> = match mode {
        PoolingMode::MaskedAvg | PoolingMode::MaskedMax => w.span_tokens().iter().filter_map(|t| emb.get(t)).collect(),
        PoolingMode::UnmaskedAvg => w.all_tokens().filter_map(|t| emb.get(t)).collect(),
    };
    if vectors.is_empty() {
        warn!("span {:?}: no in-vocabulary tokens to pool", w.span);
        return Vector::zeros(emb.dim());
    }
    let d = emb.dim();
    let out = match mode {
        PoolingMode::MaskedMax => (0..d)
            .map(|j| vectors.iter().map(|v| v[j]).fold(T::neg_infinity(), T::max))
            .collect(),
        PoolingMode::MaskedAvg | PoolingMode::UnmaskedAvg => {
            let n = T::from_usize(vectors.len()).unwrap();
            (0..d)
                .map(|j| {
                    let (lo, hi, sum) = vectors.iter().fold(
                        (T::infinity(), T::neg_infinity(), T::zero()),
                        |(lo, hi, s), v| (lo.min(v[j]), hi.max(v[j]), s + v[j]),
                    );
                    // Rounding can push a mean just outside the range of its inputs.
                    (sum / n).max(lo).min(hi)
                })
                .collect()
        }
    };
    Vector::from_raw(out)
}

/// Named blocks of the pair feature vector, in order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureBlock {
    PooledU,
    PooledV,
    AbsDiff,
    Product,
    PositionsU,
    PositionsV,
    Distance,
    Overlap,
}

/// Offsets of each block for a given embedding dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureLayout {
    pub dim: usize,
    pub buckets: usize,
}

impl FeatureLayout {
    const DISTANCE_BUCKETS: usize = 2 * POSITION_CLAMP as usize + 1;

    pub fn len(&self) -> usize {
        4 * self.dim + 2 * self.buckets + Self::DISTANCE_BUCKETS + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn offset(&self, block: FeatureBlock) -> usize {
        let d = self.dim;
        let b = self.buckets;
        match block {
            FeatureBlock::PooledU => 0,
            FeatureBlock::PooledV => d,
            FeatureBlock::AbsDiff => 2 * d,
            FeatureBlock::Product => 3 * d,
            FeatureBlock::PositionsU => 4 * d,
            FeatureBlock::PositionsV => 4 * d + b,
            FeatureBlock::Distance => 4 * d + 2 * b,
            FeatureBlock::Overlap => 4 * d + 2 * b + Self::DISTANCE_BUCKETS,
        }
    }

    /// Index of the distance feature for a signed sentence distance.
    pub fn distance_index(&self, distance: i64) -> usize {
        let c = POSITION_CLAMP as i64;
        self.offset(FeatureBlock::Distance) + (distance.clamp(-c, c) + c) as usize
    }

    pub fn names(&self) -> Vec<String> {
        let half = (self.buckets / 2) as i64;
        let mut out = Vec::with_capacity(self.len());
        for prefix in ["u", "v", "absdiff", "prod"] {
            out.extend((0..self.dim).map(|j| format!("{prefix}[{j}]")));
        }
        for side in ["u", "v"] {
            out.extend((-half..=half).map(|p| format!("{side}_pos={p}")));
        }
        out.extend((-(POSITION_CLAMP as i64)..=POSITION_CLAMP as i64).map(|d| format!("dist={d}")));
        out.push("overlap".into());
        out
    }
}

fn jaccard(a: &[String], b: &[String]) -> f64 {
    let a: BTreeSet<String> = a.iter().map(|t| t.to_lowercase()).collect();
    let b: BTreeSet<String> = b.iter().map(|t| t.to_lowercase()).collect();
    let union = a.union(&b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(&b).count() as f64 / union as f64
    }
}

/// Raw (unstandardized) feature vector of a pair.
pub fn pair_features<T: Scalar>(p: &PairExample, emb: &EmbeddingTable<T>, cfg: &ReConfig) -> Vec<T> {
    let layout = FeatureLayout {
        dim: emb.dim(),
        buckets: cfg.position_buckets,
    };
    let u = masked_pool(&p.u, emb, cfg.pooling);
    let v = masked_pool(&p.v, emb, cfg.pooling);
    let mut x = vec![T::zero(); layout.len()];
    let d = layout.dim;
    for j in 0..d {
        x[j] = u[j];
        x[d + j] = v[j];
        x[2 * d + j] = (u[j] - v[j]).abs();
        x[3 * d + j] = u[j] * v[j];
    }
    for (block, positions) in [(FeatureBlock::PositionsU, &p.u_positions), (FeatureBlock::PositionsV, &p.v_positions)] {
        let off = layout.offset(block);
        for &pos in positions {
            x[off + cfg.bucket(pos)] += T::one();
        }
    }
    let distance = p.v.span.sent_index as i64 - p.u.span.sent_index as i64;
    x[layout.distance_index(distance)] = T::one();
    x[layout.offset(FeatureBlock::Overlap)] = T::lit(jaccard(p.u.span_tokens(), p.v.span_tokens()));
    x
}

/// Multinomial logistic objective `(1/N) [sum_n -log p(y_n | x_n) + (l2/2) ||W||^2]` and its
/// gradient. `weights` is row-major `n_features x 3`; the bias is an ordinary feature.
pub fn softmax_objective<T: Scalar>(weights: &[T], xs: &[Vec<T>], ys: &[RelationLabel], l2: T) -> (T, Vec<T>) {
    let c = RelationLabel::ALL.len();
    let n = T::from_usize(xs.len().max(1)).unwrap();
    let parts: Vec<(T, Vec<T>)> = xs
        .par_iter()
        .zip(ys.par_iter())
        .map(|(x, &y)| {
            let mut g = vec![T::zero(); weights.len()];
            let nll = example_grad(weights, x, y, T::one(), &mut g);
            (nll, g)
        })
        .collect();
    let mut loss = weights.iter().map(|&w| w * w).sum::<T>() * l2 / T::lit(2.0);
    let mut grad: Vec<T> = weights.iter().map(|&w| w * l2).collect();
    for (nll, g) in parts {
        loss += nll;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    debug_assert_eq!(weights.len() % c, 0);
    (loss / n, grad.into_iter().map(|g| g / n).collect())
}

fn logits<T: Scalar>(weights: &[T], x: &[T]) -> [T; 3] {
    let mut z = [T::zero(); 3];
    for (f, &xf) in x.iter().enumerate() {
        if xf != T::zero() {
            for (c, zc) in z.iter_mut().enumerate() {
                *zc += weights[f * 3 + c] * xf;
            }
        }
    }
    z
}

fn softmax<T: Scalar>(z: [T; 3]) -> [T; 3] {
    let lse = log_sum_exp(&z);
    z.map(|v| (v - lse).exp())
}

/// Adds `scale * d(-log p(y|x))/dW` into `g` and returns the NLL.
fn example_grad<T: Scalar>(weights: &[T], x: &[T], y: RelationLabel, scale: T, g: &mut [T]) -> T {
    let z = logits(weights, x);
    let lse = log_sum_exp(&z);
    let p = z.map(|v| (v - lse).exp());
    for (f, &xf) in x.iter().enumerate() {
        if xf != T::zero() {
            for c in 0..3 {
                let ind = if c == y.index() { T::one() } else { T::zero() };
                g[f * 3 + c] += scale * (p[c] - ind) * xf;
            }
        }
    }
    lse - z[y.index()]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReHyper {
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ReHyper {
    fn default() -> Self {
        ReHyper {
            l2: 0.01,
            lr: 0.5,
            epochs: 100,
            batch_size: 16,
            seed: 0,
        }
    }
}

/// Trained relation classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ReModel<T> {
    pub format: String,
    pub version: u32,
    pub config: ReConfig,
    pub dim: usize,
    pub labels: Vec<RelationLabel>,
    /// Raw feature names; a trailing `bias` feature is appended after standardization.
    pub feature_names: Vec<String>,
    pub mean: Vec<T>,
    pub scale: Vec<T>,
    /// Row-major `(features + 1) x 3`.
    pub weights: Vec<T>,
}

const FORMAT: &str = "procex-re";
const VERSION: u32 = 1;

impl<T: Scalar> ReModel<T> {
    /// Zero weights with identity standardization.
    pub fn new(config: ReConfig, dim: usize) -> Self {
        let layout = FeatureLayout {
            dim,
            buckets: config.position_buckets,
        };
        let f = layout.len();
        ReModel {
            format: FORMAT.into(),
            version: VERSION,
            config,
            dim,
            labels: RelationLabel::ALL.to_vec(),
            feature_names: layout.names(),
            mean: vec![T::zero(); f],
            scale: vec![T::one(); f],
            weights: vec![T::zero(); (f + 1) * 3],
        }
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            dim: self.dim,
            buckets: self.config.position_buckets,
        }
    }

    /// Standardized features with the bias appended.
    pub fn transform(&self, raw: &[T]) -> Vec<T> {
        let mut x: Vec<T> = raw
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect();
        x.push(T::one());
        x
    }

    pub fn scores_for(&self, raw: &[T]) -> [T; 3] {
        softmax(logits(&self.weights, &self.transform(raw)))
    }

    pub fn save_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn load_json(src: &str) -> Result<Self> {
        let m: ReModel<T> = serde_json::from_str(src)?;
        if m.format != FORMAT || m.version != VERSION {
            return Err(Error::Data(format!("unsupported model format {} v{}", m.format, m.version)));
        }
        if m.labels != RelationLabel::ALL {
            return Err(Error::Data("relation model label order must be none, next, if".into()));
        }
        let f = m.layout().len();
        if m.mean.len() != f || m.scale.len() != f || m.weights.len() != (f + 1) * 3 {
            return Err(Error::Data("relation model shapes are inconsistent".into()));
        }
        if m.weights.iter().chain(&m.mean).chain(&m.scale).any(|w| !w.is_finite()) {
            return Err(Error::Data("relation model contains non-finite values".into()));
        }
        Ok(m)
    }
}

/// Argmax label with ties going to the earlier of None, Next, If, and the normalized scores.
pub fn argmax_label<T: Scalar>(scores: &[T; 3]) -> RelationLabel {
    let mut best = 0;
    for c in 1..3 {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    RelationLabel::ALL[best]
}

pub fn re_predict<T: Scalar>(m: &ReModel<T>, emb: &EmbeddingTable<T>, p: &PairExample) -> (RelationLabel, [T; 3]) {
    let scores = m.scores_for(&pair_features(p, emb, &m.config));
    (argmax_label(&scores), scores)
}

/// Fits standardization on the training features, then runs seeded mini-batch SGD.
pub fn re_train<T: Scalar>(
    data: &[PairExample],
    emb: &EmbeddingTable<T>,
    cfg: &ReConfig,
    hyper: &ReHyper,
) -> Result<(ReModel<T>, Vec<T>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Data("no training pairs".into()));
    }
    let distinct: BTreeSet<RelationLabel> = data.iter().map(|p| p.label).collect();
    if distinct.len() < 2 {
        return Err(Error::Training(format!(
            "training pairs carry a single label ({:?}); need at least two",
            distinct.iter().next().unwrap()
        )));
    }
    if hyper.epochs == 0 || hyper.batch_size == 0 || !(hyper.lr > 0.0) || !(hyper.l2 >= 0.0) {
        return Err(Error::Config(format!("invalid relation hyperparameters {hyper:?}")));
    }
    let raw: Vec<Vec<T>> = data.par_iter().map(|p| pair_features(p, emb, cfg)).collect();
    let ys: Vec<RelationLabel> = data.iter().map(|p| p.label).collect();
    let mut model = ReModel::<T>::new(cfg.clone(), emb.dim());
    let f = model.layout().len();
    let n = T::from_usize(raw.len()).unwrap();
    for j in 0..f {
        let mean = raw.iter().map(|x| x[j]).sum::<T>() / n;
        let var = raw.iter().map(|x| (x[j] - mean) * (x[j] - mean)).sum::<T>() / n;
        model.mean[j] = mean;
        model.scale[j] = if var > T::lit(1e-12) { var.sqrt() } else { T::one() };
    }
    let xs: Vec<Vec<T>> = raw.iter().map(|x| model.transform(x)).collect();
    info!("training relation model on {} pairs, {} features", xs.len(), f + 1);
    let l2 = T::lit(hyper.l2);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut trace = Vec::with_capacity(hyper.epochs);
    for epoch in 1..=hyper.epochs {
        let lr = T::lit(hyper.lr / (epoch as f64).sqrt());
        order.shuffle(&mut rng);
        for batch in order.chunks(hyper.batch_size) {
            let b = T::from_usize(batch.len()).unwrap();
            let w = &model.weights;
            let parts: Vec<Vec<T>> = batch
                .par_iter()
                .map(|&i| {
                    let mut g = vec![T::zero(); w.len()];
                    example_grad(w, &xs[i], ys[i], T::one() / b, &mut g);
                    g
                })
                .collect();
            let decay = T::one() - lr * l2 / n;
            for wj in model.weights.iter_mut() {
                *wj *= decay;
            }
            for g in parts {
                for (wj, gj) in model.weights.iter_mut().zip(g) {
                    *wj -= lr * gj;
                }
            }
        }
        let (loss, _) = softmax_objective(&model.weights, &xs, &ys, l2);
        if !loss.is_finite() {
            return Err(Error::Training(format!("loss diverged at epoch {epoch}")));
        }
        debug!("epoch {epoch}: loss {loss}");
        trace.push(loss);
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{TextSpan, Transcript};
    use crate::embeddings::load_embeddings;
    use rand::Rng;

    fn emb() -> EmbeddingTable<f64> {
        load_embeddings("a 1 0\nb 0 1\nc 1 0\nbig 100 -100\n".as_bytes()).unwrap()
    }

    fn transcript() -> Transcript {
        Transcript::from_lines(
            "d",
            [
                (1, "I", vec!["big", "big"]),
                (2, "S", vec!["big", "a", "b", "big"]),
                (3, "I", vec!["big"]),
                (4, "S", vec!["c", "c"]),
            ]
            .map(|(n, s, t)| (n, s.to_string(), t.into_iter().map(String::from).collect())),
        )
        .unwrap()
    }

    #[test]
    fn pooling_examples() {
        let t = transcript();
        let w = crate::dataset::context_window(&t, TextSpan::new(3, 0, 2), 1).unwrap();
        assert_eq!(masked_pool(&w, &emb(), PoolingMode::MaskedAvg).as_slice(), &[1.0, 0.0]);
        let w = crate::dataset::context_window(&t, TextSpan::new(1, 1, 3), 1).unwrap();
        assert_eq!(masked_pool(&w, &emb(), PoolingMode::MaskedMax).as_slice(), &[1.0, 1.0]);
        assert_eq!(masked_pool(&w, &emb(), PoolingMode::MaskedAvg).as_slice(), &[0.5, 0.5]);
        assert!(masked_pool(&w, &emb(), PoolingMode::UnmaskedAvg)[0] > 10.0);
        let w0 = crate::dataset::context_window(&t, TextSpan::new(3, 0, 2), 0).unwrap();
        assert_eq!(
            masked_pool(&w0, &emb(), PoolingMode::MaskedAvg),
            masked_pool(&w0, &emb(), PoolingMode::UnmaskedAvg)
        );
    }

    #[test]
    fn oov_span_pools_to_zero() {
        let t = Transcript::from_lines("d", [(1, "S".to_string(), vec!["zz".to_string()])]).unwrap();
        let w = crate::dataset::context_window(&t, TextSpan::new(0, 0, 1), 0).unwrap();
        assert!(masked_pool(&w, &emb(), PoolingMode::MaskedMax).is_zero());
    }

    fn pair(t: &Transcript, u: TextSpan, v: TextSpan, k: usize, label: RelationLabel) -> PairExample {
        PairExample::new(t, u, v, k, label).unwrap()
    }

    #[test]
    fn feature_examples() {
        let t = transcript();
        let cfg = ReConfig::default();
        let e = emb();
        let layout = FeatureLayout { dim: 2, buckets: 21 };
        let p = pair(&t, TextSpan::new(3, 0, 2), TextSpan::new(3, 0, 2), 0, RelationLabel::None);
        let x = pair_features(&p, &e, &cfg);
        assert_eq!(x.len(), layout.len());
        let ad = layout.offset(FeatureBlock::AbsDiff);
        assert!(x[ad..ad + 2].iter().all(|&v| v == 0.0));
        assert_eq!(x[layout.offset(FeatureBlock::Overlap)], 1.0);

        let p = pair(&t, TextSpan::new(1, 1, 3), TextSpan::new(2, 0, 1), 0, RelationLabel::Next);
        let x = pair_features(&p, &e, &cfg);
        assert_eq!(x[layout.distance_index(1)], 1.0);
        let dist = layout.offset(FeatureBlock::Distance);
        assert_eq!(x[dist..dist + 21].iter().sum::<f64>(), 1.0);
        for block in [FeatureBlock::PositionsU, FeatureBlock::PositionsV] {
            let off = layout.offset(block);
            for (i, &v) in x[off..off + 21].iter().enumerate() {
                if v != 0.0 {
                    assert!(i == 9 || i == 11, "bucket {i} fired for k=0");
                }
            }
        }
        assert_eq!(layout.names().len(), layout.len());
    }

    #[test]
    fn zero_model_predicts_none_uniformly() {
        let t = transcript();
        let m = ReModel::<f64>::new(ReConfig::default(), 2);
        let p = pair(&t, TextSpan::new(1, 1, 3), TextSpan::new(3, 0, 2), 1, RelationLabel::Next);
        let (label, scores) = re_predict(&m, &emb(), &p);
        assert_eq!(label, RelationLabel::None);
        for s in scores {
            assert!((s - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_set_distance_weight() {
        let t = transcript();
        let mut m = ReModel::<f64>::new(ReConfig::default(), 2);
        let idx = m.layout().distance_index(1);
        m.weights[idx * 3 + RelationLabel::Next.index()] = 5.0;
        let adjacent = pair(&t, TextSpan::new(2, 0, 1), TextSpan::new(3, 0, 2), 1, RelationLabel::None);
        let (label, scores) = re_predict(&m, &emb(), &adjacent);
        assert_eq!(label, RelationLabel::Next);
        assert!((scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let far = pair(&t, TextSpan::new(0, 0, 1), TextSpan::new(3, 0, 2), 1, RelationLabel::None);
        assert_eq!(re_predict(&m, &emb(), &far).0, RelationLabel::None);
    }

    #[test]
    fn argmax_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let z = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let c: f64 = rng.gen_range(-100.0..100.0);
            assert_eq!(argmax_label(&softmax(z)), argmax_label(&softmax(z.map(|v| v + c))));
        }
        assert_eq!(argmax_label(&[0.2, 0.4, 0.4]), RelationLabel::Next);
    }

    #[test]
    fn softmax_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = 7;
        let xs: Vec<Vec<f64>> = (0..25).map(|_| (0..f).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let ys: Vec<RelationLabel> = (0..25).map(|i| RelationLabel::ALL[i % 3]).collect();
        let w: Vec<f64> = (0..f * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grad) = softmax_objective(&w, &xs, &ys, 0.3);
        let h = 1e-5;
        for i in 0..w.len() {
            let mut q = w.clone();
            q[i] += h;
            let up = softmax_objective(&q, &xs, &ys, 0.3).0;
            q[i] -= 2.0 * h;
            let down = softmax_objective(&q, &xs, &ys, 0.3).0;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8);
            assert!(rel < 1e-4, "{i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn separable_training_and_errors() {
        // Label determined by sentence distance: 0 -> None, +1 -> Next, +2 -> If.
        let lines: Vec<(u32, String, Vec<String>)> =
            (0..8).map(|i| (i as u32 + 1, "S".to_string(), vec!["a".to_string(), "b".to_string()])).collect();
        let t = Transcript::from_lines("d", lines).unwrap();
        let mut data = Vec::new();
        for s in 0..6 {
            for (d, label) in [(0, RelationLabel::None), (1, RelationLabel::Next), (2, RelationLabel::If)] {
                data.push(pair(&t, TextSpan::new(s, 0, 1), TextSpan::new(s + d, 0, 2), 1, label));
            }
        }
        let (m, trace) = re_train::<f64>(&data, &emb(), &ReConfig::default(), &ReHyper::default()).unwrap();
        assert_eq!(trace.len(), 100);
        assert!(data.iter().all(|p| re_predict(&m, &emb(), p).0 == p.label));
        let json = m.save_json().unwrap();
        assert_eq!(ReModel::<f64>::load_json(&json).unwrap(), m);
        let (m2, _) = re_train::<f64>(&data, &emb(), &ReConfig::default(), &ReHyper::default()).unwrap();
        assert_eq!(m2.save_json().unwrap(), json);

        assert!(matches!(
            re_train::<f64>(&[], &emb(), &ReConfig::default(), &ReHyper::default()),
            Err(Error::Data(_))
        ));
        let single: Vec<PairExample> = data.iter().filter(|p| p.label == RelationLabel::Next).cloned().collect();
        assert!(matches!(
            re_train::<f64>(&single, &emb(), &ReConfig::default(), &ReHyper::default()),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn pooling_mode_parsing() {
        for m in PoolingMode::ALL {
            assert_eq!(m.as_str().parse::<PoolingMode>().unwrap(), m);
        }
        assert_eq!("masked_max".parse::<PoolingMode>().unwrap(), PoolingMode::MaskedMax);
        assert!("bogus".parse::<PoolingMode>().is_err());
    }
}
