//! Linear-chain CRF: exact inference and L2-regularized SGD training.
//!
//! Transition scores live in an `(L+2) x (L+2)` matrix whose last two rows/columns are the
//! virtual START and STOP states. A path `y` scores
//! `trans[START, y0] + sum_i emit[i, y_i] + sum_i trans[y_{i-1}, y_i] + trans[y_last, STOP]`.

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SeqExample;
use crate::error::{Error, Result};
use crate::features::FeatureVocab;
use crate::iobes::{is_valid_iobes, Tag};
use crate::num::{log_sum_exp, Scalar};

/// Emission and transition scores for one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainPotentials<T> {
    pub n_labels: usize,
    /// Row-major `len x n_labels`.
    pub emissions: Vec<T>,
    /// Row-major `(n_labels + 2) x (n_labels + 2)`, from-state by to-state.
    pub transitions: Vec<T>,
}

/// Output of forward-backward.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginals<T> {
    pub log_z: T,
    /// `len x L`: P(y_i = a).
    pub node: Vec<T>,
    /// `(len - 1) x L x L`: P(y_{i} = a, y_{i+1} = b).
    pub edge: Vec<T>,
}

impl<T: Scalar> ChainPotentials<T> {
    pub fn new(n_labels: usize, emissions: Vec<T>, transitions: Vec<T>) -> Result<Self> {
        if n_labels == 0 || emissions.is_empty() || emissions.len() % n_labels != 0 {
            return Err(Error::Argument(format!(
                "emission matrix of {} entries does not fit {n_labels} labels",
                emissions.len()
            )));
        }
        let w = n_labels + 2;
        if transitions.len() != w * w {
            return Err(Error::Argument(format!("transition matrix must have {} entries", w * w)));
        }
        Ok(ChainPotentials {
            n_labels,
            emissions,
            transitions,
        })
    }

    pub fn len(&self) -> usize {
        self.emissions.len() / self.n_labels
    }

    pub fn is_empty(&self) -> bool {
        self.emissions.is_empty()
    }

    fn start(&self) -> usize {
        self.n_labels
    }

    fn stop(&self) -> usize {
        self.n_labels + 1
    }

    #[inline]
    fn emit(&self, i: usize, y: usize) -> T {
        self.emissions[i * self.n_labels + y]
    }

    #[inline]
    fn trans(&self, from: usize, to: usize) -> T {
        self.transitions[from * (self.n_labels + 2) + to]
    }

    /// Unnormalized log score of a complete path.
    pub fn path_score(&self, path: &[usize]) -> T {
        assert_eq!(path.len(), self.len());
        let mut s = self.trans(self.start(), path[0]) + self.emit(0, path[0]);
        for i in 1..path.len() {
            s += self.trans(path[i - 1], path[i]) + self.emit(i, path[i]);
        }
        s + self.trans(path[path.len() - 1], self.stop())
    }

    fn forward(&self) -> Vec<T> {
        let (n, l) = (self.len(), self.n_labels);
        let mut alpha = vec![T::zero(); n * l];
        for y in 0..l {
            alpha[y] = self.trans(self.start(), y) + self.emit(0, y);
        }
        let mut scratch = vec![T::zero(); l];
        for i in 1..n {
            for y in 0..l {
                for (yp, s) in scratch.iter_mut().enumerate() {
                    *s = alpha[(i - 1) * l + yp] + self.trans(yp, y);
                }
                alpha[i * l + y] = log_sum_exp(&scratch) + self.emit(i, y);
            }
        }
        alpha
    }

    fn backward(&self) -> Vec<T> {
        let (n, l) = (self.len(), self.n_labels);
        let mut beta = vec![T::zero(); n * l];
        for y in 0..l {
            beta[(n - 1) * l + y] = self.trans(y, self.stop());
        }
        let mut scratch = vec![T::zero(); l];
        for i in (0..n - 1).rev() {
            for y in 0..l {
                for (yn, s) in scratch.iter_mut().enumerate() {
                    *s = self.trans(y, yn) + self.emit(i + 1, yn) + beta[(i + 1) * l + yn];
                }
                beta[i * l + y] = log_sum_exp(&scratch);
            }
        }
        beta
    }

    pub fn log_partition(&self) -> T {
        let (n, l) = (self.len(), self.n_labels);
        let alpha = self.forward();
        let last: Vec<T> = (0..l).map(|y| alpha[(n - 1) * l + y] + self.trans(y, self.stop())).collect();
        log_sum_exp(&last)
    }

    pub fn log_partition_and_marginals(&self) -> Marginals<T> {
        let (n, l) = (self.len(), self.n_labels);
        let alpha = self.forward();
        let beta = self.backward();
        let last: Vec<T> = (0..l).map(|y| alpha[(n - 1) * l + y] + self.trans(y, self.stop())).collect();
        let log_z = log_sum_exp(&last);
        let node = alpha.iter().zip(&beta).map(|(&a, &b)| (a + b - log_z).exp()).collect();
        let mut edge = vec![T::zero(); n.saturating_sub(1) * l * l];
        for i in 0..n.saturating_sub(1) {
            for a in 0..l {
                for b in 0..l {
                    let v = alpha[i * l + a] + self.trans(a, b) + self.emit(i + 1, b) + beta[(i + 1) * l + b] - log_z;
                    edge[(i * l + a) * l + b] = v.exp();
                }
            }
        }
        Marginals { log_z, node, edge }
    }

    /// Highest-scoring path. Among equal-scoring paths the lexicographically smallest
    /// label sequence wins, so lower label indices take precedence.
    pub fn viterbi(&self) -> (Vec<usize>, T) {
        let (n, l) = (self.len(), self.n_labels);
        // best[i*l + y]: best score of positions i+1.. plus STOP given y_i = y.
        let mut best = vec![T::zero(); n * l];
        for y in 0..l {
            best[(n - 1) * l + y] = self.trans(y, self.stop());
        }
        for i in (0..n - 1).rev() {
            for y in 0..l {
                let mut m = T::neg_infinity();
                for yn in 0..l {
                    m = m.max(self.trans(y, yn) + self.emit(i + 1, yn) + best[(i + 1) * l + yn]);
                }
                best[i * l + y] = m;
            }
        }
        let mut path = Vec::with_capacity(n);
        let mut prev = self.start();
        for i in 0..n {
            let mut arg = 0;
            let mut m = T::neg_infinity();
            for y in 0..l {
                let s = self.trans(prev, y) + self.emit(i, y) + best[i * l + y];
                if s > m {
                    m = s;
                    arg = y;
                }
            }
            path.push(arg);
            prev = arg;
        }
        let score = self.path_score(&path);
        (path, score)
    }
}

/// A sentence mapped to feature indices, with optional gold labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSeq {
    pub features: Vec<Vec<usize>>,
    pub labels: Vec<usize>,
}

/// Featurized linear-chain CRF over the IOBES tags.
#[derive(Clone, Debug, PartialEq)]
pub struct CrfModel<T> {
    pub vocab: FeatureVocab,
    /// Row-major `features x tags`.
    pub emission: Vec<T>,
    /// Row-major `(tags + 2) x (tags + 2)`.
    pub transition: Vec<T>,
}

const N_TAGS: usize = Tag::ALL.len();
const FORMAT: &str = "procex-crf";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct CrfFile<T> {
    format: String,
    version: u32,
    tags: Vec<Tag>,
    features: FeatureVocab,
    emission: Vec<T>,
    transition: Vec<T>,
}

impl<T: Scalar> CrfModel<T> {
    /// All-zero weights.
    pub fn new(vocab: FeatureVocab) -> Self {
        CrfModel {
            emission: vec![T::zero(); vocab.len() * N_TAGS],
            transition: vec![T::zero(); (N_TAGS + 2) * (N_TAGS + 2)],
            vocab,
        }
    }

    pub fn tags(&self) -> &'static [Tag] {
        &Tag::ALL
    }

    pub fn n_params(&self) -> usize {
        self.emission.len() + self.transition.len()
    }

    /// Emission weights followed by transition weights.
    pub fn params(&self) -> Vec<T> {
        self.emission.iter().chain(&self.transition).copied().collect()
    }

    pub fn set_params(&mut self, p: &[T]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::Argument(format!("expected {} parameters, got {}", self.n_params(), p.len())));
        }
        let (e, t) = p.split_at(self.emission.len());
        self.emission.copy_from_slice(e);
        self.transition.copy_from_slice(t);
        Ok(())
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<Vec<usize>> {
        self.vocab.encode(tokens)
    }

    pub fn encode_example(&self, ex: &SeqExample) -> EncodedSeq {
        EncodedSeq {
            features: self.encode(&ex.tokens),
            labels: ex.tags.iter().map(|t| t.index()).collect(),
        }
    }

    pub fn potentials_for(&self, features: &[Vec<usize>]) -> ChainPotentials<T> {
        let mut emissions = vec![T::zero(); features.len() * N_TAGS];
        for (i, fs) in features.iter().enumerate() {
            let row = &mut emissions[i * N_TAGS..(i + 1) * N_TAGS];
            for &f in fs {
                for (y, r) in row.iter_mut().enumerate() {
                    *r += self.emission[f * N_TAGS + y];
                }
            }
        }
        ChainPotentials {
            n_labels: N_TAGS,
            emissions,
            transitions: self.transition.clone(),
        }
    }

    /// # Errors
    /// When `tokens` is empty.
    pub fn potentials(&self, tokens: &[String]) -> Result<ChainPotentials<T>> {
        if tokens.is_empty() {
            return Err(Error::Argument("cannot score an empty sentence".into()));
        }
        Ok(self.potentials_for(&self.encode(tokens)))
    }

    /// Best tag sequence; empty input yields an empty sequence.
    pub fn predict(&self, tokens: &[String]) -> Vec<Tag> {
        if tokens.is_empty() {
            return Vec::new();
        }
        let (path, _) = self.potentials_for(&self.encode(tokens)).viterbi();
        path.into_iter().map(|y| Tag::ALL[y]).collect()
    }

    /// Negative log-likelihood of one sequence and its sparse gradient, appended to `grad`
    /// as `(parameter index, value)` pairs.
    fn nll_and_grad(&self, ex: &EncodedSeq, grad: &mut Vec<(usize, T)>) -> T {
        let pot = self.potentials_for(&ex.features);
        let marg = pot.log_partition_and_marginals();
        let nll = marg.log_z - pot.path_score(&ex.labels);
        let l = N_TAGS;
        let w = l + 2;
        let off = self.emission.len();
        for (i, fs) in ex.features.iter().enumerate() {
            for &f in fs {
                for y in 0..l {
                    let mut g = marg.node[i * l + y];
                    if ex.labels[i] == y {
                        g -= T::one();
                    }
                    grad.push((f * l + y, g));
                }
            }
        }
        let n = ex.labels.len();
        for y in 0..l {
            let mut g = marg.node[y];
            if ex.labels[0] == y {
                g -= T::one();
            }
            grad.push((off + l * w + y, g));
            let mut g = marg.node[(n - 1) * l + y];
            if ex.labels[n - 1] == y {
                g -= T::one();
            }
            grad.push((off + y * w + l + 1, g));
        }
        for i in 0..n - 1 {
            for a in 0..l {
                for b in 0..l {
                    let mut g = marg.edge[(i * l + a) * l + b];
                    if ex.labels[i] == a && ex.labels[i + 1] == b {
                        g -= T::one();
                    }
                    grad.push((off + a * w + b, g));
                }
            }
        }
        nll
    }

    pub fn save_json(&self) -> Result<String> {
        let file = CrfFile {
            format: FORMAT.into(),
            version: VERSION,
            tags: Tag::ALL.to_vec(),
            features: self.vocab.clone(),
            emission: self.emission.clone(),
            transition: self.transition.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn load_json(src: &str) -> Result<Self> {
        let f: CrfFile<T> = serde_json::from_str(src)?;
        if f.format != FORMAT || f.version != VERSION {
            return Err(Error::Data(format!("unsupported model format {} v{}", f.format, f.version)));
        }
        if f.tags != Tag::ALL {
            return Err(Error::Data("model tag set is not IOBES in B,I,E,S,O order".into()));
        }
        let m = CrfModel {
            emission: f.emission,
            transition: f.transition,
            vocab: f.features,
        };
        if m.emission.len() != m.vocab.len() * N_TAGS || m.transition.len() != (N_TAGS + 2) * (N_TAGS + 2) {
            return Err(Error::Data("model weight shapes do not match its vocabulary".into()));
        }
        if m.params().iter().any(|w| !w.is_finite()) {
            return Err(Error::Data("model contains non-finite weights".into()));
        }
        Ok(m)
    }
}

/// Tag marginals and log-partition for a sentence.
pub fn log_partition_and_marginals<T: Scalar>(m: &CrfModel<T>, tokens: &[String]) -> Result<Marginals<T>> {
    Ok(m.potentials(tokens)?.log_partition_and_marginals())
}

pub fn viterbi<T: Scalar>(m: &CrfModel<T>, tokens: &[String]) -> Result<Vec<Tag>> {
    let (path, _) = m.potentials(tokens)?.viterbi();
    Ok(path.into_iter().map(|y| Tag::ALL[y]).collect())
}

fn reduce_sparse<T: Scalar>(dense: &mut [T], parts: Vec<Vec<(usize, T)>>, scale: T) {
    for part in parts {
        for (i, g) in part {
            dense[i] += g * scale;
        }
    }
}

/// Regularized objective `(1/N) [sum_n NLL_n + (l2/2) ||w||^2]` and its gradient.
pub fn crf_objective<T: Scalar>(m: &CrfModel<T>, data: &[EncodedSeq], l2: T) -> (T, Vec<T>) {
    let n = T::from_usize(data.len().max(1)).unwrap();
    let results: Vec<(T, Vec<(usize, T)>)> = data
        .par_iter()
        .map(|ex| {
            let mut g = Vec::new();
            let nll = m.nll_and_grad(ex, &mut g);
            (nll, g)
        })
        .collect();
    let params = m.params();
    let mut grad: Vec<T> = params.iter().map(|&w| w * l2 / n).collect();
    let mut loss = params.iter().map(|&w| w * w).sum::<T>() * l2 / T::lit(2.0);
    let mut parts = Vec::with_capacity(results.len());
    for (nll, g) in results {
        loss += nll;
        parts.push(g);
    }
    reduce_sparse(&mut grad, parts, T::one() / n);
    (loss / n, grad)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrfHyper {
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub min_feature_count: usize,
}

impl Default for CrfHyper {
    fn default() -> Self {
        CrfHyper {
            l2: 1.0,
            lr: 0.1,
            epochs: 50,
            batch_size: 1,
            seed: 0,
            min_feature_count: 1,
        }
    }
}

/// Trains a CRF from zero weights and returns it with the per-epoch regularized loss.
///
/// The learning rate at epoch `e` (1-based) is `lr / sqrt(e)`. Each mini-batch step uses the
/// batch-mean NLL gradient plus `l2 / N` times the weights, an unbiased estimate of the full
/// objective's gradient.
pub fn crf_train<T: Scalar>(data: &[SeqExample], hyper: &CrfHyper) -> Result<(CrfModel<T>, Vec<T>)> {
    if data.is_empty() {
        return Err(Error::Data("no training sequences".into()));
    }
    for ex in data {
        if ex.tags.len() != ex.tokens.len() || !is_valid_iobes(&ex.tags) {
            return Err(Error::Data(format!(
                "invalid IOBES tags for {} sentence {}",
                ex.doc, ex.sent_index
            )));
        }
    }
    if hyper.epochs == 0 || hyper.batch_size == 0 || !(hyper.lr > 0.0) || !(hyper.l2 >= 0.0) {
        return Err(Error::Config(format!("invalid CRF hyperparameters {hyper:?}")));
    }
    let train: Vec<&SeqExample> = data.iter().filter(|e| !e.tokens.is_empty()).collect();
    let vocab = FeatureVocab::fit(train.iter().map(|e| e.tokens.as_slice()), hyper.min_feature_count);
    let mut model = CrfModel::<T>::new(vocab);
    let encoded: Vec<EncodedSeq> = train.iter().map(|e| model.encode_example(e)).collect();
    info!(
        "training CRF on {} sequences, {} features",
        encoded.len(),
        model.vocab.len()
    );
    let n = T::from_usize(encoded.len()).unwrap();
    let l2 = T::lit(hyper.l2);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut trace = Vec::with_capacity(hyper.epochs);
    let mut params = model.params();
    for epoch in 1..=hyper.epochs {
        let lr = T::lit(hyper.lr / (epoch as f64).sqrt());
        order.shuffle(&mut rng);
        for batch in order.chunks(hyper.batch_size) {
            let parts: Vec<Vec<(usize, T)>> = batch
                .par_iter()
                .map(|&i| {
                    let mut g = Vec::new();
                    model.nll_and_grad(&encoded[i], &mut g);
                    g
                })
                .collect();
            let b = T::from_usize(batch.len()).unwrap();
            let decay = T::one() - lr * l2 / n;
            for w in params.iter_mut() {
                *w *= decay;
            }
            for part in parts {
                for (i, g) in part {
                    params[i] -= lr * g / b;
                }
            }
            model.set_params(&params)?;
        }
        let (loss, _) = crf_objective(&model, &encoded, l2);
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
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal<R: Rng>(rng: &mut R) -> f64 {
        rng.sample(StandardNormal)
    }

    fn random_chain<R: Rng>(rng: &mut R, n: usize, l: usize) -> ChainPotentials<f64> {
        ChainPotentials::new(
            l,
            (0..n * l).map(|_| normal(rng)).collect(),
            (0..(l + 2) * (l + 2)).map(|_| normal(rng)).collect(),
        )
        .unwrap()
    }

    fn all_paths(n: usize, l: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..l).map(move |y| {
                        let mut q = p.clone();
                        q.push(y);
                        q
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn uniform_partition() {
        let p = ChainPotentials::new(5, vec![0.0; 15], vec![0.0; 49]).unwrap();
        assert!((p.log_partition() - 3.0 * 5f64.ln()).abs() < 1e-12);
        let (path, _) = p.viterbi();
        assert_eq!(path, vec![0, 0, 0]);
    }

    #[test]
    fn two_tag_hand_model() {
        // emissions [[1, 0], [0, 2]], transitions only 0->1 = 0.5, others 0.
        let mut trans = vec![0.0; 16];
        trans[1] = 0.5;
        let p = ChainPotentials::new(2, vec![1.0, 0.0, 0.0, 2.0], trans).unwrap();
        let brute = [1.0f64 + 0.0, 1.0 + 2.0 + 0.5, 0.0 + 0.0, 0.0 + 2.0]
            .iter()
            .map(|s| s.exp())
            .sum::<f64>()
            .ln();
        assert!((p.log_partition() - brute).abs() < 1e-12);
        assert_eq!(p.viterbi().0, vec![0, 1]);
    }

    #[test]
    fn inference_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let n = rng.gen_range(1..=5);
            let p = random_chain(&mut rng, n, 3);
            let paths = all_paths(n, 3);
            let scores: Vec<f64> = paths.iter().map(|q| p.path_score(q)).collect();
            let z = log_sum_exp(&scores);
            let marg = p.log_partition_and_marginals();
            assert!((marg.log_z - z).abs() < 1e-10);
            for i in 0..n {
                let total: f64 = (0..3).map(|y| marg.node[i * 3 + y]).sum();
                assert!((total - 1.0).abs() < 1e-9);
                for y in 0..3 {
                    let emp: f64 = paths
                        .iter()
                        .zip(&scores)
                        .filter(|(q, _)| q[i] == y)
                        .map(|(_, s)| (s - z).exp())
                        .sum();
                    assert!((marg.node[i * 3 + y] - emp).abs() < 1e-8);
                }
            }
            for i in 0..n.saturating_sub(1) {
                let total: f64 = marg.edge[i * 9..(i + 1) * 9].iter().sum();
                assert!((total - 1.0).abs() < 1e-9);
            }
            let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let (vp, vs) = p.viterbi();
            assert_eq!(vs, p.path_score(&vp));
            assert!((vs - best).abs() < 1e-12);
        }
    }

    #[test]
    fn viterbi_prefers_lower_tags_on_ties() {
        // Tags 0 and 1 tie everywhere, tag 2 loses.
        let p = ChainPotentials::new(3, vec![1.0, 1.0, 0.0, 1.0, 1.0, 0.0], vec![0.0; 25]).unwrap();
        assert_eq!(p.viterbi().0, vec![0, 0]);
    }

    fn toy_data() -> Vec<SeqExample> {
        // Tokens "a" start a two-token span ended by "b"; "c" is a singleton; "x" is outside.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        (0..200)
            .map(|i| {
                let mut tokens = Vec::new();
                let mut tags = Vec::new();
                for _ in 0..rng.gen_range(1..6) {
                    match rng.gen_range(0..3) {
                        0 => {
                            tokens.extend(["a".to_string(), "b".to_string()]);
                            tags.extend([Tag::B, Tag::E]);
                        }
                        1 => {
                            tokens.push("c".into());
                            tags.push(Tag::S);
                        }
                        _ => {
                            tokens.push("x".into());
                            tags.push(Tag::O);
                        }
                    }
                }
                SeqExample {
                    doc: "toy".into(),
                    sent_index: i,
                    tokens,
                    tags,
                }
            })
            .collect()
    }

    #[test]
    fn learns_separable_rule() {
        let data = toy_data();
        let (m, trace) = crf_train::<f64>(&data, &CrfHyper::default()).unwrap();
        assert_eq!(trace.len(), 50);
        let (mut right, mut total) = (0, 0);
        for ex in &data {
            let pred = m.predict(&ex.tokens);
            right += pred.iter().zip(&ex.tags).filter(|(a, b)| a == b).count();
            total += ex.tags.len();
        }
        assert!(right as f64 / total as f64 >= 0.99, "accuracy {right}/{total}");
        assert!(trace.last().unwrap() < &trace[0]);
        let decreasing = trace.windows(2).filter(|w| w[1] <= w[0] + 1e-12).count();
        assert!(decreasing as f64 >= 0.9 * (trace.len() - 1) as f64);
    }

    #[test]
    fn training_rejects_bad_input() {
        assert!(matches!(crf_train::<f64>(&[], &CrfHyper::default()), Err(Error::Data(_))));
        let bad = SeqExample {
            doc: "d".into(),
            sent_index: 0,
            tokens: vec!["a".into(), "b".into()],
            tags: vec![Tag::I, Tag::E],
        };
        assert!(matches!(crf_train::<f64>(&[bad], &CrfHyper::default()), Err(Error::Data(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = toy_data();
        let vocab = FeatureVocab::fit(data[..20].iter().map(|e| e.tokens.as_slice()), 1);
        let mut m = CrfModel::<f64>::new(vocab);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p: Vec<f64> = (0..m.n_params()).map(|_| 0.5 * normal(&mut rng)).collect();
        m.set_params(&p).unwrap();
        let enc: Vec<EncodedSeq> = data[..20].iter().map(|e| m.encode_example(e)).collect();
        let (_, grad) = crf_objective(&m, &enc, 0.7);
        let h = 1e-5;
        for _ in 0..20 {
            let i = rng.gen_range(0..p.len());
            let mut q = p.clone();
            q[i] += h;
            m.set_params(&q).unwrap();
            let (up, _) = crf_objective(&m, &enc, 0.7);
            q[i] -= 2.0 * h;
            m.set_params(&q).unwrap();
            let (down, _) = crf_objective(&m, &enc, 0.7);
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8);
            assert!(rel < 1e-4, "param {i}: fd {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn serialization_roundtrip() {
        let data = toy_data();
        let hyper = CrfHyper {
            epochs: 3,
            ..CrfHyper::default()
        };
        let (m, _) = crf_train::<f64>(&data, &hyper).unwrap();
        let json = m.save_json().unwrap();
        let back = CrfModel::<f64>::load_json(&json).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.save_json().unwrap(), json);
        let (m2, _) = crf_train::<f64>(&data, &hyper).unwrap();
        assert_eq!(m2.save_json().unwrap(), json);
        assert!(CrfModel::<f64>::load_json("{\"format\":\"x\"}").is_err());
    }

    #[test]
    fn f32_model_trains() {
        let data = toy_data();
        let hyper = CrfHyper {
            epochs: 5,
            ..CrfHyper::default()
        };
        let (m, _) = crf_train::<f32>(&data[..50], &hyper).unwrap();
        assert_eq!(m.predict(&["a".into(), "b".into()]), vec![Tag::B, Tag::E]);
    }

    #[test]
    fn all_zero_model_decodes_all_b() {
        let m = CrfModel::<f64>::new(FeatureVocab::default());
        let toks: Vec<String> = vec!["x".into(); 3];
        assert_eq!(viterbi(&m, &toks).unwrap(), vec![Tag::B; 3]);
        let marg = log_partition_and_marginals(&m, &toks).unwrap();
        assert!((marg.log_z - 3.0 * 5f64.ln()).abs() < 1e-12);
        assert!(viterbi(&m, &[]).is_err());
    }

    #[test]
    fn dominant_o_model() {
        let vocab = FeatureVocab::from(vec!["bias".to_string()]);
        let mut m = CrfModel::<f64>::new(vocab);
        m.emission[Tag::O.index()] = 5.0;
        let toks: Vec<String> = vec!["x".into(); 4];
        assert_eq!(viterbi(&m, &toks).unwrap(), vec![Tag::O; 4]);
    }
}
