//! Skip-gram with negative sampling: parameters, the noise sampler, batch
//! loss and gradient, and the SGD update.
//!
//! For a center `c`, observed context `o` and noise words `n_1..n_K`, the
//! per-pair loss is
//!
//! ```text
//! -ln σ(u_o · v_c) - Σ_k ln σ(-u_{n_k} · v_c)
//! ```
//!
//! with `v` rows from the input matrix and `u` rows from the output matrix.
//! Batch losses are summed over pairs, not averaged.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::TrainingPair;
use crate::error::{Error, Result};

pub const DEFAULT_NEGATIVE_POWER: f64 = 0.75;

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`, which equals `-ln σ(-x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Input and output embedding matrices, both `vocab_size × dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    vocab_size: usize,
    dim: usize,
    input: Vec<f64>,
    output: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        ModelParams { vocab_size, dim, input: vec![0.0; vocab_size * dim], output: vec![0.0; vocab_size * dim] }
    }

    /// Wraps existing row-major matrices.
    pub fn from_matrices(vocab_size: usize, dim: usize, input: Vec<f64>, output: Vec<f64>) -> Result<Self> {
        for m in [&input, &output] {
            if m.len() != vocab_size * dim {
                return Err(Error::DimensionMismatch { expected: vocab_size * dim, found: m.len() });
            }
        }
        if !input.iter().chain(&output).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("parameters"));
        }
        Ok(ModelParams { vocab_size, dim, input, output })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn input_row(&self, i: usize) -> &[f64] {
        &self.input[i * self.dim..(i + 1) * self.dim]
    }

    pub fn output_row(&self, i: usize) -> &[f64] {
        &self.output[i * self.dim..(i + 1) * self.dim]
    }

    pub fn input_row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.input[i * self.dim..(i + 1) * self.dim]
    }

    pub fn output_row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.output[i * self.dim..(i + 1) * self.dim]
    }

    /// Equality of every entry's bit pattern (distinguishes `0.0` from `-0.0`).
    pub fn bitwise_eq(&self, other: &ModelParams) -> bool {
        self.vocab_size == other.vocab_size
            && self.dim == other.dim
            && self.input.iter().zip(&other.input).all(|(a, b)| a.to_bits() == b.to_bits())
            && self.output.iter().zip(&other.output).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Input entries uniform in `[-0.5/dim, 0.5/dim]`, output entries zero.
pub fn init_params(vocab_size: usize, dim: usize, seed: u64) -> Result<ModelParams> {
    if vocab_size == 0 || dim == 0 {
        return Err(Error::Config("vocabulary size and dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 / dim as f64;
    let mut params = ModelParams::zeros(vocab_size, dim);
    for x in params.input.iter_mut() {
        *x = rng.random_range(-half..=half);
    }
    Ok(params)
}

/// Sampler over vocabulary indices with `P(i) ∝ count_i^power`.
#[derive(Debug, Clone)]
pub struct NegativeTable {
    cumulative: Vec<f64>,
    probabilities: Vec<f64>,
    last_positive: usize,
    power: f64,
}

pub fn build_negative_table(counts: &[u64], power: f64) -> Result<NegativeTable> {
    if !power.is_finite() || power <= 0.0 {
        return Err(Error::Config(format!("negative sampling power must be positive, got {power}")));
    }
    let weights: Vec<f64> = counts.iter().map(|&c| if c == 0 { 0.0 } else { (c as f64).powf(power) }).collect();
    let last_positive = counts.iter().rposition(|&c| c > 0).ok_or(Error::NoPositiveCounts)?;
    let total: f64 = weights.iter().sum();
    let cumulative = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let probabilities = weights.iter().map(|w| w / total).collect();
    Ok(NegativeTable { cumulative, probabilities, last_positive, power })
}

impl NegativeTable {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = self.cumulative[self.cumulative.len() - 1];
        let x = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= x).min(self.last_positive)
    }

    /// Appends `k` noise words for a pair whose true context is `context`.
    /// A draw equal to `context` is redrawn once and kept if it recurs.
    pub fn draw_negatives<R: Rng + ?Sized>(&self, context: usize, k: usize, rng: &mut R, out: &mut Vec<usize>) {
        for _ in 0..k {
            let mut n = self.sample(rng);
            if n == context {
                n = self.sample(rng);
            }
            out.push(n);
        }
    }
}

/// Pairs plus `k` noise words per pair, stored row-major (`pairs.len() × k`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SgnsBatch {
    pairs: Vec<TrainingPair>,
    negatives: Vec<usize>,
    k: usize,
}

impl SgnsBatch {
    pub fn new(pairs: Vec<TrainingPair>, negatives: Vec<usize>, k: usize) -> Result<Self> {
        if negatives.len() != pairs.len() * k {
            return Err(Error::DimensionMismatch { expected: pairs.len() * k, found: negatives.len() });
        }
        Ok(SgnsBatch { pairs, negatives, k })
    }

    /// Draws `k` negatives per pair from `table`.
    pub fn sample<R: Rng + ?Sized>(pairs: Vec<TrainingPair>, k: usize, table: &NegativeTable, rng: &mut R) -> Self {
        let mut negatives = Vec::with_capacity(pairs.len() * k);
        for p in &pairs {
            table.draw_negatives(p.context, k, rng, &mut negatives);
        }
        SgnsBatch { pairs, negatives, k }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn negatives_per_pair(&self) -> usize {
        self.k
    }

    pub fn pairs(&self) -> &[TrainingPair] {
        &self.pairs
    }

    pub fn negatives(&self) -> &[usize] {
        &self.negatives
    }

    /// Each pair with its noise words.
    pub fn iter(&self) -> impl Iterator<Item = (&TrainingPair, &[usize])> {
        let k = self.k;
        self.pairs.iter().enumerate().map(move |(i, p)| (p, &self.negatives[i * k..(i + 1) * k]))
    }

    pub(crate) fn check_indices(&self, vocab_size: usize) -> Result<()> {
        let all = self.pairs.iter().flat_map(|p| [p.center, p.context]).chain(self.negatives.iter().copied());
        for index in all {
            if index >= vocab_size {
                return Err(Error::IndexOutOfRange { index, size: vocab_size });
            }
        }
        Ok(())
    }
}

/// Row-indexed deltas for both embedding matrices. All-zero rows are never
/// stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGradient {
    dim: usize,
    pub input_rows: BTreeMap<usize, Vec<f64>>,
    pub output_rows: BTreeMap<usize, Vec<f64>>,
}

impl SparseGradient {
    pub fn new(dim: usize) -> Self {
        SparseGradient { dim, input_rows: BTreeMap::new(), output_rows: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.input_rows.is_empty() && self.output_rows.is_empty()
    }

    /// Stored rows across both matrices.
    pub fn row_count(&self) -> usize {
        self.input_rows.len() + self.output_rows.len()
    }

    /// Inserts a row, dropping it if all zero.
    pub fn insert_input(&mut self, row: usize, delta: Vec<f64>) -> Result<()> {
        Self::insert(self.dim, &mut self.input_rows, row, delta)
    }

    pub fn insert_output(&mut self, row: usize, delta: Vec<f64>) -> Result<()> {
        Self::insert(self.dim, &mut self.output_rows, row, delta)
    }

    fn insert(dim: usize, rows: &mut BTreeMap<usize, Vec<f64>>, row: usize, delta: Vec<f64>) -> Result<()> {
        if delta.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: delta.len() });
        }
        if delta.iter().any(|&x| x != 0.0) {
            rows.insert(row, delta);
        } else {
            rows.remove(&row);
        }
        Ok(())
    }

    pub fn negated(&self) -> SparseGradient {
        let neg =
            |rows: &BTreeMap<usize, Vec<f64>>| rows.iter().map(|(&r, v)| (r, v.iter().map(|x| -x).collect())).collect();
        SparseGradient { dim: self.dim, input_rows: neg(&self.input_rows), output_rows: neg(&self.output_rows) }
    }

    pub fn is_finite(&self) -> bool {
        self.input_rows.values().chain(self.output_rows.values()).flatten().all(|x| x.is_finite())
    }

    fn from_accumulators(dim: usize, input: HashMap<usize, Vec<f64>>, output: HashMap<usize, Vec<f64>>) -> Self {
        let keep = |(_, v): &(usize, Vec<f64>)| v.iter().any(|&x| x != 0.0);
        SparseGradient {
            dim,
            input_rows: input.into_iter().filter(keep).collect(),
            output_rows: output.into_iter().filter(keep).collect(),
        }
    }
}

fn check_rows_finite(params: &ModelParams, batch: &SgnsBatch) -> Result<()> {
    for (p, negs) in batch.iter() {
        let finite = params.input_row(p.center).iter().all(|x| x.is_finite())
            && std::iter::once(&p.context).chain(negs).all(|&o| params.output_row(o).iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::NonFinite("parameters"));
        }
    }
    Ok(())
}

/// Loss of one pair against its noise words.
pub(crate) fn pair_loss(params: &ModelParams, pair: &TrainingPair, negatives: &[usize]) -> f64 {
    let v = params.input_row(pair.center);
    let mut loss = softplus(-dot(params.output_row(pair.context), v));
    for &n in negatives {
        loss += softplus(dot(params.output_row(n), v));
    }
    loss
}

/// Summed loss over a batch, without gradients.
pub fn batch_loss(params: &ModelParams, batch: &SgnsBatch) -> Result<f64> {
    batch.check_indices(params.vocab_size)?;
    check_rows_finite(params, batch)?;
    Ok(batch.iter().map(|(p, negs)| pair_loss(params, p, negs)).fold(0.0, |acc, l| acc + l))
}

/// Summed batch loss and its exact gradient with respect to every row the
/// batch touches. `params` is left untouched.
pub fn batch_loss_grad(params: &ModelParams, batch: &SgnsBatch) -> Result<(f64, SparseGradient)> {
    batch.check_indices(params.vocab_size)?;
    check_rows_finite(params, batch)?;

    let dim = params.dim;
    let mut input_acc: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut output_acc: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut dv = vec![0.0; dim];
    let mut loss = 0.0;

    for (pair, negs) in batch.iter() {
        let v = params.input_row(pair.center);
        dv.iter_mut().for_each(|x| *x = 0.0);

        let u = params.output_row(pair.context);
        let s = dot(u, v);
        let mut pl = softplus(-s);
        // d/ds [-ln σ(s)] = σ(s) - 1 = -σ(-s)
        let g = -sigmoid(-s);
        axpy(&mut dv, g, u);
        axpy(output_acc.entry(pair.context).or_insert_with(|| vec![0.0; dim]), g, v);

        for &n in negs {
            let u = params.output_row(n);
            let s = dot(u, v);
            pl += softplus(s);
            let g = sigmoid(s);
            axpy(&mut dv, g, u);
            axpy(output_acc.entry(n).or_insert_with(|| vec![0.0; dim]), g, v);
        }
        loss += pl;
        axpy(input_acc.entry(pair.center).or_insert_with(|| vec![0.0; dim]), 1.0, &dv);
    }

    let grad = SparseGradient::from_accumulators(dim, input_acc, output_acc);
    if !loss.is_finite() || !grad.is_finite() {
        return Err(Error::NonFinite("loss or gradient"));
    }
    Ok((loss, grad))
}

/// `row ← row − lr·delta` for every stored row; validated before any write.
pub fn apply_update(params: &mut ModelParams, grad: &SparseGradient, lr: f64) -> Result<()> {
    if grad.dim != params.dim {
        return Err(Error::DimensionMismatch { expected: params.dim, found: grad.dim });
    }
    if !grad.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    if !lr.is_finite() {
        return Err(Error::NonFinite("learning rate"));
    }
    for &index in grad.input_rows.keys().chain(grad.output_rows.keys()) {
        if index >= params.vocab_size {
            return Err(Error::IndexOutOfRange { index, size: params.vocab_size });
        }
    }
    for (&r, delta) in &grad.input_rows {
        axpy(params.input_row_mut(r), -lr, delta);
    }
    for (&r, delta) in &grad.output_rows {
        axpy(params.output_row_mut(r), -lr, delta);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(c: usize, o: usize) -> TrainingPair {
        TrainingPair::new(c, o)
    }

    #[test]
    fn sigmoid_and_softplus_agree() {
        for &x in &[-800.0, -30.0, -1.0, 0.0, 1e-9, 2.5, 40.0, 800.0] {
            let s = sigmoid(x);
            assert!((0.0..=1.0).contains(&s));
            let sp = softplus(-x);
            assert!(sp.is_finite() && sp >= 0.0);
            if x.abs() < 30.0 {
                assert!((sp + s.ln()).abs() < 1e-12, "x={x}");
            }
        }
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(softplus(0.0), std::f64::consts::LN_2);
    }

    #[test]
    fn init_output_is_zero_and_input_bounded() {
        let p = init_params(3, 200, 9).unwrap();
        assert!(p.output().iter().all(|&x| x == 0.0));
        assert!(p.input().iter().all(|&x| (-0.0025..=0.0025).contains(&x)));
        assert!(p.input().iter().any(|&x| x != 0.0));
    }

    #[test]
    fn init_is_deterministic() {
        assert!(init_params(17, 8, 5).unwrap().bitwise_eq(&init_params(17, 8, 5).unwrap()));
        assert!(!init_params(17, 8, 5).unwrap().bitwise_eq(&init_params(17, 8, 6).unwrap()));
        assert!(init_params(0, 8, 5).is_err());
        assert!(init_params(3, 0, 5).is_err());
    }

    #[test]
    fn negative_table_closed_forms() {
        let t = build_negative_table(&[1, 1], 0.75).unwrap();
        assert_eq!(t.probabilities(), &[0.5, 0.5]);
        let t = build_negative_table(&[16, 1], 0.75).unwrap();
        assert!((t.probabilities()[0] - 8.0 / 9.0).abs() < 1e-15);
        assert!((t.probabilities()[1] - 1.0 / 9.0).abs() < 1e-15);
        assert!(matches!(build_negative_table(&[0, 0], 0.75), Err(Error::NoPositiveCounts)));
        assert!(build_negative_table(&[], 0.75).is_err());
    }

    #[test]
    fn negative_table_never_samples_zero_counts() {
        let t = build_negative_table(&[0, 3, 0, 5, 0], 0.75).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let s = t.sample(&mut rng);
            assert!(s == 1 || s == 3, "{s}");
        }
    }

    #[test]
    fn zero_output_loss_is_ln2_per_term() {
        let params = init_params(10, 4, 3).unwrap();
        let pairs = vec![pair(0, 1), pair(2, 3), pair(4, 4)];
        let batch = SgnsBatch::new(pairs, vec![5, 6, 7, 8, 9, 1], 2).unwrap();
        let (loss, grad) = batch_loss_grad(&params, &batch).unwrap();
        let expected = 3.0 * 3.0 * std::f64::consts::LN_2;
        assert!((loss - expected).abs() < 1e-12);
        // Output rows are zero, so no input row receives a gradient.
        assert!(grad.input_rows.is_empty());
    }

    #[test]
    fn hand_computed_single_pair() {
        let params =
            ModelParams::from_matrices(3, 2, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0])
                .unwrap();
        let batch = SgnsBatch::new(vec![pair(0, 1)], vec![2], 1).unwrap();
        let (loss, grad) = batch_loss_grad(&params, &batch).unwrap();
        // -ln σ(1) - ln σ(0)
        assert!((loss - 1.006409).abs() < 1e-6, "{loss}");
        let s1 = sigmoid(1.0);
        assert_eq!(grad.output_rows[&1], vec![s1 - 1.0, 0.0]);
        assert_eq!(grad.output_rows[&2], vec![0.5, 0.0]);
        assert_eq!(grad.input_rows[&0], vec![s1 - 1.0, 0.5]);
    }

    #[test]
    fn loss_grad_rejects_bad_inputs() {
        let params = init_params(4, 2, 0).unwrap();
        let batch = SgnsBatch::new(vec![pair(0, 4)], vec![1], 1).unwrap();
        assert!(matches!(batch_loss_grad(&params, &batch), Err(Error::IndexOutOfRange { .. })));

        let mut bad = params.clone();
        bad.input_row_mut(0)[1] = f64::NAN;
        let batch = SgnsBatch::new(vec![pair(0, 1)], vec![2], 1).unwrap();
        assert!(matches!(batch_loss_grad(&bad, &batch), Err(Error::NonFinite(_))));
        assert!(SgnsBatch::new(vec![pair(0, 1)], vec![2, 3], 1).is_err());
    }

    #[test]
    fn update_identity_and_forced_arithmetic() {
        let mut params = ModelParams::zeros(3, 4);
        let before = params.clone();
        apply_update(&mut params, &SparseGradient::new(4), 0.5).unwrap();
        assert!(params.bitwise_eq(&before));

        let mut g = SparseGradient::new(4);
        g.insert_input(1, vec![1.0; 4]).unwrap();
        apply_update(&mut params, &g, 1.0).unwrap();
        assert_eq!(params.input_row(1), &[-1.0; 4]);
        assert_eq!(params.input_row(0), &[0.0; 4]);
        assert!(params.output().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn update_is_atomic_on_error() {
        let mut params = init_params(3, 2, 4).unwrap();
        let before = params.clone();
        let mut g = SparseGradient::new(2);
        g.insert_input(0, vec![1.0, 1.0]).unwrap();
        g.insert_output(7, vec![1.0, 1.0]).unwrap();
        assert!(apply_update(&mut params, &g, 0.1).is_err());
        assert!(params.bitwise_eq(&before));

        let mut g = SparseGradient::new(2);
        g.input_rows.insert(0, vec![f64::INFINITY, 0.0]);
        assert!(matches!(apply_update(&mut params, &g, 0.1), Err(Error::NonFinite(_))));
        assert!(params.bitwise_eq(&before));
    }

    #[test]
    fn sparse_gradient_drops_zero_rows() {
        let mut g = SparseGradient::new(2);
        g.insert_input(3, vec![0.0, 0.0]).unwrap();
        g.insert_output(1, vec![0.0, -0.0]).unwrap();
        assert!(g.is_empty());
        assert!(g.insert_input(0, vec![1.0]).is_err());
    }
}
