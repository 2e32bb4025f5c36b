//! Oracles shared by the integration tests. Nothing here calls into the
//! crate's loss or aggregation code.
#![allow(dead_code)]

use fedvec::corpus::TrainingPair;
use fedvec::sgns::{batch_loss_grad, ModelParams, SgnsBatch, SparseGradient};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight transcription of the objective.
pub fn naive_loss(
    input: &[f64],
    output: &[f64],
    dim: usize,
    pairs: &[(usize, usize)],
    negs: &[usize],
    k: usize,
) -> f64 {
    let row = |m: &[f64], i: usize| m[i * dim..(i + 1) * dim].to_vec();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let log_sigmoid = |x: f64| -(1.0 + (-x).exp()).ln();
    let mut total = 0.0;
    for (p, &(c, o)) in pairs.iter().enumerate() {
        let v = row(input, c);
        total -= log_sigmoid(dot(&row(output, o), &v));
        for &n in &negs[p * k..(p + 1) * k] {
            total -= log_sigmoid(-dot(&row(output, n), &v));
        }
    }
    total
}

pub struct Instance {
    pub params: ModelParams,
    pub pairs: Vec<(usize, usize)>,
    pub negs: Vec<usize>,
    pub k: usize,
}

impl Instance {
    /// V ≤ 10, d ≤ 8, K ≤ 4, entries in [-1, 1).
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = rng.random_range(2..=10);
        let d = rng.random_range(1..=8);
        let k = rng.random_range(1..=4);
        let n_pairs = rng.random_range(1..=6);
        let mut entries = || (0..v * d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let input = entries();
        let output = entries();
        let params = ModelParams::from_matrices(v, d, input, output).unwrap();
        let pairs = (0..n_pairs).map(|_| (rng.random_range(0..v), rng.random_range(0..v))).collect();
        let negs = (0..n_pairs * k).map(|_| rng.random_range(0..v)).collect();
        Instance { params, pairs, negs, k }
    }

    pub fn batch(&self) -> SgnsBatch {
        let pairs = self.pairs.iter().map(|&(c, o)| TrainingPair::new(c, o)).collect();
        SgnsBatch::new(pairs, self.negs.clone(), self.k).unwrap()
    }

    pub fn loss_at(&self, input: &[f64], output: &[f64]) -> f64 {
        naive_loss(input, output, self.params.dim(), &self.pairs, &self.negs, self.k)
    }
}

/// Max relative error of the analytic gradient against central differences.
pub fn fd_max_relative_error(inst: &Instance) -> f64 {
    const STEP: f64 = 1e-6;
    let (_, grad) = batch_loss_grad(&inst.params, &inst.batch()).unwrap();
    let d = inst.params.dim();
    let mut worst: f64 = 0.0;
    for matrix in 0..2 {
        let base: Vec<f64> = if matrix == 0 { inst.params.input() } else { inst.params.output() }.to_vec();
        for e in 0..base.len() {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[e] += STEP;
            minus[e] -= STEP;
            let (lp, lm) = if matrix == 0 {
                (inst.loss_at(&plus, inst.params.output()), inst.loss_at(&minus, inst.params.output()))
            } else {
                (inst.loss_at(inst.params.input(), &plus), inst.loss_at(inst.params.input(), &minus))
            };
            let numeric = (lp - lm) / (2.0 * STEP);
            let rows = if matrix == 0 { &grad.input_rows } else { &grad.output_rows };
            let analytic = rows.get(&(e / d)).map_or(0.0, |r| r[e % d]);
            let scale = analytic.abs().max(numeric.abs());
            let err = (analytic - numeric).abs();
            // Entries with no gradient: the perturbation must not move the loss.
            let rel = if scale < 1e-6 { err / 1e-6 } else { err / scale };
            worst = worst.max(rel);
        }
    }
    worst
}

/// Dense `(input, output)` matrices of a sparse gradient.
pub fn densify(g: &SparseGradient, rows: usize) -> (Vec<f64>, Vec<f64>) {
    let d = g.dim();
    let mut input = vec![0.0; rows * d];
    let mut output = vec![0.0; rows * d];
    for (&r, v) in &g.input_rows {
        input[r * d..(r + 1) * d].copy_from_slice(v);
    }
    for (&r, v) in &g.output_rows {
        output[r * d..(r + 1) * d].copy_from_slice(v);
    }
    (input, output)
}

pub fn dense_mean(grads: &[SparseGradient], rows: usize) -> (Vec<f64>, Vec<f64>) {
    let d = grads[0].dim();
    let mut input = vec![0.0; rows * d];
    let mut output = vec![0.0; rows * d];
    for g in grads {
        let (i, o) = densify(g, rows);
        input.iter_mut().zip(&i).for_each(|(a, b)| *a += b);
        output.iter_mut().zip(&o).for_each(|(a, b)| *a += b);
    }
    let n = grads.len() as f64;
    input.iter_mut().chain(output.iter_mut()).for_each(|x| *x /= n);
    (input, output)
}

/// A family of `1..=max_members` sparse gradients over `rows` rows.
pub fn random_family(rng: &mut ChaCha8Rng, rows: usize, dim: usize, max_members: usize) -> Vec<SparseGradient> {
    let members = rng.random_range(1..=max_members);
    (0..members)
        .map(|_| {
            let mut g = SparseGradient::new(dim);
            for _ in 0..rng.random_range(0..rows) {
                let r = rng.random_range(0..rows);
                let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
                if rng.random_bool(0.5) {
                    g.insert_input(r, v).unwrap();
                } else {
                    g.insert_output(r, v).unwrap();
                }
            }
            g
        })
        .collect()
}

/// Largest per-entry gap between the sparse aggregate and the dense mean.
pub fn aggregation_gap(family: &[SparseGradient], mean: &SparseGradient, rows: usize) -> f64 {
    let (ai, ao) = densify(mean, rows);
    let (ei, eo) = dense_mean(family, rows);
    ai.iter().chain(&ao).zip(ei.iter().chain(&eo)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}
