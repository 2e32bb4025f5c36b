//! FederatedSGD orchestration and the centralized baseline.
//!
//! A round: every node draws its next local batch and computes the SGNS
//! gradient against the same parameter snapshot; the coordinator averages
//! the gradients in ascending node order, applies the step once and hands
//! the new parameters to every node. Nodes never exchange data, only sparse
//! gradients.

mod config;
mod record;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::{TrainingConfig, CONFIG_KEYS};
pub use record::{loss_csv, parse_loss_csv, LossRecord, LossScope, LOSS_CSV_HEADER};

use crate::corpus::{index_counts, PairStream};
use crate::error::{Error, Result};
use crate::eval::{heldout_mask, validation_loss, HeldoutSet};
use crate::sgns::{
    apply_update, batch_loss_grad, build_negative_table, init_params, ModelParams, NegativeTable, SgnsBatch,
    SparseGradient,
};
use crate::vocab::GlobalVocabulary;

// ChaCha streams carved out of each node's seed.
const HELDOUT_STREAM: u64 = 1;
const WINDOW_STREAM: u64 = 2;
const NEGATIVE_STREAM: u64 = 3;

fn node_rng(seed: u64, node: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ node as u64);
    rng.set_stream(stream);
    rng
}

/// A participant: its private pair stream, its own noise distribution and
/// held-out pairs. Only gradients leave this struct.
#[derive(Debug, Clone)]
pub struct NodeState {
    id: usize,
    pairs: PairStream,
    table: NegativeTable,
    negative_rng: ChaCha8Rng,
    heldout: HeldoutSet,
    samples_processed: u64,
}

impl NodeState {
    /// The noise table comes from the node's own counts, so a node never
    /// learns another node's frequencies.
    pub fn new(id: usize, indices: Vec<usize>, vocab_size: usize, config: &TrainingConfig) -> Result<Self> {
        if indices.len() < 2 {
            return Err(Error::DatasetTooShort { node: id });
        }
        let counts = index_counts(&indices, vocab_size)?;
        let table = build_negative_table(&counts, config.negative_power)?;

        let mut heldout_rng = node_rng(config.seed, id, HELDOUT_STREAM);
        let mask = heldout_mask(indices.len(), config.heldout_fraction, &mut heldout_rng);
        let heldout =
            HeldoutSet::from_mask(&indices, &mask, config.window, config.negatives, &table, &mut heldout_rng)?;
        let pairs = PairStream::new(
            indices,
            config.window,
            config.dynamic_window,
            mask,
            node_rng(config.seed, id, WINDOW_STREAM),
        )?;
        Ok(NodeState {
            id,
            pairs,
            table,
            negative_rng: node_rng(config.seed, id, NEGATIVE_STREAM),
            heldout,
            samples_processed: 0,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    /// Completed passes over the node's pair stream.
    pub fn epoch(&self) -> u64 {
        self.pairs.epoch()
    }

    pub fn samples_processed(&self) -> u64 {
        self.samples_processed
    }

    pub fn heldout(&self) -> &HeldoutSet {
        &self.heldout
    }

    pub fn next_batch(&mut self, batch_size: usize, negatives: usize) -> SgnsBatch {
        let pairs = (0..batch_size).map_while(|_| self.pairs.next_pair().map(|(p, _)| p)).collect();
        self.samples_processed += batch_size as u64;
        SgnsBatch::sample(pairs, negatives, &self.table, &mut self.negative_rng)
    }

    fn local_step(&mut self, snapshot: &ModelParams, round: u64, config: &TrainingConfig) -> Result<GradientMessage> {
        let batch = self.next_batch(config.batch_size, config.negatives);
        let (loss, gradient) = batch_loss_grad(snapshot, &batch).map_err(|e| Error::NodeFailure {
            node: self.id,
            round,
            reason: e.to_string(),
        })?;
        Ok(GradientMessage { node_id: self.id, round, gradient, samples_processed: batch.len() as u64, loss })
    }
}

/// What a node sends to the coordinator each round.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMessage {
    pub node_id: usize,
    pub round: u64,
    pub gradient: SparseGradient,
    pub samples_processed: u64,
    /// Training loss of the local batch.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: u64,
    pub aggregated_row_count: usize,
    pub wall_time: Duration,
    pub samples_per_node: Vec<u64>,
    pub train_loss: f64,
}

/// Row-wise mean of the gradients, absent rows counting as zero. Rows are
/// summed in the order given and divided by the number of gradients, which
/// matches averaging the densified matrices entry by entry.
pub fn aggregate_gradients<'a, I>(grads: I) -> Result<SparseGradient>
where
    I: IntoIterator<Item = &'a SparseGradient>,
{
    let mut grads = grads.into_iter().peekable();
    let dim = grads.peek().ok_or_else(|| Error::Config("no gradients to aggregate".into()))?.dim();
    let mut input: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut output: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut n = 0usize;

    fn accumulate(acc: &mut BTreeMap<usize, Vec<f64>>, rows: &BTreeMap<usize, Vec<f64>>) {
        for (&r, delta) in rows {
            match acc.get_mut(&r) {
                Some(sum) => sum.iter_mut().zip(delta).for_each(|(s, d)| *s += d),
                None => {
                    acc.insert(r, delta.clone());
                }
            }
        }
    }

    for g in grads {
        if g.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: g.dim() });
        }
        accumulate(&mut input, &g.input_rows);
        accumulate(&mut output, &g.output_rows);
        n += 1;
    }

    let n = n as f64;
    let mut mean = SparseGradient::new(dim);
    for (r, mut sum) in input {
        sum.iter_mut().for_each(|x| *x /= n);
        mean.insert_input(r, sum)?;
    }
    for (r, mut sum) in output {
        sum.iter_mut().for_each(|x| *x /= n);
        mean.insert_output(r, sum)?;
    }
    Ok(mean)
}

/// One synchronous round. On any node failure the round is abandoned and
/// `params` is left exactly as it was.
pub fn federated_round(
    params: &mut ModelParams,
    nodes: &mut [NodeState],
    config: &TrainingConfig,
    round: u64,
) -> Result<(RoundReport, Vec<GradientMessage>)> {
    let started = Instant::now();
    let snapshot: &ModelParams = params;
    let mut messages =
        nodes.par_iter_mut().map(|node| node.local_step(snapshot, round, config)).collect::<Result<Vec<_>>>()?;
    messages.sort_by_key(|m| m.node_id);

    for m in &messages {
        if m.round != round {
            return Err(Error::NodeFailure {
                node: m.node_id,
                round,
                reason: format!("gradient is for round {}", m.round),
            });
        }
    }
    let mean = aggregate_gradients(messages.iter().map(|m| &m.gradient))?;
    apply_update(params, &mean, config.learning_rate)?;

    let report = RoundReport {
        round,
        aggregated_row_count: mean.row_count(),
        wall_time: started.elapsed(),
        samples_per_node: messages.iter().map(|m| m.samples_processed).collect(),
        train_loss: messages.iter().map(|m| m.loss).sum(),
    };
    Ok((report, messages))
}

/// Final parameters and validation history of a run.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub params: ModelParams,
    pub losses: Vec<LossRecord>,
    pub iterations: u64,
    pub samples_processed: u64,
}

fn global_validation(params: &ModelParams, nodes: &[NodeState], iteration: u64) -> Result<LossRecord> {
    let mut loss = 0.0;
    for node in nodes {
        loss += validation_loss(params, node.heldout())?;
    }
    Ok(LossRecord {
        iteration,
        epoch: nodes.iter().map(NodeState::epoch).min().unwrap_or(0),
        scope: LossScope::Global,
        validation_loss: loss,
    })
}

fn make_nodes(datasets: &[Vec<usize>], vocab: &GlobalVocabulary, config: &TrainingConfig) -> Result<Vec<NodeState>> {
    if vocab.is_empty() {
        return Err(Error::Config("vocabulary is empty".into()));
    }
    datasets.iter().enumerate().map(|(id, d)| NodeState::new(id, d.clone(), vocab.len(), config)).collect()
}

pub fn run_federated(
    datasets: &[Vec<usize>],
    vocab: &GlobalVocabulary,
    config: &TrainingConfig,
) -> Result<TrainingRun> {
    run_federated_with(datasets, vocab, config, |_| {})
}

/// [`run_federated`], calling `on_record` at every validation event.
pub fn run_federated_with(
    datasets: &[Vec<usize>],
    vocab: &GlobalVocabulary,
    config: &TrainingConfig,
    mut on_record: impl FnMut(&LossRecord),
) -> Result<TrainingRun> {
    config.validate()?;
    if datasets.len() != config.nodes {
        return Err(Error::Config(format!("{} datasets given for {} nodes", datasets.len(), config.nodes)));
    }
    let mut nodes = make_nodes(datasets, vocab, config)?;
    let mut params = init_params(vocab.len(), config.dim, config.seed)?;
    let mut losses = Vec::new();
    let mut samples = 0;

    for round in 1..=config.total_iterations {
        let (report, _) = federated_round(&mut params, &mut nodes, config, round)?;
        samples += report.samples_per_node.iter().sum::<u64>();
        if round % config.validation_interval == 0 {
            let record = global_validation(&params, &nodes, round)?;
            on_record(&record);
            losses.push(record);
        }
    }
    Ok(TrainingRun { params, losses, iterations: config.total_iterations, samples_processed: samples })
}

pub fn run_centralized(dataset: &[usize], vocab: &GlobalVocabulary, config: &TrainingConfig) -> Result<TrainingRun> {
    run_centralized_with(dataset, vocab, config, |_| {})
}

/// Plain sequential SGD over a single pooled dataset: one batch, one step
/// per iteration. Seeds, held-out split and logging match node 0 of the
/// federated path.
pub fn run_centralized_with(
    dataset: &[usize],
    vocab: &GlobalVocabulary,
    config: &TrainingConfig,
    mut on_record: impl FnMut(&LossRecord),
) -> Result<TrainingRun> {
    config.validate()?;
    let mut nodes = make_nodes(std::slice::from_ref(&dataset.to_vec()), vocab, config)?;
    let mut params = init_params(vocab.len(), config.dim, config.seed)?;
    let mut losses = Vec::new();

    for iteration in 1..=config.total_iterations {
        let batch = nodes[0].next_batch(config.batch_size, config.negatives);
        let (_, grad) = batch_loss_grad(&params, &batch)?;
        apply_update(&mut params, &grad, config.learning_rate)?;
        if iteration % config.validation_interval == 0 {
            let record = global_validation(&params, &nodes, iteration)?;
            on_record(&record);
            losses.push(record);
        }
    }
    Ok(TrainingRun {
        params,
        losses,
        iterations: config.total_iterations,
        samples_processed: nodes[0].samples_processed(),
    })
}
