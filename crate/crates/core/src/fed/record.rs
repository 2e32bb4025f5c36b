use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const LOSS_CSV_HEADER: &str = "iteration,epoch,node,loss";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossScope {
    Global,
    Node(usize),
}

impl fmt::Display for LossScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossScope::Global => f.write_str("global"),
            LossScope::Node(id) => write!(f, "{id}"),
        }
    }
}

/// One validation event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub iteration: u64,
    pub epoch: u64,
    pub scope: LossScope,
    pub validation_loss: f64,
}

pub fn loss_csv(records: &[LossRecord]) -> String {
    let mut out = format!("{LOSS_CSV_HEADER}\n");
    for r in records {
        let _ = writeln!(out, "{},{},{},{}", r.iteration, r.epoch, r.scope, r.validation_loss);
    }
    out
}

pub fn parse_loss_csv(origin: &str, text: &str) -> Result<Vec<LossRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == LOSS_CSV_HEADER => {}
        _ => return Err(Error::parse(origin, 1, format!("expected header `{LOSS_CSV_HEADER}`"))),
    }
    let mut records = Vec::new();
    for (n, line) in lines {
        let bad = |what: &str| Error::parse(origin, n + 1, format!("bad {what}"));
        let fields: Vec<&str> = line.split(',').collect();
        let [it, epoch, node, loss] = fields[..] else {
            return Err(bad("row shape"));
        };
        let scope = match node {
            "global" => LossScope::Global,
            id => LossScope::Node(id.parse().map_err(|_| bad("node"))?),
        };
        let validation_loss: f64 = loss.parse().map_err(|_| bad("loss"))?;
        if !validation_loss.is_finite() || validation_loss < 0.0 {
            return Err(bad("loss"));
        }
        records.push(LossRecord {
            iteration: it.parse().map_err(|_| bad("iteration"))?,
            epoch: epoch.parse().map_err(|_| bad("epoch"))?,
            scope,
            validation_loss,
        });
    }
    Ok(records)
}
