//! Running axiom instances against a model and reporting per-instance verdicts.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::axioms::{AxiomInstance, AxiomKind};
use super::eval::{eval_condition, BallSearch, Interpretation};
use crate::error::Result;
use crate::model::Operator;

/// Threshold below which an inf-type search counts as having found a witness.
pub const INF_THRESHOLD: f64 = 0.01;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WitnessEntry {
    pub var: usize,
    /// Row-major (re, im) pairs in the standard frame.
    pub entries: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AxiomReport {
    pub id: String,
    pub axiom: u32,
    pub kind: AxiomKind,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub expected_fail: bool,
    pub method: String,
    pub evaluations: u64,
    pub witness: Option<Vec<WitnessEntry>>,
    pub wall_time_ms: u64,
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub search: BallSearch,
    /// Tolerance for universal (sup-type and closed) instances.
    pub tol: f64,
    /// Threshold for existential (inf-type) instances.
    pub inf_threshold: f64,
    /// Axiom numbers known not to hold in the model under test.
    pub expected_fail: BTreeSet<u32>,
    /// Record wall-clock time; disable for byte-identical reports.
    pub timing: bool,
    pub include_witness: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            search: BallSearch::default(),
            tol: 1e-6,
            inf_threshold: INF_THRESHOLD,
            expected_fail: BTreeSet::new(),
            timing: true,
            include_witness: true,
        }
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn witness_entries(w: &[(usize, Operator)]) -> Vec<WitnessEntry> {
    w.iter()
        .map(|(i, op)| {
            let m = op.mat();
            let n = m.nrows();
            let entries = (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).map(|(r, c)| (m[(r, c)].re, m[(r, c)].im)).collect();
            WitnessEntry { var: *i, entries }
        })
        .collect()
}

/// Evaluates one instance with a seed derived from the run seed and the instance id.
pub fn run_instance(interp: &Interpretation, inst: &AxiomInstance, cfg: &SuiteConfig) -> Result<AxiomReport> {
    let start = Instant::now();
    let search = cfg.search.clone().with_seed(cfg.search.seed ^ fnv1a(&inst.id));
    let ev = eval_condition(interp, &inst.condition, &search)?;
    let tolerance = match inst.kind {
        AxiomKind::Universal => cfg.tol,
        AxiomKind::Existential => cfg.inf_threshold,
    };
    let value = ev.value;
    Ok(AxiomReport {
        id: inst.id.clone(),
        axiom: inst.axiom,
        kind: inst.kind,
        value,
        tolerance,
        pass: value.is_finite() && value <= tolerance,
        expected_fail: inst.finite_obstruction || cfg.expected_fail.contains(&inst.axiom),
        method: ev.method.to_string(),
        evaluations: ev.evaluations,
        witness: if cfg.include_witness { ev.witness.as_deref().map(witness_entries) } else { None },
        wall_time_ms: if cfg.timing { start.elapsed().as_millis() as u64 } else { 0 },
    })
}

/// Runs all instances (in parallel on the current rayon pool); output is sorted by (axiom, id).
pub fn run_suite(interp: &Interpretation, instances: &[AxiomInstance], cfg: &SuiteConfig) -> Result<Vec<AxiomReport>> {
    let detached = interp.detach();
    let mut out = instances
        .par_iter()
        .map_init(|| detached.attach(), |it, inst| run_instance(it, inst, cfg))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| (a.axiom, &a.id).cmp(&(b.axiom, &b.id)));
    Ok(out)
}

/// Summary counts: (passed, failed unexpectedly, failed as expected).
pub fn tally(reports: &[AxiomReport]) -> (usize, usize, usize) {
    let pass = reports.iter().filter(|r| r.pass).count();
    let unexpected = reports.iter().filter(|r| !r.pass && !r.expected_fail).count();
    let expected = reports.iter().filter(|r| !r.pass && r.expected_fail).count();
    (pass, unexpected, expected)
}
