//! The state-tomography measurement loop: Born sampling, outcome recording,
//! histogram aggregation, and assembly of the time-averaged linear estimator.

use std::collections::BTreeMap;

use rand::Rng;

use crate::designs::{MeasurementDesign, Outcome};
use crate::error::{Error, Result};
use crate::linalg::{partial_trace, DensityMatrix, HermMatrix};
use crate::sources::{AdaptiveSource, History, HistoryRecord, TrajectoryAverage};

/// Probabilities may undershoot zero or missum by at most this much before
/// the state is rejected as unphysical; smaller deviations are clipped and
/// renormalized (float dust from eigenprojections).
pub const PROBABILITY_TOL: f64 = 1e-9;

/// Outcome counts for a run. Global designs use a dense count vector; local
/// tensor designs keep the full per-round multi-index list (factor marginals
/// alone do not determine the linear estimator) plus factor-wise marginal
/// counts.
#[derive(Clone, Debug)]
pub enum OutcomeHistogram {
    Dense {
        counts: Vec<u64>,
        total: u64,
    },
    MultiIndex {
        factors: usize,
        arity: usize,
        outcomes: Vec<Vec<u8>>,
        marginals: Vec<Vec<u64>>,
        total: u64,
    },
}

impl OutcomeHistogram {
    /// Histogram shaped for a single design's outcome space.
    pub fn for_design(design: &MeasurementDesign) -> Self {
        if let Some(locals) = design.local_projectors() {
            let n = design.qubits().expect("local design");
            OutcomeHistogram::MultiIndex {
                factors: n,
                arity: locals.len(),
                outcomes: Vec::new(),
                marginals: vec![vec![0; locals.len()]; n],
                total: 0,
            }
        } else {
            OutcomeHistogram::Dense {
                counts: vec![0; design.num_outcomes() as usize],
                total: 0,
            }
        }
    }

    /// Histogram over the joint (input, output) space of a process run.
    pub fn for_joint(input: &MeasurementDesign, output: &MeasurementDesign) -> Self {
        if input.is_local() {
            let n_in = input.qubits().expect("local design");
            let n_out = output.qubits().expect("local design");
            let arity = input.local_projectors().expect("local").len();
            OutcomeHistogram::MultiIndex {
                factors: n_in + n_out,
                arity,
                outcomes: Vec::new(),
                marginals: vec![vec![0; arity]; n_in + n_out],
                total: 0,
            }
        } else {
            let bins = (input.num_outcomes() * output.num_outcomes()) as usize;
            OutcomeHistogram::Dense { counts: vec![0; bins], total: 0 }
        }
    }

    pub fn total(&self) -> u64 {
        match self {
            OutcomeHistogram::Dense { total, .. } => *total,
            OutcomeHistogram::MultiIndex { total, .. } => *total,
        }
    }

    /// Dense counts (global designs).
    pub fn counts(&self) -> Option<&[u64]> {
        match self {
            OutcomeHistogram::Dense { counts, .. } => Some(counts),
            OutcomeHistogram::MultiIndex { .. } => None,
        }
    }

    /// Factor-wise marginal counts (local designs).
    pub fn marginals(&self) -> Option<&[Vec<u64>]> {
        match self {
            OutcomeHistogram::MultiIndex { marginals, .. } => Some(marginals),
            OutcomeHistogram::Dense { .. } => None,
        }
    }

    pub fn record_index(&mut self, index: usize) {
        match self {
            OutcomeHistogram::Dense { counts, total } => {
                counts[index] += 1;
                *total += 1;
            }
            OutcomeHistogram::MultiIndex { .. } => panic!("dense record on multi-index histogram"),
        }
    }

    pub fn record_multi(&mut self, multi: &[u8]) {
        match self {
            OutcomeHistogram::MultiIndex { factors, arity, outcomes, marginals, total } => {
                assert_eq!(multi.len(), *factors, "multi-index arity mismatch");
                for (slot, &k) in multi.iter().enumerate() {
                    assert!((k as usize) < *arity);
                    marginals[slot][k as usize] += 1;
                }
                outcomes.push(multi.to_vec());
                *total += 1;
            }
            OutcomeHistogram::Dense { .. } => panic!("multi-index record on dense histogram"),
        }
    }

    /// Records a state-tomography outcome.
    pub fn record(&mut self, outcome: &Outcome) {
        match outcome {
            Outcome::Global(k) => self.record_index(*k),
            Outcome::Local(ks) => self.record_multi(ks),
        }
    }

    /// Multi-index counts grouped into the full joint histogram
    /// (deterministic order).
    pub fn grouped(&self) -> Option<BTreeMap<Vec<u8>, u64>> {
        match self {
            OutcomeHistogram::MultiIndex { outcomes, .. } => {
                let mut map = BTreeMap::new();
                for o in outcomes {
                    *map.entry(o.clone()).or_insert(0u64) += 1;
                }
                Some(map)
            }
            OutcomeHistogram::Dense { .. } => None,
        }
    }
}

/// Time-averaged linear estimator `(1/N) Σ_t ρ̂_t`; unit trace by
/// construction of the single-shot estimates.
#[derive(Clone, Debug)]
pub struct LinearEstimate {
    pub matrix: HermMatrix,
    pub rounds: u64,
}

/// Everything a state-tomography run produces.
#[derive(Debug)]
pub struct TomographyRun {
    pub histogram: OutcomeHistogram,
    pub linear: LinearEstimate,
    pub average: TrajectoryAverage,
    pub history: History,
}

fn sample_from_probabilities<R: Rng>(probs: &mut [f64], rng: &mut R) -> Result<usize> {
    let mut sum = 0.0;
    for p in probs.iter_mut() {
        if *p < -PROBABILITY_TOL {
            return Err(Error::NegativeProbability { value: *p });
        }
        if *p < 0.0 {
            *p = 0.0;
        }
        sum += *p;
    }
    if (sum - 1.0).abs() > PROBABILITY_TOL {
        return Err(Error::InvalidState {
            reason: format!("outcome probabilities sum to {sum:.12}, not 1"),
        });
    }
    let u: f64 = rng.gen::<f64>() * sum;
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(k);
        }
    }
    Ok(probs.len() - 1)
}

/// Contracts the first qubit of `sigma` (dimension `2h`) against a 2×2
/// rank-1 projector: `out[p,q] = Σ_{a,b} P[b,a] σ[(a,p),(b,q)]`.
fn contract_first_qubit(sigma: &HermMatrix, projector: &HermMatrix) -> HermMatrix {
    let half = sigma.dim() / 2;
    let mut out = nalgebra::DMatrix::zeros(half, half);
    for a in 0..2 {
        for b in 0..2 {
            let w = projector.entry(b, a);
            if w.norm_sqr() == 0.0 {
                continue;
            }
            for p in 0..half {
                for q in 0..half {
                    out[(p, q)] += w * sigma.entry(a * half + p, b * half + q);
                }
            }
        }
    }
    HermMatrix::from_hermitian_unchecked(out)
}

/// Draws one outcome from the Born distribution `P(k) = (d/M) tr(P_k ρ)`.
///
/// Local tensor designs are sampled sequentially qubit by qubit through the
/// conditional marginals (partial traces); factor-wise independent sampling
/// would be wrong for entangled states.
pub fn born_sample<R: Rng>(
    design: &MeasurementDesign,
    rho: &DensityMatrix,
    rng: &mut R,
) -> Result<Outcome> {
    if rho.dim() != design.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("state dim {} vs design dim {}", rho.dim(), design.dim()),
        });
    }
    match design.global_projectors() {
        Some(projectors) => {
            let w = design.povm_weight();
            let mut probs: Vec<f64> =
                projectors.iter().map(|p| w * p.trace_product(rho.matrix())).collect();
            let k = sample_from_probabilities(&mut probs, rng)?;
            Ok(Outcome::Global(k))
        }
        None => {
            let locals = design.local_projectors().expect("local design");
            let n = design.qubits().expect("local design");
            let m = locals.len() as f64;
            let mut sigma = rho.matrix().clone();
            let mut ks = Vec::with_capacity(n);
            for qubit in 0..n {
                let remaining = n - qubit;
                let first = if remaining == 1 {
                    sigma.clone()
                } else {
                    partial_trace(&sigma, &[2, 1 << (remaining - 1)], &[1])?
                };
                let mut probs: Vec<f64> = locals
                    .iter()
                    .map(|p| (2.0 / m) * p.trace_product(&first))
                    .collect();
                let k = sample_from_probabilities(&mut probs, rng)?;
                ks.push(k as u8);
                if remaining > 1 {
                    let contracted = contract_first_qubit(&sigma, &locals[k]);
                    let tr = contracted.trace();
                    if tr <= 0.0 {
                        return Err(Error::InvalidState {
                            reason: "conditional state has nonpositive trace".into(),
                        });
                    }
                    sigma = contracted.scale(1.0 / tr);
                }
            }
            Ok(Outcome::Local(ks))
        }
    }
}

/// Runs the measurement loop for `rounds` rounds: each round the source is
/// called with the history *before* any sampling, the emitted state is
/// measured by Born's rule, and the single-shot estimate is accumulated.
pub fn run_state_tomography<R: Rng>(
    source: &mut AdaptiveSource,
    design: &MeasurementDesign,
    rounds: u64,
    rng: &mut R,
) -> Result<TomographyRun> {
    if rounds == 0 {
        return Err(Error::Config {
            field: "rounds".into(),
            message: "at least one round is required".into(),
        });
    }
    if source.dim() != design.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("source dim {} vs design dim {}", source.dim(), design.dim()),
        });
    }
    let d = design.dim();
    let mut histogram = OutcomeHistogram::for_design(design);
    let mut average = TrajectoryAverage::new(d);
    let mut history = History::new();
    let mut sum = HermMatrix::zeros(d);

    for t in 1..=rounds {
        let rho_t = source.next_state(&history);
        average.update(&rho_t)?;
        let outcome = born_sample(design, &rho_t, rng)?;
        sum.add_scaled(1.0, &design.single_shot_estimate(&outcome));
        histogram.record(&outcome);
        history.push(HistoryRecord { round: t as usize, outcome, input_index: None });
    }

    let linear = LinearEstimate { matrix: sum.scale(1.0 / rounds as f64), rounds };
    Ok(TomographyRun { histogram, linear, average, history })
}

/// Rebuilds the linear estimator from aggregate statistics:
/// `L̂ = Σ_k f_k ρ̂_k`. Identical (up to float associativity) to the
/// per-round average for the same outcome sequence; local designs use the
/// full multi-index histogram.
pub fn linear_from_histogram(
    design: &MeasurementDesign,
    histogram: &OutcomeHistogram,
) -> Result<LinearEstimate> {
    let total = histogram.total();
    if total == 0 {
        return Err(Error::Config {
            field: "histogram".into(),
            message: "histogram is empty".into(),
        });
    }
    let d = design.dim();
    let mut sum = HermMatrix::zeros(d);
    match histogram {
        OutcomeHistogram::Dense { counts, .. } => {
            if design.is_local() {
                return Err(Error::InvalidOutcome {
                    context: "dense histogram paired with a local design".into(),
                });
            }
            if counts.len() != design.num_outcomes() as usize {
                return Err(Error::DimensionMismatch {
                    context: format!(
                        "histogram bins {} vs design outcomes {}",
                        counts.len(),
                        design.num_outcomes()
                    ),
                });
            }
            for (k, &c) in counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let est = design.single_shot_estimate(&Outcome::Global(k));
                sum.add_scaled(c as f64 / total as f64, &est);
            }
        }
        OutcomeHistogram::MultiIndex { .. } => {
            if !design.is_local() {
                return Err(Error::InvalidOutcome {
                    context: "multi-index histogram paired with a global design".into(),
                });
            }
            for (multi, c) in histogram.grouped().expect("multi-index histogram") {
                let est = design.single_shot_estimate(&Outcome::Local(multi));
                sum.add_scaled(c as f64 / total as f64, &est);
            }
        }
    }
    Ok(LinearEstimate { matrix: sum, rounds: total })
}
