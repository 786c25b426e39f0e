//! Adaptive, history-dependent state sources and trajectory bookkeeping.
//!
//! A source maps the experiment history (everything observed *before* the
//! current round) to the state prepared in the current round. The interface
//! is the measurability contract: `next_state` receives only the history, so
//! a strategy cannot react to the current round's measurement randomness or
//! outcome — those do not exist yet when it is called.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::designs::{MeasurementDesign, Outcome};
use crate::error::{Error, Result};
use crate::linalg::{norms, random_hermitian, DensityMatrix, HermMatrix};
use crate::projection::project_to_states;

/// One completed round: the round number, the observed outcome, and (in
/// process mode) the input index drawn that round.
#[derive(Clone, Debug)]
pub struct HistoryRecord {
    pub round: usize,
    pub outcome: Outcome,
    pub input_index: Option<Outcome>,
}

/// Ordered record of completed rounds.
#[derive(Clone, Debug, Default)]
pub struct History {
    records: Vec<HistoryRecord>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[HistoryRecord] {
        &self.records
    }

    /// Appends a completed round; rounds must arrive in order.
    pub fn push(&mut self, record: HistoryRecord) {
        assert_eq!(record.round, self.records.len() + 1, "rounds must be recorded in order");
        self.records.push(record);
    }

    /// The last `w` records (fewer if the history is shorter).
    pub fn window(&self, w: usize) -> &[HistoryRecord] {
        let start = self.records.len().saturating_sub(w);
        &self.records[start..]
    }
}

/// Derives a child seed from a parent seed and an index (SplitMix64
/// finalizer over `parent + (index+1)·golden`); the crate-wide stable hash
/// for seed trees.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    let mut z = parent.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// History-dependent state preparation strategies.
///
/// All strategies are deterministic functions of `(own seed, history)`; the
/// random-walk and adversarial variants keep internal caches so that the
/// usual sequential replay costs O(1) per round, but replaying any prefix
/// reproduces the identical trajectory.
#[derive(Clone, Debug)]
pub enum AdaptiveSource {
    /// Emits the same state every round.
    Iid { state: DensityMatrix },
    /// Pure state rotating in the (|0⟩,|1⟩) plane at angular rate `omega`
    /// per round: `|ψ(θ_t)⟩ = cos θ_t |0⟩ + sin θ_t |1⟩`, `θ_t = ω(t−1)`.
    Drift { dim: usize, omega: f64 },
    /// Mixes in a small seeded Hermitian perturbation each round and
    /// re-projects onto the density matrices.
    RandomWalk {
        initial: DensityMatrix,
        step: f64,
        seed: u64,
        cache: Option<(usize, DensityMatrix)>,
    },
    /// Prepares the basis-aligned state most orthogonal to the most frequent
    /// outcome of the last `window` rounds.
    Feedback {
        initial: DensityMatrix,
        window: usize,
        design: MeasurementDesign,
    },
    /// Picks, per round, the menu state farthest (trace distance) from the
    /// running linear estimate reconstructed from the observed history.
    Adversarial {
        menu: Vec<DensityMatrix>,
        design: MeasurementDesign,
        cached_sum: HermMatrix,
        cached_rounds: usize,
    },
}

impl AdaptiveSource {
    pub fn iid(state: DensityMatrix) -> Self {
        AdaptiveSource::Iid { state }
    }

    pub fn drift(dim: usize, omega: f64) -> Self {
        assert!(dim >= 2, "drift rotates in a 2-plane");
        AdaptiveSource::Drift { dim, omega }
    }

    pub fn random_walk(initial: DensityMatrix, step: f64, seed: u64) -> Self {
        AdaptiveSource::RandomWalk { initial, step, seed, cache: None }
    }

    pub fn feedback(initial: DensityMatrix, window: usize, design: MeasurementDesign) -> Self {
        AdaptiveSource::Feedback { initial, window, design }
    }

    pub fn adversarial(menu: Vec<DensityMatrix>, design: MeasurementDesign) -> Self {
        assert!(!menu.is_empty(), "adversarial menu must be nonempty");
        let dim = menu[0].dim();
        AdaptiveSource::Adversarial {
            menu,
            design,
            cached_sum: HermMatrix::zeros(dim),
            cached_rounds: 0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AdaptiveSource::Iid { .. } => "iid",
            AdaptiveSource::Drift { .. } => "drift",
            AdaptiveSource::RandomWalk { .. } => "random-walk",
            AdaptiveSource::Feedback { .. } => "feedback",
            AdaptiveSource::Adversarial { .. } => "adversarial",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            AdaptiveSource::Iid { state } => state.dim(),
            AdaptiveSource::Drift { dim, .. } => *dim,
            AdaptiveSource::RandomWalk { initial, .. } => initial.dim(),
            AdaptiveSource::Feedback { initial, .. } => initial.dim(),
            AdaptiveSource::Adversarial { menu, .. } => menu[0].dim(),
        }
    }

    /// The state prepared for round `history.len() + 1`.
    pub fn next_state(&mut self, history: &History) -> DensityMatrix {
        let t = history.len() + 1;
        match self {
            AdaptiveSource::Iid { state } => state.clone(),

            AdaptiveSource::Drift { dim, omega } => {
                let theta = *omega * (t as f64 - 1.0);
                let mut v = vec![Complex64::new(0.0, 0.0); *dim];
                v[0] = Complex64::new(theta.cos(), 0.0);
                v[1] = Complex64::new(theta.sin(), 0.0);
                DensityMatrix::pure(&v).expect("unit vector")
            }

            AdaptiveSource::RandomWalk { initial, step, seed, cache } => {
                let mut current = match cache.take() {
                    Some((round, state)) if round < t => (round, state),
                    _ => (1, initial.clone()),
                };
                while current.0 < t {
                    let next_round = current.0 + 1;
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(*seed, next_round as u64));
                    let mut m = current.1.matrix().clone();
                    m.add_scaled(*step, &random_hermitian(&mut rng, m.dim()));
                    let projected = project_to_states(&m).matrix;
                    current = (next_round, DensityMatrix::new_unchecked(projected));
                }
                *cache = Some(current.clone());
                current.1
            }

            AdaptiveSource::Feedback { initial, window, design } => {
                if *window == 0 || history.is_empty() {
                    return initial.clone();
                }
                let mut counts: BTreeMap<&Outcome, usize> = BTreeMap::new();
                for rec in history.window(*window) {
                    *counts.entry(&rec.outcome).or_insert(0) += 1;
                }
                // strict max over ordered keys: smallest outcome wins ties
                let (most_frequent, _) = counts
                    .iter()
                    .fold(None::<(&Outcome, usize)>, |best, (&k, &c)| match best {
                        Some((_, bc)) if bc >= c => best,
                        _ => Some((k, c)),
                    })
                    .expect("nonempty window");
                let p = design.projector(most_frequent);
                let d = p.dim();
                let mut complement = HermMatrix::identity(d);
                complement.add_scaled(-1.0, &p);
                // column with the largest orthogonal mass; |C e_j|² = C_jj
                let j = (0..d)
                    .max_by(|&a, &b| {
                        complement
                            .entry(a, a)
                            .re
                            .partial_cmp(&complement.entry(b, b).re)
                            .unwrap()
                            .then(b.cmp(&a))
                    })
                    .unwrap();
                let column: Vec<Complex64> = (0..d).map(|i| complement.entry(i, j)).collect();
                DensityMatrix::pure(&column).expect("complement of rank-1 projector is nonzero for d >= 2")
            }

            AdaptiveSource::Adversarial { menu, design, cached_sum, cached_rounds } => {
                if history.len() < *cached_rounds {
                    // replay from scratch (history was reset)
                    *cached_sum = HermMatrix::zeros(menu[0].dim());
                    *cached_rounds = 0;
                }
                for rec in &history.records()[*cached_rounds..] {
                    cached_sum.add_scaled(1.0, &design.single_shot_estimate(&rec.outcome));
                }
                *cached_rounds = history.len();
                if history.is_empty() {
                    return menu[0].clone();
                }
                let estimate = cached_sum.scale(1.0 / history.len() as f64);
                let mut best = 0usize;
                let mut best_distance = f64::NEG_INFINITY;
                for (i, candidate) in menu.iter().enumerate() {
                    let mut delta = candidate.matrix().clone();
                    delta.add_scaled(-1.0, &estimate);
                    let distance = norms(&delta).trace;
                    if distance > best_distance {
                        best_distance = distance;
                        best = i;
                    }
                }
                menu[best].clone()
            }
        }
    }
}

/// The five built-in strategies with default parameters, sharing `dim` and
/// a seed. Feedback and the adversary take the (public, fixed) measurement
/// design so they can map past outcomes to projectors; nothing from the
/// current round is ever visible to them.
pub fn builtin_sources(dim: usize, seed: u64, design: &MeasurementDesign) -> Vec<AdaptiveSource> {
    let uniform = DensityMatrix::uniform_superposition(dim);
    let mut menu: Vec<DensityMatrix> = (0..dim)
        .map(|k| DensityMatrix::basis_state(dim, k).expect("k < dim"))
        .collect();
    menu.push(uniform.clone());
    vec![
        AdaptiveSource::iid(uniform.clone()),
        AdaptiveSource::drift(dim, 0.001),
        AdaptiveSource::random_walk(uniform.clone(), 0.02, derive_seed(seed, 2)),
        AdaptiveSource::feedback(uniform, 16, design.clone()),
        AdaptiveSource::adversarial(menu, design.clone()),
    ]
}

/// Running sum of emitted states; `sum/count` is the trajectory average.
#[derive(Clone, Debug)]
pub struct TrajectoryAverage {
    sum: HermMatrix,
    count: usize,
}

impl TrajectoryAverage {
    pub fn new(dim: usize) -> Self {
        Self { sum: HermMatrix::zeros(dim), count: 0 }
    }

    pub fn update(&mut self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.sum.dim() {
            return Err(Error::DimensionMismatch {
                context: format!("trajectory average dim {} vs state dim {}", self.sum.dim(), rho.dim()),
            });
        }
        self.sum.add_scaled(1.0, rho.matrix());
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// The average state; a convex mixture of valid states.
    pub fn average(&self) -> DensityMatrix {
        assert!(self.count > 0, "average of zero states");
        DensityMatrix::new_unchecked(self.sum.scale(1.0 / self.count as f64))
    }
}
