//! Process tomography: Kraus channels, normalized Choi matrices, adaptive
//! channel sources, the joint input/output measurement loop, Choi single-shot
//! estimators, and the diamond-norm bound.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::designs::{MeasurementDesign, Outcome};
use crate::error::{Error, Result};
use crate::linalg::{norms, tensor, DensityMatrix, HermMatrix};
use crate::sources::{History, HistoryRecord, TrajectoryAverage};
use crate::state_tomo::{born_sample, LinearEstimate, OutcomeHistogram};

/// Trace preservation is enforced to this tolerance at construction.
pub const CHANNEL_TOL: f64 = 1e-10;
/// Choi marginal constraint tolerance.
pub const CHOI_MARGINAL_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A quantum channel in Kraus form; completely positive by construction,
/// trace preserving by the `Σ K† K = 1` check.
#[derive(Clone, Debug)]
pub struct Channel {
    kraus: Vec<DMatrix<Complex64>>,
    dim: usize,
}

impl Channel {
    pub fn new(kraus: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidChannel { reason: "no Kraus operators".into() });
        }
        let dim = kraus[0].nrows();
        if dim == 0 || kraus.iter().any(|k| k.nrows() != dim || k.ncols() != dim) {
            return Err(Error::InvalidChannel {
                reason: "Kraus operators must be square and share one dimension".into(),
            });
        }
        let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
        for k in &kraus {
            acc += k.adjoint() * k;
        }
        let dev = (&acc - DMatrix::<Complex64>::identity(dim, dim)).norm();
        if dev > CHANNEL_TOL {
            return Err(Error::InvalidChannel {
                reason: format!("not trace preserving (|Σ K†K − 1|_F = {dev:.3e})"),
            });
        }
        Ok(Self { kraus, dim })
    }

    pub fn identity(dim: usize) -> Self {
        Self { kraus: vec![DMatrix::identity(dim, dim)], dim }
    }

    /// Unitary conjugation `X ↦ U X U†`.
    pub fn unitary(u: DMatrix<Complex64>) -> Result<Self> {
        let dim = u.nrows();
        let dev = (u.adjoint() * &u - DMatrix::<Complex64>::identity(dim, dim)).norm();
        if u.nrows() != u.ncols() || dev > CHANNEL_TOL {
            return Err(Error::InvalidChannel {
                reason: format!("matrix is not unitary (|U†U − 1|_F = {dev:.3e})"),
            });
        }
        Ok(Self { kraus: vec![u], dim })
    }

    /// Depolarizing channel `X ↦ p·X + (1−p)·tr(X)·1/d`, realized through
    /// the Heisenberg–Weyl Kraus set.
    pub fn depolarizing(dim: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidChannel {
                reason: format!("depolarizing parameter {p} outside [0, 1]"),
            });
        }
        let d = dim;
        let df = d as f64;
        let w0 = (p + (1.0 - p) / (df * df)).sqrt();
        let w = ((1.0 - p) / (df * df)).sqrt();
        let omega = std::f64::consts::TAU / df;
        let mut kraus = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let weight = if i == 0 && j == 0 { w0 } else { w };
                if weight == 0.0 {
                    continue;
                }
                // W_{ij} = X^i Z^j : |k⟩ ↦ ω^{jk} |k+i mod d⟩
                let mut m = DMatrix::<Complex64>::zeros(d, d);
                for k in 0..d {
                    let phase = omega * (j * k) as f64;
                    m[((k + i) % d, k)] = Complex64::new(phase.cos(), phase.sin()) * weight;
                }
                kraus.push(m);
            }
        }
        Channel::new(kraus)
    }

    /// Rotation by `theta` in the (|0⟩,|1⟩) plane, identity elsewhere.
    pub fn plane_rotation(dim: usize, theta: f64) -> Self {
        let mut u = DMatrix::<Complex64>::identity(dim, dim);
        u[(0, 0)] = Complex64::new(theta.cos(), 0.0);
        u[(0, 1)] = Complex64::new(-theta.sin(), 0.0);
        u[(1, 0)] = Complex64::new(theta.sin(), 0.0);
        u[(1, 1)] = Complex64::new(theta.cos(), 0.0);
        Self { kraus: vec![u], dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus(&self) -> &[DMatrix<Complex64>] {
        &self.kraus
    }

    fn apply_raw(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            out += k * m * k.adjoint();
        }
        out
    }

    /// `Σ K σ K†` on a Hermitian operator.
    pub fn apply_herm(&self, h: &HermMatrix) -> HermMatrix {
        HermMatrix::from_hermitian_unchecked(self.apply_raw(h.as_matrix()))
    }

    /// Channel action on a state; CPTP, so the output is a state.
    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        DensityMatrix::new_unchecked(self.apply_herm(rho.matrix()))
    }
}

/// Normalized Choi matrix: a state on dimension `d²` that is PSD with unit
/// trace and maximally mixed marginal on the input copy.
#[derive(Clone, Debug)]
pub struct ChoiMatrix {
    state: DensityMatrix,
    system_dim: usize,
}

impl ChoiMatrix {
    /// Validates the marginal constraint `tr₂(ω) = 1/d` on top of the state
    /// invariants.
    pub fn new(state: DensityMatrix, system_dim: usize) -> Result<Self> {
        if state.dim() != system_dim * system_dim {
            return Err(Error::DimensionMismatch {
                context: format!("Choi of a dim-{system_dim} channel lives in dim {}", system_dim * system_dim),
            });
        }
        let marginal =
            crate::linalg::partial_trace(state.matrix(), &[system_dim, system_dim], &[1])?;
        let dev = marginal
            .frobenius_distance(&HermMatrix::scaled_identity(system_dim, 1.0 / system_dim as f64));
        if dev > CHOI_MARGINAL_TOL {
            return Err(Error::InvalidChannel {
                reason: format!("Choi marginal deviates from 1/d by {dev:.3e}"),
            });
        }
        Ok(Self { state, system_dim })
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn matrix(&self) -> &HermMatrix {
        self.state.matrix()
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }
}

/// The maximally entangled state `|Φ⁺⟩⟨Φ⁺|`, `|Φ⁺⟩ = (1/√d) Σ_i |i⟩⊗|i⟩`.
pub fn maximally_entangled(d: usize) -> DensityMatrix {
    let amp = 1.0 / (d as f64).sqrt();
    let mut v = vec![ZERO; d * d];
    for i in 0..d {
        v[i * d + i] = Complex64::new(amp, 0.0);
    }
    DensityMatrix::pure(&v).expect("nonzero vector")
}

/// Normalized Choi matrix `ρ_E = (I ⊗ E)(|Φ⁺⟩⟨Φ⁺|)`, computed directly from
/// the Kraus operators: `ρ_E[(i,a),(j,b)] = (1/d) Σ_K K[a,i] conj(K[b,j])`.
pub fn choi_of_channel(channel: &Channel) -> ChoiMatrix {
    let d = channel.dim();
    let dd = d * d;
    let mut m = DMatrix::<Complex64>::zeros(dd, dd);
    for k in channel.kraus() {
        for i in 0..d {
            for a in 0..d {
                let left = k[(a, i)];
                if left == ZERO {
                    continue;
                }
                for j in 0..d {
                    for b in 0..d {
                        m[(i * d + a, j * d + b)] += left * k[(b, j)].conj();
                    }
                }
            }
        }
    }
    m *= Complex64::new(1.0 / d as f64, 0.0);
    let state = DensityMatrix::new_unchecked(HermMatrix::from_hermitian_unchecked(m));
    ChoiMatrix { state, system_dim: d }
}

/// Channel application step of the protocol.
pub fn apply_channel(channel: &Channel, sigma: &DensityMatrix) -> DensityMatrix {
    channel.apply(sigma)
}

/// Reconstructs the channel action from a Choi matrix:
/// `E(σ) = d · tr₁(ρ_E (σᵀ ⊗ 1))`. The dual route to [`apply_channel`].
pub fn apply_via_choi(choi: &ChoiMatrix, sigma: &DensityMatrix) -> Result<DensityMatrix> {
    let d = choi.system_dim();
    if sigma.dim() != d {
        return Err(Error::DimensionMismatch {
            context: format!("input dim {} vs channel dim {d}", sigma.dim()),
        });
    }
    // d · tr₁(ρ (σᵀ⊗1)): entry (a,b) = d Σ_{i,j} ρ[(i,a),(j,b)] σᵀ[j,i]
    let mut out = DMatrix::<Complex64>::zeros(d, d);
    let rho = choi.matrix();
    for a in 0..d {
        for b in 0..d {
            let mut acc = ZERO;
            for i in 0..d {
                for j in 0..d {
                    // σᵀ[j,i] = σ[i,j]
                    acc += rho.entry(i * d + a, j * d + b) * sigma.matrix().entry(i, j);
                }
            }
            out[(a, b)] = acc * Complex64::new(d as f64, 0.0);
        }
    }
    Ok(DensityMatrix::new_unchecked(HermMatrix::from_hermitian_unchecked(out)))
}

/// Diamond-distance upper bound from the Choi spectral error:
/// `d² · |Δ|_spectral`. An upper bound, not the exact diamond norm.
pub fn diamond_bound(delta_choi: &HermMatrix, d: usize) -> f64 {
    debug_assert_eq!(delta_choi.dim(), d * d);
    (d * d) as f64 * norms(delta_choi).spectral
}

/// History-dependent channel preparation strategies, mirroring the state
/// sources. `next_channel` never sees the current round's input index.
#[derive(Clone, Debug)]
pub enum ChannelSource {
    Iid { channel: Channel },
    /// Depolarizing with parameter schedule `p_t = clamp(p_start + rate·(t−1))`.
    DriftDepolarizing { dim: usize, p_start: f64, rate: f64 },
    /// Unitary conjugation rotating in the (|0⟩,|1⟩) plane at rate `omega`.
    DriftUnitary { dim: usize, omega: f64 },
    /// Depolarizing with parameter nudged by the observed outcome
    /// concentration: `p_t = clamp(base_p − gain·f_max)`, where `f_max` is
    /// the top outcome frequency in the last `window` rounds.
    FeedbackChannel { dim: usize, base_p: f64, gain: f64, window: usize },
}

impl ChannelSource {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelSource::Iid { .. } => "iid",
            ChannelSource::DriftDepolarizing { .. } => "drift-depolarizing",
            ChannelSource::DriftUnitary { .. } => "drift-unitary",
            ChannelSource::FeedbackChannel { .. } => "feedback",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ChannelSource::Iid { channel } => channel.dim(),
            ChannelSource::DriftDepolarizing { dim, .. } => *dim,
            ChannelSource::DriftUnitary { dim, .. } => *dim,
            ChannelSource::FeedbackChannel { dim, .. } => *dim,
        }
    }

    /// The channel implemented in round `history.len() + 1`.
    pub fn next_channel(&mut self, history: &History) -> Channel {
        let t = history.len() + 1;
        match self {
            ChannelSource::Iid { channel } => channel.clone(),
            ChannelSource::DriftDepolarizing { dim, p_start, rate } => {
                let p = (*p_start + *rate * (t as f64 - 1.0)).clamp(0.0, 1.0);
                Channel::depolarizing(*dim, p).expect("clamped parameter")
            }
            ChannelSource::DriftUnitary { dim, omega } => {
                Channel::plane_rotation(*dim, *omega * (t as f64 - 1.0))
            }
            ChannelSource::FeedbackChannel { dim, base_p, gain, window } => {
                let f_max = if *window == 0 || history.is_empty() {
                    0.0
                } else {
                    let recent = history.window(*window);
                    let mut counts: std::collections::BTreeMap<&Outcome, usize> =
                        std::collections::BTreeMap::new();
                    for rec in recent {
                        *counts.entry(&rec.outcome).or_insert(0) += 1;
                    }
                    let max = counts.values().copied().max().unwrap_or(0);
                    max as f64 / recent.len() as f64
                };
                let p = (*base_p - *gain * f_max).clamp(0.0, 1.0);
                Channel::depolarizing(*dim, p).expect("clamped parameter")
            }
        }
    }
}

/// The built-in channel strategies for `d ∈ {2, 4}` with default parameters.
pub fn builtin_channel_sources(dim: usize, _seed: u64) -> Result<Vec<ChannelSource>> {
    if dim != 2 && dim != 4 {
        return Err(Error::InvalidChannel {
            reason: format!("built-in channel sources support d ∈ {{2, 4}}, got {dim}"),
        });
    }
    Ok(vec![
        ChannelSource::Iid { channel: Channel::depolarizing(dim, 0.8)? },
        ChannelSource::DriftDepolarizing { dim, p_start: 1.0, rate: -0.0005 },
        ChannelSource::DriftUnitary { dim, omega: 0.001 },
        ChannelSource::FeedbackChannel { dim, base_p: 0.9, gain: 0.3, window: 16 },
    ])
}

/// Everything a process-tomography run produces: joint outcome histogram,
/// Choi-space linear estimator, trajectory-averaged Choi matrix, history.
#[derive(Debug)]
pub struct ProcessRun {
    pub histogram: OutcomeHistogram,
    pub linear: LinearEstimate,
    pub choi_average: TrajectoryAverage,
    pub history: History,
}

/// Single-shot unbiased estimator of the Choi state for a joint outcome:
/// the tensor product of the transposed input-side estimate and the
/// output-side estimate (`((d+1)σᵀ−1) ⊗ ((d+1)P−1)` for global designs,
/// the factored `3P−1` form for local ones).
pub fn choi_single_shot(
    input_design: &MeasurementDesign,
    input_index: &Outcome,
    output_design: &MeasurementDesign,
    outcome: &Outcome,
) -> HermMatrix {
    let in_est = input_design.single_shot_estimate(input_index).transpose();
    let out_est = output_design.single_shot_estimate(outcome);
    tensor(&in_est, &out_est)
}

fn draw_input<R: Rng>(design: &MeasurementDesign, rng: &mut R) -> Outcome {
    match design.qubits() {
        None => Outcome::Global(rng.gen_range(0..design.num_outcomes() as usize)),
        Some(n) => {
            let m = design.local_projectors().expect("local").len();
            Outcome::Local((0..n).map(|_| rng.gen_range(0..m) as u8).collect())
        }
    }
}

/// Runs the process-tomography loop: each round the channel is fixed from
/// the history first, then an input index is drawn uniformly, the input
/// state is prepared, the channel applied, and the output measured.
pub fn run_process_tomography<R: Rng>(
    source: &mut ChannelSource,
    input_design: &MeasurementDesign,
    output_design: &MeasurementDesign,
    rounds: u64,
    rng: &mut R,
) -> Result<ProcessRun> {
    if rounds == 0 {
        return Err(Error::Config {
            field: "rounds".into(),
            message: "at least one round is required".into(),
        });
    }
    let d = source.dim();
    if input_design.dim() != d || output_design.dim() != d {
        return Err(Error::DimensionMismatch {
            context: format!(
                "channel dim {d} vs designs {}/{}",
                input_design.dim(),
                output_design.dim()
            ),
        });
    }
    if input_design.is_local() != output_design.is_local() {
        return Err(Error::InvalidDesign {
            reason: "input and output designs must share the same family".into(),
        });
    }

    let choi_dim = d * d;
    let mut histogram = OutcomeHistogram::for_joint(input_design, output_design);
    let mut choi_average = TrajectoryAverage::new(choi_dim);
    let mut history = History::new();
    let mut sum = HermMatrix::zeros(choi_dim);
    let m_out = output_design.num_outcomes() as usize;

    for t in 1..=rounds {
        let channel = source.next_channel(&history);
        choi_average.update(choi_of_channel(&channel).state())?;

        let z = draw_input(input_design, rng);
        let sigma = DensityMatrix::new_unchecked(input_design.projector(&z));
        let output_state = channel.apply(&sigma);
        let y = born_sample(output_design, &output_state, rng)?;

        sum.add_scaled(1.0, &choi_single_shot(input_design, &z, output_design, &y));
        match (&z, &y) {
            (Outcome::Global(j), Outcome::Global(k)) => histogram.record_index(j * m_out + k),
            (Outcome::Local(zs), Outcome::Local(ys)) => {
                let mut joint = zs.clone();
                joint.extend_from_slice(ys);
                histogram.record_multi(&joint);
            }
            _ => unreachable!("designs share a family"),
        }
        history.push(HistoryRecord { round: t as usize, outcome: y, input_index: Some(z) });
    }

    let linear = LinearEstimate { matrix: sum.scale(1.0 / rounds as f64), rounds };
    Ok(ProcessRun { histogram, linear, choi_average, history })
}
