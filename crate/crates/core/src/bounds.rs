//! Closed-form quantities: sufficient sample sizes for state and process
//! reconstruction, the matrix-martingale tail bound, residual spectral mass,
//! and the operator-to-trace norm conversion.
//!
//! Sample sizes are the smallest integers satisfying
//!
//! - state, global 2-design:  `N ≥ 64 d r² (1 + ε/24r)/ε² · ln(2d/δ)`
//! - state, local 2-designs:  `N ≥ 32 r² (3ⁿ + 2ⁿ ε/12r)/ε² · ln(2^{n+1}/δ)`
//! - process, global:         `N ≥ 32 d⁶ (1 + ε/24)/ε² · ln(2d²/δ)`
//! - process, local:          `N ≥ 2^{4n+3} (3^{2n} + ε/6)/ε² · ln(2^{2n+1}/δ)`
//!
//! Each formula is the exact solve of the martingale tail bound below for a
//! specific (τ, σ², R) triple; see [`TailParams`]. The final product is
//! evaluated in compensated (double-double) arithmetic before ceiling so the
//! integer boundary is honest.

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, DensityMatrix};

/// Measurement family selector for the process-tomography sample size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DesignFamily {
    Global,
    Local,
}

/// A sufficient number of rounds, with a degeneracy flag raised when the
/// target spectral accuracy `τ` is at least the per-round range bound `R`
/// (the tail bound is then vacuous, though N is still returned).
#[derive(Clone, Copy, Debug)]
pub struct SampleSize {
    pub rounds: u64,
    pub degenerate: bool,
}

fn check_eps_delta(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidBoundParams { reason: format!("epsilon must be positive, got {eps}") });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidBoundParams { reason: format!("delta must be in (0,1), got {delta}") });
    }
    Ok(())
}

fn check_rank(r: usize, dim: usize) -> Result<()> {
    if r < 1 || r > dim {
        return Err(Error::InvalidBoundParams {
            reason: format!("rank {r} outside 1..={dim}"),
        });
    }
    Ok(())
}

/// Error-free transformation of a product: `a·b = p + e` exactly.
fn two_product(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Smallest integer ≥ `hi + lo` where `(hi, lo)` is a double-double value.
fn ceil_dd(hi: f64, lo: f64) -> u64 {
    let base = hi.ceil();
    for k in [base - 1.0, base, base + 1.0] {
        // k − hi is exact (k within one of hi), so the comparison is exact
        if k - hi >= lo {
            return k.max(1.0) as u64;
        }
    }
    (base + 1.0).max(1.0) as u64
}

fn ceil_product(a: f64, log_arg: f64) -> u64 {
    let b = log_arg.ln();
    let (hi, lo) = two_product(a, b);
    ceil_dd(hi, lo)
}

/// Sufficient rounds for rank-`r`, `ε`-in-trace-distance reconstruction at
/// confidence `1 − δ` under a global 2-design measurement in dimension `d`.
pub fn sample_size_state_global(d: usize, r: usize, eps: f64, delta: f64) -> Result<SampleSize> {
    check_eps_delta(eps, delta)?;
    check_rank(r, d)?;
    let (df, rf) = (d as f64, r as f64);
    let a = 64.0 * df * rf * rf * (1.0 + eps / (24.0 * rf)) / (eps * eps);
    let rounds = ceil_product(a, 2.0 * df / delta);
    let degenerate = eps / (4.0 * rf) >= df;
    Ok(SampleSize { rounds, degenerate })
}

/// Local-design analogue on `n` qubits (`d = 2ⁿ`, per-qubit 2-designs).
pub fn sample_size_state_local(n: usize, r: usize, eps: f64, delta: f64) -> Result<SampleSize> {
    check_eps_delta(eps, delta)?;
    if n < 1 {
        return Err(Error::InvalidBoundParams { reason: "qubit count must be at least 1".into() });
    }
    let d = 1usize << n;
    check_rank(r, d)?;
    let rf = r as f64;
    let three_n = 3.0f64.powi(n as i32);
    let two_n = 2.0f64.powi(n as i32);
    let a = 32.0 * rf * rf * (three_n + two_n * eps / (12.0 * rf)) / (eps * eps);
    let rounds = ceil_product(a, 2.0 * two_n / delta);
    let degenerate = eps / (4.0 * rf) >= two_n;
    Ok(SampleSize { rounds, degenerate })
}

/// Sufficient rounds for `ε`-in-diamond-distance channel reconstruction at
/// confidence `1 − δ`. `size` is the system dimension `d` for the global
/// family and the qubit count `n` for the local family.
pub fn sample_size_process(size: usize, eps: f64, delta: f64, family: DesignFamily) -> Result<SampleSize> {
    check_eps_delta(eps, delta)?;
    if size < 1 {
        return Err(Error::InvalidBoundParams { reason: "size must be at least 1".into() });
    }
    match family {
        DesignFamily::Global => {
            let df = size as f64;
            let d6 = df.powi(6);
            let a = 32.0 * d6 * (1.0 + eps / 24.0) / (eps * eps);
            let rounds = ceil_product(a, 2.0 * df * df / delta);
            let degenerate = eps / (2.0 * df * df) >= df.powi(4);
            Ok(SampleSize { rounds, degenerate })
        }
        DesignFamily::Local => {
            let n = size as i32;
            let lead = 2.0f64.powi(4 * n + 3);
            let nine_n = 9.0f64.powi(n);
            let a = lead * (nine_n + eps / 6.0) / (eps * eps);
            let rounds = ceil_product(a, 2.0f64.powi(2 * n + 1) / delta);
            let degenerate = eps / 2.0f64.powi(2 * n + 1) >= 4.0f64.powi(n);
            Ok(SampleSize { rounds, degenerate })
        }
    }
}

/// Matrix-martingale tail bound for a self-adjoint martingale in dimension
/// `dim` with increment range `R` and predictable quadratic variation bound
/// `σ²`: `P(‖M_N‖ ≥ τ) ≤ min(1, 2·dim·exp(−(τ²/2)/(σ² + Rτ/3)))`.
pub fn freedman_tail(tau: f64, sigma2: f64, range: f64, dim: usize) -> f64 {
    let two_d = 2.0 * dim as f64;
    if tau <= 0.0 {
        return two_d.min(1.0);
    }
    let denom = sigma2 + range * tau / 3.0;
    if denom <= 0.0 {
        return 0.0;
    }
    (two_d * (-(tau * tau / 2.0) / denom).exp()).min(1.0)
}

/// Residual spectral mass `Σ_r(ρ)`: the sum of the `d − r` smallest
/// eigenvalues. Zero when `rank(ρ) ≤ r`; `Σ_0 = 1`.
pub fn residual_mass(rho: &DensityMatrix, r: usize) -> f64 {
    let spectrum = eig_hermitian(rho.matrix());
    let evs = spectrum.eigenvalues();
    if r >= evs.len() {
        return 0.0;
    }
    evs[r..].iter().sum::<f64>().max(0.0)
}

/// `Σ_r` for every `r` in `0..=d` from one eigendecomposition; entry `r`
/// equals `residual_mass(rho, r)`.
pub fn residual_mass_profile(rho: &DensityMatrix) -> Vec<f64> {
    let spectrum = eig_hermitian(rho.matrix());
    let evs = spectrum.eigenvalues();
    let d = evs.len();
    let mut raw = vec![0.0f64; d + 1];
    for r in (0..d).rev() {
        raw[r] = raw[r + 1] + evs[r];
    }
    raw.iter().map(|&s| s.max(0.0)).collect()
}

/// Operator-to-trace norm conversion: if the linear estimator is within `τ`
/// of the trajectory average in spectral norm, the projected estimate is
/// within `4rτ + 2·min{Σ_r(ρ̄), Σ_r(ρ̂)}` in trace norm.
pub fn norm_conversion(
    tau: f64,
    r: usize,
    rho_bar: &DensityMatrix,
    rho_pls: &DensityMatrix,
) -> f64 {
    4.0 * r as f64 * tau + 2.0 * residual_mass(rho_bar, r).min(residual_mass(rho_pls, r))
}

/// The rank minimizing the norm-conversion bound at deviation `τ`, with the
/// minimized bound value. Useful post hoc when the effective rank of the
/// trajectory average is not known in advance.
pub fn best_conversion_rank(
    tau: f64,
    rho_bar: &DensityMatrix,
    rho_pls: &DensityMatrix,
) -> (usize, f64) {
    let prof_bar = residual_mass_profile(rho_bar);
    let prof_pls = residual_mass_profile(rho_pls);
    let d = rho_bar.dim();
    let mut best = (1usize, f64::INFINITY);
    for r in 1..=d {
        let bound = 4.0 * r as f64 * tau + 2.0 * prof_bar[r].min(prof_pls[r]);
        if bound < best.1 {
            best = (r, bound);
        }
    }
    best
}

/// The `(τ, σ², R, dim)` triple under which each sample-size formula is the
/// exact solve of [`freedman_tail`] `≤ δ`. `tau_rate` and `sigma2_per_round`
/// are per-round: the tail is evaluated at `τ = N·tau_rate`,
/// `σ² = N·sigma2_per_round`.
///
/// The process-global constants carry the looser range parameter `d⁴`
/// (versus the tight `d²` the local form uses); the sample sizes follow the
/// closed forms above exactly, so the consistency check uses the constants
/// they imply.
#[derive(Clone, Copy, Debug)]
pub struct TailParams {
    pub tau_rate: f64,
    pub sigma2_per_round: f64,
    pub range: f64,
    pub matrix_dim: usize,
}

pub fn state_global_params(d: usize, r: usize, eps: f64) -> TailParams {
    let df = d as f64;
    TailParams {
        tau_rate: eps / (4.0 * r as f64),
        sigma2_per_round: 2.0 * df,
        range: df,
        matrix_dim: d,
    }
}

pub fn state_local_params(n: usize, r: usize, eps: f64) -> TailParams {
    TailParams {
        tau_rate: eps / (4.0 * r as f64),
        sigma2_per_round: 3.0f64.powi(n as i32),
        range: 2.0f64.powi(n as i32),
        matrix_dim: 1 << n,
    }
}

pub fn process_params(size: usize, eps: f64, family: DesignFamily) -> TailParams {
    match family {
        DesignFamily::Global => {
            let df = size as f64;
            TailParams {
                tau_rate: eps / (2.0 * df * df),
                sigma2_per_round: 4.0 * df * df,
                range: df.powi(4),
                matrix_dim: size * size,
            }
        }
        DesignFamily::Local => {
            let n = size as i32;
            TailParams {
                tau_rate: eps / 2.0f64.powi(2 * n + 1),
                sigma2_per_round: 9.0f64.powi(n),
                range: 4.0f64.powi(n),
                matrix_dim: 1 << (2 * size),
            }
        }
    }
}

/// Tail probability at `rounds` rounds under the given per-round parameters.
pub fn tail_at(params: &TailParams, rounds: u64) -> f64 {
    let n = rounds as f64;
    freedman_tail(
        n * params.tau_rate,
        n * params.sigma2_per_round,
        params.range,
        params.matrix_dim,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::HermMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Frozen from a 50-digit evaluation of the closed forms.
    #[test]
    fn sample_size_frozen_values() {
        assert_eq!(sample_size_state_global(2, 1, 0.1, 0.05).unwrap().rounds, 56324);
        assert_eq!(sample_size_state_global(2, 1, 0.2, 0.05).unwrap().rounds, 14140);
        assert_eq!(sample_size_state_global(3, 2, 0.3, 0.1).unwrap().rounds, 35157);
        assert_eq!(sample_size_state_local(1, 1, 0.1, 0.05).unwrap().rounds, 42302);
        assert_eq!(sample_size_state_local(2, 1, 0.2, 0.05).unwrap().rounds, 36812);
        assert_eq!(
            sample_size_process(2, 0.5, 0.05, DesignFamily::Global).unwrap().rounds,
            42442
        );
        assert_eq!(
            sample_size_process(1, 0.5, 0.05, DesignFamily::Local).unwrap().rounds,
            23603
        );
    }

    #[test]
    fn doubling_dimension_scales_leading_term() {
        // at tiny ε the ratio N(2d)/N(d) approaches 2·ln(4d/δ)/ln(2d/δ)
        let (eps, delta) = (1e-4, 0.05);
        let n1 = sample_size_state_global(2, 1, eps, delta).unwrap().rounds as f64;
        let n2 = sample_size_state_global(4, 1, eps, delta).unwrap().rounds as f64;
        let expected = 2.0 * (8.0f64 / delta).ln() / (4.0f64 / delta).ln();
        assert!((n2 / n1 - expected).abs() < 1e-3);
    }

    #[test]
    fn halving_epsilon_quadruples_leading_term() {
        let delta = 0.05;
        for (d, eps) in [(2usize, 1e-3), (3, 2e-3)] {
            let n1 = sample_size_state_global(d, 1, eps, delta).unwrap().rounds as f64;
            let n2 = sample_size_state_global(d, 1, eps / 2.0, delta).unwrap().rounds as f64;
            assert!((n2 / n1 - 4.0).abs() < 1e-3);
        }
        let n1 = sample_size_process(2, 1e-3, delta, DesignFamily::Global).unwrap().rounds as f64;
        let n2 =
            sample_size_process(2, 5e-4, delta, DesignFamily::Global).unwrap().rounds as f64;
        assert!((n2 / n1 - 4.0).abs() < 1e-3);
    }

    #[test]
    fn local_dimension_scaling() {
        // 3ⁿ scaling: leading ratio between n=2 and n=1 is 3·ln(8/δ)/ln(4/δ)
        let (eps, delta) = (1e-4, 0.05);
        let n1 = sample_size_state_local(1, 1, eps, delta).unwrap().rounds as f64;
        let n2 = sample_size_state_local(2, 1, eps, delta).unwrap().rounds as f64;
        let expected = 3.0 * (8.0f64 / delta).ln() / (4.0f64 / delta).ln();
        assert!((n2 / n1 - expected).abs() < 1e-3);
    }

    #[test]
    fn rank_scaling_quadratic_at_small_eps() {
        let (eps, delta) = (1e-4, 0.05);
        let n1 = sample_size_state_global(8, 1, eps, delta).unwrap().rounds as f64;
        let n2 = sample_size_state_global(8, 2, eps, delta).unwrap().rounds as f64;
        assert!((n2 / n1 - 4.0).abs() < 1e-3);
    }

    #[test]
    fn sample_sizes_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..50 {
            let d = rng.gen_range(2..10usize);
            let r = rng.gen_range(1..=d);
            let eps = rng.gen_range(0.05..1.0);
            let delta = rng.gen_range(0.01..0.3);
            let base = sample_size_state_global(d, r, eps, delta).unwrap().rounds;
            assert!(sample_size_state_global(d + 1, r, eps, delta).unwrap().rounds >= base);
            assert!(sample_size_state_global(d, r, eps * 1.1, delta).unwrap().rounds <= base);
            assert!(sample_size_state_global(d, r, eps, (delta * 1.5).min(0.9)).unwrap().rounds <= base);
            if r < d {
                assert!(sample_size_state_global(d, r + 1, eps, delta).unwrap().rounds >= base);
            }
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(sample_size_state_global(2, 1, 0.0, 0.05).is_err());
        assert!(sample_size_state_global(2, 1, 0.1, 0.0).is_err());
        assert!(sample_size_state_global(2, 1, 0.1, 1.0).is_err());
        assert!(sample_size_state_global(2, 0, 0.1, 0.05).is_err());
        assert!(sample_size_state_global(2, 3, 0.1, 0.05).is_err());
        assert!(sample_size_state_local(0, 1, 0.1, 0.05).is_err());
    }

    #[test]
    fn degenerate_accuracy_flagged() {
        // τ = ε/4r ≥ R = d
        let s = sample_size_state_global(2, 1, 9.0, 0.05).unwrap();
        assert!(s.degenerate);
        assert!(s.rounds >= 1);
        let fine = sample_size_state_global(2, 1, 0.2, 0.05).unwrap();
        assert!(!fine.degenerate);
    }

    #[test]
    fn freedman_fixed_values() {
        // τ=0: bound clips at 1
        assert_eq!(freedman_tail(0.0, 10.0, 2.0, 2), 1.0);
        // enormous variance: exponent vanishes, clips at 1
        assert_eq!(freedman_tail(1.0, 1e18, 2.0, 2), 1.0);
        // frozen: τ=200, σ²=4000, R=2, dim 2
        let b = freedman_tail(200.0, 4000.0, 2.0, 2);
        assert!((b - 0.03166905314867887).abs() < 1e-15);
    }

    #[test]
    fn residual_mass_values() {
        let pure = DensityMatrix::basis_state(3, 0).unwrap();
        assert!(residual_mass(&pure, 1).abs() < 1e-12);

        let mixed = DensityMatrix::maximally_mixed(4);
        for r in 0..=4 {
            assert!((residual_mass(&mixed, r) - (4 - r) as f64 / 4.0).abs() < 1e-12);
        }

        let rho = DensityMatrix::new(HermMatrix::diagonal(&[0.5, 0.3, 0.2])).unwrap();
        assert!((residual_mass(&rho, 1) - 0.5).abs() < 1e-12);
        assert!((residual_mass(&rho, 0) - 1.0).abs() < 1e-12);

        // nonincreasing in r
        let mut prev = f64::INFINITY;
        for r in 0..=3 {
            let s = residual_mass(&rho, r);
            assert!(s <= prev + 1e-15);
            prev = s;
        }
    }

    #[test]
    fn residual_mass_profile_matches_pointwise() {
        let rho = DensityMatrix::new(HermMatrix::diagonal(&[0.5, 0.3, 0.2])).unwrap();
        let profile = residual_mass_profile(&rho);
        assert_eq!(profile.len(), 4);
        for (r, &value) in profile.iter().enumerate() {
            assert!((value - residual_mass(&rho, r)).abs() < 1e-15);
        }
    }

    #[test]
    fn best_conversion_rank_prefers_effective_rank() {
        // nearly rank-2 state, deviation 1e-3: r = 2 beats both neighbors
        // (r=1 pays the 2Σ_1 ≈ 0.9 tail, r=3 pays the extra 4τ)
        let rho = DensityMatrix::new(HermMatrix::diagonal(&[0.55, 0.449, 0.001])).unwrap();
        let (r, bound) = best_conversion_rank(1e-3, &rho, &rho);
        assert_eq!(r, 2);
        assert!((bound - (4.0 * 2.0 * 1e-3 + 2.0 * 0.001)).abs() < 1e-12);
        // at zero deviation the full rank wins (bound 0)
        let (r0, b0) = best_conversion_rank(0.0, &rho, &rho);
        assert_eq!(r0, 3);
        assert!(b0.abs() < 1e-12);
    }

    #[test]
    fn norm_conversion_values() {
        let rank1 = DensityMatrix::basis_state(3, 0).unwrap();
        assert!(norm_conversion(0.0, 1, &rank1, &rank1).abs() < 1e-12);

        let rho = DensityMatrix::maximally_mixed(3);
        let tau = 0.07;
        assert!((norm_conversion(tau, 3, &rho, &rho) - 4.0 * 3.0 * tau).abs() < 1e-12);
    }

    #[test]
    fn sample_sizes_are_freedman_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..20 {
            let d = rng.gen_range(2..10usize);
            let r = rng.gen_range(1..=d);
            let eps = rng.gen_range(0.05..1.0);
            let delta = rng.gen_range(0.01..0.3);
            let n = sample_size_state_global(d, r, eps, delta).unwrap().rounds;
            let tail = tail_at(&state_global_params(d, r, eps), n);
            assert!(tail <= delta, "d={d} r={r} eps={eps} delta={delta}: {tail} > {delta}");

            let n_qubits = rng.gen_range(1..5usize);
            let rl = rng.gen_range(1..=(1usize << n_qubits));
            let nl = sample_size_state_local(n_qubits, rl, eps, delta).unwrap().rounds;
            let tail_l = tail_at(&state_local_params(n_qubits, rl, eps), nl);
            assert!(tail_l <= delta);

            let dp = rng.gen_range(2..5usize);
            let np = sample_size_process(dp, eps, delta, DesignFamily::Global).unwrap().rounds;
            let tail_p = tail_at(&process_params(dp, eps, DesignFamily::Global), np);
            assert!(tail_p <= delta);

            let nq = rng.gen_range(1..3usize);
            let npl = sample_size_process(nq, eps, delta, DesignFamily::Local).unwrap().rounds;
            let tail_pl = tail_at(&process_params(nq, eps, DesignFamily::Local), npl);
            assert!(tail_pl <= delta);
        }
    }
}
