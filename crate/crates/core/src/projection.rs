//! Frobenius projections onto the physical sets: density matrices (spectral
//! simplex projection) and valid Choi states (Dykstra alternating
//! projections between the PSD cone and the marginal-constraint affine set).

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, partial_trace, tensor, HermMatrix};

/// Default feasibility tolerance for the Choi projection.
pub const DEFAULT_CHOI_TOL: f64 = 1e-9;
/// Default iteration ceiling for the Choi projection; convergence is
/// typically well under 1000 iterations at small dimensions.
pub const DEFAULT_CHOI_MAX_ITER: usize = 10_000;

/// Outcome of a projection: the projected matrix plus convergence and
/// feasibility diagnostics.
#[derive(Clone, Debug)]
pub struct ProjectionReport {
    pub matrix: HermMatrix,
    /// Alternating-projection cycles used (1 for the closed-form state path).
    pub iterations: usize,
    /// Smallest eigenvalue of the output.
    pub min_eigenvalue: f64,
    /// `|tr₂(ω) − 1/d|_F` for the Choi path, 0 for the state path.
    pub marginal_deviation: f64,
    /// Frobenius distance between input and output.
    pub distance_moved: f64,
}

/// Euclidean projection onto the probability simplex via the sorted-threshold
/// characterization: `w_i = max(v_i − θ, 0)` with `θ` chosen so `Σw = 1`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut cumulative = 0.0;
    let mut support = 0usize;
    let mut theta = sorted[0] - 1.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (i as f64 + 1.0);
        if u - t > 0.0 {
            support = i + 1;
            theta = t;
        }
    }
    debug_assert!(support > 0);
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Frobenius projection onto the set of density matrices: eigendecompose,
/// project the spectrum onto the probability simplex, reassemble.
pub fn project_to_states(l: &HermMatrix) -> ProjectionReport {
    let spectrum = eig_hermitian(l);
    let projected = project_simplex(spectrum.eigenvalues());
    let matrix = spectrum.reconstruct_with(&projected);
    let min_eigenvalue = projected.iter().copied().fold(f64::INFINITY, f64::min);
    let distance_moved = matrix.frobenius_distance(l);
    ProjectionReport {
        matrix,
        iterations: 1,
        min_eigenvalue,
        marginal_deviation: 0.0,
        distance_moved,
    }
}

/// Projection onto the PSD cone: clip negative eigenvalues at zero.
fn project_psd(h: &HermMatrix) -> (HermMatrix, f64) {
    let spectrum = eig_hermitian(h);
    let min_eig = *spectrum.eigenvalues().last().expect("nonempty spectrum");
    if min_eig >= 0.0 {
        return (h.clone(), min_eig);
    }
    let clipped: Vec<f64> = spectrum.eigenvalues().iter().map(|&l| l.max(0.0)).collect();
    (spectrum.reconstruct_with(&clipped), min_eig)
}

/// Projection onto the affine set `{ω : tr₂(ω) = 1/d}`:
/// `ω + (1/d − tr₂ω) ⊗ 1/d`.
fn project_marginal(h: &HermMatrix, d: usize) -> Result<HermMatrix> {
    let marginal = partial_trace(h, &[d, d], &[1])?;
    let mut delta = HermMatrix::scaled_identity(d, 1.0 / d as f64);
    delta.add_scaled(-1.0, &marginal);
    let mut out = h.clone();
    out.add_scaled(1.0, &tensor(&delta, &HermMatrix::scaled_identity(d, 1.0 / d as f64)));
    Ok(out)
}

fn marginal_deviation(h: &HermMatrix, d: usize) -> Result<f64> {
    let marginal = partial_trace(h, &[d, d], &[1])?;
    Ok(marginal.frobenius_distance(&HermMatrix::scaled_identity(d, 1.0 / d as f64)))
}

/// Frobenius projection onto the valid Choi states
/// `{ω ⪰ 0, tr₂(ω) = 1/d}` by Dykstra's alternating projections, which
/// converge to the true argmin of the intersection (plain alternation only
/// reaches some feasible point).
///
/// Fails with a residual-carrying error if `max_iter` cycles do not reach
/// `tol`; callers may retry with a larger ceiling.
pub fn project_to_choi(
    l: &HermMatrix,
    d: usize,
    tol: f64,
    max_iter: usize,
) -> Result<ProjectionReport> {
    if l.dim() != d * d {
        return Err(Error::DimensionMismatch {
            context: format!("Choi projection needs dim {}, got {}", d * d, l.dim()),
        });
    }
    let dim = l.dim();
    let mut x = l.clone();
    let mut p = HermMatrix::zeros(dim);
    let mut q = HermMatrix::zeros(dim);
    let mut last_min_eig = f64::NEG_INFINITY;

    for iter in 1..=max_iter {
        // PSD half-step with its Dykstra correction.
        let mut xp = x.clone();
        xp.add_scaled(1.0, &p);
        let (y, _) = project_psd(&xp);
        p = xp;
        p.add_scaled(-1.0, &y);

        // Affine half-step with its correction.
        let mut yq = y.clone();
        yq.add_scaled(1.0, &q);
        let x_next = project_marginal(&yq, d)?;
        q = yq;
        q.add_scaled(-1.0, &x_next);

        let gap = y.frobenius_distance(&x_next);
        x = x_next;

        let spectrum = eig_hermitian(&x);
        last_min_eig = *spectrum.eigenvalues().last().expect("nonempty");
        if last_min_eig >= -tol && gap <= tol {
            return Ok(ProjectionReport {
                distance_moved: x.frobenius_distance(l),
                marginal_deviation: marginal_deviation(&x, d)?,
                matrix: x,
                iterations: iter,
                min_eigenvalue: last_min_eig,
            });
        }
    }

    Err(Error::ProjectionDidNotConverge {
        iterations: max_iter,
        min_eigenvalue: last_min_eig,
        marginal_deviation: marginal_deviation(&x, d)?,
    })
}
