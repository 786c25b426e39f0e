//! Dense complex Hermitian linear algebra: construction, eigendecomposition,
//! tensor products, partial traces, and the three operator norms used by the
//! estimation pipeline.
//!
//! Index flattening convention (fixed once, crate-wide): multi-indices are
//! row-major over the subsystem tuple with the *first* subsystem most
//! significant, i.e. `tensor(A, B)[(i1,i2),(j1,j2)] = A[i1,j1] * B[i2,j2]`
//! with flat row index `i1 * dim_B + i2`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Absolute tolerance for accepting a matrix as Hermitian at construction.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Eigenvalues above `-PSD_TOL` count as nonnegative for density-matrix checks.
pub const PSD_TOL: f64 = 1e-10;
/// Tolerance on `trace = 1` for density-matrix checks.
pub const TRACE_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense complex Hermitian matrix, the universal numeric carrier for states,
/// single-shot estimates, linear estimators and Choi matrices.
///
/// The Hermiticity invariant (`entry(i,j) == conj(entry(j,i))` within
/// [`HERMITICITY_TOL`]) is enforced at construction; internal operations
/// preserve it structurally.
#[derive(Clone, Debug)]
pub struct HermMatrix {
    data: DMatrix<Complex64>,
}

impl HermMatrix {
    /// Builds from a dense matrix, rejecting non-Hermitian input with a
    /// symmetry-violation diagnostic. Accepted input is symmetrized
    /// `(A + A†)/2` to remove float dust.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                context: format!("expected nonempty square matrix, got {}x{}", m.nrows(), m.ncols()),
            });
        }
        let mut max_asym = 0.0f64;
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                let a = (m[(i, j)] - m[(j, i)].conj()).norm();
                if a > max_asym {
                    max_asym = a;
                }
            }
        }
        if max_asym > HERMITICITY_TOL {
            return Err(Error::NotHermitian {
                max_asymmetry: max_asym,
                tolerance: HERMITICITY_TOL,
            });
        }
        let sym = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        Ok(Self { data: sym })
    }

    /// Builds entrywise from a closure over `(row, col)`.
    pub fn from_fn<F: Fn(usize, usize) -> Complex64>(dim: usize, f: F) -> Result<Self> {
        Self::new(DMatrix::from_fn(dim, dim, f))
    }

    /// Wraps a matrix that is Hermitian by construction (sums, tensor
    /// products, conjugations of Hermitian inputs). Checked in debug builds.
    pub(crate) fn from_hermitian_unchecked(m: DMatrix<Complex64>) -> Self {
        debug_assert!(m.is_square());
        debug_assert!({
            let mut worst = 0.0f64;
            for i in 0..m.nrows() {
                for j in i..m.ncols() {
                    worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
                }
            }
            worst <= 1e-9
        });
        Self { data: m }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { data: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { data: DMatrix::identity(dim, dim) }
    }

    /// `c * I`.
    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        Self { data: DMatrix::identity(dim, dim) * Complex64::new(c, 0.0) }
    }

    /// Diagonal matrix from real entries.
    pub fn diagonal(entries: &[f64]) -> Self {
        let d = entries.len();
        Self {
            data: DMatrix::from_fn(d, d, |i, j| {
                if i == j { Complex64::new(entries[i], 0.0) } else { ZERO }
            }),
        }
    }

    /// Outer product `|v⟩⟨v|` (not normalized).
    pub fn outer(v: &[Complex64]) -> Self {
        let d = v.len();
        Self {
            data: DMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj()),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.data[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    /// Trace; real by Hermiticity.
    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.data[(i, i)].re).sum()
    }

    /// Entrywise transpose. For Hermitian matrices this equals the entrywise
    /// complex conjugate.
    pub fn transpose(&self) -> Self {
        Self { data: self.data.map(|z| z.conj()) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { data: &self.data + &other.data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { data: &self.data - &other.data }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { data: &self.data * Complex64::new(c, 0.0) }
    }

    /// In-place `self += coeff * other`; the accumulation primitive of the
    /// measurement loops.
    pub fn add_scaled(&mut self, coeff: f64, other: &Self) {
        debug_assert_eq!(self.dim(), other.dim());
        let c = Complex64::new(coeff, 0.0);
        self.data.zip_apply(&other.data, |a, b| *a += c * b);
    }

    /// `H²`; Hermitian for Hermitian `H`.
    pub fn square(&self) -> Self {
        Self::from_hermitian_unchecked(&self.data * &self.data)
    }

    /// `tr(AB)`; real for a Hermitian pair.
    pub fn trace_product(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        let mut acc = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let a = self.data[(i, j)];
                let b = other.data[(j, i)];
                acc += a.re * b.re - a.im * b.im;
            }
        }
        acc
    }

    /// Frobenius norm computed entrywise (no eigendecomposition).
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        let mut acc = 0.0;
        for (a, b) in self.data.iter().zip(other.data.iter()) {
            acc += (a - b).norm_sqr();
        }
        acc.sqrt()
    }

    /// Largest `|entry|` of `self - other`.
    pub fn max_abs_entry_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues sorted
/// descending, eigenvector columns paired with them.
#[derive(Clone, Debug)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<Complex64>,
}

impl Spectrum {
    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Unitary matrix whose column `j` is the eigenvector for eigenvalue `j`.
    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.eigenvectors
    }

    /// `V diag(λ) V†`.
    pub fn reconstruct(&self) -> HermMatrix {
        self.reconstruct_with(&self.eigenvalues)
    }

    /// `V diag(w) V†` for replacement eigenvalues `w` (used by the spectral
    /// projections).
    pub fn reconstruct_with(&self, values: &[f64]) -> HermMatrix {
        assert_eq!(values.len(), self.eigenvalues.len());
        let d = values.len();
        let mut scaled = self.eigenvectors.clone();
        for (j, &w) in values.iter().enumerate() {
            let c = Complex64::new(w, 0.0);
            for i in 0..d {
                scaled[(i, j)] *= c;
            }
        }
        HermMatrix::from_hermitian_unchecked(&scaled * self.eigenvectors.adjoint())
    }
}

/// Full eigendecomposition. Hermiticity is guaranteed by the input type, so
/// this cannot fail; rejection of asymmetric raw input happens in
/// [`HermMatrix::new`].
pub fn eig_hermitian(h: &HermMatrix) -> Spectrum {
    let eig = h.data.clone().symmetric_eigen();
    let d = h.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors =
        DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
    Spectrum { eigenvalues, eigenvectors }
}

/// Kronecker product with the crate's index flattening (first factor most
/// significant).
pub fn tensor(a: &HermMatrix, b: &HermMatrix) -> HermMatrix {
    let (da, db) = (a.dim(), b.dim());
    let d = da * db;
    let mut out = DMatrix::zeros(d, d);
    for i1 in 0..da {
        for j1 in 0..da {
            let aij = a.data[(i1, j1)];
            if aij == ZERO {
                continue;
            }
            for i2 in 0..db {
                for j2 in 0..db {
                    out[(i1 * db + i2, j1 * db + j2)] = aij * b.data[(i2, j2)];
                }
            }
        }
    }
    HermMatrix::from_hermitian_unchecked(out)
}

/// Tensor product of several factors, left to right.
pub fn tensor_all(factors: &[&HermMatrix]) -> HermMatrix {
    assert!(!factors.is_empty());
    let mut acc = factors[0].clone();
    for f in &factors[1..] {
        acc = tensor(&acc, f);
    }
    acc
}

fn check_subsystems(total_dim: usize, dims: &[usize], subset: &[usize]) -> Result<()> {
    let prod: usize = dims.iter().product();
    if prod != total_dim || dims.contains(&0) {
        return Err(Error::DimensionMismatch {
            context: format!("subsystem dims {dims:?} do not factor dimension {total_dim}"),
        });
    }
    let mut seen = vec![false; dims.len()];
    for &t in subset {
        if t >= dims.len() || seen[t] {
            return Err(Error::DimensionMismatch {
                context: format!("subsystem index {t} invalid or repeated for {} subsystems", dims.len()),
            });
        }
        seen[t] = true;
    }
    Ok(())
}

/// Partial trace over the subsystems listed in `traced` (0-based positions
/// into `dims`). Preserves the total trace.
pub fn partial_trace(m: &HermMatrix, dims: &[usize], traced: &[usize]) -> Result<HermMatrix> {
    check_subsystems(m.dim(), dims, traced)?;
    let kept: Vec<usize> = (0..dims.len()).filter(|k| !traced.contains(k)).collect();
    let kept_dim: usize = kept.iter().map(|&k| dims[k]).product();
    let traced_dim: usize = traced.iter().map(|&t| dims[t]).product();

    // Strides of each subsystem in the flat index.
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }

    let flat = |multi_kept: usize, multi_traced: usize| -> usize {
        let mut idx = 0;
        let mut rk = multi_kept;
        for &k in kept.iter().rev() {
            idx += (rk % dims[k]) * strides[k];
            rk /= dims[k];
        }
        let mut rt = multi_traced;
        for &t in traced.iter().rev() {
            idx += (rt % dims[t]) * strides[t];
            rt /= dims[t];
        }
        idx
    };

    let mut out = DMatrix::zeros(kept_dim, kept_dim);
    for p in 0..kept_dim {
        for q in 0..kept_dim {
            let mut acc = ZERO;
            for a in 0..traced_dim {
                acc += m.data[(flat(p, a), flat(q, a))];
            }
            out[(p, q)] = acc;
        }
    }
    Ok(HermMatrix::from_hermitian_unchecked(out))
}

/// Adjoint companion of [`partial_trace`]: places `a` on the subsystems not
/// in `identity_slots` and the identity on those in it, restoring the
/// original subsystem order.
pub fn embed_with_identity(
    a: &HermMatrix,
    dims: &[usize],
    identity_slots: &[usize],
) -> Result<HermMatrix> {
    let total: usize = dims.iter().product();
    check_subsystems(total, dims, identity_slots)?;
    let kept: Vec<usize> = (0..dims.len()).filter(|k| !identity_slots.contains(k)).collect();
    let kept_dim: usize = kept.iter().map(|&k| dims[k]).product();
    if kept_dim != a.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("operator dim {} does not match non-identity slots dim {kept_dim}", a.dim()),
        });
    }
    let slot_dim: usize = identity_slots.iter().map(|&t| dims[t]).product();

    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let flat = |multi_kept: usize, multi_slot: usize| -> usize {
        let mut idx = 0;
        let mut rk = multi_kept;
        for &k in kept.iter().rev() {
            idx += (rk % dims[k]) * strides[k];
            rk /= dims[k];
        }
        let mut rs = multi_slot;
        for &t in identity_slots.iter().rev() {
            idx += (rs % dims[t]) * strides[t];
            rs /= dims[t];
        }
        idx
    };

    let mut out = DMatrix::zeros(total, total);
    for p in 0..kept_dim {
        for q in 0..kept_dim {
            let v = a.data[(p, q)];
            if v == ZERO {
                continue;
            }
            for s in 0..slot_dim {
                out[(flat(p, s), flat(q, s))] = v;
            }
        }
    }
    Ok(HermMatrix::from_hermitian_unchecked(out))
}

/// The three norms used throughout: spectral `max|λ|`, trace `Σ|λ|`,
/// Frobenius `sqrt(Σλ²)`.
#[derive(Clone, Copy, Debug)]
pub struct Norms {
    pub spectral: f64,
    pub trace: f64,
    pub frobenius: f64,
}

pub fn norms(h: &HermMatrix) -> Norms {
    let spec = eig_hermitian(h);
    let mut spectral = 0.0f64;
    let mut trace = 0.0f64;
    let mut frob2 = 0.0f64;
    for &l in spec.eigenvalues() {
        spectral = spectral.max(l.abs());
        trace += l.abs();
        frob2 += l * l;
    }
    Norms { spectral, trace, frobenius: frob2.sqrt() }
}

/// Quantum state: PSD (eigenvalues ≥ −[`PSD_TOL`]) with unit trace.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    inner: HermMatrix,
}

impl DensityMatrix {
    /// Validates the PSD and unit-trace invariants.
    pub fn new(h: HermMatrix) -> Result<Self> {
        let tr = h.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState {
                reason: format!("trace = {tr:.12} is not 1 within {TRACE_TOL:.0e}"),
            });
        }
        let min_eig = eig_hermitian(&h)
            .eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidState {
                reason: format!("minimum eigenvalue {min_eig:.3e} below -{PSD_TOL:.0e}"),
            });
        }
        Ok(Self { inner: h })
    }

    /// Wraps matrices that are density matrices by construction (convex
    /// mixtures of states, normalized pure projectors, channel outputs).
    pub(crate) fn new_unchecked(h: HermMatrix) -> Self {
        debug_assert!((h.trace() - 1.0).abs() < 1e-6);
        Self { inner: h }
    }

    /// Pure state `|ψ⟩⟨ψ|` from (not necessarily normalized) amplitudes.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let n2: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if n2 <= 0.0 {
            return Err(Error::InvalidState { reason: "zero state vector".into() });
        }
        let inv = 1.0 / n2.sqrt();
        let normalized: Vec<Complex64> = amplitudes.iter().map(|z| z * inv).collect();
        Ok(Self { inner: HermMatrix::outer(&normalized) })
    }

    /// Computational basis state `|k⟩⟨k|`.
    pub fn basis_state(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidState {
                reason: format!("basis index {k} out of range for dimension {dim}"),
            });
        }
        let mut v = vec![ZERO; dim];
        v[k] = Complex64::new(1.0, 0.0);
        Self::pure(&v)
    }

    /// Uniform superposition pure state `(1,…,1)/√d`.
    pub fn uniform_superposition(dim: usize) -> Self {
        let v = vec![Complex64::new(1.0, 0.0); dim];
        Self::pure(&v).expect("nonzero vector")
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { inner: HermMatrix::scaled_identity(dim, 1.0 / dim as f64) }
    }

    /// Convex mixture `w·self + (1−w)·other`.
    pub fn mix(&self, w: f64, other: &Self) -> Self {
        assert!((0.0..=1.0).contains(&w));
        let mut m = self.inner.scale(w);
        m.add_scaled(1.0 - w, &other.inner);
        Self { inner: m }
    }

    pub fn matrix(&self) -> &HermMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> HermMatrix {
        self.inner
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; the tail draw keeps u strictly positive.
    let u: f64 = 1.0 - rng.gen::<f64>();
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Random Hermitian matrix `(G + G†)/2` with independent standard-normal
/// real/imaginary parts in `G`.
pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize) -> HermMatrix {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(standard_normal(rng), standard_normal(rng))
    });
    let sym = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
    HermMatrix::from_hermitian_unchecked(sym)
}

/// Random full-support density matrix `GG†/tr(GG†)` (normalized Wishart).
pub fn random_density<R: Rng>(rng: &mut R, dim: usize) -> DensityMatrix {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(standard_normal(rng), standard_normal(rng))
    });
    let w = &g * g.adjoint();
    let tr: f64 = (0..dim).map(|i| w[(i, i)].re).sum();
    DensityMatrix::new_unchecked(HermMatrix::from_hermitian_unchecked(
        w * Complex64::new(1.0 / tr, 0.0),
    ))
}

/// Haar-ish random pure state from a normalized complex Gaussian vector.
pub fn random_pure<R: Rng>(rng: &mut R, dim: usize) -> DensityMatrix {
    let v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(standard_normal(rng), standard_normal(rng)))
        .collect();
    DensityMatrix::pure(&v).expect("gaussian vector is nonzero almost surely")
}
