//! Sketching matrices and the quantities derived from them.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SketchDistribution {
    /// i.i.d. `N(0, 1/l)` entries, so that `E‖Sy‖² = ‖y‖²`.
    ScaledGaussian,
    /// `S = I_d`; requires `l = d`.
    Identity,
    /// Hand-built matrix supplied through [`SketchMatrix::from_entries`].
    Custom,
}

/// A dense `l × d` sketching matrix together with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchMatrix<T: Scalar> {
    entries: DMatrix<T>,
    distribution: SketchDistribution,
    seed: u64,
}

impl<T: Scalar> SketchMatrix<T> {
    /// Draws an `l × d` sketch. Deterministic given `seed`.
    pub fn draw(distribution: SketchDistribution, l: usize, d: usize, seed: u64) -> Result<Self> {
        if l == 0 || l > d {
            return Err(Error::InvalidDimension(format!("sketch needs 1 <= l <= d, got l={l}, d={d}")));
        }
        let entries = match distribution {
            SketchDistribution::Identity => {
                if l != d {
                    return Err(Error::InvalidDimension(format!("identity sketch needs l = d, got l={l}, d={d}")));
                }
                DMatrix::identity(d, d)
            }
            SketchDistribution::ScaledGaussian => {
                let scale = 1.0 / (l as f64).sqrt();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                DMatrix::from_fn(l, d, |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    lit(z * scale)
                })
            }
            SketchDistribution::Custom => {
                return Err(Error::InvalidInput("custom sketches are built with from_entries".into()))
            }
        };
        Ok(Self { entries, distribution, seed })
    }

    pub fn identity(d: usize) -> Self {
        Self { entries: DMatrix::identity(d, d), distribution: SketchDistribution::Identity, seed: 0 }
    }

    pub fn from_entries(entries: DMatrix<T>) -> Self {
        Self { entries, distribution: SketchDistribution::Custom, seed: 0 }
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn distribution(&self) -> SketchDistribution {
        self.distribution
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_identity(&self) -> bool {
        self.distribution == SketchDistribution::Identity
    }

    /// `Sᵀŝ`, the full-space step for a reduced step `ŝ`.
    pub fn lift(&self, s_hat: &DVector<T>) -> DVector<T> {
        if self.is_identity() {
            s_hat.clone()
        } else {
            self.entries.tr_mul(s_hat)
        }
    }

    /// `G = SSᵀ`.
    pub fn gram(&self) -> DMatrix<T> {
        if self.is_identity() {
            DMatrix::identity(self.rows(), self.rows())
        } else {
            let g = &self.entries * self.entries.transpose();
            symmetrize(g)
        }
    }
}

fn symmetrize<T: Scalar>(m: DMatrix<T>) -> DMatrix<T> {
    let half = lit::<T>(0.5);
    (&m + m.transpose()) * half
}

/// `S·∇f`.
pub fn sketch_gradient<T: Scalar>(s: &SketchMatrix<T>, grad: &DVector<T>) -> Result<DVector<T>> {
    if grad.len() != s.cols() {
        return Err(Error::InvalidDimension(format!(
            "gradient length {} does not match sketch width {}",
            grad.len(),
            s.cols()
        )));
    }
    if s.is_identity() {
        return Ok(grad.clone());
    }
    Ok(s.entries() * grad)
}

/// `S·∇²f·Sᵀ`, symmetrized.
pub fn sketch_hessian<T: Scalar>(s: &SketchMatrix<T>, h: &DMatrix<T>) -> Result<DMatrix<T>> {
    let d = s.cols();
    if h.shape() != (d, d) {
        return Err(Error::InvalidDimension(format!("Hessian is {:?}, sketch width is {d}", h.shape())));
    }
    if s.is_identity() {
        return Ok(symmetrize(h.clone()));
    }
    let sh = s.entries() * h;
    Ok(symmetrize(sh * s.entries().transpose()))
}

/// Singular values and the numerical rank derived from them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    /// Nonincreasing.
    pub singular_values: Vec<f64>,
    pub numerical_rank: usize,
    /// Absolute threshold actually applied, `rel_tol · σ_max`.
    pub tolerance_used: f64,
}

/// Numerical rank of a symmetric matrix: `#{σᵢ > rel_tol·σ_max}`.
///
/// For symmetric input the singular values are the absolute eigenvalues, which
/// is how they are computed here.
pub fn numerical_rank<T: Scalar>(m: &DMatrix<T>, rel_tol: T) -> Result<RankReport> {
    if !m.is_square() {
        return Err(Error::InvalidDimension(format!("numerical rank needs a square matrix, got {:?}", m.shape())));
    }
    if m.nrows() == 0 {
        return Ok(RankReport { singular_values: vec![], numerical_rank: 0, tolerance_used: 0.0 });
    }
    Ok(rank_from_eigenvalues(m.symmetric_eigenvalues().iter().copied(), rel_tol))
}

/// [`RankReport`] for a symmetric matrix with the given eigenvalues.
pub fn rank_from_eigenvalues<T: Scalar>(eigenvalues: impl IntoIterator<Item = T>, rel_tol: T) -> RankReport {
    let mut sv: Vec<f64> = eigenvalues.into_iter().map(|v| to_f64(v.abs())).collect();
    if sv.is_empty() {
        return RankReport { singular_values: sv, numerical_rank: 0, tolerance_used: 0.0 };
    }
    sv.sort_by(|a, b| b.total_cmp(a));
    let tol = to_f64(rel_tol) * sv[0];
    let numerical_rank = if sv[0] == 0.0 { 0 } else { sv.iter().filter(|&&v| v > tol).count() };
    RankReport { singular_values: sv, numerical_rank, tolerance_used: tol }
}

/// Outcome of an empirical subspace-embedding check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmbeddingCheck {
    pub passed: bool,
    /// `max |‖Sy‖²/‖y‖² − 1|` over sampled `y ≠ 0`.
    pub worst_distortion: f64,
    pub samples_used: usize,
}

/// Samples `n_samples` unit vectors `z`, forms `y = Bz`, and checks
/// `(1−ε)‖y‖² ≤ ‖Sy‖² ≤ (1+ε)‖y‖²` for each.
///
/// This is a Monte-Carlo check over the column space of `B`, not a
/// certificate.
pub fn check_subspace_embedding<T: Scalar>(
    s: &SketchMatrix<T>,
    b: &DMatrix<T>,
    eps: f64,
    n_samples: usize,
    seed: u64,
) -> Result<EmbeddingCheck> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("eps must lie in (0, 1), got {eps}")));
    }
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    if b.nrows() != s.cols() {
        return Err(Error::InvalidDimension(format!(
            "B has {} rows but sketch width is {}",
            b.nrows(),
            s.cols()
        )));
    }
    let k = b.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut used = 0;
    let mut passed = true;
    for _ in 0..n_samples {
        let z = DVector::<f64>::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
        let zn = z.norm();
        if zn == 0.0 {
            continue;
        }
        let z = DVector::<T>::from_fn(k, |i, _| lit(z[i] / zn));
        let y = b * z;
        let y2 = to_f64(y.norm_squared());
        if y2 == 0.0 {
            continue;
        }
        let sy2 = to_f64((s.entries() * &y).norm_squared());
        let ratio = sy2 / y2;
        worst = worst.max((ratio - 1.0).abs());
        used += 1;
        if ratio < 1.0 - eps || ratio > 1.0 + eps {
            passed = false;
        }
    }
    Ok(EmbeddingCheck { passed, worst_distortion: worst, samples_used: used })
}
