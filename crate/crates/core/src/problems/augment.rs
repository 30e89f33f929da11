use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Objective, ObjectiveProblem};
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Draws a `d × r` matrix with orthonormal columns.
///
/// A standard Gaussian `d × r` matrix is orthonormalized with a Householder
/// QR factorization. Entries are generated in `f64` from a ChaCha stream, so
/// the result is bitwise reproducible from `seed`.
pub fn make_orthogonal_embedding<T: Scalar>(d: usize, r: usize, seed: u64) -> Result<DMatrix<T>> {
    if r < 1 || r > d {
        return Err(Error::InvalidDimension(format!("embedding needs 1 <= r <= d, got r={r}, d={d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussian = DMatrix::<T>::from_fn(d, r, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        lit(z)
    });
    Ok(gaussian.qr().q())
}

/// `g(x) = f(Qᵀx)` for a base objective `f` on `ℝʳ` and orthonormal `Q`.
///
/// `∇g(x) = Q∇f(Qᵀx)` and `∇²g(x) = Q∇²f(Qᵀx)Qᵀ`, so the Hessian of `g` has
/// rank at most `r` everywhere and `g` is constant along `null(Qᵀ)`.
pub struct LowRankAugmentation<T: Scalar> {
    base: Arc<dyn Objective<T>>,
    q: DMatrix<T>,
    seed: u64,
}

impl<T: Scalar> LowRankAugmentation<T> {
    pub fn new(base: Arc<dyn Objective<T>>, d: usize, seed: u64) -> Result<Self> {
        let r = base.dim();
        if d < r {
            return Err(Error::InvalidDimension(format!(
                "cannot embed a dimension-{r} problem into dimension {d}"
            )));
        }
        let q = make_orthogonal_embedding(d, r, seed)?;
        Ok(Self { base, q, seed })
    }

    pub fn embedding(&self) -> &DMatrix<T> {
        &self.q
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn base(&self) -> &Arc<dyn Objective<T>> {
        &self.base
    }

    /// `Qᵀx`, the coordinates of `x` in the effective subspace.
    pub fn project(&self, x: &DVector<T>) -> DVector<T> {
        self.q.tr_mul(x)
    }
}

impl<T: Scalar> Objective<T> for LowRankAugmentation<T> {
    fn dim(&self) -> usize {
        self.q.nrows()
    }

    fn value(&self, x: &DVector<T>) -> T {
        self.base.value(&self.project(x))
    }

    fn gradient(&self, x: &DVector<T>) -> DVector<T> {
        &self.q * self.base.gradient(&self.project(x))
    }

    fn hessian(&self, x: &DVector<T>) -> DMatrix<T> {
        let hb = self.base.hessian(&self.project(x));
        let hqt = hb * self.q.transpose();
        let h = &self.q * hqt;
        (&h + h.transpose()) * lit::<T>(0.5)
    }
}

/// Embeds `base` into dimension `d` with a random orthonormal `Q`.
///
/// The start point is `Q · base.x0` so that `g(x0) = f(base.x0)`; the known
/// optimum carries over and the known rank is the base dimension.
pub fn augment<T: Scalar>(base: ObjectiveProblem<T>, d: usize, seed: u64) -> Result<ObjectiveProblem<T>> {
    let aug = LowRankAugmentation::new(base.objective().clone(), d, seed)?;
    let x0 = aug.embedding() * base.x0();
    let r = base.dim();
    let name = format!("l-{}", base.name());
    let f_star = base.f_star();
    Ok(ObjectiveProblem::new(name, Arc::new(aug), x0, f_star, Some(r))?.with_base(base))
}
