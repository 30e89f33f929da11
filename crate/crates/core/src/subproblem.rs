//! The sketched cubic model and its exact minimizer.
//!
//! The model on the reduced space `ℝˡ` is
//!
//! ```text
//! m̂(ŝ) = f₀ + ĝᵀŝ + ½ŝᵀĤŝ + (σ/3)‖Sᵀŝ‖³,   ‖Sᵀŝ‖² = ŝᵀGŝ,  G = SSᵀ.
//! ```
//!
//! Writing `G = LLᵀ` and `u = Lᵀŝ` turns the cubic term into `(σ/3)‖u‖³`, the
//! classical Euclidean cubic subproblem with `g̃ = L⁻¹ĝ` and
//! `H̃ = L⁻¹ĤL⁻ᵀ`. Its global minimizer satisfies
//! `(H̃ + μI)u = −g̃` with `μ = σ‖u‖` and `H̃ + μI ⪰ 0`, which is solved in the
//! eigenbasis of `H̃` by safeguarded Newton iteration on the secular equation.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};
use crate::sketch::SketchMatrix;

/// Relative size below which the gradient component along the leftmost
/// eigenspace is treated as zero (hard case).
const HARD_CASE_REL_TOL: f64 = 1e-12;

/// Slack added to the stationarity and curvature tests for roundoff.
const TERMINATION_ABS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct SubproblemOptions<T: Scalar> {
    /// Relative tolerance on the secular residual `|σ‖u‖ − μ| ≤ tol·μ`.
    pub inner_tol: T,
    pub max_inner: usize,
    pub kappa_t: T,
    pub kappa_s: T,
}

impl<T: Scalar> Default for SubproblemOptions<T> {
    fn default() -> Self {
        Self { inner_tol: lit(1e-10), max_inner: 200, kappa_t: lit(0.1), kappa_s: lit(0.1) }
    }
}

#[derive(Debug, Clone)]
enum GramFactor<T: Scalar> {
    Identity,
    /// Lower-triangular Cholesky factor of `G`.
    Cholesky(DMatrix<T>),
}

/// Eigen-decomposition of the transformed Hessian `H̃`, eigenvalues ascending.
#[derive(Debug, Clone)]
struct Spectrum<T: Scalar> {
    eigenvalues: Vec<T>,
    eigenvectors: DMatrix<T>,
    /// `Vᵀg̃`.
    g_coords: DVector<T>,
}

/// `m̂(ŝ) = f₀ + ĝᵀŝ + ½ŝᵀĤŝ + (σ/3)(ŝᵀGŝ)^{3/2}`.
#[derive(Debug, Clone)]
pub struct SketchedCubicModel<T: Scalar> {
    f0: T,
    g_hat: DVector<T>,
    h_hat: DMatrix<T>,
    sigma: T,
    gram: DMatrix<T>,
    factor: GramFactor<T>,
    spectrum: Spectrum<T>,
}

impl<T: Scalar> SketchedCubicModel<T> {
    /// Builds the model and factorizes `G`.
    ///
    /// Fails with [`Error::SingularGram`] when `G` is not numerically positive
    /// definite.
    pub fn new(f0: T, g_hat: DVector<T>, h_hat: DMatrix<T>, sigma: T, gram: DMatrix<T>) -> Result<Self> {
        let l = g_hat.len();
        if h_hat.shape() != (l, l) || gram.shape() != (l, l) {
            return Err(Error::InvalidDimension(format!(
                "model of size {l} got Hessian {:?} and Gram {:?}",
                h_hat.shape(),
                gram.shape()
            )));
        }
        let chol = Cholesky::new(gram.clone()).ok_or(Error::SingularGram)?;
        let factor = chol.l();
        let max_gram = (0..l).map(|i| gram[(i, i)].abs()).fold(T::zero(), |a, b| a.max(b));
        let min_pivot = (0..l).map(|i| factor[(i, i)] * factor[(i, i)]).fold(max_gram, |a, b| a.min(b));
        if l > 0 && !(min_pivot > lit::<T>(1e-14) * max_gram) {
            return Err(Error::SingularGram);
        }
        Self::assemble(f0, g_hat, h_hat, sigma, gram, GramFactor::Cholesky(factor))
    }

    /// Model with `G = I`, the classical ARC subproblem.
    pub fn identity(f0: T, g_hat: DVector<T>, h_hat: DMatrix<T>, sigma: T) -> Result<Self> {
        let l = g_hat.len();
        if h_hat.shape() != (l, l) {
            return Err(Error::InvalidDimension(format!("model of size {l} got Hessian {:?}", h_hat.shape())));
        }
        Self::assemble(f0, g_hat, h_hat, sigma, DMatrix::identity(l, l), GramFactor::Identity)
    }

    /// Model for sketch `S` with already-sketched derivatives.
    pub fn from_sketch(f0: T, g_hat: DVector<T>, h_hat: DMatrix<T>, sigma: T, sketch: &SketchMatrix<T>) -> Result<Self> {
        if sketch.is_identity() {
            Self::identity(f0, g_hat, h_hat, sigma)
        } else {
            Self::new(f0, g_hat, h_hat, sigma, sketch.gram())
        }
    }

    fn assemble(
        f0: T,
        g_hat: DVector<T>,
        h_hat: DMatrix<T>,
        sigma: T,
        gram: DMatrix<T>,
        factor: GramFactor<T>,
    ) -> Result<Self> {
        if !(sigma > T::zero()) {
            return Err(Error::InvalidInput(format!("cubic weight must be positive, got {sigma}")));
        }
        let (g_tilde, h_tilde) = match &factor {
            GramFactor::Identity => (g_hat.clone(), h_hat.clone()),
            GramFactor::Cholesky(l) => {
                let g_t = l.solve_lower_triangular(&g_hat).ok_or(Error::SingularGram)?;
                let x = l.solve_lower_triangular(&h_hat).ok_or(Error::SingularGram)?;
                let h_t = l.solve_lower_triangular(&x.transpose()).ok_or(Error::SingularGram)?;
                (g_t, h_t)
            }
        };
        let h_tilde = (&h_tilde + h_tilde.transpose()) * lit::<T>(0.5);
        let spectrum = Spectrum::new(h_tilde, &g_tilde);
        Ok(Self { f0, g_hat, h_hat, sigma, gram, factor, spectrum })
    }

    /// Eigenvalues of the reduced Hessian `L⁻¹ĤL⁻ᵀ` in increasing order. With
    /// `G = I` these are the eigenvalues of `Ĥ` itself.
    pub fn reduced_eigenvalues(&self) -> &[T] {
        &self.spectrum.eigenvalues
    }

    /// Same model with a different cubic weight; reuses the factorizations.
    pub fn with_sigma(&self, sigma: T) -> Result<Self> {
        if !(sigma > T::zero()) {
            return Err(Error::InvalidInput(format!("cubic weight must be positive, got {sigma}")));
        }
        Ok(Self { sigma, ..self.clone() })
    }

    pub fn dim(&self) -> usize {
        self.g_hat.len()
    }

    pub fn f0(&self) -> T {
        self.f0
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn g_hat(&self) -> &DVector<T> {
        &self.g_hat
    }

    pub fn h_hat(&self) -> &DMatrix<T> {
        &self.h_hat
    }

    pub fn gram(&self) -> &DMatrix<T> {
        &self.gram
    }

    fn gram_times(&self, s: &DVector<T>) -> DVector<T> {
        match self.factor {
            GramFactor::Identity => s.clone(),
            GramFactor::Cholesky(_) => &self.gram * s,
        }
    }

    /// `‖Sᵀŝ‖ = √(ŝᵀGŝ)`.
    pub fn cubic_norm(&self, s: &DVector<T>) -> T {
        s.dot(&self.gram_times(s)).max(T::zero()).sqrt()
    }

    /// `ĝᵀŝ + ½ŝᵀĤŝ`, the quadratic part without `f₀`.
    fn quadratic_change(&self, s: &DVector<T>) -> T {
        self.g_hat.dot(s) + lit::<T>(0.5) * s.dot(&(&self.h_hat * s))
    }

    /// `q̂(ŝ) = f₀ + ĝᵀŝ + ½ŝᵀĤŝ`.
    pub fn quadratic_value(&self, s: &DVector<T>) -> T {
        self.f0 + self.quadratic_change(s)
    }

    /// `f₀ − q̂(ŝ)`, computed without forming `f₀ + …`.
    pub fn quadratic_decrease(&self, s: &DVector<T>) -> T {
        -self.quadratic_change(s)
    }

    /// `m̂(ŝ) − m̂(0)`.
    pub fn model_change(&self, s: &DVector<T>) -> T {
        let c = self.cubic_norm(s);
        self.quadratic_change(s) + self.sigma / lit::<T>(3.0) * c * c * c
    }

    pub fn value(&self, s: &DVector<T>) -> T {
        self.f0 + self.model_change(s)
    }

    /// `ĝ + Ĥŝ + σ‖Sᵀŝ‖Gŝ`.
    pub fn gradient(&self, s: &DVector<T>) -> DVector<T> {
        let gs = self.gram_times(s);
        let c = s.dot(&gs).max(T::zero()).sqrt();
        &self.g_hat + &self.h_hat * s + gs * (self.sigma * c)
    }

    /// `Ĥ + σ(‖Sᵀŝ‖G + (Gŝ)(Gŝ)ᵀ/‖Sᵀŝ‖)`, or `Ĥ` where `‖Sᵀŝ‖ = 0`.
    pub fn hessian(&self, s: &DVector<T>) -> DMatrix<T> {
        let gs = self.gram_times(s);
        let c = s.dot(&gs).max(T::zero()).sqrt();
        if c == T::zero() {
            return self.h_hat.clone();
        }
        let outer = &gs * gs.transpose() / c;
        &self.h_hat + (&self.gram * c + outer) * self.sigma
    }

    fn lift_from_u(&self, u: &DVector<T>) -> Result<DVector<T>> {
        match &self.factor {
            GramFactor::Identity => Ok(u.clone()),
            GramFactor::Cholesky(l) => l.tr_solve_lower_triangular(u).ok_or(Error::SingularGram),
        }
    }

    /// Global minimizer of the model.
    pub fn solve(&self, opts: &SubproblemOptions<T>) -> Result<SubproblemSolution<T>> {
        let (u, inner_iterations) = self.spectrum.minimize(self.sigma, opts)?;
        let s_hat = self.lift_from_u(&u)?;
        let flags = check_termination(self, &s_hat, opts.kappa_t, opts.kappa_s);
        Ok(SubproblemSolution {
            model_value: self.value(&s_hat),
            model_gradient_norm: self.gradient(&s_hat).norm(),
            cubic_norm: self.cubic_norm(&s_hat),
            termination: flags,
            inner_iterations,
            s_hat,
        })
    }
}

impl<T: Scalar> Spectrum<T> {
    fn new(h_tilde: DMatrix<T>, g_tilde: &DVector<T>) -> Self {
        let n = h_tilde.nrows();
        if n == 0 {
            return Self { eigenvalues: vec![], eigenvectors: DMatrix::zeros(0, 0), g_coords: DVector::zeros(0) };
        }
        let eig = h_tilde.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap_or(std::cmp::Ordering::Equal));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        let g_coords = eigenvectors.tr_mul(g_tilde);
        Self { eigenvalues, eigenvectors, g_coords }
    }

    /// `‖u(μ)‖` and `Σ gᵢ²/(λᵢ+μ)³` for `u(μ) = −(H̃ + μI)⁻¹g̃`.
    fn secular_terms(&self, mu: T) -> (T, T) {
        let mut n2 = T::zero();
        let mut d3 = T::zero();
        for (&lam, &g) in self.eigenvalues.iter().zip(self.g_coords.iter()) {
            let den = lam + mu;
            let q = g / den;
            n2 += q * q;
            d3 += q * q / den;
        }
        (n2.sqrt(), d3)
    }

    fn u_at(&self, mu: T, skip: usize) -> DVector<T> {
        let coords = DVector::from_fn(self.eigenvalues.len(), |i, _| {
            if i < skip {
                T::zero()
            } else {
                -self.g_coords[i] / (self.eigenvalues[i] + mu)
            }
        });
        &self.eigenvectors * coords
    }

    /// Minimizes `g̃ᵀu + ½uᵀH̃u + (σ/3)‖u‖³`; returns `u` and the number of
    /// root-finding iterations.
    fn minimize(&self, sigma: T, opts: &SubproblemOptions<T>) -> Result<(DVector<T>, usize)> {
        let n = self.eigenvalues.len();
        if n == 0 {
            return Ok((DVector::zeros(0), 0));
        }
        let zero = T::zero();
        let two = lit::<T>(2.0);
        let eps = T::machine_eps();
        let lam1 = self.eigenvalues[0];
        let g_norm = self.g_coords.norm();
        if g_norm == zero && lam1 >= zero {
            return Ok((DVector::zeros(n), 0));
        }

        let lam_scale = self.eigenvalues.iter().fold(zero, |a, &b| a.max(b.abs()));
        let cluster_tol = lit::<T>(10.0) * eps * lam_scale;
        let cluster = self.eigenvalues.iter().take_while(|&&lam| lam <= lam1 + cluster_tol).count();
        let lo = (-lam1).max(zero);

        if lam1 < zero {
            let comp = (0..cluster).fold(zero, |a, i| a + self.g_coords[i] * self.g_coords[i]).sqrt();
            if comp <= lit::<T>(HARD_CASE_REL_TOL) * g_norm {
                let mu = lo;
                let u_p = self.u_at(mu, cluster);
                let p = u_p.norm();
                let target = mu / sigma;
                if p <= target {
                    let tau = (target * target - p * p).max(zero).sqrt();
                    let v1 = self.eigenvectors.column(0).into_owned();
                    return Ok((u_p + v1 * tau, 0));
                }
            }
        }

        // Root of σ‖u(μ)‖ = μ on (lo, hi]; at hi, μ(λ₁ + μ) = σ‖g̃‖ so
        // ‖u(hi)‖ ≤ ‖g̃‖/(λ₁ + hi) = hi/σ.
        let hi = (-lam1 + (lam1 * lam1 + lit::<T>(4.0) * sigma * g_norm).sqrt()) / two;
        let mut a = lo;
        let mut b = hi.max(lo) * (T::one() + lit::<T>(1e-12));
        let mut mu = b;
        let mut prev_res = T::max_value().unwrap_or(lit(f64::MAX));
        let mut loose: Option<T> = None;
        for it in 1..=opts.max_inner {
            let (u_norm, d3) = self.secular_terms(mu);
            let res = sigma * u_norm - mu;
            if res.abs() <= lit::<T>(4.0) * eps * mu {
                return Ok((self.u_at(mu, 0), it));
            }
            if res.abs() <= opts.inner_tol * mu {
                loose = Some(mu);
            }
            if res > zero {
                a = mu;
            } else {
                b = mu;
            }
            if b - a <= lit::<T>(4.0) * eps * b {
                return Ok((self.u_at(mu, 0), it));
            }
            // Newton on ψ(μ) = 1/‖u(μ)‖ − σ/μ, which is increasing in μ.
            let psi = T::one() / u_norm - sigma / mu;
            let dpsi = d3 / (u_norm * u_norm * u_norm) + sigma / (mu * mu);
            let newton = mu - psi / dpsi;
            let stalled = res.abs() > prev_res.abs() / two;
            mu = if newton.is_finite() && newton > a && newton < b && !stalled { newton } else { (a + b) / two };
            prev_res = res;
        }
        match loose {
            Some(mu) => Ok((self.u_at(mu, 0), opts.max_inner)),
            None => Err(Error::InnerSolverFailure(opts.max_inner)),
        }
    }
}

/// Which of the three step-acceptance conditions a reduced step meets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TerminationFlags {
    /// `m̂(ŝ) ≤ m̂(0)`.
    pub decrease: bool,
    /// `‖∇m̂(ŝ)‖ ≤ κ_T‖Sᵀŝ‖²`.
    pub stationarity: bool,
    /// `λ_min(∇²m̂(ŝ)) ≥ −κ_S‖Sᵀŝ‖`.
    pub curvature: bool,
}

impl TerminationFlags {
    pub fn all(&self) -> bool {
        self.decrease && self.stationarity && self.curvature
    }
}

pub fn check_termination<T: Scalar>(model: &SketchedCubicModel<T>, s_hat: &DVector<T>, kappa_t: T, kappa_s: T) -> TerminationFlags {
    let slack = lit::<T>(TERMINATION_ABS_SLACK);
    let c = model.cubic_norm(s_hat);
    let decrease = model.model_change(s_hat) <= T::zero();
    let stationarity = model.gradient(s_hat).norm() <= kappa_t * c * c + slack;
    let curvature = if model.dim() == 0 {
        true
    } else {
        let lam_min = model.hessian(s_hat).symmetric_eigenvalues().iter().fold(T::max_value().unwrap_or(lit(f64::MAX)), |a, &b| a.min(b));
        lam_min >= -kappa_s * c - slack
    };
    TerminationFlags { decrease, stationarity, curvature }
}

/// Reduced step and diagnostics from [`SketchedCubicModel::solve`].
#[derive(Debug, Clone)]
pub struct SubproblemSolution<T: Scalar> {
    pub s_hat: DVector<T>,
    pub model_value: T,
    pub model_gradient_norm: T,
    /// `‖Sᵀŝ‖`.
    pub cubic_norm: T,
    pub termination: TerminationFlags,
    pub inner_iterations: usize,
}

impl<T: Scalar> SubproblemSolution<T> {
    pub fn model_value_f64(&self) -> f64 {
        to_f64(self.model_value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_model(g: f64, h: f64, sigma: f64) -> SketchedCubicModel<f64> {
        SketchedCubicModel::new(0.0, DVector::from_element(1, g), DMatrix::from_element(1, 1, h), sigma, DMatrix::identity(1, 1)).unwrap()
    }

    #[test]
    fn value_and_gradient_at_origin() {
        let m = SketchedCubicModel::new(
            3.0,
            DVector::from_vec(vec![1.0, -2.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            1.5,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.8]),
        )
        .unwrap();
        let z = DVector::zeros(2);
        assert_eq!(m.value(&z), 3.0);
        assert_eq!(m.gradient(&z), DVector::from_vec(vec![1.0, -2.0]));
        assert_eq!(m.hessian(&z), *m.h_hat());
    }

    #[test]
    fn scalar_model_by_hand() {
        let m = scalar_model(1.0, 1.0, 1.0);
        let s = DVector::from_element(1, -1.0);
        assert!((m.value(&s) - (-1.0 / 6.0)).abs() < 1e-15);
        assert!((m.gradient(&s)[0] - (-1.0)).abs() < 1e-15);
    }

    #[test]
    fn scalar_closed_form_minimizer() {
        // 1 + s − s² = 0 for s < 0.
        let sol = scalar_model(1.0, 1.0, 1.0).solve(&SubproblemOptions::default()).unwrap();
        let expected = (1.0 - 5f64.sqrt()) / 2.0;
        assert!((sol.s_hat[0] - expected).abs() < 1e-12, "{}", sol.s_hat[0]);
        assert!(sol.termination.all());
    }

    #[test]
    fn zero_gradient_psd_stays_put() {
        let m = SketchedCubicModel::identity(2.0, DVector::zeros(3), DMatrix::identity(3, 3), 1.0).unwrap();
        let sol = m.solve(&SubproblemOptions::default()).unwrap();
        assert_eq!(sol.s_hat, DVector::zeros(3));
        assert_eq!(sol.model_value, 2.0);
        assert!(sol.termination.all());
    }

    #[test]
    fn pure_hard_case_moves_along_negative_curvature() {
        // g = 0, H = diag(−2, 1): minimizers are u = ±(2/σ) e₁.
        let m = SketchedCubicModel::<f64>::identity(0.0, DVector::zeros(2), DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 1.0])), 0.5).unwrap();
        let sol = m.solve(&SubproblemOptions::default()).unwrap();
        assert!((sol.s_hat[0].abs() - 4.0).abs() < 1e-12);
        assert!(sol.s_hat[1].abs() < 1e-12);
        assert!(sol.model_gradient_norm < 1e-10);
        assert!(sol.termination.all());
    }

    #[test]
    fn hard_case_with_orthogonal_gradient() {
        let m = SketchedCubicModel::<f64>::identity(
            0.0,
            DVector::from_vec(vec![0.0, 1.0, 0.0]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 2.0, 3.0])),
            1.0,
        )
        .unwrap();
        let sol = m.solve(&SubproblemOptions::default()).unwrap();
        assert!(sol.model_gradient_norm < 1e-10, "{}", sol.model_gradient_norm);
        assert!(sol.termination.all());
        // μ = 1 = σ‖u‖; u₂ = −1/3.
        assert!((sol.s_hat[1] + 1.0 / 3.0).abs() < 1e-12);
        assert!((sol.cubic_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_gram_rejected() {
        let err = SketchedCubicModel::new(0.0, DVector::zeros(2), DMatrix::zeros(2, 2), 1.0, DMatrix::from_element(2, 2, 1.0));
        assert!(matches!(err, Err(Error::SingularGram)));
        let err = SketchedCubicModel::new(0.0, DVector::zeros(2), DMatrix::zeros(2, 2), 1.0, DMatrix::zeros(2, 2));
        assert!(matches!(err, Err(Error::SingularGram)));
    }

    #[test]
    fn nonpositive_sigma_rejected() {
        assert!(SketchedCubicModel::identity(0.0, DVector::zeros(1), DMatrix::zeros(1, 1), 0.0).is_err());
        let m = scalar_model(1.0, 1.0, 1.0);
        assert!(m.with_sigma(-1.0).is_err());
    }

    #[test]
    fn zero_step_fails_stationarity_with_nonzero_gradient() {
        let m = scalar_model(1.0, 1.0, 1.0);
        let f = check_termination(&m, &DVector::zeros(1), 0.1, 0.1);
        assert!(f.decrease);
        assert!(!f.stationarity);
        assert!(f.curvature);
    }

    #[test]
    fn zero_step_at_stationary_psd_origin() {
        let m = SketchedCubicModel::identity(0.0, DVector::zeros(2), DMatrix::identity(2, 2), 1.0).unwrap();
        assert!(check_termination(&m, &DVector::zeros(2), 0.1, 0.1).all());
    }

    #[test]
    fn newton_limit_for_small_sigma() {
        let h = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let g = DVector::from_vec(vec![1.0, 2.0]);
        let m = SketchedCubicModel::identity(0.0, g.clone(), h.clone(), 1e-8).unwrap();
        let sol = m.solve(&SubproblemOptions::default()).unwrap();
        let newton = -h.lu().solve(&g).unwrap();
        assert!((&sol.s_hat - &newton).norm() / newton.norm() < 1e-4);
    }

    #[test]
    fn single_precision_scalar_solve() {
        let m = SketchedCubicModel::<f32>::new(0.0, DVector::from_element(1, 1.0), DMatrix::from_element(1, 1, 1.0), 1.0, DMatrix::identity(1, 1)).unwrap();
        let sol = m.solve(&SubproblemOptions { inner_tol: 1e-5, ..Default::default() }).unwrap();
        assert!((sol.s_hat[0] - (1.0 - 5f32.sqrt()) / 2.0).abs() < 1e-5);
    }
}
