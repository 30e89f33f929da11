//! Closed-form test functions following the CUTEst definitions.
//!
//! Indices in the formulas below are 1-based; the code is 0-based.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{Objective, ObjectiveProblem};
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

pub const BUILTIN_NAMES: &[&str] =
    &["ARWHEAD", "COSINE", "ENGVAL1", "POWER", "NONDQUAR", "QUADRANK", "ROSENCHAIN"];

/// Looks up a builtin problem by name with base dimension `n`.
///
/// QUADRANK built this way is full rank; use [`QuadRank::problem`] to choose
/// the rank.
pub fn builtin_problem<T: Scalar>(name: &str, n: usize) -> Result<ObjectiveProblem<T>> {
    let name = name.to_uppercase();
    if !BUILTIN_NAMES.contains(&name.as_str()) {
        return Err(Error::UnsupportedProblem(name));
    }
    if n < 2 {
        return Err(Error::InvalidDimension(format!("{name} needs N >= 2, got {n}")));
    }
    match name.as_str() {
        "ARWHEAD" => Ok(Arwhead::problem(n)),
        "COSINE" => Ok(Cosine::problem(n)),
        "ENGVAL1" => Ok(Engval1::problem(n)),
        "POWER" => Ok(Power::problem(n)),
        "NONDQUAR" => Ok(Nondquar::problem(n)),
        "QUADRANK" => QuadRank::problem(n, n),
        "ROSENCHAIN" => Ok(RosenChain::problem(n)),
        _ => unreachable!(),
    }
}

fn finish<T: Scalar, O: Objective<T> + 'static>(
    name: &str,
    objective: O,
    x0: DVector<T>,
    f_star: Option<T>,
    known_rank: Option<usize>,
) -> ObjectiveProblem<T> {
    ObjectiveProblem::new(name, Arc::new(objective), x0, f_star, known_rank)
        .expect("builtin problem is consistent")
}

/// ARWHEAD: `Σ_{i<n} (−4xᵢ + 3) + (xᵢ² + xₙ²)²`, start at all ones, `f* = 0`.
#[derive(Debug, Clone, Copy)]
pub struct Arwhead {
    pub n: usize,
}

impl Arwhead {
    pub fn problem<T: Scalar>(n: usize) -> ObjectiveProblem<T> {
        finish("ARWHEAD", Arwhead { n }, DVector::from_element(n, T::one()), Some(T::zero()), None)
    }
}

impl<T: Scalar> Objective<T> for Arwhead {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<T>) -> T {
        let n = self.n;
        let xn2 = x[n - 1] * x[n - 1];
        let (three, four) = (lit::<T>(3.0), lit::<T>(4.0));
        (0..n - 1).fold(T::zero(), |acc, i| {
            let t = x[i] * x[i] + xn2;
            acc + three - four * x[i] + t * t
        })
    }

    fn gradient(&self, x: &DVector<T>) -> DVector<T> {
        let n = self.n;
        let four = lit::<T>(4.0);
        let xn = x[n - 1];
        let mut g = DVector::zeros(n);
        for i in 0..n - 1 {
            let t = x[i] * x[i] + xn * xn;
            g[i] = four * t * x[i] - four;
            g[n - 1] += four * t * xn;
        }
        g
    }

    fn hessian(&self, x: &DVector<T>) -> DMatrix<T> {
        let n = self.n;
        let (four, eight) = (lit::<T>(4.0), lit::<T>(8.0));
        let xn = x[n - 1];
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            let t = x[i] * x[i] + xn * xn;
            h[(i, i)] = four * t + eight * x[i] * x[i];
            let off = eight * x[i] * xn;
            h[(i, n - 1)] = off;
            h[(n - 1, i)] = off;
            h[(n - 1, n - 1)] += four * t + eight * xn * xn;
        }
        h
    }
}

/// COSINE: `Σ_{i<n} cos(xᵢ² − xᵢ₊₁/2)`, start at all ones, `f* = −(n−1)`.
#[derive(Debug, Clone, Copy)]
pub struct Cosine {
    pub n: usize,
}

impl Cosine {
    pub fn problem<T: Scalar>(n: usize) -> ObjectiveProblem<T> {
        let f_star = -lit::<T>((n - 1) as f64);
        finish("COSINE", Cosine { n }, DVector::from_element(n, T::one()), Some(f_star), None)
    }
}

impl<T: Scalar> Objective<T> for Cosine {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<T>) -> T {
        let half = lit::<T>(0.5);
        (0..self.n - 1).fold(T::zero(), |acc, i| acc + (x[i] * x[i] - half * x[i + 1]).cos())
    }

    fn gradient(&self, x: &DVector<T>) -> DVector<T> {
        let (half, two) = (lit::<T>(0.5), lit::<T>(2.0));
        let mut g = DVector::zeros(self.n);
        for i in 0..self.n - 1 {
            let s = (x[i] * x[i] - half * x[i + 1]).sin();
            g[i] -= two * x[i] * s;
            g[i + 1] += half * s;
        }
        g
    }

    fn hessian(&self, x: &DVector<T>) -> DMatrix<T> {
        let (quarter, half, two, four) = (lit::<T>(0.25), lit::<T>(0.5), lit::<T>(2.0), lit::<T>(4.0));
        let n = self.n;
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            let a = x[i] * x[i] - half * x[i + 1];
            let (s, c) = (a.sin(), a.cos());
            h[(i, i)] -= four * x[i] * x[i] * c + two * s;
            h[(i, i + 1)] += c * x[i];
            h[(i + 1, i)] += c * x[i];
            h[(i + 1, i + 1)] -= quarter * c;
        }
        h
    }
}

/// ENGVAL1: `Σ_{i<n} (xᵢ² + xᵢ₊₁²)² − 4xᵢ + 3`, start at all twos.
///
/// The optimal value is not available in closed form and is left unknown.
#[derive(Debug, Clone, Copy)]
pub struct Engval1 {
    pub n: usize,
}

impl Engval1 {
    pub fn problem<T: Scalar>(n: usize) -> ObjectiveProblem<T> {
        finish("ENGVAL1", Engval1 { n }, DVector::from_element(n, lit(2.0)), None, None)
    }
}

impl<T: Scalar> Objective<T> for Engval1 {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<T>) -> T {
        let (three, four) = (lit::<T>(3.0), lit::<T>(4.0));
        (0..self.n - 1).fold(T::zero(), |acc, i| {
            let t = x[i] * x[i] + x[i + 1] * x[i + 1];
            acc + t * t - four * x[i] + three
        })
    }

    fn gradient(&self, x: &DVector<T>) -> DVector<T> {
        let four = lit::<T>(4.0);
        let mut g = DVector::zeros(self.n);
        for i in 0..self.n - 1 {
            let t = x[i] * x[i] + x[i + 1] * x[i + 1];
            g[i] += four * t * x[i] - four;
            g[i + 1] += four * t * x[i + 1];
        }
        g
    }

    fn hessian(&self, x: &DVector<T>) -> DMatrix<T> {
        let (four, eight) = (lit::<T>(4.0), lit::<T>(8.0));
        let n = self.n;
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            let t = x[i] * x[i] + x[i + 1] * x[i + 1];
            h[(i, i)] += eight * x[i] * x[i] + four * t;
            h[(i + 1, i + 1)] += eight * x[i + 1] * x[i + 1] + four * t;
            let off = eight * x[i] * x[i + 1];
            h[(i, i + 1)] += off;
            h[(i + 1, i)] += off;
        }
        h
    }
}

/// POWER: `(Σᵢ i·xᵢ²)²`, start at all ones, `f* = 0`.
#[derive(Debug, Clone, Copy)]
pub struct Power {
    pub n: usize,
}

impl Power {
    pub fn problem<T: Scalar>(n: usize) -> ObjectiveProblem<T> {
        finish("POWER", Power { n }, DVector::from_element(n, T::one()), Some(T::zero()), None)
    }

    fn weighted_sum<T: Scalar>(x: &DVector<T>) -> T {
        x.iter().enumerate().fold(T::zero(), |acc, (i, &xi)| acc + lit::<T>((i + 1) as f64) * xi * xi)
    }
}

impl<T: Scalar> Objective<T> for Power {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<T>) -> T {
        let s = Self::weighted_sum(x);
        s * s
    }

    fn gradient(&self, x: &DVector<T>) -> DVector<T> {
        let s = Self::weighted_sum(x);
        let four = lit::<T>(4.0);
        DVector::from_fn(self.n, |j, _| four * s * lit::<T>((j + 1) as f64) * x[j])
    }

    fn hessian(&self, x: &DVector<T>) -> DMatrix<T> {
        let s = Self::weighted_sum(x);
        let (four, eight) = (lit::<T>(4.0), lit::<T>(8.0));
        let w = DVector::from_fn(self.n, |j, _| lit::<T>((j + 1) as f64) * x[j]);
        let mut h = &w * w.transpose() * eight;
        for j in 0..self.n {
            h[(j, j)] += four * s * lit::<T>((j + 1) as f64);
        }
        h
    }
}

/// NONDQUAR: `(x₁ − x₂)² + (xₙ₋₁ + xₙ)² + Σ_{i≤n−2} (xᵢ + xᵢ₊₁ + xₙ)⁴`,
/// start alternating `1, −1, …`, `f* = 0`.
#[derive(Debug, Clone, Copy)]
pub struct Nondquar {
    pub n: usize,
}

impl Nondquar {
    pub fn problem<T: Scalar>(n: usize) -> ObjectiveProblem<T> {
        let x0 = DVector::from_fn(n, |i, _| if i % 2 == 0 { T::one() } else { -T::one() });
        finish("NONDQUAR", Nondquar { n }, x0, Some(T::zero()), None)
    }
}

impl<T: Scalar> Objective<T> for Nondquar {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<T>) -> T {
        let n = self.n;
        let a = x[0] - x[1];
        let b = x[n - 2] + x[n - 1];
        (0..n.saturating_sub(2)).fold(a * a + b * b, |acc, i| {
            let u = x[i] + x[i + 1] + x[n - 1];
            let u2 = u * u;
            acc + u2 * u2
        })
    }

    fn gradient(&self, x: &DVector<T>) -> DVector<T> {
        let n = self.n;
        let (two, four) = (lit::<T>(2.0), lit::<T>(4.0));
        let mut g = DVector::zeros(n);
        let a = x[0] - x[1];
        g[0] += two * a;
        g[1] -= two * a;
        let b = x[n - 2] + x[n - 1];
        g[n - 2] += two * b;
        g[n - 1] += two * b;
        for i in 0..n.saturating_sub(2) {
            let u = x[i] + x[i + 1] + x[n - 1];
            let d = four * u * u * u;
            g[i] += d;
            g[i + 1] += d;
            g[n - 1] += d;
        }
        g
    }

    fn hessian(&self, x: &DVector<T>) -> DMatrix<T> {
        let n = self.n;
        let (two, twelve) = (lit::<T>(2.0), lit::<T>(12.0));
        let mut h = DMatrix::zeros(n, n);
        h[(0, 0)] += two;
        h[(1, 1)] += two;
        h[(0, 1)] -= two;
        h[(1, 0)] -= two;
        for (p, q) in [(n - 2, n - 2), (n - 1, n - 1), (n - 2, n - 1), (n - 1, n - 2)] {
            h[(p, q)] += two;
        }
        for i in 0..n.saturating_sub(2) {
            let u = x[i] + x[i + 1] + x[n - 1];
            let c = twelve * u * u;
            let idx = [i, i + 1, n - 1];
            for &p in &idx {
                for &q in &idx {
                    h[(p, q)] += c;
                }
            }
        }
        h
    }
}

/// Synthetic rank-controllable quadratic `½xᵀDx − bᵀx`.
///
/// `D = diag(1, 2, …, rank, 0, …, 0)` and `b` is one on the first `rank`
/// coordinates, so the minimizer is `xᵢ = 1/i` (zero beyond `rank`) and
/// `f* = −½ Σ_{i≤rank} 1/i`. Start point is the origin.
#[derive(Debug, Clone, Copy)]
pub struct QuadRank {
    pub n: usize,
    pub rank: usize,
}

impl QuadRank {
    pub fn problem<T: Scalar>(n: usize, rank: usize) -> Result<ObjectiveProblem<T>> {
        if n == 0 || rank == 0 || rank > n {
            return Err(Error::InvalidDimension(format!("QUADRANK needs 1 <= rank <= d, got rank={rank}, d={n}")));
        }
        let q = QuadRank { n, rank };
        let f_star = -lit::<T>(0.5) * (1..=rank).fold(T::zero(), |acc, i| acc + T::one() / lit::<T>(i as f64));
        Ok(finish("QUADRANK", q, DVector::zeros(n), Some(f_star), Some(rank)))
    }

    pub fn minimizer<T: Scalar>(&self) -> DVector<T> {
        DVector::from_fn(self.n, |i, _| if i < self.rank { T::one() / lit::<T>((i + 1) as f64) } else { T::zero() })
    }

    fn diag<T: Scalar>(&self, i: usize) -> T {
        if i < self.rank {
            lit((i + 1) as f64)
        } else {
            T::zero()
        }
    }

    fn rhs<T: Scalar>(&self, i: usize) -> T {
        if i < self.rank {
            T::one()
        } else {
            T::zero()
        }
    }
}

impl<T: Scalar> Objective<T> for QuadRank {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<T>) -> T {
        let half = lit::<T>(0.5);
        x.iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &xi)| acc + half * self.diag::<T>(i) * xi * xi - self.rhs::<T>(i) * xi)
    }

    fn gradient(&self, x: &DVector<T>) -> DVector<T> {
        DVector::from_fn(self.n, |i, _| self.diag::<T>(i) * x[i] - self.rhs::<T>(i))
    }

    fn hessian(&self, _x: &DVector<T>) -> DMatrix<T> {
        DMatrix::from_diagonal(&DVector::from_fn(self.n, |i, _| self.diag::<T>(i)))
    }
}

/// Chained Rosenbrock: `Σ_{i<n} 100(xᵢ₊₁ − xᵢ²)² + (1 − xᵢ)²`,
/// start `(−1.2, 1, −1.2, 1, …)`, `f* = 0`.
#[derive(Debug, Clone, Copy)]
pub struct RosenChain {
    pub n: usize,
}

impl RosenChain {
    pub fn problem<T: Scalar>(n: usize) -> ObjectiveProblem<T> {
        let x0 = DVector::from_fn(n, |i, _| if i % 2 == 0 { lit(-1.2) } else { T::one() });
        finish("ROSENCHAIN", RosenChain { n }, x0, Some(T::zero()), None)
    }
}

impl<T: Scalar> Objective<T> for RosenChain {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<T>) -> T {
        let hundred = lit::<T>(100.0);
        (0..self.n - 1).fold(T::zero(), |acc, i| {
            let w = x[i + 1] - x[i] * x[i];
            let v = T::one() - x[i];
            acc + hundred * w * w + v * v
        })
    }

    fn gradient(&self, x: &DVector<T>) -> DVector<T> {
        let (two, c200, c400) = (lit::<T>(2.0), lit::<T>(200.0), lit::<T>(400.0));
        let mut g = DVector::zeros(self.n);
        for i in 0..self.n - 1 {
            let w = x[i + 1] - x[i] * x[i];
            g[i] += -c400 * w * x[i] - two * (T::one() - x[i]);
            g[i + 1] += c200 * w;
        }
        g
    }

    fn hessian(&self, x: &DVector<T>) -> DMatrix<T> {
        let (two, c200, c400, c800) = (lit::<T>(2.0), lit::<T>(200.0), lit::<T>(400.0), lit::<T>(800.0));
        let n = self.n;
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            let w = x[i + 1] - x[i] * x[i];
            h[(i, i)] += c800 * x[i] * x[i] - c400 * w + two;
            h[(i, i + 1)] -= c400 * x[i];
            h[(i + 1, i)] -= c400 * x[i];
            h[(i + 1, i + 1)] += c200;
        }
        h
    }
}
