//! Objective functions: the evaluator interface, the closed-form test set and
//! low-rank augmentation.
//!
//! Problems are addressed by selector strings such as `ARWHEAD:N=100`,
//! `QUADRANK:d=10:rank=10` or `l-COSINE:N=50:d=500:seed=3`. The `l-` prefix
//! wraps the base function in a random orthonormal embedding so that the
//! result has dimension `d` but rank `N`.

mod augment;
mod cutest;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use augment::{augment, make_orthogonal_embedding, LowRankAugmentation};
pub use cutest::{
    builtin_problem, Arwhead, Cosine, Engval1, Nondquar, Power, QuadRank, RosenChain,
    BUILTIN_NAMES,
};

/// Smooth objective with analytic first and second derivatives.
///
/// Implementations must be pure functions of `x`.
pub trait Objective<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<T>) -> T;
    fn gradient(&self, x: &DVector<T>) -> DVector<T>;
    /// Dense symmetric Hessian.
    fn hessian(&self, x: &DVector<T>) -> DMatrix<T>;
}

/// An objective bundled with its start point and known optimum.
#[derive(Clone)]
pub struct ObjectiveProblem<T: Scalar> {
    name: String,
    x0: DVector<T>,
    f_star: Option<T>,
    known_rank: Option<usize>,
    objective: Arc<dyn Objective<T>>,
    base: Option<Box<ObjectiveProblem<T>>>,
}

impl<T: Scalar> fmt::Debug for ObjectiveProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveProblem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("f_star", &self.f_star)
            .field("known_rank", &self.known_rank)
            .finish()
    }
}

impl<T: Scalar> ObjectiveProblem<T> {
    pub fn new(
        name: impl Into<String>,
        objective: Arc<dyn Objective<T>>,
        x0: DVector<T>,
        f_star: Option<T>,
        known_rank: Option<usize>,
    ) -> Result<Self> {
        let d = objective.dim();
        if x0.len() != d {
            return Err(Error::InvalidDimension(format!(
                "start point has length {} but objective dimension is {d}",
                x0.len()
            )));
        }
        if let Some(r) = known_rank {
            if r == 0 || r > d {
                return Err(Error::InvalidDimension(format!("known rank {r} not in 1..={d}")));
            }
        }
        Ok(Self { name: name.into(), x0, f_star, known_rank, objective, base: None })
    }

    pub(crate) fn with_base(mut self, base: ObjectiveProblem<T>) -> Self {
        self.base = Some(Box::new(base));
        self
    }

    pub(crate) fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn x0(&self) -> &DVector<T> {
        &self.x0
    }

    /// Known optimal value, when one is available in closed form.
    pub fn f_star(&self) -> Option<T> {
        self.f_star
    }

    pub fn known_rank(&self) -> Option<usize> {
        self.known_rank
    }

    /// The un-augmented problem this one was built from, if any.
    pub fn base(&self) -> Option<&ObjectiveProblem<T>> {
        self.base.as_deref()
    }

    pub fn objective(&self) -> &Arc<dyn Objective<T>> {
        &self.objective
    }

    pub fn value(&self, x: &DVector<T>) -> T {
        self.objective.value(x)
    }

    pub fn gradient(&self, x: &DVector<T>) -> DVector<T> {
        self.objective.gradient(x)
    }

    pub fn hessian(&self, x: &DVector<T>) -> DMatrix<T> {
        self.objective.hessian(x)
    }
}

/// Parsed problem address: `[l-]NAME[:key=value]*`.
///
/// Recognized keys are `N` (base dimension), `d` (ambient dimension),
/// `rank` (QUADRANK only) and `seed` (embedding seed for `l-` problems).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemSelector {
    pub name: String,
    pub augmented: bool,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub rank: Option<usize>,
    pub seed: Option<u64>,
}

const DEFAULT_N: usize = 100;
const DEFAULT_AUGMENTED_D: usize = 1000;

impl ProblemSelector {
    pub fn builtin(name: &str, n: usize) -> Self {
        Self { name: name.to_uppercase(), augmented: false, n: Some(n), d: None, rank: None, seed: None }
    }

    pub fn low_rank(name: &str, n: usize, d: usize, seed: u64) -> Self {
        Self {
            name: name.to_uppercase(),
            augmented: true,
            n: Some(n),
            d: Some(d),
            rank: None,
            seed: Some(seed),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed: Some(seed), ..self.clone() }
    }

    /// Same selector without the embedding seed; identifies a problem family
    /// across benchmark repeats.
    pub fn without_seed(&self) -> Self {
        Self { seed: None, ..self.clone() }
    }

    /// Dimension of the base (un-augmented) function.
    pub fn base_dim(&self) -> usize {
        match (self.n, self.augmented, self.d) {
            (Some(n), _, _) => n,
            (None, false, Some(d)) => d,
            _ => {
                if self.name == "QUADRANK" {
                    10
                } else {
                    DEFAULT_N
                }
            }
        }
    }

    pub fn build<T: Scalar>(&self) -> Result<ObjectiveProblem<T>> {
        let n = self.base_dim();
        let base = match self.name.as_str() {
            "QUADRANK" => {
                let rank = self.rank.unwrap_or(n);
                QuadRank::problem(n, rank)?
            }
            other => {
                if self.rank.is_some() {
                    return Err(Error::InvalidInput(format!("key `rank` only applies to QUADRANK, not {other}")));
                }
                builtin_problem(other, n)?
            }
        };
        if self.augmented {
            let d = self.d.unwrap_or(DEFAULT_AUGMENTED_D);
            let seed = self.seed.unwrap_or(0);
            Ok(augment(base, d, seed)?.renamed(self.to_string()))
        } else {
            if let Some(d) = self.d {
                if d != n {
                    return Err(Error::InvalidInput(format!(
                        "`d={d}` conflicts with `N={n}` for non-augmented problem {}",
                        self.name
                    )));
                }
            }
            if self.seed.is_some() {
                return Err(Error::InvalidInput("key `seed` only applies to l- problems".into()));
            }
            Ok(base.renamed(self.to_string()))
        }
    }
}

impl fmt::Display for ProblemSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.augmented {
            write!(f, "l-")?;
        }
        write!(f, "{}:N={}", self.name, self.base_dim())?;
        if let Some(rank) = self.rank {
            write!(f, ":rank={rank}")?;
        }
        if self.augmented {
            write!(f, ":d={}", self.d.unwrap_or(DEFAULT_AUGMENTED_D))?;
            if let Some(seed) = self.seed {
                write!(f, ":seed={seed}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for ProblemSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let head = parts.next().unwrap_or_default();
        let (augmented, name) = match head.strip_prefix("l-").or_else(|| head.strip_prefix("L-")) {
            Some(rest) => (true, rest),
            None => (false, head),
        };
        let name = name.to_uppercase();
        if !BUILTIN_NAMES.contains(&name.as_str()) {
            return Err(Error::UnsupportedProblem(s.to_string()));
        }
        let mut sel = ProblemSelector { name, augmented, n: None, d: None, rank: None, seed: None };
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("malformed selector component `{part}` in `{s}`")))?;
            let bad = |_| Error::InvalidInput(format!("bad value `{value}` for `{key}` in `{s}`"));
            match key {
                "N" | "n" | "r" => sel.n = Some(value.parse().map_err(bad)?),
                "d" => sel.d = Some(value.parse().map_err(bad)?),
                "rank" => sel.rank = Some(value.parse().map_err(bad)?),
                "seed" => sel.seed = Some(value.parse().map_err(bad)?),
                _ => return Err(Error::InvalidInput(format!("unknown selector key `{key}` in `{s}`"))),
            }
        }
        Ok(sel)
    }
}

/// Builds a problem straight from its selector string.
pub fn problem_from_selector<T: Scalar>(selector: &str) -> Result<ObjectiveProblem<T>> {
    selector.parse::<ProblemSelector>()?.build()
}
