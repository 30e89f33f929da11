use std::fmt;
use std::str::FromStr;

use serde_json::json;

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};
use crate::sketch::SketchDistribution;

/// Which member of the ARC family to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    /// Full-space ARC: identity sketch with `l = d`.
    Arc,
    /// Random-subspace ARC with a fixed sketch dimension.
    RarcFixed { l: usize },
    /// Random-subspace ARC with the adaptive sketch-size rule.
    RarcD,
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverMode::Arc => write!(f, "arc"),
            SolverMode::RarcFixed { l } => write!(f, "rarc:l={l}"),
            SolverMode::RarcD => write!(f, "rarc-d"),
        }
    }
}

impl FromStr for SolverMode {
    type Err = Error;

    /// Accepts `arc`, `rarc-d`, `rarc:l=<l>` and `rarc:<l>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_lowercase();
        match s.as_str() {
            "arc" => Ok(SolverMode::Arc),
            "rarc-d" | "rarc_d" | "rarcd" => Ok(SolverMode::RarcD),
            other => {
                let rest = other
                    .strip_prefix("rarc:")
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown mode `{s}`")))?;
                let l = rest.strip_prefix("l=").unwrap_or(rest);
                let l = l.parse().map_err(|_| Error::InvalidConfig(format!("bad sketch size in mode `{s}`")))?;
                Ok(SolverMode::RarcFixed { l })
            }
        }
    }
}

/// When a fresh sketch is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RedrawPolicy {
    /// Keep `Sₖ` after unsuccessful iterations.
    OnSuccess,
    EveryIteration,
}

impl fmt::Display for RedrawPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RedrawPolicy::OnSuccess => "on-success",
            RedrawPolicy::EveryIteration => "every-iteration",
        })
    }
}

impl FromStr for RedrawPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "on-success" | "onsuccess" | "on_success" => Ok(RedrawPolicy::OnSuccess),
            "every-iteration" | "everyiteration" | "every_iteration" | "every" => Ok(RedrawPolicy::EveryIteration),
            _ => Err(Error::InvalidConfig(format!("unknown redraw policy `{s}`"))),
        }
    }
}

fn parse_distribution(s: &str) -> Result<SketchDistribution> {
    match s.trim().to_lowercase().as_str() {
        "scaled-gaussian" | "gaussian" | "scaledgaussian" => Ok(SketchDistribution::ScaledGaussian),
        "identity" => Ok(SketchDistribution::Identity),
        _ => Err(Error::InvalidConfig(format!("unknown sketch distribution `{s}`"))),
    }
}

fn distribution_name(d: SketchDistribution) -> &'static str {
    match d {
        SketchDistribution::ScaledGaussian => "scaled-gaussian",
        SketchDistribution::Identity => "identity",
        SketchDistribution::Custom => "custom",
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig<T: Scalar> {
    /// Acceptance threshold on the decrease ratio, in `(0, 1)`.
    pub theta: T,
    pub sigma0: T,
    pub sigma_min: T,
    pub gamma_inc: T,
    pub gamma_dec: T,
    /// First-order tolerance on `‖∇f(xₖ)‖`.
    pub epsilon: T,
    pub max_iter: usize,
    pub l0: usize,
    /// Constant of the sketch-size rule.
    pub c: usize,
    pub kappa_t: T,
    pub kappa_s: T,
    pub rank_tol: T,
    pub redraw_policy: RedrawPolicy,
    pub mode: SolverMode,
    /// Sketch distribution for the random-subspace modes.
    pub distribution: SketchDistribution,
    pub seed: u64,
    pub inner_tol: T,
    pub max_inner: usize,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            theta: lit(0.01),
            sigma0: T::one(),
            sigma_min: lit(1e-16),
            gamma_inc: lit(2.0),
            gamma_dec: lit(0.5),
            epsilon: lit(1e-5),
            max_iter: 2000,
            l0: 2,
            c: 1,
            kappa_t: lit(0.1),
            kappa_s: lit(0.1),
            rank_tol: T::default_rank_tol(),
            redraw_policy: RedrawPolicy::OnSuccess,
            mode: SolverMode::RarcD,
            distribution: SketchDistribution::ScaledGaussian,
            seed: 0,
            inner_tol: lit(1e-10),
            max_inner: 200,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn arc() -> Self {
        Self { mode: SolverMode::Arc, ..Self::default() }
    }

    pub fn rarc(l: usize) -> Self {
        Self { mode: SolverMode::RarcFixed { l }, ..Self::default() }
    }

    pub fn rarc_d(l0: usize) -> Self {
        Self { mode: SolverMode::RarcD, l0, ..Self::default() }
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    /// Initial sketch dimension for a problem of dimension `d`.
    pub fn initial_sketch_size(&self, d: usize) -> usize {
        match self.mode {
            SolverMode::Arc => d,
            SolverMode::RarcFixed { l } => l,
            SolverMode::RarcD => self.l0,
        }
    }

    /// Sketch distribution actually used; ARC always uses the identity.
    pub fn effective_distribution(&self) -> SketchDistribution {
        match self.mode {
            SolverMode::Arc => SketchDistribution::Identity,
            _ => self.distribution,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let zero = T::zero();
        let one = T::one();
        if !(self.theta > zero && self.theta < one) {
            return bad(format!("theta must lie in (0, 1), got {}", self.theta));
        }
        if !(self.sigma0 > zero) || !(self.sigma_min > zero) {
            return bad("sigma0 and sigma_min must be positive".into());
        }
        if !(self.gamma_inc > one) {
            return bad(format!("gamma_inc must exceed 1, got {}", self.gamma_inc));
        }
        if !(self.gamma_dec > zero && self.gamma_dec < one) {
            return bad(format!("gamma_dec must lie in (0, 1), got {}", self.gamma_dec));
        }
        if !(self.epsilon > zero) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.c < 1 {
            return bad("C must be at least 1".into());
        }
        if !(self.kappa_t >= zero && self.kappa_s >= zero) {
            return bad("kappa_T and kappa_S must be nonnegative".into());
        }
        if !(self.rank_tol > zero) || !(self.inner_tol > zero) {
            return bad("rank_tol and inner_tol must be positive".into());
        }
        let l = self.initial_sketch_size(d);
        if l < 1 || l > d {
            return bad(format!("sketch dimension {l} not in 1..={d} for mode {}", self.mode));
        }
        if self.mode != SolverMode::Arc && self.distribution == SketchDistribution::Identity && l != d {
            return bad(format!("identity sketch requires l = d = {d}, got {l}"));
        }
        if self.distribution == SketchDistribution::Custom {
            return bad("custom sketches cannot be drawn by the solver".into());
        }
        Ok(())
    }

    /// Applies one `key = value` setting. Keys mirror the field names;
    /// `C`, `kappa_T`, `kappa_S` and `eps` are accepted as spelled in the
    /// algorithm description. `l` sets the fixed sketch size for `rarc`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let real = || -> Result<T> {
            let x: f64 = v.parse().map_err(|_| Error::InvalidConfig(format!("`{key}` expects a number, got `{v}`")))?;
            T::from_f64(x).ok_or_else(|| Error::InvalidConfig(format!("`{key}` out of range")))
        };
        let int = || -> Result<usize> {
            v.parse().map_err(|_| Error::InvalidConfig(format!("`{key}` expects a nonnegative integer, got `{v}`")))
        };
        match key.trim() {
            "theta" => self.theta = real()?,
            "sigma0" => self.sigma0 = real()?,
            "sigma_min" => self.sigma_min = real()?,
            "gamma_inc" => self.gamma_inc = real()?,
            "gamma_dec" => self.gamma_dec = real()?,
            "epsilon" | "eps" => self.epsilon = real()?,
            "max_iter" => self.max_iter = int()?,
            "l0" => self.l0 = int()?,
            "C" | "c" => self.c = int()?,
            "kappa_T" | "kappa_t" => self.kappa_t = real()?,
            "kappa_S" | "kappa_s" => self.kappa_s = real()?,
            "rank_tol" => self.rank_tol = real()?,
            "redraw_policy" => self.redraw_policy = v.parse()?,
            "distribution" => self.distribution = parse_distribution(v)?,
            "seed" => self.seed = v.parse().map_err(|_| Error::InvalidConfig(format!("bad seed `{v}`")))?,
            "inner_tol" => self.inner_tol = real()?,
            "max_inner" => self.max_inner = int()?,
            "mode" => {
                let keep_l = match self.mode {
                    SolverMode::RarcFixed { l } => l,
                    _ => 0,
                };
                self.mode = match v.to_lowercase().as_str() {
                    "rarc" => SolverMode::RarcFixed { l: keep_l },
                    _ => v.parse()?,
                };
            }
            "l" => {
                let l = int()?;
                self.mode = SolverMode::RarcFixed { l };
            }
            other => return Err(Error::InvalidConfig(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a flat `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected `key = value`", lineno + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Configuration echo for run summaries.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "theta": to_f64(self.theta),
            "sigma0": to_f64(self.sigma0),
            "sigma_min": to_f64(self.sigma_min),
            "gamma_inc": to_f64(self.gamma_inc),
            "gamma_dec": to_f64(self.gamma_dec),
            "epsilon": to_f64(self.epsilon),
            "max_iter": self.max_iter,
            "l0": self.l0,
            "C": self.c,
            "kappa_T": to_f64(self.kappa_t),
            "kappa_S": to_f64(self.kappa_s),
            "rank_tol": to_f64(self.rank_tol),
            "redraw_policy": self.redraw_policy.to_string(),
            "mode": self.mode.to_string(),
            "distribution": distribution_name(self.effective_distribution()),
            "seed": self.seed,
            "inner_tol": to_f64(self.inner_tol),
            "max_inner": self.max_inner,
        })
    }
}
