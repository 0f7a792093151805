//! Performance prediction from domain similarity.
//!
//! Scores are modelled as exponential decay towards a floor,
//! `y = a·exp(-b·x) + c` with `b ≥ 0`. Fitting is a deterministic
//! grid-then-polish search:
//!
//! 1. `b` runs over `0` plus [`GRID_SIZE`] log-spaced values in
//!    `[B_MIN, B_MAX]`. For each `b` the model is linear in `(a, c)`, which are
//!    solved in closed form. The lowest SSE wins; SSE ties within `1e-12` go to
//!    the smaller `b`.
//! 2. Up to [`MAX_POLISH_STEPS`] Gauss–Newton steps refine `(a, b, c)`
//!    jointly. A step that would raise the SSE or make `b` negative is halved
//!    until it doesn't, or abandoned.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRID_SIZE: usize = 1000;
pub const B_MIN: f64 = 1e-3;
pub const B_MAX: f64 = 1e2;
pub const MAX_POLISH_STEPS: usize = 50;
const SSE_TIE: f64 = 1e-12;
const MAX_HALVINGS: usize = 30;

/// Which similarity measure the model was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predictor {
    Lexical,
    Cosine,
    Kl,
}

impl Predictor {
    pub const ALL: [Predictor; 3] = [Predictor::Lexical, Predictor::Cosine, Predictor::Kl];

    pub fn as_str(self) -> &'static str {
        match self {
            Predictor::Lexical => "lexical",
            Predictor::Cosine => "cosine",
            Predictor::Kl => "kl",
        }
    }
}

impl fmt::Display for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Predictor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lexical" => Ok(Self::Lexical),
            "cosine" => Ok(Self::Cosine),
            "kl" => Ok(Self::Kl),
            other => Err(Error::Config(format!("unknown predictor `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitLog {
    pub grid_points: usize,
    pub grid_b: f64,
    pub grid_sse: f64,
    pub polish_steps: usize,
    /// Set when the polish produced a non-finite state; the grid optimum was
    /// kept.
    pub polish_diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub predictor: Predictor,
    pub sse: f64,
    pub mae: f64,
    #[serde(rename = "n")]
    pub n_points: usize,
    /// Predictions are clamped to this range when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_range: Option<[f64; 2]>,
    pub fit_log: FitLog,
}

impl FitModel {
    /// Unclamped curve value.
    pub fn eval(&self, x: f64) -> f64 {
        curve(self.a, self.b, self.c, x)
    }

    /// Slope of the fitted curve, `-a·b·exp(-b·x)`: the sensitivity of the
    /// score to the similarity measure.
    pub fn derivative(&self, x: f64) -> f64 {
        -self.a * self.b * (-self.b * x).exp()
    }

    pub fn with_score_range(mut self, lo: f64, hi: f64) -> Self {
        self.score_range = Some([lo, hi]);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[inline]
pub fn curve(a: f64, b: f64, c: f64, x: f64) -> f64 {
    a * (-b * x).exp() + c
}

pub fn sse(points: &[(f64, f64)], a: f64, b: f64, c: f64) -> f64 {
    points.iter().map(|&(x, y)| (y - curve(a, b, c, x)).powi(2)).sum()
}

/// `0` followed by the log-spaced grid.
pub fn b_grid() -> Vec<f64> {
    let (lo, hi) = (B_MIN.log10(), B_MAX.log10());
    std::iter::once(0.0)
        .chain((0..GRID_SIZE).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (GRID_SIZE - 1) as f64)))
        .collect()
}

/// Least-squares `(a, c)` for a fixed `b`, and the resulting SSE.
///
/// When `exp(-b·x)` is (numerically) constant over the points, `a` is not
/// identifiable and is set to zero.
pub fn solve_linear(points: &[(f64, f64)], b: f64) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let u: Vec<f64> = points.iter().map(|&(x, _)| (-b * x).exp()).collect();
    let u_mean = u.iter().sum::<f64>() / n;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let suu: f64 = u.iter().map(|v| (v - u_mean).powi(2)).sum();
    let suy: f64 = u.iter().zip(points).map(|(v, p)| (v - u_mean) * (p.1 - y_mean)).sum();
    let (a, c) = if suu <= 1e-20 * n {
        (0.0, y_mean)
    } else {
        let a = suy / suu;
        (a, y_mean - a * u_mean)
    };
    (a, c, sse(points, a, b, c))
}

/// Jacobian of the residuals `r_i = y_i - f(x_i)` with respect to `(a, b, c)`.
pub fn residual_jacobian(points: &[(f64, f64)], a: f64, b: f64) -> Vec<[f64; 3]> {
    points
        .iter()
        .map(|&(x, _)| {
            let e = (-b * x).exp();
            [-e, a * x * e, -1.0]
        })
        .collect()
}

fn validate_points(points: &[(f64, f64)]) -> Result<()> {
    if points.len() < 3 {
        return Err(Error::Underdetermined(points.len()));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::NonFinite("fit point".into()));
    }
    let x0 = points[0].0;
    if points.iter().all(|p| p.0 == x0) {
        return Err(Error::NoPredictorVariation);
    }
    Ok(())
}

/// One Gauss–Newton polish. Returns the refined parameters and the number of
/// accepted steps, or `None` if the iteration left the finite range.
fn polish(points: &[(f64, f64)], start: [f64; 3]) -> Option<([f64; 3], usize)> {
    let [mut a, mut b, mut c] = start;
    let mut current = sse(points, a, b, c);
    let mut steps = 0;
    for _ in 0..MAX_POLISH_STEPS {
        if current == 0.0 {
            break;
        }
        let jac = residual_jacobian(points, a, b);
        // Gauss–Newton solves J_f δ = r with J_f = -J_r.
        let j = DMatrix::from_fn(points.len(), 3, |i, k| -jac[i][k]);
        let r = DVector::from_iterator(points.len(), points.iter().map(|&(x, y)| y - curve(a, b, c, x)));
        let delta = j.svd(true, true).solve(&r, 1e-12).ok()?;
        if delta.iter().any(|d| !d.is_finite()) {
            return None;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = [a + t * delta[0], b + t * delta[1], c + t * delta[2]];
            if cand[1] >= 0.0 {
                let s = sse(points, cand[0], cand[1], cand[2]);
                if !s.is_finite() {
                    return None;
                }
                if s <= current {
                    accepted = Some((cand, s));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, s)) = accepted else { break };
        let improvement = current - s;
        [a, b, c] = cand;
        current = s;
        steps += 1;
        if improvement <= 1e-15 * current.max(1e-300) {
            break;
        }
    }
    Some(([a, b, c], steps))
}

/// Fits `y = a·exp(-b·x) + c` to `points`.
///
/// The result does not depend on the order of `points`.
pub fn fit(points: &[(f64, f64)], predictor: Predictor) -> Result<FitModel> {
    validate_points(points)?;
    let mut sorted = points.to_vec();
    sorted.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let points = &sorted[..];

    let grid = b_grid();
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    for &b in &grid {
        let (a, c, s) = solve_linear(points, b);
        if s < best.0 - SSE_TIE {
            best = (s, a, b, c);
        }
    }
    let (grid_sse, ga, gb, gc) = best;
    if !grid_sse.is_finite() {
        return Err(Error::Numerical("grid search produced no finite fit".into()));
    }

    let (params, steps, diverged) = match polish(points, [ga, gb, gc]) {
        Some((p, steps)) => (p, steps, false),
        None => ([ga, gb, gc], 0, true),
    };
    let [a, b, c] = params;
    let final_sse = sse(points, a, b, c);
    let mae = points.iter().map(|&(x, y)| (y - curve(a, b, c, x)).abs()).sum::<f64>() / points.len() as f64;
    Ok(FitModel {
        a,
        b,
        c,
        predictor,
        sse: final_sse,
        mae,
        n_points: points.len(),
        score_range: None,
        fit_log: FitLog {
            grid_points: grid.len(),
            grid_b: gb,
            grid_sse,
            polish_steps: steps,
            polish_diverged: diverged,
        },
    })
}

/// Predicted score at similarity `x`, clamped to the model's score range.
pub fn predict(model: &FitModel, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("similarity value {x}")));
    }
    if x < 0.0 {
        return Err(Error::Config(format!("similarity value must be non-negative, got {x}")));
    }
    let y = model.eval(x);
    Ok(match model.score_range {
        Some([lo, hi]) => y.clamp(lo, hi),
        None => y,
    })
}

pub fn mean_absolute_error(model: &FitModel, points: &[(f64, f64)]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::NoPoints);
    }
    let mut total = 0.0;
    for &(x, y) in points {
        total += (y - predict(model, x)?).abs();
    }
    Ok(total / points.len() as f64)
}

/// `(x, ŷ)` pairs on `steps + 1` evenly spaced points of `[lo, hi]`.
pub fn sample_curve(model: &FitModel, lo: f64, hi: f64, steps: usize) -> Result<Vec<(f64, f64)>> {
    let steps = steps.max(1);
    (0..=steps)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / steps as f64;
            predict(model, x).map(|y| (x, y))
        })
        .collect()
}
