//! Weighted least-squares fitting of the three decay models the memory
//! experiments produce, plus 1/e lifetime extraction.
//!
//! Models (x is seconds for free decay and retention, cycles for the
//! error-corrected memory):
//!
//! - free decay:  F(t) = 1/2 + (1/2 - eps_s) * exp[-gamma t - (Gamma t)^2 / 2]
//! - cycle decay: F(n) = 1/2 + (1/2 - eps_s) * (1 - 2 eps_m)^n
//! - retention:   p(t) = exp[-eta t]
//!
//! Fitting is weighted least squares with binomial weights
//! w = n / (p (1 - p)): a derivative-free simplex search finds the basin,
//! then damped Gauss-Newton on the analytic Jacobian polishes to machine
//! precision and supplies the asymptotic covariance. Free-decay fits can pin
//! gamma = 0 or Gamma = 0 — the standard stabilization when one mechanism
//! dominates: superposition states keep the Gaussian (quasi-static) term,
//! computational states keep the exponential.
//!
//! Lifetimes solve curve(t) = target by bisection on the monotone decay;
//! the two conventional targets are process fidelity 1 - 1/(2e) and
//! integrity 1/e.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiments::StateSeries;
use crate::ft::encode::LogicalState;
use crate::pauli::Axis;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {need} points for a {kind:?} fit, got {got}")]
    TooFewPoints { kind: ModelKind, need: usize, got: usize },
    #[error("x, p, and weights must have equal nonzero lengths")]
    ShapeMismatch,
    #[error("data contains a non-finite value")]
    NonFinite,
    #[error("rate pinning applies to free-decay fits only")]
    PinningUnsupported,
    #[error("no convergence after {iterations} iterations (chi2 {chi2:.3e})")]
    NoConvergence { iterations: usize, chi2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    FreeDecay,
    CycleDecay,
    Retention,
}

/// A fitted (or hand-built) decay model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayModel {
    /// `F(t) = 1/2 + (1/2 - eps_s) exp[-gamma t - (gamma_static t)^2 / 2]`:
    /// SPAM floor `eps_s`, Markovian rate `gamma` (s^-1), quasi-static
    /// Gaussian rate `gamma_static` (rad/s).
    FreeDecay { eps_s: f64, gamma: f64, gamma_static: f64 },
    /// `F(n) = 1/2 + (1/2 - eps_s) (1 - 2 eps_m)^n`: per-cycle logical error
    /// `eps_m`, evaluated at (possibly fractional) cycle count `n`.
    CycleDecay { eps_s: f64, eps_m: f64 },
    /// `p(t) = exp[-eta t]`: post-selection retention.
    Retention { eta: f64 },
}

impl DecayModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            DecayModel::FreeDecay { .. } => ModelKind::FreeDecay,
            DecayModel::CycleDecay { .. } => ModelKind::CycleDecay,
            DecayModel::Retention { .. } => ModelKind::Retention,
        }
    }

    /// The model curve at `x` (seconds, or cycles for cycle decay).
    pub fn evaluate(&self, x: f64) -> f64 {
        match *self {
            DecayModel::FreeDecay { eps_s, gamma, gamma_static } => {
                0.5 + (0.5 - eps_s) * (-gamma * x - 0.5 * (gamma_static * x).powi(2)).exp()
            }
            DecayModel::CycleDecay { eps_s, eps_m } => {
                let b = 1.0 - 2.0 * eps_m;
                let decay = if b <= 0.0 {
                    if x == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    b.powf(x)
                };
                0.5 + (0.5 - eps_s) * decay
            }
            DecayModel::Retention { eta } => (-eta * x).exp(),
        }
    }

    /// The curve against wall-clock seconds: cycle models substitute
    /// n = t / tau, the others are already in seconds.
    pub fn evaluate_at_seconds(&self, t: f64, tau: f64) -> f64 {
        match self {
            DecayModel::CycleDecay { .. } => self.evaluate(t / tau),
            _ => self.evaluate(t),
        }
    }
}

/// Which free-decay rate to pin to zero (the fit-stabilization protocol:
/// pick the mechanism that dominates the state class).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatePinning {
    None,
    /// gamma = 0: keep only the quasi-static Gaussian decay.
    PinExponential,
    /// gamma_static = 0: keep only the exponential decay.
    PinGaussian,
}

impl RatePinning {
    /// The conventional choice per state class: superposition states dephase
    /// quasi-statically (keep the Gaussian), computational states decay by
    /// stochastic flips (keep the exponential).
    pub fn for_state(state: LogicalState) -> Self {
        match state.basis() {
            Axis::X | Axis::Y => RatePinning::PinExponential,
            Axis::Z => RatePinning::PinGaussian,
        }
    }
}

/// Observations with least-squares weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitData {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub w: Vec<f64>,
}

impl FitData {
    /// Binomial weights w = n / (p~ (1 - p~)) with p~ kept off 0 and 1 by
    /// half a count, so perfect cells carry large finite weight.
    pub fn from_counts(x: &[f64], p: &[f64], trials: &[u64]) -> Self {
        let w = p
            .iter()
            .zip(trials)
            .map(|(&pi, &n)| {
                let n = n as f64;
                let floor = 0.5 / n.max(1.0);
                let pt = pi.clamp(floor, 1.0 - floor);
                n / (pt * (1.0 - pt))
            })
            .collect();
        Self { x: x.to_vec(), p: p.to_vec(), w }
    }

    pub fn from_series(series: &StateSeries) -> Self {
        Self::from_counts(&series.x, &series.p, &series.trials)
    }
}

/// A completed fit: the model, per-free-parameter standard errors and
/// covariance (rows/columns follow `free_names`), and diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOutcome {
    pub model: DecayModel,
    pub free_names: Vec<String>,
    pub std_errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
    /// Solution pinned to a parameter bound or fit to degenerate (constant)
    /// data; estimates are reported but errors may be unreliable.
    pub boundary: bool,
}

// ---------------------------------------------------------------------------
// Model internals: free-parameter layout, curves, Jacobians, start points
// ---------------------------------------------------------------------------

struct Problem<'a> {
    kind: ModelKind,
    pin: RatePinning,
    data: &'a FitData,
}

impl Problem<'_> {
    fn free_names(&self) -> Vec<&'static str> {
        match (self.kind, self.pin) {
            (ModelKind::FreeDecay, RatePinning::None) => vec!["eps_s", "gamma", "gamma_static"],
            (ModelKind::FreeDecay, RatePinning::PinExponential) => vec!["eps_s", "gamma_static"],
            (ModelKind::FreeDecay, RatePinning::PinGaussian) => vec!["eps_s", "gamma"],
            (ModelKind::CycleDecay, _) => vec!["eps_s", "eps_m"],
            (ModelKind::Retention, _) => vec!["eta"],
        }
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        const RATE_MAX: f64 = 1e6;
        let per_name = |name: &str| match name {
            "eps_s" => (0.0, 0.5),
            "eps_m" => (0.0, 0.5 - 1e-9),
            _ => (0.0, RATE_MAX),
        };
        let (lo, hi) = self.free_names().iter().map(|n| per_name(n)).unzip();
        (lo, hi)
    }

    fn assemble(&self, theta: &[f64]) -> DecayModel {
        match (self.kind, self.pin) {
            (ModelKind::FreeDecay, RatePinning::None) => DecayModel::FreeDecay {
                eps_s: theta[0],
                gamma: theta[1],
                gamma_static: theta[2],
            },
            (ModelKind::FreeDecay, RatePinning::PinExponential) => DecayModel::FreeDecay {
                eps_s: theta[0],
                gamma: 0.0,
                gamma_static: theta[1],
            },
            (ModelKind::FreeDecay, RatePinning::PinGaussian) => DecayModel::FreeDecay {
                eps_s: theta[0],
                gamma: theta[1],
                gamma_static: 0.0,
            },
            (ModelKind::CycleDecay, _) => {
                DecayModel::CycleDecay { eps_s: theta[0], eps_m: theta[1] }
            }
            (ModelKind::Retention, _) => DecayModel::Retention { eta: theta[0] },
        }
    }

    fn curve(&self, theta: &[f64], x: f64) -> f64 {
        self.assemble(theta).evaluate(x)
    }

    /// d curve / d theta_j at one x, in free-parameter order.
    fn jacobian_row(&self, theta: &[f64], x: f64, out: &mut [f64]) {
        match self.assemble(theta) {
            DecayModel::FreeDecay { eps_s, gamma, gamma_static } => {
                let e = (-gamma * x - 0.5 * (gamma_static * x).powi(2)).exp();
                let amp = 0.5 - eps_s;
                let d_eps = -e;
                let d_gamma = -amp * x * e;
                let d_static = -amp * gamma_static * x * x * e;
                match self.pin {
                    RatePinning::None => {
                        out[0] = d_eps;
                        out[1] = d_gamma;
                        out[2] = d_static;
                    }
                    RatePinning::PinExponential => {
                        out[0] = d_eps;
                        out[1] = d_static;
                    }
                    RatePinning::PinGaussian => {
                        out[0] = d_eps;
                        out[1] = d_gamma;
                    }
                }
            }
            DecayModel::CycleDecay { eps_s, eps_m } => {
                let b = 1.0 - 2.0 * eps_m;
                out[0] = if b <= 0.0 {
                    if x == 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                } else {
                    -b.powf(x)
                };
                out[1] = if x == 0.0 || b <= 0.0 {
                    0.0
                } else {
                    -2.0 * (0.5 - eps_s) * x * b.powf(x - 1.0)
                };
            }
            DecayModel::Retention { eta } => {
                out[0] = -x * (-eta * x).exp();
            }
        }
    }

    fn chi2(&self, theta: &[f64]) -> f64 {
        self.data
            .x
            .iter()
            .zip(&self.data.p)
            .zip(&self.data.w)
            .map(|((&x, &p), &w)| {
                let r = p - self.curve(theta, x);
                w * r * r
            })
            .sum()
    }

    /// Heuristic start: the floor from the earliest point, the rate from
    /// where the normalized decay first drops below 1/e.
    fn start(&self) -> Vec<f64> {
        let data = self.data;
        let first = data
            .x
            .iter()
            .zip(&data.p)
            .min_by(|a, b| a.0.total_cmp(b.0))
            .expect("validated nonempty");
        let x_max = data.x.iter().cloned().fold(0.0, f64::max).max(1e-9);
        if self.kind == ModelKind::Retention {
            let last = data
                .x
                .iter()
                .zip(&data.p)
                .max_by(|a, b| a.0.total_cmp(b.0))
                .expect("validated nonempty");
            let eta = if *last.0 > 0.0 {
                -(last.1.clamp(1e-9, 1.0)).ln() / last.0
            } else {
                0.1
            };
            return vec![eta.clamp(1e-6, 1e3)];
        }
        let eps0 = (1.0 - first.1).clamp(0.0, 0.49);
        let amp = (0.5 - eps0).max(0.01);
        // First x where the normalized decay drops below 1/e.
        let target = (-1.0f64).exp();
        let mut x_e = x_max;
        let mut pairs: Vec<(f64, f64)> = data.x.iter().cloned().zip(data.p.iter().cloned()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (x, p) in &pairs {
            if *x > 0.0 && (p - 0.5) / amp < target {
                x_e = *x;
                break;
            }
        }
        match (self.kind, self.pin) {
            (ModelKind::FreeDecay, RatePinning::PinExponential) => {
                vec![eps0, std::f64::consts::SQRT_2 / x_e]
            }
            (ModelKind::FreeDecay, RatePinning::PinGaussian) => vec![eps0, 1.0 / x_e],
            (ModelKind::FreeDecay, RatePinning::None) => {
                vec![eps0, 0.5 / x_e, 1.0 / x_e]
            }
            (ModelKind::CycleDecay, _) => {
                let b0 = target.powf(1.0 / x_e).clamp(1e-3, 1.0 - 1e-6);
                vec![eps0, ((1.0 - b0) / 2.0).clamp(1e-6, 0.49)]
            }
            (ModelKind::Retention, _) => unreachable!("handled above"),
        }
    }
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

fn clamp_vec(theta: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    theta.iter().zip(lo.iter().zip(hi)).map(|(&t, (&l, &h))| t.clamp(l, h)).collect()
}

/// Standard Nelder-Mead on a box-penalized objective; returns the best
/// vertex, its objective value, and the iteration count.
fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    steps: &[f64],
    max_iter: usize,
) -> (Vec<f64>, f64, usize) {
    let k = start.len();
    let mut verts = vec![start.to_vec()];
    for j in 0..k {
        let mut v = start.to_vec();
        v[j] += steps[j];
        verts.push(v);
    }
    let mut fv: Vec<f64> = verts.iter().map(|v| f(v)).collect();
    let mut iters = 0;
    for _ in 0..max_iter {
        iters += 1;
        let mut order: Vec<usize> = (0..=k).collect();
        order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        let reordered: Vec<Vec<f64>> = order.iter().map(|&i| verts[i].clone()).collect();
        verts = reordered;
        fv = order.iter().map(|&i| fv[i]).collect();
        if (fv[k] - fv[0]).abs() <= 1e-13 * (1.0 + fv[0].abs()) {
            break;
        }
        let centroid: Vec<f64> =
            (0..k).map(|j| verts[..k].iter().map(|v| v[j]).sum::<f64>() / k as f64).collect();
        let towards = |coef: f64| -> Vec<f64> {
            (0..k).map(|j| centroid[j] + coef * (centroid[j] - verts[k][j])).collect()
        };
        let reflected = towards(1.0);
        let fr = f(&reflected);
        if fr < fv[0] {
            let expanded = towards(2.0);
            let fe = f(&expanded);
            if fe < fr {
                verts[k] = expanded;
                fv[k] = fe;
            } else {
                verts[k] = reflected;
                fv[k] = fr;
            }
        } else if fr < fv[k - 1] {
            verts[k] = reflected;
            fv[k] = fr;
        } else {
            let contracted = towards(-0.5);
            let fc = f(&contracted);
            if fc < fv[k] {
                verts[k] = contracted;
                fv[k] = fc;
            } else {
                for i in 1..=k {
                    for j in 0..k {
                        verts[i][j] = verts[0][j] + 0.5 * (verts[i][j] - verts[0][j]);
                    }
                    fv[i] = f(&verts[i]);
                }
            }
        }
    }
    let best = (0..=k).min_by(|&a, &b| fv[a].total_cmp(&fv[b])).unwrap();
    (verts[best].clone(), fv[best], iters)
}

/// Solve the k x k system A d = g by Gaussian elimination with partial
/// pivoting; `None` when A is singular to working precision.
fn solve_small(a: &[Vec<f64>], g: &[f64]) -> Option<Vec<f64>> {
    let k = g.len();
    let mut m: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut row = a[i].clone();
            row.push(g[i]);
            row
        })
        .collect();
    for col in 0..k {
        let pivot = (col..k).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for row in 0..k {
            if row != col {
                let factor = m[row][col] / m[col][col];
                for c in col..=k {
                    m[row][c] -= factor * m[col][c];
                }
            }
        }
    }
    Some((0..k).map(|i| m[i][k] / m[i][i]).collect())
}

fn invert_small(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let k = a.len();
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            solve_small(a, &e)
        })
        .collect::<Option<_>>()?;
    Some((0..k).map(|i| (0..k).map(|j| cols[j][i]).collect()).collect())
}

/// Weighted-least-squares normal equations at theta: A = J^T W J and
/// g = J^T W r with residuals r = p - curve.
fn normal_equations(prob: &Problem, theta: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let k = theta.len();
    let mut a = vec![vec![0.0; k]; k];
    let mut g = vec![0.0; k];
    let mut row = vec![0.0; k];
    for ((&x, &p), &w) in prob.data.x.iter().zip(&prob.data.p).zip(&prob.data.w) {
        prob.jacobian_row(theta, x, &mut row);
        let r = p - prob.curve(theta, x);
        for i in 0..k {
            g[i] += w * row[i] * r;
            for j in 0..k {
                a[i][j] += w * row[i] * row[j];
            }
        }
    }
    (a, g)
}

/// Damped Gauss-Newton (Levenberg style) from `start`, clamped to the box.
/// Returns (theta, chi2, iterations, converged).
fn gauss_newton(
    prob: &Problem,
    start: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_iter: usize,
) -> (Vec<f64>, f64, usize, bool) {
    let mut theta = clamp_vec(start, lo, hi);
    let mut chi2 = prob.chi2(&theta);
    let mut lambda = 1e-6;
    let mut converged = false;
    let mut iters = 0;
    for _ in 0..max_iter {
        iters += 1;
        let (a, g) = normal_equations(prob, &theta);
        if g.iter().map(|v| v.abs()).fold(0.0, f64::max) <= 1e-12 * (1.0 + chi2) {
            converged = true;
            break;
        }
        let mut improved = false;
        for _ in 0..16 {
            let mut damped = a.clone();
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] += lambda * a[i][i].max(1e-12);
            }
            let Some(step) = solve_small(&damped, &g) else {
                lambda *= 10.0;
                continue;
            };
            let candidate =
                clamp_vec(&theta.iter().zip(&step).map(|(t, s)| t + s).collect::<Vec<_>>(), lo, hi);
            let c2 = prob.chi2(&candidate);
            if c2 <= chi2 {
                let gain = chi2 - c2;
                let moved: f64 = candidate
                    .iter()
                    .zip(&theta)
                    .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
                    .fold(0.0, f64::max);
                theta = candidate;
                chi2 = c2;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if gain <= 1e-14 * (1.0 + chi2) || moved <= 1e-13 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e8 {
                break;
            }
        }
        if !improved {
            // No descent direction at any damping: a (possibly boundary)
            // local minimum to working precision.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    (theta, chi2, iters, converged)
}

// ---------------------------------------------------------------------------
// Public fitting entry points
// ---------------------------------------------------------------------------

/// Fit `kind` to the data by weighted least squares. `pin` must be
/// [`RatePinning::None`] except for free-decay fits.
pub fn fit(kind: ModelKind, pin: RatePinning, data: &FitData) -> Result<FitOutcome, FitError> {
    if kind != ModelKind::FreeDecay && pin != RatePinning::None {
        return Err(FitError::PinningUnsupported);
    }
    let n = data.x.len();
    if n != data.p.len() || n != data.w.len() || n == 0 {
        return Err(FitError::ShapeMismatch);
    }
    if n < 3 {
        return Err(FitError::TooFewPoints { kind, need: 3, got: n });
    }
    if data
        .x
        .iter()
        .chain(&data.p)
        .chain(&data.w)
        .any(|v| !v.is_finite())
    {
        return Err(FitError::NonFinite);
    }
    let prob = Problem { kind, pin, data };
    let (lo, hi) = prob.bounds();
    let names: Vec<String> = prob.free_names().iter().map(|s| s.to_string()).collect();
    let k = names.len();

    // Degenerate (constant) data: report the exact boundary solution
    // instead of running the optimizer against a flat objective.
    let p_min = data.p.iter().cloned().fold(f64::INFINITY, f64::min);
    let p_max = data.p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let constant = p_max - p_min < 1e-12;
    if constant && (kind != ModelKind::Retention || p_max >= 1.0 - 1e-12) {
        let theta: Vec<f64> = match kind {
            ModelKind::Retention => vec![0.0],
            _ => {
                let mut t = vec![(1.0 - p_max).clamp(0.0, 0.5)];
                t.extend(std::iter::repeat(0.0).take(k - 1));
                t
            }
        };
        let chi2 = prob.chi2(&theta);
        return Ok(FitOutcome {
            model: prob.assemble(&theta),
            free_names: names,
            std_errors: vec![f64::NAN; k],
            covariance: Vec::new(),
            chi2,
            dof: n.saturating_sub(k),
            iterations: 0,
            boundary: true,
        });
    }

    let start = clamp_vec(&prob.start(), &lo, &hi);
    let steps: Vec<f64> = start
        .iter()
        .zip(&names)
        .map(|(&s, name)| {
            if name.starts_with("eps") {
                0.02
            } else {
                (0.25 * s).max(1e-3)
            }
        })
        .collect();
    let scale: Vec<f64> = steps.iter().map(|s| s.max(1e-3)).collect();
    let boxed = |theta: &[f64]| -> f64 {
        let clamped = clamp_vec(theta, &lo, &hi);
        let mut penalty = 0.0;
        for ((t, c), s) in theta.iter().zip(&clamped).zip(&scale) {
            penalty += ((t - c) / s).powi(2);
        }
        prob.chi2(&clamped) + 1e6 * penalty
    };
    let (coarse, _, nm_iters) = nelder_mead(&boxed, &start, &steps, 400);
    let coarse = clamp_vec(&coarse, &lo, &hi);
    let (theta, chi2, gn_iters, converged) = gauss_newton(&prob, &coarse, &lo, &hi, 200);
    let iterations = nm_iters + gn_iters;
    if !converged {
        return Err(FitError::NoConvergence { iterations, chi2 });
    }

    let on_edge = theta
        .iter()
        .zip(lo.iter().zip(&hi))
        .any(|(&t, (&l, &h))| (t - l).abs() <= 1e-9 * (1.0 + l.abs()) || (h - t).abs() <= 1e-9 * (1.0 + h.abs()));
    let (a, _) = normal_equations(&prob, &theta);
    let (covariance, std_errors, singular) = match invert_small(&a) {
        Some(c) => {
            let se = (0..k).map(|i| c[i][i].max(0.0).sqrt()).collect();
            (c, se, false)
        }
        None => (Vec::new(), vec![f64::NAN; k], true),
    };
    Ok(FitOutcome {
        model: prob.assemble(&theta),
        free_names: names,
        std_errors,
        covariance,
        chi2,
        dof: n.saturating_sub(k),
        iterations,
        boundary: on_edge || singular || constant,
    })
}

/// Fit one experiment series (binomial weights derived from its counts).
pub fn fit_counts(
    kind: ModelKind,
    pin: RatePinning,
    series: &StateSeries,
) -> Result<FitOutcome, FitError> {
    fit(kind, pin, &FitData::from_series(series))
}

// ---------------------------------------------------------------------------
// Lifetimes
// ---------------------------------------------------------------------------

/// Process-fidelity lifetime target: F = 1 - 1/(2e).
pub const PROCESS_FIDELITY_FLOOR: f64 = 1.0 - 1.0 / (2.0 * std::f64::consts::E);
/// Integrity lifetime target: R = 1/e.
pub const INTEGRITY_FLOOR: f64 = 1.0 / std::f64::consts::E;

/// First time a nonincreasing curve reaches `target` within `[0, horizon]`,
/// by bisection; `None` if it stays above through the horizon, `Some(0)` if
/// it starts at or below.
pub fn crossing_time(curve: impl Fn(f64) -> f64, target: f64, horizon: f64) -> Option<f64> {
    if curve(0.0) <= target {
        return Some(0.0);
    }
    if curve(horizon) > target {
        return None;
    }
    let (mut lo, mut hi) = (0.0_f64, horizon);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if curve(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// A 1/e-style lifetime; `seconds` is `None` when the curve has not reached
/// the target by the horizon (an unbounded lifetime at this precision).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LifetimeReport {
    pub seconds: Option<f64>,
    pub target: f64,
    pub horizon: f64,
}

/// Lifetime of a fitted model against wall-clock seconds (cycle models use
/// n = t / tau).
pub fn lifetime(model: &DecayModel, tau: f64, target: f64, horizon: f64) -> LifetimeReport {
    let seconds = crossing_time(|t| model.evaluate_at_seconds(t, tau), target, horizon);
    LifetimeReport { seconds, target, horizon }
}

/// How many times longer `candidate` holds than `reference`.
pub fn improvement_factor(candidate: &LifetimeReport, reference: &LifetimeReport) -> Option<f64> {
    match (candidate.seconds, reference.seconds) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::derive_rng;
    use proptest::prelude::*;
    use rand_distr::{Binomial, Distribution};

    fn grid(n: usize, x_max: f64) -> Vec<f64> {
        (1..=n).map(|i| x_max * i as f64 / n as f64).collect()
    }

    /// Binomially sampled survival data from a model.
    fn synthetic(model: &DecayModel, xs: &[f64], shots: u64, seed: u64) -> FitData {
        let mut rng = derive_rng(seed, 0, 99);
        let p: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let f = model.evaluate(x);
                Binomial::new(shots, f).unwrap().sample(&mut rng) as f64 / shots as f64
            })
            .collect();
        FitData::from_counts(xs, &p, &vec![shots; xs.len()])
    }

    fn exact(model: &DecayModel, xs: &[f64]) -> FitData {
        let p: Vec<f64> = xs.iter().map(|&x| model.evaluate(x)).collect();
        FitData::from_counts(xs, &p, &vec![10_000; xs.len()])
    }

    #[test]
    fn evaluate_matches_hand_values() {
        let phys = DecayModel::FreeDecay { eps_s: 0.002, gamma: 0.0, gamma_static: 0.7071 };
        // 1/2 + 0.498 exp(-1.00) with (0.7071 * 2)^2 / 2 = 0.99999...
        let f2 = phys.evaluate(2.0);
        assert!((f2 - 0.6832).abs() < 2e-4, "F(2 s) = {f2:.5}");

        let flat = DecayModel::CycleDecay { eps_s: 0.03, eps_m: 0.0 };
        for n in 0..10 {
            assert!((flat.evaluate(n as f64) - 0.97).abs() < 1e-12);
        }

        let retention = DecayModel::Retention { eta: 0.019 };
        let p23 = retention.evaluate(23.0);
        assert!((p23 - (-0.437f64).exp()).abs() < 1e-12);
        assert!((p23 - 0.646).abs() < 1e-3);

        // Cycle models against wall-clock substitute n = t / tau.
        let qec = DecayModel::CycleDecay { eps_s: 0.04, eps_m: 0.02 };
        let tau = 2.89;
        assert!((qec.evaluate_at_seconds(5.0 * tau, tau) - qec.evaluate(5.0)).abs() < 1e-12);
    }

    #[test]
    fn cycle_decay_matches_its_exponential_approximation() {
        // (1 - 2 eps)^n vs exp(-2 eps n) agree within one percentage point
        // of survival for eps <= 0.05, n <= 10.
        for &eps_s in &[0.0, 0.04, 0.1] {
            for &eps_m in &[0.005, 0.02, 0.05] {
                let model = DecayModel::CycleDecay { eps_s, eps_m };
                for n in 0..=10 {
                    let exact = model.evaluate(n as f64);
                    let approx = 0.5 + (0.5 - eps_s) * (-2.0 * eps_m * n as f64).exp();
                    assert!(
                        (exact - approx).abs() < 0.01,
                        "eps_m={eps_m} n={n}: {exact:.5} vs {approx:.5}"
                    );
                }
            }
        }
    }

    #[test]
    fn jacobians_match_central_differences() {
        let cases: Vec<(ModelKind, RatePinning, Vec<f64>)> = vec![
            (ModelKind::FreeDecay, RatePinning::None, vec![0.03, 0.2, 0.6]),
            (ModelKind::FreeDecay, RatePinning::PinExponential, vec![0.01, 0.5]),
            (ModelKind::FreeDecay, RatePinning::PinGaussian, vec![0.05, 0.35]),
            (ModelKind::CycleDecay, RatePinning::None, vec![0.04, 0.03]),
            (ModelKind::Retention, RatePinning::None, vec![0.15]),
        ];
        let data = FitData { x: vec![0.0], p: vec![1.0], w: vec![1.0] }; // unused by jacobian
        for (kind, pin, theta) in cases {
            let prob = Problem { kind, pin, data: &data };
            let k = theta.len();
            let mut analytic = vec![0.0; k];
            for &x in &[0.0, 0.7, 1.9, 4.3] {
                prob.jacobian_row(&theta, x, &mut analytic);
                for j in 0..k {
                    let h = 1e-6 * (1.0 + theta[j].abs());
                    let mut plus = theta.clone();
                    plus[j] += h;
                    let mut minus = theta.clone();
                    minus[j] -= h;
                    let numeric = (prob.curve(&plus, x) - prob.curve(&minus, x)) / (2.0 * h);
                    assert!(
                        (analytic[j] - numeric).abs() <= 1e-6 * (1.0 + numeric.abs()),
                        "{kind:?}/{pin:?} param {j} at x={x}: {} vs {numeric}",
                        analytic[j]
                    );
                }
            }
        }
    }

    #[test]
    fn noiseless_round_trips_recover_parameters_to_1e6() {
        let cases: Vec<(DecayModel, RatePinning)> = vec![
            (
                DecayModel::FreeDecay { eps_s: 0.002, gamma: 0.0, gamma_static: 0.7071 },
                RatePinning::PinExponential,
            ),
            (
                DecayModel::FreeDecay { eps_s: 0.01, gamma: 0.3, gamma_static: 0.0 },
                RatePinning::PinGaussian,
            ),
            (
                DecayModel::FreeDecay { eps_s: 0.03, gamma: 0.1, gamma_static: 0.4 },
                RatePinning::None,
            ),
            (DecayModel::CycleDecay { eps_s: 0.04, eps_m: 0.029 }, RatePinning::None),
            (DecayModel::Retention { eta: 0.019 }, RatePinning::None),
        ];
        for (truth, pin) in cases {
            let xs = match truth.kind() {
                ModelKind::CycleDecay => (0..=8).map(|n| n as f64).collect::<Vec<_>>(),
                _ => grid(12, 6.0),
            };
            let out = fit(truth.kind(), pin, &exact(&truth, &xs)).unwrap();
            let (got, want): (Vec<f64>, Vec<f64>) = match (out.model, truth) {
                (
                    DecayModel::FreeDecay { eps_s: a, gamma: b, gamma_static: c },
                    DecayModel::FreeDecay { eps_s, gamma, gamma_static },
                ) => (vec![a, b, c], vec![eps_s, gamma, gamma_static]),
                (
                    DecayModel::CycleDecay { eps_s: a, eps_m: b },
                    DecayModel::CycleDecay { eps_s, eps_m },
                ) => (vec![a, b], vec![eps_s, eps_m]),
                (DecayModel::Retention { eta: a }, DecayModel::Retention { eta }) => {
                    (vec![a], vec![eta])
                }
                _ => unreachable!("fit preserves the model kind"),
            };
            for (g, w) in got.iter().zip(&want) {
                assert!(
                    (g - w).abs() <= 1e-6 * (1.0 + w.abs()),
                    "{truth:?}: got {got:?}, want {want:?} (chi2 {:.3e})",
                    out.chi2
                );
            }
            assert!(out.chi2 < 1e-12, "noiseless chi2 {:.3e}", out.chi2);
        }
    }

    #[test]
    fn gaussian_rate_recovers_from_synthetic_free_decay() {
        // Generating model: floor 0.002, pure quasi-static decay at
        // 2^{-1/2} Gamma = 0.5; 25 points to 6 s at 10^4 shots each.
        let truth = DecayModel::FreeDecay {
            eps_s: 0.002,
            gamma: 0.0,
            gamma_static: std::f64::consts::SQRT_2 * 0.5,
        };
        let data = synthetic(&truth, &grid(25, 6.0), 10_000, 17);
        let out = fit(ModelKind::FreeDecay, RatePinning::PinExponential, &data).unwrap();
        let DecayModel::FreeDecay { gamma_static, .. } = out.model else { unreachable!() };
        let scaled = gamma_static / std::f64::consts::SQRT_2;
        assert!(
            (scaled - 0.5).abs() < 0.025,
            "recovered 2^-1/2 Gamma = {scaled:.4}, want 0.5 within 5%"
        );
        let idx = out.free_names.iter().position(|n| n == "gamma_static").unwrap();
        assert!(out.std_errors[idx] > 0.0 && out.std_errors[idx] < 0.05);
        assert!(!out.boundary);
    }

    #[test]
    fn cycle_error_rate_recovers_from_synthetic_counts() {
        let truth = DecayModel::CycleDecay { eps_s: 0.04, eps_m: 0.029 };
        let xs: Vec<f64> = (0..=8).map(|n| n as f64).collect();
        let data = synthetic(&truth, &xs, 10_000, 23);
        let out = fit(ModelKind::CycleDecay, RatePinning::None, &data).unwrap();
        let DecayModel::CycleDecay { eps_s, eps_m } = out.model else { unreachable!() };
        assert!((eps_m - 0.029).abs() < 0.0029, "recovered eps_m = {eps_m:.4}");
        assert!((eps_s - 0.04).abs() < 0.01, "recovered eps_s = {eps_s:.4}");
    }

    #[test]
    fn retention_rate_recovers_from_synthetic_counts() {
        let truth = DecayModel::Retention { eta: 0.019 };
        let xs: Vec<f64> = (1..=8).map(|k| 2.89 * k as f64).collect();
        let data = synthetic(&truth, &xs, 10_000, 29);
        let out = fit(ModelKind::Retention, RatePinning::None, &data).unwrap();
        let DecayModel::Retention { eta } = out.model else { unreachable!() };
        assert!((eta - 0.019).abs() < 0.0019, "recovered eta = {eta:.5}");
    }

    #[test]
    fn constant_data_is_reported_as_a_boundary_solution() {
        let xs = grid(5, 4.0);
        let ones = FitData::from_counts(&xs, &[1.0; 5], &[1000; 5]);
        for (kind, pin) in [
            (ModelKind::FreeDecay, RatePinning::PinExponential),
            (ModelKind::CycleDecay, RatePinning::None),
            (ModelKind::Retention, RatePinning::None),
        ] {
            let out = fit(kind, pin, &ones).unwrap();
            assert!(out.boundary, "{kind:?} should flag boundary");
            assert!(out.chi2 < 1e-20);
            match out.model {
                DecayModel::FreeDecay { eps_s, gamma, gamma_static } => {
                    assert_eq!((eps_s, gamma, gamma_static), (0.0, 0.0, 0.0));
                }
                DecayModel::CycleDecay { eps_s, eps_m } => {
                    assert_eq!((eps_s, eps_m), (0.0, 0.0));
                }
                DecayModel::Retention { eta } => assert_eq!(eta, 0.0),
            }
        }
        // Constant below 1: still a boundary (zero-rate) solution with the
        // floor soaking up the offset.
        let flat = FitData::from_counts(&xs, &[0.8; 5], &[1000; 5]);
        let out = fit(ModelKind::FreeDecay, RatePinning::PinGaussian, &flat).unwrap();
        let DecayModel::FreeDecay { eps_s, gamma, .. } = out.model else { unreachable!() };
        assert!(out.boundary);
        assert!((eps_s - 0.2).abs() < 1e-12);
        assert_eq!(gamma, 0.0);
    }

    #[test]
    fn fit_input_validation_catches_bad_requests() {
        let ok = FitData::from_counts(&[1.0, 2.0, 3.0], &[0.9, 0.8, 0.7], &[100; 3]);
        assert!(matches!(
            fit(ModelKind::CycleDecay, RatePinning::PinGaussian, &ok),
            Err(FitError::PinningUnsupported)
        ));
        let short = FitData::from_counts(&[1.0, 2.0], &[0.9, 0.8], &[100; 2]);
        assert!(matches!(
            fit(ModelKind::Retention, RatePinning::None, &short),
            Err(FitError::TooFewPoints { got: 2, .. })
        ));
        let ragged = FitData { x: vec![1.0, 2.0, 3.0], p: vec![0.9], w: vec![1.0] };
        assert!(matches!(
            fit(ModelKind::Retention, RatePinning::None, &ragged),
            Err(FitError::ShapeMismatch)
        ));
        let bad = FitData { x: vec![1.0, 2.0, f64::NAN], p: vec![0.9; 3], w: vec![1.0; 3] };
        assert!(matches!(
            fit(ModelKind::Retention, RatePinning::None, &bad),
            Err(FitError::NonFinite)
        ));
    }

    #[test]
    fn binomial_weights_are_inverse_variances_with_a_half_count_floor() {
        let d = FitData::from_counts(&[1.0, 2.0], &[0.8, 1.0], &[100, 100]);
        assert!((d.w[0] - 100.0 / (0.8 * 0.2)).abs() < 1e-9);
        // p = 1 is clamped to 1 - 1/(2n).
        let pt = 1.0 - 0.005;
        assert!((d.w[1] - 100.0 / (pt * (1.0 - pt))).abs() < 1e-9);
    }

    #[test]
    fn crossing_time_matches_the_closed_form_and_flags_unbounded() {
        let model = DecayModel::FreeDecay { eps_s: 0.002, gamma: 0.0, gamma_static: 0.7071 };
        // 1/2 + 0.498 exp(-t^2/4) = 1 - 1/(2e)  =>  t = 2 sqrt(ln(0.498 / (0.5 - 1/(2e))))
        let target = PROCESS_FIDELITY_FLOOR;
        let a = 0.7071f64.powi(2) / 2.0;
        let hand = ((0.498 / (target - 0.5)).ln() / a).sqrt();
        let report = lifetime(&model, 1.0, target, 100.0);
        let t = report.seconds.unwrap();
        assert!((t - hand).abs() < 1e-9, "bisection {t:.9} vs closed form {hand:.9}");

        // A perfect memory never reaches the target.
        let flat = DecayModel::CycleDecay { eps_s: 0.0, eps_m: 0.0 };
        assert!(lifetime(&flat, 2.89, target, 1e4).seconds.is_none());

        // A memory starting below the target has already crossed at t = 0.
        let dead = DecayModel::FreeDecay { eps_s: 0.4, gamma: 1.0, gamma_static: 0.0 };
        assert_eq!(lifetime(&dead, 1.0, target, 10.0).seconds, Some(0.0));
    }

    #[test]
    fn lifetime_ratios_survive_common_time_rescaling() {
        let fast = DecayModel::FreeDecay { eps_s: 0.01, gamma: 0.0, gamma_static: 0.9 };
        let slow = DecayModel::FreeDecay { eps_s: 0.01, gamma: 0.0, gamma_static: 0.09 };
        let xs = grid(15, 4.0);
        for scale in [1.0, 2.0, 7.5] {
            let xs_scaled: Vec<f64> = xs.iter().map(|x| x * scale).collect();
            // Fitting rescaled grids to data generated on them rescales the
            // rates by 1/scale; lifetimes scale by `scale`; ratios cancel.
            let fit_fast = fit(
                ModelKind::FreeDecay,
                RatePinning::PinExponential,
                &exact_scaled(&fast, &xs, scale, &xs_scaled),
            )
            .unwrap();
            let fit_slow = fit(
                ModelKind::FreeDecay,
                RatePinning::PinExponential,
                &exact_scaled(&slow, &xs, scale, &xs_scaled),
            )
            .unwrap();
            let lt_fast = lifetime(&fit_fast.model, 1.0, PROCESS_FIDELITY_FLOOR, 1e4);
            let lt_slow = lifetime(&fit_slow.model, 1.0, PROCESS_FIDELITY_FLOOR, 1e4);
            let ratio = improvement_factor(&lt_slow, &lt_fast).unwrap();
            assert!((ratio - 10.0).abs() < 1e-3, "scale {scale}: ratio {ratio:.6}");
        }
    }

    /// Model values sampled on the unscaled grid, presented on the scaled
    /// grid (time-unit change).
    fn exact_scaled(model: &DecayModel, xs: &[f64], _scale: f64, xs_scaled: &[f64]) -> FitData {
        let p: Vec<f64> = xs.iter().map(|&x| model.evaluate(x)).collect();
        FitData::from_counts(xs_scaled, &p, &vec![10_000; xs.len()])
    }

    #[test]
    fn pinning_defaults_follow_the_state_class() {
        assert_eq!(RatePinning::for_state(LogicalState::Zero), RatePinning::PinGaussian);
        assert_eq!(RatePinning::for_state(LogicalState::One), RatePinning::PinGaussian);
        assert_eq!(RatePinning::for_state(LogicalState::Plus), RatePinning::PinExponential);
        assert_eq!(RatePinning::for_state(LogicalState::MinusI), RatePinning::PinExponential);
    }

    proptest! {
        /// The analytic Jacobian agrees with central differences at random
        /// interior parameter points.
        #[test]
        fn jacobian_is_exact_at_random_interior_points(
            eps_s in 0.001..0.4f64,
            gamma in 0.01..1.5f64,
            gamma_static in 0.01..1.5f64,
            x in 0.0..6.0f64,
        ) {
            let data = FitData { x: vec![0.0], p: vec![1.0], w: vec![1.0] };
            let prob = Problem { kind: ModelKind::FreeDecay, pin: RatePinning::None, data: &data };
            let theta = [eps_s, gamma, gamma_static];
            let mut analytic = [0.0; 3];
            prob.jacobian_row(&theta, x, &mut analytic);
            for j in 0..3 {
                let h = 1e-6 * (1.0 + theta[j].abs());
                let mut plus = theta;
                plus[j] += h;
                let mut minus = theta;
                minus[j] -= h;
                let numeric = (prob.curve(&plus, x) - prob.curve(&minus, x)) / (2.0 * h);
                prop_assert!((analytic[j] - numeric).abs() <= 1e-6 * (1.0 + numeric.abs()));
            }
        }

        /// Noisy fits stay inside the parameter box and quote finite errors.
        #[test]
        fn fits_respect_parameter_bounds(seed in 0u64..50) {
            let truth = DecayModel::CycleDecay { eps_s: 0.05, eps_m: 0.02 };
            let xs: Vec<f64> = (0..=6).map(|n| n as f64).collect();
            let data = synthetic(&truth, &xs, 500, seed);
            let out = fit(ModelKind::CycleDecay, RatePinning::None, &data).unwrap();
            let DecayModel::CycleDecay { eps_s, eps_m } = out.model else { unreachable!() };
            prop_assert!((0.0..=0.5).contains(&eps_s));
            prop_assert!((0.0..=0.5).contains(&eps_m));
            prop_assert!(out.chi2.is_finite());
        }
    }
}
