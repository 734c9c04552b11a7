//! Stochastic gradient reconstruction of `tau(omega)`.
//!
//! Each iteration samples one experiment, computes its gradient and takes
//! either an Armijo-backtracked step or a full-matrix AdaGrad step. Norms and
//! step directions act on the vector of nodal gradient values; the geometry
//! diagnostics use the frequency quadrature instead.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::inverse::{frechet_gradient_report, loss, SourceTestPair};
use crate::material::{MaterialModel, TauBounds};

/// A sum of per-experiment losses `L(tau) = sum_i L_i(tau)`.
pub trait Objective {
    fn n_terms(&self) -> usize;

    fn dim(&self) -> usize;

    /// `L_i(tau)`.
    fn term_loss(&self, i: usize, tau: &[f64]) -> Result<f64>;

    /// `(L_i(tau), grad L_i(tau))`.
    fn term_gradient(&self, i: usize, tau: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn total_loss(&self, tau: &[f64]) -> Result<f64> {
        (0..self.n_terms()).map(|i| self.term_loss(i, tau)).sum()
    }
}

/// The transport-constrained objective over a set of experiments.
pub struct PdeObjective<'a> {
    pub grid: &'a PhaseGrid,
    pub material: &'a MaterialModel,
    pub pairs: &'a [SourceTestPair],
}

impl PdeObjective<'_> {
    fn material_for(&self, tau: &[f64]) -> Result<MaterialModel> {
        self.material.with_tau(tau.to_vec())
    }
}

impl Objective for PdeObjective<'_> {
    fn n_terms(&self) -> usize {
        self.pairs.len()
    }

    fn dim(&self) -> usize {
        self.grid.n_omega()
    }

    fn term_loss(&self, i: usize, tau: &[f64]) -> Result<f64> {
        Ok(loss(&self.material_for(tau)?, self.grid, &self.pairs[i])?.0)
    }

    fn term_gradient(&self, i: usize, tau: &[f64]) -> Result<(f64, Vec<f64>)> {
        let r = frechet_gradient_report(&self.material_for(tau)?, self.grid, &self.pairs[i])?;
        Ok((r.loss, r.gradient.0))
    }
}

/// Step rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    /// Backtracking from `alpha_max` until
    /// `L(tau - alpha g) <= L(tau) - c alpha |g|^2`.
    Armijo { c: f64, alpha_max: f64 },
    /// `tau <- tau - alpha (delta I + G)^{-1/2} g` with `G = sum g g^T`.
    Adagrad { alpha: f64, delta: f64 },
}

impl Method {
    pub fn armijo() -> Self {
        Method::Armijo {
            c: 1e-4,
            alpha_max: 1.0,
        }
    }

    pub fn adagrad() -> Self {
        Method::Adagrad {
            alpha: 0.5,
            delta: 1e-8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Armijo { .. } => "armijo",
            Method::Adagrad { .. } => "adagrad",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Method::Armijo { c, alpha_max } => {
                if !(c > 0.0 && c < 1.0) {
                    return Err(Error::InvalidOptimizer(format!(
                        "Armijo c must lie in (0, 1), got {c}"
                    )));
                }
                if !(alpha_max > 0.0 && alpha_max.is_finite()) {
                    return Err(Error::InvalidOptimizer(format!(
                        "alpha_max must be positive, got {alpha_max}"
                    )));
                }
            }
            Method::Adagrad { alpha, delta } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::InvalidOptimizer(format!(
                        "alpha must be positive, got {alpha}"
                    )));
                }
                if !(delta > 0.0 && delta.is_finite()) {
                    return Err(Error::InvalidOptimizer(format!(
                        "delta must be positive, got {delta}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// How the experiment index is drawn each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Independent uniform draws (with replacement).
    #[default]
    Iid,
    /// A fresh random permutation every pass over the experiments.
    Shuffled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub method: Method,
    pub iterations: usize,
    /// Evaluate the full loss every this many iterations (and at the ends).
    pub loss_every: usize,
    /// Stop once a sampled gradient has Euclidean norm below this.
    pub grad_tol: f64,
    pub sampling: Sampling,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::armijo(),
            iterations: 500,
            loss_every: 1,
            grad_tol: 0.0,
            sampling: Sampling::Iid,
            seed: 0,
        }
    }
}

/// Data for re-checking one Armijo acceptance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoRecord {
    pub c: f64,
    pub alpha: f64,
    pub f_before: f64,
    pub f_after: f64,
    pub grad_norm_sq: f64,
    pub accepted: bool,
}

impl ArmijoRecord {
    /// `f_after <= f_before - c alpha |g|^2`.
    pub fn sufficient_decrease(&self) -> bool {
        self.f_after <= self.f_before - self.c * self.alpha * self.grad_norm_sq
    }
}

/// One row per iterate `tau^n`. The step columns (`xi`, `alpha`,
/// `loss_sampled`, `grad_norm`) describe the step that produced it and are
/// empty for the initial row.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub n: usize,
    pub xi: Option<usize>,
    pub alpha: Option<f64>,
    pub loss_total: Option<f64>,
    pub loss_sampled: Option<f64>,
    pub error_e: Option<f64>,
    pub grad_norm: Option<f64>,
    pub armijo: Option<ArmijoRecord>,
    pub clamped: bool,
    /// The iterate `tau^n` itself.
    pub tau: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub tau: Vec<f64>,
    pub iteration: usize,
    pub bounds: TauBounds,
    pub history: Vec<HistoryRow>,
    /// `G = sum g g^T`, present once an AdaGrad step has run.
    pub adagrad_matrix: Option<DMatrix<f64>>,
    /// Eigenvalues of `G` after each AdaGrad step, ascending.
    pub adagrad_spectra: Vec<Vec<f64>>,
    pub skipped_steps: usize,
    pub clamp_hits: usize,
    rng: ChaCha8Rng,
    sampling: Sampling,
    queue: Vec<usize>,
}

impl OptimizerState {
    pub fn new(tau: Vec<f64>, bounds: TauBounds, seed: u64, sampling: Sampling) -> Self {
        Self {
            tau,
            iteration: 0,
            bounds,
            history: Vec::new(),
            adagrad_matrix: None,
            adagrad_spectra: Vec::new(),
            skipped_steps: 0,
            clamp_hits: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            sampling,
            queue: Vec::new(),
        }
    }

    /// Draws the next experiment index in `0..n`.
    pub fn sample(&mut self, n: usize) -> usize {
        match self.sampling {
            Sampling::Iid => self.rng.gen_range(0..n),
            Sampling::Shuffled => {
                if self.queue.is_empty() {
                    self.queue = (0..n).collect();
                    self.queue.shuffle(&mut self.rng);
                }
                self.queue.pop().expect("queue refilled")
            }
        }
    }

    fn clamp(&mut self, tau: Vec<f64>) -> (Vec<f64>, bool) {
        let mut hit = false;
        let out = tau
            .into_iter()
            .map(|t| {
                let c = self.bounds.clamp(t);
                hit |= c != t;
                c
            })
            .collect();
        (out, hit)
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// RMS distance `sqrt(mean (tau - tau*)^2)`.
pub fn reconstruction_error(tau: &[f64], tau_star: &[f64]) -> Result<f64> {
    if tau.len() != tau_star.len() || tau.is_empty() {
        return Err(Error::Shape(format!(
            "cannot compare tau of length {} with {}",
            tau.len(),
            tau_star.len()
        )));
    }
    let s: f64 = tau
        .iter()
        .zip(tau_star)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((s / tau.len() as f64).sqrt())
}

/// Outcome of a single step, before bookkeeping.
struct StepOutcome {
    xi: usize,
    alpha: f64,
    loss_sampled: f64,
    grad_norm: f64,
    armijo: Option<ArmijoRecord>,
    clamped: bool,
}

/// One SGD step with Armijo backtracking.
pub fn sgd_step_armijo<O: Objective + ?Sized>(
    state: &mut OptimizerState,
    objective: &O,
    c: f64,
    alpha_max: f64,
) -> Result<()> {
    Method::Armijo { c, alpha_max }.validate()?;
    let xi = state.sample(objective.n_terms());
    let outcome = armijo_at(state, objective, xi, c, alpha_max)?;
    record(state, outcome, None, None);
    Ok(())
}

fn armijo_at<O: Objective + ?Sized>(
    state: &mut OptimizerState,
    objective: &O,
    xi: usize,
    c: f64,
    alpha_max: f64,
) -> Result<StepOutcome> {
    let (f_before, g) = objective.term_gradient(xi, &state.tau)?;
    let g_sq = norm_sq(&g);
    let alpha_min = alpha_max * (2.0f64).powi(-30);
    let mut alpha = alpha_max;
    let mut record = ArmijoRecord {
        c,
        alpha,
        f_before,
        f_after: f_before,
        grad_norm_sq: g_sq,
        accepted: g_sq == 0.0,
    };
    let mut clamped = false;
    if g_sq > 0.0 {
        while alpha >= alpha_min {
            let trial: Vec<f64> = state
                .tau
                .iter()
                .zip(&g)
                .map(|(t, gi)| t - alpha * gi)
                .collect();
            let (trial, hit) = state.clamp(trial);
            let f_after = objective.term_loss(xi, &trial)?;
            record.alpha = alpha;
            record.f_after = f_after;
            if record.sufficient_decrease() {
                record.accepted = true;
                state.tau = trial;
                clamped = hit;
                break;
            }
            alpha *= 0.5;
        }
        if !record.accepted {
            state.skipped_steps += 1;
            alpha = 0.0;
        }
    }
    Ok(StepOutcome {
        xi,
        alpha,
        loss_sampled: f_before,
        grad_norm: g_sq.sqrt(),
        armijo: Some(record),
        clamped,
    })
}

/// `(delta I + G)^{-1/2} g` through a symmetric eigendecomposition; negative
/// eigenvalues of `G` (rounding) are clamped to zero.
pub fn adagrad_direction(matrix: &DMatrix<f64>, delta: f64, g: &[f64]) -> Result<Vec<f64>> {
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("AdaGrad matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(matrix.clone());
    let q = &eig.eigenvectors;
    let coeffs = q.transpose() * DVector::from_column_slice(g);
    let scaled = DVector::from_iterator(
        coeffs.len(),
        coeffs
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, lam)| c / (delta + lam.max(0.0)).sqrt()),
    );
    let d = q * scaled;
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("AdaGrad direction is not finite".into()));
    }
    Ok(d.iter().copied().collect())
}

fn sorted_eigenvalues(matrix: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(matrix.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// One SGD step with the full-matrix AdaGrad preconditioner.
pub fn sgd_step_adagrad<O: Objective + ?Sized>(
    state: &mut OptimizerState,
    objective: &O,
    alpha: f64,
    delta: f64,
) -> Result<()> {
    Method::Adagrad { alpha, delta }.validate()?;
    let xi = state.sample(objective.n_terms());
    let outcome = adagrad_at(state, objective, xi, alpha, delta)?;
    record(state, outcome, None, None);
    Ok(())
}

fn adagrad_at<O: Objective + ?Sized>(
    state: &mut OptimizerState,
    objective: &O,
    xi: usize,
    alpha: f64,
    delta: f64,
) -> Result<StepOutcome> {
    let dim = objective.dim();
    let (f_before, g) = objective.term_gradient(xi, &state.tau)?;
    let gv = DVector::from_column_slice(&g);
    let matrix = state
        .adagrad_matrix
        .get_or_insert_with(|| DMatrix::zeros(dim, dim));
    *matrix += &gv * gv.transpose();
    let matrix = matrix.clone();
    state.adagrad_spectra.push(sorted_eigenvalues(&matrix));
    let mut clamped = false;
    if norm_sq(&g) > 0.0 {
        let d = adagrad_direction(&matrix, delta, &g)?;
        let next: Vec<f64> = state
            .tau
            .iter()
            .zip(&d)
            .map(|(t, di)| t - alpha * di)
            .collect();
        let (next, hit) = state.clamp(next);
        state.tau = next;
        clamped = hit;
    }
    Ok(StepOutcome {
        xi,
        alpha,
        loss_sampled: f_before,
        grad_norm: norm_sq(&g).sqrt(),
        armijo: None,
        clamped,
    })
}

fn record(
    state: &mut OptimizerState,
    o: StepOutcome,
    loss_total: Option<f64>,
    error_e: Option<f64>,
) {
    state.iteration += 1;
    if o.clamped {
        state.clamp_hits += 1;
    }
    state.history.push(HistoryRow {
        n: state.iteration,
        xi: Some(o.xi),
        alpha: Some(o.alpha),
        loss_total,
        loss_sampled: Some(o.loss_sampled),
        error_e,
        grad_norm: Some(o.grad_norm),
        armijo: o.armijo,
        clamped: o.clamped,
        tau: state.tau.clone(),
    });
}

/// Runs the configured number of SGD iterations from `tau0`.
///
/// When `tau_star` is given, the reconstruction error is recorded on every
/// row. The full loss is recorded every `loss_every` rows and on the first
/// and last rows.
pub fn run<O: Objective + ?Sized>(
    objective: &O,
    tau0: Vec<f64>,
    bounds: TauBounds,
    config: &OptimizerConfig,
    tau_star: Option<&[f64]>,
) -> Result<OptimizerState> {
    config.method.validate()?;
    if tau0.len() != objective.dim() {
        return Err(Error::Shape(format!(
            "initial tau has {} entries, objective expects {}",
            tau0.len(),
            objective.dim()
        )));
    }
    if objective.n_terms() == 0 {
        return Err(Error::InvalidOptimizer(
            "no experiments to sample from".into(),
        ));
    }
    let loss_every = config.loss_every.max(1);
    let mut state = OptimizerState::new(tau0, bounds, config.seed, config.sampling);
    let error = |tau: &[f64]| tau_star.map(|s| reconstruction_error(tau, s)).transpose();
    state.history.push(HistoryRow {
        n: 0,
        xi: None,
        alpha: None,
        loss_total: Some(objective.total_loss(&state.tau)?),
        loss_sampled: None,
        error_e: error(&state.tau)?,
        grad_norm: None,
        armijo: None,
        clamped: false,
        tau: state.tau.clone(),
    });
    for it in 1..=config.iterations {
        let xi = state.sample(objective.n_terms());
        let outcome = match config.method {
            Method::Armijo { c, alpha_max } => armijo_at(&mut state, objective, xi, c, alpha_max)?,
            Method::Adagrad { alpha, delta } => {
                adagrad_at(&mut state, objective, xi, alpha, delta)?
            }
        };
        let stop = outcome.grad_norm < config.grad_tol;
        let last = it == config.iterations || stop;
        let loss_total = if it % loss_every == 0 || last {
            Some(objective.total_loss(&state.tau)?)
        } else {
            None
        };
        let e = error(&state.tau)?;
        record(&mut state, outcome, loss_total, e);
        if stop {
            break;
        }
    }
    Ok(state)
}

/// Norms and pairwise cosines of a gradient family.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientGeometry {
    pub norms: Vec<f64>,
    /// `cosines[i][j]`; rows and columns of zero gradients are `NaN`.
    pub cosines: Vec<Vec<f64>>,
}

impl GradientGeometry {
    /// Smallest off-diagonal cosine among nonzero gradients.
    pub fn min_cosine(&self) -> f64 {
        let n = self.norms.len();
        let mut m = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                if i != j && self.cosines[i][j].is_finite() {
                    m = m.min(self.cosines[i][j]);
                }
            }
        }
        m
    }

    /// Norms divided by the largest one.
    pub fn norm_ratios(&self) -> Vec<f64> {
        let max = self.norms.iter().cloned().fold(0.0, f64::max);
        self.norms.iter().map(|n| n / max).collect()
    }

    /// `1 - min |g_i| / max |g_i|` over nonzero gradients.
    pub fn norm_spread(&self) -> f64 {
        let ratios = self.norm_ratios();
        let min = ratios
            .iter()
            .cloned()
            .filter(|r| *r > 0.0)
            .fold(f64::INFINITY, f64::min);
        1.0 - min
    }
}

/// Norms and cosines under the inner product `<a, b> = sum_k w_k a_k b_k`.
pub fn gradient_geometry(gradients: &[Vec<f64>], weights: &[f64]) -> Result<GradientGeometry> {
    if gradients.len() < 2 {
        return Err(Error::Shape("need at least two gradients".into()));
    }
    if gradients.iter().any(|g| g.len() != weights.len()) {
        return Err(Error::Shape(
            "gradient length differs from the weight count".into(),
        ));
    }
    let inner = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(weights)
            .map(|((x, y), w)| x * y * w)
            .sum()
    };
    let norms: Vec<f64> = gradients.iter().map(|g| inner(g, g).sqrt()).collect();
    let n = gradients.len();
    let mut cosines = vec![vec![f64::NAN; n]; n];
    for i in 0..n {
        for j in 0..n {
            if norms[i] > 0.0 && norms[j] > 0.0 {
                cosines[i][j] = inner(&gradients[i], &gradients[j]) / (norms[i] * norms[j]);
            }
        }
    }
    Ok(GradientGeometry { norms, cosines })
}

/// Column `j` of the result is `sum_i a[i][j] g_i`.
pub fn recombine_with(gradients: &[Vec<f64>], a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = gradients.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::Shape(format!("mixing matrix must be {n} x {n}")));
    }
    let dim = gradients.first().map_or(0, |g| g.len());
    Ok((0..n)
        .map(|j| {
            let mut out = vec![0.0; dim];
            for (i, g) in gradients.iter().enumerate() {
                for (o, v) in out.iter_mut().zip(g) {
                    *o += a[i][j] * v;
                }
            }
            out
        })
        .collect())
}

/// A seeded matrix with independent entries uniform in `(0, 1)`.
pub fn uniform_mixing_matrix(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..n).map(|_| rng.gen::<f64>()).collect())
        .collect()
}

/// Recombines gradients with a seeded uniform mixing matrix.
pub fn recombine_gradients(gradients: &[Vec<f64>], seed: u64) -> Result<Vec<Vec<f64>>> {
    if gradients.len() < 2 {
        return Err(Error::Shape("need at least two gradients".into()));
    }
    recombine_with(gradients, &uniform_mixing_matrix(gradients.len(), seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// `L_i(tau) = (a_i . tau - b_i)^2 / 2`.
    struct LeastSquares {
        rows: Vec<Vec<f64>>,
        rhs: Vec<f64>,
    }

    impl Objective for LeastSquares {
        fn n_terms(&self) -> usize {
            self.rows.len()
        }
        fn dim(&self) -> usize {
            self.rows[0].len()
        }
        fn term_loss(&self, i: usize, tau: &[f64]) -> Result<f64> {
            let r: f64 = self.rows[i]
                .iter()
                .zip(tau)
                .map(|(a, t)| a * t)
                .sum::<f64>()
                - self.rhs[i];
            Ok(0.5 * r * r)
        }
        fn term_gradient(&self, i: usize, tau: &[f64]) -> Result<(f64, Vec<f64>)> {
            let r: f64 = self.rows[i]
                .iter()
                .zip(tau)
                .map(|(a, t)| a * t)
                .sum::<f64>()
                - self.rhs[i];
            Ok((0.5 * r * r, self.rows[i].iter().map(|a| r * a).collect()))
        }
    }

    #[test]
    fn reconstruction_error_examples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(reconstruction_error(&a, &a).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|v| v + 0.1).collect();
        assert_relative_eq!(reconstruction_error(&b, &a).unwrap(), 0.1, epsilon = 1e-15);
        assert!(reconstruction_error(&a, &a[..2]).is_err());
    }

    #[test]
    fn rank_one_adagrad_closed_form() {
        let g = [0.3, -0.4, 1.2];
        let gv = DVector::from_column_slice(&g);
        let m = &gv * gv.transpose();
        let delta = 1e-3;
        let d = adagrad_direction(&m, delta, &g).unwrap();
        let s = (delta + norm_sq(&g)).sqrt();
        for (di, gi) in d.iter().zip(&g) {
            assert_relative_eq!(*di, gi / s, max_relative = 1e-10);
        }
    }

    #[test]
    fn zero_gradient_leaves_tau_unchanged() {
        let obj = LeastSquares {
            rows: vec![vec![1.0, 0.0]],
            rhs: vec![1.0],
        };
        let mut s = OptimizerState::new(vec![1.0, 2.0], TauBounds::default(), 0, Sampling::Iid);
        sgd_step_armijo(&mut s, &obj, 1e-4, 1.0).unwrap();
        assert_eq!(s.tau, vec![1.0, 2.0]);
        assert!(s.history[0].armijo.unwrap().accepted);
        sgd_step_adagrad(&mut s, &obj, 0.5, 1e-8).unwrap();
        assert_eq!(s.tau, vec![1.0, 2.0]);
        assert!(s.adagrad_matrix.unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn shuffled_sampling_visits_every_index_each_pass() {
        let mut s = OptimizerState::new(vec![1.0], TauBounds::default(), 4, Sampling::Shuffled);
        for _ in 0..3 {
            let mut seen: Vec<usize> = (0..7).map(|_| s.sample(7)).collect();
            seen.sort();
            assert_eq!(seen, (0..7).collect::<Vec<_>>());
        }
    }

    #[test]
    fn geometry_of_simple_families() {
        let w = [1.0, 1.0, 1.0];
        let same = vec![vec![1.0, 2.0, 3.0]; 3];
        let g = gradient_geometry(&same, &w).unwrap();
        assert!(g.cosines.iter().flatten().all(|c| (c - 1.0).abs() < 1e-14));
        let bumps = vec![vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0]];
        let g = gradient_geometry(&bumps, &w).unwrap();
        assert_eq!(g.cosines[0][1], 0.0);
        assert_relative_eq!(g.norm_spread(), 0.5);
    }

    #[test]
    fn recombination_hooks() {
        let grads = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let eye: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| (i == j) as u8 as f64).collect())
            .collect();
        assert_eq!(recombine_with(&grads, &eye).unwrap(), grads);
        let ones = vec![vec![1.0; 3]; 3];
        let r = recombine_with(&grads, &ones).unwrap();
        assert!(r.iter().all(|v| v == &r[0]));
        let a = uniform_mixing_matrix(3, 9);
        assert!(a.iter().flatten().all(|v| *v > 0.0 && *v < 1.0));
        assert_eq!(a, uniform_mixing_matrix(3, 9));
    }
}
