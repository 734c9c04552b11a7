//! Experiments, the boundary measurement map, and adjoint gradients.
//!
//! An experiment injects a beam `phi` at `x = 0` and records the boundary
//! temperature tested against a window `psi` centred on the ballistic
//! round-trip time. With `l = Lambda_tau - d` the per-experiment loss is
//! `l^2 / 2`, and its derivative with respect to `tau(omega)` is assembled
//! from the stored forward solution `h` and the adjoint `p`.
//!
//! Gradients are densities with respect to `d omega`: a perturbation
//! `delta(omega)` changes the loss by `sum_k w_k g_k delta_k` with trapezoid
//! weights `w_k` (see [`directional_derivative`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collision::apply_l;
use crate::error::{Error, Result};
use crate::grid::{Axis, PhaseGrid};
use crate::material::MaterialModel;
use crate::transport::{
    boundary_temperature, solve_adjoint, solve_forward, BoundarySource, Source, TestWindow,
    Trajectory,
};

/// Round-trip time of a ballistic beam reflected at `x = 1`:
/// `t0 + 2 / (mu0 v(omega0))`.
pub fn arrival_time(t0: f64, mu0: f64, omega0: f64, material: &MaterialModel) -> Result<f64> {
    arrival_time_with_speed(t0, mu0, velocity_at(material, omega0)?)
}

/// Same as [`arrival_time`] with the group velocity given directly.
pub fn arrival_time_with_speed(t0: f64, mu0: f64, v: f64) -> Result<f64> {
    if !(mu0 > 0.0) {
        return Err(Error::InvalidExperiment(format!(
            "arrival time needs mu0 > 0, got {mu0}"
        )));
    }
    if !(v > 0.0) {
        return Err(Error::InvalidExperiment(format!(
            "group velocity must be positive, got {v}"
        )));
    }
    Ok(t0 + 2.0 / (mu0 * v))
}

fn velocity_at(material: &MaterialModel, omega0: f64) -> Result<f64> {
    let om = material.omega();
    let v = material.velocity();
    if let Some(k) = om
        .iter()
        .position(|w| (w - omega0).abs() <= 1e-9 * w.abs().max(1.0))
    {
        return Ok(v[k]);
    }
    if omega0 < om[0] || omega0 > om[om.len() - 1] {
        return Err(Error::InvalidExperiment(format!(
            "omega0 = {omega0} is outside the frequency grid"
        )));
    }
    let k = om.partition_point(|w| *w < omega0);
    let s = (omega0 - om[k - 1]) / (om[k] - om[k - 1]);
    Ok(v[k - 1] + s * (v[k] - v[k - 1]))
}

/// A source paired with its measurement window and (once generated) datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceTestPair {
    pub source: BoundarySource,
    pub window: TestWindow,
    #[serde(default)]
    pub datum: Option<f64>,
}

impl SourceTestPair {
    /// Builds a pair whose window is centred at the arrival time of the beam.
    pub fn centered(
        source: BoundarySource,
        window_width: f64,
        material: &MaterialModel,
    ) -> Result<Self> {
        let center = arrival_time(source.t0, source.mu0, source.omega0, material)?;
        Ok(Self {
            source,
            window: TestWindow {
                center,
                width: window_width,
            },
            datum: None,
        })
    }

    /// Checks that the window lies inside the time horizon:
    /// `t_R + margin * width <= T`.
    pub fn validate(&self, horizon: f64, margin: f64) -> Result<()> {
        self.source.validate()?;
        if !(self.window.width > 0.0) {
            return Err(Error::InvalidExperiment(format!(
                "window width must be positive, got {}",
                self.window.width
            )));
        }
        let end = self.window.center + margin * self.window.width;
        if end > horizon + 1e-12 {
            return Err(Error::InvalidExperiment(format!(
                "window centred at {:.4} with width {} extends to {:.4}, past the horizon {}",
                self.window.center, self.window.width, end, horizon
            )));
        }
        Ok(())
    }

    fn datum(&self) -> Result<f64> {
        self.datum
            .ok_or_else(|| Error::InvalidExperiment("pair has no recorded datum".into()))
    }
}

/// Shared settings for a family of experiments: one beam per frequency node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentDesign {
    pub t0: f64,
    pub mu0: f64,
    pub widths: [f64; 3],
    pub window_width: f64,
    /// Required clearance of the window before the horizon, in widths.
    pub window_margin: f64,
}

impl Default for ExperimentDesign {
    fn default() -> Self {
        Self {
            t0: 0.1,
            mu0: 0.93,
            widths: [0.01, 0.01, 0.1],
            window_width: 0.08,
            window_margin: 1.0,
        }
    }
}

impl ExperimentDesign {
    /// One pair per frequency node, in node order.
    pub fn pairs(&self, material: &MaterialModel, grid: &PhaseGrid) -> Result<Vec<SourceTestPair>> {
        grid.omega
            .iter()
            .map(|&omega| {
                let source = BoundarySource::new(self.t0, self.mu0, omega, self.widths)?;
                let pair = SourceTestPair::centered(source, self.window_width, material)?;
                pair.validate(grid.final_time(), self.window_margin)?;
                Ok(pair)
            })
            .collect()
    }
}

/// `Lambda = <T(t, 0) psi(t)>_t` from a boundary temperature trace.
pub fn window_average(grid: &PhaseGrid, trace: &[f64], window: &TestWindow) -> f64 {
    let wt = grid.weights(Axis::T);
    let total: f64 = trace
        .iter()
        .zip(&grid.t)
        .zip(wt)
        .map(|((v, &t), w)| w * v * window.value(t))
        .sum();
    total / grid.measure(Axis::T)
}

/// Boundary measurement `Lambda_tau(phi, psi)`.
pub fn forward_map(
    material: &MaterialModel,
    grid: &PhaseGrid,
    pair: &SourceTestPair,
) -> Result<f64> {
    forward_map_with(material, grid, &pair.source, &pair.window)
}

/// [`forward_map`] for an arbitrary source.
pub fn forward_map_with<S: Source + ?Sized>(
    material: &MaterialModel,
    grid: &PhaseGrid,
    source: &S,
    window: &TestWindow,
) -> Result<f64> {
    let trace = boundary_temperature(material, grid, source, 1.0)?;
    Ok(window_average(grid, &trace, window))
}

/// Fills in `d_i = Lambda_{tau*}(phi_i, psi_i)`.
pub fn generate_data(
    material_star: &MaterialModel,
    grid: &PhaseGrid,
    pairs: &[SourceTestPair],
) -> Result<Vec<SourceTestPair>> {
    pairs
        .iter()
        .map(|p| {
            let mut out = p.clone();
            out.datum = Some(forward_map(material_star, grid, p)?);
            Ok(out)
        })
        .collect()
}

/// `(L_i, l_i)` with `L_i = l_i^2 / 2`.
pub fn loss(
    material: &MaterialModel,
    grid: &PhaseGrid,
    pair: &SourceTestPair,
) -> Result<(f64, f64)> {
    let d = pair.datum()?;
    let l = forward_map(material, grid, pair)? - d;
    Ok((0.5 * l * l, l))
}

/// Total loss `sum_i L_i`.
pub fn total_loss(
    material: &MaterialModel,
    grid: &PhaseGrid,
    pairs: &[SourceTestPair],
) -> Result<f64> {
    pairs
        .iter()
        .map(|p| loss(material, grid, p).map(|(v, _)| v))
        .sum()
}

/// Derivative density of a loss with respect to `tau` at the frequency nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Index of the largest magnitude.
    pub fn argmax_abs(&self) -> usize {
        let mut best = 0;
        for (k, v) in self.0.iter().enumerate() {
            if v.abs() > self.0[best].abs() {
                best = k;
            }
        }
        best
    }
}

/// First-order change of a loss along `direction`:
/// `sum_k w_k g_k direction_k` with the omega trapezoid weights.
pub fn directional_derivative(
    grid: &PhaseGrid,
    gradient: &GradientVector,
    direction: &[f64],
) -> f64 {
    grid.omega_inner(gradient.values(), direction)
}

/// Everything computed along the way to a gradient.
#[derive(Debug, Clone)]
pub struct GradientReport {
    pub gradient: GradientVector,
    pub loss: f64,
    pub mismatch: f64,
    /// Individual contributions in assembly order; they sum to `gradient`.
    pub terms: [Vec<f64>; 6],
}

/// Adjoint-state derivative of `L_i = l_i^2 / 2` with respect to `tau`.
pub fn frechet_gradient(
    material: &MaterialModel,
    grid: &PhaseGrid,
    pair: &SourceTestPair,
) -> Result<GradientVector> {
    Ok(frechet_gradient_report(material, grid, pair)?.gradient)
}

/// [`frechet_gradient`] with the loss, mismatch and per-term breakdown.
pub fn frechet_gradient_report(
    material: &MaterialModel,
    grid: &PhaseGrid,
    pair: &SourceTestPair,
) -> Result<GradientReport> {
    let d = pair.datum()?;
    let h = solve_forward(material, grid, &pair.source, 1.0)?;
    let h_star_mean = material.h_star_mean();
    let boundary_mean: Vec<f64> = (0..grid.nt())
        .map(|n| grid.mean_mu_omega(h.left_trace(n)))
        .collect();
    let trace: Vec<f64> = boundary_mean.iter().map(|v| v / h_star_mean).collect();
    let l = window_average(grid, &trace, &pair.window) - d;

    let p = solve_adjoint(material, grid, l, &pair.window)?;
    let terms = assemble_terms(material, grid, pair, &h, &p, &boundary_mean, l);
    let mut g = vec![0.0; grid.n_omega()];
    for term in &terms {
        for (gk, tk) in g.iter_mut().zip(term) {
            *gk += tk;
        }
    }
    Ok(GradientReport {
        gradient: GradientVector(g),
        loss: 0.5 * l * l,
        mismatch: l,
        terms,
    })
}

fn assemble_terms(
    material: &MaterialModel,
    grid: &PhaseGrid,
    pair: &SourceTestPair,
    h: &Trajectory,
    p: &Trajectory,
    boundary_mean: &[f64],
    l: f64,
) -> [Vec<f64>; 6] {
    let nt = grid.nt();
    let nx = grid.nx();
    let n_mu = grid.n_mu();
    let nw = grid.n_omega();
    let sl = grid.slice_len();
    let wt = grid.weights(Axis::T);
    let wx = grid.weights(Axis::X);
    let wm = grid.weights(Axis::Mu);
    let wo = grid.weights(Axis::Omega);
    let big_w = grid.measure(Axis::Omega);
    let big_t = grid.measure(Axis::T);
    let c = 1.0 / (2.0 * big_w * big_t);
    let tau = material.tau();
    let v = material.velocity();
    let hs = material.h_star();
    let hm = material.h_star_mean();
    let half = n_mu / 2;

    // Boundary integrals over t and mu > 0.
    let mut psi_phi = vec![0.0; nw];
    let mut mu_p_phi = vec![0.0; nw];
    let mut lambda_h = 0.0;
    for n in 0..nt {
        let t = grid.t[n];
        let psi = pair.window.value(t);
        lambda_h += wt[n] * boundary_mean[n] * psi;
        let p0 = p.left_trace(n);
        for m in half..n_mu {
            let mu = grid.mu[m];
            for k in 0..nw {
                let phi = pair.source.value(t, mu, grid.omega[k]);
                if phi == 0.0 {
                    continue;
                }
                let w = wt[n] * wm[m];
                psi_phi[k] += w * psi * phi;
                mu_p_phi[k] += w * mu * p0[m * nw + k] * phi;
            }
        }
    }
    lambda_h /= big_t;

    // Interior integrals over t, x, mu.
    let mut p_lh = vec![0.0; nw];
    let mut p_mean_h = vec![0.0; nw];
    let mut mean_h_int_p = 0.0;
    let mut lh = vec![0.0; sl];
    for n in 0..nt {
        for j in 0..nx {
            let w_tx = wt[n] * wx[j];
            if w_tx == 0.0 {
                continue;
            }
            let hj = h.slice(n, j);
            let pj = p.slice(n, j);
            let mean_h = grid.mean_mu_omega(hj);
            apply_l(hj, material, grid, &mut lh);
            let mut int_p = 0.0;
            for m in 0..n_mu {
                let w = w_tx * wm[m];
                for k in 0..nw {
                    let i = m * nw + k;
                    p_lh[k] += w * pj[i] * lh[i];
                    p_mean_h[k] += w * pj[i] * mean_h;
                    int_p += wm[m] * wo[k] * pj[i];
                }
            }
            mean_h_int_p += w_tx * mean_h * int_p;
        }
    }

    let mut terms: [Vec<f64>; 6] = Default::default();
    for term in terms.iter_mut() {
        term.resize(nw, 0.0);
    }
    for k in 0..nw {
        terms[0][k] = -l * c * psi_phi[k] / (hm * tau[k] * tau[k]);
        terms[1][k] = l * lambda_h * hs[k] / (tau[k] * big_w * hm * hm);
        terms[2][k] = c * v[k] * mu_p_phi[k] / (tau[k] * hs[k]);
        terms[3][k] = c * p_lh[k] / (tau[k] * hs[k]);
        terms[4][k] = c * p_mean_h[k] / (tau[k] * hm);
        terms[5][k] = -c * hs[k] * mean_h_int_p / (tau[k] * big_w * hm * hm);
    }
    terms
}

/// How the finite-difference step is applied to `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    /// `tau_k (1 +- s d_k)`.
    #[default]
    Relative,
    /// `tau_k +- s d_k`.
    Absolute,
}

/// The perturbation of `tau` that a finite-difference probe applies for a
/// unit step, i.e. the direction to pair with the adjoint gradient.
pub fn effective_direction(
    material: &MaterialModel,
    direction: &[f64],
    mode: StepMode,
) -> Vec<f64> {
    match mode {
        StepMode::Absolute => direction.to_vec(),
        StepMode::Relative => direction
            .iter()
            .zip(material.tau())
            .map(|(d, t)| d * t)
            .collect(),
    }
}

/// Central difference `(f(x + s d) - f(x - s d)) / (2 s)`.
pub fn central_difference<F>(f: F, x: &[f64], direction: &[f64], step: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if direction.iter().all(|&d| d == 0.0) {
        return Ok(0.0);
    }
    let plus: Vec<f64> = x.iter().zip(direction).map(|(a, d)| a + step * d).collect();
    let minus: Vec<f64> = x.iter().zip(direction).map(|(a, d)| a - step * d).collect();
    Ok((f(&plus)? - f(&minus)?) / (2.0 * step))
}

/// Finite-difference reference for the directional derivative of `L_i`.
///
/// Compare with `directional_derivative(grid, g, &effective_direction(..))`.
pub fn fd_gradient_oracle(
    material: &MaterialModel,
    grid: &PhaseGrid,
    pair: &SourceTestPair,
    direction: &[f64],
    step: f64,
    mode: StepMode,
) -> Result<f64> {
    if direction.len() != grid.n_omega() {
        return Err(Error::Shape(format!(
            "direction has {} entries, grid has {} frequency nodes",
            direction.len(),
            grid.n_omega()
        )));
    }
    let d = effective_direction(material, direction, mode);
    central_difference(
        |tau| {
            let m = material.with_tau(tau.to_vec())?;
            Ok(loss(&m, grid, pair)?.0)
        },
        material.tau(),
        &d,
        step,
    )
}

/// Summary of a Lipschitz probe of the gradient map.
/// Random directions with independent uniform `[0, 1)` entries:
/// `per_pair` of length `dim` for each of `n_pairs` experiments, drawn in
/// experiment order from one seeded stream.
pub fn positive_directions(
    n_pairs: usize,
    per_pair: usize,
    dim: usize,
    seed: u64,
) -> Vec<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_pairs)
        .map(|_| {
            (0..per_pair)
                .map(|_| (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect()
        })
        .collect()
}

/// One adjoint-versus-finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleComparison {
    pub pair: usize,
    pub direction: usize,
    /// `<grad L_i, delta>` with `delta` the effective perturbation.
    pub adjoint: f64,
    pub finite_difference: f64,
}

impl OracleComparison {
    /// `|adjoint - fd| / max(|fd|, machine epsilon)`.
    pub fn relative_error(&self) -> f64 {
        (self.adjoint - self.finite_difference).abs()
            / self.finite_difference.abs().max(f64::EPSILON)
    }
}

/// Gradients of every pair and their comparison with the central-difference
/// oracle along `directions[i]` for pair `i`.
pub fn compare_with_oracle(
    material: &MaterialModel,
    grid: &PhaseGrid,
    pairs: &[SourceTestPair],
    directions: &[Vec<Vec<f64>>],
    step: f64,
    mode: StepMode,
) -> Result<(Vec<GradientVector>, Vec<OracleComparison>)> {
    if directions.len() != pairs.len() {
        return Err(Error::Shape(format!(
            "{} direction sets for {} pairs",
            directions.len(),
            pairs.len()
        )));
    }
    let mut gradients = Vec::with_capacity(pairs.len());
    let mut rows = Vec::new();
    for (i, (pair, dirs)) in pairs.iter().zip(directions).enumerate() {
        let g = frechet_gradient(material, grid, pair)?;
        for (d, dir) in dirs.iter().enumerate() {
            let eff = effective_direction(material, dir, mode);
            rows.push(OracleComparison {
                pair: i,
                direction: d,
                adjoint: directional_derivative(grid, &g, &eff),
                finite_difference: fd_gradient_oracle(material, grid, pair, dir, step, mode)?,
            });
        }
        gradients.push(g);
    }
    Ok((gradients, rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// Draws that left the admissible `tau` range and were skipped.
    pub rejected: usize,
}

/// Largest observed `|grad(tau + d) - grad(tau)| / |d|` over random `d` with
/// entries uniform in `[-scale, scale] * tau`.
pub fn lipschitz_probe(
    material: &MaterialModel,
    grid: &PhaseGrid,
    pair: &SourceTestPair,
    trials: usize,
    scale: f64,
    seed: u64,
) -> Result<LipschitzReport> {
    let base = frechet_gradient(material, grid, pair)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(trials);
    let mut rejected = 0;
    let bounds = material.bounds();
    for _ in 0..trials {
        let delta: Vec<f64> = material
            .tau()
            .iter()
            .map(|t| rng.gen_range(-scale..=scale) * t)
            .collect();
        let size = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        if size == 0.0 {
            continue;
        }
        let tau: Vec<f64> = material
            .tau()
            .iter()
            .zip(&delta)
            .map(|(t, d)| t + d)
            .collect();
        if tau.iter().any(|&t| t < bounds.min || t > bounds.max) {
            rejected += 1;
            continue;
        }
        let perturbed = material.with_tau(tau)?;
        let g = frechet_gradient(&perturbed, grid, pair)?;
        let diff = g
            .values()
            .iter()
            .zip(base.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        ratios.push(diff / size);
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(LipschitzReport {
        ratios,
        max_ratio,
        rejected,
    })
}
