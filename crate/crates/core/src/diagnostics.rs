//! Macroscopic observables and diffusion-limit checks.
//!
//! For the scaled system `d_t g + (1/eps) mu v d_x g = 1/(eps^2 tau) L0[g]`
//! the energy `<g>` is conserved with flux `q = (1/eps) <mu v g>_{mu,omega}`.
//! As `eps -> 0` the temperature `T = <h> / <h*>` solves a heat equation with
//! conductivity `kappa = (1/3) <tau v^2 g*>_omega` and capacity `<g*>_omega`,
//! so the pointwise ratio `-q / d_x T` should settle near that bulk value.

use serde::{Deserialize, Serialize};

use crate::collision::DistributionField;
use crate::error::{Error, Result};
use crate::grid::{Axis, GridConfig, PhaseGrid};
use crate::material::MaterialModel;
use crate::transport::{max_characteristic_speed, solve_forward_with, Source};

/// `q(x) = (1/eps) <mu v g>_{mu,omega}` for a field stored as `h`; `g = tau h`.
pub fn heat_flux(
    field_h: &DistributionField,
    material: &MaterialModel,
    grid: &PhaseGrid,
    epsilon: f64,
) -> Vec<f64> {
    let nw = grid.n_omega();
    let weights = grid.mu_omega_mean_weights();
    let tau = material.tau();
    let v = material.velocity();
    (0..field_h.nx())
        .map(|j| {
            let s = field_h.slice(j);
            let mut q = 0.0;
            for m in 0..grid.n_mu() {
                let mu = grid.mu[m];
                for k in 0..nw {
                    let i = m * nw + k;
                    q += weights[i] * mu * v[k] * tau[k] * s[i];
                }
            }
            q / epsilon
        })
        .collect()
}

/// `q` for a field stored directly in `g`.
pub fn heat_flux_g(
    field_g: &DistributionField,
    material: &MaterialModel,
    grid: &PhaseGrid,
    epsilon: f64,
) -> Vec<f64> {
    let nw = grid.n_omega();
    let weights = grid.mu_omega_mean_weights();
    let v = material.velocity();
    (0..field_g.nx())
        .map(|j| {
            let s = field_g.slice(j);
            let q: f64 = s
                .iter()
                .enumerate()
                .map(|(i, g)| weights[i] * grid.mu[i / nw] * v[i % nw] * g)
                .sum();
            q / epsilon
        })
        .collect()
}

/// Second-order derivative on a uniform grid: centred in the interior,
/// one-sided three-point at the ends.
pub fn derivative(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 3, "need at least three points");
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dx);
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dx);
    for j in 1..n - 1 {
        d[j] = (values[j + 1] - values[j - 1]) / (2.0 * dx);
    }
    d
}

/// `kappa = -q / d_x T`, or `None` where `|d_x T| < floor`.
pub fn pointwise_kappa(q: &[f64], dt_dx: &[f64], floor: f64) -> Vec<Option<f64>> {
    q.iter()
        .zip(dt_dx)
        .map(|(q, g)| {
            if g.abs() < floor || g.abs() == 0.0 {
                None
            } else {
                Some(-q / g)
            }
        })
        .collect()
}

/// Bulk conductivity `(1/3) <tau v^2 g*>_omega`.
pub fn bulk_kappa(material: &MaterialModel, grid: &PhaseGrid) -> f64 {
    let f: Vec<f64> = integrand(material);
    grid.mean_omega(&f)
}

fn integrand(material: &MaterialModel) -> Vec<f64> {
    material
        .tau()
        .iter()
        .zip(material.velocity())
        .zip(material.g_star())
        .map(|((t, v), g)| t * v * v * g / 3.0)
        .collect()
}

/// Heat capacity `<g*>_omega`.
pub fn heat_capacity(material: &MaterialModel, grid: &PhaseGrid) -> f64 {
    grid.mean_omega(material.g_star())
}

/// Conductivity carried by frequencies in `[lo, hi]`: the integral of the
/// piecewise-linear interpolant of `(1/3) g* v^2 tau`, divided by the
/// frequency range so that the full window gives [`bulk_kappa`].
pub fn accumulation_kappa(
    material: &MaterialModel,
    grid: &PhaseGrid,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let om = &grid.omega;
    let (a, b) = (om[0], om[om.len() - 1]);
    if hi < lo {
        return Err(Error::InvalidExperiment(format!(
            "inverted window [{lo}, {hi}]"
        )));
    }
    if lo < a - 1e-12 || hi > b + 1e-12 {
        return Err(Error::InvalidExperiment(format!(
            "window [{lo}, {hi}] leaves the frequency range [{a}, {b}]"
        )));
    }
    let f = integrand(material);
    if om.len() == 1 {
        return Ok(f[0]);
    }
    let lo = lo.max(a);
    let hi = hi.min(b);
    let interp = |w: f64| -> f64 {
        let k = om.partition_point(|x| *x <= w).clamp(1, om.len() - 1);
        let s = (w - om[k - 1]) / (om[k] - om[k - 1]);
        f[k - 1] + s * (f[k] - f[k - 1])
    };
    let mut total = 0.0;
    for k in 0..om.len() - 1 {
        let (l, r) = (om[k].max(lo), om[k + 1].min(hi));
        if r > l {
            total += 0.5 * (r - l) * (interp(l) + interp(r));
        }
    }
    Ok(total / grid.measure(Axis::Omega))
}

/// Grey-medium conductivity `C v^2 tau / 3`.
pub fn grey_kappa(capacity: f64, velocity: f64, tau: f64) -> f64 {
    capacity * velocity * velocity * tau / 3.0
}

/// Left boundary of the reference heat problem.
#[derive(Debug, Clone, PartialEq)]
pub enum LeftBoundary {
    /// Zero flux.
    Insulated,
    /// Prescribed values at the output times.
    Dirichlet(Vec<f64>),
}

/// Explicit FTCS solution of `u_t = D u_xx` on a uniform grid, reflecting at
/// the right end. `dt` is the spacing of the returned rows; each row step is
/// split into equal substeps with `D dt_sub / dx^2 <= 1/2`. Dirichlet data is
/// interpolated linearly in time between rows.
pub fn solve_heat_reference(
    diffusivity: f64,
    initial: &[f64],
    dx: f64,
    dt: f64,
    steps: usize,
    left: &LeftBoundary,
) -> Result<Vec<Vec<f64>>> {
    let n = initial.len();
    if n < 3 {
        return Err(Error::InvalidGrid(
            "heat reference needs at least 3 nodes".into(),
        ));
    }
    if !(diffusivity > 0.0 && dt > 0.0 && dx > 0.0) {
        return Err(Error::InvalidGrid(
            "diffusivity, dt and dx must be positive".into(),
        ));
    }
    if let LeftBoundary::Dirichlet(vals) = left {
        if vals.len() != steps + 1 {
            return Err(Error::Shape(format!(
                "Dirichlet data has {} values, need {}",
                vals.len(),
                steps + 1
            )));
        }
    }
    let limit = dx * dx / (2.0 * diffusivity);
    let sub = (dt / limit).ceil().max(1.0) as usize;
    let h = dt / sub as f64;
    if h > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl {
            dt: h,
            dx,
            max_speed: diffusivity / dx,
            limit,
        });
    }
    let r = diffusivity * h / (dx * dx);
    let mut u = initial.to_vec();
    let mut next = u.clone();
    let mut rows = vec![u.clone()];
    for s in 0..steps {
        for p in 0..sub {
            for j in 1..n - 1 {
                next[j] = u[j] + r * (u[j + 1] - 2.0 * u[j] + u[j - 1]);
            }
            next[n - 1] = u[n - 1] + 2.0 * r * (u[n - 2] - u[n - 1]);
            match left {
                LeftBoundary::Insulated => next[0] = u[0] + 2.0 * r * (u[1] - u[0]),
                LeftBoundary::Dirichlet(vals) => {
                    let f = (p + 1) as f64 / sub as f64;
                    next[0] = vals[s] + f * (vals[s + 1] - vals[s]);
                }
            }
            std::mem::swap(&mut u, &mut next);
        }
        rows.push(u.clone());
    }
    Ok(rows)
}

/// Relative `L2` distance, over the rows with `t` in `window`, between the
/// kinetic temperature of `trace` and the heat equation started from the
/// kinetic temperature at `seed_time`. The heat problem takes its `x = 0`
/// values from the kinetic trace and reflects at the right end.
pub fn heat_reference_discrepancy(
    trace: &MacroTrace,
    diffusivity: f64,
    seed_time: f64,
    window: (f64, f64),
) -> Result<f64> {
    let (nt, nx) = (trace.nt(), trace.nx());
    if nt < 2 || nx < 3 {
        return Err(Error::Shape(
            "trace is too small for a heat reference".into(),
        ));
    }
    let dt = trace.t[1] - trace.t[0];
    let dx = trace.x[1] - trace.x[0];
    let n0 = trace.t.partition_point(|t| *t < seed_time - 0.5 * dt);
    if n0 >= nt - 1 {
        return Err(Error::InvalidExperiment(format!(
            "seed time {seed_time} is past the end of the trace"
        )));
    }
    let row = |n: usize| &trace.temperature[n * nx..(n + 1) * nx];
    let left: Vec<f64> = (n0..nt).map(|n| row(n)[0]).collect();
    let reference = solve_heat_reference(
        diffusivity,
        row(n0),
        dx,
        dt,
        nt - 1 - n0,
        &LeftBoundary::Dirichlet(left),
    )?;
    let (mut num, mut den) = (0.0, 0.0);
    for (r, n) in (n0..nt).enumerate() {
        let t = trace.t[n];
        if t < window.0 || t > window.1 {
            continue;
        }
        let diff: Vec<f64> = row(n)
            .iter()
            .zip(&reference[r])
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        let sq: Vec<f64> = row(n).iter().map(|a| a * a).collect();
        num += trapezoid(&diff, dx);
        den += trapezoid(&sq, dx);
    }
    if den == 0.0 {
        return Err(Error::InvalidExperiment(
            "window contains no nonzero temperature".into(),
        ));
    }
    Ok((num / den).sqrt())
}

/// Trapezoid integral of nodal values.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    dx * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]))
}

/// Relative distance of `g` from the first-order Chapman-Enskog profile
/// `g* u - eps mu v tau g* d_x u` with `u` the measured temperature. The
/// norm is the quadrature `L2` norm over `(x, mu, omega)`.
pub fn chapman_enskog_residual(
    field_g: &DistributionField,
    material: &MaterialModel,
    grid: &PhaseGrid,
    epsilon: f64,
) -> f64 {
    let nw = grid.n_omega();
    let tau = material.tau();
    let g_star = material.g_star();
    let v = material.velocity();
    let weights = grid.mu_omega_mean_weights();
    let wx = grid.weights(Axis::X);
    let u: Vec<f64> = (0..field_g.nx())
        .map(|j| {
            let s = field_g.slice(j);
            let over_tau: f64 = s
                .iter()
                .enumerate()
                .map(|(i, g)| weights[i] * g / tau[i % nw])
                .sum();
            over_tau / material.h_star_mean()
        })
        .collect();
    let du = derivative(&u, grid.dx);
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..field_g.nx() {
        let s = field_g.slice(j);
        for (i, g) in s.iter().enumerate() {
            let (m, k) = (i / nw, i % nw);
            let approx =
                g_star[k] * u[j] - epsilon * grid.mu[m] * v[k] * tau[k] * g_star[k] * du[j];
            let w = wx[j] * weights[i];
            num += w * (g - approx) * (g - approx);
            den += w * g * g;
        }
    }
    if den == 0.0 {
        return 0.0;
    }
    (num / den).sqrt()
}

/// Macroscopic fields on a `(t, x)` lattice, row-major in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroTrace {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub q: Vec<f64>,
    pub temperature: Vec<f64>,
    pub dt_dx: Vec<f64>,
    pub kappa: Vec<Option<f64>>,
}

impl MacroTrace {
    pub fn nt(&self) -> usize {
        self.t.len()
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    fn push(&mut self, t: f64, q: Vec<f64>, temperature: Vec<f64>, dx: f64, floor_rel: f64) {
        let dt_dx = derivative(&temperature, dx);
        let max_t = temperature.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let kappa = pointwise_kappa(&q, &dt_dx, floor_rel * max_t);
        self.t.push(t);
        self.q.extend(q);
        self.temperature.extend(temperature);
        self.dt_dx.extend(dt_dx);
        self.kappa.extend(kappa);
    }

    /// `(t, kappa)` at the x node nearest `x`, skipping masked values.
    pub fn kappa_at(&self, x: f64) -> Vec<(f64, f64)> {
        let j = nearest(&self.x, x);
        (0..self.nt())
            .filter_map(|n| self.kappa[n * self.nx() + j].map(|k| (self.t[n], k)))
            .collect()
    }
}

fn nearest(nodes: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (j, v) in nodes.iter().enumerate() {
        if (v - x).abs() < (nodes[best] - x).abs() {
            best = j;
        }
    }
    best
}

/// Statistics of a `kappa(t)` series after some time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettledKappa {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

impl SettledKappa {
    /// `(max - min) / |mean|`.
    pub fn drift(&self) -> f64 {
        (self.max - self.min) / self.mean.abs()
    }
}

/// Mean and range of `kappa` for `t > after`.
pub fn settled_kappa(series: &[(f64, f64)], after: f64) -> Option<SettledKappa> {
    let vals: Vec<f64> = series
        .iter()
        .filter(|(t, _)| *t > after)
        .map(|(_, k)| *k)
        .collect();
    if vals.is_empty() {
        return None;
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    Some(SettledKappa {
        mean,
        min: vals.iter().cloned().fold(f64::INFINITY, f64::min),
        max: vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        samples: vals.len(),
    })
}

/// Settings for the scaled runs of the diffusion study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionSettings {
    pub t_end: f64,
    /// Fraction of the transport CFL limit used for `dt`.
    pub cfl: f64,
    /// Where `kappa(t)` is probed.
    pub probe_x: f64,
    /// The drift of `kappa` is measured after this time.
    pub settle_after: f64,
    /// The settled value is the mean of `kappa` after this time.
    pub plateau_after: f64,
    /// Time of the Chapman-Enskog snapshot.
    pub ce_time: f64,
    /// `|d_x T|` below this fraction of `max |T|` masks `kappa`.
    pub gradient_floor: f64,
}

impl Default for DiffusionSettings {
    fn default() -> Self {
        Self {
            t_end: 0.5,
            cfl: 0.9,
            probe_x: 0.5,
            settle_after: 0.125,
            plateau_after: 0.375,
            ce_time: 0.3,
            gradient_floor: 1e-8,
        }
    }
}

/// Grid for a run at `epsilon`: the base spatial and spectral resolution
/// with `dt` reduced to a fraction of the transport CFL limit (and of the
/// relaxation limit), adjusted to divide `t_end` evenly.
pub fn scaled_grid(
    base: &GridConfig,
    material: &MaterialModel,
    epsilon: f64,
    settings: &DiffusionSettings,
) -> Result<PhaseGrid> {
    let probe = PhaseGrid::build(
        &GridConfig {
            t_end: settings.t_end,
            dt: settings.t_end,
            ..*base
        },
        f64::MIN_POSITIVE,
    )?;
    let speed = max_characteristic_speed(&probe, material, epsilon);
    let transport = settings.cfl * base.dx / speed;
    let relax = settings.cfl * 0.5 * epsilon * epsilon * material.tau_min();
    let target = transport.min(relax);
    let steps = (settings.t_end / target).ceil();
    let dt = settings.t_end / steps;
    PhaseGrid::build(
        &GridConfig {
            t_end: settings.t_end,
            dt,
            ..*base
        },
        speed,
    )
}

/// Outcome of one scaled run.
#[derive(Debug, Clone)]
pub struct DiffusionRun {
    pub epsilon: f64,
    pub dt: f64,
    pub trace: MacroTrace,
    /// `kappa` at the probe after `settle_after`.
    pub settled: Option<SettledKappa>,
    /// `kappa` at the probe after `plateau_after`.
    pub plateau: Option<SettledKappa>,
    pub bulk: f64,
    pub ce_residual: f64,
}

impl DiffusionRun {
    /// Late-time conductivity at the probe.
    pub fn kappa_settled(&self) -> Option<f64> {
        self.plateau.map(|s| s.mean)
    }

    /// `|kappa_settled - kappa_bulk| / kappa_bulk`.
    pub fn relative_gap(&self) -> Option<f64> {
        self.kappa_settled()
            .map(|k| (k - self.bulk).abs() / self.bulk)
    }
}

/// Runs the scaled system at `epsilon` and records its macroscopic trace,
/// the settled probe conductivity and the Chapman-Enskog residual.
pub fn diffusion_run<S: Source + ?Sized>(
    material: &MaterialModel,
    base: &GridConfig,
    source: &S,
    epsilon: f64,
    settings: &DiffusionSettings,
) -> Result<DiffusionRun> {
    let grid = scaled_grid(base, material, epsilon, settings)?;
    let mut trace = MacroTrace {
        t: Vec::new(),
        x: grid.x.clone(),
        q: Vec::new(),
        temperature: Vec::new(),
        dt_dx: Vec::new(),
        kappa: Vec::new(),
    };
    let ce_step = ((settings.ce_time / grid.dt).round() as usize).min(grid.nt() - 1);
    let mut ce_residual = f64::NAN;
    solve_forward_with(material, &grid, source, epsilon, |n, field| {
        let q = heat_flux(field, material, &grid, epsilon);
        let temp: Vec<f64> = (0..grid.nx())
            .map(|j| grid.mean_mu_omega(field.slice(j)) / material.h_star_mean())
            .collect();
        trace.push(grid.t[n], q, temp, grid.dx, settings.gradient_floor);
        if n == ce_step {
            ce_residual =
                chapman_enskog_residual(&field.scaled_by_tau(material), material, &grid, epsilon);
        }
        Ok(())
    })?;
    let series = trace.kappa_at(settings.probe_x);
    let settled = settled_kappa(&series, settings.settle_after);
    let plateau = settled_kappa(&series, settings.plateau_after);
    Ok(DiffusionRun {
        epsilon,
        dt: grid.dt,
        trace,
        settled,
        plateau,
        bulk: bulk_kappa(material, &grid),
        ce_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{build_material, GStarProfile, TauBounds, TauProfile, VelocityLaw};
    use approx::assert_relative_eq;

    fn setup() -> (PhaseGrid, MaterialModel) {
        let grid = PhaseGrid::build(&GridConfig::default(), 2.42).unwrap();
        let m = build_material(
            &TauProfile::GroundTruth,
            &GStarProfile::BoseEinsteinDebye,
            &VelocityLaw::default(),
            &grid,
            TauBounds::default(),
        )
        .unwrap();
        (grid, m)
    }

    #[test]
    fn derivative_is_exact_for_quadratics() {
        let dx = 0.1;
        let u: Vec<f64> = (0..11)
            .map(|j| {
                let x = j as f64 * dx;
                2.0 * x * x - x + 0.5
            })
            .collect();
        let d = derivative(&u, dx);
        for (j, v) in d.iter().enumerate() {
            assert_relative_eq!(*v, 4.0 * j as f64 * dx - 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn even_field_has_no_flux() {
        let (grid, m) = setup();
        let f = DistributionField::from_fn(&grid, |j, mu, k| {
            (1.0 + j as f64) * (1.0 + grid.mu[mu].powi(2)) * m.h_star()[k]
        });
        assert!(heat_flux(&f, &m, &grid, 1.0)
            .iter()
            .all(|q| q.abs() < 1e-14));
    }

    #[test]
    fn flux_of_first_moment_field() {
        let (grid, m) = setup();
        let eps = 0.5;
        let g = DistributionField::from_fn(&grid, |_, mu, k| {
            grid.mu[mu] * m.velocity()[k] * m.g_star()[k]
        });
        let v2g: Vec<f64> = (0..grid.n_omega())
            .map(|k| m.velocity()[k].powi(2) * m.g_star()[k])
            .collect();
        let expect = grid.mean_omega(&v2g) / 3.0 / eps;
        for q in heat_flux_g(&g, &m, &grid, eps) {
            assert_relative_eq!(q, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn kappa_masks_flat_gradient() {
        let k = pointwise_kappa(&[1.0, 2.0, 0.0], &[-2.0, 0.0, 1.0], 1e-8);
        assert_eq!(k, vec![Some(0.5), None, Some(-0.0)]);
    }

    #[test]
    fn grey_medium_matches_bulk() {
        let (grid, m) = setup();
        let n = grid.n_omega();
        let grey = m.with_tau(vec![1.3; n]).unwrap();
        let grey = MaterialModel::from_values(
            &grid,
            grey.tau().to_vec(),
            vec![2.0; n],
            m.g_star().to_vec(),
            TauBounds::default(),
        )
        .unwrap();
        let c = heat_capacity(&grey, &grid);
        assert_relative_eq!(
            bulk_kappa(&grey, &grid),
            grey_kappa(c, 2.0, 1.3),
            max_relative = 1e-13
        );
    }

    #[test]
    fn accumulation_windows() {
        let (grid, m) = setup();
        let full = accumulation_kappa(&m, &grid, 0.4, 4.0).unwrap();
        assert_relative_eq!(full, bulk_kappa(&m, &grid), max_relative = 1e-13);
        assert_eq!(accumulation_kappa(&m, &grid, 1.7, 1.7).unwrap(), 0.0);
        let a = accumulation_kappa(&m, &grid, 0.4, 1.7).unwrap();
        let b = accumulation_kappa(&m, &grid, 1.7, 4.0).unwrap();
        assert_relative_eq!(a + b, full, max_relative = 1e-13);
        assert!(accumulation_kappa(&m, &grid, 2.0, 1.0).is_err());
    }

    #[test]
    fn heat_reference_constant_and_conservation() {
        let dx = 0.02;
        let n = 51;
        let flat = vec![0.7; n];
        let rows =
            solve_heat_reference(0.5, &flat, dx, 0.001, 50, &LeftBoundary::Insulated).unwrap();
        assert!(rows.last().unwrap().iter().all(|v| (v - 0.7).abs() < 1e-14));

        let bump: Vec<f64> = (0..n)
            .map(|j| (-((j as f64 * dx - 0.4) / 0.1).powi(2)).exp())
            .collect();
        let rows =
            solve_heat_reference(0.5, &bump, dx, 0.001, 200, &LeftBoundary::Insulated).unwrap();
        let m0 = trapezoid(&bump, dx);
        let m1 = trapezoid(rows.last().unwrap(), dx);
        assert!((m1 - m0).abs() < 1e-10 * m0);
    }

    #[test]
    fn settled_statistics() {
        let s = settled_kappa(&[(0.1, 5.0), (0.2, 1.0), (0.3, 1.1)], 0.15).unwrap();
        assert_eq!(s.samples, 2);
        assert_relative_eq!(s.mean, 1.05);
        assert_relative_eq!(s.drift(), 0.1 / 1.05, max_relative = 1e-12);
    }
}
