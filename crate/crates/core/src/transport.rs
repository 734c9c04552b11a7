//! Explicit upwind solvers for the forward system in `h` and its adjoint.
//!
//! Both solvers integrate
//!
//! ```text
//! d_s u + a d_x u = 1 / (eps^2 tau) L[u],     a = +- mu v / eps
//! ```
//!
//! with forward Euler in time and first-order upwinding in space. The forward
//! problem uses `a = mu v / eps` with inflow `phi / tau` at `x = 0` for
//! `mu > 0`. The adjoint runs in reversed time `s = T - t`, which turns
//! `d_t p + mu v d_x p = -L[p] / tau` into the same form with `a = -mu v`, so
//! its inflow at `x = 0` is carried by `mu < 0`. Both reflect specularly at
//! `x = 1`. Outgoing directions at `x = 0` are extrapolated by copying the
//! adjacent interior cell, which leaves the characteristics undisturbed.

use serde::{Deserialize, Serialize};

use crate::collision::DistributionField;
use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::material::MaterialModel;

/// Inflow data `phi(t, mu, omega)` prescribed at `x = 0`.
pub trait Source {
    fn value(&self, t: f64, mu: f64, omega: f64) -> f64;
}

impl<F: Fn(f64, f64, f64) -> f64> Source for F {
    fn value(&self, t: f64, mu: f64, omega: f64) -> f64 {
        self(t, mu, omega)
    }
}

/// Unit-peak Gaussian bump `exp(-z^2 / (2 w^2))`.
#[inline]
pub fn bump(z: f64, width: f64) -> f64 {
    (-(z * z) / (2.0 * width * width)).exp()
}

/// Separable Gaussian beam centred at `(t0, mu0, omega0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySource {
    pub t0: f64,
    pub mu0: f64,
    pub omega0: f64,
    /// Widths in `t`, `mu` and `omega`.
    pub widths: [f64; 3],
}

impl BoundarySource {
    pub fn new(t0: f64, mu0: f64, omega0: f64, widths: [f64; 3]) -> Result<Self> {
        let s = Self {
            t0,
            mu0,
            omega0,
            widths,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidExperiment(format!(
                "source widths must be positive, got {:?}",
                self.widths
            )));
        }
        if !(self.mu0 > 0.0 && self.mu0 < 1.0) {
            return Err(Error::InvalidExperiment(format!(
                "source direction mu0 must lie in (0, 1), got {}",
                self.mu0
            )));
        }
        Ok(())
    }
}

impl Source for BoundarySource {
    fn value(&self, t: f64, mu: f64, omega: f64) -> f64 {
        bump(t - self.t0, self.widths[0])
            * bump(mu - self.mu0, self.widths[1])
            * bump(omega - self.omega0, self.widths[2])
    }
}

/// The beam as a plain closure.
pub fn gaussian_source(params: BoundarySource) -> impl Fn(f64, f64, f64) -> f64 {
    move |t, mu, omega| params.value(t, mu, omega)
}

/// A source that is identically zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoSource;

impl Source for NoSource {
    fn value(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
}

/// Measurement window `psi(t)`, a unit-peak Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestWindow {
    pub center: f64,
    pub width: f64,
}

impl TestWindow {
    pub fn value(&self, t: f64) -> f64 {
        bump(t - self.center, self.width)
    }
}

/// Full solution over all time nodes, stored in forward time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    nt: usize,
    nx: usize,
    slice_len: usize,
    data: Vec<f64>,
}

impl Trajectory {
    fn zeros(grid: &PhaseGrid) -> Self {
        Self {
            nt: grid.nt(),
            nx: grid.nx(),
            slice_len: grid.slice_len(),
            data: vec![0.0; grid.nt() * grid.field_len()],
        }
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    fn field_len(&self) -> usize {
        self.nx * self.slice_len
    }

    /// Snapshot at time node `n`, laid out like [`DistributionField`].
    pub fn snapshot(&self, n: usize) -> &[f64] {
        let len = self.field_len();
        &self.data[n * len..(n + 1) * len]
    }

    /// Snapshots `n` (read) and `n + 1` (write) for stepping in place.
    fn step_pair(&mut self, n: usize) -> (&[f64], &mut [f64]) {
        let len = self.field_len();
        let (a, b) = self.data.split_at_mut((n + 1) * len);
        (&a[n * len..], &mut b[..len])
    }

    /// Snapshots `n + 1` (read) and `n` (write) for stepping backward.
    fn step_pair_rev(&mut self, n: usize) -> (&[f64], &mut [f64]) {
        let len = self.field_len();
        let (a, b) = self.data.split_at_mut((n + 1) * len);
        (&b[..len], &mut a[n * len..])
    }

    pub fn field(&self, grid: &PhaseGrid, n: usize) -> DistributionField {
        DistributionField::from_vec(grid, self.snapshot(n).to_vec()).expect("matching grid")
    }

    /// The `(mu, omega)` slice at time node `n` and space node `j`.
    pub fn slice(&self, n: usize, j: usize) -> &[f64] {
        let start = n * self.field_len() + j * self.slice_len;
        &self.data[start..start + self.slice_len]
    }

    /// Trace at `x = 0` for time node `n`.
    pub fn left_trace(&self, n: usize) -> &[f64] {
        self.slice(n, 0)
    }

    /// Trace at `x = 1` for time node `n`.
    pub fn right_trace(&self, n: usize) -> &[f64] {
        self.slice(n, self.nx - 1)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    /// Characteristic speed `+mu v / eps`; inflow at `x = 0` for `mu > 0`.
    Forward,
    /// Characteristic speed `-mu v`; inflow at `x = 0` for `mu < 0`.
    Reversed,
}

/// One explicit step of the kinetic system.
struct Stepper<'a> {
    grid: &'a PhaseGrid,
    /// `dt * (signed speed) / dx` per slice entry.
    courant: Vec<f64>,
    /// `1 - dt / (eps^2 tau)` per frequency.
    keep: Vec<f64>,
    /// `dt h* / (eps^2 tau <h*>)` per frequency.
    gain: Vec<f64>,
    inflow_m: Vec<usize>,
    reflect_m: Vec<usize>,
}

impl<'a> Stepper<'a> {
    fn new(
        grid: &'a PhaseGrid,
        material: &'a MaterialModel,
        epsilon: f64,
        direction: Direction,
    ) -> Result<Self> {
        if material.omega().len() != grid.n_omega() {
            return Err(Error::Shape("material and grid omega nodes differ".into()));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        check_stability(grid, material, epsilon)?;
        let sign = match direction {
            Direction::Forward => 1.0,
            Direction::Reversed => -1.0,
        };
        let nw = grid.n_omega();
        let mut courant = Vec::with_capacity(grid.slice_len());
        for &mu in &grid.mu {
            for k in 0..nw {
                courant.push(sign * mu * material.velocity()[k] / epsilon * grid.dt / grid.dx);
            }
        }
        let rate: Vec<f64> = material
            .tau()
            .iter()
            .map(|t| grid.dt / (epsilon * epsilon * t))
            .collect();
        let keep = rate.iter().map(|r| 1.0 - r).collect();
        let gain = rate
            .iter()
            .zip(material.h_star())
            .map(|(r, h)| r * h / material.h_star_mean())
            .collect();
        let half = grid.n_mu() / 2;
        let (inflow_m, reflect_m): (Vec<usize>, Vec<usize>) = match direction {
            Direction::Forward => ((half..grid.n_mu()).collect(), (0..half).collect()),
            Direction::Reversed => ((0..half).collect(), (half..grid.n_mu()).collect()),
        };
        Ok(Self {
            grid,
            courant,
            keep,
            gain,
            inflow_m,
            reflect_m,
        })
    }

    /// Advances `cur` by one step into `next`. `inflow` holds the prescribed
    /// wall values at `x = 0`, laid out as a full `(mu, omega)` slice; only
    /// the inflow directions are read.
    fn step(&self, cur: &[f64], next: &mut [f64], inflow: &[f64]) {
        let grid = self.grid;
        let nx = grid.nx();
        let nw = grid.n_omega();
        let sl = grid.slice_len();
        let weights = grid.mu_omega_mean_weights();

        for j in 0..nx {
            let here = &cur[j * sl..(j + 1) * sl];
            let moment: f64 = here.iter().zip(weights).map(|(u, w)| u * w).sum();
            let out = &mut next[j * sl..(j + 1) * sl];
            for m in 0..grid.n_mu() {
                let row = m * nw..(m + 1) * nw;
                let u = &here[row.clone()];
                let c = &self.courant[row.clone()];
                let o = &mut out[row.clone()];
                // All directions in a row share the sign of mu.
                let upwind = if c[0] > 0.0 {
                    (j > 0).then(|| &cur[(j - 1) * sl..j * sl][row.clone()])
                } else {
                    (j + 1 < nx).then(|| &cur[(j + 1) * sl..(j + 2) * sl][row.clone()])
                };
                match upwind {
                    Some(w) => {
                        for k in 0..nw {
                            o[k] = u[k] * self.keep[k] - c[k].abs() * (u[k] - w[k])
                                + moment * self.gain[k];
                        }
                    }
                    None => {
                        for k in 0..nw {
                            o[k] = u[k] * self.keep[k] + moment * self.gain[k];
                        }
                    }
                }
            }
        }

        // Wall conditions: outflow at x = 0 copies the adjacent cell, inflow
        // is prescribed, and x = 1 reflects specularly.
        let (first, rest) = next.split_at_mut(sl);
        for &m in &self.reflect_m {
            let row = m * nw;
            first[row..row + nw].copy_from_slice(&rest[row..row + nw]);
        }
        for &m in &self.inflow_m {
            let row = m * nw;
            first[row..row + nw].copy_from_slice(&inflow[row..row + nw]);
        }
        let last = &mut next[(nx - 1) * sl..];
        for &m in &self.reflect_m {
            let mirror = grid.mirror(m) * nw;
            let row = m * nw;
            for k in 0..nw {
                last[row + k] = last[mirror + k];
            }
        }
    }
}

/// Largest `|mu v| / eps` over the grid.
pub fn max_characteristic_speed(grid: &PhaseGrid, material: &MaterialModel, epsilon: f64) -> f64 {
    let mu_max = grid.mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    mu_max * material.max_speed() / epsilon
}

/// Transport CFL and explicit-relaxation guards for a run at `epsilon`.
pub fn check_stability(grid: &PhaseGrid, material: &MaterialModel, epsilon: f64) -> Result<()> {
    let speed = max_characteristic_speed(grid, material, epsilon);
    let limit = grid.dx / speed;
    if grid.dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl {
            dt: grid.dt,
            dx: grid.dx,
            max_speed: speed,
            limit,
        });
    }
    let relax_limit = 0.5 * epsilon * epsilon * material.tau_min();
    if grid.dt > relax_limit {
        return Err(Error::RelaxationStability {
            dt: grid.dt,
            limit: relax_limit,
        });
    }
    Ok(())
}

/// Time-steps the forward system, handing every snapshot (including the
/// zero initial state) to `visit(n, field)`.
pub fn solve_forward_with<S, V>(
    material: &MaterialModel,
    grid: &PhaseGrid,
    source: &S,
    epsilon: f64,
    mut visit: V,
) -> Result<()>
where
    S: Source + ?Sized,
    V: FnMut(usize, &DistributionField) -> Result<()>,
{
    let stepper = Stepper::new(grid, material, epsilon, Direction::Forward)?;
    let mut cur = DistributionField::zeros(grid);
    let mut next = DistributionField::zeros(grid);
    let mut inflow = vec![0.0; grid.slice_len()];
    visit(0, &cur)?;
    for n in 0..grid.nt() - 1 {
        fill_inflow(&stepper, material, source, grid.t[n + 1], &mut inflow);
        stepper.step(cur.as_slice(), next.as_mut_slice(), &inflow);
        if !next.is_finite() {
            return Err(Error::NonFinite { step: n + 1 });
        }
        std::mem::swap(&mut cur, &mut next);
        visit(n + 1, &cur)?;
    }
    Ok(())
}

/// Forward solution `h` over the whole time grid.
pub fn solve_forward<S: Source + ?Sized>(
    material: &MaterialModel,
    grid: &PhaseGrid,
    source: &S,
    epsilon: f64,
) -> Result<Trajectory> {
    let stepper = Stepper::new(grid, material, epsilon, Direction::Forward)?;
    let mut traj = Trajectory::zeros(grid);
    let mut inflow = vec![0.0; grid.slice_len()];
    for n in 0..grid.nt() - 1 {
        fill_inflow(&stepper, material, source, grid.t[n + 1], &mut inflow);
        let (cur, next) = traj.step_pair(n);
        stepper.step(cur, next, &inflow);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: n + 1 });
        }
    }
    Ok(traj)
}

fn fill_inflow<S: Source + ?Sized>(
    stepper: &Stepper,
    material: &MaterialModel,
    source: &S,
    t: f64,
    inflow: &mut [f64],
) {
    let grid = stepper.grid;
    let nw = grid.n_omega();
    let tau = material.tau();
    for &m in &stepper.inflow_m {
        let mu = grid.mu[m];
        for k in 0..nw {
            inflow[m * nw + k] = source.value(t, mu, grid.omega[k]) / tau[k];
        }
    }
}

/// Boundary temperature `T(t, x = 0) = <h>_{mu,omega} / <h*>_omega` at every
/// time node, without storing the trajectory.
pub fn boundary_temperature<S: Source + ?Sized>(
    material: &MaterialModel,
    grid: &PhaseGrid,
    source: &S,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let mut trace = Vec::with_capacity(grid.nt());
    solve_forward_with(material, grid, source, epsilon, |_, field| {
        trace.push(grid.mean_mu_omega(field.slice(0)) / material.h_star_mean());
        Ok(())
    })?;
    Ok(trace)
}

/// Adjoint wall data at `x = 0` for `mu < 0`:
/// `mismatch * h* psi(t) / (mu v tau <h*>_omega)`.
pub fn adjoint_inflow(
    material: &MaterialModel,
    grid: &PhaseGrid,
    mismatch: f64,
    psi_t: f64,
    m: usize,
    k: usize,
) -> f64 {
    mismatch * material.h_star()[k] * psi_t
        / (grid.mu[m] * material.velocity()[k] * material.tau()[k] * material.h_star_mean())
}

/// Solves the adjoint system backward from `p(T) = 0` (at unit `epsilon`)
/// and returns `p` indexed in forward time.
pub fn solve_adjoint(
    material: &MaterialModel,
    grid: &PhaseGrid,
    mismatch: f64,
    window: &TestWindow,
) -> Result<Trajectory> {
    if !mismatch.is_finite() {
        return Err(Error::InvalidExperiment(format!(
            "mismatch must be finite, got {mismatch}"
        )));
    }
    let stepper = Stepper::new(grid, material, 1.0, Direction::Reversed)?;
    let nt = grid.nt();
    let nw = grid.n_omega();
    let mut traj = Trajectory::zeros(grid);
    let mut inflow = vec![0.0; grid.slice_len()];
    for i in 0..nt - 1 {
        let n = nt - 2 - i;
        let psi = window.value(grid.t[n]);
        for &m in &stepper.inflow_m {
            for k in 0..nw {
                inflow[m * nw + k] = adjoint_inflow(material, grid, mismatch, psi, m, k);
            }
        }
        let (cur, next) = traj.step_pair_rev(n);
        stepper.step(cur, next, &inflow);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: i + 1 });
        }
    }
    Ok(traj)
}
