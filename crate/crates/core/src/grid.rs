//! Phase-space discretization of `(t, x, mu, omega)`.
//!
//! Time, space and frequency use uniform grids integrated with the
//! trapezoid rule; the direction cosine `mu` uses Gauss-Legendre nodes.
//! Every bracket `<f>` in the crate is a *normalized* mean: the quadrature
//! integral divided by the measure of the integrated domain, so `<1> = 1`
//! over any set of variables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// User-facing grid parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub t_end: f64,
    pub dt: f64,
    pub x_end: f64,
    pub dx: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub d_omega: f64,
    pub n_mu: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            t_end: 1.5,
            dt: 0.005,
            x_end: 1.0,
            dx: 0.02,
            omega_min: 0.4,
            omega_max: 4.0,
            d_omega: 0.4,
            n_mu: 64,
        }
    }
}

/// Variables of the phase space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    T,
    X,
    Mu,
    Omega,
}

/// Restriction of the `mu` integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuRange {
    Full,
    Positive,
    Negative,
}

/// Immutable discretization shared by every solver.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
    pub mu_weights: Vec<f64>,
    pub omega: Vec<f64>,
    pub dt: f64,
    pub dx: f64,
    pub d_omega: f64,
    t_weights: Vec<f64>,
    x_weights: Vec<f64>,
    omega_weights: Vec<f64>,
    /// `w_mu[m] * w_omega[k] / (2 W)` laid out as `m * n_omega + k`.
    mu_omega_mean_weights: Vec<f64>,
}

/// Gauss-Legendre nodes (ascending) and weights on `(-1, 1)`.
///
/// Nodes come in exact `+-` pairs so that `mu[n - 1 - i] == -mu[i]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess for the i-th largest root.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[n - 1 - i] = z;
        nodes[i] = -z;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

fn uniform(start: f64, end: f64, step: f64) -> Vec<f64> {
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| start + i as f64 * step).collect()
}

fn trapezoid_weights(n: usize, step: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    let mut w = vec![step; n];
    w[0] = 0.5 * step;
    w[n - 1] = 0.5 * step;
    w
}

/// Largest stable time step for upwind transport at the given speed.
pub fn cfl_limit(dx: f64, max_speed: f64) -> f64 {
    dx / max_speed
}

impl PhaseGrid {
    /// Builds the grid and enforces the transport CFL bound
    /// `dt <= dx / max_speed`, where `max_speed` is the largest
    /// characteristic speed `max |mu v(omega)| / epsilon` that will run on it.
    pub fn build(config: &GridConfig, max_speed: f64) -> Result<Self> {
        let GridConfig {
            t_end,
            dt,
            x_end,
            dx,
            omega_min,
            omega_max,
            d_omega,
            n_mu,
        } = *config;
        for (name, v) in [("dt", dt), ("dx", dx), ("d_omega", d_omega)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidGrid(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(t_end > 0.0 && x_end > 0.0) {
            return Err(Error::InvalidGrid(
                "t_end and x_end must be positive".into(),
            ));
        }
        if !(omega_min > 0.0) || omega_max <= omega_min {
            return Err(Error::InvalidGrid(format!(
                "need 0 < omega_min < omega_max, got [{omega_min}, {omega_max}]"
            )));
        }
        if n_mu < 2 || n_mu % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n_mu must be even and >= 2 (mu = 0 breaks reflection pairing), got {n_mu}"
            )));
        }
        if !(max_speed > 0.0 && max_speed.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "max characteristic speed must be positive, got {max_speed}"
            )));
        }
        let limit = cfl_limit(dx, max_speed);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl {
                dt,
                dx,
                max_speed,
                limit,
            });
        }

        let t = uniform(0.0, t_end, dt);
        let x = uniform(0.0, x_end, dx);
        let omega = uniform(omega_min, omega_max, d_omega);
        if x.len() < 3 {
            return Err(Error::InvalidGrid("need at least 3 x nodes".into()));
        }
        if t.len() < 2 {
            return Err(Error::InvalidGrid("need at least 2 time nodes".into()));
        }
        let (mu, mu_weights) = gauss_legendre(n_mu);
        let t_weights = trapezoid_weights(t.len(), dt);
        let x_weights = trapezoid_weights(x.len(), dx);
        let omega_weights = trapezoid_weights(omega.len(), d_omega);

        let omega_measure: f64 = omega_weights.iter().sum();
        let omega_measure = if omega_measure > 0.0 {
            omega_measure
        } else {
            1.0
        };
        let mut mu_omega_mean_weights = Vec::with_capacity(n_mu * omega.len());
        for &wm in &mu_weights {
            for &wo in &omega_weights {
                let wo = if omega.len() == 1 { 1.0 } else { wo };
                mu_omega_mean_weights.push(wm * wo / (2.0 * omega_measure));
            }
        }

        Ok(Self {
            t,
            x,
            mu,
            mu_weights,
            omega,
            dt,
            dx,
            d_omega,
            t_weights,
            x_weights,
            omega_weights,
            mu_omega_mean_weights,
        })
    }

    pub fn nt(&self) -> usize {
        self.t.len()
    }
    pub fn nx(&self) -> usize {
        self.x.len()
    }
    pub fn n_mu(&self) -> usize {
        self.mu.len()
    }
    pub fn n_omega(&self) -> usize {
        self.omega.len()
    }

    /// Size of one `(mu, omega)` slice at a fixed `x`.
    pub fn slice_len(&self) -> usize {
        self.n_mu() * self.n_omega()
    }

    /// Size of one `(x, mu, omega)` snapshot.
    pub fn field_len(&self) -> usize {
        self.nx() * self.slice_len()
    }

    pub fn final_time(&self) -> f64 {
        *self.t.last().expect("grid has time nodes")
    }

    /// Index of the node `-mu[m]`.
    pub fn mirror(&self, m: usize) -> usize {
        self.n_mu() - 1 - m
    }

    /// Raw quadrature weights (unnormalized) along an axis.
    pub fn weights(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::T => &self.t_weights,
            Axis::X => &self.x_weights,
            Axis::Mu => &self.mu_weights,
            Axis::Omega => &self.omega_weights,
        }
    }

    /// Weights for the normalized `omega` mean. A single node has weight one.
    pub fn omega_mean_weights(&self) -> Vec<f64> {
        if self.n_omega() == 1 {
            return vec![1.0];
        }
        let measure = self.measure(Axis::Omega);
        self.omega_weights.iter().map(|w| w / measure).collect()
    }

    /// Weights for the normalized `(mu, omega)` mean of a slice laid out as
    /// `m * n_omega + k`.
    pub fn mu_omega_mean_weights(&self) -> &[f64] {
        &self.mu_omega_mean_weights
    }

    /// Measure of the computational domain along an axis.
    pub fn measure(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Mu => 2.0,
            _ => self.weights(axis).iter().sum(),
        }
    }

    /// `<f>_{mu,omega}` of one slice.
    pub fn mean_mu_omega(&self, slice: &[f64]) -> f64 {
        debug_assert_eq!(slice.len(), self.slice_len());
        slice
            .iter()
            .zip(&self.mu_omega_mean_weights)
            .map(|(f, w)| f * w)
            .sum()
    }

    /// `<f>_omega` of nodal values.
    pub fn mean_omega(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_omega());
        if values.len() == 1 {
            return values[0];
        }
        let measure = self.measure(Axis::Omega);
        values
            .iter()
            .zip(&self.omega_weights)
            .map(|(f, w)| f * w)
            .sum::<f64>()
            / measure
    }

    /// Unnormalized quadrature `sum_k w_k a_k b_k` over the omega grid.
    pub fn omega_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.omega_weights)
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    pub fn len(&self, axis: Axis) -> usize {
        match axis {
            Axis::T => self.nt(),
            Axis::X => self.nx(),
            Axis::Mu => self.n_mu(),
            Axis::Omega => self.n_omega(),
        }
    }

    /// Normalized mean of `values` (row-major over `axes`) over the variables
    /// in `over`. The result is row-major over the remaining axes.
    pub fn average(&self, values: &[f64], axes: &[Axis], over: &[Axis]) -> Result<Vec<f64>> {
        self.average_in(values, axes, over, MuRange::Full)
    }

    /// Like [`PhaseGrid::average`], optionally restricting `mu` to one half
    /// range. Half-range means are normalized by the half measure.
    pub fn average_in(
        &self,
        values: &[f64],
        axes: &[Axis],
        over: &[Axis],
        mu_range: MuRange,
    ) -> Result<Vec<f64>> {
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(Error::Shape(format!("axis {a:?} repeated")));
            }
        }
        for a in over {
            if !axes.contains(a) {
                return Err(Error::Shape(format!(
                    "cannot average over missing axis {a:?}"
                )));
            }
        }
        let shape: Vec<usize> = axes.iter().map(|&a| self.len(a)).collect();
        let total: usize = shape.iter().product();
        if values.len() != total {
            return Err(Error::Shape(format!(
                "field has {} values, axes {:?} need {}",
                values.len(),
                axes,
                total
            )));
        }

        // Per-axis weights normalized to unit total; non-reduced axes get None.
        let axis_weights: Vec<Option<Vec<f64>>> = axes
            .iter()
            .map(|&a| {
                if !over.contains(&a) {
                    return None;
                }
                let raw = self.weights(a);
                let mut w: Vec<f64> = match (a, mu_range) {
                    (Axis::Mu, MuRange::Positive) => raw
                        .iter()
                        .zip(&self.mu)
                        .map(|(w, m)| if *m > 0.0 { *w } else { 0.0 })
                        .collect(),
                    (Axis::Mu, MuRange::Negative) => raw
                        .iter()
                        .zip(&self.mu)
                        .map(|(w, m)| if *m < 0.0 { *w } else { 0.0 })
                        .collect(),
                    _ => raw.to_vec(),
                };
                let sum: f64 = w.iter().sum();
                if sum > 0.0 {
                    w.iter_mut().for_each(|v| *v /= sum);
                } else {
                    // Degenerate single-node axis.
                    let n = w.len() as f64;
                    w.iter_mut().for_each(|v| *v = 1.0 / n);
                }
                Some(w)
            })
            .collect();

        let kept: Vec<usize> = (0..axes.len())
            .filter(|&i| axis_weights[i].is_none())
            .collect();
        let out_len: usize = kept.iter().map(|&i| shape[i]).product();
        let mut out = vec![0.0; out_len];
        let mut index = vec![0usize; axes.len()];
        for &v in values {
            let mut w = 1.0;
            let mut out_idx = 0;
            for (d, &i) in index.iter().enumerate() {
                match &axis_weights[d] {
                    Some(ws) => w *= ws[i],
                    None => out_idx = out_idx * shape[d] + i,
                }
            }
            out[out_idx] += w * v;
            // Advance the row-major multi-index.
            for d in (0..axes.len()).rev() {
                index[d] += 1;
                if index[d] < shape[d] {
                    break;
                }
                index[d] = 0;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn paper_grid() -> PhaseGrid {
        PhaseGrid::build(&GridConfig::default(), 2.42).unwrap()
    }

    #[test]
    fn paper_grid_node_counts() {
        let g = paper_grid();
        assert_eq!(g.nx(), 51);
        assert_eq!(g.nt(), 301);
        assert_eq!(g.n_omega(), 10);
        assert_eq!(g.n_mu(), 64);
        assert_relative_eq!(g.final_time(), 1.5, epsilon = 1e-12);
        assert_relative_eq!(*g.omega.last().unwrap(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn two_point_rule_closed_form() {
        let (n, w) = gauss_legendre(2);
        let r = 1.0 / 3f64.sqrt();
        assert_relative_eq!(n[0], -r, epsilon = 1e-15);
        assert_relative_eq!(n[1], r, epsilon = 1e-15);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(w[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn weights_sum_to_two_and_nodes_pair_up() {
        for n in [2, 4, 8, 16, 64, 128] {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-12);
            for i in 0..n {
                assert_eq!(x[i], -x[n - 1 - i]);
                assert!(x[i] != 0.0);
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn second_moment_exact_at_64() {
        let (x, w) = gauss_legendre(64);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| x * x * w).sum();
        assert_relative_eq!(q, 2.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn polynomial_exactness_at_8_nodes() {
        let (x, w) = gauss_legendre(8);
        for k in 0..=9u32 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| x.powi(k as i32) * w).sum();
            let exact = if k % 2 == 1 {
                0.0
            } else {
                2.0 / (k as f64 + 1.0)
            };
            if exact == 0.0 {
                assert!(q.abs() < 1e-14, "k={k} q={q}");
            } else {
                assert_relative_eq!(q, exact, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn rejects_odd_mu_count() {
        let cfg = GridConfig {
            n_mu: 7,
            ..GridConfig::default()
        };
        assert!(matches!(
            PhaseGrid::build(&cfg, 2.42),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn rejects_cfl_violation_naming_speed() {
        let err = PhaseGrid::build(&GridConfig::default(), 10.0).unwrap_err();
        match &err {
            Error::Cfl { max_speed, .. } => assert_eq!(*max_speed, 10.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("max characteristic speed 10"));
    }

    #[test]
    fn rejects_nonpositive_spacing() {
        let cfg = GridConfig {
            dx: 0.0,
            ..GridConfig::default()
        };
        assert!(PhaseGrid::build(&cfg, 2.42).is_err());
        let cfg = GridConfig {
            omega_min: 0.0,
            ..GridConfig::default()
        };
        assert!(PhaseGrid::build(&cfg, 2.42).is_err());
    }

    #[test]
    fn average_of_constant_is_constant() {
        let g = paper_grid();
        let f = vec![3.25; g.slice_len()];
        let out = g
            .average(&f, &[Axis::Mu, Axis::Omega], &[Axis::Mu, Axis::Omega])
            .unwrap();
        assert_relative_eq!(out[0], 3.25, max_relative = 1e-14);
        let out = g
            .average(&f, &[Axis::Mu, Axis::Omega], &[Axis::Omega])
            .unwrap();
        assert_eq!(out.len(), g.n_mu());
        assert!(out.iter().all(|v| (v - 3.25).abs() < 1e-13));
    }

    #[test]
    fn odd_mu_averages_to_zero() {
        let g = paper_grid();
        let out = g.average(&g.mu, &[Axis::Mu], &[Axis::Mu]).unwrap();
        assert!(out[0].abs() < 1e-15);
    }

    #[test]
    fn mu_squared_times_omega() {
        let g = paper_grid();
        let mut f = Vec::new();
        for &m in &g.mu {
            for &w in &g.omega {
                f.push(m * m * w);
            }
        }
        let out = g
            .average(&f, &[Axis::Mu, Axis::Omega], &[Axis::Mu, Axis::Omega])
            .unwrap();
        // Analytic: (1/3) * mean of omega on [0.4, 4] = 2.2 / 3.
        assert_relative_eq!(out[0], 2.2 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(g.mean_mu_omega(&f), 2.2 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn half_ranges_partition_full_range() {
        let g = paper_grid();
        let f: Vec<f64> = g.mu.iter().map(|m| (3.0 * m).exp() + m).collect();
        let full = g.average(&f, &[Axis::Mu], &[Axis::Mu]).unwrap()[0];
        let pos = g
            .average_in(&f, &[Axis::Mu], &[Axis::Mu], MuRange::Positive)
            .unwrap()[0];
        let neg = g
            .average_in(&f, &[Axis::Mu], &[Axis::Mu], MuRange::Negative)
            .unwrap()[0];
        assert_relative_eq!(0.5 * pos + 0.5 * neg, full, max_relative = 1e-13);
    }

    #[test]
    fn axis_mismatch_is_an_error() {
        let g = paper_grid();
        assert!(g.average(&[1.0; 3], &[Axis::Mu], &[Axis::Mu]).is_err());
        assert!(g.average(&g.mu, &[Axis::Mu], &[Axis::Omega]).is_err());
    }
}
