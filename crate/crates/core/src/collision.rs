//! Linear relaxation operators and the temperature functional.
//!
//! Slices at a fixed `x` are laid out as `m * n_omega + k`. The projection
//! `<h>_{mu,omega} / <h*>_omega` uses the grid's quadrature, so conservation
//! and the kernel identities hold to rounding at the discrete level.

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::material::MaterialModel;

/// A phase-space snapshot `h(x, mu, omega)` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    nx: usize,
    n_mu: usize,
    n_omega: usize,
    data: Vec<f64>,
}

impl DistributionField {
    pub fn zeros(grid: &PhaseGrid) -> Self {
        Self {
            nx: grid.nx(),
            n_mu: grid.n_mu(),
            n_omega: grid.n_omega(),
            data: vec![0.0; grid.field_len()],
        }
    }

    pub fn from_vec(grid: &PhaseGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.field_len() {
            return Err(Error::Shape(format!(
                "field has {} values, grid needs {}",
                data.len(),
                grid.field_len()
            )));
        }
        Ok(Self {
            nx: grid.nx(),
            n_mu: grid.n_mu(),
            n_omega: grid.n_omega(),
            data,
        })
    }

    /// Builds a field from a function of node indices `(j, m, k)`.
    pub fn from_fn(grid: &PhaseGrid, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut field = Self::zeros(grid);
        for j in 0..field.nx {
            for m in 0..field.n_mu {
                for k in 0..field.n_omega {
                    let i = field.index(j, m, k);
                    field.data[i] = f(j, m, k);
                }
            }
        }
        field
    }

    #[inline]
    pub fn index(&self, j: usize, m: usize, k: usize) -> usize {
        (j * self.n_mu + m) * self.n_omega + k
    }

    pub fn get(&self, j: usize, m: usize, k: usize) -> f64 {
        self.data[self.index(j, m, k)]
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn slice_len(&self) -> usize {
        self.n_mu * self.n_omega
    }

    /// The `(mu, omega)` slice at node `j`.
    pub fn slice(&self, j: usize) -> &[f64] {
        let n = self.slice_len();
        &self.data[j * n..(j + 1) * n]
    }

    pub fn slice_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.slice_len();
        &mut self.data[j * n..(j + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `g = tau h`.
    pub fn scaled_by_tau(&self, material: &MaterialModel) -> Self {
        let tau = material.tau();
        let mut out = self.clone();
        for (i, v) in out.data.iter_mut().enumerate() {
            *v *= tau[i % self.n_omega];
        }
        out
    }
}

/// Coefficient of the projection onto `Ker L`: `<h>_{mu,omega} / <h*>_omega`.
pub fn kernel_coefficient(slice: &[f64], material: &MaterialModel, grid: &PhaseGrid) -> f64 {
    grid.mean_mu_omega(slice) / material.h_star_mean()
}

/// Projection onto `Ker L`, `P[h] = (<h> / <h*>) h*`.
pub fn project_kernel(slice: &[f64], material: &MaterialModel, grid: &PhaseGrid) -> Vec<f64> {
    let c = kernel_coefficient(slice, material, grid);
    let nw = grid.n_omega();
    (0..slice.len())
        .map(|i| c * material.h_star()[i % nw])
        .collect()
}

/// `L[h] = (<h>_{mu,omega} / <h*>_omega) h* - h` on one x-slice.
pub fn apply_l(slice: &[f64], material: &MaterialModel, grid: &PhaseGrid, out: &mut [f64]) {
    debug_assert_eq!(slice.len(), grid.slice_len());
    debug_assert_eq!(out.len(), slice.len());
    let c = kernel_coefficient(slice, material, grid);
    let nw = grid.n_omega();
    let h_star = material.h_star();
    for (i, (o, h)) in out.iter_mut().zip(slice).enumerate() {
        *o = c * h_star[i % nw] - h;
    }
}

/// `L0[g] = (<g/tau>_{mu,omega} / <g*/tau>_omega) g* - g` on one x-slice.
pub fn apply_l0(slice: &[f64], material: &MaterialModel, grid: &PhaseGrid, out: &mut [f64]) {
    debug_assert_eq!(slice.len(), grid.slice_len());
    let nw = grid.n_omega();
    let tau = material.tau();
    let weights = grid.mu_omega_mean_weights();
    let mean_g_over_tau: f64 = slice
        .iter()
        .enumerate()
        .map(|(i, g)| weights[i] * g / tau[i % nw])
        .sum();
    let temperature = mean_g_over_tau / material.h_star_mean();
    let g_star = material.g_star();
    for (i, (o, g)) in out.iter_mut().zip(slice).enumerate() {
        *o = temperature * g_star[i % nw] - g;
    }
}

/// Temperature `T(x) = <h>_{mu,omega} / <h*>_omega` at every x node.
pub fn temperature_of(
    field: &DistributionField,
    material: &MaterialModel,
    grid: &PhaseGrid,
) -> Vec<f64> {
    (0..field.nx())
        .map(|j| kernel_coefficient(field.slice(j), material, grid))
        .collect()
}
