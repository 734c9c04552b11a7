//! Frequency-dependent material coefficients sampled on the omega grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;

/// Relaxation-time profile `tau(omega)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TauProfile {
    /// `1 / sqrt(5 omega) + 1`.
    GroundTruth,
    /// `-0.15 (omega - 4) + 1.4`.
    InitialGuess,
    Constant {
        value: f64,
    },
    /// `slope * omega + intercept`.
    Linear {
        slope: f64,
        intercept: f64,
    },
    /// Piecewise-linear interpolation of `(omega, tau)` pairs.
    Tabulated {
        points: Vec<(f64, f64)>,
    },
    /// Two-column CSV `omega,value` (header optional).
    Csv {
        path: String,
    },
}

/// Linearized equilibrium profile `g*(omega)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GStarProfile {
    /// `omega^2 e^omega / (e^omega - 1)^2`, scaled so the grid maximum is one.
    BoseEinsteinDebye,
    Constant {
        value: f64,
    },
    Tabulated {
        points: Vec<(f64, f64)>,
    },
    Csv {
        path: String,
    },
}

/// Group velocity `v(omega)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityLaw {
    /// `intercept + slope * omega`; the default is `2.5 - 0.2 omega`.
    Linear {
        intercept: f64,
        slope: f64,
    },
    Constant {
        value: f64,
    },
}

impl Default for VelocityLaw {
    fn default() -> Self {
        VelocityLaw::Linear {
            intercept: 2.5,
            slope: -0.2,
        }
    }
}

impl VelocityLaw {
    pub fn at(&self, omega: f64) -> f64 {
        match *self {
            VelocityLaw::Linear { intercept, slope } => intercept + slope * omega,
            VelocityLaw::Constant { value } => value,
        }
    }

    /// Nodal speeds; rejects any non-positive value.
    pub fn eval(&self, omega: &[f64]) -> Result<Vec<f64>> {
        omega
            .iter()
            .map(|&w| {
                let v = self.at(w);
                if v > 0.0 && v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonPositive {
                        what: "group velocity",
                        omega: w,
                        value: v,
                    })
                }
            })
            .collect()
    }

    /// `max |v|` over the nodes.
    pub fn max_speed(&self, omega: &[f64]) -> Result<f64> {
        Ok(self.eval(omega)?.into_iter().fold(0.0, f64::max))
    }
}

fn interpolate(points: &[(f64, f64)], omega: f64) -> Option<f64> {
    let first = points.first()?;
    let last = points.last()?;
    let tol = 1e-9 * (1.0 + omega.abs());
    if omega < first.0 - tol || omega > last.0 + tol {
        return None;
    }
    if points.len() == 1 {
        return Some(first.1);
    }
    let i = points
        .windows(2)
        .position(|p| omega <= p[1].0 + tol)
        .unwrap_or(points.len() - 2);
    let (x0, y0) = points[i];
    let (x1, y1) = points[i + 1];
    if (omega - x0).abs() <= tol {
        return Some(y0);
    }
    if (omega - x1).abs() <= tol {
        return Some(y1);
    }
    Some(y0 + (y1 - y0) * (omega - x0) / (x1 - x0))
}

/// Reads a two-column `omega,value` CSV. A non-numeric first row is treated
/// as a header.
pub fn read_profile_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let parsed = (
            record.get(0).map(str::parse::<f64>),
            record.get(1).map(str::parse::<f64>),
        );
        match parsed {
            (Some(Ok(w)), Some(Ok(v))) => points.push((w, v)),
            _ if row == 0 => continue,
            _ => {
                return Err(Error::InvalidMaterial(format!(
                    "{}: row {} is not two numbers",
                    path.display(),
                    row + 1
                )))
            }
        }
    }
    validate_table(&points)?;
    Ok(points)
}

/// Writes nodal values as a two-column `omega,value` CSV.
pub fn write_profile_csv(path: &Path, omega: &[f64], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let io = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record(["omega", "value"]).map_err(io)?;
    for (o, v) in omega.iter().zip(values) {
        w.write_record([o.to_string(), v.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn validate_table(points: &[(f64, f64)]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidMaterial("empty profile table".into()));
    }
    if points.windows(2).any(|p| p[1].0 <= p[0].0) {
        return Err(Error::InvalidMaterial(
            "profile table omega values must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn eval_table(points: &[(f64, f64)], omega: &[f64]) -> Result<Vec<f64>> {
    validate_table(points)?;
    omega
        .iter()
        .map(|&w| {
            interpolate(points, w).ok_or_else(|| {
                Error::InvalidMaterial(format!("omega = {w} outside tabulated range"))
            })
        })
        .collect()
}

fn require_positive(what: &'static str, omega: &[f64], values: Vec<f64>) -> Result<Vec<f64>> {
    for (&w, &v) in omega.iter().zip(&values) {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositive {
                what,
                omega: w,
                value: v,
            });
        }
    }
    Ok(values)
}

/// `tau(omega)` at the given nodes.
pub fn eval_tau(profile: &TauProfile, omega: &[f64]) -> Result<Vec<f64>> {
    let values = match profile {
        TauProfile::GroundTruth => omega.iter().map(|w| 1.0 / (5.0 * w).sqrt() + 1.0).collect(),
        TauProfile::InitialGuess => omega.iter().map(|w| -0.15 * (w - 4.0) + 1.4).collect(),
        TauProfile::Constant { value } => vec![*value; omega.len()],
        TauProfile::Linear { slope, intercept } => {
            omega.iter().map(|w| slope * w + intercept).collect()
        }
        TauProfile::Tabulated { points } => eval_table(points, omega)?,
        TauProfile::Csv { path } => eval_table(&read_profile_csv(Path::new(path))?, omega)?,
    };
    require_positive("relaxation time", omega, values)
}

/// Group velocity at the nodes.
pub fn eval_velocity(law: &VelocityLaw, omega: &[f64]) -> Result<Vec<f64>> {
    law.eval(omega)
}

pub fn eval_g_star(profile: &GStarProfile, omega: &[f64]) -> Result<Vec<f64>> {
    let values = match profile {
        GStarProfile::BoseEinsteinDebye => {
            let raw: Vec<f64> = omega
                .iter()
                .map(|&w| {
                    let e = w.exp();
                    w * w * e / ((e - 1.0) * (e - 1.0))
                })
                .collect();
            let max = raw.iter().cloned().fold(f64::MIN, f64::max);
            raw.into_iter().map(|v| v / max).collect()
        }
        GStarProfile::Constant { value } => vec![*value; omega.len()],
        GStarProfile::Tabulated { points } => eval_table(points, omega)?,
        GStarProfile::Csv { path } => eval_table(&read_profile_csv(Path::new(path))?, omega)?,
    };
    require_positive("equilibrium weight g*", omega, values)
}

/// Admissible range `[c1, c2]` for the relaxation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for TauBounds {
    fn default() -> Self {
        Self {
            min: 0.1,
            max: 10.0,
        }
    }
}

impl TauBounds {
    pub fn clamp(&self, tau: f64) -> f64 {
        tau.clamp(self.min, self.max)
    }
}

/// Coefficients on the omega grid, with `h* = g* / tau` kept consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialModel {
    omega: Vec<f64>,
    omega_mean_weights: Vec<f64>,
    tau: Vec<f64>,
    velocity: Vec<f64>,
    g_star: Vec<f64>,
    h_star: Vec<f64>,
    h_star_mean: f64,
    bounds: TauBounds,
}

impl MaterialModel {
    /// Assembles a material from nodal values on `grid`'s omega nodes.
    pub fn from_values(
        grid: &PhaseGrid,
        tau: Vec<f64>,
        velocity: Vec<f64>,
        g_star: Vec<f64>,
        bounds: TauBounds,
    ) -> Result<Self> {
        let n = grid.n_omega();
        if tau.len() != n || velocity.len() != n || g_star.len() != n {
            return Err(Error::Shape(format!(
                "material arrays must have {n} entries (tau {}, v {}, g* {})",
                tau.len(),
                velocity.len(),
                g_star.len()
            )));
        }
        if !(bounds.min > 0.0 && bounds.max > bounds.min) {
            return Err(Error::InvalidMaterial(format!(
                "tau bounds must satisfy 0 < min < max, got [{}, {}]",
                bounds.min, bounds.max
            )));
        }
        let omega = grid.omega.clone();
        let velocity = require_positive("group velocity", &omega, velocity)?;
        let g_star = require_positive("equilibrium weight g*", &omega, g_star)?;
        let mut model = Self {
            omega_mean_weights: grid.omega_mean_weights(),
            omega,
            tau: Vec::new(),
            velocity,
            g_star,
            h_star: Vec::new(),
            h_star_mean: 0.0,
            bounds,
        };
        model.set_tau(tau)?;
        Ok(model)
    }

    fn set_tau(&mut self, tau: Vec<f64>) -> Result<()> {
        let tau = require_positive("relaxation time", &self.omega, tau)?;
        for (&w, &t) in self.omega.iter().zip(&tau) {
            if t < self.bounds.min || t > self.bounds.max {
                return Err(Error::InvalidMaterial(format!(
                    "tau = {t} at omega = {w} outside bounds [{}, {}]",
                    self.bounds.min, self.bounds.max
                )));
            }
        }
        self.h_star = self.g_star.iter().zip(&tau).map(|(g, t)| g / t).collect();
        self.h_star_mean = self
            .h_star
            .iter()
            .zip(&self.omega_mean_weights)
            .map(|(h, w)| h * w)
            .sum();
        self.tau = tau;
        Ok(())
    }

    /// A copy with a new relaxation time and `h*` recomputed.
    pub fn with_tau(&self, tau: Vec<f64>) -> Result<Self> {
        if tau.len() != self.tau.len() {
            return Err(Error::Shape(format!(
                "tau has {} entries, expected {}",
                tau.len(),
                self.tau.len()
            )));
        }
        let mut next = self.clone();
        next.set_tau(tau)?;
        Ok(next)
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }
    pub fn tau(&self) -> &[f64] {
        &self.tau
    }
    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }
    pub fn g_star(&self) -> &[f64] {
        &self.g_star
    }
    pub fn h_star(&self) -> &[f64] {
        &self.h_star
    }
    /// `<h*>_omega`.
    pub fn h_star_mean(&self) -> f64 {
        self.h_star_mean
    }
    pub fn bounds(&self) -> TauBounds {
        self.bounds
    }
    pub fn max_speed(&self) -> f64 {
        self.velocity.iter().cloned().fold(0.0, f64::max)
    }
    pub fn tau_min(&self) -> f64 {
        self.tau.iter().cloned().fold(f64::INFINITY, f64::min)
    }
    /// Observed `(min, max)` of `g*`.
    pub fn g_star_range(&self) -> (f64, f64) {
        self.g_star
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| {
                (lo.min(g), hi.max(g))
            })
    }
}

/// Builds a [`MaterialModel`] from profiles evaluated on the grid.
pub fn build_material(
    tau: &TauProfile,
    g_star: &GStarProfile,
    velocity: &VelocityLaw,
    grid: &PhaseGrid,
    bounds: TauBounds,
) -> Result<MaterialModel> {
    MaterialModel::from_values(
        grid,
        eval_tau(tau, &grid.omega)?,
        eval_velocity(velocity, &grid.omega)?,
        eval_g_star(g_star, &grid.omega)?,
        bounds,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;
    use approx::assert_relative_eq;

    fn grid() -> PhaseGrid {
        PhaseGrid::build(&GridConfig::default(), 2.42).unwrap()
    }

    #[test]
    fn closed_form_taus() {
        let t = eval_tau(&TauProfile::GroundTruth, &[0.4]).unwrap();
        assert_relative_eq!(t[0], 1.0 / 2f64.sqrt() + 1.0, epsilon = 1e-15);
        assert_relative_eq!(t[0], 1.70711, epsilon = 1e-5);
        let t = eval_tau(&TauProfile::InitialGuess, &[4.0, 0.4]).unwrap();
        assert_relative_eq!(t[0], 1.4, epsilon = 1e-15);
        assert_relative_eq!(t[1], 1.94, epsilon = 1e-14);
    }

    #[test]
    fn ground_truth_strictly_decreasing_on_grid() {
        let g = grid();
        let t = eval_tau(&TauProfile::GroundTruth, &g.omega).unwrap();
        assert!(t.windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn velocity_values() {
        let v = VelocityLaw::default();
        assert_relative_eq!(v.at(2.0), 2.1, epsilon = 1e-15);
        assert_relative_eq!(v.at(0.4), 2.42, epsilon = 1e-15);
        assert_relative_eq!(v.at(4.0), 1.7, epsilon = 1e-15);
        assert!(v.eval(&[13.0]).is_err());
        assert_relative_eq!(v.max_speed(&grid().omega).unwrap(), 2.42, epsilon = 1e-15);
    }

    #[test]
    fn nonpositive_tau_reports_node() {
        let err = eval_tau(
            &TauProfile::Linear {
                slope: -1.0,
                intercept: 2.0,
            },
            &[1.0, 2.0, 3.0],
        )
        .unwrap_err();
        match err {
            Error::NonPositive { omega, value, .. } => {
                assert_eq!(omega, 2.0);
                assert_eq!(value, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identity_coefficients() {
        let g = grid();
        let m = build_material(
            &TauProfile::Constant { value: 1.0 },
            &GStarProfile::Constant { value: 1.0 },
            &VelocityLaw::default(),
            &g,
            TauBounds::default(),
        )
        .unwrap();
        assert!(m.h_star().iter().all(|&h| h == 1.0));
        assert_relative_eq!(m.h_star_mean(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn h_star_matches_ratio_and_tracks_tau_updates() {
        let g = grid();
        let m = build_material(
            &TauProfile::GroundTruth,
            &GStarProfile::BoseEinsteinDebye,
            &VelocityLaw::default(),
            &g,
            TauBounds::default(),
        )
        .unwrap();
        for i in 0..g.n_omega() {
            assert_relative_eq!(
                m.h_star()[i],
                m.g_star()[i] / m.tau()[i],
                max_relative = 1e-15
            );
        }
        let new_tau: Vec<f64> = m.tau().iter().map(|t| t * 1.3).collect();
        let m2 = m.with_tau(new_tau).unwrap();
        for i in 0..g.n_omega() {
            assert_eq!(m2.h_star()[i], m2.g_star()[i] / m2.tau()[i]);
        }
        assert_relative_eq!(
            m2.h_star_mean(),
            m.h_star_mean() / 1.3,
            max_relative = 1e-14
        );
    }

    #[test]
    fn default_g_star_normalized_and_positive() {
        let g = grid();
        let gs = eval_g_star(&GStarProfile::BoseEinsteinDebye, &g.omega).unwrap();
        let max = gs.iter().cloned().fold(0.0, f64::max);
        assert_relative_eq!(max, 1.0, epsilon = 1e-15);
        assert!(gs.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn bounds_are_enforced() {
        let g = grid();
        let m = build_material(
            &TauProfile::GroundTruth,
            &GStarProfile::BoseEinsteinDebye,
            &VelocityLaw::default(),
            &g,
            TauBounds::default(),
        )
        .unwrap();
        let mut bad = m.tau().to_vec();
        bad[3] = 20.0;
        assert!(m.with_tau(bad).is_err());
        assert!(m.with_tau(vec![1.0; 3]).is_err());
    }

    #[test]
    fn tabulated_round_trip_through_csv() {
        let g = grid();
        let tau = eval_tau(&TauProfile::GroundTruth, &g.omega).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tau.csv");
        write_profile_csv(&path, &g.omega, &tau).unwrap();
        let back = eval_tau(
            &TauProfile::Csv {
                path: path.to_string_lossy().into_owned(),
            },
            &g.omega,
        )
        .unwrap();
        assert_eq!(back, tau);
    }

    #[test]
    fn tabulated_interpolates_linearly() {
        let p = TauProfile::Tabulated {
            points: vec![(0.0, 1.0), (1.0, 3.0)],
        };
        let t = eval_tau(&p, &[0.25, 1.0]).unwrap();
        assert_relative_eq!(t[0], 1.5, epsilon = 1e-15);
        assert_eq!(t[1], 3.0);
        assert!(eval_tau(&p, &[2.0]).is_err());
    }
}
