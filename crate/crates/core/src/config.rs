//! Experiment configuration files and the built-in presets.
//!
//! A configuration is a TOML document with one table per concern:
//!
//! ```toml
//! seed = 0
//!
//! [grid]            # t_end, dt, x_end, dx, omega_min, omega_max, d_omega, n_mu
//! [material]        # tau_star, tau_initial, g_star, velocity, bounds
//! [forward]         # epsilon, t_end, tau, source, snapshot_times, dump_times, omega_slice
//! [diffusion]       # epsilons, source, settings
//! [experiments]     # design, pairs, data_csv, noise_level
//! [optimizer]       # methods, iterations, loss_every, grad_tol, sampling, snapshot_every
//! [grad_check]      # at, step, mode, directions, direction_seed
//! ```
//!
//! Every table and key is optional and falls back to the defaults below;
//! unknown keys are rejected. [`ExperimentConfig::validate`] builds every
//! grid, material and experiment a run will need, so configuration errors
//! surface before any solve starts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{scaled_grid, DiffusionSettings};
use crate::error::{Error, Result};
use crate::grid::{GridConfig, PhaseGrid};
use crate::inverse::{ExperimentDesign, SourceTestPair, StepMode};
use crate::material::{
    build_material, GStarProfile, MaterialModel, TauBounds, TauProfile, VelocityLaw,
};
use crate::optimize::{Method, OptimizerConfig, Sampling};
use crate::transport::{check_stability, BoundarySource};

/// Named starting points for a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Ballistic versus diffusive transport: diffusion study at `eps` = 1 and 0.1.
    Fig1,
    /// Forward snapshots at `eps = 1`.
    Fig4,
    /// Forward snapshots at `eps = 0.1` with a frequency slice.
    Fig5,
    /// Ten-experiment reconstruction of `tau`.
    Sec52,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Fig1, Preset::Fig4, Preset::Fig5, Preset::Sec52];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Sec52 => "sec52",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))
    }

    pub fn config(self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        match self {
            Preset::Fig1 => {
                cfg.diffusion.epsilons = vec![1.0, 0.1];
            }
            Preset::Fig4 => {
                cfg.forward.epsilon = 1.0;
                cfg.forward.snapshot_times = vec![0.1, 0.3, 0.5, 0.7, 0.9, 1.2];
            }
            Preset::Fig5 => {
                cfg.forward.epsilon = 0.1;
                cfg.forward.t_end = Some(0.2);
                cfg.forward.snapshot_times = vec![0.04, 0.08, 0.12];
                cfg.forward.omega_slice = Some(SlicePoint {
                    t: 0.12,
                    x: 0.5,
                    mu: 0.9675,
                });
            }
            Preset::Sec52 => {
                cfg.optimizer.methods = vec![
                    Method::Armijo {
                        c: 1e-4,
                        alpha_max: 1.28e11,
                    },
                    Method::Adagrad {
                        alpha: 0.5,
                        delta: 1e-30,
                    },
                ];
                cfg.optimizer.loss_every = 10;
            }
        }
        cfg
    }
}

/// Which relaxation-time profile a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauChoice {
    /// The ground truth `tau*`.
    #[default]
    Truth,
    /// The optimizer's starting point `tau^0`.
    Initial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    pub tau_star: TauProfile,
    pub tau_initial: TauProfile,
    pub g_star: GStarProfile,
    pub velocity: VelocityLaw,
    pub bounds: TauBounds,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self {
            tau_star: TauProfile::GroundTruth,
            tau_initial: TauProfile::InitialGuess,
            g_star: GStarProfile::BoseEinsteinDebye,
            velocity: VelocityLaw::default(),
            bounds: TauBounds::default(),
        }
    }
}

/// Boundary input of a forward or diffusion run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    /// No injected heat.
    None,
    Beam(BoundarySource),
}

impl SourceSpec {
    pub fn beam(&self) -> Option<BoundarySource> {
        match self {
            SourceSpec::None => None,
            SourceSpec::Beam(b) => Some(*b),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SourceSpec::None => Ok(()),
            SourceSpec::Beam(b) => b.validate(),
        }
    }
}

/// A point `(t, x, mu)` at which `h` is sampled across frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlicePoint {
    pub t: f64,
    pub x: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardConfig {
    pub epsilon: f64,
    /// Horizon of the run; defaults to the grid's `t_end`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub tau: TauChoice,
    pub source: SourceSpec,
    /// Times of the `<h>_mu (x, omega)` snapshot files.
    pub snapshot_times: Vec<f64>,
    /// Times of full `(x, mu, omega)` dumps.
    pub dump_times: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_slice: Option<SlicePoint>,
}

/// The beam of the forward demonstrations.
pub fn demo_source() -> BoundarySource {
    BoundarySource {
        t0: 0.04,
        mu0: 0.96,
        omega0: 2.0,
        widths: [0.01, 0.01, 0.1],
    }
}

impl Default for ForwardConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            t_end: None,
            tau: TauChoice::Truth,
            source: SourceSpec::Beam(demo_source()),
            snapshot_times: vec![0.1, 0.3, 0.5, 0.7, 0.9, 1.2],
            dump_times: Vec::new(),
            omega_slice: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionConfig {
    pub epsilons: Vec<f64>,
    pub tau: TauChoice,
    pub source: SourceSpec,
    pub settings: DiffusionSettings,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.2, 0.1, 0.05],
            tau: TauChoice::Truth,
            source: SourceSpec::Beam(demo_source()),
            settings: DiffusionSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentsConfig {
    /// Generates one pair per frequency node when `pairs` is empty.
    pub design: ExperimentDesign,
    /// Explicit pairs; windows are placed by the user.
    pub pairs: Vec<SourceTestPair>,
    /// Read data from this CSV instead of generating it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_csv: Option<String>,
    /// Relative amplitude of uniform multiplicative noise on generated data.
    pub noise_level: f64,
}

impl Default for ExperimentsConfig {
    fn default() -> Self {
        Self {
            design: ExperimentDesign::default(),
            pairs: Vec::new(),
            data_csv: None,
            noise_level: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    /// Each method runs separately from `tau^0`.
    pub methods: Vec<Method>,
    pub iterations: usize,
    pub loss_every: usize,
    pub grad_tol: f64,
    pub sampling: Sampling,
    /// `tau^n` profiles are written every this many iterations.
    pub snapshot_every: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let base = OptimizerConfig::default();
        Self {
            methods: vec![Method::armijo(), Method::adagrad()],
            iterations: base.iterations,
            loss_every: base.loss_every,
            grad_tol: base.grad_tol,
            sampling: base.sampling,
            snapshot_every: 60,
        }
    }
}

impl OptimizerSection {
    pub fn optimizer(&self, method: Method, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            method,
            iterations: self.iterations,
            loss_every: self.loss_every,
            grad_tol: self.grad_tol,
            sampling: self.sampling,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradCheckConfig {
    pub at: TauChoice,
    pub step: f64,
    pub mode: StepMode,
    /// Random directions per experiment.
    pub directions: usize,
    pub direction_seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            at: TauChoice::Initial,
            step: 1e-3,
            mode: StepMode::Relative,
            directions: 3,
            direction_seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Drives experiment sampling, data noise and gradient recombination.
    pub seed: u64,
    pub grid: GridConfig,
    pub material: MaterialConfig,
    pub forward: ForwardConfig,
    pub diffusion: DiffusionConfig,
    pub experiments: ExperimentsConfig,
    pub optimizer: OptimizerSection,
    pub grad_check: GradCheckConfig,
}

/// Materials and grid shared by most runs.
#[derive(Debug, Clone)]
pub struct Setup {
    pub grid: PhaseGrid,
    pub truth: MaterialModel,
    pub initial: MaterialModel,
}

impl Setup {
    pub fn material(&self, choice: TauChoice) -> &MaterialModel {
        match choice {
            TauChoice::Truth => &self.truth,
            TauChoice::Initial => &self.initial,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Grid at the paper resolution and both materials.
    pub fn setup(&self) -> Result<Setup> {
        let m = &self.material;
        let probe = PhaseGrid::build(
            &GridConfig {
                dt: self.grid.t_end,
                ..self.grid.clone()
            },
            f64::MIN_POSITIVE,
        )?;
        let speed = m.velocity.max_speed(&probe.omega)?;
        let grid = PhaseGrid::build(&self.grid, speed)?;
        let truth = build_material(&m.tau_star, &m.g_star, &m.velocity, &grid, m.bounds)?;
        let initial = build_material(&m.tau_initial, &m.g_star, &m.velocity, &grid, m.bounds)?;
        Ok(Setup {
            grid,
            truth,
            initial,
        })
    }

    /// Experiments without data, windows placed with the ground truth.
    pub fn pairs(&self, setup: &Setup) -> Result<Vec<SourceTestPair>> {
        if self.experiments.pairs.is_empty() {
            return self.experiments.design.pairs(&setup.truth, &setup.grid);
        }
        for p in &self.experiments.pairs {
            p.validate(
                setup.grid.final_time(),
                self.experiments.design.window_margin,
            )?;
        }
        Ok(self.experiments.pairs.clone())
    }

    /// Grid of the forward run: the configured grid when it is stable at
    /// `forward.epsilon`, otherwise the same resolution with `dt` reduced to
    /// `diffusion.settings.cfl` times the stability limit.
    pub fn forward_grid(&self, setup: &Setup) -> Result<PhaseGrid> {
        let fw = &self.forward;
        let material = setup.material(fw.tau);
        let t_end = fw.t_end.unwrap_or(self.grid.t_end);
        positive("forward.t_end", t_end)?;
        let base = GridConfig {
            t_end,
            ..self.grid.clone()
        };
        if let Ok(grid) = PhaseGrid::build(&base, material.max_speed()) {
            if check_stability(&grid, material, fw.epsilon).is_ok() {
                return Ok(grid);
            }
        }
        let settings = DiffusionSettings {
            t_end,
            ..self.diffusion.settings
        };
        scaled_grid(&base, material, fw.epsilon, &settings)
    }

    /// Checks every part of the configuration a run could use.
    pub fn validate(&self) -> Result<()> {
        let setup = self.setup()?;

        let fw = &self.forward;
        positive("forward.epsilon", fw.epsilon)?;
        let horizon = self.forward_grid(&setup)?.final_time();
        fw.source.validate()?;
        for &t in fw.snapshot_times.iter().chain(&fw.dump_times) {
            within("forward snapshot time", t, 0.0, horizon)?;
        }
        if let Some(p) = fw.omega_slice {
            within("omega_slice.t", p.t, 0.0, horizon)?;
            within("omega_slice.x", p.x, 0.0, self.grid.x_end)?;
            within("omega_slice.mu", p.mu, -1.0, 1.0)?;
        }

        let df = &self.diffusion;
        if df.epsilons.is_empty() {
            return Err(Error::Config("diffusion.epsilons is empty".into()));
        }
        for &e in &df.epsilons {
            positive("diffusion epsilon", e)?;
        }
        df.source.validate()?;
        let st = &df.settings;
        positive("diffusion.settings.t_end", st.t_end)?;
        if !(st.cfl > 0.0 && st.cfl <= 1.0) {
            return Err(Error::Config(format!(
                "diffusion.settings.cfl must lie in (0, 1], got {}",
                st.cfl
            )));
        }
        within(
            "diffusion.settings.probe_x",
            st.probe_x,
            0.0,
            self.grid.x_end,
        )?;
        within("diffusion.settings.ce_time", st.ce_time, 0.0, st.t_end)?;

        self.pairs(&setup)?;
        let noise = self.experiments.noise_level;
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::Config(format!(
                "experiments.noise_level must be >= 0, got {noise}"
            )));
        }

        for m in &self.optimizer.methods {
            m.validate()?;
        }
        if self.optimizer.snapshot_every == 0 {
            return Err(Error::Config(
                "optimizer.snapshot_every must be positive".into(),
            ));
        }
        positive("grad_check.step", self.grad_check.step)?;
        Ok(())
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be positive, got {v}")))
    }
}

fn within(what: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if v >= lo && v <= hi {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{what} = {v} lies outside [{lo}, {hi}]"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(
            ExperimentConfig::from_toml_str("").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn presets_round_trip_and_validate() {
        for p in Preset::ALL {
            let cfg = p.config();
            let text = cfg.to_toml_string().unwrap();
            assert_eq!(
                ExperimentConfig::from_toml_str(&text).unwrap(),
                cfg,
                "{}",
                p.name()
            );
            cfg.validate().unwrap();
            assert_eq!(Preset::parse(p.name()).unwrap(), p);
        }
    }

    #[test]
    fn missing_source_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.forward.source = SourceSpec::None;
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        let beam = ExperimentConfig::from_toml_str(
            "[forward]\nsource = { kind = \"beam\", t0 = 0.1, mu0 = 0.5, omega0 = 1.0, widths = [0.01, 0.01, 0.1] }\n",
        )
        .unwrap();
        assert_eq!(beam.forward.source.beam().unwrap().mu0, 0.5);
        assert!(ExperimentConfig::from_toml_str(
            "[forward]\nsource = { kind = \"beam\", t0 = 0.1, mu = 0.5, omega0 = 1.0, widths = [0.01, 0.01, 0.1] }\n",
        )
        .is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml_str("sed = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("[grid]\ndx = 0.02\nnmu = 3").is_err());
        assert!(ExperimentConfig::from_toml_str(
            "[optimizer]\nmethods = [{ kind = \"armijo\", c = 0.1 }]"
        )
        .is_err());
    }

    #[test]
    fn partial_tables_fill_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "seed = 4\n[grid]\ndx = 0.04\n[optimizer]\nmethods = [{ kind = \"adagrad\", alpha = 0.1, delta = 1e-8 }]\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.grid.dx, 0.04);
        assert_eq!(cfg.grid.dt, GridConfig::default().dt);
        assert_eq!(cfg.optimizer.methods.len(), 1);
        assert_eq!(cfg.optimizer.iterations, 500);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.dt = 0.05;
        assert!(matches!(cfg.validate(), Err(Error::Cfl { .. })));

        let mut cfg = ExperimentConfig::default();
        cfg.forward.snapshot_times = vec![2.0];
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.diffusion.epsilons.clear();
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.optimizer.methods = vec![Method::Adagrad {
            alpha: -1.0,
            delta: 1e-8,
        }];
        assert!(cfg.validate().is_err());
    }
}
