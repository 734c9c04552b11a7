//! Command-line front end: configuration resolution, the six experiment
//! runners and their CSV outputs.
//!
//! Every run writes the effective configuration to `config.toml` in the
//! output directory, so any result can be regenerated with
//! `phonon <command> --config <out>/config.toml`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, Preset, Setup};
use crate::diagnostics::{
    bulk_kappa, diffusion_run, heat_capacity, settled_kappa, DiffusionRun, DiffusionSettings,
    MacroTrace,
};
use crate::error::{Error, Result};
use crate::grid::{Axis, PhaseGrid};
use crate::inverse::{
    arrival_time, compare_with_oracle, frechet_gradient, generate_data, positive_directions,
    total_loss, GradientVector, SourceTestPair,
};
use crate::optimize::{
    gradient_geometry, recombine_with, run, uniform_mixing_matrix, GradientGeometry, HistoryRow,
    PdeObjective,
};
use crate::transport::{solve_forward_with, BoundarySource, NoSource, Source, TestWindow};

#[derive(Debug, Parser)]
#[command(
    name = "phonon",
    version,
    about = "Phonon transport simulation and relaxation-time reconstruction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Start from a built-in configuration.
    #[arg(long, global = true, value_parser = ["fig1", "fig4", "fig5", "sec52"])]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Forward solve: snapshots and the boundary temperature trace.
    Forward,
    /// Macroscopic traces and conductivities across epsilon.
    Diffusion,
    /// Synthetic boundary data from the ground truth.
    GenerateData,
    /// Stochastic reconstruction of tau from boundary data.
    Reconstruct,
    /// Adjoint gradients against finite differences, and peak alignment.
    GradCheck,
    /// Norms and angles of the gradient family, before and after recombination.
    GradDiagnostics,
}

/// Configuration after applying `--config`, `--preset` and `--seed`.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => Preset::parse(name)?.config(),
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Validates the configuration, echoes it and runs the command.
pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    cfg.validate()?;
    create_dir(&cli.out)?;
    write_text(&cli.out.join("config.toml"), &cfg.to_toml_string()?)?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Forward => run_forward_demo(&cfg, out),
        Command::Diffusion => run_diffusion_study(&cfg, out),
        Command::GenerateData => run_generate_data(&cfg, out).map(|_| ()),
        Command::Reconstruct => run_reconstruction(&cfg, out),
        Command::GradCheck => run_grad_check(&cfg, out),
        Command::GradDiagnostics => run_grad_diagnostics(&cfg, out),
    }
}

/// Entry point of the binary; returns the process exit code. Failures are
/// reported as one JSON object on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", error_line("usage", &e.to_string()));
            return 2;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            1
        }
    }
}

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message.trim() }).to_string()
}

// ---------------------------------------------------------------------------
// Runners

/// Snapshots of `<h>_mu (x, omega)`, optional full dumps and frequency slice,
/// and the boundary temperature trace `T(t, 0)`.
pub fn run_forward_demo(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let setup = cfg.setup()?;
    let fw = &cfg.forward;
    let grid = cfg.forward_grid(&setup)?;
    let material = setup.material(fw.tau);
    let source: Box<dyn Source> = match fw.source.beam() {
        Some(s) => Box::new(s),
        None => Box::new(NoSource),
    };
    let snap_steps: Vec<usize> = fw
        .snapshot_times
        .iter()
        .map(|&t| step_of(&grid, t))
        .collect();
    let dump_steps: Vec<usize> = fw.dump_times.iter().map(|&t| step_of(&grid, t)).collect();
    let slice_step = fw.omega_slice.map(|p| step_of(&grid, p.t));
    let h_mean = material.h_star_mean();

    let mut trace = Vec::with_capacity(grid.nt());
    let mut pending: Vec<(PathBuf, Vec<String>, Vec<Vec<String>>)> = Vec::new();
    let mut max_abs = 0.0f64;
    solve_forward_with(material, &grid, source.as_ref(), fw.epsilon, |n, field| {
        trace.push(grid.mean_mu_omega(field.slice(0)) / h_mean);
        max_abs = field.as_slice().iter().fold(max_abs, |m, v| m.max(v.abs()));
        let t = grid.t[n];
        for (i, _) in snap_steps.iter().enumerate().filter(|(_, &s)| s == n) {
            let rows = mu_average_rows(&grid, field.as_slice(), t);
            let name = format!("snapshot_t{}.csv", fw.snapshot_times[i]);
            pending.push((out.join(name), strings(&["t", "x", "omega", "value"]), rows));
        }
        for (i, _) in dump_steps.iter().enumerate().filter(|(_, &s)| s == n) {
            let mut rows = Vec::with_capacity(grid.field_len());
            for j in 0..grid.nx() {
                let s = field.slice(j);
                for m in 0..grid.n_mu() {
                    for k in 0..grid.n_omega() {
                        rows.push(nums(&[
                            grid.x[j],
                            grid.mu[m],
                            grid.omega[k],
                            s[m * grid.n_omega() + k],
                        ]));
                    }
                }
            }
            let name = format!("dump_t{}.csv", fw.dump_times[i]);
            pending.push((
                out.join(name),
                strings(&["x", "mu", "omega", "value"]),
                rows,
            ));
        }
        if slice_step == Some(n) {
            let p = fw.omega_slice.expect("slice step implies slice");
            let j = nearest(&grid.x, p.x);
            let m = nearest(&grid.mu, p.mu);
            let s = field.slice(j);
            let rows = (0..grid.n_omega())
                .map(|k| {
                    let h = s[m * grid.n_omega() + k];
                    nums(&[
                        t,
                        grid.x[j],
                        grid.mu[m],
                        grid.omega[k],
                        h,
                        material.h_star()[k],
                    ])
                })
                .collect();
            pending.push((
                out.join("omega_slice.csv"),
                strings(&["t", "x", "mu", "omega", "h", "h_star"]),
                rows,
            ));
        }
        Ok(())
    })?;
    for (path, header, rows) in &pending {
        write_csv(path, header, rows)?;
    }
    let rows: Vec<Vec<String>> = grid
        .t
        .iter()
        .zip(&trace)
        .map(|(t, v)| nums(&[*t, *v]))
        .collect();
    write_csv(
        &out.join("boundary_temperature.csv"),
        &strings(&["t", "temperature"]),
        &rows,
    )?;

    let mut summary = vec![
        ("epsilon".to_string(), fw.epsilon),
        ("dt".to_string(), grid.dt),
        ("max_abs_h".to_string(), max_abs),
    ];
    if let Some(s) = fw.source.beam() {
        let (tp, _) = returning_peak(&grid, &trace, &s);
        summary.push(("peak_time".into(), tp));
        if let Ok(tr) = arrival_time(s.t0, s.mu0, s.omega0, material) {
            summary.push(("arrival_time".into(), tr));
        }
    }
    write_summary(&out.join("summary.csv"), &summary)
}

/// Time and value of the largest boundary temperature once the beam has
/// been fully injected (`t > t0 + 5 eps1`).
pub fn returning_peak(grid: &PhaseGrid, trace: &[f64], source: &BoundarySource) -> (f64, f64) {
    let after = source.t0 + 5.0 * source.widths[0];
    grid.t.iter().zip(trace).filter(|(t, _)| **t > after).fold(
        (f64::NAN, f64::NEG_INFINITY),
        |best, (&t, &v)| if v > best.1 { (t, v) } else { best },
    )
}

/// Per-epsilon macroscopic traces and the conductivity summary.
pub fn run_diffusion_study(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let setup = cfg.setup()?;
    let df = &cfg.diffusion;
    let material = setup.material(df.tau);
    let source: Box<dyn Source> = match df.source.beam() {
        Some(s) => Box::new(s),
        None => Box::new(NoSource),
    };
    let mut summary = Vec::new();
    for &eps in &df.epsilons {
        let r = diffusion_run(material, &cfg.grid, source.as_ref(), eps, &df.settings)?;
        write_macro_trace(&out.join(format!("trace_eps{eps}.csv")), &r.trace)?;
        summary.push(diffusion_summary_row(&r, &df.settings));
    }
    write_csv(
        &out.join("diffusion_summary.csv"),
        &strings(&[
            "epsilon",
            "dt",
            "kappa_bulk",
            "kappa_settled",
            "relative_gap",
            "drift",
            "ce_residual",
        ]),
        &summary,
    )?;
    write_summary(
        &out.join("summary.csv"),
        &[
            ("kappa_bulk".into(), bulk_kappa(material, &setup.grid)),
            ("heat_capacity".into(), heat_capacity(material, &setup.grid)),
        ],
    )
}

fn diffusion_summary_row(r: &DiffusionRun, settings: &DiffusionSettings) -> Vec<String> {
    let drift = settled_kappa(&r.trace.kappa_at(settings.probe_x), settings.settle_after)
        .map(|s| s.drift());
    vec![
        r.epsilon.to_string(),
        r.dt.to_string(),
        r.bulk.to_string(),
        opt(r.kappa_settled()),
        opt(r.relative_gap()),
        opt(drift),
        r.ce_residual.to_string(),
    ]
}

/// Generates (or reads) the experiment data and writes `data.csv`.
pub fn run_generate_data(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SourceTestPair>> {
    let setup = cfg.setup()?;
    let pairs = experiment_data(cfg, &setup)?;
    write_data_csv(&out.join("data.csv"), &pairs)?;
    Ok(pairs)
}

/// Data for the inverse problem: read from `experiments.data_csv` when set,
/// otherwise generated from the ground truth with optional noise.
pub fn experiment_data(cfg: &ExperimentConfig, setup: &Setup) -> Result<Vec<SourceTestPair>> {
    if let Some(path) = &cfg.experiments.data_csv {
        return read_data_csv(Path::new(path));
    }
    let pairs = cfg.pairs(setup)?;
    let mut data = generate_data(&setup.truth, &setup.grid, &pairs)?;
    let level = cfg.experiments.noise_level;
    if level > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for p in &mut data {
            let d = p.datum.expect("generated");
            p.datum = Some(d * (1.0 + level * rng.gen_range(-1.0..1.0)));
        }
    }
    Ok(data)
}

/// One SGD run per configured method, each in its own subdirectory.
pub fn run_reconstruction(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let setup = cfg.setup()?;
    let pairs = experiment_data(cfg, &setup)?;
    write_data_csv(&out.join("data.csv"), &pairs)?;
    let objective = PdeObjective {
        grid: &setup.grid,
        material: &setup.initial,
        pairs: &pairs,
    };
    let omega = &setup.grid.omega;
    let mut summary = Vec::new();
    for method in &cfg.optimizer.methods {
        let dir = out.join(method.name());
        create_dir(&dir)?;
        let opt_cfg = cfg.optimizer.optimizer(*method, cfg.seed);
        let state = run(
            &objective,
            setup.initial.tau().to_vec(),
            setup.initial.bounds(),
            &opt_cfg,
            Some(setup.truth.tau()),
        )?;
        let rows: Vec<Vec<String>> = state
            .history
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    r.xi.map(|x| x.to_string()).unwrap_or_default(),
                    opt(r.alpha),
                    opt(r.loss_total),
                    opt(r.loss_sampled),
                    opt(r.error_e),
                    opt(r.grad_norm),
                ]
            })
            .collect();
        write_csv(
            &dir.join("history.csv"),
            &strings(&[
                "n",
                "xi",
                "alpha",
                "loss_total",
                "loss_sampled",
                "error_e",
                "grad_norm",
            ]),
            &rows,
        )?;

        let snaps = tau_snapshots(&setup.grid, &state.history, cfg.optimizer.snapshot_every);
        write_csv(
            &dir.join("tau_snapshots.csv"),
            &strings(&["n", "omega", "tau"]),
            &snaps,
        )?;
        let rows: Vec<Vec<String>> = (0..omega.len())
            .map(|k| {
                nums(&[
                    omega[k],
                    state.tau[k],
                    setup.truth.tau()[k],
                    setup.initial.tau()[k],
                ])
            })
            .collect();
        write_csv(
            &dir.join("tau_final.csv"),
            &strings(&["omega", "tau", "tau_star", "tau_initial"]),
            &rows,
        )?;

        let first = &state.history[0];
        let last = state.history.last().expect("history has the initial row");
        summary.push(vec![
            method.name().to_string(),
            last.n.to_string(),
            opt(first.error_e),
            opt(last.error_e),
            opt(first.loss_total),
            opt(last.loss_total),
            state.skipped_steps.to_string(),
            state.clamp_hits.to_string(),
        ]);
    }
    write_csv(
        &out.join("reconstruction_summary.csv"),
        &strings(&[
            "method",
            "iterations",
            "e_initial",
            "e_final",
            "loss_initial",
            "loss_final",
            "skipped_steps",
            "clamp_hits",
        ]),
        &summary,
    )
}

/// `tau^n` rows at every `snapshot_every`-th iterate and the last one.
fn tau_snapshots(grid: &PhaseGrid, history: &[HistoryRow], every: usize) -> Vec<Vec<String>> {
    let last = history.len() - 1;
    let mut rows = Vec::new();
    for (i, row) in history.iter().enumerate() {
        if row.n % every != 0 && i != last {
            continue;
        }
        for (w, t) in grid.omega.iter().zip(&row.tau) {
            rows.push(vec![row.n.to_string(), w.to_string(), t.to_string()]);
        }
    }
    rows
}

/// Gradients at the configured `tau`, their finite-difference check and
/// the peak-alignment table.
pub fn run_grad_check(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let setup = cfg.setup()?;
    let gc = &cfg.grad_check;
    let pairs = experiment_data(cfg, &setup)?;
    let material = setup.material(gc.at);
    let grid = &setup.grid;
    let dirs = positive_directions(
        pairs.len(),
        gc.directions,
        grid.n_omega(),
        gc.direction_seed,
    );
    let (gradients, checks) = compare_with_oracle(material, grid, &pairs, &dirs, gc.step, gc.mode)?;
    write_gradients(&out.join("gradients.csv"), grid, &gradients)?;

    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                c.pair.to_string(),
                c.direction.to_string(),
                c.adjoint.to_string(),
                c.finite_difference.to_string(),
                c.relative_error().to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("fd_check.csv"),
        &strings(&[
            "pair_id",
            "direction_id",
            "adjoint",
            "finite_difference",
            "relative_error",
        ]),
        &rows,
    )?;

    let mut aligned = 0;
    let rows: Vec<Vec<String>> = pairs
        .iter()
        .zip(&gradients)
        .enumerate()
        .map(|(i, (p, g))| {
            let peak = grid.omega[g.argmax_abs()];
            let source_node = grid.omega[nearest(&grid.omega, p.source.omega0)];
            let ok = peak == source_node;
            aligned += usize::from(ok);
            vec![
                i.to_string(),
                p.source.omega0.to_string(),
                peak.to_string(),
                g.norm().to_string(),
                ok.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("peak_alignment.csv"),
        &strings(&["pair_id", "omega0", "argmax_omega", "grad_norm", "aligned"]),
        &rows,
    )?;
    let worst = checks
        .iter()
        .map(|c| c.relative_error())
        .fold(0.0, f64::max);
    let max_norm = gradients.iter().map(|g| g.norm()).fold(0.0, f64::max);
    write_summary(
        &out.join("summary.csv"),
        &[
            ("worst_relative_error".into(), worst),
            ("aligned_pairs".into(), aligned as f64),
            ("max_grad_norm".into(), max_norm),
        ],
    )
}

/// Norms, cosines and their recombined counterparts for the gradient family.
pub fn run_grad_diagnostics(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let setup = cfg.setup()?;
    let pairs = experiment_data(cfg, &setup)?;
    let material = setup.material(cfg.grad_check.at);
    let grid = &setup.grid;
    let gradients: Vec<GradientVector> = pairs
        .iter()
        .map(|p| frechet_gradient(material, grid, p))
        .collect::<Result<_>>()?;
    write_gradients(&out.join("gradients.csv"), grid, &gradients)?;
    let report = geometry_report(&gradients, grid, cfg.seed)?;
    write_geometry(out, "", &report.before)?;
    write_geometry(out, "recombined_", &report.after)?;
    write_matrix(&out.join("mixing_matrix.csv"), "row", &report.mixing)?;
    let recombined: Vec<GradientVector> = report
        .recombined
        .iter()
        .cloned()
        .map(GradientVector)
        .collect();
    write_gradients(&out.join("recombined_gradients.csv"), grid, &recombined)?;
    write_summary(
        &out.join("summary.csv"),
        &[
            ("min_cosine".into(), report.before.min_cosine()),
            ("recombined_min_cosine".into(), report.after.min_cosine()),
            ("norm_spread".into(), report.before.norm_spread()),
            ("recombined_norm_spread".into(), report.after.norm_spread()),
            (
                "min_cosine_improved".into(),
                f64::from(u8::from(report.cosine_improved())),
            ),
            (
                "norm_spread_improved".into(),
                f64::from(u8::from(report.spread_improved())),
            ),
            ("total_loss".into(), total_loss(material, grid, &pairs)?),
        ],
    )
}

/// Geometry of a gradient family before and after a seeded uniform mixing.
#[derive(Debug, Clone)]
pub struct GeometryReport {
    pub mixing: Vec<Vec<f64>>,
    pub recombined: Vec<Vec<f64>>,
    pub before: GradientGeometry,
    pub after: GradientGeometry,
}

impl GeometryReport {
    pub fn cosine_improved(&self) -> bool {
        self.after.min_cosine() > self.before.min_cosine()
    }

    pub fn spread_improved(&self) -> bool {
        self.after.norm_spread() < self.before.norm_spread()
    }
}

pub fn geometry_report(
    gradients: &[GradientVector],
    grid: &PhaseGrid,
    seed: u64,
) -> Result<GeometryReport> {
    let raw: Vec<Vec<f64>> = gradients.iter().map(|g| g.0.clone()).collect();
    let weights = grid.weights(Axis::Omega);
    let mixing = uniform_mixing_matrix(raw.len(), seed);
    let recombined = recombine_with(&raw, &mixing)?;
    Ok(GeometryReport {
        before: gradient_geometry(&raw, weights)?,
        after: gradient_geometry(&recombined, weights)?,
        mixing,
        recombined,
    })
}

// ---------------------------------------------------------------------------
// CSV helpers

/// Writes experiments with columns
/// `pair_id, t0, mu0, omega0, eps1, eps2, eps3, tR, eps4, datum`.
pub fn write_data_csv(path: &Path, pairs: &[SourceTestPair]) -> Result<()> {
    let rows: Vec<Vec<String>> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let s = &p.source;
            let mut row = vec![i.to_string()];
            row.extend(
                [
                    s.t0,
                    s.mu0,
                    s.omega0,
                    s.widths[0],
                    s.widths[1],
                    s.widths[2],
                    p.window.center,
                    p.window.width,
                ]
                .iter()
                .map(f64::to_string),
            );
            row.push(opt(p.datum));
            row
        })
        .collect();
    write_csv(
        path,
        &strings(&[
            "pair_id", "t0", "mu0", "omega0", "eps1", "eps2", "eps3", "tR", "eps4", "datum",
        ]),
        &rows,
    )
}

/// Reads a file written by [`write_data_csv`].
pub fn read_data_csv(path: &Path) -> Result<Vec<SourceTestPair>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let bad = |msg: String| Error::Config(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut pairs = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != 10 {
            return Err(bad(format!(
                "row {} has {} fields, expected 10",
                line + 1,
                record.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            record[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("row {} column {}: {e}", line + 1, i + 1)))
        };
        let datum = if record[9].trim().is_empty() {
            None
        } else {
            Some(num(9)?)
        };
        let source = BoundarySource::new(num(1)?, num(2)?, num(3)?, [num(4)?, num(5)?, num(6)?])?;
        pairs.push(SourceTestPair {
            source,
            window: TestWindow {
                center: num(7)?,
                width: num(8)?,
            },
            datum,
        });
    }
    Ok(pairs)
}

/// MacroTrace with columns `t, x, q, T, dT_dx, kappa, kappa_defined`;
/// `kappa` is empty where it is undefined.
pub fn write_macro_trace(path: &Path, trace: &MacroTrace) -> Result<()> {
    let nx = trace.nx();
    let mut rows = Vec::with_capacity(trace.nt() * nx);
    for (n, t) in trace.t.iter().enumerate() {
        for (j, x) in trace.x.iter().enumerate() {
            let i = n * nx + j;
            rows.push(vec![
                t.to_string(),
                x.to_string(),
                trace.q[i].to_string(),
                trace.temperature[i].to_string(),
                trace.dt_dx[i].to_string(),
                opt(trace.kappa[i]),
                trace.kappa[i].is_some().to_string(),
            ]);
        }
    }
    write_csv(
        path,
        &strings(&["t", "x", "q", "T", "dT_dx", "kappa", "kappa_defined"]),
        &rows,
    )
}

fn write_gradients(path: &Path, grid: &PhaseGrid, gradients: &[GradientVector]) -> Result<()> {
    let mut rows = Vec::new();
    for (i, g) in gradients.iter().enumerate() {
        for (w, v) in grid.omega.iter().zip(g.values()) {
            rows.push(vec![i.to_string(), w.to_string(), v.to_string()]);
        }
    }
    write_csv(path, &strings(&["pair_id", "omega", "gradient"]), &rows)
}

fn write_geometry(out: &Path, prefix: &str, geo: &GradientGeometry) -> Result<()> {
    write_matrix(
        &out.join(format!("{prefix}cosines.csv")),
        "pair_id",
        &geo.cosines,
    )?;
    let ratios = geo.norm_ratios();
    let rows: Vec<Vec<String>> = geo
        .norms
        .iter()
        .zip(&ratios)
        .enumerate()
        .map(|(i, (n, r))| vec![i.to_string(), n.to_string(), r.to_string()])
        .collect();
    write_csv(
        &out.join(format!("{prefix}norms.csv")),
        &strings(&["pair_id", "norm", "norm_ratio"]),
        &rows,
    )
}

fn write_matrix(path: &Path, index: &str, m: &[Vec<f64>]) -> Result<()> {
    let cols = m.first().map_or(0, Vec::len);
    let mut header = vec![index.to_string()];
    header.extend((0..cols).map(|j| format!("c{j}")));
    let rows: Vec<Vec<String>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![i.to_string()];
            row.extend(r.iter().map(f64::to_string));
            row
        })
        .collect();
    write_csv(path, &header, &rows)
}

fn write_summary(path: &Path, entries: &[(String, f64)]) -> Result<()> {
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|(k, v)| vec![k.clone(), v.to_string()])
        .collect();
    write_csv(path, &strings(&["key", "value"]), &rows)
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `<h>_mu (x, omega)` rows of one snapshot.
fn mu_average_rows(grid: &PhaseGrid, field: &[f64], t: f64) -> Vec<Vec<String>> {
    let (nm, nw) = (grid.n_mu(), grid.n_omega());
    let wmu = grid.weights(Axis::Mu);
    let measure = grid.measure(Axis::Mu);
    let mut rows = Vec::with_capacity(grid.nx() * nw);
    for j in 0..grid.nx() {
        let s = &field[j * nm * nw..(j + 1) * nm * nw];
        for k in 0..nw {
            let avg: f64 = (0..nm).map(|m| wmu[m] * s[m * nw + k]).sum::<f64>() / measure;
            rows.push(nums(&[t, grid.x[j], grid.omega[k], avg]));
        }
    }
    rows
}

fn step_of(grid: &PhaseGrid, t: f64) -> usize {
    ((t / grid.dt).round() as usize).min(grid.nt() - 1)
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

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn nums(items: &[f64]) -> Vec<String> {
    items.iter().map(f64::to_string).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
