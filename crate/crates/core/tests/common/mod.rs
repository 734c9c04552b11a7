#![allow(dead_code)]

use phonon::config::{ExperimentConfig, Setup};
use phonon::grid::GridConfig;
use phonon::inverse::{generate_data, SourceTestPair};

/// Paper-resolution grid with the ground-truth and initial materials.
pub fn paper_setup() -> Setup {
    ExperimentConfig::default().setup().unwrap()
}

/// The same problem on a custom grid.
pub fn setup_with(grid: GridConfig) -> Setup {
    ExperimentConfig {
        grid,
        ..Default::default()
    }
    .setup()
    .unwrap()
}

/// The ten reconstruction experiments with data from the ground truth.
pub fn paper_pairs(setup: &Setup) -> Vec<SourceTestPair> {
    let cfg = ExperimentConfig::default();
    let pairs = cfg.pairs(setup).unwrap();
    generate_data(&setup.truth, &setup.grid, &pairs).unwrap()
}
