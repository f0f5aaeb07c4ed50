//! Experiment grids, the built-in presets and the grid runner.

use std::collections::HashSet;

use serde::Serialize;

use super::collapse::{run_collapse_cell, CellResult};
use crate::error::{Error, Result};
use crate::model::NoiseKind;

pub const DEFAULT_REPS: usize = 400;
/// Largest particle count `n` a cell may use unless overridden.
pub const DEFAULT_BUDGET: usize = 5_000_000;
/// Replicates for the `(400, 3.2M)` cells of the Cauchy presets at desk scale.
pub const DESK_REPS_LARGEST: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct GridCell {
    pub d: usize,
    pub n: usize,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentGrid {
    pub label: String,
    pub noise_kind: NoiseKind,
    pub cells: Vec<GridCell>,
    pub master_seed: u64,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut seen = HashSet::new();
        for (i, c) in self.cells.iter().enumerate() {
            if c.d == 0 {
                problems.push(format!("cells[{i}].d must be at least 1"));
            }
            if c.n == 0 {
                problems.push(format!("cells[{i}].n must be at least 1"));
            }
            if c.reps == 0 {
                problems.push(format!("cells[{i}].reps must be at least 1"));
            }
            if !seen.insert((c.d, c.n)) {
                problems.push(format!("cells[{i}] repeats (d={}, n={})", c.d, c.n));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        for c in &mut self.cells {
            c.reps = reps;
        }
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }
}

pub const FIG1_D: [usize; 3] = [10, 50, 100];
pub const FIG1_N: [usize; 3] = [316, 17_676, 100_000];
pub const FIG2_D: [usize; 3] = [10, 50, 400];
pub const FIG2_N: [usize; 3] = [316, 17_676, 3_200_000];
pub const DEFAULT_SEED: u64 = 20_080_101;

fn cross(ds: &[usize], ns: &[usize], reps: usize) -> Vec<GridCell> {
    ns.iter()
        .flat_map(|&n| ds.iter().map(move |&d| GridCell { d, n, reps }))
        .collect()
}

/// Gaussian grid `{10, 50, 100} × {316, 17676, 100000}`.
pub fn fig1() -> ExperimentGrid {
    ExperimentGrid {
        label: "fig1".into(),
        noise_kind: NoiseKind::GaussianIid,
        cells: cross(&FIG1_D, &FIG1_N, DEFAULT_REPS),
        master_seed: DEFAULT_SEED,
    }
}

/// Cauchy grid `{10, 50, 400} × {316, 17676, 3200000}`. With `full == false`
/// the `(400, 3200000)` cell runs [`DESK_REPS_LARGEST`] replicates.
pub fn fig2(kind: NoiseKind, full: bool) -> Result<ExperimentGrid> {
    let label = match kind {
        NoiseKind::CauchyIid => "fig2-iid",
        NoiseKind::CauchyMultivariate => "fig2-mv",
        NoiseKind::GaussianIid => return Err(Error::arg("fig2 presets use a Cauchy kernel")),
    };
    let mut cells = cross(&FIG2_D, &FIG2_N, DEFAULT_REPS);
    if !full {
        for c in &mut cells {
            if c.d == 400 && c.n == 3_200_000 {
                c.reps = DESK_REPS_LARGEST;
            }
        }
    }
    Ok(ExperimentGrid {
        label: label.into(),
        noise_kind: kind,
        cells,
        master_seed: DEFAULT_SEED,
    })
}

pub fn preset(name: &str, full: bool) -> Result<ExperimentGrid> {
    match name {
        "fig1" => Ok(fig1()),
        "fig2-iid" => fig2(NoiseKind::CauchyIid, full),
        "fig2-mv" => fig2(NoiseKind::CauchyMultivariate, full),
        other => Err(Error::arg(format!(
            "unknown preset '{other}' (expected fig1, fig2-iid or fig2-mv)"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedCell {
    pub d: usize,
    pub n: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridOutcome {
    pub results: Vec<CellResult>,
    pub skipped: Vec<SkippedCell>,
}

/// Runs every cell whose `n` fits within `budget`; the rest are listed as skipped.
pub fn run_grid(grid: &ExperimentGrid, budget: usize) -> Result<GridOutcome> {
    grid.validate()?;
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for c in &grid.cells {
        if c.n > budget {
            log::warn!(
                "skipping d={} n={}: exceeds budget of {budget} particles",
                c.d,
                c.n
            );
            skipped.push(SkippedCell {
                d: c.d,
                n: c.n,
                reason: format!("n = {} exceeds particle budget {budget}", c.n),
            });
            continue;
        }
        log::info!(
            "{} {}: d={} n={} reps={}",
            grid.label,
            grid.noise_kind.tag(),
            c.d,
            c.n,
            c.reps
        );
        results.push(run_collapse_cell(
            &grid.label,
            grid.noise_kind,
            c.d,
            c.n,
            c.reps,
            grid.master_seed,
        )?);
    }
    Ok(GridOutcome { results, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_is_the_listed_cross_product() {
        let g = fig1();
        assert_eq!(g.cells.len(), 9);
        for d in FIG1_D {
            for n in FIG1_N {
                assert!(g.cells.contains(&GridCell { d, n, reps: 400 }));
            }
        }
        assert_eq!(g.noise_kind, NoiseKind::GaussianIid);
        g.validate().unwrap();
    }

    #[test]
    fn fig2_desk_scale_only_shrinks_largest_cell() {
        let g = fig2(NoiseKind::CauchyIid, false).unwrap();
        for c in &g.cells {
            let expect = if (c.d, c.n) == (400, 3_200_000) {
                100
            } else {
                400
            };
            assert_eq!(c.reps, expect);
        }
        assert!(fig2(NoiseKind::CauchyMultivariate, true)
            .unwrap()
            .cells
            .iter()
            .all(|c| c.reps == 400));
        assert!(fig2(NoiseKind::GaussianIid, true).is_err());
        assert!(preset("fig3", false).is_err());
    }

    #[test]
    fn validation_collects_every_problem() {
        let g = ExperimentGrid {
            label: "x".into(),
            noise_kind: NoiseKind::GaussianIid,
            cells: vec![
                GridCell {
                    d: 0,
                    n: 5,
                    reps: 1,
                },
                GridCell {
                    d: 2,
                    n: 0,
                    reps: 0,
                },
                GridCell {
                    d: 2,
                    n: 0,
                    reps: 1,
                },
            ],
            master_seed: 1,
        };
        match g.validate() {
            Err(Error::Config(v)) => assert_eq!(v.len(), 5, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_grid_gives_no_results() {
        let g = ExperimentGrid {
            label: "e".into(),
            noise_kind: NoiseKind::GaussianIid,
            cells: vec![],
            master_seed: 1,
        };
        let o = run_grid(&g, DEFAULT_BUDGET).unwrap();
        assert!(o.results.is_empty() && o.skipped.is_empty());
    }

    #[test]
    fn budget_skips_are_reported() {
        let g = ExperimentGrid {
            label: "b".into(),
            noise_kind: NoiseKind::GaussianIid,
            cells: vec![
                GridCell {
                    d: 2,
                    n: 10,
                    reps: 3,
                },
                GridCell {
                    d: 2,
                    n: 1000,
                    reps: 3,
                },
            ],
            master_seed: 1,
        };
        let o = run_grid(&g, 100).unwrap();
        assert_eq!(o.results.len(), 1);
        assert_eq!(o.skipped.len(), 1);
        assert_eq!((o.skipped[0].d, o.skipped[0].n), (2, 1000));
    }

    #[test]
    fn cell_results_do_not_depend_on_grid_position() {
        let a = GridCell {
            d: 3,
            n: 20,
            reps: 4,
        };
        let b = GridCell {
            d: 5,
            n: 30,
            reps: 4,
        };
        let mk = |cells| ExperimentGrid {
            label: "p".into(),
            noise_kind: NoiseKind::CauchyIid,
            cells,
            master_seed: 8,
        };
        let o1 = run_grid(&mk(vec![a, b]), 100).unwrap();
        let o2 = run_grid(&mk(vec![b, a]), 100).unwrap();
        assert_eq!(o1.results[0], o2.results[1]);
    }
}
