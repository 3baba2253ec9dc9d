//! Qubit figures of merit and (Vr, H) parameter sweeps.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::CONSTANTS;
use crate::eigensolver::{spectrum, Level, SolverParams, SphereSystem, Spectrum};
use crate::error::{Error, Result};
use crate::ringfield::{RingElectrode, DEFAULT_A_R};

/// The excited qubit state |e⟩ is (n, m) = (0, EXCITED_M).
pub const EXCITED_M: i32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitMetrics {
    /// E_{0,1} − E_{0,0} (J).
    pub de01: f64,
    /// E_{0,2} − E_{0,0} (J).
    pub de02: f64,
    /// de02 − 2·de01 (J).
    pub alpha: f64,
    /// E_{0,1} − E_{0,−1} (J).
    pub zeeman_split: f64,
    /// de01/h (Hz).
    pub f01: f64,
    /// Which of m = ±1 lies lower.
    pub lower_m: i32,
}

impl QubitMetrics {
    pub fn alpha_hz(&self) -> f64 {
        self.alpha / CONSTANTS.h
    }
}

fn find(levels: &[Level], n: usize, m: i32) -> Result<f64> {
    levels
        .iter()
        .find(|l| l.n == n && l.m == m)
        .map(|l| l.energy)
        .ok_or(Error::MissingLevel { n, m })
}

/// Metrics from any level list containing (0,0), (0,±1) and (0,2).
pub fn metrics_from_levels(levels: &[Level]) -> Result<QubitMetrics> {
    let e00 = find(levels, 0, 0)?;
    let e01 = find(levels, 0, EXCITED_M)?;
    let e0m = find(levels, 0, -EXCITED_M)?;
    let e02 = find(levels, 0, 2)?;
    let de01 = e01 - e00;
    let de02 = e02 - e00;
    Ok(QubitMetrics {
        de01,
        de02,
        alpha: de02 - 2.0 * de01,
        zeeman_split: e01 - e0m,
        f01: de01 / CONSTANTS.h,
        lower_m: if e01 <= e0m { EXCITED_M } else { -EXCITED_M },
    })
}

pub fn metrics_from_spectrum(spectrum: &Spectrum) -> Result<QubitMetrics> {
    metrics_from_levels(&spectrum.levels())
}

/// Levels needed by [`metrics_from_levels`].
pub const QUBIT_M_LIST: [i32; 4] = [0, EXCITED_M, -EXCITED_M, 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub rr: f64,
    pub rs: f64,
    pub b0: f64,
    pub a_r: f64,
    pub vr_axis: Vec<f64>,
    pub h_axis: Vec<f64>,
    pub solver: SolverParams,
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| (a * (n - 1 - i) as f64 + b * i as f64) / (n - 1) as f64).collect(),
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            rr: 1.5e-6,
            rs: 0.5e-6,
            b0: -20e-3,
            a_r: DEFAULT_A_R,
            vr_axis: linspace(0.05, 0.25, 20),
            h_axis: linspace(0.6e-6, 1.1e-6, 20),
            solver: SolverParams::default(),
        }
    }
}

impl SweepConfig {
    pub fn cell_count(&self) -> usize {
        self.vr_axis.len() * self.h_axis.len()
    }

    /// (Vr, H) of cell `index`; H varies fastest.
    pub fn cell(&self, index: usize) -> (f64, f64) {
        let nh = self.h_axis.len();
        (self.vr_axis[index / nh], self.h_axis[index % nh])
    }

    pub fn system(&self, vr: f64, h: f64) -> Result<SphereSystem> {
        let ring = RingElectrode::new(self.rr, h, vr, self.a_r)?;
        let mut sys = SphereSystem::new(&ring, self.rs, self.b0, self.solver.dtheta)?;
        sys.include_zeeman = true;
        Ok(sys)
    }
}

/// Result for one (Vr, H) point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub vr: f64,
    pub h: f64,
    pub metrics: Option<QubitMetrics>,
    pub converged: bool,
    pub error: Option<String>,
}

impl SweepCell {
    /// Metrics of a converged cell.
    pub fn usable(&self) -> Option<&QubitMetrics> {
        self.metrics.as_ref().filter(|_| self.converged)
    }
}

/// Solves one cell, turning failures into a masked cell.
pub fn solve_cell(config: &SweepConfig, index: usize) -> SweepCell {
    let (vr, h) = config.cell(index);
    let run = || -> Result<(QubitMetrics, bool)> {
        let sys = config.system(vr, h)?;
        let sp = spectrum(&sys, &[0], &QUBIT_M_LIST, &config.solver)?;
        Ok((metrics_from_spectrum(&sp)?, sp.all_converged()))
    };
    match run() {
        Ok((m, converged)) => SweepCell {
            index,
            vr,
            h,
            metrics: Some(m),
            converged,
            error: None,
        },
        Err(e) => SweepCell {
            index,
            vr,
            h,
            metrics: None,
            converged: false,
            error: Some(e.to_string()),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMap {
    pub vr_axis: Vec<f64>,
    pub h_axis: Vec<f64>,
    /// Row-major in Vr, H varying fastest.
    pub cells: Vec<SweepCell>,
    /// Optional coupling g/2π per cell (Hz).
    pub g: Option<Vec<Option<f64>>>,
}

impl SweepMap {
    pub fn at(&self, i_vr: usize, i_h: usize) -> &SweepCell {
        &self.cells[i_vr * self.h_axis.len() + i_h]
    }

    fn grid_of(&self, f: impl Fn(&QubitMetrics) -> f64) -> Vec<Option<f64>> {
        self.cells.iter().map(|c| c.usable().map(&f)).collect()
    }

    /// f01 per cell (Hz); `None` where masked.
    pub fn f01(&self) -> Vec<Option<f64>> {
        self.grid_of(|m| m.f01)
    }

    /// α/h per cell (Hz); `None` where masked.
    pub fn alpha_hz(&self) -> Vec<Option<f64>> {
        self.grid_of(|m| m.alpha_hz())
    }
}

/// Runs every cell not already present in `previous` (indexed by cell), in
/// parallel. `on_cell` sees each freshly solved cell; rows in the returned map
/// are ordered by index regardless of completion order.
pub fn sweep_resume(
    config: &SweepConfig,
    previous: &[SweepCell],
    on_cell: impl Fn(&SweepCell) + Sync,
) -> Result<SweepMap> {
    config.solver.validate()?;
    if config.vr_axis.is_empty() || config.h_axis.is_empty() {
        return Err(Error::InvalidInput("empty sweep axis".into()));
    }
    let n = config.cell_count();
    let mut known: Vec<Option<SweepCell>> = vec![None; n];
    for c in previous {
        if c.index >= n {
            return Err(Error::InvalidInput(format!("checkpoint cell {} outside the sweep", c.index)));
        }
        let (vr, h) = config.cell(c.index);
        if c.vr != vr || c.h != h {
            return Err(Error::InvalidInput(format!(
                "checkpoint cell {} does not match the sweep axes",
                c.index
            )));
        }
        known[c.index] = Some(c.clone());
    }
    let cells = known
        .into_par_iter()
        .enumerate()
        .map(|(i, k)| {
            k.unwrap_or_else(|| {
                let c = solve_cell(config, i);
                on_cell(&c);
                c
            })
        })
        .collect();
    Ok(SweepMap {
        vr_axis: config.vr_axis.clone(),
        h_axis: config.h_axis.clone(),
        cells,
        g: None,
    })
}

pub fn sweep(config: &SweepConfig) -> Result<SweepMap> {
    sweep_resume(config, &[], |_| {})
}

/// Cells with f01 inside `[f_lo, f_hi]` and α/h ≥ `alpha_min` (all Hz).
pub fn operating_region(map: &SweepMap, f_lo: f64, f_hi: f64, alpha_min: f64) -> Vec<bool> {
    map.cells
        .iter()
        .map(|c| {
            c.usable()
                .is_some_and(|m| m.f01 >= f_lo && m.f01 <= f_hi && m.alpha_hz() >= alpha_min)
        })
        .collect()
}

fn opt(v: Option<f64>, scale: f64) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{:e}", x * scale))
}

/// `Vr_V,H_m,f01_GHz,alpha_GHz,converged[,g_MHz]`.
pub fn write_csv(map: &SweepMap, out: &mut impl Write) -> std::io::Result<()> {
    let with_g = map.g.is_some();
    write!(out, "Vr_V,H_m,f01_GHz,alpha_GHz,converged")?;
    writeln!(out, "{}", if with_g { ",g_MHz" } else { "" })?;
    for (i, c) in map.cells.iter().enumerate() {
        let m = c.metrics.as_ref();
        write!(
            out,
            "{:e},{:e},{},{},{}",
            c.vr,
            c.h,
            opt(m.map(|m| m.f01), 1e-9),
            opt(m.map(|m| m.alpha_hz()), 1e-9),
            c.converged as u8
        )?;
        if let Some(g) = &map.g {
            write!(out, ",{}", opt(g[i], 1e-6))?;
        }
        writeln!(out)?;
    }
    Ok(())
}
