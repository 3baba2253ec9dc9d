//! Command pipelines. Each one reads its block of the resolved config and
//! writes its artifacts through an [`Emitter`].

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use levqsim_core::constants::Material;
use levqsim_core::coupling::{self, CouplingReport, Exchange, ResonatorSpec};
use levqsim_core::eigensolver::{self, SolverParams, SphereSystem};
use levqsim_core::laplace::{self, LaplaceSolution};
use levqsim_core::maglev::{self, EnergyMap, TrapReport};
use levqsim_core::qubit::{self, metrics_from_spectrum, QubitMetrics, SweepCell, SweepMap};
use levqsim_core::ringfield::{self, RingElectrode};
use levqsim_core::special::ThetaGrid;
use levqsim_core::vertical::{self, VerticalPotential};
use serde::Serialize;

use crate::config::{CommandKind, CoupleConfig, LaplaceConfig, RunConfig, SweepBlock, TrapConfig};
use crate::error::{io_err, CliError};
use crate::output::Emitter;

/// Runs the command recorded in a resolved config and returns the paths it
/// wrote.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let command = config
        .command
        .ok_or_else(|| CliError::validation("no command selected"))?;
    let mut em = Emitter::new(out_dir, config);
    match command {
        CommandKind::Trap => trap(config.trap.as_ref().expect("resolved"), &mut em)?,
        CommandKind::Wkb => wkb(config, &mut em)?,
        CommandKind::Ring => ring(config, &mut em)?,
        CommandKind::Eigen => eigen(config, &mut em)?,
        CommandKind::Sweep => sweep(config.sweep.as_ref().expect("resolved"), &mut em)?,
        CommandKind::Couple => couple(config.couple.as_ref().expect("resolved"), &mut em)?,
        CommandKind::Laplace => laplace_cmd(config.laplace.as_ref().expect("resolved"), &mut em)?,
        CommandKind::Figures => {
            let profile = config.figures.as_ref().map(|f| f.profile).unwrap_or_default();
            return crate::figures::reproduce_figures(config, profile, out_dir);
        }
    }
    Ok(em.written)
}

fn material(name: &str) -> Result<Material, CliError> {
    Material::by_name(name).ok_or_else(|| CliError::validation(format!("unknown material `{name}`")))
}

#[derive(Debug, Clone, Serialize)]
pub struct TrapSummary {
    pub material: Material,
    pub critical_gradient_t2_per_cm: f64,
    pub report: TrapReport,
    /// RMS thermal displacement (x, z) in metres; absent for unstable traps
    /// or when the particle does not fit.
    pub thermal_rms_m: Option<(f64, f64)>,
}

/// Field map, energy map and trap analysis for one loop configuration.
pub fn trap_analysis(cfg: &TrapConfig) -> Result<(maglev::FieldGrid, EnergyMap, TrapSummary), CliError> {
    let mat = material(&cfg.material)?;
    let field = maglev::loop_field(&cfg.loop_spec(), &cfg.grid())?;
    let map = maglev::energy_density(&field, cfg.b0_tesla, &mat);
    let report = maglev::find_trap(&map);
    let thermal = maglev::thermal_amplitude(&report, &map, cfg.particle_radius_meters, cfg.temperature_kelvin).ok();
    let summary = TrapSummary {
        critical_gradient_t2_per_cm: maglev::critical_gradient_t2_per_cm(&mat)?,
        material: mat,
        report,
        thermal_rms_m: thermal,
    };
    Ok((field, map, summary))
}

fn trap(cfg: &TrapConfig, em: &mut Emitter) -> Result<(), CliError> {
    let (field, map, summary) = trap_analysis(cfg)?;
    em.table("trap_map", |o| maglev::write_csv(&field, &map, o))?;
    em.record("trap_report", &summary)?;
    Ok(())
}

fn wkb(config: &RunConfig, em: &mut Emitter) -> Result<(), CliError> {
    let cfg = config.wkb.as_ref().expect("resolved");
    let er = cfg.epsilon_r;
    let base = VerticalPotential::new((er - 1.0) / (er + 1.0), cfg.truncation_meters, 0.0)?;
    if cfg.er_points == 0 {
        return Err(CliError::validation("Er_points must be ≥ 1"));
    }
    let rows = vertical::wkb_sweep(&base, &cfg.fields(), &cfg.eps1_model, &cfg.grid())?;
    em.table("wkb", |o| vertical::write_csv(&rows, o))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct RingSummary {
    electrode: RingElectrode,
    pole_potential_ev: f64,
    pole_field_volts_per_meter: f64,
}

fn ring(config: &RunConfig, em: &mut Emitter) -> Result<(), CliError> {
    let cfg = config.ring.as_ref().expect("resolved");
    let el = RingElectrode::new(cfg.rr_meters, cfg.h_meters, cfg.vr_volts, cfg.a_r_meters)?;
    let grid = ThetaGrid::with_spacing(cfg.dtheta_radians)?;
    let lat = ringfield::lateral_potential(&el, cfg.rs_meters, &grid)?;
    em.table("ring", |o| ringfield::write_csv(&lat, o))?;
    em.record(
        "ring_summary",
        &RingSummary {
            pole_potential_ev: ringfield::pole_potential(&el, cfg.rs_meters)? / levqsim_core::constants::CONSTANTS.e,
            pole_field_volts_per_meter: ringfield::pole_field(&el, cfg.rs_meters)?,
            electrode: el,
        },
    )?;
    Ok(())
}

fn eigen(config: &RunConfig, em: &mut Emitter) -> Result<(), CliError> {
    let cfg = config.eigen.as_ref().expect("resolved");
    let params = cfg.solver.params();
    let el = RingElectrode::new(cfg.rr_meters, cfg.h_meters, cfg.vr_volts, cfg.a_r_meters)?;
    let sys = SphereSystem::new(&el, cfg.rs_meters, cfg.b0_tesla, params.dtheta)?;
    let sp = eigensolver::spectrum(&sys, &cfg.n_list, &cfg.m_list, &params)?;
    em.table("spectrum", |o| eigensolver::write_spectrum_csv(&sp, o))?;
    em.table("states", |o| eigensolver::write_states_csv(&sp.states, &sys.grid.theta, o))?;
    if let Ok(m) = metrics_from_spectrum(&sp) {
        em.record("qubit_metrics", &m)?;
    }
    if !sp.all_converged() {
        return Err(CliError::numerical(
            "imaginary-time refinement did not converge for every level (see the converged column)",
        ));
    }
    Ok(())
}

pub fn checkpoint_path(dir: &Path, cfg: &SweepBlock) -> PathBuf {
    use std::hash::Hasher;
    let mut h = fnv::FnvHasher::default();
    h.write(toml::to_string(cfg).expect("sweep block serialises").as_bytes());
    dir.join(format!("sweep-{:016x}.jsonl", h.finish()))
}

fn read_checkpoint(path: &Path) -> Result<Vec<SweepCell>, CliError> {
    let Ok(f) = std::fs::File::open(path) else {
        return Ok(Vec::new());
    };
    let mut cells = Vec::new();
    for line in std::io::BufReader::new(f).lines() {
        let line = line.map_err(io_err(path))?;
        // a torn final line from an interrupted run is simply recomputed
        if let Ok(c) = serde_json::from_str::<SweepCell>(&line) {
            cells.push(c);
        }
    }
    Ok(cells)
}

/// Runs a sweep, resuming from and appending to a per-config checkpoint in
/// `dir`. The checkpoint is removed once the map is complete.
pub fn sweep_with_checkpoint(cfg: &SweepBlock, dir: &Path) -> Result<SweepMap, CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = checkpoint_path(dir, cfg);
    let previous = read_checkpoint(&path)?;
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(io_err(&path))?;
    let sink = Mutex::new(std::io::BufWriter::new(file));
    let failed = Mutex::new(None);
    let map = qubit::sweep_resume(&cfg.sweep_config(), &previous, |c| {
        let line = serde_json::to_string(c).expect("cell serialises");
        let mut w = sink.lock().expect("checkpoint lock");
        if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
            failed.lock().expect("error lock").get_or_insert(e);
        }
    })?;
    if let Some(e) = failed.into_inner().expect("error lock") {
        return Err(CliError::io(&path, e));
    }
    drop(sink);
    std::fs::remove_file(&path).map_err(io_err(&path))?;
    Ok(map)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub cells: usize,
    pub converged: usize,
    pub failed: usize,
    pub max_alpha_hz: Option<f64>,
    pub region_cells: usize,
    /// Operating-region mask, same order as the table rows.
    pub region: Vec<bool>,
}

pub fn sweep_summary(map: &SweepMap, cfg: &SweepBlock) -> SweepSummary {
    let region = qubit::operating_region(map, cfg.f01_min_hertz, cfg.f01_max_hertz, cfg.alpha_min_hertz);
    SweepSummary {
        cells: map.cells.len(),
        converged: map.cells.iter().filter(|c| c.converged).count(),
        failed: map.cells.iter().filter(|c| c.error.is_some()).count(),
        max_alpha_hz: map.alpha_hz().into_iter().flatten().reduce(f64::max),
        region_cells: region.iter().filter(|&&r| r).count(),
        region,
    }
}

fn sweep(cfg: &SweepBlock, em: &mut Emitter) -> Result<(), CliError> {
    let map = sweep_with_checkpoint(cfg, &em.dir)?;
    em.table("sweep", |o| qubit::write_csv(&map, o))?;
    em.record("sweep_summary", &sweep_summary(&map, cfg))?;
    Ok(())
}

/// Dipole element and qubit metrics at one (Vr, H) point.
pub fn dipole_at(
    rr: f64,
    rs: f64,
    b0: f64,
    a_r: f64,
    vr: f64,
    h: f64,
    params: &SolverParams,
) -> Result<(f64, QubitMetrics), CliError> {
    let el = RingElectrode::new(rr, h, vr, a_r)?;
    let sys = SphereSystem::new(&el, rs, b0, params.dtheta)?;
    let sp = eigensolver::spectrum(&sys, &[0], &qubit::QUBIT_M_LIST, params)?;
    if !sp.all_converged() {
        return Err(CliError::numerical(format!("levels did not converge at Vr={vr} V, H={h:e} m")));
    }
    let d = coupling::dipole_matrix_element(&sys, sp.state(0, 0)?, sp.state(0, qubit::EXCITED_M)?)?;
    Ok((d, metrics_from_spectrum(&sp)?))
}

/// Field per volt of differential drive for a Laplace block.
pub fn field_per_volt(cfg: &LaplaceConfig) -> Result<(LaplaceSolution, f64), CliError> {
    let sol = laplace::solve_differential_mode(&cfg.geometry(), cfg.tol_volts)?;
    let ev = laplace::field_per_volt(&sol, cfg.probe_depth_meters)?;
    Ok((sol, ev))
}

#[derive(Debug, Clone, Serialize)]
struct CoupleSummary {
    field_per_volt_per_meter: f64,
    v_zpf_volts: Vec<f64>,
    exchange: Option<Exchange>,
}

/// g/2π for every (Vr, H, Z) point of a couple block, rows ordered Vr, H, Z.
pub fn coupling_rows(cfg: &CoupleConfig, ev: f64) -> Result<Vec<CouplingReport>, CliError> {
    use rayon::prelude::*;
    let params = cfg.solver.params();
    let points: Vec<(f64, f64)> = cfg
        .vr_volts
        .iter()
        .flat_map(|&v| cfg.h_meters.iter().map(move |&h| (v, h)))
        .collect();
    let dipoles = points
        .par_iter()
        .map(|&(vr, h)| dipole_at(cfg.rr_meters, cfg.rs_meters, cfg.b0_tesla, cfg.a_r_meters, vr, h, &params))
        .collect::<Result<Vec<_>, _>>()?;
    let specs = cfg
        .zdiff_ohms
        .iter()
        .map(|&z| ResonatorSpec::new(cfg.f_r_hertz, z, ev))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(points.len() * specs.len());
    for (&(vr, h), &(d, _)) in points.iter().zip(&dipoles) {
        for s in &specs {
            rows.push(CouplingReport {
                vr,
                h,
                dipole: d,
                g_over_2pi: coupling::coupling_g(d, s, cfg.convention),
                resonator: *s,
            });
        }
    }
    Ok(rows)
}

fn couple(cfg: &CoupleConfig, em: &mut Emitter) -> Result<(), CliError> {
    let (_, ev) = field_per_volt(&cfg.laplace)?;
    let rows = coupling_rows(cfg, ev)?;
    em.table("couple", |o| coupling::write_csv(&rows, o))?;
    let exchange = cfg
        .exchange
        .map(|x| coupling::exchange_j(x.g1_hertz, x.g2_hertz, x.delta_hertz))
        .transpose()?;
    let v_zpf = cfg
        .zdiff_ohms
        .iter()
        .map(|&z| ResonatorSpec::new(cfg.f_r_hertz, z, ev).map(|s| s.v_zpf()))
        .collect::<Result<Vec<_>, _>>()?;
    em.record(
        "couple_summary",
        &CoupleSummary {
            field_per_volt_per_meter: ev,
            v_zpf_volts: v_zpf,
            exchange,
        },
    )?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct LaplaceSummary {
    pub field_per_volt_per_meter: f64,
    pub probe_depth_meters: f64,
    pub residual_volts: f64,
    pub iterations: usize,
    /// max |V| on the x = 0 column.
    pub midplane_max_volts: f64,
    /// max |V(x) + V(−x)| over the grid.
    pub antisymmetry_defect_volts: f64,
}

pub fn laplace_summary(sol: &LaplaceSolution, ev: f64, probe: f64) -> LaplaceSummary {
    let (nx, nz) = (sol.nx(), sol.nz());
    let c = (nx - 1) / 2;
    let mut mid: f64 = 0.0;
    let mut anti: f64 = 0.0;
    for k in 0..nz {
        mid = mid.max(sol.v[sol.index(c, k)].abs());
        for d in 1..=c {
            anti = anti.max((sol.v[sol.index(c - d, k)] + sol.v[sol.index(c + d, k)]).abs());
        }
    }
    LaplaceSummary {
        field_per_volt_per_meter: ev,
        probe_depth_meters: probe,
        residual_volts: sol.residual,
        iterations: sol.iterations,
        midplane_max_volts: mid,
        antisymmetry_defect_volts: anti,
    }
}

fn laplace_cmd(cfg: &LaplaceConfig, em: &mut Emitter) -> Result<(), CliError> {
    let (sol, ev) = field_per_volt(cfg)?;
    em.table("laplace", |o| laplace::write_csv(&sol, o))?;
    em.record("laplace_summary", &laplace_summary(&sol, ev, cfg.probe_depth_meters))?;
    Ok(())
}
