//! Bundled figure datasets at their reference parameters.

use std::io::Write;
use std::path::{Path, PathBuf};

use levqsim_core::constants::{Material, CONSTANTS};
use levqsim_core::eigensolver::{self, SolverParams, SphereSystem};
use levqsim_core::laplace;
use levqsim_core::maglev::{self, FieldGrid, GridRequest, LoopSpec};
use levqsim_core::qubit::linspace;
use levqsim_core::ringfield::{RingElectrode, DEFAULT_A_R};
use levqsim_core::vertical::{self, Eps1Model, VerticalPotential, ZGrid};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{CommandKind, CoupleConfig, FiguresConfig, LaplaceConfig, Profile, RunConfig, SolverConfig, SweepBlock, TrapConfig};
use crate::error::CliError;
use crate::output::{pretty, write_atomic, Emitter, TOOL_VERSION};
use crate::run;

pub const MANIFEST_SCHEMA: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

const RR: f64 = 1.5e-6;
const RS: f64 = 0.5e-6;
const B0_QUBIT: f64 = -20e-3;

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct FigureEntry {
    pub figure: String,
    pub description: String,
    pub files: Vec<String>,
    /// `ok` or `failed`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub profile: Profile,
    pub figures: Vec<FigureEntry>,
}

struct Plan {
    profile: Profile,
}

impl Plan {
    fn quick(&self) -> bool {
        self.profile == Profile::Quick
    }

    fn solver(&self) -> SolverParams {
        if self.quick() {
            SolverParams {
                nmax: 300,
                dtheta: 6.2e-3,
                ..SolverParams::default()
            }
        } else {
            SolverParams::default()
        }
    }

    fn trap(&self) -> TrapConfig {
        let mut t = TrapConfig::default();
        if self.quick() {
            t.dx_meters = 0.5e-6;
            t.phi_panels = 240;
        }
        t
    }

    fn system(&self, vr: f64, h: f64) -> Result<SphereSystem, CliError> {
        let el = RingElectrode::new(RR, h, vr, DEFAULT_A_R)?;
        Ok(SphereSystem::new(&el, RS, B0_QUBIT, self.solver().dtheta)?)
    }
}

fn table1(em: &mut Emitter) -> Result<(), CliError> {
    let rows = Material::builtin()
        .into_iter()
        .map(|m| Ok((maglev::critical_gradient_t2_per_cm(&m)?, m)))
        .collect::<Result<Vec<_>, CliError>>()?;
    em.table("table1_critical_gradient", |o| {
        writeln!(o, "material,rho_kg_per_m3,chi,critical_gradient_T2_per_cm")?;
        for (g, m) in &rows {
            writeln!(o, "{},{:e},{:e},{:e}", m.name, m.rho, m.chi, g)?;
        }
        Ok(())
    })?;
    Ok(())
}

fn fig3b(plan: &Plan, em: &mut Emitter) -> Result<(), CliError> {
    let (field, map, summary) = run::trap_analysis(&plan.trap())?;
    em.table("fig3b_energy_map", |o| maglev::write_csv(&field, &map, o))?;
    em.record("fig3b_trap_report", &summary)?;
    Ok(())
}

/// Field of `spec` per ampere; the map for any current is a rescaling.
fn unit_field(spec: &LoopSpec, grid: &GridRequest) -> Result<FieldGrid, CliError> {
    let unit = LoopSpec {
        current: 1.0,
        ..spec.clone()
    };
    Ok(maglev::loop_field(&unit, grid)?)
}

#[derive(Debug, Clone, Copy)]
struct ScanRow {
    current: f64,
    b0: f64,
    stable: bool,
    z_l: Option<f64>,
    v_trap: Option<f64>,
}

fn scan(unit: &FieldGrid, material: &Material, currents: &[f64], b0s: &[f64]) -> Vec<ScanRow> {
    let pairs: Vec<(f64, f64)> = currents
        .iter()
        .flat_map(|&i| b0s.iter().map(move |&b| (i, b)))
        .collect();
    pairs
        .par_iter()
        .map(|&(i, b0)| {
            let r = maglev::find_trap(&maglev::energy_density(&unit.scaled(i), b0, material));
            ScanRow {
                current: i,
                b0,
                stable: r.stable,
                z_l: r.z_l,
                v_trap: r.v_trap,
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), |x| format!("{x:e}"))
}

fn fig4a(plan: &Plan, em: &mut Emitter) -> Result<(), CliError> {
    let t = plan.trap();
    let mat = Material::solid_neon();
    let unit = unit_field(&t.loop_spec(), &t.grid())?;
    let currents = linspace(5.0, 10.0, if plan.quick() { 6 } else { 21 });
    let b0s = [-26e-3, -40e-3, -60e-3, -80e-3];
    let rows = scan(&unit, &mat, &currents, &b0s);
    em.table("fig4a_levitation_height", |o| {
        writeln!(o, "I_A,B0_T,stable,z_L_m")?;
        for r in &rows {
            writeln!(o, "{:e},{:e},{},{}", r.current, r.b0, r.stable as u8, opt(r.z_l))?;
        }
        Ok(())
    })?;
    Ok(())
}

/// Second loop of the trap-volume comparison: twice the size, with the
/// current scaled by 2^1.5 so B·∇B at matching points is unchanged.
const LOOP_SCALE: f64 = 2.0;

fn fig4b(plan: &Plan, em: &mut Emitter) -> Result<(), CliError> {
    let t = plan.trap();
    let mat = Material::solid_neon();
    let (ni, nb) = if plan.quick() { (3, 3) } else { (11, 10) };
    let b0s = linspace(-100e-3, -10e-3, nb);
    let mut rows = Vec::new();
    for (label, s) in [("small", 1.0), ("large", LOOP_SCALE)] {
        let spec = LoopSpec {
            r0: t.r0_meters * s,
            w: t.w_meters * s,
            delta: t.delta_meters * s,
            ..t.loop_spec()
        };
        let grid = GridRequest {
            dx: t.dx_meters * s,
            x_extent: t.x_extent_meters * s,
            z_min: t.z_min_meters * s,
            z_max: t.z_max_meters * s,
            phi_panels: t.phi_panels,
        };
        let unit = unit_field(&spec, &grid)?;
        let k = s.powf(1.5);
        let currents = linspace(5.0 * k, 10.0 * k, ni);
        for r in scan(&unit, &mat, &currents, &b0s) {
            rows.push((label, spec.r0, spec.w, r));
        }
    }
    em.table("fig4b_trap_volume", |o| {
        writeln!(o, "loop,R0_m,W_m,I_A,B0_T,stable,z_L_m,V_trap_um3")?;
        for (label, r0, w, r) in &rows {
            writeln!(
                o,
                "{label},{r0:e},{w:e},{:e},{:e},{},{},{}",
                r.current,
                r.b0,
                r.stable as u8,
                opt(r.z_l),
                opt(r.v_trap.map(|v| v * 1e18))
            )?;
        }
        Ok(())
    })?;
    Ok(())
}

fn fig6b(plan: &Plan, em: &mut Emitter) -> Result<(), CliError> {
    let fields = linspace(0.2e6, 0.8e6, if plan.quick() { 7 } else { 61 });
    let base = VerticalPotential::neon(0.0);
    let rows = vertical::wkb_sweep(&base, &fields, &Eps1Model::default(), &ZGrid::default())?;
    em.table("fig6b_wkb_lifetime", |o| vertical::write_csv(&rows, o))?;
    Ok(())
}

fn vr_list(plan: &Plan) -> Vec<f64> {
    linspace(0.05, 0.25, if plan.quick() { 3 } else { 5 })
}

fn fig8a(plan: &Plan, em: &mut Emitter) -> Result<(), CliError> {
    let params = plan.solver();
    let rows = vr_list(plan)
        .into_iter()
        .map(|vr| {
            let sys = plan.system(vr, 0.85e-6)?;
            let sp = eigensolver::spectrum(&sys, &[0], &[0], &params)?;
            Ok((vr, sys.grid.theta.clone(), sp.state(0, 0)?.psi.clone()))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    em.table("fig8a_ground_state", |o| {
        writeln!(o, "Vr_V,theta_rad,psi00")?;
        for (vr, theta, psi) in &rows {
            for (t, p) in theta.iter().zip(psi) {
                writeln!(o, "{vr:e},{t:e},{p:e}")?;
            }
        }
        Ok(())
    })?;
    Ok(())
}

fn fig8b(plan: &Plan, em: &mut Emitter) -> Result<(), CliError> {
    let params = plan.solver();
    let m_list = [0, 1, -1, 2];
    let rows = vr_list(plan)
        .into_iter()
        .map(|vr| {
            let sys = plan.system(vr, 0.85e-6)?;
            Ok((vr, eigensolver::spectrum(&sys, &[0, 1], &m_list, &params)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    em.table("fig8b_level_spacings", |o| {
        writeln!(o, "Vr_V,n,m,dE_over_h_GHz,converged")?;
        for (vr, sp) in &rows {
            let e00 = sp.energy(0, 0).expect("requested level");
            for l in sp.levels() {
                writeln!(
                    o,
                    "{vr:e},{},{},{:e},{}",
                    l.n,
                    l.m,
                    (l.energy - e00) / CONSTANTS.h * 1e-9,
                    l.converged as u8
                )?;
            }
        }
        Ok(())
    })?;
    Ok(())
}

fn fig9(plan: &Plan, em: &mut Emitter) -> Result<(), CliError> {
    let params = plan.solver();
    let rows = [1.0e-6, 0.72e-6, 0.6e-6]
        .into_iter()
        .map(|h| {
            let sys = plan.system(0.15, h)?;
            let sp = eigensolver::spectrum(&sys, &[0], &[0], &params)?;
            Ok((h, sys.grid.theta.clone(), sys.lateral.u.clone(), sp.state(0, 0)?.psi.clone()))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    em.table("fig9_potential_density", |o| {
        writeln!(o, "H_m,theta_rad,U_eV,rho")?;
        for (h, theta, u, psi) in &rows {
            for ((t, u), p) in theta.iter().zip(u).zip(psi) {
                writeln!(o, "{h:e},{t:e},{:e},{:e}", u / CONSTANTS.e, p * p)?;
            }
        }
        Ok(())
    })?;
    Ok(())
}

fn sweep_block(plan: &Plan) -> SweepBlock {
    let (nv, nh) = if plan.quick() { (5, 11) } else { (20, 20) };
    SweepBlock {
        vr_points: nv,
        h_points: nh,
        solver: SolverConfig::from(plan.solver()),
        ..SweepBlock::default()
    }
}

fn fig10(plan: &Plan, em: &mut Emitter) -> Result<(), CliError> {
    let block = sweep_block(plan);
    let map = run::sweep_with_checkpoint(&block, &em.dir)?;
    em.table("fig10_sweep", |o| levqsim_core::qubit::write_csv(&map, o))?;
    em.record("fig10_summary", &run::sweep_summary(&map, &block))?;
    Ok(())
}

fn laplace_block(plan: &Plan) -> LaplaceConfig {
    let mut l = LaplaceConfig::default();
    if plan.quick() {
        l.h_meters = 0.2e-6;
        l.tol_volts = 1e-8;
    }
    l
}

fn fig11(plan: &Plan, em: &mut Emitter) -> Result<(), CliError> {
    let cfg = CoupleConfig {
        vr_volts: linspace(0.05, 0.25, if plan.quick() { 3 } else { 9 }),
        solver: SolverConfig::from(plan.solver()),
        laplace: laplace_block(plan),
        ..CoupleConfig::default()
    };
    let (_, ev) = run::field_per_volt(&cfg.laplace)?;
    let rows = run::coupling_rows(&cfg, ev)?;
    em.table("fig11_coupling", |o| levqsim_core::coupling::write_csv(&rows, o))?;
    Ok(())
}

fn fig13b(plan: &Plan, em: &mut Emitter) -> Result<(), CliError> {
    let cfg = laplace_block(plan);
    let (sol, ev) = run::field_per_volt(&cfg)?;
    em.table("fig13b_pin_field", |o| laplace::write_csv(&sol, o))?;
    em.record("fig13b_summary", &run::laplace_summary(&sol, ev, cfg.probe_depth_meters))?;
    Ok(())
}

type FigureFn = fn(&Plan, &mut Emitter) -> Result<(), CliError>;

fn catalogue() -> Vec<(&'static str, &'static str, FigureFn)> {
    vec![
        ("table1", "critical field gradient per material", |_, em| table1(em)),
        ("fig3b", "energy density map and trap report", fig3b),
        ("fig4a", "levitation height versus loop current", fig4a),
        ("fig4b", "trap volume over current and bias field, two loop sizes", fig4b),
        ("fig6b", "tunnelling lifetime versus extraction field", fig6b),
        ("fig8a", "ground-state wavefunction versus ring bias", fig8a),
        ("fig8b", "level spacings versus ring bias", fig8b),
        ("fig9", "lateral potential and ground-state density for three ring heights", fig9),
        ("fig10", "transition frequency and anharmonicity over (Vr, H)", fig10),
        ("fig11", "coupling strength versus ring bias", fig11),
        ("fig13b", "differential-mode field of the resonator pins", fig13b),
    ]
}

/// Writes every figure dataset under `out_dir` plus a manifest. A failing
/// figure is recorded in the manifest and reported after the rest finish.
pub fn reproduce_figures(base: &RunConfig, profile: Profile, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let config = RunConfig {
        command: Some(CommandKind::Figures),
        output: base.output.clone(),
        figures: Some(FiguresConfig { profile }),
        ..RunConfig::default()
    };
    let plan = Plan { profile };
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for (id, description, f) in catalogue() {
        let mut em = Emitter::new(out_dir, &config);
        let result = f(&plan, &mut em);
        let files = em
            .written
            .iter()
            .map(|p| p.file_name().expect("artifact file").to_string_lossy().into_owned())
            .collect();
        written.append(&mut em.written);
        entries.push(FigureEntry {
            figure: id.into(),
            description: description.into(),
            files,
            status: if result.is_ok() { "ok" } else { "failed" }.into(),
            error: result.err().map(|e| e.to_json()),
        });
    }
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA,
        tool_version: TOOL_VERSION.into(),
        profile,
        figures: entries,
    };
    let path = out_dir.join(MANIFEST_NAME);
    write_atomic(&path, pretty(&serde_json::to_value(&manifest).expect("manifest")).as_bytes())?;
    written.push(path);
    let failed: Vec<&str> = manifest
        .figures
        .iter()
        .filter(|f| f.status != "ok")
        .map(|f| f.figure.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(CliError::numerical(format!("figures failed: {}", failed.join(", "))));
    }
    Ok(written)
}
