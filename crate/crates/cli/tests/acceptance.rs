//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so the verdict lines always reach the
//! console; the process exits non-zero if any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use levqsim_cli::config::{LaplaceConfig, SolverConfig, SweepBlock};
use levqsim_cli::run::{dipole_at, field_per_volt, laplace_summary};
use levqsim_cli::Profile;
use levqsim_core::constants::{Material, CONSTANTS};
use levqsim_core::coupling::{coupling_g, dipole_matrix_element, exchange_j, GConvention, ResonatorSpec};
use levqsim_core::eigensolver::{spectrum, SolverParams, SphereSystem};
use levqsim_core::laplace::{observed_order, solve_differential_mode, PinGeometry};
use levqsim_core::maglev::{self, GridRequest, LoopSpec};
use levqsim_core::qubit::{self, linspace};
use levqsim_core::ringfield::{RingElectrode, DEFAULT_A_R};
use levqsim_core::special::ThetaGrid;
use levqsim_core::vertical::{ground_state_1d, wkb_sweep, Eps1Model, VerticalPotential, ZGrid};

type Verdict = Result<(bool, String), String>;

struct Report {
    failures: Vec<usize>,
}

impl Report {
    fn check(&mut self, n: usize, title: &str, budget: Duration, f: impl FnOnce() -> Verdict) {
        let t0 = Instant::now();
        let out = f();
        let dt = t0.elapsed();
        let (ok, detail) = match out {
            Ok((ok, d)) => (ok, d),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = dt <= budget;
        let pass = ok && in_time;
        println!(
            "criterion {n:>2} {} {title}: {detail} [{:.3} s of {:.3} s{}]",
            if pass { "PASS" } else { "FAIL" },
            dt.as_secs_f64(),
            budget.as_secs_f64(),
            if in_time { "" } else { ", over budget" }
        );
        if !pass {
            self.failures.push(n);
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn table1() -> Verdict {
    let t0 = Instant::now();
    let g: Vec<f64> = Material::builtin()
        .iter()
        .map(|m| maglev::critical_gradient_t2_per_cm(m))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let dt = t0.elapsed();
    // rounded to three significant figures, as tabulated
    let want = ["13.6", "20.7", "28.4"];
    let got: Vec<String> = g.iter().map(|v| format!("{v:.1}")).collect();
    let ok = got.iter().zip(want).all(|(a, b)| a == b) && dt < Duration::from_millis(1);
    Ok((
        ok,
        format!(
            "{:.3} / {:.3} / {:.3} T²/cm round to {} (want {}) in {:?}",
            g[0],
            g[1],
            g[2],
            got.join(" / "),
            want.join(" / "),
            dt
        ),
    ))
}

fn biot_savart() -> Verdict {
    let (r, i) = (10e-6, 1.0);
    let spec = LoopSpec {
        r0: r - 0.5e-12,
        w: 1e-12,
        current: i,
        n_loops: 1,
        delta: 1e-6,
    };
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let z = -50e-6 + k as f64 * 2.1e-6;
        let (bx, bz) = maglev::point_field(&spec, 0.0, z, 720);
        let exact = CONSTANTS.mu0 * i * r * r / (2.0 * (r * r + z * z).powf(1.5));
        worst = worst.max(rel(bz, exact)).max(bx.abs() / exact);
    }
    Ok((worst < 1e-3, format!("max relative error {worst:.2e} over 50 axial points")))
}

fn trap() -> Verdict {
    let spec = LoopSpec::default();
    let grid = GridRequest::default();
    let neon = Material::solid_neon();
    let field = maglev::loop_field(&spec, &grid).map_err(|e| e.to_string())?;
    let r = maglev::find_trap(&maglev::energy_density(&field, -26e-3, &neon));
    let fig3 = r.stable && r.z_l.is_some_and(|z| z > 0.0);
    let unit = field.scaled(1.0 / spec.current);
    let mut best = (0.0, 0.0, 0.0);
    for &i in &linspace(5.0, 10.0, 11) {
        for &b0 in &linspace(-100e-3, -10e-3, 10) {
            let t = maglev::find_trap(&maglev::energy_density(&unit.scaled(i), b0, &neon));
            if let Some(v) = t.v_trap.filter(|_| t.stable) {
                if v > best.0 {
                    best = (v, i, b0);
                }
            }
        }
    }
    let v_um3 = best.0 * 1e18;
    Ok((
        fig3 && v_um3 >= 100.0,
        format!(
            "stable={} z_L={:.2} μm; max V_trap {:.0} μm³ at I={} A, B0={:.0} mT",
            r.stable,
            r.z_l.unwrap_or(f64::NAN) * 1e6,
            v_um3,
            best.1,
            best.2 * 1e3
        ),
    ))
}

fn hydrogenic() -> Verdict {
    let lambda = 0.1087;
    let p = VerticalPotential::new(lambda, 1e-16, 0.0).map_err(|e| e.to_string())?;
    let a = lambda * CONSTANTS.e * CONSTANTS.e / (16.0 * std::f64::consts::PI * CONSTANTS.eps0);
    let (m, hb) = (CONSTANTS.m_e, CONSTANTS.hbar);
    let e_exact = -m * a * a / (2.0 * hb * hb) / CONSTANTS.e;
    let z_exact = 3.0 * hb * hb / (2.0 * m * a);
    let s = ground_state_1d(&p, &ZGrid::default()).map_err(|e| e.to_string())?;
    let (de, dz) = (rel(s.energy, e_exact), rel(s.mean_height, z_exact));
    Ok((
        de < 0.01 && dz < 0.01 && rel(e_exact, -10.05e-3) < 0.01 && rel(z_exact, 2.92e-9) < 0.01,
        format!(
            "E={:.3} meV (exact {:.3}), <z>={:.3} nm (exact {:.3})",
            s.energy * 1e3,
            e_exact * 1e3,
            s.mean_height * 1e9,
            z_exact * 1e9
        ),
    ))
}

fn wkb() -> Verdict {
    let fields = linspace(0.2e6, 0.8e6, 61);
    let rows = wkb_sweep(&VerticalPotential::neon(0.0), &fields, &Eps1Model::default(), &ZGrid::default())
        .map_err(|e| e.to_string())?;
    let tau: Vec<f64> = rows.iter().map(|r| r.result.tau).collect();
    let monotone = tau.windows(2).all(|w| w[1] < w[0]);
    let last_slow = rows.iter().rev().find(|r| r.result.tau > 1.0).map(|r| r.e_field);
    let first_fast = rows.iter().find(|r| r.result.tau < 1e-3).map(|r| r.e_field);
    let crosses = tau[0] > 1.0 && *tau.last().unwrap() < 1e-3;
    Ok((
        monotone && crosses,
        format!(
            "monotone={monotone}, τ > 1 s up to {:.2} V/μm, < 1 ms from {:.2} V/μm",
            last_slow.unwrap_or(f64::NAN) * 1e-6,
            first_fast.unwrap_or(f64::NAN) * 1e-6
        ),
    ))
}

fn free_rotor() -> Verdict {
    let sys = SphereSystem::free(0.5e-6, 0.0, 3.1e-3).map_err(|e| e.to_string())?;
    let params = SolverParams::default();
    let sp = spectrum(&sys, &[0, 1, 2, 3, 4, 5], &[0, 1], &params).map_err(|e| e.to_string())?;
    let e0 = sys.e0_scale();
    let mut worst: f64 = 0.0;
    for l in 1..=5usize {
        let want = e0 * (l * (l + 1)) as f64;
        worst = worst.max(rel(sp.energy(l, 0).map_err(|e| e.to_string())?, want));
        worst = worst.max(rel(sp.energy(l - 1, 1).map_err(|e| e.to_string())?, want));
    }
    let ground = sp.energy(0, 0).map_err(|e| e.to_string())?.abs() / e0;
    Ok((
        worst < 1e-3 && ground < 1e-3 && sp.all_converged(),
        format!("max relative error {worst:.2e} for l = 1..5 (m = 0, 1); |E00|/E0 = {ground:.1e}"),
    ))
}

fn zeeman() -> Verdict {
    let b0 = -20e-3;
    let el = RingElectrode::new(1.5e-6, 0.85e-6, 0.15, DEFAULT_A_R).map_err(|e| e.to_string())?;
    let sys = SphereSystem::new(&el, 0.5e-6, b0, 3.1e-3).map_err(|e| e.to_string())?;
    let sp = spectrum(&sys, &[0], &[1, -1], &SolverParams::default()).map_err(|e| e.to_string())?;
    let split = sp.energy(0, 1).map_err(|e| e.to_string())? - sp.energy(0, -1).map_err(|e| e.to_string())?;
    let mu_b = CONSTANTS.e * CONSTANTS.hbar / (2.0 * CONSTANTS.m_e);
    let want = 2.0 * mu_b * b0.abs();
    Ok((
        rel(split.abs(), want) < 1e-3 && rel(want / CONSTANTS.h, 0.5598e9) < 1e-3,
        format!(
            "|E01 − E0−1|/h = {:.5} GHz, 2μB|B0|/h = {:.5} GHz (m = {} lies lower)",
            split.abs() / CONSTANTS.h * 1e-9,
            want / CONSTANTS.h * 1e-9,
            if split < 0.0 { "+1" } else { "−1" }
        ),
    ))
}

fn pendulum() -> Verdict {
    let (rs, e_r) = (0.5e-6, 1e5);
    let grid = ThetaGrid::with_spacing(3.1e-3).map_err(|e| e.to_string())?;
    let u = grid.theta.iter().map(|t| CONSTANTS.e * e_r * rs * (1.0 - t.cos())).collect();
    let sys = SphereSystem::with_potential(rs, 0.0, grid, u, 0.0, e_r).map_err(|e| e.to_string())?;
    let params = SolverParams {
        nmax: 300,
        ..SolverParams::default()
    };
    let sp = spectrum(&sys, &[0, 1], &[0, 1, 2, 3], &params).map_err(|e| e.to_string())?;
    let w0 = (CONSTANTS.e * e_r / (CONSTANTS.m_e * rs)).sqrt();
    let quantum = CONSTANTS.hbar * w0;
    // ħω0(2n + |m| + 1): the m ladder at n = 0 and the n step at m = 0
    let e = |n, m| sp.energy(n, m).map_err(|e| e.to_string());
    let spacings = [
        e(0, 1)? - e(0, 0)?,
        e(0, 2)? - e(0, 1)?,
        e(0, 3)? - e(0, 2)?,
        (e(1, 0)? - e(0, 0)?) / 2.0,
        (e(1, 1)? - e(0, 1)?) / 2.0,
    ];
    let worst = spacings.iter().map(|s| rel(*s, quantum)).fold(0.0, f64::max);
    let d = dipole_matrix_element(&sys, sp.state(0, 0).unwrap(), sp.state(0, 1).unwrap()).map_err(|e| e.to_string())?;
    let d_oracle = CONSTANTS.e * (CONSTANTS.hbar / (2.0 * CONSTANTS.m_e * w0)).sqrt();
    let dd = rel(d, d_oracle);
    Ok((
        worst < 0.05 && dd < 0.05,
        format!("max spacing error {:.2}%, dipole error {:.2}%", worst * 100.0, dd * 100.0),
    ))
}

/// Shared by criteria 9 and 10: the qubit map at the reference configuration
/// on a reduced Vr axis.
fn sweep_block() -> SweepBlock {
    SweepBlock {
        vr_points: 5,
        h_points: 11,
        solver: SolverConfig::default(),
        ..SweepBlock::default()
    }
}

fn anharmonicity(map: &qubit::SweepMap) -> Verdict {
    let alpha = map.alpha_hz();
    let positive = alpha.iter().flatten().all(|&a| a > 0.0);
    let converged = map.cells.iter().filter(|c| c.converged).count();
    let nh = map.h_axis.len();
    let mut peaks = Vec::new();
    let mut interior = true;
    for iv in 0..map.vr_axis.len() {
        let row: Vec<f64> = (0..nh).map(|ih| alpha[iv * nh + ih].unwrap_or(f64::NEG_INFINITY)).collect();
        let ih = (0..nh).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        interior &= ih > 0 && ih + 1 < nh;
        peaks.push(map.h_axis[ih]);
    }
    let near = peaks.iter().all(|h| (h - 0.7e-6).abs() <= 0.1e-6 + 1e-12);
    let max = alpha.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((
        positive && interior && near && max > 0.4e9 && converged > 0,
        format!(
            "α > 0 on all {converged} converged cells: {positive}; peak H per Vr = {:?} μm; max α/h = {:.3} GHz",
            peaks.iter().map(|h| (h * 1e8).round() / 100.0).collect::<Vec<_>>(),
            max * 1e-9
        ),
    ))
}

fn coupling(map: &qubit::SweepMap, block: &SweepBlock) -> Verdict {
    let lap = LaplaceConfig::default();
    let (_, ev) = field_per_volt(&lap).map_err(|e| e.to_string())?;
    let a = ResonatorSpec::new(5e9, 100.0, ev).map_err(|e| e.to_string())?;
    let b = ResonatorSpec { z_diff: 2500.0, ..a };
    let d = 1e-26;
    let ratio = coupling_g(d, &b, GConvention::AsPrinted) / coupling_g(d, &a, GConvention::AsPrinted);
    let lin = [0.5, 2.0, 7.3]
        .iter()
        .map(|&k| {
            let gk = coupling_g(d, &ResonatorSpec { ev: k * ev, ..a }, GConvention::AsPrinted);
            rel(gk, k * coupling_g(d, &a, GConvention::AsPrinted))
        })
        .fold(0.0, f64::max);
    let region = qubit::operating_region(map, block.f01_min_hertz, block.f01_max_hertz, block.alpha_min_hertz);
    let params = block.solver.params();
    let mut g_min = f64::INFINITY;
    let mut count = 0;
    for (cell, _) in map.cells.iter().zip(&region).filter(|(_, &r)| r) {
        let (d, _) = dipole_at(block.rr_meters, block.rs_meters, block.b0_tesla, block.a_r_meters, cell.vr, cell.h, &params)
            .map_err(|e| e.to_string())?;
        g_min = g_min.min(coupling_g(d, &a, GConvention::AsPrinted));
        count += 1;
    }
    Ok((
        (ratio - 5.0).abs() < 1e-12 && lin < 4.0 * f64::EPSILON && count > 0 && g_min >= 1e6,
        format!(
            "g(2.5 kΩ)/g(100 Ω) = {ratio:.15}; linearity defect {lin:.1e}; 𝓔_V = {:.3} V/μm per V; min g/2π = {:.2} MHz over {count} operating cells",
            ev * 1e-6,
            g_min * 1e-6
        ),
    ))
}

fn exchange() -> Verdict {
    let t0 = Instant::now();
    let a = exchange_j(30e6, 30e6, 150e6).map_err(|e| e.to_string())?.j;
    let b = exchange_j(10e6, 10e6, 50e6).map_err(|e| e.to_string())?.j;
    let dt = t0.elapsed();
    Ok((
        rel(a, 6e6) <= f64::EPSILON && rel(b, 2e6) <= f64::EPSILON && dt < Duration::from_millis(1),
        format!("J/2π = {} MHz and {} MHz in {dt:?}", a * 1e-6, b * 1e-6),
    ))
}

fn laplace_properties() -> Verdict {
    let cfg = LaplaceConfig::default();
    let tol = cfg.tol_volts;
    let (sol, ev) = field_per_volt(&cfg).map_err(|e| e.to_string())?;
    let s = laplace_summary(&sol, ev, cfg.probe_depth_meters);
    let probe = 0.4e-6;
    let e: Vec<f64> = [200e-9, 100e-9, 50e-9]
        .iter()
        .map(|&h| {
            let g = PinGeometry {
                h,
                ..PinGeometry::default()
            };
            solve_differential_mode(&g, 1e-11)
                .and_then(|s| levqsim_core::laplace::field_per_volt(&s, probe))
                .map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    let p = observed_order(e[0], e[1], e[2]);
    Ok((
        s.midplane_max_volts < 10.0 * tol && s.antisymmetry_defect_volts < 10.0 * tol && (p - 2.0).abs() <= 0.2,
        format!(
            "midplane {:.1e} V, antisymmetry {:.1e} V (limit {:.0e}); observed order {p:.3}",
            s.midplane_max_volts,
            s.antisymmetry_defect_volts,
            10.0 * tol
        ),
    ))
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn determinism() -> Verdict {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = levqsim_cli::RunConfig::default();
    for d in [&a, &b] {
        levqsim_cli::figures::reproduce_figures(&base, Profile::Quick, d.path()).map_err(|e| e.to_string())?;
    }
    let (fa, fb) = (files(a.path()), files(b.path()));
    let manifest: levqsim_cli::figures::Manifest =
        serde_json::from_slice(&std::fs::read(a.path().join("manifest.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let datasets = manifest.figures.iter().filter(|f| f.status == "ok").count();
    let bytes: usize = fa.iter().map(|f| f.1.len()).sum();
    Ok((
        fa == fb && datasets >= 7,
        format!(
            "{} files ({bytes} bytes) identical across two runs: {}; {datasets} figure datasets",
            fa.len(),
            fa == fb
        ),
    ))
}

fn main() {
    // `cargo test -- --list` and filters come through here too
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut r = Report { failures: Vec::new() };
    let s = Duration::from_secs;
    r.check(1, "critical gradients", s(1), table1);
    r.check(2, "Biot–Savart on-axis oracle", s(1), biot_savart);
    r.check(3, "trap existence and volume", s(300), trap);
    r.check(4, "hydrogenic vertical state", s(10), hydrogenic);
    r.check(5, "WKB lifetime threshold", s(30), wkb);
    r.check(6, "free-rotor spectrum", s(120), free_rotor);
    r.check(7, "Zeeman splitting", s(300), zeeman);
    r.check(8, "pendulum limit", s(300), pendulum);

    let block = sweep_block();
    let mut map = None;
    r.check(9, "anharmonicity map", s(7200), || {
        let m = qubit::sweep(&block.sweep_config()).map_err(|e| e.to_string())?;
        let v = anharmonicity(&m);
        map = Some(m);
        v
    });
    r.check(10, "coupling scalings", s(600), || match &map {
        Some(m) => coupling(m, &block),
        None => Err("needs the criterion 9 sweep".into()),
    });
    r.check(11, "exchange coupling", s(1), exchange);
    r.check(12, "Laplace properties", s(120), laplace_properties);
    r.check(13, "figure determinism", s(900), determinism);

    if r.failures.is_empty() {
        println!("acceptance: all 13 criteria passed");
    } else {
        println!("acceptance: failed criteria {:?}", r.failures);
        std::process::exit(1);
    }
}
