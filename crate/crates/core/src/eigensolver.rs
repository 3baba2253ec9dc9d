//! Lateral Schrödinger problem on the sphere surface.
//!
//! Trial states come from the cosθ-approximated Hamiltonian in the Y_{l,m}
//! basis. They are then relaxed under the full Hamiltonian (exact U_∥(θ)) by
//! forward-Euler imaginary-time flow on a half-offset θ grid.

use std::hash::Hasher;
use std::io::Write;

use fnv::FnvHasher;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::CONSTANTS;
use crate::error::{Error, Result};
use crate::linalg::{Pentadiagonal, Tridiagonal};
use crate::ringfield::{lateral_potential, pole_field, pole_potential, LateralPotential, RingElectrode};
use crate::special::{cos_coef, sin2_coef, synthesize, ThetaGrid};

/// Electron on a sphere of radius `rs` in a uniform axial field `b0`.
#[derive(Debug, Clone)]
pub struct SphereSystem {
    pub rs: f64,
    /// Signed axial field (T).
    pub b0: f64,
    pub grid: ThetaGrid,
    pub lateral: LateralPotential,
    /// U_∥(0) (J); used by the trial Hamiltonian only.
    pub u_pole: f64,
    /// Radial field at the pole (V/m); used by the trial Hamiltonian only.
    pub pole_field: f64,
    /// Switch for the orbital Zeeman term; off only for diagnostics.
    pub include_zeeman: bool,
}

impl SphereSystem {
    /// Sphere below a biased ring electrode.
    pub fn new(electrode: &RingElectrode, rs: f64, b0: f64, dtheta: f64) -> Result<Self> {
        let grid = ThetaGrid::with_spacing(dtheta)?;
        let lateral = lateral_potential(electrode, rs, &grid)?;
        Ok(Self {
            rs,
            b0,
            lateral,
            grid,
            u_pole: pole_potential(electrode, rs)?,
            pole_field: pole_field(electrode, rs)?,
            include_zeeman: true,
        })
    }

    /// Sphere with no electrostatic potential.
    pub fn free(rs: f64, b0: f64, dtheta: f64) -> Result<Self> {
        let grid = ThetaGrid::with_spacing(dtheta)?;
        let n = grid.len();
        Self::with_potential(rs, b0, grid, vec![0.0; n], 0.0, 0.0)
    }

    /// Sphere with an arbitrary sampled potential `u` (J) on `grid`.
    pub fn with_potential(
        rs: f64,
        b0: f64,
        grid: ThetaGrid,
        u: Vec<f64>,
        u_pole: f64,
        pole_field: f64,
    ) -> Result<Self> {
        if !(rs > 0.0) || !b0.is_finite() {
            return Err(Error::InvalidInput(format!("bad sphere radius {rs:e} or field {b0}")));
        }
        if u.len() != grid.len() || u.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("potential does not match the theta grid".into()));
        }
        let lateral = LateralPotential {
            theta: grid.theta.clone(),
            u,
            rs,
        };
        Ok(Self {
            rs,
            b0,
            grid,
            lateral,
            u_pole,
            pole_field,
            include_zeeman: true,
        })
    }

    /// E0 = ħ²/(2 m_e Rs²) (J).
    pub fn e0_scale(&self) -> f64 {
        CONSTANTS.hbar * CONSTANTS.hbar / (2.0 * CONSTANTS.m_e * self.rs * self.rs)
    }

    /// Orbital Zeeman energy (eB0/2m_e)·mħ (J).
    pub fn zeeman(&self, m: i32) -> f64 {
        if !self.include_zeeman {
            return 0.0;
        }
        CONSTANTS.e * self.b0 / (2.0 * CONSTANTS.m_e) * m as f64 * CONSTANTS.hbar
    }

    /// Prefactor of sin²θ in the diamagnetic term (J).
    pub fn diamagnetic(&self) -> f64 {
        let e = CONSTANTS.e;
        e * e * self.b0 * self.b0 * self.rs * self.rs / (8.0 * CONSTANTS.m_e)
    }

    fn validate(&self) -> Result<()> {
        if self.lateral.rs != self.rs {
            return Err(Error::InvalidInput(format!(
                "lateral potential built for Rs = {:e}, system has {:e}",
                self.lateral.rs, self.rs
            )));
        }
        if self.lateral.u.len() != self.grid.len() {
            return Err(Error::InvalidInput("potential does not match the theta grid".into()));
        }
        Ok(())
    }

    /// Hash of everything that determines the discrete Hamiltonian.
    pub fn fingerprint(&self) -> u64 {
        let mut h = FnvHasher::default();
        h.write_u64(self.rs.to_bits());
        h.write_u64(self.b0.to_bits());
        h.write_u64(self.grid.dtheta.to_bits());
        h.write_u64(self.grid.len() as u64);
        h.write_u8(self.include_zeeman as u8);
        for v in &self.lateral.u {
            h.write_u64(v.to_bits());
        }
        h.finish()
    }
}

/// Solver knobs; defaults reproduce the reference calculation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    pub nmax: usize,
    pub dtheta: f64,
    /// Dimensionless imaginary-time step (units of ħ/E0).
    pub dtau: f64,
    /// Allowed change of E/E0 per `check_every` steps.
    pub energy_tol: f64,
    pub max_iters: usize,
    pub check_every: usize,
    /// Take m < 0 levels from the |m| block plus the exact Zeeman offset.
    pub mirror_negative_m: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            nmax: 800,
            dtheta: 3.1e-3,
            dtau: 1e-6,
            energy_tol: 1e-10,
            max_iters: 5_000_000,
            check_every: 1000,
            mirror_negative_m: true,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dtau > 0.0 && self.dtheta > 0.0 && self.energy_tol > 0.0) {
            return Err(Error::InvalidInput("dtau, dtheta and energy_tol must be positive".into()));
        }
        if self.check_every == 0 || self.max_iters == 0 {
            return Err(Error::InvalidInput("check_every and max_iters must be nonzero".into()));
        }
        Ok(())
    }
}

/// Cosθ-approximated Hamiltonian in the basis Y_{l,m}, l = |m|..=nmax (J).
///
/// Row/column `i` corresponds to l = |m| + i.
pub fn build_simplified_h(system: &SphereSystem, m: i32, nmax: usize) -> Result<Pentadiagonal> {
    let am = m.unsigned_abs() as usize;
    if nmax < am {
        return Err(Error::InvalidInput(format!("Nmax = {nmax} below |m| = {am}")));
    }
    let mi = m as i64;
    let n = nmax - am + 1;
    let e0 = system.e0_scale();
    let dia = system.diamagnetic();
    let lin = CONSTANTS.e * system.pole_field * system.rs;
    let shift = system.zeeman(m) + system.u_pole + lin;
    let mut h = Pentadiagonal::zeros(n);
    for i in 0..n {
        let l = (am + i) as i64;
        let lf = l as f64;
        h.bands[0][i] = e0 * lf * (lf + 1.0) + dia * sin2_coef(l, l, mi) + shift;
        if i + 1 < n {
            h.bands[1][i] = -lin * cos_coef(l, mi);
        }
        if i + 2 < n {
            h.bands[2][i] = dia * sin2_coef(l + 2, l, mi);
        }
    }
    Ok(h)
}

/// Lowest eigenpairs of the simplified Hamiltonian for one m.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialBasis {
    pub m: i32,
    pub nmax: usize,
    /// Coefficient vectors over l = |m|..=nmax.
    pub coefficients: Vec<Vec<f64>>,
    /// Trial energies (J), ascending.
    pub energies: Vec<f64>,
    /// Synthesised states on the system grid, orthonormal in the grid metric.
    pub psi: Vec<Vec<f64>>,
}

pub fn trial_states(system: &SphereSystem, m: i32, count: usize, nmax: usize) -> Result<TrialBasis> {
    system.validate()?;
    let am = m.unsigned_abs() as usize;
    if count == 0 || nmax < am || count > nmax - am + 1 {
        return Err(Error::InvalidInput(format!(
            "cannot take {count} states from a basis l = {am}..={nmax}"
        )));
    }
    let h = build_simplified_h(system, m, nmax)?;
    let (energies, coefficients) = h.lowest(count)?;
    let mut psi: Vec<Vec<f64>> = coefficients
        .iter()
        .map(|c| synthesize(m as i64, c, &system.grid.theta))
        .collect();
    orthonormalize(&mut psi, &system.grid.weights);
    for p in &mut psi {
        fix_sign(p);
    }
    Ok(TrialBasis {
        m,
        nmax,
        coefficients,
        energies,
        psi,
    })
}

/// One refined eigenstate; the azimuthal factor e^{imφ}/√(2π) is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularEigenstate {
    pub n: usize,
    pub m: i32,
    /// Real samples ψ(θ_j) with ∫ψ² sinθ dθ = 1.
    pub psi: Vec<f64>,
    /// ⟨ψ|H|ψ⟩ (J).
    pub energy: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Fingerprint of the system the state was computed for.
    pub fingerprint: u64,
}

fn dot(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), w)| x * y * w).sum()
}

fn normalize(a: &mut [f64], w: &[f64]) {
    let n = dot(a, a, w).sqrt();
    for v in a {
        *v /= n;
    }
}

/// Modified Gram–Schmidt in the weighted inner product, in list order.
fn orthonormalize(states: &mut [Vec<f64>], w: &[f64]) {
    for k in 0..states.len() {
        let (lower, rest) = states.split_at_mut(k);
        let cur = &mut rest[0];
        for q in lower.iter() {
            let p = dot(q, cur, w);
            for (c, qv) in cur.iter_mut().zip(q) {
                *c -= p * qv;
            }
        }
        normalize(cur, w);
    }
}

fn fix_sign(psi: &mut [f64]) {
    let peak = psi.iter().copied().fold(0.0_f64, |a, v| if v.abs() > a.abs() { v } else { a });
    if peak < 0.0 {
        for v in psi {
            *v = -*v;
        }
    }
}

/// Three-point flux-form operator H/E0 for one m block, shifted by `shift` so
/// it is positive semidefinite. The Zeeman constant is left out.
struct GridOperator {
    lo: Vec<f64>,
    dg: Vec<f64>,
    up: Vec<f64>,
    shift: f64,
}

impl GridOperator {
    fn new(system: &SphereSystem, m: i32) -> Self {
        let grid = &system.grid;
        let n = grid.len();
        let h = grid.dtheta;
        let e0 = system.e0_scale();
        let d = system.diamagnetic() / e0;
        let m2 = (m as f64).powi(2);
        let mut lo = vec![0.0; n];
        let mut up = vec![0.0; n];
        let mut pot = vec![0.0; n];
        for j in 0..n {
            let s = grid.theta[j].sin();
            // face factors sin(θ_j ± Δθ/2); the outermost faces sit on the poles
            let sm = if j == 0 { 0.0 } else { (j as f64 * h).sin() };
            let sp = if j + 1 == n { 0.0 } else { ((j + 1) as f64 * h).sin() };
            lo[j] = -sm / (s * h * h);
            up[j] = -sp / (s * h * h);
            pot[j] = m2 / (s * s) + d * s * s + system.lateral.u[j] / e0;
        }
        let shift = pot.iter().copied().fold(f64::INFINITY, f64::min);
        let dg = (0..n).map(|j| pot[j] - shift - lo[j] - up[j]).collect();
        Self { lo, dg, up, shift }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = x.len();
        if n == 1 {
            y[0] = self.dg[0] * x[0];
            return;
        }
        y[0] = self.dg[0] * x[0] + self.up[0] * x[1];
        for j in 1..n - 1 {
            y[j] = self.lo[j] * x[j - 1] + self.dg[j] * x[j] + self.up[j] * x[j + 1];
        }
        y[n - 1] = self.lo[n - 1] * x[n - 2] + self.dg[n - 1] * x[n - 1];
    }

    /// Gershgorin bound on the largest eigenvalue.
    fn spectral_bound(&self) -> f64 {
        (0..self.dg.len())
            .map(|j| self.dg[j] + self.lo[j].abs() + self.up[j].abs())
            .fold(0.0, f64::max)
    }

    /// Symmetrised form D H D⁻¹ with D = diag(√w), for direct diagonalisation.
    fn symmetric(&self, w: &[f64]) -> Result<Tridiagonal> {
        let n = self.dg.len();
        let off = (0..n.saturating_sub(1))
            .map(|j| self.up[j] * (w[j] / w[j + 1]).sqrt())
            .collect();
        Tridiagonal::new(self.dg.clone(), off)
    }
}

/// Exact lowest eigenvalues (J) of the discrete grid Hamiltonian for one m.
///
/// This is the fixed point the imaginary-time flow converges to.
pub fn discrete_levels(system: &SphereSystem, m: i32, count: usize) -> Result<Vec<f64>> {
    system.validate()?;
    let op = GridOperator::new(system, m);
    let t = op.symmetric(&system.grid.weights)?;
    let e0 = system.e0_scale();
    let zee = system.zeeman(m);
    Ok((0..count)
        .map(|k| t.eigenvalue(k))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .map(|v| e0 * (v + op.shift) + zee)
        .collect())
}

/// Relaxes the trial states of one m block under the full grid Hamiltonian.
///
/// The step is clamped to 1/λ_max of the discrete operator so the energy of
/// the lowest state cannot rise; ten consecutive rises of any state abort with
/// [`Error::Unstable`].
pub fn refine_imaginary_time(
    system: &SphereSystem,
    trial: &TrialBasis,
    params: &SolverParams,
) -> Result<Vec<AngularEigenstate>> {
    params.validate()?;
    system.validate()?;
    let w = &system.grid.weights;
    let n = system.grid.len();
    if trial.psi.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidInput("trial states sampled on a different grid".into()));
    }
    let op = GridOperator::new(system, trial.m);
    let dtau = params.dtau.min(1.0 / op.spectral_bound());
    let count = trial.psi.len();
    let mut psi = trial.psi.clone();
    let mut hpsi = vec![0.0; n];
    let mut energy = vec![f64::INFINITY; count];
    let mut checkpoint = vec![f64::NAN; count];
    let mut rises = vec![0usize; count];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iters {
        iterations += 1;
        for k in 0..count {
            op.apply(&psi[k], &mut hpsi);
            let e = dot(&psi[k], &hpsi, w);
            if e > energy[k] + 1e-12 * energy[k].abs().max(1.0) {
                rises[k] += 1;
                if rises[k] >= 10 {
                    return Err(Error::Unstable(format!(
                        "energy of state n = {k}, m = {} rose for 10 consecutive steps \
                         at step {iterations}; reduce dtau or refine the grid",
                        trial.m
                    )));
                }
            } else {
                rises[k] = 0;
            }
            energy[k] = e;
            for (p, hp) in psi[k].iter_mut().zip(&hpsi) {
                *p -= dtau * hp;
            }
        }
        orthonormalize(&mut psi, w);
        if iterations % params.check_every == 0 {
            let done = energy
                .iter()
                .zip(&checkpoint)
                .all(|(e, c)| (e - c).abs() < params.energy_tol * e.abs().max(1.0));
            checkpoint.copy_from_slice(&energy);
            if done {
                converged = true;
                break;
            }
        }
    }

    let e0 = system.e0_scale();
    let zee = system.zeeman(trial.m);
    let fingerprint = system.fingerprint();
    Ok(psi
        .into_iter()
        .enumerate()
        .map(|(k, mut p)| {
            op.apply(&p, &mut hpsi);
            let e = dot(&p, &hpsi, w);
            fix_sign(&mut p);
            AngularEigenstate {
                n: k,
                m: trial.m,
                psi: p,
                energy: e0 * (e + op.shift) + zee,
                converged,
                iterations,
                fingerprint,
            }
        })
        .collect())
}

/// ⟨ψ|H|ψ⟩ (J) of an arbitrary grid function under the full Hamiltonian.
pub fn grid_energy(system: &SphereSystem, m: i32, psi: &[f64]) -> Result<f64> {
    system.validate()?;
    if psi.len() != system.grid.len() {
        return Err(Error::InvalidInput("state sampled on a different grid".into()));
    }
    let op = GridOperator::new(system, m);
    let w = &system.grid.weights;
    let mut hpsi = vec![0.0; psi.len()];
    op.apply(psi, &mut hpsi);
    let r = dot(psi, &hpsi, w) / dot(psi, psi, w);
    Ok(system.e0_scale() * (r + op.shift) + system.zeeman(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub n: usize,
    pub m: i32,
    /// Energy (J).
    pub energy: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Sorted by (m, n).
    pub states: Vec<AngularEigenstate>,
    pub e0: f64,
    pub fingerprint: u64,
}

impl Spectrum {
    pub fn state(&self, n: usize, m: i32) -> Result<&AngularEigenstate> {
        self.states
            .iter()
            .find(|s| s.n == n && s.m == m)
            .ok_or(Error::MissingLevel { n, m })
    }

    pub fn energy(&self, n: usize, m: i32) -> Result<f64> {
        self.state(n, m).map(|s| s.energy)
    }

    pub fn levels(&self) -> Vec<Level> {
        self.states
            .iter()
            .map(|s| Level {
                n: s.n,
                m: s.m,
                energy: s.energy,
                converged: s.converged,
            })
            .collect()
    }

    pub fn all_converged(&self) -> bool {
        self.states.iter().all(|s| s.converged)
    }
}

/// Solves every requested (n, m) combination. Independent m blocks run in
/// parallel; with `mirror_negative_m` a −m block reuses the +m states.
pub fn spectrum(
    system: &SphereSystem,
    n_list: &[usize],
    m_list: &[i32],
    params: &SolverParams,
) -> Result<Spectrum> {
    params.validate()?;
    if n_list.is_empty() || m_list.is_empty() {
        return Err(Error::InvalidInput("empty level request".into()));
    }
    if system.grid.dtheta != std::f64::consts::PI / system.grid.len() as f64 {
        return Err(Error::InvalidInput("system grid is not a uniform partition of [0, π]".into()));
    }
    let count = n_list.iter().max().map_or(0, |n| n + 1);
    let mut blocks: Vec<i32> = m_list
        .iter()
        .map(|&m| if params.mirror_negative_m { m.abs() } else { m })
        .collect();
    blocks.sort_unstable();
    blocks.dedup();
    let solved = blocks
        .par_iter()
        .map(|&m| {
            let trial = trial_states(system, m, count, params.nmax)?;
            refine_imaginary_time(system, &trial, params)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut states = Vec::new();
    let mut ms: Vec<i32> = m_list.to_vec();
    ms.sort_unstable();
    ms.dedup();
    let mut ns: Vec<usize> = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    for &m in &ms {
        let src = if params.mirror_negative_m { m.abs() } else { m };
        let block = &solved[blocks.binary_search(&src).expect("block solved")];
        for &n in &ns {
            let mut s = block[n].clone();
            if s.m != m {
                s.energy += system.zeeman(m) - system.zeeman(s.m);
                s.m = m;
            }
            states.push(s);
        }
    }
    Ok(Spectrum {
        states,
        e0: system.e0_scale(),
        fingerprint: system.fingerprint(),
    })
}

/// Long-format state table: `n,m,theta_rad,psi_re,psi_im`.
pub fn write_states_csv(
    states: &[AngularEigenstate],
    theta: &[f64],
    out: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(out, "n,m,theta_rad,psi_re,psi_im")?;
    for s in states {
        for (t, p) in theta.iter().zip(&s.psi) {
            writeln!(out, "{},{},{:e},{:e},0", s.n, s.m, t, p)?;
        }
    }
    Ok(())
}

/// `n,m,E_J,E_over_h_GHz,converged`.
pub fn write_spectrum_csv(spectrum: &Spectrum, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "n,m,E_J,E_over_h_GHz,converged")?;
    for s in &spectrum.states {
        writeln!(
            out,
            "{},{},{:e},{:e},{}",
            s.n,
            s.m,
            s.energy,
            s.energy / CONSTANTS.h * 1e-9,
            s.converged as u8
        )?;
    }
    Ok(())
}
