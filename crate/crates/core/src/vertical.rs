//! Surface-normal electron physics: truncated image potential, bound ground
//! state, and the WKB lifetime against field extraction.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::constants::CONSTANTS;
use crate::error::{Error, Result};
use crate::linalg::Tridiagonal;
use crate::numerics::{find_root, integrate};

/// Relative permittivity of solid neon.
pub const NEON_EPSILON_R: f64 = 1.244;
/// Truncation height of the image term (m).
pub const NEON_TRUNCATION: f64 = 2.3e-10;

/// U⊥(z) = −Λe²/(16πε0·max(z, b)) − eFz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerticalPotential {
    /// (ε − ε0)/(ε + ε0).
    pub lambda: f64,
    /// Truncation height (m).
    pub b: f64,
    /// Extraction field (V/m).
    pub e_field: f64,
}

impl VerticalPotential {
    pub fn new(lambda: f64, b: f64, e_field: f64) -> Result<Self> {
        let p = Self { lambda, b, e_field };
        p.validate()?;
        Ok(p)
    }

    /// Solid-neon surface with the given extraction field.
    pub fn neon(e_field: f64) -> Self {
        Self {
            lambda: (NEON_EPSILON_R - 1.0) / (NEON_EPSILON_R + 1.0),
            b: NEON_TRUNCATION,
            e_field,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidInput(format!("Λ = {} not in (0, 1)", self.lambda)));
        }
        if !(self.b > 0.0) || !(self.e_field >= 0.0) || !self.e_field.is_finite() {
            return Err(Error::InvalidInput("need b > 0 and a finite field ≥ 0".into()));
        }
        Ok(())
    }

    pub fn with_field(&self, e_field: f64) -> Self {
        Self { e_field, ..*self }
    }

    /// Image-charge strength A = Λe²/(16πε0) (J·m).
    pub fn image_strength(&self) -> f64 {
        self.lambda * CONSTANTS.e * CONSTANTS.e / (16.0 * PI * CONSTANTS.eps0)
    }

    /// Potential energy in joules (z > 0 assumed).
    #[inline]
    pub fn energy_j(&self, z: f64) -> f64 {
        -self.image_strength() / z.max(self.b) - CONSTANTS.e * self.e_field * z
    }

    /// Barrier-top position and height (J), if the tilted potential has one
    /// outside the plateau.
    pub fn barrier_top(&self) -> Option<(f64, f64)> {
        if self.e_field <= 0.0 {
            return None;
        }
        let zb = (self.image_strength() / (CONSTANTS.e * self.e_field)).sqrt();
        if zb <= self.b {
            return None;
        }
        Some((zb, self.energy_j(zb)))
    }
}

/// Truncated-image-plus-tilt potential in eV.
pub fn u_perp(potential: &VerticalPotential, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("height z = {z:e} must be positive")));
    }
    Ok(potential.energy_j(z) / CONSTANTS.e)
}

/// Uniform finite-difference grid on (0, z_max) with hard walls at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZGrid {
    pub z_max: f64,
    pub dz: f64,
}

impl Default for ZGrid {
    fn default() -> Self {
        Self {
            z_max: 50e-9,
            dz: 0.01e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundState1D {
    /// Ground-state energy of the field-free potential (eV).
    pub energy: f64,
    /// ⟨z⟩ (m).
    pub mean_height: f64,
    pub z: Vec<f64>,
    /// Samples normalised so Σψ²·dz = 1.
    pub psi: Vec<f64>,
    /// Energy plus the first-order Stark shift −eF⟨z⟩ for the potential's
    /// field (eV).
    pub eps1: f64,
}

impl BoundState1D {
    /// Stark-shifted level for another extraction field (eV).
    pub fn eps1_at(&self, e_field: f64) -> f64 {
        self.energy - e_field * self.mean_height
    }
}

fn lowest_state(potential: &VerticalPotential, z_max: f64, dz: f64) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if !(dz > 0.0 && z_max > 2.0 * dz) {
        return Err(Error::InvalidInput("z grid needs 0 < dz < z_max/2".into()));
    }
    let n = (z_max / dz).round() as usize - 1;
    let z: Vec<f64> = (1..=n).map(|i| i as f64 * dz).collect();
    let t = CONSTANTS.hbar * CONSTANTS.hbar / (2.0 * CONSTANTS.m_e * dz * dz);
    let diag: Vec<f64> = z.iter().map(|&zz| 2.0 * t + potential.energy_j(zz)).collect();
    let off = vec![-t; n - 1];
    let tri = Tridiagonal::new(diag, off)?;
    let (vals, vecs) = tri.lowest(1)?;
    let mut psi = vecs.into_iter().next().expect("one eigenvector");
    let norm = (psi.iter().map(|p| p * p).sum::<f64>() * dz).sqrt();
    let sign = if psi.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for p in &mut psi {
        *p *= sign / norm;
    }
    Ok((vals[0], z, psi))
}

/// Lowest bound state of the field-free truncated potential.
///
/// Any extraction field in `potential` enters only through `eps1`.
pub fn ground_state_1d(potential: &VerticalPotential, grid: &ZGrid) -> Result<BoundState1D> {
    potential.validate()?;
    let free = potential.with_field(0.0);
    let (e, z, psi) = lowest_state(&free, grid.z_max, grid.dz)?;
    if e >= 0.0 {
        return Err(Error::NoBoundState(format!(
            "lowest level {:e} eV is not below the vacuum level",
            e / CONSTANTS.e
        )));
    }
    let mean = z.iter().zip(&psi).map(|(zz, p)| zz * p * p).sum::<f64>() * grid.dz;
    let energy = e / CONSTANTS.e;
    Ok(BoundState1D {
        energy,
        mean_height: mean,
        z,
        psi,
        eps1: energy - potential.e_field * mean,
    })
}

/// How the bound level entering the lifetime formula is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Eps1Model {
    /// Quoted reference level and mean height, with the first-order Stark
    /// shift applied.
    Reference { energy_ev: f64, mean_height_m: f64 },
    /// Computed ground state of the truncated potential plus first-order
    /// Stark shift.
    FirstOrderStark,
    /// Lowest level of the tilted potential, walled off at the barrier top.
    Tilted,
}

impl Default for Eps1Model {
    fn default() -> Self {
        Self::Reference {
            energy_ev: -15.8e-3,
            mean_height_m: 1e-9,
        }
    }
}

/// Evaluates ε1 (eV) for `potential` under `model`.
pub fn eps1(potential: &VerticalPotential, model: &Eps1Model, grid: &ZGrid) -> Result<f64> {
    match *model {
        Eps1Model::Reference {
            energy_ev,
            mean_height_m,
        } => Ok(energy_ev - potential.e_field * mean_height_m),
        Eps1Model::FirstOrderStark => Ok(ground_state_1d(potential, grid)?.eps1),
        Eps1Model::Tilted => {
            let wall = potential
                .barrier_top()
                .map_or(grid.z_max, |(zb, _)| zb.min(grid.z_max));
            let (e, _, _) = lowest_state(potential, wall, grid.dz)?;
            Ok(e / CONSTANTS.e)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WkbResult {
    /// Inner turning point (m).
    pub z1: f64,
    /// Outer turning point (m).
    pub z2: f64,
    /// (2/ħ)∫√(2mₑ(U − ε1)) dz.
    pub action: f64,
    /// Classical period in the bound region (s).
    pub t_el: f64,
    /// Lifetime (s).
    pub tau: f64,
    /// False when ε1 is at or above the barrier top.
    pub has_barrier: bool,
}

/// Classical period 2∫₀^{z1} √(mₑ/(2(ε − U))) dz.
///
/// Above the plateau the gap is used in the factorised form
/// ε − U(z) = (z1 − z)(A/(z·z1) − eF), exact when U(z1) = ε, so the
/// substitution z = z1 − (z1 − b)s² leaves a smooth integrand. With
/// `at_top` the upper limit is the barrier maximum, where the factor
/// vanishes too; the gap is then evaluated directly and floored.
fn classical_period(p: &VerticalPotential, eps: f64, z1: f64, at_top: bool) -> Result<f64> {
    let m = CONSTANTS.m_e;
    let ef = CONSTANTS.e * p.e_field;
    let a = p.image_strength();
    let zp = z1.min(p.b);
    // plateau: ε − U = c0 + eF z
    let c0 = eps + a / p.b;
    let c1 = c0 + ef * zp;
    if c0 <= 0.0 {
        return Err(Error::Domain("bound level lies below the potential plateau".into()));
    }
    let plateau = (m / 2.0).sqrt() * 2.0 * zp / (c0.sqrt() + c1.sqrt());
    if z1 <= p.b {
        return Ok(2.0 * plateau);
    }
    let span = z1 - p.b;
    let tail = if at_top {
        let floor = 1e-6 * eps.abs();
        integrate(
            |s| {
                let z = z1 - span * s * s;
                let gap = (eps - p.energy_j(z)).max(floor);
                2.0 * span * s * (m / (2.0 * gap)).sqrt()
            },
            0.0,
            1.0,
            0.0,
            1e-8,
        )?
    } else {
        integrate(
            |s| {
                let z = z1 - span * s * s;
                let g = a / (z * z1) - ef;
                2.0 * span.sqrt() * (m / (2.0 * g)).sqrt()
            },
            0.0,
            1.0,
            0.0,
            1e-12,
        )?
    };
    Ok(2.0 * (plateau + tail))
}

/// WKB lifetime of a level ε1 (eV) against tunnelling through the tilted
/// image barrier.
pub fn wkb_lifetime(potential: &VerticalPotential, eps1_ev: f64) -> Result<WkbResult> {
    wkb_lifetime_tol(potential, eps1_ev, 1e-12)
}

/// [`wkb_lifetime`] with an explicit relative quadrature tolerance.
pub fn wkb_lifetime_tol(potential: &VerticalPotential, eps1_ev: f64, rel_tol: f64) -> Result<WkbResult> {
    potential.validate()?;
    let p = potential;
    let eps = eps1_ev * CONSTANTS.e;
    if !(eps < 0.0) {
        return Err(Error::Domain(format!("ε1 = {eps1_ev} eV is not a bound level")));
    }
    if eps <= p.energy_j(0.0) {
        return Err(Error::Domain("ε1 lies below the potential plateau".into()));
    }
    let Some((zb, top)) = p.barrier_top() else {
        if p.e_field == 0.0 {
            // no tilt: the potential never returns to ε1 on the outside
            let z1 = find_root(|z| p.energy_j(z) - eps, 0.0, p.image_strength() / -eps * 2.0, 1e-22)?;
            let t_el = classical_period(p, eps, z1, false)?;
            return Ok(WkbResult {
                z1,
                z2: f64::INFINITY,
                action: f64::INFINITY,
                t_el,
                tau: f64::INFINITY,
                has_barrier: true,
            });
        }
        return Err(Error::Domain("field so strong that no barrier forms beyond the plateau".into()));
    };
    if eps >= top {
        let t_el = classical_period(p, eps, zb, true)?;
        return Ok(WkbResult {
            z1: zb,
            z2: zb,
            action: 0.0,
            t_el,
            tau: t_el,
            has_barrier: false,
        });
    }
    let f = |z: f64| p.energy_j(z) - eps;
    let z1 = find_root(f, 0.0, zb, 1e-22)?;
    let mut hi = 2.0 * zb;
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    let z2 = find_root(f, zb, hi, 1e-22)?;
    let half = 0.5 * (z2 - z1);
    let m2 = 2.0 * CONSTANTS.m_e;
    let ef = CONSTANTS.e * p.e_field;
    // z1 ≥ b: U − ε = eF(z − z1)(z2 − z)/z, and with z = z1 + half(1 − cos t)
    // the two factors combine to half²·sin²t.
    let integral = if z1 >= p.b {
        integrate(
            |t: f64| {
                let z = z1 + half * (1.0 - t.cos());
                let st = t.sin();
                (m2 * ef / z).sqrt() * half * half * st * st
            },
            0.0,
            PI,
            0.0,
            rel_tol,
        )?
    } else {
        integrate(
            |t: f64| {
                let z = z1 + half * (1.0 - t.cos());
                let gap = (p.energy_j(z) - eps).max(0.0);
                (m2 * gap).sqrt() * half * t.sin()
            },
            0.0,
            PI,
            0.0,
            rel_tol,
        )?
    };
    let action = 2.0 / CONSTANTS.hbar * integral;
    let t_el = classical_period(p, eps, z1, false)?;
    Ok(WkbResult {
        z1,
        z2,
        action,
        t_el,
        tau: t_el * action.exp(),
        has_barrier: true,
    })
}

/// One row of a lifetime sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WkbSweepRow {
    /// Extraction field (V/m).
    pub e_field: f64,
    pub eps1_ev: f64,
    pub result: WkbResult,
}

/// Lifetimes over a list of fields.
pub fn wkb_sweep(
    base: &VerticalPotential,
    fields: &[f64],
    model: &Eps1Model,
    grid: &ZGrid,
) -> Result<Vec<WkbSweepRow>> {
    // the field-free ground state is shared by every Stark-shifted row
    let ground = match model {
        Eps1Model::FirstOrderStark => Some(ground_state_1d(&base.with_field(0.0), grid)?),
        _ => None,
    };
    fields
        .iter()
        .map(|&f| {
            let p = base.with_field(f);
            let e1 = match &ground {
                Some(g) => g.eps1_at(f),
                None => eps1(&p, model, grid)?,
            };
            Ok(WkbSweepRow {
                e_field: f,
                eps1_ev: e1,
                result: wkb_lifetime(&p, e1)?,
            })
        })
        .collect()
}

/// Writes `Er,eps1,z1,z2,tau` rows.
pub fn write_csv(rows: &[WkbSweepRow], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "Er_V_per_m,eps1_eV,z1_m,z2_m,tau_s")?;
    for r in rows {
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e}",
            r.e_field, r.eps1_ev, r.result.z1, r.result.z2, r.result.tau
        )?;
    }
    Ok(())
}
