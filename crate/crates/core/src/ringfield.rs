//! Electrostatics of the biased ring electrode and its restriction to the
//! sphere surface.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::constants::CONSTANTS;
use crate::error::{Error, Result};
use crate::special::{elliptic_k_complement, ThetaGrid};

/// Thin charged ring of radius `rr` in the plane z = `h`, coaxial with the
/// sphere centred at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingElectrode {
    /// Ring radius (m).
    pub rr: f64,
    /// Ring height above the sphere centre (m).
    pub h: f64,
    /// Bias voltage (V).
    pub vr: f64,
    /// Effective pin half-width (m).
    pub a_r: f64,
    /// Normalisation (1/m), fixed by the pin-edge anchor.
    pub k_eff: f64,
}

pub const DEFAULT_A_R: f64 = 0.1e-6;

impl RingElectrode {
    /// Builds the electrode and solves its normalisation.
    pub fn new(rr: f64, h: f64, vr: f64, a_r: f64) -> Result<Self> {
        let mut e = Self {
            rr,
            h,
            vr,
            a_r,
            k_eff: f64::NAN,
        };
        e.k_eff = solve_k_eff(&e)?;
        Ok(e)
    }

    /// Same geometry at a different bias; the normalisation is unchanged.
    pub fn with_voltage(&self, vr: f64) -> Self {
        Self { vr, ..self.clone() }
    }
}

/// K_eff = −2K(k_edge)/(2Rr − a_r), chosen so the electron energy at the pin
/// edge (ρ = Rr − a_r, z = H) is exactly −e·Vr.
pub fn solve_k_eff(electrode: &RingElectrode) -> Result<f64> {
    let (rr, a) = (electrode.rr, electrode.a_r);
    if !(rr > 0.0 && a > 0.0 && a < rr) {
        return Err(Error::Geometry(format!(
            "ring needs Rr > a_r > 0 (Rr = {rr:e}, a_r = {a:e})"
        )));
    }
    if !electrode.h.is_finite() || !electrode.vr.is_finite() {
        return Err(Error::InvalidInput("ring height and voltage must be finite".into()));
    }
    let d = 2.0 * rr - a;
    let mc = (a / d).powi(2);
    Ok(-2.0 * elliptic_k_complement(mc)? / d)
}

/// Electron potential energy (J) at cylindrical point (ρ, z).
pub fn ring_potential(electrode: &RingElectrode, rho: f64, z: f64) -> Result<f64> {
    let RingElectrode { rr, h, vr, k_eff, .. } = *electrode;
    let dz = z - h;
    let d2 = (rr + rho).powi(2) + dz * dz;
    let near2 = (rr - rho).powi(2) + dz * dz;
    if near2 <= (1e-12 * rr).powi(2) {
        return Err(Error::Singularity(format!(
            "point (ρ={rho:e}, z={z:e}) lies on the ring"
        )));
    }
    let d = d2.sqrt();
    let k = if rho == 0.0 {
        0.5 * PI
    } else {
        elliptic_k_complement(near2 / d2)?
    };
    Ok(2.0 * CONSTANTS.e * vr * k / (k_eff * d))
}

/// U_∥(θ) sampled on a polar grid for a sphere of radius `rs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralPotential {
    pub theta: Vec<f64>,
    /// Electron potential energy (J).
    pub u: Vec<f64>,
    pub rs: f64,
}

fn check_clearance(electrode: &RingElectrode, rs: f64) -> Result<()> {
    if !(rs > 0.0) {
        return Err(Error::InvalidInput(format!("sphere radius {rs:e} must be positive")));
    }
    let reach = electrode.rr.hypot(electrode.h);
    if reach <= rs {
        return Err(Error::Geometry(format!(
            "sphere of radius {rs:e} m intersects the ring (distance {reach:e} m)"
        )));
    }
    Ok(())
}

/// Restricts the ring potential to the sphere: ρ = Rs sinθ, z = Rs cosθ.
pub fn lateral_potential(
    electrode: &RingElectrode,
    rs: f64,
    grid: &ThetaGrid,
) -> Result<LateralPotential> {
    check_clearance(electrode, rs)?;
    let u = grid
        .theta
        .iter()
        .map(|&t| ring_potential(electrode, rs * t.sin(), rs * t.cos()))
        .collect::<Result<Vec<_>>>()?;
    Ok(LateralPotential {
        theta: grid.theta.clone(),
        u,
        rs,
    })
}

/// Potential at the north pole, U_∥(0), from the on-axis closed form.
pub fn pole_potential(electrode: &RingElectrode, rs: f64) -> Result<f64> {
    check_clearance(electrode, rs)?;
    ring_potential(electrode, 0.0, rs)
}

/// Radial field at the north pole, E_r = −(1/e)·∂U(0, z)/∂z at z = Rs (V/m).
///
/// Positive when the electron is pulled up toward the ring.
pub fn pole_field(electrode: &RingElectrode, rs: f64) -> Result<f64> {
    check_clearance(electrode, rs)?;
    let RingElectrode { rr, h, vr, k_eff, .. } = *electrode;
    let dz = rs - h;
    let s2 = rr * rr + dz * dz;
    // U(0,z) = π e Vr / (K_eff √(Rr² + (z−H)²))
    let du_dz = -PI * CONSTANTS.e * vr / k_eff * dz / (s2 * s2.sqrt());
    Ok(-du_dz / CONSTANTS.e)
}

/// Writes `theta,U` rows with U in eV.
pub fn write_csv(lateral: &LateralPotential, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "theta_rad,U_eV")?;
    for (t, u) in lateral.theta.iter().zip(&lateral.u) {
        writeln!(out, "{:e},{:e}", t, u / CONSTANTS.e)?;
    }
    Ok(())
}
