//! Qubit–resonator dipole coupling and resonator-mediated exchange.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::constants::CONSTANTS;
use crate::eigensolver::{AngularEigenstate, SphereSystem};
use crate::error::{Error, Result};

/// Differential-mode resonator seen by the qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSpec {
    /// Resonance frequency ω_r/2π (Hz).
    pub f_r: f64,
    /// Differential impedance (Ω).
    pub z_diff: f64,
    /// Field at the qubit per volt of differential drive (1/m).
    pub ev: f64,
}

impl ResonatorSpec {
    pub fn new(f_r: f64, z_diff: f64, ev: f64) -> Result<Self> {
        let s = Self { f_r, z_diff, ev };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_r.is_finite() && self.f_r > 0.0) {
            return Err(Error::InvalidInput(format!("resonator frequency {} Hz", self.f_r)));
        }
        if !(self.z_diff.is_finite() && self.z_diff > 0.0) {
            return Err(Error::InvalidInput(format!("impedance {} Ω must be positive", self.z_diff)));
        }
        if !(self.ev.is_finite() && self.ev >= 0.0) {
            return Err(Error::InvalidInput(format!("field per volt {} must be ≥ 0", self.ev)));
        }
        Ok(())
    }

    /// V_zpf = ω_r·√(ħ Z_diff / 2) (V).
    pub fn v_zpf(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f_r * (CONSTANTS.hbar * self.z_diff / 2.0).sqrt()
    }
}

/// Whether g carries the 1/√2 from projecting E_x onto the spherical
/// component E₊₁.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GConvention {
    #[default]
    AsPrinted,
    WithSqrtHalf,
}

/// |⟨e|d₊₁|g⟩| (C·m) for states of one system.
///
/// With Θ₁₁ = −√(3/8π) sinθ the angular factor collapses to
/// e·Rs/√2·|∫ψₑ ψ_g sin²θ dθ|. Pairs other than Δm = +1 vanish by symmetry.
pub fn dipole_matrix_element(
    system: &SphereSystem,
    ground: &AngularEigenstate,
    excited: &AngularEigenstate,
) -> Result<f64> {
    let fp = system.fingerprint();
    for s in [ground, excited] {
        if s.fingerprint != fp {
            return Err(Error::MixedConfiguration(s.fingerprint, fp));
        }
    }
    if excited.m - ground.m != 1 {
        return Ok(0.0);
    }
    let g = &system.grid;
    let overlap: f64 = (0..g.len())
        .map(|j| g.weights[j] * g.theta[j].sin() * ground.psi[j] * excited.psi[j])
        .sum();
    Ok(CONSTANTS.e * system.rs / std::f64::consts::SQRT_2 * overlap.abs())
}

/// g/2π (Hz) = (ω_r/2πħ)·√(ħZ_diff/2)·𝓔_V·|d|.
pub fn coupling_g(dipole: f64, spec: &ResonatorSpec, convention: GConvention) -> f64 {
    let g = spec.v_zpf() * spec.ev * dipole / CONSTANTS.h;
    match convention {
        GConvention::AsPrinted => g,
        GConvention::WithSqrtHalf => g / std::f64::consts::SQRT_2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub vr: f64,
    pub h: f64,
    /// C·m.
    pub dipole: f64,
    /// Hz.
    pub g_over_2pi: f64,
    pub resonator: ResonatorSpec,
}

/// `Vr_V,H_m,dipole_Cm,g_over_2pi_MHz,Zdiff_ohm`.
pub fn write_csv(rows: &[CouplingReport], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "Vr_V,H_m,dipole_Cm,g_over_2pi_MHz,Zdiff_ohm")?;
    for r in rows {
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e}",
            r.vr,
            r.h,
            r.dipole,
            r.g_over_2pi * 1e-6,
            r.resonator.z_diff
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    /// J/2π (Hz).
    pub j: f64,
    /// |Δ| ≥ 10·max(g₁, g₂).
    pub dispersive: bool,
}

/// J/2π = g₁g₂/Δ with all arguments in Hz.
pub fn exchange_j(g1: f64, g2: f64, delta: f64) -> Result<Exchange> {
    if delta == 0.0 {
        return Err(Error::Domain("zero detuning: resonant exchange is outside the dispersive model".into()));
    }
    if !(g1.is_finite() && g2.is_finite() && !delta.is_nan()) {
        return Err(Error::InvalidInput("non-finite coupling or detuning".into()));
    }
    Ok(Exchange {
        j: g1 * g2 / delta,
        dispersive: delta.abs() >= 10.0 * g1.abs().max(g2.abs()),
    })
}
