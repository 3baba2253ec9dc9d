//! Physical constants and levitation material records.
//!
//! Values are the exact / recommended CODATA 2018 set, compiled in so every run
//! of the pipeline sees bit-identical inputs.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Identifier written into every output header.
pub const CONSTANT_SET_ID: &str = "CODATA-2018";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Vacuum permeability (T·m/A).
    pub mu0: f64,
    /// Elementary charge (C).
    pub e: f64,
    /// Electron mass (kg).
    pub m_e: f64,
    /// Reduced Planck constant (J·s).
    pub hbar: f64,
    /// Planck constant (J·s).
    pub h: f64,
    /// Boltzmann constant (J/K).
    pub k_b: f64,
    /// Standard gravity (m/s²).
    pub g_acc: f64,
    /// Vacuum permittivity (F/m).
    pub eps0: f64,
    /// Bohr magneton (J/T), derived as e·ħ/(2mₑ).
    pub mu_b: f64,
}

const H_PLANCK: f64 = 6.626_070_15e-34;
const HBAR: f64 = H_PLANCK / (2.0 * PI);
const E_CHARGE: f64 = 1.602_176_634e-19;
const M_E: f64 = 9.109_383_701_5e-31;

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    mu0: 1.256_637_062_12e-6,
    e: E_CHARGE,
    m_e: M_E,
    hbar: HBAR,
    h: H_PLANCK,
    k_b: 1.380_649e-23,
    g_acc: 9.806_65,
    eps0: 8.854_187_812_8e-12,
    mu_b: E_CHARGE * HBAR / (2.0 * M_E),
};

/// A diamagnetic substance that can be levitated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// Mass density (kg/m³).
    pub rho: f64,
    /// SI volume susceptibility (negative for diamagnets).
    pub chi: f64,
}

impl Material {
    pub fn new(name: impl Into<String>, rho: f64, chi: f64) -> Self {
        Self {
            name: name.into(),
            rho,
            chi,
        }
    }

    pub fn water() -> Self {
        Self::new("water", 1000.0, -9.04e-6)
    }

    pub fn helium_ii() -> Self {
        Self::new("He II", 145.0, -8.6e-7)
    }

    pub fn solid_neon() -> Self {
        Self::new("SNe", 1440.0, -6.25e-6)
    }

    /// The three tabulated levitation materials.
    pub fn builtin() -> [Material; 3] {
        [Self::water(), Self::helium_ii(), Self::solid_neon()]
    }

    /// Looks up a built-in material by a case-insensitive label.
    pub fn by_name(name: &str) -> Option<Material> {
        let key: String = name
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "water" => Some(Self::water()),
            "heii" | "helium" | "heliumii" => Some(Self::helium_ii()),
            "sne" | "neon" | "solidneon" => Some(Self::solid_neon()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_positive() {
        let c = CONSTANTS;
        for v in [c.mu0, c.e, c.m_e, c.hbar, c.h, c.k_b, c.g_acc, c.eps0, c.mu_b] {
            assert!(v > 0.0);
        }
    }

    #[test]
    fn bohr_magneton_consistent() {
        let c = CONSTANTS;
        let derived = c.e * c.hbar / (2.0 * c.m_e);
        assert!(((c.mu_b - derived) / derived).abs() < 1e-12);
        // CODATA 2018 recommended value
        assert!(((c.mu_b - 9.274_010_078_3e-24) / c.mu_b).abs() < 1e-9);
    }

    #[test]
    fn builtin_materials_are_diamagnetic() {
        let table = Material::builtin();
        assert_eq!(table.len(), 3);
        assert!(table.iter().all(|m| m.chi < 0.0));
        assert_eq!(Material::by_name("sne"), Some(Material::solid_neon()));
        assert_eq!(Material::by_name("He II"), Some(Material::helium_ii()));
        assert_eq!(Material::by_name("unobtainium"), None);
    }
}
