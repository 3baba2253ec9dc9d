//! Run configuration: strict TOML with SI unit suffixes in every key that
//! carries a dimension.

use std::path::PathBuf;

use levqsim_core::coupling::GConvention;
use levqsim_core::eigensolver::SolverParams;
use levqsim_core::laplace::{ElectrodeModel, PinGeometry};
use levqsim_core::maglev::{GridRequest, LoopSpec};
use levqsim_core::qubit::linspace;
use levqsim_core::ringfield::DEFAULT_A_R;
use levqsim_core::vertical::{Eps1Model, ZGrid};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum CommandKind {
    Trap,
    Wkb,
    Ring,
    Eigen,
    Sweep,
    Couple,
    Laplace,
    Figures,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Trap => "trap",
            Self::Wkb => "wkb",
            Self::Ring => "ring",
            Self::Eigen => "eigen",
            Self::Sweep => "sweep",
            Self::Couple => "couple",
            Self::Laplace => "laplace",
            Self::Figures => "figures",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Output directory; `out` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<CommandKind>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trap: Option<TrapConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wkb: Option<WkbConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ring: Option<RingConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigen: Option<EigenConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub couple: Option<CoupleConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub laplace: Option<LaplaceConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub figures: Option<FiguresConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("config: {}", e.message())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Checks that the block for `command` is present and agrees with any
    /// `command` key in the file.
    pub fn resolve(mut self, command: CommandKind) -> Result<Self, CliError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(CliError::validation(format!(
                    "config is for `{}` but `{}` was requested",
                    c.name(),
                    command.name()
                )));
            }
        }
        self.command = Some(command);
        let present = match command {
            CommandKind::Trap => self.trap.is_some(),
            CommandKind::Wkb => self.wkb.is_some(),
            CommandKind::Ring => self.ring.is_some(),
            CommandKind::Eigen => self.eigen.is_some(),
            CommandKind::Sweep => self.sweep.is_some(),
            CommandKind::Couple => self.couple.is_some(),
            CommandKind::Laplace => self.laplace.is_some(),
            CommandKind::Figures => {
                self.figures.get_or_insert_with(FiguresConfig::default);
                true
            }
        };
        if !present {
            return Err(CliError::validation(format!(
                "missing [{}] block in the configuration",
                command.name()
            )));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapConfig {
    #[serde(rename = "R0_meters")]
    pub r0_meters: f64,
    #[serde(rename = "W_meters")]
    pub w_meters: f64,
    #[serde(rename = "I_amperes")]
    pub i_amperes: f64,
    #[serde(rename = "B0_tesla")]
    pub b0_tesla: f64,
    pub n_loops: usize,
    pub delta_meters: f64,
    pub dx_meters: f64,
    pub x_extent_meters: f64,
    pub z_min_meters: f64,
    pub z_max_meters: f64,
    pub phi_panels: usize,
    pub material: String,
    /// Particle radius for the thermal-motion estimate.
    pub particle_radius_meters: f64,
    pub temperature_kelvin: f64,
}

impl Default for TrapConfig {
    fn default() -> Self {
        let l = LoopSpec::default();
        let g = GridRequest::default();
        Self {
            r0_meters: l.r0,
            w_meters: l.w,
            i_amperes: l.current,
            b0_tesla: -26e-3,
            n_loops: l.n_loops,
            delta_meters: l.delta,
            dx_meters: g.dx,
            x_extent_meters: g.x_extent,
            z_min_meters: g.z_min,
            z_max_meters: g.z_max,
            phi_panels: g.phi_panels,
            material: "SNe".into(),
            particle_radius_meters: 3e-6,
            temperature_kelvin: 0.1,
        }
    }
}

impl TrapConfig {
    pub fn loop_spec(&self) -> LoopSpec {
        LoopSpec {
            r0: self.r0_meters,
            w: self.w_meters,
            current: self.i_amperes,
            n_loops: self.n_loops,
            delta: self.delta_meters,
        }
    }

    pub fn grid(&self) -> GridRequest {
        GridRequest {
            dx: self.dx_meters,
            x_extent: self.x_extent_meters,
            z_min: self.z_min_meters,
            z_max: self.z_max_meters,
            phi_panels: self.phi_panels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WkbConfig {
    #[serde(rename = "Er_min_volts_per_meter")]
    pub er_min: f64,
    #[serde(rename = "Er_max_volts_per_meter")]
    pub er_max: f64,
    #[serde(rename = "Er_points")]
    pub er_points: usize,
    pub epsilon_r: f64,
    pub truncation_meters: f64,
    pub z_max_meters: f64,
    pub dz_meters: f64,
    pub eps1_model: Eps1Model,
}

impl Default for WkbConfig {
    fn default() -> Self {
        let z = ZGrid::default();
        Self {
            er_min: 0.2e6,
            er_max: 0.6e6,
            er_points: 21,
            epsilon_r: levqsim_core::vertical::NEON_EPSILON_R,
            truncation_meters: levqsim_core::vertical::NEON_TRUNCATION,
            z_max_meters: z.z_max,
            dz_meters: z.dz,
            eps1_model: Eps1Model::default(),
        }
    }
}

impl WkbConfig {
    pub fn fields(&self) -> Vec<f64> {
        linspace(self.er_min, self.er_max, self.er_points)
    }

    pub fn grid(&self) -> ZGrid {
        ZGrid {
            z_max: self.z_max_meters,
            dz: self.dz_meters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingConfig {
    #[serde(rename = "Rr_meters")]
    pub rr_meters: f64,
    #[serde(rename = "H_meters")]
    pub h_meters: f64,
    #[serde(rename = "Vr_volts")]
    pub vr_volts: f64,
    pub a_r_meters: f64,
    #[serde(rename = "Rs_meters")]
    pub rs_meters: f64,
    pub dtheta_radians: f64,
}

impl Default for RingConfig {
    fn default() -> Self {
        Self {
            rr_meters: 1.5e-6,
            h_meters: 0.85e-6,
            vr_volts: 0.15,
            a_r_meters: DEFAULT_A_R,
            rs_meters: 0.5e-6,
            dtheta_radians: 3.1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    #[serde(rename = "Nmax")]
    pub nmax: usize,
    pub dtheta_radians: f64,
    pub dtau: f64,
    pub energy_tol: f64,
    pub max_iters: usize,
    pub check_every: usize,
    pub mirror_negative_m: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::from(SolverParams::default())
    }
}

impl From<SolverParams> for SolverConfig {
    fn from(p: SolverParams) -> Self {
        Self {
            nmax: p.nmax,
            dtheta_radians: p.dtheta,
            dtau: p.dtau,
            energy_tol: p.energy_tol,
            max_iters: p.max_iters,
            check_every: p.check_every,
            mirror_negative_m: p.mirror_negative_m,
        }
    }
}

impl SolverConfig {
    pub fn params(&self) -> SolverParams {
        SolverParams {
            nmax: self.nmax,
            dtheta: self.dtheta_radians,
            dtau: self.dtau,
            energy_tol: self.energy_tol,
            max_iters: self.max_iters,
            check_every: self.check_every,
            mirror_negative_m: self.mirror_negative_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenConfig {
    #[serde(rename = "Rr_meters")]
    pub rr_meters: f64,
    #[serde(rename = "H_meters")]
    pub h_meters: f64,
    #[serde(rename = "Vr_volts")]
    pub vr_volts: f64,
    pub a_r_meters: f64,
    #[serde(rename = "Rs_meters")]
    pub rs_meters: f64,
    #[serde(rename = "B0_tesla")]
    pub b0_tesla: f64,
    pub n_list: Vec<usize>,
    pub m_list: Vec<i32>,
    pub solver: SolverConfig,
}

impl Default for EigenConfig {
    fn default() -> Self {
        let r = RingConfig::default();
        Self {
            rr_meters: r.rr_meters,
            h_meters: r.h_meters,
            vr_volts: r.vr_volts,
            a_r_meters: r.a_r_meters,
            rs_meters: r.rs_meters,
            b0_tesla: -20e-3,
            n_list: vec![0],
            m_list: vec![0, 1, -1, 2],
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBlock {
    #[serde(rename = "Rr_meters")]
    pub rr_meters: f64,
    #[serde(rename = "Rs_meters")]
    pub rs_meters: f64,
    #[serde(rename = "B0_tesla")]
    pub b0_tesla: f64,
    pub a_r_meters: f64,
    #[serde(rename = "Vr_min_volts")]
    pub vr_min_volts: f64,
    #[serde(rename = "Vr_max_volts")]
    pub vr_max_volts: f64,
    #[serde(rename = "Vr_points")]
    pub vr_points: usize,
    #[serde(rename = "H_min_meters")]
    pub h_min_meters: f64,
    #[serde(rename = "H_max_meters")]
    pub h_max_meters: f64,
    #[serde(rename = "H_points")]
    pub h_points: usize,
    /// Operating-region window on f01.
    pub f01_min_hertz: f64,
    pub f01_max_hertz: f64,
    pub alpha_min_hertz: f64,
    pub solver: SolverConfig,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            rr_meters: 1.5e-6,
            rs_meters: 0.5e-6,
            b0_tesla: -20e-3,
            a_r_meters: DEFAULT_A_R,
            vr_min_volts: 0.05,
            vr_max_volts: 0.25,
            vr_points: 20,
            h_min_meters: 0.6e-6,
            h_max_meters: 1.1e-6,
            h_points: 20,
            f01_min_hertz: 1e9,
            f01_max_hertz: 10e9,
            alpha_min_hertz: 100e6,
            solver: SolverConfig::default(),
        }
    }
}

impl SweepBlock {
    pub fn sweep_config(&self) -> levqsim_core::qubit::SweepConfig {
        levqsim_core::qubit::SweepConfig {
            rr: self.rr_meters,
            rs: self.rs_meters,
            b0: self.b0_tesla,
            a_r: self.a_r_meters,
            vr_axis: linspace(self.vr_min_volts, self.vr_max_volts, self.vr_points),
            h_axis: linspace(self.h_min_meters, self.h_max_meters, self.h_points),
            solver: self.solver.params(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaplaceConfig {
    pub pin_width_meters: f64,
    pub pin_gap_meters: f64,
    pub pin_thickness_meters: f64,
    pub ground_extent_meters: f64,
    pub half_width_meters: f64,
    pub half_height_meters: f64,
    pub h_meters: f64,
    pub well_depth_meters: f64,
    pub model: ElectrodeModel,
    pub tol_volts: f64,
    /// Probe distance from the electrode plane.
    pub probe_depth_meters: f64,
}

impl Default for LaplaceConfig {
    fn default() -> Self {
        let g = PinGeometry::default();
        Self {
            pin_width_meters: g.pin_width,
            pin_gap_meters: g.pin_gap,
            pin_thickness_meters: g.pin_thickness,
            ground_extent_meters: g.ground_extent,
            half_width_meters: g.half_width,
            half_height_meters: g.half_height,
            h_meters: g.h,
            well_depth_meters: g.well_depth,
            model: g.model,
            tol_volts: 1e-10,
            probe_depth_meters: 0.35e-6,
        }
    }
}

impl LaplaceConfig {
    pub fn geometry(&self) -> PinGeometry {
        PinGeometry {
            pin_width: self.pin_width_meters,
            pin_gap: self.pin_gap_meters,
            pin_thickness: self.pin_thickness_meters,
            ground_extent: self.ground_extent_meters,
            half_width: self.half_width_meters,
            half_height: self.half_height_meters,
            h: self.h_meters,
            well_depth: self.well_depth_meters,
            model: self.model,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeConfig {
    pub g1_hertz: f64,
    pub g2_hertz: f64,
    pub delta_hertz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoupleConfig {
    #[serde(rename = "Rr_meters")]
    pub rr_meters: f64,
    #[serde(rename = "Rs_meters")]
    pub rs_meters: f64,
    #[serde(rename = "B0_tesla")]
    pub b0_tesla: f64,
    pub a_r_meters: f64,
    #[serde(rename = "Vr_volts")]
    pub vr_volts: Vec<f64>,
    #[serde(rename = "H_meters")]
    pub h_meters: Vec<f64>,
    pub f_r_hertz: f64,
    #[serde(rename = "Zdiff_ohms")]
    pub zdiff_ohms: Vec<f64>,
    pub convention: GConvention,
    pub solver: SolverConfig,
    pub laplace: LaplaceConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exchange: Option<ExchangeConfig>,
}

impl Default for CoupleConfig {
    fn default() -> Self {
        Self {
            rr_meters: 1.5e-6,
            rs_meters: 0.5e-6,
            b0_tesla: -20e-3,
            a_r_meters: DEFAULT_A_R,
            vr_volts: linspace(0.05, 0.25, 9),
            h_meters: vec![0.7e-6, 0.85e-6, 1.0e-6],
            f_r_hertz: 5e9,
            zdiff_ohms: vec![100.0, 2500.0],
            convention: GConvention::AsPrinted,
            solver: SolverConfig::default(),
            laplace: LaplaceConfig::default(),
            exchange: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Reference parameter grids.
    #[default]
    Full,
    /// Coarser sweeps for smoke tests.
    Quick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FiguresConfig {
    pub profile: Profile,
}
