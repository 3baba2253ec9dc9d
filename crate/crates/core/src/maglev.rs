//! Magnetic field of the planar current disk and the diamagnetic trap it forms.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{Material, CONSTANTS};
use crate::error::{Error, Result};

/// Flat annular current film discretised into concentric loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    /// Inner radius (m).
    pub r0: f64,
    /// Radial width (m).
    pub w: f64,
    /// Total current (A).
    pub current: f64,
    pub n_loops: usize,
    /// Film thickness (m).
    pub delta: f64,
}

impl Default for LoopSpec {
    fn default() -> Self {
        Self {
            r0: 10e-6,
            w: 20e-6,
            current: 8.5,
            n_loops: 30,
            delta: 5e-6,
        }
    }
}

impl LoopSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.w > 0.0 && self.delta > 0.0) || self.n_loops == 0 {
            return Err(Error::InvalidInput(format!(
                "loop spec needs R0, W, delta > 0 and n_loops ≥ 1 (got R0={}, W={}, delta={}, n={})",
                self.r0, self.w, self.delta, self.n_loops
            )));
        }
        if !self.current.is_finite() {
            return Err(Error::InvalidInput("loop current must be finite".into()));
        }
        Ok(())
    }

    /// Sub-loop radii R_i = R0 + (i − ½)W/n.
    pub fn radii(&self) -> Vec<f64> {
        let n = self.n_loops as f64;
        (1..=self.n_loops)
            .map(|i| self.r0 + (i as f64 - 0.5) * self.w / n)
            .collect()
    }
}

/// Sampling request for a field map on the (x, z) half-plane section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRequest {
    /// Spacing in both x and z (m).
    pub dx: f64,
    /// The map covers x ∈ [−x_extent, x_extent].
    pub x_extent: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Uniform panels in each azimuthal integral.
    pub phi_panels: usize,
}

impl Default for GridRequest {
    fn default() -> Self {
        Self {
            dx: 0.1e-6,
            x_extent: 20e-6,
            z_min: 0.0,
            z_max: 40e-6,
            phi_panels: 720,
        }
    }
}

impl GridRequest {
    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.x_extent >= 0.0 && self.z_max > self.z_min) {
            return Err(Error::InvalidInput("grid needs dx > 0 and z_max > z_min".into()));
        }
        if self.phi_panels < 4 || self.phi_panels % 2 != 0 {
            return Err(Error::InvalidInput("phi_panels must be even and ≥ 4".into()));
        }
        Ok(())
    }
}

/// Field samples, row-major in z then x.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub dx: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub bx: Vec<f64>,
    pub bz: Vec<f64>,
    /// Points within one cell of a conductor; their field was evaluated at a
    /// clamped distance.
    pub singular: Vec<bool>,
}

impl FieldGrid {
    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn nz(&self) -> usize {
        self.z.len()
    }

    #[inline]
    pub fn index(&self, ix: usize, iz: usize) -> usize {
        iz * self.x.len() + ix
    }

    /// Field of the same geometry carrying `factor` times the current.
    pub fn scaled(&self, factor: f64) -> FieldGrid {
        FieldGrid {
            bx: self.bx.iter().map(|b| b * factor).collect(),
            bz: self.bz.iter().map(|b| b * factor).collect(),
            ..self.clone()
        }
    }

    /// Column index of x = 0.
    pub fn axis_column(&self) -> usize {
        self.x.len() / 2
    }
}

/// Azimuthal quadrature table for the periodic trapezoid rule, folded onto
/// φ ∈ [0, π] by the integrand's even symmetry.
struct PhiTable {
    cos: Vec<f64>,
    w: Vec<f64>,
}

impl PhiTable {
    fn new(panels: usize) -> Self {
        let half = panels / 2;
        let dphi = 2.0 * PI / panels as f64;
        let cos = (0..=half).map(|k| (k as f64 * dphi).cos()).collect();
        let w = (0..=half)
            .map(|k| if k == 0 || k == half { dphi } else { 2.0 * dphi })
            .collect();
        Self { cos, w }
    }
}

/// (Bx, Bz) at (x, z) from one loop of radius `r` carrying `current`.
fn single_loop(table: &PhiTable, r: f64, current: f64, x: f64, z: f64) -> (f64, f64) {
    let a = r * r + x * x + z * z;
    let b = 2.0 * x * r;
    let mut s_cos = 0.0;
    let mut s_one = 0.0;
    for (c, w) in table.cos.iter().zip(&table.w) {
        let d2 = a - b * c;
        let inv3 = w / (d2 * d2.sqrt());
        s_cos += c * inv3;
        s_one += inv3;
    }
    let k = CONSTANTS.mu0 * current * r / (4.0 * PI);
    (k * z * s_cos, k * (r * s_one - x * s_cos))
}

/// Field of the whole disk at one point with `panels` azimuthal panels.
pub fn point_field(spec: &LoopSpec, x: f64, z: f64, panels: usize) -> (f64, f64) {
    let table = PhiTable::new(panels);
    disk_field(&table, &spec.radii(), spec.current / spec.n_loops as f64, x, z)
}

fn disk_field(table: &PhiTable, radii: &[f64], i_each: f64, x: f64, z: f64) -> (f64, f64) {
    let mut bx = 0.0;
    let mut bz = 0.0;
    for &r in radii {
        let (a, b) = single_loop(table, r, i_each, x, z);
        bx += a;
        bz += b;
    }
    (bx, bz)
}

/// Biot–Savart field of `spec` on the requested grid.
///
/// Only x ≥ 0 is integrated; the x < 0 half follows from Bx odd, Bz even.
pub fn loop_field(spec: &LoopSpec, req: &GridRequest) -> Result<FieldGrid> {
    spec.validate()?;
    req.validate()?;
    let dx = req.dx;
    let nxh = (req.x_extent / dx).round() as usize;
    let nz = ((req.z_max - req.z_min) / dx).round() as usize + 1;
    let x: Vec<f64> = (0..=2 * nxh)
        .map(|i| (i as f64 - nxh as f64) * dx)
        .collect();
    let z: Vec<f64> = (0..nz).map(|j| req.z_min + j as f64 * dx).collect();
    let nx = x.len();
    let table = PhiTable::new(req.phi_panels);
    let radii = spec.radii();
    let i_each = spec.current / spec.n_loops as f64;
    let (rin, rout) = (spec.r0, spec.r0 + spec.w);

    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<bool>)> = z
        .par_iter()
        .map(|&zz| {
            let mut bx = vec![0.0; nx];
            let mut bz = vec![0.0; nx];
            let mut sing = vec![false; nx];
            for i in 0..=nxh {
                let xx = i as f64 * dx;
                let near = zz.abs() < dx && xx > rin - dx && xx < rout + dx;
                let ze = if near { dx.copysign(if zz == 0.0 { 1.0 } else { zz }) } else { zz };
                let (a, b) = disk_field(&table, &radii, i_each, xx, ze);
                let (ip, im) = (nxh + i, nxh - i);
                bx[ip] = a;
                bz[ip] = b;
                sing[ip] = near;
                bx[im] = -a;
                bz[im] = b;
                sing[im] = near;
            }
            bx[nxh] = 0.0;
            (bx, bz, sing)
        })
        .collect();

    let mut grid = FieldGrid {
        dx,
        x,
        z,
        bx: Vec::with_capacity(nx * nz),
        bz: Vec::with_capacity(nx * nz),
        singular: Vec::with_capacity(nx * nz),
    };
    for (bx, bz, s) in rows {
        grid.bx.extend(bx);
        grid.bz.extend(bz);
        grid.singular.extend(s);
    }
    Ok(grid)
}

/// Potential-energy density map of a levitated material (J/m³), same layout
/// as the source [`FieldGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMap {
    pub dx: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub e: Vec<f64>,
    pub singular: Vec<bool>,
    pub b0: f64,
}

impl EnergyMap {
    #[inline]
    pub fn at(&self, ix: usize, iz: usize) -> f64 {
        self.e[iz * self.x.len() + ix]
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn nz(&self) -> usize {
        self.z.len()
    }
}

/// E = ρgz + |χ|B²/(2μ0) with the uniform bias `b0` added to Bz.
pub fn energy_density(field: &FieldGrid, b0: f64, material: &Material) -> EnergyMap {
    let c = material.chi.abs() / (2.0 * CONSTANTS.mu0);
    let rg = material.rho * CONSTANTS.g_acc;
    let nx = field.nx();
    let e = field
        .bx
        .iter()
        .zip(&field.bz)
        .enumerate()
        .map(|(k, (bx, bz))| {
            let zz = field.z[k / nx];
            let bzt = bz + b0;
            rg * zz + c * (bx * bx + bzt * bzt)
        })
        .collect();
    EnergyMap {
        dx: field.dx,
        x: field.x.clone(),
        z: field.z.clone(),
        e,
        singular: field.singular.clone(),
        b0,
    }
}

/// Gradient of B² needed to hold the material against gravity, μ0gρ/|χ| (T²/m).
pub fn critical_gradient(material: &Material) -> Result<f64> {
    if material.chi == 0.0 || !material.chi.is_finite() {
        return Err(Error::Domain(format!(
            "{} has zero susceptibility and cannot be levitated",
            material.name
        )));
    }
    Ok(CONSTANTS.mu0 * CONSTANTS.g_acc * material.rho / material.chi.abs())
}

/// [`critical_gradient`] in T²/cm.
pub fn critical_gradient_t2_per_cm(material: &Material) -> Result<f64> {
    Ok(critical_gradient(material)? / 100.0)
}

/// Current density I/(Wδ) in A/m².
pub fn current_density(spec: &LoopSpec) -> Result<f64> {
    if !(spec.w > 0.0 && spec.delta > 0.0) {
        return Err(Error::InvalidInput("W and delta must be positive".into()));
    }
    Ok(spec.current / (spec.w * spec.delta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapReport {
    pub stable: bool,
    /// Levitation height above the loop plane (m).
    pub z_l: Option<f64>,
    pub e_min: Option<f64>,
    pub e_saddle: Option<f64>,
    /// Trap volume (m³).
    pub v_trap: Option<f64>,
    /// Set when the lowest cell inside the trap region is not on the axis.
    pub off_axis_minimum: bool,
    /// Grid indices (ix, iz) of the on-axis minimum.
    pub min_cell: Option<(usize, usize)>,
}

impl TrapReport {
    fn unstable() -> Self {
        Self {
            stable: false,
            z_l: None,
            e_min: None,
            e_saddle: None,
            v_trap: None,
            off_axis_minimum: false,
            min_cell: None,
        }
    }
}

#[derive(PartialEq)]
struct Frontier {
    e: f64,
    k: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on energy, ties broken by index for determinism
        other
            .e
            .total_cmp(&self.e)
            .then_with(|| other.k.cmp(&self.k))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn neighbours(nx: usize, nz: usize, k: usize) -> impl Iterator<Item = usize> {
    let (ix, iz) = (k % nx, k / nx);
    let mut out = [usize::MAX; 4];
    if ix > 0 {
        out[0] = k - 1;
    }
    if ix + 1 < nx {
        out[1] = k + 1;
    }
    if iz > 0 {
        out[2] = k - nx;
    }
    if iz + 1 < nz {
        out[3] = k + nx;
    }
    out.into_iter().filter(|&v| v != usize::MAX)
}

fn on_boundary(nx: usize, nz: usize, k: usize) -> bool {
    let (ix, iz) = (k % nx, k / nx);
    ix == 0 || iz == 0 || ix + 1 == nx || iz + 1 == nz
}

/// Lowest energy level at which the sub-level set grown from `start` reaches
/// the map boundary (minimax path energy).
pub fn escape_level(map: &EnergyMap, start: usize) -> f64 {
    let (nx, nz) = (map.nx(), map.nz());
    let mut seen = vec![false; map.e.len()];
    let mut heap = BinaryHeap::new();
    heap.push(Frontier {
        e: map.e[start],
        k: start,
    });
    seen[start] = true;
    let mut level = f64::NEG_INFINITY;
    while let Some(Frontier { e, k }) = heap.pop() {
        level = level.max(e);
        if on_boundary(nx, nz, k) {
            return level;
        }
        for n in neighbours(nx, nz, k) {
            if !seen[n] {
                seen[n] = true;
                heap.push(Frontier { e: map.e[n], k: n });
            }
        }
    }
    level
}

/// Cells connected to `start` with energy strictly below `level`.
pub fn sublevel_region(map: &EnergyMap, start: usize, level: f64) -> Vec<usize> {
    let (nx, nz) = (map.nx(), map.nz());
    let mut seen = vec![false; map.e.len()];
    let mut queue = VecDeque::new();
    let mut region = Vec::new();
    if map.e[start] >= level {
        return region;
    }
    seen[start] = true;
    queue.push_back(start);
    while let Some(k) = queue.pop_front() {
        region.push(k);
        for n in neighbours(nx, nz, k) {
            if !seen[n] && map.e[n] < level {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    region.sort_unstable();
    region
}

fn is_local_min(map: &EnergyMap, ix: usize, iz: usize) -> bool {
    let (nx, nz) = (map.nx(), map.nz());
    if ix == 0 || iz == 0 || ix + 1 >= nx || iz + 1 >= nz {
        return false;
    }
    let c = map.at(ix, iz);
    for dz in [-1_i64, 0, 1] {
        for dxi in [-1_i64, 0, 1] {
            if dz == 0 && dxi == 0 {
                continue;
            }
            let v = map.at((ix as i64 + dxi) as usize, (iz as i64 + dz) as usize);
            if v <= c {
                return false;
            }
        }
    }
    true
}

/// Locates the on-axis levitation point and the trap it sits in.
pub fn find_trap(map: &EnergyMap) -> TrapReport {
    let nx = map.nx();
    let nz = map.nz();
    if nx < 3 || nz < 3 {
        return TrapReport::unstable();
    }
    let ic = nx / 2;
    let mut best: Option<(usize, f64)> = None;
    for iz in 1..nz - 1 {
        if map.z[iz] <= 0.0 || map.singular[iz * nx + ic] {
            continue;
        }
        if is_local_min(map, ic, iz) {
            let e = map.at(ic, iz);
            if best.map_or(true, |(_, b)| e < b) {
                best = Some((iz, e));
            }
        }
    }
    let Some((iz, e_min)) = best else {
        return TrapReport::unstable();
    };
    let start = iz * nx + ic;
    let e_saddle = escape_level(map, start);
    if e_saddle <= e_min {
        return TrapReport::unstable();
    }
    let region = sublevel_region(map, start, e_saddle);
    let dx = map.dx;
    let mut volume = 0.0;
    let mut lowest = (e_min, start);
    for &k in &region {
        let ix = k % nx;
        if map.e[k] < lowest.0 {
            lowest = (map.e[k], k);
        }
        if ix < ic {
            continue;
        }
        let r = map.x[ix];
        volume += if ix == ic {
            PI * (0.5 * dx).powi(2) * dx
        } else {
            2.0 * PI * r * dx * dx
        };
    }
    // parabolic refinement of the axial minimum
    let (em, e0, ep) = (map.at(ic, iz - 1), e_min, map.at(ic, iz + 1));
    let denom = em - 2.0 * e0 + ep;
    let shift = if denom > 0.0 { 0.5 * (em - ep) / denom } else { 0.0 };
    let z_l = map.z[iz] + shift.clamp(-0.5, 0.5) * dx;
    TrapReport {
        stable: volume > 0.0 && z_l > 0.0,
        z_l: Some(z_l),
        e_min: Some(e_min),
        e_saddle: Some(e_saddle),
        v_trap: Some(volume),
        off_axis_minimum: lowest.1 % nx != ic,
        min_cell: Some((ic, iz)),
    }
}

/// RMS thermal displacement (x, z) of a sphere of radius `radius` sitting in
/// the trap at temperature `t`.
pub fn thermal_amplitude(
    report: &TrapReport,
    map: &EnergyMap,
    radius: f64,
    t: f64,
) -> Result<(f64, f64)> {
    let Some((ix, iz)) = report.min_cell.filter(|_| report.stable) else {
        return Err(Error::InvalidInput("thermal amplitude needs a stable trap".into()));
    };
    if t < 0.0 || radius <= 0.0 {
        return Err(Error::InvalidInput("temperature ≥ 0 and radius > 0 required".into()));
    }
    if let Some(v) = report.v_trap {
        if 4.0 / 3.0 * PI * radius.powi(3) > v {
            return Err(Error::Geometry(format!(
                "particle of radius {radius:e} m does not fit in a {v:e} m³ trap"
            )));
        }
    }
    let vp = 4.0 / 3.0 * PI * radius.powi(3);
    let h2 = map.dx * map.dx;
    let c = map.at(ix, iz);
    let kx = vp * (map.at(ix - 1, iz) - 2.0 * c + map.at(ix + 1, iz)) / h2;
    let kz = vp * (map.at(ix, iz - 1) - 2.0 * c + map.at(ix, iz + 1)) / h2;
    if !(kx > 0.0 && kz > 0.0) {
        return Err(Error::Domain(format!(
            "non-positive trap stiffness (kx={kx:e}, kz={kz:e})"
        )));
    }
    let kt = CONSTANTS.k_b * t;
    Ok(((kt / kx).sqrt(), (kt / kz).sqrt()))
}

/// Writes `x,z,Bx,Bz,E` rows (z outer, x inner).
pub fn write_csv(field: &FieldGrid, map: &EnergyMap, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "x_m,z_m,Bx_T,Bz_T,E_J_per_m3")?;
    let nx = field.nx();
    for (k, e) in map.e.iter().enumerate() {
        let (ix, iz) = (k % nx, k / nx);
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e}",
            field.x[ix], field.z[iz], field.bx[k], field.bz[k], e
        )?;
    }
    Ok(())
}
