//! Differential-mode electrostatics of the resonator centre pins in the x–z
//! plane, solved by red-black SOR on a conforming Cartesian grid.

use std::hash::Hasher;
use std::io::Write;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the pins and grounds are represented on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ElectrodeModel {
    /// Electrodes as Dirichlet data on the boundary z = 0 of the half-plane
    /// z ≥ 0, with linear ramps across the gaps. Thin coplanar conductors
    /// give a potential mirror-symmetric in z, so one half suffices.
    #[default]
    Coplanar,
    /// Rectangles occupying 0 ≤ z ≤ pin_thickness.
    ThickPins,
}

/// Pin cross-section. Pins sit on z = 0 as mirror images about x = 0. The
/// probe lies on the x = 0 axis at a given distance from the electrode plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PinGeometry {
    pub pin_width: f64,
    /// Centre-to-centre pin spacing.
    pub pin_gap: f64,
    pub pin_thickness: f64,
    /// Width of each ground plane, measured in from the domain edge.
    pub ground_extent: f64,
    pub half_width: f64,
    pub half_height: f64,
    /// Grid spacing.
    pub h: f64,
    /// Extra depth of the particle's rest position below the nominal pole.
    pub well_depth: f64,
    pub model: ElectrodeModel,
}

impl Default for PinGeometry {
    fn default() -> Self {
        Self {
            pin_width: 1e-6,
            pin_gap: 3e-6,
            pin_thickness: 0.2e-6,
            ground_extent: 15e-6,
            half_width: 20e-6,
            half_height: 20e-6,
            h: 50e-9,
            well_depth: 0.0,
            model: ElectrodeModel::Coplanar,
        }
    }
}

fn steps(len: f64, h: f64) -> Option<usize> {
    let n = len / h;
    let r = n.round();
    ((n - r).abs() < 1e-6 && r >= 0.0).then_some(r as usize)
}

impl PinGeometry {
    fn with_spacing(&self, h: f64) -> Self {
        Self { h, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.pin_width,
            self.pin_gap,
            self.ground_extent,
            self.half_width,
            self.half_height,
            self.h,
        ];
        if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.pin_thickness < 0.0 {
            return Err(Error::InvalidInput("pin geometry dimensions must be positive".into()));
        }
        let outer = 0.5 * (self.pin_gap + self.pin_width);
        if self.pin_width >= self.pin_gap {
            return Err(Error::Geometry("pins overlap at x = 0".into()));
        }
        if outer >= self.half_width - self.ground_extent {
            return Err(Error::Geometry("pins reach the ground planes".into()));
        }
        if self.model == ElectrodeModel::ThickPins && self.pin_thickness >= self.half_height {
            return Err(Error::Geometry("pins taller than the domain".into()));
        }
        // every conductor edge must land on a grid line
        let edges = [
            0.5 * (self.pin_gap - self.pin_width),
            outer,
            self.half_width - self.ground_extent,
            self.half_width,
            self.half_height,
            if self.model == ElectrodeModel::ThickPins { self.pin_thickness } else { 0.0 },
        ];
        if edges.iter().any(|&e| steps(e, self.h).is_none()) {
            return Err(Error::Geometry(format!(
                "grid spacing {:e} m does not conform to the electrode edges",
                self.h
            )));
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> u64 {
        let mut f = FnvHasher::default();
        for v in [
            self.pin_width,
            self.pin_gap,
            self.pin_thickness,
            self.ground_extent,
            self.half_width,
            self.half_height,
            self.h,
            self.well_depth,
        ] {
            f.write_u64(v.to_bits());
        }
        f.write_u8(self.model as u8);
        f.finish()
    }
}

/// Grid, conductor mask and Dirichlet values for one geometry.
struct Setup {
    nx: usize,
    nz: usize,
    /// Row index of the electrode plane z = 0.
    k0: usize,
    fixed: Vec<bool>,
    v: Vec<f64>,
}

fn setup(g: &PinGeometry, v_left: f64, v_right: f64) -> Setup {
    let half = steps(g.half_width, g.h).expect("validated");
    let nx = 2 * half + 1;
    let cx = half;
    let hz = steps(g.half_height, g.h).expect("validated");
    let inner = steps(0.5 * (g.pin_gap - g.pin_width), g.h).expect("validated");
    let outer = steps(0.5 * (g.pin_gap + g.pin_width), g.h).expect("validated");
    let ground = steps(g.half_width - g.ground_extent, g.h).expect("validated");
    let (nz, k0, top) = match g.model {
        ElectrodeModel::Coplanar => (hz + 1, 0, 0),
        ElectrodeModel::ThickPins => {
            (2 * hz + 1, hz, steps(g.pin_thickness, g.h).expect("validated"))
        }
    };
    let mut fixed = vec![false; nx * nz];
    let mut v = vec![0.0; nx * nz];
    let pin = |i: usize| if i < cx { v_left } else { v_right };
    for k in 0..nz {
        for i in 0..nx {
            let idx = k * nx + i;
            let d = i.abs_diff(cx);
            if i == 0 || k == nz - 1 || i == nx - 1 || (k == 0 && g.model == ElectrodeModel::ThickPins) {
                fixed[idx] = true;
                continue;
            }
            if k < k0 || k > k0 + top {
                continue;
            }
            if (inner..=outer).contains(&d) {
                fixed[idx] = true;
                v[idx] = pin(i);
            } else if d >= ground {
                fixed[idx] = true;
            } else if g.model == ElectrodeModel::Coplanar {
                // gaps on the boundary plane carry a linear ramp between conductors
                fixed[idx] = true;
                v[idx] = if d < inner {
                    0.5 * (v_left + v_right)
                        + 0.5 * (v_right - v_left) * (i as f64 - cx as f64) / inner as f64
                } else {
                    pin(i) * (ground - d) as f64 / (ground - outer) as f64
                };
            }
        }
    }
    Setup { nx, nz, k0, fixed, v }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceSolution {
    pub geometry: PinGeometry,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// Row-major, z outer.
    pub v: Vec<f64>,
    pub ex: Vec<f64>,
    pub ez: Vec<f64>,
    pub conductor: Vec<bool>,
    /// Largest |mean of neighbours − V| over free nodes (V).
    pub residual: f64,
    pub iterations: usize,
}

impl LaplaceSolution {
    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn nz(&self) -> usize {
        self.z.len()
    }

    pub fn index(&self, i: usize, k: usize) -> usize {
        k * self.x.len() + i
    }
}

fn relax(s: &mut Setup, tol: f64, max_iters: usize) -> Result<(f64, usize)> {
    let (nx, nz) = (s.nx, s.nz);
    let n = nx.max(nz) as f64;
    let omega = 2.0 / (1.0 + (std::f64::consts::PI / n).sin());
    let mut history = Vec::new();
    for it in 1..=max_iters {
        let mut res = 0.0_f64;
        for color in 0..2 {
            for k in 1..nz - 1 {
                let start = 1 + (k + color + 1) % 2;
                let row = k * nx;
                let mut i = start;
                while i < nx - 1 {
                    let idx = row + i;
                    if !s.fixed[idx] {
                        let avg = 0.25
                            * ((s.v[idx - 1] + s.v[idx + 1]) + s.v[idx - nx] + s.v[idx + nx]);
                        let d = avg - s.v[idx];
                        res = res.max(d.abs());
                        s.v[idx] += omega * d;
                    }
                    i += 2;
                }
            }
        }
        if it % 100 == 0 {
            history.push(res);
        }
        if res < tol {
            return Ok((res, it));
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iters,
        last_residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// Bilinear prolongation of a coarse (2h) solution onto the fine free nodes.
fn prolong(coarse: &Setup, fine: &mut Setup) {
    let cnx = coarse.nx;
    for k in 0..fine.nz {
        for i in 0..fine.nx {
            let idx = k * fine.nx + i;
            if fine.fixed[idx] {
                continue;
            }
            let (ci, fi) = (i / 2, i % 2);
            let (ck, fk) = (k / 2, k % 2);
            let at = |a: usize, b: usize| coarse.v[b * cnx + a];
            fine.v[idx] = match (fi, fk) {
                (0, 0) => at(ci, ck),
                (1, 0) => 0.5 * (at(ci, ck) + at(ci + 1, ck)),
                (0, _) => 0.5 * (at(ci, ck) + at(ci, ck + 1)),
                _ => 0.25 * (at(ci, ck) + at(ci + 1, ck) + at(ci, ck + 1) + at(ci + 1, ck + 1)),
            };
        }
    }
}

fn solve_nested(g: &PinGeometry, v_left: f64, v_right: f64, tol: f64) -> Result<(Setup, f64, usize)> {
    let mut s = setup(g, v_left, v_right);
    let coarser = g.with_spacing(2.0 * g.h);
    if s.nx.min(s.nz) > 64 && coarser.validate().is_ok() {
        let (c, _, _) = solve_nested(&coarser, v_left, v_right, tol)?;
        prolong(&c, &mut s);
    }
    let cap = 200 * s.nx.max(s.nz) + 1000;
    let (res, it) = relax(&mut s, tol, cap)?;
    Ok((s, res, it))
}

/// Solves with pins at `v_left` and `v_right`, grounds and the outer box at 0.
pub fn solve_with_voltages(
    geometry: &PinGeometry,
    v_left: f64,
    v_right: f64,
    tol: f64,
) -> Result<LaplaceSolution> {
    geometry.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let (s, residual, iterations) = solve_nested(geometry, v_left, v_right, tol)?;
    let (nx, nz, h) = (s.nx, s.nz, geometry.h);
    let x: Vec<f64> = (0..nx).map(|i| (i as f64 - ((nx - 1) / 2) as f64) * h).collect();
    let z: Vec<f64> = (0..nz).map(|k| (k as f64 - s.k0 as f64) * h).collect();
    let mut ex = vec![0.0; nx * nz];
    let mut ez = vec![0.0; nx * nz];
    for k in 0..nz {
        for i in 0..nx {
            let idx = k * nx + i;
            let (il, ir) = (i.saturating_sub(1), (i + 1).min(nx - 1));
            let (kd, ku) = (k.saturating_sub(1), (k + 1).min(nz - 1));
            ex[idx] = -(s.v[k * nx + ir] - s.v[k * nx + il]) / ((ir - il) as f64 * h);
            ez[idx] = -(s.v[ku * nx + i] - s.v[kd * nx + i]) / ((ku - kd) as f64 * h);
        }
    }
    Ok(LaplaceSolution {
        geometry: *geometry,
        x,
        z,
        v: s.v,
        ex,
        ez,
        conductor: s.fixed,
        residual,
        iterations,
    })
}

/// Left pin at −0.5 V, right pin at +0.5 V.
pub fn solve_differential_mode(geometry: &PinGeometry, tol: f64) -> Result<LaplaceSolution> {
    solve_with_voltages(geometry, -0.5, 0.5, tol)
}

/// |E_x| at x = 0, a distance `probe_depth` (plus the well depth) from the
/// electrode plane, per volt of differential drive (1/m). Linear in z between
/// grid rows.
pub fn field_per_volt(solution: &LaplaceSolution, probe_depth: f64) -> Result<f64> {
    let g = &solution.geometry;
    let d = probe_depth + g.well_depth;
    let z = match g.model {
        ElectrodeModel::Coplanar => d,
        ElectrodeModel::ThickPins => -d,
    };
    if !(d > 0.0) || z <= solution.z[0] || z >= solution.z[solution.nz() - 1] {
        return Err(Error::InvalidInput(format!("probe depth {probe_depth:e} m outside the domain")));
    }
    let cx = (solution.nx() - 1) / 2;
    let t = (z - solution.z[0]) / g.h;
    let k = (t.floor() as usize).min(solution.nz() - 2);
    let f = t - k as f64;
    let (a, b) = (solution.index(cx, k), solution.index(cx, k + 1));
    if solution.conductor[a] || solution.conductor[b] {
        return Err(Error::InvalidInput("probe inside a conductor".into()));
    }
    Ok(((1.0 - f) * solution.ex[a] + f * solution.ex[b]).abs())
}

/// `x_m,z_m,V_V,Ex_V_per_m,Ez_V_per_m`.
pub fn write_csv(solution: &LaplaceSolution, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "x_m,z_m,V_V,Ex_V_per_m,Ez_V_per_m")?;
    for (k, z) in solution.z.iter().enumerate() {
        for (i, x) in solution.x.iter().enumerate() {
            let idx = solution.index(i, k);
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e}",
                x, z, solution.v[idx], solution.ex[idx], solution.ez[idx]
            )?;
        }
    }
    Ok(())
}

/// Observed order p from solutions at h, h/2 and h/4.
pub fn observed_order(coarse: f64, mid: f64, fine: f64) -> f64 {
    ((coarse - mid) / (mid - fine)).abs().log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PinGeometry {
        PinGeometry {
            half_width: 10e-6,
            half_height: 10e-6,
            ground_extent: 5e-6,
            h: 100e-9,
            ..PinGeometry::default()
        }
    }

    const TOL: f64 = 1e-10;

    #[test]
    fn antisymmetry_and_maximum_principle() {
        let s = solve_differential_mode(&small(), TOL).unwrap();
        let nx = s.nx();
        let cx = (nx - 1) / 2;
        let mut worst = 0.0_f64;
        for k in 0..s.nz() {
            assert!(s.v[s.index(cx, k)].abs() < 10.0 * TOL);
            assert!(s.ez[s.index(cx, k)].abs() * s.geometry.h < 10.0 * TOL);
            for i in 0..nx {
                worst = worst.max((s.v[s.index(i, k)] + s.v[s.index(nx - 1 - i, k)]).abs());
            }
        }
        assert!(worst < 10.0 * TOL);
        assert!(s.v.iter().all(|v| v.abs() <= 0.5));
        assert!(s.residual < TOL);
    }

    #[test]
    fn linear_in_drive() {
        let g = small();
        let a = field_per_volt(&solve_differential_mode(&g, TOL).unwrap(), 0.4e-6).unwrap();
        let b = field_per_volt(&solve_with_voltages(&g, -3.0, 3.0, 6.0 * TOL).unwrap(), 0.4e-6).unwrap();
        assert!((b / 6.0 - a).abs() < 1e-6 * a);
    }

    #[test]
    fn field_decays_with_depth() {
        let s = solve_differential_mode(&small(), TOL).unwrap();
        let vals: Vec<f64> = (1..=20).map(|k| field_per_volt(&s, k as f64 * 0.1e-6).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
        // order of magnitude: 1 V across a few microns
        assert!(vals[2] > 5e4 && vals[2] < 1e6, "{}", vals[2]);
    }

    #[test]
    fn flux_balance_away_from_conductors() {
        let s = solve_differential_mode(&small(), TOL).unwrap();
        let h = s.geometry.h;
        // rectangle of grid cells below the pins, using face-centred differences
        let (i0, i1, k0, k1) = (60, 140, 20, 90);
        let v = |i: usize, k: usize| s.v[s.index(i, k)];
        let mut flux = 0.0;
        for i in i0..i1 {
            flux += v(i, k0 - 1) - v(i, k0); // out through bottom
            flux += v(i, k1) - v(i, k1 - 1); // out through top
        }
        for k in k0..k1 {
            flux += v(i0 - 1, k) - v(i0, k);
            flux += v(i1, k) - v(i1 - 1, k);
        }
        let perimeter = 2.0 * ((i1 - i0) + (k1 - k0)) as f64 * h;
        assert!(flux.abs() < 10.0 * TOL * perimeter / h, "{flux:e}");
    }

    #[test]
    fn rejects_nonconforming_grid_and_conductor_probe() {
        let g = PinGeometry {
            h: 0.3e-6,
            ..small()
        };
        assert!(matches!(g.validate(), Err(Error::Geometry(_))));
        let thick = PinGeometry {
            model: ElectrodeModel::ThickPins,
            h: 200e-9,
            ..small()
        };
        let s = solve_differential_mode(&thick, 1e-8).unwrap();
        assert!(field_per_volt(&s, 0.3e-6).is_ok());
        assert!(field_per_volt(&s, -0.1e-6).is_err());
        assert!(field_per_volt(&s, 50e-6).is_err());
    }

    #[test]
    fn deterministic() {
        let a = solve_differential_mode(&small(), TOL).unwrap();
        let b = solve_differential_mode(&small(), TOL).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn second_order_under_refinement() {
        let probe = 0.4e-6;
        let e: Vec<f64> = [200e-9, 100e-9, 50e-9]
            .iter()
            .map(|&h| {
                let g = PinGeometry { h, ..small() };
                field_per_volt(&solve_differential_mode(&g, 1e-11).unwrap(), probe).unwrap()
            })
            .collect();
        let p = observed_order(e[0], e[1], e[2]);
        assert!((p - 2.0).abs() <= 0.2, "order {p}, values {e:?}");
    }

    #[test]
    fn thick_pins_converge_at_corner_limited_order() {
        // re-entrant 270° corners leave an O(h^{4/3}) pollution term
        let e: Vec<f64> = [200e-9, 100e-9, 50e-9]
            .iter()
            .map(|&h| {
                let g = PinGeometry {
                    h,
                    model: ElectrodeModel::ThickPins,
                    ..small()
                };
                field_per_volt(&solve_differential_mode(&g, 1e-11).unwrap(), 0.4e-6).unwrap()
            })
            .collect();
        let p = observed_order(e[0], e[1], e[2]);
        assert!(p > 1.1 && p < 1.6, "order {p}");
    }
}
