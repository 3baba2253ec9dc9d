//! Complete elliptic integral, spherical-harmonic coupling coefficients and
//! the polar-angle grid used by the lateral solver.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Complete elliptic integral of the first kind K(k) for parameter `m = k²`.
pub fn elliptic_k(m: f64) -> Result<f64> {
    if !m.is_finite() || !(0.0..1.0).contains(&m) {
        return Err(Error::Domain(format!(
            "elliptic parameter k² = {m} outside [0, 1)"
        )));
    }
    Ok(agm_k(1.0 - m))
}

/// K evaluated from the complementary parameter `1 − k²`.
///
/// Avoids the cancellation in `1 − k²` when the modulus approaches one, which
/// is where the ring potential is evaluated close to the electrode.
pub fn elliptic_k_complement(mc: f64) -> Result<f64> {
    if !mc.is_finite() || mc <= 0.0 || mc > 1.0 {
        return Err(Error::Domain(format!(
            "complementary elliptic parameter {mc} outside (0, 1]"
        )));
    }
    Ok(agm_k(mc))
}

fn agm_k(mc: f64) -> f64 {
    let mut a = 1.0_f64;
    let mut b = mc.sqrt();
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    PI / (a + b)
}

fn check_lm(l: i64, m: i64) -> Result<()> {
    if l < 0 || m.abs() > l {
        return Err(Error::Domain(format!("invalid (l, m) = ({l}, {m})")));
    }
    Ok(())
}

/// Unchecked ⟨Y_{l+1,m}|cosθ|Y_{l,m}⟩; evaluates to zero at l = |m| − 1.
#[inline]
pub(crate) fn cos_coef(l: i64, m: i64) -> f64 {
    if l < m.abs() {
        return 0.0;
    }
    let lf = l as f64;
    let mf = m as f64;
    (((lf + 1.0).powi(2) - mf * mf) / ((2.0 * lf + 1.0) * (2.0 * lf + 3.0))).sqrt()
}

/// ⟨Y_{l+1,m}|cosθ|Y_{l,m}⟩ = sqrt(((l+1)² − m²)/((2l+1)(2l+3))).
pub fn ylm_cos_coupling(l: i64, m: i64) -> Result<f64> {
    check_lm(l, m)?;
    Ok(cos_coef(l, m))
}

/// ⟨Y_{l_out,m}|sin²θ|Y_{l_in,m}⟩, built from cos²θ = Σ cos couplings.
pub fn ylm_sin2_coupling(l_out: i64, l_in: i64, m: i64) -> Result<f64> {
    check_lm(l_out, m)?;
    check_lm(l_in, m)?;
    Ok(sin2_coef(l_out, l_in, m))
}

#[inline]
pub(crate) fn sin2_coef(l_out: i64, l_in: i64, m: i64) -> f64 {
    match l_out - l_in {
        0 => {
            let a = cos_coef(l_in, m);
            let b = cos_coef(l_in - 1, m);
            1.0 - a * a - b * b
        }
        2 | -2 => {
            let l = l_out.min(l_in);
            -cos_coef(l + 1, m) * cos_coef(l, m)
        }
        _ => 0.0,
    }
}

/// Half-offset uniform partition of [0, π]: cell centres θ_j = (j + ½)Δθ.
///
/// The centres never touch the poles, so 1/sinθ terms stay finite. Weights are
/// the exact cell integrals of sinθ, so a constant integrates to 2 exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaGrid {
    pub dtheta: f64,
    pub theta: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ThetaGrid {
    /// Grid with `n` cells.
    pub fn with_cells(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("theta grid needs at least one cell".into()));
        }
        let dtheta = PI / n as f64;
        let theta = (0..n).map(|j| (j as f64 + 0.5) * dtheta).collect();
        let weights = (0..n)
            .map(|j| {
                let a = j as f64 * dtheta;
                // cos a − cos(a+dθ) written without cancellation
                2.0 * (a + 0.5 * dtheta).sin() * (0.5 * dtheta).sin()
            })
            .collect();
        Ok(Self {
            dtheta,
            theta,
            weights,
        })
    }

    /// Grid whose spacing is the closest divisor of π to `dtheta`.
    pub fn with_spacing(dtheta: f64) -> Result<Self> {
        if !(dtheta > 0.0 && dtheta <= PI) {
            return Err(Error::InvalidInput(format!("theta spacing {dtheta} not in (0, π]")));
        }
        Self::with_cells(((PI / dtheta).round() as usize).max(1))
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// ∫₀^π f(θ) sinθ dθ for samples on `grid`.
pub fn integrate_theta(values: &[f64], grid: &ThetaGrid) -> Result<f64> {
    if grid.is_empty() || values.is_empty() {
        return Err(Error::InvalidInput("empty theta grid".into()));
    }
    if values.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "{} samples for a grid of {} cells",
            values.len(),
            grid.len()
        )));
    }
    Ok(values.iter().zip(&grid.weights).map(|(f, w)| f * w).sum())
}

/// Normalised polar parts Θ_{l,m}(θ) for l = |m|..=lmax, evaluated at `theta`.
///
/// `Y_{l,m} = Θ_{l,m}(θ)·e^{imφ}` with unit norm on the sphere. Row `l − |m|`
/// of the result holds Θ_{l,m} at every angle.
pub fn legendre_table(m: i64, lmax: i64, theta: &[f64]) -> Vec<Vec<f64>> {
    let am = m.unsigned_abs() as i64;
    if lmax < am {
        return Vec::new();
    }
    let mut n2 = 1.0 / (4.0 * PI);
    for k in 1..=am {
        n2 *= (2 * k + 1) as f64 / (2 * k) as f64;
    }
    let norm = n2.sqrt();
    let rows = (lmax - am + 1) as usize;
    let mut out = vec![vec![0.0; theta.len()]; rows];
    for (j, &t) in theta.iter().enumerate() {
        let x = t.cos();
        let mut prev = 0.0;
        let mut cur = norm * t.sin().powi(am as i32);
        out[0][j] = cur;
        for l in am..lmax {
            let next = (x * cur - cos_coef(l - 1, m) * prev) / cos_coef(l, m);
            prev = cur;
            cur = next;
            out[(l + 1 - am) as usize][j] = cur;
        }
    }
    out
}

/// ψ(θ) = √(2π)·Σ_l c_l Θ_{l,m}(θ), normalised so ∫|ψ|² sinθ dθ = 1 when the
/// coefficient vector has unit norm.
pub fn synthesize(m: i64, coefficients: &[f64], theta: &[f64]) -> Vec<f64> {
    let am = m.abs();
    let lmax = am + coefficients.len() as i64 - 1;
    let table = legendre_table(m, lmax, theta);
    let s = (2.0 * PI).sqrt();
    let mut psi = vec![0.0; theta.len()];
    for (c, row) in coefficients.iter().zip(&table) {
        if *c == 0.0 {
            continue;
        }
        for (p, v) in psi.iter_mut().zip(row) {
            *p += c * v;
        }
    }
    for p in &mut psi {
        *p *= s;
    }
    psi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn k_series(m: f64) -> f64 {
        // K = π/2 Σ [(2n)!/(2^{2n} n!²)]² mⁿ
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 1..50 {
            let r = (2 * n - 1) as f64 / (2 * n) as f64;
            term *= r * r * m;
            sum += term;
        }
        0.5 * PI * sum
    }

    /// Gauss–Legendre nodes and weights on [−1, 1].
    fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            loop {
                let (mut p0, mut p1) = (1.0, 0.0);
                for k in 0..n {
                    let p2 = p1;
                    p1 = p0;
                    p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
                }
                let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
                let dz = p0 / dp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    x[i] = z;
                    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                    break;
                }
            }
        }
        (x, w)
    }

    /// Θ_{l,m} from the explicit associated Legendre three-term recurrence in
    /// (l), independent of the normalised recurrence above.
    fn theta_lm_oracle(l: i64, m: i64, x: f64) -> f64 {
        let am = m.abs();
        let s = (1.0 - x * x).sqrt();
        let mut pmm = 1.0;
        for k in 1..=am {
            pmm *= (2 * k - 1) as f64 * s;
        }
        let p = if l == am {
            pmm
        } else {
            let mut a = pmm;
            let mut b = x * (2 * am + 1) as f64 * pmm;
            for ll in (am + 2)..=l {
                let c = ((2 * ll - 1) as f64 * x * b - (ll + am - 1) as f64 * a) / (ll - am) as f64;
                a = b;
                b = c;
            }
            b
        };
        let mut ratio = 1.0; // (l−|m|)!/(l+|m|)!
        for k in (l - am + 1)..=(l + am) {
            ratio /= k as f64;
        }
        ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt() * p
    }

    fn sphere_matrix_element(l1: i64, l2: i64, m: i64, f: impl Fn(f64) -> f64) -> f64 {
        let (x, w) = gauss_legendre(48);
        2.0 * PI
            * x.iter()
                .zip(&w)
                .map(|(&xi, &wi)| wi * theta_lm_oracle(l1, m, xi) * f(xi) * theta_lm_oracle(l2, m, xi))
                .sum::<f64>()
    }

    #[test]
    fn elliptic_k_values() {
        assert_eq!(elliptic_k(0.0).unwrap(), PI / 2.0);
        assert_relative_eq!(elliptic_k(0.5).unwrap(), 1.854_074_677_301_371_9, max_relative = 1e-14);
        assert!(matches!(elliptic_k(1.0), Err(Error::Domain(_))));
        assert!(elliptic_k(-0.1).is_err());
        assert!(elliptic_k(f64::NAN).is_err());
    }

    #[test]
    fn elliptic_k_complement_near_one() {
        // K ≈ ln(4/k') for k' → 0
        let mc: f64 = 1e-20;
        let k = elliptic_k_complement(mc).unwrap();
        assert_relative_eq!(k, (4.0 / mc.sqrt()).ln(), max_relative = 1e-12);
    }

    #[test]
    fn elliptic_k_matches_series() {
        for i in 0..=50 {
            let m = 0.5 * i as f64 / 50.0;
            assert_relative_eq!(elliptic_k(m).unwrap(), k_series(m), max_relative = 1e-12);
        }
    }

    #[test]
    fn cos_coupling_examples() {
        assert_relative_eq!(ylm_cos_coupling(0, 0).unwrap(), 1.0 / 3f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(ylm_cos_coupling(1, 1).unwrap(), 1.0 / 5f64.sqrt(), max_relative = 1e-15);
        assert!(matches!(ylm_cos_coupling(5, 6), Err(Error::Domain(_))));
    }

    #[test]
    fn sin2_coupling_examples() {
        assert_relative_eq!(ylm_sin2_coupling(0, 0, 0).unwrap(), 2.0 / 3.0, max_relative = 1e-15);
        assert_eq!(ylm_sin2_coupling(3, 0, 0).unwrap(), 0.0);
        let expect = -(1.0 / 3f64.sqrt()) * (2.0 / 15f64.sqrt());
        assert_relative_eq!(ylm_sin2_coupling(2, 0, 0).unwrap(), expect, max_relative = 1e-14);
        assert!(ylm_sin2_coupling(1, 1, 2).is_err());
    }

    #[test]
    fn couplings_match_sphere_quadrature() {
        for l in 0..=20_i64 {
            for m in -l..=l {
                let c = ylm_cos_coupling(l, m).unwrap();
                let q = sphere_matrix_element(l + 1, l, m, |x| x);
                assert!((c - q).abs() < 1e-10, "cos l={l} m={m}: {c} vs {q}");
                for lo in [l, l + 2] {
                    let s = ylm_sin2_coupling(lo, l, m).unwrap();
                    let q = sphere_matrix_element(lo, l, m, |x| 1.0 - x * x);
                    assert!((s - q).abs() < 1e-10, "sin2 {lo},{l},{m}: {s} vs {q}");
                }
                let q = sphere_matrix_element(l + 1, l, m, |x| 1.0 - x * x);
                assert!((ylm_sin2_coupling(l + 1, l, m).unwrap() - q).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn legendre_table_matches_oracle() {
        let theta = [0.1, 0.7, 1.3, 2.0, 3.0];
        for m in [-3_i64, 0, 1, 2] {
            let t = legendre_table(m, 15, &theta);
            for l in m.abs()..=15 {
                for (j, &th) in theta.iter().enumerate() {
                    let o = theta_lm_oracle(l, m, th.cos());
                    assert!((t[(l - m.abs()) as usize][j] - o).abs() < 1e-11, "l={l} m={m}");
                }
            }
        }
    }

    #[test]
    fn synthesized_states_are_normalised() {
        let grid = ThetaGrid::with_cells(2000).unwrap();
        let c = [0.6, 0.0, 0.8];
        let psi = synthesize(1, &c, &grid.theta);
        let sq: Vec<f64> = psi.iter().map(|p| p * p).collect();
        assert_relative_eq!(integrate_theta(&sq, &grid).unwrap(), 1.0, max_relative = 1e-6);
    }

    #[test]
    fn integrate_theta_examples() {
        let grid = ThetaGrid::with_cells(1000).unwrap();
        let ones = vec![1.0; grid.len()];
        assert_relative_eq!(integrate_theta(&ones, &grid).unwrap(), 2.0, max_relative = 1e-12);
        let c: Vec<f64> = grid.theta.iter().map(|t| t.cos()).collect();
        assert!(integrate_theta(&c, &grid).unwrap().abs() < 1e-12);
        let c2: Vec<f64> = grid.theta.iter().map(|t| t.cos().powi(2)).collect();
        assert_relative_eq!(integrate_theta(&c2, &grid).unwrap(), 2.0 / 3.0, max_relative = 1e-5);
        let empty = ThetaGrid {
            dtheta: 0.1,
            theta: vec![],
            weights: vec![],
        };
        assert!(integrate_theta(&[], &empty).is_err());
    }

    #[test]
    fn integrate_theta_second_order() {
        let f = |t: f64| (3.0 * t).cos().powi(2) * t.exp();
        let err = |n: usize| {
            let g = ThetaGrid::with_cells(n).unwrap();
            let v: Vec<f64> = g.theta.iter().map(|&t| f(t)).collect();
            let fine = ThetaGrid::with_cells(64_000).unwrap();
            let vf: Vec<f64> = fine.theta.iter().map(|&t| f(t)).collect();
            (integrate_theta(&v, &g).unwrap() - integrate_theta(&vf, &fine).unwrap()).abs()
        };
        let order = (err(100) / err(200)).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }

    proptest! {
        #[test]
        fn elliptic_k_monotone(a in 0.0f64..0.999, b in 0.0f64..0.999) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(elliptic_k(lo).unwrap() < elliptic_k(hi).unwrap());
        }

        #[test]
        fn sin2_rows_symmetric(l in 0i64..60, m in -10i64..10) {
            prop_assume!(m.abs() <= l);
            let a = ylm_sin2_coupling(l + 2, l, m).unwrap();
            let b = ylm_sin2_coupling(l, l + 2, m).unwrap();
            prop_assert_eq!(a, b);
            let d = ylm_sin2_coupling(l, l, m).unwrap();
            prop_assert!(d > 0.0 && d <= 1.0);
        }
    }
}
