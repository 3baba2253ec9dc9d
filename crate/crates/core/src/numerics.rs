//! Adaptive quadrature and scalar root bracketing.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
// Gauss weights for the odd Kronrod nodes (indices 1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = WGK[7] * fc;
    let mut rg = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[i] * s;
        if i % 2 == 1 {
            rg += WG[i / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over [a, b].
///
/// Panels are bisected until the summed error estimate falls below
/// `max(abs_tol, rel_tol·|I|)`. Nodes never touch the endpoints, so integrable
/// endpoint singularities are tolerated (slowly); callers with square-root
/// singularities should substitute first.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let max_panels = 4000;
    let (r, e) = gk15(&mut f, a, b);
    let mut panels = vec![(a, b, r, e)];
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Unstable("non-finite integrand".into()));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if panels.len() >= max_panels {
            return Err(Error::NoConvergence {
                iterations: panels.len(),
                last_residual: err,
                history: vec![],
            });
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty panel list");
        let (pa, pb, _, _) = panels.swap_remove(idx);
        let pm = 0.5 * (pa + pb);
        let (r1, e1) = gk15(&mut f, pa, pm);
        let (r2, e2) = gk15(&mut f, pm, pb);
        panels.push((pa, pm, r1, e1));
        panels.push((pm, pb, r2, e2));
    }
}

/// Root of `f` inside a sign-changing bracket [a, b] (Illinois false position
/// with a bisection fallback). Terminates when the bracket is narrower than
/// `x_tol` or `f` hits zero.
pub fn find_root(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, x_tol: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Domain(format!(
            "root not bracketed: f({a:e}) = {fa:e}, f({b:e}) = {fb:e}"
        )));
    }
    let mut side = 0_i8;
    for it in 0..400 {
        if (b - a).abs() <= x_tol {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        // every fourth step bisect, guaranteeing bracket shrinkage
        if it % 4 == 3 || !c.is_finite() || c <= a.min(b) || c >= a.max(b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc == 0.0 {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Golden-section search for the minimiser of a unimodal `f` on [a, b].
pub fn golden_min(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, x_tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a, b);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > x_tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_smooth_function() {
        let v = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-14, 1e-13).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-12);
        let v = integrate(|x: f64| (-x * x).exp(), -8.0, 8.0, 1e-14, 1e-13).unwrap();
        assert_relative_eq!(v, std::f64::consts::PI.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn tolerates_sqrt_endpoint() {
        let v = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-9, 1e-9).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-7);
    }

    #[test]
    fn root_finding() {
        let r = find_root(|x| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert_relative_eq!(r, 2f64.sqrt(), max_relative = 1e-14);
        let r = find_root(|x: f64| x.powi(9) - 1e-3, 0.0, 3.0, 1e-14).unwrap();
        assert_relative_eq!(r, 1e-3f64.powf(1.0 / 9.0), max_relative = 1e-12);
        assert!(find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn golden_section() {
        let x = golden_min(|x| (x - 0.3).powi(2), -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }
}
