//! Damping function Theta(X) = (chi/2pi) int [1 - J0(kappa|X|)] kappa^{-1-alpha} dkappa
//! over the spectral band, and a log-log spline table of it.

use crate::error::{Result, TbError};
use crate::interp::CubicSpline;
use crate::quad::{integrate_breaks, GaussLegendre, Tol};
use crate::special::{bessel_j0, gamma, j0_zero};
use crate::spectrum_medium::SpectrumParams;
use std::f64::consts::PI;

/// 1 - J0(s) without cancellation at small s.
fn one_minus_j0(s: f64) -> f64 {
    if s < 1.0 {
        let q = -0.25 * s * s;
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..30 {
            let kf = k as f64;
            term *= q / (kf * kf);
            sum -= term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        1.0 - bessel_j0(s)
    }
}

/// int_0^inf (1 - J0(s)) s^{-1-alpha} ds
fn full_integral(alpha: f64) -> f64 {
    2f64.powf(-alpha) * gamma(1.0 - alpha / 2.0) / (alpha * gamma(1.0 + alpha / 2.0))
}

/// int_A^inf J0(s) s^{-1-alpha} ds by panels between zeros with iterated
/// averaging of the alternating partial sums.
fn bessel_tail(alpha: f64, a: f64) -> f64 {
    let gl = GaussLegendre::new(16);
    let f = |s: f64| bessel_j0(s) * s.powf(-1.0 - alpha);
    let mut m = ((a / PI) + 0.25).floor() as usize;
    while j0_zero(m.max(1)) <= a {
        m += 1;
    }
    let mut lo = a;
    let mut acc = 0.0;
    let mut sums = Vec::with_capacity(256);
    for j in m..m + 200 {
        let hi = j0_zero(j);
        acc += gl.integrate(f, lo, hi);
        sums.push(acc);
        lo = hi;
    }
    let mut s = sums[sums.len() - 8..].to_vec();
    while s.len() > 1 {
        s = s.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    s[0]
}

/// int_0^A (1 - J0(s)) s^{-1-alpha} ds
pub(crate) fn damping_integral(alpha: f64, a: f64) -> Result<f64> {
    if a <= 0.0 {
        return Ok(0.0);
    }
    if a < 1e-3 {
        return Ok(a.powf(2.0 - alpha) / (4.0 * (2.0 - alpha)) - a.powf(4.0 - alpha) / (64.0 * (4.0 - alpha)));
    }
    if a > 60.0 {
        return Ok(full_integral(alpha) - a.powf(-alpha) / alpha + bessel_tail(alpha, a));
    }
    let mut breaks = vec![0.0];
    let mut m = 1;
    while j0_zero(m) < a {
        breaks.push(j0_zero(m));
        m += 1;
    }
    breaks.push(a);
    let mut f = |s: f64| one_minus_j0(s) * s.powf(-1.0 - alpha);
    Ok(integrate_breaks(&mut f, &breaks, Tol::new(1e-15, 1e-12))?.value)
}

fn check(p: &SpectrumParams) -> Result<()> {
    p.validate()?;
    if p.alpha >= 1.0 {
        return Err(TbError::Domain(format!("damping needs alpha in (0,1), got {}", p.alpha)));
    }
    Ok(())
}

fn theta_radial(r: f64, p: &SpectrumParams) -> Result<f64> {
    if r == 0.0 {
        return Ok(0.0);
    }
    let mut i = damping_integral(p.alpha, r / p.l_inner)?;
    if !p.outer_is_infinite() {
        i -= damping_integral(p.alpha, r / p.l_outer)?;
    }
    Ok(p.chi * r.powf(p.alpha) / (2.0 * PI) * i)
}

/// Theta(X) by quadrature, using the rescaled integrand in s = kappa |X|.
pub fn theta(x: [f64; 2], p: &SpectrumParams) -> Result<f64> {
    check(p)?;
    theta_radial(x[0].hypot(x[1]), p)
}

/// Theta tabulated on a log grid (64 points per decade) and splined in
/// log-log; exact quadrature is used outside the table.
#[derive(Debug, Clone)]
pub struct ThetaTable {
    pub params: SpectrumParams,
    r_min: f64,
    r_max: f64,
    spline: CubicSpline,
}

impl ThetaTable {
    pub fn new(p: &SpectrumParams, r_max: f64) -> Result<Self> {
        check(p)?;
        let r_min = 1e-3 * p.l_inner;
        let r_max = r_max.max(10.0 * r_min);
        let decades = (r_max / r_min).log10();
        let n = (64.0 * decades).ceil() as usize + 1;
        let mut r: Vec<f64> = (0..n).map(|i| r_min * (r_max / r_min).powf(i as f64 / (n - 1) as f64)).collect();
        // the J0 ripples need a few points per period up to a few hundred l_o
        let lin_top = (400.0 * p.l_inner).min(r_max);
        let mut x = 2.0 * p.l_inner;
        while x < lin_top {
            r.push(x);
            x += 0.4 * p.l_inner;
        }
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        r.dedup_by(|a, b| (*a / *b - 1.0).abs() < 5e-3 * 0.4 / 64.0);
        let n = r.len();
        let lx: Vec<f64> = r.iter().map(|v| v.ln()).collect();
        let ly = lx
            .iter()
            .map(|&l| theta_radial(l.exp(), p).map(|v| v.ln()))
            .collect::<Result<Vec<f64>>>()?;
        if p.chi == 0.0 {
            return Ok(ThetaTable { params: *p, r_min, r_max, spline: CubicSpline::new(lx, vec![0.0; n])? });
        }
        Ok(ThetaTable { params: *p, r_min, r_max, spline: CubicSpline::new(lx, ly)? })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        if self.params.chi == 0.0 || r == 0.0 {
            return 0.0;
        }
        if r < self.r_min {
            // quadratic regime; the table starts at 1e-3 l_o
            let a = self.params.alpha;
            return self.params.chi / (2.0 * PI) * r * r * self.params.l_inner.powf(a - 2.0) / (4.0 * (2.0 - a));
        }
        if r > self.r_max {
            return theta_radial(r, &self.params).unwrap_or(f64::NAN);
        }
        self.spline.eval_unchecked(r.ln()).exp()
    }

    pub fn eval_vec(&self, x: [f64; 2]) -> f64 {
        self.eval(x[0].hypot(x[1]))
    }
}

/// int_0^U Theta(u) du: geometric panels toward zero, unit-l_o panels where
/// the J0 ripples live.
pub fn theta_integral(table: &ThetaTable, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let lo_ = table.params.l_inner;
    let mut br: Vec<f64> = (0..60).map(|j| u * 0.5f64.powi(j)).collect();
    let top = u.min(400.0 * lo_);
    let mut x = 2.0 * lo_;
    while x < top {
        br.push(x);
        x += lo_;
    }
    br.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let gl = GaussLegendre::new(8);
    let mut s = 0.0;
    for w in br.windows(2) {
        if w[1] > w[0] {
            s += gl.integrate(|t| table.eval(t), w[0], w[1]);
        }
    }
    // Theta ~ u^2 below
    s + table.eval(br[0]) * br[0] / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment_theory::d_alpha;
    use proptest::prelude::*;

    fn params() -> SpectrumParams {
        SpectrumParams::new(0.5, 1.0, 0.01, f64::INFINITY).unwrap()
    }

    #[test]
    fn theta_zero_and_symmetry() {
        let p = params();
        assert_eq!(theta([0.0, 0.0], &p).unwrap(), 0.0);
        let a = theta([0.03, -0.02], &p).unwrap();
        assert_eq!(a, theta([-0.03, 0.02], &p).unwrap());
        assert!(theta([1.0, 0.0], &SpectrumParams::new(1.5, 1.0, 0.01, 10.0).unwrap()).is_err());
    }

    #[test]
    fn theta_approaches_power_law() {
        let p = params();
        let d = d_alpha(&p).unwrap();
        // at 100 l_o the correction A^{-alpha}/alpha is still ~10% of the full integral
        let r = 100.0 * p.l_inner;
        let v = theta([r, 0.0], &p).unwrap();
        let expect = 1.0 - 0.2 / full_integral(0.5);
        assert!((v / (d * r.sqrt()) - expect).abs() < 2e-3, "{}", v / (d * r.sqrt()));
        let r = 3e4 * p.l_inner;
        let v = theta([r, 0.0], &p).unwrap();
        assert!((v / (d * r.sqrt()) - 1.0).abs() < 0.02);
        // next order: d r^alpha - chi l_o^alpha / (2 pi alpha)
        let r = 1e4 * p.l_inner;
        let v = theta([r, 0.0], &p).unwrap();
        let asym = d * r.sqrt() - p.l_inner.sqrt() / (PI);
        assert!((v - asym).abs() < 1e-5 * v, "{v} {asym}");
    }

    #[test]
    fn theta_matches_direct_kappa_quadrature() {
        // independent route: integrate in kappa directly with plain GK panels
        let p = SpectrumParams::new(0.3, 2.0, 0.05, 40.0).unwrap();
        for r in [0.01, 0.2, 1.0, 7.0] {
            let f = |k: f64| (1.0 - bessel_j0(k * r)) * k.powf(-1.3);
            let n = 4000;
            let br: Vec<f64> = (0..=n)
                .map(|i| (p.kappa_lo().ln() + (p.kappa_hi() / p.kappa_lo()).ln() * i as f64 / n as f64).exp())
                .collect();
            let v = integrate_breaks(&mut { f }, &br, Tol::new(1e-14, 1e-11)).unwrap().value * p.chi / (2.0 * PI);
            let t = theta([r, 0.0], &p).unwrap();
            assert!((t / v - 1.0).abs() < 1e-7, "r={r}: {t} {v}");
        }
    }

    #[test]
    fn tail_branch_is_continuous() {
        // each branch against plain panel quadrature at the switch points
        for a in [0.2, 0.5, 0.9] {
            for x in [1e-3 * 0.999, 60.0 * 1.001] {
                let mut f = |s: f64| one_minus_j0(s) * s.powf(-1.0 - a);
                let mut br = vec![0.0];
                br.extend((1..).map(j0_zero).take_while(|&z| z < x));
                br.push(x);
                let v = integrate_breaks(&mut f, &br, Tol::new(1e-15, 1e-13)).unwrap().value;
                let b = damping_integral(a, x).unwrap();
                assert!((b / v - 1.0).abs() < 1e-9, "alpha={a} x={x}: {b} {v}");
            }
        }
    }

    #[test]
    fn table_tracks_quadrature() {
        let p = params();
        let t = ThetaTable::new(&p, 100.0).unwrap();
        for r in [1e-6, 3e-4, 0.004, 0.0123, 0.5, 3.3, 77.0, 250.0] {
            let exact = theta([r, 0.0], &p).unwrap();
            assert!((t.eval(r) / exact - 1.0).abs() < 1e-6, "r={r}");
        }
        let zero = ThetaTable::new(&p.with_chi(0.0), 1.0).unwrap();
        assert_eq!(zero.eval(0.3), 0.0);
    }

    #[test]
    fn integral_of_table() {
        let p = params();
        let t = ThetaTable::new(&p, 10.0).unwrap();
        let u = 2.0;
        let gl = GaussLegendre::new(64);
        let mut v = 0.0;
        let edges = [0.0, 0.001, 0.01, 0.1, 0.5, 2.0];
        for w in edges.windows(2) {
            v += gl.integrate(|s| theta([s, 0.0], &p).unwrap(), w[0], w[1]);
        }
        assert!((theta_integral(&t, u) / v - 1.0).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn theta_nondecreasing(r in 1e-4f64..50.0, f in 1.001f64..1.5) {
            let p = params();
            prop_assert!(theta([r * f, 0.0], &p).unwrap() >= theta([r, 0.0], &p).unwrap());
        }
    }
}
