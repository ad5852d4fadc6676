//! Mean Wigner transform along characteristics, its intensity and
//! covariance marginals, and the strong-fluctuation profile forms.

use super::profiles::{phi_alpha, psi_alpha};
use super::theta::{theta_integral, ThetaTable};
use super::TheoryScales;
use crate::error::{Result, TbError};
use crate::fft::C64;
use crate::paraxial_direct::{Profile, SourceModel};
use crate::quad::{gauss_hermite, integrate_breaks, GaussLegendre, Tol};
use crate::special::{bessel_j0, j0_zero};
use crate::spectrum_medium::SpectrumParams;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Fourier transform in X of S(X+Y/2) conj S(X-Y/2), per unit spectral
/// amplitude. Closed form for the Gaussian profile, a midpoint lattice sum
/// otherwise.
pub fn source_wigner_hat(source: &SourceModel, q: [f64; 2], y: [f64; 2]) -> f64 {
    let r = source.r_s;
    match source.profile {
        Profile::Gaussian => {
            let q2 = q[0] * q[0] + q[1] * q[1];
            let y2 = y[0] * y[0] + y[1] * y[1];
            PI * r * r * (-0.25 * r * r * q2).exp() * (-y2 / (4.0 * r * r)).exp()
        }
        prof => {
            let n = 256;
            let half = 4.0 * r;
            let h = 2.0 * half / n as f64;
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let x = [-half + (i as f64 + 0.5) * h, -half + (j as f64 + 0.5) * h];
                    let p = [x[0] + 0.5 * y[0], x[1] + 0.5 * y[1]];
                    let m = [x[0] - 0.5 * y[0], x[1] - 0.5 * y[1]];
                    let a = prof.eval((p[0] * p[0] + p[1] * p[1]) / (r * r));
                    let b = prof.eval((m[0] * m[0] + m[1] * m[1]) / (r * r));
                    s += a * b * (q[0] * x[0] + q[1] * x[1]).cos();
                }
            }
            s * h * h
        }
    }
}

/// Closed-form evaluator at one frequency and range; holds the tabulated
/// damping so repeated probes share it. Gaussian sources only.
pub struct ClosedForm<'a> {
    source: &'a SourceModel,
    k: f64,
    z: f64,
    table: ThetaTable,
    gl: GaussLegendre,
}

impl<'a> ClosedForm<'a> {
    pub fn new(source: &'a SourceModel, omega: f64, z: f64, params: &SpectrumParams) -> Result<Self> {
        source.validate()?;
        if source.profile != Profile::Gaussian {
            return Err(TbError::InvalidParams("closed forms need a Gaussian profile".into()));
        }
        if !(z >= 0.0) {
            return Err(TbError::InvalidParams(format!("range z={z} must be >= 0")));
        }
        let k = source.k(omega);
        let r = source.r_s;
        let reach = 40.0 * (r + z / (k * r)) + 1e3 * params.l_inner;
        let table = ThetaTable::new(params, reach)?;
        Ok(ClosedForm { source, k, z, table, gl: GaussLegendre::new(24) })
    }

    /// (k^2/4) int_0^z Theta(y0 + v s) ds, split at the closest approach.
    fn damping(&self, y0: [f64; 2], v: [f64; 2]) -> f64 {
        if self.table.params.chi == 0.0 || self.z == 0.0 {
            return 0.0;
        }
        let v2 = v[0] * v[0] + v[1] * v[1];
        let t0 = if v2 > 0.0 { (-(y0[0] * v[0] + y0[1] * v[1]) / v2).clamp(0.0, self.z) } else { 0.0 };
        let f = |s: f64| self.table.eval_vec([y0[0] + v[0] * s, y0[1] + v[1] * s]);
        let mut acc = 0.0;
        if t0 > 0.0 {
            acc += self.gl.integrate(f, 0.0, t0);
        }
        if t0 < self.z {
            acc += self.gl.integrate(f, t0, self.z);
        }
        0.25 * self.k * self.k * acc
    }
}

/// Mean Wigner transform at (X, kappa) and range z, per unit spectral
/// amplitude.
pub fn wigner_closed_form(
    source: &SourceModel,
    omega: f64,
    x: [f64; 2],
    kappa: [f64; 2],
    z: f64,
    params: &SpectrumParams,
) -> Result<f64> {
    Ok(ClosedForm::new(source, omega, z, params)?.wigner(x, kappa))
}

/// Mean intensity int W dkappa/(2pi)^2 at X.
pub fn mean_intensity_closed_form(
    source: &SourceModel,
    omega: f64,
    x: [f64; 2],
    z: f64,
    params: &SpectrumParams,
) -> Result<f64> {
    ClosedForm::new(source, omega, z, params)?.intensity(x)
}

/// Mean mutual coherence E[psi(X+Y/2) conj psi(X-Y/2)] per unit spectral
/// amplitude.
pub fn covariance_closed_form(
    source: &SourceModel,
    omega: f64,
    x: [f64; 2],
    y: [f64; 2],
    z: f64,
    params: &SpectrumParams,
) -> Result<C64> {
    Ok(ClosedForm::new(source, omega, z, params)?.covariance(x, y))
}

impl ClosedForm<'_> {
    /// 4D Gauss-Hermite over (q, Y) with the damping integrated along each
    /// characteristic.
    pub fn wigner(&self, x: [f64; 2], kappa: [f64; 2]) -> f64 {
        let (k, r, z) = (self.k, self.source.r_s, self.z);
        let (gx, gw) = gauss_hermite(18);
        let xs = [x[0] - kappa[0] * z / k, x[1] - kappa[1] * z / k];
        let mut acc = 0.0;
        for (i1, u1) in gx.iter().enumerate() {
            for (i2, u2) in gx.iter().enumerate() {
                let q = [2.0 * u1 / r, 2.0 * u2 / r];
                let wq = gw[i1] * gw[i2];
                let ph_q = q[0] * xs[0] + q[1] * xs[1];
                let v = [q[0] / k, q[1] / k];
                for (j1, v1) in gx.iter().enumerate() {
                    for (j2, v2) in gx.iter().enumerate() {
                        let y = [2.0 * r * v1, 2.0 * r * v2];
                        let ph = ph_q - (kappa[0] * y[0] + kappa[1] * y[1]);
                        acc += wq * gw[j1] * gw[j2] * ph.cos() * (-self.damping(y, v)).exp();
                    }
                }
            }
        }
        acc * 16.0 * PI * r * r / (4.0 * PI * PI)
    }

    /// Radial form (1/2pi) int q J0(q|X|) W0(q, qz/k) exp[-(k^3/4q) int_0^{qz/k} Theta] dq.
    pub fn intensity(&self, x: [f64; 2]) -> Result<f64> {
        let (k, r, z) = (self.k, self.source.r_s, self.z);
        let xn = x[0].hypot(x[1]);
        let sig2 = r * r / 4.0 + z * z / (4.0 * k * k * r * r);
        let top = (40.0 / sig2).sqrt();
        let mut br: Vec<f64> = (0..=60).map(|i| top * 1e-6 * (1e6f64).powf(i as f64 / 60.0)).collect();
        br.push(0.0);
        if xn > 0.0 {
            br.extend((1..).map(|m| j0_zero(m) / xn).take_while(|&v| v < top));
        }
        br.sort_by(|a, b| a.partial_cmp(b).unwrap());
        br.dedup();
        let chi = self.table.params.chi;
        let mut f = |q: f64| {
            if q == 0.0 {
                return 0.0;
            }
            let w = source_wigner_hat(self.source, [q, 0.0], [q * z / k, 0.0]);
            let d = if chi == 0.0 { 0.0 } else { k * k * k / (4.0 * q) * theta_integral(&self.table, q * z / k) };
            q * bessel_j0(q * xn) * w * (-d).exp()
        };
        let tol = Tol { abs: 1e-14 * PI * r * r, rel: 1e-9, max_intervals: 4 * br.len() + 4000 };
        Ok(integrate_breaks(&mut f, &br, tol)?.value / (2.0 * PI))
    }

    /// 2D q quadrature, Gauss-Hermite about the centre of the source Gaussian.
    pub fn covariance(&self, x: [f64; 2], y: [f64; 2]) -> C64 {
        let (k, r, z) = (self.k, self.source.r_s, self.z);
        let a = r * r / 4.0 + z * z / (4.0 * k * k * r * r);
        let g = z / (4.0 * a * k * r * r);
        let q0 = [g * y[0], g * y[1]];
        let y2 = y[0] * y[0] + y[1] * y[1];
        let pre = PI * r * r / a * (a * (q0[0] * q0[0] + q0[1] * q0[1]) - y2 / (4.0 * r * r)).exp();
        let (gx, gw) = gauss_hermite(40);
        let sa = a.sqrt();
        let mut acc = C64::new(0.0, 0.0);
        for (i, u1) in gx.iter().enumerate() {
            for (j, u2) in gx.iter().enumerate() {
                let q = [q0[0] + u1 / sa, q0[1] + u2 / sa];
                let d = self.damping(y, [-q[0] / k, -q[1] / k]);
                acc += C64::from_polar(gw[i] * gw[j] * (-d).exp(), q[0] * x[0] + q[1] * x[1]);
            }
        }
        acc * pre / (4.0 * PI * PI)
    }
}

/// Ratios behind the strong-fluctuation gate l_o << 1/Q << r_s << R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeCheck {
    pub inner_over_decoherence: f64,
    pub decoherence_over_source: f64,
    pub source_over_radius: f64,
    pub factor: f64,
    pub ok: bool,
}

impl RegimeCheck {
    pub fn evaluate(source: &SourceModel, omega: f64, z: f64, params: &SpectrumParams, factor: f64) -> Result<Self> {
        let s = TheoryScales::new(params)?;
        let k = source.k(omega);
        let q = s.q(z, k);
        let rr = s.r(z, k);
        let a = params.l_inner * q;
        let b = 1.0 / (q * source.r_s);
        let c = source.r_s / rr;
        let lim = 1.0 / factor;
        Ok(RegimeCheck {
            inner_over_decoherence: a,
            decoherence_over_source: b,
            source_over_radius: c,
            factor,
            ok: a <= lim && b <= lim && c <= lim,
        })
    }
}

/// A strong-fluctuation value with its regime diagnostics; callers decide
/// whether an out-of-regime value is usable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongValue {
    pub value: f64,
    pub regime: RegimeCheck,
}

fn strong_setup(source: &SourceModel, omega: f64, z: f64, params: &SpectrumParams) -> Result<(f64, f64, f64, RegimeCheck)> {
    let s = TheoryScales::new(params)?;
    let k = source.k(omega);
    let regime = RegimeCheck::evaluate(source, omega, z, params, 10.0)?;
    let w00 = source_wigner_hat(source, [0.0, 0.0], [0.0, 0.0]);
    Ok((w00, s.r(z, k), s.q(z, k), regime))
}

/// W0(0,0)/R^2 Psi_alpha(|X|/R)
pub fn mean_intensity_strong(source: &SourceModel, omega: f64, z: f64, params: &SpectrumParams, x: [f64; 2]) -> Result<StrongValue> {
    let (w, rr, _, regime) = strong_setup(source, omega, z, params)?;
    let v = w / (rr * rr) * psi_alpha(x[0].hypot(x[1]) / rr, params.alpha)?;
    Ok(StrongValue { value: v, regime })
}

/// (2pi)^2 W0(0,0)/Q^2 Psi_alpha(|kappa|/Q)
pub fn mean_spectrum_strong(source: &SourceModel, omega: f64, z: f64, params: &SpectrumParams, kappa: [f64; 2]) -> Result<StrongValue> {
    let (w, _, q, regime) = strong_setup(source, omega, z, params)?;
    let v = 4.0 * PI * PI * w / (q * q) * psi_alpha(kappa[0].hypot(kappa[1]) / q, params.alpha)?;
    Ok(StrongValue { value: v, regime })
}

/// W0(0,0)/R^2 Phi_alpha(X/R, Y Q)
pub fn covariance_strong(
    source: &SourceModel,
    omega: f64,
    z: f64,
    params: &SpectrumParams,
    x: [f64; 2],
    y: [f64; 2],
) -> Result<StrongValue> {
    let (w, rr, q, regime) = strong_setup(source, omega, z, params)?;
    let v = w / (rr * rr) * phi_alpha([x[0] / rr, x[1] / rr], [y[0] * q, y[1] * q], params.alpha)?;
    Ok(StrongValue { value: v, regime })
}
