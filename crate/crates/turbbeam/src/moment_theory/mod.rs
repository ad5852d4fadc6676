//! Deterministic moment theory: damping, constants and scales, the profile
//! functions, the Wigner closed form, coherent field, frequency coherence
//! and pulse shape.

mod coherent;
mod kinetic;
mod profiles;
mod pulse;
mod theta;
mod wigner;

pub use profiles::{
    fit_gaussian_width, heavy_tail_ratio, kolmogorov_constants, phi_alpha, phi_deficit, psi_alpha, psi_profile, psi_zero,
    q_alpha, r_alpha, zeta_fit, KolmogorovConstants, ProfileKind, ProfileTable, CHI_KOLMOGOROV_PER_CN2,
};
pub use coherent::{solve_coherent, solve_coherent_opts, solve_coherent_with, CoherentOptions};
pub use kinetic::{xi_kinetic, xi_table, KineticResolution, XiSample, XiTable};
pub use pulse::{pulse_intensity, pulse_rms_width, PulseCurve, PULSE_REGIME_MAX};
pub use theta::{theta, theta_integral, ThetaTable};
pub use wigner::{
    covariance_closed_form, ClosedForm, covariance_strong, mean_intensity_closed_form, mean_intensity_strong,
    mean_spectrum_strong, source_wigner_hat, wigner_closed_form, RegimeCheck, StrongValue,
};

use crate::error::{Result, TbError};
use crate::special::gamma;
use crate::spectrum_medium::{tail_coefficient, SpectrumParams};
use serde::{Deserialize, Serialize};

/// d_alpha = chi Gamma(1-alpha/2) / (2^{1+alpha} pi alpha Gamma(1+alpha/2)),
/// the coefficient of |X|^alpha in the large-offset damping.
pub fn d_alpha(p: &SpectrumParams) -> Result<f64> {
    let a = p.alpha;
    if !(a > 0.0 && a < 2.0) || a == 1.0 {
        return Err(TbError::Domain(format!("d_alpha needs alpha in (0,1)U(1,2), got {a}")));
    }
    Ok(p.chi * gamma(1.0 - a / 2.0)
        / (2f64.powf(1.0 + a) * std::f64::consts::PI * a * gamma(1.0 + a / 2.0)))
}

/// Constants and range-dependent scales of the moment theory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryScales {
    pub alpha: f64,
    pub chi: f64,
    /// long-range covariance coefficient; NaN when alpha > 1
    pub c_alpha: f64,
    pub h: f64,
    /// NaN when alpha > 1
    pub c_h: f64,
    pub d_alpha: f64,
}

impl TheoryScales {
    pub fn new(p: &SpectrumParams) -> Result<Self> {
        p.validate()?;
        let a = p.alpha;
        let d = d_alpha(p)?;
        let (c_alpha, c_h) = if a < 1.0 {
            let mut q = *p;
            q.l_outer = f64::INFINITY;
            let c = tail_coefficient(&q)?;
            (c, (c / (a * (a + 1.0))).sqrt() / (2.0 * std::f64::consts::PI))
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(TheoryScales { alpha: a, chi: p.chi, c_alpha, h: (1.0 + a) / 2.0, c_h, d_alpha: d })
    }

    /// The travel-time and coherent-wave results need alpha in (0,1).
    pub fn require_long_range(&self) -> Result<()> {
        if self.alpha < 1.0 {
            Ok(())
        } else {
            Err(TbError::Domain(format!("alpha={} has no long-range regime", self.alpha)))
        }
    }

    /// Beam radius R(z) = [d k^{2-alpha} z^{1+alpha} / (1+alpha)]^{1/alpha}.
    pub fn r(&self, z: f64, k: f64) -> f64 {
        let a = self.alpha;
        (self.d_alpha * k.powf(2.0 - a) * z.powf(1.0 + a) / (1.0 + a)).powf(1.0 / a)
    }

    /// Wave-vector radius Q(z) = (d k^2 z)^{1/alpha}.
    pub fn q(&self, z: f64, k: f64) -> f64 {
        (self.d_alpha * k * k * z).powf(1.0 / self.alpha)
    }

    /// Decoherence length 1/Q(z).
    pub fn decoherence_length(&self, z: f64, k: f64) -> f64 {
        1.0 / self.q(z, k)
    }

    /// Omega_psi = 2 Omega / (Q R) with k = Omega / c_o.
    pub fn omega_psi(&self, z: f64, omega: f64, c_o: f64) -> Result<f64> {
        if omega == 0.0 {
            return Err(TbError::Domain("Omega must be nonzero".into()));
        }
        let k = omega.abs() / c_o;
        Ok(2.0 * omega.abs() / (self.q(z, k) * self.r(z, k)))
    }

    /// Decoherence frequency of the eps-resolved field, c_o eps^alpha / (C_H z^H).
    pub fn omega_phi(&self, z: f64, eps: f64, c_o: f64) -> Result<f64> {
        self.require_long_range()?;
        Ok(c_o * eps.powf(self.alpha) / (self.c_h * z.powf(self.h)))
    }

    /// Scattering mean free path eps^{2 alpha/(1+alpha)} (C_H k)^{-1/H}.
    pub fn mean_free_path(&self, k: f64, eps: f64) -> Result<f64> {
        self.require_long_range()?;
        Ok(eps.powf(2.0 * self.alpha / (1.0 + self.alpha)) * (self.c_h * k).powf(-1.0 / self.h))
    }
}

/// Builds the scales; Omega enters only through the evaluators.
pub fn scales(p: &SpectrumParams, omega: f64) -> Result<TheoryScales> {
    if omega == 0.0 || !omega.is_finite() {
        return Err(TbError::Domain("Omega must be finite and nonzero".into()));
    }
    TheoryScales::new(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn with_d(alpha: f64, d: f64) -> TheoryScales {
        let p = SpectrumParams::new(alpha, 1.0, 0.1, if alpha < 1.0 { f64::INFINITY } else { 10.0 }).unwrap();
        let s = TheoryScales::new(&p).unwrap();
        let p2 = p.with_chi(d / s.d_alpha);
        TheoryScales::new(&p2).unwrap()
    }

    #[test]
    fn d_alpha_kolmogorov() {
        let p = SpectrumParams::new(5.0 / 3.0, 1.0, 0.01, 10.0).unwrap();
        let d = d_alpha(&p).unwrap();
        assert!((d - 0.178).abs() < 1e-3, "{d}");
        let cn = 4.0 * (2.0 * std::f64::consts::PI).powi(3) * 0.033;
        let dk = d_alpha(&p.with_chi(cn)).unwrap();
        assert!((dk / 5.828 - 1.0).abs() < 5e-3, "{dk}");
        let d2 = d_alpha(&p.with_chi(2.0)).unwrap();
        assert!((d2 - 2.0 * d).abs() < 1e-15);
    }

    #[test]
    fn d_alpha_matches_damping_integral() {
        // (chi/2pi) int_0^inf (1 - J0(s)) s^{-1-alpha} ds, computed independently
        let p = SpectrumParams::new(0.5, 1.0, 0.1, f64::INFINITY).unwrap();
        let f = |s: f64| (1.0 - crate::special::bessel_j0(s)) * s.powf(-1.5);
        let mut breaks = vec![0.0];
        breaks.extend((1..400).map(crate::special::j0_zero));
        let head = crate::quad::integrate_breaks(&mut { f }, &breaks, crate::quad::Tol::new(1e-12, 1e-12)).unwrap().value;
        let a = *breaks.last().unwrap();
        // tail: int_a^inf s^{-3/2} ds minus a negligible oscillatory part
        let v = (head + 2.0 / a.sqrt()) / (2.0 * std::f64::consts::PI);
        assert!((v / d_alpha(&p).unwrap() - 1.0).abs() < 1e-4, "{v}");
    }

    #[test]
    fn scales_direct_substitution() {
        let s = with_d(0.5, 1.0);
        assert!((s.r(1.0, 1.0) - 4.0 / 9.0).abs() < 1e-14);
        assert!((s.q(1.0, 1.0) - 1.0).abs() < 1e-14);
        assert!((s.decoherence_length(1.0, 1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kolmogorov_exponents() {
        let s = with_d(5.0 / 3.0, 0.7);
        let slope = |f: &dyn Fn(f64) -> f64| (f(2.0).ln() - f(1.0).ln()) / 2f64.ln();
        assert!((slope(&|z| s.r(z, 3.0)) - 1.6).abs() < 1e-10);
        assert!((slope(&|k| s.r(1.3, k)) - 0.2).abs() < 1e-10);
        assert!((slope(&|z| s.q(z, 3.0)) - 0.6).abs() < 1e-10);
        assert!((slope(&|k| s.q(1.3, k)) - 1.2).abs() < 1e-10);
    }

    #[test]
    fn long_range_constants() {
        let s = with_d(0.5, 1.0);
        assert!((s.h - 0.75).abs() < 1e-15);
        let p = SpectrumParams::new(0.5, 1.0, 0.1, f64::INFINITY).unwrap();
        let c = TheoryScales::new(&p).unwrap();
        assert!((c.c_alpha - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        let ch = (c.c_alpha / 0.75).sqrt() / (2.0 * std::f64::consts::PI);
        assert!((c.c_h - ch).abs() < 1e-15);
        assert!(c.omega_phi(1.0, 0.1, 1.0).unwrap() > 0.0);
        let k = with_d(1.5, 1.0);
        assert!(k.require_long_range().is_err() && k.omega_phi(1.0, 0.1, 1.0).is_err());
        assert!(scales(&p, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn scale_identities(a in 0.05f64..1.95, d in 0.01f64..10.0, k in 0.1f64..100.0, z in 0.01f64..10.0) {
            prop_assume!((a - 1.0).abs() > 0.02);
            let s = with_d(a, d);
            let lhs = z / (k * s.r(z, k)) * s.q(z, k);
            prop_assert!((lhs / (1.0 + a).powf(1.0 / a) - 1.0).abs() < 1e-12);
            let om = 2.0 * k / (s.q(z, k) * s.r(z, k));
            prop_assert!((s.omega_psi(z, k, 1.0).unwrap() / om - 1.0).abs() < 1e-12);
            prop_assert!(s.r(z * 1.1, k) > s.r(z, k) && s.q(z * 1.1, k) > s.q(z, k));
            let s2 = with_d(a, d * 1.1);
            prop_assert!(s2.r(z, k) > s.r(z, k) && s2.q(z, k) > s.q(z, k));
            prop_assert!((s.h > 0.5 && s.h < 1.0) == (a < 1.0));
        }
    }
}
