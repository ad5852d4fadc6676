//! Mean intensity envelope of the pulse at the beam centre:
//! I(T) = c_o^2 |S|^2 / (16 pi^{3/2} B R^2) int dW exp(-W^2/4B^2 - i T W) Xi(W / Omega_psi).

use super::kinetic::XiTable;
use super::TheoryScales;
use crate::error::{Result, TbError};
use crate::paraxial_direct::{Lattice2, Profile, SourceModel};
use crate::quad::GaussLegendre;
use crate::spectrum_medium::SpectrumParams;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest B / Omega_psi accepted.
pub const PULSE_REGIME_MAX: f64 = 2.0;

/// The Gaussian weight is dropped below this.
const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseCurve {
    pub t: Vec<f64>,
    pub intensity: Vec<f64>,
    /// B / Omega_psi
    pub b_ratio: f64,
    pub omega_psi: f64,
    pub bandwidth: f64,
    /// c_o^2 int |S|^2 / (16 pi^{3/2} B R^2)
    pub prefactor: f64,
}

impl PulseCurve {
    /// The narrowband form prefactor * 2 sqrt(pi) B Xi(0) exp(-B^2 T^2).
    pub fn narrowband(&self, xi0: f64) -> Vec<f64> {
        let b = self.bandwidth;
        self.t.iter().map(|t| self.prefactor * 2.0 * PI.sqrt() * b * xi0 * (-b * b * t * t).exp()).collect()
    }
}

/// int |S(X/r_s)|^2 dX
fn profile_power(source: &SourceModel) -> f64 {
    match source.profile {
        Profile::Gaussian => PI * source.r_s * source.r_s,
        Profile::SuperGaussian { .. } => {
            let r = source.r_s;
            let n = 512;
            let lat = Lattice2::new(n, n, 8.0 * r / n as f64);
            let d2 = lat.dx * lat.dx;
            (0..lat.len())
                .map(|i| {
                    let x = lat.coord(i);
                    source.profile.eval((x[0] * x[0] + x[1] * x[1]) / (r * r)).powi(2)
                })
                .sum::<f64>()
                * d2
        }
    }
}

/// Evaluates I(T, z) on t_grid from a tabulated Xi_alpha.
pub fn pulse_intensity(source: &SourceModel, params: &SpectrumParams, z: f64, t_grid: &[f64], xi: &XiTable) -> Result<PulseCurve> {
    source.validate()?;
    if (xi.alpha - params.alpha).abs() > 1e-12 {
        return Err(TbError::Mismatch(format!("Xi table for alpha={} used with alpha={}", xi.alpha, params.alpha)));
    }
    if !(z > 0.0) {
        return Err(TbError::InvalidParams(format!("range z={z} must be > 0")));
    }
    let sc = TheoryScales::new(params)?;
    let k = source.k(source.omega_o);
    let omega_psi = sc.omega_psi(z, source.omega_o, source.c_o)?;
    let b = source.bandwidth;
    let ratio = b / omega_psi;
    if ratio > PULSE_REGIME_MAX {
        return Err(TbError::Domain(format!("B/Omega_psi = {ratio:.3} outside the regime B <~ Omega_psi")));
    }
    let w_max = 2.0 * b * (-WEIGHT_FLOOR.ln()).sqrt();
    let k_need = w_max / omega_psi;
    if k_need > xi.k_max() * (1.0 + 1e-12) {
        return Err(TbError::Interpolation(format!(
            "needs Xi up to k_tilde = {k_need:.3}, table ends at {}",
            xi.k_max()
        )));
    }
    let r = sc.r(z, k);
    let prefactor = source.c_o * source.c_o * profile_power(source) / (16.0 * PI.powf(1.5) * b * r * r);
    // panels follow the table knots so the cubic pieces are integrated smoothly
    let mut edges: Vec<f64> = xi.samples.iter().map(|s| s.k_tilde * omega_psi).filter(|&w| w < w_max).collect();
    edges.push(w_max);
    let gl = GaussLegendre::new(16);
    let mut nodes = Vec::new();
    for e in edges.windows(2) {
        let sub = (((e[1] - e[0]) / (0.25 * b)).ceil() as usize).max(1);
        let h = (e[1] - e[0]) / sub as f64;
        for s in 0..sub {
            for (w, wt) in gl.mapped(e[0] + s as f64 * h, e[0] + (s + 1) as f64 * h) {
                let v = xi.eval(w / omega_psi)?;
                nodes.push((w, wt * (-w * w / (4.0 * b * b)).exp(), v));
            }
        }
    }
    let intensity = t_grid
        .iter()
        .map(|&t| {
            // Xi(-k) = conj Xi(k) folds the integral onto W > 0
            2.0 * prefactor * nodes.iter().map(|(w, g, v)| g * ((t * w).cos() * v.re + (t * w).sin() * v.im)).sum::<f64>()
        })
        .collect();
    Ok(PulseCurve { t: t_grid.to_vec(), intensity, b_ratio: ratio, omega_psi, bandwidth: b, prefactor })
}

/// sqrt(int (T - Tbar)^2 I / int I) by the trapezoid rule on the curve's grid.
pub fn pulse_rms_width(curve: &PulseCurve) -> Result<f64> {
    let (t, y) = (&curve.t, &curve.intensity);
    if t.len() < 3 || t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(TbError::InsufficientData("need an increasing T grid with >= 3 points".into()));
    }
    let trap = |f: &dyn Fn(usize) -> f64| (1..t.len()).map(|i| 0.5 * (t[i] - t[i - 1]) * (f(i) + f(i - 1))).sum::<f64>();
    let m0 = trap(&|i| y[i]);
    if !(m0 > 0.0) {
        return Err(TbError::InsufficientData("pulse curve has no positive mass".into()));
    }
    let m1 = trap(&|i| t[i] * y[i]) / m0;
    let m2 = trap(&|i| (t[i] - m1).powi(2) * y[i]) / m0;
    Ok(m2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::C64;
    use crate::moment_theory::XiSample;

    fn synthetic(alpha: f64, k_max: f64, f: impl Fn(f64) -> C64) -> XiTable {
        let samples = (0..=(k_max * 8.0) as usize)
            .map(|i| {
                let k = i as f64 / 8.0;
                XiSample { k_tilde: k, value: f(k), coarse: f(k), rel_change: 0.0, flagged: false }
            })
            .collect();
        XiTable::from_samples(alpha, samples).unwrap()
    }

    fn setup(ratio: f64) -> (SourceModel, SpectrumParams, f64) {
        let p = SpectrumParams::new(0.5, 1e-3, 1e-4, f64::INFINITY).unwrap();
        let z = 100.0;
        let probe = SourceModel::gaussian(0.05, 1e4, 1.0, 1.0).unwrap();
        let op = TheoryScales::new(&p).unwrap().omega_psi(z, probe.omega_o, probe.c_o).unwrap();
        (SourceModel::gaussian(0.05, 1e4, ratio * op, 1.0).unwrap(), p, z)
    }

    fn grid(b: f64, span: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| -span / b + 2.0 * span / b * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn narrowband_limit_is_gaussian() {
        let (s, p, z) = setup(0.01);
        let phi = crate::moment_theory::psi_zero(0.5);
        // a Xi with O(1) structure on the k_tilde scale
        let xi = synthetic(0.5, 1.0, |k| C64::new(phi * (-0.3 * k * k).exp(), 0.05 * phi * k));
        let c = pulse_intensity(&s, &p, z, &grid(s.bandwidth, 3.0, 61), &xi).unwrap();
        let nb = c.narrowband(phi);
        for (a, b) in c.intensity.iter().zip(&nb) {
            assert!((a / b - 1.0).abs() < 0.01, "{a} {b}");
        }
        assert!((c.b_ratio - 0.01).abs() < 1e-12);
    }

    #[test]
    fn even_real_xi_gives_even_pulse() {
        let (s, p, z) = setup(0.5);
        let xi = synthetic(0.5, 8.0, |k| C64::new(1.0 / (1.0 + k * k), 0.0));
        let t = grid(s.bandwidth, 4.0, 41);
        let c = pulse_intensity(&s, &p, z, &t, &xi).unwrap();
        let n = t.len();
        for i in 0..n {
            let (a, b) = (c.intensity[i], c.intensity[n - 1 - i]);
            assert!((a - b).abs() <= 1e-13 * c.intensity[n / 2], "{a} {b}");
        }
    }

    #[test]
    fn width_matches_cumulant_oracle() {
        // Xi = exp(-g k^2 + i s k): the pulse is a shifted Gaussian with
        // variance 1/(2 B^2) + 2 g / Omega_psi^2 and centre s / Omega_psi
        let (s, p, z) = setup(1.0);
        let (g, sh) = (0.1, 0.3);
        let xi = synthetic(0.5, 12.0, |k| C64::from_polar((-g * k * k).exp(), sh * k));
        let t = grid(s.bandwidth, 12.0, 2001);
        let c = pulse_intensity(&s, &p, z, &t, &xi).unwrap();
        let b = s.bandwidth;
        let want = (1.0 / (2.0 * b * b) + 2.0 * g / c.omega_psi.powi(2)).sqrt();
        let got = pulse_rms_width(&c).unwrap();
        assert!((got / want - 1.0).abs() < 1e-6, "{got} {want}");
        let flat = synthetic(0.5, 12.0, |_| C64::new(1.0, 0.0));
        let c0 = pulse_intensity(&s, &p, z, &t, &flat).unwrap();
        let w0 = pulse_rms_width(&c0).unwrap();
        assert!((w0 * b * 2f64.sqrt() - 1.0).abs() < 1e-8);
        assert!(got > w0);
    }

    #[test]
    fn range_and_regime_errors() {
        let (s, p, z) = setup(1.0);
        let short = synthetic(0.5, 2.0, |_| C64::new(1.0, 0.0));
        assert!(matches!(pulse_intensity(&s, &p, z, &[0.0], &short), Err(TbError::Interpolation(_))));
        let (s, p, z) = setup(5.0);
        let long = synthetic(0.5, 12.0, |_| C64::new(1.0, 0.0));
        assert!(matches!(pulse_intensity(&s, &p, z, &[0.0], &long), Err(TbError::Domain(_))));
        let other = synthetic(0.8, 12.0, |_| C64::new(1.0, 0.0));
        let (s, p, z) = setup(0.5);
        assert!(matches!(pulse_intensity(&s, &p, z, &[0.0], &other), Err(TbError::Mismatch(_))));
    }
}
