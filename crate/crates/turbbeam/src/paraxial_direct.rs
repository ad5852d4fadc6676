//! Direct split-step solution of the epsilon-resolved paraxial equation,
//! the central-axis travel time and its fBm diagnostics.

use crate::error::{Result, TbError};
use crate::fft::{wavenumbers, Fft2, C64};
use crate::moment_theory::TheoryScales;
use crate::rng;
use crate::spectrum_medium::MediumVolume;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Square-cell transverse lattice; X = 0 sits at index (nx/2, ny/2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice2 {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
}

impl Lattice2 {
    pub fn new(nx: usize, ny: usize, dx: f64) -> Self {
        Lattice2 { nx, ny, dx }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self) -> usize {
        (self.ny / 2) * self.nx + self.nx / 2
    }

    pub fn coord(&self, i: usize) -> [f64; 2] {
        let ix = i % self.nx;
        let iy = i / self.nx;
        [
            (ix as f64 - (self.nx / 2) as f64) * self.dx,
            (iy as f64 - (self.ny / 2) as f64) * self.dx,
        ]
    }

    /// Lattice index of the point X (must lie on the lattice).
    pub fn index_of(&self, x: [f64; 2]) -> Option<usize> {
        let ix = (x[0] / self.dx).round() as isize + (self.nx / 2) as isize;
        let iy = (x[1] / self.dx).round() as isize + (self.ny / 2) as isize;
        if ix < 0 || iy < 0 || ix >= self.nx as isize || iy >= self.ny as isize {
            return None;
        }
        Some(iy as usize * self.nx + ix as usize)
    }

    /// |kappa|^2 for every mode in FFT order.
    pub fn kappa2(&self) -> Vec<f64> {
        let kx = wavenumbers(self.nx, self.dx);
        let ky = wavenumbers(self.ny, self.dx);
        let mut out = Vec::with_capacity(self.len());
        for y in &ky {
            for x in &kx {
                out.push(x * x + y * y);
            }
        }
        out
    }
}

/// Complex transverse field at one frequency and range.
#[derive(Debug, Clone)]
pub struct EnvelopeField {
    pub omega: f64,
    pub k: f64,
    pub lattice: Lattice2,
    pub data: Vec<C64>,
    pub z: f64,
    /// L2 norm at construction
    pub norm0: f64,
}

impl EnvelopeField {
    pub fn new(omega: f64, k: f64, lattice: Lattice2, data: Vec<C64>, z: f64) -> Result<Self> {
        if data.len() != lattice.len() {
            return Err(TbError::Mismatch(format!("{} values for {} sites", data.len(), lattice.len())));
        }
        let mut f = EnvelopeField { omega, k, lattice, data, z, norm0: 0.0 };
        f.norm0 = f.norm();
        if !f.norm0.is_finite() {
            return Err(TbError::InvalidParams("field has non-finite L2 norm".into()));
        }
        Ok(f)
    }

    /// sqrt(sum |psi|^2 dX^2)
    pub fn norm(&self) -> f64 {
        (self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.lattice.dx * self.lattice.dx).sqrt()
    }

    pub fn at_center(&self) -> C64 {
        self.data[self.lattice.center()]
    }

    /// Relative L2 distance to another field on the same lattice.
    pub fn rel_l2(&self, other: &EnvelopeField) -> f64 {
        let num: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = other.data.iter().map(|b| b.norm_sqr()).sum();
        (num / den).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// exp(-|xi|^2 / 2)
    Gaussian,
    /// exp(-|xi|^(2m) / 2)
    SuperGaussian { order: u32 },
}

impl Profile {
    pub fn eval(&self, xi2: f64) -> f64 {
        match self {
            Profile::Gaussian => (-0.5 * xi2).exp(),
            Profile::SuperGaussian { order } => (-0.5 * xi2.powi(*order as i32)).exp(),
        }
    }
}

/// Source F(Omega, X) = f(Omega) S(X / r_s), with a Gaussian baseband
/// spectrum around +-omega_o of width B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub r_s: f64,
    pub profile: Profile,
    pub omega_o: f64,
    pub bandwidth: f64,
    pub c_o: f64,
}

impl SourceModel {
    pub fn gaussian(r_s: f64, omega_o: f64, bandwidth: f64, c_o: f64) -> Result<Self> {
        let s = SourceModel { r_s, profile: Profile::Gaussian, omega_o, bandwidth, c_o };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r_s", self.r_s), ("omega_o", self.omega_o), ("B", self.bandwidth), ("c_o", self.c_o)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(TbError::InvalidParams(format!("{name}={v} must be > 0")));
            }
        }
        if let Profile::SuperGaussian { order } = self.profile {
            if order == 0 {
                return Err(TbError::InvalidParams("super-Gaussian order must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn k(&self, omega: f64) -> f64 {
        omega / self.c_o
    }

    /// (1/B)[exp(-(W-w_o)^2/2B^2) + exp(-(W+w_o)^2/2B^2)]
    pub fn spectral_amplitude(&self, omega: f64) -> f64 {
        let b = self.bandwidth;
        ((-(omega - self.omega_o).powi(2) / (2.0 * b * b)).exp()
            + (-(omega + self.omega_o).powi(2) / (2.0 * b * b)).exp())
            / b
    }

    /// S(X / r_s) sampled on the lattice, without the spectral factor.
    pub fn profile_field(&self, omega: f64, lattice: Lattice2) -> Result<EnvelopeField> {
        let data = (0..lattice.len())
            .map(|i| {
                let x = lattice.coord(i);
                C64::new(self.profile.eval((x[0] * x[0] + x[1] * x[1]) / (self.r_s * self.r_s)), 0.0)
            })
            .collect();
        EnvelopeField::new(omega, self.k(omega), lattice, data, 0.0)
    }

    /// F(Omega, X) on the lattice.
    pub fn field(&self, omega: f64, lattice: Lattice2) -> Result<EnvelopeField> {
        let mut f = self.profile_field(omega, lattice)?;
        let a = self.spectral_amplitude(omega);
        f.data.iter_mut().for_each(|c| *c *= a);
        f.norm0 = f.norm();
        Ok(f)
    }
}

/// Exact free-space evolution of exp(-|X|^2 / 2 r^2) under dz psi = (i/2k) Lap psi.
pub fn gaussian_beam(r: f64, k: f64, z: f64, x: [f64; 2]) -> C64 {
    let q = C64::new(r * r, z / k);
    (r * r / q) * (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * q)).exp()
}

/// Spectral Fresnel propagator exp(-i |kappa|^2 dz / 2k) with cached factors.
#[derive(Debug, Clone)]
pub struct Fresnel {
    pub fft: Fft2,
    kappa2: Vec<f64>,
    cache: Option<(f64, f64, Vec<C64>)>,
}

impl Fresnel {
    pub fn new(lattice: Lattice2) -> Self {
        Fresnel { fft: Fft2::new(lattice.nx, lattice.ny), kappa2: lattice.kappa2(), cache: None }
    }

    pub fn kappa2(&self) -> &[f64] {
        &self.kappa2
    }

    fn factors(&mut self, k: f64, dz: f64) -> &[C64] {
        let hit = matches!(&self.cache, Some((ck, cdz, _)) if *ck == k && *cdz == dz);
        if !hit {
            let f = self.kappa2.iter().map(|&q| C64::from_polar(1.0, -q * dz / (2.0 * k))).collect();
            self.cache = Some((k, dz, f));
        }
        &self.cache.as_ref().unwrap().2
    }

    /// Advance data by dz at wavenumber k.
    pub fn step(&mut self, data: &mut [C64], k: f64, dz: f64) {
        self.fft.forward(data);
        let f = self.factors(k, dz).to_vec();
        data.iter_mut().zip(&f).for_each(|(d, m)| *d *= m);
        self.fft.inverse(data);
    }
}

/// Super-Gaussian absorbing layer on the outer ring of the lattice.
pub fn apron_mask(lattice: Lattice2, width: f64) -> Vec<f64> {
    let hx = lattice.nx as f64 * lattice.dx / 2.0;
    let hy = lattice.ny as f64 * lattice.dx / 2.0;
    (0..lattice.len())
        .map(|i| {
            let x = lattice.coord(i);
            let d = (hx - x[0].abs()).min(hy - x[1].abs());
            if d >= width {
                1.0
            } else {
                let u = (width - d) / width;
                (-8.0 * u.powi(8)).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct DirectOptions {
    /// absorbing apron width; None keeps the propagation exactly unitary
    pub apron: Option<f64>,
    pub max_phase_std: f64,
}

impl Default for DirectOptions {
    fn default() -> Self {
        DirectOptions { apron: None, max_phase_std: 0.3 }
    }
}

/// Integral over s in [0, s_end] of the piecewise-linear interpolant of
/// column values v sampled at spacing ds, starting from a given slab.
fn slab_integral(v0: f64, v1: f64, ds: f64, frac: f64) -> f64 {
    let ve = v0 + frac * (v1 - v0);
    0.5 * frac * ds * (v0 + ve)
}

fn check_direct(initial: &EnvelopeField, medium: &MediumVolume, eps: f64, z_target: f64, opts: &DirectOptions) -> Result<(usize, f64)> {
    let g = medium.grid;
    if g.nx != initial.lattice.nx || g.ny != initial.lattice.ny || (g.dx - initial.lattice.dx).abs() > 1e-12 * g.dx {
        return Err(TbError::Mismatch("field and medium transverse lattices differ".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(TbError::InvalidParams(format!("epsilon={eps} outside (0,1)")));
    }
    if g.dz > medium.params.l_inner / 4.0 * (1.0 + 1e-12) {
        return Err(TbError::StepCriterion(format!("slab dz={} exceeds l_o/4", g.dz)));
    }
    let phase_std = initial.k * eps * g.dz * medium.lattice_variance.sqrt() / 2.0;
    if phase_std > opts.max_phase_std {
        return Err(TbError::StepCriterion(format!(
            "per-step phase std {phase_std:.3} exceeds {}",
            opts.max_phase_std
        )));
    }
    let s_end = z_target / (eps * eps);
    let s_max = (g.nz - 1) as f64 * g.dz;
    if s_end > s_max * (1.0 + 1e-12) || z_target < 0.0 {
        return Err(TbError::Extent(format!("range {z_target} needs {s_end} of medium, have {s_max}")));
    }
    let steps = s_end / g.dz;
    let full = (steps + 1e-9).floor() as usize;
    let frac = (steps - full as f64).max(0.0);
    Ok((full, if frac < 1e-9 { 0.0 } else { frac }))
}

fn propagate_impl(
    initial: &EnvelopeField,
    medium: &MediumVolume,
    eps: f64,
    z_target: f64,
    opts: &DirectOptions,
    pin_axis: bool,
) -> Result<EnvelopeField> {
    let (full, frac) = check_direct(initial, medium, eps, z_target, opts)?;
    let g = medium.grid;
    let lat = initial.lattice;
    let c = lat.center();
    let k = initial.k;
    let mut fr = Fresnel::new(lat);
    let mask = opts.apron.map(|w| apron_mask(lat, w));
    let mut out = initial.clone();
    let dzp = eps * eps * g.dz;
    let mut phase = vec![0.0; lat.len()];
    let nsteps = full + usize::from(frac > 0.0);
    for j in 0..nsteps {
        let f = if j < full { 1.0 } else { frac };
        let (p0, p1) = (medium.plane(j), medium.plane(j + 1));
        for i in 0..lat.len() {
            // phase k (eps/2) int mu ds over the slab
            let (a, b) = if pin_axis { (p0[i] - p0[c], p1[i] - p1[c]) } else { (p0[i], p1[i]) };
            phase[i] = k * 0.5 * eps * slab_integral(a, b, g.dz, f);
        }
        let h = 0.5 * f * dzp;
        fr.step(&mut out.data, k, h);
        out.data.iter_mut().zip(&phase).for_each(|(d, p)| *d *= C64::from_polar(1.0, *p));
        fr.step(&mut out.data, k, h);
        if let Some(m) = &mask {
            out.data.iter_mut().zip(m).for_each(|(d, w)| *d *= w);
        }
    }
    out.z = initial.z + z_target;
    Ok(out)
}

/// Strang-split propagation of phi^eps through a synthesized medium to
/// physical range z_target. One slab of the medium per step; the phase uses
/// the slab integral of the linear interpolant between adjacent planes.
pub fn propagate_direct(
    initial: &EnvelopeField,
    medium: &MediumVolume,
    eps: f64,
    z_target: f64,
    opts: &DirectOptions,
) -> Result<EnvelopeField> {
    propagate_impl(initial, medium, eps, z_target, opts, false)
}

/// Same discretization driven by nu = mu(X, .) - mu(0, .), i.e. the field
/// seen in the travel-time frame.
pub fn propagate_frame(
    initial: &EnvelopeField,
    medium: &MediumVolume,
    eps: f64,
    z_target: f64,
    opts: &DirectOptions,
) -> Result<EnvelopeField> {
    propagate_impl(initial, medium, eps, z_target, opts, true)
}

/// Multiply the whole lattice by exp(-i k Z).
pub fn phase_frame_shift(field: &EnvelopeField, z_value: f64) -> EnvelopeField {
    let mut out = field.clone();
    let m = C64::from_polar(1.0, -field.k * z_value);
    out.data.iter_mut().for_each(|d| *d *= m);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelTimePath {
    pub epsilon: f64,
    pub z_samples: Vec<f64>,
    pub z_values: Vec<f64>,
}

impl TravelTimePath {
    /// Piecewise-linear evaluation.
    pub fn at(&self, z: f64) -> f64 {
        let zs = &self.z_samples;
        if z <= zs[0] {
            return self.z_values[0];
        }
        let j = zs.partition_point(|&v| v < z).min(zs.len() - 1);
        let (z0, z1) = (zs[j - 1], zs[j]);
        let t = (z - z0) / (z1 - z0);
        self.z_values[j - 1] + t * (self.z_values[j] - self.z_values[j - 1])
    }
}

/// Z^eps(z) = (1/2 eps) int_0^z mu(0, z'/eps^2) dz' on the linear interpolant
/// of the medium's axis column.
pub fn central_travel_time(medium: &MediumVolume, eps: f64, z_grid: &[f64]) -> Result<TravelTimePath> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(TbError::InvalidParams(format!("epsilon={eps} outside (0,1)")));
    }
    if z_grid.windows(2).any(|w| w[1] <= w[0]) || z_grid.first().map_or(true, |&z| z < 0.0) {
        return Err(TbError::InvalidParams("z grid must be nonnegative and increasing".into()));
    }
    let g = medium.grid;
    let axis = medium.axis();
    let s_max = (g.nz - 1) as f64 * g.dz;
    let last = *z_grid.last().unwrap();
    if last / (eps * eps) > s_max * (1.0 + 1e-12) {
        return Err(TbError::Extent(format!("range {last} needs {} of medium, have {s_max}", last / (eps * eps))));
    }
    let mut cum = Vec::with_capacity(axis.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in axis.windows(2) {
        acc += 0.5 * g.dz * (w[0] + w[1]);
        cum.push(acc);
    }
    let z_values = z_grid
        .iter()
        .map(|&z| {
            let s = z / (eps * eps) / g.dz;
            let j = (s.floor() as usize).min(axis.len() - 2);
            let f = (s - j as f64).clamp(0.0, 1.0);
            let i = cum[j] + slab_integral(axis[j], axis[j + 1], g.dz, f);
            0.5 * eps * i
        })
        .collect();
    Ok(TravelTimePath { epsilon: eps, z_samples: z_grid.to_vec(), z_values })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstEstimate {
    pub h: f64,
    pub stderr: f64,
}

fn hurst_slope(paths: &[&[f64]], lags: &[usize]) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &l in lags {
        let mut s = 0.0;
        let mut n = 0usize;
        for p in paths {
            for t in 0..p.len() - l {
                let d = p[t + l] - p[t];
                s += d * d;
                n += 1;
            }
        }
        let m = s / n as f64;
        if !(m > 0.0) {
            return None;
        }
        xs.push((l as f64).ln());
        ys.push(m.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(0.5 * sxy / sxx)
}

/// Aggregated-variance Hurst estimate: slope of log E[(Z(t+L)-Z(t))^2]
/// against log L over dyadic lags 1..n/8, halved. Paths are taken as
/// uniformly sampled; the stderr is a 200-resample bootstrap over paths.
pub fn hurst_estimate(paths: &[TravelTimePath]) -> Result<HurstEstimate> {
    if paths.len() < 50 {
        return Err(TbError::InsufficientData(format!("{} paths, need >= 50", paths.len())));
    }
    let n = paths.iter().map(|p| p.z_values.len()).min().unwrap_or(0);
    if n < 64 {
        return Err(TbError::InsufficientData(format!("{n} samples per path, need >= 64")));
    }
    let vals: Vec<&[f64]> = paths.iter().map(|p| &p.z_values[..n]).collect();
    let mut lags = Vec::new();
    let mut l = 1;
    while l <= n / 8 {
        lags.push(l);
        l *= 2;
    }
    let h = hurst_slope(&vals, &lags)
        .ok_or_else(|| TbError::InsufficientData("paths show no variation".into()))?;
    let mut r = rng::stream(0x4855_5253, 0);
    let mut boot = Vec::with_capacity(200);
    for _ in 0..200 {
        let sample: Vec<&[f64]> = (0..vals.len()).map(|_| vals[r.gen_range(0..vals.len())]).collect();
        if let Some(b) = hurst_slope(&sample, &lags) {
            boot.push(b);
        }
    }
    let m = boot.iter().sum::<f64>() / boot.len() as f64;
    let var = boot.iter().map(|b| (b - m) * (b - m)).sum::<f64>() / (boot.len() as f64 - 1.0);
    Ok(HurstEstimate { h, stderr: var.sqrt() })
}

/// Predicted |E[phi^eps]| factor exp(-C_H^2 k^2 z^2H / 2) at rescaled range z.
pub fn coherent_attenuation(k: f64, z: f64, scales: &TheoryScales) -> Result<f64> {
    scales.require_long_range()?;
    Ok((-0.5 * scales.c_h * scales.c_h * k * k * z.powf(2.0 * scales.h)).exp())
}

/// Scattering mean free path eps^{2 alpha/(1+alpha)} (C_H k)^{-1/H}.
pub fn mean_free_path(k: f64, eps: f64, scales: &TheoryScales) -> Result<f64> {
    scales.require_long_range()?;
    let a = scales.alpha;
    Ok(eps.powf(2.0 * a / (1.0 + a)) * (scales.c_h * k).powf(-1.0 / scales.h))
}
