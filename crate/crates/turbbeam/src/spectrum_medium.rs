//! Power-law medium statistics: spectrum, covariance integrals and lattice
//! synthesis of the fluctuation field mu.

use crate::error::{Result, TbError};
use crate::fft::{fft3, wavenumbers, C64};
use crate::quad::{integrate_breaks, Tol};
use crate::rng;
use crate::special::gamma;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Statistical law of mu: S(k) = chi |k|^{-2-alpha} on the band (1/L_o, 1/l_o).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    pub alpha: f64,
    pub chi: f64,
    /// inner scale l_o
    pub l_inner: f64,
    /// outer scale L_o; `f64::INFINITY` for no outer cutoff
    pub l_outer: f64,
}

impl SpectrumParams {
    pub fn new(alpha: f64, chi: f64, l_inner: f64, l_outer: f64) -> Result<Self> {
        let p = SpectrumParams { alpha, chi, l_inner, l_outer };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.alpha;
        if !(a > 0.0 && a < 2.0) || !a.is_finite() {
            return Err(TbError::InvalidParams(format!("alpha={a} outside (0,2)")));
        }
        if a == 1.0 {
            return Err(TbError::InvalidParams("alpha=1 excluded".into()));
        }
        // chi = 0 is accepted as the degenerate homogeneous medium
        if !(self.chi >= 0.0) || !self.chi.is_finite() {
            return Err(TbError::InvalidParams(format!("chi={} must be >= 0", self.chi)));
        }
        if !(self.l_inner > 0.0) || !self.l_inner.is_finite() {
            return Err(TbError::InvalidParams(format!("l_o={} must be > 0", self.l_inner)));
        }
        if self.l_outer.is_nan() || self.l_outer <= self.l_inner {
            return Err(TbError::InvalidParams(format!(
                "L_o={} must exceed l_o={}",
                self.l_outer, self.l_inner
            )));
        }
        if self.l_outer.is_infinite() && a > 1.0 {
            return Err(TbError::InvalidParams(format!(
                "L_o=inf requires alpha<1 (variance diverges for alpha={a})"
            )));
        }
        Ok(())
    }

    pub fn outer_is_infinite(&self) -> bool {
        self.l_outer.is_infinite()
    }

    pub fn kappa_lo(&self) -> f64 {
        1.0 / self.l_outer
    }

    pub fn kappa_hi(&self) -> f64 {
        1.0 / self.l_inner
    }

    /// Closed-form variance of mu.
    pub fn variance(&self) -> f64 {
        let a = self.alpha;
        let hi = self.l_inner.powf(a - 1.0);
        let lo = if self.outer_is_infinite() { 0.0 } else { self.l_outer.powf(a - 1.0) };
        self.chi / (2.0 * PI * PI * (1.0 - a)) * (hi - lo)
    }

    pub fn with_chi(&self, chi: f64) -> Self {
        SpectrumParams { chi, ..*self }
    }
}

/// 3D power spectral density at wavevector kappa.
pub fn power_spectrum(kappa: [f64; 3], p: &SpectrumParams) -> f64 {
    let k = (kappa[0] * kappa[0] + kappa[1] * kappa[1] + kappa[2] * kappa[2]).sqrt();
    if k > p.kappa_lo() && k < p.kappa_hi() {
        p.chi * k.powf(-2.0 - p.alpha)
    } else {
        0.0
    }
}

/// int_lo^hi s^{-alpha} sin(s)/s ds for 0 <= lo <= hi.
fn sinc_power_integral(alpha: f64, lo: f64, hi: f64) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut a = lo;
    if a < PI {
        // termwise integration of the sinc series
        let b = hi.min(PI);
        let mut sum = 0.0;
        let mut fact = 1.0;
        for n in 0..60 {
            let m = (2 * n + 1) as f64;
            if n > 0 {
                fact *= (m - 1.0) * m;
            }
            let e = m - alpha;
            let tb = b.powf(e);
            let ta = if a > 0.0 { a.powf(e) } else { 0.0 };
            let term = (tb - ta) / (fact * e);
            if n % 2 == 0 {
                sum += term;
            } else {
                sum -= term;
            }
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        total += sum;
        a = b;
    }
    if a >= hi {
        return Ok(total);
    }
    // panels between multiples of pi, capped; beyond the cap two
    // integrations by parts leave a remainder below (1+alpha) A^{-2-alpha}
    const MAX_PANELS: f64 = 20000.0;
    let cap = (a / PI).ceil().max(1.0) * PI + MAX_PANELS * PI;
    let top = hi.min(cap);
    let mut breaks = vec![a];
    let mut m = (a / PI).floor() + 1.0;
    while m * PI < top {
        breaks.push(m * PI);
        m += 1.0;
    }
    breaks.push(top);
    let tol = Tol { abs: 1e-12, rel: 1e-10, max_intervals: 4 * breaks.len() + 2000 };
    let mut f = |s: f64| s.powf(-1.0 - alpha) * s.sin();
    total += integrate_breaks(&mut f, &breaks, tol)?.value;
    if hi > top {
        let tail = |s: f64| {
            let f0 = s.powf(-1.0 - alpha);
            let f1 = -(1.0 + alpha) * s.powf(-2.0 - alpha);
            -f0 * s.cos() + f1 * s.sin()
        };
        total += tail(hi) - tail(top);
    }
    Ok(total)
}

/// Covariance of mu at offset (X, z).
pub fn covariance_mu(x: [f64; 2], z: f64, p: &SpectrumParams) -> Result<f64> {
    let r = (x[0] * x[0] + x[1] * x[1] + z * z).sqrt();
    if r == 0.0 {
        return Ok(p.variance());
    }
    if p.chi == 0.0 {
        return Ok(0.0);
    }
    let j = sinc_power_integral(p.alpha, r * p.kappa_lo(), r * p.kappa_hi())?;
    Ok(p.chi / (2.0 * PI * PI) * r.powf(p.alpha - 1.0) * j)
}

fn require_long_range(p: &SpectrumParams) -> Result<()> {
    if !(p.alpha > 0.0 && p.alpha < 1.0) {
        return Err(TbError::Domain(format!("alpha={} outside (0,1)", p.alpha)));
    }
    Ok(())
}

/// Large-offset coefficient: Cov_mu(r) ~ C_alpha r^{alpha-1} / (2 pi^2).
pub fn tail_coefficient(p: &SpectrumParams) -> Result<f64> {
    require_long_range(p)?;
    let a = p.alpha;
    Ok(PI * p.chi / (2.0 * (a * PI / 2.0).cos() * gamma(1.0 + a)))
}

/// Covariance of nu(X, z) = mu(X, z) - mu(0, z) between X1 and X2 at range lag z.
pub fn covariance_nu(x1: [f64; 2], x2: [f64; 2], z: f64, p: &SpectrumParams) -> Result<f64> {
    require_long_range(p)?;
    if !p.outer_is_infinite() {
        return Err(TbError::Domain("covariance_nu needs L_o = inf".into()));
    }
    let d = [x1[0] - x2[0], x1[1] - x2[1]];
    Ok(covariance_mu(d, z, p)? + covariance_mu([0.0, 0.0], z, p)?
        - covariance_mu(x1, z, p)?
        - covariance_mu(x2, z, p)?)
}

/// Tabulated covariance at a list of offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceCurve {
    pub offsets: Vec<([f64; 2], f64)>,
    pub values: Vec<f64>,
}

impl CovarianceCurve {
    pub fn evaluate(offsets: Vec<([f64; 2], f64)>, p: &SpectrumParams) -> Result<Self> {
        let values = offsets.iter().map(|(x, z)| covariance_mu(*x, *z, p)).collect::<Result<Vec<_>>>()?;
        Ok(CovarianceCurve { offsets, values })
    }
}

/// Lattice geometry. Transverse spacing dx is shared by both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dz: f64,
}

impl Grid3 {
    pub fn cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }
}

/// Clip bound, either in units of the lattice standard deviation or absolute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Clip {
    Sigmas(f64),
    Absolute(f64),
}

impl Default for Clip {
    fn default() -> Self {
        Clip::Sigmas(6.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SynthSpec {
    pub grid: Grid3,
    pub clip: Clip,
    pub max_cells: usize,
    /// box extents must reach min(L_o, extent_cap_lo * l_o)
    pub extent_cap_lo: f64,
}

impl SynthSpec {
    pub fn new(grid: Grid3) -> Self {
        SynthSpec { grid, clip: Clip::default(), max_cells: 1 << 24, extent_cap_lo: 4.0 }
    }
}

/// One realization of mu on a lattice. Index order is x fastest, then y, then z.
#[derive(Debug, Clone)]
pub struct MediumVolume {
    pub grid: Grid3,
    pub samples: Vec<f64>,
    pub params: SpectrumParams,
    pub seed: u64,
    pub stream: u64,
    /// variance carried by the lattice modes before clipping
    pub lattice_variance: f64,
    pub clip_bound: f64,
    pub n_clipped: usize,
}

impl MediumVolume {
    pub fn plane(&self, iz: usize) -> &[f64] {
        let n = self.grid.nx * self.grid.ny;
        &self.samples[iz * n..(iz + 1) * n]
    }

    pub fn at(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        let g = &self.grid;
        self.samples[(iz * g.ny + iy) * g.nx + ix]
    }

    /// mu on the beam axis X = 0 (lattice centre) for every z sample.
    pub fn axis(&self) -> Vec<f64> {
        let (cx, cy) = (self.grid.nx / 2, self.grid.ny / 2);
        (0..self.grid.nz).map(|iz| self.at(cx, cy, iz)).collect()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Lattice-averaged product mu(x) mu(x + shift), periodic wrap.
    pub fn autocovariance(&self, shift: [isize; 3]) -> f64 {
        let g = &self.grid;
        let wrap = |i: usize, s: isize, n: usize| ((i as isize + s).rem_euclid(n as isize)) as usize;
        let mut acc = 0.0;
        for iz in 0..g.nz {
            let jz = wrap(iz, shift[2], g.nz);
            for iy in 0..g.ny {
                let jy = wrap(iy, shift[1], g.ny);
                for ix in 0..g.nx {
                    let jx = wrap(ix, shift[0], g.nx);
                    acc += self.at(ix, iy, iz) * self.at(jx, jy, jz);
                }
            }
        }
        acc / self.samples.len() as f64
    }
}

/// Variance carried by one lattice cell: the integral of S over the cell
/// divided by (2 pi)^3.
fn cell_weight(c: [f64; 3], h: [f64; 3], p: &SpectrumParams, lo: f64, hi: f64) -> f64 {
    let mut rmin2 = 0.0;
    let mut rmax2 = 0.0;
    for d in 0..3 {
        let a = c[d] - 0.5 * h[d];
        let b = c[d] + 0.5 * h[d];
        let near = if a > 0.0 { a } else if b < 0.0 { -b } else { 0.0 };
        let far = a.abs().max(b.abs());
        rmin2 += near * near;
        rmax2 += far * far;
    }
    let (rmin, rmax) = (rmin2.sqrt(), rmax2.sqrt());
    if rmax <= lo || rmin >= hi {
        return 0.0;
    }
    let s = |k: [f64; 3]| {
        let r = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
        if r > lo && r < hi {
            p.chi * r.powf(-2.0 - p.alpha)
        } else {
            0.0
        }
    };
    let vol = h[0] * h[1] * h[2];
    let mut sum = 0.0;
    if rmin > lo && rmax < hi && rmin > 2.0 * h[0].max(h[1]).max(h[2]) {
        // smooth interior cell: 3-point Gauss product rule
        let g = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
        let w = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let q = [c[0] + 0.5 * h[0] * g[i], c[1] + 0.5 * h[1] * g[j], c[2] + 0.5 * h[2] * g[k]];
                    sum += w[i] * w[j] * w[k] * s(q);
                }
            }
        }
        sum *= vol / 8.0;
    } else {
        // band edge or near the origin: midpoint subsampling
        const M: usize = 8;
        for i in 0..M {
            for j in 0..M {
                for k in 0..M {
                    let f = |n: usize, d: usize| c[d] + h[d] * ((n as f64 + 0.5) / M as f64 - 0.5);
                    sum += s([f(i, 0), f(j, 1), f(k, 2)]);
                }
            }
        }
        sum *= vol / (M * M * M) as f64;
    }
    sum / (2.0 * PI).powi(3)
}

fn check_budget(cells: usize, max_cells: usize) -> Result<()> {
    if cells > max_cells {
        return Err(TbError::MemoryBudget(format!("{cells} cells exceeds budget {max_cells}")));
    }
    Ok(())
}

/// Clip to +-bound then re-centre, repeated until the centred field fits.
fn clip_and_center(v: &mut [f64], bound: f64) -> usize {
    if !bound.is_finite() {
        return 0;
    }
    let orig: Vec<f64> = v.to_vec();
    let mut b = bound;
    for _ in 0..16 {
        let mut n = 0;
        for (x, o) in v.iter_mut().zip(&orig) {
            *x = o.clamp(-b, b);
            if o.abs() > b {
                n += 1;
            }
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x -= m);
        if v.iter().all(|x| x.abs() <= bound) {
            return n;
        }
        b -= m.abs();
    }
    v.iter_mut().for_each(|x| *x = x.clamp(-bound, bound));
    v.len()
}

fn clip_bound(clip: Clip, var: f64) -> Result<f64> {
    let b = match clip {
        Clip::Sigmas(s) => s * var.sqrt(),
        Clip::Absolute(b) => b,
    };
    if !(b > 0.0) && var > 0.0 {
        return Err(TbError::InvalidParams(format!("clip bound {b} must be > 0")));
    }
    Ok(b)
}

/// Spectral synthesis of a 3D realization.
///
/// Real white noise is transformed, weighted by the cell-integrated spectrum
/// and transformed back, so the field is real and Hermitian symmetry is
/// automatic. The zero mode is dropped; with L_o = inf this makes the box's
/// fundamental the effective outer cutoff.
pub fn synthesize(spec: &SynthSpec, p: &SpectrumParams, seed: u64, stream: u64) -> Result<MediumVolume> {
    p.validate()?;
    let g = spec.grid;
    if g.nx < 2 || g.ny < 2 || g.nz < 2 {
        return Err(TbError::GridResolution("3D synthesis needs at least 2 cells per axis".into()));
    }
    if g.dx > p.l_inner / 2.0 || g.dz > p.l_inner / 2.0 {
        return Err(TbError::GridResolution(format!(
            "spacings dx={} dz={} exceed l_o/2={}",
            g.dx,
            g.dz,
            p.l_inner / 2.0
        )));
    }
    let need = p.l_outer.min(spec.extent_cap_lo * p.l_inner);
    let ext = (g.nx as f64 * g.dx).min(g.ny as f64 * g.dx).min(g.nz as f64 * g.dz);
    if ext < need {
        return Err(TbError::Extent(format!("box extent {ext} below required {need}")));
    }
    check_budget(g.cells(), spec.max_cells)?;

    let n = g.cells();
    let mut r = rng::stream(seed, stream);
    let mut data: Vec<C64> = (0..n).map(|_| C64::new(r.sample(StandardNormal), 0.0)).collect();
    fft3(&mut data, g.nx, g.ny, g.nz, true);

    let kx = wavenumbers(g.nx, g.dx);
    let ky = wavenumbers(g.ny, g.dx);
    let kz = wavenumbers(g.nz, g.dz);
    let h = [kx[1], ky[1], kz[1]];
    let lo = if p.outer_is_infinite() { 0.0 } else { p.kappa_lo() };
    let hi = p.kappa_hi();
    let nxy = g.nx * g.ny;
    use rayon::prelude::*;
    let var: f64 = data
        .par_chunks_mut(nxy)
        .enumerate()
        .map(|(iz, plane)| {
            let mut v = 0.0;
            for iy in 0..g.ny {
                for ix in 0..g.nx {
                    let w = if ix == 0 && iy == 0 && iz == 0 {
                        0.0
                    } else {
                        cell_weight([kx[ix], ky[iy], kz[iz]], h, p, lo, hi)
                    };
                    v += w;
                    plane[iy * g.nx + ix] *= (n as f64 * w).sqrt();
                }
            }
            v
        })
        .sum();
    fft3(&mut data, g.nx, g.ny, g.nz, false);
    let mut samples: Vec<f64> = data.iter().map(|c| c.re).collect();
    drop(data);
    let bound = clip_bound(spec.clip, var)?;
    let n_clipped = clip_and_center(&mut samples, bound);
    Ok(MediumVolume {
        grid: g,
        samples,
        params: *p,
        seed,
        stream,
        lattice_variance: var,
        clip_bound: bound,
        n_clipped,
    })
}

/// Power of a realization restricted to band modes: sum of |mu_hat|^2 / N^2.
pub fn band_power(v: &MediumVolume) -> f64 {
    let g = v.grid;
    let mut data: Vec<C64> = v.samples.iter().map(|&x| C64::new(x, 0.0)).collect();
    fft3(&mut data, g.nx, g.ny, g.nz, true);
    let kx = wavenumbers(g.nx, g.dx);
    let ky = wavenumbers(g.ny, g.dx);
    let kz = wavenumbers(g.nz, g.dz);
    let n2 = (data.len() as f64).powi(2);
    let lo = if v.params.outer_is_infinite() { 0.0 } else { v.params.kappa_lo() };
    let mut s = 0.0;
    for iz in 0..g.nz {
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let k = (kx[ix] * kx[ix] + ky[iy] * ky[iy] + kz[iz] * kz[iz]).sqrt();
                if k > lo && k < v.params.kappa_hi() {
                    s += data[(iz * g.ny + iy) * g.nx + ix].norm_sqr() / n2;
                }
            }
        }
    }
    s
}

/// 1D spectral density of mu(0, z): the 3D spectrum integrated over the
/// transverse wavevector.
pub fn axis_spectrum(kz: f64, p: &SpectrumParams) -> f64 {
    let k = kz.abs();
    if k >= p.kappa_hi() {
        return 0.0;
    }
    let m = k.max(p.kappa_lo());
    p.chi / (2.0 * PI * p.alpha) * (m.powf(-p.alpha) - p.l_inner.powf(p.alpha))
}

/// int_0^k of axis_spectrum, odd in k.
fn axis_spectrum_cumulative(k: f64, p: &SpectrumParams) -> f64 {
    let sgn = k.signum();
    let k = k.abs().min(p.kappa_hi());
    let a = p.kappa_lo();
    let al = p.alpha;
    let c = p.chi / (2.0 * PI * al);
    let tail = p.l_inner.powf(al);
    let v = if k <= a {
        c * (a.powf(-al) - tail) * k
    } else {
        let fa = if a > 0.0 { c * (a.powf(-al) - tail) * a } else { 0.0 };
        let a1 = if a > 0.0 { a.powf(1.0 - al) } else { 0.0 };
        fa + c * ((k.powf(1.0 - al) - a1) / (1.0 - al) - tail * (k - a))
    };
    sgn * v
}

#[derive(Debug, Clone, Copy)]
pub struct AxisSpec {
    pub nz: usize,
    pub dz: f64,
    pub clip: Clip,
    pub max_cells: usize,
    /// octaves of random-frequency components filling the band below the
    /// lattice fundamental
    pub subharmonic_octaves: usize,
}

impl AxisSpec {
    pub fn new(nz: usize, dz: f64) -> Self {
        AxisSpec { nz, dz, clip: Clip::default(), max_cells: 1 << 24, subharmonic_octaves: 40 }
    }
}

/// Realization of the on-axis line mu(0, z) alone, from its exact 1D
/// marginal spectrum. The result is a MediumVolume with nx = ny = 1.
///
/// Lattice modes carry the cell-integrated marginal. The cell around zero is
/// covered by log-spaced bins, each a Gaussian cosine pair at a random
/// frequency drawn from the spectrum restricted to the bin, which keeps the
/// covariance exact without a box-sized outer cutoff.
pub fn synthesize_axis(spec: &AxisSpec, p: &SpectrumParams, seed: u64, stream: u64) -> Result<MediumVolume> {
    p.validate()?;
    let (nz, dz) = (spec.nz, spec.dz);
    if nz < 2 {
        return Err(TbError::GridResolution("axis synthesis needs nz >= 2".into()));
    }
    if dz > p.l_inner / 2.0 {
        return Err(TbError::GridResolution(format!("dz={dz} exceeds l_o/2={}", p.l_inner / 2.0)));
    }
    check_budget(nz, spec.max_cells)?;
    let mut r = rng::stream(seed, stream);
    let mut data: Vec<C64> = (0..nz).map(|_| C64::new(r.sample(StandardNormal), 0.0)).collect();
    let mut planner = rustfft::FftPlanner::new();
    planner.plan_fft_forward(nz).process(&mut data);
    let kz = wavenumbers(nz, dz);
    let h = kz[1];
    let mut var = 0.0;
    for (j, c) in data.iter_mut().enumerate() {
        let w = if j == 0 {
            0.0
        } else {
            let k = kz[j];
            (axis_spectrum_cumulative(k + 0.5 * h, p) - axis_spectrum_cumulative(k - 0.5 * h, p)) / (2.0 * PI)
        };
        var += w;
        *c *= (nz as f64 * w).sqrt();
    }
    planner.plan_fft_inverse(nz).process(&mut data);
    let mut samples: Vec<f64> = data.iter().map(|c| c.re / nz as f64).collect();

    let mut top = 0.5 * h;
    for _ in 0..spec.subharmonic_octaves {
        let bot = 0.5 * top;
        let mass = axis_spectrum_cumulative(top, p) - axis_spectrum_cumulative(bot, p);
        let s2 = mass / PI;
        if s2 > 0.0 {
            // rejection sampling; the density varies by at most 2^alpha on an octave
            let smax = axis_spectrum(bot, p);
            let k = loop {
                let k = bot + (top - bot) * r.gen::<f64>();
                if r.gen::<f64>() * smax <= axis_spectrum(k, p) {
                    break k;
                }
            };
            let a: f64 = r.sample::<f64, _>(StandardNormal) * s2.sqrt();
            let b: f64 = r.sample::<f64, _>(StandardNormal) * s2.sqrt();
            for (i, m) in samples.iter_mut().enumerate() {
                let ph = k * dz * i as f64;
                *m += a * ph.cos() + b * ph.sin();
            }
            var += s2;
        }
        top = bot;
    }
    let bound = clip_bound(spec.clip, var)?;
    // no re-centering here: the low components legitimately shift the line mean
    let mut n_clipped = 0;
    if bound.is_finite() {
        for m in samples.iter_mut() {
            if m.abs() > bound {
                *m = m.clamp(-bound, bound);
                n_clipped += 1;
            }
        }
    }
    Ok(MediumVolume {
        grid: Grid3 { nx: 1, ny: 1, nz, dx: 0.0, dz },
        samples,
        params: *p,
        seed,
        stream,
        lattice_variance: var,
        clip_bound: bound,
        n_clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;
    use proptest::prelude::*;

    fn p05() -> SpectrumParams {
        SpectrumParams::new(0.5, 1.0, 0.1, f64::INFINITY).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SpectrumParams::new(1.0, 1.0, 0.1, 10.0).is_err());
        assert!(SpectrumParams::new(2.0, 1.0, 0.1, 10.0).is_err());
        assert!(SpectrumParams::new(0.0, 1.0, 0.1, 10.0).is_err());
        assert!(SpectrumParams::new(1.5, 1.0, 0.1, f64::INFINITY).is_err());
        assert!(SpectrumParams::new(0.5, 1.0, 1.0, 0.5).is_err());
        assert!(SpectrumParams::new(0.5, -1.0, 0.1, 10.0).is_err());
        assert!(SpectrumParams::new(1.5, 1.0, 0.1, 10.0).is_ok());
    }

    #[test]
    fn spectrum_band_and_unit_value() {
        let p = p05();
        assert_eq!(power_spectrum([20.0 / 1.0, 0.0, 0.0], &p), 0.0);
        assert_eq!(power_spectrum([1.0, 0.0, 0.0], &p), 1.0);
        assert_eq!(power_spectrum([0.0, 0.0, 2.0 / p.l_inner], &p), 0.0);
    }

    #[test]
    fn kolmogorov_normalisation() {
        // chi = 4 (2 pi)^3 0.033 Cn2 reproduces 4 (2 pi)^3 times 0.033 Cn2 k^{-11/3}
        let cn2 = 1e-14;
        let chi = 4.0 * (2.0 * PI).powi(3) * 0.033 * cn2;
        let p = SpectrumParams::new(5.0 / 3.0, chi, 1e-3, 10.0).unwrap();
        let k: f64 = 3.0;
        let expect = 4.0 * (2.0 * PI).powi(3) * 0.033 * cn2 * k.powf(-11.0 / 3.0);
        assert!((power_spectrum([0.0, k, 0.0], &p) / expect - 1.0).abs() < 1e-14);
    }

    #[test]
    fn variance_closed_form_unit_case() {
        let p = SpectrumParams::new(0.5, 2.0 * PI * PI, 1.0, f64::INFINITY).unwrap();
        assert!((covariance_mu([0.0, 0.0], 0.0, &p).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_offset_limit_matches_variance() {
        // tiny offsets go through the quadrature path
        for &(a, lo) in &[(0.5, f64::INFINITY), (0.3, 50.0), (1.5, 20.0)] {
            let p = SpectrumParams::new(a, 1.3, 0.2, lo).unwrap();
            let c = covariance_mu([0.0, 0.0], 1e-7, &p).unwrap();
            assert!((c / p.variance() - 1.0).abs() < 1e-8, "alpha={a}");
        }
    }

    #[test]
    fn covariance_matches_direct_quadrature() {
        // independent oracle: integrate kappa^{-alpha} sinc(kappa r) in kappa directly
        let p = SpectrumParams::new(0.7, 1.0, 0.5, 30.0).unwrap();
        for &r in &[0.3, 2.0, 7.5] {
            let o = integrate(
                |k: f64| k.powf(-p.alpha) * crate::special::sinc(k * r),
                p.kappa_lo(),
                p.kappa_hi(),
                Tol::new(1e-13, 1e-12),
            )
            .unwrap()
            .value
                * p.chi
                / (2.0 * PI * PI);
            let c = covariance_mu([r, 0.0], 0.0, &p).unwrap();
            assert!((c - o).abs() < 1e-9 * o.abs().max(1e-3), "r={r}: {c} vs {o}");
        }
    }

    #[test]
    fn long_range_tail() {
        let p = p05();
        let ca = tail_coefficient(&p).unwrap();
        let z = 100.0 * p.l_inner;
        let c = covariance_mu([0.0, 0.0], z, &p).unwrap();
        let asym = ca / (2.0 * PI * PI) * z.powf(p.alpha - 1.0);
        assert!((c / asym - 1.0).abs() < 0.02);
    }

    #[test]
    fn finite_outer_scale_decay_bound() {
        let p = SpectrumParams::new(0.5, 1.0, 0.1, 5.0).unwrap();
        for &z in &[200.0, 500.0, 2000.0] {
            let c = covariance_mu([0.0, 0.0], z, &p).unwrap();
            assert!(c.abs() <= p.chi * p.l_outer.powf(p.alpha + 1.0) / (PI * PI) / (z * z));
        }
    }

    #[test]
    fn tail_coefficient_values() {
        let p = p05();
        // frozen from an independent quadrature of int_0^inf s^{-1/2} sinc(s) ds
        assert!((tail_coefficient(&p).unwrap() - 2.5066282746310002).abs() < 1e-12);
        assert_eq!(tail_coefficient(&p.with_chi(0.0)).unwrap(), 0.0);
        for &a in &[0.2, 0.5, 0.8, 0.9] {
            let q = SpectrumParams::new(a, 1.0, 0.1, f64::INFINITY).unwrap();
            let brute = sinc_power_integral(a, 0.0, 1e9).unwrap();
            assert!((tail_coefficient(&q).unwrap() / brute - 1.0).abs() < 1e-6, "alpha={a}");
        }
        let q = SpectrumParams::new(1.5, 1.0, 0.1, 10.0).unwrap();
        assert!(tail_coefficient(&q).is_err());
    }

    #[test]
    fn nu_covariance_properties() {
        let p = p05();
        assert_eq!(covariance_nu([0.0, 0.0], [0.0, 0.0], 3.0, &p).unwrap(), 0.0);
        let a = covariance_nu([1.0, 0.5], [-0.3, 2.0], 4.0, &p).unwrap();
        let b = covariance_nu([-0.3, 2.0], [1.0, 0.5], 4.0, &p).unwrap();
        assert!((a - b).abs() < 1e-15);
        let x = 20.0 * p.l_inner;
        let z = 50.0 * x;
        let v = covariance_nu([x, 0.0], [x, 0.0], z, &p).unwrap();
        let ca = tail_coefficient(&p).unwrap();
        let asym = ca * (1.0 - p.alpha) * x * x * z.powf(p.alpha - 3.0) / (2.0 * PI * PI);
        assert!((v / asym - 1.0).abs() < 0.05, "{v} vs {asym}");
    }

    #[test]
    fn synthesis_zero_chi_and_determinism() {
        let g = Grid3 { nx: 8, ny: 8, nz: 8, dx: 0.05, dz: 0.05 };
        let s = SynthSpec::new(g);
        let p = SpectrumParams::new(0.5, 1.0, 0.1, 0.3).unwrap();
        let z = synthesize(&s, &p.with_chi(0.0), 1, 0).unwrap();
        assert!(z.samples.iter().all(|&v| v == 0.0));
        let a = synthesize(&s, &p, 9, 2).unwrap();
        let b = synthesize(&s, &p, 9, 2).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = synthesize(&s, &p, 9, 3).unwrap();
        assert_ne!(a.samples, c.samples);
        assert!(a.mean().abs() < 1e-12);
    }

    #[test]
    fn synthesis_guards() {
        let p = SpectrumParams::new(0.5, 1.0, 0.1, 0.3).unwrap();
        let coarse = SynthSpec::new(Grid3 { nx: 8, ny: 8, nz: 8, dx: 0.06, dz: 0.05 });
        assert!(matches!(synthesize(&coarse, &p, 1, 0), Err(TbError::GridResolution(_))));
        let mut big = SynthSpec::new(Grid3 { nx: 64, ny: 64, nz: 64, dx: 0.05, dz: 0.05 });
        big.max_cells = 1000;
        assert!(matches!(synthesize(&big, &p, 1, 0), Err(TbError::MemoryBudget(_))));
        let small = SynthSpec::new(Grid3 { nx: 4, ny: 4, nz: 4, dx: 0.05, dz: 0.05 });
        assert!(matches!(synthesize(&small, &p, 1, 0), Err(TbError::Extent(_))));
    }

    #[test]
    fn clip_enforces_bound_and_zero_mean() {
        let g = Grid3 { nx: 16, ny: 16, nz: 16, dx: 0.05, dz: 0.05 };
        let mut s = SynthSpec::new(g);
        s.clip = Clip::Sigmas(1.0);
        let p = SpectrumParams::new(0.5, 1.0, 0.1, 0.8).unwrap();
        let v = synthesize(&s, &p, 4, 0).unwrap();
        assert!(v.n_clipped > 0);
        assert!(v.samples.iter().all(|x| x.abs() <= v.clip_bound));
        assert!(v.mean().abs() < 1e-12);
    }

    #[test]
    fn axis_marginal_integrates_to_variance() {
        for p in [p05(), SpectrumParams::new(1.5, 1.0, 0.1, 4.0).unwrap()] {
            let total = 2.0 * axis_spectrum_cumulative(1e9, &p) / (2.0 * PI);
            assert!((total / p.variance() - 1.0).abs() < 1e-12, "{total} {}", p.variance());
        }
    }

    #[test]
    fn axis_synthesis_variance() {
        let p = p05();
        let spec = AxisSpec { clip: Clip::Sigmas(f64::INFINITY), ..AxisSpec::new(4096, 0.025) };
        let v = synthesize_axis(&spec, &p, 3, 0).unwrap();
        assert!((v.lattice_variance / p.variance() - 1.0).abs() < 1e-6);
        assert_eq!(v.grid.nx, 1);
        assert_eq!(v.axis().len(), 4096);
    }

    proptest! {
        #[test]
        fn spectrum_nonnegative_and_supported(kx in -30.0f64..30.0, ky in -30.0f64..30.0, kz in -30.0f64..30.0,
                                              a in 0.05f64..0.95) {
            let p = SpectrumParams::new(a, 1.0, 0.1, 2.0).unwrap();
            let s = power_spectrum([kx, ky, kz], &p);
            let k = (kx * kx + ky * ky + kz * kz).sqrt();
            prop_assert!(s >= 0.0);
            prop_assert_eq!(s > 0.0, k > 0.5 && k < 10.0);
        }

        #[test]
        fn covariance_symmetric_under_negation(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0) {
            let p = SpectrumParams::new(0.6, 1.0, 0.2, 8.0).unwrap();
            let a = covariance_mu([x, y], z, &p).unwrap();
            let b = covariance_mu([-x, -y], -z, &p).unwrap();
            prop_assert!((a - b).abs() < 1e-14);
            prop_assert!(a <= p.variance() * (1.0 + 1e-9));
        }
    }
}
