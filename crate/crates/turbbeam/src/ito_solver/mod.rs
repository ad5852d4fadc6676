//! White-noise limit: split-step Ito-Schroedinger propagation through
//! Brownian phase screens, moment accumulation and the Xi oracle.

mod moments;
mod oracle;

pub use moments::{accumulate_moments, run_moments, MomentEstimate, MomentKind, MomentSpec};
pub use oracle::{kanter_sample, xi_oracle, xi_oracle_curve, xi_zero, OracleOptions, XiEstimate};

use crate::error::{Result, TbError};
use crate::fft::{wavenumbers, Fft2, C64};
use crate::moment_theory::theta;
use crate::paraxial_direct::{EnvelopeField, Fresnel, Lattice2};
use crate::rng::{self, Rng};
use crate::spectrum_medium::SpectrumParams;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

/// gamma(X, X') = Theta(X) + Theta(X') - Theta(X - X'), the covariance
/// of the origin-pinned Brownian field per unit range.
pub fn gamma_kernel(x1: [f64; 2], x2: [f64; 2], p: &SpectrumParams) -> Result<f64> {
    Ok(theta(x1, p)? + theta(x2, p)? - theta([x1[0] - x2[0], x1[1] - x2[1]], p)?)
}

/// 2D density of the transverse field, chi kappa^{-2-alpha} / (4 pi^2) on
/// the band; its (1 - cos) transform is Theta.
fn density(kx: f64, ky: f64, p: &SpectrumParams, lo: f64, hi: f64) -> f64 {
    let r = kx.hypot(ky);
    if r > lo && r < hi {
        p.chi * r.powf(-2.0 - p.alpha) / (4.0 * PI * PI)
    } else {
        0.0
    }
}

/// Cell weight int f |kappa|^2 / |kappa_c|^2: the mode at the cell centre
/// then carries the cell's exact share of the structure function at
/// separations where the cell acts quadratically, which is what matters
/// for the strongly weighted cells next to the origin.
fn cell_integral(c: [f64; 2], h: f64, p: &SpectrumParams, lo: f64, hi: f64, force_fine: bool) -> f64 {
    let kc2 = c[0] * c[0] + c[1] * c[1];
    let density = |x: f64, y: f64, p: &SpectrumParams, lo: f64, hi: f64| density(x, y, p, lo, hi) * (x * x + y * y) / kc2;
    let near = |a: f64| if a.abs() <= 0.5 * h { 0.0 } else { a.abs() - 0.5 * h };
    let rmin = near(c[0]).hypot(near(c[1]));
    let rmax = (c[0].abs() + 0.5 * h).hypot(c[1].abs() + 0.5 * h);
    if rmax <= lo || rmin >= hi {
        return 0.0;
    }
    if !force_fine && rmin > lo && rmax < hi && rmin > 2.0 * h {
        let g = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
        let w = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += w[i] * w[j] * density(c[0] + 0.5 * h * g[i], c[1] + 0.5 * h * g[j], p, lo, hi);
            }
        }
        return s * h * h / 4.0;
    }
    const M: usize = 12;
    let mut s = 0.0;
    for i in 0..M {
        for j in 0..M {
            let f = |n: usize| (n as f64 + 0.5) / M as f64 - 0.5;
            s += density(c[0] + h * f(i), c[1] + h * f(j), p, lo, hi);
        }
    }
    s * h * h / (M * M) as f64
}

#[derive(Debug, Clone)]
struct SubMode {
    kx: f64,
    ky: f64,
    amp: f64,
}

/// Brownian screen sampler on a periodic lattice. One complex FFT yields two
/// independent real screens (real and imaginary parts); three levels of
/// 3x3 subharmonics fill in the lattice's central cell.
#[derive(Debug, Clone)]
pub struct ScreenGenerator {
    pub params: SpectrumParams,
    pub lattice: Lattice2,
    pub seed: u64,
    amp: Vec<f64>,
    sub: Vec<SubMode>,
    fft: Fft2,
    rng: Rng,
    spare: Option<Vec<f64>>,
}

pub const SUBHARMONIC_LEVELS: usize = 3;

impl ScreenGenerator {
    pub fn new(params: &SpectrumParams, lattice: Lattice2, seed: u64) -> Result<Self> {
        params.validate()?;
        if lattice.nx < 4 || lattice.ny < 4 || !(lattice.dx > 0.0) {
            return Err(TbError::GridResolution("screen lattice needs at least 4x4 cells".into()));
        }
        if PI / lattice.dx < params.kappa_hi() * (1.0 - 1e-12) {
            return Err(TbError::GridResolution(format!(
                "Nyquist {} below the band edge 1/l_o = {}",
                PI / lattice.dx,
                params.kappa_hi()
            )));
        }
        if lattice.nx != lattice.ny {
            return Err(TbError::GridResolution("screen lattice must be square".into()));
        }
        let lo = if params.outer_is_infinite() { 0.0 } else { params.kappa_lo() };
        let hi = params.kappa_hi();
        let kx = wavenumbers(lattice.nx, lattice.dx);
        let ky = wavenumbers(lattice.ny, lattice.dx);
        let h = kx[1];
        let n = lattice.len() as f64;
        let mut amp = vec![0.0; lattice.len()];
        for (iy, y) in ky.iter().enumerate() {
            for (ix, x) in kx.iter().enumerate() {
                if ix == 0 && iy == 0 {
                    continue;
                }
                // complex noise splits the weight between two screens
                let w = cell_integral([*x, *y], h, params, lo, hi, false);
                amp[iy * lattice.nx + ix] = n * (2.0 * w).sqrt();
            }
        }
        let mut sub = Vec::new();
        for level in 1..=SUBHARMONIC_LEVELS {
            let d = h / 3f64.powi(level as i32);
            for i in -1i32..=1 {
                for j in -1i32..=1 {
                    if i == 0 && j == 0 {
                        continue;
                    }
                    let c = [i as f64 * d, j as f64 * d];
                    let w = cell_integral(c, d, params, lo, hi, true);
                    sub.push(SubMode { kx: c[0], ky: c[1], amp: (2.0 * w).sqrt() });
                }
            }
        }
        Ok(ScreenGenerator {
            params: *params,
            lattice,
            seed,
            amp,
            sub,
            fft: Fft2::new(lattice.nx, lattice.ny),
            rng: rng::stream(seed, 0),
            spare: None,
        })
    }

    /// Same modal weights on a fresh, disjoint random stream.
    pub fn reseeded(&self, seed: u64, stream: u64) -> Self {
        let mut g = self.clone();
        g.seed = seed;
        g.rng = rng::stream(seed, stream);
        g.spare = None;
        g
    }

    fn fill_pair(&mut self) -> (Vec<f64>, Vec<f64>) {
        let lat = self.lattice;
        let mut z: Vec<C64> = self
            .amp
            .iter()
            .map(|&a| {
                if a == 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    let g1: f64 = StandardNormal.sample(&mut self.rng);
                    let g2: f64 = StandardNormal.sample(&mut self.rng);
                    C64::new(g1, g2) * (a * std::f64::consts::FRAC_1_SQRT_2)
                }
            })
            .collect();
        self.fft.inverse(&mut z);
        let xs: Vec<f64> = (0..lat.nx).map(|i| lat.coord(i)[0]).collect();
        let ys: Vec<f64> = (0..lat.ny).map(|j| lat.coord(j * lat.nx)[1]).collect();
        for m in &self.sub {
            let g1: f64 = StandardNormal.sample(&mut self.rng);
            let g2: f64 = StandardNormal.sample(&mut self.rng);
            let c = C64::new(g1, g2) * (m.amp * std::f64::consts::FRAC_1_SQRT_2);
            let ex: Vec<C64> = xs.iter().map(|x| C64::from_polar(1.0, m.kx * x)).collect();
            for (j, y) in ys.iter().enumerate() {
                let ey = c * C64::from_polar(1.0, m.ky * y);
                let row = &mut z[j * lat.nx..(j + 1) * lat.nx];
                row.iter_mut().zip(&ex).for_each(|(v, e)| *v += ey * e);
            }
        }
        let o = z[lat.center()];
        (z.iter().map(|v| v.re - o.re).collect(), z.iter().map(|v| v.im - o.im).collect())
    }

    /// sqrt(dz) (B(X) - B(0)) on the lattice.
    pub fn generate_screen(&mut self, dz: f64) -> Result<Vec<f64>> {
        if !(dz > 0.0) || !dz.is_finite() {
            return Err(TbError::InvalidParams(format!("screen step dz={dz} must be > 0")));
        }
        let mut s = match self.spare.take() {
            Some(s) => s,
            None => {
                let (a, b) = self.fill_pair();
                self.spare = Some(b);
                a
            }
        };
        let r = dz.sqrt();
        s.iter_mut().for_each(|v| *v *= r);
        Ok(s)
    }
}

/// Per-step screen phase std k sqrt(2 Theta dz) / 2 at the farthest lattice
/// point, for the largest wavenumber.
pub fn step_phase_std(gen: &ScreenGenerator, k_max: f64, dz: f64) -> Result<f64> {
    let lat = gen.lattice;
    let c = lat.coord(0);
    Ok(k_max * (2.0 * theta(c, &gen.params)? * dz).sqrt() / 2.0)
}

pub const MAX_STEP_PHASE_STD: f64 = 0.5;

/// Advance fields at several frequencies through the same screens. The
/// range increment z_target is split into n_steps equal steps.
pub fn propagate_ito(
    initial: &[EnvelopeField],
    gen: &mut ScreenGenerator,
    z_target: f64,
    n_steps: usize,
) -> Result<Vec<EnvelopeField>> {
    let first = initial.first().ok_or_else(|| TbError::InvalidParams("no fields to propagate".into()))?;
    let lat = first.lattice;
    for f in initial {
        if f.lattice != lat || f.z != first.z {
            return Err(TbError::Mismatch("fields must share one lattice and range".into()));
        }
    }
    if gen.lattice != lat {
        return Err(TbError::Mismatch("screen and field lattices differ".into()));
    }
    if n_steps == 0 || !(z_target > 0.0) {
        return Err(TbError::InvalidParams(format!("need z_target > 0 and n_steps > 0, got {z_target}, {n_steps}")));
    }
    let dz = z_target / n_steps as f64;
    let k_max = initial.iter().map(|f| f.k.abs()).fold(0.0, f64::max);
    let sd = step_phase_std(gen, k_max, dz)?;
    if sd > MAX_STEP_PHASE_STD {
        return Err(TbError::StepCriterion(format!(
            "screen phase std {sd:.3} rad per step exceeds {MAX_STEP_PHASE_STD}; use more than {n_steps} steps"
        )));
    }
    let mut out: Vec<EnvelopeField> = initial.to_vec();
    let mut fr = Fresnel::new(lat);
    for step in 0..n_steps {
        let screen = gen.generate_screen(dz)?;
        for f in out.iter_mut() {
            // consecutive half steps merge into one full step
            let h = if step == 0 { 0.5 * dz } else { dz };
            fr.step(&mut f.data, f.k, h);
            let k = f.k;
            f.data.iter_mut().zip(&screen).for_each(|(d, s)| *d *= C64::from_polar(1.0, 0.5 * k * s));
        }
    }
    for f in out.iter_mut() {
        fr.step(&mut f.data, f.k, 0.5 * dz);
        f.z = first.z + z_target;
    }
    Ok(out)
}
