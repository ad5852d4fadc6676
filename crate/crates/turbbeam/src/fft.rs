//! 2D and 3D complex FFTs on row-major lattices (x fastest), built from
//! rustfft row passes and explicit transposes.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

pub type C64 = Complex64;

#[derive(Clone)]
pub struct Fft2 {
    pub nx: usize,
    pub ny: usize,
    fx: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.nx, self.ny)
    }
}

fn rows(plan: &Arc<dyn Fft<f64>>, data: &mut [C64], n: usize) {
    if data.len() >= 1 << 14 {
        data.par_chunks_mut(n).for_each(|r| plan.process(r));
    } else {
        plan.process(data);
    }
}

pub fn transpose(src: &[C64], dst: &mut [C64], nx: usize, ny: usize) {
    // src is ny rows of nx; dst becomes nx rows of ny
    const B: usize = 32;
    for by in (0..ny).step_by(B) {
        for bx in (0..nx).step_by(B) {
            for y in by..(by + B).min(ny) {
                for x in bx..(bx + B).min(nx) {
                    dst[x * ny + y] = src[y * nx + x];
                }
            }
        }
    }
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut p = FftPlanner::new();
        Fft2 {
            nx,
            ny,
            fx: p.plan_fft_forward(nx),
            ix: p.plan_fft_inverse(nx),
            fy: p.plan_fft_forward(ny),
            iy: p.plan_fft_inverse(ny),
        }
    }

    fn run(&self, data: &mut [C64], fwd: bool) {
        assert_eq!(data.len(), self.nx * self.ny);
        let (px, py) = if fwd { (&self.fx, &self.fy) } else { (&self.ix, &self.iy) };
        rows(px, data, self.nx);
        if self.ny > 1 {
            let mut t = vec![C64::new(0.0, 0.0); data.len()];
            transpose(data, &mut t, self.nx, self.ny);
            rows(py, &mut t, self.ny);
            transpose(&t, data, self.ny, self.nx);
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, true);
    }

    /// Inverse transform including the 1/N factor.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, false);
        let s = 1.0 / (self.nx * self.ny) as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Unnormalized 3D forward (fwd = true) or 1/N-normalized inverse transform
/// over z-planes of nx*ny values.
pub fn fft3(data: &mut [C64], nx: usize, ny: usize, nz: usize, fwd: bool) {
    let nxy = nx * ny;
    assert_eq!(data.len(), nxy * nz);
    let f2 = Fft2::new(nx, ny);
    data.par_chunks_mut(nxy).for_each(|p| f2.run(p, fwd));
    if nz > 1 {
        let mut p = FftPlanner::new();
        let pz = if fwd { p.plan_fft_forward(nz) } else { p.plan_fft_inverse(nz) };
        let mut t = vec![C64::new(0.0, 0.0); data.len()];
        transpose(data, &mut t, nxy, nz);
        rows(&pz, &mut t, nz);
        transpose(&t, data, nz, nxy);
    }
    if !fwd {
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Angular wavenumbers of an n-point lattice with spacing d, FFT order.
pub fn wavenumbers(n: usize, d: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let j = if i < (n + 1) / 2 { i as f64 } else { i as f64 - n as f64 };
            2.0 * PI * j / (n as f64 * d)
        })
        .collect()
}
