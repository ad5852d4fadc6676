//! Deterministic mean field: dz M = (i/2k) Lap M - (k^2/4) Theta(X) M by a
//! Strang split with exact spectral diffraction.

use super::theta::ThetaTable;
use crate::error::{Result, TbError};
use crate::paraxial_direct::{EnvelopeField, Fresnel, Lattice2, SourceModel};
use crate::spectrum_medium::SpectrumParams;

#[derive(Debug, Clone, Copy)]
pub struct CoherentOptions {
    pub n: usize,
    /// lattice step; None picks r_s / 4
    pub dx: Option<f64>,
    /// range step; None picks one from the damping and diffraction rates
    pub dz: Option<f64>,
    /// largest damping exponent k^2 Theta dz / 4 allowed in one step
    pub max_step_damping: f64,
}

impl Default for CoherentOptions {
    fn default() -> Self {
        CoherentOptions { n: 128, dx: None, dz: None, max_step_damping: 0.5 }
    }
}

/// M_1 at z_target from the source profile (unit spectral amplitude).
pub fn solve_coherent(source: &SourceModel, omega: f64, params: &SpectrumParams, z_target: f64) -> Result<EnvelopeField> {
    solve_coherent_opts(source, omega, params, z_target, CoherentOptions::default())
}

pub fn solve_coherent_opts(
    source: &SourceModel,
    omega: f64,
    params: &SpectrumParams,
    z_target: f64,
    opts: CoherentOptions,
) -> Result<EnvelopeField> {
    source.validate()?;
    let dx = opts.dx.unwrap_or(source.r_s / 4.0);
    let lattice = Lattice2::new(opts.n, opts.n, dx);
    let init = source.profile_field(omega, lattice)?;
    let half = opts.n as f64 * dx / 2.0;
    let table = ThetaTable::new(params, 1.5 * half)?;
    solve_coherent_with(&init, |x| table.eval_vec(x), source.r_s, z_target, opts)
}

/// Split-step evolution of an initial field under a pointwise damping
/// function theta(X); r_s is the scale the lattice has to resolve.
pub fn solve_coherent_with<F: Fn([f64; 2]) -> f64>(
    initial: &EnvelopeField,
    theta: F,
    r_s: f64,
    z_target: f64,
    opts: CoherentOptions,
) -> Result<EnvelopeField> {
    let lat = initial.lattice;
    let k = initial.k;
    if !(z_target >= initial.z) {
        return Err(TbError::InvalidParams(format!("target z={z_target} behind field at z={}", initial.z)));
    }
    if lat.dx > r_s / 3.0 {
        return Err(TbError::GridResolution(format!("dx={} does not resolve r_s={r_s}", lat.dx)));
    }
    let half = lat.nx.min(lat.ny) as f64 * lat.dx / 2.0;
    if half < 3.0 * r_s {
        return Err(TbError::Extent(format!("box half-width {half} below 3 r_s")));
    }
    let th: Vec<f64> = (0..lat.len()).map(|i| theta(lat.coord(i))).collect();
    let tmax = th.iter().cloned().fold(0.0, f64::max);
    let span = z_target - initial.z;
    let dz = match opts.dz {
        Some(d) => {
            if !(d > 0.0) || 0.25 * k * k * tmax * d > opts.max_step_damping {
                return Err(TbError::StepCriterion(format!(
                    "dz={d}: damping exponent {} per step exceeds {}",
                    0.25 * k * k * tmax * d,
                    opts.max_step_damping
                )));
            }
            d
        }
        None => {
            let by_damp = if tmax > 0.0 { 4.0 * opts.max_step_damping / (k * k * tmax) } else { f64::INFINITY };
            // keep the beam's diffraction per step below a cell
            let by_diff = k * r_s * lat.dx;
            by_damp.min(by_diff).min(span.max(f64::MIN_POSITIVE))
        }
    };
    let steps = if span == 0.0 { 0 } else { (span / dz).ceil() as usize };
    let mut data = initial.data.clone();
    let mut fr = Fresnel::new(lat);
    if steps > 0 {
        let h = span / steps as f64;
        let damp: Vec<f64> = th.iter().map(|t| (-0.25 * k * k * t * h).exp()).collect();
        for _ in 0..steps {
            fr.step(&mut data, k, 0.5 * h);
            data.iter_mut().zip(&damp).for_each(|(d, m)| *d *= m);
            fr.step(&mut data, k, 0.5 * h);
        }
    }
    let mut out = EnvelopeField::new(initial.omega, k, lat, data, z_target)?;
    out.norm0 = initial.norm0;
    Ok(out)
}
