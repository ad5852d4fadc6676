//! Monte Carlo Ito runs against the deterministic moment equations: the
//! coherent field at its half-power range, and the mutual coherence at
//! probe pairs. The spatial study also checks the strong-fluctuation
//! collapse and the offset cusp.

use super::{linfit, need, plot_script, Csv, StudyOutput};
use crate::config::ExperimentConfig;
use crate::manifest::Gate;
use turbbeam::error::{Result, TbError};
use turbbeam::ito_solver::{run_moments, step_phase_std, MomentKind, MomentSpec, ScreenGenerator, MAX_STEP_PHASE_STD};
use turbbeam::moment_theory::{
    mean_intensity_closed_form, mean_intensity_strong, phi_deficit, r_alpha, solve_coherent_with, ClosedForm,
    CoherentOptions, TheoryScales, ThetaTable,
};
use turbbeam::paraxial_direct::{EnvelopeField, Lattice2, SourceModel};
use turbbeam::spectrum_medium::SpectrumParams;

fn setup(cfg: &ExperimentConfig) -> Result<(SpectrumParams, SourceModel, Lattice2)> {
    let p = cfg.spectrum().ok_or_else(|| TbError::InvalidParams("bad [params]".into()))?;
    let s = cfg.source_model().ok_or_else(|| TbError::InvalidParams("bad [source]".into()))?;
    let n = need(cfg.budget.grid, "budget.grid")?;
    let dx = need(cfg.budget.dx, "budget.dx")?;
    Ok((p, s, Lattice2::new(n, n, dx)))
}

/// The configured step count, raised until the screen phase budget holds.
fn steps_for(gen: &ScreenGenerator, k: f64, z: f64, requested: usize) -> Result<usize> {
    let sd1 = step_phase_std(gen, k, z)?;
    let min = ((sd1 / MAX_STEP_PHASE_STD).powi(2)).ceil() as usize;
    Ok(requested.max(min))
}

pub fn run_coherent(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let (p, src, lat) = setup(cfg)?;
    let paths = need(cfg.budget.paths, "budget.paths")?;
    let steps = need(cfg.budget.steps, "budget.steps")?;
    let omega = src.omega_o;
    let f = src.profile_field(omega, lat)?;
    let half = lat.nx as f64 * lat.dx / 2.0;
    let table = ThetaTable::new(&p, 1.5 * half)?;
    let solve = |z: f64| -> Result<EnvelopeField> {
        let opts = CoherentOptions { dz: Some(z / 200.0), ..Default::default() };
        solve_coherent_with(&f, |x| table.eval_vec(x), src.r_s, z, opts)
    };
    let mass = |z: f64| -> Result<f64> { Ok((solve(z)?.norm() / f.norm()).powi(2)) };

    // half-power range of the coherent field
    let (mut lo, mut hi) = (0.0, 0.25);
    while mass(hi)? > 0.5 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(TbError::Domain("coherent power never halves".into()));
        }
    }
    while hi - lo > 1e-4 * hi {
        let mid = 0.5 * (lo + hi);
        if mass(mid)? > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = 0.5 * (lo + hi);
    let det = solve(z)?;
    let det_mass = (det.norm() / f.norm()).powi(2);

    let gen = ScreenGenerator::new(&p, lat, cfg.seed())?;
    let n_steps = steps_for(&gen, src.k(omega), z, steps)?;
    let spec = MomentSpec { kind: MomentKind::MeanField, sites: vec![] };
    let est = run_moments(&[f.clone()], &gen, z, n_steps, paths, cfg.seed(), &spec)?;
    let mean = EnvelopeField::new(omega, det.k, lat, est.mean()?, z)?;
    let se = est.stderr()?;
    let err = mean.rel_l2(&det);

    let mut out = StudyOutput::default();
    out.gates.push(
        Gate::at_most("mean_field_rel_l2", err, 0.05).note(format!("{paths} paths, {n_steps} steps, {}^2 lattice, z={z:.5}", lat.nx)),
    );
    out.gates.push(Gate::within("coherent_mass", det_mass, 0.5, 0.01).note("deterministic coherent power at the chosen range"));

    let mut c = Csv::new(&["x", "mc_re", "mc_im", "mc_stderr", "det_re", "det_im"]);
    let jc = lat.ny / 2;
    for ix in 0..lat.nx {
        let i = jc * lat.nx + ix;
        let x = lat.coord(i)[0];
        c.row(&[x, mean.data[i].re, mean.data[i].im, se[i], det.data[i].re, det.data[i].im]);
    }
    out.add("mean_field_axis.csv", c.finish());
    out.add(
        "mean_field_axis.gp",
        plot_script("mean_field_axis.csv", "E psi along y=0", "x", "Re", &[(2, "Monte Carlo"), (5, "damped equation")], ""),
    );
    let mut m = Csv::new(&["z", "coherent_power"]);
    for j in 1..=16 {
        let zz = 2.0 * z * j as f64 / 16.0;
        m.row(&[zz, mass(zz)?]);
    }
    out.add("coherent_power.csv", m.finish());
    Ok(out)
}

/// Probe sites in units of r_s.
const SITES: [[f64; 2]; 8] = [[0.0, 0.0], [0.5, 0.0], [-0.5, 0.0], [0.0, 0.5], [1.0, 0.0], [0.0, -1.0], [0.75, 0.75], [-1.0, 0.5]];

pub fn run_spatial(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let (p, src, lat) = setup(cfg)?;
    let b = &cfg.budget;
    let paths = need(b.paths, "budget.paths")?;
    let steps = need(b.steps, "budget.steps")?;
    let z = need(b.z, "budget.z")?;
    let probes = need(b.probes, "budget.probes")?;
    let omega = src.omega_o;
    let f = src.profile_field(omega, lat)?;

    let sites: Vec<usize> = SITES
        .iter()
        .map(|s| {
            lat.index_of([s[0] * src.r_s, s[1] * src.r_s])
                .ok_or_else(|| TbError::Extent("probe site outside the lattice".into()))
        })
        .collect::<Result<_>>()?;
    let m = sites.len();
    let mut pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    pairs.extend((0..m).map(|i| (i, i)));
    if probes > pairs.len() {
        return Err(TbError::InvalidParams(format!("at most {} probe pairs available", pairs.len())));
    }
    pairs.truncate(probes);

    let gen = ScreenGenerator::new(&p, lat, cfg.seed())?;
    let n_steps = steps_for(&gen, src.k(omega), z, steps)?;
    let spec = MomentSpec { kind: MomentKind::Covariance, sites: sites.clone() };
    let est = run_moments(&[f], &gen, z, n_steps, paths, cfg.seed(), &spec)?;
    let block = est.block()?;
    let bse = est.block_stderr()?;
    let cf = ClosedForm::new(&src, omega, z, &p)?;
    let pos: Vec<[f64; 2]> = sites.iter().map(|&s| lat.coord(s)).collect();
    let inten: Vec<f64> = pos.iter().map(|x| cf.intensity(*x)).collect::<Result<_>>()?;

    let mut out = StudyOutput::default();
    let mut c = Csv::new(&["x1", "y1", "x2", "y2", "mc_re", "mc_im", "mc_stderr", "cf_re", "cf_im", "rel_err"]);
    let mut worst: f64 = 0.0;
    for &(i, j) in &pairs {
        let (a, bb) = (pos[i], pos[j]);
        let x = [0.5 * (a[0] + bb[0]), 0.5 * (a[1] + bb[1])];
        let y = [a[0] - bb[0], a[1] - bb[1]];
        let want = cf.covariance(x, y);
        let got = block[i * m + j];
        let rel = (got - want).norm() / (inten[i] * inten[j]).sqrt();
        worst = worst.max(rel);
        c.row(&[a[0], a[1], bb[0], bb[1], got.re, got.im, bse[i * m + j], want.re, want.im, rel]);
    }
    out.add("coherence_probes.csv", c.finish());
    out.gates.push(
        Gate::at_most("coherence_probes", worst, 0.05)
            .note(format!("{probes} pairs, |C_mc - C| / sqrt(I1 I2), {paths} paths, {n_steps} steps")),
    );

    // strong-fluctuation collapse of the exact intensity onto Psi_alpha(X/R)
    let (coll, rows) = strong_collapse(p.alpha)?;
    let mut s = Csv::new(&["radius_r", "x_over_r", "exact", "strong"]);
    for r in &rows {
        s.row(r);
    }
    out.add("strong_collapse.csv", s.finish());
    out.gates.push(Gate::at_most("intensity_collapse", coll, 0.10).note("largest |I / (W0 Psi(X/R)/R^2) - 1|, Q r_s = 1e4"));

    // cusp 1 - Phi(0,zeta)/Phi(0,0) ~ r_alpha zeta^{1+alpha}
    let a = p.alpha;
    let zs = [0.005, 0.01, 0.02, 0.04];
    let ds: Vec<f64> = zs.iter().map(|&zz| phi_deficit(zz, a)).collect::<Result<_>>()?;
    let lx: Vec<f64> = zs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ds.iter().map(|v| v.ln()).collect();
    let (slope, _) = linfit(&lx, &ly);
    let coef = (lx.iter().zip(&ly).map(|(x, y)| y - (1.0 + a) * x).sum::<f64>() / 4.0).exp();
    let ra = r_alpha(a)?;
    let mut k = Csv::new(&["zeta", "deficit", "r_alpha_law"]);
    for (zz, d) in zs.iter().zip(&ds) {
        k.row(&[*zz, *d, ra * zz.powf(1.0 + a)]);
    }
    out.add("cusp.csv", k.finish());
    out.add(
        "cusp.gp",
        plot_script("cusp.csv", "1 - Phi(0,zeta)/Phi(0,0)", "zeta", "deficit", &[(2, "quadrature"), (3, "r_alpha zeta^(1+alpha)")], "xy"),
    );
    out.gates.push(Gate::within("cusp_exponent", slope, 1.0 + a, 0.1));
    out.gates.push(Gate::within("cusp_coefficient", coef / ra, 1.0, 0.1).note(format!("fitted {coef:.5e} / r_alpha {ra:.5e}")));
    Ok(out)
}

/// Exact intensity against the strong form at Q r_s = 1e4 for two beam
/// radii; unit source radius and wavenumber, l_o Q = 1e-4.
fn strong_collapse(alpha: f64) -> Result<(f64, Vec<[f64; 4]>)> {
    let s = SourceModel::gaussian(1.0, 1.0, 1.0, 1.0)?;
    let q = 1e4;
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for rr in [3e3, 6e3] {
        // R/Q = z (d k^2 z)^... solved for z and chi at unit k
        let base = SpectrumParams::new(alpha, 1.0, 1e-4 / q, f64::INFINITY)?;
        let d1 = TheoryScales::new(&base)?.d_alpha;
        // Q^alpha = d z, R^alpha = d z^{1+alpha}/(1+alpha)  =>  z = ((1+alpha) R^alpha / Q^alpha)^{1/alpha}
        let z = ((1.0 + alpha) * (rr / q).powf(alpha)).powf(1.0 / alpha);
        let p = base.with_chi(q.powf(alpha) / z / d1);
        for x in [0.0, 0.25, 0.5, 1.0] {
            let ex = mean_intensity_closed_form(&s, 1.0, [x * rr, 0.0], z, &p)?;
            let st = mean_intensity_strong(&s, 1.0, z, &p, [x * rr, 0.0])?;
            worst = worst.max((ex / st.value - 1.0).abs());
            rows.push([rr, x, ex, st.value]);
        }
    }
    Ok((worst, rows))
}
