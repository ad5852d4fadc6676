//! Medium validation: ensemble variance and z-covariance of synthesized
//! volumes against the quadrature, isotropy, clip distortion, determinism.

use super::{mean_var, need, plot_script, Csv, StudyOutput};
use crate::config::ExperimentConfig;
use crate::manifest::Gate;
use rayon::prelude::*;
use turbbeam::error::{Result, TbError};
use turbbeam::spectrum_medium::{band_power, covariance_mu, synthesize, Clip, Grid3, SynthSpec};

pub fn run(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let p = cfg.spectrum().ok_or_else(|| TbError::InvalidParams("bad [params]".into()))?;
    let b = &cfg.budget;
    let n_real = need(b.paths, "budget.paths")?;
    let n = need(b.grid, "budget.grid")?;
    let nz = need(b.nz, "budget.nz")?;
    let dx = need(b.dx, "budget.dx")?;
    let probes = need(b.probes, "budget.probes")?;
    let clip = need(b.clip_sigmas, "budget.clip_sigmas")?;
    if probes + 1 >= nz / 2 {
        return Err(TbError::InvalidParams(format!("{probes} z offsets do not fit in nz={nz}")));
    }
    let grid = Grid3 { nx: n, ny: n, nz, dx, dz: dx };
    let mut spec = SynthSpec::new(grid);
    spec.clip = Clip::Sigmas(clip);
    let seed = cfg.seed();
    let shift_iso = 2isize;

    // per realization: mean square, z-lags 1..=probes, then x, y, z at the isotropy lag
    let rows: Vec<Vec<f64>> = (0..n_real)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let v = synthesize(&spec, &p, seed, i)?;
            let mut r = Vec::with_capacity(probes + 4);
            r.push(v.autocovariance([0, 0, 0]));
            for l in 1..=probes {
                r.push(v.autocovariance([0, 0, l as isize]));
            }
            r.push(v.autocovariance([shift_iso, 0, 0]));
            r.push(v.autocovariance([0, shift_iso, 0]));
            r.push(v.autocovariance([0, 0, shift_iso]));
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let col = |j: usize| -> Vec<f64> { rows.iter().map(|r| r[j]).collect() };
    let se = |x: &[f64]| -> (f64, f64) {
        let (m, v) = mean_var(x);
        (m, (v / x.len() as f64).sqrt())
    };

    let mut out = StudyOutput::default();
    let var_cf = p.variance();
    let (vm, vse) = se(&col(0));
    out.gates.push(
        Gate::at_most("variance", (vm - var_cf).abs() / vse, 3.0)
            .note(format!("ensemble {vm:.6e} +- {vse:.2e} vs closed form {var_cf:.6e}; z-score")),
    );

    let mut c = Csv::new(&["z", "empirical", "stderr", "quadrature"]);
    c.row(&[0.0, vm, vse, var_cf]);
    let mut worst: f64 = 0.0;
    for l in 1..=probes {
        let z = l as f64 * dx;
        let (m, s) = se(&col(l));
        let q = covariance_mu([0.0, 0.0], z, &p)?;
        worst = worst.max((m - q).abs() / s);
        c.row(&[z, m, s, q]);
    }
    out.add("covariance_z.csv", c.finish());
    out.add(
        "covariance_z.gp",
        plot_script("covariance_z.csv", "Cov mu along z", "z", "Cov", &[(2, "ensemble"), (4, "quadrature")], ""),
    );
    out.gates.push(Gate::at_most("covariance_z", worst, 3.0).note(format!("largest z-score over {probes} offsets")));

    // isotropy: pairwise differences, paired per realization
    let (ax, ay, az) = (col(probes + 1), col(probes + 2), col(probes + 3));
    let mut iso: f64 = 0.0;
    for (a, b) in [(&ax, &ay), (&ax, &az), (&ay, &az)] {
        let d: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
        let (m, s) = se(&d);
        iso = iso.max(m.abs() / s);
    }
    out.gates.push(Gate::at_most("isotropy", iso, 3.0).note(format!("lag {} along x, y, z; largest z-score", shift_iso as f64 * dx)));

    // clip distortion of band power, same noise with and without the clip
    let mut free = spec;
    free.clip = Clip::Sigmas(f64::INFINITY);
    let a = synthesize(&spec, &p, seed, 0)?;
    let f = synthesize(&free, &p, seed, 0)?;
    let rel = (band_power(&a) / band_power(&f) - 1.0).abs();
    out.gates.push(Gate::at_most("clip_power", rel, 0.01).note(format!("clip at {clip} sigma, {} samples clipped", a.n_clipped)));

    // measured distortion at tighter clips, for the record
    let fp = band_power(&f);
    let mut d = Csv::new(&["clip_sigmas", "n_clipped", "band_power_rel_change"]);
    for level in [clip, 4.0, 3.0, 2.0] {
        let mut c = spec;
        c.clip = Clip::Sigmas(level);
        let v = synthesize(&c, &p, seed, 0)?;
        d.row(&[level, v.n_clipped as f64, band_power(&v) / fp - 1.0]);
    }
    out.add("clip_distortion.csv", d.finish());

    let again = synthesize(&spec, &p, seed, 0)?;
    let same = again.samples == a.samples;
    out.gates.push(Gate::at_least("determinism", same as u8 as f64, 1.0).note("same seed and stream twice"));

    let mut s = Csv::new(&["realization", "mean_square", "cov_x", "cov_y", "cov_z"]);
    for (i, r) in rows.iter().enumerate() {
        s.row(&[i as f64, r[0], r[probes + 1], r[probes + 2], r[probes + 3]]);
    }
    out.add("realizations.csv", s.finish());
    Ok(out)
}
