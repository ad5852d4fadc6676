//! Central travel time: Hurst index per exponent, variance growth,
//! Gaussianity of a clipped medium, the eps^alpha collapse and the
//! coherent attenuation E exp(i k Z).

use super::{linfit, mean_var, need, plot_script, variance_with_se, Csv, StudyOutput};
use crate::config::ExperimentConfig;
use crate::manifest::Gate;
use rand::Rng;
use rayon::prelude::*;
use turbbeam::error::{Result, TbError};
use turbbeam::moment_theory::TheoryScales;
use turbbeam::paraxial_direct::{central_travel_time, coherent_attenuation, hurst_estimate, TravelTimePath};
use turbbeam::rng;
use turbbeam::spectrum_medium::{synthesize_axis, AxisSpec, Clip, SpectrumParams};

/// Stream blocks keep each ensemble on its own random numbers.
const BLOCK: u64 = 1 << 20;

fn ensemble(p: &SpectrumParams, eps: f64, z_grid: &[f64], n: u64, clip: Clip, seed: u64, block: u64) -> Result<Vec<TravelTimePath>> {
    let dz = p.l_inner / 4.0;
    let last = *z_grid.last().unwrap();
    let nz = (last / (eps * eps) / dz).ceil() as usize + 2;
    let spec = AxisSpec { clip, ..AxisSpec::new(nz, dz) };
    (0..n)
        .into_par_iter()
        .map(|i| {
            let m = synthesize_axis(&spec, p, seed, block * BLOCK + i)?;
            central_travel_time(&m, eps, z_grid)
        })
        .collect()
}

fn grid(z: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| z * i as f64 / (n - 1) as f64).collect()
}

/// Skewness and excess kurtosis.
fn shape(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

fn bootstrap_shape(x: &[f64], seed: u64, n_boot: usize) -> (f64, f64) {
    let mut r = rng::stream(seed, 0x5348_4150);
    let mut s = Vec::with_capacity(n_boot);
    let mut k = Vec::with_capacity(n_boot);
    let mut buf = vec![0.0; x.len()];
    for _ in 0..n_boot {
        for b in buf.iter_mut() {
            *b = x[r.gen_range(0..x.len())];
        }
        let (a, c) = shape(&buf);
        s.push(a);
        k.push(c);
    }
    (mean_var(&s).1.sqrt(), mean_var(&k).1.sqrt())
}

pub fn run(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let p = cfg.spectrum().ok_or_else(|| TbError::InvalidParams("bad [params]".into()))?;
    let b = &cfg.budget;
    let n = need(b.paths, "budget.paths")?;
    let ns = need(b.samples, "budget.samples")?;
    let z = need(b.z, "budget.z")?;
    let eps = need(b.epsilon, "budget.epsilon")?;
    let epsilons = need(b.epsilons.clone(), "budget.epsilons")?;
    let alphas = need(b.alphas.clone(), "budget.alphas")?;
    let clip = need(b.clip_sigmas, "budget.clip_sigmas")?;
    let seed = cfg.seed();
    let free = Clip::Sigmas(f64::INFINITY);
    let zg = grid(z, ns);
    let mut out = StudyOutput::default();
    let mut block = 0;

    let mut hc = Csv::new(&["alpha", "hurst", "stderr", "expected"]);
    let mut main_paths = None;
    for &a in &alphas {
        let pa = SpectrumParams { alpha: a, ..p };
        pa.validate()?;
        let paths = ensemble(&pa, eps, &zg, n, free, seed, block)?;
        block += 1;
        let h = hurst_estimate(&paths)?;
        let want = (1.0 + a) / 2.0;
        hc.row(&[a, h.h, h.stderr, want]);
        out.gates.push(Gate::within(&format!("hurst_alpha_{a}"), h.h, want, 0.05).note(format!("bootstrap stderr {:.3}", h.stderr)));
        if a == p.alpha {
            main_paths = Some(paths);
        }
    }
    out.add("hurst.csv", hc.finish());
    // reuse the ensemble at the configured alpha when the sweep has it
    let paths = match main_paths {
        Some(v) => v,
        None => {
            let v = ensemble(&p, eps, &zg, n, free, seed, block)?;
            block += 1;
            v
        }
    };

    // Var Z(z) against C_H^2 z^2H eps^-2alpha
    let sc = TheoryScales::new(&p)?;
    let mut vc = Csv::new(&["z", "variance", "stderr", "theory"]);
    // slope from 16 log-spaced samples over the whole grid
    let fit_at: Vec<usize> = (0..16)
        .map(|i| ((ns - 1) as f64).powf(i as f64 / 15.0).round() as usize)
        .collect();
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (j, &zz) in zg.iter().enumerate().skip(1) {
        let col: Vec<f64> = paths.iter().map(|q| q.z_values[j]).collect();
        let (v, s) = variance_with_se(&col);
        let th = sc.c_h * sc.c_h * zz.powf(2.0 * sc.h) * eps.powf(-2.0 * p.alpha);
        vc.row(&[zz, v, s, th]);
        if fit_at.contains(&j) {
            lx.push(zz.ln());
            ly.push(v.ln());
        }
    }
    out.add("variance.csv", vc.finish());
    out.add(
        "variance.gp",
        plot_script("variance.csv", "Var Z^eps(z)", "z", "variance", &[(2, "ensemble"), (4, "C_H^2 z^2H eps^-2alpha")], "xy"),
    );
    let (slope, _) = linfit(&lx, &ly);
    out.gates.push(Gate::within("variance_slope", slope, 2.0 * sc.h, 0.1).note(format!("log-log slope, {} log-spaced ranges from z/{} to z", lx.len(), ns - 1)));

    // Gaussianity with a clipped medium
    let ge = eps.min(0.1);
    let clipped = ensemble(&p, ge, &[0.0, z], n, Clip::Sigmas(clip), seed, block)?;
    block += 1;
    let zs: Vec<f64> = clipped.iter().map(|q| q.z_values[1]).collect();
    let sd = mean_var(&zs).1.sqrt();
    let normed: Vec<f64> = zs.iter().map(|v| v / sd).collect();
    let (sk, ku) = shape(&normed);
    let (sk_se, ku_se) = bootstrap_shape(&normed, seed, 500);
    out.gates.push(Gate::within("skewness", sk, 0.0, 3.0 * sk_se).note(format!("mu clipped at {clip} sigma, eps={ge}")));
    out.gates.push(Gate::within("kurtosis", ku, 0.0, 3.0 * ku_se).note("excess kurtosis"));

    // eps^alpha Z^eps(z) has an eps-independent variance
    let mut cc = Csv::new(&["epsilon", "variance_scaled", "stderr", "theory"]);
    let th = sc.c_h * sc.c_h * z.powf(2.0 * sc.h);
    let mut vs = Vec::new();
    for &e in &epsilons {
        let ps = ensemble(&p, e, &[0.0, z], n, free, seed, block)?;
        block += 1;
        let col: Vec<f64> = ps.iter().map(|q| e.powf(p.alpha) * q.z_values[1]).collect();
        let (v, s) = variance_with_se(&col);
        cc.row(&[e, v, s, th]);
        vs.push((v, s));
    }
    out.add("collapse.csv", cc.finish());
    let mut worst: f64 = 0.0;
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            worst = worst.max((vs[i].0 - vs[j].0).abs() / vs[i].1.hypot(vs[j].1));
        }
    }
    out.gates.push(Gate::at_most("epsilon_collapse", worst, 3.0).note("largest pairwise z-score of Var[eps^alpha Z]"));

    // E exp(i k Z^eps(eps^{2alpha/(1+alpha)} z)) at five ranges, k = 1
    let k = 1.0;
    let targets = [0.9, 0.7, 0.5, 0.35, 0.2];
    let zr: Vec<f64> = targets.iter().map(|a: &f64| ((-2.0 * a.ln()).sqrt() / (sc.c_h * k)).powf(1.0 / sc.h)).collect();
    let shrink = eps.powf(2.0 * p.alpha / (1.0 + p.alpha));
    let zscaled: Vec<f64> = std::iter::once(0.0).chain(zr.iter().map(|v| v * shrink)).collect();
    let ps = ensemble(&p, eps, &zscaled, n, free, seed, block)?;
    let mut ac = Csv::new(&["z", "mc_re", "mc_im", "stderr_re", "theory"]);
    let mut worst: f64 = 0.0;
    for (j, &zz) in zr.iter().enumerate() {
        let re: Vec<f64> = ps.iter().map(|q| (k * q.z_values[j + 1]).cos()).collect();
        let im: Vec<f64> = ps.iter().map(|q| (k * q.z_values[j + 1]).sin()).collect();
        let (mr, vr) = mean_var(&re);
        let (mi, vi) = mean_var(&im);
        let (sr, si) = ((vr / n as f64).sqrt(), (vi / n as f64).sqrt());
        let th = coherent_attenuation(k, zz, &sc)?;
        worst = worst.max((mr - th).abs() / sr).max(mi.abs() / si);
        ac.row(&[zz, mr, mi, sr, th]);
    }
    out.add("attenuation.csv", ac.finish());
    out.add(
        "attenuation.gp",
        plot_script("attenuation.csv", "E exp(ikZ) vs exp(-C_H^2 k^2 z^2H/2)", "z", "attenuation", &[(2, "Monte Carlo"), (5, "limit")], ""),
    );
    out.gates.push(Gate::at_most("attenuation", worst, 3.0).note("largest z-score over five ranges"));
    Ok(out)
}
