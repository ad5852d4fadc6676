//! Frequency coherence Xi_alpha from the kinetic solver and the Levy-flight
//! Monte Carlo, and the pulse envelope built on a kinetic Xi table.

use super::{need, plot_script, Csv, StudyOutput};
use crate::config::ExperimentConfig;
use crate::manifest::Gate;
use turbbeam::error::{Result, TbError};
use turbbeam::ito_solver::{xi_oracle_curve, OracleOptions};
use turbbeam::moment_theory::{
    psi_zero, pulse_intensity, pulse_rms_width, xi_kinetic, xi_table, KineticResolution, TheoryScales, XiSample, XiTable,
};
use turbbeam::paraxial_direct::SourceModel;

pub fn run_frequency(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let p = cfg.spectrum().ok_or_else(|| TbError::InvalidParams("bad [params]".into()))?;
    let b = &cfg.budget;
    let res = KineticResolution { n: need(b.kinetic_n, "budget.kinetic_n")?, ..Default::default() };
    let ks_cfg = need(b.k_tilde.clone(), "budget.k_tilde")?;
    let opts = OracleOptions {
        n_paths: need(b.oracle_paths, "budget.oracle_paths")?,
        n_steps: need(b.steps, "budget.steps")?,
        seed: cfg.seed(),
        ..Default::default()
    };
    let a = p.alpha;
    let phi = psi_zero(a);
    let ks: Vec<f64> = std::iter::once(0.0).chain(ks_cfg.iter().copied()).collect();
    let kin = ks.iter().map(|&k| xi_kinetic(a, k, &res)).collect::<Result<Vec<_>>>()?;
    let mc = xi_oracle_curve(a, &ks, &opts)?;

    let mut out = StudyOutput::default();
    out.gates.push(Gate::within("xi0_kinetic", kin[0].value.re / phi, 1.0, 0.01).note(format!("Phi(0,0) = {phi:.6e}")));
    out.gates.push(
        Gate::at_most("xi0_mc", (mc[0].value.re - phi).abs() / mc[0].stderr_re, 3.0)
            .note(format!("MC {:.6e} +- {:.2e}; z-score", mc[0].value.re, mc[0].stderr_re)),
    );
    for i in 1..ks.len() {
        let (k, m) = (&kin[i], &mc[i]);
        let e_k = (k.value - k.coarse).norm();
        let d = k.value - m.value;
        let z = (d.re.abs() / m.stderr_re.hypot(e_k)).max(d.im.abs() / m.stderr_im.hypot(e_k));
        out.gates.push(
            Gate::at_most(&format!("agree_k{}", ks[i]), z, 3.0)
                .note(format!("kinetic {:.6e} MC {:.6e}; combined z-score", k.value, m.value)),
        );
    }
    let worst = kin.iter().map(|s| s.rel_change).fold(0.0, f64::max);
    out.gates.push(Gate::at_most("richardson", worst, res.gate).note(format!("n={} vs n={}", res.n, res.n / 2)));

    let mut c = Csv::new(&[
        "k_tilde", "kin_re", "kin_im", "coarse_re", "coarse_im", "rel_change", "mc_re", "mc_im", "mc_stderr_re", "mc_stderr_im",
    ]);
    for (k, m) in kin.iter().zip(&mc) {
        c.row(&[k.k_tilde, k.value.re, k.value.im, k.coarse.re, k.coarse.im, k.rel_change, m.value.re, m.value.im, m.stderr_re, m.stderr_im]);
    }
    out.add("xi.csv", c.finish());
    out.add(
        "xi.gp",
        plot_script("xi.csv", "Re Xi_alpha(k)", "k_tilde", "Re Xi", &[(2, "kinetic"), (7, "Monte Carlo")], ""),
    );
    Ok(out)
}

fn t_grid(b: f64, span: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| -span / b + 2.0 * span / b * i as f64 / (n - 1) as f64).collect()
}

pub fn run_pulse(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let p = cfg.spectrum().ok_or_else(|| TbError::InvalidParams("bad [params]".into()))?;
    let s0 = cfg.source_model().ok_or_else(|| TbError::InvalidParams("bad [source]".into()))?;
    let b = &cfg.budget;
    let res = KineticResolution { n: need(b.kinetic_n, "budget.kinetic_n")?, ..Default::default() };
    let z = need(b.z, "budget.z")?;
    let ratio = need(b.b_ratio, "budget.b_ratio")?;
    let narrow = need(b.narrow_ratio, "budget.narrow_ratio")?;
    let sc = TheoryScales::new(&p)?;
    let op = sc.omega_psi(z, s0.omega_o, s0.c_o)?;
    let with_b = |r: f64| SourceModel { bandwidth: r * op, ..s0.clone() };

    // the Omega integral reaches 2 B sqrt(-ln 1e-12)
    let reach = 2.0 * ratio.max(narrow) * (1e12f64).ln().sqrt();
    let step = 0.5;
    let n_k = (reach / step).ceil() as usize + 1;
    let grid: Vec<f64> = (0..=n_k).map(|i| i as f64 * step).collect();
    let table: XiTable = xi_table(p.alpha, &grid, &res)?;
    let xi0 = table.samples[0].value.re;

    let mut out = StudyOutput::default();
    let sn = with_b(narrow);
    let tn = t_grid(sn.bandwidth, 3.0, 61);
    let cn = pulse_intensity(&sn, &p, z, &tn, &table)?;
    let nb = cn.narrowband(xi0);
    let dev = cn.intensity.iter().zip(&nb).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
    out.gates.push(Gate::at_most("narrowband", dev, 0.01).note(format!("B/Omega_psi = {narrow}, |T| <= 3/B")));

    // The broadening is ~1e-5 of the width, below what the kinetic knots
    // resolve, so the gate uses a Levy-flight table on common paths.
    let opts = OracleOptions {
        n_paths: need(b.oracle_paths, "budget.oracle_paths")?,
        n_steps: need(b.steps, "budget.steps")?,
        seed: cfg.seed(),
        ..Default::default()
    };
    let mc = xi_oracle_curve(p.alpha, &grid, &opts)?;
    let mc_table = XiTable::from_samples(
        p.alpha,
        mc.iter()
            .map(|e| XiSample { k_tilde: e.k_tilde, value: e.value, coarse: e.value, rel_change: e.stderr() / e.value.norm(), flagged: false })
            .collect(),
    )?;
    let sb = with_b(ratio);
    let tb = t_grid(sb.bandwidth, 12.0, 2001);
    let w0 = 1.0 / (2f64.sqrt() * sb.bandwidth);
    let cb = pulse_intensity(&sb, &p, z, &tb, &mc_table)?;
    let w = pulse_rms_width(&cb)?;
    out.gates.push(
        Gate::above("broadening", w / w0 - 1.0, 0.0)
            .note(format!("B/Omega_psi = {ratio}; rms width {w:.9e} vs 1/(sqrt2 B) = {w0:.9e}; Monte Carlo Xi, {} paths", opts.n_paths)),
    );
    let ck = pulse_intensity(&sb, &p, z, &tb, &table)?;
    let wk = pulse_rms_width(&ck)?;
    out.reports.push(
        Gate::above("broadening_kinetic", wk / w0 - 1.0, 0.0)
            .note(format!("kinetic Xi table, n={}; flagged: {}", res.n, table.any_flagged())),
    );

    let mut c = Csv::new(&["t", "intensity", "narrowband"]);
    for ((t, i), g) in tn.iter().zip(&cn.intensity).zip(&nb) {
        c.row(&[*t, *i, *g]);
    }
    out.add("pulse_narrow.csv", c.finish());
    let gb = cb.narrowband(xi0);
    let mut c = Csv::new(&["t", "intensity", "gaussian_reference", "intensity_kinetic"]);
    for (((t, i), g), q) in tb.iter().zip(&cb.intensity).zip(&gb).zip(&ck.intensity).step_by(4) {
        c.row(&[*t, *i, *g, *q]);
    }
    out.add("pulse_broad.csv", c.finish());
    out.add(
        "pulse_broad.gp",
        plot_script("pulse_broad.csv", &format!("I(T), B/Omega_psi = {ratio}"), "T", "I", &[(2, "pulse"), (3, "unbroadened")], ""),
    );
    let mut x = Csv::new(&["k_tilde", "re", "im", "coarse_re", "coarse_im", "rel_change", "mc_re", "mc_im", "mc_stderr_re", "mc_stderr_im"]);
    for (s, m) in table.samples.iter().zip(&mc) {
        x.row(&[s.k_tilde, s.value.re, s.value.im, s.coarse.re, s.coarse.im, s.rel_change, m.value.re, m.value.im, m.stderr_re, m.stderr_im]);
    }
    out.add("xi_table.csv", x.finish());
    Ok(out)
}
