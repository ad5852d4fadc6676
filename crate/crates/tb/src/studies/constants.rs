//! Kolmogorov constants table and the Psi / Phi profile figure.

use super::{need, plot_script, Csv, StudyOutput};
use crate::config::ExperimentConfig;
use crate::manifest::Gate;
use turbbeam::error::Result;
use turbbeam::moment_theory::{
    heavy_tail_ratio, kolmogorov_constants, psi_profile, psi_zero, q_alpha, zeta_fit,
    KolmogorovConstants,
};

fn table_gates(k: &KolmogorovConstants) -> Vec<Gate> {
    vec![
        Gate::within("q_53", k.q_53, 1.785, 0.002),
        Gate::within("d_53_per_chi", k.d_53_per_chi, 0.178, 0.001),
        Gate::within("d_53_per_cn2", k.d_53_per_cn2, 5.828, 0.005 * 5.828),
        Gate::within("spotsize_coefficient", k.spotsize_coefficient, 1.2, 0.02)
            .note(format!("literature {}", k.literature_spotsize)),
        Gate::within("correlation_radius_coefficient", k.correlation_radius_coefficient, 1.81, 0.05)
            .note(format!("literature {}", k.literature_correlation_radius)),
    ]
}

/// The constants table as printed by `tb constants`.
pub fn kolmogorov_report() -> Result<(KolmogorovConstants, String)> {
    let k = kolmogorov_constants()?;
    let mut s = String::new();
    s.push_str("quantity                          value       literature\n");
    s.push_str(&format!("q_5/3                             {:<11.5}\n", k.q_53));
    s.push_str(&format!("d_5/3 / chi_5/3                   {:<11.5}\n", k.d_53_per_chi));
    s.push_str(&format!("d_5/3 / C_n^2                     {:<11.5}\n", k.d_53_per_cn2));
    s.push_str(&format!("zeta_5/3 (half window)            {:<11.4} ({:.4})\n", k.zeta_53, k.zeta_53_half_window));
    s.push_str(&format!("zeta_2/3 (half window)            {:<11.4} ({:.4})\n", k.zeta_23, k.zeta_23_half_window));
    s.push_str(&format!(
        "spotsize coefficient              {:<11.4} {}\n",
        k.spotsize_coefficient, k.literature_spotsize
    ));
    s.push_str(&format!(
        "correlation-radius coefficient    {:<11.4} {}\n",
        k.correlation_radius_coefficient, k.literature_correlation_radius
    ));
    Ok((k, s))
}

pub fn run_table(_cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let k = kolmogorov_constants()?;
    let mut out = StudyOutput { gates: table_gates(&k), ..Default::default() };
    let mut c = Csv::new(&["quantity", "value", "literature"]);
    c.labeled("q_53", &[k.q_53, f64::NAN]);
    c.labeled("d_53_per_chi", &[k.d_53_per_chi, f64::NAN]);
    c.labeled("d_53_per_cn2", &[k.d_53_per_cn2, f64::NAN]);
    c.labeled("zeta_53", &[k.zeta_53, f64::NAN]);
    c.labeled("zeta_53_half_window", &[k.zeta_53_half_window, f64::NAN]);
    c.labeled("zeta_23", &[k.zeta_23, f64::NAN]);
    c.labeled("zeta_23_half_window", &[k.zeta_23_half_window, f64::NAN]);
    c.labeled("spotsize_coefficient", &[k.spotsize_coefficient, k.literature_spotsize]);
    c.labeled("correlation_radius_coefficient", &[k.correlation_radius_coefficient, k.literature_correlation_radius]);
    out.add("constants.csv", c.finish());
    Ok(out)
}

fn tag(alpha: f64) -> &'static str {
    if (alpha - 2.0 / 3.0).abs() < 1e-12 {
        "23"
    } else {
        "53"
    }
}

/// Psi_alpha out to where it falls below 1e-3 of its peak.
fn psi_window(alpha: f64) -> Result<f64> {
    let p0 = psi_zero(alpha);
    let mut w = 0.25;
    while turbbeam::moment_theory::psi_alpha(w, alpha)? / p0 > 1e-3 && w < 1e4 {
        w *= 1.25;
    }
    Ok(w)
}

pub fn run_figure(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let n_fit = need(cfg.budget.fit_points, "budget.fit_points")?;
    let n_plot = need(cfg.budget.samples, "budget.samples")?;
    let mut out = StudyOutput::default();
    let mut zetas = [0.0; 2];
    let mut tails = [0.0; 2];
    for (i, alpha) in [2.0 / 3.0, 5.0 / 3.0].into_iter().enumerate() {
        let t = tag(alpha);
        let p0 = psi_zero(alpha);
        let q = q_alpha(alpha);

        // left panel: Psi with the curvature Gaussian and the least-squares one
        let w = psi_window(alpha)?;
        let xs: Vec<f64> = (0..n_plot).map(|j| w * j as f64 / (n_plot - 1) as f64).collect();
        let psi = psi_profile(alpha, &xs)?;
        // same fit as the heavy-tail ratio, over the 1% window
        let (sd, tail) = heavy_tail_ratio(alpha, n_fit)?;
        tails[i] = tail;
        let mut c = Csv::new(&["xi", "psi", "curvature_fit", "lsq_fit"]);
        for (x, v) in xs.iter().zip(&psi.values) {
            c.row(&[*x, *v, p0 * (-q * x * x).exp(), p0 * (-(x * x) / (2.0 * sd * sd)).exp()]);
        }
        let name = format!("psi_{t}.csv");
        out.add(name.clone(), c.finish());
        out.add(
            format!("psi_{t}.gp"),
            plot_script(&name, &format!("Psi alpha={alpha:.4}"), "xi", "Psi", &[(2, "Psi"), (3, "exp(-q xi^2) fit"), (4, "least-squares fit")], ""),
        );

        // right panel: Phi(0, zeta) with its least-squares Gaussian
        let (zf, zh, table) = zeta_fit(alpha, n_fit)?;
        zetas[i] = zf;
        let mut c = Csv::new(&["zeta", "phi", "lsq_fit"]);
        for (z, v) in table.abscissae.iter().zip(&table.values) {
            c.row(&[*z, *v, p0 * (-(z * z) / (zf * zf)).exp()]);
        }
        let name = format!("phi_{t}.csv");
        out.add(name.clone(), c.finish());
        out.add(
            format!("phi_{t}.gp"),
            plot_script(&name, &format!("Phi(0,zeta) alpha={alpha:.4}, zeta fit {zf:.3} (half window {zh:.3})"), "zeta", "Phi", &[(2, "Phi"), (3, "Gaussian fit")], ""),
        );
    }
    out.gates.push(Gate::within("zeta_53", zetas[1], 5.2, 0.3));
    out.gates.push(Gate::within("zeta_23", zetas[0], 86.0, 9.0));
    out.gates.push(Gate::at_least("heavy_tail_23", tails[0], 2.0).note("Psi / Gaussian fit at 3 fit-std"));
    out.reports.push(
        Gate::within("heavy_tail_53", tails[1], 1.0, 0.3).note("Psi / Gaussian fit at 3 fit-std; stated as within 30%"),
    );
    Ok(out)
}
