//! Study runners. Each one reads a normalized config, computes, and returns
//! its gates plus the CSV and plot-script artifacts; nothing touches the
//! filesystem here.

mod coherence;
mod constants;
mod medium;
mod pulse;
mod travel;

use crate::config::{ExperimentConfig, Study};
use crate::manifest::Gate;
use turbbeam::error::{Result, TbError};

pub use constants::kolmogorov_report;

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, Default)]
pub struct StudyOutput {
    pub gates: Vec<Gate>,
    pub reports: Vec<Gate>,
    pub artifacts: Vec<Artifact>,
}

impl StudyOutput {
    fn add(&mut self, name: impl Into<String>, contents: String) {
        self.artifacts.push(Artifact { name: name.into(), contents });
    }
}

/// Gate names a study records for this config, in order.
pub fn declared_gates(cfg: &ExperimentConfig) -> Vec<String> {
    let names: Vec<String> = match cfg.study {
        Study::MediumValidate => ["variance", "covariance_z", "isotropy", "clip_power", "determinism"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        Study::TravelTime => {
            let mut v: Vec<String> =
                cfg.budget.alphas.clone().unwrap_or_default().iter().map(|a| format!("hurst_alpha_{a}")).collect();
            v.extend(["variance_slope", "skewness", "kurtosis", "epsilon_collapse", "attenuation"].map(String::from));
            v
        }
        Study::Coherent => vec!["mean_field_rel_l2".into(), "coherent_mass".into()],
        Study::SpatialCoherence => ["coherence_probes", "intensity_collapse", "cusp_exponent", "cusp_coefficient"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        Study::FrequencyCoherence => {
            let mut v = vec!["xi0_kinetic".to_string(), "xi0_mc".to_string()];
            v.extend(cfg.budget.k_tilde.clone().unwrap_or_default().iter().map(|k| format!("agree_k{k}")));
            v.push("richardson".into());
            v
        }
        Study::Pulse => vec!["narrowband".into(), "broadening".into()],
        Study::KolmogorovTable => ["q_53", "d_53_per_chi", "d_53_per_cn2", "spotsize_coefficient", "correlation_radius_coefficient"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        Study::FigurePsiPhi => vec!["zeta_53".into(), "zeta_23".into(), "heavy_tail_23".into()],
    };
    names
}

/// Runs the study described by a normalized config.
pub fn run_study(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    match cfg.study {
        Study::MediumValidate => medium::run(cfg),
        Study::TravelTime => travel::run(cfg),
        Study::Coherent => coherence::run_coherent(cfg),
        Study::SpatialCoherence => coherence::run_spatial(cfg),
        Study::FrequencyCoherence => pulse::run_frequency(cfg),
        Study::Pulse => pulse::run_pulse(cfg),
        Study::KolmogorovTable => constants::run_table(cfg),
        Study::FigurePsiPhi => constants::run_figure(cfg),
    }
}

fn need<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| TbError::InvalidParams(format!("config lacks {what}; normalize it first")))
}

/// CSV with a fixed column set and a fixed number format, so reruns are
/// byte-identical.
pub(crate) struct Csv {
    out: String,
    cols: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { out: header.join(",") + "\n", cols: header.len() }
    }

    pub fn row(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.cols, "csv row width");
        let cells: Vec<String> = v.iter().map(|x| format!("{x:.9e}")).collect();
        self.out.push_str(&cells.join(","));
        self.out.push('\n');
    }

    pub fn labeled(&mut self, label: &str, v: &[f64]) {
        assert_eq!(v.len() + 1, self.cols, "csv row width");
        self.out.push_str(label);
        for x in v {
            self.out.push_str(&format!(",{x:.9e}"));
        }
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// A gnuplot script drawing columns of one CSV against its first column.
pub(crate) fn plot_script(csv: &str, title: &str, xlabel: &str, ylabel: &str, cols: &[(usize, &str)], logscale: &str) -> String {
    let png = csv.trim_end_matches(".csv").to_string() + ".png";
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set terminal pngcairo size 800,600\n");
    s.push_str(&format!("set output '{png}'\n"));
    s.push_str(&format!("set title '{title}'\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"));
    if !logscale.is_empty() {
        s.push_str(&format!("set logscale {logscale}\n"));
    }
    let parts: Vec<String> = cols
        .iter()
        .enumerate()
        .map(|(i, (c, label))| {
            let style = if i == 0 { "lines lw 2" } else { "lines dt 2 lw 2" };
            format!("'{csv}' using 1:{c} skip 1 with {style} title '{label}'")
        })
        .collect();
    s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    s
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0))
}

/// Sample variance and its standard error from the fourth central moment.
fn variance_with_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (m, v) = mean_var(x);
    let m4 = x.iter().map(|t| (t - m).powi(4)).sum::<f64>() / n;
    let vb = v * (n - 1.0) / n;
    (v, ((m4 - vb * vb).max(0.0) / n).sqrt())
}

/// Least-squares slope and intercept.
fn linfit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let s = sxy / sxx;
    (s, my - s * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_fixed_format() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&[1.0, -0.5]);
        assert_eq!(c.finish(), "a,b\n1.000000000e0,-5.000000000e-1\n");
    }

    #[test]
    fn helpers() {
        let (s, b) = linfit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((s - 2.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
        let (v, se) = variance_with_se(&[1.0, -1.0, 1.0, -1.0]);
        assert!((v - 4.0 / 3.0).abs() < 1e-14);
        // two-point law: m4 = vb^2 so the spread of the variance vanishes
        assert!(se.abs() < 1e-14);
    }

    #[test]
    fn declared_counts() {
        for s in Study::ALL {
            let c = ExperimentConfig::defaults(s);
            let d = declared_gates(&c);
            assert!(!d.is_empty());
            let mut u = d.clone();
            u.sort();
            u.dedup();
            assert_eq!(u.len(), d.len(), "{s}");
        }
        assert_eq!(declared_gates(&ExperimentConfig::defaults(Study::TravelTime)).len(), 8);
        assert_eq!(declared_gates(&ExperimentConfig::defaults(Study::FrequencyCoherence)).len(), 6);
    }
}
