//! Experiment configuration: TOML with `[params]`, `[source]` and `[budget]`
//! sections. Missing fields get study defaults in `normalize`; the
//! normalized form is what gets hashed into the manifest.

use serde::{Deserialize, Serialize};
use std::fmt;
use turbbeam::moment_theory::{RegimeCheck, TheoryScales, PULSE_REGIME_MAX};
use turbbeam::paraxial_direct::SourceModel;
use turbbeam::spectrum_medium::SpectrumParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    MediumValidate,
    TravelTime,
    Coherent,
    SpatialCoherence,
    FrequencyCoherence,
    Pulse,
    KolmogorovTable,
    FigurePsiPhi,
}

impl Study {
    pub const ALL: [Study; 8] = [
        Study::MediumValidate,
        Study::TravelTime,
        Study::Coherent,
        Study::SpatialCoherence,
        Study::FrequencyCoherence,
        Study::Pulse,
        Study::KolmogorovTable,
        Study::FigurePsiPhi,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Study::MediumValidate => "medium-validate",
            Study::TravelTime => "travel-time",
            Study::Coherent => "coherent",
            Study::SpatialCoherence => "spatial-coherence",
            Study::FrequencyCoherence => "frequency-coherence",
            Study::Pulse => "pulse",
            Study::KolmogorovTable => "kolmogorov-table",
            Study::FigurePsiPhi => "figure-psi-phi",
        }
    }

    /// Studies that run at fixed exponents and ignore `[params]`.
    fn fixed_params(&self) -> bool {
        matches!(self, Study::KolmogorovTable | Study::FigurePsiPhi)
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub alpha: Option<f64>,
    pub chi: Option<f64>,
    pub l_inner: Option<f64>,
    /// `inf` for no outer scale
    pub l_outer: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub r_s: Option<f64>,
    pub omega_o: Option<f64>,
    pub bandwidth: Option<f64>,
    pub c_o: Option<f64>,
}

/// Numeric budgets. Each study reads the subset documented in docs/.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nz: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_sigmas: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kinetic_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_paths: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_tilde: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub narrow_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub study: Study,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceSection>,
    #[serde(default)]
    pub budget: Budget,
}

/// One validation problem, with the 1-based line of the offending key when
/// it can be located in the source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub Vec<Diagnostic>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

fn line_of_offset(text: &str, off: usize) -> usize {
    text[..off.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `[section]` (or the top level for "").
fn line_of_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut cur = String::new();
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.starts_with('[') {
            cur = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if cur == section {
            if let Some((k, _)) = l.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str::<ExperimentConfig>(text).map_err(|e| {
            let line = e.span().map(|s| line_of_offset(text, s.start));
            ConfigError(vec![Diagnostic { line, field: "config".into(), message: e.message().to_string() }])
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn defaults(study: Study) -> Self {
        let mut b = Budget::default();
        let params = |alpha: f64, chi: f64, l_inner: f64, l_outer: f64| ParamsSection {
            alpha: Some(alpha),
            chi: Some(chi),
            l_inner: Some(l_inner),
            l_outer: Some(l_outer),
        };
        let source = |r_s: f64, omega_o: f64, bandwidth: f64| SourceSection {
            r_s: Some(r_s),
            omega_o: Some(omega_o),
            bandwidth: Some(bandwidth),
            c_o: Some(1.0),
        };
        let (p, s) = match study {
            Study::MediumValidate => {
                b.paths = Some(100);
                b.grid = Some(64);
                b.nz = Some(64);
                b.dx = Some(0.05);
                b.clip_sigmas = Some(6.0);
                b.probes = Some(20);
                (params(0.5, 1.0, 0.1, 0.3), None)
            }
            Study::TravelTime => {
                b.paths = Some(200);
                b.samples = Some(256);
                b.z = Some(1.0);
                b.epsilon = Some(0.1);
                b.epsilons = Some(vec![0.2, 0.1, 0.05]);
                b.alphas = Some(vec![0.3, 0.5, 0.8]);
                b.clip_sigmas = Some(2.0);
                (params(0.5, 1.0, 0.01, f64::INFINITY), None)
            }
            Study::Coherent => {
                b.paths = Some(10_000);
                b.grid = Some(128);
                b.dx = Some(0.25);
                b.steps = Some(20);
                (params(0.5, 0.08, 0.1, f64::INFINITY), Some(source(1.0, 10.0, 1.0)))
            }
            Study::SpatialCoherence => {
                b.paths = Some(4000);
                b.grid = Some(64);
                b.dx = Some(0.25);
                b.steps = Some(20);
                b.z = Some(1.0);
                b.probes = Some(20);
                (params(0.5, 0.08, 0.1, f64::INFINITY), Some(source(1.0, 10.0, 1.0)))
            }
            Study::FrequencyCoherence => {
                b.kinetic_n = Some(128);
                b.oracle_paths = Some(20_000);
                b.steps = Some(256);
                b.k_tilde = Some(vec![0.5, 1.0, 2.0]);
                (params(0.5, 1.0, 0.01, f64::INFINITY), None)
            }
            Study::Pulse => {
                b.kinetic_n = Some(64);
                b.oracle_paths = Some(20_000);
                b.steps = Some(256);
                b.z = Some(1.0);
                b.b_ratio = Some(1.0);
                b.narrow_ratio = Some(0.01);
                // inside the strong-fluctuation regime: Q r_s ~ 1.5e4, l_o Q ~ 1.5e-4
                (params(0.5, 400.0, 1e-8, f64::INFINITY), Some(source(1.0, 1.0, 1.0)))
            }
            Study::KolmogorovTable => {
                return ExperimentConfig {
                    study,
                    seed: Some(1),
                    output: Some(format!("out/{}", study.tag())),
                    params: None,
                    source: None,
                    budget: b,
                };
            }
            Study::FigurePsiPhi => {
                b.fit_points = Some(64);
                b.samples = Some(200);
                return ExperimentConfig {
                    study,
                    seed: Some(1),
                    output: Some(format!("out/{}", study.tag())),
                    params: None,
                    source: None,
                    budget: b,
                };
            }
        };
        ExperimentConfig {
            study,
            seed: Some(1),
            output: Some(format!("out/{}", study.tag())),
            params: Some(p),
            source: s,
            budget: b,
        }
    }

    /// Fills every field the study reads from its defaults.
    pub fn normalized(&self) -> Self {
        let d = Self::defaults(self.study);
        let mut out = self.clone();
        out.seed = out.seed.or(d.seed);
        out.output = out.output.or(d.output);
        out.params = match (out.params, d.params) {
            (Some(p), Some(q)) => Some(ParamsSection {
                alpha: p.alpha.or(q.alpha),
                chi: p.chi.or(q.chi),
                l_inner: p.l_inner.or(q.l_inner),
                l_outer: p.l_outer.or(q.l_outer),
            }),
            (p, q) => p.or(q),
        };
        out.source = match (out.source, d.source) {
            (Some(s), Some(q)) => Some(SourceSection {
                r_s: s.r_s.or(q.r_s),
                omega_o: s.omega_o.or(q.omega_o),
                bandwidth: s.bandwidth.or(q.bandwidth),
                c_o: s.c_o.or(q.c_o),
            }),
            (s, q) => s.or(q),
        };
        let (b, q) = (&mut out.budget, d.budget);
        macro_rules! fill {
            ($($f:ident),*) => { $( if b.$f.is_none() { b.$f = q.$f; } )* };
        }
        fill!(paths, grid, nz, dx, steps, z, samples, epsilon, epsilons, alphas, clip_sigmas, probes, kinetic_n,
              oracle_paths, k_tilde, b_ratio, narrow_ratio, fit_points);
        out
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn spectrum(&self) -> Option<SpectrumParams> {
        let p = self.params?;
        SpectrumParams::new(p.alpha?, p.chi?, p.l_inner?, p.l_outer?).ok()
    }

    pub fn source_model(&self) -> Option<SourceModel> {
        let s = self.source?;
        SourceModel::gaussian(s.r_s?, s.omega_o?, s.bandwidth?, s.c_o?).ok()
    }
}

/// Result of `validate`: the normalized config plus regime notes reported
/// before any compute.
#[derive(Debug, Clone)]
pub struct Validated {
    pub config: ExperimentConfig,
    pub notes: Vec<String>,
}

/// Parses, normalizes and semantically checks a config text.
pub fn validate_text(text: &str) -> Result<Validated, ConfigError> {
    let raw = ExperimentConfig::parse(text)?;
    let cfg = raw.normalized();
    let mut diags = Vec::new();
    let mut notes = Vec::new();
    let mut bad = |section: &str, key: &str, message: String| {
        diags.push(Diagnostic {
            line: line_of_key(text, section, key),
            field: if section.is_empty() { key.to_string() } else { format!("{section}.{key}") },
            message,
        });
    };

    if cfg.study.fixed_params() && raw.params.is_some() {
        notes.push(format!("[params] is ignored by {}", cfg.study));
    }
    let mut spectrum = None;
    if let (Some(p), false) = (cfg.params, cfg.study.fixed_params()) {
        let (a, chi, li, lo) = (p.alpha.unwrap(), p.chi.unwrap(), p.l_inner.unwrap(), p.l_outer.unwrap());
        match SpectrumParams::new(a, chi, li, lo) {
            Err(e) => {
                let key = if a == 1.0 || !(a > 0.0 && a < 2.0) {
                    "alpha"
                } else if lo.is_infinite() && a > 1.0 {
                    "l_outer"
                } else if !(chi >= 0.0) {
                    "chi"
                } else if !(li > 0.0) {
                    "l_inner"
                } else {
                    "l_outer"
                };
                let msg = match e {
                    turbbeam::error::TbError::InvalidParams(m) => m,
                    other => other.to_string(),
                };
                bad("params", key, msg);
            }
            Ok(sp) => {
                if chi == 0.0 {
                    bad("params", "chi", "chi must be > 0 for a study".into());
                }
                if matches!(
                    cfg.study,
                    Study::TravelTime | Study::Coherent | Study::SpatialCoherence | Study::FrequencyCoherence | Study::Pulse
                ) && !(a < 1.0)
                {
                    bad("params", "alpha", format!("study {} needs alpha in (0,1), got {a}", cfg.study));
                }
                spectrum = Some(sp);
            }
        }
    }
    let mut source = None;
    if let Some(s) = cfg.source {
        for (k, v) in [("r_s", s.r_s), ("omega_o", s.omega_o), ("bandwidth", s.bandwidth), ("c_o", s.c_o)] {
            if !(v.unwrap() > 0.0 && v.unwrap().is_finite()) {
                bad("source", k, format!("must be finite and > 0, got {}", v.unwrap()));
            }
        }
        source = cfg.source_model();
    }

    let b = &cfg.budget;
    let pos_u = |v: Option<u64>| v.map_or(true, |x| x > 0);
    let pos_us = |v: Option<usize>| v.map_or(true, |x| x > 0);
    let pos_f = |v: Option<f64>| v.map_or(true, |x| x > 0.0 && x.is_finite());
    for (k, ok) in [
        ("paths", pos_u(b.paths)),
        ("oracle_paths", pos_u(b.oracle_paths)),
        ("grid", pos_us(b.grid)),
        ("nz", pos_us(b.nz)),
        ("steps", pos_us(b.steps)),
        ("samples", pos_us(b.samples)),
        ("probes", pos_us(b.probes)),
        ("kinetic_n", pos_us(b.kinetic_n)),
        ("fit_points", pos_us(b.fit_points)),
        ("dx", pos_f(b.dx)),
        ("z", pos_f(b.z)),
        ("clip_sigmas", pos_f(b.clip_sigmas)),
        ("b_ratio", pos_f(b.b_ratio)),
        ("narrow_ratio", pos_f(b.narrow_ratio)),
    ] {
        if !ok {
            bad("budget", k, "budgets must be positive".into());
        }
    }
    let in_unit = |v: f64| v > 0.0 && v < 1.0;
    if b.epsilon.is_some_and(|e| !in_unit(e)) {
        bad("budget", "epsilon", "epsilon must lie in (0,1)".into());
    }
    if b.epsilons.as_ref().is_some_and(|v| v.len() < 2 || v.iter().any(|&e| !in_unit(e))) {
        bad("budget", "epsilons", "need >= 2 values in (0,1)".into());
    }
    if cfg.study == Study::TravelTime && b.alphas.as_ref().is_some_and(|v| v.is_empty() || v.iter().any(|&a| !in_unit(a))) {
        bad("budget", "alphas", "travel-time exponents must lie in (0,1)".into());
    }
    match cfg.study {
        Study::TravelTime => {
            if b.paths.is_some_and(|n| n < 50) {
                bad("budget", "paths", "the Hurst estimate needs >= 50 paths".into());
            }
            if b.samples.is_some_and(|n| n < 64) {
                bad("budget", "samples", "the Hurst estimate needs >= 64 samples".into());
            }
        }
        Study::MediumValidate | Study::Coherent | Study::SpatialCoherence => {
            if b.paths.is_some_and(|n| n < 2) {
                bad("budget", "paths", "need >= 2 realizations for error bars".into());
            }
        }
        Study::FrequencyCoherence => {
            if b.kinetic_n.is_some_and(|n| n < 16 || n % 4 != 0) {
                bad("budget", "kinetic_n", "kinetic lattice must be a multiple of 4, >= 16".into());
            }
        }
        Study::Pulse => {
            if b.kinetic_n.is_some_and(|n| n < 16 || n % 4 != 0) {
                bad("budget", "kinetic_n", "kinetic lattice must be a multiple of 4, >= 16".into());
            }
            if b.b_ratio.is_some_and(|r| r > PULSE_REGIME_MAX) {
                bad("budget", "b_ratio", format!("B/Omega_psi above {PULSE_REGIME_MAX} leaves the pulse regime"));
            }
        }
        _ => {}
    }

    // regime ratios reported before any compute
    if let (Some(sp), Some(src)) = (spectrum, source) {
        if let (Some(z), Ok(sc)) = (b.z, TheoryScales::new(&sp)) {
            let k = src.k(src.omega_o);
            notes.push(format!("R(z)={:.4e} Q(z)={:.4e} at z={z}", sc.r(z, k), sc.q(z, k)));
            if let Ok(rc) = RegimeCheck::evaluate(&src, src.omega_o, z, &sp, 10.0) {
                notes.push(format!(
                    "strong-fluctuation ratios: l_o Q={:.3e} 1/(Q r_s)={:.3e} r_s/R={:.3e} (gate {}: {})",
                    rc.inner_over_decoherence,
                    rc.decoherence_over_source,
                    rc.source_over_radius,
                    rc.factor,
                    if rc.ok { "inside" } else { "outside" }
                ));
            }
            if cfg.study == Study::Pulse {
                if let Ok(op) = sc.omega_psi(z, src.omega_o, src.c_o) {
                    notes.push(format!("Omega_psi={op:.4e}; bandwidth set to B/Omega_psi={}", b.b_ratio.unwrap_or(1.0)));
                }
            }
        }
    }
    if diags.is_empty() {
        Ok(Validated { config: cfg, notes })
    } else {
        Err(ConfigError(diags))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        for s in Study::ALL {
            let c = ExperimentConfig::defaults(s);
            let back = ExperimentConfig::parse(&c.to_toml()).unwrap();
            assert_eq!(back, c, "{s}");
            assert_eq!(c.normalized(), c);
            validate_text(&c.to_toml()).unwrap();
        }
    }

    #[test]
    fn alpha_one_is_excluded() {
        let e = validate_text("study = \"coherent\"\n[params]\nalpha = 1.0\n").unwrap_err();
        assert_eq!(e.0.len(), 1);
        assert!(e.0[0].message.contains("alpha=1 excluded"), "{e}");
        assert_eq!(e.0[0].line, Some(3));
    }

    #[test]
    fn infinite_outer_scale_needs_small_alpha() {
        let t = "study = \"medium-validate\"\n[params]\nalpha = 1.5\nl_outer = inf\n";
        let e = validate_text(t).unwrap_err();
        assert!(e.0[0].message.contains("variance diverges"), "{e}");
        assert_eq!(e.0[0].line, Some(4));
        assert!(validate_text("study = \"medium-validate\"\n[params]\nalpha = 1.5\nl_outer = 4.0\n").is_ok());
    }

    #[test]
    fn malformed_and_unknown_fields() {
        let e = ExperimentConfig::parse("study = \"coherent\"\n[budget]\npaths = = 3\n").unwrap_err();
        assert_eq!(e.0[0].line, Some(3));
        assert!(ExperimentConfig::parse("study = \"nope\"\n").is_err());
        assert!(ExperimentConfig::parse("study = \"pulse\"\n[budget]\nbogus = 1\n").is_err());
        let e = validate_text("study = \"travel-time\"\n[budget]\npaths = 10\n").unwrap_err();
        assert!(e.0[0].to_string().starts_with("line 3: budget.paths"), "{e}");
    }

    #[test]
    fn partial_sections_are_filled() {
        let v = validate_text("study = \"pulse\"\nseed = 9\n[source]\nr_s = 0.1\n").unwrap();
        let s = v.config.source.unwrap();
        assert_eq!(s.r_s, Some(0.1));
        assert_eq!(s.omega_o, Some(1.0));
        assert_eq!(v.config.seed, Some(9));
        assert!(v.notes.iter().any(|n| n.contains("Omega_psi")));
        // the normalized echo is itself a valid, stable config
        let again = validate_text(&v.config.to_toml()).unwrap();
        assert_eq!(again.config, v.config);
    }
}
