//! Streaming first and second moments of Ito paths.

use super::{propagate_ito, ScreenGenerator};
use crate::error::{Result, TbError};
use crate::fft::C64;
use crate::paraxial_direct::{EnvelopeField, Lattice2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentKind {
    MeanField,
    Covariance,
    TwoFrequency,
}

impl MomentKind {
    pub fn tag(&self) -> u8 {
        match self {
            MomentKind::MeanField => 1,
            MomentKind::Covariance => 2,
            MomentKind::TwoFrequency => 3,
        }
    }

    pub fn from_tag(t: u8) -> Result<Self> {
        match t {
            1 => Ok(MomentKind::MeanField),
            2 => Ok(MomentKind::Covariance),
            3 => Ok(MomentKind::TwoFrequency),
            _ => Err(TbError::Format(format!("unknown moment tag {t}"))),
        }
    }

    fn n_fields(&self) -> usize {
        match self {
            MomentKind::TwoFrequency => 2,
            _ => 1,
        }
    }
}

/// What to accumulate. The diagonal lattice is always kept (psi for the
/// mean field, psi_1 conj(psi_2) at X1 = X2 otherwise); `sites` adds the
/// full off-diagonal block C(X_i, X_j) over those lattice indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub kind: MomentKind,
    pub sites: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Welford {
    mean: C64,
    // sums of squared deviations of the real and imaginary parts
    m2: [f64; 2],
}

impl Welford {
    fn push(&mut self, x: C64, n: f64) {
        let d = x - self.mean;
        self.mean += d / n;
        let d2 = x - self.mean;
        self.m2[0] += d.re * d2.re;
        self.m2[1] += d.im * d2.im;
    }

    fn merge(&mut self, o: &Welford, na: f64, nb: f64) {
        let n = na + nb;
        let d = o.mean - self.mean;
        self.mean += d * (nb / n);
        self.m2[0] += o.m2[0] + d.re * d.re * na * nb / n;
        self.m2[1] += o.m2[1] + d.im * d.im * na * nb / n;
    }

    fn stderr(&self, n: f64) -> f64 {
        if n < 2.0 {
            return f64::NAN;
        }
        ((self.m2[0] + self.m2[1]) / ((n - 1.0) * n)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub kind: MomentKind,
    pub lattice: Lattice2,
    pub omegas: (f64, f64),
    pub sites: Vec<usize>,
    pub count: u64,
    diag: Vec<Welford>,
    block: Vec<Welford>,
}

impl MomentEstimate {
    pub fn new(spec: &MomentSpec, lattice: Lattice2, omegas: (f64, f64)) -> Result<Self> {
        if spec.kind == MomentKind::MeanField && !spec.sites.is_empty() {
            return Err(TbError::Mismatch("mean-field spec takes no site block".into()));
        }
        if spec.sites.iter().any(|&s| s >= lattice.len()) {
            return Err(TbError::Mismatch("site index outside the lattice".into()));
        }
        Ok(MomentEstimate {
            kind: spec.kind,
            lattice,
            omegas,
            sites: spec.sites.clone(),
            count: 0,
            diag: vec![Welford::default(); lattice.len()],
            block: vec![Welford::default(); spec.sites.len() * spec.sites.len()],
        })
    }

    /// Rebuilds an estimate from stored means and standard errors (m2 is
    /// reconstructed so stderr round-trips; imaginary spread folded into re).
    pub fn from_parts(
        kind: MomentKind,
        lattice: Lattice2,
        omegas: (f64, f64),
        count: u64,
        sites: Vec<usize>,
        diag: Vec<(C64, f64)>,
        block: Vec<(C64, f64)>,
    ) -> Result<Self> {
        if diag.len() != lattice.len() || block.len() != sites.len() * sites.len() {
            return Err(TbError::Mismatch("stored moment arrays do not match the lattice".into()));
        }
        let n = count as f64;
        let mk = |(m, se): (C64, f64)| Welford { mean: m, m2: [se * se * (n - 1.0) * n, 0.0] };
        Ok(MomentEstimate {
            kind,
            lattice,
            omegas,
            sites,
            count,
            diag: diag.into_iter().map(mk).collect(),
            block: block.into_iter().map(mk).collect(),
        })
    }

    fn check_fields(&self, fields: &[EnvelopeField]) -> Result<()> {
        if fields.len() != self.kind.n_fields() {
            return Err(TbError::Mismatch(format!(
                "{:?} needs {} field(s), got {}",
                self.kind,
                self.kind.n_fields(),
                fields.len()
            )));
        }
        for f in fields {
            if f.lattice != self.lattice {
                return Err(TbError::Mismatch("path lattice differs from the estimate".into()));
            }
        }
        let om = (fields[0].omega, fields.last().unwrap().omega);
        if om != self.omegas {
            return Err(TbError::Mismatch(format!("path frequencies {om:?} differ from {:?}", self.omegas)));
        }
        Ok(())
    }

    pub fn push(&mut self, fields: &[EnvelopeField]) -> Result<()> {
        self.check_fields(fields)?;
        self.count += 1;
        let n = self.count as f64;
        let a = &fields[0].data;
        let b = &fields.last().unwrap().data;
        match self.kind {
            MomentKind::MeanField => self.diag.iter_mut().zip(a).for_each(|(w, v)| w.push(*v, n)),
            _ => self.diag.iter_mut().zip(a.iter().zip(b)).for_each(|(w, (x, y))| w.push(x * y.conj(), n)),
        }
        let m = self.sites.len();
        for (i, &si) in self.sites.iter().enumerate() {
            for (j, &sj) in self.sites.iter().enumerate() {
                self.block[i * m + j].push(a[si] * b[sj].conj(), n);
            }
        }
        Ok(())
    }

    /// Pairwise (Chan) merge of two partial estimates.
    pub fn merge(&mut self, other: &MomentEstimate) -> Result<()> {
        if other.kind != self.kind || other.lattice != self.lattice || other.sites != self.sites || other.omegas != self.omegas {
            return Err(TbError::Mismatch("cannot merge estimates with different specs".into()));
        }
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        self.diag.iter_mut().zip(&other.diag).for_each(|(a, b)| a.merge(b, na, nb));
        self.block.iter_mut().zip(&other.block).for_each(|(a, b)| a.merge(b, na, nb));
        self.count += other.count;
        Ok(())
    }

    fn ready(&self) -> Result<()> {
        if self.count == 0 {
            return Err(TbError::InsufficientData("no paths accumulated".into()));
        }
        Ok(())
    }

    /// Diagonal lattice: E[psi] or E[psi_1 conj psi_2](X, X).
    pub fn mean(&self) -> Result<Vec<C64>> {
        self.ready()?;
        Ok(self.diag.iter().map(|w| w.mean).collect())
    }

    pub fn stderr(&self) -> Result<Vec<f64>> {
        self.ready()?;
        Ok(self.diag.iter().map(|w| w.stderr(self.count as f64)).collect())
    }

    /// C(X_i, X_j) over the site block, row-major.
    pub fn block(&self) -> Result<Vec<C64>> {
        self.ready()?;
        Ok(self.block.iter().map(|w| w.mean).collect())
    }

    pub fn block_stderr(&self) -> Result<Vec<f64>> {
        self.ready()?;
        Ok(self.block.iter().map(|w| w.stderr(self.count as f64)).collect())
    }

    /// Largest |C_ij - conj C_ji| over the site block.
    pub fn hermitian_defect(&self) -> Result<f64> {
        let b = self.block()?;
        let m = self.sites.len();
        let mut d: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                d = d.max((b[i * m + j] - b[j * m + i].conj()).norm());
            }
        }
        Ok(d)
    }

    /// Rows: x, y, re, im, stderr for the diagonal lattice.
    pub fn to_csv(&self) -> Result<String> {
        let m = self.mean()?;
        let s = self.stderr()?;
        let mut out = String::from("x,y,re,im,stderr\n");
        for i in 0..self.lattice.len() {
            let x = self.lattice.coord(i);
            out.push_str(&format!("{},{},{:.10e},{:.10e},{:.4e}\n", x[0], x[1], m[i].re, m[i].im, s[i]));
        }
        Ok(out)
    }
}

/// Folds a stream of per-path field sets into one estimate.
pub fn accumulate_moments<I>(paths: I, spec: &MomentSpec) -> Result<MomentEstimate>
where
    I: IntoIterator<Item = Vec<EnvelopeField>>,
{
    let mut it = paths.into_iter();
    let first = it.next().ok_or_else(|| TbError::InsufficientData("empty path stream".into()))?;
    let f0 = first.first().ok_or_else(|| TbError::Mismatch("path without fields".into()))?;
    let mut est = MomentEstimate::new(spec, f0.lattice, (f0.omega, first.last().unwrap().omega))?;
    est.push(&first)?;
    for p in it {
        est.push(&p)?;
    }
    Ok(est)
}

const CHUNK: u64 = 16;

/// Runs n_paths independent Ito paths from `initial` over range z and
/// accumulates them. Path i draws its screens from stream i of `seed`, and
/// chunks merge in a fixed order, so results do not depend on the thread count.
pub fn run_moments(
    initial: &[EnvelopeField],
    gen: &ScreenGenerator,
    z: f64,
    n_steps: usize,
    n_paths: u64,
    seed: u64,
    spec: &MomentSpec,
) -> Result<MomentEstimate> {
    let f0 = initial.first().ok_or_else(|| TbError::InvalidParams("no initial fields".into()))?;
    let omegas = (f0.omega, initial.last().unwrap().omega);
    let empty = MomentEstimate::new(spec, f0.lattice, omegas)?;
    if n_paths == 0 {
        return Err(TbError::InsufficientData("n_paths must be > 0".into()));
    }
    let chunks: Vec<u64> = (0..n_paths.div_ceil(CHUNK)).collect();
    let parts: Vec<Result<MomentEstimate>> = chunks
        .par_iter()
        .map(|&c| {
            let mut est = empty.clone();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                let mut g = gen.reseeded(seed, i + 1);
                let out = propagate_ito(initial, &mut g, z, n_steps)?;
                est.push(&out)?;
            }
            Ok(est)
        })
        .collect();
    let mut total = empty;
    for p in parts {
        total.merge(&p?)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paraxial_direct::SourceModel;
    use crate::spectrum_medium::SpectrumParams;
    use nalgebra::DMatrix;

    fn field(omega: f64, lat: Lattice2) -> EnvelopeField {
        SourceModel::gaussian(1.0, 10.0, 1.0, 1.0).unwrap().profile_field(omega, lat).unwrap()
    }

    #[test]
    fn single_path_is_its_own_mean() {
        let lat = Lattice2::new(8, 8, 0.5);
        let mut f = field(10.0, lat);
        f.data[3] = C64::new(0.2, -0.7);
        let spec = MomentSpec { kind: MomentKind::MeanField, sites: vec![] };
        let e = accumulate_moments(vec![vec![f.clone()]], &spec).unwrap();
        assert_eq!(e.mean().unwrap(), f.data);
        assert_eq!(e.count, 1);
        let empty = MomentEstimate::new(&spec, lat, (10.0, 10.0)).unwrap();
        assert!(matches!(empty.mean(), Err(TbError::InsufficientData(_))));
        let other = field(10.0, Lattice2::new(8, 8, 0.25));
        assert!(matches!(accumulate_moments(vec![vec![f], vec![other]], &spec), Err(TbError::Mismatch(_))));
    }

    #[test]
    fn welford_merge_matches_direct() {
        let xs: Vec<C64> = (0..37).map(|i| C64::new((i as f64 * 0.7).sin(), (i as f64).cos() * 2.0)).collect();
        let mut a = Welford::default();
        for (i, x) in xs.iter().enumerate() {
            a.push(*x, (i + 1) as f64);
        }
        let mut b = Welford::default();
        let mut c = Welford::default();
        for (i, x) in xs[..20].iter().enumerate() {
            b.push(*x, (i + 1) as f64);
        }
        for (i, x) in xs[20..].iter().enumerate() {
            c.push(*x, (i + 1) as f64);
        }
        b.merge(&c, 20.0, 17.0);
        assert!((a.mean - b.mean).norm() < 1e-14);
        assert!((a.m2[0] - b.m2[0]).abs() < 1e-12 && (a.m2[1] - b.m2[1]).abs() < 1e-12);
        let n = xs.len() as f64;
        let mu: C64 = xs.iter().sum::<C64>() / n;
        let var: f64 = xs.iter().map(|x| (x - mu).norm_sqr()).sum::<f64>() / (n - 1.0);
        assert!((a.stderr(n) - (var / n).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn covariance_block_is_hermitian_psd() {
        let p = SpectrumParams::new(0.5, 0.05, 0.1, f64::INFINITY).unwrap();
        let lat = Lattice2::new(32, 32, 0.25);
        let gen = ScreenGenerator::new(&p, lat, 4).unwrap();
        let sites: Vec<usize> = (0..8).map(|i| lat.center() + 3 * i + 2 * lat.nx * (i % 3)).collect();
        let spec = MomentSpec { kind: MomentKind::Covariance, sites: sites.clone() };
        let e = run_moments(&[field(10.0, lat)], &gen, 1.0, 10, 40, 4, &spec).unwrap();
        assert!(e.hermitian_defect().unwrap() < 1e-14);
        for v in e.mean().unwrap() {
            assert!(v.im == 0.0 && v.re >= 0.0);
        }
        let b = e.block().unwrap();
        let se = e.block_stderr().unwrap().into_iter().fold(0.0, f64::max);
        let h = DMatrix::from_fn(8, 8, |i, j| b[i * 8 + j]);
        // Hermitian eigenvalues through the real 16x16 embedding
        let re = DMatrix::from_fn(16, 16, |i, j| {
            let v = h[(i % 8, j % 8)];
            match (i < 8, j < 8) {
                (true, true) | (false, false) => v.re,
                (true, false) => -v.im,
                (false, true) => v.im,
            }
        });
        let re = (&re + re.transpose()) * 0.5;
        let ev = re.symmetric_eigenvalues();
        assert!(ev.min() >= -5.0 * se, "{} vs {se}", ev.min());
    }

    #[test]
    fn equal_frequencies_reduce_to_covariance() {
        let p = SpectrumParams::new(0.5, 0.05, 0.1, f64::INFINITY).unwrap();
        let lat = Lattice2::new(32, 32, 0.25);
        let gen = ScreenGenerator::new(&p, lat, 8).unwrap();
        let sites = vec![lat.center(), lat.center() + 5];
        let f = field(10.0, lat);
        let one = MomentSpec { kind: MomentKind::Covariance, sites: sites.clone() };
        let two = MomentSpec { kind: MomentKind::TwoFrequency, sites };
        let a = run_moments(&[f.clone()], &gen, 1.0, 10, 20, 8, &one).unwrap();
        let b = run_moments(&[f.clone(), f], &gen, 1.0, 10, 20, 8, &two).unwrap();
        assert_eq!(a.mean().unwrap(), b.mean().unwrap());
        assert_eq!(a.block().unwrap(), b.block().unwrap());
    }

    #[test]
    fn results_do_not_depend_on_chunking() {
        let p = SpectrumParams::new(0.5, 0.05, 0.1, f64::INFINITY).unwrap();
        let lat = Lattice2::new(16, 16, 0.25);
        let gen = ScreenGenerator::new(&p, lat, 2).unwrap();
        let spec = MomentSpec { kind: MomentKind::MeanField, sites: vec![] };
        let f = field(10.0, lat);
        let a = run_moments(&[f.clone()], &gen, 0.5, 5, 40, 2, &spec).unwrap();
        let paths: Vec<Vec<EnvelopeField>> = (0..40)
            .map(|i| propagate_ito(&[f.clone()], &mut gen.reseeded(2, i + 1), 0.5, 5).unwrap())
            .collect();
        let b = accumulate_moments(paths, &spec).unwrap();
        let (ma, mb) = (a.mean().unwrap(), b.mean().unwrap());
        assert!(ma.iter().zip(&mb).all(|(x, y)| (x - y).norm() < 1e-12));
    }
}
