//! Little-endian binary containers and CSV writers.
//!
//! TBM1 medium volume: magic, u32 version, u64 nx ny nz, f64 dx dz,
//!   f64 alpha chi l_inner l_outer, u64 seed stream, f64 lattice_variance
//!   clip_bound, u64 n_clipped, then nx*ny*nz f32 samples (x fastest).
//! TBF1 field: magic, u32 version, u64 nx ny, f64 dx omega k z norm0, then
//!   complex64 samples (f32 re, f32 im).
//! TBM2 moments: magic, u32 version, u8 kind, u64 nx ny, f64 dx omega1 omega2,
//!   u64 count, u64 n_sites, n_sites u64 indices, then per diagonal entry and
//!   per block entry f64 re, f64 im, f64 stderr.

use crate::error::{Result, TbError};
use crate::fft::C64;
use crate::ito_solver::{MomentEstimate, MomentKind};
use crate::paraxial_direct::{EnvelopeField, Lattice2, TravelTimePath};
use crate::spectrum_medium::{CovarianceCurve, Grid3, MediumVolume, SpectrumParams};
use std::io::{Read, Write};

pub const VERSION: u32 = 1;

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.0.write_all(b)?;
        Ok(())
    }
    fn u8(&mut self, v: u8) -> Result<()> {
        self.bytes(&[v])
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f32(&mut self, v: f32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        self.bytes(magic)?;
        self.u32(VERSION)
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn arr<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| TbError::Format(format!("truncated container: {e}")))?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.arr::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.arr()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.arr()?))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| TbError::Format("size does not fit".into()))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.arr()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.arr()?))
    }
    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let m: [u8; 4] = self.arr()?;
        if &m != magic {
            return Err(TbError::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&m),
                String::from_utf8_lossy(magic)
            )));
        }
        let v = self.u32()?;
        if v != VERSION {
            return Err(TbError::Format(format!("unsupported version {v}")));
        }
        Ok(())
    }
    fn end(&mut self) -> Result<()> {
        let mut b = [0u8; 1];
        match self.0.read(&mut b)? {
            0 => Ok(()),
            _ => Err(TbError::Format("trailing bytes after container".into())),
        }
    }
}

fn checked_len(a: usize, b: usize, c: usize) -> Result<usize> {
    a.checked_mul(b)
        .and_then(|v| v.checked_mul(c))
        .filter(|&v| v <= 1 << 32)
        .ok_or_else(|| TbError::Format("container dimensions overflow".into()))
}

pub fn write_medium<W: Write>(v: &MediumVolume, w: W) -> Result<()> {
    let mut w = Writer(w);
    w.header(b"TBM1")?;
    let g = v.grid;
    for n in [g.nx, g.ny, g.nz] {
        w.u64(n as u64)?;
    }
    w.f64(g.dx)?;
    w.f64(g.dz)?;
    let p = v.params;
    for x in [p.alpha, p.chi, p.l_inner, p.l_outer] {
        w.f64(x)?;
    }
    w.u64(v.seed)?;
    w.u64(v.stream)?;
    w.f64(v.lattice_variance)?;
    w.f64(v.clip_bound)?;
    w.u64(v.n_clipped as u64)?;
    for s in &v.samples {
        w.f32(*s as f32)?;
    }
    Ok(())
}

pub fn read_medium<R: Read>(r: R) -> Result<MediumVolume> {
    let mut r = Reader(r);
    r.header(b"TBM1")?;
    let (nx, ny, nz) = (r.usize()?, r.usize()?, r.usize()?);
    let n = checked_len(nx, ny, nz)?;
    let (dx, dz) = (r.f64()?, r.f64()?);
    let params = SpectrumParams { alpha: r.f64()?, chi: r.f64()?, l_inner: r.f64()?, l_outer: r.f64()? };
    params.validate().map_err(|e| TbError::Format(format!("stored parameters invalid: {e}")))?;
    let (seed, stream) = (r.u64()?, r.u64()?);
    let (lattice_variance, clip_bound) = (r.f64()?, r.f64()?);
    let n_clipped = r.usize()?;
    let samples = (0..n).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
    r.end()?;
    Ok(MediumVolume {
        grid: Grid3 { nx, ny, nz, dx, dz },
        samples,
        params,
        seed,
        stream,
        lattice_variance,
        clip_bound,
        n_clipped,
    })
}

pub fn write_field<W: Write>(f: &EnvelopeField, w: W) -> Result<()> {
    let mut w = Writer(w);
    w.header(b"TBF1")?;
    w.u64(f.lattice.nx as u64)?;
    w.u64(f.lattice.ny as u64)?;
    for x in [f.lattice.dx, f.omega, f.k, f.z, f.norm0] {
        w.f64(x)?;
    }
    for c in &f.data {
        w.f32(c.re as f32)?;
        w.f32(c.im as f32)?;
    }
    Ok(())
}

pub fn read_field<R: Read>(r: R) -> Result<EnvelopeField> {
    let mut r = Reader(r);
    r.header(b"TBF1")?;
    let (nx, ny) = (r.usize()?, r.usize()?);
    let n = checked_len(nx, ny, 1)?;
    let (dx, omega, k, z, norm0) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?);
    let data = (0..n)
        .map(|_| Ok(C64::new(r.f32()? as f64, r.f32()? as f64)))
        .collect::<Result<Vec<_>>>()?;
    r.end()?;
    let mut f = EnvelopeField::new(omega, k, Lattice2::new(nx, ny, dx), data, z)?;
    f.norm0 = norm0;
    Ok(f)
}

pub fn write_moments<W: Write>(m: &MomentEstimate, w: W) -> Result<()> {
    let mut w = Writer(w);
    w.header(b"TBM2")?;
    w.u8(m.kind.tag())?;
    w.u64(m.lattice.nx as u64)?;
    w.u64(m.lattice.ny as u64)?;
    for x in [m.lattice.dx, m.omegas.0, m.omegas.1] {
        w.f64(x)?;
    }
    w.u64(m.count)?;
    w.u64(m.sites.len() as u64)?;
    for s in &m.sites {
        w.u64(*s as u64)?;
    }
    let put = |w: &mut Writer<W>, v: &[C64], e: &[f64]| -> Result<()> {
        for (c, s) in v.iter().zip(e) {
            w.f64(c.re)?;
            w.f64(c.im)?;
            w.f64(*s)?;
        }
        Ok(())
    };
    put(&mut w, &m.mean()?, &m.stderr()?)?;
    put(&mut w, &m.block()?, &m.block_stderr()?)?;
    Ok(())
}

pub fn read_moments<R: Read>(r: R) -> Result<MomentEstimate> {
    let mut r = Reader(r);
    r.header(b"TBM2")?;
    let kind = MomentKind::from_tag(r.u8()?)?;
    let (nx, ny) = (r.usize()?, r.usize()?);
    let n = checked_len(nx, ny, 1)?;
    let (dx, o1, o2) = (r.f64()?, r.f64()?, r.f64()?);
    let count = r.u64()?;
    let ns = r.usize()?;
    if ns > n {
        return Err(TbError::Format("more block sites than lattice points".into()));
    }
    let sites = (0..ns).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
    let mut get = |len: usize| -> Result<Vec<(C64, f64)>> {
        (0..len).map(|_| Ok((C64::new(r.f64()?, r.f64()?), r.f64()?))).collect()
    };
    let diag = get(n)?;
    let block = get(ns * ns)?;
    r.end()?;
    MomentEstimate::from_parts(kind, Lattice2::new(nx, ny, dx), (o1, o2), count, sites, diag, block)
}

pub fn covariance_csv(c: &CovarianceCurve) -> String {
    let mut s = String::from("offset_x,offset_y,offset_z,cov\n");
    for ((x, z), v) in c.offsets.iter().zip(&c.values) {
        s.push_str(&format!("{},{},{},{:.10e}\n", x[0], x[1], z, v));
    }
    s
}

pub fn travel_time_csv(p: &TravelTimePath) -> String {
    let mut s = String::from("z,Z\n");
    for (z, v) in p.z_samples.iter().zip(&p.z_values) {
        s.push_str(&format!("{z},{v:.10e}\n"));
    }
    s
}
