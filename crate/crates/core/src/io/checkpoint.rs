//! Binary wave-function snapshots.
//!
//! Layout (little-endian): `"EDWF"`, version `u32`, `D: u64`, `D` point
//! counts `u64`, `D` axis lengths `f64`, particle count `u64`, masses `f64`,
//! `hbar`, `eta`, time stamp `f64`, then `(re, im)` pairs `f64` in row-major
//! axis order, and finally the CRC-32 (`u32`) of every preceding byte.

use std::path::Path;

use num_complex::Complex64;

use crate::grid::{GridSpec, MAX_CONFIG_DIM};
use crate::state::WaveFunction;
use crate::system::ParticleSystem;

use super::output::write_atomic;
use super::IoError;

pub const MAGIC: &[u8; 4] = b"EDWF";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub state: WaveFunction,
    pub system: ParticleSystem,
}

pub fn encode_checkpoint(psi: &WaveFunction, system: &ParticleSystem) -> Vec<u8> {
    let g = psi.grid();
    let dim = g.config_dim();
    let mut out = Vec::with_capacity(64 + 16 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u64).to_le_bytes());
    for &p in g.points() {
        out.extend_from_slice(&(p as u64).to_le_bytes());
    }
    for &l in g.lengths() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out.extend_from_slice(&(system.particle_count() as u64).to_le_bytes());
    for &m in system.masses() {
        out.extend_from_slice(&m.to_le_bytes());
    }
    for v in [system.hbar(), system.eta(), psi.time()] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for z in psi.amplitudes() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], IoError> {
        if self.bytes.len() - self.pos < n {
            return Err(IoError::TruncatedFile { expected: self.pos + n, found: self.bytes.len() });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, IoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, IoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, IoError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(IoError::BadMagic);
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(IoError::VersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    let dim = r.u64()? as usize;
    if dim == 0 || dim > MAX_CONFIG_DIM {
        return Err(IoError::InvalidCheckpoint(format!("configuration dimension {dim}")));
    }
    let points = (0..dim).map(|_| r.u64().map(|p| p as usize)).collect::<Result<Vec<_>, _>>()?;
    let lengths = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let particles = r.u64()? as usize;
    if particles == 0 || particles > dim || dim % particles != 0 {
        return Err(IoError::InvalidCheckpoint(format!("{particles} particles in {dim} dimensions")));
    }
    let masses = (0..particles).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let (hbar, eta, time) = (r.f64()?, r.f64()?, r.f64()?);
    let overflow = || IoError::InvalidCheckpoint("grid size overflows".into());
    let len = points.iter().try_fold(1usize, |acc, &p| acc.checked_mul(p)).ok_or_else(overflow)?;
    let expected = len.checked_mul(16).and_then(|n| n.checked_add(r.pos + 4)).ok_or_else(overflow)?;
    if bytes.len() < expected {
        return Err(IoError::TruncatedFile { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(IoError::InvalidCheckpoint(format!("{} trailing bytes", bytes.len() - expected)));
    }
    let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(&bytes[..expected - 4]);
    if stored != computed {
        return Err(IoError::ChecksumMismatch { stored, computed });
    }
    let amplitudes = (0..len)
        .map(|_| Ok(Complex64::new(r.f64()?, r.f64()?)))
        .collect::<Result<Vec<_>, IoError>>()?;
    let grid = GridSpec::new(dim / particles, particles, points, lengths)?;
    let system = ParticleSystem::with_eta(masses, hbar, eta)?;
    let state = WaveFunction::new(grid, amplitudes, time)?;
    Ok(Checkpoint { state, system })
}

pub fn write_checkpoint(psi: &WaveFunction, system: &ParticleSystem, path: &Path) -> Result<(), IoError> {
    write_atomic(path, &encode_checkpoint(psi, system))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, IoError> {
    let bytes = std::fs::read(path).map_err(|e| IoError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::gaussian_packet;

    fn sample() -> (WaveFunction, ParticleSystem) {
        let g = GridSpec::uniform(1, 1, 128, 32.0).unwrap();
        let sys = ParticleSystem::with_eta(vec![1.5], 1.0, 0.8).unwrap();
        let mut psi = gaussian_packet(&g, &sys, &[vec![0.3]], &[1.0], &[0.7]).unwrap();
        psi.set_time(0.125);
        (psi, sys)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (psi, sys) = sample();
        let cp = decode_checkpoint(&encode_checkpoint(&psi, &sys)).unwrap();
        assert_eq!(cp.system, sys);
        assert_eq!(cp.state.time().to_bits(), psi.time().to_bits());
        for (a, b) in cp.state.amplitudes().iter().zip(psi.amplitudes()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let (psi, sys) = sample();
        let bytes = encode_checkpoint(&psi, &sys);
        for cut in [0, 3, 7, 30, bytes.len() - 1] {
            assert!(matches!(decode_checkpoint(&bytes[..cut]), Err(IoError::TruncatedFile { .. })), "cut {cut}");
        }
        let mut v = bytes.clone();
        v[4] += 1;
        assert!(matches!(decode_checkpoint(&v), Err(IoError::VersionMismatch { found: 2, .. })));
        let mut m = bytes.clone();
        m[0] = b'X';
        assert!(matches!(decode_checkpoint(&m), Err(IoError::BadMagic)));
        let mut c = bytes.clone();
        let k = c.len() - 100;
        c[k] ^= 1;
        assert!(matches!(decode_checkpoint(&c), Err(IoError::ChecksumMismatch { .. })));
    }
}
