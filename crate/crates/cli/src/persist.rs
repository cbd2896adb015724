//! Binary persistence of simulated ensembles. Little-endian layout:
//!
//! ```text
//! magic "SNSE" | version u32 | config hash [32] | basis hash [32]
//! level u32 | path count u32
//! per path: seed u64 | stopped u8 | stopped_at f64 | event count u64
//!           per event: time f64 | kind u8 | state level x f64
//! ```

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use snse_core::galerkin::{CadlagPath, Ensemble, EventKind};
use snse_core::spectral::BasisTable;

use crate::CliError;

const MAGIC: &[u8; 4] = b"SNSE";
const VERSION: u32 = 1;

pub fn sha256_hex(data: &str) -> String {
    let mut h = Sha256::new();
    h.update(data.as_bytes());
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

fn hash_bytes(hex: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    for i in 0..32 {
        out[i] = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).expect("hex");
    }
    out
}

fn kind_byte(k: EventKind) -> u8 {
    match k {
        EventKind::Grid => 0,
        EventKind::Jump => 1,
        EventKind::Stop => 2,
    }
}

fn byte_kind(b: u8) -> Result<EventKind, CliError> {
    match b {
        0 => Ok(EventKind::Grid),
        1 => Ok(EventKind::Jump),
        2 => Ok(EventKind::Stop),
        other => Err(CliError::Ingestion(format!("unknown event kind byte {other}"))),
    }
}

pub fn write_ensemble(
    path: &Path,
    ensemble: &Ensemble,
    config_hash: &str,
    basis_hash: &str,
) -> Result<(), CliError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&hash_bytes(config_hash));
    buf.extend_from_slice(&hash_bytes(basis_hash));
    buf.extend_from_slice(&(ensemble.level as u32).to_le_bytes());
    buf.extend_from_slice(&(ensemble.paths.len() as u32).to_le_bytes());
    for p in &ensemble.paths {
        buf.extend_from_slice(&p.seed.to_le_bytes());
        buf.push(u8::from(p.stopped_at.is_some()));
        buf.extend_from_slice(&p.stopped_at.unwrap_or(0.0).to_le_bytes());
        buf.extend_from_slice(&(p.events.len() as u64).to_le_bytes());
        for e in &p.events {
            buf.extend_from_slice(&e.time.to_le_bytes());
            buf.push(kind_byte(e.kind));
            debug_assert_eq!(e.state.len(), ensemble.level);
            for a in &e.state {
                buf.extend_from_slice(&a.to_le_bytes());
            }
        }
    }
    let mut f = std::fs::File::create(path)
        .map_err(|e| CliError::Ingestion(format!("cannot create {path:?}: {e}")))?;
    f.write_all(&buf)
        .map_err(|e| CliError::Ingestion(format!("cannot write {path:?}: {e}")))?;
    Ok(())
}

/// Plot-ready CSV of all paths of an ensemble, with the provenance
/// hash embedded as a comment header.
pub fn ensemble_csv(ensemble: &Ensemble, config_hash: &str) -> String {
    let mut out = format!("# config {config_hash}\npath,time,kind");
    for i in 0..ensemble.level {
        out.push_str(&format!(",a{}", i + 1));
    }
    out.push('\n');
    for (pi, p) in ensemble.paths.iter().enumerate() {
        for e in &p.events {
            let kind = match e.kind {
                EventKind::Grid => "grid",
                EventKind::Jump => "jump",
                EventKind::Stop => "stop",
            };
            out.push_str(&format!("{pi},{},{}", e.time, kind));
            for a in &e.state {
                out.push_str(&format!(",{a}"));
            }
            out.push('\n');
        }
    }
    out
}

pub struct LoadedEnsemble {
    pub ensemble: Ensemble,
    pub config_hash: String,
    pub basis_hash: String,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        if self.pos + n > self.data.len() {
            return Err(CliError::Ingestion("truncated ensemble file".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8, CliError> {
        Ok(self.take(1)?[0])
    }
}

pub fn read_ensemble(
    path: &Path,
    basis: &Arc<BasisTable>,
    t_horizon: f64,
) -> Result<LoadedEnsemble, CliError> {
    let mut data = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| CliError::Ingestion(format!("cannot open {path:?}: {e}")))?
        .read_to_end(&mut data)
        .map_err(|e| CliError::Ingestion(format!("cannot read {path:?}: {e}")))?;
    let mut c = Cursor { data: &data, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(CliError::Ingestion("not an ensemble file".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(CliError::Ingestion(format!("unsupported ensemble version {version}")));
    }
    let mut config_hash = String::with_capacity(64);
    for b in c.take(32)? {
        config_hash.push_str(&format!("{b:02x}"));
    }
    let mut basis_hash = String::with_capacity(64);
    for b in c.take(32)? {
        basis_hash.push_str(&format!("{b:02x}"));
    }
    let level = c.u32()? as usize;
    let count = c.u32()? as usize;
    let mut paths = Vec::with_capacity(count);
    for _ in 0..count {
        let seed = c.u64()?;
        let stopped = c.u8()? != 0;
        let stopped_at = c.f64()?;
        let _ = (stopped, stopped_at); // recomputed from the stop record
        let events = c.u64()? as usize;
        let mut records = Vec::with_capacity(events);
        for _ in 0..events {
            let time = c.f64()?;
            let kind = byte_kind(c.u8()?)?;
            let mut state = Vec::with_capacity(level);
            for _ in 0..level {
                state.push(c.f64()?);
            }
            records.push((time, kind, state));
        }
        let path = CadlagPath::from_records(basis, level, t_horizon, seed, records)
            .map_err(CliError::from_core)?;
        paths.push(path);
    }
    let base_seed = paths.first().map(|p| p.seed).unwrap_or(0);
    Ok(LoadedEnsemble {
        ensemble: Ensemble { paths, failures: Vec::new(), base_seed, level },
        config_hash,
        basis_hash,
    })
}
