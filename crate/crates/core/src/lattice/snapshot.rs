//! Binary field snapshots.
//!
//! Layout: the 8-byte magic `YMHDSNP1`, a little-endian `u32` header length,
//! the UTF-8 JSON header ([`SnapshotMeta`]: grid, fibers, τ and the sector
//! list with reals per site), then every sector in header order as
//! little-endian `f64`. A JSON sidecar `<file>.json` carries the same header
//! plus free-form run metadata.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FieldState, Fibers, Grid, Sector};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"YMHDSNP1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorInfo {
    pub name: String,
    pub reals_per_site: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub grid: Grid,
    pub fibers: Fibers,
    pub tau: f64,
    pub sectors: Vec<SectorInfo>,
    #[serde(default)]
    pub extra: serde_json::Value,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_snapshot(path: &Path, state: &FieldState, extra: serde_json::Value) -> Result<()> {
    let meta = SnapshotMeta {
        grid: state.grid,
        fibers: state.fibers,
        tau: state.tau,
        sectors: Sector::ALL
            .iter()
            .map(|s| SectorInfo { name: s.name().into(), reals_per_site: s.reals_per_site(&state.fibers) })
            .collect(),
        extra,
    };
    let header = serde_json::to_vec(&meta).map_err(|e| Error::Format(e.to_string()))?;
    let mut buf = Vec::with_capacity(12 + header.len() + 8 * state.sectors().iter().map(|s| s.len()).sum::<usize>());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    for sector in state.sectors() {
        for v in sector {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    let side = serde_json::to_string_pretty(&meta).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(sidecar(path), side)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(FieldState, SnapshotMeta)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(Error::Format(format!("{} is not a snapshot file", path.display())));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(12 + hlen..).ok_or_else(|| Error::Format("truncated snapshot header".into()))?;
    let meta: SnapshotMeta =
        serde_json::from_slice(&bytes[12..12 + hlen]).map_err(|e| Error::Format(format!("bad snapshot header: {e}")))?;
    let mut state = FieldState::zeros(meta.grid, meta.fibers);
    state.tau = meta.tau;
    let expected: usize = state.sectors().iter().map(|s| s.len()).sum();
    if body.len() != 8 * expected {
        return Err(Error::Format(format!("snapshot body has {} bytes, expected {}", body.len(), 8 * expected)));
    }
    let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for sector in state.sectors_mut() {
        for v in sector.iter_mut() {
            *v = values.next().expect("length checked");
        }
    }
    Ok((state, meta))
}
