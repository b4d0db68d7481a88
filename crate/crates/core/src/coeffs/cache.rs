//! On-disk cache for [`InteractionTable`].
//!
//! Layout, all little-endian:
//!
//! ```text
//! "OUE1" | N: u32 | convention: u32 | count: u64 | count × (p1 p2 q1 q2 k1 k2: u32, value: f64)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::{GalerkinBasis, InteractionTable, TableEntry};
use crate::error::{Error, Result};
use crate::hermite::MultiIndex;

pub const MAGIC: [u8; 4] = *b"OUE1";

/// Identifies the c-power convention of the stored coefficients. Bump when
/// the normalization of `A` changes so stale caches are rejected.
pub const CONVENTION_TAG: u32 = 1;

pub fn write_table(table: &InteractionTable, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&table.basis().max_index().to_le_bytes())?;
    w.write_all(&CONVENTION_TAG.to_le_bytes())?;
    w.write_all(&(table.len() as u64).to_le_bytes())?;
    for e in table.entries() {
        for v in [e.p.k1, e.p.k2, e.q.k1, e.q.k2, e.k.k1, e.k.k2] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&e.value.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a cached table. A header whose `N` differs from `expected_n`, or whose
/// convention tag is stale, is reported as [`Error::Cache`].
pub fn read_table(path: &Path, expected_n: u32) -> Result<InteractionTable> {
    let bad = |reason: String| Error::Cache { path: path.to_path_buf(), reason };
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| bad(format!("truncated header: {e}")))?;
    if magic != MAGIC {
        return Err(bad("bad magic bytes".into()));
    }
    let n = read_u32(&mut r).map_err(|e| bad(format!("truncated header: {e}")))?;
    let tag = read_u32(&mut r).map_err(|e| bad(format!("truncated header: {e}")))?;
    let count = read_u64(&mut r).map_err(|e| bad(format!("truncated header: {e}")))?;
    if tag != CONVENTION_TAG {
        return Err(bad(format!("convention tag {tag}, expected {CONVENTION_TAG}")));
    }
    if n != expected_n {
        return Err(bad(format!("table is for N = {n}, expected N = {expected_n}")));
    }
    let mut entries = Vec::with_capacity(count.min(1 << 24) as usize);
    for i in 0..count {
        let mut idx = [0u32; 6];
        for v in &mut idx {
            *v = read_u32(&mut r).map_err(|e| bad(format!("record {i}: {e}")))?;
        }
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf).map_err(|e| bad(format!("record {i}: {e}")))?;
        entries.push(TableEntry {
            p: MultiIndex::new(idx[0], idx[1]),
            q: MultiIndex::new(idx[2], idx[3]),
            k: MultiIndex::new(idx[4], idx[5]),
            value: f64::from_le_bytes(buf),
        });
    }
    InteractionTable::from_entries(Arc::new(GalerkinBasis::new(n)), entries).map_err(|e| bad(e.to_string()))
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
