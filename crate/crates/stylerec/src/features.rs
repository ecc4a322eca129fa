//! Precomputed visual feature vectors and their on-disk format.
//!
//! Binary layout: magic `VFSR`, little-endian u32 item count, u32 dimension,
//! then count * dim little-endian f32 values row-major. Row order matches a
//! companion text manifest of item ids, one per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"VFSR";

/// Dense matrix of per-item visual features, one row per catalog item.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    rows: Vec<f32>,
}

impl FeatureStore {
    pub fn new(dim: usize, rows: Vec<f32>) -> Result<Self> {
        if dim == 0 || rows.len() % dim != 0 {
            return Err(Error::Dimension(format!(
                "feature buffer of {} values is not a multiple of dim {dim}",
                rows.len()
            )));
        }
        if !rows.iter().all(|v| v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
        Ok(FeatureStore { dim, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_items(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn row(&self, item: usize) -> Result<&[f32]> {
        if item >= self.n_items() {
            return Err(Error::Data(format!("no feature row for item index {item}")));
        }
        Ok(&self.rows[item * self.dim..(item + 1) * self.dim])
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(self.n_items() as u32)?;
        w.write_u32::<LittleEndian>(self.dim as u32)?;
        for v in &self.rows {
            w.write_f32::<LittleEndian>(*v)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Data(format!("bad feature file magic {magic:?}")));
        }
        let count = r.read_u32::<LittleEndian>()? as usize;
        let dim = r.read_u32::<LittleEndian>()? as usize;
        let mut rows = vec![0f32; count * dim];
        r.read_f32_into::<LittleEndian>(&mut rows)?;
        FeatureStore::new(dim, rows)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

pub fn write_manifest(path: &Path, item_ids: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for id in item_ids {
        writeln!(w, "{id}")?;
    }
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<String>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() {
            out.push(t.to_string());
        }
    }
    Ok(out)
}
