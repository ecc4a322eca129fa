//! Model checkpoints: a small binary container holding named f64 matrices.
//!
//! Layout (all integers little-endian):
//!   magic "DSPM", version u32, kind string, block count u32, then per block
//!   a name string, rows u32, cols u32, and rows*cols f64 values. Strings
//!   are a u32 byte length followed by UTF-8 bytes.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::demand::{CaGruParams, DemandKind, DemandModel, GruParams};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::preference::{DeepStyleParams, PrefVariant};

const MAGIC: &[u8; 4] = b"DSPM";
const VERSION: u32 = 1;

fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    if len > 1 << 20 {
        return Err(Error::Checkpoint(format!("implausible string length {len}")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Checkpoint("string is not UTF-8".into()))
}

fn write_mat<W: Write>(w: &mut W, name: &str, m: &Mat) -> Result<()> {
    write_string(w, name)?;
    w.write_u32::<LittleEndian>(m.rows as u32)?;
    w.write_u32::<LittleEndian>(m.cols as u32)?;
    for &v in &m.data {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

fn read_mat<R: Read>(r: &mut R) -> Result<(String, Mat)> {
    let name = read_string(r)?;
    let rows = r.read_u32::<LittleEndian>()? as usize;
    let cols = r.read_u32::<LittleEndian>()? as usize;
    let mut data = vec![0.0f64; rows * cols];
    r.read_f64_into::<LittleEndian>(&mut data)?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Checkpoint(format!("block {name} contains non-finite values")));
    }
    Ok((name, Mat { rows, cols, data }))
}

fn write_container<W: Write>(w: &mut W, kind: &str, blocks: &[(&str, &Mat)]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    write_string(w, kind)?;
    w.write_u32::<LittleEndian>(blocks.len() as u32)?;
    for (name, m) in blocks {
        write_mat(w, name, m)?;
    }
    Ok(())
}

fn read_container<R: Read>(r: &mut R) -> Result<(String, HashMap<String, Mat>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a model checkpoint".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let kind = read_string(r)?;
    let count = r.read_u32::<LittleEndian>()? as usize;
    let mut blocks = HashMap::new();
    for _ in 0..count {
        let (name, m) = read_mat(r)?;
        if blocks.insert(name.clone(), m).is_some() {
            return Err(Error::Checkpoint(format!("duplicate block {name}")));
        }
    }
    Ok((kind, blocks))
}

fn take(blocks: &mut HashMap<String, Mat>, name: &str) -> Result<Mat> {
    blocks
        .remove(name)
        .ok_or_else(|| Error::Checkpoint(format!("missing block {name}")))
}

pub fn write_preference<W: Write>(w: &mut W, params: &DeepStyleParams) -> Result<()> {
    write_container(
        w,
        params.variant.name(),
        &[
            ("embed", &params.embed),
            ("cat_vecs", &params.cat_vecs),
            ("user_vecs", &params.user_vecs),
            ("item_vecs", &params.item_vecs),
        ],
    )
}

pub fn read_preference<R: Read>(r: &mut R) -> Result<DeepStyleParams> {
    let (kind, mut blocks) = read_container(r)?;
    let variant = match kind.as_str() {
        "bpr" => PrefVariant::Bpr,
        "vbpr" => PrefVariant::Vbpr,
        "deepstyle" => PrefVariant::DeepStyle,
        other => {
            return Err(Error::Checkpoint(format!("{other} is not a preference model kind")))
        }
    };
    let embed = take(&mut blocks, "embed")?;
    let cat_vecs = take(&mut blocks, "cat_vecs")?;
    let user_vecs = take(&mut blocks, "user_vecs")?;
    let item_vecs = take(&mut blocks, "item_vecs")?;
    let d = user_vecs.cols;
    if cat_vecs.cols != d || item_vecs.cols != d || embed.rows != d {
        return Err(Error::Checkpoint("inconsistent latent dimensions".into()));
    }
    if variant.uses_features() && embed.cols == 0 {
        return Err(Error::Checkpoint(format!("{kind} checkpoint has an empty embedding")));
    }
    Ok(DeepStyleParams { variant, d, feat_dim: embed.cols, embed, cat_vecs, user_vecs, item_vecs })
}

pub fn write_demand<W: Write>(w: &mut W, model: &DemandModel) -> Result<()> {
    match model {
        DemandModel::Gru(p) => write_container(
            w,
            DemandKind::Gru.name(),
            &[
                ("w_z", &p.w_z),
                ("w_r", &p.w_r),
                ("w_h", &p.w_h),
                ("m_z", &p.m_z),
                ("m_r", &p.m_r),
                ("m_h", &p.m_h),
                ("cat_embed", &p.cat_embed),
            ],
        ),
        DemandModel::CaGru(p) => write_container(
            w,
            DemandKind::CaGru.name(),
            &[
                ("w_z", &p.w_z),
                ("w_a", &p.w_a),
                ("w_r", &p.w_r),
                ("w_h", &p.w_h),
                ("m_z", &p.m_z),
                ("m_a", &p.m_a),
                ("m_r", &p.m_r),
                ("m_h", &p.m_h),
                ("i_z", &p.i_z),
                ("i_a", &p.i_a),
                ("t_z", &p.t_z),
                ("t_r", &p.t_r),
                ("pred_i_a", &p.pred_i_a),
                ("pred_t_r", &p.pred_t_r),
                ("cat_embed", &p.cat_embed),
                ("input_ctx", &p.input_ctx),
                ("trans_ctx", &p.trans_ctx),
            ],
        ),
    }
}

pub fn read_demand<R: Read>(r: &mut R) -> Result<DemandModel> {
    let (kind, mut blocks) = read_container(r)?;
    let model = match kind.as_str() {
        "gru" => {
            let cat_embed = take(&mut blocks, "cat_embed")?;
            let d = cat_embed.cols;
            let p = GruParams {
                d,
                w_z: take(&mut blocks, "w_z")?,
                w_r: take(&mut blocks, "w_r")?,
                w_h: take(&mut blocks, "w_h")?,
                m_z: take(&mut blocks, "m_z")?,
                m_r: take(&mut blocks, "m_r")?,
                m_h: take(&mut blocks, "m_h")?,
                cat_embed,
            };
            for m in [&p.w_z, &p.w_r, &p.w_h, &p.m_z, &p.m_r, &p.m_h] {
                if m.rows != d || m.cols != d {
                    return Err(Error::Checkpoint("inconsistent hidden dimensions".into()));
                }
            }
            DemandModel::Gru(p)
        }
        "cagru" => {
            let cat_embed = take(&mut blocks, "cat_embed")?;
            let d = cat_embed.cols;
            let p = CaGruParams {
                d,
                w_z: take(&mut blocks, "w_z")?,
                w_a: take(&mut blocks, "w_a")?,
                w_r: take(&mut blocks, "w_r")?,
                w_h: take(&mut blocks, "w_h")?,
                m_z: take(&mut blocks, "m_z")?,
                m_a: take(&mut blocks, "m_a")?,
                m_r: take(&mut blocks, "m_r")?,
                m_h: take(&mut blocks, "m_h")?,
                i_z: take(&mut blocks, "i_z")?,
                i_a: take(&mut blocks, "i_a")?,
                t_z: take(&mut blocks, "t_z")?,
                t_r: take(&mut blocks, "t_r")?,
                pred_i_a: take(&mut blocks, "pred_i_a")?,
                pred_t_r: take(&mut blocks, "pred_t_r")?,
                cat_embed,
                input_ctx: take(&mut blocks, "input_ctx")?,
                trans_ctx: take(&mut blocks, "trans_ctx")?,
            };
            for m in [&p.w_z, &p.w_a, &p.w_r, &p.w_h, &p.m_z, &p.m_a, &p.m_r, &p.m_h, &p.i_z,
                &p.i_a, &p.t_z, &p.t_r, &p.pred_i_a, &p.pred_t_r]
            {
                if m.rows != d || m.cols != d {
                    return Err(Error::Checkpoint("inconsistent hidden dimensions".into()));
                }
            }
            if p.input_ctx.rows != crate::data::INPUT_CONTEXTS
                || p.trans_ctx.rows != crate::data::TRANSITION_CONTEXTS
                || p.input_ctx.cols != d
                || p.trans_ctx.cols != d
            {
                return Err(Error::Checkpoint("bad context embedding shape".into()));
            }
            DemandModel::CaGru(p)
        }
        other => return Err(Error::Checkpoint(format!("{other} is not a demand model kind"))),
    };
    Ok(model)
}

/// Read only the kind tag, to dispatch on the model family.
pub fn peek_kind(path: &Path) -> Result<String> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a model checkpoint".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    read_string(&mut r)
}

pub fn save_preference(path: &Path, params: &DeepStyleParams) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_preference(&mut w, params)
}

pub fn load_preference(path: &Path) -> Result<DeepStyleParams> {
    let mut r = BufReader::new(File::open(path)?);
    read_preference(&mut r)
}

pub fn save_demand(path: &Path, model: &DemandModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_demand(&mut w, model)
}

pub fn load_demand(path: &Path) -> Result<DemandModel> {
    let mut r = BufReader::new(File::open(path)?);
    read_demand(&mut r)
}
