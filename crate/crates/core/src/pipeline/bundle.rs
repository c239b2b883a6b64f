//! `.txm` model bundle container.
//!
//! ```text
//! magic      4 bytes   "TXMB"
//! version    u32 LE
//! sections   u32 LE    number of sections
//! section*   tag: 4 ASCII bytes, len: u64 LE, payload: len bytes
//! checksum   32 bytes  SHA-256 of everything before it
//! ```
//!
//! Sections, in order: `META` (JSON: gazetteer digests, config),
//! `SIMS` (JSON: similarity store), `VECT` (JSON: vectorizer incl. lexicon
//! and categories), `OVOM` (binary pairwise weights, see [`write_ovo`]).

use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ModelBundle;
use crate::config::Config;
use crate::corpus::{CategoryId, CategorySet};
use crate::error::{Error, Result};
use crate::preprocess::GazetteerDigests;
use crate::svm::{LinearModel, OvoModel, PairModel};

pub const MAGIC: &[u8; 4] = b"TXMB";
pub const FORMAT_VERSION: u32 = 1;

const SECTIONS: [&[u8; 4]; 4] = [b"META", b"SIMS", b"VECT", b"OVOM"];

#[derive(Serialize, Deserialize)]
struct Meta {
    gazetteer: GazetteerDigests,
    config: Config,
}

pub fn save_bundle(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = Vec::new();
    write_bundle(bundle, &mut bytes)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<ModelBundle> {
    read_bundle(&std::fs::read(path)?)
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("bundle sections serialize")
}

pub fn write_bundle<W: Write>(bundle: &ModelBundle, mut out: W) -> Result<()> {
    let meta = Meta {
        gazetteer: bundle.gazetteer.clone(),
        config: bundle.config.clone(),
    };
    let mut ovo = Vec::new();
    write_ovo(&bundle.ovo, &mut ovo)?;
    let payloads = [json(&meta), json(&bundle.store), json(&bundle.vectorizer), ovo];

    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.write_u32::<LittleEndian>(bundle.format_version)?;
    buf.write_u32::<LittleEndian>(SECTIONS.len() as u32)?;
    for (tag, payload) in SECTIONS.iter().zip(&payloads) {
        buf.extend_from_slice(*tag);
        buf.write_u64::<LittleEndian>(payload.len() as u64)?;
        buf.extend_from_slice(payload);
    }
    let checksum = Sha256::digest(&buf);
    out.write_all(&buf)?;
    out.write_all(&checksum)?;
    Ok(())
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Corrupt(msg.into())
}

pub fn read_bundle(bytes: &[u8]) -> Result<ModelBundle> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(corrupt("missing magic header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if bytes.len() < 12 + 32 {
        return Err(corrupt("truncated file"));
    }
    let (body, checksum) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != checksum {
        return Err(corrupt("checksum mismatch (truncated or modified file)"));
    }

    let mut cur = Cursor::new(&body[8..]);
    let count = cur.read_u32::<LittleEndian>()? as usize;
    if count != SECTIONS.len() {
        return Err(corrupt(format!("expected {} sections, found {count}", SECTIONS.len())));
    }
    let mut payloads = Vec::with_capacity(count);
    for expected in SECTIONS {
        let mut tag = [0u8; 4];
        cur.read_exact(&mut tag).map_err(|_| corrupt("truncated section header"))?;
        if &tag != expected {
            return Err(corrupt(format!("unexpected section {:?}", String::from_utf8_lossy(&tag))));
        }
        let len = cur.read_u64::<LittleEndian>().map_err(|_| corrupt("truncated section header"))? as usize;
        let start = cur.position() as usize;
        let data = cur.get_ref();
        if start + len > data.len() {
            return Err(corrupt("section overruns file"));
        }
        payloads.push(&data[start..start + len]);
        cur.set_position((start + len) as u64);
    }
    if cur.position() as usize != cur.get_ref().len() {
        return Err(corrupt("trailing bytes after last section"));
    }

    let section = |i: usize| payloads[i];
    let meta: Meta = serde_json::from_slice(section(0)).map_err(|e| corrupt(format!("META: {e}")))?;
    let store = serde_json::from_slice(section(1)).map_err(|e| corrupt(format!("SIMS: {e}")))?;
    let vectorizer: crate::features::VectorizerModel =
        serde_json::from_slice(section(2)).map_err(|e| corrupt(format!("VECT: {e}")))?;
    let ovo = read_ovo(section(3), vectorizer.categories.clone())?;
    if ovo.dimension != vectorizer.dimension() {
        return Err(corrupt("SVM dimension does not match the vectorizer"));
    }
    meta.config.validate()?;
    Ok(ModelBundle {
        format_version: version,
        gazetteer: meta.gazetteer,
        config: meta.config,
        store,
        vectorizer,
        ovo,
    })
}

/// `dimension: u64, k: u32, train_counts: k × u64`, then per pair model
/// `first: u16, second: u16, bias: f64, nnz: u32, nnz × (index: u32, weight: f64)`.
pub fn write_ovo<W: Write>(ovo: &OvoModel, out: &mut W) -> Result<()> {
    out.write_u64::<LittleEndian>(ovo.dimension as u64)?;
    out.write_u32::<LittleEndian>(ovo.k() as u32)?;
    for c in &ovo.train_counts {
        out.write_u64::<LittleEndian>(*c as u64)?;
    }
    for pm in &ovo.models {
        out.write_u16::<LittleEndian>(pm.first.0)?;
        out.write_u16::<LittleEndian>(pm.second.0)?;
        out.write_f64::<LittleEndian>(pm.model.bias)?;
        let nz: Vec<(usize, f64)> = pm
            .model
            .weights
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, w)| *w != 0.0)
            .collect();
        out.write_u32::<LittleEndian>(nz.len() as u32)?;
        for (i, w) in nz {
            out.write_u32::<LittleEndian>(i as u32)?;
            out.write_f64::<LittleEndian>(w)?;
        }
    }
    Ok(())
}

fn read_ovo(bytes: &[u8], categories: CategorySet) -> Result<OvoModel> {
    let short = |_| corrupt("OVOM section truncated");
    let mut cur = Cursor::new(bytes);
    let dimension = cur.read_u64::<LittleEndian>().map_err(short)? as usize;
    let k = cur.read_u32::<LittleEndian>().map_err(short)? as usize;
    if k != categories.len() {
        return Err(corrupt("OVOM category count differs from the vectorizer"));
    }
    let train_counts = (0..k)
        .map(|_| cur.read_u64::<LittleEndian>().map(|c| c as usize).map_err(short))
        .collect::<Result<Vec<_>>>()?;
    let mut models = Vec::with_capacity(k * (k - 1) / 2);
    for _ in 0..k * (k - 1) / 2 {
        let first = CategoryId(cur.read_u16::<LittleEndian>().map_err(short)?);
        let second = CategoryId(cur.read_u16::<LittleEndian>().map_err(short)?);
        let bias = cur.read_f64::<LittleEndian>().map_err(short)?;
        let nnz = cur.read_u32::<LittleEndian>().map_err(short)? as usize;
        let mut weights = vec![0.0; dimension];
        for _ in 0..nnz {
            let i = cur.read_u32::<LittleEndian>().map_err(short)? as usize;
            let w = cur.read_f64::<LittleEndian>().map_err(short)?;
            *weights.get_mut(i).ok_or_else(|| corrupt("weight index out of range"))? = w;
        }
        models.push(PairModel {
            first,
            second,
            model: LinearModel { weights, bias },
        });
    }
    if cur.position() as usize != bytes.len() {
        return Err(corrupt("trailing bytes in OVOM section"));
    }
    OvoModel::from_parts(categories, dimension, models, train_counts).map_err(|e| corrupt(e.to_string()))
}
