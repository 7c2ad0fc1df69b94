//! Versioned binary checkpoints: model kind, hyperparameters, every
//! parameter plane, batch-norm running statistics, and the vocabulary hash
//! of the store the model was trained on.
//!
//! Layout (little-endian): magic `HKGE`, format version, header fields,
//! then the value planes at the configured storage precision. A 32-bit
//! checkpoint rounds every value to `f32`; loading promotes back to `f64`,
//! so save → load → save reproduces the file byte for byte.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::TripleStore;
use crate::model::{ConvConfig, ConvHead, EmbeddingTable, ModelKind, ModelParams, NormMode};
use crate::nn::{BatchNorm1d, Tensor};
use crate::train::Precision;

const MAGIC: &[u8; 4] = b"HKGE";
const VERSION: u32 = 1;

/// Write a checkpoint for a model trained against the given store.
pub fn save_checkpoint(
    params: &ModelParams,
    store: &TripleStore,
    precision: Precision,
    path: &Path,
) -> Result<()> {
    save_with_hash(params, store.vocab_hash(), precision, path)
}

/// [`save_checkpoint`] with an explicit vocabulary hash.
pub fn save_with_hash(
    params: &ModelParams,
    vocab_hash: [u8; 32],
    precision: Precision,
    path: &Path,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    write_u32(&mut w, VERSION)?;
    w.write_all(&[
        kind_code(params.kind),
        norm_code(params.norm),
        precision.bits(),
        params.conv.is_some() as u8,
    ])?;
    write_u32(&mut w, params.dim() as u32)?;
    write_u32(&mut w, params.n_entities() as u32)?;
    write_u32(&mut w, params.n_relations() as u32)?;
    if let Some(conv) = &params.conv {
        write_u32(&mut w, conv.config.filters as u32)?;
        write_u32(&mut w, conv.config.kernel_size as u32)?;
        write_f64(&mut w, conv.config.dropout_input)?;
        write_f64(&mut w, conv.config.dropout_feature)?;
        write_f64(&mut w, conv.config.dropout_hidden)?;
    }
    w.write_all(&vocab_hash)?;

    let mut planes: Vec<&[f64]> = vec![params.entities.data(), params.relations.data()];
    for bn in [&params.bn_head, &params.bn_rel, &params.bn_conv].into_iter().flatten() {
        planes.push(&bn.gamma);
        planes.push(&bn.beta);
        planes.push(&bn.running_mean);
        planes.push(&bn.running_var);
    }
    if let Some(conv) = &params.conv {
        planes.push(conv.kernels.data());
        planes.push(conv.w.data());
        planes.push(&conv.b);
    }
    for plane in planes {
        write_plane(&mut w, plane, precision)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a checkpoint, returning the parameters, the stored vocabulary hash,
/// and the storage precision.
pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, [u8; 32], Precision)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::CheckpointVersion(format!(
            "bad magic bytes {magic:02x?}"
        )));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::CheckpointVersion(format!(
            "format version {version}, expected {VERSION}"
        )));
    }
    let mut flags = [0u8; 4];
    read_exact(&mut r, &mut flags)?;
    let kind = kind_from(flags[0])?;
    let norm = norm_from(flags[1])?;
    let precision = match flags[2] {
        32 => Precision::F32,
        64 => Precision::F64,
        other => {
            return Err(Error::CheckpointVersion(format!(
                "unsupported precision {other}"
            )))
        }
    };
    let has_conv = flags[3] != 0;
    if has_conv != kind.has_conv() {
        return Err(Error::CheckpointVersion(format!(
            "conv flag inconsistent with model kind {kind}"
        )));
    }
    let dim = read_u32(&mut r)? as usize;
    let n_entities = read_u32(&mut r)? as usize;
    let n_relations = read_u32(&mut r)? as usize;
    if dim == 0 || n_entities == 0 || n_relations == 0 {
        return Err(Error::CheckpointVersion("degenerate table sizes".into()));
    }
    let conv_config = if has_conv {
        Some(ConvConfig {
            filters: read_u32(&mut r)? as usize,
            kernel_size: read_u32(&mut r)? as usize,
            dropout_input: read_f64(&mut r)?,
            dropout_feature: read_f64(&mut r)?,
            dropout_hidden: read_f64(&mut r)?,
        })
    } else {
        None
    };
    let mut vocab_hash = [0u8; 32];
    read_exact(&mut r, &mut vocab_hash)?;

    let c = kind.algebra().components();
    let width = c * dim;
    let mut entities = EmbeddingTable::zeros(n_entities, c, dim);
    read_plane(&mut r, entities.data_mut(), precision)?;
    let mut relations = EmbeddingTable::zeros(n_relations, c, dim);
    read_plane(&mut r, relations.data_mut(), precision)?;

    let read_bn = |r: &mut BufReader<File>, width: usize| -> Result<BatchNorm1d> {
        let mut bn = BatchNorm1d::new(width);
        read_plane(r, &mut bn.gamma, precision)?;
        read_plane(r, &mut bn.beta, precision)?;
        read_plane(r, &mut bn.running_mean, precision)?;
        read_plane(r, &mut bn.running_var, precision)?;
        Ok(bn)
    };

    let conv_width = conv_config.map(|cfg| cfg.filters * 2 * c * dim);
    let (bn_head, bn_rel, bn_conv) = if norm == NormMode::Batch {
        let head = read_bn(&mut r, width)?;
        let rel = read_bn(&mut r, width)?;
        let conv_bn = match conv_width {
            Some(cw) => Some(read_bn(&mut r, cw)?),
            None => None,
        };
        (Some(head), Some(rel), conv_bn)
    } else {
        (None, None, None)
    };

    let conv = match conv_config {
        Some(cfg) => {
            let ks = cfg.kernel_size;
            let mut kernels = Tensor::zeros(&[cfg.filters, 1, ks, ks])?;
            read_plane(&mut r, kernels.data_mut(), precision)?;
            let flat_width = conv_width.expect("conv width");
            let mut w = Tensor::zeros(&[flat_width, width])?;
            read_plane(&mut r, w.data_mut(), precision)?;
            let mut b = vec![0.0; width];
            read_plane(&mut r, &mut b, precision)?;
            Some(ConvHead { kernels, w, b, config: cfg })
        }
        None => None,
    };

    Ok((
        ModelParams {
            kind,
            norm,
            entities,
            relations,
            bn_head,
            bn_rel,
            bn_conv,
            conv,
        },
        vocab_hash,
        precision,
    ))
}

/// Load a checkpoint and verify it was trained on the given store's
/// vocabulary.
pub fn load_for_store(path: &Path, store: &TripleStore) -> Result<ModelParams> {
    let (params, hash, _) = load_checkpoint(path)?;
    if hash != store.vocab_hash() {
        return Err(Error::VocabHashMismatch);
    }
    params.check_store(store)?;
    Ok(params)
}

fn kind_code(kind: ModelKind) -> u8 {
    match kind {
        ModelKind::QMult => 0,
        ModelKind::OMult => 1,
        ModelKind::ConvQ => 2,
        ModelKind::ConvO => 3,
    }
}

fn kind_from(code: u8) -> Result<ModelKind> {
    Ok(match code {
        0 => ModelKind::QMult,
        1 => ModelKind::OMult,
        2 => ModelKind::ConvQ,
        3 => ModelKind::ConvO,
        other => return Err(Error::CheckpointVersion(format!("unknown model code {other}"))),
    })
}

fn norm_code(norm: NormMode) -> u8 {
    match norm {
        NormMode::Batch => 0,
        NormMode::Unit => 1,
        NormMode::None => 2,
    }
}

fn norm_from(code: u8) -> Result<NormMode> {
    Ok(match code {
        0 => NormMode::Batch,
        1 => NormMode::Unit,
        2 => NormMode::None,
        other => return Err(Error::CheckpointVersion(format!("unknown norm code {other}"))),
    })
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_plane<W: Write>(w: &mut W, plane: &[f64], precision: Precision) -> Result<()> {
    write_u32(w, plane.len() as u32)?;
    match precision {
        Precision::F64 => {
            for &v in plane {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Precision::F32 => {
            for &v in plane {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::CheckpointTruncated
        } else {
            Error::Io(e)
        }
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_plane<R: Read>(r: &mut R, out: &mut [f64], precision: Precision) -> Result<()> {
    let len = read_u32(r)? as usize;
    if len != out.len() {
        return Err(Error::CheckpointVersion(format!(
            "plane length {len}, expected {}",
            out.len()
        )));
    }
    match precision {
        Precision::F64 => {
            let mut buf = [0u8; 8];
            for v in out.iter_mut() {
                read_exact(r, &mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
        }
        Precision::F32 => {
            let mut buf = [0u8; 4];
            for v in out.iter_mut() {
                read_exact(r, &mut buf)?;
                *v = f32::from_le_bytes(buf) as f64;
            }
        }
    }
    Ok(())
}
