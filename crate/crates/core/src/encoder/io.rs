//! `UPENC` container: magic, arch tag byte, update-rule tag byte, depth,
//! code dim, input dim and atom count (little-endian u64), then `W`, `H`
//! and `t` (as a column) in the `UPMAT` binary format, then a group section:
//! a u64 byte length followed by the group-structure text (length 0 when
//! the arch has no groups).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{EncoderParams, UpdateRule};
use crate::error::{Error, Result};
use crate::prox::GroupStructure;
use crate::pursuit::Model;
use crate::tensor::io::read_u64;
use crate::tensor::{read_matrix_binary, write_matrix_binary, Mat};

pub const ENCODER_MAGIC: &[u8; 8] = b"UPENC\0\0\0";

pub fn write_encoder(w: &mut impl Write, p: &EncoderParams) -> Result<()> {
    w.write_all(ENCODER_MAGIC)?;
    w.write_all(&[p.arch().tag(), p.rule().tag()])?;
    for v in [p.depth(), p.code_dim(), p.input_dim(), p.atoms()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    write_matrix_binary(w, &p.w)?;
    write_matrix_binary(w, &p.h)?;
    write_matrix_binary(w, &Mat::new(p.t.len(), 1, p.t.clone())?)?;
    let text = p.groups().map(GroupStructure::to_text).unwrap_or_default();
    w.write_all(&(text.len() as u64).to_le_bytes())?;
    w.write_all(text.as_bytes())?;
    Ok(())
}

pub fn read_encoder(r: &mut impl Read) -> Result<EncoderParams> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != ENCODER_MAGIC {
        return Err(Error::Format("bad encoder magic".into()));
    }
    let mut tags = [0u8; 2];
    r.read_exact(&mut tags)?;
    let arch = Model::from_tag(tags[0])?;
    let rule = UpdateRule::from_tag(tags[1])?;
    let depth = read_u64(r)? as usize;
    let code_dim = read_u64(r)? as usize;
    let input_dim = read_u64(r)? as usize;
    let atoms = read_u64(r)? as usize;
    let w = read_matrix_binary(r)?;
    let h = read_matrix_binary(r)?;
    let t = read_matrix_binary(r)?;
    if w.shape() != (code_dim, input_dim) || h.shape() != (code_dim, code_dim) || t.cols() != 1 {
        return Err(Error::Format("encoder blocks disagree with the header".into()));
    }
    let len = read_u64(r)? as usize;
    let mut text = vec![0u8; len];
    r.read_exact(&mut text)?;
    let groups = if len == 0 {
        None
    } else {
        let text = String::from_utf8(text).map_err(|_| Error::Format("group section is not UTF-8".into()))?;
        Some(GroupStructure::parse(&text, code_dim)?)
    };
    EncoderParams::from_parts(arch, rule, depth, w, h, t.into_data(), groups, atoms)
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn save_encoder(path: &Path, p: &EncoderParams) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    write_encoder(&mut f, p)?;
    f.flush()?;
    Ok(())
}

pub fn load_encoder(path: &Path) -> Result<EncoderParams> {
    let bytes = fs::read(path)?;
    read_encoder(&mut bytes.as_slice())
}
