//! GPAT1 pattern-stack files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "GPAT"            4 bytes magic
//! version           u8 = 1
//! width, height     u32, u32
//! count             u32
//! family            u8 (0 uniform, 1 temporal, 2 spatial, 3 tsv)
//! seed              u64
//! tlv_len           u32, followed by tlv_len bytes of entries:
//!     tag u8, len u32, value[len]
//!     tag 1 schedule: u32 M, u32 stages, stages × (u32 cells, u32 count)
//!     tag 2 retina:   f64 cx, f64 cy, f64 r0, u32 roi_cell, f64 growth, u32 max_cell
//! masks             count × height × ceil(width / 8) bytes,
//!                   rows MSB-first and padded to a byte boundary
//! crc32             u32 over every preceding byte
//! ```

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::cellmaps::RetinaSpec;
use crate::error::{Error, Result};
use crate::raster::RoiSpec;

use super::{row_bytes, stage_assignment, stage_maps_for, Family, Pattern, PatternSequence, Schedule, Stage};

pub const MAGIC: &[u8; 4] = b"GPAT";
pub const VERSION: u8 = 1;

const TAG_SCHEDULE: u8 = 1;
const TAG_RETINA: u8 = 2;

/// Size of the fixed part of the header, before the TLV block contents.
pub const FIXED_HEADER_LEN: usize = 4 + 1 + 4 + 4 + 4 + 1 + 8 + 4;

fn tlv_block(seq: &PatternSequence) -> Vec<u8> {
    let mut block = Vec::new();
    if let Some(s) = &seq.schedule {
        let mut v = Vec::new();
        v.extend_from_slice(&(s.actual_resolution() as u32).to_le_bytes());
        v.extend_from_slice(&(s.stages().len() as u32).to_le_bytes());
        for st in s.stages() {
            v.extend_from_slice(&(st.cells as u32).to_le_bytes());
            v.extend_from_slice(&(st.count as u32).to_le_bytes());
        }
        block.push(TAG_SCHEDULE);
        block.extend_from_slice(&(v.len() as u32).to_le_bytes());
        block.extend_from_slice(&v);
    }
    if let Some(r) = &seq.retina {
        let mut v = Vec::new();
        v.extend_from_slice(&r.roi.center_x.to_le_bytes());
        v.extend_from_slice(&r.roi.center_y.to_le_bytes());
        v.extend_from_slice(&r.roi.radius.to_le_bytes());
        v.extend_from_slice(&(r.roi_cell_size as u32).to_le_bytes());
        v.extend_from_slice(&r.ring_growth.to_le_bytes());
        v.extend_from_slice(&(r.max_cell_size as u32).to_le_bytes());
        block.push(TAG_RETINA);
        block.extend_from_slice(&(v.len() as u32).to_le_bytes());
        block.extend_from_slice(&v);
    }
    block
}

/// Serializes a sequence to GPAT1 bytes.
pub fn encode_pattern_stack(seq: &PatternSequence) -> Vec<u8> {
    let tlv = tlv_block(seq);
    let mask_len = seq.height() * row_bytes(seq.width());
    let mut out = Vec::with_capacity(FIXED_HEADER_LEN + tlv.len() + seq.len() * mask_len + 4);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(seq.width() as u32).to_le_bytes());
    out.extend_from_slice(&(seq.height() as u32).to_le_bytes());
    out.extend_from_slice(&(seq.len() as u32).to_le_bytes());
    out.push(seq.family.tag());
    out.extend_from_slice(&seq.seed.to_le_bytes());
    out.extend_from_slice(&(tlv.len() as u32).to_le_bytes());
    out.extend_from_slice(&tlv);
    for p in &seq.patterns {
        out.extend_from_slice(&p.bits);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn write_pattern_stack(seq: &PatternSequence, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pattern_stack(seq))?;
    Ok(())
}

pub fn read_pattern_stack(path: impl AsRef<Path>) -> Result<PatternSequence> {
    decode_pattern_stack(&fs::read(path)?)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::MalformedStack(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_pattern_stack(bytes: &[u8]) -> Result<PatternSequence> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::MalformedStack("bad magic".into()));
    }
    if bytes.len() < FIXED_HEADER_LEN + 4 {
        return Err(Error::MalformedStack("file shorter than header".into()));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let mut c = Cursor { buf: body, pos: 4 };
    let version = c.u8()?;
    if version != VERSION {
        return Err(Error::MalformedStack(format!("unsupported version {version}")));
    }
    let width = c.u32()? as usize;
    let height = c.u32()? as usize;
    let count = c.u32()? as usize;
    let family = Family::from_tag(c.u8()?).ok_or_else(|| Error::MalformedStack("unknown family tag".into()))?;
    let seed = c.u64()?;
    let tlv_len = c.u32()? as usize;
    let mut tlv = Cursor { buf: c.take(tlv_len)?, pos: 0 };

    let mask_len = height * row_bytes(width);
    let expected = c.pos + count * mask_len;
    if body.len() != expected {
        return Err(Error::MalformedStack(format!(
            "payload holds {} bytes, header implies {}",
            body.len() - c.pos.min(body.len()),
            count * mask_len
        )));
    }
    let stored_crc = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    if crc32fast::hash(body) != stored_crc {
        return Err(Error::MalformedStack("checksum mismatch".into()));
    }
    if width != height || width == 0 {
        return Err(Error::MalformedStack(format!("unsupported frame {width}x{height}")));
    }

    let mut schedule = None;
    let mut retina = None;
    while tlv.pos < tlv.buf.len() {
        let tag = tlv.u8()?;
        let len = tlv.u32()? as usize;
        let mut v = Cursor { buf: tlv.take(len)?, pos: 0 };
        match tag {
            TAG_SCHEDULE => {
                let m = v.u32()? as usize;
                let n = v.u32()? as usize;
                let stages = (0..n)
                    .map(|_| Ok(Stage { cells: v.u32()? as usize, count: v.u32()? as usize }))
                    .collect::<Result<Vec<_>>>()?;
                schedule = Some(Schedule::from_stages(m, stages).map_err(|e| Error::MalformedStack(e.to_string()))?);
            }
            TAG_RETINA => {
                let roi = RoiSpec::new(v.f64()?, v.f64()?, v.f64()?).map_err(|e| Error::MalformedStack(e.to_string()))?;
                retina = Some(RetinaSpec {
                    roi,
                    roi_cell_size: v.u32()? as usize,
                    ring_growth: v.f64()?,
                    max_cell_size: v.u32()? as usize,
                });
            }
            _ => {} // unknown entries are skipped
        }
    }

    let maps = stage_maps_for(family, width, schedule.as_ref(), retina.as_ref())
        .map_err(|e| Error::MalformedStack(e.to_string()))?;
    let stages = stage_assignment(family, schedule.as_ref(), count).map_err(|e| Error::MalformedStack(e.to_string()))?;
    let payload = &body[c.pos..];
    let patterns: Vec<Pattern> = stages
        .iter()
        .enumerate()
        .map(|(i, &k)| Pattern {
            width,
            height,
            index: i,
            stage: k,
            bits: payload[i * mask_len..(i + 1) * mask_len].to_vec(),
            cell_map: Arc::clone(&maps[k]),
        })
        .collect();
    for p in &patterns {
        let map = p.source_cell_map();
        let reference = p.cell_values();
        let consistent = (0..height).all(|y| (0..width).all(|x| p.get(x, y) as u8 == reference[map.cell_at(x, y)]));
        if !consistent {
            return Err(Error::MalformedStack(format!("pattern {} is not constant within its cells", p.index)));
        }
    }
    Ok(PatternSequence {
        actual_resolution: width,
        family,
        schedule,
        retina,
        seed,
        stage_maps: maps,
        patterns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::{build_schedule, generate_sequence, SequenceRequest};

    fn tsv() -> PatternSequence {
        let retina = RetinaSpec::with_defaults(RoiSpec::new(8.0, 8.0, 4.0).unwrap(), 1, 16);
        generate_sequence(&SequenceRequest {
            family: Family::Tsv,
            actual_resolution: 16,
            count: 100,
            schedule: Some(build_schedule(16, 4).unwrap()),
            retina: Some(retina),
            seed: 0xDEAD_BEEF,
        })
        .unwrap()
    }

    #[test]
    fn roundtrip_with_metadata() {
        let seq = tsv();
        let back = decode_pattern_stack(&encode_pattern_stack(&seq)).unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn roundtrip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.gpat");
        let seq = tsv();
        write_pattern_stack(&seq, &path).unwrap();
        assert_eq!(read_pattern_stack(&path).unwrap(), seq);
    }

    #[test]
    fn corrupted_magic() {
        let mut bytes = encode_pattern_stack(&tsv());
        bytes[0] = b'X';
        assert!(matches!(decode_pattern_stack(&bytes), Err(Error::MalformedStack(_))));
    }

    #[test]
    fn flipped_payload_bit_fails_checksum() {
        let mut bytes = encode_pattern_stack(&tsv());
        let n = bytes.len();
        bytes[n - 10] ^= 0x01;
        let err = decode_pattern_stack(&bytes).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");
    }

    #[test]
    fn truncated_payload() {
        let bytes = encode_pattern_stack(&tsv());
        for cut in [1, 5, 40, bytes.len() - FIXED_HEADER_LEN] {
            assert!(decode_pattern_stack(&bytes[..bytes.len() - cut]).is_err(), "cut {cut}");
        }
    }

    #[test]
    fn odd_width_rows_are_padded() {
        let seq = generate_sequence(&SequenceRequest {
            family: Family::Uniform,
            actual_resolution: 12,
            count: 3,
            schedule: None,
            retina: None,
            seed: 1,
        })
        .unwrap();
        let bytes = encode_pattern_stack(&seq);
        assert_eq!(bytes.len(), FIXED_HEADER_LEN + 3 * 12 * 2 + 4);
        assert_eq!(decode_pattern_stack(&bytes).unwrap(), seq);
    }
}
