//! MRC-2014 subset reader/writer (mode 2 only) and binary PGM export.
//!
//! Header words are 4-byte little-endian. Words 1–3 hold NX, NY, NZ, word 4
//! the mode, words 8–10 the sampling MX, MY, MZ and words 11–13 the cell
//! lengths. `"MAP "` sits at byte 208. The float32 payload follows the
//! 1024-byte header plus any extended header, with x varying fastest.

use std::fs;
use std::path::Path;

use super::{DatagenError, Grid};

pub const HEADER_BYTES: usize = 1024;
const MAP_MAGIC_OFFSET: usize = 208;

fn put_i32(buf: &mut [u8], word: usize, v: i32) {
    buf[(word - 1) * 4..word * 4].copy_from_slice(&v.to_le_bytes());
}

fn put_f32(buf: &mut [u8], word: usize, v: f32) {
    buf[(word - 1) * 4..word * 4].copy_from_slice(&v.to_le_bytes());
}

fn get_i32(buf: &[u8], word: usize) -> i32 {
    i32::from_le_bytes(buf[(word - 1) * 4..word * 4].try_into().unwrap())
}

fn get_f32(buf: &[u8], word: usize) -> f32 {
    f32::from_le_bytes(buf[(word - 1) * 4..word * 4].try_into().unwrap())
}

/// Serialises a 3D grid to MRC bytes.
pub fn encode_volume(grid: &Grid) -> Result<Vec<u8>, DatagenError> {
    if grid.rank() != 3 || grid.dims().iter().any(|&n| n != grid.dims()[0]) {
        return Err(DatagenError::Shape(format!("volume files hold cubic 3D grids, got {:?}", grid.dims())));
    }
    let [nz, ny, nx] = [grid.dims()[0], grid.dims()[1], grid.dims()[2]];
    let mut header = vec![0u8; HEADER_BYTES];
    put_i32(&mut header, 1, nx as i32);
    put_i32(&mut header, 2, ny as i32);
    put_i32(&mut header, 3, nz as i32);
    put_i32(&mut header, 4, 2);
    put_i32(&mut header, 8, nx as i32);
    put_i32(&mut header, 9, ny as i32);
    put_i32(&mut header, 10, nz as i32);
    let vs = grid.voxel_size();
    put_f32(&mut header, 11, nx as f32 * vs);
    put_f32(&mut header, 12, ny as f32 * vs);
    put_f32(&mut header, 13, nz as f32 * vs);
    for w in 14..=16 {
        put_f32(&mut header, w, 90.0);
    }
    put_i32(&mut header, 17, 1);
    put_i32(&mut header, 18, 2);
    put_i32(&mut header, 19, 3);
    let vals = grid.values();
    let (lo, hi) = vals.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let mean = (vals.iter().map(|&v| f64::from(v)).sum::<f64>() / vals.len() as f64) as f32;
    put_f32(&mut header, 20, lo);
    put_f32(&mut header, 21, hi);
    put_f32(&mut header, 22, mean);
    put_i32(&mut header, 23, 1);
    put_i32(&mut header, 28, 20140);
    header[MAP_MAGIC_OFFSET..MAP_MAGIC_OFFSET + 4].copy_from_slice(b"MAP ");
    header[212..216].copy_from_slice(&[0x44, 0x44, 0, 0]);

    let mut out = header;
    out.reserve(vals.len() * 4);
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses MRC bytes into a cubic grid.
pub fn decode_volume(bytes: &[u8]) -> Result<Grid, DatagenError> {
    let format = |offset: usize, reason: String| DatagenError::Format { offset, reason };
    if bytes.len() < HEADER_BYTES {
        return Err(format(bytes.len(), format!("header needs {HEADER_BYTES} bytes, file has {}", bytes.len())));
    }
    if &bytes[MAP_MAGIC_OFFSET..MAP_MAGIC_OFFSET + 4] != b"MAP " {
        return Err(format(MAP_MAGIC_OFFSET, "missing \"MAP \" magic".into()));
    }
    let (nx, ny, nz) = (get_i32(bytes, 1), get_i32(bytes, 2), get_i32(bytes, 3));
    if nx <= 0 || ny <= 0 || nz <= 0 {
        return Err(format(0, format!("invalid dimensions {nx}×{ny}×{nz}")));
    }
    if !(nx == ny && ny == nz) {
        return Err(format(0, format!("volume must be cubic, got {nx}×{ny}×{nz}")));
    }
    let mode = get_i32(bytes, 4);
    if mode != 2 {
        return Err(format(12, format!("unsupported mode {mode}, only mode 2 (float32) is accepted")));
    }
    let ext = get_i32(bytes, 24);
    if ext < 0 {
        return Err(format(92, format!("negative extended header size {ext}")));
    }
    let start = HEADER_BYTES + ext as usize;
    let n = (nx as usize) * (ny as usize) * (nz as usize);
    let end = start + n * 4;
    if bytes.len() < end {
        return Err(format(bytes.len().max(start), format!("payload truncated: need {end} bytes, file has {}", bytes.len())));
    }
    let values = bytes[start..end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mx = get_i32(bytes, 8);
    let xlen = get_f32(bytes, 11);
    let voxel = if mx > 0 && xlen > 0.0 { xlen / mx as f32 } else { 1.0 };
    Ok(Grid::new(vec![nz as usize, ny as usize, nx as usize], values)?.with_voxel_size(voxel))
}

pub fn write_volume(grid: &Grid, path: &Path) -> Result<(), DatagenError> {
    fs::write(path, encode_volume(grid)?)?;
    Ok(())
}

pub fn read_volume(path: &Path) -> Result<Grid, DatagenError> {
    decode_volume(&fs::read(path)?)
}

/// Binary PGM (P5, maxval 255) of a 2D grid; values are clamped to `[0, 1]`.
pub fn encode_pgm(grid: &Grid) -> Result<Vec<u8>, DatagenError> {
    if grid.rank() != 2 {
        return Err(DatagenError::Shape(format!("PGM export needs a 2D grid, got {:?}", grid.dims())));
    }
    let (h, w) = (grid.dims()[0], grid.dims()[1]);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(grid.values().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    Ok(out)
}

pub fn write_pgm(grid: &Grid, path: &Path) -> Result<(), DatagenError> {
    fs::write(path, encode_pgm(grid)?)?;
    Ok(())
}

/// Reads a P5 file written by [`encode_pgm`].
pub fn decode_pgm(bytes: &[u8]) -> Result<Grid, DatagenError> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(DatagenError::Format {
                offset: pos,
                reason: "truncated PGM header".into(),
            });
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let bad = |reason: &str| DatagenError::Format {
        offset: 0,
        reason: reason.into(),
    };
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad("only P5 with maxval 255 is supported"));
    }
    let w: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
    let h: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
    if bytes.len() < pos + w * h {
        return Err(DatagenError::Format {
            offset: bytes.len(),
            reason: "truncated PGM payload".into(),
        });
    }
    Grid::new(vec![h, w], bytes[pos..pos + w * h].iter().map(|&b| f32::from(b) / 255.0).collect())
}
