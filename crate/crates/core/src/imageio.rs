//! Grayscale image input (PGM `P2`/`P5` at 8 or 16 bits, 8/16-bit grayscale
//! PNG) and binary PGM output.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid_measure::GridMeasure;

/// Raw grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    pub maxval: u16,
    pub data: Vec<u16>,
}

impl GrayImage {
    /// Normalizes pixel intensities to a probability measure.
    pub fn to_measure(&self) -> Result<GridMeasure> {
        let data: Vec<f64> = self.data.iter().map(|&v| v as f64).collect();
        GridMeasure::from_pixel_buffer(self.rows, self.cols, &data)
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("PGM: missing or invalid {what}")))
    }
}

/// Parses an ASCII (`P2`) or binary (`P5`) PGM file.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 {
        return Err(Error::Format("PGM: file too short".into()));
    }
    let magic = &bytes[..2];
    match magic {
        b"P2" | b"P5" => {}
        b"P3" | b"P6" => return Err(Error::ColorUnsupported("PPM color image".into())),
        _ => return Err(Error::Format("not a PGM file".into())),
    }
    let mut h = Header { bytes, pos: 2 };
    let cols = h.number("width")?;
    let rows = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM: maxval {maxval} out of range")));
    }
    let len = rows * cols;
    let mut data = Vec::with_capacity(len);
    if magic == b"P2" {
        for _ in 0..len {
            let v = h.number("pixel")?;
            if v > maxval {
                return Err(Error::Format(format!(
                    "PGM: pixel {v} above maxval {maxval}"
                )));
            }
            data.push(v as u16);
        }
    } else {
        // exactly one whitespace byte separates the header from the raster
        let start = h.pos + 1;
        let wide = maxval > 255;
        let need = len * if wide { 2 } else { 1 };
        let raster = bytes
            .get(start..start + need)
            .ok_or_else(|| Error::Format("PGM: truncated raster".into()))?;
        if wide {
            data.extend(
                raster
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]])),
            );
        } else {
            data.extend(raster.iter().map(|&b| b as u16));
        }
        if let Some(v) = data.iter().find(|&&v| v as usize > maxval) {
            return Err(Error::Format(format!(
                "PGM: pixel {v} above maxval {maxval}"
            )));
        }
    }
    Ok(GrayImage {
        rows,
        cols,
        maxval: maxval as u16,
        data,
    })
}

/// Decodes a grayscale PNG; color and gray+alpha images are rejected.
pub fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    use image::{ColorType, ImageFormat};
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::Format(format!("PNG: {e}")))?;
    let (cols, rows) = (img.width() as usize, img.height() as usize);
    let (maxval, data) = match img.color() {
        ColorType::L8 => (
            255,
            img.into_luma8()
                .into_raw()
                .into_iter()
                .map(u16::from)
                .collect(),
        ),
        ColorType::L16 => (65535, img.into_luma16().into_raw()),
        other => return Err(Error::ColorUnsupported(format!("PNG color type {other:?}"))),
    };
    Ok(GrayImage {
        rows,
        cols,
        maxval,
        data,
    })
}

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Reads a PGM or PNG file, detected by its magic bytes.
pub fn read_image(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if bytes.starts_with(PNG_MAGIC) {
        decode_png(&bytes)
    } else {
        parse_pgm(&bytes)
    }
}

/// Reads an image and normalizes it to a probability measure.
pub fn load_measure(path: &Path) -> Result<GridMeasure> {
    read_image(path)?.to_measure()
}

/// Binary 8-bit PGM encoding of a row-major raster.
pub fn encode_pgm(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn write_pgm(path: &Path, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    let mut f =
        fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    f.write_all(&encode_pgm(rows, cols, pixels))?;
    Ok(())
}
