//! Binary PGM (P5, maxval 255) images and label masks.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use oocyte_core::imagery::{ClassLabel, GrayImage, LabelMask};
use thiserror::Error;

use crate::fsutil::write_atomic;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("{}: no such file", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: malformed PGM header: {reason}", path.display())]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("{}: payload holds {got} bytes, header declares {expected}", path.display())]
    TruncatedPayload { path: PathBuf, expected: usize, got: usize },
    #[error("{}: value {value} at pixel {index} is not a class label", path.display())]
    InvalidLabel { path: PathBuf, value: u8, index: usize },
    #[error("{}: {source}", path.display())]
    IoFailure {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Header fields and payload offset of a P5 file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Header {
    width: usize,
    height: usize,
    offset: usize,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skips whitespace and `#` comments.
    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, String> {
        self.skip_separators();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("expected {what}"))
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header, String> {
    if !bytes.starts_with(b"P5") {
        return Err("only binary P5 files are supported".into());
    }
    let mut cur = Cursor { bytes, pos: 2 };
    if !cur.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err("expected whitespace after magic number".into());
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format!("zero-sized raster {width}x{height}"));
    }
    if maxval != 255 {
        return Err(format!("maxval {maxval} is not 255"));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => Ok(Header { width, height, offset: cur.pos + 1 }),
        _ => Err("expected a single whitespace byte before the payload".into()),
    }
}

/// Width, height and pixel bytes of a P5 file already in memory.
pub fn decode(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), PgmError> {
    let header = parse_header(bytes).map_err(|reason| PgmError::MalformedHeader { path: path.into(), reason })?;
    let expected = header
        .width
        .checked_mul(header.height)
        .ok_or_else(|| PgmError::MalformedHeader { path: path.into(), reason: "raster too large".into() })?;
    let payload = &bytes[header.offset..];
    if payload.len() < expected {
        return Err(PgmError::TruncatedPayload { path: path.into(), expected, got: payload.len() });
    }
    Ok((header.width, header.height, payload[..expected].to_vec()))
}

pub fn encode(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

fn read(path: &Path) -> Result<Vec<u8>, PgmError> {
    fs::read(path).map_err(|source| match source.kind() {
        io::ErrorKind::NotFound => PgmError::MissingFile(path.into()),
        _ => PgmError::IoFailure { path: path.into(), source },
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), PgmError> {
    write_atomic(path, bytes).map_err(|source| PgmError::IoFailure { path: path.into(), source })
}

pub fn load_gray_image(path: &Path) -> Result<GrayImage, PgmError> {
    let (w, h, pixels) = decode(path, &read(path)?)?;
    Ok(GrayImage::new(w, h, pixels).expect("decoded length matches header"))
}

pub fn load_label_mask(path: &Path) -> Result<LabelMask, PgmError> {
    let (w, h, labels) = decode(path, &read(path)?)?;
    if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &v)| ClassLabel::from_u8(v).is_none()) {
        return Err(PgmError::InvalidLabel { path: path.into(), value, index });
    }
    Ok(LabelMask::new(w, h, labels).expect("labels validated"))
}

pub fn save_gray_image(image: &GrayImage, path: &Path) -> Result<(), PgmError> {
    write(path, &encode(image.width(), image.height(), image.pixels()))
}

pub fn save_label_mask(mask: &LabelMask, path: &Path) -> Result<(), PgmError> {
    write(path, &encode(mask.width(), mask.height(), mask.ids()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("t.pgm")
    }

    #[test]
    fn decodes_two_by_two() {
        let (w, h, px) = decode(p(), b"P5\n2 2\n255\n\x00\xff\x0a\x14").unwrap();
        assert_eq!((w, h, px), (2, 2, vec![0, 255, 10, 20]));
    }

    #[test]
    fn header_comments_are_skipped() {
        let (w, h, px) = decode(p(), b"P5 # made by hand\n1 # width\n1\n255\n\x07").unwrap();
        assert_eq!((w, h, px), (1, 1, vec![7]));
    }

    #[test]
    fn ascii_variant_rejected() {
        assert!(matches!(decode(p(), b"P2\n1 1\n255\n7\n"), Err(PgmError::MalformedHeader { .. })));
    }

    #[test]
    fn other_maxval_rejected() {
        assert!(matches!(decode(p(), b"P5\n1 1\n65535\n\0\0"), Err(PgmError::MalformedHeader { .. })));
    }

    #[test]
    fn short_payload_is_truncated() {
        assert!(matches!(
            decode(p(), b"P5\n2 2\n255\n\x01\x02\x03"),
            Err(PgmError::TruncatedPayload { expected: 4, got: 3, .. })
        ));
    }

    #[test]
    fn encode_matches_header_layout() {
        assert_eq!(encode(3, 1, &[1, 2, 3]), b"P5\n3 1\n255\n\x01\x02\x03");
    }
}
