//! Rasters: the grayscale micrograph, the five-class label mask and boolean masks.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Segmentation classes, numbered in the order they are stored in mask files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum ClassLabel {
    Background = 0,
    Cytoplasm = 1,
    ZonaPellucida = 2,
    PolarBody = 3,
    CumulusCells = 4,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 5] = [
        ClassLabel::Background,
        ClassLabel::Cytoplasm,
        ClassLabel::ZonaPellucida,
        ClassLabel::PolarBody,
        ClassLabel::CumulusCells,
    ];

    pub fn from_u8(value: u8) -> Option<Self> {
        Self::ALL.get(value as usize).copied()
    }

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Background => "background",
            ClassLabel::Cytoplasm => "cytoplasm",
            ClassLabel::ZonaPellucida => "zona_pellucida",
            ClassLabel::PolarBody => "polar_body",
            ClassLabel::CumulusCells => "cumulus_cells",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RasterError {
    /// Width or height is zero.
    EmptyRaster,
    /// Pixel buffer does not hold `width * height` values.
    LengthMismatch { expected: usize, got: usize },
    /// A mask value outside the five known classes.
    InvalidLabel { value: u8, index: usize },
    /// Requested window does not fit the raster.
    WindowOutOfBounds,
}

impl fmt::Display for RasterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RasterError::EmptyRaster => write!(f, "raster must be at least 1x1"),
            RasterError::LengthMismatch { expected, got } => {
                write!(f, "expected {expected} pixels, got {got}")
            }
            RasterError::InvalidLabel { value, index } => {
                write!(f, "invalid class label {value} at pixel {index}")
            }
            RasterError::WindowOutOfBounds => write!(f, "window exceeds raster bounds"),
        }
    }
}

impl core::error::Error for RasterError {}

fn check_dims(width: usize, height: usize, len: usize) -> Result<(), RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::EmptyRaster);
    }
    let expected = width * height;
    if len != expected {
        return Err(RasterError::LengthMismatch { expected, got: len });
    }
    Ok(())
}

/// Single-channel 8-bit image, row-major, origin top-left.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, RasterError> {
        check_dims(width, height, pixels.len())?;
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, RasterError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    /// Intensities as reals in `[0, 255]`, unscaled.
    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| f64::from(p)).collect()
    }

    /// Copies the `w`×`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self, RasterError> {
        let pixels = crop_rows(&self.pixels, self.width, self.height, x0, y0, w, h)?;
        Self::new(w, h, pixels)
    }
}

/// Per-pixel class labels, stored as validated ids `0..=4`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMask {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self, RasterError> {
        check_dims(width, height, labels.len())?;
        if let Some(index) = labels.iter().position(|&v| v > ClassLabel::CumulusCells.id()) {
            return Err(RasterError::InvalidLabel { value: labels[index], index });
        }
        Ok(Self { width, height, labels })
    }

    /// All-background mask.
    pub fn background(width: usize, height: usize) -> Result<Self, RasterError> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Raw label ids, row-major.
    pub fn ids(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> ClassLabel {
        // ids are validated on construction and on every `set`
        ClassLabel::ALL[self.labels[y * self.width + x] as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, class: ClassLabel) {
        self.labels[y * self.width + x] = class.id();
    }

    pub fn count(&self, class: ClassLabel) -> usize {
        self.labels.iter().filter(|&&v| v == class.id()).count()
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self, RasterError> {
        let labels = crop_rows(&self.labels, self.width, self.height, x0, y0, w, h)?;
        Ok(Self { width: w, height: h, labels })
    }

    /// Boolean mask of the pixels carrying `class`.
    pub fn to_binary(&self, class: ClassLabel) -> BinaryMask {
        mask_to_binary(self, class)
    }
}

/// Boolean raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, RasterError> {
        check_dims(width, height, bits.len())?;
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self, RasterError> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Pixel-wise OR of two equally sized masks.
    pub fn union(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| a || b).collect();
        BinaryMask { width: self.width, height: self.height, bits }
    }

    /// Reads the mask back as a label mask using class 1 for set pixels.
    pub fn to_label_mask(&self) -> LabelMask {
        let labels = self.bits.iter().map(|&b| u8::from(b)).collect();
        LabelMask { width: self.width, height: self.height, labels }
    }
}

/// Pixel is set iff its label equals `class`.
pub fn mask_to_binary(mask: &LabelMask, class: ClassLabel) -> BinaryMask {
    let id = class.id();
    BinaryMask { width: mask.width, height: mask.height, bits: mask.labels.iter().map(|&v| v == id).collect() }
}

fn crop_rows<T: Copy>(
    data: &[T],
    width: usize,
    height: usize,
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
) -> Result<Vec<T>, RasterError> {
    if w == 0 || h == 0 {
        return Err(RasterError::EmptyRaster);
    }
    if x0 + w > width || y0 + h > height {
        return Err(RasterError::WindowOutOfBounds);
    }
    let mut out = Vec::with_capacity(w * h);
    for y in y0..y0 + h {
        out.extend_from_slice(&data[y * width + x0..y * width + x0 + w]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn binary_of_cytoplasm() {
        let mask = LabelMask::new(2, 2, vec![0, 1, 1, 2]).unwrap();
        let bin = mask_to_binary(&mask, ClassLabel::Cytoplasm);
        assert_eq!(bin.bits(), &[false, true, true, false]);
    }

    #[test]
    fn absent_class_gives_empty_mask() {
        let mask = LabelMask::new(2, 2, vec![0, 1, 1, 2]).unwrap();
        assert!(mask_to_binary(&mask, ClassLabel::PolarBody).is_empty());
    }

    #[test]
    fn binary_of_binary_is_identity() {
        let mask = LabelMask::new(3, 1, vec![0, 4, 1]).unwrap();
        let once = mask_to_binary(&mask, ClassLabel::Cytoplasm);
        let twice = mask_to_binary(&once.to_label_mask(), ClassLabel::Cytoplasm);
        assert_eq!(once, twice);
    }

    #[test]
    fn rejects_out_of_range_label() {
        let err = LabelMask::new(2, 1, vec![0, 5]).unwrap_err();
        assert_eq!(err, RasterError::InvalidLabel { value: 5, index: 1 });
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert_eq!(GrayImage::new(0, 3, vec![]).unwrap_err(), RasterError::EmptyRaster);
        assert_eq!(
            GrayImage::new(2, 2, vec![1, 2, 3]).unwrap_err(),
            RasterError::LengthMismatch { expected: 4, got: 3 }
        );
    }

    #[test]
    fn per_class_masks_partition_the_frame() {
        let labels: Vec<u8> = (0..60u32).map(|i| ((i * 7 + i / 3) % 5) as u8).collect();
        let mask = LabelMask::new(10, 6, labels).unwrap();
        let masks: Vec<_> = ClassLabel::ALL.iter().map(|&c| mask_to_binary(&mask, c)).collect();
        for i in 0..60 {
            let hits = masks.iter().filter(|m| m.bits()[i]).count();
            assert_eq!(hits, 1);
        }
    }

    #[test]
    fn crop_copies_window() {
        let img = GrayImage::new(3, 3, (0..9).collect()).unwrap();
        let c = img.crop(1, 1, 2, 2).unwrap();
        assert_eq!(c.pixels(), &[4, 5, 7, 8]);
        assert_eq!(img.crop(2, 2, 2, 2).unwrap_err(), RasterError::WindowOutOfBounds);
    }
}
