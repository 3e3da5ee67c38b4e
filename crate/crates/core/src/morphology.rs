//! Mask-domain machinery: connected components, size filtering, centroids,
//! ROI extraction, boundary tracing and hole filling.
//!
//! Components use 8-connectivity; boundary and hole tests use 4-adjacency.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::imagery::{BinaryMask, GrayImage, LabelMask, RasterError};

/// Side length of the square window cut around each detected oocyte.
pub const ROI_SIDE: usize = 416;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MorphologyError {
    EmptyInput,
    FrameTooSmall { width: usize, height: usize, side: usize },
    SizeMismatch,
    Raster(RasterError),
}

impl fmt::Display for MorphologyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MorphologyError::EmptyInput => write!(f, "no components to choose from"),
            MorphologyError::FrameTooSmall { width, height, side } => {
                write!(f, "frame {width}x{height} is smaller than the {side}x{side} window")
            }
            MorphologyError::SizeMismatch => write!(f, "image and mask sizes differ"),
            MorphologyError::Raster(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for MorphologyError {}

impl From<RasterError> for MorphologyError {
    fn from(e: RasterError) -> Self {
        MorphologyError::Raster(e)
    }
}

/// An 8-connected set of foreground pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    /// Member pixels as `(x, y)`, in raster order.
    pixels: Vec<(usize, usize)>,
    frame_width: usize,
    frame_height: usize,
}

impl Component {
    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    /// Arithmetic mean of member coordinates.
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.pixels.len() as f64;
        let (sx, sy) = self.pixels.iter().fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
        (sx / n, sy / n)
    }

    pub fn frame_size(&self) -> (usize, usize) {
        (self.frame_width, self.frame_height)
    }

    /// The component rendered into a mask the size of its frame.
    pub fn to_mask(&self) -> BinaryMask {
        let mut bits = vec![false; self.frame_width * self.frame_height];
        for &(x, y) in &self.pixels {
            bits[y * self.frame_width + x] = true;
        }
        BinaryMask::new(self.frame_width, self.frame_height, bits).expect("component frame is non-empty")
    }
}

/// Labels the 8-connected foreground components, ordered by the raster
/// position of their first pixel.
pub fn connected_components(mask: &BinaryMask) -> Vec<Component> {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut seen = vec![false; w * h];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        while let Some(idx) = queue.pop_front() {
            members.push(idx);
            let (x, y) = (idx % w, idx / w);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let n = ny * w + nx;
                    if bits[n] && !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        members.sort_unstable();
        components.push(Component {
            pixels: members.into_iter().map(|i| (i % w, i / w)).collect(),
            frame_width: w,
            frame_height: h,
        });
    }
    components
}

/// Drops every component strictly smaller than `min_area`.
pub fn suppress_small(components: Vec<Component>, min_area: usize) -> Vec<Component> {
    components.into_iter().filter(|c| c.area() >= min_area).collect()
}

/// Largest component; the earliest in scan order wins ties.
pub fn keep_largest(components: &[Component]) -> Result<&Component, MorphologyError> {
    let mut best: Option<&Component> = None;
    for c in components {
        if best.is_none_or(|b| c.area() > b.area()) {
            best = Some(c);
        }
    }
    best.ok_or(MorphologyError::EmptyInput)
}

/// Nearest integer, halves rounded away from zero.
pub fn round_half_away(v: f64) -> i64 {
    libm::round(v) as i64
}

/// A fixed-size crop of image and mask around one oocyte.
#[derive(Debug, Clone, PartialEq)]
pub struct Roi {
    pub source_id: String,
    /// Requested center after rounding, in source-frame coordinates.
    pub center: (i64, i64),
    /// Top-left corner of the window in the source frame.
    pub origin: (usize, usize),
    pub image: GrayImage,
    pub mask: LabelMask,
}

impl Roi {
    /// Wraps an already cropped image/mask pair.
    pub fn from_parts(
        source_id: impl Into<String>,
        image: GrayImage,
        mask: LabelMask,
    ) -> Result<Self, MorphologyError> {
        if (image.width(), image.height()) != (mask.width(), mask.height()) {
            return Err(MorphologyError::SizeMismatch);
        }
        let center = ((image.width() / 2) as i64, (image.height() / 2) as i64);
        Ok(Self { source_id: source_id.into(), center, origin: (0, 0), image, mask })
    }
}

fn window_start(center: i64, frame: usize, side: usize) -> usize {
    let half = (side / 2) as i64;
    let max_start = (frame - side) as i64;
    (center - half).clamp(0, max_start) as usize
}

/// Cuts the `ROI_SIDE`-square window centered on `center`, shifted to stay
/// inside the frame when it would cross an edge.
pub fn extract_roi(
    source_id: &str,
    image: &GrayImage,
    mask: &LabelMask,
    center: (f64, f64),
) -> Result<Roi, MorphologyError> {
    extract_roi_sized(source_id, image, mask, center, ROI_SIDE)
}

/// [`extract_roi`] with a window of `side` pixels.
pub fn extract_roi_sized(
    source_id: &str,
    image: &GrayImage,
    mask: &LabelMask,
    center: (f64, f64),
    side: usize,
) -> Result<Roi, MorphologyError> {
    if side == 0 {
        return Err(MorphologyError::EmptyInput);
    }
    let (w, h) = (image.width(), image.height());
    if (w, h) != (mask.width(), mask.height()) {
        return Err(MorphologyError::SizeMismatch);
    }
    if w < side || h < side {
        return Err(MorphologyError::FrameTooSmall { width: w, height: h, side });
    }
    let center = (round_half_away(center.0), round_half_away(center.1));
    let x0 = window_start(center.0, w, side);
    let y0 = window_start(center.1, h, side);
    Ok(Roi {
        source_id: source_id.into(),
        center,
        origin: (x0, y0),
        image: image.crop(x0, y0, side, side)?,
        mask: mask.crop(x0, y0, side, side)?,
    })
}

/// Member pixels with at least one 4-neighbor outside the component; the
/// frame edge counts as outside.
pub fn boundary_pixels(component: &Component) -> Vec<(usize, usize)> {
    let (w, h) = component.frame_size();
    let inside = component.to_mask();
    component
        .pixels()
        .iter()
        .copied()
        .filter(|&(x, y)| {
            x == 0
                || y == 0
                || x + 1 == w
                || y + 1 == h
                || !inside.get(x - 1, y)
                || !inside.get(x + 1, y)
                || !inside.get(x, y - 1)
                || !inside.get(x, y + 1)
        })
        .collect()
}

/// Sets every background pixel that is not 4-connected to the frame border.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    let seed = |idx: usize, outside: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
        if !bits[idx] && !outside[idx] {
            outside[idx] = true;
            queue.push_back(idx);
        }
    };
    for x in 0..w {
        seed(x, &mut outside, &mut queue);
        seed((h - 1) * w + x, &mut outside, &mut queue);
    }
    for y in 0..h {
        seed(y * w, &mut outside, &mut queue);
        seed(y * w + w - 1, &mut outside, &mut queue);
    }
    while let Some(idx) = queue.pop_front() {
        let (x, y) = (idx % w, idx / w);
        if x > 0 {
            seed(idx - 1, &mut outside, &mut queue);
        }
        if x + 1 < w {
            seed(idx + 1, &mut outside, &mut queue);
        }
        if y > 0 {
            seed(idx - w, &mut outside, &mut queue);
        }
        if y + 1 < h {
            seed(idx + w, &mut outside, &mut queue);
        }
    }
    let filled = outside.iter().map(|&o| !o).collect();
    BinaryMask::new(w, h, filled).expect("same dimensions as input")
}
