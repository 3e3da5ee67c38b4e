//! Cytoplasm texture: subband energies of a three-level undecimated (à trous)
//! Haar transform, plus first-order intensity statistics.
//!
//! Subband naming puts the horizontal (x) filter first: `LH` is low-pass along
//! rows and high-pass along columns.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;
use core::fmt;

use crate::imagery::{BinaryMask, ClassLabel, GrayImage};
use crate::morphology::{connected_components, keep_largest, Roi};

pub const LEVELS: usize = 3;

/// Haar analysis pair.
pub const LOW_PASS: [f64; 2] = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
pub const HIGH_PASS: [f64; 2] = [FRAC_1_SQRT_2, -FRAC_1_SQRT_2];

pub const SUBBAND_NAMES: [&str; 10] =
    ["E_LL3", "E_LH1", "E_HL1", "E_HH1", "E_LH2", "E_HL2", "E_HH2", "E_LH3", "E_HL3", "E_HH3"];

#[derive(Debug, Clone, PartialEq)]
pub enum TextureError {
    ImageTooSmall { width: usize, height: usize },
    EmptyMask,
    SizeMismatch,
    MissingCytoplasm,
}

impl fmt::Display for TextureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TextureError::ImageTooSmall { width, height } => {
                write!(f, "wavelet transform needs at least 8x8 pixels, got {width}x{height}")
            }
            TextureError::EmptyMask => write!(f, "mask selects no pixels"),
            TextureError::SizeMismatch => write!(f, "raster and mask sizes differ"),
            TextureError::MissingCytoplasm => write!(f, "no cytoplasm in region"),
        }
    }
}

impl core::error::Error for TextureError {}

/// Real-valued raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height);
        Self { width, height, data }
    }

    pub fn from_image(image: &GrayImage) -> Self {
        Self::new(image.width(), image.height(), image.to_f64())
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Index into a half-sample symmetric extension of `0..n`.
pub fn symmetric_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

/// The ten full-size subbands of a three-level transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Subbands {
    pub ll3: Plane,
    /// `details[l] = [LH, HL, HH]` at level `l + 1`.
    pub details: [[Plane; 3]; LEVELS],
}

impl Subbands {
    /// Subbands in canonical order: LL3, then LH, HL, HH for levels 1..=3.
    pub fn planes(&self) -> [&Plane; 10] {
        let d = &self.details;
        [&self.ll3, &d[0][0], &d[0][1], &d[0][2], &d[1][0], &d[1][1], &d[1][2], &d[2][0], &d[2][1], &d[2][2]]
    }
}

fn filter_rows(src: &Plane, taps: &[f64; 2], step: usize) -> Plane {
    let (w, h) = (src.width, src.height);
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let row = &src.data[y * w..(y + 1) * w];
        for x in 0..w {
            let far = symmetric_index((x + step) as isize, w);
            out[y * w + x] = taps[0] * row[x] + taps[1] * row[far];
        }
    }
    Plane::new(w, h, out)
}

fn filter_cols(src: &Plane, taps: &[f64; 2], step: usize) -> Plane {
    let (w, h) = (src.width, src.height);
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let far = symmetric_index((y + step) as isize, h);
        for x in 0..w {
            out[y * w + x] = taps[0] * src.data[y * w + x] + taps[1] * src.data[far * w + x];
        }
    }
    Plane::new(w, h, out)
}

/// Three-level undecimated Haar transform. Level `l` uses the Haar pair
/// dilated by `2^(l-1)` and is applied to the previous level's low-pass band.
pub fn uwt_haar3(image: &Plane) -> Result<Subbands, TextureError> {
    if image.width < 8 || image.height < 8 {
        return Err(TextureError::ImageTooSmall { width: image.width, height: image.height });
    }
    let mut approx = image.clone();
    let mut details: Vec<[Plane; 3]> = Vec::with_capacity(LEVELS);
    for level in 0..LEVELS {
        let step = 1 << level;
        let low = filter_rows(&approx, &LOW_PASS, step);
        let high = filter_rows(&approx, &HIGH_PASS, step);
        let lh = filter_cols(&low, &HIGH_PASS, step);
        let hl = filter_cols(&high, &LOW_PASS, step);
        let hh = filter_cols(&high, &HIGH_PASS, step);
        approx = filter_cols(&low, &LOW_PASS, step);
        details.push([lh, hl, hh]);
    }
    let details: [[Plane; 3]; LEVELS] = details.try_into().expect("exactly LEVELS entries");
    Ok(Subbands { ll3: approx, details })
}

/// Mean squared coefficient over the masked pixels, one value per subband in
/// canonical order.
pub fn subband_energies(bands: &Subbands, mask: &BinaryMask) -> Result<[f64; 10], TextureError> {
    let ll = &bands.ll3;
    if (mask.width(), mask.height()) != (ll.width, ll.height) {
        return Err(TextureError::SizeMismatch);
    }
    let count = mask.count();
    if count == 0 {
        return Err(TextureError::EmptyMask);
    }
    let planes = bands.planes();
    let mut energies = [0.0; 10];
    for (energy, plane) in energies.iter_mut().zip(planes) {
        let sum: f64 = plane.data.iter().zip(mask.bits()).filter(|(_, &m)| m).map(|(&c, _)| c * c).sum();
        *energy = sum / count as f64;
    }
    Ok(energies)
}

/// Mean, population variance and Shannon entropy (bits) of the 256-bin
/// histogram of masked intensities.
pub fn intensity_stats(image: &GrayImage, mask: &BinaryMask) -> Result<(f64, f64, f64), TextureError> {
    if (mask.width(), mask.height()) != (image.width(), image.height()) {
        return Err(TextureError::SizeMismatch);
    }
    let mut hist = [0u64; 256];
    let mut n = 0u64;
    for (&p, &m) in image.pixels().iter().zip(mask.bits()) {
        if m {
            hist[p as usize] += 1;
            n += 1;
        }
    }
    if n == 0 {
        return Err(TextureError::EmptyMask);
    }
    let nf = n as f64;
    let mean = hist.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum::<f64>() / nf;
    let variance =
        hist.iter().enumerate().map(|(v, &c)| (v as f64 - mean) * (v as f64 - mean) * c as f64).sum::<f64>() / nf;
    let entropy = -hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / nf;
            p * libm::log2(p)
        })
        .sum::<f64>();
    Ok((mean, variance, entropy.max(0.0)))
}

/// The thirteen texture features, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TextureFeatures {
    /// `[LL3, LH1, HL1, HH1, LH2, HL2, HH2, LH3, HL3, HH3]`
    pub energies: [f64; 10],
    pub mean: f64,
    pub variance: f64,
    pub entropy: f64,
}

impl TextureFeatures {
    pub fn to_array(&self) -> [f64; 13] {
        let mut out = [0.0; 13];
        out[..10].copy_from_slice(&self.energies);
        out[10] = self.mean;
        out[11] = self.variance;
        out[12] = self.entropy;
        out
    }
}

/// Texture of the largest cytoplasm component in `roi`.
pub fn compute_texture(roi: &Roi) -> Result<TextureFeatures, TextureError> {
    let parts = connected_components(&roi.mask.to_binary(ClassLabel::Cytoplasm));
    let cyto = keep_largest(&parts).map_err(|_| TextureError::MissingCytoplasm)?.to_mask();
    let bands = uwt_haar3(&Plane::from_image(&roi.image))?;
    let energies = subband_energies(&bands, &cyto)?;
    let (mean, variance, entropy) = intensity_stats(&roi.image, &cyto)?;
    Ok(TextureFeatures { energies, mean, variance, entropy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    /// Each level as one direct 2×2 dilated 2-D convolution of the previous
    /// low-pass band, with no separable passes.
    fn direct_oracle(image: &Plane) -> Vec<Plane> {
        let (w, h) = (image.width, image.height);
        let mut approx = image.clone();
        let mut out = Vec::new();
        let mut details = Vec::new();
        for level in 0..LEVELS {
            let d = 1isize << level;
            let kernel = |fx: &[f64; 2], fy: &[f64; 2], src: &Plane| {
                let mut data = vec![0.0; w * h];
                for y in 0..h {
                    for x in 0..w {
                        let mut acc = 0.0;
                        for (ky, cy) in fy.iter().enumerate() {
                            for (kx, cx) in fx.iter().enumerate() {
                                let sx = symmetric_index(x as isize + kx as isize * d, w);
                                let sy = symmetric_index(y as isize + ky as isize * d, h);
                                acc += cx * cy * src.get(sx, sy);
                            }
                        }
                        data[y * w + x] = acc;
                    }
                }
                Plane::new(w, h, data)
            };
            let lh = kernel(&LOW_PASS, &HIGH_PASS, &approx);
            let hl = kernel(&HIGH_PASS, &LOW_PASS, &approx);
            let hh = kernel(&HIGH_PASS, &HIGH_PASS, &approx);
            approx = kernel(&LOW_PASS, &LOW_PASS, &approx);
            details.push([lh, hl, hh]);
        }
        out.push(approx);
        for [lh, hl, hh] in details {
            out.push(lh);
            out.push(hl);
            out.push(hh);
        }
        out
    }

    #[test]
    fn symmetric_extension() {
        assert_eq!(symmetric_index(-1, 5), 0);
        assert_eq!(symmetric_index(5, 5), 4);
        assert_eq!(symmetric_index(6, 5), 3);
        assert_eq!(symmetric_index(2, 5), 2);
    }

    #[test]
    fn constant_image() {
        let c = 37.0;
        let img = Plane::new(16, 12, vec![c; 16 * 12]);
        let bands = uwt_haar3(&img).unwrap();
        for level in &bands.details {
            for plane in level {
                assert!(plane.data.iter().all(|&v| v == 0.0));
            }
        }
        // each level multiplies a constant by (√2)² = 2
        let oracle = &direct_oracle(&img)[0];
        for (&v, &o) in bands.ll3.data.iter().zip(&oracle.data) {
            assert!((v - 8.0 * c).abs() < 1e-9 && (v - o).abs() < 1e-12);
        }
    }

    #[test]
    fn level_one_diagonal_coefficient() {
        // top-left 2×2 block [[p, q], [r, s]] inside an 8×8 image
        let (p, q, r, s) = (3.0, 10.0, -4.0, 7.0);
        let mut data = vec![0.0; 64];
        data[0] = p;
        data[1] = q;
        data[8] = r;
        data[9] = s;
        let bands = uwt_haar3(&Plane::new(8, 8, data)).unwrap();
        let hh1 = bands.details[0][2].get(0, 0);
        assert!((hh1 - (p - q - r + s) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_small() {
        assert_eq!(
            uwt_haar3(&Plane::new(7, 9, vec![0.0; 63])).unwrap_err(),
            TextureError::ImageTooSmall { width: 7, height: 9 }
        );
    }

    proptest! {
        #[test]
        fn matches_direct_convolution(data in proptest::collection::vec(0.0f64..255.0, 32 * 32)) {
            let img = Plane::new(32, 32, data);
            let bands = uwt_haar3(&img).unwrap();
            let oracle = direct_oracle(&img);
            for (plane, want) in bands.planes().iter().zip(&oracle) {
                for (a, b) in plane.data.iter().zip(&want.data) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    fn full_mask(w: usize, h: usize) -> BinaryMask {
        BinaryMask::new(w, h, vec![true; w * h]).unwrap()
    }

    #[test]
    fn energies_are_quadratic() {
        let data: Vec<f64> = (0..400).map(|i| ((i * 37) % 101) as f64).collect();
        let doubled: Vec<f64> = data.iter().map(|v| 2.0 * v).collect();
        let mask = full_mask(20, 20);
        let e1 = subband_energies(&uwt_haar3(&Plane::new(20, 20, data)).unwrap(), &mask).unwrap();
        let e2 = subband_energies(&uwt_haar3(&Plane::new(20, 20, doubled)).unwrap(), &mask).unwrap();
        for (a, b) in e1.iter().zip(&e2) {
            assert!((b - 4.0 * a).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn checkerboard_peaks_in_diagonal_band() {
        let data: Vec<f64> = (0..32 * 32).map(|i| if (i % 32 + i / 32) % 2 == 0 { 0.0 } else { 255.0 }).collect();
        let e = subband_energies(&uwt_haar3(&Plane::new(32, 32, data)).unwrap(), &full_mask(32, 32)).unwrap();
        assert!(e[3] > e[1] && e[3] > e[2]);
    }

    #[test]
    fn empty_mask_is_rejected() {
        let bands = uwt_haar3(&Plane::new(8, 8, vec![1.0; 64])).unwrap();
        let mask = BinaryMask::empty(8, 8).unwrap();
        assert_eq!(subband_energies(&bands, &mask).unwrap_err(), TextureError::EmptyMask);
        let img = GrayImage::filled(8, 8, 1).unwrap();
        assert_eq!(intensity_stats(&img, &mask).unwrap_err(), TextureError::EmptyMask);
    }

    #[test]
    fn stats_of_constant() {
        let img = GrayImage::filled(5, 5, 42).unwrap();
        assert_eq!(intensity_stats(&img, &full_mask(5, 5)).unwrap(), (42.0, 0.0, 0.0));
    }

    #[test]
    fn stats_of_uniform_histogram() {
        let img = GrayImage::new(16, 16, (0..=255).collect()).unwrap();
        let (_, _, entropy) = intensity_stats(&img, &full_mask(16, 16)).unwrap();
        assert!((entropy - 8.0).abs() < 1e-12);
    }

    #[test]
    fn stats_of_two_levels() {
        let img = GrayImage::new(2, 2, vec![0, 255, 255, 0]).unwrap();
        let (mean, var, entropy) = intensity_stats(&img, &full_mask(2, 2)).unwrap();
        assert_eq!(mean, 127.5);
        assert!((var - 127.5 * 127.5).abs() < 1e-9);
        assert!((entropy - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn energies_shift_equivariant(data in proptest::collection::vec(0.0f64..255.0, 48 * 48), dx in 0usize..4, dy in 0usize..4) {
            // translate content by (dx, dy) and compare on an interior mask
            let w = 48;
            let mut shifted = vec![0.0; w * w];
            for y in 0..w {
                for x in 0..w {
                    shifted[y * w + x] = data[((y + w - dy) % w) * w + (x + w - dx) % w];
                }
            }
            let mut m0 = BinaryMask::empty(w, w).unwrap();
            let mut m1 = BinaryMask::empty(w, w).unwrap();
            for y in 12..30 {
                for x in 12..30 {
                    m0.set(x, y, true);
                    m1.set(x + dx, y + dy, true);
                }
            }
            let e0 = subband_energies(&uwt_haar3(&Plane::new(w, w, data)).unwrap(), &m0).unwrap();
            let e1 = subband_energies(&uwt_haar3(&Plane::new(w, w, shifted)).unwrap(), &m1).unwrap();
            for (a, b) in e0.iter().zip(&e1) {
                prop_assert!((a - b).abs() < 1e-6 * a.abs().max(1.0));
            }
        }

        #[test]
        fn entropy_invariant_under_relabeling(pixels in proptest::collection::vec(0u8..=255, 64)) {
            let img = GrayImage::new(8, 8, pixels.clone()).unwrap();
            let remapped = GrayImage::new(8, 8, pixels.iter().map(|&p| 255 - p).collect()).unwrap();
            let mask = full_mask(8, 8);
            let (_, v0, h0) = intensity_stats(&img, &mask).unwrap();
            let (_, v1, h1) = intensity_stats(&remapped, &mask).unwrap();
            prop_assert!((h0 - h1).abs() < 1e-12);
            prop_assert!((v0 - v1).abs() < 1e-9);
            prop_assert!((0.0..=8.0).contains(&h0));
        }
    }
}
