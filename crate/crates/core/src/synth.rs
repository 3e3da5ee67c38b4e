//! Synthetic oocyte scenes with analytically known ground truth.
//!
//! A scene is rasterized from exact point-in-ellipse and point-in-disc tests
//! at pixel centers. Label precedence, highest first: cytoplasm, polar body,
//! zona pellucida, cumulus cells (cumulus only ever covers background).
//! Intensities are per-class constants, plus value noise inside the
//! cytoplasm, plus Gaussian noise, rounded and clamped to `0..=255`. All
//! randomness comes from ChaCha8 streams seeded by the scene seed.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::ops::Range;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{ellipse_features, Ellipse};
use crate::imagery::{ClassLabel, GrayImage, LabelMask};

pub const BACKGROUND_INTENSITY: f64 = 200.0;
pub const ZONA_INTENSITY: f64 = 150.0;
pub const POLAR_BODY_INTENSITY: f64 = 135.0;
pub const CUMULUS_INTENSITY: f64 = 175.0;

/// Cytoplasm eccentricity at or above which an oocyte is nonviable.
pub const ECCENTRICITY_LIMIT: f64 = 0.4;
/// Texture amplitude at or above which an oocyte is nonviable.
pub const GRANULARITY_LIMIT: f64 = 12.0;

/// Full-frame size of the microscope images.
pub const FRAME_WIDTH: usize = 1392;
pub const FRAME_HEIGHT: usize = 1040;

#[derive(Debug, Clone, PartialEq)]
pub enum SynthError {
    InvalidSpec { oocyte: usize, reason: &'static str },
    SpecOutOfFrame { oocyte: usize },
    EmptyFrame,
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::InvalidSpec { oocyte, reason } => write!(f, "oocyte {oocyte}: {reason}"),
            SynthError::SpecOutOfFrame { oocyte } => {
                write!(f, "oocyte {oocyte} is marked fully visible but leaves the frame")
            }
            SynthError::EmptyFrame => write!(f, "frame must be at least 1x1"),
        }
    }
}

impl core::error::Error for SynthError {}

/// Disc in frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Disc {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Disc {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.cx) * (x - self.cx) + (y - self.cy) * (y - self.cy) <= self.r * self.r
    }

    fn boundary(&self, n: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..n).map(move |i| {
            let (s, c) = libm::sincos(2.0 * PI * i as f64 / n as f64);
            (self.cx + self.r * c, self.cy + self.r * s)
        })
    }
}

/// Cytoplasm intensity model: `base + amplitude · noise(x / scale, y / scale)`
/// with lattice value noise in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CytoplasmTexture {
    pub base: f64,
    pub amplitude: f64,
    /// Lattice spacing in pixels.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OocyteSpec {
    pub cytoplasm: Ellipse,
    pub zona: Ellipse,
    pub polar_bodies: Vec<Disc>,
    pub cumulus: Vec<Disc>,
    pub texture: CytoplasmTexture,
    pub viable: bool,
    pub fully_visible: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub oocytes: Vec<OocyteSpec>,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Closed-form feature values of a specified oocyte, using continuous areas.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReferenceFeatures {
    pub mu_c: f64,
    pub e_c: f64,
    pub gamma_c: f64,
    pub mu_z: f64,
    pub e_z: f64,
    pub gamma_z: f64,
    pub m: f64,
    pub r: f64,
    pub n_pb: usize,
    pub s_pb: f64,
}

pub fn reference_features(spec: &OocyteSpec) -> ReferenceFeatures {
    let (mu_c, e_c, gamma_c) =
        ellipse_features(&spec.cytoplasm, spec.cytoplasm.area()).expect("validated ellipses have positive area");
    let (mu_z, e_z, gamma_z) =
        ellipse_features(&spec.zona, spec.zona.area()).expect("validated ellipses have positive area");
    ReferenceFeatures {
        mu_c,
        e_c,
        gamma_c,
        mu_z,
        e_z,
        gamma_z,
        m: crate::geometry::misalignment((spec.cytoplasm.cx, spec.cytoplasm.cy), (spec.zona.cx, spec.zona.cy)),
        r: spec.cytoplasm.area() / spec.zona.area(),
        n_pb: spec.polar_bodies.len(),
        s_pb: spec.polar_bodies.iter().map(|d| PI * d.r * d.r).sum(),
    }
}

/// Viable iff exactly one polar body, a round cytoplasm and a fine texture.
pub fn viability_rule(n_pb: usize, e_c: f64, amplitude: f64) -> bool {
    n_pb == 1 && e_c < ECCENTRICITY_LIMIT && amplitude < GRANULARITY_LIMIT
}

/// Ground truth for one generated oocyte.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OocyteTruth {
    /// Cytoplasm center.
    pub center: (f64, f64),
    pub viable: bool,
    pub reference: ReferenceFeatures,
    pub spec: OocyteSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: GrayImage,
    pub mask: LabelMask,
    pub truth: Vec<OocyteTruth>,
}

const CONTAINMENT_SAMPLES: usize = 720;

fn ellipse_boundary(e: &Ellipse, n: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
    (0..n).map(move |i| e.point_at(2.0 * PI * i as f64 / n as f64))
}

fn validate(index: usize, o: &OocyteSpec, width: usize, height: usize) -> Result<(), SynthError> {
    let invalid = |reason| Err(SynthError::InvalidSpec { oocyte: index, reason });
    for e in [&o.cytoplasm, &o.zona] {
        if !(e.b > 0.0 && e.a >= e.b && e.a.is_finite()) {
            return invalid("semi-axes must satisfy a >= b > 0");
        }
    }
    let shrunk = Ellipse { a: o.zona.a * (1.0 - 1e-9), b: o.zona.b * (1.0 - 1e-9), ..o.zona };
    if !ellipse_boundary(&o.cytoplasm, CONTAINMENT_SAMPLES).all(|(x, y)| shrunk.contains(x, y)) {
        return invalid("cytoplasm must lie strictly inside the zona");
    }
    if o.polar_bodies.iter().chain(&o.cumulus).any(|d| d.r.is_nan() || d.r <= 0.0) {
        return invalid("disc radii must be positive");
    }
    if o.fully_visible {
        let mut extents = vec![o.zona.bounding_box()];
        extents
            .extend(o.polar_bodies.iter().chain(&o.cumulus).map(|d| (d.cx - d.r, d.cy - d.r, d.cx + d.r, d.cy + d.r)));
        let outside = extents
            .iter()
            .any(|&(x0, y0, x1, y1)| x0 < 0.0 || y0 < 0.0 || x1 > (width - 1) as f64 || y1 > (height - 1) as f64);
        if outside {
            return Err(SynthError::SpecOutOfFrame { oocyte: index });
        }
    }
    Ok(())
}

/// Integer pixel window covering a bounding box, clipped to the frame.
fn pixel_window(bbox: (f64, f64, f64, f64), width: usize, height: usize) -> (Range<usize>, Range<usize>) {
    let clip = |v: f64, hi: usize| v.max(0.0).min(hi as f64) as usize;
    let xs = clip(libm::floor(bbox.0), width)..clip(libm::ceil(bbox.2) + 1.0, width);
    let ys = clip(libm::floor(bbox.1), height)..clip(libm::ceil(bbox.3) + 1.0, height);
    (xs, ys)
}

fn disc_bbox(d: &Disc) -> (f64, f64, f64, f64) {
    (d.cx - d.r, d.cy - d.r, d.cx + d.r, d.cy + d.r)
}

/// Bilinearly interpolated lattice noise in `[-1, 1]`.
struct ValueNoise {
    lattice: Vec<f64>,
    cols: usize,
    origin: (f64, f64),
    scale: f64,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, bbox: (f64, f64, f64, f64), scale: f64) -> Self {
        let scale = scale.max(1e-6);
        let cols = libm::ceil((bbox.2 - bbox.0) / scale) as usize + 3;
        let rows = libm::ceil((bbox.3 - bbox.1) / scale) as usize + 3;
        let lattice = (0..cols * rows).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self { lattice, cols, origin: (libm::floor(bbox.0), libm::floor(bbox.1)), scale }
    }

    fn sample(&self, x: f64, y: f64) -> f64 {
        let u = (x - self.origin.0) / self.scale;
        let v = (y - self.origin.1) / self.scale;
        let (i, j) = (libm::floor(u) as usize, libm::floor(v) as usize);
        let (fu, fv) = (u - i as f64, v - j as f64);
        let at = |i: usize, j: usize| self.lattice[j * self.cols + i];
        let top = at(i, j) * (1.0 - fu) + at(i + 1, j) * fu;
        let bottom = at(i, j + 1) * (1.0 - fu) + at(i + 1, j + 1) * fu;
        top * (1.0 - fv) + bottom * fv
    }
}

/// Renders a scene. Deterministic in the spec, seed included.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SynthError> {
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 {
        return Err(SynthError::EmptyFrame);
    }
    for (i, o) in spec.oocytes.iter().enumerate() {
        validate(i, o, w, h)?;
    }
    let mut labels = vec![ClassLabel::Background.id(); w * h];
    let mut intensity = vec![BACKGROUND_INTENSITY; w * h];

    for (index, o) in spec.oocytes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(1 + index as u64);
        let noise = ValueNoise::new(&mut rng, o.cytoplasm.bounding_box(), o.texture.scale);
        let (xs, ys) = pixel_window(o.zona.bounding_box(), w, h);
        for y in ys {
            for x in xs.clone() {
                let (px, py) = (x as f64, y as f64);
                if !o.zona.contains(px, py) {
                    continue;
                }
                let idx = y * w + x;
                if o.cytoplasm.contains(px, py) {
                    labels[idx] = ClassLabel::Cytoplasm.id();
                    intensity[idx] = o.texture.base + o.texture.amplitude * noise.sample(px, py);
                } else if o.polar_bodies.iter().any(|d| d.contains(px, py)) {
                    labels[idx] = ClassLabel::PolarBody.id();
                    intensity[idx] = POLAR_BODY_INTENSITY;
                } else {
                    labels[idx] = ClassLabel::ZonaPellucida.id();
                    intensity[idx] = ZONA_INTENSITY;
                }
            }
        }
    }
    for o in &spec.oocytes {
        for d in &o.cumulus {
            let (xs, ys) = pixel_window(disc_bbox(d), w, h);
            for y in ys {
                for x in xs.clone() {
                    let idx = y * w + x;
                    if labels[idx] == ClassLabel::Background.id() && d.contains(x as f64, y as f64) {
                        labels[idx] = ClassLabel::CumulusCells.id();
                        intensity[idx] = CUMULUS_INTENSITY;
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pixels = if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|_| SynthError::InvalidSpec { oocyte: 0, reason: "noise sigma must be finite" })?;
        intensity.iter().map(|&v| quantize(v + normal.sample(&mut rng))).collect()
    } else {
        intensity.iter().map(|&v| quantize(v)).collect()
    };

    let truth = spec
        .oocytes
        .iter()
        .map(|o| OocyteTruth {
            center: (o.cytoplasm.cx, o.cytoplasm.cy),
            viable: o.viable,
            reference: reference_features(o),
            spec: o.clone(),
        })
        .collect();
    Ok(Scene {
        image: GrayImage::new(w, h, pixels).expect("dimensions checked"),
        mask: LabelMask::new(w, h, labels).expect("only known labels written"),
        truth,
    })
}

fn quantize(v: f64) -> u8 {
    libm::round(v).clamp(0.0, 255.0) as u8
}

/// Sampling ranges for random oocytes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OocytePrior {
    /// Cytoplasm semi-major axis.
    pub semi_major: Range<f64>,
    /// Cytoplasm eccentricity for round (viable-looking) oocytes.
    pub round_eccentricity: Range<f64>,
    /// Cytoplasm eccentricity for elongated oocytes.
    pub elongated_eccentricity: Range<f64>,
    /// Zona axes exceed the cytoplasm axes by this much.
    pub zona_thickness: Range<f64>,
    pub zona_eccentricity: Range<f64>,
    pub misalignment: Range<f64>,
    pub polar_body_radius: Range<f64>,
    pub base_intensity: Range<f64>,
    pub fine_amplitude: Range<f64>,
    pub coarse_amplitude: Range<f64>,
    pub texture_scale: f64,
    /// Probability that an oocyte carries a cumulus patch.
    pub cumulus_probability: f64,
    pub cumulus_radius: Range<f64>,
}

impl Default for OocytePrior {
    fn default() -> Self {
        Self {
            semi_major: 80.0..105.0,
            round_eccentricity: 0.0..0.3,
            elongated_eccentricity: 0.5..0.65,
            zona_thickness: 38.0..44.0,
            zona_eccentricity: 0.0..0.3,
            misalignment: 0.0..4.0,
            polar_body_radius: 13.5..15.5,
            base_intensity: 100.0..120.0,
            fine_amplitude: 0.0..6.0,
            coarse_amplitude: 24.0..36.0,
            texture_scale: 2.0,
            cumulus_probability: 0.3,
            cumulus_radius: 12.0..22.0,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: &Range<f64>) -> f64 {
    if r.end > r.start {
        rng.random_range(r.clone())
    } else {
        r.start
    }
}

fn axes_from(a: f64, e: f64) -> (f64, f64) {
    (a, a * libm::sqrt(1.0 - e * e))
}

/// Cytoplasm and zona ellipses: zona centered at `center`, cytoplasm offset
/// by `m` in a random direction, zona axes grown by `thickness`.
pub fn sample_shape(
    rng: &mut ChaCha8Rng,
    center: (f64, f64),
    semi_major: f64,
    eccentricity: f64,
    thickness: f64,
    misalignment: f64,
) -> (Ellipse, Ellipse) {
    let theta = rng.random_range(0.0..PI);
    let phi = rng.random_range(0.0..2.0 * PI);
    let (a, b) = axes_from(semi_major, eccentricity);
    let (s, c) = libm::sincos(phi);
    let zona = Ellipse::new(center.0, center.1, a + thickness, b + thickness, theta);
    let cyto = Ellipse::new(center.0 + misalignment * c, center.1 + misalignment * s, a, b, theta);
    (cyto, zona)
}

/// Which viability criterion a nonviable oocyte fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Defect {
    NoPolarBody,
    TwoPolarBodies,
    Elongated,
    Granular,
}

impl Defect {
    pub const ALL: [Defect; 4] = [Defect::NoPolarBody, Defect::TwoPolarBodies, Defect::Elongated, Defect::Granular];
}

/// Places polar bodies in the zona annulus, on the cytoplasm's minor axis.
fn place_polar_bodies(
    rng: &mut ChaCha8Rng,
    cyto: &Ellipse,
    zona: &Ellipse,
    count: usize,
    radius: &Range<f64>,
) -> Option<Vec<Disc>> {
    let start = if rng.random_bool(0.5) { PI / 2.0 } else { 3.0 * PI / 2.0 };
    let mut discs = Vec::new();
    for k in 0..count {
        let t = start + PI * k as f64 + rng.random_range(-0.15..0.15);
        let (bx, by) = cyto.point_at(t);
        let (dx, dy) = (bx - cyto.cx, by - cyto.cy);
        let len = libm::hypot(dx, dy);
        let (ux, uy) = (dx / len, dy / len);
        // distance from the cytoplasm rim to the zona rim along this ray
        let mut gap = 0.0;
        while zona.contains(bx + ux * (gap + 0.25), by + uy * (gap + 0.25)) {
            gap += 0.25;
        }
        let r = uniform(rng, radius).min(gap / 2.0 - 2.0);
        if r < 12.7 {
            return None;
        }
        let disc = Disc { cx: bx + ux * gap / 2.0, cy: by + uy * gap / 2.0, r };
        let shrunk = Ellipse { a: zona.a - 1.5, b: zona.b - 1.5, ..*zona };
        let grown = Ellipse { a: cyto.a + 1.5, b: cyto.b + 1.5, ..*cyto };
        let fits = disc.boundary(90).all(|(x, y)| shrunk.contains(x, y) && !grown.contains(x, y));
        if !fits {
            return None;
        }
        discs.push(disc);
    }
    Some(discs)
}

fn place_cumulus(rng: &mut ChaCha8Rng, zona: &Ellipse, radius: &Range<f64>) -> Disc {
    let t = rng.random_range(0.0..2.0 * PI);
    let (bx, by) = zona.point_at(t);
    let (dx, dy) = (bx - zona.cx, by - zona.cy);
    let len = libm::hypot(dx, dy);
    let r = uniform(rng, radius);
    Disc { cx: bx + dx / len * r * 0.5, cy: by + dy / len * r * 0.5, r }
}

/// Draws one oocyte around `center`. Viable oocytes satisfy every criterion
/// of [`viability_rule`]; nonviable ones fail exactly the one named by
/// `defect`. The returned spec's `viable` flag is the rule's verdict.
pub fn sample_oocyte(
    rng: &mut ChaCha8Rng,
    center: (f64, f64),
    prior: &OocytePrior,
    defect: Option<Defect>,
) -> OocyteSpec {
    loop {
        let e = match defect {
            Some(Defect::Elongated) => uniform(rng, &prior.elongated_eccentricity),
            _ => uniform(rng, &prior.round_eccentricity),
        };
        let amplitude = match defect {
            Some(Defect::Granular) => uniform(rng, &prior.coarse_amplitude),
            _ => uniform(rng, &prior.fine_amplitude),
        };
        let n_pb = match defect {
            Some(Defect::NoPolarBody) => 0,
            Some(Defect::TwoPolarBodies) => 2,
            _ => 1,
        };
        let a = uniform(rng, &prior.semi_major);
        let thickness = uniform(rng, &prior.zona_thickness);
        let m = uniform(rng, &prior.misalignment);
        let (cyto, mut zona) = sample_shape(rng, center, a, e, thickness, m);
        // zona roundness is independent of the cytoplasm's
        // zona is never more elongated than the sampled bound, and only grows
        let ez = uniform(rng, &prior.zona_eccentricity);
        let zb = (zona.a * libm::sqrt(1.0 - ez * ez)).max(zona.b);
        zona = Ellipse::new(zona.cx, zona.cy, zona.a, zb, zona.theta);
        let Some(polar_bodies) = place_polar_bodies(rng, &cyto, &zona, n_pb, &prior.polar_body_radius) else {
            continue;
        };
        let cumulus = if rng.random_bool(prior.cumulus_probability.clamp(0.0, 1.0)) {
            vec![place_cumulus(rng, &zona, &prior.cumulus_radius)]
        } else {
            Vec::new()
        };
        let spec = OocyteSpec {
            cytoplasm: cyto,
            zona,
            polar_bodies,
            cumulus,
            texture: CytoplasmTexture {
                base: uniform(rng, &prior.base_intensity),
                amplitude,
                scale: prior.texture_scale,
            },
            viable: viability_rule(n_pb, e, amplitude),
            fully_visible: true,
        };
        let shape_only = OocyteSpec { fully_visible: false, ..spec.clone() };
        if validate(0, &shape_only, 1, 1).is_ok() {
            return spec;
        }
    }
}

/// Cell centers of the layout grid used for `n` oocytes in a frame.
fn grid_cells(n: usize, width: usize, height: usize) -> Vec<(f64, f64)> {
    let (cols, rows) = if n <= 4 { (2, 2) } else { (4, 2) };
    let (cw, ch) = (width as f64 / cols as f64, height as f64 / rows as f64);
    let mut cells = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            cells.push(((c as f64 + 0.5) * cw, (r as f64 + 0.5) * ch));
        }
    }
    cells
}

/// Full-frame scene with `viable.len()` non-overlapping oocytes laid out on a
/// jittered grid; `viable[i]` picks whether oocyte `i` is drawn viable, and
/// nonviable ones get a random defect. At most 8 oocytes fit.
pub fn random_frame(seed: u64, viable: &[bool], prior: &OocytePrior, noise_sigma: f64) -> SceneSpec {
    assert!(viable.len() <= 8, "layout holds at most 8 oocytes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = grid_cells(viable.len(), FRAME_WIDTH, FRAME_HEIGHT);
    cells.shuffle(&mut rng);
    let oocytes = viable
        .iter()
        .zip(cells)
        .map(|(&v, (cx, cy))| {
            let center = (cx + rng.random_range(-15.0..15.0), cy + rng.random_range(-15.0..15.0));
            let defect = (!v).then(|| *Defect::ALL.choose(&mut rng).expect("non-empty"));
            sample_oocyte(&mut rng, center, prior, defect)
        })
        .collect();
    SceneSpec { width: FRAME_WIDTH, height: FRAME_HEIGHT, oocytes, noise_sigma, seed: rng.next_u64() }
}

/// Frames holding `total` oocytes, alternately viable and nonviable, with
/// `per_frame` oocytes per frame (the last frame takes the remainder).
pub fn labeled_dataset(
    seed: u64,
    total: usize,
    per_frame: usize,
    prior: &OocytePrior,
    noise_sigma: f64,
) -> Vec<SceneSpec> {
    assert!((1..=8).contains(&per_frame));
    let counts: Vec<usize> = (0..total).step_by(per_frame).map(|i| per_frame.min(total - i)).collect();
    dataset_with_counts(seed, &counts, prior, noise_sigma)
}

/// One frame per entry of `counts`, holding that many oocytes. Viability
/// alternates over the whole dataset and is shuffled within each frame.
pub fn dataset_with_counts(seed: u64, counts: &[usize], prior: &OocytePrior, noise_sigma: f64) -> Vec<SceneSpec> {
    let mut next = 0usize;
    counts
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let mut frame_rng = ChaCha8Rng::seed_from_u64(seed);
            frame_rng.set_stream(k as u64);
            let mut flags: Vec<bool> = (next..next + n).map(|i| i % 2 == 0).collect();
            next += n;
            flags.shuffle(&mut frame_rng);
            random_frame(frame_rng.next_u64(), &flags, prior, noise_sigma)
        })
        .collect()
}
