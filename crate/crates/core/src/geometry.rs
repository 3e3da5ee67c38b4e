//! Ellipse fitting and the eleven geometric oocyte descriptors.
//!
//! Ellipses are fitted with the direct constrained least-squares method: the
//! algebraic conic error is minimized subject to `4ac - b² = 1`, which reduces
//! to a 3×3 eigenproblem once the linear part of the conic is eliminated.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt;

use crate::imagery::{BinaryMask, ClassLabel, LabelMask};
use crate::morphology::{self, boundary_pixels, connected_components, fill_holes, keep_largest, Roi};

/// Polar-body components below this many pixels are ignored.
pub const POLAR_BODY_MIN_AREA: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    InsufficientPoints {
        got: usize,
    },
    /// Scatter matrix singular or no elliptic solution.
    DegenerateConfiguration,
    NonpositiveArea,
    MissingCytoplasm,
    MissingZona,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::InsufficientPoints { got } => {
                write!(f, "ellipse fit needs at least 6 points, got {got}")
            }
            GeometryError::DegenerateConfiguration => write!(f, "points do not determine an ellipse"),
            GeometryError::NonpositiveArea => write!(f, "area must be positive"),
            GeometryError::MissingCytoplasm => write!(f, "no cytoplasm in region"),
            GeometryError::MissingZona => write!(f, "no zona pellucida in region"),
        }
    }
}

impl core::error::Error for GeometryError {}

/// Ellipse in center/semi-axes/rotation form with `a >= b > 0` and
/// `theta ∈ [0, π)` measured from the x axis to the major axis.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

impl Ellipse {
    /// Builds an ellipse, swapping the axes if needed so that `a >= b`.
    pub fn new(cx: f64, cy: f64, a: f64, b: f64, theta: f64) -> Self {
        let (a, b, theta) = if a >= b { (a, b, theta) } else { (b, a, theta + FRAC_PI_2) };
        Self { cx, cy, a, b, theta: wrap_angle(theta) }
    }

    pub fn circle(cx: f64, cy: f64, r: f64) -> Self {
        Self::new(cx, cy, r, r, 0.0)
    }

    /// Whether `(x, y)` lies inside or on the ellipse.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = libm::sincos(self.theta);
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.a) * (u / self.a) + (v / self.b) * (v / self.b) <= 1.0
    }

    /// Point on the ellipse at parametric angle `t`.
    pub fn point_at(&self, t: f64) -> (f64, f64) {
        let (s, c) = libm::sincos(self.theta);
        let (st, ct) = libm::sincos(t);
        let (u, v) = (self.a * ct, self.b * st);
        (self.cx + u * c - v * s, self.cy + u * s + v * c)
    }

    pub fn area(&self) -> f64 {
        PI * self.a * self.b
    }

    /// `(min_x, min_y, max_x, max_y)` of the ellipse.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let (s, c) = libm::sincos(self.theta);
        let hx = libm::hypot(self.a * c, self.b * s);
        let hy = libm::hypot(self.a * s, self.b * c);
        (self.cx - hx, self.cy - hy, self.cx + hx, self.cy + hy)
    }
}

fn wrap_angle(theta: f64) -> f64 {
    let t = theta % PI;
    let t = if t < 0.0 { t + PI } else { t };
    if t >= PI {
        0.0
    } else {
        t
    }
}

/// The eleven geometric descriptors, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeometricFeatures {
    pub mu_c: f64,
    pub e_c: f64,
    pub gamma_c: f64,
    pub mu_z: f64,
    pub e_z: f64,
    pub gamma_z: f64,
    pub m: f64,
    pub r: f64,
    pub n_pb: f64,
    pub s_pb: f64,
    pub s_cc: f64,
}

impl GeometricFeatures {
    pub fn to_array(&self) -> [f64; 11] {
        [
            self.mu_c,
            self.e_c,
            self.gamma_c,
            self.mu_z,
            self.e_z,
            self.gamma_z,
            self.m,
            self.r,
            self.n_pb,
            self.s_pb,
            self.s_cc,
        ]
    }
}

type Mat3 = [[f64; 3]; 3];

fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inverse3(m: &Mat3) -> Option<Mat3> {
    let det = det3(m);
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 || det.abs() <= 1e-14 * scale * scale * scale {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            *cell = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    Some(inv)
}

fn mul3(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose3(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

/// Real roots of a 3×3 matrix's characteristic polynomial. The reduced
/// ellipse problem is similar to a symmetric-definite pencil, so all three
/// roots are real; a tiny negative discriminant from rounding is clamped.
fn real_eigenvalues(m: &Mat3) -> [f64; 3] {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0] + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = det3(m);
    // λ³ - tr λ² + minors λ - det = 0; shift λ = t + tr/3
    let shift = tr / 3.0;
    let p = minors - tr * tr / 3.0;
    let q = -2.0 * tr * tr * tr / 27.0 + tr * minors / 3.0 - det;
    // t³ + p t + q = 0
    if p >= 0.0 {
        let t = libm::cbrt(-q);
        return [t + shift; 3];
    }
    let r = libm::sqrt(-p / 3.0);
    let arg = (3.0 * q / (2.0 * p * r)).clamp(-1.0, 1.0);
    let phi = libm::acos(arg) / 3.0;
    core::array::from_fn(|k| 2.0 * r * libm::cos(phi - 2.0 * PI * k as f64 / 3.0) + shift)
}

fn cross(u: &[f64; 3], v: &[f64; 3]) -> [f64; 3] {
    [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
}

fn norm(v: &[f64; 3]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Null vector of `m - λI` taken as the largest cross product of its rows.
fn eigenvector(m: &Mat3, lambda: f64) -> Option<[f64; 3]> {
    let mut shifted = *m;
    for (i, row) in shifted.iter_mut().enumerate() {
        row[i] -= lambda;
    }
    let candidates =
        [cross(&shifted[0], &shifted[1]), cross(&shifted[0], &shifted[2]), cross(&shifted[1], &shifted[2])];
    let best = candidates.iter().max_by(|a, b| norm(a).total_cmp(&norm(b)))?;
    let n = norm(best);
    (n > 0.0).then(|| [best[0] / n, best[1] / n, best[2] / n])
}

/// Conic `A x² + B xy + C y² + D x + E y + F = 0` to geometric form.
fn conic_to_ellipse(coef: &[f64; 6]) -> Option<Ellipse> {
    let [a, b, c, d, e, f] = *coef;
    let den = b * b - 4.0 * a * c;
    if den >= 0.0 {
        return None;
    }
    let x0 = (2.0 * c * d - b * e) / den;
    let y0 = (2.0 * a * e - b * d) / den;
    let f0 = a * x0 * x0 + b * x0 * y0 + c * y0 * y0 + d * x0 + e * y0 + f;
    let theta = 0.5 * libm::atan2(b, a - c);
    let (s, co) = libm::sincos(theta);
    let l1 = a * co * co + b * s * co + c * s * s;
    let l2 = a * s * s - b * s * co + c * co * co;
    let ax1 = -f0 / l1;
    let ax2 = -f0 / l2;
    if !(ax1 > 0.0 && ax2 > 0.0) {
        return None;
    }
    Some(Ellipse::new(x0, y0, libm::sqrt(ax1), libm::sqrt(ax2), theta))
}

/// Direct least-squares ellipse fit to a point cloud.
pub fn fit_ellipse(points: &[(f64, f64)]) -> Result<Ellipse, GeometryError> {
    let n = points.len();
    if n < 6 {
        return Err(GeometryError::InsufficientPoints { got: n });
    }
    // center and scale for conditioning; undone on the geometric parameters
    let (mx, my) = points.iter().fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x, sy + y));
    let (mx, my) = (mx / n as f64, my / n as f64);
    let spread = points.iter().map(|&(x, y)| (x - mx) * (x - mx) + (y - my) * (y - my)).sum::<f64>() / n as f64;
    if spread <= 0.0 {
        return Err(GeometryError::DegenerateConfiguration);
    }
    let scale = libm::sqrt(spread / 2.0);

    let mut s1 = [[0.0; 3]; 3];
    let mut s2 = [[0.0; 3]; 3];
    let mut s3 = [[0.0; 3]; 3];
    for &(x, y) in points {
        let (x, y) = ((x - mx) / scale, (y - my) / scale);
        let quad = [x * x, x * y, y * y];
        let lin = [x, y, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                s1[i][j] += quad[i] * quad[j];
                s2[i][j] += quad[i] * lin[j];
                s3[i][j] += lin[i] * lin[j];
            }
        }
    }
    let s3_inv = inverse3(&s3).ok_or(GeometryError::DegenerateConfiguration)?;
    // linear part as a function of the quadratic part: lin = t * quad
    let mut t = mul3(&s3_inv, &transpose3(&s2));
    for row in t.iter_mut() {
        for v in row.iter_mut() {
            *v = -*v;
        }
    }
    let reduced = {
        let mut m = mul3(&s2, &t);
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += s1[i][j];
            }
        }
        m
    };
    // premultiply by the inverse of the constraint matrix [[0,0,2],[0,-1,0],[2,0,0]]
    let system = [
        [reduced[2][0] / 2.0, reduced[2][1] / 2.0, reduced[2][2] / 2.0],
        [-reduced[1][0], -reduced[1][1], -reduced[1][2]],
        [reduced[0][0] / 2.0, reduced[0][1] / 2.0, reduced[0][2] / 2.0],
    ];

    let mut best: Option<([f64; 3], f64)> = None;
    for lambda in real_eigenvalues(&system) {
        let Some(v) = eigenvector(&system, lambda) else { continue };
        let constraint = 4.0 * v[0] * v[2] - v[1] * v[1];
        if constraint > 0.0 && best.is_none_or(|(_, c)| constraint > c) {
            best = Some((v, constraint));
        }
    }
    let (quad, _) = best.ok_or(GeometryError::DegenerateConfiguration)?;
    let lin: [f64; 3] = core::array::from_fn(|i| (0..3).map(|k| t[i][k] * quad[k]).sum());
    let coef = [quad[0], quad[1], quad[2], lin[0], lin[1], lin[2]];
    let unit = conic_to_ellipse(&coef).ok_or(GeometryError::DegenerateConfiguration)?;
    Ok(Ellipse {
        cx: unit.cx * scale + mx,
        cy: unit.cy * scale + my,
        a: unit.a * scale,
        b: unit.b * scale,
        theta: unit.theta,
    })
}

/// Mean axis, eccentricity and compactness of an ellipse against the region
/// area `area` it was fitted to.
pub fn ellipse_features(ell: &Ellipse, area: f64) -> Result<(f64, f64, f64), GeometryError> {
    if area <= 0.0 || area.is_nan() {
        return Err(GeometryError::NonpositiveArea);
    }
    let (a, b) = if ell.a >= ell.b { (ell.a, ell.b) } else { (ell.b, ell.a) };
    let mu = (a + b) / 2.0;
    let e = libm::sqrt((1.0 - (b * b) / (a * a)).max(0.0));
    let gamma = a * b * PI / area;
    Ok((mu, e, gamma))
}

pub fn misalignment(c_c: (f64, f64), c_z: (f64, f64)) -> f64 {
    libm::hypot(c_c.0 - c_z.0, c_c.1 - c_z.1)
}

pub fn area_ratio(s_c: f64, s_z: f64) -> Result<f64, GeometryError> {
    if s_z <= 0.0 || s_z.is_nan() {
        return Err(GeometryError::NonpositiveArea);
    }
    Ok(s_c / s_z)
}

/// Count and total area of polar-body components of at least `min_area`
/// pixels.
pub fn polar_body_features(mask: &LabelMask, min_area: usize) -> (usize, usize) {
    let comps = morphology::suppress_small(connected_components(&mask.to_binary(ClassLabel::PolarBody)), min_area);
    (comps.len(), comps.iter().map(|c| c.area()).sum())
}

pub fn cumulus_area(mask: &LabelMask) -> usize {
    mask.count(ClassLabel::CumulusCells)
}

fn as_points(pixels: &[(usize, usize)]) -> Vec<(f64, f64)> {
    pixels.iter().map(|&(x, y)| (x as f64, y as f64)).collect()
}

/// Fitted ellipses and areas behind the geometric features of one ROI.
#[derive(Debug, Clone, PartialEq)]
pub struct OocyteShape {
    pub cytoplasm: Ellipse,
    pub zona: Ellipse,
    /// Pixel area of the largest cytoplasm component.
    pub cytoplasm_area: usize,
    /// Pixel area of the hole-filled zona outline, cytoplasm included.
    pub zona_area: usize,
}

/// Keeps the largest cytoplasm and zona components and fits the cytoplasm
/// ellipse and the outer zona ellipse.
pub fn fit_oocyte(mask: &LabelMask) -> Result<OocyteShape, GeometryError> {
    let cyto_parts = connected_components(&mask.to_binary(ClassLabel::Cytoplasm));
    let cyto = keep_largest(&cyto_parts).map_err(|_| GeometryError::MissingCytoplasm)?;
    let zona_parts = connected_components(&mask.to_binary(ClassLabel::ZonaPellucida));
    let zona = keep_largest(&zona_parts).map_err(|_| GeometryError::MissingZona)?;

    let cytoplasm = fit_ellipse(&as_points(&boundary_pixels(cyto)))?;

    let outline: BinaryMask = fill_holes(&cyto.to_mask().union(&zona.to_mask()));
    let outline_parts = connected_components(&outline);
    let outer = keep_largest(&outline_parts).map_err(|_| GeometryError::MissingZona)?;
    let zona_ellipse = fit_ellipse(&as_points(&boundary_pixels(outer)))?;

    Ok(OocyteShape { cytoplasm, zona: zona_ellipse, cytoplasm_area: cyto.area(), zona_area: outer.area() })
}

/// All eleven geometric features of the oocyte in `roi`.
pub fn compute_geometry(roi: &Roi) -> Result<GeometricFeatures, GeometryError> {
    compute_geometry_with(roi, POLAR_BODY_MIN_AREA)
}

/// [`compute_geometry`] with a custom polar-body area threshold.
pub fn compute_geometry_with(roi: &Roi, polar_body_min_area: usize) -> Result<GeometricFeatures, GeometryError> {
    let shape = fit_oocyte(&roi.mask)?;
    let (mu_c, e_c, gamma_c) = ellipse_features(&shape.cytoplasm, shape.cytoplasm_area as f64)?;
    let (mu_z, e_z, gamma_z) = ellipse_features(&shape.zona, shape.zona_area as f64)?;
    let m = misalignment((shape.cytoplasm.cx, shape.cytoplasm.cy), (shape.zona.cx, shape.zona.cy));
    let r = area_ratio(shape.cytoplasm_area as f64, shape.zona_area as f64)?;
    let (n_pb, s_pb) = polar_body_features(&roi.mask, polar_body_min_area);
    Ok(GeometricFeatures {
        mu_c,
        e_c,
        gamma_c,
        mu_z,
        e_z,
        gamma_z,
        m,
        r,
        n_pb: n_pb as f64,
        s_pb: s_pb as f64,
        s_cc: cumulus_area(&roi.mask) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn sample(ell: &Ellipse, n: usize) -> Vec<(f64, f64)> {
        (0..n).map(|i| ell.point_at(2.0 * PI * i as f64 / n as f64)).collect()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn recovers_circle() {
        let fit = fit_ellipse(&sample(&Ellipse::circle(50.0, 40.0, 30.0), 360)).unwrap();
        assert!((fit.cx - 50.0).abs() < 1e-6);
        assert!((fit.cy - 40.0).abs() < 1e-6);
        assert!((fit.a - 30.0).abs() < 1e-6);
        assert!((fit.b - 30.0).abs() < 1e-6);
    }

    #[test]
    fn recovers_rotated_ellipse() {
        let truth = Ellipse::new(120.0, 80.0, 100.0, 60.0, 0.3);
        let fit = fit_ellipse(&sample(&truth, 360)).unwrap();
        assert!(rel(fit.cx, truth.cx) < 1e-4);
        assert!(rel(fit.cy, truth.cy) < 1e-4);
        assert!(rel(fit.a, truth.a) < 1e-4);
        assert!(rel(fit.b, truth.b) < 1e-4);
        assert!(rel(fit.theta, truth.theta) < 1e-4);
    }

    #[test]
    fn axes_are_ordered() {
        // major axis along y
        let fit = fit_ellipse(&sample(&Ellipse { cx: 0.0, cy: 0.0, a: 20.0, b: 50.0, theta: 0.0 }, 100)).unwrap();
        assert!(fit.a >= fit.b);
        assert!((fit.a - 50.0).abs() < 1e-6);
        assert!((fit.theta - FRAC_PI_2).abs() < 1e-6);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![(0.0, 0.0); 5];
        assert_eq!(fit_ellipse(&pts).unwrap_err(), GeometryError::InsufficientPoints { got: 5 });
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts: Vec<_> = (0..10).map(|i| (i as f64, 2.0 * i as f64)).collect();
        assert_eq!(fit_ellipse(&pts).unwrap_err(), GeometryError::DegenerateConfiguration);
    }

    #[test]
    fn feature_formulas() {
        let (mu, e, g) = ellipse_features(&Ellipse::circle(0.0, 0.0, 100.0), PI * 1e4).unwrap();
        assert!((mu - 100.0).abs() < 1e-12 && e == 0.0 && (g - 1.0).abs() < 1e-12);
        let ell = Ellipse::new(0.0, 0.0, 100.0, 60.0, 0.0);
        let (mu, e, g) = ellipse_features(&ell, 6000.0 * PI).unwrap();
        assert!((mu - 80.0).abs() < 1e-12);
        assert!((e - 0.8).abs() < 1e-12);
        assert!((g - 1.0).abs() < 1e-12);
        let (_, _, g) = ellipse_features(&ell, 3000.0 * PI).unwrap();
        assert!((g - 2.0).abs() < 1e-12);
        assert_eq!(ellipse_features(&ell, 0.0).unwrap_err(), GeometryError::NonpositiveArea);
    }

    #[test]
    fn misalignment_and_ratio() {
        assert_eq!(misalignment((1.0, 1.0), (1.0, 1.0)), 0.0);
        assert_eq!(misalignment((0.0, 0.0), (3.0, 4.0)), 5.0);
        assert_eq!(misalignment((3.0, 4.0), (0.0, 0.0)), 5.0);
        assert_eq!(area_ratio(7.0, 7.0).unwrap(), 1.0);
        assert_eq!(area_ratio(25_000.0, 50_000.0).unwrap(), 0.5);
        assert_eq!(area_ratio(1.0, 0.0).unwrap_err(), GeometryError::NonpositiveArea);
    }

    fn paint_disc(mask: &mut LabelMask, cx: f64, cy: f64, r: f64, class: ClassLabel) -> usize {
        let mut n = 0;
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                if dx * dx + dy * dy <= r * r {
                    mask.set(x, y, class);
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn polar_bodies_thresholded() {
        let mut mask = LabelMask::background(200, 200).unwrap();
        assert_eq!(polar_body_features(&mask, POLAR_BODY_MIN_AREA), (0, 0));
        let a = paint_disc(&mut mask, 30.0, 30.0, 14.0, ClassLabel::PolarBody);
        let b = paint_disc(&mut mask, 100.0, 100.0, 15.0, ClassLabel::PolarBody);
        let small = paint_disc(&mut mask, 160.0, 160.0, 11.0, ClassLabel::PolarBody);
        assert!(a >= 500 && b >= 500 && small < 500);
        assert_eq!(polar_body_features(&mask, POLAR_BODY_MIN_AREA), (2, a + b));
    }

    #[test]
    fn polar_body_just_below_threshold() {
        let mut mask = LabelMask::background(60, 60).unwrap();
        let mut painted = 0;
        'outer: for y in 0..60 {
            for x in 0..60 {
                if painted == 499 {
                    break 'outer;
                }
                mask.set(x, y, ClassLabel::PolarBody);
                painted += 1;
            }
        }
        assert_eq!(polar_body_features(&mask, POLAR_BODY_MIN_AREA), (0, 0));
    }

    #[test]
    fn cumulus_counts_pixels() {
        let mut mask = LabelMask::background(50, 50).unwrap();
        assert_eq!(cumulus_area(&mask), 0);
        for (x0, y0) in [(0, 0), (20, 20), (40, 0)] {
            for y in y0..y0 + 10 {
                for x in x0..x0 + 10 {
                    mask.set(x, y, ClassLabel::CumulusCells);
                }
            }
        }
        assert_eq!(cumulus_area(&mask), 300);
        let full = LabelMask::new(416, 416, vec![4; 416 * 416]).unwrap();
        assert_eq!(cumulus_area(&full), 173_056);
    }

    fn concentric_roi(rc: f64, rz: f64) -> Roi {
        let mut mask = LabelMask::background(416, 416).unwrap();
        paint_disc(&mut mask, 208.0, 208.0, rz, ClassLabel::ZonaPellucida);
        paint_disc(&mut mask, 208.0, 208.0, rc, ClassLabel::Cytoplasm);
        let image = crate::imagery::GrayImage::filled(416, 416, 100).unwrap();
        Roi::from_parts("t", image, mask).unwrap()
    }

    #[test]
    fn concentric_circles() {
        let f = compute_geometry(&concentric_roi(100.0, 140.0)).unwrap();
        assert!(f.m < 0.05);
        assert!(rel(f.r, (100.0f64 / 140.0).powi(2)) < 0.02);
        assert!(rel(f.mu_c, 100.0) < 0.02);
        assert!(rel(f.mu_z, 140.0) < 0.02);
        assert!((f.gamma_c - 1.0).abs() < 0.02);
        assert!((f.gamma_z - 1.0).abs() < 0.02);
        assert_eq!((f.n_pb, f.s_pb, f.s_cc), (0.0, 0.0, 0.0));
    }

    #[test]
    fn stray_cytoplasm_blob_is_ignored() {
        let clean = concentric_roi(100.0, 140.0);
        let mut noisy = clean.clone();
        for y in 5..10 {
            for x in 5..15 {
                noisy.mask.set(x, y, ClassLabel::Cytoplasm);
            }
        }
        assert_eq!(compute_geometry(&clean).unwrap(), compute_geometry(&noisy).unwrap());
    }

    #[test]
    fn missing_classes() {
        let mut roi = concentric_roi(100.0, 140.0);
        let no_cyto: Vec<u8> = roi.mask.ids().iter().map(|&v| if v == 1 { 2 } else { v }).collect();
        roi.mask = LabelMask::new(416, 416, no_cyto).unwrap();
        assert_eq!(compute_geometry(&roi).unwrap_err(), GeometryError::MissingCytoplasm);
        let only_cyto: Vec<u8> = roi.mask.ids().iter().map(|&v| if v == 2 { 1 } else { v }).collect();
        roi.mask = LabelMask::new(416, 416, only_cyto).unwrap();
        assert_eq!(compute_geometry(&roi).unwrap_err(), GeometryError::MissingZona);
    }

    proptest! {
        #[test]
        fn fit_is_translation_invariant(a in 20.0f64..150.0, ratio in 0.4f64..1.0, theta in 0.0f64..3.0,
                                        tx in -500.0f64..500.0, ty in -500.0f64..500.0) {
            let base = Ellipse::new(200.0, 150.0, a, a * ratio, theta);
            let pts = sample(&base, 90);
            let moved: Vec<_> = pts.iter().map(|&(x, y)| (x + tx, y + ty)).collect();
            let f0 = fit_ellipse(&pts).unwrap();
            let f1 = fit_ellipse(&moved).unwrap();
            prop_assert!((f1.cx - f0.cx - tx).abs() < 1e-9 * (1.0 + f0.cx.abs()));
            prop_assert!((f1.cy - f0.cy - ty).abs() < 1e-9 * (1.0 + f0.cy.abs()));
            prop_assert!((f1.a - f0.a).abs() < 1e-9 * f0.a);
            prop_assert!((f1.b - f0.b).abs() < 1e-9 * f0.a);
        }

        #[test]
        fn eccentricity_is_scale_invariant(a in 20.0f64..150.0, ratio in 0.3f64..0.95, theta in 0.0f64..3.0, k in 0.1f64..10.0) {
            let pts = sample(&Ellipse::new(10.0, -20.0, a, a * ratio, theta), 120);
            let scaled: Vec<_> = pts.iter().map(|&(x, y)| (x * k, y * k)).collect();
            let (mu0, e0, _) = ellipse_features(&fit_ellipse(&pts).unwrap(), 1.0).unwrap();
            let (mu1, e1, _) = ellipse_features(&fit_ellipse(&scaled).unwrap(), 1.0).unwrap();
            prop_assert!((e1 - e0).abs() < 1e-9);
            prop_assert!((mu1 - k * mu0).abs() < 1e-9 * k * mu0);
        }
    }
}
