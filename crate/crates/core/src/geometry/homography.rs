//! Ground-plane to image homography and the pixel/metric grounding built on it.
//!
//! `Homography` maps world (ground-plane) points to image pixels: `x_img ~ H x_world`.
//! Pixel points are brought back to the plane through the inverse, and local
//! metric lengths use the Jacobian of that inverse.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::point::{PixelPoint, Point2};
use crate::error::GeometryError;

const DET_EPS: f64 = 1e-9;
const W_EPS: f64 = 1e-12;

/// Projective map from the ground plane to the image, normalized so that
/// `m[2][2] == 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HomographyRepr", into = "HomographyRepr")]
pub struct Homography {
    m: Matrix3<f64>,
    inv: Matrix3<f64>,
}

#[derive(Serialize, Deserialize)]
struct HomographyRepr {
    m: [[f64; 3]; 3],
}

impl TryFrom<HomographyRepr> for Homography {
    type Error = GeometryError;

    fn try_from(r: HomographyRepr) -> Result<Self, Self::Error> {
        Homography::from_rows(r.m)
    }
}

impl From<Homography> for HomographyRepr {
    fn from(h: Homography) -> Self {
        HomographyRepr { m: h.rows() }
    }
}

impl Homography {
    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
            inv: Matrix3::identity(),
        }
    }

    /// Build from a row-major matrix. The matrix is rescaled so `m[2][2] = 1`.
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        let m = Matrix3::from_fn(|r, c| rows[r][c]);
        Self::from_matrix(m)
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::SingularHomography);
        }
        let s = m[(2, 2)];
        if s.abs() < W_EPS {
            return Err(GeometryError::SingularHomography);
        }
        let m = m / s;
        if m.determinant().abs() <= DET_EPS {
            return Err(GeometryError::SingularHomography);
        }
        let inv = m.try_inverse().ok_or(GeometryError::SingularHomography)?;
        Ok(Self { m, inv })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.m;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    /// Project a ground-plane point into the image.
    pub fn world_to_pixel(&self, p: Point2) -> Result<PixelPoint, GeometryError> {
        let q = self.m * Vector3::new(p.x, p.y, 1.0);
        if q.z.abs() < W_EPS {
            return Err(GeometryError::PointAtInfinity);
        }
        Ok(PixelPoint::new(q.x / q.z, q.y / q.z))
    }

    /// Back-project a pixel onto the ground plane.
    pub fn pixel_to_world(&self, p: PixelPoint) -> Result<Point2, GeometryError> {
        let q = self.inv * Vector3::new(p.u, p.v, 1.0);
        if q.z.abs() < W_EPS {
            return Err(GeometryError::PointAtInfinity);
        }
        Ok(Point2::new(q.x / q.z, q.y / q.z))
    }

    /// Metric length of a small image displacement `du` at pixel `p`,
    /// `|J_{H^-1}(p) du|`.
    pub fn world_length(&self, p: PixelPoint, du: [f64; 2]) -> Result<f64, GeometryError> {
        let h = &self.inv;
        let q = h * Vector3::new(p.u, p.v, 1.0);
        if q.z.abs() < W_EPS {
            return Err(GeometryError::PointAtInfinity);
        }
        let w2 = q.z * q.z;
        let j = |i: usize, k: usize| (h[(i, k)] * q.z - q[i] * h[(2, k)]) / w2;
        let dx = j(0, 0) * du[0] + j(0, 1) * du[1];
        let dy = j(1, 0) * du[0] + j(1, 1) * du[1];
        Ok(dx.hypot(dy))
    }
}

/// Result of a least-squares homography fit.
#[derive(Debug, Clone)]
pub struct HomographyFit {
    pub homography: Homography,
    /// Root-mean-square reprojection error in pixels.
    pub rms_px: f64,
}

/// Hartley normalization: translate to the centroid and scale so the mean
/// distance from it is sqrt(2).
fn normalizing_transform(pts: &[Point2]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_d = pts
        .iter()
        .map(|p| (p.x - cx).hypot(p.y - cy))
        .sum::<f64>()
        / n;
    let s = if mean_d > 0.0 {
        std::f64::consts::SQRT_2 / mean_d
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn apply(t: &Matrix3<f64>, p: Point2) -> Point2 {
    let q = t * Vector3::new(p.x, p.y, 1.0);
    Point2::new(q.x / q.z, q.y / q.z)
}

fn check_configuration(image: &[Point2]) -> Result<(), GeometryError> {
    let (lo, hi) = super::point::bounds(image);
    let scale = (hi.x - lo.x).max(hi.y - lo.y).max(1e-300);
    let dup_tol = 1e-9 * scale;
    let area_tol = 1e-9 * scale * scale;
    for i in 0..image.len() {
        for j in (i + 1)..image.len() {
            if image[i].distance(image[j]) <= dup_tol {
                return Err(GeometryError::DegenerateConfiguration(format!(
                    "duplicate image points {i} and {j}"
                )));
            }
        }
    }
    let collinear = |i: usize, j: usize, k: usize| {
        image[j].sub(image[i]).cross(image[k].sub(image[i])).abs() <= area_tol
    };
    if image.len() == 4 {
        for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
            if collinear(i, j, k) {
                return Err(GeometryError::DegenerateConfiguration(format!(
                    "image points {i}, {j}, {k} are collinear"
                )));
            }
        }
    } else {
        // With more than four points collinear triples are fine (grids), as
        // long as the set as a whole spans the plane.
        let spans = (2..image.len()).any(|k| !collinear(0, 1, k));
        if !spans {
            return Err(GeometryError::DegenerateConfiguration(
                "all image points are collinear".into(),
            ));
        }
    }
    Ok(())
}

/// Estimate the ground-to-image homography from `(pixel, world)` pairs with the
/// normalized direct linear transform.
pub fn estimate_homography(
    correspondences: &[(PixelPoint, Point2)],
) -> Result<HomographyFit, GeometryError> {
    let n = correspondences.len();
    if n < 4 {
        return Err(GeometryError::DegenerateConfiguration(format!(
            "need at least 4 correspondences, got {n}"
        )));
    }
    if correspondences
        .iter()
        .any(|(p, w)| !p.is_finite() || !w.x.is_finite() || !w.y.is_finite())
    {
        return Err(GeometryError::DegenerateConfiguration(
            "non-finite coordinate".into(),
        ));
    }
    let image: Vec<Point2> = correspondences
        .iter()
        .map(|(p, _)| Point2::new(p.u, p.v))
        .collect();
    let world: Vec<Point2> = correspondences.iter().map(|(_, w)| *w).collect();
    check_configuration(&image)?;

    let t_img = normalizing_transform(&image);
    let t_world = normalizing_transform(&world);

    // A h = 0 with h the row-major entries of the normalized homography.
    // Zero rows pad the system to at least 9 rows so the SVD yields a full V.
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (img, wld)) in image.iter().zip(&world).enumerate() {
        let x = apply(&t_world, *wld);
        let u = apply(&t_img, *img);
        let r0 = 2 * i;
        let r1 = r0 + 1;
        let xs = [x.x, x.y, 1.0];
        for k in 0..3 {
            a[(r0, k)] = -xs[k];
            a[(r0, 6 + k)] = u.x * xs[k];
            a[(r1, 3 + k)] = -xs[k];
            a[(r1, 6 + k)] = u.y * xs[k];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(GeometryError::RankDeficient)?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let smallest = order[0];
    let largest = sv[order[order.len() - 1]];
    if largest <= 0.0 || sv[order[1]] / largest < 1e-12 {
        return Err(GeometryError::RankDeficient);
    }
    let h = v_t.row(smallest);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_img_inv = t_img.try_inverse().ok_or(GeometryError::RankDeficient)?;
    let m = t_img_inv * hn * t_world;
    let homography = Homography::from_matrix(m).map_err(|_| GeometryError::RankDeficient)?;

    let mut sq = 0.0;
    for (img, wld) in image.iter().zip(&world) {
        let p = homography.world_to_pixel(*wld)?;
        sq += (p.u - img.x).powi(2) + (p.v - img.y).powi(2);
    }
    let rms_px = (sq / n as f64).sqrt();
    Ok(HomographyFit { homography, rms_px })
}

/// Resolution-relative surrogate for the metric segment cap when no
/// calibration is available: `kappa * sqrt(W^2 + H^2)` pixels.
pub fn pixel_proxy_lmax(width: f64, height: f64, kappa: f64) -> Result<f64, GeometryError> {
    if !(width > 0.0 && height > 0.0) {
        return Err(GeometryError::NonPositiveDims { width, height });
    }
    if !(0.06..=0.10).contains(&kappa) {
        log::warn!("kappa {kappa} outside the recommended [0.06, 0.10] band");
    }
    Ok(kappa * width.hypot(height))
}

/// How pixel coordinates of a sketch are tied to meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricScale {
    Homography(Homography),
    /// Uniform scale derived from `kappa`: `l_max_px` pixels equal `l_max_m` meters.
    PixelProxy { kappa: f64 },
}

/// A resolved pixel/world mapping for one image.
#[derive(Debug, Clone)]
pub enum Grounding {
    Projective(Homography),
    Uniform {
        meters_per_px: f64,
        image_height: f64,
    },
}

impl Grounding {
    /// Resolve `scale` for an image of the given size. The pixel proxy places
    /// the world origin at the bottom-left pixel with y pointing up.
    pub fn new(
        scale: &MetricScale,
        image_width: f64,
        image_height: f64,
        l_max_m: f64,
    ) -> Result<Self, GeometryError> {
        match scale {
            MetricScale::Homography(h) => Ok(Grounding::Projective(h.clone())),
            MetricScale::PixelProxy { kappa } => {
                let lmax_px = pixel_proxy_lmax(image_width, image_height, *kappa)?;
                if !(lmax_px > 0.0) || !lmax_px.is_finite() {
                    return Err(GeometryError::ScaleUnavailable);
                }
                Ok(Grounding::Uniform {
                    meters_per_px: l_max_m / lmax_px,
                    image_height,
                })
            }
        }
    }

    pub fn to_world(&self, p: PixelPoint) -> Result<Point2, GeometryError> {
        match self {
            Grounding::Projective(h) => h.pixel_to_world(p),
            Grounding::Uniform {
                meters_per_px,
                image_height,
            } => Ok(Point2::new(
                p.u * meters_per_px,
                (image_height - 1.0 - p.v) * meters_per_px,
            )),
        }
    }

    pub fn to_pixel(&self, w: Point2) -> Result<PixelPoint, GeometryError> {
        match self {
            Grounding::Projective(h) => h.world_to_pixel(w),
            Grounding::Uniform {
                meters_per_px,
                image_height,
            } => Ok(PixelPoint::new(
                w.x / meters_per_px,
                image_height - 1.0 - w.y / meters_per_px,
            )),
        }
    }
}
