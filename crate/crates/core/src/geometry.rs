//! Detection geometry: box overlap metrics, camera field-of-view angles,
//! and the planar affine calibration that projects image detections onto
//! ground-plane meters.

/// Clamp floor applied inside [`iou_loss`] so a zero overlap stays finite.
pub const IOU_LOSS_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("degenerate box: ({x_min}, {y_min}, {x_max}, {y_max})")]
    DegenerateBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },
    #[error("invalid camera intrinsics: f={f}, w={w}, h={h}")]
    InvalidIntrinsics { f: f64, w: f64, h: f64 },
    #[error("iou value {value} outside [0, 1]")]
    IouOutOfRange { value: f64 },
    #[error("affine transform is singular (a*e - b*d = {det})")]
    SingularTransform { det: f64 },
    #[error("non-finite coordinate in {context}")]
    NonFinite { context: &'static str },
}

/// Axis-aligned box in pixel corner form, `x_min < x_max`, `y_min < y_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(GeometryError::DegenerateBox {
                x_min,
                y_min,
                x_max,
                y_max,
            });
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }
}

/// Pinhole intrinsics: focal length and sensor extents, all in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub f: f64,
    pub w: f64,
    pub h: f64,
}

impl CameraIntrinsics {
    pub fn new(f: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        if !(f > 0.0 && w > 0.0 && h > 0.0) || !f.is_finite() || !w.is_finite() || !h.is_finite() {
            return Err(GeometryError::InvalidIntrinsics { f, w, h });
        }
        Ok(Self { f, w, h })
    }
}

/// 2-d affine map from the homogeneous matrix
/// `[[a, b, c], [d, e, f], [0, 0, 1]]`; `a`/`e` scale, `b`/`d` shear,
/// `c`/`f_t` translate. The translation is named `f_t` to avoid clashing
/// with the focal length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform2D {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f_t: f64,
}

impl AffineTransform2D {
    pub const IDENTITY: Self = Self {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        e: 1.0,
        f_t: 0.0,
    };

    pub fn determinant(&self) -> f64 {
        self.a * self.e - self.b * self.d
    }
}

/// A point on the ground plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPoint {
    pub x: f64,
    pub y: f64,
}

impl GroundPoint {
    pub fn new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(GeometryError::NonFinite {
                context: "ground point",
            });
        }
        Ok(Self { x, y })
    }
}

/// Intersection area over union area; 0 for disjoint boxes, 1 only for
/// identical boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    inter / union
}

/// Negative log of the overlap, clamped at [`IOU_LOSS_EPSILON`] so a zero
/// overlap yields a large finite penalty instead of infinity.
pub fn iou_loss(iou_value: f64) -> Result<f64, GeometryError> {
    if !(0.0..=1.0).contains(&iou_value) {
        return Err(GeometryError::IouOutOfRange { value: iou_value });
    }
    Ok(-iou_value.max(IOU_LOSS_EPSILON).ln())
}

/// Field-of-view axis selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FovKind {
    Diagonal,
    Horizontal,
    Vertical,
}

/// `2 * arctan(extent / 2f)` with the extent picked per axis (the diagonal
/// uses `sqrt(w^2 + h^2)`). Result in radians, inside `(0, pi)`.
pub fn field_of_view(kind: FovKind, cam: &CameraIntrinsics) -> f64 {
    let extent = match kind {
        FovKind::Diagonal => (cam.w * cam.w + cam.h * cam.h).sqrt(),
        FovKind::Horizontal => cam.w,
        FovKind::Vertical => cam.h,
    };
    2.0 * (extent / (2.0 * cam.f)).atan()
}

/// Apply the affine map: `x' = a x + b y + c`, `y' = d x + e y + f_t`.
pub fn affine_apply(t: &AffineTransform2D, p: (f64, f64)) -> (f64, f64) {
    (
        t.a * p.0 + t.b * p.1 + t.c,
        t.d * p.0 + t.e * p.1 + t.f_t,
    )
}

/// Closed-form inverse of the 2x2 linear part plus translation.
pub fn affine_invert(t: &AffineTransform2D) -> Result<AffineTransform2D, GeometryError> {
    let det = t.determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(GeometryError::SingularTransform { det });
    }
    let (ia, ib, id, ie) = (t.e / det, -t.b / det, -t.d / det, t.a / det);
    Ok(AffineTransform2D {
        a: ia,
        b: ib,
        c: -(ia * t.c + ib * t.f_t),
        d: id,
        e: ie,
        f_t: -(id * t.c + ie * t.f_t),
    })
}

/// Project a detection to the ground plane through its foot point, the
/// midpoint of the box's bottom edge (`y_max` side).
pub fn project_detection(
    box_: &BBox,
    calib: &AffineTransform2D,
) -> Result<GroundPoint, GeometryError> {
    let foot = ((box_.x_min + box_.x_max) / 2.0, box_.y_max);
    let (x, y) = affine_apply(calib, foot);
    GroundPoint::new(x, y)
}
