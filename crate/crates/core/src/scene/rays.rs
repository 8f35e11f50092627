//! Angular measures and ray tests shared by every objective.
//!
//! Widgets are flat rectangles that always face the eye, so a widget's pose
//! is fully determined by its center and the eye position.

use super::{GeometryError, Vec3, WidgetSpec};

/// Angle in degrees in `[0, 180]` between `point - origin` and `direction`.
pub fn angular_diff(point: Vec3, origin: Vec3, direction: Vec3) -> Result<f64, GeometryError> {
    let v = (point - origin)
        .normalized()
        .ok_or(GeometryError::Coincident("angular_diff"))?;
    let d = direction
        .normalized()
        .ok_or(GeometryError::ZeroDirection)?;
    Ok(v.dot(d).clamp(-1.0, 1.0).acos().to_degrees())
}

/// Signed elevation in degrees of `point` above the horizontal plane through
/// `origin`, in `[-90, 90]`.
pub fn elevation_angle(point: Vec3, origin: Vec3) -> Result<f64, GeometryError> {
    let v = point - origin;
    let n = v.norm();
    if n <= 1e-12 {
        return Err(GeometryError::Coincident("elevation_angle"));
    }
    Ok((v.y / n).clamp(-1.0, 1.0).asin().to_degrees())
}

/// Orthonormal frame of a billboarded widget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basis {
    pub right: Vec3,
    pub up: Vec3,
    /// Points from the widget toward the eye.
    pub normal: Vec3,
}

/// Frame of a widget at `widget_center` facing `eye`.
///
/// `up` is world y projected onto the widget plane; when the widget sits
/// straight above or below the eye, world z seeds the projection instead.
pub fn billboard_basis(widget_center: Vec3, eye: Vec3) -> Result<Basis, GeometryError> {
    let normal = (eye - widget_center)
        .normalized()
        .ok_or(GeometryError::Coincident("billboard_basis"))?;
    let project = |seed: Vec3| seed - normal * seed.dot(normal);
    let from_y = project(Vec3::Y);
    let up = if from_y.norm() > 1e-6 {
        from_y / from_y.norm()
    } else {
        project(Vec3::Z)
            .normalized()
            .expect("world z is not parallel to a vertical normal")
    };
    let right = up.cross(normal);
    Ok(Basis { right, up, normal })
}

/// Distance along `dir` at which a ray from `origin` crosses the widget
/// rectangle, or `None` on a miss. Edge contact counts as a miss.
pub fn ray_rect_intersect(
    origin: Vec3,
    dir: Vec3,
    widget_center: Vec3,
    widget: &WidgetSpec,
    eye: Vec3,
) -> Option<f64> {
    let basis = billboard_basis(widget_center, eye).ok()?;
    PlacedWidget::with_basis(widget_center, basis, widget.width, widget.height).hit(origin, dir)
}

/// A widget rectangle at a concrete position.
#[derive(Debug, Clone, Copy)]
pub struct PlacedWidget {
    pub center: Vec3,
    pub basis: Basis,
    pub half_width: f64,
    pub half_height: f64,
}

impl PlacedWidget {
    pub fn new(center: Vec3, eye: Vec3, spec: &WidgetSpec) -> Result<Self, GeometryError> {
        Ok(Self::with_basis(center, billboard_basis(center, eye)?, spec.width, spec.height))
    }

    fn with_basis(center: Vec3, basis: Basis, width: f64, height: f64) -> Self {
        Self {
            center,
            basis,
            half_width: width * 0.5,
            half_height: height * 0.5,
        }
    }

    pub fn hit(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        let denom = dir.dot(self.basis.normal);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = (self.center - origin).dot(self.basis.normal) / denom;
        if !(t > 0.0) {
            return None;
        }
        let local = origin + dir * t - self.center;
        let inside = local.dot(self.basis.right).abs() < self.half_width
            && local.dot(self.basis.up).abs() < self.half_height;
        inside.then_some(t)
    }

    /// True when the segment from `eye` to `target` crosses this rectangle
    /// strictly before reaching `target`.
    pub fn blocks(&self, eye: Vec3, target: Vec3) -> bool {
        let to_target = target - eye;
        let dist = to_target.norm();
        if dist <= 1e-12 {
            return false;
        }
        matches!(self.hit(eye, to_target / dist), Some(t) if t < dist - 1e-9)
    }

    /// Cell centers of an `n × n` grid laid over the rectangle.
    pub fn sample_grid(&self, n: usize) -> impl Iterator<Item = Vec3> + '_ {
        let step = 1.0 / n as f64;
        (0..n).flat_map(move |i| {
            (0..n).map(move |j| {
                let u = (i as f64 + 0.5) * step * 2.0 - 1.0;
                let v = (j as f64 + 0.5) * step * 2.0 - 1.0;
                self.center + self.basis.right * (u * self.half_width) + self.basis.up * (v * self.half_height)
            })
        })
    }

    pub fn corner_left(&self) -> Vec3 {
        self.center - self.basis.right * self.half_width
    }

    pub fn half_diagonal(&self) -> f64 {
        self.half_width.hypot(self.half_height)
    }
}

/// Conservative angular radius (degrees) of a sphere seen from `eye`;
/// `None` when the eye is inside the sphere.
pub fn angular_radius(center: Vec3, radius: f64, eye: Vec3) -> Option<f64> {
    let d = center.distance(eye);
    (d > radius).then(|| (radius / d).asin().to_degrees())
}
