//! Benchmark channel geometry: a rigid cylinder with an elastic flag in a
//! rectangular channel.

use super::MeshError;
use crate::linalg::Vec2;
use crate::real::Real;

/// Geometry of the flag-behind-cylinder benchmark channel (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryParams<R> {
    /// Channel length.
    pub length: R,
    /// Channel height.
    pub height: R,
    /// Cylinder center.
    pub center: Vec2<R>,
    /// Cylinder radius.
    pub radius: R,
    /// Flag length (from the cylinder's right tangent to the trailing edge).
    pub flag_length: R,
    /// Flag thickness.
    pub flag_thickness: R,
}

impl<R: Real> Default for GeometryParams<R> {
    fn default() -> Self {
        Self {
            length: R::of(2.5),
            height: R::of(0.41),
            center: Vec2::new(R::of(0.2), R::of(0.2)),
            radius: R::of(0.05),
            flag_length: R::of(0.35),
            flag_thickness: R::of(0.02),
        }
    }
}

impl<R: Real> GeometryParams<R> {
    /// Control point at the trailing edge of the flag.
    pub fn control_point(&self) -> Vec2<R> {
        Vec2::new(
            self.center.x + self.radius + self.flag_length,
            self.center.y,
        )
    }

    /// Flag rectangle as `(x0, x1, y0, y1)`.
    pub fn flag_rect(&self) -> (R, R, R, R) {
        let half = self.flag_thickness * R::of(0.5);
        (
            self.center.x + self.radius,
            self.center.x + self.radius + self.flag_length,
            self.center.y - half,
            self.center.y + half,
        )
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let err = |msg: &str| Err(MeshError::Geometry(msg.into()));
        if !(self.radius > R::zero()) {
            return err("cylinder radius must be positive");
        }
        if !(self.center.x - self.radius > R::zero()) {
            return err("cylinder must not touch the inlet");
        }
        if !(self.center.y - self.radius > R::zero())
            || !(self.center.y + self.radius < self.height)
        {
            return err("cylinder must lie strictly inside the channel height");
        }
        if !(self.center.x + self.radius + self.flag_length < self.length) {
            return err("flag must end strictly before the outlet");
        }
        let half = self.flag_thickness * R::of(0.5);
        if !(self.center.y - half > R::zero()) || !(self.center.y + half < self.height) {
            return err("flag band must lie strictly inside the channel height");
        }
        if !(self.flag_thickness > R::zero()) || !(self.flag_length > R::zero()) {
            return err("flag dimensions must be positive");
        }
        if !(self.flag_thickness * R::of(0.5) < self.radius) {
            return err("flag must be thinner than the cylinder diameter");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_is_valid() {
        let g: GeometryParams<f64> = GeometryParams::default();
        g.validate().unwrap();
        assert_eq!(g.control_point(), Vec2::new(0.6, 0.2));
        let (x0, x1, y0, y1) = g.flag_rect();
        assert!((x0 - 0.25).abs() < 1e-15);
        assert!((x1 - 0.6).abs() < 1e-15);
        assert!((y0 - 0.19).abs() < 1e-15);
        assert!((y1 - 0.21).abs() < 1e-15);
    }

    #[test]
    fn flag_exiting_domain_is_rejected() {
        let g = GeometryParams::<f64> {
            flag_length: 2.5,
            ..GeometryParams::default()
        };
        assert!(matches!(g.validate(), Err(MeshError::Geometry(_))));
    }
}
