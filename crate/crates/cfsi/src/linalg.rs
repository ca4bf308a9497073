//! Minimal fixed-size 2D vector/tensor algebra used by the element kernels.

use crate::real::Real;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<R> {
    pub x: R,
    pub y: R,
}

impl<R: Real> Vec2<R> {
    #[inline]
    pub fn new(x: R, y: R) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(R::zero(), R::zero())
    }

    #[inline]
    pub fn dot(self, o: Self) -> R {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn norm(self) -> R {
        self.dot(self).sqrt()
    }

    /// z-component of the cross product `self × o`.
    #[inline]
    pub fn cross(self, o: Self) -> R {
        self.x * o.y - self.y * o.x
    }
}

impl<R: Real> Add for Vec2<R> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<R: Real> AddAssign for Vec2<R> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl<R: Real> Sub for Vec2<R> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<R: Real> Neg for Vec2<R> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<R: Real> Mul<R> for Vec2<R> {
    type Output = Self;
    #[inline]
    fn mul(self, s: R) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<R: Real> Div<R> for Vec2<R> {
    type Output = Self;
    #[inline]
    fn div(self, s: R) -> Self {
        Self::new(self.x / s, self.y / s)
    }
}

/// A 2×2 tensor, row-major: `m[i][j]` is row `i`, column `j`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2<R> {
    pub m: [[R; 2]; 2],
}

impl<R: Real> Mat2<R> {
    #[inline]
    pub fn new(a: R, b: R, c: R, d: R) -> Self {
        Self { m: [[a, b], [c, d]] }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(R::zero(), R::zero(), R::zero(), R::zero())
    }

    #[inline]
    pub fn identity() -> Self {
        Self::new(R::one(), R::zero(), R::zero(), R::one())
    }

    /// Tensor with columns `c0`, `c1`.
    #[inline]
    pub fn from_columns(c0: Vec2<R>, c1: Vec2<R>) -> Self {
        Self::new(c0.x, c1.x, c0.y, c1.y)
    }

    #[inline]
    pub fn transpose(self) -> Self {
        Self::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    #[inline]
    pub fn det(self) -> R {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    #[inline]
    pub fn trace(self) -> R {
        self.m[0][0] + self.m[1][1]
    }

    #[inline]
    pub fn inverse(self) -> Self {
        let d = self.det();
        Self::new(
            self.m[1][1] / d,
            -self.m[0][1] / d,
            -self.m[1][0] / d,
            self.m[0][0] / d,
        )
    }

    /// Full contraction `self : o = Σ_ij self_ij o_ij`.
    #[inline]
    pub fn ddot(self, o: Self) -> R {
        self.m[0][0] * o.m[0][0]
            + self.m[0][1] * o.m[0][1]
            + self.m[1][0] * o.m[1][0]
            + self.m[1][1] * o.m[1][1]
    }

    /// Symmetric part times two: `self + selfᵀ`.
    #[inline]
    pub fn sym2(self) -> Self {
        self + self.transpose()
    }

    #[inline]
    pub fn apply(self, v: Vec2<R>) -> Vec2<R> {
        Vec2::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }
}

impl<R: Real> Add for Mat2<R> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

impl<R: Real> Sub for Mat2<R> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(
            self.m[0][0] - o.m[0][0],
            self.m[0][1] - o.m[0][1],
            self.m[1][0] - o.m[1][0],
            self.m[1][1] - o.m[1][1],
        )
    }
}

impl<R: Real> Mul for Mat2<R> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut r = Self::zero();
        for i in 0..2 {
            for j in 0..2 {
                r.m[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j];
            }
        }
        r
    }
}

impl<R: Real> Mul<R> for Mat2<R> {
    type Output = Self;
    #[inline]
    fn mul(self, s: R) -> Self {
        Self::new(
            self.m[0][0] * s,
            self.m[0][1] * s,
            self.m[1][0] * s,
            self.m[1][1] * s,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mat2_inverse_roundtrip() {
        let a = Mat2::new(2.0, 1.0, -0.5, 3.0);
        let id = a * a.inverse();
        assert!((id.m[0][0] - 1.0f64).abs() < 1e-14);
        assert!((id.m[1][1] - 1.0f64).abs() < 1e-14);
        assert!(id.m[0][1].abs() < 1e-14);
        assert!(id.m[1][0].abs() < 1e-14);
    }

    #[test]
    fn cross_is_signed_area_times_two() {
        let a = Vec2::new(1.0f64, 0.0);
        let b = Vec2::new(0.0f64, 1.0);
        assert_eq!(a.cross(b), 1.0);
        assert_eq!(b.cross(a), -1.0);
    }
}
