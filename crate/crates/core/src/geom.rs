//! Small fixed-size geometry: 3-vectors, unit quaternions, poses, boxes.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_f64(v: [f64; 3]) -> Self {
        Self::new(T::lit(v[0]), T::lit(v[1]), T::lit(v[2]))
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    /// Projection onto the table plane (z dropped).
    #[inline]
    pub fn horizontal(self) -> Self {
        Self::new(self.x, self.y, T::zero())
    }

    #[inline]
    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    /// Rotate about the vertical axis by `angle` radians.
    pub fn rotate_z(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }

    pub fn with_z(self, z: T) -> Self {
        Self::new(self.x, self.y, z)
    }
}

impl<T: Scalar> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Scalar> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Scalar> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Scalar> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Scalar> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

/// Quaternion stored as (w, x, y, z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Quat<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Default for Quat<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Scalar> Quat<T> {
    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    /// Gripper pointing straight down: half turn about the x axis.
    pub fn top_down() -> Self {
        Self::new(T::zero(), T::one(), T::zero(), T::zero())
    }

    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let n = axis.norm();
        if n == T::zero() {
            return Self::identity();
        }
        let (s, c) = (angle * T::half()).sin_cos();
        let a = axis.scale(s / n);
        Self::new(c, a.x, a.y, a.z)
    }

    pub fn norm(self) -> T {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Normalized copy; degenerate input maps to identity.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if !(n > T::lit(1e-12)) || !n.is_finite() {
            return Self::identity();
        }
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn is_unit(self, tol: T) -> bool {
        (self.norm() - T::one()).abs() <= tol
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Hamilton product `self * o`.
    pub fn mul(self, o: Self) -> Self {
        Self::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    /// Orientation after rotating for `dt` seconds at world-frame angular
    /// velocity `omega`.
    pub fn integrate(self, omega: Vec3<T>, dt: T) -> Self {
        let speed = omega.norm();
        if speed == T::zero() {
            return self;
        }
        Self::from_axis_angle(omega, speed * dt).mul(self).normalized()
    }

    pub fn to_array(self) -> [T; 4] {
        [self.w, self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Pose6D<T> {
    pub position: Vec3<T>,
    pub orientation: Quat<T>,
}

impl<T: Scalar> Default for Pose6D<T> {
    fn default() -> Self {
        Self::at(Vec3::zero())
    }
}

impl<T: Scalar> Pose6D<T> {
    pub fn new(position: Vec3<T>, orientation: Quat<T>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn at(position: Vec3<T>) -> Self {
        Self::new(position, Quat::identity())
    }

    pub fn is_valid(&self) -> bool {
        self.position.is_finite() && self.orientation.is_unit(T::lit(1e-9))
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Aabb<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Scalar> Aabb<T> {
    pub fn new(min: Vec3<T>, max: Vec3<T>) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    /// Horizontal containment only; objects on the table are checked this way.
    pub fn contains_xy(&self, p: Vec3<T>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn clamp(&self, p: Vec3<T>) -> Vec3<T> {
        Vec3::new(
            p.x.max(self.min.x).min(self.max.x),
            p.y.max(self.min.y).min(self.max.y),
            p.z.max(self.min.z).min(self.max.z),
        )
    }

    pub fn center(&self) -> Vec3<T> {
        (self.min + self.max).scale(T::half())
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite()
            && self.max.is_finite()
            && self.min.x < self.max.x
            && self.min.y < self.max.y
            && self.min.z <= self.max.z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotate_z_quarter_turn() {
        let v = Vec3::new(1.0f64, 0.0, 0.5).rotate_z(std::f64::consts::FRAC_PI_2);
        assert!((v.x).abs() < 1e-15);
        assert!((v.y - 1.0).abs() < 1e-15);
        assert_eq!(v.z, 0.5);
    }

    #[test]
    fn quaternion_integration_stays_unit() {
        let mut q = Quat::<f64>::identity();
        let w = Vec3::new(0.3, -1.2, 2.0);
        for _ in 0..1000 {
            q = q.integrate(w, 0.04);
        }
        assert!(q.is_unit(1e-12));
    }

    #[test]
    fn zero_angular_velocity_is_identity_map() {
        let q = Quat::<f64>::top_down();
        assert_eq!(q.integrate(Vec3::zero(), 0.04), q);
    }

    #[test]
    fn degenerate_quaternion_normalizes_to_identity() {
        let q = Quat::new(0.0f32, 0.0, 0.0, 0.0).normalized();
        assert_eq!(q, Quat::identity());
    }

    #[test]
    fn box_clamp() {
        let b = Aabb::new(Vec3::new(-1.0f64, -1.0, 0.0), Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(b.clamp(Vec3::new(2.0, -3.0, 0.5)), Vec3::new(1.0, -1.0, 0.5));
        assert!(b.contains_xy(Vec3::new(0.0, 0.0, -5.0)));
        assert!(!b.contains(Vec3::new(0.0, 0.0, -5.0)));
    }
}
