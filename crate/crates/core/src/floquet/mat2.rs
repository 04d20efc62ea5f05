//! 2x2 complex blocks for the vector recurrence.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex;

use crate::scalar::Real;

pub type V2<T> = [Complex<T>; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M2<T> {
    pub m: [[Complex<T>; 2]; 2],
}

impl<T: Real> M2<T> {
    pub fn new(a: Complex<T>, b: Complex<T>, c: Complex<T>, d: Complex<T>) -> Self {
        M2 { m: [[a, b], [c, d]] }
    }

    pub fn zero() -> Self {
        let z = Complex::new(T::zero(), T::zero());
        M2::new(z, z, z, z)
    }

    pub fn identity() -> Self {
        let z = Complex::new(T::zero(), T::zero());
        let o = Complex::new(T::one(), T::zero());
        M2::new(o, z, z, o)
    }

    pub fn det(&self) -> Complex<T> {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        let scale = self.norm();
        if !(d.norm() > T::eps() * scale * scale) || !d.re.is_finite() || !d.im.is_finite() {
            return None;
        }
        let inv = d.inv();
        Some(M2::new(self.m[1][1] * inv, -self.m[0][1] * inv, -self.m[1][0] * inv, self.m[0][0] * inv))
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        M2::new(self.m[0][0] * s, self.m[0][1] * s, self.m[1][0] * s, self.m[1][1] * s)
    }

    pub fn apply(&self, v: V2<T>) -> V2<T> {
        [self.m[0][0] * v[0] + self.m[0][1] * v[1], self.m[1][0] * v[0] + self.m[1][1] * v[1]]
    }

    /// Max-abs entry.
    pub fn norm(&self) -> T {
        let mut n = T::zero();
        for row in &self.m {
            for z in row {
                n = n.max(z.norm());
            }
        }
        n
    }
}

impl<T: Real> Mul for M2<T> {
    type Output = M2<T>;
    fn mul(self, o: M2<T>) -> M2<T> {
        let a = &self.m;
        let b = &o.m;
        M2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl<T: Real> Add for M2<T> {
    type Output = M2<T>;
    fn add(self, o: M2<T>) -> M2<T> {
        M2::new(self.m[0][0] + o.m[0][0], self.m[0][1] + o.m[0][1], self.m[1][0] + o.m[1][0], self.m[1][1] + o.m[1][1])
    }
}

impl<T: Real> Sub for M2<T> {
    type Output = M2<T>;
    fn sub(self, o: M2<T>) -> M2<T> {
        self + (-o)
    }
}

impl<T: Real> Neg for M2<T> {
    type Output = M2<T>;
    fn neg(self) -> M2<T> {
        M2::new(-self.m[0][0], -self.m[0][1], -self.m[1][0], -self.m[1][1])
    }
}

pub fn vsub<T: Real>(a: V2<T>, b: V2<T>) -> V2<T> {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn vadd<T: Real>(a: V2<T>, b: V2<T>) -> V2<T> {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn vnorm<T: Real>(a: V2<T>) -> T {
    a[0].norm().max(a[1].norm())
}
