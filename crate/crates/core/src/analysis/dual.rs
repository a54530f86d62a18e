//! First-order forward-mode dual numbers in two variables, used to obtain
//! exact gradients of manufactured solutions.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::Vec2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual2 {
    pub v: f64,
    pub d: Vec2,
}

impl Dual2 {
    pub fn constant(v: f64) -> Self {
        Dual2 { v, d: Vec2::zeros() }
    }

    pub fn x(v: f64) -> Self {
        Dual2 { v, d: Vec2::new(1.0, 0.0) }
    }

    pub fn y(v: f64) -> Self {
        Dual2 { v, d: Vec2::new(0.0, 1.0) }
    }

    /// The coordinate functions at `p`.
    pub fn point(p: Vec2) -> (Self, Self) {
        (Dual2::x(p.x), Dual2::y(p.y))
    }

    fn chain(self, v: f64, dv: f64) -> Self {
        Dual2 { v, d: self.d * dv }
    }

    pub fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }

    pub fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }

    pub fn atan(self) -> Self {
        self.chain(self.v.atan(), 1.0 / (1.0 + self.v * self.v))
    }

    pub fn asin(self) -> Self {
        self.chain(self.v.asin(), 1.0 / (1.0 - self.v * self.v).sqrt())
    }

    pub fn powi(self, n: i32) -> Self {
        self.chain(self.v.powi(n), n as f64 * self.v.powi(n - 1))
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }
}

impl Add for Dual2 {
    type Output = Dual2;
    fn add(self, o: Dual2) -> Dual2 {
        Dual2 { v: self.v + o.v, d: self.d + o.d }
    }
}

impl Sub for Dual2 {
    type Output = Dual2;
    fn sub(self, o: Dual2) -> Dual2 {
        Dual2 { v: self.v - o.v, d: self.d - o.d }
    }
}

impl Mul for Dual2 {
    type Output = Dual2;
    fn mul(self, o: Dual2) -> Dual2 {
        Dual2 {
            v: self.v * o.v,
            d: self.d * o.v + o.d * self.v,
        }
    }
}

impl Div for Dual2 {
    type Output = Dual2;
    fn div(self, o: Dual2) -> Dual2 {
        Dual2 {
            v: self.v / o.v,
            d: (self.d * o.v - o.d * self.v) / (o.v * o.v),
        }
    }
}

impl Neg for Dual2 {
    type Output = Dual2;
    fn neg(self) -> Dual2 {
        Dual2 { v: -self.v, d: -self.d }
    }
}

impl Add<f64> for Dual2 {
    type Output = Dual2;
    fn add(self, o: f64) -> Dual2 {
        Dual2 { v: self.v + o, d: self.d }
    }
}

impl Sub<f64> for Dual2 {
    type Output = Dual2;
    fn sub(self, o: f64) -> Dual2 {
        Dual2 { v: self.v - o, d: self.d }
    }
}

impl Mul<f64> for Dual2 {
    type Output = Dual2;
    fn mul(self, o: f64) -> Dual2 {
        Dual2 { v: self.v * o, d: self.d * o }
    }
}

impl Div<f64> for Dual2 {
    type Output = Dual2;
    fn div(self, o: f64) -> Dual2 {
        Dual2 { v: self.v / o, d: self.d / o }
    }
}

impl Add<Dual2> for f64 {
    type Output = Dual2;
    fn add(self, o: Dual2) -> Dual2 {
        o + self
    }
}

impl Sub<Dual2> for f64 {
    type Output = Dual2;
    fn sub(self, o: Dual2) -> Dual2 {
        -o + self
    }
}

impl Mul<Dual2> for f64 {
    type Output = Dual2;
    fn mul(self, o: Dual2) -> Dual2 {
        o * self
    }
}
