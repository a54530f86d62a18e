use crate::Vec2;

/// Implicit description of a domain: negative inside, positive outside.
#[derive(Clone, Debug, PartialEq)]
pub enum LevelSet {
    /// `|x - center| - radius`.
    Circle { center: Vec2, radius: f64 },
    /// `|x| - r0 - r1 cos(5 theta)`.
    Flower { r0: f64, r1: f64 },
    /// `normal . x - offset`; `normal` is normalized on construction.
    HalfPlane { normal: Vec2, offset: f64 },
    /// `sign * y - amplitude cos(frequency x) - offset`.
    Wave {
        sign: f64,
        amplitude: f64,
        frequency: f64,
        offset: f64,
    },
    /// The inner level set evaluated at `x - shift`.
    Translate { inner: Box<LevelSet>, shift: Vec2 },
    /// Pointwise maximum of the members.
    Intersection(Vec<LevelSet>),
    /// A level set that is negative everywhere.
    Everywhere,
}

impl LevelSet {
    pub fn circle(center: Vec2, radius: f64) -> Self {
        LevelSet::Circle { center, radius }
    }

    pub fn flower(r0: f64, r1: f64) -> Self {
        LevelSet::Flower { r0, r1 }
    }

    pub fn half_plane(normal: Vec2, offset: f64) -> Self {
        let len = normal.norm();
        LevelSet::HalfPlane {
            normal: normal / len,
            offset: offset / len,
        }
    }

    /// The band `{y - a cos(w x) < c} ∩ {y + a cos(w x) > -c}`.
    pub fn wavy_band(amplitude: f64, frequency: f64, half_width: f64) -> Self {
        LevelSet::Intersection(vec![
            LevelSet::Wave {
                sign: 1.0,
                amplitude,
                frequency,
                offset: half_width,
            },
            LevelSet::Wave {
                sign: -1.0,
                amplitude,
                frequency,
                offset: half_width,
            },
        ])
    }

    pub fn translate(self, shift: Vec2) -> Self {
        LevelSet::Translate {
            inner: Box::new(self),
            shift,
        }
    }

    pub fn intersect(self, other: LevelSet) -> Self {
        match self {
            LevelSet::Intersection(mut members) => {
                members.push(other);
                LevelSet::Intersection(members)
            }
            s => LevelSet::Intersection(vec![s, other]),
        }
    }

    pub fn value(&self, p: Vec2) -> f64 {
        match self {
            LevelSet::Circle { center, radius } => (p - center).norm() - radius,
            LevelSet::Flower { r0, r1 } => {
                let theta = p.y.atan2(p.x);
                p.norm() - r0 - r1 * (5.0 * theta).cos()
            }
            LevelSet::HalfPlane { normal, offset } => normal.dot(&p) - offset,
            LevelSet::Wave {
                sign,
                amplitude,
                frequency,
                offset,
            } => sign * p.y - amplitude * (frequency * p.x).cos() - offset,
            LevelSet::Translate { inner, shift } => inner.value(p - shift),
            LevelSet::Intersection(members) => members
                .iter()
                .map(|m| m.value(p))
                .fold(f64::NEG_INFINITY, f64::max),
            LevelSet::Everywhere => -1.0,
        }
    }

    pub fn gradient(&self, p: Vec2) -> Vec2 {
        match self {
            LevelSet::Circle { center, .. } => {
                let d = p - center;
                let r = d.norm();
                if r == 0.0 {
                    Vec2::zeros()
                } else {
                    d / r
                }
            }
            LevelSet::Flower { r1, .. } => {
                let r2 = p.norm_squared();
                if r2 == 0.0 {
                    return Vec2::zeros();
                }
                let r = r2.sqrt();
                let theta = p.y.atan2(p.x);
                let dtheta = Vec2::new(-p.y, p.x) / r2;
                p / r + dtheta * (5.0 * r1 * (5.0 * theta).sin())
            }
            LevelSet::HalfPlane { normal, .. } => *normal,
            LevelSet::Wave {
                sign,
                amplitude,
                frequency,
                ..
            } => Vec2::new(amplitude * frequency * (frequency * p.x).sin(), *sign),
            LevelSet::Translate { inner, shift } => inner.gradient(p - shift),
            LevelSet::Intersection(members) => {
                let mut best = f64::NEG_INFINITY;
                let mut grad = Vec2::zeros();
                for m in members {
                    let v = m.value(p);
                    if v > best {
                        best = v;
                        grad = m.gradient(p);
                    }
                }
                grad
            }
            LevelSet::Everywhere => Vec2::zeros(),
        }
    }

    pub fn is_inside(&self, p: Vec2) -> bool {
        self.value(p) < 0.0
    }
}
