//! Geometric primitives in reduced units and periodic-boundary arithmetic.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

/// A 3-component vector of reduced-unit reals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    #[inline(always)]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline(always)]
    pub const fn splat(v: f64) -> Self {
        Self { x: v, y: v, z: v }
    }

    #[inline(always)]
    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    #[inline(always)]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline(always)]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Squared Euclidean norm, evaluated as `x*x + y*y + z*z`.
    #[inline(always)]
    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    #[inline(always)]
    pub fn norm(self) -> f64 {
        self.norm2().sqrt()
    }

    #[inline(always)]
    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline(always)]
    pub fn get(self, d: usize) -> f64 {
        match d {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("dimension {d} out of range"),
        }
    }

    #[inline(always)]
    pub fn set(&mut self, d: usize, v: f64) {
        match d {
            0 => self.x = v,
            1 => self.y = v,
            2 => self.z = v,
            _ => panic!("dimension {d} out of range"),
        }
    }

    /// Lexicographic total order on (x, y, z), used to compare particle
    /// states independently of storage order.
    pub fn lex_cmp(&self, o: &Vec3) -> std::cmp::Ordering {
        self.x
            .total_cmp(&o.x)
            .then(self.y.total_cmp(&o.y))
            .then(self.z.total_cmp(&o.z))
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, d: usize) -> &f64 {
        match d {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("dimension {d} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline(always)]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline(always)]
    fn add_assign(&mut self, o: Vec3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline(always)]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    #[inline(always)]
    fn sub_assign(&mut self, o: Vec3) {
        self.x -= o.x;
        self.y -= o.y;
        self.z -= o.z;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline(always)]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline(always)]
    fn mul(self, v: Vec3) -> Vec3 {
        v.scale(self)
    }
}

/// Axis-aligned bounding box. Membership tests are half-open: `[min, max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub const fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    /// The inverted box (`min = +inf`, `max = -inf`). Identity of [`aabb_union`].
    pub const fn empty() -> Self {
        Self {
            min: Vec3::splat(f64::INFINITY),
            max: Vec3::splat(f64::NEG_INFINITY),
        }
    }

    /// Inverted seed built from a bounding box, `min <- bounds.max`,
    /// `max <- bounds.min`. Folding points into it yields their tight bounds
    /// whenever they lie inside `bounds`.
    pub fn inverted(bounds: &Aabb) -> Self {
        Self {
            min: bounds.max,
            max: bounds.min,
        }
    }

    pub fn from_point(p: Vec3) -> Self {
        Self { min: p, max: p }
    }

    pub fn is_valid(&self) -> bool {
        self.min.x <= self.max.x && self.min.y <= self.max.y && self.min.z <= self.max.z
    }

    pub fn is_empty(&self) -> bool {
        !self.is_valid()
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max).scale(0.5)
    }

    /// Half-open membership `min <= p < max`.
    #[inline]
    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x < self.max.x
            && p.y >= self.min.y
            && p.y < self.max.y
            && p.z >= self.min.z
            && p.z < self.max.z
    }

    /// Grow by `d` on every face.
    pub fn expand(&self, d: f64) -> Aabb {
        Aabb::new(self.min - Vec3::splat(d), self.max + Vec3::splat(d))
    }

    pub fn translate(&self, s: Vec3) -> Aabb {
        Aabb::new(self.min + s, self.max + s)
    }

    /// Strict membership in the box grown by `d` on every face:
    /// `min - d < p < max + d` in each dimension.
    #[inline]
    pub fn within_open_margin(&self, p: Vec3, d: f64) -> bool {
        p.x > self.min.x - d
            && p.x < self.max.x + d
            && p.y > self.min.y - d
            && p.y < self.max.y + d
            && p.z > self.min.z - d
            && p.z < self.max.z + d
    }

    /// Largest per-dimension gap between two boxes (0 if they touch or overlap).
    pub fn gap(&self, o: &Aabb) -> f64 {
        let mut g: f64 = 0.0;
        for d in 0..3 {
            let lo = o.min.get(d) - self.max.get(d);
            let hi = self.min.get(d) - o.max.get(d);
            g = g.max(lo).max(hi);
        }
        g
    }

    /// Euclidean distance from `p` to the closed box.
    pub fn distance_to(&self, p: Vec3) -> f64 {
        let mut s = 0.0;
        for d in 0..3 {
            let v = p.get(d);
            let e = if v < self.min.get(d) {
                self.min.get(d) - v
            } else if v > self.max.get(d) {
                v - self.max.get(d)
            } else {
                0.0
            };
            s += e * e;
        }
        s.sqrt()
    }

    /// Overlap test with positive-volume intersection.
    pub fn interiors_overlap(&self, o: &Aabb) -> bool {
        (0..3).all(|d| self.min.get(d) < o.max.get(d) && o.min.get(d) < self.max.get(d))
    }

    pub fn intersection(&self, o: &Aabb) -> Aabb {
        Aabb::new(self.min.max(o.min), self.max.min(o.max))
    }
}

/// Componentwise min of mins and max of maxes.
pub fn aabb_union(a: &Aabb, b: &Aabb) -> Aabb {
    Aabb {
        min: Vec3::new(
            if a.min.x < b.min.x { a.min.x } else { b.min.x },
            if a.min.y < b.min.y { a.min.y } else { b.min.y },
            if a.min.z < b.min.z { a.min.z } else { b.min.z },
        ),
        max: Vec3::new(
            if a.max.x > b.max.x { a.max.x } else { b.max.x },
            if a.max.y > b.max.y { a.max.y } else { b.max.y },
            if a.max.z > b.max.z { a.max.z } else { b.max.z },
        ),
    }
}

/// Wrap a single coordinate into `[lo, hi)`.
#[inline]
pub fn wrap_coord(v: f64, lo: f64, hi: f64) -> f64 {
    if v >= lo && v < hi {
        return v;
    }
    let len = hi - lo;
    let w = lo + (v - lo).rem_euclid(len);
    // rem_euclid may round up to exactly `len`
    if w >= hi {
        lo
    } else {
        w
    }
}

/// Shift every component of `p` by a multiple of the domain length so it
/// falls into `[global.min, global.max)`.
pub fn pbc_correct(p: Vec3, global: &Aabb) -> Vec3 {
    Vec3::new(
        wrap_coord(p.x, global.min.x, global.max.x),
        wrap_coord(p.y, global.min.y, global.max.y),
        wrap_coord(p.z, global.min.z, global.max.z),
    )
}

/// Map each component of a separation vector into `(-L/2, L/2]`.
pub fn minimum_image(delta: Vec3, global: &Aabb) -> Vec3 {
    let ext = global.extent();
    let map = |v: f64, len: f64| {
        let half = 0.5 * len;
        if v > half {
            v - len
        } else if v <= -half {
            v + len
        } else {
            v
        }
    };
    Vec3::new(map(delta.x, ext.x), map(delta.y, ext.y), map(delta.z, ext.z))
}

/// The 27 periodic image offsets `{-L, 0, +L}^3` of a box, zero offset first.
pub fn image_offsets(global: &Aabb) -> Vec<Vec3> {
    let ext = global.extent();
    let mut out = vec![Vec3::ZERO];
    for dz in -1i32..=1 {
        for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                if dx == 0 && dy == 0 && dz == 0 {
                    continue;
                }
                out.push(Vec3::new(
                    dx as f64 * ext.x,
                    dy as f64 * ext.y,
                    dz as f64 * ext.z,
                ));
            }
        }
    }
    out
}
