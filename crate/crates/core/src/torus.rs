//! Fixed-point coordinates on the circle and boxes in T^3.
//!
//! A [`Phase`] stores a point of R/Z as a 128-bit binary fraction, so that
//! translation is exact modular integer addition and `k * x mod 1` is an
//! exact wrapping multiplication. Conversions to `f64` happen only where a
//! transcendental function is evaluated.

use serde::{Deserialize, Serialize};
use std::fmt;

const TWO_POW_128: f64 = 340_282_366_920_938_463_463_374_607_431_768_211_456.0;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Phase(pub u128);

impl Phase {
    pub const ZERO: Phase = Phase(0);

    /// Reduces `x` mod 1. Every `f64` in `[0, 1)` converts exactly.
    pub fn from_f64(x: f64) -> Phase {
        let r = x.rem_euclid(1.0);
        if !(r < 1.0) {
            return Phase(0);
        }
        Phase((r * TWO_POW_128) as u128)
    }

    /// Nearest `f64` in `[0, 1)`.
    pub fn to_f64(self) -> f64 {
        let v = self.0 as f64 / TWO_POW_128;
        if v >= 1.0 {
            0.0
        } else {
            v
        }
    }

    /// Representative in `[-1/2, 1/2)`.
    pub fn to_signed_f64(self) -> f64 {
        (self.0 as i128) as f64 / TWO_POW_128
    }

    /// Distance to the nearest integer.
    pub fn norm(self) -> f64 {
        self.to_signed_f64().abs()
    }

    pub fn add(self, other: Phase) -> Phase {
        Phase(self.0.wrapping_add(other.0))
    }

    pub fn sub(self, other: Phase) -> Phase {
        Phase(self.0.wrapping_sub(other.0))
    }

    pub fn neg(self) -> Phase {
        Phase(self.0.wrapping_neg())
    }

    /// `k * self mod 1`, exact.
    pub fn mul_int(self, k: i64) -> Phase {
        let p = Phase(self.0.wrapping_mul(k.unsigned_abs() as u128));
        if k < 0 {
            p.neg()
        } else {
            p
        }
    }

    /// `floor(2^bits * self)`.
    pub fn leading_bits(self, bits: u32) -> u64 {
        if bits == 0 {
            0
        } else {
            (self.0 >> (128 - bits)) as u64
        }
    }

    pub fn cos_2pi(self) -> f64 {
        (std::f64::consts::TAU * self.to_signed_f64()).cos()
    }

    pub fn sin_2pi(self) -> f64 {
        (std::f64::consts::TAU * self.to_signed_f64()).sin()
    }
}

impl fmt::Debug for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Phase({})", self.to_f64())
    }
}

/// A point of T^3 = (x, y, z). For the normalized time-one map the third
/// coordinate is the fiber coordinate z in `[0, 1)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct TorusPoint {
    pub x: Phase,
    pub y: Phase,
    pub z: Phase,
}

impl TorusPoint {
    pub fn new(x: f64, y: f64, z: f64) -> TorusPoint {
        TorusPoint { x: Phase::from_f64(x), y: Phase::from_f64(y), z: Phase::from_f64(z) }
    }

    pub fn to_f64(self) -> [f64; 3] {
        [self.x.to_f64(), self.y.to_f64(), self.z.to_f64()]
    }

    pub fn coords(self) -> [Phase; 3] {
        [self.x, self.y, self.z]
    }

    /// Sup-distance on T^3.
    pub fn dist(self, other: TorusPoint) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| a.sub(b).norm())
            .fold(0.0, f64::max)
    }
}

/// An arc `[start, start + len]` of the circle, `0 <= len <= 1`.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub len: f64,
}

impl Arc {
    pub fn new(lo: f64, hi: f64) -> Arc {
        Arc { start: lo, len: (hi - lo).clamp(0.0, 1.0) }
    }

    pub fn full() -> Arc {
        Arc { start: 0.0, len: 1.0 }
    }

    pub fn contains(&self, p: Phase) -> bool {
        if self.len >= 1.0 {
            return true;
        }
        p.sub(Phase::from_f64(self.start)).to_f64() <= self.len
    }

    pub fn end(&self) -> f64 {
        self.start + self.len
    }

    /// Point at relative position `t` in `[0, 1]`.
    pub fn at(&self, t: f64) -> Phase {
        Phase::from_f64(self.start + t * self.len)
    }

    /// Length of the intersection of two arcs.
    pub fn overlap(&self, other: &Arc) -> f64 {
        if self.len >= 1.0 {
            return other.len;
        }
        if other.len >= 1.0 {
            return self.len;
        }
        // Shift other so that self starts at 0; other may wrap.
        let s = (other.start - self.start).rem_euclid(1.0);
        let seg = |a: f64, b: f64| (b.min(self.len) - a.max(0.0)).max(0.0);
        seg(s, s + other.len) + seg(s - 1.0, s - 1.0 + other.len)
    }
}

/// Closed axis-aligned box in T^3, one arc per coordinate.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct Box3 {
    pub arcs: [Arc; 3],
}

impl Box3 {
    pub fn new(x: (f64, f64), y: (f64, f64), z: (f64, f64)) -> Box3 {
        Box3 { arcs: [Arc::new(x.0, x.1), Arc::new(y.0, y.1), Arc::new(z.0, z.1)] }
    }

    pub fn full() -> Box3 {
        Box3 { arcs: [Arc::full(); 3] }
    }

    /// Parses `x0,x1,y0,y1,z0,z1`.
    pub fn parse(s: &str) -> crate::Result<Box3> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| crate::error::invalid(format!("box '{s}': {e}")))?;
        if v.len() != 6 {
            return Err(crate::error::invalid(format!("box '{s}' needs six numbers")));
        }
        for pair in v.chunks(2) {
            if !(pair[1] >= pair[0]) || pair[1] - pair[0] > 1.0 {
                return Err(crate::error::invalid(format!("box '{s}': bad interval {pair:?}")));
            }
        }
        Ok(Box3::new((v[0], v[1]), (v[2], v[3]), (v[4], v[5])))
    }

    pub fn contains(&self, p: TorusPoint) -> bool {
        self.arcs[0].contains(p.x) && self.arcs[1].contains(p.y) && self.arcs[2].contains(p.z)
    }

    pub fn volume(&self) -> f64 {
        self.arcs.iter().map(|a| a.len).product()
    }

    /// Uniform point of the box from three uniforms in `[0, 1)`.
    pub fn point_at(&self, u: [f64; 3]) -> TorusPoint {
        TorusPoint { x: self.arcs[0].at(u[0]), y: self.arcs[1].at(u[1]), z: self.arcs[2].at(u[2]) }
    }

    /// Lebesgue measure of the intersection.
    pub fn overlap_volume(&self, other: &Box3) -> f64 {
        (0..3).map(|i| self.arcs[i].overlap(&other.arcs[i])).product()
    }

    /// The box translated by `v`.
    pub fn translate(&self, v: [Phase; 3]) -> Box3 {
        let mut arcs = self.arcs;
        for (a, t) in arcs.iter_mut().zip(v) {
            a.start = Phase::from_f64(a.start).add(t).to_f64();
        }
        Box3 { arcs }
    }
}
