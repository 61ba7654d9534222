//! Measure-preserving maps of T^3 and samplers for their invariant measures.

use crate::error::Result;
use crate::torus::{Box3, Phase, TorusPoint};
use rand::{Rng, RngCore};

pub trait TorusMap: Sync {
    fn apply(&self, p: TorusPoint) -> Result<TorusPoint>;

    fn apply_inverse(&self, p: TorusPoint) -> Result<TorusPoint>;

    /// The translation vector when the map is a translation.
    fn translation(&self) -> Option<[Phase; 3]> {
        None
    }

    /// `T^k p` for any integer `k`.
    fn iterate(&self, p: TorusPoint, k: i64) -> Result<TorusPoint> {
        if let Some(v) = self.translation() {
            return Ok(TorusPoint { x: p.x.add(v[0].mul_int(k)), y: p.y.add(v[1].mul_int(k)), z: p.z.add(v[2].mul_int(k)) });
        }
        let mut q = p;
        for _ in 0..k.unsigned_abs() {
            q = if k > 0 { self.apply(q)? } else { self.apply_inverse(q)? };
        }
        Ok(q)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl TorusMap for Identity {
    fn apply(&self, p: TorusPoint) -> Result<TorusPoint> {
        Ok(p)
    }
    fn apply_inverse(&self, p: TorusPoint) -> Result<TorusPoint> {
        Ok(p)
    }
    fn translation(&self) -> Option<[Phase; 3]> {
        Some([Phase::ZERO; 3])
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Translation3 {
    pub v: [Phase; 3],
}

impl Translation3 {
    pub fn new(v: [f64; 3]) -> Translation3 {
        Translation3 { v: v.map(Phase::from_f64) }
    }
}

impl TorusMap for Translation3 {
    fn apply(&self, p: TorusPoint) -> Result<TorusPoint> {
        Ok(TorusPoint { x: p.x.add(self.v[0]), y: p.y.add(self.v[1]), z: p.z.add(self.v[2]) })
    }
    fn apply_inverse(&self, p: TorusPoint) -> Result<TorusPoint> {
        Ok(TorusPoint { x: p.x.sub(self.v[0]), y: p.y.sub(self.v[1]), z: p.z.sub(self.v[2]) })
    }
    fn translation(&self) -> Option<[Phase; 3]> {
        Some(self.v)
    }
}

pub trait Sampler: Sync {
    fn sample(&self, rng: &mut dyn RngCore) -> TorusPoint;

    /// Sample from the measure conditioned on `b`.
    fn sample_in_box(&self, b: &Box3, rng: &mut dyn RngCore) -> TorusPoint;

    /// Measure of a box in closed form.
    fn box_measure(&self, b: &Box3) -> f64;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Lebesgue;

pub(crate) fn uniform3(rng: &mut dyn RngCore) -> [f64; 3] {
    [rng.gen(), rng.gen(), rng.gen()]
}

impl Sampler for Lebesgue {
    fn sample(&self, rng: &mut dyn RngCore) -> TorusPoint {
        let u = uniform3(rng);
        TorusPoint::new(u[0], u[1], u[2])
    }

    fn sample_in_box(&self, b: &Box3, rng: &mut dyn RngCore) -> TorusPoint {
        b.point_at(uniform3(rng))
    }

    fn box_measure(&self, b: &Box3) -> f64 {
        b.volume()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translation_iterates_exactly() {
        let t = Translation3::new([0.25, 0.5, 0.125]);
        let p = TorusPoint::new(0.1, 0.2, 0.3);
        assert_eq!(t.iterate(p, 8).unwrap(), p);
        assert_eq!(t.iterate(p, -3).unwrap(), t.apply_inverse(t.apply_inverse(t.apply_inverse(p).unwrap()).unwrap()).unwrap());
        assert_eq!(Identity.iterate(p, 1000).unwrap(), p);
    }
}
