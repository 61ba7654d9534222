//! Special flow over the translation of T^2 and its normalized time-one map.

use crate::error::{invalid, Error, Result};
use crate::maps::{uniform3, Sampler, TorusMap};
use crate::mc::{self, Estimate};
use crate::roof::RoofFunction;
use crate::rotation::RotationSpec;
use crate::sum::Neumaier;
use crate::torus::{Box3, Phase, TorusPoint};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Heights this close to the roof are wrapped to the next base point.
pub const WRAP_TOL: f64 = 1e-14;
pub const DEFAULT_CAP: u64 = 100_000_000;

/// Point `(x, y, s)` of the suspension with `0 <= s < roof(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowPoint {
    pub x: Phase,
    pub y: Phase,
    pub s: f64,
}

impl FlowPoint {
    pub fn base(&self) -> [Phase; 2] {
        [self.x, self.y]
    }
}

#[derive(Clone, Debug)]
pub struct SpecialFlow {
    pub roof: Arc<RoofFunction>,
    pub omega: [Phase; 2],
    pub cap: u64,
}

impl SpecialFlow {
    pub fn new(roof: Arc<RoofFunction>, spec: &RotationSpec) -> SpecialFlow {
        SpecialFlow { roof, omega: spec.omega(), cap: DEFAULT_CAP }
    }

    pub fn roof_at(&self, t: [Phase; 2]) -> f64 {
        self.roof.eval_phase(t)
    }

    fn step(&self, t: [Phase; 2], forward: bool) -> [Phase; 2] {
        if forward {
            [t[0].add(self.omega[0]), t[1].add(self.omega[1])]
        } else {
            [t[0].sub(self.omega[0]), t[1].sub(self.omega[1])]
        }
    }

    /// Least `n` with `t + s < S_{n+1} roof(x, y)`.
    pub fn return_count(&self, t: f64, p: FlowPoint) -> Result<u64> {
        if !(t >= 0.0) {
            return Err(invalid(format!("return count needs t >= 0, got {t}")));
        }
        let target = t + p.s;
        let mut sum = Neumaier::default();
        let mut theta = p.base();
        let mut n = 0u64;
        sum.add(self.roof_at(theta));
        while target >= sum.value() {
            n += 1;
            if n > self.cap {
                return Err(Error::CapExceeded { cap: self.cap });
            }
            theta = self.step(theta, true);
            sum.add(self.roof_at(theta));
        }
        Ok(n)
    }

    /// Moves up the fibres from height `h` in direction `forward`,
    /// consuming one roof value per base step. Backward motion measures
    /// heights from the top of each fibre, which turns it into the same
    /// loop over the reflected suspension of the inverse translation.
    fn advance(&self, mut theta: [Phase; 2], h: f64, forward: bool) -> Result<([Phase; 2], f64, f64)> {
        let mut acc = Neumaier::default();
        acc.add(h);
        let mut n = 0u64;
        loop {
            let f = self.roof_at(theta);
            let rem = acc.value();
            let leave = if forward { rem >= f - WRAP_TOL } else { rem > f };
            if !leave {
                return Ok((theta, rem, f));
            }
            acc.add(-f);
            theta = self.step(theta, forward);
            n += 1;
            if n > self.cap {
                return Err(Error::CapExceeded { cap: self.cap });
            }
        }
    }

    pub fn flow(&self, t: f64, p: FlowPoint) -> Result<FlowPoint> {
        if t >= 0.0 {
            let (theta, rem, _) = self.advance(p.base(), p.s + t, true)?;
            Ok(FlowPoint { x: theta[0], y: theta[1], s: rem.max(0.0) })
        } else {
            let top = self.roof_at(p.base()) - p.s;
            let (theta, rem, f) = self.advance(p.base(), top - t, false)?;
            let s = f - rem;
            if s >= f - WRAP_TOL {
                let next = self.step(theta, true);
                Ok(FlowPoint { x: next[0], y: next[1], s: 0.0 })
            } else {
                Ok(FlowPoint { x: theta[0], y: theta[1], s: s.max(0.0) })
            }
        }
    }

    /// Representative with `0 <= s < roof`.
    pub fn canonical(&self, p: FlowPoint) -> Result<FlowPoint> {
        self.flow(0.0, p)
    }
}

/// Where the roof is read when a point of T^3 is lifted to the suspension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// Roof at the translated base point; a bijection onto the suspension.
    #[default]
    Translated,
    /// Roof at the source base point, as in the printed formula.
    Source,
}

/// `G = Phi^{-1} o Psi^1 o Phi` acting on T^3.
#[derive(Clone, Debug)]
pub struct NormalizedMap {
    pub flow: SpecialFlow,
    pub anchor: Anchor,
}

fn below_one(z: f64) -> f64 {
    if z >= 1.0 {
        1.0 - f64::EPSILON / 2.0
    } else {
        z.max(0.0)
    }
}

impl NormalizedMap {
    pub fn new(roof: Arc<RoofFunction>, spec: &RotationSpec, anchor: Anchor) -> Result<NormalizedMap> {
        roof.check_positive()?;
        Ok(NormalizedMap { flow: SpecialFlow::new(roof, spec), anchor })
    }

    pub fn lift(&self, p: TorusPoint) -> Result<FlowPoint> {
        let f = &self.flow;
        let src = [p.x, p.y];
        let dst = f.step(src, true);
        let z = p.z.to_f64();
        match self.anchor {
            Anchor::Translated => Ok(FlowPoint { x: dst[0], y: dst[1], s: z * f.roof_at(dst) }),
            Anchor::Source => f.canonical(FlowPoint { x: dst[0], y: dst[1], s: z * f.roof_at(src) }),
        }
    }

    pub fn project(&self, q: FlowPoint) -> TorusPoint {
        let f = &self.flow;
        let src = f.step(q.base(), false);
        let z = match self.anchor {
            Anchor::Translated => below_one(q.s / f.roof_at(q.base())),
            Anchor::Source => (q.s / f.roof_at(src)).fract(),
        };
        TorusPoint { x: src[0], y: src[1], z: Phase::from_f64(z) }
    }

    pub fn time(&self, p: TorusPoint, t: f64) -> Result<TorusPoint> {
        let q = self.flow.flow(t, self.lift(p)?)?;
        Ok(self.project(q))
    }

    /// Density of the invariant measure at a base point, up to `1 / int roof`.
    pub fn density(&self, t: [Phase; 2]) -> f64 {
        match self.anchor {
            Anchor::Translated => self.flow.roof_at(self.flow.step(t, true)),
            Anchor::Source => self.flow.roof_at(t),
        }
    }

    pub fn sampler(&self) -> InvariantSampler {
        InvariantSampler { map: self.clone(), bound: self.flow.roof.upper_bound(), total: self.flow.roof.average() }
    }
}

impl TorusMap for NormalizedMap {
    fn apply(&self, p: TorusPoint) -> Result<TorusPoint> {
        self.time(p, 1.0)
    }

    fn apply_inverse(&self, p: TorusPoint) -> Result<TorusPoint> {
        self.time(p, -1.0)
    }
}

pub fn time_one_normalized(p: TorusPoint, map: &NormalizedMap) -> Result<TorusPoint> {
    map.apply(p)
}

/// Rejection sampler for the invariant measure of a [`NormalizedMap`].
#[derive(Clone, Debug)]
pub struct InvariantSampler {
    map: NormalizedMap,
    bound: f64,
    total: f64,
}

impl InvariantSampler {
    fn accept(&self, p: TorusPoint, rng: &mut dyn RngCore) -> bool {
        rng.gen::<f64>() * self.bound < self.map.density([p.x, p.y])
    }
}

impl Sampler for InvariantSampler {
    fn sample(&self, rng: &mut dyn RngCore) -> TorusPoint {
        self.sample_in_box(&Box3::full(), rng)
    }

    fn sample_in_box(&self, b: &Box3, rng: &mut dyn RngCore) -> TorusPoint {
        loop {
            let p = b.point_at(uniform3(rng));
            if self.accept(p, rng) {
                return p;
            }
        }
    }

    fn box_measure(&self, b: &Box3) -> f64 {
        let shift = match self.map.anchor {
            Anchor::Translated => self.map.flow.omega,
            Anchor::Source => [Phase::ZERO; 2],
        };
        b.arcs[2].len * self.map.flow.roof.box_integral(&b.arcs[0], &b.arcs[1], shift) / self.total
    }
}

/// Monte Carlo estimate of `mu(A)` as the fraction of invariant samples in `A`.
pub fn invariant_measure(sampler: &dyn Sampler, a: &Box3, samples: usize, seed: u64, label: &str) -> Result<Estimate> {
    if samples == 0 {
        return Err(invalid("samples must be positive"));
    }
    let hits: u64 = mc::chunked(samples, mc::DEFAULT_CHUNK, |c, _, n| {
        let mut rng = mc::stream(seed, label, c);
        (0..n).filter(|_| a.contains(sampler.sample(&mut rng))).count() as u64
    })
    .into_iter()
    .sum();
    Ok(Estimate::proportion(hits, samples as u64))
}

/// Estimate of `mu(G^{-k} A)`: fraction of invariant samples `p` with `G^k p` in `A`.
pub fn preimage_measure(
    map: &dyn TorusMap,
    sampler: &dyn Sampler,
    a: &Box3,
    k: i64,
    samples: usize,
    seed: u64,
    label: &str,
) -> Result<Estimate> {
    if samples == 0 {
        return Err(invalid("samples must be positive"));
    }
    let parts = mc::chunked(samples, mc::DEFAULT_CHUNK, |c, _, n| -> Result<u64> {
        let mut rng = mc::stream(seed, label, c);
        let mut hits = 0;
        for _ in 0..n {
            if a.contains(map.iterate(sampler.sample(&mut rng), k)?) {
                hits += 1;
            }
        }
        Ok(hits)
    });
    let hits = parts.into_iter().sum::<Result<u64>>()?;
    Ok(Estimate::proportion(hits, samples as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::Lebesgue;
    use crate::roof::assemble_roof;
    use crate::rotation::build_rotation;
    use crate::trigpoly::TrigPoly;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn spec() -> RotationSpec {
        build_rotation(&[1; 30], &[2; 20], 256).unwrap()
    }

    fn wavy() -> Arc<RoofFunction> {
        let s = build_rotation(&[1, 2, 2], &[2, 1, 3], 256).unwrap();
        let base = TrigPoly::cosine(2, [1, 1], 0.3).add(&TrigPoly::sine(2, [0, 1], 0.2));
        Arc::new(assemble_roof(&s, &base, BTreeMap::new(), 2).unwrap())
    }

    /// Direct summation oracle for the return count.
    fn naive_count(f: &SpecialFlow, t: f64, p: FlowPoint) -> u64 {
        let mut theta = p.base();
        let mut total = f.roof_at(theta);
        let mut n = 0;
        while t + p.s >= total {
            theta = f.step(theta, true);
            total += f.roof_at(theta);
            n += 1;
        }
        n
    }

    #[test]
    fn return_count_examples() {
        let unit = SpecialFlow::new(Arc::new(RoofFunction::unit()), &spec());
        let p = FlowPoint { x: Phase::from_f64(0.3), y: Phase::from_f64(0.6), s: 0.0 };
        assert_eq!(unit.return_count(0.0, p).unwrap(), 0);
        assert_eq!(unit.return_count(7.0, p).unwrap(), 7);
        let f = SpecialFlow::new(wavy(), &spec());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let x = Phase::from_f64(rng.gen());
            let y = Phase::from_f64(rng.gen());
            let s = rng.gen::<f64>() * f.roof_at([x, y]);
            let t = rng.gen::<f64>() * 20.0;
            let p = FlowPoint { x, y, s };
            assert_eq!(f.return_count(t, p).unwrap(), naive_count(&f, t, p));
        }
    }

    #[test]
    fn cap_is_enforced() {
        let mut f = SpecialFlow::new(Arc::new(RoofFunction::unit()), &spec());
        f.cap = 10;
        let p = FlowPoint { x: Phase::ZERO, y: Phase::ZERO, s: 0.0 };
        assert!(matches!(f.return_count(100.0, p), Err(Error::CapExceeded { cap: 10 })));
        assert!(matches!(f.flow(100.0, p), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn flow_is_a_semigroup_and_invertible() {
        let f = SpecialFlow::new(wavy(), &spec());
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..1000 {
            let x = Phase::from_f64(rng.gen());
            let y = Phase::from_f64(rng.gen());
            let p = FlowPoint { x, y, s: rng.gen::<f64>() * f.roof_at([x, y]) };
            let (t1, t2) = (rng.gen::<f64>() * 5.0, rng.gen::<f64>() * 5.0);
            let a = f.flow(t2, f.flow(t1, p).unwrap()).unwrap();
            let b = f.flow(t1 + t2, p).unwrap();
            assert_eq!(a.base(), b.base());
            assert!((a.s - b.s).abs() < 1e-10);
            let back = f.flow(-(t1 + t2), b).unwrap();
            assert_eq!(back.base(), p.base());
            assert!((back.s - p.s).abs() < 1e-10);
        }
    }

    #[test]
    fn short_flow_stays_in_fibre() {
        let f = SpecialFlow::new(wavy(), &spec());
        let p = FlowPoint { x: Phase::from_f64(0.2), y: Phase::from_f64(0.4), s: 0.1 };
        let top = f.roof_at(p.base());
        let q = f.flow(0.5 * (top - 0.1), p).unwrap();
        assert_eq!(q.base(), p.base());
        assert!((q.s - (0.1 + 0.5 * (top - 0.1))).abs() < 1e-15);
    }

    #[test]
    fn constant_roof_time_one_is_translation() {
        let s = spec();
        let unit = SpecialFlow::new(Arc::new(RoofFunction::unit()), &s);
        let p = FlowPoint { x: Phase::from_f64(0.3), y: Phase::from_f64(0.6), s: 0.25 };
        let q = unit.flow(1.0, p).unwrap();
        assert_eq!(q.base(), unit.step(p.base(), true));
        assert!((q.s - 0.25).abs() < 1e-15);

        let g = NormalizedMap::new(Arc::new(RoofFunction::unit()), &s, Anchor::Translated).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = s.omega();
        for _ in 0..1000 {
            let p = TorusPoint::new(rng.gen(), rng.gen(), rng.gen());
            let expect = TorusPoint { x: p.x.add(w[0]), y: p.y.add(w[1]), z: p.z };
            assert!(g.apply(p).unwrap().dist(expect) <= 1e-12);
        }
    }

    #[test]
    fn normalized_map_round_trip() {
        let g = NormalizedMap::new(wavy(), &spec(), Anchor::Translated).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut p = TorusPoint::new(0.1, 0.2, 0.3);
        for _ in 0..1000 {
            let q = TorusPoint::new(rng.gen(), rng.gen(), rng.gen());
            let back = g.apply_inverse(g.apply(q).unwrap()).unwrap();
            assert!(back.dist(q) < 1e-10);
            let lifted = g.lift(q).unwrap();
            assert!(g.project(lifted).dist(q) < 1e-12);
            p = g.apply(p).unwrap();
            assert!(p.z.to_f64() < 1.0);
        }
    }

    #[test]
    fn source_anchor_runs() {
        let g = NormalizedMap::new(wavy(), &spec(), Anchor::Source).unwrap();
        let p = g.apply(TorusPoint::new(0.4, 0.5, 0.9)).unwrap();
        assert!(p.z.to_f64() < 1.0);
    }

    #[test]
    fn measure_examples() {
        let g = NormalizedMap::new(wavy(), &spec(), Anchor::Translated).unwrap();
        let smp = g.sampler();
        let all = invariant_measure(&smp, &Box3::full(), 1000, 1, "t").unwrap();
        assert_eq!((all.value, all.std_err), (1.0, 0.0));
        assert!(invariant_measure(&smp, &Box3::full(), 0, 1, "t").is_err());

        let unit = NormalizedMap::new(Arc::new(RoofFunction::unit()), &spec(), Anchor::Translated).unwrap();
        let b = Box3::new((0.1, 0.4), (0.2, 0.7), (0.0, 0.5));
        let e = invariant_measure(&unit.sampler(), &b, 200_000, 2, "u").unwrap();
        assert!((e.value - b.volume()).abs() < 4.0 * e.std_err);
        assert!((unit.sampler().box_measure(&b) - b.volume()).abs() < 1e-15);
    }

    #[test]
    fn density_matches_pushforward() {
        // Uniform points of the suspension pulled back through the lift.
        let g = NormalizedMap::new(wavy(), &spec(), Anchor::Translated).unwrap();
        let roof = &g.flow.roof;
        let bound = roof.upper_bound();
        let b = Box3::new((0.2, 0.6), (0.1, 0.5), (0.3, 0.9));
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 400_000;
        let mut hits = 0;
        let mut accepted = 0;
        while accepted < n {
            let t = [Phase::from_f64(rng.gen()), Phase::from_f64(rng.gen())];
            let s = rng.gen::<f64>() * bound;
            if s >= roof.eval_phase(t) {
                continue;
            }
            accepted += 1;
            let p = g.project(FlowPoint { x: t[0], y: t[1], s });
            if b.contains(p) {
                hits += 1;
            }
        }
        let est = Estimate::proportion(hits, n as u64);
        let exact = g.sampler().box_measure(&b);
        assert!((est.value - exact).abs() < 4.0 * est.std_err, "{est:?} vs {exact}");
    }

    #[test]
    fn lebesgue_preserved_by_translation() {
        let t = crate::maps::Translation3::new([0.3, 0.1, 0.0]);
        let b = Box3::new((0.0, 0.5), (0.0, 0.5), (0.0, 1.0));
        let e = preimage_measure(&t, &Lebesgue, &b, 1, 50_000, 3, "p").unwrap();
        assert!((e.value - 0.25).abs() < 4.0 * e.std_err);
    }
}
