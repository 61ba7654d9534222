//! Roof functions `1 + P(x, y) + sum X_n(x) + sum Y_n(y)`.

pub mod plateau;

use crate::error::{invalid, Error, Result};
use crate::rotation::RotationSpec;
use crate::torus::{Arc, Phase};
use crate::trigpoly::TrigPoly;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;

pub use plateau::{
    build_p_mu_n, build_xi, select_eta, select_eta_for_q, KernelChoice, PlateauOptions, PlateauPoly, PlateauWidth,
    XiProfile,
};

/// `amp * cos(2 pi freq t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosTerm {
    pub n: usize,
    pub freq: u64,
    pub amp: f64,
}

impl CosTerm {
    /// `e^{-q} cos(2 pi q t)`; amplitudes below the smallest double vanish.
    pub fn exponential(n: usize, q: u64) -> CosTerm {
        CosTerm { n, freq: q, amp: (-(q as f64)).exp() }
    }

    fn active(&self) -> bool {
        self.amp != 0.0 && self.freq <= i64::MAX as u64
    }

    pub fn eval(&self, t: Phase) -> f64 {
        if !self.active() {
            return 0.0;
        }
        self.amp * t.mul_int(self.freq as i64).cos_2pi()
    }

    pub fn deriv(&self, t: Phase) -> f64 {
        if !self.active() {
            return 0.0;
        }
        -self.amp * TAU * self.freq as f64 * t.mul_int(self.freq as i64).sin_2pi()
    }

    pub fn poly(&self) -> TrigPoly {
        if !self.active() {
            return TrigPoly::zero(1);
        }
        TrigPoly::cosine(1, [self.freq as i64, 0], self.amp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XTerm {
    Cosine(CosTerm),
    Plateau(Box<PlateauPoly>),
}

impl XTerm {
    pub fn index(&self) -> usize {
        match self {
            XTerm::Cosine(c) => c.n,
            XTerm::Plateau(p) => p.n,
        }
    }

    pub fn eval(&self, x: Phase) -> f64 {
        match self {
            XTerm::Cosine(c) => c.eval(x),
            XTerm::Plateau(p) => p.eval(x),
        }
    }

    pub fn poly(&self) -> TrigPoly {
        match self {
            XTerm::Cosine(c) => c.poly(),
            XTerm::Plateau(p) => p.poly.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoofFunction {
    pub base: TrigPoly,
    pub x_terms: Vec<XTerm>,
    pub y_terms: Vec<CosTerm>,
    pub depth: usize,
    #[serde(skip)]
    x_deriv: Vec<Option<TrigPoly>>,
}

impl RoofFunction {
    /// The constant roof `1`.
    pub fn unit() -> RoofFunction {
        RoofFunction::from_poly(TrigPoly::zero(2))
    }

    /// `1 + base`.
    pub fn from_poly(base: TrigPoly) -> RoofFunction {
        RoofFunction::new(base.lift_if_needed(), Vec::new(), Vec::new(), 0)
    }

    fn new(base: TrigPoly, x_terms: Vec<XTerm>, y_terms: Vec<CosTerm>, depth: usize) -> RoofFunction {
        let x_deriv = x_terms
            .iter()
            .map(|t| match t {
                XTerm::Plateau(p) => Some(p.poly.derivative(0)),
                XTerm::Cosine(_) => None,
            })
            .collect();
        RoofFunction { base, x_terms, y_terms, depth, x_deriv }
    }

    pub fn eval_phase(&self, t: [Phase; 2]) -> f64 {
        let mut v = 1.0 + self.base.evaluate_phase(t);
        for term in &self.x_terms {
            v += term.eval(t[0]);
        }
        for term in &self.y_terms {
            v += term.eval(t[1]);
        }
        v
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.eval_phase([Phase::from_f64(x), Phase::from_f64(y)])
    }

    /// Sum of the terms depending on `x` only.
    pub fn eval_x_part(&self, x: Phase) -> f64 {
        self.x_terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn dx(&self, t: [Phase; 2]) -> f64 {
        let mut v = if self.base.is_zero() { 0.0 } else { self.base.derivative(0).evaluate_phase(t) };
        for (term, d) in self.x_terms.iter().zip(&self.x_deriv) {
            v += match (term, d) {
                (XTerm::Cosine(c), _) => c.deriv(t[0]),
                (XTerm::Plateau(_), Some(d)) => d.evaluate_phase([t[0], Phase::ZERO]),
                (XTerm::Plateau(p), None) => p.poly.derivative(0).evaluate_phase([t[0], Phase::ZERO]),
            };
        }
        v
    }

    pub fn dy(&self, t: [Phase; 2]) -> f64 {
        let mut v = if self.base.is_zero() { 0.0 } else { self.base.derivative(1).evaluate_phase(t) };
        for c in &self.y_terms {
            v += c.deriv(t[1]);
        }
        v
    }

    /// Integral over T^2.
    pub fn average(&self) -> f64 {
        1.0 + self.base.average()
    }

    /// Sum of sup norms of the oscillating parts.
    pub fn oscillation(&self) -> f64 {
        let base = self.base.norm_bound(0) - self.base.average().abs();
        let xs: f64 = self.x_terms.iter().map(|t| t.poly().norm_bound(0)).sum();
        let ys: f64 = self.y_terms.iter().map(|c| c.amp.abs()).sum();
        base + xs + ys
    }

    pub fn lower_bound(&self) -> f64 {
        self.average() - self.oscillation()
    }

    pub fn upper_bound(&self) -> f64 {
        self.average() + self.oscillation()
    }

    /// Minimum over a `g x g` grid with its location.
    pub fn grid_min(&self, g: usize) -> (f64, f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..g {
            for j in 0..g {
                let (x, y) = (i as f64 / g as f64, j as f64 / g as f64);
                let v = self.eval(x, y);
                if v < best.0 {
                    best = (v, x, y);
                }
            }
        }
        best
    }

    /// Strict positivity on a 100 x 100 grid.
    pub fn check_positive(&self) -> Result<()> {
        if self.lower_bound() > 0.0 {
            return Ok(());
        }
        let (v, x, y) = self.grid_min(100);
        if v > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidRoof { x, y, value: v })
        }
    }

    /// The whole roof as one polynomial on T^2.
    pub fn to_trig_poly(&self) -> TrigPoly {
        let mut p = self.base.add(&TrigPoly::constant(2, 1.0));
        for t in &self.x_terms {
            p = p.add(&t.poly().lift(0));
        }
        for c in &self.y_terms {
            p = p.add(&c.poly().lift(1));
        }
        p
    }

    /// `int_{x in ax, y in ay} roof(x + shift_x, y + shift_y)`.
    pub fn box_integral(&self, ax: &Arc, ay: &Arc, shift: [Phase; 2]) -> f64 {
        let ix = |k: i64| arc_exp_integral(ax, k, shift[0]);
        let iy = |k: i64| arc_exp_integral(ay, k, shift[1]);
        let mut total = Complex64::new(ax.len * ay.len, 0.0);
        for (k, p) in self.base.coeffs() {
            total += p * ix(k[0]) * iy(k[1]);
        }
        for t in &self.x_terms {
            for (k, p) in t.poly().coeffs() {
                total += p * ix(k[0]) * ay.len;
            }
        }
        for c in &self.y_terms {
            for (k, p) in c.poly().coeffs() {
                total += p * iy(k[0]) * ax.len;
            }
        }
        total.re
    }

    pub fn plateau(&self, n: usize) -> Option<&PlateauPoly> {
        self.x_terms.iter().find_map(|t| match t {
            XTerm::Plateau(p) if p.n == n => Some(p.as_ref()),
            _ => None,
        })
    }

    /// Restores derivative caches after deserialization.
    pub fn rebuild(self) -> RoofFunction {
        RoofFunction::new(self.base, self.x_terms, self.y_terms, self.depth)
    }
}

/// `int_arc e^{2 pi i k (t + shift)} dt`.
fn arc_exp_integral(arc: &Arc, k: i64, shift: Phase) -> Complex64 {
    if k == 0 {
        return Complex64::new(arc.len, 0.0);
    }
    if arc.len >= 1.0 {
        return Complex64::new(0.0, 0.0);
    }
    let a = Phase::from_f64(arc.start).add(shift).mul_int(k);
    let b = Phase::from_f64(arc.start).add(Phase::from_f64(arc.len)).add(shift).mul_int(k);
    let e = |p: Phase| Complex64::new(p.cos_2pi(), p.sin_2pi());
    (e(b) - e(a)) / Complex64::new(0.0, TAU * k as f64)
}

trait LiftIfNeeded {
    fn lift_if_needed(self) -> TrigPoly;
}

impl LiftIfNeeded for TrigPoly {
    fn lift_if_needed(self) -> TrigPoly {
        if self.dim() == 2 {
            self
        } else {
            self.lift(0)
        }
    }
}

/// `1 + base + sum_{n <= depth} (X_n or its substitute)(x) + Y_n(y)`.
pub fn assemble_roof(
    spec: &RotationSpec,
    base: &TrigPoly,
    substitutions: BTreeMap<usize, PlateauPoly>,
    depth: usize,
) -> Result<RoofFunction> {
    let avail = spec.x.depth().min(spec.y.depth());
    if depth > avail {
        return Err(invalid(format!("depth {depth} exceeds the {avail} available levels")));
    }
    if !base.is_zero_average() {
        return Err(invalid("base polynomial must have zero average"));
    }
    let mut subs = substitutions;
    for (n, p) in &subs {
        if *n == 0 || *n > depth {
            return Err(invalid(format!("substitution index {n} outside 1..={depth}")));
        }
        if p.n != *n || spec.x.q_u64(*n) != Some(p.q) {
            return Err(invalid(format!("substitution at {n} was built for a different return time")));
        }
    }
    let mut x_terms = Vec::new();
    let mut y_terms = Vec::new();
    for n in 1..=depth {
        x_terms.push(match subs.remove(&n) {
            Some(p) => XTerm::Plateau(Box::new(p)),
            None => XTerm::Cosine(CosTerm::exponential(n, spec.x.q_u64(n).unwrap_or(u64::MAX))),
        });
        y_terms.push(CosTerm::exponential(n, spec.y.q_u64(n).unwrap_or(u64::MAX)));
    }
    let roof = RoofFunction::new(base.clone().lift_if_needed(), x_terms, y_terms, depth);
    roof.check_positive()?;
    Ok(roof)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::build_rotation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec() -> RotationSpec {
        build_rotation(&[3, 50, 2], &[7, 3, 2], 256).unwrap()
    }

    #[test]
    fn depth_zero_is_unit() {
        let r = assemble_roof(&spec(), &TrigPoly::zero(2), BTreeMap::new(), 0).unwrap();
        assert_eq!(r.eval(0.3, 0.7), 1.0);
        assert_eq!(r.average(), 1.0);
    }

    #[test]
    fn evaluation_matches_termwise_oracle() {
        let s = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = TrigPoly::random_zero_average(2, 3, &mut rng).scale(0.05);
        let r = assemble_roof(&s, &base, BTreeMap::new(), 2).unwrap();
        let poly = r.to_trig_poly();
        for _ in 0..200 {
            let (x, y): (f64, f64) = (rng.gen(), rng.gen());
            let mut oracle = 1.0 + base.evaluate([x, y]);
            for n in 1..=2 {
                let q = s.x.q_f64(n);
                let qp = s.y.q_f64(n);
                oracle += (-q).exp() * (TAU * q * x).cos() + (-qp).exp() * (TAU * qp * y).cos();
            }
            assert!((r.eval(x, y) - oracle).abs() < 1e-12);
            assert!((poly.evaluate([x, y]) - oracle).abs() < 1e-12);
        }
        assert!((r.average() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_positive_roof_rejected() {
        let base = TrigPoly::cosine(2, [1, 0], 1.5);
        match assemble_roof(&spec(), &base, BTreeMap::new(), 1) {
            Err(Error::InvalidRoof { value, .. }) => assert!(value <= 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn substitution_differs_only_at_its_modes() {
        let s = spec();
        let p = build_p_mu_n(&s, 1, 0.05, &PlateauOptions { check_tail: false, ..Default::default() }).unwrap();
        let q_next = p.q_next as i64;
        let plain = assemble_roof(&s, &TrigPoly::zero(2), BTreeMap::new(), 2).unwrap();
        let subbed = assemble_roof(&s, &TrigPoly::zero(2), BTreeMap::from([(1, p.clone())]), 2).unwrap();
        let diff = subbed.to_trig_poly().sub(&plain.to_trig_poly());
        assert!(diff.degree() <= q_next);
        assert!(diff.coeffs().keys().all(|k| k[1] == 0));
        // Triangle inequality for the perturbation.
        let direct = p.poly.sub(&CosTerm::exponential(1, p.q).poly());
        for r in 0..3 {
            assert!(diff.norm_bound(r) <= direct.norm_bound(r) * (1.0 + 1e-12));
        }
        assert!(subbed.plateau(1).is_some());
    }

    #[test]
    fn box_integral_against_quadrature() {
        let s = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let base = TrigPoly::random_zero_average(2, 2, &mut rng).scale(0.05);
        let r = assemble_roof(&s, &base, BTreeMap::new(), 1).unwrap();
        let ax = Arc::new(0.9, 1.2);
        let ay = Arc::new(0.1, 0.35);
        let shift = [Phase::from_f64(0.37), Phase::from_f64(0.61)];
        let n = 400;
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = ax.start + (i as f64 + 0.5) / n as f64 * ax.len;
                let y = ay.start + (j as f64 + 0.5) / n as f64 * ay.len;
                quad += r.eval(x + 0.37, y + 0.61);
            }
        }
        quad *= ax.len * ay.len / (n * n) as f64;
        assert!((quad - r.box_integral(&ax, &ay, shift)).abs() < 1e-5);
        let full = r.box_integral(&Arc::full(), &Arc::full(), shift);
        assert!((full - r.average()).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let s = spec();
        let p = build_p_mu_n(&s, 1, 0.05, &PlateauOptions { check_tail: false, ..Default::default() }).unwrap();
        let r = assemble_roof(&s, &TrigPoly::cosine(2, [1, 1], 0.1), BTreeMap::from([(1, p)]), 2).unwrap();
        let h = 1e-6;
        for (x, y) in [(0.1, 0.2), (0.33, 0.9), (0.71, 0.05)] {
            let t = [Phase::from_f64(x), Phase::from_f64(y)];
            let fdx = (r.eval(x + h, y) - r.eval(x - h, y)) / (2.0 * h);
            let fdy = (r.eval(x, y + h) - r.eval(x, y - h)) / (2.0 * h);
            assert!((fdx - r.dx(t)).abs() < 1e-5, "{fdx} {}", r.dx(t));
            assert!((fdy - r.dy(t)).abs() < 1e-5);
        }
    }

    #[test]
    fn json_round_trip() {
        let r = assemble_roof(&spec(), &TrigPoly::cosine(2, [0, 1], 0.2), BTreeMap::new(), 2).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        let back: RoofFunction = serde_json::from_str::<RoofFunction>(&s).unwrap().rebuild();
        assert_eq!(back, r);
    }
}
