//! Real trigonometric polynomials on T^1 and T^2.

use crate::error::{invalid, Error, Result};
use crate::rotation::RotationSpec;
use crate::sum::Neumaier;
use crate::torus::Phase;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

pub const DEFAULT_RESONANCE_FLOOR: f64 = 1e-30;

/// Finitely supported Fourier series `sum p_k e^{2 pi i k.theta}` with
/// `p_{-k} = conj(p_k)`. For `dim == 1` every index has `k[1] == 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    dim: usize,
    coeffs: BTreeMap<[i64; 2], Complex64>,
    /// Indices with `k > 0` in lexicographic order and their doubled coefficients.
    half: Vec<([i64; 2], Complex64)>,
    /// Common step of the half-plane indices when `dim == 1`.
    step: i64,
}

fn neg(k: [i64; 2]) -> [i64; 2] {
    [-k[0], -k[1]]
}

fn positive(k: [i64; 2]) -> bool {
    k > [0, 0]
}

impl TrigPoly {
    pub fn zero(dim: usize) -> TrigPoly {
        TrigPoly::from_half(dim, 0.0, std::iter::empty())
    }

    pub fn constant(dim: usize, c: f64) -> TrigPoly {
        TrigPoly::from_half(dim, c, std::iter::empty())
    }

    /// Builds the real polynomial `c0 + sum 2 Re(p_k e^{2 pi i k.theta})`
    /// from coefficients on one half of the lattice. Entries with `k < 0`
    /// are folded onto `-k`; repeated indices accumulate.
    pub fn from_half(dim: usize, c0: f64, terms: impl IntoIterator<Item = ([i64; 2], Complex64)>) -> TrigPoly {
        assert!(dim == 1 || dim == 2, "dimension must be 1 or 2");
        let mut coeffs = BTreeMap::new();
        if c0 != 0.0 {
            coeffs.insert([0, 0], Complex64::new(c0, 0.0));
        }
        for (k, p) in terms {
            assert!(dim == 2 || k[1] == 0, "one-dimensional polynomial with k[1] != 0");
            if k == [0, 0] {
                *coeffs.entry(k).or_insert_with(Complex64::zero) += Complex64::new(p.re, 0.0);
                continue;
            }
            let (k, p) = if positive(k) { (k, p) } else { (neg(k), p.conj()) };
            *coeffs.entry(k).or_insert_with(Complex64::zero) += p;
            let c = *coeffs.get(&k).unwrap();
            coeffs.insert(neg(k), c.conj());
        }
        coeffs.retain(|_, v| *v != Complex64::zero());
        TrigPoly::from_map(dim, coeffs)
    }

    /// Builds from a full coefficient map. Fails when Hermitian symmetry is
    /// violated by more than `1e-12` relative to the largest coefficient.
    pub fn from_coeffs(dim: usize, coeffs: BTreeMap<[i64; 2], Complex64>) -> Result<TrigPoly> {
        if dim != 1 && dim != 2 {
            return Err(invalid(format!("dimension {dim} not in {{1, 2}}")));
        }
        let scale = coeffs.values().map(|c| c.norm()).fold(0.0, f64::max);
        for (k, p) in &coeffs {
            if dim == 1 && k[1] != 0 {
                return Err(invalid(format!("index {k:?} in a one-dimensional polynomial")));
            }
            let mirror = coeffs.get(&neg(*k)).copied().unwrap_or_default();
            if (mirror - p.conj()).norm() > 1e-12 * scale {
                return Err(invalid(format!("coefficients at {k:?} and its negative are not conjugate")));
            }
        }
        let mut map = BTreeMap::new();
        for (k, p) in coeffs {
            if positive(k) {
                map.insert(k, p);
                map.insert(neg(k), p.conj());
            } else if k == [0, 0] && p.re != 0.0 {
                map.insert(k, Complex64::new(p.re, 0.0));
            }
        }
        map.retain(|_, v| *v != Complex64::zero());
        Ok(TrigPoly::from_map(dim, map))
    }

    fn from_map(dim: usize, coeffs: BTreeMap<[i64; 2], Complex64>) -> TrigPoly {
        let half: Vec<_> = coeffs.iter().filter(|(k, _)| positive(**k)).map(|(k, p)| (*k, *p * 2.0)).collect();
        let step = half.iter().fold(0i64, |g, (k, _)| g.gcd(&k[0])).max(1);
        TrigPoly { dim, coeffs, half, step }
    }

    /// `amp * cos(2 pi k.theta)`.
    pub fn cosine(dim: usize, k: [i64; 2], amp: f64) -> TrigPoly {
        TrigPoly::from_half(dim, 0.0, [(k, Complex64::new(amp / 2.0, 0.0))])
    }

    /// `amp * sin(2 pi k.theta)`.
    pub fn sine(dim: usize, k: [i64; 2], amp: f64) -> TrigPoly {
        TrigPoly::from_half(dim, 0.0, [(k, Complex64::new(0.0, -amp / 2.0))])
    }

    /// Random real polynomial of degree at most `deg` with zero average and
    /// coefficients uniform in the unit square.
    pub fn random_zero_average<R: Rng>(dim: usize, deg: i64, rng: &mut R) -> TrigPoly {
        let mut terms = Vec::new();
        for k1 in -deg..=deg {
            let span = if dim == 2 { deg - k1.abs() } else { 0 };
            for k2 in -span..=span {
                let k = [k1, k2];
                if positive(k) {
                    terms.push((k, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
                }
            }
        }
        TrigPoly::from_half(dim, 0.0, terms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &BTreeMap<[i64; 2], Complex64> {
        &self.coeffs
    }

    pub fn coeff(&self, k: [i64; 2]) -> Complex64 {
        self.coeffs.get(&k).copied().unwrap_or_default()
    }

    pub fn degree(&self) -> i64 {
        self.coeffs.keys().map(|k| k[0].abs() + k[1].abs()).max().unwrap_or(0)
    }

    pub fn average(&self) -> f64 {
        self.coeff([0, 0]).re
    }

    pub fn is_zero_average(&self) -> bool {
        self.coeff([0, 0]) == Complex64::zero()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Terms with `k > 0` as `(k, 2 p_k)`.
    pub fn half_terms(&self) -> &[([i64; 2], Complex64)] {
        &self.half
    }

    pub fn evaluate(&self, theta: [f64; 2]) -> f64 {
        self.evaluate_phase([Phase::from_f64(theta[0]), Phase::from_f64(theta[1])])
    }

    pub fn evaluate_phase(&self, theta: [Phase; 2]) -> f64 {
        let mut acc = Neumaier::default();
        acc.add(self.average());
        if self.dim == 1 && self.half.len() > 8 {
            self.sum_recurrence(theta[0], |p, w| acc.add(p.re * w.re - p.im * w.im));
        } else {
            for (k, p) in &self.half {
                let (s, c) = unit(theta[0].mul_int(k[0]).add(theta[1].mul_int(k[1])));
                acc.add(p.re * c - p.im * s);
            }
        }
        acc.value()
    }

    /// Complex value of the full series; the imaginary part is rounding residue.
    pub fn evaluate_complex(&self, theta: [Phase; 2]) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(k, p)| {
                let (s, c) = unit(theta[0].mul_int(k[0]).add(theta[1].mul_int(k[1])));
                p * Complex64::new(c, s)
            })
            .sum()
    }

    /// Visits `(2 p_k, e^{2 pi i k x})` for one-dimensional terms, generating
    /// powers of `e^{2 pi i step x}` and resynchronizing exactly every 32 steps.
    fn sum_recurrence(&self, x: Phase, mut visit: impl FnMut(Complex64, Complex64)) {
        let base = x.mul_int(self.step);
        let (s, c) = unit(base);
        let w1 = Complex64::new(c, s);
        let mut j = 0i64;
        let mut w = Complex64::new(1.0, 0.0);
        let mut since_sync = 0;
        for (k, p) in &self.half {
            let target = k[0] / self.step;
            let gap = target - j;
            if gap > 32 || since_sync + gap > 32 {
                let (s, c) = unit(base.mul_int(target));
                w = Complex64::new(c, s);
                since_sync = 0;
            } else {
                for _ in 0..gap {
                    w *= w1;
                }
                since_sync += gap;
            }
            j = target;
            visit(*p, w);
        }
    }

    /// Partial derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> TrigPoly {
        assert!(axis < self.dim, "axis {axis} out of range");
        let map = self
            .coeffs
            .iter()
            .filter(|(k, _)| k[axis] != 0)
            .map(|(k, p)| (*k, p * Complex64::new(0.0, TAU * k[axis] as f64)))
            .collect();
        TrigPoly::from_map(self.dim, map)
    }

    /// `sum_k (2 pi |k|_1)^r |p_k|`, an upper bound on the sup of every
    /// derivative of total order `r`.
    pub fn norm_bound(&self, r: u32) -> f64 {
        self.coeffs
            .iter()
            .map(|(k, p)| (TAU * (k[0].abs() + k[1].abs()) as f64).powi(r as i32) * p.norm())
            .filter(|v| v.is_finite())
            .sum()
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        let mut map = self.coeffs.clone();
        for (k, p) in &other.coeffs {
            *map.entry(*k).or_insert_with(Complex64::zero) += p;
        }
        map.retain(|_, v| *v != Complex64::zero());
        TrigPoly::from_map(self.dim.max(other.dim), map)
    }

    pub fn scale(&self, c: f64) -> TrigPoly {
        let map = self.coeffs.iter().map(|(k, p)| (*k, p * c)).filter(|(_, p)| *p != Complex64::zero()).collect();
        TrigPoly::from_map(self.dim, map)
    }

    pub fn sub(&self, other: &TrigPoly) -> TrigPoly {
        self.add(&other.scale(-1.0))
    }

    /// Embeds a one-dimensional polynomial in T^2 as a function of `axis`.
    pub fn lift(&self, axis: usize) -> TrigPoly {
        let map = self.coeffs.iter().map(|(k, p)| (if axis == 0 { [k[0], 0] } else { [0, k[0]] }, *p)).collect();
        let mut out = TrigPoly::from_map(2, map);
        if axis == 1 {
            // Lexicographic order changes; rebuild the half list.
            out = TrigPoly::from_map(2, out.coeffs);
        }
        out
    }

    /// Solves `P = Q o R_omega - Q` coefficientwise.
    pub fn solve_cohomological(&self, spec: &RotationSpec, floor: f64) -> Result<TrigPoly> {
        if !self.is_zero_average() {
            return Err(invalid(format!("polynomial has nonzero average {}", self.average())));
        }
        let mut map = BTreeMap::new();
        for (k, p) in self.coeffs.iter().filter(|(k, _)| positive(**k)) {
            let d = shift_factor(spec, *k);
            let modulus = d.norm();
            if modulus < floor || modulus == 0.0 {
                return Err(Error::NearResonance { k: *k, modulus, floor });
            }
            let qk = p / d;
            map.insert(*k, qk);
            map.insert(neg(*k), qk.conj());
        }
        Ok(TrigPoly::from_map(self.dim, map))
    }

    /// `min(2 |Q|_r, |||m omega||| |Q|_{r+1})` with `Q` the transfer
    /// function and `|||m omega|||` the largest coordinate distance.
    pub fn birkhoff_bound(&self, spec: &RotationSpec, m: i64, r: u32, floor: f64) -> Result<f64> {
        let q = self.solve_cohomological(spec, floor)?;
        let shift = mw_norm(spec, m, self.dim);
        Ok((2.0 * q.norm_bound(r)).min(shift * q.norm_bound(r + 1)))
    }

    /// Largest `|||<k, omega>|||^{-1}` over `0 < |k|_1 <= deg`.
    pub fn small_divisor(&self, spec: &RotationSpec) -> f64 {
        let deg = self.degree();
        let mut worst = 0.0f64;
        for k1 in -deg..=deg {
            let span = if self.dim == 2 { deg - k1.abs() } else { 0 };
            for k2 in -span..=span {
                if positive([k1, k2]) {
                    worst = worst.max(1.0 / spec.k_dot_omega([k1, k2]).norm());
                }
            }
        }
        worst
    }
}

/// `|||m omega|||` using the larger of the coordinate distances that matter.
pub fn mw_norm(spec: &RotationSpec, m: i64, dim: usize) -> f64 {
    let x = spec.x.multiple(m).norm();
    if dim == 1 {
        x
    } else {
        x.max(spec.y.multiple(m).norm())
    }
}

/// `e^{2 pi i <k, omega>} - 1`, evaluated as `2i sin(pi t) e^{i pi t}` for accuracy near 0.
pub fn shift_factor(spec: &RotationSpec, k: [i64; 2]) -> Complex64 {
    let t = spec.k_dot_omega(k).to_signed_f64();
    let s = 2.0 * (PI * t).sin();
    Complex64::new(0.0, s) * Complex64::new((PI * t).cos(), (PI * t).sin())
}

/// Bridge constant between coefficient sums and `C^r` norms.
pub fn bridge_constant(dim: usize, r: u32) -> f64 {
    let lattice_sum = if dim == 1 { PI * PI / 3.0 } else { 2.0 * PI * PI / 3.0 };
    (TAU.powi(r as i32) * lattice_sum).ceil()
}

fn unit(p: Phase) -> (f64, f64) {
    (TAU * p.to_signed_f64()).sin_cos()
}

/// `sum_{j<m} f(theta + j omega)` with compensated summation.
pub fn birkhoff_sum<F: Fn([Phase; 2]) -> f64>(f: F, spec: &RotationSpec, m: u64, theta: [Phase; 2]) -> f64 {
    let w = spec.omega();
    let mut pos = theta;
    let mut acc = Neumaier::default();
    for _ in 0..m {
        acc.add(f(pos));
        pos = [pos[0].add(w[0]), pos[1].add(w[1])];
    }
    acc.value()
}

#[derive(Serialize, Deserialize)]
struct CoeffJson {
    k: [i64; 2],
    re: f64,
    im: f64,
}

impl Serialize for TrigPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<CoeffJson> = self.coeffs.iter().map(|(k, p)| CoeffJson { k: *k, re: p.re, im: p.im }).collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TrigPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<CoeffJson>::deserialize(d)?;
        let dim = if v.iter().any(|c| c.k[1] != 0) { 2 } else { 1 };
        let map = v.into_iter().map(|c| (c.k, Complex64::new(c.re, c.im))).collect();
        TrigPoly::from_coeffs(dim, map).map_err(serde::de::Error::custom)
    }
}
