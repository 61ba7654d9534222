//! Rotation vectors given by continued fractions, their return times and
//! exact iteration of the translation they define.

use crate::error::{invalid, Result};
use crate::torus::{Phase, TorusPoint};
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub const DEFAULT_PRECISION_BITS: u32 = 256;

/// Convergents of `[0; a_1, ..., a_N]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Convergents {
    quotients: Vec<u64>,
    p: Vec<BigUint>,
    q: Vec<BigUint>,
    omega: Phase,
}

impl Convergents {
    pub fn new(quotients: &[u64]) -> Result<Convergents> {
        if quotients.is_empty() {
            return Err(invalid("empty partial-quotient list"));
        }
        if let Some(i) = quotients.iter().position(|&a| a == 0) {
            return Err(invalid(format!("partial quotient #{} is zero", i + 1)));
        }
        let (mut p, mut q) = (vec![BigUint::zero()], vec![BigUint::one()]);
        let (mut p_prev, mut q_prev) = (BigUint::one(), BigUint::zero());
        for &a in quotients {
            let pn = p.last().unwrap() * a + &p_prev;
            let qn = q.last().unwrap() * a + &q_prev;
            p_prev = p.last().unwrap().clone();
            q_prev = q.last().unwrap().clone();
            p.push(pn);
            q.push(qn);
        }
        let omega = ratio_phase(p.last().unwrap(), q.last().unwrap());
        Ok(Convergents { quotients: quotients.to_vec(), p, q, omega })
    }

    pub fn quotients(&self) -> &[u64] {
        &self.quotients
    }

    /// Index of the last convergent, which equals the number of quotients.
    pub fn depth(&self) -> usize {
        self.quotients.len()
    }

    pub fn q(&self, n: usize) -> &BigUint {
        &self.q[n]
    }

    pub fn p(&self, n: usize) -> &BigUint {
        &self.p[n]
    }

    pub fn q_u64(&self, n: usize) -> Option<u64> {
        self.q.get(n).and_then(|v| v.to_u64())
    }

    pub fn q_f64(&self, n: usize) -> f64 {
        big_to_f64(&self.q[n])
    }

    /// Numerator and denominator of the truncated limit.
    pub fn limit(&self) -> (&BigUint, &BigUint) {
        (self.p.last().unwrap(), self.q.last().unwrap())
    }

    pub fn omega(&self) -> Phase {
        self.omega
    }

    /// `|q_n Omega - p_n|` as an exact fraction over `q_N`.
    pub fn beta_exact(&self, n: usize) -> (BigUint, BigUint) {
        let (pn, qn) = self.limit();
        let a = &self.q[n] * pn;
        let b = &self.p[n] * qn;
        let num = if a >= b { a - b } else { b - a };
        (num, qn.clone())
    }

    pub fn beta(&self, n: usize) -> f64 {
        let (num, den) = self.beta_exact(n);
        big_ratio_f64(&num, &den)
    }

    /// `k * Omega mod 1` as a reduced residue over `q_N`.
    pub fn multiple_residue(&self, k: i64) -> BigUint {
        let (pn, qn) = self.limit();
        let r = (pn * k.unsigned_abs()) % qn;
        if k < 0 && !r.is_zero() {
            qn - r
        } else {
            r
        }
    }

    pub fn multiple(&self, k: i64) -> Phase {
        ratio_phase(&self.multiple_residue(k), self.limit().1)
    }
}

/// Rotation vector `(Omega, Omega')` of T^2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RotationJson", into = "RotationJson")]
pub struct RotationSpec {
    pub x: Convergents,
    pub y: Convergents,
    pub precision_bits: u32,
}

#[derive(Serialize, Deserialize)]
struct RotationJson {
    pq_x: Vec<u64>,
    pq_y: Vec<u64>,
    #[serde(default = "default_bits")]
    precision_bits: u32,
}

fn default_bits() -> u32 {
    DEFAULT_PRECISION_BITS
}

impl TryFrom<RotationJson> for RotationSpec {
    type Error = crate::Error;
    fn try_from(j: RotationJson) -> Result<Self> {
        build_rotation(&j.pq_x, &j.pq_y, j.precision_bits)
    }
}

impl From<RotationSpec> for RotationJson {
    fn from(s: RotationSpec) -> Self {
        RotationJson { pq_x: s.x.quotients.clone(), pq_y: s.y.quotients.clone(), precision_bits: s.precision_bits }
    }
}

pub fn build_rotation(pq_x: &[u64], pq_y: &[u64], precision_bits: u32) -> Result<RotationSpec> {
    if precision_bits < 64 {
        return Err(invalid(format!("precision_bits = {precision_bits} is below 64")));
    }
    Ok(RotationSpec { x: Convergents::new(pq_x)?, y: Convergents::new(pq_y)?, precision_bits })
}

impl RotationSpec {
    pub fn omega(&self) -> [Phase; 2] {
        [self.x.omega(), self.y.omega()]
    }

    /// `<k, omega> mod 1`, rounded once from the exact rational.
    pub fn k_dot_omega(&self, k: [i64; 2]) -> Phase {
        let (num, den) = self.k_dot_omega_exact(k);
        ratio_phase(&num, &den)
    }

    /// `<k, omega> mod 1` as `num / den` with `0 <= num < den`.
    pub fn k_dot_omega_exact(&self, k: [i64; 2]) -> (BigUint, BigUint) {
        let (_, qx) = self.x.limit();
        let (_, qy) = self.y.limit();
        let den = qx * qy;
        let num = (self.x.multiple_residue(k[0]) * qy + self.y.multiple_residue(k[1]) * qx) % &den;
        (num, den)
    }

    /// Translation by `m * omega`; the third coordinate is untouched.
    pub fn rotate(&self, point: TorusPoint, m: i64) -> TorusPoint {
        TorusPoint { x: point.x.add(self.x.multiple(m)), y: point.y.add(self.y.multiple(m)), z: point.z }
    }

    /// Translation of one coordinate held at `precision_bits` binary digits.
    pub fn rotate_fixed(&self, axis: usize, x: &FixedPhase, m: i64) -> FixedPhase {
        let c = if axis == 0 { &self.x } else { &self.y };
        let step = FixedPhase::from_ratio(&c.multiple_residue(m), c.limit().1, x.bits);
        x.add(&step)
    }
}

/// Point of R/Z stored as `value / 2^bits`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedPhase {
    pub value: BigUint,
    pub bits: u32,
}

impl FixedPhase {
    pub fn from_phase(p: Phase, bits: u32) -> FixedPhase {
        let v = BigUint::from(p.0);
        let value = if bits >= 128 { v << (bits - 128) } else { v >> (128 - bits) };
        FixedPhase { value, bits }
    }

    /// Nearest multiple of `2^-bits` to `num / den` mod 1.
    pub fn from_ratio(num: &BigUint, den: &BigUint, bits: u32) -> FixedPhase {
        let scaled = (num << (bits + 1)) / den;
        let rounded = (scaled + 1u32) >> 1;
        FixedPhase { value: rounded % (BigUint::one() << bits), bits }
    }

    pub fn add(&self, o: &FixedPhase) -> FixedPhase {
        FixedPhase { value: (&self.value + &o.value) % (BigUint::one() << self.bits), bits: self.bits }
    }

    pub fn to_phase(&self) -> Phase {
        let v = if self.bits >= 128 {
            let half = if self.bits > 128 { BigUint::one() << (self.bits - 129) } else { BigUint::zero() };
            ((&self.value + half) >> (self.bits - 128)) % (BigUint::one() << 128u32)
        } else {
            &self.value << (128 - self.bits)
        };
        Phase(v.to_u128().unwrap_or(0))
    }

    pub fn to_f64(&self) -> f64 {
        self.to_phase().to_f64()
    }
}

/// Distance from `x` to the nearest integer.
pub fn dist_to_integers(x: f64) -> f64 {
    (x - x.round()).abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum GrowthModel {
    /// `q'_n >= e^{3 q_n}` and `q_{n+1} >= e^{3 q'_n}`.
    Paper,
    /// `q'_n >= g q_n` and `q_{n+1} >= g q'_n`.
    Surrogate { g: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthLevel {
    pub n: usize,
    pub q: String,
    pub q_prime: String,
    pub q_next: Option<String>,
    pub first: bool,
    /// `None` when `q_{n+1}` is beyond the supplied quotients.
    pub second: Option<bool>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub model: GrowthModel,
    pub levels: Vec<GrowthLevel>,
}

impl GrowthReport {
    pub fn all_pass(&self) -> bool {
        self.levels.iter().all(|l| l.pass)
    }
}

/// Checks the growth inequalities at levels `1..=depth`.
pub fn check_growth(spec: &RotationSpec, model: GrowthModel, depth: usize) -> Result<GrowthReport> {
    let avail = spec.x.depth().min(spec.y.depth());
    if depth > avail {
        return Err(invalid(format!("depth {depth} exceeds the {avail} available quotient levels")));
    }
    if let GrowthModel::Surrogate { g } = model {
        if !(g > 1.0) {
            return Err(invalid(format!("surrogate growth factor {g} must exceed 1")));
        }
    }
    let at_least = |big: &BigUint, small: &BigUint| match model {
        GrowthModel::Paper => big_ln(big) >= 3.0 * big_to_f64(small),
        GrowthModel::Surrogate { g } => big_ln(big) >= g.ln() + big_ln(small),
    };
    let levels = (1..=depth)
        .map(|n| {
            let (q, qp) = (spec.x.q(n), spec.y.q(n));
            let first = at_least(qp, q);
            let q_next = (n < spec.x.depth()).then(|| spec.x.q(n + 1));
            let second = q_next.map(|qn| at_least(qn, qp));
            GrowthLevel {
                n,
                q: q.to_string(),
                q_prime: qp.to_string(),
                q_next: q_next.map(|v| v.to_string()),
                first,
                second,
                pass: first && second.unwrap_or(true),
            }
        })
        .collect();
    Ok(GrowthReport { model, levels })
}

pub(crate) fn ratio_phase(num: &BigUint, den: &BigUint) -> Phase {
    FixedPhase::from_ratio(num, den, 128).to_phase()
}

pub fn big_to_f64(v: &BigUint) -> f64 {
    v.to_f64().unwrap_or(f64::INFINITY)
}

fn big_ratio_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = den.bits().saturating_sub(num.bits()) as i32 + 64;
    let scaled = (num << shift as usize) / den;
    big_to_f64(&scaled) * 2f64.powi(-shift)
}

/// Natural logarithm of an arbitrarily large integer.
pub fn big_ln(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits <= 1000 {
        return big_to_f64(v).ln();
    }
    let shift = bits - 64;
    big_to_f64(&(v >> shift as usize)).ln() + shift as f64 * std::f64::consts::LN_2
}

/// `gcd(a, b) == 1`.
pub fn coprime(a: u64, b: u64) -> bool {
    a.gcd(&b) == 1
}
