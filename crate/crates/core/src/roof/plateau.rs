//! Plateau polynomials: mollified trapezoid waves with flat tops at `+eta`
//! and `-eta`, truncated to a prescribed degree.
//!
//! Everything is expressed in the reduced variable `u = {q x}`. The profile
//! is odd and 1-periodic in `u`: a ramp of slope 1 on `[0, 1/4 - w]`, a flat
//! top of half-width `w` centred at `u = 1/4`, and a descending ramp that
//! reaches 0 at `u = 1/2`.

use crate::error::{invalid, Error, Result};
use crate::rotation::RotationSpec;
use crate::torus::Phase;
use crate::trigpoly::TrigPoly;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Smallest `1/eta` in the window `[(4/3) e^q / q, 2 e^q / q]` that is a
/// multiple of `2q`.
pub fn select_eta_for_q(q: u64) -> Result<u64> {
    if q == 0 {
        return Err(invalid("q must be positive"));
    }
    let qf = q as f64;
    let (lo, hi) = (4.0 / 3.0 * qf.exp() / qf, 2.0 * qf.exp() / qf);
    let step = 2 * q;
    if hi > 2f64.powi(53) {
        return Err(invalid(format!("q = {q} is too large for an exact 1/eta")));
    }
    let candidate = (lo / step as f64).ceil() as u64 * step;
    if (candidate as f64) <= hi {
        Ok(candidate)
    } else {
        Err(Error::NoFeasibleEta { q, lo, hi, step })
    }
}

/// `1/eta_n` for the `n`-th return time of the first coordinate.
pub fn select_eta(spec: &RotationSpec, n: usize) -> Result<u64> {
    let q = spec.x.q_u64(n).filter(|_| n <= spec.x.depth()).ok_or_else(|| invalid(format!("no return time q_{n}")))?;
    select_eta_for_q(q)
}

/// `q e^{-q} / 2 <= eta <= 3 q e^{-q} / 4`.
pub fn eta_in_bracket(q: u64, eta: f64) -> bool {
    let base = q as f64 * (-(q as f64)).exp();
    base / 2.0 <= eta && eta <= 0.75 * base
}

/// The unmollified profile `xi` at scale `q` with plateau half-width `w`
/// (in units of `u`) and plateau height `eta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiProfile {
    pub q: u64,
    pub width: f64,
    pub eta: f64,
}

impl XiProfile {
    /// Normalized trapezoid in `u`, before scaling by `4 eta / (1 - 4w)`.
    pub fn shape(&self, u: f64) -> f64 {
        let u = u.rem_euclid(1.0);
        let (sign, v) = if u <= 0.5 { (1.0, u) } else { (-1.0, 1.0 - u) };
        let top = 0.25 - self.width;
        let val = if v <= top {
            v
        } else if v < 0.25 + self.width {
            top
        } else {
            0.5 - v
        };
        sign * val
    }

    pub fn amplitude(&self) -> f64 {
        4.0 * self.eta / (1.0 - 4.0 * self.width)
    }

    pub fn eval_u(&self, u: f64) -> f64 {
        self.amplitude() * self.shape(u)
    }

    /// The profile as a `1/q`-periodic function of `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_u(Phase::from_f64(x).mul_int(self.q as i64).to_f64())
    }

    /// Unscaled sine coefficient of `sin(2 pi j u)` in the trapezoid.
    pub fn sine_coefficient(&self, j: u64) -> f64 {
        let c1 = 0.25 - self.width;
        let c2 = 0.25 + self.width;
        let jf = j as f64;
        let d = TAU * jf;
        4.0 * ((d * c1).sin() + (d * c2).sin()) / (d * d)
    }
}

/// Profile with the literal plateau half-width `mu`.
pub fn build_xi(spec: &RotationSpec, n: usize, mu: f64, eta: f64) -> Result<XiProfile> {
    if !(mu > 0.0 && mu < 0.25) {
        return Err(invalid(format!("mu = {mu} must lie in (0, 1/4)")));
    }
    let q = spec.x.q_u64(n).ok_or_else(|| invalid(format!("no return time q_{n}")))?;
    Ok(XiProfile { q, width: mu, eta })
}

/// Unit-mass bump `exp(-1/(1-t^2))` on `(-1, 1)`.
#[derive(Clone, Copy, Debug)]
pub struct Bump {
    norm: f64,
}

impl Bump {
    fn raw(t: f64) -> f64 {
        if t.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - t * t)).exp()
        }
    }

    pub fn new() -> Bump {
        let n = 1 << 12;
        let h = 2.0 / n as f64;
        let total: f64 = (1..n).map(|i| Bump::raw(-1.0 + i as f64 * h)).sum::<f64>() * h;
        Bump { norm: total }
    }

    pub fn normalizer(&self) -> f64 {
        self.norm
    }

    pub fn eval(&self, t: f64) -> f64 {
        Bump::raw(t) / self.norm
    }

    /// Trapezoid rule for `int K(t) cos(2 pi nu t) dt` with `points` intervals.
    fn transform_with(&self, nu: f64, points: usize) -> f64 {
        let h = 2.0 / points as f64;
        let half = points / 2;
        let mut s = 0.5 * self.eval(0.0);
        for i in 1..half {
            let t = i as f64 * h;
            s += self.eval(t) * (TAU * nu * t).cos();
        }
        2.0 * h * s
    }

    /// Fourier transforms at each `nu`, refining until two successive grids
    /// agree to `tol`. Returns values and the achieved tolerance.
    pub fn transform(&self, nus: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
        let mut points = 256usize;
        let mut prev: Vec<f64> = nus.iter().map(|&nu| self.transform_with(nu, points)).collect();
        loop {
            points *= 2;
            let cur: Vec<f64> = nus.iter().map(|&nu| self.transform_with(nu, points)).collect();
            let diff = prev.iter().zip(&cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if diff <= tol {
                return Ok((cur, diff));
            }
            if points >= 1 << 18 {
                return Err(Error::NumericFailure { achieved: diff, required: tol });
            }
            prev = cur;
        }
    }
}

impl Default for Bump {
    fn default() -> Self {
        Bump::new()
    }
}

/// Dilation of the mollifier: `K_n(x) = s q K(s q x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelChoice {
    /// `s = n^2`.
    IndexSquared,
    /// `s = max(n^2, 4/mu)`, narrow enough to keep the plateau and ramps
    /// intact on the checked regions.
    Auto,
    Factor { s: f64 },
}

impl KernelChoice {
    pub fn scale(&self, n: usize, mu: f64) -> f64 {
        let n2 = (n * n) as f64;
        match *self {
            KernelChoice::IndexSquared => n2,
            KernelChoice::Auto => n2.max(4.0 / mu),
            KernelChoice::Factor { s } => s,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlateauWidth {
    /// Half-width `mu`.
    Literal,
    /// Half-width `3.5 mu`, covering the `3 mu` plateau region plus the
    /// mollifier spread.
    Widened,
    Custom { w: f64 },
}

impl PlateauWidth {
    pub fn half_width(&self, mu: f64) -> f64 {
        match *self {
            PlateauWidth::Literal => mu,
            PlateauWidth::Widened => 3.5 * mu,
            PlateauWidth::Custom { w } => w,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauOptions {
    pub kernel: KernelChoice,
    pub width: PlateauWidth,
    /// Smoothness order for the norm margin.
    pub r: u32,
    pub kernel_tol: f64,
    pub check_tail: bool,
}

impl Default for PlateauOptions {
    fn default() -> Self {
        PlateauOptions {
            kernel: KernelChoice::Auto,
            width: PlateauWidth::Widened,
            r: 0,
            kernel_tol: 1e-14,
            check_tail: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauReport {
    pub zero_average: bool,
    pub inv_eta_multiple: bool,
    pub eta_bracket: bool,
    /// `NormBound(P, r)` against `e^{-3q/4}`.
    pub norm: Margin,
    /// Largest `|P -/+ eta|` on the plateau regions against `e^{3q/4}/q_{n+1}`.
    pub plateau: Margin,
    /// Smallest signed slope on the ramp regions against `q^2 e^{-q}`.
    pub slope: Margin,
    /// `sup |X - P|` on a grid, `X` computed by direct convolution.
    pub tail: Option<Margin>,
    pub kernel_tolerance: f64,
    pub flagged: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauPoly {
    pub n: usize,
    pub q: u64,
    pub q_next: u64,
    pub mu: f64,
    pub width: f64,
    pub eta: f64,
    pub inv_eta: u64,
    pub kernel_scale: f64,
    pub poly: TrigPoly,
    pub report: PlateauReport,
}

impl PlateauPoly {
    pub fn eval(&self, x: Phase) -> f64 {
        self.poly.evaluate_phase([x, Phase::ZERO])
    }

    pub fn profile(&self) -> XiProfile {
        XiProfile { q: self.q, width: self.width, eta: self.eta }
    }

    /// Mollified profile `X(u)` by direct quadrature of the convolution.
    pub fn mollified(&self, u: f64) -> f64 {
        mollified(&self.profile(), self.kernel_scale, u)
    }
}

fn mollified(xi: &XiProfile, s: f64, u: f64) -> f64 {
    // In u-units the kernel has support (-1/s, 1/s).
    let bump = Bump::new();
    let n = 20_000;
    let h = 2.0 / n as f64;
    (1..n)
        .map(|i| {
            let t = -1.0 + i as f64 * h;
            bump.eval(t) * xi.eval_u(u - t / s)
        })
        .sum::<f64>()
        * h
}

/// Which part of the period `u` lies in, relative to the plateau centres
/// `1/4` and `3/4`.
pub fn plateau_sign(u: f64, radius: f64) -> Option<f64> {
    let d = |c: f64| {
        let v = (u - c).rem_euclid(1.0);
        v.min(1.0 - v)
    };
    if d(0.25) < radius {
        Some(1.0)
    } else if d(0.75) < radius {
        Some(-1.0)
    } else {
        None
    }
}

/// `+1` on the rising ramp around `u = 0`, `-1` on the falling ramp around
/// `u = 1/2`, `None` within `radius` of a plateau centre.
pub fn slope_sign(u: f64, radius: f64) -> Option<f64> {
    let d = |c: f64| {
        let v = (u - c).rem_euclid(1.0);
        v.min(1.0 - v)
    };
    if d(0.25).min(d(0.75)) <= radius {
        None
    } else if d(0.0) < 0.25 {
        Some(1.0)
    } else {
        Some(-1.0)
    }
}

/// Builds the plateau polynomial at index `n` with parameter `mu`.
pub fn build_p_mu_n(spec: &RotationSpec, n: usize, mu: f64, opts: &PlateauOptions) -> Result<PlateauPoly> {
    if n == 0 || n >= spec.x.depth() {
        return Err(invalid(format!("index {n} needs q_{n} and q_{} among the supplied quotients", n + 1)));
    }
    let width = opts.width.half_width(mu);
    if !(mu > 0.0 && width < 0.25) {
        return Err(invalid(format!("mu = {mu} gives plateau half-width {width}, outside (0, 1/4)")));
    }
    if matches!(opts.width, PlateauWidth::Widened) && mu >= 1.0 / 16.0 {
        return Err(invalid(format!("mu = {mu} must be below 1/16 for the widened plateau")));
    }
    let q = spec.x.q_u64(n).ok_or_else(|| invalid("q_n too large"))?;
    let q_next = spec.x.q(n + 1).to_u64().filter(|&v| v / q <= 1 << 20).ok_or_else(|| {
        invalid(format!("q_{} = {} is beyond desk scale", n + 1, spec.x.q(n + 1)))
    })?;
    let inv_eta = select_eta_for_q(q)?;
    let eta = 1.0 / inv_eta as f64;
    let xi = XiProfile { q, width, eta };
    let s = opts.kernel.scale(n, mu);

    let harmonics = (q_next - 1) / q;
    let bump = Bump::new();
    let nus: Vec<f64> = (1..=harmonics).map(|j| j as f64 / s).collect();
    let (khat, achieved) = bump.transform(&nus, opts.kernel_tol)?;
    let amp = xi.amplitude();
    let terms = (1..=harmonics).map(|j| {
        let b = amp * xi.sine_coefficient(j) * khat[(j - 1) as usize];
        ([(j * q) as i64, 0], Complex64::new(0.0, -b / 2.0))
    });
    let poly = TrigPoly::from_half(1, 0.0, terms);

    let mut out = PlateauPoly {
        n,
        q,
        q_next,
        mu,
        width,
        eta,
        inv_eta,
        kernel_scale: s,
        poly,
        report: PlateauReport {
            zero_average: false,
            inv_eta_multiple: false,
            eta_bracket: false,
            norm: Margin { value: 0.0, bound: 0.0, pass: false, points: 0 },
            plateau: Margin { value: 0.0, bound: 0.0, pass: false, points: 0 },
            slope: Margin { value: 0.0, bound: 0.0, pass: false, points: 0 },
            tail: None,
            kernel_tolerance: achieved,
            flagged: Vec::new(),
        },
    };
    out.report = measure(&out, opts, achieved);
    Ok(out)
}

fn measure(p: &PlateauPoly, opts: &PlateauOptions, achieved: f64) -> PlateauReport {
    let q = p.q as f64;
    let qf = p.q_next as f64;
    let norm_val = p.poly.norm_bound(opts.r);
    let norm_bound = (-0.75 * q).exp();
    let plateau_bound = (0.75 * q).exp() / qf;
    let slope_bound = q * q * (-q).exp();

    // P is 1/q-periodic, so a grid in u of 32 q_{n+1}/q points has the same
    // spacing as 32 q_{n+1} points in x.
    let grid = (32 * p.q_next).div_ceil(p.q) as usize;
    let deriv = p.poly.derivative(0);
    let mut dev = 0.0f64;
    let mut dev_pts = 0;
    let mut slope = f64::INFINITY;
    let mut slope_pts = 0;
    for i in 0..grid {
        let u = (i as f64 + 0.5) / grid as f64;
        let x = [Phase::from_f64(u / q), Phase::ZERO];
        if let Some(sign) = plateau_sign(u, 3.0 * p.mu) {
            dev = dev.max((p.poly.evaluate_phase(x) - sign * p.eta).abs());
            dev_pts += 1;
        }
        if let Some(sign) = slope_sign(u, 4.0 * p.mu) {
            slope = slope.min(sign * deriv.evaluate_phase(x));
            slope_pts += 1;
        }
    }
    let tail = opts.check_tail.then(|| {
        let pts = 256;
        let sup = (0..pts)
            .map(|i| {
                let u = (i as f64 + 0.25) / pts as f64;
                (p.mollified(u) - p.poly.evaluate_phase([Phase::from_f64(u / q), Phase::ZERO])).abs()
            })
            .fold(0.0, f64::max);
        Margin { value: sup, bound: plateau_bound, pass: sup <= plateau_bound, points: pts }
    });
    let mut r = PlateauReport {
        zero_average: p.poly.is_zero_average(),
        inv_eta_multiple: p.inv_eta % (2 * p.q) == 0,
        eta_bracket: eta_in_bracket(p.q, p.eta),
        norm: Margin { value: norm_val, bound: norm_bound, pass: norm_val <= norm_bound, points: 0 },
        plateau: Margin { value: dev, bound: plateau_bound, pass: dev <= plateau_bound, points: dev_pts },
        slope: Margin { value: slope, bound: slope_bound, pass: slope >= slope_bound, points: slope_pts },
        tail,
        kernel_tolerance: achieved,
        flagged: Vec::new(),
    };
    let checks = [
        ("zero average", r.zero_average),
        ("1/eta multiple of 2q", r.inv_eta_multiple),
        ("eta bracket", r.eta_bracket),
        ("norm", r.norm.pass),
        ("plateau", r.plateau.pass),
        ("slope", r.slope.pass),
        ("tail", r.tail.map_or(true, |t| t.pass)),
    ];
    r.flagged = checks.iter().filter(|(_, ok)| !ok).map(|(s, _)| s.to_string()).collect();
    r
}

/// `int K_n` and the support radius of `K_n` at scale `s q`.
pub fn kernel_mass(s: f64, q: u64) -> (f64, f64) {
    let bump = Bump::new();
    let a = s * q as f64;
    let n = 1 << 14;
    let r = 1.0 / a;
    let h = 2.0 * r / n as f64;
    let mass = (1..n).map(|i| a * bump.eval(a * (-r + i as f64 * h))).sum::<f64>() * h;
    (mass, r)
}
