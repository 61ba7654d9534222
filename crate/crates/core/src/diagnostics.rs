//! Mixing diagnostics: decay of correlations between boxes and the
//! derivative lower bounds for Birkhoff sums of the roof.

use crate::error::{invalid, Error, Result};
use crate::flow::DEFAULT_CAP;
use crate::maps::{Sampler, TorusMap};
use crate::mc::{self, Estimate};
use crate::roof::{RoofFunction, XTerm};
use crate::rotation::{big_to_f64, RotationSpec};
use crate::torus::{Box3, Phase};
use crate::trigpoly::TrigPoly;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPoint {
    pub lag: u64,
    /// `mu(A ∩ T^{-lag} B)`.
    pub joint: Estimate,
    /// `joint - mu(A) mu(B)`.
    pub signed: f64,
    /// `|signed|`, with the standard error of `joint`.
    pub value: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub a: Box3,
    pub b: Box3,
    pub mu_a: f64,
    pub mu_b: f64,
    pub samples: usize,
    pub seed: u64,
    pub points: Vec<CorrelationPoint>,
}

/// Estimates `|mu(A ∩ T^{-n} B) - mu(A) mu(B)|` at each lag by pushing
/// invariant samples forward once through the largest lag.
pub fn correlation(
    map: &dyn TorusMap,
    sampler: &dyn Sampler,
    a: &Box3,
    b: &Box3,
    lags: &[u64],
    samples: usize,
    seed: u64,
) -> Result<CorrelationSeries> {
    if samples == 0 {
        return Err(invalid("samples must be positive"));
    }
    if lags.is_empty() || lags.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("lags must be non-empty and strictly increasing"));
    }
    let translation = map.translation().is_some();
    let counts = mc::chunked(samples, 4096, |c, _, len| -> Result<Vec<u64>> {
        let mut rng = mc::stream(seed, "diag/correlation", c);
        let mut hits = vec![0u64; lags.len()];
        for _ in 0..len {
            let p = sampler.sample(&mut rng);
            if !a.contains(p) {
                continue;
            }
            if translation {
                for (h, &lag) in hits.iter_mut().zip(lags) {
                    if b.contains(map.iterate(p, lag as i64)?) {
                        *h += 1;
                    }
                }
                continue;
            }
            let mut q = p;
            let mut at = 0u64;
            for (h, &lag) in hits.iter_mut().zip(lags) {
                q = map.iterate(q, (lag - at) as i64)?;
                at = lag;
                if b.contains(q) {
                    *h += 1;
                }
            }
        }
        Ok(hits)
    });
    let mut total = vec![0u64; lags.len()];
    for c in counts {
        for (t, h) in total.iter_mut().zip(c?) {
            *t += h;
        }
    }
    let (mu_a, mu_b) = (sampler.box_measure(a), sampler.box_measure(b));
    let points = lags
        .iter()
        .zip(total)
        .map(|(&lag, hits)| {
            let joint = Estimate::proportion(hits, samples as u64);
            let signed = joint.value - mu_a * mu_b;
            CorrelationPoint { lag, joint, signed, value: Estimate { value: signed.abs(), ..joint } }
        })
        .collect();
    Ok(CorrelationSeries { a: *a, b: *b, mu_a, mu_b, samples, seed, points })
}

/// `sum_{j < m} e^{2 pi i j t}` from the exact phase `t`.
pub fn geometric_sum(t: Phase, m: u64) -> Complex64 {
    if t == Phase::ZERO {
        return Complex64::new(m as f64, 0.0);
    }
    let chord = |p: Phase| {
        let s = p.to_signed_f64();
        Complex64::new(0.0, 2.0 * (PI * s).sin()) * Complex64::new((PI * s).cos(), (PI * s).sin())
    };
    chord(t.mul_int(m as i64)) / chord(t)
}

/// `S_m f(theta) = sum_{j<m} f(theta + j omega)` in closed form.
pub fn birkhoff_closed_form(poly: &TrigPoly, spec: &RotationSpec, m: u64, theta: [Phase; 2]) -> f64 {
    let mut total = poly.average() * m as f64;
    for (k, c) in poly.half_terms() {
        let k2 = if poly.dim() == 2 { k[1] } else { 0 };
        let phase = theta[0].mul_int(k[0]).add(theta[1].mul_int(k2));
        let e = Complex64::new(phase.cos_2pi(), phase.sin_2pi());
        let g = geometric_sum(spec.k_dot_omega([k[0], k2]), m);
        total += (c * e * g).re;
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Cosine,
    Plateau,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionOptions {
    /// Grid size along the checked axis.
    pub grid: usize,
    /// Grid size along the other axis.
    pub cross_grid: usize,
    /// Overrides the excluded half-width on the x side.
    pub r_x: Option<f64>,
    pub r_y: Option<f64>,
    pub cap: u64,
}

impl Default for CriterionOptions {
    fn default() -> Self {
        CriterionOptions { grid: 512, cross_grid: 8, r_x: None, r_y: None, cap: DEFAULT_CAP }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisMargin {
    /// Smallest `|d S_m roof|` over the admissible grid.
    pub min_abs: f64,
    pub at: [f64; 2],
    pub bound: f64,
    pub ratio: f64,
    pub points: usize,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MMargin {
    pub m: u64,
    /// Whether `m` lies in `[e^{2q}/2, 2 e^{2q'}]`.
    pub in_range_x: bool,
    /// Whether `m` lies in `[e^{2q}/2, 2 e^{2q_{n+1}}]`.
    pub in_range_y: bool,
    pub x: AxisMargin,
    pub y: AxisMargin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub n: usize,
    pub q: u64,
    pub q_prime: u64,
    pub kind: TermKind,
    pub r_x: f64,
    pub r_y: f64,
    /// Centres in `{q t}` of the two excluded intervals, each of length `2r`.
    pub excluded_x: [f64; 2],
    pub excluded_y: [f64; 2],
    /// `ln` of the endpoints of the admissible `m` range for the x check.
    pub ln_range_x: [f64; 2],
    pub ln_range_y: [f64; 2],
    pub margins: Vec<MMargin>,
    pub pass: bool,
}

fn near(u: f64, centres: [f64; 2], r: f64) -> bool {
    centres.iter().any(|c| {
        let d = (u - c).rem_euclid(1.0);
        d.min(1.0 - d) <= r
    })
}

/// Checks `|d_x S_m roof| >= (m / e^q)(q / n)` where `{q x}` avoids the
/// excluded intervals, and the analogue in `y` with `q'`.
pub fn check_mixing_criterion(
    roof: &RoofFunction,
    spec: &RotationSpec,
    n: usize,
    m_list: &[u64],
    opts: &CriterionOptions,
) -> Result<CriterionReport> {
    if n == 0 || n > roof.depth {
        return Err(invalid(format!("index {n} outside the constructed depth 1..={}", roof.depth)));
    }
    if m_list.is_empty() || opts.grid == 0 || opts.cross_grid == 0 {
        return Err(invalid("m list and grids must be non-empty"));
    }
    if m_list.iter().any(|&m| m > opts.cap) {
        return Err(Error::CapExceeded { cap: opts.cap });
    }
    let q = spec.x.q_u64(n).ok_or_else(|| invalid("q_n does not fit in 64 bits"))?;
    let qp = spec.y.q_u64(n).ok_or_else(|| invalid("q'_n does not fit in 64 bits"))?;
    let (kind, r_default) = match &roof.x_terms[n - 1] {
        XTerm::Plateau(p) => (TermKind::Plateau, 5.0 * p.mu),
        XTerm::Cosine(_) => (TermKind::Cosine, 1.0 / n as f64),
    };
    let r_x = opts.r_x.unwrap_or(r_default);
    let r_y = opts.r_y.unwrap_or(1.0 / n as f64);
    let excluded_x = match kind {
        TermKind::Plateau => [0.25, 0.75],
        TermKind::Cosine => [0.0, 0.5],
    };
    let excluded_y = [0.0, 0.5];

    let poly = roof.to_trig_poly();
    let (dx, dy) = (poly.derivative(0), poly.derivative(1));
    let grid = |g: usize| (0..g).map(move |i| (i as f64 + 0.5) / g as f64);
    let xs: Vec<f64> = grid(opts.grid).filter(|x| !near((q as f64 * x).fract(), excluded_x, r_x)).collect();
    let ys: Vec<f64> = grid(opts.grid).filter(|y| !near((qp as f64 * y).fract(), excluded_y, r_y)).collect();
    let cross: Vec<f64> = grid(opts.cross_grid).collect();

    let axis = |poly: &TrigPoly, m: u64, main: &[f64], x_axis: bool, bound: f64| -> AxisMargin {
        let rows = mc::par_map(main, |&t| {
            let mut best = (f64::INFINITY, [0.0, 0.0]);
            for &s in &cross {
                let (x, y) = if x_axis { (t, s) } else { (s, t) };
                let v = birkhoff_closed_form(poly, spec, m, [Phase::from_f64(x), Phase::from_f64(y)]).abs();
                if v < best.0 {
                    best = (v, [x, y]);
                }
            }
            best
        });
        let (min_abs, at) = rows.into_iter().fold((f64::INFINITY, [0.0, 0.0]), |a, b| if b.0 < a.0 { b } else { a });
        let points = main.len() * cross.len();
        AxisMargin { min_abs, at, bound, ratio: min_abs / bound, points, pass: points > 0 && min_abs >= bound }
    };
    let ln_q = |v: u64| v as f64;
    let ln_range_x = [2.0 * ln_q(q) - 2f64.ln(), 2.0 * ln_q(qp) + 2f64.ln()];
    let ln_next = if n < spec.x.depth() { 2.0 * big_to_f64(spec.x.q(n + 1)) } else { f64::INFINITY };
    let ln_range_y = [2.0 * ln_q(q) - 2f64.ln(), ln_next + 2f64.ln()];
    let margins: Vec<MMargin> = m_list
        .iter()
        .map(|&m| {
            let lm = (m as f64).ln();
            let bx = m as f64 * (-(q as f64)).exp() * q as f64 / n as f64;
            let by = m as f64 * (-(qp as f64)).exp() * qp as f64 / n as f64;
            MMargin {
                m,
                in_range_x: lm >= ln_range_x[0] && lm <= ln_range_x[1],
                in_range_y: lm >= ln_range_y[0] && lm <= ln_range_y[1],
                x: axis(&dx, m, &xs, true, bx),
                y: axis(&dy, m, &ys, false, by),
            }
        })
        .collect();
    let pass = margins.iter().all(|m| m.x.pass && m.y.pass);
    Ok(CriterionReport {
        n,
        q,
        q_prime: qp,
        kind,
        r_x,
        r_y,
        excluded_x,
        excluded_y,
        ln_range_x,
        ln_range_y,
        margins,
        pass,
    })
}
