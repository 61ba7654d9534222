//! Rokhlin towers over box bases: disjointness, precision, colouring by a
//! partition, product towers, the explicit towers of the plateau
//! perturbation, schedules for the loose-Bernoulli recursion and
//! tower-assisted matching of names.

use crate::error::{invalid, Error, Result};
use crate::flow::NormalizedMap;
use crate::maps::{Sampler, TorusMap};
use crate::mc::{self, Estimate, Moments};
use crate::rotation::{coprime, RotationSpec};
use crate::symbolic::{lcs_dp, match_count, p_name, CubePartition, Word};
use crate::torus::{Box3, Phase, TorusPoint};
use crate::trigpoly::birkhoff_sum;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RokhlinTower {
    pub base: Box3,
    pub height: u64,
}

impl RokhlinTower {
    pub fn new(base: Box3, height: u64) -> Result<RokhlinTower> {
        if height == 0 {
            return Err(invalid("tower height must be at least 1"));
        }
        Ok(RokhlinTower { base, height })
    }

    /// `h mu(F)`, the measure of the support when the levels are disjoint.
    pub fn size(&self, sampler: &dyn Sampler) -> f64 {
        self.height as f64 * sampler.box_measure(&self.base)
    }

    /// Level of `p` in `0..height`, found by walking backwards to the base.
    pub fn level_of(&self, map: &dyn TorusMap, p: TorusPoint) -> Result<Option<u64>> {
        let mut q = p;
        for k in 0..self.height {
            if self.base.contains(q) {
                return Ok(Some(k));
            }
            if k + 1 < self.height {
                q = map.apply_inverse(q)?;
            }
        }
        Ok(None)
    }

    /// Level of `T p` given the level of `p`; exact once levels are disjoint.
    pub fn next_level(&self, level: Option<u64>, next: TorusPoint) -> Option<u64> {
        match level {
            Some(k) if k + 1 < self.height => Some(k + 1),
            _ => self.base.contains(next).then_some(0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refutation {
    pub point: [f64; 3],
    pub step: u64,
    pub sample: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisjointnessCertificate {
    pub pass: bool,
    pub samples: usize,
    pub seed: u64,
    pub refutation: Option<Refutation>,
    pub note: String,
}

/// Looks for a sampled base point that returns to the base within `h - 1`
/// steps. A pass is evidence only.
pub fn verify_disjointness(
    map: &dyn TorusMap,
    sampler: &dyn Sampler,
    tower: &RokhlinTower,
    samples: usize,
    seed: u64,
) -> Result<DisjointnessCertificate> {
    if samples == 0 {
        return Err(invalid("samples must be positive"));
    }
    let chunk = 4096;
    let found = mc::chunked(samples, chunk, |c, start, len| -> Result<Option<Refutation>> {
        let mut rng = mc::stream(seed, "tower/disjoint", c);
        for i in 0..len {
            let p = sampler.sample_in_box(&tower.base, &mut rng);
            let mut q = p;
            for step in 1..tower.height {
                q = map.apply(q)?;
                if tower.base.contains(q) {
                    return Ok(Some(Refutation { point: p.to_f64(), step, sample: start + i }));
                }
            }
        }
        Ok(None)
    });
    let mut refutation = None;
    for f in found {
        if let Some(r) = f? {
            refutation = Some(r);
            break;
        }
    }
    let note = match &refutation {
        Some(r) => format!("base point returns to the base after {} steps", r.step),
        None => format!("no return within {} steps among {samples} samples; not a proof", tower.height.saturating_sub(1)),
    };
    Ok(DisjointnessCertificate { pass: refutation.is_none(), samples, seed, refutation, note })
}

/// `mu(F triangle T^h F) = 2 mu(F) P(T^h x not in F | x in F)`.
pub fn precision(map: &dyn TorusMap, sampler: &dyn Sampler, tower: &RokhlinTower, samples: usize, seed: u64) -> Result<Estimate> {
    if samples == 0 {
        return Err(invalid("samples must be positive"));
    }
    let parts = mc::chunked(samples, mc::DEFAULT_CHUNK, |c, _, len| -> Result<u64> {
        let mut rng = mc::stream(seed, "tower/precision", c);
        let mut exits = 0;
        for _ in 0..len {
            let p = sampler.sample_in_box(&tower.base, &mut rng);
            if !tower.base.contains(map.iterate(p, tower.height as i64)?) {
                exits += 1;
            }
        }
        Ok(exits)
    });
    let exits = parts.into_iter().sum::<Result<u64>>()?;
    Ok(Estimate::proportion(exits, samples as u64).scale(2.0 * sampler.box_measure(&tower.base)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonochromReport {
    /// Label `I(k)` for each level.
    pub labels: Vec<u32>,
    /// Estimated `mu(T^k F minus P_{I(k)}) / mu(F)` for each level.
    pub escape: Vec<f64>,
    /// `Delta` from the level assignment.
    pub delta: Estimate,
    /// Independent estimate of the measure of the difference set.
    pub difference_set: Estimate,
    /// Labels of the induced partition: `label -> levels`.
    pub induced: BTreeMap<u32, Vec<u64>>,
}

impl MonochromReport {
    /// `|delta - difference_set|` in units of the combined standard error.
    pub fn z_score(&self) -> f64 {
        let se = self.delta.std_err.hypot(self.difference_set.std_err);
        let gap = (self.delta.value - self.difference_set.value).abs();
        if se == 0.0 {
            if gap == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            gap / se
        }
    }
}

/// Colours each level by its majority cell, smallest label on ties, and
/// measures the escaping mass two ways: along sampled tower orbits, and by
/// locating independent samples of the whole space in the tower.
pub fn monochromaticity(
    map: &dyn TorusMap,
    sampler: &dyn Sampler,
    tower: &RokhlinTower,
    part: &CubePartition,
    samples: usize,
    seed: u64,
) -> Result<MonochromReport> {
    if samples == 0 {
        return Err(invalid("samples must be positive"));
    }
    let h = tower.height as usize;
    let orbits = mc::chunked(samples, 2048, |c, _, len| -> Result<Vec<Vec<u32>>> {
        let mut rng = mc::stream(seed, "tower/mono/levels", c);
        (0..len)
            .map(|_| {
                let p = sampler.sample_in_box(&tower.base, &mut rng);
                Ok(p_name(map, part, p, h)?.0)
            })
            .collect()
    });
    let mut names = Vec::with_capacity(samples);
    for o in orbits {
        names.extend(o?);
    }
    let mut labels = Vec::with_capacity(h);
    let mut escape = Vec::with_capacity(h);
    for k in 0..h {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for name in &names {
            *counts.entry(name[k]).or_default() += 1;
        }
        let (label, hits) = counts.iter().fold((0u32, 0usize), |best, (&l, &c)| if c > best.1 { (l, c) } else { best });
        labels.push(label);
        escape.push(1.0 - hits as f64 / samples as f64);
    }
    let base_measure = sampler.box_measure(&tower.base);
    let mut m = Moments::default();
    for name in &names {
        m.push(name.iter().zip(&labels).filter(|(a, b)| a != b).count() as f64);
    }
    let delta = m.estimate().scale(base_measure);

    let hits = mc::chunked(samples, 2048, |c, _, len| -> Result<u64> {
        let mut rng = mc::stream(seed, "tower/mono/difference", c);
        let mut hits = 0;
        for _ in 0..len {
            let y = sampler.sample(&mut rng);
            if let Some(k) = tower.level_of(map, y)? {
                if part.classify(y) != labels[k as usize] {
                    hits += 1;
                }
            }
        }
        Ok(hits)
    });
    let difference_set = Estimate::proportion(hits.into_iter().sum::<Result<u64>>()?, samples as u64);
    let mut induced: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    for (k, l) in labels.iter().enumerate() {
        induced.entry(*l).or_default().push(k as u64);
    }
    Ok(MonochromReport { labels, escape, delta, difference_set, induced })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductParams {
    pub c: f64,
    pub samples: usize,
    pub seed: u64,
    /// Known precisions; estimated when absent.
    pub rho_plus: Option<f64>,
    pub rho_minus: Option<f64>,
    /// Known colouring defects, used only for the recorded bound.
    pub delta_plus: Option<f64>,
    pub delta_minus: Option<f64>,
}

impl Default for ProductParams {
    fn default() -> Self {
        ProductParams { c: 0.9, samples: 100_000, seed: 0, rho_plus: None, rho_minus: None, delta_plus: None, delta_minus: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductTower {
    pub plus: RokhlinTower,
    pub minus: RokhlinTower,
    pub height: u64,
    pub size_plus: f64,
    pub size_minus: f64,
    pub rho_plus: f64,
    pub rho_minus: f64,
    /// `mu(E^+)` and `mu(E^-)`.
    pub e_plus: Estimate,
    pub e_minus: Estimate,
    pub size: Estimate,
    /// `c^2 mu_+ mu_-`.
    pub bound: f64,
    /// `size >= bound - 3 sigma`.
    pub pass: bool,
    /// `Delta^+ mu_- + Delta^- mu_+` when both defects are known.
    pub mono_bound: Option<f64>,
}

/// `mu(E)` for `E = F ∩ T^{-step} F ∩ ... ∩ T^{-(count) step} F`.
fn intersection_measure(
    map: &dyn TorusMap,
    sampler: &dyn Sampler,
    base: &Box3,
    step: u64,
    count: u64,
    samples: usize,
    seed: u64,
    label: &str,
) -> Result<Estimate> {
    let parts = mc::chunked(samples, mc::DEFAULT_CHUNK, |c, _, len| -> Result<u64> {
        let mut rng = mc::stream(seed, label, c);
        let mut hits = 0;
        'outer: for _ in 0..len {
            let mut p = sampler.sample_in_box(base, &mut rng);
            for _ in 0..count {
                p = map.iterate(p, step as i64)?;
                if !base.contains(p) {
                    continue 'outer;
                }
            }
            hits += 1;
        }
        Ok(hits)
    });
    let hits = parts.into_iter().sum::<Result<u64>>()?;
    Ok(Estimate::proportion(hits, samples as u64).scale(sampler.box_measure(base)))
}

/// Tower for `T x T` with base `E^+ x E^-` and height `h^+ h^-`.
pub fn product_tower(
    map: &dyn TorusMap,
    sampler: &dyn Sampler,
    plus: &RokhlinTower,
    minus: &RokhlinTower,
    params: &ProductParams,
) -> Result<ProductTower> {
    let (hp, hm) = (plus.height, minus.height);
    if !coprime(hp, hm) {
        return Err(Error::PreconditionFailed(format!("heights {hp} and {hm} are not relatively prime")));
    }
    if !(params.c > 0.0 && params.c < 1.0) {
        return Err(invalid(format!("c = {} must lie in (0, 1)", params.c)));
    }
    if params.samples == 0 {
        return Err(invalid("samples must be positive"));
    }
    let size_plus = plus.size(sampler);
    let size_minus = minus.size(sampler);
    let rho_plus = match params.rho_plus {
        Some(r) => r,
        None => precision(map, sampler, plus, params.samples, params.seed ^ 1)?.value,
    };
    let rho_minus = match params.rho_minus {
        Some(r) => r,
        None => precision(map, sampler, minus, params.samples, params.seed ^ 2)?.value,
    };
    let c = params.c;
    for (name, h_other, rho, size, h) in [("+", hm, rho_plus, size_plus, hp), ("-", hp, rho_minus, size_minus, hm)] {
        let lhs = (h_other - 1) as f64 * rho;
        let rhs = (1.0 - c) * size / h as f64;
        if !(lhs < rhs) {
            return Err(Error::PreconditionFailed(format!(
                "(h_other - 1) rho_{name} < (1 - c) mu_{name} / h_{name} fails: {lhs:e} >= {rhs:e}"
            )));
        }
    }
    let e_plus = intersection_measure(map, sampler, &plus.base, hp, hm - 1, params.samples, params.seed, "tower/product/plus")?;
    let e_minus = intersection_measure(map, sampler, &minus.base, hm, hp - 1, params.samples, params.seed, "tower/product/minus")?;
    let height = hp * hm;
    let value = height as f64 * e_plus.value * e_minus.value;
    let rel = |e: &Estimate| if e.value > 0.0 { e.std_err / e.value } else { 0.0 };
    let size = Estimate {
        value,
        std_err: value * rel(&e_plus).hypot(rel(&e_minus)),
        samples: params.samples as u64,
    };
    let bound = c * c * size_plus * size_minus;
    let mono_bound = match (params.delta_plus, params.delta_minus) {
        (Some(dp), Some(dm)) => Some(dp * size_minus + dm * size_plus),
        _ => None,
    };
    Ok(ProductTower {
        plus: *plus,
        minus: *minus,
        height,
        size_plus,
        size_minus,
        rho_plus,
        rho_minus,
        e_plus,
        e_minus,
        pass: size.value >= bound - 3.0 * size.std_err,
        size,
        bound,
        mono_bound,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductDisjointness {
    pub levels: u64,
    pub pairs_checked: u64,
    pub overlapping: Vec<(u64, u64)>,
}

impl ProductDisjointness {
    pub fn pass(&self) -> bool {
        self.overlapping.is_empty()
    }
}

/// Checks every pair of product levels `(F^+ + j v) x (F^- + j v)` for a
/// translation by `v`. Levels built on `F^+ x F^-` contain those built on
/// `E^+ x E^-`, so a pass covers the product tower.
pub fn product_levels_disjoint(plus: &RokhlinTower, minus: &RokhlinTower, v: [Phase; 3]) -> ProductDisjointness {
    let levels = plus.height * minus.height;
    let shift = |j: u64| [v[0].mul_int(j as i64), v[1].mul_int(j as i64), v[2].mul_int(j as i64)];
    let boxes: Vec<(Box3, Box3)> = (0..levels).map(|j| (plus.base.translate(shift(j)), minus.base.translate(shift(j)))).collect();
    let mut overlapping = Vec::new();
    let mut pairs = 0;
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            pairs += 1;
            let a = boxes[i].0.overlap_volume(&boxes[j].0);
            let b = boxes[i].1.overlap_volume(&boxes[j].1);
            if a * b > 0.0 {
                overlapping.push((i as u64, j as u64));
            }
        }
    }
    ProductDisjointness { levels, pairs_checked: pairs, overlapping }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaperTowerOptions {
    pub samples: usize,
    pub seed: u64,
    /// Largest `l` in the Birkhoff check; also limited by `e^q` and the cap.
    pub max_l: u64,
    pub birkhoff_points: usize,
    pub cap: u64,
}

impl Default for PaperTowerOptions {
    fn default() -> Self {
        PaperTowerOptions { samples: 100_000, seed: 0, max_l: 64, birkhoff_points: 64, cap: 1_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffMargin {
    pub l: u64,
    pub max_error: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerChecks {
    pub tower: RokhlinTower,
    pub disjointness: DisjointnessCertificate,
    pub size: f64,
    pub size_pass: bool,
    pub rho: Estimate,
    pub rho_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaperTowers {
    pub m: usize,
    pub q: u64,
    pub mu: f64,
    pub eta: f64,
    pub inv_eta: u64,
    pub plus: TowerChecks,
    pub minus: TowerChecks,
    pub height_gap: bool,
    pub rho_bound: f64,
    pub birkhoff: Vec<BirkhoffMargin>,
    pub diagnostics: Vec<String>,
    pub pass: bool,
}

/// Base arc `I^+` (sign `+1`) or `I^-` (sign `-1`) of the constructed towers.
pub fn paper_base(q: u64, eta: f64, mu: f64, sign: f64) -> Box3 {
    let qf = q as f64;
    let centre = 1.0 / (2.0 * qf) - sign / (4.0 * qf);
    let half = 2.0 * mu / qf;
    Box3::new((centre - half, centre + half), (0.0, 1.0), (qf * eta / 4.0, 3.0 * qf * eta / 4.0))
}

/// Builds `T(F^+, 1/eta + 1)` and `T(F^-, 1/eta - 1)` for the plateau term
/// at index `m` and checks them. Failures become diagnostics.
pub fn build_paper_towers(
    map: &NormalizedMap,
    spec: &RotationSpec,
    m: usize,
    mu: f64,
    opts: &PaperTowerOptions,
) -> Result<PaperTowers> {
    let roof = &map.flow.roof;
    let plateau = roof
        .plateau(m)
        .ok_or_else(|| Error::PreconditionFailed(format!("roof has no plateau term at index {m}")))?;
    if !(mu > 0.0 && mu < 0.1) {
        return Err(invalid(format!("mu = {mu} must lie in (0, 1/10)")));
    }
    let (q, eta, inv_eta) = (plateau.q, plateau.eta, plateau.inv_eta);
    if inv_eta < 2 {
        return Err(invalid("1/eta must be at least 2"));
    }
    let sampler = map.sampler();
    let mut diagnostics = Vec::new();
    let rho_bound = mu / (2.0 * ((inv_eta + 1) as f64).powi(2));
    let check = |sign: f64, height: u64, label: &str, diagnostics: &mut Vec<String>| -> Result<TowerChecks> {
        let tower = RokhlinTower::new(paper_base(q, eta, mu, sign), height)?;
        let disjointness = verify_disjointness(map, &sampler, &tower, opts.samples, opts.seed)?;
        if !disjointness.pass {
            diagnostics.push(format!("tower {label}: {}", disjointness.note));
        }
        let size = tower.size(&sampler);
        let size_pass = size > mu;
        if !size_pass {
            diagnostics.push(format!("tower {label}: size {size:.4e} does not exceed mu = {mu}"));
        }
        let rho = precision(map, &sampler, &tower, opts.samples, opts.seed)?;
        let rho_pass = rho.value < rho_bound;
        if !rho_pass {
            diagnostics.push(format!(
                "tower {label}: precision {:.4e} is not below mu/(2 h+^2) = {rho_bound:.4e}; \
                 the drift |{height} Omega| ~ {height}/q_(m+1) is too large at this m",
                rho.value
            ));
        }
        Ok(TowerChecks { tower, disjointness, size, size_pass, rho, rho_pass })
    };
    let plus = check(1.0, inv_eta + 1, "+", &mut diagnostics)?;
    let minus = check(-1.0, inv_eta - 1, "-", &mut diagnostics)?;
    let height_gap = plus.tower.height == minus.tower.height + 2;

    let l_max = {
        let by_growth = (q as f64).exp().floor() as u64;
        opts.max_l.min(by_growth.saturating_sub(1)).min(opts.cap / q.max(1))
    };
    let bound = (-2.0 * q as f64).exp();
    let mut rng = mc::stream(opts.seed, "tower/build/birkhoff", 0);
    let points: Vec<[Phase; 2]> = (0..opts.birkhoff_points)
        .map(|_| {
            let p = minus.tower.base.point_at([rand::Rng::gen(&mut rng), rand::Rng::gen(&mut rng), 0.0]);
            [p.x, p.y]
        })
        .collect();
    let ls: Vec<u64> = (1..=l_max).collect();
    let birkhoff: Vec<BirkhoffMargin> = mc::par_map(&ls, |&l| {
        let steps = l * q;
        let target = steps as f64 * (1.0 - eta);
        let max_error = points
            .iter()
            .map(|t| (birkhoff_sum(|s| roof.eval_phase(s), spec, steps, *t) - target).abs())
            .fold(0.0, f64::max);
        BirkhoffMargin { l, max_error, bound, pass: max_error < bound }
    });
    if let Some(worst) = birkhoff.iter().filter(|b| !b.pass).max_by(|a, b| a.max_error.total_cmp(&b.max_error)) {
        diagnostics.push(format!(
            "Birkhoff approximation misses e^(-2q) = {bound:.3e} at {} of {} values of l (worst {:.3e} at l = {}); \
             the lower-order terms need larger q",
            birkhoff.iter().filter(|b| !b.pass).count(),
            birkhoff.len(),
            worst.max_error,
            worst.l
        ));
    }
    let pass = height_gap
        && [&plus, &minus].iter().all(|t| t.disjointness.pass && t.size_pass && t.rho_pass)
        && birkhoff.iter().all(|b| b.pass);
    Ok(PaperTowers { m, q, mu, eta, inv_eta, plus, minus, height_gap, rho_bound, birkhoff, diagnostics, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SizeLaw {
    /// `(n + 1)^p`.
    Power(f64),
    /// `b^-n`.
    Geometric(f64),
    Constant(f64),
    List(Vec<f64>),
}

impl SizeLaw {
    /// Parses `"(n+1)^p"`, `"b^-n"` or `"const c"`.
    pub fn parse(s: &str) -> Result<SizeLaw> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let num = |x: &str| x.parse::<f64>().map_err(|_| invalid(format!("cannot read '{x}' in law '{s}'")));
        if let Some(rest) = t.strip_prefix("const") {
            return Ok(SizeLaw::Constant(num(rest)?));
        }
        if let Some(p) = t.strip_prefix("(n+1)^") {
            return Ok(SizeLaw::Power(num(p.trim_start_matches('(').trim_end_matches(')'))?));
        }
        if let Some(b) = t.strip_suffix("^-n") {
            let b = num(b)?;
            if !(b > 1.0) {
                return Err(invalid(format!("base {b} must exceed 1")));
            }
            return Ok(SizeLaw::Geometric(b));
        }
        Err(invalid(format!("unrecognised size law '{s}'")))
    }

    pub fn at(&self, n: usize) -> f64 {
        match self {
            SizeLaw::Power(p) => ((n + 1) as f64).powf(*p),
            SizeLaw::Geometric(b) => b.powi(-(n as i32)),
            SizeLaw::Constant(c) => *c,
            SizeLaw::List(v) => v.get(n).copied().unwrap_or(f64::NAN),
        }
    }

    /// Whether `sum size^(2 k)` diverges, `k = 1` single and `k = 2` product.
    pub fn diverges(&self, power: f64) -> Option<bool> {
        match self {
            SizeLaw::Power(p) => Some(2.0 * power * p >= -1.0),
            SizeLaw::Geometric(_) => Some(false),
            SizeLaw::Constant(c) => Some(*c > 0.0),
            SizeLaw::List(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    Single,
    Product,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbSchedule {
    pub mode: ScheduleMode,
    pub sizes: Vec<f64>,
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
    pub strictly_increasing: bool,
    pub bounded: bool,
    pub first_crossing: Option<usize>,
    pub diverges: Option<bool>,
    /// First step at which `alpha` stops changing in floating point.
    pub plateau: Option<usize>,
}

pub const CROSSING_LEVEL: f64 = 0.5;

/// `alpha_0 = 0`, `alpha_{n+1} = alpha_n + delta_n` with
/// `delta_n = mu_n^2 ((1 - alpha_n)/10)^2` (single) or
/// `(mu_n^2 / 2)^2 ((1 - alpha_n)/10)^2` (product, both towers of size `mu_n`).
pub fn lb_schedule(law: &SizeLaw, mode: ScheduleMode, steps: usize) -> Result<LbSchedule> {
    let sizes: Vec<f64> = (0..steps).map(|n| law.at(n)).collect();
    if let Some(bad) = sizes.iter().find(|s| !(**s > 0.0 && **s <= 1.0)) {
        return Err(invalid(format!("tower size {bad} outside (0, 1]")));
    }
    let mut alpha: Vec<f64> = vec![0.0];
    let mut delta = Vec::with_capacity(steps);
    let mut plateau = None;
    for (n, &mu) in sizes.iter().enumerate() {
        let a = alpha[n];
        let weight = match mode {
            ScheduleMode::Single => mu * mu,
            ScheduleMode::Product => (mu * mu / 2.0).powi(2),
        };
        let d = weight * (1.0 - a).powi(2) / 100.0;
        delta.push(d);
        let next = a + d;
        if next == a && plateau.is_none() {
            plateau = Some(n);
        }
        alpha.push(next);
    }
    let live = plateau.unwrap_or(steps);
    let strictly_increasing = alpha[..=live].windows(2).all(|w| w[1] > w[0]);
    let bounded = alpha.iter().all(|a| *a < 1.0);
    let first_crossing = alpha.iter().position(|a| *a >= CROSSING_LEVEL);
    let diverges = law.diverges(match mode {
        ScheduleMode::Single => 1.0,
        ScheduleMode::Product => 2.0,
    });
    Ok(LbSchedule { mode, sizes, alpha, delta, strictly_increasing, bounded, first_crossing, diverges, plateau })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    pub alpha: f64,
    /// Defaults to `min(9/10, (1 - alpha)/alpha)`.
    pub c: Option<f64>,
}

impl MatchParams {
    pub fn c(&self) -> f64 {
        self.c.unwrap_or(if self.alpha > 0.0 { (0.9f64).min((1.0 - self.alpha) / self.alpha) } else { 0.9 })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingBound {
    pub bound: usize,
    pub pairs: usize,
    pub even_matches: usize,
    pub odd_matches: usize,
    /// Tower passes on which the two names agree entirely.
    pub full_passes: usize,
    pub c: f64,
    /// `h L / n` with `n` the longer length.
    pub tower_fraction: f64,
    /// `(h L / n)(1 - alpha (1 + c/2))`.
    pub gain: f64,
}

fn check_hits(hits: &[usize], h: usize, len: usize, which: &str) -> Result<()> {
    for w in hits.windows(2) {
        if w[1] < w[0] + h {
            return Err(invalid(format!("{which} hits {} and {} are closer than the height {h}", w[0], w[1])));
        }
    }
    if let Some(&last) = hits.last() {
        if last + h > len {
            return Err(invalid(format!("{which} hit {last} leaves fewer than {h} symbols")));
        }
    }
    Ok(())
}

/// Splits both names at paired base hits into odd gaps and even tower
/// passes of length `h`. Each pass pair is credited with its agreeing
/// positions, each gap pair with its LCS; the total is a common
/// subsequence length and so never exceeds the LCS of the full names.
pub fn tower_matching_bound(
    v: &Word,
    w: &Word,
    hits_v: &[usize],
    hits_w: &[usize],
    h: usize,
    params: &MatchParams,
) -> Result<MatchingBound> {
    if h == 0 {
        return Err(invalid("tower height must be positive"));
    }
    check_hits(hits_v, h, v.len(), "first")?;
    check_hits(hits_w, h, w.len(), "second")?;
    let pairs = hits_v.len().min(hits_w.len());
    let (mut pv, mut pw) = (0usize, 0usize);
    let (mut even, mut odd, mut full) = (0usize, 0usize, 0usize);
    for i in 0..pairs {
        let (a, b) = (hits_v[i], hits_w[i]);
        odd += lcs_dp(&v.0[pv..a], &w.0[pw..b]);
        let agree = v.0[a..a + h].iter().zip(&w.0[b..b + h]).filter(|(x, y)| x == y).count();
        if agree == h {
            full += 1;
        }
        even += agree;
        pv = a + h;
        pw = b + h;
    }
    odd += match_count(&Word(v.0[pv..].to_vec()), &Word(w.0[pw..].to_vec()));
    let n = v.len().max(w.len()).max(1);
    let c = params.c();
    let tower_fraction = (h * pairs) as f64 / n as f64;
    Ok(MatchingBound {
        bound: even + odd,
        pairs,
        even_matches: even,
        odd_matches: odd,
        full_passes: full,
        c,
        tower_fraction,
        gain: tower_fraction * (1.0 - params.alpha * (1.0 + c / 2.0)),
    })
}

/// Times in `0..n` at which the orbit of `p` visits the base, thinned so
/// consecutive hits are at least `h` apart.
pub fn base_hits(map: &dyn TorusMap, tower: &RokhlinTower, p: TorusPoint, n: usize) -> Result<Vec<usize>> {
    let h = tower.height as usize;
    let mut hits = Vec::new();
    let mut q = p;
    for i in 0..n {
        if tower.base.contains(q) && i + h <= n && hits.last().is_none_or(|&l: &usize| i >= l + h) {
            hits.push(i);
        }
        q = map.apply(q)?;
    }
    Ok(hits)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamesTowersReport {
    pub pairs: usize,
    pub n: usize,
    pub delta: f64,
    pub violations: usize,
    pub exceptional_fraction: f64,
    /// Largest `d^P - d^Q - 3 Delta` over the sampled pairs.
    pub worst_excess: f64,
}

/// Labels of the partition that names tower levels and otherwise uses the
/// cubes. Tower labels are offset past every cube label.
pub fn tower_names(map: &dyn TorusMap, tower: &RokhlinTower, part: &CubePartition, p: TorusPoint, n: usize) -> Result<(Word, Word)> {
    let offset = part.cells() as u32 + 1;
    let mut cube = Vec::with_capacity(n);
    let mut mixed = Vec::with_capacity(n);
    let mut q = p;
    let mut level = tower.level_of(map, q)?;
    for i in 0..n {
        let c = part.classify(q);
        cube.push(c);
        mixed.push(match level {
            Some(k) => offset + k as u32,
            None => c,
        });
        if i + 1 < n {
            q = map.apply(q)?;
            level = tower.next_level(level, q);
        }
    }
    Ok((Word(cube), Word(mixed)))
}

fn hamming_count(a: &Word, b: &Word) -> usize {
    a.0.iter().zip(&b.0).filter(|(x, y)| x != y).count()
}

/// Tests `d_n^P(x, y) <= d_n^Q(x, y) + 3 Delta` on sampled pairs.
pub fn names_and_towers(
    map: &dyn TorusMap,
    sampler: &dyn Sampler,
    tower: &RokhlinTower,
    part: &CubePartition,
    delta: f64,
    n: usize,
    pairs: usize,
    seed: u64,
) -> Result<NamesTowersReport> {
    if n == 0 || pairs == 0 {
        return Err(invalid("n and pairs must be positive"));
    }
    let results = mc::chunked(pairs, 64, |c, _, len| -> Result<Vec<f64>> {
        let mut rng = mc::stream(seed, "tower/names", c);
        (0..len)
            .map(|_| {
                let (x, y) = (sampler.sample(&mut rng), sampler.sample(&mut rng));
                let (px, qx) = tower_names(map, tower, part, x, n)?;
                let (py, qy) = tower_names(map, tower, part, y, n)?;
                let dp = hamming_count(&px, &py) as f64 / n as f64;
                let dq = hamming_count(&qx, &qy) as f64 / n as f64;
                Ok(dp - dq - 3.0 * delta)
            })
            .collect()
    });
    let mut excess = Vec::with_capacity(pairs);
    for r in results {
        excess.extend(r?);
    }
    let violations = excess.iter().filter(|e| **e > 0.0).count();
    Ok(NamesTowersReport {
        pairs,
        n,
        delta,
        violations,
        exceptional_fraction: violations as f64 / pairs as f64,
        worst_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}
