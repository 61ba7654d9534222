//! Dyadic partitions of T^3, names of orbits, and the Hamming and f-bar
//! distances between them.

use crate::error::{invalid, Error, Result};
use crate::maps::{Sampler, TorusMap};
use crate::mc;
use crate::torus::TorusPoint;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// The `8^level` half-open dyadic cubes of side `2^-level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubePartition {
    pub level: u32,
}

impl CubePartition {
    pub fn new(level: u32) -> Result<CubePartition> {
        if level > 20 {
            return Err(invalid(format!("partition level {level} exceeds 20")));
        }
        Ok(CubePartition { level })
    }

    pub fn cells(&self) -> u64 {
        1u64 << (3 * self.level)
    }

    /// 1-based cell index `i 4^n + j 2^n + k + 1` where `(i, j, k)` are the
    /// integer parts of `2^n (x, y, z)`.
    pub fn classify(&self, p: TorusPoint) -> u32 {
        let n = self.level;
        let (i, j, k) = (p.x.leading_bits(n), p.y.leading_bits(n), p.z.leading_bits(n));
        ((i << (2 * n)) + (j << n) + k + 1) as u32
    }

    /// The closed box of a cell.
    pub fn cell_box(&self, index: u32) -> crate::torus::Box3 {
        let n = self.level;
        let c = (index - 1) as u64;
        let mask = (1u64 << n) - 1;
        let (i, j, k) = (c >> (2 * n), (c >> n) & mask, c & mask);
        let side = 1.0 / (1u64 << n) as f64;
        let iv = |a: u64| (a as f64 * side, (a + 1) as f64 * side);
        crate::torus::Box3::new(iv(i), iv(j), iv(k))
    }
}

/// Finite word over positive integer symbols.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word(pub Vec<u32>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        Word([self.0.as_slice(), other.0.as_slice()].concat())
    }

    /// Single-line comma-separated integers.
    pub fn to_csv(&self) -> String {
        self.0.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
    }

    pub fn parse(s: &str) -> Result<Word> {
        let t = s.trim();
        if t.is_empty() {
            return Ok(Word(Vec::new()));
        }
        t.split([',', ' ', '\n', '\t'])
            .filter(|x| !x.is_empty())
            .map(|x| match x.trim().parse::<u32>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(invalid(format!("'{x}' is not a positive symbol"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

impl From<&str> for Word {
    /// Digits of a string such as `"121"`; intended for tests and examples.
    fn from(s: &str) -> Word {
        Word(s.chars().filter_map(|c| c.to_digit(10)).collect())
    }
}

/// Symbols of `T^i q` for `0 <= i < n`.
pub fn p_name(map: &dyn TorusMap, part: &CubePartition, q: TorusPoint, n: usize) -> Result<Word> {
    if n == 0 {
        return Err(invalid("name length must be positive"));
    }
    let mut out = Vec::with_capacity(n);
    let mut p = q;
    for i in 0..n {
        out.push(part.classify(p));
        if i + 1 < n {
            p = map.apply(p)?;
        }
    }
    Ok(Word(out))
}

fn same_length(v: &[u32], w: &[u32]) -> Result<usize> {
    if v.len() != w.len() {
        return Err(Error::LengthMismatch { left: v.len(), right: w.len() });
    }
    if v.is_empty() {
        return Err(invalid("words must be non-empty"));
    }
    Ok(v.len())
}

pub fn hamming(v: &Word, w: &Word) -> Result<f64> {
    let n = same_length(&v.0, &w.0)?;
    Ok(v.0.iter().zip(&w.0).filter(|(a, b)| a != b).count() as f64 / n as f64)
}

/// Reference LCS by dynamic programming in two rows.
pub fn lcs_dp(a: &[u32], b: &[u32]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &x in a {
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Bit-parallel LCS: one bit-vector update per symbol of `b`.
pub fn lcs_bits(a: &[u32], b: &[u32]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let words = a.len().div_ceil(64);
    let mut index: HashMap<u32, usize> = HashMap::new();
    let mut masks: Vec<Vec<u64>> = Vec::new();
    for (i, &c) in a.iter().enumerate() {
        let id = *index.entry(c).or_insert_with(|| {
            masks.push(vec![0; words]);
            masks.len() - 1
        });
        masks[id][i / 64] |= 1 << (i % 64);
    }
    let mut v = vec![u64::MAX; words];
    for c in b {
        let Some(&id) = index.get(c) else { continue };
        let m = &masks[id];
        let mut carry = 0u64;
        for k in 0..words {
            let vk = v[k];
            let u = vk & m[k];
            let (s1, c1) = vk.overflowing_add(u);
            let (s2, c2) = s1.overflowing_add(carry);
            carry = (c1 | c2) as u64;
            v[k] = s2 | (vk & !m[k]);
        }
    }
    let tail = a.len() % 64;
    let mut zeros = 0usize;
    for (k, &vk) in v.iter().enumerate() {
        let live = if k + 1 == words && tail != 0 { (1u64 << tail) - 1 } else { u64::MAX };
        zeros += (!vk & live).count_ones() as usize;
    }
    zeros
}

/// LCS restricted to alignments with `|i - j| <= band`. Returns the value
/// only when it is certified to equal the unrestricted LCS.
pub fn lcs_banded(a: &[u32], b: &[u32], band: usize) -> Option<usize> {
    let (n, m) = (a.len(), b.len());
    if n.abs_diff(m) > band {
        return None;
    }
    const NEG: i64 = i64::MIN / 4;
    let width = 2 * band + 1;
    // Row i stores columns j in [i - band, i + band] at offset j + band - i.
    let mut prev = vec![NEG; width + 2];
    let mut cur = vec![NEG; width + 2];
    let at = |row: &Vec<i64>, i: usize, j: isize| -> i64 {
        let off = j - i as isize + band as isize;
        if j < 0 || off < 0 || off as usize >= width {
            NEG
        } else {
            row[off as usize]
        }
    };
    for j in 0..=band.min(m) {
        prev[j + band] = 0;
    }
    for i in 1..=n {
        for slot in cur.iter_mut() {
            *slot = NEG;
        }
        let lo = i.saturating_sub(band);
        let hi = (i + band).min(m);
        for j in lo..=hi {
            let off = j + band - i;
            let v = if j == 0 {
                0
            } else {
                let diag = at(&prev, i - 1, j as isize - 1);
                let up = at(&prev, i - 1, j as isize);
                let left = if j > lo { cur[off - 1] } else { NEG };
                let best = up.max(left);
                if a[i - 1] == b[j - 1] && diag > NEG {
                    best.max(diag + 1)
                } else {
                    best.max(diag)
                }
            };
            cur[off] = v;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let l = at(&prev, n, m as isize);
    if l < 0 {
        return None;
    }
    let l = l as usize;
    (n.max(m) - l <= band).then_some(l)
}

/// Length of a longest common subsequence.
pub fn match_count(v: &Word, w: &Word) -> usize {
    let (a, b) = if v.len() >= w.len() { (&v.0, &w.0) } else { (&w.0, &v.0) };
    if a.len() < 32 {
        lcs_dp(a, b)
    } else {
        lcs_bits(a, b)
    }
}

/// `(n - LCS) / n` for words of equal length `n`.
pub fn fbar(v: &Word, w: &Word) -> Result<f64> {
    let n = same_length(&v.0, &w.0)?;
    Ok((n - match_count(v, w)) as f64 / n as f64)
}

/// f-bar with a prior upper bound `hint` on its value; uses the banded
/// recursion when that certifies, and falls back otherwise.
pub fn fbar_with_hint(v: &Word, w: &Word, hint: f64) -> Result<f64> {
    let n = same_length(&v.0, &w.0)?;
    let band = ((hint.clamp(0.0, 1.0) * n as f64).ceil() as usize).max(1);
    match lcs_banded(&v.0, &w.0, band) {
        Some(l) => Ok((n - l) as f64 / n as f64),
        None => fbar(v, w),
    }
}

/// Largest pairwise f-bar among the names of `points`; a lower bound for
/// the true diameter of the set they sample.
pub fn fbar_diameter(points: &[TorusPoint], map: &dyn TorusMap, part: &CubePartition, n: usize) -> Result<f64> {
    if points.len() < 2 {
        return Err(invalid("diameter needs at least two points"));
    }
    let names = points.iter().map(|p| p_name(map, part, *p, n)).collect::<Result<Vec<_>>>()?;
    names_diameter(&names)
}

pub fn names_diameter(names: &[Word]) -> Result<f64> {
    let idx: Vec<usize> = (0..names.len()).collect();
    let rows = mc::par_map(&idx, |&i| -> Result<f64> {
        let mut best = 0.0f64;
        for j in i + 1..names.len() {
            best = best.max(fbar(&names[i], &names[j])?);
        }
        Ok(best)
    });
    rows.into_iter().try_fold(0.0f64, |m, r| Ok(m.max(r?)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyParams {
    pub alpha: f64,
    pub delta: f64,
    pub n: usize,
    pub centers: usize,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// Some centre has more than `1 - delta` of the samples within
    /// `(1 - alpha)/2`, so that set has diameter below `1 - alpha`.
    CenterBall,
    /// More than `1 - delta` of the names share one symbol, so every pair of
    /// them is at f-bar distance below 1.
    SharedSymbol,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub pass: bool,
    pub certificate: Option<Certificate>,
    pub witness: Option<usize>,
    pub radius: f64,
    pub best_fraction: f64,
    pub per_center: Vec<f64>,
    pub shared_symbol: Option<(u32, f64)>,
    pub n: usize,
    pub samples: usize,
    /// Diameter implied by the certificate, compared with `1 - alpha`.
    pub certified_diameter: Option<f64>,
}

/// Property-P decision from precomputed names.
pub fn property_p_from_names(centers: &[Word], samples: &[Word], alpha: f64, delta: f64) -> Result<PropertyReport> {
    if !(0.0..1.0).contains(&alpha) || !(0.0..1.0).contains(&delta) {
        return Err(invalid(format!("alpha = {alpha}, delta = {delta} must lie in [0, 1)")));
    }
    if samples.is_empty() || centers.is_empty() {
        return Err(invalid("need at least one centre and one sample"));
    }
    let n = samples[0].len();
    if n == 0 {
        return Err(invalid("name length must be positive"));
    }
    let radius = (1.0 - alpha) / 2.0;
    let per_center = mc::par_map(centers, |c| -> Result<f64> {
        let mut hits = 0usize;
        for s in samples {
            if fbar(c, s)? < radius {
                hits += 1;
            }
        }
        Ok(hits as f64 / samples.len() as f64)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (witness, best) = per_center
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &f)| if f > acc.1 { (i, f) } else { acc });
    let mut report = PropertyReport {
        pass: false,
        certificate: None,
        witness: None,
        radius,
        best_fraction: best,
        per_center,
        shared_symbol: None,
        n,
        samples: samples.len(),
        certified_diameter: None,
    };
    if best > 1.0 - delta {
        report.pass = true;
        report.certificate = Some(Certificate::CenterBall);
        report.witness = Some(witness);
        report.certified_diameter = Some(2.0 * radius);
        return Ok(report);
    }
    if alpha == 0.0 {
        let mut counts: HashMap<u32, usize> = HashMap::new();
        for s in samples {
            let mut seen: Vec<u32> = s.0.clone();
            seen.sort_unstable();
            seen.dedup();
            for c in seen {
                *counts.entry(c).or_default() += 1;
            }
        }
        if let Some((&sym, &cnt)) = counts.iter().max_by_key(|(s, c)| (**c, std::cmp::Reverse(**s))) {
            let frac = cnt as f64 / samples.len() as f64;
            report.shared_symbol = Some((sym, frac));
            if frac > 1.0 - delta {
                report.pass = true;
                report.certificate = Some(Certificate::SharedSymbol);
                report.certified_diameter = Some(1.0 - 1.0 / n as f64);
            }
        }
    }
    Ok(report)
}

/// Names of `count` points drawn from `sampler` on the stream `label`.
pub fn sample_names(
    map: &dyn TorusMap,
    part: &CubePartition,
    sampler: &dyn Sampler,
    n: usize,
    count: usize,
    seed: u64,
    label: &str,
) -> Result<Vec<Word>> {
    let chunks = mc::chunked(count, 256, |c, _, len| -> Result<Vec<Word>> {
        let mut rng = mc::stream(seed, label, c);
        (0..len).map(|_| p_name(map, part, sampler.sample(&mut rng), n)).collect()
    });
    let mut out = Vec::with_capacity(count);
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Monte Carlo estimate of property P with centres and samples drawn from
/// `sampler`.
pub fn estimate_property_p(
    map: &dyn TorusMap,
    part: &CubePartition,
    sampler: &dyn Sampler,
    p: &PropertyParams,
) -> Result<PropertyReport> {
    if p.n == 0 || p.samples == 0 || p.centers == 0 {
        return Err(invalid("n, centres and samples must be positive"));
    }
    let centers = sample_names(map, part, sampler, p.n, p.centers, p.seed, "property-p/centers")?;
    let samples = sample_names(map, part, sampler, p.n, p.samples, p.seed, "property-p/samples")?;
    property_p_from_names(&centers, &samples, p.alpha, p.delta)
}
