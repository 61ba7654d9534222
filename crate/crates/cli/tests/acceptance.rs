//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line and then
//! asserts, so `cargo test --test acceptance -- --nocapture` gives a report.

use fbar_lab::flow::{invariant_measure, preimage_measure, Anchor, NormalizedMap};
use fbar_lab::maps::{TorusMap, Translation3};
use fbar_lab::mc;
use fbar_lab::roof::{assemble_roof, build_p_mu_n, PlateauOptions, RoofFunction};
use fbar_lab::rotation::{build_rotation, check_growth, GrowthModel, RotationSpec};
use fbar_lab::symbolic::{fbar, hamming, lcs_dp, match_count, CubePartition, Word};
use fbar_lab::torus::{Box3, Phase, TorusPoint};
use fbar_lab::towers::{
    build_paper_towers, lb_schedule, monochromaticity, product_levels_disjoint, product_tower, tower_matching_bound,
    verify_disjointness, MatchParams, PaperTowerOptions, ProductParams, RokhlinTower, ScheduleMode, SizeLaw,
};
use fbar_lab::trigpoly::{birkhoff_sum, TrigPoly, DEFAULT_RESONANCE_FLOOR};
use rand::Rng;
use std::collections::BTreeMap;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

const SEED: u64 = 20_240_601;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("{} criterion {id:>2} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

fn rng(label: &str) -> impl Rng {
    mc::stream(SEED, label, 0)
}

fn random_word(r: &mut impl Rng, n: usize, alphabet: u32) -> Word {
    Word((0..n).map(|_| r.gen_range(1..=alphabet)).collect())
}

/// Longest common subsequence by enumerating every subsequence of `a`.
fn brute_lcs(a: &[u32], b: &[u32]) -> usize {
    let is_subseq = |mask: u32| {
        let mut j = 0;
        for (i, &s) in a.iter().enumerate() {
            if mask >> i & 1 == 1 {
                while j < b.len() && b[j] != s {
                    j += 1;
                }
                if j == b.len() {
                    return false;
                }
                j += 1;
            }
        }
        true
    };
    (0u32..1 << a.len()).filter(|&m| is_subseq(m)).map(|m| m.count_ones() as usize).max().unwrap_or(0)
}

fn all_words(len: usize, alphabet: u32) -> Vec<Vec<u32>> {
    (0..alphabet.pow(len as u32))
        .map(|mut code| {
            (0..len)
                .map(|_| {
                    let s = code % alphabet + 1;
                    code /= alphabet;
                    s
                })
                .collect()
        })
        .collect()
}

#[test]
fn c01_fbar_matches_brute_force_matching() {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    let mut check = |a: &[u32], b: &[u32]| {
        let l = brute_lcs(a, b);
        let (va, vb) = (Word(a.to_vec()), Word(b.to_vec()));
        let n = a.len();
        let exact = (n - l) as f64 / n as f64;
        if match_count(&va, &vb) != l || lcs_dp(a, b) != l || fbar(&va, &vb).unwrap() != exact {
            mismatches += 1;
        }
        checked += 1;
    };
    for len in 1..=5 {
        let words = all_words(len, 3);
        for a in &words {
            for b in &words {
                check(a, b);
            }
        }
    }
    let mut r = rng("acceptance/c01");
    for _ in 0..10_000 {
        let len = r.gen_range(1..=8);
        let a = random_word(&mut r, len, 3);
        let b = random_word(&mut r, len, 3);
        check(&a.0, &b.0);
    }
    let elapsed = start.elapsed();
    report(
        1,
        "f-bar against brute force",
        mismatches == 0 && elapsed < Duration::from_secs(60),
        format!("{checked} pairs, {mismatches} mismatches, {:.1} s (limit 60 s)", elapsed.as_secs_f64()),
    );
}

#[test]
fn c02_fbar_metric_axioms() {
    let mut r = rng("acceptance/c02");
    let n = 200;
    let (mut violations, mut above_hamming) = (0usize, 0usize);
    for _ in 0..10_000 {
        let u = random_word(&mut r, n, 8);
        let v = random_word(&mut r, n, 8);
        let w = if r.gen_bool(0.1) { u.clone() } else { random_word(&mut r, n, 8) };
        let (luv, lvw, luw) = (match_count(&u, &v), match_count(&v, &w), match_count(&u, &w));
        // Integer form of d(u, w) <= d(u, v) + d(v, w).
        if n - luw > (n - luv) + (n - lvw) {
            violations += 1;
        }
        if match_count(&v, &u) != luv || match_count(&u, &u) != n {
            violations += 1;
        }
        if (luw == n) != (u == w) {
            violations += 1;
        }
        for (a, b) in [(&u, &v), (&v, &w), (&u, &w)] {
            if fbar(a, b).unwrap() > hamming(a, b).unwrap() {
                above_hamming += 1;
            }
        }
    }
    report(
        2,
        "f-bar metric axioms",
        violations == 0 && above_hamming == 0,
        format!("10000 triples of length {n}: {violations} axiom violations, {above_hamming} pairs with f-bar > Hamming"),
    );
}

fn golden_pair() -> RotationSpec {
    build_rotation(&[1; 40], &[2; 30], 256).unwrap()
}

#[test]
fn c03_cohomological_identity() {
    let spec = golden_pair();
    let omega = spec.omega();
    let mut r = rng("acceptance/c03");
    let mut worst_ratio: f64 = 0.0;
    let mut worst_tele: f64 = 0.0;
    let ms = [1u64, 10, 100, 1000, 10_000];
    for _ in 0..100 {
        let deg = r.gen_range(1..=10);
        let p = TrigPoly::random_zero_average(2, deg, &mut r);
        let q = p.solve_cohomological(&spec, DEFAULT_RESONANCE_FLOOR).unwrap();
        let bound = p.norm_bound(0);
        let mut residual: f64 = 0.0;
        for i in 0..1000 {
            let t = [Phase::from_f64((i as f64 + 0.5) / 1000.0), Phase::from_f64(((i * 37) % 1000) as f64 / 1000.0 + 1e-4)];
            let shifted = [t[0].add(omega[0]), t[1].add(omega[1])];
            residual = residual.max((p.evaluate_phase(t) - q.evaluate_phase(shifted) + q.evaluate_phase(t)).abs());
        }
        worst_ratio = worst_ratio.max(residual / bound);
        for _ in 0..2 {
            let t = [Phase::from_f64(r.gen()), Phase::from_f64(r.gen())];
            for &m in &ms {
                let end = [t[0].add(spec.x.multiple(m as i64)), t[1].add(spec.y.multiple(m as i64))];
                let tele = q.evaluate_phase(end) - q.evaluate_phase(t);
                let direct = birkhoff_sum(|s| p.evaluate_phase(s), &spec, m, t);
                worst_tele = worst_tele.max((direct - tele).abs());
            }
        }
    }
    report(
        3,
        "cohomological identity",
        worst_ratio <= 1e-10 && worst_tele <= 1e-9,
        format!("worst residual / norm bound {worst_ratio:.3e} (limit 1e-10), worst telescoping gap {worst_tele:.3e} (limit 1e-9)"),
    );
}

#[test]
fn c04_constant_roof_is_a_translation() {
    let spec = golden_pair();
    let map = NormalizedMap::new(Arc::new(RoofFunction::unit()), &spec, Anchor::Translated).unwrap();
    let omega = spec.omega();
    let mut r = rng("acceptance/c04");
    let mut sup: f64 = 0.0;
    for _ in 0..10_000 {
        let p = TorusPoint::new(r.gen(), r.gen(), r.gen());
        let expected = TorusPoint { x: p.x.add(omega[0]), y: p.y.add(omega[1]), z: p.z };
        sup = sup.max(map.apply(p).unwrap().dist(expected));
    }
    report(4, "constant roof", sup <= 1e-12, format!("sup error {sup:.3e} over 10000 points (limit 1e-12)"));
}

/// `1 + X_1 + X_2 + Y_1 + Y_2` over the default rotation.
fn depth_two_map() -> (RotationSpec, NormalizedMap) {
    let spec = build_rotation(&[1; 30], &[2; 20], 256).unwrap();
    let roof = assemble_roof(&spec, &TrigPoly::zero(2), BTreeMap::new(), 2).unwrap();
    let map = NormalizedMap::new(Arc::new(roof), &spec, Anchor::Translated).unwrap();
    (spec, map)
}

fn random_box(r: &mut impl Rng, lo: f64, hi: f64) -> Box3 {
    let mut side = || {
        let len = r.gen_range(lo..hi);
        let a = r.gen_range(0.0..1.0 - len);
        (a, a + len)
    };
    Box3::new(side(), side(), side())
}

#[test]
fn c05_measure_preservation() {
    let start = Instant::now();
    let (_, map) = depth_two_map();
    let sampler = map.sampler();
    let mut r = rng("acceptance/c05");
    let samples = 1_000_000;
    let mut worst_z: f64 = 0.0;
    let mut failures = 0;
    for i in 0..20 {
        let b = random_box(&mut r, 0.2, 0.7);
        let direct = invariant_measure(&sampler, &b, samples, SEED + i, "acceptance/c05/direct").unwrap();
        let pre = preimage_measure(&map, &sampler, &b, 1, samples, SEED + i, "acceptance/c05/preimage").unwrap();
        let z = (direct.value - pre.value).abs() / direct.std_err.hypot(pre.std_err);
        worst_z = worst_z.max(z);
        if z > 3.0 {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        5,
        "measure preservation",
        failures == 0 && elapsed < Duration::from_secs(300),
        format!("20 boxes at {samples} samples: worst z = {worst_z:.2} (limit 3), {:.1} s (limit 300 s)", elapsed.as_secs_f64()),
    );
}

#[test]
fn c06_plateau_polynomial() {
    let spec = build_rotation(&[3, 4, 314], &[6, 5], 256).unwrap();
    let growth = check_growth(&spec, GrowthModel::Surrogate { g: 2.0 }, 2).unwrap();
    let n = 2;
    let (q, q_next) = (spec.x.q_u64(n).unwrap(), spec.x.q_u64(n + 1).unwrap());
    let p = build_p_mu_n(&spec, n, 0.05, &PlateauOptions::default()).unwrap();
    let r = &p.report;
    let qf = q as f64;
    let plateau_bound = (0.75 * qf).exp() / q_next as f64;
    let slope_bound = qf * qf / qf.exp();
    let mean_exact = p.poly.coeff([0, 0]).norm() == 0.0 && r.zero_average;
    let multiple = p.inv_eta % (2 * q) == 0;
    let bounds_match = (r.plateau.bound - plateau_bound).abs() <= 1e-12 * plateau_bound
        && (r.slope.bound - slope_bound).abs() <= 1e-12 * slope_bound;
    let pass = growth.all_pass()
        && q <= 32
        && q_next <= 4096
        && mean_exact
        && multiple
        && bounds_match
        && r.plateau.pass
        && r.plateau.points > 0
        && r.slope.pass
        && r.slope.points > 0;
    report(
        6,
        "plateau polynomial",
        pass,
        format!(
            "n = {n}, q = {q}, q_next = {q_next}, 1/eta = {} = {}*2q, mean {:?}; plateau dev {:.3e} <= {:.3e} on {} pts; \
             slope {:.3e} >= {:.3e} on {} pts",
            p.inv_eta,
            p.inv_eta / (2 * q),
            p.poly.coeff([0, 0]),
            r.plateau.value,
            r.plateau.bound,
            r.plateau.points,
            r.slope.value,
            r.slope.bound,
            r.slope.points
        ),
    );
}

#[test]
fn c07_constructed_towers_toy() {
    let spec = build_rotation(&[3, 1365], &[6], 256).unwrap();
    let mu = 0.05;
    let plateau = build_p_mu_n(&spec, 1, mu, &PlateauOptions::default()).unwrap();
    let roof = assemble_roof(&spec, &TrigPoly::zero(2), BTreeMap::from([(1, plateau)]), 1).unwrap();
    let map = NormalizedMap::new(Arc::new(roof), &spec, Anchor::Translated).unwrap();
    let opts = PaperTowerOptions { samples: 100_000, seed: SEED, ..PaperTowerOptions::default() };
    let t = build_paper_towers(&map, &spec, 1, mu, &opts).unwrap();
    let explained = |label: &str, ok: bool| ok || t.diagnostics.iter().any(|d| d.starts_with(&format!("tower {label}:")));
    let pass = t.height_gap
        && t.plus.tower.height == t.minus.tower.height + 2
        && t.plus.disjointness.pass
        && t.minus.disjointness.pass
        && explained("+", t.plus.size_pass && t.plus.rho_pass)
        && explained("-", t.minus.size_pass && t.minus.rho_pass);
    report(
        7,
        "constructed towers at toy scale",
        pass,
        format!(
            "h+ = {}, h- = {}; sizes {:.4} / {:.4} vs mu {mu}; rho {:.3e} / {:.3e} vs {:.3e}; diagnostics: {:?}",
            t.plus.tower.height,
            t.minus.tower.height,
            t.plus.size,
            t.minus.size,
            t.plus.rho.value,
            t.minus.rho.value,
            t.rho_bound,
            t.diagnostics
        ),
    );
}

#[test]
fn c08_product_tower() {
    let toy = Translation3::new([1.0 / 3.0, 0.5, 0.0]);
    let plus = RokhlinTower::new(Box3::new((0.0, 0.3), (0.0, 1.0), (0.0, 1.0)), 3).unwrap();
    let minus = RokhlinTower::new(Box3::new((0.0, 1.0), (0.0, 0.45), (0.0, 1.0)), 2).unwrap();
    let exhaustive = product_levels_disjoint(&plus, &minus, toy.v);

    let spec = build_rotation(&[2, 1, 100], &[1, 1, 100], 256).unwrap();
    let map = NormalizedMap::new(Arc::new(RoofFunction::unit()), &spec, Anchor::Translated).unwrap();
    let sampler = map.sampler();
    let params = ProductParams { c: 0.9, samples: 200_000, seed: SEED, ..ProductParams::default() };
    let prod = product_tower(&map, &sampler, &plus, &minus, &params).unwrap();
    let sigma = prod.size.std_err;
    let pass = exhaustive.levels == 6 && exhaustive.pairs_checked == 15 && exhaustive.pass() && prod.size.value >= prod.bound - 3.0 * sigma;
    report(
        8,
        "product tower",
        pass,
        format!(
            "periodic: {} levels, {} pairs, {} overlaps; near-periodic: size {:.4} +- {:.4} vs c^2 mu+ mu- = {:.4}",
            exhaustive.levels,
            exhaustive.pairs_checked,
            exhaustive.overlapping.len(),
            prod.size.value,
            sigma,
            prod.bound
        ),
    );
}

/// First index with alpha >= 1/2 for the size law `(n+1)^(-1/4)`, from an
/// independent run of the recursion.
const CROSSING_STEP: usize = 2570;

#[test]
fn c09_lb_schedule() {
    let s = lb_schedule(&SizeLaw::Power(-0.25), ScheduleMode::Single, 3000).unwrap();
    let g = lb_schedule(&SizeLaw::Geometric(2.0), ScheduleMode::Single, 200).unwrap();
    let limit = g.alpha.last().copied().unwrap_or(f64::NAN);
    let pass = s.strictly_increasing
        && s.bounded
        && s.alpha.iter().all(|a| *a < 1.0)
        && s.first_crossing == Some(CROSSING_STEP)
        && g.plateau.is_some()
        && limit < 1.0
        && g.diverges == Some(false);
    report(
        9,
        "LB schedule",
        pass,
        format!(
            "(n+1)^-1/4: increasing {}, bounded {}, crosses 1/2 at {:?} (oracle {CROSSING_STEP}); 2^-n: plateau at {:?}, alpha_inf = {limit:.6}",
            s.strictly_increasing, s.bounded, s.first_crossing, g.plateau
        ),
    );
}

#[test]
fn c10_monochromaticity_consistency() {
    let (_, map) = depth_two_map();
    let sampler = map.sampler();
    let part = CubePartition::new(2).unwrap();
    let mut r = rng("acceptance/c10");
    let mut towers = Vec::new();
    while towers.len() < 10 {
        let h = r.gen_range(2..=6);
        let t = RokhlinTower::new(random_box(&mut r, 0.05, 0.25), h).unwrap();
        if verify_disjointness(&map, &sampler, &t, 5_000, SEED).unwrap().pass {
            towers.push(t);
        }
    }
    let mut worst: f64 = 0.0;
    for (i, t) in towers.iter().enumerate() {
        let m = monochromaticity(&map, &sampler, t, &part, 40_000, SEED + i as u64).unwrap();
        worst = worst.max(m.z_score());
    }
    report(10, "monochromaticity consistency", worst <= 3.0, format!("10 towers against the level-2 cubes: worst z = {worst:.2} (limit 3)"));
}

#[test]
fn c11_matching_bound_soundness() {
    let mut r = rng("acceptance/c11");
    let mut unsound = 0;
    for _ in 0..1000 {
        let n = r.gen_range(5..80);
        let h = r.gen_range(1..8);
        let v = random_word(&mut r, n, 4);
        let w = random_word(&mut r, n, 4);
        let hits = |r: &mut dyn rand::RngCore| {
            let mut out = Vec::new();
            let mut i = r.gen_range(0..h + 3);
            while i + h <= n {
                out.push(i);
                i += h + r.gen_range(0..5);
            }
            out
        };
        let (hv, hw) = (hits(&mut r), hits(&mut r));
        let b = tower_matching_bound(&v, &w, &hv, &hw, h, &MatchParams { alpha: 0.3, c: None }).unwrap();
        if b.bound > lcs_dp(&v.0, &w.0) {
            unsound += 1;
        }
    }
    // Aligned passes through a monochromatic tower, gaps too short to pay
    // for skipping a pass.
    let mut not_equal = 0;
    for _ in 0..100 {
        let h = r.gen_range(6..10);
        let pass_word: Vec<u32> = (0..h as u32).map(|k| 10 + k).collect();
        let (mut v, mut w, mut hits) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..r.gen_range(1..6) {
            let (lv, lw) = (r.gen_range(0..=2), r.gen_range(0..=2));
            let gv = random_word(&mut r, lv, 3);
            let gw = random_word(&mut r, lw, 3);
            v.extend(gv.0);
            w.extend(gw.0);
            hits.push((v.len(), w.len()));
            v.extend(&pass_word);
            w.extend(&pass_word);
        }
        let (hv, hw): (Vec<usize>, Vec<usize>) = hits.into_iter().unzip();
        let b = tower_matching_bound(&Word(v.clone()), &Word(w.clone()), &hv, &hw, h, &MatchParams { alpha: 0.3, c: None }).unwrap();
        if b.bound != lcs_dp(&v, &w) || b.full_passes != hv.len() {
            not_equal += 1;
        }
    }
    report(
        11,
        "matching bound soundness",
        unsound == 0 && not_equal == 0,
        format!("1000 random instances: {unsound} above the LCS; 100 aligned instances: {not_equal} without equality"),
    );
}

fn run_cli(args: &[&str], out: &std::path::Path) -> (Vec<u8>, Vec<(String, Vec<u8>)>) {
    let o = Command::new(env!("CARGO_BIN_EXE_fbar-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    (o.stdout, files)
}

#[test]
fn c12_cli_determinism() {
    let runs: [&[&str]; 6] = [
        &["--seed", "7", "sym", "property-p", "--alpha", "0.2", "--delta", "0.5", "--n", "24", "--samples", "3000", "--translation", "0.1234,0.377,0.61"],
        &["--seed", "7", "diag", "correlation", "--a", "0,0.5,0,0.5,0,0.5", "--b", "0.2,0.7,0.1,0.6,0,1", "--lags", "1,2,4,8,16", "--samples", "2e4", "--emit", "csv"],
        &["--seed", "7", "flow", "measure", "--box", "0.1,0.6,0.2,0.5,0,0.7", "--samples", "20000"],
        &["--seed", "7", "tower", "mono", "--base", "0,0.1,0,0.2,0,0.3", "--height", "4", "--samples", "5000"],
        &["--seed", "7", "tower", "verify", "--base", "0,0.1,0,0.2,0,0.3", "--height", "3", "--samples", "5000"],
        &["--seed", "7", "tower", "schedule", "--law", "(n+1)^-0.25", "--steps", "400"],
    ];
    let mut differing = Vec::new();
    let mut files = 0;
    for args in runs {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let first = run_cli(args, a.path());
        let second = run_cli(args, b.path());
        files += first.1.len();
        if first != second || first.1.is_empty() {
            differing.push(args[2..4].join(" "));
        }
    }
    report(12, "CLI determinism", differing.is_empty(), format!("6 commands run twice, {files} output files compared; differing: {differing:?}"));
}
