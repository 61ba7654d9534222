use fbar_lab::flow::{Anchor, NormalizedMap};
use fbar_lab::maps::TorusMap;
use fbar_lab::roof::RoofFunction;
use fbar_lab::rotation::build_rotation;
use fbar_lab::symbolic::{p_name, property_p_from_names, CubePartition, Word};
use fbar_lab::torus::TorusPoint;
use std::sync::Arc;

fn brute_lcs(a: &[u32], b: &[u32]) -> usize {
    (0u32..1 << a.len())
        .filter(|mask| {
            let sub: Vec<u32> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| a[i]).collect();
            let mut it = b.iter();
            sub.iter().all(|c| it.any(|d| d == c))
        })
        .map(|m| m.count_ones() as usize)
        .max()
        .unwrap_or(0)
}

#[test]
fn property_p_fraction_matches_grid_oracle() {
    let spec = build_rotation(&[2, 3, 5, 7, 11], &[3, 1, 4, 1, 5], 256).unwrap();
    let map = NormalizedMap::new(Arc::new(RoofFunction::unit()), &spec, Anchor::Translated).unwrap();
    let part = CubePartition::new(1).unwrap();
    let (ox, oy) = (spec.x.omega().to_f64(), spec.y.omega().to_f64());
    let n = 4;
    let g = 64;
    let grid: Vec<TorusPoint> = (0..g * g * g)
        .map(|i| TorusPoint::new((i / (g * g)) as f64 / g as f64, (i / g % g) as f64 / g as f64, (i % g) as f64 / g as f64))
        .collect();
    // Names from closed-form orbits, away from the cell walls.
    let oracle_name = |p: &TorusPoint| -> Word {
        let [x, y, z] = p.to_f64();
        Word(
            (0..n)
                .map(|j| {
                    let cx = ((x + j as f64 * ox).fract() * 2.0) as u32;
                    let cy = ((y + j as f64 * oy).fract() * 2.0) as u32;
                    let cz = (z * 2.0) as u32;
                    cx * 4 + cy * 2 + cz + 1
                })
                .collect(),
        )
    };
    let names: Vec<Word> = grid.iter().map(|p| p_name(&map, &part, *p, n).unwrap()).collect();
    let oracle: Vec<Word> = grid.iter().map(oracle_name).collect();
    let agree = names.iter().zip(&oracle).filter(|(a, b)| a == b).count();
    assert!(agree as f64 >= 0.999 * grid.len() as f64, "{agree} of {}", grid.len());

    let centres = vec![names[0].clone(), names[12345].clone(), names[200_000].clone()];
    let alpha = 0.4;
    let r = property_p_from_names(&centres, &names, alpha, 0.5).unwrap();
    for (c, frac) in centres.iter().zip(&r.per_center) {
        let hits = oracle
            .iter()
            .filter(|w| ((n - brute_lcs(&c.0, &w.0)) as f64 / n as f64) < (1.0 - alpha) / 2.0)
            .count();
        let expect = hits as f64 / oracle.len() as f64;
        assert!((frac - expect).abs() <= 0.001, "{frac} vs {expect}");
    }
}

#[test]
fn normalized_map_inverts() {
    let spec = build_rotation(&[1; 30], &[2; 20], 256).unwrap();
    let roof = fbar_lab::roof::assemble_roof(&spec, &fbar_lab::trigpoly::TrigPoly::zero(2), Default::default(), 3).unwrap();
    let map = NormalizedMap::new(Arc::new(roof), &spec, Anchor::Translated).unwrap();
    for i in 0..50 {
        let p = TorusPoint::new(i as f64 / 50.0, (i * 7 % 50) as f64 / 50.0, (i * 13 % 50) as f64 / 51.0);
        let back = map.apply_inverse(map.apply(p).unwrap()).unwrap();
        assert!(p.dist(back) < 1e-12, "{p:?} -> {back:?}");
    }
}
