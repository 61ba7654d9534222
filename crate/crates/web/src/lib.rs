//! WebAssembly bindings for the browser demo. Each export takes plain
//! strings and numbers and returns a JSON string.

use fbar_lab::roof::{build_p_mu_n, PlateauOptions};
use fbar_lab::rotation::build_rotation;
use fbar_lab::symbolic::{fbar, hamming, match_count, Word};
use fbar_lab::torus::Phase;
use fbar_lab::towers::{lb_schedule, ScheduleMode, SizeLaw};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 20_000;
const MAX_STEPS: usize = 200_000;

#[derive(Debug, Serialize)]
pub struct PlateauCurve {
    pub q: u64,
    pub q_next: u64,
    pub inv_eta: u64,
    pub eta: f64,
    pub degree: i64,
    pub x: Vec<f64>,
    pub poly: Vec<f64>,
    pub profile: Vec<f64>,
    pub plateau_pass: bool,
    pub slope_pass: bool,
}

#[derive(Debug, Serialize)]
pub struct Distances {
    pub length: usize,
    pub common: usize,
    pub fbar: f64,
    pub hamming: f64,
}

#[derive(Debug, Serialize)]
pub struct Schedule {
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
    pub strictly_increasing: bool,
    pub first_crossing: Option<usize>,
    pub plateau: Option<usize>,
}

fn quotients(s: &str) -> Result<Vec<u64>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u64>().map_err(|_| format!("'{t}' is not a partial quotient")))
        .collect()
}

fn words(s: &str) -> Result<Word, String> {
    let t = s.trim();
    if t.contains(',') {
        Word::parse(t).map_err(|e| e.to_string())
    } else {
        let w = Word::from(t);
        if w.len() != t.chars().count() || w.0.contains(&0) {
            return Err(format!("'{t}' must be digits 1-9 or a comma list"));
        }
        Ok(w)
    }
}

/// Plateau polynomial at index `n` sampled on `[0, 1)`.
pub fn plateau_curve_data(pq_x: &str, pq_y: &str, n: usize, mu: f64, points: usize) -> Result<PlateauCurve, String> {
    if points == 0 || points > MAX_POINTS {
        return Err(format!("points must lie in 1..={MAX_POINTS}"));
    }
    let spec = build_rotation(&quotients(pq_x)?, &quotients(pq_y)?, 256).map_err(|e| e.to_string())?;
    let p = build_p_mu_n(&spec, n, mu, &PlateauOptions::default()).map_err(|e| e.to_string())?;
    let profile = p.profile();
    let x: Vec<f64> = (0..points).map(|i| i as f64 / points as f64).collect();
    Ok(PlateauCurve {
        q: p.q,
        q_next: p.q_next,
        inv_eta: p.inv_eta,
        eta: p.eta,
        degree: p.poly.degree(),
        poly: x.iter().map(|&t| p.eval(Phase::from_f64(t))).collect(),
        profile: x.iter().map(|&t| profile.eval(t)).collect(),
        x,
        plateau_pass: p.report.plateau.pass,
        slope_pass: p.report.slope.pass,
    })
}

pub fn distances_data(a: &str, b: &str) -> Result<Distances, String> {
    let (a, b) = (words(a)?, words(b)?);
    let d = fbar(&a, &b).map_err(|e| e.to_string())?;
    let h = hamming(&a, &b).map_err(|e| e.to_string())?;
    Ok(Distances { length: a.len(), common: match_count(&a, &b), fbar: d, hamming: h })
}

pub fn schedule_data(law: &str, mode: &str, steps: usize) -> Result<Schedule, String> {
    if steps > MAX_STEPS {
        return Err(format!("steps must not exceed {MAX_STEPS}"));
    }
    let law = SizeLaw::parse(law).map_err(|e| e.to_string())?;
    let mode = match mode {
        "single" => ScheduleMode::Single,
        "product" => ScheduleMode::Product,
        _ => return Err(format!("unknown mode '{mode}'")),
    };
    let s = lb_schedule(&law, mode, steps).map_err(|e| e.to_string())?;
    Ok(Schedule {
        alpha: s.alpha,
        delta: s.delta,
        strictly_increasing: s.strictly_increasing,
        first_crossing: s.first_crossing,
        plateau: s.plateau,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn plateau_curve(pq_x: &str, pq_y: &str, n: usize, mu: f64, points: usize) -> Result<String, JsError> {
    to_js(plateau_curve_data(pq_x, pq_y, n, mu, points))
}

#[wasm_bindgen]
pub fn distances(a: &str, b: &str) -> Result<String, JsError> {
    to_js(distances_data(a, b))
}

#[wasm_bindgen]
pub fn schedule(law: &str, mode: &str, steps: usize) -> Result<String, JsError> {
    to_js(schedule_data(law, mode, steps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_inputs() {
        assert_eq!(words("1231").unwrap().0, [1, 2, 3, 1]);
        assert_eq!(words(" 10, 2 ,3").unwrap().0, [10, 2, 3]);
        assert!(words("12a").is_err());
        assert!(words("102").is_err());
        assert_eq!(quotients("3, 1365").unwrap(), [3, 1365]);
        assert!(quotients("3;4").is_err());
    }

    #[test]
    fn limits_are_enforced() {
        assert!(plateau_curve_data("3,50", "7", 1, 0.05, 0).is_err());
        assert!(schedule_data("2^-n", "single", MAX_STEPS + 1).is_err());
        assert!(schedule_data("2^-n", "double", 10).is_err());
    }
}
