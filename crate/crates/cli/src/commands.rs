use crate::config::{PlateauConfig, RunConfig, System};
use crate::emit::{CliError, Emitter};
use crate::{Cli, Command, DiagCmd, Emit, FlowCmd, GrowthArg, ModeArg, PolyCmd, RoofCmd, RotCmd, SymCmd, SystemArgs, TowerArgs, TowerCmd};
use fbar_lab::diagnostics::{birkhoff_closed_form, check_mixing_criterion, correlation, CriterionOptions};
use fbar_lab::flow::{invariant_measure, preimage_measure, NormalizedMap};
use fbar_lab::maps::TorusMap;
use fbar_lab::mc;
use fbar_lab::roof::{build_p_mu_n, select_eta_for_q, KernelChoice, PlateauOptions, PlateauWidth, RoofFunction, XTerm};
use fbar_lab::rotation::{check_growth, GrowthModel, RotationSpec};
use fbar_lab::symbolic::{estimate_property_p, fbar, hamming, p_name, CubePartition, PropertyParams, Word};
use fbar_lab::torus::{Box3, Phase, TorusPoint};
use fbar_lab::towers::{
    build_paper_towers, lb_schedule, monochromaticity, precision, product_levels_disjoint, product_tower, verify_disjointness,
    PaperTowerOptions, ProductParams, RokhlinTower, ScheduleMode, SizeLaw,
};
use fbar_lab::trigpoly::{birkhoff_sum, TrigPoly};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

struct Ctx {
    cfg: RunConfig,
    seed: u64,
    bits: Option<u32>,
    emit: Emitter,
}

impl Ctx {
    fn spec(&self) -> Result<RotationSpec, CliError> {
        self.cfg.rotation(self.bits)
    }

    fn samples(&self, s: &Option<String>) -> Result<usize, CliError> {
        match s {
            Some(s) => parse_count(s),
            None => Ok(self.cfg.samples),
        }
    }

    fn system(&self, args: &SystemArgs) -> Result<System, CliError> {
        if let Some(v) = &args.translation {
            let v = parse_floats::<3>(v, "translation")?;
            return Ok(System::translation(v));
        }
        let spec = self.spec()?;
        let map = self.cfg.normalized_map(&spec)?;
        Ok(System::flow(map))
    }

    fn with_roof(&self, depth: Option<usize>, substitute: &[String]) -> Result<RunConfig, CliError> {
        let mut cfg = self.cfg.clone();
        if let Some(d) = depth {
            cfg.roof.depth = d;
        }
        for s in substitute {
            let (n, mu) = s
                .split_once(':')
                .ok_or_else(|| CliError::usage(format!("substitution '{s}' is not n:mu")))?;
            let n: usize = n.trim().parse().map_err(|_| CliError::usage(format!("bad index in '{s}'")))?;
            let mu: f64 = mu.trim().parse().map_err(|_| CliError::usage(format!("bad mu in '{s}'")))?;
            cfg.roof.plateaus.retain(|p| p.n != n);
            cfg.roof.plateaus.push(PlateauConfig { n, mu, options: PlateauOptions::default() });
        }
        Ok(cfg)
    }
}

/// Reads counts such as `100000` or `1e6`.
pub fn parse_count(s: &str) -> Result<usize, CliError> {
    let v: f64 = s.trim().parse().map_err(|_| CliError::usage(format!("cannot read count '{s}'")))?;
    if !(v >= 1.0) || v.fract() != 0.0 || v > 1e15 {
        return Err(CliError::usage(format!("count '{s}' must be a positive integer")));
    }
    Ok(v as usize)
}

fn parse_floats<const N: usize>(s: &str, what: &str) -> Result<[f64; N], CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::usage(format!("{what} '{s}' is not a list of numbers")))?;
    v.try_into().map_err(|_| CliError::usage(format!("{what} '{s}' needs {N} numbers")))
}

fn parse_box(s: &str) -> Result<Box3, CliError> {
    Ok(Box3::parse(s)?)
}

fn point3(s: &str) -> Result<TorusPoint, CliError> {
    let [x, y, z] = parse_floats::<3>(s, "point")?;
    Ok(TorusPoint::new(x, y, z))
}

fn read_poly(path: &Path) -> Result<TrigPoly, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let p: TrigPoly = serde_json::from_str(&text).map_err(|e| CliError::usage(format!("polynomial {}: {e}", path.display())))?;
    Ok(if p.dim() == 1 { p.lift(0) } else { p })
}

fn read_word(path: &Path) -> Result<Word, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(Word::parse(text.trim())?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TowerFile {
    base: String,
    height: u64,
}

fn tower_from(args: &TowerArgs) -> Result<RokhlinTower, CliError> {
    let (base, height) = match (&args.tower, &args.base, args.height) {
        (Some(path), None, None) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            let t: TowerFile = serde_json::from_str(&text).map_err(|e| CliError::usage(format!("tower {}: {e}", path.display())))?;
            (t.base, t.height)
        }
        (None, Some(b), Some(h)) => (b.clone(), h),
        _ => return Err(CliError::usage("give either --tower <file> or both --base and --height")),
    };
    Ok(RokhlinTower::new(parse_box(&base)?, height)?)
}

fn f(v: f64) -> String {
    format!("{v:e}")
}

fn rng(seed: u64, label: &str) -> impl Rng {
    mc::stream(seed, label, 0)
}

fn random_phase2(r: &mut impl Rng) -> [Phase; 2] {
    [Phase::from_f64(r.gen()), Phase::from_f64(r.gen())]
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.unwrap_or(cfg.seed);
    let out = cli.out.clone().or_else(|| cfg.out.clone());
    let ctx = Ctx { cfg, seed, bits: cli.precision_bits, emit: Emitter { out, seed } };
    match cli.command {
        Command::Rot(c) => rot(&ctx, c),
        Command::Poly(c) => poly(&ctx, c),
        Command::Roof(c) => roof(&ctx, c),
        Command::Flow(c) => flow(&ctx, c),
        Command::Sym(c) => sym(&ctx, c),
        Command::Tower(c) => tower(&ctx, c),
        Command::Diag(c) => diag(&ctx, c),
    }
}

#[derive(Serialize)]
struct ConvergentRow {
    n: usize,
    p_x: String,
    q_x: String,
    beta_x: f64,
    p_y: String,
    q_y: String,
    beta_y: f64,
}

#[derive(Serialize)]
struct RotationReport<'a> {
    spec: &'a RotationSpec,
    omega: [f64; 2],
    convergents: Vec<ConvergentRow>,
}

fn rot(ctx: &Ctx, cmd: RotCmd) -> Result<(), CliError> {
    let spec = ctx.spec()?;
    match cmd {
        RotCmd::Build => {
            let depth = spec.x.depth().min(spec.y.depth());
            let convergents = (0..=depth)
                .map(|n| ConvergentRow {
                    n,
                    p_x: spec.x.p(n).to_string(),
                    q_x: spec.x.q(n).to_string(),
                    beta_x: spec.x.beta(n),
                    p_y: spec.y.p(n).to_string(),
                    q_y: spec.y.q(n).to_string(),
                    beta_y: spec.y.beta(n),
                })
                .collect();
            let omega = spec.omega().map(|p| p.to_f64());
            ctx.emit.json("rot-build", &RotationReport { spec: &spec, omega, convergents })?;
            ctx.emit.summary(format!("rotation ({}, {}) with {depth} levels", omega[0], omega[1]));
        }
        RotCmd::CheckGrowth { mode, g, depth } => {
            let model = match mode {
                GrowthArg::Paper => GrowthModel::Paper,
                GrowthArg::Surrogate => GrowthModel::Surrogate { g },
            };
            let depth = depth.unwrap_or_else(|| spec.x.depth().min(spec.y.depth()));
            let report = check_growth(&spec, model, depth)?;
            ctx.emit.json("rot-check-growth", &report)?;
            ctx.emit.summary(format!("growth {}", if report.all_pass() { "PASS" } else { "FAIL" }));
        }
        RotCmd::Orbit { point, steps } => {
            let [x, y] = parse_floats::<2>(&point, "point")?;
            let p = TorusPoint::new(x, y, 0.0);
            let rows = (0..=steps).map(|m| {
                let q = spec.rotate(p, m as i64).to_f64();
                vec![m.to_string(), f(q[0]), f(q[1])]
            });
            ctx.emit.csv("rot-orbit", &["step", "x", "y"], rows)?;
        }
    }
    Ok(())
}

fn kernel_choice(s: &str) -> Result<KernelChoice, CliError> {
    match s {
        "auto" => Ok(KernelChoice::Auto),
        "index-squared" => Ok(KernelChoice::IndexSquared),
        _ => match s.strip_prefix("factor:").and_then(|v| v.parse().ok()) {
            Some(s) => Ok(KernelChoice::Factor { s }),
            None => Err(CliError::usage(format!("unknown kernel '{s}'"))),
        },
    }
}

fn width_choice(s: &str) -> Result<PlateauWidth, CliError> {
    match s {
        "widened" => Ok(PlateauWidth::Widened),
        "literal" => Ok(PlateauWidth::Literal),
        _ => match s.strip_prefix("custom:").and_then(|v| v.parse().ok()) {
            Some(w) => Ok(PlateauWidth::Custom { w }),
            None => Err(CliError::usage(format!("unknown width '{s}'"))),
        },
    }
}

#[derive(Serialize)]
struct EtaReport {
    q: u64,
    inv_eta: u64,
    eta: f64,
}

#[derive(Serialize)]
struct SolveReport {
    transfer: TrigPoly,
    points: usize,
    max_residual: f64,
    norm_bound: f64,
    small_divisor: f64,
}

#[derive(Serialize)]
struct BirkhoffReport {
    m: u64,
    points: usize,
    /// Largest gap between the closed-form sum and the telescoped transfer function.
    max_closed_form_error: f64,
    /// Same against the summed orbit, when `m` is small enough to sum.
    max_direct_error: Option<f64>,
    bound: f64,
}

const DIRECT_SUM_LIMIT: u64 = 100_000;

fn poly(ctx: &Ctx, cmd: PolyCmd) -> Result<(), CliError> {
    match cmd {
        PolyCmd::Plateau { n, mu, kernel, width, curve } => {
            let spec = ctx.spec()?;
            let opts = PlateauOptions { kernel: kernel_choice(&kernel)?, width: width_choice(&width)?, ..PlateauOptions::default() };
            let p = build_p_mu_n(&spec, n, mu, &opts)?;
            match curve {
                Some(points) => {
                    let profile = p.profile();
                    let rows = (0..points.max(1)).map(|i| {
                        let x = i as f64 / points.max(1) as f64;
                        vec![f(x), f(p.eval(Phase::from_f64(x))), f(profile.eval(x))]
                    });
                    ctx.emit.csv("poly-plateau", &["x", "poly", "profile"], rows)?;
                }
                None => ctx.emit.json("poly-plateau", &p)?,
            }
            let r = &p.report;
            ctx.emit.summary(format!(
                "n={n} q={} 1/eta={} plateau {} slope {} norm {}",
                p.q,
                p.inv_eta,
                pass_word(r.plateau.pass),
                pass_word(r.slope.pass),
                pass_word(r.norm.pass)
            ));
        }
        PolyCmd::Eta { q } => {
            let inv_eta = select_eta_for_q(q)?;
            ctx.emit.json("poly-eta", &EtaReport { q, inv_eta, eta: 1.0 / inv_eta as f64 })?;
        }
        PolyCmd::SolveCohomological { file, points, floor } => {
            let spec = ctx.spec()?;
            let p = read_poly(&file)?;
            let q = p.solve_cohomological(&spec, floor)?;
            let omega = spec.omega();
            let mut r = rng(ctx.seed, "poly/residual");
            let max_residual = (0..points)
                .map(|_| {
                    let t = random_phase2(&mut r);
                    let shifted = [t[0].add(omega[0]), t[1].add(omega[1])];
                    (p.evaluate_phase(t) - q.evaluate_phase(shifted) + q.evaluate_phase(t)).abs()
                })
                .fold(0.0, f64::max);
            let report = SolveReport { norm_bound: p.norm_bound(0), small_divisor: p.small_divisor(&spec), transfer: q, points, max_residual };
            ctx.emit.json("poly-solve-cohomological", &report)?;
            ctx.emit.summary(format!("max residual {:e} against norm bound {:e}", report.max_residual, report.norm_bound));
        }
        PolyCmd::Birkhoff { file, m, points, floor } => {
            let spec = ctx.spec()?;
            let p = read_poly(&file)?;
            let q = p.solve_cohomological(&spec, floor)?;
            let mut r = rng(ctx.seed, "poly/birkhoff");
            let mut closed: f64 = 0.0;
            let mut direct: Option<f64> = (m <= DIRECT_SUM_LIMIT).then_some(0.0);
            for _ in 0..points {
                let t = random_phase2(&mut r);
                let end = [t[0].add(spec.x.multiple(m as i64)), t[1].add(spec.y.multiple(m as i64))];
                let tele = q.evaluate_phase(end) - q.evaluate_phase(t);
                closed = closed.max((birkhoff_closed_form(&p, &spec, m, t) - tele).abs());
                if let Some(d) = direct.as_mut() {
                    *d = d.max((birkhoff_sum(|s| p.evaluate_phase(s), &spec, m, t) - tele).abs());
                }
            }
            let bound = p.birkhoff_bound(&spec, m as i64, 0, floor)?;
            let report = BirkhoffReport { m, points, max_closed_form_error: closed, max_direct_error: direct, bound };
            ctx.emit.json("poly-birkhoff", &report)?;
        }
    }
    Ok(())
}

fn pass_word(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

#[derive(Serialize)]
struct PlateauCheck<'a> {
    n: usize,
    q: u64,
    mu: f64,
    inv_eta: u64,
    report: &'a fbar_lab::roof::plateau::PlateauReport,
    pass: bool,
}

#[derive(Serialize)]
struct VerifyPlateauReport<'a> {
    terms: Vec<PlateauCheck<'a>>,
    pass: bool,
}

fn roof(ctx: &Ctx, cmd: RoofCmd) -> Result<(), CliError> {
    let spec = ctx.spec()?;
    match cmd {
        RoofCmd::Build { depth, substitute } => {
            let roof = ctx.with_roof(depth, &substitute)?.roof(&spec)?;
            ctx.emit.json("roof-build", &roof)?;
            ctx.emit.summary(format!("roof depth {} min {:.6} max {:.6}", roof.depth, roof.lower_bound(), roof.upper_bound()));
        }
        RoofCmd::VerifyPlateau { depth, substitute } => {
            let roof = ctx.with_roof(depth, &substitute)?.roof(&spec)?;
            let terms: Vec<PlateauCheck> = roof
                .x_terms
                .iter()
                .filter_map(|t| match t {
                    XTerm::Plateau(p) => Some(p),
                    XTerm::Cosine(_) => None,
                })
                .map(|p| {
                    let r = &p.report;
                    let pass = r.zero_average && r.inv_eta_multiple && r.plateau.pass && r.slope.pass;
                    PlateauCheck { n: p.n, q: p.q, mu: p.mu, inv_eta: p.inv_eta, report: r, pass }
                })
                .collect();
            if terms.is_empty() {
                return Err(CliError::usage("roof has no plateau terms; pass --substitute n:mu"));
            }
            let pass = terms.iter().all(|t| t.pass);
            ctx.emit.json("roof-verify-plateau", &VerifyPlateauReport { terms, pass })?;
            ctx.emit.summary(format!("plateau terms {}", pass_word(pass)));
        }
        RoofCmd::Grid { depth, substitute, grid } => {
            let roof = ctx.with_roof(depth, &substitute)?.roof(&spec)?;
            let g = grid.max(1);
            let rows = (0..g).flat_map(|i| (0..g).map(move |j| (i, j))).map(|(i, j)| {
                let (x, y) = (i as f64 / g as f64, j as f64 / g as f64);
                vec![f(x), f(y), f(roof.eval(x, y))]
            });
            ctx.emit.csv("roof-grid", &["x", "y", "value"], rows)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct OrbitReport {
    points: Vec<[f64; 3]>,
}

#[derive(Serialize)]
struct MeasureReport {
    region: Box3,
    k: i64,
    closed_form: f64,
    direct: fbar_lab::mc::Estimate,
    preimage: fbar_lab::mc::Estimate,
    /// `|direct - preimage|` over the combined standard error.
    z: f64,
}

#[derive(Serialize)]
struct ConstantReport {
    points: usize,
    sup_error: f64,
    tolerance: f64,
    pass: bool,
}

pub const CONSTANT_ROOF_TOLERANCE: f64 = 1e-12;

fn flow(ctx: &Ctx, cmd: FlowCmd) -> Result<(), CliError> {
    match cmd {
        FlowCmd::Orbit { point, steps, emit } => {
            let sys = ctx.system(&SystemArgs { translation: None })?;
            let mut p = point3(&point)?;
            let mut pts = vec![p.to_f64()];
            for _ in 0..steps {
                p = sys.map.apply(p)?;
                pts.push(p.to_f64());
            }
            match emit {
                Emit::Csv => {
                    let rows = pts.iter().enumerate().map(|(i, q)| vec![i.to_string(), f(q[0]), f(q[1]), f(q[2])]);
                    ctx.emit.csv("flow-orbit", &["step", "x", "y", "z"], rows)?;
                }
                Emit::Json => ctx.emit.json("flow-orbit", &OrbitReport { points: pts })?,
            }
        }
        FlowCmd::Measure { region, samples, k } => {
            let sys = ctx.system(&SystemArgs { translation: None })?;
            let b = parse_box(&region)?;
            let n = ctx.samples(&samples)?;
            let direct = invariant_measure(sys.sampler.as_ref(), &b, n, ctx.seed, "flow/measure")?;
            let preimage = preimage_measure(sys.map.as_ref(), sys.sampler.as_ref(), &b, k, n, ctx.seed, "flow/preimage")?;
            let se = direct.std_err.hypot(preimage.std_err);
            let gap = (direct.value - preimage.value).abs();
            let z = if se > 0.0 { gap / se } else if gap == 0.0 { 0.0 } else { f64::INFINITY };
            let report = MeasureReport { closed_form: sys.sampler.box_measure(&b), region: b, k, direct, preimage, z };
            ctx.emit.json("flow-measure", &report)?;
            ctx.emit.summary(format!("mu(A) = {:.6}, mu(G^-{k} A) = {:.6}, z = {:.2}", direct.value, preimage.value, z));
        }
        FlowCmd::ConstantCheck { points } => {
            let spec = ctx.spec()?;
            let report = constant_roof_check(&spec, points, ctx.seed)?;
            ctx.emit.json("flow-constant-check", &report)?;
            ctx.emit.summary(format!("sup error {:e} {}", report.sup_error, pass_word(report.pass)));
        }
    }
    Ok(())
}

fn constant_roof_check(spec: &RotationSpec, points: usize, seed: u64) -> Result<ConstantReport, CliError> {
    let map = NormalizedMap::new(Arc::new(RoofFunction::unit()), spec, Default::default())?;
    let omega = spec.omega();
    let mut r = rng(seed, "flow/constant");
    let mut sup: f64 = 0.0;
    for _ in 0..points {
        let p = TorusPoint::new(r.gen(), r.gen(), r.gen());
        let expected = TorusPoint { x: p.x.add(omega[0]), y: p.y.add(omega[1]), z: p.z };
        sup = sup.max(map.apply(p)?.dist(expected));
    }
    Ok(ConstantReport { points, sup_error: sup, tolerance: CONSTANT_ROOF_TOLERANCE, pass: sup <= CONSTANT_ROOF_TOLERANCE })
}

#[derive(Serialize)]
struct FbarReport {
    length_a: usize,
    length_b: usize,
    fbar: f64,
    hamming: Option<f64>,
}

fn sym(ctx: &Ctx, cmd: SymCmd) -> Result<(), CliError> {
    match cmd {
        SymCmd::Name { point, n, level, system } => {
            let sys = ctx.system(&system)?;
            let part = CubePartition::new(level)?;
            let w = p_name(sys.map.as_ref(), &part, point3(&point)?, n)?;
            ctx.emit.raw("sym-name", "csv", &w.to_csv())?;
        }
        SymCmd::Fbar { file_a, file_b } => {
            let (a, b) = (read_word(&file_a)?, read_word(&file_b)?);
            let d = fbar(&a, &b)?;
            let h = if a.len() == b.len() { Some(hamming(&a, &b)?) } else { None };
            println!("{d}");
            if ctx.emit.out.is_some() {
                ctx.emit.json("sym-fbar", &FbarReport { length_a: a.len(), length_b: b.len(), fbar: d, hamming: h })?;
            }
        }
        SymCmd::PropertyP { alpha, delta, n, centers, samples, level, system } => {
            let sys = ctx.system(&system)?;
            let part = CubePartition::new(level)?;
            let params = PropertyParams { alpha, delta, n, centers, samples: ctx.samples(&samples)?, seed: ctx.seed };
            let report = estimate_property_p(sys.map.as_ref(), &part, sys.sampler.as_ref(), &params)?;
            ctx.emit.json("sym-property-p", &report)?;
            ctx.emit.summary(format!("property P({alpha}, {delta}, {n}) {} best fraction {:.4}", pass_word(report.pass), report.best_fraction));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct TowerEstimate {
    tower: RokhlinTower,
    size: f64,
    precision: fbar_lab::mc::Estimate,
}

#[derive(Serialize)]
struct MonoOutput {
    tower: RokhlinTower,
    level: u32,
    report: fbar_lab::towers::MonochromReport,
    z_score: f64,
}

#[derive(Serialize)]
struct ProductOutput {
    product: fbar_lab::towers::ProductTower,
    /// Exhaustive level check, available for translations.
    exhaustive: Option<fbar_lab::towers::ProductDisjointness>,
}

fn tower(ctx: &Ctx, cmd: TowerCmd) -> Result<(), CliError> {
    match cmd {
        TowerCmd::Verify { tower, samples, system } => {
            let sys = ctx.system(&system)?;
            let t = tower_from(&tower)?;
            let cert = verify_disjointness(sys.map.as_ref(), sys.sampler.as_ref(), &t, ctx.samples(&samples)?, ctx.seed)?;
            ctx.emit.json("tower-verify", &cert)?;
            ctx.emit.summary(format!("disjointness {}: {}", pass_word(cert.pass), cert.note));
        }
        TowerCmd::Precision { tower, samples, system } => {
            let sys = ctx.system(&system)?;
            let t = tower_from(&tower)?;
            let rho = precision(sys.map.as_ref(), sys.sampler.as_ref(), &t, ctx.samples(&samples)?, ctx.seed)?;
            ctx.emit.json("tower-precision", &TowerEstimate { size: t.size(sys.sampler.as_ref()), tower: t, precision: rho })?;
        }
        TowerCmd::Mono { tower, level, samples, system } => {
            let sys = ctx.system(&system)?;
            let t = tower_from(&tower)?;
            let part = CubePartition::new(level)?;
            let report = monochromaticity(sys.map.as_ref(), sys.sampler.as_ref(), &t, &part, ctx.samples(&samples)?, ctx.seed)?;
            let z_score = report.z_score();
            ctx.emit.summary(format!("Delta = {:.6}, difference set = {:.6}, z = {z_score:.2}", report.delta.value, report.difference_set.value));
            ctx.emit.json("tower-mono", &MonoOutput { tower: t, level, report, z_score })?;
        }
        TowerCmd::Product { plus, plus_height, minus, minus_height, c, samples, system } => {
            let sys = ctx.system(&system)?;
            let plus = RokhlinTower::new(parse_box(&plus)?, plus_height)?;
            let minus = RokhlinTower::new(parse_box(&minus)?, minus_height)?;
            let params = ProductParams { c, samples: ctx.samples(&samples)?, seed: ctx.seed, ..ProductParams::default() };
            let product = product_tower(sys.map.as_ref(), sys.sampler.as_ref(), &plus, &minus, &params)?;
            let exhaustive = sys.map.translation().map(|v| product_levels_disjoint(&plus, &minus, v));
            ctx.emit.summary(format!("product size {:.4} against bound {:.4}: {}", product.size.value, product.bound, pass_word(product.pass)));
            ctx.emit.json("tower-product", &ProductOutput { product, exhaustive })?;
        }
        TowerCmd::PaperBuild { m, mu, samples, max_l } => {
            let spec = ctx.spec()?;
            let map = ctx.cfg.normalized_map(&spec)?;
            let opts = PaperTowerOptions { samples: ctx.samples(&samples)?, seed: ctx.seed, max_l, ..PaperTowerOptions::default() };
            let report = build_paper_towers(&map, &spec, m, mu, &opts)?;
            ctx.emit.summary(format!("constructed towers at m={m}: {}", pass_word(report.pass)));
            for d in &report.diagnostics {
                ctx.emit.summary(format!("  {d}"));
            }
            ctx.emit.json("tower-paper-build", &report)?;
        }
        TowerCmd::Schedule { law, mode, steps, emit } => {
            let law = SizeLaw::parse(&law)?;
            let mode = match mode {
                ModeArg::Single => ScheduleMode::Single,
                ModeArg::Product => ScheduleMode::Product,
            };
            let s = lb_schedule(&law, mode, steps)?;
            ctx.emit.summary(format!(
                "strictly increasing {}, bounded {}, first crossing {:?}, plateau {:?}",
                s.strictly_increasing, s.bounded, s.first_crossing, s.plateau
            ));
            match emit {
                Emit::Csv => {
                    let rows = (0..s.alpha.len()).map(|n| {
                        let d = s.delta.get(n).copied().map(f).unwrap_or_default();
                        let size = s.sizes.get(n).copied().map(f).unwrap_or_default();
                        vec![n.to_string(), size, f(s.alpha[n]), d]
                    });
                    ctx.emit.csv("tower-schedule", &["n", "size", "alpha", "delta"], rows)?;
                }
                Emit::Json => ctx.emit.json("tower-schedule", &s)?,
            }
        }
    }
    Ok(())
}

fn diag(ctx: &Ctx, cmd: DiagCmd) -> Result<(), CliError> {
    match cmd {
        DiagCmd::Correlation { a, b, lags, samples, emit, system } => {
            let sys = ctx.system(&system)?;
            let (a, b) = (parse_box(&a)?, parse_box(&b)?);
            let series = correlation(sys.map.as_ref(), sys.sampler.as_ref(), &a, &b, &lags, ctx.samples(&samples)?, ctx.seed)?;
            match emit {
                Emit::Csv => {
                    let rows = series.points.iter().map(|p| {
                        vec![p.lag.to_string(), f(p.joint.value), f(p.joint.std_err), f(p.signed), f(p.value.value)]
                    });
                    ctx.emit.csv("diag-correlation", &["lag", "joint", "joint_se", "signed", "abs"], rows)?;
                }
                Emit::Json => ctx.emit.json("diag-correlation", &series)?,
            }
        }
        DiagCmd::Criterion { n, m, grid, r_x, r_y } => {
            let spec = ctx.spec()?;
            let roof = ctx.cfg.roof(&spec)?;
            let opts = CriterionOptions { grid, r_x, r_y, ..CriterionOptions::default() };
            let report = check_mixing_criterion(&roof, &spec, n, &m, &opts)?;
            ctx.emit.summary(format!("criterion at n={n}: {}", pass_word(report.pass)));
            ctx.emit.json("diag-criterion", &report)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_accept_scientific_notation() {
        assert_eq!(parse_count("1e6").unwrap(), 1_000_000);
        assert_eq!(parse_count(" 250 ").unwrap(), 250);
        for bad in ["0", "-3", "2.5", "many"] {
            assert_eq!(parse_count(bad).unwrap_err().code, 2);
        }
    }

    #[test]
    fn float_lists_need_the_right_length() {
        assert_eq!(parse_floats::<3>("0.1, 0.2,0.3", "v").unwrap(), [0.1, 0.2, 0.3]);
        assert!(parse_floats::<3>("0.1,0.2", "v").is_err());
        assert!(parse_floats::<2>("a,b", "v").is_err());
    }

    #[test]
    fn plateau_choices() {
        assert_eq!(kernel_choice("factor:9").unwrap(), KernelChoice::Factor { s: 9.0 });
        assert_eq!(width_choice("custom:0.1").unwrap(), PlateauWidth::Custom { w: 0.1 });
        assert!(kernel_choice("wide").is_err());
        assert!(width_choice("custom:x").is_err());
    }

    #[test]
    fn substitutions_replace_configured_plateaus() {
        let ctx = Ctx { cfg: RunConfig::default(), seed: 0, bits: None, emit: Emitter { out: None, seed: 0 } };
        let cfg = ctx.with_roof(Some(3), &["1:0.02".into(), "1:0.03".into(), "2:0.01".into()]).unwrap();
        assert_eq!(cfg.roof.depth, 3);
        let got: Vec<(usize, f64)> = cfg.roof.plateaus.iter().map(|p| (p.n, p.mu)).collect();
        assert_eq!(got, [(1, 0.03), (2, 0.01)]);
        assert!(ctx.with_roof(None, &["1-0.02".into()]).is_err());
    }
}
