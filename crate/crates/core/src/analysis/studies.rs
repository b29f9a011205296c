use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{residual_verdict, PointRecord, SlopeRecord, StudyReport, StudyTable, Verdict};
use super::{combine_profiles, concentration_check, fit_slope, ConcentrationReport};
use crate::constructions::{
    build_f, build_multiblock, sequence_an, Atom, AtomicFunction, ConstructionMeta, Multiblock,
};
use crate::error::{Error, Result};
use crate::grid::{render, render_field, DyadicCube, Field, GridFunction, DEFAULT_BUDGET_CELLS, DEFAULT_GUARD};
use crate::lorentz::{atomic_lorentz_norm, lorentz_seq_norm, phi_distribution};
use crate::oracle::seminorm_quadrature;
use crate::smoothness::{
    discrete_seminorm, maximal_modulus, scale_profile, Params, ScaleProfile, SeminormReport, DEFAULT_K_MIN,
};

/// Allowed deviation of a fitted slope from its target.
pub const SLOPE_TOLERANCE: f64 = 0.10;
/// Slack above `1/q` allowed for the multi-block seminorm slope.
pub const SEMINORM_SLOPE_SLACK: f64 = 0.15;
/// Largest max/min spread of `|f|_p / |f|_*` over the `f_{N,n}` family.
pub const FAMILY_SPREAD_LIMIT: f64 = 2.0;
/// Largest max/min spread of each embedding link over the whole suite.
pub const LINK_SPREAD_LIMIT: f64 = 10.0;

/// `n = factor * N + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NRule {
    pub factor: u32,
    pub offset: u32,
}

impl Default for NRule {
    fn default() -> Self {
        Self { factor: 2, offset: 4 }
    }
}

impl NRule {
    pub fn apply(&self, big_n: u32) -> u32 {
        self.factor * big_n + self.offset
    }
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

fn logs(v: impl IntoIterator<Item = f64>) -> Vec<f64> {
    v.into_iter().map(f64::ln).collect()
}

/// Seminorm of a rendered function over `[k_min, m - guard]`.
fn seminorm_of(
    f: &Field,
    params: &Params,
    k_min: i32,
    k_max: i32,
    guard: i32,
) -> Result<(ScaleProfile, SeminormReport)> {
    let prof = scale_profile(f, k_min, k_max, params, guard)?;
    let sem = discrete_seminorm(&prof)?;
    Ok((prof, sem))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QlpConfig {
    pub params: Params,
    pub n_list: Vec<u32>,
    pub n_rule: NRule,
    pub guard: i32,
    /// Generations resolved beyond the finest atom: `k_max = n + fine_depth`.
    pub fine_depth: i32,
    /// Fixed resolution for every point instead of `n + fine_depth + guard`.
    pub m: Option<i32>,
    pub k_min: i32,
    pub k_max: Option<i32>,
    pub budget: u64,
}

impl QlpConfig {
    pub fn new(params: Params, n_list: Vec<u32>) -> Self {
        Self {
            params,
            n_list,
            n_rule: NRule::default(),
            guard: DEFAULT_GUARD,
            fine_depth: 8,
            m: None,
            k_min: DEFAULT_K_MIN,
            k_max: None,
            budget: DEFAULT_BUDGET_CELLS,
        }
    }
}

/// Ratio `R(N) = |f_{N,n}|_{L_{p,q}} / |f_{N,n}|_*` for `q < p`, which should
/// grow like `N^{1/q - 1/p}`.
pub fn study_qlp(cfg: &QlpConfig) -> Result<StudyReport> {
    let pr = cfg.params;
    if pr.q >= pr.p {
        return Err(Error::InvalidParameters(format!(
            "study-qlp needs q < p, got p={} q={}",
            pr.p, pr.q
        )));
    }
    if cfg.n_list.len() < 2 {
        return Err(Error::InvalidParameters(
            "study-qlp needs at least two values of N".into(),
        ));
    }
    let phi = phi_distribution(pr.d)?;
    let points = cfg
        .n_list
        .par_iter()
        .map(|&big_n| {
            let n = cfg.n_rule.apply(big_n);
            let m = cfg.m.unwrap_or(n as i32 + cfg.fine_depth + cfg.guard);
            let k_max = cfg.k_max.unwrap_or(m - cfg.guard);
            let f = build_f(big_n, n, &pr)?;
            let field = render_field(&f, m, cfg.guard, cfg.budget)?;
            let (prof, sem) = seminorm_of(&field, &pr, cfg.k_min, k_max, cfg.guard)?;
            let lor = atomic_lorentz_norm(&f, phi, pr.p, pr.q)?;
            let seq = sequence_an(big_n, &pr)?;
            let row = vec![
                sem.value,
                lor,
                lor / sem.value,
                n as f64,
                m as f64,
                lorentz_seq_norm(&seq, pr.p, pr.p),
                lorentz_seq_norm(&seq, pr.p, pr.q),
            ];
            let rec = PointRecord {
                id: format!("N{big_n}"),
                resolutions: vec![m],
                k_min: cfg.k_min,
                k_max,
                seminorm: sem,
            };
            Ok((big_n, row, rec, prof))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = StudyTable::new(&["N", "seminorm", "lorentz", "ratio", "n", "m", "seq_lp", "seq_lpq"]);
    let mut records = Vec::new();
    let mut profiles = Vec::new();
    for (big_n, row, rec, prof) in points {
        table.push(big_n.to_string(), row);
        profiles.push((rec.id.clone(), prof));
        records.push(rec);
    }
    let ratios = table.column("ratio").expect("ratio column");
    let xs = logs(cfg.n_list.iter().map(|&n| n as f64));
    let fit = fit_slope(&xs, &logs(ratios.iter().copied()))?;
    let expected = 1.0 / pr.q - 1.0 / pr.p;
    let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    let min_step = ratios.windows(2).map(|w| w[1] / w[0]).fold(f64::INFINITY, f64::min);
    let verdicts = vec![
        Verdict::new(
            "ratio_slope",
            (fit.slope - expected).abs() <= SLOPE_TOLERANCE,
            fit.slope,
            format!("|slope - {expected:.4}| <= {SLOPE_TOLERANCE}"),
        ),
        Verdict::new("ratio_increasing", increasing, min_step, "R(N_i+1) / R(N_i) > 1"),
        residual_verdict("ratio_slope", &fit),
    ];
    Ok(StudyReport {
        study: "study-qlp".into(),
        params: pr,
        inputs: serde_json::to_value(cfg)?,
        table,
        points: records,
        slopes: vec![SlopeRecord {
            name: "log_ratio_vs_log_N".into(),
            fit,
            expected,
        }],
        concentration: Vec::new(),
        verdicts,
        profiles,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QgpConfig {
    pub params: Params,
    pub t_list: Vec<u32>,
    pub delta_scale: u32,
    pub guard: i32,
    /// Each block `M` is profiled up to `k_max = M + fine_depth`.
    pub fine_depth: i32,
    /// Defaults to `-2 M_max - 8`.
    pub k_min: Option<i32>,
    pub budget: u64,
}

impl QgpConfig {
    pub fn new(params: Params, t_list: Vec<u32>, delta_scale: u32) -> Self {
        Self {
            params,
            t_list,
            delta_scale,
            guard: DEFAULT_GUARD,
            fine_depth: 6,
            k_min: None,
            budget: DEFAULT_BUDGET_CELLS,
        }
    }

    pub fn resolved_k_min(&self) -> i32 {
        let t_max = self.t_list.iter().copied().max().unwrap_or(1);
        self.k_min.unwrap_or(-2 * (t_max * self.delta_scale) as i32 - 8)
    }
}

/// Profile of every placed block of `mb`, each rendered at
/// `M + fine_depth + guard` and profiled over `[certified_k_min, M + fine_depth]`.
pub fn block_profiles(
    mb: &Multiblock,
    params: &Params,
    fine_depth: i32,
    guard: i32,
    budget: u64,
) -> Result<Vec<(i32, ScaleProfile)>> {
    mb.blocks
        .par_iter()
        .map(|b| {
            let scale = b.block_scale as i32;
            let m = scale + fine_depth + guard;
            let field = render_field(&b.block.translated(b.offset)?, m, guard, budget)?;
            Ok((
                m,
                scale_profile(&field, mb.certified_k_min, scale + fine_depth, params, guard)?,
            ))
        })
        .collect()
}

/// Multi-block function `Phi_T` for `1 < p < q`: the seminorm should grow at
/// most like `T^{1/q}` and the Lorentz norm like `T^{1/p}`.
pub fn study_qgp(cfg: &QgpConfig) -> Result<StudyReport> {
    let pr = cfg.params;
    if !(1.0 < pr.p && pr.p < pr.q) {
        return Err(Error::InvalidParameters(format!(
            "study-qgp needs 1 < p < q, got p={} q={}",
            pr.p, pr.q
        )));
    }
    if cfg.t_list.len() < 2 || cfg.t_list.contains(&0) {
        return Err(Error::InvalidParameters(
            "study-qgp needs at least two positive T".into(),
        ));
    }
    let k_min = cfg.resolved_k_min();
    let t_max = *cfg.t_list.iter().max().expect("nonempty");
    let mb = build_multiblock(t_max, cfg.delta_scale, &pr, k_min)?;
    let blocks = block_profiles(&mb, &pr, cfg.fine_depth, cfg.guard, cfg.budget)?;
    let concentration: Vec<ConcentrationReport> = mb
        .blocks
        .iter()
        .zip(&blocks)
        .map(|(b, (_, prof))| concentration_check(prof, b.block_scale as i32))
        .collect();

    let phi = phi_distribution(pr.d)?;
    let mut table = StudyTable::new(&["T", "seminorm", "lorentz", "tail_fraction"]);
    let mut records = Vec::new();
    let mut profiles = Vec::new();
    for (b, (_, prof)) in mb.blocks.iter().zip(&blocks) {
        profiles.push((format!("block_M{}", b.block_scale), prof.clone()));
    }
    for &t in &cfg.t_list {
        let n = t as usize;
        let own: Vec<ScaleProfile> = blocks[..n].iter().map(|b| b.1.clone()).collect();
        let combined = combine_profiles(&own, Some(mb.certified_k_min))?;
        let sem = discrete_seminorm(&combined)?;
        let phi_t = build_multiblock(t, cfg.delta_scale, &pr, k_min)?;
        let lor = atomic_lorentz_norm(&phi_t.assembled()?, phi, pr.p, pr.q)?;
        table.push(t.to_string(), vec![sem.value, lor, sem.tail_fraction]);
        records.push(PointRecord {
            id: format!("T{t}"),
            resolutions: blocks[..n].iter().map(|b| b.0).collect(),
            k_min: combined.k_min,
            k_max: combined.k_max,
            seminorm: sem,
        });
        profiles.push((format!("T{t}"), combined));
    }

    let xs = logs(cfg.t_list.iter().map(|&t| t as f64));
    let sem_fit = fit_slope(&xs, &logs(table.column("seminorm").expect("column")))?;
    let lor_fit = fit_slope(&xs, &logs(table.column("lorentz").expect("column")))?;
    let (sem_target, lor_target) = (1.0 / pr.q, 1.0 / pr.p);
    let mut verdicts = vec![
        Verdict::new(
            "lorentz_slope",
            (lor_fit.slope - lor_target).abs() <= SLOPE_TOLERANCE,
            lor_fit.slope,
            format!("|slope - {lor_target:.4}| <= {SLOPE_TOLERANCE}"),
        ),
        Verdict::new(
            "seminorm_slope",
            sem_fit.slope <= sem_target + SEMINORM_SLOPE_SLACK,
            sem_fit.slope,
            format!("slope <= {:.4}", sem_target + SEMINORM_SLOPE_SLACK),
        ),
        residual_verdict("lorentz_slope", &lor_fit),
        residual_verdict("seminorm_slope", &sem_fit),
    ];
    for c in &concentration {
        verdicts.push(Verdict::new(
            &format!("concentration_M{}", c.block_scale),
            c.passed,
            c.nu,
            "peak within 1 of M and both decay rates > 0",
        ));
    }
    Ok(StudyReport {
        study: "study-qgp".into(),
        params: pr,
        inputs: serde_json::json!({ "config": cfg, "k_min": k_min, "gap": mb.gap }),
        table,
        points: records,
        slopes: vec![
            SlopeRecord {
                name: "log_seminorm_vs_log_T".into(),
                fit: sem_fit,
                expected: sem_target,
            },
            SlopeRecord {
                name: "log_lorentz_vs_log_T".into(),
                fit: lor_fit,
                expected: lor_target,
            },
        ],
        concentration,
        verdicts,
        profiles,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpConfig {
    pub params: Params,
    pub n_list: Vec<u32>,
    pub n_rule: NRule,
    pub random_count: usize,
    pub seed: u64,
    pub guard: i32,
    pub fine_depth: i32,
    pub k_min: i32,
    /// Resolution of the random suite functions on the unit cube.
    pub random_m: i32,
    pub budget: u64,
}

impl PpConfig {
    pub fn new(params: Params, seed: u64) -> Self {
        Self {
            params,
            n_list: (2..=6).collect(),
            n_rule: NRule::default(),
            random_count: 10,
            seed,
            guard: DEFAULT_GUARD,
            fine_depth: 6,
            k_min: DEFAULT_K_MIN,
            random_m: if params.d == 1 { 12 } else { 8 },
            budget: DEFAULT_BUDGET_CELLS,
        }
    }
}

/// Trigonometric polynomial of degree 4 per axis times a smooth cutoff on
/// `[0,1)^d`, sampled at resolution `m`. Coefficients come from the
/// ChaCha8 stream `index` of `seed`.
pub fn random_smooth_function(d: usize, m: i32, seed: u64, index: u64) -> Result<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let coeffs: Vec<[f64; 8]> = (0..d)
        .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
        .collect();
    let tau = std::f64::consts::TAU;
    let n = 1usize << m;
    GridFunction::from_fn(d, m, &vec![0; d], &vec![n; d], |x| {
        let mut v = 1.0;
        for (a, c) in coeffs.iter().enumerate() {
            let u = x[a];
            let s = 2.0 * u - 1.0;
            let cutoff = if s.abs() < 1.0 {
                (1.0 - 1.0 / (1.0 - s * s)).exp()
            } else {
                0.0
            };
            let trig: f64 = (1..=4)
                .map(|j| c[2 * j - 2] * (tau * j as f64 * u).cos() + c[2 * j - 1] * (tau * j as f64 * u).sin())
                .sum();
            v *= cutoff * trig;
        }
        v
    })
}

fn unit_atom(d: usize) -> Result<AtomicFunction> {
    AtomicFunction::new(
        d,
        vec![Atom {
            cube: DyadicCube::new(0, [0, 0]),
            coefficient: 1.0,
        }],
        ConstructionMeta {
            kind: "bump".into(),
            ..Default::default()
        },
    )
}

enum SuiteEntry {
    Bump,
    Family(u32),
    Random(u64),
}

/// Chain `|f|_p <~ |f^#|_p <~ |f|_*` for `p = q > 1` over a suite: the
/// reference bump, the `f_{N,n}` family and seeded random smooth functions.
/// Constants are left out since their seminorm vanishes.
pub fn study_pp(cfg: &PpConfig) -> Result<StudyReport> {
    let pr = cfg.params;
    if !(pr.p > 1.0 && pr.p == pr.q) {
        return Err(Error::InvalidParameters(format!(
            "study-pp needs p = q > 1, got p={} q={}",
            pr.p, pr.q
        )));
    }
    let mut suite = vec![SuiteEntry::Bump];
    suite.extend(cfg.n_list.iter().map(|&n| SuiteEntry::Family(n)));
    suite.extend((0..cfg.random_count as u64).map(SuiteEntry::Random));

    let rows = suite
        .par_iter()
        .map(|entry| {
            let (id, field, m) = match entry {
                SuiteEntry::Bump => {
                    let m = cfg.fine_depth + cfg.guard;
                    (
                        "bump".to_string(),
                        render_field(&unit_atom(pr.d)?, m, cfg.guard, cfg.budget)?,
                        m,
                    )
                }
                SuiteEntry::Family(big_n) => {
                    let n = cfg.n_rule.apply(*big_n);
                    let m = n as i32 + cfg.fine_depth + cfg.guard;
                    let f = build_f(*big_n, n, &pr)?;
                    (format!("f_N{big_n}"), render_field(&f, m, cfg.guard, cfg.budget)?, m)
                }
                SuiteEntry::Random(i) => {
                    let g = random_smooth_function(pr.d, cfg.random_m, cfg.seed, *i)?;
                    (format!("random_{i}"), Field::from(g), cfg.random_m)
                }
            };
            let k_max = m - cfg.guard;
            let (prof, sem) = seminorm_of(&field, &pr, cfg.k_min, k_max, cfg.guard)?;
            let lp = field.lp_norm(pr.p)?;
            let mm = maximal_modulus(&field, cfg.k_min, k_max, cfg.guard)?.lp_norm(pr.p)?;
            let rec = PointRecord {
                id: id.clone(),
                resolutions: vec![m],
                k_min: cfg.k_min,
                k_max,
                seminorm: sem,
            };
            let row = vec![lp, mm, sem.value, lp / mm, mm / sem.value, lp / sem.value];
            Ok((id, row, rec, prof))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = StudyTable::new(&[
        "function",
        "lp",
        "maximal_lp",
        "seminorm",
        "lp_over_maximal",
        "maximal_over_seminorm",
        "lp_over_seminorm",
    ]);
    let mut records = Vec::new();
    let mut profiles = Vec::new();
    let mut family = Vec::new();
    for (id, row, rec, prof) in rows {
        if id.starts_with("f_N") {
            family.push(row[5]);
        }
        table.push(id.clone(), row);
        profiles.push((id, prof));
        records.push(rec);
    }
    let link1 = spread(&table.column("lp_over_maximal").expect("column"));
    let link2 = spread(&table.column("maximal_over_seminorm").expect("column"));
    let mut verdicts = vec![
        Verdict::new(
            "lp_over_maximal_bounded",
            link1 <= LINK_SPREAD_LIMIT,
            link1,
            format!("max/min over suite <= {LINK_SPREAD_LIMIT}"),
        ),
        Verdict::new(
            "maximal_over_seminorm_bounded",
            link2 <= LINK_SPREAD_LIMIT,
            link2,
            format!("max/min over suite <= {LINK_SPREAD_LIMIT}"),
        ),
    ];
    if !family.is_empty() {
        let s = spread(&family);
        verdicts.push(Verdict::new(
            "family_no_growth",
            s < FAMILY_SPREAD_LIMIT,
            s,
            format!("max/min of |f|_p / |f|_* over the family < {FAMILY_SPREAD_LIMIT}"),
        ));
    }
    Ok(StudyReport {
        study: "study-pp".into(),
        params: pr,
        inputs: serde_json::to_value(cfg)?,
        table,
        points: records,
        slopes: Vec::new(),
        concentration: Vec::new(),
        verdicts,
        profiles,
    })
}

/// Every norm of the reference bump on the unit cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpNorms {
    pub params: Params,
    pub m: i32,
    pub phi_resolution: i32,
    pub sup: f64,
    pub lp: f64,
    pub lorentz: f64,
    pub seminorm: SeminormReport,
    pub maximal_lp: f64,
    /// Continuous-scale quadrature over the same generations (`d = 1` only).
    pub quadrature: Option<f64>,
    #[serde(skip)]
    pub profile: Option<ScaleProfile>,
}

pub fn bump_norms(params: &Params, fine_depth: i32, guard: i32) -> Result<BumpNorms> {
    let d = params.d;
    let m = fine_depth + guard;
    let atom = unit_atom(d)?;
    let field = render_field(&atom, m, guard, DEFAULT_BUDGET_CELLS)?;
    let k_max = m - guard;
    let (prof, sem) = seminorm_of(&field, params, DEFAULT_K_MIN, k_max, guard)?;
    let quadrature = if d == 1 {
        let g = render(&atom, m, guard, DEFAULT_BUDGET_CELLS)?;
        Some(seminorm_quadrature(
            &g,
            params,
            8 * (k_max - DEFAULT_K_MIN) as usize + 1,
            DEFAULT_K_MIN,
            k_max,
        )?)
    } else {
        None
    };
    Ok(BumpNorms {
        params: *params,
        m,
        phi_resolution: crate::lorentz::phi_reference_resolution(d),
        sup: field.sup_norm(),
        lp: field.lp_norm(params.p)?,
        lorentz: atomic_lorentz_norm(&atom, phi_distribution(d)?, params.p, params.q)?,
        seminorm: sem,
        maximal_lp: maximal_modulus(&field, DEFAULT_K_MIN, k_max, guard)?.lp_norm(params.p)?,
        quadrature,
        profile: Some(prof),
    })
}
