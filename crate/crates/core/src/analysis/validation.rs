use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::combine_profiles;
use super::studies::block_profiles;
use crate::constructions::build_multiblock;
use crate::error::Result;
use crate::grid::{pow2, Field, GridFunction, DEFAULT_BUDGET_CELLS, DEFAULT_GUARD};
use crate::lorentz::{lorentz_norm, rearrangement};
use crate::oracle::{delta_double, dense_multiblock_seminorm, lorentz_bruteforce};
use crate::smoothness::{delta, discrete_seminorm, Params};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub seed: u64,
    pub sandwich_probes: usize,
    pub lorentz_functions: usize,
    pub lorentz_t_points: usize,
    /// Multi-block cross-check: `(p, q)`, block spacing `delta_scale`.
    pub dense_p: f64,
    pub dense_q: f64,
    pub delta_scale: u32,
}

impl ValidationConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            sandwich_probes: 100,
            lorentz_functions: 50,
            lorentz_t_points: 1_000_000,
            dense_p: 1.5,
            dense_q: 3.0,
            delta_scale: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub name: String,
    pub cases: usize,
    /// Worst observed discrepancy, in the units of `tolerance`.
    pub max_observed: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl ValidationCheck {
    fn new(name: &str, cases: usize, max_observed: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            cases,
            max_observed,
            tolerance,
            passed: max_observed <= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config: ValidationConfig,
    pub checks: Vec<ValidationCheck>,
    pub passed: bool,
}

fn random_grid(rng: &mut ChaCha8Rng, d: usize, m: i32) -> Result<GridFunction> {
    let n = 1usize << m;
    let samples = (0..n.pow(d as u32)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    GridFunction::new(d, m, &vec![0; d], &vec![n; d], samples)
}

/// Random step values with repeated levels, zeros and both signs.
fn random_step_grid(rng: &mut ChaCha8Rng, m: i32) -> Result<GridFunction> {
    let n = 1usize << m;
    let samples = (0..n)
        .map(|_| {
            let mag = match rng.gen_range(0..10) {
                0 => 0.0,
                1..=3 => [0.25, 0.5, 1.0][rng.gen_range(0..3)],
                _ => rng.gen_range(0.05..1.0),
            };
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    GridFunction::new(1, m, &[0], &[n], samples)
}

/// `max(delta - delta_double, delta_double - 2 delta) / |f|_inf` over random
/// probes; nonpositive when the two moduli are correctly ordered.
pub fn sandwich_violation(seed: u64, probes: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..probes {
        let (d, m) = if i % 2 == 0 { (1, 7) } else { (2, 4) };
        let g = random_grid(&mut rng, d, m)?;
        let field = Field::from(g.clone());
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.1..1.1)).collect();
        let h = rng.gen_range(4.0 * pow2(-m)..0.35);
        let fast = delta(&field, &x, h)?;
        let slow = delta_double(&g, &x, h)?;
        let sup = g.sup_norm().max(f64::MIN_POSITIVE);
        worst = worst.max((fast - slow) / sup).max((slow - 2.0 * fast) / sup);
    }
    Ok(worst)
}

/// Largest relative gaps (closed form vs brute force, closed form at `q = p`
/// vs direct `L_p`) over random step functions.
pub fn lorentz_discrepancies(seed: u64, functions: usize, t_points: usize) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4c6f_7265_6e74_7a00);
    let mut brute: f64 = 0.0;
    let mut diag: f64 = 0.0;
    for _ in 0..functions {
        let g = random_step_grid(&mut rng, 5)?;
        let (p, q) = (rng.gen_range(1.0..5.0), rng.gen_range(1.0..5.0));
        let sd = rearrangement(&g)?;
        let closed = lorentz_norm(&sd, p, q);
        let slow = lorentz_bruteforce(&g, p, q, t_points)?;
        brute = brute.max((closed - slow).abs() / closed);
        let lp = g.lp_norm(p)?;
        diag = diag.max((lorentz_norm(&sd, p, p) - lp).abs() / lp);
    }
    Ok((brute, diag))
}

/// Relative gap between the block-wise combined seminorm of `Phi_2` and
/// the seminorm of both blocks rendered together.
pub fn multiblock_discrepancy(params: &Params, delta_scale: u32) -> Result<f64> {
    let fine_depth = 6;
    let guard = DEFAULT_GUARD;
    let m_max = 2 * delta_scale as i32;
    let k_min = -2 * m_max - 8;
    let mb = build_multiblock(2, delta_scale, params, k_min)?;
    let blocks = block_profiles(&mb, params, fine_depth, guard, DEFAULT_BUDGET_CELLS)?;
    let own: Vec<_> = blocks.into_iter().map(|b| b.1).collect();
    let combined = discrete_seminorm(&combine_profiles(&own, Some(k_min))?)?.value;
    let dense = dense_multiblock_seminorm(
        &mb,
        params,
        m_max + fine_depth + guard,
        k_min,
        m_max + fine_depth,
        guard,
        DEFAULT_BUDGET_CELLS,
    )?
    .value;
    Ok((combined - dense).abs() / dense)
}

/// Oracle sweep: modulus sandwich, Lorentz closed form against direct
/// integration, and the two-block combination against a shared grid.
pub fn run_validation(cfg: &ValidationConfig) -> Result<ValidationReport> {
    let sandwich = sandwich_violation(cfg.seed, cfg.sandwich_probes)?;
    let (brute, diag) = lorentz_discrepancies(cfg.seed, cfg.lorentz_functions, cfg.lorentz_t_points)?;
    let params = Params::new(cfg.dense_p, cfg.dense_q, 1)?;
    let dense = multiblock_discrepancy(&params, cfg.delta_scale)?;
    let checks = vec![
        ValidationCheck::new("modulus_sandwich", cfg.sandwich_probes, sandwich, 1e-9),
        ValidationCheck::new("lorentz_closed_form_vs_bruteforce", cfg.lorentz_functions, brute, 1e-4),
        ValidationCheck::new("lorentz_q_equals_p_vs_lp", cfg.lorentz_functions, diag, 1e-10),
        ValidationCheck::new("multiblock_combined_vs_dense", 1, dense, 0.05),
    ];
    Ok(ValidationReport {
        config: cfg.clone(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}
