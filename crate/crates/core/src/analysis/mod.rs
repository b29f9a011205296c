//! Profile combination, concentration and almost-disjointness checks, slope
//! fits, and the studies built on them.

mod report;
mod studies;
mod validation;

pub use report::{PointRecord, SlopeRecord, StudyReport, StudyTable, Verdict};
pub use studies::{
    block_profiles, bump_norms, random_smooth_function, study_pp, study_qgp, study_qlp, BumpNorms, NRule, PpConfig,
    QgpConfig, QlpConfig,
};
pub use validation::{
    lorentz_discrepancies, multiblock_discrepancy, run_validation, sandwich_violation, ValidationCheck,
    ValidationConfig, ValidationReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smoothness::ScaleProfile;

/// Layer-wise `p`-sum of profiles of blocks whose evaluation boxes never
/// meet two blocks at generations `>= certified_k_min`.
///
/// Missing layers count as zero. Tails combine by Minkowski,
/// `(sum_b tail_b^{1/q})^q`, which bounds the truncation error of the
/// combined `q`-sum.
pub fn combine_profiles(profiles: &[ScaleProfile], certified_k_min: Option<i32>) -> Result<ScaleProfile> {
    let first = profiles
        .first()
        .ok_or_else(|| Error::DegenerateInput("no profiles to combine".into()))?;
    if profiles.len() == 1 {
        return Ok(first.clone());
    }
    let cert = certified_k_min.ok_or(Error::GapCertificateMissing)?;
    let params = first.params;
    if profiles.iter().any(|pr| pr.params != params) {
        return Err(Error::InvalidParameters("profiles differ in (p, q, d)".into()));
    }
    if let Some(pr) = profiles.iter().find(|pr| pr.k_min < cert) {
        return Err(Error::InvalidParameters(format!(
            "profile starts at k = {} below the certified generation {cert}",
            pr.k_min
        )));
    }
    let k_min = profiles.iter().map(|pr| pr.k_min).min().expect("nonempty");
    let k_max = profiles.iter().map(|pr| pr.k_max).max().expect("nonempty");
    let p = params.p;
    let layers = (k_min..=k_max)
        .map(|k| profiles.iter().map(|pr| pr.layer(k).powf(p)).sum::<f64>().powf(1.0 / p))
        .collect();
    let q = params.q;
    let minkowski = |tails: &mut dyn Iterator<Item = f64>| tails.map(|t| t.powf(1.0 / q)).sum::<f64>().powf(q);
    Ok(ScaleProfile {
        params,
        k_min,
        k_max,
        layers,
        coarse_tail: minkowski(&mut profiles.iter().map(|pr| pr.coarse_tail)),
        fine_tail: minkowski(&mut profiles.iter().map(|pr| pr.fine_tail)),
    })
}

/// Largest distance `|l - M|` used by [`concentration_check`].
pub const CONCENTRATION_WINDOW: i32 = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub block_scale: i32,
    pub peak: i32,
    /// Decay of `log2 L_l^q` per generation for `l < M`.
    pub left_rate: f64,
    /// Same for `l > M`.
    pub right_rate: f64,
    /// `min(left_rate, right_rate)`.
    pub nu: f64,
    pub passed: bool,
}

/// Peak location and two-sided geometric decay rates of `L_l^q` around `M`,
/// fitted over `2 <= |l - M| <= CONCENTRATION_WINDOW`. Passes when the peak
/// is within one generation of `M` and both rates are positive.
pub fn concentration_check(profile: &ScaleProfile, block_scale: i32) -> ConcentrationReport {
    let q = profile.params.q;
    let rate = |sign: i32| -> f64 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = (2..=CONCENTRATION_WINDOW)
            .map(|dist| (dist, profile.layer(block_scale + sign * dist)))
            .filter(|&(dist, l)| {
                let k = block_scale + sign * dist;
                l > 0.0 && k >= profile.k_min && k <= profile.k_max
            })
            .map(|(dist, l)| (dist as f64, q * l.log2()))
            .unzip();
        fit_slope(&xs, &ys).map_or(f64::NAN, |fit| -fit.slope)
    };
    let peak = profile.peak();
    let (left_rate, right_rate) = (rate(-1), rate(1));
    let nu = left_rate.min(right_rate);
    ConcentrationReport {
        block_scale,
        peak,
        left_rate,
        right_rate,
        nu,
        passed: (peak - block_scale).abs() <= 1 && left_rate > 0.0 && right_rate > 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostDisjoint {
    /// Largest fraction of `|a|^q` (resp. `|b|^q`) outside `I` (resp. `J`).
    pub delta_achieved: f64,
    /// `|a+b|_q^q / (|a|_q^q + |b|_q^q) - 1`.
    pub epsilon_observed: f64,
}

/// Measures how far `a` and `b` are from having disjoint supports `I`, `J`.
pub fn almost_disjoint_check(a: &[f64], b: &[f64], q: f64, i_set: &[usize], j_set: &[usize]) -> Result<AlmostDisjoint> {
    if a.len() != b.len() {
        return Err(Error::DegenerateInput("sequences differ in length".into()));
    }
    let mut in_i = vec![false; a.len()];
    for &i in i_set {
        if i >= a.len() {
            return Err(Error::DegenerateInput(format!("index {i} out of range")));
        }
        in_i[i] = true;
    }
    let mut in_j = vec![false; a.len()];
    for &j in j_set {
        if j >= a.len() {
            return Err(Error::DegenerateInput(format!("index {j} out of range")));
        }
        if in_i[j] {
            return Err(Error::IndexSetsOverlap(j));
        }
        in_j[j] = true;
    }
    let pw = |v: f64| v.abs().powf(q);
    let na: f64 = a.iter().map(|&v| pw(v)).sum();
    let nb: f64 = b.iter().map(|&v| pw(v)).sum();
    let nab: f64 = a.iter().zip(b).map(|(&x, &y)| pw(x + y)).sum();
    let leak = |s: &[f64], mask: &[bool], total: f64| {
        if total == 0.0 {
            0.0
        } else {
            s.iter()
                .zip(mask)
                .filter(|(_, &m)| !m)
                .map(|(&v, _)| pw(v))
                .sum::<f64>()
                / total
        }
    };
    if na + nb == 0.0 {
        return Err(Error::DegenerateInput("both sequences vanish".into()));
    }
    Ok(AlmostDisjoint {
        delta_achieved: leak(a, &in_i, na).max(leak(b, &in_j, nb)),
        epsilon_observed: nab / (na + nb) - 1.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest `|y - (slope x + intercept)|`.
    pub max_residual: f64,
}

/// Ordinary least squares line through `(xs, ys)`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::DegenerateInput("need at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite coordinate".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateInput("xs are not distinct".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).abs())
        .fold(0.0, f64::max);
    Ok(SlopeFit {
        slope,
        intercept,
        max_residual,
    })
}
