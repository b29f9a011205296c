//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Tolerances and runtime limits are fixed here and are not
//! relaxed to make a criterion pass.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use besov_cli::{run, Command, RunConfig};
use besov_core::analysis::{
    almost_disjoint_check, concentration_check, lorentz_discrepancies, multiblock_discrepancy, random_smooth_function,
    sandwich_violation, study_pp, study_qgp, study_qlp, PpConfig, QgpConfig, QlpConfig,
};
use besov_core::constructions::build_block;
use besov_core::grid::{render_field, Field, GridFunction, DEFAULT_BUDGET_CELLS, DEFAULT_GUARD};
use besov_core::lorentz::{lorentz_norm, rearrangement};
use besov_core::smoothness::{discrete_seminorm, scale_profile, Params, ScaleProfile};

type Outcome = Result<(bool, String), String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    check: fn() -> Outcome,
}

fn params(p: f64, q: f64) -> Params {
    Params::new(p, q, 1).expect("valid parameters")
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn sandwich() -> Outcome {
    let worst = sandwich_violation(1, 100).map_err(e)?;
    Ok((
        worst <= 1e-9,
        format!("100 probes, worst violation {worst:.3e} (limit 1e-9 |f|_inf)"),
    ))
}

fn lorentz_exactness() -> Outcome {
    let (brute, diag) = lorentz_discrepancies(1, 50, 1_000_000).map_err(e)?;
    Ok((
        brute <= 1e-4 && diag <= 1e-10,
        format!("50 functions, closed form vs brute force {brute:.2e} (<= 1e-4), q=p vs L_p {diag:.2e} (<= 1e-10)"),
    ))
}

fn qlp_scaling() -> Outcome {
    let r = study_qlp(&QlpConfig::new(params(3.0, 1.5), vec![4, 6, 8, 10])).map_err(e)?;
    let slope = r.verdict("ratio_slope").ok_or("missing ratio_slope")?;
    let inc = r.verdict("ratio_increasing").ok_or("missing ratio_increasing")?;
    Ok((
        slope.passed && inc.passed,
        format!(
            "slope of log R vs log N = {:.4} (want 1/3 +- 0.10), R strictly increasing: {}",
            slope.observed, inc.passed
        ),
    ))
}

fn qgp_scaling() -> Outcome {
    let r = study_qgp(&QgpConfig::new(params(1.5, 3.0), vec![1, 2, 3, 4], 3)).map_err(e)?;
    let lor = r.verdict("lorentz_slope").ok_or("missing lorentz_slope")?;
    let sem = r.verdict("seminorm_slope").ok_or("missing seminorm_slope")?;
    Ok((
        lor.passed && sem.passed,
        format!(
            "Lorentz slope {:.4} (want 2/3 +- 0.10), seminorm slope {:.4} (want <= 1/3 + 0.15)",
            lor.observed, sem.observed
        ),
    ))
}

fn single_block_profile(m_block: u32, pr: &Params) -> Result<ScaleProfile, String> {
    let fine_depth = 6;
    let block = build_block(m_block, pr).map_err(e)?;
    let scale = m_block as i32;
    let m = scale + fine_depth + DEFAULT_GUARD;
    let field = render_field(&block, m, DEFAULT_GUARD, DEFAULT_BUDGET_CELLS).map_err(e)?;
    scale_profile(&field, -2 * scale - 8, scale + fine_depth, pr, DEFAULT_GUARD).map_err(e)
}

fn concentration() -> Outcome {
    let pr = params(1.5, 3.0);
    let mut reports = Vec::new();
    for m_block in [4, 7] {
        reports.push(concentration_check(
            &single_block_profile(m_block, &pr)?,
            m_block as i32,
        ));
    }
    let (a, b) = (&reports[0], &reports[1]);
    let spread = (a.nu - b.nu).abs() / a.nu.max(b.nu);
    let ok = a.passed && b.passed && spread <= 0.3;
    Ok((
        ok,
        format!(
            "M=4: peak {} nu {:.3}; M=7: peak {} nu {:.3}; nu spread {:.1}% (<= 30%)",
            a.peak,
            a.nu,
            b.peak,
            b.nu,
            100.0 * spread
        ),
    ))
}

fn combination() -> Outcome {
    let gap = multiblock_discrepancy(&params(1.5, 3.0), 3).map_err(e)?;
    Ok((
        gap <= 0.05,
        format!("T=2 dense vs combined relative gap {gap:.2e} (<= 0.05)"),
    ))
}

fn embedding() -> Outcome {
    let r = study_pp(&PpConfig::new(params(2.0, 2.0), 1)).map_err(e)?;
    let parts: Vec<String> = r
        .verdicts
        .iter()
        .map(|v| format!("{} {:.3} {}", v.name, v.observed, if v.passed { "ok" } else { "bad" }))
        .collect();
    Ok((r.passed(), parts.join("; ")))
}

fn report_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .map_err(e)?
        .map(|ent| {
            let ent = ent.map_err(e)?;
            Ok((
                ent.file_name().to_string_lossy().into_owned(),
                fs::read(ent.path()).map_err(e)?,
            ))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for command in [Command::Validate, Command::StudyQlp] {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().map_err(e)?;
            let mut cfg = RunConfig::defaults(command);
            cfg.seed = Some(1);
            cfg.out = dir.path().to_path_buf();
            run(&cfg).map_err(e)?;
            outputs.push(report_files(dir.path())?);
        }
        let same = outputs[0] == outputs[1] && !outputs[0].is_empty();
        ok &= same;
        notes.push(format!(
            "{}: {} files {}",
            command.name(),
            outputs[0].len(),
            if same { "identical" } else { "differ" }
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn invariants() -> Outcome {
    let m = 12;
    let (k_min, k_max) = (-30, m - DEFAULT_GUARD);
    let prof = |g: &GridFunction, pr: &Params, lo: i32, hi: i32| {
        scale_profile(&Field::from(g.clone()), lo, hi, pr, DEFAULT_GUARD).map_err(e)
    };
    let mut homog: f64 = 0.0;
    let mut constant: f64 = 0.0;
    let mut rearr = true;
    let mut dilation: f64 = 0.0;
    let mut eps: f64 = 0.0;
    for seed in 0..8u64 {
        let (p, q) = (1.5 + 0.25 * seed as f64, 1.0 + 0.5 * seed as f64);
        let pr = params(p, q);
        let g = random_smooth_function(1, m, 1, seed).map_err(e)?;

        let c = -3.5 + seed as f64;
        let c = if c == 0.0 { 0.5 } else { c };
        let base = prof(&g, &pr, k_min, k_max)?;
        let scaled = prof(&g.scaled(c), &pr, k_min, k_max)?;
        let (sa, sb) = (
            discrete_seminorm(&base).map_err(e)?.value,
            discrete_seminorm(&scaled).map_err(e)?.value,
        );
        homog = homog.max(rel(sb, c.abs() * sa));
        let (la, lb) = (
            lorentz_norm(&rearrangement(&g).map_err(e)?, p, q),
            lorentz_norm(&rearrangement(&g.scaled(c)).map_err(e)?, p, q),
        );
        homog = homog.max(rel(lb, c.abs() * la));

        let k = GridFunction::constant(1, m, &[0], &[1 << m], c)
            .map_err(e)?
            .with_background(c);
        constant = constant.max(discrete_seminorm(&prof(&k, &pr, k_min, k_max)?).map_err(e)?.value.abs());

        let mut rev = g.samples().to_vec();
        rev.reverse();
        let flipped = GridFunction::new(1, m, &[17], &[rev.len()], rev).map_err(e)?;
        rearr &= lorentz_norm(&rearrangement(&flipped).map_err(e)?, p, q).to_bits() == la.to_bits();

        let s = 1 + (seed % 3) as i32;
        let dil = prof(&g.dilated(s, p), &pr, k_min - s, k_max - s)?;
        let expect = base.shifted(s);
        let peak = base.layers.iter().cloned().fold(0.0, f64::max);
        for k in dil.k_min..=dil.k_max {
            if expect.layer(k) > 1e-8 * peak {
                dilation = dilation.max(rel(dil.layer(k), expect.layer(k)));
            }
        }

        let n = 8 + seed as usize;
        let a: Vec<f64> = (0..2 * n)
            .map(|i| if i < n { 1.0 / (1 + i) as f64 } else { 0.0 })
            .collect();
        let b: Vec<f64> = (0..2 * n)
            .map(|i| if i >= n { -(i as f64).sqrt() } else { 0.0 })
            .collect();
        let (ii, jj): (Vec<usize>, Vec<usize>) = ((0..n).collect(), (n..2 * n).collect());
        eps = eps.max(
            almost_disjoint_check(&a, &b, q, &ii, &jj)
                .map_err(e)?
                .epsilon_observed
                .abs(),
        );
    }
    let ok = homog <= 1e-10 && constant == 0.0 && rearr && dilation <= 1e-6 && eps <= 1e-12;
    Ok((
        ok,
        format!(
            "homogeneity {homog:.1e}, constants {constant:e}, rearrangement exact {rearr}, dilation {dilation:.1e}, disjoint epsilon {eps:.1e}"
        ),
    ))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "modulus sandwich",
            limit: Some(Duration::from_secs(30)),
            check: sandwich,
        },
        Criterion {
            id: 2,
            name: "Lorentz exactness",
            limit: Some(Duration::from_secs(60)),
            check: lorentz_exactness,
        },
        Criterion {
            id: 3,
            name: "q<p ratio growth",
            limit: Some(Duration::from_secs(600)),
            check: qlp_scaling,
        },
        Criterion {
            id: 4,
            name: "p<q multi-block scaling",
            limit: Some(Duration::from_secs(1200)),
            check: qgp_scaling,
        },
        Criterion {
            id: 5,
            name: "scale concentration",
            limit: Some(Duration::from_secs(600)),
            check: concentration,
        },
        Criterion {
            id: 6,
            name: "block combination",
            limit: Some(Duration::from_secs(300)),
            check: combination,
        },
        Criterion {
            id: 7,
            name: "p=q embedding chain",
            limit: Some(Duration::from_secs(600)),
            check: embedding,
        },
        Criterion {
            id: 8,
            name: "determinism",
            limit: None,
            check: determinism,
        },
        Criterion {
            id: 9,
            name: "invariant suite",
            limit: Some(Duration::from_secs(120)),
            check: invariants,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.check)();
        let elapsed = start.elapsed();
        let in_time = c.limit.is_none_or(|l| elapsed <= l);
        let (passed, detail) = match outcome {
            Ok((ok, d)) => (ok && in_time, d),
            Err(err) => (false, format!("error: {err}")),
        };
        if !passed {
            failed += 1;
        }
        let limit = c.limit.map_or(String::new(), |l| format!(" / {} s", l.as_secs()));
        println!(
            "criterion {} [{}] {}: {} ({:.1} s{limit})",
            c.id,
            if passed { "PASS" } else { "FAIL" },
            c.name,
            detail,
            elapsed.as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
