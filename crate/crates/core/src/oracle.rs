//! Slow reference computations used to validate the fast paths. Box
//! statistics here are direct sums; no prefix tables or patch caches.

use crate::constructions::Multiblock;
use crate::error::{Error, Result};
use crate::grid::{pow2, render_field, CellBox, GridFunction};
use crate::smoothness::{discrete_seminorm, scale_profile, Params, SeminormReport};

/// Box cells of `b` as values (outside cells hold the background).
fn box_values(f: &GridFunction, b: &CellBox) -> Vec<f64> {
    b.cells().map(|idx| f.value_at(idx)).collect()
}

/// Double average `mean_{y,z in B} |f(y) - f(z)|` over all ordered pairs of
/// cells in the box of half-width `h` around `x`.
pub fn delta_double(f: &GridFunction, x: &[f64], h: f64) -> Result<f64> {
    let b = CellBox::around(f.dim(), f.resolution(), x, h);
    if b.min_len() < 2 {
        return Err(Error::DegenerateBox {
            cells_per_axis: b.min_len(),
        });
    }
    let v = box_values(f, &b);
    let mut acc = 0.0;
    for &a in &v {
        for &c in &v {
            acc += (a - c).abs();
        }
    }
    let n = v.len() as f64;
    Ok(acc / (n * n))
}

/// Mean deviation over a box by two direct passes. Only the stored cells are
/// visited; the rest contribute `background` with known multiplicity.
fn direct_mad(f: &GridFunction, b: &CellBox) -> f64 {
    let clip = b.intersect(&f.bounds());
    let count = b.count();
    let explicit = if clip.is_empty() { 0.0 } else { clip.count() };
    let bg = f.background();
    let mut sum = 0.0;
    if !clip.is_empty() {
        for idx in clip.cells() {
            sum += f.value_at(idx);
        }
    }
    let mean = (sum + (count - explicit) * bg) / count;
    let mut dev = (count - explicit) * (bg - mean).abs();
    if !clip.is_empty() {
        for idx in clip.cells() {
            dev += (f.value_at(idx) - mean).abs();
        }
    }
    dev / count
}

/// `int (delta[f; h](x))^p dx` over all `x` whose box meets the stored grid,
/// as a lattice sum with stride `max(1, floor(h / 16))` cells.
fn x_integral(f: &GridFunction, h: f64, p: f64) -> f64 {
    let d = f.dim();
    let m = f.resolution();
    let hw = h * pow2(m);
    let stride = ((hw / 16.0).floor() as i64).max(1);
    let reach = hw.ceil() as i64 + 1;
    let bounds = f.bounds();
    let axis = |a: usize| -> Vec<i64> {
        let mut v = Vec::new();
        let mut i = bounds.lo[a] - reach;
        while i <= bounds.hi[a] + reach {
            v.push(i);
            i += stride;
        }
        v
    };
    let xs = axis(0);
    let ys = if d > 1 { axis(1) } else { vec![0] };
    let lo_off = (-hw).floor() as i64 + 1;
    let hi_off = hw.ceil() as i64 - 1;
    let mut acc = 0.0;
    for &i in &xs {
        for &j in &ys {
            let mut b = CellBox {
                d,
                lo: [i + lo_off, j + lo_off],
                hi: [i + hi_off, j + hi_off],
            };
            if d == 1 {
                b.lo[1] = 0;
                b.hi[1] = 0;
            }
            let v = direct_mad(f, &b);
            if v > 0.0 {
                acc += v.powf(p);
            }
        }
    }
    acc * (stride as f64 * pow2(-m)).powi(d as i32)
}

/// Trapezoid quadrature in `ln h` of
/// `int (int delta[f; h](x)^p dx)^{q/p} dh / h` over
/// `h in [0.6 2^{-k_max}, 0.6 2^{-k_min}]` with `h_points` log-uniform nodes.
pub fn seminorm_quadrature(f: &GridFunction, params: &Params, h_points: usize, k_min: i32, k_max: i32) -> Result<f64> {
    if h_points < 2 || k_min >= k_max {
        return Err(Error::InvalidParameters(format!(
            "need h_points >= 2 and k_min < k_max, got {h_points}, [{k_min}, {k_max}]"
        )));
    }
    let constant = f.samples().iter().all(|&v| v == f.background());
    if constant {
        return Ok(0.0);
    }
    if f.background() != 0.0 {
        return Err(Error::NotCompactlySupported(f.background()));
    }
    let h_min = 0.6 * pow2(-k_max);
    if h_min < pow2(2 - f.resolution()) {
        return Err(Error::DegenerateBox {
            cells_per_axis: (2.0 * h_min * pow2(f.resolution())) as i64,
        });
    }
    let (a, b) = (h_min.ln(), (0.6 * pow2(-k_min)).ln());
    let step = (b - a) / (h_points - 1) as f64;
    let r = params.q / params.p;
    let mut acc = 0.0;
    for i in 0..h_points {
        let h = (a + step * i as f64).exp();
        let w = if i == 0 || i + 1 == h_points { 0.5 } else { 1.0 };
        acc += w * x_integral(f, h, params.p).powf(r);
    }
    Ok((acc * step).powf(1.0 / params.q))
}

/// `p^{1/q} (int_0^inf (t |{|f| >= t}|^{1/p})^q dt/t)^{1/q}` by direct
/// integration. The distribution function is counted over the samples at
/// the geometric midpoint of each of `t_points - 1` log-uniform intervals
/// between the smallest and largest nonzero `|sample|`; below the smallest
/// it is constant and integrated exactly.
pub fn lorentz_bruteforce(f: &GridFunction, p: f64, q: f64, t_points: usize) -> Result<f64> {
    if f.background() != 0.0 {
        return Err(Error::NotCompactlySupported(f.background()));
    }
    let mut abs: Vec<f64> = f.samples().iter().map(|v| v.abs()).filter(|v| *v > 0.0).collect();
    if abs.is_empty() {
        return Ok(0.0);
    }
    abs.sort_by(f64::total_cmp);
    let cell = f.cell_volume();
    let lambda = |t: f64| (abs.len() - abs.partition_point(|&v| v < t)) as f64 * cell;
    let t_min = abs[0];
    let t_max = abs[abs.len() - 1];
    let r = q / p;
    let mut acc = t_min.powf(q) / q * lambda(t_min).powf(r);
    if t_max > t_min {
        let n = t_points.max(2) - 1;
        let (a, b) = (t_min.ln(), t_max.ln());
        let step = (b - a) / n as f64;
        for i in 0..n {
            let t0 = (a + step * i as f64).exp();
            let t1 = if i + 1 == n {
                t_max
            } else {
                (a + step * (i + 1) as f64).exp()
            };
            let mid = (t0 * t1).sqrt();
            acc += (t1.powf(q) - t0.powf(q)) / q * lambda(mid).powf(r);
        }
    }
    Ok((p * acc).powf(1.0 / q))
}

/// Renders every block of `mb` into one field at resolution `m` and computes
/// the discrete seminorm over `[k_min, k_max]` directly.
pub fn dense_multiblock_seminorm(
    mb: &Multiblock,
    params: &Params,
    m: i32,
    k_min: i32,
    k_max: i32,
    guard: i32,
    budget: u64,
) -> Result<SeminormReport> {
    let f = render_field(&mb.assembled()?, m, guard, budget)?;
    discrete_seminorm(&scale_profile(&f, k_min, k_max, params, guard)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::{lorentz_norm, rearrangement};

    #[test]
    fn double_average_examples() {
        let c = GridFunction::constant(1, 8, &[0], &[256], 2.0).unwrap();
        assert_eq!(delta_double(&c, &[0.5], 0.1).unwrap(), 0.0);
        let lin = GridFunction::from_fn(1, 10, &[0], &[1024], |x| x[0]).unwrap();
        for h in [0.05, 0.2] {
            let v = delta_double(&lin, &[0.5], h).unwrap();
            assert!((v - 2.0 * h / 3.0).abs() < 2.0 * pow2(-10), "{v}");
        }
        assert!(delta_double(&lin, &[0.5], pow2(-12)).is_err());
    }

    #[test]
    fn bruteforce_indicator() {
        let g = GridFunction::from_fn(1, 6, &[0], &[64], |x| if x[0] < 0.375 { 1.0 } else { 0.0 }).unwrap();
        let (p, q): (f64, f64) = (2.0, 3.0);
        let want = (p / q).powf(1.0 / q) * 0.375f64.powf(1.0 / p);
        assert!((lorentz_bruteforce(&g, p, q, 10_000).unwrap() - want).abs() < 1e-3 * want);
        let z = GridFunction::zeros(1, 3, &[0], &[8]).unwrap();
        assert_eq!(lorentz_bruteforce(&z, p, q, 10).unwrap(), 0.0);
    }

    #[test]
    fn bruteforce_converges_to_closed_form() {
        let g = GridFunction::from_fn(1, 5, &[0], &[32], |x| (9.0 * x[0]).sin() + 0.3).unwrap();
        let exact = lorentz_norm(&rearrangement(&g).unwrap(), 1.5, 4.0);
        let e1 = (lorentz_bruteforce(&g, 1.5, 4.0, 4_000).unwrap() - exact).abs();
        let e2 = (lorentz_bruteforce(&g, 1.5, 4.0, 8_000).unwrap() - exact).abs();
        assert!(e1 / exact < 1e-3, "{e1}");
        assert!(e2 < 0.75 * e1, "{e1} -> {e2}");
    }

    #[test]
    fn quadrature_vanishes_on_constants() {
        let c = GridFunction::constant(1, 8, &[0], &[256], 2.0).unwrap();
        let pr = Params::new(2.0, 2.0, 1).unwrap();
        assert_eq!(seminorm_quadrature(&c, &pr, 8, -2, 4).unwrap(), 0.0);
    }

    #[test]
    fn direct_mad_counts_background() {
        let g = GridFunction::constant(1, 4, &[0], &[16], 1.0)
            .unwrap()
            .with_background(0.0);
        let b = CellBox::around(1, 4, &[1.0], 0.25);
        assert_eq!(direct_mad(&g, &b), 0.5);
    }
}
