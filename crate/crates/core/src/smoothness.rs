//! Averaged modulus of smoothness (`r = 1`, mean-deviation form), its
//! per-generation layers `L_k`, the discrete zero-smoothness Besov seminorm
//! and analytic bounds on the generations left out of a computed range.
//!
//! For a generation `k` the layer is
//! `L_k = (sum_{Q in D_k} |Q| delta[f; 0.6 l(Q)](c_Q)^p)^{1/p}` and the
//! seminorm is `(sum_k L_k^q)^{1/q}`.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{pow2, CellBox, Field, GridFunction, OVERLAP};

/// Exponents `(p, q)` and dimension `d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub p: f64,
    pub q: f64,
    pub d: usize,
}

impl Params {
    pub fn new(p: f64, q: f64, d: usize) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite() && q >= 1.0 && q.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "need 1 <= p, q < infinity, got p={p} q={q}"
            )));
        }
        if d != 1 && d != 2 {
            return Err(Error::InvalidParameters(format!("dimension {d} not supported")));
        }
        Ok(Self { p, q, d })
    }
}

/// Default coarsest generation of a profile.
pub const DEFAULT_K_MIN: i32 = -8;

/// Largest fraction of the computed `sum L_k^q` the truncated tails may carry.
pub const TAIL_FRACTION_LIMIT: f64 = 0.05;

/// `delta[f; h](x)`: mean absolute deviation of `f` from its mean over the
/// open box of half-width `h` around `x`.
pub fn delta(f: &Field, x: &[f64], h: f64) -> Result<f64> {
    let b = CellBox::around(f.dim(), f.resolution(), x, h);
    if h < pow2(2 - f.resolution()) {
        return Err(Error::DegenerateBox {
            cells_per_axis: b.min_len(),
        });
    }
    Ok(f.stats_over(&b)?.mad)
}

fn check_scale(f: &Field, k: i32, guard: i32) -> Result<()> {
    let limit = f.resolution() - guard;
    if k > limit {
        Err(Error::DegenerateScale { k, limit })
    } else {
        Ok(())
    }
}

/// `L_k^p`, summed over the cubes whose boxes meet the stored patches in
/// lexicographic cube order.
fn layer_p_sum(f: &Field, k: i32, p: f64) -> Result<f64> {
    let d = f.dim();
    let m = f.resolution();
    let vol = pow2(-k * d as i32);
    let mut acc = 0.0;
    for q in f.cubes_touching(k, OVERLAP)? {
        let b = CellBox::for_cube(&q, d, m, OVERLAP);
        let mad = f.stats_over(&b)?.mad;
        if mad > 0.0 {
            acc += vol * mad.powf(p);
        }
    }
    Ok(acc)
}

/// The layer `L_k` of the discrete seminorm.
pub fn scale_layer(f: &Field, k: i32, params: &Params, guard: i32) -> Result<f64> {
    check_scale(f, k, guard)?;
    Ok(layer_p_sum(f, k, params.p)?.powf(1.0 / params.p))
}

/// Map `k -> L_k` over `[k_min, k_max]` together with bounds on the
/// contributions `sum L_k^q` of the generations outside that range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleProfile {
    pub params: Params,
    pub k_min: i32,
    pub k_max: i32,
    pub layers: Vec<f64>,
    /// Upper bound for `sum_{k < k_min} L_k^q`.
    pub coarse_tail: f64,
    /// Upper bound for `sum_{k > k_max} L_k^q`.
    pub fine_tail: f64,
}

impl ScaleProfile {
    /// A profile from given layers, with zero tails.
    pub fn from_layers(params: Params, k_min: i32, layers: Vec<f64>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::DegenerateInput("profile needs at least one layer".into()));
        }
        if layers.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::DegenerateInput("layers must be finite and >= 0".into()));
        }
        Ok(Self {
            params,
            k_min,
            k_max: k_min + layers.len() as i32 - 1,
            layers,
            coarse_tail: 0.0,
            fine_tail: 0.0,
        })
    }

    pub fn layer(&self, k: i32) -> f64 {
        if k < self.k_min || k > self.k_max {
            0.0
        } else {
            self.layers[(k - self.k_min) as usize]
        }
    }

    pub fn generations(&self) -> impl Iterator<Item = i32> {
        self.k_min..=self.k_max
    }

    /// `sum_k L_k^q` over the stored range.
    pub fn q_sum(&self) -> f64 {
        self.layers.iter().map(|l| l.powf(self.params.q)).sum()
    }

    /// Generation of the largest layer (the coarsest one on ties).
    pub fn peak(&self) -> i32 {
        let mut best = 0;
        for (i, &l) in self.layers.iter().enumerate() {
            if l > self.layers[best] {
                best = i;
            }
        }
        self.k_min + best as i32
    }

    /// The profile of the `2^s`-dilate: `L_k(dilate_s f) = L_{k+s}(f)`.
    pub fn shifted(&self, s: i32) -> ScaleProfile {
        let mut out = self.clone();
        out.k_min -= s;
        out.k_max -= s;
        out
    }

    /// CSV with columns `k, L_k, L_k^q, tail_flag`. Computed layers have
    /// `tail_flag = false`; two trailing rows at `k_min - 1` and `k_max + 1`
    /// carry the tail bounds (as `L_k^q`) with `tail_flag = true`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["k", "L_k", "L_k^q", "tail_flag"])?;
        let q = self.params.q;
        for (k, l) in self.generations().zip(&self.layers) {
            wr.write_record([
                k.to_string(),
                format!("{l:e}"),
                format!("{:e}", l.powf(q)),
                "false".into(),
            ])?;
        }
        for (k, t) in [(self.k_min - 1, self.coarse_tail), (self.k_max + 1, self.fine_tail)] {
            wr.write_record([
                k.to_string(),
                format!("{:e}", t.powf(1.0 / q)),
                format!("{t:e}"),
                "true".into(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, params: Params) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut rows: Vec<(i32, f64)> = Vec::new();
        let mut tails: Vec<(i32, f64)> = Vec::new();
        let bad = |e: &dyn std::fmt::Display| Error::DegenerateInput(format!("bad profile row: {e}"));
        for rec in rd.records() {
            let rec = rec?;
            let k: i32 = rec[0].parse().map_err(|e| bad(&e))?;
            if &rec[3] == "true" {
                tails.push((k, rec[2].parse().map_err(|e| bad(&e))?));
            } else {
                rows.push((k, rec[1].parse().map_err(|e| bad(&e))?));
            }
        }
        let k_min = rows.first().map(|r| r.0).ok_or_else(|| bad(&"no layers"))?;
        let mut prof = ScaleProfile::from_layers(params, k_min, rows.iter().map(|r| r.1).collect())?;
        for (k, t) in tails {
            if k < k_min {
                prof.coarse_tail = t;
            } else {
                prof.fine_tail = t;
            }
        }
        Ok(prof)
    }
}

/// Layers for `k_min..=k_max`, each evaluated independently, plus tail bounds.
pub fn scale_profile(f: &Field, k_min: i32, k_max: i32, params: &Params, guard: i32) -> Result<ScaleProfile> {
    if k_min > k_max {
        return Err(Error::InvalidParameters(format!("k_min {k_min} > k_max {k_max}")));
    }
    check_scale(f, k_max, guard)?;
    let stats = FieldStats::measure(f, params)?;
    let layers = (k_min..=k_max)
        .into_par_iter()
        .map(|k| Ok(layer_p_sum(f, k, params.p)?.powf(1.0 / params.p)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ScaleProfile {
        params: *params,
        k_min,
        k_max,
        layers,
        coarse_tail: tail_sum(&stats, params, TailSide::Coarse, k_min),
        fine_tail: tail_sum(&stats, params, TailSide::Fine, k_max),
    })
}

/// The discrete seminorm with its truncation attestation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormReport {
    pub value: f64,
    pub q_sum: f64,
    pub coarse_tail: f64,
    pub fine_tail: f64,
    /// `(coarse_tail + fine_tail) / q_sum`.
    pub tail_fraction: f64,
}

/// `(sum_k L_k^q)^{1/q}` over the stored range. Fails when the bounded tails
/// exceed 5% of the computed `sum L_k^q`.
pub fn discrete_seminorm(profile: &ScaleProfile) -> Result<SeminormReport> {
    let s = profile.q_sum();
    let tail = profile.coarse_tail + profile.fine_tail;
    let tail_fraction = if tail == 0.0 { 0.0 } else { tail / s };
    if tail_fraction > TAIL_FRACTION_LIMIT {
        return Err(Error::TailTooLarge { tail, value: s });
    }
    Ok(SeminormReport {
        value: s.powf(1.0 / profile.params.q),
        q_sum: s,
        coarse_tail: profile.coarse_tail,
        fine_tail: profile.fine_tail,
        tail_fraction,
    })
}

/// Summary statistics feeding the tail bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub d: usize,
    pub l1: f64,
    pub lp: f64,
    /// Largest finite-difference slope, including jumps to the background.
    pub grad_sup: f64,
    /// Largest extent of the stored cells along any axis.
    pub diameter: f64,
    /// Per patch: side lengths and finite-difference slope.
    pub patches: Vec<([f64; 2], f64)>,
}

impl FieldStats {
    pub fn measure(f: &Field, params: &Params) -> Result<Self> {
        let d = f.dim();
        if f.is_globally_constant() {
            return Ok(Self {
                d,
                l1: 0.0,
                lp: 0.0,
                grad_sup: 0.0,
                diameter: 0.0,
                patches: Vec::new(),
            });
        }
        if !f.is_compactly_supported() {
            return Err(Error::NotCompactlySupported(f.background()));
        }
        let h = pow2(-f.resolution());
        let mut lo = [i64::MAX; 2];
        let mut hi = [i64::MIN; 2];
        let mut patches = Vec::with_capacity(f.patches().len());
        for p in f.patches() {
            let b = p.bounds();
            let mut sides = [0.0; 2];
            for a in 0..d {
                lo[a] = lo[a].min(b.lo[a]);
                hi[a] = hi[a].max(b.hi[a]);
                sides[a] = b.len(a) as f64 * h;
            }
            patches.push((sides, max_slope(p.grid()) / h));
        }
        let diameter = (0..d).map(|a| (hi[a] - lo[a] + 1) as f64 * h).fold(0.0, f64::max);
        Ok(Self {
            d,
            l1: f.lp_norm(1.0)?,
            lp: f.lp_norm(params.p)?,
            grad_sup: patches.iter().map(|p| p.1).fold(0.0, f64::max),
            diameter,
            patches,
        })
    }
}

/// Largest absolute difference between neighbouring cells of a patch,
/// counting the zero just outside it.
fn max_slope(g: &GridFunction) -> f64 {
    let e = g.extent();
    let e0 = e[0];
    let e1 = if g.dim() > 1 { e[1] } else { 1 };
    let s = g.samples();
    let at = |i: usize, j: usize| s[i * e1 + j];
    let mut best = 0.0f64;
    for i in 0..e0 {
        for j in 0..e1 {
            let v = at(i, j);
            let left = if i == 0 { 0.0 } else { at(i - 1, j) };
            best = best.max((v - left).abs());
            if i + 1 == e0 {
                best = best.max(v.abs());
            }
            if g.dim() > 1 {
                let down = if j == 0 { 0.0 } else { at(i, j - 1) };
                best = best.max((v - down).abs());
                if j + 1 == e1 {
                    best = best.max(v.abs());
                }
            }
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailSide {
    Coarse,
    Fine,
}

/// Upper bound for `L_k^q` at a generation outside the computed range.
///
/// Coarse side: the box mean deviation is at most `2 |f|_1 / |B|` and at most
/// `(D 2^k + 3)^d` boxes meet the support, so
/// `L_k^p <= (D 2^k + 3)^d 2^{-dk} (2 |f|_1 2^{dk} / 1.2^d)^p`, which decays
/// like `2^{d(p-1)k}` as `k -> -infinity`.
///
/// Fine side: on each patch the deviation is at most `d G 0.6 2^{-k}` for a
/// slope bound `G`, so `L_k^p <= sum_patches |patch + box| (0.6 d G 2^{-k})^p`,
/// which decays like `2^{-pk}`.
pub fn tail_estimate(stats: &FieldStats, k: i32, params: &Params, side: TailSide) -> f64 {
    let d = stats.d as i32;
    let p = params.p;
    let r = params.q / p;
    match side {
        TailSide::Coarse => {
            if stats.l1 == 0.0 {
                return 0.0;
            }
            let count = (stats.diameter * pow2(k) + 3.0).powi(d);
            let dev = 2.0 * stats.l1 * pow2(d * k) / 1.2f64.powi(d);
            (count * pow2(-d * k) * dev.powf(p)).powf(r)
        }
        TailSide::Fine => {
            let wide = 2.0 * OVERLAP * pow2(-k);
            let scale = OVERLAP * d as f64 * pow2(-k);
            let sum: f64 = stats
                .patches
                .iter()
                .filter(|(_, g)| *g > 0.0)
                .map(|(sides, g)| {
                    let meas: f64 = sides[..stats.d].iter().map(|s| s + wide).product();
                    meas * (scale * g).powf(p)
                })
                .sum();
            sum.powf(r)
        }
    }
}

/// Bound for the sum of `L_k^q` over all generations strictly beyond
/// `boundary` on the given side.
pub fn tail_sum(stats: &FieldStats, params: &Params, side: TailSide, boundary: i32) -> f64 {
    if side == TailSide::Coarse && params.p == 1.0 && stats.l1 > 0.0 {
        // layers are not summable from this bound when p = 1
        return f64::INFINITY;
    }
    let step = if side == TailSide::Coarse { -1 } else { 1 };
    let mut k = boundary + step;
    let first = tail_estimate(stats, k, params, side);
    if first == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for _ in 0..2000 {
        let t = tail_estimate(stats, k, params, side);
        total += t;
        if t <= first * 1e-17 {
            break;
        }
        k += step;
    }
    total
}

/// Pointwise `max_k delta[f; 0.6 2^{-k}](x)` over `k_min..=k_max` at the cell
/// centers of the stored patches, each padded by half its side per axis
/// when the padded patches stay disjoint.
pub fn maximal_modulus(f: &Field, k_min: i32, k_max: i32, guard: i32) -> Result<Field> {
    if k_min > k_max {
        return Err(Error::InvalidParameters(format!("k_min {k_min} > k_max {k_max}")));
    }
    check_scale(f, k_max, guard)?;
    let d = f.dim();
    let m = f.resolution();
    let padded: Vec<CellBox> = f
        .patches()
        .iter()
        .map(|p| {
            let mut b = *p.bounds();
            for a in 0..d {
                let pad = b.len(a) / 2;
                b.lo[a] -= pad;
                b.hi[a] += pad;
            }
            b
        })
        .collect();
    let regions = if boxes_disjoint(&padded) {
        padded
    } else {
        f.patches().iter().map(|p| *p.bounds()).collect()
    };
    let radii: Vec<f64> = (k_min..=k_max).map(|k| OVERLAP * pow2(m - k)).collect();
    let grids = regions
        .par_iter()
        .map(|r| {
            let samples = r
                .cells()
                .map(|idx| {
                    let mut best = 0.0f64;
                    for &hw in &radii {
                        let b = box_around_cell(d, idx, hw);
                        best = best.max(f.stats_over(&b)?.mad);
                    }
                    Ok(best)
                })
                .collect::<Result<Vec<f64>>>()?;
            let extent: Vec<usize> = (0..d).map(|a| r.len(a) as usize).collect();
            GridFunction::new(d, m, &r.lo[..d], &extent, samples)
        })
        .collect::<Result<Vec<_>>>()?;
    Field::from_patches(d, m, grids)
}

/// Cells within `hw` cells of the center of cell `idx`.
fn box_around_cell(d: usize, idx: [i64; 2], hw: f64) -> CellBox {
    // i' + 1/2 in (i + 1/2 - hw, i + 1/2 + hw)
    let lo_off = (-hw).floor() as i64 + 1;
    let hi_off = hw.ceil() as i64 - 1;
    let mut b = CellBox { d, lo: idx, hi: idx };
    for a in 0..d {
        b.lo[a] += lo_off;
        b.hi[a] += hi_off;
    }
    b
}

fn boxes_disjoint(boxes: &[CellBox]) -> bool {
    let mut sorted: Vec<&CellBox> = boxes.iter().collect();
    sorted.sort_by_key(|b| b.lo[0]);
    for i in 0..sorted.len() {
        for other in &sorted[i + 1..] {
            if other.lo[0] > sorted[i].hi[0] {
                break;
            }
            if !sorted[i].intersect(other).is_empty() {
                return false;
            }
        }
    }
    true
}
