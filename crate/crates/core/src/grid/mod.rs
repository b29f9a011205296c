//! Dense grid functions on uniform dyadic lattices, plus the box primitives
//! (mean and mean absolute deviation) every norm in this crate is built on.
//!
//! Coordinates are handled in *cell units* wherever possible: at resolution
//! `m` the cell with integer index `i` covers `[i 2^-m, (i+1) 2^-m)` and its
//! center sits at `(i + 1/2) 2^-m`. A box contains exactly the cells whose
//! centers lie strictly inside it. One-dimensional data is stored with a
//! trivial second axis (extent 1, index 0) so that all kernels are written
//! once for `d <= 2`.

mod field;
mod io;
mod prefix;
mod render;

pub use field::{box_mad, box_mean, Field, Patch};
pub use io::GridManifest;
pub use prefix::PrefixSums;
pub use render::{render, render_field, DEFAULT_BUDGET_CELLS, DEFAULT_GUARD};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Overlap constant of the discrete seminorm: the box attached to a dyadic
/// cube `Q` has half-width `0.6 l(Q)`.
pub const OVERLAP: f64 = 0.6;

/// `2^e` for a possibly negative integer exponent.
#[inline]
pub fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

/// A dyadic cube `prod_j [2^-k i_j, 2^-k (i_j + 1))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub k: i32,
    pub index: [i64; 2],
}

impl DyadicCube {
    pub fn new(k: i32, index: [i64; 2]) -> Self {
        Self { k, index }
    }

    pub fn side(&self) -> f64 {
        pow2(-self.k)
    }

    pub fn volume(&self, d: usize) -> f64 {
        pow2(-self.k * d as i32)
    }

    pub fn center(&self) -> [f64; 2] {
        let s = self.side();
        [(self.index[0] as f64 + 0.5) * s, (self.index[1] as f64 + 0.5) * s]
    }

    /// The generation-`g` cube containing this one (`g <= k`).
    pub fn ancestor(&self, g: i32) -> DyadicCube {
        debug_assert!(g <= self.k);
        let shift = (self.k - g) as u32;
        DyadicCube {
            k: g,
            index: [self.index[0] >> shift, self.index[1] >> shift],
        }
    }

    /// Dyadic cubes are either nested or disjoint.
    pub fn intersects(&self, other: &DyadicCube) -> bool {
        let (coarse, fine) = if self.k <= other.k {
            (self, other)
        } else {
            (other, self)
        };
        fine.ancestor(coarse.k).index == coarse.index
    }

    /// Cell range covered by the cube at resolution `m >= k`.
    pub fn cells(&self, d: usize, m: i32) -> CellBox {
        let w = 1i64 << (m - self.k);
        let mut lo = [0; 2];
        let mut hi = [0; 2];
        for a in 0..d {
            lo[a] = self.index[a] * w;
            hi[a] = lo[a] + w - 1;
        }
        CellBox { d, lo, hi }
    }
}

/// An inclusive range of integer cell indices per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellBox {
    pub d: usize,
    pub lo: [i64; 2],
    pub hi: [i64; 2],
}

/// Offsets `(lo, hi)` of the cell indices whose centers lie strictly within
/// `hw` cells of an integer lattice point `c`: `i - c` ranges over `lo..=hi`.
#[inline]
fn offsets_around_integer(hw: f64) -> (i64, i64) {
    // i + 1/2 in (c - hw, c + hw)  <=>  i - c in (-hw - 1/2, hw - 1/2)
    let lo = (-hw - 0.5).floor() as i64 + 1;
    let hi = (hw - 0.5).ceil() as i64 - 1;
    (lo, hi)
}

impl CellBox {
    /// Cells whose centers lie in the open box of half-width `half_width`
    /// around `center` (absolute coordinates) at resolution `m`.
    pub fn around(d: usize, m: i32, center: &[f64], half_width: f64) -> CellBox {
        let scale = pow2(m);
        let hw = half_width * scale;
        let mut lo = [0; 2];
        let mut hi = [0; 2];
        for a in 0..d {
            let c = center[a] * scale - 0.5;
            lo[a] = (c - hw).floor() as i64 + 1;
            hi[a] = (c + hw).ceil() as i64 - 1;
        }
        CellBox { d, lo, hi }
    }

    /// The evaluation box of a dyadic cube: half-width `overlap * l(Q)`
    /// around `c_Q`. Computed in exact integer arithmetic relative to the
    /// cube center, so the result depends on `m - k` only through scaling.
    pub fn for_cube(cube: &DyadicCube, d: usize, m: i32, overlap: f64) -> CellBox {
        debug_assert!(m > cube.k);
        let s = 1i64 << (m - cube.k - 1);
        let (lo_off, hi_off) = offsets_around_integer(overlap * pow2(m - cube.k));
        let mut lo = [0; 2];
        let mut hi = [0; 2];
        for a in 0..d {
            let c = (2 * cube.index[a] + 1) * s;
            lo[a] = c + lo_off;
            hi[a] = c + hi_off;
        }
        CellBox { d, lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        (0..self.d).any(|a| self.hi[a] < self.lo[a])
    }

    pub fn len(&self, axis: usize) -> i64 {
        if axis >= self.d {
            1
        } else {
            (self.hi[axis] - self.lo[axis] + 1).max(0)
        }
    }

    pub fn min_len(&self) -> i64 {
        (0..self.d).map(|a| self.len(a)).min().unwrap_or(0)
    }

    /// Number of cells, as a float (coarse boxes exceed any integer type in 2-D).
    pub fn count(&self) -> f64 {
        (0..self.d).map(|a| self.len(a) as f64).product()
    }

    pub fn intersect(&self, other: &CellBox) -> CellBox {
        let mut out = *self;
        for a in 0..self.d {
            out.lo[a] = self.lo[a].max(other.lo[a]);
            out.hi[a] = self.hi[a].min(other.hi[a]);
        }
        out
    }

    pub fn contains_box(&self, other: &CellBox) -> bool {
        (0..self.d).all(|a| self.lo[a] <= other.lo[a] && other.hi[a] <= self.hi[a])
    }

    pub fn contains(&self, idx: [i64; 2]) -> bool {
        (0..self.d).all(|a| self.lo[a] <= idx[a] && idx[a] <= self.hi[a])
    }

    /// Iterates cell indices in lexicographic order (axis 0 outermost).
    pub fn cells(&self) -> impl Iterator<Item = [i64; 2]> + '_ {
        let (lo1, hi1) = if self.d > 1 { (self.lo[1], self.hi[1]) } else { (0, 0) };
        let empty = self.is_empty();
        (self.lo[0]..=self.hi[0])
            .filter(move |_| !empty)
            .flat_map(move |i| (lo1..=hi1).map(move |j| [i, j]))
    }
}

/// Dense samples of a real function at the cell centers of an axis-aligned
/// box of cells. Outside the box the function equals `background`
/// (zero for the compactly supported functions this crate studies).
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    d: usize,
    m: i32,
    origin: [i64; 2],
    extent: [usize; 2],
    background: f64,
    samples: Vec<f64>,
}

fn check_dim(d: usize) -> Result<()> {
    if d == 1 || d == 2 {
        Ok(())
    } else {
        Err(Error::InvalidParameters(format!(
            "dimension {d} not supported (1 or 2)"
        )))
    }
}

fn pad_axes(d: usize, origin: &[i64], extent: &[usize]) -> Result<([i64; 2], [usize; 2])> {
    check_dim(d)?;
    if origin.len() != d || extent.len() != d {
        return Err(Error::InvalidGrid(format!("origin/extent must have {d} components")));
    }
    let mut o = [0; 2];
    let mut e = [1; 2];
    for a in 0..d {
        if extent[a] == 0 || !extent[a].is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "extent {} on axis {a} is not a power of two",
                extent[a]
            )));
        }
        o[a] = origin[a];
        e[a] = extent[a];
    }
    Ok((o, e))
}

impl GridFunction {
    pub fn new(d: usize, m: i32, origin: &[i64], extent: &[usize], samples: Vec<f64>) -> Result<Self> {
        let (origin, extent) = pad_axes(d, origin, extent)?;
        if samples.len() != extent[0] * extent[1] {
            return Err(Error::InvalidGrid(format!(
                "{} samples for extent {:?}",
                samples.len(),
                &extent[..d]
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("sample {i} is not finite")));
        }
        Ok(Self {
            d,
            m,
            origin,
            extent,
            background: 0.0,
            samples,
        })
    }

    pub fn zeros(d: usize, m: i32, origin: &[i64], extent: &[usize]) -> Result<Self> {
        let (o, e) = pad_axes(d, origin, extent)?;
        Self::new(d, m, &o[..d], &e[..d], vec![0.0; e[0] * e[1]])
    }

    /// Samples `f` at the cell centers (absolute coordinates).
    pub fn from_fn(d: usize, m: i32, origin: &[i64], extent: &[usize], f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let mut g = Self::zeros(d, m, origin, extent)?;
        let cells: Vec<[i64; 2]> = g.bounds().cells().collect();
        for (slot, idx) in g.samples.iter_mut().zip(cells) {
            *slot = f(cell_center(d, m, idx));
        }
        if let Some(i) = g.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("sample {i} is not finite")));
        }
        Ok(g)
    }

    /// The constant function `c` on all of R^d (the box is only a window).
    pub fn constant(d: usize, m: i32, origin: &[i64], extent: &[usize], c: f64) -> Result<Self> {
        let (o, e) = pad_axes(d, origin, extent)?;
        let mut g = Self::new(d, m, &o[..d], &e[..d], vec![c; e[0] * e[1]])?;
        g.background = c;
        Ok(g)
    }

    pub fn with_background(mut self, background: f64) -> Self {
        self.background = background;
        self
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn resolution(&self) -> i32 {
        self.m
    }

    pub fn origin(&self) -> &[i64] {
        &self.origin[..self.d]
    }

    pub fn extent(&self) -> &[usize] {
        &self.extent[..self.d]
    }

    pub fn background(&self) -> f64 {
        self.background
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        pow2(-self.m * self.d as i32)
    }

    /// Inclusive cell range of the sampled box.
    pub fn bounds(&self) -> CellBox {
        let mut hi = [0; 2];
        for (a, h) in hi.iter_mut().enumerate().take(self.d) {
            *h = self.origin[a] + self.extent[a] as i64 - 1;
        }
        CellBox {
            d: self.d,
            lo: self.origin,
            hi,
        }
    }

    #[inline]
    pub(crate) fn local_offset(&self, idx: [i64; 2]) -> usize {
        let i0 = (idx[0] - self.origin[0]) as usize;
        let i1 = (idx[1] - self.origin[1]) as usize;
        i0 * self.extent[1] + i1
    }

    /// Value at a global cell index; `background` outside the box.
    pub fn value_at(&self, idx: [i64; 2]) -> f64 {
        if self.bounds().contains(idx) {
            self.samples[self.local_offset(idx)]
        } else {
            self.background
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples
            .iter()
            .fold(self.background.abs(), |acc, v| acc.max(v.abs()))
    }

    fn require_compact(&self) -> Result<()> {
        if self.background != 0.0 {
            Err(Error::NotCompactlySupported(self.background))
        } else {
            Ok(())
        }
    }

    /// `(sum |f|^p 2^{-dm})^{1/p}`, a midpoint-rule L_p norm.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        self.require_compact()?;
        let s: f64 = self.samples.iter().map(|v| v.abs().powf(p)).sum();
        Ok((s * self.cell_volume()).powf(1.0 / p))
    }

    /// Multiplies samples and background by `c`.
    pub fn scaled(&self, c: f64) -> GridFunction {
        let mut g = self.clone();
        g.samples.iter_mut().for_each(|v| *v *= c);
        g.background *= c;
        g
    }

    /// Adds `c` everywhere, including the background.
    pub fn shifted(&self, c: f64) -> GridFunction {
        let mut g = self.clone();
        g.samples.iter_mut().for_each(|v| *v += c);
        g.background += c;
        g
    }

    /// Translates the box by `cells` lattice steps.
    pub fn translated(&self, cells: &[i64]) -> GridFunction {
        let mut g = self.clone();
        for (o, c) in g.origin.iter_mut().zip(cells) {
            *o += c;
        }
        g
    }

    /// Reinterprets the samples at resolution `m - s`, i.e. the `2^s`-dilate
    /// `x -> c f(2^-s x)` with `c = 2^{-sd/p}` preserving the L_p norm.
    pub fn dilated(&self, s: i32, p: f64) -> GridFunction {
        let mut g = self.scaled(pow2(-s * self.d as i32).powf(1.0 / p));
        g.m -= s;
        g
    }
}

/// Absolute coordinates of the center of cell `idx` at resolution `m`.
pub fn cell_center(d: usize, m: i32, idx: [i64; 2]) -> [f64; 2] {
    let h = pow2(-m);
    let mut c = [0.0; 2];
    for a in 0..d {
        c[a] = (idx[a] as f64 + 0.5) * h;
    }
    c
}
