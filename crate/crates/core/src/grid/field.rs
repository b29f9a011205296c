use super::{pow2, CellBox, DyadicCube, GridFunction, PrefixSums};
use crate::error::{Error, Result};

/// One dense piece of a [`Field`], with its integral image and a sorted copy
/// of its samples (mean deviations over boxes covering the whole patch are
/// then a binary search instead of a pass).
#[derive(Clone, Debug)]
pub struct Patch {
    grid: GridFunction,
    prefix: PrefixSums,
    bounds: CellBox,
    sorted: Vec<f64>,
    sorted_prefix: Vec<f64>,
}

impl Patch {
    fn new(grid: GridFunction) -> Self {
        let prefix = PrefixSums::new(&grid);
        let bounds = grid.bounds();
        let mut sorted = grid.samples().to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut sorted_prefix = Vec::with_capacity(sorted.len() + 1);
        let mut acc = 0.0;
        sorted_prefix.push(acc);
        for v in &sorted {
            acc += v;
            sorted_prefix.push(acc);
        }
        Self {
            grid,
            prefix,
            bounds,
            sorted,
            sorted_prefix,
        }
    }

    pub fn grid(&self) -> &GridFunction {
        &self.grid
    }

    pub fn bounds(&self) -> &CellBox {
        &self.bounds
    }

    /// `sum |v - mu|` over the whole patch, with min and max.
    fn full_deviation(&self, mu: f64) -> (f64, f64, f64) {
        let n = self.sorted.len();
        let i = self.sorted.partition_point(|&v| v < mu);
        let p = &self.sorted_prefix;
        let below = i as f64 * mu - p[i];
        let above = (p[n] - p[i]) - (n - i) as f64 * mu;
        (below + above, self.sorted[0], self.sorted[n - 1])
    }

    /// `sum |v - mu|` over the part of the patch inside `clip`, with min and max.
    fn partial_deviation(&self, clip: &CellBox, mu: f64) -> (f64, f64, f64) {
        let g = &self.grid;
        let s = g.samples();
        let (j0, j1) = if clip.d > 1 { (clip.lo[1], clip.hi[1]) } else { (0, 0) };
        let width = (j1 - j0 + 1) as usize;
        let mut dev = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in clip.lo[0]..=clip.hi[0] {
            let start = g.local_offset([i, j0]);
            for &v in &s[start..start + width] {
                dev += (v - mu).abs();
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (dev, lo, hi)
    }
}

/// Box statistics over the cells whose centers lie in a box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxStats {
    pub count: f64,
    pub mean: f64,
    pub mad: f64,
}

/// A function sampled on one lattice as a set of pairwise disjoint dense
/// patches; it equals `background` everywhere else. A single
/// [`GridFunction`] is a field with one patch. Rendered atomic sums are
/// fields with one patch per atom, which keeps resolutions far beyond
/// what a dense grid over the whole support could hold.
#[derive(Clone, Debug)]
pub struct Field {
    d: usize,
    m: i32,
    background: f64,
    patches: Vec<Patch>,
    max_width0: i64,
}

impl From<GridFunction> for Field {
    fn from(g: GridFunction) -> Self {
        let d = g.dim();
        let m = g.resolution();
        let background = g.background();
        let max_width0 = g.extent()[0] as i64;
        Field {
            d,
            m,
            background,
            patches: vec![Patch::new(g)],
            max_width0,
        }
    }
}

impl Field {
    /// Builds a field from patches on a common lattice; the patches must be
    /// pairwise disjoint and carry zero background.
    pub fn from_patches(d: usize, m: i32, mut grids: Vec<GridFunction>) -> Result<Self> {
        for g in &grids {
            if g.dim() != d || g.resolution() != m {
                return Err(Error::InvalidGrid(format!(
                    "patch with d={} m={} in a field with d={d} m={m}",
                    g.dim(),
                    g.resolution()
                )));
            }
            if g.background() != 0.0 {
                return Err(Error::InvalidGrid("patches must have zero background".into()));
            }
        }
        grids.sort_by_key(|g| (g.origin()[0], g.origin().get(1).copied().unwrap_or(0)));
        // sweep along axis 0 for overlaps
        for i in 0..grids.len() {
            let bi = grids[i].bounds();
            for gj in &grids[i + 1..] {
                let bj = gj.bounds();
                if bj.lo[0] > bi.hi[0] {
                    break;
                }
                if !bi.intersect(&bj).is_empty() {
                    return Err(Error::InvalidGrid(format!(
                        "patches at {:?} and {:?} overlap",
                        bi.lo, bj.lo
                    )));
                }
            }
        }
        let max_width0 = grids.iter().map(|g| g.extent()[0] as i64).max().unwrap_or(1);
        Ok(Field {
            d,
            m,
            background: 0.0,
            patches: grids.into_iter().map(Patch::new).collect(),
            max_width0,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn resolution(&self) -> i32 {
        self.m
    }

    pub fn background(&self) -> f64 {
        self.background
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn cell_volume(&self) -> f64 {
        pow2(-self.m * self.d as i32)
    }

    /// Total number of explicitly stored cells.
    pub fn stored_cells(&self) -> usize {
        self.patches.iter().map(|p| p.grid.len()).sum()
    }

    pub fn is_compactly_supported(&self) -> bool {
        self.background == 0.0
    }

    /// True when the field is a single value everywhere.
    pub fn is_globally_constant(&self) -> bool {
        self.patches
            .iter()
            .all(|p| p.sorted[0] == self.background && p.sorted[p.sorted.len() - 1] == self.background)
    }

    pub fn value_at(&self, idx: [i64; 2]) -> f64 {
        let probe = CellBox {
            d: self.d,
            lo: idx,
            hi: idx,
        };
        let hit = self.touching(&probe).next();
        hit.map(|p| p.grid.value_at(idx)).unwrap_or(self.background)
    }

    /// Patches whose cells intersect `b`.
    pub fn touching<'a>(&'a self, b: &'a CellBox) -> impl Iterator<Item = &'a Patch> + 'a {
        let lo = b.lo[0] - self.max_width0 + 1;
        let start = self.patches.partition_point(|p| p.bounds.lo[0] < lo);
        self.patches[start..]
            .iter()
            .take_while(move |p| p.bounds.lo[0] <= b.hi[0])
            .filter(move |p| !p.bounds.intersect(b).is_empty())
    }

    pub fn sup_norm(&self) -> f64 {
        self.patches.iter().fold(self.background.abs(), |acc, p| {
            acc.max(p.sorted[0].abs()).max(p.sorted[p.sorted.len() - 1].abs())
        })
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !self.is_compactly_supported() {
            return Err(Error::NotCompactlySupported(self.background));
        }
        let s: f64 = self
            .patches
            .iter()
            .flat_map(|pa| pa.grid.samples())
            .map(|v| v.abs().powf(p))
            .sum();
        Ok((s * self.cell_volume()).powf(1.0 / p))
    }

    fn check_box(&self, b: &CellBox) -> Result<()> {
        let n = b.min_len();
        if n < 2 {
            Err(Error::DegenerateBox { cells_per_axis: n })
        } else {
            Ok(())
        }
    }

    /// Mean over the cells of `b` (cells outside every patch hold the background).
    pub fn mean_over(&self, b: &CellBox) -> Result<f64> {
        self.check_box(b)?;
        let count = b.count();
        let mut sum = 0.0;
        let mut explicit = 0.0;
        for p in self.touching(b) {
            let clip = p.bounds.intersect(b);
            sum += p.prefix.box_sum(&clip);
            explicit += clip.count();
        }
        Ok((sum + (count - explicit) * self.background) / count)
    }

    /// Mean and mean absolute deviation over the cells of `b`.
    pub fn stats_over(&self, b: &CellBox) -> Result<BoxStats> {
        self.check_box(b)?;
        let count = b.count();
        let mut sum = 0.0;
        let mut explicit = 0.0;
        let mut hits: Vec<(&Patch, CellBox)> = Vec::new();
        for p in self.touching(b) {
            let clip = p.bounds.intersect(b);
            sum += p.prefix.box_sum(&clip);
            explicit += clip.count();
            hits.push((p, clip));
        }
        let implicit = count - explicit;
        let mean = (sum + implicit * self.background) / count;

        let mut dev = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        if implicit > 0.0 {
            dev += implicit * (self.background - mean).abs();
            lo = self.background;
            hi = self.background;
        }
        for (p, clip) in hits {
            let (s, a, z) = if clip == p.bounds {
                p.full_deviation(mean)
            } else {
                p.partial_deviation(&clip, mean)
            };
            dev += s;
            lo = lo.min(a);
            hi = hi.max(z);
        }
        if lo == hi {
            return Ok(BoxStats {
                count,
                mean: lo,
                mad: 0.0,
            });
        }
        Ok(BoxStats {
            count,
            mean,
            mad: dev / count,
        })
    }

    /// Generation-`k` cubes whose evaluation boxes meet some patch. All other
    /// cubes see only the background and have zero mean deviation.
    pub fn cubes_touching(&self, k: i32, overlap: f64) -> Result<Vec<DyadicCube>> {
        let shift = self.m - k;
        if !(1..=60).contains(&shift) {
            return Err(Error::InvalidParameters(format!(
                "generation {k} out of range for resolution {}",
                self.m
            )));
        }
        let probe = CellBox::for_cube(&DyadicCube::new(k, [0, 0]), self.d, self.m, overlap);
        let s = 1i128 << (shift - 1);
        let (lo_off, hi_off) = (probe.lo[0] as i128 - s, probe.hi[0] as i128 - s);
        let range = |a: i64, b: i64| -> (i64, i64) {
            // (2j+1)s + lo_off <= b  and  (2j+1)s + hi_off >= a
            let jmax = (b as i128 - lo_off - s).div_euclid(2 * s);
            let jmin = -((-(a as i128 - hi_off - s)).div_euclid(2 * s));
            (jmin as i64, jmax as i64)
        };
        let mut out = Vec::new();
        for p in &self.patches {
            let (a0, b0) = range(p.bounds.lo[0], p.bounds.hi[0]);
            let (a1, b1) = if self.d > 1 {
                range(p.bounds.lo[1], p.bounds.hi[1])
            } else {
                (0, 0)
            };
            for i in a0..=b0 {
                for j in a1..=b1 {
                    out.push([i, j]);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out.into_iter().map(|idx| DyadicCube::new(k, idx)).collect())
    }
}

/// Mean of `f` over the cells whose centers lie in the open box of
/// half-width `half_width` around `center`.
pub fn box_mean(f: &Field, center: &[f64], half_width: f64) -> Result<f64> {
    f.mean_over(&CellBox::around(f.dim(), f.resolution(), center, half_width))
}

/// Mean absolute deviation from the box mean over the same cells as
/// [`box_mean`].
pub fn box_mad(f: &Field, center: &[f64], half_width: f64) -> Result<f64> {
    Ok(
        f.stats_over(&CellBox::around(f.dim(), f.resolution(), center, half_width))?
            .mad,
    )
}
