use super::{CellBox, GridFunction};

/// Integral image of a [`GridFunction`]: `table[i][j]` is the sum of all
/// samples with local indices `< (i, j)`. Box sums need `2^d` reads.
#[derive(Clone, Debug)]
pub struct PrefixSums {
    origin: [i64; 2],
    stride: usize,
    table: Vec<f64>,
}

impl PrefixSums {
    pub fn new(g: &GridFunction) -> Self {
        let e0 = g.extent[0];
        let e1 = g.extent[1];
        let stride = e1 + 1;
        let mut table = vec![0.0; (e0 + 1) * stride];
        let s = g.samples();
        for i in 0..e0 {
            let mut row = 0.0;
            for j in 0..e1 {
                row += s[i * e1 + j];
                table[(i + 1) * stride + j + 1] = table[i * stride + j + 1] + row;
            }
        }
        Self {
            origin: g.origin,
            stride,
            table,
        }
    }

    /// Sum of samples over a box given in global cell indices. The box must
    /// lie inside the grid.
    pub fn box_sum(&self, b: &CellBox) -> f64 {
        if b.is_empty() {
            return 0.0;
        }
        let i0 = (b.lo[0] - self.origin[0]) as usize;
        let i1 = (b.hi[0] - self.origin[0]) as usize + 1;
        let (j0, j1) = if b.d > 1 {
            (
                (b.lo[1] - self.origin[1]) as usize,
                (b.hi[1] - self.origin[1]) as usize + 1,
            )
        } else {
            (0, 1)
        };
        let t = &self.table;
        let w = self.stride;
        t[i1 * w + j1] - t[i0 * w + j1] - t[i1 * w + j0] + t[i0 * w + j0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn direct(g: &GridFunction, b: &CellBox) -> (f64, f64) {
        b.cells().fold((0.0, 0.0), |(s, a), idx| {
            let v = g.value_at(idx);
            (s + v, a + v.abs())
        })
    }

    #[test]
    fn box_sums_match_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let d = 1 + trial % 2;
            let ext: Vec<usize> = (0..d).map(|_| 1 << rng.gen_range(2..7)).collect();
            let origin: Vec<i64> = (0..d).map(|_| rng.gen_range(-50..50)).collect();
            let n: usize = ext.iter().product();
            let samples = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let g = GridFunction::new(d, 5, &origin, &ext, samples).unwrap();
            let ps = PrefixSums::new(&g);
            let bounds = g.bounds();
            for _ in 0..10 {
                let mut b = bounds;
                for a in 0..d {
                    let x = rng.gen_range(bounds.lo[a]..=bounds.hi[a]);
                    let y = rng.gen_range(bounds.lo[a]..=bounds.hi[a]);
                    b.lo[a] = x.min(y);
                    b.hi[a] = x.max(y);
                }
                let (want, scale) = direct(&g, &b);
                let got = ps.box_sum(&b);
                assert!(
                    (got - want).abs() <= 1e-9 * scale.max(1e-300),
                    "trial {trial}: {got} vs {want}"
                );
            }
        }
    }
}
