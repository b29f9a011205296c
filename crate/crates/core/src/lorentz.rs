//! Lorentz quasi-norms `L_{p,q}` of step functions via their decreasing
//! rearrangement.
//!
//! For `f*(t) = v_i` on `[s_{i-1}, s_i)` the norm has the closed form
//! `(sum_i v_i^q (p/q) (s_i^{q/p} - s_{i-1}^{q/p}))^{1/q}`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::constructions::{reference_bump, AtomicFunction};
use crate::error::{Error, Result};
use crate::grid::{pow2, DyadicCube, Field, GridFunction};

/// Decreasing rearrangement of a step function: `f*(t) = levels[i]` on
/// `[masses[i-1], masses[i])`, with `masses[-1] = 0`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDistribution {
    levels: Vec<f64>,
    masses: Vec<f64>,
}

impl StepDistribution {
    pub fn new(levels: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if levels.len() != masses.len() {
            return Err(Error::DegenerateInput("levels and masses differ in length".into()));
        }
        let ok_levels = levels.iter().all(|v| v.is_finite() && *v >= 0.0) && levels.windows(2).all(|w| w[0] > w[1]);
        let ok_masses = masses.iter().all(|s| s.is_finite())
            && masses.first().is_none_or(|&s| s > 0.0)
            && masses.windows(2).all(|w| w[0] < w[1]);
        if !ok_levels || !ok_masses {
            return Err(Error::DegenerateInput(
                "levels must strictly decrease and masses strictly increase".into(),
            ));
        }
        Ok(Self { levels, masses })
    }

    /// Merges `(level, mass)` pieces in any order. Zero levels and empty
    /// masses are dropped; equal levels merge.
    pub fn from_pieces(mut pieces: Vec<(f64, f64)>) -> Self {
        pieces.retain(|&(v, w)| v > 0.0 && w > 0.0);
        pieces.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut levels: Vec<f64> = Vec::new();
        let mut increments: Vec<f64> = Vec::new();
        for (v, w) in pieces {
            if levels.last() == Some(&v) {
                *increments.last_mut().expect("nonempty") += w;
            } else {
                levels.push(v);
                increments.push(w);
            }
        }
        let mut total = 0.0;
        let masses = increments
            .into_iter()
            .map(|w| {
                total += w;
                total
            })
            .collect();
        Self { levels, masses }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.last().copied().unwrap_or(0.0)
    }

    /// Pairs `(v_i, s_i - s_{i-1})`.
    pub fn increments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let prev = std::iter::once(0.0).chain(self.masses.iter().copied());
        self.levels
            .iter()
            .zip(self.masses.iter().zip(prev))
            .map(|(&v, (&s, s0))| (v, s - s0))
    }

    /// `f*(t)`.
    pub fn value_at(&self, t: f64) -> f64 {
        let i = self.masses.partition_point(|&s| s <= t);
        self.levels.get(i).copied().unwrap_or(0.0)
    }

    /// `|{|f| >= t}|`.
    pub fn distribution(&self, t: f64) -> f64 {
        let i = self.levels.partition_point(|&v| v >= t);
        if i == 0 {
            0.0
        } else {
            self.masses[i - 1]
        }
    }

    /// The rearrangement of `c f`.
    pub fn scaled(&self, c: f64) -> StepDistribution {
        if c == 0.0 {
            return StepDistribution::default();
        }
        Self {
            levels: self.levels.iter().map(|v| v * c.abs()).collect(),
            masses: self.masses.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["level", "cumulative_mass"])?;
        for (v, s) in self.levels.iter().zip(&self.masses) {
            wr.write_record([format!("{v:e}"), format!("{s:e}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut levels = Vec::new();
        let mut masses = Vec::new();
        for rec in rd.deserialize() {
            let (v, s): (f64, f64) = rec?;
            levels.push(v);
            masses.push(s);
        }
        Self::new(levels, masses)
    }
}

/// Distinct `|sample|` values with cumulative cell measure. Zero samples
/// (and the zero background) are outside the support.
pub fn rearrangement(f: &GridFunction) -> Result<StepDistribution> {
    if f.background() != 0.0 {
        return Err(Error::NotCompactlySupported(f.background()));
    }
    Ok(from_samples(f.samples().iter().copied(), f.cell_volume()))
}

/// [`rearrangement`] for a sparse field.
pub fn field_rearrangement(f: &Field) -> Result<StepDistribution> {
    if !f.is_compactly_supported() {
        return Err(Error::NotCompactlySupported(f.background()));
    }
    let samples = f.patches().iter().flat_map(|p| p.grid().samples().iter().copied());
    Ok(from_samples(samples, f.cell_volume()))
}

fn from_samples(samples: impl Iterator<Item = f64>, cell: f64) -> StepDistribution {
    let mut abs: Vec<f64> = samples.map(f64::abs).filter(|v| *v > 0.0).collect();
    abs.sort_by(|a, b| b.total_cmp(a));
    let mut levels = Vec::new();
    let mut masses = Vec::new();
    for (i, v) in abs.iter().enumerate() {
        if levels.last() != Some(v) {
            if !levels.is_empty() {
                masses.push(i as f64 * cell);
            }
            levels.push(*v);
        }
    }
    if !levels.is_empty() {
        masses.push(abs.len() as f64 * cell);
    }
    StepDistribution { levels, masses }
}

/// `b^r - a^r` for `0 <= a < b` without cancellation when `b - a << a`.
fn power_difference(a: f64, b: f64, r: f64) -> f64 {
    if a == 0.0 {
        b.powf(r)
    } else {
        a.powf(r) * (r * ((b - a) / a).ln_1p()).exp_m1()
    }
}

/// Closed-form `L_{p,q}` quasi-norm of a step rearrangement.
pub fn lorentz_norm(sd: &StepDistribution, p: f64, q: f64) -> f64 {
    let r = q / p;
    let mut s0 = 0.0;
    let mut acc = 0.0;
    for (&v, &s) in sd.levels.iter().zip(&sd.masses) {
        acc += v.powf(q) * power_difference(s0, s, r);
        s0 = s;
    }
    (acc / r).powf(1.0 / q)
}

/// `l_{p,q}` quasi-norm of a finite sequence under counting measure. Signs
/// are ignored.
pub fn lorentz_seq_norm(a: &[f64], p: f64, q: f64) -> f64 {
    lorentz_norm(&from_samples(a.iter().copied(), 1.0), p, q)
}

/// Reference resolution for the rearrangement of the bump on the unit cube.
pub fn phi_reference_resolution(d: usize) -> i32 {
    if d == 1 {
        12
    } else {
        10
    }
}

/// Rearrangement of the reference bump sampled on the unit cube at
/// [`phi_reference_resolution`]. Computed once per dimension.
pub fn phi_distribution(d: usize) -> Result<&'static StepDistribution> {
    static CACHE: [OnceLock<StepDistribution>; 2] = [OnceLock::new(), OnceLock::new()];
    let bump = reference_bump(d)?;
    Ok(CACHE[d - 1].get_or_init(|| {
        let m = phi_reference_resolution(d);
        let n = 1usize << m;
        let cells = DyadicCube::new(0, [0, 0]).cells(d, m);
        let samples = cells.cells().map(|idx| {
            let mut u = [0.0; 2];
            for a in 0..d {
                u[a] = (idx[a] as f64 + 0.5) / n as f64 - 0.5;
            }
            bump.eval(u)
        });
        from_samples(samples, pow2(-(d as i32) * m))
    }))
}

/// Exact `L_{p,q}` quasi-norm of a disjoint atomic sum whose atoms are
/// copies of the bump with rearrangement `phi_sd`. Atoms with equal
/// `(|c|, generation)` are merged by multiplicity.
pub fn atomic_lorentz_norm(atoms: &AtomicFunction, phi_sd: &StepDistribution, p: f64, q: f64) -> Result<f64> {
    atoms.check_disjoint()?;
    let d = atoms.d as i32;
    let mut classes: BTreeMap<(u64, i32), usize> = BTreeMap::new();
    for a in &atoms.atoms {
        if a.coefficient != 0.0 {
            *classes.entry((a.coefficient.abs().to_bits(), a.cube.k)).or_default() += 1;
        }
    }
    let mut pieces = Vec::with_capacity(classes.len() * phi_sd.levels.len());
    for ((bits, k), count) in classes {
        let c = f64::from_bits(bits);
        let scale = count as f64 * pow2(-d * k);
        pieces.extend(phi_sd.increments().map(|(v, w)| (c * v, scale * w)));
    }
    Ok(lorentz_norm(&StepDistribution::from_pieces(pieces), p, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{build_f, sequence_an, Atom, ConstructionMeta};
    use crate::grid::{render, DEFAULT_BUDGET_CELLS};
    use crate::smoothness::Params;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn rearrangement_examples() {
        let z = GridFunction::zeros(1, 3, &[0], &[8]).unwrap();
        assert!(rearrangement(&z).unwrap().is_empty());
        let ind = GridFunction::from_fn(1, 4, &[0], &[16], |x| if x[0] < 0.25 { 1.0 } else { 0.0 }).unwrap();
        let sd = rearrangement(&ind).unwrap();
        assert_eq!(sd.levels(), &[1.0]);
        assert_eq!(sd.masses(), &[4.0 / 16.0]);
        let g = GridFunction::new(1, 0, &[0], &[4], vec![3.0, 1.0, -1.0, 0.0]).unwrap();
        let sd = rearrangement(&g).unwrap();
        assert_eq!(sd.levels(), &[3.0, 1.0]);
        assert_eq!(sd.masses(), &[1.0, 3.0]);
        assert_eq!(sd.distribution(1.0), 3.0);
        assert_eq!(sd.value_at(2.5), 1.0);
    }

    #[test]
    fn indicator_closed_form() {
        let sd = StepDistribution::new(vec![1.0], vec![0.3]).unwrap();
        for (p, q) in [(2.0f64, 1.0f64), (1.5, 4.0), (3.0, 3.0)] {
            let want = (p / q).powf(1.0 / q) * 0.3f64.powf(1.0 / p);
            assert!(rel(lorentz_norm(&sd, p, q), want) < 1e-14);
        }
    }

    #[test]
    fn sequence_examples() {
        let ones = vec![1.0; 7];
        assert!(rel(lorentz_seq_norm(&ones, 2.5, 2.5), 7f64.powf(0.4)) < 1e-14);
        let pr = Params::new(2.0, 1.0, 1).unwrap();
        for n in 1..=8 {
            let a = sequence_an(n, &pr).unwrap();
            let lp = lorentz_seq_norm(&a, 2.0, 2.0);
            assert!(rel(lp * lp, 1.0 + n as f64) < 1e-12);
        }
    }

    #[test]
    fn single_and_doubled_atoms() {
        let phi = phi_distribution(1).unwrap();
        let unit = |cubes: &[[i64; 2]]| {
            AtomicFunction::new(
                1,
                cubes
                    .iter()
                    .map(|&i| Atom {
                        cube: DyadicCube::new(0, i),
                        coefficient: 1.0,
                    })
                    .collect(),
                ConstructionMeta::default(),
            )
            .unwrap()
        };
        let one = atomic_lorentz_norm(&unit(&[[0, 0]]), phi, 2.0, 3.0).unwrap();
        assert!(rel(one, lorentz_norm(phi, 2.0, 3.0)) < 1e-14);
        let two = atomic_lorentz_norm(&unit(&[[0, 0], [5, 0]]), phi, 3.0, 3.0).unwrap();
        let one = atomic_lorentz_norm(&unit(&[[0, 0]]), phi, 3.0, 3.0).unwrap();
        assert!(rel(two, 2f64.powf(1.0 / 3.0) * one) < 1e-12);
    }

    #[test]
    fn atomic_matches_rendered_grid() {
        let pr = Params::new(2.0, 4.0, 1).unwrap();
        let f = build_f(3, 6, &pr).unwrap();
        let exact = atomic_lorentz_norm(&f, phi_distribution(1).unwrap(), 2.0, 4.0).unwrap();
        let g = render(&f, 12, 4, DEFAULT_BUDGET_CELLS).unwrap();
        let grid = lorentz_norm(&rearrangement(&g).unwrap(), 2.0, 4.0);
        assert!(rel(grid, exact) < 0.02, "{grid} vs {exact}");
    }

    #[test]
    fn csv_roundtrip() {
        let sd = StepDistribution::new(vec![2.0, 0.5, 0.125], vec![0.25, 1.0, 1.75]).unwrap();
        let mut buf = Vec::new();
        sd.write_csv(&mut buf).unwrap();
        assert_eq!(StepDistribution::read_csv(&buf[..]).unwrap(), sd);
    }

    #[test]
    fn invalid_distributions_rejected() {
        assert!(StepDistribution::new(vec![1.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(StepDistribution::new(vec![2.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(StepDistribution::new(vec![1.0], vec![0.0]).is_err());
    }

    fn step_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((1e-3f64..10.0, 1e-4f64..2.0), 1..40)
    }

    proptest! {
        #[test]
        fn q_equal_p_is_lp(pieces in step_strategy(), p in 1.0f64..6.0) {
            let sd = StepDistribution::from_pieces(pieces.clone());
            let lp: f64 = pieces.iter().map(|(v, w)| v.powf(p) * w).sum::<f64>().powf(1.0 / p);
            prop_assert!(rel(lorentz_norm(&sd, p, p), lp) < 1e-10);
        }

        #[test]
        fn homogeneity(pieces in step_strategy(), c in 1e-3f64..1e3, p in 1.0f64..5.0, q in 1.0f64..5.0) {
            let sd = StepDistribution::from_pieces(pieces);
            let a = lorentz_norm(&sd.scaled(c), p, q);
            prop_assert!(rel(a, c * lorentz_norm(&sd, p, q)) < 1e-12);
        }

        #[test]
        fn permutation_invariance(vals in prop::collection::vec(-5.0f64..5.0, 16), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = vals.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = GridFunction::new(1, 4, &[0], &[16], vals).unwrap();
            let b = GridFunction::new(1, 4, &[0], &[16], shuffled).unwrap();
            prop_assert_eq!(
                lorentz_norm(&rearrangement(&a).unwrap(), 1.5, 3.0),
                lorentz_norm(&rearrangement(&b).unwrap(), 1.5, 3.0)
            );
        }

        #[test]
        fn monotone_under_pointwise_domination(
            vals in prop::collection::vec(-5.0f64..5.0, 16),
            extra in prop::collection::vec(0.0f64..2.0, 16),
            p in 1.0f64..4.0, q in 1.0f64..4.0,
        ) {
            let big: Vec<f64> = vals.iter().zip(&extra).map(|(v, e)| v.abs() + e).collect();
            let a = GridFunction::new(1, 4, &[0], &[16], vals).unwrap();
            let b = GridFunction::new(1, 4, &[0], &[16], big).unwrap();
            let na = lorentz_norm(&rearrangement(&a).unwrap(), p, q);
            let nb = lorentz_norm(&rearrangement(&b).unwrap(), p, q);
            prop_assert!(na <= nb * (1.0 + 1e-12));
        }
    }
}
