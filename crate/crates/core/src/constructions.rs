//! Exact sparse representations of the counterexample functions: the
//! reference bump, the sequence `A^N`, the family `f_{N,n}`, single building
//! blocks and scale-separated sums of blocks.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{pow2, DyadicCube};
use crate::smoothness::Params;

/// The reference bump `phi(u) = sin(2 pi u_1) prod_j exp(-1 / (1 - (2 u_j)^2))`
/// on the unit cube `[-1/2, 1/2]^d`; smooth, odd in `u_1`, zero integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bump {
    d: usize,
}

pub fn reference_bump(d: usize) -> Result<Bump> {
    if d == 1 || d == 2 {
        Ok(Bump { d })
    } else {
        Err(Error::InvalidParameters(format!("bump dimension {d} not supported")))
    }
}

impl Bump {
    pub(crate) fn new_unchecked(d: usize) -> Self {
        debug_assert!(d == 1 || d == 2);
        Bump { d }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Value at local coordinates `u` (cube centered at 0 with unit side).
    #[inline]
    pub fn eval(&self, u: [f64; 2]) -> f64 {
        let mut cutoff = 1.0;
        for &x in &u[..self.d] {
            let t = 2.0 * x;
            if t.abs() >= 1.0 {
                return 0.0;
            }
            cutoff *= (-1.0 / (1.0 - t * t)).exp();
        }
        (2.0 * PI * u[0]).sin() * cutoff
    }
}

/// `coefficient * phi((x - c_Q) / l(Q))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub cube: DyadicCube,
    pub coefficient: f64,
}

/// How an [`AtomicFunction`] was built; serialized as the CSV header.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstructionMeta {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub big_n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub small_n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_scale: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

/// A finite sum of adjusted bumps with pairwise disjoint supports.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicFunction {
    pub d: usize,
    pub atoms: Vec<Atom>,
    pub meta: ConstructionMeta,
}

impl AtomicFunction {
    pub fn new(d: usize, atoms: Vec<Atom>, meta: ConstructionMeta) -> Result<Self> {
        let f = Self { d, atoms, meta };
        f.check_disjoint()?;
        Ok(f)
    }

    pub fn empty(d: usize) -> Self {
        Self {
            d,
            atoms: Vec::new(),
            meta: ConstructionMeta::default(),
        }
    }

    pub fn finest_generation(&self) -> Option<i32> {
        self.atoms.iter().map(|a| a.cube.k).max()
    }

    pub fn coarsest_generation(&self) -> Option<i32> {
        self.atoms.iter().map(|a| a.cube.k).min()
    }

    /// Sum of atom support measures.
    pub fn total_measure(&self) -> f64 {
        self.atoms.iter().map(|a| a.cube.volume(self.d)).sum()
    }

    /// Exact pairwise disjointness: dyadic cubes intersect only when one is
    /// an ancestor of the other.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut gens: Vec<i32> = self.atoms.iter().map(|a| a.cube.k).collect();
        gens.sort_unstable();
        gens.dedup();
        let mut seen: HashSet<DyadicCube> = HashSet::with_capacity(self.atoms.len());
        for a in &self.atoms {
            if !seen.insert(a.cube) {
                return Err(Error::AtomsNotDisjoint(format!("cube {:?} repeated", a.cube)));
            }
        }
        for a in &self.atoms {
            for &g in gens.iter().take_while(|&&g| g < a.cube.k) {
                let anc = a.cube.ancestor(g);
                if seen.contains(&anc) {
                    return Err(Error::AtomsNotDisjoint(format!("{:?} lies inside {:?}", a.cube, anc)));
                }
            }
        }
        Ok(())
    }

    /// Analytic value at an absolute point.
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let bump = Bump { d: self.d };
        self.atoms
            .iter()
            .filter_map(|a| {
                let s = a.cube.side();
                let c = a.cube.center();
                let mut u = [0.0; 2];
                for j in 0..self.d {
                    u[j] = (x[j] - c[j]) / s;
                    if u[j].abs() >= 0.5 {
                        return None;
                    }
                }
                Some(a.coefficient * bump.eval(u))
            })
            .sum()
    }

    /// Translates every atom by the integer `offset` along axis 0.
    pub fn translated(&self, offset: i64) -> Result<Self> {
        let mut out = self.clone();
        for a in &mut out.atoms {
            if a.cube.k < 0 {
                return Err(Error::InvalidParameters(
                    "integer translation needs atoms of generation >= 0".into(),
                ));
            }
            a.cube.index[0] += offset << a.cube.k;
        }
        out.meta.offset = Some(self.meta.offset.unwrap_or(0) + offset);
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.atoms.iter_mut().for_each(|a| a.coefficient *= c);
        out
    }

    /// CSV of `(generation, index..., coefficient)` preceded by a `# {json}` line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {}", serde_json::to_string(&self.meta)?)?;
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["generation".to_string()];
        header.extend((0..self.d).map(|a| format!("i{a}")));
        header.push("coefficient".into());
        wr.write_record(&header)?;
        for a in &self.atoms {
            let mut row = vec![a.cube.k.to_string()];
            row.extend((0..self.d).map(|j| a.cube.index[j].to_string()));
            row.push(format!("{:?}", a.coefficient));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut r: R) -> Result<Self> {
        let mut first = String::new();
        r.read_line(&mut first)?;
        let meta: ConstructionMeta = serde_json::from_str(
            first
                .trim()
                .strip_prefix('#')
                .ok_or_else(|| Error::InvalidParameters("missing meta header".into()))?
                .trim(),
        )?;
        let mut rd = csv::Reader::from_reader(r);
        let d = rd.headers()?.len() - 2;
        let bad = |e: &dyn std::fmt::Display| Error::InvalidParameters(format!("bad atom row: {e}"));
        let mut atoms = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let k: i32 = rec[0].parse().map_err(|e| bad(&e))?;
            let mut index = [0i64; 2];
            for (j, slot) in index.iter_mut().enumerate().take(d) {
                *slot = rec[1 + j].parse().map_err(|e| bad(&e))?;
            }
            let coefficient: f64 = rec[1 + d].parse().map_err(|e| bad(&e))?;
            atoms.push(Atom {
                cube: DyadicCube::new(k, index),
                coefficient,
            });
        }
        AtomicFunction::new(d, atoms, meta)
    }
}

/// The sequence `A^N` of length `2^{dN}`. With zero-based positions `j`,
/// position 0 holds 1 and positions `[2^{db}, 2^{d(b+1)})` hold
/// `2^{-db/p}` for `b = 0..N-1`.
pub fn sequence_an(big_n: u32, params: &Params) -> Result<Vec<f64>> {
    if big_n == 0 {
        return Err(Error::InvalidParameters("N must be >= 1".into()));
    }
    let d = params.d as u32;
    if d * big_n > 40 {
        return Err(Error::InvalidParameters(format!(
            "2^(dN) = 2^{} is too long",
            d * big_n
        )));
    }
    let len = 1usize << (d * big_n);
    Ok((0..len)
        .map(|j| {
            if j == 0 {
                1.0
            } else {
                let b = (usize::BITS - 1 - j.leading_zeros()) / d;
                pow2(-((d * b) as i32)).powf(1.0 / params.p)
            }
        })
        .collect())
}

/// Default inner scale for a given outer scale: `n = 2N + 4`.
pub fn default_small_n(big_n: u32) -> u32 {
    2 * big_n + 4
}

/// Lexicographic enumeration of the `2^{dN}` generation-`N` cubes in `[0,1]^d`.
fn unit_cubes(d: usize, big_n: u32) -> Vec<[i64; 2]> {
    let side = 1i64 << big_n;
    if d == 1 {
        (0..side).map(|i| [i, 0]).collect()
    } else {
        (0..side).flat_map(|i| (0..side).map(move |j| [i, j])).collect()
    }
}

/// `f_{N,n} = 2^{dn/p} sum_j a_j phi_{C_j}` where `C_j` is the generation-`n`
/// cube containing the center of the `j`-th generation-`N` cube of `[0,1]^d`.
pub fn build_f(big_n: u32, small_n: u32, params: &Params) -> Result<AtomicFunction> {
    if big_n < 1 || small_n <= big_n {
        return Err(Error::InvalidParameters(format!(
            "need n > N >= 1, got N={big_n} n={small_n}"
        )));
    }
    if small_n > 50 {
        return Err(Error::InvalidParameters(format!("n = {small_n} too large")));
    }
    let d = params.d;
    let seq = sequence_an(big_n, params)?;
    let amp = pow2((d as u32 * small_n) as i32).powf(1.0 / params.p);
    let stride = 1i64 << (small_n - big_n - 1);
    let atoms = unit_cubes(d, big_n)
        .into_iter()
        .zip(&seq)
        .map(|(q, &a)| {
            let mut index = [0; 2];
            for j in 0..d {
                index[j] = (2 * q[j] + 1) * stride;
            }
            Atom {
                cube: DyadicCube::new(small_n as i32, index),
                coefficient: amp * a,
            }
        })
        .collect();
    AtomicFunction::new(
        d,
        atoms,
        ConstructionMeta {
            kind: "f_Nn".into(),
            big_n: Some(big_n),
            small_n: Some(small_n),
            p: Some(params.p),
            ..Default::default()
        },
    )
}

/// A building block with concentration scale `M`: the `2^{n-N}` dilate
/// (L_p-normalized) of `f_{M,3M}` built from the constant sequence
/// `2^{-dM/p}`. Every atom has generation `M` and coefficient 1, and the
/// supports have total measure 1.
pub fn build_block(block_scale: u32, params: &Params) -> Result<AtomicFunction> {
    if !(1..=16).contains(&block_scale) {
        return Err(Error::InvalidParameters(format!(
            "block scale M = {block_scale} outside 1..=16"
        )));
    }
    let d = params.d;
    let m = block_scale;
    // C_j has index (2i+1) 2^{n-N-1} at generation n = 3M; dilating by
    // 2^{n-N} keeps the index and lowers the generation to N = M.
    let stride = 1i64 << (2 * m - 1);
    let atoms = unit_cubes(d, m)
        .into_iter()
        .map(|q| {
            let mut index = [0; 2];
            for j in 0..d {
                index[j] = (2 * q[j] + 1) * stride;
            }
            Atom {
                cube: DyadicCube::new(m as i32, index),
                coefficient: 1.0,
            }
        })
        .collect();
    AtomicFunction::new(
        d,
        atoms,
        ConstructionMeta {
            kind: "block".into(),
            big_n: Some(m),
            small_n: Some(3 * m),
            block_scale: Some(m),
            p: Some(params.p),
            ..Default::default()
        },
    )
}

/// Side length (per axis) of the region `[0, 2^{2M})^d` a block occupies.
pub fn block_span(block_scale: u32) -> i64 {
    1i64 << (2 * block_scale)
}

#[derive(Clone, Debug)]
pub struct PlacedBlock {
    pub block_scale: u32,
    /// Block at the origin; translate by `offset` along axis 0 to place it.
    pub block: AtomicFunction,
    pub offset: i64,
}

/// Scale-separated building blocks with a spatial gap certificate: at every
/// generation `k >= certified_k_min` an evaluation box meets at most one block.
#[derive(Clone, Debug)]
pub struct Multiblock {
    pub blocks: Vec<PlacedBlock>,
    pub gap: i64,
    pub certified_k_min: i32,
}

impl Multiblock {
    /// All blocks translated into place, as one function.
    pub fn assembled(&self) -> Result<AtomicFunction> {
        let d = self.blocks.first().map(|b| b.block.d).unwrap_or(1);
        let mut atoms = Vec::new();
        for b in &self.blocks {
            atoms.extend(b.block.translated(b.offset)?.atoms);
        }
        AtomicFunction::new(
            d,
            atoms,
            ConstructionMeta {
                kind: "multiblock".into(),
                ..Default::default()
            },
        )
    }
}

/// `T` blocks with concentration scales `M_k = k * delta_scale`, placed along
/// axis 0 with gaps of `2^{1 - k_min}`.
pub fn build_multiblock(t: u32, delta_scale: u32, params: &Params, k_min: i32) -> Result<Multiblock> {
    if t < 1 || delta_scale < 2 {
        return Err(Error::InvalidParameters(format!(
            "need T >= 1 and delta_scale >= 2, got T={t} delta={delta_scale}"
        )));
    }
    if !(-40..=0).contains(&k_min) {
        return Err(Error::InvalidParameters(format!("k_min = {k_min} must lie in -40..=0")));
    }
    let gap = 1i64 << (1 - k_min);
    let mut offset = 0i64;
    let mut blocks = Vec::with_capacity(t as usize);
    for k in 1..=t {
        let scale = k * delta_scale;
        let block = build_block(scale, params)?;
        blocks.push(PlacedBlock {
            block_scale: scale,
            block,
            offset,
        });
        offset = offset
            .checked_add(block_span(scale))
            .and_then(|o| o.checked_add(gap))
            .ok_or_else(|| Error::InvalidParameters("block placement overflows".into()))?;
    }
    Ok(Multiblock {
        blocks,
        gap,
        certified_k_min: k_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, q: f64, d: usize) -> Params {
        Params::new(p, q, d).unwrap()
    }

    #[test]
    fn bump_is_odd_and_supported_in_unit_cube() {
        let b = reference_bump(1).unwrap();
        assert_eq!(b.eval([0.0, 0.0]), 0.0);
        assert_eq!(b.eval([0.5, 0.0]), 0.0);
        assert_eq!(b.eval([-0.7, 0.0]), 0.0);
        for u in [0.05, 0.13, 0.31, 0.44] {
            assert_eq!(b.eval([u, 0.0]), -b.eval([-u, 0.0]));
        }
        let b2 = reference_bump(2).unwrap();
        assert_eq!(b2.eval([0.2, 0.5]), 0.0);
        assert!(b2.eval([0.2, 0.1]) > 0.0);
        assert!(reference_bump(3).is_err());
    }

    #[test]
    fn sequence_small_cases() {
        let p2 = params(2.0, 2.0, 1);
        assert_eq!(sequence_an(1, &p2).unwrap(), vec![1.0, 1.0]);
        let s = sequence_an(2, &p2).unwrap();
        let r = 0.5f64.sqrt();
        assert_eq!(s.len(), 4);
        assert_eq!(&s[..2], &[1.0, 1.0]);
        assert!((s[2] - r).abs() < 1e-15 && (s[3] - r).abs() < 1e-15);
    }

    #[test]
    fn sequence_norms() {
        for d in [1usize, 2] {
            for p in [1.5, 2.0, 3.0] {
                let pr = params(p, 1.0, d);
                for n in 1..=6u32 {
                    let s = sequence_an(n, &pr).unwrap();
                    assert_eq!(s.len(), 1 << (d as u32 * n));
                    let lp: f64 = s.iter().map(|a| a.powf(p)).sum();
                    let want = 1.0 + ((1 << d) - 1) as f64 * n as f64;
                    assert!((lp - want).abs() < 1e-9 * want, "d={d} p={p} N={n}: {lp}");
                    assert_eq!(s.iter().cloned().fold(0.0, f64::max), 1.0);
                }
            }
        }
    }

    #[test]
    fn f_atoms_follow_the_formula() {
        let pr = params(2.0, 2.0, 1);
        let f = build_f(2, 4, &pr).unwrap();
        assert_eq!(f.atoms.len(), 4);
        assert!((f.total_measure() - 4.0 / 16.0).abs() < 1e-15);
        let seq = sequence_an(2, &pr).unwrap();
        for (j, a) in f.atoms.iter().enumerate() {
            assert_eq!(a.cube.k, 4);
            assert!((a.coefficient - 4.0 * seq[j]).abs() < 1e-14);
            // C_j holds the center of Q_j = [j/4, (j+1)/4)
            let c = (j as f64 + 0.5) / 4.0;
            let lo = a.cube.index[0] as f64 / 16.0;
            assert!(lo <= c && c < lo + 1.0 / 16.0);
        }
        assert!(build_f(3, 3, &pr).is_err());
        assert!(build_f(0, 3, &pr).is_err());
    }

    #[test]
    fn f_atoms_2d_are_lexicographic_and_disjoint() {
        let pr = params(1.5, 3.0, 2);
        let f = build_f(2, 5, &pr).unwrap();
        assert_eq!(f.atoms.len(), 16);
        assert!(f.check_disjoint().is_ok());
        assert_eq!(f.atoms[1].cube.index, [4, 12]);
        assert_eq!(f.atoms[4].cube.index, [12, 4]);
    }

    #[test]
    fn block_atoms_have_unit_coefficient_and_total_measure_one() {
        for d in [1usize, 2] {
            let pr = params(1.5, 3.0, d);
            for m in 1..=5u32 {
                let b = build_block(m, &pr).unwrap();
                assert_eq!(b.atoms.len(), 1 << (d as u32 * m));
                assert!(b.atoms.iter().all(|a| a.coefficient == 1.0 && a.cube.k == m as i32));
                assert_eq!(b.total_measure(), 1.0);
                let span = block_span(m) as f64;
                for a in &b.atoms {
                    let lo = a.cube.index[0] as f64 * a.cube.side();
                    assert!(lo >= 0.0 && lo + a.cube.side() <= span);
                }
            }
        }
    }

    #[test]
    fn overlapping_atoms_rejected() {
        let atoms = vec![
            Atom {
                cube: DyadicCube::new(2, [1, 0]),
                coefficient: 1.0,
            },
            Atom {
                cube: DyadicCube::new(4, [5, 0]),
                coefficient: 1.0,
            },
        ];
        assert!(matches!(
            AtomicFunction::new(1, atoms, ConstructionMeta::default()),
            Err(Error::AtomsNotDisjoint(_))
        ));
    }

    #[test]
    fn multiblock_single_and_disjoint() {
        let pr = params(1.5, 3.0, 1);
        let one = build_multiblock(1, 3, &pr, -8).unwrap();
        assert_eq!(one.blocks.len(), 1);
        assert_eq!(one.blocks[0].offset, 0);
        let four = build_multiblock(4, 2, &pr, -6).unwrap();
        let all = four.assembled().unwrap();
        assert!(all.check_disjoint().is_ok());
        for w in four.blocks.windows(2) {
            let end = w[0].offset + block_span(w[0].block_scale);
            assert!(w[1].offset - end >= 1 << 7);
        }
        assert!(build_multiblock(2, 1, &pr, -4).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let pr = params(3.0, 1.5, 2);
        let f = build_f(1, 3, &pr).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# {\"kind\":\"f_Nn\""));
        let back = AtomicFunction::read_csv(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(back, f);
    }
}
