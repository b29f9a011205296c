use super::{Field, GridFunction};
use crate::constructions::{AtomicFunction, Bump};
use crate::error::{Error, Result};

/// Minimum gap, in generations, between the finest atom and the grid.
pub const DEFAULT_GUARD: i32 = 4;

/// Default cap on the number of stored cells (512 MiB of samples).
pub const DEFAULT_BUDGET_CELLS: u64 = 1 << 26;

fn check_resolution(atoms: &AtomicFunction, m: i32, guard: i32) -> Result<()> {
    if let Some(fine) = atoms.finest_generation() {
        if m < fine + guard {
            return Err(Error::ResolutionTooCoarse {
                required: fine + guard,
                m,
            });
        }
    }
    Ok(())
}

/// Samples one atom on its own cube at resolution `m`.
fn render_atom(bump: &Bump, d: usize, m: i32, atom: &crate::constructions::Atom) -> Result<GridFunction> {
    let w = 1usize << (m - atom.cube.k);
    let cells = atom.cube.cells(d, m);
    let inv = 1.0 / w as f64;
    let c = atom.coefficient;
    let local = |i: i64, lo: i64| (((i - lo) as f64) + 0.5) * inv - 0.5;
    let mut samples = Vec::with_capacity(w.pow(d as u32));
    for idx in cells.cells() {
        let mut u = [0.0; 2];
        for a in 0..d {
            u[a] = local(idx[a], cells.lo[a]);
        }
        samples.push(c * bump.eval(u));
    }
    GridFunction::new(d, m, &cells.lo[..d], &vec![w; d], samples)
}

/// Renders an atomic sum as a sparse field with one patch per atom. Every
/// cell value is the analytic value of the atom sum at the cell center.
pub fn render_field(atoms: &AtomicFunction, m: i32, guard: i32, budget: u64) -> Result<Field> {
    check_resolution(atoms, m, guard)?;
    let d = atoms.d;
    let cells: u128 = atoms
        .atoms
        .iter()
        .map(|a| 1u128 << (d as i32 * (m - a.cube.k)).min(120))
        .sum();
    if cells > budget as u128 {
        return Err(Error::BudgetExceeded { cells, budget });
    }
    let bump = Bump::new_unchecked(d);
    let patches = atoms
        .atoms
        .iter()
        .map(|a| render_atom(&bump, d, m, a))
        .collect::<Result<Vec<_>>>()?;
    if patches.is_empty() {
        return Ok(GridFunction::zeros(d, m, &vec![0; d], &vec![1; d])?.into());
    }
    Field::from_patches(d, m, patches)
}

/// Renders an atomic sum on one dense grid covering all atoms (extent
/// rounded up to powers of two). Cells outside every atom are zero.
pub fn render(atoms: &AtomicFunction, m: i32, guard: i32, budget: u64) -> Result<GridFunction> {
    check_resolution(atoms, m, guard)?;
    let d = atoms.d;
    if atoms.atoms.is_empty() {
        return GridFunction::zeros(d, m, &vec![0; d], &vec![1; d]);
    }
    let mut lo = [i64::MAX; 2];
    let mut hi = [i64::MIN; 2];
    for a in &atoms.atoms {
        let b = a.cube.cells(d, m);
        for j in 0..d {
            lo[j] = lo[j].min(b.lo[j]);
            hi[j] = hi[j].max(b.hi[j]);
        }
    }
    let extent: Vec<usize> = (0..d)
        .map(|j| ((hi[j] - lo[j] + 1) as u64).next_power_of_two() as usize)
        .collect();
    let cells: u128 = extent.iter().map(|&e| e as u128).product();
    if cells > budget as u128 {
        return Err(Error::BudgetExceeded { cells, budget });
    }
    let mut g = GridFunction::zeros(d, m, &lo[..d], &extent)?;
    let bump = Bump::new_unchecked(d);
    for a in &atoms.atoms {
        let patch = render_atom(&bump, d, m, a)?;
        let b = patch.bounds();
        for (idx, &v) in b.cells().zip(patch.samples()) {
            let off = g.local_offset(idx);
            g.samples_mut()[off] = v;
        }
    }
    Ok(g)
}
