//! `(N_up, N_dn)` sector blocks and the two exact discrete symmetries used to
//! avoid redundant eigensolves.
//!
//! Spin flip `S` exchanges `a_{x,up}` and `a_{x,dn}`. Particle-hole `C` maps
//! `a_m -> eps_m a†_m` with `eps_m` the parity sign of the site of mode `m`;
//! combined with complex conjugation it is antiunitary. Whether an operator
//! actually has either symmetry is always checked entrywise before it is
//! relied upon.

use crate::fock::{apply_string, occupations, Complex, FockError, FockOperator, Ladder, ZERO};
use faer::Mat;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

/// Commutator threshold for the block-diagonal precondition.
pub const NUMBER_COMMUTATOR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sector {
    pub n_up: usize,
    pub n_dn: usize,
}

impl Sector {
    pub fn new(n_up: usize, n_dn: usize) -> Self {
        Sector { n_up, n_dn }
    }

    pub fn of_state(state: u64) -> Self {
        let (n_up, n_dn) = occupations(state);
        Sector { n_up, n_dn }
    }

    pub fn label(&self) -> String {
        format!("{}_{}", self.n_up, self.n_dn)
    }

    pub fn spin_flipped(self) -> Sector {
        Sector::new(self.n_dn, self.n_up)
    }

    pub fn particle_hole(self, n_sites: usize) -> Sector {
        Sector::new(n_sites - self.n_up, n_sites - self.n_dn)
    }
}

/// All sectors, ordered by `(N_up, N_dn)`.
pub fn all_sectors(n_sites: usize) -> Vec<Sector> {
    (0..=n_sites)
        .flat_map(|u| (0..=n_sites).map(move |d| Sector::new(u, d)))
        .collect()
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k.min(n - k)).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

pub fn sector_dim(n_sites: usize, s: Sector) -> usize {
    binomial(n_sites, s.n_up) * binomial(n_sites, s.n_dn)
}

/// Basis states of a sector in ascending order.
pub fn sector_states(n_modes: usize, s: Sector) -> Vec<u64> {
    (0..1u64 << n_modes)
        .filter(|&m| occupations(m) == (s.n_up, s.n_dn))
        .collect()
}

fn local_index(states: &[u64], state: u64) -> Option<usize> {
    states.binary_search(&state).ok()
}

#[derive(Debug, Clone)]
pub struct SectorBlock {
    pub sector: Sector,
    pub states: Vec<u64>,
    pub matrix: Mat<Complex>,
}

/// Dense restriction of `op` to one sector. Entries leaving the sector are
/// ignored; call [`sector_split`] when that must be checked.
pub fn block(op: &FockOperator, sector: Sector) -> SectorBlock {
    let states = sector_states(op.n_modes(), sector);
    let n = states.len();
    let mut matrix = Mat::<Complex>::zeros(n, n);
    for (i, &r) in states.iter().enumerate() {
        for (c, v) in op.row(r as usize) {
            if let Some(j) = local_index(&states, c as u64) {
                matrix[(i, j)] = v;
            }
        }
    }
    SectorBlock {
        sector,
        states,
        matrix,
    }
}

pub fn check_block_diagonal(op: &FockOperator) -> Result<(), FockError> {
    let worst = op.number_commutator_max();
    if worst > NUMBER_COMMUTATOR_TOL {
        return Err(FockError::NotBlockDiagonal(worst));
    }
    Ok(())
}

pub fn sector_split(op: &FockOperator) -> Result<Vec<SectorBlock>, FockError> {
    check_block_diagonal(op)?;
    let n_sites = op.n_modes() / 2;
    Ok(all_sectors(n_sites)
        .into_iter()
        .map(|s| block(op, s))
        .collect())
}

pub fn reassemble(n_modes: usize, blocks: &[SectorBlock]) -> FockOperator {
    let mut terms = Vec::new();
    for b in blocks {
        for (i, &r) in b.states.iter().enumerate() {
            for (j, &c) in b.states.iter().enumerate() {
                let v = b.matrix[(i, j)];
                if v != ZERO {
                    terms.push((r, c, v));
                }
            }
        }
    }
    FockOperator::from_entries(n_modes, terms)
}

/// `S|n> = s(n) |f(n)>`.
pub fn spin_flip_state(state: u64) -> (u64, f64) {
    let ops: Vec<Ladder> = (0..64)
        .filter(|m| state >> m & 1 == 1)
        .map(|m| Ladder::Create(m ^ 1))
        .collect();
    apply_string(&ops, 0).expect("flipped modes are distinct")
}

/// `C|n> = c(n) |complement of n>`, with `C|0> = |full>`.
pub fn particle_hole_state(state: u64, n_modes: usize, mode_signs: &[f64]) -> (u64, f64) {
    let full = (1u64 << n_modes) - 1;
    let mut eps = 1.0;
    let mut ops = Vec::new();
    for (m, &sign) in mode_signs.iter().enumerate().take(n_modes) {
        if state >> m & 1 == 1 {
            eps *= sign;
            ops.push(Ladder::Annihilate(m));
        }
    }
    let (t, sign) = apply_string(&ops, full).expect("full state holds every mode");
    (t, eps * sign)
}

fn symmetry_tol(op: &FockOperator) -> f64 {
    1e-12 * op.max_abs().max(1.0)
}

/// `H[f(r), f(c)] = s(r) s(c) H[r, c]` for every stored entry.
pub fn has_spin_flip_symmetry(op: &FockOperator) -> bool {
    let tol = symmetry_tol(op);
    op.entries().all(|(r, c, v)| {
        let (fr, sr) = spin_flip_state(r as u64);
        let (fc, sc) = spin_flip_state(c as u64);
        (op.get(fr as usize, fc as usize) - v * (sr * sc)).norm() <= tol
    })
}

/// `H[r', c'] = c(r) c(c) conj(H[r, c])` for every stored entry.
pub fn has_particle_hole_symmetry(op: &FockOperator, mode_signs: &[f64]) -> bool {
    let tol = symmetry_tol(op);
    let n = op.n_modes();
    op.entries().all(|(r, c, v)| {
        let (pr, sr) = particle_hole_state(r as u64, n, mode_signs);
        let (pc, sc) = particle_hole_state(c as u64, n, mode_signs);
        (op.get(pr as usize, pc as usize) - v.conj() * (sr * sc)).norm() <= tol
    })
}

/// Blocks of a `(a, a)` sector restricted to the `S = +1` and `S = -1`
/// eigenspaces. Requires spin-flip symmetry.
pub fn spin_flip_halves(op: &FockOperator, sector: Sector) -> (Mat<Complex>, Mat<Complex>) {
    assert_eq!(sector.n_up, sector.n_dn, "spin flip maps the sector onto itself only when N_up = N_dn");
    let states = sector_states(op.n_modes(), sector);
    // per state: (index, coefficient) in the plus and minus bases
    let mut plus: Vec<Option<(usize, f64)>> = vec![None; states.len()];
    let mut minus: Vec<Option<(usize, f64)>> = vec![None; states.len()];
    let mut plus_support: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut minus_support: Vec<Vec<(usize, f64)>> = Vec::new();
    for (i, &n) in states.iter().enumerate() {
        let (f, s) = spin_flip_state(n);
        if f == n {
            let (table, support) = if s > 0.0 {
                (&mut plus, &mut plus_support)
            } else {
                (&mut minus, &mut minus_support)
            };
            table[i] = Some((support.len(), 1.0));
            support.push(vec![(i, 1.0)]);
        } else if n < f {
            let j = local_index(&states, f).expect("spin flip stays in a diagonal sector");
            plus[i] = Some((plus_support.len(), FRAC_1_SQRT_2));
            plus[j] = Some((plus_support.len(), s * FRAC_1_SQRT_2));
            plus_support.push(vec![(i, FRAC_1_SQRT_2), (j, s * FRAC_1_SQRT_2)]);
            minus[i] = Some((minus_support.len(), FRAC_1_SQRT_2));
            minus[j] = Some((minus_support.len(), -s * FRAC_1_SQRT_2));
            minus_support.push(vec![(i, FRAC_1_SQRT_2), (j, -s * FRAC_1_SQRT_2)]);
        }
    }
    let project = |table: &[Option<(usize, f64)>], support: &[Vec<(usize, f64)>]| {
        let n = support.len();
        let mut m = Mat::<Complex>::zeros(n, n);
        for (a, vec) in support.iter().enumerate() {
            for &(r, wr) in vec {
                for (c, h) in op.row(states[r] as usize) {
                    let Some(k) = local_index(&states, c as u64) else {
                        continue;
                    };
                    if let Some((b, wc)) = table[k] {
                        m[(a, b)] += h * (wr * wc);
                    }
                }
            }
        }
        m
    };
    (project(&plus, &plus_support), project(&minus, &minus_support))
}
