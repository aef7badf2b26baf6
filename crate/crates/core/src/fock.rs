//! Fermionic Fock space over `2|Λ|` modes.
//!
//! Mode `2 * site + s` with `s = 0` for spin up and `s = 1` for spin down, so
//! spin is interleaved within a site. A basis state is the bitmask of occupied
//! modes and stands for `a†_{m_1} a†_{m_2} ... a†_{m_k} |0>` with
//! `m_1 < m_2 < ... < m_k`. Consequently `a_m` and `a†_m` pick up the sign
//! `(-1)^{#occupied modes below m}`.
//!
//! Operators are stored as CSR matrices with complex entries.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Complex = Complex64;

pub const ZERO: Complex = Complex::new(0.0, 0.0);
pub const ONE: Complex = Complex::new(1.0, 0.0);
pub const I: Complex = Complex::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("operator is not block diagonal in (N_up, N_dn): off-sector entry of size {0:e}")]
    NotBlockDiagonal(f64),
    #[error("operator dimensions differ: {0} vs {1} modes")]
    DimensionMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];

    /// `+1` for up, `-1` for down.
    pub fn eta(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub site: usize,
    pub spin: Spin,
}

impl ModeIndex {
    pub fn new(site: usize, spin: Spin) -> Self {
        ModeIndex { site, spin }
    }

    pub fn id(self) -> usize {
        2 * self.site + usize::from(self.spin == Spin::Down)
    }

    pub fn from_id(id: usize) -> Self {
        ModeIndex {
            site: id / 2,
            spin: if id % 2 == 0 { Spin::Up } else { Spin::Down },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ladder {
    Create(usize),
    Annihilate(usize),
}

impl Ladder {
    pub fn dagger(self) -> Ladder {
        match self {
            Ladder::Create(m) => Ladder::Annihilate(m),
            Ladder::Annihilate(m) => Ladder::Create(m),
        }
    }
}

pub fn cr(m: ModeIndex) -> Ladder {
    Ladder::Create(m.id())
}

pub fn an(m: ModeIndex) -> Ladder {
    Ladder::Annihilate(m.id())
}

#[inline]
fn below_sign(state: u64, mode: usize) -> f64 {
    let below = state & ((1u64 << mode) - 1);
    if below.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Applies one ladder operator to a basis state.
#[inline]
pub fn apply_ladder(op: Ladder, state: u64) -> Option<(u64, f64)> {
    match op {
        Ladder::Create(m) => {
            let bit = 1u64 << m;
            (state & bit == 0).then(|| (state | bit, below_sign(state, m)))
        }
        Ladder::Annihilate(m) => {
            let bit = 1u64 << m;
            (state & bit != 0).then(|| (state & !bit, below_sign(state, m)))
        }
    }
}

/// Applies the operator product `ops[0] ops[1] ... ops[n-1]` (rightmost
/// acts first).
#[inline]
pub fn apply_string(ops: &[Ladder], state: u64) -> Option<(u64, f64)> {
    let mut s = state;
    let mut sign = 1.0;
    for op in ops.iter().rev() {
        let (next, sg) = apply_ladder(*op, s)?;
        s = next;
        sign *= sg;
    }
    Some((s, sign))
}

/// Bits of the spin-up modes among the first `n_modes`.
pub fn up_mask(n_modes: usize) -> u64 {
    let all = if n_modes >= 64 {
        u64::MAX
    } else {
        (1u64 << n_modes) - 1
    };
    all & 0x5555_5555_5555_5555
}

pub fn dn_mask(n_modes: usize) -> u64 {
    let all = if n_modes >= 64 {
        u64::MAX
    } else {
        (1u64 << n_modes) - 1
    };
    all & 0xAAAA_AAAA_AAAA_AAAA
}

/// Particle numbers `(N_up, N_dn)` of a basis state.
#[inline]
pub fn occupations(state: u64) -> (usize, usize) {
    (
        (state & 0x5555_5555_5555_5555).count_ones() as usize,
        (state & 0xAAAA_AAAA_AAAA_AAAA).count_ones() as usize,
    )
}

/// A coefficient times a product of ladder operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coeff: Complex,
    pub ops: Vec<Ladder>,
}

impl Term {
    pub fn new(coeff: Complex, ops: Vec<Ladder>) -> Self {
        Term { coeff, ops }
    }

    pub fn adjoint(&self) -> Term {
        Term {
            coeff: self.coeff.conj(),
            ops: self.ops.iter().rev().map(|o| o.dagger()).collect(),
        }
    }
}

/// Symbolic sum of [`Term`]s; materialized with [`OpSum::to_operator`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OpSum {
    pub terms: Vec<Term>,
}

impl OpSum {
    pub fn new() -> Self {
        OpSum::default()
    }

    pub fn push(&mut self, coeff: Complex, ops: Vec<Ladder>) {
        if coeff != ZERO {
            self.terms.push(Term::new(coeff, ops));
        }
    }

    pub fn extend(&mut self, other: OpSum) {
        self.terms.extend(other.terms);
    }

    pub fn scaled(mut self, c: Complex) -> OpSum {
        for t in &mut self.terms {
            t.coeff *= c;
        }
        self.terms.retain(|t| t.coeff != ZERO);
        self
    }

    pub fn to_operator(&self, n_modes: usize) -> FockOperator {
        FockOperator::from_terms(n_modes, &self.terms)
    }
}

/// Sparse operator on the full `2^n_modes` dimensional Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    n_modes: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<Complex>,
}

impl FockOperator {
    fn from_rows(n_modes: usize, rows: impl Iterator<Item = Vec<(u32, Complex)>>) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut last: Option<u32> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        let mut op = FockOperator {
            n_modes,
            row_ptr,
            cols,
            vals,
        };
        op.prune();
        op
    }

    /// Drops exact zeros left over from cancellation.
    fn prune(&mut self) {
        if self.vals.iter().all(|v| *v != ZERO) {
            return;
        }
        let mut row_ptr = Vec::with_capacity(self.row_ptr.len());
        row_ptr.push(0);
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.dim() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[k] != ZERO {
                    cols.push(self.cols[k]);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr.push(cols.len());
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    /// Row `r` holds `<r|T|s>` for every term; it is generated by applying
    /// the adjoint strings to `|r>`.
    pub fn from_terms(n_modes: usize, terms: &[Term]) -> Self {
        let adj: Vec<(Complex, Vec<Ladder>)> = terms
            .iter()
            .map(|t| (t.coeff, t.ops.iter().rev().map(|o| o.dagger()).collect()))
            .collect();
        let dim = 1usize << n_modes;
        FockOperator::from_rows(
            n_modes,
            (0..dim).map(|r| {
                adj.iter()
                    .filter_map(|(c, ops)| {
                        apply_string(ops, r as u64).map(|(s, sign)| (s as u32, c * sign))
                    })
                    .collect()
            }),
        )
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_entries(n_modes: usize, entries: Vec<(u64, u64, Complex)>) -> Self {
        let mut rows: Vec<Vec<(u32, Complex)>> = vec![Vec::new(); 1usize << n_modes];
        for (r, c, v) in entries {
            rows[r as usize].push((c as u32, v));
        }
        FockOperator::from_rows(n_modes, rows.into_iter())
    }

    pub fn zero(n_modes: usize) -> Self {
        FockOperator {
            n_modes,
            row_ptr: vec![0; (1usize << n_modes) + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(n_modes: usize) -> Self {
        Self::diagonal(n_modes, |_| ONE)
    }

    pub fn diagonal(n_modes: usize, f: impl Fn(u64) -> Complex) -> Self {
        let dim = 1usize << n_modes;
        FockOperator::from_rows(n_modes, (0..dim).map(|r| vec![(r as u32, f(r as u64))]))
    }

    /// Operator with exactly one entry per column: `|s> -> f(s).1 |f(s).0>`.
    pub fn monomial(n_modes: usize, f: impl Fn(u64) -> (u64, Complex)) -> Self {
        let dim = 1usize << n_modes;
        let mut rows: Vec<Vec<(u32, Complex)>> = vec![Vec::new(); dim];
        for s in 0..dim {
            let (t, v) = f(s as u64);
            rows[t as usize].push((s as u32, v));
        }
        FockOperator::from_rows(n_modes, rows.into_iter())
    }

    pub fn create(n_modes: usize, mode: ModeIndex) -> Self {
        Self::from_terms(n_modes, &[Term::new(ONE, vec![cr(mode)])])
    }

    pub fn annihilate(n_modes: usize, mode: ModeIndex) -> Self {
        Self::from_terms(n_modes, &[Term::new(ONE, vec![an(mode)])])
    }

    pub fn number(n_modes: usize, mode: ModeIndex) -> Self {
        let bit = 1u64 << mode.id();
        Self::diagonal(n_modes, |s| if s & bit != 0 { ONE } else { ZERO })
    }

    pub fn total_up(n_modes: usize) -> Self {
        Self::diagonal(n_modes, |s| Complex::from(occupations(s).0 as f64))
    }

    pub fn total_dn(n_modes: usize) -> Self {
        Self::diagonal(n_modes, |s| Complex::from(occupations(s).1 as f64))
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_modes
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k] as usize, self.vals[k]))
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex)> + '_ {
        (0..self.dim()).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.cols[lo..hi].binary_search(&(c as u32)) {
            Ok(k) => self.vals[lo + k],
            Err(_) => ZERO,
        }
    }

    fn check_dims(&self, other: &FockOperator) -> Result<(), FockError> {
        if self.n_modes != other.n_modes {
            return Err(FockError::DimensionMismatch(self.n_modes, other.n_modes));
        }
        Ok(())
    }

    fn combine(&self, other: &FockOperator, b: Complex) -> Result<FockOperator, FockError> {
        self.check_dims(other)?;
        Ok(FockOperator::from_rows(
            self.n_modes,
            (0..self.dim()).map(|r| {
                self.row(r)
                    .map(|(c, v)| (c as u32, v))
                    .chain(other.row(r).map(|(c, v)| (c as u32, v * b)))
                    .collect()
            }),
        ))
    }

    pub fn add(&self, other: &FockOperator) -> Result<FockOperator, FockError> {
        self.combine(other, ONE)
    }

    pub fn sub(&self, other: &FockOperator) -> Result<FockOperator, FockError> {
        self.combine(other, -ONE)
    }

    pub fn scale(&self, c: Complex) -> FockOperator {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= c;
        }
        out.prune();
        out
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &FockOperator) -> Result<FockOperator, FockError> {
        self.check_dims(other)?;
        Ok(FockOperator::from_rows(
            self.n_modes,
            (0..self.dim()).map(|r| {
                let mut acc = Vec::new();
                for (k, a) in self.row(r) {
                    for (c, b) in other.row(k) {
                        acc.push((c as u32, a * b));
                    }
                }
                acc
            }),
        ))
    }

    pub fn adjoint(&self) -> FockOperator {
        let mut rows: Vec<Vec<(u32, Complex)>> = vec![Vec::new(); self.dim()];
        for (r, c, v) in self.entries() {
            rows[c].push((r as u32, v.conj()));
        }
        FockOperator::from_rows(self.n_modes, rows.into_iter())
    }

    /// `U† self U`.
    pub fn conjugate_by(&self, u: &FockOperator) -> Result<FockOperator, FockError> {
        u.adjoint().mul(self)?.mul(u)
    }

    pub fn anticommutator(&self, other: &FockOperator) -> Result<FockOperator, FockError> {
        self.mul(other)?.add(&other.mul(self)?)
    }

    pub fn commutator(&self, other: &FockOperator) -> Result<FockOperator, FockError> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Entrywise max-norm of `self - other`.
    pub fn max_abs_diff(&self, other: &FockOperator) -> Result<f64, FockError> {
        Ok(self.sub(other)?.max_abs())
    }

    pub fn trace(&self) -> Complex {
        (0..self.dim()).map(|r| self.get(r, r)).sum()
    }

    /// `max |H - H†|` relative to `max(1, max |H|)`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (r, c, v) in self.entries() {
            worst = worst.max((v - self.get(c, r).conj()).norm());
        }
        worst / self.max_abs().max(1.0)
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermiticity_error() <= rel_tol
    }

    /// Largest entry of `[N_up, self]` or `[N_dn, self]`; zero iff the
    /// operator is block diagonal in `(N_up, N_dn)`.
    pub fn number_commutator_max(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (r, c, v) in self.entries() {
            let (ur, dr) = occupations(r as u64);
            let (uc, dc) = occupations(c as u64);
            let du = (ur as f64 - uc as f64).abs();
            let dd = (dr as f64 - dc as f64).abs();
            worst = worst.max(du.max(dd) * v.norm());
        }
        worst
    }

    /// True when every stored entry is exactly `0`, `±1`, `±i`.
    pub fn is_integer_valued(&self) -> bool {
        self.vals
            .iter()
            .all(|v| v.re.fract() == 0.0 && v.im.fract() == 0.0)
    }

    pub fn apply(&self, v: &[Complex]) -> Vec<Complex> {
        (0..self.dim())
            .map(|r| self.row(r).map(|(c, a)| a * v[c]).sum())
            .collect()
    }

    /// `<v|self|v>` for a vector supported on the listed basis states.
    pub fn expectation_sparse(&self, states: &[u64], amps: &[Complex], scratch: &mut [Complex]) -> Complex {
        for (s, a) in states.iter().zip(amps) {
            scratch[*s as usize] = *a;
        }
        let mut acc = ZERO;
        for (s, a) in states.iter().zip(amps) {
            let row: Complex = self.row(*s as usize).map(|(c, h)| h * scratch[c]).sum();
            acc += a.conj() * row;
        }
        for s in states {
            scratch[*s as usize] = ZERO;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mode(id: usize) -> ModeIndex {
        ModeIndex::from_id(id)
    }

    #[test]
    fn mode_ids_interleave_spin() {
        assert_eq!(ModeIndex::new(0, Spin::Up).id(), 0);
        assert_eq!(ModeIndex::new(0, Spin::Down).id(), 1);
        assert_eq!(ModeIndex::new(3, Spin::Down).id(), 7);
        for id in 0..16 {
            assert_eq!(mode(id).id(), id);
        }
    }

    #[test]
    fn car_two_modes() {
        let n = 2;
        let id = FockOperator::identity(n);
        for m in 0..n {
            for k in 0..n {
                let a = FockOperator::annihilate(n, mode(m));
                let ad = FockOperator::create(n, mode(k));
                let ac = a.anticommutator(&ad).unwrap();
                let expect = if m == k { id.clone() } else { FockOperator::zero(n) };
                assert_eq!(ac.max_abs_diff(&expect).unwrap(), 0.0);
                let b = FockOperator::annihilate(n, mode(k));
                assert_eq!(a.anticommutator(&b).unwrap().max_abs(), 0.0);
            }
        }
    }

    #[test]
    fn pauli_exclusion() {
        let ad = FockOperator::create(4, mode(2));
        assert_eq!(ad.mul(&ad).unwrap().nnz(), 0);
    }

    #[test]
    fn number_operator() {
        let n = 4;
        for m in 0..n {
            let num = FockOperator::number(n, mode(m));
            assert_eq!(num.mul(&num).unwrap().max_abs_diff(&num).unwrap(), 0.0);
            assert_eq!(num.trace(), Complex::from(8.0));
            let composed = FockOperator::create(n, mode(m))
                .mul(&FockOperator::annihilate(n, mode(m)))
                .unwrap();
            assert_eq!(composed.max_abs_diff(&num).unwrap(), 0.0);
        }
    }

    #[test]
    fn sign_convention() {
        // a†_1 on |mode 0 occupied> picks up one minus sign
        let ad = FockOperator::create(2, mode(1));
        assert_eq!(ad.get(0b11, 0b01), -ONE);
        assert_eq!(ad.get(0b10, 0b00), ONE);
    }

    #[test]
    fn term_adjoint_matches_matrix_adjoint() {
        let t = Term::new(
            Complex::new(0.3, -1.1),
            vec![Ladder::Create(0), Ladder::Create(1), Ladder::Annihilate(3), Ladder::Annihilate(2)],
        );
        let op = FockOperator::from_terms(4, std::slice::from_ref(&t));
        let adj = FockOperator::from_terms(4, &[t.adjoint()]);
        assert!(op.adjoint().max_abs_diff(&adj).unwrap() < 1e-15);
        assert!(op.number_commutator_max() == 0.0);
    }

    #[test]
    fn off_sector_detection() {
        let op = FockOperator::create(4, mode(0));
        assert_eq!(op.number_commutator_max(), 1.0);
    }
}
