//! Finite periodic hypercubic lattice `{-L+1, ..., L}^d`.
//!
//! Sites are indexed lexicographically after shifting every coordinate by
//! `L - 1` into `{0, ..., 2L-1}`; the first coordinate is the most significant
//! digit. Axes are 1-based throughout (`1..=d`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest number of fermionic modes (2 per site) accepted by default.
pub const DEFAULT_MODE_CAP: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("dimension too small: d = {0}, need d >= 2")]
    DimensionTooSmall(usize),
    #[error("half-side must be positive")]
    HalfSideZero,
    #[error("size exceeds cap: {modes} fermionic modes > cap {cap}")]
    SizeExceedsCap { modes: usize, cap: usize },
    #[error("coordinate {0:?} is not a site of the lattice")]
    NotASite(Vec<i32>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// `+1` for even, `-1` for odd.
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Directed bond `(x, x + e_axis)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bond {
    pub site: usize,
    pub axis: usize,
}

/// Oriented unit square `x -> x+e_i -> x+e_i+e_j -> x+e_j -> x`, `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Plaquette {
    pub site: usize,
    pub i: usize,
    pub j: usize,
}

/// One traversed edge of a loop or path: the bond and whether it is walked
/// along (`true`) or against its orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrientedBond {
    pub bond: Bond,
    pub forward: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    d: usize,
    half_side: usize,
    coords: Vec<Vec<i32>>,
    /// `neighbors[site * d + axis - 1]` = site + e_axis.
    forward: Vec<usize>,
    backward: Vec<usize>,
}

impl Lattice {
    pub fn new(d: usize, half_side: usize) -> Result<Self, LatticeError> {
        Self::with_mode_cap(d, half_side, DEFAULT_MODE_CAP)
    }

    pub fn with_mode_cap(d: usize, half_side: usize, cap: usize) -> Result<Self, LatticeError> {
        if d < 2 {
            return Err(LatticeError::DimensionTooSmall(d));
        }
        if half_side == 0 {
            return Err(LatticeError::HalfSideZero);
        }
        let side = 2 * half_side;
        let modes = side
            .checked_pow(d as u32)
            .and_then(|n| n.checked_mul(2))
            .unwrap_or(usize::MAX);
        if modes > cap {
            return Err(LatticeError::SizeExceedsCap { modes, cap });
        }
        let n = modes / 2;
        let l = half_side as i32;
        let coords: Vec<Vec<i32>> = (0..n)
            .map(|mut idx| {
                let mut c = vec![0i32; d];
                for k in (0..d).rev() {
                    c[k] = (idx % side) as i32 - l + 1;
                    idx /= side;
                }
                c
            })
            .collect();
        let mut lat = Lattice {
            d,
            half_side,
            coords,
            forward: vec![0; n * d],
            backward: vec![0; n * d],
        };
        for s in 0..n {
            for axis in 1..=d {
                let mut c = lat.coords[s].clone();
                c[axis - 1] = lat.wrap(c[axis - 1] + 1);
                lat.forward[s * d + axis - 1] = lat.index_of_unchecked(&c);
                let mut c = lat.coords[s].clone();
                c[axis - 1] = lat.wrap(c[axis - 1] - 1);
                lat.backward[s * d + axis - 1] = lat.index_of_unchecked(&c);
            }
        }
        Ok(lat)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `L`.
    pub fn half_side(&self) -> usize {
        self.half_side
    }

    pub fn side(&self) -> usize {
        2 * self.half_side
    }

    pub fn n_sites(&self) -> usize {
        self.coords.len()
    }

    pub fn n_modes(&self) -> usize {
        2 * self.n_sites()
    }

    pub fn n_bonds(&self) -> usize {
        self.n_sites() * self.d
    }

    pub fn n_plaquettes(&self) -> usize {
        self.n_sites() * self.d * (self.d - 1) / 2
    }

    /// The paper-level theory assumes `d >= 3`; smaller lattices are kept as
    /// cheap probes and flagged in reports.
    pub fn below_paper_dimension(&self) -> bool {
        self.d < 3
    }

    fn wrap(&self, c: i32) -> i32 {
        let l = self.half_side as i32;
        let side = 2 * l;
        (c + l - 1).rem_euclid(side) - l + 1
    }

    fn index_of_unchecked(&self, c: &[i32]) -> usize {
        let side = self.side();
        let l = self.half_side as i32;
        c.iter()
            .fold(0usize, |acc, &x| acc * side + (x + l - 1) as usize)
    }

    pub fn site_index(&self, coord: &[i32]) -> Result<usize, LatticeError> {
        let l = self.half_side as i32;
        if coord.len() != self.d || coord.iter().any(|&x| x < -l + 1 || x > l) {
            return Err(LatticeError::NotASite(coord.to_vec()));
        }
        Ok(self.index_of_unchecked(coord))
    }

    pub fn coord(&self, site: usize) -> &[i32] {
        &self.coords[site]
    }

    pub fn sites(&self) -> std::ops::Range<usize> {
        0..self.n_sites()
    }

    /// Odd iff the coordinate sum is odd.
    pub fn parity(&self, site: usize) -> Parity {
        let s: i32 = self.coords[site].iter().sum();
        if s.rem_euclid(2) == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    /// `x + e_axis` with periodic wrap.
    pub fn neighbor(&self, site: usize, axis: usize) -> usize {
        self.forward[site * self.d + axis - 1]
    }

    /// `x - e_axis` with periodic wrap.
    pub fn neighbor_back(&self, site: usize, axis: usize) -> usize {
        self.backward[site * self.d + axis - 1]
    }

    pub fn bond_id(&self, bond: Bond) -> usize {
        bond.site * self.d + bond.axis - 1
    }

    pub fn bond_from_id(&self, id: usize) -> Bond {
        Bond {
            site: id / self.d,
            axis: id % self.d + 1,
        }
    }

    pub fn bonds(&self) -> impl Iterator<Item = Bond> + '_ {
        (0..self.n_bonds()).map(move |id| self.bond_from_id(id))
    }

    /// Endpoint of a directed bond.
    pub fn head(&self, bond: Bond) -> usize {
        self.neighbor(bond.site, bond.axis)
    }

    pub fn plaquettes(&self) -> impl Iterator<Item = Plaquette> + '_ {
        let d = self.d;
        self.sites().flat_map(move |site| {
            (1..=d).flat_map(move |i| (i + 1..=d).map(move |j| Plaquette { site, i, j }))
        })
    }

    /// The four edges of a plaquette in traversal order.
    pub fn plaquette_edges(&self, p: Plaquette) -> [OrientedBond; 4] {
        let xi = self.neighbor(p.site, p.i);
        let xj = self.neighbor(p.site, p.j);
        [
            OrientedBond {
                bond: Bond { site: p.site, axis: p.i },
                forward: true,
            },
            OrientedBond {
                bond: Bond { site: xi, axis: p.j },
                forward: true,
            },
            OrientedBond {
                bond: Bond { site: xj, axis: p.i },
                forward: false,
            },
            OrientedBond {
                bond: Bond { site: p.site, axis: p.j },
                forward: false,
            },
        ]
    }

    /// Start and end site of an oriented edge.
    pub fn endpoints(&self, e: OrientedBond) -> (usize, usize) {
        let head = self.head(e.bond);
        if e.forward {
            (e.bond.site, head)
        } else {
            (head, e.bond.site)
        }
    }

    /// Mirror image across the plane between `x^(1) = 0` and `x^(1) = 1`.
    pub fn reflect(&self, site: usize) -> usize {
        let mut c = self.coords[site].clone();
        c[0] = 1 - c[0];
        self.index_of_unchecked(&c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_d3_l1() {
        let lat = Lattice::new(3, 1).unwrap();
        assert_eq!(lat.n_sites(), 8);
        assert_eq!(lat.bonds().count(), 24);
        assert_eq!(lat.plaquettes().count(), 24);
    }

    #[test]
    fn counts_d2_l1() {
        let lat = Lattice::new(2, 1).unwrap();
        assert_eq!(lat.n_sites(), 4);
        assert_eq!(lat.bonds().count(), 8);
        assert_eq!(lat.plaquettes().count(), 4);
    }

    #[test]
    fn rejects_d1() {
        assert_eq!(Lattice::new(1, 2), Err(LatticeError::DimensionTooSmall(1)));
    }

    #[test]
    fn rejects_oversized() {
        assert!(matches!(
            Lattice::new(3, 2),
            Err(LatticeError::SizeExceedsCap { modes: 128, cap: 20 })
        ));
        assert!(Lattice::with_mode_cap(2, 2, 32).is_ok());
    }

    #[test]
    fn parity_examples() {
        let lat = Lattice::new(3, 1).unwrap();
        let p = |c: [i32; 3]| lat.parity(lat.site_index(&c).unwrap());
        assert_eq!(p([0, 0, 0]), Parity::Even);
        assert_eq!(p([1, 0, 0]), Parity::Odd);
        assert_eq!(p([1, 1, 0]), Parity::Even);
    }

    #[test]
    fn neighbor_examples() {
        let lat = Lattice::new(2, 1).unwrap();
        let s = |c: [i32; 2]| lat.site_index(&c).unwrap();
        assert_eq!(lat.neighbor(s([0, 0]), 1), s([1, 0]));
        assert_eq!(lat.neighbor(s([1, 0]), 1), s([0, 0]));
        let lat3 = Lattice::new(3, 1).unwrap();
        let s3 = |c: [i32; 3]| lat3.site_index(&c).unwrap();
        assert_eq!(lat3.neighbor(s3([0, 1, 0]), 2), s3([0, 0, 0]));
    }

    #[test]
    fn lexicographic_order() {
        let lat = Lattice::with_mode_cap(2, 2, 32).unwrap();
        assert_eq!(lat.coord(0), &[-1, -1]);
        assert_eq!(lat.coord(1), &[-1, 0]);
        assert_eq!(lat.coord(4), &[0, -1]);
        assert_eq!(lat.coord(15), &[2, 2]);
        for s in lat.sites() {
            assert_eq!(lat.site_index(lat.coord(s)).unwrap(), s);
        }
    }

    #[test]
    fn reflection_is_involution_and_swaps_halves() {
        let lat = Lattice::with_mode_cap(2, 2, 32).unwrap();
        for s in lat.sites() {
            let r = lat.reflect(s);
            assert_eq!(lat.reflect(r), s);
            assert_ne!(lat.coord(s)[0] >= 1, lat.coord(r)[0] >= 1);
        }
    }

    fn small_lattice() -> impl Strategy<Value = Lattice> {
        prop_oneof![
            Just(Lattice::new(2, 1).unwrap()),
            Just(Lattice::new(3, 1).unwrap()),
            Just(Lattice::with_mode_cap(2, 2, 32).unwrap()),
            Just(Lattice::with_mode_cap(2, 3, 72).unwrap()),
            Just(Lattice::with_mode_cap(3, 2, 128).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn neighbor_is_periodic(lat in small_lattice(), s in 0usize..64, axis in 1usize..4) {
            let s = s % lat.n_sites();
            let axis = (axis - 1) % lat.dim() + 1;
            let mut x = s;
            for _ in 0..lat.side() {
                x = lat.neighbor(x, axis);
            }
            prop_assert_eq!(x, s);
            prop_assert_eq!(lat.neighbor_back(lat.neighbor(s, axis), axis), s);
        }

        #[test]
        fn plaquettes_close(lat in small_lattice()) {
            for p in lat.plaquettes() {
                let edges = lat.plaquette_edges(p);
                let mut at = p.site;
                for e in edges {
                    let (from, to) = lat.endpoints(e);
                    prop_assert_eq!(from, at);
                    at = to;
                }
                prop_assert_eq!(at, p.site);
            }
            prop_assert_eq!(lat.plaquettes().count(), lat.n_plaquettes());
            prop_assert_eq!(lat.bonds().count(), lat.dim() * lat.side().pow(lat.dim() as u32));
        }
    }
}
