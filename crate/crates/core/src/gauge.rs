//! Classical U(1) gauge fields on directed bonds.
//!
//! Angles are stored on the canonical branch `(-pi, pi]`. Reading a bond
//! against its orientation returns the negated angle, renormalized. Sums of
//! angles (fluxes, string phases, composed fields) are normalized eagerly.

use crate::lattice::{Bond, Lattice, OrientedBond, Plaquette};
use crate::rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

/// Tolerance for angle equality after mod-2pi reduction.
pub const ANGLE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaugeError {
    #[error("invalid path: vertices {index} and {} are not nearest neighbours", index + 1)]
    InvalidPath { index: usize },
    #[error("gauge field lives on a different lattice")]
    LatticeMismatch,
    #[error("angle {0} outside (-pi, pi]")]
    AngleOutOfRange(f64),
    #[error("malformed gauge-field document: {0}")]
    Format(String),
}

/// Reduce an angle to `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Distance between two angles on the circle, in `[0, pi]`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

/// Parity of the boundary-twisted phase function: for axis 1 it is set only
/// at `x^(1) = L`; for `i >= 2` it is the parity of `x^(1) + ... + x^(i-1)`,
/// flipped at `x^(i) = L`.
pub fn theta(lat: &Lattice, axis: usize, site: usize) -> u8 {
    let c = lat.coord(site);
    let l = lat.half_side() as i32;
    let lower: i32 = c[..axis - 1].iter().sum();
    let edge = i32::from(c[axis - 1] == l);
    (lower + edge).rem_euclid(2) as u8
}

/// Site phases `phi_x`, generating the pure-gauge field `phi_x - phi_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SitePhases {
    pub phi: Vec<f64>,
}

impl SitePhases {
    pub fn constant(lat: &Lattice, c: f64) -> Self {
        SitePhases {
            phi: vec![normalize_angle(c); lat.n_sites()],
        }
    }

    pub fn random(lat: &Lattice, seed: u64, stream: u64) -> Self {
        let mut r = rng::stream(seed, stream);
        SitePhases {
            phi: (0..lat.n_sites()).map(|_| rng::angle(&mut r)).collect(),
        }
    }

    pub fn get(&self, site: usize) -> f64 {
        self.phi[site]
    }
}

/// A walk `x_0 -> ... -> x_l` recorded edge by edge, so that the two distinct
/// bonds joining the same pair of sites when `L = 1` stay distinguishable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub start: usize,
    pub steps: Vec<OrientedBond>,
}

impl Path {
    pub fn empty(start: usize) -> Self {
        Path {
            start,
            steps: Vec::new(),
        }
    }

    /// Builds a path from a vertex list. A step `x -> y` uses the bond
    /// `(x, i)` when `y = x + e_i`, otherwise the reversed bond `(y, i)` when
    /// `x = y + e_i`; forward bonds win when both apply.
    pub fn from_vertices(lat: &Lattice, vertices: &[usize]) -> Result<Self, GaugeError> {
        let start = *vertices.first().ok_or(GaugeError::InvalidPath { index: 0 })?;
        let mut steps = Vec::with_capacity(vertices.len().saturating_sub(1));
        for (k, w) in vertices.windows(2).enumerate() {
            let (x, y) = (w[0], w[1]);
            let step = (1..=lat.dim()).find_map(|axis| {
                if lat.neighbor(x, axis) == y {
                    Some(OrientedBond {
                        bond: Bond { site: x, axis },
                        forward: true,
                    })
                } else if lat.neighbor(y, axis) == x {
                    Some(OrientedBond {
                        bond: Bond { site: y, axis },
                        forward: false,
                    })
                } else {
                    None
                }
            });
            steps.push(step.ok_or(GaugeError::InvalidPath { index: k })?);
        }
        Ok(Path { start, steps })
    }

    /// Checks that the steps chain together.
    pub fn validate(&self, lat: &Lattice) -> Result<(), GaugeError> {
        let mut at = self.start;
        for (k, e) in self.steps.iter().enumerate() {
            if e.bond.site >= lat.n_sites() || e.bond.axis == 0 || e.bond.axis > lat.dim() {
                return Err(GaugeError::InvalidPath { index: k });
            }
            let (from, to) = lat.endpoints(*e);
            if from != at {
                return Err(GaugeError::InvalidPath { index: k });
            }
            at = to;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn vertices(&self, lat: &Lattice) -> Vec<usize> {
        let mut v = vec![self.start];
        for e in &self.steps {
            v.push(lat.endpoints(*e).1);
        }
        v
    }

    /// Bond-level label such as `0 +0.1 -1.2`: the start site, then each bond
    /// `(site, axis)` with `+` when walked forward and `-` when reversed.
    pub fn label(&self) -> String {
        let mut out = self.start.to_string();
        for e in &self.steps {
            let sign = if e.forward { '+' } else { '-' };
            out.push_str(&format!(" {sign}{}.{}", e.bond.site, e.bond.axis));
        }
        out
    }

    pub fn end(&self, lat: &Lattice) -> usize {
        self.steps
            .last()
            .map_or(self.start, |e| lat.endpoints(*e).1)
    }
}

/// Enumerates walks from `from` to `to` of length at most `max_len` that never
/// revisit a site. Steps are tried axis by axis, forward before backward, so
/// the output order is deterministic. Stops after `limit` paths.
pub fn enumerate_paths(
    lat: &Lattice,
    from: usize,
    to: usize,
    max_len: usize,
    limit: usize,
) -> Vec<Path> {
    fn walk(
        lat: &Lattice,
        at: usize,
        to: usize,
        max_len: usize,
        limit: usize,
        visited: &mut Vec<bool>,
        steps: &mut Vec<OrientedBond>,
        start: usize,
        out: &mut Vec<Path>,
    ) {
        if out.len() >= limit {
            return;
        }
        if at == to && (!steps.is_empty() || start == to) {
            out.push(Path {
                start,
                steps: steps.clone(),
            });
            return;
        }
        if steps.len() == max_len {
            return;
        }
        for axis in 1..=lat.dim() {
            let candidates = [
                (
                    OrientedBond {
                        bond: Bond { site: at, axis },
                        forward: true,
                    },
                    lat.neighbor(at, axis),
                ),
                (
                    OrientedBond {
                        bond: Bond {
                            site: lat.neighbor_back(at, axis),
                            axis,
                        },
                        forward: false,
                    },
                    lat.neighbor_back(at, axis),
                ),
            ];
            for (edge, next) in candidates {
                if visited[next] {
                    continue;
                }
                visited[next] = true;
                steps.push(edge);
                walk(lat, next, to, max_len, limit, visited, steps, start, out);
                steps.pop();
                visited[next] = false;
            }
        }
    }
    let mut out = Vec::new();
    let mut visited = vec![false; lat.n_sites()];
    visited[from] = true;
    let mut steps = Vec::new();
    walk(
        lat,
        from,
        to,
        max_len,
        limit,
        &mut visited,
        &mut steps,
        from,
        &mut out,
    );
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeField {
    lattice: Arc<Lattice>,
    angles: Vec<f64>,
}

impl GaugeField {
    pub fn zero(lat: &Arc<Lattice>) -> Self {
        GaugeField {
            lattice: Arc::clone(lat),
            angles: vec![0.0; lat.n_bonds()],
        }
    }

    pub fn from_fn(lat: &Arc<Lattice>, mut f: impl FnMut(Bond) -> f64) -> Self {
        let angles = lat.bonds().map(|b| normalize_angle(f(b))).collect();
        GaugeField {
            lattice: Arc::clone(lat),
            angles,
        }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn angle(&self, bond: Bond) -> f64 {
        self.angles[self.lattice.bond_id(bond)]
    }

    pub fn set(&mut self, bond: Bond, a: f64) {
        let id = self.lattice.bond_id(bond);
        self.angles[id] = normalize_angle(a);
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Angle read along an oriented edge (`A_{y,x} = -A_{x,y}`).
    pub fn oriented(&self, e: OrientedBond) -> f64 {
        let a = self.angle(e.bond);
        if e.forward {
            a
        } else {
            normalize_angle(-a)
        }
    }

    pub fn flux(&self, p: Plaquette) -> f64 {
        let sum: f64 = self
            .lattice
            .plaquette_edges(p)
            .iter()
            .map(|e| self.oriented(*e))
            .sum();
        normalize_angle(sum)
    }

    pub fn fluxes(&self) -> Vec<f64> {
        self.lattice.plaquettes().map(|p| self.flux(p)).collect()
    }

    /// Largest `|F_p|` over plaquettes: the gauge-invariant distance from the
    /// zero-flux orbit.
    pub fn flux_distance(&self) -> f64 {
        self.fluxes().into_iter().map(f64::abs).fold(0.0, f64::max)
    }

    /// Bondwise sum mod 2pi.
    pub fn add(&self, other: &GaugeField) -> Result<GaugeField, GaugeError> {
        if *self.lattice != *other.lattice {
            return Err(GaugeError::LatticeMismatch);
        }
        Ok(GaugeField {
            lattice: Arc::clone(&self.lattice),
            angles: self
                .angles
                .iter()
                .zip(&other.angles)
                .map(|(a, b)| normalize_angle(a + b))
                .collect(),
        })
    }

    /// The pi-flux configuration `A_{x,x+e_i} = pi/2 + pi theta_i(x)`.
    pub fn pi_flux(lat: &Arc<Lattice>) -> Self {
        GaugeField::zero(lat).compose()
    }

    /// Maps `self` (read as the shifted field) to the original variables:
    /// `A_{x,x+e_i} = pi/2 + pi theta_i(x) + self_{x,x+e_i}`.
    pub fn compose(&self) -> GaugeField {
        let lat = &self.lattice;
        GaugeField::from_fn(lat, |b| {
            PI / 2.0 + PI * f64::from(theta(lat, b.axis, b.site)) + self.angle(b)
        })
    }

    /// Inverse of [`GaugeField::compose`].
    pub fn decompose(&self) -> GaugeField {
        let lat = &self.lattice;
        GaugeField::from_fn(lat, |b| {
            self.angle(b) - PI / 2.0 - PI * f64::from(theta(lat, b.axis, b.site))
        })
    }

    /// `A_{x,y} = phi_x - phi_y` on every directed bond.
    pub fn pure_gauge(lat: &Arc<Lattice>, phases: &SitePhases) -> Self {
        GaugeField::from_fn(lat, |b| phases.get(b.site) - phases.get(lat.head(b)))
    }

    /// Independent uniform angles per bond.
    pub fn random(lat: &Arc<Lattice>, seed: u64) -> Self {
        Self::random_stream(lat, seed, 0)
    }

    pub fn random_stream(lat: &Arc<Lattice>, seed: u64, stream: u64) -> Self {
        let mut r = rng::stream(seed, stream);
        GaugeField::from_fn(lat, |_| rng::angle(&mut r))
    }

    /// Oriented sum of angles along a path.
    pub fn string_phase(&self, path: &Path) -> Result<f64, GaugeError> {
        path.validate(&self.lattice)?;
        let sum: f64 = path.steps.iter().map(|e| self.oriented(*e)).sum();
        Ok(normalize_angle(sum))
    }

    /// Largest bondwise circular distance to `other`.
    pub fn max_angle_error(&self, other: &GaugeField) -> f64 {
        self.angles
            .iter()
            .zip(&other.angles)
            .map(|(a, b)| angle_distance(*a, *b))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        let lat = &self.lattice;
        let doc = GaugeFieldDoc {
            d: lat.dim(),
            l: lat.half_side(),
            entries: lat
                .bonds()
                .map(|b| GaugeEntry {
                    x: lat.coord(b.site).to_vec(),
                    i: b.axis,
                    angle: self.angle(b),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("gauge field serializes")
    }

    /// Parses the `{d, L, entries: [{x, i, angle}]}` document. Every bond
    /// must be listed exactly once.
    pub fn from_json(text: &str, mode_cap: usize) -> Result<GaugeField, GaugeError> {
        let doc: GaugeFieldDoc =
            serde_json::from_str(text).map_err(|e| GaugeError::Format(e.to_string()))?;
        let lat = Lattice::with_mode_cap(doc.d, doc.l, mode_cap)
            .map_err(|e| GaugeError::Format(e.to_string()))?;
        let lat = Arc::new(lat);
        let mut angles = vec![f64::NAN; lat.n_bonds()];
        for e in &doc.entries {
            let site = lat
                .site_index(&e.x)
                .map_err(|err| GaugeError::Format(err.to_string()))?;
            if e.i == 0 || e.i > lat.dim() {
                return Err(GaugeError::Format(format!("axis {} out of range", e.i)));
            }
            if !(e.angle > -PI && e.angle <= PI) {
                return Err(GaugeError::AngleOutOfRange(e.angle));
            }
            let id = lat.bond_id(Bond { site, axis: e.i });
            if !angles[id].is_nan() {
                return Err(GaugeError::Format(format!(
                    "bond ({:?}, {}) listed twice",
                    e.x, e.i
                )));
            }
            angles[id] = e.angle;
        }
        if angles.iter().any(|a| a.is_nan()) {
            return Err(GaugeError::Format("missing bonds".into()));
        }
        Ok(GaugeField {
            lattice: lat,
            angles,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaugeFieldDoc {
    d: usize,
    #[serde(rename = "L")]
    l: usize,
    entries: Vec<GaugeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaugeEntry {
    x: Vec<i32>,
    i: usize,
    angle: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::DEFAULT_MODE_CAP;
    use proptest::prelude::*;

    fn d2() -> Arc<Lattice> {
        Arc::new(Lattice::new(2, 1).unwrap())
    }

    fn d3() -> Arc<Lattice> {
        Arc::new(Lattice::new(3, 1).unwrap())
    }

    fn site(lat: &Lattice, c: &[i32]) -> usize {
        lat.site_index(c).unwrap()
    }

    #[test]
    fn normalize_branch() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(normalize_angle(0.0), 0.0);
    }

    #[test]
    fn theta_examples() {
        let lat = d3();
        assert_eq!(theta(&lat, 1, site(&lat, &[0, 0, 0])), 0);
        assert_eq!(theta(&lat, 1, site(&lat, &[1, 0, 0])), 1);
        assert_eq!(theta(&lat, 2, site(&lat, &[1, 0, 0])), 1);
        // flip at x^(i) = L on top of the lower-coordinate parity
        assert_eq!(theta(&lat, 2, site(&lat, &[1, 1, 0])), 0);
        assert_eq!(theta(&lat, 3, site(&lat, &[1, 1, 1])), 1);
    }

    #[test]
    fn pi_flux_examples() {
        for lat in [d2(), d3()] {
            let a = GaugeField::pi_flux(&lat);
            for f in a.fluxes() {
                assert!(angle_distance(f, PI) < ANGLE_TOL, "flux {f}");
            }
        }
        let lat = d3();
        let a = GaugeField::pi_flux(&lat);
        let b0 = Bond {
            site: site(&lat, &[0, 0, 0]),
            axis: 1,
        };
        let b1 = Bond {
            site: site(&lat, &[1, 0, 0]),
            axis: 1,
        };
        assert!((a.angle(b0) - PI / 2.0).abs() < 1e-15);
        assert!((a.angle(b1) + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn flux_examples() {
        let lat = d2();
        let zero = GaugeField::zero(&lat);
        assert!(zero.fluxes().iter().all(|f| *f == 0.0));
        let p = lat.plaquettes().next().unwrap();
        let mut a = GaugeField::zero(&lat);
        a.set(
            Bond {
                site: p.site,
                axis: p.i,
            },
            PI / 2.0,
        );
        assert!((a.flux(p) - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn compose_zero_is_pi_flux() {
        let lat = d2();
        assert_eq!(GaugeField::zero(&lat).compose(), GaugeField::pi_flux(&lat));
    }

    #[test]
    fn compose_round_trip_seeded() {
        let lat = d2();
        let t = GaugeField::random(&lat, 17);
        assert!(t.compose().decompose().max_angle_error(&t) <= 1e-12);
    }

    #[test]
    fn random_field_contract() {
        let lat = d3();
        let a = GaugeField::random(&lat, 5);
        let b = GaugeField::random(&lat, 5);
        let c = GaugeField::random(&lat, 6);
        assert_eq!(a, b);
        assert!(a.angles().iter().zip(c.angles()).any(|(x, y)| x != y));
        assert!(a.angles().iter().all(|x| *x > -PI && *x <= PI));
    }

    #[test]
    fn pure_gauge_examples() {
        let lat = d3();
        let c = GaugeField::pure_gauge(&lat, &SitePhases::constant(&lat, 1.3));
        assert!(c.angles().iter().all(|a| *a == 0.0));
        let phases = SitePhases::random(&lat, 11, 0);
        let g = GaugeField::pure_gauge(&lat, &phases);
        assert!(g.flux_distance() <= 1e-12);
    }

    #[test]
    fn string_phase_examples() {
        let lat = d2();
        let a = GaugeField::random(&lat, 3);
        assert_eq!(a.string_phase(&Path::empty(0)).unwrap(), 0.0);
        for p in lat.plaquettes() {
            let path = Path {
                start: p.site,
                steps: lat.plaquette_edges(p).to_vec(),
            };
            assert!(angle_distance(a.string_phase(&path).unwrap(), a.flux(p)) < 1e-14);
        }
        let phases = SitePhases::random(&lat, 4, 2);
        let g = GaugeField::pure_gauge(&lat, &phases);
        let (x, y) = (0, 3);
        for path in enumerate_paths(&lat, x, y, 4, 50) {
            let s = g.string_phase(&path).unwrap();
            assert!(angle_distance(s, phases.get(x) - phases.get(y)) < 1e-12);
        }
    }

    #[test]
    fn invalid_path_rejected() {
        let lat = Arc::new(Lattice::with_mode_cap(2, 2, 32).unwrap());
        let x = site(&lat, &[0, 0]);
        let far = site(&lat, &[2, 2]);
        assert_eq!(
            Path::from_vertices(&lat, &[x, far]),
            Err(GaugeError::InvalidPath { index: 0 })
        );
        let bad = Path {
            start: x,
            steps: vec![OrientedBond {
                bond: Bond {
                    site: far,
                    axis: 1,
                },
                forward: true,
            }],
        };
        let a = GaugeField::zero(&lat);
        assert!(a.string_phase(&bad).is_err());
    }

    #[test]
    fn path_enumeration_distinguishes_doubled_bonds() {
        let lat = d2();
        let paths = enumerate_paths(&lat, 0, 1, 1, 10);
        // at L = 1 the direct bond and the wrap bond both join 0 and 1
        assert_eq!(paths.len(), 2);
        assert_ne!(paths[0], paths[1]);
    }

    #[test]
    fn json_round_trip_exact() {
        let lat = d3();
        let a = GaugeField::random(&lat, 99);
        let back = GaugeField::from_json(&a.to_json(), DEFAULT_MODE_CAP).unwrap();
        assert_eq!(a, back);
        assert!(GaugeField::from_json("{\"d\":2}", DEFAULT_MODE_CAP).is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_periodic(a in -50.0f64..50.0, k in -5i32..5) {
            let n = normalize_angle(a);
            prop_assert!(n > -PI && n <= PI);
            prop_assert!(angle_distance(normalize_angle(a + 2.0 * PI * f64::from(k)), n) < 1e-12);
        }

        #[test]
        fn flux_shift_identity(seed in any::<u64>(), three in any::<bool>()) {
            let lat = if three { d3() } else { d2() };
            let t = GaugeField::random(&lat, seed);
            let a = t.compose();
            for p in lat.plaquettes() {
                prop_assert!(angle_distance(a.flux(p), t.flux(p) + PI) <= 1e-12);
            }
        }

        #[test]
        fn flux_is_gauge_invariant(seed in any::<u64>()) {
            let lat = d3();
            let t = GaugeField::random(&lat, seed);
            let g = GaugeField::pure_gauge(&lat, &SitePhases::random(&lat, seed, 1));
            let shifted = t.add(&g).unwrap();
            for p in lat.plaquettes() {
                prop_assert!(angle_distance(shifted.flux(p), t.flux(p)) <= 1e-12);
            }
        }

        #[test]
        fn string_covariance(seed in any::<u64>(), target in 0usize..8) {
            let lat = d3();
            let t = GaugeField::random(&lat, seed);
            let phases = SitePhases::random(&lat, seed, 7);
            let shifted = t.add(&GaugeField::pure_gauge(&lat, &phases)).unwrap();
            for path in enumerate_paths(&lat, 0, target, 3, 6) {
                let lhs = shifted.string_phase(&path).unwrap();
                let rhs = t.string_phase(&path).unwrap() + phases.get(0) - phases.get(target);
                prop_assert!(angle_distance(lhs, rhs) <= 1e-12);
            }
        }

        #[test]
        fn antisymmetry(seed in any::<u64>()) {
            let lat = d2();
            let a = GaugeField::random(&lat, seed);
            for b in lat.bonds() {
                let f = a.oriented(OrientedBond { bond: b, forward: true });
                let r = a.oriented(OrientedBond { bond: b, forward: false });
                prop_assert!(angle_distance(f, -r) <= 1e-15);
            }
        }
    }
}
