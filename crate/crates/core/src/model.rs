//! Hamiltonians of paired fermions hopping in a classical U(1) field.
//!
//! All bond sums run over the directed family `(x, i)`, `y = x + e_i`. On
//! `L = 1` the two bonds joining a site pair are both kept.

use crate::fock::{an, cr, Complex, FockOperator, Ladder, ModeIndex, OpSum, Spin, I, ONE};
use crate::gauge::{theta, GaugeField};
use crate::lattice::Lattice;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{key}: {message}")]
    Constraint { key: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kappa: f64,
    pub g: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub beta: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            kappa: 1.0,
            g: 1.0,
            k: 1.0,
            beta: 2.0,
        }
    }
}

impl ModelParams {
    pub fn new(kappa: f64, g: f64, k: f64, beta: f64) -> Result<Self, Vec<ModelError>> {
        let p = ModelParams { kappa, g, k, beta };
        p.validate()?;
        Ok(p)
    }

    /// Collects every violated constraint.
    pub fn validate(&self) -> Result<(), Vec<ModelError>> {
        let mut errs = Vec::new();
        let mut bad = |key: &'static str, message: String| {
            errs.push(ModelError::Constraint { key, message })
        };
        if !self.kappa.is_finite() {
            bad("kappa", format!("must be finite, got {}", self.kappa));
        }
        if !(self.g >= 0.0 && self.g.is_finite()) {
            bad("g", format!("coupling must satisfy g >= 0, got {}", self.g));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            bad("K", format!("flux stiffness must satisfy K > 0, got {}", self.k));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            bad("beta", format!("inverse temperature must be > 0, got {}", self.beta));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxConvention {
    /// `+K sum cos F` in the original variables.
    Original,
    /// `-K sum cos F~` in the shifted variables.
    Barred,
}

fn up(x: usize) -> ModeIndex {
    ModeIndex::new(x, Spin::Up)
}

fn dn(x: usize) -> ModeIndex {
    ModeIndex::new(x, Spin::Down)
}

fn theta_sign(lat: &Lattice, axis: usize, x: usize) -> f64 {
    if theta(lat, axis, x) == 1 {
        -1.0
    } else {
        1.0
    }
}

/// `a†_{x,up} a†_{x,dn}`.
pub fn pair_create(x: usize) -> Vec<Ladder> {
    vec![cr(up(x)), cr(dn(x))]
}

/// `a_{x,dn} a_{x,up}`, the adjoint of [`pair_create`].
pub fn pair_annihilate(x: usize) -> Vec<Ladder> {
    vec![an(dn(x)), an(up(x))]
}

/// `a†_{x,up} a†_{x,dn} a_{y,dn} a_{y,up}`.
pub fn pair_hop(x: usize, y: usize) -> Vec<Ladder> {
    let mut ops = pair_create(x);
    ops.extend(pair_annihilate(y));
    ops
}

pub fn hop_terms(lat: &Lattice, a: &GaugeField, kappa: f64) -> OpSum {
    let mut sum = OpSum::new();
    if kappa == 0.0 {
        return sum;
    }
    for b in lat.bonds() {
        let (x, y) = (b.site, lat.head(b));
        let phase = Complex::from_polar(1.0, a.angle(b));
        for s in Spin::BOTH {
            let (mx, my) = (ModeIndex::new(x, s), ModeIndex::new(y, s));
            sum.push(phase * kappa, vec![cr(mx), an(my)]);
            sum.push(phase.conj() * kappa, vec![cr(my), an(mx)]);
        }
    }
    sum
}

pub fn int_terms(lat: &Lattice, a: &GaugeField, g: f64) -> OpSum {
    let mut sum = OpSum::new();
    if g == 0.0 {
        return sum;
    }
    for b in lat.bonds() {
        let (x, y) = (b.site, lat.head(b));
        let phase = Complex::from_polar(1.0, 2.0 * a.angle(b));
        sum.push(phase * -g, pair_hop(x, y));
        sum.push(phase.conj() * -g, pair_hop(y, x));
    }
    sum
}

/// Spin `s`, axis `axis` part of the barred hopping with `Ã` replaced by
/// `eta * Ã`.
pub fn barred_hop_axis_terms(
    lat: &Lattice,
    tilde: &GaugeField,
    kappa: f64,
    s: Spin,
    axis: usize,
    eta: f64,
) -> OpSum {
    let mut sum = OpSum::new();
    if kappa == 0.0 {
        return sum;
    }
    for x in lat.sites() {
        let b = crate::lattice::Bond { site: x, axis };
        let y = lat.head(b);
        let c = I * kappa * theta_sign(lat, axis, x);
        let phase = Complex::from_polar(1.0, eta * tilde.angle(b));
        let (mx, my) = (ModeIndex::new(x, s), ModeIndex::new(y, s));
        sum.push(c * phase, vec![cr(mx), an(my)]);
        sum.push(-c * phase.conj(), vec![cr(my), an(mx)]);
    }
    sum
}

pub fn barred_hop_terms(lat: &Lattice, tilde: &GaugeField, kappa: f64) -> OpSum {
    let mut sum = OpSum::new();
    for s in Spin::BOTH {
        for axis in 1..=lat.dim() {
            sum.extend(barred_hop_axis_terms(lat, tilde, kappa, s, axis, 1.0));
        }
    }
    sum
}

/// The spin-`eta` resolved hopping `H_up(Ã) + H_dn(-Ã)`, summed over axes.
pub fn barred_hop_eta_terms(lat: &Lattice, tilde: &GaugeField, kappa: f64) -> OpSum {
    let mut sum = OpSum::new();
    for s in Spin::BOTH {
        for axis in 1..=lat.dim() {
            sum.extend(barred_hop_axis_terms(lat, tilde, kappa, s, axis, s.eta()));
        }
    }
    sum
}

pub fn barred_int_terms(lat: &Lattice, tilde: &GaugeField, g: f64) -> OpSum {
    int_terms(lat, tilde, g).scaled(-ONE)
}

pub fn build_hop(lat: &Lattice, a: &GaugeField, kappa: f64) -> FockOperator {
    hop_terms(lat, a, kappa).to_operator(lat.n_modes())
}

pub fn build_int(lat: &Lattice, a: &GaugeField, g: f64) -> FockOperator {
    int_terms(lat, a, g).to_operator(lat.n_modes())
}

pub fn build_barred_hop(lat: &Lattice, tilde: &GaugeField, kappa: f64) -> FockOperator {
    barred_hop_terms(lat, tilde, kappa).to_operator(lat.n_modes())
}

pub fn build_barred_int(lat: &Lattice, tilde: &GaugeField, g: f64) -> FockOperator {
    barred_int_terms(lat, tilde, g).to_operator(lat.n_modes())
}

pub fn flux_energy(a: &GaugeField, k: f64, convention: FluxConvention) -> f64 {
    let total: f64 = a.fluxes().iter().map(|f| f.cos()).sum();
    match convention {
        FluxConvention::Original => k * total,
        FluxConvention::Barred => -k * total,
    }
}

/// `(Γ¹_x, Γ²_x)` with `Γ¹ = P† + P`, `Γ² = i(P† - P)`.
pub fn gamma_terms(x: usize) -> (OpSum, OpSum) {
    let mut g1 = OpSum::new();
    g1.push(ONE, pair_create(x));
    g1.push(ONE, pair_annihilate(x));
    let mut g2 = OpSum::new();
    g2.push(I, pair_create(x));
    g2.push(-I, pair_annihilate(x));
    (g1, g2)
}

pub fn gamma_ops(lat: &Lattice, x: usize) -> (FockOperator, FockOperator) {
    let (g1, g2) = gamma_terms(x);
    (g1.to_operator(lat.n_modes()), g2.to_operator(lat.n_modes()))
}

/// Cooper pair correlation operator `a†_{x,up} a†_{x,dn} a_{y,dn} a_{y,up}`.
pub fn pair_observable(lat: &Lattice, x: usize, y: usize) -> FockOperator {
    let mut s = OpSum::new();
    s.push(ONE, pair_hop(x, y));
    s.to_operator(lat.n_modes())
}

/// Fermionic operator plus the scalar gauge-field energy.
#[derive(Debug, Clone)]
pub struct HamiltonianBundle {
    pub fermionic: FockOperator,
    pub classical_shift: f64,
}

/// `H̄_hop(Ã) + H̄_int(Ã)` with shift `-K sum cos F~`.
pub fn build_full(lat: &Lattice, params: &ModelParams, tilde: &GaugeField) -> HamiltonianBundle {
    let mut terms = barred_hop_terms(lat, tilde, params.kappa);
    terms.extend(barred_int_terms(lat, tilde, params.g));
    HamiltonianBundle {
        fermionic: terms.to_operator(lat.n_modes()),
        classical_shift: flux_energy(tilde, params.k, FluxConvention::Barred),
    }
}
