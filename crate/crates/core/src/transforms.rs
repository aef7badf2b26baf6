//! Unitaries acting on the Fock space and exact checks of the conjugated
//! Hamiltonians built from them.

use crate::fock::{an, cr, Complex, FockError, FockOperator, ModeIndex, OpSum, Spin, I, ONE};
use crate::gauge::{theta, GaugeField, SitePhases};
use crate::lattice::{Bond, Lattice, Parity};
use crate::model::{
    barred_hop_axis_terms, barred_hop_terms, barred_int_terms, gamma_ops, int_terms, pair_hop,
    ModelParams,
};
use crate::par::{self, Exec};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const IDENTITY_TOL: f64 = 1e-12;
pub const IDENTITY_MODE_CAP: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("unknown unitary label `{0}`")]
    UnknownLabel(String),
    #[error("unknown identity kind `{0}`")]
    UnknownKind(String),
    #[error("U(phi) requires site phases")]
    MissingPhases,
    #[error("U_1,j needs 2 <= j <= d, got j = {0}")]
    BadAxis(usize),
    #[error("{modes} modes exceed the identity-check cap of {cap}")]
    SizeExceedsCap { modes: usize, cap: usize },
    #[error(transparent)]
    Fock(#[from] FockError),
}

fn parity_sign(n: i32) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign tables entering the real-space transformed hopping terms.
#[derive(Debug, Clone)]
pub struct SignTables {
    site_sign: Vec<f64>,
    varrho: Vec<f64>,
    d: usize,
}

impl SignTables {
    pub fn new(lat: &Lattice) -> Self {
        let d = lat.dim();
        let site_sign = lat.sites().map(|x| lat.parity(x).sign()).collect();
        let mut varrho = Vec::with_capacity(lat.n_sites() * d);
        for x in lat.sites() {
            for i in 1..=d {
                let exponent = theta(lat, i, x) as i32 + lat.coord(x)[i - 1];
                varrho.push(parity_sign(exponent));
            }
        }
        SignTables {
            site_sign,
            varrho,
            d,
        }
    }

    pub fn eta(s: Spin) -> f64 {
        s.eta()
    }

    /// `(-1)^{x^(1) + ... + x^(d)}`.
    pub fn upsilon_bare(&self, x: usize) -> f64 {
        self.site_sign[x]
    }

    pub fn upsilon(&self, x: usize, s: Spin) -> f64 {
        self.site_sign[x] * s.eta()
    }

    /// `(-1)^{θ_i(x) + x^(i)}`.
    pub fn varrho(&self, x: usize, axis: usize) -> f64 {
        self.varrho[x * self.d + axis - 1]
    }

    pub fn varrho_tilde(&self, x: usize, axis: usize) -> f64 {
        self.varrho(x, axis) * self.site_sign[x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitaryLabel {
    /// `prod_{x odd, σ} exp(iπ/2 n_{x,σ})`.
    OddHalfPi,
    /// `prod_{x^(j) even, σ} exp(iπ/2 n_{x,σ})`.
    U1j(usize),
    U1,
    /// `prod_{x odd, σ} u_{x,σ}`.
    Odd,
    /// `U_1 U_odd`.
    U1Tilde,
    /// `prod exp(i φ_x n_{x,σ})`.
    Phase,
}

impl fmt::Display for UnitaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnitaryLabel::OddHalfPi => write!(f, "u_odd_half_pi"),
            UnitaryLabel::U1j(j) => write!(f, "u1_{j}"),
            UnitaryLabel::U1 => write!(f, "u1"),
            UnitaryLabel::Odd => write!(f, "u_odd"),
            UnitaryLabel::U1Tilde => write!(f, "u1_tilde"),
            UnitaryLabel::Phase => write!(f, "u_phi"),
        }
    }
}

impl FromStr for UnitaryLabel {
    type Err = TransformError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "u_odd_half_pi" => UnitaryLabel::OddHalfPi,
            "u1" => UnitaryLabel::U1,
            "u_odd" => UnitaryLabel::Odd,
            "u1_tilde" => UnitaryLabel::U1Tilde,
            "u_phi" => UnitaryLabel::Phase,
            other => match other.strip_prefix("u1_").and_then(|j| j.parse().ok()) {
                Some(j) => UnitaryLabel::U1j(j),
                None => return Err(TransformError::UnknownLabel(s.to_string())),
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct UnitaryOp {
    pub label: UnitaryLabel,
    pub matrix: FockOperator,
}

impl UnitaryOp {
    /// `max |U†U - 1|`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.matrix.n_modes();
        self.matrix
            .adjoint()
            .mul(&self.matrix)
            .and_then(|p| p.max_abs_diff(&FockOperator::identity(n)))
            .unwrap_or(f64::INFINITY)
    }

    /// `U† X U`.
    pub fn conjugate(&self, x: &FockOperator) -> Result<FockOperator, FockError> {
        x.conjugate_by(&self.matrix)
    }
}

/// `exp(i sum_m phase[m] n_m)` as a diagonal operator.
fn phase_diagonal(n_modes: usize, phase: impl Fn(usize) -> f64) -> FockOperator {
    let phases: Vec<f64> = (0..n_modes).map(phase).collect();
    FockOperator::diagonal(n_modes, |s| {
        let total: f64 = (0..n_modes).filter(|m| s >> m & 1 == 1).map(|m| phases[m]).sum();
        Complex::from_polar(1.0, total)
    })
}

/// Diagonal unitary `i^{number of occupied modes on selected sites}`.
fn quarter_turn(n_modes: usize, selected: impl Fn(usize) -> bool) -> FockOperator {
    let mask: u64 = (0..n_modes)
        .filter(|m| selected(m / 2))
        .fold(0, |acc, m| acc | 1 << m);
    const POW: [Complex; 4] = [ONE, I, Complex::new(-1.0, 0.0), Complex::new(0.0, -1.0)];
    FockOperator::diagonal(n_modes, |s| POW[((s & mask).count_ones() % 4) as usize])
}

/// `u_m = [prod_{k != m} (-1)^{n_k}] (a†_m + a_m)`.
pub fn majorana_flip(n_modes: usize, mode: usize) -> FockOperator {
    let bit = 1u64 << mode;
    FockOperator::monomial(n_modes, |s| {
        let below = (s & (bit - 1)).count_ones();
        let others = (s & !bit).count_ones();
        let sign = if (below + others) % 2 == 0 { 1.0 } else { -1.0 };
        (s ^ bit, Complex::from(sign))
    })
}

fn u1j(lat: &Lattice, j: usize) -> Result<FockOperator, TransformError> {
    if j < 2 || j > lat.dim() {
        return Err(TransformError::BadAxis(j));
    }
    Ok(quarter_turn(lat.n_modes(), |x| lat.coord(x)[j - 1].rem_euclid(2) == 0))
}

pub fn build_unitary(
    lat: &Lattice,
    label: UnitaryLabel,
    phases: Option<&SitePhases>,
) -> Result<UnitaryOp, TransformError> {
    let n = lat.n_modes();
    let matrix = match label {
        UnitaryLabel::OddHalfPi => quarter_turn(n, |x| lat.parity(x) == Parity::Odd),
        UnitaryLabel::U1j(j) => u1j(lat, j)?,
        UnitaryLabel::U1 => {
            let mut u = FockOperator::identity(n);
            for j in 2..=lat.dim() {
                u = u.mul(&u1j(lat, j)?)?;
            }
            u
        }
        UnitaryLabel::Odd => {
            let mut u = FockOperator::identity(n);
            for m in 0..n {
                if lat.parity(m / 2) == Parity::Odd {
                    u = u.mul(&majorana_flip(n, m))?;
                }
            }
            u
        }
        UnitaryLabel::U1Tilde => {
            let u1 = build_unitary(lat, UnitaryLabel::U1, None)?.matrix;
            let odd = build_unitary(lat, UnitaryLabel::Odd, None)?.matrix;
            u1.mul(&odd)?
        }
        UnitaryLabel::Phase => {
            let phi = phases.ok_or(TransformError::MissingPhases)?;
            phase_diagonal(n, |m| phi.get(m / 2))
        }
    };
    Ok(UnitaryOp { label, matrix })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityKind {
    SpinRotationHop,
    SpinRotationInt,
    GammaDecomposition,
    U1Int1,
    U1IntJ,
    U1Hop1,
    U1HopI,
}

impl IdentityKind {
    pub const ALL: [IdentityKind; 7] = [
        IdentityKind::SpinRotationHop,
        IdentityKind::SpinRotationInt,
        IdentityKind::GammaDecomposition,
        IdentityKind::U1Int1,
        IdentityKind::U1IntJ,
        IdentityKind::U1Hop1,
        IdentityKind::U1HopI,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdentityKind::SpinRotationHop => "spin_rotation_hop",
            IdentityKind::SpinRotationInt => "spin_rotation_int",
            IdentityKind::GammaDecomposition => "gamma_decomposition",
            IdentityKind::U1Int1 => "u1_int_1",
            IdentityKind::U1IntJ => "u1_int_j",
            IdentityKind::U1Hop1 => "u1_hop_1",
            IdentityKind::U1HopI => "u1_hop_i",
        }
    }
}

impl fmt::Display for IdentityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IdentityKind {
    type Err = TransformError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IdentityKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| TransformError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IdentityReport {
    pub kind: IdentityKind,
    pub max_error: f64,
    pub pass: bool,
}

fn to_op(lat: &Lattice, s: OpSum) -> FockOperator {
    s.to_operator(lat.n_modes())
}

fn square(op: &FockOperator) -> Result<FockOperator, FockError> {
    op.mul(op)
}

/// `(g/4) sum_x [Γ¹_x + s1 Γ¹_{x+e_j}]² - (g/4) sum_x [Γ²_x + s2 Γ²_{x+e_j}]²`.
fn gamma_bond_form(lat: &Lattice, g: f64, axis: usize, s1: f64, s2: f64) -> Result<FockOperator, FockError> {
    let n = lat.n_modes();
    let gammas: Vec<_> = lat.sites().map(|x| gamma_ops(lat, x)).collect();
    let mut out = FockOperator::zero(n);
    for x in lat.sites() {
        let y = lat.neighbor(x, axis);
        let a = gammas[x].0.add(&gammas[y].0.scale(Complex::from(s1)))?;
        let b = gammas[x].1.add(&gammas[y].1.scale(Complex::from(s2)))?;
        out = out.add(&square(&a)?.sub(&square(&b)?)?.scale(Complex::from(g / 4.0)))?;
    }
    Ok(out)
}

/// `iκ sum (-1)^θ ...` conjugated by `U_{odd,π/2}`: the Hermitian hopping with
/// sign `+1` when the tail is odd and `-1` when the head is odd.
fn spin_rotated_hop(lat: &Lattice, tilde: &GaugeField, kappa: f64) -> OpSum {
    let mut sum = OpSum::new();
    for b in lat.bonds() {
        let (x, y) = (b.site, lat.head(b));
        let parity = match (lat.parity(x), lat.parity(y)) {
            (Parity::Odd, Parity::Even) => 1.0,
            (Parity::Even, Parity::Odd) => -1.0,
            // Sides are even, so bond endpoints always differ in parity.
            _ => unreachable!("bond endpoints of equal parity"),
        };
        let th = if theta(lat, b.axis, x) == 1 { -1.0 } else { 1.0 };
        let c = Complex::from(kappa * th * parity);
        let phase = Complex::from_polar(1.0, tilde.angle(b));
        for s in Spin::BOTH {
            let (mx, my) = (ModeIndex::new(x, s), ModeIndex::new(y, s));
            sum.push(c * phase, vec![cr(mx), an(my)]);
            sum.push(c * phase.conj(), vec![cr(my), an(mx)]);
        }
    }
    sum
}

/// `-g sum [e^{2iÃ} a†_{x↑} a_{y↑} a†_{x↓} a_{y↓} + h.c.]`.
fn spin_product_int(lat: &Lattice, tilde: &GaugeField, g: f64) -> OpSum {
    let mut sum = OpSum::new();
    let (u, d) = (Spin::Up, Spin::Down);
    for b in lat.bonds() {
        let (x, y) = (b.site, lat.head(b));
        let phase = Complex::from_polar(1.0, 2.0 * tilde.angle(b));
        let m = ModeIndex::new;
        sum.push(
            phase * -g,
            vec![cr(m(x, u)), an(m(y, u)), cr(m(x, d)), an(m(y, d))],
        );
        sum.push(
            phase.conj() * -g,
            vec![cr(m(y, u)), an(m(x, u)), cr(m(y, d)), an(m(x, d))],
        );
    }
    sum
}

/// Pair-creation form of the axis-`axis`, spin-`s` hopping after `Ũ_1`.
fn u1_hop_form(lat: &Lattice, tilde: &GaugeField, kappa: f64, s: Spin, axis: usize) -> OpSum {
    let signs = SignTables::new(lat);
    let mut sum = OpSum::new();
    for x in lat.sites() {
        let b = Bond { site: x, axis };
        let y = lat.head(b);
        let ups = signs.upsilon(x, s);
        let phase = Complex::from_polar(1.0, ups * tilde.angle(b));
        let (mx, my) = (ModeIndex::new(x, s), ModeIndex::new(y, s));
        if axis == 1 {
            let th = if theta(lat, 1, x) == 1 { -1.0 } else { 1.0 };
            let c = I * kappa * th;
            sum.push(c * phase, vec![cr(mx), cr(my)]);
            sum.push(c * phase.conj(), vec![an(mx), an(my)]);
        } else {
            let c = Complex::from(kappa * signs.varrho(x, axis) * signs.upsilon_bare(x));
            sum.push(c * phase, vec![cr(mx), cr(my)]);
            sum.push(c * phase.conj(), vec![an(my), an(mx)]);
        }
    }
    sum
}

pub fn verify_identity(
    lat: &Lattice,
    params: &ModelParams,
    tilde: &GaugeField,
    kind: IdentityKind,
) -> Result<IdentityReport, TransformError> {
    if lat.n_modes() > IDENTITY_MODE_CAP {
        return Err(TransformError::SizeExceedsCap {
            modes: lat.n_modes(),
            cap: IDENTITY_MODE_CAP,
        });
    }
    let (kappa, g) = (params.kappa, params.g);
    let zero = GaugeField::zero(tilde.lattice());
    let max_error = match kind {
        IdentityKind::SpinRotationHop => {
            let u = build_unitary(lat, UnitaryLabel::OddHalfPi, None)?;
            let lhs = u.conjugate(&to_op(lat, barred_hop_terms(lat, tilde, kappa)))?;
            lhs.max_abs_diff(&to_op(lat, spin_rotated_hop(lat, tilde, kappa)))?
        }
        IdentityKind::SpinRotationInt => {
            let u = build_unitary(lat, UnitaryLabel::OddHalfPi, None)?;
            let lhs = u.conjugate(&to_op(lat, barred_int_terms(lat, tilde, g)))?;
            let pair_form = lhs.max_abs_diff(&to_op(lat, int_terms(lat, tilde, g)))?;
            let spin_form = lhs.max_abs_diff(&to_op(lat, spin_product_int(lat, tilde, g)))?;
            pair_form.max(spin_form)
        }
        IdentityKind::GammaDecomposition => {
            let lhs = to_op(lat, barred_int_terms(lat, &zero, g));
            let mut rhs = FockOperator::zero(lat.n_modes());
            for j in 1..=lat.dim() {
                rhs = rhs.add(&gamma_bond_form(lat, g, j, 1.0, -1.0)?)?;
            }
            let onsite_scale = Complex::from(-(lat.dim() as f64) * g / 2.0);
            for x in lat.sites() {
                let (g1, g2) = gamma_ops(lat, x);
                rhs = rhs.add(&square(&g1)?.sub(&square(&g2)?)?.scale(onsite_scale))?;
            }
            lhs.max_abs_diff(&rhs)?
        }
        IdentityKind::U1Int1 => {
            let u = build_unitary(lat, UnitaryLabel::U1Tilde, None)?;
            let h = gamma_bond_form(lat, g, 1, 1.0, -1.0)?;
            u.conjugate(&h)?
                .max_abs_diff(&gamma_bond_form(lat, g, 1, -1.0, -1.0)?)?
        }
        IdentityKind::U1IntJ => {
            let u = build_unitary(lat, UnitaryLabel::U1Tilde, None)?;
            let mut worst: f64 = 0.0;
            for j in 2..=lat.dim() {
                let h = gamma_bond_form(lat, g, j, 1.0, -1.0)?;
                let e = u
                    .conjugate(&h)?
                    .max_abs_diff(&gamma_bond_form(lat, g, j, 1.0, 1.0)?)?;
                worst = worst.max(e);
            }
            worst
        }
        IdentityKind::U1Hop1 | IdentityKind::U1HopI => {
            let u = build_unitary(lat, UnitaryLabel::U1Tilde, None)?;
            let axes: Vec<usize> = if kind == IdentityKind::U1Hop1 {
                vec![1]
            } else {
                (2..=lat.dim()).collect()
            };
            let mut worst: f64 = 0.0;
            for &axis in &axes {
                for s in Spin::BOTH {
                    let h = barred_hop_axis_terms(lat, tilde, kappa, s, axis, s.eta());
                    let lhs = u.conjugate(&to_op(lat, h))?;
                    let rhs = to_op(lat, u1_hop_form(lat, tilde, kappa, s, axis));
                    worst = worst.max(lhs.max_abs_diff(&rhs)?);
                }
            }
            worst
        }
    };
    Ok(IdentityReport {
        kind,
        max_error,
        pass: max_error <= IDENTITY_TOL,
    })
}

/// Every kind for one field, kinds evaluated as independent jobs.
pub fn verify_all(
    lat: &Lattice,
    params: &ModelParams,
    tilde: &GaugeField,
    exec: Exec,
) -> Result<Vec<IdentityReport>, TransformError> {
    par::map(exec, &IdentityKind::ALL, |k| verify_identity(lat, params, tilde, *k))
        .into_iter()
        .collect()
}

/// Annihilator images `U† a_m U` for all modes, for conjugation tests.
pub fn conjugated_annihilators(u: &UnitaryOp) -> Result<Vec<FockOperator>, FockError> {
    let n = u.matrix.n_modes();
    (0..n)
        .map(|m| u.conjugate(&FockOperator::annihilate(n, ModeIndex::from_id(m))))
        .collect()
}

/// `U(φ)† P†_x P_y U(φ)` should equal `e^{-2i(φ_x - φ_y)} P†_x P_y`; exposed for
/// the covariance tests.
pub fn pair_phase(phases: &SitePhases, x: usize, y: usize) -> Complex {
    Complex::from_polar(1.0, -2.0 * (phases.get(x) - phases.get(y)))
}

pub fn pair_operator(lat: &Lattice, x: usize, y: usize) -> FockOperator {
    let mut s = OpSum::new();
    s.push(ONE, pair_hop(x, y));
    to_op(lat, s)
}
