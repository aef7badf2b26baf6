//! End-to-end checks: optimality of the zero field for the partition
//! function and ground energy, and the gauge behavior of pair correlations.

use crate::fock::{Complex, FockOperator};
use crate::gauge::{enumerate_paths, GaugeError, GaugeField, Path, SitePhases};
use crate::lattice::Lattice;
use crate::model::{build_full, gamma_ops, pair_observable, ModelParams};
use crate::par::{self, Exec};
use crate::spectral::{diagonalize, DiagOptions, SpectralData, SpectralError, VectorPolicy};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

pub const MARGIN_TOL: f64 = 1e-10;
pub const COVARIANCE_TOL: f64 = 1e-10;
pub const DEFAULT_BETAS: [f64; 3] = [0.5, 2.0, 8.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Gauge(#[from] GaugeError),
    #[error("site {0} is not on the lattice")]
    BadSite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeInfo {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub below_paper_dimension: bool,
}

impl LatticeInfo {
    pub fn of(lat: &Lattice) -> Self {
        LatticeInfo {
            d: lat.dim(),
            l: lat.half_side(),
            below_paper_dimension: lat.below_paper_dimension(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Zero,
    PureGauge,
    Random,
}

impl SampleKind {
    pub fn name(self) -> &'static str {
        match self {
            SampleKind::Zero => "zero",
            SampleKind::PureGauge => "pure_gauge",
            SampleKind::Random => "random",
        }
    }
}

/// One field of a sweep: the zero field, one pure gauge, then random fields
/// drawn from stream `k` of the seed.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub kind: SampleKind,
    pub stream: u64,
    pub field: GaugeField,
}

pub fn sample_fields(lat: &Arc<Lattice>, n_random: usize, seed: u64) -> Vec<FieldSample> {
    let mut out = vec![
        FieldSample {
            kind: SampleKind::Zero,
            stream: 0,
            field: GaugeField::zero(lat),
        },
        FieldSample {
            kind: SampleKind::PureGauge,
            stream: 0,
            field: GaugeField::pure_gauge(lat, &SitePhases::random(lat, seed, u64::MAX)),
        },
    ];
    out.extend((0..n_random as u64).map(|k| FieldSample {
        kind: SampleKind::Random,
        stream: k,
        field: GaugeField::random_stream(lat, seed, k),
    }));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremSample {
    pub kind: SampleKind,
    pub stream: u64,
    pub beta: f64,
    pub log_z_tilde: f64,
    pub log_z_zero: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub lattice: LatticeInfo,
    pub params: ModelParams,
    pub betas: Vec<f64>,
    pub seed: u64,
    pub samples: Vec<TheoremSample>,
    pub min_margin: f64,
    pub pure_gauge_max_abs_margin: f64,
    pub verdict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundEnergySample {
    pub kind: SampleKind,
    pub stream: u64,
    pub e0_tilde: f64,
    pub e0_zero: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundEnergyReport {
    pub lattice: LatticeInfo,
    pub params: ModelParams,
    pub seed: u64,
    pub samples: Vec<GroundEnergySample>,
    pub min_gap: f64,
    pub min_random_gap: Option<f64>,
    pub verdict: bool,
}

fn fermionic_spectrum(
    lat: &Lattice,
    params: &ModelParams,
    tilde: &GaugeField,
    exec: Exec,
) -> Result<SpectralData, SpectralError> {
    diagonalize(lat, &build_full(lat, params, tilde), DiagOptions::eigenvalues_only(exec))
}

/// Both optimality checks on one set of fields, sharing every spectrum.
pub fn theorem_sweep(
    lat: &Arc<Lattice>,
    params: &ModelParams,
    n_samples: usize,
    betas: &[f64],
    seed: u64,
    exec: Exec,
) -> Result<(TheoremReport, GroundEnergyReport), ExperimentError> {
    let fields = sample_fields(lat, n_samples, seed);
    let zero = fermionic_spectrum(lat, params, &fields[0].field, exec)?;
    let rest: Vec<Result<SpectralData, SpectralError>> =
        par::map(exec, &fields[1..], |f| fermionic_spectrum(lat, params, &f.field, exec));
    let mut spectra = Vec::with_capacity(fields.len());
    spectra.push(zero);
    for r in rest {
        spectra.push(r?);
    }
    let z0: Vec<f64> = betas.iter().map(|&b| spectra[0].log_z_fermionic(b)).collect();
    let e00 = spectra[0].e0_fermionic();

    let mut samples = Vec::new();
    let mut energies = Vec::new();
    for (f, s) in fields.iter().zip(&spectra) {
        for (&beta, &lz0) in betas.iter().zip(&z0) {
            let lz = s.log_z_fermionic(beta);
            samples.push(TheoremSample {
                kind: f.kind,
                stream: f.stream,
                beta,
                log_z_tilde: lz,
                log_z_zero: lz0,
                margin: lz0 - lz,
            });
        }
        energies.push(GroundEnergySample {
            kind: f.kind,
            stream: f.stream,
            e0_tilde: s.e0_fermionic(),
            e0_zero: e00,
            gap: s.e0_fermionic() - e00,
        });
    }
    let min_margin = samples.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
    let pure = samples
        .iter()
        .filter(|s| s.kind == SampleKind::PureGauge)
        .map(|s| s.margin.abs())
        .fold(0.0, f64::max);
    let zero_exact = samples
        .iter()
        .filter(|s| s.kind == SampleKind::Zero)
        .all(|s| s.margin == 0.0);
    let theorem = TheoremReport {
        lattice: LatticeInfo::of(lat),
        params: *params,
        betas: betas.to_vec(),
        seed,
        min_margin,
        pure_gauge_max_abs_margin: pure,
        verdict: min_margin >= -MARGIN_TOL && pure <= MARGIN_TOL && zero_exact,
        samples,
    };
    let min_gap = energies.iter().map(|s| s.gap).fold(f64::INFINITY, f64::min);
    let min_random_gap = energies
        .iter()
        .filter(|s| s.kind == SampleKind::Random)
        .map(|s| s.gap)
        .reduce(f64::min);
    let pure_gap = energies
        .iter()
        .filter(|s| s.kind != SampleKind::Random)
        .all(|s| s.gap.abs() <= MARGIN_TOL);
    let ground = GroundEnergyReport {
        lattice: LatticeInfo::of(lat),
        params: *params,
        seed,
        samples: energies,
        min_gap,
        min_random_gap,
        verdict: min_gap >= -MARGIN_TOL && pure_gap,
    };
    Ok((theorem, ground))
}

pub fn check_theorem1(
    lat: &Arc<Lattice>,
    params: &ModelParams,
    n_samples: usize,
    betas: &[f64],
    seed: u64,
    exec: Exec,
) -> Result<TheoremReport, ExperimentError> {
    Ok(theorem_sweep(lat, params, n_samples, betas, seed, exec)?.0)
}

pub fn check_ground_energy(
    lat: &Arc<Lattice>,
    params: &ModelParams,
    n_samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<GroundEnergyReport, ExperimentError> {
    Ok(theorem_sweep(lat, params, n_samples, &[], seed, exec)?.1)
}

/// Ground-state data with eigenvectors of the ground space.
pub fn ground_state(
    lat: &Lattice,
    params: &ModelParams,
    tilde: &GaugeField,
    exec: Exec,
) -> Result<SpectralData, SpectralError> {
    diagonalize(
        lat,
        &build_full(lat, params, tilde),
        DiagOptions {
            exec,
            symmetry: true,
            vectors: VectorPolicy::Ground,
        },
    )
}

fn check_site(lat: &Lattice, x: usize) -> Result<(), ExperimentError> {
    if x >= lat.n_sites() {
        return Err(ExperimentError::BadSite(x));
    }
    Ok(())
}

/// `ω_0(a†_{x↑} a†_{x↓} a_{y↓} a_{y↑})` in a precomputed ground state.
pub fn pair_correlation(
    lat: &Lattice,
    ground: &SpectralData,
    x: usize,
    y: usize,
) -> Result<Complex, ExperimentError> {
    check_site(lat, x)?;
    check_site(lat, y)?;
    Ok(ground.ground_expectation(&pair_observable(lat, x, y))?.value())
}

pub fn cooper_correlation(
    lat: &Lattice,
    params: &ModelParams,
    tilde: &GaugeField,
    x: usize,
    y: usize,
    exec: Exec,
) -> Result<Complex, ExperimentError> {
    check_site(lat, x)?;
    check_site(lat, y)?;
    let g = ground_state(lat, params, tilde, exec)?;
    pair_correlation(lat, &g, x, y)
}

/// `ω_0(Γ¹_x Γ¹_y)`.
pub fn gamma_correlation(
    lat: &Lattice,
    ground: &SpectralData,
    x: usize,
    y: usize,
) -> Result<Complex, ExperimentError> {
    check_site(lat, x)?;
    check_site(lat, y)?;
    let (gx, _) = gamma_ops(lat, x);
    let (gy, _) = gamma_ops(lat, y);
    let prod = gx.mul(&gy).map_err(SpectralError::from)?;
    Ok(ground.ground_expectation(&prod)?.value())
}

/// Phase `e^{-2i(φ_x - φ_y)}` picked up by the pair correlation under `dφ`.
pub fn covariance_phase(phi: &SitePhases, x: usize, y: usize) -> Complex {
    Complex::from_polar(1.0, -2.0 * (phi.get(x) - phi.get(y)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCheck {
    pub stream: u64,
    pub predicted_re: f64,
    pub predicted_im: f64,
    pub measured_re: f64,
    pub measured_im: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub lattice: LatticeInfo,
    pub x: usize,
    pub y: usize,
    pub fixed_re: f64,
    pub fixed_im: f64,
    pub checks: Vec<CovarianceCheck>,
    pub max_error: f64,
    pub verdict: bool,
}

/// Compares the correlation at `Ã = dφ` against the phase law applied to the
/// `Ã = 0` value, for `n_phi` seeded phase fields.
pub fn phase_covariance(
    lat: &Arc<Lattice>,
    params: &ModelParams,
    x: usize,
    y: usize,
    n_phi: usize,
    seed: u64,
    exec: Exec,
    zero_ground: Option<&SpectralData>,
) -> Result<CovarianceReport, ExperimentError> {
    let owned;
    let zg = match zero_ground {
        Some(g) => g,
        None => {
            owned = ground_state(lat, params, &GaugeField::zero(lat), exec)?;
            &owned
        }
    };
    let fixed = pair_correlation(lat, zg, x, y)?;
    let streams: Vec<u64> = (0..n_phi as u64).collect();
    let results: Vec<Result<CovarianceCheck, ExperimentError>> = par::map(exec, &streams, |&k| {
        let phi = SitePhases::random(lat, seed, k);
        let field = GaugeField::pure_gauge(lat, &phi);
        let measured = cooper_correlation(lat, params, &field, x, y, exec)?;
        let predicted = covariance_phase(&phi, x, y) * fixed;
        Ok(CovarianceCheck {
            stream: k,
            predicted_re: predicted.re,
            predicted_im: predicted.im,
            measured_re: measured.re,
            measured_im: measured.im,
            error: (measured - predicted).norm(),
        })
    });
    let checks: Vec<CovarianceCheck> = results.into_iter().collect::<Result<_, _>>()?;
    let max_error = checks.iter().map(|c| c.error).fold(0.0, f64::max);
    Ok(CovarianceReport {
        lattice: LatticeInfo::of(lat),
        x,
        y,
        fixed_re: fixed.re,
        fixed_im: fixed.im,
        checks,
        max_error,
        verdict: max_error <= COVARIANCE_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub abs_mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitReport {
    pub lattice: LatticeInfo,
    pub x: usize,
    pub y: usize,
    pub seed: u64,
    pub fixed_re: f64,
    pub fixed_im: f64,
    pub analytic_re: f64,
    pub analytic_im: f64,
    /// Per-sample values `e^{-2i(φ_x-φ_y)} ω_0(0)`.
    pub samples: Vec<(f64, f64)>,
    pub mean_re: f64,
    pub mean_im: f64,
    pub stderr: f64,
    pub cross_checks: Vec<CovarianceCheck>,
    pub cross_check_max_error: f64,
    pub convergence: Vec<ConvergencePoint>,
    pub verdict: bool,
}

/// Mean and standard error of complex samples; the error is
/// `sqrt(sum |z - mean|^2 / (n (n - 1)))`.
pub fn complex_mean_stderr(z: &[Complex]) -> (Complex, f64) {
    let n = z.len();
    if n == 0 {
        return (Complex::new(0.0, 0.0), 0.0);
    }
    let mean: Complex = z.iter().sum::<Complex>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = z.iter().map(|v| (v - mean).norm_sqr()).sum();
    (mean, (ss / (n as f64 * (n as f64 - 1.0))).sqrt())
}

pub struct OrbitOptions {
    pub n_samples: usize,
    pub n_cross_checks: usize,
    /// Largest `k` in the `100 * 2^k` convergence ladder.
    pub convergence_doublings: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions {
            n_samples: 200,
            n_cross_checks: 8,
            convergence_doublings: 7,
            seed: 0,
            exec: Exec::Parallel,
        }
    }
}

/// Average of the pair correlation over the gauge orbit of `Ã = 0`.
pub fn orbit_average(
    lat: &Arc<Lattice>,
    params: &ModelParams,
    x: usize,
    y: usize,
    opts: &OrbitOptions,
    zero_ground: Option<&SpectralData>,
) -> Result<OrbitReport, ExperimentError> {
    let owned;
    let zg = match zero_ground {
        Some(g) => g,
        None => {
            owned = ground_state(lat, params, &GaugeField::zero(lat), opts.exec)?;
            &owned
        }
    };
    let fixed = pair_correlation(lat, zg, x, y)?;
    let analytic = if x == y { fixed } else { Complex::new(0.0, 0.0) };
    let draw = |k: u64| covariance_phase(&SitePhases::random(lat, opts.seed, k), x, y) * fixed;
    let samples: Vec<Complex> = (0..opts.n_samples as u64).map(draw).collect();
    let (mean, stderr) = complex_mean_stderr(&samples);

    let mut convergence = Vec::new();
    for k in 0..=opts.convergence_doublings {
        let n = 100usize << k;
        let z: Vec<Complex> = (0..n as u64).map(draw).collect();
        let (m, s) = complex_mean_stderr(&z);
        convergence.push(ConvergencePoint {
            n,
            abs_mean: m.norm(),
            stderr: s,
        });
    }

    let cross = phase_covariance(
        lat,
        params,
        x,
        y,
        opts.n_cross_checks,
        opts.seed,
        opts.exec,
        Some(zg),
    )?;
    let verdict = if x == y {
        (mean - fixed).norm() <= COVARIANCE_TOL && cross.verdict
    } else {
        mean.norm() <= 4.0 * stderr && cross.verdict
    };
    Ok(OrbitReport {
        lattice: LatticeInfo::of(lat),
        x,
        y,
        seed: opts.seed,
        fixed_re: fixed.re,
        fixed_im: fixed.im,
        analytic_re: analytic.re,
        analytic_im: analytic.im,
        samples: samples.iter().map(|z| (z.re, z.im)).collect(),
        mean_re: mean.re,
        mean_im: mean.im,
        stderr,
        cross_check_max_error: cross.max_error,
        cross_checks: cross.checks,
        convergence,
        verdict,
    })
}

/// `ω_0(a†_{x↑} a†_{x↓} e^{2iÃ[γ]} a_{y↓} a_{y↑})` in a precomputed ground state.
pub fn string_value(
    lat: &Lattice,
    ground: &SpectralData,
    tilde: &GaugeField,
    path: &Path,
) -> Result<Complex, ExperimentError> {
    path.validate(lat)?;
    let phase = Complex::from_polar(1.0, 2.0 * tilde.string_phase(path)?);
    Ok(phase * pair_correlation(lat, ground, path.start, path.end(lat))?)
}

pub fn string_correlation(
    lat: &Lattice,
    params: &ModelParams,
    tilde: &GaugeField,
    path: &Path,
    exec: Exec,
) -> Result<Complex, ExperimentError> {
    path.validate(lat)?;
    let g = ground_state(lat, params, tilde, exec)?;
    string_value(lat, &g, tilde, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringValue {
    pub x: usize,
    pub y: usize,
    pub path: Vec<usize>,
    pub bonds: String,
    pub re: f64,
    pub im: f64,
    pub reference_re: f64,
    pub reference_im: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringReport {
    pub lattice: LatticeInfo,
    pub seed: u64,
    pub values: Vec<StringValue>,
    pub max_error: f64,
    pub min_paths_per_pair: usize,
    pub verdict: bool,
}

/// String correlations under one pure gauge, for every `(x, y)` pair given,
/// along up to `paths_per_pair` distinct paths, compared with `ω_0(0)`.
pub fn string_check(
    lat: &Arc<Lattice>,
    params: &ModelParams,
    pairs: &[(usize, usize)],
    paths_per_pair: usize,
    seed: u64,
    exec: Exec,
    zero_ground: Option<&SpectralData>,
) -> Result<StringReport, ExperimentError> {
    let owned;
    let zg = match zero_ground {
        Some(g) => g,
        None => {
            owned = ground_state(lat, params, &GaugeField::zero(lat), exec)?;
            &owned
        }
    };
    let field = GaugeField::pure_gauge(lat, &SitePhases::random(lat, seed, 0));
    let gauged = ground_state(lat, params, &field, exec)?;
    let mut values = Vec::new();
    let mut min_paths = usize::MAX;
    for &(x, y) in pairs {
        let reference = pair_correlation(lat, zg, x, y)?;
        let max_len = 2 * lat.dim() * lat.side() + 2;
        let paths = enumerate_paths(lat, x, y, max_len, paths_per_pair);
        min_paths = min_paths.min(paths.len());
        for p in paths {
            let v = string_value(lat, &gauged, &field, &p)?;
            values.push(StringValue {
                x,
                y,
                path: p.vertices(lat),
                bonds: p.label(),
                re: v.re,
                im: v.im,
                reference_re: reference.re,
                reference_im: reference.im,
                error: (v - reference).norm(),
            });
        }
    }
    let max_error = values.iter().map(|v| v.error).fold(0.0, f64::max);
    let min_paths_per_pair = if pairs.is_empty() { 0 } else { min_paths };
    Ok(StringReport {
        lattice: LatticeInfo::of(lat),
        seed,
        values,
        max_error,
        min_paths_per_pair,
        verdict: max_error <= COVARIANCE_TOL && min_paths_per_pair >= 3.min(paths_per_pair),
    })
}

/// Total particle number operator.
pub fn total_number(lat: &Lattice) -> FockOperator {
    FockOperator::total_up(lat.n_modes())
        .add(&FockOperator::total_dn(lat.n_modes()))
        .expect("same mode count")
}
