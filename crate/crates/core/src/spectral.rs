//! Sector-blocked exact diagonalization, partition functions and
//! ground/thermal expectations.

use crate::fock::{Complex, FockError, FockOperator, ZERO};
use crate::lattice::Lattice;
use crate::model::HamiltonianBundle;
use crate::par::{self, Exec};
use crate::sectors::{
    all_sectors, block, check_block_diagonal, has_particle_hole_symmetry, has_spin_flip_symmetry,
    sector_dim, spin_flip_halves, Sector,
};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::Once;
use thiserror::Error;

pub const HERMITIAN_TOL: f64 = 1e-13;
pub const GROUND_TOL_FLOOR: f64 = 1e-9;
pub const GROUND_TOL_REL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("operator is not Hermitian (relative error {0:e})")]
    NotHermitian(f64),
    #[error("eigensolver failed in sector {0}")]
    Eigensolver(String),
    #[error("ground degeneracy is ambiguous: {count} levels within {tol:e} of E0 but {half_count} within half that")]
    DegeneracyAmbiguous {
        tol: f64,
        count: usize,
        half_count: usize,
    },
    #[error("eigenvectors were not retained")]
    MissingVectors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorPolicy {
    None,
    Ground,
    All,
}

#[derive(Debug, Clone, Copy)]
pub struct DiagOptions {
    pub exec: Exec,
    /// Reuse spectra of sectors related by a verified symmetry.
    pub symmetry: bool,
    pub vectors: VectorPolicy,
}

impl Default for DiagOptions {
    fn default() -> Self {
        DiagOptions {
            exec: Exec::Parallel,
            symmetry: true,
            vectors: VectorPolicy::Ground,
        }
    }
}

impl DiagOptions {
    pub fn eigenvalues_only(exec: Exec) -> Self {
        DiagOptions {
            exec,
            symmetry: true,
            vectors: VectorPolicy::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    Direct,
    SpinFlipSplit,
    Mirror,
}

#[derive(Debug, Clone)]
pub struct SectorSpectrum {
    pub sector: Sector,
    /// Fermionic eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub source: SpectrumSource,
}

/// Eigenvectors of one sector, as columns over the sector's basis states.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub sector: Sector,
    pub states: Vec<u64>,
    pub values: Vec<f64>,
    pub vectors: Mat<Complex>,
}

#[derive(Debug, Clone)]
pub struct SpectralData {
    pub n_modes: usize,
    pub classical_shift: f64,
    pub sectors: Vec<SectorSpectrum>,
    e0_fermionic: f64,
    pub width: f64,
    pub ground_tol: f64,
    pub degeneracy: usize,
    half_tol_degeneracy: usize,
    ground: Vec<Eigenpairs>,
    all: Option<Vec<Eigenpairs>>,
    pub used_spin_flip: bool,
    pub used_particle_hole: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableValue {
    pub re: f64,
    pub im: f64,
    /// `None` for the ground state.
    pub beta: Option<f64>,
}

impl ObservableValue {
    pub fn value(&self) -> Complex {
        Complex::new(self.re, self.im)
    }

    /// Imaginary part within `1e-10 |value| + 1e-12`.
    pub fn is_real(&self) -> bool {
        self.im.abs() <= 1e-10 * self.value().norm() + 1e-12
    }
}

fn sequential_faer() {
    static INIT: Once = Once::new();
    INIT.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

fn eigenvalues(m: &Mat<Complex>, sector: Sector) -> Result<Vec<f64>, SpectralError> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut v = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| SpectralError::Eigensolver(sector.label()))?;
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn eigenpairs(op: &FockOperator, sector: Sector) -> Result<Eigenpairs, SpectralError> {
    let b = block(op, sector);
    let evd = b
        .matrix
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| SpectralError::Eigensolver(sector.label()))?;
    let values: Vec<f64> = evd.S().column_vector().iter().map(|c| c.re).collect();
    Ok(Eigenpairs {
        sector,
        states: b.states,
        values,
        vectors: evd.U().to_owned(),
    })
}

fn merge_sorted(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    a.extend(b);
    a.sort_by(f64::total_cmp);
    a
}

/// Parity sign per mode, for the particle-hole map.
pub fn mode_signs(lat: &Lattice) -> Vec<f64> {
    (0..lat.n_modes()).map(|m| lat.parity(m / 2).sign()).collect()
}

pub fn diagonalize(
    lat: &Lattice,
    bundle: &HamiltonianBundle,
    opts: DiagOptions,
) -> Result<SpectralData, SpectralError> {
    sequential_faer();
    let h = &bundle.fermionic;
    let herm = h.hermiticity_error();
    if herm > HERMITIAN_TOL {
        return Err(SpectralError::NotHermitian(herm));
    }
    check_block_diagonal(h)?;
    let n_sites = lat.n_sites();
    let sectors = all_sectors(n_sites);

    let mut all = None;
    let mut used_sf = false;
    let mut used_ph = false;
    let spectra: Vec<SectorSpectrum> = if opts.vectors == VectorPolicy::All {
        let pairs: Vec<Eigenpairs> = par::map(opts.exec, &sectors, |s| eigenpairs(h, *s))
            .into_iter()
            .collect::<Result<_, _>>()?;
        let spectra = pairs
            .iter()
            .map(|p| SectorSpectrum {
                sector: p.sector,
                eigenvalues: p.values.clone(),
                source: SpectrumSource::Direct,
            })
            .collect();
        all = Some(pairs);
        spectra
    } else {
        if opts.symmetry {
            used_sf = has_spin_flip_symmetry(h);
            used_ph = has_particle_hole_symmetry(h, &mode_signs(lat));
        }
        let representative = |s: Sector| {
            let mut orbit = vec![s];
            if used_sf {
                orbit.push(s.spin_flipped());
            }
            if used_ph {
                orbit.push(s.particle_hole(n_sites));
                if used_sf {
                    orbit.push(s.spin_flipped().particle_hole(n_sites));
                }
            }
            orbit.into_iter().min().unwrap()
        };
        let reps: Vec<Sector> = sectors
            .iter()
            .copied()
            .filter(|s| representative(*s) == *s)
            .collect();
        // largest blocks first so parallel workers finish together
        let mut order: Vec<usize> = (0..reps.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(sector_dim(n_sites, reps[i])));
        let solved: Vec<Result<(Vec<f64>, SpectrumSource), SpectralError>> =
            par::map(opts.exec, &order, |&i| {
                let s = reps[i];
                if used_sf && s.n_up == s.n_dn {
                    let (plus, minus) = spin_flip_halves(h, s);
                    Ok((
                        merge_sorted(eigenvalues(&plus, s)?, eigenvalues(&minus, s)?),
                        SpectrumSource::SpinFlipSplit,
                    ))
                } else {
                    Ok((eigenvalues(&block(h, s).matrix, s)?, SpectrumSource::Direct))
                }
            });
        let mut by_rep: Vec<Option<(Vec<f64>, SpectrumSource)>> = vec![None; reps.len()];
        for (k, r) in order.iter().zip(solved) {
            by_rep[*k] = Some(r?);
        }
        sectors
            .iter()
            .map(|s| {
                let r = representative(*s);
                let idx = reps.binary_search(&r).expect("representatives are sorted");
                let (vals, src) = by_rep[idx].clone().expect("every representative solved");
                SectorSpectrum {
                    sector: *s,
                    eigenvalues: vals,
                    source: if r == *s { src } else { SpectrumSource::Mirror },
                }
            })
            .collect()
    };

    let e0 = spectra
        .iter()
        .filter_map(|s| s.eigenvalues.first().copied())
        .fold(f64::INFINITY, f64::min);
    let top = spectra
        .iter()
        .filter_map(|s| s.eigenvalues.last().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let width = top - e0;
    let tol = GROUND_TOL_FLOOR.max(GROUND_TOL_REL * width);
    let count_within = |t: f64| -> usize {
        spectra
            .iter()
            .map(|s| s.eigenvalues.iter().take_while(|&&e| e <= e0 + t).count())
            .sum()
    };
    let degeneracy = count_within(tol);
    let half_tol_degeneracy = count_within(tol / 2.0);

    let ground = match (&all, opts.vectors) {
        (Some(pairs), _) => pairs
            .iter()
            .filter_map(|p| restrict_to_ground(p, e0 + tol))
            .collect(),
        (None, VectorPolicy::Ground) => {
            let hit: Vec<Sector> = spectra
                .iter()
                .filter(|s| s.eigenvalues.first().is_some_and(|&e| e <= e0 + tol))
                .map(|s| s.sector)
                .collect();
            let pairs: Vec<Eigenpairs> = par::map(opts.exec, &hit, |s| eigenpairs(h, *s))
                .into_iter()
                .collect::<Result<_, _>>()?;
            pairs
                .iter()
                .filter_map(|p| restrict_to_ground(p, e0 + tol))
                .collect()
        }
        _ => Vec::new(),
    };

    Ok(SpectralData {
        n_modes: h.n_modes(),
        classical_shift: bundle.classical_shift,
        sectors: spectra,
        e0_fermionic: e0,
        width,
        ground_tol: tol,
        degeneracy,
        half_tol_degeneracy,
        ground,
        all,
        used_spin_flip: used_sf,
        used_particle_hole: used_ph,
    })
}

fn restrict_to_ground(p: &Eigenpairs, cut: f64) -> Option<Eigenpairs> {
    let keep: Vec<usize> = (0..p.values.len()).filter(|&k| p.values[k] <= cut).collect();
    if keep.is_empty() {
        return None;
    }
    let vectors = Mat::from_fn(p.states.len(), keep.len(), |i, j| p.vectors[(i, keep[j])]);
    Some(Eigenpairs {
        sector: p.sector,
        states: p.states.clone(),
        values: keep.iter().map(|&k| p.values[k]).collect(),
        vectors,
    })
}

/// `ln sum_k exp(-beta e_k)` accumulated in slice order.
pub fn log_sum_exp_neg(values: impl Iterator<Item = f64> + Clone, beta: f64) -> f64 {
    let min = values.clone().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return f64::NEG_INFINITY;
    }
    let s: f64 = values.map(|e| (-beta * (e - min)).exp()).sum();
    -beta * min + s.ln()
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.sectors.iter().map(|s| s.eigenvalues.len()).sum()
    }

    pub fn e0_fermionic(&self) -> f64 {
        self.e0_fermionic
    }

    /// Lowest eigenvalue including the classical shift.
    pub fn e0(&self) -> f64 {
        self.e0_fermionic + self.classical_shift
    }

    fn fermionic_values(&self) -> impl Iterator<Item = f64> + Clone + '_ {
        self.sectors.iter().flat_map(|s| s.eigenvalues.iter().copied())
    }

    /// All eigenvalues with the shift, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.fermionic_values().map(|e| e + self.classical_shift).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn fermionic_eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.fermionic_values().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `ln Tr exp(-beta H_fermionic)`.
    pub fn log_z_fermionic(&self, beta: f64) -> f64 {
        log_sum_exp_neg(self.fermionic_values(), beta)
    }

    /// `ln Tr exp(-beta (H_fermionic + shift))`.
    pub fn log_z(&self, beta: f64) -> f64 {
        self.log_z_fermionic(beta) - beta * self.classical_shift
    }

    pub fn is_ambiguous(&self) -> bool {
        self.degeneracy != self.half_tol_degeneracy
    }

    pub fn ground_vectors(&self) -> &[Eigenpairs] {
        &self.ground
    }

    /// `Tr(P O) / Tr(P)` over the ground space.
    pub fn ground_expectation(&self, obs: &FockOperator) -> Result<ObservableValue, SpectralError> {
        if self.is_ambiguous() {
            return Err(SpectralError::DegeneracyAmbiguous {
                tol: self.ground_tol,
                count: self.degeneracy,
                half_count: self.half_tol_degeneracy,
            });
        }
        let held: usize = self.ground.iter().map(|p| p.values.len()).sum();
        if held == 0 {
            return Err(SpectralError::MissingVectors);
        }
        if held != self.degeneracy {
            return Err(SpectralError::DegeneracyAmbiguous {
                tol: self.ground_tol,
                count: self.degeneracy,
                half_count: held,
            });
        }
        let mut scratch = vec![ZERO; obs.dim()];
        let mut acc = ZERO;
        for p in &self.ground {
            for k in 0..p.values.len() {
                let amps: Vec<Complex> = (0..p.states.len()).map(|i| p.vectors[(i, k)]).collect();
                acc += obs.expectation_sparse(&p.states, &amps, &mut scratch);
            }
        }
        let v = acc / held as f64;
        Ok(ObservableValue {
            re: v.re,
            im: v.im,
            beta: None,
        })
    }

    /// Gibbs average; needs [`VectorPolicy::All`].
    pub fn thermal_expectation(
        &self,
        obs: &FockOperator,
        beta: f64,
    ) -> Result<ObservableValue, SpectralError> {
        let pairs = self.all.as_ref().ok_or(SpectralError::MissingVectors)?;
        let e0 = self.e0_fermionic;
        let mut scratch = vec![ZERO; obs.dim()];
        let mut num = ZERO;
        let mut den = 0.0;
        for p in pairs {
            for k in 0..p.values.len() {
                let w = (-beta * (p.values[k] - e0)).exp();
                if w == 0.0 {
                    continue;
                }
                let amps: Vec<Complex> = (0..p.states.len()).map(|i| p.vectors[(i, k)]).collect();
                num += obs.expectation_sparse(&p.states, &amps, &mut scratch) * w;
                den += w;
            }
        }
        let v = num / den;
        Ok(ObservableValue {
            re: v.re,
            im: v.im,
            beta: Some(beta),
        })
    }

    /// CSV rows `sector,index,eigenvalue` with the shift included.
    pub fn to_csv(&self, header_comment: &str) -> String {
        let mut out = String::new();
        if !header_comment.is_empty() {
            let _ = writeln!(out, "# {header_comment}");
        }
        out.push_str("sector,index,eigenvalue\n");
        for s in &self.sectors {
            for (k, e) in s.eigenvalues.iter().enumerate() {
                let _ = writeln!(out, "{},{},{:?}", s.sector.label(), k, e + self.classical_shift);
            }
        }
        out
    }
}
