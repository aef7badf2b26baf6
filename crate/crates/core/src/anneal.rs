//! Simulated annealing of the total free energy over gauge fields.
//!
//! Works in the shifted variables `Ã`; convergence is judged by plaquette
//! fluxes, which do not see the pure-gauge directions.

use crate::gauge::{normalize_angle, GaugeField};
use crate::lattice::Lattice;
use crate::model::{build_full, flux_energy, FluxConvention, ModelParams};
use crate::par::{self, Exec};
use crate::rng;
use crate::spectral::{diagonalize, DiagOptions, SpectralError, VectorPolicy};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnealError {
    #[error("{key}: {message}")]
    Constraint { key: &'static str, message: String },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AnnealStart {
    #[default]
    Random,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub beta_physical: f64,
    pub t_initial: f64,
    pub t_final: f64,
    pub cooling: f64,
    pub sweeps_per_temp: usize,
    pub proposal_width: f64,
    pub restarts: usize,
    pub seed: u64,
    pub start: AnnealStart,
    pub converge_tol: f64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            beta_physical: 2.0,
            t_initial: 1.0,
            t_final: 1e-3,
            cooling: 0.95,
            sweeps_per_temp: 200,
            proposal_width: 0.5,
            restarts: 20,
            seed: 0,
            start: AnnealStart::Random,
            converge_tol: 0.1,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<(), Vec<AnnealError>> {
        let mut errs = Vec::new();
        let mut bad = |key: &'static str, message: String| {
            errs.push(AnnealError::Constraint { key, message })
        };
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            bad("cooling", format!("must lie in (0, 1), got {}", self.cooling));
        }
        if !(self.proposal_width > 0.0 && self.proposal_width <= std::f64::consts::PI) {
            bad(
                "proposal_width",
                format!("must lie in (0, pi], got {}", self.proposal_width),
            );
        }
        if !(self.t_initial > 0.0 && self.t_final > 0.0 && self.t_final <= self.t_initial) {
            bad(
                "t_final",
                format!(
                    "need 0 < t_final <= t_initial, got {} and {}",
                    self.t_final, self.t_initial
                ),
            );
        }
        if !(self.beta_physical > 0.0 && self.beta_physical.is_finite()) {
            bad("beta_physical", format!("must be > 0, got {}", self.beta_physical));
        }
        if self.sweeps_per_temp == 0 {
            bad("sweeps_per_temp", "must be positive".into());
        }
        if self.restarts == 0 {
            bad("restarts", "must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub fn temperatures(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut t = self.t_initial;
        // small slack so the final temperature is reached despite rounding
        while t >= self.t_final * (1.0 - 1e-12) {
            out.push(t);
            t *= self.cooling;
        }
        out
    }
}

/// `-(1/β) ln Tr exp(-β H̄_f(Ã)) - K sum cos F~`.
pub fn objective(lat: &Lattice, params: &ModelParams, tilde: &GaugeField, beta: f64) -> Result<f64, SpectralError> {
    let classical = flux_energy(tilde, params.k, FluxConvention::Barred);
    if params.kappa == 0.0 && params.g == 0.0 {
        return Ok(-(lat.n_modes() as f64) * 2f64.ln() / beta + classical);
    }
    let bundle = build_full(lat, params, tilde);
    let spec = diagonalize(
        lat,
        &bundle,
        DiagOptions {
            exec: Exec::Sequential,
            symmetry: lat.n_modes() > 8,
            vectors: VectorPolicy::None,
        },
    )?;
    Ok(-spec.log_z_fermionic(beta) / beta + classical)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: usize,
    pub temperature: f64,
    pub objective: f64,
    pub flux_distance: f64,
    pub best_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartResult {
    pub restart: usize,
    pub best_objective: f64,
    pub flux_distance: f64,
    pub converged: bool,
    pub accepted: usize,
    pub proposed: usize,
    pub trace: Vec<TracePoint>,
    pub best_angles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealResult {
    pub restarts: Vec<RestartResult>,
    pub best_restart: usize,
    pub best_objective: f64,
    pub flux_distance: f64,
    pub restarts_converged: usize,
    pub zero_objective: f64,
    /// Largest `objective(0) - objective(start)` over restart starting
    /// fields; never positive when the zero field is optimal.
    pub zero_vs_start_worst: f64,
}

impl AnnealResult {
    pub fn best_field(&self, lat: &Arc<Lattice>) -> GaugeField {
        let angles = &self.restarts[self.best_restart].best_angles;
        GaugeField::from_fn(lat, |b| angles[lat.bond_id(b)])
    }

    pub fn converged_fraction(&self) -> f64 {
        self.restarts_converged as f64 / self.restarts.len() as f64
    }
}

fn run_restart(
    lat: &Arc<Lattice>,
    params: &ModelParams,
    cfg: &AnnealConfig,
    restart: usize,
) -> Result<(RestartResult, f64), SpectralError> {
    let mut r = rng::stream(cfg.seed, restart as u64);
    let mut field = match cfg.start {
        AnnealStart::Random => GaugeField::random_stream(lat, cfg.seed ^ 0x5eed_f1e1d, restart as u64),
        AnnealStart::Zero => GaugeField::zero(lat),
    };
    let beta = cfg.beta_physical;
    let mut current = objective(lat, params, &field, beta)?;
    let start_objective = current;
    let mut best = current;
    let mut best_field = field.clone();
    let mut trace = Vec::new();
    let mut step = 0;
    let (mut accepted, mut proposed) = (0, 0);
    let bonds: Vec<_> = lat.bonds().collect();
    for t in cfg.temperatures() {
        for _ in 0..cfg.sweeps_per_temp {
            for &b in &bonds {
                let old = field.angle(b);
                let delta = cfg.proposal_width * (2.0 * r.random::<f64>() - 1.0);
                field.set(b, normalize_angle(old + delta));
                let next = objective(lat, params, &field, beta)?;
                proposed += 1;
                let accept = next <= current || r.random::<f64>() < (-(next - current) / t).exp();
                if accept {
                    accepted += 1;
                    current = next;
                    if current < best {
                        best = current;
                        best_field = field.clone();
                    }
                } else {
                    field.set(b, old);
                }
                step += 1;
            }
        }
        trace.push(TracePoint {
            step,
            temperature: t,
            objective: current,
            flux_distance: field.flux_distance(),
            best_objective: best,
        });
    }
    let flux_distance = best_field.flux_distance();
    Ok((
        RestartResult {
            restart,
            best_objective: best,
            flux_distance,
            converged: flux_distance <= cfg.converge_tol,
            accepted,
            proposed,
            trace,
            best_angles: best_field.angles().to_vec(),
        },
        start_objective,
    ))
}

pub fn run_anneal(
    lat: &Arc<Lattice>,
    params: &ModelParams,
    cfg: &AnnealConfig,
    exec: Exec,
) -> Result<AnnealResult, AnnealError> {
    cfg.validate().map_err(|mut e| e.remove(0))?;
    let idx: Vec<usize> = (0..cfg.restarts).collect();
    let runs: Vec<Result<(RestartResult, f64), SpectralError>> =
        par::map(exec, &idx, |&k| run_restart(lat, params, cfg, k));
    let mut restarts = Vec::new();
    let mut starts = Vec::new();
    for r in runs {
        let (res, s) = r?;
        restarts.push(res);
        starts.push(s);
    }
    let zero_objective = objective(lat, params, &GaugeField::zero(lat), cfg.beta_physical)?;
    let best_restart = (0..restarts.len())
        .min_by(|&a, &b| restarts[a].best_objective.total_cmp(&restarts[b].best_objective))
        .expect("at least one restart");
    Ok(AnnealResult {
        best_objective: restarts[best_restart].best_objective,
        flux_distance: restarts[best_restart].flux_distance,
        restarts_converged: restarts.iter().filter(|r| r.converged).count(),
        best_restart,
        zero_vs_start_worst: starts
            .iter()
            .map(|s| zero_objective - s)
            .fold(f64::NEG_INFINITY, f64::max),
        zero_objective,
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::SitePhases;

    fn lat2() -> Arc<Lattice> {
        Arc::new(Lattice::new(2, 1).unwrap())
    }

    #[test]
    fn config_validation() {
        let mut c = AnnealConfig::default();
        assert!(c.validate().is_ok());
        c.cooling = 1.0;
        c.proposal_width = 4.0;
        let keys: Vec<_> = c
            .validate()
            .unwrap_err()
            .into_iter()
            .map(|e| match e {
                AnnealError::Constraint { key, .. } => key,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(keys, vec!["cooling", "proposal_width"]);
    }

    #[test]
    fn schedule_reaches_final_temperature() {
        let c = AnnealConfig {
            t_initial: 1.0,
            t_final: 0.125,
            cooling: 0.5,
            ..Default::default()
        };
        assert_eq!(c.temperatures(), vec![1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn objective_is_gauge_invariant() {
        let lat = lat2();
        let p = ModelParams::default();
        let t = GaugeField::random(&lat, 12);
        let shifted = t
            .add(&GaugeField::pure_gauge(&lat, &SitePhases::random(&lat, 1, 1)))
            .unwrap();
        let a = objective(&lat, &p, &t, 2.0).unwrap();
        let b = objective(&lat, &p, &shifted, 2.0).unwrap();
        assert!((a - b).abs() < 1e-10);
        assert!(objective(&lat, &p, &GaugeField::zero(&lat), 2.0).unwrap() <= a);
    }

    #[test]
    fn zero_start_stays_put_without_couplings() {
        let lat = lat2();
        let p = ModelParams::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let cfg = AnnealConfig {
            start: AnnealStart::Zero,
            restarts: 2,
            sweeps_per_temp: 2,
            cooling: 0.5,
            ..Default::default()
        };
        let r = run_anneal(&lat, &p, &cfg, Exec::Sequential).unwrap();
        assert_eq!(r.flux_distance, 0.0);
        assert_eq!(r.best_objective, r.zero_objective);
        for run in &r.restarts {
            assert!(run.trace.windows(2).all(|w| w[1].best_objective <= w[0].best_objective));
        }
    }
}
