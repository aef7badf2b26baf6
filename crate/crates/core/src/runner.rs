//! Experiment orchestration and report emission.
//!
//! Each run produces `summary.json` plus one or more CSV tables. CSVs start
//! with a `#` comment naming the report schema, config hash and experiment;
//! they carry no wall-clock data, so reruns are byte-identical. The JSON
//! summary isolates timestamp and git description under `header`.

use crate::anneal::{run_anneal, AnnealError, AnnealStart};
use crate::config::{Experiment, FieldChoice, RunConfig};
use crate::experiments::{
    ground_state, orbit_average, pair_correlation, phase_covariance, string_check, theorem_sweep,
    ExperimentError, LatticeInfo, OrbitOptions, MARGIN_TOL,
};
use crate::gauge::GaugeField;
use crate::lattice::Lattice;
use crate::model::{build_full, ModelParams};
use crate::par::{self, Exec};
use crate::spectral::{diagonalize, DiagOptions, SpectralError};
use crate::transforms::{verify_all, IdentityKind, TransformError, IDENTITY_TOL};
use serde::Serialize;
use serde_json::{json, Value};
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

pub const REPORT_SCHEMA: &str = "fluxlab-report-v1";
/// Fraction of restarts that must reach the flux target for an anneal run to pass.
pub const ANNEAL_PASS_FRACTION: f64 = 0.8;
pub const CONVERGENCE_DOUBLINGS: usize = 7;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{experiment}: {source}")]
    Experiment {
        experiment: Experiment,
        source: ExperimentError,
    },
    #[error("{experiment}: {source}")]
    Transform {
        experiment: Experiment,
        source: TransformError,
    },
    #[error("{experiment}: {source}")]
    Anneal {
        experiment: Experiment,
        source: AnnealError,
    },
    #[error("{experiment}: {source}")]
    Spectral {
        experiment: Experiment,
        source: SpectralError,
    },
    #[error("config names experiment `{config}` but `{requested}` was requested")]
    ExperimentMismatch {
        config: Experiment,
        requested: Experiment,
    },
    #[error("writing {path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub content: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub experiment: Experiment,
    pub config_hash: String,
    pub verdict: bool,
    pub summary: Value,
    pub tables: Vec<Table>,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        if self.verdict {
            0
        } else {
            2
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub timestamp_unix: u64,
    pub git_describe: String,
    pub threads: usize,
}

impl Header {
    pub fn capture() -> Self {
        let timestamp_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let git_describe = std::process::Command::new("git")
            .args(["describe", "--always", "--dirty", "--tags"])
            .output()
            .ok()
            .filter(|o| o.status.success())
            .and_then(|o| String::from_utf8(o.stdout).ok())
            .map(|s| s.trim().to_string())
            .unwrap_or_else(|| "unknown".into());
        Header {
            timestamp_unix,
            git_describe,
            threads: par::current_threads(),
        }
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    experiment: Experiment,
    hash: &'a str,
    lat: Arc<Lattice>,
    exec: Exec,
}

impl Ctx<'_> {
    fn comment(&self) -> String {
        format!(
            "# schema={REPORT_SCHEMA} config_hash={} experiment={}\n",
            self.hash, self.experiment
        )
    }

    fn table<R: Serialize>(&self, name: &str, rows: &[R]) -> Table {
        let mut w = csv::Writer::from_writer(self.comment().into_bytes());
        for r in rows {
            w.serialize(r).expect("in-memory csv write");
        }
        let bytes = w.into_inner().expect("in-memory csv flush");
        Table {
            name: name.to_string(),
            content: String::from_utf8(bytes).expect("csv output is utf-8"),
        }
    }

    fn exp_err(&self, source: ExperimentError) -> RunError {
        RunError::Experiment {
            experiment: self.experiment,
            source,
        }
    }

    fn spec_err(&self, source: SpectralError) -> RunError {
        RunError::Spectral {
            experiment: self.experiment,
            source,
        }
    }

    fn site(&self, coord: &[i32]) -> usize {
        self.lat.site_index(coord).expect("validated at parse time")
    }
}

/// Runs one experiment and returns its summary and tables without touching
/// the filesystem.
pub fn run(cfg: &RunConfig, experiment: Experiment, exec: Exec) -> Result<RunOutput, RunError> {
    if let Some(c) = cfg.experiment {
        if c != experiment {
            return Err(RunError::ExperimentMismatch {
                config: c,
                requested: experiment,
            });
        }
    }
    let hash = cfg.hash();
    let ctx = Ctx {
        cfg,
        experiment,
        hash: &hash,
        lat: Arc::new(cfg.lattice()),
        exec,
    };
    let (verdict, result, tables) = match experiment {
        Experiment::Identities => identities(&ctx)?,
        Experiment::CheckTheorem => check_theorem(&ctx)?,
        Experiment::GroundEnergy => ground_energy(&ctx)?,
        Experiment::Correlations => correlations(&ctx)?,
        Experiment::OrbitAverage => orbit(&ctx)?,
        Experiment::String => string(&ctx)?,
        Experiment::Anneal => anneal(&ctx)?,
        Experiment::Spectrum => spectrum(&ctx)?,
    };
    let summary = json!({
        "schema": REPORT_SCHEMA,
        "config_hash": hash,
        "experiment": experiment.name(),
        "lattice": LatticeInfo::of(&ctx.lat),
        "params": cfg.params,
        "seed": cfg.seed,
        "rng": "chacha20, one stream per (seed, index)",
        "tolerances": {
            "identity": IDENTITY_TOL,
            "margin": MARGIN_TOL,
            "covariance": crate::experiments::COVARIANCE_TOL,
        },
        "config": cfg,
        "verdict": verdict,
        "result": result,
        "files": tables.iter().map(|t| t.name.clone()).collect::<Vec<_>>(),
    });
    Ok(RunOutput {
        experiment,
        config_hash: hash,
        verdict,
        summary,
        tables,
    })
}

/// Writes `summary.json` and every table into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, out: &RunOutput, header: &Header) -> Result<(), RunError> {
    let io_err = |p: &Path| {
        let path = p.display().to_string();
        move |source| RunError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for t in &out.tables {
        let p = dir.join(&t.name);
        fs::write(&p, &t.content).map_err(io_err(&p))?;
    }
    let mut doc = serde_json::Map::new();
    doc.insert("header".into(), serde_json::to_value(header).expect("header serializes"));
    if let Value::Object(m) = &out.summary {
        for (k, v) in m {
            doc.insert(k.clone(), v.clone());
        }
    }
    let p = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&Value::Object(doc)).expect("summary serializes") + "\n";
    fs::write(&p, text).map_err(io_err(&p))?;
    Ok(())
}

type Outcome = (bool, Value, Vec<Table>);

#[derive(Serialize)]
struct IdentityRow {
    kappa: f64,
    g: f64,
    stream: u64,
    kind: &'static str,
    max_error: f64,
    pass: bool,
}

fn identities(ctx: &Ctx) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let jobs: Vec<(f64, f64, u64)> = cfg
        .identity_couplings
        .iter()
        .flat_map(|&(kappa, g)| (0..cfg.identity_seeds as u64).map(move |s| (kappa, g, s)))
        .collect();
    let results = par::map(ctx.exec, &jobs, |&(kappa, g, s)| {
        let params = ModelParams { kappa, g, ..cfg.params };
        let field = GaugeField::random_stream(&ctx.lat, cfg.seed, s);
        verify_all(&ctx.lat, &params, &field, Exec::Sequential)
    });
    let mut rows = Vec::new();
    for (&(kappa, g, stream), r) in jobs.iter().zip(results) {
        let reports = r.map_err(|source| RunError::Transform {
            experiment: ctx.experiment,
            source,
        })?;
        rows.extend(reports.into_iter().map(|rep| IdentityRow {
            kappa,
            g,
            stream,
            kind: rep.kind.name(),
            max_error: rep.max_error,
            pass: rep.pass,
        }));
    }
    let kinds: Vec<Value> = IdentityKind::ALL
        .iter()
        .map(|k| {
            let mine = rows.iter().filter(|r| r.kind == k.name());
            let max_error = mine.clone().map(|r| r.max_error).fold(0.0, f64::max);
            let pass = mine.clone().count() > 0 && mine.clone().all(|r| r.pass);
            json!({"kind": k.name(), "max_error": max_error, "pass": pass})
        })
        .collect();
    let verdict = kinds.iter().all(|k| k["pass"] == true);
    let result = json!({
        "kinds": kinds,
        "couplings": cfg.identity_couplings,
        "fields_per_coupling": cfg.identity_seeds,
        "checks": rows.len(),
    });
    Ok((verdict, result, vec![ctx.table("identities.csv", &rows)]))
}

#[derive(Serialize)]
struct MarginRow {
    kind: &'static str,
    stream: u64,
    beta: f64,
    log_z_tilde: f64,
    log_z_zero: f64,
    margin: f64,
}

#[derive(Serialize)]
struct EnergyRow {
    kind: &'static str,
    stream: u64,
    e0_tilde: f64,
    e0_zero: f64,
    gap: f64,
}

fn check_theorem(ctx: &Ctx) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let (t, _) = theorem_sweep(&ctx.lat, &cfg.params, cfg.samples, &cfg.betas, cfg.seed, ctx.exec)
        .map_err(|e| ctx.exp_err(e))?;
    let rows: Vec<MarginRow> = t
        .samples
        .iter()
        .map(|s| MarginRow {
            kind: s.kind.name(),
            stream: s.stream,
            beta: s.beta,
            log_z_tilde: s.log_z_tilde,
            log_z_zero: s.log_z_zero,
            margin: s.margin,
        })
        .collect();
    let result = json!({
        "betas": t.betas,
        "random_fields": cfg.samples,
        "min_margin": t.min_margin,
        "pure_gauge_max_abs_margin": t.pure_gauge_max_abs_margin,
    });
    Ok((t.verdict, result, vec![ctx.table("theorem_margins.csv", &rows)]))
}

fn ground_energy(ctx: &Ctx) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let (_, g) = theorem_sweep(&ctx.lat, &cfg.params, cfg.samples, &[], cfg.seed, ctx.exec)
        .map_err(|e| ctx.exp_err(e))?;
    let rows: Vec<EnergyRow> = g
        .samples
        .iter()
        .map(|s| EnergyRow {
            kind: s.kind.name(),
            stream: s.stream,
            e0_tilde: s.e0_tilde,
            e0_zero: s.e0_zero,
            gap: s.gap,
        })
        .collect();
    let result = json!({
        "random_fields": cfg.samples,
        "min_gap": g.min_gap,
        "min_random_gap": g.min_random_gap,
    });
    Ok((g.verdict, result, vec![ctx.table("ground_energy.csv", &rows)]))
}

#[derive(Serialize)]
struct CovarianceRow {
    stream: u64,
    predicted_re: f64,
    predicted_im: f64,
    measured_re: f64,
    measured_im: f64,
    error: f64,
}

#[derive(Serialize)]
struct SiteRow {
    x: usize,
    y: usize,
    separation: f64,
    re: f64,
    im: f64,
    abs: f64,
}

/// Minimum-image Euclidean distance on the periodic box.
fn separation(lat: &Lattice, x: usize, y: usize) -> f64 {
    let side = lat.side() as i32;
    lat.coord(x)
        .iter()
        .zip(lat.coord(y))
        .map(|(a, b)| {
            let d = (a - b).rem_euclid(side);
            let d = d.min(side - d) as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn correlations(ctx: &Ctx) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let (x, y) = (ctx.site(&cfg.x), ctx.site(&cfg.y));
    let zero = ground_state(&ctx.lat, &cfg.params, &GaugeField::zero(&ctx.lat), ctx.exec)
        .map_err(|e| ctx.spec_err(e))?;
    let mut sites = Vec::new();
    for s in ctx.lat.sites() {
        let v = pair_correlation(&ctx.lat, &zero, x, s).map_err(|e| ctx.exp_err(e))?;
        sites.push(SiteRow {
            x,
            y: s,
            separation: separation(&ctx.lat, x, s),
            re: v.re,
            im: v.im,
            abs: v.norm(),
        });
    }
    let rep = phase_covariance(&ctx.lat, &cfg.params, x, y, cfg.phi_samples, cfg.seed, ctx.exec, Some(&zero))
        .map_err(|e| ctx.exp_err(e))?;
    let rows: Vec<CovarianceRow> = rep
        .checks
        .iter()
        .map(|c| CovarianceRow {
            stream: c.stream,
            predicted_re: c.predicted_re,
            predicted_im: c.predicted_im,
            measured_re: c.measured_re,
            measured_im: c.measured_im,
            error: c.error,
        })
        .collect();
    let result = json!({
        "x": x,
        "y": y,
        "zero_field_value": [rep.fixed_re, rep.fixed_im],
        "phi_samples": cfg.phi_samples,
        "max_error": rep.max_error,
        "ground_degeneracy": zero.degeneracy,
    });
    Ok((
        rep.verdict,
        result,
        vec![
            ctx.table("covariance.csv", &rows),
            ctx.table("site_correlations.csv", &sites),
        ],
    ))
}

#[derive(Serialize)]
struct SampleRow {
    sample: usize,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct ConvergenceRow {
    n: usize,
    abs_mean: f64,
    stderr: f64,
}

fn orbit(ctx: &Ctx) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let (x, y) = (ctx.site(&cfg.x), ctx.site(&cfg.y));
    let opts = OrbitOptions {
        n_samples: cfg.mc_samples,
        n_cross_checks: cfg.cross_checks,
        convergence_doublings: CONVERGENCE_DOUBLINGS,
        seed: cfg.seed,
        exec: ctx.exec,
    };
    let rep = orbit_average(&ctx.lat, &cfg.params, x, y, &opts, None).map_err(|e| ctx.exp_err(e))?;
    let samples: Vec<SampleRow> = rep
        .samples
        .iter()
        .enumerate()
        .map(|(sample, &(re, im))| SampleRow { sample, re, im })
        .collect();
    let conv: Vec<ConvergenceRow> = rep
        .convergence
        .iter()
        .map(|c| ConvergenceRow {
            n: c.n,
            abs_mean: c.abs_mean,
            stderr: c.stderr,
        })
        .collect();
    let cross: Vec<CovarianceRow> = rep
        .cross_checks
        .iter()
        .map(|c| CovarianceRow {
            stream: c.stream,
            predicted_re: c.predicted_re,
            predicted_im: c.predicted_im,
            measured_re: c.measured_re,
            measured_im: c.measured_im,
            error: c.error,
        })
        .collect();
    let result = json!({
        "x": x,
        "y": y,
        "zero_field_value": [rep.fixed_re, rep.fixed_im],
        "analytic": [rep.analytic_re, rep.analytic_im],
        "mc_mean": [rep.mean_re, rep.mean_im],
        "mc_stderr": rep.stderr,
        "mc_samples": cfg.mc_samples,
        "cross_check_max_error": rep.cross_check_max_error,
    });
    Ok((
        rep.verdict,
        result,
        vec![
            ctx.table("orbit_samples.csv", &samples),
            ctx.table("orbit_convergence.csv", &conv),
            ctx.table("orbit_cross_checks.csv", &cross),
        ],
    ))
}

#[derive(Serialize)]
struct StringRow {
    x: usize,
    y: usize,
    path: String,
    bonds: String,
    re: f64,
    im: f64,
    reference_re: f64,
    reference_im: f64,
    error: f64,
}

fn string(ctx: &Ctx) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let (x, y) = (ctx.site(&cfg.x), ctx.site(&cfg.y));
    let rep = string_check(&ctx.lat, &cfg.params, &[(x, y)], cfg.paths, cfg.seed, ctx.exec, None)
        .map_err(|e| ctx.exp_err(e))?;
    let rows: Vec<StringRow> = rep
        .values
        .iter()
        .map(|v| StringRow {
            x: v.x,
            y: v.y,
            path: v.path.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("-"),
            bonds: v.bonds.clone(),
            re: v.re,
            im: v.im,
            reference_re: v.reference_re,
            reference_im: v.reference_im,
            error: v.error,
        })
        .collect();
    let result = json!({
        "x": x,
        "y": y,
        "paths_requested": cfg.paths,
        "min_paths_per_pair": rep.min_paths_per_pair,
        "max_error": rep.max_error,
    });
    Ok((rep.verdict, result, vec![ctx.table("string.csv", &rows)]))
}

#[derive(Serialize)]
struct TraceRow {
    restart: usize,
    step: usize,
    temperature: f64,
    objective: f64,
    flux_distance: f64,
    best_objective: f64,
}

#[derive(Serialize)]
struct RestartRow {
    restart: usize,
    best_objective: f64,
    flux_distance: f64,
    converged: bool,
    accepted: usize,
    proposed: usize,
}

fn anneal(ctx: &Ctx) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let res = run_anneal(&ctx.lat, &cfg.params, &cfg.anneal, ctx.exec).map_err(|source| RunError::Anneal {
        experiment: ctx.experiment,
        source,
    })?;
    let trace: Vec<TraceRow> = res
        .restarts
        .iter()
        .flat_map(|r| {
            r.trace.iter().map(move |t| TraceRow {
                restart: r.restart,
                step: t.step,
                temperature: t.temperature,
                objective: t.objective,
                flux_distance: t.flux_distance,
                best_objective: t.best_objective,
            })
        })
        .collect();
    let restarts: Vec<RestartRow> = res
        .restarts
        .iter()
        .map(|r| RestartRow {
            restart: r.restart,
            best_objective: r.best_objective,
            flux_distance: r.flux_distance,
            converged: r.converged,
            accepted: r.accepted,
            proposed: r.proposed,
        })
        .collect();
    // with random starts, the zero field must beat every starting field
    let zero_consistent = cfg.anneal.start == AnnealStart::Zero || res.zero_vs_start_worst <= MARGIN_TOL;
    let verdict = zero_consistent && res.converged_fraction() >= ANNEAL_PASS_FRACTION;
    let best: Value = serde_json::from_str(&res.best_field(&ctx.lat).to_json()).expect("gauge json");
    let result = json!({
        "anneal": cfg.anneal,
        "temperatures": cfg.anneal.temperatures().len(),
        "restarts_converged": res.restarts_converged,
        "converged_fraction": res.converged_fraction(),
        "pass_fraction": ANNEAL_PASS_FRACTION,
        "best_restart": res.best_restart,
        "best_objective": res.best_objective,
        "flux_distance": res.flux_distance,
        "zero_objective": res.zero_objective,
        "zero_vs_start_worst": res.zero_vs_start_worst,
        "best_field": best,
    });
    Ok((
        verdict,
        result,
        vec![
            ctx.table("anneal_trace.csv", &trace),
            ctx.table("anneal_restarts.csv", &restarts),
        ],
    ))
}

#[derive(Serialize)]
struct SpectrumRow<'a> {
    sector: &'a str,
    index: usize,
    eigenvalue: f64,
}

fn spectrum(ctx: &Ctx) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let field = match cfg.field {
        FieldChoice::Zero => GaugeField::zero(&ctx.lat),
        FieldChoice::Random => GaugeField::random(&ctx.lat, cfg.seed),
        FieldChoice::PiFlux => GaugeField::pi_flux(&ctx.lat),
    };
    let spec = diagonalize(
        &ctx.lat,
        &build_full(&ctx.lat, &cfg.params, &field),
        DiagOptions::eigenvalues_only(ctx.exec),
    )
    .map_err(|e| ctx.spec_err(e))?;
    let labels: Vec<String> = spec.sectors.iter().map(|s| s.sector.label()).collect();
    let mut rows = Vec::with_capacity(spec.dim());
    for (s, label) in spec.sectors.iter().zip(&labels) {
        for (index, e) in s.eigenvalues.iter().enumerate() {
            rows.push(SpectrumRow {
                sector: label,
                index,
                eigenvalue: e + spec.classical_shift,
            });
        }
    }
    let log_z: Vec<Value> = cfg
        .betas
        .iter()
        .map(|&b| json!({"beta": b, "log_z": spec.log_z(b), "log_z_fermionic": spec.log_z_fermionic(b)}))
        .collect();
    let result = json!({
        "field": cfg.field,
        "dim": spec.dim(),
        "e0": spec.e0(),
        "classical_shift": spec.classical_shift,
        "ground_degeneracy": spec.degeneracy,
        "ground_tol": spec.ground_tol,
        "degeneracy_ambiguous": spec.is_ambiguous(),
        "used_spin_flip": spec.used_spin_flip,
        "used_particle_hole": spec.used_particle_hole,
        "log_z": log_z,
    });
    Ok((!spec.is_ambiguous(), result, vec![ctx.table("spectrum.csv", &rows)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn tables_carry_schema_and_hash() {
        let cfg = parse_config("[identities]\nseeds = 1\ncouplings = [[1.0, 1.0]]\n").unwrap();
        let out = run(&cfg, Experiment::Identities, Exec::Parallel).unwrap();
        assert!(out.verdict);
        let t = out.table("identities.csv").unwrap();
        let first = t.content.lines().next().unwrap();
        assert!(first.contains(REPORT_SCHEMA));
        assert!(first.contains(&out.config_hash));
        assert_eq!(t.content.lines().nth(1).unwrap(), "kappa,g,stream,kind,max_error,pass");
        assert_eq!(out.summary["result"]["kinds"].as_array().unwrap().len(), 7);
    }

    #[test]
    fn experiment_mismatch_is_an_error() {
        let cfg = parse_config("experiment = \"spectrum\"\n").unwrap();
        assert!(matches!(
            run(&cfg, Experiment::Anneal, Exec::Sequential),
            Err(RunError::ExperimentMismatch { .. })
        ));
    }

    #[test]
    fn separation_is_minimum_image() {
        let lat = Lattice::with_mode_cap(2, 2, 32).unwrap();
        let a = lat.site_index(&[-1, 0]).unwrap();
        let b = lat.site_index(&[2, 0]).unwrap();
        assert_eq!(separation(&lat, a, b), 1.0);
        assert_eq!(separation(&lat, a, a), 0.0);
    }
}
