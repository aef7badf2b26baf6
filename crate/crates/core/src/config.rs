//! Experiment configuration.
//!
//! A TOML document (or JSON when the text starts with `{`):
//!
//! ```toml
//! experiment = "check-theorem"     # optional; must match the subcommand
//!
//! [model]
//! d = 3
//! L = 1
//! kappa = 1.0
//! g = 1.0
//! K = 1.0
//! beta = 2.0
//!
//! [run]
//! seed = 7
//! samples = 50
//! betas = [0.5, 2.0, 8.0]
//! field = "zero"                   # spectrum: zero | random | pi-flux
//! threads = 4
//! out = "results"
//!
//! [correlation]
//! x = [0, 0, 0]
//! y = [1, 0, 0]
//! phi_samples = 20
//! mc_samples = 200
//! cross_checks = 8
//! paths = 3
//!
//! [identities]
//! seeds = 10
//! couplings = [[1.0, 1.0], [0.5, 2.0], [2.0, 0.5]]   # (kappa, g) pairs
//!
//! [anneal]
//! beta = 2.0
//! t_initial = 1.0
//! t_final = 0.001
//! cooling = 0.95
//! sweeps_per_temp = 200
//! proposal_width = 0.5
//! restarts = 20
//! start = "random"
//! converge_tol = 0.1
//! ```
//!
//! Every key is optional. Unknown keys and out-of-range values are all
//! collected and reported together.

use crate::anneal::{AnnealConfig, AnnealStart};
use crate::lattice::{Lattice, DEFAULT_MODE_CAP};
use crate::model::ModelParams;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

pub const CONFIG_SCHEMA: &str = "fluxlab-config-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Identities,
    CheckTheorem,
    GroundEnergy,
    Correlations,
    OrbitAverage,
    String,
    Anneal,
    Spectrum,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Identities,
        Experiment::CheckTheorem,
        Experiment::GroundEnergy,
        Experiment::Correlations,
        Experiment::OrbitAverage,
        Experiment::String,
        Experiment::Anneal,
        Experiment::Spectrum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Identities => "identities",
            Experiment::CheckTheorem => "check-theorem",
            Experiment::GroundEnergy => "ground-energy",
            Experiment::Correlations => "correlations",
            Experiment::OrbitAverage => "orbit-average",
            Experiment::String => "string",
            Experiment::Anneal => "anneal",
            Experiment::Spectrum => "spectrum",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldChoice {
    Zero,
    Random,
    PiFlux,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub params: ModelParams,
    pub seed: u64,
    pub samples: usize,
    pub betas: Vec<f64>,
    pub field: FieldChoice,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub x: Vec<i32>,
    pub y: Vec<i32>,
    pub phi_samples: usize,
    pub mc_samples: usize,
    pub cross_checks: usize,
    pub paths: usize,
    pub identity_seeds: usize,
    pub identity_couplings: Vec<(f64, f64)>,
    pub anneal: AnnealConfig,
}

impl RunConfig {
    fn defaults() -> Self {
        RunConfig {
            experiment: None,
            d: 2,
            l: 1,
            params: ModelParams::default(),
            seed: 0,
            samples: 50,
            betas: vec![0.5, 2.0, 8.0],
            field: FieldChoice::Zero,
            threads: None,
            out: None,
            x: Vec::new(),
            y: Vec::new(),
            phi_samples: 20,
            mc_samples: 200,
            cross_checks: 8,
            paths: 3,
            identity_seeds: 10,
            identity_couplings: vec![(1.0, 1.0), (0.5, 2.0), (2.0, 0.5)],
            anneal: AnnealConfig::default(),
        }
    }

    /// Overrides the run seed, which also seeds the annealer.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.anneal.seed = seed;
    }

    /// Hash of the effective configuration. Output location and thread
    /// count do not affect results, so they are left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.threads = None;
        config_hash(&serde_json::to_string(&c).expect("config serializes"))
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::with_mode_cap(self.d, self.l, DEFAULT_MODE_CAP).expect("validated at parse time")
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut c = RunConfig::defaults();
        c.x = vec![0; c.d];
        c.y = neighbor_coord(c.d);
        c
    }
}

fn neighbor_coord(d: usize) -> Vec<i32> {
    let mut y = vec![0; d];
    y[0] = 1;
    y
}

/// Hex SHA-256 of the raw config text.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct Reader {
    errors: Vec<ConfigError>,
}

impl Reader {
    fn err(&mut self, key: &str, message: impl Into<String>) {
        self.errors.push(ConfigError {
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn table<'a>(&mut self, root: &'a Map<String, Value>, key: &str, allowed: &[&str]) -> Option<&'a Map<String, Value>> {
        let v = root.get(key)?;
        let Some(t) = v.as_object() else {
            self.err(key, "expected a table");
            return None;
        };
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.err(&format!("{key}.{k}"), "unknown key");
            }
        }
        Some(t)
    }

    fn f64(&mut self, t: Option<&Map<String, Value>>, section: &str, key: &str, slot: &mut f64) {
        if let Some(v) = t.and_then(|t| t.get(key)) {
            match v.as_f64() {
                Some(x) => *slot = x,
                None => self.err(&format!("{section}.{key}"), "expected a number"),
            }
        }
    }

    fn uint(&mut self, t: Option<&Map<String, Value>>, section: &str, key: &str, slot: &mut usize) {
        if let Some(v) = t.and_then(|t| t.get(key)) {
            match v.as_u64() {
                Some(x) => *slot = x as usize,
                None => self.err(&format!("{section}.{key}"), "expected a non-negative integer"),
            }
        }
    }

    fn coords(&mut self, t: Option<&Map<String, Value>>, section: &str, key: &str) -> Option<Vec<i32>> {
        let v = t.and_then(|t| t.get(key))?;
        let parsed = v.as_array().and_then(|a| {
            a.iter()
                .map(|e| e.as_i64().and_then(|n| i32::try_from(n).ok()))
                .collect::<Option<Vec<i32>>>()
        });
        if parsed.is_none() {
            self.err(&format!("{section}.{key}"), "expected an array of integers");
        }
        parsed
    }
}

fn parse_document(text: &str) -> Result<Value, ConfigError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        serde_json::from_str(text).map_err(|e| ConfigError {
            key: "<document>".into(),
            message: format!("JSON parse error: {e}"),
        })
    } else {
        toml::from_str::<Value>(text).map_err(|e| ConfigError {
            key: "<document>".into(),
            message: format!("TOML parse error: {}", e.message()),
        })
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, Vec<ConfigError>> {
    let doc = parse_document(text).map_err(|e| vec![e])?;
    let Some(root) = doc.as_object() else {
        return Err(vec![ConfigError {
            key: "<document>".into(),
            message: "expected a table at top level".into(),
        }]);
    };
    let mut r = Reader { errors: Vec::new() };
    let mut c = RunConfig::defaults();

    for k in root.keys() {
        if !["schema", "experiment", "model", "run", "correlation", "identities", "anneal"].contains(&k.as_str()) {
            r.err(k, "unknown key");
        }
    }
    if let Some(v) = root.get("schema") {
        if v.as_str() != Some(CONFIG_SCHEMA) {
            r.err("schema", format!("expected \"{CONFIG_SCHEMA}\""));
        }
    }
    if let Some(v) = root.get("experiment") {
        match v.as_str().map(Experiment::from_str) {
            Some(Ok(e)) => c.experiment = Some(e),
            Some(Err(m)) => r.err("experiment", m),
            None => r.err("experiment", "expected a string"),
        }
    }

    let model = r.table(root, "model", &["d", "L", "kappa", "g", "K", "beta"]);
    r.uint(model, "model", "d", &mut c.d);
    r.uint(model, "model", "L", &mut c.l);
    r.f64(model, "model", "kappa", &mut c.params.kappa);
    r.f64(model, "model", "g", &mut c.params.g);
    r.f64(model, "model", "K", &mut c.params.k);
    r.f64(model, "model", "beta", &mut c.params.beta);

    let run = r.table(root, "run", &["seed", "samples", "betas", "field", "threads", "out"]);
    if let Some(v) = run.and_then(|t| t.get("seed")) {
        match v.as_u64() {
            Some(s) => c.seed = s,
            None => r.err("run.seed", "expected a non-negative integer"),
        }
    }
    r.uint(run, "run", "samples", &mut c.samples);
    if let Some(v) = run.and_then(|t| t.get("betas")) {
        match v
            .as_array()
            .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
        {
            Some(b) => c.betas = b,
            None => r.err("run.betas", "expected an array of numbers"),
        }
    }
    if let Some(v) = run.and_then(|t| t.get("field")) {
        match v.as_str() {
            Some("zero") => c.field = FieldChoice::Zero,
            Some("random") => c.field = FieldChoice::Random,
            Some("pi-flux") => c.field = FieldChoice::PiFlux,
            _ => r.err("run.field", "expected one of \"zero\", \"random\", \"pi-flux\""),
        }
    }
    if let Some(v) = run.and_then(|t| t.get("threads")) {
        match v.as_u64() {
            Some(n) if n > 0 => c.threads = Some(n as usize),
            _ => r.err("run.threads", "expected a positive integer"),
        }
    }
    if let Some(v) = run.and_then(|t| t.get("out")) {
        match v.as_str() {
            Some(s) => c.out = Some(PathBuf::from(s)),
            None => r.err("run.out", "expected a string"),
        }
    }

    let corr = r.table(
        root,
        "correlation",
        &["x", "y", "phi_samples", "mc_samples", "cross_checks", "paths"],
    );
    let x = r.coords(corr, "correlation", "x");
    let y = r.coords(corr, "correlation", "y");
    r.uint(corr, "correlation", "phi_samples", &mut c.phi_samples);
    r.uint(corr, "correlation", "mc_samples", &mut c.mc_samples);
    r.uint(corr, "correlation", "cross_checks", &mut c.cross_checks);
    r.uint(corr, "correlation", "paths", &mut c.paths);

    let ids = r.table(root, "identities", &["seeds", "couplings"]);
    r.uint(ids, "identities", "seeds", &mut c.identity_seeds);
    if let Some(v) = ids.and_then(|t| t.get("couplings")) {
        let parsed = v.as_array().and_then(|a| {
            a.iter()
                .map(|p| match p.as_array().map(|q| q.as_slice()) {
                    Some([k, g]) => Some((k.as_f64()?, g.as_f64()?)),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()
        });
        match parsed {
            Some(p) => c.identity_couplings = p,
            None => r.err("identities.couplings", "expected an array of [kappa, g] pairs"),
        }
    }

    let ann = r.table(
        root,
        "anneal",
        &[
            "beta",
            "t_initial",
            "t_final",
            "cooling",
            "sweeps_per_temp",
            "proposal_width",
            "restarts",
            "start",
            "converge_tol",
        ],
    );
    c.anneal.beta_physical = c.params.beta;
    r.f64(ann, "anneal", "beta", &mut c.anneal.beta_physical);
    r.f64(ann, "anneal", "t_initial", &mut c.anneal.t_initial);
    r.f64(ann, "anneal", "t_final", &mut c.anneal.t_final);
    r.f64(ann, "anneal", "cooling", &mut c.anneal.cooling);
    r.uint(ann, "anneal", "sweeps_per_temp", &mut c.anneal.sweeps_per_temp);
    r.f64(ann, "anneal", "proposal_width", &mut c.anneal.proposal_width);
    r.uint(ann, "anneal", "restarts", &mut c.anneal.restarts);
    r.f64(ann, "anneal", "converge_tol", &mut c.anneal.converge_tol);
    if let Some(v) = ann.and_then(|t| t.get("start")) {
        match v.as_str() {
            Some("random") => c.anneal.start = AnnealStart::Random,
            Some("zero") => c.anneal.start = AnnealStart::Zero,
            _ => r.err("anneal.start", "expected \"random\" or \"zero\""),
        }
    }

    // constraints
    let lattice = Lattice::with_mode_cap(c.d, c.l, DEFAULT_MODE_CAP);
    if let Err(e) = &lattice {
        let key = match e {
            crate::lattice::LatticeError::DimensionTooSmall(_) => "model.d",
            crate::lattice::LatticeError::HalfSideZero => "model.L",
            _ => "model",
        };
        r.err(key, e.to_string());
    }
    if let Err(errs) = c.params.validate() {
        for crate::model::ModelError::Constraint { key, message } in errs {
            r.err(&format!("model.{key}"), message);
        }
    }
    if c.betas.is_empty() || c.betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
        r.err("run.betas", "need at least one beta, all > 0");
    }
    c.anneal.seed = c.seed;
    if let Err(errs) = c.anneal.validate() {
        for e in errs {
            if let crate::anneal::AnnealError::Constraint { key, message } = e {
                let key = if key == "beta_physical" { "beta" } else { key };
                r.err(&format!("anneal.{key}"), message);
            }
        }
    }
    if c.mc_samples < 2 {
        r.err("correlation.mc_samples", "need at least 2 samples");
    }
    if c.identity_couplings.iter().any(|(_, g)| *g < 0.0) {
        r.err("identities.couplings", "coupling must satisfy g >= 0");
    }
    if let Ok(lat) = &lattice {
        c.x = x.unwrap_or_else(|| vec![0; c.d]);
        c.y = y.unwrap_or_else(|| neighbor_coord(c.d));
        for (key, coord) in [("correlation.x", &c.x), ("correlation.y", &c.y)] {
            if let Err(e) = lat.site_index(coord) {
                r.err(key, e.to_string());
            }
        }
    }

    if r.errors.is_empty() {
        Ok(c)
    } else {
        Err(r.errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("[model]\nd = 2\nL = 1\n").unwrap();
        assert_eq!(c.d, 2);
        assert_eq!(c.params, ModelParams::default());
        assert_eq!(c.betas, vec![0.5, 2.0, 8.0]);
        assert_eq!(c.x, vec![0, 0]);
        assert_eq!(c.y, vec![1, 0]);
        assert_eq!(c.anneal.cooling, 0.95);
        assert_eq!(c.anneal.sweeps_per_temp, 200);
        assert_eq!(parse_config("").unwrap().d, 2);
    }

    #[test]
    fn negative_coupling_names_g() {
        let errs = parse_config("[model]\ng = -1\n").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].key, "model.g");
    }

    #[test]
    fn zero_stiffness_names_k() {
        let errs = parse_config("[model]\nK = 0\n").unwrap_err();
        assert!(errs.iter().any(|e| e.key == "model.K"));
    }

    #[test]
    fn all_errors_reported() {
        let errs = parse_config("bogus = 1\n[model]\nd = 1\ng = -2\nfoo = 3\n[anneal]\ncooling = 2\n").unwrap_err();
        let keys: Vec<_> = errs.iter().map(|e| e.key.as_str()).collect();
        for k in ["bogus", "model.foo", "model.d", "model.g", "anneal.cooling"] {
            assert!(keys.contains(&k), "{k} missing from {keys:?}");
        }
    }

    #[test]
    fn json_is_accepted() {
        let c = parse_config(r#"{"model": {"d": 3, "L": 1, "kappa": 0.5}, "run": {"seed": 9}}"#).unwrap();
        assert_eq!((c.d, c.seed, c.params.kappa), (3, 9, 0.5));
        assert_eq!(c.x, vec![0, 0, 0]);
    }

    #[test]
    fn syntax_error_is_reported() {
        let errs = parse_config("[model\n").unwrap_err();
        assert_eq!(errs[0].key, "<document>");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(config_hash("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
