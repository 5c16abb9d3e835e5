//! Flat key/value run configuration: parsing, overrides, defaults and
//! validation. Nothing here touches the filesystem except reading the config.

use std::collections::BTreeMap;
use std::path::PathBuf;

use omega_limit::integrate::Mode;
use omega_limit::section::{DirectionFilter, Observable};
use omega_limit::systems::{builtin, SystemParams};
use omega_limit::{IntegratorConfig, SystemSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Equilibria,
    Bifurcation,
    Trapping,
    Omega,
    Section,
    ReproduceFigures,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Equilibria => "equilibria",
            Command::Bifurcation => "bifurcation",
            Command::Trapping => "trapping",
            Command::Omega => "omega",
            Command::Section => "section",
            Command::ReproduceFigures => "reproduce-figures",
        }
    }

    /// Study keys a config file may set for this subcommand.
    fn study_keys(self) -> &'static [&'static str] {
        match self {
            Command::Simulate => &["ic", "t_end", "dt_output"],
            Command::Equilibria => &[],
            Command::Bifurcation => &["r_min", "r_max", "r_steps", "hopf_lo", "hopf_hi", "hopf_tol"],
            Command::Trapping => &["c", "samples", "sphere_points", "mesh_theta", "mesh_phi"],
            Command::Omega => &["ic", "compare_ic", "t_transient", "t_sample", "dt_sample", "on_set_eps"],
            Command::Section => &["ic", "t_transient", "t_sample", "axis", "offset", "direction", "observable", "k"],
            Command::ReproduceFigures => &[],
        }
    }
}

const COMMON_KEYS: &[&str] = &["subcommand", "system", "out", "seed", "sigma", "b", "r", "mu", "a"];
const INTEGRATOR_KEYS: &[&str] = &["mode", "h", "rel_tol", "abs_tol", "h_min", "h_max", "max_steps"];
const PARAM_KEYS: &[&str] = &["sigma", "b", "r", "mu", "a"];

/// The config file as written by the user. Every key is optional.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub subcommand: Option<String>,
    pub system: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub sigma: Option<f64>,
    pub b: Option<f64>,
    pub r: Option<f64>,
    pub mu: Option<f64>,
    pub a: Option<f64>,
    pub mode: Option<String>,
    pub h: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub h_min: Option<f64>,
    pub h_max: Option<f64>,
    pub max_steps: Option<usize>,
    pub ic: Option<Vec<f64>>,
    pub compare_ic: Option<Vec<f64>>,
    pub t_end: Option<f64>,
    pub dt_output: Option<f64>,
    pub t_transient: Option<f64>,
    pub t_sample: Option<f64>,
    pub dt_sample: Option<f64>,
    pub on_set_eps: Option<f64>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub r_steps: Option<usize>,
    pub hopf_lo: Option<f64>,
    pub hopf_hi: Option<f64>,
    pub hopf_tol: Option<f64>,
    pub c: Option<f64>,
    pub samples: Option<usize>,
    pub sphere_points: Option<usize>,
    pub mesh_theta: Option<usize>,
    pub mesh_phi: Option<usize>,
    pub axis: Option<usize>,
    pub offset: Option<f64>,
    pub direction: Option<String>,
    pub observable: Option<String>,
    pub k: Option<usize>,
}

/// Command-line overrides; they win over the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub system: Option<String>,
    pub r: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn fail<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Parse the file, rejecting unknown keys and keys that do not apply to
/// `command`.
pub fn parse_file(text: &str, command: Command) -> Result<FileConfig, ConfigError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| ConfigError(format!("config parse error: {e}")))?;
    let cfg: FileConfig =
        table.clone().try_into().map_err(|e| ConfigError(format!("config error: {e}")))?;
    let study = command.study_keys();
    for key in table.keys() {
        let known = COMMON_KEYS.contains(&key.as_str())
            || study.contains(&key.as_str())
            || (command != Command::ReproduceFigures && INTEGRATOR_KEYS.contains(&key.as_str()));
        if !known {
            return fail(format!("config key `{key}` does not apply to subcommand `{}`", command.name()));
        }
    }
    if let Some(sub) = &cfg.subcommand {
        if sub != command.name() {
            return fail(format!("config is for subcommand `{sub}` but `{}` was invoked", command.name()));
        }
    }
    Ok(cfg)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateStudy {
    pub ic: Vec<f64>,
    pub t_end: f64,
    pub dt_output: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BifurcationStudy {
    pub r_min: f64,
    pub r_max: f64,
    pub r_steps: usize,
    pub hopf_lo: f64,
    pub hopf_hi: f64,
    pub hopf_tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrappingStudy {
    pub c: f64,
    pub samples: usize,
    pub sphere_points: usize,
    pub mesh_theta: usize,
    pub mesh_phi: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OmegaStudy {
    pub ic: Vec<f64>,
    pub compare_ic: Option<Vec<f64>>,
    pub t_transient: f64,
    pub t_sample: f64,
    pub dt_sample: f64,
    pub on_set_eps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SectionStudy {
    pub ic: Vec<f64>,
    pub t_transient: f64,
    pub t_sample: f64,
    pub axis: usize,
    pub offset: f64,
    pub direction: DirectionFilter,
    pub observable: String,
    pub k: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Study {
    Simulate(SimulateStudy),
    Equilibria {},
    Bifurcation(BifurcationStudy),
    Trapping(TrappingStudy),
    Omega(OmegaStudy),
    Section(SectionStudy),
    ReproduceFigures {},
}

/// Fully resolved configuration; serialized into every JSON artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub subcommand: Command,
    pub system: String,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
    pub integrator: IntegratorConfig,
    pub study: Study,
    #[serde(skip)]
    pub spec: SystemSpec,
    #[serde(skip)]
    pub out: PathBuf,
}

pub const DEFAULT_SEED: u64 = 20240601;

pub fn system_params(spec: &SystemSpec) -> BTreeMap<String, f64> {
    let pairs: Vec<(&str, f64)> = match *spec.params() {
        SystemParams::Quintic1d => vec![],
        SystemParams::VanDerPol { mu } => vec![("mu", mu)],
        SystemParams::Brusselator { a, b } => vec![("a", a), ("b", b)],
        SystemParams::Lorenz(p) => vec![("sigma", p.sigma), ("b", p.b), ("r", p.r)],
    };
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn default_ic(dim: usize) -> Vec<f64> {
    match dim {
        1 => vec![0.5],
        2 => vec![0.5, 0.0],
        _ => vec![5.0, 5.0, 5.0],
    }
}

fn check_ic(name: &str, ic: &[f64], dim: usize) -> Result<(), ConfigError> {
    if ic.len() != dim {
        return fail(format!("`{name}` has {} coordinates but the system has dimension {dim}", ic.len()));
    }
    if ic.iter().any(|v| !v.is_finite()) {
        return fail(format!("`{name}` must be finite"));
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        fail(format!("`{name}` must be a positive number, got {v}"))
    }
}

fn non_negative(name: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        fail(format!("`{name}` must be >= 0, got {v}"))
    }
}

fn integrator(file: &FileConfig) -> Result<IntegratorConfig, ConfigError> {
    let mut cfg = IntegratorConfig::default();
    if let Some(mode) = &file.mode {
        cfg.mode = match mode.as_str() {
            "adaptive" => Mode::Adaptive,
            "fixed" => Mode::Fixed,
            other => return fail(format!("`mode` must be adaptive or fixed, got `{other}`")),
        };
    }
    cfg.h = file.h.unwrap_or(cfg.h);
    cfg.rel_tol = file.rel_tol.unwrap_or(cfg.rel_tol);
    cfg.abs_tol = file.abs_tol.unwrap_or(cfg.abs_tol);
    cfg.h_min = file.h_min.unwrap_or(cfg.h_min);
    cfg.h_max = file.h_max.unwrap_or(cfg.h_max);
    cfg.max_steps = file.max_steps.unwrap_or(cfg.max_steps);
    cfg.validate().map_err(|e| ConfigError(format!("integrator: {e}")))?;
    Ok(cfg)
}

fn require_lorenz(command: Command, system: &str) -> Result<(), ConfigError> {
    if system != "lorenz" {
        return fail(format!("subcommand `{}` is defined for the lorenz system only, got `{system}`", command.name()));
    }
    Ok(())
}

/// Merge file and overrides, fill defaults and validate every field.
pub fn resolve(command: Command, file: FileConfig, overrides: Overrides) -> Result<Resolved, ConfigError> {
    let seed = overrides.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let out = overrides.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    if command == Command::ReproduceFigures {
        if overrides.system.is_some() || overrides.r.is_some() || file.system.is_some() {
            return fail("reproduce-figures runs pinned settings; system and parameters cannot be changed");
        }
        if let Some(key) = PARAM_KEYS.iter().find(|k| param_value(&file, k).is_some()) {
            return fail(format!("reproduce-figures runs pinned settings; `{key}` cannot be set"));
        }
        let spec = builtin("lorenz", &BTreeMap::new()).map_err(|e| ConfigError(e.to_string()))?;
        return Ok(Resolved {
            subcommand: command,
            system: "lorenz".into(),
            params: system_params(&spec),
            seed,
            integrator: IntegratorConfig::default(),
            study: Study::ReproduceFigures {},
            spec,
            out,
        });
    }

    let system = overrides.system.clone().or(file.system.clone()).unwrap_or_else(|| "lorenz".to_string());
    let mut raw = BTreeMap::new();
    for key in PARAM_KEYS {
        if let Some(v) = param_value(&file, key) {
            raw.insert(key.to_string(), v);
        }
    }
    if let Some(r) = overrides.r {
        raw.insert("r".to_string(), r);
    }
    let spec = builtin(&system, &raw).map_err(|e| ConfigError(e.to_string()))?;
    let integrator = integrator(&file)?;
    let dim = spec_dimension(&spec);

    let study = match command {
        Command::Simulate => {
            let ic = file.ic.clone().unwrap_or_else(|| default_ic(dim));
            check_ic("ic", &ic, dim)?;
            let t_end = positive("t_end", file.t_end.unwrap_or(50.0))?;
            let dt_output = file.dt_output.map(|v| positive("dt_output", v)).transpose()?;
            Study::Simulate(SimulateStudy { ic, t_end, dt_output })
        }
        Command::Equilibria => Study::Equilibria {},
        Command::Bifurcation => {
            require_lorenz(command, &system)?;
            let s = BifurcationStudy {
                r_min: positive("r_min", file.r_min.unwrap_or(0.1))?,
                r_max: positive("r_max", file.r_max.unwrap_or(40.0))?,
                r_steps: file.r_steps.unwrap_or(400),
                hopf_lo: positive("hopf_lo", file.hopf_lo.unwrap_or(1.5))?,
                hopf_hi: positive("hopf_hi", file.hopf_hi.unwrap_or(100.0))?,
                hopf_tol: positive("hopf_tol", file.hopf_tol.unwrap_or(1e-10))?,
            };
            if s.r_max <= s.r_min {
                return fail("`r_max` must exceed `r_min`");
            }
            if s.r_steps < 2 {
                return fail("`r_steps` must be at least 2");
            }
            if s.hopf_hi <= s.hopf_lo || s.hopf_lo <= 1.0 {
                return fail("Hopf bracket needs 1 < hopf_lo < hopf_hi");
            }
            Study::Bifurcation(s)
        }
        Command::Trapping => {
            require_lorenz(command, &system)?;
            let s = TrappingStudy {
                c: positive("c", file.c.unwrap_or(45.0))?,
                samples: file.samples.unwrap_or(1_000_000),
                sphere_points: file.sphere_points.unwrap_or(2000),
                mesh_theta: file.mesh_theta.unwrap_or(40),
                mesh_phi: file.mesh_phi.unwrap_or(80),
            };
            if s.samples < 1000 {
                return fail(format!("`samples` must be at least 1000, got {}", s.samples));
            }
            if s.mesh_theta < 2 || s.mesh_phi < 3 {
                return fail("`mesh_theta` must be >= 2 and `mesh_phi` >= 3");
            }
            Study::Trapping(s)
        }
        Command::Omega => {
            let ic = file.ic.clone().unwrap_or_else(|| default_ic(dim));
            check_ic("ic", &ic, dim)?;
            if let Some(other) = &file.compare_ic {
                check_ic("compare_ic", other, dim)?;
            }
            let s = OmegaStudy {
                ic,
                compare_ic: file.compare_ic.clone(),
                t_transient: non_negative("t_transient", file.t_transient.unwrap_or(50.0))?,
                t_sample: positive("t_sample", file.t_sample.unwrap_or(500.0))?,
                dt_sample: positive("dt_sample", file.dt_sample.unwrap_or(0.01))?,
                on_set_eps: positive("on_set_eps", file.on_set_eps.unwrap_or(omega_limit::omega::DEFAULT_ON_SET_EPS))?,
            };
            if s.dt_sample >= s.t_sample {
                return fail("`dt_sample` must be smaller than `t_sample`");
            }
            Study::Omega(s)
        }
        Command::Section => {
            if dim < 2 {
                return fail("sections need a system of dimension 2 or 3");
            }
            let ic = file.ic.clone().unwrap_or_else(|| default_ic(dim));
            check_ic("ic", &ic, dim)?;
            let axis = file.axis.unwrap_or(if dim == 3 { 0 } else { 1 });
            if axis >= dim {
                return fail(format!("`axis` {axis} is out of range for dimension {dim}"));
            }
            let direction = match file.direction.as_deref().unwrap_or("both") {
                "up" => DirectionFilter::Up,
                "down" => DirectionFilter::Down,
                "both" => DirectionFilter::Both,
                other => return fail(format!("`direction` must be up, down or both, got `{other}`")),
            };
            let observable = file.observable.clone().unwrap_or_else(|| if dim == 3 { "z" } else { "x" }.to_string());
            match Observable::parse(&observable) {
                Ok(Observable::Coordinate(i)) if i >= dim => {
                    return fail(format!("`observable` {observable} does not exist in dimension {dim}"))
                }
                Ok(_) => {}
                Err(e) => return fail(e.to_string()),
            }
            let k = file.k.unwrap_or(omega_limit::section::DEFAULT_K);
            if k == 0 {
                return fail("`k` must be >= 1");
            }
            Study::Section(SectionStudy {
                ic,
                t_transient: non_negative("t_transient", file.t_transient.unwrap_or(50.0))?,
                t_sample: positive("t_sample", file.t_sample.unwrap_or(2000.0))?,
                axis,
                offset: file.offset.unwrap_or(0.0),
                direction,
                observable,
                k,
            })
        }
        Command::ReproduceFigures => unreachable!("handled above"),
    };
    if let Study::Section(s) = &study {
        if !s.offset.is_finite() {
            return fail("`offset` must be finite");
        }
    }
    Ok(Resolved { subcommand: command, system, params: system_params(&spec), seed, integrator, study, spec, out })
}

fn spec_dimension(spec: &SystemSpec) -> usize {
    use omega_limit::VectorField;
    spec.dimension()
}

fn param_value(file: &FileConfig, key: &str) -> Option<f64> {
    match key {
        "sigma" => file.sigma,
        "b" => file.b,
        "r" => file.r,
        "mu" => file.mu,
        "a" => file.a,
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve_text(cmd: Command, text: &str) -> Result<Resolved, ConfigError> {
        resolve(cmd, parse_file(text, cmd)?, Overrides::default())
    }

    #[test]
    fn defaults_resolve() {
        let r = resolve_text(Command::Omega, "").unwrap();
        assert_eq!(r.system, "lorenz");
        assert_eq!(r.params["r"], 28.0);
        let Study::Omega(s) = r.study else { panic!() };
        assert_eq!((s.t_transient, s.t_sample, s.dt_sample), (50.0, 500.0, 0.01));
    }

    #[test]
    fn integers_are_accepted_for_reals() {
        let r = resolve_text(Command::Equilibria, "r = 10\nsigma = 10").unwrap();
        assert_eq!(r.params["r"], 10.0);
    }

    #[test]
    fn unknown_and_misplaced_keys_are_rejected() {
        assert!(resolve_text(Command::Omega, "rr = 3").unwrap_err().0.contains("rr"));
        assert!(resolve_text(Command::Omega, "c = 45").unwrap_err().0.contains("does not apply"));
        assert!(resolve_text(Command::Omega, "subcommand = \"section\"").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(resolve_text(Command::Equilibria, "r = -1").is_err());
        assert!(resolve_text(Command::Simulate, "ic = [1.0, 2.0]").is_err());
        assert!(resolve_text(Command::Section, "direction = \"sideways\"").is_err());
        assert!(resolve_text(Command::Trapping, "samples = 10").is_err());
        assert!(resolve_text(Command::Bifurcation, "system = \"vanderpol\"").is_err());
        assert!(resolve_text(Command::Equilibria, "system = \"vanderpol\"\nr = 3").is_err());
        assert!(resolve_text(Command::Simulate, "mode = \"fixed\"\nh = -1").is_err());
    }

    #[test]
    fn overrides_win() {
        let file = parse_file("r = 10\nseed = 1", Command::Equilibria).unwrap();
        let o = Overrides { r: Some(20.0), seed: Some(2), ..Default::default() };
        let r = resolve(Command::Equilibria, file, o).unwrap();
        assert_eq!((r.params["r"], r.seed), (20.0, 2));
    }

    #[test]
    fn per_system_defaults() {
        let r = resolve_text(Command::Section, "system = \"vanderpol\"").unwrap();
        let Study::Section(s) = r.study else { panic!() };
        assert_eq!((s.axis, s.observable.as_str(), s.ic.len()), (1, "x", 2));
        assert_eq!(r.params["mu"], 1.0);
    }
}
