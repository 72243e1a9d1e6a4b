//! Run configuration in TOML with sections `[model]`, `[mesh]`, `[solver]`
//! and `[output]`.
//!
//! `model.preset` seeds every value from a named experiment; any other key
//! overrides it. Without a preset, `[mesh]` and the `u0_*` keys are required.
//! Unknown keys are errors. Precedence for the output directory is CLI flag,
//! then `CHEMOTAXIS_OUTPUT_DIR`, then the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::celldensity::{CellSolverOptions, FallbackPolicy, DEFAULT_CELL_TOL};
use crate::error::{Error, Result};
use crate::params::{ModelKind, ModelParams};
use crate::signals::DEFAULT_SIGNAL_TOL;
use crate::simulation::{preset, Gaussian, InitialData, MeshSpec, SolverOptions};

pub const OUTPUT_DIR_ENV: &str = "CHEMOTAXIS_OUTPUT_DIR";

macro_rules! model_section {
    ($($field:ident : $ty:ty),* $(,)?) => {
        /// The `[model]` section as written in the file.
        #[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct ModelSection {
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub preset: Option<String>,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub model: Option<ModelKind>,
            $(
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub u0_amplitude: Option<f64>,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub u0_rate: Option<f64>,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub v0_amplitude: Option<f64>,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub v0_rate: Option<f64>,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub w0_amplitude: Option<f64>,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub w0_rate: Option<f64>,
        }

        impl ModelSection {
            fn apply(&self, p: &mut ModelParams) {
                if let Some(m) = self.model {
                    p.model = m;
                }
                $(
                    if let Some(v) = self.$field {
                        p.$field = v;
                    }
                )*
            }

            fn from_params(p: &ModelParams, init: &InitialData) -> Self {
                ModelSection {
                    preset: None,
                    model: Some(p.model),
                    $($field: Some(p.$field),)*
                    u0_amplitude: Some(init.u0.amplitude),
                    u0_rate: Some(init.u0.rate),
                    v0_amplitude: Some(init.v0.amplitude),
                    v0_rate: Some(init.v0.rate),
                    w0_amplitude: Some(init.w0.amplitude),
                    w0_rate: Some(init.w0.rate),
                }
            }
        }
    };
}

model_section!(
    tau: u8,
    chi: f64,
    xi: f64,
    lambda: f64,
    mu: f64,
    c: f64,
    n1: f64,
    n2: f64,
    n3: f64,
    rho: f64,
    k: f64,
    gamma: f64,
    a: f64,
    d_decay: f64,
    alpha: f64,
    beta: f64,
    eta: f64,
    eps: f64,
    t_final: f64,
    dt: f64,
);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_signal_tol")]
    pub signal_tol: f64,
    #[serde(default = "default_cell_tol")]
    pub cell_tol: f64,
    #[serde(default = "default_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "default_fp_max_iter")]
    pub fp_max_iter: usize,
    #[serde(default = "default_fallback")]
    pub fallback: FallbackPolicy,
}

fn default_signal_tol() -> f64 {
    DEFAULT_SIGNAL_TOL
}
fn default_cell_tol() -> f64 {
    DEFAULT_CELL_TOL
}
fn default_fp_tol() -> f64 {
    CellSolverOptions::default().fp_tol
}
fn default_fp_max_iter() -> usize {
    CellSolverOptions::default().fp_max_iter
}
fn default_fallback() -> FallbackPolicy {
    FallbackPolicy::Auto
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            signal_tol: default_signal_tol(),
            cell_tol: default_cell_tol(),
            fp_tol: default_fp_tol(),
            fp_max_iter: default_fp_max_iter(),
            fallback: default_fallback(),
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            signal_tol: self.signal_tol,
            cell: CellSolverOptions {
                tol: self.cell_tol,
                fp_tol: self.fp_tol,
                fp_max_iter: self.fp_max_iter,
                fallback: self.fallback,
                ..CellSolverOptions::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write a VTU snapshot every `cadence` steps (and always the last one).
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default = "default_true")]
    pub vtu: bool,
    #[serde(default = "default_true")]
    pub checkpoint: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("output")
}
fn default_cadence() -> usize {
    10
}
fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            cadence: default_cadence(),
            vtu: true,
            checkpoint: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    model: ModelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mesh: Option<MeshSpec>,
    #[serde(default)]
    solver: SolverConfig,
    #[serde(default)]
    output: OutputConfig,
}

/// A fully resolved run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub params: ModelParams,
    pub initial: InitialData,
    pub mesh: MeshSpec,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

/// Model-parameter overrides, e.g. from command-line flags.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamOverrides {
    pub values: Vec<(String, f64)>,
}

impl RunConfig {
    pub fn from_preset(name: &str) -> Result<Self> {
        let p = preset(name)?;
        Ok(RunConfig {
            preset: Some(p.name.to_string()),
            params: p.params,
            initial: p.initial,
            mesh: p.mesh,
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let m = &file.model;
        let (mut params, base_initial, base_mesh) = match &m.preset {
            Some(name) => {
                let p = preset(name)?;
                (p.params, Some(p.initial), Some(p.mesh))
            }
            None => (ModelParams::default(), None, None),
        };
        m.apply(&mut params);
        let gaussian = |amp: Option<f64>, rate: Option<f64>, base: Option<Gaussian>, key: &str, required: bool| {
            match (amp, rate, base) {
                (Some(a), Some(r), _) => Ok(Gaussian { amplitude: a, rate: r }),
                (a, r, Some(b)) => Ok(Gaussian {
                    amplitude: a.unwrap_or(b.amplitude),
                    rate: r.unwrap_or(b.rate),
                }),
                (None, None, None) if !required => Ok(Gaussian::ZERO),
                _ => Err(Error::Config(format!(
                    "missing field `model.{key}_amplitude`/`model.{key}_rate` (required without a preset)"
                ))),
            }
        };
        let initial = InitialData {
            u0: gaussian(m.u0_amplitude, m.u0_rate, base_initial.map(|i| i.u0), "u0", true)?,
            v0: gaussian(m.v0_amplitude, m.v0_rate, base_initial.map(|i| i.v0), "v0", false)?,
            w0: gaussian(m.w0_amplitude, m.w0_rate, base_initial.map(|i| i.w0), "w0", false)?,
        };
        let mesh = file
            .mesh
            .or(base_mesh)
            .ok_or_else(|| Error::Config("missing section `[mesh]` (required without a preset)".into()))?;
        let config = RunConfig {
            preset: m.preset.clone(),
            params,
            initial,
            mesh,
            solver: file.solver,
            output: file.output,
        };
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    /// Every value written out explicitly; parsing the result gives back an
    /// equal configuration.
    pub fn to_toml_string(&self) -> String {
        let mut model = ModelSection::from_params(&self.params, &self.initial);
        model.preset = self.preset.clone();
        let file = ConfigFile {
            model,
            mesh: Some(self.mesh.clone()),
            solver: self.solver,
            output: self.output.clone(),
        };
        toml::to_string(&file).expect("configuration serialises")
    }

    pub fn check(&self) -> Result<()> {
        self.params.check()?;
        if self.output.cadence == 0 {
            return Err(Error::param("output.cadence", "must be at least 1"));
        }
        for (name, v) in [
            ("solver.signal_tol", self.solver.signal_tol),
            ("solver.cell_tol", self.solver.cell_tol),
            ("solver.fp_tol", self.solver.fp_tol),
        ] {
            if !(v > 0.0) {
                return Err(Error::param(name, "must be positive"));
            }
        }
        if self.solver.fp_max_iter == 0 {
            return Err(Error::param("solver.fp_max_iter", "must be at least 1"));
        }
        Ok(())
    }

    /// Applies `name = value` overrides of model parameters, then re-checks.
    pub fn apply_overrides(&mut self, overrides: &ParamOverrides) -> Result<()> {
        for (name, value) in &overrides.values {
            let p = &mut self.params;
            let slot = match name.as_str() {
                "chi" => &mut p.chi,
                "xi" => &mut p.xi,
                "lambda" => &mut p.lambda,
                "mu" => &mut p.mu,
                "c" => &mut p.c,
                "n1" => &mut p.n1,
                "n2" => &mut p.n2,
                "n3" => &mut p.n3,
                "rho" => &mut p.rho,
                "k" => &mut p.k,
                "gamma" => &mut p.gamma,
                "a" => &mut p.a,
                "d_decay" => &mut p.d_decay,
                "alpha" => &mut p.alpha,
                "beta" => &mut p.beta,
                "eta" => &mut p.eta,
                "eps" => &mut p.eps,
                "t_final" => &mut p.t_final,
                "dt" => &mut p.dt,
                other => return Err(Error::Config(format!("unknown parameter `{other}`"))),
            };
            *slot = *value;
        }
        self.check()
    }

    /// Output directory after applying the environment and an optional CLI value.
    pub fn resolve_output_dir(&mut self, cli: Option<&Path>) {
        if let Some(dir) = cli {
            self.output.dir = dir.to_path_buf();
        } else if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.output.dir = PathBuf::from(dir);
        }
    }
}
