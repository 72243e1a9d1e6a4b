use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::SimState;
use crate::error::{Error, Result};
use crate::fespace::{interpolate_p0, interpolate_p1};
use crate::mesh::{generate_ball_mesh, generate_disk_mesh, load_mesh, Mesh, MeshFormat, Point};
use crate::params::{ModelKind, ModelParams};

/// Radial profile `amplitude · exp(−rate |x|²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub amplitude: f64,
    pub rate: f64,
}

impl Gaussian {
    pub const ZERO: Gaussian = Gaussian {
        amplitude: 0.0,
        rate: 0.0,
    };

    pub fn eval(&self, x: Point) -> f64 {
        self.amplitude * (-self.rate * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub u0: Gaussian,
    pub v0: Gaussian,
    pub w0: Gaussian,
}

impl InitialData {
    /// `u₀` is averaged over elements, `v₀, w₀` are interpolated at vertices.
    pub fn discretise(&self, mesh: &Mesh) -> Result<SimState> {
        for (name, g) in [("u0", self.u0), ("v0", self.v0), ("w0", self.w0)] {
            if !(g.amplitude >= 0.0) || !g.rate.is_finite() {
                return Err(Error::param(name, "needs a finite nonnegative amplitude and a finite rate"));
            }
        }
        Ok(SimState::initial(
            interpolate_p0(mesh, |x| self.u0.eval(x)),
            interpolate_p1(mesh, |x| self.v0.eval(x)),
            interpolate_p1(mesh, |x| self.w0.eval(x)),
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeshSpec {
    Disk { radius: f64, target_h: f64 },
    Ball { radius: f64, target_h: f64 },
    File { path: PathBuf, format: Option<MeshFormat> },
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh> {
        match self {
            MeshSpec::Disk { radius, target_h } => generate_disk_mesh(*radius, *target_h),
            MeshSpec::Ball { radius, target_h } => generate_ball_mesh(*radius, *target_h),
            MeshSpec::File { path, format } => {
                let format = match format {
                    Some(f) => *f,
                    None => MeshFormat::from_path(path),
                };
                load_mesh(path, format)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub params: ModelParams,
    pub mesh: MeshSpec,
    pub initial: InitialData,
}

const NAMES: [&str; 4] = [
    "test1-attraction-3d",
    "test2-attraction-repulsion-3d",
    "test3-nonlocal-2d",
    "test3-nonlocal-2d-coarse",
];

pub fn preset_names() -> &'static [&'static str] {
    &NAMES
}

fn gaussian(amplitude: f64) -> Gaussian {
    Gaussian { amplitude, rate: 35.0 }
}

/// The experiment configurations: everything 1 except `k = 1.1`, `Δt = 1e-5`
/// and the per-test values below.
pub fn preset(name: &str) -> Result<Preset> {
    let base = ModelParams::default();
    let p = match name {
        "test1-attraction-3d" => Preset {
            name: NAMES[0],
            description: "3D attraction only (chi=5, xi=0) on the unit ball",
            params: ModelParams { chi: 5.0, xi: 0.0, ..base },
            mesh: MeshSpec::Ball { radius: 1.0, target_h: 4.4e-2 },
            initial: InitialData {
                u0: gaussian(500.0),
                v0: gaussian(10.0),
                w0: Gaussian::ZERO,
            },
        },
        "test2-attraction-repulsion-3d" => Preset {
            name: NAMES[1],
            description: "3D attraction-repulsion (chi=5, xi=1) on the unit ball",
            params: ModelParams { chi: 5.0, xi: 1.0, ..base },
            mesh: MeshSpec::Ball { radius: 1.0, target_h: 4.4e-2 },
            initial: InitialData {
                u0: gaussian(500.0),
                v0: gaussian(10.0),
                w0: gaussian(10.0),
            },
        },
        "test3-nonlocal-2d" | "test3-nonlocal-2d-coarse" => {
            let coarse = name.ends_with("coarse");
            Preset {
                name: if coarse { NAMES[3] } else { NAMES[2] },
                description: if coarse {
                    "2D nonlocal attraction-repulsion (alpha=1.5) on a coarse unit disk"
                } else {
                    "2D nonlocal attraction-repulsion (alpha=1.5) on the unit disk"
                },
                params: ModelParams {
                    model: ModelKind::Nonlocal,
                    tau: 0,
                    alpha: 1.5,
                    ..base
                },
                mesh: MeshSpec::Disk {
                    radius: 1.0,
                    target_h: if coarse { 5e-2 } else { 1.4e-2 },
                },
                initial: InitialData {
                    u0: gaussian(100.0),
                    v0: gaussian(10.0),
                    w0: gaussian(10.0),
                },
            }
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(p)
}
