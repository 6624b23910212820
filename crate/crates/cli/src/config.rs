//! Run configuration (TOML) and built-in presets.

use std::path::{Path, PathBuf};

use aet_core::phantom::{builtin_phantom, PhantomSpec};
use aet_core::recon3d::Mode3D;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub grid: GridConfig,
    pub phantom: PhantomConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub recon: ReconConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub forward_n: usize,
    pub recon_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomConfig {
    /// Built-in phantom name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Phantom text file, relative to the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measurement {
    /// Pairing of the fronts with M_ij computed on the forward grid.
    Linearized,
    /// One perturbed forward solve per transducer and front.
    Physical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub measurement: Measurement,
    pub transducers: usize,
    pub fronts: usize,
    pub radius: f64,
    /// Front half-width in cells of the reconstruction grid.
    pub width_cells: f64,
    /// Largest front radius; 0 picks the smallest radius sweeping the square.
    pub t_max: f64,
    /// Front amplitude of the physical measurement.
    pub amplitude: f64,
    pub cell_tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            measurement: Measurement::Linearized,
            transducers: 256,
            fronts: 257,
            radius: 1.6,
            width_cells: 3.0,
            t_max: 0.0,
            amplitude: 1e-5,
            cell_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Relative L2 level; 0.5 means 50%.
    pub level: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { level: 0.0, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconConfig {
    pub iterations: usize,
    /// 3D only: "full" or "slice".
    pub mode: String,
    pub tol: f64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self { iterations: 2, mode: "full".into(), tol: 1e-10 }
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn mode(&self) -> Result<Mode3D, CliError> {
        self.recon.mode.parse().map_err(|e| invalid("recon.mode", e))
    }

    pub fn phantom_spec(&self) -> Result<PhantomSpec, CliError> {
        let spec = match (&self.phantom.name, &self.phantom.file) {
            (Some(name), None) => builtin_phantom(name).map_err(|e| invalid("phantom.name", e))?,
            (None, Some(file)) => {
                let text = std::fs::read_to_string(file)
                    .map_err(|e| invalid("phantom.file", format!("{}: {e}", file.display())))?;
                PhantomSpec::parse(&text).map_err(|e| invalid("phantom.file", e))?
            }
            _ => return Err(invalid("phantom", "set exactly one of `name` and `file`")),
        };
        if spec.dim() != self.experiment.dim {
            return Err(invalid(
                "phantom",
                format!("{}-d phantom for a {}-d experiment", spec.dim(), self.experiment.dim),
            ));
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let e = &self.experiment;
        if e.name.is_empty() {
            return Err(invalid("experiment.name", "must not be empty"));
        }
        if !(e.dim == 2 || e.dim == 3) {
            return Err(invalid("experiment.dim", format!("must be 2 or 3, got {}", e.dim)));
        }
        let g = &self.grid;
        if g.recon_n < 9 {
            return Err(invalid("grid.recon_n", format!("must be at least 9, got {}", g.recon_n)));
        }
        if g.forward_n < g.recon_n {
            return Err(invalid(
                "grid.forward_n",
                format!("must be at least grid.recon_n = {}, got {}", g.recon_n, g.forward_n),
            ));
        }
        if (g.forward_n - 1) % (g.recon_n - 1) != 0 {
            return Err(invalid(
                "grid.forward_n",
                format!("forward_n - 1 = {} is not a multiple of recon_n - 1 = {}", g.forward_n - 1, g.recon_n - 1),
            ));
        }
        let p = &self.probe;
        if e.dim == 2 {
            if p.transducers < 4 {
                return Err(invalid("probe.transducers", format!("need at least 4, got {}", p.transducers)));
            }
            if p.fronts < 3 {
                return Err(invalid("probe.fronts", format!("need at least 3, got {}", p.fronts)));
            }
            if !(p.radius > std::f64::consts::SQRT_2) {
                return Err(invalid("probe.radius", format!("must exceed √2, got {}", p.radius)));
            }
            if !(p.width_cells > 0.0) {
                return Err(invalid("probe.width_cells", "must be positive"));
            }
            if !(p.t_max >= 0.0) {
                return Err(invalid("probe.t_max", "must be non-negative"));
            }
            if p.measurement == Measurement::Physical && !(p.amplitude > 0.0) {
                return Err(invalid("probe.amplitude", "must be positive"));
            }
            if !(p.cell_tol > 0.0) {
                return Err(invalid("probe.cell_tol", "must be positive"));
            }
        } else if p.measurement == Measurement::Physical {
            return Err(invalid("probe.measurement", "3D experiments use focused power densities directly"));
        }
        if !(self.noise.level >= 0.0 && self.noise.level.is_finite()) {
            return Err(invalid("noise.level", format!("must be a finite non-negative number, got {}", self.noise.level)));
        }
        if !(self.recon.tol > 0.0) {
            return Err(invalid("recon.tol", "must be positive"));
        }
        self.mode()?;
        self.phantom_spec()?;
        Ok(())
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 10] = [
    "paper2d-accurate",
    "paper2d-noisy50",
    "paper2d-corners",
    "paper3d-accurate",
    "paper3d-noisy10",
    "paper2d-accurate-small",
    "paper2d-noisy50-small",
    "paper2d-corners-small",
    "paper3d-accurate-small",
    "paper3d-noisy10-small",
];

pub fn preset(name: &str) -> Result<RunConfig, CliError> {
    let (base, small) = match name.strip_suffix("-small") {
        Some(b) => (b, true),
        None => (name, false),
    };
    let mut cfg = match base {
        "paper2d-accurate" | "paper2d-noisy50" | "paper2d-corners" => RunConfig {
            experiment: Experiment { name: name.into(), dim: 2 },
            grid: GridConfig { forward_n: 513, recon_n: 129 },
            phantom: PhantomConfig {
                name: Some(if base == "paper2d-corners" { "corners-2d" } else { "table1-2d" }.into()),
                file: None,
            },
            probe: ProbeConfig { measurement: Measurement::Physical, ..Default::default() },
            noise: NoiseConfig { level: if base == "paper2d-noisy50" { 0.5 } else { 0.0 }, seed: 1 },
            recon: ReconConfig { iterations: if base == "paper2d-corners" { 5 } else { 2 }, ..Default::default() },
        },
        "paper3d-accurate" | "paper3d-noisy10" => RunConfig {
            experiment: Experiment { name: name.into(), dim: 3 },
            grid: GridConfig { forward_n: 129, recon_n: 129 },
            phantom: PhantomConfig { name: Some("table2-3d".into()), file: None },
            probe: ProbeConfig::default(),
            noise: NoiseConfig { level: if base == "paper3d-noisy10" { 0.1 } else { 0.0 }, seed: 1 },
            recon: ReconConfig { iterations: 5, ..Default::default() },
        },
        _ => {
            return Err(CliError::Config(format!("unknown preset `{name}`; known: {}", PRESETS.join(", "))));
        }
    };
    if small {
        if cfg.experiment.dim == 2 {
            cfg.grid = GridConfig { forward_n: 257, recon_n: 65 };
            cfg.probe.measurement = Measurement::Linearized;
        } else {
            cfg.grid = GridConfig { forward_n: 65, recon_n: 65 };
        }
    }
    Ok(cfg)
}
