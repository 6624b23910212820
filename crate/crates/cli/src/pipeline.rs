//! The subcommands: phantom, simulate, focus, reconstruct, metrics.
//!
//! Every command writes `manifest_<command>.txt` into the output directory:
//! the resolved configuration, seeds, and SHA-256 hashes of all inputs and
//! outputs, in sorted `key=value` lines.

use std::fs;
use std::path::{Path, PathBuf};

use aet_core::focusing::focus;
use aet_core::forward::{pair_list, power_densities_for};
use aet_core::io::{read_array, read_field, sha256_file, write_array, write_field, Metadata};
use aet_core::metrics::{max_abs_error, rel_l2};
use aet_core::phantom::Output;
use aet_core::probe::{add_noise, measure_linearized, measure_physical, PhysicalOptions, SinogramKind};
use aet_core::recon2d::{reconstruct2d, ReconOptions};
use aet_core::recon3d::reconstruct3d;
use aet_core::{AetError, Grid, ReconResult, ScalarField, Sinogram, TransducerArray};

use crate::config::{Measurement, RunConfig};
use crate::error::CliError;

pub const CONFIG_FILE: &str = "config.toml";
pub const TRUTH_FILE: &str = "truth_ln_sigma.aetf";
pub const SIGMA_FILE: &str = "sigma.aetf";

/// 1-based label of a current pair, "12" for (0, 1).
pub fn pair_label(pair: (usize, usize)) -> String {
    format!("{}{}", pair.0 + 1, pair.1 + 1)
}

pub fn sinogram_file(pair: (usize, usize)) -> String {
    format!("sinogram_{}.aetf", pair_label(pair))
}

pub fn power_density_file(pair: (usize, usize)) -> String {
    format!("m_{}.aetf", pair_label(pair))
}

pub fn iterate_file(k: usize) -> String {
    format!("iterate_{k:02}.aetf")
}

pub fn manifest_file(command: &str) -> String {
    format!("manifest_{command}.txt")
}

/// Current pairs the experiment measures.
pub fn pairs(cfg: &RunConfig) -> Result<Vec<(usize, usize)>, CliError> {
    Ok(pair_list(cfg.mode_currents()?))
}

impl RunConfig {
    fn mode_currents(&self) -> Result<usize, CliError> {
        Ok(if self.experiment.dim == 2 { 2 } else { self.mode()?.currents() })
    }

    pub fn forward_grid(&self) -> Grid {
        Grid::new(self.experiment.dim, self.grid.forward_n).expect("validated")
    }

    pub fn recon_grid(&self) -> Grid {
        Grid::new(self.experiment.dim, self.grid.recon_n).expect("validated")
    }

    pub fn array(&self) -> Result<TransducerArray, CliError> {
        let p = &self.probe;
        let w = p.width_cells * self.recon_grid().spacing();
        let t_max = if p.t_max > 0.0 { p.t_max } else { (2.0 * p.radius).max(p.radius + std::f64::consts::SQRT_2 + 2.0 * w) };
        TransducerArray::new(p.transducers, p.fronts, p.radius, t_max, w).map_err(|e| CliError::Config(format!("probe: {e}")))
    }
}

struct Manifest {
    meta: Metadata,
    out: PathBuf,
}

impl Manifest {
    fn new(command: &str, cfg: &RunConfig, out: &Path) -> Self {
        let mut meta = Metadata::new();
        meta.set("command", command);
        for line in cfg.to_toml().lines() {
            // flatten `[section]` + `key = value` into `config.section.key`
            if let Some(section) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                meta.set("config.section", section);
            } else if let Some((k, v)) = line.split_once(" = ") {
                let section = meta.get("config.section").unwrap_or("").to_string();
                meta.set(&format!("config.{section}.{k}"), v);
            }
        }
        meta.0.remove("config.section");
        Self { meta, out: out.to_path_buf() }
    }

    fn input(&mut self, name: &str) -> Result<(), CliError> {
        let hash = sha256_file(&self.out.join(name))?;
        self.meta.set(&format!("input.{name}.sha256"), hash);
        Ok(())
    }

    fn output(&mut self, name: &str) -> Result<(), CliError> {
        let hash = sha256_file(&self.out.join(name))?;
        self.meta.set(&format!("output.{name}.sha256"), hash);
        Ok(())
    }

    fn set(&mut self, key: &str, value: impl ToString) {
        self.meta.set(key, value);
    }

    fn write(&self, command: &str) -> Result<Metadata, CliError> {
        fs::write(self.out.join(manifest_file(command)), self.meta.to_text()).map_err(AetError::from)?;
        Ok(self.meta.clone())
    }
}

fn prepare(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Input(format!("cannot create {}: {e}", out.display())))?;
    fs::write(out.join(CONFIG_FILE), cfg.to_toml()).map_err(AetError::from)?;
    Ok(())
}

fn require(out: &Path, name: &str) -> Result<PathBuf, CliError> {
    let p = out.join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(CliError::Input(format!("missing input {}", p.display())))
    }
}

fn history(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Writes the true ln σ on the reconstruction grid.
pub fn cmd_phantom(cfg: &RunConfig, out: &Path) -> Result<Metadata, CliError> {
    prepare(cfg, out)?;
    let spec = cfg.phantom_spec()?;
    let mut man = Manifest::new("phantom", cfg, out);
    fs::write(out.join("phantom.txt"), spec.to_text()).map_err(AetError::from)?;
    write_field(&out.join(TRUTH_FILE), &spec.rasterize(&cfg.recon_grid(), Output::LnSigma)?)?;
    man.output("phantom.txt")?;
    man.output(TRUTH_FILE)?;
    man.write("phantom")
}

fn write_sinogram(path: &Path, s: &Sinogram) -> Result<(), CliError> {
    let g = &s.geometry;
    write_array(path, &[g.count(), g.fronts()], &s.values)?;
    let mut meta = Metadata::new();
    meta.set("kind", s.kind.as_str())
        .set("pair", pair_label(s.pair))
        .set("transducers", g.count())
        .set("fronts", g.fronts())
        .set("radius", g.radius())
        .set("t_max", g.t_max())
        .set("width", g.width());
    meta.write(path)?;
    Ok(())
}

pub fn read_sinogram(path: &Path) -> Result<Sinogram, CliError> {
    let (dims, values) = read_array(path)?;
    let meta = Metadata::read(path)?;
    let num = |k: &str| -> Result<f64, CliError> {
        meta.get(k)
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| CliError::Input(format!("{}: bad or missing metadata `{k}`", path.display())))
    };
    let array = TransducerArray::new(num("transducers")? as usize, num("fronts")? as usize, num("radius")?, num("t_max")?, num("width")?)?;
    if dims != [array.count(), array.fronts()] {
        return Err(CliError::Input(format!("{}: shape {dims:?} disagrees with its metadata", path.display())));
    }
    let label = meta.get("pair").unwrap_or("");
    let digits: Vec<usize> = label.chars().filter_map(|c| c.to_digit(10)).map(|d| d as usize).collect();
    if digits.len() != 2 || digits.contains(&0) {
        return Err(CliError::Input(format!("{}: bad pair label `{label}`", path.display())));
    }
    let kind = SinogramKind::parse(meta.get("kind").unwrap_or(""))?;
    Ok(Sinogram { values, pair: (digits[0] - 1, digits[1] - 1), geometry: array, kind })
}

/// 2D: one sinogram per current pair. 3D: focused power densities on the
/// reconstruction grid. Noise of the configured level is added per pair
/// with seed `noise.seed + k`.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Metadata, CliError> {
    cmd_phantom(cfg, out)?;
    let mut man = Manifest::new("simulate", cfg, out);
    let spec = cfg.phantom_spec()?;
    let fine = cfg.forward_grid();
    let sigma = spec.rasterize(&fine, Output::Sigma)?;
    let pairs = pairs(cfg)?;
    let currents = pairs.last().map_or(0, |p| p.1 + 1);
    let noise = cfg.noise.level;
    if cfg.experiment.dim == 2 {
        let array = cfg.array()?;
        let m = if cfg.probe.measurement == Measurement::Linearized {
            Some(power_densities_for(&sigma, currents, cfg.recon.tol)?.0)
        } else {
            None
        };
        for (k, &pair) in pairs.iter().enumerate() {
            let s = match &m {
                Some(m) => measure_linearized(&m[k], &array, pair)?,
                None => {
                    let opts = PhysicalOptions {
                        amplitude: cfg.probe.amplitude,
                        tol: cfg.recon.tol,
                        cell_tol: cfg.probe.cell_tol,
                    };
                    measure_physical(&sigma, pair, &array, opts)?
                }
            };
            let s = if noise > 0.0 { add_noise(&s, noise, cfg.noise.seed + k as u64)? } else { s };
            let name = sinogram_file(pair);
            write_sinogram(&out.join(&name), &s)?;
            man.output(&name)?;
        }
    } else {
        let (m, _) = power_densities_for(&sigma, currents, cfg.recon.tol)?;
        let coarse = cfg.recon_grid();
        for (k, (&pair, f)) in pairs.iter().zip(&m).enumerate() {
            let f = f.restrict_to(&coarse)?;
            let f = if noise > 0.0 { add_noise(&f, noise, cfg.noise.seed + k as u64)? } else { f };
            let name = power_density_file(pair);
            write_field(&out.join(&name), &f)?;
            man.output(&name)?;
        }
    }
    man.set("noise.seeds", history(&(0..pairs.len()).map(|k| (cfg.noise.seed + k as u64) as f64).collect::<Vec<_>>()));
    man.output(TRUTH_FILE)?;
    man.write("simulate")
}

/// Focuses the 2D sinograms in `out` onto the reconstruction grid.
pub fn cmd_focus(cfg: &RunConfig, out: &Path) -> Result<Metadata, CliError> {
    if cfg.experiment.dim != 2 {
        return Err(CliError::Config("experiment.dim: focusing applies to 2D experiments".into()));
    }
    let mut man = Manifest::new("focus", cfg, out);
    let grid = cfg.recon_grid();
    for pair in pairs(cfg)? {
        let name = sinogram_file(pair);
        let s = read_sinogram(&require(out, &name)?)?;
        if s.pair != pair {
            return Err(CliError::Input(format!("{name} holds pair {}", pair_label(s.pair))));
        }
        man.input(&name)?;
        let f = focus(&s, &grid)?;
        let target = power_density_file(pair);
        write_field(&out.join(&target), &f.field)?;
        man.output(&target)?;
    }
    man.write("focus")
}

fn load_power_densities(cfg: &RunConfig, out: &Path, man: &mut Manifest) -> Result<Vec<ScalarField>, CliError> {
    let grid = cfg.recon_grid();
    pairs(cfg)?
        .into_iter()
        .map(|pair| {
            let name = power_density_file(pair);
            let f = read_field(&require(out, &name)?)?;
            grid.ensure_same(f.grid())?;
            man.input(&name)?;
            Ok(f)
        })
        .collect()
}

/// Focuses (2D, when no power densities are present yet) and reconstructs.
/// If `truth_ln_sigma.aetf` is present the ln σ error of every iterate is
/// recorded.
pub fn cmd_reconstruct(cfg: &RunConfig, out: &Path) -> Result<Metadata, CliError> {
    if cfg.experiment.dim == 2 && pairs(cfg)?.iter().any(|&p| !out.join(power_density_file(p)).is_file()) {
        cmd_focus(cfg, out)?;
    }
    let mut man = Manifest::new("reconstruct", cfg, out);
    let m = load_power_densities(cfg, out, &mut man)?;
    let grid = cfg.recon_grid();
    let truth = if out.join(TRUTH_FILE).is_file() {
        let t = read_field(&out.join(TRUTH_FILE))?;
        grid.ensure_same(t.grid())?;
        man.input(TRUTH_FILE)?;
        Some(t)
    } else {
        None
    };
    let opts = ReconOptions { tol: cfg.recon.tol, truth_ln_sigma: truth };
    let sigma0 = ScalarField::constant(grid, 1.0);
    let n = cfg.recon.iterations;
    let result = if cfg.experiment.dim == 2 {
        reconstruct2d(&m, &sigma0, n, &opts)
    } else {
        reconstruct3d(&m, &sigma0, n, cfg.mode()?, &opts)
    };
    match result {
        Ok(r) => {
            record(&r, out, &mut man)?;
            man.set("status", "ok");
            man.write("reconstruct")
        }
        Err(AetError::Reconstruction { iteration, partial, source }) => {
            record(&partial, out, &mut man)?;
            man.set("status", format!("failed at iteration {iteration}: {source}"));
            man.write("reconstruct")?;
            Err(CliError::Numeric(AetError::Reconstruction { iteration, partial, source }))
        }
        Err(e) => Err(e.into()),
    }
}

fn record(r: &ReconResult, out: &Path, man: &mut Manifest) -> Result<(), CliError> {
    for (k, it) in r.iterates.iter().enumerate() {
        let name = iterate_file(k);
        write_field(&out.join(&name), it)?;
        man.output(&name)?;
    }
    write_field(&out.join(SIGMA_FILE), &r.sigma)?;
    man.output(SIGMA_FILE)?;
    man.set("iterations", r.iterates.len());
    man.set("residual_history", history(&r.residual_history));
    if !r.error_history.is_empty() {
        man.set("error_history", history(&r.error_history));
    }
    if let Some(why) = &r.stopped_early {
        man.set("stopped_early", why);
    }
    Ok(())
}

/// `name=value` lines comparing two fields.
pub fn compare_fields(a: &ScalarField, b: &ScalarField) -> Result<Vec<(String, String)>, CliError> {
    Ok(vec![
        ("rel_l2".into(), rel_l2(a, b)?.to_string()),
        ("max_error".into(), max_abs_error(a, b)?.to_string()),
    ])
}

/// `name=value` lines with the per-iteration history of a reconstruction in `out`.
pub fn reconstruction_metrics(out: &Path) -> Result<Vec<(String, String)>, CliError> {
    let path = require(out, &manifest_file("reconstruct"))?;
    let text = fs::read_to_string(&path).map_err(AetError::from)?;
    let meta = Metadata::parse(&text)?;
    let mut lines = Vec::new();
    for key in ["residual_history", "error_history"] {
        if let Some(v) = meta.get(key).filter(|v| !v.is_empty()) {
            let name = key.trim_end_matches("_history");
            for (k, x) in v.split(',').enumerate() {
                lines.push((format!("iteration.{k}.{name}"), x.to_string()));
            }
        }
    }
    if let Some(v) = meta.get("status") {
        lines.push(("status".into(), v.to_string()));
    }
    Ok(lines)
}
