//! Config-driven front end over [`wfi_core`]: dataset synthesis, the two
//! reconstruction pipelines, dispersion-curve extraction, and balance
//! verification, each writing plain CSV artifacts into an output directory.
//!
//! Every command is deterministic under (config, seed): a rerun produces
//! byte-identical CSV payloads. Wall-clock time is recorded only in
//! `run_manifest.txt`, which — together with the verbatim `config.txt` copy —
//! is sufficient to repeat the run exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use wfi_core::config::Config;
use wfi_core::direct::{train_direct, DirectInversionConfig, ReconstructionResult, TargetPde};
use wfi_core::grid::{Dataset, FieldData, Grid2D, RegionMap};
use wfi_core::physics::{
    balance_terms, dispersion_frequency, fit_chi_balance, nondimensionalize, Materials, PdeKind,
    PlaneStrainMaterial, PlateMaterial, Quantity, ScalingFrame,
};
use wfi_core::pinn::{train_pinn, GammaMode, MisfitNorm, ParamMode, PinnConfig, PinnResult};
use wfi_core::signal::{add_white_noise, spectral_derivative, spectral_lowpass, MultiIndex};
use wfi_core::synth::{
    extract_dispersion, flexural_dataset, planestrain_dataset, synth_dispersive_record,
};
use wfi_core::{io, Error, Result};

/// The five pipelines the binary exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    InvertDirect,
    InvertPinn,
    Dispersion,
    VerifyBalance,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::InvertDirect => "invert-direct",
            Command::InvertPinn => "invert-pinn",
            Command::Dispersion => "dispersion",
            Command::VerifyBalance => "verify-balance",
        }
    }

    /// The config section a command reads.
    fn section(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::InvertDirect => "direct",
            Command::InvertPinn => "pinn",
            Command::Dispersion => "dispersion",
            Command::VerifyBalance => "balance",
        }
    }
}

/// Process exit code for a finished run: 0 success, 2 configuration or I/O
/// error, 3 numerical abort inside a training loop.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(Error::Numerical { .. }) => 3,
        Err(_) => 2,
    }
}

/// Execute one command: parse the config, run the pipeline, write artifacts
/// plus `run_manifest.txt` and a verbatim `config.txt` copy into `out`.
/// `seed` overrides the config's global `seed` key (default 0).
pub fn run(command: Command, config_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let text = std::fs::read_to_string(config_path)?;
    let cfg = Config::parse(&text)?;
    cfg.assert_only("", &["seed"])?;
    let mut allowed = vec![command.section()];
    if command == Command::Synth {
        allowed.push("frame");
    }
    for name in cfg.section_names() {
        if !allowed.contains(&name) {
            return Err(Error::Config(format!(
                "section [{name}] does not belong to `{}`",
                command.name()
            )));
        }
    }
    let seed = match seed {
        Some(s) => s,
        None => cfg.opt_u64("", "seed")?.unwrap_or(0),
    };
    let config_dir = config_path.parent().unwrap_or(Path::new("")).to_path_buf();

    std::fs::create_dir_all(out)?;
    let start = Instant::now();
    let notes = match command {
        Command::Synth => cmd_synth(&cfg, out, seed)?,
        Command::InvertDirect => cmd_invert_direct(&cfg, &config_dir, out, seed)?,
        Command::InvertPinn => cmd_invert_pinn(&cfg, &config_dir, out, seed)?,
        Command::Dispersion => cmd_dispersion(&cfg, out)?,
        Command::VerifyBalance => cmd_verify_balance(&cfg, &config_dir, out)?,
    };

    std::fs::write(out.join("config.txt"), &text)?;
    let mut manifest = String::new();
    let _ = writeln!(manifest, "command = {}", command.name());
    let _ = writeln!(manifest, "config = config.txt");
    let _ = writeln!(manifest, "seed = {seed}");
    let _ = writeln!(manifest, "wall_seconds = {:.3}", start.elapsed().as_secs_f64());
    for (key, value) in &notes {
        let _ = writeln!(manifest, "{key} = {value}");
    }
    std::fs::write(out.join("run_manifest.txt"), manifest)?;
    Ok(())
}

type Notes = Vec<(String, String)>;

fn note(notes: &mut Notes, key: &str, value: impl std::fmt::Display) {
    notes.push((key.to_string(), value.to_string()));
}

/// `i,j,value` CSV of a real nodal field (row-major to match the field
/// formats; floats printed shortest-round-trip).
fn scalar_csv(grid: Grid2D, values: &[f64]) -> String {
    let mut text = String::from("i,j,value\n");
    for k in 0..grid.len() {
        let (i, j) = grid.ij(k);
        let _ = writeln!(text, "{i},{j},{}", values[k]);
    }
    text
}

fn resolve(config_dir: &Path, raw: &str) -> PathBuf {
    let p = Path::new(raw);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config_dir.join(p)
    }
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

/// Fully resolved synthesis parameters: a preset fills every field, explicit
/// keys override or (without a preset) must cover the structural ones.
struct SynthPlan {
    pde: PdeKind,
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    origin: Option<[f64; 2]>,
    layout: Layout,
    mu: Vec<f64>,
    lambda: Vec<f64>,
    rho: Vec<f64>,
    chi: Vec<f64>,
    nu: f64,
    h: f64,
    frequency: f64,
    sources: usize,
    waves: usize,
}

enum Layout {
    Single,
    Quadrants,
    StripsX(Vec<usize>),
}

impl Layout {
    fn region_count(&self) -> usize {
        match self {
            Layout::Single => 1,
            Layout::Quadrants => 4,
            Layout::StripsX(w) => w.len(),
        }
    }
}

/// The bundled specimens. `pi1`/`pi2` are the square plane-strain targets
/// (homogeneous, resp. four quadrants with μ_j = j, λ_j = 2j/3, driven at
/// ω = 3.91); the two plate presets carry χ = 1 (single) and the three-strip
/// χ = {0.91, 1, 0.51} layout driven at f = 0.336 resp. 0.17.
fn preset(name: &str) -> Result<SynthPlan> {
    let plan = match name {
        "pi1" | "pi2" => SynthPlan {
            pde: PdeKind::PlaneStrain,
            nx: 50,
            ny: 50,
            dx: 8.0 / 49.0,
            dy: 8.0 / 49.0,
            origin: Some([-4.0, -4.0]),
            layout: if name == "pi1" { Layout::Single } else { Layout::Quadrants },
            mu: if name == "pi1" { vec![1.0] } else { vec![1.0, 2.0, 3.0, 4.0] },
            lambda: if name == "pi1" {
                vec![0.47]
            } else {
                vec![2.0 / 3.0, 4.0 / 3.0, 2.0, 8.0 / 3.0]
            },
            rho: vec![1.0],
            chi: vec![],
            nu: 0.0,
            h: 0.0,
            frequency: 3.91,
            sources: if name == "pi1" { 1 } else { 5 },
            waves: 8,
        },
        "plate-al" => SynthPlan {
            pde: PdeKind::Flexural,
            nx: 50,
            ny: 50,
            dx: 0.116,
            dy: 0.116,
            origin: None,
            layout: Layout::Single,
            mu: vec![],
            lambda: vec![],
            rho: vec![],
            chi: vec![1.0],
            nu: 0.33,
            h: 0.15,
            frequency: 0.336,
            sources: 1,
            waves: 8,
        },
        "plate-ti-st-br" => SynthPlan {
            pde: PdeKind::Flexural,
            nx: 60,
            ny: 60,
            dx: 0.1375,
            dy: 0.1375,
            origin: None,
            layout: Layout::StripsX(vec![20, 20, 20]),
            mu: vec![],
            lambda: vec![],
            rho: vec![],
            chi: vec![0.91, 1.0, 0.51],
            nu: 0.33,
            h: 0.15,
            frequency: 0.17,
            sources: 1,
            waves: 8,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; expected pi1, pi2, plate-al or plate-ti-st-br"
            )))
        }
    };
    Ok(plan)
}

/// Broadcast a per-region list: one value is shared by all regions.
fn broadcast(mut values: Vec<f64>, regions: usize, what: &str) -> Result<Vec<f64>> {
    if values.len() == 1 && regions > 1 {
        values = vec![values[0]; regions];
    }
    if values.len() != regions {
        return Err(Error::Config(format!(
            "{what}: {} values for {regions} regions",
            values.len()
        )));
    }
    Ok(values)
}

fn cmd_synth(cfg: &Config, out: &Path, seed: u64) -> Result<Notes> {
    const KEYS: &[&str] = &[
        "preset", "pde", "nx", "ny", "dx", "dy", "origin_x", "origin_y", "layout", "widths",
        "mu", "lambda", "rho", "chi", "nu", "h", "frequency", "sources", "waves", "noise",
        "derivatives",
    ];
    cfg.assert_only("synth", KEYS)?;
    cfg.assert_only("frame", &["length_m", "modulus_pa", "density_kgm3"])?;
    if !cfg.has_section("synth") {
        return Err(Error::Config("missing section [synth]".into()));
    }

    let mut plan = match cfg.opt_str("synth", "preset")? {
        Some(name) => preset(name)?,
        None => SynthPlan {
            pde: match cfg.get_str("synth", "pde")? {
                "plane-strain" => PdeKind::PlaneStrain,
                "flexural" => PdeKind::Flexural,
                other => {
                    return Err(Error::Config(format!(
                        "[synth] pde = {other:?}; expected plane-strain or flexural"
                    )))
                }
            },
            nx: cfg.get_usize("synth", "nx")?,
            ny: cfg.get_usize("synth", "ny")?,
            dx: cfg.get_f64("synth", "dx")?,
            dy: 0.0, // filled from the dy key (or dx) below
            origin: None,
            layout: Layout::Single,
            mu: vec![1.0],
            lambda: vec![1.0],
            rho: vec![1.0],
            chi: vec![1.0],
            nu: 0.3,
            h: 0.1,
            frequency: cfg.get_f64("synth", "frequency")?,
            sources: 1,
            waves: 8,
        },
    };

    // Explicit keys override the preset (or the placeholder defaults).
    if let Some(v) = cfg.opt_usize("synth", "nx")? {
        plan.nx = v;
    }
    if let Some(v) = cfg.opt_usize("synth", "ny")? {
        plan.ny = v;
    }
    if let Some(v) = cfg.opt_f64("synth", "dx")? {
        plan.dx = v;
    }
    plan.dy = match cfg.opt_f64("synth", "dy")? {
        Some(v) => v,
        None if plan.dy > 0.0 => plan.dy,
        None => plan.dx,
    };
    if cfg.has("synth", "origin_x") || cfg.has("synth", "origin_y") {
        plan.origin = Some([cfg.get_f64("synth", "origin_x")?, cfg.get_f64("synth", "origin_y")?]);
    }
    if let Some(v) = cfg.opt_str("synth", "layout")? {
        plan.layout = match v {
            "single" => Layout::Single,
            "quadrants" => Layout::Quadrants,
            "strips-x" => Layout::StripsX(cfg.opt_usize_list("synth", "widths")?.ok_or_else(
                || Error::Config("[synth] layout = strips-x needs a widths list".into()),
            )?),
            other => {
                return Err(Error::Config(format!(
                    "[synth] layout = {other:?}; expected single, quadrants or strips-x"
                )))
            }
        };
    } else if cfg.has("synth", "widths") {
        return Err(Error::Config("[synth] widths requires layout = strips-x".into()));
    }
    if let Some(v) = cfg.opt_f64_list("synth", "mu")? {
        plan.mu = v;
    }
    if let Some(v) = cfg.opt_f64_list("synth", "lambda")? {
        plan.lambda = v;
    }
    if let Some(v) = cfg.opt_f64_list("synth", "rho")? {
        plan.rho = v;
    }
    if let Some(v) = cfg.opt_f64_list("synth", "chi")? {
        plan.chi = v;
    }
    if let Some(v) = cfg.opt_f64("synth", "nu")? {
        plan.nu = v;
    }
    if let Some(v) = cfg.opt_f64("synth", "h")? {
        plan.h = v;
    }
    if let Some(v) = cfg.opt_f64("synth", "frequency")? {
        plan.frequency = v;
    }
    if let Some(v) = cfg.opt_usize("synth", "sources")? {
        plan.sources = v;
    }
    if let Some(v) = cfg.opt_usize("synth", "waves")? {
        plan.waves = v;
    }
    let noise = cfg.opt_f64("synth", "noise")?.unwrap_or(0.0);
    let derivatives = cfg.opt_bool("synth", "derivatives")?.unwrap_or(false);
    if noise > 0.0 && derivatives {
        return Err(Error::Config(
            "[synth] derivatives = true with noise > 0: the attached analytic derivatives \
             would not be the derivatives of the noisy fields"
                .into(),
        ));
    }

    // A scaling frame marks every numeric key as physical; convert before
    // building anything.
    if cfg.has_section("frame") {
        let frame = ScalingFrame::new(
            cfg.get_f64("frame", "length_m")?,
            cfg.get_f64("frame", "modulus_pa")?,
            cfg.get_f64("frame", "density_kgm3")?,
        )?;
        let len = |v: f64| nondimensionalize(Quantity::Length, v, &frame);
        plan.dx = len(plan.dx);
        plan.dy = len(plan.dy);
        plan.h = len(plan.h);
        if let Some(o) = plan.origin {
            plan.origin = Some([len(o[0]), len(o[1])]);
        }
        plan.frequency = nondimensionalize(Quantity::Frequency, plan.frequency, &frame);
        for v in plan.mu.iter_mut().chain(plan.lambda.iter_mut()) {
            *v = nondimensionalize(Quantity::Modulus, *v, &frame);
        }
        for v in plan.rho.iter_mut() {
            *v = nondimensionalize(Quantity::Density, *v, &frame);
        }
        for v in plan.chi.iter_mut() {
            *v = nondimensionalize(Quantity::StiffnessDensityRatio, *v, &frame);
        }
    }

    let origin = plan.origin.unwrap_or([
        -(plan.nx as f64 - 1.0) * plan.dx / 2.0,
        -(plan.ny as f64 - 1.0) * plan.dy / 2.0,
    ]);
    let grid = Grid2D::new(plan.nx, plan.ny, plan.dx, plan.dy, origin)?;
    let regions = match &plan.layout {
        Layout::Single => RegionMap::single(grid),
        Layout::Quadrants => RegionMap::quadrants(grid)?,
        Layout::StripsX(widths) => RegionMap::strips_x(grid, widths)?,
    };
    let nr = plan.layout.region_count();

    let mut dataset = match plan.pde {
        PdeKind::PlaneStrain => {
            let mu = broadcast(plan.mu, nr, "[synth] mu")?;
            let lambda = broadcast(plan.lambda, nr, "[synth] lambda")?;
            let rho = broadcast(plan.rho, nr, "[synth] rho")?;
            let mats: Vec<PlaneStrainMaterial> = (0..nr)
                .map(|r| PlaneStrainMaterial::new(mu[r], lambda[r], rho[r]))
                .collect::<Result<_>>()?;
            planestrain_dataset(
                grid,
                &regions,
                &mats,
                plan.frequency,
                plan.sources,
                plan.waves,
                seed,
                derivatives,
            )?
        }
        PdeKind::Flexural => {
            let chi = broadcast(plan.chi, nr, "[synth] chi")?;
            let mats: Vec<PlateMaterial> = chi
                .iter()
                .map(|&c| PlateMaterial::new(c, plan.nu, plan.h))
                .collect::<Result<_>>()?;
            flexural_dataset(
                grid,
                &regions,
                &mats,
                plan.frequency,
                plan.sources,
                plan.waves,
                seed,
                derivatives,
            )?
        }
    };

    if noise > 0.0 {
        for (k, rec) in dataset.records.iter_mut().enumerate() {
            rec.field = add_white_noise(&rec.field, noise, seed.wrapping_add(0x0D15_EA5E + k as u64))?;
        }
    }

    let dir = out.join("dataset");
    io::save_dataset(&dataset, &dir)?;

    let mut notes = Notes::new();
    note(&mut notes, "dataset", "dataset");
    note(&mut notes, "pde", match plan.pde {
        PdeKind::PlaneStrain => "plane-strain",
        PdeKind::Flexural => "flexural",
    });
    note(&mut notes, "grid", format!("{}x{}", plan.nx, plan.ny));
    note(&mut notes, "regions", nr);
    note(&mut notes, "records", dataset.records.len());
    note(&mut notes, "noise", noise);
    Ok(notes)
}

// ---------------------------------------------------------------------------
// shared inversion plumbing
// ---------------------------------------------------------------------------

/// Target-PDE parameters: explicit config keys win, otherwise they are read
/// off the dataset materials (which must then be uniform across regions).
fn resolve_target(cfg: &Config, section: &str, dataset: &Dataset) -> Result<TargetPde> {
    match dataset.pde {
        PdeKind::PlaneStrain => {
            let rho = match cfg.opt_f64(section, "rho")? {
                Some(v) => v,
                None => match &dataset.materials {
                    Some(Materials::PlaneStrain(mats)) => {
                        let rho = mats[0].rho;
                        if mats.iter().any(|m| m.rho != rho) {
                            return Err(Error::Config(format!(
                                "dataset has region-dependent ρ; set [{section}] rho explicitly"
                            )));
                        }
                        rho
                    }
                    _ => {
                        return Err(Error::Config(format!(
                            "dataset carries no materials; set [{section}] rho"
                        )))
                    }
                },
            };
            Ok(TargetPde::PlaneStrain { rho })
        }
        PdeKind::Flexural => {
            let from_mats = match &dataset.materials {
                Some(Materials::Plate(mats)) => {
                    let (nu, h) = (mats[0].nu, mats[0].h);
                    if mats.iter().any(|m| m.nu != nu || m.h != h) {
                        None
                    } else {
                        Some((nu, h))
                    }
                }
                _ => None,
            };
            let nu = match cfg.opt_f64(section, "nu")? {
                Some(v) => v,
                None => {
                    from_mats
                        .ok_or_else(|| {
                            Error::Config(format!("set [{section}] nu (not in dataset materials)"))
                        })?
                        .0
                }
            };
            let h = match cfg.opt_f64(section, "h")? {
                Some(v) => v,
                None => {
                    from_mats
                        .ok_or_else(|| {
                            Error::Config(format!("set [{section}] h (not in dataset materials)"))
                        })?
                        .1
                }
            };
            Ok(TargetPde::Flexural { nu, h })
        }
    }
}

fn load_input_dataset(cfg: &Config, section: &str, config_dir: &Path) -> Result<Dataset> {
    let raw = cfg.get_str(section, "data")?;
    io::load_dataset(&resolve(config_dir, raw))
}

/// Per-unknown, per-region `name,region,mean,std` table.
fn stats_csv(names: &[&str], stats: &[Vec<(f64, f64)>]) -> String {
    let mut text = String::from("name,region,mean,std\n");
    for (name, rows) in names.iter().zip(stats) {
        for (region, (mean, std)) in rows.iter().enumerate() {
            let _ = writeln!(text, "{name},{region},{mean},{std}");
        }
    }
    text
}

/// `name,xi` rows plus one pointwise |error|/‖truth‖_∞ field per unknown.
fn write_misfit(
    dir: &Path,
    grid: Grid2D,
    names: &[&str],
    misfit: &[(f64, Vec<f64>)],
) -> Result<()> {
    let mut text = String::from("name,xi\n");
    for (name, (xi, field)) in names.iter().zip(misfit) {
        let _ = writeln!(text, "{name},{xi}");
        std::fs::write(dir.join(format!("error_{name}.csv")), scalar_csv(grid, field))?;
    }
    std::fs::write(dir.join("misfit.csv"), text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// invert-direct
// ---------------------------------------------------------------------------

fn cmd_invert_direct(cfg: &Config, config_dir: &Path, out: &Path, seed: u64) -> Result<Notes> {
    const KEYS: &[&str] = &[
        "data", "rho", "nu", "h", "hidden", "alpha_hidden", "learning_rate", "epochs", "margin",
        "lowpass",
    ];
    cfg.assert_only("direct", KEYS)?;
    let dataset = load_input_dataset(cfg, "direct", config_dir)?;
    let target = resolve_target(cfg, "direct", &dataset)?;

    let mut config = match target {
        TargetPde::PlaneStrain { rho } => DirectInversionConfig::plane_strain(rho),
        TargetPde::Flexural { nu, h } => DirectInversionConfig::flexural(nu, h),
    };
    if let Some(widths) = cfg.opt_usize_list("direct", "hidden")? {
        config.theta_hidden = vec![widths; config.target.unknown_names().len()];
    }
    if let Some(widths) = cfg.opt_usize_list("direct", "alpha_hidden")? {
        config.alpha_hidden = widths;
    }
    if let Some(v) = cfg.opt_f64("direct", "learning_rate")? {
        config.learning_rate = v;
    }
    if let Some(v) = cfg.opt_usize("direct", "epochs")? {
        config.epochs = v;
    }
    if let Some(v) = cfg.opt_usize("direct", "margin")? {
        config.margin = v;
    }
    config.lowpass_cutoff = cfg.opt_f64("direct", "lowpass")?;
    config.seed = seed;

    let result = train_direct(&dataset, &config, dataset.materials.as_ref())?;
    write_direct_outputs(out, &result)?;

    let mut notes = Notes::new();
    note(&mut notes, "records", dataset.records.len());
    note(&mut notes, "epochs", config.epochs);
    if let Some(last) = result.history.last() {
        note(&mut notes, "final_total", last.total);
        note(&mut notes, "final_residual", last.residual);
        note(&mut notes, "final_penalty", last.penalty);
    }
    if let Some(misfit) = &result.misfit {
        for (name, (xi, _)) in result.names.iter().zip(misfit) {
            note(&mut notes, &format!("xi_{name}"), xi);
        }
    }
    Ok(notes)
}

fn write_direct_outputs(dir: &Path, result: &ReconstructionResult) -> Result<()> {
    for (name, field) in result.names.iter().zip(&result.theta) {
        std::fs::write(dir.join(format!("theta_{name}.csv")), scalar_csv(result.grid, field))?;
    }
    std::fs::write(dir.join("alpha.csv"), scalar_csv(result.grid, &result.alpha))?;
    std::fs::write(dir.join("stats.csv"), stats_csv(&result.names, &result.stats))?;
    let mut history = String::from("epoch,total,residual,penalty\n");
    for (epoch, loss) in result.history.iter().enumerate() {
        let _ = writeln!(history, "{epoch},{},{},{}", loss.total, loss.residual, loss.penalty);
    }
    std::fs::write(dir.join("history.csv"), history)?;
    if let Some(misfit) = &result.misfit {
        write_misfit(dir, result.grid, &result.names, misfit)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// invert-pinn
// ---------------------------------------------------------------------------

fn cmd_invert_pinn(cfg: &Config, config_dir: &Path, out: &Path, seed: u64) -> Result<Notes> {
    const KEYS: &[&str] = &[
        "data", "rho", "nu", "h", "hidden", "param_mode", "theta_hidden", "misfit",
        "sobolev_order", "gamma", "gamma_sweep", "learning_rate", "epochs", "seam_margin",
    ];
    cfg.assert_only("pinn", KEYS)?;
    let dataset = load_input_dataset(cfg, "pinn", config_dir)?;
    let target = resolve_target(cfg, "pinn", &dataset)?;

    let mut config = match target {
        TargetPde::PlaneStrain { rho } => PinnConfig::plane_strain(rho),
        TargetPde::Flexural { nu, h } => PinnConfig::flexural(nu, h),
    };
    if let Some(widths) = cfg.opt_usize_list("pinn", "hidden")? {
        config.surrogate_hidden = widths;
    }
    let unknowns = config.target.unknown_names().len();
    if let Some(mode) = cfg.opt_str("pinn", "param_mode")? {
        config.param_mode = match mode {
            "scalar" => ParamMode::Scalar,
            "distributed" => ParamMode::Distributed,
            "network" => {
                let widths =
                    cfg.opt_usize_list("pinn", "theta_hidden")?.unwrap_or_else(|| vec![16, 16]);
                ParamMode::SeparateNetwork { hidden: vec![widths; unknowns] }
            }
            other => {
                return Err(Error::Config(format!(
                    "[pinn] param_mode = {other:?}; expected scalar, distributed or network"
                )))
            }
        };
    } else if cfg.has("pinn", "theta_hidden") {
        return Err(Error::Config("[pinn] theta_hidden requires param_mode = network".into()));
    }
    match cfg.opt_str("pinn", "misfit")? {
        Some("l2") => config.misfit = MisfitNorm::L2,
        Some("sobolev") => {
            config.misfit = MisfitNorm::SobolevAuto {
                order: cfg.opt_usize("pinn", "sobolev_order")?.unwrap_or(2) as u8,
            }
        }
        Some(other) => {
            return Err(Error::Config(format!(
                "[pinn] misfit = {other:?}; expected l2 or sobolev"
            )))
        }
        None => {
            if let Some(order) = cfg.opt_usize("pinn", "sobolev_order")? {
                config.misfit = MisfitNorm::SobolevAuto { order: order as u8 };
            }
        }
    }
    if let Some(raw) = cfg.opt_str("pinn", "gamma")? {
        config.gamma = if raw == "inertia" {
            GammaMode::InertiaRule
        } else {
            GammaMode::Manual(raw.parse().map_err(|_| {
                Error::Config(format!("[pinn] gamma = {raw:?}; expected `inertia` or a number"))
            })?)
        };
    }
    if let Some(v) = cfg.opt_f64("pinn", "learning_rate")? {
        config.learning_rate = v;
    }
    if let Some(v) = cfg.opt_usize("pinn", "epochs")? {
        config.epochs = v;
    }
    if let Some(v) = cfg.opt_usize("pinn", "seam_margin")? {
        config.seam_margin = v;
    }
    config.seed = seed;

    let truth = dataset.materials.as_ref();
    let mut notes = Notes::new();
    note(&mut notes, "records", dataset.records.len());
    note(&mut notes, "epochs", config.epochs);

    // γ sweep: one full training per value, each in its own subdirectory,
    // plus a flat summary table. No sweep key → a single run at the root.
    if let Some(sweep) = cfg.opt_f64_list("pinn", "gamma_sweep")? {
        if sweep.is_empty() {
            return Err(Error::Config("[pinn] gamma_sweep is empty".into()));
        }
        let mut summary = String::from("gamma,total,misfit,residual");
        for name in config.target.unknown_names() {
            let _ = write!(summary, ",mean_{name}");
        }
        summary.push('\n');
        for (k, &gamma) in sweep.iter().enumerate() {
            let mut run_config = config.clone();
            run_config.gamma = GammaMode::Manual(gamma);
            let sub = out.join(format!("gamma_{k}"));
            std::fs::create_dir_all(&sub)?;
            let result = train_pinn(&dataset, &run_config, truth)?;
            write_pinn_outputs(&sub, &result, seed, run_config.epochs)?;
            let last = result.history.last().expect("epochs ≥ 1");
            let _ = write!(summary, "{gamma},{},{},{}", last.total, last.misfit, last.residual);
            for field in &result.theta {
                let mean = field.iter().sum::<f64>() / field.len() as f64;
                let _ = write!(summary, ",{mean}");
            }
            summary.push('\n');
        }
        std::fs::write(out.join("sweep.csv"), summary)?;
        note(&mut notes, "sweep_runs", sweep.len());
        return Ok(notes);
    }

    let result = train_pinn(&dataset, &config, truth)?;
    write_pinn_outputs(out, &result, seed, config.epochs)?;
    if let Some(last) = result.history.last() {
        note(&mut notes, "final_total", last.total);
        note(&mut notes, "final_misfit", last.misfit);
        note(&mut notes, "final_residual", last.residual);
    }
    if let Some(misfit) = &result.misfit {
        for (name, (xi, _)) in result.names.iter().zip(misfit) {
            note(&mut notes, &format!("xi_{name}"), xi);
        }
    }
    Ok(notes)
}

fn write_pinn_outputs(dir: &Path, result: &PinnResult, seed: u64, epochs: usize) -> Result<()> {
    for (name, field) in result.names.iter().zip(&result.theta) {
        std::fs::write(dir.join(format!("theta_{name}.csv")), scalar_csv(result.grid, field))?;
    }
    std::fs::write(dir.join("stats.csv"), stats_csv(&result.names, &result.stats))?;
    let mut history = String::from("epoch,total,misfit,residual\n");
    for (epoch, loss) in result.history.iter().enumerate() {
        let _ = writeln!(history, "{epoch},{},{},{}", loss.total, loss.misfit, loss.residual);
    }
    std::fs::write(dir.join("history.csv"), history)?;
    if !result.theta_history.is_empty() {
        let mut text = String::from("epoch");
        for name in &result.names {
            let _ = write!(text, ",{name}");
        }
        text.push('\n');
        for (epoch, values) in result.theta_history.iter().enumerate() {
            let _ = write!(text, "{epoch}");
            for v in values {
                let _ = write!(text, ",{v}");
            }
            text.push('\n');
        }
        std::fs::write(dir.join("theta_trajectory.csv"), text)?;
    }
    for (k, net) in result.surrogates.iter().enumerate() {
        io::save_checkpoint(net, seed, epochs, &dir.join(format!("surrogate_{k}")))?;
    }
    if let Some(misfit) = &result.misfit {
        write_misfit(dir, result.grid, &result.names, misfit)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// dispersion
// ---------------------------------------------------------------------------

fn cmd_dispersion(cfg: &Config, out: &Path) -> Result<Notes> {
    const KEYS: &[&str] =
        &["chi", "nu", "h", "f_c", "length", "points", "duration", "sample_rate"];
    cfg.assert_only("dispersion", KEYS)?;
    let mat = PlateMaterial::new(
        cfg.get_f64("dispersion", "chi")?,
        cfg.get_f64("dispersion", "nu")?,
        cfg.get_f64("dispersion", "h")?,
    )?;
    let f_c = cfg.get_f64("dispersion", "f_c")?;
    let length = cfg.get_f64("dispersion", "length")?;
    let points = cfg.opt_usize("dispersion", "points")?.unwrap_or(128);
    let duration = cfg.get_f64("dispersion", "duration")?;
    let sample_rate = cfg.get_f64("dispersion", "sample_rate")?;

    let record = synth_dispersive_record(length, points, &mat, f_c, duration, sample_rate)?;
    let dx = length / (points - 1) as f64;
    let ridge = extract_dispersion(&record, dx)?;

    // Overlay column: the closed-form frequency the plate relation assigns to
    // each measured wavelength (0 when the ridge sits at the k = 0 bin).
    let mut text = String::from("frequency,inv_wavelength,magnitude,theory_frequency\n");
    for p in &ridge {
        let theory = if p.inv_wavelength > 0.0 {
            dispersion_frequency(1.0 / p.inv_wavelength, &mat)?
        } else {
            0.0
        };
        let _ = writeln!(text, "{},{},{},{theory}", p.frequency, p.inv_wavelength, p.magnitude);
    }
    std::fs::write(out.join("dispersion.csv"), text)?;

    let mut notes = Notes::new();
    note(&mut notes, "ridge_points", ridge.len());
    if let (Some(lo), Some(hi)) = (ridge.first(), ridge.last()) {
        note(&mut notes, "f_min", lo.frequency);
        note(&mut notes, "f_max", hi.frequency);
    }
    Ok(notes)
}

// ---------------------------------------------------------------------------
// verify-balance
// ---------------------------------------------------------------------------

fn cmd_verify_balance(cfg: &Config, config_dir: &Path, out: &Path) -> Result<Notes> {
    const KEYS: &[&str] = &["data", "nu", "h", "frequency", "lowpass"];
    cfg.assert_only("balance", KEYS)?;
    let dataset = load_input_dataset(cfg, "balance", config_dir)?;
    if dataset.pde != PdeKind::Flexural {
        return Err(Error::Config("balance verification applies to flexural datasets".into()));
    }
    let (nu, h) = match resolve_target(cfg, "balance", &dataset)? {
        TargetPde::Flexural { nu, h } => (nu, h),
        TargetPde::PlaneStrain { .. } => unreachable!("pde checked above"),
    };
    let f_override = cfg.opt_f64("balance", "frequency")?;
    let lowpass = cfg.opt_f64("balance", "lowpass")?;

    let fourth: Vec<MultiIndex> = [(4u8, 0u8), (0, 4), (2, 2)]
        .iter()
        .map(|&(e1, e2)| MultiIndex::new(e1, e2))
        .collect::<Result<_>>()?;

    let mut table = String::from("record,region,chi_fit,mean_d,max_d\n");
    let mut worst = 0.0f64;
    for (k, rec) in dataset.records.iter().enumerate() {
        // A low-pass cutoff invalidates any attached derivatives: filter the
        // field, then differentiate spectrally.
        let field = match lowpass {
            Some(cut) => spectral_lowpass(&rec.field, &dataset.regions, cut)?,
            None => rec.field.clone(),
        };
        let v = match &field {
            FieldData::Scalar(s) => s,
            FieldData::Vector(_) => {
                return Err(Error::Dimension(format!("record {k} field is not scalar")))
            }
        };
        let f = f_override.unwrap_or(rec.frequency);
        let derivs: BTreeMap<MultiIndex, FieldData> =
            if lowpass.is_none() && fourth.iter().all(|e| rec.derivs.contains_key(e)) {
                fourth.iter().map(|&e| (e, rec.derivs[&e].clone())).collect()
            } else {
                fourth
                    .iter()
                    .map(|&e| Ok((e, spectral_derivative(&field, &dataset.regions, e)?)))
                    .collect::<Result<_>>()?
            };

        let chi_fit = fit_chi_balance(v, &derivs, &dataset.regions, nu, h, f)?;
        let mut composite = vec![0.0; dataset.grid.len()];
        for (label, &chi) in chi_fit.iter().enumerate() {
            let (_, _, d) = balance_terms(v, &derivs, chi, nu, h, f)?;
            let nodes = dataset.regions.nodes(label)?;
            let mut sum = 0.0;
            let mut max = 0.0f64;
            for &node in &nodes {
                composite[node] = d[node];
                sum += d[node];
                max = max.max(d[node]);
            }
            worst = worst.max(max);
            let mean = sum / nodes.len() as f64;
            let _ = writeln!(table, "{k},{label},{chi},{mean},{max}");
        }
        std::fs::write(
            out.join(format!("discrepancy_rec{k}.csv")),
            scalar_csv(dataset.grid, &composite),
        )?;
    }
    std::fs::write(out.join("balance.csv"), table)?;

    let mut notes = Notes::new();
    note(&mut notes, "records", dataset.records.len());
    note(&mut notes, "worst_max_d", worst);
    Ok(notes)
}
