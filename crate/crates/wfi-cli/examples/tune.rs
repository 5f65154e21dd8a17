//! Scratch budget-tuning harness; not part of the shipped artifact.

use std::collections::BTreeMap;
use std::time::Instant;

use wfi_core::direct::{train_direct, DirectInversionConfig};
use wfi_core::grid::{Dataset, FieldData, Grid2D, RegionMap, RegionRect};
use wfi_core::physics::{
    flexural_residual, inertia_factor, navier_residual, Materials, PlaneStrainMaterial,
    PlateMaterial,
};
use wfi_core::pinn::{train_pinn, GammaMode, MisfitNorm, ParamMode, PinnConfig};
use wfi_core::signal::{add_white_noise, spectral_derivative, spectral_lowpass, MultiIndex};
use wfi_core::synth::{flexural_dataset, planestrain_dataset};

fn pi1_dataset(n: usize, sources: usize, waves: usize, seed: u64, derivs: bool) -> Dataset {
    let dx = 8.0 / (n as f64 - 1.0);
    let grid = Grid2D::new(n, n, dx, dx, [-4.0, -4.0]).unwrap();
    let regions = RegionMap::single(grid);
    let mats = vec![PlaneStrainMaterial::new(1.0, 0.47, 1.0).unwrap()];
    planestrain_dataset(grid, &regions, &mats, 3.91, sources, waves, seed, derivs).unwrap()
}

fn pi2_dataset(n: usize, sources: usize, waves: usize, seed: u64, derivs: bool) -> Dataset {
    let dx = 8.0 / (n as f64 - 1.0);
    let grid = Grid2D::new(n, n, dx, dx, [-4.0, -4.0]).unwrap();
    let regions = RegionMap::quadrants(grid).unwrap();
    let mats: Vec<PlaneStrainMaterial> = (1..=4)
        .map(|j| PlaneStrainMaterial::new(j as f64, 2.0 * j as f64 / 3.0, 1.0).unwrap())
        .collect();
    planestrain_dataset(grid, &regions, &mats, 3.91, sources, waves, seed, derivs).unwrap()
}

fn strips_dataset(n: usize, dx: f64, waves: usize, seed: u64, derivs: bool) -> Dataset {
    let grid = Grid2D::new(n, n, dx, dx, [0.0, 0.0]).unwrap();
    let w = n / 3;
    let regions = RegionMap::strips_x(grid, &[w, w, n - 2 * w]).unwrap();
    let mats: Vec<PlateMaterial> = [0.91, 1.0, 0.51]
        .iter()
        .map(|&chi| PlateMaterial::new(chi, 0.33, 0.15).unwrap())
        .collect();
    flexural_dataset(grid, &regions, &mats, 0.17, 1, waves, seed, derivs).unwrap()
}

fn noisy(mut ds: Dataset, level: f64, seed: u64) -> Dataset {
    for (k, rec) in ds.records.iter_mut().enumerate() {
        rec.field = add_white_noise(&rec.field, level, seed + k as u64).unwrap();
    }
    ds
}

fn show_direct(tag: &str, ds: &Dataset, cfg: &DirectInversionConfig) {
    let t = Instant::now();
    let r = train_direct(ds, cfg, ds.materials.as_ref()).unwrap();
    let dt = t.elapsed().as_secs_f64();
    print!("{tag}: {dt:.1}s");
    for (name, rows) in r.names.iter().zip(&r.stats) {
        for (reg, (m, s)) in rows.iter().enumerate() {
            print!("  {name}{reg}={m:.4}±{s:.4}");
        }
    }
    if let Some(mis) = &r.misfit {
        for (name, (xi, _)) in r.names.iter().zip(mis) {
            print!("  xi_{name}={xi:.4}");
        }
    }
    println!();
}

fn show_pinn(tag: &str, ds: &Dataset, cfg: &PinnConfig) {
    let t = Instant::now();
    match train_pinn(ds, cfg, ds.materials.as_ref()) {
        Ok(r) => {
            let dt = t.elapsed().as_secs_f64();
            print!("{tag}: {dt:.1}s");
            for (name, rows) in r.names.iter().zip(&r.stats) {
                for (reg, (m, s)) in rows.iter().enumerate() {
                    print!("  {name}{reg}={m:.4}±{s:.4}");
                }
            }
            let last = r.history.last().unwrap();
            print!("  loss={:.3e}/{:.3e}", last.misfit, last.residual);
            println!();
        }
        Err(e) => println!("{tag}: FAILED {e}"),
    }
}

fn residual_scan(tag: &str, ds: &Dataset) {
    // Analytic residual (attached derivatives) and spectral residual at
    // several interior margins, both relative to the inertia-term max.
    for (ri, rec) in ds.records.iter().enumerate() {
        let n = ds.grid.len();
        let label_of = |k: usize| {
            let (i, j) = ds.grid.ij(k);
            ds.regions.label_at(i, j)
        };
        let (res_a, res_s, inertia): (Vec<f64>, Vec<f64>, Vec<f64>) = match (&rec.field, ds.materials.as_ref().unwrap()) {
            (FieldData::Vector(u), Materials::PlaneStrain(mats)) => {
                let omega = rec.frequency;
                let mu: Vec<f64> = (0..n).map(|k| mats[label_of(k)].mu).collect();
                let lambda: Vec<f64> = (0..n).map(|k| mats[label_of(k)].lambda).collect();
                let mut spec: BTreeMap<MultiIndex, FieldData> = BTreeMap::new();
                for (e1, e2) in [(2u8, 0u8), (0, 2), (1, 1)] {
                    let e = MultiIndex::new(e1, e2).unwrap();
                    spec.insert(e, spectral_derivative(&rec.field, &ds.regions, e).unwrap());
                }
                let ra = navier_residual(u, &rec.derivs, &mu, &lambda, 1.0, omega).unwrap();
                let rs = navier_residual(u, &spec, &mu, &lambda, 1.0, omega).unwrap();
                let norm2 = |f: &wfi_core::grid::VectorField2, k: usize| {
                    (f.component(0)[k].norm_sqr() + f.component(1)[k].norm_sqr()).sqrt()
                };
                (
                    (0..n).map(|k| norm2(&ra, k)).collect(),
                    (0..n).map(|k| norm2(&rs, k)).collect(),
                    (0..n).map(|k| omega * omega * norm2(u, k)).collect(),
                )
            }
            (FieldData::Scalar(v), Materials::Plate(mats)) => {
                let f = rec.frequency;
                let chi: Vec<f64> = (0..n).map(|k| mats[label_of(k)].chi).collect();
                let mut spec: BTreeMap<MultiIndex, FieldData> = BTreeMap::new();
                for (e1, e2) in [(4u8, 0u8), (0, 4), (2, 2)] {
                    let e = MultiIndex::new(e1, e2).unwrap();
                    spec.insert(e, spectral_derivative(&rec.field, &ds.regions, e).unwrap());
                }
                let ra = flexural_residual(v, &rec.derivs, &chi, mats[0].nu, mats[0].h, f).unwrap();
                let rs = flexural_residual(v, &spec, &chi, mats[0].nu, mats[0].h, f).unwrap();
                (
                    ra.values().iter().map(|c| c.norm()).collect(),
                    rs.values().iter().map(|c| c.norm()).collect(),
                    v.values().iter().map(|c| inertia_factor(mats[0].h, f) * c.norm()).collect(),
                )
            }
            _ => unreachable!(),
        };
        let scale = inertia.iter().cloned().fold(0.0, f64::max);
        for margin in [0usize, 3, 5, 8, 10] {
            let mut max_a = 0.0f64;
            let mut max_s = 0.0f64;
            let mut any = false;
            for rect in ds.regions.rects() {
                if rect.ni <= 2 * margin || rect.nj <= 2 * margin {
                    continue;
                }
                let core = RegionRect {
                    i0: rect.i0 + margin,
                    j0: rect.j0 + margin,
                    ni: rect.ni - 2 * margin,
                    nj: rect.nj - 2 * margin,
                };
                for jj in 0..core.nj {
                    for ii in 0..core.ni {
                        let k = ds.grid.idx(core.i0 + ii, core.j0 + jj);
                        max_a = max_a.max(res_a[k]);
                        max_s = max_s.max(res_s[k]);
                        any = true;
                    }
                }
            }
            if any {
                println!(
                    "{tag} rec{ri} margin {margin:2}: analytic {:.2e}  spectral {:.2e}",
                    max_a / scale,
                    max_s / scale
                );
            }
        }
    }
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    match which.as_str() {
        "direct1" => {
            let ds = pi1_dataset(50, 5, 8, 1, false);
            for (hid, epochs) in [(vec![32usize], 1500), (vec![32], 3000), (vec![64], 3000)] {
                let mut cfg = DirectInversionConfig::plane_strain(1.0);
                cfg.theta_hidden = vec![hid.clone(); 2];
                cfg.alpha_hidden = hid.clone();
                cfg.epochs = epochs;
                cfg.seed = 7;
                show_direct(&format!("direct1 h{hid:?} e{epochs}"), &ds, &cfg);
            }
        }
        "direct2" => {
            let ds = pi2_dataset(50, 5, 8, 1, false);
            for (hid, epochs) in [(vec![32usize], 3000), (vec![64], 3000), (vec![64], 6000)] {
                let mut cfg = DirectInversionConfig::plane_strain(1.0);
                cfg.theta_hidden = vec![hid.clone(); 2];
                cfg.alpha_hidden = hid.clone();
                cfg.epochs = epochs;
                cfg.seed = 7;
                show_direct(&format!("direct2 h{hid:?} e{epochs}"), &ds, &cfg);
            }
        }
        "direct3" => {
            let ds = noisy(pi2_dataset(50, 5, 8, 1, false), 0.05, 99);
            for (cut, epochs) in [(4.2, 6000), (5.0, 6000), (4.2, 10000)] {
                let mut cfg = DirectInversionConfig::plane_strain(1.0);
                cfg.theta_hidden = vec![vec![64]; 2];
                cfg.alpha_hidden = vec![64];
                cfg.epochs = epochs;
                cfg.lowpass_cutoff = Some(cut);
                cfg.seed = 7;
                show_direct(&format!("direct3 cut{cut} e{epochs}"), &ds, &cfg);
            }
        }
        "pinn4" => {
            let ds = pi1_dataset(32, 1, 6, 3, false);
            for (lr, epochs) in [(5e-3, 6000), (5e-3, 10000), (2e-3, 10000)] {
                let mut cfg = PinnConfig::plane_strain(1.0);
                cfg.surrogate_hidden = vec![32, 32];
                cfg.learning_rate = lr;
                cfg.epochs = epochs;
                cfg.seed = 5;
                show_pinn(&format!("pinn4 lr{lr} e{epochs}"), &ds, &cfg);
            }
        }
        "pinn4n" => {
            let ds = noisy(pi1_dataset(32, 1, 6, 3, false), 0.05, 42);
            for (lr, epochs) in [(5e-3, 10000), (2e-3, 12000)] {
                let mut cfg = PinnConfig::plane_strain(1.0);
                cfg.surrogate_hidden = vec![32, 32];
                cfg.learning_rate = lr;
                cfg.epochs = epochs;
                cfg.seed = 5;
                show_pinn(&format!("pinn4n lr{lr} e{epochs}"), &ds, &cfg);
            }
        }
        "pinn5" => {
            let ds = pi2_dataset(36, 2, 6, 3, false);
            for (margin, epochs) in [(2usize, 6000), (3, 8000)] {
                let mut cfg = PinnConfig::plane_strain(1.0);
                cfg.surrogate_hidden = vec![32, 32];
                cfg.param_mode = ParamMode::Distributed;
                cfg.seam_margin = margin;
                cfg.epochs = epochs;
                cfg.seed = 5;
                show_pinn(&format!("pinn5 m{margin} e{epochs}"), &ds, &cfg);
            }
        }
        "flex6d" => {
            let ds = strips_dataset(60, 0.1375, 8, 11, false);
            for (hid, epochs) in [(vec![32usize], 3000), (vec![64], 4000)] {
                let mut cfg = DirectInversionConfig::flexural(0.33, 0.15);
                cfg.theta_hidden = vec![hid.clone()];
                cfg.alpha_hidden = hid.clone();
                cfg.epochs = epochs;
                cfg.seed = 7;
                show_direct(&format!("flex6d h{hid:?} e{epochs}"), &ds, &cfg);
            }
        }
        "flex6p" => {
            let ds = strips_dataset(36, 0.16, 6, 11, false);
            for (hid, epochs) in [(vec![24usize, 24], 3000), (vec![32, 32], 4000)] {
                let mut cfg = PinnConfig::flexural(0.33, 0.15);
                cfg.surrogate_hidden = hid.clone();
                cfg.param_mode = ParamMode::Distributed;
                cfg.misfit = MisfitNorm::SobolevAuto { order: 2 };
                cfg.gamma = GammaMode::Manual(5.84);
                cfg.seam_margin = 2;
                cfg.epochs = epochs;
                cfg.seed = 5;
                show_pinn(&format!("flex6p h{hid:?} e{epochs}"), &ds, &cfg);
            }
        }
        "resid9" => {
            residual_scan("pi1-32", &pi1_dataset(32, 1, 6, 3, true));
            residual_scan("pi2-48", &pi2_dataset(48, 1, 6, 3, true));
            residual_scan("strips-48", &strips_dataset(48, 0.17, 6, 3, true));
            residual_scan("strips-60", &strips_dataset(60, 0.1375, 8, 11, true));
        }
        "bal11" => {
            use wfi_core::physics::fit_chi_balance;
            let ds = strips_dataset(60, 0.1375, 8, 11, true);
            let rec = &ds.records[0];
            let v = match &rec.field {
                FieldData::Scalar(s) => s.clone(),
                _ => unreachable!(),
            };
            let chi = fit_chi_balance(&v, &rec.derivs, &ds.regions, 0.33, 0.15, rec.frequency).unwrap();
            println!("bal11 exact analytic: {chi:?}");

            let nds = noisy(ds.clone(), 0.05, 77);
            let nrec = &nds.records[0];
            for cut in [5.0f64, 6.0, 8.0, 10.0] {
                let filtered = spectral_lowpass(&nrec.field, &nds.regions, cut).unwrap();
                let fv = match &filtered {
                    FieldData::Scalar(s) => s.clone(),
                    _ => unreachable!(),
                };
                let mut derivs: BTreeMap<MultiIndex, FieldData> = BTreeMap::new();
                for (e1, e2) in [(4u8, 0u8), (0, 4), (2, 2)] {
                    let e = MultiIndex::new(e1, e2).unwrap();
                    derivs.insert(e, spectral_derivative(&filtered, &nds.regions, e).unwrap());
                }
                let chi = fit_chi_balance(&fv, &derivs, &nds.regions, 0.33, 0.15, nrec.frequency).unwrap();
                println!("bal11 noisy cut {cut}: {chi:?}");
            }
        }
        other => {
            eprintln!("unknown experiment {other:?}");
            std::process::exit(1);
        }
    }
}
