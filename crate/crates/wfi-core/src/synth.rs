//! Manufactured wavefields: exact solutions of the homogeneous plane-strain
//! and flexural equations assembled from plane waves, the five-cycle burst
//! wavelet, and a 1D dispersive space-time synthesizer with its matching
//! dispersion extractor.
//!
//! Every wave is written as `a·d·exp(K·ξ)` with a complex wavevector
//! `K = i k p` (propagating) or `K = −k p` (evanescent), so analytic
//! derivatives are just multiplications by `K₁^{e1} K₂^{e2}`:
//!
//! * P:  `d = p`,        `k = ω/c_p`
//! * S:  `d = (−p₂,p₁)`, `k = ω/c_s`
//! * flexural: scalar,   `k = [12(1−ν²)(2πf)²/(χh²)]^{1/4}`
//!
//! Regions are independent: each node takes the superposition of the specs
//! assigned to its region, with that region's material. The result solves
//! the PDE exactly inside every region; nothing is claimed on interfaces,
//! which matches how the inversion losses consume the data (pointwise,
//! interiors only).
//!
//! For differentiation diagnostics there are *standing-mode* builders whose
//! wavenumbers sit exactly on a region's mirror-extension lattice
//! (`k = πm/L`, symmetric about the region edge minus half a cell); those
//! fields are reproduced by the spectral differentiator to rounding.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{Dataset, FieldData, Grid2D, Record, RegionMap, ScalarField, VectorField2};
use crate::physics::{Materials, PdeKind, PlaneStrainMaterial, PlateMaterial};
use crate::signal::{MultiIndex, TimeRecord};

/// Wave family of one manufactured-solution term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveKind {
    /// Pressure wave: displacement along the propagation direction.
    P,
    /// Shear wave: displacement perpendicular (right-handed) to it.
    S,
    /// Out-of-plane flexural wave, oscillatory branch.
    FlexuralPropagating,
    /// Out-of-plane flexural wave, exponentially decaying branch.
    FlexuralEvanescent,
}

/// One plane-wave term of a region's exact solution.
#[derive(Debug, Clone, Copy)]
pub struct PlaneWaveSpec {
    pub kind: WaveKind,
    /// Unit propagation direction p.
    pub direction: [f64; 2],
    pub amplitude: Complex64,
    /// Region label the term belongs to.
    pub region: usize,
}

impl PlaneWaveSpec {
    pub fn new(
        kind: WaveKind,
        direction: [f64; 2],
        amplitude: Complex64,
        region: usize,
    ) -> Result<Self> {
        let norm = (direction[0] * direction[0] + direction[1] * direction[1]).sqrt();
        if !((norm - 1.0).abs() <= 1e-9) {
            return Err(Error::arg(format!(
                "wave direction must be a unit vector (|p| = {norm})"
            )));
        }
        if !(amplitude.re.is_finite() && amplitude.im.is_finite()) {
            return Err(Error::arg("wave amplitude must be finite"));
        }
        Ok(PlaneWaveSpec {
            kind,
            direction,
            amplitude,
            region,
        })
    }

    pub fn from_angle(
        kind: WaveKind,
        angle: f64,
        amplitude: Complex64,
        region: usize,
    ) -> Result<Self> {
        PlaneWaveSpec::new(kind, [angle.cos(), angle.sin()], amplitude, region)
    }
}

/// Precomputed term: value = amp·exp(K·ξ), ∂^e = K₁^{e1} K₂^{e2} × value.
struct WaveTerm {
    amp: Complex64,
    /// Displacement direction (plane strain) — unused for flexural terms.
    disp: [f64; 2],
    kvec: [Complex64; 2],
}

impl WaveTerm {
    fn phase(&self, x: f64, y: f64) -> Complex64 {
        (self.kvec[0] * x + self.kvec[1] * y).exp() * self.amp
    }

    fn deriv_factor(&self, e: MultiIndex) -> Complex64 {
        self.kvec[0].powi(e.e1() as i32) * self.kvec[1].powi(e.e2() as i32)
    }
}

fn group_specs(
    specs: &[PlaneWaveSpec],
    region_count: usize,
    build: impl Fn(&PlaneWaveSpec) -> Result<WaveTerm>,
) -> Result<Vec<Vec<WaveTerm>>> {
    let mut grouped: Vec<Vec<WaveTerm>> = (0..region_count).map(|_| Vec::new()).collect();
    for spec in specs {
        if spec.region >= region_count {
            return Err(Error::Region(format!(
                "wave spec references region {} of {region_count}",
                spec.region
            )));
        }
        grouped[spec.region].push(build(spec)?);
    }
    for (label, terms) in grouped.iter().enumerate() {
        if terms.is_empty() {
            return Err(Error::Region(format!(
                "region {label} has no wave specification"
            )));
        }
    }
    Ok(grouped)
}

/// Exact plane-strain record: per region, `u(ξ) = Σ a·d·exp(i k p·ξ)` with
/// that region's wave speeds. With `include_derivatives`, all analytic
/// `∂^e u` for 1 ≤ |e| ≤ 2 are attached.
pub fn manufactured_planestrain(
    grid: Grid2D,
    regions: &RegionMap,
    materials: &[PlaneStrainMaterial],
    omega: f64,
    specs: &[PlaneWaveSpec],
    include_derivatives: bool,
    source: &str,
) -> Result<Record> {
    if regions.grid() != grid {
        return Err(Error::dim("region map grid ≠ target grid"));
    }
    if materials.len() != regions.region_count() {
        return Err(Error::dim(format!(
            "{} materials for {} regions",
            materials.len(),
            regions.region_count()
        )));
    }
    if !(omega > 0.0) {
        return Err(Error::arg("ω must be positive"));
    }
    let grouped = group_specs(specs, regions.region_count(), |spec| {
        let mat = &materials[spec.region];
        let (k, disp) = match spec.kind {
            WaveKind::P => (omega / mat.cp(), spec.direction),
            WaveKind::S => (
                omega / mat.cs(),
                [-spec.direction[1], spec.direction[0]],
            ),
            _ => {
                return Err(Error::arg(
                    "flexural wave kinds are not plane-strain solutions",
                ))
            }
        };
        Ok(WaveTerm {
            amp: spec.amplitude,
            disp,
            kvec: [
                Complex64::new(0.0, k * spec.direction[0]),
                Complex64::new(0.0, k * spec.direction[1]),
            ],
        })
    })?;

    let n = grid.len();
    let mut u1 = vec![Complex64::default(); n];
    let mut u2 = vec![Complex64::default(); n];
    let orders: Vec<MultiIndex> = if include_derivatives {
        MultiIndex::up_to_order(2)
            .into_iter()
            .filter(|e| e.order() > 0)
            .collect()
    } else {
        Vec::new()
    };
    let mut derivs: BTreeMap<MultiIndex, (Vec<Complex64>, Vec<Complex64>)> = orders
        .iter()
        .map(|&e| (e, (vec![Complex64::default(); n], vec![Complex64::default(); n])))
        .collect();

    for k in 0..n {
        let (i, j) = grid.ij(k);
        let [x, y] = grid.pos(i, j);
        for term in &grouped[regions.label(k)] {
            let base = term.phase(x, y);
            u1[k] += base * term.disp[0];
            u2[k] += base * term.disp[1];
            for &e in &orders {
                let v = base * term.deriv_factor(e);
                let entry = derivs.get_mut(&e).unwrap();
                entry.0[k] += v * term.disp[0];
                entry.1[k] += v * term.disp[1];
            }
        }
    }

    let field = FieldData::Vector(VectorField2::from_components(grid, u1, u2)?);
    let mut dmap = BTreeMap::new();
    for (e, (c1, c2)) in derivs {
        dmap.insert(
            e,
            FieldData::Vector(VectorField2::from_components(grid, c1, c2)?),
        );
    }
    Ok(Record {
        frequency: omega,
        source: source.to_string(),
        field,
        derivs: dmap,
    })
}

/// Exact flexural record: per region, `v(ξ) = Σ a·exp(±…)` over propagating
/// (`exp(i k p·ξ)`) and evanescent (`exp(−k p·ξ)`) terms, k from the plate
/// dispersion relation. With `include_derivatives`, all `∂^e v` for
/// 1 ≤ |e| ≤ 4 are attached.
pub fn manufactured_flexural(
    grid: Grid2D,
    regions: &RegionMap,
    materials: &[PlateMaterial],
    f: f64,
    specs: &[PlaneWaveSpec],
    include_derivatives: bool,
    source: &str,
) -> Result<Record> {
    if regions.grid() != grid {
        return Err(Error::dim("region map grid ≠ target grid"));
    }
    if materials.len() != regions.region_count() {
        return Err(Error::dim(format!(
            "{} materials for {} regions",
            materials.len(),
            regions.region_count()
        )));
    }
    if !(f > 0.0) {
        return Err(Error::arg("f must be positive"));
    }
    let grouped = group_specs(specs, regions.region_count(), |spec| {
        let k = materials[spec.region].wavenumber(f);
        let kvec = match spec.kind {
            WaveKind::FlexuralPropagating => [
                Complex64::new(0.0, k * spec.direction[0]),
                Complex64::new(0.0, k * spec.direction[1]),
            ],
            WaveKind::FlexuralEvanescent => [
                Complex64::new(-k * spec.direction[0], 0.0),
                Complex64::new(-k * spec.direction[1], 0.0),
            ],
            _ => {
                return Err(Error::arg(
                    "P/S wave kinds are not flexural solutions",
                ))
            }
        };
        Ok(WaveTerm {
            amp: spec.amplitude,
            disp: [0.0; 2],
            kvec,
        })
    })?;

    let n = grid.len();
    let mut v = vec![Complex64::default(); n];
    let orders: Vec<MultiIndex> = if include_derivatives {
        MultiIndex::up_to_order(4)
            .into_iter()
            .filter(|e| e.order() > 0)
            .collect()
    } else {
        Vec::new()
    };
    let mut derivs: BTreeMap<MultiIndex, Vec<Complex64>> = orders
        .iter()
        .map(|&e| (e, vec![Complex64::default(); n]))
        .collect();

    for k in 0..n {
        let (i, j) = grid.ij(k);
        let [x, y] = grid.pos(i, j);
        for term in &grouped[regions.label(k)] {
            let base = term.phase(x, y);
            v[k] += base;
            for &e in &orders {
                derivs.get_mut(&e).unwrap()[k] += base * term.deriv_factor(e);
            }
        }
    }

    let field = FieldData::Scalar(ScalarField::from_values(grid, v)?);
    let mut dmap = BTreeMap::new();
    for (e, c) in derivs {
        dmap.insert(e, FieldData::Scalar(ScalarField::from_values(grid, c)?));
    }
    Ok(Record {
        frequency: f,
        source: source.to_string(),
        field,
        derivs: dmap,
    })
}

/// Random plane-strain specs: `per_region` waves in every region,
/// alternating P and S, uniform directions, amplitudes of modulus in
/// [0.5, 1.5) with uniform phase.
pub fn random_planestrain_specs(
    region_count: usize,
    per_region: usize,
    seed: u64,
) -> Vec<PlaneWaveSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specs = Vec::with_capacity(region_count * per_region);
    for region in 0..region_count {
        for w in 0..per_region {
            let kind = if w % 2 == 0 { WaveKind::P } else { WaveKind::S };
            let angle = rng.gen_range(0.0..TAU);
            let amp = Complex64::from_polar(rng.gen_range(0.5..1.5), rng.gen_range(0.0..TAU));
            specs.push(PlaneWaveSpec::from_angle(kind, angle, amp, region).unwrap());
        }
    }
    specs
}

/// Random flexural specs (propagating branch only, so amplitudes stay O(1)
/// across the whole domain).
pub fn random_flexural_specs(
    region_count: usize,
    per_region: usize,
    seed: u64,
) -> Vec<PlaneWaveSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specs = Vec::with_capacity(region_count * per_region);
    for region in 0..region_count {
        for _ in 0..per_region {
            let angle = rng.gen_range(0.0..TAU);
            let amp = Complex64::from_polar(rng.gen_range(0.5..1.5), rng.gen_range(0.0..TAU));
            specs.push(
                PlaneWaveSpec::from_angle(WaveKind::FlexuralPropagating, angle, amp, region)
                    .unwrap(),
            );
        }
    }
    specs
}

/// Multi-source plane-strain dataset: `n_sources` records sharing materials,
/// each with an independently seeded spec set (seed + source index).
#[allow(clippy::too_many_arguments)]
pub fn planestrain_dataset(
    grid: Grid2D,
    regions: &RegionMap,
    materials: &[PlaneStrainMaterial],
    omega: f64,
    n_sources: usize,
    waves_per_region: usize,
    seed: u64,
    include_derivatives: bool,
) -> Result<Dataset> {
    if n_sources == 0 {
        return Err(Error::arg("at least one source required"));
    }
    let mut records = Vec::with_capacity(n_sources);
    for s in 0..n_sources {
        let specs = random_planestrain_specs(
            regions.region_count(),
            waves_per_region,
            seed.wrapping_add(s as u64),
        );
        records.push(manufactured_planestrain(
            grid,
            regions,
            materials,
            omega,
            &specs,
            include_derivatives,
            &format!("src{s}"),
        )?);
    }
    let ds = Dataset {
        pde: PdeKind::PlaneStrain,
        grid,
        regions: regions.clone(),
        materials: Some(Materials::PlaneStrain(materials.to_vec())),
        records,
    };
    ds.validate()?;
    Ok(ds)
}

/// Multi-source flexural dataset, mirroring [`planestrain_dataset`].
#[allow(clippy::too_many_arguments)]
pub fn flexural_dataset(
    grid: Grid2D,
    regions: &RegionMap,
    materials: &[PlateMaterial],
    f: f64,
    n_sources: usize,
    waves_per_region: usize,
    seed: u64,
    include_derivatives: bool,
) -> Result<Dataset> {
    if n_sources == 0 {
        return Err(Error::arg("at least one source required"));
    }
    let mut records = Vec::with_capacity(n_sources);
    for s in 0..n_sources {
        let specs = random_flexural_specs(
            regions.region_count(),
            waves_per_region,
            seed.wrapping_add(s as u64),
        );
        records.push(manufactured_flexural(
            grid,
            regions,
            materials,
            f,
            &specs,
            include_derivatives,
            &format!("src{s}"),
        )?);
    }
    let ds = Dataset {
        pde: PdeKind::Flexural,
        grid,
        regions: regions.clone(),
        materials: Some(Materials::Plate(materials.to_vec())),
        records,
    };
    ds.validate()?;
    Ok(ds)
}

/// Standing plane-strain modes resonant with one region's mirror-extension
/// lattice: a P pair along ξ₁ at `κ_p = π m_p/L₁` and an S pair along ξ₂ at
/// `κ_s = π m_s/L₂`, both symmetric about the region edge − half a cell, so
/// `u₁ = cos(κ_p(ξ₁−ξ₁ˢ)) + cos(κ_s(ξ₂−ξ₂ˢ))`, `u₂ = 0`. The returned
/// material is adjusted so both pairs solve the PDE at the given ω:
/// `μ = ρω²/κ_s²`, `λ = ρω²/κ_p² − 2μ` (positive iff `κ_p < κ_s/√2`).
pub fn standing_planestrain_modes(
    grid: Grid2D,
    regions: &RegionMap,
    label: usize,
    rho: f64,
    omega: f64,
    m_p: usize,
    m_s: usize,
) -> Result<(PlaneStrainMaterial, Vec<PlaneWaveSpec>)> {
    if regions.grid() != grid {
        return Err(Error::dim("region map grid ≠ target grid"));
    }
    if m_p == 0 || m_s == 0 {
        return Err(Error::arg("mode counts must be ≥ 1"));
    }
    let rect = regions.rect(label);
    let kp = PI * m_p as f64 / (rect.ni as f64 * grid.dx());
    let ks = PI * m_s as f64 / (rect.nj as f64 * grid.dy());
    let mu = rho * omega * omega / (ks * ks);
    let lambda = rho * omega * omega / (kp * kp) - 2.0 * mu;
    if !(lambda > 0.0) {
        return Err(Error::arg(format!(
            "mode pair (m_p={m_p}, m_s={m_s}) needs κ_p < κ_s/√2 for λ > 0"
        )));
    }
    let xs = grid.x(rect.i0) - 0.5 * grid.dx();
    let ys = grid.y(rect.j0) - 0.5 * grid.dy();
    let half = Complex64::new(0.5, 0.0);
    let specs = vec![
        PlaneWaveSpec::new(
            WaveKind::P,
            [1.0, 0.0],
            half * Complex64::from_polar(1.0, -kp * xs),
            label,
        )?,
        PlaneWaveSpec::new(
            WaveKind::P,
            [-1.0, 0.0],
            -half * Complex64::from_polar(1.0, kp * xs),
            label,
        )?,
        PlaneWaveSpec::new(
            WaveKind::S,
            [0.0, 1.0],
            -half * Complex64::from_polar(1.0, -ks * ys),
            label,
        )?,
        PlaneWaveSpec::new(
            WaveKind::S,
            [0.0, -1.0],
            half * Complex64::from_polar(1.0, ks * ys),
            label,
        )?,
    ];
    Ok((PlaneStrainMaterial::new(mu, lambda, rho)?, specs))
}

/// Standing flexural mode along ξ₁, resonant with one region's lattice:
/// `v = cos(k(ξ₁−ξ₁ˢ))`, `k = π m/L₁`, with χ adjusted so the mode solves
/// the plate equation at frequency f: `χ = 12(1−ν²)(2πf)²/(k⁴h²)`.
pub fn standing_flexural_mode(
    grid: Grid2D,
    regions: &RegionMap,
    label: usize,
    nu: f64,
    h: f64,
    f: f64,
    m: usize,
) -> Result<(PlateMaterial, Vec<PlaneWaveSpec>)> {
    if regions.grid() != grid {
        return Err(Error::dim("region map grid ≠ target grid"));
    }
    if m == 0 {
        return Err(Error::arg("mode count must be ≥ 1"));
    }
    let rect = regions.rect(label);
    let k = PI * m as f64 / (rect.ni as f64 * grid.dx());
    let w = 2.0 * PI * f;
    let chi = 12.0 * (1.0 - nu * nu) * w * w / (k.powi(4) * h * h);
    let xs = grid.x(rect.i0) - 0.5 * grid.dx();
    let half = Complex64::new(0.5, 0.0);
    let specs = vec![
        PlaneWaveSpec::new(
            WaveKind::FlexuralPropagating,
            [1.0, 0.0],
            half * Complex64::from_polar(1.0, -k * xs),
            label,
        )?,
        PlaneWaveSpec::new(
            WaveKind::FlexuralPropagating,
            [-1.0, 0.0],
            half * Complex64::from_polar(1.0, k * xs),
            label,
        )?,
    ];
    Ok((PlateMaterial::new(chi, nu, h)?, specs))
}

/// Five-cycle burst `H(f_c t)·H(5 − f_c t)·sin(0.2π f_c t)·sin(2π f_c t)`.
pub fn burst_wavelet(f_c: f64, t: f64) -> f64 {
    let s = f_c * t;
    if s < 0.0 || s > 5.0 {
        return 0.0;
    }
    (0.2 * PI * s).sin() * (2.0 * PI * s).sin()
}

/// The burst sampled at the given instants.
pub fn burst_wavelet_samples(f_c: f64, times: &[f64]) -> Result<Vec<f64>> {
    if !(f_c > 0.0) {
        return Err(Error::arg("carrier frequency must be positive"));
    }
    Ok(times.iter().map(|&t| burst_wavelet(f_c, t)).collect())
}

/// Band the dispersive synthesizer and extractor treat as carrying burst
/// energy, relative to the carrier.
const BURST_BAND: (f64, f64) = (0.5, 1.5);

/// Synthesize out-of-plane motion along a straight line:
/// `v(x, t) = Σ_f Ŵ(f)·exp(i(k(f)x − 2πf t))` over the burst band, with
/// `k(f)` from the plate dispersion relation. Nodes are spaced
/// `length/(n_points − 1)` apart; re-use that spacing when extracting.
pub fn synth_dispersive_record(
    length: f64,
    n_points: usize,
    mat: &PlateMaterial,
    f_c: f64,
    duration: f64,
    sample_rate: f64,
) -> Result<TimeRecord> {
    if !(length > 0.0) || n_points < 2 {
        return Err(Error::arg("line needs positive length and ≥ 2 points"));
    }
    if !(f_c > 0.0 && duration > 0.0 && sample_rate > 0.0) {
        return Err(Error::arg("f_c, duration and sample rate must be positive"));
    }
    if sample_rate / 2.0 <= 3.0 * f_c {
        return Err(Error::arg(format!(
            "Nyquist {} must exceed 3·f_c = {}",
            sample_rate / 2.0,
            3.0 * f_c
        )));
    }
    let dx = length / (n_points - 1) as f64;
    let lambda_min = TAU / mat.wavenumber(BURST_BAND.1 * f_c);
    if dx >= lambda_min / 4.0 {
        return Err(Error::arg(format!(
            "line spacing {dx} too coarse: need > 4 points per shortest wavelength {lambda_min}"
        )));
    }
    let nt = (duration * sample_rate).round() as usize;
    if nt < 16 {
        return Err(Error::arg("duration too short for the sample rate"));
    }

    // Spectrum of the sampled wavelet (forward DFT).
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(nt);
    let inv = planner.plan_fft_inverse(nt);
    let mut w: Vec<Complex64> = (0..nt)
        .map(|n| Complex64::new(burst_wavelet(f_c, n as f64 / sample_rate), 0.0))
        .collect();
    fwd.process(&mut w);

    let df = sample_rate / nt as f64;
    let mut series = Vec::with_capacity(n_points);
    let mut spec = vec![Complex64::default(); nt];
    for p in 0..n_points {
        let x = p as f64 * dx;
        for s in spec.iter_mut() {
            *s = Complex64::default();
        }
        for m in 1..nt / 2 {
            let f = m as f64 * df;
            if !(BURST_BAND.0 * f_c..=BURST_BAND.1 * f_c).contains(&f) {
                continue;
            }
            // e^{−ikx} on positive-frequency bins yields +x travel under the
            // e^{+iωt} kernel of the inverse transform below.
            let v = w[m] * Complex64::from_polar(1.0, -mat.wavenumber(f) * x);
            spec[m] = v;
            spec[nt - m] = v.conj();
        }
        inv.process(&mut spec);
        series.push(spec.iter().map(|c| c.re / nt as f64).collect());
    }
    TimeRecord::new(sample_rate, series)
}

/// One ridge point of a measured dispersion curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgePoint {
    pub frequency: f64,
    /// Inverse wavelength 1/λ = k/2π.
    pub inv_wavelength: f64,
    pub magnitude: f64,
}

/// Fraction of the peak per-frequency energy a temporal bin needs to count
/// as in-band for ridge extraction.
const RIDGE_ENERGY_FLOOR: f64 = 0.02;

/// Double Fourier transform of a line record: per in-band temporal bin, the
/// spatial bin of maximum magnitude becomes a `(f, 1/λ)` ridge point.
/// `dx` is the line's node spacing. Points come back sorted by frequency.
pub fn extract_dispersion(record: &TimeRecord, dx: f64) -> Result<Vec<RidgePoint>> {
    let nx = record.node_count();
    let nt = record.sample_count();
    if nx < 64 || nt < 64 {
        return Err(Error::arg(format!(
            "dispersion extraction needs ≥ 64 points per dimension (got {nx} × {nt})"
        )));
    }
    if !(dx > 0.0) {
        return Err(Error::arg("node spacing must be positive"));
    }

    let mut planner = FftPlanner::<f64>::new();
    let time_fft = planner.plan_fft_inverse(nt); // e^{+2πi f t} kernel
    let space_fft = planner.plan_fft_forward(nx); // e^{−2πi k x} kernel

    // Temporal phasors per node, then one spatial transform per frequency.
    let mut phasors: Vec<Vec<Complex64>> = Vec::with_capacity(nx);
    for node in 0..nx {
        let mut buf: Vec<Complex64> = record
            .series(node)
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        time_fft.process(&mut buf);
        phasors.push(buf);
    }

    let df = record.bin_width();
    let mut rows: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    let mut emax = 0.0f64;
    let mut buf = vec![Complex64::default(); nx];
    for m in 1..nt / 2 {
        for (p, ph) in phasors.iter().enumerate() {
            buf[p] = ph[m];
        }
        space_fft.process(&mut buf);
        let mags: Vec<f64> = buf.iter().map(|c| c.norm()).collect();
        let energy: f64 = mags.iter().map(|v| v * v).sum();
        emax = emax.max(energy);
        rows.push((m as f64 * df, mags, energy));
    }

    let mut points = Vec::new();
    for (f, mags, energy) in rows {
        if energy < RIDGE_ENERGY_FLOOR * emax {
            continue;
        }
        let (qbest, mag) = mags
            .iter()
            .enumerate()
            .take(nx / 2 + 1)
            .skip(1)
            .map(|(q, &v)| (q, v))
            .fold((1, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        points.push(RidgePoint {
            frequency: f,
            inv_wavelength: qbest as f64 / (nx as f64 * dx),
            magnitude: mag,
        });
    }
    Ok(points)
}
