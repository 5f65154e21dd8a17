//! PDE residual operators, nondimensionalization, the flexural dispersion
//! relation, and the force/inertia balance diagnostic.
//!
//! Two frequency-domain operators are supported, both acting on fields with
//! precomputed derivatives (spectral differentiation of measured data, or
//! network jets — the residual implementation is shared by both inversion
//! paradigms):
//!
//! * plane strain (Navier), unknowns μ(ξ), λ(ξ):
//!   `r₁ = μ(u₁,₁₁ + u₁,₂₂) + (λ+μ)(u₁,₁₁ + u₂,₁₂) + ρω²u₁`
//!   `r₂ = μ(u₂,₁₁ + u₂,₂₂) + (λ+μ)(u₁,₁₂ + u₂,₂₂) + ρω²u₂`
//! * Kirchhoff flexural plate, unknown χ(ξ) = E/ρ:
//!   `r = χh³/(12(1−ν²))·∇⁴v − h(2πf)²·v`,
//!   `∇⁴v = v,₁₁₁₁ + 2v,₁₁₂₂ + v,₂₂₂₂`.
//!
//! All quantities are normalized: lengths by ℓ_r, moduli by μ_r, densities
//! by ρ_r, frequencies by ℓ_r√(ρ_r/μ_r) ([`nondimensionalize`]).

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{FieldData, RegionMap, ScalarField, VectorField2};
use crate::signal::MultiIndex;

/// Which governing PDE a dataset / inversion targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdeKind {
    PlaneStrain,
    Flexural,
}

impl PdeKind {
    /// Spatial-derivative multi-indices the residual consumes.
    pub fn required_derivatives(&self) -> Vec<MultiIndex> {
        let pairs: &[(u8, u8)] = match self {
            PdeKind::PlaneStrain => &[(2, 0), (0, 2), (1, 1)],
            PdeKind::Flexural => &[(4, 0), (0, 4), (2, 2)],
        };
        pairs
            .iter()
            .map(|&(a, b)| MultiIndex::new(a, b).expect("orders ≤ 4"))
            .collect()
    }

    /// Differential order of the operator (2 or 4).
    pub fn order(&self) -> u8 {
        match self {
            PdeKind::PlaneStrain => 2,
            PdeKind::Flexural => 4,
        }
    }
}

impl std::fmt::Display for PdeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PdeKind::PlaneStrain => write!(f, "plane-strain"),
            PdeKind::Flexural => write!(f, "flexural"),
        }
    }
}

/// Homogeneous isotropic plane-strain material in normalized units; ρ is a
/// known parameter, the Lamé fields are the inversion unknowns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneStrainMaterial {
    pub mu: f64,
    pub lambda: f64,
    pub rho: f64,
}

impl PlaneStrainMaterial {
    pub fn new(mu: f64, lambda: f64, rho: f64) -> Result<Self> {
        if !(mu > 0.0 && lambda > 0.0 && rho > 0.0) {
            return Err(Error::arg(format!(
                "plane-strain material needs μ, λ, ρ > 0 (got {mu}, {lambda}, {rho})"
            )));
        }
        Ok(PlaneStrainMaterial { mu, lambda, rho })
    }

    /// Shear wave speed √(μ/ρ).
    pub fn cs(&self) -> f64 {
        (self.mu / self.rho).sqrt()
    }

    /// Pressure wave speed √((λ+2μ)/ρ); always > cs.
    pub fn cp(&self) -> f64 {
        ((self.lambda + 2.0 * self.mu) / self.rho).sqrt()
    }
}

/// Thin Kirchhoff plate in normalized units; ν and h are known, χ = E/ρ is
/// the inversion unknown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateMaterial {
    pub chi: f64,
    pub nu: f64,
    pub h: f64,
}

impl PlateMaterial {
    pub fn new(chi: f64, nu: f64, h: f64) -> Result<Self> {
        if !(chi > 0.0 && h > 0.0) {
            return Err(Error::arg(format!(
                "plate material needs χ, h > 0 (got χ={chi}, h={h})"
            )));
        }
        if !(0.0 < nu && nu < 0.5) {
            return Err(Error::arg(format!("Poisson ratio ν={nu} outside (0, 0.5)")));
        }
        Ok(PlateMaterial { chi, nu, h })
    }

    /// Flexural wavenumber at frequency `f`:
    /// `k = [12(1−ν²)(2πf)² / (χh²)]^{1/4}`.
    pub fn wavenumber(&self, f: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * f;
        (12.0 * (1.0 - self.nu * self.nu) * w * w / (self.chi * self.h * self.h)).powf(0.25)
    }

    /// Bending prefactor `h³/(12(1−ν²))` (χ excluded).
    pub fn bending_factor(&self) -> f64 {
        self.h.powi(3) / (12.0 * (1.0 - self.nu * self.nu))
    }
}

/// Per-region ground-truth materials of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum Materials {
    PlaneStrain(Vec<PlaneStrainMaterial>),
    Plate(Vec<PlateMaterial>),
}

impl Materials {
    pub fn len(&self) -> usize {
        match self {
            Materials::PlaneStrain(v) => v.len(),
            Materials::Plate(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pde(&self) -> PdeKind {
        match self {
            Materials::PlaneStrain(_) => PdeKind::PlaneStrain,
            Materials::Plate(_) => PdeKind::Flexural,
        }
    }
}

/// Reference scales mapping physical to normalized quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFrame {
    /// ℓ_r in meters.
    pub length_m: f64,
    /// μ_r (or σ∘) in pascals.
    pub modulus_pa: f64,
    /// ρ_r in kg/m³.
    pub density_kgm3: f64,
}

impl ScalingFrame {
    pub fn new(length_m: f64, modulus_pa: f64, density_kgm3: f64) -> Result<Self> {
        if !(length_m > 0.0 && modulus_pa > 0.0 && density_kgm3 > 0.0) {
            return Err(Error::arg("scaling frame entries must be positive"));
        }
        Ok(ScalingFrame {
            length_m,
            modulus_pa,
            density_kgm3,
        })
    }

    /// Reference speed √(μ_r/ρ_r) in m/s.
    pub fn speed(&self) -> f64 {
        (self.modulus_pa / self.density_kgm3).sqrt()
    }
}

/// Physical quantity kinds for [`nondimensionalize`]/[`dimensionalize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// Lengths, thicknesses, wavelengths: `x → x/ℓ_r`.
    Length,
    /// Moduli, stiffness-to-density × density — anything in Pa: `E → E/μ_r`.
    Modulus,
    /// Densities: `ρ → ρ/ρ_r`.
    Density,
    /// Frequencies (Hz): `f → f·ℓ_r·√(ρ_r/μ_r)`.
    Frequency,
    /// Speeds / velocity amplitudes: `v → v·√(ρ_r/μ_r)`.
    Velocity,
    /// Stiffness-to-density ratios χ = E/ρ (m²/s²): `χ → χ·ρ_r/μ_r`.
    StiffnessDensityRatio,
}

/// Map a physical value to its normalized counterpart.
pub fn nondimensionalize(kind: Quantity, value: f64, frame: &ScalingFrame) -> f64 {
    match kind {
        Quantity::Length => value / frame.length_m,
        Quantity::Modulus => value / frame.modulus_pa,
        Quantity::Density => value / frame.density_kgm3,
        Quantity::Frequency => value * frame.length_m / frame.speed(),
        Quantity::Velocity => value / frame.speed(),
        Quantity::StiffnessDensityRatio => value * frame.density_kgm3 / frame.modulus_pa,
    }
}

/// Inverse of [`nondimensionalize`].
pub fn dimensionalize(kind: Quantity, value: f64, frame: &ScalingFrame) -> f64 {
    match kind {
        Quantity::Length => value * frame.length_m,
        Quantity::Modulus => value * frame.modulus_pa,
        Quantity::Density => value * frame.density_kgm3,
        Quantity::Frequency => value * frame.speed() / frame.length_m,
        Quantity::Velocity => value * frame.speed(),
        Quantity::StiffnessDensityRatio => value * frame.modulus_pa / frame.density_kgm3,
    }
}

fn vector_deriv<'a>(
    derivs: &'a BTreeMap<MultiIndex, FieldData>,
    e1: u8,
    e2: u8,
) -> Result<&'a VectorField2> {
    match derivs.get(&MultiIndex::new(e1, e2)?) {
        Some(FieldData::Vector(f)) => Ok(f),
        Some(FieldData::Scalar(_)) => Err(Error::dim(format!(
            "derivative ({e1},{e2}) is scalar, expected 2-vector"
        ))),
        None => Err(Error::MissingDerivative(e1, e2)),
    }
}

fn scalar_deriv<'a>(
    derivs: &'a BTreeMap<MultiIndex, FieldData>,
    e1: u8,
    e2: u8,
) -> Result<&'a ScalarField> {
    match derivs.get(&MultiIndex::new(e1, e2)?) {
        Some(FieldData::Scalar(f)) => Ok(f),
        Some(FieldData::Vector(_)) => Err(Error::dim(format!(
            "derivative ({e1},{e2}) is 2-vector, expected scalar"
        ))),
        None => Err(Error::MissingDerivative(e1, e2)),
    }
}

/// Pointwise plane-strain residual given the second derivatives of u.
#[inline]
pub fn navier_residual_at(
    u: [Complex64; 2],
    d20: [Complex64; 2],
    d02: [Complex64; 2],
    d11: [Complex64; 2],
    mu: f64,
    lambda: f64,
    rho_omega2: f64,
) -> [Complex64; 2] {
    let r1 = mu * (d20[0] + d02[0]) + (lambda + mu) * (d20[0] + d11[1]) + rho_omega2 * u[0];
    let r2 = mu * (d20[1] + d02[1]) + (lambda + mu) * (d11[0] + d02[1]) + rho_omega2 * u[1];
    [r1, r2]
}

/// Plane-strain Navier residual `Λu = μΔu + (λ+μ)∇(∇·u) + ρω²u`, evaluated
/// per node with nodewise Lamé fields.
pub fn navier_residual(
    u: &VectorField2,
    derivs: &BTreeMap<MultiIndex, FieldData>,
    mu: &[f64],
    lambda: &[f64],
    rho: f64,
    omega: f64,
) -> Result<VectorField2> {
    let n = u.grid().len();
    if mu.len() != n || lambda.len() != n {
        return Err(Error::dim(format!(
            "coefficient field lengths {}/{} ≠ node count {n}",
            mu.len(),
            lambda.len()
        )));
    }
    let d20 = vector_deriv(derivs, 2, 0)?;
    let d02 = vector_deriv(derivs, 0, 2)?;
    let d11 = vector_deriv(derivs, 1, 1)?;
    let rho_omega2 = rho * omega * omega;
    let mut r1 = Vec::with_capacity(n);
    let mut r2 = Vec::with_capacity(n);
    for k in 0..n {
        let r = navier_residual_at(
            [u.component(0)[k], u.component(1)[k]],
            [d20.component(0)[k], d20.component(1)[k]],
            [d02.component(0)[k], d02.component(1)[k]],
            [d11.component(0)[k], d11.component(1)[k]],
            mu[k],
            lambda[k],
            rho_omega2,
        );
        r1.push(r[0]);
        r2.push(r[1]);
    }
    VectorField2::from_components(u.grid(), r1, r2)
}

/// Pointwise flexural residual given the fourth derivatives of v.
#[inline]
pub fn flexural_residual_at(
    v: Complex64,
    d40: Complex64,
    d04: Complex64,
    d22: Complex64,
    chi: f64,
    bending_factor: f64,
    inertia: f64,
) -> Complex64 {
    chi * bending_factor * (d40 + 2.0 * d22 + d04) - inertia * v
}

/// Kirchhoff plate residual `Λv = χh³/(12(1−ν²))∇⁴v − h(2πf)²v` with a
/// nodewise χ field.
pub fn flexural_residual(
    v: &ScalarField,
    derivs: &BTreeMap<MultiIndex, FieldData>,
    chi: &[f64],
    nu: f64,
    h: f64,
    f: f64,
) -> Result<ScalarField> {
    let n = v.grid().len();
    if chi.len() != n {
        return Err(Error::dim(format!(
            "coefficient field length {} ≠ node count {n}",
            chi.len()
        )));
    }
    let d40 = scalar_deriv(derivs, 4, 0)?;
    let d04 = scalar_deriv(derivs, 0, 4)?;
    let d22 = scalar_deriv(derivs, 2, 2)?;
    let bending = h.powi(3) / (12.0 * (1.0 - nu * nu));
    let inertia = inertia_factor(h, f);
    let values = (0..n)
        .map(|k| {
            flexural_residual_at(
                v.values()[k],
                d40.values()[k],
                d04.values()[k],
                d22.values()[k],
                chi[k],
                bending,
                inertia,
            )
        })
        .collect();
    ScalarField::from_values(v.grid(), values)
}

/// Inertia coefficient `h·(2πf)²`.
pub fn inertia_factor(h: f64, f: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * f;
    h * w * w
}

/// Theoretical flexural dispersion: the frequency carried by wavelength
/// `λ_wav`, `f = 2π·λ_wav⁻²·√(χh²/(12(1−ν²)))`. Physical units in, Hz out.
pub fn dispersion_frequency(lambda_wav: f64, mat: &PlateMaterial) -> Result<f64> {
    if !(lambda_wav > 0.0) {
        return Err(Error::arg(format!("wavelength {lambda_wav} must be positive")));
    }
    let d = mat.chi * mat.h * mat.h / (12.0 * (1.0 - mat.nu * mat.nu));
    Ok(2.0 * std::f64::consts::PI / (lambda_wav * lambda_wav) * d.sqrt())
}

/// Elastic-force term 𝔗¹, inertia term 𝔗², and normalized discrepancy
/// `𝔇 = |𝔗¹ − 𝔗²| / max|𝔗²|` for a trial coefficient χ′.
pub fn balance_terms(
    v: &ScalarField,
    derivs: &BTreeMap<MultiIndex, FieldData>,
    chi_trial: f64,
    nu: f64,
    h: f64,
    f: f64,
) -> Result<(ScalarField, ScalarField, Vec<f64>)> {
    let d40 = scalar_deriv(derivs, 4, 0)?;
    let d04 = scalar_deriv(derivs, 0, 4)?;
    let d22 = scalar_deriv(derivs, 2, 2)?;
    let bending = chi_trial * h.powi(3) / (12.0 * (1.0 - nu * nu));
    let inertia = inertia_factor(h, f);
    let n = v.grid().len();
    let t1: Vec<Complex64> = (0..n)
        .map(|k| bending * (d40.values()[k] + 2.0 * d22.values()[k] + d04.values()[k]))
        .collect();
    let t2: Vec<Complex64> = v.values().iter().map(|&x| inertia * x).collect();
    let t2_max = t2.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if t2_max == 0.0 {
        return Err(Error::arg("balance_terms: field is identically zero"));
    }
    let d: Vec<f64> = t1
        .iter()
        .zip(&t2)
        .map(|(a, b)| (a - b).norm() / t2_max)
        .collect();
    Ok((
        ScalarField::from_values(v.grid(), t1)?,
        ScalarField::from_values(v.grid(), t2)?,
        d,
    ))
}

/// Per-region least-squares fit of χ′ minimizing `Σ|𝔗¹(χ′) − 𝔗²|²`:
/// `χ′ = [12(1−ν²)/h³]·ℜ(Σ conj(∇⁴v)·h(2πf)²·v) / Σ|∇⁴v|²`, clamped ≥ 0.
pub fn fit_chi_balance(
    v: &ScalarField,
    derivs: &BTreeMap<MultiIndex, FieldData>,
    regions: &RegionMap,
    nu: f64,
    h: f64,
    f: f64,
) -> Result<Vec<f64>> {
    if v.grid() != regions.grid() {
        return Err(Error::dim("field grid ≠ region map grid"));
    }
    let d40 = scalar_deriv(derivs, 4, 0)?;
    let d04 = scalar_deriv(derivs, 0, 4)?;
    let d22 = scalar_deriv(derivs, 2, 2)?;
    let inertia = inertia_factor(h, f);
    let scale = 12.0 * (1.0 - nu * nu) / h.powi(3);
    let mut out = Vec::with_capacity(regions.region_count());
    for label in 0..regions.region_count() {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in regions.nodes(label)? {
            let bi = d40.values()[k] + 2.0 * d22.values()[k] + d04.values()[k];
            num += (bi.conj() * inertia * v.values()[k]).re;
            den += bi.norm_sqr();
        }
        if den == 0.0 {
            return Err(Error::arg(format!(
                "fit_chi_balance: ∇⁴v vanishes identically on region {label}"
            )));
        }
        out.push((scale * num / den).max(0.0));
    }
    Ok(out)
}
