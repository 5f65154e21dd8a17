//! Physics-informed wavefield surrogates. An MLP models the measured field
//! (real/imaginary channels per component) while the PDE coefficients are
//! carried as positive scalars, nodal fields, or a separate positive
//! network; training balances a data-misfit norm (plain L² or
//! wavenumber-weighted Sobolev) against the γ-weighted PDE residual
//! evaluated on exact derivatives of the surrogate obtained by jet
//! propagation. Nothing here differentiates the data itself except the
//! optional Sobolev misfit targets.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::direct::{self, TargetPde};
use crate::error::{Error, Result};
use crate::grid::{Dataset, FieldData, Grid2D, Record, RegionMap, RegionRect};
use crate::jet::{coeff_count, coeff_index, Jet, MAX_ORDER, NC_MAX};
use crate::mlp::{init_network, AdamState, GradientSet, MlpNetwork, OutputTransform};
use crate::physics::{
    flexural_residual_at, navier_residual_at, Materials, PdeKind, PlateMaterial,
};
use crate::signal::{dominant_wavenumber, spectral_derivative, MultiIndex};

/// Balance weight for the PDE-residual term: the reciprocal of the
/// operator's inertia coefficient, `1/(ρω²)` for plane strain and
/// `1/(h(2πf)²)` for plates.
pub fn gamma_inertia(target: &TargetPde, frequency: f64) -> Result<f64> {
    target.validate()?;
    if !(frequency > 0.0 && frequency.is_finite()) {
        return Err(Error::arg(format!(
            "frequency {frequency} must be positive and finite"
        )));
    }
    Ok(1.0 / target.inertia(frequency))
}

/// Weights of the adaptive Ĥ^ι data norm: `γ^e = (κ₁^{e1}·κ₂^{e2})^{−2}`
/// for every `1 ≤ |e| ≤ ι`, built from per-axis characteristic wavenumbers
/// or fixed by hand. `ι = 0` carries no derivative terms and reduces the
/// norm to plain L².
#[derive(Debug, Clone)]
pub struct SobolevWeights {
    kappa: Option<[f64; 2]>,
    order: u8,
    gamma: Vec<(MultiIndex, f64)>,
}

impl SobolevWeights {
    pub fn from_wavenumbers(kappa: [f64; 2], order: u8) -> Result<Self> {
        if order as usize > MAX_ORDER {
            return Err(Error::arg(format!(
                "misfit order {order} exceeds supported maximum {MAX_ORDER}"
            )));
        }
        if kappa.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::arg(format!(
                "characteristic wavenumbers ({}, {}) must be positive",
                kappa[0], kappa[1]
            )));
        }
        let gamma = MultiIndex::up_to_order(order)
            .into_iter()
            .map(|e| {
                let w = (kappa[0].powi(e.e1() as i32) * kappa[1].powi(e.e2() as i32)).powi(-2);
                (e, w)
            })
            .collect();
        Ok(SobolevWeights {
            kappa: Some(kappa),
            order,
            gamma,
        })
    }

    /// Caller-fixed weights; `entries` must cover exactly the multi-indices
    /// `1 ≤ |e| ≤ order`, all positive.
    pub fn manual(order: u8, entries: Vec<(MultiIndex, f64)>) -> Result<Self> {
        if order as usize > MAX_ORDER {
            return Err(Error::arg(format!(
                "misfit order {order} exceeds supported maximum {MAX_ORDER}"
            )));
        }
        let mut sorted = entries;
        sorted.sort_by_key(|&(e, _)| e);
        let expected = {
            let mut v = MultiIndex::up_to_order(order);
            v.sort();
            v
        };
        let got: Vec<MultiIndex> = sorted.iter().map(|&(e, _)| e).collect();
        if got != expected {
            return Err(Error::arg(format!(
                "manual weights must cover exactly the {} multi-indices with 1 ≤ |e| ≤ {order}",
                expected.len()
            )));
        }
        if sorted.iter().any(|&(_, w)| !(w > 0.0 && w.is_finite())) {
            return Err(Error::arg("Sobolev weights must be positive"));
        }
        Ok(SobolevWeights {
            kappa: None,
            order,
            gamma: sorted,
        })
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    /// The wavenumbers the weights were derived from, if any.
    pub fn kappa(&self) -> Option<[f64; 2]> {
        self.kappa
    }

    pub fn gamma(&self, e: MultiIndex) -> Option<f64> {
        self.gamma.iter().find(|&&(g, _)| g == e).map(|&(_, w)| w)
    }

    pub fn entries(&self) -> &[(MultiIndex, f64)] {
        &self.gamma
    }
}

/// How the unknown coefficients ϑ* are carried during training.
#[derive(Debug, Clone)]
pub enum ParamMode {
    /// One positive scalar per unknown, shared by the whole grid.
    Scalar,
    /// One positive value per unknown per grid node.
    Distributed,
    /// One positive network per unknown (hidden widths given per unknown),
    /// evaluated at the collocation nodes.
    SeparateNetwork { hidden: Vec<Vec<usize>> },
}

/// Data-misfit norm of the loss.
#[derive(Debug, Clone)]
pub enum MisfitNorm {
    /// Mean squared field mismatch only.
    L2,
    /// Ĥ^ι with κ read off the records' dominant spectral peak.
    SobolevAuto { order: u8 },
    /// Ĥ^ι with explicit weights.
    Sobolev(SobolevWeights),
}

/// How the residual weight γ is chosen.
#[derive(Debug, Clone, Copy)]
pub enum GammaMode {
    /// `γ = 1/inertia` per record — the PDE-structure balance rule.
    InertiaRule,
    /// One fixed γ for every record; 0 disables the residual term.
    Manual(f64),
}

/// Run parameters of a physics-informed inversion.
#[derive(Debug, Clone)]
pub struct PinnConfig {
    pub target: TargetPde,
    /// Hidden-layer widths of each per-record surrogate; inputs are always
    /// (x̂, ŷ) and outputs interleave (ℜ, ℑ) per field component.
    pub surrogate_hidden: Vec<usize>,
    pub param_mode: ParamMode,
    pub misfit: MisfitNorm,
    pub gamma: GammaMode,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Nodes dropped on every side of every region before residual
    /// collocation; keeps the physics term away from inter-region seams
    /// where a smooth surrogate cannot follow piecewise data.
    pub seam_margin: usize,
    /// Seed for all network initializations.
    pub seed: u64,
}

impl PinnConfig {
    pub fn plane_strain(rho: f64) -> Self {
        PinnConfig {
            target: TargetPde::PlaneStrain { rho },
            surrogate_hidden: vec![20, 40, 20],
            param_mode: ParamMode::Scalar,
            misfit: MisfitNorm::L2,
            gamma: GammaMode::InertiaRule,
            learning_rate: 5e-3,
            epochs: 20_000,
            seam_margin: 0,
            seed: 0,
        }
    }

    pub fn flexural(nu: f64, h: f64) -> Self {
        PinnConfig {
            target: TargetPde::Flexural { nu, h },
            surrogate_hidden: vec![40, 40, 120, 80, 40, 40],
            param_mode: ParamMode::Scalar,
            misfit: MisfitNorm::SobolevAuto { order: 2 },
            gamma: GammaMode::InertiaRule,
            learning_rate: 5e-3,
            epochs: 20_000,
            seam_margin: 0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.target.validate()?;
        if self.surrogate_hidden.is_empty() || self.surrogate_hidden.iter().any(|&w| w == 0) {
            return Err(Error::arg("surrogate hidden widths must be positive"));
        }
        let unknowns = self.target.unknown_names().len();
        if let ParamMode::SeparateNetwork { hidden } = &self.param_mode {
            if hidden.len() != unknowns {
                return Err(Error::arg(format!(
                    "{} coefficient networks configured for {unknowns} unknowns",
                    hidden.len()
                )));
            }
            if hidden.iter().any(|h| h.is_empty() || h.iter().any(|&w| w == 0)) {
                return Err(Error::arg("coefficient hidden widths must be positive"));
            }
        }
        let iota = match &self.misfit {
            MisfitNorm::L2 => 0,
            MisfitNorm::SobolevAuto { order } => *order,
            MisfitNorm::Sobolev(w) => w.order(),
        };
        if iota > self.target.kind().order() {
            return Err(Error::arg(format!(
                "misfit order {iota} exceeds the PDE order {}",
                self.target.kind().order()
            )));
        }
        if let GammaMode::Manual(g) = self.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::arg(format!("γ = {g} must be ≥ 0 and finite")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::arg(format!(
                "learning rate {} must be positive and finite",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::arg("epoch budget must be ≥ 1"));
        }
        Ok(())
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Inverse of [`softplus`] for y > 0.
fn softplus_inv(y: f64) -> f64 {
    debug_assert!(y > 0.0);
    y.exp_m1().ln()
}

/// The coefficient unknowns during training. Scalar and distributed values
/// are stored raw and pushed through a softplus, networks carry their own
/// positive output transform.
#[derive(Debug, Clone)]
pub enum ParamHolder {
    Scalar { raw: Vec<f64> },
    Distributed { raw: Vec<Vec<f64>> },
    Network { nets: Vec<MlpNetwork> },
}

/// Loss gradient w.r.t. the holder, mirroring its layout.
#[derive(Debug, Clone)]
pub enum ParamGrads {
    Scalar(Vec<f64>),
    Distributed(Vec<Vec<f64>>),
    Network(Vec<GradientSet>),
}

impl ParamHolder {
    fn init(mode: &ParamMode, unknowns: usize, nodes: usize, seed: u64) -> Result<Self> {
        let raw0 = softplus_inv(1.0);
        Ok(match mode {
            ParamMode::Scalar => ParamHolder::Scalar {
                raw: vec![raw0; unknowns],
            },
            ParamMode::Distributed => ParamHolder::Distributed {
                raw: vec![vec![raw0; nodes]; unknowns],
            },
            ParamMode::SeparateNetwork { hidden } => {
                let mut nets = Vec::with_capacity(unknowns);
                for (u, widths) in hidden.iter().enumerate() {
                    let mut shape = vec![2];
                    shape.extend_from_slice(widths);
                    shape.push(1);
                    nets.push(init_network(
                        &shape,
                        OutputTransform::Softplus,
                        seed.wrapping_add(0xC0EF).wrapping_add(u as u64),
                    )?);
                }
                ParamHolder::Network { nets }
            }
        })
    }

    fn check(&self, unknowns: usize, nodes: usize) -> Result<()> {
        match self {
            ParamHolder::Scalar { raw } => {
                if raw.len() != unknowns {
                    return Err(Error::dim(format!(
                        "{} scalar coefficients for {unknowns} unknowns",
                        raw.len()
                    )));
                }
            }
            ParamHolder::Distributed { raw } => {
                if raw.len() != unknowns || raw.iter().any(|r| r.len() != nodes) {
                    return Err(Error::dim(format!(
                        "distributed coefficients must be {unknowns} fields of {nodes} nodes"
                    )));
                }
            }
            ParamHolder::Network { nets } => {
                if nets.len() != unknowns {
                    return Err(Error::dim(format!(
                        "{} coefficient networks for {unknowns} unknowns",
                        nets.len()
                    )));
                }
                for net in nets {
                    if net.input_dim() != 2 || net.output_dim() != 1 {
                        return Err(Error::dim(
                            "coefficient networks must map (x̂, ŷ) to one channel",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// ϑ values at the collocation nodes, one vector per unknown.
    fn collocation_values(&self, problem: &PinnProblem) -> Result<Vec<Vec<f64>>> {
        let nc = problem.colloc.len();
        match self {
            ParamHolder::Scalar { raw } => Ok(raw
                .iter()
                .map(|&r| vec![softplus(r); nc])
                .collect()),
            ParamHolder::Distributed { raw } => Ok(raw
                .iter()
                .map(|per_node| problem.colloc.iter().map(|&k| softplus(per_node[k])).collect())
                .collect()),
            ParamHolder::Network { nets } => nets
                .iter()
                .map(|net| {
                    Ok(net
                        .forward_batch(problem.colloc_inputs.view())?
                        .column(0)
                        .to_vec())
                })
                .collect(),
        }
    }

    /// ϑ values at every grid node, one vector per unknown.
    fn node_values(&self, problem: &PinnProblem) -> Result<Vec<Vec<f64>>> {
        let n = problem.grid.len();
        match self {
            ParamHolder::Scalar { raw } => {
                Ok(raw.iter().map(|&r| vec![softplus(r); n]).collect())
            }
            ParamHolder::Distributed { raw } => Ok(raw
                .iter()
                .map(|per_node| per_node.iter().map(|&r| softplus(r)).collect())
                .collect()),
            ParamHolder::Network { nets } => nets
                .iter()
                .map(|net| Ok(net.forward_batch(problem.inputs.view())?.column(0).to_vec()))
                .collect(),
        }
    }

    /// The transformed values in scalar mode (for trajectory snapshots).
    fn scalar_values(&self) -> Option<Vec<f64>> {
        match self {
            ParamHolder::Scalar { raw } => Some(raw.iter().map(|&r| softplus(r)).collect()),
            _ => None,
        }
    }
}

/// Optimizer state matching a [`ParamHolder`].
enum HolderAdam {
    Scalar(AdamState),
    Distributed(Vec<AdamState>),
    Network(Vec<AdamState>),
}

impl HolderAdam {
    fn for_holder(holder: &ParamHolder) -> Self {
        match holder {
            ParamHolder::Scalar { raw } => HolderAdam::Scalar(AdamState::new(raw.len())),
            ParamHolder::Distributed { raw } => {
                HolderAdam::Distributed(raw.iter().map(|r| AdamState::new(r.len())).collect())
            }
            ParamHolder::Network { nets } => {
                HolderAdam::Network(nets.iter().map(AdamState::for_network).collect())
            }
        }
    }

    fn step(&mut self, holder: &mut ParamHolder, grads: &ParamGrads, lr: f64) {
        match (self, holder, grads) {
            (HolderAdam::Scalar(adam), ParamHolder::Scalar { raw }, ParamGrads::Scalar(g)) => {
                adam.step_slice(raw, g, lr);
            }
            (
                HolderAdam::Distributed(adams),
                ParamHolder::Distributed { raw },
                ParamGrads::Distributed(g),
            ) => {
                for ((adam, r), gu) in adams.iter_mut().zip(raw).zip(g) {
                    adam.step_slice(r, gu, lr);
                }
            }
            (HolderAdam::Network(adams), ParamHolder::Network { nets }, ParamGrads::Network(g)) => {
                for ((adam, net), gu) in adams.iter_mut().zip(nets).zip(g) {
                    adam.step(net, gu, lr);
                }
            }
            _ => unreachable!("holder, optimizer and gradients are built together"),
        }
    }
}

/// The two weighted terms of the loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinnLossBreakdown {
    pub total: f64,
    pub misfit: f64,
    pub residual: f64,
}

/// One record made ready for training: γ, inertia and the misfit targets
/// (the field itself first, then any spectrally differentiated companions
/// the Ĥ^ι norm asks for).
struct PreparedPinn {
    inertia: f64,
    gamma: f64,
    /// (multi-index, norm weight, per-component nodal values).
    targets: Vec<(MultiIndex, f64, Vec<Vec<Complex64>>)>,
}

/// A dataset made ready for [`pinn_loss`]: misfit targets assembled,
/// collocation nodes selected, inputs normalized, chain-rule scales fixed.
pub struct PinnProblem {
    target: TargetPde,
    pde_order: u8,
    iota: u8,
    ncomp: usize,
    bending: f64,
    weights: Option<SobolevWeights>,
    records: Vec<PreparedPinn>,
    grid: Grid2D,
    regions: RegionMap,
    /// Normalized (x̂, ŷ) per grid node.
    inputs: Array2<f64>,
    /// Flat node ids carrying the residual term, grouped by region.
    colloc: Vec<usize>,
    /// Node id → collocation position (u32::MAX when not collocated).
    colloc_pos: Vec<u32>,
    colloc_inputs: Array2<f64>,
    /// Per-region collocation cores (parent-grid coordinates) for seam-free
    /// statistics.
    core_rects: Vec<RegionRect>,
    x_map: [f64; 2],
    y_map: [f64; 2],
    /// Chain factors mapping ∂^e w.r.t. (x̂, ŷ) to ∂^e w.r.t. (x, y),
    /// indexed by [`coeff_index`].
    scales: [f64; NC_MAX],
}

impl PinnProblem {
    pub fn new(dataset: &Dataset, config: &PinnConfig) -> Result<Self> {
        config.validate()?;
        dataset.validate()?;
        if dataset.pde != config.target.kind() {
            return Err(Error::arg(format!(
                "dataset is {:?} data but the inversion targets {:?}",
                dataset.pde,
                config.target.kind()
            )));
        }
        if dataset.records.is_empty() {
            return Err(Error::arg("dataset has no records"));
        }
        let grid = dataset.grid;
        let regions = dataset.regions.clone();
        let ncomp = match dataset.pde {
            PdeKind::PlaneStrain => 2,
            PdeKind::Flexural => 1,
        };
        let bending = match config.target {
            TargetPde::Flexural { nu, h } => PlateMaterial::new(1.0, nu, h)?.bending_factor(),
            TargetPde::PlaneStrain { .. } => 0.0,
        };

        // Residual collocation: regions shrunk by the seam margin.
        let m = config.seam_margin;
        let mut core_rects = Vec::with_capacity(regions.region_count());
        for (r, rect) in regions.rects().iter().enumerate() {
            if rect.ni <= 2 * m || rect.nj <= 2 * m {
                return Err(Error::dim(format!(
                    "seam margin {m} leaves region {r} ({}×{} nodes) empty",
                    rect.ni, rect.nj
                )));
            }
            core_rects.push(RegionRect {
                i0: rect.i0 + m,
                j0: rect.j0 + m,
                ni: rect.ni - 2 * m,
                nj: rect.nj - 2 * m,
            });
        }
        let mut colloc = Vec::new();
        for rect in &core_rects {
            for j in rect.j0..rect.j0 + rect.nj {
                for i in rect.i0..rect.i0 + rect.ni {
                    colloc.push(grid.idx(i, j));
                }
            }
        }
        let mut colloc_pos = vec![u32::MAX; grid.len()];
        for (ci, &k) in colloc.iter().enumerate() {
            colloc_pos[k] = ci as u32;
        }

        // Misfit norm: resolve auto wavenumbers against the data spectrum.
        let iota = match &config.misfit {
            MisfitNorm::L2 => 0,
            MisfitNorm::SobolevAuto { order } => *order,
            MisfitNorm::Sobolev(w) => w.order(),
        };
        let weights = match &config.misfit {
            MisfitNorm::L2 => None,
            MisfitNorm::SobolevAuto { order: 0 } => None,
            MisfitNorm::SobolevAuto { order } => {
                let fields: Vec<&FieldData> =
                    dataset.records.iter().map(|r| &r.field).collect();
                let kappa = dominant_wavenumber(&fields)?;
                let norm = kappa[0].hypot(kappa[1]);
                // One-dimensional data leaves an axis silent; fall back to
                // the isotropic magnitude there rather than dividing by 0.
                let fixed = [
                    if kappa[0] > 0.0 { kappa[0] } else { norm },
                    if kappa[1] > 0.0 { kappa[1] } else { norm },
                ];
                Some(SobolevWeights::from_wavenumbers(fixed, *order)?)
            }
            MisfitNorm::Sobolev(w) => {
                if w.order() == 0 {
                    None
                } else {
                    Some(w.clone())
                }
            }
        };

        // Normalize the domain onto [−1, 1]².
        let half = |n: usize, d: f64| ((n - 1) as f64) * d / 2.0;
        let x_map = [
            grid.origin()[0] + half(grid.nx(), grid.dx()),
            half(grid.nx(), grid.dx()),
        ];
        let y_map = [
            grid.origin()[1] + half(grid.ny(), grid.dy()),
            half(grid.ny(), grid.dy()),
        ];
        let mut inputs = Array2::zeros((grid.len(), 2));
        for k in 0..grid.len() {
            let (i, j) = grid.ij(k);
            inputs[[k, 0]] = (grid.x(i) - x_map[0]) / x_map[1];
            inputs[[k, 1]] = (grid.y(j) - y_map[0]) / y_map[1];
        }
        let mut colloc_inputs = Array2::zeros((colloc.len(), 2));
        for (row, &k) in colloc.iter().enumerate() {
            colloc_inputs[[row, 0]] = inputs[[k, 0]];
            colloc_inputs[[row, 1]] = inputs[[k, 1]];
        }
        let mut scales = [0.0; NC_MAX];
        for e1 in 0..=MAX_ORDER {
            for e2 in 0..=(MAX_ORDER - e1) {
                scales[coeff_index(e1, e2)] =
                    x_map[1].powi(-(e1 as i32)) * y_map[1].powi(-(e2 as i32));
            }
        }

        let mut records = Vec::with_capacity(dataset.records.len());
        for (ri, rec) in dataset.records.iter().enumerate() {
            if rec.field.component_count() != ncomp {
                return Err(Error::dim(format!(
                    "record {ri} has {} components, {:?} data needs {ncomp}",
                    rec.field.component_count(),
                    dataset.pde
                )));
            }
            let gamma = match config.gamma {
                GammaMode::InertiaRule => gamma_inertia(&config.target, rec.frequency)?,
                GammaMode::Manual(g) => g,
            };
            let mut targets = Vec::new();
            let field_vals: Vec<Vec<Complex64>> = (0..ncomp)
                .map(|c| rec.field.component(c).to_vec())
                .collect();
            targets.push((MultiIndex::new(0, 0)?, 1.0, field_vals));
            if let Some(w) = &weights {
                for &(e, gamma_e) in w.entries() {
                    let d = spectral_derivative(&rec.field, &regions, e)?;
                    let vals = (0..ncomp).map(|c| d.component(c).to_vec()).collect();
                    targets.push((e, gamma_e, vals));
                }
            }
            records.push(PreparedPinn {
                inertia: config.target.inertia(rec.frequency),
                gamma,
                targets,
            });
        }

        Ok(PinnProblem {
            target: config.target.clone(),
            pde_order: dataset.pde.order(),
            iota,
            ncomp,
            bending,
            weights,
            records,
            grid,
            regions,
            inputs,
            colloc,
            colloc_pos,
            colloc_inputs,
            core_rects,
            x_map,
            y_map,
            scales,
        })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn regions(&self) -> &RegionMap {
        &self.regions
    }

    /// Flat node ids carrying the residual term.
    pub fn collocation(&self) -> &[usize] {
        &self.colloc
    }

    /// The resolved Ĥ^ι weights (None for a plain L² misfit).
    pub fn weights(&self) -> Option<&SobolevWeights> {
        self.weights.as_ref()
    }

    /// Per-record residual weights γ.
    pub fn gammas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gamma).collect()
    }

    fn record_count(&self) -> usize {
        self.records.len()
    }

    fn unknowns(&self) -> usize {
        self.target.unknown_names().len()
    }
}

/// Per-chunk partial sums of one record pass.
struct ChunkOut {
    /// Raw squared-mismatch sums per misfit target.
    misfit: Vec<f64>,
    /// Raw Σ|γ·r|² over this chunk's collocation nodes.
    residual: f64,
    grads: GradientSet,
    /// (collocation position, upstream per unknown).
    theta_up: Vec<(u32, [f64; 2])>,
}

/// Evaluate the full loss and every gradient.
///
/// The misfit term is the nodal mean of `|û − û*|²` plus, in Ĥ^ι mode,
/// `Σ_e γ^e` times the nodal mean of the derivative mismatches; the
/// residual term is the collocation-node mean of `|γ·Λ(û*; ϑ*)|²`. Both
/// sums run over components and records. Gradients cover every surrogate
/// (one per record) and the coefficient holder. A non-finite jet aborts
/// with the node index (the trainer substitutes the epoch).
pub fn pinn_loss(
    problem: &PinnProblem,
    surrogates: &[MlpNetwork],
    holder: &ParamHolder,
) -> Result<(PinnLossBreakdown, Vec<GradientSet>, ParamGrads)> {
    if surrogates.len() != problem.record_count() {
        return Err(Error::dim(format!(
            "{} surrogates for {} records",
            surrogates.len(),
            problem.record_count()
        )));
    }
    for net in surrogates {
        if net.input_dim() != 2 || net.output_dim() != 2 * problem.ncomp {
            return Err(Error::dim(format!(
                "surrogate must map (x̂, ŷ) to {} channels",
                2 * problem.ncomp
            )));
        }
    }
    let unknowns = problem.unknowns();
    holder.check(unknowns, problem.grid.len())?;
    let theta_col = holder.collocation_values(problem)?;

    let n = problem.grid.len();
    let n_col = problem.colloc.len();
    let mut misfit_total = 0.0;
    let mut residual_total = 0.0;
    let mut surrogate_grads = Vec::with_capacity(surrogates.len());
    let mut theta_up_global = vec![vec![0.0; n_col]; unknowns];

    const CHUNK: usize = 64;
    let ranges: Vec<(usize, usize)> = (0..n)
        .step_by(CHUNK)
        .map(|a| (a, (a + CHUNK).min(n)))
        .collect();

    for (rec, net) in problem.records.iter().zip(surrogates) {
        let chunks: Vec<ChunkOut> = ranges
            .par_iter()
            .map(|&(a, b)| record_pass(problem, rec, net, &theta_col, a, b))
            .collect::<Result<_>>()?;

        let mut grads = GradientSet::zeros_like(net);
        let mut misfit_sums = vec![0.0; rec.targets.len()];
        let mut residual_sum = 0.0;
        for chunk in &chunks {
            for (acc, &v) in misfit_sums.iter_mut().zip(&chunk.misfit) {
                *acc += v;
            }
            residual_sum += chunk.residual;
            grads.add(&chunk.grads);
            for &(ci, ref tu) in &chunk.theta_up {
                for u in 0..unknowns {
                    theta_up_global[u][ci as usize] += tu[u];
                }
            }
        }
        for (t, (_, w, _)) in rec.targets.iter().enumerate() {
            misfit_total += w * misfit_sums[t] / n as f64;
        }
        residual_total += residual_sum / n_col as f64;
        surrogate_grads.push(grads);
    }

    // Chain the residual upstream through the holder's positivity transform.
    let param_grads = match holder {
        ParamHolder::Scalar { raw } => ParamGrads::Scalar(
            raw.iter()
                .enumerate()
                .map(|(u, &r)| theta_up_global[u].iter().sum::<f64>() * sigmoid(r))
                .collect(),
        ),
        ParamHolder::Distributed { raw } => {
            let mut grads = vec![vec![0.0; problem.grid.len()]; unknowns];
            for (u, per_node) in raw.iter().enumerate() {
                for (ci, &k) in problem.colloc.iter().enumerate() {
                    grads[u][k] = theta_up_global[u][ci] * sigmoid(per_node[k]);
                }
            }
            ParamGrads::Distributed(grads)
        }
        ParamHolder::Network { nets } => {
            let mut grads = Vec::with_capacity(unknowns);
            for (u, net) in nets.iter().enumerate() {
                let upstream =
                    Array2::from_shape_vec((n_col, 1), theta_up_global[u].clone())
                        .expect("collocation count matches");
                grads.push(net.backprop_params(problem.colloc_inputs.view(), upstream.view())?);
            }
            ParamGrads::Network(grads)
        }
    };

    Ok((
        PinnLossBreakdown {
            total: misfit_total + residual_total,
            misfit: misfit_total,
            residual: residual_total,
        },
        surrogate_grads,
        param_grads,
    ))
}

/// One contiguous node range of one record: misfit + residual values and
/// every upstream, reduced deterministically by the caller.
fn record_pass(
    problem: &PinnProblem,
    rec: &PreparedPinn,
    net: &MlpNetwork,
    theta_col: &[Vec<f64>],
    a: usize,
    b: usize,
) -> Result<ChunkOut> {
    let ncomp = problem.ncomp;
    let out_dim = 2 * ncomp;
    let n = problem.grid.len() as f64;
    let n_col = problem.colloc.len() as f64;
    let c_mis = 2.0 / n;
    let gamma2 = rec.gamma * rec.gamma;
    let c_res = 2.0 * gamma2 / n_col;
    let e00 = MultiIndex::new(0, 0).expect("order 0");

    let mut out = ChunkOut {
        misfit: vec![0.0; rec.targets.len()],
        residual: 0.0,
        grads: GradientSet::zeros_like(net),
        theta_up: Vec::new(),
    };
    let mut upstream = vec![0.0; coeff_count(problem.pde_order as usize) * out_dim];

    for k in a..b {
        let ci = problem.colloc_pos[k];
        let with_residual = ci != u32::MAX && rec.gamma != 0.0;
        let order = if with_residual {
            problem.pde_order
        } else {
            problem.iota
        };
        let x = [problem.inputs[[k, 0]], problem.inputs[[k, 1]]];
        let jet = net.forward_jet(&x, order)?;
        let nc = coeff_count(order as usize);
        let up = &mut upstream[..nc * out_dim];
        up.fill(0.0);
        let mut finite = true;

        // Data misfit: field term plus any weighted derivative terms.
        for (t, (e, w, data)) in rec.targets.iter().enumerate() {
            let s = problem.scales[coeff_index(e.e1() as usize, e.e2() as usize)];
            let idx = coeff_index(e.e1() as usize, e.e2() as usize);
            for c in 0..ncomp {
                let d = data[c][k];
                let jr = jet.get(2 * c, *e)? * s;
                let ji = jet.get(2 * c + 1, *e)? * s;
                finite &= jr.is_finite() && ji.is_finite();
                let (er, ei) = (jr - d.re, ji - d.im);
                out.misfit[t] += er * er + ei * ei;
                up[2 * c * nc + idx] += c_mis * w * er * s;
                up[(2 * c + 1) * nc + idx] += c_mis * w * ei * s;
            }
        }

        // PDE residual on surrogate jets.
        if with_residual {
            let cval = |comp: usize, e: MultiIndex| -> Result<Complex64> {
                let s = problem.scales[coeff_index(e.e1() as usize, e.e2() as usize)];
                Ok(Complex64::new(
                    jet.get(2 * comp, e)? * s,
                    jet.get(2 * comp + 1, e)? * s,
                ))
            };
            match problem.target {
                TargetPde::PlaneStrain { .. } => {
                    let e20 = MultiIndex::new(2, 0)?;
                    let e02 = MultiIndex::new(0, 2)?;
                    let e11 = MultiIndex::new(1, 1)?;
                    let u = [cval(0, e00)?, cval(1, e00)?];
                    let d20 = [cval(0, e20)?, cval(1, e20)?];
                    let d02 = [cval(0, e02)?, cval(1, e02)?];
                    let d11 = [cval(0, e11)?, cval(1, e11)?];
                    let (mu, la) = (theta_col[0][ci as usize], theta_col[1][ci as usize]);
                    let r = navier_residual_at(u, d20, d02, d11, mu, la, rec.inertia);
                    finite &= r[0].is_finite() && r[1].is_finite();
                    out.residual += (rec.gamma * r[0]).norm_sqr()
                        + (rec.gamma * r[1]).norm_sqr();

                    // The residual is linear in every jet entry; probe the
                    // canonical operator for the coefficients instead of
                    // duplicating its stencil here.
                    let zero = [Complex64::new(0.0, 0.0); 2];
                    let one = Complex64::new(1.0, 0.0);
                    for (slot, e) in [(0usize, e00), (1, e20), (2, e02), (3, e11)] {
                        let s = problem.scales
                            [coeff_index(e.e1() as usize, e.e2() as usize)];
                        let idx = coeff_index(e.e1() as usize, e.e2() as usize);
                        for q in 0..2 {
                            let mut probe = [zero; 4];
                            probe[slot][q] = one;
                            let col = navier_residual_at(
                                probe[0], probe[1], probe[2], probe[3], mu, la, rec.inertia,
                            );
                            let wre = r[0].re * col[0].re + r[1].re * col[1].re;
                            let wim = r[0].im * col[0].re + r[1].im * col[1].re;
                            up[2 * q * nc + idx] += c_res * wre * s;
                            up[(2 * q + 1) * nc + idx] += c_res * wim * s;
                        }
                    }
                    let a_mu = navier_residual_at(u, d20, d02, d11, 1.0, 0.0, 0.0);
                    let a_la = navier_residual_at(u, d20, d02, d11, 0.0, 1.0, 0.0);
                    let tu = [
                        c_res
                            * (r[0].re * a_mu[0].re
                                + r[0].im * a_mu[0].im
                                + r[1].re * a_mu[1].re
                                + r[1].im * a_mu[1].im),
                        c_res
                            * (r[0].re * a_la[0].re
                                + r[0].im * a_la[0].im
                                + r[1].re * a_la[1].re
                                + r[1].im * a_la[1].im),
                    ];
                    out.theta_up.push((ci, tu));
                }
                TargetPde::Flexural { .. } => {
                    let e40 = MultiIndex::new(4, 0)?;
                    let e04 = MultiIndex::new(0, 4)?;
                    let e22 = MultiIndex::new(2, 2)?;
                    let v = cval(0, e00)?;
                    let d40 = cval(0, e40)?;
                    let d04 = cval(0, e04)?;
                    let d22 = cval(0, e22)?;
                    let chi = theta_col[0][ci as usize];
                    let r = flexural_residual_at(
                        v, d40, d04, d22, chi, problem.bending, rec.inertia,
                    );
                    finite &= r.is_finite();
                    out.residual += (rec.gamma * r).norm_sqr();

                    let zero = Complex64::new(0.0, 0.0);
                    let one = Complex64::new(1.0, 0.0);
                    for (slot, e) in [(0usize, e00), (1, e40), (2, e04), (3, e22)] {
                        let s = problem.scales
                            [coeff_index(e.e1() as usize, e.e2() as usize)];
                        let idx = coeff_index(e.e1() as usize, e.e2() as usize);
                        let mut probe = [zero; 4];
                        probe[slot] = one;
                        let col = flexural_residual_at(
                            probe[0],
                            probe[1],
                            probe[2],
                            probe[3],
                            chi,
                            problem.bending,
                            rec.inertia,
                        );
                        up[idx] += c_res * r.re * col.re * s;
                        up[nc + idx] += c_res * r.im * col.re * s;
                    }
                    let a_chi =
                        flexural_residual_at(v, d40, d04, d22, 1.0, problem.bending, 0.0);
                    let tu = [c_res * (r.re * a_chi.re + r.im * a_chi.im), 0.0];
                    out.theta_up.push((ci, tu));
                }
            }
        }

        if !finite {
            return Err(Error::Numerical {
                epoch: 0,
                detail: format!("non-finite surrogate jet at node {k}"),
            });
        }
        net.backprop_jet(&x, order, up, &mut out.grads)?;
    }
    Ok(out)
}

/// The adaptive Ĥ^ι misfit of data against surrogate jets:
/// `mean|û − û*|² + Σ_{1≤|e|≤ι} γ^e·mean|∇^e û − ∇^e û*|²`, components
/// summed. `jets` carry physical derivatives, one per grid node in row-major
/// order; data derivative fields must already be attached to the record.
pub fn sobolev_misfit(record: &Record, jets: &[Jet], weights: &SobolevWeights) -> Result<f64> {
    let grid = record.field.grid();
    if jets.len() != grid.len() {
        return Err(Error::dim(format!(
            "{} jets for {} grid nodes",
            jets.len(),
            grid.len()
        )));
    }
    let ncomp = record.field.component_count();
    for jet in jets {
        if jet.output_count() != 2 * ncomp {
            return Err(Error::dim(format!(
                "jets carry {} channels, the field needs {}",
                jet.output_count(),
                2 * ncomp
            )));
        }
        if jet.order() < weights.order() {
            return Err(Error::arg(format!(
                "jets of order {} cannot serve an Ĥ^{} misfit",
                jet.order(),
                weights.order()
            )));
        }
    }
    let n = grid.len() as f64;
    let e00 = MultiIndex::new(0, 0)?;

    let mut total = 0.0;
    let term = |e: MultiIndex, data: &FieldData| -> Result<f64> {
        let mut sum = 0.0;
        for c in 0..ncomp {
            let vals = data.component(c);
            for (k, jet) in jets.iter().enumerate() {
                let er = jet.get(2 * c, e)? - vals[k].re;
                let ei = jet.get(2 * c + 1, e)? - vals[k].im;
                sum += er * er + ei * ei;
            }
        }
        Ok(sum / n)
    };
    total += term(e00, &record.field)?;
    for &(e, w) in weights.entries() {
        let data = record.deriv(e.e1(), e.e2())?;
        if data.component_count() != ncomp {
            return Err(Error::dim(format!(
                "derivative field {e} has {} components, the field {ncomp}",
                data.component_count()
            )));
        }
        total += w * term(e, data)?;
    }
    Ok(total)
}

/// Reconstruction output: trained surrogates, final coefficient fields,
/// loss and ϑ trajectories, and per-region statistics over the collocation
/// cores. Trained surrogates stay queryable at arbitrary points through
/// [`PinnResult::evaluate`] and their exact derivatives through
/// [`PinnResult::derivative_field`].
pub struct PinnResult {
    pub grid: Grid2D,
    pub regions: RegionMap,
    /// Unknown names, matching the order of `theta` and `stats`.
    pub names: Vec<&'static str>,
    /// One trained surrogate per record.
    pub surrogates: Vec<MlpNetwork>,
    /// Final coefficient carrier.
    pub holder: ParamHolder,
    /// Final coefficient fields on the grid, one per unknown.
    pub theta: Vec<Vec<f64>>,
    /// Scalar mode only: per-epoch transformed ϑ values.
    pub theta_history: Vec<Vec<f64>>,
    pub history: Vec<PinnLossBreakdown>,
    /// Per unknown, per region: (mean, σ) over the collocation core.
    pub stats: Vec<Vec<(f64, f64)>>,
    /// Against ground truth, per unknown: (Ξ, pointwise error field).
    pub misfit: Option<Vec<(f64, Vec<f64>)>>,
    x_map: [f64; 2],
    y_map: [f64; 2],
}

impl PinnResult {
    fn normalize(&self, xy: [f64; 2]) -> [f64; 2] {
        [
            (xy[0] - self.x_map[0]) / self.x_map[1],
            (xy[1] - self.y_map[0]) / self.y_map[1],
        ]
    }

    /// The surrogate wavefield of one record at an arbitrary point.
    pub fn evaluate(&self, record: usize, xy: [f64; 2]) -> Result<Vec<Complex64>> {
        let net = self
            .surrogates
            .get(record)
            .ok_or_else(|| Error::arg(format!("no record {record}")))?;
        let out = net.forward(&self.normalize(xy))?;
        Ok(out.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
    }

    /// Jets of one record's surrogate at every grid node, rescaled to
    /// physical derivatives.
    pub fn surrogate_jets(&self, record: usize, order: u8) -> Result<Vec<Jet>> {
        let net = self
            .surrogates
            .get(record)
            .ok_or_else(|| Error::arg(format!("no record {record}")))?;
        let (inv_sx, inv_sy) = (1.0 / self.x_map[1], 1.0 / self.y_map[1]);
        let mut jets = Vec::with_capacity(self.grid.len());
        for k in 0..self.grid.len() {
            let (i, j) = self.grid.ij(k);
            let (x, y) = (self.grid.x(i), self.grid.y(j));
            let jet = net.forward_jet(&self.normalize([x, y]), order)?;
            let mut values = vec![[0.0; NC_MAX]; net.output_dim()];
            for (o, v) in values.iter_mut().enumerate() {
                for e1 in 0..=order {
                    for e2 in 0..=(order - e1) {
                        let e = MultiIndex::new(e1, e2)?;
                        let idx = coeff_index(e1 as usize, e2 as usize);
                        v[idx] = jet.get(o, e)?
                            * inv_sx.powi(e1 as i32)
                            * inv_sy.powi(e2 as i32);
                    }
                }
            }
            jets.push(Jet::from_values(order, [x, y], values));
        }
        Ok(jets)
    }

    /// One physical derivative of a record's surrogate as a field (use
    /// `e = (0, 0)` for the reconstructed wavefield itself).
    pub fn derivative_field(&self, record: usize, e: MultiIndex) -> Result<FieldData> {
        let jets = self.surrogate_jets(record, e.order())?;
        let ncomp = jets[0].output_count() / 2;
        let mut comps: Vec<Vec<Complex64>> = vec![Vec::with_capacity(jets.len()); ncomp];
        for jet in &jets {
            for (c, comp) in comps.iter_mut().enumerate() {
                comp.push(Complex64::new(jet.get(2 * c, e)?, jet.get(2 * c + 1, e)?));
            }
        }
        Ok(match ncomp {
            1 => FieldData::Scalar(crate::grid::ScalarField::from_values(
                self.grid,
                comps.pop().expect("one component"),
            )?),
            _ => {
                let c2 = comps.pop().expect("two components");
                let c1 = comps.pop().expect("two components");
                FieldData::Vector(crate::grid::VectorField2::from_components(
                    self.grid, c1, c2,
                )?)
            }
        })
    }
}

/// Full-batch ADAM over all surrogates and the coefficient holder. Aborts
/// with the epoch index when the loss or a jet stops being finite.
pub fn train_pinn(
    dataset: &Dataset,
    config: &PinnConfig,
    truth: Option<&Materials>,
) -> Result<PinnResult> {
    let problem = PinnProblem::new(dataset, config)?;
    let unknowns = problem.unknowns();
    let ncomp = problem.ncomp;

    let mut surrogates = Vec::with_capacity(problem.record_count());
    for ri in 0..problem.record_count() {
        let mut shape = vec![2];
        shape.extend_from_slice(&config.surrogate_hidden);
        shape.push(2 * ncomp);
        surrogates.push(init_network(
            &shape,
            OutputTransform::Identity,
            config.seed.wrapping_add(ri as u64),
        )?);
    }
    let mut holder = ParamHolder::init(
        &config.param_mode,
        unknowns,
        problem.grid.len(),
        config.seed,
    )?;

    let mut surrogate_adams: Vec<AdamState> =
        surrogates.iter().map(AdamState::for_network).collect();
    let mut holder_adam = HolderAdam::for_holder(&holder);

    let mut history = Vec::with_capacity(config.epochs);
    let mut theta_history = Vec::new();
    for epoch in 0..config.epochs {
        let (loss, sgrads, pgrads) =
            pinn_loss(&problem, &surrogates, &holder).map_err(|err| match err {
                Error::Numerical { detail, .. } => Error::Numerical { epoch, detail },
                other => other,
            })?;
        if !loss.total.is_finite() {
            return Err(Error::Numerical {
                epoch,
                detail: format!("loss became {}", loss.total),
            });
        }
        for ((net, adam), g) in surrogates.iter_mut().zip(&mut surrogate_adams).zip(&sgrads) {
            adam.step(net, g, config.learning_rate);
        }
        holder_adam.step(&mut holder, &pgrads, config.learning_rate);
        history.push(loss);
        if let Some(vals) = holder.scalar_values() {
            theta_history.push(vals);
        }
    }

    let theta = holder.node_values(&problem)?;
    let stats = theta
        .iter()
        .map(|field| {
            problem
                .core_rects
                .iter()
                .map(|rect| direct::rect_statistics(field, problem.grid, rect))
                .collect()
        })
        .collect();
    let misfit = match truth {
        Some(mats) => {
            let truth_fields = direct::truth_to_fields(mats, &problem.target, &problem.regions)?;
            let mut per_unknown = Vec::with_capacity(unknowns);
            for (rec, tru) in theta.iter().zip(&truth_fields) {
                per_unknown.push(direct::normal_misfit(rec, tru, problem.grid)?);
            }
            Some(per_unknown)
        }
        None => None,
    };

    Ok(PinnResult {
        grid: problem.grid,
        regions: problem.regions.clone(),
        names: problem.target.unknown_names().to_vec(),
        surrogates,
        holder,
        theta,
        theta_history,
        history,
        stats,
        misfit,
        x_map: problem.x_map,
        y_map: problem.y_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Record;
    use crate::mlp::fd_check;
    use crate::physics::PlaneStrainMaterial;
    use crate::synth::{
        manufactured_flexural, manufactured_planestrain, standing_flexural_mode,
        standing_planestrain_modes,
    };
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// Homogeneous plane-strain standing modes (m_p, m_s) on an n×n grid.
    fn standing_ps(
        n: usize,
        m_p: usize,
        m_s: usize,
        amp: Complex64,
    ) -> (Dataset, PlaneStrainMaterial, f64) {
        let grid = Grid2D::new(n, n, 0.16, 0.16, [0.0, 0.0]).unwrap();
        let regions = RegionMap::single(grid);
        let omega = PI * m_s as f64 / (n as f64 * 0.16); // μ lands at 1
        let (mat, mut specs) =
            standing_planestrain_modes(grid, &regions, 0, 1.0, omega, m_p, m_s).unwrap();
        for w in &mut specs {
            w.amplitude *= amp;
        }
        let record =
            manufactured_planestrain(grid, &regions, &[mat], omega, &specs, false, "src0")
                .unwrap();
        let ds = Dataset {
            pde: PdeKind::PlaneStrain,
            grid,
            regions,
            materials: Some(Materials::PlaneStrain(vec![mat])),
            records: vec![record],
        };
        ds.validate().unwrap();
        (ds, mat, omega)
    }

    /// Homogeneous flexural standing mode on an n×n grid.
    fn standing_flex(n: usize, m: usize, f: f64) -> (Dataset, PlateMaterial) {
        let grid = Grid2D::new(n, n, 0.3, 0.3, [0.0, 0.0]).unwrap();
        let regions = RegionMap::single(grid);
        let (mat, specs) =
            standing_flexural_mode(grid, &regions, 0, 0.33, 0.15, f, m).unwrap();
        let record =
            manufactured_flexural(grid, &regions, &[mat], f, &specs, false, "src0").unwrap();
        let ds = Dataset {
            pde: PdeKind::Flexural,
            grid,
            regions,
            materials: Some(Materials::Plate(vec![mat])),
            records: vec![record],
        };
        ds.validate().unwrap();
        (ds, mat)
    }

    fn small_config(rho: f64) -> PinnConfig {
        let mut config = PinnConfig::plane_strain(rho);
        config.surrogate_hidden = vec![10, 10];
        config.epochs = 50;
        config.seed = 7;
        config
    }

    #[test]
    fn gamma_matches_hand_computed_balance_weights() {
        let ps = TargetPde::PlaneStrain { rho: 1.0 };
        let g = gamma_inertia(&ps, 3.91).unwrap();
        assert_relative_eq!(g, 1.0 / (3.91 * 3.91), epsilon = 1e-15);
        assert!((g - 0.065).abs() < 5e-4);

        let plate = TargetPde::Flexural { nu: 0.33, h: 0.15 };
        let g = gamma_inertia(&plate, 0.336).unwrap();
        assert_relative_eq!(g, 1.0 / (0.15 * (2.0 * PI * 0.336).powi(2)), epsilon = 1e-15);
        assert!((g - 1.50).abs() / 1.50 < 5e-3);

        let g = gamma_inertia(&plate, 0.17).unwrap();
        assert!((g - 5.84).abs() / 5.84 < 1e-3);

        assert!(gamma_inertia(&ps, 0.0).is_err());
        assert!(gamma_inertia(&ps, f64::NAN).is_err());
    }

    #[test]
    fn sobolev_weight_tables() {
        // Unit wavenumbers leave every derivative term unweighted.
        let w = SobolevWeights::from_wavenumbers([1.0, 1.0], 4).unwrap();
        assert_eq!(w.entries().len(), 14);
        assert!(w.entries().iter().all(|&(_, g)| g == 1.0));

        let w = SobolevWeights::from_wavenumbers([2.0, 3.0], 2).unwrap();
        let g = |e1, e2| w.gamma(MultiIndex::new(e1, e2).unwrap()).unwrap();
        assert_relative_eq!(g(1, 0), 1.0 / 4.0);
        assert_relative_eq!(g(0, 1), 1.0 / 9.0);
        assert_relative_eq!(g(2, 0), 1.0 / 16.0);
        assert_relative_eq!(g(1, 1), 1.0 / 36.0);
        assert_relative_eq!(g(0, 2), 1.0 / 81.0);
        assert!(w.gamma(MultiIndex::new(3, 0).unwrap()).is_none());

        // ι = 0 is the L² norm: no derivative weights at all.
        let w = SobolevWeights::from_wavenumbers([2.0, 3.0], 0).unwrap();
        assert!(w.entries().is_empty());

        // Manual weights must cover the index set exactly and be positive.
        let entries = vec![
            (MultiIndex::new(1, 0).unwrap(), 0.5),
            (MultiIndex::new(0, 1).unwrap(), 2.0),
        ];
        let w = SobolevWeights::manual(1, entries.clone()).unwrap();
        assert_eq!(w.kappa(), None);
        assert_relative_eq!(w.gamma(entries[0].0).unwrap(), 0.5);
        assert!(SobolevWeights::manual(2, entries.clone()).is_err());
        assert!(SobolevWeights::manual(
            1,
            vec![
                (MultiIndex::new(1, 0).unwrap(), 0.5),
                (MultiIndex::new(0, 1).unwrap(), -2.0),
            ]
        )
        .is_err());
        assert!(SobolevWeights::from_wavenumbers([0.0, 1.0], 2).is_err());
    }

    /// Jets equal to the data itself (values and spectral derivatives).
    fn data_jets(record: &Record, order: u8) -> Vec<Jet> {
        let grid = record.field.grid();
        let ncomp = record.field.component_count();
        (0..grid.len())
            .map(|k| {
                let (i, j) = grid.ij(k);
                let mut values = vec![[0.0; NC_MAX]; 2 * ncomp];
                for c in 0..ncomp {
                    let v = record.field.component(c)[k];
                    values[2 * c][0] = v.re;
                    values[2 * c + 1][0] = v.im;
                    for e in MultiIndex::up_to_order(order) {
                        let d = record.deriv(e.e1(), e.e2()).unwrap().component(c)[k];
                        let idx = coeff_index(e.e1() as usize, e.e2() as usize);
                        values[2 * c][idx] = d.re;
                        values[2 * c + 1][idx] = d.im;
                    }
                }
                Jet::from_values(order, [grid.x(i), grid.y(j)], values)
            })
            .collect()
    }

    fn attach_spectral_derivs(ds: &mut Dataset, order: u8) {
        let regions = ds.regions.clone();
        for rec in &mut ds.records {
            for e in MultiIndex::up_to_order(order) {
                let d = spectral_derivative(&rec.field, &regions, e).unwrap();
                rec.derivs.insert(e, d);
            }
        }
    }

    #[test]
    fn sobolev_misfit_vanishes_on_matching_jets_and_reduces_to_l2() {
        let (mut ds, _, _) = standing_ps(16, 2, 3, Complex64::new(1.0, 0.4));
        attach_spectral_derivs(&mut ds, 2);
        let rec = &ds.records[0];
        let w = SobolevWeights::from_wavenumbers([1.3, 0.8], 2).unwrap();

        // û* ≡ û including all derivatives → 0.
        let jets = data_jets(rec, 2);
        assert_eq!(sobolev_misfit(rec, &jets, &w).unwrap(), 0.0);

        // ι = 0 against a zero surrogate is exactly the mean squared field.
        let zero_jets: Vec<Jet> = (0..ds.grid.len())
            .map(|_| Jet::from_values(0, [0.0, 0.0], vec![[0.0; NC_MAX]; 4]))
            .collect();
        let l2 = SobolevWeights::from_wavenumbers([1.0, 1.0], 0).unwrap();
        let got = sobolev_misfit(rec, &zero_jets, &l2).unwrap();
        let want = (0..2)
            .map(|c| {
                rec.field
                    .component(c)
                    .iter()
                    .map(|v| v.norm_sqr())
                    .sum::<f64>()
                    / ds.grid.len() as f64
            })
            .sum::<f64>();
        assert_relative_eq!(got, want, max_relative = 1e-14);

        // Missing data derivatives are refused.
        let mut bare = rec.clone();
        bare.derivs.clear();
        assert!(matches!(
            sobolev_misfit(&bare, &jets, &w),
            Err(Error::MissingDerivative(_, _))
        ));
    }

    #[test]
    fn sobolev_terms_balance_for_a_plane_wave_mismatch() {
        // For a mismatch cos(k(x + dx/2)) with κ = (k, k), every weighted
        // derivative term equals the L² term when the derivative is along x
        // and vanishes along y — all within the factor-4 envelope.
        let grid = Grid2D::new(24, 24, 0.16, 0.16, [0.0, 0.0]).unwrap();
        let regions = RegionMap::single(grid);
        let k = PI * 5.0 / (24.0 * 0.16);
        let field = crate::grid::ScalarField::from_fn(grid, |x, _| {
            Complex64::new((k * (x + 0.08)).cos(), 0.0)
        })
        .unwrap();
        let mut rec = Record {
            frequency: 1.0,
            source: "wave".into(),
            field: FieldData::Scalar(field),
            derivs: Default::default(),
        };
        for e in MultiIndex::up_to_order(2) {
            let d = spectral_derivative(&rec.field, &regions, e).unwrap();
            rec.derivs.insert(e, d);
        }
        let zero_jets: Vec<Jet> = (0..grid.len())
            .map(|_| Jet::from_values(2, [0.0, 0.0], vec![[0.0; NC_MAX]; 2]))
            .collect();

        let l2 = SobolevWeights::from_wavenumbers([k, k], 0).unwrap();
        let m0 = sobolev_misfit(&rec, &zero_jets, &l2).unwrap();
        assert!(m0 > 0.0);

        // Isolate each weighted derivative term with a manual single-order
        // table and compare against the analytic expectation.
        let mut terms = Vec::new();
        for order in 1..=2u8 {
            let auto = SobolevWeights::from_wavenumbers([k, k], order).unwrap();
            for &(e, w) in auto.entries().iter().filter(|(e, _)| e.order() == order) {
                let mut entries: Vec<(MultiIndex, f64)> = MultiIndex::up_to_order(order)
                    .into_iter()
                    .map(|g| (g, 1e-300))
                    .collect();
                for entry in entries.iter_mut() {
                    if entry.0 == e {
                        entry.1 = w;
                    }
                }
                let table = SobolevWeights::manual(order, entries).unwrap();
                let term = sobolev_misfit(&rec, &zero_jets, &table).unwrap() - m0;
                terms.push((e, term));
            }
        }
        for (e, term) in terms {
            assert!(term <= 4.0 * m0, "{e}: weighted term {term} vs L² {m0}");
            if e.e2() == 0 {
                assert_relative_eq!(term, m0, max_relative = 1e-6);
            } else {
                assert!(term < 1e-9 * m0, "{e} should carry no energy");
            }
        }
    }

    #[test]
    fn gamma_zero_reduces_to_pure_misfit() {
        let (ds, _, _) = standing_ps(16, 2, 3, Complex64::new(0.9, -0.2));
        let mut config = small_config(1.0);
        config.gamma = GammaMode::Manual(0.0);
        let problem = PinnProblem::new(&ds, &config).unwrap();
        let net = init_network(&[2, 8, 4], OutputTransform::Identity, 3).unwrap();
        let holder = ParamHolder::init(&ParamMode::Scalar, 2, ds.grid.len(), 0).unwrap();
        let (loss, _, pgrads) = pinn_loss(&problem, std::slice::from_ref(&net), &holder).unwrap();
        assert_eq!(loss.residual, 0.0);
        assert_eq!(loss.total, loss.misfit);
        match pgrads {
            ParamGrads::Scalar(g) => assert!(g.iter().all(|&v| v == 0.0)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn zero_solution_with_exact_coefficients_zeroes_both_terms() {
        // The zero field is an exact (degenerate) solution; a zero surrogate
        // reproduces it exactly, so misfit and residual vanish identically.
        let (ds, mat, _) = standing_ps(16, 2, 3, Complex64::new(0.0, 0.0));
        let config = small_config(mat.rho);
        let problem = PinnProblem::new(&ds, &config).unwrap();
        let mut net = init_network(&[2, 6, 4], OutputTransform::Identity, 3).unwrap();
        net.set_params(&vec![0.0; net.param_count()]).unwrap();
        let holder = ParamHolder::Scalar {
            raw: vec![softplus_inv(mat.mu), softplus_inv(mat.lambda)],
        };
        let (loss, _, _) = pinn_loss(&problem, std::slice::from_ref(&net), &holder).unwrap();
        assert!(loss.misfit < 1e-16);
        assert!(loss.residual < 1e-16);
    }

    #[test]
    fn residual_term_matches_the_physics_module() {
        // Build a Dataset record from the surrogate's own jets and feed it
        // to the canonical nodewise residual; the loss term must agree.
        let (ds, mat, omega) = standing_ps(12, 2, 3, Complex64::new(1.0, 0.0));
        let mut config = small_config(mat.rho);
        config.gamma = GammaMode::Manual(0.37);
        let problem = PinnProblem::new(&ds, &config).unwrap();
        let net = init_network(&[2, 9, 4], OutputTransform::Identity, 11).unwrap();
        let holder = ParamHolder::Scalar {
            raw: vec![softplus_inv(0.8), softplus_inv(1.7)],
        };
        let (loss, _, _) = pinn_loss(&problem, std::slice::from_ref(&net), &holder).unwrap();

        // Reconstruct the same quantities on the physics side.
        let result = PinnResult {
            grid: ds.grid,
            regions: ds.regions.clone(),
            names: vec!["mu", "lambda"],
            surrogates: vec![net],
            holder: holder.clone(),
            theta: Vec::new(),
            theta_history: Vec::new(),
            history: Vec::new(),
            stats: Vec::new(),
            misfit: None,
            x_map: [
                ds.grid.origin()[0] + 11.0 * 0.16 / 2.0,
                11.0 * 0.16 / 2.0,
            ],
            y_map: [
                ds.grid.origin()[1] + 11.0 * 0.16 / 2.0,
                11.0 * 0.16 / 2.0,
            ],
        };
        let jets = result.surrogate_jets(0, 2).unwrap();
        let n = ds.grid.len();
        let fields: std::collections::BTreeMap<MultiIndex, FieldData> =
            [(2, 0), (0, 2), (1, 1)]
                .into_iter()
                .map(|(a, b)| {
                    let e = MultiIndex::new(a, b).unwrap();
                    let c1 = jets
                        .iter()
                        .map(|j| Complex64::new(j.get(0, e).unwrap(), j.get(1, e).unwrap()))
                        .collect();
                    let c2 = jets
                        .iter()
                        .map(|j| Complex64::new(j.get(2, e).unwrap(), j.get(3, e).unwrap()))
                        .collect();
                    (
                        e,
                        FieldData::Vector(
                            crate::grid::VectorField2::from_components(ds.grid, c1, c2).unwrap(),
                        ),
                    )
                })
                .collect();
        let u = match result.derivative_field(0, MultiIndex::new(0, 0).unwrap()).unwrap() {
            FieldData::Vector(v) => v,
            _ => unreachable!(),
        };
        let mu = vec![0.8; n];
        let la = vec![1.7; n];
        let res =
            crate::physics::navier_residual(&u, &fields, &mu, &la, mat.rho, omega).unwrap();
        let want = 0.37f64.powi(2)
            * (0..n)
                .map(|k| res.component(0)[k].norm_sqr() + res.component(1)[k].norm_sqr())
                .sum::<f64>()
            / n as f64;
        // softplus(softplus_inv(x)) reproduces x only to roundoff, hence the
        // 1e-13 budget rather than exact equality.
        assert_relative_eq!(loss.residual, want, max_relative = 1e-13);
    }

    #[test]
    fn flexural_residual_term_matches_the_physics_module() {
        let (ds, mat) = standing_flex(12, 3, 0.2);
        let mut config = PinnConfig::flexural(mat.nu, mat.h);
        config.surrogate_hidden = vec![8];
        config.misfit = MisfitNorm::L2;
        config.gamma = GammaMode::Manual(1.9);
        let problem = PinnProblem::new(&ds, &config).unwrap();
        let net = init_network(&[2, 8, 2], OutputTransform::Identity, 5).unwrap();
        let holder = ParamHolder::Scalar {
            raw: vec![softplus_inv(0.6)],
        };
        let (loss, _, _) = pinn_loss(&problem, std::slice::from_ref(&net), &holder).unwrap();

        let result = PinnResult {
            grid: ds.grid,
            regions: ds.regions.clone(),
            names: vec!["chi"],
            surrogates: vec![net],
            holder,
            theta: Vec::new(),
            theta_history: Vec::new(),
            history: Vec::new(),
            stats: Vec::new(),
            misfit: None,
            x_map: [
                ds.grid.origin()[0] + 11.0 * 0.3 / 2.0,
                11.0 * 0.3 / 2.0,
            ],
            y_map: [
                ds.grid.origin()[1] + 11.0 * 0.3 / 2.0,
                11.0 * 0.3 / 2.0,
            ],
        };
        let e = |a, b| MultiIndex::new(a, b).unwrap();
        let n = ds.grid.len();
        let chi = vec![0.6; n];
        let v = match result.derivative_field(0, e(0, 0)).unwrap() {
            FieldData::Scalar(s) => s,
            _ => unreachable!(),
        };
        let derivs: std::collections::BTreeMap<MultiIndex, FieldData> =
            [(4, 0), (0, 4), (2, 2)]
                .into_iter()
                .map(|(a, b)| (e(a, b), result.derivative_field(0, e(a, b)).unwrap()))
                .collect();
        let res =
            crate::physics::flexural_residual(&v, &derivs, &chi, mat.nu, mat.h, 0.2).unwrap();
        let want = 1.9f64.powi(2)
            * (0..n).map(|k| res.values()[k].norm_sqr()).sum::<f64>()
            / n as f64;
        assert_relative_eq!(loss.residual, want, max_relative = 1e-13);
    }

    #[test]
    fn residual_term_is_invariant_under_gamma_rebalancing() {
        // γ → 8γ with the surrogate's output scaled by 1/8 multiplies the
        // residual by exactly 1 in floating point: γ enters only through the
        // product γ·Λ and the scalings are exponent shifts.
        let (ds, mat, _) = standing_ps(12, 2, 3, Complex64::new(0.7, 0.1));
        let mut config = small_config(mat.rho);
        config.gamma = GammaMode::Manual(0.125);
        let problem = PinnProblem::new(&ds, &config).unwrap();
        let net = init_network(&[2, 7, 4], OutputTransform::Identity, 21).unwrap();
        let holder = ParamHolder::Scalar {
            raw: vec![softplus_inv(1.1), softplus_inv(0.5)],
        };
        let (loss_a, _, _) = pinn_loss(&problem, std::slice::from_ref(&net), &holder).unwrap();

        config.gamma = GammaMode::Manual(8.0 * 0.125);
        let problem = PinnProblem::new(&ds, &config).unwrap();
        // Scale the last layer (weights and biases) by 1/8: the whole jet,
        // and with it Λ(û*), scales by exactly 1/8.
        let mut params = net.params_flat();
        let shape = net.shape();
        let last = shape[shape.len() - 1] * shape[shape.len() - 2] + shape[shape.len() - 1];
        let start = params.len() - last;
        for p in &mut params[start..] {
            *p /= 8.0;
        }
        let mut scaled = net.clone();
        scaled.set_params(&params).unwrap();
        let (loss_b, _, _) = pinn_loss(&problem, std::slice::from_ref(&scaled), &holder).unwrap();
        assert_eq!(loss_a.residual.to_bits(), loss_b.residual.to_bits());
    }

    #[test]
    fn pinn_gradients_match_finite_differences() {
        let (mut ds, mat, _) = standing_ps(10, 2, 3, Complex64::new(1.0, 0.3));
        attach_spectral_derivs(&mut ds, 1);
        let mut config = small_config(mat.rho);
        config.misfit = MisfitNorm::Sobolev(
            SobolevWeights::from_wavenumbers([2.2, 1.7], 1).unwrap(),
        );
        config.gamma = GammaMode::Manual(0.21);
        let problem = PinnProblem::new(&ds, &config).unwrap();
        let net = init_network(&[2, 8, 4], OutputTransform::Identity, 13).unwrap();

        let holders = [
            ParamHolder::Scalar {
                raw: vec![softplus_inv(0.9), softplus_inv(1.4)],
            },
            ParamHolder::init(&ParamMode::Distributed, 2, ds.grid.len(), 0).unwrap(),
            ParamHolder::init(
                &ParamMode::SeparateNetwork {
                    hidden: vec![vec![5], vec![5]],
                },
                2,
                ds.grid.len(),
                17,
            )
            .unwrap(),
        ];
        for holder in holders {
            let (_, sgrads, pgrads) =
                pinn_loss(&problem, std::slice::from_ref(&net), &holder).unwrap();

            // Surrogate parameters: probe a spread of indices.
            let flat = sgrads[0].flat();
            let base = net.params_flat();
            for pi in (0..base.len()).step_by(base.len() / 17 + 1) {
                let fd = fd_check::richardson(
                    |t, _| {
                        let mut p = base.clone();
                        p[pi] += t;
                        let mut m = net.clone();
                        m.set_params(&p).unwrap();
                        pinn_loss(&problem, std::slice::from_ref(&m), &holder)
                            .unwrap()
                            .0
                            .total
                    },
                    [0.0, 0.0],
                    MultiIndex::new(1, 0).unwrap(),
                    1e-3,
                );
                // Dead-zero gradients (odd init on a symmetric grid) leave
                // only FD noise; the absolute floor covers them.
                let tol = 1e-5 * flat[pi].abs().max(fd.abs()) + 1e-9;
                assert!(
                    (flat[pi] - fd).abs() < tol,
                    "surrogate param {pi}: analytic {} vs fd {fd}",
                    flat[pi]
                );
            }

            // Holder parameters.
            let perturbed_loss = |holder2: &ParamHolder| {
                pinn_loss(&problem, std::slice::from_ref(&net), holder2)
                    .unwrap()
                    .0
                    .total
            };
            match (&holder, &pgrads) {
                (ParamHolder::Scalar { raw }, ParamGrads::Scalar(g)) => {
                    for u in 0..raw.len() {
                        let fd = fd_check::richardson(
                            |t, _| {
                                let mut h = holder.clone();
                                if let ParamHolder::Scalar { raw } = &mut h {
                                    raw[u] += t;
                                }
                                perturbed_loss(&h)
                            },
                            [0.0, 0.0],
                            MultiIndex::new(1, 0).unwrap(),
                            1e-3,
                        );
                        let tol = 1e-5 * g[u].abs().max(fd.abs()) + 1e-9;
                        assert!((g[u] - fd).abs() < tol, "scalar ϑ {u}");
                    }
                }
                (ParamHolder::Distributed { raw }, ParamGrads::Distributed(g)) => {
                    let nodes = raw[0].len();
                    for (u, k) in [(0, 0), (0, nodes / 2), (1, nodes - 1), (1, nodes / 3)] {
                        let fd = fd_check::richardson(
                            |t, _| {
                                let mut h = holder.clone();
                                if let ParamHolder::Distributed { raw } = &mut h {
                                    raw[u][k] += t;
                                }
                                perturbed_loss(&h)
                            },
                            [0.0, 0.0],
                            MultiIndex::new(1, 0).unwrap(),
                            1e-3,
                        );
                        let tol = 1e-5 * g[u][k].abs().max(fd.abs()) + 1e-9;
                        assert!(
                            (g[u][k] - fd).abs() < tol,
                            "distributed ϑ ({u}, {k}): analytic {} vs fd {fd}",
                            g[u][k]
                        );
                    }
                }
                (ParamHolder::Network { nets }, ParamGrads::Network(g)) => {
                    for u in 0..nets.len() {
                        let flat = g[u].flat();
                        let base = nets[u].params_flat();
                        for pi in (0..base.len()).step_by(base.len() / 7 + 1) {
                            let fd = fd_check::richardson(
                                |t, _| {
                                    let mut h = holder.clone();
                                    if let ParamHolder::Network { nets } = &mut h {
                                        let mut p = base.clone();
                                        p[pi] += t;
                                        nets[u].set_params(&p).unwrap();
                                    }
                                    perturbed_loss(&h)
                                },
                                [0.0, 0.0],
                                MultiIndex::new(1, 0).unwrap(),
                                1e-3,
                            );
                            let tol = 1e-5 * flat[pi].abs().max(fd.abs()) + 1e-9;
                            assert!(
                                (flat[pi] - fd).abs() < tol,
                                "ϑ network {u} param {pi}"
                            );
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn joint_training_identifies_scalar_coefficients() {
        // Warm-start the surrogate on the data alone (γ = 0 is a pure fit),
        // then train surrogate and ϑ jointly under the inertia-rule γ. The
        // joint phase is what pins the coefficients: the residual term
        // regularizes the surrogate's derivatives, which in turn debias ϑ.
        let (ds, mat, _) = standing_ps(14, 2, 3, Complex64::new(1.0, 0.0));
        let mut config = small_config(mat.rho);
        config.surrogate_hidden = vec![24, 24];
        config.gamma = GammaMode::Manual(0.0);
        let warmup = PinnProblem::new(&ds, &config).unwrap();
        config.gamma = GammaMode::InertiaRule;
        let joint = PinnProblem::new(&ds, &config).unwrap();

        let mut net = init_network(&[2, 24, 24, 4], OutputTransform::Identity, 1).unwrap();
        let mut holder = ParamHolder::Scalar {
            raw: vec![softplus_inv(1.0), softplus_inv(1.0)],
        };
        let mut net_adam = AdamState::for_network(&net);
        for (epochs, lr) in [(6_000, 5e-3), (3_000, 1e-3), (2_000, 2e-4)] {
            for _ in 0..epochs {
                let (_, sgrads, _) =
                    pinn_loss(&warmup, std::slice::from_ref(&net), &holder).unwrap();
                net_adam.step(&mut net, &sgrads[0], lr);
            }
        }
        let (fit, _, _) = pinn_loss(&warmup, std::slice::from_ref(&net), &holder).unwrap();
        assert!(fit.misfit < 1e-4, "surrogate fit stalled at {}", fit.misfit);

        let (first, _, _) = pinn_loss(&joint, std::slice::from_ref(&net), &holder).unwrap();
        let mut theta_adam = AdamState::new(2);
        let mut residuals = Vec::new();
        for (epochs, lr) in [(3_000, 5e-4), (2_000, 2e-4)] {
            for _ in 0..epochs {
                let (loss, sgrads, pgrads) =
                    pinn_loss(&joint, std::slice::from_ref(&net), &holder).unwrap();
                residuals.push(loss.residual);
                net_adam.step(&mut net, &sgrads[0], lr);
                match (&mut holder, &pgrads) {
                    (ParamHolder::Scalar { raw }, ParamGrads::Scalar(g)) => {
                        theta_adam.step_slice(raw, g, 1e-2)
                    }
                    _ => unreachable!(),
                }
            }
        }
        eprintln!(
            "theta: {:?} residual {:?} (from {})",
            holder.scalar_values(),
            residuals.last(),
            first.residual
        );
        let (last, _, _) = pinn_loss(&joint, std::slice::from_ref(&net), &holder).unwrap();
        assert!(
            last.residual < 0.1 * first.residual,
            "residual {} → {}",
            first.residual,
            last.residual
        );
        // The trend is monotone at the scale of optimizer chatter: windowed
        // means must decrease.
        let window = residuals.len() / 8;
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let early = mean(&residuals[..window]);
        let late = mean(&residuals[residuals.len() - window..]);
        assert!(late < early);
        let vals = holder.scalar_values().unwrap();
        assert!(
            (vals[0] - mat.mu).abs() / mat.mu < 0.03,
            "μ* = {} vs {}",
            vals[0],
            mat.mu
        );
        assert!(
            (vals[1] - mat.lambda).abs() / mat.lambda < 0.10,
            "λ* = {} vs {}",
            vals[1],
            mat.lambda
        );
    }

    #[test]
    fn training_runs_deterministically_and_reports_trajectories() {
        let (ds, mat, _) = standing_ps(12, 1, 2, Complex64::new(1.0, 0.2));
        let mut config = small_config(mat.rho);
        config.epochs = 60;
        let run = || train_pinn(&ds, &config, ds.materials.as_ref()).unwrap();
        let a = run();
        let b = run();
        assert_eq!(a.history.len(), 60);
        assert_eq!(a.theta_history.len(), 60);
        assert_eq!(a.theta.len(), 2);
        assert_eq!(a.theta[0].len(), ds.grid.len());
        assert_eq!(a.stats.len(), 2);
        assert_eq!(a.stats[0].len(), 1);
        assert!(a.misfit.is_some());
        assert!(a.history[59].total < a.history[0].total);
        for (x, y) in a.history.iter().zip(&b.history) {
            assert_eq!(x.total.to_bits(), y.total.to_bits());
        }

        // The surrogate stays queryable anywhere, and its jets export as
        // fields.
        let mid = a.evaluate(0, [0.9, 0.7]).unwrap();
        assert_eq!(mid.len(), 2);
        let d = a
            .derivative_field(0, MultiIndex::new(1, 0).unwrap())
            .unwrap();
        assert_eq!(d.component_count(), 2);
        assert_eq!(d.component(0).len(), ds.grid.len());
    }

    #[test]
    fn config_and_problem_validation() {
        let (ds, _, _) = standing_ps(12, 2, 3, Complex64::new(1.0, 0.0));

        let mut config = small_config(1.0);
        config.surrogate_hidden = vec![];
        assert!(config.validate().is_err());

        let mut config = small_config(1.0);
        config.misfit = MisfitNorm::SobolevAuto { order: 3 }; // PDE order is 2
        assert!(config.validate().is_err());

        let mut config = small_config(1.0);
        config.gamma = GammaMode::Manual(-0.1);
        assert!(config.validate().is_err());

        let mut config = small_config(1.0);
        config.param_mode = ParamMode::SeparateNetwork {
            hidden: vec![vec![8]],
        };
        assert!(config.validate().is_err());

        let mut config = small_config(1.0);
        config.learning_rate = 0.0;
        assert!(config.validate().is_err());

        // Margin that eats a whole region.
        let mut config = small_config(1.0);
        config.seam_margin = 6;
        assert!(PinnProblem::new(&ds, &config).is_err());

        // Wrong operator for the data.
        let config = PinnConfig::flexural(0.33, 0.15);
        assert!(PinnProblem::new(&ds, &config).is_err());

        // Holder shape mismatches surface in the loss.
        let config = small_config(1.0);
        let problem = PinnProblem::new(&ds, &config).unwrap();
        let net = init_network(&[2, 6, 4], OutputTransform::Identity, 2).unwrap();
        let bad = ParamHolder::Scalar {
            raw: vec![softplus_inv(1.0)],
        };
        assert!(pinn_loss(&problem, std::slice::from_ref(&net), &bad).is_err());
        let bad_net = init_network(&[2, 6, 2], OutputTransform::Identity, 2).unwrap();
        let holder = ParamHolder::init(&ParamMode::Scalar, 2, ds.grid.len(), 0).unwrap();
        assert!(pinn_loss(&problem, std::slice::from_ref(&bad_net), &holder).is_err());
    }
}
