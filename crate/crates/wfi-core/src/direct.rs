//! Elastography-style direct inversion.
//!
//! The measured wavefields are differentiated spectrally (per region), the
//! unknown coefficient fields are represented by positive MLP networks, and
//! everything is trained at once on the Tikhonov-regularized residual loss
//!
//! ```text
//! L_ε(ϑ*, α*) = ‖Λ(û; ϑ*)‖² + ‖α* ⊙ ϑ*‖²
//! ```
//!
//! where the norms are discrete L² means over the collocation nodes (and over
//! source records for the residual term), and the regularization weight α* is
//! itself a trained positive network — no a-priori estimate is required.
//!
//! Because the residual is *linear* in the coefficient fields at fixed data,
//! the loss gradient with respect to each network output is available in
//! closed form; backpropagation through the networks then uses the ordinary
//! parameter-gradient pass. No field derivatives of the networks are needed,
//! which is what makes this route cheap compared to the PINN one.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Dataset, FieldData, Grid2D, RegionMap, RegionRect};
use crate::mlp::{init_network, AdamState, GradientSet, MlpNetwork, OutputTransform};
use crate::physics::{
    flexural_residual_at, navier_residual_at, Materials, PdeKind, PlateMaterial,
};
use crate::signal::{spectral_derivative, spectral_lowpass};

/// Which operator is inverted, together with its known constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetPde {
    /// Plane-strain Navier operator; ρ is assumed known, μ and λ are sought.
    PlaneStrain { rho: f64 },
    /// Kirchhoff plate operator; ν and h are known, χ = E/ρ is sought.
    Flexural { nu: f64, h: f64 },
}

impl TargetPde {
    pub fn kind(&self) -> PdeKind {
        match self {
            TargetPde::PlaneStrain { .. } => PdeKind::PlaneStrain,
            TargetPde::Flexural { .. } => PdeKind::Flexural,
        }
    }

    /// Names of the unknown coefficient fields, in network order.
    pub fn unknown_names(&self) -> &'static [&'static str] {
        match self {
            TargetPde::PlaneStrain { .. } => &["mu", "lambda"],
            TargetPde::Flexural { .. } => &["chi"],
        }
    }

    /// The inertia coefficient of the operator at the given excitation:
    /// ρω² for plane strain (frequency = ω), h(2πf)² for plates.
    pub fn inertia(&self, frequency: f64) -> f64 {
        match self {
            TargetPde::PlaneStrain { rho } => rho * frequency * frequency,
            TargetPde::Flexural { h, .. } => {
                let w = 2.0 * std::f64::consts::PI * frequency;
                h * w * w
            }
        }
    }

    /// Admissibility of the known constants.
    pub fn validate(&self) -> Result<()> {
        match *self {
            TargetPde::PlaneStrain { rho } => {
                if !(rho > 0.0 && rho.is_finite()) {
                    return Err(Error::arg(format!("density {rho} must be positive")));
                }
            }
            TargetPde::Flexural { nu, h } => {
                // Delegates the admissibility checks for (ν, h).
                PlateMaterial::new(1.0, nu, h)?;
            }
        }
        Ok(())
    }
}

/// Run parameters of a direct inversion. Derivatives are always taken
/// spectrally from the record fields (after the optional low-pass); any
/// derivative fields already attached to the records are ignored.
#[derive(Debug, Clone)]
pub struct DirectInversionConfig {
    pub target: TargetPde,
    /// Hidden-layer widths of each coefficient network, one entry per
    /// unknown; input is always (x̂, ŷ, f̂) and output a single channel.
    pub theta_hidden: Vec<Vec<usize>>,
    /// Hidden-layer widths of the regularization network α*.
    pub alpha_hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Nodes dropped on every side of every region before collocation; keeps
    /// the training set away from the support of one-sided derivatives.
    pub margin: usize,
    /// Optional isotropic wavenumber cutoff applied per region before
    /// differentiation (the denoising step for contaminated data).
    pub lowpass_cutoff: Option<f64>,
    /// Seed for the network initializations.
    pub seed: u64,
}

impl DirectInversionConfig {
    pub fn plane_strain(rho: f64) -> Self {
        DirectInversionConfig {
            target: TargetPde::PlaneStrain { rho },
            theta_hidden: vec![vec![64], vec![64]],
            alpha_hidden: vec![64],
            learning_rate: 5e-3,
            epochs: 20_000,
            margin: 5,
            lowpass_cutoff: None,
            seed: 0,
        }
    }

    pub fn flexural(nu: f64, h: f64) -> Self {
        DirectInversionConfig {
            target: TargetPde::Flexural { nu, h },
            theta_hidden: vec![vec![64]],
            alpha_hidden: vec![64],
            learning_rate: 5e-3,
            epochs: 20_000,
            margin: 5,
            lowpass_cutoff: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.target.validate()?;
        let unknowns = self.target.unknown_names().len();
        if self.theta_hidden.len() != unknowns {
            return Err(Error::arg(format!(
                "{} coefficient networks configured, target has {unknowns} unknowns",
                self.theta_hidden.len()
            )));
        }
        for widths in self.theta_hidden.iter().chain(std::iter::once(&self.alpha_hidden)) {
            if widths.is_empty() || widths.iter().any(|&w| w == 0) {
                return Err(Error::arg("hidden layer widths must be positive"));
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
        if let Some(c) = self.lowpass_cutoff {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::arg(format!("low-pass cutoff {c} must be positive")));
            }
        }
        Ok(())
    }
}

/// Loss value split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub residual: f64,
    pub penalty: f64,
}

/// One record reduced to the linear form `r = Σ_u ϑ_u·∂r/∂ϑ_u + base` at the
/// collocation nodes (the data derivatives are folded into the factors).
struct PreparedRecord {
    /// `dtheta[u][c][k]`: ∂(residual component c)/∂ϑ_u at collocation node k.
    dtheta: Vec<Vec<Vec<Complex64>>>,
    /// `base[c][k]`: residual component c with all unknowns set to zero.
    base: Vec<Vec<Complex64>>,
}

/// Records sharing one frequency, hence one network-input matrix.
struct FrequencyGroup {
    frequency: f64,
    /// Collocation inputs (x̂, ŷ, f̂), one row per node.
    inputs: Array2<f64>,
    records: Vec<PreparedRecord>,
}

/// A dataset made ready for [`elastography_loss`]: spectral derivatives
/// taken, collocation nodes selected, network inputs normalized.
pub struct DirectProblem {
    target: TargetPde,
    groups: Vec<FrequencyGroup>,
    record_count: usize,
    /// Flat parent-grid indices of the collocation nodes (region interiors).
    colloc: Vec<usize>,
    /// Concentric reconstruction grid (parent minus the margin).
    sub: Grid2D,
    /// Dataset regions restricted to the reconstruction grid.
    sub_regions: RegionMap,
    /// Per-region collocation cores in reconstruction-grid coordinates;
    /// statistics are taken here, clear of the inter-region seams.
    core_rects: Vec<RegionRect>,
    /// Input normalization: x̂ = (x - cx) / sx and likewise for y.
    x_map: [f64; 2],
    y_map: [f64; 2],
}

impl DirectProblem {
    pub fn new(dataset: &Dataset, config: &DirectInversionConfig) -> Result<Self> {
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
        let regions = &dataset.regions;
        let m = config.margin;

        // Collocation nodes: every region shrunk by the margin on all sides.
        let mut core_rects_parent = Vec::with_capacity(regions.region_count());
        for (r, rect) in regions.rects().iter().enumerate() {
            if rect.ni <= 2 * m || rect.nj <= 2 * m {
                return Err(Error::dim(format!(
                    "margin {m} leaves region {r} ({}×{} nodes) empty",
                    rect.ni, rect.nj
                )));
            }
            core_rects_parent.push(RegionRect {
                i0: rect.i0 + m,
                j0: rect.j0 + m,
                ni: rect.ni - 2 * m,
                nj: rect.nj - 2 * m,
            });
        }
        let mut colloc = Vec::new();
        for rect in &core_rects_parent {
            for j in rect.j0..rect.j0 + rect.nj {
                for i in rect.i0..rect.i0 + rect.ni {
                    colloc.push(grid.idx(i, j));
                }
            }
        }

        let (sub, _) = grid.interior_subgrid(m)?;
        let sub_regions = regions.restrict(sub, m)?;
        let core_rects = core_rects_parent
            .iter()
            .map(|r| RegionRect {
                i0: r.i0 - m,
                j0: r.j0 - m,
                ni: r.ni,
                nj: r.nj,
            })
            .collect();

        // Map the domain onto [−1, 1]² and frequencies onto multiples of the
        // first record's; keeps the first layer of every network in the
        // responsive range of tanh regardless of the physical units.
        let half = |n: usize, d: f64| ((n - 1) as f64) * d / 2.0;
        let x_map = [grid.origin()[0] + half(grid.nx(), grid.dx()), half(grid.nx(), grid.dx())];
        let y_map = [grid.origin()[1] + half(grid.ny(), grid.dy()), half(grid.ny(), grid.dy())];
        let f_ref = dataset.records[0].frequency;

        let expected_components = match dataset.pde {
            PdeKind::PlaneStrain => 2,
            PdeKind::Flexural => 1,
        };
        let mut groups: Vec<FrequencyGroup> = Vec::new();
        for (n, rec) in dataset.records.iter().enumerate() {
            if rec.field.component_count() != expected_components {
                return Err(Error::dim(format!(
                    "record {n} has {} components, {:?} data needs {expected_components}",
                    rec.field.component_count(),
                    dataset.pde
                )));
            }
            let field = match config.lowpass_cutoff {
                Some(cut) => spectral_lowpass(&rec.field, regions, cut)?,
                None => rec.field.clone(),
            };
            let mut derivs = Vec::new();
            for e in dataset.pde.required_derivatives() {
                derivs.push(spectral_derivative(&field, regions, e)?);
            }
            let prepared = prepare_record(&config.target, rec.frequency, &field, &derivs, &colloc);

            match groups.iter_mut().find(|g| g.frequency == rec.frequency) {
                Some(g) => g.records.push(prepared),
                None => {
                    let mut inputs = Array2::zeros((colloc.len(), 3));
                    for (row, &k) in colloc.iter().enumerate() {
                        let (i, j) = grid.ij(k);
                        inputs[[row, 0]] = (grid.x(i) - x_map[0]) / x_map[1];
                        inputs[[row, 1]] = (grid.y(j) - y_map[0]) / y_map[1];
                        inputs[[row, 2]] = rec.frequency / f_ref;
                    }
                    groups.push(FrequencyGroup {
                        frequency: rec.frequency,
                        inputs,
                        records: vec![prepared],
                    });
                }
            }
        }

        Ok(DirectProblem {
            target: config.target,
            groups,
            record_count: dataset.records.len(),
            colloc,
            sub,
            sub_regions,
            core_rects,
            x_map,
            y_map,
        })
    }

    pub fn collocation_count(&self) -> usize {
        self.colloc.len()
    }

    /// Network inputs for every node of the reconstruction grid, at the
    /// reference frequency.
    fn reconstruction_inputs(&self) -> Array2<f64> {
        let mut inputs = Array2::zeros((self.sub.len(), 3));
        for row in 0..self.sub.len() {
            let (i, j) = self.sub.ij(row);
            inputs[[row, 0]] = (self.sub.x(i) - self.x_map[0]) / self.x_map[1];
            inputs[[row, 1]] = (self.sub.y(j) - self.y_map[0]) / self.y_map[1];
            inputs[[row, 2]] = 1.0;
        }
        inputs
    }
}

/// Folds one record's data derivatives into the residual's linear form.
/// The canonical residual evaluators are probed with unit/zero coefficients
/// so this stays in lockstep with the operators in [`crate::physics`].
fn prepare_record(
    target: &TargetPde,
    frequency: f64,
    field: &FieldData,
    derivs: &[FieldData],
    colloc: &[usize],
) -> PreparedRecord {
    let inertia = target.inertia(frequency);
    let zero = Complex64::new(0.0, 0.0);
    match target {
        TargetPde::PlaneStrain { .. } => {
            let at = |f: &FieldData, c: usize, k: usize| f.component(c)[k];
            let mut dtheta = vec![vec![vec![zero; colloc.len()]; 2]; 2];
            let mut base = vec![vec![zero; colloc.len()]; 2];
            for (row, &k) in colloc.iter().enumerate() {
                let u = [at(field, 0, k), at(field, 1, k)];
                let d20 = [at(&derivs[0], 0, k), at(&derivs[0], 1, k)];
                let d02 = [at(&derivs[1], 0, k), at(&derivs[1], 1, k)];
                let d11 = [at(&derivs[2], 0, k), at(&derivs[2], 1, k)];
                let dmu = navier_residual_at([zero; 2], d20, d02, d11, 1.0, 0.0, 0.0);
                let dla = navier_residual_at([zero; 2], d20, d02, d11, 0.0, 1.0, 0.0);
                let b = navier_residual_at(u, [zero; 2], [zero; 2], [zero; 2], 0.0, 0.0, inertia);
                for c in 0..2 {
                    dtheta[0][c][row] = dmu[c];
                    dtheta[1][c][row] = dla[c];
                    base[c][row] = b[c];
                }
            }
            PreparedRecord { dtheta, base }
        }
        TargetPde::Flexural { nu, h } => {
            let bending = PlateMaterial::new(1.0, *nu, *h)
                .expect("validated by the config")
                .bending_factor();
            let vals = |f: &FieldData, k: usize| f.component(0)[k];
            let mut dtheta = vec![vec![vec![zero; colloc.len()]; 1]; 1];
            let mut base = vec![vec![zero; colloc.len()]; 1];
            for (row, &k) in colloc.iter().enumerate() {
                let d40 = vals(&derivs[0], k);
                let d04 = vals(&derivs[1], k);
                let d22 = vals(&derivs[2], k);
                dtheta[0][0][row] = flexural_residual_at(zero, d40, d04, d22, 1.0, bending, 0.0);
                base[0][row] = flexural_residual_at(vals(field, k), zero, zero, zero, 0.0, bending, inertia);
            }
            PreparedRecord { dtheta, base }
        }
    }
}

/// The Tikhonov-regularized residual loss and its parameter gradients.
///
/// `theta` holds one single-output network per unknown (μ*, λ* or χ*),
/// `alpha` the regularization network; all take the 3 inputs (x̂, ŷ, f̂).
/// Returned gradients are ordered like `theta`, with α*'s gradient last.
pub fn elastography_loss(
    problem: &DirectProblem,
    theta: &[MlpNetwork],
    alpha: &MlpNetwork,
) -> Result<(LossBreakdown, Vec<GradientSet>)> {
    let unknowns = problem.target.unknown_names().len();
    if theta.len() != unknowns {
        return Err(Error::arg(format!(
            "{} coefficient networks supplied, target has {unknowns} unknowns",
            theta.len()
        )));
    }
    for net in theta.iter().chain(std::iter::once(alpha)) {
        if net.input_dim() != 3 || net.output_dim() != 1 {
            return Err(Error::dim(format!(
                "networks must map 3 inputs to 1 output, got {} → {}",
                net.input_dim(),
                net.output_dim()
            )));
        }
    }

    let n = problem.colloc.len();
    let residual_norm = (problem.record_count * n) as f64;
    let penalty_norm = (problem.groups.len() * n) as f64;

    let mut residual_sum = 0.0;
    let mut penalty_sum = 0.0;
    let mut grads: Vec<GradientSet> = theta
        .iter()
        .map(GradientSet::zeros_like)
        .chain(std::iter::once(GradientSet::zeros_like(alpha)))
        .collect();

    for group in &problem.groups {
        let theta_vals: Vec<Array2<f64>> = theta
            .iter()
            .map(|net| net.forward_batch(group.inputs.view()))
            .collect::<Result<_>>()?;
        let alpha_vals = alpha.forward_batch(group.inputs.view())?;

        let mut upstream_theta = vec![Array2::<f64>::zeros((n, 1)); unknowns];
        let mut upstream_alpha = Array2::<f64>::zeros((n, 1));

        for rec in &group.records {
            let components = rec.base.len();
            for k in 0..n {
                for c in 0..components {
                    let mut r = rec.base[c][k];
                    for u in 0..unknowns {
                        r += theta_vals[u][[k, 0]] * rec.dtheta[u][c][k];
                    }
                    residual_sum += r.norm_sqr();
                    for u in 0..unknowns {
                        upstream_theta[u][[k, 0]] +=
                            2.0 / residual_norm * (r.conj() * rec.dtheta[u][c][k]).re;
                    }
                }
            }
        }

        for k in 0..n {
            let a = alpha_vals[[k, 0]];
            for u in 0..unknowns {
                let t = theta_vals[u][[k, 0]];
                penalty_sum += (a * t) * (a * t);
                upstream_theta[u][[k, 0]] += 2.0 / penalty_norm * a * a * t;
                upstream_alpha[[k, 0]] += 2.0 / penalty_norm * t * t * a;
            }
        }

        for u in 0..unknowns {
            grads[u].add(&theta[u].backprop_params(group.inputs.view(), upstream_theta[u].view())?);
        }
        grads[unknowns].add(&alpha.backprop_params(group.inputs.view(), upstream_alpha.view())?);
    }

    let residual = residual_sum / residual_norm;
    let penalty = penalty_sum / penalty_norm;
    Ok((
        LossBreakdown {
            total: residual + penalty,
            residual,
            penalty,
        },
        grads,
    ))
}

/// Output of [`train_direct`]. All fields live on the reconstruction grid
/// (the dataset grid minus the collocation margin); the per-region statistics
/// are taken over each region's collocation core so that the seams between
/// regions — where the networks interpolate between materials — do not
/// contaminate them.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub grid: Grid2D,
    pub regions: RegionMap,
    /// Unknown names, in the order of `theta` ("mu", "lambda" or "chi").
    pub names: Vec<&'static str>,
    /// Recovered coefficient fields, node-major on `grid`; strictly positive.
    pub theta: Vec<Vec<f64>>,
    /// Recovered regularization field α*.
    pub alpha: Vec<f64>,
    /// Loss after every epoch.
    pub history: Vec<LossBreakdown>,
    /// Per unknown, per region: (mean, population standard deviation).
    pub stats: Vec<Vec<(f64, f64)>>,
    /// When ground truth was supplied: per unknown, the normal misfit Ξ and
    /// the pointwise error field |q*−q|/‖q‖_∞ on `grid`.
    pub misfit: Option<Vec<(f64, Vec<f64>)>>,
}

/// Runs the full-batch ADAM training loop of the direct inversion.
///
/// `truth`, when given, must carry one material per dataset region; it is
/// expanded to nodewise fields for the normal-misfit report.
pub fn train_direct(
    dataset: &Dataset,
    config: &DirectInversionConfig,
    truth: Option<&Materials>,
) -> Result<ReconstructionResult> {
    let problem = DirectProblem::new(dataset, config)?;
    let unknowns = config.target.unknown_names().len();

    let mut theta = Vec::with_capacity(unknowns);
    for (u, hidden) in config.theta_hidden.iter().enumerate() {
        let mut shape = vec![3];
        shape.extend_from_slice(hidden);
        shape.push(1);
        theta.push(init_network(
            &shape,
            OutputTransform::Softplus,
            config.seed.wrapping_add(u as u64),
        )?);
    }
    let mut alpha_shape = vec![3];
    alpha_shape.extend_from_slice(&config.alpha_hidden);
    alpha_shape.push(1);
    let mut alpha = init_network(
        &alpha_shape,
        OutputTransform::Softplus,
        config.seed.wrapping_add(0x5EED_A1FA),
    )?;

    let mut adams: Vec<AdamState> = theta
        .iter()
        .map(AdamState::for_network)
        .chain(std::iter::once(AdamState::for_network(&alpha)))
        .collect();

    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, grads) = elastography_loss(&problem, &theta, &alpha)?;
        if !loss.total.is_finite() {
            return Err(Error::Numerical {
                epoch,
                detail: format!("loss became {}", loss.total),
            });
        }
        for (u, net) in theta.iter_mut().enumerate() {
            adams[u].step(net, &grads[u], config.learning_rate);
        }
        adams[unknowns].step(&mut alpha, &grads[unknowns], config.learning_rate);
        history.push(loss);
    }

    let inputs = problem.reconstruction_inputs();
    let mut fields = Vec::with_capacity(unknowns);
    for net in &theta {
        let out = net.forward_batch(inputs.view())?;
        fields.push(out.column(0).to_vec());
    }
    let alpha_field = alpha.forward_batch(inputs.view())?.column(0).to_vec();

    let stats = fields
        .iter()
        .map(|vals| {
            problem
                .core_rects
                .iter()
                .map(|rect| rect_statistics(vals, problem.sub, rect))
                .collect()
        })
        .collect();

    let misfit = match truth {
        Some(mats) => {
            let truth_fields = truth_to_fields(mats, &config.target, &problem.sub_regions)?;
            let mut out = Vec::with_capacity(unknowns);
            for (rec, exact) in fields.iter().zip(&truth_fields) {
                out.push(normal_misfit(rec, exact, problem.sub)?);
            }
            Some(out)
        }
        None => None,
    };

    Ok(ReconstructionResult {
        grid: problem.sub,
        regions: problem.sub_regions.clone(),
        names: config.target.unknown_names().to_vec(),
        theta: fields,
        alpha: alpha_field,
        history,
        stats,
        misfit,
    })
}

/// Expands per-region ground-truth materials into nodewise fields on the
/// reconstruction grid, ordered like the target's unknowns.
pub(crate) fn truth_to_fields(
    mats: &Materials,
    target: &TargetPde,
    regions: &RegionMap,
) -> Result<Vec<Vec<f64>>> {
    if mats.len() != regions.region_count() {
        return Err(Error::arg(format!(
            "{} ground-truth materials for {} regions",
            mats.len(),
            regions.region_count()
        )));
    }
    if mats.pde() != target.kind() {
        return Err(Error::arg("ground-truth materials are for the other operator"));
    }
    let n = regions.grid().len();
    match mats {
        Materials::PlaneStrain(list) => {
            let mut mu = vec![0.0; n];
            let mut lambda = vec![0.0; n];
            for k in 0..n {
                let m = &list[regions.label(k)];
                mu[k] = m.mu;
                lambda[k] = m.lambda;
            }
            Ok(vec![mu, lambda])
        }
        Materials::Plate(list) => {
            let mut chi = vec![0.0; n];
            for k in 0..n {
                chi[k] = list[regions.label(k)].chi;
            }
            Ok(vec![chi])
        }
    }
}

/// Normal misfit `Ξ = ‖q*−q‖_L²/‖q‖_L∞` of a recovered field against ground
/// truth on the same grid, together with the pointwise error `|q*−q|/‖q‖_L∞`.
/// The discrete L² norm is the nodewise RMS scaled by √(grid area).
pub fn normal_misfit(recovered: &[f64], truth: &[f64], grid: Grid2D) -> Result<(f64, Vec<f64>)> {
    if recovered.len() != grid.len() || truth.len() != grid.len() {
        return Err(Error::dim(format!(
            "field lengths {}/{} ≠ node count {}",
            recovered.len(),
            truth.len(),
            grid.len()
        )));
    }
    let linf = truth.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if linf == 0.0 {
        return Err(Error::arg("ground truth is identically zero"));
    }
    let pointwise: Vec<f64> = recovered
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).abs() / linf)
        .collect();
    let rms = (pointwise.iter().map(|e| e * e).sum::<f64>() / grid.len() as f64).sqrt();
    Ok((rms * grid.area().sqrt(), pointwise))
}

/// Arithmetic mean and population standard deviation of a real field over
/// every region.
pub fn region_statistics(values: &[f64], regions: &RegionMap) -> Result<Vec<(f64, f64)>> {
    let grid = regions.grid();
    if values.len() != grid.len() {
        return Err(Error::dim(format!(
            "field length {} ≠ node count {}",
            values.len(),
            grid.len()
        )));
    }
    Ok(regions
        .rects()
        .iter()
        .map(|rect| rect_statistics(values, grid, rect))
        .collect())
}

pub(crate) fn rect_statistics(values: &[f64], grid: Grid2D, rect: &RegionRect) -> (f64, f64) {
    let count = rect.len() as f64;
    let mut sum = 0.0;
    for j in rect.j0..rect.j0 + rect.nj {
        for i in rect.i0..rect.i0 + rect.ni {
            sum += values[grid.idx(i, j)];
        }
    }
    let mean = sum / count;
    let mut var = 0.0;
    for j in rect.j0..rect.j0 + rect.nj {
        for i in rect.i0..rect.i0 + rect.ni {
            let d = values[grid.idx(i, j)] - mean;
            var += d * d;
        }
    }
    (mean, (var / count).sqrt())
}
