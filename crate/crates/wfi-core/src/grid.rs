//! Uniform 2D sampling grids, complex-valued fields, region labeling and
//! dataset containers.
//!
//! The observation surface is sampled on a uniform rectangular grid; node
//! `(i, j)` sits at `origin + (i·dx, j·dy)`. Everything downstream (file
//! I/O, FFT layout, region restriction) assumes **row-major storage, `j`
//! outer / `i` inner**: the flat index of `(i, j)` is `j·nx + i`.
//!
//! Piecewise materials are described by a [`RegionMap`]: a partition of the
//! grid into axis-aligned rectangles, one label per node. Regions never
//! overlap and cover the grid exactly; spectral differentiation and the
//! inversion losses treat them independently.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::physics::PdeKind;
use crate::signal::MultiIndex;

/// Uniform rectangular sampling grid (node-registered).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    origin: [f64; 2],
}

impl Grid2D {
    /// At least 4 nodes per axis and strictly positive spacings.
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, origin: [f64; 2]) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::dim(format!(
                "grid needs ≥ 4 nodes per axis, got {nx}×{ny}"
            )));
        }
        if !(dx > 0.0) || !(dy > 0.0) {
            return Err(Error::arg(format!(
                "grid spacings must be positive, got dx={dx}, dy={dy}"
            )));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::arg("grid origin must be finite".to_string()));
        }
        Ok(Grid2D {
            nx,
            ny,
            dx,
            dy,
            origin,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Total node count `nx·ny`.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false // nx, ny ≥ 4 by construction
    }

    /// Flat row-major index of node `(i, j)`.
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    /// Inverse of [`idx`](Self::idx).
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.origin[0] + i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.origin[1] + j as f64 * self.dy
    }

    /// Position of node `(i, j)`.
    pub fn pos(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x(i), self.y(j)]
    }

    /// Covered area `(nx·dx)·(ny·dy)` (one spacing per node, so that a
    /// discrete L² norm `RMS·√area` is resolution-independent).
    pub fn area(&self) -> f64 {
        (self.nx as f64 * self.dx) * (self.ny as f64 * self.dy)
    }

    /// Concentric subgrid obtained by dropping `margin` nodes on every side,
    /// together with the row-major mapping from subgrid node index to parent
    /// node index. Subgrid node positions coincide with parent positions.
    pub fn interior_subgrid(&self, margin: usize) -> Result<(Grid2D, Vec<usize>)> {
        if 2 * margin >= self.nx {
            return Err(Error::dim(format!(
                "margin {margin} too large for x axis ({} nodes)",
                self.nx
            )));
        }
        if 2 * margin >= self.ny {
            return Err(Error::dim(format!(
                "margin {margin} too large for y axis ({} nodes)",
                self.ny
            )));
        }
        let sub = Grid2D::new(
            self.nx - 2 * margin,
            self.ny - 2 * margin,
            self.dx,
            self.dy,
            [self.x(margin), self.y(margin)],
        )?;
        let mut map = Vec::with_capacity(sub.len());
        for j in 0..sub.ny {
            for i in 0..sub.nx {
                map.push(self.idx(i + margin, j + margin));
            }
        }
        Ok((sub, map))
    }
}

fn check_finite(values: &[Complex64]) -> Result<()> {
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::arg("field contains non-finite entries"));
    }
    Ok(())
}

/// One complex sample per node, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        ScalarField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::dim(format!(
                "scalar field length {} ≠ node count {}",
                values.len(),
                grid.len()
            )));
        }
        check_finite(&values)?;
        Ok(ScalarField { grid, values })
    }

    /// Evaluate `f` at every node position, row-major.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.grid.idx(i, j)]
    }

    /// Root-mean-square magnitude over all nodes.
    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// Restrict to a subgrid given the node mapping from
    /// [`Grid2D::interior_subgrid`].
    pub fn gather(&self, sub: Grid2D, map: &[usize]) -> Result<ScalarField> {
        if map.len() != sub.len() {
            return Err(Error::dim("subgrid mapping length mismatch"));
        }
        let values = map.iter().map(|&k| self.values[k]).collect();
        ScalarField::from_values(sub, values)
    }
}

/// Two complex components per node (in-plane displacement), stored as
/// parallel per-component arrays, each row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    grid: Grid2D,
    components: [Vec<Complex64>; 2],
}

impl VectorField2 {
    pub fn zeros(grid: Grid2D) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); grid.len()];
        VectorField2 {
            grid,
            components: [z.clone(), z],
        }
    }

    pub fn from_components(grid: Grid2D, c1: Vec<Complex64>, c2: Vec<Complex64>) -> Result<Self> {
        if c1.len() != grid.len() || c2.len() != grid.len() {
            return Err(Error::dim(format!(
                "vector field component lengths {}/{} ≠ node count {}",
                c1.len(),
                c2.len(),
                grid.len()
            )));
        }
        check_finite(&c1)?;
        check_finite(&c2)?;
        Ok(VectorField2 {
            grid,
            components: [c1, c2],
        })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> [Complex64; 2]) -> Result<Self> {
        let mut c1 = Vec::with_capacity(grid.len());
        let mut c2 = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let [a, b] = f(grid.x(i), grid.y(j));
                c1.push(a);
                c2.push(b);
            }
        }
        Self::from_components(grid, c1, c2)
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.components[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.components[c]
    }

    pub fn get(&self, i: usize, j: usize) -> [Complex64; 2] {
        let k = self.grid.idx(i, j);
        [self.components[0][k], self.components[1][k]]
    }

    /// RMS of the per-node vector magnitude.
    pub fn rms(&self) -> f64 {
        let n = self.grid.len() as f64;
        let s: f64 = self.components[0]
            .iter()
            .zip(&self.components[1])
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .sum();
        (s / n).sqrt()
    }

    /// Largest per-node vector magnitude `√(|u₁|² + |u₂|²)`.
    pub fn max_abs(&self) -> f64 {
        self.components[0]
            .iter()
            .zip(&self.components[1])
            .map(|(a, b)| (a.norm_sqr() + b.norm_sqr()).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.components {
            for v in c.iter_mut() {
                *v *= s;
            }
        }
    }

    pub fn gather(&self, sub: Grid2D, map: &[usize]) -> Result<VectorField2> {
        if map.len() != sub.len() {
            return Err(Error::dim("subgrid mapping length mismatch"));
        }
        let c1 = map.iter().map(|&k| self.components[0][k]).collect();
        let c2 = map.iter().map(|&k| self.components[1][k]).collect();
        VectorField2::from_components(sub, c1, c2)
    }
}

/// A scalar (out-of-plane) or 2-vector (in-plane) field.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Scalar(ScalarField),
    Vector(VectorField2),
}

impl FieldData {
    pub fn grid(&self) -> Grid2D {
        match self {
            FieldData::Scalar(f) => f.grid(),
            FieldData::Vector(f) => f.grid(),
        }
    }

    pub fn component_count(&self) -> usize {
        match self {
            FieldData::Scalar(_) => 1,
            FieldData::Vector(_) => 2,
        }
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        match self {
            FieldData::Scalar(f) => {
                assert_eq!(c, 0, "scalar field has a single component");
                f.values()
            }
            FieldData::Vector(f) => f.component(c),
        }
    }

    pub fn rms(&self) -> f64 {
        match self {
            FieldData::Scalar(f) => f.rms(),
            FieldData::Vector(f) => f.rms(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            FieldData::Scalar(f) => f.max_abs(),
            FieldData::Vector(f) => f.max_abs(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        match self {
            FieldData::Scalar(f) => f.scale(s),
            FieldData::Vector(f) => f.scale(s),
        }
    }

    /// Apply a per-component complex-array transform (same grid).
    pub fn map_components(&self, mut op: impl FnMut(&[Complex64]) -> Vec<Complex64>) -> Result<FieldData> {
        match self {
            FieldData::Scalar(f) => Ok(FieldData::Scalar(ScalarField::from_values(
                f.grid(),
                op(f.values()),
            )?)),
            FieldData::Vector(f) => Ok(FieldData::Vector(VectorField2::from_components(
                f.grid(),
                op(f.component(0)),
                op(f.component(1)),
            )?)),
        }
    }

    pub fn gather(&self, sub: Grid2D, map: &[usize]) -> Result<FieldData> {
        match self {
            FieldData::Scalar(f) => Ok(FieldData::Scalar(f.gather(sub, map)?)),
            FieldData::Vector(f) => Ok(FieldData::Vector(f.gather(sub, map)?)),
        }
    }
}

/// Axis-aligned rectangle of nodes: indices `i0..i0+ni`, `j0..j0+nj`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionRect {
    pub i0: usize,
    pub j0: usize,
    pub ni: usize,
    pub nj: usize,
}

impl RegionRect {
    pub fn len(&self) -> usize {
        self.ni * self.nj
    }

    pub fn is_empty(&self) -> bool {
        self.ni == 0 || self.nj == 0
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i >= self.i0 && i < self.i0 + self.ni && j >= self.j0 && j < self.j0 + self.nj
    }
}

/// Partition of a grid into labeled axis-aligned rectangles (one label per
/// node, labels `0..region_count`, every region nonempty).
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    grid: Grid2D,
    rects: Vec<RegionRect>,
    labels: Vec<u32>,
}

impl RegionMap {
    /// The whole grid as a single region.
    pub fn single(grid: Grid2D) -> Self {
        RegionMap {
            grid,
            rects: vec![RegionRect {
                i0: 0,
                j0: 0,
                ni: grid.nx(),
                nj: grid.ny(),
            }],
            labels: vec![0; grid.len()],
        }
    }

    /// Rectangles indexed by label; they must partition the grid exactly.
    pub fn from_rects(grid: Grid2D, rects: Vec<RegionRect>) -> Result<Self> {
        if rects.is_empty() {
            return Err(Error::Region("at least one region required".into()));
        }
        for (r, rect) in rects.iter().enumerate() {
            if rect.is_empty() {
                return Err(Error::Region(format!("region {r} is empty")));
            }
            if rect.i0 + rect.ni > grid.nx() || rect.j0 + rect.nj > grid.ny() {
                return Err(Error::Region(format!("region {r} exceeds the grid")));
            }
        }
        let mut labels = vec![u32::MAX; grid.len()];
        for (r, rect) in rects.iter().enumerate() {
            for j in rect.j0..rect.j0 + rect.nj {
                for i in rect.i0..rect.i0 + rect.ni {
                    let k = grid.idx(i, j);
                    if labels[k] != u32::MAX {
                        return Err(Error::Region(format!(
                            "regions {} and {r} overlap at node ({i},{j})",
                            labels[k]
                        )));
                    }
                    labels[k] = r as u32;
                }
            }
        }
        if labels.iter().any(|&l| l == u32::MAX) {
            return Err(Error::Region("regions do not cover the grid".into()));
        }
        Ok(RegionMap {
            grid,
            rects,
            labels,
        })
    }

    /// Four quadrants (labels: 0 lower-left, 1 lower-right, 2 upper-left,
    /// 3 upper-right); both axes must have even node counts.
    pub fn quadrants(grid: Grid2D) -> Result<Self> {
        if grid.nx() % 2 != 0 || grid.ny() % 2 != 0 {
            return Err(Error::Region(format!(
                "quadrant split needs even node counts, got {}×{}",
                grid.nx(),
                grid.ny()
            )));
        }
        let (hx, hy) = (grid.nx() / 2, grid.ny() / 2);
        Self::from_rects(
            grid,
            vec![
                RegionRect { i0: 0, j0: 0, ni: hx, nj: hy },
                RegionRect { i0: hx, j0: 0, ni: grid.nx() - hx, nj: hy },
                RegionRect { i0: 0, j0: hy, ni: hx, nj: grid.ny() - hy },
                RegionRect { i0: hx, j0: hy, ni: grid.nx() - hx, nj: grid.ny() - hy },
            ],
        )
    }

    /// Vertical strips with the given node widths (must sum to `nx`).
    pub fn strips_x(grid: Grid2D, widths: &[usize]) -> Result<Self> {
        if widths.iter().sum::<usize>() != grid.nx() {
            return Err(Error::Region(format!(
                "strip widths {:?} do not sum to nx = {}",
                widths,
                grid.nx()
            )));
        }
        let mut rects = Vec::with_capacity(widths.len());
        let mut i0 = 0;
        for &w in widths {
            rects.push(RegionRect {
                i0,
                j0: 0,
                ni: w,
                nj: grid.ny(),
            });
            i0 += w;
        }
        Self::from_rects(grid, rects)
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn region_count(&self) -> usize {
        self.rects.len()
    }

    pub fn rect(&self, label: usize) -> RegionRect {
        self.rects[label]
    }

    pub fn rects(&self) -> &[RegionRect] {
        &self.rects
    }

    /// Label of the node at flat index `k`.
    pub fn label(&self, k: usize) -> usize {
        self.labels[k] as usize
    }

    pub fn label_at(&self, i: usize, j: usize) -> usize {
        self.label(self.grid.idx(i, j))
    }

    /// Flat node indices of one region, row-major.
    pub fn nodes(&self, label: usize) -> Result<Vec<usize>> {
        if label >= self.rects.len() {
            return Err(Error::Region(format!(
                "label {label} out of range (region count {})",
                self.rects.len()
            )));
        }
        let r = self.rects[label];
        let mut out = Vec::with_capacity(r.len());
        for j in r.j0..r.j0 + r.nj {
            for i in r.i0..r.i0 + r.ni {
                out.push(self.grid.idx(i, j));
            }
        }
        Ok(out)
    }

    /// Restriction of a region map to an interior subgrid: rectangles are
    /// clipped; every region must stay nonempty.
    pub fn restrict(&self, sub: Grid2D, margin: usize) -> Result<RegionMap> {
        let mut rects = Vec::with_capacity(self.rects.len());
        for (r, rect) in self.rects.iter().enumerate() {
            let i0 = rect.i0.max(margin);
            let j0 = rect.j0.max(margin);
            let i1 = (rect.i0 + rect.ni).min(margin + sub.nx());
            let j1 = (rect.j0 + rect.nj).min(margin + sub.ny());
            if i1 <= i0 || j1 <= j0 {
                return Err(Error::Region(format!(
                    "region {r} vanishes on the margin-{margin} interior"
                )));
            }
            rects.push(RegionRect {
                i0: i0 - margin,
                j0: j0 - margin,
                ni: i1 - i0,
                nj: j1 - j0,
            });
        }
        RegionMap::from_rects(sub, rects)
    }
}

/// Nodes of one region with their scalar values, row-major.
pub fn region_restrict_scalar(
    field: &ScalarField,
    map: &RegionMap,
    label: usize,
) -> Result<Vec<(usize, Complex64)>> {
    let nodes = map.nodes(label)?;
    Ok(nodes.into_iter().map(|k| (k, field.values()[k])).collect())
}

/// Nodes of one region with their vector values, row-major.
pub fn region_restrict_vector(
    field: &VectorField2,
    map: &RegionMap,
    label: usize,
) -> Result<Vec<(usize, [Complex64; 2])>> {
    let nodes = map.nodes(label)?;
    Ok(nodes
        .into_iter()
        .map(|k| (k, [field.component(0)[k], field.component(1)[k]]))
        .collect())
}

/// One frequency-domain observation: a wavefield at a single frequency from
/// a single source, with optional precomputed derivative fields keyed by
/// multi-index.
#[derive(Debug, Clone)]
pub struct Record {
    /// ω (plane strain, rad/time) or f (flexural, cycles/time), normalized.
    pub frequency: f64,
    /// Source label τ.
    pub source: String,
    pub field: FieldData,
    pub derivs: BTreeMap<MultiIndex, FieldData>,
}

impl Record {
    pub fn deriv(&self, e1: u8, e2: u8) -> Result<&FieldData> {
        self.derivs
            .get(&MultiIndex::new(e1, e2)?)
            .ok_or(Error::MissingDerivative(e1, e2))
    }
}

/// A set of records sharing one grid and one region map, plus the governing
/// PDE and (for synthetic data) the generating materials.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub pde: PdeKind,
    pub grid: Grid2D,
    pub regions: RegionMap,
    pub materials: Option<crate::physics::Materials>,
    pub records: Vec<Record>,
}

impl Dataset {
    /// Validates that every record lives on the dataset grid.
    pub fn validate(&self) -> Result<()> {
        if self.regions.grid() != self.grid {
            return Err(Error::dim("region map grid ≠ dataset grid"));
        }
        for (n, rec) in self.records.iter().enumerate() {
            if rec.field.grid() != self.grid {
                return Err(Error::dim(format!("record {n} grid ≠ dataset grid")));
            }
            if !(rec.frequency > 0.0) {
                return Err(Error::arg(format!(
                    "record {n} frequency must be positive"
                )));
            }
            for (e, d) in &rec.derivs {
                if d.grid() != self.grid || d.component_count() != rec.field.component_count() {
                    return Err(Error::dim(format!(
                        "record {n} derivative {e:?} shape mismatch"
                    )));
                }
            }
        }
        Ok(())
    }
}
