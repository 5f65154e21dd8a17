//! Plain-text persistence. A dataset is a directory holding `manifest.txt`
//! (flat `key = value` lines describing grid, regions, PDE kind, optional
//! ground-truth materials, and the record list) plus one CSV per record
//! field, row-major, with derivative companions named by suffix (`_d21` for
//! ∂³/∂x²∂y). Network checkpoints pair a manifest with a parameter CSV in
//! layer order. All numbers render through Rust's shortest-round-trip float
//! formatting, so save → load → save reproduces files byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{
    Dataset, FieldData, Grid2D, Record, RegionMap, RegionRect, ScalarField, VectorField2,
};
use crate::mlp::{init_network, MlpNetwork, OutputTransform};
use crate::physics::{Materials, PdeKind, PlaneStrainMaterial, PlateMaterial};
use crate::signal::MultiIndex;

const MANIFEST_NAME: &str = "manifest.txt";

/// One record's entry in a wavefield manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordEntry {
    /// CSV file stem (`<stem>.csv`, derivatives `<stem>_d<e1><e2>.csv`).
    pub stem: String,
    pub frequency: f64,
    pub source: String,
    pub derivs: Vec<MultiIndex>,
}

/// Parsed form of `manifest.txt`, prior to reading any field CSV.
#[derive(Debug, Clone)]
pub struct WavefieldManifest {
    pub grid: Grid2D,
    pub pde: PdeKind,
    pub rects: Vec<RegionRect>,
    pub materials: Option<Materials>,
    pub records: Vec<RecordEntry>,
}

/// Key = value scanner shared by both manifest formats: returns
/// (line number, key, value) for non-empty, non-comment lines.
fn scan_lines(text: &str) -> Result<Vec<(usize, &str, &str)>> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(ln, format!("expected `key = value`, got {line:?}")))?;
        out.push((ln, key.trim(), value.trim()));
    }
    Ok(out)
}

fn parse_f64(ln: usize, key: &str, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::parse(ln, format!("{key}: {s:?} is not a number")))
}

fn parse_usize(ln: usize, key: &str, s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::parse(ln, format!("{key}: {s:?} is not a non-negative integer")))
}

/// File stems are restricted to a conservative charset so a manifest can
/// never point outside its own directory.
fn check_stem(ln: usize, stem: &str) -> Result<()> {
    if stem.is_empty()
        || !stem
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(Error::parse(
            ln,
            format!("stem {stem:?} must be nonempty [A-Za-z0-9_-]"),
        ));
    }
    Ok(())
}

/// Parse the wavefield manifest text (no file access).
pub fn parse_manifest(text: &str) -> Result<WavefieldManifest> {
    let mut scalars: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    let mut regions: Vec<(usize, &str)> = Vec::new();
    let mut materials: Vec<(usize, &str)> = Vec::new();
    let mut records: Vec<(usize, &str)> = Vec::new();
    for (ln, key, value) in scan_lines(text)? {
        match key {
            "region" => regions.push((ln, value)),
            "material" => materials.push((ln, value)),
            "record" => records.push((ln, value)),
            "nx" | "ny" | "dx" | "dy" | "origin_x" | "origin_y" | "pde" => {
                if scalars.insert(key, (ln, value)).is_some() {
                    return Err(Error::parse(ln, format!("duplicate key {key}")));
                }
            }
            other => return Err(Error::parse(ln, format!("unknown key {other:?}"))),
        }
    }
    let need = |key: &str| -> Result<(usize, &str)> {
        scalars
            .get(key)
            .copied()
            .ok_or_else(|| Error::parse(0, format!("missing key {key}")))
    };

    let (ln, s) = need("nx")?;
    let nx = parse_usize(ln, "nx", s)?;
    let (ln, s) = need("ny")?;
    let ny = parse_usize(ln, "ny", s)?;
    let (ln, s) = need("dx")?;
    let dx = parse_f64(ln, "dx", s)?;
    let (ln, s) = need("dy")?;
    let dy = parse_f64(ln, "dy", s)?;
    let (ln, s) = need("origin_x")?;
    let ox = parse_f64(ln, "origin_x", s)?;
    let (ln, s) = need("origin_y")?;
    let oy = parse_f64(ln, "origin_y", s)?;
    let grid = Grid2D::new(nx, ny, dx, dy, [ox, oy])?;

    let (pde_ln, pde_str) = need("pde")?;
    let pde = match pde_str {
        "plane_strain" => PdeKind::PlaneStrain,
        "flexural" => PdeKind::Flexural,
        other => {
            return Err(Error::parse(
                pde_ln,
                format!("pde must be plane_strain or flexural, got {other:?}"),
            ))
        }
    };

    if regions.is_empty() {
        return Err(Error::parse(0, "at least one region line is required"));
    }
    let mut rects = Vec::with_capacity(regions.len());
    for (ln, value) in regions {
        let parts: Vec<&str> = value.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::parse(ln, "region needs `i0, j0, ni, nj`"));
        }
        rects.push(RegionRect {
            i0: parse_usize(ln, "i0", parts[0])?,
            j0: parse_usize(ln, "j0", parts[1])?,
            ni: parse_usize(ln, "ni", parts[2])?,
            nj: parse_usize(ln, "nj", parts[3])?,
        });
    }

    let materials = if materials.is_empty() {
        None
    } else {
        if materials.len() != rects.len() {
            let ln = materials[0].0;
            return Err(Error::parse(
                ln,
                format!(
                    "{} material lines for {} regions",
                    materials.len(),
                    rects.len()
                ),
            ));
        }
        match pde {
            PdeKind::PlaneStrain => {
                let mut mats = Vec::with_capacity(materials.len());
                for (ln, value) in materials {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    if parts.len() != 4 || parts[0] != "plane_strain" {
                        return Err(Error::parse(
                            ln,
                            "material needs `plane_strain, mu, lambda, rho`",
                        ));
                    }
                    mats.push(PlaneStrainMaterial::new(
                        parse_f64(ln, "mu", parts[1])?,
                        parse_f64(ln, "lambda", parts[2])?,
                        parse_f64(ln, "rho", parts[3])?,
                    )?);
                }
                Some(Materials::PlaneStrain(mats))
            }
            PdeKind::Flexural => {
                let mut mats = Vec::with_capacity(materials.len());
                for (ln, value) in materials {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    if parts.len() != 4 || parts[0] != "plate" {
                        return Err(Error::parse(ln, "material needs `plate, chi, nu, h`"));
                    }
                    mats.push(PlateMaterial::new(
                        parse_f64(ln, "chi", parts[1])?,
                        parse_f64(ln, "nu", parts[2])?,
                        parse_f64(ln, "h", parts[3])?,
                    )?);
                }
                Some(Materials::Plate(mats))
            }
        }
    };

    let mut entries = Vec::with_capacity(records.len());
    for (ln, value) in records {
        let parts: Vec<&str> = value.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::parse(
                ln,
                "record needs `stem, frequency, source, derivs` (derivs possibly empty)",
            ));
        }
        check_stem(ln, parts[0])?;
        if entries.iter().any(|e: &RecordEntry| e.stem == parts[0]) {
            return Err(Error::parse(ln, format!("duplicate stem {:?}", parts[0])));
        }
        let frequency = parse_f64(ln, "frequency", parts[1])?;
        let mut derivs = Vec::new();
        for token in parts[3].split_whitespace() {
            let digits = token.strip_prefix('d').ok_or_else(|| {
                Error::parse(ln, format!("derivative token {token:?} must look like d21"))
            })?;
            let bytes = digits.as_bytes();
            if bytes.len() != 2 || !bytes.iter().all(u8::is_ascii_digit) {
                return Err(Error::parse(
                    ln,
                    format!("derivative token {token:?} must look like d21"),
                ));
            }
            let e = MultiIndex::new(bytes[0] - b'0', bytes[1] - b'0')?;
            if derivs.contains(&e) {
                return Err(Error::parse(ln, format!("duplicate derivative {token}")));
            }
            derivs.push(e);
        }
        entries.push(RecordEntry {
            stem: parts[0].to_string(),
            frequency,
            source: parts[2].to_string(),
            derivs,
        });
    }

    Ok(WavefieldManifest {
        grid,
        pde,
        rects,
        materials,
        records: entries,
    })
}

/// Parse one field CSV (header `i,j,re,im` or `i,j,re1,im1,re2,im2`) into a
/// field on `grid`. Rows must enumerate the grid exactly in row-major order.
pub fn parse_field_csv(text: &str, grid: Grid2D, components: usize) -> Result<FieldData> {
    let header: &[&str] = match components {
        1 => &["i", "j", "re", "im"],
        2 => &["i", "j", "re1", "im1", "re2", "im2"],
        n => return Err(Error::dim(format!("{n} components (expected 1 or 2)"))),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    {
        let got = reader
            .headers()
            .map_err(|e| Error::parse(1, e.to_string()))?;
        if got.iter().collect::<Vec<_>>() != header {
            return Err(Error::parse(
                1,
                format!("header must be {:?}, got {:?}", header.join(","), got),
            ));
        }
    }
    let mut comps: Vec<Vec<Complex64>> = vec![Vec::with_capacity(grid.len()); components];
    let mut count = 0usize;
    for row in reader.records() {
        let row = row.map_err(|e| Error::parse(count + 2, e.to_string()))?;
        let ln = count + 2; // header is line 1
        if row.len() != 2 + 2 * components {
            return Err(Error::parse(
                ln,
                format!("expected {} columns, got {}", 2 + 2 * components, row.len()),
            ));
        }
        if count >= grid.len() {
            return Err(Error::parse(
                ln,
                format!("more rows than the {} grid nodes", grid.len()),
            ));
        }
        let (want_i, want_j) = grid.ij(count);
        let i = parse_usize(ln, "i", &row[0])?;
        let j = parse_usize(ln, "j", &row[1])?;
        if (i, j) != (want_i, want_j) {
            return Err(Error::parse(
                ln,
                format!("row ({i}, {j}) out of row-major order, expected ({want_i}, {want_j})"),
            ));
        }
        for (c, comp) in comps.iter_mut().enumerate() {
            comp.push(Complex64::new(
                parse_f64(ln, "re", &row[2 + 2 * c])?,
                parse_f64(ln, "im", &row[3 + 2 * c])?,
            ));
        }
        count += 1;
    }
    if count != grid.len() {
        return Err(Error::parse(
            count + 1,
            format!("{count} rows for {} grid nodes", grid.len()),
        ));
    }
    match components {
        1 => Ok(FieldData::Scalar(ScalarField::from_values(
            grid,
            comps.pop().expect("one component"),
        )?)),
        _ => {
            let c2 = comps.pop().expect("two components");
            let c1 = comps.pop().expect("two components");
            Ok(FieldData::Vector(VectorField2::from_components(
                grid, c1, c2,
            )?))
        }
    }
}

fn render_field_csv(field: &FieldData) -> String {
    let grid = field.grid();
    let mut out = String::new();
    match field.component_count() {
        1 => out.push_str("i,j,re,im\n"),
        _ => out.push_str("i,j,re1,im1,re2,im2\n"),
    }
    for k in 0..grid.len() {
        let (i, j) = grid.ij(k);
        let _ = write!(out, "{i},{j}");
        for c in 0..field.component_count() {
            let v = field.component(c)[k];
            let _ = write!(out, ",{},{}", v.re, v.im);
        }
        out.push('\n');
    }
    out
}

fn render_manifest(dataset: &Dataset, stems: &[String]) -> String {
    let g = dataset.grid;
    let mut out = String::new();
    let _ = writeln!(out, "nx = {}", g.nx());
    let _ = writeln!(out, "ny = {}", g.ny());
    let _ = writeln!(out, "dx = {}", g.dx());
    let _ = writeln!(out, "dy = {}", g.dy());
    let _ = writeln!(out, "origin_x = {}", g.origin()[0]);
    let _ = writeln!(out, "origin_y = {}", g.origin()[1]);
    let _ = writeln!(
        out,
        "pde = {}",
        match dataset.pde {
            PdeKind::PlaneStrain => "plane_strain",
            PdeKind::Flexural => "flexural",
        }
    );
    for rect in dataset.regions.rects() {
        let _ = writeln!(
            out,
            "region = {}, {}, {}, {}",
            rect.i0, rect.j0, rect.ni, rect.nj
        );
    }
    match &dataset.materials {
        Some(Materials::PlaneStrain(mats)) => {
            for m in mats {
                let _ = writeln!(
                    out,
                    "material = plane_strain, {}, {}, {}",
                    m.mu, m.lambda, m.rho
                );
            }
        }
        Some(Materials::Plate(mats)) => {
            for m in mats {
                let _ = writeln!(out, "material = plate, {}, {}, {}", m.chi, m.nu, m.h);
            }
        }
        None => {}
    }
    for (rec, stem) in dataset.records.iter().zip(stems) {
        let derivs: Vec<String> = rec
            .derivs
            .keys()
            .map(|e| format!("d{}{}", e.e1(), e.e2()))
            .collect();
        let _ = writeln!(
            out,
            "record = {stem}, {}, {}, {}",
            rec.frequency,
            rec.source,
            derivs.join(" ")
        );
    }
    out
}

/// Write a dataset as `manifest.txt` plus per-record CSVs under `dir`
/// (created if needed). Stems are `rec0`, `rec1`, … in record order.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    dataset.validate()?;
    for rec in &dataset.records {
        if rec.source.contains(',') || rec.source.contains('\n') {
            return Err(Error::arg(format!(
                "source label {:?} must not contain commas or newlines",
                rec.source
            )));
        }
    }
    std::fs::create_dir_all(dir)?;
    let stems: Vec<String> = (0..dataset.records.len())
        .map(|k| format!("rec{k}"))
        .collect();
    std::fs::write(
        dir.join(MANIFEST_NAME),
        render_manifest(dataset, &stems),
    )?;
    for (rec, stem) in dataset.records.iter().zip(&stems) {
        std::fs::write(dir.join(format!("{stem}.csv")), render_field_csv(&rec.field))?;
        for (e, field) in &rec.derivs {
            std::fs::write(
                dir.join(format!("{stem}_d{}{}.csv", e.e1(), e.e2())),
                render_field_csv(field),
            )?;
        }
    }
    Ok(())
}

/// Read a dataset directory written by [`save_dataset`] (or by hand).
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&manifest_path)?;
    let manifest = parse_manifest(&text)?;
    let regions = RegionMap::from_rects(manifest.grid, manifest.rects.clone())?;
    let components = match manifest.pde {
        PdeKind::PlaneStrain => 2,
        PdeKind::Flexural => 1,
    };
    let mut records = Vec::with_capacity(manifest.records.len());
    for entry in &manifest.records {
        let field_text = std::fs::read_to_string(dir.join(format!("{}.csv", entry.stem)))?;
        let field = parse_field_csv(&field_text, manifest.grid, components)?;
        let mut derivs = BTreeMap::new();
        for &e in &entry.derivs {
            let name = format!("{}_d{}{}.csv", entry.stem, e.e1(), e.e2());
            let text = std::fs::read_to_string(dir.join(name))?;
            derivs.insert(e, parse_field_csv(&text, manifest.grid, components)?);
        }
        records.push(Record {
            frequency: entry.frequency,
            source: entry.source.clone(),
            field,
            derivs,
        });
    }
    let dataset = Dataset {
        pde: manifest.pde,
        grid: manifest.grid,
        regions,
        materials: manifest.materials,
        records,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Parsed checkpoint manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointManifest {
    pub shape: Vec<usize>,
    pub transform: OutputTransform,
    pub seed: u64,
    pub epoch: usize,
}

/// Parse a checkpoint manifest text.
pub fn parse_checkpoint_manifest(text: &str) -> Result<CheckpointManifest> {
    let mut fields: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (ln, key, value) in scan_lines(text)? {
        match key {
            "shape" | "transform" | "seed" | "epoch" => {
                if fields.insert(key, (ln, value)).is_some() {
                    return Err(Error::parse(ln, format!("duplicate key {key}")));
                }
            }
            other => return Err(Error::parse(ln, format!("unknown key {other:?}"))),
        }
    }
    let need = |key: &str| -> Result<(usize, &str)> {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| Error::parse(0, format!("missing key {key}")))
    };
    let (ln, s) = need("shape")?;
    let shape = s
        .split_whitespace()
        .map(|w| parse_usize(ln, "shape", w))
        .collect::<Result<Vec<usize>>>()?;
    let (ln, s) = need("transform")?;
    let transform = match s {
        "identity" => OutputTransform::Identity,
        "softplus" => OutputTransform::Softplus,
        other => {
            return Err(Error::parse(
                ln,
                format!("transform must be identity or softplus, got {other:?}"),
            ))
        }
    };
    let (ln, s) = need("seed")?;
    let seed = s
        .parse()
        .map_err(|_| Error::parse(ln, format!("seed: {s:?} is not a u64")))?;
    let (ln, s) = need("epoch")?;
    let epoch = parse_usize(ln, "epoch", s)?;
    Ok(CheckpointManifest {
        shape,
        transform,
        seed,
        epoch,
    })
}

/// Parse the checkpoint parameter CSV (`index,value`, indices 0..n in
/// order).
pub fn parse_params_csv(text: &str) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    {
        let got = reader
            .headers()
            .map_err(|e| Error::parse(1, e.to_string()))?;
        if got.iter().collect::<Vec<_>>() != ["index", "value"] {
            return Err(Error::parse(1, format!("header must be index,value, got {got:?}")));
        }
    }
    let mut params = Vec::new();
    for row in reader.records() {
        let ln = params.len() + 2;
        let row = row.map_err(|e| Error::parse(ln, e.to_string()))?;
        if row.len() != 2 {
            return Err(Error::parse(ln, format!("expected 2 columns, got {}", row.len())));
        }
        let idx = parse_usize(ln, "index", &row[0])?;
        if idx != params.len() {
            return Err(Error::parse(
                ln,
                format!("index {idx} out of order, expected {}", params.len()),
            ));
        }
        params.push(parse_f64(ln, "value", &row[1])?);
    }
    Ok(params)
}

/// Write `<base>.manifest` and `<base>.params.csv` for a network.
pub fn save_checkpoint(
    net: &MlpNetwork,
    seed: u64,
    epoch: usize,
    base: &Path,
) -> Result<()> {
    let shape: Vec<String> = net.shape().iter().map(|w| w.to_string()).collect();
    let mut manifest = String::new();
    let _ = writeln!(manifest, "shape = {}", shape.join(" "));
    let _ = writeln!(
        manifest,
        "transform = {}",
        match net.transform() {
            OutputTransform::Identity => "identity",
            OutputTransform::Softplus => "softplus",
        }
    );
    let _ = writeln!(manifest, "seed = {seed}");
    let _ = writeln!(manifest, "epoch = {epoch}");
    let mut params = String::from("index,value\n");
    for (k, p) in net.params_flat().iter().enumerate() {
        let _ = writeln!(params, "{k},{p}");
    }
    if let Some(parent) = base.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(base.with_extension("manifest"), manifest)?;
    std::fs::write(base.with_extension("params.csv"), params)?;
    Ok(())
}

/// Read a checkpoint written by [`save_checkpoint`]; returns the network
/// with its recorded seed and epoch.
pub fn load_checkpoint(base: &Path) -> Result<(MlpNetwork, u64, usize)> {
    let manifest_text = std::fs::read_to_string(base.with_extension("manifest"))?;
    let manifest = parse_checkpoint_manifest(&manifest_text)?;
    let params_text = std::fs::read_to_string(base.with_extension("params.csv"))?;
    let params = parse_params_csv(&params_text)?;
    let mut net = init_network(&manifest.shape, manifest.transform, 0)?;
    if params.len() != net.param_count() {
        return Err(Error::dim(format!(
            "{} parameters for shape {:?} (needs {})",
            params.len(),
            manifest.shape,
            net.param_count()
        )));
    }
    net.set_params(&params)?;
    Ok((net, manifest.seed, manifest.epoch))
}
