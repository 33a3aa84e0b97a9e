use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use multiscale::observables::{ring_count, Marginals};
use multiscale::{build_grid, io, DensityField, Grid3, SimConfig};
use serde::{Deserialize, Serialize};

use crate::commands::ConfigViolation;

pub const MANIFEST: &str = "manifest.json";
pub const FIELDS: &str = "fields.csv";
pub const DIAGNOSTICS: &str = "diagnostics.csv";
pub const SNAPSHOTS: &str = "snapshots.csv";
pub const AVERAGE_DIR: &str = "average";

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub scale: String,
    pub preset: String,
    pub config: SimConfig,
    pub seeds: Vec<u64>,
    pub output_times: Vec<f64>,
    pub particle_cap: usize,
    pub output_dir: PathBuf,
    pub status: Status,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    pub elapsed_seconds: Option<f64>,
    /// Set when any micro run hit the particle cap.
    pub truncated: bool,
    /// Per micro run, the time the cap was exceeded.
    pub truncation_times: Vec<Option<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Complete,
    Failed,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let file =
            File::open(&path).map_err(|e| ConfigViolation(format!("no {} in {}: {e}", MANIFEST, dir.display())))?;
        serde_json::from_reader(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut w = create(&dir.join(MANIFEST))?;
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid3> {
        Ok(build_grid(&self.config)?)
    }
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

pub fn read_fields(dir: &Path, grid: &Grid3) -> Result<Vec<DensityField>> {
    let path = dir.join(FIELDS);
    io::read_fields(open(&path)?, grid).with_context(|| format!("reading {}", path.display()))
}

/// Writes `fields.csv` plus the spatial, size and radial marginals.
pub fn write_field_outputs(dir: &Path, fields: &[DensityField]) -> Result<()> {
    let mut w = create(&dir.join(FIELDS))?;
    io::write_fields(&mut w, fields, true)?;
    w.flush()?;
    let Some(first) = fields.first() else { return Ok(()) };
    let g = &first.grid;
    let margs: Vec<(f64, Marginals)> = fields.iter().map(|f| (f.time, Marginals::of(f))).collect();

    let spatial_cols: Vec<String> = (0..g.ny).flat_map(|j| (0..g.nx).map(move |i| format!("i{i}_j{j}"))).collect();
    let size_cols: Vec<String> = (0..g.nr).map(|k| format!("r{}", (g.r(k) * 1e12).round() / 1e12)).collect();
    let radial_cols: Vec<String> =
        (0..ring_count(g)).flat_map(|i| (0..g.nr).map(move |k| format!("ring{i}_k{k}"))).collect();
    let wide = |name: &str, cols: &[String], pick: &dyn Fn(&Marginals) -> Vec<f64>| -> Result<()> {
        let rows: Vec<(f64, Vec<f64>)> = margs.iter().map(|(t, m)| (*t, pick(m))).collect();
        let mut w = create(&dir.join(name))?;
        io::write_wide(&mut w, cols, &rows)?;
        w.flush()?;
        Ok(())
    };
    wide("spatial.csv", &spatial_cols, &|m| m.spatial.clone())?;
    wide("size.csv", &size_cols, &|m| m.size.clone())?;
    wide("radial.csv", &radial_cols, &|m| m.radial.clone())?;
    Ok(())
}

/// 8-bit grayscale image of a row-major `height x width` array, scaled linearly
/// from its minimum to its maximum.
pub fn write_png(path: &Path, values: &[f64], width: usize, height: usize) -> Result<()> {
    assert_eq!(values.len(), width * height);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let pixels: Vec<u8> =
        values.iter().map(|v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 }).collect();
    let w = create(path)?;
    let mut enc = png::Encoder::new(w, width as u32, height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    writer.write_image_data(&pixels)?;
    writer.finish()?;
    Ok(())
}
