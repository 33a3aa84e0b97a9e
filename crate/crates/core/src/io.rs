//! CSV readers and writers. Every file has a header row, `,` separators, `.`
//! decimals and LF line endings; floats use the shortest round-trip form so a
//! read-back is bit-exact.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::domain::{DensityField, DiagnosticsRecord, Grid3, ParticleEnsemble};
use crate::error::IoError;
use crate::observables::RelErrors;

pub const SNAPSHOT_HEADER: &str = "t,id,x,y,r";
pub const FIELD_HEADER: &str = "t,i,j,k,x,y,r,u";
pub const FV_DIAGNOSTICS_HEADER: &str = "t,mass,shannon,rao,second_moment";
pub const MICRO_DIAGNOSTICS_HEADER: &str = "t,mass,shannon,rao,second_moment,particle_count";
pub const ERRORS_HEADER: &str = "t,comparand,e_tot,e_spatial,e_size";

/// Particle snapshots, one row per particle per time.
pub fn write_snapshots<W: Write>(mut w: W, snapshots: &[ParticleEnsemble]) -> std::io::Result<()> {
    writeln!(w, "{SNAPSHOT_HEADER}")?;
    for s in snapshots {
        for n in 0..s.len() {
            let [x, y] = s.positions[n];
            writeln!(w, "{},{},{},{},{}", s.time, s.ids[n], x, y, s.radii[n])?;
        }
    }
    Ok(())
}

/// Density snapshots. With `omit_zero` only positive cells are written; an
/// all-zero snapshot still emits its first cell so the time is kept.
pub fn write_fields<W: Write>(mut w: W, fields: &[DensityField], omit_zero: bool) -> std::io::Result<()> {
    writeln!(w, "{FIELD_HEADER}")?;
    for f in fields {
        let g = &f.grid;
        let mut wrote = false;
        for k in 0..g.nr {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let u = f.at(i, j, k);
                    let last = i + 1 == g.nx && j + 1 == g.ny && k + 1 == g.nr;
                    if omit_zero && u == 0.0 && (wrote || !last) {
                        continue;
                    }
                    wrote = true;
                    writeln!(w, "{},{},{},{},{},{},{},{}", f.time, i, j, k, g.x(i), g.y(j), g.r(k), u)?;
                }
            }
        }
    }
    Ok(())
}

/// Diagnostics series; `particle_count` is written when `micro` is set.
pub fn write_diagnostics<W: Write>(mut w: W, records: &[DiagnosticsRecord], micro: bool) -> std::io::Result<()> {
    writeln!(w, "{}", if micro { MICRO_DIAGNOSTICS_HEADER } else { FV_DIAGNOSTICS_HEADER })?;
    for d in records {
        write!(w, "{},{},{},{},{}", d.time, d.total_mass, d.shannon_entropy, d.rao_functional, d.second_moment)?;
        if micro {
            write!(w, ",{}", d.particle_count.unwrap_or(0))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub time: f64,
    pub comparand: String,
    pub errors: RelErrors,
}

pub fn write_errors<W: Write>(mut w: W, rows: &[ErrorRow]) -> std::io::Result<()> {
    writeln!(w, "{ERRORS_HEADER}")?;
    for r in rows {
        let e = r.errors;
        writeln!(w, "{},{},{},{},{}", r.time, r.comparand, e.e_tot, e.e_spatial, e.e_size)?;
    }
    Ok(())
}

/// Wide rows `t,<columns…>`.
pub fn write_wide<W: Write>(mut w: W, columns: &[String], rows: &[(f64, Vec<f64>)]) -> std::io::Result<()> {
    write!(w, "t")?;
    for c in columns {
        write!(w, ",{c}")?;
    }
    writeln!(w)?;
    for (t, values) in rows {
        write!(w, "{t}")?;
        for v in values {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

struct Table {
    columns: HashMap<String, usize>,
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn read<R: BufRead>(r: R) -> Result<Self, IoError> {
        let mut lines = r.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line?,
            None => return Err(IoError::Parse { line: 1, message: "empty file".into() }),
        };
        let columns = header.trim().split(',').enumerate().map(|(n, c)| (c.trim().to_string(), n)).collect();
        let mut rows = Vec::new();
        for (n, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            rows.push((n + 1, line.trim().split(',').map(str::to_string).collect()));
        }
        Ok(Self { columns, rows })
    }

    fn col(&self, name: &'static str) -> Result<usize, IoError> {
        self.columns.get(name).copied().ok_or(IoError::MissingColumn(name))
    }

    fn has(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }
}

fn parse<T: std::str::FromStr>(row: &(usize, Vec<String>), col: usize) -> Result<T, IoError> {
    let text = row.1.get(col).ok_or_else(|| IoError::Parse { line: row.0, message: "too few fields".into() })?;
    text.trim().parse().map_err(|_| IoError::Parse { line: row.0, message: format!("cannot parse `{text}`") })
}

/// Groups consecutive rows sharing a time.
fn group_by_time(rows: &[(usize, Vec<String>)], t_col: usize) -> Result<Vec<(f64, Vec<usize>)>, IoError> {
    let mut out: Vec<(f64, Vec<usize>)> = Vec::new();
    for (n, row) in rows.iter().enumerate() {
        let t: f64 = parse(row, t_col)?;
        match out.last_mut() {
            Some((last, idx)) if *last == t => idx.push(n),
            _ => out.push((t, vec![n])),
        }
    }
    Ok(out)
}

pub fn read_snapshots<R: BufRead>(r: R) -> Result<Vec<ParticleEnsemble>, IoError> {
    let table = Table::read(r)?;
    let (ct, cid, cx, cy, cr) = (table.col("t")?, table.col("id")?, table.col("x")?, table.col("y")?, table.col("r")?);
    let mut out = Vec::new();
    for (t, idx) in group_by_time(&table.rows, ct)? {
        let mut ens = ParticleEnsemble::new(t, Vec::new(), Vec::new());
        for n in idx {
            let row = &table.rows[n];
            ens.positions.push([parse(row, cx)?, parse(row, cy)?]);
            ens.radii.push(parse(row, cr)?);
            ens.ids.push(parse(row, cid)?);
        }
        ens.next_id = ens.ids.iter().max().map_or(0, |m| m + 1);
        out.push(ens);
    }
    Ok(out)
}

pub fn read_fields<R: BufRead>(r: R, grid: &Grid3) -> Result<Vec<DensityField>, IoError> {
    let table = Table::read(r)?;
    let (ct, ci, cj, ck, cu) = (table.col("t")?, table.col("i")?, table.col("j")?, table.col("k")?, table.col("u")?);
    let mut out = Vec::new();
    for (t, idx) in group_by_time(&table.rows, ct)? {
        let mut f = DensityField::zeros(grid.clone());
        f.time = t;
        for n in idx {
            let row = &table.rows[n];
            let (i, j, k): (usize, usize, usize) = (parse(row, ci)?, parse(row, cj)?, parse(row, ck)?);
            if i >= grid.nx || j >= grid.ny || k >= grid.nr {
                return Err(IoError::Parse { line: row.0, message: format!("cell ({i},{j},{k}) outside the grid") });
            }
            *f.at_mut(i, j, k) = parse(row, cu)?;
        }
        out.push(f);
    }
    Ok(out)
}

pub fn read_diagnostics<R: BufRead>(r: R) -> Result<Vec<DiagnosticsRecord>, IoError> {
    let table = Table::read(r)?;
    let cols =
        [table.col("t")?, table.col("mass")?, table.col("shannon")?, table.col("rao")?, table.col("second_moment")?];
    let count = table.has("particle_count").then(|| table.col("particle_count")).transpose()?;
    table
        .rows
        .iter()
        .map(|row| {
            Ok(DiagnosticsRecord {
                time: parse(row, cols[0])?,
                total_mass: parse(row, cols[1])?,
                shannon_entropy: parse(row, cols[2])?,
                rao_functional: parse(row, cols[3])?,
                second_moment: parse(row, cols[4])?,
                particle_count: count.map(|c| parse(row, c)).transpose()?,
                ..Default::default()
            })
        })
        .collect()
}

pub fn read_errors<R: BufRead>(r: R) -> Result<Vec<ErrorRow>, IoError> {
    let table = Table::read(r)?;
    let cols =
        [table.col("t")?, table.col("comparand")?, table.col("e_tot")?, table.col("e_spatial")?, table.col("e_size")?];
    table
        .rows
        .iter()
        .map(|row| {
            Ok(ErrorRow {
                time: parse(row, cols[0])?,
                comparand: parse(row, cols[1])?,
                errors: RelErrors {
                    e_tot: parse(row, cols[2])?,
                    e_spatial: parse(row, cols[3])?,
                    e_size: parse(row, cols[4])?,
                },
            })
        })
        .collect()
}
