//! Plot-ready CSV and JSON writers. Every CSV carries a header row; field
//! files put time (or frequency) in the first column and one column per
//! space index after it.

use ndarray::Array2;
use serde::Serialize;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::spectral::{ComplexPoint, CurveSample, DomainPoint};

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)?;
    Ok(())
}

fn writer(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// n x T field as CSV rows (t, x0, ..., x{n-1}).
pub fn write_field_csv(path: &Path, times: &[f64], field: &Array2<f64>) -> Result<()> {
    let mut w = writer(path)?;
    write!(w, "t")?;
    for x in 0..field.nrows() {
        write!(w, ",x{x}")?;
    }
    writeln!(w)?;
    for (i, t) in times.iter().enumerate() {
        write!(w, "{t}")?;
        for x in 0..field.nrows() {
            write!(w, ",{}", field[[x, i]])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Square matrix as CSV rows (i, x0, ..., x{n-1}).
pub fn write_matrix_csv(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut w = writer(path)?;
    write!(w, "i")?;
    for j in 0..m.ncols() {
        write!(w, ",x{j}")?;
    }
    writeln!(w)?;
    for i in 0..m.nrows() {
        write!(w, "{i}")?;
        for j in 0..m.ncols() {
            write!(w, ",{}", m[[i, j]])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve_csv(path: &Path, samples: &[CurveSample]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "xi,re,im")?;
    for s in samples {
        writeln!(w, "{},{},{}", s.xi, s.re, s.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_eigenvalues_csv(path: &Path, eigs: &[ComplexPoint]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "index,re,im")?;
    for (k, e) in eigs.iter().enumerate() {
        writeln!(w, "{k},{},{}", e.re, e.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_domain_csv(path: &Path, points: &[DomainPoint]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "l,r,feasible,min_dist")?;
    for p in points {
        writeln!(w, "{},{},{},{}", p.l, p.r, p.feasible, p.min_dist)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-term norms as CSV rows (k, l2_norm).
pub fn write_terms_csv(path: &Path, norms: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "k,l2_norm")?;
    for (k, n) in norms.iter().enumerate() {
        writeln!(w, "{k},{n}")?;
    }
    w.flush()?;
    Ok(())
}

/// Kernel columns as CSV rows (t, u, v) for plotting.
pub fn write_kernels_csv(path: &Path, times: &[f64], u: &[f64], v: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "t,u,v")?;
    for ((t, a), b) in times.iter().zip(u).zip(v) {
        writeln!(w, "{t},{a},{b}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = writer(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| crate::error::Error::Config(format!("serialization: {e}")))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
