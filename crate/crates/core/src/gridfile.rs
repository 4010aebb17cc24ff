//! Grid file I/O and mesh export.
//!
//! A grid file is one line of JSON header followed by `ny` CSV rows of `nx`
//! values each, row `j` holding nodes `(0..nx, j)`. Masked nodes are written
//! as `NaN`. Floats use the shortest representation that parses back to the
//! same bits, so `parse ∘ to_string` is the identity.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DomainSpec, ScalarField};
use crate::space_model::{Causal, SpaceParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub schema_version: u32,
    pub kappa: f64,
    pub bundle: f64,
    pub causal: Causal,
    #[serde(rename = "H_expected", default, skip_serializing_if = "Option::is_none")]
    pub h_expected: Option<f64>,
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
}

/// A graph together with the space it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub params: SpaceParams,
    /// Mean curvature the producer expects, if known.
    pub h_expected: Option<f64>,
    pub field: ScalarField,
}

fn fmt_f64(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("NaN");
    } else {
        // Debug is shortest round-trip and switches to exponent form for
        // very large or small magnitudes.
        write!(out, "{v:?}").expect("writing to a String");
    }
}

impl GridFile {
    pub fn new(field: ScalarField, params: SpaceParams, h_expected: Option<f64>) -> Self {
        Self {
            params,
            h_expected,
            field,
        }
    }

    pub fn header(&self) -> GridHeader {
        let d = self.field.domain();
        GridHeader {
            schema_version: SCHEMA_VERSION,
            kappa: self.params.kappa,
            bundle: self.params.bundle,
            causal: self.params.causal,
            h_expected: self.h_expected,
            nx: d.nx,
            ny: d.ny,
            x0: d.x0,
            y0: d.y0,
            h: d.h,
        }
    }

    pub fn to_text(&self) -> String {
        let d = self.field.domain();
        let mut out = serde_json::to_string(&self.header()).expect("header serializes");
        out.push('\n');
        for j in 0..d.ny {
            for i in 0..d.nx {
                if i > 0 {
                    out.push(',');
                }
                fmt_f64(&mut out, self.field.values()[d.idx(i, j)]);
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| Error::Format("empty grid file".into()))?;
        let header: GridHeader = serde_json::from_str(head).map_err(|e| Error::Format(format!("bad header: {e}")))?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                header.schema_version
            )));
        }
        let (nx, ny) = (header.nx, header.ny);
        let mut values = Vec::with_capacity(nx.saturating_mul(ny));
        let mut rows = 0;
        for (r, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            rows += 1;
            let before = values.len();
            for tok in line.split(',') {
                let tok = tok.trim();
                let v = if tok == "NaN" {
                    f64::NAN
                } else {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| Error::Format(format!("row {r}: bad number '{tok}'")))?;
                    if !v.is_finite() {
                        return Err(Error::Format(format!("row {r}: non-finite value '{tok}'")));
                    }
                    v
                };
                values.push(v);
            }
            if values.len() - before != nx {
                return Err(Error::Format(format!(
                    "row {r} has {} values, header says nx = {nx}",
                    values.len() - before
                )));
            }
        }
        if rows != ny {
            return Err(Error::Format(format!("payload has {rows} rows, header says ny = {ny}")));
        }
        let mask: Vec<bool> = values.iter().map(|v| !v.is_nan()).collect();
        let domain = DomainSpec::new(header.x0, header.y0, header.h, nx, ny)?.with_mask(mask)?;
        Ok(Self {
            params: SpaceParams::new(header.kappa, header.bundle, header.causal),
            h_expected: header.h_expected,
            field: ScalarField::new(domain, values)?,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Writes the graph `(x, y, u(x, y))` as a Wavefront OBJ with `v` and `f`
/// records only. Each grid cell with four active corners becomes two
/// triangles.
pub fn write_obj<W: Write>(field: &ScalarField, mut out: W) -> Result<()> {
    let d = field.domain();
    let mut vertex = vec![0usize; d.nx * d.ny];
    for (k, (i, j)) in d.active_nodes().enumerate() {
        let (x, y) = d.coords(i, j);
        writeln!(out, "v {x:?} {y:?} {:?}", field.at(i, j))?;
        vertex[d.idx(i, j)] = k + 1;
    }
    for j in 0..d.ny.saturating_sub(1) {
        for i in 0..d.nx.saturating_sub(1) {
            let (ii, jj) = (i as isize, j as isize);
            if d.active(ii, jj) && d.active(ii + 1, jj) && d.active(ii, jj + 1) && d.active(ii + 1, jj + 1) {
                let a = vertex[d.idx(i, j)];
                let b = vertex[d.idx(i + 1, j)];
                let c = vertex[d.idx(i + 1, j + 1)];
                let e = vertex[d.idx(i, j + 1)];
                writeln!(out, "f {a} {b} {c}")?;
                writeln!(out, "f {a} {c} {e}")?;
            }
        }
    }
    Ok(())
}
