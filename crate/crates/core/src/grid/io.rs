//! Field files: a one-line JSON header followed by raw little-endian `f64`
//! samples (interleaved `re, im` pairs for `complex128`), or CSV for `n = 1`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Grid, SampledField};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Float64,
    Complex128,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
    pub dtype: Dtype,
    pub layout: String,
}

fn is_real(f: &SampledField) -> bool {
    f.values().iter().all(|z| z.im == 0.0)
}

/// Writes the binary format; real fields are stored as `float64`.
pub fn write_field<W: Write>(mut w: W, f: &SampledField) -> Result<()> {
    let g = f.grid();
    let dtype = if is_real(f) { Dtype::Float64 } else { Dtype::Complex128 };
    let header = FieldHeader {
        dim: g.dim(),
        half_width: g.half_width(),
        points_per_axis: g.points_per_axis(),
        dtype,
        layout: "row-major".into(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(f.values().len() * 16);
    for z in f.values() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        if dtype == Dtype::Complex128 {
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field<R: Read>(r: R) -> Result<SampledField> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: FieldHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(format!("bad field header: {e}")))?;
    if header.layout != "row-major" {
        return Err(Error::Format(format!("unsupported layout `{}`", header.layout)));
    }
    let grid = Grid::new(header.dim, header.half_width, header.points_per_axis)?;
    let width = match header.dtype {
        Dtype::Float64 => 8,
        Dtype::Complex128 => 16,
    };
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != grid.len() * width {
        return Err(Error::Format(format!(
            "payload has {} bytes, header implies {}",
            payload.len(),
            grid.len() * width
        )));
    }
    let word = |i: usize| f64::from_le_bytes(payload[8 * i..8 * i + 8].try_into().expect("8 bytes"));
    let values = (0..grid.len())
        .map(|i| match header.dtype {
            Dtype::Float64 => Complex64::new(word(i), 0.0),
            Dtype::Complex128 => Complex64::new(word(2 * i), word(2 * i + 1)),
        })
        .collect();
    SampledField::new(grid, values)
}

/// CSV with columns `x,re,im` (one-dimensional fields only).
pub fn write_csv<W: Write>(mut w: W, f: &SampledField) -> Result<()> {
    let g = f.grid();
    if g.dim() != 1 {
        return Err(Error::Format("CSV output is only defined for n = 1".into()));
    }
    writeln!(w, "x,re,im")?;
    for (i, z) in f.values().iter().enumerate() {
        writeln!(w, "{},{},{}", g.coord(i), z.re, z.im)?;
    }
    Ok(())
}

/// Reads `x,value` or `x,re,im` CSV. The grid is inferred from the `x` column.
pub fn read_csv<R: Read>(r: R) -> Result<SampledField> {
    let mut xs = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
        let nums = match parsed {
            Ok(n) => n,
            Err(_) if lineno == 0 => continue,
            Err(e) => return Err(Error::Format(format!("line {}: {e}", lineno + 1))),
        };
        match nums.as_slice() {
            [x, re] => {
                xs.push(*x);
                values.push(Complex64::new(*re, 0.0));
            }
            [x, re, im] => {
                xs.push(*x);
                values.push(Complex64::new(*re, *im));
            }
            _ => return Err(Error::Format(format!("line {}: expected 2 or 3 columns", lineno + 1))),
        }
    }
    if xs.len() < 2 {
        return Err(Error::Format("CSV field needs at least two rows".into()));
    }
    let grid = Grid::new(1, -xs[0], xs.len())?;
    for (i, &x) in xs.iter().enumerate() {
        if (x - grid.coord(i)).abs() > 1e-9 * grid.half_width() {
            return Err(Error::Format(format!("row {i}: x = {x} is off the uniform grid")));
        }
    }
    SampledField::new(grid, values)
}

/// Dispatches on the file extension: `.csv` or the binary format.
pub fn load(path: &Path) -> Result<SampledField> {
    let file = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(file)
    } else {
        read_field(file)
    }
}

pub fn save(path: &Path, f: &SampledField) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write_csv(file, f)
    } else {
        write_field(file, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let g = Grid::new(2, 1.0, 8).unwrap();
        let f = SampledField::from_fn(g, |x| Complex64::new(x[0], x[1] * 3.0)).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(read_field(buf.as_slice()).unwrap(), f);

        let r = SampledField::from_real_fn(g, |x| x[0] - x[1]).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &r).unwrap();
        assert!(String::from_utf8_lossy(&buf[..80]).contains("float64"));
        assert_eq!(read_field(buf.as_slice()).unwrap(), r);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let g = Grid::new(1, 1.0, 8).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &SampledField::zeros(g)).unwrap();
        buf.pop();
        assert!(matches!(read_field(buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new(1, 2.0, 16).unwrap();
        let f = SampledField::from_fn(g, |x| Complex64::new(x[0].sin(), 0.5)).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &f).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert!(back.max_abs_diff(&f).unwrap() < 1e-15);
    }

    #[test]
    fn csv_two_columns() {
        let text = "x,value\n-1,0\n-0.75,1\n-0.5,2\n-0.25,3\n0,4\n0.25,5\n0.5,6\n0.75,7\n";
        let f = read_csv(text.as_bytes()).unwrap();
        assert_eq!(f.grid().half_width(), 1.0);
        assert_eq!(f.values()[4].re, 4.0);
    }
}
