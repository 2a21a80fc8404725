//! Field snapshots: a text header `NSMILD1 m N L` and a newline, then the
//! components as little-endian `f64`, one after another, each row-major.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use nsmild_core::{GridSpec, VectorField};

pub const MAGIC: &str = "NSMILD1";

pub fn write_snapshot<W: Write>(mut out: W, field: &VectorField) -> Result<()> {
    let g = field.grid();
    writeln!(out, "{MAGIC} {} {} {}", g.dim(), g.points_per_axis(), g.box_length())?;
    for comp in field.components() {
        let mut buf = Vec::with_capacity(comp.len() * 8);
        for v in comp {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(input: R) -> Result<VectorField> {
    let mut reader = BufReader::new(input);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let parts: Vec<&str> = header.trim_end_matches('\n').split(' ').collect();
    if parts.len() != 4 || parts[0] != MAGIC {
        bail!("not a snapshot: header {header:?}");
    }
    let m: usize = parts[1].parse().context("dimension")?;
    let n: usize = parts[2].parse().context("points per axis")?;
    let l: f64 = parts[3].parse().context("box length")?;
    let grid = GridSpec::new(m, n, l)?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * m * grid.len() {
        bail!("snapshot body has {} bytes, expected {}", bytes.len(), 8 * m * grid.len());
    }
    let components = bytes
        .chunks_exact(8 * grid.len())
        .map(|c| {
            c.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                .collect()
        })
        .collect();
    Ok(VectorField::new(grid, components)?)
}

pub fn save(path: &Path, field: &VectorField) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    write_snapshot(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<VectorField> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_snapshot(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nsmild_core::samples::random_smooth_field;

    #[test]
    fn snapshot_header_and_body_are_exact() {
        let g = GridSpec::cube(8, 2.5).unwrap();
        let f = random_smooth_field(g, 3, 4, 2.0);
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &f).unwrap();
        let header = b"NSMILD1 3 8 2.5\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 3 * 512 * 8);
        let first = f64::from_le_bytes(bytes[header.len()..header.len() + 8].try_into().unwrap());
        assert_eq!(first, f.component(0)[0]);
        let second_comp = header.len() + 512 * 8;
        let v = f64::from_le_bytes(bytes[second_comp..second_comp + 8].try_into().unwrap());
        assert_eq!(v, f.component(1)[0]);
        let back = read_snapshot(&bytes[..]).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert_eq!(back.components(), f.components());
        assert!(read_snapshot(&b"NSMILD2 3 8 2.5\n"[..]).is_err());
        assert!(read_snapshot(&bytes[..bytes.len() - 8]).is_err());
    }
}
