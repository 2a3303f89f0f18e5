//! File formats.
//!
//! Grid files (`SSTG`) hold one `rows × cols` block of real or complex
//! values per node of a uniform grid. Path files (`SSTP`) hold an SDE
//! ensemble path by path. Both are little-endian with 64-bit floats, carry
//! the crate version string in the header, and get a JSON descriptor next to
//! them (`<file>.json`).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{MetricField, Signature};
use crate::grid::{Axis, GridSpec};
use crate::sde::PathEnsemble;
use crate::VERSION;

const GRID_MAGIC: &[u8; 4] = b"SSTG";
const PATH_MAGIC: &[u8; 4] = b"SSTP";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Real,
    /// Interleaved real and imaginary parts.
    Complex,
}

/// Contents of a grid file.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub grid: GridSpec,
    pub rows: usize,
    pub cols: usize,
    pub kind: ValueKind,
    pub version: String,
    pub data: Vec<f64>,
}

impl GridFile {
    pub fn scalar(grid: GridSpec, values: Vec<f64>) -> Self {
        GridFile {
            grid,
            rows: 1,
            cols: 1,
            kind: ValueKind::Real,
            version: VERSION.to_string(),
            data: values,
        }
    }

    pub fn complex(grid: GridSpec, values: &[Complex64]) -> Self {
        GridFile {
            grid,
            rows: 1,
            cols: 1,
            kind: ValueKind::Complex,
            version: VERSION.to_string(),
            data: values.iter().flat_map(|v| [v.re, v.im]).collect(),
        }
    }

    pub fn metric(metric: &MetricField) -> Self {
        GridFile {
            grid: metric.grid().clone(),
            rows: metric.dim(),
            cols: metric.dim(),
            kind: ValueKind::Real,
            version: VERSION.to_string(),
            data: metric.data().to_vec(),
        }
    }

    /// Per-node block of any shape.
    pub fn blocks(grid: GridSpec, rows: usize, cols: usize, data: Vec<f64>) -> Self {
        GridFile {
            grid,
            rows,
            cols,
            kind: ValueKind::Real,
            version: VERSION.to_string(),
            data,
        }
    }

    fn expected_len(&self) -> usize {
        let per = self.rows * self.cols * if self.kind == ValueKind::Complex { 2 } else { 1 };
        self.grid.len() * per
    }

    pub fn to_metric(&self, signature: Signature) -> Result<MetricField> {
        if self.kind != ValueKind::Real || self.rows != self.cols {
            return Err(Error::invalid("metric files hold square real blocks"));
        }
        MetricField::new(self.grid.clone(), self.rows, signature, self.data.clone())
    }

    pub fn to_scalar(&self) -> Result<Vec<f64>> {
        if self.kind != ValueKind::Real || self.rows * self.cols != 1 {
            return Err(Error::invalid("grid file does not hold a real scalar field"));
        }
        Ok(self.data.clone())
    }

    pub fn to_complex(&self) -> Result<Vec<Complex64>> {
        if self.kind != ValueKind::Complex {
            return Err(Error::invalid("grid file holds real values"));
        }
        Ok(self.data.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
    }
}

/// JSON descriptor written next to every binary file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub format: String,
    pub version: String,
    pub kind: Option<ValueKind>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub axes: Vec<Axis>,
    pub shape: Vec<usize>,
    pub values: usize,
}

pub fn descriptor_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

struct Reader<'a> {
    path: &'a Path,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format {
                path: self.path.display().to_string(),
                reason: format!("truncated at byte {}", self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| self.bad("version string is not UTF-8"))
    }
    fn bad(&self, reason: &str) -> Error {
        Error::Format {
            path: self.path.display().to_string(),
            reason: reason.to_string(),
        }
    }
    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| self.bad("size overflow"))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend((s.len() as u32).to_le_bytes());
    out.extend(s.as_bytes());
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn write_descriptor(path: &Path, d: &Descriptor) -> Result<()> {
    let text = serde_json::to_string_pretty(d)?;
    write_bytes(&descriptor_path(path), text.as_bytes())
}

pub fn encode_grid(file: &GridFile) -> Result<Vec<u8>> {
    if file.data.len() != file.expected_len() {
        return Err(Error::GridMismatch(format!(
            "grid file needs {} values, has {}",
            file.expected_len(),
            file.data.len()
        )));
    }
    let mut out = Vec::with_capacity(64 + file.data.len() * 8);
    out.extend(GRID_MAGIC);
    out.extend(FORMAT_VERSION.to_le_bytes());
    put_str(&mut out, &file.version);
    out.extend((file.grid.rank() as u32).to_le_bytes());
    out.extend((file.rows as u32).to_le_bytes());
    out.extend((file.cols as u32).to_le_bytes());
    out.extend(match file.kind {
        ValueKind::Real => 0u32,
        ValueKind::Complex => 1u32,
    }
    .to_le_bytes());
    for a in file.grid.axes() {
        out.extend((a.nodes as u64).to_le_bytes());
        out.extend(a.start.to_le_bytes());
        out.extend(a.end.to_le_bytes());
    }
    for v in &file.data {
        out.extend(v.to_le_bytes());
    }
    Ok(out)
}

pub fn write_grid(path: &Path, file: &GridFile) -> Result<()> {
    let bytes = encode_grid(file)?;
    write_bytes(path, &bytes)?;
    write_descriptor(
        path,
        &Descriptor {
            format: "grid".into(),
            version: file.version.clone(),
            kind: Some(file.kind),
            rows: Some(file.rows),
            cols: Some(file.cols),
            axes: file.grid.axes().to_vec(),
            shape: file.grid.shape(),
            values: file.data.len(),
        },
    )
}

pub fn decode_grid(path: &Path, bytes: &[u8]) -> Result<GridFile> {
    let mut r = Reader { path, buf: bytes, pos: 0 };
    if r.take(4)? != GRID_MAGIC {
        return Err(r.bad("not a grid file"));
    }
    let fv = r.u32()?;
    if fv != FORMAT_VERSION {
        return Err(r.bad(&format!("unsupported format version {fv}")));
    }
    let version = r.string()?;
    let rank = r.u32()? as usize;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let kind = match r.u32()? {
        0 => ValueKind::Real,
        1 => ValueKind::Complex,
        k => return Err(r.bad(&format!("unknown value kind {k}"))),
    };
    if rank == 0 || rank > 8 {
        return Err(r.bad(&format!("implausible rank {rank}")));
    }
    let mut axes = Vec::with_capacity(rank);
    for _ in 0..rank {
        let nodes = r.u64()? as usize;
        let start = r.f64()?;
        let end = r.f64()?;
        axes.push(Axis::new(start, end, nodes));
    }
    let grid = GridSpec::new(axes).map_err(|e| r.bad(&e.to_string()))?;
    let mut file = GridFile {
        grid,
        rows,
        cols,
        kind,
        version,
        data: Vec::new(),
    };
    file.data = r.floats(file.expected_len())?;
    if r.pos != bytes.len() {
        return Err(r.bad("trailing bytes after data"));
    }
    Ok(file)
}

pub fn read_grid(path: &Path) -> Result<GridFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_grid(path, &bytes)
}

pub fn encode_paths(ens: &PathEnsemble) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + ens.data.len() * 8);
    out.extend(PATH_MAGIC);
    out.extend(FORMAT_VERSION.to_le_bytes());
    put_str(&mut out, VERSION);
    out.extend((ens.paths as u64).to_le_bytes());
    out.extend((ens.steps as u64).to_le_bytes());
    out.extend((ens.dim as u64).to_le_bytes());
    out.extend(ens.dt.to_le_bytes());
    for v in &ens.data {
        out.extend(v.to_le_bytes());
    }
    out
}

/// Ensemble file: per path, `(steps + 1) × dim` values.
pub fn write_paths(path: &Path, ens: &PathEnsemble) -> Result<()> {
    write_bytes(path, &encode_paths(ens))?;
    write_descriptor(
        path,
        &Descriptor {
            format: "paths".into(),
            version: VERSION.into(),
            kind: None,
            rows: None,
            cols: None,
            axes: Vec::new(),
            shape: vec![ens.paths, ens.steps + 1, ens.dim],
            values: ens.data.len(),
        },
    )
}

pub fn read_paths(path: &Path) -> Result<PathEnsemble> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        path,
        buf: &bytes,
        pos: 0,
    };
    if r.take(4)? != PATH_MAGIC {
        return Err(r.bad("not a path file"));
    }
    if r.u32()? != FORMAT_VERSION {
        return Err(r.bad("unsupported format version"));
    }
    let _version = r.string()?;
    let paths = r.u64()? as usize;
    let steps = r.u64()? as usize;
    let dim = r.u64()? as usize;
    let dt = r.f64()?;
    let n = paths
        .checked_mul(steps + 1)
        .and_then(|v| v.checked_mul(dim))
        .ok_or_else(|| r.bad("size overflow"))?;
    let data = r.floats(n)?;
    if r.pos != bytes.len() {
        return Err(r.bad("trailing bytes after data"));
    }
    Ok(PathEnsemble {
        paths,
        steps,
        dim,
        dt,
        data,
    })
}

/// `path,step,s,x0,x1,…` with one row per recorded state.
pub fn paths_csv(ens: &PathEnsemble) -> String {
    let mut out = String::from("path,step,s");
    for c in 0..ens.dim {
        out.push_str(&format!(",x{c}"));
    }
    out.push('\n');
    for p in 0..ens.paths {
        for k in 0..=ens.steps {
            out.push_str(&format!("{p},{k},{}", k as f64 * ens.dt));
            for c in 0..ens.dim {
                out.push_str(&format!(",{}", ens.value(p, k, c)));
            }
            out.push('\n');
        }
    }
    out
}

/// Coordinates followed by the per-node values.
pub fn grid_csv(grid: &GridSpec, columns: &[(&str, &[f64])]) -> String {
    let mut out = String::new();
    let names: Vec<String> = (0..grid.rank()).map(|k| format!("c{k}")).collect();
    out.push_str(&names.join(","));
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for n in 0..grid.len() {
        let coords: Vec<String> = grid.coords(n).iter().map(|c| c.to_string()).collect();
        out.push_str(&coords.join(","));
        for (_, v) in columns {
            out.push_str(&format!(",{}", v[n]));
        }
        out.push('\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::world_volume((0.0, 1.0, 3), (-1.0, 1.0, 4), (0.0, 2.0, 3)).unwrap();
        let m = MetricField::from_fn(g.clone(), 3, Signature::Riemannian, |x| {
            vec![1.0 + x[0], 0.1, 0.0, 0.1, 2.0, 0.0, 0.0, 0.0, 3.0 + x[2]]
        })
        .unwrap();
        let p = dir.path().join("m.bin");
        write_grid(&p, &GridFile::metric(&m)).unwrap();
        let back = read_grid(&p).unwrap().to_metric(Signature::Riemannian).unwrap();
        assert_eq!(back, m);
        let d: Descriptor = serde_json::from_str(&read_text(&descriptor_path(&p)).unwrap()).unwrap();
        assert_eq!(d.version, VERSION);
        assert_eq!(d.shape, vec![3, 4, 3]);
    }

    #[test]
    fn complex_round_trip() {
        let g = GridSpec::new(vec![Axis::new(0.0, 1.0, 3), Axis::new(0.0, 1.0, 3)]).unwrap();
        let v: Vec<Complex64> = (0..9).map(|i| Complex64::new(i as f64, -0.5 * i as f64)).collect();
        let bytes = encode_grid(&GridFile::complex(g, &v)).unwrap();
        let back = decode_grid(Path::new("mem"), &bytes).unwrap();
        assert_eq!(back.to_complex().unwrap(), v);
    }

    #[test]
    fn corrupt_files_rejected() {
        let g = GridSpec::new(vec![Axis::new(0.0, 1.0, 3)]).unwrap();
        let bytes = encode_grid(&GridFile::scalar(g, vec![1.0, 2.0, 3.0])).unwrap();
        assert!(decode_grid(Path::new("x"), &bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_grid(Path::new("x"), &bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(decode_grid(Path::new("x"), &long).is_err());
    }

    #[test]
    fn paths_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ens = PathEnsemble {
            paths: 2,
            steps: 3,
            dim: 2,
            dt: 0.25,
            data: (0..16).map(|i| i as f64 * 0.5).collect(),
        };
        let p = dir.path().join("p.bin");
        write_paths(&p, &ens).unwrap();
        let back = read_paths(&p).unwrap();
        assert_eq!(back.data, ens.data);
        assert_eq!((back.paths, back.steps, back.dim, back.dt), (2, 3, 2, 0.25));
        let csv = paths_csv(&ens);
        assert_eq!(csv.lines().count(), 1 + 2 * 4);
    }

    #[test]
    fn hashes_are_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
