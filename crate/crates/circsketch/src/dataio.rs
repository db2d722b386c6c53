//! Matrix files and factor files.
//!
//! Two matrix formats are supported:
//!
//! - CSV: one row per line, comma separated, `.` as decimal point. Lines
//!   starting with `#` are ignored.
//! - RBM: the bytes `RBM1`, then rows and cols as little-endian `u64`, then
//!   `rows * cols` little-endian `f64` values in row-major order.
//!
//! Written numbers use the shortest decimal that parses back to the same
//! `f64`, so CSV round trips are exact.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use circsketch_core::learner::CompressedFactors;
use circsketch_core::{DenseMatrix, Generator};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RBM_MAGIC: &[u8; 4] = b"RBM1";
const RBM_HEADER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    Csv,
    Rbm,
}

impl MatrixFormat {
    /// Guesses the format from the file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Ok(MatrixFormat::Csv),
            Some(e) if e.eq_ignore_ascii_case("rbm") => Ok(MatrixFormat::Rbm),
            _ => Err(Error::format(
                path,
                "cannot infer matrix format from extension (expected .csv or .rbm)",
            )),
        }
    }

    fn resolve(format: Option<Self>, path: &Path) -> Result<Self> {
        format.map_or_else(|| Self::from_path(path), Ok)
    }
}

/// Shortest round-trip decimal for `v`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn load_matrix(path: &Path, format: Option<MatrixFormat>) -> Result<DenseMatrix> {
    match MatrixFormat::resolve(format, path)? {
        MatrixFormat::Csv => load_csv(path),
        MatrixFormat::Rbm => load_rbm(path),
    }
}

pub fn save_matrix(mat: &DenseMatrix, path: &Path, format: Option<MatrixFormat>) -> Result<()> {
    match MatrixFormat::resolve(format, path)? {
        MatrixFormat::Csv => save_csv(mat, path),
        MatrixFormat::Rbm => save_rbm(mat, path),
    }
}

fn load_csv(path: &Path) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path)
}

/// Parses CSV matrix text; `path` is only used in error messages.
pub fn parse_csv(text: &str, path: &Path) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    column: record.len().min(c) + 1,
                    message: format!("expected {c} fields, found {}", record.len()),
                });
            }
            Some(_) => {}
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: path.into(),
                line,
                column: j + 1,
                message: format!("not a number: {field:?}"),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::format(path, "no data rows"))?;
    Ok(DenseMatrix::from_vec(rows, cols, data)?)
}

fn save_csv(mat: &DenseMatrix, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    for i in 0..mat.rows() {
        let line: Vec<String> = mat.row(i).iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn load_rbm(path: &Path) -> Result<DenseMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_rbm(&bytes, path)
}

/// Decodes RBM bytes; `path` is only used in error messages.
pub fn decode_rbm(bytes: &[u8], path: &Path) -> Result<DenseMatrix> {
    if bytes.len() < RBM_HEADER || &bytes[..4] != RBM_MAGIC {
        return Err(Error::format(path, "missing RBM1 magic"));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let (rows, cols) = (word(4), word(12));
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(RBM_HEADER as u64));
    if expected != Some(bytes.len() as u64) {
        return Err(Error::format(
            path,
            format!(
                "{rows}x{cols} matrix needs {} bytes, file has {}",
                expected.map_or_else(|| "too many".to_string(), |e| e.to_string()),
                bytes.len()
            ),
        ));
    }
    let data = bytes[RBM_HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DenseMatrix::from_vec(rows as usize, cols as usize, data)?)
}

pub fn encode_rbm(mat: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(RBM_HEADER + 8 * mat.as_slice().len());
    out.extend_from_slice(RBM_MAGIC);
    out.extend_from_slice(&(mat.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(mat.cols() as u64).to_le_bytes());
    for v in mat.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn save_rbm(mat: &DenseMatrix, path: &Path) -> Result<()> {
    fs::write(path, encode_rbm(mat)).map_err(|e| Error::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Serialized form of compressed factors and their generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorsFile {
    pub n: usize,
    pub m: usize,
    pub m_prime: usize,
    pub shift_indices: Vec<usize>,
    /// `m x m'`, one inner list per row.
    pub p: Vec<Vec<f64>>,
    pub generator: Vec<f64>,
}

impl FactorsFile {
    pub fn new(cf: &CompressedFactors, gen: &Generator) -> Self {
        let p = cf.p();
        Self {
            n: cf.n(),
            m: cf.m(),
            m_prime: cf.m_prime(),
            shift_indices: cf.shift_indices().to_vec(),
            p: (0..p.rows()).map(|i| p.row(i).to_vec()).collect(),
            generator: gen.as_slice().to_vec(),
        }
    }

    pub fn into_parts(self) -> Result<(CompressedFactors, Generator)> {
        if self.shift_indices.len() != self.m_prime || self.p.len() != self.m {
            return Err(Error::Invalid(
                "factor file sizes disagree with m and m_prime".into(),
            ));
        }
        let p = DenseMatrix::from_rows(&self.p)?;
        let cf = CompressedFactors::new(p, self.shift_indices, self.n)?;
        Ok((cf, Generator::new(self.generator)?))
    }
}

pub fn save_factors(file: &FactorsFile, path: &Path) -> Result<()> {
    write_json(file, path)
}

pub fn load_factors(path: &Path) -> Result<(CompressedFactors, Generator)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: FactorsFile =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    file.into_parts()
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Writes a CSV table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use circsketch_core::rng;

    #[test]
    fn rbm_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.rbm");
        let mut a = rng::gaussian_matrix(&mut rng::seeded(1), 7, 13);
        a.set(0, 0, -0.0);
        a.set(1, 1, f64::MIN_POSITIVE / 3.0);
        save_matrix(&a, &path, None).unwrap();
        let b = load_matrix(&path, None).unwrap();
        let bits = |m: &DenseMatrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(b.shape(), (7, 13));
    }

    #[test]
    fn rbm_layout() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let bytes = encode_rbm(&a);
        assert_eq!(&bytes[..4], b"RBM1");
        assert_eq!(bytes[4..12], 1u64.to_le_bytes());
        assert_eq!(bytes[12..20], 2u64.to_le_bytes());
        assert_eq!(bytes[20..28], 1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 36);
    }

    #[test]
    fn rbm_rejects_bad_magic_and_length() {
        let p = Path::new("x.rbm");
        let mut bytes = encode_rbm(&DenseMatrix::identity(2));
        assert!(decode_rbm(&bytes[..bytes.len() - 1], p).is_err());
        bytes[0] = b'X';
        assert!(matches!(decode_rbm(&bytes, p), Err(Error::Format { .. })));
    }

    #[test]
    fn csv_parses_simple_text() {
        let m = parse_csv("1,2\n3,4", Path::new("t.csv")).unwrap();
        assert_eq!(m, DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let h = parse_csv("# header\n1.5, -2e3\n", Path::new("t.csv")).unwrap();
        assert_eq!(h.as_slice(), &[1.5, -2000.0]);
    }

    #[test]
    fn ragged_csv_names_the_line() {
        let err = parse_csv("1,2\n3,4\n5\n", Path::new("t.csv")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let msg = parse_csv("1,2\nx,4\n", Path::new("t.csv")).unwrap_err().to_string();
        assert!(msg.contains("line 2, column 1"), "{msg}");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let a = rng::gaussian_matrix(&mut rng::seeded(2), 5, 9).scaled(1e-7);
        save_matrix(&a, &path, None).unwrap();
        assert_eq!(load_matrix(&path, None).unwrap(), a);
    }

    #[test]
    fn unknown_extension_needs_explicit_format() {
        assert!(MatrixFormat::from_path(Path::new("a.txt")).is_err());
        assert_eq!(
            MatrixFormat::from_path(Path::new("a.RBM")).unwrap(),
            MatrixFormat::Rbm
        );
    }

    #[test]
    fn factors_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.json");
        let p = rng::gaussian_matrix(&mut rng::seeded(3), 2, 3);
        let cf = CompressedFactors::new(p, vec![1, 4, 6], 8).unwrap();
        let gen = Generator::new(rng::gaussian_vec(&mut rng::seeded(4), 8)).unwrap();
        save_factors(&FactorsFile::new(&cf, &gen), &path).unwrap();
        let (cf2, gen2) = load_factors(&path).unwrap();
        assert_eq!(cf2, cf);
        assert_eq!(gen2, gen);
    }
}
