//! Matrix Market coordinate format (real / integer / pattern; general or
//! symmetric).

use std::io::{BufRead, Write};

use crate::error::{Error, ParseErrorKind, Result};
use crate::matrix::{IndexWidth, SparseBlock};
use crate::precision::Precision;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtxField {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtxSymmetry {
    General,
    Symmetric,
}

/// The banner and size line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MtxHeader {
    pub rows: usize,
    pub cols: usize,
    pub declared_entries: u64,
    pub field: MtxField,
    pub symmetry: MtxSymmetry,
}

/// A parsed coordinate matrix: 0-based, sorted, duplicates summed.
#[derive(Debug, Clone)]
pub struct MtxMatrix {
    pub header: MtxHeader,
    pub entries: SparseBlock,
}

impl MtxMatrix {
    pub fn nnz(&self) -> usize {
        self.entries.nnz()
    }
}

fn perr(line: usize, kind: ParseErrorKind) -> Error {
    Error::Parse { line, kind }
}

fn parse_banner(line: &str, lineno: usize) -> Result<(MtxField, MtxSymmetry)> {
    let words: Vec<String> = line.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(perr(lineno, ParseErrorKind::Header(line.trim().to_string())));
    }
    if words[2] != "coordinate" {
        return Err(perr(lineno, ParseErrorKind::Unsupported(words[2].clone())));
    }
    let field = match words[3].as_str() {
        "real" | "double" => MtxField::Real,
        "integer" => MtxField::Integer,
        "pattern" => MtxField::Pattern,
        other => return Err(perr(lineno, ParseErrorKind::Unsupported(other.to_string()))),
    };
    let symmetry = match words[4].as_str() {
        "general" => MtxSymmetry::General,
        "symmetric" => MtxSymmetry::Symmetric,
        other => return Err(perr(lineno, ParseErrorKind::Unsupported(other.to_string()))),
    };
    Ok((field, symmetry))
}

fn num<T: std::str::FromStr>(tok: Option<&str>, lineno: usize) -> Result<T> {
    let tok = tok.ok_or_else(|| perr(lineno, ParseErrorKind::NotANumber("<missing>".into())))?;
    tok.parse()
        .map_err(|_| perr(lineno, ParseErrorKind::NotANumber(tok.to_string())))
}

/// Read only the banner and size line.
pub fn read_mtx_header<R: BufRead>(reader: &mut R) -> Result<(MtxHeader, usize)> {
    let mut line = String::new();
    let mut lineno = 0;
    let mut banner = None;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| Error::io("<matrix market>", e))?;
        lineno += 1;
        if n == 0 {
            return Err(perr(lineno, ParseErrorKind::Header("missing size line".into())));
        }
        if banner.is_none() {
            banner = Some(parse_banner(&line, lineno)?);
            continue;
        }
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut toks = t.split_ascii_whitespace();
        let rows: usize = num(toks.next(), lineno)?;
        let cols: usize = num(toks.next(), lineno)?;
        let declared_entries: u64 = num(toks.next(), lineno)?;
        if toks.next().is_some() || rows == 0 || cols == 0 {
            return Err(perr(lineno, ParseErrorKind::Header(t.to_string())));
        }
        let (field, symmetry) = banner.unwrap();
        if symmetry == MtxSymmetry::Symmetric && rows != cols {
            return Err(perr(lineno, ParseErrorKind::Header("symmetric matrix must be square".into())));
        }
        return Ok((
            MtxHeader {
                rows,
                cols,
                declared_entries,
                field,
                symmetry,
            },
            lineno,
        ));
    }
}

/// Parse a coordinate Matrix Market body into a sorted sparse block.
pub fn parse_matrix_market<R: BufRead>(mut reader: R, precision: Precision) -> Result<MtxMatrix> {
    let (header, mut lineno) = read_mtx_header(&mut reader)?;
    let width = IndexWidth::for_shape(header.rows, header.cols);
    let cap = header.declared_entries.min(1 << 26) as usize;
    let mut triples: Vec<(u64, u64, f64)> = Vec::with_capacity(cap);
    let mut found = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| Error::io("<matrix market>", e))?;
        if n == 0 {
            break;
        }
        lineno += 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        found += 1;
        if found > header.declared_entries {
            return Err(perr(
                lineno,
                ParseErrorKind::CountMismatch {
                    declared: header.declared_entries,
                    found,
                },
            ));
        }
        let mut toks = t.split_ascii_whitespace();
        let i: u64 = num(toks.next(), lineno)?;
        let j: u64 = num(toks.next(), lineno)?;
        let v: f64 = match header.field {
            MtxField::Pattern => 1.0,
            _ => num(toks.next(), lineno)?,
        };
        if i == 0 || j == 0 || i > header.rows as u64 || j > header.cols as u64 {
            return Err(perr(
                lineno,
                ParseErrorKind::IndexOutOfBounds {
                    row: i,
                    col: j,
                    rows: header.rows as u64,
                    cols: header.cols as u64,
                },
            ));
        }
        let (r, c) = (i - 1, j - 1);
        triples.push((r, c, v));
        if header.symmetry == MtxSymmetry::Symmetric && r != c {
            triples.push((c, r, v));
        }
    }
    if found != header.declared_entries {
        return Err(perr(
            lineno + 1,
            ParseErrorKind::CountMismatch {
                declared: header.declared_entries,
                found,
            },
        ));
    }
    let entries = SparseBlock::from_triples(0..header.rows, 0..header.cols, triples, precision, width)?;
    Ok(MtxMatrix { header, entries })
}

/// Serialize as `coordinate real general`, 1-based, shortest round-trip
/// decimal values.
pub fn write_matrix_market<W: Write>(block: &SparseBlock, rows: usize, cols: usize, mut w: W) -> Result<()> {
    let io = |e| Error::io("<matrix market>", e);
    writeln!(w, "%%MatrixMarket matrix coordinate real general").map_err(io)?;
    writeln!(w, "{} {} {}", rows, cols, block.nnz()).map_err(io)?;
    for (r, c, v) in block.triples() {
        writeln!(w, "{} {} {}", r + 1, c + 1, v).map_err(io)?;
    }
    w.flush().map_err(io)
}
