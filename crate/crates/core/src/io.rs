//! Reading and writing embedding tables.
//!
//! Binary layout (all integers little-endian):
//!
//! | offset | size  | field                              |
//! |--------|-------|------------------------------------|
//! | 0      | 4     | magic `GMPK`                       |
//! | 4      | 4     | version `u32` = 1                  |
//! | 8      | 8     | `n` as `u64`                       |
//! | 16     | 8     | `d` as `u64`                       |
//! | 24     | 1     | dtype: 1 = f64, 2 = f32            |
//! | 25     | 1     | has_labels (0/1)                   |
//! | 26     | 1     | has_flags (0/1)                    |
//! | 27     | 1     | padding, always 0                  |
//! | 28     | n·d·w | scalars, row-major                 |
//! |        | 4·n   | labels as `u32` (if has_labels)    |
//! |        | n     | flags, 0 = CLEAN 1 = CORRUPT (if has_flags) |
//!
//! CSV is headerless: comma-separated decimal scalars, one row per line,
//! optionally followed by an integer label column.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::{EmbeddingSet, Flag};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GMPK";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Binary,
    Csv,
}

impl Format {
    /// `.csv` (any case) is CSV, everything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Binary,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    F64,
    F32,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::F64 => 1,
            Dtype::F32 => 2,
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F64 => 8,
            Dtype::F32 => 4,
        }
    }
}

/// Options that only matter for CSV.
#[derive(Clone, Copy, Debug, Default)]
pub struct CsvOptions {
    /// The last column holds integer group labels.
    pub labels: bool,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Open {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_embeddings(path: &Path, format: Format, csv: CsvOptions) -> Result<EmbeddingSet> {
    let file = open(path)?;
    match format {
        Format::Binary => read_binary(BufReader::new(file)),
        Format::Csv => read_csv(BufReader::new(file), csv),
    }
}

pub fn save_embeddings(set: &EmbeddingSet, path: &Path, format: Format) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        Format::Binary => write_binary(set, &mut w, Dtype::F64)?,
        Format::Csv => write_csv(set, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

pub fn write_binary<W: Write>(set: &EmbeddingSet, w: &mut W, dtype: Dtype) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(set.n() as u64).to_le_bytes())?;
    w.write_all(&(set.d() as u64).to_le_bytes())?;
    w.write_all(&[
        dtype.code(),
        set.labels().is_some() as u8,
        set.flags().is_some() as u8,
        0,
    ])?;
    for &v in set.data() {
        match dtype {
            Dtype::F64 => w.write_all(&v.to_le_bytes())?,
            Dtype::F32 => w.write_all(&(v as f32).to_le_bytes())?,
        }
    }
    if let Some(labels) = set.labels() {
        for &l in labels {
            w.write_all(&l.to_le_bytes())?;
        }
    }
    if let Some(flags) = set.flags() {
        let bytes: Vec<u8> = flags.iter().map(|f| f.to_byte()).collect();
        w.write_all(&bytes)?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<EmbeddingSet> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|_| Error::MalformedHeader("file shorter than header".into()))?;
    if &header[0..4] != MAGIC {
        return Err(Error::MalformedHeader("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::MalformedHeader(format!(
            "unsupported version {version}"
        )));
    }
    let n = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let d = u64::from_le_bytes(header[16..24].try_into().unwrap());
    let dtype = match header[24] {
        1 => Dtype::F64,
        2 => Dtype::F32,
        other => return Err(Error::MalformedHeader(format!("unknown dtype {other}"))),
    };
    let flag_byte = |b: u8, what: &str| match b {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(Error::MalformedHeader(format!("{what} byte is {other}"))),
    };
    let has_labels = flag_byte(header[25], "has_labels")?;
    let has_flags = flag_byte(header[26], "has_flags")?;
    if header[27] != 0 {
        return Err(Error::MalformedHeader("non-zero padding".into()));
    }
    let (n, d) = match (usize::try_from(n), usize::try_from(d)) {
        (Ok(n), Ok(d)) if n >= 1 && d >= 1 && n.checked_mul(d).is_some() => (n, d),
        _ => return Err(Error::MalformedHeader(format!("bad shape {n} x {d}"))),
    };

    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let expected = n * d * dtype.width()
        + if has_labels { 4 * n } else { 0 }
        + if has_flags { n } else { 0 };
    if body.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: body.len(),
        });
    }

    let scalar_bytes = n * d * dtype.width();
    let data: Vec<f64> = match dtype {
        Dtype::F64 => body[..scalar_bytes]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Dtype::F32 => body[..scalar_bytes]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    let mut set = EmbeddingSet::new(data, n, d)?;
    let mut rest = &body[scalar_bytes..];
    if has_labels {
        let labels = rest[..4 * n]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        set = set.with_labels(labels)?;
        rest = &rest[4 * n..];
    }
    if has_flags {
        let flags = rest[..n]
            .iter()
            .map(|&b| {
                Flag::from_byte(b).ok_or_else(|| Error::MalformedHeader(format!("flag byte {b}")))
            })
            .collect::<Result<Vec<_>>>()?;
        set = set.with_flags(flags)?;
    }
    Ok(set)
}

pub fn write_csv<W: Write>(set: &EmbeddingSet, w: &mut W) -> Result<()> {
    for (i, row) in set.rows().enumerate() {
        let mut line = row
            .iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(",");
        if let Some(labels) = set.labels() {
            line.push(',');
            line.push_str(&labels[i].to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(r: R, opts: CsvOptions) -> Result<EmbeddingSet> {
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut n = 0;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::DimensionMismatch {
                    expected: w,
                    found: fields.len(),
                })
            }
            _ => {}
        }
        let (values, label) = if opts.labels {
            let (last, values) = fields.split_last().unwrap();
            let label = last.parse::<u32>().map_err(|_| Error::Parse {
                line: lineno + 1,
                token: last.to_string(),
            })?;
            (values, Some(label))
        } else {
            (&fields[..], None)
        };
        for (col, tok) in values.iter().enumerate() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                token: tok.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row: n, col });
            }
            data.push(v);
        }
        labels.extend(label);
        n += 1;
    }
    let d = width.unwrap_or(0).saturating_sub(opts.labels as usize);
    if n == 0 || d == 0 {
        return Err(Error::MalformedHeader("no data rows".into()));
    }
    let set = EmbeddingSet::new(data, n, d)?;
    if opts.labels {
        set.with_labels(labels)
    } else {
        Ok(set)
    }
}
