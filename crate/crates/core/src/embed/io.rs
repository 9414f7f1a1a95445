//! Table persistence.
//!
//! Two formats:
//! * `text-vec`: header line `|V| d`, then one `token v1 .. vd` line per row.
//! * `binary`: magic `CEMB`, u32 version = 1, u32 |V|, u32 d, little-endian
//!   f32 rows, then length-prefixed (u32) UTF-8 tokens.
//!
//! Binary save/load round-trips bit-exactly. Rows whose norm drifts are
//! re-projected to the sphere on load; deviations beyond 1e-3 are counted in
//! [`LoadStats`] so callers can surface a warning.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EmbeddingTable, TableKind, Vocab, ROW_NORM_TOL};
use crate::error::{Error, Result};
use crate::vecmath::norm_f32;

const MAGIC: &[u8; 4] = b"CEMB";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    TextVec,
    Binary,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text-vec" | "text" => Ok(TableFormat::TextVec),
            "binary" | "bin" => Ok(TableFormat::Binary),
            other => Err(Error::invalid(format!("unknown table format `{other}`"))),
        }
    }
}

/// What load had to clean up.
#[derive(Debug, Clone, Default)]
pub struct LoadStats {
    /// Rows renormalized with norm deviation beyond 1e-3 (warn-worthy).
    pub renormalized_rows: usize,
    /// Worst observed |norm - 1| before renormalization.
    pub max_norm_deviation: f64,
}

impl LoadStats {
    pub fn warn_worthy(&self) -> bool {
        self.renormalized_rows > 0
    }
}

pub fn save_table(
    table: &EmbeddingTable,
    tokens: &[String],
    path: impl AsRef<Path>,
    format: TableFormat,
) -> Result<()> {
    if tokens.len() != table.len() {
        return Err(Error::invalid(format!(
            "token count {} != table rows {}",
            tokens.len(),
            table.len()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        TableFormat::TextVec => {
            writeln!(w, "{} {}", table.len(), table.dim())?;
            for (tok, row) in tokens.iter().zip(table.iter_rows()) {
                write!(w, "{tok}")?;
                for x in row {
                    // shortest round-trip representation keeps text exact
                    write!(w, " {x:e}")?;
                }
                writeln!(w)?;
            }
        }
        TableFormat::Binary => {
            w.write_all(MAGIC)?;
            w.write_all(&VERSION.to_le_bytes())?;
            w.write_all(&(table.len() as u32).to_le_bytes())?;
            w.write_all(&(table.dim() as u32).to_le_bytes())?;
            for x in table.rows_flat() {
                w.write_all(&x.to_le_bytes())?;
            }
            for tok in tokens {
                let bytes = tok.as_bytes();
                w.write_all(&(bytes.len() as u32).to_le_bytes())?;
                w.write_all(bytes)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_table(
    path: impl AsRef<Path>,
    format: TableFormat,
) -> Result<(EmbeddingTable, Vec<String>, LoadStats)> {
    match format {
        TableFormat::TextVec => load_text(path.as_ref()),
        TableFormat::Binary => load_binary(path.as_ref()),
    }
}

/// Validate coordinates, renormalize drifted rows, track stats.
fn finish_rows(
    d: usize,
    mut rows: Vec<f32>,
    tokens: Vec<String>,
    where_of_row: impl Fn(usize) -> String,
) -> Result<(EmbeddingTable, Vec<String>, LoadStats)> {
    let mut stats = LoadStats::default();
    let mut seen = HashSet::with_capacity(tokens.len());
    for (i, tok) in tokens.iter().enumerate() {
        if !seen.insert(tok.as_str()) {
            return Err(Error::parse(where_of_row(i), format!("duplicate token `{tok}`")));
        }
    }
    for (i, row) in rows.chunks_exact_mut(d).enumerate() {
        if let Some(j) = row.iter().position(|x| !x.is_finite()) {
            return Err(Error::parse(
                where_of_row(i),
                format!("coordinate {j} is NaN or infinite"),
            ));
        }
        let n = norm_f32(row);
        if n <= 1e-12 {
            return Err(Error::parse(where_of_row(i), "row has zero norm".to_string()));
        }
        let dev = (n - 1.0).abs();
        if dev > stats.max_norm_deviation {
            stats.max_norm_deviation = dev;
        }
        if dev > ROW_NORM_TOL {
            if dev > 1e-3 {
                stats.renormalized_rows += 1;
            }
            for x in row.iter_mut() {
                *x = (*x as f64 / n) as f32;
            }
        }
    }
    let table = EmbeddingTable::from_rows(d, rows, TableKind::Imported, None)?;
    Ok((table, tokens, stats))
}

fn load_text(path: &Path) -> Result<(EmbeddingTable, Vec<String>, LoadStats)> {
    let loc = |line: usize| format!("{}:{}", path.display(), line);
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(loc(1), "empty file".to_string()))?;
    let header = header?;
    let mut parts = header.split_whitespace();
    let n: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(loc(1), format!("bad header `{header}`, expected `|V| d`")))?;
    let d: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(loc(1), format!("bad header `{header}`, expected `|V| d`")))?;
    if parts.next().is_some() {
        return Err(Error::parse(loc(1), format!("trailing fields in header `{header}`")));
    }
    if n == 0 || d < 2 {
        return Err(Error::parse(loc(1), format!("invalid header sizes |V|={n} d={d}")));
    }
    let mut tokens = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n * d);
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if tokens.len() == n {
            return Err(Error::parse(loc(lineno), format!("more than {n} rows")));
        }
        let mut fields = line.split_whitespace();
        let tok = fields
            .next()
            .ok_or_else(|| Error::parse(loc(lineno), "missing token".to_string()))?;
        let mut count = 0;
        for f in fields {
            let v: f32 = f.parse().map_err(|_| {
                Error::parse(loc(lineno), format!("bad coordinate `{f}`"))
            })?;
            rows.push(v);
            count += 1;
        }
        if count != d {
            return Err(Error::parse(
                loc(lineno),
                format!("row has {count} coordinates, expected {d}"),
            ));
        }
        tokens.push(tok.to_string());
    }
    if tokens.len() != n {
        return Err(Error::parse(
            format!("{}:EOF", path.display()),
            format!("header promised {n} rows, found {}", tokens.len()),
        ));
    }
    finish_rows(d, rows, tokens, |i| format!("{}:{}", path.display(), i + 2))
}

fn read_u32(r: &mut impl Read, path: &Path, offset: &mut usize, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|_| {
        Error::parse(
            format!("{}:0x{:x}", path.display(), *offset),
            format!("truncated while reading {what}"),
        )
    })?;
    *offset += 4;
    Ok(u32::from_le_bytes(buf))
}

fn load_binary(path: &Path) -> Result<(EmbeddingTable, Vec<String>, LoadStats)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut offset = 0usize;
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::parse(format!("{}:0x0", path.display()), "truncated magic".to_string()))?;
    offset += 4;
    if &magic != MAGIC {
        return Err(Error::parse(
            format!("{}:0x0", path.display()),
            format!("bad magic {magic:?}, expected `CEMB`"),
        ));
    }
    let version = read_u32(&mut r, path, &mut offset, "version")?;
    if version != VERSION {
        return Err(Error::parse(
            format!("{}:0x4", path.display()),
            format!("unsupported version {version}"),
        ));
    }
    let n = read_u32(&mut r, path, &mut offset, "|V|")? as usize;
    let d = read_u32(&mut r, path, &mut offset, "d")? as usize;
    if n == 0 || d < 2 {
        return Err(Error::parse(
            format!("{}:0x8", path.display()),
            format!("invalid sizes |V|={n} d={d}"),
        ));
    }
    let mut raw = vec![0u8; n * d * 4];
    r.read_exact(&mut raw).map_err(|_| {
        Error::parse(
            format!("{}:0x{:x}", path.display(), offset),
            format!("truncated row data, expected {} bytes", n * d * 4),
        )
    })?;
    offset += raw.len();
    let rows: Vec<f32> = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let mut tokens = Vec::with_capacity(n);
    for i in 0..n {
        let len = read_u32(&mut r, path, &mut offset, &format!("token {i} length"))? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(|_| {
            Error::parse(
                format!("{}:0x{:x}", path.display(), offset),
                format!("truncated token {i}"),
            )
        })?;
        offset += len;
        let tok = String::from_utf8(buf).map_err(|_| {
            Error::parse(
                format!("{}:0x{:x}", path.display(), offset),
                format!("token {i} is not valid UTF-8"),
            )
        })?;
        tokens.push(tok);
    }
    finish_rows(d, rows, tokens, |i| format!("{}:row {}", path.display(), i))
}

/// Frequency file: `token<TAB>count` per line.
pub fn save_vocab(vocab: &Vocab, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for i in 0..vocab.len() {
        writeln!(w, "{}\t{}", vocab.token(i), vocab.freq(i))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_vocab(path: impl AsRef<Path>) -> Result<Vocab> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut tokens = Vec::new();
    let mut freqs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (tok, cnt) = line.split_once('\t').ok_or_else(|| {
            Error::parse(
                format!("{}:{}", path.display(), idx + 1),
                "expected `token<TAB>count`".to_string(),
            )
        })?;
        let freq: u64 = cnt.trim().parse().map_err(|_| {
            Error::parse(
                format!("{}:{}", path.display(), idx + 1),
                format!("bad count `{cnt}`"),
            )
        })?;
        tokens.push(tok.to_string());
        freqs.push(freq);
    }
    Vocab::new(tokens, freqs)
}
