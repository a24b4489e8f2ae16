//! File formats.
//!
//! * Features as CSV (one row per node, optional single header row) or as the
//!   raw binary layout: `b"SGF1"`, `u64` n, `u64` d, then `n·d` little-endian
//!   `f64` values row-major.
//! * Graphs as TSV lines `i\tj\tw`, 0-based with `i < j`, weights printed
//!   with 17 significant digits.
//! * Labels as CSV lines `node_id,label`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::LabelVector;
use crate::graph::{EdgeCandidateSet, FeatureMatrix, SparseWeightedGraph};

pub const BINARY_MAGIC: &[u8; 4] = b"SGF1";

/// Reads features, picking the binary layout when the file starts with the magic bytes.
pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Format("feature file is neither SGF1 nor UTF-8 CSV".into()))?;
        parse_csv(&text)
    }
}

pub fn parse_csv(text: &str) -> Result<FeatureMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            // a single non-numeric first row is a header
            Err(_) if rows.is_empty() && lineno == first_content_line(text) => continue,
            Err(e) => {
                return Err(Error::Format(format!("line {}: {e}", lineno + 1)));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Format("no numeric rows in CSV".into()));
    }
    FeatureMatrix::from_rows(&rows)
}

fn first_content_line(text: &str) -> usize {
    text.lines()
        .position(|l| !l.trim().is_empty())
        .unwrap_or(0)
}

pub fn encode_binary(x: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * x.data().len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(x.n() as u64).to_le_bytes());
    out.extend_from_slice(&(x.d() as u64).to_le_bytes());
    for v in x.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < 20 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::Format("missing SGF1 header".into()));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let n = usize::try_from(word(4)).map_err(|_| Error::Format("n overflows".into()))?;
    let d = usize::try_from(word(12)).map_err(|_| Error::Format("d overflows".into()))?;
    let count = n
        .checked_mul(d)
        .ok_or_else(|| Error::Format("n·d overflows".into()))?;
    let payload = &bytes[20..];
    if payload.len() != count * 8 {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            count * 8,
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMatrix::new(n, d, data)
}

pub fn write_features_binary(path: impl AsRef<Path>, x: &FeatureMatrix) -> Result<()> {
    std::fs::write(path, encode_binary(x))?;
    Ok(())
}

pub fn write_features_csv(path: impl AsRef<Path>, x: &FeatureMatrix) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for i in 0..x.n() {
        let row: Vec<String> = x.row(i).iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_weight(w: f64) -> String {
    format!("{w:.16e}")
}

pub fn write_graph_tsv<W: Write>(out: &mut W, g: &SparseWeightedGraph) -> Result<()> {
    for (i, j, w) in g.iter() {
        writeln!(out, "{i}\t{j}\t{}", format_weight(w))?;
    }
    Ok(())
}

pub fn save_graph(path: impl AsRef<Path>, g: &SparseWeightedGraph) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_graph_tsv(&mut out, g)?;
    out.flush()?;
    Ok(())
}

/// Candidate support with its squared distances as the third column.
pub fn save_support(path: impl AsRef<Path>, e: &EdgeCandidateSet) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (&(i, j), &z) in e.pairs().iter().zip(e.z()) {
        writeln!(out, "{i}\t{j}\t{}", format_weight(z))?;
    }
    out.flush()?;
    Ok(())
}

/// Parses `i\tj\tvalue` lines. Reversed pairs are canonicalised. `n` defaults
/// to one past the largest index seen.
pub fn parse_graph_tsv(text: &str, n: Option<usize>) -> Result<SparseWeightedGraph> {
    let mut pairs = Vec::new();
    let mut weights = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!(
                "line {}: expected 3 tab-separated fields",
                lineno + 1
            )));
        }
        let bad = |what: &str| Error::Format(format!("line {}: bad {what}", lineno + 1));
        let i: usize = fields[0].trim().parse().map_err(|_| bad("node index"))?;
        let j: usize = fields[1].trim().parse().map_err(|_| bad("node index"))?;
        let w: f64 = fields[2].trim().parse().map_err(|_| bad("weight"))?;
        if i == j {
            return Err(Error::Format(format!("line {}: self-loop", lineno + 1)));
        }
        max_index = max_index.max(i).max(j);
        pairs.push((i.min(j), i.max(j)));
        weights.push(w);
    }
    let n = n.unwrap_or(if pairs.is_empty() { 0 } else { max_index + 1 });
    SparseWeightedGraph::new(n, pairs, weights)
}

pub fn load_graph(path: impl AsRef<Path>, n: Option<usize>) -> Result<SparseWeightedGraph> {
    parse_graph_tsv(&std::fs::read_to_string(path)?, n)
}

/// Labels as `node_id,label`; an optional header row is skipped, nodes not
/// listed are unknown.
pub fn read_labels(path: impl AsRef<Path>, n: usize) -> Result<LabelVector> {
    let reader = BufReader::new(File::open(path)?);
    let mut labels = vec![None; n];
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let (Some(id), Some(label)) = (fields.next(), fields.next()) else {
            return Err(Error::Format(format!("line {}: expected node_id,label", lineno + 1)));
        };
        let id: usize = match id.parse() {
            Ok(id) => id,
            Err(_) if lineno == 0 => continue,
            Err(_) => return Err(Error::Format(format!("line {}: bad node id", lineno + 1))),
        };
        if id >= n {
            return Err(Error::IndexOutOfRange { index: id, n });
        }
        if label.is_empty() {
            continue;
        }
        labels[id] = Some(
            label
                .parse::<u32>()
                .map_err(|_| Error::Format(format!("line {}: bad label", lineno + 1)))?,
        );
    }
    Ok(LabelVector::new(labels))
}

pub fn write_labels<W: Write>(out: &mut W, labels: &LabelVector) -> Result<()> {
    writeln!(out, "node_id,label")?;
    for (i, l) in labels.labels().iter().enumerate() {
        match l {
            Some(c) => writeln!(out, "{i},{c}")?,
            None => writeln!(out, "{i},")?,
        }
    }
    Ok(())
}
