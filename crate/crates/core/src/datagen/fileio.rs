//! Plain-text feature and label files.
//!
//! Feature file, one per modality:
//!   MMFEAT v1 modality=<v|a> samples=<N> segments=<L> dim=<d_m>
//! followed by N*L data lines of d_m space-separated reals, sample-major.
//!
//! Labels file:
//!   MMLAB v1 samples=<N>
//! followed by N lines `<sample_id> <y_reg> <y_aux>`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::autodiff::Tensor2;
use crate::datagen::synth::{Dataset, SampleLabels};
use crate::error::{IdrlError, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> IdrlError {
    IdrlError::Parse { line, msg: msg.into() }
}

pub struct LoadedFeatures {
    pub modality: String,
    pub samples: Vec<Tensor2>,
    pub segments: usize,
    pub dim: usize,
}

fn header_field<'a>(tok: Option<&'a str>, key: &str, line: usize) -> Result<&'a str> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing header field {key}")))?;
    tok.strip_prefix(&format!("{key}="))
        .ok_or_else(|| parse_err(line, format!("expected {key}=<value>, got '{tok}'")))
}

pub fn load_features(path: &Path) -> Result<LoadedFeatures> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("MMFEAT") || toks.next() != Some("v1") {
        return Err(parse_err(1, "expected 'MMFEAT v1' header"));
    }
    let modality = header_field(toks.next(), "modality", 1)?.to_string();
    if modality != "v" && modality != "a" {
        return Err(parse_err(1, format!("modality must be v or a, got '{modality}'")));
    }
    let n: usize = header_field(toks.next(), "samples", 1)?
        .parse()
        .map_err(|e| parse_err(1, format!("bad samples count: {e}")))?;
    let segments: usize = header_field(toks.next(), "segments", 1)?
        .parse()
        .map_err(|e| parse_err(1, format!("bad segments count: {e}")))?;
    let dim: usize = header_field(toks.next(), "dim", 1)?
        .parse()
        .map_err(|e| parse_err(1, format!("bad dim: {e}")))?;

    let mut samples = Vec::with_capacity(n);
    let mut current = Vec::with_capacity(segments * dim);
    let mut rows_read = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(dim);
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|e| parse_err(lineno, format!("bad value '{tok}': {e}")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value '{tok}'")));
            }
            row.push(v);
        }
        if row.len() != dim {
            return Err(parse_err(
                lineno,
                format!("expected {dim} values, got {}", row.len()),
            ));
        }
        current.extend_from_slice(&row);
        rows_read += 1;
        if rows_read % segments == 0 {
            samples.push(Tensor2::new(segments, dim, std::mem::take(&mut current)));
        }
    }
    if samples.len() != n || !current.is_empty() {
        return Err(parse_err(
            text.lines().count(),
            format!(
                "expected {} data lines, got {rows_read}",
                n * segments
            ),
        ));
    }
    Ok(LoadedFeatures { modality, samples, segments, dim })
}

pub fn load_labels(path: &Path) -> Result<Vec<SampleLabels>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("MMLAB") || toks.next() != Some("v1") {
        return Err(parse_err(1, "expected 'MMLAB v1' header"));
    }
    let n: usize = header_field(toks.next(), "samples", 1)?
        .parse()
        .map_err(|e| parse_err(1, format!("bad samples count: {e}")))?;

    let mut labels = Vec::with_capacity(n);
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(parse_err(lineno, "expected '<sample_id> <y_reg> <y_aux>'"));
        }
        let expected_id = labels.len();
        let id: usize = toks[0]
            .parse()
            .map_err(|e| parse_err(lineno, format!("bad sample_id: {e}")))?;
        if id != expected_id {
            return Err(parse_err(
                lineno,
                format!("expected sample_id {expected_id}, got {id}"),
            ));
        }
        let y_reg: f64 = toks[1]
            .parse()
            .map_err(|e| parse_err(lineno, format!("bad y_reg: {e}")))?;
        if !y_reg.is_finite() {
            return Err(parse_err(lineno, "non-finite y_reg"));
        }
        let y_aux: u8 = toks[2]
            .parse()
            .map_err(|e| parse_err(lineno, format!("bad y_aux: {e}")))?;
        if y_aux > 1 {
            return Err(parse_err(lineno, "y_aux must be 0 or 1"));
        }
        labels.push(SampleLabels { y_reg, y_aux });
    }
    if labels.len() != n {
        return Err(parse_err(
            text.lines().count(),
            format!("expected {n} label lines, got {}", labels.len()),
        ));
    }
    Ok(labels)
}

fn write_features(path: &Path, modality: &str, samples: &[Tensor2], segments: usize, dim: usize) -> Result<()> {
    let mut out = String::new();
    writeln!(
        out,
        "MMFEAT v1 modality={modality} samples={} segments={segments} dim={dim}",
        samples.len()
    )
    .expect("string write");
    for m in samples {
        for r in 0..m.rows {
            let row: Vec<String> = m.row(r).iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", row.join(" ")).expect("string write");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_labels(path: &Path, labels: &[SampleLabels]) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "MMLAB v1 samples={}", labels.len()).expect("string write");
    for (i, lab) in labels.iter().enumerate() {
        writeln!(out, "{i} {} {}", lab.y_reg, lab.y_aux).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes features_v.txt, features_a.txt and labels.txt into `dir`.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_features(&dir.join("features_v.txt"), "v", &dataset.v, dataset.segments, dataset.d_v)?;
    write_features(&dir.join("features_a.txt"), "a", &dataset.a, dataset.segments, dataset.d_a)?;
    write_labels(&dir.join("labels.txt"), &dataset.labels)
}

/// Loads a dataset saved by [`save_dataset`]. Planted latents are not part
/// of the file format and come back empty.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let fv = load_features(&dir.join("features_v.txt"))?;
    let fa = load_features(&dir.join("features_a.txt"))?;
    let labels = load_labels(&dir.join("labels.txt"))?;
    if fv.samples.len() != fa.samples.len() || fv.samples.len() != labels.len() {
        return Err(IdrlError::InvalidArgument(format!(
            "sample counts disagree: v={}, a={}, labels={}",
            fv.samples.len(),
            fa.samples.len(),
            labels.len()
        )));
    }
    if fv.segments != fa.segments {
        return Err(IdrlError::InvalidArgument(
            "segment counts disagree between modalities".into(),
        ));
    }
    Ok(Dataset {
        d_v: fv.dim,
        d_a: fa.dim,
        segments: fv.segments,
        v: fv.samples,
        a: fa.samples,
        labels,
        latents: Vec::new(),
    })
}
