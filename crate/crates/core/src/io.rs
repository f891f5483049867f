//! MOTChallenge-style text files, appearance embedding files, and atomic
//! output writes.
//!
//! Detection/result rows: `frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z`.
//!
//! Embeddings, binary: `b"BTEB"`, `u32` dimension, then records of
//! `u32 frame, u32 det_index, dim x f32`, all little-endian. A text fallback
//! uses lines `frame,det_index,v0,...,v{dim-1}` with an optional header line.
//! `det_index` counts the rows of that frame in the detection file, in file
//! order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::tracker::{normalize, Detection};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"BTEB";

/// One line of a MOTChallenge file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRow {
    pub frame: u32,
    /// -1 for raw detections.
    pub id: i64,
    pub bb_left: f64,
    pub bb_top: f64,
    pub bb_width: f64,
    pub bb_height: f64,
    pub conf: f64,
}

impl MotRow {
    pub fn bbox(&self) -> Result<BBox> {
        BBox::new(self.bb_left, self.bb_top, self.bb_width, self.bb_height)
    }

    pub fn from_bbox(frame: u32, id: i64, b: &BBox, conf: f64) -> Self {
        MotRow { frame, id, bb_left: b.x_left, bb_top: b.y_top, bb_width: b.width, bb_height: b.height, conf }
    }

    fn parse(line: &str, path: &Path, line_no: usize) -> Result<MotRow> {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 7 {
            return Err(Error::parse(path, line_no, format!("expected at least 7 fields, got {}", fields.len())));
        }
        let num = |i: usize| -> Result<f64> {
            let v: f64 = fields[i]
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("field {}: bad number {:?}", i + 1, fields[i])))?;
            if !v.is_finite() {
                return Err(Error::parse(path, line_no, format!("field {}: non-finite value", i + 1)));
            }
            Ok(v)
        };
        let frame = num(0)?;
        if frame < 1.0 || frame.fract() != 0.0 || frame > u32::MAX as f64 {
            return Err(Error::parse(path, line_no, format!("frame must be a positive integer, got {}", fields[0])));
        }
        let id = num(1)?;
        if id.fract() != 0.0 {
            return Err(Error::parse(path, line_no, format!("id must be an integer, got {}", fields[1])));
        }
        Ok(MotRow {
            frame: frame as u32,
            id: id as i64,
            bb_left: num(2)?,
            bb_top: num(3)?,
            bb_width: num(4)?,
            bb_height: num(5)?,
            conf: num(6)?,
        })
    }

    fn format(&self, out: &mut String) {
        writeln!(
            out,
            "{},{},{:.2},{:.2},{:.2},{:.2},{:.4},-1,-1,-1",
            self.frame, self.id, self.bb_left, self.bb_top, self.bb_width, self.bb_height, self.conf
        )
        .unwrap();
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_mot_rows(text: &str, path: &Path) -> Result<Vec<MotRow>> {
    content_lines(text).map(|(n, l)| MotRow::parse(l, path, n)).collect()
}

pub fn read_mot_rows(path: impl AsRef<Path>) -> Result<Vec<MotRow>> {
    let path = path.as_ref();
    parse_mot_rows(&read_text(path)?, path)
}

/// Detections grouped by frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionSet {
    pub frames: BTreeMap<u32, Vec<Detection>>,
    /// Per frame, file-row order -> position in `frames[f]` (`None` if the row was rejected).
    row_index: BTreeMap<u32, Vec<Option<usize>>>,
}

impl DetectionSet {
    pub fn max_frame(&self) -> Option<u32> {
        self.row_index.keys().next_back().copied()
    }

    /// Detections for `frame`; empty when the frame has none.
    pub fn frame(&self, frame: u32) -> &[Detection] {
        self.frames.get(&frame).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push_row(&mut self, frame: u32, det: Option<Detection>) {
        let slots = self.row_index.entry(frame).or_default();
        let list = self.frames.entry(frame).or_default();
        match det {
            Some(d) => {
                slots.push(Some(list.len()));
                list.push(d);
            }
            None => slots.push(None),
        }
    }

    fn slot(&self, frame: u32, row: usize) -> Option<Option<usize>> {
        self.row_index.get(&frame).and_then(|v| v.get(row)).copied()
    }
}

pub fn parse_detections(text: &str, path: &Path) -> Result<DetectionSet> {
    let mut set = DetectionSet::default();
    for (line_no, line) in content_lines(text) {
        let row = MotRow::parse(line, path, line_no)?;
        if !(0.0..=1.0).contains(&row.conf) {
            return Err(Error::parse(path, line_no, format!("score {} outside [0,1]", row.conf)));
        }
        match row.bbox() {
            Ok(b) => set.push_row(row.frame, Some(Detection::new(b, row.conf))),
            Err(e) => {
                log::warn!("{}:{line_no}: detection rejected: {e}", path.display());
                set.push_row(row.frame, None);
            }
        }
    }
    Ok(set)
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<DetectionSet> {
    let path = path.as_ref();
    parse_detections(&read_text(path)?, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub frame: u32,
    pub det_index: u32,
    pub vector: Vec<f32>,
}

fn parse_embeddings_binary(bytes: &[u8], path: &Path) -> Result<Vec<EmbeddingRecord>> {
    let err = |msg: String| Error::parse(path, 0, msg);
    let dim_bytes: [u8; 4] = bytes.get(4..8).ok_or_else(|| err("truncated header".into()))?.try_into().unwrap();
    let dim = u32::from_le_bytes(dim_bytes) as usize;
    if dim == 0 {
        return Err(err("embedding dimension is zero".into()));
    }
    let rec_len = 8 + 4 * dim;
    let body = &bytes[8..];
    if !body.len().is_multiple_of(rec_len) {
        return Err(err(format!("body of {} bytes is not a whole number of {rec_len}-byte records", body.len())));
    }
    let mut out = Vec::with_capacity(body.len() / rec_len);
    for (i, rec) in body.chunks_exact(rec_len).enumerate() {
        let frame = u32::from_le_bytes(rec[0..4].try_into().unwrap());
        let det_index = u32::from_le_bytes(rec[4..8].try_into().unwrap());
        let vector: Vec<f32> = rec[8..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(err(format!("record {i}: non-finite component")));
        }
        out.push(EmbeddingRecord { frame, det_index, vector });
    }
    Ok(out)
}

fn parse_embeddings_csv(text: &str, path: &Path) -> Result<Vec<EmbeddingRecord>> {
    let mut dim: Option<usize> = None;
    let mut out = Vec::new();
    for (line_no, line) in content_lines(text) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if out.is_empty() && dim.is_none() && fields[0].parse::<f64>().is_err() {
            // header line names the columns
            if fields.len() < 3 {
                return Err(Error::parse(path, line_no, "header needs frame, det_index and at least one component"));
            }
            dim = Some(fields.len() - 2);
            continue;
        }
        if fields.len() < 3 {
            return Err(Error::parse(path, line_no, format!("expected at least 3 fields, got {}", fields.len())));
        }
        let d = fields.len() - 2;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::parse(path, line_no, format!("dimension {d} does not match {expected}")));
            }
            _ => {}
        }
        let int = |s: &str| -> Result<u32> {
            s.parse().map_err(|_| Error::parse(path, line_no, format!("bad index {s:?}")))
        };
        let frame = int(fields[0])?;
        let det_index = int(fields[1])?;
        let vector = fields[2..]
            .iter()
            .map(|s| match s.parse::<f32>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::parse(path, line_no, format!("bad component {s:?}"))),
            })
            .collect::<Result<Vec<f32>>>()?;
        out.push(EmbeddingRecord { frame, det_index, vector });
    }
    Ok(out)
}

pub fn parse_embeddings(bytes: &[u8], path: &Path) -> Result<Vec<EmbeddingRecord>> {
    if bytes.starts_with(EMBEDDING_MAGIC) {
        return parse_embeddings_binary(bytes, path);
    }
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_embeddings_csv(text, path),
        Err(_) => Err(Error::parse(path, 0, "bad magic: expected \"BTEB\" or a text embedding file")),
    }
}

pub fn read_embedding_records(path: impl AsRef<Path>) -> Result<Vec<EmbeddingRecord>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&bytes, path)
}

/// Attaches normalized embeddings to their detections.
pub fn attach_embeddings(dets: &mut DetectionSet, records: Vec<EmbeddingRecord>) -> Result<()> {
    for rec in records {
        let slot = dets.slot(rec.frame, rec.det_index as usize).ok_or_else(|| {
            Error::Embedding(format!("record for frame {} det {} has no detection", rec.frame, rec.det_index))
        })?;
        let Some(pos) = slot else {
            log::warn!("embedding for rejected detection (frame {}, det {}) ignored", rec.frame, rec.det_index);
            continue;
        };
        let v = normalize(&rec.vector).ok_or_else(|| {
            Error::Embedding(format!("zero embedding for frame {} det {}", rec.frame, rec.det_index))
        })?;
        let det = &mut dets.frames.get_mut(&rec.frame).expect("slot implies frame")[pos];
        if det.embedding.is_some() {
            return Err(Error::Embedding(format!("duplicate embedding for frame {} det {}", rec.frame, rec.det_index)));
        }
        det.embedding = Some(v);
    }
    Ok(())
}

pub fn read_embeddings(path: impl AsRef<Path>, dets: &mut DetectionSet) -> Result<()> {
    attach_embeddings(dets, read_embedding_records(path)?)
}

pub fn encode_embeddings_binary(records: &[EmbeddingRecord]) -> Result<Vec<u8>> {
    let dim = records.first().map_or(0, |r| r.vector.len());
    if records.iter().any(|r| r.vector.len() != dim) {
        return Err(Error::Embedding("records have differing dimensions".into()));
    }
    let mut out = Vec::with_capacity(8 + records.len() * (8 + 4 * dim));
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for r in records {
        out.extend_from_slice(&r.frame.to_le_bytes());
        out.extend_from_slice(&r.det_index.to_le_bytes());
        for v in &r.vector {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_embeddings(path: impl AsRef<Path>, records: &[EmbeddingRecord]) -> Result<()> {
    write_atomic(path.as_ref(), &encode_embeddings_binary(records)?)
}

pub fn format_results(rows: &[MotRow]) -> String {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.frame.cmp(&b.frame).then(a.id.cmp(&b.id)));
    let mut out = String::new();
    for r in &sorted {
        r.format(&mut out);
    }
    out
}

/// Writes rows sorted by frame then id with fixed decimals.
pub fn write_results(path: impl AsRef<Path>, rows: &[MotRow]) -> Result<()> {
    write_atomic(path.as_ref(), format_results(rows).as_bytes())
}

/// `frame,<name>` CSV; undefined entries are written as `NaN`.
pub fn format_series_csv(name: &str, series: &[(u32, Option<f64>)]) -> String {
    let mut out = format!("frame,{name}\n");
    for (frame, v) in series {
        match v {
            Some(v) => writeln!(out, "{frame},{v:.12}").unwrap(),
            None => writeln!(out, "{frame},NaN").unwrap(),
        }
    }
    out
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
