//! Detection streams (JSONL), model files (binary) and reports (JSON).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::domain::{canonical_cmp, BBox, Detection, Frame, FrameState, GroundTruth, LabelSpaces, Pose};
use crate::engine::{annotations, ActivityModel, HIST_TOL};
use crate::error::{Error, Result};
use crate::features::ActionModel;
use crate::potentials::{Layout, WeightVector};

fn default_conf() -> f64 {
    1.0
}

/// One JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    frame: u64,
    bbox: [f64; 4],
    pose: u8,
    #[serde(default = "default_conf")]
    pose_conf: f64,
    hist: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt: Option<GroundTruth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pred: Option<GroundTruth>,
}

/// A detection with an optional predicted annotation, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub det: Detection,
    pub pred: Option<GroundTruth>,
}

/// All records of one frame, in canonical detection order.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordFrame {
    pub index: u64,
    pub records: Vec<Record>,
}

impl RecordFrame {
    pub fn into_frame(self) -> Frame {
        Frame { index: self.index, detections: self.records.into_iter().map(|r| r.det).collect() }
    }
}

fn line_to_record(l: Line, bins: usize) -> std::result::Result<Record, String> {
    let [x, y, w, h] = l.bbox;
    let bbox = BBox::new(x, y, w, h).map_err(|e| e.to_string())?;
    let pose = Pose::try_from(l.pose).map_err(|e| e.to_string())?;
    let det = Detection { frame: l.frame, bbox, pose, pose_conf: l.pose_conf, appearance: l.hist, gt: l.gt };
    det.validate(bins, HIST_TOL).map_err(|e| e.to_string())?;
    Ok(Record { det, pred: l.pred })
}

/// Parses a JSONL stream. Blank lines are skipped; frames must not decrease.
pub fn parse_records(reader: impl BufRead, path: &Path, bins: usize) -> Result<Vec<RecordFrame>> {
    let mut frames: Vec<RecordFrame> = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let lineno = n + 1;
        let fmt = |message: String| Error::Format { path: path.to_path_buf(), line: lineno, message };
        let line = line.map_err(|e| fmt(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|e| fmt(e.to_string()))?;
        let rec = line_to_record(parsed, bins).map_err(fmt)?;
        let frame = rec.det.frame;
        match frames.last_mut() {
            Some(f) if f.index == frame => f.records.push(rec),
            Some(f) if f.index > frame => {
                return Err(fmt(format!("frame {frame} after frame {}", f.index)));
            }
            _ => frames.push(RecordFrame { index: frame, records: vec![rec] }),
        }
    }
    for f in &mut frames {
        f.records.sort_by(|a, b| canonical_cmp(&a.det, &b.det));
    }
    Ok(frames)
}

pub fn read_records(path: &Path, bins: usize) -> Result<Vec<RecordFrame>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records(BufReader::new(file), path, bins)
}

/// Reads a detection stream grouped by frame.
pub fn read_detections(path: &Path, bins: usize) -> Result<Vec<Frame>> {
    Ok(read_records(path, bins)?.into_iter().map(RecordFrame::into_frame).collect())
}

fn record_line(det: &Detection, pred: Option<GroundTruth>) -> Line {
    Line {
        frame: det.frame,
        bbox: [det.bbox.x, det.bbox.y, det.bbox.w, det.bbox.h],
        pose: det.pose.into(),
        pose_conf: det.pose_conf,
        hist: det.appearance.clone(),
        gt: det.gt,
        pred,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = Line>) -> Result<()> {
    let mut w = create(path)?;
    for l in lines {
        let s = serde_json::to_string(&l).map_err(|e| Error::InvalidInput(e.to_string()))?;
        writeln!(w, "{s}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Serialises records to JSONL, one line per detection.
pub fn format_records(frames: &[RecordFrame]) -> Result<String> {
    let mut out = String::new();
    for f in frames {
        for r in &f.records {
            out.push_str(
                &serde_json::to_string(&record_line(&r.det, r.pred)).map_err(|e| Error::InvalidInput(e.to_string()))?,
            );
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn write_detections(path: &Path, frames: &[Frame]) -> Result<()> {
    write_lines(path, frames.iter().flat_map(|f| f.detections.iter().map(|d| record_line(d, None))))
}

pub fn write_records(path: &Path, frames: &[RecordFrame]) -> Result<()> {
    write_lines(path, frames.iter().flat_map(|f| f.records.iter().map(|r| record_line(&r.det, r.pred))))
}

/// Records holding the engine's predictions for every processed frame.
pub fn prediction_records(states: &[FrameState]) -> Result<Vec<RecordFrame>> {
    states
        .iter()
        .filter(|s| !s.detections.is_empty())
        .map(|s| {
            let preds = annotations(s)?;
            Ok(RecordFrame {
                index: s.k,
                records: s
                    .detections
                    .iter()
                    .zip(preds)
                    .map(|(d, p)| Record { det: d.clone(), pred: Some(p) })
                    .collect(),
            })
        })
        .collect()
}

const MAGIC: &[u8; 4] = b"CFW1";
/// Current model file version.
pub const MODEL_VERSION: u32 = 1;

/// Contents of a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub spaces: LabelSpaces,
    pub config: Config,
    pub weights: WeightVector,
    pub action: ActionModel,
}

impl ModelFile {
    pub fn activity_model(&self) -> ActivityModel {
        ActivityModel { weights: self.weights.clone(), action: self.action.clone() }
    }
}

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Model(format!("value {v} does not fit the format")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

/// Encodes a model; see `docs/model-format.md` for the layout.
pub fn encode_model(m: &ModelFile) -> Result<Vec<u8>> {
    let layout = m.weights.layout;
    if layout != Layout::for_spaces(&m.spaces) {
        return Err(Error::Dimension("weight layout does not match the label spaces".into()));
    }
    let mut buf = Vec::with_capacity(64 + 8 * layout.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    for v in [m.spaces.collective, m.spaces.group, m.spaces.action, m.spaces.poses] {
        put_u32(&mut buf, v)?;
    }
    for v in [layout.dim_x0, layout.dim_xg, layout.dim_xi, m.config.hist_bins] {
        put_u32(&mut buf, v)?;
    }
    let cfg = serde_json::to_vec(&m.config).map_err(|e| Error::Model(e.to_string()))?;
    put_u32(&mut buf, cfg.len())?;
    buf.extend_from_slice(&cfg);
    put_u32(&mut buf, m.weights.data.len())?;
    for w in &m.weights.data {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    match m.action.params {
        Some(p) => {
            buf.push(1);
            for v in p {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        None => buf.push(0),
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or(Error::Checksum)?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Decodes a model, verifying the checksum before anything else.
pub fn decode_model(bytes: &[u8]) -> Result<ModelFile> {
    if bytes.len() < MAGIC.len() + 8 {
        return Err(Error::Checksum);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().expect("4 bytes")) {
        return Err(Error::Checksum);
    }
    let mut c = Cursor { data: body, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Model("bad magic bytes".into()));
    }
    let version = c.u32()? as u32;
    if version != MODEL_VERSION {
        return Err(Error::Model(format!("unsupported version {version}, expected {MODEL_VERSION}")));
    }
    let spaces = LabelSpaces { collective: c.u32()?, group: c.u32()?, action: c.u32()?, poses: c.u32()? };
    if spaces != LabelSpaces::default() {
        return Err(Error::Dimension(format!("unsupported label spaces {spaces:?}")));
    }
    let layout = Layout::for_spaces(&spaces);
    let dims = [c.u32()?, c.u32()?, c.u32()?];
    if dims != [layout.dim_x0, layout.dim_xg, layout.dim_xi] {
        return Err(Error::Dimension(format!("feature dimensions {dims:?} do not match the label spaces")));
    }
    let bins = c.u32()?;
    let cfg_len = c.u32()?;
    let config: Config =
        serde_json::from_slice(c.take(cfg_len)?).map_err(|e| Error::Model(format!("config section: {e}")))?;
    if config.hist_bins != bins {
        return Err(Error::Model("histogram length disagrees with the stored config".into()));
    }
    let n = c.u32()?;
    if n != layout.len() {
        return Err(Error::Dimension(format!("{n} weights stored, layout needs {}", layout.len())));
    }
    let data = (0..n).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    let action = match c.take(1)?[0] {
        0 => ActionModel::default(),
        1 => ActionModel::from_params([c.f64()?, c.f64()?, c.f64()?, c.f64()?, c.f64()?]),
        b => return Err(Error::Model(format!("bad action section flag {b}"))),
    };
    if c.pos != body.len() {
        return Err(Error::Model("trailing bytes after the action section".into()));
    }
    Ok(ModelFile { spaces, config, weights: WeightVector::from_vec(layout, data)?, action })
}

pub fn write_model(path: &Path, m: &ModelFile) -> Result<()> {
    let bytes = encode_model(m)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

/// Reads a model and checks that it was trained with the histogram length
/// `hist_bins`.
pub fn read_model_for(path: &Path, hist_bins: usize) -> Result<ModelFile> {
    let m = read_model(path)?;
    if m.config.hist_bins != hist_bins {
        return Err(Error::Dimension(format!(
            "model was trained with {} histogram bins, input uses {hist_bins}",
            m.config.hist_bins
        )));
    }
    Ok(m)
}

/// Pretty JSON of any report; values serialising to `null` become `{}`.
pub fn format_report(report: &impl Serialize) -> Result<String> {
    let v = serde_json::to_value(report).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let v = if v.is_null() { serde_json::Value::Object(Default::default()) } else { v };
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::InvalidInput(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_report(path: &Path, report: &impl Serialize) -> Result<()> {
    std::fs::write(path, format_report(report)?).map_err(|e| Error::io(path, e))
}

/// One overlay record: a box with its track, group colour and labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayRecord {
    pub frame: u64,
    pub bbox: [f64; 4],
    pub track: u64,
    pub group: u64,
    pub color: String,
    pub action: String,
    pub group_act: String,
    pub collective: String,
}

/// Deterministic colour of a group id.
pub fn group_color(id: u64) -> String {
    const PALETTE: [&str; 10] =
        ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];
    PALETTE[(id % PALETTE.len() as u64) as usize].to_string()
}

pub fn overlay_records(states: &[FrameState]) -> Result<Vec<OverlayRecord>> {
    let mut out = Vec::new();
    for s in states {
        for (d, a) in s.detections.iter().zip(annotations(s)?) {
            out.push(OverlayRecord {
                frame: s.k,
                bbox: [d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h],
                track: a.track,
                group: a.group,
                color: group_color(a.group),
                action: a.action.to_string(),
                group_act: a.group_act.to_string(),
                collective: a.collective.to_string(),
            });
        }
    }
    Ok(out)
}

pub fn write_overlay(path: &Path, states: &[FrameState]) -> Result<()> {
    let mut w = create(path)?;
    for r in overlay_records(states)? {
        let s = serde_json::to_string(&r).map_err(|e| Error::InvalidInput(e.to_string()))?;
        writeln!(w, "{s}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
