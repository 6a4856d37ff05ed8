//! Checkpoint files.
//!
//! ```text
//! charcorrect-checkpoint
//! header-bytes <N>
//! <N bytes of pretty-printed JSON header, ending in a newline>
//! <payload: every parameter as little-endian f32, row-major, in manifest order>
//! ```
//!
//! The header records the format version, the model configuration, the
//! vocabulary fingerprint, the epoch, the dev perplexity and the manifest
//! (name, shape and element offset of every parameter).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::numcore::{ParamStore, Tensor};
use crate::seq2seq::{parameter_manifest, ModelConfig, Seq2Seq};
use crate::textdata::CharVocab;

pub const CHECKPOINT_MAGIC: &str = "charcorrect-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset in elements (not bytes) from the start of the payload.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub version: u32,
    pub model: ModelConfig,
    pub vocab_sha256: String,
    pub epoch: usize,
    pub dev_perplexity: f64,
    pub manifest: Vec<ManifestEntry>,
}

/// Serializes `model` with its metadata into checkpoint bytes.
pub fn checkpoint_bytes(model: &Seq2Seq, epoch: usize, dev_perplexity: f64) -> Vec<u8> {
    let mut manifest = Vec::with_capacity(model.params().len());
    let mut offset = 0;
    for (name, t) in model.params().iter() {
        manifest.push(ManifestEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset,
        });
        offset += t.len();
    }
    let meta = CheckpointMeta {
        version: CHECKPOINT_VERSION,
        model: model.config().clone(),
        vocab_sha256: CharVocab.fingerprint(),
        epoch,
        dev_perplexity,
        manifest,
    };
    let mut header = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    header.push('\n');
    let mut out = format!("{CHECKPOINT_MAGIC}\nheader-bytes {}\n", header.len()).into_bytes();
    out.extend_from_slice(header.as_bytes());
    out.reserve(offset * 4);
    for (_, t) in model.params().iter() {
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(model: &Seq2Seq, epoch: usize, dev_perplexity: f64, path: &Path) -> Result<(), TrainError> {
    fs::write(path, checkpoint_bytes(model, epoch, dev_perplexity)).map_err(|e| TrainError::io(path, e))
}

fn take_line<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str, TrainError> {
    let rest = &bytes[*pos..];
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| TrainError::Format("unterminated preamble line".into()))?;
    *pos += end + 1;
    std::str::from_utf8(&rest[..end]).map_err(|_| TrainError::Format("preamble is not UTF-8".into()))
}

/// Parses checkpoint bytes. Nothing is returned unless the whole file is
/// consistent.
pub fn parse_checkpoint(bytes: &[u8]) -> Result<(Seq2Seq, CheckpointMeta), TrainError> {
    let mut pos = 0;
    if take_line(bytes, &mut pos)? != CHECKPOINT_MAGIC {
        return Err(TrainError::Format("not a checkpoint file".into()));
    }
    let len_line = take_line(bytes, &mut pos)?;
    let header_len: usize = len_line
        .strip_prefix("header-bytes ")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| TrainError::Format(format!("bad header length line {len_line:?}")))?;
    let header_end = pos
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| TrainError::Format("header extends past end of file".into()))?;
    let header =
        std::str::from_utf8(&bytes[pos..header_end]).map_err(|_| TrainError::Format("header is not UTF-8".into()))?;

    // Check the version before the full schema so newer files get a clear error.
    let raw: serde_json::Value =
        serde_json::from_str(header).map_err(|e| TrainError::Format(format!("header: {e}")))?;
    let version = raw.get("version").and_then(serde_json::Value::as_u64);
    if version != Some(u64::from(CHECKPOINT_VERSION)) {
        return Err(TrainError::Version(
            version.map_or_else(|| "missing".into(), |v| v.to_string()),
        ));
    }
    let meta: CheckpointMeta = serde_json::from_value(raw).map_err(|e| TrainError::Format(format!("header: {e}")))?;
    if meta.vocab_sha256 != CharVocab.fingerprint() {
        return Err(TrainError::Format("vocabulary fingerprint mismatch".into()));
    }

    let expected = parameter_manifest(&meta.model);
    let mut offset = 0;
    if expected.len() != meta.manifest.len() {
        return Err(TrainError::Format(
            "manifest does not match the model configuration".into(),
        ));
    }
    for ((name, shape), entry) in expected.iter().zip(&meta.manifest) {
        if *name != entry.name || *shape != entry.shape || entry.offset != offset {
            return Err(TrainError::Format(format!(
                "manifest entry {} is inconsistent",
                entry.name
            )));
        }
        offset += shape.iter().product::<usize>();
    }
    let payload = &bytes[header_end..];
    if payload.len() != offset * 4 {
        return Err(TrainError::Format(format!(
            "payload has {} bytes, manifest needs {}",
            payload.len(),
            offset * 4
        )));
    }

    let mut store = ParamStore::new();
    for entry in &meta.manifest {
        let n: usize = entry.shape.iter().product();
        let start = entry.offset * 4;
        let values: Vec<f64> = payload[start..start + n * 4]
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TrainError::Format(format!("non-finite value in {}", entry.name)));
        }
        let t = Tensor::from_vec(&entry.shape, values).map_err(|e| TrainError::Format(e.to_string()))?;
        store
            .insert(&entry.name, t)
            .map_err(|e| TrainError::Format(e.to_string()))?;
    }
    let model = Seq2Seq::from_params(meta.model.clone(), store)?;
    Ok((model, meta))
}

pub fn load_checkpoint(path: &Path) -> Result<(Seq2Seq, CheckpointMeta), TrainError> {
    let bytes = fs::read(path).map_err(|e| TrainError::io(path, e))?;
    parse_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::rng::seeded;

    fn model() -> Seq2Seq {
        let cfg = ModelConfig {
            init_scale: 0.7,
            ..ModelConfig::small(6, 2, 2)
        };
        Seq2Seq::new(cfg, &mut seeded(3)).unwrap()
    }

    #[test]
    fn roundtrip_is_f32_exact() {
        let m = model();
        let bytes = checkpoint_bytes(&m, 4, 12.5);
        let (back, meta) = parse_checkpoint(&bytes).unwrap();
        assert_eq!(meta.epoch, 4);
        assert_eq!(meta.dev_perplexity, 12.5);
        for ((n1, a), (n2, b)) in m.params().iter().zip(back.params().iter()) {
            assert_eq!(n1, n2);
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= x.abs() * 1e-7);
                assert_eq!(*y, f64::from(*x as f32));
            }
        }
        // A second pass through f32 changes nothing.
        assert_eq!(checkpoint_bytes(&back, 4, 12.5), bytes);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let bytes = checkpoint_bytes(&model(), 1, 2.0);
        for cut in [bytes.len() - 1, bytes.len() - 4, 30, 5] {
            assert!(
                matches!(parse_checkpoint(&bytes[..cut]), Err(TrainError::Format(_))),
                "cut {cut}"
            );
        }
    }

    #[test]
    fn unknown_version_is_rejected() {
        let bytes = checkpoint_bytes(&model(), 1, 2.0);
        let text = String::from_utf8_lossy(&bytes).into_owned();
        // Same length, so the header-bytes line stays valid.
        let mut raw = bytes.clone();
        let at = text.find("\"version\": 1").unwrap() + "\"version\": ".len();
        raw[at] = b'7';
        assert!(matches!(parse_checkpoint(&raw), Err(TrainError::Version(v)) if v == "7"));
    }

    #[test]
    fn manifest_order_is_insertion_order() {
        let m = model();
        let (_, meta) = parse_checkpoint(&checkpoint_bytes(&m, 0, 1.0)).unwrap();
        let names: Vec<&str> = meta.manifest.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, m.params().names().collect::<Vec<_>>());
        assert_eq!(names[0], "encoder.embedding");
    }
}
