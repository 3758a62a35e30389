//! JSON-lines chain persistence: one block per line, fields
//! `{index, round, kind, prev_digest, payload_digest, payload}` with hex
//! digests and a `payload` of `{model:[...]}`, `{delta:[...], uploader,
//! score}`, or null for locally pruned blocks. Floats use the shortest
//! round-trip decimal form; digests are over the canonical binary form,
//! never the JSON text.
//!
//! The file carries no separate `k` field: `k` is recovered from the first
//! non-genesis model block's index (`k = index − 1`). A chain that never
//! completed round 0 is ambiguous, and the smallest consistent `k` is used.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Block, BlockDigest, BlockHeader, BlockKind, Chain, ChainError, Payload};
use crate::community::NodeId;
use crate::params::ParamVector;

#[derive(Serialize, Deserialize)]
struct LineRecord {
    index: u64,
    round: u64,
    kind: BlockKind,
    prev_digest: String,
    payload_digest: String,
    payload: Option<LinePayload>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LinePayload {
    Model {
        model: Vec<f64>,
    },
    Update {
        delta: Vec<f64>,
        uploader: u64,
        score: f64,
    },
}

/// Writes the chain, one JSON object per block per line.
pub fn save<W: Write>(chain: &Chain, mut w: W) -> Result<(), ChainError> {
    for block in chain.blocks() {
        let header = block.header();
        let payload = block.payload().map(|p| match p {
            Payload::Model { model } => LinePayload::Model {
                model: model.values().to_vec(),
            },
            Payload::Update {
                delta,
                uploader,
                score,
            } => LinePayload::Update {
                delta: delta.values().to_vec(),
                uploader: uploader.0,
                score: *score,
            },
        });
        let record = LineRecord {
            index: header.index,
            round: header.round,
            kind: header.kind,
            prev_digest: hex::encode(header.prev_digest),
            payload_digest: hex::encode(header.payload_digest),
            payload,
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| ChainError::Io(format!("serialize block {}: {e}", header.index)))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn save_to_path<P: AsRef<Path>>(chain: &Chain, path: P) -> Result<(), ChainError> {
    let file = File::create(path)?;
    save(chain, BufWriter::new(file))
}

fn parse_digest(hex_str: &str, line: usize, field: &str) -> Result<BlockDigest, ChainError> {
    let bytes = hex::decode(hex_str).map_err(|e| ChainError::Parse {
        line,
        msg: format!("{field}: {e}"),
    })?;
    bytes.try_into().map_err(|_| ChainError::Parse {
        line,
        msg: format!("{field}: expected 32 bytes"),
    })
}

/// Reads a chain back. Digests are taken from the file as-is; run
/// `Chain::verify` afterwards to detect tampering.
pub fn load<R: Read>(r: R) -> Result<Chain, ChainError> {
    let reader = BufReader::new(r);
    let mut blocks = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: LineRecord = serde_json::from_str(&line).map_err(|e| ChainError::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let payload = match record.payload {
            None => None,
            Some(LinePayload::Model { model }) => Some(Payload::Model {
                model: ParamVector::flat(model).map_err(|e| ChainError::Parse {
                    line: lineno,
                    msg: e.to_string(),
                })?,
            }),
            Some(LinePayload::Update {
                delta,
                uploader,
                score,
            }) => Some(Payload::Update {
                delta: ParamVector::flat(delta).map_err(|e| ChainError::Parse {
                    line: lineno,
                    msg: e.to_string(),
                })?,
                uploader: NodeId(uploader),
                score,
            }),
        };
        let header = BlockHeader {
            index: record.index,
            prev_digest: parse_digest(&record.prev_digest, lineno, "prev_digest")?,
            payload_digest: parse_digest(&record.payload_digest, lineno, "payload_digest")?,
            round: record.round,
            kind: record.kind,
        };
        blocks.push(Block { header, payload });
    }
    if blocks.is_empty() {
        return Err(ChainError::Parse {
            line: 0,
            msg: "empty chain file".into(),
        });
    }

    let k = infer_k(&blocks);
    let pruned_before = blocks
        .iter()
        .find(|b| b.payload.is_some())
        .map(|b| b.header.round)
        .unwrap_or(0);
    Ok(Chain {
        k,
        blocks,
        pruned_before,
    })
}

pub fn load_from_path<P: AsRef<Path>>(path: P) -> Result<Chain, ChainError> {
    load(File::open(path)?)
}

fn infer_k(blocks: &[Block]) -> u64 {
    for block in blocks {
        if block.header.kind == BlockKind::Model && block.header.index > 0 {
            return block.header.index - 1;
        }
    }
    let updates = blocks
        .iter()
        .filter(|b| b.header.kind == BlockKind::Update)
        .count() as u64;
    updates.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ChainCheck;

    fn pv(values: &[f64]) -> ParamVector {
        ParamVector::flat(values.to_vec()).unwrap()
    }

    fn sample_chain() -> Chain {
        let mut chain = Chain::new(2, pv(&[0.25, -1.5])).unwrap();
        for round in 0..3u64 {
            for u in 0..2u64 {
                chain
                    .append_update_block(
                        round,
                        pv(&[0.1 * u as f64, round as f64]),
                        NodeId(10 + u),
                        0.25 * (u + 1) as f64,
                    )
                    .unwrap();
            }
            chain
                .append_model_block(round + 1, pv(&[round as f64, 1.0]))
                .unwrap();
        }
        chain
    }

    #[test]
    fn roundtrip_is_digest_identical() {
        let chain = sample_chain();
        let mut buf = Vec::new();
        save(&chain, &mut buf).unwrap();
        let loaded = load(buf.as_slice()).unwrap();
        assert_eq!(loaded.k(), chain.k());
        assert_eq!(loaded, chain);
        assert_eq!(loaded.verify(), ChainCheck::Valid);
        // serializing again yields identical bytes
        let mut buf2 = Vec::new();
        save(&loaded, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn roundtrip_preserves_pruning() {
        let mut chain = sample_chain();
        chain.prune(2).unwrap();
        let mut buf = Vec::new();
        save(&chain, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().contains("\"payload\":null"));
        let loaded = load(buf.as_slice()).unwrap();
        assert_eq!(loaded.pruned_before(), 2);
        assert_eq!(loaded, chain);
        assert_eq!(loaded.verify(), ChainCheck::Valid);
    }

    #[test]
    fn line_schema_field_order() {
        let chain = Chain::new(1, pv(&[0.5])).unwrap();
        let mut buf = Vec::new();
        save(&chain, &mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert!(line.starts_with(
            "{\"index\":0,\"round\":0,\"kind\":\"model\",\"prev_digest\":\"0000"
        ));
        assert!(line.contains("\"payload\":{\"model\":[0.5]}"));
    }

    #[test]
    fn tampered_file_fails_verification() {
        let chain = sample_chain();
        let mut buf = Vec::new();
        save(&chain, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        // perturb one delta value on line 2 (block index 1)
        let tampered: String = text.replacen("0.0", "0.001", 1);
        assert_ne!(text, tampered);
        let loaded = load(tampered.as_bytes()).unwrap();
        assert_eq!(
            loaded.verify(),
            ChainCheck::Invalid { first_bad_index: 1 }
        );
    }

    #[test]
    fn garbage_line_reports_line_number() {
        let err = load("not json\n".as_bytes()).unwrap_err();
        assert!(matches!(err, ChainError::Parse { line: 1, .. }));
    }

    #[test]
    fn k_inference_from_incomplete_round_zero() {
        let mut chain = Chain::new(4, pv(&[0.0])).unwrap();
        chain
            .append_update_block(0, pv(&[1.0]), NodeId(1), 0.5)
            .unwrap();
        let mut buf = Vec::new();
        save(&chain, &mut buf).unwrap();
        let loaded = load(buf.as_slice()).unwrap();
        // smallest consistent k; digests still verify
        assert_eq!(loaded.k(), 1);
        assert_eq!(loaded.verify(), ChainCheck::Valid);
    }
}
