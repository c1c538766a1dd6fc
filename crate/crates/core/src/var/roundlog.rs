use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::matrix::{digest, MatrixRecord};
use crate::error::{Error, Result};

/// A worker-to-hub message, recorded by digest only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Upload {
    pub node: usize,
    pub digest: String,
    pub frobenius: f64,
}

/// Hub-to-workers message. The payload holds the broadcast matrices by
/// name and may be pruned by the [`LogPolicy`]; the digest is always kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Broadcast {
    pub digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<BTreeMap<String, MatrixRecord>>,
}

/// One synchronous ADMM round: N uploads followed by one broadcast.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub k: usize,
    pub scheme: String,
    pub n_workers: usize,
    pub rho: f64,
    pub uploads: Vec<Upload>,
    pub broadcast: Broadcast,
}

impl RoundRecord {
    pub fn message_count(&self) -> usize {
        self.uploads.len() + 1
    }

    pub fn payload_matrix(&self, name: &str) -> Result<DMatrix<f64>> {
        self.broadcast
            .payload
            .as_ref()
            .and_then(|p| p.get(name))
            .ok_or_else(|| Error::invalid(format!("round {} has no logged '{name}'", self.k)))?
            .to_matrix()
    }
}

/// How many rounds keep their full broadcast payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogPolicy {
    /// Keep every payload.
    Full,
    /// Keep payloads of the most recent rounds only.
    LastRounds(usize),
}

impl Default for LogPolicy {
    fn default() -> Self {
        LogPolicy::LastRounds(2)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoundLog {
    pub records: Vec<RoundRecord>,
    pub policy: LogPolicy,
}

impl RoundLog {
    pub fn new(policy: LogPolicy) -> Self {
        Self { records: Vec::new(), policy }
    }

    pub(crate) fn record(
        &mut self,
        k: usize,
        scheme: &str,
        rho: f64,
        uploads: &[DMatrix<f64>],
        broadcast: Vec<(&str, &DMatrix<f64>)>,
    ) {
        let uploads = uploads
            .iter()
            .enumerate()
            .map(|(node, m)| Upload { node, digest: digest(m), frobenius: m.norm() })
            .collect::<Vec<_>>();
        let payload: BTreeMap<String, MatrixRecord> =
            broadcast.iter().map(|(name, m)| (name.to_string(), MatrixRecord::from(*m))).collect();
        let mut hasher = Sha256::new();
        for (name, m) in &broadcast {
            hasher.update(name.as_bytes());
            hasher.update(digest(m).as_bytes());
        }
        let bdigest = hex::encode(hasher.finalize());
        self.records.push(RoundRecord {
            k,
            scheme: scheme.to_string(),
            n_workers: uploads.len(),
            rho,
            uploads,
            broadcast: Broadcast { digest: bdigest, payload: Some(payload) },
        });
        if let LogPolicy::LastRounds(keep) = self.policy {
            let len = self.records.len();
            if len > keep {
                self.records[len - keep - 1].broadcast.payload = None;
            }
        }
    }

    pub fn round(&self, k: usize) -> Option<&RoundRecord> {
        self.records.iter().find(|r| r.k == k)
    }

    pub fn last(&self) -> Option<&RoundRecord> {
        self.records.last()
    }

    /// JSON-lines, one record per round.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: RoundRecord = serde_json::from_str(&line)
                .map_err(|e| Error::Schema(format!("round log line {}: {e}", i + 1)))?;
            records.push(rec);
        }
        Ok(Self { records, policy: LogPolicy::Full })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pruning_keeps_recent_payloads_and_all_digests() {
        let mut log = RoundLog::new(LogPolicy::LastRounds(2));
        let m = DMatrix::from_element(2, 2, 1.0);
        for k in 1..=5 {
            log.record(k, "test", 1.0, &[m.clone(), m.clone()], vec![("h", &m)]);
        }
        let kept: Vec<bool> = log.records.iter().map(|r| r.broadcast.payload.is_some()).collect();
        assert_eq!(kept, vec![false, false, false, true, true]);
        assert!(log.records.iter().all(|r| r.message_count() == 3 && !r.broadcast.digest.is_empty()));
        assert!(log.round(2).unwrap().payload_matrix("h").is_err());
        assert_eq!(log.round(5).unwrap().payload_matrix("h").unwrap(), m);
    }

    #[test]
    fn jsonl_round_trip() {
        let mut log = RoundLog::new(LogPolicy::Full);
        let m = DMatrix::from_row_slice(2, 3, &[0.1, -2.0, 3.5, 1e-17, 7.0, -0.0]);
        log.record(1, "consensus", 2.0, &[m.clone()], vec![("u", &m), ("h", &m)]);
        let mut buf = Vec::new();
        log.write_jsonl(&mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 1);
        let back = RoundLog::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.records, log.records);
    }
}
