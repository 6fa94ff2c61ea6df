//! Chain data to model inputs.
//!
//! A snapshot is a contiguous run of block headers ending at the tip. On disk
//! it is line-delimited JSON, one header per line in ascending height order:
//!
//! ```text
//! {"height": 419326, "time": 1467138014, "difficulty": 213398925331.3239}
//! {"height": 419327, "time": 1467138389, "difficulty": 213398925331.3239}
//! ```
//!
//! `time` is the block timestamp in unix seconds (UTC). An HTTP source serves
//! the same objects as a JSON array from `GET <base>/headers?count=W`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Duration as StdDuration;

use serde::{Deserialize, Serialize};

use crate::error::{IngestError, Result};
use crate::hashrate::Hashrate;
use crate::retarget::{position_from_heights, RetargetParams, RetargetPosition};
use crate::schedule::{next_halving_height, BlockHeight};
use crate::sim::HASHES_PER_DIFFICULTY;
use crate::units::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeaderRecord {
    pub height: BlockHeight,
    pub time: Timestamp,
    pub difficulty: f64,
}

/// Wire form of a header.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHeader {
    height: u64,
    time: i64,
    difficulty: f64,
}

impl RawHeader {
    fn into_record(self) -> Result<HeaderRecord, IngestError> {
        let time = Timestamp::from_unix(self.time).map_err(|_| IngestError::BadTimestamp {
            height: self.height,
            time: self.time,
        })?;
        Ok(HeaderRecord {
            height: BlockHeight(self.height),
            time,
            difficulty: self.difficulty,
        })
    }
}

impl From<&HeaderRecord> for RawHeader {
    fn from(r: &HeaderRecord) -> Self {
        RawHeader {
            height: r.height.get(),
            time: r.time.unix(),
            difficulty: r.difficulty,
        }
    }
}

/// Non-empty, contiguous headers ending at the tip.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainSnapshot {
    records: Vec<HeaderRecord>,
}

impl ChainSnapshot {
    pub fn from_records(records: Vec<HeaderRecord>) -> Result<Self, IngestError> {
        if records.is_empty() {
            return Err(IngestError::Empty);
        }
        for r in &records {
            if !(r.difficulty > 0.0 && r.difficulty.is_finite()) {
                return Err(IngestError::BadDifficulty {
                    height: r.height.get(),
                    difficulty: r.difficulty,
                });
            }
        }
        for w in records.windows(2) {
            let (prev, next) = (w[0].height.get(), w[1].height.get());
            if next != prev + 1 {
                return Err(IngestError::Gap {
                    previous: prev,
                    expected: prev + 1,
                    found: next,
                });
            }
        }
        Ok(ChainSnapshot { records })
    }

    pub fn tip(&self) -> &HeaderRecord {
        self.records.last().expect("snapshot is non-empty")
    }

    pub fn first(&self) -> &HeaderRecord {
        &self.records[0]
    }

    pub fn records(&self) -> &[HeaderRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The last `window` headers.
    pub fn tail(&self, window: usize) -> ChainSnapshot {
        let start = self.records.len().saturating_sub(window.max(1));
        ChainSnapshot {
            records: self.records[start..].to_vec(),
        }
    }
}

/// Parses line-delimited JSON headers. Blank lines are skipped; anything
/// else that fails to parse is an error carrying its 1-based line number.
pub fn parse_snapshot<R: BufRead>(reader: R) -> Result<ChainSnapshot, IngestError> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| IngestError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawHeader = serde_json::from_str(&line).map_err(|e| IngestError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        records.push(raw.into_record().map_err(|e| IngestError::Parse {
            line: line_no,
            message: e.to_string(),
        })?);
    }
    ChainSnapshot::from_records(records)
}

pub fn load_snapshot_file(path: impl AsRef<Path>) -> Result<ChainSnapshot, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_snapshot(BufReader::new(file))
}

pub fn write_snapshot<W: Write>(mut out: W, snapshot: &ChainSnapshot) -> std::io::Result<()> {
    for r in snapshot.records() {
        serde_json::to_writer(&mut out, &RawHeader::from(r))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_snapshot_file(path: impl AsRef<Path>, snapshot: &ChainSnapshot) -> Result<(), IngestError> {
    let path = path.as_ref();
    let io_err = |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_snapshot(BufWriter::new(file), snapshot).map_err(io_err)
}

/// Parses the body of a `/headers` response.
pub fn parse_headers_response(body: &str) -> Result<ChainSnapshot, IngestError> {
    let raw: Vec<RawHeader> = serde_json::from_str(body).map_err(|e| IngestError::Schema(e.to_string()))?;
    let records = raw
        .into_iter()
        .map(RawHeader::into_record)
        .collect::<Result<Vec<_>, _>>()?;
    ChainSnapshot::from_records(records)
}

/// Fetches the last `window` headers from `GET <base>/headers?count=<window>`.
pub fn fetch_snapshot_http(base: &str, window: usize, timeout: StdDuration) -> Result<ChainSnapshot, IngestError> {
    let url = format!("{}/headers?count={window}", base.trim_end_matches('/'));
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let mut response = agent.get(&url).call().map_err(|e| IngestError::Connection(e.to_string()))?;
    let status = response.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(IngestError::HttpStatus(status));
    }
    let mut body = String::new();
    response
        .body_mut()
        .as_reader()
        .read_to_string(&mut body)
        .map_err(|e| IngestError::Connection(e.to_string()))?;
    Ok(parse_headers_response(&body)?.tail(window))
}

/// Inverts the block rate law `H / (2^32 D)` over the snapshot:
/// `H = 2^32 * sum(D_i) / elapsed`, summing the difficulty of every block
/// after the first (the blocks whose mining time `elapsed` covers). With a
/// constant difficulty this is `2^32 * D * (blocks - 1) / elapsed`.
pub fn estimate_hashrate(snapshot: &ChainSnapshot) -> Result<Hashrate, IngestError> {
    if snapshot.len() < 2 {
        return Err(IngestError::TooFewBlocks {
            needed: 2,
            have: snapshot.len(),
        });
    }
    let (first, tip) = (snapshot.first(), snapshot.tip());
    let seconds = tip.time.unix() - first.time.unix();
    if seconds <= 0 {
        return Err(IngestError::ClockSkew {
            first: first.height.get(),
            last: tip.height.get(),
            seconds,
        });
    }
    let work: f64 = snapshot.records()[1..].iter().map(|r| r.difficulty).sum();
    let rate = HASHES_PER_DIFFICULTY * work / (seconds as f64 / 60.0);
    Hashrate::new(rate).map_err(|e| IngestError::Schema(e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelInputs {
    pub tip_height: BlockHeight,
    pub halving_height: BlockHeight,
    pub blocks_remaining: u64,
    pub position: RetargetPosition,
}

pub fn model_inputs_at(tip: BlockHeight, params: &RetargetParams) -> Result<ModelInputs> {
    let halving = next_halving_height(tip);
    let position = position_from_heights(tip, halving, params)?;
    Ok(ModelInputs {
        tip_height: tip,
        halving_height: halving,
        blocks_remaining: halving.get() - tip.get(),
        position,
    })
}

/// Blocks remaining and retarget position from the snapshot tip.
pub fn model_inputs(snapshot: &ChainSnapshot, params: &RetargetParams) -> Result<ModelInputs> {
    model_inputs_at(snapshot.tip().height, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<ChainSnapshot, IngestError> {
        parse_snapshot(Cursor::new(text))
    }

    const THREE: &str = r#"{"height": 10, "time": 1000, "difficulty": 2.0}
{"height": 11, "time": 1600, "difficulty": 2.0}
{"height": 12, "time": 2200, "difficulty": 2.5}
"#;

    #[test]
    fn well_formed_file() {
        let snap = parse(THREE).unwrap();
        assert_eq!(snap.len(), 3);
        assert_eq!(snap.tip().height, BlockHeight(12));
        assert_eq!(snap.tip().difficulty, 2.5);
    }

    #[test]
    fn height_gap_is_named() {
        let text = THREE.replace("\"height\": 11", "\"height\": 13");
        let err = parse(&text).unwrap_err();
        assert!(matches!(err, IngestError::Gap { previous: 10, expected: 11, found: 13 }), "{err}");
    }

    #[test]
    fn empty_file() {
        let err = parse("").unwrap_err();
        assert!(matches!(err, IngestError::Empty));
        assert_eq!(err.to_string(), "empty snapshot");
        assert!(matches!(parse("\n  \n").unwrap_err(), IngestError::Empty));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = THREE.replace("\"time\": 1600", "\"time\": \"soon\"");
        match parse(&text).unwrap_err() {
            IngestError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
        let missing = "{\"height\": 1, \"difficulty\": 1.0}\n";
        assert!(parse(missing).unwrap_err().to_string().contains("time"));
    }

    #[test]
    fn rejects_bad_difficulty() {
        let text = THREE.replace("2.5", "0");
        assert!(matches!(parse(&text).unwrap_err(), IngestError::BadDifficulty { height: 12, .. }));
    }

    #[test]
    fn response_schema_errors_name_the_field() {
        let err = parse_headers_response(r#"[{"time": 1, "difficulty": 1.0}]"#).unwrap_err();
        assert!(matches!(err, IngestError::Schema(_)));
        assert!(err.to_string().contains("height"), "{err}");
        assert!(matches!(parse_headers_response("[]").unwrap_err(), IngestError::Empty));
    }

    #[test]
    fn hashrate_at_equilibrium() {
        // 10 minute blocks at difficulty D => H = 2^32 D / 10 per minute
        let recs: Vec<_> = (0..11)
            .map(|i| HeaderRecord {
                height: BlockHeight(100 + i),
                time: Timestamp::from_unix(1_000_000 + 600 * i as i64).unwrap(),
                difficulty: 5.0,
            })
            .collect();
        let snap = ChainSnapshot::from_records(recs.clone()).unwrap();
        let h = estimate_hashrate(&snap).unwrap().per_minute();
        assert!((h - HASHES_PER_DIFFICULTY * 5.0 / 10.0).abs() < 1e-6 * h);

        let fast: Vec<_> = recs
            .iter()
            .map(|r| HeaderRecord {
                time: Timestamp::from_unix(1_000_000 + (r.time.unix() - 1_000_000) / 2).unwrap(),
                ..*r
            })
            .collect();
        let h2 = estimate_hashrate(&ChainSnapshot::from_records(fast).unwrap()).unwrap().per_minute();
        assert!((h2 / h - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hashrate_errors() {
        let one = parse("{\"height\": 1, \"time\": 5, \"difficulty\": 1.0}").unwrap();
        assert!(matches!(estimate_hashrate(&one), Err(IngestError::TooFewBlocks { .. })));
        let skewed = parse(&THREE.replace("2200", "1000").replace("1600", "900")).unwrap();
        assert!(matches!(estimate_hashrate(&skewed), Err(IngestError::ClockSkew { .. })));
    }

    #[test]
    fn inputs_from_tip() {
        let p = RetargetParams::bitcoin();
        let at = |h| model_inputs_at(BlockHeight(h), &p).unwrap();
        let a = at(414_524);
        assert_eq!((a.blocks_remaining, a.halving_height), (5476, BlockHeight(420_000)));
        let b = at(419_328);
        assert_eq!((b.blocks_remaining, b.position.n(), b.position.m()), (672, 1, 672));
        let c = at(419_999);
        assert_eq!((c.blocks_remaining, c.position.n(), c.position.m()), (1, 1, 672));
    }

    #[test]
    fn tail_keeps_the_tip() {
        let snap = parse(THREE).unwrap();
        assert_eq!(snap.tail(2).first().height, BlockHeight(11));
        assert_eq!(snap.tail(10).len(), 3);
        assert_eq!(snap.tail(0).len(), 1);
    }
}
