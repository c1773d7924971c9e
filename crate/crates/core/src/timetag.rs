//! Text time-tag files.
//!
//! ```text
//! # timetag v1
//! 0,1532
//! 1,2817
//! ```
//!
//! One `channel,timestamp_ps` row per click, globally sorted by timestamp
//! (ties broken by channel). Channel 0 is the signal or herald detector,
//! 1 the idler or idler-B detector, 2 the idler-C detector.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::eventsim::TimeTagStream;

pub const HEADER: &str = "# timetag v1";

/// Merge streams and write them in file order.
pub fn write_timetags<W: Write>(mut out: W, streams: &[&TimeTagStream]) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    let mut cursors = vec![0usize; streams.len()];
    loop {
        let mut best: Option<(i64, u8, usize)> = None;
        for (k, s) in streams.iter().enumerate() {
            if let Some(&t) = s.timestamps().get(cursors[k]) {
                let key = (t, s.channel, k);
                if best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
        let Some((t, ch, k)) = best else { break };
        writeln!(out, "{ch},{t}")?;
        cursors[k] += 1;
    }
    out.flush()?;
    Ok(())
}

/// Read a time-tag file into per-channel timestamp lists.
pub fn read_timetags<R: BufRead>(input: R) -> Result<BTreeMap<u8, Vec<i64>>> {
    let mut lines = input.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim() == HEADER => {}
        Some((_, Err(e))) => return Err(e.into()),
        _ => {
            return Err(Error::Parse { line: 1, reason: format!("expected header `{HEADER}`") });
        }
    }
    let mut channels: BTreeMap<u8, Vec<i64>> = BTreeMap::new();
    let mut last = i64::MIN;
    for (i, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::Parse { line: i + 1, reason: format!("malformed row `{line}`") };
        let (ch, ts) = line.split_once(',').ok_or_else(bad)?;
        let ch: u8 = ch.trim().parse().map_err(|_| bad())?;
        let ts: i64 = ts.trim().parse().map_err(|_| bad())?;
        if ts < last {
            return Err(Error::Parse { line: i + 1, reason: "timestamps are not sorted".into() });
        }
        last = ts;
        channels.entry(ch).or_default().push(ts);
    }
    Ok(channels)
}

/// Streams for `channels` from a parsed file; absent channels become empty.
pub fn streams_from_file(
    parsed: &BTreeMap<u8, Vec<i64>>,
    channels: &[u8],
    duration: f64,
) -> Result<Vec<TimeTagStream>> {
    channels.iter().map(|&ch| TimeTagStream::new(ch, parsed.get(&ch).cloned().unwrap_or_default(), duration)).collect()
}
