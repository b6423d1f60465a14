//! Corpus adapters: turn a fuzzer's seed file into the canonical input byte stream.

use std::collections::BTreeMap;

use serde::Deserialize;

pub const MULTISTREAM_FORMAT: &str = "multistream-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Adapter {
    /// Bytes pass through unchanged.
    Raw,
    /// Multi-stream JSON archive, flattened in declared access order.
    Multistream,
    /// Multistream when the file is such an archive, raw otherwise.
    #[default]
    Auto,
}

impl std::str::FromStr for Adapter {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "raw" => Ok(Adapter::Raw),
            "multistream" => Ok(Adapter::Multistream),
            "auto" => Ok(Adapter::Auto),
            _ => Err(format!("unknown adapter `{s}` (raw, multistream, auto)")),
        }
    }
}

/// `{"format": "multistream-v1", "pattern": [[stream, width], ...], "streams": {name: hex}}`.
///
/// Each stream holds the bytes one peripheral would have delivered. `pattern`
/// is the order in which the firmware's MMIO loads consume them; it repeats
/// until a stream can no longer supply its next chunk.
#[derive(Debug, Clone, Deserialize)]
pub struct MultistreamArchive {
    pub format: String,
    pub pattern: Vec<(String, usize)>,
    pub streams: BTreeMap<String, String>,
}

pub fn flatten_multistream(archive: &MultistreamArchive) -> Result<Vec<u8>, String> {
    if archive.format != MULTISTREAM_FORMAT {
        return Err(format!("unsupported archive format `{}`", archive.format));
    }
    if archive.pattern.is_empty() {
        return Err("empty access pattern".into());
    }
    let mut streams = BTreeMap::new();
    for (name, hex_bytes) in &archive.streams {
        let bytes = hex::decode(hex_bytes).map_err(|e| format!("stream `{name}`: {e}"))?;
        streams.insert(name.as_str(), (bytes, 0usize));
    }
    for (name, width) in &archive.pattern {
        if !streams.contains_key(name.as_str()) {
            return Err(format!("pattern names unknown stream `{name}`"));
        }
        if *width == 0 {
            return Err(format!("zero-width access on stream `{name}`"));
        }
    }
    let mut out = Vec::new();
    'outer: loop {
        for (name, width) in &archive.pattern {
            let (bytes, pos) = streams.get_mut(name.as_str()).unwrap();
            if *pos + width > bytes.len() {
                break 'outer;
            }
            out.extend_from_slice(&bytes[*pos..*pos + width]);
            *pos += width;
        }
    }
    Ok(out)
}

fn parse_archive(raw: &[u8]) -> Option<Result<MultistreamArchive, String>> {
    let first = raw.iter().find(|b| !b.is_ascii_whitespace())?;
    if *first != b'{' {
        return None;
    }
    let v: serde_json::Value = serde_json::from_slice(raw).ok()?;
    if v.get("format").and_then(|f| f.as_str()) != Some(MULTISTREAM_FORMAT) {
        return None;
    }
    Some(serde_json::from_value(v).map_err(|e| e.to_string()))
}

impl Adapter {
    pub fn apply(self, raw: &[u8]) -> Result<Vec<u8>, String> {
        match self {
            Adapter::Raw => Ok(raw.to_vec()),
            Adapter::Multistream => match parse_archive(raw) {
                Some(a) => flatten_multistream(&a?),
                None => Err("not a multistream-v1 archive".into()),
            },
            Adapter::Auto => match parse_archive(raw) {
                Some(a) => flatten_multistream(&a?),
                None => Ok(raw.to_vec()),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flattens_by_pattern() {
        let raw = br#"{"format":"multistream-v1","pattern":[["uart",1],["gpio",4]],
            "streams":{"uart":"414243","gpio":"0100000002000000"}}"#;
        let out = Adapter::Auto.apply(raw).unwrap();
        assert_eq!(out, vec![0x41, 1, 0, 0, 0, 0x42, 2, 0, 0, 0, 0x43]);
    }

    #[test]
    fn raw_passthrough() {
        assert_eq!(Adapter::Auto.apply(b"{not json").unwrap(), b"{not json");
        assert!(Adapter::Multistream.apply(b"abc").is_err());
    }
}
