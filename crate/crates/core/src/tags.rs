//! Time-tag streams and their on-disk formats.
//!
//! CSV: a `time_ps,channel` header, then one tag per line. Lines starting
//! with `#` are comments. Binary: 9-byte records, a little-endian `i64`
//! picosecond timestamp followed by a `u8` channel id.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "time_ps,channel";
pub const BINARY_RECORD_BYTES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Channel {
    Idler = 0,
    Sig1 = 1,
    Sig2 = 2,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Idler, Channel::Sig1, Channel::Sig2];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Idler => "idler",
            Channel::Sig1 => "sig1",
            Channel::Sig2 => "sig2",
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "idler" | "0" => Ok(Channel::Idler),
            "sig1" | "1" => Ok(Channel::Sig1),
            "sig2" | "2" => Ok(Channel::Sig2),
            _ => Err(Error::invalid("channel", format!("unknown channel {s:?}"))),
        }
    }
}

/// One detection. Orders by time, then channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag {
    pub time_ps: i64,
    pub channel: Channel,
}

impl Tag {
    pub fn new(time_ps: i64, channel: Channel) -> Self {
        Self { time_ps, channel }
    }
}

/// Tags sorted by time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TagStream {
    tags: Vec<Tag>,
}

impl TagStream {
    /// Fails if the tags are not in non-decreasing time order.
    pub fn new(tags: Vec<Tag>) -> Result<Self> {
        if let Some(k) = tags.windows(2).position(|w| w[1].time_ps < w[0].time_ps) {
            return Err(Error::invalid(
                "tags",
                format!("not sorted by time at index {}", k + 1),
            ));
        }
        Ok(Self { tags })
    }

    pub fn from_unsorted(mut tags: Vec<Tag>) -> Self {
        tags.sort_unstable();
        Self { tags }
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn into_inner(self) -> Vec<Tag> {
        self.tags
    }

    /// Timestamps of one channel, in order.
    pub fn times(&self, channel: Channel) -> Vec<i64> {
        self.tags
            .iter()
            .filter(|t| t.channel == channel)
            .map(|t| t.time_ps)
            .collect()
    }

    pub fn count(&self, channel: Channel) -> usize {
        self.tags.iter().filter(|t| t.channel == channel).count()
    }

    /// Writes the CSV form, with `comments` emitted as leading `# ` lines.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "{CSV_HEADER}")?;
        for t in &self.tags {
            writeln!(w, "{},{}", t.time_ps, t.channel.id())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut tags = Vec::new();
        let mut seen_header = false;
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !seen_header {
                if line != CSV_HEADER {
                    return Err(Error::Parse {
                        line: k + 1,
                        message: format!("expected header {CSV_HEADER:?}"),
                    });
                }
                seen_header = true;
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: k + 1,
                message,
            };
            let (time, channel) = line
                .split_once(',')
                .ok_or_else(|| parse_err("expected two comma-separated fields".into()))?;
            let time_ps = time
                .trim()
                .parse::<i64>()
                .map_err(|e| parse_err(format!("time: {e}")))?;
            let channel = channel
                .trim()
                .parse::<Channel>()
                .map_err(|e| parse_err(e.to_string()))?;
            tags.push(Tag { time_ps, channel });
        }
        Self::new(tags)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.tags {
            w.write_all(&t.time_ps.to_le_bytes())?;
            w.write_all(&[t.channel.id()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() % BINARY_RECORD_BYTES != 0 {
            return Err(Error::Parse {
                line: bytes.len() / BINARY_RECORD_BYTES + 1,
                message: "truncated binary record".into(),
            });
        }
        let mut tags = Vec::with_capacity(bytes.len() / BINARY_RECORD_BYTES);
        for (k, rec) in bytes.chunks_exact(BINARY_RECORD_BYTES).enumerate() {
            let time_ps = i64::from_le_bytes(rec[..8].try_into().expect("8 bytes"));
            let channel = Channel::from_id(rec[8]).ok_or_else(|| Error::Parse {
                line: k + 1,
                message: format!("invalid channel id {}", rec[8]),
            })?;
            tags.push(Tag { time_ps, channel });
        }
        Self::new(tags)
    }
}
