//! Little-endian binary files for spike events and codes.
//!
//! Event file (`SPKT`):
//!
//! | offset | type  | field        |
//! |--------|-------|--------------|
//! | 0      | [u8;4]| magic `SPKT` |
//! | 4      | u16   | version (1)  |
//! | 6      | u32   | n_channels   |
//! | 10     | u32   | sample_rate  |
//! | 14     | u64   | duration     |
//! | 22     | u64   | event_count  |
//! | 30     | u32   | flags (bit 0 = binarized) |
//! | 34     | ...   | `event_count` records of (channel: u32, time: u64) |
//!
//! Code file (`SPKC`): magic, version, n_kernels: u32, sample_rate: u32,
//! segment_len: u32, duration: u64, code_count: u64, flags: u32, then records
//! of (segment_index: u64, kernel: u32, tau: u32, intensity: f64).
//!
//! Both end with a CRC-32 (IEEE) of every preceding byte.

use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::io::write_atomic;
use crate::itp::{EventStream, SpikeEvent};
use crate::mp::Code;

pub const EVENT_MAGIC: [u8; 4] = *b"SPKT";
pub const CODE_MAGIC: [u8; 4] = *b"SPKC";
pub const FORMAT_VERSION: u16 = 1;
pub const FLAG_BINARIZED: u32 = 1;

const EVENT_HEADER_LEN: usize = 34;
const EVENT_RECORD_LEN: usize = 12;
const CODE_HEADER_LEN: usize = 38;
const CODE_RECORD_LEN: usize = 24;
const CHECKSUM_LEN: usize = 4;

/// Event stream plus the header flags it was stored with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventFile {
    pub stream: EventStream,
    pub flags: u32,
}

/// Codes plus the geometry needed to place them.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeFile {
    pub n_kernels: u32,
    pub sample_rate: u32,
    pub segment_len: u32,
    /// Samples covered by the encoded segments.
    pub duration: u64,
    pub codes: Vec<Code>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.pos..self.pos + N].try_into().expect("length checked");
        self.pos += N;
        out
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }
    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
}

fn finish(mut buf: Vec<u8>) -> Vec<u8> {
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

/// Common framing checks; returns the payload record count.
fn check_frame(bytes: &[u8], magic: [u8; 4], header_len: usize, record_len: usize, count_offset: usize) -> Result<u64, FormatError> {
    if bytes.len() < 4 {
        return Err(FormatError::TruncatedHeader(bytes.len()));
    }
    let found: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if found != magic {
        return Err(FormatError::BadMagic { expected: magic, found });
    }
    if bytes.len() < 6 {
        return Err(FormatError::TruncatedHeader(bytes.len()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    if bytes.len() < header_len {
        return Err(FormatError::TruncatedHeader(bytes.len()));
    }
    let count = u64::from_le_bytes(bytes[count_offset..count_offset + 8].try_into().expect("8 bytes"));
    let found = (bytes.len() - header_len) as u64;
    let expected = count
        .checked_mul(record_len as u64)
        .and_then(|v| v.checked_add(CHECKSUM_LEN as u64));
    match expected {
        Some(expected) if found == expected => {}
        Some(expected) if found < expected => return Err(FormatError::TruncatedPayload { expected, found }),
        Some(expected) => {
            let extra = found - expected;
            return Err(if extra.is_multiple_of(record_len as u64) {
                FormatError::CountMismatch {
                    header: count,
                    payload: (found - CHECKSUM_LEN as u64) / record_len as u64,
                }
            } else {
                FormatError::TrailingBytes(extra)
            });
        }
        None => {
            return Err(FormatError::TruncatedPayload {
                expected: u64::MAX,
                found,
            })
        }
    }
    let body = bytes.len() - CHECKSUM_LEN;
    let stored = u32::from_le_bytes(bytes[body..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(&bytes[..body]);
    if stored != computed {
        return Err(FormatError::ChecksumMismatch { stored, computed });
    }
    Ok(count)
}

pub fn encode_events(stream: &EventStream, flags: u32) -> Vec<u8> {
    let mut buf = Vec::with_capacity(EVENT_HEADER_LEN + stream.len() * EVENT_RECORD_LEN + CHECKSUM_LEN);
    buf.extend_from_slice(&EVENT_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&stream.n_channels.to_le_bytes());
    buf.extend_from_slice(&stream.sample_rate.to_le_bytes());
    buf.extend_from_slice(&stream.duration.to_le_bytes());
    buf.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    buf.extend_from_slice(&flags.to_le_bytes());
    for e in &stream.events {
        buf.extend_from_slice(&e.channel.to_le_bytes());
        buf.extend_from_slice(&e.time.to_le_bytes());
    }
    finish(buf)
}

pub fn decode_events(bytes: &[u8]) -> Result<EventFile, FormatError> {
    let count = check_frame(bytes, EVENT_MAGIC, EVENT_HEADER_LEN, EVENT_RECORD_LEN, 22)?;
    let mut r = Reader { bytes, pos: 6 };
    let n_channels = r.u32();
    let sample_rate = r.u32();
    let duration = r.u64();
    let _ = r.u64();
    let flags = r.u32();
    if flags & !FLAG_BINARIZED != 0 {
        return Err(FormatError::UnsupportedFlags(flags));
    }
    let mut events = Vec::with_capacity(count as usize);
    for index in 0..count {
        let channel = r.u32();
        let time = r.u64();
        if channel >= n_channels {
            return Err(FormatError::ChannelOutOfRange { channel, n_channels });
        }
        if time >= duration {
            return Err(FormatError::InvalidRecord {
                index,
                reason: format!("time {time} not below duration {duration}"),
            });
        }
        let event = SpikeEvent { time, channel };
        if events.last().is_some_and(|prev| *prev >= event) {
            return Err(FormatError::InvalidRecord {
                index,
                reason: "events not strictly sorted by (time, channel)".into(),
            });
        }
        events.push(event);
    }
    Ok(EventFile {
        stream: EventStream {
            events,
            n_channels,
            duration,
            sample_rate,
        },
        flags,
    })
}

pub fn encode_codes(file: &CodeFile) -> Vec<u8> {
    let mut buf = Vec::with_capacity(CODE_HEADER_LEN + file.codes.len() * CODE_RECORD_LEN + CHECKSUM_LEN);
    buf.extend_from_slice(&CODE_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&file.n_kernels.to_le_bytes());
    buf.extend_from_slice(&file.sample_rate.to_le_bytes());
    buf.extend_from_slice(&file.segment_len.to_le_bytes());
    buf.extend_from_slice(&file.duration.to_le_bytes());
    buf.extend_from_slice(&(file.codes.len() as u64).to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for c in &file.codes {
        buf.extend_from_slice(&(c.segment_index as u64).to_le_bytes());
        buf.extend_from_slice(&(c.kernel_index as u32).to_le_bytes());
        buf.extend_from_slice(&(c.tau as u32).to_le_bytes());
        buf.extend_from_slice(&c.intensity.to_le_bytes());
    }
    finish(buf)
}

pub fn decode_codes(bytes: &[u8]) -> Result<CodeFile, FormatError> {
    let count = check_frame(bytes, CODE_MAGIC, CODE_HEADER_LEN, CODE_RECORD_LEN, 26)?;
    let mut r = Reader { bytes, pos: 6 };
    let n_kernels = r.u32();
    let sample_rate = r.u32();
    let segment_len = r.u32();
    let duration = r.u64();
    let _ = r.u64();
    let flags = r.u32();
    if flags != 0 {
        return Err(FormatError::UnsupportedFlags(flags));
    }
    let mut codes = Vec::with_capacity(count as usize);
    for index in 0..count {
        let segment_index = r.u64();
        let kernel_index = r.u32();
        let tau = r.u32();
        let intensity = r.f64();
        let invalid = |reason: String| FormatError::InvalidRecord { index, reason };
        if kernel_index >= n_kernels {
            return Err(invalid(format!("kernel {kernel_index} outside 0..{n_kernels}")));
        }
        if tau >= segment_len {
            return Err(invalid(format!("tau {tau} outside segment of {segment_len}")));
        }
        let start = segment_index
            .checked_mul(u64::from(segment_len))
            .and_then(|v| v.checked_add(u64::from(tau)));
        if !start.is_some_and(|s| s < duration) {
            return Err(invalid(format!("segment {segment_index} lies past duration {duration}")));
        }
        if !(intensity.is_finite() && intensity != 0.0) {
            return Err(invalid(format!("intensity {intensity} is not a finite nonzero value")));
        }
        if codes.last().is_some_and(|c: &Code| c.segment_index as u64 > segment_index) {
            return Err(invalid("codes not grouped by ascending segment".into()));
        }
        codes.push(Code {
            segment_index: segment_index as usize,
            kernel_index: kernel_index as usize,
            tau: tau as usize,
            intensity,
        });
    }
    Ok(CodeFile {
        n_kernels,
        sample_rate,
        segment_len,
        duration,
        codes,
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_events(path: &Path, stream: &EventStream, flags: u32) -> Result<()> {
    write_atomic(path, &encode_events(stream, flags))
}

pub fn read_events(path: &Path) -> Result<EventFile> {
    Ok(decode_events(&read_bytes(path)?)?)
}

pub fn write_codes(path: &Path, file: &CodeFile) -> Result<()> {
    write_atomic(path, &encode_codes(file))
}

pub fn read_codes(path: &Path) -> Result<CodeFile> {
    Ok(decode_codes(&read_bytes(path)?)?)
}

/// Which binary format a byte buffer claims to be, by magic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Events,
    Codes,
}

pub fn sniff(bytes: &[u8]) -> Option<FileKind> {
    match bytes.get(..4)? {
        m if m == EVENT_MAGIC => Some(FileKind::Events),
        m if m == CODE_MAGIC => Some(FileKind::Codes),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture_stream() -> EventStream {
        EventStream::new(
            vec![
                SpikeEvent { time: 3, channel: 7 },
                SpikeEvent { time: 3, channel: 2 },
                SpikeEvent { time: 900, channel: 119 },
            ],
            120,
            1392,
            16_000,
        )
        .unwrap()
    }

    fn fixture_codes() -> CodeFile {
        CodeFile {
            n_kernels: 40,
            sample_rate: 16_000,
            segment_len: 696,
            duration: 1392,
            codes: vec![
                Code { segment_index: 0, kernel_index: 3, tau: 10, intensity: -0.125 },
                Code { segment_index: 1, kernel_index: 39, tau: 0, intensity: 2.5e-7 },
            ],
        }
    }

    #[test]
    fn empty_stream_is_header_only() {
        let stream = EventStream::empty(120, 0, 16_000);
        let bytes = encode_events(&stream, 0);
        assert_eq!(bytes.len(), EVENT_HEADER_LEN + CHECKSUM_LEN);
        assert_eq!(decode_events(&bytes).unwrap().stream, stream);
    }

    #[test]
    fn three_event_round_trip() {
        let stream = fixture_stream();
        let bytes = encode_events(&stream, FLAG_BINARIZED);
        assert_eq!(bytes.len(), EVENT_HEADER_LEN + 3 * EVENT_RECORD_LEN + CHECKSUM_LEN);
        assert_eq!(&bytes[..4], b"SPKT");
        let file = decode_events(&bytes).unwrap();
        assert_eq!(file.stream, stream);
        assert_eq!(file.flags, FLAG_BINARIZED);
        assert_eq!(encode_events(&file.stream, file.flags), bytes);
    }

    #[test]
    fn negative_intensity_survives() {
        let file = fixture_codes();
        let back = decode_codes(&encode_codes(&file)).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.codes[0].intensity.to_bits(), (-0.125f64).to_bits());
        let empty = CodeFile { codes: vec![], ..file };
        assert_eq!(decode_codes(&encode_codes(&empty)).unwrap(), empty);
    }

    #[test]
    fn every_truncation_is_an_error() {
        for bytes in [encode_events(&fixture_stream(), 0), encode_codes(&fixture_codes())] {
            for len in 0..bytes.len() {
                let cut = &bytes[..len];
                let err = if sniff(&bytes) == Some(FileKind::Events) {
                    decode_events(cut).err()
                } else {
                    decode_codes(cut).err()
                };
                assert!(
                    matches!(
                        err,
                        Some(FormatError::TruncatedHeader(_) | FormatError::TruncatedPayload { .. })
                    ),
                    "len {len}: {err:?}"
                );
            }
        }
    }

    #[test]
    fn distinguishable_errors() {
        let mut bytes = encode_events(&fixture_stream(), 0);
        bytes[0] = b'X';
        assert!(matches!(decode_events(&bytes), Err(FormatError::BadMagic { .. })));

        let mut bytes = encode_events(&fixture_stream(), 0);
        bytes[4] = 9;
        assert!(matches!(decode_events(&bytes), Err(FormatError::UnsupportedVersion(9))));

        let mut bytes = encode_events(&fixture_stream(), 0);
        bytes[22] = 4;
        assert!(matches!(decode_events(&bytes), Err(FormatError::TruncatedPayload { .. })));

        let mut bytes = encode_events(&fixture_stream(), 0);
        bytes.splice(34..34, [0u8; 12]);
        assert!(matches!(decode_events(&bytes), Err(FormatError::CountMismatch { header: 3, payload: 4 })));

        let mut bytes = encode_events(&fixture_stream(), 0);
        bytes.push(0);
        assert!(matches!(decode_events(&bytes), Err(FormatError::TrailingBytes(1))));

        let mut bytes = encode_events(&fixture_stream(), 0);
        bytes[20] ^= 1;
        assert!(matches!(decode_events(&bytes), Err(FormatError::ChecksumMismatch { .. })));

        assert!(matches!(decode_codes(&encode_events(&fixture_stream(), 0)), Err(FormatError::BadMagic { .. })));
    }

    #[test]
    fn semantic_record_checks() {
        // Valid framing and checksum around an out-of-range channel.
        let stream = EventStream {
            events: vec![SpikeEvent { time: 1, channel: 5 }],
            n_channels: 3,
            duration: 10,
            sample_rate: 16_000,
        };
        assert!(matches!(
            decode_events(&encode_events(&stream, 0)),
            Err(FormatError::ChannelOutOfRange { channel: 5, n_channels: 3 })
        ));
        let unsorted = EventStream {
            events: vec![SpikeEvent { time: 4, channel: 0 }, SpikeEvent { time: 1, channel: 0 }],
            n_channels: 3,
            duration: 10,
            sample_rate: 16_000,
        };
        assert!(matches!(decode_events(&encode_events(&unsorted, 0)), Err(FormatError::InvalidRecord { index: 1, .. })));
        assert!(matches!(
            decode_events(&encode_events(&fixture_stream(), 0x4)),
            Err(FormatError::UnsupportedFlags(4))
        ));
    }

    proptest! {
        #[test]
        fn event_round_trip(raw in proptest::collection::vec((0u32..120, 0u64..100_000), 0..200)) {
            let events = raw.into_iter().map(|(channel, time)| SpikeEvent { time, channel }).collect::<std::collections::BTreeSet<_>>();
            let stream = EventStream::new(events.into_iter().collect(), 120, 100_000, 16_000).unwrap();
            let bytes = encode_events(&stream, 0);
            prop_assert_eq!(decode_events(&bytes).unwrap().stream, stream);
        }

        #[test]
        fn code_round_trip(raw in proptest::collection::vec((0usize..40, 0usize..696, any::<f64>()), 0..200)) {
            let mut codes: Vec<Code> = raw
                .into_iter()
                .enumerate()
                .filter(|(_, (_, _, s))| s.is_finite() && *s != 0.0)
                .map(|(i, (m, tau, s))| Code { segment_index: i / 16, kernel_index: m, tau, intensity: s })
                .collect();
            codes.sort_by_key(|c| c.segment_index);
            let file = CodeFile { n_kernels: 40, sample_rate: 16_000, segment_len: 696, duration: 696 * 20, codes };
            let back = decode_codes(&encode_codes(&file)).unwrap();
            prop_assert_eq!(encode_codes(&back), encode_codes(&file));
        }

        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let _ = decode_events(&bytes);
            let _ = decode_codes(&bytes);
        }
    }
}
