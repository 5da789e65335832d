//! File formats.
//!
//! * Raw binary signal (`.icdx`): a 64-byte little-endian header
//!   `{ magic "ICDX", version: u32, channels: u32, length: u64, sample_rate: f64 }`
//!   zero-padded to 64 bytes, followed by `length * channels` little-endian
//!   `f64` samples interleaved by channel (sample 0 of every channel, then
//!   sample 1, ...).
//! * CSV signal: header row `t,ch0,ch1,...`, one row per sample, `t` in seconds.
//! * Key-value text: UTF-8 `key = value` lines; blank lines and lines starting
//!   with `#` are ignored. Vectors and row-major matrices are comma-separated.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::signal::MultichannelSignal;

pub const MAGIC: [u8; 4] = *b"ICDX";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

/// Formats a float so that parsing it back yields the identical value.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_signal_bin<W: Write>(mut w: W, s: &MultichannelSignal) -> Result<()> {
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(&MAGIC);
    header[4..8].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
    header[8..12].copy_from_slice(&(s.channels() as u32).to_le_bytes());
    header[12..20].copy_from_slice(&(s.len() as u64).to_le_bytes());
    header[20..28].copy_from_slice(&s.sample_rate().to_le_bytes());
    w.write_all(&header)?;
    let data = s.data();
    let mut buf = Vec::with_capacity(s.channels() * 8);
    for k in 0..s.len() {
        buf.clear();
        for c in 0..s.channels() {
            buf.extend_from_slice(&data[[c, k]].to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_signal_bin<R: Read>(mut r: R) -> Result<MultichannelSignal> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    if header[0..4] != MAGIC {
        return Err(Error::Format("bad magic, not an ICDX signal file".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported ICDX version {version}")));
    }
    let channels = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let length = u64::from_le_bytes(header[12..20].try_into().unwrap()) as usize;
    let rate = f64::from_le_bytes(header[20..28].try_into().unwrap());
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    if raw.len() != channels * length * 8 {
        return Err(Error::Format(format!(
            "expected {} data bytes for {channels}x{length}, found {}",
            channels * length * 8,
            raw.len()
        )));
    }
    let mut data = Array2::<f64>::zeros((channels, length));
    for (i, chunk) in raw.chunks_exact(8).enumerate() {
        data[[i % channels, i / channels]] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    MultichannelSignal::new(data, rate)
}

pub fn write_signal_csv<W: Write>(mut w: W, s: &MultichannelSignal) -> Result<()> {
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..s.channels()).map(|c| format!("ch{c}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    let data = s.data();
    for k in 0..s.len() {
        write!(w, "{}", fmt_f64(s.time(k)))?;
        for c in 0..s.channels() {
            write!(w, ",{}", fmt_f64(data[[c, k]]))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV signal. The sample rate is recovered from the first time step
/// and snapped to a whole number of hertz when within one part in 10⁹.
pub fn read_signal_csv<R: Read>(r: R) -> Result<MultichannelSignal> {
    let mut lines = BufReader::new(r).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty CSV".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.first() != Some(&"t")
        || cols
            .iter()
            .skip(1)
            .enumerate()
            .any(|(i, c)| *c != format!("ch{i}"))
        || cols.len() < 2
    {
        return Err(Error::Format(format!("bad CSV header `{header}`")));
    }
    let channels = cols.len() - 1;
    let mut times = Vec::new();
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); channels];
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("CSV line {}: {e}", lineno + 2)))?;
        if vals.len() != cols.len() {
            return Err(Error::Format(format!(
                "CSV line {}: expected {} fields, found {}",
                lineno + 2,
                cols.len(),
                vals.len()
            )));
        }
        times.push(vals[0]);
        for (c, v) in vals[1..].iter().enumerate() {
            data[c].push(*v);
        }
    }
    if times.len() < 2 {
        return Err(Error::Format("CSV needs at least two samples".into()));
    }
    let mut rate = 1.0 / (times[1] - times[0]);
    if (rate - rate.round()).abs() <= 1e-9 * rate {
        rate = rate.round();
    }
    MultichannelSignal::from_channels(&data, rate)
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Saves as CSV when the path ends in `.csv`, raw binary otherwise.
pub fn save_signal(path: &Path, s: &MultichannelSignal) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    if is_csv(path) {
        write_signal_csv(w, s)
    } else {
        write_signal_bin(w, s)
    }
}

pub fn load_signal(path: &Path) -> Result<MultichannelSignal> {
    let r = BufReader::new(File::open(path)?);
    if is_csv(path) {
        read_signal_csv(r)
    } else {
        read_signal_bin(r)
    }
}

/// Ordered `key = value` records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            line: 0,
        });
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, fmt_f64(value));
    }

    pub fn push_vector(&mut self, key: &str, values: impl IntoIterator<Item = f64>) {
        let v: Vec<String> = values.into_iter().map(fmt_f64).collect();
        self.push(key, v.join(","));
    }

    pub fn push_matrix(&mut self, key: &str, m: &Array2<f64>) {
        self.push_vector(key, m.iter().copied());
    }

    pub fn extend(&mut self, other: KeyValues) {
        self.entries.extend(other.entries);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .map(|e| e.value.as_str())
    }

    /// Source line of `key` when parsed from text, 0 otherwise.
    pub fn line_of(&self, key: &str) -> usize {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .map_or(0, |e| e.line)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|e| (e.key.as_str(), e.value.as_str()))
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Format(format!("missing key `{key}`")))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| {
            Error::Format(format!(
                "line {}: cannot parse `{raw}` for key `{key}`",
                self.line_of(key)
            ))
        })
    }

    pub fn vector(&self, key: &str, len: usize) -> Result<Vec<f64>> {
        let raw = self.require(key)?;
        let v: Vec<f64> = raw
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("key `{key}`: {e}")))?;
        if v.len() != len {
            return Err(Error::Format(format!(
                "key `{key}`: expected {len} values, found {}",
                v.len()
            )));
        }
        Ok(v)
    }

    pub fn matrix(&self, key: &str, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let v = self.vector(key, rows * cols)?;
        Ok(Array2::from_shape_vec((rows, cols), v).expect("length checked"))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }
}

impl std::fmt::Display for KeyValues {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.entries {
            writeln!(f, "{} = {}", e.key, e.value)?;
        }
        Ok(())
    }
}

impl FromStr for KeyValues {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut kv = KeyValues::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("line {}: expected `key = value`, found `{line}`", i + 1))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Format(format!("line {}: empty key", i + 1)));
            }
            if kv.get(key).is_some() {
                return Err(Error::Format(format!("line {}: duplicate key `{key}`", i + 1)));
            }
            kv.entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line: i + 1,
            });
        }
        Ok(kv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_signal() -> MultichannelSignal {
        let a: Vec<f64> = (0..50).map(|k| (k as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..50).map(|k| 1e-9 * k as f64 - 3.0).collect();
        MultichannelSignal::from_channels(&[a, b], 8.0e6).unwrap()
    }

    #[test]
    fn binary_header_layout() {
        let mut buf = Vec::new();
        write_signal_bin(&mut buf, &sample_signal()).unwrap();
        assert_eq!(&buf[0..4], b"ICDX");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[12..20].try_into().unwrap()), 50);
        assert_eq!(f64::from_le_bytes(buf[20..28].try_into().unwrap()), 8.0e6);
        assert!(buf[28..64].iter().all(|&b| b == 0));
        assert_eq!(buf.len(), 64 + 2 * 50 * 8);
        // Interleaved: second value in the payload is channel 1, sample 0.
        assert_eq!(f64::from_le_bytes(buf[72..80].try_into().unwrap()), -3.0);
    }

    #[test]
    fn binary_rejects_garbage() {
        assert!(read_signal_bin(&b"NOPE"[..]).is_err());
        let mut buf = Vec::new();
        write_signal_bin(&mut buf, &sample_signal()).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_signal_bin(&buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let s = sample_signal();
        let mut buf = Vec::new();
        write_signal_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,ch0,ch1\n0,"));
        assert_eq!(read_signal_csv(&buf[..]).unwrap(), s);
        assert!(read_signal_csv(&b"time,a\n0,1\n"[..]).is_err());
    }

    #[test]
    fn key_values_parse_errors_carry_lines() {
        let err = "a = 1\n\n# c\nbroken line\n".parse::<KeyValues>().unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
        let err = "a = 1\na = 2\n".parse::<KeyValues>().unwrap_err();
        assert!(err.to_string().contains("duplicate"));
        let kv: KeyValues = "x = 1, 2 ,3\ny=abc".parse().unwrap();
        assert_eq!(kv.vector("x", 3).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(kv.get("y"), Some("abc"));
        assert_eq!(kv.line_of("y"), 2);
        assert!(kv.parse::<f64>("y").unwrap_err().to_string().contains("line 2"));
    }

    proptest! {
        #[test]
        fn binary_round_trip(
            values in proptest::collection::vec(-1e12f64..1e12, 2..64),
            rate in 1.0f64..1e9,
            chans in 1usize..4,
        ) {
            let n = values.len();
            let data = Array2::from_shape_fn((chans, n), |(c, k)| values[k] * (c as f64 + 1.0));
            let s = MultichannelSignal::new(data, rate).unwrap();
            let mut buf = Vec::new();
            write_signal_bin(&mut buf, &s).unwrap();
            prop_assert_eq!(read_signal_bin(&buf[..]).unwrap(), s);
        }

        #[test]
        fn float_text_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
