//! Recording and epoch files.
//!
//! CSV layout: metadata lines starting with `#` (`# sample_rate,<hz>`,
//! `# onset,<sample>,<target|distractor>` or `# label,<target|distractor>`),
//! then a header row of channel names, then one row per sample with one column
//! per channel. Values use the shortest decimal that parses back to the same
//! float, so files round-trip bit-exact.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! recording: b"EEGREC01" | u32 channels | f64 rate | u64 samples | u64 onsets
//!            | onsets × (u64 sample, u8 label) | channels × (u32 len, utf8 name)
//!            | channels × samples × f64 (channel-major)
//! epoch:     b"EEGEPO01" | u32 channels | f64 rate | u64 samples | u8 label
//!            | channels × samples × f64 (channel-major)
//! ```
//! Label bytes: 1 = target, 0 = distractor.

use std::fmt::Write as _;

use super::conditioning::Epoch;
use super::recording::{ClassLabel, Onset, Recording};
use super::SynthError;
use crate::scalar::Real;

const RECORDING_MAGIC: &[u8; 8] = b"EEGREC01";
const EPOCH_MAGIC: &[u8; 8] = b"EEGEPO01";

fn label_str(l: ClassLabel) -> &'static str {
    match l {
        ClassLabel::Target => "target",
        ClassLabel::Distractor => "distractor",
    }
}

fn parse_label(s: &str) -> Result<ClassLabel, SynthError> {
    match s.trim() {
        "target" => Ok(ClassLabel::Target),
        "distractor" => Ok(ClassLabel::Distractor),
        other => Err(SynthError::Format(format!("unknown label {other:?}"))),
    }
}

fn write_rows<F: Real>(out: &mut String, names: &[String], data: &[Vec<F>]) {
    out.push_str(&names.join(","));
    out.push('\n');
    let len = data.first().map_or(0, Vec::len);
    for i in 0..len {
        for (c, ch) in data.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{}", ch[i]).unwrap();
        }
        out.push('\n');
    }
}

struct ParsedCsv<F> {
    meta: Vec<Vec<String>>,
    names: Vec<String>,
    data: Vec<Vec<F>>,
}

fn parse_csv<F: Real>(text: &str) -> Result<ParsedCsv<F>, SynthError> {
    let mut meta = Vec::new();
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = loop {
        let line = lines
            .next()
            .ok_or_else(|| SynthError::Format("missing header row".into()))?;
        match line.strip_prefix('#') {
            Some(rest) => meta.push(rest.trim().split(',').map(|s| s.trim().to_string()).collect()),
            None => break line,
        }
    };
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut data = vec![Vec::new(); names.len()];
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(SynthError::Format(format!("row {row} has {} fields", fields.len())));
        }
        for (ch, f) in data.iter_mut().zip(fields) {
            let v = F::from_str_radix(f.trim(), 10)
                .map_err(|_| SynthError::Format(format!("bad number {f:?} in row {row}")))?;
            ch.push(v);
        }
    }
    Ok(ParsedCsv { meta, names, data })
}

fn meta_rate(meta: &[Vec<String>]) -> Result<u32, SynthError> {
    meta.iter()
        .find(|m| m.first().map(String::as_str) == Some("sample_rate"))
        .and_then(|m| m.get(1))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| SynthError::Format("missing sample_rate metadata".into()))
}

pub fn recording_to_csv<F: Real>(rec: &Recording<F>) -> String {
    let mut out = String::new();
    writeln!(out, "# sample_rate,{}", rec.sample_rate()).unwrap();
    for o in rec.onsets() {
        writeln!(out, "# onset,{},{}", o.sample, label_str(o.label)).unwrap();
    }
    write_rows(&mut out, rec.channel_names(), rec.data());
    out
}

pub fn recording_from_csv<F: Real>(text: &str) -> Result<Recording<F>, SynthError> {
    let parsed = parse_csv::<F>(text)?;
    let rate = meta_rate(&parsed.meta)?;
    let onsets = parsed
        .meta
        .iter()
        .filter(|m| m.first().map(String::as_str) == Some("onset"))
        .map(|m| {
            if m.len() != 3 {
                return Err(SynthError::Format("onset metadata needs sample and label".into()));
            }
            Ok(Onset {
                sample: m[1]
                    .parse()
                    .map_err(|_| SynthError::Format(format!("bad onset {:?}", m[1])))?,
                label: parse_label(&m[2])?,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Recording::new(parsed.names, rate, parsed.data, onsets)
}

pub fn epoch_to_csv<F: Real>(epoch: &Epoch<F>) -> String {
    let mut out = String::new();
    writeln!(out, "# sample_rate,{}", epoch.sample_rate()).unwrap();
    writeln!(out, "# label,{}", label_str(epoch.label())).unwrap();
    let names: Vec<String> = (0..epoch.channels()).map(|c| format!("ch{c:02}")).collect();
    write_rows(&mut out, &names, epoch.data());
    out
}

pub fn epoch_from_csv<F: Real>(text: &str) -> Result<Epoch<F>, SynthError> {
    let parsed = parse_csv::<F>(text)?;
    let rate = meta_rate(&parsed.meta)?;
    let label = parsed
        .meta
        .iter()
        .find(|m| m.first().map(String::as_str) == Some("label"))
        .and_then(|m| m.get(1))
        .ok_or_else(|| SynthError::Format("missing label metadata".into()))
        .and_then(|s| parse_label(s))?;
    Epoch::new(rate, parsed.data, label)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SynthError> {
        if self.buf.len() < n {
            return Err(SynthError::Format("truncated binary container".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, SynthError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, SynthError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, SynthError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, SynthError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn channels<F: Real>(&mut self, channels: usize, samples: usize) -> Result<Vec<Vec<F>>, SynthError> {
        (0..channels)
            .map(|_| (0..samples).map(|_| self.f64().map(F::lit)).collect())
            .collect()
    }
}

fn label_byte(l: ClassLabel) -> u8 {
    l.is_target() as u8
}

fn byte_label(b: u8) -> Result<ClassLabel, SynthError> {
    match b {
        1 => Ok(ClassLabel::Target),
        0 => Ok(ClassLabel::Distractor),
        _ => Err(SynthError::Format(format!("bad label byte {b}"))),
    }
}

fn rate_from_f64(rate: f64) -> Result<u32, SynthError> {
    if rate.fract() != 0.0 || rate <= 0.0 || rate > u32::MAX as f64 {
        return Err(SynthError::Format(format!("non-integral sample rate {rate}")));
    }
    Ok(rate as u32)
}

pub fn recording_to_bytes<F: Real>(rec: &Recording<F>) -> Vec<u8> {
    let mut out = Vec::with_capacity(40 + rec.channels() * rec.len() * 8);
    out.extend_from_slice(RECORDING_MAGIC);
    out.extend_from_slice(&(rec.channels() as u32).to_le_bytes());
    out.extend_from_slice(&(rec.sample_rate() as f64).to_le_bytes());
    out.extend_from_slice(&(rec.len() as u64).to_le_bytes());
    out.extend_from_slice(&(rec.onsets().len() as u64).to_le_bytes());
    for o in rec.onsets() {
        out.extend_from_slice(&(o.sample as u64).to_le_bytes());
        out.push(label_byte(o.label));
    }
    for name in rec.channel_names() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    for ch in rec.data() {
        for v in ch {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    out
}

pub fn recording_from_bytes<F: Real>(bytes: &[u8]) -> Result<Recording<F>, SynthError> {
    let mut r = Reader { buf: bytes };
    if r.take(8)? != RECORDING_MAGIC {
        return Err(SynthError::Format("not a recording container".into()));
    }
    let channels = r.u32()? as usize;
    let rate = rate_from_f64(r.f64()?)?;
    let samples = r.u64()? as usize;
    let n_onsets = r.u64()? as usize;
    let onsets = (0..n_onsets)
        .map(|_| {
            Ok(Onset {
                sample: r.u64()? as usize,
                label: byte_label(r.u8()?)?,
            })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;
    let names = (0..channels)
        .map(|_| {
            let len = r.u32()? as usize;
            String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| SynthError::Format("channel name is not utf-8".into()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let data = r.channels(channels, samples)?;
    Recording::new(names, rate, data, onsets)
}

pub fn epoch_to_bytes<F: Real>(epoch: &Epoch<F>) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + epoch.channels() * epoch.samples() * 8);
    out.extend_from_slice(EPOCH_MAGIC);
    out.extend_from_slice(&(epoch.channels() as u32).to_le_bytes());
    out.extend_from_slice(&(epoch.sample_rate() as f64).to_le_bytes());
    out.extend_from_slice(&(epoch.samples() as u64).to_le_bytes());
    out.push(label_byte(epoch.label()));
    for ch in epoch.data() {
        for v in ch {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    out
}

pub fn epoch_from_bytes<F: Real>(bytes: &[u8]) -> Result<Epoch<F>, SynthError> {
    let mut r = Reader { buf: bytes };
    if r.take(8)? != EPOCH_MAGIC {
        return Err(SynthError::Format("not an epoch container".into()));
    }
    let channels = r.u32()? as usize;
    let rate = rate_from_f64(r.f64()?)?;
    let samples = r.u64()? as usize;
    let label = byte_label(r.u8()?)?;
    let data = r.channels(channels, samples)?;
    Epoch::new(rate, data, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthsig::{extract_epochs, generate_recording, RecordingSpec};
    use proptest::prelude::*;

    fn small_recording(seed: u64) -> Recording<f64> {
        let spec = RecordingSpec {
            n_targets: 2,
            n_distractors: 2,
            channels: 3,
            sample_rate: 50,
            noise_band: 10.0,
            ..Default::default()
        };
        generate_recording(&spec, seed).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn recording_round_trips_bit_exact(seed in any::<u64>()) {
            let rec = small_recording(seed);
            let csv = recording_to_csv(&rec);
            prop_assert_eq!(&recording_from_csv::<f64>(&csv).unwrap(), &rec);
            let bin = recording_to_bytes(&rec);
            prop_assert_eq!(&recording_from_bytes::<f64>(&bin).unwrap(), &rec);
            prop_assert_eq!(recording_to_bytes(&recording_from_bytes::<f64>(&bin).unwrap()), bin);
        }
    }

    #[test]
    fn epoch_round_trips_bit_exact() {
        let rec = small_recording(5);
        let ep = &extract_epochs(&rec).unwrap()[1];
        assert_eq!(&epoch_from_csv::<f64>(&epoch_to_csv(ep)).unwrap(), ep);
        assert_eq!(&epoch_from_bytes::<f64>(&epoch_to_bytes(ep)).unwrap(), ep);

        let rec32: Recording<f32> = generate_recording(
            &RecordingSpec {
                n_targets: 1,
                n_distractors: 1,
                channels: 2,
                sample_rate: 50,
                noise_band: 10.0,
                ..Default::default()
            },
            9,
        )
        .unwrap();
        assert_eq!(recording_from_csv::<f32>(&recording_to_csv(&rec32)).unwrap(), rec32);
        assert_eq!(recording_from_bytes::<f32>(&recording_to_bytes(&rec32)).unwrap(), rec32);
    }

    #[test]
    fn malformed_inputs_fail() {
        assert!(recording_from_bytes::<f64>(b"EEGREC01\x01").is_err());
        assert!(recording_from_bytes::<f64>(b"XXXXXXXX").is_err());
        assert!(recording_from_csv::<f64>("a,b\n1,2\n").is_err());
        assert!(recording_from_csv::<f64>("# sample_rate,10\na,b\n1,x\n").is_err());
    }
}
