//! Trace CSV format.
//!
//! ```text
//! # aligned=true
//! t,gx,gy,gz,ax,ay,az[,mx,my,mz]
//! 0,0,0,0,0,0,9.81
//! ```
//!
//! SI units, one sample per row. The `# aligned=` line is optional; when it
//! is absent a trace without magnetometer columns is taken as aligned.
//! Numbers are written with 9 significant digits.

use super::{ImuSample, RawTrace};
use crate::error::{Error, Result};
use std::io::{Read, Write};

const BASE_HEADER: [&str; 7] = ["t", "gx", "gy", "gz", "ax", "ay", "az"];
const MAG_HEADER: [&str; 3] = ["mx", "my", "mz"];

/// Shortest decimal form of `x` rounded to 9 significant digits.
pub fn format_sig9(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".to_string();
    }
    format!("{rounded}")
}

/// Parsed file plus the alignment flag found in it, if any.
pub struct TraceFile {
    pub samples: Vec<ImuSample>,
    pub aligned: Option<bool>,
}

pub fn parse(text: &str) -> Result<TraceFile> {
    let mut aligned = None;
    for line in text.lines().take_while(|l| l.trim_start().starts_with('#')) {
        let body = line.trim_start().trim_start_matches('#').trim();
        if let Some(value) = body.strip_prefix("aligned=") {
            aligned = Some(match value.trim() {
                "true" => true,
                "false" => false,
                other => return Err(Error::Parse(format!("bad aligned flag '{other}'"))),
            });
        }
    }

    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let has_mag = match names.len() {
        7 => false,
        10 => true,
        n => return Err(Error::Parse(format!("expected 7 or 10 columns, found {n}"))),
    };
    let expected: Vec<&str> = BASE_HEADER.iter().chain(if has_mag { &MAG_HEADER[..] } else { &[] }).copied().collect();
    if names != expected {
        return Err(Error::Parse(format!("unexpected header {names:?}, want {expected:?}")));
    }

    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let values: Vec<f64> = record
            .iter()
            .map(|v| v.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: '{v}': {e}", row + 1))))
            .collect::<Result<_>>()?;
        samples.push(ImuSample {
            t: values[0],
            gyro: [values[1], values[2], values[3]],
            accel: [values[4], values[5], values[6]],
            mag: has_mag.then(|| [values[7], values[8], values[9]]),
        });
    }
    Ok(TraceFile { samples, aligned })
}

/// Read a trace; `aligned_override` wins over the file's own flag.
pub fn read_trace<R: Read>(mut reader: R, aligned_override: Option<bool>) -> Result<RawTrace> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let file = parse(&text)?;
    let has_mag = file.samples.iter().all(|s| s.mag.is_some()) && !file.samples.is_empty();
    let aligned = aligned_override.or(file.aligned).unwrap_or(!has_mag);
    RawTrace::with_inferred_period(file.samples, aligned)
}

pub fn write_trace<W: Write>(writer: W, trace: &RawTrace) -> Result<()> {
    write_samples(writer, trace.samples(), Some(trace.already_aligned()))
}

pub fn write_samples<W: Write>(mut writer: W, samples: &[ImuSample], aligned: Option<bool>) -> Result<()> {
    if let Some(flag) = aligned {
        writeln!(writer, "# aligned={flag}")?;
    }
    let has_mag = !samples.is_empty() && samples.iter().all(|s| s.mag.is_some());
    let mut csv = csv::Writer::from_writer(writer);
    let header: Vec<&str> = BASE_HEADER.iter().chain(if has_mag { &MAG_HEADER[..] } else { &[] }).copied().collect();
    csv.write_record(&header)?;
    for s in samples {
        let mut row = vec![format_sig9(s.t)];
        row.extend(s.gyro.iter().chain(&s.accel).map(|v| format_sig9(*v)));
        if has_mag {
            row.extend(s.mag.unwrap().iter().map(|v| format_sig9(*v)));
        }
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reads_flag_and_optional_magnetometer() {
        let text = "# aligned=false\nt,gx,gy,gz,ax,ay,az,mx,my,mz\n0,0,0,0.1,0,0,9.81,0,20,-40\n0.01,0,0,0.1,0,0,9.81,0,20,-40\n";
        let trace = read_trace(text.as_bytes(), None).unwrap();
        assert!(!trace.already_aligned());
        assert_eq!(trace.samples()[1].mag, Some([0.0, 20.0, -40.0]));

        let text = "t,gx,gy,gz,ax,ay,az\n0,0,0,0,0,0,9.81\n0.01,0,0,0,0,0,9.81\n";
        assert!(read_trace(text.as_bytes(), None).unwrap().already_aligned());
        assert!(!read_trace(text.as_bytes(), Some(false)).unwrap().already_aligned());
    }

    #[test]
    fn rejects_bad_header() {
        let text = "t,gx,gy,gz,ax,ay\n0,0,0,0,0,0\n";
        assert!(matches!(read_trace(text.as_bytes(), None), Err(Error::Parse(_))));
    }

    #[test]
    fn sig9_formatting_is_idempotent() {
        for x in [0.0, 1.0, -9.81, 1.0 / 3.0, 123456789.123, 1e-12, -2.5e300] {
            let once = format_sig9(x);
            let twice = format_sig9(once.parse().unwrap());
            assert_eq!(once, twice);
        }
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
    }

    proptest! {
        #[test]
        fn write_read_write_is_stable(
            rows in prop::collection::vec(prop::array::uniform9(-100.0f64..100.0), 2..20),
            with_mag in any::<bool>(),
        ) {
            let samples: Vec<ImuSample> = rows.iter().enumerate().map(|(i, r)| ImuSample {
                t: i as f64 * 0.01,
                gyro: [r[0], r[1], r[2]],
                accel: [r[3], r[4], r[5]],
                mag: with_mag.then(|| [r[6], r[7], r[8]]),
            }).collect();
            let trace = RawTrace::new(samples, 0.01, !with_mag).unwrap();
            let mut first = Vec::new();
            write_trace(&mut first, &trace).unwrap();
            let back = read_trace(first.as_slice(), None).unwrap();
            let mut second = Vec::new();
            write_trace(&mut second, &back).unwrap();
            prop_assert_eq!(&first, &second);
            for (a, b) in trace.samples().iter().zip(back.samples()) {
                for (x, y) in a.gyro.iter().zip(&b.gyro) {
                    prop_assert!((x - y).abs() <= 1e-8 * x.abs().max(1e-300));
                }
            }
        }
    }
}
