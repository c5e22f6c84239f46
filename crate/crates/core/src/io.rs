//! CSV formats for traces and per-tour / per-block diagnostics.
//!
//! Trace files carry a header `index,value` or `index,value,regen` with one row
//! per iteration. Values are written in plain decimal notation with 17
//! significant digits, which round-trips every finite `f64` exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::regen::RegenTrace;
use crate::trace::ScalarTrace;

/// Contents of a trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub values: Vec<f64>,
    pub regen: Option<Vec<bool>>,
}

impl TraceFile {
    pub fn scalar_trace(&self) -> Result<ScalarTrace> {
        ScalarTrace::new(self.values.clone())
    }

    pub fn regen_trace(&self) -> Result<RegenTrace> {
        let flags = self.regen.clone().ok_or(Error::MissingRegeneration)?;
        RegenTrace::new(self.values.clone(), flags)
    }
}

impl From<&RegenTrace> for TraceFile {
    fn from(trace: &RegenTrace) -> Self {
        Self { values: trace.values().to_vec(), regen: Some(trace.flags().to_vec()) }
    }
}

/// Plain decimal with 17 significant digits.
pub fn format_value(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.16}");
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (16 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn write_trace<W: Write>(out: W, values: &[f64], regen: Option<&[bool]>) -> Result<()> {
    if let Some(flags) = regen {
        if flags.len() != values.len() {
            return Err(Error::InvalidInput(format!("{} values but {} regeneration flags", values.len(), flags.len())));
        }
    }
    let mut out = BufWriter::new(out);
    match regen {
        Some(flags) => {
            writeln!(out, "index,value,regen")?;
            for (i, (v, f)) in values.iter().zip(flags).enumerate() {
                writeln!(out, "{i},{},{}", format_value(*v), u8::from(*f))?;
            }
        }
        None => {
            writeln!(out, "index,value")?;
            for (i, v) in values.iter().enumerate() {
                writeln!(out, "{i},{}", format_value(*v))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, trace: &TraceFile) -> Result<()> {
    write_trace(File::create(path)?, &trace.values, trace.regen.as_deref())
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

pub fn read_trace<R: Read>(input: R) -> Result<TraceFile> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let with_regen = match names.as_slice() {
        ["index", "value"] => false,
        ["index", "value", "regen"] => true,
        _ => return Err(parse_err(1, format!("expected header index,value[,regen], found {}", names.join(",")))),
    };
    let mut values = Vec::new();
    let mut flags = Vec::new();
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        record[0].parse::<u64>().map_err(|_| parse_err(line, format!("bad index {:?}", &record[0])))?;
        let value: f64 = record[1].parse().map_err(|_| parse_err(line, format!("bad value {:?}", &record[1])))?;
        if !value.is_finite() {
            return Err(parse_err(line, format!("value {value} is not finite")));
        }
        values.push(value);
        if with_regen {
            flags.push(match &record[2] {
                "0" => false,
                "1" => true,
                other => return Err(parse_err(line, format!("regen flag {other:?} is not 0 or 1"))),
            });
        }
    }
    if values.is_empty() {
        return Err(Error::DegenerateData("trace file has no rows".into()));
    }
    Ok(TraceFile { values, regen: with_regen.then_some(flags) })
}

pub fn read_trace_file(path: &Path) -> Result<TraceFile> {
    read_trace(BufReader::new(File::open(path)?))
}

/// `tour,length`, tours numbered from 1.
pub fn write_tour_summary<W: Write>(out: W, trace: &RegenTrace) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "tour,length")?;
    for (t, len) in trace.tour_lengths().iter().enumerate() {
        writeln!(out, "{},{len}", t + 1)?;
    }
    out.flush()?;
    Ok(())
}

/// `block_index,xi_star`, blocks numbered from 0.
pub fn write_block_quantiles<W: Write>(out: W, blocks: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "block_index,xi_star")?;
    for (i, x) in blocks.iter().enumerate() {
        writeln!(out, "{i},{}", format_value(*x))?;
    }
    out.flush()?;
    Ok(())
}
