//! CSV serialization of spike trains and generic node paths.
//!
//! Spike-train batches use the columns (sample_id, neuron_id, spike_time).
//! Generic single paths use (time, v_1, ..., v_d, is_jump) where is_jump = 1
//! marks a post-jump node sharing its time with the previous row.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::path::CadlagPath;

pub fn write_spike_trains_csv(
    out: &mut impl Write,
    batch: &[Vec<Vec<f64>>],
) -> std::io::Result<()> {
    writeln!(out, "sample_id,neuron_id,spike_time")?;
    for (sample, trains) in batch.iter().enumerate() {
        for (neuron, train) in trains.iter().enumerate() {
            for t in train {
                writeln!(out, "{sample},{neuron},{t}")?;
            }
        }
    }
    Ok(())
}

/// Reads a spike-train batch. `n_neurons` and the batch size may be given to
/// keep silent neurons and spike-free samples; otherwise both are inferred
/// from the largest ids present.
pub fn read_spike_trains_csv(
    input: &mut impl BufRead,
    n_neurons: Option<usize>,
    batch: Option<usize>,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    let mut lines = input.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(line))) => line,
        Some((_, Err(err))) => return Err(Error::Parse { line: 1, message: err.to_string() }),
        None => return Err(Error::Parse { line: 1, message: "empty file".into() }),
    };
    if header.trim() != "sample_id,neuron_id,spike_time" {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header sample_id,neuron_id,spike_time, got {header:?}"),
        });
    }
    for (i, line) in lines {
        let line = line.map_err(|err| Error::Parse { line: i + 1, message: err.to_string() })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(',');
        let parse_err = |message: &str| Error::Parse { line: i + 1, message: message.to_string() };
        let sample: usize = fields
            .next()
            .ok_or_else(|| parse_err("missing sample_id"))?
            .trim()
            .parse()
            .map_err(|_| parse_err("sample_id is not an integer"))?;
        let neuron: usize = fields
            .next()
            .ok_or_else(|| parse_err("missing neuron_id"))?
            .trim()
            .parse()
            .map_err(|_| parse_err("neuron_id is not an integer"))?;
        let time: f64 = fields
            .next()
            .ok_or_else(|| parse_err("missing spike_time"))?
            .trim()
            .parse()
            .map_err(|_| parse_err("spike_time is not a number"))?;
        if fields.next().is_some() {
            return Err(parse_err("too many columns"));
        }
        rows.push((sample, neuron, time));
    }
    let n_samples = batch
        .or_else(|| rows.iter().map(|r| r.0 + 1).max())
        .ok_or_else(|| Error::Parse { line: 2, message: "no spikes and no batch size".into() })?;
    let k = n_neurons
        .or_else(|| rows.iter().map(|r| r.1 + 1).max())
        .ok_or_else(|| Error::Parse { line: 2, message: "no spikes and no neuron count".into() })?;
    let mut out = vec![vec![Vec::new(); k]; n_samples];
    for (line_offset, (sample, neuron, time)) in rows.into_iter().enumerate() {
        if sample >= n_samples || neuron >= k {
            return Err(Error::Parse {
                line: line_offset + 2,
                message: format!("ids ({sample}, {neuron}) outside ({n_samples}, {k})"),
            });
        }
        out[sample][neuron].push(time);
    }
    for trains in &mut out {
        for train in trains {
            train.sort_by(f64::total_cmp);
        }
    }
    Ok(out)
}

pub fn write_path_csv(out: &mut impl Write, path: &CadlagPath) -> std::io::Result<()> {
    write!(out, "time")?;
    for c in 1..=path.dim {
        write!(out, ",v_{c}")?;
    }
    writeln!(out, ",is_jump")?;
    for (i, (t, v)) in path.times.iter().zip(&path.values).enumerate() {
        let is_jump = i > 0 && path.times[i - 1] == *t;
        write!(out, "{t}")?;
        for x in v {
            write!(out, ",{x}")?;
        }
        writeln!(out, ",{}", if is_jump { 1 } else { 0 })?;
    }
    Ok(())
}

pub fn read_path_csv(input: &mut impl BufRead) -> Result<CadlagPath> {
    let mut lines = input.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(line))) => line,
        Some((_, Err(err))) => return Err(Error::Parse { line: 1, message: err.to_string() }),
        None => return Err(Error::Parse { line: 1, message: "empty file".into() }),
    };
    let columns: Vec<&str> = header.trim().split(',').collect();
    if columns.len() < 3 || columns[0] != "time" || *columns.last().unwrap() != "is_jump" {
        return Err(Error::Parse {
            line: 1,
            message: "expected header time,v_1,...,v_d,is_jump".into(),
        });
    }
    let dim = columns.len() - 2;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|err| Error::Parse { line: i + 1, message: err.to_string() })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected {} columns, got {}", dim + 2, fields.len()),
            });
        }
        let time: f64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse { line: i + 1, message: "time is not a number".into() })?;
        let mut value = Vec::with_capacity(dim);
        for f in &fields[1..=dim] {
            value.push(f.trim().parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: "value is not a number".into(),
            })?);
        }
        times.push(time);
        values.push(value);
    }
    CadlagPath::from_nodes(times, values)
}
