//! Text, PGM and CSV encodings of configurations and trajectories.

use std::io::{BufRead, Write};

use super::{Alphabet, Configuration, Geometry};
use crate::error::{PcaError, Result};

/// Header `d L1 .. Ld |S|` on the first line, then the symbols of each row.
/// The last axis runs along a line.
pub fn write_text<W: Write>(config: &Configuration, mut w: W) -> Result<()> {
    let sides = config.geometry().sides();
    let mut header = vec![sides.len().to_string()];
    header.extend(sides.iter().map(|s| s.to_string()));
    header.push(config.alphabet().size().to_string());
    writeln!(w, "{}", header.join(" "))?;
    let row = *sides.last().unwrap_or(&1);
    for chunk in config.cells().chunks(row.max(1)) {
        let line: Vec<String> = chunk.iter().map(|s| s.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn to_text(config: &Configuration) -> String {
    let mut buf = Vec::new();
    write_text(config, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("ascii output")
}

/// Reads the text format into a torus configuration.
pub fn read_text<R: BufRead>(r: R) -> Result<Configuration> {
    let mut tokens = Vec::new();
    for line in r.lines() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("");
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    let mut it = tokens.iter();
    let mut next_num = |what: &str| -> Result<usize> {
        let t = it
            .next()
            .ok_or_else(|| PcaError::Parse(format!("missing {what}")))?;
        t.parse::<usize>()
            .map_err(|_| PcaError::Parse(format!("bad {what}: {t:?}")))
    };
    let d = next_num("dimension")?;
    if d == 0 {
        return Err(PcaError::Parse("dimension must be positive".into()));
    }
    let sides = (0..d)
        .map(|_| next_num("side length"))
        .collect::<Result<Vec<_>>>()?;
    let q = next_num("alphabet size")?;
    let n: usize = sides.iter().product();
    let cells = (0..n)
        .map(|_| next_num("symbol").map(|s| s as u64))
        .collect::<Result<Vec<_>>>()?;
    if it.next().is_some() {
        return Err(PcaError::Parse(format!(
            "more than the expected {n} symbols"
        )));
    }
    if let Some(&s) = cells.iter().find(|&&s| s as usize >= q) {
        return Err(PcaError::InvalidSymbol {
            symbol: s as usize,
            size: q,
        });
    }
    Configuration::new(
        Alphabet::new(q)?,
        Geometry::Torus { sides },
        cells.into_iter().map(|s| s as u8).collect(),
    )
}

pub fn parse_text(s: &str) -> Result<Configuration> {
    read_text(s.as_bytes())
}

fn gray(symbol: u8, q: usize) -> u8 {
    if q <= 1 {
        0
    } else {
        (symbol as usize * 255 / (q - 1)) as u8
    }
}

/// Binary PGM (P5). A one-dimensional trajectory becomes a single space-time
/// image, time running downwards. Two-dimensional frames are written as a
/// sequence of P5 images in the same stream.
pub fn write_pgm<W: Write>(frames: &[Configuration], mut w: W) -> Result<()> {
    let first = frames.first().ok_or(PcaError::EmptySamples)?;
    let q = first.alphabet().size();
    let sides = first.geometry().sides().to_vec();
    if frames.iter().any(|f| f.geometry().sides() != sides.as_slice()) {
        return Err(PcaError::GeometryMismatch(
            "frames do not share a geometry".into(),
        ));
    }
    match sides.len() {
        1 => {
            write!(w, "P5\n{} {}\n255\n", sides[0], frames.len())?;
            for f in frames {
                let row: Vec<u8> = f.cells().iter().map(|&s| gray(s, q)).collect();
                w.write_all(&row)?;
            }
        }
        2 => {
            for f in frames {
                write!(w, "P5\n{} {}\n255\n", sides[1], sides[0])?;
                let px: Vec<u8> = f.cells().iter().map(|&s| gray(s, q)).collect();
                w.write_all(&px)?;
            }
        }
        d => {
            return Err(PcaError::GeometryMismatch(format!(
                "PGM export supports dimensions 1 and 2, got {d}"
            )))
        }
    }
    Ok(())
}

/// Rows `t,site,symbol`, with `site` the flat row-major cell index.
pub fn write_trajectory_csv<W: Write>(frames: &[Configuration], t0: u64, mut w: W) -> Result<()> {
    writeln!(w, "t,site,symbol")?;
    for (i, f) in frames.iter().enumerate() {
        for (k, s) in f.cells().iter().enumerate() {
            writeln!(w, "{},{},{}", t0 + i as u64, k, s)?;
        }
    }
    Ok(())
}
