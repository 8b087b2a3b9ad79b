//! Versioned plain-text model files.
//!
//! ```text
//! thermoform-narx 1
//! layout <n> <m> <z> <h>
//! mean <dim values>
//! scale <dim values>
//! channel <index>
//! offset <value>
//! linear <dim values>
//! projection <p>
//! <dim rows of p values>
//! wavelets <count>
//! <dilation> <weight> <p translation values>   (one line per unit)
//! scalings <count>
//! ...
//! end
//! ```
//!
//! Every float is written with 17 significant digits so that a save/load
//! round trip is exact.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::layout::RegressorLayout;
use super::wavelet::{NarxModel, Normalization, Unit, WaveletChannel};
use crate::error::{Error, Result};

const MAGIC: &str = "thermoform-narx";
const VERSION: u32 = 1;

fn push_values(out: &mut String, values: impl IntoIterator<Item = f64>) {
    for v in values {
        let _ = write!(out, " {v:.16e}");
    }
    out.push('\n');
}

pub fn write_model(model: &NarxModel) -> String {
    let mut out = String::new();
    let l = &model.layout;
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "layout {} {} {} {}", l.n, l.m, l.z, l.h);
    out.push_str("mean");
    push_values(&mut out, model.normalization.mean.iter().copied());
    out.push_str("scale");
    push_values(&mut out, model.normalization.scale.iter().copied());
    for (c, ch) in model.channels.iter().enumerate() {
        let _ = writeln!(out, "channel {}", c + 1);
        let _ = writeln!(out, "offset {:.16e}", ch.offset);
        out.push_str("linear");
        push_values(&mut out, ch.linear.iter().copied());
        let _ = writeln!(out, "projection {}", ch.projected_dim());
        if ch.projected_dim() > 0 {
            for row in ch.projection.row_iter() {
                out.push_str("  ");
                push_values(&mut out, row.iter().copied());
            }
        }
        for (name, units) in [("wavelets", &ch.wavelets), ("scalings", &ch.scalings)] {
            let _ = writeln!(out, "{name} {}", units.len());
            for u in units {
                out.push_str("  ");
                push_values(&mut out, [u.dilation, u.weight].into_iter().chain(u.translation.iter().copied()));
            }
        }
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    path: &'a str,
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            line,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, raw) in self.inner.by_ref() {
            let fields: Vec<&str> = raw.split_whitespace().collect();
            if !fields.is_empty() {
                return Ok((i + 1, fields));
            }
        }
        Err(self.err(0, "unexpected end of file"))
    }

    fn keyword(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (line, fields) = self.next()?;
        if fields[0] != key {
            return Err(self.err(line, format!("expected `{key}`, found `{}`", fields[0])));
        }
        Ok((line, fields[1..].to_vec()))
    }

    fn floats(&self, line: usize, fields: &[&str], expected: usize) -> Result<Vec<f64>> {
        if fields.len() != expected {
            return Err(self.err(line, format!("expected {expected} values, found {}", fields.len())));
        }
        fields
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| self.err(line, format!("invalid number `{f}`"))))
            .collect()
    }

    fn count(&self, line: usize, fields: &[&str]) -> Result<usize> {
        match fields {
            [v] => v.parse().map_err(|_| self.err(line, format!("invalid count `{v}`"))),
            _ => Err(self.err(line, "expected a single count")),
        }
    }
}

pub fn read_model(text: &str, path: &str) -> Result<NarxModel> {
    let mut lines = Lines {
        path,
        inner: text.lines().enumerate().peekable(),
    };
    let (line, header) = lines.next()?;
    if header != [MAGIC, "1"] {
        return Err(lines.err(line, format!("not a version-{VERSION} model file")));
    }
    let (line, f) = lines.keyword("layout")?;
    let dims: Vec<usize> = f
        .iter()
        .map(|v| v.parse().map_err(|_| lines.err(line, format!("invalid layout value `{v}`"))))
        .collect::<Result<_>>()?;
    let [n, m, z, h] = dims[..] else {
        return Err(lines.err(line, "layout needs n m z h"));
    };
    let layout = RegressorLayout::new(n, m, z, h)?;
    let dim = layout.dim();
    let (line, f) = lines.keyword("mean")?;
    let mean = lines.floats(line, &f, dim)?;
    let (line, f) = lines.keyword("scale")?;
    let scale = lines.floats(line, &f, dim)?;

    let mut channels = Vec::with_capacity(z);
    for c in 0..z {
        let (line, f) = lines.keyword("channel")?;
        if lines.count(line, &f)? != c + 1 {
            return Err(lines.err(line, format!("expected channel {}", c + 1)));
        }
        let (line, f) = lines.keyword("offset")?;
        let offset = lines.floats(line, &f, 1)?[0];
        let (line, f) = lines.keyword("linear")?;
        let linear = lines.floats(line, &f, dim)?;
        let (line, f) = lines.keyword("projection")?;
        let p = lines.count(line, &f)?;
        let mut projection = DMatrix::zeros(dim, p);
        if p > 0 {
            for r in 0..dim {
                let (line, f) = lines.next()?;
                for (k, v) in lines.floats(line, &f, p)?.into_iter().enumerate() {
                    projection[(r, k)] = v;
                }
            }
        }
        let mut read_units = |key: &str| -> Result<Vec<Unit>> {
            let (line, f) = lines.keyword(key)?;
            let count = lines.count(line, &f)?;
            (0..count)
                .map(|_| {
                    let (line, f) = lines.next()?;
                    let v = lines.floats(line, &f, p + 2)?;
                    Ok(Unit {
                        dilation: v[0],
                        weight: v[1],
                        translation: v[2..].to_vec(),
                    })
                })
                .collect()
        };
        let wavelets = read_units("wavelets")?;
        let scalings = read_units("scalings")?;
        channels.push(WaveletChannel {
            linear,
            projection,
            offset,
            wavelets,
            scalings,
        });
    }
    lines.keyword("end")?;
    NarxModel::new(layout, Normalization { mean, scale }, channels)
}

pub fn save_model(model: &NarxModel, path: &Path) -> Result<()> {
    std::fs::write(path, write_model(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<NarxModel> {
    let text = std::fs::read_to_string(path)?;
    read_model(&text, &path.display().to_string())
}
