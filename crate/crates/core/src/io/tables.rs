//! CSV tables: datasets, excitation signals, closed-loop trajectories and
//! metric summaries.
//!
//! Every file starts with `#` comment lines recording units (temperatures
//! in °C, powers in W, times in s) and, where relevant, the sample time,
//! followed by a header row. Separator `,`, decimal `.`, LF endings.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{compute_metrics, SweepRow, Trajectory, SETTLING_BAND};
use crate::narx::Dataset;

fn table_error(path: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line: 0,
        message: message.into(),
    }
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

fn num(v: f64) -> String {
    v.to_string()
}

/// Comment block, then the header row, then one record per row.
fn write_table(out: impl Write, comments: &[String], header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let to_io = |e: csv::Error| Error::Io(e.into());
    w.write_record(&header).map_err(to_io)?;
    for row in rows {
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

/// A parsed table: comment lines (without `#`), header and numeric rows.
struct Table {
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(text: &str, path: &str) -> Result<Self> {
        let comments = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l[1..].trim().to_string())
            .collect();
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header: Vec<String> = r
            .headers()
            .map_err(|e| table_error(path, e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| table_error(path, e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let row = rec
                .iter()
                .zip(&header)
                .map(|(v, col)| {
                    v.trim().parse::<f64>().map_err(|_| Error::Parse {
                        path: path.to_string(),
                        line,
                        message: format!("column `{col}`: expected a number, got `{v}`"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self { comments, header, rows })
    }

    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::read(&text, &path.display().to_string())
    }

    /// Indices of `prefix1..prefixN` in order, for the largest contiguous N.
    fn numbered_columns(&self, prefix: &str) -> Vec<usize> {
        let mut cols = Vec::new();
        while let Some(i) = self.header.iter().position(|h| *h == format!("{prefix}{}", cols.len() + 1)) {
            cols.push(i);
        }
        cols
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn pick(&self, cols: &[usize]) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect()
    }

    /// `sample_time = …` from the comments, else the spacing of column `t`.
    fn sample_time(&self, path: &str) -> Result<f64> {
        let declared = self.comments.iter().find_map(|c| {
            let (k, v) = c.split_once('=')?;
            (k.trim() == "sample_time").then(|| v.trim().parse::<f64>().ok()).flatten()
        });
        if let Some(dt) = declared {
            return Ok(dt);
        }
        let t = self.column("t").ok_or_else(|| table_error(path, "missing column `t`"))?;
        match &self.rows[..] {
            [a, b, ..] => Ok(b[t] - a[t]),
            _ => Err(table_error(path, "cannot infer sample time from fewer than two rows")),
        }
    }
}

const UNITS: &str = "units: t [s], u [W], y and r [degC]";

pub fn write_dataset(data: &Dataset, out: impl Write) -> Result<()> {
    let (h, z) = (data.n_inputs(), data.n_outputs());
    let header = std::iter::once("t".to_string()).chain(numbered("u", h)).chain(numbered("y", z)).collect();
    let rows = (0..data.len()).map(|k| {
        std::iter::once(num(k as f64 * data.sample_time))
            .chain(data.u[k].iter().copied().map(num))
            .chain(data.y[k].iter().copied().map(num))
            .collect()
    });
    let comments = [
        "open-loop dataset; u[k] is held over [t_k, t_k+1), y[k] sampled at t_k".to_string(),
        UNITS.to_string(),
        format!("sample_time = {}", data.sample_time),
    ];
    write_table(out, &comments, header, rows)
}

pub fn read_dataset(text: &str, path: &str) -> Result<Dataset> {
    let table = Table::read(text, path)?;
    let (u, y) = (table.numbered_columns("u"), table.numbered_columns("y"));
    if u.is_empty() || y.is_empty() {
        return Err(table_error(path, "expected columns u1..uH and y1..yZ"));
    }
    Dataset::new(table.sample_time(path)?, table.pick(&u), table.pick(&y))
}

pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    write_dataset(data, std::fs::File::create(path)?)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(&std::fs::read_to_string(path)?, &path.display().to_string())
}

/// Input-only table `t,u1..uH`.
pub fn save_excitation(u: &[Vec<f64>], sample_time: f64, path: &Path) -> Result<()> {
    let h = u.first().map_or(0, Vec::len);
    let header = std::iter::once("t".to_string()).chain(numbered("u", h)).collect();
    let rows = u
        .iter()
        .enumerate()
        .map(|(k, row)| std::iter::once(num(k as f64 * sample_time)).chain(row.iter().copied().map(num)).collect());
    let comments = [
        "excitation; u[k] is held over [t_k, t_k+1)".to_string(),
        UNITS.to_string(),
        format!("sample_time = {sample_time}"),
    ];
    write_table(std::fs::File::create(path)?, &comments, header, rows)
}

/// Returns `(sample_time, u)`.
pub fn load_excitation(path: &Path) -> Result<(f64, Vec<Vec<f64>>)> {
    let table = Table::load(path)?;
    let label = path.display().to_string();
    let u = table.numbered_columns("u");
    if u.is_empty() {
        return Err(table_error(&label, "expected columns u1..uH"));
    }
    Ok((table.sample_time(&label)?, table.pick(&u)))
}

/// Columns `t,y1..yZ,r1..rZ,u1..uH,qp_iters,qp_residual,slack_max`.
pub fn write_trajectory(traj: &Trajectory, out: impl Write) -> Result<()> {
    let z = traj.reference.len();
    let h = traj.u.first().map_or(0, Vec::len);
    let header = std::iter::once("t".to_string())
        .chain(numbered("y", z))
        .chain(numbered("r", z))
        .chain(numbered("u", h))
        .chain(["qp_iters", "qp_residual", "slack_max"].map(String::from))
        .collect();
    let rows = (0..traj.len()).map(|k| {
        std::iter::once(num(traj.t[k]))
            .chain(traj.y[k].iter().copied().map(num))
            .chain(traj.reference.iter().copied().map(num))
            .chain(traj.u[k].iter().copied().map(num))
            .chain([traj.qp_iterations[k].to_string(), num(traj.qp_residual[k]), num(traj.slack_max[k])])
            .collect()
    });
    let fallbacks = traj.fallback.iter().filter(|f| **f).count();
    let comments = [
        "closed loop; row k: measurement at t_k and the input applied from t_k".to_string(),
        UNITS.to_string(),
        format!("solver fallbacks (held input) = {fallbacks}"),
    ];
    write_table(out, &comments, header, rows)
}

pub fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    write_trajectory(traj, std::fs::File::create(path)?)
}

/// Reads a trajectory table. Solver fallbacks are not stored per row and
/// read back as `false`.
pub fn read_trajectory(text: &str, path: &str) -> Result<Trajectory> {
    let table = Table::read(text, path)?;
    let (y, r, u) = (table.numbered_columns("y"), table.numbered_columns("r"), table.numbered_columns("u"));
    let col = |name: &str| table.column(name).ok_or_else(|| table_error(path, format!("missing column `{name}`")));
    let (t, iters, res, slack) = (col("t")?, col("qp_iters")?, col("qp_residual")?, col("slack_max")?);
    if y.is_empty() || y.len() != r.len() {
        return Err(table_error(path, "expected matching y1..yZ and r1..rZ columns"));
    }
    let first = table.rows.first().ok_or_else(|| table_error(path, "empty trajectory"))?;
    let reference: Vec<f64> = r.iter().map(|&c| first[c]).collect();
    if table.rows.iter().any(|row| r.iter().zip(&reference).any(|(&c, v)| row[c] != *v)) {
        return Err(table_error(path, "reference changes over the run; only constant references are supported"));
    }
    let column = |c: usize| table.rows.iter().map(|row| row[c]).collect::<Vec<f64>>();
    Ok(Trajectory {
        t: column(t),
        y: table.pick(&y),
        reference,
        u: table.pick(&u),
        qp_iterations: column(iters).into_iter().map(|v| v as usize).collect(),
        qp_residual: column(res),
        slack_max: column(slack),
        fallback: vec![false; table.rows.len()],
    })
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    read_trajectory(&std::fs::read_to_string(path)?, &path.display().to_string())
}

/// Columns `h,d,alpha,avg_err,max_err,overshoot,settling,terminal_pass_count`.
/// Unsettled runs and failed runs write `NaN` in place of missing numbers.
pub fn write_metrics(rows: &[SweepRow], out: impl Write) -> Result<()> {
    let header = ["h", "d", "alpha", "avg_err", "max_err", "overshoot", "settling", "terminal_pass_count"]
        .map(String::from)
        .to_vec();
    let records = rows.iter().map(|row| {
        let (h, d, a) = row.point;
        let mut rec = vec![num(h), num(d), num(a)];
        match &row.outcome {
            Ok(m) => rec.extend([
                num(m.avg_final_error),
                num(m.max_final_error),
                num(m.max_overshoot),
                num(m.settling_time.unwrap_or(f64::NAN)),
                m.terminal_pass_count().to_string(),
            ]),
            Err(_) => rec.extend(std::iter::repeat("NaN".to_string()).take(5)),
        }
        rec
    });
    let failures: Vec<String> = rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().err().map(|e| format!("run at {:?} failed: {e}", r.point)))
        .collect();
    let mut comments = vec![
        "errors and overshoot in degC, settling in s (NaN: never settled or run failed)".to_string(),
        format!("settling band = +/-{SETTLING_BAND} degC"),
    ];
    comments.extend(failures);
    write_table(out, &comments, header, records)
}

pub fn save_metrics(rows: &[SweepRow], path: &Path) -> Result<()> {
    write_metrics(rows, std::fs::File::create(path)?)
}

/// Recomputes metrics from a stored trajectory.
pub fn trajectory_metrics(traj: &Trajectory) -> Result<crate::experiments::Metrics> {
    compute_metrics(&traj.t, &traj.y, &traj.reference, SETTLING_BAND)
}

/// Zone references from a comma-separated list, either inline or as the
/// contents of a file (comments and a header row allowed).
pub fn parse_reference(arg: &str, zones: usize) -> Result<Vec<f64>> {
    let from_list = |text: &str| -> Option<Vec<f64>> {
        let values: Vec<f64> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split(','))
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| v.parse().ok())
            .collect::<Option<Vec<f64>>>()
            .or_else(|| {
                // drop a header row such as `r1,...,r15`
                let body: String = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect::<Vec<_>>().join(",");
                body.split(',').map(str::trim).filter(|v| !v.is_empty()).map(|v| v.parse().ok()).collect()
            })?;
        Some(values)
    };
    let values = match from_list(arg) {
        Some(v) if !v.is_empty() => v,
        _ => {
            let text = std::fs::read_to_string(arg)?;
            from_list(&text).ok_or_else(|| table_error(arg, "expected comma-separated numbers"))?
        }
    };
    if values.len() != zones {
        return Err(Error::Dimension(format!("reference has {} values, expected {zones}", values.len())));
    }
    Ok(values)
}
