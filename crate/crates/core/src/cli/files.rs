//! Text formats written by the command-line tool.
//!
//! All floats are written with 17 significant digits (`{:.16e}`), which
//! parses back to the same `f64`.

use std::fmt::Write as _;

use crate::measurement::{BlockSimilarity, StepRecord};
use crate::numerics::Matrix;

pub const TRACE_MAGIC: &str = "# attn-synergy trace v1";

#[inline]
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str, line: usize) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("line {line}: bad number `{s}`"))
}

fn parse_usize(s: &str, line: usize) -> Result<usize, String> {
    s.parse::<usize>()
        .map_err(|_| format!("line {line}: bad integer `{s}`"))
}

/// Tab-separated trace: one row per timestep with
/// `timestep m_mean weight_applied` followed by `s_txt s_img ratio` for
/// each block.
pub fn write_trace(steps: &[StepRecord]) -> String {
    let n_blocks = steps.first().map_or(0, |s| s.blocks.len());
    let mut out = String::new();
    writeln!(out, "{TRACE_MAGIC} steps={} blocks={n_blocks}", steps.len()).unwrap();
    out.push_str("timestep\tm_mean\tweight_applied");
    for b in 0..n_blocks {
        write!(out, "\ts_txt_{b}\ts_img_{b}\tratio_{b}").unwrap();
    }
    out.push('\n');
    for s in steps {
        write!(
            out,
            "{}\t{}\t{}",
            s.timestep,
            fmt_f64(s.m_mean),
            fmt_f64(s.weight_applied)
        )
        .unwrap();
        for b in &s.blocks {
            write!(
                out,
                "\t{}\t{}\t{}",
                fmt_f64(b.s_txt),
                fmt_f64(b.s_img),
                fmt_f64(b.ratio)
            )
            .unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Vec<StepRecord>, String> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.starts_with(TRACE_MAGIC) => {}
        _ => return Err("not a trace file (missing header)".into()),
    }
    let (_, header) = lines.next().ok_or("trace file has no column header")?;
    let n_cols = header.split('\t').count();
    if n_cols < 3 || (n_cols - 3) % 3 != 0 {
        return Err(format!("unexpected column count {n_cols}"));
    }
    let n_blocks = (n_cols - 3) / 3;
    let mut steps = Vec::new();
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != n_cols {
            return Err(format!("line {no}: expected {n_cols} columns, found {}", f.len()));
        }
        let blocks = (0..n_blocks)
            .map(|b| {
                Ok(BlockSimilarity {
                    block_index: b,
                    s_txt: parse_f64(f[3 + 3 * b], no)?,
                    s_img: parse_f64(f[4 + 3 * b], no)?,
                    ratio: parse_f64(f[5 + 3 * b], no)?,
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        steps.push(StepRecord {
            timestep: parse_usize(f[0], no)?,
            blocks,
            m_mean: parse_f64(f[1], no)?,
            weight_applied: parse_f64(f[2], no)?,
        });
    }
    Ok(steps)
}

/// `# <label> <rows>x<cols>` followed by one tab-separated line per row.
pub fn write_matrix(out: &mut String, label: &str, m: &Matrix) {
    writeln!(out, "# {label} {}x{}", m.rows(), m.cols()).unwrap();
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
}

/// Reads every matrix section written by [`write_matrix`], in order.
pub fn parse_matrices(text: &str) -> Result<Vec<(String, Matrix)>, String> {
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
    while let Some((no, line)) = lines.next() {
        let Some(head) = line.strip_prefix("# ") else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(format!("line {no}: expected a `# label RxC` header"));
        };
        let (label, dims) = head.rsplit_once(' ').ok_or(format!("line {no}: bad header"))?;
        let (r, c) = dims
            .split_once('x')
            .ok_or(format!("line {no}: bad dimensions `{dims}`"))?;
        let (rows, cols) = (parse_usize(r, no)?, parse_usize(c, no)?);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (rno, row) = lines.next().ok_or(format!("section `{label}` ends early"))?;
            for v in row.split('\t') {
                data.push(parse_f64(v, rno)?);
            }
        }
        let m = Matrix::new(rows, cols, data).map_err(|e| format!("section `{label}`: {e}"))?;
        out.push((label.to_string(), m));
    }
    Ok(out)
}

/// Attention-map grid: header with dimensions, then `height` rows of
/// `width` tab-separated weights.
pub fn write_map(map: &Matrix, cell: (usize, usize), w: f64, block: usize) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "# attention map height={} width={} query={},{} w={} block={block}",
        map.rows(),
        map.cols(),
        cell.0,
        cell.1,
        fmt_f64(w)
    )
    .unwrap();
    for r in 0..map.rows() {
        let row: Vec<String> = map.row(r).iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

pub fn parse_map(text: &str) -> Result<Matrix, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty map file")?;
    let field = |name: &str| -> Result<usize, String> {
        header
            .split_whitespace()
            .find_map(|t| t.strip_prefix(name).and_then(|v| v.strip_prefix('=')))
            .ok_or(format!("map header lacks `{name}`"))?
            .parse()
            .map_err(|_| format!("bad `{name}` in map header"))
    };
    let (h, w) = (field("height")?, field("width")?);
    let mut data = Vec::with_capacity(h * w);
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        for v in line.split('\t') {
            data.push(parse_f64(v, i + 2)?);
        }
    }
    Matrix::new(h, w, data).map_err(|e| e.to_string())
}
