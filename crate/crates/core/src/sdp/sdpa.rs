//! Sparse SDPA (`.dat-s`) export and a small reader.
//!
//! Layout written by [`write_sdpa`]:
//!
//! ```text
//! "comment lines start with a double quote
//! m                     number of free coordinates
//! nblocks               1, or 2 when there are linear rows
//! n -p                  block sizes; negative means diagonal
//! c1 c2 ... cm          objective, minimized
//! k b i j v             entry (i, j) of block b of matrix F_k, 1-based, i <= j
//! ```
//!
//! The encoded problem is `min cᵀx` subject to `Σ xₖ Fₖ − F₀ ⪰ 0`. Block 1 is
//! the moment matrix and block 2 holds the linear rows on its diagonal, so
//! `F₀ = −C₀`. Maximization objectives are negated and marked in a comment,
//! as is the objective constant.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::relaxation::Direction;

use super::SdpProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct SdpaData {
    pub m: usize,
    pub block_struct: Vec<i64>,
    pub c: Vec<f64>,
    /// `(matrix, block, i, j, value)`, 1-based.
    pub entries: Vec<(usize, usize, usize, usize, f64)>,
}

impl SdpaData {
    /// Dense `Σ xₖ Fₖ − F₀` for one block.
    pub fn block_matrix(&self, block: usize, x: &[f64]) -> Vec<Vec<f64>> {
        let size = self.block_struct[block - 1].unsigned_abs() as usize;
        let mut out = vec![vec![0.0; size]; size];
        for &(k, b, i, j, v) in &self.entries {
            if b != block {
                continue;
            }
            let w = if k == 0 { -v } else { x[k - 1] * v };
            out[i - 1][j - 1] += w;
            if i != j {
                out[j - 1][i - 1] += w;
            }
        }
        out
    }
}

/// SDPA data of a compiled problem.
pub fn to_sdpa(p: &SdpProblem) -> SdpaData {
    let m = p.m();
    let n_lp = p.lp_rows.len();
    let mut block_struct = vec![p.n as i64];
    if n_lp > 0 {
        block_struct.push(-(n_lp as i64));
    }
    let mut c = vec![0.0; m];
    if let Some(obj) = &p.objective {
        let sign = match obj.direction {
            Direction::Max => -1.0,
            Direction::Min => 1.0,
        };
        for &(k, v) in &obj.coords {
            c[k] = sign * v;
        }
    }
    let mut per_matrix: Vec<Vec<(usize, usize, usize, f64)>> = vec![Vec::new(); m + 1];
    for (i, j, e) in &p.cells {
        let v = e.constant_value(&p.symbol_values);
        if v != 0.0 {
            per_matrix[0].push((1, i + 1, j + 1, -v));
        }
        for &(k, v) in &e.coords {
            per_matrix[k + 1].push((1, i + 1, j + 1, v));
        }
    }
    for (r, row) in p.lp_rows.iter().enumerate() {
        let v = row.expr.constant_value(&p.symbol_values);
        if v != 0.0 {
            per_matrix[0].push((2, r + 1, r + 1, -v));
        }
        for &(k, v) in &row.expr.coords {
            per_matrix[k + 1].push((2, r + 1, r + 1, v));
        }
    }
    let entries = per_matrix
        .into_iter()
        .enumerate()
        .flat_map(|(k, es)| es.into_iter().map(move |(b, i, j, v)| (k, b, i, j, v)))
        .collect();
    SdpaData {
        m,
        block_struct,
        c,
        entries,
    }
}

pub fn write_sdpa<W: Write>(p: &SdpProblem, mut out: W) -> Result<()> {
    let data = to_sdpa(p);
    writeln!(out, "\"moment matrix side {}, {} linear rows", p.n, p.lp_rows.len())?;
    writeln!(out, "\"variables follow the free moment order of the relaxation")?;
    if let Some(obj) = &p.objective {
        if obj.direction == Direction::Max {
            writeln!(out, "\"maximization: objective negated")?;
        }
        writeln!(out, "\"objective constant {}", obj.constant)?;
    } else {
        writeln!(out, "\"feasibility problem: zero objective")?;
    }
    writeln!(out, "{}", data.m)?;
    writeln!(out, "{}", data.block_struct.len())?;
    let blocks: Vec<String> = data.block_struct.iter().map(|b| b.to_string()).collect();
    writeln!(out, "{}", blocks.join(" "))?;
    let c: Vec<String> = data.c.iter().map(|v| format!("{v}")).collect();
    writeln!(out, "{}", c.join(" "))?;
    for (k, b, i, j, v) in &data.entries {
        writeln!(out, "{k} {b} {i} {j} {v}")?;
    }
    Ok(())
}

pub fn export_sdpa(p: &SdpProblem, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_sdpa(p, &mut w)?;
    w.flush()?;
    Ok(())
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

/// Reads sparse SDPA text. Comment lines start with `"` or `*`; braces,
/// parentheses and commas count as whitespace.
pub fn parse_sdpa(text: &str) -> Result<SdpaData> {
    let mut tokens = text
        .lines()
        .filter(|l| !matches!(l.trim_start().chars().next(), Some('"' | '*')))
        .flat_map(|l| {
            l.split(|c: char| c.is_whitespace() || matches!(c, '{' | '}' | '(' | ')' | ','))
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect::<Vec<_>>()
        });
    let mut next = |what: &str| tokens.next().ok_or_else(|| parse_err(format!("missing {what}")));
    let m: usize = next("m")?.parse().map_err(|_| parse_err("bad m"))?;
    let nblocks: usize = next("block count")?
        .parse()
        .map_err(|_| parse_err("bad block count"))?;
    let block_struct = (0..nblocks)
        .map(|_| next("block size")?.parse::<i64>().map_err(|_| parse_err("bad block size")))
        .collect::<Result<Vec<_>>>()?;
    let c = (0..m)
        .map(|_| next("objective")?.parse::<f64>().map_err(|_| parse_err("bad objective entry")))
        .collect::<Result<Vec<_>>>()?;
    let mut entries = Vec::new();
    while let Ok(k) = next("entry") {
        let k: usize = k.parse().map_err(|_| parse_err("bad matrix index"))?;
        let b: usize = next("block")?.parse().map_err(|_| parse_err("bad block index"))?;
        let i: usize = next("row")?.parse().map_err(|_| parse_err("bad row"))?;
        let j: usize = next("column")?.parse().map_err(|_| parse_err("bad column"))?;
        let v: f64 = next("value")?.parse().map_err(|_| parse_err("bad value"))?;
        if k > m || b == 0 || b > nblocks {
            return Err(parse_err(format!("entry {k} {b} {i} {j} out of range")));
        }
        let size = block_struct[b - 1].unsigned_abs() as usize;
        if i == 0 || j == 0 || i > size || j > size || (block_struct[b - 1] < 0 && i != j) {
            return Err(parse_err(format!("entry {k} {b} {i} {j} outside block")));
        }
        entries.push((k, b, i, j, v));
    }
    Ok(SdpaData {
        m,
        block_struct,
        c,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::compile;
    use crate::sdp::tests::bell;

    #[test]
    fn round_trip_chsh() {
        let mut r = bell("npa1", false);
        r.set_objective_str("<A0 B0> + <A0 B1> + <A1 B0> - <A1 B1>", Direction::Max)
            .unwrap();
        let p = compile(&r).unwrap();
        let mut buf = Vec::new();
        write_sdpa(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("negated"));
        let parsed = parse_sdpa(&text).unwrap();
        assert_eq!(parsed, to_sdpa(&p));
        assert_eq!(parsed.m, p.m());
        assert_eq!(parsed.block_struct.len(), 2);
        let x: Vec<f64> = (0..p.m()).map(|k| 0.125 * k as f64 - 0.5).collect();
        let dense = p.evaluate(&x);
        let block = parsed.block_matrix(1, &x);
        for i in 0..p.n {
            for j in 0..p.n {
                assert_eq!(block[i][j].to_bits(), dense.read(i, j).to_bits());
            }
        }
    }

    #[test]
    fn parser_rejects_garbage() {
        assert!(parse_sdpa("").is_err());
        assert!(parse_sdpa("1\n1\n2\n1.0\n2 1 1 1 1.0\n").is_err());
        assert!(parse_sdpa("1\n1\n-2\n1.0\n1 1 1 2 1.0\n").is_err());
        let ok = parse_sdpa("\"c\n* c\n1\n1\n{2}\n{1.0}\n0 1 1 2 -1\n1 1 1 1 1\n").unwrap();
        assert_eq!(ok.entries.len(), 2);
    }
}
