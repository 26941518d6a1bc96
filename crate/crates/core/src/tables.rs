//! Plain-text file formats.
//!
//! Block tables have one block per line: the block's symbol values joined by
//! commas, whitespace, then a number (a probability or a weight in bits).
//! Lines starting with `#` and blank lines are ignored. Signal files hold one
//! decimal real per line. Matrix files hold one row per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quantization::Alphabet;

/// Formats `(block, value)` rows; blocks are emitted in code order.
pub fn format_block_table(alphabet: &Alphabet, order: usize, values: &[f64]) -> String {
    let mut out = String::new();
    for (code, v) in values.iter().enumerate() {
        let block = alphabet
            .decode_block(code, order)
            .into_iter()
            .map(|s| alphabet.value(s).to_string())
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(out, "{block}\t{v}");
    }
    out
}

/// Parses a block table into a dense vector; unlisted blocks get `fill`.
pub fn parse_block_table(
    text: &str,
    alphabet: &Alphabet,
    order: usize,
    fill: f64,
) -> Result<Vec<f64>> {
    let mut values = vec![fill; alphabet.block_count(order)?];
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            line: lineno + 1,
            msg,
        };
        let mut fields = line.split_whitespace();
        let (Some(block), Some(value), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err("expected `block value`".into()));
        };
        let symbols = block
            .split(',')
            .map(|s| {
                let v: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("bad symbol `{s}`")))?;
                alphabet
                    .index_of(v)
                    .ok_or_else(|| parse_err(format!("symbol {v} is not in the alphabet")))
            })
            .collect::<Result<Vec<_>>>()?;
        if symbols.len() != order {
            return Err(parse_err(format!(
                "block has {} symbols, expected {order}",
                symbols.len()
            )));
        }
        values[alphabet.encode_block(&symbols)] = value
            .parse()
            .map_err(|_| parse_err(format!("bad number `{value}`")))?;
    }
    Ok(values)
}

pub fn format_signal(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 8);
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn parse_signal(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("bad number `{}`", l.trim()),
            })
        })
        .collect()
}

pub fn read_signal(path: &Path) -> Result<Vec<f64>> {
    parse_signal(&fs::read_to_string(path)?)
}

pub fn write_signal(path: &Path, values: &[f64]) -> Result<()> {
    fs::write(path, format_signal(values))?;
    Ok(())
}

/// One matrix row per line, entries separated by spaces.
pub fn format_matrix(a: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in a.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 1,
                    msg: format!("bad number `{t}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.first().is_some_and(|r| r.len() != row.len()) {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected {} entries, got {}", rows[0].len(), row.len()),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "empty matrix".into(),
        });
    }
    let (m, n) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_row_iterator(m, n, rows.into_iter().flatten()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 1.0 / 3.0, 2e-300, 0.0, 7.0]);
        assert_eq!(parse_matrix(&format_matrix(&a)).unwrap(), a);
        assert!(parse_matrix("1 2\n3\n").is_err());
        assert!(parse_matrix("").is_err());
    }

    #[test]
    fn block_table_round_trip() {
        let a = Alphabet::new(vec![0.0, 0.5]).unwrap();
        let values = vec![0.1, 0.2, 0.3, 0.4];
        let text = format_block_table(&a, 2, &values);
        assert!(text.starts_with("0,0\t0.1\n0,0.5\t0.2\n"));
        assert_eq!(parse_block_table(&text, &a, 2, 0.0).unwrap(), values);
    }

    #[test]
    fn block_table_errors() {
        let a = Alphabet::new(vec![0.0, 0.5]).unwrap();
        assert!(parse_block_table("0,0.25\t1", &a, 2, 0.0).is_err());
        assert!(parse_block_table("0\t1", &a, 2, 0.0).is_err());
        assert!(parse_block_table("0,0 x", &a, 2, 0.0).is_err());
        let filled = parse_block_table("# comment\n0.5,0.5 1\n", &a, 2, 7.0).unwrap();
        assert_eq!(filled, vec![7.0, 7.0, 7.0, 1.0]);
    }

    #[test]
    fn signal_round_trip() {
        let x = vec![0.1, -2.5, 1e-7, 0.3333333333333333];
        assert_eq!(parse_signal(&format_signal(&x)).unwrap(), x);
        assert!(parse_signal("1.0\nabc\n").is_err());
    }
}
