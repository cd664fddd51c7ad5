//! Plot-ready CSV output with C-style `%.12e` number formatting.

use std::io::{self, Write};

/// Formats like C's `%.12e`: `-1.234567890123e+00`.
pub fn fmt_e(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub fn write_header<W: Write>(out: &mut W, columns: &[&str]) -> io::Result<()> {
    writeln!(out, "{}", columns.join(","))
}

pub fn write_row<W: Write>(out: &mut W, values: &[f64]) -> io::Result<()> {
    let cells: Vec<String> = values.iter().map(|&v| fmt_e(v)).collect();
    writeln!(out, "{}", cells.join(","))
}
