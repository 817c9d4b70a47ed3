//! Number formatting and file emission shared by every text artifact.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Significant digits used in CSV and report output.
pub const CSV_DIGITS: usize = 9;

/// Formats `v` with `digits` significant digits, trailing zeros removed.
///
/// Plain decimal notation for exponents in [-5, 15), scientific otherwise.
/// Output depends only on the value, so equal inputs give equal text.
pub fn format_sig(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let mut ds: String = mantissa.chars().filter(|c| *c != '.').collect();
    while ds.len() > 1 && ds.ends_with('0') {
        ds.pop();
    }
    if !(-5..15).contains(&exp) {
        let (head, tail) = ds.split_at(1);
        return if tail.is_empty() {
            format!("{sign}{head}e{exp}")
        } else {
            format!("{sign}{head}.{tail}e{exp}")
        };
    }
    let out = if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), ds)
    } else {
        let int_len = exp as usize + 1;
        if ds.len() <= int_len {
            format!("{}{}", ds, "0".repeat(int_len - ds.len()))
        } else {
            format!("{}.{}", &ds[..int_len], &ds[int_len..])
        }
    };
    format!("{sign}{out}")
}

/// `format_sig` with [`CSV_DIGITS`].
pub fn format_csv(v: f64) -> String {
    format_sig(v, CSV_DIGITS)
}

/// Writes to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(res?)
}
