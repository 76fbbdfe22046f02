//! Small helpers shared by the plain-text file formats.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-blank lines with `#` comments removed, split on commas and trimmed.
/// Line numbers are 1-based.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then(|| (i + 1, line.split(',').map(str::trim).collect()))
    })
}

/// Like [`data_lines`] but requires (and skips) a header row and checks
/// that every row has the header's width.
pub(crate) fn csv_rows<'a>(text: &'a str, header: &[&str], source: &str) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = data_lines(text);
    match lines.next() {
        Some((_, h)) if h == header => {}
        Some((n, h)) => {
            return Err(Error::parse(
                source,
                n,
                format!("expected header '{}', found '{}'", header.join(","), h.join(",")),
            ))
        }
        None => return Err(Error::parse(source, 1, "file is empty")),
    }
    let rows: Vec<_> = lines.collect();
    if let Some((n, f)) = rows.iter().find(|(_, f)| f.len() != header.len()) {
        return Err(Error::parse(
            source,
            *n,
            format!("expected {} fields, found {}", header.len(), f.len()),
        ));
    }
    Ok(rows)
}

pub(crate) fn parse_field<T>(s: &str, what: &str) -> std::result::Result<T, String>
where
    T: FromStr,
    T::Err: Display,
{
    s.trim().parse().map_err(|e| format!("invalid {what} '{s}': {e}"))
}

pub(crate) fn opt_field(s: &str) -> Option<&str> {
    let s = s.trim();
    (!s.is_empty()).then_some(s)
}
