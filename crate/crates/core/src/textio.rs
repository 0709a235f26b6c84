//! Helpers for the line-oriented `key value...` artifact formats.

use std::str::FromStr;

pub(crate) struct LineReader<'a> {
    lines: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
}

impl<'a> LineReader<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.trim()))
                .filter(|(_, l)| !l.is_empty() && !l.starts_with('#')),
        );
        Self {
            lines: it.peekable(),
        }
    }

    pub(crate) fn next_line(&mut self) -> Result<(usize, &'a str), String> {
        self.lines
            .next()
            .ok_or_else(|| "unexpected end of file".to_string())
    }

    pub(crate) fn is_done(&mut self) -> bool {
        self.lines.peek().is_none()
    }

    /// Reads the next line, which must start with `key`; returns the rest.
    pub(crate) fn field(&mut self, key: &str) -> Result<Vec<&'a str>, String> {
        let (no, line) = self.next_line()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(format!("line {no}: expected `{key}`, found {line:?}"));
        }
        Ok(parts.collect())
    }

    pub(crate) fn parsed<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>, String> {
        let vals = self.field(key)?;
        parse_all(&vals).map_err(|v| format!("`{key}`: cannot parse {v:?}"))
    }

    pub(crate) fn single<T: FromStr>(&mut self, key: &str) -> Result<T, String> {
        let mut v = self.parsed::<T>(key)?;
        if v.len() != 1 {
            return Err(format!("`{key}` expects one value"));
        }
        Ok(v.remove(0))
    }

    /// A bare row of numbers.
    pub(crate) fn numbers(&mut self) -> Result<Vec<f64>, String> {
        let (no, line) = self.next_line()?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        parse_all(&vals).map_err(|v| format!("line {no}: cannot parse {v:?}"))
    }
}

pub(crate) fn parse_all<T: FromStr>(vals: &[&str]) -> Result<Vec<T>, String> {
    vals.iter()
        .map(|v| v.parse::<T>().map_err(|_| v.to_string()))
        .collect()
}

/// Shortest round-trip decimal text of each value, space separated.
pub(crate) fn float_row(vals: &[f64]) -> String {
    vals.iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}
