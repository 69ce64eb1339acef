//! Plain-text serialization: `index,value` CSV for vectors.

use std::fmt::Write as _;

use crate::error::{Result, SgnError};

/// `index,value` rows with a header; values use the shortest round-trip form.
pub fn vector_to_csv(values: &[f64]) -> String {
    let mut out = String::from("index,value\n");
    for (j, v) in values.iter().enumerate() {
        writeln!(out, "{j},{v}").expect("writing to a String cannot fail");
    }
    out
}

/// Parses [`vector_to_csv`] output. Missing indices are zero.
pub fn vector_from_csv(text: &str) -> Result<Vec<f64>> {
    let mut pairs = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (line_no == 0 && line.starts_with("index")) {
            continue;
        }
        let (a, b) = line.split_once(',').ok_or_else(|| {
            SgnError::Argument(format!("line {}: expected `index,value`", line_no + 1))
        })?;
        let j: usize = a
            .trim()
            .parse()
            .map_err(|_| SgnError::Argument(format!("line {}: bad index `{a}`", line_no + 1)))?;
        let v: f64 = b
            .trim()
            .parse()
            .map_err(|_| SgnError::Argument(format!("line {}: bad value `{b}`", line_no + 1)))?;
        pairs.push((j, v));
    }
    let len = pairs.iter().map(|(j, _)| j + 1).max().unwrap_or(0);
    let mut out = vec![0.0; len];
    for (j, v) in pairs {
        out[j] = v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_garbage() {
        assert!(vector_from_csv("index,value\n0;1\n").is_err());
        assert!(vector_from_csv("index,value\nx,1\n").is_err());
        assert!(vector_from_csv("index,value\n0,abc\n").is_err());
    }

    proptest! {
        #[test]
        fn round_trip(v in proptest::collection::vec(-1e6f64..1e6, 1..40)) {
            prop_assert_eq!(vector_from_csv(&vector_to_csv(&v)).unwrap(), v);
        }
    }
}
