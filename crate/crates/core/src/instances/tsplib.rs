//! Plain-text TSPLIB reading, limited to files with an explicit
//! two-dimensional `NODE_COORD_SECTION`. Distance-type headers are
//! recorded for provenance only; the benchmark derivation always uses
//! Manhattan and Euclidean metrics on the raw coordinates.

use thiserror::Error;

use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TsplibNode<T> {
    pub id: usize,
    pub x: T,
    pub y: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TsplibFile<T> {
    pub name: Option<String>,
    pub edge_weight_type: Option<String>,
    pub dimension: usize,
    /// Coordinate records in file order.
    pub nodes: Vec<TsplibNode<T>>,
    /// Largest number of decimal places seen in a coordinate token;
    /// depot coordinates derived later are rounded to this precision.
    pub coord_decimals: u32,
}

#[derive(Debug, Error)]
pub enum TsplibError {
    #[error("missing NODE_COORD_SECTION")]
    MissingSection,
    #[error("missing DIMENSION header")]
    MissingDimension,
    #[error("DIMENSION is {expected} but the file holds {found} coordinate records")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("line {line}: cannot parse {content:?}")]
    BadLine { line: usize, content: String },
}

fn decimals(token: &str) -> u32 {
    match token.split_once('.') {
        Some((_, frac)) => frac
            .trim_end_matches(|c: char| !c.is_ascii_digit())
            .len() as u32,
        None => 0,
    }
}

/// Parses headers and the coordinate section. The DIMENSION header must
/// match the record count exactly.
pub fn parse_tsplib<T: Scalar>(text: &str) -> Result<TsplibFile<T>, TsplibError> {
    let mut name = None;
    let mut edge_weight_type = None;
    let mut dimension = None;
    let mut nodes = Vec::new();
    let mut coord_decimals = 0u32;
    let mut in_section = false;
    let mut seen_section = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !in_section {
            if line.eq_ignore_ascii_case("NODE_COORD_SECTION") {
                in_section = true;
                seen_section = true;
                continue;
            }
            let (key, value) = match line.split_once(':') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => (line, ""),
            };
            match key.to_ascii_uppercase().as_str() {
                "NAME" => name = Some(value.to_string()),
                "EDGE_WEIGHT_TYPE" => edge_weight_type = Some(value.to_string()),
                "DIMENSION" => {
                    dimension =
                        Some(value.parse::<usize>().map_err(|_| TsplibError::BadLine {
                            line: idx + 1,
                            content: raw.to_string(),
                        })?)
                }
                _ => {}
            }
            continue;
        }
        if line.eq_ignore_ascii_case("EOF") {
            break;
        }
        let mut parts = line.split_whitespace();
        let parse3 = || TsplibError::BadLine {
            line: idx + 1,
            content: raw.to_string(),
        };
        let id: usize = parts.next().ok_or_else(parse3)?.parse().map_err(|_| parse3())?;
        let xs = parts.next().ok_or_else(parse3)?;
        let ys = parts.next().ok_or_else(parse3)?;
        let x: f64 = xs.parse().map_err(|_| parse3())?;
        let y: f64 = ys.parse().map_err(|_| parse3())?;
        coord_decimals = coord_decimals.max(decimals(xs)).max(decimals(ys));
        nodes.push(TsplibNode {
            id,
            x: T::from_f64_lossy(x),
            y: T::from_f64_lossy(y),
        });
    }

    if !seen_section {
        return Err(TsplibError::MissingSection);
    }
    let dimension = dimension.ok_or(TsplibError::MissingDimension)?;
    if dimension != nodes.len() {
        return Err(TsplibError::DimensionMismatch {
            expected: dimension,
            found: nodes.len(),
        });
    }
    Ok(TsplibFile {
        name,
        edge_weight_type,
        dimension,
        nodes,
        coord_decimals,
    })
}

#[cfg(test)]
pub(crate) fn synthetic_file(n: usize, decimals: bool) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "NAME : synth{n}\nTYPE : TSP\nDIMENSION : {n}\nEDGE_WEIGHT_TYPE : ATT\nNODE_COORD_SECTION\n"
    ));
    for i in 1..=n {
        // Deterministic lattice-ish spread.
        let x = (i * 37 % 101) as f64 + if decimals { 0.25 } else { 0.0 };
        let y = (i * 73 % 89) as f64;
        s.push_str(&format!("{i} {x} {y}\n"));
    }
    s.push_str("EOF\n");
    s
}
