//! Plain-text formats for problems and results.
//!
//! Models: `graphmodel v1` header, `n <count>`, then `v <i> <weight>`
//! lines for nonzero fields and `e <i> <j> <weight>` lines with `i < j`.
//! Coverings: `regions v1` header and `r <v...>` lines of one to four
//! vertices. Assignments: one line of space-separated signs. States:
//! `gramstate v1`, `rank`/`n` lines, then one `o`/`v i`/`e i j` line per
//! stored vector (multipliers are not persisted; a reloaded state
//! restarts them at zero). Images: PGM, both ASCII (`P2`) and binary
//! (`P5`) on read, ASCII on write; gray values of at least 128 map to +1.
//! Traces: a `sweep,objective,residual,delta` CSV.
//!
//! Weights are written with 17 significant digits so every finite value
//! round-trips bit-exactly. `#` starts a comment anywhere on a line in
//! the line-based formats.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{
    Assignment, BinaryImage, CoveringError, GraphModel, ModelError, RegionCovering,
};
use crate::sdp::{GramState, IndexSet, SweepTrace};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Covering(#[from] CoveringError),
    #[error("{0}")]
    Invalid(String),
}

fn parse_err(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse { line, msg: msg.into() }
}

/// Meaningful lines of a text: 1-based line number and the content with
/// comments and surrounding whitespace stripped.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let content = raw.split('#').next().unwrap_or("").trim();
        (!content.is_empty()).then_some((i + 1, content))
    })
}

fn parse_f64(line: usize, token: &str) -> Result<f64, IoError> {
    token
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("expected a number, got `{token}`")))
}

fn parse_usize(line: usize, token: &str) -> Result<usize, IoError> {
    token
        .parse::<usize>()
        .map_err(|_| parse_err(line, format!("expected a count, got `{token}`")))
}

fn parse_u32(line: usize, token: &str) -> Result<u32, IoError> {
    token
        .parse::<u32>()
        .map_err(|_| parse_err(line, format!("expected a vertex id, got `{token}`")))
}

// ---------------------------------------------------------------- models

pub fn format_model(model: &GraphModel) -> String {
    let mut out = String::from("graphmodel v1\n");
    let _ = writeln!(out, "n {}", model.num_vertices());
    for (i, &h) in model.vertex_weights().iter().enumerate() {
        if h != 0.0 {
            let _ = writeln!(out, "v {i} {h:.16e}");
        }
    }
    for &(i, j, w) in model.edges() {
        let _ = writeln!(out, "e {i} {j} {w:.16e}");
    }
    out
}

pub fn parse_model(text: &str) -> Result<GraphModel, IoError> {
    let mut it = lines(text);
    match it.next() {
        Some((_, "graphmodel v1")) => {}
        Some((line, other)) => {
            return Err(parse_err(line, format!("expected `graphmodel v1`, got `{other}`")))
        }
        None => return Err(IoError::Invalid("empty model file".into())),
    }
    let (line, decl) = it
        .next()
        .ok_or_else(|| IoError::Invalid("missing `n <count>` line".into()))?;
    let n = match decl.split_whitespace().collect::<Vec<_>>()[..] {
        ["n", count] => parse_usize(line, count)?,
        _ => return Err(parse_err(line, "expected `n <count>`")),
    };

    let mut weights = vec![0.0; n];
    let mut seen_field = vec![false; n];
    let mut edges = Vec::new();
    for (line, content) in it {
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens[..] {
            ["v", i, w] => {
                let i = parse_u32(line, i)? as usize;
                if i >= n {
                    return Err(parse_err(line, format!("vertex {i} out of range")));
                }
                if seen_field[i] {
                    return Err(parse_err(line, format!("duplicate field for vertex {i}")));
                }
                seen_field[i] = true;
                weights[i] = parse_f64(line, w)?;
            }
            ["e", i, j, w] => {
                let i = parse_u32(line, i)?;
                let j = parse_u32(line, j)?;
                if i >= j {
                    return Err(parse_err(line, "edge endpoints must satisfy i < j"));
                }
                edges.push((i, j, parse_f64(line, w)?));
            }
            _ => return Err(parse_err(line, format!("unrecognized line `{content}`"))),
        }
    }
    Ok(GraphModel::new(n, edges, weights)?)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<GraphModel, IoError> {
    parse_model(&std::fs::read_to_string(path)?)
}

pub fn write_model(path: impl AsRef<Path>, model: &GraphModel) -> Result<(), IoError> {
    Ok(std::fs::write(path, format_model(model))?)
}

// -------------------------------------------------------------- coverings

pub fn format_covering(cov: &RegionCovering) -> String {
    let mut out = String::from("regions v1\n");
    for region in cov.regions() {
        out.push('r');
        for v in region {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_covering(text: &str) -> Result<RegionCovering, IoError> {
    let mut it = lines(text);
    match it.next() {
        Some((_, "regions v1")) => {}
        Some((line, other)) => {
            return Err(parse_err(line, format!("expected `regions v1`, got `{other}`")))
        }
        None => return Err(IoError::Invalid("empty covering file".into())),
    }
    let mut regions = Vec::new();
    for (line, content) in it {
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens.split_first() {
            Some((&"r", verts)) if (1..=4).contains(&verts.len()) => {
                let region = verts
                    .iter()
                    .map(|v| parse_u32(line, v))
                    .collect::<Result<Vec<_>, _>>()?;
                regions.push(region);
            }
            _ => {
                return Err(parse_err(line, "expected `r <v>` with one to four vertices"))
            }
        }
    }
    if regions.is_empty() {
        return Err(IoError::Invalid("covering has no regions".into()));
    }
    let cap = regions.iter().map(Vec::len).max().unwrap_or(1);
    Ok(RegionCovering::new(regions, cap)?)
}

pub fn read_covering(path: impl AsRef<Path>) -> Result<RegionCovering, IoError> {
    parse_covering(&std::fs::read_to_string(path)?)
}

pub fn write_covering(path: impl AsRef<Path>, cov: &RegionCovering) -> Result<(), IoError> {
    Ok(std::fs::write(path, format_covering(cov))?)
}

// ------------------------------------------------------------ assignments

pub fn format_assignment(x: &Assignment) -> String {
    let mut out = String::new();
    for (k, v) in x.values().iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
    out
}

pub fn parse_assignment(text: &str) -> Result<Assignment, IoError> {
    let mut values = Vec::new();
    for (line, content) in lines(text) {
        for token in content.split_whitespace() {
            match token {
                "1" | "+1" => values.push(1),
                "-1" => values.push(-1),
                other => {
                    return Err(parse_err(line, format!("expected a sign, got `{other}`")))
                }
            }
        }
    }
    Ok(Assignment::new(values)?)
}

pub fn read_assignment(path: impl AsRef<Path>) -> Result<Assignment, IoError> {
    parse_assignment(&std::fs::read_to_string(path)?)
}

pub fn write_assignment(path: impl AsRef<Path>, x: &Assignment) -> Result<(), IoError> {
    Ok(std::fs::write(path, format_assignment(x))?)
}

// ----------------------------------------------------------------- images

/// Parses a PGM image, ASCII (`P2`) or binary (`P5`), with a maximum gray
/// value of at most 255. Values of 128 and above become +1 pixels.
pub fn parse_pgm(bytes: &[u8]) -> Result<BinaryImage, IoError> {
    let mut pos = 0;
    let mut token = |what: &str| -> Result<String, IoError> {
        // Skip whitespace and `#` comments.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(IoError::Invalid(format!("image truncated before {what}")));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token("magic number")?;
    if magic != "P2" && magic != "P5" {
        return Err(IoError::Invalid(format!("unsupported image type `{magic}`")));
    }
    let width: usize = token("width")?
        .parse()
        .map_err(|_| IoError::Invalid("bad image width".into()))?;
    let height: usize = token("height")?
        .parse()
        .map_err(|_| IoError::Invalid("bad image height".into()))?;
    let maxval: u32 = token("max gray value")?
        .parse()
        .map_err(|_| IoError::Invalid("bad max gray value".into()))?;
    if maxval == 0 || maxval > 255 {
        return Err(IoError::Invalid(format!("max gray value {maxval} outside 1..=255")));
    }

    let count = width
        .checked_mul(height)
        .ok_or_else(|| IoError::Invalid("image dimensions overflow".into()))?;
    let mut pixels = Vec::with_capacity(count);
    if magic == "P2" {
        for _ in 0..count {
            let gray: u32 = token("pixel")?
                .parse()
                .map_err(|_| IoError::Invalid("bad pixel value".into()))?;
            if gray > maxval {
                return Err(IoError::Invalid(format!("pixel {gray} exceeds max {maxval}")));
            }
            pixels.push(if gray >= 128 { 1 } else { -1 });
        }
    } else {
        // One whitespace byte separates the header from the raster.
        pos += 1;
        if bytes.len() < pos + count {
            return Err(IoError::Invalid("binary raster truncated".into()));
        }
        for &gray in &bytes[pos..pos + count] {
            pixels.push(if gray >= 128 { 1 } else { -1 });
        }
    }
    BinaryImage::new(width, height, pixels).map_err(|e| IoError::Invalid(e.to_string()))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<BinaryImage, IoError> {
    parse_pgm(&std::fs::read(path)?)
}

/// Formats an image as ASCII PGM: +1 pixels are white (255), -1 black.
pub fn format_pgm(image: &BinaryImage) -> String {
    let mut out = format!("P2\n{} {}\n255\n", image.width(), image.height());
    for row in 0..image.height() {
        for col in 0..image.width() {
            if col > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}", if image.get(row, col) == 1 { 255 } else { 0 });
        }
        out.push('\n');
    }
    out
}

pub fn write_pgm(path: impl AsRef<Path>, image: &BinaryImage) -> Result<(), IoError> {
    Ok(std::fs::write(path, format_pgm(image))?)
}

// ----------------------------------------------------------------- states

pub fn format_gram_state(state: &GramState) -> String {
    let index = state.index_set();
    let mut out = String::from("gramstate v1\n");
    let _ = writeln!(out, "rank {}", state.rank());
    let _ = writeln!(out, "n {}", index.num_vertices());
    let vector = |out: &mut String, slot: usize| {
        for v in state.vector(slot) {
            let _ = write!(out, " {v:.16e}");
        }
        out.push('\n');
    };
    out.push('o');
    vector(&mut out, 0);
    for i in 0..index.num_vertices() {
        let _ = write!(out, "v {i}");
        vector(&mut out, 1 + i);
    }
    for (k, &(i, j)) in index.covered_pairs().iter().enumerate() {
        let _ = write!(out, "e {i} {j}");
        vector(&mut out, 1 + index.num_vertices() + k);
    }
    out
}

pub fn parse_gram_state(text: &str) -> Result<GramState, IoError> {
    let mut it = lines(text);
    match it.next() {
        Some((_, "gramstate v1")) => {}
        Some((line, other)) => {
            return Err(parse_err(line, format!("expected `gramstate v1`, got `{other}`")))
        }
        None => return Err(IoError::Invalid("empty state file".into())),
    }
    let rank = match it.next() {
        Some((line, decl)) => match decl.split_whitespace().collect::<Vec<_>>()[..] {
            ["rank", r] => parse_usize(line, r)?,
            _ => return Err(parse_err(line, "expected `rank <count>`")),
        },
        None => return Err(IoError::Invalid("missing `rank` line".into())),
    };
    let n = match it.next() {
        Some((line, decl)) => match decl.split_whitespace().collect::<Vec<_>>()[..] {
            ["n", c] => parse_usize(line, c)?,
            _ => return Err(parse_err(line, "expected `n <count>`")),
        },
        None => return Err(IoError::Invalid("missing `n` line".into())),
    };

    let mut data = Vec::new();
    let mut pairs = Vec::new();
    let mut slot = 0usize;
    for (line, content) in it {
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let coords = match tokens.split_first() {
            Some((&"o", rest)) => {
                if slot != 0 {
                    return Err(parse_err(line, "origin vector must come first"));
                }
                rest
            }
            Some((&"v", rest)) => {
                let (head, coords) = rest
                    .split_first()
                    .ok_or_else(|| parse_err(line, "missing vertex id"))?;
                let i = parse_usize(line, head)?;
                if slot != 1 + i || i >= n {
                    return Err(parse_err(line, format!("vertex {i} out of order")));
                }
                coords
            }
            Some((&"e", rest)) => {
                if rest.len() < 2 {
                    return Err(parse_err(line, "missing pair ids"));
                }
                let i = parse_u32(line, rest[0])?;
                let j = parse_u32(line, rest[1])?;
                if slot != 1 + n + pairs.len() {
                    return Err(parse_err(line, "pair vector out of order"));
                }
                pairs.push((i, j));
                &rest[2..]
            }
            _ => return Err(parse_err(line, format!("unrecognized line `{content}`"))),
        };
        if coords.len() != rank {
            return Err(parse_err(
                line,
                format!("expected {rank} coordinates, got {}", coords.len()),
            ));
        }
        for c in coords {
            data.push(parse_f64(line, c)?);
        }
        slot += 1;
    }
    if slot < 1 + n {
        return Err(IoError::Invalid(format!(
            "state lists {slot} vectors but needs at least {}",
            1 + n
        )));
    }
    let index = IndexSet::from_pairs(n, pairs)
        .ok_or_else(|| IoError::Invalid("pair vectors out of canonical order".into()))?;
    GramState::from_raw(Arc::new(index), rank, data, Vec::new())
        .map_err(|e| IoError::Invalid(e.to_string()))
}

pub fn read_gram_state(path: impl AsRef<Path>) -> Result<GramState, IoError> {
    parse_gram_state(&std::fs::read_to_string(path)?)
}

pub fn write_gram_state(path: impl AsRef<Path>, state: &GramState) -> Result<(), IoError> {
    Ok(std::fs::write(path, format_gram_state(state))?)
}

// ----------------------------------------------------------------- traces

pub fn format_trace(trace: &SweepTrace) -> String {
    let mut out = String::from("sweep,objective,residual,delta\n");
    for s in trace {
        let _ = writeln!(out, "{},{},{},{}", s.sweep, s.objective, s.residual, s.delta);
    }
    out
}

pub fn write_trace(path: impl AsRef<Path>, trace: &SweepTrace) -> Result<(), IoError> {
    Ok(std::fs::write(path, format_trace(trace))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gen_spinglass, vertex_covering, SpinGlassDistribution};
    use crate::sdp::{init_state, SolverConfig};

    #[test]
    fn model_round_trips_bit_exactly() {
        let model = gen_spinglass(3, SpinGlassDistribution::GaussianCouplingsUnitFields, 7)
            .unwrap();
        let text = format_model(&model);
        let back = parse_model(&text).unwrap();
        assert_eq!(model.edges(), back.edges());
        assert_eq!(model.vertex_weights(), back.vertex_weights());
        assert_eq!(model.num_vertices(), back.num_vertices());
    }

    #[test]
    fn model_zero_fields_are_omitted() {
        let model = GraphModel::new(3, vec![(0, 2, -0.25)], vec![0.0, 1.5, 0.0]).unwrap();
        let text = format_model(&model);
        assert_eq!(text.matches("\nv ").count(), 1);
        let back = parse_model(&text).unwrap();
        assert_eq!(back.vertex_weights(), &[0.0, 1.5, 0.0]);
    }

    #[test]
    fn model_parser_accepts_comments_and_rejects_bad_lines() {
        let text = "# instance\ngraphmodel v1\nn 2 # two vertices\n\ne 0 1 1.0\n";
        let model = parse_model(text).unwrap();
        assert_eq!(model.edges(), &[(0, 1, 1.0)]);

        assert!(parse_model("graphmodel v2\nn 1\n").is_err());
        assert!(parse_model("graphmodel v1\nn 2\ne 1 0 1.0\n").is_err());
        assert!(parse_model("graphmodel v1\nn 2\nv 0 1\nv 0 2\n").is_err());
        assert!(parse_model("graphmodel v1\nn 2\nv 5 1.0\n").is_err());
        assert!(parse_model("graphmodel v1\nn 2\nq 0\n").is_err());
    }

    #[test]
    fn covering_round_trips_and_infers_cap() {
        let cov = RegionCovering::new(vec![vec![0, 1, 2], vec![2, 3]], 3).unwrap();
        let back = parse_covering(&format_covering(&cov)).unwrap();
        assert_eq!(back.regions(), cov.regions());
        assert_eq!(back.cap(), 3);
        assert!(parse_covering("regions v1\n").is_err());
        assert!(parse_covering("regions v1\nr 0 1 2 3 4\n").is_err());
    }

    #[test]
    fn assignment_round_trips_and_accepts_plus_prefix() {
        let x = Assignment::new(vec![1, -1, -1, 1]).unwrap();
        let back = parse_assignment(&format_assignment(&x)).unwrap();
        assert_eq!(back.values(), x.values());
        let explicit = parse_assignment("+1 -1\n").unwrap();
        assert_eq!(explicit.values(), &[1, -1]);
        assert!(parse_assignment("1 0 1").is_err());
    }

    #[test]
    fn ascii_pgm_round_trips_through_threshold() {
        let image = BinaryImage::new(3, 2, vec![1, -1, 1, -1, -1, 1]).unwrap();
        let text = format_pgm(&image);
        let back = parse_pgm(text.as_bytes()).unwrap();
        assert_eq!(back, image);
    }

    #[test]
    fn binary_pgm_parses_with_comments() {
        let mut bytes = b"P5 # raw\n2 2\n255\n".to_vec();
        bytes.extend([200u8, 10, 127, 128]);
        let image = parse_pgm(&bytes).unwrap();
        assert_eq!(image.get(0, 0), 1);
        assert_eq!(image.get(0, 1), -1);
        assert_eq!(image.get(1, 0), -1);
        assert_eq!(image.get(1, 1), 1);
    }

    #[test]
    fn pgm_rejects_wide_gray_ranges_and_truncation() {
        assert!(parse_pgm(b"P2\n1 1\n65535\n40000\n").is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\x01\x02").is_err());
        assert!(parse_pgm(b"P3\n1 1\n255\n0\n").is_err());
    }

    #[test]
    fn gram_state_round_trips_bit_exactly() {
        let model = gen_spinglass(2, SpinGlassDistribution::GaussianCouplingsWeakFields, 3)
            .unwrap();
        let cov = crate::model::edge_covering(&model);
        let config = SolverConfig { rank: 4, seed: 9, ..SolverConfig::default() };
        let state = init_state(&cov, &model, &config).unwrap();
        let text = format_gram_state(&state);
        let back = parse_gram_state(&text).unwrap();
        assert_eq!(back, state);
    }

    #[test]
    fn gram_state_reader_enforces_order() {
        let model = GraphModel::new(2, vec![(0, 1, 1.0)], vec![0.0; 2]).unwrap();
        let cov = vertex_covering(2);
        let config = SolverConfig { rank: 2, ..SolverConfig::default() };
        let state = init_state(&cov, &model, &config).unwrap();
        let text = format_gram_state(&state);
        let swapped: String = {
            let mut ls: Vec<&str> = text.lines().collect();
            ls.swap(3, 4);
            ls.join("\n")
        };
        assert!(parse_gram_state(&swapped).is_err());
    }

    #[test]
    fn trace_header_is_stable() {
        let trace = vec![crate::sdp::SweepStats {
            sweep: 1,
            objective: 2.5,
            residual: 0.125,
            delta: 1.0,
        }];
        let text = format_trace(&trace);
        assert_eq!(text, "sweep,objective,residual,delta\n1,2.5,0.125,1\n");
    }

    #[test]
    fn file_round_trip_through_a_directory() {
        let dir = tempfile::tempdir().unwrap();
        let model = gen_spinglass(2, SpinGlassDistribution::UnitCouplingsUnitFields, 1).unwrap();
        let path = dir.path().join("model.txt");
        write_model(&path, &model).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(back.edges(), model.edges());
    }
}
