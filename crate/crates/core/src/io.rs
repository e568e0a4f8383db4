//! Graph and partition file formats.
//!
//! * METIS/CHACO adjacency text (read + write). 1-indexed on disk.
//! * Matrix Market coordinate (read + write of the symmetric pattern).
//! * Partition files: one 0-indexed label per line after a `%` header.

use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::graph::{Graph, Partition};

/// Parses a METIS/CHACO graph. Vertex and edge weights, if the format code
/// declares them, are discarded.
pub fn parse_metis(text: &str) -> Result<Graph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim_start().starts_with('%'));

    let (header_line, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| Error::parse(1, "missing header line"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 2 || fields.len() > 4 {
        return Err(Error::parse(header_line, "header must be `n m [fmt [ncon]]`"));
    }
    let num = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::parse(header_line, format!("invalid {what} `{s}`")))
    };
    let n = num(fields[0], "vertex count")?;
    let declared_m = num(fields[1], "edge count")?;
    let fmt = fields.get(2).copied().unwrap_or("0");
    if fmt.len() > 3 || !fmt.chars().all(|c| c == '0' || c == '1') {
        return Err(Error::parse(header_line, format!("invalid format code `{fmt}`")));
    }
    let code: Vec<bool> = format!("{fmt:0>3}").chars().map(|c| c == '1').collect();
    let (has_vsize, has_vwgt, has_ewgt) = (code[0], code[1], code[2]);
    let ncon = match fields.get(3) {
        Some(s) => num(s, "constraint count")?,
        None => usize::from(has_vwgt),
    };
    if has_vsize || has_vwgt || has_ewgt {
        warn!("METIS format code {fmt}: weights are ignored, graph treated as unweighted");
    }

    let mut lists = Vec::with_capacity(n);
    for (line_no, line) in lines.by_ref() {
        if lists.len() == n {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::parse(line_no, format!("more than {n} vertex lines")));
        }
        let mut tokens = line.split_whitespace().map(|t| {
            t.parse::<i64>()
                .map_err(|_| Error::parse(line_no, format!("invalid token `{t}`")))
        });
        if has_vsize {
            tokens.next().transpose()?;
        }
        if has_vwgt {
            for _ in 0..ncon {
                tokens.next().transpose()?;
            }
        }
        let u = lists.len();
        let mut list = Vec::new();
        while let Some(tok) = tokens.next() {
            let v = tok?;
            if v < 1 || v as usize > n {
                return Err(Error::parse(
                    line_no,
                    format!("neighbor {v} out of range [1, {n}]"),
                ));
            }
            let v = v as usize - 1;
            if v == u {
                return Err(Error::parse(line_no, format!("self-loop at vertex {}", u + 1)));
            }
            list.push(v);
            if has_ewgt {
                tokens
                    .next()
                    .transpose()?
                    .ok_or_else(|| Error::parse(line_no, "missing edge weight"))?;
            }
        }
        lists.push(list);
    }
    if lists.len() < n {
        // Trailing isolated vertices may be represented by missing blank lines.
        lists.resize(n, Vec::new());
    }

    let g = Graph::from_adjacency(&lists)?;
    if g.m() != declared_m {
        return Err(Error::parse(
            header_line,
            format!("header declares {declared_m} edges but {} are listed", g.m()),
        ));
    }
    Ok(g)
}

pub fn write_metis(g: &Graph) -> String {
    let mut out = String::new();
    writeln!(out, "{} {}", g.n(), g.m()).unwrap();
    for u in 0..g.n() {
        let line: Vec<String> = g.neighbors(u).iter().map(|v| (v + 1).to_string()).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    out
}

/// Parses a Matrix Market coordinate file into the graph of its off-diagonal
/// nonzero pattern. Values are ignored apart from explicit zeros, which are
/// skipped; the pattern is symmetrized and the diagonal dropped.
pub fn parse_matrix_market(text: &str) -> Result<Graph> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, banner) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    let banner: Vec<String> = banner.split_whitespace().map(str::to_lowercase).collect();
    if banner.len() != 5 || banner[0] != "%%matrixmarket" || banner[1] != "matrix" {
        return Err(Error::parse(1, "expected `%%MatrixMarket matrix coordinate <field> <symmetry>`"));
    }
    if banner[2] != "coordinate" {
        return Err(Error::parse(1, format!("unsupported layout `{}`", banner[2])));
    }
    let values_per_entry = match banner[3].as_str() {
        "pattern" => 0,
        "real" | "integer" | "double" => 1,
        "complex" => 2,
        other => return Err(Error::parse(1, format!("unsupported field `{other}`"))),
    };
    match banner[4].as_str() {
        "general" | "symmetric" | "skew-symmetric" | "hermitian" => {}
        other => return Err(Error::parse(1, format!("unsupported symmetry `{other}`"))),
    }

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = body
        .next()
        .ok_or_else(|| Error::parse(1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(size_line, "size line must be `rows cols nnz`"))?;
    if dims.len() != 3 {
        return Err(Error::parse(size_line, "size line must be `rows cols nnz`"));
    }
    let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
    if rows != cols {
        return Err(Error::parse(size_line, format!("matrix is {rows}x{cols}, not square")));
    }

    let mut edges = Vec::with_capacity(nnz);
    let mut explicit_zeros = 0usize;
    let mut seen = 0usize;
    for (line_no, line) in body {
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 2 + values_per_entry {
            return Err(Error::parse(line_no, "malformed entry"));
        }
        let idx = |s: &str| -> Result<usize> {
            let i = s
                .parse::<usize>()
                .map_err(|_| Error::parse(line_no, format!("invalid index `{s}`")))?;
            if i < 1 || i > rows {
                return Err(Error::parse(line_no, format!("index {i} out of bounds [1, {rows}]")));
            }
            Ok(i - 1)
        };
        let (i, j) = (idx(tok[0])?, idx(tok[1])?);
        let vals: Vec<f64> = tok[2..]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(line_no, "invalid value"))?;
        seen += 1;
        if !vals.is_empty() && vals.iter().all(|&v| v == 0.0) {
            explicit_zeros += 1;
            continue;
        }
        edges.push((i, j));
    }
    if seen != nnz {
        return Err(Error::parse(
            size_line,
            format!("declared {nnz} entries but found {seen}"),
        ));
    }
    if explicit_zeros > 0 {
        warn!("skipped {explicit_zeros} explicit zero entries");
    }
    let (g, report) = Graph::from_edges(rows, edges)?;
    if report.self_loops > 0 {
        warn!("dropped {} diagonal entries", report.self_loops);
    }
    Ok(g)
}

pub fn write_matrix_market(g: &Graph) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate pattern symmetric\n");
    writeln!(out, "{} {} {}", g.n(), g.n(), g.m()).unwrap();
    for (u, v) in g.edges() {
        writeln!(out, "{} {}", v + 1, u + 1).unwrap();
    }
    out
}

/// Reads a graph file, choosing the parser by extension (`.mtx` is Matrix
/// Market, anything else METIS). The graph is named after the file stem.
pub fn read_graph(path: &Path) -> Result<Graph> {
    let text = std::fs::read_to_string(path)?;
    let is_mtx = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("mtx"));
    let g = if is_mtx {
        parse_matrix_market(&text)?
    } else {
        parse_metis(&text)?
    };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(g.with_name(name))
}

pub fn write_partition(p: &Partition, graph_name: &str, epsilon: f64) -> String {
    let mut out = String::new();
    writeln!(out, "% graph={graph_name} k={} epsilon={epsilon}", p.k()).unwrap();
    for l in p.labels() {
        writeln!(out, "{l}").unwrap();
    }
    out
}

/// Parses a partition file. `k` defaults to the header value, or else to
/// `max label + 1`.
pub fn parse_partition(text: &str, k: Option<usize>) -> Result<Partition> {
    let mut header_k = None;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(comment) = t.strip_prefix('%') {
            for kv in comment.split_whitespace() {
                if let Some(v) = kv.strip_prefix("k=") {
                    header_k = v.parse().ok();
                }
            }
            continue;
        }
        if t.is_empty() {
            continue;
        }
        labels.push(
            t.parse::<usize>()
                .map_err(|_| Error::parse(i + 1, format!("invalid label `{t}`")))?,
        );
    }
    let k = k
        .or(header_k)
        .unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    Partition::new(labels, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn metis_examples() {
        let g = parse_metis("3 2\n2\n1 3\n2\n").unwrap();
        assert_eq!((g.n(), g.m()), (3, 2));
        assert_eq!(g.edges(), vec![(0, 1), (1, 2)]);
        let g = parse_metis("2 1\n2\n1\n").unwrap();
        assert_eq!((g.n(), g.m()), (2, 1));
    }

    #[test]
    fn metis_comments_weights_and_isolated_vertices() {
        let text = "% a comment\n4 2 1\n% inline comment\n2 5\n1 5 3 7\n2 7\n\n";
        let g = parse_metis(text).unwrap();
        assert_eq!((g.n(), g.m()), (4, 2));
        assert_eq!(g.degree(3), 0);
        let vw = parse_metis("2 1 10\n3 2\n4 1\n").unwrap();
        assert_eq!(vw.m(), 1);
    }

    #[test]
    fn metis_errors() {
        assert!(matches!(parse_metis(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_metis("x 1\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_metis("2 1\n3\n1\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_metis("2 1\n2\n\n"), Err(Error::InvalidGraph(_))));
        assert!(matches!(parse_metis("2 1\n1\n\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_metis("2 2\n2\n1\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_metis("1 0\n\n1\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn matrix_market_examples() {
        let sym = "%%MatrixMarket matrix coordinate pattern symmetric\n2 2 1\n2 1\n";
        let g = parse_matrix_market(sym).unwrap();
        assert_eq!((g.n(), g.m()), (2, 1));

        let loops = "%%MatrixMarket matrix coordinate real general\n% c\n2 2 2\n1 1 4.0\n1 2 -1.5\n";
        let g = parse_matrix_market(loops).unwrap();
        assert_eq!((g.n(), g.m()), (2, 1));

        let dup = "%%MatrixMarket matrix coordinate integer general\n2 2 2\n1 2 1\n2 1 1\n";
        assert_eq!(parse_matrix_market(dup).unwrap().m(), 1);

        let zero = "%%MatrixMarket matrix coordinate real general\n3 3 2\n1 2 0.0\n2 3 1\n";
        assert_eq!(parse_matrix_market(zero).unwrap().edges(), vec![(1, 2)]);
    }

    #[test]
    fn matrix_market_errors() {
        let nonsquare = "%%MatrixMarket matrix coordinate pattern general\n2 3 1\n1 2\n";
        assert!(parse_matrix_market(nonsquare).is_err());
        let oob = "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 3\n";
        assert!(parse_matrix_market(oob).is_err());
        let junk = "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 abc\n";
        assert!(parse_matrix_market(junk).is_err());
        let array = "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n";
        assert!(parse_matrix_market(array).is_err());
        let short = "%%MatrixMarket matrix coordinate pattern general\n2 2 2\n1 2\n";
        assert!(parse_matrix_market(short).is_err());
    }

    #[test]
    fn partition_file_round_trip() {
        let p = Partition::new(vec![0, 2, 1, 1], 3).unwrap();
        let text = write_partition(&p, "toy", 0.03);
        assert!(text.starts_with("% graph=toy k=3 epsilon=0.03\n"));
        assert_eq!(parse_partition(&text, None).unwrap(), p);
        assert!(parse_partition("0\nx\n", None).is_err());
    }

    proptest! {
        #[test]
        fn metis_and_matrix_market_round_trip(seed in any::<u64>(), n in 1usize..40, p in 0.0f64..0.5) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = generators::gnp(n, p, &mut rng);
            prop_assert_eq!(&parse_metis(&write_metis(&g)).unwrap(), &g);
            prop_assert_eq!(&parse_matrix_market(&write_matrix_market(&g)).unwrap(), &g);
        }
    }
}
