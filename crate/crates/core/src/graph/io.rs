//! Plain-text edge list: a header line `N <size>` followed by one `<i> <j>`
//! line per edge (1-based, `i < j`). Blank lines and `#` comments are ignored.

use std::fs;
use std::path::Path;

use super::{CommGraph, GraphError};

pub fn write_edge_list(graph: &CommGraph) -> String {
    let mut out = format!("N {}\n", graph.size());
    for (i, j) in graph.edges() {
        out.push_str(&format!("{i} {j}\n"));
    }
    out
}

pub fn parse_edge_list(text: &str) -> Result<CommGraph, GraphError> {
    let bad = |line: usize, msg: String| GraphError::Format(format!("line {line}: {msg}"));
    let mut size: Option<usize> = None;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => match fields.as_slice() {
                ["N", n] => {
                    size = Some(
                        n.parse()
                            .map_err(|_| bad(lineno, format!("bad node count {n:?}")))?,
                    )
                }
                _ => return Err(bad(lineno, "expected header `N <size>`".into())),
            },
            Some(_) => match fields.as_slice() {
                [i, j] => {
                    let i: usize = i
                        .parse()
                        .map_err(|_| bad(lineno, format!("bad node index {i:?}")))?;
                    let j: usize = j
                        .parse()
                        .map_err(|_| bad(lineno, format!("bad node index {j:?}")))?;
                    edges.push((i, j));
                }
                _ => return Err(bad(lineno, format!("expected `<i> <j>`, got {line:?}"))),
            },
        }
    }
    let size = size.ok_or_else(|| GraphError::Format("missing `N <size>` header".into()))?;
    CommGraph::from_edges(size, &edges)
}

pub fn read_graph_file(path: &Path) -> Result<CommGraph, GraphError> {
    let text = fs::read_to_string(path).map_err(|e| GraphError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_edge_list(&text)
}

pub fn write_graph_file(graph: &CommGraph, path: &Path) -> Result<(), GraphError> {
    fs::write(path, write_edge_list(graph)).map_err(|e| GraphError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
