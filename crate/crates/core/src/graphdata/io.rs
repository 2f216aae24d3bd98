//! The on-disk graph directory: `graph.json`, `edges.tsv`, `features.tsv`,
//! `labels.tsv`, `masks.tsv`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Graph, Labels, Role};
use crate::error::{Result, SpicError};

const META: &str = "graph.json";
const EDGES: &str = "edges.tsv";
const FEATURES: &str = "features.tsv";
const LABELS: &str = "labels.tsv";
const MASKS: &str = "masks.tsv";

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    num_nodes: usize,
    num_features: usize,
    num_classes: usize,
    multilabel: bool,
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|e| SpicError::io(path, e))
}

/// Non-empty lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn expect_rows(file: &str, got: usize, n: usize) -> Result<()> {
    if got != n {
        return Err(SpicError::parse(
            file,
            got.min(n) + 1,
            format!("expected {n} rows, found {got}"),
        ));
    }
    Ok(())
}

pub fn load_graph(dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dir.as_ref();
    let meta: Meta =
        serde_json::from_str(&read(dir, META)?).map_err(|e| SpicError::parse(META, e.line(), e.to_string()))?;
    let n = meta.num_nodes;
    let d = meta.num_features;
    let c = meta.num_classes;
    if n == 0 {
        return Err(SpicError::parse(META, 0, "num_nodes must be positive"));
    }

    let mut edges = Vec::new();
    for (line, text) in lines(&read(dir, EDGES)?) {
        let ids: Vec<&str> = text.split_whitespace().collect();
        if ids.len() != 2 {
            return Err(SpicError::parse(EDGES, line, "expected two node ids"));
        }
        let mut pair = [0usize; 2];
        for (slot, tok) in pair.iter_mut().zip(&ids) {
            *slot = tok
                .parse()
                .map_err(|_| SpicError::parse(EDGES, line, format!("bad node id {tok:?}")))?;
            if *slot >= n {
                return Err(SpicError::parse(
                    EDGES,
                    line,
                    format!("node index {slot} out of range (n = {n})"),
                ));
            }
        }
        if pair[0] == pair[1] {
            return Err(SpicError::parse(EDGES, line, format!("self-loop at line {line}")));
        }
        edges.push((pair[0], pair[1]));
    }
    let adjacency = Graph::adjacency_from_edges(n, &edges)?;

    let mut values = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (line, text) in lines(&read(dir, FEATURES)?) {
        let before = values.len();
        for tok in text.split_whitespace() {
            values.push(
                tok.parse::<f64>()
                    .map_err(|_| SpicError::parse(FEATURES, line, format!("bad feature value {tok:?}")))?,
            );
        }
        if values.len() - before != d {
            return Err(SpicError::parse(
                FEATURES,
                line,
                format!("expected {d} values, found {}", values.len() - before),
            ));
        }
        rows += 1;
    }
    expect_rows(FEATURES, rows, n)?;
    let features = DMatrix::from_row_slice(n, d, &values);

    let label_text = read(dir, LABELS)?;
    let labels = if meta.multilabel {
        let mut bits = Vec::with_capacity(n * c);
        let mut rows = 0;
        for (line, text) in lines(&label_text) {
            let before = bits.len();
            for tok in text.split_whitespace() {
                bits.push(match tok {
                    "0" => 0u8,
                    "1" => 1u8,
                    _ => {
                        return Err(SpicError::parse(
                            LABELS,
                            line,
                            format!("multilabel entry must be 0 or 1, got {tok:?}"),
                        ))
                    }
                });
            }
            if bits.len() - before != c {
                return Err(SpicError::parse(LABELS, line, format!("expected {c} indicators")));
            }
            rows += 1;
        }
        expect_rows(LABELS, rows, n)?;
        Labels::Multi(DMatrix::from_row_slice(n, c, &bits))
    } else {
        let mut classes = Vec::with_capacity(n);
        for (line, text) in lines(&label_text) {
            let tok = text.trim();
            let class: usize = tok
                .parse()
                .map_err(|_| SpicError::parse(LABELS, line, format!("bad label {tok:?}")))?;
            if class >= c {
                return Err(SpicError::parse(
                    LABELS,
                    line,
                    format!("label {class} out of class range 0..{c}"),
                ));
            }
            classes.push(class);
        }
        expect_rows(LABELS, classes.len(), n)?;
        Labels::Single {
            classes,
            num_classes: c,
        }
    };

    let mut roles = Vec::with_capacity(n);
    for (line, text) in lines(&read(dir, MASKS)?) {
        roles.push(
            text.trim()
                .parse::<Role>()
                .map_err(|m| SpicError::parse(MASKS, line, m))?,
        );
    }
    expect_rows(MASKS, roles.len(), n)?;

    Graph::new(adjacency, features, labels, roles)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>> {
    let path = dir.join(name);
    fs::File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| SpicError::io(path, e))
}

/// Writes `g` in the directory format. Floats use the shortest
/// representation that parses back to the same value.
pub fn save_graph(g: &Graph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| SpicError::io(dir, e))?;
    let wrap = |name: &str| {
        let path = dir.join(name);
        move |e: std::io::Error| SpicError::io(path, e)
    };

    let meta = Meta {
        num_nodes: g.num_nodes(),
        num_features: g.num_features(),
        num_classes: g.num_classes(),
        multilabel: g.labels().is_multilabel(),
    };
    let mut json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    json.push('\n');
    fs::write(dir.join(META), json).map_err(wrap(META))?;

    let mut w = create(dir, EDGES)?;
    for (a, b) in g.edge_list() {
        writeln!(w, "{a}\t{b}").map_err(wrap(EDGES))?;
    }
    w.flush().map_err(wrap(EDGES))?;

    let mut w = create(dir, FEATURES)?;
    let x = g.features();
    for i in 0..x.nrows() {
        let row: Vec<String> = (0..x.ncols()).map(|j| x[(i, j)].to_string()).collect();
        writeln!(w, "{}", row.join("\t")).map_err(wrap(FEATURES))?;
    }
    w.flush().map_err(wrap(FEATURES))?;

    let mut w = create(dir, LABELS)?;
    match g.labels() {
        Labels::Single { classes, .. } => {
            for c in classes {
                writeln!(w, "{c}").map_err(wrap(LABELS))?;
            }
        }
        Labels::Multi(m) => {
            for i in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
                writeln!(w, "{}", row.join(" ")).map_err(wrap(LABELS))?;
            }
        }
    }
    w.flush().map_err(wrap(LABELS))?;

    let mut w = create(dir, MASKS)?;
    for r in g.roles() {
        writeln!(w, "{r}").map_err(wrap(MASKS))?;
    }
    w.flush().map_err(wrap(MASKS))?;
    Ok(())
}
