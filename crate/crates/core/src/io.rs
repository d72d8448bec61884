//! Text file formats.
//!
//! Every reader takes the file contents plus a source name used in
//! `name:line: message` diagnostics. Blank lines and lines starting with `#`
//! are skipped. Writers emit a canonical form, so write → read → write
//! reproduces the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, LabelVector, MultiRelationGraph, RelationGraph};
use crate::metrics::{Confusion, EvalResult};
use crate::model::ModelParams;
use crate::synth::CamouflageSpec;
use crate::training::{BestRecord, Checkpoint, TrainConfig};

pub const GRAPH_HEADER: &str = "HOGRL-GRAPH 1";
pub const MATRIX_HEADER: &str = "HOGRL-MATRIX 1";
pub const CHECKPOINT_HEADER: &str = "HOGRL-CHECKPOINT 1";

struct Lines<'a> {
    source: &'a str,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, source: &'a str) -> Self {
        Self {
            source,
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            source_name: self.source.to_string(),
            line,
            message: message.into(),
        }
    }

    /// Next significant line as `(line number, trimmed text)`.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, raw) in self.inner.by_ref() {
            let line = raw.trim();
            self.last = i + 1;
            if !line.is_empty() && !line.starts_with('#') {
                return Some((i + 1, line));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.next() {
            Some(l) => Ok(l),
            None => Err(self.err(self.last + 1, format!("unexpected end of file, expected {what}"))),
        }
    }

    fn finish(&mut self) -> Result<()> {
        match self.next() {
            Some((line, text)) => Err(self.err(line, format!("unexpected trailing content `{text}`"))),
            None => Ok(()),
        }
    }

    fn number<T: std::str::FromStr>(&self, line: usize, token: Option<&str>, what: &str) -> Result<T> {
        let token = token.ok_or_else(|| self.err(line, format!("missing {what}")))?;
        token
            .parse()
            .map_err(|_| self.err(line, format!("invalid {what} `{token}`")))
    }

    fn real(&self, line: usize, token: &str) -> Result<f64> {
        match token.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(self.err(line, format!("invalid real `{token}`"))),
        }
    }

    fn keyword(&self, line: usize, token: Option<&str>, expected: &str) -> Result<()> {
        if token == Some(expected) {
            Ok(())
        } else {
            Err(self.err(line, format!("expected `{expected}`")))
        }
    }
}

fn source_of(path: &Path) -> String {
    path.display().to_string()
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

// ---- graphs

pub fn format_graph(graphs: &MultiRelationGraph) -> String {
    let mut out = String::new();
    writeln!(out, "{GRAPH_HEADER}").unwrap();
    writeln!(out, "nodes {} relations {}", graphs.n(), graphs.len()).unwrap();
    for (g, name) in graphs.relations().iter().zip(graphs.names()) {
        let edges = g.undirected_edges();
        writeln!(out, "relation {name} {}", edges.len()).unwrap();
        for (u, v) in edges {
            writeln!(out, "{u} {v}").unwrap();
        }
    }
    out
}

pub fn parse_graph(text: &str, source: &str) -> Result<MultiRelationGraph> {
    let mut lines = Lines::new(text, source);
    let (line, header) = lines.expect("header")?;
    if header != GRAPH_HEADER {
        return Err(lines.err(line, format!("expected header `{GRAPH_HEADER}`")));
    }
    let (line, dims) = lines.expect("`nodes <n> relations <R>`")?;
    let mut t = dims.split_whitespace();
    lines.keyword(line, t.next(), "nodes")?;
    let n: usize = lines.number(line, t.next(), "node count")?;
    lines.keyword(line, t.next(), "relations")?;
    let r: usize = lines.number(line, t.next(), "relation count")?;
    if t.next().is_some() {
        return Err(lines.err(line, "unexpected tokens after relation count"));
    }
    if r == 0 {
        return Err(lines.err(line, "at least one relation is required"));
    }

    let mut relations = Vec::with_capacity(r);
    let mut names: Vec<String> = Vec::with_capacity(r);
    for _ in 0..r {
        let (line, head) = lines.expect("`relation <name> <edge_count>`")?;
        let mut t = head.split_whitespace();
        lines.keyword(line, t.next(), "relation")?;
        let name = t.next().ok_or_else(|| lines.err(line, "missing relation name"))?;
        let count: usize = lines.number(line, t.next(), "edge count")?;
        if t.next().is_some() {
            return Err(lines.err(line, "unexpected tokens after edge count"));
        }
        if names.iter().any(|s| s == name) {
            return Err(lines.err(line, format!("duplicate relation `{name}`")));
        }
        let mut edges = Vec::with_capacity(count);
        for _ in 0..count {
            let (line, e) = lines.expect("an edge line `<u> <v>`")?;
            let mut t = e.split_whitespace();
            let u: usize = lines.number(line, t.next(), "node index")?;
            let v: usize = lines.number(line, t.next(), "node index")?;
            if t.next().is_some() {
                return Err(lines.err(line, "an edge line holds exactly two node indices"));
            }
            if u >= n || v >= n {
                return Err(lines.err(line, format!("edge ({u}, {v}) out of range for {n} nodes")));
            }
            edges.push((u, v));
        }
        relations.push(RelationGraph::from_edges(&edges, n, true)?);
        names.push(name.to_string());
    }
    lines.finish()?;
    MultiRelationGraph::new(relations, names)
}

pub fn write_graph(path: &Path, graphs: &MultiRelationGraph) -> Result<()> {
    Ok(fs::write(path, format_graph(graphs))?)
}

pub fn read_graph(path: &Path) -> Result<MultiRelationGraph> {
    parse_graph(&read_file(path)?, &source_of(path))
}

// ---- matrices

pub fn format_matrix(m: &Array2<f64>) -> String {
    let mut out = String::new();
    writeln!(out, "{MATRIX_HEADER}").unwrap();
    writeln!(out, "{} {}", m.nrows(), m.ncols()).unwrap();
    for row in m.rows() {
        let mut first = true;
        for x in row {
            if !first {
                out.push(' ');
            }
            write!(out, "{x:?}").unwrap();
            first = false;
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str, source: &str) -> Result<Array2<f64>> {
    let mut lines = Lines::new(text, source);
    let (line, header) = lines.expect("header")?;
    if header != MATRIX_HEADER {
        return Err(lines.err(line, format!("expected header `{MATRIX_HEADER}`")));
    }
    let (line, dims) = lines.expect("`<rows> <cols>`")?;
    let mut t = dims.split_whitespace();
    let rows: usize = lines.number(line, t.next(), "row count")?;
    let cols: usize = lines.number(line, t.next(), "column count")?;
    if t.next().is_some() {
        return Err(lines.err(line, "unexpected tokens after column count"));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let (line, row) = lines.expect("a matrix row")?;
        let before = data.len();
        for token in row.split_whitespace() {
            data.push(lines.real(line, token)?);
        }
        if data.len() - before != cols {
            return Err(lines.err(line, format!("expected {cols} values, found {}", data.len() - before)));
        }
    }
    lines.finish()?;
    Ok(Array2::from_shape_vec((rows, cols), data).expect("shape checked row by row"))
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    Ok(fs::write(path, format_matrix(m))?)
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    parse_matrix(&read_file(path)?, &source_of(path))
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    FeatureMatrix::new(read_matrix(path)?)
}

// ---- labels

pub fn format_labels(labels: &LabelVector) -> String {
    let mut out = String::new();
    for (v, l) in labels.labeled() {
        writeln!(out, "{v} {l}").unwrap();
    }
    out
}

/// Labels for an `n`-node graph; nodes without a line stay unknown.
pub fn parse_labels(text: &str, source: &str, n: usize) -> Result<LabelVector> {
    let mut lines = Lines::new(text, source);
    let mut labels: Vec<Option<u8>> = vec![None; n];
    while let Some((line, entry)) = lines.next() {
        let mut t = entry.split_whitespace();
        let v: usize = lines.number(line, t.next(), "node index")?;
        let l: u8 = lines.number(line, t.next(), "label")?;
        if t.next().is_some() {
            return Err(lines.err(line, "a label line holds `<node> <label>`"));
        }
        if v >= n {
            return Err(lines.err(line, format!("node {v} out of range for {n} nodes")));
        }
        if l > 1 {
            return Err(lines.err(line, format!("label must be 0 or 1, got {l}")));
        }
        if labels[v].is_some() {
            return Err(lines.err(line, format!("duplicate label for node {v}")));
        }
        labels[v] = Some(l);
    }
    LabelVector::new(labels)
}

pub fn write_labels(path: &Path, labels: &LabelVector) -> Result<()> {
    Ok(fs::write(path, format_labels(labels))?)
}

pub fn read_labels(path: &Path, n: usize) -> Result<LabelVector> {
    parse_labels(&read_file(path)?, &source_of(path), n)
}

// ---- key = value files

fn format_entries(entries: &[(&str, String)]) -> String {
    entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

fn parse_entries(
    lines: &mut Lines<'_>,
    stop: Option<&str>,
    mut set: impl FnMut(&str, &str) -> std::result::Result<(), String>,
) -> Result<()> {
    loop {
        let Some((line, entry)) = lines.next() else {
            return match stop {
                Some(s) => Err(lines.err(lines.last + 1, format!("unexpected end of file, expected `{s}`"))),
                None => Ok(()),
            };
        };
        if Some(entry) == stop {
            return Ok(());
        }
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| lines.err(line, "expected `key = value`"))?;
        set(key.trim(), value.trim()).map_err(|m| lines.err(line, m))?;
    }
}

pub fn format_config(cfg: &TrainConfig) -> String {
    format_entries(&cfg.entries())
}

/// Applies every `key = value` line of `text` on top of `base`.
pub fn parse_config(text: &str, source: &str, base: TrainConfig) -> Result<TrainConfig> {
    let mut cfg = base;
    let mut lines = Lines::new(text, source);
    parse_entries(&mut lines, None, |k, v| cfg.set(k, v))?;
    Ok(cfg)
}

pub fn read_config(path: &Path, base: TrainConfig) -> Result<TrainConfig> {
    parse_config(&read_file(path)?, &source_of(path), base)
}

pub fn format_spec(spec: &CamouflageSpec) -> String {
    format_entries(&spec.entries())
}

pub fn parse_spec(text: &str, source: &str) -> Result<CamouflageSpec> {
    let mut spec = CamouflageSpec::default();
    let mut lines = Lines::new(text, source);
    parse_entries(&mut lines, None, |k, v| spec.set(k, v))?;
    Ok(spec)
}

pub fn read_spec(path: &Path) -> Result<CamouflageSpec> {
    parse_spec(&read_file(path)?, &source_of(path))
}

// ---- checkpoints

pub fn format_checkpoint(ckpt: &Checkpoint) -> String {
    let mut out = String::new();
    writeln!(out, "{CHECKPOINT_HEADER}").unwrap();
    out.push_str("config\n");
    out.push_str(&format_config(&ckpt.config));
    out.push_str("end\n");
    writeln!(out, "model in_dim {} relations {}", ckpt.model.in_dim, ckpt.model.relations).unwrap();
    match &ckpt.best {
        None => out.push_str("best none\n"),
        Some(b) => {
            let v = &b.val;
            let c = &v.confusion;
            writeln!(
                out,
                "best epoch {} auc {:?} f1_macro {:?} gmean {:?} threshold {:?} tp {} fp {} tn {} fn {}",
                b.epoch, v.auc, v.f1_macro, v.gmean, v.threshold, c.tp, c.fp, c.tn, c.fn_
            )
            .unwrap();
        }
    }
    let tensors = ckpt.params.tensors();
    writeln!(out, "tensors {}", tensors.len()).unwrap();
    for t in tensors {
        let shape: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
        writeln!(out, "tensor {} {}", t.name, shape.join("x")).unwrap();
        let values: Vec<String> = t.values.iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&values.join(" "));
        out.push('\n');
    }
    out
}

fn parse_best(lines: &Lines<'_>, line: usize, text: &str) -> Result<Option<BestRecord>> {
    let t: Vec<&str> = text.split_whitespace().collect();
    if t == ["best", "none"] {
        return Ok(None);
    }
    let keys = ["best", "epoch", "auc", "f1_macro", "gmean", "threshold", "tp", "fp", "tn", "fn"];
    if t.len() != 2 * keys.len() - 1 || t[0] != "best" || (1..keys.len()).any(|i| t[2 * i - 1] != keys[i]) {
        return Err(lines.err(line, "malformed `best` record"));
    }
    let value = |i: usize| t[2 * i];
    let count = |i: usize| lines.number::<usize>(line, Some(value(i)), keys[i]);
    Ok(Some(BestRecord {
        epoch: count(1)?,
        val: EvalResult {
            auc: lines.real(line, value(2))?,
            f1_macro: lines.real(line, value(3))?,
            gmean: lines.real(line, value(4))?,
            threshold: lines.real(line, value(5))?,
            confusion: Confusion {
                tp: count(6)?,
                fp: count(7)?,
                tn: count(8)?,
                fn_: count(9)?,
            },
        },
    }))
}

pub fn parse_checkpoint(text: &str, source: &str) -> Result<Checkpoint> {
    let mut lines = Lines::new(text, source);
    let (line, header) = lines.expect("header")?;
    if header != CHECKPOINT_HEADER {
        return Err(lines.err(line, format!("expected header `{CHECKPOINT_HEADER}`")));
    }
    let (line, section) = lines.expect("`config`")?;
    if section != "config" {
        return Err(lines.err(line, "expected `config`"));
    }
    let mut config = TrainConfig::default();
    parse_entries(&mut lines, Some("end"), |k, v| config.set(k, v))?;

    let (line, model) = lines.expect("`model in_dim <d> relations <R>`")?;
    let mut t = model.split_whitespace();
    lines.keyword(line, t.next(), "model")?;
    lines.keyword(line, t.next(), "in_dim")?;
    let in_dim: usize = lines.number(line, t.next(), "input dimension")?;
    lines.keyword(line, t.next(), "relations")?;
    let relations: usize = lines.number(line, t.next(), "relation count")?;
    let model = config.model_config(in_dim, relations);
    model
        .validate()
        .map_err(|e| lines.err(line, e.to_string()))?;

    let (line, best) = lines.expect("`best` record")?;
    let best = parse_best(&lines, line, best)?;

    let mut params = ModelParams::init(&model, 0)?;
    let expected: Vec<(String, Vec<usize>)> = params
        .tensors()
        .into_iter()
        .map(|t| (t.name, t.shape))
        .collect();
    let (line, count) = lines.expect("`tensors <count>`")?;
    let mut t = count.split_whitespace();
    lines.keyword(line, t.next(), "tensors")?;
    let count: usize = lines.number(line, t.next(), "tensor count")?;
    if count != expected.len() {
        return Err(lines.err(line, format!("expected {} tensors, found {count}", expected.len())));
    }
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(count);
    for (name, shape) in &expected {
        let (line, head) = lines.expect("`tensor <name> <shape>`")?;
        let shape_text: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
        let want = format!("tensor {name} {}", shape_text.join("x"));
        if head.split_whitespace().collect::<Vec<_>>().join(" ") != want {
            return Err(lines.err(line, format!("expected `{want}`")));
        }
        let size: usize = shape.iter().product();
        let (line, body) = if size == 0 {
            (line, "")
        } else {
            lines.expect("tensor values")?
        };
        let v = body
            .split_whitespace()
            .map(|tok| lines.real(line, tok))
            .collect::<Result<Vec<f64>>>()?;
        if v.len() != size {
            return Err(lines.err(line, format!("tensor `{name}` needs {size} values, found {}", v.len())));
        }
        values.push(v);
    }
    lines.finish()?;
    let mut it = values.into_iter();
    params.for_each_mut(|_, dst| dst.copy_from_slice(&it.next().expect("one value list per tensor")));
    Ok(Checkpoint {
        config,
        model,
        params,
        best,
    })
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    Ok(fs::write(path, format_checkpoint(ckpt))?)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    parse_checkpoint(&read_file(path)?, &source_of(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn parse_err(r: Result<impl std::fmt::Debug>) -> (usize, String) {
        match r.unwrap_err() {
            Error::Parse { line, message, .. } => (line, message),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn graph_round_trip() {
        let text = "HOGRL-GRAPH 1\nnodes 4 relations 2\nrelation a 3\n0 1\n1 2\n2 3\nrelation b 1\n3 0\n";
        let g = parse_graph(text, "g").unwrap();
        assert_eq!(g.names(), ["a", "b"]);
        assert_eq!(g.relations()[1].neighbors(0), [3]);
        let canonical = format_graph(&g);
        assert_eq!(format_graph(&parse_graph(&canonical, "g").unwrap()), canonical);
    }

    #[test]
    fn graph_diagnostics_name_the_line() {
        assert_eq!(parse_err(parse_graph("HOGRL-GRAPH 2\n", "g")).0, 1);
        let text = "HOGRL-GRAPH 1\nnodes 3 relations 1\nrelation a 2\n0 1\n1 7\n";
        let (line, msg) = parse_err(parse_graph(text, "g"));
        assert_eq!(line, 5);
        assert!(msg.contains("out of range"), "{msg}");
        let short = "HOGRL-GRAPH 1\nnodes 3 relations 1\nrelation a 2\n0 1\n";
        assert_eq!(parse_err(parse_graph(short, "g")).0, 5);
        let err = parse_graph("bad", "file.txt").unwrap_err();
        assert!(err.to_string().starts_with("file.txt:1:"));
    }

    #[test]
    fn matrix_round_trip_is_exact() {
        let m = array![[0.1 + 0.2, -1e-300, 3.0], [f64::MIN_POSITIVE, 1.0 / 3.0, -0.0]];
        let text = format_matrix(&m);
        let back = parse_matrix(&text, "m").unwrap();
        for (a, b) in m.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(format_matrix(&back), text);
    }

    #[test]
    fn matrix_errors() {
        let (line, _) = parse_err(parse_matrix("HOGRL-MATRIX 1\n2 2\n1 2\n3\n", "m"));
        assert_eq!(line, 4);
        let (line, _) = parse_err(parse_matrix("HOGRL-MATRIX 1\n1 1\nNaN\n", "m"));
        assert_eq!(line, 3);
        assert!(parse_matrix("HOGRL-MATRIX 1\n1 1\n1\n2\n", "m").is_err());
    }

    #[test]
    fn labels_round_trip_and_errors() {
        let labels = parse_labels("3 1\n0 0\n", "l", 5).unwrap();
        assert_eq!(labels.as_slice(), [Some(0), None, None, Some(1), None]);
        let text = format_labels(&labels);
        assert_eq!(text, "0 0\n3 1\n");
        assert_eq!(format_labels(&parse_labels(&text, "l", 5).unwrap()), text);

        assert_eq!(parse_err(parse_labels("0 1\n0 0\n", "l", 2)).0, 2);
        assert_eq!(parse_err(parse_labels("0 2\n", "l", 2)).0, 1);
        assert_eq!(parse_err(parse_labels("\n5 1\n", "l", 2)).0, 2);
    }

    #[test]
    fn config_overrides_defaults() {
        let cfg = parse_config("# run\nlr = 0.01\nbatch_size = full\n", "c", TrainConfig::default()).unwrap();
        assert_eq!(cfg.lr, 0.01);
        assert_eq!(cfg.epochs, 1000);
        let text = format_config(&cfg);
        assert_eq!(format_config(&parse_config(&text, "c", TrainConfig::default()).unwrap()), text);
        let (line, msg) = parse_err(parse_config("lr = 1\nlayers = many\n", "c", TrainConfig::default()));
        assert_eq!(line, 2);
        assert!(msg.contains("layers"));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let config = TrainConfig {
            layers: 2,
            hidden_dim: 3,
            head_hidden: vec![2],
            ..TrainConfig::default()
        };
        let model = config.model_config(4, 2);
        let params = ModelParams::init(&model, 5).unwrap();
        let ckpt = Checkpoint {
            config,
            model,
            params,
            best: Some(BestRecord {
                epoch: 9,
                val: EvalResult {
                    auc: 0.1 + 0.7,
                    f1_macro: 0.5,
                    gmean: 0.5f64.sqrt(),
                    threshold: 0.5,
                    confusion: Confusion { tp: 1, fp: 2, tn: 3, fn_: 4 },
                },
            }),
        };
        let text = format_checkpoint(&ckpt);
        let back = parse_checkpoint(&text, "ck").unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(format_checkpoint(&back), text);

        let none = Checkpoint { best: None, ..ckpt };
        assert_eq!(parse_checkpoint(&format_checkpoint(&none), "ck").unwrap(), none);
    }

    #[test]
    fn checkpoint_shape_mismatch_is_reported() {
        let config = TrainConfig { layers: 1, hidden_dim: 2, head_hidden: vec![], ..TrainConfig::default() };
        let model = config.model_config(2, 1);
        let ckpt = Checkpoint { config, model: model.clone(), params: ModelParams::init(&model, 0).unwrap(), best: None };
        let text = format_checkpoint(&ckpt).replace("tensor rel0.expert1 2x2", "tensor rel0.expert1 2x3");
        let (_, msg) = parse_err(parse_checkpoint(&text, "ck"));
        assert!(msg.contains("rel0.expert1"), "{msg}");
    }
}
