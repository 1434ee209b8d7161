//! Data files and synthetic graph generation.
//!
//! Graphs load from four plain-text files — edge list, feature matrix,
//! labels, and train/test split — all 0-indexed and whitespace-tolerant.
//! Attack results and model weights persist in a stricter tab-separated
//! format whose first line is the version tag [`FORMAT_VERSION`]; floats
//! are written with Rust's shortest round-trip formatting, so a load
//! reproduces every value bit for bit.
//!
//! [`generate_sbm`] samples benchmark graphs from a stochastic block
//! model: blocks double as class labels, edges appear with probability
//! `p_in` inside a block and `p_out` across blocks, and node features are
//! Gaussian around a per-class mean whose spread is set by
//! `feature_signal`. Splits are stratified per block: 10% of each block
//! trains, 50% tests, the rest is unused.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::attack::{AttackResult, Metrics};
use crate::error::{Error, Result};
use crate::gcn::GcnModel;
use crate::graph::{pair_count, sym_index, sym_pair, Graph, PerturbationVector, Split};
use crate::seed;

/// Version tag on the first line of every file this crate writes.
pub const FORMAT_VERSION: &str = "topoguard/v1";

/// Fraction of each block assigned to training.
const TRAIN_FRACTION: f64 = 0.10;
/// Fraction of each block held out for testing.
const TEST_FRACTION: f64 = 0.50;
/// Extra sampling attempts when a parameter setting yields no edges.
const MAX_REGENERATION_ATTEMPTS: u64 = 10;

/// Stochastic block model parameters.
#[derive(Debug, Clone)]
pub struct SbmSpec {
    /// Number of blocks; each block is one class.
    pub blocks: usize,
    /// Nodes per block.
    pub nodes_per_block: usize,
    /// Edge probability inside a block.
    pub p_in: f64,
    /// Edge probability across blocks; must stay below `p_in`.
    pub p_out: f64,
    /// Feature dimension.
    pub feature_dim: usize,
    /// Scale of the per-class feature means relative to the unit node
    /// noise; larger values make classes easier to separate from features
    /// alone.
    pub feature_signal: f64,
    /// Seed driving edges, features, and the split.
    pub seed: u64,
}

impl Default for SbmSpec {
    fn default() -> Self {
        Self {
            blocks: 2,
            nodes_per_block: 50,
            p_in: 0.20,
            p_out: 0.02,
            feature_dim: 16,
            feature_signal: 0.8,
            seed: 0,
        }
    }
}

impl SbmSpec {
    fn validate(&self) -> Result<()> {
        if self.blocks < 2 {
            return Err(Error::Config(format!(
                "block model needs at least 2 blocks, got {}",
                self.blocks
            )));
        }
        if self.nodes_per_block < 2 {
            return Err(Error::Config(format!(
                "each block needs at least 2 nodes for a train/test split, got {}",
                self.nodes_per_block
            )));
        }
        if !(self.p_in.is_finite() && self.p_out.is_finite())
            || !(0.0..=1.0).contains(&self.p_in)
            || !(0.0..=1.0).contains(&self.p_out)
            || self.p_out >= self.p_in
        {
            return Err(Error::Config(format!(
                "edge probabilities must satisfy 0 <= p_out < p_in <= 1, got p_in = {}, p_out = {}",
                self.p_in, self.p_out
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        if !(self.feature_signal.is_finite() && self.feature_signal >= 0.0) {
            return Err(Error::Config(format!(
                "feature signal {} must be non-negative",
                self.feature_signal
            )));
        }
        Ok(())
    }
}

/// Samples a labelled, attributed graph from the block model.
///
/// Deterministic per seed. If a draw produces an empty edge set (possible
/// for very sparse settings) the edges are resampled with a warning, up to
/// ten extra attempts, after which the parameters are rejected.
pub fn generate_sbm(spec: &SbmSpec) -> Result<Graph> {
    spec.validate()?;
    let n = spec.blocks * spec.nodes_per_block;
    let labels: Vec<usize> = (0..n).map(|i| i / spec.nodes_per_block).collect();

    let mut adjacency = Array2::zeros((n, n));
    let mut edges = 0usize;
    for attempt in 0..=MAX_REGENERATION_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(
            spec.seed.wrapping_add(attempt),
            seed::STREAM_SBM_EDGES,
        ));
        adjacency.fill(0.0);
        edges = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let p = if labels[i] == labels[j] {
                    spec.p_in
                } else {
                    spec.p_out
                };
                if rng.random::<f64>() < p {
                    adjacency[[i, j]] = 1.0;
                    adjacency[[j, i]] = 1.0;
                    edges += 1;
                }
            }
        }
        if edges > 0 {
            break;
        }
        eprintln!(
            "warning: block model draw {attempt} produced no edges; resampling"
        );
    }
    if edges == 0 {
        return Err(Error::Config(format!(
            "block model produced no edges in {} attempts; raise p_in or p_out",
            MAX_REGENERATION_ATTEMPTS + 1
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(spec.seed, seed::STREAM_SBM_FEATURES));
    let mut means = Array2::zeros((spec.blocks, spec.feature_dim));
    for c in 0..spec.blocks {
        for d in 0..spec.feature_dim {
            let g: f64 = rng.sample(StandardNormal);
            means[[c, d]] = spec.feature_signal * g;
        }
    }
    let mut features = Array2::zeros((n, spec.feature_dim));
    for i in 0..n {
        for d in 0..spec.feature_dim {
            let g: f64 = rng.sample(StandardNormal);
            features[[i, d]] = means[[labels[i], d]] + g;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(spec.seed, seed::STREAM_SPLIT));
    let mut split = vec![Split::None; n];
    for block in 0..spec.blocks {
        let mut nodes: Vec<usize> =
            (block * spec.nodes_per_block..(block + 1) * spec.nodes_per_block).collect();
        seed::shuffle(&mut nodes, &mut rng);
        let m = spec.nodes_per_block as f64;
        let train = ((m * TRAIN_FRACTION).round() as usize).max(1);
        let test = ((m * TEST_FRACTION).round() as usize)
            .max(1)
            .min(spec.nodes_per_block - train);
        for &node in nodes.iter().take(train) {
            split[node] = Split::Train;
        }
        for &node in nodes.iter().skip(train).take(test) {
            split[node] = Split::Test;
        }
    }

    Graph::new(adjacency, features, labels, spec.blocks, split)
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path_str(path), e))
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path_str(path), e))
}

/// Loads a graph from its four constituent files.
///
/// * `features`: a `N M0` header line, then `N` rows of `M0` numbers;
/// * `edges`: one `i j` pair per line, 0-indexed, no self-loops or
///   duplicates (in either orientation);
/// * `labels`: one `node class` pair per line, exactly one per node; the
///   class count is the largest label plus one;
/// * `split`: one `node train|test|none` pair per line, at most one per
///   node; unmentioned nodes are `none`.
///
/// Blank lines are ignored everywhere; fields split on any whitespace.
pub fn load_graph(
    edge_path: impl AsRef<Path>,
    feature_path: impl AsRef<Path>,
    label_path: impl AsRef<Path>,
    split_path: impl AsRef<Path>,
) -> Result<Graph> {
    let feature_path = feature_path.as_ref();
    let features = parse_features(&read_file(feature_path)?, &path_str(feature_path))?;
    let n = features.nrows();

    let edge_path = edge_path.as_ref();
    let adjacency = parse_edges(&read_file(edge_path)?, &path_str(edge_path), n)?;

    let label_path = label_path.as_ref();
    let labels = parse_labels(&read_file(label_path)?, &path_str(label_path), n)?;
    let num_classes = labels.iter().copied().max().unwrap_or(0) + 1;

    let split_path = split_path.as_ref();
    let split = parse_split(&read_file(split_path)?, &path_str(split_path), n)?;

    Graph::new(adjacency, features, labels, num_classes, split)
}

fn content_lines(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.trim()))
        .filter(|(_, line)| !line.is_empty())
}

fn parse_features(content: &str, path: &str) -> Result<Array2<f64>> {
    let mut lines = content_lines(content);
    let (line_no, header) = lines
        .next()
        .ok_or_else(|| Error::format(path, 0, "missing `N M0` header"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|f| {
            f.parse::<usize>()
                .map_err(|_| Error::format(path, line_no, format!("bad header field `{f}`")))
        })
        .collect::<Result<_>>()?;
    let [n, m0] = dims[..] else {
        return Err(Error::format(
            path,
            line_no,
            "header must hold exactly two numbers: nodes and feature dimension",
        ));
    };
    if n == 0 || m0 == 0 {
        return Err(Error::format(path, line_no, "node and feature counts must be positive"));
    }
    let mut features = Array2::zeros((n, m0));
    for row in 0..n {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| Error::format(path, 0, format!("expected {n} feature rows")))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != m0 {
            return Err(Error::format(
                path,
                line_no,
                format!("expected {m0} values, found {}", fields.len()),
            ));
        }
        for (col, field) in fields.iter().enumerate() {
            features[[row, col]] = field.parse::<f64>().map_err(|_| {
                Error::format(path, line_no, format!("bad feature value `{field}`"))
            })?;
        }
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(Error::format(path, line_no, "trailing content after feature rows"));
    }
    Ok(features)
}

fn parse_node_field(field: &str, n: usize, path: &str, line_no: usize) -> Result<usize> {
    let node = field
        .parse::<usize>()
        .map_err(|_| Error::format(path, line_no, format!("bad node id `{field}`")))?;
    if node >= n {
        return Err(Error::format(
            path,
            line_no,
            format!("node {node} out of range for {n} nodes"),
        ));
    }
    Ok(node)
}

fn parse_edges(content: &str, path: &str, n: usize) -> Result<Array2<f64>> {
    let mut adjacency = Array2::zeros((n, n));
    for (line_no, line) in content_lines(content) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [a, b] = fields[..] else {
            return Err(Error::format(path, line_no, "expected `i j`"));
        };
        let i = parse_node_field(a, n, path, line_no)?;
        let j = parse_node_field(b, n, path, line_no)?;
        if i == j {
            return Err(Error::format(path, line_no, format!("self-loop at node {i}")));
        }
        if adjacency[[i, j]] != 0.0 {
            return Err(Error::format(
                path,
                line_no,
                format!("duplicate edge between {i} and {j}"),
            ));
        }
        adjacency[[i, j]] = 1.0;
        adjacency[[j, i]] = 1.0;
    }
    Ok(adjacency)
}

fn parse_labels(content: &str, path: &str, n: usize) -> Result<Vec<usize>> {
    let mut labels = vec![usize::MAX; n];
    for (line_no, line) in content_lines(content) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [a, b] = fields[..] else {
            return Err(Error::format(path, line_no, "expected `node class`"));
        };
        let node = parse_node_field(a, n, path, line_no)?;
        if labels[node] != usize::MAX {
            return Err(Error::format(
                path,
                line_no,
                format!("node {node} labelled twice"),
            ));
        }
        labels[node] = b
            .parse::<usize>()
            .map_err(|_| Error::format(path, line_no, format!("bad class `{b}`")))?;
    }
    if let Some(node) = labels.iter().position(|&l| l == usize::MAX) {
        return Err(Error::format(path, 0, format!("node {node} has no label")));
    }
    Ok(labels)
}

fn parse_split(content: &str, path: &str, n: usize) -> Result<Vec<Split>> {
    let mut split = vec![Split::None; n];
    let mut assigned = vec![false; n];
    for (line_no, line) in content_lines(content) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [a, b] = fields[..] else {
            return Err(Error::format(path, line_no, "expected `node train|test|none`"));
        };
        let node = parse_node_field(a, n, path, line_no)?;
        if assigned[node] {
            return Err(Error::format(
                path,
                line_no,
                format!("node {node} assigned twice"),
            ));
        }
        assigned[node] = true;
        split[node] = match b {
            "train" => Split::Train,
            "test" => Split::Test,
            "none" => Split::None,
            other => {
                return Err(Error::format(
                    path,
                    line_no,
                    format!("unknown split `{other}` (expected train, test, or none)"),
                ))
            }
        };
    }
    Ok(split)
}

/// Writes a graph as the four files [`load_graph`] reads, into `dir` with
/// fixed names `edges.tsv`, `features.tsv`, `labels.tsv`, `split.tsv`.
pub fn save_graph_files(graph: &Graph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(path_str(dir), e))?;
    let n = graph.num_nodes();

    let mut edges = String::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if graph.adjacency()[[i, j]] != 0.0 {
                edges.push_str(&format!("{i}\t{j}\n"));
            }
        }
    }
    write_file(&dir.join("edges.tsv"), &edges)?;

    let mut features = format!("{n}\t{}\n", graph.features().ncols());
    for row in graph.features().rows() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        features.push_str(&fields.join("\t"));
        features.push('\n');
    }
    write_file(&dir.join("features.tsv"), &features)?;

    let mut labels = String::new();
    for (node, &label) in graph.labels().iter().enumerate() {
        labels.push_str(&format!("{node}\t{label}\n"));
    }
    write_file(&dir.join("labels.tsv"), &labels)?;

    let mut split = String::new();
    for (node, &s) in graph.split().iter().enumerate() {
        let tag = match s {
            Split::Train => "train",
            Split::Test => "test",
            Split::None => "none",
        };
        split.push_str(&format!("{node}\t{tag}\n"));
    }
    write_file(&dir.join("split.tsv"), &split)
}

/// Strict line cursor for the versioned tab-separated files.
struct Reader<'a> {
    path: String,
    lines: Vec<&'a str>,
    cursor: usize,
}

impl<'a> Reader<'a> {
    fn new(path: String, content: &'a str) -> Self {
        Self {
            path,
            lines: content.lines().collect(),
            cursor: 0,
        }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        if self.cursor < self.lines.len() {
            self.cursor += 1;
            Ok((self.cursor, self.lines[self.cursor - 1]))
        } else {
            Err(Error::format(
                &self.path,
                self.lines.len(),
                "unexpected end of file",
            ))
        }
    }

    fn expect(&mut self, literal: &str) -> Result<()> {
        let (line_no, line) = self.next()?;
        if line != literal {
            return Err(Error::format(
                &self.path,
                line_no,
                format!("expected `{literal}`, found `{line}`"),
            ));
        }
        Ok(())
    }

    /// Reads a line of the form `key\tv1\tv2...` and returns the values.
    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (line_no, line) = self.next()?;
        let mut fields = line.split('\t');
        let found = fields.next().unwrap_or("");
        if found != key {
            return Err(Error::format(
                &self.path,
                line_no,
                format!("expected `{key}`, found `{found}`"),
            ));
        }
        Ok((line_no, fields.collect()))
    }

    fn keyed_count(&mut self, key: &str) -> Result<usize> {
        let (line_no, fields) = self.keyed(key)?;
        let [field] = fields[..] else {
            return Err(Error::format(&self.path, line_no, format!("`{key}` needs one value")));
        };
        field
            .parse::<usize>()
            .map_err(|_| Error::format(&self.path, line_no, format!("bad count `{field}`")))
    }

    fn keyed_f64(&mut self, key: &str) -> Result<f64> {
        let (line_no, fields) = self.keyed(key)?;
        let [field] = fields[..] else {
            return Err(Error::format(&self.path, line_no, format!("`{key}` needs one value")));
        };
        field
            .parse::<f64>()
            .map_err(|_| Error::format(&self.path, line_no, format!("bad number `{field}`")))
    }

    fn bare_f64(&mut self) -> Result<f64> {
        let (line_no, line) = self.next()?;
        line.parse::<f64>()
            .map_err(|_| Error::format(&self.path, line_no, format!("bad number `{line}`")))
    }

    fn check_version(&mut self) -> Result<()> {
        let (line_no, line) = self.next()?;
        if line != FORMAT_VERSION {
            return Err(Error::format(
                &self.path,
                line_no,
                format!("unsupported format version `{line}` (expected `{FORMAT_VERSION}`)"),
            ));
        }
        Ok(())
    }

    fn check_kind(&mut self, kind: &str) -> Result<()> {
        let (line_no, fields) = self.keyed("kind")?;
        if fields != [kind] {
            return Err(Error::format(
                &self.path,
                line_no,
                format!("file holds `{}`, not `{kind}`", fields.join(" ")),
            ));
        }
        Ok(())
    }
}

/// Strips characters that would break the line-oriented format.
fn sanitize_note(note: &str) -> String {
    note.replace(['\n', '\t'], " ")
}

/// Persists model weights; [`load_model`] restores them bit for bit.
pub fn save_model(model: &GcnModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(FORMAT_VERSION);
    out.push('\n');
    out.push_str("kind\tmodel\n");
    out.push_str(&format!(
        "dims\t{}\t{}\t{}\n",
        model.input_dim(),
        model.hidden_width(),
        model.num_classes()
    ));
    for (name, matrix) in [("w0", &model.w0), ("w1", &model.w1)] {
        out.push_str(name);
        out.push('\n');
        for row in matrix.rows() {
            let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&fields.join("\t"));
            out.push('\n');
        }
    }
    out.push_str("end\n");
    write_file(path, &out)
}

fn read_matrix(reader: &mut Reader, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let mut matrix = Array2::zeros((rows, cols));
    for row in 0..rows {
        let (line_no, line) = reader.next()?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != cols {
            return Err(Error::format(
                &reader.path,
                line_no,
                format!("expected {cols} values, found {}", fields.len()),
            ));
        }
        for (col, field) in fields.iter().enumerate() {
            matrix[[row, col]] = field.parse::<f64>().map_err(|_| {
                Error::format(&reader.path, line_no, format!("bad weight `{field}`"))
            })?;
        }
    }
    Ok(matrix)
}

/// Loads model weights written by [`save_model`].
pub fn load_model(path: impl AsRef<Path>) -> Result<GcnModel> {
    let path = path.as_ref();
    let content = read_file(path)?;
    let mut reader = Reader::new(path_str(path), &content);
    reader.check_version()?;
    reader.check_kind("model")?;
    let (line_no, fields) = reader.keyed("dims")?;
    let dims: Vec<usize> = fields
        .iter()
        .map(|f| {
            f.parse::<usize>()
                .map_err(|_| Error::format(&reader.path, line_no, format!("bad dimension `{f}`")))
        })
        .collect::<Result<_>>()?;
    let [input, hidden, classes] = dims[..] else {
        return Err(Error::format(
            &reader.path,
            line_no,
            "`dims` needs input, hidden, and class counts",
        ));
    };
    reader.expect("w0")?;
    let w0 = read_matrix(&mut reader, input, hidden)?;
    reader.expect("w1")?;
    let w1 = read_matrix(&mut reader, hidden, classes)?;
    reader.expect("end")?;
    GcnModel::from_weights(w0, w1)
}

/// Persists an attack result; [`load_attack_result`] restores it bit for
/// bit. Edge toggles are tagged `add`/`remove` relative to the perturbed
/// adjacency for human readers.
pub fn save_attack_result(result: &AttackResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n = result.a_prime.nrows();
    let mut out = String::new();
    out.push_str(FORMAT_VERSION);
    out.push('\n');
    out.push_str("kind\tattack-result\n");
    out.push_str(&format!("nodes\t{n}\n"));
    out.push_str(&format!("clean\t{}\n", result.metrics.clean));
    out.push_str(&format!("attacked\t{}\n", result.metrics.attacked));

    out.push_str(&format!("notes\t{}\n", result.notes.len()));
    for note in &result.notes {
        out.push_str(&format!("note\t{}\n", sanitize_note(note)));
    }

    let toggles: Vec<usize> = result
        .s_binary
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(k, _)| k)
        .collect();
    out.push_str(&format!("toggles\t{}\n", toggles.len()));
    for k in toggles {
        let (i, j) = sym_pair(k, n)?;
        let action = if result.a_prime[[i, j]] != 0.0 {
            "add"
        } else {
            "remove"
        };
        out.push_str(&format!("toggle\t{i}\t{j}\t{action}\n"));
    }

    out.push_str(&format!("s_relaxed\t{}\n", result.s_relaxed.len()));
    for v in result.s_relaxed.values() {
        out.push_str(&format!("{v}\n"));
    }

    out.push_str(&format!("trace\t{}\n", result.loss_trace.len()));
    for v in &result.loss_trace {
        out.push_str(&format!("{v}\n"));
    }

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if result.a_prime[[i, j]] != 0.0 {
                edges.push((i, j));
            }
        }
    }
    out.push_str(&format!("a_prime\t{}\n", edges.len()));
    for (i, j) in edges {
        out.push_str(&format!("edge\t{i}\t{j}\n"));
    }
    out.push_str("end\n");
    write_file(path, &out)
}

/// Loads an attack result written by [`save_attack_result`].
pub fn load_attack_result(path: impl AsRef<Path>) -> Result<AttackResult> {
    let path = path.as_ref();
    let content = read_file(path)?;
    let mut reader = Reader::new(path_str(path), &content);
    reader.check_version()?;
    reader.check_kind("attack-result")?;
    let n = reader.keyed_count("nodes")?;
    let pairs = pair_count(n);
    let clean = reader.keyed_f64("clean")?;
    let attacked = reader.keyed_f64("attacked")?;

    let note_count = reader.keyed_count("notes")?;
    let mut notes = Vec::with_capacity(note_count);
    for _ in 0..note_count {
        let (_, fields) = reader.keyed("note")?;
        notes.push(fields.join("\t"));
    }

    let toggle_count = reader.keyed_count("toggles")?;
    let mut binary = Array1::zeros(pairs);
    for _ in 0..toggle_count {
        let (line_no, fields) = reader.keyed("toggle")?;
        let [a, b, action] = fields[..] else {
            return Err(Error::format(&reader.path, line_no, "expected `toggle i j action`"));
        };
        if action != "add" && action != "remove" {
            return Err(Error::format(
                &reader.path,
                line_no,
                format!("unknown toggle action `{action}`"),
            ));
        }
        let i = parse_node_field(a, n, &reader.path, line_no)?;
        let j = parse_node_field(b, n, &reader.path, line_no)?;
        let k = sym_index(i.min(j), i.max(j), n)
            .map_err(|e| Error::format(&reader.path, line_no, e.to_string()))?;
        binary[k] = 1.0;
    }

    let relaxed_len = reader.keyed_count("s_relaxed")?;
    if relaxed_len != pairs {
        return Err(Error::format(
            &reader.path,
            0,
            format!("s_relaxed holds {relaxed_len} entries but {n} nodes need {pairs}"),
        ));
    }
    let mut relaxed = Array1::zeros(pairs);
    for k in 0..pairs {
        relaxed[k] = reader.bare_f64()?;
    }

    let trace_len = reader.keyed_count("trace")?;
    let mut loss_trace = Vec::with_capacity(trace_len);
    for _ in 0..trace_len {
        loss_trace.push(reader.bare_f64()?);
    }

    let edge_count = reader.keyed_count("a_prime")?;
    let mut a_prime = Array2::zeros((n, n));
    for _ in 0..edge_count {
        let (line_no, fields) = reader.keyed("edge")?;
        let [a, b] = fields[..] else {
            return Err(Error::format(&reader.path, line_no, "expected `edge i j`"));
        };
        let i = parse_node_field(a, n, &reader.path, line_no)?;
        let j = parse_node_field(b, n, &reader.path, line_no)?;
        a_prime[[i, j]] = 1.0;
        a_prime[[j, i]] = 1.0;
    }
    reader.expect("end")?;

    Ok(AttackResult {
        s_relaxed: PerturbationVector::relaxed(relaxed)?,
        s_binary: PerturbationVector::binary(binary)?,
        loss_trace,
        a_prime,
        metrics: Metrics { clean, attacked },
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    #[test]
    fn block_model_has_the_requested_shape_and_split() {
        let spec = SbmSpec::default();
        let graph = generate_sbm(&spec).unwrap();
        assert_eq!(graph.num_nodes(), 100);
        assert_eq!(graph.num_classes(), 2);
        assert_eq!(graph.features().ncols(), 16);
        // Stratified split: 5 train and 25 test nodes per 50-node block.
        for block in 0..2 {
            let range = block * 50..(block + 1) * 50;
            let train = graph
                .train_nodes()
                .iter()
                .filter(|&&v| range.contains(&v))
                .count();
            let test = graph
                .test_nodes()
                .iter()
                .filter(|&&v| range.contains(&v))
                .count();
            assert_eq!(train, 5, "block {block}");
            assert_eq!(test, 25, "block {block}");
        }
        // Labels follow blocks.
        assert!(graph.labels()[..50].iter().all(|&l| l == 0));
        assert!(graph.labels()[50..].iter().all(|&l| l == 1));
    }

    #[test]
    fn block_model_edge_count_matches_expectation() {
        // E[edges] = 2 * C(50,2) * 0.2 + 50*50 * 0.02 = 490 + 50 = 540,
        // with standard deviation ~21; allow five of those.
        for seed in 0..3 {
            let graph = generate_sbm(&SbmSpec {
                seed,
                ..SbmSpec::default()
            })
            .unwrap();
            let edges = graph.num_edges() as f64;
            assert!(
                (edges - 540.0).abs() < 105.0,
                "seed {seed}: {edges} edges is implausible"
            );
        }
    }

    #[test]
    fn block_model_is_deterministic_per_seed() {
        let a = generate_sbm(&SbmSpec::default()).unwrap();
        let b = generate_sbm(&SbmSpec::default()).unwrap();
        assert_eq!(a.adjacency(), b.adjacency());
        assert_eq!(a.features(), b.features());
        assert_eq!(a.split(), b.split());
        let c = generate_sbm(&SbmSpec {
            seed: 1,
            ..SbmSpec::default()
        })
        .unwrap();
        assert_ne!(a.adjacency(), c.adjacency());
    }

    #[test]
    fn block_model_rejects_bad_parameters() {
        let base = SbmSpec::default();
        assert!(generate_sbm(&SbmSpec { blocks: 1, ..base.clone() }).is_err());
        assert!(generate_sbm(&SbmSpec { nodes_per_block: 1, ..base.clone() }).is_err());
        assert!(generate_sbm(&SbmSpec { p_out: 0.3, ..base.clone() }).is_err());
        assert!(generate_sbm(&SbmSpec { p_in: 1.5, ..base.clone() }).is_err());
        assert!(generate_sbm(&SbmSpec { feature_dim: 0, ..base.clone() }).is_err());
        assert!(generate_sbm(&SbmSpec { feature_signal: -1.0, ..base }).is_err());
    }

    #[test]
    fn hopelessly_sparse_parameters_fail_after_retries() {
        let spec = SbmSpec {
            blocks: 2,
            nodes_per_block: 2,
            p_in: 1e-12,
            p_out: 0.0,
            ..SbmSpec::default()
        };
        let err = generate_sbm(&spec).unwrap_err();
        assert!(err.to_string().contains("no edges"));
    }

    #[test]
    fn graph_files_round_trip() {
        let graph = generate_sbm(&SbmSpec {
            nodes_per_block: 10,
            ..SbmSpec::default()
        })
        .unwrap();
        let dir = TempDir::new().unwrap();
        save_graph_files(&graph, dir.path()).unwrap();
        let loaded = load_graph(
            dir.path().join("edges.tsv"),
            dir.path().join("features.tsv"),
            dir.path().join("labels.tsv"),
            dir.path().join("split.tsv"),
        )
        .unwrap();
        assert_eq!(loaded.adjacency(), graph.adjacency());
        assert_eq!(loaded.features(), graph.features());
        assert_eq!(loaded.labels(), graph.labels());
        assert_eq!(loaded.split(), graph.split());
        assert_eq!(loaded.num_classes(), graph.num_classes());
    }

    #[test]
    fn graph_loader_reports_malformed_lines_with_positions() {
        let dir = TempDir::new().unwrap();
        let features = dir.path().join("features.tsv");
        fs::write(&features, "3\t2\n1 0\n0 1\n1 1\n").unwrap();
        let labels = dir.path().join("labels.tsv");
        fs::write(&labels, "0\t0\n1\t1\n2\t0\n").unwrap();
        let split = dir.path().join("split.tsv");
        fs::write(&split, "0\ttrain\n1\ttest\n").unwrap();

        // Self-loop on line 2.
        let edges = dir.path().join("edges.tsv");
        fs::write(&edges, "0\t1\n1\t1\n").unwrap();
        let err = load_graph(&edges, &features, &labels, &split).unwrap_err();
        assert!(err.to_string().contains("edges.tsv:2"), "{err}");
        assert!(err.to_string().contains("self-loop"), "{err}");

        // Duplicate edge in reversed orientation.
        fs::write(&edges, "0\t1\n1\t0\n").unwrap();
        let err = load_graph(&edges, &features, &labels, &split).unwrap_err();
        assert!(err.to_string().contains("duplicate edge"), "{err}");

        // Missing label.
        fs::write(&edges, "0\t1\n").unwrap();
        fs::write(&labels, "0\t0\n1\t1\n").unwrap();
        let err = load_graph(&edges, &features, &labels, &split).unwrap_err();
        assert!(err.to_string().contains("no label"), "{err}");

        // Unknown split tag.
        fs::write(&labels, "0\t0\n1\t1\n2\t0\n").unwrap();
        fs::write(&split, "0\tvalidation\n").unwrap();
        let err = load_graph(&edges, &features, &labels, &split).unwrap_err();
        assert!(err.to_string().contains("unknown split"), "{err}");
    }

    #[test]
    fn model_round_trips_bit_for_bit() {
        let model = GcnModel::glorot_init(7, 5, 3, 99).unwrap();
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("model.tsv");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.w0, model.w0);
        assert_eq!(loaded.w1, model.w1);
    }

    #[test]
    fn attack_result_round_trips_bit_for_bit() {
        let n = 5;
        let pairs = pair_count(n);
        let mut relaxed = Array1::zeros(pairs);
        relaxed[0] = 0.25;
        relaxed[3] = 1.0 / 3.0;
        let mut binary = Array1::zeros(pairs);
        binary[3] = 1.0;
        let mut a_prime = Array2::zeros((n, n));
        a_prime[[0, 4]] = 1.0;
        a_prime[[4, 0]] = 1.0;
        let result = AttackResult {
            s_relaxed: PerturbationVector::relaxed(relaxed).unwrap(),
            s_binary: PerturbationVector::binary(binary).unwrap(),
            loss_trace: vec![-0.1, -0.2, -1.0 / 3.0],
            a_prime,
            metrics: Metrics {
                clean: 0.2,
                attacked: 0.4,
            },
            notes: vec!["budget is zero: no edge can be toggled".to_string()],
        };

        let dir = TempDir::new().unwrap();
        let path = dir.path().join("result.tsv");
        save_attack_result(&result, &path).unwrap();
        let loaded = load_attack_result(&path).unwrap();
        assert_eq!(loaded.s_relaxed.values(), result.s_relaxed.values());
        assert_eq!(loaded.s_binary.values(), result.s_binary.values());
        assert_eq!(loaded.loss_trace, result.loss_trace);
        assert_eq!(loaded.a_prime, result.a_prime);
        assert_eq!(loaded.metrics.clean, result.metrics.clean);
        assert_eq!(loaded.metrics.attacked, result.metrics.attacked);
        assert_eq!(loaded.notes, result.notes);
    }

    #[test]
    fn version_and_kind_mismatches_are_format_errors() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("file.tsv");

        fs::write(&path, "topoguard/v2\nkind\tmodel\n").unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        assert!(err.to_string().contains("version"), "{err}");

        let model = GcnModel::glorot_init(2, 2, 2, 0).unwrap();
        save_model(&model, &path).unwrap();
        let err = load_attack_result(&path).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));

        let missing = dir.path().join("nope.tsv");
        let err = load_model(&missing).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert_eq!(err.exit_code(), 3);
    }
}
