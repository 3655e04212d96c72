//! File formats and the exit-code taxonomy.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 parse or IO error,
//! 3 dimension or index mismatch, 4 solver non-convergence, 5 invalid
//! model. Every error funnels through `CliError` so shell pipelines can
//! branch on the code.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use nflasso::estimator::EdgeRule;
use nflasso::linalg::DenseMatrix;
use nflasso::localgraph::LocalGraph;
use nflasso::theory::PrecisionModel;
use nflasso::Error;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self::new(2, message)
    }

    pub fn dimension(message: impl Into<String>) -> Self {
        Self::new(3, message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DimensionMismatch
            | Error::IndexOutOfRange
            | Error::ConstantColumn(_)
            | Error::EmptySet => 3,
            Error::NonConvergence { .. } => 4,
            Error::NotPositiveDefinite
            | Error::DomainError
            | Error::ConstraintViolation
            | Error::NonFinite => 5,
        };
        CliError::new(code, e.to_string())
    }
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))
}

/// Observation-rows CSV. A header line is detected by its first token
/// failing to parse as a number; everything after must be fully numeric
/// and rectangular. Non-finite values are rejected.
pub fn read_data_csv(path: &Path) -> Result<DenseMatrix, CliError> {
    let text = read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if rows.is_empty() && lineno == 0 && fields[0].parse::<f64>().is_err() {
            width = fields.len();
            continue; // header
        }
        let mut row = Vec::with_capacity(fields.len());
        for f in &fields {
            let v: f64 = f.parse().map_err(|_| {
                CliError::parse(format!("{}: line {}: not a number: {f:?}", path.display(), lineno + 1))
            })?;
            if !v.is_finite() {
                return Err(CliError::parse(format!(
                    "{}: line {}: non-finite value",
                    path.display(),
                    lineno + 1
                )));
            }
            row.push(v);
        }
        if width == 0 {
            width = row.len();
        } else if row.len() != width {
            return Err(CliError::parse(format!(
                "{}: line {}: expected {} columns, found {}",
                path.display(),
                lineno + 1,
                width,
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() || width == 0 {
        return Err(CliError::parse(format!("{}: no data rows", path.display())));
    }
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    DenseMatrix::from_vec(n, width, flat).map_err(CliError::from)
}

/// Writes observations with an x0..x{p−1} header; values use shortest
/// round-trip formatting so reruns are byte-identical.
pub fn write_data_csv(path: &Path, x: &DenseMatrix) -> Result<(), CliError> {
    let mut out = String::new();
    let header: Vec<String> = (0..x.cols()).map(|j| format!("x{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", x.get(i, j)));
        }
        out.push('\n');
    }
    fs::write(path, out)
        .map_err(|e| CliError::parse(format!("cannot write {}: {e}", path.display())))
}

/// Edge-list text file: one `i j` pair per line, `#` starts a comment,
/// blank lines ignored. Node count comes from the data width, never
/// from the largest index. The literal argument "chain" selects the
/// chain graph instead of a file.
pub fn read_local_graph(arg: &str, p: usize) -> Result<LocalGraph, CliError> {
    if arg == "chain" {
        return Ok(LocalGraph::chain(p));
    }
    let path = Path::new(arg);
    let text = read_to_string(path)?;
    let edges = parse_edge_lines(&text, &path.display().to_string())?;
    LocalGraph::new(p, &edges).map_err(CliError::from)
}

pub fn parse_edge_lines(text: &str, what: &str) -> Result<Vec<(usize, usize)>, CliError> {
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(CliError::parse(format!(
                "{what}: line {}: expected two indices",
                lineno + 1
            )));
        }
        let i: usize = toks[0]
            .parse()
            .map_err(|_| CliError::parse(format!("{what}: line {}: bad index", lineno + 1)))?;
        let j: usize = toks[1]
            .parse()
            .map_err(|_| CliError::parse(format!("{what}: line {}: bad index", lineno + 1)))?;
        edges.push((i, j));
    }
    Ok(edges)
}

/// Ground-truth model document: precision matrix, prior graph, and
/// optionally the true edge set (derived from the nonzero pattern when
/// absent).
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelJson {
    pub p: usize,
    pub omega: Vec<Vec<f64>>,
    pub local_edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_edges: Option<Vec<(usize, usize)>>,
}

pub fn read_model_json(path: &Path) -> Result<PrecisionModel, CliError> {
    let text = read_to_string(path)?;
    let doc: ModelJson = serde_json::from_str(&text)
        .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    model_from_doc(&doc)
}

pub fn model_from_doc(doc: &ModelJson) -> Result<PrecisionModel, CliError> {
    if doc.omega.len() != doc.p || doc.omega.iter().any(|r| r.len() != doc.p) {
        return Err(CliError::dimension("omega must be a p by p matrix"));
    }
    let flat: Vec<f64> = doc.omega.iter().flatten().copied().collect();
    let omega = DenseMatrix::from_vec(doc.p, doc.p, flat)?;
    let graph = LocalGraph::new(doc.p, &doc.local_edges)?;
    PrecisionModel::new(omega, graph, doc.true_edges.clone()).map_err(CliError::from)
}

pub fn model_to_doc(model: &PrecisionModel) -> ModelJson {
    let p = model.p();
    let omega = (0..p)
        .map(|i| (0..p).map(|j| model.omega().get(i, j)).collect())
        .collect();
    ModelJson {
        p,
        omega,
        local_edges: model.local_graph().edges().to_vec(),
        true_edges: Some(model.true_edges().to_vec()),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PenaltyJson {
    pub a: usize,
    pub lambda: f64,
    pub mu: f64,
    pub sigma_hat: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DiagnosticsJson {
    pub iterations: usize,
    pub objective: f64,
    pub kkt_residual: f64,
}

/// Fit document. On a fully converged fit every per-node slot is
/// populated; otherwise `incomplete` is set, failed nodes are listed,
/// their slots are null, and `edges` covers only what converged nodes
/// could claim.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitJson {
    pub p: usize,
    pub rule: String,
    pub tau: f64,
    pub penalties: Vec<PenaltyJson>,
    pub theta: Vec<Option<Vec<f64>>>,
    pub neighborhoods: Vec<Option<Vec<usize>>>,
    pub edges: Vec<(usize, usize)>,
    pub diagnostics: Vec<Option<DiagnosticsJson>>,
    #[serde(default)]
    pub incomplete: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_nodes: Vec<usize>,
}

pub fn read_fit_json(path: &Path) -> Result<FitJson, CliError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::parse(format!("serialize: {e}")))?;
    text.push('\n');
    fs::write(path, text)
        .map_err(|e| CliError::parse(format!("cannot write {}: {e}", path.display())))
}

pub fn rule_name(rule: EdgeRule) -> &'static str {
    match rule {
        EdgeRule::Union => "union",
        EdgeRule::Intersection => "intersection",
    }
}

pub fn parse_rule(s: &str) -> Result<EdgeRule, CliError> {
    match s {
        "union" => Ok(EdgeRule::Union),
        "intersection" => Ok(EdgeRule::Intersection),
        other => Err(CliError::parse(format!(
            "rule must be union or intersection, got {other:?}"
        ))),
    }
}

/// Benchmark request document.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfigJson {
    pub model: BenchModelJson,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub base_seed: u64,
    pub methods: Vec<MethodJson>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum BenchModelJson {
    /// {"chain": {"p": 50, "rho": 0.2, "distant": "default" | [[i,j],...]}}
    Chain { chain: ChainModelJson },
    /// {"model": { ...full model document... }}
    Inline { model: ModelJson },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainModelJson {
    pub p: usize,
    pub rho: f64,
    #[serde(default)]
    pub distant: Option<DistantJson>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum DistantJson {
    Keyword(String),
    Pairs(Vec<(usize, usize)>),
}

fn default_k() -> f64 {
    1.0
}
fn default_beta0() -> f64 {
    0.25
}
fn default_rule() -> String {
    "union".into()
}
fn default_tau() -> f64 {
    1e-6
}

#[derive(Debug, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum MethodJson {
    Nfl {
        alpha: f64,
        #[serde(default = "default_k")]
        k: f64,
        #[serde(default = "default_beta0")]
        beta0: f64,
        #[serde(default = "default_rule")]
        rule: String,
        #[serde(default = "default_tau")]
        tau: f64,
    },
    Mb {
        alpha: f64,
        #[serde(default = "default_rule")]
        rule: String,
        #[serde(default = "default_tau")]
        tau: f64,
    },
}

pub fn read_benchmark_config(path: &Path) -> Result<BenchmarkConfigJson, CliError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::parse(format!("cannot write {}: {e}", path.display())))
}
