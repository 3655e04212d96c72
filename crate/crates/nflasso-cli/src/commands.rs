//! The five subcommands. Each returns () or a `CliError` whose code is
//! the process exit status.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use nflasso::estimator::{
    combine_edges, extract_neighborhood, fit_node, nfl_kkt_check, select_penalties,
    select_penalties_tail, sigma_hat, standardize, EdgeRule, NodeFit, StandardizedData,
};
use nflasso::localgraph::{build_difference_matrix, DifferenceMatrix};
use nflasso::sim::{
    aggregate_outcomes, chain_precision, default_distant_blocks, mvn_sample, run_replicate,
    validate_spec, MethodSpec, SimulationSpec,
};
use nflasso::theory::{assumption_report, PrecisionModel};
use nflasso::localgraph::{local_constancy_norm, EntryNorm};

use crate::formats::{
    model_from_doc, model_to_doc, parse_edge_lines, parse_rule, read_benchmark_config,
    read_data_csv, read_fit_json, read_local_graph, read_model_json, rule_name, write_data_csv,
    write_json, write_text, BenchModelJson, CliError, DiagnosticsJson, DistantJson, FitJson,
    MethodJson, PenaltyJson,
};

/// Internal zero/tie threshold used when classifying active coordinates
/// and determined fusion rows during certificate checks. Matches the
/// solver's own convention.
const KKT_ZERO_TOL: f64 = 1e-7;

pub enum PenaltyFlag {
    Alpha(f64),
    Explicit { lambda: f64, mu: f64 },
    TailBound(f64),
}

pub struct FitOptions {
    pub data: PathBuf,
    pub local_graph: String,
    pub penalty: PenaltyFlag,
    pub k: f64,
    pub beta0: f64,
    pub rule: String,
    pub tau: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub shared_sigma: bool,
    pub out: PathBuf,
}

fn validate_positive(name: &str, v: f64) -> Result<(), CliError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(CliError::parse(format!("--{name} must be a positive number")));
    }
    Ok(())
}

fn per_node_penalties(
    opts: &FitOptions,
    data: &StandardizedData,
    d: &DifferenceMatrix,
) -> Result<Vec<(f64, f64)>, CliError> {
    let (n, p) = (data.n(), data.p());
    let sigmas: Vec<f64> = (0..p).map(|a| sigma_hat(data.matrix(), a)).collect();
    let shared = sigmas.iter().sum::<f64>() / p as f64;
    let mut out = Vec::with_capacity(p);
    for a in 0..p {
        let pair = match opts.penalty {
            PenaltyFlag::Alpha(alpha) => {
                let sig = if opts.shared_sigma { shared } else { sigmas[a] };
                let plan = select_penalties(n, p, alpha, sig, opts.k, opts.beta0)?;
                (plan.lambda, plan.mu)
            }
            PenaltyFlag::Explicit { lambda, mu } => (lambda, mu),
            PenaltyFlag::TailBound(t) => {
                let b = d.exclude_node(a)?.column_l1_norms().into_iter().max().unwrap_or(0);
                select_penalties_tail(t, n, p, b as f64)?
            }
        };
        out.push(pair);
    }
    Ok(out)
}

pub fn cmd_fit(opts: FitOptions) -> Result<(), CliError> {
    match opts.penalty {
        PenaltyFlag::Alpha(alpha) => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(CliError::parse("--alpha must lie in (0, 1)"));
            }
        }
        PenaltyFlag::Explicit { lambda, mu } => {
            validate_positive("lambda", lambda)?;
            if !(mu >= 0.0) || !mu.is_finite() {
                return Err(CliError::parse("--mu must be nonnegative"));
            }
        }
        PenaltyFlag::TailBound(t) => validate_positive("tail-t", t)?,
    }
    validate_positive("K", opts.k)?;
    if !(opts.beta0 >= 0.0) || !opts.beta0.is_finite() {
        return Err(CliError::parse("--beta0 must be nonnegative"));
    }
    validate_positive("tau", opts.tau)?;
    validate_positive("tol", opts.tol)?;
    let rule = parse_rule(&opts.rule)?;

    let raw = read_data_csv(&opts.data)?;
    let (n, p) = (raw.rows(), raw.cols());
    if n < 2 || p < 2 {
        return Err(CliError::dimension(format!(
            "need at least 2 rows and 2 columns, got {n}x{p}"
        )));
    }
    let graph = read_local_graph(&opts.local_graph, p)?;
    let data = standardize(&raw)?;
    let d = build_difference_matrix(&graph);
    let penalties = per_node_penalties(&opts, &data, &d)?;

    let results: Vec<Result<NodeFit, nflasso::Error>> = (0..p)
        .into_par_iter()
        .map(|a| fit_node(&data, a, penalties[a].0, penalties[a].1, &d, opts.tol, opts.max_iter))
        .collect();

    let penalty_rows: Vec<PenaltyJson> = (0..p)
        .map(|a| PenaltyJson {
            a,
            lambda: penalties[a].0,
            mu: penalties[a].1,
            sigma_hat: sigma_hat(data.matrix(), a),
        })
        .collect();

    let failed_nodes: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_err())
        .map(|(a, _)| a)
        .collect();

    let doc = if failed_nodes.is_empty() {
        let fits: Vec<NodeFit> = results.into_iter().map(|r| r.unwrap()).collect();
        let estimate = combine_edges(&fits, rule, opts.tau);
        FitJson {
            p,
            rule: rule_name(rule).into(),
            tau: opts.tau,
            penalties: penalty_rows,
            theta: fits.iter().map(|f| Some(f.theta_hat.clone())).collect(),
            neighborhoods: estimate.neighborhoods.into_iter().map(Some).collect(),
            edges: estimate.edges,
            diagnostics: fits
                .iter()
                .map(|f| {
                    Some(DiagnosticsJson {
                        iterations: f.iterations,
                        objective: f.objective,
                        kkt_residual: f.kkt_residual,
                    })
                })
                .collect(),
            incomplete: false,
            failed_nodes: vec![],
        }
    } else {
        let neighborhoods: Vec<Option<Vec<usize>>> = results
            .iter()
            .map(|r| r.as_ref().ok().map(|f| extract_neighborhood(f, opts.tau)))
            .collect();
        // a failed node contributes no claims; intersection edges touching
        // it cannot be confirmed and are dropped
        let mut edges = Vec::new();
        for a in 0..p {
            for b in a + 1..p {
                let fwd = neighborhoods[a].as_ref().is_some_and(|s| s.binary_search(&b).is_ok());
                let bwd = neighborhoods[b].as_ref().is_some_and(|s| s.binary_search(&a).is_ok());
                let keep = match rule {
                    EdgeRule::Union => fwd || bwd,
                    EdgeRule::Intersection => fwd && bwd,
                };
                if keep {
                    edges.push((a, b));
                }
            }
        }
        FitJson {
            p,
            rule: rule_name(rule).into(),
            tau: opts.tau,
            penalties: penalty_rows,
            theta: results
                .iter()
                .map(|r| r.as_ref().ok().map(|f| f.theta_hat.clone()))
                .collect(),
            neighborhoods,
            edges,
            diagnostics: results
                .iter()
                .map(|r| {
                    r.as_ref().ok().map(|f| DiagnosticsJson {
                        iterations: f.iterations,
                        objective: f.objective,
                        kkt_residual: f.kkt_residual,
                    })
                })
                .collect(),
            incomplete: true,
            failed_nodes: failed_nodes.clone(),
        }
    };

    write_json(&opts.out, &doc)?;
    if doc.incomplete {
        return Err(CliError::new(
            4,
            format!(
                "{} of {p} node fits did not converge (partial output written to {})",
                failed_nodes.len(),
                opts.out.display()
            ),
        ));
    }
    println!(
        "fit: {p} nodes, {} edges ({}), written to {}",
        doc.edges.len(),
        doc.rule,
        opts.out.display()
    );
    Ok(())
}

pub struct SimulateOptions {
    pub model: String,
    pub p: Option<usize>,
    pub rho: Option<f64>,
    pub distant: Option<String>,
    pub n: usize,
    pub seed: u64,
    pub out_data: PathBuf,
    pub out_model: PathBuf,
}

fn resolve_distant(arg: Option<&str>) -> Result<Vec<(usize, usize)>, CliError> {
    match arg {
        None => Ok(vec![]),
        Some("default") => Ok(default_distant_blocks()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::parse(format!("cannot read {path}: {e}")))?;
            parse_edge_lines(&text, path)
        }
    }
}

fn build_model(
    model_arg: &str,
    p: Option<usize>,
    rho: Option<f64>,
    distant: Option<&str>,
) -> Result<PrecisionModel, CliError> {
    if model_arg == "chain" {
        let p = p.ok_or_else(|| CliError::parse("--model chain requires --p"))?;
        let rho = rho.ok_or_else(|| CliError::parse("--model chain requires --rho"))?;
        let pairs = resolve_distant(distant)?;
        Ok(chain_precision(p, rho, &pairs)?)
    } else {
        if p.is_some() || rho.is_some() || distant.is_some() {
            return Err(CliError::parse(
                "--p, --rho, and --distant apply only to --model chain",
            ));
        }
        read_model_json(Path::new(model_arg))
    }
}

pub fn cmd_simulate(opts: SimulateOptions) -> Result<(), CliError> {
    if opts.n < 1 {
        return Err(CliError::parse("--n must be at least 1"));
    }
    let model = build_model(&opts.model, opts.p, opts.rho, opts.distant.as_deref())?;
    let x = mvn_sample(&model, opts.n, opts.seed)?;
    write_data_csv(&opts.out_data, &x)?;
    write_json(&opts.out_model, &model_to_doc(&model))?;
    println!(
        "simulate: {}x{} sample written to {}, model to {}",
        x.rows(),
        x.cols(),
        opts.out_data.display(),
        opts.out_model.display()
    );
    Ok(())
}

pub struct BenchmarkOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub out_freq: Option<PathBuf>,
}

fn method_from_json(m: &MethodJson) -> Result<MethodSpec, CliError> {
    Ok(match m {
        MethodJson::Nfl { alpha, k, beta0, rule, tau } => MethodSpec::Nfl {
            alpha: *alpha,
            k: *k,
            beta0: *beta0,
            rule: parse_rule(rule)?,
            tau: *tau,
        },
        MethodJson::Mb { alpha, rule, tau } => MethodSpec::Mb {
            alpha: *alpha,
            rule: parse_rule(rule)?,
            tau: *tau,
        },
    })
}

pub fn cmd_benchmark(opts: BenchmarkOptions) -> Result<(), CliError> {
    let config = read_benchmark_config(&opts.config)?;
    let model = match &config.model {
        BenchModelJson::Chain { chain } => {
            let pairs = match &chain.distant {
                None => vec![],
                Some(DistantJson::Keyword(k)) if k == "default" => default_distant_blocks(),
                Some(DistantJson::Keyword(k)) => {
                    return Err(CliError::parse(format!(
                        "distant keyword must be \"default\", got {k:?}"
                    )))
                }
                Some(DistantJson::Pairs(p)) => p.clone(),
            };
            chain_precision(chain.p, chain.rho, &pairs)?
        }
        BenchModelJson::Inline { model } => model_from_doc(model)?,
    };
    let methods: Vec<MethodSpec> = config
        .methods
        .iter()
        .map(method_from_json)
        .collect::<Result<_, _>>()?;
    let spec = SimulationSpec {
        model,
        n_grid: config.n_grid,
        replicates: config.replicates,
        methods,
        base_seed: config.base_seed,
    };
    validate_spec(&spec)?;

    let mut keys = Vec::new();
    for method in 0..spec.methods.len() {
        for &n in &spec.n_grid {
            for r in 0..spec.replicates {
                keys.push((method, n, r));
            }
        }
    }
    let outcomes: Vec<_> = keys
        .into_par_iter()
        .map(|(method, n, r)| run_replicate(&spec, method, n, r))
        .collect();
    let report = aggregate_outcomes(&spec, outcomes)?;

    let mut csv = String::from(
        "method,n,fp_mean,fp_sd,tp_mean,tp_sd,true_edge_count,replicates,excluded\n",
    );
    for cell in &report.cells {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            cell.method_name,
            cell.n,
            cell.fp_mean,
            cell.fp_sd,
            cell.tp_mean,
            cell.tp_sd,
            report.true_edge_count,
            report.replicates,
            cell.excluded
        ));
    }
    write_text(&opts.out, &csv)?;

    if let Some(freq_path) = &opts.out_freq {
        let mut freq = String::from("method,n,a,b,count\n");
        for cell in &report.cells {
            for &((a, b), count) in &cell.edge_counts {
                freq.push_str(&format!("{},{},{a},{b},{count}\n", cell.method_name, cell.n));
            }
        }
        write_text(freq_path, &freq)?;
    }
    println!(
        "benchmark: {} cells over {} replicates written to {}",
        report.cells.len(),
        report.replicates,
        opts.out.display()
    );
    Ok(())
}

pub struct CheckOptions {
    pub model: PathBuf,
    pub local_graph: Option<String>,
    pub out: PathBuf,
}

#[derive(serde::Serialize)]
struct ConstancyJson {
    l1: f64,
    l2: f64,
    linf: f64,
}

#[derive(serde::Serialize)]
struct OracleInputsJson {
    /// Largest true neighborhood size, the sparsity the l1 bounds scale
    /// with.
    s0_max: usize,
    /// Largest column l1 norm across all node difference matrices, the
    /// B multiplying mu in the bounds.
    fusion_column_bound: usize,
}

#[derive(serde::Serialize)]
struct CheckJson {
    p: usize,
    true_edge_count: usize,
    delta1: f64,
    delta2_ratio: f64,
    min_partial_correlation: f64,
    max_neighborhood_size: usize,
    max_local_degree: usize,
    local_constancy: ConstancyJson,
    oracle_inputs: OracleInputsJson,
}

pub fn cmd_check(opts: CheckOptions) -> Result<(), CliError> {
    let mut doc = {
        let text = std::fs::read_to_string(&opts.model)
            .map_err(|e| CliError::parse(format!("cannot read {}: {e}", opts.model.display())))?;
        serde_json::from_str::<crate::formats::ModelJson>(&text)
            .map_err(|e| CliError::parse(format!("{}: {e}", opts.model.display())))?
    };
    if let Some(arg) = &opts.local_graph {
        let graph = read_local_graph(arg, doc.p)?;
        doc.local_edges = graph.edges().to_vec();
    }
    let model = model_from_doc(&doc)?;
    let d = build_difference_matrix(model.local_graph());
    let report = assumption_report(&model, &d)?;
    let out = CheckJson {
        p: model.p(),
        true_edge_count: model.true_edges().len(),
        delta1: report.delta1,
        delta2_ratio: report.delta2_ratio,
        min_partial_correlation: report.min_partial_correlation,
        max_neighborhood_size: report.max_neighborhood_size,
        max_local_degree: report.max_local_degree,
        local_constancy: ConstancyJson {
            l1: local_constancy_norm(&d, model.omega(), EntryNorm::L1)?,
            l2: local_constancy_norm(&d, model.omega(), EntryNorm::L2)?,
            linf: local_constancy_norm(&d, model.omega(), EntryNorm::LInf)?,
        },
        oracle_inputs: OracleInputsJson {
            s0_max: report.max_neighborhood_size,
            fusion_column_bound: (0..model.p())
                .map(|a| {
                    d.exclude_node(a)
                        .map(|da| da.column_l1_norms().into_iter().max().unwrap_or(0))
                        .unwrap_or(0)
                })
                .max()
                .unwrap_or(0),
        },
    };
    write_json(&opts.out, &out)?;
    println!(
        "check: delta1 {:.4}, delta2 ratio {:.4}, written to {}",
        out.delta1,
        out.delta2_ratio,
        opts.out.display()
    );
    Ok(())
}

pub struct KktOptions {
    pub fit: PathBuf,
    pub data: PathBuf,
    pub local_graph: String,
    pub tol: f64,
}

pub fn cmd_kkt(opts: KktOptions) -> Result<(), CliError> {
    validate_positive("tol", opts.tol)?;
    let fit: FitJson = read_fit_json(&opts.fit)?;
    let raw = read_data_csv(&opts.data)?;
    let p = raw.cols();
    if fit.p != p {
        return Err(CliError::dimension(format!(
            "fit document has p = {}, data has {} columns",
            fit.p, p
        )));
    }
    if fit.penalties.len() != p
        || fit.theta.len() != p
        || fit.penalties.iter().enumerate().any(|(i, pj)| pj.a != i)
    {
        return Err(CliError::parse("fit document penalties/theta malformed"));
    }
    let graph = read_local_graph(&opts.local_graph, p)?;
    let data = standardize(&raw)?;
    let d = build_difference_matrix(&graph);

    let mut worst = 0.0f64;
    let mut verified = 0usize;
    for a in 0..p {
        let Some(theta) = &fit.theta[a] else { continue };
        if theta.len() != p {
            return Err(CliError::dimension(format!(
                "node {a}: theta has length {}, expected {p}",
                theta.len()
            )));
        }
        if theta[a] != 0.0 {
            return Err(CliError::new(
                1,
                format!("node {a}: self-coefficient must be exactly 0"),
            ));
        }
        let d_a = d.exclude_node(a)?;
        let report = nfl_kkt_check(
            theta,
            &data,
            a,
            fit.penalties[a].lambda,
            fit.penalties[a].mu,
            &d_a,
            KKT_ZERO_TOL,
        );
        worst = worst.max(report.max_violation);
        verified += 1;
    }
    if verified == 0 {
        return Err(CliError::new(1, "fit document contains no coefficient vectors"));
    }
    println!("kkt: {verified} nodes verified, max violation {worst:.3e} (tolerance {})", opts.tol);
    if worst <= opts.tol {
        Ok(())
    } else {
        Err(CliError::new(
            1,
            format!("max KKT violation {worst:.3e} exceeds tolerance {}", opts.tol),
        ))
    }
}
