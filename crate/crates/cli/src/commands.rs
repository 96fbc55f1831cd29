use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use adaptive_ep::bench::{overhead_report, records_to_csv, sweep, SweepOptions};
use adaptive_ep::clustering::{build_entry_index, EntryPointIndex, KMeansParams};
use adaptive_ep::graph::{build_graph, Algorithm, BuildParams, NavGraph};
use adaptive_ep::hardcase::{gen_hard_instance, voronoi_overlay, HardInstanceSpec};
use adaptive_ep::io::{decode_fvecs, decode_ivecs, decode_mann, encode_fvecs, encode_ivecs, VectorFormat};
use adaptive_ep::monotonicity::{certify_bmsnet, theorem_quantities, CertifyOptions, TheoremInput};
use adaptive_ep::search::SearchParams;
use adaptive_ep::synth::MixtureSpec;
use adaptive_ep::vectors::{ground_truth, NeighborList, NodeId, VectorSet};
use adaptive_ep::bench::{recall_at_k, run_queries, EntryMode};
use serde::Serialize;

use crate::args::*;
use crate::manifest::{beside, prefixed, Run};
use crate::{CliError, CliResult};

pub fn dispatch(cli: Cli) -> CliResult {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {} threads: {e}", cli.threads)))?;
    }
    match &cli.command {
        Command::Gen(a) => gen(&cli, a),
        Command::GenHard(a) => gen_hard(&cli, a),
        Command::Eps(EpsCommand::Build(a)) => eps_build(&cli, a),
        Command::Build(a) => build(&cli, a),
        Command::Search(a) => search(&cli, a),
        Command::Bench(a) => bench(&cli, a),
        Command::Analyze(AnalyzeCommand::Bmsnet(a)) => bmsnet(&cli, a),
        Command::Analyze(AnalyzeCommand::Theorem(a)) => theorem(&cli, a),
        Command::Analyze(AnalyzeCommand::Overlay(a)) => overlay(&cli, a),
        Command::Analyze(AnalyzeCommand::Overhead(a)) => overhead(&cli, a),
    }
}

fn vectors(run: &mut Run, path: &Path) -> CliResult<VectorSet> {
    let bytes = run.read(path)?;
    Ok(match VectorFormat::from_path(path) {
        Some(VectorFormat::Mann) => decode_mann(&bytes)?,
        _ => decode_fvecs(&bytes)?,
    })
}

/// Loads a graph and, when present, the `.meta.json` written beside it.
fn graph(run: &mut Run, path: &Path) -> CliResult<NavGraph> {
    let mut g = NavGraph::decode(&run.read(path)?)?;
    let meta = meta_path(path);
    if meta.is_file() {
        g.set_build_meta(serde_json::from_slice(&run.read(&meta)?)?);
    }
    Ok(g)
}

fn meta_path(graph: &Path) -> PathBuf {
    let mut s = graph.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn eps_file(run: &mut Run, path: &Path) -> CliResult<EntryPointIndex> {
    Ok(EntryPointIndex::decode(&run.read(path)?)?)
}

fn ground_truth_file(run: &mut Run, path: &Path) -> CliResult<Vec<NeighborList>> {
    Ok(decode_ivecs(&run.read(path)?)?
        .into_iter()
        .map(NeighborList::from_ids)
        .collect())
}

fn json(value: &impl Serialize) -> CliResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Writes a JSON report to `out` with a manifest, or prints it.
fn report(mut run: Run, out: Option<&PathBuf>, command: &str, cli: &Cli, value: &impl Serialize) -> CliResult {
    let bytes = json(value)?;
    match out {
        Some(path) => {
            run.stage(path, bytes);
            run.commit(&beside(path), command, cli)
        }
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

fn gt_rows(gt: &[NeighborList]) -> Vec<&[NodeId]> {
    gt.iter().map(|n| n.ids.as_slice()).collect()
}

fn gen(cli: &Cli, a: &GenArgs) -> CliResult {
    let mut spec = match a.preset {
        Preset::Gauss => MixtureSpec::gauss(a.n, a.queries, cli.seed),
        Preset::DeepLike => MixtureSpec::deep_like(a.n, a.queries, cli.seed),
    };
    if let Some(d) = a.dim {
        spec.dim = d;
    }
    let (base, queries) = spec.generate()?;
    let gt = ground_truth(&queries, &base, a.gt_k.min(base.len()))?;
    let mut run = Run::default();
    run.stage(prefixed(&a.out_prefix, "base.fvecs"), encode_fvecs(&base));
    run.stage(prefixed(&a.out_prefix, "query.fvecs"), encode_fvecs(&queries));
    run.stage(prefixed(&a.out_prefix, "gt.ivecs"), encode_ivecs(&gt_rows(&gt)));
    run.stage(prefixed(&a.out_prefix, "spec.json"), json(&spec)?);
    run.commit(&prefixed(&a.out_prefix, "manifest.json"), "gen", cli)?;
    eprintln!("wrote {} base and {} query vectors of dimension {}", base.len(), queries.len(), base.dim());
    Ok(())
}

fn gen_hard(cli: &Cli, a: &GenHardArgs) -> CliResult {
    let spec = HardInstanceSpec {
        n_total: a.n,
        dim: a.dim,
        n_queries: a.queries,
        seed: cli.seed,
        ..Default::default()
    };
    let inst = gen_hard_instance(&spec)?;
    let mut run = Run::default();
    run.stage(prefixed(&a.out_prefix, "base.fvecs"), encode_fvecs(&inst.base));
    run.stage(prefixed(&a.out_prefix, "query.fvecs"), encode_fvecs(&inst.queries));
    run.stage(prefixed(&a.out_prefix, "gt.ivecs"), encode_ivecs(&gt_rows(&inst.ground_truth)));
    run.stage(prefixed(&a.out_prefix, "spec.json"), json(&spec)?);
    run.commit(&prefixed(&a.out_prefix, "manifest.json"), "gen-hard", cli)?;
    eprintln!("wrote hard instance with {} points; ground truth ids {:?}", inst.base.len(), inst.gt_ids);
    Ok(())
}

fn eps_name(k: usize) -> String {
    format!("eps_k{k}.meps")
}

fn eps_build(cli: &Cli, a: &EpsBuildArgs) -> CliResult {
    let (targets, manifest): (Vec<PathBuf>, PathBuf) = match (&a.out, &a.out_dir) {
        (Some(out), None) if a.k.len() == 1 => (vec![out.clone()], beside(out)),
        (Some(_), None) => return Err(CliError::Usage("--out takes a single K; use --out-dir".into())),
        (None, Some(dir)) => (
            a.k.iter().map(|&k| dir.join(eps_name(k))).collect(),
            dir.join("eps.manifest.json"),
        ),
        _ => return Err(CliError::Usage("give exactly one of --out and --out-dir".into())),
    };
    let mut run = Run::default();
    let set = vectors(&mut run, &a.vectors)?;
    let mut summary = Vec::new();
    for (&k, path) in a.k.iter().zip(&targets) {
        let params = KMeansParams {
            max_points_per_centroid: a.max_points_per_centroid,
            ..KMeansParams::new(k, a.iters, cli.seed)
        };
        let (eps, km) = build_entry_index(&set, &params)?;
        summary.push(serde_json::json!({
            "K": k,
            "iterations_run": km.iterations_run,
            "inertia": km.inertia,
            "path": path,
        }));
        run.stage(path, eps.encode());
    }
    run.commit(&manifest, "eps build", cli)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn build(cli: &Cli, a: &BuildArgs) -> CliResult {
    let mut params = match a.algo {
        Algo::Vamana => BuildParams::vamana(),
        _ => BuildParams::nsg(),
    };
    params.algorithm = match a.algo {
        Algo::Nsg => Algorithm::Nsg,
        Algo::Vamana => Algorithm::Vamana,
        Algo::Knn => Algorithm::Knn,
        Algo::Brute => Algorithm::Brute,
    };
    params.seed = cli.seed;
    if let Some(r) = a.r {
        params.r = r;
    }
    if let Some(l) = a.l {
        params.l = l;
    }
    if let Some(c) = a.c {
        params.c = c;
    }
    if let Some(alpha) = a.alpha {
        params.alpha = alpha;
    }
    if let Some(k) = a.knn_k {
        params.knn.k = k;
    }
    if matches!(a.algo, Algo::Knn | Algo::Brute) && a.r.is_none() {
        params.r = params.knn.k;
        params.l = params.l.max(params.r);
    }
    let mut run = Run::default();
    let set = vectors(&mut run, &a.vectors)?;
    let g = build_graph(&set, &params)?;
    let meta = json(g.build_meta())?;
    run.stage(&a.out, g.encode());
    run.stage(meta_path(&a.out), meta);
    run.commit(&beside(&a.out), "build", cli)?;
    eprintln!(
        "built {} graph: {} nodes, {} edges, max degree {}, entry {}, {:.1}s",
        g.build_meta().algorithm,
        g.len(),
        g.num_edges(),
        g.max_out_degree(),
        g.default_entry(),
        g.build_meta().build_seconds
    );
    Ok(())
}

#[derive(Serialize)]
struct TraceLine<'a> {
    query_id: usize,
    expanded: &'a [NodeId],
}

fn search(cli: &Cli, a: &SearchArgs) -> CliResult {
    let mut run = Run::default();
    let g = graph(&mut run, &a.graph)?;
    let set = vectors(&mut run, &a.vectors)?;
    let queries = vectors(&mut run, &a.queries)?;
    let eps = match a.eps.as_str() {
        "none" => None,
        path => Some(eps_file(&mut run, Path::new(path))?),
    };
    let gt = a.gt.as_ref().map(|p| ground_truth_file(&mut run, p)).transpose()?;
    let mut p = SearchParams::new(a.queue_len, a.k)?;
    if a.trace.is_some() {
        p = p.with_trace();
    }
    let mode = match &eps {
        None => EntryMode::Fixed,
        Some(e) => EntryMode::Adaptive(e),
    };
    let results = run_queries(&g, &set, mode, &queries, &p)?;
    let lists: Vec<NeighborList> = results.iter().map(|r| r.topk.clone()).collect();
    let n = results.len().max(1) as f64;
    let mut summary = serde_json::json!({
        "queries": results.len(),
        "K": mode.k(),
        "L": a.queue_len,
        "k": a.k,
        "mean_hops": results.iter().map(|r| r.hops as f64).sum::<f64>() / n,
        "mean_dist_evals": results.iter().map(|r| r.dist_evals as f64).sum::<f64>() / n,
    });
    if let Some(gt) = &gt {
        summary["recall"] = recall_at_k(&lists, gt, a.k)?.into();
    }
    if let Some(out) = &a.out {
        run.stage(out, encode_ivecs(&gt_rows(&lists)));
    }
    if let Some(path) = &a.trace {
        let mut text = Vec::new();
        for (i, r) in results.iter().enumerate() {
            let expanded = r.trace.as_ref().map_or(&[][..], |t| t.expanded.as_slice());
            serde_json::to_writer(&mut text, &TraceLine { query_id: i, expanded })?;
            text.push(b'\n');
        }
        run.stage(path, text);
    }
    if let Some(anchor) = a.out.as_ref().or(a.trace.as_ref()) {
        run.commit(&beside(anchor), "search", cli)?;
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn eps_dir(run: &mut Run, dir: &Path) -> CliResult<BTreeMap<usize, EntryPointIndex>> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("`{}` is not a directory", dir.display())));
    }
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let k = name
            .strip_prefix("eps_k")
            .and_then(|r| r.strip_suffix(".meps"))
            .and_then(|k| k.parse::<usize>().ok());
        if let Some(k) = k {
            let eps = eps_file(run, &path)?;
            if eps.k() != k {
                return Err(CliError::Lib(adaptive_ep::Error::Invalid(format!(
                    "{} holds {} candidates",
                    path.display(),
                    eps.k()
                ))));
            }
            out.insert(k, eps);
        }
    }
    Ok(out)
}

fn bench(cli: &Cli, a: &BenchArgs) -> CliResult {
    let mut run = Run::default();
    let g = graph(&mut run, &a.graph)?;
    let set = vectors(&mut run, &a.vectors)?;
    let queries = vectors(&mut run, &a.queries)?;
    let gt = ground_truth_file(&mut run, &a.gt)?;
    let mut per_k = match &a.eps_dir {
        Some(dir) => eps_dir(&mut run, dir)?,
        None => BTreeMap::new(),
    };
    per_k.insert(1, EntryPointIndex::single(&set, g.default_entry()));
    if !a.candidates.is_empty() {
        if let Some(missing) = a.candidates.iter().find(|k| !per_k.contains_key(k)) {
            return Err(CliError::Usage(format!("no entry-point index with K = {missing}")));
        }
        per_k.retain(|k, _| a.candidates.contains(k));
    }
    let threads = a.query_threads.unwrap_or(cli.threads);
    let opts = SweepOptions {
        dataset: a.dataset.clone(),
        threads: if threads == 0 { rayon::current_num_threads() } else { threads },
        repeats: a.repeats,
        ..Default::default()
    };
    let records = sweep(&g, &set, &per_k, &queries, &gt, &a.queue_lens, a.k, &opts)?;
    for r in &records {
        eprintln!("K={:<5} L={:<5} recall={:.4} qps={:.0}", r.k_candidates, r.queue_len, r.recall, r.qps);
    }
    run.stage(&a.out, records_to_csv(&records)?);
    run.commit(&beside(&a.out), "bench", cli)
}

fn bmsnet(cli: &Cli, a: &BmsnetArgs) -> CliResult {
    let mut run = Run::default();
    let g = graph(&mut run, &a.graph)?;
    let set = vectors(&mut run, &a.vectors)?;
    let mut opts = CertifyOptions {
        seed: cli.seed,
        ..Default::default()
    };
    if a.exact {
        opts.exact_threshold = usize::MAX;
    }
    if let Some(pairs) = a.sample {
        opts.exact_threshold = 0;
        opts.pair_budget = pairs;
    }
    let cert = certify_bmsnet(&g, &set, &opts)?;
    report(run, a.out.as_ref(), "analyze bmsnet", cli, &cert)
}

fn theorem(cli: &Cli, a: &TheoremArgs) -> CliResult {
    let mut run = Run::default();
    let g = graph(&mut run, &a.graph)?;
    let set = vectors(&mut run, &a.vectors)?;
    let eps = eps_file(&mut run, &a.eps)?;
    let queries = vectors(&mut run, &a.queries)?;
    let opts = CertifyOptions {
        exact_threshold: usize::MAX,
        seed: cli.seed,
        ..Default::default()
    };
    let cert = certify_bmsnet(&g, &set, &opts)?;
    let rep = theorem_quantities(&TheoremInput {
        graph: &g,
        set: &set,
        queries: &queries,
        eps: &eps,
        certificate: &cert,
        extra_paths: &[],
    })?;
    report(run, a.out.as_ref(), "analyze theorem", cli, &rep)
}

fn overlay(cli: &Cli, a: &OverlayArgs) -> CliResult {
    let mut run = Run::default();
    let set = vectors(&mut run, &a.vectors)?;
    let eps = eps_file(&mut run, &a.eps)?;
    let queries = vectors(&mut run, &a.queries)?;
    let gt = ground_truth_file(&mut run, &a.gt)?;
    let mut ids: Vec<NodeId> = gt.iter().flat_map(|n| n.ids.iter().copied()).collect();
    ids.sort_unstable();
    ids.dedup();
    if let Some(&bad) = ids.iter().find(|&&i| i as usize >= set.len()) {
        return Err(CliError::Lib(adaptive_ep::Error::Invalid(format!(
            "ground-truth id {bad} is out of range"
        ))));
    }
    let ov = voronoi_overlay(&set, &eps, &queries, &ids)?;
    report(run, a.out.as_ref(), "analyze overlay", cli, &ov)
}

fn overhead(cli: &Cli, a: &OverheadArgs) -> CliResult {
    let mut run = Run::default();
    let graph_bytes = run.read(&a.graph)?.len() as u64;
    let per_k = eps_dir(&mut run, &a.eps_dir)?;
    let rows: Vec<_> = per_k.values().map(|e| overhead_report(e, graph_bytes, None)).collect();
    report(run, a.out.as_ref(), "analyze overhead", cli, &rows)
}
