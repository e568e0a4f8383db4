//! Experiment harness: grid runs, best-known registry, external result
//! ingestion and table output.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::anneal::AnnealConfig;
use crate::error::{Error, Result};
use crate::evaluate::{approximation_ratio, solve_partition, Formulation};
use crate::graph::{balance_bounds, Graph};
use crate::io::read_graph;
use crate::qubo::Penalty;
use crate::sparsify::{sparsify_pipeline, PipelineConfig};

const BUNDLED_BEST_KNOWN: &str = include_str!("../data/best_known.csv");

/// Imbalance values are keyed in units of 1e-4 so that `0.01` read from a
/// CSV and `0.01` from a TOML grid land in the same cell.
fn eps_key(epsilon: f64) -> i64 {
    (epsilon * 1e4).round() as i64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct BestKnownRow {
    graph_id: String,
    n: Option<usize>,
    d_avg: Option<f64>,
    k: usize,
    epsilon: f64,
    cut: usize,
}

/// Best-known cuts per `(graph, k, epsilon)` plus graph metadata.
#[derive(Clone, Debug, Default)]
pub struct BestKnown {
    cuts: HashMap<(String, usize, i64), usize>,
    meta: HashMap<String, (usize, f64)>,
}

impl BestKnown {
    /// Walshaw k=2 values shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_reader(BUNDLED_BEST_KNOWN.as_bytes()).expect("bundled best-known table parses")
    }

    /// Reads `graph_id,n,d_avg,k,epsilon,cut` rows; `n` and `d_avg` may be empty.
    pub fn from_reader(r: impl Read) -> Result<Self> {
        let mut out = BestKnown::default();
        out.extend_from_reader(r)?;
        Ok(out)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    /// Adds rows; a lower cut for an existing cell replaces the old value.
    pub fn extend_from_reader(&mut self, r: impl Read) -> Result<()> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        for row in rdr.deserialize() {
            let row: BestKnownRow = row?;
            if let (Some(n), Some(d)) = (row.n, row.d_avg) {
                self.meta.insert(row.graph_id.clone(), (n, d));
            }
            self.insert(&row.graph_id, row.k, row.epsilon, row.cut);
        }
        Ok(())
    }

    pub fn insert(&mut self, graph_id: &str, k: usize, epsilon: f64, cut: usize) {
        self.cuts
            .entry((graph_id.to_string(), k, eps_key(epsilon)))
            .and_modify(|c| *c = (*c).min(cut))
            .or_insert(cut);
    }

    pub fn get(&self, graph_id: &str, k: usize, epsilon: f64) -> Option<usize> {
        self.cuts.get(&(graph_id.to_string(), k, eps_key(epsilon))).copied()
    }

    /// `(n, d_avg)` for a known graph.
    pub fn graph_meta(&self, graph_id: &str) -> Option<(usize, f64)> {
        self.meta.get(graph_id).copied()
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Not attempted, e.g. the model exceeds the variable cap.
    Skipped,
    Failed,
    /// Ingested from an external solver.
    External,
    /// External row without a result.
    Missing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    BestKnown,
    /// No registry entry; the best cut among the compared solvers.
    BestObserved,
}

/// One row of a comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub graph_id: String,
    pub n: Option<usize>,
    pub d_avg: Option<f64>,
    pub solver_id: String,
    pub k: usize,
    pub epsilon: f64,
    pub penalty: Option<f64>,
    pub seed: Option<u64>,
    pub cut_raw: Option<usize>,
    pub cut_repaired: Option<usize>,
    pub feasible: Option<bool>,
    pub best_known: Option<usize>,
    pub reference: Option<Reference>,
    pub approximation_ratio: Option<f64>,
    /// Lowest cut among the solvers in this `(graph, k, epsilon)` cell.
    pub is_min: bool,
    /// Cut strictly below the registry value.
    pub new_best: bool,
    pub time_limit: Option<f64>,
    pub wall_time: Option<f64>,
    pub config_digest: Option<String>,
    pub status: Status,
    pub note: Option<String>,
}

impl RunRecord {
    fn empty(graph_id: &str, solver_id: &str, k: usize, epsilon: f64, status: Status) -> Self {
        RunRecord {
            graph_id: graph_id.to_string(),
            n: None,
            d_avg: None,
            solver_id: solver_id.to_string(),
            k,
            epsilon,
            penalty: None,
            seed: None,
            cut_raw: None,
            cut_repaired: None,
            feasible: None,
            best_known: None,
            reference: None,
            approximation_ratio: None,
            is_min: false,
            new_best: false,
            time_limit: None,
            wall_time: None,
            config_digest: None,
            status,
            note: None,
        }
    }

    fn cell(&self) -> (String, usize, i64) {
        (self.graph_id.clone(), self.k, eps_key(self.epsilon))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineToggle {
    pub enabled: bool,
    #[serde(flatten)]
    pub params: PipelineConfig,
}

/// Declarative bench configuration, usually read from TOML.
///
/// ```toml
/// graphs = ["data/walshaw/add20.graph"]
/// ks = [2, 3]
/// epsilons = [0.0, 0.01, 0.03, 0.05]
/// penalty = "auto"
///
/// [anneal]
/// sweeps = 20000
/// time_limit = 60.0
///
/// [pipeline]
/// enabled = true
/// keep_ratio = 0.7
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub graphs: Vec<PathBuf>,
    pub ks: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub solver_id: String,
    /// `"auto"` or a positive number.
    pub penalty: String,
    pub formulation: Formulation,
    pub anneal: AnnealConfig,
    pub pipeline: PipelineToggle,
    /// Cells whose model would exceed this many variables are skipped.
    pub max_variables: usize,
    /// Grid cells solved concurrently.
    pub workers: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            graphs: Vec::new(),
            ks: vec![2, 3],
            epsilons: vec![0.0, 0.01, 0.03, 0.05],
            solver_id: "sa".into(),
            penalty: "auto".into(),
            formulation: Formulation::Auto,
            anneal: AnnealConfig {
                time_limit: Some(60.0),
                ..AnnealConfig::default()
            },
            pipeline: PipelineToggle::default(),
            max_variables: 4_000_000,
            workers: 1,
        }
    }
}

#[derive(Serialize)]
struct DigestInput<'a> {
    solver_id: &'a str,
    penalty: String,
    formulation: Formulation,
    anneal: &'a AnnealConfig,
    pipeline: Option<&'a PipelineConfig>,
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: BenchConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn penalty(&self) -> Result<Penalty> {
        self.penalty.parse()
    }

    pub fn validate(&self) -> Result<()> {
        self.penalty()?;
        self.anneal.validate()?;
        if self.ks.iter().any(|&k| k < 2) {
            return Err(Error::InvalidArgument("every k must be >= 2".into()));
        }
        if self.epsilons.iter().any(|e| !(0.0..1.0).contains(e)) {
            return Err(Error::InvalidArgument("epsilons must lie in [0, 1)".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("workers must be >= 1".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 prefix over every parameter that can change a solver's
    /// output. Graph list, grids, caps and worker count are excluded.
    pub fn digest(&self) -> String {
        let input = DigestInput {
            solver_id: &self.solver_id,
            penalty: self.penalty().map(|p| p.to_string()).unwrap_or_else(|_| self.penalty.clone()),
            formulation: self.formulation,
            anneal: &self.anneal,
            pipeline: self.pipeline.enabled.then_some(&self.pipeline.params),
        };
        let bytes = serde_json::to_vec(&input).expect("digest input serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

pub fn load_graphs(paths: &[PathBuf]) -> Result<Vec<Graph>> {
    paths.iter().map(|p| read_graph(p)).collect()
}

fn model_variables(n: usize, k: usize, epsilon: f64) -> usize {
    // Indicators plus a generous slack allowance.
    let slack = balance_bounds(n, k, epsilon)
        .map(|(lo, hi)| 64 - (hi - lo).leading_zeros() as usize)
        .unwrap_or(0);
    if k == 2 {
        n + slack
    } else {
        n * k + k * slack
    }
}

fn run_cell(id: &str, g: &Graph, k: usize, epsilon: f64, cfg: &BenchConfig, digest: &str) -> RunRecord {
    let mut rec = RunRecord::empty(id, &cfg.solver_id, k, epsilon, Status::Ok);
    rec.n = Some(g.n());
    rec.d_avg = Some(g.avg_degree());
    rec.seed = Some(cfg.anneal.seed);
    rec.time_limit = cfg.anneal.time_limit;
    rec.config_digest = Some(digest.to_string());
    if k > g.n() {
        rec.status = Status::Skipped;
        rec.note = Some(format!("k = {k} exceeds n = {}", g.n()));
        return rec;
    }
    let vars = model_variables(g.n(), k, epsilon);
    if vars > cfg.max_variables {
        rec.status = Status::Skipped;
        rec.note = Some(format!("model needs {vars} variables, cap is {}", cfg.max_variables));
        return rec;
    }
    let penalty = match cfg.penalty() {
        Ok(p) => p,
        Err(e) => {
            rec.status = Status::Failed;
            rec.note = Some(e.to_string());
            return rec;
        }
    };
    let outcome = if cfg.pipeline.enabled {
        sparsify_pipeline(g, k, epsilon, penalty, &cfg.anneal, &cfg.pipeline.params, cfg.anneal.seed).map(|r| {
            let sparse_cut = r.repetitions[r.best_repetition].sparse_cut;
            (r.penalty, sparse_cut, r.projected_cut, true, r.wall_time)
        })
    } else {
        solve_partition(g, k, epsilon, penalty, cfg.formulation, &cfg.anneal).map(|r| {
            (r.penalty, r.cut_raw, r.cut_repaired, r.feasibility.is_feasible(), r.solve.wall_time)
        })
    };
    match outcome {
        Ok((penalty, cut_raw, cut_repaired, feasible, wall_time)) => {
            rec.penalty = Some(penalty);
            rec.cut_raw = Some(cut_raw);
            rec.cut_repaired = Some(cut_repaired);
            rec.feasible = Some(feasible);
            rec.wall_time = Some(wall_time);
        }
        Err(e) => {
            rec.status = Status::Failed;
            rec.note = Some(e.to_string());
        }
    }
    rec
}

/// One record per `(graph, k, epsilon)` in graph-major order; unnamed graphs
/// are called `graph<index>`. Ratios are filled in from `registry`. Cells that cannot run are recorded with a
/// reason instead of a number.
pub fn run_grid(graphs: &[Graph], cfg: &BenchConfig, registry: &BestKnown) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let digest = cfg.digest();
    let cells: Vec<(usize, usize, f64)> = (0..graphs.len())
        .flat_map(|gi| cfg.ks.iter().flat_map(move |&k| cfg.epsilons.iter().map(move |&e| (gi, k, e))))
        .collect();
    let ids: Vec<String> = graphs
        .iter()
        .enumerate()
        .map(|(i, g)| g.name().map_or_else(|| format!("graph{i}"), str::to_string))
        .collect();
    let run = |&(gi, k, e): &(usize, usize, f64)| {
        log::info!("bench: {} k={} epsilon={}", ids[gi], k, e);
        run_cell(&ids[gi], &graphs[gi], k, e, cfg, &digest)
    };

    #[cfg(feature = "parallel")]
    let mut records: Vec<RunRecord> = {
        use rayon::prelude::*;
        if cfg.workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            pool.install(|| cells.par_iter().map(run).collect())
        } else {
            cells.iter().map(run).collect()
        }
    };
    #[cfg(not(feature = "parallel"))]
    let mut records: Vec<RunRecord> = cells.iter().map(run).collect();

    annotate(&mut records, registry);
    Ok(records)
}

#[derive(Debug, Deserialize)]
struct ExternalRow {
    graph_id: String,
    solver_id: String,
    k: usize,
    epsilon: f64,
    cut: Option<String>,
    time_limit: Option<f64>,
}

/// Reads external solver results with columns
/// `graph_id,solver_id,k,epsilon,cut` and an optional `time_limit`.
/// An empty cut or a negative value marks a missing result. Repeated
/// `(graph, solver, k, epsilon)` rows keep the last one.
pub fn ingest_external(r: impl Read, registry: &BestKnown) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut order: Vec<(String, String, usize, i64)> = Vec::new();
    let mut rows: HashMap<(String, String, usize, i64), RunRecord> = HashMap::new();
    for (i, row) in rdr.deserialize().enumerate() {
        let row: ExternalRow = row?;
        let cut = match row.cut.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(s) => {
                let v: i64 = s
                    .parse()
                    .map_err(|_| Error::parse(i + 2, format!("cut `{s}` is not an integer")))?;
                (v >= 0).then_some(v as usize)
            }
        };
        let status = if cut.is_some() { Status::External } else { Status::Missing };
        let mut rec = RunRecord::empty(&row.graph_id, &row.solver_id, row.k, row.epsilon, status);
        if let Some((n, d)) = registry.graph_meta(&row.graph_id) {
            rec.n = Some(n);
            rec.d_avg = Some(d);
        }
        rec.cut_repaired = cut;
        rec.time_limit = row.time_limit;
        let key = (row.graph_id, row.solver_id, row.k, eps_key(row.epsilon));
        if rows.insert(key.clone(), rec).is_some() {
            log::warn!("duplicate external row for {key:?}; keeping the last one");
        } else {
            order.push(key);
        }
    }
    let mut out: Vec<RunRecord> = order.into_iter().map(|key| rows.remove(&key).unwrap()).collect();
    annotate(&mut out, registry);
    Ok(out)
}

pub fn ingest_external_path(path: &Path, registry: &BestKnown) -> Result<Vec<RunRecord>> {
    ingest_external(std::fs::File::open(path)?, registry)
}

/// Concatenates internal and external records and recomputes the
/// per-cell reference, ratios and minimum flags over the union.
pub fn merge(internal: Vec<RunRecord>, external: Vec<RunRecord>, registry: &BestKnown) -> Vec<RunRecord> {
    let mut all = internal;
    all.extend(external);
    annotate(&mut all, registry);
    all
}

/// Fills `best_known`, `reference`, `approximation_ratio`, `is_min` and
/// `new_best`. Cells missing from the registry fall back to the best
/// observed cut.
pub fn annotate(records: &mut [RunRecord], registry: &BestKnown) {
    let mut observed: HashMap<(String, usize, i64), usize> = HashMap::new();
    for r in records.iter() {
        if let Some(c) = r.cut_repaired {
            observed.entry(r.cell()).and_modify(|m| *m = (*m).min(c)).or_insert(c);
        }
    }
    for r in records.iter_mut() {
        let min = observed.get(&r.cell()).copied();
        let (reference, best) = match registry.get(&r.graph_id, r.k, r.epsilon) {
            Some(b) => (Some(Reference::BestKnown), Some(b)),
            None => (min.map(|_| Reference::BestObserved), min),
        };
        r.best_known = best;
        r.reference = reference;
        r.is_min = r.cut_repaired.is_some() && r.cut_repaired == min;
        r.new_best = reference == Some(Reference::BestKnown) && matches!((r.cut_repaired, best), (Some(c), Some(b)) if c < b);
        r.approximation_ratio = match (r.cut_repaired, best) {
            (Some(c), Some(b)) => approximation_ratio(c, b),
            _ => None,
        };
        if r.cut_repaired.is_some() && best == Some(0) && r.approximation_ratio.is_none() {
            r.note.get_or_insert_with(|| "ratio undefined: best-known cut is 0".into());
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

pub fn emit(records: &[RunRecord], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => emit_csv(records),
        OutputFormat::Json => Ok(serde_json::to_string_pretty(records)? + "\n"),
        OutputFormat::Markdown => emit_markdown(records),
    }
}

pub fn parse_records_json(text: &str) -> Result<Vec<RunRecord>> {
    Ok(serde_json::from_str(text)?)
}

fn emit_csv(records: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if records.is_empty() {
        // Header only; serde cannot derive it without a row.
        let header = serde_json::to_value(RunRecord::empty("", "", 0, 0.0, Status::Ok))?;
        let keys: Vec<String> = header.as_object().map(|o| o.keys().cloned().collect()).unwrap_or_default();
        w.write_record(keys)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn percent(epsilon: f64) -> String {
    let p = epsilon * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{}%", p.round() as i64)
    } else {
        format!("{p}%")
    }
}

/// One table per `(k, epsilon)` block, rows per graph, a column per solver;
/// the lowest cut of each row is bold.
fn emit_markdown(records: &[RunRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to render".into()));
    }
    let mut solvers: Vec<&str> = Vec::new();
    let mut graphs: Vec<&str> = Vec::new();
    for r in records {
        if !solvers.contains(&r.solver_id.as_str()) {
            solvers.push(&r.solver_id);
        }
        if !graphs.contains(&r.graph_id.as_str()) {
            graphs.push(&r.graph_id);
        }
    }
    let mut blocks: BTreeMap<(usize, i64), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        blocks.entry((r.k, eps_key(r.epsilon))).or_default().push(r);
    }

    let mut out = String::new();
    for ((k, _), rows) in &blocks {
        out.push_str(&format!("### k = {k}, epsilon = {}\n\n", percent(rows[0].epsilon)));
        out.push_str("| graph | n | d_avg | best known |");
        for s in &solvers {
            out.push_str(&format!(" {s} |"));
        }
        out.push_str("\n|---|---:|---:|---:|");
        out.push_str(&"---:|".repeat(solvers.len()));
        out.push('\n');
        for g in &graphs {
            let cell: Vec<&&RunRecord> = rows.iter().filter(|r| r.graph_id == *g).collect();
            if cell.is_empty() {
                continue;
            }
            let first = cell[0];
            let n = cell.iter().find_map(|r| r.n).map_or("-".into(), |n| n.to_string());
            let d = cell.iter().find_map(|r| r.d_avg).map_or("-".into(), |d| format!("{d:.2}"));
            let best = match (first.best_known, first.reference) {
                (Some(b), Some(Reference::BestKnown)) => b.to_string(),
                (Some(b), _) => format!("{b}*"),
                _ => "-".into(),
            };
            out.push_str(&format!("| {g} | {n} | {d} | {best} |"));
            for s in &solvers {
                let text = match cell.iter().find(|r| r.solver_id == *s) {
                    Some(r) => match r.cut_repaired {
                        Some(c) if r.is_min => format!("**{c}**"),
                        Some(c) => c.to_string(),
                        None => "n/a".into(),
                    },
                    None => String::new(),
                };
                out.push_str(&format!(" {text} |"));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    if records.iter().any(|r| r.reference == Some(Reference::BestObserved)) {
        out.push_str("`*` best observed cut; no registry entry.\n");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators::*;

    const ADD20: &str = "graph_id,solver_id,k,epsilon,cut\n\
        add20,DA,2,0,596\nadd20,KaHIP,2,0,613\nadd20,Gurobi,2,0,596\n";

    fn small_cfg() -> BenchConfig {
        BenchConfig {
            ks: vec![2],
            epsilons: vec![0.0],
            anneal: AnnealConfig { sweeps: 300, replicas: 2, time_limit: None, ..AnnealConfig::default() },
            ..BenchConfig::default()
        }
    }

    #[test]
    fn bundled_registry() {
        let b = BestKnown::bundled();
        assert_eq!(b.len(), 64);
        assert_eq!(b.get("add20", 2, 0.0), Some(596));
        assert_eq!(b.get("uk", 2, 0.0), Some(19));
        assert_eq!(b.get("3elt", 2, 0.0), Some(90));
        assert_eq!(b.get("memplus", 2, 0.05), Some(5253));
        assert_eq!(b.get("add20", 3, 0.0), None);
        assert_eq!(b.graph_meta("uk"), Some((4824, 1.42)));
    }

    #[test]
    fn registry_extension_keeps_lower_cut() {
        let mut b = BestKnown::bundled();
        b.extend_from_reader("graph_id,n,d_avg,k,epsilon,cut\nadd20,,,2,0,590\nadd20,,,2,0.01,600\nnew,,,3,0.03,7\n".as_bytes())
            .unwrap();
        assert_eq!(b.get("add20", 2, 0.0), Some(590));
        assert_eq!(b.get("add20", 2, 0.01), Some(585));
        assert_eq!(b.get("new", 3, 0.03), Some(7));
    }

    #[test]
    fn ingest_add20_row() {
        let recs = ingest_external(ADD20.as_bytes(), &BestKnown::bundled()).unwrap();
        assert_eq!(recs.len(), 3);
        let flags: Vec<bool> = recs.iter().map(|r| r.is_min).collect();
        assert_eq!(flags, vec![true, false, true]);
        assert!((recs[1].approximation_ratio.unwrap() - 1.0285).abs() < 1e-4);
        assert_eq!(recs[0].approximation_ratio, Some(1.0));
        assert_eq!(recs[0].n, Some(2395));
        assert!(recs.iter().all(|r| !r.new_best));
    }

    #[test]
    fn ingest_edge_cases() {
        let reg = BestKnown::bundled();
        assert!(ingest_external("graph_id,solver_id,k,epsilon,cut\n".as_bytes(), &reg).unwrap().is_empty());

        let text = "graph_id,solver_id,k,epsilon,cut\nadd20,X,2,0,500\nadd20,X,2,0,580\nmine,Y,3,0.05,\nmine,Z,3,0.05,-1\nmine,W,3,0.05,12\n";
        let recs = ingest_external(text.as_bytes(), &reg).unwrap();
        assert_eq!(recs.len(), 4);
        assert_eq!(recs[0].cut_repaired, Some(580));
        assert!(recs[0].new_best);
        assert!(recs[0].approximation_ratio.unwrap() < 1.0);
        assert_eq!(recs[1].status, Status::Missing);
        assert_eq!(recs[2].cut_repaired, None);
        assert_eq!(recs[1].n, None);
        assert_eq!(recs[3].reference, Some(Reference::BestObserved));
        assert_eq!(recs[3].approximation_ratio, Some(1.0));

        let bad = "graph_id,solver_id,k,epsilon,cut\nadd20,X,2,0,abc\n";
        assert!(ingest_external(bad.as_bytes(), &reg).unwrap_err().is_parse());
    }

    #[test]
    fn grid_arity_and_order() {
        let graphs = vec![path(6).with_name("p6"), cycle(8).with_name("c8")];
        let cfg = BenchConfig { ks: vec![2, 3], epsilons: vec![0.0, 0.01, 0.03, 0.05], ..small_cfg() };
        let recs = run_grid(&graphs, &cfg, &BestKnown::default()).unwrap();
        assert_eq!(recs.len(), 16);
        assert_eq!(recs[0].graph_id, "p6");
        assert_eq!((recs[5].k, recs[5].epsilon), (3, 0.01));
        assert_eq!(recs[8].graph_id, "c8");
        for r in &recs {
            assert_eq!(r.status, Status::Ok);
            assert_eq!(r.reference, Some(Reference::BestObserved));
            assert!(r.is_min);
        }
        let one = run_grid(&graphs[..1], &small_cfg(), &BestKnown::default()).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].cut_repaired, Some(1));
    }

    #[test]
    fn oversized_and_impossible_cells_are_skipped() {
        let graphs = vec![path(4).with_name("p4")];
        let cfg = BenchConfig { ks: vec![2, 5], max_variables: 100, ..small_cfg() };
        let recs = run_grid(&graphs, &cfg, &BestKnown::default()).unwrap();
        assert_eq!(recs[1].status, Status::Skipped);
        assert!(recs[1].cut_repaired.is_none());
        let cfg = BenchConfig { max_variables: 2, ..small_cfg() };
        let recs = run_grid(&graphs, &cfg, &BestKnown::default()).unwrap();
        assert_eq!(recs[0].status, Status::Skipped);
        assert!(recs[0].note.as_ref().unwrap().contains("cap"));
    }

    #[test]
    fn digest_tracks_solver_parameters() {
        let base = small_cfg();
        let d = base.digest();
        assert_eq!(d, small_cfg().digest());
        let mut other = base.clone();
        other.graphs.push("x.graph".into());
        other.workers = 4;
        other.epsilons.push(0.05);
        assert_eq!(other.digest(), d);
        for change in [
            |c: &mut BenchConfig| c.anneal.sweeps += 1,
            |c: &mut BenchConfig| c.anneal.seed = 9,
            |c: &mut BenchConfig| c.anneal.replicas = 3,
            |c: &mut BenchConfig| c.anneal.temp_final = 0.2,
            |c: &mut BenchConfig| c.penalty = "7".into(),
            |c: &mut BenchConfig| c.solver_id = "other".into(),
            |c: &mut BenchConfig| c.pipeline.enabled = true,
            |c: &mut BenchConfig| c.formulation = Formulation::OneHot,
        ] {
            let mut c = base.clone();
            change(&mut c);
            assert_ne!(c.digest(), d);
        }
        // Pipeline parameters only matter when the pipeline runs.
        let mut c = base.clone();
        c.pipeline.params.keep_ratio = 0.5;
        assert_eq!(c.digest(), d);
        c.pipeline.enabled = true;
        let mut c2 = c.clone();
        c2.pipeline.params.keep_ratio = 0.6;
        assert_ne!(c.digest(), c2.digest());
    }

    #[test]
    fn toml_config() {
        let cfg = BenchConfig::from_toml(
            "graphs = [\"a.graph\"]\nks = [2]\nepsilons = [0.0, 0.03]\npenalty = \"5\"\n[anneal]\nsweeps = 50\nseed = 3\n[pipeline]\nenabled = true\nrepeats = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.ks, vec![2]);
        assert_eq!(cfg.anneal.sweeps, 50);
        assert_eq!(cfg.anneal.replicas, AnnealConfig::default().replicas);
        assert_eq!(cfg.penalty().unwrap(), Penalty::Fixed(5.0));
        assert!(cfg.pipeline.enabled);
        assert_eq!(cfg.pipeline.params.repeats, 4);
        assert_eq!(cfg.pipeline.params.keep_ratio, 0.7);
        assert!(BenchConfig::from_toml("penalty = \"none\"").is_err());
        assert!(BenchConfig::from_toml("ks = [1]").is_err());
        assert!(BenchConfig::from_toml("ks = ").unwrap_err().is_parse());
    }

    #[test]
    fn emit_formats() {
        let recs = ingest_external(ADD20.as_bytes(), &BestKnown::bundled()).unwrap();
        let csv = emit(&recs[..1], OutputFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("graph_id,n,d_avg,solver_id,k,epsilon,"));
        assert_eq!(emit(&[], OutputFormat::Csv).unwrap().lines().count(), 1);

        let json = emit(&recs, OutputFormat::Json).unwrap();
        assert_eq!(parse_records_json(&json).unwrap(), recs);

        let md = emit(&recs, OutputFormat::Markdown).unwrap();
        assert!(md.contains("### k = 2, epsilon = 0%"));
        assert!(md.contains("| add20 | 2395 | 3.12 | 596 | **596** | 613 | **596** |"), "{md}");
        assert!(emit(&[], OutputFormat::Markdown).is_err());
        assert!(matches!("xml".parse::<OutputFormat>(), Err(Error::UnknownFormat(_))));
        assert_eq!("MD".parse::<OutputFormat>().unwrap(), OutputFormat::Markdown);
    }

    #[test]
    fn merged_table_bolds_across_sources() {
        let graphs = vec![path(6).with_name("p6")];
        let internal = run_grid(&graphs, &small_cfg(), &BestKnown::default()).unwrap();
        let ext = "graph_id,solver_id,k,epsilon,cut\np6,ext,2,0,3\n";
        let external = ingest_external(ext.as_bytes(), &BestKnown::default()).unwrap();
        let all = merge(internal, external, &BestKnown::default());
        assert_eq!(all.len(), 2);
        assert!(all[0].is_min);
        assert!(!all[1].is_min);
        assert_eq!(all[1].approximation_ratio, Some(3.0));
        let md = emit(&all, OutputFormat::Markdown).unwrap();
        assert!(md.contains("| p6 | 6 | 0.83 | 1* | **1** | 3 |"), "{md}");
    }
}
