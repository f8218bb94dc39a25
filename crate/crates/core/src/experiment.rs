//! Ratio studies `‖S‖ / M` over seeded ensembles of trees.
//!
//! Instance `i` draws everything from `derive_seed(config.seed, i)`: the
//! random tree from stream 0 of that seed, `u` from stream 1, `w` from
//! stream 2 and the solver restarts from stream 3. Records are sorted by
//! `(instance_id, p, q)`.

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::{theorem1_bound, theorem2_bound, theorem2_vertex_form};
use crate::error::{Error, Result};
use crate::generators::{
    derive_seed, gen_chain, gen_random_tree, gen_regular_tree, gen_weights, LevelProfile,
    LevelWeights, TreeModel, WeightLaw, DEFAULT_VERTEX_CAP,
};
use crate::io::Instance;
use crate::operator::{mixed_operator_norm, operator_norm, SolverOptions};
use crate::partition::{build_partition, partition_stats, DEFAULT_SIGMA};
use crate::tree::{Exponents, RootedTree, WeightPair};

/// CSV header of [`write_csv`]; part of the stable interface.
pub const CSV_COLUMNS: [&str; 13] = [
    "instance_id",
    "n",
    "p",
    "q",
    "M",
    "norm_lb",
    "ratio",
    "restarts",
    "iters",
    "converged",
    "block_count",
    "max_vmax_card",
    "wall_ms",
];

/// Shape family of an ensemble. The meaning of a size depends on the family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Path with `size` vertices.
    Chain,
    /// Root with `size` leaf children.
    Star,
    /// Exactly `b`-ary tree of depth `size`.
    Regular(usize),
    /// Random tree with `size` vertices.
    Random(TreeModel),
}

/// Parses `chain`, `star`, `regular:b`, `uniform-attachment` or
/// `bounded-branching:k`.
impl FromStr for Family {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        match spec.split_once(':') {
            None if spec == "chain" => Ok(Family::Chain),
            None if spec == "star" => Ok(Family::Star),
            Some(("regular", b)) => match b.trim().parse() {
                Ok(b) if b >= 2 => Ok(Family::Regular(b)),
                _ => Err(Error::InfeasibleModel(format!("bad branching in {spec:?}"))),
            },
            _ => spec.parse().map(Family::Random),
        }
    }
}

impl Family {
    /// Vertex count of an instance of the given size.
    pub fn vertex_count(&self, size: usize) -> u128 {
        match self {
            Family::Chain | Family::Random(_) => size as u128,
            Family::Star => size as u128 + 1,
            Family::Regular(b) => {
                let (mut level, mut total) = (1u128, 1u128);
                for _ in 0..size {
                    level = level.saturating_mul(*b as u128);
                    total = total.saturating_add(level);
                }
                total
            }
        }
    }

    pub fn tree(&self, size: usize, seed: u64) -> Result<RootedTree> {
        match self {
            Family::Chain => gen_chain(size),
            Family::Star => {
                let parents: Vec<_> = (0..=size).map(|k| (k > 0).then_some(0)).collect();
                RootedTree::from_parents(&parents)
            }
            Family::Regular(b) => gen_regular_tree(&LevelProfile::new(vec![*b; size])?),
            Family::Random(model) => gen_random_tree(size, seed, *model),
        }
    }
}

/// Draws `u` and `w` for `tree` from the streams of `seed` described in the
/// module docs.
pub fn seeded_instance(
    tree: RootedTree,
    u: &WeightLaw,
    w: &WeightLaw,
    seed: u64,
) -> Result<Instance> {
    let uw = gen_weights(&tree, derive_seed(seed, 1), u)?;
    let ww = gen_weights(&tree, derive_seed(seed, 2), w)?;
    let weights = WeightPair::for_tree(&tree, uw, ww)?;
    Instance::new(tree, weights)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    /// See [`Family`] for the accepted strings.
    pub model: String,
    pub sizes: Vec<usize>,
    /// Instances per size.
    #[serde(default = "one")]
    pub count: usize,
    /// Weight law strings, e.g. `loguniform:0.1:10`.
    pub u: String,
    pub w: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub certificate_starts: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            restarts: d.restarts,
            max_iter: d.max_iter,
            tol: d.tol,
            certificate_starts: d.include_certificate_starts,
        }
    }
}

impl SolverConfig {
    pub fn options(&self, seed: u64) -> SolverOptions {
        SolverOptions {
            restarts: self.restarts,
            max_iter: self.max_iter,
            tol: self.tol,
            include_certificate_starts: self.certificate_starts,
            seed,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleSpec,
    /// `(p, q)` pairs with `1 < p < q < ∞`.
    pub exponents: Vec<(f64, f64)>,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Partition statistics are computed for every sigma; the CSV columns
    /// carry the first one.
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Also estimate the `l_q(l_p) -> l_q` norm and its level bounds.
    #[serde(default)]
    pub mixed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
}

fn one() -> usize {
    1
}

fn default_sigmas() -> Vec<f64> {
    vec![DEFAULT_SIGMA]
}

/// Parsed and validated form of an [`ExperimentConfig`].
struct Plan {
    family: Family,
    u: WeightLaw,
    w: WeightLaw,
    exponents: Vec<Exponents>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    fn plan(&self) -> Result<Plan> {
        let ens = &self.ensemble;
        let family: Family = ens.model.parse()?;
        if ens.sizes.is_empty() || ens.count == 0 {
            return Err(Error::InvalidSize(0));
        }
        for &s in &ens.sizes {
            let n = family.vertex_count(s);
            if n > DEFAULT_VERTEX_CAP as u128 {
                return Err(Error::SizeCapExceeded {
                    requested: n,
                    cap: DEFAULT_VERTEX_CAP,
                });
            }
            if n == 0 {
                return Err(Error::InvalidSize(s));
            }
        }
        if self.exponents.is_empty() {
            return Err(Error::InvalidExponent("empty exponent grid".into()));
        }
        let exponents = self
            .exponents
            .iter()
            .map(|&(p, q)| Exponents::strict(p, q))
            .collect::<Result<_>>()?;
        if self.sigmas.is_empty() {
            return Err(Error::InvalidSigma(f64::NAN));
        }
        if let Some(&s) = self.sigmas.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
            return Err(Error::InvalidSigma(s));
        }
        Ok(Plan {
            family,
            u: ens.u.parse()?,
            w: ens.w.parse()?,
            exponents,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionSummary {
    pub sigma: f64,
    pub block_count: usize,
    pub max_vmax_card: usize,
    pub min_succession_ratio: f64,
    pub max_succession_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedSummary {
    pub mixed_norm_lb: f64,
    /// `max_v u(v) ‖w‖_q(T_v)`.
    pub theorem2_vertex: f64,
    /// Level form, present for regular trees with level-constant weights.
    pub theorem2_level: Option<f64>,
    /// `mixed_norm_lb / theorem2_vertex`.
    pub mixed_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub instance_id: usize,
    pub n: usize,
    pub p: f64,
    pub q: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub norm_lb: f64,
    /// `norm_lb / M`, taken as 1 when both vanish.
    pub ratio: f64,
    pub restarts: usize,
    pub iters: usize,
    pub converged: bool,
    pub block_count: usize,
    pub max_vmax_card: usize,
    pub wall_ms: f64,
    pub partitions: Vec<PartitionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixed: Option<MixedSummary>,
    /// Set when this record failed; the numeric fields are then NaN or 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExperimentRecord {
    fn failed(instance_id: usize, n: usize, e: &Exponents, err: &Error) -> Self {
        Self {
            instance_id,
            n,
            p: e.p,
            q: e.q,
            m: f64::NAN,
            norm_lb: f64::NAN,
            ratio: f64::NAN,
            restarts: 0,
            iters: 0,
            converged: false,
            block_count: 0,
            max_vmax_card: 0,
            wall_ms: 0.0,
            partitions: Vec::new(),
            mixed: None,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub p: f64,
    pub q: f64,
    /// Records without an error.
    pub count: usize,
    pub failures: usize,
    pub min_ratio: f64,
    pub median_ratio: f64,
    pub max_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_mixed_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub records: Vec<ExperimentRecord>,
    pub summary: Vec<SummaryRow>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 && den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// Level values of a weight vector that is constant on each level.
fn level_values(t: &RootedTree, x: &[f64]) -> Vec<f64> {
    t.level_sets().iter().map(|level| x[level[0]]).collect()
}

fn is_level_constant(law: &WeightLaw) -> bool {
    !matches!(law, WeightLaw::LogUniform { .. })
}

fn evaluate(
    config: &ExperimentConfig,
    plan: &Plan,
    inst: &Instance,
    e: &Exponents,
    opts: &SolverOptions,
) -> Result<ExperimentRecord> {
    let clock = Instant::now();
    let (t, wt) = (&inst.tree, &inst.weights);
    let bound = theorem1_bound(t, wt, e)?;
    let est = operator_norm(t, wt, e, opts)?;
    let partitions = config
        .sigmas
        .iter()
        .map(|&sigma| {
            let part = build_partition(t, &wt.w, e.q, sigma)?;
            let st = partition_stats(t, &wt.w, &part)?;
            Ok(PartitionSummary {
                sigma,
                block_count: st.block_count,
                max_vmax_card: st.max_vmax_card,
                min_succession_ratio: st.min_succession_ratio,
                max_succession_ratio: st.max_succession_ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mixed = if config.mixed {
        let lb = mixed_operator_norm(t, wt, e, opts)?.value;
        let vertex = theorem2_vertex_form(t, wt, e)?.value;
        let level = match plan.family {
            Family::Regular(b) if is_level_constant(&plan.u) && is_level_constant(&plan.w) => {
                let profile = LevelProfile::new(vec![b; t.max_depth()])?;
                let lw = LevelWeights::new(level_values(t, &wt.u), level_values(t, &wt.w))?;
                Some(theorem2_bound(&profile, &lw, e)?.value)
            }
            _ => None,
        };
        Some(MixedSummary {
            mixed_norm_lb: lb,
            theorem2_vertex: vertex,
            theorem2_level: level,
            mixed_ratio: ratio(lb, vertex),
        })
    } else {
        None
    };
    Ok(ExperimentRecord {
        instance_id: 0,
        n: t.len(),
        p: e.p,
        q: e.q,
        m: bound.value,
        norm_lb: est.value,
        ratio: ratio(est.value, bound.value),
        restarts: est.restarts_used,
        iters: est.iterations,
        converged: est.converged,
        block_count: partitions[0].block_count,
        max_vmax_card: partitions[0].max_vmax_card,
        wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        partitions,
        mixed,
        error: None,
    })
}

fn median(sorted: &[f64]) -> f64 {
    let k = sorted.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

fn summarize(exponents: &[Exponents], records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    exponents
        .iter()
        .map(|e| {
            let rows: Vec<_> = records
                .iter()
                .filter(|r| r.p == e.p && r.q == e.q)
                .collect();
            let ok: Vec<_> = rows.iter().filter(|r| r.error.is_none()).collect();
            let mut ratios: Vec<f64> = ok.iter().map(|r| r.ratio).collect();
            ratios.sort_by(f64::total_cmp);
            let mixed: Vec<f64> = ok
                .iter()
                .filter_map(|r| r.mixed.as_ref().map(|m| m.mixed_ratio))
                .collect();
            SummaryRow {
                p: e.p,
                q: e.q,
                count: ok.len(),
                failures: rows.len() - ok.len(),
                min_ratio: ratios.first().copied().unwrap_or(f64::NAN),
                median_ratio: median(&ratios),
                max_ratio: ratios.last().copied().unwrap_or(f64::NAN),
                max_mixed_ratio: (!mixed.is_empty())
                    .then(|| mixed.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            }
        })
        .collect()
}

/// Runs the whole grid. Configuration errors abort; a failure on a single
/// instance becomes a record with `error` set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let plan = config.plan()?;
    let ens = &config.ensemble;
    let mut records = Vec::new();
    for (k, &size) in ens.sizes.iter().enumerate() {
        for j in 0..ens.count {
            let id = k * ens.count + j;
            let seed = derive_seed(config.seed, id as u64);
            let n = plan.family.vertex_count(size) as usize;
            let inst = plan
                .family
                .tree(size, derive_seed(seed, 0))
                .and_then(|t| seeded_instance(t, &plan.u, &plan.w, seed));
            let opts = config.solver.options(derive_seed(seed, 3));
            for e in &plan.exponents {
                let rec = match &inst {
                    Ok(i) => evaluate(config, &plan, i, e, &opts),
                    Err(err) => Err(Error::InfeasibleModel(err.to_string())),
                };
                records.push(match rec {
                    Ok(mut r) => {
                        r.instance_id = id;
                        r
                    }
                    Err(err) => ExperimentRecord::failed(id, n, e, &err),
                });
            }
        }
    }
    records.sort_by(|a, b| {
        (a.instance_id, a.p, a.q)
            .partial_cmp(&(b.instance_id, b.p, b.q))
            .expect("finite exponents")
    });
    let summary = summarize(&plan.exponents, &records);
    Ok(ExperimentOutput {
        config: config.clone(),
        records,
        summary,
    })
}

/// Writes the 13-column CSV. Floats use the shortest decimal that round-trips.
pub fn write_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    wr.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in records {
        wr.write_record([
            r.instance_id.to_string(),
            r.n.to_string(),
            r.p.to_string(),
            r.q.to_string(),
            r.m.to_string(),
            r.norm_lb.to_string(),
            r.ratio.to_string(),
            r.restarts.to_string(),
            r.iters.to_string(),
            r.converged.to_string(),
            r.block_count.to_string(),
            r.max_vmax_card.to_string(),
            format!("{:.3}", r.wall_ms),
        ])
        .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Plain-text summary table.
pub fn write_summary<W: Write>(summary: &[SummaryRow], mut out: W) -> Result<()> {
    writeln!(
        out,
        "{:>6} {:>6} {:>6} {:>6} {:>12} {:>12} {:>12}",
        "p", "q", "count", "failed", "min_ratio", "median_ratio", "max_ratio"
    )?;
    for s in summary {
        write!(
            out,
            "{:>6} {:>6} {:>6} {:>6} {:>12.6} {:>12.6} {:>12.6}",
            s.p, s.q, s.count, s.failures, s.min_ratio, s.median_ratio, s.max_ratio
        )?;
        if let Some(m) = s.max_mixed_ratio {
            write!(out, "  max_mixed_ratio={m:.6}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
