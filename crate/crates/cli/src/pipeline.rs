//! equilibrium → sample → stats, with stages skipped when their inputs hash to a cached record.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mfgas_core::equilibrium::{default_geometry, solve_equilibrium, DensityGrid, GridGeometry, SolverOptions};
use mfgas_core::pointprocess::Verdict;
use mfgas_core::pointprocess::{
    edge_analysis, gumbel_analysis, gumbel_statistic_from_max, BulkAnalysis, EdgeFrame, StatReport,
};
use mfgas_core::sampler::{
    density_of_states_histogram, estimate_partition_ratio, replica_rng, run_chain_from, sample_iid, wegner_sup_ratio,
    ChainOptions, PartitionOptions, RecordMode, Tridiagonal,
};
use mfgas_core::{GasError, GasParameters, InteractionKernel, ParticleSet, Potential};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Analysis, ExperimentConfig, Method, Record};
use crate::error::CliError;
use crate::store::{file_hash, hash_json, json_bytes, read_json, write_file, OutputFile, SampleTable};
use crate::validate::{has_errors, validate, Severity};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Equilibrium,
    Sample,
    Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub input_hash: String,
    pub cached: bool,
    pub seconds: f64,
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub analysis: Analysis,
    pub name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedVerdict {
    pub n: usize,
    #[serde(flatten)]
    pub verdict: VerdictRecord,
}

/// Everything needed to reproduce and audit a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub config: ExperimentConfig,
    pub stages: Vec<StageRecord>,
    pub warnings: Vec<String>,
    pub verdicts: Vec<NamedVerdict>,
    pub passed: bool,
    pub seconds: f64,
}

impl RunManifest {
    pub fn failed(&self) -> impl Iterator<Item = &NamedVerdict> {
        self.verdicts.iter().filter(|v| !v.verdict.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheEntry {
    input_hash: String,
    outputs: Vec<OutputFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EquilibriumSummary {
    gamma: f64,
    l_gamma: f64,
    residual: f64,
    iterations: usize,
    free_energy: f64,
    geometry: GridGeometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SampleSummary {
    n: usize,
    beta: f64,
    method: Method,
    dim: usize,
    frames: u64,
    counts: Vec<usize>,
    /// Metropolis only.
    #[serde(skip_serializing_if = "Option::is_none")]
    chains: Option<ChainSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ChainSummary {
    mean_acceptance: f64,
    flagged_replicas: usize,
    max_energy_drift: f64,
    max_energy_autocorrelation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StatsOutput {
    n: usize,
    verdicts: Vec<VerdictRecord>,
    reports: BTreeMap<String, serde_json::Value>,
}

struct Equilibrium {
    density: DensityGrid,
    l_gamma: f64,
    files: Vec<OutputFile>,
}

struct Runner<'a> {
    config: &'a ExperimentConfig,
    root: PathBuf,
    kernel: InteractionKernel,
    potential: Potential,
    stages: Vec<StageRecord>,
    warnings: Vec<String>,
}

/// Runs every stage and the analyses listed in the config.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<RunManifest, CliError> {
    run_stages(config, Stage::Stats, &config.stats.analyses)
}

/// Runs the stages up to `last`, computing `analyses` in the stats stage, and writes `manifest.json`.
pub fn run_stages(config: &ExperimentConfig, last: Stage, analyses: &[Analysis]) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let mut checked = config.clone();
    checked.stats.analyses = union(&config.stats.analyses, analyses);
    let findings = validate(&checked);
    if has_errors(&findings) {
        return Err(CliError::Validation(findings.into_iter().filter(|f| f.severity == Severity::Error).collect()));
    }
    let mut runner = Runner {
        config,
        root: config.run.out_dir.clone(),
        kernel: config.kernel().map_err(CliError::stage("validate"))?,
        potential: config.potential().map_err(CliError::stage("validate"))?,
        stages: Vec::new(),
        warnings: findings.iter().map(|f| f.to_string()).collect(),
    };
    let recorded = checked.stats.analyses.clone();
    let mut analyses = analyses.to_vec();
    analyses.sort();
    analyses.dedup();

    let mut verdicts = Vec::new();
    let mut solved: BTreeMap<u64, Equilibrium> = BTreeMap::new();
    for &n in &config.gas.n {
        let gamma = config.coupling(n);
        if let std::collections::btree_map::Entry::Vacant(slot) = solved.entry(gamma.to_bits()) {
            slot.insert(runner.equilibrium(gamma)?);
        }
        let eq = &solved[&gamma.to_bits()];
        if last == Stage::Equilibrium {
            continue;
        }
        let (table, sample_files) = runner.sample(n, eq, &recorded)?;
        if last == Stage::Sample || analyses.is_empty() {
            continue;
        }
        let out = runner.stats(n, eq, &table, &sample_files, &analyses)?;
        verdicts.extend(out.verdicts.into_iter().map(|verdict| NamedVerdict { n, verdict }));
    }

    let manifest = RunManifest {
        code_version: CODE_VERSION.to_string(),
        config: config.clone(),
        passed: verdicts.iter().all(|v| v.verdict.passed),
        stages: runner.stages,
        warnings: runner.warnings,
        verdicts,
        seconds: start.elapsed().as_secs_f64(),
    };
    write_file(&runner.root, Path::new("manifest.json"), &json_bytes(&manifest))?;
    Ok(manifest)
}

fn union(a: &[Analysis], b: &[Analysis]) -> Vec<Analysis> {
    let mut v: Vec<Analysis> = a.iter().chain(b).copied().collect();
    v.sort();
    v.dedup();
    v
}

/// Independent RNG seed for particle count `n` (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, n: usize) -> u64 {
    let mut z = seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn format_number(x: f64) -> String {
    format!("{x}").replace('-', "m")
}

impl Runner<'_> {
    /// Returns the outputs of a cached stage whose input hash and output hashes still match.
    fn cached(&self, key: &str, input_hash: &str) -> Option<Vec<OutputFile>> {
        let entry: CacheEntry = read_json(&self.cache_path(key)).ok()?;
        if entry.input_hash != input_hash {
            return None;
        }
        entry
            .outputs
            .iter()
            .all(|o| file_hash(&self.root.join(&o.path)).as_deref() == Some(o.sha256.as_str()))
            .then_some(entry.outputs)
    }

    fn cache_path(&self, key: &str) -> PathBuf {
        self.root.join("cache").join(format!("{}.json", key.replace('/', "_")))
    }

    fn record(&mut self, key: &str, input_hash: String, cached: bool, start: Instant, outputs: &[OutputFile]) {
        if !cached {
            let entry = CacheEntry { input_hash: input_hash.clone(), outputs: outputs.to_vec() };
            let rel = self.cache_path(key).strip_prefix(&self.root).map(Path::to_path_buf).unwrap_or_default();
            if let Err(e) = write_file(&self.root, &rel, &json_bytes(&entry)) {
                self.warnings.push(format!("could not write cache record for {key}: {e}"));
            }
        }
        self.stages.push(StageRecord {
            stage: key.to_string(),
            input_hash,
            cached,
            seconds: start.elapsed().as_secs_f64(),
            outputs: outputs.to_vec(),
        });
    }

    fn equilibrium(&mut self, gamma: f64) -> Result<Equilibrium, CliError> {
        let start = Instant::now();
        let c = self.config;
        let key = format!("equilibrium/gamma_{}", format_number(gamma));
        let input_hash =
            hash_json(&(CODE_VERSION, "equilibrium", &c.kernel, &c.potential, gamma.to_bits(), &c.equilibrium));
        let csv_rel = PathBuf::from(format!("{key}.csv"));
        let json_rel = PathBuf::from(format!("{key}.json"));

        if let Some(files) = self.cached(&key, &input_hash) {
            let summary: EquilibriumSummary = read_json(&self.root.join(&json_rel))?;
            let values = read_density(&self.root.join(&csv_rel), summary.geometry.dim())?;
            let density = DensityGrid::from_values(summary.geometry.clone(), values)
                .map_err(|e| CliError::data(&self.root.join(&csv_rel), e))?;
            self.record(&key, input_hash, true, start, &files);
            return Ok(Equilibrium { density, l_gamma: summary.l_gamma, files });
        }

        let stage = CliError::stage(key.clone());
        let geometry = match c.equilibrium.domain {
            Some([lo, hi]) => GridGeometry::Line { lo, hi, cells: c.equilibrium.cells },
            None => default_geometry(&self.kernel, &self.potential, gamma, c.equilibrium.cells).map_err(stage)?,
        };
        let opts = SolverOptions {
            damping: c.equilibrium.damping,
            tol: c.equilibrium.tol,
            max_iter: c.equilibrium.max_iter,
            ..SolverOptions::default()
        };
        let sol = solve_equilibrium(&self.kernel, &self.potential, gamma, &geometry, &opts)
            .map_err(CliError::stage(key.clone()))?;
        let density = sol.density().clone();
        let mut csv = String::from(if geometry.dim() == 1 { "x,density\n" } else { "x0,x1,density\n" });
        for i in 0..density.len() {
            for x in density.node(i) {
                csv.push_str(&format!("{x},"));
            }
            csv.push_str(&format!("{}\n", density.values()[i]));
        }
        let summary = EquilibriumSummary {
            gamma,
            l_gamma: sol.l_gamma(),
            residual: sol.residual(),
            iterations: sol.iterations(),
            free_energy: sol.free_energy(),
            geometry,
        };
        let files = vec![
            write_file(&self.root, &csv_rel, csv.as_bytes())?,
            write_file(&self.root, &json_rel, &json_bytes(&summary))?,
        ];
        self.record(&key, input_hash, false, start, &files);
        Ok(Equilibrium { density, l_gamma: sol.l_gamma(), files })
    }

    fn params(&self, n: usize) -> Result<GasParameters, GasError> {
        GasParameters::new(n, self.config.gas.gamma, self.kernel, self.potential.clone())?
            .with_beta(self.config.beta(n))
    }

    fn edge_frame(&self, n: usize, eq: &Equilibrium) -> Result<EdgeFrame, GasError> {
        let beta_n = self.config.beta(n) * n as f64;
        let frame = EdgeFrame::new(&self.potential, &self.kernel, n, beta_n, eq.l_gamma, &self.config.upsilon())?;
        frame.verify(self.config.edge.frame_threshold)?;
        Ok(frame)
    }

    fn bulk_analysis(&self, n: usize, eq: &Equilibrium) -> Result<BulkAnalysis, GasError> {
        let center = self.config.bulk_center();
        let rho = eq.density.density_at(&center);
        BulkAnalysis::new(center, n, rho, self.config.bulk.settings.clone())
    }

    fn sample(
        &mut self,
        n: usize,
        eq: &Equilibrium,
        analyses: &[Analysis],
    ) -> Result<(SampleTable, Vec<OutputFile>), CliError> {
        let start = Instant::now();
        let c = self.config;
        let key = format!("sample/n{n}");
        let stage = || CliError::stage(key.clone());
        let method = c.resolved_method(n);
        let keep = Keep {
            record: c.sampler.record,
            top_k: c.sampler.top_k,
            bulk: if analyses.contains(&Analysis::Bulk) {
                Some(self.bulk_analysis(n, eq).map_err(stage())?.global_range())
            } else {
                None
            },
            edge: if analyses.contains(&Analysis::Edge) {
                let frame = self.edge_frame(n, eq).map_err(stage())?;
                let lowest = c.edge.settings.thresholds.iter().cloned().fold(f64::INFINITY, f64::min);
                Some((frame, lowest))
            } else {
                None
            },
            max: analyses.contains(&Analysis::Gumbel),
        };
        let input_hash = hash_json(&(
            CODE_VERSION,
            "sample",
            &c.kernel,
            &c.potential,
            n,
            c.beta(n).to_bits(),
            method,
            &c.sampler,
            derive_seed(c.run.seed, n),
            keep.fingerprint(&c.upsilon()),
            &eq.files,
        ));
        let csv_rel = PathBuf::from(format!("{key}.csv"));
        let json_rel = PathBuf::from(format!("{key}.json"));
        if let Some(files) = self.cached(&key, &input_hash) {
            let s: SampleSummary = read_json(&self.root.join(&json_rel))?;
            let table = SampleTable::from_csv(&self.root.join(&csv_rel), s.dim, s.frames, &s.counts)?;
            self.record(&key, input_hash, true, start, &files);
            return Ok((table, files));
        }

        let params = self.params(n).map_err(stage())?;
        let seed = derive_seed(c.run.seed, n);
        let s = &c.sampler;
        let (configs, chains) = match method {
            Method::Mcmc => {
                let opts = ChainOptions {
                    steps: (s.burn_sweeps + s.frames * s.thin_sweeps) * n as u64,
                    burn_in: s.burn_sweeps * n as u64,
                    thin: s.thin_sweeps * n as u64,
                    record: RecordMode::All,
                    ..ChainOptions::sweeps(n, s.burn_sweeps, s.frames)
                };
                let runs: Vec<_> = (0..s.replicas)
                    .into_par_iter()
                    .map(|r| {
                        let run = run_chain_from(&params, &opts, None, replica_rng(seed, r as u64))?;
                        let configs: Vec<ParticleSet> =
                            run.snapshots.iter().map(|snap| keep.apply(&snap.points)).collect();
                        Ok((configs, run.diagnostics))
                    })
                    .collect::<Result<_, GasError>>()
                    .map_err(stage())?;
                let diagnostics: Vec<_> = runs.iter().map(|r| r.1.clone()).collect();
                let summary = ChainSummary {
                    mean_acceptance: diagnostics.iter().map(|d| d.acceptance_rate).sum::<f64>()
                        / diagnostics.len() as f64,
                    flagged_replicas: diagnostics.iter().filter(|d| d.acceptance_flag).count(),
                    max_energy_drift: diagnostics.iter().map(|d| d.max_energy_drift).fold(0.0, f64::max),
                    max_energy_autocorrelation: diagnostics
                        .iter()
                        .map(|d| d.energy_autocorrelation)
                        .fold(0.0, f64::max),
                };
                if summary.flagged_replicas > 0 {
                    self.warnings.push(format!(
                        "{key}: {} replicas ended with acceptance outside the target band",
                        summary.flagged_replicas
                    ));
                }
                (runs.into_iter().flat_map(|r| r.0).collect(), Some(summary))
            }
            Method::Tridiag | Method::Iid => {
                let beta = params.beta();
                let frames = s.frames;
                let configs: Vec<Vec<ParticleSet>> = (0..s.replicas)
                    .into_par_iter()
                    .map(|r| {
                        let mut rng = replica_rng(seed, r as u64);
                        (0..frames)
                            .map(|_| match method {
                                Method::Tridiag => {
                                    let m = Tridiagonal::gaussian_beta(n, beta, &mut rng)?;
                                    keep.eigenvalues(&m)
                                }
                                _ => Ok(keep.apply(&sample_iid(&self.potential, n, &mut rng)?)),
                            })
                            .collect::<Result<Vec<_>, GasError>>()
                    })
                    .collect::<Result<_, GasError>>()
                    .map_err(stage())?;
                (configs.into_iter().flatten().collect(), None)
            }
            Method::Auto => unreachable!("resolved above"),
        };

        let table = SampleTable { dim: c.kernel.dim, frames: s.frames, configs };
        let summary = SampleSummary {
            n,
            beta: params.beta(),
            method,
            dim: table.dim,
            frames: table.frames,
            counts: table.configs.iter().map(|c| c.len()).collect(),
            chains,
        };
        let files = vec![
            write_file(&self.root, &csv_rel, &table.to_csv()?)?,
            write_file(&self.root, &json_rel, &json_bytes(&summary))?,
        ];
        self.record(&key, input_hash, false, start, &files);
        Ok((table, files))
    }

    fn stats(
        &mut self,
        n: usize,
        eq: &Equilibrium,
        table: &SampleTable,
        sample_files: &[OutputFile],
        analyses: &[Analysis],
    ) -> Result<StatsOutput, CliError> {
        let start = Instant::now();
        let c = self.config;
        let key = format!("stats/n{n}");
        let stage = || CliError::stage(key.clone());
        let input_hash = hash_json(&(
            CODE_VERSION,
            "stats",
            analyses,
            &c.bulk,
            &c.edge,
            &c.gumbel,
            &c.density,
            (analyses.contains(&Analysis::Partition)).then(|| (&c.partition, derive_seed(c.run.seed, n))),
            &c.upsilon(),
            &eq.files,
            sample_files,
        ));
        let json_rel = PathBuf::from(format!("{key}.json"));
        if let Some(files) = self.cached(&key, &input_hash) {
            let out: StatsOutput = read_json(&self.root.join(&json_rel))?;
            self.record(&key, input_hash, true, start, &files);
            return Ok(out);
        }

        let mut verdicts = Vec::new();
        let mut reports = BTreeMap::new();
        for &analysis in analyses {
            let report: StatReport = match analysis {
                Analysis::Bulk => self.bulk_analysis(n, eq).and_then(|a| a.run(&table.configs)),
                Analysis::Edge => {
                    self.edge_frame(n, eq).and_then(|frame| edge_analysis(&table.configs, &frame, &c.edge.settings))
                }
                Analysis::Gumbel => {
                    let beta_n = c.beta(n) * n as f64;
                    table
                        .configs
                        .iter()
                        .map(|cfg| {
                            let max = cfg.max_coord(0).ok_or_else(|| GasError::EmptySample("no particles".into()))?;
                            gumbel_statistic_from_max(max, n as f64, beta_n, eq.l_gamma)
                        })
                        .collect::<Result<Vec<f64>, GasError>>()
                        .and_then(|xi| gumbel_analysis(&xi, &c.gumbel))
                }
                Analysis::Density => self.density_analysis(n, eq, table),
                Analysis::Partition => self.partition_analysis(n, eq),
            }
            .map_err(stage())?;
            verdicts.extend(report.verdicts.iter().map(|v| VerdictRecord {
                analysis,
                name: v.name.clone(),
                statistic: v.statistic,
                p_value: v.p_value,
                threshold: v.threshold,
                passed: v.passed,
            }));
            let name = serde_json::to_value(analysis).expect("serializable").as_str().unwrap_or_default().to_string();
            reports.insert(name, serde_json::to_value(&report).expect("serializable report"));
        }
        let out = StatsOutput { n, verdicts, reports };
        let files = vec![write_file(&self.root, &json_rel, &json_bytes(&out))?];
        self.record(&key, input_hash, false, start, &files);
        Ok(out)
    }
}

impl Runner<'_> {
    fn density_analysis(&self, n: usize, eq: &Equilibrium, table: &SampleTable) -> Result<StatReport, GasError> {
        let d = &self.config.density;
        let hist = density_of_states_histogram(&table.configs, 0, d.lo, d.hi, d.bins)?;
        let l1 = hist.l1_distance(|a, b| eq.density.mass_in(a, b));
        let ratio = wegner_sup_ratio(&self.params(n)?, &hist, d.min_count)?;
        let mut report = StatReport { replicas: table.configs.len(), ..Default::default() };
        report.verdicts.push(Verdict {
            name: "density_l1".into(),
            statistic: l1,
            p_value: None,
            threshold: d.l1_tolerance,
            passed: l1 <= d.l1_tolerance,
        });
        report.verdicts.push(Verdict {
            name: "wegner_sup_ratio".into(),
            statistic: ratio,
            p_value: None,
            threshold: f64::INFINITY,
            passed: ratio.is_finite(),
        });
        Ok(report)
    }

    fn partition_analysis(&self, n: usize, eq: &Equilibrium) -> Result<StatReport, GasError> {
        let p = &self.config.partition;
        let opts = PartitionOptions {
            replicas: p.replicas,
            chain: ChainOptions::sweeps(n - 1, p.burn_sweeps, p.frames),
            draws_per_frame: p.draws_per_frame,
        };
        let r = estimate_partition_ratio(&self.params(n)?, &opts, derive_seed(self.config.run.seed, n))?;
        let gap = (r.estimate - eq.l_gamma).abs();
        let bound = p.stderr_factor * r.stderr + p.relative_tolerance * eq.l_gamma;
        let mut report = StatReport { replicas: r.replicas, ..Default::default() };
        report.verdicts.push(Verdict {
            name: "partition_ratio_gap".into(),
            statistic: gap,
            p_value: None,
            threshold: bound,
            passed: gap < bound,
        });
        if r.heavy_tail {
            report.verdicts.push(Verdict {
                name: "partition_weight_share".into(),
                statistic: r.max_weight_share,
                p_value: None,
                threshold: 0.05,
                passed: false,
            });
        }
        Ok(report)
    }
}

fn read_density(path: &Path, dim: usize) -> Result<Vec<f64>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::data(path, e))?;
    r.records()
        .map(|row| {
            let row = row.map_err(|e| CliError::data(path, e))?;
            row.get(dim)
                .ok_or_else(|| CliError::data(path, "missing density column"))?
                .parse::<f64>()
                .map_err(|e| CliError::data(path, e))
        })
        .collect()
}

/// Which particles of a configuration are stored.
struct Keep {
    record: Record,
    top_k: usize,
    /// Bulk analysis range along the first axis.
    bulk: Option<(f64, f64)>,
    /// Edge frame and the lowest frame coordinate any edge window reads.
    edge: Option<(EdgeFrame, f64)>,
    /// Keep the particle with the largest first coordinate.
    max: bool,
}

impl Keep {
    /// What decides the retained particles, beyond the sampler settings.
    fn fingerprint(&self, upsilon: &[f64]) -> serde_json::Value {
        if self.record != Record::Window {
            return serde_json::Value::Null;
        }
        serde_json::json!({
            "bulk": self.bulk.map(|(lo, hi)| [lo.to_bits(), hi.to_bits()]),
            "edge": self.edge.as_ref().map(|(_, lowest)| (upsilon, lowest.to_bits())),
            "max": self.max,
        })
    }

    fn wanted(&self, p: &[f64]) -> bool {
        self.bulk.is_some_and(|(lo, hi)| p[0] >= lo && p[0] < hi)
            || self.edge.as_ref().is_some_and(|(frame, lowest)| frame.inverse(p)[0] >= *lowest)
    }

    fn apply(&self, config: &ParticleSet) -> ParticleSet {
        match self.record {
            Record::All => config.clone(),
            Record::Top => config.top(0, self.top_k),
            Record::Window => {
                let argmax = if self.max {
                    (0..config.len()).max_by(|&a, &b| config.point(a)[0].total_cmp(&config.point(b)[0]))
                } else {
                    None
                };
                let coords: Vec<f64> = (0..config.len())
                    .filter(|&i| Some(i) == argmax || self.wanted(config.point(i)))
                    .flat_map(|i| config.point(i).to_vec())
                    .collect();
                ParticleSet::new(config.dim(), coords).expect("subset of a valid configuration")
            }
        }
    }

    /// The recorded eigenvalues of a tridiagonal matrix, computing only the needed part of the spectrum.
    fn eigenvalues(&self, m: &Tridiagonal) -> Result<ParticleSet, GasError> {
        let values = match self.record {
            Record::All => m.eigenvalues()?,
            Record::Top => {
                let mut top = m.largest(self.top_k);
                top.reverse();
                top
            }
            Record::Window => {
                let mut ranges: Vec<(f64, f64)> = self.bulk.into_iter().collect();
                if let Some((frame, lowest)) = &self.edge {
                    ranges.push((frame.map(&[*lowest])[0], f64::INFINITY));
                }
                ranges.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut merged: Vec<(f64, f64)> = Vec::new();
                for r in ranges {
                    match merged.last_mut() {
                        Some(last) if r.0 <= last.1 => last.1 = last.1.max(r.1),
                        _ => merged.push(r),
                    }
                }
                let mut values: Vec<f64> = merged.iter().flat_map(|&(lo, hi)| m.eigenvalues_in(lo, hi)).collect();
                if self.max {
                    let top = m.largest(1)[0];
                    if !merged.iter().any(|&(lo, hi)| top >= lo && top < hi) {
                        values.push(top);
                    }
                }
                values
            }
        };
        ParticleSet::new(1, values)
    }
}
