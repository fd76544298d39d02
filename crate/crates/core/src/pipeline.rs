//! End-to-end workflow on point observations: ingest, regionalize, estimate
//! weekly densities with a nationwide prior, transform, fit, and export the
//! directed network.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::clustering::{cluster_regions, ClusterOptions, Distance, RegionAssignment, Site};
use crate::em::{fit_map, fit_mle, DirichletPrior, EmOptions, WeightVector};
use crate::error::{Error, Result};
use crate::factor_var::{fit, FactorVarConfig, FactorVarFit};
use crate::inference::{
    covariance, select_edges, CovarianceEstimate, DirectionConvention, Edge, EdgeNetwork,
    EdgeSelection, HypothesisFamily,
};
use crate::panel::TransformedPanel;
use crate::simplex::{logit_delta, MetricPack, TransformConfig};
use crate::spline::SplineBasis;

/// Smallest prior weight handed to the regional posterior fits.
pub const PRIOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub date: NaiveDate,
    pub value: f64,
    pub latitude: f64,
    pub longitude: f64,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub site_id: Option<String>,
}

impl Observation {
    /// Site identifier, falling back to the rounded coordinates.
    pub fn site_key(&self) -> String {
        match &self.site_id {
            Some(id) => id.clone(),
            None => format!("{:.6},{:.6}", self.latitude, self.longitude),
        }
    }
}

fn empty_as_none<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<String>, D::Error> {
    let s: Option<String> = Option::deserialize(d)?;
    Ok(s.filter(|s| !s.trim().is_empty()))
}

/// Observations kept and the number of rows dropped for falling outside the
/// support.
pub fn read_observations<R: Read>(
    reader: R,
    support: (f64, f64),
) -> Result<(Vec<Observation>, usize)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut kept = Vec::new();
    let mut dropped = 0;
    for row in rdr.deserialize() {
        let obs: Observation = row?;
        if !(obs.value.is_finite() && obs.latitude.is_finite() && obs.longitude.is_finite()) {
            return Err(Error::NonFinite(format!("observation on {}", obs.date)));
        }
        if obs.value >= support.0 && obs.value <= support.1 {
            kept.push(obs);
        } else {
            dropped += 1;
        }
    }
    Ok((kept, dropped))
}

pub fn write_observations<W: Write>(obs: &[Observation], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for o in obs {
        w.serialize(o)?;
    }
    w.flush()?;
    Ok(())
}

/// `1 + floor((date - start) / 7)`.
pub fn week_index(date: NaiveDate, start: NaiveDate) -> Result<usize> {
    let days = (date - start).num_days();
    if days < 0 {
        return Err(Error::DateBeforeStart {
            date: date.to_string(),
            start: start.to_string(),
        });
    }
    Ok(1 + (days / 7) as usize)
}

/// Factor counts to fit: a single value or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactorSweep {
    One(usize),
    Many(Vec<usize>),
}

impl FactorSweep {
    pub fn values(&self) -> Vec<usize> {
        match self {
            FactorSweep::One(r) => vec![*r],
            FactorSweep::Many(v) => v.clone(),
        }
    }
}

fn default_lag() -> usize {
    1
}

fn date_field<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<NaiveDate, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        Toml(toml::value::Datetime),
    }
    let text = match Raw::deserialize(d)? {
        Raw::Text(s) => s,
        Raw::Toml(dt) => dt.to_string(),
    };
    NaiveDate::parse_from_str(text.trim(), "%Y-%m-%d").map_err(serde::de::Error::custom)
}

fn opt_date_field<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<NaiveDate>, D::Error> {
    date_field(d).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub support: [f64; 2],
    #[serde(rename = "J")]
    pub j: usize,
    pub degree: usize,
    pub delta: f64,
    pub gamma: f64,
    pub k_init: usize,
    pub min_weekly: f64,
    #[serde(deserialize_with = "date_field")]
    pub start_date: NaiveDate,
    #[serde(default = "default_lag")]
    pub lag: usize,
    pub r: FactorSweep,
    pub fdr: f64,
    #[serde(default)]
    pub seed: u64,
    /// Last date of the sample window; defaults to the latest observation.
    #[serde(
        default,
        deserialize_with = "opt_date_field",
        skip_serializing_if = "Option::is_none"
    )]
    pub end_date: Option<NaiveDate>,
    #[serde(default)]
    pub distance: Distance,
    #[serde(default)]
    pub family: HypothesisFamily,
    #[serde(default)]
    pub direction: DirectionConvention,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.support[0] < self.support[1]) {
            return bad(format!(
                "support {:?} is not an increasing interval",
                self.support
            ));
        }
        if self.j == 0 || self.j < self.degree {
            return bad(format!(
                "J = {} must be positive and at least degree = {}",
                self.j, self.degree
            ));
        }
        if !(self.delta >= 0.0) || !(self.gamma >= 0.0) {
            return bad("delta and gamma must be nonnegative".into());
        }
        if self.k_init == 0 || self.lag == 0 {
            return bad("k_init and lag must be positive".into());
        }
        if !(self.min_weekly >= 0.0) {
            return bad("min_weekly must be nonnegative".into());
        }
        if !(self.fdr > 0.0 && self.fdr < 1.0) {
            return bad(format!("fdr = {} must lie in (0, 1)", self.fdr));
        }
        if self.r.values().is_empty() {
            return bad("r must list at least one factor count".into());
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<SplineBasis> {
        SplineBasis::new(self.support[0], self.support[1], self.degree, self.j)
    }

    pub fn transform(&self) -> Result<TransformConfig> {
        TransformConfig::new(self.delta, self.j)
    }

    pub fn selection(&self) -> EdgeSelection {
        EdgeSelection {
            fdr: self.fdr,
            family: self.family,
            direction: self.direction,
        }
    }
}

/// Observations assigned to `(week, site)` within the window.
#[derive(Debug, Clone)]
pub struct WeeklySample {
    pub weeks: usize,
    /// `(week index (1-based), site key, value)`.
    pub records: Vec<(usize, String, f64)>,
    pub dropped_before_start: usize,
    pub dropped_after_end: usize,
}

pub fn bin_by_week(
    obs: &[Observation],
    start: NaiveDate,
    end: Option<NaiveDate>,
) -> Result<WeeklySample> {
    let mut records = Vec::with_capacity(obs.len());
    let (mut before, mut after) = (0, 0);
    let last = end.map(|e| week_index(e, start)).transpose()?;
    for o in obs {
        if o.date < start {
            before += 1;
            continue;
        }
        let w = week_index(o.date, start)?;
        if matches!(last, Some(l) if w > l) {
            after += 1;
            continue;
        }
        records.push((w, o.site_key(), o.value));
    }
    let weeks = last.unwrap_or_else(|| records.iter().map(|r| r.0).max().unwrap_or(0));
    if weeks == 0 {
        return Err(Error::EmptySample);
    }
    Ok(WeeklySample {
        weeks,
        records,
        dropped_before_start: before,
        dropped_after_end: after,
    })
}

/// One entry per site with its total count; coordinates from its first row.
pub fn collect_sites(obs: &[Observation]) -> Vec<Site> {
    let mut sites: BTreeMap<String, Site> = BTreeMap::new();
    for o in obs {
        sites
            .entry(o.site_key())
            .or_insert_with(|| Site {
                id: o.site_key(),
                latitude: o.latitude,
                longitude: o.longitude,
                count: 0,
            })
            .count += 1;
    }
    sites.into_values().collect()
}

/// Nationwide and regional weekly mixture weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyWeights {
    pub weeks: usize,
    pub regions: usize,
    /// `national[t]`, zero-based week.
    pub national: Vec<Vec<f64>>,
    /// `regional[t][c]`.
    pub regional: Vec<Vec<Vec<f64>>>,
    pub counts: Vec<Vec<usize>>,
}

impl WeeklyWeights {
    pub fn num_weights(&self) -> usize {
        self.regional
            .first()
            .and_then(|r| r.first())
            .map_or(0, Vec::len)
    }

    /// Rows `week,region,w_1..w_{J+1}` with one-based week and region.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["week".to_string(), "region".to_string()];
        header.extend((1..=self.num_weights()).map(|i| format!("w_{i}")));
        w.write_record(&header)?;
        for (t, week) in self.regional.iter().enumerate() {
            for (c, weights) in week.iter().enumerate() {
                let mut rec = vec![(t + 1).to_string(), (c + 1).to_string()];
                rec.extend(weights.iter().map(|v| format!("{v:e}")));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads regional weights; national weights and counts are not stored in
    /// the file and come back empty.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let width = rdr.headers()?.len();
        if width < 3 {
            return Err(Error::Config(
                "weights file needs week, region and weight columns".into(),
            ));
        }
        let mut cells: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse_idx = |i: usize| -> Result<usize> {
                rec[i]
                    .trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|v| *v >= 1)
                    .ok_or_else(|| {
                        Error::Config(format!("bad index '{}' in weights file", &rec[i]))
                    })
            };
            let (t, c) = (parse_idx(0)?, parse_idx(1)?);
            let w = (2..width)
                .map(|i| {
                    rec[i].trim().parse::<f64>().map_err(|_| {
                        Error::Config(format!("bad weight '{}' in weights file", &rec[i]))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            cells.insert((t - 1, c - 1), w);
        }
        let weeks = cells.keys().map(|k| k.0 + 1).max().unwrap_or(0);
        let regions = cells.keys().map(|k| k.1 + 1).max().unwrap_or(0);
        if cells.len() != weeks * regions || weeks == 0 {
            return Err(Error::Config(format!(
                "weights file must cover every (week, region) cell; found {} of {weeks} x {regions}",
                cells.len()
            )));
        }
        let regional = (0..weeks)
            .map(|t| (0..regions).map(|c| cells[&(t, c)].clone()).collect())
            .collect();
        Ok(WeeklyWeights {
            weeks,
            regions,
            national: Vec::new(),
            regional,
            counts: Vec::new(),
        })
    }
}

/// Per-week nationwide MLE and per-region posterior-mean weights with prior
/// strength `gamma`. A week without observations reuses the previous week's
/// nationwide weights.
pub fn weekly_densities(
    sample: &WeeklySample,
    assignment: &RegionAssignment,
    basis: &SplineBasis,
    gamma: f64,
) -> Result<WeeklyWeights> {
    let (weeks, regions) = (sample.weeks, assignment.num_regions());
    let mut national_x: Vec<Vec<f64>> = vec![Vec::new(); weeks];
    let mut cell_x: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); regions]; weeks];
    for (w, site, x) in &sample.records {
        let c = assignment
            .region(site)
            .ok_or_else(|| Error::IndexOutOfRange(format!("site '{site}' has no region")))?;
        national_x[w - 1].push(*x);
        cell_x[w - 1][c].push(*x);
    }
    let opts = EmOptions::default();
    let init = WeightVector::uniform(basis.num_weights());

    let fitted: Vec<Option<Vec<f64>>> = national_x
        .par_iter()
        .map(|x| {
            if x.is_empty() {
                Ok(None)
            } else {
                fit_mle(x, basis, &init, opts).map(|(w, _)| Some(w.into_inner()))
            }
        })
        .collect::<Result<_>>()?;
    let mut national: Vec<Vec<f64>> = Vec::with_capacity(weeks);
    for (t, w) in fitted.into_iter().enumerate() {
        match w {
            Some(w) => national.push(w),
            None => {
                let prev = national.last().cloned().ok_or(Error::NoPrior(t + 1))?;
                log::info!(
                    "week {} has no observations; carrying the previous nationwide density",
                    t + 1
                );
                national.push(prev);
            }
        }
    }

    let regional: Vec<Vec<Vec<f64>>> = (0..weeks)
        .into_par_iter()
        .map(|t| {
            let mut alpha0: Vec<f64> = national[t].iter().map(|v| v.max(PRIOR_FLOOR)).collect();
            let s: f64 = alpha0.iter().sum();
            alpha0.iter_mut().for_each(|v| *v /= s);
            let prior = DirichletPrior::new(alpha0, gamma)?;
            (0..regions)
                .map(|c| {
                    fit_map(&cell_x[t][c], basis, &prior, &init, opts).map(|(w, _)| w.into_inner())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let counts = cell_x
        .iter()
        .map(|w| w.iter().map(Vec::len).collect())
        .collect();
    Ok(WeeklyWeights {
        weeks,
        regions,
        national,
        regional,
        counts,
    })
}

/// Logit coordinates of every cell, stacked per week, with the spline metric.
pub fn transform_panel(
    weights: &WeeklyWeights,
    metric: MetricPack,
    cfg: &TransformConfig,
) -> Result<TransformedPanel> {
    let (t, c, j) = (weights.weeks, weights.regions, cfg.dim);
    let mut y = DMatrix::zeros(c * j, t);
    for (s, week) in weights.regional.iter().enumerate() {
        for (unit, w) in week.iter().enumerate() {
            let b = logit_delta(w, cfg)?;
            for (i, v) in b.into_iter().enumerate() {
                y[(unit * j + i, s)] = v;
            }
        }
    }
    TransformedPanel::new(y, c, metric)
}

/// Fit result for one factor count, ready for edge selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitOutcome {
    Fitted {
        fit: Box<FactorVarFit>,
        covariance: Box<CovarianceEstimate>,
    },
    /// The demeaned panel is identically zero: all coefficients vanish and
    /// no edge can be tested.
    Degenerate { units: usize, lags: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitArtifact {
    pub r: usize,
    pub labels: Vec<String>,
    pub outcome: FitOutcome,
}

impl FitArtifact {
    pub fn iterations(&self) -> usize {
        match &self.outcome {
            FitOutcome::Fitted { fit, .. } => fit.iterations,
            FitOutcome::Degenerate { .. } => 0,
        }
    }

    pub fn converged(&self) -> bool {
        match &self.outcome {
            FitOutcome::Fitted { fit, .. } => fit.converged,
            FitOutcome::Degenerate { .. } => true,
        }
    }

    pub fn network(&self, selection: &EdgeSelection) -> Result<EdgeNetwork> {
        match &self.outcome {
            FitOutcome::Fitted { fit, covariance } => select_edges(fit, covariance, selection),
            FitOutcome::Degenerate { units, lags } => {
                if !(selection.fdr > 0.0 && selection.fdr < 1.0) {
                    return Err(Error::InvalidFdrLevel(selection.fdr));
                }
                let mut edges = Vec::new();
                for lag in 1..=*lags {
                    for row in 0..*units {
                        for col in (0..*units).filter(|&d| d != row) {
                            let (source, target) = match selection.direction {
                                DirectionConvention::RowIsTarget => (col, row),
                                DirectionConvention::RowIsSource => (row, col),
                            };
                            edges.push(Edge {
                                source,
                                target,
                                lag,
                                coef: 0.0,
                                t_stat: 0.0,
                                p_raw: 0.5,
                                p_adjusted: 1.0,
                                in_family: false,
                                selected: false,
                            });
                        }
                    }
                }
                Ok(EdgeNetwork {
                    units: *units,
                    edges,
                    fdr_level: selection.fdr,
                    n_hypotheses: 0,
                })
            }
        }
    }
}

pub fn region_labels(regions: usize) -> Vec<String> {
    (1..=regions).map(|c| format!("region {c}")).collect()
}

/// Fits the factor VAR with `r` factors and its coefficient covariance.
pub fn fit_panel(
    panel: &TransformedPanel,
    lags: usize,
    r: usize,
    labels: Vec<String>,
) -> Result<FitArtifact> {
    let centered = panel.demeaned();
    let scale = panel.data().amax().max(1.0);
    let outcome = if centered.data().amax() <= 1e-12 * scale {
        log::info!("demeaned panel is identically zero; reporting an empty network");
        FitOutcome::Degenerate {
            units: panel.units(),
            lags,
        }
    } else {
        let f = fit(panel, &FactorVarConfig::new(lags, r))?;
        let cov = covariance(&f, panel)?;
        FitOutcome::Fitted {
            fit: Box::new(f),
            covariance: Box::new(cov),
        }
    };
    Ok(FitArtifact { r, labels, outcome })
}

/// Counts and locations reported by [`run_analysis`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub observations: usize,
    pub dropped_out_of_support: usize,
    pub dropped_outside_window: usize,
    pub weeks: usize,
    pub regions: usize,
    pub per_r: Vec<RunMetrics>,
    pub weights_path: PathBuf,
    pub metrics_path: PathBuf,
    pub network_paths: Vec<PathBuf>,
}

/// Per-factor-count edge summary written to the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub r: usize,
    pub n_edges: usize,
    pub n_hypotheses: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Everything up to and including the weekly densities.
#[derive(Debug, Clone)]
pub struct DensityStage {
    pub observations: usize,
    pub dropped_out_of_support: usize,
    pub dropped_outside_window: usize,
    pub assignment: RegionAssignment,
    pub weights: WeeklyWeights,
}

pub fn estimate_densities(config: &PipelineConfig, input: &Path) -> Result<DensityStage> {
    config.validate()?;
    let support = (config.support[0], config.support[1]);
    let (obs, dropped) = File::open(input)
        .map_err(Error::from)
        .and_then(|f| read_observations(f, support))
        .map_err(|e| e.at_stage("ingest"))?;
    if dropped > 0 {
        log::info!(
            "dropped {dropped} observations outside the support [{}, {}]",
            support.0,
            support.1
        );
    }
    let sample =
        bin_by_week(&obs, config.start_date, config.end_date).map_err(|e| e.at_stage("ingest"))?;
    let in_window: Vec<Observation> = obs
        .iter()
        .filter(|o| o.date >= config.start_date && config.end_date.is_none_or(|e| o.date <= e))
        .cloned()
        .collect();
    let assignment = cluster_regions(
        &collect_sites(&in_window),
        &ClusterOptions {
            k_init: config.k_init,
            min_weekly: config.min_weekly,
            weeks: sample.weeks,
            seed: config.seed,
            distance: config.distance,
            max_iter: 300,
        },
    )
    .map_err(|e| e.at_stage("clustering"))?;
    let basis = config.basis().map_err(|e| e.at_stage("densities"))?;
    let weights = weekly_densities(&sample, &assignment, &basis, config.gamma)
        .map_err(|e| e.at_stage("densities"))?;
    Ok(DensityStage {
        observations: sample.records.len(),
        dropped_out_of_support: dropped,
        dropped_outside_window: sample.dropped_before_start + sample.dropped_after_end,
        assignment,
        weights,
    })
}

/// Builds the transformed panel for a weights table under `config`.
pub fn panel_from_weights(
    config: &PipelineConfig,
    weights: &WeeklyWeights,
) -> Result<TransformedPanel> {
    let basis = config.basis()?;
    let tcfg = config.transform()?;
    let metric = MetricPack::build(&basis, &tcfg)?;
    transform_panel(weights, metric, &tcfg)
}

/// Fits every factor count in the sweep.
pub fn fit_sweep(config: &PipelineConfig, weights: &WeeklyWeights) -> Result<Vec<FitArtifact>> {
    let panel = panel_from_weights(config, weights).map_err(|e| e.at_stage("transform"))?;
    let labels = region_labels(weights.regions);
    config
        .r
        .values()
        .into_iter()
        .map(|r| fit_panel(&panel, config.lag, r, labels.clone()).map_err(|e| e.at_stage("fit")))
        .collect()
}

pub fn write_run_metrics<W: Write>(rows: &[RunMetrics], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `network_r{r}.json` and `network_r{r}.csv`; returns both paths.
pub fn write_network(
    network: &EdgeNetwork,
    labels: &[String],
    out: &Path,
    r: usize,
) -> Result<(PathBuf, PathBuf)> {
    let json_path = out.join(format!("network_r{r}.json"));
    let csv_path = out.join(format!("network_r{r}.csv"));
    fs::write(&json_path, network.to_json(Some(labels))?)?;
    network.write_csv(BufWriter::new(File::create(&csv_path)?))?;
    Ok((json_path, csv_path))
}

/// Runs the full workflow and writes `weights.csv`, `metrics.csv` and one
/// network per factor count into `out`.
pub fn run_analysis(config: &PipelineConfig, input: &Path, out: &Path) -> Result<AnalysisSummary> {
    fs::create_dir_all(out)?;
    let stage = estimate_densities(config, input)?;
    let weights_path = out.join("weights.csv");
    stage
        .weights
        .write_csv(BufWriter::new(File::create(&weights_path)?))
        .map_err(|e| e.at_stage("export"))?;

    let artifacts = fit_sweep(config, &stage.weights)?;
    let selection = config.selection();
    let mut per_r = Vec::new();
    let mut network_paths = Vec::new();
    for art in &artifacts {
        let net = art
            .network(&selection)
            .map_err(|e| e.at_stage("inference"))?;
        let (json, csv) =
            write_network(&net, &art.labels, out, art.r).map_err(|e| e.at_stage("export"))?;
        network_paths.push(json);
        network_paths.push(csv);
        per_r.push(RunMetrics {
            r: art.r,
            n_edges: net.num_selected(),
            n_hypotheses: net.n_hypotheses,
            iterations: art.iterations(),
            converged: art.converged(),
        });
    }
    let metrics_path = out.join("metrics.csv");
    write_run_metrics(&per_r, BufWriter::new(File::create(&metrics_path)?))
        .map_err(|e| e.at_stage("export"))?;
    Ok(AnalysisSummary {
        observations: stage.observations,
        dropped_out_of_support: stage.dropped_out_of_support,
        dropped_outside_window: stage.dropped_outside_window,
        weeks: stage.weights.weeks,
        regions: stage.weights.regions,
        per_r,
        weights_path,
        metrics_path,
        network_paths,
    })
}
