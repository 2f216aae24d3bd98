use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use super::report::{mean_and_std, RunReport};
use crate::aggregators::{
    build_agnn, build_da, build_dad, build_gat, build_random_laplacian, Aggregator, AttentionParams,
};
use crate::error::{Result, SpicError};
use crate::graphdata::{
    generate_sbm, load_graph, randomize_features, reduce_features, FeatureMode, FeatureSelection, Graph, SbmSpec,
};
use crate::learn::{train_prepared, Prepared, TrainConfig, TrainOutcome, Variant};
use crate::propagation::{appnp_propagate, default_normalize};

/// Named model: an aggregator family plus, for `appnp` and `poly`, the
/// propagation scheme built on DAD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelFamily {
    Dad,
    Da,
    Agnn,
    GatSym,
    GatAsym,
    RlSym,
    RlAm,
    Appnp,
    Poly,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 9] = [
        ModelFamily::Dad,
        ModelFamily::Da,
        ModelFamily::Agnn,
        ModelFamily::GatSym,
        ModelFamily::GatAsym,
        ModelFamily::RlSym,
        ModelFamily::RlAm,
        ModelFamily::Appnp,
        ModelFamily::Poly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::Dad => "dad",
            ModelFamily::Da => "da",
            ModelFamily::Agnn => "agnn",
            ModelFamily::GatSym => "gat_sym",
            ModelFamily::GatAsym => "gat_asym",
            ModelFamily::RlSym => "rl_sym",
            ModelFamily::RlAm => "rl_am",
            ModelFamily::Appnp => "appnp",
            ModelFamily::Poly => "poly",
        }
    }

    /// Families whose aggregator is redrawn from every run's seed.
    pub fn is_random(self) -> bool {
        matches!(
            self,
            ModelFamily::GatSym | ModelFamily::GatAsym | ModelFamily::RlSym | ModelFamily::RlAm
        )
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ModelFamily::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = ModelFamily::ALL.iter().map(|m| m.as_str()).collect();
            format!("unknown model {s:?} (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub family: ModelFamily,
    /// Head variant; `poly` forces [`Variant::Poly`] and `appnp` allows
    /// only [`Variant::Linear`].
    pub variant: Variant,
    /// Candidate iteration counts; the one with the best mean validation
    /// metric is reported.
    pub ks: Vec<usize>,
    pub beta: u32,
    /// Teleport probability of `appnp`.
    pub alpha: f64,
    /// Cosine temperature of `agnn`.
    pub eps: f64,
    /// `None` follows [`default_normalize`].
    pub normalize: Option<bool>,
    pub attention_hidden: usize,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, ks: Vec<usize>) -> Self {
        Self {
            family,
            variant: if family == ModelFamily::Poly {
                Variant::Poly
            } else {
                Variant::Linear
            },
            ks,
            beta: 0,
            alpha: 0.1,
            eps: 1.0,
            normalize: None,
            attention_hidden: AttentionParams::DEFAULT_HIDDEN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() {
            return Err(SpicError::InvalidInput("no iteration count given".into()));
        }
        match self.family {
            ModelFamily::Appnp => {
                if !(self.alpha > 0.0 && self.alpha < 1.0) {
                    return Err(SpicError::InvalidInput(format!(
                        "alpha must be in (0,1), got {}",
                        self.alpha
                    )));
                }
                if self.variant != Variant::Linear {
                    return Err(SpicError::InvalidInput("appnp takes only the linear head".into()));
                }
                if self.ks.contains(&0) {
                    return Err(SpicError::InvalidInput("appnp needs K ≥ 1".into()));
                }
            }
            ModelFamily::Poly if self.variant != Variant::Poly => {
                return Err(SpicError::InvalidInput("poly takes only the polynomial head".into()));
            }
            _ => {}
        }
        if matches!(self.variant, Variant::Relu1 | Variant::General) && self.ks.contains(&0) {
            return Err(SpicError::InvalidInput(format!("{} needs k ≥ 1", self.variant)));
        }
        Ok(())
    }

    /// Report name: the family, suffixed by a nonlinear variant.
    pub fn id(&self) -> String {
        match self.variant {
            Variant::Linear | Variant::Poly => self.family.to_string(),
            v => format!("{}_{v}", self.family),
        }
    }

    fn normalize_for(&self, k: usize) -> bool {
        self.normalize.unwrap_or_else(|| default_normalize(k))
    }

    /// The aggregator this model propagates with; random families draw it
    /// from `seed`.
    pub fn build_aggregator(&self, g: &Graph, seed: u64) -> Result<Aggregator> {
        let agg = match self.family {
            ModelFamily::Dad | ModelFamily::Appnp | ModelFamily::Poly => build_dad(g),
            ModelFamily::Da => build_da(g),
            ModelFamily::Agnn => build_agnn(g, self.eps)?,
            ModelFamily::GatSym | ModelFamily::GatAsym => {
                let params = AttentionParams::random(g.num_features(), self.attention_hidden, aggregator_seed(seed))?;
                build_gat(g, &params, self.family == ModelFamily::GatSym)?
            }
            ModelFamily::RlSym | ModelFamily::RlAm => {
                build_random_laplacian(g, self.family == ModelFamily::RlSym, aggregator_seed(seed))
            }
        };
        Ok(agg.with_shift(self.beta))
    }

    fn prepare<'a>(&self, agg: &'a Aggregator, g: &Graph, k: usize) -> Result<Prepared<'a>> {
        if self.family == ModelFamily::Appnp {
            let emb = appnp_propagate(agg, g.features(), self.alpha, k)?;
            Prepared::from_embedding(agg, emb.values, k)
        } else {
            Prepared::new(self.variant, agg, g.features(), k, self.normalize_for(k))
        }
    }
}

/// Keeps aggregator draws independent of the head initialization that
/// uses the same run seed.
fn aggregator_seed(seed: u64) -> u64 {
    seed ^ 0x5A17_C0DE_0000_0001
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Dir(PathBuf),
    Sbm {
        spec: SbmSpec,
        features: usize,
        mode: FeatureMode,
    },
}

/// Where a graph comes from plus optional feature transforms, applied as
/// truncation first, then replacement by random features.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSpec {
    pub source: DataSource,
    pub keep_first: Option<usize>,
    pub random_features: Option<usize>,
    pub feature_seed: u64,
}

impl DataSpec {
    pub fn dir(path: impl Into<PathBuf>) -> Self {
        Self::from_source(DataSource::Dir(path.into()))
    }

    pub fn sbm(spec: SbmSpec, features: usize, mode: FeatureMode) -> Self {
        Self::from_source(DataSource::Sbm { spec, features, mode })
    }

    fn from_source(source: DataSource) -> Self {
        Self {
            source,
            keep_first: None,
            random_features: None,
            feature_seed: 0,
        }
    }

    /// Short name: directory name or SBM shape, with a `_d` suffix for
    /// transformed features.
    pub fn id(&self) -> String {
        let mut id = match &self.source {
            DataSource::Dir(p) => p
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
            DataSource::Sbm { spec, .. } => {
                format!("sbm{}x{}", spec.blocks(), spec.sizes.first().copied().unwrap_or(0))
            }
        };
        if let Some(d) = self.random_features.or(self.keep_first) {
            id.push_str(&format!("_{d}"));
        }
        id
    }

    pub fn load(&self) -> Result<Graph> {
        let mut g = match &self.source {
            DataSource::Dir(p) => load_graph(p)?,
            DataSource::Sbm { spec, features, mode } => generate_sbm(spec, *features, *mode)?,
        };
        if let Some(n) = self.keep_first {
            g = reduce_features(&g, &FeatureSelection::First(n))?;
        }
        if let Some(d) = self.random_features {
            g = randomize_features(&g, d, self.feature_seed)?;
        }
        Ok(g)
    }
}

/// Loads the data and runs [`run_on_graph`].
pub fn run_experiment(model: &ModelSpec, data: &DataSpec, config: &TrainConfig) -> Result<RunReport> {
    let g = data.load()?;
    run_on_graph(model, &g, &data.id(), config)
}

fn runs_for_k(model: &ModelSpec, g: &Graph, k: usize, config: &TrainConfig) -> Result<Vec<TrainOutcome>> {
    let seeds: Vec<u64> = (0..config.runs as u64).map(|i| config.seed + i).collect();
    if model.family.is_random() {
        seeds
            .par_iter()
            .map(|&seed| {
                let agg = model.build_aggregator(g, seed)?;
                let prepared = model.prepare(&agg, g, k)?;
                train_prepared(&prepared, g, config, seed)
            })
            .collect()
    } else {
        let agg = model.build_aggregator(g, config.seed)?;
        let prepared = model.prepare(&agg, g, k)?;
        seeds
            .par_iter()
            .map(|&seed| train_prepared(&prepared, g, config, seed))
            .collect()
    }
}

/// `config.runs` trainings with seeds `config.seed ..`, for every candidate
/// k; the k with the highest mean validation metric wins (ties: first
/// listed; without validation nodes the first k is used).
pub fn run_on_graph(model: &ModelSpec, g: &Graph, dataset: &str, config: &TrainConfig) -> Result<RunReport> {
    model.validate()?;
    config.validate()?;
    let start = Instant::now();
    let mut best: Option<(f64, usize, Vec<TrainOutcome>)> = None;
    for &k in &model.ks {
        let outcomes = runs_for_k(model, g, k, config)?;
        let val: Vec<f64> = outcomes.iter().map(|o| o.val_metric).collect();
        let (val_mean, _) = mean_and_std(&val);
        let score = if val_mean.is_nan() { f64::NEG_INFINITY } else { val_mean };
        log::info!("{} k={k}: mean validation {val_mean:.4}", model.id());
        if best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, k, outcomes));
        }
    }
    let (_, k, outcomes) = best.expect("ks is nonempty");
    let test: Vec<f64> = outcomes.iter().map(|o| o.test_metric).collect();
    let val: Vec<f64> = outcomes.iter().map(|o| o.val_metric).collect();
    let (mean, std) = mean_and_std(&test);
    let total_runs = (config.runs * model.ks.len()) as f64;
    Ok(RunReport {
        model: model.id(),
        dataset: dataset.to_string(),
        k,
        beta: model.beta,
        metric: outcomes[0].metric,
        test,
        val,
        mean,
        std,
        epochs: config.epochs,
        runs: config.runs,
        seed_base: config.seed,
        seconds_per_run: start.elapsed().as_secs_f64() / total_runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    K,
    Beta,
    FeatureDim,
    ModelFamily,
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "k" => Ok(SweepAxis::K),
            "beta" => Ok(SweepAxis::Beta),
            "feature_dim" => Ok(SweepAxis::FeatureDim),
            "model_family" => Ok(SweepAxis::ModelFamily),
            other => Err(format!(
                "unknown sweep axis {other:?} (expected k, beta, feature_dim or model_family)"
            )),
        }
    }
}

fn parse_value<T: FromStr>(axis: SweepAxis, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| SpicError::InvalidInput(format!("bad {axis:?} value {v:?}")))
}

/// One experiment per axis value, returned sorted along the axis.
/// `feature_dim` replaces the features by that many random columns.
pub fn sweep(
    axis: SweepAxis,
    values: &[String],
    model: &ModelSpec,
    data: &DataSpec,
    config: &TrainConfig,
) -> Result<Vec<RunReport>> {
    if values.is_empty() {
        return Err(SpicError::InvalidInput("sweep needs at least one value".into()));
    }
    let mut points: Vec<(ModelSpec, DataSpec, (u64, String))> = Vec::with_capacity(values.len());
    for v in values {
        let mut m = model.clone();
        let mut d = data.clone();
        let key = match axis {
            SweepAxis::K => {
                let k: usize = parse_value(axis, v)?;
                m.ks = vec![k];
                (k as u64, String::new())
            }
            SweepAxis::Beta => {
                let b: u32 = parse_value(axis, v)?;
                m.beta = b;
                (b as u64, String::new())
            }
            SweepAxis::FeatureDim => {
                let dim: usize = parse_value(axis, v)?;
                if dim == 0 {
                    return Err(SpicError::InvalidInput("feature dimension must be at least 1".into()));
                }
                d.random_features = Some(dim);
                (dim as u64, String::new())
            }
            SweepAxis::ModelFamily => {
                let f: ModelFamily = v.trim().parse().map_err(SpicError::InvalidInput)?;
                let variant = m.variant;
                m = ModelSpec {
                    family: f,
                    ..ModelSpec::new(f, m.ks.clone())
                };
                m.beta = model.beta;
                m.alpha = model.alpha;
                m.eps = model.eps;
                m.normalize = model.normalize;
                if f != ModelFamily::Poly && f != ModelFamily::Appnp {
                    m.variant = variant;
                }
                (0, f.as_str().to_string())
            }
        };
        m.validate()?;
        points.push((m, d, key));
    }
    points.sort_by(|a, b| a.2.cmp(&b.2));
    let mut cached: Option<Graph> = None;
    let mut reports = Vec::with_capacity(points.len());
    for (m, d, _) in &points {
        let report = if axis == SweepAxis::FeatureDim {
            run_experiment(m, d, config)?
        } else {
            let g = match &cached {
                Some(g) => g,
                None => cached.insert(d.load()?),
            };
            run_on_graph(m, g, &d.id(), config)?
        };
        log::info!("{}", report.summary());
        reports.push(report);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sbm() -> DataSpec {
        DataSpec::sbm(SbmSpec::uniform(2, 40, 0.3, 0.02, 4, 5), 4, FeatureMode::RandomUniform)
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs: 30,
            runs: 4,
            hidden: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn report_arithmetic_is_recomputable() {
        let r = run_experiment(&ModelSpec::new(ModelFamily::Dad, vec![2]), &small_sbm(), &quick()).unwrap();
        assert_eq!(r.test.len(), r.runs);
        let mean = r.test.iter().sum::<f64>() / r.runs as f64;
        let var = r.test.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r.runs - 1) as f64;
        assert!((r.mean - mean).abs() <= 1e-12);
        assert!((r.std - var.sqrt()).abs() <= 1e-12);
    }

    #[test]
    fn runs_depend_only_on_their_seed() {
        let g = small_sbm().load().unwrap();
        let config = quick();
        for family in [ModelFamily::Dad, ModelFamily::RlAm] {
            let model = ModelSpec::new(family, vec![2]);
            let all = run_on_graph(&model, &g, "x", &config).unwrap();
            // run 2 alone, started from its own seed
            let single = TrainConfig {
                runs: 1,
                seed: config.seed + 2,
                ..config.clone()
            };
            let alone = run_on_graph(&model, &g, "x", &single).unwrap();
            assert_eq!(alone.test[0].to_bits(), all.test[2].to_bits());
        }
    }

    #[test]
    fn every_family_runs() {
        let g = small_sbm().load().unwrap();
        let config = TrainConfig {
            runs: 2,
            epochs: 5,
            ..quick()
        };
        for f in ModelFamily::ALL {
            let r = run_on_graph(&ModelSpec::new(f, vec![2]), &g, "x", &config).unwrap();
            assert_eq!(r.model, f.as_str());
            assert!(r.mean.is_finite());
        }
    }

    #[test]
    fn k_is_chosen_among_candidates() {
        let r = run_experiment(&ModelSpec::new(ModelFamily::Dad, vec![3, 2]), &small_sbm(), &quick()).unwrap();
        assert!(r.k == 2 || r.k == 3);
    }

    #[test]
    fn model_validation() {
        let mut m = ModelSpec::new(ModelFamily::Appnp, vec![3]);
        m.alpha = 1.5;
        assert!(m.validate().unwrap_err().to_string().contains("alpha must be in (0,1)"));
        let mut p = ModelSpec::new(ModelFamily::Poly, vec![3]);
        p.variant = Variant::General;
        assert!(p.validate().is_err());
        let mut r = ModelSpec::new(ModelFamily::Dad, vec![2]);
        r.variant = Variant::Relu1;
        assert_eq!(r.id(), "dad_relu1");
    }

    #[test]
    fn sweep_sorts_and_rejects_empty() {
        let model = ModelSpec::new(ModelFamily::Dad, vec![1]);
        let config = TrainConfig {
            runs: 1,
            epochs: 3,
            ..quick()
        };
        assert!(sweep(SweepAxis::K, &[], &model, &small_sbm(), &config).is_err());
        let values: Vec<String> = ["3", "1", "2"].iter().map(|s| s.to_string()).collect();
        let r = sweep(SweepAxis::K, &values, &model, &small_sbm(), &config).unwrap();
        assert_eq!(r.iter().map(|r| r.k).collect::<Vec<_>>(), vec![1, 2, 3]);
        let dims: Vec<String> = ["6", "3"].iter().map(|s| s.to_string()).collect();
        let r = sweep(SweepAxis::FeatureDim, &dims, &model, &small_sbm(), &config).unwrap();
        assert_eq!(r[0].dataset, "sbm2x40_3");
        assert!(sweep(SweepAxis::Beta, &["x".to_string()], &model, &small_sbm(), &config).is_err());
    }
}
