//! Pairwise comparator network and tournament ranking of variants.

use std::cmp::Ordering;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{self, Dense, Layer, Matrix, Mode, ModelFile, Network, Optimizer, OptimizerConfig};
use crate::reuse::WorkingSetProfile;

pub const MODEL_FORMAT: &str = "polytune-comparator";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RankerError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },
    #[error("model file: {0}")]
    ModelFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-feature min-max scaling fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, RankerError> {
        if rows.len() < 2 {
            return Err(RankerError::InvalidArgument("scaler needs at least two rows".into()));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(RankerError::InvalidArgument("feature rows differ in length".into()));
        }
        let mut x_min = vec![f64::INFINITY; dim];
        let mut x_max = vec![f64::NEG_INFINITY; dim];
        for r in rows {
            for (c, &v) in r.iter().enumerate() {
                x_min[c] = x_min[c].min(v);
                x_max[c] = x_max[c].max(v);
            }
        }
        Ok(Self { x_min, x_max })
    }

    pub fn dim(&self) -> usize {
        self.x_min.len()
    }

    /// `(x - x_min) / (x_max - x_min)`, unclipped. Constant columns map to 0.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>, RankerError> {
        if x.len() != self.dim() {
            return Err(RankerError::InvalidArgument(format!("expected {} features, got {}", self.dim(), x.len())));
        }
        Ok(x.iter()
            .zip(self.x_min.iter().zip(&self.x_max))
            .map(|(&v, (&lo, &hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect())
    }
}

pub fn fit_scaler(profiles: &[WorkingSetProfile]) -> Result<FeatureScaler, RankerError> {
    let rows: Vec<Vec<f64>> = profiles.iter().map(WorkingSetProfile::features).collect();
    FeatureScaler::fit(&rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ComparisonOutcome {
    Win1,
    Win2,
    Draw,
}

impl ComparisonOutcome {
    pub fn from_probabilities(p: [f64; 2], theta: f64) -> Self {
        if p[0] > theta {
            Self::Win1
        } else if p[1] > theta {
            Self::Win2
        } else {
            Self::Draw
        }
    }

    pub fn swapped(self) -> Self {
        match self {
            Self::Win1 => Self::Win2,
            Self::Win2 => Self::Win1,
            Self::Draw => Self::Draw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankerConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub theta: f64,
    pub train_fraction: f64,
    /// Upper bound on training pairs per epoch before augmentation; pairs
    /// beyond it are subsampled once with the training seed.
    pub max_pairs: Option<usize>,
}

impl Default for RankerConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 32],
            learning_rate: 1e-3,
            momentum: 0.9,
            epochs: 200,
            batch_size: 32,
            theta: 0.7,
            train_fraction: 0.7,
            max_pairs: None,
        }
    }
}

impl RankerConfig {
    pub fn validate(&self) -> Result<(), RankerError> {
        let bad = |m: &str| Err(RankerError::InvalidArgument(m.into()));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden widths must be non-empty and positive");
        }
        if !(self.theta > 0.5 && self.theta <= 1.0) {
            return bad("theta must lie in (0.5, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be positive");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return bad("train fraction must lie in (0, 1]");
        }
        if self.max_pairs == Some(0) {
            return bad("max_pairs must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparatorModel {
    pub feature_dim: usize,
    pub theta: f64,
    pub network: Network,
}

impl ComparatorModel {
    /// Input `2 * feature_dim`, ReLU hidden layers, two softmax outputs.
    pub fn new(feature_dim: usize, hidden: &[usize], theta: f64, rng: &mut impl Rng) -> Self {
        let mut layers = Vec::new();
        let mut width = 2 * feature_dim;
        for &h in hidden {
            layers.push(Layer::Dense(Dense::new(width, h, rng)));
            layers.push(Layer::Relu);
            width = h;
        }
        layers.push(Layer::Dense(Dense::new(width, 2, rng)));
        Self { feature_dim, theta, network: Network { layers } }
    }

    fn input(&self, a: &[f64], b: &[f64]) -> Result<Vec<f64>, RankerError> {
        if a.len() != self.feature_dim || b.len() != self.feature_dim {
            return Err(RankerError::InvalidArgument(format!(
                "comparator expects {} features per variant",
                self.feature_dim
            )));
        }
        Ok([a, b].concat())
    }

    /// Softmax output for already-scaled features.
    pub fn probabilities(&self, a: &[f64], b: &[f64]) -> Result<[f64; 2], RankerError> {
        let x = Matrix::from_rows(&[self.input(a, b)?]);
        let p = nn::softmax(&self.network.predict(&x));
        Ok([p.data[0], p.data[1]])
    }
}

/// Which member of a pair performed better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Faster {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub faster: Faster,
}

/// All unordered pairs with distinct performance, labelled by the faster one.
pub fn pairs_from_measurements(features: &[Vec<f64>], performance: &[f64]) -> Vec<TrainingPair> {
    let mut out = Vec::new();
    for i in 0..features.len() {
        for j in i + 1..features.len() {
            let faster = match performance[i].partial_cmp(&performance[j]) {
                Some(Ordering::Greater) => Faster::First,
                Some(Ordering::Less) => Faster::Second,
                _ => continue,
            };
            out.push(TrainingPair { a: features[i].clone(), b: features[j].clone(), faster });
        }
    }
    out
}

/// Builds the network input and one-hot targets for a batch of pairs,
/// including each pair's swapped copy.
fn augmented_batch(pairs: &[&TrainingPair]) -> (Matrix, Matrix) {
    let mut xs = Vec::with_capacity(pairs.len() * 2);
    let mut ys = Vec::with_capacity(pairs.len() * 2);
    for p in pairs {
        let first = if p.faster == Faster::First { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
        let second = vec![first[1], first[0]];
        xs.push([p.a.as_slice(), p.b.as_slice()].concat());
        ys.push(first);
        xs.push([p.b.as_slice(), p.a.as_slice()].concat());
        ys.push(second);
    }
    (Matrix::from_rows(&xs), Matrix::from_rows(&ys))
}

/// Mean augmented cross-entropy of the model over `pairs` (scaled features).
pub fn pair_loss(model: &ComparatorModel, pairs: &[TrainingPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let refs: Vec<&TrainingPair> = pairs.iter().collect();
    let (x, y) = augmented_batch(&refs);
    nn::softmax_cross_entropy(&model.network.predict(&x), &y).0
}

/// Gradients of [`pair_loss`] with respect to every network parameter.
pub fn pair_loss_gradients(model: &ComparatorModel, pairs: &[TrainingPair]) -> Vec<Vec<f64>> {
    let refs: Vec<&TrainingPair> = pairs.iter().collect();
    let (x, y) = augmented_batch(&refs);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let tape = model.network.forward(&x, Mode::Eval, &mut rng);
    let (_, g) = nn::softmax_cross_entropy(&tape.output, &y);
    model.network.backward(&tape, &g)
}

/// Mini-batch SGD with momentum on scaled pairs. Returns the loss over the
/// full training set before training and after each epoch.
pub fn train(
    model: &mut ComparatorModel,
    pairs: &[TrainingPair],
    config: &RankerConfig,
    rng: &mut impl Rng,
) -> Result<Vec<f64>, RankerError> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(RankerError::InvalidArgument("no training pairs".into()));
    }
    let mut pairs: Vec<&TrainingPair> = pairs.iter().collect();
    if let Some(cap) = config.max_pairs {
        if pairs.len() > cap {
            pairs.shuffle(rng);
            pairs.truncate(cap);
        }
    }
    let owned: Vec<TrainingPair> = pairs.iter().map(|p| (*p).clone()).collect();
    let mut opt = Optimizer::new(
        OptimizerConfig::Sgd { learning_rate: config.learning_rate, momentum: config.momentum },
        &model.network,
    );
    let mut history = vec![pair_loss(model, &owned)];
    for epoch in 0..config.epochs {
        pairs.shuffle(rng);
        for chunk in pairs.chunks(config.batch_size) {
            let (x, y) = augmented_batch(chunk);
            let tape = model.network.forward(&x, Mode::Train, rng);
            let (loss, g) = nn::softmax_cross_entropy(&tape.output, &y);
            if !loss.is_finite() {
                return Err(RankerError::TrainingDiverged { epoch });
            }
            let grads = model.network.backward(&tape, &g);
            opt.step(&mut model.network, &grads);
        }
        let loss = pair_loss(model, &owned);
        if !loss.is_finite() || model.network.has_non_finite() {
            return Err(RankerError::TrainingDiverged { epoch });
        }
        history.push(loss);
    }
    Ok(history)
}

/// Scaler plus comparator: everything needed to compare raw feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranker {
    pub scaler: FeatureScaler,
    pub model: ComparatorModel,
}

impl Ranker {
    pub fn compare(&self, a: &[f64], b: &[f64]) -> Result<ComparisonOutcome, RankerError> {
        compare(&self.model, &self.scaler, a, b)
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            layer_shapes: self.model.network.shapes(),
            model: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("ranker serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RankerError> {
        let file: ModelFile<Ranker> = serde_json::from_str(text).map_err(|e| RankerError::ModelFile(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(RankerError::ModelFile(format!("unsupported model {} v{}", file.format, file.version)));
        }
        if file.layer_shapes != file.model.model.network.shapes() {
            return Err(RankerError::ModelFile("layer header does not match weights".into()));
        }
        if file.model.scaler.dim() != file.model.model.feature_dim {
            return Err(RankerError::ModelFile("scaler and model disagree on feature count".into()));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: &Path) -> Result<(), RankerError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RankerError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn compare(
    model: &ComparatorModel,
    scaler: &FeatureScaler,
    a: &[f64],
    b: &[f64],
) -> Result<ComparisonOutcome, RankerError> {
    let p = model.probabilities(&scaler.transform(a)?, &scaler.transform(b)?)?;
    Ok(ComparisonOutcome::from_probabilities(p, model.theta))
}

/// Fraction of pairs with distinct performance that the ranker orders
/// correctly. A draw counts as incorrect.
pub fn pairwise_accuracy(ranker: &Ranker, features: &[Vec<f64>], performance: &[f64]) -> Result<f64, RankerError> {
    let pairs = pairs_from_measurements(features, performance);
    if pairs.is_empty() {
        return Ok(1.0);
    }
    let mut correct = 0usize;
    for p in &pairs {
        let want = if p.faster == Faster::First { ComparisonOutcome::Win1 } else { ComparisonOutcome::Win2 };
        if ranker.compare(&p.a, &p.b)? == want {
            correct += 1;
        }
    }
    Ok(correct as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub train_indices: Vec<usize>,
    pub heldout_indices: Vec<usize>,
    pub train_pairs: usize,
    pub loss_history: Vec<f64>,
    pub heldout_accuracy: Option<f64>,
}

/// Splits the measured variants, fits the scaler on the training part and
/// trains a fresh comparator on its pairs.
pub fn fit_ranker(
    features: &[Vec<f64>],
    performance: &[f64],
    config: &RankerConfig,
    seed: u64,
) -> Result<(Ranker, FitSummary), RankerError> {
    config.validate()?;
    if features.len() != performance.len() {
        return Err(RankerError::InvalidArgument("features and performance differ in length".into()));
    }
    if features.len() < 2 {
        return Err(RankerError::InvalidArgument("at least two measured variants are required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.shuffle(&mut rng);
    let n_train = ((features.len() as f64 * config.train_fraction).round() as usize).clamp(2, features.len());
    let (train_idx, held_idx) = order.split_at(n_train);
    let mut train_idx = train_idx.to_vec();
    let mut held_idx = held_idx.to_vec();
    train_idx.sort_unstable();
    held_idx.sort_unstable();

    let train_feats: Vec<Vec<f64>> = train_idx.iter().map(|&i| features[i].clone()).collect();
    let train_perf: Vec<f64> = train_idx.iter().map(|&i| performance[i]).collect();
    let scaler = FeatureScaler::fit(&train_feats)?;
    let scaled: Vec<Vec<f64>> = train_feats.iter().map(|f| scaler.transform(f)).collect::<Result<_, _>>()?;
    let pairs = pairs_from_measurements(&scaled, &train_perf);
    if pairs.is_empty() {
        return Err(RankerError::InvalidArgument("training variants all perform identically".into()));
    }
    let mut model = ComparatorModel::new(scaler.dim(), &config.hidden, config.theta, &mut rng);
    let loss_history = train(&mut model, &pairs, config, &mut rng)?;
    let ranker = Ranker { scaler, model };
    let heldout_accuracy = if held_idx.len() >= 2 {
        let f: Vec<Vec<f64>> = held_idx.iter().map(|&i| features[i].clone()).collect();
        let p: Vec<f64> = held_idx.iter().map(|&i| performance[i]).collect();
        Some(pairwise_accuracy(&ranker, &f, &p)?)
    } else {
        None
    };
    let summary = FitSummary {
        train_pairs: pairs.len().min(config.max_pairs.unwrap_or(usize::MAX)),
        train_indices: train_idx,
        heldout_indices: held_idx,
        loss_history,
        heldout_accuracy,
    };
    Ok((ranker, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub id: String,
    /// Position in the input list.
    pub index: usize,
    pub wins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub entries: Vec<RankedEntry>,
    pub comparisons: usize,
}

/// Round robin over unordered pairs. `outcome(i, j)` compares item `i` (first)
/// with item `j` (second), `i < j`. Draws award no wins. Entries are sorted by
/// descending wins, then ascending id.
pub fn tournament<F, E>(ids: &[String], outcome: F) -> Result<Ranking, E>
where
    F: Fn(usize, usize) -> Result<ComparisonOutcome, E> + Sync,
    E: Send,
{
    let n = ids.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let results: Vec<ComparisonOutcome> = pairs.par_iter().map(|&(i, j)| outcome(i, j)).collect::<Result<_, E>>()?;
    let mut wins = vec![0usize; n];
    for (&(i, j), r) in pairs.iter().zip(&results) {
        match r {
            ComparisonOutcome::Win1 => wins[i] += 1,
            ComparisonOutcome::Win2 => wins[j] += 1,
            ComparisonOutcome::Draw => {}
        }
    }
    let mut entries: Vec<RankedEntry> =
        (0..n).map(|i| RankedEntry { id: ids[i].clone(), index: i, wins: wins[i] }).collect();
    entries.sort_by(|a, b| b.wins.cmp(&a.wins).then_with(|| a.id.cmp(&b.id)));
    Ok(Ranking { entries, comparisons: pairs.len() })
}

/// Tournament over `(id, raw features)` items using a trained ranker.
pub fn tournament_rank(ranker: &Ranker, items: &[(String, Vec<f64>)]) -> Result<Ranking, RankerError> {
    if items.is_empty() {
        return Err(RankerError::InvalidArgument("nothing to rank".into()));
    }
    let scaled: Vec<Vec<f64>> = items.iter().map(|(_, f)| ranker.scaler.transform(f)).collect::<Result<_, _>>()?;
    let ids: Vec<String> = items.iter().map(|(id, _)| id.clone()).collect();
    tournament(&ids, |i, j| {
        let p = ranker.model.probabilities(&scaled[i], &scaled[j])?;
        Ok(ComparisonOutcome::from_probabilities(p, ranker.model.theta))
    })
}

/// The `ceil(fraction * n)` best entries.
pub fn select_top(ranking: &Ranking, fraction: f64) -> Result<&[RankedEntry], RankerError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(RankerError::InvalidArgument("fraction must lie in (0, 1]".into()));
    }
    let n = ranking.entries.len();
    // Guard against 0.1 * 40 landing a hair above 4.
    let k = ((fraction * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(&ranking.entries[..k.min(n)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaler_examples() {
        let s = FeatureScaler::fit(&[vec![10.0, 5.0], vec![20.0, 5.0], vec![30.0, 5.0]]).unwrap();
        assert_eq!(s.transform(&[10.0, 5.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(s.transform(&[20.0, 5.0]).unwrap(), vec![0.5, 0.0]);
        assert_eq!(s.transform(&[30.0, 5.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(s.transform(&[40.0, 7.0]).unwrap(), vec![1.5, 0.0]);
        assert!(s.transform(&[1.0]).is_err());
        assert!(FeatureScaler::fit(&[vec![1.0]]).is_err());
    }

    #[test]
    fn threshold_rule() {
        assert_eq!(ComparisonOutcome::from_probabilities([0.9, 0.1], 0.7), ComparisonOutcome::Win1);
        assert_eq!(ComparisonOutcome::from_probabilities([0.6, 0.4], 0.7), ComparisonOutcome::Draw);
        assert_eq!(ComparisonOutcome::from_probabilities([0.25, 0.75], 0.7), ComparisonOutcome::Win2);
        assert_eq!(ComparisonOutcome::from_probabilities([0.7, 0.3], 0.7), ComparisonOutcome::Draw);
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i:02}")).collect()
    }

    #[test]
    fn tournament_with_total_order() {
        // Item with the larger score wins.
        let score = [2, 0, 3, 1];
        let r = tournament::<_, ()>(&ids(4), |i, j| {
            Ok(if score[i] > score[j] { ComparisonOutcome::Win1 } else { ComparisonOutcome::Win2 })
        })
        .unwrap();
        let wins: Vec<usize> = r.entries.iter().map(|e| e.wins).collect();
        assert_eq!(wins, vec![3, 2, 1, 0]);
        let order: Vec<usize> = r.entries.iter().map(|e| e.index).collect();
        assert_eq!(order, vec![2, 0, 3, 1]);
    }

    #[test]
    fn tournament_all_draws_and_count() {
        let r = tournament::<_, ()>(&ids(10), |_, _| Ok(ComparisonOutcome::Draw)).unwrap();
        assert_eq!(r.comparisons, 45);
        assert!(r.entries.iter().all(|e| e.wins == 0));
        let order: Vec<usize> = r.entries.iter().map(|e| e.index).collect();
        assert_eq!(order, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn select_top_sizes() {
        let mk = |n| tournament::<_, ()>(&ids(n), |_, _| Ok(ComparisonOutcome::Draw)).unwrap();
        assert_eq!(select_top(&mk(40), 0.10).unwrap().len(), 4);
        assert_eq!(select_top(&mk(40), 1.0).unwrap().len(), 40);
        assert_eq!(select_top(&mk(1), 0.05).unwrap().len(), 1);
        assert_eq!(select_top(&mk(41), 0.10).unwrap().len(), 5);
        assert!(select_top(&mk(3), 0.0).is_err());
    }

    #[test]
    fn memorizes_single_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut model = ComparatorModel::new(2, &[8, 8], 0.7, &mut rng);
        let pair = TrainingPair { a: vec![0.1, 0.9], b: vec![0.8, 0.2], faster: Faster::First };
        let config = RankerConfig { epochs: 300, learning_rate: 0.05, ..Default::default() };
        let hist = train(&mut model, std::slice::from_ref(&pair), &config, &mut rng).unwrap();
        assert!(*hist.last().unwrap() < 0.01, "{:?}", hist.last());
        assert!(hist.last() < hist.first());
        let scaler = FeatureScaler { x_min: vec![0.0; 2], x_max: vec![1.0; 2] };
        assert_eq!(compare(&model, &scaler, &pair.a, &pair.b).unwrap(), ComparisonOutcome::Win1);
        assert_eq!(compare(&model, &scaler, &pair.b, &pair.a).unwrap(), ComparisonOutcome::Win2);
    }

    #[test]
    fn model_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ranker = Ranker {
            scaler: FeatureScaler { x_min: vec![0.0; 3], x_max: vec![2.0; 3] },
            model: ComparatorModel::new(3, &[4, 4], 0.7, &mut rng),
        };
        let text = ranker.to_json();
        assert!(text.contains("\"layer_shapes\""));
        assert_eq!(Ranker::from_json(&text).unwrap(), ranker);
        let tampered = text.replace("\"version\": 1", "\"version\": 9");
        assert!(Ranker::from_json(&tampered).is_err());
    }

    #[test]
    fn fit_requires_two_variants() {
        let err = fit_ranker(&[vec![1.0]], &[1.0], &RankerConfig::default(), 0).unwrap_err();
        assert!(matches!(err, RankerError::InvalidArgument(_)));
    }
}
