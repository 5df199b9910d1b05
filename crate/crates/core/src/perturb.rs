//! Universal perturbation training and baselines.
//!
//! Trains a single token-agnostic perturbation (or a per-token table of
//! them) by projected gradient ascent on the frozen classifier's loss, and
//! constructs norm-matched random baselines. The constraint ‖δ‖_p ≤ ε is
//! re-established by projection after every minibatch.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::linalg::{lp_norm, project_lp_ball, Matrix, NormOrder};
use crate::metrics::accuracy;
use crate::model::{grad_delta, ClassifierParams};
use crate::optim::{Optimizer, OptimizerKind};
use crate::rng::{mix_seed, seeded, standard_normal};
use crate::text::LabeledExample;

/// Shape of a perturbation: one shared vector, or one row per vocabulary
/// token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationKind {
    Single,
    PerToken,
}

impl PerturbationKind {
    pub fn label(&self) -> &'static str {
        match self {
            PerturbationKind::Single => "single",
            PerturbationKind::PerToken => "pertoken",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "single" => Some(PerturbationKind::Single),
            "pertoken" => Some(PerturbationKind::PerToken),
            _ => None,
        }
    }
}

/// How a perturbation came to be; carried through to serialized files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Zero,
    Random,
    Trained,
}

impl Provenance {
    pub fn label(&self) -> &'static str {
        match self {
            Provenance::Zero => "zero",
            Provenance::Random => "random",
            Provenance::Trained => "trained",
        }
    }
}

/// The perturbation tensor itself.
#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationData {
    Single(Vec<f64>),
    PerToken(Matrix),
}

/// An embedding-space perturbation with its norm budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub data: PerturbationData,
    pub eps: f64,
    pub p: NormOrder,
    pub provenance: Provenance,
}

impl Perturbation {
    pub fn zero(
        kind: PerturbationKind,
        embed_dim: usize,
        vocab_size: usize,
        eps: f64,
        p: NormOrder,
    ) -> Perturbation {
        let data = match kind {
            PerturbationKind::Single => PerturbationData::Single(vec![0.0; embed_dim]),
            PerturbationKind::PerToken => {
                PerturbationData::PerToken(Matrix::zeros(vocab_size, embed_dim))
            }
        };
        Perturbation {
            data,
            eps,
            p,
            provenance: Provenance::Zero,
        }
    }

    pub fn kind(&self) -> PerturbationKind {
        match self.data {
            PerturbationData::Single(_) => PerturbationKind::Single,
            PerturbationData::PerToken(_) => PerturbationKind::PerToken,
        }
    }

    pub fn embed_dim(&self) -> usize {
        match &self.data {
            PerturbationData::Single(v) => v.len(),
            PerturbationData::PerToken(m) => m.cols(),
        }
    }

    /// The vector added to the embedding of `token`.
    pub fn delta_for(&self, token: usize) -> &[f64] {
        match &self.data {
            PerturbationData::Single(v) => v,
            PerturbationData::PerToken(m) => m.row(token),
        }
    }

    /// Largest lp-norm across the perturbation's vectors.
    pub fn max_norm(&self) -> Result<f64> {
        match &self.data {
            PerturbationData::Single(v) => lp_norm(v, self.p),
            PerturbationData::PerToken(m) => {
                let mut worst = 0.0f64;
                for r in 0..m.rows() {
                    worst = worst.max(lp_norm(m.row(r), self.p)?);
                }
                Ok(worst)
            }
        }
    }

    /// Checks the perturbation is applicable to the given classifier.
    pub fn validate_against(&self, params: &ClassifierParams) -> Result<()> {
        if self.embed_dim() != params.embed_dim() {
            return Err(Error::InvalidInput(format!(
                "perturbation dimension {} does not match embedding dimension {}",
                self.embed_dim(),
                params.embed_dim()
            )));
        }
        if let PerturbationData::PerToken(m) = &self.data {
            if m.rows() != params.vocab_size() {
                return Err(Error::InvalidInput(format!(
                    "per-token perturbation has {} rows but the vocabulary has {}",
                    m.rows(),
                    params.vocab_size()
                )));
            }
        }
        Ok(())
    }
}

/// Hyperparameters for perturbation training.
#[derive(Debug, Clone)]
pub struct PerturbTrainConfig {
    pub eps: f64,
    pub p: NormOrder,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Replace the raw gradient with ε·g/‖g‖_p as the step direction.
    pub normalize_gradients: bool,
    pub optimizer: OptimizerKind,
    /// Epochs tolerated without an eval-accuracy drop before stopping.
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl PerturbTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_eps(&self, eps: f64) -> PerturbTrainConfig {
        PerturbTrainConfig {
            eps,
            ..self.clone()
        }
    }
}

/// ε·g/‖g‖_p when normalizing, otherwise g itself. A zero gradient skips
/// normalization rather than dividing by zero.
fn ascent_direction(g: &[f64], normalize: bool, eps: f64, p: NormOrder) -> Result<Vec<f64>> {
    if !normalize {
        return Ok(g.to_vec());
    }
    let norm = lp_norm(g, p)?;
    if norm == 0.0 {
        return Ok(g.to_vec());
    }
    let scale = eps / norm;
    Ok(g.iter().map(|x| x * scale).collect())
}

/// Trains a perturbation by projected gradient ascent on the frozen
/// classifier's mean cross-entropy. After every minibatch the perturbation
/// (every row, for the per-token kind) is projected back to the lp ball of
/// radius ε; after every epoch the variant with the lowest eval accuracy so
/// far is retained.
pub fn train_perturbation(
    params: &ClassifierParams,
    train: &[LabeledExample],
    eval: &[LabeledExample],
    config: &PerturbTrainConfig,
    kind: PerturbationKind,
) -> Result<Perturbation> {
    train_perturbation_with_hook(params, train, eval, config, kind, |_| {})
}

/// Same as [`train_perturbation`] but invokes `hook` with the perturbation
/// after every minibatch projection, so tests can assert the norm constraint
/// over a whole run.
pub fn train_perturbation_with_hook<F>(
    params: &ClassifierParams,
    train: &[LabeledExample],
    eval: &[LabeledExample],
    config: &PerturbTrainConfig,
    kind: PerturbationKind,
    mut hook: F,
) -> Result<Perturbation>
where
    F: FnMut(&Perturbation),
{
    config.validate()?;
    params.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if eval.is_empty() {
        return Err(Error::InvalidInput(
            "perturbation training needs a non-empty eval set".into(),
        ));
    }

    let d = params.embed_dim();
    let v = params.vocab_size();
    let mut delta = Perturbation::zero(kind, d, v, config.eps, config.p);
    delta.provenance = Provenance::Trained;

    let slot_shapes = match kind {
        PerturbationKind::Single => vec![d],
        PerturbationKind::PerToken => vec![d; v],
    };
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, &slot_shapes);
    let mut rng = seeded(config.seed);

    let mut best_data = delta.data.clone();
    let mut best_acc = f64::INFINITY;
    let mut epochs_since_improve = 0usize;
    let mut order: Vec<LabeledExample> = train.to_vec();

    for _epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let grad = grad_delta(params, batch, &delta)?;
            match (&mut delta.data, &grad) {
                (PerturbationData::Single(vec), PerturbationData::Single(g)) => {
                    let dir =
                        ascent_direction(g, config.normalize_gradients, config.eps, config.p)?;
                    opt.step(0, vec, &dir, true);
                    *vec = project_lp_ball(vec, config.eps, config.p)?;
                }
                (PerturbationData::PerToken(m), PerturbationData::PerToken(g)) => {
                    // Rows of tokens absent from the batch stay untouched;
                    // each present row is normalized and projected on its own.
                    let touched: BTreeSet<usize> = batch
                        .iter()
                        .flat_map(|ex| ex.tokens.iter().copied())
                        .filter(|&t| t != crate::text::PAD_ID)
                        .collect();
                    for &token in &touched {
                        let dir = ascent_direction(
                            g.row(token),
                            config.normalize_gradients,
                            config.eps,
                            config.p,
                        )?;
                        let row = m.row_mut(token);
                        opt.step(token, row, &dir, true);
                        let projected = project_lp_ball(row, config.eps, config.p)?;
                        row.copy_from_slice(&projected);
                    }
                }
                _ => unreachable!("gradient shape always matches the perturbation"),
            }
            hook(&delta);
        }
        let acc = accuracy(params, eval, Some(&delta))?;
        if acc < best_acc {
            best_acc = acc;
            best_data = delta.data.clone();
            epochs_since_improve = 0;
        } else {
            epochs_since_improve += 1;
            if epochs_since_improve > config.early_stop_patience {
                break;
            }
        }
    }
    delta.data = best_data;
    Ok(delta)
}

/// Draws i.i.d. standard-normal entries and rescales each vector (the single
/// one, or every row) to lp-norm exactly ε.
pub fn random_perturbation(
    kind: PerturbationKind,
    embed_dim: usize,
    vocab_size: usize,
    eps: f64,
    p: NormOrder,
    seed: u64,
) -> Result<Perturbation> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let mut rng = seeded(seed);
    let mut draw_scaled = |len: usize| -> Vec<f64> {
        let mut v: Vec<f64> = (0..len).map(|_| standard_normal(&mut rng)).collect();
        let norm = match p {
            NormOrder::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormOrder::LInf => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        };
        let scale = eps / norm;
        for x in &mut v {
            *x *= scale;
        }
        v
    };
    let data = match kind {
        PerturbationKind::Single => PerturbationData::Single(draw_scaled(embed_dim)),
        PerturbationKind::PerToken => {
            let mut m = Matrix::zeros(vocab_size, embed_dim);
            for r in 0..vocab_size {
                m.row_mut(r).copy_from_slice(&draw_scaled(embed_dim));
            }
            PerturbationData::PerToken(m)
        }
    };
    Ok(Perturbation {
        data,
        eps,
        p,
        provenance: Provenance::Random,
    })
}

/// The four attack columns of the efficacy comparison: random baselines,
/// the trained per-token table, and the trained single perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMethod {
    /// Per-token random ("VR").
    VocabRandom,
    /// Single random ("SR").
    SingleRandom,
    /// Per-token trained ("V").
    VocabTrained,
    /// Single trained ("Ours").
    SingleTrained,
}

impl AttackMethod {
    pub const ALL: [AttackMethod; 4] = [
        AttackMethod::VocabRandom,
        AttackMethod::SingleRandom,
        AttackMethod::VocabTrained,
        AttackMethod::SingleTrained,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            AttackMethod::VocabRandom => "VR",
            AttackMethod::SingleRandom => "SR",
            AttackMethod::VocabTrained => "V",
            AttackMethod::SingleTrained => "Ours",
        }
    }

    pub fn kind(&self) -> PerturbationKind {
        match self {
            AttackMethod::VocabRandom | AttackMethod::VocabTrained => PerturbationKind::PerToken,
            AttackMethod::SingleRandom | AttackMethod::SingleTrained => PerturbationKind::Single,
        }
    }

    pub fn is_trained(&self) -> bool {
        matches!(
            self,
            AttackMethod::VocabTrained | AttackMethod::SingleTrained
        )
    }

    fn salt(&self) -> u64 {
        match self {
            AttackMethod::VocabRandom => 1,
            AttackMethod::SingleRandom => 2,
            AttackMethod::VocabTrained => 3,
            AttackMethod::SingleTrained => 4,
        }
    }
}

/// One evaluated cell of the method × ε grid.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub method: AttackMethod,
    pub eps: f64,
    pub seed: u64,
    pub accuracy: f64,
    pub perturbation: Perturbation,
}

/// Everything produced by a sweep: the clean reference accuracy and one
/// cell (with its perturbation) per method × ε.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub clean_accuracy: f64,
    pub cells: Vec<SweepCell>,
}

/// Seed used for a grid cell. Trained methods keep the base seed so their
/// runs are comparable across ε (and match standalone training runs);
/// random baselines get an independent stream per cell.
pub fn cell_seed(method: AttackMethod, eps_index: usize, base_seed: u64) -> u64 {
    if method.is_trained() {
        base_seed
    } else {
        mix_seed(base_seed, (method.salt() << 32) | eps_index as u64)
    }
}

/// Trains/constructs a perturbation for every (method, ε) cell and measures
/// test accuracy under it. Deterministic given the config seed.
pub fn apply_sweep(
    params: &ClassifierParams,
    train: &[LabeledExample],
    eval: &[LabeledExample],
    test: &[LabeledExample],
    methods: &[AttackMethod],
    eps_grid: &[f64],
    base: &PerturbTrainConfig,
) -> Result<SweepResult> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidInput("empty eps grid".into()));
    }
    let clean_accuracy = accuracy(params, test, None)?;
    let mut cells = Vec::with_capacity(methods.len() * eps_grid.len());
    for &method in methods {
        for (eps_index, &eps) in eps_grid.iter().enumerate() {
            let seed = cell_seed(method, eps_index, base.seed);
            let perturbation = if method.is_trained() {
                let mut config = base.with_eps(eps);
                config.seed = seed;
                train_perturbation(params, train, eval, &config, method.kind())?
            } else {
                random_perturbation(
                    method.kind(),
                    params.embed_dim(),
                    params.vocab_size(),
                    eps,
                    base.p,
                    seed,
                )?
            };
            let acc = accuracy(params, test, Some(&perturbation))?;
            cells.push(SweepCell {
                method,
                eps,
                seed,
                accuracy: acc,
                perturbation,
            });
        }
    }
    Ok(SweepResult {
        clean_accuracy,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClassifierParams;

    /// pad, unk, and one word at [0.5, -0.25]; biases cancel the first-layer
    /// pre-activation so every quantity below is an exact dyadic rational:
    ///   probs   = [0.5, 0.5]              (logits are exactly [0, 0])
    ///   dlogits = [-0.5, 0.5]             (label 0)
    ///   dhidden = W2·dlogits  = [-1, -0.5]
    ///   dpreact = dhidden·tanh'(0)        (unchanged)
    ///   g       = W1·dpreact  = [-0.5, -1.125]
    fn dyadic_params() -> ClassifierParams {
        ClassifierParams {
            embeddings: Matrix::from_vec(3, 2, vec![0.0, 0.0, 0.0, 0.0, 0.5, -0.25]).unwrap(),
            w1: Matrix::from_vec(2, 2, vec![0.25, 0.5, 1.0, 0.25]).unwrap(),
            b1: vec![0.125, -0.1875],
            w2: Matrix::from_vec(2, 2, vec![1.0, -1.0, 0.5, -0.5]).unwrap(),
            b2: vec![0.0, 0.0],
        }
    }

    fn one_word() -> Vec<LabeledExample> {
        vec![LabeledExample {
            tokens: vec![2],
            label: 0,
        }]
    }

    fn plain_config(eps: f64, epochs: usize) -> PerturbTrainConfig {
        PerturbTrainConfig {
            eps,
            p: NormOrder::L2,
            learning_rate: 0.05,
            epochs,
            batch_size: 1,
            normalize_gradients: true,
            optimizer: OptimizerKind::Plain,
            early_stop_patience: 100,
            seed: 0,
        }
    }

    #[test]
    fn zero_epochs_returns_zero_perturbation() {
        let params = dyadic_params();
        let data = one_word();
        let delta = train_perturbation(
            &params,
            &data,
            &data,
            &plain_config(0.1, 0),
            PerturbationKind::Single,
        )
        .unwrap();
        assert_eq!(delta.data, PerturbationData::Single(vec![0.0, 0.0]));
        assert_eq!(delta.provenance, Provenance::Trained);
    }

    #[test]
    fn one_normalized_plain_step_matches_hand_computed_gradient_bitwise() {
        let params = dyadic_params();
        let data = one_word();
        let config = plain_config(0.1, 1);
        let delta =
            train_perturbation(&params, &data, &data, &config, PerturbationKind::Single).unwrap();

        // Hand-derived gradient (see the fixture comment), then the same
        // arithmetic the update performs: δ = λ·(ε·g/‖g‖₂), projection idle
        // because λ·ε < ε.
        let g = [-0.5f64, -1.125];
        let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        let scale = config.eps / norm;
        let expected = vec![
            config.learning_rate * (g[0] * scale),
            config.learning_rate * (g[1] * scale),
        ];
        assert_eq!(delta.data, PerturbationData::Single(expected));
    }

    #[test]
    fn ascending_step_increases_loss() {
        let params = dyadic_params();
        let data = one_word();
        let delta = train_perturbation(
            &params,
            &data,
            &data,
            &plain_config(0.1, 1),
            PerturbationKind::Single,
        )
        .unwrap();
        let zero = Perturbation::zero(PerturbationKind::Single, 2, 3, 0.1, NormOrder::L2);
        let loss_before = loss_on(&params, &data[0], &zero);
        let loss_after = loss_on(&params, &data[0], &delta);
        assert!(
            loss_after > loss_before,
            "ascent must increase the loss: {loss_before} -> {loss_after}"
        );
    }

    fn loss_on(params: &ClassifierParams, ex: &LabeledExample, delta: &Perturbation) -> f64 {
        let trace = crate::model::forward(params, ex, Some(delta)).unwrap();
        crate::model::cross_entropy(&trace, ex.label).unwrap()
    }

    #[test]
    fn zero_gradient_skips_normalization_without_nan() {
        // A zero output layer kills the chain, so g = 0 on every step.
        let mut params = dyadic_params();
        params.w2 = Matrix::zeros(2, 2);
        let data = one_word();
        let delta = train_perturbation(
            &params,
            &data,
            &data,
            &plain_config(0.1, 3),
            PerturbationKind::Single,
        )
        .unwrap();
        assert_eq!(delta.data, PerturbationData::Single(vec![0.0, 0.0]));
    }

    #[test]
    fn constraint_holds_after_every_minibatch() {
        let params = ClassifierParams::init(8, 4, 4, 2, 11);
        let train: Vec<LabeledExample> = (0..12)
            .map(|i| LabeledExample {
                tokens: vec![2 + (i % 6), 2 + ((i + 1) % 6)],
                label: i % 2,
            })
            .collect();
        let mut config = plain_config(0.05, 4);
        config.batch_size = 3;
        config.optimizer = OptimizerKind::adam_default();
        for kind in [PerturbationKind::Single, PerturbationKind::PerToken] {
            let mut checks = 0usize;
            train_perturbation_with_hook(&params, &train, &train, &config, kind, |delta| {
                checks += 1;
                let worst = delta.max_norm().unwrap();
                assert!(
                    worst <= config.eps + 1e-9,
                    "norm {worst} exceeds eps {} mid-training",
                    config.eps
                );
            })
            .unwrap();
            assert!(checks >= 4 * (12 / 3), "hook ran {checks} times");
        }
    }

    #[test]
    fn classifier_stays_frozen_through_training() {
        let params = ClassifierParams::init(8, 4, 4, 2, 13);
        let before = params.checksum();
        let train: Vec<LabeledExample> = (0..8)
            .map(|i| LabeledExample {
                tokens: vec![2 + (i % 6)],
                label: i % 2,
            })
            .collect();
        let mut config = plain_config(0.1, 3);
        config.optimizer = OptimizerKind::adam_default();
        train_perturbation(&params, &train, &train, &config, PerturbationKind::Single).unwrap();
        assert_eq!(params.checksum(), before);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let params = ClassifierParams::init(10, 4, 4, 2, 17);
        let train: Vec<LabeledExample> = (0..16)
            .map(|i| LabeledExample {
                tokens: vec![2 + (i % 8), 2 + ((i * 3) % 8)],
                label: i % 2,
            })
            .collect();
        let mut config = plain_config(0.15, 5);
        config.batch_size = 4;
        config.optimizer = OptimizerKind::Sgd { momentum: 0.9 };
        config.normalize_gradients = false;
        for kind in [PerturbationKind::Single, PerturbationKind::PerToken] {
            let a = train_perturbation(&params, &train, &train, &config, kind).unwrap();
            let b = train_perturbation(&params, &train, &train, &config, kind).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn trainer_rejects_empty_eval() {
        let params = dyadic_params();
        let data = one_word();
        assert!(train_perturbation(
            &params,
            &data,
            &[],
            &plain_config(0.1, 1),
            PerturbationKind::Single
        )
        .is_err());
    }

    #[test]
    fn validate_against_checks_both_dimensions() {
        let params = dyadic_params(); // |V| = 3, d = 2
        let ok = Perturbation::zero(PerturbationKind::PerToken, 2, 3, 0.1, NormOrder::L2);
        assert!(ok.validate_against(&params).is_ok());
        let wrong_dim = Perturbation::zero(PerturbationKind::Single, 5, 3, 0.1, NormOrder::L2);
        assert!(wrong_dim.validate_against(&params).is_err());
        let wrong_rows = Perturbation::zero(PerturbationKind::PerToken, 2, 7, 0.1, NormOrder::L2);
        assert!(wrong_rows.validate_against(&params).is_err());
    }

    #[test]
    fn random_perturbation_norm_is_exactly_eps() {
        for p in [NormOrder::L2, NormOrder::LInf] {
            for kind in [PerturbationKind::Single, PerturbationKind::PerToken] {
                let pert = random_perturbation(kind, 6, 4, 0.15, p, 23).unwrap();
                match &pert.data {
                    PerturbationData::Single(v) => {
                        let n = lp_norm(v, p).unwrap();
                        assert!((n - 0.15).abs() / 0.15 < 1e-12, "norm {n}");
                    }
                    PerturbationData::PerToken(m) => {
                        for r in 0..m.rows() {
                            let n = lp_norm(m.row(r), p).unwrap();
                            assert!((n - 0.15).abs() / 0.15 < 1e-12, "row {r} norm {n}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn random_perturbation_is_deterministic_and_rows_differ() {
        let a =
            random_perturbation(PerturbationKind::PerToken, 4, 3, 0.1, NormOrder::L2, 7).unwrap();
        let b =
            random_perturbation(PerturbationKind::PerToken, 4, 3, 0.1, NormOrder::L2, 7).unwrap();
        assert_eq!(a, b);
        let PerturbationData::PerToken(m) = &a.data else {
            unreachable!()
        };
        for r in 0..m.rows() {
            for s in (r + 1)..m.rows() {
                assert_ne!(m.row(r), m.row(s));
            }
        }
        let c =
            random_perturbation(PerturbationKind::PerToken, 4, 3, 0.1, NormOrder::L2, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_perturbation_rejects_nonpositive_eps() {
        assert!(
            random_perturbation(PerturbationKind::Single, 4, 3, 0.0, NormOrder::L2, 1).is_err()
        );
    }

    #[test]
    fn cell_seeds_keep_trained_methods_on_base_seed() {
        assert_eq!(cell_seed(AttackMethod::SingleTrained, 2, 42), 42);
        assert_eq!(cell_seed(AttackMethod::VocabTrained, 0, 42), 42);
        assert_ne!(cell_seed(AttackMethod::SingleRandom, 0, 42), 42);
        assert_ne!(
            cell_seed(AttackMethod::SingleRandom, 0, 42),
            cell_seed(AttackMethod::SingleRandom, 1, 42)
        );
        assert_ne!(
            cell_seed(AttackMethod::SingleRandom, 0, 42),
            cell_seed(AttackMethod::VocabRandom, 0, 42)
        );
    }
}
