use serde::{Deserialize, Serialize};

use super::{
    holdout_split, prediction_distances, summarize_distances, topk_accuracy, zero_shot_split,
    EvalReport, GoldSet, Protocol, SplitSize, DEFAULT_K_VALUES,
};
use crate::embed::EmbeddingTable;
use crate::mapper::{
    map_phrases, train_mapper_excluding, Metric, MappingResult, NeighborIndex, PhraseEncoder,
    TrainConfig, TrainingPair,
};
use crate::nn::{Architecture, MappingModel, Readout, Variant};
use crate::taxonomy::TaxonomyGraph;
use crate::util::Fingerprint;
use crate::{Error, Result};

/// Everything a protocol run needs besides its configuration.
#[derive(Clone, Copy)]
pub struct ProtocolInputs<'a> {
    pub graph: &'a TaxonomyGraph,
    pub nodes: &'a EmbeddingTable,
    pub encoder: &'a PhraseEncoder,
    pub pairs: &'a [TrainingPair],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    pub architecture: Architecture,
    pub train: TrainConfig,
    pub metric: Metric,
    pub k_values: Vec<usize>,
    /// Pair-level hold-out for the intrinsic and restricted protocols.
    pub test_size: SplitSize,
    /// Concepts removed for the zero-shot protocol.
    pub zero_shot_size: SplitSize,
    /// Seeds the split and the model initialisation.
    pub seed: u64,
    /// Run training and evaluation on the thread pool. Results do not
    /// depend on this flag.
    pub parallel: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            protocol: Protocol::Intrinsic,
            architecture: Architecture::standard(Variant::Bilstm {
                hidden: 200,
                readout: Readout::Final,
                mask_padding: false,
            }),
            train: TrainConfig::default(),
            metric: Metric::Cosine,
            k_values: DEFAULT_K_VALUES.to_vec(),
            test_size: SplitSize::Fraction(0.1),
            zero_shot_size: SplitSize::Fraction(0.1),
            seed: 1,
            parallel: false,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() || self.k_values[0] == 0 || self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "k values must be non-empty, positive and strictly increasing".into(),
            ));
        }
        self.architecture.validate()?;
        self.train.validate()
    }

    /// Hash of every setting that can change a result.
    pub fn digest(&self, inputs: &ProtocolInputs<'_>) -> Result<String> {
        let mut cfg = serde_json::to_value(self)?;
        cfg.as_object_mut().map(|o| o.remove("parallel"));
        cfg["train"].as_object_mut().map(|o| o.remove("parallel"));
        let mut fp = Fingerprint::default();
        fp.str(&cfg.to_string())
            .str(&inputs.graph.fingerprint())
            .str(&inputs.nodes.fingerprint())
            .str(&inputs.encoder.fingerprint())
            .str(&crate::mapper::pairs_fingerprint(inputs.pairs));
        Ok(fp.finish())
    }
}

/// Scores of a fixed model on a fixed gold set.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub results: Vec<MappingResult>,
    pub accuracy: Vec<f64>,
    pub mean_graph_distance: Vec<Option<f64>>,
    pub unreachable_pairs: Vec<usize>,
}

/// Map every gold phrase and score the rankings at each `k`.
pub fn evaluate(
    model: &MappingModel,
    encoder: &PhraseEncoder,
    index: &NeighborIndex,
    gold: &GoldSet,
    graph: &TaxonomyGraph,
    k_values: &[usize],
    parallel: bool,
) -> Result<Evaluation> {
    gold.validate_against(graph)?;
    let max_k = k_values.iter().copied().max().unwrap_or(1);
    let phrases: Vec<&str> = gold.phrases().collect();
    let results = map_phrases(encoder, model, index, &phrases, max_k, parallel)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let distances = prediction_distances(&results, gold, graph, parallel)?;
    let mut ev = Evaluation {
        results,
        accuracy: Vec::new(),
        mean_graph_distance: Vec::new(),
        unreachable_pairs: Vec::new(),
    };
    for &k in k_values {
        ev.accuracy.push(topk_accuracy(&ev.results, gold, k)?);
        let d = summarize_distances(&distances, k);
        ev.mean_graph_distance.push(d.mean);
        ev.unreachable_pairs.push(d.unreachable_pairs);
    }
    Ok(ev)
}

/// Outcome of [`run_protocol`].
#[derive(Clone, Debug)]
pub struct ProtocolRun {
    pub report: EvalReport,
    pub model: MappingModel,
    pub loss_history: Vec<f64>,
    pub train_pairs: Vec<TrainingPair>,
    pub gold: GoldSet,
    pub evaluation: Evaluation,
}

/// Split, train a fresh model, and evaluate it as the protocol prescribes.
pub fn run_protocol(inputs: &ProtocolInputs<'_>, config: &ProtocolConfig) -> Result<ProtocolRun> {
    config.validate()?;
    for p in inputs.pairs {
        inputs.graph.require(p.concept.as_str())?;
    }
    let digest = config.digest(inputs)?;
    let (train_pairs, gold, excluded) = match config.protocol {
        Protocol::Intrinsic | Protocol::Restricted => {
            let s = holdout_split(inputs.pairs, config.test_size, config.seed)?;
            (s.train, s.test, Default::default())
        }
        Protocol::ZeroShot => {
            let s = zero_shot_split(inputs.pairs, config.zero_shot_size, config.seed)?;
            (s.remaining, GoldSet::from_pairs(&s.removed)?, s.held_out)
        }
    };
    let subset: Option<Vec<_>> = match config.protocol {
        Protocol::Restricted => Some(gold.concepts().into_iter().collect()),
        _ => None,
    };
    let index = NeighborIndex::build(inputs.nodes, subset.as_deref(), config.metric)?;

    let model = MappingModel::new(config.architecture.clone(), config.seed)?;
    let train_cfg = TrainConfig {
        parallel: config.parallel,
        ..config.train
    };
    let outcome = train_mapper_excluding(&train_pairs, inputs.nodes, inputs.encoder, model, &train_cfg, &excluded)?;

    let evaluation = evaluate(
        &outcome.model,
        inputs.encoder,
        &index,
        &gold,
        inputs.graph,
        &config.k_values,
        config.parallel,
    )?;
    let report = EvalReport {
        protocol: config.protocol,
        metric: config.metric,
        k_values: config.k_values.clone(),
        accuracy: evaluation.accuracy.clone(),
        mean_graph_distance: evaluation.mean_graph_distance.clone(),
        unreachable_pairs: evaluation.unreachable_pairs.clone(),
        test_size: gold.len(),
        index_size: index.len(),
        config_digest: digest,
    };
    report.validate()?;
    Ok(ProtocolRun {
        report,
        model: outcome.model,
        loss_history: outcome.loss_history,
        train_pairs,
        gold,
        evaluation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::WordSource;

    fn fixture() -> (TaxonomyGraph, EmbeddingTable, PhraseEncoder, Vec<TrainingPair>) {
        let edges: Vec<(String, String, String)> = (1..8)
            .map(|i| (format!("N{i}"), "is_a".to_string(), format!("N{}", (i - 1) / 2)))
            .collect();
        let (graph, _) = TaxonomyGraph::from_edges(edges).unwrap();
        let ids: Vec<String> = graph.ids().iter().map(|c| c.to_string()).collect();
        let nodes = EmbeddingTable::new(
            ids.clone(),
            2,
            (0..ids.len()).flat_map(|i| [(i as f64).cos(), (i as f64).sin()]).collect(),
            None,
        )
        .unwrap();
        let words: Vec<String> = (0..8).map(|i| format!("w{i}")).collect();
        let table = EmbeddingTable::new(
            words.clone(),
            3,
            (0..24).map(|i| ((i * 7 % 5) as f64) - 2.0).collect(),
            None,
        )
        .unwrap()
        .with_oov(vec![0.0, 0.0, 0.1])
        .unwrap();
        let enc = PhraseEncoder::new(WordSource::Table(table), 3).unwrap();
        let mut pairs = Vec::new();
        for (i, id) in ids.iter().enumerate() {
            let n: usize = id[1..].parse().unwrap();
            for j in 0..3 {
                pairs.push(TrainingPair::new(id, &format!("w{n} w{} x{i}{j}", (n + j) % 8)).unwrap());
            }
        }
        (graph, nodes, enc, pairs)
    }

    fn config(protocol: Protocol) -> ProtocolConfig {
        ProtocolConfig {
            protocol,
            architecture: Architecture {
                seq_len: 3,
                input_dim: 3,
                output_dim: 2,
                variant: Variant::Linear,
            },
            train: TrainConfig {
                epochs: 3,
                batch_size: 4,
                ..TrainConfig::default()
            },
            k_values: vec![1, 2, 5],
            test_size: SplitSize::Count(5),
            zero_shot_size: SplitSize::Count(2),
            ..ProtocolConfig::default()
        }
    }

    #[test]
    fn restricted_index_size_is_gold_coverage() {
        let (graph, nodes, encoder, pairs) = fixture();
        let inputs = ProtocolInputs { graph: &graph, nodes: &nodes, encoder: &encoder, pairs: &pairs };
        let run = run_protocol(&inputs, &config(Protocol::Restricted)).unwrap();
        assert_eq!(run.report.index_size, run.gold.concepts().len());
        let run = run_protocol(&inputs, &config(Protocol::Intrinsic)).unwrap();
        assert_eq!(run.report.index_size, 8);
        assert_eq!(run.report.k_values, [1, 2, 5]);
    }

    #[test]
    fn zero_shot_keeps_held_out_concepts_out_of_training() {
        let (graph, nodes, encoder, pairs) = fixture();
        let inputs = ProtocolInputs { graph: &graph, nodes: &nodes, encoder: &encoder, pairs: &pairs };
        let run = run_protocol(&inputs, &config(Protocol::ZeroShot)).unwrap();
        let held = run.gold.concepts();
        assert_eq!(held.len(), 2);
        assert!(run.train_pairs.iter().all(|p| !held.contains(&p.concept)));
        assert_eq!(run.train_pairs.len(), pairs.len() - 6);
        let too_many = ProtocolConfig { zero_shot_size: SplitSize::Count(8), ..config(Protocol::ZeroShot) };
        assert!(matches!(run_protocol(&inputs, &too_many), Err(Error::Validation(_))));
    }

    #[test]
    fn digest_ignores_parallelism_only() {
        let (graph, nodes, encoder, pairs) = fixture();
        let inputs = ProtocolInputs { graph: &graph, nodes: &nodes, encoder: &encoder, pairs: &pairs };
        let a = config(Protocol::Intrinsic);
        let b = ProtocolConfig { parallel: true, ..a.clone() };
        let c = ProtocolConfig { seed: 9, ..a.clone() };
        assert_eq!(a.digest(&inputs).unwrap(), b.digest(&inputs).unwrap());
        assert_ne!(a.digest(&inputs).unwrap(), c.digest(&inputs).unwrap());
        let ra = run_protocol(&inputs, &a).unwrap();
        let rb = run_protocol(&inputs, &b).unwrap();
        assert_eq!(ra.report, rb.report);
    }
}
