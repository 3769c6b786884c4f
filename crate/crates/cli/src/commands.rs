use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use t2n_core::embed::{train_node_embeddings, EmbeddingTable, SubwordEmbedder};
use t2n_core::eval::{run_protocol, Protocol, ProtocolInputs};
use t2n_core::mapper::{
    load_pairs, map_phrases, train_mapper, train_word_source, write_mapping_csv, NeighborIndex,
    PhraseEncoder, TrainingPair, WordSource,
};
use t2n_core::nn::MappingModel;
use t2n_core::synth;
use t2n_core::taxonomy::{IngestOptions, TaxonomyGraph};

use crate::config::{existing, required, PipelineConfig};
use crate::manifest::RunManifest;
use crate::UsageError;

/// A subcommand with its flags already folded into the configuration.
#[derive(Clone, Debug)]
pub enum Task {
    Synth,
    TrainNodes,
    TrainWords,
    ImportWords { input: PathBuf },
    TrainMapper,
    Map { phrases: Vec<String>, input: Option<PathBuf>, output: Option<PathBuf>, k: usize },
    Eval { protocol: Protocol },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Synth => "synth",
            Task::TrainNodes => "train-nodes",
            Task::TrainWords => "train-words",
            Task::ImportWords { .. } => "import-words",
            Task::TrainMapper => "train-mapper",
            Task::Map { .. } => "map",
            Task::Eval { .. } => "eval",
        }
    }
}

pub fn execute(task: &Task, cfg: &PipelineConfig, parallel: bool, m: &mut RunManifest) -> Result<()> {
    match task {
        Task::Synth => synth_data(cfg, m),
        Task::TrainNodes => train_nodes(cfg, parallel, m),
        Task::TrainWords => train_words(cfg, m),
        Task::ImportWords { input } => import_words(cfg, input, m),
        Task::TrainMapper => train(cfg, parallel, m),
        Task::Map { phrases, input, output, k } => map(cfg, phrases, input.as_deref(), output.as_deref(), *k, parallel, m),
        Task::Eval { protocol } => eval(cfg, *protocol, parallel, m),
    }
}

fn output_dir(cfg: &PipelineConfig) -> Result<&Path> {
    let dir = cfg.paths.output_dir.as_path();
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_file(path: &Path, m: &mut RunManifest, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    m.artifact(path)
}

fn load_graph(cfg: &PipelineConfig, m: &mut RunManifest) -> Result<TaxonomyGraph> {
    let path = required(&cfg.paths.taxonomy, "taxonomy")?;
    let options = IngestOptions {
        relations: cfg.relations.as_ref().map(|r| r.iter().cloned().collect()),
    };
    let (graph, stats) = TaxonomyGraph::load(&path, &options)?;
    m.note(format!(
        "taxonomy {}: {} concepts, {} edges; dropped {} self-loops, {} duplicates, {} filtered",
        path.display(),
        graph.node_count(),
        graph.edge_count(),
        stats.self_loops,
        stats.duplicates,
        stats.filtered
    ));
    Ok(graph)
}

fn load_nodes(cfg: &PipelineConfig) -> Result<EmbeddingTable> {
    Ok(EmbeddingTable::load(&existing(cfg.nodes_path())?)?)
}

fn load_words(cfg: &PipelineConfig) -> Result<WordSource> {
    let path = existing(cfg.words_path())?;
    Ok(if path.extension().is_some_and(|e| e == "subword") {
        WordSource::Subword(SubwordEmbedder::load(&path)?)
    } else {
        WordSource::Table(EmbeddingTable::load(&path)?)
    })
}

fn load_pairs_checked(cfg: &PipelineConfig, m: &mut RunManifest) -> Result<Vec<TrainingPair>> {
    let path = required(&cfg.paths.pairs, "pairs")?;
    let pairs = load_pairs(&path)?;
    if pairs.is_empty() {
        return Err(UsageError(format!("{} contains no pairs", path.display())).into());
    }
    m.note(format!("{} training pairs from {}", pairs.len(), path.display()));
    Ok(pairs)
}

fn synth_data(cfg: &PipelineConfig, m: &mut RunManifest) -> Result<()> {
    let data = synth::generate(&cfg.synth)?;
    let dir = output_dir(cfg)?;
    write_file(&dir.join("taxonomy.tsv"), m, |w| Ok(data.write_edges(w)?))?;
    write_file(&dir.join("pairs.tsv"), m, |w| Ok(data.write_pairs(w)?))?;
    write_file(&dir.join("corpus.txt"), m, |w| Ok(data.write_corpus(w)?))?;
    m.note(format!(
        "{} concepts, {} edges, {} pairs, {} corpus lines",
        data.ids.len(),
        data.edges.len(),
        data.pairs.len(),
        data.corpus.len()
    ));
    Ok(())
}

fn train_nodes(cfg: &PipelineConfig, parallel: bool, m: &mut RunManifest) -> Result<()> {
    let graph = load_graph(cfg, m)?;
    let table = train_node_embeddings(&graph, &cfg.nodes, parallel)?;
    let path = cfg.nodes_path();
    write_file(&path, m, |w| Ok(table.write(w)?))
}

fn train_words(cfg: &PipelineConfig, m: &mut RunManifest) -> Result<()> {
    let path = required(&cfg.paths.corpus, "corpus")?;
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    m.note(format!("{} corpus lines from {}", lines.len(), path.display()));
    let source = train_word_source(&lines, &cfg.words)?;
    let out = cfg.words_path();
    match &source {
        WordSource::Table(t) => {
            m.note(format!("{} word vectors", t.len()));
            write_file(&out, m, |w| Ok(t.write(w)?))
        }
        WordSource::Subword(s) => write_file(&out, m, |w| Ok(s.write(w)?)),
    }
}

fn import_words(cfg: &PipelineConfig, input: &Path, m: &mut RunManifest) -> Result<()> {
    if cfg.words.subword.is_some() {
        return Err(UsageError("import-words writes a vector table; unset `words.subword`".into()).into());
    }
    let mut table = EmbeddingTable::load(&existing(input.to_path_buf())?)?;
    let want = cfg.words.skipgram.dim;
    if table.dim() != want {
        return Err(t2n_core::Error::Config(format!(
            "{} has {}-dimensional vectors but words.skipgram.dim is {want}",
            input.display(),
            table.dim()
        ))
        .into());
    }
    if table.oov_vector().is_none() {
        m.note("no OOV vector in input; using the zero vector");
        table = table.with_oov(vec![0.0; want])?;
    }
    let out = cfg.words_path();
    write_file(&out, m, |w| Ok(table.write(w)?))
}

fn train(cfg: &PipelineConfig, parallel: bool, m: &mut RunManifest) -> Result<()> {
    let nodes = load_nodes(cfg)?;
    let encoder = PhraseEncoder::new(load_words(cfg)?, cfg.mapper.max_len)?;
    let pairs = load_pairs_checked(cfg, m)?;
    let arch = cfg.architecture(encoder.dim(), nodes.dim())?;
    let model = MappingModel::new(arch, cfg.model_seed())?;
    let mut train_cfg = cfg.mapper.train;
    train_cfg.parallel = parallel;
    let outcome = train_mapper(&pairs, &nodes, &encoder, model, &train_cfg)?;
    if let Some(last) = outcome.loss_history.last() {
        m.note(format!("final epoch loss {last}"));
    }
    write_file(&cfg.model_path(), m, |w| Ok(outcome.model.write(w)?))?;
    let loss_path = cfg.out("loss.csv");
    write_file(&loss_path, m, |w| write_loss(w, &outcome.loss_history))
}

fn write_loss(w: &mut impl Write, losses: &[f64]) -> Result<()> {
    writeln!(w, "epoch,loss")?;
    for (i, l) in losses.iter().enumerate() {
        writeln!(w, "{},{l}", i + 1)?;
    }
    Ok(())
}

fn map(
    cfg: &PipelineConfig,
    phrases: &[String],
    input: Option<&Path>,
    output: Option<&Path>,
    k: usize,
    parallel: bool,
    m: &mut RunManifest,
) -> Result<()> {
    let mut all: Vec<String> = phrases.to_vec();
    if let Some(path) = input {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        all.extend(text.lines().filter(|l| !l.trim().is_empty()).map(str::to_owned));
    }
    let nodes = load_nodes(cfg)?;
    let model = MappingModel::load(&cfg.model_path())?;
    let arch = model.architecture();
    let encoder = PhraseEncoder::new(load_words(cfg)?, arch.seq_len)?;
    if arch.input_dim != encoder.dim() || arch.output_dim != nodes.dim() {
        return Err(t2n_core::Error::Shape(format!(
            "model maps {}-dim words to {}-dim nodes but the inputs are {} and {}",
            arch.input_dim,
            arch.output_dim,
            encoder.dim(),
            nodes.dim()
        ))
        .into());
    }
    let index = NeighborIndex::build(&nodes, None, cfg.mapper.metric)?;
    let results = map_phrases(&encoder, &model, &index, &all, k, parallel)
        .into_iter()
        .collect::<t2n_core::Result<Vec<_>>>()?;
    m.note(format!("mapped {} phrases", all.len()));
    let rows = all.iter().map(String::as_str).zip(&results);
    match output {
        Some(path) => write_file(path, m, |w| Ok(write_mapping_csv(w, rows)?)),
        None => {
            let stdout = io::stdout();
            Ok(write_mapping_csv(stdout.lock(), rows)?)
        }
    }
}

fn eval(cfg: &PipelineConfig, protocol: Protocol, parallel: bool, m: &mut RunManifest) -> Result<()> {
    let graph = load_graph(cfg, m)?;
    let nodes = load_nodes(cfg)?;
    let encoder = PhraseEncoder::new(load_words(cfg)?, cfg.mapper.max_len)?;
    let pairs = load_pairs_checked(cfg, m)?;
    let pcfg = cfg.protocol_config(protocol, encoder.dim(), nodes.dim(), parallel)?;
    let inputs = ProtocolInputs {
        graph: &graph,
        nodes: &nodes,
        encoder: &encoder,
        pairs: &pairs,
    };
    let run = run_protocol(&inputs, &pcfg)?;
    let report = &run.report;
    for (i, k) in report.k_values.iter().enumerate() {
        let dist = report.mean_graph_distance[i].map_or("n/a".to_owned(), |d| format!("{d:.4}"));
        m.note(format!("{protocol} k={k}: accuracy {:.4}, mean graph distance {dist}", report.accuracy[i]));
    }
    m.note(format!("trained on {} pairs, evaluated {} phrases", run.train_pairs.len(), run.gold.len()));
    let dir = output_dir(cfg)?;
    let stem = protocol.as_str();
    write_file(&dir.join(format!("report_{stem}.json")), m, |w| Ok(w.write_all(report.to_json()?.as_bytes())?))?;
    write_file(&dir.join(format!("report_{stem}.csv")), m, |w| Ok(report.write_csv(w)?))?;
    write_file(&dir.join(format!("mapper_{stem}.ckpt")), m, |w| Ok(run.model.write(w)?))?;
    write_file(&dir.join(format!("loss_{stem}.csv")), m, |w| write_loss(w, &run.loss_history))
}
