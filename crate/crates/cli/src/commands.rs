use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;
use tpca::analysis::{attribute_probe, project, variance_score, write_radar, ProbeConfig};
use tpca::backend::{emb1, load_embeddings, write_embeddings};
use tpca::baselines::{agglomerative_cluster, most_frequent_words, pca_directions, spherical_kmeans, subsample};
use tpca::decoder::generate_average_phrase;
use tpca::fixtures::{standard_images, standard_lexg, standard_spec, COLORS, SCENES, TYPES, VIEWS};
use tpca::{
    generate_principal_phrases, open_backend, Backend, EmbeddingMatrix, Error, GuidanceConfig, LexicalGraph, PhraseSet,
    Result,
};

use crate::args::*;
use crate::manifest::Run;

fn pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn embeddings(run: &mut Run, path: &Path) -> Result<(Vec<String>, EmbeddingMatrix)> {
    let loaded = load_embeddings(path)?;
    run.note_input(path)?;
    run.note_input(&emb1::ids_path(path))?;
    Ok(loaded)
}

fn backend(run: &mut Run, spec: &str) -> Result<Box<dyn Backend>> {
    let b = open_backend(spec)?;
    if let Some(path) = spec.strip_prefix("toy:") {
        run.note_input(Path::new(path))?;
    }
    run.backend = Some(b.fingerprint());
    Ok(b)
}

fn phrases(run: &mut Run, path: &Path) -> Result<PhraseSet> {
    PhraseSet::from_json(&run.read_string(path)?)
}

fn graph(run: &mut Run, path: Option<&Path>) -> Result<LexicalGraph> {
    match path {
        Some(p) => LexicalGraph::parse(&run.read_string(p)?),
        None => Ok(LexicalGraph::empty()),
    }
}

/// Defaults, then the config file, then individual flags.
fn resolve_config(args: &GenerateArgs) -> Result<GuidanceConfig> {
    if let Some(cfg) = &args.resolved {
        cfg.validate()?;
        return Ok(cfg.clone());
    }
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))?
        }
        None => GuidanceConfig::default(),
    };
    if let Some(v) = args.lambda_v {
        cfg.lambda_v = v;
    }
    if let Some(v) = args.lambda_o {
        cfg.lambda_o = v;
    }
    if let Some(v) = args.num_phrases {
        cfg.num_phrases = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = &args.prompt {
        cfg.prompt = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The command as it will be replayed: the config file and flag overrides
/// are folded into one resolved config.
fn replayable(args: &GenerateArgs, cfg: GuidanceConfig) -> GenerateArgs {
    GenerateArgs {
        config: None,
        lambda_v: None,
        lambda_o: None,
        num_phrases: None,
        seed: None,
        prompt: None,
        resolved: Some(cfg),
        ..args.clone()
    }
}

/// Runs one command. Returns the replayable command and the run record when
/// the command writes a manifest.
pub fn execute(command: &Command) -> Result<Option<(Command, Run)>> {
    let mut run = Run::default();
    let replay = match command {
        Command::Average(a) => {
            let cfg = resolve_config(a)?;
            let (_, images) = embeddings(&mut run, &a.embeddings)?;
            let g = graph(&mut run, a.graph.as_deref())?;
            let b = backend(&mut run, &a.backend)?;
            let avg = generate_average_phrase(&images, b.as_ref(), &g, &cfg)?;
            ensure_dir(&a.out)?;
            let body = json!({
                "text": avg.text,
                "embedding": avg.embedding,
                "tokens": avg.tokens,
                "trace": avg.trace,
                "config": cfg,
                "backend": b.fingerprint(),
            });
            run.write(&a.out.join("average.json"), &pretty(&body)?)?;
            println!("{}", avg.text);
            Command::Average(replayable(a, cfg))
        }
        Command::Principal(a) => {
            let cfg = resolve_config(a)?;
            let (_, images) = embeddings(&mut run, &a.embeddings)?;
            let g = graph(&mut run, a.graph.as_deref())?;
            let b = backend(&mut run, &a.backend)?;
            let gen = generate_principal_phrases(&images, b.as_ref(), &g, &cfg)?;
            ensure_dir(&a.out)?;
            let mut text = gen.phrases.to_json()?;
            text.push('\n');
            run.write(&a.out.join("phrases.json"), text.as_bytes())?;
            println!("average: {}", gen.phrases.average.text);
            for (i, p) in gen.phrases.principals.iter().enumerate() {
                println!("{}: {}", i + 1, p.text);
            }
            Command::Principal(replayable(a, cfg))
        }
        Command::Baseline(a) => {
            let (_, images) = embeddings(&mut run, &a.embeddings)?;
            ensure_dir(&a.out)?;
            match a.method {
                BaselineMethod::Pca => {
                    let set = pca_directions(&images, a.k)?;
                    run.write(&a.out.join("directions.json"), &pretty(&set)?)?;
                }
                BaselineMethod::Kmeans => {
                    let km = spherical_kmeans(&images, a.k, a.seed)?;
                    let body = json!({
                        "method": km.centroids.method,
                        "directions": km.centroids.directions,
                        "stats": km.centroids.stats,
                        "assignment": km.assignment,
                        "objective": km.objective,
                        "converged": km.converged,
                    });
                    run.write(&a.out.join("directions.json"), &pretty(&body)?)?;
                }
                BaselineMethod::Freq => {
                    let spec = a
                        .backend
                        .as_deref()
                        .ok_or_else(|| Error::InvalidArgument("baseline freq needs --backend".into()))?;
                    let b = backend(&mut run, spec)?;
                    let words = most_frequent_words(&images, b.as_ref(), a.k, &a.prompt, a.max_tokens)?;
                    for w in &words {
                        println!("{}\t{}", w.word, w.count);
                    }
                    run.write(&a.out.join("words.json"), &pretty(&words)?)?;
                }
            }
            Command::Baseline(a.clone())
        }
        Command::Score(a) => {
            let set = phrases(&mut run, &a.phrases)?;
            let (_, images) = embeddings(&mut run, &a.embeddings)?;
            let report = variance_score(&set.principal_embeddings(), &images)?;
            println!("{}", report.overall);
            let Some(out) = &a.out else {
                return Ok(None);
            };
            ensure_dir(out)?;
            let body = json!({
                "labels": set.labels(),
                "per_phrase": report.per_phrase,
                "means": report.means,
                "overall": report.overall,
            });
            run.write(&out.join("score.json"), &pretty(&body)?)?;
            Command::Score(a.clone())
        }
        Command::Project(a) => {
            let set = phrases(&mut run, &a.phrases)?;
            let (ids, images) = embeddings(&mut run, &a.embeddings)?;
            let table = project(&set, &ids, &images, !a.raw)?;
            ensure_dir(&a.out)?;
            let body = json!({
                "image_ids": table.image_ids,
                "labels": table.labels,
                "centered": table.centered,
                "means": table.means,
                "values": table.values(),
            });
            run.write(&a.out.join("projections.json"), &pretty(&body)?)?;
            Command::Project(a.clone())
        }
        Command::Radar(a) => {
            let set = phrases(&mut run, &a.phrases)?;
            let (ids, images) = embeddings(&mut run, &a.embeddings)?;
            let table = project(&set, &ids, &images, true)?;
            ensure_dir(&a.out)?;
            let (svg, json) = write_radar(&table, &a.image_id, &a.out)?;
            run.note_output(&svg)?;
            run.note_output(&json)?;
            Command::Radar(a.clone())
        }
        Command::Probe(a) => {
            let set = phrases(&mut run, &a.phrases)?;
            let (ids, images) = embeddings(&mut run, &a.embeddings)?;
            let labels: LabelFile = serde_json::from_str(&run.read_string(&a.labels)?)?;
            let rows = labels.rows(&ids)?;
            let table = project(&set, &ids, &images, true)?;
            let cfg = ProbeConfig {
                hidden: a.hidden,
                seed: a.seed,
                ..Default::default()
            };
            let result = attribute_probe(&table, &rows, &cfg)?;
            for (name, acc) in labels.attributes.iter().zip(&result.accuracies) {
                println!("{name}\t{acc}");
            }
            ensure_dir(&a.out)?;
            let body = json!({ "attributes": labels.attributes, "result": result });
            run.write(&a.out.join("probe.json"), &pretty(&body)?)?;
            Command::Probe(a.clone())
        }
        Command::Cluster(a) => {
            let (ids, images) = embeddings(&mut run, &a.embeddings)?;
            let tree = agglomerative_cluster(&images, a.k)?;
            ensure_dir(&a.out)?;
            let body = json!({ "image_ids": ids, "tree": tree });
            run.write(&a.out.join("clusters.json"), &pretty(&body)?)?;
            Command::Cluster(a.clone())
        }
        Command::Subsample(a) => {
            let (ids, images) = embeddings(&mut run, &a.embeddings)?;
            let (ids, images) = subsample(&ids, &images, a.count, a.seed)?;
            ensure_dir(&a.out)?;
            let path = a.out.join("subset.emb");
            write_embeddings(&path, &ids, &images)?;
            run.note_output(&path)?;
            run.note_output(&emb1::ids_path(&path))?;
            Command::Subsample(a.clone())
        }
        Command::ToyFixture(a) => {
            ensure_dir(&a.out)?;
            let spec = standard_spec();
            run.write(&a.out.join("toy.json"), &pretty(&spec)?)?;
            let backend = tpca::backend::ToyBackend::new(spec)?;
            let set = standard_images(&backend);
            let path = a.out.join("cars.emb");
            write_embeddings(&path, &set.ids, &set.images)?;
            run.note_output(&path)?;
            run.note_output(&emb1::ids_path(&path))?;
            run.write(&a.out.join("lex.tsv"), standard_lexg().as_bytes())?;
            let attributes: Vec<&str> = TYPES.iter().chain(&COLORS).chain(&VIEWS).chain(&SCENES).copied().collect();
            let labels = LabelFile {
                labels: set.ids.iter().cloned().zip(set.labels(&attributes)).collect(),
                attributes: attributes.iter().map(|s| s.to_string()).collect(),
            };
            run.write(&a.out.join("attributes.json"), &pretty(&labels)?)?;
            Command::ToyFixture(a.clone())
        }
    };
    Ok(Some((replay, run)))
}

/// Output directory of a command, where its manifest goes.
pub fn out_dir(command: &Command) -> Option<&Path> {
    Some(match command {
        Command::Average(a) | Command::Principal(a) => &a.out,
        Command::Baseline(a) => &a.out,
        Command::Score(a) => a.out.as_ref()?,
        Command::Project(a) => &a.out,
        Command::Radar(a) => &a.out,
        Command::Probe(a) => &a.out,
        Command::Cluster(a) => &a.out,
        Command::Subsample(a) => &a.out,
        Command::ToyFixture(a) => &a.out,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelFile {
    attributes: Vec<String>,
    labels: BTreeMap<String, Vec<bool>>,
}

impl LabelFile {
    fn rows(&self, ids: &[String]) -> Result<Vec<Vec<bool>>> {
        ids.iter()
            .map(|id| {
                let row = self
                    .labels
                    .get(id)
                    .ok_or_else(|| Error::InvalidArgument(format!("no labels for image `{id}`")))?;
                if row.len() != self.attributes.len() {
                    return Err(Error::InvalidArgument(format!(
                        "image `{id}` has {} labels, expected {}",
                        row.len(),
                        self.attributes.len()
                    )));
                }
                Ok(row.clone())
            })
            .collect()
    }
}
