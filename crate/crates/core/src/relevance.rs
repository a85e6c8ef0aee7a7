//! Per-object contextual relevance metrics.
//!
//! Vision-based metrics compare the object's image embedding with the whole
//! image and with its neighbours; language-based metrics compare the object's
//! name with the caption sentences and with neighbour names. The combined
//! metric adds the object-to-image similarity to the overall language score.
//!
//! A missing input never becomes zero: every metric that depends on it is
//! reported as missing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{ObjectRecord, SceneBundle};
use crate::geometry::{clip_to_image, is_adjacent, position, proportion, BBox, PositionCategory};
use crate::lexicon::{fallback_sentence_embedding, lookup_name, WordVectorStore};
use crate::saliency::{load_gray, object_saliency, spectral_residual, SaliencyReduce, SrParams};
use crate::vecmath::{cosine, Vector};

#[derive(Debug, Error)]
pub enum RelevanceError {
    #[error("unknown object '{0}'")]
    UnknownObject(String),
    #[error("invalid bundle: {0}")]
    InvalidBundle(String),
    #[error("saliency for {path}: {source}")]
    Saliency {
        path: PathBuf,
        source: crate::saliency::SaliencyError,
    },
}

/// Which objects count as "surrounding" a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborhoodPolicy {
    /// Objects whose boxes share positive area with the target's box.
    AdjacentOverlap,
    AllOthers,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub vision_neighborhood: NeighborhoodPolicy,
    pub language_neighborhood: NeighborhoodPolicy,
    /// Also add the object-to-image cosine into `objs_vissim`.
    pub objs_include_image: bool,
    pub sr_params: SrParams,
    pub saliency_reduce: SaliencyReduce,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            vision_neighborhood: NeighborhoodPolicy::AdjacentOverlap,
            language_neighborhood: NeighborhoodPolicy::AllOthers,
            objs_include_image: false,
            sr_params: SrParams::default(),
            saliency_reduce: SaliencyReduce::Mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub image_id: String,
    pub object_id: String,
    pub name: String,
    pub obj_image_vissim: Option<f64>,
    pub objs_vissim: Option<f64>,
    pub overall_vissim: Option<f64>,
    pub sent_semsim: Option<f64>,
    pub words_semsim: Option<f64>,
    pub concepts_semsim: Option<f64>,
    pub overall_semsim: Option<f64>,
    pub sum_vissem_sim: Option<f64>,
    pub proportion: f64,
    pub saliency: Option<f64>,
    pub position: PositionCategory,
}

/// The eight relevance metrics, in output column order.
pub const METRIC_NAMES: [&str; 8] = [
    "obj_image_vissim",
    "objs_vissim",
    "overall_vissim",
    "sent_semsim",
    "words_semsim",
    "concepts_semsim",
    "overall_semsim",
    "sum_vissem_sim",
];

impl MetricRow {
    pub fn metric(&self, name: &str) -> Option<Option<f64>> {
        Some(match name {
            "obj_image_vissim" => self.obj_image_vissim,
            "objs_vissim" => self.objs_vissim,
            "overall_vissim" => self.overall_vissim,
            "sent_semsim" => self.sent_semsim,
            "words_semsim" => self.words_semsim,
            "concepts_semsim" => self.concepts_semsim,
            "overall_semsim" => self.overall_semsim,
            "sum_vissem_sim" => self.sum_vissem_sim,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneDiagnostics {
    pub image_id: String,
    pub objects: usize,
    /// Neighbour embeddings skipped in `objs_vissim` because their norm was zero.
    pub vision_neighbors_skipped: usize,
    /// Neighbour names with no word vector, skipped in `words_semsim`.
    pub word_neighbors_skipped: usize,
    pub concept_neighbors_skipped: usize,
    pub names_without_word_vector: Vec<String>,
    pub names_without_concept_vector: Vec<String>,
    pub missing: std::collections::BTreeMap<String, usize>,
    pub saliency_computed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
    pub diagnostics: SceneDiagnostics,
}

/// Sum of cosines over a neighbourhood, with the number of neighbours skipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborSum {
    pub value: f64,
    pub skipped: usize,
}

fn add(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? + b?)
}

pub fn neighbors<'a>(
    scene: &'a SceneBundle,
    target_id: &str,
    policy: NeighborhoodPolicy,
) -> Result<Vec<&'a ObjectRecord>, RelevanceError> {
    let target = scene
        .object(target_id)
        .ok_or_else(|| RelevanceError::UnknownObject(target_id.to_string()))?;
    Ok(scene
        .objects
        .iter()
        .filter(|o| o.object_id != target.object_id)
        .filter(|o| match policy {
            NeighborhoodPolicy::AllOthers => true,
            NeighborhoodPolicy::AdjacentOverlap => is_adjacent(&target.bbox, &o.bbox),
        })
        .collect())
}

pub fn obj_image_vissim(obj: &ObjectRecord, scene: &SceneBundle) -> Option<f64> {
    cosine(&obj.embedding, &scene.image_embedding).ok()
}

pub fn objs_vissim(
    obj: &ObjectRecord,
    scene: &SceneBundle,
    policy: NeighborhoodPolicy,
) -> Result<NeighborSum, RelevanceError> {
    let mut sum = NeighborSum { value: 0.0, skipped: 0 };
    for n in neighbors(scene, &obj.object_id, policy)? {
        match cosine(&obj.embedding, &n.embedding) {
            Ok(c) => sum.value += c,
            Err(_) => sum.skipped += 1,
        }
    }
    Ok(sum)
}

pub fn overall_vissim(
    obj: &ObjectRecord,
    scene: &SceneBundle,
    policy: NeighborhoodPolicy,
) -> Result<Option<f64>, RelevanceError> {
    let objs = objs_vissim(obj, scene, policy)?;
    Ok(add(obj_image_vissim(obj, scene), Some(objs.value)))
}

/// Split a caption into sentences on `.`, `!`, `?` and `;`.
pub fn split_sentences(caption: &str) -> Vec<&str> {
    caption
        .split(['.', '!', '?', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Highest cosine between the object name and any caption sentence.
///
/// Precomputed sentence-encoder embeddings are used when the bundle carries
/// them for both the name and the caption; otherwise both sides fall back to
/// bag-of-words embeddings from `store`, so the two vectors always come from
/// the same space.
pub fn sent_semsim(obj: &ObjectRecord, scene: &SceneBundle, store: &WordVectorStore) -> Option<f64> {
    let (name_vec, sentence_vecs): (Vector, Vec<Vector>) =
        match (&obj.name_text_embedding, &scene.caption_sentence_embeddings) {
            (Some(name), Some(sentences)) => (name.clone(), sentences.clone()),
            _ => (
                fallback_sentence_embedding(store, &obj.name)?,
                split_sentences(&scene.caption)
                    .into_iter()
                    .filter_map(|s| fallback_sentence_embedding(store, s))
                    .collect(),
            ),
        };
    sentence_vecs
        .iter()
        .filter_map(|s| cosine(&name_vec, s).ok())
        .reduce(f64::max)
}

/// Sum of word-vector cosines between the target name and neighbour names.
/// Missing when the target name itself has no vector.
pub fn words_semsim(
    obj: &ObjectRecord,
    scene: &SceneBundle,
    store: &WordVectorStore,
    policy: NeighborhoodPolicy,
) -> Result<Option<NeighborSum>, RelevanceError> {
    let neighbors = neighbors(scene, &obj.object_id, policy)?;
    let Some(target) = lookup_name(store, &obj.name) else {
        return Ok(None);
    };
    let mut sum = NeighborSum { value: 0.0, skipped: 0 };
    for n in neighbors {
        match lookup_name(store, &n.name).and_then(|v| cosine(&target, &v).ok()) {
            Some(c) => sum.value += c,
            None => sum.skipped += 1,
        }
    }
    Ok(Some(sum))
}

/// `words_semsim` computed against the alternate concept-vector store.
pub fn concepts_semsim(
    obj: &ObjectRecord,
    scene: &SceneBundle,
    concepts: &WordVectorStore,
    policy: NeighborhoodPolicy,
) -> Result<Option<NeighborSum>, RelevanceError> {
    words_semsim(obj, scene, concepts, policy)
}

pub fn overall_semsim(sent: Option<f64>, words: Option<f64>) -> Option<f64> {
    add(sent, words)
}

pub fn sum_vissem_sim(overall_semsim: Option<f64>, obj_image_vissim: Option<f64>) -> Option<f64> {
    add(overall_semsim, obj_image_vissim)
}

fn scale_box(b: &BBox, sx: f64, sy: f64) -> BBox {
    BBox::new(b.x * sx, b.y * sy, b.w * sx, b.h * sy)
}

/// Compute every metric for every object of a scene, in bundle order.
///
/// `image_root` resolves a relative `image_path`; saliency is only computed
/// when the bundle names an image.
pub fn compute_metric_table(
    scene: &SceneBundle,
    store: &WordVectorStore,
    concepts: Option<&WordVectorStore>,
    options: &MetricOptions,
    image_root: Option<&Path>,
) -> Result<MetricTable, RelevanceError> {
    let report = scene.validate();
    if let Some(e) = report.errors.first() {
        return Err(RelevanceError::InvalidBundle(format!("{}: {}", e.path, e.message)));
    }
    let dims = scene.dims();
    let mut scene = scene.clone();
    for o in &mut scene.objects {
        o.bbox =
            clip_to_image(o.bbox, dims).map_err(|e| RelevanceError::InvalidBundle(format!("{}: {e}", o.object_id)))?;
    }
    let scene = &scene;

    let saliency_map = match &scene.image_path {
        Some(p) => {
            let path = match image_root {
                Some(root) if Path::new(p).is_relative() => root.join(p),
                _ => PathBuf::from(p),
            };
            let image = load_gray(&path).map_err(|source| RelevanceError::Saliency {
                path: path.clone(),
                source,
            })?;
            Some(
                spectral_residual(&image, &options.sr_params)
                    .map_err(|source| RelevanceError::Saliency { path, source })?,
            )
        }
        None => None,
    };

    let mut diag = SceneDiagnostics {
        image_id: scene.image_id.clone(),
        objects: scene.objects.len(),
        saliency_computed: saliency_map.is_some(),
        ..SceneDiagnostics::default()
    };
    for name in METRIC_NAMES.iter().chain(["saliency"].iter()) {
        diag.missing.insert(name.to_string(), 0);
    }

    let mut rows = Vec::with_capacity(scene.objects.len());
    for obj in &scene.objects {
        let image_sim = obj_image_vissim(obj, scene);
        let objs = objs_vissim(obj, scene, options.vision_neighborhood)?;
        diag.vision_neighbors_skipped += objs.skipped;
        let objs_value = if options.objs_include_image {
            image_sim.map(|c| c + objs.value)
        } else {
            Some(objs.value)
        };
        let overall_vis = add(image_sim, objs_value);

        let sent = sent_semsim(obj, scene, store);
        let words = words_semsim(obj, scene, store, options.language_neighborhood)?;
        match &words {
            Some(w) => diag.word_neighbors_skipped += w.skipped,
            None => diag.names_without_word_vector.push(obj.name.clone()),
        }
        let words = words.map(|w| w.value);
        let concepts_value = match concepts {
            Some(c) => {
                let s = concepts_semsim(obj, scene, c, options.language_neighborhood)?;
                match &s {
                    Some(w) => diag.concept_neighbors_skipped += w.skipped,
                    None => diag.names_without_concept_vector.push(obj.name.clone()),
                }
                s.map(|w| w.value)
            }
            None => None,
        };
        let overall_sem = overall_semsim(sent, words);
        let combined = sum_vissem_sim(overall_sem, image_sim);

        let saliency = saliency_map.as_ref().and_then(|map| {
            let sx = map.width as f64 / dims.width as f64;
            let sy = map.height as f64 / dims.height as f64;
            object_saliency(map, &scale_box(&obj.bbox, sx, sy), options.saliency_reduce)
        });

        let row = MetricRow {
            image_id: scene.image_id.clone(),
            object_id: obj.object_id.clone(),
            name: obj.name.clone(),
            obj_image_vissim: image_sim,
            objs_vissim: objs_value,
            overall_vissim: overall_vis,
            sent_semsim: sent,
            words_semsim: words,
            concepts_semsim: concepts_value,
            overall_semsim: overall_sem,
            sum_vissem_sim: combined,
            proportion: proportion(&obj.bbox, dims).map_err(|e| RelevanceError::InvalidBundle(e.to_string()))?,
            saliency,
            position: position(&obj.bbox, dims),
        };
        for name in METRIC_NAMES {
            if row.metric(name) == Some(None) {
                *diag.missing.get_mut(name).expect("seeded") += 1;
            }
        }
        if row.saliency.is_none() {
            *diag.missing.get_mut("saliency").expect("seeded") += 1;
        }
        rows.push(row);
    }
    Ok(MetricTable {
        rows,
        diagnostics: diag,
    })
}
