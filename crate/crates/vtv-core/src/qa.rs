//! Templated QA dataset factory: selection, filtration, and structured
//! question formulation over annotated visuo-tactile videos, plus
//! attribute-distribution validation and disjoint stage splits.
//!
//! Comparatives rest on the ordinal encoding of each attribute's three
//! levels (0 < 1 < 2 in declaration order).

use crate::model::{
    ElasticityLevel, FrictionLevel, HardnessLevel, Manifest, ProtrusionLevel, SensorKind,
    TactileAnnotation,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QaError {
    #[error("object {0} has no annotation")]
    MissingAnnotation(String),
    #[error("task {task:?} has no feasible tuples after filtration")]
    InfeasibleMix { task: TaskKind },
    #[error("task mix proportions must sum to 1, got {0}")]
    BadMix(f64),
    #[error("annotation table is empty")]
    EmptyTable,
    #[error("count must be >= 1")]
    ZeroCount,
    #[error("held-out object set too small: have {have}, need {need}")]
    InsufficientHeldOutObjects { have: usize, need: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

/// The four tactile attributes, each on a three-level ordinal scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Hardness,
    Protrusion,
    Elasticity,
    Friction,
}

pub const ATTRIBUTES: [AttributeKind; 4] = [
    AttributeKind::Hardness,
    AttributeKind::Protrusion,
    AttributeKind::Elasticity,
    AttributeKind::Friction,
];

impl AttributeKind {
    pub fn noun(self) -> &'static str {
        match self {
            AttributeKind::Hardness => "hardness",
            AttributeKind::Protrusion => "protrusion",
            AttributeKind::Elasticity => "elasticity",
            AttributeKind::Friction => "friction",
        }
    }

    pub fn level_names(self) -> [&'static str; 3] {
        match self {
            AttributeKind::Hardness => {
                ["highly deformable", "moderately deformable", "extremely hard"]
            }
            AttributeKind::Protrusion => ["absent", "moderate", "strong"],
            AttributeKind::Elasticity => ["none", "moderate", "strong"],
            AttributeKind::Friction => ["slight", "moderate", "strong"],
        }
    }

    /// Ordinal level (0 < 1 < 2) of this attribute in an annotation.
    pub fn level_of(self, a: &TactileAnnotation) -> usize {
        match self {
            AttributeKind::Hardness => a.hardness as usize,
            AttributeKind::Protrusion => a.protrusion as usize,
            AttributeKind::Elasticity => a.elasticity as usize,
            AttributeKind::Friction => a.friction as usize,
        }
    }
}

/// QA task families. `TactileScenarioAnalysis` is evaluation-only and never
/// appears in training mixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    FeatureAssessmentSingle,
    FeatureAssessmentCombined,
    SurfaceFeatureDistinction,
    SurfaceOptimalityIdentification,
    ObjectSensationCorrelation,
    TextureOptimalSelection,
    TactileScenarioAnalysis,
}

impl TaskKind {
    pub fn arity(self) -> usize {
        match self {
            TaskKind::FeatureAssessmentSingle
            | TaskKind::FeatureAssessmentCombined
            | TaskKind::ObjectSensationCorrelation => 1,
            TaskKind::SurfaceFeatureDistinction => 2,
            TaskKind::SurfaceOptimalityIdentification
            | TaskKind::TextureOptimalSelection
            | TaskKind::TactileScenarioAnalysis => 3,
        }
    }
}

/// One row of the joined annotation table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub video: String,
    pub object_id: String,
    pub region_id: u32,
    pub sensor: SensorKind,
    pub annotation: TactileAnnotation,
}

/// Joined annotation table keyed by (object_id, region_id, sensor).
#[derive(Debug, Clone, Default)]
pub struct AnnotationTable {
    pub rows: Vec<TableRow>,
    pub warnings: Vec<String>,
}

impl AnnotationTable {
    pub fn object_ids(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.rows.iter().map(|r| r.object_id.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    /// One annotation per distinct object (rows share the object's labels).
    pub fn object_annotations(&self) -> Vec<TactileAnnotation> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for r in &self.rows {
            if seen.insert(r.object_id.clone()) {
                out.push(r.annotation.clone());
            }
        }
        out
    }

    /// Keep only rows whose object passes the predicate.
    pub fn filter_objects(&self, keep: impl Fn(&str) -> bool) -> AnnotationTable {
        AnnotationTable {
            rows: self
                .rows
                .iter()
                .filter(|r| keep(&r.object_id))
                .cloned()
                .collect(),
            warnings: Vec::new(),
        }
    }
}

/// Join a manifest against an annotation list. Duplicate annotations for
/// one object resolve last-write-wins with a warning; an unannotated
/// object is an error.
pub fn load_annotations(
    manifest: &Manifest,
    annotations: &[TactileAnnotation],
) -> Result<AnnotationTable, QaError> {
    let mut by_object: HashMap<&str, &TactileAnnotation> = HashMap::new();
    let mut warnings = Vec::new();
    for a in annotations {
        if by_object.insert(a.object_id.as_str(), a).is_some() {
            warnings.push(format!(
                "duplicate annotation for object {}; keeping the last one",
                a.object_id
            ));
        }
    }
    let mut rows = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        let ann = by_object
            .get(e.object_id.as_str())
            .ok_or_else(|| QaError::MissingAnnotation(e.object_id.clone()))?;
        rows.push(TableRow {
            video: e.video.clone(),
            object_id: e.object_id.clone(),
            region_id: e.region_id,
            sensor: e.sensor,
            annotation: (*ann).clone(),
        });
    }
    Ok(AnnotationTable { rows, warnings })
}

/// Structured ground truth attached to a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundTruth {
    Level {
        attribute: AttributeKind,
        level: usize,
    },
    Levels {
        hardness: usize,
        protrusion: usize,
        elasticity: usize,
        friction: usize,
    },
    SelectedIndex {
        index: usize,
    },
    ObjectId {
        object_id: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAPair {
    pub id: String,
    pub task: TaskKind,
    pub video_refs: Vec<String>,
    pub question: String,
    pub answer: String,
    pub ground_truth: GroundTruth,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attribute: Option<AttributeKind>,
}

/// Task mix: per-task proportions that must sum to 1.
pub type TaskMix = BTreeMap<TaskKind, f64>;

/// Default training mix (no TSA).
pub fn default_train_mix() -> TaskMix {
    BTreeMap::from([
        (TaskKind::FeatureAssessmentSingle, 0.25),
        (TaskKind::FeatureAssessmentCombined, 0.15),
        (TaskKind::SurfaceFeatureDistinction, 0.20),
        (TaskKind::SurfaceOptimalityIdentification, 0.15),
        (TaskKind::ObjectSensationCorrelation, 0.10),
        (TaskKind::TextureOptimalSelection, 0.15),
    ])
}

/// Default evaluation mix (includes TSA).
pub fn default_test_mix() -> TaskMix {
    BTreeMap::from([
        (TaskKind::FeatureAssessmentSingle, 0.20),
        (TaskKind::FeatureAssessmentCombined, 0.10),
        (TaskKind::SurfaceFeatureDistinction, 0.20),
        (TaskKind::SurfaceOptimalityIdentification, 0.15),
        (TaskKind::ObjectSensationCorrelation, 0.10),
        (TaskKind::TextureOptimalSelection, 0.15),
        (TaskKind::TactileScenarioAnalysis, 0.10),
    ])
}

const SINGLE_TEMPLATES: [&str; 3] = [
    "Based on the tactile video, what is the {attr} of the object?",
    "Watch the contact sequence and describe the object's {attr}.",
    "From the recorded interaction, how would you rate the {attr} of this surface?",
];

const COMBINED_TEMPLATES: [&str; 3] = [
    "Assess all four tactile attributes of the object in the video.",
    "Give a full tactile profile (hardness, protrusion, elasticity, friction) for this object.",
    "What are the hardness, protrusion, elasticity, and friction of the touched surface?",
];

const SFD_TEMPLATES: [&str; 3] = [
    "Comparing the two videos, which object exhibits {comparator} {attr}?",
    "Between video 1 and video 2, which surface shows {comparator} {attr}?",
    "Which of the two touched objects has {comparator} {attr}?",
];

const SOI_TEMPLATES: [&str; 3] = [
    "Among the {n} videos, which object exhibits the {comparator} {attr}?",
    "Across these {n} recordings, identify the surface with the {comparator} {attr}.",
    "Which of the {n} touched objects shows the {comparator} degree of {attr}?",
];

const OSC_TEMPLATES: [&str; 3] = [
    "The touched surface feels {profile}. Which of these objects is it: {candidates}?",
    "Given a tactile sensation described as {profile}, which object was touched: {candidates}?",
    "An object feels {profile} on contact. Identify it among: {candidates}.",
];

const TOS_TEMPLATES: [&str; 3] = [
    "You need {scenario}. Among the {n} videos, which object's texture is the best choice?",
    "For {scenario}, which of the {n} touched surfaces would you select?",
    "Pick the most suitable of the {n} objects for {scenario}.",
];

const TSA_TEMPLATES: [&str; 3] = [
    "Scenario: {scenario}. Reasoning over the {n} tactile videos, which object should be used?",
    "In a situation where {scenario_desc}, which of the {n} touched objects is the right pick?",
    "Apply haptic reasoning: {scenario}. Choose among the {n} objects.",
];

/// (scenario text, scenario description, attribute, wants max level)
const TOS_SCENARIOS: [(&str, AttributeKind, bool); 4] = [
    ("a firm grip on a slippery handle", AttributeKind::Friction, true),
    ("a smooth low-drag sliding contact", AttributeKind::Friction, false),
    ("a springy surface that bounces back", AttributeKind::Elasticity, true),
    ("a flat surface without bumps", AttributeKind::Protrusion, false),
];

const TSA_SCENARIOS: [(&str, &str, AttributeKind, bool); 4] = [
    (
        "you must cushion a fragile item during transport",
        "a fragile item needs padding",
        AttributeKind::Hardness,
        false,
    ),
    (
        "you need a stable base that will not compress under load",
        "a load-bearing support is required",
        AttributeKind::Hardness,
        true,
    ),
    (
        "you need to keep a tool from sliding off an inclined tray",
        "an object must stay put on a slope",
        AttributeKind::Friction,
        true,
    ),
    (
        "you want a strap that stretches and recovers its shape",
        "an elastic fastener is needed",
        AttributeKind::Elasticity,
        true,
    ),
];

struct Generator<'a> {
    table: &'a AnnotationTable,
    rng: ChaCha8Rng,
    /// Distinct objects with one representative row index each.
    object_rows: Vec<Vec<usize>>,
}

impl<'a> Generator<'a> {
    fn new(table: &'a AnnotationTable, seed: u64) -> Self {
        let mut by_object: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in table.rows.iter().enumerate() {
            by_object.entry(r.object_id.as_str()).or_default().push(i);
        }
        Self {
            table,
            rng: ChaCha8Rng::seed_from_u64(seed),
            object_rows: by_object.into_values().collect(),
        }
    }

    fn object_count(&self) -> usize {
        self.object_rows.len()
    }

    fn annotation_of_object(&self, obj: usize) -> &TactileAnnotation {
        &self.table.rows[self.object_rows[obj][0]].annotation
    }

    /// One random row for an object (a region/sensor recording).
    fn draw_row(&mut self, obj: usize) -> &TableRow {
        let rows = &self.object_rows[obj];
        let i = rows[self.rng.gen_range(0..rows.len())];
        &self.table.rows[i]
    }

    /// Distinct-object sample of size n.
    fn draw_objects(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.object_count()).collect();
        idx.shuffle(&mut self.rng);
        idx.truncate(n);
        idx
    }

    fn pick<'t>(&mut self, templates: &[&'t str]) -> &'t str {
        templates[self.rng.gen_range(0..templates.len())]
    }

    fn pick_attribute(&mut self) -> AttributeKind {
        ATTRIBUTES[self.rng.gen_range(0..4)]
    }

    /// Attributes for which two distinct objects have different levels.
    fn discriminating_attributes(&self) -> Vec<AttributeKind> {
        ATTRIBUTES
            .iter()
            .copied()
            .filter(|&attr| {
                let mut levels = BTreeSet::new();
                for rows in &self.object_rows {
                    levels.insert(attr.level_of(&self.table.rows[rows[0]].annotation));
                }
                levels.len() >= 2
            })
            .collect()
    }

    fn feasible(&self, task: TaskKind) -> bool {
        let objects = self.object_count();
        if objects == 0 {
            return false;
        }
        match task {
            TaskKind::FeatureAssessmentSingle | TaskKind::FeatureAssessmentCombined => true,
            TaskKind::SurfaceFeatureDistinction => {
                objects >= 2 && !self.discriminating_attributes().is_empty()
            }
            TaskKind::SurfaceOptimalityIdentification => {
                objects >= 3 && !self.discriminating_attributes().is_empty()
            }
            TaskKind::ObjectSensationCorrelation => {
                // some object's full profile differs from >= 2 other objects'
                objects >= 3
                    && (0..objects).any(|i| {
                        let a = self.annotation_of_object(i);
                        (0..objects)
                            .filter(|&j| j != i && profile(self.annotation_of_object(j)) != profile(a))
                            .count()
                            >= 2
                    })
            }
            TaskKind::TextureOptimalSelection | TaskKind::TactileScenarioAnalysis => {
                objects >= 3
                    && TOS_SCENARIOS
                        .iter()
                        .map(|s| s.1)
                        .chain(TSA_SCENARIOS.iter().map(|s| s.2))
                        .any(|attr| self.discriminating_attributes().contains(&attr))
            }
        }
    }

    fn generate(&mut self, task: TaskKind, id: String) -> Result<QAPair, QaError> {
        const MAX_ATTEMPTS: usize = 5000;
        for _ in 0..MAX_ATTEMPTS {
            if let Some(pair) = self.attempt(task, &id) {
                return Ok(pair);
            }
        }
        Err(QaError::InfeasibleMix { task })
    }

    fn attempt(&mut self, task: TaskKind, id: &str) -> Option<QAPair> {
        match task {
            TaskKind::FeatureAssessmentSingle => {
                let obj = self.draw_objects(1)[0];
                let attr = self.pick_attribute();
                let template = self.pick(&SINGLE_TEMPLATES);
                let row = self.draw_row(obj).clone();
                let level = attr.level_of(&row.annotation);
                Some(QAPair {
                    id: id.into(),
                    task,
                    video_refs: vec![row.video],
                    question: template.replace("{attr}", attr.noun()),
                    answer: format!(
                        "The {} of the object is {}.",
                        attr.noun(),
                        attr.level_names()[level]
                    ),
                    ground_truth: GroundTruth::Level {
                        attribute: attr,
                        level,
                    },
                    comparator: None,
                    attribute: Some(attr),
                })
            }
            TaskKind::FeatureAssessmentCombined => {
                let obj = self.draw_objects(1)[0];
                let template = self.pick(&COMBINED_TEMPLATES);
                let row = self.draw_row(obj).clone();
                let a = &row.annotation;
                let answer = format!(
                    "Hardness: {}; protrusion: {}; elasticity: {}; friction: {}.",
                    AttributeKind::Hardness.level_names()[a.hardness as usize],
                    AttributeKind::Protrusion.level_names()[a.protrusion as usize],
                    AttributeKind::Elasticity.level_names()[a.elasticity as usize],
                    AttributeKind::Friction.level_names()[a.friction as usize],
                );
                Some(QAPair {
                    id: id.into(),
                    task,
                    video_refs: vec![row.video.clone()],
                    question: template.to_string(),
                    answer,
                    ground_truth: GroundTruth::Levels {
                        hardness: a.hardness as usize,
                        protrusion: a.protrusion as usize,
                        elasticity: a.elasticity as usize,
                        friction: a.friction as usize,
                    },
                    comparator: None,
                    attribute: None,
                })
            }
            TaskKind::SurfaceFeatureDistinction => {
                if self.object_count() < 2 {
                    return None;
                }
                let objs = self.draw_objects(2);
                let attr = self.pick_attribute();
                let comparator = if self.rng.gen_bool(0.5) { "more" } else { "less" };
                let la = attr.level_of(self.annotation_of_object(objs[0]));
                let lb = attr.level_of(self.annotation_of_object(objs[1]));
                if la == lb {
                    return None; // filtration: no discriminating attribute value
                }
                let winner = match comparator {
                    "more" => usize::from(lb > la),
                    _ => usize::from(lb < la),
                };
                let template = self.pick(&SFD_TEMPLATES);
                let refs: Vec<String> =
                    objs.iter().map(|&o| self.draw_row(o).video.clone()).collect();
                Some(QAPair {
                    id: id.into(),
                    task,
                    video_refs: refs,
                    question: template
                        .replace("{comparator}", comparator)
                        .replace("{attr}", attr.noun()),
                    answer: format!("Video {} shows {} {}.", winner + 1, comparator, attr.noun()),
                    ground_truth: GroundTruth::SelectedIndex { index: winner },
                    comparator: Some(comparator.into()),
                    attribute: Some(attr),
                })
            }
            TaskKind::SurfaceOptimalityIdentification => {
                self.extremum_pair(task, id, None, None, &SOI_TEMPLATES)
            }
            TaskKind::TextureOptimalSelection => {
                let s = TOS_SCENARIOS[self.rng.gen_range(0..TOS_SCENARIOS.len())];
                self.extremum_pair(task, id, Some((s.0, s.0)), Some((s.1, s.2)), &TOS_TEMPLATES)
            }
            TaskKind::TactileScenarioAnalysis => {
                let s = TSA_SCENARIOS[self.rng.gen_range(0..TSA_SCENARIOS.len())];
                self.extremum_pair(task, id, Some((s.0, s.1)), Some((s.2, s.3)), &TSA_TEMPLATES)
            }
            TaskKind::ObjectSensationCorrelation => {
                if self.object_count() < 3 {
                    return None;
                }
                let objs = self.draw_objects(3);
                let truth = objs[0];
                let truth_profile = profile(self.annotation_of_object(truth));
                // filtration: distractor profiles must differ from the truth
                if objs[1..]
                    .iter()
                    .any(|&o| profile(self.annotation_of_object(o)) == truth_profile)
                {
                    return None;
                }
                let template = self.pick(&OSC_TEMPLATES);
                let a = self.annotation_of_object(truth).clone();
                let profile_text = format!(
                    "{} in hardness, {} protrusion, {} elasticity, and {} friction",
                    AttributeKind::Hardness.level_names()[a.hardness as usize],
                    AttributeKind::Protrusion.level_names()[a.protrusion as usize],
                    AttributeKind::Elasticity.level_names()[a.elasticity as usize],
                    AttributeKind::Friction.level_names()[a.friction as usize],
                );
                let mut candidates: Vec<String> = objs
                    .iter()
                    .map(|&o| self.table.rows[self.object_rows[o][0]].object_id.clone())
                    .collect();
                candidates.sort();
                let truth_id = self.table.rows[self.object_rows[truth][0]].object_id.clone();
                let row = self.draw_row(truth).clone();
                Some(QAPair {
                    id: id.into(),
                    task,
                    video_refs: vec![row.video],
                    question: template
                        .replace("{profile}", &profile_text)
                        .replace("{candidates}", &candidates.join(", ")),
                    answer: format!("The touched object is {truth_id}."),
                    ground_truth: GroundTruth::ObjectId {
                        object_id: truth_id,
                    },
                    comparator: None,
                    attribute: None,
                })
            }
        }
    }

    /// Shared path for the argmax/argmin tuple tasks (SOI, TOS, TSA).
    fn extremum_pair(
        &mut self,
        task: TaskKind,
        id: &str,
        scenario: Option<(&str, &str)>,
        forced: Option<(AttributeKind, bool)>,
        templates: &[&str],
    ) -> Option<QAPair> {
        if self.object_count() < 3 {
            return None;
        }
        let n = 3;
        let objs = self.draw_objects(n);
        let (attr, want_max) = match forced {
            Some(f) => f,
            None => (self.pick_attribute(), self.rng.gen_bool(0.5)),
        };
        let levels: Vec<usize> = objs
            .iter()
            .map(|&o| attr.level_of(self.annotation_of_object(o)))
            .collect();
        let best = if want_max {
            *levels.iter().max().unwrap()
        } else {
            *levels.iter().min().unwrap()
        };
        // filtration: the extremum must be unique
        if levels.iter().filter(|&&l| l == best).count() != 1 {
            return None;
        }
        let winner = levels.iter().position(|&l| l == best).unwrap();
        let comparator = if want_max { "most" } else { "least" };
        let template = self.pick(templates);
        let refs: Vec<String> = objs.iter().map(|&o| self.draw_row(o).video.clone()).collect();
        let question = {
            let mut q = template
                .replace("{n}", &n.to_string())
                .replace("{comparator}", comparator)
                .replace("{attr}", attr.noun());
            if let Some((text, desc)) = scenario {
                q = q.replace("{scenario}", text).replace("{scenario_desc}", desc);
            }
            q
        };
        Some(QAPair {
            id: id.into(),
            task,
            video_refs: refs,
            question,
            answer: format!(
                "Video {} shows the object with the {} {}.",
                winner + 1,
                comparator,
                attr.noun()
            ),
            ground_truth: GroundTruth::SelectedIndex { index: winner },
            comparator: Some(comparator.into()),
            attribute: Some(attr),
        })
    }
}

fn profile(a: &TactileAnnotation) -> (usize, usize, usize, usize) {
    (
        a.hardness as usize,
        a.protrusion as usize,
        a.elasticity as usize,
        a.friction as usize,
    )
}

fn check_mix(mix: &TaskMix) -> Result<(), QaError> {
    let sum: f64 = mix.values().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(QaError::BadMix(sum));
    }
    Ok(())
}

/// Generate exactly `count` pairs: selection samples candidate tuples,
/// filtration rejects tuples with no discriminating attribute, formulation
/// instantiates the template text and ground truth. Deterministic per seed.
pub fn generate_pairs(
    table: &AnnotationTable,
    mix: &TaskMix,
    count: usize,
    seed: u64,
    id_prefix: &str,
) -> Result<Vec<QAPair>, QaError> {
    if count == 0 {
        return Err(QaError::ZeroCount);
    }
    if table.rows.is_empty() {
        return Err(QaError::EmptyTable);
    }
    check_mix(mix)?;
    let mut gen = Generator::new(table, seed);
    for (&task, &p) in mix.iter() {
        if p > 0.0 && !gen.feasible(task) {
            return Err(QaError::InfeasibleMix { task });
        }
    }
    let tasks: Vec<(TaskKind, f64)> = mix.iter().map(|(&k, &v)| (k, v)).collect();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut roll = gen.rng.gen::<f64>();
        let mut chosen = tasks[tasks.len() - 1].0;
        for &(task, p) in &tasks {
            if roll < p {
                chosen = task;
                break;
            }
            roll -= p;
        }
        let id = format!("{id_prefix}{i:06}");
        out.push(gen.generate(chosen, id)?);
    }
    Ok(out)
}

/// Header record carried on the first line of every JSONL dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub record: String,
    pub schema_version: u32,
    pub seed: u64,
    pub count: usize,
    pub mix: BTreeMap<TaskKind, f64>,
    /// Special tokens a downstream LLM stage wraps video content with;
    /// recorded as metadata only.
    pub video_tokens: [String; 3],
}

pub fn dataset_header(seed: u64, count: usize, mix: &TaskMix) -> DatasetHeader {
    DatasetHeader {
        record: "header".into(),
        schema_version: 1,
        seed,
        count,
        mix: mix.clone(),
        video_tokens: [
            "<video_start>".into(),
            "<video>".into(),
            "<video_end>".into(),
        ],
    }
}

/// Write header + pairs as JSON Lines.
pub fn write_jsonl(
    path: impl AsRef<Path>,
    header: &DatasetHeader,
    pairs: &[QAPair],
) -> Result<(), QaError> {
    let mut out = Vec::new();
    serde_json::to_writer(&mut out, header)?;
    out.push(b'\n');
    for p in pairs {
        serde_json::to_writer(&mut out, p)?;
        out.push(b'\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<(DatasetHeader, Vec<QAPair>), QaError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: DatasetHeader =
        serde_json::from_str(lines.next().unwrap_or_default())?;
    let pairs = lines
        .map(serde_json::from_str)
        .collect::<Result<Vec<QAPair>, _>>()?;
    Ok((header, pairs))
}

/// Expected level proportions per attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub hardness: [f64; 3],
    pub protrusion: [f64; 3],
    pub elasticity: [f64; 3],
    pub friction: [f64; 3],
}

impl DistributionSpec {
    /// Reference level proportions used as the validation default.
    pub fn reference() -> Self {
        Self {
            hardness: [0.28, 0.33, 0.39],
            protrusion: [0.41, 0.26, 0.33],
            elasticity: [0.42, 0.30, 0.28],
            friction: [0.32, 0.25, 0.43],
        }
    }

    pub fn proportions(&self, attr: AttributeKind) -> [f64; 3] {
        match attr {
            AttributeKind::Hardness => self.hardness,
            AttributeKind::Protrusion => self.protrusion,
            AttributeKind::Elasticity => self.elasticity,
            AttributeKind::Friction => self.friction,
        }
    }

    pub fn validate(&self) -> Result<(), QaError> {
        for attr in ATTRIBUTES {
            let sum: f64 = self.proportions(attr).iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(QaError::BadMix(sum));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeDistributionReport {
    pub attribute: AttributeKind,
    pub empirical: [f64; 3],
    pub expected: [f64; 3],
    pub max_abs_deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionReport {
    pub per_attribute: Vec<AttributeDistributionReport>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compare empirical per-object level proportions against a spec.
pub fn validate_distribution(
    annotations: &[TactileAnnotation],
    spec: &DistributionSpec,
    tolerance: f64,
) -> Result<DistributionReport, QaError> {
    if annotations.is_empty() {
        return Err(QaError::EmptyTable);
    }
    let n = annotations.len() as f64;
    let mut per_attribute = Vec::with_capacity(4);
    for attr in ATTRIBUTES {
        let mut counts = [0usize; 3];
        for a in annotations {
            counts[attr.level_of(a)] += 1;
        }
        let empirical = [
            counts[0] as f64 / n,
            counts[1] as f64 / n,
            counts[2] as f64 / n,
        ];
        let expected = spec.proportions(attr);
        let max_abs_deviation = empirical
            .iter()
            .zip(&expected)
            .map(|(e, x)| (e - x).abs())
            .fold(0.0, f64::max);
        per_attribute.push(AttributeDistributionReport {
            attribute: attr,
            empirical,
            expected,
            max_abs_deviation,
            pass: max_abs_deviation <= tolerance,
        });
    }
    let pass = per_attribute.iter().all(|r| r.pass);
    Ok(DistributionReport {
        per_attribute,
        tolerance,
        pass,
    })
}

/// Synthesize `n` annotated objects whose level proportions match `spec`
/// exactly (largest-remainder allocation, independently shuffled per
/// attribute with the seed).
pub fn synthetic_annotations(n: usize, spec: &DistributionSpec, seed: u64) -> Vec<TactileAnnotation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level_column = |props: [f64; 3]| -> Vec<usize> {
        let mut counts: Vec<usize> = props.iter().map(|p| (p * n as f64).floor() as usize).collect();
        let mut rema: Vec<(usize, f64)> = props
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p * n as f64 - counts[i] as f64))
            .collect();
        rema.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let mut deficit = n - counts.iter().sum::<usize>();
        for (i, _) in rema {
            if deficit == 0 {
                break;
            }
            counts[i] += 1;
            deficit -= 1;
        }
        let mut col: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(lvl, &c)| std::iter::repeat_n(lvl, c))
            .collect();
        col.shuffle(&mut rng);
        col
    };
    let hardness = level_column(spec.hardness);
    let protrusion = level_column(spec.protrusion);
    let elasticity = level_column(spec.elasticity);
    let friction = level_column(spec.friction);
    (0..n)
        .map(|i| TactileAnnotation {
            object_id: format!("object_{i:03}"),
            hardness: [
                HardnessLevel::HighlyDeformable,
                HardnessLevel::ModeratelyDeformable,
                HardnessLevel::ExtremelyHard,
            ][hardness[i]],
            protrusion: [
                ProtrusionLevel::Absent,
                ProtrusionLevel::Moderate,
                ProtrusionLevel::Strong,
            ][protrusion[i]],
            elasticity: [
                ElasticityLevel::None,
                ElasticityLevel::Moderate,
                ElasticityLevel::Strong,
            ][elasticity[i]],
            friction: [
                FrictionLevel::Slight,
                FrictionLevel::Moderate,
                FrictionLevel::Strong,
            ][friction[i]],
        })
        .collect()
}

/// The three datasets produced by [`split_disjoint`].
#[derive(Debug, Clone)]
pub struct SplitDatasets {
    pub stage2: Vec<QAPair>,
    pub stage3: Vec<QAPair>,
    pub test: Vec<QAPair>,
    pub seeds: (u64, u64, u64),
}

/// Generate independent stage-2 / stage-3 training sets over non-held-out
/// objects and a test set over held-out objects only. TSA pairs appear
/// only in the test set; pair ids are disjoint by construction.
pub fn split_disjoint(
    table: &AnnotationTable,
    stage2_count: usize,
    stage3_count: usize,
    test_count: usize,
    seed: u64,
    held_out: &BTreeSet<String>,
) -> Result<SplitDatasets, QaError> {
    let test_table = table.filter_objects(|o| held_out.contains(o));
    let train_table = table.filter_objects(|o| !held_out.contains(o));
    if test_count > 0 {
        let have = test_table.object_ids().len();
        let need = 3; // the widest test-task arity
        if have < need {
            return Err(QaError::InsufficientHeldOutObjects { have, need });
        }
    }
    let seed_s2 = seed;
    let seed_s3 = seed ^ 0x9E37_79B9_7F4A_7C15;
    let seed_test = seed ^ 0x517C_C1B7_2722_0A95;
    let train_mix = default_train_mix();
    let test_mix = default_test_mix();
    let stage2 = generate_pairs(&train_table, &train_mix, stage2_count, seed_s2, "s2-")?;
    let stage3 = generate_pairs(&train_table, &train_mix, stage3_count, seed_s3, "s3-")?;
    let test = if test_count > 0 {
        generate_pairs(&test_table, &test_mix, test_count, seed_test, "te-")?
    } else {
        Vec::new()
    };
    Ok(SplitDatasets {
        stage2,
        stage3,
        test,
        seeds: (seed_s2, seed_s3, seed_test),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InteractionKind, Manifest, ManifestEntry};

    fn manifest_for(annotations: &[TactileAnnotation], regions: u32) -> Manifest {
        let entries = annotations
            .iter()
            .flat_map(|a| {
                (0..regions).map(move |r| ManifestEntry {
                    video: format!("videos/{}_{r}.vtf", a.object_id),
                    object_id: a.object_id.clone(),
                    region_id: r,
                    sensor: SensorKind::GelSightMini,
                    interaction: InteractionKind::Press,
                    annotation: a.object_id.clone(),
                })
            })
            .collect();
        Manifest::new(entries)
    }

    fn table(n: usize, seed: u64) -> AnnotationTable {
        let anns = synthetic_annotations(n, &DistributionSpec::reference(), seed);
        load_annotations(&manifest_for(&anns, 5), &anns).unwrap()
    }

    #[test]
    fn load_annotations_join_and_errors() {
        let anns = synthetic_annotations(2, &DistributionSpec::reference(), 0);
        let t = load_annotations(&manifest_for(&anns, 5), &anns).unwrap();
        assert_eq!(t.rows.len(), 10);

        // unannotated object
        let m = manifest_for(&anns, 1);
        let err = load_annotations(&m, &anns[..1]).unwrap_err();
        assert!(matches!(err, QaError::MissingAnnotation(o) if o == "object_001"));

        // duplicate annotation: last-write-wins with a warning
        let mut dup = anns.clone();
        let mut changed = anns[0].clone();
        changed.friction = FrictionLevel::Strong;
        dup.push(changed.clone());
        let t2 = load_annotations(&manifest_for(&anns, 1), &dup).unwrap();
        assert_eq!(t2.warnings.len(), 1);
        assert_eq!(
            t2.rows
                .iter()
                .find(|r| r.object_id == "object_000")
                .unwrap()
                .annotation
                .friction,
            FrictionLevel::Strong
        );
    }

    #[test]
    fn generation_is_deterministic_and_counts_exact() {
        let t = table(12, 1);
        let mix = default_train_mix();
        let a = generate_pairs(&t, &mix, 200, 7, "x-").unwrap();
        let b = generate_pairs(&t, &mix, 200, 7, "x-").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 200);
        let ids: BTreeSet<&str> = a.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids.len(), 200);
        let c = generate_pairs(&t, &mix, 200, 8, "x-").unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn comparative_ground_truth_matches_ordinal_oracle() {
        let t = table(15, 2);
        let mix = default_test_mix();
        let pairs = generate_pairs(&t, &mix, 400, 3, "o-").unwrap();
        let by_video: HashMap<&str, &TactileAnnotation> = t
            .rows
            .iter()
            .map(|r| (r.video.as_str(), &r.annotation))
            .collect();
        for p in &pairs {
            let attr = match p.attribute {
                Some(a) => a,
                None => continue,
            };
            if let GroundTruth::SelectedIndex { index } = &p.ground_truth {
                let levels: Vec<usize> = p
                    .video_refs
                    .iter()
                    .map(|v| attr.level_of(by_video[v.as_str()]))
                    .collect();
                let expect = match p.comparator.as_deref().unwrap() {
                    "more" | "most" => {
                        let m = *levels.iter().max().unwrap();
                        assert_eq!(levels.iter().filter(|&&l| l == m).count(), 1);
                        levels.iter().position(|&l| l == m).unwrap()
                    }
                    "less" | "least" => {
                        let m = *levels.iter().min().unwrap();
                        assert_eq!(levels.iter().filter(|&&l| l == m).count(), 1);
                        levels.iter().position(|&l| l == m).unwrap()
                    }
                    other => panic!("unexpected comparator {other}"),
                };
                assert_eq!(*index, expect, "pair {}", p.id);
            }
        }
    }

    #[test]
    fn infeasible_mix_detected() {
        // all objects share identical friction: SFD on friction starves, but
        // any attribute is drawn; force infeasibility with a uniform table
        let anns: Vec<TactileAnnotation> = (0..5)
            .map(|i| TactileAnnotation {
                object_id: format!("obj{i}"),
                hardness: HardnessLevel::ExtremelyHard,
                protrusion: ProtrusionLevel::Absent,
                elasticity: ElasticityLevel::None,
                friction: FrictionLevel::Slight,
            })
            .collect();
        let t = load_annotations(&manifest_for(&anns, 2), &anns).unwrap();
        let mix = BTreeMap::from([(TaskKind::SurfaceFeatureDistinction, 1.0)]);
        assert!(matches!(
            generate_pairs(&t, &mix, 10, 0, "x-"),
            Err(QaError::InfeasibleMix {
                task: TaskKind::SurfaceFeatureDistinction
            })
        ));
    }

    #[test]
    fn pairs_reference_only_manifest_videos() {
        let t = table(10, 3);
        let videos: BTreeSet<&str> = t.rows.iter().map(|r| r.video.as_str()).collect();
        let pairs = generate_pairs(&t, &default_train_mix(), 150, 11, "v-").unwrap();
        for p in &pairs {
            assert_eq!(p.video_refs.len(), p.task.arity());
            for v in &p.video_refs {
                assert!(videos.contains(v.as_str()));
            }
        }
    }

    #[test]
    fn distribution_validation_reference_passes() {
        let anns = synthetic_annotations(100, &DistributionSpec::reference(), 4);
        let report =
            validate_distribution(&anns, &DistributionSpec::reference(), 0.01).unwrap();
        assert!(report.pass, "{report:?}");
        // shuffled expectations fail
        let shuffled = DistributionSpec {
            hardness: [0.39, 0.28, 0.33],
            ..DistributionSpec::reference()
        };
        let bad = validate_distribution(&anns, &shuffled, 0.01).unwrap();
        assert!(!bad.pass);
        // degenerate tolerance always passes
        let loose = validate_distribution(&anns, &shuffled, 1.0).unwrap();
        assert!(loose.pass);
    }

    #[test]
    fn split_disjoint_contract() {
        let t = table(20, 5);
        let held: BTreeSet<String> = t.object_ids().into_iter().take(5).collect();
        let split = split_disjoint(&t, 300, 300, 60, 17, &held).unwrap();
        assert_eq!(split.stage2.len(), 300);
        assert_eq!(split.stage3.len(), 300);
        assert_eq!(split.test.len(), 60);
        let ids = |v: &[QAPair]| v.iter().map(|p| p.id.clone()).collect::<BTreeSet<_>>();
        let (a, b, c) = (ids(&split.stage2), ids(&split.stage3), ids(&split.test));
        assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        // no TSA in training splits
        assert!(split
            .stage2
            .iter()
            .chain(&split.stage3)
            .all(|p| p.task != TaskKind::TactileScenarioAnalysis));
        // test pairs reference held-out objects only
        let held_videos: BTreeSet<&str> = t
            .rows
            .iter()
            .filter(|r| held.contains(&r.object_id))
            .map(|r| r.video.as_str())
            .collect();
        for p in &split.test {
            for v in &p.video_refs {
                assert!(held_videos.contains(v.as_str()));
            }
        }
        // training pairs never touch held-out objects
        for p in split.stage2.iter().chain(&split.stage3) {
            for v in &p.video_refs {
                assert!(!held_videos.contains(v.as_str()));
            }
        }
    }

    #[test]
    fn split_requires_held_out_objects() {
        let t = table(8, 6);
        let empty = BTreeSet::new();
        assert!(matches!(
            split_disjoint(&t, 10, 10, 5, 0, &empty),
            Err(QaError::InsufficientHeldOutObjects { .. })
        ));
    }

    #[test]
    fn jsonl_round_trip_byte_identical() {
        let t = table(10, 7);
        let mix = default_train_mix();
        let pairs = generate_pairs(&t, &mix, 50, 9, "j-").unwrap();
        let header = dataset_header(9, 50, &mix);
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.jsonl");
        let p2 = dir.path().join("b.jsonl");
        write_jsonl(&p1, &header, &pairs).unwrap();
        write_jsonl(&p2, &header, &pairs).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let (h, back) = read_jsonl(&p1).unwrap();
        assert_eq!(h.seed, 9);
        assert_eq!(back, pairs);
    }
}
