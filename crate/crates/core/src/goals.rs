//! Goal predicates, task sampling, satisfaction checks and goal F1.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::worldsim::{Category, ClassName, EntityId, Placement, Relation, SceneGraph};

/// Number of count buckets a predicate head distinguishes (counts 0..=8).
pub const COUNT_BUCKETS: usize = 9;
pub const MAX_GOAL_COUNT: u8 = (COUNT_BUCKETS - 1) as u8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GoalError {
    #[error("unsatisfiable config: {0}")]
    UnsatisfiableConfig(String),
    #[error("invalid goal: {0}")]
    InvalidGoal(String),
    #[error("malformed json: {0}")]
    Json(String),
}

/// `rel(class, loc)`: some instance of `class` placed ON/IN location `loc`.
///
/// Field order makes the derived ordering (location id, class), which
/// coincides with vocabulary order for generated apartments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Predicate {
    pub loc: EntityId,
    pub class: ClassName,
    pub rel: Relation,
}

impl Predicate {
    pub fn new(rel: Relation, class: ClassName, loc: EntityId) -> Self {
        Predicate { loc, class, rel }
    }

    /// The predicate that places `class` at `loc` in `scene`.
    pub fn at(scene: &SceneGraph, class: ClassName, loc: EntityId) -> Self {
        let rel = match scene.category_of(loc) {
            Category::Surface => Relation::On,
            _ => Relation::In,
        };
        Predicate { loc, class, rel }
    }

    /// Whether the predicate is well-formed with respect to `scene`.
    pub fn validate(&self, scene: &SceneGraph) -> Result<(), GoalError> {
        if !self.class.grabbable() {
            return Err(GoalError::InvalidGoal(format!("{self}: {} is not grabbable", self.class)));
        }
        if !scene.contains(self.loc) {
            return Err(GoalError::InvalidGoal(format!("{self}: unknown location")));
        }
        let ok = match self.rel {
            Relation::On => scene.category_of(self.loc) == Category::Surface,
            Relation::In => scene.category_of(self.loc) == Category::Container,
            _ => false,
        };
        if !ok {
            return Err(GoalError::InvalidGoal(format!(
                "{self}: relation incompatible with {}",
                scene.class_of(self.loc)
            )));
        }
        Ok(())
    }

    /// Whether object placement `p` satisfies this predicate.
    pub fn matches(&self, p: Placement) -> bool {
        match (self.rel, p) {
            (Relation::On, Placement::On(l)) | (Relation::In, Placement::In(l)) => l == self.loc,
            _ => false,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.rel, self.class, self.loc)
    }
}

/// Number of `pred.class` instances currently satisfying `pred`.
pub fn count_satisfied(state: &SceneGraph, pred: &Predicate) -> u32 {
    state
        .objects()
        .iter()
        .filter(|&&o| state.class_of(o) == pred.class && pred.matches(state.placement(o)))
        .count() as u32
}

/// Multiset of predicates with counts in `1..=8`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GoalSpec {
    preds: BTreeMap<Predicate, u8>,
}

impl GoalSpec {
    /// Builds a goal; rejects empty goals and counts outside `1..=8`.
    /// Repeated predicates have their counts summed.
    pub fn new(items: impl IntoIterator<Item = (Predicate, u8)>) -> Result<Self, GoalError> {
        let g = Self::from_counts(items)?;
        if g.is_empty() {
            return Err(GoalError::InvalidGoal("goal must be nonempty".into()));
        }
        Ok(g)
    }

    /// Like [`GoalSpec::new`] but allows the empty goal (used for point
    /// estimates, where "nothing predicted" is a legitimate answer).
    pub fn from_counts(items: impl IntoIterator<Item = (Predicate, u8)>) -> Result<Self, GoalError> {
        let mut preds: BTreeMap<Predicate, u8> = BTreeMap::new();
        for (p, c) in items {
            if p.rel != Relation::On && p.rel != Relation::In {
                return Err(GoalError::InvalidGoal(format!("{p}: goal relations are ON or IN")));
            }
            if c == 0 {
                continue;
            }
            let e = preds.entry(p).or_default();
            *e = e.saturating_add(c);
            if *e > MAX_GOAL_COUNT {
                return Err(GoalError::InvalidGoal(format!("{p}: count above {MAX_GOAL_COUNT}")));
            }
        }
        Ok(GoalSpec { preds })
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn count(&self, pred: &Predicate) -> u8 {
        self.preds.get(pred).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u32 {
        self.preds.values().map(|&c| c as u32).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Predicate, u8)> {
        self.preds.iter().map(|(p, &c)| (p, c))
    }

    pub fn predicates(&self) -> impl Iterator<Item = &Predicate> {
        self.preds.keys()
    }

    pub fn validate(&self, scene: &SceneGraph) -> Result<(), GoalError> {
        self.preds.keys().try_for_each(|p| p.validate(scene))
    }

    pub fn to_doc(&self) -> GoalDoc {
        GoalDoc {
            predicates: self
                .preds
                .iter()
                .map(|(p, &c)| PredicateDoc { rel: p.rel, class: p.class, loc: p.loc, count: c })
                .collect(),
        }
    }

    pub fn from_doc(doc: &GoalDoc) -> Result<Self, GoalError> {
        for p in &doc.predicates {
            if p.count == 0 || p.count > MAX_GOAL_COUNT {
                return Err(GoalError::InvalidGoal(format!("count {} out of range", p.count)));
            }
        }
        let g = Self::new(doc.predicates.iter().map(|p| (Predicate::new(p.rel, p.class, p.loc), p.count)))?;
        if g.len() != doc.predicates.len() {
            return Err(GoalError::InvalidGoal("duplicate predicate".into()));
        }
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("goal serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self, GoalError> {
        let doc: GoalDoc = serde_json::from_str(s).map_err(|e| GoalError::Json(e.to_string()))?;
        Self::from_doc(&doc)
    }
}

impl fmt::Display for GoalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (p, c)) in self.preds.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}:{c}")?;
        }
        f.write_str("}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDoc {
    pub rel: Relation,
    pub class: ClassName,
    pub loc: EntityId,
    pub count: u8,
}

/// Wire form of a [`GoalSpec`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalDoc {
    pub predicates: Vec<PredicateDoc>,
}

impl Serialize for GoalSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_doc().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GoalSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = GoalDoc::deserialize(d)?;
        GoalSpec::from_doc(&doc).map_err(serde::de::Error::custom)
    }
}

/// True iff every predicate has at least its goal count satisfied.
pub fn is_satisfied(state: &SceneGraph, goal: &GoalSpec) -> bool {
    goal.iter().all(|(p, c)| count_satisfied(state, p) >= c as u32)
}

/// Multiset F1 between a predicted and a true goal.
pub fn goal_f1(predicted: &GoalSpec, truth: &GoalSpec) -> f64 {
    let overlap: u32 = predicted.iter().map(|(p, c)| c.min(truth.count(p)) as u32).sum();
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / predicted.total() as f64;
    let recall = overlap as f64 / truth.total() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Per-predicate most frequent count across `goals` (ties go to the lower
/// count). Predicates whose mode is 0 are dropped.
pub fn marginal_mode<'a>(goals: impl IntoIterator<Item = &'a GoalSpec>) -> GoalSpec {
    let goals: Vec<&GoalSpec> = goals.into_iter().collect();
    let mut tallies: BTreeMap<Predicate, [u32; COUNT_BUCKETS]> = BTreeMap::new();
    for g in &goals {
        for (p, c) in g.iter() {
            tallies.entry(*p).or_insert([0; COUNT_BUCKETS])[c as usize] += 1;
        }
    }
    let mut out = Vec::new();
    for (p, mut t) in tallies {
        let present: u32 = t.iter().sum();
        t[0] = goals.len() as u32 - present;
        let mut best = 0;
        for c in 1..COUNT_BUCKETS {
            if t[c] > t[best] {
                best = c;
            }
        }
        if best > 0 {
            out.push((p, best as u8));
        }
    }
    GoalSpec::from_counts(out).expect("counts come from valid goals")
}

/// One row of the predicate vocabulary. Rows are keyed by location class so
/// the vocabulary is shared by every apartment instantiating the same
/// location classes; the count of a row aggregates over instances.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VocabEntry {
    pub rel: Relation,
    pub class: ClassName,
    pub loc_class: ClassName,
}

impl fmt::Display for VocabEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.rel, self.class, self.loc_class)
    }
}

/// Ordered list of all (relation, object class, location class) triples an
/// apartment can instantiate. Row `i` is the identity of GPN row `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateVocabulary {
    entries: Vec<VocabEntry>,
    row_of: Vec<[Option<u16>; ClassName::OBJECTS.len()]>,
}

impl PredicateVocabulary {
    pub fn new(entries: Vec<VocabEntry>) -> Self {
        let mut row_of = vec![[None; ClassName::OBJECTS.len()]; ClassName::LOCATIONS.len()];
        for (i, e) in entries.iter().enumerate() {
            if let (Some(li), Some(oi)) = (e.loc_class.location_index(), e.class.object_index()) {
                row_of[li][oi] = Some(i as u16);
            }
        }
        PredicateVocabulary { entries, row_of }
    }

    /// Vocabulary of the location classes present in `scene`.
    pub fn for_scene(scene: &SceneGraph) -> Self {
        let mut entries = Vec::new();
        for loc_class in ClassName::LOCATIONS {
            if scene.locations_of_class(loc_class).next().is_none() {
                continue;
            }
            let rel = match loc_class.category() {
                Category::Surface => Relation::On,
                _ => Relation::In,
            };
            for class in ClassName::OBJECTS {
                entries.push(VocabEntry { rel, class, loc_class });
            }
        }
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    fn row(&self, class: ClassName, loc_class: ClassName) -> Option<usize> {
        let li = loc_class.location_index()?;
        let oi = class.object_index()?;
        self.row_of.get(li)?[oi].map(|r| r as usize)
    }

    pub fn index_of(&self, scene: &SceneGraph, pred: &Predicate) -> Option<usize> {
        if !scene.contains(pred.loc) {
            return None;
        }
        self.row(pred.class, scene.class_of(pred.loc))
    }

    /// Whether this vocabulary is the one `scene` instantiates.
    pub fn matches_scene(&self, scene: &SceneGraph) -> bool {
        self.entries == Self::for_scene(scene).entries
    }

    /// Per-row placement counts in `scene`.
    pub fn counts(&self, scene: &SceneGraph) -> Vec<u32> {
        let mut out = vec![0; self.entries.len()];
        for &o in scene.objects() {
            if let Some(loc) = scene.placement(o).location() {
                if let Some(r) = self.row(scene.class_of(o), scene.class_of(loc)) {
                    out[r] += 1;
                }
            }
        }
        out
    }

    /// The concrete predicate for row `i`, when its location class has a
    /// single instance in `scene`.
    pub fn predicate(&self, scene: &SceneGraph, i: usize) -> Option<Predicate> {
        let e = self.entries.get(i)?;
        let loc = scene.unique_location(e.loc_class)?;
        Some(Predicate::new(e.rel, e.class, loc))
    }

    /// Per-row counts of a goal (0 for predicates not in the goal).
    pub fn goal_counts(&self, scene: &SceneGraph, goal: &GoalSpec) -> Vec<u8> {
        let mut out = vec![0; self.entries.len()];
        for (p, c) in goal.iter() {
            if let Some(i) = self.index_of(scene, p) {
                out[i] = c;
            }
        }
        out
    }
}

impl Serialize for PredicateVocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.entries.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PredicateVocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Self::new(Vec::<VocabEntry>::deserialize(d)?))
    }
}

/// The five household task families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    SetTable,
    PutDishwasher,
    StockFridge,
    PrepareMeal,
    GetSnacks,
}

impl TaskType {
    pub const ALL: [TaskType; 5] = [
        TaskType::SetTable,
        TaskType::PutDishwasher,
        TaskType::StockFridge,
        TaskType::PrepareMeal,
        TaskType::GetSnacks,
    ];
}

const DISHWASHER_POOL: [ClassName; 4] =
    [ClassName::Fork, ClassName::Plate, ClassName::Waterglass, ClassName::Wineglass];
const FRIDGE_POOL: [ClassName; 4] =
    [ClassName::Salmon, ClassName::Apple, ClassName::Cupcake, ClassName::Pudding];

fn location(apartment: &SceneGraph, class: ClassName) -> Result<EntityId, GoalError> {
    apartment
        .unique_location(class)
        .ok_or_else(|| GoalError::UnsatisfiableConfig(format!("apartment has no unique {class}")))
}

fn same_n_on(apartment: &SceneGraph, classes: &[ClassName], n: u8, loc: ClassName) -> Result<GoalSpec, GoalError> {
    let loc = location(apartment, loc)?;
    GoalSpec::new(classes.iter().map(|&c| (Predicate::at(apartment, c, loc), n)))
}

fn pool_in(apartment: &SceneGraph, picks: &[ClassName], loc: ClassName) -> Result<GoalSpec, GoalError> {
    let loc = location(apartment, loc)?;
    GoalSpec::new(picks.iter().map(|&c| (Predicate::at(apartment, c, loc), 1)))
}

/// Draws one goal of the given family.
pub fn sample_task_of<R: Rng + ?Sized>(
    rng: &mut R,
    apartment: &SceneGraph,
    task: TaskType,
) -> Result<GoalSpec, GoalError> {
    use ClassName::*;
    match task {
        TaskType::SetTable => {
            let n = rng.gen_range(1..=3);
            let obj = *[Waterglass, Wineglass].choose(rng).unwrap();
            let loc = *[Kitchentable, Coffeetable].choose(rng).unwrap();
            same_n_on(apartment, &[Plate, Fork, obj], n, loc)
        }
        TaskType::PutDishwasher | TaskType::StockFridge => {
            let (pool, loc) = if task == TaskType::PutDishwasher {
                (DISHWASHER_POOL, Dishwasher)
            } else {
                (FRIDGE_POOL, Fridge)
            };
            let n = rng.gen_range(3..=7);
            let picks: Vec<ClassName> = (0..n).map(|_| *pool.choose(rng).unwrap()).collect();
            pool_in(apartment, &picks, loc)
        }
        TaskType::PrepareMeal => {
            let n = rng.gen_range(1..=3);
            let obj = *[Cupcake, Pudding].choose(rng).unwrap();
            let loc = *[Kitchentable, Coffeetable, Stove].choose(rng).unwrap();
            same_n_on(apartment, &[Salmon, Apple, obj], n, loc)
        }
        TaskType::GetSnacks => same_n_on(apartment, &[Remote, Condiment, Chips], 1, Coffeetable),
    }
}

/// Uniform over the five task families, then over each family's parameters.
pub fn sample_task<R: Rng + ?Sized>(rng: &mut R, apartment: &SceneGraph) -> Result<GoalSpec, GoalError> {
    let task = *TaskType::ALL.choose(rng).unwrap();
    sample_task_of(rng, apartment, task)
}

fn multisets(pool: &[ClassName], size: usize) -> Vec<Vec<ClassName>> {
    if size == 0 {
        return vec![vec![]];
    }
    if pool.is_empty() {
        return vec![];
    }
    let mut out = Vec::new();
    for k in 0..=size {
        for mut rest in multisets(&pool[1..], size - k) {
            let mut v = vec![pool[0]; k];
            v.append(&mut rest);
            out.push(v);
        }
    }
    out
}

/// Every goal a family can produce.
pub fn task_support(apartment: &SceneGraph, task: TaskType) -> Result<Vec<GoalSpec>, GoalError> {
    use ClassName::*;
    let mut out = Vec::new();
    match task {
        TaskType::SetTable => {
            for n in 1..=3 {
                for obj in [Waterglass, Wineglass] {
                    for loc in [Kitchentable, Coffeetable] {
                        out.push(same_n_on(apartment, &[Plate, Fork, obj], n, loc)?);
                    }
                }
            }
        }
        TaskType::PutDishwasher | TaskType::StockFridge => {
            let (pool, loc) = if task == TaskType::PutDishwasher {
                (DISHWASHER_POOL, Dishwasher)
            } else {
                (FRIDGE_POOL, Fridge)
            };
            for n in 3..=7 {
                for picks in multisets(&pool, n) {
                    out.push(pool_in(apartment, &picks, loc)?);
                }
            }
        }
        TaskType::PrepareMeal => {
            for n in 1..=3 {
                for obj in [Cupcake, Pudding] {
                    for loc in [Kitchentable, Coffeetable, Stove] {
                        out.push(same_n_on(apartment, &[Salmon, Apple, obj], n, loc)?);
                    }
                }
            }
        }
        TaskType::GetSnacks => out.push(same_n_on(apartment, &[Remote, Condiment, Chips], 1, Coffeetable)?),
    }
    Ok(out)
}

/// Union of all family supports; the domain of uniform goal sampling.
pub fn grammar_support(apartment: &SceneGraph) -> Result<Vec<GoalSpec>, GoalError> {
    let mut out = Vec::new();
    for t in TaskType::ALL {
        out.extend(task_support(apartment, t)?);
    }
    Ok(out)
}
