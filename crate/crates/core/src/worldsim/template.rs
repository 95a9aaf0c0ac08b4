//! Declarative apartment templates and the seeded apartment generator.
//!
//! A template is a JSON document:
//!
//! ```json
//! {
//!   "id": 1,
//!   "name": "compact",
//!   "rooms": [{"key": "kitchen", "kind": "kitchen"}, ...],
//!   "doors": [["kitchen", "hallway"], ...],
//!   "furniture": [{"key": "fridge", "class": "fridge", "room": "kitchen"}, ...],
//!   "spawn": [{"class": "plate", "min": 2, "max": 4, "locations": ["cab_a", "drawer_a"]}, ...],
//!   "start_rooms": ["hallway", "livingroom"]
//! }
//! ```
//!
//! Entity ids are assigned as rooms (template order), the two agents (main,
//! helper), furniture sorted by class then template order, then objects
//! sorted by class. Because furniture ids follow class order, goal predicates
//! sorted by location id are also sorted by vocabulary index.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::class::{Category, ClassName};
use super::scene::{Entity, EntityId, Layout, Placement, SceneGraph};
use super::WorldError;
use crate::goals::GoalSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub key: String,
    pub kind: ClassName,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FurnitureSpec {
    pub key: String,
    pub class: ClassName,
    pub room: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpawnRule {
    pub class: ClassName,
    pub min: u32,
    pub max: u32,
    /// Furniture keys the class may start in.
    pub locations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApartmentTemplate {
    pub id: u32,
    #[serde(default)]
    pub name: String,
    pub rooms: Vec<RoomSpec>,
    pub doors: Vec<(String, String)>,
    pub furniture: Vec<FurnitureSpec>,
    pub spawn: Vec<SpawnRule>,
    pub start_rooms: Vec<String>,
}

const BUILTIN: [&str; 7] = [
    include_str!("../../templates/apartment_1.json"),
    include_str!("../../templates/apartment_2.json"),
    include_str!("../../templates/apartment_3.json"),
    include_str!("../../templates/apartment_4.json"),
    include_str!("../../templates/apartment_5.json"),
    include_str!("../../templates/apartment_6.json"),
    include_str!("../../templates/apartment_7.json"),
];

/// Templates 1-5 are used for training data, 6-7 are held out for testing.
pub const TRAIN_TEMPLATES: [u32; 5] = [1, 2, 3, 4, 5];
pub const TEST_TEMPLATES: [u32; 2] = [6, 7];

/// Upper bound on objects per class, keeps the state small.
const MAX_PER_CLASS: u32 = 12;

impl ApartmentTemplate {
    pub fn from_json(s: &str) -> Result<Self, WorldError> {
        let t: ApartmentTemplate =
            serde_json::from_str(s).map_err(|e| WorldError::Json(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("template serialization is infallible")
    }

    /// One of the seven shipped templates.
    pub fn builtin(id: u32) -> Result<Self, WorldError> {
        let idx = id.checked_sub(1).map(|i| i as usize).filter(|&i| i < BUILTIN.len());
        match idx {
            Some(i) => Self::from_json(BUILTIN[i]),
            None => Err(WorldError::InvalidTemplate(format!("no builtin template {id}"))),
        }
    }

    pub fn builtins() -> Vec<Self> {
        (1..=BUILTIN.len() as u32).map(|i| Self::builtin(i).expect("builtin templates are valid")).collect()
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |msg: String| Err(WorldError::InvalidTemplate(msg));
        if !(4..=8).contains(&self.rooms.len()) {
            return bad(format!("template {} has {} rooms; 4 to 8 required", self.id, self.rooms.len()));
        }
        let mut keys = BTreeSet::new();
        for r in &self.rooms {
            if r.kind.category() != Category::Room {
                return bad(format!("room `{}` has non-room kind {}", r.key, r.kind));
            }
            if !keys.insert(r.key.as_str()) {
                return bad(format!("duplicate key `{}`", r.key));
            }
        }
        let room_keys: BTreeSet<&str> = self.rooms.iter().map(|r| r.key.as_str()).collect();
        for f in &self.furniture {
            if !f.class.is_location() {
                return bad(format!("furniture `{}` has class {} which is not a surface or container", f.key, f.class));
            }
            if !room_keys.contains(f.room.as_str()) {
                return bad(format!("furniture `{}` placed in unknown room `{}`", f.key, f.room));
            }
            if !keys.insert(f.key.as_str()) {
                return bad(format!("duplicate key `{}`", f.key));
            }
        }
        for class in ClassName::GOAL_LOCATIONS {
            if self.furniture.iter().filter(|f| f.class == class).count() > 1 {
                return bad(format!("goal location class {class} must be unique"));
            }
        }
        for (a, b) in &self.doors {
            if !room_keys.contains(a.as_str()) || !room_keys.contains(b.as_str()) || a == b {
                return bad(format!("invalid door `{a}`-`{b}`"));
            }
        }
        // connectivity
        let mut reached = BTreeSet::from([self.rooms[0].key.as_str()]);
        loop {
            let before = reached.len();
            for (a, b) in &self.doors {
                if reached.contains(a.as_str()) || reached.contains(b.as_str()) {
                    reached.insert(a);
                    reached.insert(b);
                }
            }
            if reached.len() == before {
                break;
            }
        }
        if reached.len() != self.rooms.len() {
            return bad(format!("template {} room graph is not connected", self.id));
        }
        let furniture: BTreeMap<&str, ClassName> =
            self.furniture.iter().map(|f| (f.key.as_str(), f.class)).collect();
        let mut spawned = BTreeSet::new();
        for s in &self.spawn {
            if !s.class.grabbable() {
                return bad(format!("spawn rule for non-grabbable class {}", s.class));
            }
            if !spawned.insert(s.class) {
                return bad(format!("duplicate spawn rule for {}", s.class));
            }
            if s.min > s.max || s.max > MAX_PER_CLASS {
                return bad(format!("spawn range for {} must satisfy min <= max <= {MAX_PER_CLASS}", s.class));
            }
            if s.locations.is_empty() {
                return bad(format!("spawn rule for {} lists no locations", s.class));
            }
            for l in &s.locations {
                match furniture.get(l.as_str()) {
                    None => return bad(format!("spawn location `{l}` is not furniture")),
                    Some(c) if c.is_goal_location() => {
                        return bad(format!("spawn location `{l}` is a goal location ({c})"))
                    }
                    _ => {}
                }
            }
        }
        if self.start_rooms.is_empty() || self.start_rooms.iter().any(|r| !room_keys.contains(r.as_str())) {
            return bad("start_rooms must name existing rooms".into());
        }
        Ok(())
    }

    /// Location classes present in the template.
    pub fn location_classes(&self) -> BTreeSet<ClassName> {
        self.furniture.iter().map(|f| f.class).collect()
    }

    /// Furniture sorted into id order (class, then template order).
    fn furniture_in_id_order(&self) -> Vec<&FurnitureSpec> {
        let mut f: Vec<&FurnitureSpec> = self.furniture.iter().collect();
        f.sort_by_key(|f| f.class);
        f
    }

    /// Rooms, agents and furniture with no objects. Furniture ids match
    /// every state generated from this template, so goals can be sampled
    /// against it before objects are spawned.
    pub fn skeleton(&self) -> Result<SceneGraph, WorldError> {
        self.build(&BTreeMap::new(), 0)
    }

    /// Builds a state with `counts[class]` objects distributed by `rng`.
    fn build(&self, counts: &BTreeMap<ClassName, u32>, seed: u64) -> Result<SceneGraph, WorldError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f77_6168_0000_0000 ^ ((self.id as u64) << 16));
        let mut entities = Vec::new();
        let mut key_to_id = BTreeMap::new();
        let push = |entities: &mut Vec<Entity>, class: ClassName, name: Option<String>| {
            let id = EntityId(entities.len() as u32);
            entities.push(Entity { id, class, name });
            id
        };
        for r in &self.rooms {
            let id = push(&mut entities, r.kind, Some(r.key.clone()));
            key_to_id.insert(r.key.clone(), id);
        }
        let main = push(&mut entities, ClassName::Agent, Some("main".into()));
        let helper = push(&mut entities, ClassName::Agent, Some("helper".into()));
        let mut furniture_room = Vec::new();
        for f in self.furniture_in_id_order() {
            let id = push(&mut entities, f.class, Some(f.key.clone()));
            key_to_id.insert(f.key.clone(), id);
            furniture_room.push((id, key_to_id[&f.room]));
        }
        let mut object_spawn = Vec::new();
        for (&class, &count) in counts {
            let rule = self.spawn.iter().find(|s| s.class == class);
            for _ in 0..count {
                let id = push(&mut entities, class, None);
                let rule = rule.ok_or_else(|| {
                    WorldError::UnsatisfiableConfig(format!("template {} cannot spawn {class}", self.id))
                })?;
                let loc_key = rule.locations.choose(&mut rng).expect("validated nonempty");
                object_spawn.push((id, key_to_id[loc_key]));
            }
        }
        let doors: Vec<(EntityId, EntityId)> =
            self.doors.iter().map(|(a, b)| (key_to_id[a], key_to_id[b])).collect();
        let layout = Arc::new(Layout::new(entities, &doors)?);
        let n = layout.entities().len();
        let mut placement = vec![Placement::None; n];
        let mut room: Vec<EntityId> = (0..n as u32).map(EntityId).collect();
        for &(f, r) in &furniture_room {
            room[f.index()] = r;
        }
        let start = |rng: &mut ChaCha8Rng| key_to_id[self.start_rooms.choose(rng).expect("validated nonempty")];
        room[main.index()] = start(&mut rng);
        room[helper.index()] = start(&mut rng);
        for &(o, loc) in &object_spawn {
            placement[o.index()] = match layout.entities()[loc.index()].category() {
                Category::Surface => Placement::On(loc),
                _ => Placement::In(loc),
            };
            room[o.index()] = room[loc.index()];
        }
        let open = vec![false; n];
        let state = SceneGraph::from_parts(layout, placement, room, [None, None], open, 0);
        state.check_invariants()?;
        Ok(state)
    }
}

/// Instantiates `template` with objects for `goal`: every goal class gets at
/// least one more instance than the goal requires. Deterministic in
/// (template, seed, goal).
pub fn generate_apartment(
    template: &ApartmentTemplate,
    seed: u64,
    goal: &GoalSpec,
) -> Result<SceneGraph, WorldError> {
    template.validate()?;
    let skeleton = template.skeleton()?;
    let classes = template.location_classes();
    for pred in goal.predicates() {
        let loc_ok = pred.loc.index() < skeleton.len()
            && skeleton.class_of(pred.loc).is_goal_location()
            && classes.contains(&skeleton.class_of(pred.loc));
        if !loc_ok {
            return Err(WorldError::UnsatisfiableConfig(format!(
                "template {} has no goal location {} for {}",
                template.id, pred.loc, pred
            )));
        }
    }
    let mut need: BTreeMap<ClassName, u32> = BTreeMap::new();
    for (pred, count) in goal.iter() {
        *need.entry(pred.class).or_default() += count as u32;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for rule in &template.spawn {
        let n = rng.gen_range(rule.min..=rule.max);
        counts.insert(rule.class, n);
    }
    for (&class, &n) in &need {
        if !template.spawn.iter().any(|s| s.class == class) {
            return Err(WorldError::UnsatisfiableConfig(format!(
                "template {} never spawns {class}",
                template.id
            )));
        }
        let c = counts.entry(class).or_default();
        *c = (*c).max(n + 1);
        if *c > MAX_PER_CLASS {
            return Err(WorldError::UnsatisfiableConfig(format!("goal needs too many {class}")));
        }
    }
    template.build(&counts, seed)
}
