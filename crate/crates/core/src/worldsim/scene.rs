//! Scene-graph world state.
//!
//! Static structure (entities, room graph, agent identities) lives in a shared
//! [`Layout`]; the per-tick state is a handful of dense vectors indexed by
//! entity id, so cloning a state for search is cheap. Relation edges are
//! derived views over that storage.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::class::{Category, ClassName};
use super::WorldError;

/// Hand capacity per agent.
pub const HAND_CAPACITY: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entity {
    pub id: EntityId,
    pub class: ClassName,
    /// Template key for furniture and rooms, `main`/`helper` for agents.
    pub name: Option<String>,
}

impl Entity {
    pub fn category(&self) -> Category {
        self.class.category()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "IN")]
    In,
    #[serde(rename = "ON")]
    On,
    #[serde(rename = "HOLDS")]
    Holds,
    #[serde(rename = "CLOSE")]
    Close,
    #[serde(rename = "INSIDE_ROOM")]
    InsideRoom,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::In => "IN",
            Relation::On => "ON",
            Relation::Holds => "HOLDS",
            Relation::Close => "CLOSE",
            Relation::InsideRoom => "INSIDE_ROOM",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge(pub EntityId, pub Relation, pub EntityId);

impl Edge {
    pub fn subject(&self) -> EntityId {
        self.0
    }
    pub fn relation(&self) -> Relation {
        self.1
    }
    pub fn object(&self) -> EntityId {
        self.2
    }
}

/// Where a grabbable object currently is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Placement {
    None,
    On(EntityId),
    In(EntityId),
    HeldBy(EntityId),
}

impl Placement {
    /// The surface or container the object rests at, if not held.
    pub fn location(self) -> Option<EntityId> {
        match self {
            Placement::On(l) | Placement::In(l) => Some(l),
            _ => None,
        }
    }

    pub fn holder(self) -> Option<EntityId> {
        match self {
            Placement::HeldBy(a) => Some(a),
            _ => None,
        }
    }

    fn edge(self, object: EntityId) -> Option<Edge> {
        match self {
            Placement::None => None,
            Placement::On(l) => Some(Edge(object, Relation::On, l)),
            Placement::In(l) => Some(Edge(object, Relation::In, l)),
            Placement::HeldBy(a) => Some(Edge(a, Relation::Holds, object)),
        }
    }
}

/// Static part of a world: entities, room graph and derived navigation tables.
#[derive(Debug, PartialEq, Eq)]
pub struct Layout {
    entities: Vec<Entity>,
    adjacency: Vec<Vec<EntityId>>,
    rooms: Vec<EntityId>,
    room_slot: Vec<Option<usize>>,
    objects: Vec<EntityId>,
    locations: Vec<EntityId>,
    agents: [EntityId; 2],
    dist: Vec<Vec<u32>>,
    next_hop: Vec<Vec<Option<EntityId>>>,
}

pub const UNREACHABLE: u32 = u32::MAX;

impl Layout {
    /// Builds the layout from an id-ordered entity list and undirected room doors.
    pub fn new(entities: Vec<Entity>, doors: &[(EntityId, EntityId)]) -> Result<Self, WorldError> {
        let n = entities.len();
        for (i, e) in entities.iter().enumerate() {
            if e.id.index() != i {
                return Err(WorldError::InvalidState(format!(
                    "entity ids must be dense and sorted; found {} at position {i}",
                    e.id
                )));
            }
        }
        let rooms: Vec<EntityId> = entities
            .iter()
            .filter(|e| e.category() == Category::Room)
            .map(|e| e.id)
            .collect();
        let mut room_slot = vec![None; n];
        for (slot, r) in rooms.iter().enumerate() {
            room_slot[r.index()] = Some(slot);
        }
        let agents: Vec<EntityId> = entities
            .iter()
            .filter(|e| e.category() == Category::Agent)
            .map(|e| e.id)
            .collect();
        if agents.len() != 2 {
            return Err(WorldError::InvalidState(format!(
                "exactly two agents required, found {}",
                agents.len()
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in doors {
            for id in [a, b] {
                if id.index() >= n || room_slot[id.index()].is_none() {
                    return Err(WorldError::InvalidState(format!(
                        "door endpoint {id} is not a room"
                    )));
                }
            }
            if a == b {
                return Err(WorldError::InvalidState(format!("room {a} adjacent to itself")));
            }
            if !adjacency[a.index()].contains(&b) {
                adjacency[a.index()].push(b);
                adjacency[b.index()].push(a);
            }
        }
        for adj in &mut adjacency {
            adj.sort();
        }

        let r = rooms.len();
        let mut dist = vec![vec![UNREACHABLE; r]; r];
        let mut next_hop = vec![vec![None; r]; r];
        // BFS from every target; neighbours are visited in id order so the
        // first hop on a shortest path is the lowest-id choice.
        for (t_slot, &target) in rooms.iter().enumerate() {
            dist[t_slot][t_slot] = 0;
            let mut queue = VecDeque::from([target]);
            while let Some(cur) = queue.pop_front() {
                let cur_slot = room_slot[cur.index()].unwrap();
                for &nb in &adjacency[cur.index()] {
                    let nb_slot = room_slot[nb.index()].unwrap();
                    if dist[nb_slot][t_slot] == UNREACHABLE {
                        dist[nb_slot][t_slot] = dist[cur_slot][t_slot] + 1;
                        queue.push_back(nb);
                    }
                }
            }
            for &from in &rooms {
                let f_slot = room_slot[from.index()].unwrap();
                if f_slot == t_slot || dist[f_slot][t_slot] == UNREACHABLE {
                    continue;
                }
                next_hop[f_slot][t_slot] = adjacency[from.index()]
                    .iter()
                    .copied()
                    .find(|nb| dist[room_slot[nb.index()].unwrap()][t_slot] + 1 == dist[f_slot][t_slot]);
            }
        }

        let objects = entities
            .iter()
            .filter(|e| e.category() == Category::Object)
            .map(|e| e.id)
            .collect();
        let locations = entities.iter().filter(|e| e.class.is_location()).map(|e| e.id).collect();

        Ok(Layout {
            entities,
            adjacency,
            rooms,
            room_slot,
            objects,
            locations,
            agents: [agents[0], agents[1]],
            dist,
            next_hop,
        })
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn rooms(&self) -> &[EntityId] {
        &self.rooms
    }

    pub fn objects(&self) -> &[EntityId] {
        &self.objects
    }

    pub fn locations(&self) -> &[EntityId] {
        &self.locations
    }

    pub fn adjacent_rooms(&self, room: EntityId) -> &[EntityId] {
        &self.adjacency[room.index()]
    }

    /// Room hops between two rooms.
    pub fn room_distance(&self, from: EntityId, to: EntityId) -> u32 {
        match (self.room_slot[from.index()], self.room_slot[to.index()]) {
            (Some(a), Some(b)) => self.dist[a][b],
            _ => UNREACHABLE,
        }
    }

    /// First room on a shortest path, lowest id among ties.
    pub fn next_hop(&self, from: EntityId, to: EntityId) -> Option<EntityId> {
        match (self.room_slot[from.index()], self.room_slot[to.index()]) {
            (Some(a), Some(b)) => self.next_hop[a][b],
            _ => None,
        }
    }

    pub fn is_connected(&self) -> bool {
        self.dist.iter().all(|row| row.iter().all(|&d| d != UNREACHABLE))
    }
}

/// Full world state at one tick.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SceneGraph {
    layout: Arc<Layout>,
    placement: Vec<Placement>,
    room: Vec<EntityId>,
    close: [Option<EntityId>; 2],
    open: Vec<bool>,
    tick: u32,
}

impl SceneGraph {
    /// Assembles a state; callers are expected to run [`SceneGraph::check_invariants`].
    pub(crate) fn from_parts(
        layout: Arc<Layout>,
        placement: Vec<Placement>,
        room: Vec<EntityId>,
        close: [Option<EntityId>; 2],
        open: Vec<bool>,
        tick: u32,
    ) -> Self {
        SceneGraph { layout, placement, room, close, open, tick }
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn tick(&self) -> u32 {
        self.tick
    }

    pub fn len(&self) -> usize {
        self.layout.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.entities.is_empty()
    }

    pub fn contains(&self, id: EntityId) -> bool {
        id.index() < self.len()
    }

    pub fn entity(&self, id: EntityId) -> &Entity {
        &self.layout.entities[id.index()]
    }

    pub fn class_of(&self, id: EntityId) -> ClassName {
        self.layout.entities[id.index()].class
    }

    pub fn category_of(&self, id: EntityId) -> Category {
        self.class_of(id).category()
    }

    pub fn main_agent(&self) -> EntityId {
        self.layout.agents[0]
    }

    pub fn helper_agent(&self) -> EntityId {
        self.layout.agents[1]
    }

    pub fn other_agent(&self, agent: EntityId) -> EntityId {
        if agent == self.layout.agents[0] {
            self.layout.agents[1]
        } else {
            self.layout.agents[0]
        }
    }

    pub(crate) fn agent_slot(&self, agent: EntityId) -> Option<usize> {
        self.layout.agents.iter().position(|&a| a == agent)
    }

    pub fn is_agent(&self, id: EntityId) -> bool {
        self.agent_slot(id).is_some()
    }

    pub fn objects(&self) -> &[EntityId] {
        &self.layout.objects
    }

    pub fn rooms(&self) -> &[EntityId] {
        &self.layout.rooms
    }

    pub fn locations(&self) -> &[EntityId] {
        &self.layout.locations
    }

    pub fn placement(&self, object: EntityId) -> Placement {
        self.placement[object.index()]
    }

    /// INSIDE_ROOM target. Rooms map to themselves.
    pub fn room_of(&self, id: EntityId) -> EntityId {
        self.room[id.index()]
    }

    pub fn is_open(&self, container: EntityId) -> bool {
        self.open[container.index()]
    }

    pub fn close_target(&self, agent: EntityId) -> Option<EntityId> {
        self.agent_slot(agent).and_then(|s| self.close[s])
    }

    pub fn held_by(&self, agent: EntityId) -> impl Iterator<Item = EntityId> + '_ {
        self.layout
            .objects
            .iter()
            .copied()
            .filter(move |&o| self.placement[o.index()] == Placement::HeldBy(agent))
    }

    pub fn held_count(&self, agent: EntityId) -> usize {
        self.held_by(agent).count()
    }

    pub fn has_free_hand(&self, agent: EntityId) -> bool {
        self.held_count(agent) < HAND_CAPACITY
    }

    /// Locations of a class, in id order.
    pub fn locations_of_class(&self, class: ClassName) -> impl Iterator<Item = EntityId> + '_ {
        self.layout
            .locations
            .iter()
            .copied()
            .filter(move |&l| self.class_of(l) == class)
    }

    /// The single instance of a location class, if there is exactly one.
    pub fn unique_location(&self, class: ClassName) -> Option<EntityId> {
        let mut it = self.locations_of_class(class);
        match (it.next(), it.next()) {
            (Some(l), None) => Some(l),
            _ => None,
        }
    }

    pub(crate) fn set_placement(&mut self, object: EntityId, p: Placement) {
        self.placement[object.index()] = p;
    }

    pub(crate) fn set_room(&mut self, id: EntityId, room: EntityId) {
        self.room[id.index()] = room;
    }

    pub(crate) fn set_close(&mut self, agent: EntityId, target: Option<EntityId>) {
        if let Some(s) = self.agent_slot(agent) {
            self.close[s] = target;
        }
    }

    pub(crate) fn set_open(&mut self, container: EntityId, open: bool) {
        self.open[container.index()] = open;
    }

    pub(crate) fn advance_tick(&mut self) {
        self.tick += 1;
    }

    #[cfg(test)]
    pub(crate) fn with_tick(mut self, tick: u32) -> Self {
        self.tick = tick;
        self
    }

    /// Drops CLOSE edges whose target left the agent's room and moves held
    /// objects along with their holders.
    pub(crate) fn settle(&mut self) {
        for &o in &self.layout.objects {
            if let Placement::HeldBy(a) = self.placement[o.index()] {
                self.room[o.index()] = self.room[a.index()];
            }
        }
        for slot in 0..2 {
            let agent = self.layout.agents[slot];
            if let Some(t) = self.close[slot] {
                if self.room[t.index()] != self.room[agent.index()] {
                    self.close[slot] = None;
                }
            }
        }
    }

    /// Placement edges (IN/ON/HOLDS) of every object, sorted.
    pub fn placement_edges(&self) -> Vec<Edge> {
        let mut edges: Vec<Edge> = self
            .layout
            .objects
            .iter()
            .filter_map(|&o| self.placement[o.index()].edge(o))
            .collect();
        edges.sort();
        edges
    }

    /// All relation edges, sorted by (subject, relation, object).
    pub fn edges(&self) -> Vec<Edge> {
        let mut edges = self.placement_edges();
        for slot in 0..2 {
            if let Some(t) = self.close[slot] {
                edges.push(Edge(self.layout.agents[slot], Relation::Close, t));
            }
        }
        for e in &self.layout.entities {
            if e.category() != Category::Room {
                edges.push(Edge(e.id, Relation::InsideRoom, self.room[e.id.index()]));
            }
        }
        edges.sort();
        edges
    }

    /// Checks every structural invariant of a world state.
    pub fn check_invariants(&self) -> Result<(), WorldError> {
        let bad = |msg: String| Err(WorldError::InvalidState(msg));
        let n = self.len();
        if self.placement.len() != n || self.room.len() != n || self.open.len() != n {
            return bad("state vectors do not match entity count".into());
        }
        for e in &self.layout.entities {
            let i = e.id.index();
            let room = self.room[i];
            match e.category() {
                Category::Room => {
                    if room != e.id {
                        return bad(format!("room {} has an INSIDE_ROOM edge", e.id));
                    }
                }
                _ => {
                    if room.index() >= n || self.category_of(room) != Category::Room {
                        return bad(format!("entity {} is not inside a room", e.id));
                    }
                }
            }
            let p = self.placement[i];
            match e.category() {
                Category::Object => match p {
                    Placement::None => return bad(format!("object {} has no placement", e.id)),
                    Placement::On(l) => {
                        if l.index() >= n || self.category_of(l) != Category::Surface {
                            return bad(format!("object {} ON non-surface {l}", e.id));
                        }
                        if self.room[l.index()] != room {
                            return bad(format!("object {} not in the room of {l}", e.id));
                        }
                    }
                    Placement::In(l) => {
                        if l.index() >= n || self.category_of(l) != Category::Container {
                            return bad(format!("object {} IN non-container {l}", e.id));
                        }
                        if self.room[l.index()] != room {
                            return bad(format!("object {} not in the room of {l}", e.id));
                        }
                    }
                    Placement::HeldBy(a) => {
                        if !self.is_agent(a) {
                            return bad(format!("object {} held by non-agent {a}", e.id));
                        }
                        if self.room[a.index()] != room {
                            return bad(format!("held object {} not with its holder", e.id));
                        }
                    }
                },
                _ => {
                    if p != Placement::None {
                        return bad(format!("non-object {} has a placement", e.id));
                    }
                }
            }
            if self.open[i] && !e.class.openable() {
                return bad(format!("non-openable {} marked open", e.id));
            }
        }
        for slot in 0..2 {
            let agent = self.layout.agents[slot];
            if self.held_count(agent) > HAND_CAPACITY {
                return bad(format!("agent {agent} holds more than {HAND_CAPACITY} objects"));
            }
            if let Some(t) = self.close[slot] {
                if t.index() >= n || t == agent || self.category_of(t) == Category::Room {
                    return bad(format!("agent {agent} CLOSE to invalid entity {t}"));
                }
                if self.room[t.index()] != self.room[agent.index()] {
                    return bad(format!("agent {agent} CLOSE to {t} in another room"));
                }
            }
        }
        Ok(())
    }

    /// Canonical serialization: entities and edges sorted by id.
    pub fn to_doc(&self) -> SceneDoc {
        let entities = self
            .layout
            .entities
            .iter()
            .map(|e| EntityDoc {
                id: e.id,
                class: e.class,
                category: e.category(),
                name: e.name.clone(),
                adjacent: if e.category() == Category::Room {
                    Some(self.layout.adjacency[e.id.index()].clone())
                } else {
                    None
                },
            })
            .collect();
        let open = self
            .layout
            .entities
            .iter()
            .filter(|e| e.class.openable())
            .map(|e| (e.id.0, self.open[e.id.index()]))
            .collect();
        SceneDoc { entities, edges: self.edges(), open, tick: self.tick }
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("scene serialization is infallible")
    }

    /// Hex SHA-256 prefix of the canonical serialization.
    pub fn state_hash(&self) -> String {
        short_hash(self.to_canonical_json().as_bytes())
    }

    pub fn from_json(s: &str) -> Result<Self, WorldError> {
        let doc: SceneDoc = serde_json::from_str(s).map_err(|e| WorldError::Json(e.to_string()))?;
        Self::from_doc(&doc)
    }

    /// Rebuilds and validates a state from its document form.
    pub fn from_doc(doc: &SceneDoc) -> Result<Self, WorldError> {
        let bad = |msg: String| Err(WorldError::InvalidState(msg));
        let mut entities = Vec::with_capacity(doc.entities.len());
        let mut doors = Vec::new();
        for (i, e) in doc.entities.iter().enumerate() {
            if e.id.index() != i {
                return bad(format!("entity ids must be dense and sorted; found {} at {i}", e.id));
            }
            if e.category != e.class.category() {
                return bad(format!("entity {} category does not match class {}", e.id, e.class));
            }
            if let Some(adj) = &e.adjacent {
                if e.category != Category::Room {
                    return bad(format!("non-room {} lists adjacent rooms", e.id));
                }
                for &b in adj {
                    doors.push((e.id, b));
                }
            }
            entities.push(Entity { id: e.id, class: e.class, name: e.name.clone() });
        }
        let n = entities.len();
        for &(a, b) in &doors {
            if b.index() >= n {
                return bad(format!("room {a} adjacent to unknown entity {b}"));
            }
            if !doors.contains(&(b, a)) {
                return bad(format!("room adjacency {a}-{b} is not symmetric"));
            }
        }
        let layout = Arc::new(Layout::new(entities, &doors)?);

        let mut placement = vec![Placement::None; n];
        let mut room: Vec<Option<EntityId>> = vec![None; n];
        let mut close = [None, None];
        for r in &layout.rooms {
            room[r.index()] = Some(*r);
        }
        let mut seen = BTreeSet::new();
        for &edge @ Edge(s, rel, o) in &doc.edges {
            if s.index() >= n || o.index() >= n {
                return bad(format!("edge references unknown entity: {s} {rel} {o}"));
            }
            if !seen.insert(edge) {
                return bad(format!("duplicate edge {s} {rel} {o}"));
            }
            let set_place = |placement: &mut Vec<Placement>, obj: EntityId, p: Placement| {
                if layout.entities[obj.index()].category() != Category::Object {
                    return Err(WorldError::InvalidState(format!("{rel} edge on non-object {obj}")));
                }
                if placement[obj.index()] != Placement::None {
                    return Err(WorldError::InvalidState(format!(
                        "object {obj} has more than one placement edge"
                    )));
                }
                placement[obj.index()] = p;
                Ok(())
            };
            match rel {
                Relation::In => set_place(&mut placement, s, Placement::In(o))?,
                Relation::On => set_place(&mut placement, s, Placement::On(o))?,
                Relation::Holds => {
                    if layout.entities[s.index()].category() != Category::Agent {
                        return bad(format!("HOLDS edge from non-agent {s}"));
                    }
                    set_place(&mut placement, o, Placement::HeldBy(s))?
                }
                Relation::Close => {
                    let Some(slot) = layout.agents.iter().position(|&a| a == s) else {
                        return bad(format!("CLOSE edge from non-agent {s}"));
                    };
                    if close[slot].is_some() {
                        return bad(format!("agent {s} has more than one CLOSE edge"));
                    }
                    close[slot] = Some(o);
                }
                Relation::InsideRoom => {
                    if layout.room_slot[s.index()].is_some() {
                        return bad(format!("room {s} has an INSIDE_ROOM edge"));
                    }
                    if layout.room_slot[o.index()].is_none() {
                        return bad(format!("INSIDE_ROOM target {o} is not a room"));
                    }
                    if room[s.index()].is_some() {
                        return bad(format!("entity {s} has more than one INSIDE_ROOM edge"));
                    }
                    room[s.index()] = Some(o);
                }
            }
        }
        let room = room
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.ok_or_else(|| WorldError::InvalidState(format!("entity {i} has no INSIDE_ROOM edge")))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut open = vec![false; n];
        for (&id, &is_open) in &doc.open {
            let idx = id as usize;
            if idx >= n || !layout.entities[idx].class.openable() {
                return bad(format!("open flag for non-openable entity {id}"));
            }
            open[idx] = is_open;
        }
        for e in &layout.entities {
            if e.class.openable() && !doc.open.contains_key(&e.id.0) {
                return bad(format!("container {} missing open flag", e.id));
            }
        }
        let state = SceneGraph { layout, placement, room, close, open, tick: doc.tick };
        state.check_invariants()?;
        Ok(state)
    }
}

/// Hex of the first 12 bytes of the SHA-256 digest of `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)[..12].iter().map(|b| format!("{b:02x}")).collect()
}

/// Size of the symmetric difference of object placement edges.
pub fn state_diff(a: &SceneGraph, b: &SceneGraph) -> Result<usize, WorldError> {
    state_diff_where(a, b, |_| true)
}

/// [`state_diff`] restricted to objects accepted by `keep`.
pub fn state_diff_where(
    a: &SceneGraph,
    b: &SceneGraph,
    keep: impl Fn(EntityId) -> bool,
) -> Result<usize, WorldError> {
    if a.layout.entities != b.layout.entities {
        return Err(WorldError::IncomparableStates);
    }
    Ok(a.layout
        .objects
        .iter()
        .filter(|&&o| keep(o) && a.placement[o.index()] != b.placement[o.index()])
        .map(|&o| {
            let pa = a.placement[o.index()] != Placement::None;
            let pb = b.placement[o.index()] != Placement::None;
            pa as usize + pb as usize
        })
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityDoc {
    pub id: EntityId,
    pub class: ClassName,
    pub category: Category,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacent: Option<Vec<EntityId>>,
}

/// Wire form of a [`SceneGraph`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDoc {
    pub entities: Vec<EntityDoc>,
    pub edges: Vec<Edge>,
    #[serde(with = "string_keys")]
    pub open: BTreeMap<u32, bool>,
    pub tick: u32,
}

/// Integer-keyed maps as JSON objects. Keys are read from strings so the
/// document also decodes when nested in buffered (internally tagged) enums.
mod string_keys {
    use std::collections::BTreeMap;

    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(map: &BTreeMap<u32, bool>, s: S) -> Result<S::Ok, S::Error> {
        // numeric key order keeps the canonical form stable
        s.collect_map(map.iter().map(|(k, v)| (k.to_string(), v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u32, bool>, D::Error> {
        BTreeMap::<String, bool>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| k.parse().map(|k| (k, v)).map_err(|_| D::Error::custom(format!("invalid entity id {k:?}"))))
            .collect()
    }
}
