//! Entity class table: every class token, its category and its interaction flags.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Object,
    Surface,
    Container,
    Room,
    Agent,
}

/// Class vocabulary. Declaration order is the canonical ordering used by
/// predicate vocabularies and furniture id assignment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassName {
    Plate,
    Fork,
    Waterglass,
    Wineglass,
    Salmon,
    Apple,
    Cupcake,
    Pudding,
    Remote,
    Condiment,
    Chips,
    Kitchentable,
    Coffeetable,
    Stove,
    Fridge,
    Dishwasher,
    Kitchencabinet,
    Drawer,
    Kitchen,
    Livingroom,
    Diningroom,
    Bedroom,
    Bathroom,
    Hallway,
    Office,
    Agent,
}

impl ClassName {
    pub const ALL: [ClassName; 26] = [
        ClassName::Plate,
        ClassName::Fork,
        ClassName::Waterglass,
        ClassName::Wineglass,
        ClassName::Salmon,
        ClassName::Apple,
        ClassName::Cupcake,
        ClassName::Pudding,
        ClassName::Remote,
        ClassName::Condiment,
        ClassName::Chips,
        ClassName::Kitchentable,
        ClassName::Coffeetable,
        ClassName::Stove,
        ClassName::Fridge,
        ClassName::Dishwasher,
        ClassName::Kitchencabinet,
        ClassName::Drawer,
        ClassName::Kitchen,
        ClassName::Livingroom,
        ClassName::Diningroom,
        ClassName::Bedroom,
        ClassName::Bathroom,
        ClassName::Hallway,
        ClassName::Office,
        ClassName::Agent,
    ];

    /// Grabbable object classes in canonical order.
    pub const OBJECTS: [ClassName; 11] = [
        ClassName::Plate,
        ClassName::Fork,
        ClassName::Waterglass,
        ClassName::Wineglass,
        ClassName::Salmon,
        ClassName::Apple,
        ClassName::Cupcake,
        ClassName::Pudding,
        ClassName::Remote,
        ClassName::Condiment,
        ClassName::Chips,
    ];

    /// Surfaces and containers in canonical order.
    pub const LOCATIONS: [ClassName; 7] = [
        ClassName::Kitchentable,
        ClassName::Coffeetable,
        ClassName::Stove,
        ClassName::Fridge,
        ClassName::Dishwasher,
        ClassName::Kitchencabinet,
        ClassName::Drawer,
    ];

    /// Location classes that task goals may name. At most one instance of
    /// each exists per apartment.
    pub const GOAL_LOCATIONS: [ClassName; 5] = [
        ClassName::Kitchentable,
        ClassName::Coffeetable,
        ClassName::Stove,
        ClassName::Fridge,
        ClassName::Dishwasher,
    ];

    pub fn category(self) -> Category {
        use ClassName::*;
        match self {
            Plate | Fork | Waterglass | Wineglass | Salmon | Apple | Cupcake | Pudding | Remote
            | Condiment | Chips => Category::Object,
            Kitchentable | Coffeetable | Stove => Category::Surface,
            Fridge | Dishwasher | Kitchencabinet | Drawer => Category::Container,
            Kitchen | Livingroom | Diningroom | Bedroom | Bathroom | Hallway | Office => {
                Category::Room
            }
            Agent => Category::Agent,
        }
    }

    pub fn grabbable(self) -> bool {
        self.category() == Category::Object
    }

    pub fn openable(self) -> bool {
        self.category() == Category::Container
    }

    pub fn is_location(self) -> bool {
        matches!(self.category(), Category::Surface | Category::Container)
    }

    pub fn is_goal_location(self) -> bool {
        Self::GOAL_LOCATIONS.contains(&self)
    }

    /// Position within [`ClassName::OBJECTS`].
    pub fn object_index(self) -> Option<usize> {
        Self::OBJECTS.iter().position(|&c| c == self)
    }

    /// Position within [`ClassName::LOCATIONS`].
    pub fn location_index(self) -> Option<usize> {
        Self::LOCATIONS.iter().position(|&c| c == self)
    }

    pub fn as_str(self) -> &'static str {
        use ClassName::*;
        match self {
            Plate => "plate",
            Fork => "fork",
            Waterglass => "waterglass",
            Wineglass => "wineglass",
            Salmon => "salmon",
            Apple => "apple",
            Cupcake => "cupcake",
            Pudding => "pudding",
            Remote => "remote",
            Condiment => "condiment",
            Chips => "chips",
            Kitchentable => "kitchentable",
            Coffeetable => "coffeetable",
            Stove => "stove",
            Fridge => "fridge",
            Dishwasher => "dishwasher",
            Kitchencabinet => "kitchencabinet",
            Drawer => "drawer",
            Kitchen => "kitchen",
            Livingroom => "livingroom",
            Diningroom => "diningroom",
            Bedroom => "bedroom",
            Bathroom => "bathroom",
            Hallway => "hallway",
            Office => "office",
            Agent => "agent",
        }
    }
}

impl fmt::Display for ClassName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown class name `{0}`")]
pub struct UnknownClass(pub String);

impl FromStr for ClassName {
    type Err = UnknownClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClassName::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownClass(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn openable_set_is_the_four_containers() {
        let openable: Vec<_> = ClassName::ALL.iter().filter(|c| c.openable()).collect();
        assert_eq!(
            openable,
            vec![
                &ClassName::Fridge,
                &ClassName::Dishwasher,
                &ClassName::Kitchencabinet,
                &ClassName::Drawer
            ]
        );
        assert_eq!(ClassName::Stove.category(), Category::Surface);
    }

    #[test]
    fn names_round_trip() {
        for c in ClassName::ALL {
            assert_eq!(c.as_str().parse::<ClassName>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.as_str()));
        }
        assert!("sofa".parse::<ClassName>().is_err());
    }
}
