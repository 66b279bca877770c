//! Static object and fixture catalog with display names and aliases.

use super::state::{FixtureId, FixtureKind, ObjectId};

pub struct ObjectEntry {
    pub id: ObjectId,
    pub key: &'static str,
    pub display: &'static str,
    /// Property-style references; the first one is used when rendering the
    /// object-property instruction variant.
    pub aliases: &'static [&'static str],
}

pub struct FixtureEntry {
    pub id: FixtureId,
    pub key: &'static str,
    pub kind: FixtureKind,
    pub display: &'static str,
    pub aliases: &'static [&'static str],
}

macro_rules! obj {
    ($id:expr, $key:expr, $display:expr, [$($alias:expr),*]) => {
        ObjectEntry { id: ObjectId($id), key: $key, display: $display, aliases: &[$($alias),*] }
    };
}

macro_rules! fix {
    ($id:expr, $key:expr, $kind:ident, $display:expr, [$($alias:expr),*]) => {
        FixtureEntry { id: FixtureId($id), key: $key, kind: FixtureKind::$kind, display: $display, aliases: &[$($alias),*] }
    };
}

pub const OBJECTS: &[ObjectEntry] = &[
    obj!(1, "soup", "alphabet soup", ["can of soup"]),
    obj!(2, "sauce", "tomato sauce", ["can of sauce"]),
    obj!(3, "cheese", "cream cheese box", ["box of cheese", "cream cheese"]),
    obj!(4, "butter", "butter", ["box of butter"]),
    obj!(5, "juice", "orange juice", ["carton of juice"]),
    obj!(6, "milk", "milk", ["carton of milk"]),
    obj!(7, "ketchup", "ketchup", ["bottle of ketchup"]),
    obj!(8, "moka", "moka pot", ["moka machine", "moka coffee maker"]),
    obj!(9, "bowl", "black bowl", ["middle bowl"]),
    obj!(10, "white_mug", "white mug", ["pure white cup"]),
    obj!(11, "yw_mug", "yellow and white mug", ["middle mug"]),
    obj!(12, "red_mug", "red mug", ["crimson cup"]),
    obj!(13, "book", "book", ["standing book"]),
    obj!(14, "pudding", "chocolate pudding", ["brown chocolate"]),
    obj!(15, "wine", "wine bottle", ["bottle of wine"]),
    obj!(16, "bbq", "bbq sauce", ["bottle of bbq sauce"]),
    obj!(17, "dressing", "salad dressing", ["bottle of dressing"]),
    obj!(18, "orange", "orange", ["round fruit"]),
];

pub const FIXTURES: &[FixtureEntry] = &[
    fix!(101, "basket", Basket, "basket", ["wicker basket"]),
    fix!(102, "caddy", Basket, "caddy", ["back compartment of the caddy", "rear part of the caddy"]),
    fix!(103, "stove", Stove, "stove", ["cooktop"]),
    fix!(104, "drawer", Drawer, "bottom drawer", ["lowest drawer", "bottom drawer of the cabinet", "drawer"]),
    fix!(105, "microwave", Microwave, "microwave", ["oven"]),
    fix!(106, "left_plate", Plate, "left plate", ["plate"]),
    fix!(107, "right_plate", Plate, "right plate", ["other plate"]),
];

pub fn object_entry(id: ObjectId) -> Option<&'static ObjectEntry> {
    OBJECTS.iter().find(|e| e.id == id)
}

pub fn fixture_entry(id: FixtureId) -> Option<&'static FixtureEntry> {
    FIXTURES.iter().find(|e| e.id == id)
}

pub fn object_key(id: ObjectId) -> Option<&'static str> {
    object_entry(id).map(|e| e.key)
}

pub fn fixture_key(id: FixtureId) -> Option<&'static str> {
    fixture_entry(id).map(|e| e.key)
}

pub fn object_by_key(key: &str) -> Option<&'static ObjectEntry> {
    OBJECTS.iter().find(|e| e.key == key)
}

pub fn fixture_by_key(key: &str) -> Option<&'static FixtureEntry> {
    FIXTURES.iter().find(|e| e.key == key)
}

/// Resolves a display name or alias (case-insensitive) to an object id.
pub fn resolve_object(name: &str) -> Option<ObjectId> {
    let name = name.trim().to_ascii_lowercase();
    OBJECTS
        .iter()
        .find(|e| e.display == name || e.aliases.contains(&name.as_str()))
        .map(|e| e.id)
}

pub fn resolve_fixture(name: &str) -> Option<FixtureId> {
    let name = name.trim().to_ascii_lowercase();
    FIXTURES
        .iter()
        .find(|e| e.display == name || e.aliases.contains(&name.as_str()))
        .map(|e| e.id)
}

/// Every object surface form, longest first, for regex alternation.
pub fn object_surface_forms() -> Vec<&'static str> {
    let mut v: Vec<&'static str> = OBJECTS
        .iter()
        .flat_map(|e| std::iter::once(e.display).chain(e.aliases.iter().copied()))
        .collect();
    v.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    v
}

pub fn fixture_surface_forms() -> Vec<&'static str> {
    let mut v: Vec<&'static str> = FIXTURES
        .iter()
        .flat_map(|e| std::iter::once(e.display).chain(e.aliases.iter().copied()))
        .collect();
    v.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn surface_forms_are_unambiguous() {
        let mut seen = HashSet::new();
        for f in object_surface_forms().into_iter().chain(fixture_surface_forms()) {
            assert!(seen.insert(f), "duplicate surface form {f}");
        }
    }

    #[test]
    fn aliases_resolve() {
        assert_eq!(resolve_object("can of soup"), Some(ObjectId(1)));
        assert_eq!(resolve_object("Cream Cheese"), Some(ObjectId(3)));
        assert_eq!(resolve_fixture("cooktop"), Some(FixtureId(103)));
        assert_eq!(resolve_object("spaceship"), None);
    }
}
