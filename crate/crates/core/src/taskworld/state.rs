use std::fmt;

use serde::{Deserialize, Serialize};

use super::WorldError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FixtureId(pub u32);

/// Grid cell. `x` grows eastward, `y` grows northward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub x: u16,
    pub y: u16,
}

impl Pos {
    pub const fn new(x: u16, y: u16) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Pos) -> u32 {
        (self.x.abs_diff(other.x) + self.y.abs_diff(other.y)) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    Basket,
    Stove,
    Drawer,
    Plate,
    Microwave,
}

impl FixtureKind {
    pub fn is_openable(self) -> bool {
        matches!(self, FixtureKind::Drawer | FixtureKind::Microwave)
    }

    /// Objects are placed "in" containers and "on" surfaces.
    pub fn is_container(self) -> bool {
        matches!(
            self,
            FixtureKind::Basket | FixtureKind::Drawer | FixtureKind::Microwave
        )
    }

    /// Maximum number of objects the fixture holds at once.
    pub fn capacity(self) -> usize {
        match self {
            FixtureKind::Basket => 2,
            _ => 1,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            FixtureKind::Basket => 0,
            FixtureKind::Stove => 1,
            FixtureKind::Drawer => 2,
            FixtureKind::Plate => 3,
            FixtureKind::Microwave => 4,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => FixtureKind::Basket,
            1 => FixtureKind::Stove,
            2 => FixtureKind::Drawer,
            3 => FixtureKind::Plate,
            4 => FixtureKind::Microwave,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Object {
    pub id: ObjectId,
    pub name: String,
    pub pos: Pos,
    pub container: Option<FixtureId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fixture {
    pub id: FixtureId,
    pub name: String,
    pub kind: FixtureKind,
    pub pos: Pos,
    /// Present iff the fixture is a drawer or microwave.
    pub open: Option<bool>,
    /// Present iff the fixture is a stove.
    pub active: Option<bool>,
}

impl Fixture {
    pub fn is_closed(&self) -> bool {
        self.open == Some(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gripper {
    pub pos: Pos,
    pub held: Option<ObjectId>,
}

/// Full symbolic scene. Objects and fixtures are kept sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorldState {
    pub grid_width: u16,
    pub grid_height: u16,
    pub objects: Vec<Object>,
    pub fixtures: Vec<Fixture>,
    pub gripper: Gripper,
    pub tick: u64,
}

impl WorldState {
    pub fn object(&self, id: ObjectId) -> Option<&Object> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn fixture(&self, id: FixtureId) -> Option<&Fixture> {
        self.fixtures.iter().find(|f| f.id == id)
    }

    pub(crate) fn object_mut(&mut self, id: ObjectId) -> Option<&mut Object> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn fixture_at(&self, pos: Pos) -> Option<&Fixture> {
        self.fixtures.iter().find(|f| f.pos == pos)
    }

    pub fn contents(&self, fixture: FixtureId) -> impl Iterator<Item = &Object> {
        self.objects
            .iter()
            .filter(move |o| o.container == Some(fixture))
    }

    /// Loose (not held, not contained) object lying on `pos`.
    pub fn loose_object_at(&self, pos: Pos) -> Option<&Object> {
        let held = self.gripper.held;
        self.objects
            .iter()
            .find(|o| o.pos == pos && o.container.is_none() && Some(o.id) != held)
    }

    /// Cell with neither a fixture nor a loose object.
    pub fn is_free_floor(&self, pos: Pos) -> bool {
        self.fixture_at(pos).is_none() && self.loose_object_at(pos).is_none()
    }

    pub fn in_bounds(&self, pos: Pos) -> bool {
        pos.x < self.grid_width && pos.y < self.grid_height
    }

    /// Checks the structural invariants of a scene.
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |msg: String| Err(WorldError::InvalidState(msg));
        if !self.in_bounds(self.gripper.pos) {
            return bad("gripper out of bounds".into());
        }
        for w in self.objects.windows(2) {
            if w[0].id >= w[1].id {
                return bad("objects not sorted by unique id".into());
            }
        }
        for w in self.fixtures.windows(2) {
            if w[0].id >= w[1].id {
                return bad("fixtures not sorted by unique id".into());
            }
        }
        for f in &self.fixtures {
            if !self.in_bounds(f.pos) {
                return bad(format!("fixture {} out of bounds", f.name));
            }
            if f.open.is_some() != f.kind.is_openable() {
                return bad(format!("fixture {} open flag mismatch", f.name));
            }
            if f.active.is_some() != (f.kind == FixtureKind::Stove) {
                return bad(format!("fixture {} active flag mismatch", f.name));
            }
            if self.fixtures.iter().filter(|g| g.pos == f.pos).count() > 1 {
                return bad(format!("two fixtures share cell of {}", f.name));
            }
        }
        for o in &self.objects {
            if !self.in_bounds(o.pos) {
                return bad(format!("object {} out of bounds", o.name));
            }
            if let Some(c) = o.container {
                match self.fixture(c) {
                    Some(f) if f.pos == o.pos => {}
                    _ => return bad(format!("object {} container mismatch", o.name)),
                }
            }
        }
        if let Some(h) = self.gripper.held {
            match self.object(h) {
                Some(o) if o.pos == self.gripper.pos && o.container.is_none() => {}
                _ => return bad("held object not at gripper".into()),
            }
        }
        for o in &self.objects {
            if o.container.is_some() || Some(o.id) == self.gripper.held {
                continue;
            }
            if self.fixture_at(o.pos).is_some() {
                return bad(format!("loose object {} on a fixture cell", o.name));
            }
            let n = self
                .objects
                .iter()
                .filter(|p| {
                    p.pos == o.pos && p.container.is_none() && Some(p.id) != self.gripper.held
                })
                .count();
            if n > 1 {
                return bad(format!("two loose objects share cell of {}", o.name));
            }
        }
        for f in &self.fixtures {
            if self.contents(f.id).count() > f.kind.capacity() {
                return bad(format!("fixture {} over capacity", f.name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionToken {
    MoveN,
    MoveS,
    MoveE,
    MoveW,
    Grasp,
    Release,
    Open,
    Close,
    Activate,
    Think,
}

impl ActionToken {
    /// Every token that acts on the dynamics, in a fixed order.
    pub const PHYSICAL: [ActionToken; 9] = [
        ActionToken::MoveN,
        ActionToken::MoveS,
        ActionToken::MoveE,
        ActionToken::MoveW,
        ActionToken::Grasp,
        ActionToken::Release,
        ActionToken::Open,
        ActionToken::Close,
        ActionToken::Activate,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "predicate", rename_all = "snake_case")]
pub enum Subgoal {
    In { object: ObjectId, fixture: FixtureId },
    On { object: ObjectId, fixture: FixtureId },
    Closed { fixture: FixtureId },
    Activated { fixture: FixtureId },
}

impl Subgoal {
    /// Placement predicate with the preposition chosen by fixture kind.
    pub fn place(object: ObjectId, fixture: FixtureId, kind: FixtureKind) -> Self {
        if kind.is_container() {
            Subgoal::In { object, fixture }
        } else {
            Subgoal::On { object, fixture }
        }
    }

    pub fn object(&self) -> Option<ObjectId> {
        match *self {
            Subgoal::In { object, .. } | Subgoal::On { object, .. } => Some(object),
            _ => None,
        }
    }

    pub fn fixture(&self) -> FixtureId {
        match *self {
            Subgoal::In { fixture, .. }
            | Subgoal::On { fixture, .. }
            | Subgoal::Closed { fixture }
            | Subgoal::Activated { fixture } => fixture,
        }
    }
}

impl fmt::Display for Subgoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let on = |id: u32| super::catalog::object_key(ObjectId(id)).unwrap_or("?");
        let fx = |id: u32| super::catalog::fixture_key(FixtureId(id)).unwrap_or("?");
        match *self {
            Subgoal::In { object, fixture } => write!(f, "In({},{})", on(object.0), fx(fixture.0)),
            Subgoal::On { object, fixture } => write!(f, "On({},{})", on(object.0), fx(fixture.0)),
            Subgoal::Closed { fixture } => write!(f, "Closed({})", fx(fixture.0)),
            Subgoal::Activated { fixture } => write!(f, "Activated({})", fx(fixture.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteTag {
    Id,
    LangRephrase,
    LangObjectProperty,
    VisualScene,
    VisualViewpoint,
    Compose,
}

impl SuiteTag {
    pub const ALL: [SuiteTag; 6] = [
        SuiteTag::Id,
        SuiteTag::LangRephrase,
        SuiteTag::LangObjectProperty,
        SuiteTag::VisualScene,
        SuiteTag::VisualViewpoint,
        SuiteTag::Compose,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteTag::Id => "id",
            SuiteTag::LangRephrase => "lang_rephrase",
            SuiteTag::LangObjectProperty => "lang_object_property",
            SuiteTag::VisualScene => "visual_scene",
            SuiteTag::VisualViewpoint => "visual_viewpoint",
            SuiteTag::Compose => "compose",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        SuiteTag::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for SuiteTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskSpec {
    pub instruction: String,
    pub subgoals: Vec<Subgoal>,
    pub suite_tag: SuiteTag,
}
