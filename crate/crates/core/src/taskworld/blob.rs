//! Canonical binary encoding of [`WorldState`] and its 64-bit digest.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes  "TWS1"
//! grid_width   u16
//! grid_height  u16
//! tick         u64
//! gripper.x    u16
//! gripper.y    u16
//! held         u32      object id, 0 = empty hand
//! n_objects    u32
//!   id         u32
//!   name_len   u16, name bytes (UTF-8)
//!   x, y       u16, u16
//!   container  u32      fixture id, 0 = none
//! n_fixtures   u32
//!   id         u32
//!   name_len   u16, name bytes (UTF-8)
//!   kind       u8       basket=0 stove=1 drawer=2 plate=3 microwave=4
//!   x, y       u16, u16
//!   open       u8       0 = n/a, 1 = closed, 2 = open
//!   active     u8       0 = n/a, 1 = off, 2 = on
//! ```
//!
//! The digest is the first eight bytes of SHA-256 over the encoding, read as
//! a little-endian `u64`.

use sha2::{Digest, Sha256};

use super::state::{
    Fixture, FixtureId, FixtureKind, Gripper, Object, ObjectId, Pos, WorldState,
};
use super::WorldError;

const MAGIC: &[u8; 4] = b"TWS1";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateBlob(pub Vec<u8>);

impl StateBlob {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

fn flag(v: Option<bool>) -> u8 {
    match v {
        None => 0,
        Some(false) => 1,
        Some(true) => 2,
    }
}

fn put_name(out: &mut Vec<u8>, name: &str) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
}

pub fn snapshot(state: &WorldState) -> StateBlob {
    let mut out = Vec::with_capacity(64 + 32 * (state.objects.len() + state.fixtures.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&state.grid_width.to_le_bytes());
    out.extend_from_slice(&state.grid_height.to_le_bytes());
    out.extend_from_slice(&state.tick.to_le_bytes());
    out.extend_from_slice(&state.gripper.pos.x.to_le_bytes());
    out.extend_from_slice(&state.gripper.pos.y.to_le_bytes());
    out.extend_from_slice(&state.gripper.held.map_or(0, |o| o.0).to_le_bytes());
    out.extend_from_slice(&(state.objects.len() as u32).to_le_bytes());
    for o in &state.objects {
        out.extend_from_slice(&o.id.0.to_le_bytes());
        put_name(&mut out, &o.name);
        out.extend_from_slice(&o.pos.x.to_le_bytes());
        out.extend_from_slice(&o.pos.y.to_le_bytes());
        out.extend_from_slice(&o.container.map_or(0, |f| f.0).to_le_bytes());
    }
    out.extend_from_slice(&(state.fixtures.len() as u32).to_le_bytes());
    for f in &state.fixtures {
        out.extend_from_slice(&f.id.0.to_le_bytes());
        put_name(&mut out, &f.name);
        out.push(f.kind.code());
        out.extend_from_slice(&f.pos.x.to_le_bytes());
        out.extend_from_slice(&f.pos.y.to_le_bytes());
        out.push(flag(f.open));
        out.push(flag(f.active));
    }
    StateBlob(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WorldError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            WorldError::MalformedBlob(format!("truncated at byte {}", self.at))
        })?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, WorldError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WorldError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, WorldError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, WorldError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn name(&mut self) -> Result<String, WorldError> {
        let n = self.u16()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| WorldError::MalformedBlob("name is not UTF-8".into()))
    }

    fn flag(&mut self) -> Result<Option<bool>, WorldError> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(false)),
            2 => Ok(Some(true)),
            v => Err(WorldError::MalformedBlob(format!("bad flag byte {v}"))),
        }
    }
}

pub fn restore(blob: &StateBlob) -> Result<WorldState, WorldError> {
    let mut r = Reader { buf: &blob.0, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(WorldError::MalformedBlob("bad magic".into()));
    }
    let grid_width = r.u16()?;
    let grid_height = r.u16()?;
    let tick = r.u64()?;
    let gpos = Pos::new(r.u16()?, r.u16()?);
    let held = match r.u32()? {
        0 => None,
        id => Some(ObjectId(id)),
    };
    let n_obj = r.u32()? as usize;
    let mut objects = Vec::with_capacity(n_obj.min(1024));
    for _ in 0..n_obj {
        let id = ObjectId(r.u32()?);
        let name = r.name()?;
        let pos = Pos::new(r.u16()?, r.u16()?);
        let container = match r.u32()? {
            0 => None,
            id => Some(FixtureId(id)),
        };
        objects.push(Object { id, name, pos, container });
    }
    let n_fix = r.u32()? as usize;
    let mut fixtures = Vec::with_capacity(n_fix.min(1024));
    for _ in 0..n_fix {
        let id = FixtureId(r.u32()?);
        let name = r.name()?;
        let code = r.u8()?;
        let kind = FixtureKind::from_code(code)
            .ok_or_else(|| WorldError::MalformedBlob(format!("bad fixture kind {code}")))?;
        let pos = Pos::new(r.u16()?, r.u16()?);
        let open = r.flag()?;
        let active = r.flag()?;
        fixtures.push(Fixture { id, name, kind, pos, open, active });
    }
    if r.at != blob.0.len() {
        return Err(WorldError::MalformedBlob(format!(
            "{} trailing bytes",
            blob.0.len() - r.at
        )));
    }
    let state = WorldState {
        grid_width,
        grid_height,
        objects,
        fixtures,
        gripper: Gripper { pos: gpos, held },
        tick,
    };
    state
        .validate()
        .map_err(|e| WorldError::MalformedBlob(e.to_string()))?;
    Ok(state)
}

pub fn state_hash(state: &WorldState) -> u64 {
    let digest = Sha256::digest(snapshot(state).as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskworld::scenes::sample_scene;
    use crate::taskworld::state::SuiteTag;

    #[test]
    fn round_trip() {
        for idx in 0..10 {
            let (s, _) = sample_scene(SuiteTag::VisualScene, idx, 11).unwrap();
            assert_eq!(restore(&snapshot(&s)).unwrap(), s);
        }
    }

    #[test]
    fn hash_is_sensitive_to_one_cell() {
        let (s, _) = sample_scene(SuiteTag::Id, 0, 7).unwrap();
        let mut moved = s.clone();
        let o = &mut moved.objects[0];
        o.pos.x = if o.pos.x == 0 { 1 } else { o.pos.x - 1 };
        assert_ne!(state_hash(&s), state_hash(&moved));
    }

    #[test]
    fn malformed() {
        let (s, _) = sample_scene(SuiteTag::Id, 0, 7).unwrap();
        let mut b = snapshot(&s);
        b.0.push(0);
        assert!(restore(&b).is_err());
        let b = StateBlob(snapshot(&s).0[..10].to_vec());
        assert!(restore(&b).is_err());
        assert!(restore(&StateBlob(b"XXXX".to_vec())).is_err());
    }
}
