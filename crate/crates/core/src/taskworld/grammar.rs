//! Instruction grammar: rendering task specs to text and compiling text back
//! to ordered subgoal lists.
//!
//! Five productions are recognised (names may be any catalog display name or
//! alias, the article before a name is optional, verbs and prepositions accept
//! a few synonyms):
//!
//! ```text
//! put both the A and the B in the F        -> [In(A,F), In(B,F)]
//! put the A in the F                       -> [In(A,F)]
//! put the A in the F and close it          -> [In(A,F), Closed(F)]
//! turn on the S and put the A on it        -> [Activated(S), On(A,S)]
//! put the A on the F1 and the B on the F2  -> [On(A,F1), On(B,F2)]
//! ```
//!
//! Whether a placement compiles to `In` or `On` depends on the fixture kind.

use std::sync::OnceLock;

use regex::Regex;

use super::catalog::{self, fixture_entry, object_entry};
use super::state::{FixtureId, ObjectId, Subgoal, SuiteTag, TaskSpec};
use super::WorldError;

/// Surface style used when rendering an instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Canonical,
    /// Different verbs and clause wording, same object names.
    Rephrase,
    /// Canonical wording, property-style object names.
    ObjectProperty,
}

pub const PRODUCTIONS: [&str; 5] = [
    "put both the A and the B in the F",
    "put the A in the F",
    "put the A in the F and close it",
    "turn on the S and put the A on it",
    "put the A on the F1 and the B on the F2",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Production {
    Both,
    Single,
    PlaceClose,
    ActivatePlace,
    TwoPlates,
}

fn classify(subgoals: &[Subgoal]) -> Option<Production> {
    use Subgoal::*;
    match subgoals {
        [In { fixture: f1, object: a }, In { fixture: f2, object: b }] if f1 == f2 && a != b => {
            Some(Production::Both)
        }
        [In { .. }] | [On { .. }] => Some(Production::Single),
        [In { fixture: f1, .. }, Closed { fixture: f2 }] if f1 == f2 => {
            Some(Production::PlaceClose)
        }
        [Activated { fixture: f1 }, On { fixture: f2, .. }] if f1 == f2 => {
            Some(Production::ActivatePlace)
        }
        [On { fixture: f1, object: a }, On { fixture: f2, object: b }] if f1 != f2 && a != b => {
            Some(Production::TwoPlates)
        }
        _ => None,
    }
}

fn oname(id: ObjectId, surface: Surface) -> Result<&'static str, WorldError> {
    let e = object_entry(id).ok_or(WorldError::UnknownObject(id))?;
    Ok(match surface {
        Surface::ObjectProperty => e.aliases.first().copied().unwrap_or(e.display),
        _ => e.display,
    })
}

fn fname(id: FixtureId, surface: Surface) -> Result<&'static str, WorldError> {
    let e = fixture_entry(id).ok_or(WorldError::UnknownFixture(id))?;
    Ok(match surface {
        Surface::ObjectProperty => e.aliases.first().copied().unwrap_or(e.display),
        _ => e.display,
    })
}

fn prep(fixture: FixtureId) -> &'static str {
    match fixture_entry(fixture) {
        Some(e) if !e.kind.is_container() => "on",
        _ => "in",
    }
}

/// Renders an ordered subgoal list as an instruction in the given surface style.
pub fn render(subgoals: &[Subgoal], surface: Surface) -> Result<String, WorldError> {
    let prod = classify(subgoals).ok_or_else(|| {
        WorldError::Grammar(format!("subgoal list {subgoals:?} has no grammar production"))
    })?;
    let rephrase = surface == Surface::Rephrase;
    let verb = if rephrase { "place" } else { "put" };
    let o = |id| oname(id, surface);
    let f = |id| fname(id, surface);
    let text = match (prod, subgoals) {
        (Production::Both, [a, b]) => format!(
            "{verb} both the {} and the {} {} the {}",
            o(a.object().unwrap())?,
            o(b.object().unwrap())?,
            if rephrase { "into" } else { "in" },
            f(a.fixture())?
        ),
        (Production::Single, [a]) => format!(
            "{} the {} {} the {}",
            if rephrase { "set" } else { "put" },
            o(a.object().unwrap())?,
            match (rephrase, prep(a.fixture())) {
                (true, "in") => "inside",
                (true, _) => "onto",
                (false, p) => p,
            },
            f(a.fixture())?
        ),
        (Production::PlaceClose, [a, _]) => format!(
            "{} the {} {} the {} and {}",
            if rephrase { "move" } else { "put" },
            o(a.object().unwrap())?,
            if rephrase { "into" } else { "in" },
            f(a.fixture())?,
            if rephrase { "shut the door" } else { "close it" }
        ),
        (Production::ActivatePlace, [s, a]) => format!(
            "{} on the {} and {verb} the {} on it",
            if rephrase { "switch" } else { "turn" },
            f(s.fixture())?,
            o(a.object().unwrap())?
        ),
        (Production::TwoPlates, [a, b]) => format!(
            "{verb} the {} on the {} and the {} on the {}",
            o(a.object().unwrap())?,
            f(a.fixture())?,
            o(b.object().unwrap())?,
            f(b.fixture())?
        ),
        _ => unreachable!("classify guarantees arity"),
    };
    Ok(text)
}

struct Parsers {
    both: Regex,
    place_close: Regex,
    activate_place: Regex,
    two_plates: Regex,
    single: Regex,
}

fn alternation(forms: &[&str]) -> String {
    forms
        .iter()
        .map(|f| regex::escape(f))
        .collect::<Vec<_>>()
        .join("|")
}

fn parsers() -> &'static Parsers {
    static P: OnceLock<Parsers> = OnceLock::new();
    P.get_or_init(|| {
        let obj = alternation(&catalog::object_surface_forms());
        let fix = alternation(&catalog::fixture_surface_forms());
        let verb = "(?:put|place|set|move|transfer)";
        let prep = "(?:in|inside|into|to|on|onto)";
        let the = "(?:the )?";
        let n = |name: &str| format!("{the}(?P<{name}>{obj})");
        let fx = |name: &str| format!("{the}(?P<{name}>{fix})");
        let build = |body: String| Regex::new(&format!("^{body}$")).expect("grammar regex");
        Parsers {
            both: build(format!(
                "{verb} both {} and {} {prep} {}",
                n("a"),
                n("b"),
                fx("f")
            )),
            place_close: build(format!(
                "{verb} {} {prep} {} and (?:close|shut) (?:it|the door)",
                n("a"),
                fx("f")
            )),
            activate_place: build(format!(
                "(?:turn|switch) on {} and {verb} {} on it",
                fx("f"),
                n("a")
            )),
            two_plates: build(format!(
                "{verb} {} {prep} {} and (?:{verb} )?{} {prep} {}",
                n("a"),
                fx("f"),
                n("b"),
                fx("g")
            )),
            single: build(format!("{verb} {} {prep} {}", n("a"), fx("f"))),
        }
    })
}

fn normalize(text: &str) -> String {
    let lower = text.trim().to_ascii_lowercase();
    let lower = lower.trim_end_matches('.').trim_end();
    lower.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn place(object: &str, fixture: &str) -> Result<Subgoal, WorldError> {
    let o = catalog::resolve_object(object)
        .ok_or_else(|| WorldError::Grammar(format!("unknown object name {object:?}")))?;
    let f = catalog::resolve_fixture(fixture)
        .ok_or_else(|| WorldError::Grammar(format!("unknown fixture name {fixture:?}")))?;
    let kind = fixture_entry(f).map(|e| e.kind).unwrap();
    Ok(Subgoal::place(o, f, kind))
}

/// Compiles an instruction into an ordered subgoal list (suite tag `id`).
pub fn compile_instruction(text: &str) -> Result<TaskSpec, WorldError> {
    let norm = normalize(text);
    let p = parsers();
    let subgoals = if let Some(c) = p.place_close.captures(&norm) {
        let g = place(&c["a"], &c["f"])?;
        vec![g, Subgoal::Closed { fixture: g.fixture() }]
    } else if let Some(c) = p.activate_place.captures(&norm) {
        let g = place(&c["a"], &c["f"])?;
        let fixture = g.fixture();
        vec![
            Subgoal::Activated { fixture },
            Subgoal::On { object: g.object().unwrap(), fixture },
        ]
    } else if let Some(c) = p.both.captures(&norm) {
        vec![place(&c["a"], &c["f"])?, place(&c["b"], &c["f"])?]
    } else if let Some(c) = p.two_plates.captures(&norm) {
        vec![place(&c["a"], &c["f"])?, place(&c["b"], &c["g"])?]
    } else if let Some(c) = p.single.captures(&norm) {
        vec![place(&c["a"], &c["f"])?]
    } else {
        return Err(WorldError::Parse {
            text: text.to_string(),
            nearest: nearest_production(&norm),
        });
    };
    Ok(TaskSpec {
        instruction: text.to_string(),
        subgoals,
        suite_tag: SuiteTag::Id,
    })
}

/// Replaces known object and fixture names with the production placeholders
/// so that edit distance measures sentence shape, not vocabulary.
fn abstract_names(norm: &str) -> String {
    static NAMES: OnceLock<(Regex, Regex)> = OnceLock::new();
    let (objects, fixtures) = NAMES.get_or_init(|| {
        let alt = |forms: Vec<&str>| {
            let body = forms.iter().map(|f| regex::escape(f)).collect::<Vec<_>>().join("|");
            Regex::new(&format!(r"\b(?:{body})\b")).unwrap()
        };
        (alt(catalog::object_surface_forms()), alt(catalog::fixture_surface_forms()))
    });
    let s = objects.replace_all(norm, "A");
    fixtures.replace_all(&s, "F").into_owned()
}

fn nearest_production(norm: &str) -> String {
    let shape = abstract_names(norm);
    PRODUCTIONS
        .iter()
        .map(|p| (strsim::normalized_levenshtein(&shape, p), *p))
        .fold((f64::MIN, ""), |best, cur| if cur.0 > best.0 { cur } else { best })
        .1
        .to_string()
}

/// One-sentence plan text for a subgoal, as used inside reasoning records.
pub fn plan_sentence(goal: &Subgoal) -> Result<String, WorldError> {
    Ok(match *goal {
        Subgoal::In { object, fixture } => format!(
            "put the {} in the {}",
            oname(object, Surface::Canonical)?,
            fname(fixture, Surface::Canonical)?
        ),
        Subgoal::On { object, fixture } => format!(
            "put the {} on the {}",
            oname(object, Surface::Canonical)?,
            fname(fixture, Surface::Canonical)?
        ),
        Subgoal::Closed { fixture } => format!("close the {}", fname(fixture, Surface::Canonical)?),
        Subgoal::Activated { fixture } => {
            format!("turn on the {}", fname(fixture, Surface::Canonical)?)
        }
    })
}

/// Inverse of [`plan_sentence`].
pub fn parse_plan_sentence(sentence: &str) -> Result<Subgoal, WorldError> {
    let bad = || WorldError::Grammar(format!("unparseable plan sentence {sentence:?}"));
    if let Some(rest) = sentence.strip_prefix("close the ") {
        let f = catalog::resolve_fixture(rest).ok_or_else(bad)?;
        return Ok(Subgoal::Closed { fixture: f });
    }
    if let Some(rest) = sentence.strip_prefix("turn on the ") {
        let f = catalog::resolve_fixture(rest).ok_or_else(bad)?;
        return Ok(Subgoal::Activated { fixture: f });
    }
    let rest = sentence.strip_prefix("put the ").ok_or_else(bad)?;
    for (sep, is_in) in [(" in the ", true), (" on the ", false)] {
        // The object name may itself contain the separator; try every split.
        for (idx, _) in rest.match_indices(sep) {
            let (o, f) = (&rest[..idx], &rest[idx + sep.len()..]);
            if let (Some(o), Some(f)) = (catalog::resolve_object(o), catalog::resolve_fixture(f)) {
                return Ok(if is_in {
                    Subgoal::In { object: o, fixture: f }
                } else {
                    Subgoal::On { object: o, fixture: f }
                });
            }
        }
    }
    Err(bad())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(o: &str) -> ObjectId {
        catalog::object_by_key(o).unwrap().id
    }
    fn fid(f: &str) -> FixtureId {
        catalog::fixture_by_key(f).unwrap().id
    }

    #[test]
    fn both_in_basket() {
        let t = compile_instruction("put both the alphabet soup and the tomato sauce in the basket")
            .unwrap();
        assert_eq!(
            t.subgoals,
            vec![
                Subgoal::In { object: ids("soup"), fixture: fid("basket") },
                Subgoal::In { object: ids("sauce"), fixture: fid("basket") },
            ]
        );
    }

    #[test]
    fn stove_production() {
        let t = compile_instruction("turn on the stove and put the moka pot on it").unwrap();
        assert_eq!(
            t.subgoals,
            vec![
                Subgoal::Activated { fixture: fid("stove") },
                Subgoal::On { object: ids("moka"), fixture: fid("stove") },
            ]
        );
    }

    #[test]
    fn property_aliases_map_to_canonical() {
        let a = compile_instruction("put both the can of soup and can of sauce in the basket.")
            .unwrap();
        let b = compile_instruction("put both the alphabet soup and the tomato sauce in the basket")
            .unwrap();
        assert_eq!(a.subgoals, b.subgoals);
    }

    #[test]
    fn names_containing_and() {
        let t = compile_instruction(
            "put the white mug on the left plate and put the yellow and white mug on the right plate",
        )
        .unwrap();
        assert_eq!(
            t.subgoals,
            vec![
                Subgoal::On { object: ids("white_mug"), fixture: fid("left_plate") },
                Subgoal::On { object: ids("yw_mug"), fixture: fid("right_plate") },
            ]
        );
        let t = compile_instruction("put the yellow and white mug in the microwave and close it")
            .unwrap();
        assert_eq!(t.subgoals[1], Subgoal::Closed { fixture: fid("microwave") });
    }

    #[test]
    fn non_grammar_reports_nearest() {
        let err = compile_instruction("please put the alphabet soup in the basket now").unwrap_err();
        match err {
            WorldError::Parse { nearest, .. } => assert_eq!(nearest, "put the A in the F"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(compile_instruction("dance").is_err());
    }

    #[test]
    fn plan_sentences_round_trip() {
        for g in [
            Subgoal::In { object: ids("yw_mug"), fixture: fid("microwave") },
            Subgoal::On { object: ids("moka"), fixture: fid("stove") },
            Subgoal::Closed { fixture: fid("drawer") },
            Subgoal::Activated { fixture: fid("stove") },
        ] {
            assert_eq!(parse_plan_sentence(&plan_sentence(&g).unwrap()).unwrap(), g);
        }
    }
}
