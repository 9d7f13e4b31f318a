//! Prompt templates and the request-to-text rendering used by the remote
//! backend.

use std::collections::BTreeMap;

use crate::baselines::reachable_cells;
use crate::domain::{Coord, LandUse, Participant, TaskSpec, LANDUSE_CATEGORIES};
use crate::error::{Error, Result};

use super::{FeedbackRequest, ProposalRequest, RefineRequest, TieBreakRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptKind {
    Refine,
    TieBreak,
    Propose,
    Feedback,
}

impl PromptKind {
    fn templates(self) -> (&'static str, &'static str) {
        match self {
            PromptKind::Refine => (
                include_str!("../../prompts/v1/refine.system.txt"),
                include_str!("../../prompts/v1/refine.user.txt"),
            ),
            PromptKind::TieBreak => (
                include_str!("../../prompts/v1/tiebreak.system.txt"),
                include_str!("../../prompts/v1/tiebreak.user.txt"),
            ),
            PromptKind::Propose => (
                include_str!("../../prompts/v1/propose.system.txt"),
                include_str!("../../prompts/v1/propose.user.txt"),
            ),
            PromptKind::Feedback => (
                include_str!("../../prompts/v1/feedback.system.txt"),
                include_str!("../../prompts/v1/feedback.user.txt"),
            ),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PromptKind::Refine => "refine",
            PromptKind::TieBreak => "tiebreak",
            PromptKind::Propose => "propose",
            PromptKind::Feedback => "feedback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
}

/// Fills `{name}` placeholders in one pass. Braces that do not enclose a
/// known variable name (JSON examples, tuple hints) are copied verbatim, and
/// substituted text is never rescanned.
fn fill(template: &str, vars: &BTreeMap<&str, String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open + 1..];
        let name_len = tail
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(tail.len());
        let name = &tail[..name_len];
        match vars.get(name) {
            Some(v) if tail[name_len..].starts_with('}') => {
                out.push_str(v);
                rest = &tail[name_len + 1..];
            }
            _ => {
                out.push('{');
                rest = tail;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Renders the system and user prompt of `kind`. Every placeholder the
/// templates use must be supplied.
pub fn render(kind: PromptKind, vars: &BTreeMap<&str, String>) -> Result<RenderedPrompt> {
    let (system, user) = kind.templates();
    let missing: Vec<&str> = placeholders(system)
        .chain(placeholders(user))
        .filter(|p| !vars.contains_key(p))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Invalid(format!(
            "{} prompt is missing {}",
            kind.name(),
            missing.join(", ")
        )));
    }
    Ok(RenderedPrompt {
        system: fill(system, vars),
        user: fill(user, vars),
    })
}

/// Lower-case identifiers written as `{name}`.
fn placeholders(template: &str) -> impl Iterator<Item = &str> {
    template.match_indices('{').filter_map(move |(i, _)| {
        let tail = &template[i + 1..];
        let end = tail.find('}')?;
        let name = &tail[..end];
        let ok = !name.is_empty()
            && name
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
        ok.then_some(name)
    })
}

pub(crate) fn task_setting(spec: &TaskSpec) -> String {
    format!(
        "a {}x{} grid observed over time steps 0 to {} ({} minutes per step); total recruitment budget {}",
        spec.grid.width(),
        spec.grid.height(),
        spec.horizon,
        spec.interval_minutes,
        spec.budget
    )
}

fn preference_text(pref: &[f64; LANDUSE_CATEGORIES]) -> String {
    LandUse::ALL
        .iter()
        .map(|l| format!("{} {:.2}", l.name(), pref[l.index()]))
        .collect::<Vec<_>>()
        .join(", ")
}

pub(crate) fn profile_text(p: &Participant) -> String {
    let pr = &p.profile;
    let hobbies = if pr.hobbies.is_empty() {
        "none".to_string()
    } else {
        pr.hobbies.join(", ")
    };
    let mut s = format!(
        "gender {:?}, age {} ({:?}), economic status {:?}, hobbies: {}, archetype {}; land-use preference: {}; past participations: {}",
        pr.gender,
        pr.age,
        pr.age_group,
        pr.economic_status,
        hobbies,
        pr.archetype.name(),
        preference_text(&p.preference),
        p.history_count
    );
    if !pr.description.is_empty() {
        s.push_str("; ");
        s.push_str(&pr.description);
    }
    s
}

fn schedule_text(p: &Participant) -> String {
    let s = p.schedule();
    format!(
        "origin {} at t={}, destination {} by t={}, speed {} cell(s) per step",
        s.origin, s.depart, s.destination, s.arrive, s.speed
    )
}

/// Land-use mix and crime count for each listed cell, one line per cell.
/// Stands in for the attribute lookup tools the prompts describe.
fn attribute_table(spec: &TaskSpec, cells: &[Coord]) -> String {
    let g = &spec.grid;
    let mut lines = Vec::with_capacity(cells.len());
    for &c in cells {
        let a = g.cell(c);
        let mix: Vec<String> = LandUse::ALL
            .iter()
            .filter(|l| a.landuse[l.index()] > 0.0)
            .map(|l| format!("{} {:.2}", l.name(), a.landuse[l.index()]))
            .collect();
        let crime = if g.has_crime_data() {
            a.crime_count.to_string()
        } else {
            "unknown".to_string()
        };
        lines.push(format!("{c}: land use {}; crime count {crime}", mix.join(", ")));
    }
    lines.join("\n")
}

fn memory_text(items: &[String]) -> String {
    if items.is_empty() {
        "none".to_string()
    } else {
        items.join("; ")
    }
}

pub(crate) fn refine_prompt(req: &RefineRequest, spec: &TaskSpec) -> Result<RenderedPrompt> {
    let p = &req.participant;
    let cells = reachable_cells(p, spec);
    let vars = BTreeMap::from([
        ("grid_size", format!("{}x{}", spec.grid.width(), spec.grid.height())),
        ("start_time", p.depart().to_string()),
        ("end_time", p.arrive().to_string()),
        ("speed", p.speed().to_string()),
        ("grid_attributes", attribute_table(spec, &cells)),
        (
            "start_point",
            format!("({}, {}, {})", p.origin().x, p.origin().y, p.depart()),
        ),
        (
            "end_point",
            format!("({}, {}, {})", p.destination().x, p.destination().y, p.arrive()),
        ),
        ("initial_path_str", req.initial_route.to_tuple_string()),
        ("residual_step", req.residual_steps.to_string()),
        ("worker_profile", profile_text(p)),
        (
            "instructions",
            if req.instructions.is_empty() {
                "none".into()
            } else {
                req.instructions.clone()
            },
        ),
    ]);
    render(PromptKind::Refine, &vars)
}

pub(crate) fn tiebreak_prompt(req: &TieBreakRequest) -> Result<RenderedPrompt> {
    let list: Vec<String> = req
        .candidates
        .iter()
        .map(|c| {
            let pr = &c.profile;
            format!(
                "{{id: {}, gender: {:?}, age: {}, economic status: {:?}, archetype: {}, past participations: {}}}",
                c.id,
                pr.gender,
                pr.age,
                pr.economic_status,
                pr.archetype.name(),
                c.history_count
            )
        })
        .collect();
    let vars = BTreeMap::from([("candidates", format!("[{}]", list.join(", ")))]);
    render(PromptKind::TieBreak, &vars)
}

pub(crate) fn propose_prompt(req: &ProposalRequest, spec: &TaskSpec) -> Result<RenderedPrompt> {
    let (u, v) = (&req.u, &req.v);
    let mut cells = reachable_cells(&u.participant, spec);
    cells.extend(reachable_cells(&v.participant, spec));
    cells.sort();
    cells.dedup();
    let vars = BTreeMap::from([
        ("task_setting", task_setting(spec)),
        ("grid_attributes", attribute_table(spec, &cells)),
        ("u", u.participant.id.clone()),
        ("v", v.participant.id.clone()),
        ("route_u", u.route.to_tuple_string()),
        ("route_v", v.route.to_tuple_string()),
        ("profile_u", profile_text(&u.participant)),
        ("profile_v", profile_text(&v.participant)),
        ("feedback_u", memory_text(&u.feedback)),
        ("feedback_v", memory_text(&v.feedback)),
    ]);
    render(PromptKind::Propose, &vars)
}

pub(crate) fn feedback_prompt(req: &FeedbackRequest, spec: &TaskSpec) -> Result<RenderedPrompt> {
    let p = &req.participant;
    let vars = BTreeMap::from([
        ("task_setting", task_setting(spec)),
        ("schedule", schedule_text(p)),
        ("participant_profile", profile_text(p)),
        ("proposed_route", req.proposed.to_tuple_string()),
        ("original_route", req.original.to_tuple_string()),
        (
            "incentive_message",
            if req.incentive.is_empty() {
                "none".into()
            } else {
                req.incentive.clone()
            },
        ),
        ("feedback_memory", memory_text(&req.feedback_memory)),
    ]);
    render(PromptKind::Feedback, &vars)
}
