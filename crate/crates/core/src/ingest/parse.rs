//! Delimited-text parsing for contact and lineup files. Bad rows are
//! collected as rejections rather than aborting the run (strict mode is
//! enforced by the caller).

use super::schema::{SchemaConfig, REQUIRED_FIELDS};
use super::IngestError;
use crate::error::{Error, Result};
use crate::types::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Identifies one point within the corpus.
pub type PointRef = (MatchId, u32, u32);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ParsedContacts {
    pub records: Vec<ContactRecord>,
    pub rejections: Vec<Rejection>,
    /// Recorded winner per point, when the optional `winner` column exists.
    pub recorded_winners: BTreeMap<PointRef, TeamId>,
}

struct ColumnIndex {
    required: BTreeMap<&'static str, usize>,
    optional: BTreeMap<&'static str, usize>,
}

fn resolve_columns(headers: &csv::StringRecord, schema: &SchemaConfig) -> Result<ColumnIndex> {
    let position = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut required = BTreeMap::new();
    for &field in REQUIRED_FIELDS {
        let col = schema
            .column_for(field)
            .ok_or_else(|| IngestError::MissingColumn {
                field: field.to_string(),
            })?;
        let idx = position(col).ok_or_else(|| IngestError::MissingColumn {
            field: field.to_string(),
        })?;
        required.insert(field, idx);
    }
    let mut optional = BTreeMap::new();
    for &field in super::schema::OPTIONAL_FIELDS {
        if let Some(col) = schema.column_for(field) {
            if let Some(idx) = position(col) {
                optional.insert(field, idx);
            }
        }
    }
    Ok(ColumnIndex { required, optional })
}

/// Parse a contact log. Every row either yields a `ContactRecord` or a
/// recorded rejection with its row number and reason.
pub fn parse_contact_file(path: &Path, schema: &SchemaConfig) -> Result<ParsedContacts> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::io(path.display().to_string(), e.into()))?;
    let headers = reader.headers()?.clone();
    let cols = resolve_columns(&headers, schema)?;

    let mut out = ParsedContacts::default();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                out.rejections.push(Rejection {
                    row: row_no,
                    reason: format!("unreadable row: {e}"),
                });
                continue;
            }
        };
        match parse_row(&row, &cols) {
            Ok((record, winner)) => {
                if let Some(w) = winner {
                    out.recorded_winners.insert(
                        (
                            record.match_id.clone(),
                            record.set_index,
                            record.point_index,
                        ),
                        w,
                    );
                }
                out.records.push(record);
            }
            Err(reason) => out.rejections.push(Rejection {
                row: row_no,
                reason,
            }),
        }
    }
    Ok(out)
}

fn parse_row(
    row: &csv::StringRecord,
    cols: &ColumnIndex,
) -> std::result::Result<(ContactRecord, Option<TeamId>), String> {
    let req = |field: &str| -> std::result::Result<&str, String> {
        let idx = cols.required[field];
        row.get(idx)
            .map(str::trim)
            .ok_or_else(|| format!("missing value for {field}"))
    };
    let opt = |field: &str| -> Option<&str> {
        cols.optional
            .get(field)
            .and_then(|&idx| row.get(idx))
            .map(str::trim)
            .filter(|s| !s.is_empty())
    };

    let match_id = req("match_id")?;
    let point = req("point")?;
    if match_id.is_empty() || point.is_empty() {
        return Err("OrphanContact: contact with no enclosing point".to_string());
    }
    let set_index: u32 = req("set")?
        .parse()
        .map_err(|_| format!("bad set index '{}'", req("set").unwrap_or("")))?;
    let point_index: u32 = point
        .parse()
        .map_err(|_| format!("bad point index '{point}'"))?;
    let possession_index: u32 = req("possession")?
        .parse()
        .map_err(|_| "bad possession index".to_string())?;

    let skill_raw = req("skill")?;
    let skill =
        SkillType::parse(skill_raw).ok_or_else(|| format!("unknown skill '{skill_raw}'"))?;

    let eval_raw = req("eval")?;
    let mut chars = eval_raw.chars();
    let eval = match (chars.next(), chars.next()) {
        (Some(c), None) => EvalCode::from_symbol(c)
            .ok_or_else(|| format!("BadEvalCode: '{eval_raw}' is not in the evaluation scale"))?,
        _ => {
            return Err(format!(
                "BadEvalCode: '{eval_raw}' is not in the evaluation scale"
            ))
        }
    };
    if !eval.valid_for(skill) {
        return Err(format!(
            "BadEvalCode: '{}' is not valid for {skill}",
            eval.symbol()
        ));
    }

    let attack_code = opt("attack_code").map(str::to_string);
    if skill == SkillType::Attack && attack_code.is_none() {
        return Err("attack contact without attack code".to_string());
    }
    if skill != SkillType::Attack && attack_code.is_some() {
        return Err(format!("attack code on a {skill} contact"));
    }

    let start_xy = match (opt("start_x"), opt("start_y")) {
        (Some(x), Some(y)) => Some((
            x.parse::<f64>().map_err(|_| format!("bad start_x '{x}'"))?,
            y.parse::<f64>().map_err(|_| format!("bad start_y '{y}'"))?,
        )),
        _ => None,
    };

    let end_zone = match opt("end_zone") {
        Some(z) => {
            let n: u8 = z.parse().map_err(|_| format!("BadZone: '{z}'"))?;
            Some(CourtZone::new(n).ok_or_else(|| format!("BadZone: {n} is outside 1..9"))?)
        }
        None => None,
    };

    let winner = opt("winner").map(TeamId::from);

    Ok((
        ContactRecord {
            match_id: MatchId::from(match_id),
            set_index,
            point_index,
            possession_index,
            player: PlayerId::from(req("player")?),
            team: TeamId::from(req("team")?),
            conference: ConferenceId::from(req("conference")?),
            skill,
            eval,
            attack_code,
            start_xy,
            end_zone,
        },
        winner,
    ))
}

/// Serialize contacts back to the canonical delimited format. Round-trips
/// with `parse_contact_file` under the canonical schema.
pub fn write_contact_file<W: Write>(w: &mut W, records: &[ContactRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "match_id",
        "set",
        "point",
        "possession",
        "player",
        "team",
        "conference",
        "skill",
        "eval",
        "attack_code",
        "start_x",
        "start_y",
        "end_zone",
    ])?;
    for r in records {
        wtr.write_record([
            r.match_id.as_str(),
            &r.set_index.to_string(),
            &r.point_index.to_string(),
            &r.possession_index.to_string(),
            r.player.as_str(),
            r.team.as_str(),
            r.conference.as_str(),
            r.skill.name(),
            &r.eval.symbol().to_string(),
            r.attack_code.as_deref().unwrap_or(""),
            &r.start_xy.map(|(x, _)| format_coord(x)).unwrap_or_default(),
            &r.start_xy.map(|(_, y)| format_coord(y)).unwrap_or_default(),
            &r.end_zone.map(|z| z.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush()
        .map_err(|e| Error::io("<writer>".to_string(), e))?;
    Ok(())
}

fn format_coord(v: f64) -> String {
    // Shortest round-trip representation keeps the round-trip exact.
    let mut buf = ryu_format(v);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_format(v: f64) -> String {
    format!("{v}")
}

/// Parse a lineup file with fixed header
/// `match_id,set,point,team,slot1..slot6,setter_slot`.
pub fn parse_lineup_file(
    path: &Path,
    delimiter: char,
) -> Result<(Vec<LineupState>, Vec<Rejection>)> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(path.display().to_string(), e.into()))?;

    #[derive(Debug)]
    struct Row {
        match_id: MatchId,
        set_index: u32,
        point_index: u32,
        lineup: TeamLineup,
    }

    let headers = reader.headers()?.clone();
    let idx = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| {
                IngestError::MissingColumn {
                    field: name.to_string(),
                }
                .into()
            })
    };
    let i_match = idx("match_id")?;
    let i_set = idx("set")?;
    let i_point = idx("point")?;
    let i_team = idx("team")?;
    let i_slots: Vec<usize> = (1..=6)
        .map(|s| idx(&format!("slot{s}")))
        .collect::<Result<_>>()?;
    let i_setter = idx("setter_slot")?;

    let mut rows: Vec<Row> = Vec::new();
    let mut rejections = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row_no = i + 1;
        let parse = || -> std::result::Result<Row, String> {
            let rec = rec.as_ref().map_err(|e| e.to_string())?;
            let field = |j: usize| rec.get(j).map(str::trim).unwrap_or("");
            let setter_slot: u8 = field(i_setter)
                .parse()
                .map_err(|_| "bad setter_slot".to_string())?;
            if !(1..=6).contains(&setter_slot) {
                return Err(format!("setter_slot {setter_slot} outside 1..6"));
            }
            let mut slots: Vec<PlayerId> = Vec::with_capacity(6);
            for &j in &i_slots {
                let p = field(j);
                if p.is_empty() {
                    return Err("empty lineup slot".to_string());
                }
                slots.push(PlayerId::from(p));
            }
            Ok(Row {
                match_id: MatchId::from(field(i_match)),
                set_index: field(i_set).parse().map_err(|_| "bad set".to_string())?,
                point_index: field(i_point)
                    .parse()
                    .map_err(|_| "bad point".to_string())?,
                lineup: TeamLineup {
                    team: TeamId::from(field(i_team)),
                    slots: slots.try_into().unwrap(),
                    setter_slot,
                },
            })
        };
        match parse() {
            Ok(r) => rows.push(r),
            Err(reason) => rejections.push(Rejection {
                row: row_no,
                reason,
            }),
        }
    }

    // Pair the two team rows of each point, preserving source order.
    let mut states: Vec<LineupState> = Vec::new();
    let mut pending: BTreeMap<PointRef, Row> = BTreeMap::new();
    let mut order: Vec<PointRef> = Vec::new();
    for row in rows {
        let key = (row.match_id.clone(), row.set_index, row.point_index);
        match pending.remove(&key) {
            None => {
                order.push(key.clone());
                pending.insert(key, row);
            }
            Some(first) => states.push(LineupState {
                match_id: row.match_id,
                set_index: row.set_index,
                point_index: row.point_index,
                home: first.lineup,
                away: row.lineup,
            }),
        }
    }
    for key in order {
        if pending.contains_key(&key) {
            rejections.push(Rejection {
                row: 0,
                reason: format!(
                    "lineup for {} set {} point {} has only one team row",
                    key.0, key.1, key.2
                ),
            });
        }
    }
    states.sort_by(|a, b| {
        (a.match_id.clone(), a.set_index, a.point_index).cmp(&(
            b.match_id.clone(),
            b.set_index,
            b.point_index,
        ))
    });
    Ok((states, rejections))
}
