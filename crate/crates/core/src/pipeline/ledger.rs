//! The per-contact Points Gained ledger as a flat CSV, one credited share
//! per row. This is the hand-off format between `attribute` and `report`.

use crate::attribution::{Component, PointsGainedEntry, Role};
use crate::error::{Error, Result};
use crate::sos::Provenance;
use crate::types::*;
use std::path::Path;

pub const LEDGER_FILE: &str = "ledger.csv";

const HEADER: [&str; 17] = [
    "match_id",
    "set",
    "point",
    "contact",
    "player",
    "team",
    "conference",
    "skill",
    "role",
    "component",
    "share",
    "sign",
    "y",
    "sos",
    "own_side_sos",
    "raw_pg",
    "adjusted_pg",
];

fn role_name(p: Option<Provenance>) -> &'static str {
    match p {
        None => "",
        Some(Provenance::Observed) => "observed",
        Some(Provenance::Inferred) => "inferred",
        Some(Provenance::BackOff) => "backoff",
    }
}

pub fn write_ledger(path: &Path, entries: &[PointsGainedEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::io(path.display().to_string(), std::io::Error::other(e)))?;
    let mut header: Vec<&str> = HEADER.to_vec();
    header.push("provenance");
    w.write_record(&header)?;
    for e in entries {
        w.write_record([
            e.contact.match_id.as_str(),
            &e.contact.set_index.to_string(),
            &e.contact.point_index.to_string(),
            &e.contact.contact_index.to_string(),
            e.player.as_str(),
            e.team.as_str(),
            e.conference.as_str(),
            e.skill.name(),
            e.role.name(),
            &e.component.label(),
            &e.share.to_string(),
            &e.sign.to_string(),
            &e.y.to_string(),
            &e.sos.to_string(),
            &e.own_side_sos.to_string(),
            &e.raw_pg.to_string(),
            &e.adjusted_pg.to_string(),
            role_name(e.provenance),
        ])?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

fn parse_role(s: &str) -> std::result::Result<Role, String> {
    match s {
        "Server" => Ok(Role::Server),
        "Receiver" => Ok(Role::Receiver),
        "Attacker" => Ok(Role::Attacker),
        "Setter" => Ok(Role::Setter),
        "Blocker" => Ok(Role::Blocker),
        "Digger" => Ok(Role::Digger),
        other => Err(format!("unknown role '{other}'")),
    }
}

fn parse_component(s: &str) -> std::result::Result<Component, String> {
    if s == "SV" {
        return Ok(Component::Sv);
    }
    s.parse::<u8>()
        .ok()
        .filter(|k| (1..=7).contains(k))
        .map(Component::Attack)
        .ok_or_else(|| format!("unknown component '{s}'"))
}

fn parse_provenance(s: &str) -> std::result::Result<Option<Provenance>, String> {
    match s {
        "" => Ok(None),
        "observed" => Ok(Some(Provenance::Observed)),
        "inferred" => Ok(Some(Provenance::Inferred)),
        "backoff" => Ok(Some(Provenance::BackOff)),
        other => Err(format!("unknown provenance '{other}'")),
    }
}

pub fn read_ledger(path: &Path) -> Result<Vec<PointsGainedEntry>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::io(path.display().to_string(), std::io::Error::other(e)))?;
    let mut out = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let parse = || -> std::result::Result<PointsGainedEntry, String> {
            let field = |j: usize| record.get(j).ok_or_else(|| format!("missing column {j}"));
            let num = |j: usize| -> std::result::Result<f64, String> {
                field(j)?.parse::<f64>().map_err(|e| e.to_string())
            };
            Ok(PointsGainedEntry {
                contact: ContactRef {
                    match_id: MatchId::from(field(0)?),
                    set_index: field(1)?.parse().map_err(|_| "bad set".to_string())?,
                    point_index: field(2)?.parse().map_err(|_| "bad point".to_string())?,
                    contact_index: field(3)?.parse().map_err(|_| "bad contact".to_string())?,
                },
                player: PlayerId::from(field(4)?),
                team: TeamId::from(field(5)?),
                conference: ConferenceId::from(field(6)?),
                skill: SkillType::parse(field(7)?)
                    .ok_or_else(|| format!("unknown skill '{}'", field(7).unwrap_or("")))?,
                role: parse_role(field(8)?)?,
                component: parse_component(field(9)?)?,
                share: num(10)?,
                sign: num(11)?,
                y: num(12)?,
                sos: num(13)?,
                own_side_sos: num(14)?,
                raw_pg: num(15)?,
                adjusted_pg: num(16)?,
                provenance: parse_provenance(field(17)?)?,
            })
        };
        out.push(parse().map_err(|reason| {
            Error::io(
                path.display().to_string(),
                std::io::Error::other(format!("ledger row {}: {reason}", i + 1)),
            )
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry() -> PointsGainedEntry {
        PointsGainedEntry {
            contact: ContactRef {
                match_id: MatchId::from("m0001"),
                set_index: 1,
                point_index: 7,
                contact_index: 3,
            },
            player: PlayerId::from("C0T0-p1"),
            team: TeamId::from("C0T0"),
            conference: ConferenceId::from("C0"),
            skill: SkillType::Attack,
            role: Role::Attacker,
            component: Component::Attack(2),
            share: 0.9,
            sign: 1.0,
            y: 0.125,
            sos: -0.01,
            own_side_sos: 0.002,
            raw_pg: 0.1125,
            adjusted_pg: 0.1225,
            provenance: Some(Provenance::Inferred),
        }
    }

    #[test]
    fn ledger_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LEDGER_FILE);
        let mut second = entry();
        second.component = Component::Sv;
        second.role = Role::Server;
        second.skill = SkillType::Serve;
        second.provenance = None;
        second.y = -1.0 / 3.0;
        let entries = vec![entry(), second];
        write_ledger(&path, &entries).unwrap();
        let back = read_ledger(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in entries.iter().zip(&back) {
            assert_eq!(a.contact, b.contact);
            assert_eq!(a.role, b.role);
            assert_eq!(a.component, b.component);
            assert_eq!(a.provenance, b.provenance);
            assert_eq!(a.y, b.y);
            assert_eq!(a.adjusted_pg, b.adjusted_pg);
        }
    }

    #[test]
    fn bad_rows_are_reported_with_their_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LEDGER_FILE);
        write_ledger(&path, &[entry()]).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("Attacker", "Wing");
        std::fs::write(&path, text).unwrap();
        let err = read_ledger(&path).unwrap_err();
        assert!(err.to_string().contains("ledger row 1"));
    }
}
