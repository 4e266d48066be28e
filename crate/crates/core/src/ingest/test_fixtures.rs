//! Hand-built fixtures used across unit, integration and acceptance tests.
//! The sample rally is the first point of the 2022 national championship.

use crate::types::*;
use std::collections::BTreeMap;

fn contact(
    possession: u32,
    player: &str,
    team: &str,
    skill: SkillType,
    eval: char,
    attack_code: Option<&str>,
    end_zone: Option<u8>,
) -> ContactRecord {
    let conference = match team {
        "Louisville" => "ACC",
        _ => "Big 12",
    };
    ContactRecord {
        match_id: MatchId::from("final"),
        set_index: 1,
        point_index: 1,
        possession_index: possession,
        player: PlayerId::from(player),
        team: TeamId::from(team),
        conference: ConferenceId::from(conference),
        skill,
        eval: EvalCode::from_symbol(eval).unwrap(),
        attack_code: attack_code.map(str::to_string),
        start_xy: None,
        end_zone: end_zone.and_then(CourtZone::new),
    }
}

/// The eleven contacts of the sample rally, as one assembled `PointLog`.
pub fn table_sample_point() -> PointLog {
    use SkillType::*;
    let contacts = vec![
        contact(1, "Anna Deeber", "Louisville", Serve, '-', None, None),
        contact(2, "Emma Halter", "Texas", Reception, '#', None, None),
        contact(2, "Saige K.-Torres", "Texas", Set, '#', None, None),
        contact(
            2,
            "Molly Phillips",
            "Texas",
            Attack,
            '-',
            Some("X6"),
            Some(9),
        ),
        contact(3, "Raquel Lazaro", "Louisville", Dig, '+', None, None),
        contact(3, "Elena Scott", "Louisville", Set, '#', None, None),
        contact(
            3,
            "Claire Chaussee",
            "Louisville",
            Attack,
            '-',
            Some("V5"),
            Some(9),
        ),
        contact(4, "Kayla Caffey", "Texas", Block, '+', None, None),
        contact(5, "Phekran Kong", "Louisville", Dig, '!', None, None),
        contact(5, "Raquel Lazaro", "Louisville", Set, '#', None, None),
        contact(
            5,
            "Claire Chaussee",
            "Louisville",
            Attack,
            '#',
            Some("X5"),
            Some(5),
        ),
    ];
    PointLog {
        match_id: MatchId::from("final"),
        set_index: 1,
        point_index: 1,
        serving_team: TeamId::from("Louisville"),
        receiving_team: TeamId::from("Texas"),
        winner: TeamId::from("Louisville"),
        contacts,
        lineup: table_sample_lineup(),
        liberos: BTreeMap::new(),
        irregular_ending: false,
    }
}

/// Lineups consistent with the sample rally (all contacting players on
/// court, setters labelled).
pub fn table_sample_lineup() -> LineupState {
    let team = |name: &str, players: [&str; 6], setter_slot: u8| TeamLineup {
        team: TeamId::from(name),
        slots: players.map(PlayerId::from),
        setter_slot,
    };
    LineupState {
        match_id: MatchId::from("final"),
        set_index: 1,
        point_index: 1,
        home: team(
            "Louisville",
            [
                "Anna Deeber",
                "Elena Scott",
                "Claire Chaussee",
                "Phekran Kong",
                "Raquel Lazaro",
                "Lou Six",
            ],
            2,
        ),
        away: team(
            "Texas",
            [
                "Emma Halter",
                "Saige K.-Torres",
                "Molly Phillips",
                "Kayla Caffey",
                "Tex Five",
                "Tex Six",
            ],
            2,
        ),
    }
}

/// A one-contact point: service error, receiving team wins.
pub fn service_error_point() -> PointLog {
    let mut serve = contact(
        1,
        "Anna Deeber",
        "Louisville",
        SkillType::Serve,
        '=',
        None,
        None,
    );
    serve.point_index = 2;
    PointLog {
        match_id: MatchId::from("final"),
        set_index: 1,
        point_index: 2,
        serving_team: TeamId::from("Louisville"),
        receiving_team: TeamId::from("Texas"),
        winner: TeamId::from("Texas"),
        contacts: vec![serve],
        lineup: {
            let mut l = table_sample_lineup();
            l.point_index = 2;
            l
        },
        liberos: BTreeMap::new(),
        irregular_ending: false,
    }
}
