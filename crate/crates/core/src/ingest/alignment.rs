//! Defensive alignment: map the six court positions to players, given a
//! rotation snapshot and the inferred libero.
//!
//! Service rotation order relative to the setter is assumed to be
//! S, OH, MB, OPP, OH, MB. When the setter is in the back row the front-right
//! defender is the OPP and the setter defends back right; when the setter is
//! front row the two switch. The libero replaces the back-row MB when known.

use super::IngestError;
use crate::types::*;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RotationRole {
    Setter,
    OutsideHitter,
    MiddleBlocker,
    Opposite,
}

/// Role of the player in a rotation slot (1-based), relative to the setter.
pub fn slot_role(setter_slot: u8, slot: u8) -> RotationRole {
    debug_assert!((1..=6).contains(&slot) && (1..=6).contains(&setter_slot));
    match (slot + 6 - setter_slot) % 6 {
        0 => RotationRole::Setter,
        1 | 4 => RotationRole::OutsideHitter,
        2 | 5 => RotationRole::MiddleBlocker,
        3 => RotationRole::Opposite,
        _ => unreachable!(),
    }
}

/// Front-row slots are 2, 3, 4.
pub fn slot_is_front(slot: u8) -> bool {
    matches!(slot, 2..=4)
}

pub fn resolve_defensive_positions(
    lineup: &TeamLineup,
    libero: Option<&PlayerId>,
) -> Result<BTreeMap<Position, PlayerId>, IngestError> {
    for (i, p) in lineup.slots.iter().enumerate() {
        if p.as_str().is_empty() {
            return Err(IngestError::IncompleteLineup {
                team: lineup.team.0.clone(),
                slot: (i + 1) as u8,
            });
        }
    }

    let mut out = BTreeMap::new();
    for slot in 1u8..=6 {
        let player = lineup.slots[(slot - 1) as usize].clone();
        let front = slot_is_front(slot);
        let position = match (slot_role(lineup.setter_slot, slot), front) {
            (RotationRole::OutsideHitter, true) => Position::FL,
            (RotationRole::MiddleBlocker, true) => Position::FM,
            (RotationRole::Setter, true) | (RotationRole::Opposite, true) => Position::FR,
            (RotationRole::Setter, false) | (RotationRole::Opposite, false) => Position::BR,
            (RotationRole::OutsideHitter, false) => Position::BM,
            (RotationRole::MiddleBlocker, false) => Position::BL,
        };
        out.insert(position, player);
    }
    if let Some(lib) = libero {
        out.insert(Position::BL, lib.clone());
    }
    debug_assert_eq!(out.len(), 6);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lineup(setter_slot: u8) -> TeamLineup {
        // Slot order 1..6; roles depend on setter_slot.
        TeamLineup {
            team: TeamId::from("T"),
            slots: [
                PlayerId::from("p1"),
                PlayerId::from("p2"),
                PlayerId::from("p3"),
                PlayerId::from("p4"),
                PlayerId::from("p5"),
                PlayerId::from("p6"),
            ],
            setter_slot,
        }
    }

    #[test]
    fn setter_back_right_with_libero() {
        // Setter in slot 1 (back right): roles are 1=S, 2=OH, 3=MB, 4=OPP,
        // 5=OH, 6=MB.
        let l = lineup(1);
        let lib = PlayerId::from("L");
        let pos = resolve_defensive_positions(&l, Some(&lib)).unwrap();
        assert_eq!(pos[&Position::BR], PlayerId::from("p1")); // S
        assert_eq!(pos[&Position::FR], PlayerId::from("p4")); // OPP
        assert_eq!(pos[&Position::FM], PlayerId::from("p3")); // MB
        assert_eq!(pos[&Position::FL], PlayerId::from("p2")); // OH
        assert_eq!(pos[&Position::BL], PlayerId::from("L")); // libero for MB
        assert_eq!(pos[&Position::BM], PlayerId::from("p5")); // OH
    }

    #[test]
    fn front_row_setter_swaps_with_opposite() {
        // Setter in slot 2 (front right): roles are 2=S, 3=OH, 4=MB, 5=OPP,
        // 6=OH, 1=MB.
        let l = lineup(2);
        let pos = resolve_defensive_positions(&l, None).unwrap();
        assert_eq!(pos[&Position::FR], PlayerId::from("p2")); // S now front right
        assert_eq!(pos[&Position::BR], PlayerId::from("p5")); // OPP back right
    }

    #[test]
    fn no_libero_keeps_back_row_middle() {
        let l = lineup(1);
        let pos = resolve_defensive_positions(&l, None).unwrap();
        assert_eq!(pos[&Position::BL], PlayerId::from("p6")); // back-row MB
    }

    #[test]
    fn empty_slot_is_incomplete() {
        let mut l = lineup(1);
        l.slots[3] = PlayerId::from("");
        let err = resolve_defensive_positions(&l, None).unwrap_err();
        assert!(matches!(err, IngestError::IncompleteLineup { slot: 4, .. }));
    }
}
