use crate::compiler::Motion;

use super::state::GameState;

/// Commits pending moves until nothing more can move, then clears all
/// motions.
///
/// Sources are visited row by row, then by layer; a move commits when its
/// destination slot in the same layer is empty, so contested destinations go
/// to the earliest source. Moves off the grid are dropped.
pub fn resolve_movement(state: &mut GameState) {
    let layers = state.layer_count;
    // An object moves at most once, so only the slots moving at the start
    // need visiting; their order is the tie-break order.
    let mut pending: Vec<usize> = Vec::new();
    for (slot, &m) in state.motions.iter().enumerate() {
        if m != Motion::None as u8 && m != Motion::Action as u8 {
            pending.push(slot);
        }
    }
    if pending.is_empty() {
        state.motions.fill(0);
        return;
    }
    loop {
        let before = pending.len();
        pending.retain(|&slot| {
            let dir = Motion::from_byte(state.motions[slot]).direction().expect("pending slots move");
            let Some(dest) = state.neighbor(slot / layers, dir) else {
                return false;
            };
            let to = dest * layers + slot % layers;
            if state.cells[to] != 0 {
                return true;
            }
            state.cells[to] = state.cells[slot];
            state.cells[slot] = 0;
            state.motions[slot] = 0;
            false
        });
        if pending.len() == before || pending.is_empty() {
            break;
        }
    }
    state.motions.fill(0);
}
