//! Rule expansion: one source rule becomes one compiled rule per absolute
//! direction, with relative motions and entity names resolved.

use crate::diagnostic::{codes, Diagnostic};
use crate::grammar::{BracketItem, BracketPattern, CellPattern, DirectionConstraint, MotionWord, RuleDef};

use super::symbols::{EntityKind, SymbolTable};
use super::types::*;

pub fn directions_for(constraint: DirectionConstraint) -> Vec<Direction> {
    match constraint {
        DirectionConstraint::None => Direction::ALL.to_vec(),
        DirectionConstraint::Horizontal => vec![Direction::Left, Direction::Right],
        DirectionConstraint::Vertical => vec![Direction::Up, Direction::Down],
        DirectionConstraint::Up => vec![Direction::Up],
        DirectionConstraint::Down => vec![Direction::Down],
        DirectionConstraint::Left => vec![Direction::Left],
        DirectionConstraint::Right => vec![Direction::Right],
    }
}

/// Motion written as a word, resolved against the variant's direction.
/// `Err` carries the keyword when the qualifier is not supported.
fn resolve_motion(word: MotionWord, dir: Direction) -> Result<MotionReq, &'static str> {
    Ok(match word {
        MotionWord::None => MotionReq::Any,
        MotionWord::Forward => MotionReq::Is(dir.into()),
        MotionWord::Backward => MotionReq::Is(dir.opposite().into()),
        MotionWord::Ccw => MotionReq::Is(dir.ccw().into()),
        MotionWord::Cw => MotionReq::Is(dir.cw().into()),
        MotionWord::Up => MotionReq::Is(Motion::Up),
        MotionWord::Down => MotionReq::Is(Motion::Down),
        MotionWord::Left => MotionReq::Is(Motion::Left),
        MotionWord::Right => MotionReq::Is(Motion::Right),
        MotionWord::Action => MotionReq::Is(Motion::Action),
        MotionWord::Moving => MotionReq::Moving,
        MotionWord::Stationary => MotionReq::Stationary,
        other => return Err(other.keyword().unwrap_or("?")),
    })
}

/// Expands `rule` into its compiled direction variants, ordered up, down,
/// left, right.
pub fn expand_rule(
    rule: &RuleDef,
    source_index: usize,
    symbols: &SymbolTable,
) -> Result<Vec<CompiledRule>, Vec<Diagnostic>> {
    let mut errors = Vec::new();
    let line = rule.pos.line;
    let err = |col: usize, code: &str, msg: String| Diagnostic::semantic(line, col, code, msg);

    if rule.rigid {
        errors.push(err(rule.pos.column, codes::UNSUPPORTED_FEATURE, "'rigid' rules are not supported".into()));
    }
    if !rule.rhs.is_empty() {
        if rule.lhs.len() != rule.rhs.len() {
            errors.push(err(
                rule.pos.column,
                codes::RULE_ARITY_MISMATCH,
                format!("left side has {} bracket(s) but right side has {}", rule.lhs.len(), rule.rhs.len()),
            ));
        } else {
            for (k, (l, r)) in rule.lhs.iter().zip(&rule.rhs).enumerate() {
                if l.items.len() != r.items.len() || l.ellipsis_positions() != r.ellipsis_positions() {
                    errors.push(err(
                        r.pos.column,
                        codes::RULE_ARITY_MISMATCH,
                        format!(
                            "bracket {} has {} cell(s) on the left but {} on the right",
                            k + 1,
                            l.items.len(),
                            r.items.len()
                        ),
                    ));
                }
            }
        }
    }

    // Entity and qualifier checks are direction independent.
    let sides = rule.lhs.iter().map(|b| (b, false)).chain(rule.rhs.iter().map(|b| (b, true)));
    for (bracket, rhs) in sides {
        for cell in bracket.cells() {
            for atom in &cell.atoms {
                match symbols.get(&atom.entity) {
                    None => errors.push(err(
                        atom.pos.column,
                        codes::UNDEFINED_OBJECT,
                        format!("'{}' is not defined", atom.entity),
                    )),
                    Some(e) if e.kind == EntityKind::Aggregate => errors.push(err(
                        atom.pos.column,
                        codes::UNSUPPORTED_FEATURE,
                        format!("'{}' combines objects with 'and' and cannot be used in rules", atom.entity),
                    )),
                    Some(_) => {}
                }
                if let Err(word) = resolve_motion(atom.motion, Direction::Up) {
                    errors.push(err(
                        atom.pos.column,
                        codes::UNSUPPORTED_FEATURE,
                        format!("the '{word}' qualifier is not supported"),
                    ));
                }
                if rhs && rule.late && atom.motion != MotionWord::None && atom.motion != MotionWord::Stationary {
                    errors.push(err(
                        atom.pos.column,
                        codes::UNSUPPORTED_FEATURE,
                        "late rules cannot set movement".into(),
                    ));
                }
                if rhs && atom.motion == MotionWord::Moving {
                    let on_lhs = lhs_cell_for(rule, bracket, cell).is_some_and(|l| {
                        l.atoms.iter().any(|a| {
                            !a.negated && a.motion == MotionWord::Moving && a.entity.eq_ignore_ascii_case(&atom.entity)
                        })
                    });
                    if !on_lhs {
                        errors.push(err(
                            atom.pos.column,
                            codes::UNSUPPORTED_FEATURE,
                            "'moving' on the right needs the same 'moving' object on the left".into(),
                        ));
                    }
                }
            }
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let mut variants = Vec::new();
    for dir in directions_for(rule.direction) {
        let mut brackets = Vec::new();
        for (k, lhs) in rule.lhs.iter().enumerate() {
            let rhs = rule.rhs.get(k);
            match compile_bracket(lhs, rhs, dir, symbols, line) {
                Ok(b) => brackets.push(b),
                Err(mut e) => errors.append(&mut e),
            }
        }
        variants.push(CompiledRule {
            source_index,
            line,
            direction: dir,
            late: rule.late,
            random: rule.random,
            brackets,
            rewrites: !rule.rhs.is_empty(),
            commands: rule.commands.clone(),
        });
    }
    if !errors.is_empty() {
        errors.sort_by_key(|d| (d.line, d.column));
        errors.dedup();
        return Err(errors);
    }
    Ok(variants)
}

fn lhs_cell_for<'a>(rule: &'a RuleDef, rhs_bracket: &BracketPattern, rhs_cell: &CellPattern) -> Option<&'a CellPattern> {
    let b = rule.rhs.iter().position(|b| std::ptr::eq(b, rhs_bracket))?;
    let c = rhs_bracket.items.iter().position(|item| match item {
        BracketItem::Cell(cell) => std::ptr::eq(cell, rhs_cell),
        BracketItem::Ellipsis => false,
    })?;
    match rule.lhs.get(b)?.items.get(c)? {
        BracketItem::Cell(cell) => Some(cell),
        BracketItem::Ellipsis => None,
    }
}

fn compile_bracket(
    lhs: &BracketPattern,
    rhs: Option<&BracketPattern>,
    dir: Direction,
    symbols: &SymbolTable,
    line: usize,
) -> Result<CompiledBracket, Vec<Diagnostic>> {
    let mut errors = Vec::new();
    let mut segments = vec![Vec::new()];
    for (k, item) in lhs.items.iter().enumerate() {
        match item {
            BracketItem::Ellipsis => segments.push(Vec::new()),
            BracketItem::Cell(cell) => {
                let rhs_cell = rhs.and_then(|r| match r.items.get(k) {
                    Some(BracketItem::Cell(c)) => Some(c),
                    _ => None,
                });
                match compile_cell(cell, rhs_cell, dir, symbols, line) {
                    Ok(c) => segments.last_mut().unwrap().push(c),
                    Err(mut e) => errors.append(&mut e),
                }
            }
        }
    }
    if errors.is_empty() {
        Ok(CompiledBracket { segments })
    } else {
        Err(errors)
    }
}

fn compile_cell(
    lhs: &CellPattern,
    rhs: Option<&CellPattern>,
    dir: Direction,
    symbols: &SymbolTable,
    line: usize,
) -> Result<CompiledCell, Vec<Diagnostic>> {
    let mut errors = Vec::new();
    let mut matchers = Vec::new();
    let mut positive_names: Vec<(usize, String, MotionWord)> = Vec::new();
    let mut single_layers: Vec<usize> = Vec::new();

    for atom in &lhs.atoms {
        let entity = symbols.get(&atom.entity).expect("checked by caller");
        let motion = resolve_motion(atom.motion, dir).expect("checked by caller");
        let layers = symbols.layers_of(&entity.objects);
        if !atom.negated {
            if entity.objects.len() == 1 && layers.len() == 1 {
                if single_layers.contains(&layers[0]) {
                    errors.push(Diagnostic::semantic(
                        line,
                        atom.pos.column,
                        codes::OBJECT_LAYER_CONFLICT,
                        format!("'{}' shares a collision layer with another object in the same cell", atom.entity),
                    ));
                }
                single_layers.push(layers[0]);
            }
            positive_names.push((matchers.len(), atom.entity.to_lowercase(), atom.motion));
        }
        matchers.push(Matcher {
            negated: atom.negated,
            motion,
            objects: entity.set(),
            layers,
        });
    }

    let mut rewrite = Vec::new();
    if let Some(rhs) = rhs {
        let mut removals = Vec::new();
        let mut motions = Vec::new();
        let mut creations = Vec::new();
        let find_rhs = |name: &str| {
            rhs.atoms
                .iter()
                .find(|a| !a.negated && a.entity.eq_ignore_ascii_case(name))
        };
        for (idx, name, lhs_motion) in &positive_names {
            match find_rhs(name) {
                None => removals.push(RewriteStep::Remove { matcher: *idx }),
                Some(r) => {
                    let op = match r.motion {
                        MotionWord::None if *lhs_motion == MotionWord::None => MotionOp::Keep,
                        MotionWord::None | MotionWord::Stationary => MotionOp::Clear,
                        MotionWord::Moving => MotionOp::Keep,
                        word => match resolve_motion(word, dir) {
                            Ok(MotionReq::Is(m)) => MotionOp::Set(m),
                            _ => MotionOp::Keep,
                        },
                    };
                    if op != MotionOp::Keep {
                        motions.push(RewriteStep::SetMotion { matcher: *idx, op });
                    }
                }
            }
        }
        for atom in &rhs.atoms {
            let entity = symbols.get(&atom.entity).expect("checked by caller");
            if atom.negated {
                removals.push(RewriteStep::RemoveAll {
                    objects: entity.set(),
                    layers: symbols.layers_of(&entity.objects),
                });
                continue;
            }
            let name = atom.entity.to_lowercase();
            if positive_names.iter().any(|(_, n, _)| *n == name) {
                continue;
            }
            if entity.objects.len() != 1 {
                errors.push(Diagnostic::semantic(
                    line,
                    atom.pos.column,
                    codes::AMBIGUOUS_RHS_PROPERTY,
                    format!(
                        "'{}' could be several objects; it must also appear in the matching cell on the left",
                        atom.entity
                    ),
                ));
                continue;
            }
            let object = entity.objects[0];
            let motion = match resolve_motion(atom.motion, dir) {
                Ok(MotionReq::Is(m)) => m,
                _ => Motion::None,
            };
            let layer = symbols.object_layers[object as usize].unwrap_or(0);
            creations.push(RewriteStep::Create { object, layer, motion });
        }
        rewrite.extend(removals);
        rewrite.extend(motions);
        rewrite.extend(creations);
    }

    if errors.is_empty() {
        Ok(CompiledCell { matchers, rewrite })
    } else {
        Err(errors)
    }
}
