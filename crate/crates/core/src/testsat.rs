//! Tiny DPLL solver for unit tests. Deliberately naive and independent of
//! the external solver path.

use crate::cnf::{CnfFormula, Lit};

fn value(assign: &[Option<bool>], l: Lit) -> Option<bool> {
    assign[l.var() as usize].map(|v| v == l.is_positive())
}

fn dpll(f: &CnfFormula, assign: &mut Vec<Option<bool>>) -> bool {
    // Unit propagation to fixpoint.
    loop {
        let mut changed = false;
        for clause in &f.clauses {
            let mut unassigned = None;
            let mut n_unassigned = 0;
            let mut sat = false;
            for &l in clause {
                match value(assign, l) {
                    Some(true) => {
                        sat = true;
                        break;
                    }
                    Some(false) => {}
                    None => {
                        n_unassigned += 1;
                        unassigned = Some(l);
                    }
                }
            }
            if sat {
                continue;
            }
            match n_unassigned {
                0 => return false,
                1 => {
                    let l = unassigned.unwrap();
                    assign[l.var() as usize] = Some(l.is_positive());
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    let Some(var) = (1..assign.len()).find(|&v| assign[v].is_none()) else {
        return true;
    };
    for choice in [false, true] {
        let mut next = assign.clone();
        next[var] = Some(choice);
        if dpll(f, &mut next) {
            *assign = next;
            return true;
        }
    }
    false
}

/// A model extending `assumptions`, indexed by variable id.
pub fn solve(f: &CnfFormula, assumptions: &[Lit]) -> Option<Vec<bool>> {
    let mut assign = vec![None; f.num_vars as usize + 1];
    for &l in assumptions {
        match value(&assign, l) {
            Some(false) => return None,
            _ => assign[l.var() as usize] = Some(l.is_positive()),
        }
    }
    if !dpll(f, &mut assign) {
        return None;
    }
    let model: Vec<bool> = assign.into_iter().map(|v| v.unwrap_or(false)).collect();
    debug_assert!(f.satisfied_by(&model));
    Some(model)
}

/// All models over variables `1..=num_vars` extending `assumptions`,
/// found by blocking each model in turn.
pub fn all_models(f: &CnfFormula, assumptions: &[Lit], num_vars: u32) -> Vec<Vec<bool>> {
    let mut g = f.clone();
    let mut out = Vec::new();
    while let Some(m) = solve(&g, assumptions) {
        g.clauses.push(
            (1..=num_vars)
                .map(|v| {
                    let l = Lit::from_dimacs(v as i32);
                    if m[v as usize] {
                        !l
                    } else {
                        l
                    }
                })
                .collect(),
        );
        out.push(m);
        assert!(out.len() <= 1 << 16, "model enumeration runaway");
    }
    out
}
