//! Dense two-phase simplex for small linear programs.
//!
//! Maximizes `c·x` subject to row constraints (each `<=`, `>=` or `=`) and
//! `x >= 0`. Sized for a few hundred columns: the tableau is a dense
//! `Vec<Vec<f64>>`, pivots follow Bland's rule, so cycling is impossible and
//! the returned basic solution is deterministic.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("linear program malformed: {0}")]
    Malformed(String),
    #[error("simplex exceeded {0} pivots")]
    PivotLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// `maximize c·x  s.t.  rows, x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Cmp, f64)>,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

const TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

pub fn solve(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    let n = lp.objective.len();
    if n == 0 {
        return Err(LpError::Malformed("no variables".into()));
    }
    for (row, _, _) in &lp.rows {
        if row.len() != n {
            return Err(LpError::Malformed("row length mismatch".into()));
        }
    }
    let m = lp.rows.len();

    // Column layout: structural | slack/surplus | artificial.
    let mut n_slack = 0usize;
    for (_, cmp, _) in &lp.rows {
        if !matches!(cmp, Cmp::Eq) {
            n_slack += 1;
        }
    }
    let total = n + n_slack + m; // one artificial per row, unused ones stay zero
    let art0 = n + n_slack;

    // tableau[r][0..total] = coefficients, tableau[r][total] = rhs
    let mut t = vec![vec![0.0f64; total + 1]; m];
    let mut basis = vec![0usize; m];
    let mut slack_idx = n;
    for (r, (row, cmp, rhs)) in lp.rows.iter().enumerate() {
        let mut coeffs = row.clone();
        let mut b = *rhs;
        // normalize to nonnegative rhs
        if b < 0.0 {
            coeffs.iter_mut().for_each(|c| *c = -*c);
            b = -b;
        }
        let cmp = match (cmp, *rhs < 0.0) {
            (Cmp::Le, true) => Cmp::Ge,
            (Cmp::Ge, true) => Cmp::Le,
            (c, _) => *c,
        };
        t[r][..n].copy_from_slice(&coeffs);
        t[r][total] = b;
        match cmp {
            Cmp::Le => {
                t[r][slack_idx] = 1.0;
                basis[r] = slack_idx;
                slack_idx += 1;
            }
            Cmp::Ge => {
                t[r][slack_idx] = -1.0;
                slack_idx += 1;
                t[r][art0 + r] = 1.0;
                basis[r] = art0 + r;
            }
            Cmp::Eq => {
                t[r][art0 + r] = 1.0;
                basis[r] = art0 + r;
            }
        }
    }

    // Phase 1: minimize the artificial sum, expressed as maximizing its
    // negation. Reduced costs over rows whose basic variable is artificial.
    let mut pivots = 0usize;
    loop {
        let mut obj = vec![0.0f64; total + 1];
        for (r, row) in t.iter().enumerate() {
            if basis[r] >= art0 {
                for (c, v) in obj.iter_mut().zip(row.iter()) {
                    *c += v;
                }
            }
        }
        // entering: first non-artificial column with positive reduced cost
        let enter = (0..art0).find(|&c| obj[c] > TOL);
        let Some(enter) = enter else { break };
        let Some(leave) = ratio_test(&t, enter, total) else {
            break; // phase-1 objective bounded by 0; cannot be unbounded
        };
        pivot(&mut t, &mut basis, leave, enter, total);
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(LpError::PivotLimit(MAX_PIVOTS));
        }
    }
    let infeas: f64 = (0..m)
        .filter(|&r| basis[r] >= art0)
        .map(|r| t[r][total])
        .sum();
    if infeas > 1e-7 {
        return Ok(LpOutcome::Infeasible);
    }
    // drive any degenerate artificial out of the basis
    for r in 0..m {
        if basis[r] >= art0 {
            if let Some(c) = (0..art0).find(|&c| t[r][c].abs() > TOL) {
                pivot(&mut t, &mut basis, r, c, total);
            }
            // else: the row is all-zero over real columns; harmless
        }
    }

    // Phase 2: maximize the real objective.
    loop {
        // reduced costs: c_j - c_B B^-1 A_j, computed from the tableau
        let mut best_enter = None;
        for c in 0..art0 {
            if basis.contains(&c) {
                continue;
            }
            let mut reduced = *lp.objective.get(c).unwrap_or(&0.0);
            for (r, row) in t.iter().enumerate() {
                let cb = *lp.objective.get(basis[r]).unwrap_or(&0.0);
                if cb != 0.0 {
                    reduced -= cb * row[c];
                }
            }
            if reduced > TOL {
                best_enter = Some(c); // Bland: lowest index
                break;
            }
        }
        let Some(enter) = best_enter else { break };
        let Some(leave) = ratio_test(&t, enter, total) else {
            return Ok(LpOutcome::Unbounded);
        };
        pivot(&mut t, &mut basis, leave, enter, total);
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(LpError::PivotLimit(MAX_PIVOTS));
        }
    }

    let mut x = vec![0.0f64; n];
    for (r, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = t[r][total].max(0.0);
        }
    }
    let value = lp
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum::<f64>();
    Ok(LpOutcome::Optimal { x, value })
}

/// Leaving row by the minimum-ratio test, ties to the lowest row index
/// (Bland). `None` when the column is nonpositive everywhere (unbounded).
fn ratio_test(t: &[Vec<f64>], enter: usize, total: usize) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (r, row) in t.iter().enumerate() {
        if row[enter] > TOL {
            let ratio = row[total] / row[enter];
            match best {
                None => best = Some((ratio, r)),
                Some((br, _)) if ratio < br - TOL => best = Some((ratio, r)),
                _ => {}
            }
        }
    }
    best.map(|(_, r)| r)
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize, total: usize) {
    let scale = t[row][col];
    for v in t[row].iter_mut() {
        *v /= scale;
    }
    for r in 0..t.len() {
        if r != row {
            let factor = t[r][col];
            if factor != 0.0 {
                for c in 0..=total {
                    t[r][c] -= factor * t[row][c];
                }
            }
        }
    }
    basis[row] = col;
}
