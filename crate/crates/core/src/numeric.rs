//! Small shared numerical kernels: simplex projection, dense linear
//! solves, deterministic random simplex points.

use rand::Rng;

/// Euclidean projection onto the probability simplex.
///
/// Sort-based algorithm; exact up to floating round-off, O(n log n).
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    debug_assert!(n > 0);
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut rho = 0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            rho = i + 1;
            theta = t;
        }
    }
    debug_assert!(rho > 0);
    let _ = rho;
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when the system is numerically singular.
pub(crate) fn solve_linear(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let (pivot, pval) = (col..n)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())?;
        if pval < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = m[r][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..=n {
                let delta = factor * m[col][c];
                m[r][c] -= delta;
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// Outcome of a small dense linear program.
#[derive(Debug, Clone)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    /// No feasible point; carries the phase-1 infeasibility measure,
    /// which decreases toward zero as constraints become satisfiable.
    Infeasible { measure: f64 },
}

/// Minimizes `c . x` subject to `a . x = b` (eq rows), `a . x <= b`
/// (ub rows), and `x >= 0`, by a dense two-phase simplex method with
/// Bland's rule. Built for the tiny weight polytopes of the bound solver:
/// a handful of variables and rows.
pub(crate) fn solve_lp(
    c: &[f64],
    eq: &[(Vec<f64>, f64)],
    ub: &[(Vec<f64>, f64)],
) -> LpOutcome {
    let n = c.len();
    let m = eq.len() + ub.len();

    // Row records: coefficients, rhs >= 0 after sign normalization, and
    // whether the row needs a slack (+1), a surplus (-1), or nothing (0).
    struct Row {
        a: Vec<f64>,
        b: f64,
        slack_sign: f64,
        needs_artificial: bool,
    }
    let mut rows: Vec<Row> = Vec::with_capacity(m);
    for (a, b) in ub {
        let (mut a, mut b) = (a.clone(), *b);
        let mut slack_sign = 1.0;
        if b < 0.0 {
            for x in &mut a {
                *x = -*x;
            }
            b = -b;
            slack_sign = -1.0;
        }
        let needs_artificial = slack_sign < 0.0;
        rows.push(Row {
            a,
            b,
            slack_sign,
            needs_artificial,
        });
    }
    for (a, b) in eq {
        let (mut a, mut b) = (a.clone(), *b);
        if b < 0.0 {
            for x in &mut a {
                *x = -*x;
            }
            b = -b;
        }
        rows.push(Row {
            a,
            b,
            slack_sign: 0.0,
            needs_artificial: true,
        });
    }

    let n_slack = rows.iter().filter(|r| r.slack_sign != 0.0).count();
    let n_art = rows.iter().filter(|r| r.needs_artificial).count();
    let width = n + n_slack + n_art + 1;
    let mut t = vec![vec![0.0; width]; m];
    let mut basis = vec![0usize; m];
    let mut slack_col = n;
    let mut art_col = n + n_slack;
    for (r, row) in rows.iter().enumerate() {
        t[r][..n].copy_from_slice(&row.a);
        t[r][width - 1] = row.b;
        if row.slack_sign != 0.0 {
            t[r][slack_col] = row.slack_sign;
            if !row.needs_artificial {
                basis[r] = slack_col;
            }
            slack_col += 1;
        }
        if row.needs_artificial {
            t[r][art_col] = 1.0;
            basis[r] = art_col;
            art_col += 1;
        }
    }

    let total_cols = width - 1;
    let pivot = |t: &mut Vec<Vec<f64>>, obj: &mut Vec<f64>, basis: &mut Vec<usize>, r: usize, j: usize| {
        let p = t[r][j];
        for x in t[r].iter_mut() {
            *x /= p;
        }
        for i in 0..t.len() {
            if i == r {
                continue;
            }
            let f = t[i][j];
            if f != 0.0 {
                for cidx in 0..t[i].len() {
                    let delta = f * t[r][cidx];
                    t[i][cidx] -= delta;
                }
            }
        }
        let f = obj[j];
        if f != 0.0 {
            for cidx in 0..obj.len() {
                let delta = f * t[r][cidx];
                obj[cidx] -= delta;
            }
        }
        basis[r] = j;
    };

    let run_simplex = |t: &mut Vec<Vec<f64>>,
                       obj: &mut Vec<f64>,
                       basis: &mut Vec<usize>,
                       allowed: &dyn Fn(usize) -> bool|
     -> bool {
        for _ in 0..50_000 {
            let Some(enter) = (0..total_cols).find(|&j| allowed(j) && obj[j] < -1e-11) else {
                return true;
            };
            let mut leave: Option<usize> = None;
            let mut best = f64::INFINITY;
            for r in 0..t.len() {
                if t[r][enter] > 1e-11 {
                    let ratio = t[r][width - 1] / t[r][enter];
                    let better = ratio < best - 1e-13
                        || ((ratio - best).abs() <= 1e-13
                            && leave.map(|l| basis[r] < basis[l]).unwrap_or(true));
                    if better {
                        best = ratio;
                        leave = Some(r);
                    }
                }
            }
            let Some(leave) = leave else {
                return false; // unbounded
            };
            pivot(t, obj, basis, leave, enter);
        }
        false
    };

    // Phase 1: minimize the sum of artificials.
    if n_art > 0 {
        let mut obj = vec![0.0; width];
        for j in n + n_slack..n + n_slack + n_art {
            obj[j] = 1.0;
        }
        // Express in terms of the artificial basis.
        for (r, &b) in basis.iter().enumerate() {
            if b >= n + n_slack {
                for cidx in 0..width {
                    obj[cidx] -= t[r][cidx];
                }
            }
        }
        run_simplex(&mut t, &mut obj, &mut basis, &|_| true);
        let infeas = -obj[width - 1];
        if infeas > 1e-9 {
            return LpOutcome::Infeasible { measure: infeas };
        }
    }

    // Phase 2: original costs, artificials barred from entering.
    let art_range = (n + n_slack)..(n + n_slack + n_art);
    let mut obj = vec![0.0; width];
    obj[..n].copy_from_slice(c);
    for (r, &b) in basis.iter().enumerate() {
        if obj[b] != 0.0 {
            let f = obj[b];
            for cidx in 0..width {
                obj[cidx] -= f * t[r][cidx];
            }
            // Restore the basic column's zero exactly.
            obj[b] = 0.0;
        }
    }
    let allowed = |j: usize| !art_range.contains(&j);
    if !run_simplex(&mut t, &mut obj, &mut basis, &allowed) {
        return LpOutcome::Infeasible {
            measure: f64::INFINITY,
        };
    }

    let mut x = vec![0.0; n];
    for (r, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = t[r][width - 1].max(0.0);
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpOutcome::Optimal { x, objective }
}

/// Uniform random point of the probability simplex (normalized
/// exponentials).
pub(crate) fn random_simplex_point(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln().max(1e-12))
        .collect();
    let s: f64 = v.iter().sum();
    for x in &mut v {
        *x /= s;
    }
    v
}
