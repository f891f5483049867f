//! Dense minimum-cost assignment (shortest augmenting path Hungarian method).

/// Solves a square or rectangular assignment with `rows <= cols` over a
/// row-major cost matrix. Returns the column assigned to each row.
///
/// Ties are resolved deterministically: rows are inserted in index order and
/// the first column reaching the minimum slack wins.
pub fn solve_rows_le_cols(costs: &[f64], rows: usize, cols: usize) -> Vec<usize> {
    assert!(rows <= cols, "solve_rows_le_cols needs rows <= cols");
    assert_eq!(costs.len(), rows * cols);
    if rows == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    // 1-based potentials; index 0 is the virtual start column
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    let mut minv = vec![inf; cols + 1];
    let mut used = vec![false; cols + 1];

    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            let row = &costs[(i0 - 1) * cols..i0 * cols];
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![usize::MAX; rows];
    for j in 1..=cols {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Minimum-cost matching of `min(rows, cols)` pairs for any shape.
/// Returns `(row, col)` pairs sorted by row.
pub fn solve_full(costs: &[f64], rows: usize, cols: usize) -> Vec<(usize, usize)> {
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    if rows <= cols {
        solve_rows_le_cols(costs, rows, cols).into_iter().enumerate().collect()
    } else {
        let mut t = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                t[c * rows + r] = costs[r * cols + c];
            }
        }
        let mut pairs: Vec<(usize, usize)> = solve_rows_le_cols(&t, cols, rows)
            .into_iter()
            .enumerate()
            .map(|(c, r)| (r, c))
            .collect();
        pairs.sort_unstable();
        pairs
    }
}
