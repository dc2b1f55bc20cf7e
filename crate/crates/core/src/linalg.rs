// Dense linear algebra over GF(q) on row vectors.

use crate::field::{FieldCtx, FieldElem};

pub(crate) type Row = Vec<FieldElem>;

/// Brings `rows` into reduced row-echelon form in place, drops zero rows and
/// returns the pivot columns.
pub(crate) fn rref(f: &FieldCtx, rows: &mut Vec<Row>) -> Vec<usize> {
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut pivots = vec![];
    let mut r = 0;
    for c in 0..ncols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = f.inv(rows[r][c]).expect("nonzero pivot");
        if inv != FieldElem::ONE {
            for x in rows[r].iter_mut() {
                *x = f.mul(*x, inv);
            }
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let factor = row[c];
            for (x, &y) in row.iter_mut().zip(&pivot_row).skip(c) {
                *x = f.sub(*x, f.mul(factor, y));
            }
        }
        pivots.push(c);
        r += 1;
    }
    rows.truncate(r);
    pivots
}

/// Subtracts multiples of the RREF `rows` so that `v` vanishes on `pivots`.
pub(crate) fn reduce(f: &FieldCtx, v: &mut [FieldElem], rows: &[Row], pivots: &[usize]) {
    for (row, &p) in rows.iter().zip(pivots) {
        let c = v[p];
        if c.is_zero() {
            continue;
        }
        for (x, &y) in v.iter_mut().zip(row) {
            *x = f.sub(*x, f.mul(c, y));
        }
    }
}

/// Solves `x * A = b` for a row vector `x`, where `A` has `rows.len()` rows.
/// Returns a particular solution and a basis of the left null space, or
/// `None` when the system is inconsistent.
pub(crate) fn solve_left(f: &FieldCtx, rows: &[Row], b: &[FieldElem]) -> Option<(Row, Vec<Row>)> {
    let n = rows.len();
    let ncols = b.len();
    // Transpose into column equations: for each column c, sum_i x_i A[i][c] = b[c].
    let mut eqs: Vec<Row> = (0..ncols)
        .map(|c| {
            let mut e: Row = rows.iter().map(|r| r[c]).collect();
            e.push(b[c]);
            e
        })
        .collect();
    if eqs.is_empty() {
        return Some((vec![FieldElem::ZERO; n], identity(n)));
    }
    let pivots = rref(f, &mut eqs);
    if pivots.last() == Some(&n) {
        return None;
    }
    let mut x = vec![FieldElem::ZERO; n];
    for (row, &p) in eqs.iter().zip(&pivots) {
        x[p] = row[n];
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    let null = free
        .iter()
        .map(|&fc| {
            let mut v = vec![FieldElem::ZERO; n];
            v[fc] = FieldElem::ONE;
            for (row, &p) in eqs.iter().zip(&pivots) {
                v[p] = f.neg(row[fc]);
            }
            v
        })
        .collect();
    Some((x, null))
}

pub(crate) fn identity(n: usize) -> Vec<Row> {
    (0..n)
        .map(|i| {
            let mut r = vec![FieldElem::ZERO; n];
            r[i] = FieldElem::ONE;
            r
        })
        .collect()
}

/// `sum_i coeffs[i] * rows[i]`.
pub(crate) fn combine(f: &FieldCtx, coeffs: &[FieldElem], rows: &[Row], len: usize) -> Row {
    let mut out = vec![FieldElem::ZERO; len];
    for (&c, row) in coeffs.iter().zip(rows) {
        if c.is_zero() {
            continue;
        }
        for (o, &y) in out.iter_mut().zip(row) {
            *o = f.add(*o, f.mul(c, y));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[u16]) -> Row {
        xs.iter().map(|&x| FieldElem(x)).collect()
    }

    #[test]
    fn rref_basic() {
        let f = FieldCtx::prime(5).unwrap();
        let mut rows = vec![v(&[0, 2, 4]), v(&[1, 1, 1]), v(&[1, 3, 0])];
        let piv = rref(&f, &mut rows);
        assert_eq!(piv, vec![0, 1]);
        assert_eq!(rows, vec![v(&[1, 0, 4]), v(&[0, 1, 2])]);
    }

    #[test]
    fn solve_left_roundtrip() {
        let f = FieldCtx::prime(7).unwrap();
        let rows = vec![v(&[1, 2, 3, 0]), v(&[0, 1, 5, 6]), v(&[1, 3, 1, 6])];
        let x = v(&[3, 4, 0]);
        let b = combine(&f, &x, &rows, 4);
        let (sol, null) = solve_left(&f, &rows, &b).unwrap();
        assert_eq!(combine(&f, &sol, &rows, 4), b);
        assert_eq!(null.len(), 1);
        assert!(combine(&f, &null[0], &rows, 4).iter().all(|e| e.is_zero()));
        assert!(solve_left(&f, &rows[..1], &v(&[0, 0, 0, 1])).is_none());
    }
}
