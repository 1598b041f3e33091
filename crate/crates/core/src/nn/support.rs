//! Top-k support sets and hard-thresholding projection.

use std::cmp::Ordering;

use super::NnError;

/// Larger magnitude first, lower index first among equal magnitudes.
fn by_magnitude(y: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| y[b].abs().total_cmp(&y[a].abs()).then(a.cmp(&b))
}

/// `supp_k(y)`: indices of the `k` largest-magnitude entries in ascending
/// index order. Returns every index when `k >= y.len()`.
pub fn support(y: &[f64], k: usize) -> Result<Vec<usize>, NnError> {
    if k == 0 {
        return Err(NnError::NonpositiveK);
    }
    let mut idx: Vec<usize> = (0..y.len()).collect();
    if k < y.len() {
        idx.select_nth_unstable_by(k - 1, by_magnitude(y));
        idx.truncate(k);
        idx.sort_unstable();
    }
    Ok(idx)
}

/// Zeroes every entry outside `supp_k(y)`.
pub fn project_support(y: &[f64], k: usize) -> Result<Vec<f64>, NnError> {
    let mut out = y.to_vec();
    project_support_in_place(&mut out, k)?;
    Ok(out)
}

pub fn project_support_in_place(y: &mut [f64], k: usize) -> Result<(), NnError> {
    if k == 0 {
        return Err(NnError::NonpositiveK);
    }
    if k >= y.len() {
        return Ok(());
    }
    let keep = support(y, k)?;
    let mut next = keep.iter().peekable();
    for (i, v) in y.iter_mut().enumerate() {
        if next.peek() == Some(&&i) {
            next.next();
        } else {
            *v = 0.0;
        }
    }
    Ok(())
}
