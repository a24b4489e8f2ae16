use crate::error::{Error, Result};

/// Euclidean projection of `y` onto `{x ≥ 0, Σx = s}` (sort-and-threshold).
pub fn project_simplex(y: &[f64], s: f64) -> Result<Vec<f64>> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "simplex scale must be positive, got {s}"
        )));
    }
    if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(pos));
    }
    let mut out = vec![0.0; y.len()];
    let mut scratch = Vec::with_capacity(y.len());
    project_into(y, s, &mut scratch, &mut out);
    Ok(out)
}

pub(crate) fn project_into(y: &[f64], s: f64, scratch: &mut Vec<f64>, out: &mut [f64]) {
    if y.is_empty() {
        return;
    }
    scratch.clear();
    scratch.extend_from_slice(y);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &u) in scratch.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - s) / (j + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    for (o, &v) in out.iter_mut().zip(y) {
        *o = (v - tau).max(0.0);
    }
}
