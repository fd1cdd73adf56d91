//! Central-difference verification of analytic parameter gradients.

use super::Parameter;
use crate::rng::{tag, Stream};

/// Outcome of one gradient check.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub max_rel_err: f64,
    pub n_checked: usize,
    pub tol: f64,
    /// The coordinate with the largest relative error, for diagnosis.
    pub worst: Option<WorstCoord>,
}

#[derive(Debug, Clone)]
pub struct WorstCoord {
    pub param: String,
    pub index: usize,
    pub numeric: f64,
    pub analytic: f64,
}

impl GradReport {
    pub fn pass(&self) -> bool {
        self.n_checked > 0 && self.max_rel_err <= self.tol
    }
}

/// Compare analytic gradients against central differences.
///
/// `grad_fn` must run one forward/backward pass and leave gradients in the
/// parameters; `loss_fn` must recompute the same scalar loss; `params_fn`
/// hands out the parameter set (borrowed briefly, many times). When the
/// model has more than `max_coords` scalar parameters, a seeded subsample
/// of exactly `max_coords` distinct coordinates is checked.
///
/// Relative error per coordinate is |numeric - analytic| divided by
/// max(|numeric| + |analytic|, 1e-8).
pub fn grad_check<M, L, G, P>(
    model: &mut M,
    mut loss_fn: L,
    mut grad_fn: G,
    mut params_fn: P,
    h: f64,
    tol: f64,
    max_coords: usize,
    seed: u64,
) -> GradReport
where
    L: FnMut(&mut M) -> f64,
    G: FnMut(&mut M),
    P: for<'a> FnMut(&'a mut M) -> Vec<&'a mut Parameter>,
{
    assert!(h > 0.0 && tol > 0.0 && max_coords > 0);
    for p in params_fn(model) {
        p.zero_grad();
    }
    grad_fn(model);
    let (names, analytic): (Vec<String>, Vec<Vec<f64>>) = {
        let ps = params_fn(model);
        (
            ps.iter().map(|p| p.name.clone()).collect(),
            ps.iter().map(|p| p.grad.data.clone()).collect(),
        )
    };
    let sizes: Vec<usize> = analytic.iter().map(Vec::len).collect();
    let n_total: usize = sizes.iter().sum();
    assert!(n_total > 0, "model has no parameters to check");

    let picks: Vec<usize> = if n_total <= max_coords {
        (0..n_total).collect()
    } else {
        let mut rng = Stream::new(seed, &[tag::GRAD_CHECK]);
        let mut idx: Vec<usize> = (0..n_total).collect();
        for i in 0..max_coords {
            let j = i + rng.below((n_total - i) as u64) as usize;
            idx.swap(i, j);
        }
        idx.truncate(max_coords);
        idx.sort_unstable();
        idx
    };

    let locate = |flat: usize| -> (usize, usize) {
        let mut rest = flat;
        for (pi, &sz) in sizes.iter().enumerate() {
            if rest < sz {
                return (pi, rest);
            }
            rest -= sz;
        }
        unreachable!("coordinate {flat} beyond {n_total} parameters")
    };

    let mut report = GradReport { max_rel_err: 0.0, n_checked: 0, tol, worst: None };
    for &flat in &picks {
        let (pi, li) = locate(flat);
        let orig = params_fn(model)[pi].value.data[li];
        params_fn(model)[pi].value.data[li] = orig + h;
        let loss_plus = loss_fn(model);
        params_fn(model)[pi].value.data[li] = orig - h;
        let loss_minus = loss_fn(model);
        params_fn(model)[pi].value.data[li] = orig;
        let numeric = (loss_plus - loss_minus) / (2.0 * h);
        let ana = analytic[pi][li];
        let rel = (numeric - ana).abs() / (numeric.abs() + ana.abs()).max(1e-8);
        if rel > report.max_rel_err || report.worst.is_none() {
            report.max_rel_err = rel.max(report.max_rel_err);
            report.worst = Some(WorstCoord { param: names[pi].clone(), index: li, numeric, analytic: ana });
        }
        report.n_checked += 1;
    }
    report
}
