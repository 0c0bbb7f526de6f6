use super::{is_tie, LowerTail, PwlYcvar};

/// Maximizer of the interpolated CVaR envelope problem.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeSolution {
    pub value: f64,
    /// One density factor per successor, in input order.
    pub xi: Vec<f64>,
}

/// Solves
///
/// ```text
/// max  sum_j p_j g_j(y xi_j) / y
/// s.t. 0 <= xi_j <= 1/y,  sum_j p_j xi_j = 1
/// ```
///
/// for concave piecewise-linear `g_j`. With `u_j = y xi_j` the budget is
/// `sum_j p_j u_j = y` and the objective is separable, so filling the steepest
/// remaining segments first is optimal. Segments whose slopes tie (see
/// [`is_tie`]) are filled together, each receiving the same fraction of its
/// mass, so equal quantile levels of different successors are treated alike.
pub fn maximize_risk_envelope(
    y: f64,
    successors: &[(f64, &PwlYcvar)],
    tail: LowerTail,
) -> EnvelopeSolution {
    debug_assert!(y > 0.0 && y <= 1.0);
    let pieces: Vec<Vec<(f64, f64)>> = successors
        .iter()
        .map(|(_, g)| g.pieces(tail).collect())
        .collect();
    let mut cursor = vec![0usize; successors.len()];
    let mut u = vec![0.0f64; successors.len()];

    let mut objective: f64 = successors
        .iter()
        .map(|(p, g)| p * g.origin_value(tail))
        .sum();
    let mut budget = y;
    // (successor, end cursor, length, mass-weighted slope integral) per tied group member
    let mut group: Vec<(usize, usize, f64, f64)> = Vec::with_capacity(successors.len());
    while budget > 0.0 {
        let top = pieces
            .iter()
            .zip(&cursor)
            .filter_map(|(segs, &c)| segs.get(c).map(|s| s.1))
            .fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            break;
        }
        group.clear();
        let mut room = 0.0;
        let mut gain = 0.0;
        for (j, segs) in pieces.iter().enumerate() {
            let p = successors[j].0;
            let mut end = cursor[j];
            let (mut len, mut area) = (0.0, 0.0);
            while let Some(&(l, slope)) = segs.get(end) {
                if !is_tie(slope, top) {
                    break;
                }
                len += l;
                area += l * slope;
                end += 1;
            }
            if end > cursor[j] {
                group.push((j, end, len, area));
                room += p * len;
                gain += p * area;
            }
        }
        if room <= budget {
            for &(j, end, len, _) in &group {
                u[j] += len;
                cursor[j] = end;
            }
            objective += gain;
            budget -= room;
        } else {
            let theta = budget / room;
            for &(j, _, len, _) in &group {
                u[j] += theta * len;
            }
            objective += theta * gain;
            budget = 0.0;
        }
    }

    let xi = u.iter().map(|&uj| uj.min(1.0) / y).collect();
    EnvelopeSolution {
        value: objective / y,
        xi,
    }
}
