//! Dominance, non-dominated sorting, crowding distance and 2-D hypervolume.
//! All objectives are minimized.

use crate::evaluation::Fitness;

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &Fitness, b: &Fitness) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// Partition `points` into successive non-dominated fronts. Indices inside
/// each front are ascending.
pub fn fast_nondominated_sort(points: &[Fitness]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&points[i], &points[j]) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of each member of one front.
///
/// Per objective, members are ordered by value (ties by position), the two
/// extremes get `+inf` and interior members add the normalized gap between
/// their neighbours. An objective with zero range adds nothing.
pub fn crowding_distance(front: &[Fitness]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for m in 0..2 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| front[i][m].total_cmp(&front[j][m]).then(i.cmp(&j)));
        let lo = front[order[0]][m];
        let hi = front[order[n - 1]][m];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for k in 1..n - 1 {
            let i = order[k];
            if dist[i].is_finite() {
                dist[i] += (front[order[k + 1]][m] - front[order[k - 1]][m]) / range;
            }
        }
    }
    dist
}

/// Indices of the non-dominated points, keeping only the first of any group
/// with identical fitness, sorted by the first objective (then the second).
pub fn pareto_indices(points: &[Fitness]) -> Vec<usize> {
    let mut keep: Vec<usize> = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate() {
            if dominates(q, p) || (j < i && q == p) {
                continue 'outer;
            }
        }
        keep.push(i);
    }
    keep.sort_by(|&i, &j| {
        points[i][0]
            .total_cmp(&points[j][0])
            .then(points[i][1].total_cmp(&points[j][1]))
            .then(i.cmp(&j))
    });
    keep
}

/// Area dominated by `points` and bounded by `reference`. Points that do not
/// strictly dominate the reference contribute nothing.
pub fn hypervolume_2d(points: &[Fitness], reference: Fitness) -> f64 {
    let inside: Vec<Fitness> = points
        .iter()
        .filter(|p| p[0] < reference[0] && p[1] < reference[1])
        .copied()
        .collect();
    let front: Vec<Fitness> = pareto_indices(&inside).into_iter().map(|i| inside[i]).collect();
    let mut area = 0.0;
    for (k, p) in front.iter().enumerate() {
        let right = front.get(k + 1).map_or(reference[0], |q| q[0]);
        area += (right - p[0]) * (reference[1] - p[1]);
    }
    area
}
