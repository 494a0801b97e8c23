//! Reverse Cuthill–McKee ordering for envelope reduction.

use std::collections::VecDeque;

use super::SparseSym;

/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseSym) -> Vec<usize> {
    let n = a.dim();
    let adjacency: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let (cols, vals) = a.row(i);
            cols.iter().zip(vals).filter(|(c, v)| **c != i && **v != 0.0).map(|(c, _)| *c).collect()
        })
        .collect();
    let degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adjacency, &degree);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            order.push(node);
            let mut next: Vec<usize> = adjacency[node].iter().copied().filter(|&m| !visited[m]).collect();
            next.sort_by_key(|&m| (degree[m], m));
            for m in next {
                visited[m] = true;
                queue.push_back(m);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(start: usize, adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut seen = std::collections::HashSet::from([start]);
    let mut levels = vec![vec![start]];
    loop {
        let mut next = Vec::new();
        for &v in levels.last().expect("non-empty") {
            for &m in &adjacency[v] {
                if seen.insert(m) {
                    next.push(m);
                }
            }
        }
        if next.is_empty() {
            return levels;
        }
        levels.push(next);
    }
}

// George–Liu heuristic: walk to the far end of the level structure until its depth stops growing.
fn pseudo_peripheral(seed: usize, adjacency: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut current = seed;
    let mut depth = bfs_levels(current, adjacency).len();
    for _ in 0..8 {
        let levels = bfs_levels(current, adjacency);
        let candidate = *levels
            .last()
            .expect("non-empty")
            .iter()
            .min_by_key(|&&v| (degree[v], v))
            .expect("non-empty level");
        let candidate_depth = bfs_levels(candidate, adjacency).len();
        if candidate_depth <= depth {
            break;
        }
        depth = candidate_depth;
        current = candidate;
    }
    current
}
