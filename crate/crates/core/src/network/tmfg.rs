use super::NetworkError;

/// How pair weights are turned into TMFG scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Score {
    Absolute,
    Signed,
}

impl Score {
    fn apply(self, w: f64) -> f64 {
        match self {
            Score::Absolute => w.abs(),
            Score::Signed => w,
        }
    }
}

/// Triangulated maximally filtered graph over a symmetric weight matrix.
///
/// Seeds with the 4-clique of maximal total score (exhaustive over all
/// 4-subsets), then repeatedly inserts the (vertex, face) pair with maximal
/// gain into a triangular face. Returns `3(N-2)` undirected edges as
/// `(low, high)` pairs in insertion order. Ties go to the lowest vertex and
/// then the earliest face. `N = 3` returns the triangle.
pub fn tmfg_filter(weights: &[Vec<f64>], score: Score) -> Result<Vec<(usize, usize)>, NetworkError> {
    let n = weights.len();
    if n < 3 {
        return Err(NetworkError::TooFewNodes(n));
    }
    if weights.iter().any(|row| row.len() != n) {
        return Err(NetworkError::DegenerateInput("weight matrix is not square".into()));
    }
    if weights.iter().flatten().any(|w| !w.is_finite()) {
        return Err(NetworkError::DegenerateInput("non-finite weight".into()));
    }
    let s = |i: usize, j: usize| score.apply(weights[i][j]);
    let pair = |i: usize, j: usize| (i.min(j), i.max(j));

    if n == 3 {
        return Ok(vec![(0, 1), (0, 2), (1, 2)]);
    }

    let mut best: Option<(f64, [usize; 4])> = None;
    for a in 0..n {
        for b in (a + 1)..n {
            let ab = s(a, b);
            for c in (b + 1)..n {
                let abc = ab + s(a, c) + s(b, c);
                for d in (c + 1)..n {
                    let total = abc + s(a, d) + s(b, d) + s(c, d);
                    if best.is_none_or(|(t, _)| total > t) {
                        best = Some((total, [a, b, c, d]));
                    }
                }
            }
        }
    }
    let [a, b, c, d] = best.expect("n >= 4").1;

    let mut edges = vec![pair(a, b), pair(a, c), pair(a, d), pair(b, c), pair(b, d), pair(c, d)];
    let mut faces: Vec<[usize; 3]> = vec![[a, b, c], [a, b, d], [a, c, d], [b, c, d]];
    let mut placed = vec![false; n];
    for v in [a, b, c, d] {
        placed[v] = true;
    }

    for _ in 4..n {
        let mut choice: Option<(f64, usize, usize)> = None;
        for v in (0..n).filter(|&v| !placed[v]) {
            for (f, face) in faces.iter().enumerate() {
                let gain = s(v, face[0]) + s(v, face[1]) + s(v, face[2]);
                if choice.is_none_or(|(g, _, _)| gain > g) {
                    choice = Some((gain, v, f));
                }
            }
        }
        let (_, v, f) = choice.expect("unplaced vertex remains");
        let [x, y, z] = faces[f];
        edges.extend([pair(v, x), pair(v, y), pair(v, z)]);
        faces[f] = [x, y, v];
        faces.push([y, z, v]);
        faces.push([x, z, v]);
        placed[v] = true;
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        assert_eq!(tmfg_filter(&[vec![1.0, 0.5], vec![0.5, 1.0]], Score::Absolute), Err(NetworkError::TooFewNodes(2)));
        let w3 = vec![vec![1.0, 0.1, 0.2], vec![0.1, 1.0, 0.3], vec![0.2, 0.3, 1.0]];
        assert_eq!(tmfg_filter(&w3, Score::Absolute).unwrap().len(), 3);
        let w4 = vec![
            vec![1.0, 0.1, -0.9, 0.2],
            vec![0.1, 1.0, 0.3, 0.4],
            vec![-0.9, 0.3, 1.0, 0.5],
            vec![0.2, 0.4, 0.5, 1.0],
        ];
        let mut e = tmfg_filter(&w4, Score::Absolute).unwrap();
        e.sort();
        assert_eq!(e, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn signed_and_absolute_scores_differ() {
        // vertex 4 attaches strongly-negatively to 0 under absolute scoring only
        let mut w = vec![vec![0.0; 5]; 5];
        let set = |w: &mut Vec<Vec<f64>>, i: usize, j: usize, v: f64| {
            w[i][j] = v;
            w[j][i] = v;
        };
        for i in 0..4 {
            for j in (i + 1)..4 {
                set(&mut w, i, j, 0.5);
            }
        }
        set(&mut w, 4, 0, -0.95);
        set(&mut w, 4, 1, 0.1);
        set(&mut w, 4, 2, 0.2);
        set(&mut w, 4, 3, 0.3);
        let abs = tmfg_filter(&w, Score::Absolute).unwrap();
        let signed = tmfg_filter(&w, Score::Signed).unwrap();
        assert!(abs.contains(&(0, 4)));
        assert!(!signed.contains(&(0, 4)));
    }
}
