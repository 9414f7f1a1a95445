//! Mapping predicted hidden states back to tokens: exact flat
//! nearest-neighbor search, a popcount prefilter over bit-packed sign planes
//! for hypercube tables, and greedy / beam decoding on top.

mod beam;

pub use beam::{
    beam_decode, greedy_decode, BeamParams, BeamResult, Hypothesis, LengthNorm, StepModel,
};

use rayon::prelude::*;

use crate::embed::{BitPackedTable, EmbeddingTable, TableKind};
use crate::error::{Error, Result};
use crate::select::{Scored, TopK};
use crate::vecmath::{dot_f32, norm_f32};

/// Flat exact index over a table. Queries scan row shards in parallel and
/// merge deterministically, so results are independent of the shard layout.
/// Hypercube tables additionally carry bit-packed sign planes for the
/// Hamming prefilter.
pub struct NNIndex<'a> {
    table: &'a EmbeddingTable,
    planes: Option<BitPackedTable>,
    n_shards: usize,
}

/// Build an index; sign planes are attached iff the table is a hypercube.
pub fn build_index(table: &EmbeddingTable) -> NNIndex<'_> {
    let planes = (table.kind() == TableKind::Hypercube).then(|| table.bit_planes());
    NNIndex { table, planes, n_shards: rayon::current_num_threads().max(1) }
}

impl<'a> NNIndex<'a> {
    pub fn table(&self) -> &EmbeddingTable {
        self.table
    }

    pub fn has_prefilter(&self) -> bool {
        self.planes.is_some()
    }

    /// Override the shard count (results are unaffected; used by tests).
    pub fn with_shards(mut self, n_shards: usize) -> Self {
        self.n_shards = n_shards.max(1);
        self
    }

    fn normalized_query(&self, h: &[f32]) -> Result<Vec<f32>> {
        if h.len() != self.table.dim() {
            return Err(Error::invalid(format!(
                "query dim {} != table dim {}",
                h.len(),
                self.table.dim()
            )));
        }
        let n = norm_f32(h);
        if n <= 1e-12 {
            return Err(Error::DegenerateHiddenState { norm: n });
        }
        Ok(h.iter().map(|&x| (x as f64 / n) as f32).collect())
    }

    /// Exact top-k by cosine, descending, ties broken by lower token index.
    /// Invariant to positive scaling of `h`.
    pub fn nearest(&self, h: &[f32], k: usize) -> Result<Vec<(usize, f32)>> {
        let n = self.table.len();
        if k == 0 || k > n {
            return Err(Error::invalid(format!("k = {k} outside 1..=|V| = {n}")));
        }
        let q = self.normalized_query(h)?;
        let shard_len = n.div_ceil(self.n_shards);
        let shards: Vec<TopK> = (0..n)
            .into_par_iter()
            .chunks(shard_len)
            .map(|rows| {
                let mut top = TopK::new(k);
                for j in rows {
                    top.push(Scored { token: j as u32, sim: dot_f32(&q, self.table.row(j)) });
                }
                top
            })
            .collect();
        let mut merged = TopK::new(k);
        for s in &shards {
            merged.merge(s);
        }
        Ok(merged
            .into_sorted()
            .into_iter()
            .map(|e| (e.token as usize, e.sim))
            .collect())
    }

    /// Two-stage search: rank all tokens by Hamming distance between the
    /// query's sign pattern and each bit plane (popcount), then exactly
    /// re-rank the best `m` candidates by true cosine. With `m = |V|` the
    /// result equals [`Self::nearest`] exactly.
    pub fn nearest_prefiltered(&self, h: &[f32], k: usize, m: usize) -> Result<Vec<(usize, f32)>> {
        let planes = self.planes.as_ref().ok_or_else(|| {
            Error::UnsupportedIndex(format!(
                "Hamming prefilter requires a hypercube table (kind is {})",
                self.table.kind()
            ))
        })?;
        let n = self.table.len();
        if k == 0 || k > m || m > n {
            return Err(Error::invalid(format!(
                "need 1 <= k <= m <= |V|; got k = {k}, m = {m}, |V| = {n}"
            )));
        }
        let q = self.normalized_query(h)?;
        // Stage 1: counting sort by Hamming distance; scanning tokens in
        // index order keeps the (distance asc, index asc) tie-break.
        let pattern = planes.pack_query(&q);
        let d = self.table.dim();
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); d + 1];
        for j in 0..n {
            buckets[planes.hamming(&pattern, j) as usize].push(j as u32);
        }
        let mut top = TopK::new(k);
        let mut taken = 0usize;
        'outer: for bucket in &buckets {
            for &j in bucket {
                // Stage 2: exact cosine re-rank of the candidates.
                top.push(Scored { token: j, sim: dot_f32(&q, self.table.row(j as usize)) });
                taken += 1;
                if taken == m {
                    break 'outer;
                }
            }
        }
        Ok(top
            .into_sorted()
            .into_iter()
            .map(|e| (e.token as usize, e.sim))
            .collect())
    }
}

/// Recall@1 of the prefilter against exact search over random unit queries.
/// Informational: there is no pinned value, only the m = |V| equality.
pub fn prefilter_recall_at_1(
    index: &NNIndex<'_>,
    m: usize,
    queries: &[Vec<f32>],
) -> Result<f64> {
    let mut hits = 0usize;
    for q in queries {
        let exact = index.nearest(q, 1)?;
        let approx = index.nearest_prefiltered(q, 1, m)?;
        if exact[0].0 == approx[0].0 {
            hits += 1;
        }
    }
    Ok(hits as f64 / queries.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{gen_hypercube, gen_uniform};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_query(rng: &mut ChaCha8Rng, d: usize) -> Vec<f32> {
        (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) as f32).collect()
    }

    /// O(|V|) oracle: full scan + stable sort.
    fn brute_nearest(t: &crate::embed::EmbeddingTable, h: &[f32], k: usize) -> Vec<(usize, f32)> {
        let n = norm_f32(h);
        let q: Vec<f32> = h.iter().map(|&x| (x as f64 / n) as f32).collect();
        let mut all: Vec<(usize, f32)> =
            (0..t.len()).map(|j| (j, dot_f32(&q, t.row(j)))).collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    #[test]
    fn single_row_table_always_answers_that_token() {
        let t = gen_uniform(1, 8, 1).unwrap();
        let idx = build_index(&t);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..5 {
            let q = gaussian_query(&mut rng, 8);
            assert_eq!(idx.nearest(&q, 1).unwrap()[0].0, 0);
        }
    }

    #[test]
    fn self_retrieval_scores_one() {
        let t = gen_uniform(30, 16, 2).unwrap();
        let idx = build_index(&t);
        let got = idx.nearest(t.row(7), 1).unwrap();
        assert_eq!(got[0].0, 7);
        assert!((got[0].1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn matches_brute_force_hand_table() {
        let t = gen_uniform(5, 3, 3).unwrap();
        let idx = build_index(&t);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let q = gaussian_query(&mut rng, 3);
            assert_eq!(idx.nearest(&q, 5).unwrap(), brute_nearest(&t, &q, 5));
        }
    }

    #[test]
    fn scale_invariance_power_of_two() {
        let t = gen_uniform(64, 8, 4).unwrap();
        let idx = build_index(&t);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let q = gaussian_query(&mut rng, 8);
            let doubled: Vec<f32> = q.iter().map(|x| 2.0 * x).collect();
            assert_eq!(idx.nearest(&q, 3).unwrap(), idx.nearest(&doubled, 3).unwrap());
        }
    }

    #[test]
    fn shard_count_does_not_change_results() {
        let t = gen_uniform(501, 16, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let queries: Vec<Vec<f32>> = (0..10).map(|_| gaussian_query(&mut rng, 16)).collect();
        let reference: Vec<_> = {
            let idx = build_index(&t).with_shards(1);
            queries.iter().map(|q| idx.nearest(q, 7).unwrap()).collect()
        };
        for shards in [2, 8] {
            let idx = build_index(&t).with_shards(shards);
            for (q, expect) in queries.iter().zip(&reference) {
                assert_eq!(&idx.nearest(q, 7).unwrap(), expect);
            }
        }
    }

    #[test]
    fn degenerate_query_and_bad_k() {
        let t = gen_uniform(10, 8, 6).unwrap();
        let idx = build_index(&t);
        assert!(matches!(
            idx.nearest(&[0.0; 8], 1),
            Err(Error::DegenerateHiddenState { .. })
        ));
        assert!(idx.nearest(t.row(0), 11).is_err());
        assert!(idx.nearest(t.row(0), 0).is_err());
    }

    #[test]
    fn prefilter_only_for_hypercube() {
        let t = gen_uniform(10, 8, 7).unwrap();
        let idx = build_index(&t);
        assert!(!idx.has_prefilter());
        assert!(matches!(
            idx.nearest_prefiltered(t.row(0), 1, 5),
            Err(Error::UnsupportedIndex(_))
        ));
        let (hc, _) = gen_hypercube(10, 8, 7).unwrap();
        assert!(build_index(&hc).has_prefilter());
    }

    #[test]
    fn prefilter_with_full_candidates_equals_exact() {
        let (t, _) = gen_hypercube(400, 32, 8).unwrap();
        let idx = build_index(&t);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let q = gaussian_query(&mut rng, 32);
            assert_eq!(
                idx.nearest_prefiltered(&q, 5, t.len()).unwrap(),
                idx.nearest(&q, 5).unwrap()
            );
        }
    }

    #[test]
    fn exact_hypercube_query_survives_any_m() {
        // a query equal to a row has Hamming distance 0 only to that row
        // (distinct rows differ in >= 1 sign)
        let (t, planes) = gen_hypercube(200, 16, 9).unwrap();
        let idx = build_index(&t);
        for probe in [0usize, 17, 199] {
            let q = t.row(probe).to_vec();
            // oracle: no other row shares the bit pattern
            let pattern = planes.pack_query(&q);
            for j in 0..t.len() {
                if j != probe {
                    assert!(planes.hamming(&pattern, j) >= 1);
                }
            }
            for m in [1usize, 2, 50] {
                let got = idx.nearest_prefiltered(&q, 1, m).unwrap();
                assert_eq!(got[0].0, probe);
                assert!((got[0].1 - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn prefilter_recall_is_measurable() {
        let (t, _) = gen_hypercube(500, 32, 10).unwrap();
        let idx = build_index(&t);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let queries: Vec<Vec<f32>> = (0..50).map(|_| gaussian_query(&mut rng, 32)).collect();
        let recall = prefilter_recall_at_1(&idx, 64, &queries).unwrap();
        assert!((0.0..=1.0).contains(&recall));
        let full = prefilter_recall_at_1(&idx, t.len(), &queries).unwrap();
        assert_eq!(full, 1.0);
    }

    #[test]
    fn rebuild_gives_identical_results() {
        let t = gen_uniform(100, 8, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let q = gaussian_query(&mut rng, 8);
        let a = build_index(&t).nearest(&q, 10).unwrap();
        let b = build_index(&t).nearest(&q, 10).unwrap();
        assert_eq!(a, b);
    }
}
