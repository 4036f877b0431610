use std::cmp::Ordering;
use std::fmt;

use super::{Query, RetrievalError, RetrievalIndex};
use crate::Scalar;

/// AP@10 with a single relevant item: `1/rank` inside the top 10, else 0.
pub fn average_precision_at_10(rank_of_target: usize) -> f64 {
    assert!(rank_of_target >= 1, "ranks are 1-based");
    if rank_of_target <= 10 {
        1.0 / rank_of_target as f64
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub map_at_10: f64,
    pub r_at_1: f64,
    pub r_at_5: f64,
    pub r_at_10: f64,
    pub n_queries: usize,
}

impl MetricsReport {
    pub fn to_csv(&self) -> String {
        format!(
            "metric,value\nmap_at_10,{}\nr_at_1,{}\nr_at_5,{}\nr_at_10,{}\nn_queries,{}\n",
            self.map_at_10, self.r_at_1, self.r_at_5, self.r_at_10, self.n_queries
        )
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>8}", "metric", "value")?;
        for (name, v) in [("mAP@10", self.map_at_10), ("R@1", self.r_at_1), ("R@5", self.r_at_5), ("R@10", self.r_at_10)] {
            writeln!(f, "{name:<10} {v:>8.4}")?;
        }
        writeln!(f, "{:<10} {:>8}", "queries", self.n_queries)
    }
}

/// Metrics over 1-based target ranks, summed in the order given.
pub fn metrics_from_ranks(ranks: &[usize]) -> Result<MetricsReport, RetrievalError> {
    if ranks.is_empty() {
        return Err(RetrievalError::NoQueries);
    }
    let n = ranks.len() as f64;
    let mut ap = 0.0;
    let (mut hit1, mut hit5, mut hit10) = (0usize, 0usize, 0usize);
    for &r in ranks {
        ap += average_precision_at_10(r);
        hit1 += usize::from(r <= 1);
        hit5 += usize::from(r <= 5);
        hit10 += usize::from(r <= 10);
    }
    let report = MetricsReport {
        map_at_10: ap / n,
        r_at_1: hit1 as f64 / n,
        r_at_5: hit5 as f64 / n,
        r_at_10: hit10 as f64 / n,
        n_queries: ranks.len(),
    };
    assert!(report.r_at_1 <= report.r_at_5 && report.r_at_5 <= report.r_at_10);
    assert!(report.map_at_10 <= report.r_at_10 + 1e-12);
    Ok(report)
}

/// Metrics plus the target rank of every query, sorted by query id.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub ranks: Vec<(String, usize)>,
}

/// Ranks every query against the index. Queries are processed in
/// ascending id order whatever order they arrive in.
pub fn evaluate<T: Scalar>(queries: &[Query<T>], index: &RetrievalIndex<T>) -> Result<Evaluation, RetrievalError> {
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let mut order: Vec<&Query<T>> = queries.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = order.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(RetrievalError::InvalidInput(format!("duplicate query id `{}`", w[0].id)));
    }
    let mut ranks = Vec::with_capacity(order.len());
    for q in order {
        let target = index
            .position(&q.target)
            .ok_or_else(|| RetrievalError::UnknownTargetId { query: q.id.clone(), target: q.target.clone() })?;
        let scores = index.scores(&q.vector)?;
        let ahead = (0..index.len()).filter(|&i| index.before(&scores, i, target) == Ordering::Less).count();
        ranks.push((q.id.clone(), ahead + 1));
    }
    let only: Vec<usize> = ranks.iter().map(|r| r.1).collect();
    Ok(Evaluation { report: metrics_from_ranks(&only)?, ranks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::rank_query;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision_at_10(1), 1.0);
        assert_eq!(average_precision_at_10(2), 0.5);
        assert_eq!(average_precision_at_10(10), 0.1);
        assert_eq!(average_precision_at_10(11), 0.0);
    }

    #[test]
    fn hand_case() {
        let r = metrics_from_ranks(&[1, 2, 11, 20]).unwrap();
        assert_eq!((r.map_at_10, r.r_at_1, r.r_at_5, r.r_at_10), (0.375, 0.25, 0.5, 0.5));
        assert_eq!(r.to_csv(), "metric,value\nmap_at_10,0.375\nr_at_1,0.25\nr_at_5,0.5\nr_at_10,0.5\nn_queries,4\n");
        assert!(r.to_string().contains("mAP@10       0.3750"));
        assert_eq!(metrics_from_ranks(&[]), Err(RetrievalError::NoQueries));
    }

    fn random_case(seed: u64, m: usize, nq: usize) -> (RetrievalIndex<f64>, Vec<Query<f64>>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<String> = (0..m).map(|i| format!("a{i:03}")).collect();
        let vecs = (0..m).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let index = RetrievalIndex::build(ids.clone(), vecs).unwrap();
        let queries = (0..nq)
            .map(|i| Query {
                id: format!("q{i:03}"),
                target: ids[rng.gen_range(0..m)].clone(),
                vector: (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            })
            .collect();
        (index, queries)
    }

    #[test]
    fn perfect_alignment_scores_one() {
        let (index, _) = random_case(1, 12, 0);
        let queries: Vec<Query<f64>> = index
            .ids()
            .iter()
            .zip(index.vectors())
            .map(|(id, v)| Query { id: format!("q-{id}"), target: id.clone(), vector: v.clone() })
            .collect();
        let r = evaluate(&queries, &index).unwrap().report;
        assert_eq!((r.map_at_10, r.r_at_1, r.r_at_5, r.r_at_10, r.n_queries), (1.0, 1.0, 1.0, 1.0, 12));
    }

    #[test]
    fn counting_rank_agrees_with_full_sort() {
        let (index, queries) = random_case(2, 30, 40);
        let eval = evaluate(&queries, &index).unwrap();
        for (qid, r) in &eval.ranks {
            let q = queries.iter().find(|q| &q.id == qid).unwrap();
            assert_eq!(rank_query(q, &index).unwrap().rank_of_target, *r);
        }
    }

    #[test]
    fn invariant_to_query_and_index_order() {
        let (index, mut queries) = random_case(3, 25, 30);
        let base = evaluate(&queries, &index).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        queries.shuffle(&mut rng);
        let mut pairs: Vec<_> = index.ids().iter().cloned().zip(index.vectors().iter().cloned()).collect();
        pairs.shuffle(&mut rng);
        let (ids, vecs) = pairs.into_iter().unzip();
        let shuffled = RetrievalIndex::build(ids, vecs).unwrap();
        assert_eq!(evaluate(&queries, &shuffled).unwrap(), base);
    }

    #[test]
    fn errors() {
        let (index, mut queries) = random_case(4, 5, 2);
        queries[1].target = "missing".into();
        assert!(matches!(evaluate(&queries, &index), Err(RetrievalError::UnknownTargetId { .. })));
        queries[1] = queries[0].clone();
        assert!(matches!(evaluate(&queries, &index), Err(RetrievalError::InvalidInput(_))));
        assert_eq!(evaluate::<f64>(&[], &index), Err(RetrievalError::NoQueries));
    }
}
