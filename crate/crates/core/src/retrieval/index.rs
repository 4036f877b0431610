use std::cmp::Ordering;
use std::collections::HashMap;

use super::RetrievalError;
use crate::scalar::{dot, l2_norm};
use crate::Scalar;

/// Unit-normalized audio embeddings keyed by clip id. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalIndex<T> {
    ids: Vec<String>,
    vectors: Vec<Vec<T>>,
    dim: usize,
    positions: HashMap<String, usize>,
}

impl<T: Scalar> RetrievalIndex<T> {
    /// Normalizes each vector; ids must be unique and dims equal.
    pub fn build(ids: Vec<String>, vectors: Vec<Vec<T>>) -> Result<Self, RetrievalError> {
        if ids.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        if ids.len() != vectors.len() {
            return Err(RetrievalError::DimMismatch { expected: ids.len(), found: vectors.len() });
        }
        let dim = vectors[0].len();
        let mut positions = HashMap::with_capacity(ids.len());
        let mut units = Vec::with_capacity(ids.len());
        for (i, (id, v)) in ids.iter().zip(vectors).enumerate() {
            if v.len() != dim {
                return Err(RetrievalError::DimMismatch { expected: dim, found: v.len() });
            }
            if positions.insert(id.clone(), i).is_some() {
                return Err(RetrievalError::DuplicateId(id.clone()));
            }
            units.push(unit(&v).ok_or_else(|| RetrievalError::ZeroNorm(id.clone()))?);
        }
        Ok(Self { ids, vectors: units, dim, positions })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &[Vec<T>] {
        &self.vectors
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    /// Cosine of a unit query against every entry, in index order.
    pub(crate) fn scores(&self, query: &[T]) -> Result<Vec<T>, RetrievalError> {
        if query.len() != self.dim {
            return Err(RetrievalError::DimMismatch { expected: self.dim, found: query.len() });
        }
        let q = unit(query).ok_or_else(|| RetrievalError::ZeroNorm("query".into()))?;
        Ok(self.vectors.iter().map(|v| dot(&q, v)).collect())
    }

    /// Ranking order: higher score first, then ascending id.
    pub(crate) fn before(&self, scores: &[T], a: usize, b: usize) -> Ordering {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| self.ids[a].cmp(&self.ids[b]))
    }
}

pub(crate) fn unit<T: Scalar>(v: &[T]) -> Option<Vec<T>> {
    let n = l2_norm(v);
    (n > T::zero() && n.is_finite()).then(|| v.iter().map(|&x| x / n).collect())
}

/// One ranked candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Hit<T> {
    pub id: String,
    pub score: T,
}

/// Full ranking of the index for a query vector.
pub fn rank<T: Scalar>(query: &[T], index: &RetrievalIndex<T>) -> Result<Vec<Hit<T>>, RetrievalError> {
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let scores = index.scores(query)?;
    let mut order: Vec<usize> = (0..index.len()).collect();
    order.sort_by(|&a, &b| index.before(&scores, a, b));
    Ok(order.into_iter().map(|i| Hit { id: index.ids[i].clone(), score: scores[i] }).collect())
}

/// A caption query paired with the clip it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct Query<T> {
    pub id: String,
    pub target: String,
    pub vector: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub query_id: String,
    pub ranked_ids: Vec<String>,
    /// 1-based.
    pub rank_of_target: usize,
}

pub fn rank_query<T: Scalar>(query: &Query<T>, index: &RetrievalIndex<T>) -> Result<QueryResult, RetrievalError> {
    if index.position(&query.target).is_none() {
        return Err(RetrievalError::UnknownTargetId { query: query.id.clone(), target: query.target.clone() });
    }
    let hits = rank(&query.vector, index)?;
    let rank_of_target = 1 + hits.iter().position(|h| h.id == query.target).expect("target is indexed");
    Ok(QueryResult {
        query_id: query.id.clone(),
        ranked_ids: hits.into_iter().map(|h| h.id).collect(),
        rank_of_target,
    })
}
