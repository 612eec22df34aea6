use std::collections::HashMap;
use std::sync::RwLock;

use super::{MaskedQuery, OracleError, SequenceOracle, Slot};

type Key = (Vec<Slot>, usize, String);

/// Caches answers of an inner oracle by (query, candidate).
///
/// Errors are not cached, so a transient remote failure can be retried.
pub struct Memoized<O> {
    inner: O,
    cache: RwLock<HashMap<Key, f64>>,
}

impl<O: SequenceOracle> Memoized<O> {
    pub fn new(inner: O) -> Self {
        Memoized {
            inner,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.read().expect("cache lock poisoned").len()
    }

    fn key(query: &MaskedQuery, token: &str) -> Key {
        (query.slots().to_vec(), query.target(), token.to_string())
    }
}

impl<O: SequenceOracle> SequenceOracle for Memoized<O> {
    fn masked_logprob(&self, query: &MaskedQuery, token: &str) -> Result<f64, OracleError> {
        let key = Self::key(query, token);
        if let Some(&v) = self.cache.read().expect("cache lock poisoned").get(&key) {
            return Ok(v);
        }
        let v = self.inner.masked_logprob(query, token)?;
        self.cache.write().expect("cache lock poisoned").insert(key, v);
        Ok(v)
    }

    fn masked_logprobs(
        &self,
        query: &MaskedQuery,
        candidates: &[String],
    ) -> Result<Vec<f64>, OracleError> {
        let mut out = vec![f64::NAN; candidates.len()];
        let mut missing = Vec::new();
        {
            let cache = self.cache.read().expect("cache lock poisoned");
            for (i, c) in candidates.iter().enumerate() {
                match cache.get(&Self::key(query, c)) {
                    Some(&v) => out[i] = v,
                    None => missing.push(i),
                }
            }
        }
        if !missing.is_empty() {
            let ask: Vec<String> = missing.iter().map(|&i| candidates[i].clone()).collect();
            let answers = self.inner.masked_logprobs(query, &ask)?;
            let mut cache = self.cache.write().expect("cache lock poisoned");
            for (&i, v) in missing.iter().zip(answers) {
                cache.insert(Self::key(query, &candidates[i]), v);
                out[i] = v;
            }
        }
        Ok(out)
    }

    fn vocabulary(&self) -> Option<Vec<String>> {
        self.inner.vocabulary()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{sequence_score, TokenSequence};
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting(AtomicUsize);

    impl SequenceOracle for Counting {
        fn masked_logprob(&self, query: &MaskedQuery, token: &str) -> Result<f64, OracleError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(-(query.target() as f64) - token.len() as f64)
        }
    }

    #[test]
    fn repeated_queries_hit_the_cache() {
        let oracle = Memoized::new(Counting(AtomicUsize::new(0)));
        let s = TokenSequence::parse("a bb ccc").unwrap();
        let first = sequence_score(&oracle, &s).unwrap();
        let calls = oracle.inner().0.load(Ordering::SeqCst);
        assert_eq!(calls, 6);
        let second = sequence_score(&oracle, &s).unwrap();
        assert_eq!(first, second);
        assert_eq!(oracle.inner().0.load(Ordering::SeqCst), calls);
    }

    #[test]
    fn batch_lookup_only_asks_for_missing() {
        let oracle = Memoized::new(Counting(AtomicUsize::new(0)));
        let q = MaskedQuery::forward(&TokenSequence::parse("x y").unwrap(), 1);
        oracle.masked_logprob(&q, "a").unwrap();
        let got = oracle
            .masked_logprobs(&q, &["a".to_string(), "bb".to_string()])
            .unwrap();
        assert_eq!(got, vec![-2.0, -3.0]);
        assert_eq!(oracle.inner().0.load(Ordering::SeqCst), 2);
        assert_eq!(oracle.cached_entries(), 2);
    }
}
