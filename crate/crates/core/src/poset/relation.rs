//! Dense binary relations over `0..n` with closure and reduction.

/// `contains(a, b)` means an edge from `a` down to `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    n: usize,
    bits: Vec<bool>,
}

impl Relation {
    pub fn new(n: usize) -> Self {
        Relation {
            n,
            bits: vec![false; n * n],
        }
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut r = Relation::new(n);
        for (a, b) in pairs {
            r.insert(a, b);
        }
        r
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn insert(&mut self, a: usize, b: usize) {
        self.bits[a * self.n + b] = true;
    }

    pub fn remove(&mut self, a: usize, b: usize) {
        self.bits[a * self.n + b] = false;
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.bits[a * self.n + b]
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |a| {
            (0..self.n)
                .filter(move |&b| self.contains(a, b))
                .map(move |b| (a, b))
        })
    }

    /// Transitive closure. Fails with a node on a cycle.
    pub fn transitive_closure(&self) -> Result<Relation, usize> {
        let mut r = self.clone();
        let n = self.n;
        for k in 0..n {
            for i in 0..n {
                if r.contains(i, k) {
                    for j in 0..n {
                        if r.contains(k, j) {
                            r.insert(i, j);
                        }
                    }
                }
            }
        }
        match (0..n).find(|&i| r.contains(i, i)) {
            Some(i) => Err(i),
            None => Ok(r),
        }
    }

    /// The unique minimal relation with the same transitive closure.
    pub fn transitive_reduction(&self) -> Result<Relation, usize> {
        let closed = self.transitive_closure()?;
        let n = self.n;
        let mut r = closed.clone();
        for (a, b) in closed.pairs() {
            if (0..n).any(|k| closed.contains(a, k) && closed.contains(k, b)) {
                r.remove(a, b);
            }
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_shortcut_is_removed() {
        // M=0 > B=1 > E=2, plus M -> E
        let r = Relation::from_pairs(3, [(0, 1), (1, 2), (0, 2)]);
        let red = r.transitive_reduction().unwrap();
        assert_eq!(red.pairs().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn antichain_under_top_is_already_reduced() {
        let r = Relation::from_pairs(3, [(0, 1), (0, 2)]);
        assert_eq!(r.transitive_reduction().unwrap(), r);
    }

    #[test]
    fn crd_keeps_only_interaction_edge_into_residual() {
        // M=0, A=1, B=2, AB=3, E=4 with every implied edge present
        let r = Relation::from_pairs(
            5,
            [
                (0, 1),
                (0, 2),
                (0, 3),
                (0, 4),
                (1, 3),
                (2, 3),
                (1, 4),
                (2, 4),
                (3, 4),
            ],
        );
        let red = r.transitive_reduction().unwrap();
        let into_e: Vec<_> = red.pairs().filter(|&(_, b)| b == 4).collect();
        assert_eq!(into_e, vec![(3, 4)]);
        assert_eq!(red.pairs().count(), 5);
    }

    #[test]
    fn cycle_is_reported() {
        let r = Relation::from_pairs(2, [(0, 1), (1, 0)]);
        assert!(r.transitive_closure().is_err());
    }
}
