//! Union-find with dendrogram-style labelling: every union mints a new
//! node id, so merges map directly onto single-linkage tree rows.

pub struct LabeledUnionFind {
    parent: Vec<Option<usize>>,
    size: Vec<usize>,
    next_label: usize,
}

impl LabeledUnionFind {
    /// `n` leaves; unions mint labels n, n+1, ... up to 2n-2.
    pub fn new(n: usize) -> Self {
        let slots = if n == 0 { 0 } else { 2 * n - 1 };
        let mut size = vec![0; slots];
        size[..n].fill(1);
        LabeledUnionFind { parent: vec![None; slots], size, next_label: n }
    }

    /// Current root label of `x`, with path compression.
    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while let Some(p) = self.parent[root] {
            root = p;
        }
        let mut cur = x;
        while let Some(p) = self.parent[cur] {
            self.parent[cur] = Some(root);
            cur = p;
        }
        root
    }

    pub fn size(&self, root: usize) -> usize {
        self.size[root]
    }

    /// Merge two roots under a freshly minted label; returns that label.
    pub fn union(&mut self, root_a: usize, root_b: usize) -> usize {
        let label = self.next_label;
        self.next_label += 1;
        self.parent[root_a] = Some(label);
        self.parent[root_b] = Some(label);
        self.size[label] = self.size[root_a] + self.size[root_b];
        label
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unions_mint_sequential_labels() {
        let mut uf = LabeledUnionFind::new(3);
        assert_eq!(uf.find(0), 0);
        let first = uf.union(0, 1);
        assert_eq!(first, 3);
        assert_eq!(uf.find(0), 3);
        assert_eq!(uf.find(1), 3);
        assert_eq!(uf.size(3), 2);
        let second = uf.union(3, 2);
        assert_eq!(second, 4);
        assert_eq!(uf.find(0), 4);
        assert_eq!(uf.size(4), 3);
    }
}
