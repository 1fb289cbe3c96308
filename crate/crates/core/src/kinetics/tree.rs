/// Binary sum tree over nonnegative site weights.
///
/// Leaves live at `size + i` in a power-of-two layout; each internal node is
/// recomputed from its two children on update, so the root carries no
/// accumulated drift beyond `log₂ L` roundings.
#[derive(Debug, Clone)]
pub struct RateTree {
    size: usize,
    len: usize,
    nodes: Vec<f64>,
}

impl RateTree {
    pub fn from_weights(weights: &[f64]) -> Self {
        let len = weights.len();
        let size = len.next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * size];
        nodes[size..size + len].copy_from_slice(weights);
        for i in (1..size).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Self { size, len, nodes }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.nodes[self.size + i]
    }

    #[inline]
    pub fn update(&mut self, i: usize, w: f64) {
        let mut k = self.size + i;
        self.nodes[k] = w;
        k /= 2;
        while k >= 1 {
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
            k /= 2;
        }
    }

    /// Leaf `i` with `Σ_{j<i} w_j ≤ target < Σ_{j≤i} w_j`; never returns a
    /// zero-weight leaf when the total is positive.
    #[inline]
    pub fn find(&self, mut target: f64) -> usize {
        let mut k = 1;
        while k < self.size {
            let left = self.nodes[2 * k];
            let right = self.nodes[2 * k + 1];
            if (target < left && left > 0.0) || right <= 0.0 {
                k *= 2;
            } else {
                target = (target - left).max(0.0);
                k = 2 * k + 1;
            }
        }
        k - self.size
    }
}
