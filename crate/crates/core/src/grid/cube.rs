use serde::{Deserialize, Serialize};

/// The dyadic cube `Q_{v,m} = 2^{-v}(m + [0,1)^n)`.
///
/// Ordering is lexicographic in `(v, m)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub v: i32,
    pub m: Vec<i64>,
}

/// Side, lower corner, center and measure of a cube. Unused axes are zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubeGeometry {
    pub side: f64,
    pub corner: [f64; 2],
    pub center: [f64; 2],
    pub measure: f64,
}

impl DyadicCube {
    pub fn new(v: i32, m: Vec<i64>) -> Self {
        Self { v, m }
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    /// `v_Q = -log2 l(Q)`.
    pub fn v_q(&self) -> i32 {
        self.v
    }

    /// `v_Q^+ = max(v_Q, 0)`.
    pub fn v_q_plus(&self) -> i32 {
        self.v.max(0)
    }

    pub fn side(&self) -> f64 {
        2f64.powi(-self.v)
    }

    /// `|Q| = 2^{-vn}`.
    pub fn measure(&self) -> f64 {
        2f64.powi(-self.v * self.dim() as i32)
    }

    pub fn geometry(&self) -> CubeGeometry {
        let side = self.side();
        let mut corner = [0.0; 2];
        let mut center = [0.0; 2];
        for (k, &mk) in self.m.iter().enumerate() {
            corner[k] = side * mk as f64;
            center[k] = corner[k] + 0.5 * side;
        }
        CubeGeometry { side, corner, center, measure: self.measure() }
    }

    /// Does the cube contain the point (half-open on every axis)?
    pub fn contains(&self, x: &[f64]) -> bool {
        let side = self.side();
        self.m.iter().zip(x).all(|(&mk, &xk)| {
            let lo = side * mk as f64;
            lo <= xk && xk < lo + side
        })
    }

    /// The dyadic parent one level up.
    pub fn parent(&self) -> DyadicCube {
        DyadicCube::new(self.v - 1, self.m.iter().map(|&mk| mk.div_euclid(2)).collect())
    }

    /// The cube at level `v` containing the point.
    pub fn containing(v: i32, x: &[f64]) -> DyadicCube {
        let scale = 2f64.powi(v);
        DyadicCube::new(v, x.iter().map(|&xk| (xk * scale).floor() as i64).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_of_level_one() {
        let g = DyadicCube::new(1, vec![1]).geometry();
        assert_eq!(g.side, 0.5);
        assert_eq!(g.corner[0], 0.5);
        assert_eq!(g.center[0], 0.75);
        assert_eq!(g.measure, 0.5);
    }

    #[test]
    fn level_indices() {
        let q = DyadicCube::new(3, vec![0]);
        assert_eq!((q.side(), q.v_q(), q.v_q_plus()), (0.125, 3, 3));
        let q = DyadicCube::new(-2, vec![0]);
        assert_eq!((q.side(), q.v_q(), q.v_q_plus()), (4.0, -2, 0));
        let g = DyadicCube::new(1, vec![-1]).geometry();
        assert_eq!((g.corner[0], g.center[0]), (-0.5, -0.25));
    }

    #[test]
    fn half_open_membership() {
        let q = DyadicCube::new(0, vec![0, 0]);
        assert!(q.contains(&[0.0, 0.0]));
        assert!(q.contains(&[0.999, 0.5]));
        assert!(!q.contains(&[1.0, 0.5]));
        assert!(!q.contains(&[-1e-12, 0.5]));
    }

    #[test]
    fn parent_and_containing() {
        let q = DyadicCube::containing(2, &[-0.3]);
        assert_eq!(q.m, vec![-2]);
        assert_eq!(q.parent(), DyadicCube::new(1, vec![-1]));
        assert!(q.parent().contains(&[-0.3]));
    }

    #[test]
    fn ordering_is_level_first() {
        let mut v = vec![
            DyadicCube::new(1, vec![0]),
            DyadicCube::new(0, vec![3]),
            DyadicCube::new(1, vec![-1]),
        ];
        v.sort();
        assert_eq!(v[0], DyadicCube::new(0, vec![3]));
        assert_eq!(v[1], DyadicCube::new(1, vec![-1]));
    }
}
