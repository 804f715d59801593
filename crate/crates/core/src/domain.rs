use rand::Rng;
use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
///
/// Serializes as `[[x0, x1], [y0, y1]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn square(lo: f64, hi: f64) -> Self {
        Rect::new(lo, hi, lo, hi)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn lower_left(&self) -> (f64, f64) {
        (self.x0, self.y0)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        (rng.gen_range(self.x0..=self.x1), rng.gen_range(self.y0..=self.y1))
    }

    /// Cell-centred `n × n` grid, row-major in `y`.
    pub fn grid(&self, n: usize) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(n * n);
        for j in 0..n {
            let y = self.y0 + (self.y1 - self.y0) * (j as f64 + 0.5) / n as f64;
            for i in 0..n {
                let x = self.x0 + (self.x1 - self.x0) * (i as f64 + 0.5) / n as f64;
                pts.push((x, y));
            }
        }
        pts
    }

    pub fn is_valid(&self) -> bool {
        self.x0.is_finite() && self.x1.is_finite() && self.y0.is_finite() && self.y1.is_finite()
            && self.x0 < self.x1
            && self.y0 < self.y1
    }
}

impl From<[[f64; 2]; 2]> for Rect {
    fn from(v: [[f64; 2]; 2]) -> Self {
        Rect::new(v[0][0], v[0][1], v[1][0], v[1][1])
    }
}

impl From<Rect> for [[f64; 2]; 2] {
    fn from(r: Rect) -> Self {
        [[r.x0, r.x1], [r.y0, r.y1]]
    }
}
