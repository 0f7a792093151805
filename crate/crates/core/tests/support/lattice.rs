//! Brute-force least squares for `y = a·exp(-b·x) + c` over a lattice.
//!
//! Level 0 spans `a ∈ [-300, 300]`, `b ∈ [0, 5]`, `c ∈ [-300, 300]` with 121
//! points per axis. Each further level re-centres on the best point found so
//! far and spans ±4 of the previous level's cells, again with 121 points per
//! axis (b clipped at 0). Eight levels in total. Nothing here shares code with
//! the fitter.

pub const POINTS_PER_AXIS: usize = 121;
pub const LEVELS: usize = 8;

#[derive(Debug, Clone, Copy)]
pub struct LatticeBest {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sse: f64,
}

impl LatticeBest {
    #[allow(dead_code)]
    pub fn mae(&self, points: &[(f64, f64)]) -> f64 {
        points
            .iter()
            .map(|&(x, y)| (y - (self.a * (-self.b * x).exp() + self.c)).abs())
            .sum::<f64>()
            / points.len() as f64
    }
}

fn axis(lo: f64, hi: f64) -> Vec<f64> {
    (0..POINTS_PER_AXIS)
        .map(|i| lo + (hi - lo) * i as f64 / (POINTS_PER_AXIS - 1) as f64)
        .collect()
}

pub fn search(points: &[(f64, f64)]) -> LatticeBest {
    let mut ranges = [(-300.0, 300.0), (0.0, 5.0), (-300.0, 300.0)];
    let mut best = LatticeBest {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        sse: f64::INFINITY,
    };
    for _ in 0..LEVELS {
        let (av, bv, cv) = (
            axis(ranges[0].0, ranges[0].1),
            axis(ranges[1].0, ranges[1].1),
            axis(ranges[2].0, ranges[2].1),
        );
        for &b in &bv {
            let e: Vec<f64> = points.iter().map(|&(x, _)| (-b * x).exp()).collect();
            for &a in &av {
                for &c in &cv {
                    let mut s = 0.0;
                    for (k, &(_, y)) in points.iter().enumerate() {
                        let r = y - a * e[k] - c;
                        s += r * r;
                    }
                    if s < best.sse {
                        best = LatticeBest { a, b, c, sse: s };
                    }
                }
            }
        }
        let step = |(lo, hi): (f64, f64)| (hi - lo) / (POINTS_PER_AXIS - 1) as f64;
        let (sa, sb, sc) = (step(ranges[0]), step(ranges[1]), step(ranges[2]));
        ranges = [
            (best.a - 4.0 * sa, best.a + 4.0 * sa),
            ((best.b - 4.0 * sb).max(0.0), best.b + 4.0 * sb),
            (best.c - 4.0 * sc, best.c + 4.0 * sc),
        ];
    }
    best
}
