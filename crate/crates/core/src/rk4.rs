//! Classical fixed-step fourth-order Runge–Kutta on flat state vectors.

/// Reusable stage buffers so the inner loop does not allocate.
#[derive(Clone, Debug)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Advances `y` from `t` to `t + h`. `f(t, y, dy)` writes the derivative.
    pub fn step<F>(&mut self, mut f: F, t: f64, y: &mut [f64], h: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        assert_eq!(n, self.k1.len(), "state length changed between steps");
        f(t, y, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        f(t + h, &self.tmp, &mut self.k4);
        for i in 0..n {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Integrates over `[t0, t0 + steps·h]` and returns the terminal state.
pub fn integrate<F>(mut f: F, t0: f64, y0: &[f64], h: f64, steps: usize) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut y = y0.to_vec();
    let mut rk = Rk4::new(y.len());
    for n in 0..steps {
        rk.step(&mut f, t0 + n as f64 * h, &mut y, h);
    }
    y
}

/// `‖y_h − y_{h/2}‖ / ‖y_{h/2} − y_{h/4}‖`, about 16 for a fourth-order method.
pub fn richardson_ratio(coarse: &[f64], mid: &[f64], fine: &[f64]) -> f64 {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    dist(coarse, mid) / dist(mid, fine)
}
