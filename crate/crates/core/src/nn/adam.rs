/// Bias-corrected Adam.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = &'a mut Vec<f64>>,
        grads: &[Vec<f64>],
    ) {
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, p) in params.into_iter().enumerate() {
            let (g, m, v) = (&grads[k], &mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = vec![vec![1.0, -2.0]];
        let mut opt = Adam::new(0.001);
        opt.step(p.iter_mut(), &[vec![0.0, 0.0]]);
        assert_eq!(p, vec![vec![1.0, -2.0]]);
    }

    #[test]
    fn first_step_moves_each_coordinate_by_about_lr() {
        let mut p = [vec![0.0, 0.0, 0.0]];
        let mut opt = Adam::new(0.001);
        opt.step(p.iter_mut(), &[vec![3.0, -0.5, 100.0]]);
        for (x, g) in p[0].iter().zip([3.0f64, -0.5, 100.0]) {
            assert!((x.abs() - 0.001).abs() < 1e-10);
            assert_eq!(x.signum(), -g.signum());
        }
    }

    #[test]
    fn scalar_quadratic_matches_reference_recurrence() {
        // f(x) = (x - 3)^2
        let lr = 0.1;
        let mut p = [vec![0.0]];
        let mut opt = Adam::new(lr);
        let (mut x, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=10 {
            let g = 2.0 * (p[0][0] - 3.0);
            opt.step(p.iter_mut(), &[vec![g]]);
            let gr = 2.0 * (x - 3.0);
            m = 0.9 * m + 0.1 * gr;
            v = 0.999 * v + 0.001 * gr * gr;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= lr * mh / (vh.sqrt() + 1e-8);
            assert!((p[0][0] - x).abs() < 1e-12);
        }
    }
}
