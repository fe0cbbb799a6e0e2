//! Exact simulation of an analog filter driven by a piecewise-constant input.
//!
//! Between two input breakpoints the state obeys `x' = A x + B u` with `u`
//! fixed, so one step of length `h` is `x ← Φ(h) x + Γ(h) u` with
//! `Φ = e^{Ah}` and `Γ = ∫₀ʰ e^{As} ds B`. Both come from the exponential of
//! the augmented matrix `[[A, B], [0, 0]]·h`. There is no discretisation
//! error: outputs at arbitrary instants are exact up to rounding.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::signal::BalunModel;
use crate::signal::Section;

#[derive(Debug, Clone)]
pub(crate) struct StateSpace {
    a: DMatrix<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: f64,
}

impl StateSpace {
    fn identity() -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: vec![],
            c: vec![],
            d: 1.0,
        }
    }

    fn section(sec: &Section) -> Self {
        match *sec {
            Section::First { b0, b1, a1 } => Self {
                a: DMatrix::from_element(1, 1, -a1),
                b: vec![1.0],
                c: vec![b1 - a1 * b0],
                d: b0,
            },
            Section::Second { b0, b1, b2, a1, a2 } => Self {
                a: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -a2, -a1]),
                b: vec![0.0, 1.0],
                c: vec![b2 - a2 * b0, b1 - a1 * b0],
                d: b0,
            },
        }
    }

    /// `self` followed by `next`.
    fn then(self, next: &StateSpace) -> Self {
        let n1 = self.b.len();
        let n2 = next.b.len();
        let n = n1 + n2;
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&next.a);
        for i in 0..n2 {
            for j in 0..n1 {
                a[(n1 + i, j)] = next.b[i] * self.c[j];
            }
        }
        let mut b = self.b.clone();
        b.extend(next.b.iter().map(|v| v * self.d));
        let mut c: Vec<f64> = self.c.iter().map(|v| v * next.d).collect();
        c.extend_from_slice(&next.c);
        Self {
            a,
            b,
            c,
            d: self.d * next.d,
        }
    }

    /// Realisation of a balun with time measured in `time_unit_s`.
    pub(crate) fn balun(model: &BalunModel, time_unit_s: f64) -> Self {
        model
            .sections(time_unit_s)
            .iter()
            .fold(Self::identity(), |acc, s| acc.then(&Self::section(s)))
    }

    pub(crate) fn order(&self) -> usize {
        self.b.len()
    }
}

/// Stepper with a cache of discretisations keyed by step length.
pub(crate) struct Stepper {
    sys: StateSpace,
    state: Vec<f64>,
    scratch: Vec<f64>,
    cache: HashMap<u64, (Vec<f64>, Vec<f64>)>,
}

impl Stepper {
    pub(crate) fn new(sys: StateSpace) -> Self {
        let n = sys.order();
        Self {
            sys,
            state: vec![0.0; n],
            scratch: vec![0.0; n],
            cache: HashMap::new(),
        }
    }

    fn discretize(sys: &StateSpace, h: f64) -> (Vec<f64>, Vec<f64>) {
        let n = sys.order();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&(&sys.a * h));
        for i in 0..n {
            m[(i, n)] = sys.b[i] * h;
        }
        let e = m.exp();
        let mut phi = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                phi.push(e[(i, j)]);
            }
        }
        let gamma = (0..n).map(|i| e[(i, n)]).collect();
        (phi, gamma)
    }

    /// Advances the state by `h` time units with the input held at `u`.
    pub(crate) fn step(&mut self, h: f64, u: f64) {
        if h <= 0.0 {
            return;
        }
        let n = self.sys.order();
        let sys = &self.sys;
        let (phi, gamma) = self
            .cache
            .entry(h.to_bits())
            .or_insert_with(|| Self::discretize(sys, h));
        for i in 0..n {
            let row = &phi[i * n..(i + 1) * n];
            let mut acc = gamma[i] * u;
            for (p, x) in row.iter().zip(&self.state) {
                acc += p * x;
            }
            self.scratch[i] = acc;
        }
        std::mem::swap(&mut self.state, &mut self.scratch);
    }

    pub(crate) fn output(&self, u: f64) -> f64 {
        self.sys.c.iter().zip(&self.state).map(|(c, x)| c * x).sum::<f64>() + self.sys.d * u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn transfer(sys: &StateSpace, s: Complex64) -> Complex64 {
        // C (sI - A)^{-1} B + D via a complex solve.
        let n = sys.order();
        let mut m = nalgebra::DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex64::new(-sys.a[(i, j)], 0.0);
            }
            m[(i, i)] += s;
        }
        let b = nalgebra::DVector::from_iterator(n, sys.b.iter().map(|&v| Complex64::new(v, 0.0)));
        let x = m.lu().solve(&b).unwrap();
        sys.c.iter().zip(x.iter()).map(|(c, x)| x * *c).sum::<Complex64>() + sys.d
    }

    #[test]
    fn state_space_matches_section_product() {
        for order in 1..=4 {
            let model = BalunModel::new(10e6, 8e9, order).unwrap();
            let unit = 1e-9;
            let sys = StateSpace::balun(&model, unit);
            assert_eq!(sys.order(), 2 * order as usize);
            for &f in &[3e6, 1e7, 5e8, 7e9, 2e10] {
                let s = Complex64::new(0.0, 2.0 * std::f64::consts::PI * f * unit);
                let got = transfer(&sys, s);
                let want = model.response(f);
                assert!((got - want).norm() < 1e-9, "order {order} f {f}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn first_order_step_response() {
        // 1/(s+1): y(t) = 1 - e^{-t} for a unit step.
        let sys = StateSpace::section(&Section::First { b0: 0.0, b1: 1.0, a1: 1.0 });
        let mut st = Stepper::new(sys);
        st.step(0.5, 1.0);
        st.step(0.25, 1.0);
        st.step(0.25, 1.0);
        assert!((st.output(1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn steady_state_tone_matches_response() {
        // Drive the balun with a finely held sine and compare the late
        // amplitude with |H(f)|.
        let model = BalunModel::default();
        let unit = 1e-12;
        let mut st = Stepper::new(StateSpace::balun(&model, unit));
        let f = 9e9;
        let dt = 1.0; // 1 ps per step, 111 steps per period
        let total = 400_000;
        let mut peak: f64 = 0.0;
        for k in 0..total {
            let t = (k as f64 + 0.5) * dt * unit;
            let u = (2.0 * std::f64::consts::PI * f * t).sin();
            st.step(dt, u);
            if k > total - 2000 {
                peak = peak.max(st.output(u).abs());
            }
        }
        let want = model.gain(f).unwrap();
        assert!((peak - want).abs() < 0.01, "{peak} vs {want}");
    }
}
