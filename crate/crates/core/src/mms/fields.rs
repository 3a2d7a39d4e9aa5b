use std::f64::consts::PI;

/// Polynomial in time, coefficients in increasing degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    /// `c0 + c1 t`.
    pub fn linear(c0: f64, c1: f64) -> Self {
        Poly(vec![c0, c1])
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(self.0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Sin,
    Cos,
}

impl Trig {
    /// `f(pi s)`, its first and second derivative in `s`.
    fn eval(self, s: f64) -> (f64, f64, f64) {
        let (sn, cs) = (PI * s).sin_cos();
        match self {
            Trig::Sin => (sn, PI * cs, -PI * PI * sn),
            Trig::Cos => (cs, -PI * sn, -PI * PI * cs),
        }
    }
}

/// Smooth function of a point in the unit square with analytic derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// `offset + amp f(pi s1) g(pi s2)`.
    Trig { offset: f64, amp: f64, f: Trig, g: Trig },
    /// `tanh((s1 - centre) / width)`.
    Layer { centre: f64, width: f64 },
    /// `c0 + c1 s1 + c2 s2 + c3 s1 s2`.
    Bilinear([f64; 4]),
}

impl Shape {
    pub const ONE: Shape = Shape::Bilinear([1.0, 0.0, 0.0, 0.0]);

    pub fn value(&self, s: [f64; 2]) -> f64 {
        self.jet(s).0
    }

    pub fn grad(&self, s: [f64; 2]) -> [f64; 2] {
        self.jet(s).1
    }

    pub fn laplacian(&self, s: [f64; 2]) -> f64 {
        self.jet(s).2
    }

    /// Value, gradient and Laplacian.
    pub fn jet(&self, s: [f64; 2]) -> (f64, [f64; 2], f64) {
        match *self {
            Shape::Trig { offset, amp, f, g } => {
                let (f0, f1, f2) = f.eval(s[0]);
                let (g0, g1, g2) = g.eval(s[1]);
                (offset + amp * f0 * g0, [amp * f1 * g0, amp * f0 * g1], amp * (f2 * g0 + f0 * g2))
            }
            Shape::Layer { centre, width } => {
                let th = ((s[0] - centre) / width).tanh();
                let d1 = (1.0 - th * th) / width;
                let d2 = -2.0 * th * (1.0 - th * th) / (width * width);
                (th, [d1, 0.0], d2)
            }
            Shape::Bilinear([c0, c1, c2, c3]) => {
                (c0 + c1 * s[0] + c2 * s[1] + c3 * s[0] * s[1], [c1 + c3 * s[1], c2 + c3 * s[0]], 0.0)
            }
        }
    }
}

/// `time(t) * shape(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroTerm {
    pub time: Poly,
    pub shape: Shape,
}

/// Sum of separable macro terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MacroField {
    pub terms: Vec<MacroTerm>,
}

impl MacroField {
    pub fn new(terms: Vec<MacroTerm>) -> Self {
        Self { terms }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![MacroTerm { time: Poly::constant(c), shape: Shape::ONE }])
    }

    pub fn value(&self, t: f64, x: [f64; 2]) -> f64 {
        self.terms.iter().map(|m| m.time.eval(t) * m.shape.value(x)).sum()
    }

    pub fn grad(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        self.terms.iter().fold([0.0; 2], |acc, m| {
            let (c, g) = (m.time.eval(t), m.shape.grad(x));
            [acc[0] + c * g[0], acc[1] + c * g[1]]
        })
    }

    pub fn time_derivative(&self, t: f64, x: [f64; 2]) -> f64 {
        self.terms.iter().map(|m| m.time.derivative().eval(t) * m.shape.value(x)).sum()
    }

    pub fn laplacian(&self, t: f64, x: [f64; 2]) -> f64 {
        self.terms.iter().map(|m| m.time.eval(t) * m.shape.laplacian(x)).sum()
    }
}

/// `time(t) * macro_shape(x) * micro_shape(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleTerm {
    pub time: Poly,
    pub x: Shape,
    pub y: Shape,
}

/// Sum of separable two-scale terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TwoScaleField {
    pub terms: Vec<TwoScaleTerm>,
}

impl TwoScaleField {
    pub fn new(terms: Vec<TwoScaleTerm>) -> Self {
        Self { terms }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![TwoScaleTerm { time: Poly::constant(c), x: Shape::ONE, y: Shape::ONE }])
    }

    pub fn value(&self, t: f64, x: [f64; 2], y: [f64; 2]) -> f64 {
        self.terms.iter().map(|m| m.time.eval(t) * m.x.value(x) * m.y.value(y)).sum()
    }

    pub fn grad_y(&self, t: f64, x: [f64; 2], y: [f64; 2]) -> [f64; 2] {
        self.terms.iter().fold([0.0; 2], |acc, m| {
            let c = m.time.eval(t) * m.x.value(x);
            let g = m.y.grad(y);
            [acc[0] + c * g[0], acc[1] + c * g[1]]
        })
    }

    pub fn time_derivative(&self, t: f64, x: [f64; 2], y: [f64; 2]) -> f64 {
        self.terms.iter().map(|m| m.time.derivative().eval(t) * m.x.value(x) * m.y.value(y)).sum()
    }

    pub fn laplacian_y(&self, t: f64, x: [f64; 2], y: [f64; 2]) -> f64 {
        self.terms.iter().map(|m| m.time.eval(t) * m.x.value(x) * m.y.laplacian(y)).sum()
    }

    /// Macro factor `time_r(t) x_r(x)` of term `r`.
    pub fn macro_factor(&self, r: usize, t: f64, x: [f64; 2]) -> f64 {
        let m = &self.terms[r];
        m.time.eval(t) * m.x.value(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_arithmetic() {
        let p = Poly::linear(1.0, 2.0);
        assert_eq!(p.eval(3.0), 7.0);
        assert_eq!(p.derivative(), Poly(vec![2.0]));
        assert_eq!(p.mul(&p), Poly(vec![1.0, 4.0, 4.0]));
    }

    #[test]
    fn shape_derivatives_match_finite_differences() {
        let shapes = [
            Shape::Trig { offset: 1.0, amp: 0.5, f: Trig::Cos, g: Trig::Sin },
            Shape::Layer { centre: 0.5, width: 0.2 },
            Shape::Bilinear([1.0, 2.0, -1.0, 0.5]),
        ];
        let h = 1e-4;
        for s in shapes {
            let p = [0.37, 0.61];
            let (v, g, l) = s.jet(p);
            let fx = (s.value([p[0] + h, p[1]]) - s.value([p[0] - h, p[1]])) / (2.0 * h);
            let fy = (s.value([p[0], p[1] + h]) - s.value([p[0], p[1] - h])) / (2.0 * h);
            let lap = (s.value([p[0] + h, p[1]]) + s.value([p[0] - h, p[1]]) + s.value([p[0], p[1] + h])
                + s.value([p[0], p[1] - h])
                - 4.0 * v)
                / (h * h);
            assert!((g[0] - fx).abs() < 1e-6 && (g[1] - fy).abs() < 1e-6);
            assert!((l - lap).abs() < 1e-4 * (1.0 + l.abs()));
        }
    }
}
