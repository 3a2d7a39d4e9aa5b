use super::discretization::Discretization;
use super::state::TwoScaleState;

/// Load vectors of the three equations at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Loads {
    pub f_u: Vec<f64>,
    pub f_v: Vec<f64>,
    pub f_w: Vec<f64>,
}

/// Time-dependent forcing bound to one discretization.
pub trait Forcing {
    fn loads(&self, t: f64) -> Loads;
}

/// Boundary, initial and forcing data of a two-scale run.
pub trait ProblemData {
    fn dirichlet(&self, t: f64, x: [f64; 2]) -> f64;
    fn initial_u(&self, x: [f64; 2]) -> f64;
    fn initial_v(&self, x: [f64; 2], y: [f64; 2]) -> f64;
    fn initial_w(&self, x: [f64; 2], y: [f64; 2]) -> f64;

    /// Forcing loads on `disc`; `None` means homogeneous equations.
    fn forcing<'a>(&'a self, _disc: &'a Discretization) -> Option<Box<dyn Forcing + 'a>> {
        None
    }

    /// Nodal interpolants of the initial data.
    fn initial_state(&self, disc: &Discretization) -> TwoScaleState {
        TwoScaleState {
            t: 0.0,
            a: disc.space.interpolate(|x| self.initial_u(x)),
            b: disc.interpolate_two_scale(|x, y| self.initial_v(x, y)),
            c: disc.interpolate_two_scale(|x, y| self.initial_w(x, y)),
        }
    }
}

/// Spatially and temporally constant data `U = v = w = value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantData {
    pub value: f64,
}

impl ProblemData for ConstantData {
    fn dirichlet(&self, _t: f64, _x: [f64; 2]) -> f64 {
        self.value
    }

    fn initial_u(&self, _x: [f64; 2]) -> f64 {
        self.value
    }

    fn initial_v(&self, _x: [f64; 2], _y: [f64; 2]) -> f64 {
        self.value
    }

    fn initial_w(&self, _x: [f64; 2], _y: [f64; 2]) -> f64 {
        self.value
    }
}

/// Data given by closures; forcing-free.
pub struct FnData<D, U, V, W> {
    pub dirichlet: D,
    pub u0: U,
    pub v0: V,
    pub w0: W,
}

impl<D, U, V, W> ProblemData for FnData<D, U, V, W>
where
    D: Fn(f64, [f64; 2]) -> f64,
    U: Fn([f64; 2]) -> f64,
    V: Fn([f64; 2], [f64; 2]) -> f64,
    W: Fn([f64; 2], [f64; 2]) -> f64,
{
    fn dirichlet(&self, t: f64, x: [f64; 2]) -> f64 {
        (self.dirichlet)(t, x)
    }

    fn initial_u(&self, x: [f64; 2]) -> f64 {
        (self.u0)(x)
    }

    fn initial_v(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        (self.v0)(x, y)
    }

    fn initial_w(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        (self.w0)(x, y)
    }
}
