//! Local observables and their time integrals.

/// Which centered occupancy product f is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalKind {
    /// η(x₀) − ρ
    Degree1(usize),
    /// (η(x₀) − ρ)(η(x₁) − ρ), x₀ ≠ x₁
    Degree2(usize, usize),
}

/// A local observable f with its running integral Γ_f(t) = ∫_0^t f(η_s) ds.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSpec {
    pub kind: FunctionalKind,
    pub rho: f64,
    pub accumulator: f64,
    pub last_value: f64,
}

impl FunctionalSpec {
    pub fn degree1(x0: usize, rho: f64) -> Self {
        Self { kind: FunctionalKind::Degree1(x0), rho, accumulator: 0.0, last_value: 0.0 }
    }

    pub fn degree2(x0: usize, x1: usize, rho: f64) -> Self {
        assert_ne!(x0, x1, "degree-2 functional needs distinct sites");
        Self { kind: FunctionalKind::Degree2(x0, x1), rho, accumulator: 0.0, last_value: 0.0 }
    }

    /// f evaluated on an occupancy accessor.
    pub fn eval<F: Fn(usize) -> bool>(&self, occ: F) -> f64 {
        let c = |x: usize| if occ(x) { 1.0 - self.rho } else { -self.rho };
        match self.kind {
            FunctionalKind::Degree1(x) => c(x),
            FunctionalKind::Degree2(x, y) => c(x) * c(y),
        }
    }

    /// Sites f depends on.
    pub fn sites(&self) -> Vec<usize> {
        match self.kind {
            FunctionalKind::Degree1(x) => vec![x],
            FunctionalKind::Degree2(x, y) => vec![x, y],
        }
    }

    /// Same observable with its sites moved by `translate`.
    pub fn translated<T: Fn(usize) -> usize>(&self, translate: T) -> Self {
        let kind = match self.kind {
            FunctionalKind::Degree1(x) => FunctionalKind::Degree1(translate(x)),
            FunctionalKind::Degree2(x, y) => FunctionalKind::Degree2(translate(x), translate(y)),
        };
        Self { kind, ..self.clone() }
    }

    /// Var_ν_ρ[f].
    pub fn variance(&self) -> f64 {
        let chi = self.rho * (1.0 - self.rho);
        match self.kind {
            FunctionalKind::Degree1(_) => chi,
            FunctionalKind::Degree2(..) => chi * chi,
        }
    }

    pub fn reset(&mut self) {
        self.accumulator = 0.0;
        self.last_value = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_sets() {
        let f = FunctionalSpec::degree1(0, 0.3);
        assert_eq!(f.eval(|_| true), 0.7);
        assert_eq!(f.eval(|_| false), -0.3);
        let g = FunctionalSpec::degree2(0, 1, 0.5);
        for a in [false, true] {
            for b in [false, true] {
                let v = g.eval(|x| if x == 0 { a } else { b });
                assert!([0.25, -0.25].contains(&v));
            }
        }
    }
}
