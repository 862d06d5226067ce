use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Forward-mode dual number carrying a value and its derivative with respect
/// to a single scalar input.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub value: f64,
    pub tangent: f64,
}

impl Dual {
    pub const fn new(value: f64, tangent: f64) -> Self {
        Dual { value, tangent }
    }

    pub const fn constant(value: f64) -> Self {
        Dual {
            value,
            tangent: 0.0,
        }
    }

    pub const fn variable(value: f64) -> Self {
        Dual {
            value,
            tangent: 1.0,
        }
    }

    pub fn tanh(self) -> Self {
        let t = self.value.tanh();
        Dual::new(t, (1.0 - t * t) * self.tangent)
    }

    pub fn is_finite(self) -> bool {
        self.value.is_finite() && self.tangent.is_finite()
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.value + rhs.value, self.tangent + rhs.tangent)
    }
}

impl AddAssign for Dual {
    fn add_assign(&mut self, rhs: Dual) {
        self.value += rhs.value;
        self.tangent += rhs.tangent;
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.value - rhs.value, self.tangent - rhs.tangent)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.value, -self.tangent)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(
            self.value * rhs.value,
            self.value * rhs.tangent + self.tangent * rhs.value,
        )
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, rhs: f64) -> Dual {
        Dual::new(self.value * rhs, self.tangent * rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let a = Dual::new(2.0, 3.0);
        let b = Dual::new(5.0, -1.0);
        assert_eq!(a * b, Dual::new(10.0, -2.0 + 3.0 * 5.0));
    }

    #[test]
    fn tanh_chain_rule() {
        let x = Dual::new(0.3, 2.0);
        let y = x.tanh();
        let t = 0.3f64.tanh();
        assert_eq!(y.value, t);
        assert!((y.tangent - (1.0 - t * t) * 2.0).abs() < 1e-15);
    }

    #[test]
    fn polynomial_derivative() {
        // d/dx (x^3 - 2x) at x = 1.5 is 3x^2 - 2
        let x = Dual::variable(1.5);
        let y = x * x * x - x * 2.0;
        assert!((y.tangent - (3.0 * 2.25 - 2.0)).abs() < 1e-14);
        assert_eq!((-y).value, -y.value);
    }
}
