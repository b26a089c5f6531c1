use std::ops::{Add, Div, Mul, Sub};

/// Forward-mode dual number with four tangent directions.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Dual {
    pub v: f64,
    pub d: [f64; 4],
}

impl Dual {
    pub fn constant(v: f64) -> Self {
        Dual { v, d: [0.0; 4] }
    }

    pub fn var(v: f64, k: usize) -> Self {
        let mut d = [0.0; 4];
        d[k] = 1.0;
        Dual { v, d }
    }

    pub fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        let s = 0.5 / r;
        Dual { v: r, d: self.d.map(|x| x * s) }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: std::array::from_fn(|k| self.d[k] + o.d[k]) }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: std::array::from_fn(|k| self.d[k] - o.d[k]) }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self.v * o.v, d: std::array::from_fn(|k| self.d[k] * o.v + self.v * o.d[k]) }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.v;
        Dual { v: self.v * inv, d: std::array::from_fn(|k| (self.d[k] - self.v * inv * o.d[k]) * inv) }
    }
}
