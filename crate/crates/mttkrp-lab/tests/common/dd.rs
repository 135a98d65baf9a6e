//! Minimal double-double arithmetic (~106 significant bits) used as the
//! high-precision oracle for the bound formulas. Independent of the
//! library's f64 evaluation path.

#[derive(Debug, Clone, Copy)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub fn from_f64(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }

    pub fn from_u128(v: u128) -> Self {
        let hi = v as f64;
        let lo = (v as i128 - hi as i128) as f64;
        let (h, l) = quick_two_sum(hi, lo);
        Dd { hi: h, lo: l }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s1, e1) = two_sum(self.hi, o.hi);
        let (s2, e2) = two_sum(self.lo, o.lo);
        let (s1, e1) = quick_two_sum(s1, e1 + s2);
        let (h, l) = quick_two_sum(s1, e1 + e2);
        Dd { hi: h, lo: l }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (h, l) = quick_two_sum(p, e);
        Dd { hi: h, lo: l }
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from_f64(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Dd::from_f64(q2)));
        let q3 = r.hi / o.hi;
        let (s, e) = two_sum(q1, q2);
        let (h, l) = quick_two_sum(s, e + q3);
        Dd { hi: h, lo: l }
    }

    pub fn powi(self, n: u32) -> Dd {
        let mut acc = Dd::from_f64(1.0);
        let mut base = self;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            k >>= 1;
        }
        acc
    }

    /// Positive n-th root via Newton iteration from an f64 seed.
    pub fn nth_root(self, n: u32) -> Dd {
        assert!(self.hi > 0.0 && n > 0);
        let mut x = Dd::from_f64(self.hi.powf(1.0 / n as f64));
        let nf = Dd::from_f64(n as f64);
        for _ in 0..4 {
            // x <- x - (x^n - a) / (n x^(n-1))
            let xn1 = x.powi(n - 1);
            let num = xn1.mul(x).sub(self);
            let den = nf.mul(xn1);
            x = x.sub(num.div(den));
        }
        x
    }
}

#[allow(dead_code)]
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
