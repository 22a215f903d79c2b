//! Explicit Runge–Kutta steppers over flat state vectors.

use crate::real::{ratio, Real};

/// Right-hand side `y′ = F(y)` of an autonomous system. Returns the labels
/// of a coincident pair when the force is undefined.
pub(crate) trait Rhs<R: Real> {
    fn eval(&self, y: &[R], out: &mut [R]) -> Result<(), (usize, usize)>;
}

struct Tableau<R> {
    a2: [R; 1],
    a3: [R; 2],
    a4: [R; 3],
    a5: [R; 4],
    a6: [R; 5],
    b: [R; 6],
    e: [R; 7],
    d: [R; 7],
}

impl<R: Real> Tableau<R> {
    fn dormand_prince() -> Self {
        let z = R::zero();
        Self {
            a2: [ratio(1.0, 5.0)],
            a3: [ratio(3.0, 40.0), ratio(9.0, 40.0)],
            a4: [ratio(44.0, 45.0), ratio(-56.0, 15.0), ratio(32.0, 9.0)],
            a5: [
                ratio(19372.0, 6561.0),
                ratio(-25360.0, 2187.0),
                ratio(64448.0, 6561.0),
                ratio(-212.0, 729.0),
            ],
            a6: [
                ratio(9017.0, 3168.0),
                ratio(-355.0, 33.0),
                ratio(46732.0, 5247.0),
                ratio(49.0, 176.0),
                ratio(-5103.0, 18656.0),
            ],
            b: [
                ratio(35.0, 384.0),
                z,
                ratio(500.0, 1113.0),
                ratio(125.0, 192.0),
                ratio(-2187.0, 6784.0),
                ratio(11.0, 84.0),
            ],
            e: [
                ratio(71.0, 57600.0),
                z,
                ratio(-71.0, 16695.0),
                ratio(71.0, 1920.0),
                ratio(-17253.0, 339200.0),
                ratio(22.0, 525.0),
                ratio(-1.0, 40.0),
            ],
            d: [
                ratio(-12715105075.0, 11282082432.0),
                z,
                ratio(87487479700.0, 32700410799.0),
                ratio(-10690763975.0, 1880347072.0),
                ratio(701980252875.0, 199316789632.0),
                ratio(-1453857185.0, 822651844.0),
                ratio(69997945.0, 29380423.0),
            ],
        }
    }
}

fn stage<R: Real, F: Rhs<R>>(
    f: &F,
    y0: &[R],
    h: R,
    coeffs: &[R],
    k: &mut [Vec<R>; 7],
    tmp: &mut [R],
    dst: usize,
) -> Result<(), (usize, usize)> {
    for i in 0..y0.len() {
        let mut acc = R::zero();
        for (j, c) in coeffs.iter().enumerate() {
            acc += *c * k[j][i];
        }
        tmp[i] = y0[i] + h * acc;
    }
    f.eval(tmp, &mut k[dst])
}

/// Outcome of one trial step.
pub(crate) struct Trial {
    /// Scaled RMS error estimate; the step is acceptable when `≤ 1`.
    pub err: f64,
}

/// Dormand–Prince 5(4) with FSAL and a fourth-order free interpolant.
pub(crate) struct DormandPrince<R> {
    tab: Tableau<R>,
    k: [Vec<R>; 7],
    tmp: Vec<R>,
    pub y1: Vec<R>,
}

impl<R: Real> DormandPrince<R> {
    pub fn new(n: usize) -> Self {
        Self {
            tab: Tableau::dormand_prince(),
            k: std::array::from_fn(|_| vec![R::zero(); n]),
            tmp: vec![R::zero(); n],
            y1: vec![R::zero(); n],
        }
    }

    /// Sets the first stage to `F(y0)`.
    pub fn prime<F: Rhs<R>>(&mut self, f: &F, y0: &[R]) -> Result<(), (usize, usize)> {
        f.eval(y0, &mut self.k[0])
    }

    pub fn derivative(&self) -> &[R] {
        &self.k[0]
    }

    /// Computes a trial step from `y0` (whose derivative is already primed)
    /// into `self.y1`, leaving `F(y1)` in the seventh stage.
    pub fn attempt<F: Rhs<R>>(
        &mut self,
        f: &F,
        y0: &[R],
        h: f64,
        rtol: f64,
        atol: f64,
    ) -> Result<Trial, (usize, usize)> {
        let hr = R::of(h);
        let t = &self.tab;
        let rows: [&[R]; 6] = [&t.a2, &t.a3, &t.a4, &t.a5, &t.a6, &t.b];
        for (s, row) in rows.into_iter().enumerate() {
            stage(f, y0, hr, row, &mut self.k, &mut self.tmp, s + 1)?;
        }
        self.y1.copy_from_slice(&self.tmp);

        let mut sum = 0.0;
        for i in 0..y0.len() {
            let mut e = R::zero();
            for (j, c) in self.tab.e.iter().enumerate() {
                e += *c * self.k[j][i];
            }
            let e = (hr * e).f64();
            let sc = atol + rtol * y0[i].f64().abs().max(self.y1[i].f64().abs());
            sum += (e / sc) * (e / sc);
        }
        Ok(Trial {
            err: (sum / y0.len() as f64).sqrt(),
        })
    }

    /// Dense coefficients of the accepted step, laid out as five blocks of
    /// length `n`.
    pub fn dense(&self, y0: &[R], h: f64, out: &mut Vec<R>) {
        let n = y0.len();
        let hr = R::of(h);
        out.clear();
        out.resize(5 * n, R::zero());
        for i in 0..n {
            let r2 = self.y1[i] - y0[i];
            let r3 = hr * self.k[0][i] - r2;
            let r4 = r2 - hr * self.k[6][i] - r3;
            let mut r5 = R::zero();
            for (j, c) in self.tab.d.iter().enumerate() {
                r5 += *c * self.k[j][i];
            }
            out[i] = y0[i];
            out[n + i] = r2;
            out[2 * n + i] = r3;
            out[3 * n + i] = r4;
            out[4 * n + i] = hr * r5;
        }
    }

    /// Moves the last stage into the first for the next step.
    pub fn advance(&mut self) {
        self.k.swap(0, 6);
    }
}

/// Classical fourth-order Runge–Kutta with a cubic Hermite interpolant.
pub(crate) struct Rk4<R> {
    k: [Vec<R>; 4],
    f0: Vec<R>,
    tmp: Vec<R>,
    pub y1: Vec<R>,
    f1: Vec<R>,
}

impl<R: Real> Rk4<R> {
    pub fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![R::zero(); n]),
            f0: vec![R::zero(); n],
            tmp: vec![R::zero(); n],
            y1: vec![R::zero(); n],
            f1: vec![R::zero(); n],
        }
    }

    pub fn prime<F: Rhs<R>>(&mut self, f: &F, y0: &[R]) -> Result<(), (usize, usize)> {
        f.eval(y0, &mut self.f0)
    }

    pub fn step<F: Rhs<R>>(&mut self, f: &F, y0: &[R], h: f64) -> Result<(), (usize, usize)> {
        let n = y0.len();
        let hr = R::of(h);
        let half = hr * R::of(0.5);
        self.k[0].copy_from_slice(&self.f0);
        for (s, c) in [(1, half), (2, half), (3, hr)] {
            for i in 0..n {
                self.tmp[i] = y0[i] + c * self.k[s - 1][i];
            }
            let (tmp, k) = (&self.tmp, &mut self.k);
            f.eval(tmp, &mut k[s])?;
        }
        let sixth = hr * R::of(6.0).inv();
        let two = R::of(2.0);
        for i in 0..n {
            self.y1[i] = y0[i]
                + sixth * (self.k[0][i] + two * self.k[1][i] + two * self.k[2][i] + self.k[3][i]);
        }
        f.eval(&self.y1, &mut self.f1)
    }

    pub fn dense(&self, y0: &[R], h: f64, out: &mut Vec<R>) {
        let n = y0.len();
        let hr = R::of(h);
        out.clear();
        out.resize(5 * n, R::zero());
        for i in 0..n {
            let r2 = self.y1[i] - y0[i];
            let r3 = hr * self.f0[i] - r2;
            out[i] = y0[i];
            out[n + i] = r2;
            out[2 * n + i] = r3;
            out[3 * n + i] = r2 - hr * self.f1[i] - r3;
        }
    }

    pub fn advance(&mut self) {
        std::mem::swap(&mut self.f0, &mut self.f1);
    }
}

/// `y(θ) = r1 + θ(r2 + θ′(r3 + θ(r4 + θ′ r5)))` with `θ′ = 1 − θ`.
#[inline]
pub(crate) fn interpolate<R: Real>(coeffs: &[R], theta: R, out: &mut [R]) {
    let n = out.len();
    let t1 = R::one() - theta;
    for i in 0..n {
        let r = |b: usize| coeffs[b * n + i];
        out[i] = r(0) + theta * (r(1) + t1 * (r(2) + theta * (r(3) + t1 * r(4))));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use twofloat::TwoFloat;

    /// `y″ = −y` as a first-order system.
    struct Oscillator;
    impl<R: Real> Rhs<R> for Oscillator {
        fn eval(&self, y: &[R], out: &mut [R]) -> Result<(), (usize, usize)> {
            out[0] = y[1];
            out[1] = -y[0];
            Ok(())
        }
    }

    #[test]
    fn tableau_rows_are_consistent() {
        let t = Tableau::<f64>::dormand_prince();
        let c = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
        let rows: [&[f64]; 6] = [&t.a2, &t.a3, &t.a4, &t.a5, &t.a6, &t.b];
        for (row, ci) in rows.iter().zip(c) {
            assert!((row.iter().sum::<f64>() - ci).abs() < 1e-14);
        }
        assert!(t.e.iter().sum::<f64>().abs() < 1e-15);
        assert!(t.d.iter().sum::<f64>().abs() < 1e-9);
    }

    fn dp_error_after<R: Real>(h: f64, steps: usize) -> f64 {
        let mut dp = DormandPrince::<R>::new(2);
        let mut y = vec![R::one(), R::zero()];
        dp.prime(&Oscillator, &y).unwrap();
        for _ in 0..steps {
            dp.attempt(&Oscillator, &y, h, 1e-10, 1e-10).unwrap();
            y.copy_from_slice(&dp.y1);
            dp.advance();
        }
        let t = h * steps as f64;
        (y[0].f64() - t.cos()).abs()
    }

    #[test]
    fn dormand_prince_is_fifth_order() {
        let e1 = dp_error_after::<f64>(0.1, 10);
        let e2 = dp_error_after::<f64>(0.05, 20);
        let order = (e1 / e2).log2();
        assert!((order - 5.0).abs() < 0.3, "observed order {order}");
        let dd = dp_error_after::<TwoFloat>(0.05, 20);
        assert!((dd - e2).abs() < 1e-3 * e2);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let run = |h: f64, steps: usize| {
            let mut rk = Rk4::<f64>::new(2);
            let mut y = vec![1.0, 0.0];
            rk.prime(&Oscillator, &y).unwrap();
            for _ in 0..steps {
                rk.step(&Oscillator, &y, h).unwrap();
                y.copy_from_slice(&rk.y1);
                rk.advance();
            }
            (y[0] - (h * steps as f64).cos()).abs()
        };
        let order = (run(0.1, 10) / run(0.05, 20)).log2();
        assert!((order - 4.0).abs() < 0.2, "observed order {order}");
    }

    #[test]
    fn dense_output_hits_endpoints_and_tracks_solution() {
        let h = 0.1;
        let y0 = vec![1.0, 0.0];
        let mut dp = DormandPrince::<f64>::new(2);
        dp.prime(&Oscillator, &y0).unwrap();
        dp.attempt(&Oscillator, &y0, h, 1e-10, 1e-10).unwrap();
        let mut c = Vec::new();
        dp.dense(&y0, h, &mut c);
        let mut out = [0.0; 2];
        interpolate(&c, 0.0, &mut out);
        assert_eq!(out, [1.0, 0.0]);
        interpolate(&c, 1.0, &mut out);
        assert_eq!(out[0], dp.y1[0]);
        for i in 1..10 {
            let th = i as f64 / 10.0;
            interpolate(&c, th, &mut out);
            assert!((out[0] - (th * h).cos()).abs() < 1e-8);
            assert!((out[1] + (th * h).sin()).abs() < 1e-8);
        }
    }
}
