use crate::error::{Error, Result};
use crate::field::Drift;
use crate::grid::Grid2D;

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    /// The last point lies outside the truncation box.
    pub escaped: bool,
}

impl Trajectory {
    pub fn end(&self) -> [f64; 2] {
        *self
            .points
            .last()
            .expect("trajectory holds the initial point")
    }
}

/// One classical RK4 step of `ẋ = sign · V(x)`.
#[inline]
pub fn rk4_step(v: &dyn Drift, x: [f64; 2], h: f64, sign: f64) -> [f64; 2] {
    let f = |p: [f64; 2]| {
        let d = v.eval(p[0], p[1]);
        [sign * d[0], sign * d[1]]
    };
    let k1 = f(x);
    let k2 = f([x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]]);
    let k3 = f([x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]]);
    let k4 = f([x[0] + h * k3[0], x[1] + h * k3[1]]);
    [
        x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Step count and step size covering `|t_end|` with steps no longer than `dt`.
pub(crate) fn steps_for(t_end: f64, dt: f64) -> (usize, f64) {
    let n = (t_end.abs() / dt).ceil().max(1.0) as usize;
    (n, t_end.abs() / n as f64)
}

/// RK4 trajectory of the flow up to time `t_end`; a negative `t_end`
/// integrates the time-reversed field. With `bounds`, leaving the box ends
/// the trajectory and sets `escaped`.
pub fn integrate_flow(
    v: &dyn Drift,
    x0: [f64; 2],
    t_end: f64,
    dt: f64,
    bounds: Option<&Grid2D>,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !t_end.is_finite() || t_end == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and finite non-zero t_end (dt = {dt}, t_end = {t_end})"
        )));
    }
    let sign = t_end.signum();
    let (n, h) = steps_for(t_end, dt);
    let mut times = Vec::with_capacity(n + 1);
    let mut points = Vec::with_capacity(n + 1);
    times.push(0.0);
    points.push(x0);
    let mut x = x0;
    for s in 1..=n {
        x = rk4_step(v, x, h, sign);
        let t = sign * s as f64 * h;
        if !(x[0].is_finite() && x[1].is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        times.push(t);
        points.push(x);
        if bounds.is_some_and(|g| !g.contains(x[0], x[1])) {
            return Ok(Trajectory {
                times,
                points,
                escaped: true,
            });
        }
    }
    Ok(Trajectory {
        times,
        points,
        escaped: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hopf(b: f64) -> impl Fn(f64, f64) -> [f64; 2] {
        move |x, y| {
            let r2 = x * x + y * y;
            [b * x - y - x * r2, x + b * y - y * r2]
        }
    }

    #[test]
    fn linear_contraction() {
        let t = integrate_flow(&|x: f64, y: f64| [-x, -y], [1.0, 1.0], 5.0, 0.01, None).unwrap();
        let e = t.end();
        assert!(e[0].hypot(e[1]) < 1e-2);
        assert!((e[0] - (-5f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn hopf_endpoints() {
        let t = integrate_flow(&hopf(1.0), [0.1, 0.0], 30.0, 0.01, None).unwrap();
        let e = t.end();
        assert!((e[0].hypot(e[1]) - 1.0).abs() < 1e-2);
        let t = integrate_flow(&hopf(-0.5), [1.0, 0.0], 30.0, 0.01, None).unwrap();
        let e = t.end();
        assert!(e[0].hypot(e[1]) < 1e-2);
    }

    #[test]
    fn reversed_time_escapes() {
        let g = Grid2D::square(2.0, 16).unwrap();
        let t = integrate_flow(&hopf(1.0), [1.2, 0.0], -10.0, 0.01, Some(&g)).unwrap();
        assert!(t.escaped);
        assert!(t.times.last().unwrap() < &0.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let v = |x: f64, y: f64| [-x, -y];
        assert!(integrate_flow(&v, [0.0, 0.0], 1.0, 0.0, None).is_err());
        assert!(integrate_flow(&v, [0.0, 0.0], 0.0, 0.1, None).is_err());
        let blow = |x: f64, _y: f64| [x * x * x * x, 0.0];
        assert!(matches!(
            integrate_flow(&blow, [10.0, 0.0], 10.0, 0.1, None),
            Err(Error::NonFiniteState { .. })
        ));
    }
}
