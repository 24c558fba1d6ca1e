//! Integration kernels: embedded Dormand-Prince 5(4) for electric-only
//! motion and a Boris rotation step for motion in magnetic fields.

/// Phase-space state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub pos: [f64; 3],
    pub vel: [f64; 3],
}

#[derive(Debug, Clone, Copy)]
pub struct Deriv {
    pub dpos: [f64; 3],
    pub dvel: [f64; 3],
}

fn axpy(y: &State, h: f64, stages: &[(&Deriv, f64)]) -> State {
    let mut out = *y;
    for (k, c) in stages {
        for i in 0..3 {
            out.pos[i] += h * c * k.dpos[i];
            out.vel[i] += h * c * k.dvel[i];
        }
    }
    out
}

/// Result of one embedded step attempt.
pub struct StepResult {
    pub y: State,
    /// Max component of |error| / (atol + rtol |y|).
    pub error_norm: f64,
}

/// One Dormand-Prince 5(4) step of size `h` from (t, y).
pub fn dopri5_step<F>(f: &F, t: f64, y: &State, h: f64, tol: &ErrorTolerances) -> StepResult
where
    F: Fn(f64, &State) -> Deriv,
{
    // Dormand & Prince (1980) coefficients.
    const C2: f64 = 1.0 / 5.0;
    const C3: f64 = 3.0 / 10.0;
    const C4: f64 = 4.0 / 5.0;
    const C5: f64 = 8.0 / 9.0;
    let k1 = f(t, y);
    let k2 = f(t + C2 * h, &axpy(y, h, &[(&k1, 1.0 / 5.0)]));
    let k3 = f(
        t + C3 * h,
        &axpy(y, h, &[(&k1, 3.0 / 40.0), (&k2, 9.0 / 40.0)]),
    );
    let k4 = f(
        t + C4 * h,
        &axpy(
            y,
            h,
            &[(&k1, 44.0 / 45.0), (&k2, -56.0 / 15.0), (&k3, 32.0 / 9.0)],
        ),
    );
    let k5 = f(
        t + C5 * h,
        &axpy(
            y,
            h,
            &[
                (&k1, 19372.0 / 6561.0),
                (&k2, -25360.0 / 2187.0),
                (&k3, 64448.0 / 6561.0),
                (&k4, -212.0 / 729.0),
            ],
        ),
    );
    let k6 = f(
        t + h,
        &axpy(
            y,
            h,
            &[
                (&k1, 9017.0 / 3168.0),
                (&k2, -355.0 / 33.0),
                (&k3, 46732.0 / 5247.0),
                (&k4, 49.0 / 176.0),
                (&k5, -5103.0 / 18656.0),
            ],
        ),
    );
    // 5th-order solution
    let y5 = axpy(
        y,
        h,
        &[
            (&k1, 35.0 / 384.0),
            (&k3, 500.0 / 1113.0),
            (&k4, 125.0 / 192.0),
            (&k5, -2187.0 / 6784.0),
            (&k6, 11.0 / 84.0),
        ],
    );
    let k7 = f(t + h, &y5);
    // embedded 4th-order solution
    let y4 = axpy(
        y,
        h,
        &[
            (&k1, 5179.0 / 57600.0),
            (&k3, 7571.0 / 16695.0),
            (&k4, 393.0 / 640.0),
            (&k5, -92097.0 / 339200.0),
            (&k6, 187.0 / 2100.0),
            (&k7, 1.0 / 40.0),
        ],
    );
    let mut error_norm = 0.0f64;
    for i in 0..3 {
        let ep = (y5.pos[i] - y4.pos[i]).abs()
            / (tol.abs_pos + tol.rel * y5.pos[i].abs().max(y.pos[i].abs()));
        let ev = (y5.vel[i] - y4.vel[i]).abs()
            / (tol.abs_vel + tol.rel * y5.vel[i].abs().max(y.vel[i].abs()));
        error_norm = error_norm.max(ep).max(ev);
    }
    StepResult {
        y: y5,
        error_norm,
    }
}

/// Classic fixed-size RK4 step; used for event-localization substeps.
pub fn rk4_step<F>(f: &F, t: f64, y: &State, h: f64) -> State
where
    F: Fn(f64, &State) -> Deriv,
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, h, &[(&k1, 0.5)]));
    let k3 = f(t + 0.5 * h, &axpy(y, h, &[(&k2, 0.5)]));
    let k4 = f(t + h, &axpy(y, h, &[(&k3, 1.0)]));
    axpy(
        y,
        h,
        &[
            (&k1, 1.0 / 6.0),
            (&k2, 1.0 / 3.0),
            (&k3, 1.0 / 3.0),
            (&k4, 1.0 / 6.0),
        ],
    )
}

#[derive(Debug, Clone, Copy)]
pub struct ErrorTolerances {
    pub rel: f64,
    pub abs_pos: f64,
    pub abs_vel: f64,
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// One Boris step: half electric kick, exact magnetic rotation, half kick,
/// then drift. The rotation uses the exact angle `(q|B|/m) dt`, so a pure
/// cyclotron orbit is reproduced to rounding.
pub fn boris_step(
    pos: &mut [f64; 3],
    vel: &mut [f64; 3],
    q_over_m: f64,
    e: [f64; 3],
    b: [f64; 3],
    dt: f64,
) {
    let half = 0.5 * dt * q_over_m;
    let mut v_minus = [0.0; 3];
    for i in 0..3 {
        v_minus[i] = vel[i] + half * e[i];
    }
    let b_mag = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    let v_plus = if b_mag > 0.0 {
        let theta_half = 0.5 * q_over_m * b_mag * dt;
        let tb = theta_half.tan() / b_mag;
        let t = [b[0] * tb, b[1] * tb, b[2] * tb];
        let t2 = t[0] * t[0] + t[1] * t[1] + t[2] * t[2];
        let s = 2.0 / (1.0 + t2);
        let vxt = cross(v_minus, t);
        let v_prime = [
            v_minus[0] + vxt[0],
            v_minus[1] + vxt[1],
            v_minus[2] + vxt[2],
        ];
        let vpxt = cross(v_prime, t);
        [
            v_minus[0] + s * vpxt[0],
            v_minus[1] + s * vpxt[1],
            v_minus[2] + s * vpxt[2],
        ]
    } else {
        v_minus
    };
    for i in 0..3 {
        vel[i] = v_plus[i] + half * e[i];
        pos[i] += vel[i] * dt;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dopri5_integrates_harmonic_oscillator() {
        // x'' = -x, x(0)=1, v(0)=0 -> x(t)=cos t
        let f = |_t: f64, y: &State| Deriv {
            dpos: y.vel,
            dvel: [-y.pos[0], 0.0, 0.0],
        };
        let tol = ErrorTolerances {
            rel: 1e-10,
            abs_pos: 1e-12,
            abs_vel: 1e-12,
        };
        let mut y = State {
            pos: [1.0, 0.0, 0.0],
            vel: [0.0, 0.0, 0.0],
        };
        let mut t = 0.0;
        let mut h = 1e-3f64;
        while t < 10.0 {
            let h_eff = h.min(10.0 - t);
            let r = dopri5_step(&f, t, &y, h_eff, &tol);
            if r.error_norm <= 1.0 {
                y = r.y;
                t += h_eff;
            }
            let fac = (0.9 * r.error_norm.max(1e-12).powf(-0.2)).clamp(0.2, 5.0);
            h = (h_eff * fac).max(1e-9);
        }
        assert!((y.pos[0] - 10.0f64.cos()).abs() < 1e-7);
        assert!((y.vel[0] + 10.0f64.sin()).abs() < 1e-7);
    }

    #[test]
    fn boris_pure_rotation_is_exact() {
        let q_over_m = 2.5;
        let b = [0.0, 0.0, 1.3];
        let period = 2.0 * std::f64::consts::PI / (q_over_m * b[2]);
        let n = 48;
        let dt = period / n as f64;
        let mut pos = [0.0; 3];
        let mut vel = [7.0, 0.0, 0.0];
        for _ in 0..n {
            boris_step(&mut pos, &mut vel, q_over_m, [0.0; 3], b, dt);
        }
        // velocity returns exactly, position closes the polygon
        assert!((vel[0] - 7.0).abs() < 1e-9);
        assert!(vel[1].abs() < 1e-9);
        assert!(pos[0].abs() < 1e-9 && pos[1].abs() < 1e-9);
    }
}
