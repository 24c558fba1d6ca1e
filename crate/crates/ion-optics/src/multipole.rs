//! Segment-voltage multipole algebra for four-quadrant electrodes.
//!
//! A four-segment electrode carries voltages `U1..U4`, with segments 1/3
//! opposing along x and 2/4 opposing along y (segment 1 centered on +x).
//! Any such quadruple decomposes exactly into a monopole `U`, a dipole
//! `(U_X, U_Y)` and a quadrupole `U_QP`:
//!
//! ```text
//! U    = (U1 + U2 + U3 + U4) / 4
//! U_X  = (U1 - U3) / 2          U_Y = (U2 - U4) / 2
//! U_QP = (U1 + U3 - U2 - U4) / 4
//! ```
//!
//! [`compose`] is the exact inverse. The near-axis field produced by each
//! term is only proportional to the respective voltage; the constants depend
//! on the electrode geometry, so [`ideal_near_axis_field`] takes them as
//! [`FieldCalibration`] factors to be fitted once from a solved field.

use serde::{Deserialize, Serialize};

/// Voltages on the four segments of a quadrant electrode, in segment order.
///
/// Sign conventions for the segment indices follow the quadrant layout:
/// segment 1 at +x, 2 at +y, 3 at -x, 4 at -y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentVoltages(pub [f64; 4]);

impl SegmentVoltages {
    /// All four segments at the same voltage (pure monopole).
    pub fn uniform(u: f64) -> Self {
        SegmentVoltages([u; 4])
    }
}

impl From<[f64; 4]> for SegmentVoltages {
    fn from(v: [f64; 4]) -> Self {
        SegmentVoltages(v)
    }
}

/// Monopole/dipole/quadrupole decomposition of four segment voltages [V].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultipoleSet {
    /// Monopole term: mean voltage.
    pub u: f64,
    /// Dipole term along x.
    pub u_x: f64,
    /// Dipole term along y.
    pub u_y: f64,
    /// Quadrupole term.
    pub u_qp: f64,
}

impl MultipoleSet {
    pub fn new(u: f64, u_x: f64, u_y: f64, u_qp: f64) -> Self {
        MultipoleSet { u, u_x, u_y, u_qp }
    }

    pub fn monopole(u: f64) -> Self {
        MultipoleSet::new(u, 0.0, 0.0, 0.0)
    }

    /// Dipole magnitude `U_XY = sqrt(U_X^2 + U_Y^2)`.
    pub fn u_xy(&self) -> f64 {
        self.u_x.hypot(self.u_y)
    }

    /// Dipole direction `alpha = atan2(U_Y, U_X)` [rad].
    pub fn alpha(&self) -> f64 {
        self.u_y.atan2(self.u_x)
    }

    /// Build a dipole of magnitude `u_xy` pointing along `alpha` [rad].
    pub fn dipole(u_xy: f64, alpha: f64) -> Self {
        MultipoleSet::new(0.0, u_xy * alpha.cos(), u_xy * alpha.sin(), 0.0)
    }
}

impl std::ops::Add for MultipoleSet {
    type Output = MultipoleSet;
    fn add(self, o: MultipoleSet) -> MultipoleSet {
        MultipoleSet::new(
            self.u + o.u,
            self.u_x + o.u_x,
            self.u_y + o.u_y,
            self.u_qp + o.u_qp,
        )
    }
}

/// Decompose segment voltages into multipole terms.
pub fn decompose(sv: SegmentVoltages) -> MultipoleSet {
    let [u1, u2, u3, u4] = sv.0;
    MultipoleSet {
        u: 0.25 * (u1 + u2 + u3 + u4),
        u_x: 0.5 * (u1 - u3),
        u_y: 0.5 * (u2 - u4),
        u_qp: 0.25 * ((u1 + u3) - (u2 + u4)),
    }
}

/// Compose multipole terms back into segment voltages.
///
/// Exact right- and left-inverse of [`decompose`].
pub fn compose(ms: MultipoleSet) -> SegmentVoltages {
    SegmentVoltages([
        ms.u + ms.u_x + ms.u_qp,
        ms.u + ms.u_y - ms.u_qp,
        ms.u - ms.u_x + ms.u_qp,
        ms.u - ms.u_y - ms.u_qp,
    ])
}

/// Geometry-dependent proportionality constants of the near-axis field
/// terms. The analytic formulas fix only the functional form; magnitudes
/// (and signs) must be fitted once against a solved field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldCalibration {
    /// Axial field per monopole volt [V/m per V].
    pub axial_per_volt: f64,
    /// Transverse field per dipole volt [V/m per V].
    pub dipole_per_volt: f64,
    /// Quadrupole field gradient per volt [V/m per V per m].
    pub quad_per_volt: f64,
}

impl Default for FieldCalibration {
    fn default() -> Self {
        FieldCalibration {
            axial_per_volt: 1.0,
            dipole_per_volt: 1.0,
            quad_per_volt: 1.0,
        }
    }
}

/// Ideal near-axis electric field of a segmented electrode [V/m].
///
/// Superposition of the three analytic terms at `position` (relative to the
/// electrode center):
///
/// * axial: `E_z = c_mono * U`,
/// * radial focusing from the axial gradient: `E_r = -(r/2) dE_z/dz`,
/// * homogeneous dipole: `E_xy = c_dip * (U_X, U_Y)`,
/// * planar quadrupole: `E = c_qp * U_QP * (-x, y, 0)`.
///
/// `axial_gradient` is `dE_z/dz` on the axis at the evaluation plane.
pub fn ideal_near_axis_field(
    ms: &MultipoleSet,
    position: [f64; 3],
    axial_gradient: f64,
    cal: &FieldCalibration,
) -> [f64; 3] {
    let [x, y, _z] = position;
    let ex = -0.5 * x * axial_gradient + cal.dipole_per_volt * ms.u_x
        + cal.quad_per_volt * ms.u_qp * (-x);
    let ey = -0.5 * y * axial_gradient + cal.dipole_per_volt * ms.u_y
        + cal.quad_per_volt * ms.u_qp * y;
    let ez = cal.axial_per_volt * ms.u;
    [ex, ey, ez]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn equal_segments_are_pure_monopole() {
        let ms = decompose(SegmentVoltages::uniform(5.0));
        assert_eq!(ms, MultipoleSet::new(5.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn alternating_signs_are_pure_quadrupole() {
        let ms = decompose(SegmentVoltages([1.0, -1.0, 1.0, -1.0]));
        assert_eq!(ms, MultipoleSet::new(0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn extractor_alignment_voltages_decompose() {
        // The image-alignment demonstration drives the extractor with
        // (-55, -55, -45, -45) V: mean -50 V plus a diagonal -5 V dipole.
        let ms = decompose(SegmentVoltages([-55.0, -55.0, -45.0, -45.0]));
        assert_eq!(ms, MultipoleSet::new(-50.0, -5.0, -5.0, 0.0));
    }

    #[test]
    fn quadrupole_on_drift_tube_composes() {
        let sv = compose(MultipoleSet::new(-2000.0, 0.0, 0.0, -700.0));
        assert_eq!(sv.0, [-2700.0, -1300.0, -2700.0, -1300.0]);
    }

    #[test]
    fn zero_is_zero() {
        assert_eq!(compose(MultipoleSet::new(0.0, 0.0, 0.0, 0.0)).0, [0.0; 4]);
    }

    #[test]
    fn dipole_diagonal_angle() {
        let ms = MultipoleSet::new(0.0, 3.0, 3.0, 0.0);
        assert!(close(ms.alpha().to_degrees(), 45.0, 1e-12));
        assert!(close(ms.u_xy(), 3.0 * std::f64::consts::SQRT_2, 1e-12));
    }

    #[test]
    fn pure_monopole_zero_gradient_has_no_radial_field() {
        let e = ideal_near_axis_field(
            &MultipoleSet::monopole(7.0),
            [1e-3, -2e-3, 0.0],
            0.0,
            &FieldCalibration::default(),
        );
        assert_eq!(e[0], 0.0);
        assert_eq!(e[1], 0.0);
        assert_eq!(e[2], 7.0);
    }

    #[test]
    fn pure_quadrupole_axes() {
        let cal = FieldCalibration::default();
        let ms = MultipoleSet::new(0.0, 0.0, 0.0, 2.0);
        let ex = ideal_near_axis_field(&ms, [1e-3, 0.0, 0.0], 0.0, &cal);
        assert!(close(ex[0], -2e-3, 1e-15) && ex[1] == 0.0);
        let ey = ideal_near_axis_field(&ms, [0.0, 1e-3, 0.0], 0.0, &cal);
        assert!(ey[0] == 0.0 && close(ey[1], 2e-3, 1e-15));
    }

    #[test]
    fn radial_term_matches_gradient_formula() {
        let cal = FieldCalibration::default();
        let g = 250.0; // dEz/dz
        let e = ideal_near_axis_field(&MultipoleSet::monopole(1.0), [2e-3, 1e-3, 0.0], g, &cal);
        assert!(close(e[0], -0.5 * 2e-3 * g, 1e-12));
        assert!(close(e[1], -0.5 * 1e-3 * g, 1e-12));
    }

    proptest! {
        #[test]
        fn decompose_compose_roundtrip(v in prop::array::uniform4(-5e3f64..5e3)) {
            let ms = decompose(SegmentVoltages(v));
            let back = compose(ms);
            for i in 0..4 {
                prop_assert!(close(back.0[i], v[i], 1e-9 * v[i].abs().max(1.0)));
            }
            // and the other direction
            let ms2 = decompose(back);
            prop_assert!(close(ms2.u, ms.u, 1e-9 * ms.u.abs().max(1.0)));
            prop_assert!(close(ms2.u_qp, ms.u_qp, 1e-9 * ms.u_qp.abs().max(1.0)));
        }

        #[test]
        fn decompose_is_linear(
            a in prop::array::uniform4(-1e3f64..1e3),
            b in prop::array::uniform4(-1e3f64..1e3),
            s in -10.0f64..10.0,
        ) {
            let sum: [f64; 4] = std::array::from_fn(|i| a[i] + s * b[i]);
            let lhs = decompose(SegmentVoltages(sum));
            let da = decompose(SegmentVoltages(a));
            let db = decompose(SegmentVoltages(b));
            prop_assert!(close(lhs.u, da.u + s * db.u, 1e-6));
            prop_assert!(close(lhs.u_x, da.u_x + s * db.u_x, 1e-6));
            prop_assert!(close(lhs.u_y, da.u_y + s * db.u_y, 1e-6));
            prop_assert!(close(lhs.u_qp, da.u_qp + s * db.u_qp, 1e-6));
        }
    }
}
