//! Design-rule validation: electrode separation and field stress.
//!
//! Two report-only rules from the breakdown constraints: electrodes must be
//! separated by at least 1 mm, and the field stress between neighbouring
//! electrodes must stay below 1 kV/mm. Structural problems (overlaps,
//! electrodes outside the enclosure) are also reported and additionally
//! block [`build_domain`](super::build_domain).

use super::*;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Structural defect; the spec cannot be rasterized.
    Geometry,
    /// Separation below the 1 mm design rule.
    Separation,
    /// Field stress above 1 kV/mm.
    FieldStress,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub a: String,
    pub b: String,
    /// Measured value: gap [m] for separation, stress [V/m] for field rules.
    pub value: f64,
    pub limit: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

/// Axial gap between two electrode defs [m], negative if extents overlap.
fn axial_gap(a: &ElectrodeDef, b: &ElectrodeDef) -> f64 {
    let (alo, ahi) = a.shape.z_range(a.z_top);
    let (blo, bhi) = b.shape.z_range(b.z_top);
    if ahi < blo {
        blo - ahi
    } else if bhi < alo {
        alo - bhi
    } else {
        // overlap depth as a negative gap
        -(ahi.min(bhi) - alo.max(blo))
    }
}

/// Check the spec against the structural and separation rules.
pub fn validate_spec(spec: &GeometrySpec) -> ValidationReport {
    let mut rep = ValidationReport::default();

    for def in &spec.electrodes {
        let (zlo, zhi) = def.shape.z_range(def.z_top);
        if zhi > 1e-12 || zlo < -spec.domain_length - 1e-12 {
            rep.violations.push(Violation {
                kind: ViolationKind::Geometry,
                a: def.id.clone(),
                b: "domain".into(),
                value: zlo,
                limit: -spec.domain_length,
                message: format!("electrode '{}' extends outside the domain length", def.id),
            });
        }
        if let Some(rmax) = def.shape.max_radius() {
            if rmax > spec.domain_radius + 1e-12 {
                rep.violations.push(Violation {
                    kind: ViolationKind::Geometry,
                    a: def.id.clone(),
                    b: "enclosure".into(),
                    value: rmax,
                    limit: spec.domain_radius,
                    message: format!(
                        "electrode '{}' does not fit inside the grounded enclosure",
                        def.id
                    ),
                });
            }
        }
        if let ElectrodeShape::AnnularPlate {
            bore_radius,
            outer_radius,
            ..
        } = def.shape
        {
            if bore_radius >= outer_radius {
                rep.violations.push(Violation {
                    kind: ViolationKind::Geometry,
                    a: def.id.clone(),
                    b: def.id.clone(),
                    value: bore_radius,
                    limit: outer_radius,
                    message: format!("electrode '{}' bore exceeds its outer radius", def.id),
                });
            }
        }
    }

    if let Some(reg) = &spec.refined {
        if reg.z_min < -spec.domain_length - 1e-12
            || reg.z_max > 1e-12
            || reg.z_min >= reg.z_max
            || reg.half_width > spec.domain_radius
        {
            rep.violations.push(Violation {
                kind: ViolationKind::Geometry,
                a: "refined".into(),
                b: "domain".into(),
                value: reg.z_min,
                limit: -spec.domain_length,
                message: "refined region extends outside the domain".into(),
            });
        }
    }

    for i in 0..spec.electrodes.len() {
        for j in i + 1..spec.electrodes.len() {
            let (a, b) = (&spec.electrodes[i], &spec.electrodes[j]);
            let gap = axial_gap(a, b);
            if gap < 0.0 {
                rep.violations.push(Violation {
                    kind: ViolationKind::Geometry,
                    a: a.id.clone(),
                    b: b.id.clone(),
                    value: gap,
                    limit: 0.0,
                    message: format!("axial extents of '{}' and '{}' overlap", a.id, b.id),
                });
            } else if gap < MIN_SEPARATION - 1e-12 {
                rep.violations.push(Violation {
                    kind: ViolationKind::Separation,
                    a: a.id.clone(),
                    b: b.id.clone(),
                    value: gap,
                    limit: MIN_SEPARATION,
                    message: format!(
                        "'{}' and '{}' are {:.3} mm apart (< 1 mm rule)",
                        a.id,
                        b.id,
                        gap * 1e3
                    ),
                });
            }
        }
    }

    rep
}

/// Check a voltage assignment against the 1 kV/mm stress rule.
///
/// `voltages` maps expanded electrode names (`extractor_1`, `cone`, ...) to
/// volts; missing electrodes count as 0 V. Stress between groups uses their
/// axial gap; within a segmented group, neighbouring segments sit one gap
/// width apart and opposing segments sqrt(2) gap widths apart.
pub fn validate_voltages(
    spec: &GeometrySpec,
    voltages: &BTreeMap<String, f64>,
) -> ValidationReport {
    let mut rep = validate_spec(spec);
    let volt = |def: &ElectrodeDef, seg: Option<u8>| -> f64 {
        let name = match seg {
            Some(k) => format!("{}_{k}", def.id),
            None => def.id.clone(),
        };
        voltages.get(&name).copied().unwrap_or(0.0)
    };
    let segs = |def: &ElectrodeDef| -> Vec<Option<u8>> {
        match def.shape.segments() {
            Some(_) => (1..=4).map(Some).collect(),
            None => vec![None],
        }
    };

    // Between groups: worst segment pair across the axial gap.
    for i in 0..spec.electrodes.len() {
        for j in i + 1..spec.electrodes.len() {
            let (a, b) = (&spec.electrodes[i], &spec.electrodes[j]);
            let gap = axial_gap(a, b);
            if gap <= 0.0 {
                continue;
            }
            let mut worst = 0.0f64;
            for sa in segs(a) {
                for sb in segs(b) {
                    worst = worst.max((volt(a, sa) - volt(b, sb)).abs());
                }
            }
            let stress = worst / gap;
            if stress > MAX_FIELD_STRESS {
                rep.violations.push(Violation {
                    kind: ViolationKind::FieldStress,
                    a: a.id.clone(),
                    b: b.id.clone(),
                    value: stress,
                    limit: MAX_FIELD_STRESS,
                    message: format!(
                        "field stress between '{}' and '{}' is {:.0} V/mm (> 1000 V/mm)",
                        a.id,
                        b.id,
                        stress * 1e-3
                    ),
                });
            }
        }
    }

    // Within segmented groups.
    for def in &spec.electrodes {
        let Some(cut) = def.shape.segments() else {
            continue;
        };
        let pairs = [(1u8, 2u8, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 1, 1.0),
                     (1, 3, std::f64::consts::SQRT_2), (2, 4, std::f64::consts::SQRT_2)];
        for (sa, sb, scale) in pairs {
            let d = cut.gap * scale;
            let stress = (volt(def, Some(sa)) - volt(def, Some(sb))).abs() / d;
            if stress > MAX_FIELD_STRESS {
                rep.violations.push(Violation {
                    kind: ViolationKind::FieldStress,
                    a: format!("{}_{sa}", def.id),
                    b: format!("{}_{sb}", def.id),
                    value: stress,
                    limit: MAX_FIELD_STRESS,
                    message: format!(
                        "field stress between segments {sa} and {sb} of '{}' is {:.0} V/mm",
                        def.id,
                        stress * 1e-3
                    ),
                });
            }
        }
    }

    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(groups: &[(&str, f64, bool)]) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        for (g, v, segmented) in groups {
            if *segmented {
                for k in 1..=4 {
                    m.insert(format!("{g}_{k}"), *v);
                }
            } else {
                m.insert((*g).to_string(), *v);
            }
        }
        m
    }

    fn working_point() -> BTreeMap<String, f64> {
        named(&[
            ("chip", 0.0, false),
            ("extractor", -50.0, true),
            ("cone", -1000.0, false),
            ("drift_tube", -2000.0, true),
            ("cem_plate", -2300.0, false),
        ])
    }

    #[test]
    fn paper_working_point_is_clean() {
        let spec = GeometrySpec::paper_default();
        let rep = validate_voltages(&spec, &working_point());
        assert!(rep.is_clean(), "unexpected violations: {:#?}", rep.violations);
    }

    #[test]
    fn half_millimeter_plates_violate_separation() {
        let plate = |id: &str, z_top: f64| ElectrodeDef {
            id: id.into(),
            z_top,
            shape: ElectrodeShape::AnnularPlate {
                thickness: 1e-3,
                bore_radius: 1e-3,
                outer_radius: 8e-3,
                segments: None,
            },
        };
        let spec = GeometrySpec {
            version: 1,
            domain_radius: 10e-3,
            domain_length: 20e-3,
            coarse_spacing: 0.25e-3,
            refined: None,
            electrodes: vec![plate("a", -5e-3), plate("b", -6.5e-3)],
        };
        let rep = validate_spec(&spec);
        assert!(rep.has(ViolationKind::Separation));
        assert!(!rep.has(ViolationKind::Geometry));
    }

    #[test]
    fn overstressed_cone_is_flagged() {
        // Extractor -50 V, cone -1200 V across the 1 mm gap: 1150 V/mm.
        let spec = GeometrySpec::paper_default();
        let mut v = working_point();
        v.insert("cone".into(), -1200.0);
        let rep = validate_voltages(&spec, &v);
        assert!(rep.has(ViolationKind::FieldStress));
        let viol = rep
            .violations
            .iter()
            .find(|v| v.kind == ViolationKind::FieldStress)
            .unwrap();
        assert!((viol.value - 1.15e6).abs() < 1e3);
    }

    #[test]
    fn exactly_1000_v_per_mm_passes() {
        // cone -1000 V to drift tube -2000 V across 1 mm sits exactly at the
        // limit and must not be flagged.
        let spec = GeometrySpec::paper_default();
        let rep = validate_voltages(&spec, &working_point());
        assert!(!rep.has(ViolationKind::FieldStress));
    }

    #[test]
    fn quadrupole_overdrive_is_flagged_within_group() {
        let spec = GeometrySpec::paper_default();
        let mut v = working_point();
        // U_QP = -700 V on the drift tube: neighbouring segments differ by
        // 1400 V across the 1 mm gap.
        v.insert("drift_tube_1".into(), -2700.0);
        v.insert("drift_tube_3".into(), -2700.0);
        v.insert("drift_tube_2".into(), -1300.0);
        v.insert("drift_tube_4".into(), -1300.0);
        let rep = validate_voltages(&spec, &v);
        assert!(rep.has(ViolationKind::FieldStress));
    }
}
