//! Rasterization of a [`GeometrySpec`] into labeled grids.

use super::*;
use crate::exec::{self, ExecMode};

/// Expanded electrode: membership test data for one solvable electrode.
struct SolidElectrode {
    info: ElectrodeInfo,
    z_top: f64,
    shape: ElectrodeShape,
    /// Segment this expanded electrode represents (for segmented shapes).
    segment: Option<u8>,
}

impl SolidElectrode {
    /// Node-center membership. `layer_half` is half the node spacing of the
    /// grid being rasterized (plane-like shapes occupy one node layer).
    /// Boundary ties resolve to the electrode.
    fn contains(&self, p: [f64; 3], layer_half: f64, domain_radius: f64) -> bool {
        let [x, y, z] = p;
        let r = x.hypot(y);
        match &self.shape {
            ElectrodeShape::Plane { radius } => {
                (z - self.z_top).abs() <= layer_half && r <= radius.unwrap_or(domain_radius)
            }
            ElectrodeShape::CemPlate { radius, .. } => {
                (z - self.z_top).abs() <= layer_half && r <= radius.unwrap_or(domain_radius)
            }
            ElectrodeShape::AnnularPlate {
                thickness,
                bore_radius,
                outer_radius,
                segments,
            } => {
                if z > self.z_top || z < self.z_top - thickness {
                    return false;
                }
                if r < *bore_radius || r > *outer_radius {
                    return false;
                }
                self.segment_matches(x, y, segments)
            }
            ElectrodeShape::Cone {
                entrance_radius,
                exit_radius,
                length,
                outer_radius,
            } => {
                if z > self.z_top || z < self.z_top - length {
                    return false;
                }
                let t = (self.z_top - z) / length;
                let r_in = entrance_radius + t * (exit_radius - entrance_radius);
                r >= r_in && r <= *outer_radius
            }
            ElectrodeShape::Tube {
                length,
                inner_radius,
                wall_thickness,
                segments,
            } => {
                if z > self.z_top || z < self.z_top - length {
                    return false;
                }
                if r < *inner_radius || r > *inner_radius + wall_thickness {
                    return false;
                }
                self.segment_matches(x, y, segments)
            }
        }
    }

    fn segment_matches(&self, x: f64, y: f64, segments: &Option<SegmentCut>) -> bool {
        match (segments, self.segment) {
            (Some(cut), Some(seg)) => segment_of(x, y, cut.gap) == Some(seg),
            (None, None) => true,
            _ => false,
        }
    }
}

fn expand_electrodes(spec: &GeometrySpec) -> Vec<SolidElectrode> {
    let mut out = Vec::new();
    for def in &spec.electrodes {
        match def.shape.segments() {
            Some(_) => {
                for seg in 1..=4u8 {
                    out.push(SolidElectrode {
                        info: ElectrodeInfo {
                            name: format!("{}_{seg}", def.id),
                            group: def.id.clone(),
                            segment: Some(seg),
                        },
                        z_top: def.z_top,
                        shape: def.shape.clone(),
                        segment: Some(seg),
                    });
                }
            }
            None => out.push(SolidElectrode {
                info: ElectrodeInfo {
                    name: def.id.clone(),
                    group: def.id.clone(),
                    segment: None,
                },
                z_top: def.z_top,
                shape: def.shape.clone(),
                segment: None,
            }),
        }
    }
    out
}

fn divides(extent: f64, spacing: f64) -> Option<usize> {
    let n = extent / spacing;
    let rounded = n.round();
    if (n - rounded).abs() < 1e-6 && rounded >= 1.0 {
        Some(rounded as usize)
    } else {
        None
    }
}

struct GridExtents {
    nx: usize,
    ny: usize,
    nz: usize,
    spacing: f64,
    origin: [f64; 3],
    /// Nodes on the lateral faces of this grid are refined-region interface
    /// nodes rather than domain boundary.
    is_refined: bool,
}

fn rasterize(
    ext: &GridExtents,
    solids: &[SolidElectrode],
    domain_radius: f64,
    domain_length: f64,
) -> LabeledGrid {
    let (nx, ny, nz) = (ext.nx, ext.ny, ext.nz);
    let mut labels = vec![LABEL_FREE; nx * ny * nz];
    let h = ext.spacing;
    let layer_half = 0.5 * h;
    let plane = nx * ny;
    // Transverse coordinates are measured from the axis as h * (i - c), so
    // mirrored nodes get exactly negated coordinates and membership ties
    // break identically on all four quadrants.
    let cx = (nx - 1) as f64 / 2.0;
    let cy = (ny - 1) as f64 / 2.0;
    // Pre-filter solids per z-layer by axial range.
    exec::for_chunks_mut(ExecMode::Auto, &mut labels, plane, |start, chunk| {
        let iz = start / plane;
        let z = ext.origin[2] + h * iz as f64;
        let active: Vec<(usize, &SolidElectrode)> = solids
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                let (lo, hi) = s.shape.z_range(s.z_top);
                z >= lo - layer_half - 1e-12 && z <= hi + layer_half + 1e-12
            })
            .collect();
        for iy in 0..ny {
            let y = h * (iy as f64 - cy);
            for ix in 0..nx {
                let x = h * (ix as f64 - cx);
                let p = [x, y, z];
                let r = x.hypot(y);
                let mut label = LABEL_FREE;
                for (e, s) in &active {
                    if s.contains(p, layer_half, domain_radius) {
                        label = LABEL_ELECTRODE_BASE + *e as u8;
                        break;
                    }
                }
                if label == LABEL_FREE {
                    let on_face = ix == 0
                        || iy == 0
                        || iz == 0
                        || ix == nx - 1
                        || iy == ny - 1
                        || iz == nz - 1;
                    if r >= domain_radius - 1e-12
                        || z <= -domain_length + 1e-12
                        || z >= -1e-12
                    {
                        label = LABEL_GROUND;
                    } else if on_face {
                        label = if ext.is_refined {
                            LABEL_INTERFACE
                        } else {
                            LABEL_GROUND
                        };
                    }
                }
                chunk[ix + nx * iy] = label;
            }
        }
    });
    LabeledGrid {
        nx,
        ny,
        nz,
        spacing: h,
        origin: ext.origin,
        labels,
    }
}

/// Rasterize `spec` into a [`VoxelDomain`].
///
/// Fails on structural problems: overlapping electrode extents, electrodes
/// not fitting inside the enclosure, a refined region outside the domain,
/// spacings that do not divide the region extents, or an electrode that
/// rasterizes to no nodes. Separation/field-stress design-rule violations
/// are report-only (see [`validate_spec`]) and do not block the build.
pub fn build_domain(spec: &GeometrySpec) -> Result<VoxelDomain> {
    let report = validate_spec(spec);
    if let Some(v) = report
        .violations
        .iter()
        .find(|v| v.kind == ViolationKind::Geometry)
    {
        return Err(Error::Geometry(v.message.clone()));
    }

    let r = spec.domain_radius;
    let len = spec.domain_length;
    let h = spec.coarse_spacing;
    let nxy = divides(2.0 * r, h)
        .ok_or_else(|| Error::Geometry("coarse spacing does not divide the domain diameter".into()))?
        + 1;
    let nz = divides(len, h)
        .ok_or_else(|| Error::Geometry("coarse spacing does not divide the domain length".into()))?
        + 1;

    let solids = expand_electrodes(spec);
    if solids.len() > (u8::MAX - LABEL_ELECTRODE_BASE) as usize {
        return Err(Error::Geometry("too many electrodes".into()));
    }

    let coarse = rasterize(
        &GridExtents {
            nx: nxy,
            ny: nxy,
            nz,
            spacing: h,
            origin: [-r, -r, -len],
            is_refined: false,
        },
        &solids,
        r,
        len,
    );

    let refined = match &spec.refined {
        None => None,
        Some(reg) => {
            let hw = reg.half_width;
            let nf_xy = divides(2.0 * hw, reg.spacing)
                .ok_or_else(|| {
                    Error::Geometry("refined spacing does not divide the refined width".into())
                })?
                + 1;
            let nf_z = divides(reg.z_max - reg.z_min, reg.spacing)
                .ok_or_else(|| {
                    Error::Geometry("refined spacing does not divide the refined span".into())
                })?
                + 1;
            Some(rasterize(
                &GridExtents {
                    nx: nf_xy,
                    ny: nf_xy,
                    nz: nf_z,
                    spacing: reg.spacing,
                    origin: [-hw, -hw, reg.z_min],
                    is_refined: true,
                },
                &solids,
                r,
                len,
            ))
        }
    };

    // Every electrode must rasterize to at least one node somewhere.
    for (e, s) in solids.iter().enumerate() {
        let lab = LABEL_ELECTRODE_BASE + e as u8;
        let in_coarse = coarse.labels.iter().any(|&l| l == lab);
        let in_refined = refined
            .as_ref()
            .map(|g| g.labels.iter().any(|&l| l == lab))
            .unwrap_or(false);
        if !in_coarse && !in_refined {
            return Err(Error::Geometry(format!(
                "electrode '{}' rasterizes to no voxels at the given spacing",
                s.info.name
            )));
        }
    }

    let electrodes = ElectrodeTable {
        entries: solids.iter().map(|s| s.info.clone()).collect(),
    };

    // Detector metadata.
    let mut detector_plane_z = -len;
    let mut apertures = Vec::new();
    let mut detector_cap = Vec::new();
    for (e, s) in solids.iter().enumerate() {
        if let ElectrodeShape::CemPlate {
            apertures: ref aps, ..
        } = s.shape
        {
            detector_plane_z = s.z_top;
            apertures = aps.clone();
            if (s.z_top + len).abs() < h {
                detector_cap.push(e);
            }
        }
    }
    let deflector_entrance_z = spec
        .electrodes
        .iter()
        .find(|d| matches!(d.shape, ElectrodeShape::Tube { segments: Some(_), .. }))
        .map(|d| d.z_top);

    Ok(VoxelDomain {
        spec_hash: spec.hash(),
        spec: spec.clone(),
        coarse,
        refined,
        electrodes,
        detector_plane_z,
        deflector_entrance_z,
        apertures,
        detector_cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_label(grid: &LabeledGrid, label: u8) -> usize {
        grid.labels.iter().filter(|&&l| l == label).count()
    }

    #[test]
    fn paper_default_has_eleven_electrodes_plus_ground() {
        let dom = build_domain(&GeometrySpec::paper_default()).unwrap();
        assert_eq!(dom.electrodes.len(), 11);
        let names: Vec<&str> = dom
            .electrodes
            .entries
            .iter()
            .map(|e| e.name.as_str())
            .collect();
        assert_eq!(
            names,
            [
                "chip",
                "extractor_1",
                "extractor_2",
                "extractor_3",
                "extractor_4",
                "cone",
                "drift_tube_1",
                "drift_tube_2",
                "drift_tube_3",
                "drift_tube_4",
                "cem_plate"
            ]
        );
        assert!(count_label(&dom.coarse, LABEL_GROUND) > 0);
        for e in 0..dom.electrodes.len() {
            assert!(count_label(&dom.coarse, LABEL_ELECTRODE_BASE + e as u8) > 0);
        }
        assert_eq!(dom.detector_plane_z, -83e-3);
        assert_eq!(dom.deflector_entrance_z, Some(-12.5e-3));
        assert_eq!(dom.detector_cap, vec![10]);
    }

    #[test]
    fn zero_electrode_spec_is_all_free_inside() {
        let spec = GeometrySpec {
            version: 1,
            domain_radius: 5e-3,
            domain_length: 10e-3,
            coarse_spacing: 0.5e-3,
            refined: None,
            electrodes: vec![],
        };
        let dom = build_domain(&spec).unwrap();
        assert_eq!(dom.electrodes.len(), 0);
        // every non-ground node is free, and the interior is non-empty
        let free = count_label(&dom.coarse, LABEL_FREE);
        let ground = count_label(&dom.coarse, LABEL_GROUND);
        assert_eq!(free + ground, dom.coarse.len());
        assert!(free > 0);
        // boundary nodes are all ground
        let g = &dom.coarse;
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                assert_eq!(g.labels[g.idx(ix, iy, 0)], LABEL_GROUND);
                assert_eq!(g.labels[g.idx(ix, iy, g.nz - 1)], LABEL_GROUND);
            }
        }
    }

    #[test]
    fn bore_cross_section_matches_analytic_area() {
        // A 2.5 mm-bore annular plate rasterized at 0.05 mm spacing: the
        // free bore area per z-layer should match pi r^2 / h^2 within 2%.
        let spec = GeometrySpec {
            version: 1,
            domain_radius: 4e-3,
            domain_length: 2e-3,
            coarse_spacing: 0.05e-3,
            refined: None,
            electrodes: vec![ElectrodeDef {
                id: "plate".into(),
                z_top: -0.5e-3,
                shape: ElectrodeShape::AnnularPlate {
                    thickness: 1e-3,
                    bore_radius: 1.25e-3,
                    outer_radius: 3.5e-3,
                    segments: None,
                },
            }],
        };
        let dom = build_domain(&spec).unwrap();
        let g = &dom.coarse;
        let iz = ((-1.0e-3 - g.origin[2]) / g.spacing).round() as usize; // mid-plate layer
        let mut free_in_bore = 0usize;
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let p = g.node_pos(ix, iy, iz);
                if p[0].hypot(p[1]) < 1.25e-3 && g.labels[g.idx(ix, iy, iz)] == LABEL_FREE {
                    free_in_bore += 1;
                }
            }
        }
        let expected = std::f64::consts::PI * (1.25e-3f64 / 0.05e-3).powi(2);
        let rel = (free_in_bore as f64 - expected).abs() / expected;
        assert!(
            rel < 0.02,
            "bore voxel count {free_in_bore} vs analytic {expected:.1} (rel {rel:.4})"
        );
    }

    #[test]
    fn segment_one_centroid_has_largest_x() {
        let dom = build_domain(&GeometrySpec::paper_default()).unwrap();
        let g = &dom.coarse;
        let mut centroids = vec![[0.0f64; 2]; 4];
        let mut counts = [0usize; 4];
        for iz in 0..g.nz {
            for iy in 0..g.ny {
                for ix in 0..g.nx {
                    let l = g.labels[g.idx(ix, iy, iz)];
                    // extractor segments are electrodes 1..=4
                    if (LABEL_ELECTRODE_BASE + 1..=LABEL_ELECTRODE_BASE + 4).contains(&l) {
                        let seg = (l - LABEL_ELECTRODE_BASE - 1) as usize;
                        let p = g.node_pos(ix, iy, iz);
                        centroids[seg][0] += p[0];
                        centroids[seg][1] += p[1];
                        counts[seg] += 1;
                    }
                }
            }
        }
        for s in 0..4 {
            centroids[s][0] /= counts[s] as f64;
            centroids[s][1] /= counts[s] as f64;
        }
        assert!(centroids[0][0] > centroids[1][0]);
        assert!(centroids[0][0] > centroids[2][0]);
        assert!(centroids[0][0] > centroids[3][0]);
        // segment 2 opposes 4 along y, 1 opposes 3 along x
        assert!(centroids[1][1] > 0.0 && centroids[3][1] < 0.0);
        assert!(centroids[2][0] < 0.0);
    }

    #[test]
    fn rasterization_volume_is_resolution_convergent() {
        let mut spec = GeometrySpec::paper_default();
        spec.refined = None;
        spec.coarse_spacing = 0.2e-3;
        let d1 = build_domain(&spec).unwrap();
        spec.coarse_spacing = 0.1e-3;
        let d2 = build_domain(&spec).unwrap();
        for e in 0..d1.electrodes.len() {
            let lab = LABEL_ELECTRODE_BASE + e as u8;
            let v1 = count_label(&d1.coarse, lab) as f64 * d1.coarse.spacing.powi(3);
            let v2 = count_label(&d2.coarse, lab) as f64 * d2.coarse.spacing.powi(3);
            // plane-like electrodes scale with the node-layer thickness
            let (v1, v2) = match d1.electrodes.entries[e].name.as_str() {
                "chip" | "cem_plate" => (v1 / d1.coarse.spacing, v2 / d2.coarse.spacing),
                _ => (v1, v2),
            };
            let rel = (v2 - v1).abs() / v1;
            assert!(
                rel < 0.05,
                "electrode {} volume drifts {rel:.3} on refinement",
                d1.electrodes.entries[e].name
            );
        }
    }

    #[test]
    fn electrode_voxel_sets_are_connected() {
        let dom = build_domain(&GeometrySpec::paper_default()).unwrap();
        let g = &dom.coarse;
        for e in 0..dom.electrodes.len() {
            let lab = LABEL_ELECTRODE_BASE + e as u8;
            let nodes: Vec<usize> = (0..g.len()).filter(|&i| g.labels[i] == lab).collect();
            assert!(!nodes.is_empty());
            // BFS over 26-connectivity
            let mut seen = vec![false; g.len()];
            let mut queue = vec![nodes[0]];
            seen[nodes[0]] = true;
            let mut reached = 1usize;
            while let Some(i) = queue.pop() {
                let iz = i / (g.nx * g.ny);
                let iy = (i / g.nx) % g.ny;
                let ix = i % g.nx;
                for dz in -1i64..=1 {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            if dx == 0 && dy == 0 && dz == 0 {
                                continue;
                            }
                            let (jx, jy, jz) =
                                (ix as i64 + dx, iy as i64 + dy, iz as i64 + dz);
                            if jx < 0
                                || jy < 0
                                || jz < 0
                                || jx >= g.nx as i64
                                || jy >= g.ny as i64
                                || jz >= g.nz as i64
                            {
                                continue;
                            }
                            let j = g.idx(jx as usize, jy as usize, jz as usize);
                            if !seen[j] && g.labels[j] == lab {
                                seen[j] = true;
                                reached += 1;
                                queue.push(j);
                            }
                        }
                    }
                }
            }
            assert_eq!(
                reached,
                nodes.len(),
                "electrode {} is disconnected",
                dom.electrodes.entries[e].name
            );
        }
    }

    #[test]
    fn overlapping_electrodes_fail_to_build() {
        let spec = GeometrySpec {
            version: 1,
            domain_radius: 10e-3,
            domain_length: 20e-3,
            coarse_spacing: 0.5e-3,
            refined: None,
            electrodes: vec![
                ElectrodeDef {
                    id: "a".into(),
                    z_top: -5e-3,
                    shape: ElectrodeShape::AnnularPlate {
                        thickness: 2e-3,
                        bore_radius: 1e-3,
                        outer_radius: 8e-3,
                        segments: None,
                    },
                },
                ElectrodeDef {
                    id: "b".into(),
                    z_top: -6e-3,
                    shape: ElectrodeShape::AnnularPlate {
                        thickness: 2e-3,
                        bore_radius: 1e-3,
                        outer_radius: 8e-3,
                        segments: None,
                    },
                },
            ],
        };
        assert!(matches!(build_domain(&spec), Err(Error::Geometry(_))));
    }

    #[test]
    fn refined_region_outside_domain_fails() {
        let mut spec = GeometrySpec::paper_default();
        spec.refined = Some(RefinedRegion {
            z_min: -90e-3,
            z_max: 0.0,
            spacing: 0.5e-3,
            half_width: 4e-3,
        });
        assert!(build_domain(&spec).is_err());
    }

    #[test]
    fn non_dividing_spacing_fails() {
        let mut spec = GeometrySpec::paper_default();
        spec.coarse_spacing = 0.3e-3; // 28 mm / 0.3 mm is not integral
        assert!(matches!(build_domain(&spec), Err(Error::Geometry(_))));
    }

    #[test]
    fn classify_and_local_spacing() {
        let dom = build_domain(&GeometrySpec::paper_default()).unwrap();
        assert_eq!(dom.classify([0.0, 0.0, -1e-4]), CellClass::Free);
        assert_eq!(dom.local_spacing([0.0, 0.0, -1e-4]), 0.05e-3);
        assert_eq!(dom.local_spacing([0.0, 0.0, -50e-3]), 0.25e-3);
        // inside extractor segment 1 metal
        assert_eq!(
            dom.classify([5e-3, 0.0, -5e-3]),
            CellClass::Electrode(1)
        );
        // wall
        assert_eq!(dom.classify([13.99e-3, 0.0, -40e-3]), CellClass::Ground);
        assert_eq!(dom.classify([0.0, 0.0, 5e-3]), CellClass::Outside);
        // above the detector cap the plate is transparent to occupancy
        assert_eq!(dom.classify([0.0, 0.0, -82.9e-3]), CellClass::Free);
    }

    #[test]
    fn impact_classification() {
        let dom = build_domain(&GeometrySpec::paper_default()).unwrap();
        assert_eq!(dom.classify_impact(2e-3, 5e-3), DetectorRegion::Cem(1));
        assert_eq!(dom.classify_impact(-2e-3, 5e-3), DetectorRegion::Cem(2));
        assert_eq!(dom.classify_impact(-2e-3, -5e-3), DetectorRegion::Cem(3));
        assert_eq!(dom.classify_impact(2e-3, -5e-3), DetectorRegion::Cem(4));
        assert_eq!(dom.classify_impact(0.0, 0.0), DetectorRegion::Gap);
        assert_eq!(dom.classify_impact(8e-3, 0.0), DetectorRegion::Outside);
    }
}
