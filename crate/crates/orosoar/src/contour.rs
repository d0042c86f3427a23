//! Zero-level-set extraction from feasibility grids (marching squares).

use crate::wind::FeasibilityGrid;

/// One contour line segment in world (x, z) coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: (f64, f64),
    pub b: (f64, f64),
}

impl Segment {
    pub fn midpoint(&self) -> (f64, f64) {
        (0.5 * (self.a.0 + self.b.0), 0.5 * (self.a.1 + self.b.1))
    }
    pub fn length(&self) -> f64 {
        ((self.a.0 - self.b.0).powi(2) + (self.a.1 - self.b.1).powi(2)).sqrt()
    }
}

/// Marching-squares zero contour. Cells touching NaN corners are skipped.
pub fn zero_contour(grid: &FeasibilityGrid) -> Vec<Segment> {
    let nx = grid.spec.nx;
    let nz = grid.spec.nz;
    let mut segments = Vec::new();
    if nx < 2 || nz < 2 {
        return segments;
    }
    for iz in 0..nz - 1 {
        for ix in 0..nx - 1 {
            let v = [
                grid.at(ix, iz),
                grid.at(ix + 1, iz),
                grid.at(ix + 1, iz + 1),
                grid.at(ix, iz + 1),
            ];
            if v.iter().any(|c| c.is_nan()) {
                continue;
            }
            let x0 = grid.xs[ix];
            let x1 = grid.xs[ix + 1];
            let z0 = grid.zs[iz];
            let z1 = grid.zs[iz + 1];
            // corner order: 0=(x0,z0) 1=(x1,z0) 2=(x1,z1) 3=(x0,z1)
            let inside = |c: f64| c >= 0.0;
            let code = (inside(v[0]) as usize)
                | (inside(v[1]) as usize) << 1
                | (inside(v[2]) as usize) << 2
                | (inside(v[3]) as usize) << 3;
            if code == 0 || code == 15 {
                continue;
            }
            let lerp = |a: f64, b: f64, va: f64, vb: f64| a + (0.0 - va) / (vb - va) * (b - a);
            // edge crossing points: bottom, right, top, left
            let bottom = || (lerp(x0, x1, v[0], v[1]), z0);
            let right = || (x1, lerp(z0, z1, v[1], v[2]));
            let top = || (lerp(x0, x1, v[3], v[2]), z1);
            let left = || (x0, lerp(z0, z1, v[0], v[3]));
            let mut push = |a: (f64, f64), b: (f64, f64)| segments.push(Segment { a, b });
            match code {
                1 | 14 => push(left(), bottom()),
                2 | 13 => push(bottom(), right()),
                3 | 12 => push(left(), right()),
                4 | 11 => push(right(), top()),
                6 | 9 => push(bottom(), top()),
                7 | 8 => push(left(), top()),
                5 => {
                    // saddle: resolve by cell-center sign
                    let center = 0.25 * (v[0] + v[1] + v[2] + v[3]);
                    if center >= 0.0 {
                        push(left(), top());
                        push(bottom(), right());
                    } else {
                        push(left(), bottom());
                        push(right(), top());
                    }
                }
                10 => {
                    let center = 0.25 * (v[0] + v[1] + v[2] + v[3]);
                    if center >= 0.0 {
                        push(left(), bottom());
                        push(right(), top());
                    } else {
                        push(left(), top());
                        push(bottom(), right());
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    segments
}

/// Length-weighted centroid of a contour, or None if it is empty.
pub fn contour_centroid(segments: &[Segment]) -> Option<(f64, f64)> {
    let mut total = 0.0;
    let mut cx = 0.0;
    let mut cz = 0.0;
    for s in segments {
        let l = s.length();
        if l <= 0.0 {
            continue;
        }
        let (mx, mz) = s.midpoint();
        total += l;
        cx += l * mx;
        cz += l * mz;
    }
    if total > 0.0 {
        Some((cx / total, cz / total))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wind::{FeasibilityGrid, GridSpec};

    fn grid_from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> FeasibilityGrid {
        let xs = spec.xs();
        let zs = spec.zs();
        let mut excess = Vec::new();
        for &z in &zs {
            for &x in &xs {
                excess.push(f(x, z));
            }
        }
        FeasibilityGrid { spec, xs, zs, excess }
    }

    #[test]
    fn recovers_horizontal_line() {
        // excess = 1.3 - z: contour is the line z = 1.3
        let spec = GridSpec { x_min: 0.0, x_max: 2.0, z_min: 0.0, z_max: 2.0, nx: 21, nz: 21 };
        let g = grid_from_fn(spec, |_, z| 1.3 - z);
        let segs = zero_contour(&g);
        assert!(!segs.is_empty());
        for s in &segs {
            assert!((s.a.1 - 1.3).abs() < 1e-9 && (s.b.1 - 1.3).abs() < 1e-9);
        }
        let (_, cz) = contour_centroid(&segs).unwrap();
        assert!((cz - 1.3).abs() < 1e-9);
    }

    #[test]
    fn circle_centroid_at_center() {
        let spec = GridSpec { x_min: -2.0, x_max: 2.0, z_min: -2.0, z_max: 2.0, nx: 81, nz: 81 };
        let g = grid_from_fn(spec, |x, z| 1.0 - (x * x + z * z).sqrt());
        let segs = zero_contour(&g);
        let (cx, cz) = contour_centroid(&segs).unwrap();
        assert!(cx.abs() < 1e-3 && cz.abs() < 1e-3, "centroid ({cx},{cz})");
        // total length close to the circumference
        let len: f64 = segs.iter().map(|s| s.length()).sum();
        assert!((len - 2.0 * std::f64::consts::PI).abs() < 0.05, "len {len}");
    }

    #[test]
    fn nan_cells_skipped() {
        let spec = GridSpec { x_min: 0.0, x_max: 1.0, z_min: 0.0, z_max: 1.0, nx: 11, nz: 11 };
        let g = grid_from_fn(spec, |x, z| if x < 0.35 { f64::NAN } else { 0.5 - z });
        let segs = zero_contour(&g);
        assert!(!segs.is_empty());
        for s in &segs {
            assert!(s.a.0 >= 0.3 && s.b.0 >= 0.3);
        }
    }

    #[test]
    fn all_positive_field_has_no_contour() {
        let spec = GridSpec { x_min: 0.0, x_max: 1.0, z_min: 0.0, z_max: 1.0, nx: 8, nz: 8 };
        let g = grid_from_fn(spec, |_, _| 1.0);
        assert!(zero_contour(&g).is_empty());
        assert!(contour_centroid(&[]).is_none());
    }
}
