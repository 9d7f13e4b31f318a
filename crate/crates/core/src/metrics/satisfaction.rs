use crate::domain::{GridMap, Participant, Route, LANDUSE_CATEGORIES};
use crate::error::{Error, Result};

/// h(r): empirical distribution of the cells' dominant categories along a
/// route, one vote per route point.
pub fn route_landuse_histogram(route: &Route, grid: &GridMap) -> [f64; LANDUSE_CATEGORIES] {
    let mut h = [0.0; LANDUSE_CATEGORIES];
    if route.is_empty() {
        return h;
    }
    for p in &route.points {
        h[grid.category(p.coord()).index()] += 1.0;
    }
    let n = route.len() as f64;
    for v in &mut h {
        *v /= n;
    }
    h
}

/// Mean min-max-normalized crime over route points.
pub fn risk(route: &Route, grid: &GridMap) -> f64 {
    if route.is_empty() || !grid.has_crime_data() {
        return 0.0;
    }
    let total: f64 = route.points.iter().map(|p| grid.normalized_crime(p.coord())).sum();
    total / route.len() as f64
}

/// Cosine similarity; 0 when either vector is all zeros.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// S(r) = sim(p_u, h(r)) − μ·risk(r).
pub fn path_satisfaction(route: &Route, participant: &Participant, grid: &GridMap, mu: f64) -> f64 {
    let h = route_landuse_histogram(route, grid);
    cosine(&participant.preference, &h) - mu * risk(route, grid)
}

/// Jaccard similarity of the visited cell sets (time ignored).
pub fn route_overlap(a: &Route, b: &Route) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyRoute);
    }
    let ca = a.cells();
    let cb = b.cells();
    let inter = ca.intersection(&cb).count();
    let union = ca.len() + cb.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Mean and max overlap over all unordered pairs; (0, 0) with fewer than two routes.
pub fn pairwise_overlap_stats(routes: &[&Route]) -> Result<(f64, f64)> {
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    let mut n = 0usize;
    for i in 0..routes.len() {
        for j in (i + 1)..routes.len() {
            let o = route_overlap(routes[i], routes[j])?;
            sum += o;
            max = max.max(o);
            n += 1;
        }
    }
    Ok(if n == 0 { (0.0, 0.0) } else { (sum / n as f64, max) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CellAttributes, Coord, ParticipantProfile, RoutePoint, Schedule};

    fn one_hot(k: usize) -> [f64; 6] {
        let mut v = [0.0; 6];
        v[k] = 1.0;
        v
    }

    /// 4x1 grid with categories veg, veg, medical, commercial and crime 0,10,20,50.
    fn strip() -> GridMap {
        let cats = [0, 0, 3, 5];
        let crime = [0, 10, 20, 50];
        let cells = (0..4)
            .map(|i| CellAttributes {
                landuse: one_hot(cats[i]),
                crime_count: crime[i],
            })
            .collect();
        GridMap::new(4, 1, cells).unwrap()
    }

    fn route(xs: &[u32]) -> Route {
        Route::new(
            xs.iter()
                .enumerate()
                .map(|(t, &x)| RoutePoint::new(x, 0, t as u32))
                .collect(),
        )
    }

    fn participant(pref: [f64; 6]) -> Participant {
        let s = Schedule::new(Coord::new(0, 0), Coord::new(0, 0), 0, 3, 1).unwrap();
        Participant::new("p", s, 1.0, pref, 0, ParticipantProfile::neutral(30)).unwrap()
    }

    #[test]
    fn histogram_examples() {
        let g = strip();
        assert_eq!(route_landuse_histogram(&route(&[3, 3]), &g), one_hot(5));
        let h = route_landuse_histogram(&route(&[0, 1, 3, 3]), &g);
        assert_eq!(h, [0.5, 0.0, 0.0, 0.0, 0.0, 0.5]);
        let h = route_landuse_histogram(&route(&[0, 1, 2]), &g);
        assert!((h[0] - 2.0 / 3.0).abs() < 1e-15 && (h[3] - 1.0 / 3.0).abs() < 1e-15);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn risk_examples() {
        let g = GridMap::uniform(3, 3).unwrap();
        assert_eq!(risk(&route(&[0, 1]), &g), 0.0);
        let s = strip();
        assert_eq!(risk(&route(&[3, 3, 3]), &s), 1.0);
        // normalized crime of x=1 is 0.2, x=2 is 0.4; construct 0.2 and 0.6 explicitly
        let cells = [0u32, 10, 30, 50]
            .iter()
            .map(|&c| CellAttributes {
                landuse: one_hot(0),
                crime_count: c,
            })
            .collect();
        let g = GridMap::new(4, 1, cells).unwrap();
        let r = Route::new(vec![RoutePoint::new(1, 0, 0), RoutePoint::new(2, 0, 1)]);
        assert!((risk(&r, &g) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn satisfaction_examples() {
        let g = strip();
        let r = route(&[0, 1]);
        // risk of cells x=0 (0.0) and x=1 (0.2)
        let p = participant(one_hot(0));
        assert!((path_satisfaction(&r, &p, &g, 0.0) - 1.0).abs() < 1e-12);
        let p = participant(one_hot(1));
        assert_eq!(path_satisfaction(&r, &p, &g, 0.0), 0.0);
        // p = h, risk 0.5, mu 0.2 -> 0.9
        let cells = [0u32, 50, 100]
            .iter()
            .map(|&c| CellAttributes {
                landuse: one_hot(0),
                crime_count: c,
            })
            .collect();
        let g = GridMap::new(3, 1, cells).unwrap();
        let p = participant(one_hot(0));
        assert!((path_satisfaction(&route(&[1, 1]), &p, &g, 0.2) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn overlap_examples() {
        let a = route(&[0, 1, 2]);
        assert_eq!(route_overlap(&a, &a).unwrap(), 1.0);
        assert_eq!(route_overlap(&route(&[0, 1]), &route(&[2, 3])).unwrap(), 0.0);
        assert_eq!(route_overlap(&route(&[0, 1, 2]), &route(&[1, 2, 3])).unwrap(), 0.5);
        assert_eq!(route_overlap(&Route::default(), &a).unwrap_err().code(), "empty_route");
    }

    #[test]
    fn cosine_zero_guard() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
    }
}
