use crate::data::LabelMap;
use crate::error::{Error, Result};

/// Pixel-center coordinates `(row, col)` of boundary pixels, in scan order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurfacePointSet {
    pub points: Vec<(f64, f64)>,
}

impl SurfacePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Foreground (non-zero) pixels with at least one background 4-neighbor;
/// pixels outside the image count as background.
pub fn extract_surface(mask: &LabelMap) -> SurfacePointSet {
    let (h, w) = (mask.height(), mask.width());
    let fg = |y: isize, x: isize| -> bool {
        y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w && mask.get(y as usize, x as usize) != 0
    };
    let mut points = Vec::new();
    for y in 0..h as isize {
        for x in 0..w as isize {
            if fg(y, x) && (!fg(y - 1, x) || !fg(y + 1, x) || !fg(y, x - 1) || !fg(y, x + 1)) {
                points.push((y as f64, x as f64));
            }
        }
    }
    SurfacePointSet { points }
}

/// `d(a, B) = min_b |a - b|` for every `a`, by exhaustive search.
pub fn directed_distances(a: &SurfacePointSet, b: &SurfacePointSet) -> Vec<f64> {
    a.points
        .iter()
        .map(|&(ay, ax)| {
            b.points
                .iter()
                .map(|&(by, bx)| (ay - by).powi(2) + (ax - bx).powi(2))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

/// Nearest-rank 95th percentile: the `ceil(0.95 n)`-th smallest value.
pub fn nearest_rank_p95(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let rank = (95 * n).div_ceil(100);
    Some(values[rank.max(1) - 1])
}

fn require_non_empty(a: &SurfacePointSet, b: &SurfacePointSet) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        Err(Error::EmptySurface)
    } else {
        Ok(())
    }
}

/// `max(P95(d(a, B)), P95(d(b, A)))`.
pub fn hd95(a: &SurfacePointSet, b: &SurfacePointSet) -> Result<f64> {
    require_non_empty(a, b)?;
    let ab = nearest_rank_p95(directed_distances(a, b)).expect("non-empty");
    let ba = nearest_rank_p95(directed_distances(b, a)).expect("non-empty");
    Ok(ab.max(ba))
}

/// `(sum d(a, B) + sum d(b, A)) / (|A| + |B|)`.
pub fn asd(a: &SurfacePointSet, b: &SurfacePointSet) -> Result<f64> {
    require_non_empty(a, b)?;
    let total: f64 = directed_distances(a, b).iter().sum::<f64>() + directed_distances(b, a).iter().sum::<f64>();
    Ok(total / (a.len() + b.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(points: &[(f64, f64)]) -> SurfacePointSet {
        SurfacePointSet { points: points.to_vec() }
    }

    #[test]
    fn single_pixel_surface() {
        let mut m = LabelMap::zeros(3, 3);
        m.data_mut()[4] = 1;
        assert_eq!(extract_surface(&m).points, vec![(1.0, 1.0)]);
        assert!(extract_surface(&LabelMap::zeros(3, 3)).is_empty());
    }

    #[test]
    fn block_perimeter() {
        let mut m = LabelMap::zeros(5, 5);
        for y in 1..4 {
            for x in 1..4 {
                m.data_mut()[y * 5 + x] = 1;
            }
        }
        let s = extract_surface(&m);
        assert_eq!(s.len(), 8);
        assert!(!s.points.contains(&(2.0, 2.0)));
    }

    #[test]
    fn border_counts_as_background() {
        let m = LabelMap::new(2, 2, vec![1; 4]).unwrap();
        assert_eq!(extract_surface(&m).len(), 4);
    }

    #[test]
    fn distances() {
        let a = set(&[(0.0, 0.0)]);
        let b = set(&[(3.0, 4.0)]);
        assert_eq!(hd95(&a, &b).unwrap(), 5.0);
        assert_eq!(asd(&a, &b).unwrap(), 5.0);
        let c = set(&[(0.0, 0.0), (1.0, 2.0), (5.0, 5.0)]);
        assert_eq!(hd95(&c, &c).unwrap(), 0.0);
        assert_eq!(asd(&c, &c).unwrap(), 0.0);
        assert!(matches!(hd95(&a, &SurfacePointSet::default()), Err(Error::EmptySurface)));
        assert!(matches!(asd(&SurfacePointSet::default(), &a), Err(Error::EmptySurface)));
    }

    #[test]
    fn nearest_rank_indices() {
        let v: Vec<f64> = (1..=20).map(|x| x as f64).collect();
        assert_eq!(nearest_rank_p95(v), Some(19.0));
        let v: Vec<f64> = (1..=10).map(|x| x as f64).collect();
        assert_eq!(nearest_rank_p95(v), Some(10.0));
        assert_eq!(nearest_rank_p95(vec![7.0]), Some(7.0));
        assert_eq!(nearest_rank_p95(vec![]), None);
    }
}
