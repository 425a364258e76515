use std::collections::VecDeque;

use super::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(i64, i64)] {
        const FOUR: [(i64, i64); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
        const EIGHT: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Connected components of the pixels selected by `is_fg`.
///
/// Components are returned in raster order of their first pixel (top-most,
/// then left-most); each holds its pixel indices in ascending order.
pub fn label_components<T: Copy>(
    grid: &Grid<T>,
    is_fg: impl Fn(T) -> bool,
    connectivity: Connectivity,
) -> Vec<Vec<usize>> {
    let (w, h) = (grid.width(), grid.height());
    let data = grid.data();
    let mut seen = vec![false; data.len()];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();

    for start in 0..data.len() {
        if seen[start] || !is_fg(data[start]) {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            pixels.push(i);
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !seen[j] && is_fg(data[j]) {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        pixels.sort_unstable();
        components.push(pixels);
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_touching_depends_on_connectivity() {
        let g = Grid::from_vec(2, 2, vec![1u8, 0, 0, 1]).unwrap();
        assert_eq!(label_components(&g, |v| v == 1, Connectivity::Eight).len(), 1);
        assert_eq!(label_components(&g, |v| v == 1, Connectivity::Four).len(), 2);
    }

    #[test]
    fn components_in_raster_order() {
        #[rustfmt::skip]
        let g = Grid::from_vec(4, 3, vec![
            0u8, 0, 0, 1,
            1, 0, 0, 1,
            1, 0, 0, 0,
        ]).unwrap();
        let comps = label_components(&g, |v| v == 1, Connectivity::Four);
        assert_eq!(comps, vec![vec![3, 7], vec![4, 8]]);
    }
}
