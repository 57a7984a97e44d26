//! Point-set diameters and grid distance transforms.

/// `max - min` of a set of scalars; 0 for fewer than two.
pub fn diameter_1d(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    hi - lo
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull by Andrew's monotone chain, counter-clockwise, without
/// collinear points.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Largest pairwise Euclidean distance in a planar point set.
pub fn diameter_2d(points: &[[f64; 2]]) -> f64 {
    let hull = convex_hull(points);
    let mut best = 0.0f64;
    for (k, a) in hull.iter().enumerate() {
        for b in &hull[k + 1..] {
            best = best.max((a[0] - b[0]).hypot(a[1] - b[1]));
        }
    }
    best
}

// One-dimensional squared distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let mut q = 1;
    while q < n {
        if f[q].is_infinite() {
            q += 1;
            continue;
        }
        if f[v[k]].is_infinite() {
            v[k] = q;
            q += 1;
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
        q += 1;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *o = if f[p].is_infinite() { f64::INFINITY } else { dq * dq + f[p] };
    }
}

/// Exact Euclidean distance (in cell units) from every cell of an `n x n`
/// row-major grid to the nearest cell where `source` is true. Cells are
/// at infinite distance when the source set is empty.
pub fn distance_transform(source: &[bool], n: usize) -> Vec<f64> {
    assert_eq!(source.len(), n * n);
    let mut grid: Vec<f64> = source.iter().map(|&s| if s { 0.0 } else { f64::INFINITY }).collect();
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    // Columns first, then rows.
    for i in 0..n {
        for j in 0..n {
            line[j] = grid[j * n + i];
        }
        edt_1d(&line, &mut out, &mut v, &mut z);
        for j in 0..n {
            grid[j * n + i] = out[j];
        }
    }
    for j in 0..n {
        line.copy_from_slice(&grid[j * n..(j + 1) * n]);
        edt_1d(&line, &mut out, &mut v, &mut z);
        grid[j * n..(j + 1) * n].copy_from_slice(&out);
    }
    grid.iter().map(|d| d.sqrt()).collect()
}
