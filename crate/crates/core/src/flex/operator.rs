use super::{DeformationField, FlexError};
use crate::geometry::Immersion;
use crate::linalg::{complex_singular_values, singular_values, svd, DenseMatrix};
use faer::c64;
use serde::Serialize;
use std::f64::consts::PI;

/// Dense SVD limit on the number of unknowns.
pub const MAX_UNKNOWNS: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stencil {
    /// First-order forward differences per grid cell. The rows are the bar
    /// constraints of the triangulated grid.
    Forward,
    /// Fourth-order centered differences at each node.
    Centered4,
}

#[derive(Clone, Debug)]
struct Row {
    /// `(unknown node, component, coefficient)`.
    entries: Vec<(usize, usize, f64)>,
    /// Grid index along the first axis, row-pattern key.
    orbit: (usize, usize, usize),
}

/// Linearized isometry operator `dr·dτ = 0` on a chart grid.
#[derive(Clone, Debug)]
pub struct FlexOperator {
    pub counts: [usize; 2],
    pub periodic: [bool; 2],
    pub stencil: Stencil,
    /// Position of each grid node, first axis slowest.
    pub positions: Vec<[f64; 3]>,
    /// Unknown index of each grid node after merging collapsed nodes.
    pub node_unknown: Vec<usize>,
    pub n_unknown_nodes: usize,
    rows: Vec<Row>,
    symmetry: Option<CyclicSymmetry>,
}

#[derive(Clone, Debug)]
struct CyclicSymmetry {
    /// `r(i+1, j) = R r(i, j) + c`.
    rot: [[f64; 3]; 3],
    /// Unknown of each non-fixed orbit, indexed `[j][i]`.
    orbits: Vec<Vec<usize>>,
    /// Unknowns fixed by the shift.
    fixed: Vec<usize>,
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

impl FlexOperator {
    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cols(&self) -> usize {
        3 * self.n_unknown_nodes
    }

    pub fn nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn has_cyclic_symmetry(&self) -> bool {
        self.symmetry.is_some()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows(), self.cols());
        for (r, row) in self.rows.iter().enumerate() {
            for &(u, c, v) in &row.entries {
                m.add_to(r, 3 * u + c, v);
            }
        }
        m
    }

    /// `A τ` for one vector per unknown node.
    pub fn apply(&self, tau: &[[f64; 3]]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.entries.iter().map(|&(u, c, v)| v * tau[u][c]).sum())
            .collect()
    }

    /// Field values per unknown node (taken at the first grid node of each).
    pub fn sample_field(&self, field: &DeformationField) -> Option<Vec<[f64; 3]>> {
        let mut out = vec![[0.0; 3]; self.n_unknown_nodes];
        let mut seen = vec![false; self.n_unknown_nodes];
        for (node, &u) in self.node_unknown.iter().enumerate() {
            if !seen[u] {
                let v = field.at_position(&self.positions[node])?;
                out[u] = [v[0], v[1], v[2]];
                seen[u] = true;
            }
        }
        Some(out)
    }

    /// `max |A τ|` for a trivial motion sampled on the grid.
    pub fn trivial_residual(&self, field: &DeformationField) -> Option<f64> {
        let tau = self.sample_field(field)?;
        Some(self.apply(&tau).iter().fold(0.0, |m, v| m.max(v.abs())))
    }
}

/// Assembles the operator on a `counts[0] × counts[1]` grid.
pub fn assemble_flex_operator(
    im: &Immersion,
    counts: [usize; 2],
    stencil: Stencil,
) -> Result<FlexOperator, FlexError> {
    if im.dim() != 2 {
        return Err(FlexError::NeedsSurface(im.dim()));
    }
    let periodic = [im.periodic()[0], im.periodic()[1]];
    let need = match stencil {
        Stencil::Forward => [3, 2],
        Stencil::Centered4 => [5, 5],
    };
    for a in 0..2 {
        let min = if periodic[a] { need[0] } else { need[1] };
        if counts[a] < min {
            return Err(FlexError::TooCoarse(format!(
                "axis {} has {} nodes, stencil needs {min}",
                a + 1,
                counts[a]
            )));
        }
    }
    let axes = im.grid_axes(&counts);
    let (n0, n1) = (counts[0], counts[1]);
    let idx = |i: usize, j: usize| i * n1 + j;
    let mut positions = Vec::with_capacity(n0 * n1);
    for &a in &axes[0] {
        for &b in &axes[1] {
            let p = im.position(&[a, b]);
            if p.iter().any(|v| !v.is_finite()) {
                return Err(FlexError::Geometry(crate::geometry::GeometryError::Invalid(
                    format!("non-finite position at ({a}, {b})"),
                )));
            }
            positions.push([p[0], p[1], p[2]]);
        }
    }
    let scale = positions.iter().map(norm).fold(1.0f64, f64::max);
    let tol = 1e-12 * scale;

    let next = |i: usize, n: usize, p: bool| -> Option<usize> {
        if i + 1 < n {
            Some(i + 1)
        } else if p {
            Some(0)
        } else {
            None
        }
    };
    let mut parent: Vec<usize> = (0..n0 * n1).collect();
    for i in 0..n0 {
        for j in 0..n1 {
            let here = idx(i, j);
            for nb in [
                next(i, n0, periodic[0]).map(|ii| idx(ii, j)),
                next(j, n1, periodic[1]).map(|jj| idx(i, jj)),
            ]
            .into_iter()
            .flatten()
            {
                if norm(&sub(&positions[nb], &positions[here])) <= tol {
                    let (a, b) = (find(&mut parent, here), find(&mut parent, nb));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut node_unknown = vec![usize::MAX; n0 * n1];
    let mut root_unknown = vec![usize::MAX; n0 * n1];
    let mut n_unknown_nodes = 0;
    for k in 0..n0 * n1 {
        let r = find(&mut parent, k);
        if root_unknown[r] == usize::MAX {
            root_unknown[r] = n_unknown_nodes;
            n_unknown_nodes += 1;
        }
        node_unknown[k] = root_unknown[r];
    }
    if 3 * n_unknown_nodes > MAX_UNKNOWNS {
        return Err(FlexError::TooLarge {
            unknowns: 3 * n_unknown_nodes,
            limit: MAX_UNKNOWNS,
        });
    }

    let mut rows = Vec::new();
    let mut push = |terms: Vec<(usize, [f64; 3])>, orbit: (usize, usize, usize)| {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (node, d) in terms {
            let u = node_unknown[node];
            for c in 0..3 {
                if let Some(e) = entries.iter_mut().find(|e| e.0 == u && e.1 == c) {
                    e.2 += d[c];
                } else {
                    entries.push((u, c, d[c]));
                }
            }
        }
        entries.retain(|e| e.2 != 0.0);
        let nrm = entries.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt();
        if nrm <= 1e-14 * scale {
            return;
        }
        for e in &mut entries {
            e.2 /= nrm;
        }
        rows.push(Row { entries, orbit });
    };
    let neg = |d: [f64; 3]| [-d[0], -d[1], -d[2]];

    match stencil {
        Stencil::Forward => {
            for i in 0..n0 {
                for j in 0..n1 {
                    let p = idx(i, j);
                    let s = next(i, n0, periodic[0]).map(|ii| idx(ii, j));
                    let t = next(j, n1, periodic[1]).map(|jj| idx(i, jj));
                    let ds = s.map(|q| sub(&positions[q], &positions[p]));
                    let dt = t.map(|q| sub(&positions[q], &positions[p]));
                    if let (Some(q), Some(d)) = (s, ds) {
                        push(vec![(q, d), (p, neg(d))], (i, j, 0));
                    }
                    if let (Some(q), Some(d)) = (t, dt) {
                        push(vec![(q, d), (p, neg(d))], (i, j, 1));
                    }
                    if let (Some(qs), Some(qt), Some(es), Some(et)) = (s, t, ds, dt) {
                        let both = [es[0] + et[0], es[1] + et[1], es[2] + et[2]];
                        push(vec![(qt, es), (qs, et), (p, neg(both))], (i, j, 2));
                    }
                }
            }
        }
        Stencil::Centered4 => {
            const W: [(isize, f64); 4] = [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
            let shift = |i: usize, o: isize, n: usize, p: bool| -> Option<usize> {
                let v = i as isize + o;
                if (0..n as isize).contains(&v) {
                    Some(v as usize)
                } else if p {
                    Some(v.rem_euclid(n as isize) as usize)
                } else {
                    None
                }
            };
            for i in 0..n0 {
                for j in 0..n1 {
                    let ss: Option<Vec<(usize, f64)>> = W
                        .iter()
                        .map(|&(o, w)| shift(i, o, n0, periodic[0]).map(|ii| (idx(ii, j), w)))
                        .collect();
                    let tt: Option<Vec<(usize, f64)>> = W
                        .iter()
                        .map(|&(o, w)| shift(j, o, n1, periodic[1]).map(|jj| (idx(i, jj), w)))
                        .collect();
                    let (Some(ss), Some(tt)) = (ss, tt) else {
                        continue;
                    };
                    let d = |st: &[(usize, f64)]| {
                        let mut v = [0.0; 3];
                        for &(q, w) in st {
                            for c in 0..3 {
                                v[c] += w * positions[q][c];
                            }
                        }
                        v
                    };
                    let (ds, dt) = (d(&ss), d(&tt));
                    let term = |st: &[(usize, f64)], dir: [f64; 3]| {
                        st.iter()
                            .map(|&(q, w)| (q, [w * dir[0], w * dir[1], w * dir[2]]))
                            .collect::<Vec<_>>()
                    };
                    push(term(&ss, ds), (i, j, 0));
                    push(term(&tt, dt), (i, j, 1));
                    let mut mixed = term(&tt, ds);
                    mixed.extend(term(&ss, dt));
                    push(mixed, (i, j, 2));
                }
            }
        }
    }

    let mut op = FlexOperator {
        counts,
        periodic,
        stencil,
        positions,
        node_unknown,
        n_unknown_nodes,
        rows,
        symmetry: None,
    };
    op.symmetry = detect_symmetry(&op, scale);
    Ok(op)
}

/// Kabsch fit of `r(i+1, j) ≈ R r(i, j) + c` along a periodic first axis.
fn detect_symmetry(op: &FlexOperator, scale: f64) -> Option<CyclicSymmetry> {
    if !op.periodic[0] || op.counts[0] < 3 {
        return None;
    }
    let (n0, n1) = (op.counts[0], op.counts[1]);
    let idx = |i: usize, j: usize| i * n1 + j;
    let count = (n0 * n1) as f64;
    let mut ca = [0.0; 3];
    let mut cb = [0.0; 3];
    for i in 0..n0 {
        for j in 0..n1 {
            let a = op.positions[idx(i, j)];
            let b = op.positions[idx((i + 1) % n0, j)];
            for c in 0..3 {
                ca[c] += a[c] / count;
                cb[c] += b[c] / count;
            }
        }
    }
    let mut h = DenseMatrix::zeros(3, 3);
    for i in 0..n0 {
        for j in 0..n1 {
            let a = sub(&op.positions[idx(i, j)], &ca);
            let b = sub(&op.positions[idx((i + 1) % n0, j)], &cb);
            for p in 0..3 {
                for q in 0..3 {
                    h.add_to(p, q, b[p] * a[q]);
                }
            }
        }
    }
    let s = svd(&h).ok()?;
    let mut u = s.u.clone();
    let v = s.v.clone();
    let mut rot = u.matmul(&v.transpose());
    if crate::linalg::det(&rot) < 0.0 {
        for p in 0..3 {
            u.set(p, 2, -u.get(p, 2));
        }
        rot = u.matmul(&v.transpose());
    }
    let r: [[f64; 3]; 3] = std::array::from_fn(|p| std::array::from_fn(|q| rot.get(p, q)));
    let apply = |x: &[f64; 3]| -> [f64; 3] {
        std::array::from_fn(|p| (0..3).map(|q| r[p][q] * x[q]).sum::<f64>())
    };
    let rc = apply(&ca);
    let shift = sub(&cb, &rc);
    for i in 0..n0 {
        for j in 0..n1 {
            let a = op.positions[idx(i, j)];
            let b = op.positions[idx((i + 1) % n0, j)];
            let ra = apply(&a);
            let e = [ra[0] + shift[0] - b[0], ra[1] + shift[1] - b[1], ra[2] + shift[2] - b[2]];
            if norm(&e) > 1e-10 * scale {
                return None;
            }
        }
    }
    // Each column j is either n0 distinct unknowns or a single fixed one.
    let mut orbits = Vec::new();
    let mut fixed = Vec::new();
    let mut owner = vec![false; op.n_unknown_nodes];
    for j in 0..n1 {
        let us: Vec<usize> = (0..n0).map(|i| op.node_unknown[idx(i, j)]).collect();
        if us.iter().all(|&u| u == us[0]) {
            if !owner[us[0]] {
                owner[us[0]] = true;
                fixed.push(us[0]);
            }
            continue;
        }
        if us.iter().any(|&u| owner[u]) {
            return None;
        }
        let mut sorted = us.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != n0 {
            return None;
        }
        for &u in &us {
            owner[u] = true;
        }
        orbits.push(us);
    }
    if owner.iter().any(|o| !o) {
        return None;
    }
    // Every row pattern must occur once per shift.
    let mut patterns: std::collections::BTreeMap<(usize, usize), usize> = Default::default();
    for row in &op.rows {
        *patterns.entry((row.orbit.1, row.orbit.2)).or_default() += 1;
    }
    if patterns.values().any(|&c| c != n0) {
        return None;
    }
    Some(CyclicSymmetry { rot: r, orbits, fixed })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMethod {
    /// Dense SVD of the assembled matrix.
    Dense,
    /// Block SVD after a discrete Fourier transform over a cyclic symmetry.
    CyclicBlocks,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelVerdict {
    /// Kernel is exactly the trivial motions.
    Rigid,
    /// Kernel is larger than the trivial motions at this resolution.
    Flexible,
    /// No clear spectral gap, or fewer than the trivial motions.
    Indeterminate,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelReport {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub trivial_dim: usize,
    pub sigma_max: f64,
    /// Largest singular value accepted into the kernel.
    pub sigma_kernel: f64,
    /// Smallest singular value above the threshold.
    pub sigma_next: f64,
    /// `sigma_next / sigma_kernel`, infinite when the kernel values are 0.
    pub gap_ratio: f64,
    pub rel_tol: f64,
    pub method: KernelMethod,
    pub verdict: KernelVerdict,
    /// All singular values, descending, padded with zeros to `cols`.
    pub singular_values: Vec<f64>,
}

fn block_singular_values(op: &FlexOperator, sym: &CyclicSymmetry) -> Result<Vec<f64>, FlexError> {
    let n0 = op.counts[0];
    let n1 = op.counts[1];
    let r = sym.rot;
    let mut powers = vec![[[0.0; 3]; 3]; n0];
    powers[0] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for i in 1..n0 {
        powers[i] = std::array::from_fn(|p| {
            std::array::from_fn(|q| (0..3).map(|k| r[p][k] * powers[i - 1][k][q]).sum::<f64>())
        });
    }
    // Eigenvectors of R: axis (eigenvalue 1) and u ∓ i v (eigenvalues e^{±iθ}).
    let rm = DenseMatrix::from_fn(3, 3, |p, q| r[p][q] - if p == q { 1.0 } else { 0.0 });
    let rot_sv = svd(&rm)?;
    let axis: [f64; 3] = std::array::from_fn(|p| rot_sv.v.get(p, 2));
    let identity = rot_sv.singular_values[0] < 1e-12;
    let e1 = if axis[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = e1.iter().zip(&axis).map(|(a, b)| a * b).sum::<f64>();
    let mut uu = [e1[0] - d * axis[0], e1[1] - d * axis[1], e1[2] - d * axis[2]];
    let un = norm(&uu);
    uu.iter_mut().for_each(|v| *v /= un);
    let vv = [
        axis[1] * uu[2] - axis[2] * uu[1],
        axis[2] * uu[0] - axis[0] * uu[2],
        axis[0] * uu[1] - axis[1] * uu[0],
    ];
    let ru: [f64; 3] = std::array::from_fn(|p| (0..3).map(|q| r[p][q] * uu[q]).sum::<f64>());
    let theta = f64::atan2(
        ru.iter().zip(&vv).map(|(a, b)| a * b).sum::<f64>(),
        ru.iter().zip(&uu).map(|(a, b)| a * b).sum::<f64>(),
    );
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let eig = |k: usize| -> Vec<[c64; 3]> {
        let phase = 2.0 * PI * k as f64 / n0 as f64;
        let close = |a: f64| {
            let d = (a - phase).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d) < 1e-9
        };
        if identity {
            return if k == 0 {
                (0..3)
                    .map(|p| std::array::from_fn(|q| c64::new(if p == q { 1.0 } else { 0.0 }, 0.0)))
                    .collect()
            } else {
                vec![]
            };
        }
        let mut out = Vec::new();
        if close(0.0) {
            out.push(std::array::from_fn(|q| c64::new(axis[q], 0.0)));
        }
        if close(theta) {
            out.push(std::array::from_fn(|q| c64::new(s2 * uu[q], -s2 * vv[q])));
        }
        if close(-theta) {
            out.push(std::array::from_fn(|q| c64::new(s2 * uu[q], s2 * vv[q])));
        }
        out
    };
    // Row patterns at shift 0, keyed by (j, type).
    let mut row0: Vec<&Row> = op.rows.iter().filter(|r| r.orbit.0 == 0).collect();
    row0.sort_by_key(|r| (r.orbit.1, r.orbit.2));
    // Unknown -> (orbit slot j, shift i) or fixed slot.
    enum Place {
        Orbit(usize, usize),
        Fixed(usize),
    }
    let mut place: Vec<Option<Place>> = (0..op.n_unknown_nodes).map(|_| None).collect();
    for (slot, us) in sym.orbits.iter().enumerate() {
        for (i, &u) in us.iter().enumerate() {
            place[u] = Some(Place::Orbit(slot, i));
        }
    }
    for (slot, &u) in sym.fixed.iter().enumerate() {
        place[u] = Some(Place::Fixed(slot));
    }
    let _ = n1;
    let sqrt_n = (n0 as f64).sqrt();
    let mut all = Vec::with_capacity(op.cols());
    for k in 0..n0 {
        let eigs = eig(k);
        let n_orbit_cols = 3 * sym.orbits.len();
        let cols = n_orbit_cols + sym.fixed.len() * eigs.len();
        let rows = row0.len();
        if cols == 0 {
            continue;
        }
        let mut b = vec![c64::new(0.0, 0.0); rows * cols];
        for (ri, row) in row0.iter().enumerate() {
            for &(u, c, v) in &row.entries {
                match place[u].as_ref().expect("unknown placed") {
                    Place::Orbit(slot, i) => {
                        // Column (slot, basis e_q): entry ω^{−k i} (R^i e_q)_c.
                        let ang = -2.0 * PI * (k * i) as f64 / n0 as f64;
                        let ph = c64::new(ang.cos(), ang.sin());
                        for q in 0..3 {
                            let col = 3 * slot + q;
                            b[ri * cols + col] += ph * (v * powers[*i][c][q]);
                        }
                    }
                    Place::Fixed(slot) => {
                        for (e, p) in eigs.iter().enumerate() {
                            let col = n_orbit_cols + slot * eigs.len() + e;
                            b[ri * cols + col] += p[c] * (v * sqrt_n);
                        }
                    }
                }
            }
        }
        let mut sv = complex_singular_values(rows, cols, &b)?;
        if cols > rows {
            sv.extend(std::iter::repeat(0.0).take(cols - rows));
        }
        all.extend(sv);
    }
    Ok(all)
}

/// Counts singular values at or below `rel_tol · σ_max` and checks the gap.
pub fn kernel_dimension(op: &FlexOperator, rel_tol: f64) -> Result<KernelReport, FlexError> {
    let (mut sv, method) = match &op.symmetry {
        Some(sym) => (block_singular_values(op, sym)?, KernelMethod::CyclicBlocks),
        None => {
            let mut sv = singular_values(&op.to_dense())?;
            if op.cols() > op.rows() {
                sv.extend(std::iter::repeat(0.0).take(op.cols() - op.rows()));
            }
            (sv, KernelMethod::Dense)
        }
    };
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.truncate(op.cols());
    Ok(summarize(op.rows(), op.cols(), sv, rel_tol, method))
}

/// Same as [`kernel_dimension`] but always through the dense SVD.
pub fn kernel_dimension_dense(op: &FlexOperator, rel_tol: f64) -> Result<KernelReport, FlexError> {
    let mut sv = singular_values(&op.to_dense())?;
    if op.cols() > op.rows() {
        sv.extend(std::iter::repeat(0.0).take(op.cols() - op.rows()));
    }
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(summarize(op.rows(), op.cols(), sv, rel_tol, KernelMethod::Dense))
}

fn summarize(rows: usize, cols: usize, sv: Vec<f64>, rel_tol: f64, method: KernelMethod) -> KernelReport {
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let cut = rel_tol * sigma_max;
    let dim = sv.iter().filter(|&&s| s <= cut).count();
    let sigma_kernel = sv.iter().copied().filter(|&s| s <= cut).fold(0.0, f64::max);
    let sigma_next = sv
        .iter()
        .copied()
        .filter(|&s| s > cut)
        .fold(f64::INFINITY, f64::min);
    let gap_ratio = if dim == 0 || sigma_next.is_infinite() {
        f64::INFINITY
    } else if sigma_kernel == 0.0 {
        f64::INFINITY
    } else {
        sigma_next / sigma_kernel
    };
    let trivial_dim = 6;
    let verdict = if gap_ratio < 10.0 || dim < trivial_dim {
        KernelVerdict::Indeterminate
    } else if dim == trivial_dim {
        KernelVerdict::Rigid
    } else {
        KernelVerdict::Flexible
    };
    KernelReport {
        rows,
        cols,
        dim,
        trivial_dim,
        sigma_max,
        sigma_kernel,
        sigma_next: if sigma_next.is_finite() { sigma_next } else { 0.0 },
        gap_ratio,
        rel_tol,
        method,
        verdict,
        singular_values: sv,
    }
}
