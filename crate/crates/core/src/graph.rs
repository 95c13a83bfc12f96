//! Interconnection matrices and their directed graphs.
//!
//! A continuous-time interconnection Γ has nonnegative off-diagonal entries and
//! zero row sums; a discrete-time interconnection Λ is row stochastic. Node `i`
//! has an edge to node `j` whenever the `(i, j)` entry is positive, and the
//! matrix is *connected* when some node can be reached along directed paths
//! from every other node.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Result, SyncError};
use crate::tol::{TAU_EDGE, TAU_ROW, TAU_SOLVE};
use crate::TimeKind;

/// A validated coupling matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InterconnectionMatrix {
    entries: DMatrix<f64>,
    kind: TimeKind,
}

/// The normalized left fixed vector `r` (`rᵀΓ = 0` or `rᵀΛ = rᵀ`, `rᵀ1 = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct LeftFixedVector(DVector<f64>);

impl LeftFixedVector {
    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `1rᵀ`, the limit of `e^{Γt}` or `Λᵏ`.
    pub fn projector(&self) -> DMatrix<f64> {
        let p = self.0.len();
        DMatrix::from_fn(p, p, |_, j| self.0[j])
    }
}

/// Checks the sign and row-sum constraints and re-projects the rows.
pub fn validate_interconnection(m: &DMatrix<f64>, kind: TimeKind) -> Result<InterconnectionMatrix> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(SyncError::Shape(format!(
            "interconnection must be square and nonempty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(SyncError::Shape(
            "interconnection has non-finite entries".into(),
        ));
    }
    let p = m.nrows();
    let mut entries = m.clone();
    for i in 0..p {
        for j in 0..p {
            let constrained = kind == TimeKind::Discrete || i != j;
            if !constrained {
                continue;
            }
            let v = entries[(i, j)];
            if v < -TAU_ROW {
                return Err(SyncError::NegativeCoupling {
                    row: i,
                    col: j,
                    value: v,
                });
            }
            if v < 0.0 {
                entries[(i, j)] = 0.0;
            }
        }
    }
    let expected = match kind {
        TimeKind::Continuous => 0.0,
        TimeKind::Discrete => 1.0,
    };
    for i in 0..p {
        let sum: f64 = entries.row(i).sum();
        if (sum - expected).abs() > TAU_ROW {
            return Err(SyncError::RowSum {
                row: i,
                sum,
                expected,
            });
        }
        match kind {
            TimeKind::Continuous => {
                let off: f64 = (0..p).filter(|&j| j != i).map(|j| entries[(i, j)]).sum();
                entries[(i, i)] = -off;
            }
            TimeKind::Discrete => {
                entries.row_mut(i).scale_mut(1.0 / sum);
            }
        }
    }
    Ok(InterconnectionMatrix { entries, kind })
}

impl InterconnectionMatrix {
    pub fn continuous(rows: &[&[f64]]) -> Result<Self> {
        validate_interconnection(&from_rows(rows)?, TimeKind::Continuous)
    }

    pub fn discrete(rows: &[&[f64]]) -> Result<Self> {
        validate_interconnection(&from_rows(rows)?, TimeKind::Discrete)
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn kind(&self) -> TimeKind {
        self.kind
    }

    pub fn p(&self) -> usize {
        self.entries.nrows()
    }

    /// Γ itself, or `Λ - I` in discrete time: the matrix multiplying `Q` in the array.
    pub fn coupling(&self) -> DMatrix<f64> {
        match self.kind {
            TimeKind::Continuous => self.entries.clone(),
            TimeKind::Discrete => &self.entries - DMatrix::identity(self.p(), self.p()),
        }
    }

    /// `hΓ`; connectedness and `r` are unchanged.
    pub fn scaled(&self, h: f64) -> Result<Self> {
        if self.kind != TimeKind::Continuous {
            return Err(SyncError::Unsupported(
                "only continuous interconnections can be rescaled".into(),
            ));
        }
        if !(h > 0.0) {
            return Err(SyncError::NonPositive {
                name: "scale",
                value: h,
            });
        }
        Ok(InterconnectionMatrix {
            entries: &self.entries * h,
            kind: self.kind,
        })
    }

    /// Directed edges `(i, j)` with `m_ij > τ_edge`, `i ≠ j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let p = self.p();
        let mut out = Vec::new();
        for i in 0..p {
            for j in 0..p {
                if i != j && self.entries[(i, j)] > TAU_EDGE {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        is_connected(self)
    }

    /// Distance of the non-consensus spectrum from instability.
    ///
    /// Continuous: the largest real part among eigenvalues other than the one
    /// nearest zero (negative when connected). Discrete: the largest modulus
    /// among eigenvalues other than the one nearest one (below one when
    /// connected and aperiodic). `None` for `p = 1`.
    pub fn spectral_margin(&self) -> Option<f64> {
        let eig = self.entries.complex_eigenvalues();
        if eig.len() < 2 {
            return None;
        }
        let anchor = match self.kind {
            TimeKind::Continuous => nalgebra::Complex::new(0.0, 0.0),
            TimeKind::Discrete => nalgebra::Complex::new(1.0, 0.0),
        };
        let skip = (0..eig.len())
            .min_by(|&a, &b| {
                (eig[a] - anchor)
                    .norm()
                    .total_cmp(&(eig[b] - anchor).norm())
            })
            .unwrap();
        let rest = (0..eig.len()).filter(|&i| i != skip).map(|i| eig[i]);
        Some(match self.kind {
            TimeKind::Continuous => rest.map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
            TimeKind::Discrete => rest.map(|z| z.norm()).fold(0.0, f64::max),
        })
    }

    /// Groups of nodes joined by edges in either direction.
    pub fn weak_components(&self) -> Vec<Vec<usize>> {
        let p = self.p();
        let mut label = vec![usize::MAX; p];
        let mut comps = Vec::new();
        for s in 0..p {
            if label[s] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut comp = vec![s];
            label[s] = id;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for (v, lv) in label.iter_mut().enumerate() {
                    let linked = u != v
                        && (self.entries[(u, v)] > TAU_EDGE || self.entries[(v, u)] > TAU_EDGE);
                    if linked && *lv == usize::MAX {
                        *lv = id;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// The principal submatrix on `nodes`, if it is itself an interconnection
    /// (no coupling leaves the group).
    pub fn restrict(&self, nodes: &[usize]) -> Result<Self> {
        let sub = DMatrix::from_fn(nodes.len(), nodes.len(), |a, b| {
            self.entries[(nodes[a], nodes[b])]
        });
        validate_interconnection(&sub, self.kind)
    }
}

fn from_rows(rows: &[&[f64]]) -> Result<DMatrix<f64>> {
    let p = rows.len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(SyncError::Shape(
            "rows must all have length equal to the row count".into(),
        ));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
}

/// True iff some node is reachable along directed edges from every node.
pub fn is_connected(m: &InterconnectionMatrix) -> bool {
    let p = m.p();
    // reversed adjacency: incoming[j] lists i with an edge i -> j
    let mut incoming = vec![Vec::new(); p];
    for (i, j) in m.edges() {
        incoming[j].push(i);
    }
    (0..p).any(|root| {
        let mut seen = vec![false; p];
        seen[root] = true;
        let mut count = 1;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in &incoming[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == p
    })
}

/// Solves the bordered system `[Mᵀ - κI; 1ᵀ] r = [0; 1]` (κ = 0 or 1).
pub fn left_fixed_vector(m: &InterconnectionMatrix) -> Result<LeftFixedVector> {
    if !is_connected(m) {
        return Err(SyncError::NotConnected);
    }
    let p = m.p();
    let generator = m.coupling();
    let mut bordered = DMatrix::zeros(p + 1, p);
    bordered
        .view_mut((0, 0), (p, p))
        .copy_from(&generator.transpose());
    bordered.row_mut(p).fill(1.0);
    let mut rhs = DVector::zeros(p + 1);
    rhs[p] = 1.0;

    let svd = bordered.clone().svd(true, true);
    let smin = svd.singular_values.min();
    if smin < TAU_SOLVE * svd.singular_values.max().max(1.0) {
        return Err(SyncError::NotConnected);
    }
    let mut r = svd
        .solve(&rhs, f64::EPSILON)
        .map_err(|e| SyncError::Unsupported(e.to_string()))?;
    for v in r.iter_mut() {
        if *v < -TAU_SOLVE {
            return Err(SyncError::NotConnected);
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s = r.sum();
    r /= s;
    Ok(LeftFixedVector(r))
}

/// Random connected interconnection: a random in-tree towards a random root
/// plus sparse extra edges. Discrete instances keep a positive self weight.
pub fn random_connected<R: Rng + ?Sized>(
    p: usize,
    kind: TimeKind,
    rng: &mut R,
) -> InterconnectionMatrix {
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let mut w = DMatrix::zeros(p, p);
    for k in 1..p {
        let parent = order[rng.random_range(0..k)];
        w[(order[k], parent)] += rng.random_range(0.5..1.5);
    }
    for i in 0..p {
        for j in 0..p {
            if i != j && rng.random_bool(0.3) {
                w[(i, j)] += rng.random_range(0.0..1.0);
            }
        }
    }
    build(w, kind, rng)
}

/// Random interconnection made of connected groups (possibly singletons) with
/// no coupling between groups. Every weak component is itself connected.
pub fn random_block_interconnection<R: Rng + ?Sized>(
    p: usize,
    kind: TimeKind,
    rng: &mut R,
) -> InterconnectionMatrix {
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let mut w = DMatrix::zeros(p, p);
    let mut start = 0;
    while start < p {
        let size = rng.random_range(1..=p - start);
        let group = &order[start..start + size];
        if size > 1 {
            let sub = random_connected(size, TimeKind::Continuous, rng);
            for a in 0..size {
                for b in 0..size {
                    if a != b {
                        w[(group[a], group[b])] = sub.entries[(a, b)];
                    }
                }
            }
        }
        start += size;
    }
    build(w, kind, rng)
}

fn build<R: Rng + ?Sized>(
    mut w: DMatrix<f64>,
    kind: TimeKind,
    rng: &mut R,
) -> InterconnectionMatrix {
    let p = w.nrows();
    match kind {
        TimeKind::Continuous => {
            for i in 0..p {
                w[(i, i)] = 0.0;
                let s = w.row(i).sum();
                w[(i, i)] = -s;
            }
        }
        TimeKind::Discrete => {
            for i in 0..p {
                w[(i, i)] = rng.random_range(0.2..1.0);
                let s = w.row(i).sum();
                w.row_mut(i).scale_mut(1.0 / s);
            }
        }
    }
    validate_interconnection(&w, kind).expect("generated interconnection is valid")
}

/// Parses a whitespace-separated matrix, one row per line; `#` starts a comment.
pub fn parse_matrix_text(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| SyncError::Parse(format!("line {}: {s}: {e}", lineno + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    matrix_from_rows(&rows)
}

/// Row-major nested list to matrix.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(SyncError::Shape("empty matrix".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(SyncError::Shape("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn validates_examples() {
        let g = InterconnectionMatrix::continuous(&[&[-1.0, 1.0], &[1.0, -1.0]]).unwrap();
        assert_eq!(g.p(), 2);
        let l = InterconnectionMatrix::discrete(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap();
        assert_eq!(l.kind(), TimeKind::Discrete);
        let err = InterconnectionMatrix::continuous(&[&[-1.0, 2.0], &[1.0, -1.0]]).unwrap_err();
        assert!(matches!(err, SyncError::RowSum { row: 0, .. }));
    }

    #[test]
    fn rejects_negative_coupling_and_shape() {
        let err = InterconnectionMatrix::continuous(&[&[1.0, -1.0], &[0.0, 0.0]]).unwrap_err();
        assert!(matches!(
            err,
            SyncError::NegativeCoupling { row: 0, col: 1, .. }
        ));
        let err = InterconnectionMatrix::discrete(&[&[1.5, -0.5], &[0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, SyncError::NegativeCoupling { .. }));
        let err =
            validate_interconnection(&DMatrix::zeros(2, 3), TimeKind::Continuous).unwrap_err();
        assert!(matches!(err, SyncError::Shape(_)));
    }

    #[test]
    fn reprojection_removes_row_drift() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0 + 4e-10, 1.0, 0.3, -0.3 - 5e-10]);
        let g = validate_interconnection(&m, TimeKind::Continuous).unwrap();
        let ones = DVector::from_element(2, 1.0);
        assert_eq!(g.entries() * &ones, DVector::zeros(2));
        let m = DMatrix::from_row_slice(2, 2, &[0.25, 0.75 + 5e-10, 0.5, 0.5]);
        let l = validate_interconnection(&m, TimeKind::Discrete).unwrap();
        assert!((l.entries().row(0).sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn connectedness_examples() {
        let chain = InterconnectionMatrix::continuous(&[&[-1.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(chain.is_connected());
        let none = InterconnectionMatrix::continuous(&[&[0.0, 0.0], &[0.0, 0.0]]).unwrap();
        assert!(!none.is_connected());
        // two sinks fed by a third node: weakly but not connected
        let fork = InterconnectionMatrix::continuous(&[
            &[0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0],
            &[1.0, 1.0, -2.0],
        ])
        .unwrap();
        assert!(!fork.is_connected());
        assert_eq!(fork.weak_components().len(), 1);
    }

    #[test]
    fn left_vectors_for_small_cases() {
        let sym = InterconnectionMatrix::continuous(&[&[-1.0, 1.0], &[1.0, -1.0]]).unwrap();
        let r = left_fixed_vector(&sym).unwrap();
        assert!((r.as_vector() - DVector::from_vec(vec![0.5, 0.5])).amax() < 1e-14);
        let chain = InterconnectionMatrix::continuous(&[&[-1.0, 1.0], &[0.0, 0.0]]).unwrap();
        let r = left_fixed_vector(&chain).unwrap();
        assert!((r.as_vector() - DVector::from_vec(vec![0.0, 1.0])).amax() < 1e-14);
        let none = InterconnectionMatrix::continuous(&[&[0.0, 0.0], &[0.0, 0.0]]).unwrap();
        assert_eq!(
            left_fixed_vector(&none).unwrap_err(),
            SyncError::NotConnected
        );
    }

    #[test]
    fn left_vector_is_exponential_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = random_connected(4, TimeKind::Continuous, &mut rng);
            let r = left_fixed_vector(&g).unwrap();
            // nalgebra's Padé exponential is the independent route here
            let limit = (g.entries() * 50.0).exp();
            assert!((limit - r.projector()).amax() < 1e-6);
        }
    }

    #[test]
    fn discrete_left_vector_is_power_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let l = random_connected(5, TimeKind::Discrete, &mut rng);
            let r = left_fixed_vector(&l).unwrap();
            let resid =
                (r.as_vector().transpose() * l.entries() - r.as_vector().transpose()).amax();
            assert!(resid < TAU_SOLVE);
            let mut pow = l.entries().clone();
            for _ in 0..10 {
                pow = &pow * &pow;
            }
            assert!((pow - r.projector()).amax() < 1e-8);
        }
    }

    #[test]
    fn spectra_of_connected_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let g = random_connected(5, TimeKind::Continuous, &mut rng);
            assert!(g.spectral_margin().unwrap() < 0.0);
            let l = random_connected(5, TimeKind::Discrete, &mut rng);
            assert!(l.spectral_margin().unwrap() < 1.0);
        }
    }

    #[test]
    fn block_generator_components_are_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let g = random_block_interconnection(6, TimeKind::Continuous, &mut rng);
            for comp in g.weak_components() {
                let sub = g.restrict(&comp).unwrap();
                assert!(sub.is_connected());
            }
        }
    }

    #[test]
    fn parses_text_matrix() {
        let m = parse_matrix_text("# gamma\n-1 1\n 1 -1  # row two\n\n").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]));
        assert!(parse_matrix_text("1 2\n3").is_err());
        assert!(parse_matrix_text("1 x").is_err());
    }
}
