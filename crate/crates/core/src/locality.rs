//! Locality checkers for unitaries acting on a graph.
//!
//! Three notions are implemented:
//!
//! * Z-local: no matrix entry connects basis states at non-adjacent vertices.
//! * C-local: the operator is a disjoint union of unitary blocks, each on one
//!   vertex or one edge (the structured [`LocalStep`] form).
//! * H-local: the operator is exp(iH) for a Hermitian H with eigenvalues of
//!   magnitude at most pi whose off-vertex entries follow the edge pattern.
//!
//! The H check takes the principal logarithm of the unitary; eigenphases at
//! the branch boundary make the verdict `Inconclusive` rather than guessing a
//! branch.

use std::fmt;

use num_complex::Complex64;

use crate::graph::{Graph, Vertex};
use crate::matrix::{CMat, C_ZERO};
use crate::simcore::{BasisState, LocalStep, SimError};

/// Hard cap for dense operations (eigendecompositions are O(dim^3)).
pub const DENSE_CAP: usize = 1 << 12;
/// Unitarity tolerance for dense inputs.
pub const DENSE_UNITARY_TOL: f64 = 1e-10;
/// Entry tolerance for the Z-locality zero pattern.
pub const Z_ENTRY_TOL: f64 = 1e-12;
/// Default tolerance for H-pattern checks.
pub const H_DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LocalityError {
    NotUnitary { residual: f64 },
    DenseCapExceeded { dim: usize },
    BasisMismatch { expected: usize, got: usize },
    /// The eigendecomposition verification failed: the input is not normal
    /// (or not unitary) to working precision.
    EigendecompositionFailure { residual: f64 },
    UnknownBasisState { state: BasisState },
}

impl fmt::Display for LocalityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalityError::NotUnitary { residual } => {
                write!(f, "matrix unitarity residual {residual:.3e} exceeds {DENSE_UNITARY_TOL:.0e}")
            }
            LocalityError::DenseCapExceeded { dim } => {
                write!(f, "dimension {dim} exceeds dense cap {DENSE_CAP}")
            }
            LocalityError::BasisMismatch { expected, got } => {
                write!(f, "basis annotation has {got} entries, matrix dimension is {expected}")
            }
            LocalityError::EigendecompositionFailure { residual } => {
                write!(f, "eigendecomposition residual {residual:.3e}: input is not normal")
            }
            LocalityError::UnknownBasisState { state } => {
                write!(f, "step names basis state (v{}, {}) outside the dense basis", state.vertex + 1, state.work)
            }
        }
    }
}

impl std::error::Error for LocalityError {}

/// Dense unitary with a basis annotation mapping each index to (vertex, work).
#[derive(Debug, Clone)]
pub struct DenseUnitary {
    pub mat: CMat,
    pub basis: Vec<(Vertex, u64)>,
}

impl DenseUnitary {
    pub fn new(mat: CMat, basis: Vec<(Vertex, u64)>) -> Result<Self, LocalityError> {
        if mat.dim() > DENSE_CAP {
            return Err(LocalityError::DenseCapExceeded { dim: mat.dim() });
        }
        if basis.len() != mat.dim() {
            return Err(LocalityError::BasisMismatch {
                expected: mat.dim(),
                got: basis.len(),
            });
        }
        let residual = mat.unitarity_residual();
        if residual > DENSE_UNITARY_TOL {
            return Err(LocalityError::NotUnitary { residual });
        }
        Ok(DenseUnitary { mat, basis })
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }
}

/// One offending entry of a zero-pattern check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryViolation {
    pub row: usize,
    pub col: usize,
    pub row_vertex: Vertex,
    pub col_vertex: Vertex,
    pub magnitude: f64,
}

/// Result of [`check_z_local`].
#[derive(Debug, Clone, PartialEq)]
pub struct ZReport {
    pub is_local: bool,
    pub violations: Vec<EntryViolation>,
}

/// True iff every entry between distinct, non-adjacent vertices has magnitude
/// at most [`Z_ENTRY_TOL`]; all offending entries are reported.
pub fn check_z_local(u: &DenseUnitary, g: &Graph) -> ZReport {
    let mut violations = Vec::new();
    let n = u.dim();
    for row in 0..n {
        let (rv, _) = u.basis[row];
        for col in 0..n {
            let (cv, _) = u.basis[col];
            if rv != cv && !g.has_edge(rv, cv) {
                let magnitude = u.mat[(row, col)].norm();
                if magnitude > Z_ENTRY_TOL {
                    violations.push(EntryViolation {
                        row,
                        col,
                        row_vertex: rv,
                        col_vertex: cv,
                        magnitude,
                    });
                }
            }
        }
    }
    ZReport {
        is_local: violations.is_empty(),
        violations,
    }
}

/// Result of [`check_c_local`].
#[derive(Debug, Clone, PartialEq)]
pub struct CReport {
    pub is_local: bool,
    pub cause: Option<SimError>,
}

/// Structured C-locality check: partition disjointness, per-block vertex
/// support, per-block unitarity. Same validation the simulator enforces on
/// every application.
pub fn check_c_local(step: &LocalStep, g: &Graph) -> CReport {
    match step.validate(g) {
        Ok(()) => CReport {
            is_local: true,
            cause: None,
        },
        Err(e) => CReport {
            is_local: false,
            cause: Some(e),
        },
    }
}

/// Verdict of the H-locality check.
#[derive(Debug, Clone, PartialEq)]
pub enum HVerdict {
    Local,
    NonLocal { violations: Vec<EntryViolation> },
    /// Some eigenphase sits within tolerance of the +-pi branch boundary, so
    /// the principal logarithm is ambiguous.
    Inconclusive,
}

/// Checks whether `u = exp(iH)` for a Hermitian H with the edge-supported
/// zero pattern and eigenvalues of magnitude at most pi. Eigenphases are
/// taken on the principal branch; phases within `tol` of the boundary yield
/// [`HVerdict::Inconclusive`].
pub fn check_h_local(u: &DenseUnitary, g: &Graph, tol: f64) -> Result<HVerdict, LocalityError> {
    let (vecs, phases) = unitary_eigen(&u.mat)?;
    if phases
        .iter()
        .any(|&t| (std::f64::consts::PI - t.abs()) <= tol)
    {
        return Ok(HVerdict::Inconclusive);
    }
    // H = V diag(theta) V†; check the forbidden entries.
    let n = u.dim();
    let mut violations = Vec::new();
    for row in 0..n {
        let (rv, _) = u.basis[row];
        for col in 0..n {
            let (cv, _) = u.basis[col];
            if rv == cv || g.has_edge(rv, cv) {
                continue;
            }
            let mut entry = C_ZERO;
            for k in 0..n {
                entry += vecs[(row, k)] * phases[k] * vecs[(col, k)].conj();
            }
            if entry.norm() > tol {
                violations.push(EntryViolation {
                    row,
                    col,
                    row_vertex: rv,
                    col_vertex: cv,
                    magnitude: entry.norm(),
                });
            }
        }
    }
    if violations.is_empty() {
        Ok(HVerdict::Local)
    } else {
        Ok(HVerdict::NonLocal { violations })
    }
}

/// Densifies an ordered step sequence over an explicit basis: the result is
/// the product U = S_k ... S_2 S_1 of the steps as matrices, i.e. the operator
/// that applies `steps[0]` first.
pub fn compose_to_dense(
    steps: &[LocalStep],
    basis: &[(Vertex, u64)],
) -> Result<CMat, LocalityError> {
    let dim = basis.len();
    if dim > DENSE_CAP {
        return Err(LocalityError::DenseCapExceeded { dim });
    }
    let index_of = |s: &BasisState| -> Option<usize> {
        basis
            .iter()
            .position(|&(v, w)| v == s.vertex && w == s.work && s.cluster.is_none())
    };
    let mut total = CMat::identity(dim);
    for step in steps {
        let mut d = CMat::identity(dim);
        for block in &step.blocks {
            let mat = &step.matrices[block.mat];
            let mut idx = Vec::with_capacity(block.states.len());
            for s in &block.states {
                let i = index_of(s).ok_or(LocalityError::UnknownBasisState { state: *s })?;
                idx.push(i);
            }
            for &gi in &idx {
                d[(gi, gi)] = C_ZERO;
            }
            for (br, &gr) in idx.iter().enumerate() {
                for (bc, &gc) in idx.iter().enumerate() {
                    d[(gr, gc)] = mat[(br, bc)];
                }
            }
        }
        total = d.mul(&total);
    }
    Ok(total)
}

/// Matrix exponential exp(iH) of a Hermitian matrix, via eigendecomposition.
pub fn expi_hermitian(h: &CMat) -> CMat {
    let (vecs, vals) = hermitian_eigen(h);
    let n = h.dim();
    let mut out = CMat::zeros(n);
    for r in 0..n {
        for c in 0..n {
            let mut acc = C_ZERO;
            for k in 0..n {
                let phase = Complex64::from_polar(1.0, vals[k]);
                acc += vecs[(r, k)] * phase * vecs[(c, k)].conj();
            }
            out[(r, c)] = acc;
        }
    }
    out
}

/// Operator norm (largest |eigenvalue|) of a Hermitian matrix.
pub fn hermitian_norm(h: &CMat) -> f64 {
    let (_, vals) = hermitian_eigen(h);
    vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix. Returns (V, vals)
/// with the columns of V orthonormal eigenvectors: A = V diag(vals) V†.
pub fn hermitian_eigen(a: &CMat) -> (CMat, Vec<f64>) {
    let n = a.dim();
    let mut m = a.clone();
    let mut v = CMat::identity(n);
    let scale: f64 = (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)].norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
        .max(1.0);
    let tol = 1e-14 * scale;
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(m[(p, q)].norm());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let z = m[(p, q)];
                let r = z.norm();
                if r <= tol {
                    continue;
                }
                let alpha = m[(p, p)].re;
                let beta = m[(q, q)].re;
                let phi = z.arg();
                let theta = 0.5 * (2.0 * r).atan2(alpha - beta);
                let (s, c) = theta.sin_cos();
                // J has columns (c, s e^{-i phi}) and (-s, c e^{-i phi}):
                // exact eigenvectors of the 2x2 Hermitian subblock.
                let e = Complex64::from_polar(1.0, -phi);
                let jpp = Complex64::new(c, 0.0);
                let jqp = s * e;
                let jpq = Complex64::new(-s, 0.0);
                let jqq = c * e;
                // m <- J† m J ; apply to columns then rows.
                for i in 0..n {
                    let (aip, aiq) = (m[(i, p)], m[(i, q)]);
                    m[(i, p)] = aip * jpp + aiq * jqp;
                    m[(i, q)] = aip * jpq + aiq * jqq;
                }
                for i in 0..n {
                    let (api, aqi) = (m[(p, i)], m[(q, i)]);
                    m[(p, i)] = jpp.conj() * api + jqp.conj() * aqi;
                    m[(q, i)] = jpq.conj() * api + jqq.conj() * aqi;
                }
                // Clamp the rotated-away entries to keep Hermitian structure.
                m[(p, q)] = C_ZERO;
                m[(q, p)] = C_ZERO;
                for i in 0..n {
                    let (vip, viq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = vip * jpp + viq * jqp;
                    v[(i, q)] = vip * jpq + viq * jqq;
                }
            }
        }
    }
    let vals = (0..n).map(|i| m[(i, i)].re).collect();
    (v, vals)
}

/// Eigendecomposition of a unitary (normal) matrix: returns (V, theta) with
/// U = V diag(e^{i theta}) V† and theta on the principal branch (-pi, pi].
///
/// Strategy: jointly diagonalize the commuting Hermitian pair
/// C = (U + U†)/2 and S = (U - U†)/(2i); the phase of each eigenvalue is
/// atan2(s, c). Degenerate C-eigenspaces are resolved by diagonalizing S
/// restricted to them. The decomposition is verified against U; failure means
/// the input was not normal.
pub fn unitary_eigen(u: &CMat) -> Result<(CMat, Vec<f64>), LocalityError> {
    let n = u.dim();
    if n > DENSE_CAP {
        return Err(LocalityError::DenseCapExceeded { dim: n });
    }
    let ud = u.dagger();
    let mut c_mat = CMat::zeros(n);
    let mut s_mat = CMat::zeros(n);
    let half = Complex64::new(0.5, 0.0);
    let half_i = Complex64::new(0.0, -0.5); // 1/(2i)
    for i in 0..n {
        for j in 0..n {
            c_mat[(i, j)] = (u[(i, j)] + ud[(i, j)]) * half;
            s_mat[(i, j)] = (u[(i, j)] - ud[(i, j)]) * half_i;
        }
    }
    let (mut vecs, cvals) = hermitian_eigen(&c_mat);

    // S in the C eigenbasis.
    let mut s_rot = CMat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = C_ZERO;
            for k in 0..n {
                let mut inner = C_ZERO;
                for l in 0..n {
                    inner += s_mat[(k, l)] * vecs[(l, j)];
                }
                acc += vecs[(k, i)].conj() * inner;
            }
            s_rot[(i, j)] = acc;
        }
    }

    // Group (near-)degenerate C eigenvalues and diagonalize S inside each
    // group. cvals are in [-1, 1]; an absolute gap works.
    let cluster_gap = 1e-7;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cvals[a].partial_cmp(&cvals[b]).unwrap());
    let mut svals = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && (cvals[order[j]] - cvals[order[j - 1]]).abs() <= cluster_gap {
            j += 1;
        }
        let group: Vec<usize> = order[i..j].to_vec();
        if group.len() == 1 {
            let g = group[0];
            svals[g] = s_rot[(g, g)].re;
        } else {
            let k = group.len();
            let mut sub = CMat::zeros(k);
            for (a, &ga) in group.iter().enumerate() {
                for (b, &gb) in group.iter().enumerate() {
                    sub[(a, b)] = s_rot[(ga, gb)];
                }
            }
            let (w, wvals) = hermitian_eigen(&sub);
            // Rotate the group's eigenvector columns by w.
            let old: Vec<Vec<Complex64>> = group
                .iter()
                .map(|&g| (0..n).map(|r| vecs[(r, g)]).collect())
                .collect();
            for (b, &gb) in group.iter().enumerate() {
                for r in 0..n {
                    let mut acc = C_ZERO;
                    for (a, col) in old.iter().enumerate() {
                        acc += col[r] * w[(a, b)];
                    }
                    vecs[(r, gb)] = acc;
                }
                svals[gb] = wvals[b];
            }
        }
        i = j;
    }

    let phases: Vec<f64> = (0..n).map(|k| svals[k].atan2(cvals[k])).collect();

    // Verify U V = V diag(e^{i theta}).
    let mut residual = 0.0f64;
    for col in 0..n {
        let phase = Complex64::from_polar(1.0, phases[col]);
        for row in 0..n {
            let mut acc = C_ZERO;
            for k in 0..n {
                acc += u[(row, k)] * vecs[(k, col)];
            }
            residual = residual.max((acc - phase * vecs[(row, col)]).norm());
        }
    }
    if residual > 1e-8 {
        return Err(LocalityError::EigendecompositionFailure { residual });
    }
    Ok((vecs, phases))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::make_grid;
    use crate::matrix::C_ONE;
    use rand::Rng;
    use rand::SeedableRng;

    fn random_hermitian(dim: usize, rng: &mut impl Rng) -> CMat {
        let mut h = CMat::zeros(dim);
        for i in 0..dim {
            h[(i, i)] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in i + 1..dim {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
        h
    }

    #[test]
    fn hermitian_eigen_reconstructs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for dim in [2, 3, 5, 8, 13] {
            let h = random_hermitian(dim, &mut rng);
            let (v, vals) = hermitian_eigen(&h);
            // A = V diag V†
            let mut rec = CMat::zeros(dim);
            for r in 0..dim {
                for c in 0..dim {
                    let mut acc = C_ZERO;
                    for k in 0..dim {
                        acc += v[(r, k)] * vals[k] * v[(c, k)].conj();
                    }
                    rec[(r, c)] = acc;
                }
            }
            assert!(rec.max_abs_diff(&h) < 1e-10, "dim {dim}");
            assert!(v.unitarity_residual() < 1e-10);
        }
    }

    #[test]
    fn unitary_eigen_handles_degenerate_phases() {
        // diag(i, i, -i) has a doubly degenerate C eigenvalue 0.
        let mut u = CMat::zeros(3);
        u[(0, 0)] = Complex64::new(0.0, 1.0);
        u[(1, 1)] = Complex64::new(0.0, 1.0);
        u[(2, 2)] = Complex64::new(0.0, -1.0);
        let (_, phases) = unitary_eigen(&u).unwrap();
        let mut sorted = phases.clone();
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0] + std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        assert!((sorted[1] - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        assert!((sorted[2] - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn unitary_eigen_rejects_non_normal() {
        let mut m = CMat::identity(2);
        m[(0, 1)] = Complex64::new(0.7, 0.0); // upper triangular, not normal
        assert!(matches!(
            unitary_eigen(&m),
            Err(LocalityError::EigendecompositionFailure { .. })
        ));
    }

    fn path3_basis(work_bits: u32) -> Vec<(Vertex, u64)> {
        let w = 1u64 << work_bits;
        let mut basis = Vec::new();
        for v in 0..3u32 {
            for z in 0..w {
                basis.push((v, z));
            }
        }
        basis
    }

    #[test]
    fn identity_is_z_and_h_local() {
        let g = make_grid(1, 3).unwrap().graph;
        let basis = path3_basis(0);
        let u = DenseUnitary::new(CMat::identity(3), basis).unwrap();
        assert!(check_z_local(&u, &g).is_local);
        assert_eq!(check_h_local(&u, &g, H_DEFAULT_TOL).unwrap(), HVerdict::Local);
    }

    #[test]
    fn nonadjacent_swap_fails_z_with_violations() {
        let g = make_grid(1, 3).unwrap().graph;
        // Swap amplitude between vertices 0 and 2 (distance 2 on the path).
        let mut m = CMat::zeros(3);
        m[(0, 2)] = C_ONE;
        m[(2, 0)] = C_ONE;
        m[(1, 1)] = C_ONE;
        let u = DenseUnitary::new(m, path3_basis(0)).unwrap();
        let report = check_z_local(&u, &g);
        assert!(!report.is_local);
        assert!(report.violations.len() >= 2);
        for v in &report.violations {
            assert!((v.row_vertex, v.col_vertex) == (0, 2) || (v.row_vertex, v.col_vertex) == (2, 0));
        }
    }

    #[test]
    fn c_local_examples() {
        let g = make_grid(1, 3).unwrap().graph;
        let flip = LocalStep::phase_flip(vec![BasisState::new(1, 1)]);
        assert!(check_c_local(&flip, &g).is_local);

        let far = LocalStep::swaps(vec![(BasisState::new(0, 0), BasisState::new(2, 0))]);
        let rep = check_c_local(&far, &g);
        assert!(!rep.is_local);
        assert!(matches!(rep.cause, Some(SimError::LocalityViolation { .. })));

        let bad = CMat::from_rows(vec![vec![Complex64::new(0.5, 0.0)]]);
        let nonunitary = LocalStep::vertex_local(vec![(vec![BasisState::new(0, 0)], bad)]);
        let rep = check_c_local(&nonunitary, &g);
        assert!(!rep.is_local);
        assert!(matches!(rep.cause, Some(SimError::NonUnitaryBlock { .. })));
    }

    #[test]
    fn densified_c_local_step_is_z_local() {
        let g = make_grid(1, 3).unwrap().graph;
        let basis = path3_basis(1);
        let step = LocalStep::split_rotations(
            0.71,
            vec![
                (BasisState::new(0, 0), BasisState::new(1, 0)),
                (BasisState::new(0, 1), BasisState::new(1, 1)),
            ],
        );
        let m = compose_to_dense(std::slice::from_ref(&step), &basis).unwrap();
        let u = DenseUnitary::new(m, basis).unwrap();
        assert!(check_z_local(&u, &g).is_local);
    }

    #[test]
    fn single_edge_hamiltonian_roundtrip_is_h_local() {
        let g = make_grid(1, 3).unwrap().graph;
        let basis = path3_basis(1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            // Hermitian supported on the edge (1, 2) states: indices 2..6.
            let mut h = CMat::zeros(6);
            let sub = random_hermitian(4, &mut rng);
            for a in 0..4 {
                for b in 0..4 {
                    h[(2 + a, 2 + b)] = sub[(a, b)];
                }
            }
            // Scale to operator norm <= pi/2.
            let norm = hermitian_norm(&h);
            if norm > 0.0 {
                let scale = std::f64::consts::FRAC_PI_2 / norm * 0.99;
                for a in 0..6 {
                    for b in 0..6 {
                        h[(a, b)] *= scale;
                    }
                }
            }
            let u = DenseUnitary::new(expi_hermitian(&h), basis.clone()).unwrap();
            assert_eq!(check_h_local(&u, &g, H_DEFAULT_TOL).unwrap(), HVerdict::Local);
        }
    }

    #[test]
    fn minus_identity_is_inconclusive() {
        let g = make_grid(1, 3).unwrap().graph;
        let mut m = CMat::identity(3);
        for i in 0..3 {
            m[(i, i)] = Complex64::new(-1.0, 0.0);
        }
        let u = DenseUnitary::new(m, path3_basis(0)).unwrap();
        assert_eq!(
            check_h_local(&u, &g, H_DEFAULT_TOL).unwrap(),
            HVerdict::Inconclusive
        );
    }

    #[test]
    fn nonadjacent_mix_fails_h() {
        let g = make_grid(1, 3).unwrap().graph;
        // exp(iH) for H coupling vertices 0 and 2: phases well inside the
        // branch, but the pattern is forbidden.
        let mut h = CMat::zeros(3);
        h[(0, 2)] = Complex64::new(0.4, 0.0);
        h[(2, 0)] = Complex64::new(0.4, 0.0);
        let u = DenseUnitary::new(expi_hermitian(&h), path3_basis(0)).unwrap();
        match check_h_local(&u, &g, H_DEFAULT_TOL).unwrap() {
            HVerdict::NonLocal { violations } => assert!(!violations.is_empty()),
            v => panic!("expected NonLocal, got {v:?}"),
        }
    }

    #[test]
    fn compose_examples() {
        let g = make_grid(1, 3).unwrap().graph;
        let basis = path3_basis(0);
        // Empty sequence -> identity.
        let id = compose_to_dense(&[], &basis).unwrap();
        assert!(id.max_abs_diff(&CMat::identity(3)) < 1e-15);

        // Step then inverse -> identity.
        let step = LocalStep::split_rotations(
            0.37,
            vec![(BasisState::new(1, 0), BasisState::new(2, 0))],
        );
        let m = compose_to_dense(&[step.clone(), step.inverted()], &basis).unwrap();
        assert!(m.max_abs_diff(&CMat::identity(3)) < 1e-12);
        let _ = g;
    }
}
