//! Simplicial cones and fans with exact integer arithmetic.
//!
//! A [`Cone`] stores primitive, linearly independent ray vectors together
//! with an exact inequality description (span equations plus dual
//! functionals), so point containment is a handful of integer dot products.
//! A [`Fan`] stores the maximal cones, the full face set, and a cached
//! [`Cone`] per face; construction validates that all pairwise intersections
//! are common faces.
//!
//! Ray coordinates are machine integers with overflow-checked arithmetic;
//! all rank, kernel, and solving computations go through [`crate::exactlin`]
//! and are therefore exact.

use crate::exactlin::{self, Int, IntMatrix};
use crate::par;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Machine-integer lattice coordinate.
pub type Coord = i64;
/// A lattice vector (ray or point).
pub type RayVec = Vec<Coord>;

#[derive(Debug, Error)]
pub enum FanError {
    #[error("zero vector cannot be a ray")]
    ZeroRay,
    #[error("vector has wrong dimension: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("ray {0:?} is not primitive")]
    NonPrimitiveRay(RayVec),
    #[error("duplicate ray {0:?} in cone")]
    DuplicateRay(RayVec),
    #[error("rays are linearly dependent: {0:?}")]
    DependentRays(Vec<RayVec>),
    #[error("coordinate overflow")]
    Overflow,
    #[error("cones overlap improperly: {a:?} and {b:?} meet along direction {witness:?} outside their common face")]
    OverlappingCones { a: Vec<RayVec>, b: Vec<RayVec>, witness: RayVec },
    #[error("cone {0:?} is not in the fan")]
    ConeNotInFan(Vec<RayVec>),
    #[error("fan has maximal cones of unequal dimension")]
    NotPure,
    #[error("cone {0:?} is not smooth")]
    NotSmooth(Vec<RayVec>),
    #[error("ray {0:?} not found in fan")]
    RayNotFound(RayVec),
    #[error("invalid fan data: {0}")]
    InvalidData(String),
    #[error("coordinate index {0} out of range")]
    BadCoordinate(usize),
    #[error("fan has no maximal cones")]
    EmptyFan,
}

/// Overflow-checked vector sum.
pub fn vec_add(a: &[Coord], b: &[Coord]) -> Result<RayVec, FanError> {
    if a.len() != b.len() {
        return Err(FanError::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    a.iter().zip(b).map(|(x, y)| x.checked_add(*y).ok_or(FanError::Overflow)).collect()
}

/// Primitive representative of a nonzero machine-integer vector.
pub fn primitive(v: &[Coord]) -> Result<RayVec, FanError> {
    let mut g: i64 = 0;
    for &x in v {
        g = g.gcd(&x);
    }
    if g == 0 {
        return Err(FanError::ZeroRay);
    }
    Ok(v.iter().map(|&x| x / g).collect())
}

/// Primitive representative of a nonzero big-integer vector, converted back
/// to machine coordinates.
pub fn primitive_big(v: &[Int]) -> Result<RayVec, FanError> {
    let mut g = Int::zero();
    for x in v {
        g = g.gcd(x);
    }
    if g.is_zero() {
        return Err(FanError::ZeroRay);
    }
    v.iter().map(|x| (x / &g).to_i64().ok_or(FanError::Overflow)).collect()
}

pub fn to_big(v: &[Coord]) -> Vec<Int> {
    v.iter().map(|&x| Int::from(x)).collect()
}

/// Matrix whose columns are the given vectors.
pub fn cols_matrix(ambient: usize, vecs: &[RayVec]) -> IntMatrix {
    IntMatrix::from_fn(ambient, vecs.len(), |i, j| Int::from(vecs[j][i]))
}

/// Matrix whose rows are the given vectors.
pub fn rows_matrix(ambient: usize, vecs: &[RayVec]) -> IntMatrix {
    IntMatrix::from_fn(vecs.len(), ambient, |i, j| Int::from(vecs[i][j]))
}

fn row_dot(m: &IntMatrix, i: usize, x: &[Int]) -> Int {
    (0..m.cols()).map(|j| m.at(i, j) * &x[j]).sum()
}

/// A simplicial cone: primitive, linearly independent rays, sorted
/// lexicographically, with a cached exact inequality description.
#[derive(Clone, Debug)]
pub struct Cone {
    ambient: usize,
    rays: Vec<RayVec>,
    /// Basis of the annihilator of the span; rows are the deterministic
    /// basis of the dual quotient lattice M(sigma).
    eqs: IntMatrix,
    /// Row i pairs to a positive multiple of the indicator of ray i:
    /// duals[i] . rays[j] = c_i * delta_ij with c_i > 0.
    duals: IntMatrix,
    smooth: bool,
}

impl PartialEq for Cone {
    fn eq(&self, other: &Self) -> bool {
        self.ambient == other.ambient && self.rays == other.rays
    }
}
impl Eq for Cone {}

impl Cone {
    pub fn new(ambient: usize, mut rays: Vec<RayVec>) -> Result<Cone, FanError> {
        for r in &rays {
            if r.len() != ambient {
                return Err(FanError::DimensionMismatch { expected: ambient, got: r.len() });
            }
            if r.iter().all(|&x| x == 0) {
                return Err(FanError::ZeroRay);
            }
            if primitive(r)? != *r {
                return Err(FanError::NonPrimitiveRay(r.clone()));
            }
        }
        rays.sort();
        for w in rays.windows(2) {
            if w[0] == w[1] {
                return Err(FanError::DuplicateRay(w[0].clone()));
            }
        }
        let k = rays.len();
        let a = rows_matrix(ambient, &rays); // k x n, rows are rays
        let sm = exactlin::smith(&a);
        if sm.rank != k {
            return Err(FanError::DependentRays(rays));
        }
        let smooth = (0..k).all(|i| sm.s.at(i, i) == &Int::from(1));
        let eqs = exactlin::saturated_kernel(&a).transpose();
        let mut duals = IntMatrix::zeros(k, ambient);
        for i in 0..k {
            let mut e = vec![Int::zero(); k];
            e[i] = Int::from(1);
            let (nums, _den) = exactlin::solve_rational(&a, &e)
                .expect("independent rays always admit dual functionals");
            for j in 0..ambient {
                duals.set(i, j, nums[j].clone());
            }
        }
        Ok(Cone { ambient, rays, eqs, duals, smooth })
    }

    pub fn zero(ambient: usize) -> Cone {
        Cone::new(ambient, Vec::new()).expect("zero cone is always valid")
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.rays.len()
    }

    pub fn rays(&self) -> &[RayVec] {
        &self.rays
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    /// Columns are the rays.
    pub fn ray_matrix(&self) -> IntMatrix {
        cols_matrix(self.ambient, &self.rays)
    }

    /// Deterministic basis of M(sigma) = {m : <m, ray> = 0 for all rays},
    /// one basis vector per row. Saturated by construction.
    pub fn m_basis(&self) -> &IntMatrix {
        &self.eqs
    }

    /// Exact point containment: x lies in the span and pairs nonnegatively
    /// with every dual functional.
    pub fn contains(&self, x: &[Coord]) -> bool {
        let xb = to_big(x);
        self.contains_big(&xb)
    }

    pub fn contains_big(&self, xb: &[Int]) -> bool {
        assert_eq!(xb.len(), self.ambient, "point has wrong dimension");
        for i in 0..self.eqs.rows() {
            if !row_dot(&self.eqs, i, xb).is_zero() {
                return false;
            }
        }
        for i in 0..self.duals.rows() {
            if row_dot(&self.duals, i, xb).is_negative() {
                return false;
            }
        }
        true
    }

    /// Does this cone contain the other one (pointwise)?
    pub fn contains_cone(&self, other: &Cone) -> bool {
        other.rays.iter().all(|r| self.contains(r))
    }
}

/// w with K w = 0 for a (d-1) x d matrix K of rank d-1, by cofactor
/// expansion; returns the zero vector when rank < d-1.
fn cofactor_null(k: &IntMatrix) -> Vec<Int> {
    let d = k.cols();
    debug_assert_eq!(k.rows() + 1, d);
    let all_rows: Vec<usize> = (0..k.rows()).collect();
    let mut w = Vec::with_capacity(d);
    for i in 0..d {
        let cols: Vec<usize> = (0..d).filter(|&j| j != i).collect();
        let det = exactlin::det_bareiss(&k.submatrix(&all_rows, &cols));
        w.push(if i % 2 == 0 { det } else { -det });
    }
    w
}

fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        if start >= n || n - start < k - cur.len() {
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(n, k, 0, &mut cur, &mut out);
    out
}

/// Extreme rays of the intersection of two simplicial cones, as sorted
/// primitive vectors. Exact double description in the coefficient space of
/// the first cone.
pub fn cone_intersection(a: &Cone, b: &Cone) -> Vec<RayVec> {
    assert_eq!(a.ambient, b.ambient, "ambient mismatch");
    if a.dim() == 0 || b.dim() == 0 {
        return Vec::new();
    }
    let ra = a.ray_matrix(); // n x ka
    // Points of a are ra * lambda with lambda >= 0; membership in b adds
    // b.eqs * ra * lambda = 0 and b.duals * ra * lambda >= 0.
    let eq = b.eqs.mul(&ra);
    let n_basis = exactlin::saturated_kernel(&eq); // ka x d
    let d = n_basis.cols();
    if d == 0 {
        return Vec::new();
    }
    let ineq = n_basis.vstack(&b.duals.mul(&ra).mul(&n_basis)); // (ka + kb) x d
    let mut found: BTreeSet<RayVec> = BTreeSet::new();
    let cols: Vec<usize> = (0..d).collect();
    for rows_sel in subsets_of_size(ineq.rows(), d - 1) {
        let sub = ineq.submatrix(&rows_sel, &cols);
        let mut w = cofactor_null(&sub);
        if w.iter().all(|x| x.is_zero()) {
            continue;
        }
        let fw: Vec<Int> = (0..ineq.rows()).map(|i| row_dot(&ineq, i, &w)).collect();
        if fw.iter().any(|x| x.is_negative()) {
            if fw.iter().any(|x| x.is_positive()) {
                continue;
            }
            for x in &mut w {
                *x = -x.clone();
            }
        }
        let lambda = n_basis.mul_vec(&w);
        let x = ra.mul_vec(&lambda);
        debug_assert!(!x.iter().all(|v| v.is_zero()), "extreme ray maps to zero");
        if let Ok(p) = primitive_big(&x) {
            found.insert(p);
        }
    }
    found.into_iter().collect()
}

/// Is x a nonnegative rational combination of the generators? Conic
/// Caratheodory over linearly independent subsets; exact.
pub fn point_in_cone(ambient: usize, gens: &[RayVec], x: &[Coord]) -> bool {
    if x.iter().all(|&v| v == 0) {
        return true;
    }
    if gens.is_empty() {
        return false;
    }
    let g = cols_matrix(ambient, gens);
    let r = exactlin::smith(&g).rank;
    let xb = to_big(x);
    for size in 1..=r {
        for sel in subsets_of_size(gens.len(), size) {
            let rows: Vec<usize> = (0..ambient).collect();
            let sub = g.submatrix(&rows, &sel);
            if exactlin::smith(&sub).rank != size {
                continue;
            }
            if let Some((nums, _den)) = exactlin::solve_rational(&sub, &xb) {
                if nums.iter().all(|v| !v.is_negative()) {
                    return true;
                }
            }
        }
    }
    false
}

/// Serialization format for fans: rank, sorted primitive rays, and maximal
/// cones as sorted ray-index lists.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct FanData {
    pub rank: usize,
    pub rays: Vec<Vec<i64>>,
    pub max_cones: Vec<Vec<usize>>,
}

/// A valid fan of simplicial cones: pairwise intersections are common faces.
#[derive(Clone, Debug)]
pub struct Fan {
    ambient: usize,
    rays: Vec<RayVec>,
    max_cones: Vec<Vec<usize>>,
    cones: Vec<Cone>,
    faces: BTreeSet<Vec<usize>>,
    face_cones: BTreeMap<Vec<usize>, Cone>,
}

impl PartialEq for Fan {
    fn eq(&self, other: &Self) -> bool {
        self.ambient == other.ambient
            && self.rays == other.rays
            && self.max_cones == other.max_cones
    }
}
impl Eq for Fan {}

impl Fan {
    /// Builds a fan from cones: deduplicates, absorbs non-maximal cones,
    /// and verifies that every pairwise intersection is a common face.
    pub fn new(ambient: usize, input: Vec<Cone>) -> Result<Fan, FanError> {
        if input.is_empty() {
            return Err(FanError::EmptyFan);
        }
        for c in &input {
            if c.ambient() != ambient {
                return Err(FanError::DimensionMismatch { expected: ambient, got: c.ambient() });
            }
        }
        // Deduplicate by ray set.
        let mut by_rays: BTreeMap<Vec<RayVec>, Cone> = BTreeMap::new();
        for c in input {
            by_rays.entry(c.rays().to_vec()).or_insert(c);
        }
        let cones: Vec<Cone> = by_rays.into_values().collect();
        // Absorb cones contained in another cone.
        let keep: Vec<bool> = par::par_map_range(cones.len(), |i| {
            !cones.iter().enumerate().any(|(j, c)| {
                j != i && c.dim() >= cones[i].dim() && cones[i].rays() != c.rays() && c.contains_cone(&cones[i])
            })
        });
        let cones: Vec<Cone> = cones
            .into_iter()
            .zip(keep)
            .filter_map(|(c, k)| if k { Some(c) } else { None })
            .collect();

        // Pairwise validity: intersections must be spanned by common rays.
        let pairs: Vec<(usize, usize)> = (0..cones.len())
            .flat_map(|i| ((i + 1)..cones.len()).map(move |j| (i, j)))
            .collect();
        let bad = par::par_map(&pairs, |&(i, j)| {
            let a = &cones[i];
            let b = &cones[j];
            let common: BTreeSet<&RayVec> =
                a.rays().iter().filter(|r| b.rays().contains(r)).collect();
            for ext in cone_intersection(a, b) {
                if !common.contains(&ext) {
                    return Some((i, j, ext));
                }
            }
            None
        });
        if let Some((i, j, witness)) = bad.into_iter().flatten().next() {
            return Err(FanError::OverlappingCones {
                a: cones[i].rays().to_vec(),
                b: cones[j].rays().to_vec(),
                witness,
            });
        }

        // Canonical ray order and index sets.
        let mut ray_set: BTreeSet<RayVec> = BTreeSet::new();
        for c in &cones {
            ray_set.extend(c.rays().iter().cloned());
        }
        let rays: Vec<RayVec> = ray_set.into_iter().collect();
        let index: BTreeMap<&RayVec, usize> = rays.iter().enumerate().map(|(i, r)| (r, i)).collect();
        let mut indexed: Vec<(Vec<usize>, Cone)> = cones
            .into_iter()
            .map(|c| {
                let mut idx: Vec<usize> = c.rays().iter().map(|r| index[r]).collect();
                idx.sort_unstable();
                (idx, c)
            })
            .collect();
        indexed.sort_by(|a, b| a.0.cmp(&b.0));
        let max_cones: Vec<Vec<usize>> = indexed.iter().map(|(i, _)| i.clone()).collect();
        let cones: Vec<Cone> = indexed.into_iter().map(|(_, c)| c).collect();

        // Face set: all subsets of maximal cones (simplicial).
        let mut faces: BTreeSet<Vec<usize>> = BTreeSet::new();
        for mc in &max_cones {
            let m = mc.len();
            for mask in 0..(1u32 << m) {
                let sub: Vec<usize> =
                    (0..m).filter(|&b| mask & (1 << b) != 0).map(|b| mc[b]).collect();
                faces.insert(sub);
            }
        }
        let face_list: Vec<Vec<usize>> = faces.iter().cloned().collect();
        let face_cone_list = par::par_map(&face_list, |f| {
            let rv: Vec<RayVec> = f.iter().map(|&i| rays[i].clone()).collect();
            Cone::new(ambient, rv).expect("face of a valid cone is valid")
        });
        let face_cones: BTreeMap<Vec<usize>, Cone> =
            face_list.into_iter().zip(face_cone_list).collect();

        Ok(Fan { ambient, rays, max_cones, cones, faces, face_cones })
    }

    pub fn from_raysets(
        ambient: usize,
        rays: &[RayVec],
        sets: &[Vec<usize>],
    ) -> Result<Fan, FanError> {
        let mut cones = Vec::new();
        for s in sets {
            let rv: Vec<RayVec> = s
                .iter()
                .map(|&i| rays.get(i).cloned().ok_or(FanError::InvalidData(format!("ray index {i} out of range"))))
                .collect::<Result<_, _>>()?;
            cones.push(Cone::new(ambient, rv)?);
        }
        Fan::new(ambient, cones)
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn rays(&self) -> &[RayVec] {
        &self.rays
    }

    pub fn ray(&self, i: usize) -> &RayVec {
        &self.rays[i]
    }

    pub fn ray_index(&self, r: &[Coord]) -> Option<usize> {
        self.rays.binary_search_by(|probe| probe.as_slice().cmp(r)).ok()
    }

    pub fn max_cones(&self) -> &[Vec<usize>] {
        &self.max_cones
    }

    pub fn max_cone(&self, i: usize) -> &Cone {
        &self.cones[i]
    }

    pub fn max_cone_index(&self, rayset: &[usize]) -> Option<usize> {
        self.max_cones.binary_search_by(|probe| probe.as_slice().cmp(rayset)).ok()
    }

    /// All faces, as sorted ray-index sets (the empty set is the zero cone).
    pub fn faces(&self) -> &BTreeSet<Vec<usize>> {
        &self.faces
    }

    pub fn contains_rayset(&self, rayset: &[usize]) -> bool {
        self.faces.contains(rayset)
    }

    /// The cached cone of a face.
    pub fn face_cone(&self, rayset: &[usize]) -> Result<&Cone, FanError> {
        self.face_cones.get(rayset).ok_or_else(|| {
            FanError::ConeNotInFan(rayset.iter().map(|&i| self.rays[i].clone()).collect())
        })
    }

    /// Faces of the given dimension, in canonical (sorted) order.
    pub fn cones_of_dim(&self, k: usize) -> Vec<Vec<usize>> {
        self.faces.iter().filter(|f| f.len() == k).cloned().collect()
    }

    /// Maximal-cone indices whose ray set contains the given face.
    pub fn max_cones_containing(&self, rayset: &[usize]) -> Vec<usize> {
        self.max_cones
            .iter()
            .enumerate()
            .filter(|(_, mc)| rayset.iter().all(|r| mc.contains(r)))
            .map(|(i, _)| i)
            .collect()
    }

    /// Faces of dimension |rayset|+1 containing the given face.
    pub fn cofacets(&self, rayset: &[usize]) -> Vec<Vec<usize>> {
        self.faces
            .iter()
            .filter(|f| f.len() == rayset.len() + 1 && rayset.iter().all(|r| f.contains(r)))
            .cloned()
            .collect()
    }

    pub fn is_smooth(&self) -> bool {
        self.cones.iter().all(|c| c.is_smooth())
    }

    pub fn is_pure(&self) -> bool {
        self.max_cones.windows(2).all(|w| w[0].len() == w[1].len())
    }

    fn dims_equal(&self) -> Result<usize, FanError> {
        if !self.is_pure() {
            return Err(FanError::NotPure);
        }
        Ok(self.max_cones[0].len())
    }

    /// Facet-to-cones incidence among maximal cones.
    pub fn walls(&self) -> BTreeMap<Vec<usize>, Vec<usize>> {
        let mut map: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for (ci, mc) in self.max_cones.iter().enumerate() {
            for drop in 0..mc.len() {
                let facet: Vec<usize> =
                    mc.iter().enumerate().filter(|&(i, _)| i != drop).map(|(_, &r)| r).collect();
                map.entry(facet).or_default().push(ci);
            }
        }
        map
    }

    /// Completeness of a pure fan: full-dimensional, every wall shared by
    /// exactly two maximal cones, and wall-connected.
    pub fn is_complete(&self) -> Result<bool, FanError> {
        let d = self.dims_equal()?;
        if self.ambient == 0 {
            return Ok(true);
        }
        if d != self.ambient {
            return Ok(false);
        }
        let walls = self.walls();
        if walls.values().any(|v| v.len() != 2) {
            return Ok(false);
        }
        // Wall connectivity.
        let m = self.max_cones.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m];
        for v in walls.values() {
            adj[v[0]].push(v[1]);
            adj[v[1]].push(v[0]);
        }
        let mut seen = vec![false; m];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        Ok(seen.into_iter().all(|s| s))
    }

    /// Is `self` a subdivision of `coarse`? Both fans must be pure of equal
    /// dimension. Every fine maximal cone must land in exactly one coarse
    /// cone, and within each coarse cone the fine cones must tile it: every
    /// interior facet is shared by two cones and every boundary facet lies
    /// in a facet of the coarse cone.
    pub fn is_subdivision_of(&self, coarse: &Fan) -> bool {
        if self.ambient != coarse.ambient {
            return false;
        }
        let (Ok(df), Ok(dc)) = (self.dims_equal(), coarse.dims_equal()) else {
            return false;
        };
        if df != dc {
            return false;
        }
        let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); coarse.max_cones.len()];
        for (fi, fc) in self.cones.iter().enumerate() {
            let hosts: Vec<usize> = (0..coarse.cones.len())
                .filter(|&ci| coarse.cones[ci].contains_cone(fc))
                .collect();
            if hosts.len() != 1 {
                return false;
            }
            assigned[hosts[0]].push(fi);
        }
        for (ci, fine_ids) in assigned.iter().enumerate() {
            if fine_ids.is_empty() {
                return false;
            }
            let coarse_cone = &coarse.cones[ci];
            let mut facet_count: BTreeMap<Vec<RayVec>, usize> = BTreeMap::new();
            for &fi in fine_ids {
                let mc = &self.max_cones[fi];
                for drop in 0..mc.len() {
                    let facet: Vec<RayVec> = mc
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != drop)
                        .map(|(_, &r)| self.rays[r].clone())
                        .collect();
                    *facet_count.entry(facet).or_insert(0) += 1;
                }
            }
            for (facet, count) in facet_count {
                match count {
                    2 => {}
                    1 => {
                        // Must lie in a facet of the coarse cone.
                        let on_boundary = (0..coarse_cone.dim()).any(|drop| {
                            let sub: Vec<RayVec> = coarse_cone
                                .rays()
                                .iter()
                                .enumerate()
                                .filter(|&(i, _)| i != drop)
                                .map(|(_, r)| r.clone())
                                .collect();
                            match Cone::new(self.ambient, sub) {
                                Ok(c) => facet.iter().all(|r| c.contains(r)),
                                Err(_) => false,
                            }
                        });
                        if !on_boundary {
                            return false;
                        }
                    }
                    _ => return false,
                }
            }
        }
        true
    }

    /// The face generated by the given vectors, if the generated cone is a
    /// cone of the fan; returns its ray-index set. Generators are pruned to
    /// extreme rays first, so non-extreme generators are handled correctly.
    pub fn generated_cone(&self, gens: &[RayVec]) -> Option<Vec<usize>> {
        let mut prim: Vec<RayVec> = Vec::new();
        for g in gens {
            let p = primitive(g).ok()?;
            if !prim.contains(&p) {
                prim.push(p);
            }
        }
        prim.sort();
        // Prune to extreme rays.
        loop {
            let mut removed = false;
            for i in 0..prim.len() {
                let others: Vec<RayVec> =
                    prim.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v.clone()).collect();
                if point_in_cone(self.ambient, &others, &prim[i]) {
                    prim.remove(i);
                    removed = true;
                    break;
                }
            }
            if !removed {
                break;
            }
        }
        let mut idx: Vec<usize> = Vec::new();
        for p in &prim {
            idx.push(self.ray_index(p)?);
        }
        idx.sort_unstable();
        if !self.faces.contains(&idx) {
            return None;
        }
        // The pruned cone must reproduce all generators (guards against
        // non-pointed generator sets).
        let cone = self.face_cones.get(&idx).expect("face cone cached");
        if gens.iter().all(|g| cone.contains(g)) {
            Some(idx)
        } else {
            None
        }
    }

    /// Quotient fan V(sigma): star cones projected along the deterministic
    /// Smith-complement of the span of sigma. Returns the projection and the
    /// face correspondence {tau : sigma <= tau} -> faces of V(sigma).
    pub fn quotient(&self, rayset: &[usize]) -> Result<QuotientFan, FanError> {
        if !self.faces.contains(&rayset.to_vec()) {
            return Err(FanError::ConeNotInFan(
                rayset.iter().filter_map(|&i| self.rays.get(i).cloned()).collect(),
            ));
        }
        let k = rayset.len();
        let n = self.ambient;
        let sigma_rays: Vec<RayVec> = rayset.iter().map(|&i| self.rays[i].clone()).collect();
        let r = cols_matrix(n, &sigma_rays);
        let sm = exactlin::smith(&r);
        for i in 0..k {
            if sm.s.at(i, i) != &Int::from(1) {
                return Err(FanError::NotSmooth(sigma_rays));
            }
        }
        let mut projection: Vec<RayVec> = Vec::new();
        for i in k..n {
            let row: RayVec = (0..n)
                .map(|j| sm.u.at(i, j).to_i64().ok_or(FanError::Overflow))
                .collect::<Result<_, _>>()?;
            projection.push(row);
        }
        self.project_star(rayset, &projection)
    }

    /// Shared implementation for quotient-style constructions: projects the
    /// star of the face along the given (n-k) x n projection matrix.
    fn project_star(
        &self,
        rayset: &[usize],
        projection: &[RayVec],
    ) -> Result<QuotientFan, FanError> {
        let n = self.ambient;
        let nk = projection.len();
        let proj = |v: &RayVec| -> Result<RayVec, FanError> {
            let mut out = vec![0i64; nk];
            for (i, p) in projection.iter().enumerate() {
                let mut acc: i64 = 0;
                for j in 0..n {
                    acc = acc
                        .checked_add(p[j].checked_mul(v[j]).ok_or(FanError::Overflow)?)
                        .ok_or(FanError::Overflow)?;
                }
                out[i] = acc;
            }
            Ok(out)
        };
        let star: Vec<Vec<usize>> = self
            .faces
            .iter()
            .filter(|f| rayset.iter().all(|r| f.contains(r)))
            .cloned()
            .collect();
        let mut cones = Vec::new();
        for mc in &self.max_cones {
            if !rayset.iter().all(|r| mc.contains(r)) {
                continue;
            }
            let mut imgs = Vec::new();
            for &ri in mc.iter().filter(|ri| !rayset.contains(ri)) {
                let img = proj(&self.rays[ri])?;
                if primitive(&img)? != img {
                    return Err(FanError::NonPrimitiveRay(img));
                }
                imgs.push(img);
            }
            cones.push(Cone::new(nk, imgs)?);
        }
        let fan = Fan::new(nk, cones)?;
        let mut cone_map: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        let mut images: BTreeSet<Vec<usize>> = BTreeSet::new();
        for f in &star {
            let mut img_idx: Vec<usize> = Vec::new();
            for &ri in f.iter().filter(|ri| !rayset.contains(ri)) {
                let img = proj(&self.rays[ri])?;
                let idx = fan.ray_index(&img).ok_or(FanError::RayNotFound(img))?;
                img_idx.push(idx);
            }
            img_idx.sort_unstable();
            if !images.insert(img_idx.clone()) {
                return Err(FanError::InvalidData(
                    "star-to-quotient correspondence is not injective".into(),
                ));
            }
            cone_map.insert(f.clone(), img_idx);
        }
        if images.len() != fan.faces.len() {
            return Err(FanError::InvalidData(
                "star-to-quotient correspondence is not onto".into(),
            ));
        }
        Ok(QuotientFan { fan, projection: projection.to_vec(), cone_map })
    }

    /// Divisor fan for the closed stratum of the axis ray e_i: quotient of
    /// the star of Cone(e_i) by coordinate deletion (the deterministic
    /// complement for an axis ray).
    pub fn divisor_zero(&self, i: usize) -> Result<QuotientFan, FanError> {
        if i >= self.ambient {
            return Err(FanError::BadCoordinate(i));
        }
        let mut e = vec![0i64; self.ambient];
        e[i] = 1;
        let ray_idx = self.ray_index(&e).ok_or(FanError::RayNotFound(e))?;
        let projection: Vec<RayVec> = (0..self.ambient)
            .filter(|&j| j != i)
            .map(|j| {
                let mut row = vec![0i64; self.ambient];
                row[j] = 1;
                row
            })
            .collect();
        self.project_star(&[ray_idx], &projection)
    }

    /// Divisor fan for the invariant hyperplane x_i = 0: the subfan of cones
    /// inside the hyperplane, with coordinate i deleted. Returns the fan and
    /// the face correspondence.
    pub fn divisor_one(&self, i: usize) -> Result<HyperplaneFan, FanError> {
        if i >= self.ambient {
            return Err(FanError::BadCoordinate(i));
        }
        let in_h: Vec<Vec<usize>> = self
            .faces
            .iter()
            .filter(|f| f.iter().all(|&r| self.rays[r][i] == 0))
            .cloned()
            .collect();
        let in_set: BTreeSet<&Vec<usize>> = in_h.iter().collect();
        let maximal: Vec<&Vec<usize>> = in_h
            .iter()
            .filter(|f| {
                !in_set.iter().any(|g| {
                    g.len() > f.len() && f.iter().all(|r| g.contains(r))
                })
            })
            .collect();
        let delete = |v: &RayVec| -> RayVec {
            v.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect()
        };
        let mut cones = Vec::new();
        for f in &maximal {
            let rv: Vec<RayVec> = f.iter().map(|&r| delete(&self.rays[r])).collect();
            cones.push(Cone::new(self.ambient - 1, rv)?);
        }
        let fan = Fan::new(self.ambient - 1, cones)?;
        let mut cone_map = BTreeMap::new();
        for f in in_h {
            let mut idx: Vec<usize> = f
                .iter()
                .map(|&r| {
                    let img = delete(&self.rays[r]);
                    fan.ray_index(&img).ok_or(FanError::RayNotFound(img))
                })
                .collect::<Result<_, _>>()?;
            idx.sort_unstable();
            cone_map.insert(f, idx);
        }
        Ok(HyperplaneFan { fan, cone_map })
    }

    /// Is the hyperplane restriction at coordinate i a complete fan?
    pub fn is_admissible_at(&self, i: usize) -> Result<bool, FanError> {
        self.divisor_one(i)?.fan.is_complete()
    }

    /// Product with the complete fan on a line; the new coordinate goes last.
    pub fn product_with_p1(&self) -> Result<Fan, FanError> {
        let n = self.ambient;
        let lift = |v: &RayVec, last: Coord| -> RayVec {
            let mut out = v.clone();
            out.push(last);
            out
        };
        let mut cones = Vec::new();
        for mc in &self.max_cones {
            for sign in [1i64, -1] {
                let mut rv: Vec<RayVec> = mc.iter().map(|&r| lift(&self.rays[r], 0)).collect();
                let mut e = vec![0i64; n + 1];
                e[n] = sign;
                rv.push(e);
                cones.push(Cone::new(n + 1, rv)?);
            }
        }
        Fan::new(n + 1, cones)
    }

    pub fn to_data(&self) -> FanData {
        FanData {
            rank: self.ambient,
            rays: self.rays.clone(),
            max_cones: self.max_cones.clone(),
        }
    }

    pub fn from_data(data: &FanData) -> Result<Fan, FanError> {
        Fan::from_raysets(data.rank, &data.rays, &data.max_cones)
    }

    /// Canonical JSON encoding (stable field and element order).
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_data()).expect("fan serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Fan, FanError> {
        let data: FanData =
            serde_json::from_str(s).map_err(|e| FanError::InvalidData(e.to_string()))?;
        Fan::from_data(&data)
    }
}

/// Quotient fan with its projection matrix and face correspondence.
#[derive(Clone, Debug)]
pub struct QuotientFan {
    pub fan: Fan,
    pub projection: Vec<RayVec>,
    /// Faces of the source containing sigma -> faces of the quotient.
    pub cone_map: BTreeMap<Vec<usize>, Vec<usize>>,
}

/// Hyperplane restriction with its face correspondence.
#[derive(Clone, Debug)]
pub struct HyperplaneFan {
    pub fan: Fan,
    /// Faces of the source inside the hyperplane -> faces of the restriction.
    pub cone_map: BTreeMap<Vec<usize>, Vec<usize>>,
}
