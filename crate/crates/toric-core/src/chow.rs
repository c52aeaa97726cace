//! Chow groups of smooth toric fans and the divisor-level pullback calculus.
//!
//! Chow groups are computed by three independent routes that the test suites
//! reconcile against each other: a cycle presentation with one relation per
//! codimension-one cone and dual-lattice basis vector, the ordered basis of
//! stratum closures indexed by maximal cones, and the graded pieces of the
//! face ring (squarefree monomial ideal plus linear forms). On top of the
//! groups sits a calculus of divisor cycles: pullbacks along star
//! subdivisions, restrictions to axis strata and hyperplane slices,
//! cylinder projections, the compatibility identities between all of these,
//! the boundary-killed subgroup reconciled three ways, the blow-up rank
//! identity, and the lifting of divisor cycles to cylinder subdivisions.
//! Every map verifies its own defining identities at construction time; a
//! successful return is a machine check of the corresponding statement.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use thiserror::Error;

use crate::complexes::{
    build_z_slice, delta_map, h0_data, k_subsets, m_basis, ComplexError,
};
use crate::exactlin::{cokernel, solve, Cokernel, Int, IntMatrix};
use crate::fan::{primitive, vec_add, Coord, Fan, FanError, RayVec};
use crate::ordering::{sigma_split, OrderedFan, OrderingError};
use crate::par;
use crate::subdivide::{cylinder_subdivision, star_subdivision, SubdivideError};

#[derive(Debug, Error)]
pub enum ChowError {
    #[error(transparent)]
    Fan(#[from] FanError),
    #[error(transparent)]
    Subdivide(#[from] SubdivideError),
    #[error(transparent)]
    Ordering(#[from] OrderingError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error("fan is not smooth: {0}")]
    NotSmooth(String),
    #[error("parameter out of range: {0}")]
    BadParameter(String),
    #[error("classes do not form a basis: {0}")]
    NotABasis(String),
    #[error("independent routes disagree: {0}")]
    RouteMismatch(String),
    #[error("reconciliation failed: {0}")]
    MethodDisagreement(String),
    #[error("cycle touches an excluded axis ray: {0}")]
    UnsupportedRay(String),
    #[error("map does not send relations into relations: {0}")]
    NotWellDefined(String),
    #[error("class is not in the claimed image: {0}")]
    NotSurjective(String),
    #[error("lifting precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("lifting conclusion failed: {0}")]
    ConclusionFailed(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

/// A finitely presented abelian group with labelled generators.
///
/// Generator labels are sorted ray-index sets (cone classes) or sorted
/// ray-index multisets (monomial classes). The relation matrix has one row
/// per generator and one column per relation; the cokernel invariants are
/// computed once at construction.
#[derive(Clone, Debug)]
pub struct FreeAbelianPresentation {
    pub generators: Vec<Vec<usize>>,
    pub relations: IntMatrix,
    pub invariants: Cokernel,
}

impl FreeAbelianPresentation {
    pub fn new(
        generators: Vec<Vec<usize>>,
        relations: IntMatrix,
    ) -> Result<FreeAbelianPresentation, ChowError> {
        if relations.rows() != generators.len() {
            return Err(ChowError::Internal(format!(
                "relation matrix has {} rows for {} generators",
                relations.rows(),
                generators.len()
            )));
        }
        let invariants = cokernel(&relations);
        Ok(FreeAbelianPresentation { generators, relations, invariants })
    }

    /// The group with no generators and no relations.
    pub fn trivial() -> FreeAbelianPresentation {
        FreeAbelianPresentation::new(Vec::new(), IntMatrix::zeros(0, 0))
            .expect("the empty presentation is well formed")
    }

    pub fn rank(&self) -> usize {
        self.invariants.rank
    }

    pub fn torsion(&self) -> &[Int] {
        &self.invariants.torsion
    }

    pub fn is_free(&self) -> bool {
        self.invariants.torsion.is_empty()
    }

    pub fn generator_index(&self, label: &[usize]) -> Option<usize> {
        self.generators.iter().position(|g| g == label)
    }

    /// Standard basis column of a labelled generator.
    pub fn class_vector(&self, label: &[usize]) -> Option<IntMatrix> {
        let idx = self.generator_index(label)?;
        Some(IntMatrix::from_fn(self.generators.len(), 1, |i, _| {
            if i == idx {
                Int::one()
            } else {
                Int::zero()
            }
        }))
    }

    /// Whether a column vector lies in the lattice spanned by the relations.
    pub fn in_relation_lattice(&self, v: &IntMatrix) -> bool {
        if self.relations.cols() == 0 {
            return v.is_zero();
        }
        solve(&self.relations, v).is_some()
    }

    /// Whether two generator-coordinate columns present the same class.
    pub fn classes_equal(&self, a: &IntMatrix, b: &IntMatrix) -> bool {
        self.in_relation_lattice(&a.sub(b))
    }

    /// Canonical JSON: generators, free rank, torsion invariants as strings.
    pub fn to_json(&self) -> String {
        let torsion: Vec<String> = self.invariants.torsion.iter().map(|t| t.to_string()).collect();
        serde_json::json!({
            "generators": self.generators,
            "rank": self.invariants.rank,
            "torsion": torsion,
        })
        .to_string()
    }
}

/// Degree-p Chow group of a smooth fan, presented by cycles: one generator
/// per cone of dimension n-p, one relation per cone sigma of dimension
/// n-p-1 and basis vector m of its annihilator lattice, with coefficient
/// <u, m> at each cofacet, u being the unique extra ray of the cofacet.
pub fn chow_presentation(fan: &Fan, p: usize) -> Result<FreeAbelianPresentation, ChowError> {
    if !fan.is_smooth() {
        return Err(ChowError::NotSmooth("cycle presentation needs a smooth fan".into()));
    }
    let n = fan.ambient();
    if p > n {
        return Ok(FreeAbelianPresentation::trivial());
    }
    let gens = fan.cones_of_dim(n - p);
    let gen_index: BTreeMap<&Vec<usize>, usize> =
        gens.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let mut columns: Vec<Vec<(usize, Int)>> = Vec::new();
    if n - p >= 1 {
        for sigma in fan.cones_of_dim(n - p - 1) {
            let mb = m_basis(fan, &sigma);
            for c in 0..mb.cols() {
                let mut col = Vec::new();
                for tau in fan.cofacets(&sigma) {
                    let &u = tau
                        .iter()
                        .find(|r| !sigma.contains(r))
                        .expect("a cofacet has exactly one extra ray");
                    let urow = fan.ray(u);
                    let mut pairing = Int::zero();
                    for (j, &uj) in urow.iter().enumerate() {
                        pairing += Int::from(uj) * mb.at(j, c);
                    }
                    if !pairing.is_zero() {
                        col.push((gen_index[&tau], pairing));
                    }
                }
                columns.push(col);
            }
        }
    }
    let mut relations = IntMatrix::zeros(gens.len(), columns.len());
    for (c, col) in columns.iter().enumerate() {
        for (r, v) in col {
            *relations.at_mut(*r, c) = v.clone();
        }
    }
    FreeAbelianPresentation::new(gens, relations)
}

/// One basis class of the ordered-cone basis: the stratum closure of the
/// essence of a maximal cone.
#[derive(Clone, Debug)]
pub struct FultonClass {
    /// Index of the maximal cone in the fan's list.
    pub max_cone: usize,
    /// Essence rayset; the class is the closure of its stratum.
    pub ess: Vec<usize>,
    /// Index of the essence among the presentation generators.
    pub generator: usize,
}

/// Certified basis of one Chow degree.
#[derive(Clone, Debug)]
pub struct FultonDegree {
    pub p: usize,
    pub presentation: FreeAbelianPresentation,
    pub classes: Vec<FultonClass>,
}

impl FultonDegree {
    /// Basis classes as generator-coordinate columns, one per class.
    pub fn basis_matrix(&self) -> IntMatrix {
        let mut b = IntMatrix::zeros(self.presentation.generators.len(), self.classes.len());
        for (k, cl) in self.classes.iter().enumerate() {
            *b.at_mut(cl.generator, k) = Int::one();
        }
        b
    }

    /// Coordinates of presentation classes in this basis; the basis block of
    /// any solution of [relations | basis] x = v is unique.
    pub fn basis_coordinates(&self, v: &IntMatrix) -> Option<IntMatrix> {
        let b = self.basis_matrix();
        let combined = self.presentation.relations.hstack(&b);
        let sol = solve(&combined, v)?;
        let rel_cols = self.presentation.relations.cols();
        Some(IntMatrix::from_fn(self.classes.len(), v.cols(), |i, j| {
            sol.at(rel_cols + i, j).clone()
        }))
    }
}

/// Per-degree bases of all Chow groups of an ordered fan.
#[derive(Clone, Debug)]
pub struct FultonBasis {
    pub degrees: Vec<FultonDegree>,
}

impl FultonBasis {
    pub fn degree(&self, p: usize) -> &FultonDegree {
        &self.degrees[p]
    }

    pub fn total_size(&self) -> usize {
        self.degrees.iter().map(|d| d.classes.len()).sum()
    }
}

/// Basis of every Chow degree out of an ordered fan: the stratum-closure
/// classes of essences, certified degreewise. The certificate is exact: the
/// group is torsion-free, the class count equals its rank, and the classes
/// generate (the combined matrix of relations and basis columns has trivial
/// cokernel, i.e. all Smith invariants are one).
pub fn fulton_basis(of: &OrderedFan) -> Result<FultonBasis, ChowError> {
    let fan = of.fan();
    let n = fan.ambient();
    let mc_count = fan.max_cones().len();
    let mut buckets: Vec<Vec<(usize, Vec<usize>)>> = vec![Vec::new(); n + 1];
    for mc in 0..mc_count {
        let ess = of.ess(mc)?.to_vec();
        // dim ess = n - p puts the class in degree p.
        buckets[n - ess.len()].push((mc, ess));
    }
    let mut degrees = Vec::with_capacity(n + 1);
    for (p, bucket) in buckets.into_iter().enumerate() {
        let presentation = chow_presentation(fan, p)?;
        if !presentation.is_free() {
            return Err(ChowError::NotABasis(format!(
                "degree {p} has torsion invariants {:?}",
                presentation
                    .torsion()
                    .iter()
                    .map(|t| t.to_string())
                    .collect::<Vec<_>>()
            )));
        }
        if bucket.len() != presentation.rank() {
            return Err(ChowError::NotABasis(format!(
                "degree {p} census {} does not match rank {}",
                bucket.len(),
                presentation.rank()
            )));
        }
        let mut classes = Vec::with_capacity(bucket.len());
        for (mc, ess) in bucket {
            let generator = presentation.generator_index(&ess).ok_or_else(|| {
                ChowError::Internal(format!("essence {ess:?} is not a cone of its dimension"))
            })?;
            classes.push(FultonClass { max_cone: mc, ess, generator });
        }
        let degree = FultonDegree { p, presentation, classes };
        let combined = degree.presentation.relations.hstack(&degree.basis_matrix());
        let ck = cokernel(&combined);
        if ck.rank != 0 || !ck.torsion.is_empty() {
            return Err(ChowError::NotABasis(format!(
                "degree {p} classes do not generate: residual rank {} torsion {:?}",
                ck.rank,
                ck.torsion.iter().map(|t| t.to_string()).collect::<Vec<_>>()
            )));
        }
        degrees.push(degree);
    }
    let basis = FultonBasis { degrees };
    debug_assert_eq!(basis.total_size(), mc_count);
    Ok(basis)
}

/// Sorted ray-index multisets of size p whose support spans a cone of the
/// fan, in lexicographic order. These are the monomials surviving in the
/// face ring; supersets of non-faces are pruned during enumeration.
pub fn face_monomials(fan: &Fan, p: usize) -> Vec<Vec<usize>> {
    fn extend(fan: &Fan, p: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == p {
            out.push(cur.clone());
            return;
        }
        for j in start..fan.rays().len() {
            let fresh = cur.last() != Some(&j);
            if fresh {
                let mut support: Vec<usize> = cur.clone();
                support.dedup();
                support.push(j);
                if !fan.contains_rayset(&support) {
                    continue;
                }
            }
            cur.push(j);
            extend(fan, p, j, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    extend(fan, p, 0, &mut Vec::new(), &mut out);
    out
}

/// Degree-p piece of the face ring modulo the linear forms: generators are
/// the degree-p face monomials; for every degree-(p-1) face monomial and
/// every lattice coordinate there is one relation, multiplying the monomial
/// by the coordinate's linear form and dropping non-face products.
pub fn sr_graded_piece(fan: &Fan, p: usize) -> Result<FreeAbelianPresentation, ChowError> {
    if !fan.is_smooth() {
        return Err(ChowError::NotSmooth("face-ring presentation needs a smooth fan".into()));
    }
    if !fan.is_complete()? {
        return Err(ChowError::BadParameter(
            "face-ring presentation needs a complete fan".into(),
        ));
    }
    let n = fan.ambient();
    let gens = face_monomials(fan, p);
    let gen_index: BTreeMap<&Vec<usize>, usize> =
        gens.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let mut relations = IntMatrix::zeros(gens.len(), 0);
    if p >= 1 {
        let lower = face_monomials(fan, p - 1);
        relations = IntMatrix::zeros(gens.len(), lower.len() * n);
        for (k, mu) in lower.iter().enumerate() {
            for i in 0..n {
                let c = k * n + i;
                for (j, ray) in fan.rays().iter().enumerate() {
                    if ray[i] == 0 {
                        continue;
                    }
                    let mut prod = mu.clone();
                    let pos = prod.partition_point(|&x| x < j);
                    prod.insert(pos, j);
                    if let Some(&row) = gen_index.get(&prod) {
                        *relations.at_mut(row, c) += Int::from(ray[i]);
                    }
                }
            }
        }
    }
    FreeAbelianPresentation::new(gens, relations)
}

/// The face ring by generators: variables are rays, the monomial ideal is
/// generated by the minimal non-faces, and there is one linear form per
/// lattice coordinate with the ray coordinates as coefficients.
#[derive(Clone, Debug)]
pub struct GradedRingPresentation {
    /// Sorted raysets that span no cone while all proper subsets do.
    pub minimal_non_faces: Vec<Vec<usize>>,
    /// Coefficient of ray j in the coordinate-i linear form at (j, i).
    pub linear_coefficients: IntMatrix,
}

pub fn graded_ring_presentation(fan: &Fan) -> GradedRingPresentation {
    let n = fan.ambient();
    let m = fan.rays().len();
    let mut minimal_non_faces = Vec::new();
    // Faces have at most n rays, so minimal non-faces have at most n+1.
    for k in 2..=(n + 1).min(m) {
        for s in k_subsets(k, m) {
            if fan.contains_rayset(&s) {
                continue;
            }
            let all_facets_are_faces = (0..k).all(|drop| {
                let facet: Vec<usize> =
                    s.iter().enumerate().filter(|&(i, _)| i != drop).map(|(_, &x)| x).collect();
                fan.contains_rayset(&facet)
            });
            if all_facets_are_faces {
                minimal_non_faces.push(s);
            }
        }
    }
    let linear_coefficients = IntMatrix::from_fn(m, n, |j, i| Int::from(fan.ray(j)[i]));
    GradedRingPresentation { minimal_non_faces, linear_coefficients }
}

/// A degree-p element of the symmetric power of the divisor-cycle group:
/// an integer combination of size-p multisets of rays, each ray recorded by
/// its coordinate vector so that cycles transport across fans.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DivisorCycle {
    ambient: usize,
    degree: usize,
    terms: BTreeMap<Vec<RayVec>, Int>,
}

impl DivisorCycle {
    pub fn zero(ambient: usize, degree: usize) -> DivisorCycle {
        DivisorCycle { ambient, degree, terms: BTreeMap::new() }
    }

    /// Degree-one cycle from ray/coefficient pairs.
    pub fn from_rays(ambient: usize, terms: &[(RayVec, Int)]) -> DivisorCycle {
        let mut out = DivisorCycle::zero(ambient, 1);
        for (ray, c) in terms {
            out.add_term(vec![ray.clone()], c.clone());
        }
        out
    }

    /// Adds a multiset term; sorts the multiset and drops vanishing terms.
    pub fn add_term(&mut self, mut multiset: Vec<RayVec>, coeff: Int) {
        assert_eq!(multiset.len(), self.degree, "term size must match the degree");
        for ray in &multiset {
            assert_eq!(ray.len(), self.ambient, "ray rank must match the ambient rank");
        }
        multiset.sort();
        let entry = self.terms.entry(multiset.clone()).or_insert_with(Int::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&multiset);
        }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> &BTreeMap<Vec<RayVec>, Int> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &DivisorCycle) -> DivisorCycle {
        assert_eq!(self.ambient, other.ambient);
        assert_eq!(self.degree, other.degree);
        let mut out = self.clone();
        for (ms, c) in &other.terms {
            out.add_term(ms.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> DivisorCycle {
        let mut out = DivisorCycle::zero(self.ambient, self.degree);
        for (ms, c) in &self.terms {
            out.add_term(ms.clone(), -c.clone());
        }
        out
    }

    /// Symmetric product; degrees add.
    pub fn mul(&self, other: &DivisorCycle) -> DivisorCycle {
        assert_eq!(self.ambient, other.ambient);
        let mut out = DivisorCycle::zero(self.ambient, self.degree + other.degree);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let mut ms = ma.clone();
                ms.extend(mb.iter().cloned());
                out.add_term(ms, ca.clone() * cb.clone());
            }
        }
        out
    }

    /// Every ray in the support must be a ray of the fan and must avoid the
    /// positive axis rays of the excluded coordinates.
    pub fn check_support(&self, fan: &Fan, excluded: &[usize]) -> Result<(), ChowError> {
        if fan.ambient() != self.ambient {
            return Err(ChowError::BadParameter(format!(
                "cycle rank {} does not match fan rank {}",
                self.ambient,
                fan.ambient()
            )));
        }
        for ms in self.terms.keys() {
            for ray in ms {
                if fan.ray_index(ray).is_none() {
                    return Err(ChowError::UnsupportedRay(format!(
                        "{ray:?} is not a ray of the fan"
                    )));
                }
                for &i in excluded {
                    if *ray == axis(self.ambient, i) {
                        return Err(ChowError::UnsupportedRay(format!(
                            "{ray:?} is the excluded axis {i}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn axis(ambient: usize, i: usize) -> RayVec {
    let mut e = vec![0i64; ambient];
    e[i] = 1;
    e
}

fn delete_coord(v: &[Coord], i: usize) -> RayVec {
    v.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect()
}

/// Pullback of a cycle along the star subdivision at the given cone: rays
/// of the center pick up one extra copy of the new central ray, all other
/// rays are kept, products expand multiplicatively.
pub fn pullback_star(
    fan: &Fan,
    center: &[RayVec],
    cycle: &DivisorCycle,
) -> Result<DivisorCycle, ChowError> {
    let mut idx: Vec<usize> = center
        .iter()
        .map(|r| {
            fan.ray_index(r)
                .ok_or_else(|| ChowError::BadParameter(format!("{r:?} is not a ray of the fan")))
        })
        .collect::<Result<_, _>>()?;
    idx.sort_unstable();
    if !fan.contains_rayset(&idx) {
        return Err(ChowError::BadParameter("the center is not a cone of the fan".into()));
    }
    cycle.check_support(fan, &[])?;
    let mut sum = vec![0i64; fan.ambient()];
    for r in center {
        for (j, x) in r.iter().enumerate() {
            sum[j] += x;
        }
    }
    let central = primitive(&sum)?;
    let mut out = DivisorCycle::zero(cycle.ambient(), cycle.degree());
    for (ms, coeff) in cycle.terms() {
        // Cartesian product over the per-ray images [f] or [f] + [c].
        let mut partial: Vec<Vec<RayVec>> = vec![Vec::new()];
        for f in ms {
            let mut next = Vec::with_capacity(partial.len() * 2);
            for stem in &partial {
                let mut keep = stem.clone();
                keep.push(f.clone());
                next.push(keep);
                if center.contains(f) {
                    let mut split = stem.clone();
                    split.push(central.clone());
                    next.push(split);
                }
            }
            partial = next;
        }
        for ms2 in partial {
            out.add_term(ms2, coeff.clone());
        }
    }
    Ok(out)
}

/// Pullback of a cycle to an axis stratum (eps = 0) or a hyperplane slice
/// (eps = 1) of the given coordinate. Both delete the coordinate from the
/// surviving rays; a ray survives the stratum restriction when it spans a
/// cone with the axis ray, and the slice restriction when its coordinate
/// vanishes. A term dies with any of its factors.
pub fn pullback_delta(
    fan: &Fan,
    i: usize,
    eps: u8,
    cycle: &DivisorCycle,
) -> Result<DivisorCycle, ChowError> {
    let n = fan.ambient();
    if i >= n {
        return Err(ChowError::BadParameter(format!("coordinate {i} exceeds rank {n}")));
    }
    cycle.check_support(fan, &[])?;
    let e = axis(n, i);
    if eps == 0 && fan.ray_index(&e).is_none() {
        return Err(ChowError::BadParameter(format!(
            "stratum restriction needs the axis ray of coordinate {i}"
        )));
    }
    let mut out = DivisorCycle::zero(n - 1, cycle.degree());
    'terms: for (ms, coeff) in cycle.terms() {
        let mut imgs = Vec::with_capacity(ms.len());
        for f in ms {
            match eps {
                0 => {
                    if *f == e {
                        return Err(ChowError::UnsupportedRay(format!(
                            "{f:?} is the axis ray of the restriction coordinate {i}"
                        )));
                    }
                    if fan.generated_cone(&[f.clone(), e.clone()]).is_none() {
                        continue 'terms;
                    }
                    imgs.push(delete_coord(f, i));
                }
                1 => {
                    if f[i] != 0 {
                        continue 'terms;
                    }
                    imgs.push(delete_coord(f, i));
                }
                _ => return Err(ChowError::BadParameter(format!("side {eps} is not 0 or 1"))),
            }
        }
        out.add_term(imgs, coeff.clone());
    }
    Ok(out)
}

/// Pullback along the projection that forgets a fresh last coordinate:
/// every ray receives a trailing zero.
pub fn pullback_pi(cycle: &DivisorCycle) -> DivisorCycle {
    let mut out = DivisorCycle::zero(cycle.ambient() + 1, cycle.degree());
    for (ms, coeff) in cycle.terms() {
        let lifted: Vec<RayVec> = ms
            .iter()
            .map(|r| {
                let mut v = r.clone();
                v.push(0);
                v
            })
            .collect();
        out.add_term(lifted, coeff.clone());
    }
    out
}

fn delta_fan(fan: &Fan, i: usize, eps: u8) -> Result<Fan, ChowError> {
    match eps {
        0 => Ok(fan.divisor_zero(i)?.fan),
        1 => Ok(fan.divisor_one(i)?.fan),
        _ => Err(ChowError::BadParameter(format!("side {eps} is not 0 or 1"))),
    }
}

fn shift_coord(i: usize, removed: usize) -> usize {
    if i > removed {
        i - 1
    } else {
        i
    }
}

/// Outcome of the pullback-compatibility verification.
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct PullbackReport {
    pub checks: usize,
    /// Center/restriction pairs whose induced subdivision leaves the
    /// star-subdivision calculus (both slice coordinates cancel); counted,
    /// not failed.
    pub skipped: usize,
    pub failures: Vec<String>,
}

impl PullbackReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

// Whether a lattice point lies in the cone spanned by a rayset: the rays of
// a smooth cone extend to a basis, so integral solvability with nonnegative
// coefficients decides membership.
fn cone_contains_point(fan: &Fan, rayset: &[usize], point: &[Coord]) -> bool {
    let n = fan.ambient();
    let gens = IntMatrix::from_fn(n, rayset.len(), |i, j| Int::from(fan.ray(rayset[j])[i]));
    let b = IntMatrix::from_fn(n, 1, |i, _| Int::from(point[i]));
    match solve(&gens, &b) {
        Some(x) => (0..x.rows()).all(|i| x.at(i, 0) >= &Int::zero()),
        None => false,
    }
}

/// Verifies the five compatibility identities of the pullback calculus on
/// every allowed degree-one generator: (1) restrictions commute with star
/// subdivisions, (2) same-side restrictions commute with each other, (3)
/// mixed-side restrictions commute, (4) restrictions at a fresh coordinate
/// section its projection, and (5) restrictions commute with projections.
/// Star centers run over the 2-cones containing no positive axis ray.
pub fn verify_pullback_identities(
    fan: &Fan,
    i0: &[usize],
    i1: &[usize],
    i2: &[usize],
) -> Result<PullbackReport, ChowError> {
    let n = fan.ambient();
    for &i in i0.iter().chain(i1.iter()).chain(i2.iter()) {
        if i >= n {
            return Err(ChowError::BadParameter(format!("coordinate {i} exceeds rank {n}")));
        }
    }
    if i2.iter().any(|i| i0.contains(i) || i1.contains(i)) {
        return Err(ChowError::BadParameter(
            "the free coordinates must be disjoint from the restricted ones".into(),
        ));
    }
    for &i in i0 {
        if fan.ray_index(&axis(n, i)).is_none() {
            return Err(ChowError::BadParameter(format!(
                "stratum restriction needs the axis ray of coordinate {i}"
            )));
        }
    }
    let mut report = PullbackReport::default();
    let excluded: Vec<RayVec> = i0.iter().map(|&i| axis(n, i)).collect();
    let allowed: Vec<RayVec> =
        fan.rays().iter().filter(|r| !excluded.contains(r)).cloned().collect();
    let generators: Vec<DivisorCycle> = allowed
        .iter()
        .map(|r| DivisorCycle::from_rays(n, &[(r.clone(), Int::one())]))
        .collect();
    let pairs: Vec<(usize, u8)> = i0
        .iter()
        .map(|&i| (i, 0u8))
        .chain(i1.iter().map(|&i| (i, 1u8)))
        .collect();

    // (1) Star subdivisions at 2-cones in the factorization class: the
    // center holds no free-coordinate axis point and does not lie in the
    // nonnegative span of the stratum axes.
    enum Induced {
        Identity,
        Star,
    }
    let centers: Vec<Vec<usize>> = fan
        .cones_of_dim(2)
        .into_iter()
        .filter(|rs| i2.iter().all(|&i| !cone_contains_point(fan, rs, &axis(n, i))))
        .filter(|rs| {
            !rs.iter().all(|&ri| {
                fan.ray(ri).iter().enumerate().all(|(j, &x)| x == 0 || (x > 0 && i0.contains(&j)))
            })
        })
        .collect();
    for rayset in &centers {
        let center: Vec<RayVec> = rayset.iter().map(|&ri| fan.ray(ri).clone()).collect();
        let sub = star_subdivision(fan, &center)?;
        for &(i, eps) in &pairs {
            // The induced map on the restriction is the identity when the
            // restricted fans are equal, and the star subdivision at the
            // image cone otherwise; one slice configuration (both center
            // coordinates nonzero and cancelling) leaves the calculus.
            let induced = match eps {
                0 => {
                    // A center holding the axis point leaves the quotient
                    // unchanged: no smooth cone spans both when the point is
                    // interior, and the star is relabelled through the new
                    // ray when the axis is a center ray.
                    if cone_contains_point(fan, rayset, &axis(n, i)) {
                        Induced::Identity
                    } else {
                        let mut tri = rayset.clone();
                        tri.push(
                            fan.ray_index(&axis(n, i)).expect("stratum axes are rays"),
                        );
                        tri.sort_unstable();
                        if fan.contains_rayset(&tri) {
                            Induced::Star
                        } else {
                            Induced::Identity
                        }
                    }
                }
                _ => {
                    if center.iter().all(|r| r[i] == 0) {
                        Induced::Star
                    } else {
                        let sum = vec_add(&center[0], &center[1])?;
                        if primitive(&sum)?[i] != 0 {
                            Induced::Identity
                        } else {
                            report.skipped += generators.len();
                            continue;
                        }
                    }
                }
            };
            let d_coarse = delta_fan(fan, i, eps)?;
            let d_fine = delta_fan(&sub, i, eps)?;
            let image_center: Vec<RayVec> = center.iter().map(|r| delete_coord(r, i)).collect();
            let expected_fine = match induced {
                Induced::Star => star_subdivision(&d_coarse, &image_center)?,
                Induced::Identity => d_coarse.clone(),
            };
            if expected_fine != d_fine {
                report.failures.push(format!(
                    "identity 1: restriction {i}/{eps} of the subdivision at {center:?} is not \
                     the expected fan"
                ));
                continue;
            }
            for g in &generators {
                let lhs = pullback_delta(&sub, i, eps, &pullback_star(fan, &center, g)?)?;
                let coarse = pullback_delta(fan, i, eps, g)?;
                let rhs = match induced {
                    Induced::Star => pullback_star(&d_coarse, &image_center, &coarse)?,
                    Induced::Identity => coarse,
                };
                report.checks += 1;
                if lhs != rhs {
                    report.failures.push(format!(
                        "identity 1: {i}/{eps} at center {center:?} on {:?}",
                        g.terms().keys().next()
                    ));
                }
            }
        }
    }

    // (2) Same-side restrictions commute.
    for eps in [0u8, 1u8] {
        let idx = if eps == 0 { i0 } else { i1 };
        for (a, &i) in idx.iter().enumerate() {
            for &j in idx.iter().skip(a + 1) {
                let through_i = delta_fan(fan, i, eps)?;
                let through_j = delta_fan(fan, j, eps)?;
                let lhs_fan = delta_fan(&through_i, shift_coord(j, i), eps)?;
                let rhs_fan = delta_fan(&through_j, shift_coord(i, j), eps)?;
                if lhs_fan != rhs_fan {
                    report.failures.push(format!(
                        "identity 2: iterated restrictions {i},{j}/{eps} land in different fans"
                    ));
                    continue;
                }
                for g in &generators {
                    let lhs = pullback_delta(
                        &through_i,
                        shift_coord(j, i),
                        eps,
                        &pullback_delta(fan, i, eps, g)?,
                    )?;
                    let rhs = pullback_delta(
                        &through_j,
                        shift_coord(i, j),
                        eps,
                        &pullback_delta(fan, j, eps, g)?,
                    )?;
                    report.checks += 1;
                    if lhs != rhs {
                        report.failures.push(format!(
                            "identity 2: {i},{j}/{eps} on {:?}",
                            g.terms().keys().next()
                        ));
                    }
                }
            }
        }
    }

    // (3) Mixed-side restrictions commute.
    for &i in i1 {
        for &j in i0 {
            if i == j {
                continue;
            }
            let through_j = delta_fan(fan, j, 0)?;
            let through_i = delta_fan(fan, i, 1)?;
            let lhs_fan = delta_fan(&through_j, shift_coord(i, j), 1)?;
            let rhs_fan = delta_fan(&through_i, shift_coord(j, i), 0)?;
            if lhs_fan != rhs_fan {
                report.failures.push(format!(
                    "identity 3: restrictions {i}/1 and {j}/0 land in different fans"
                ));
                continue;
            }
            for g in &generators {
                let lhs = pullback_delta(
                    &through_j,
                    shift_coord(i, j),
                    1,
                    &pullback_delta(fan, j, 0, g)?,
                )?;
                let rhs = pullback_delta(
                    &through_i,
                    shift_coord(j, i),
                    0,
                    &pullback_delta(fan, i, 1, g)?,
                )?;
                report.checks += 1;
                if lhs != rhs {
                    report.failures.push(format!(
                        "identity 3: {i}/1 with {j}/0 on {:?}",
                        g.terms().keys().next()
                    ));
                }
            }
        }
    }

    // (4) Restrictions at the fresh cylinder coordinate section the
    // projection.
    let prod = fan.product_with_p1()?;
    for eps in [0u8, 1u8] {
        let back = delta_fan(&prod, n, eps)?;
        if back != *fan {
            report.failures.push(format!(
                "identity 4: restriction {eps} at the fresh coordinate does not recover the fan"
            ));
            continue;
        }
        for g in &generators {
            let lifted = pullback_pi(g);
            let back_cycle = pullback_delta(&prod, n, eps, &lifted)?;
            report.checks += 1;
            if back_cycle != *g {
                report.failures.push(format!(
                    "identity 4: side {eps} on {:?}",
                    g.terms().keys().next()
                ));
            }
        }
    }

    // (5) Restrictions commute with the projection.
    for &(i, eps) in &pairs {
        let d = delta_fan(fan, i, eps)?;
        let lhs_fan = delta_fan(&prod, i, eps)?;
        let rhs_fan = d.product_with_p1()?;
        if lhs_fan != rhs_fan {
            report.failures.push(format!(
                "identity 5: restriction {i}/{eps} of the cylinder is not the cylinder of the \
                 restriction"
            ));
            continue;
        }
        for g in &generators {
            let lhs = pullback_delta(&prod, i, eps, &pullback_pi(g))?;
            let rhs = pullback_pi(&pullback_delta(fan, i, eps, g)?);
            report.checks += 1;
            if lhs != rhs {
                report
                    .failures
                    .push(format!("identity 5: {i}/{eps} on {:?}", g.terms().keys().next()));
            }
        }
    }
    Ok(report)
}

/// A homomorphism between presented groups, stored on generators; sending
/// relations into relations is verified at construction.
#[derive(Clone, Debug)]
pub struct AbelianMap {
    pub source: FreeAbelianPresentation,
    pub target: FreeAbelianPresentation,
    /// One row per target generator, one column per source generator.
    pub matrix: IntMatrix,
}

impl AbelianMap {
    pub fn new(
        source: FreeAbelianPresentation,
        target: FreeAbelianPresentation,
        matrix: IntMatrix,
    ) -> Result<AbelianMap, ChowError> {
        if matrix.rows() != target.generators.len() || matrix.cols() != source.generators.len() {
            return Err(ChowError::Internal(format!(
                "map shape {}x{} does not match presentations {}x{}",
                matrix.rows(),
                matrix.cols(),
                target.generators.len(),
                source.generators.len()
            )));
        }
        let moved = matrix.mul(&source.relations);
        let ok = if target.relations.cols() == 0 {
            moved.is_zero()
        } else {
            solve(&target.relations, &moved).is_some()
        };
        if !ok {
            return Err(ChowError::NotWellDefined(
                "the image of a source relation is not a target relation".into(),
            ));
        }
        Ok(AbelianMap { source, target, matrix })
    }

    pub fn apply(&self, v: &IntMatrix) -> IntMatrix {
        self.matrix.mul(v)
    }

    /// Canonical JSON: the generator-indexed integer matrix.
    pub fn to_json(&self) -> String {
        let entries: Vec<Vec<String>> = (0..self.matrix.rows())
            .map(|i| (0..self.matrix.cols()).map(|j| self.matrix.at(i, j).to_string()).collect())
            .collect();
        serde_json::json!({
            "rows": self.matrix.rows(),
            "cols": self.matrix.cols(),
            "matrix": entries,
        })
        .to_string()
    }
}

// Image of one ray class under the restriction ring map, as pairs of a
// target ray index and a coefficient. The axis ray of the restricted
// coordinate is rewritten through its linear form first; this is the only
// generator whose stratum meets the restriction excessively.
fn restriction_ray_images(
    fan: &Fan,
    d: &Fan,
    i: usize,
    eps: u8,
) -> Result<Vec<Vec<(usize, Int)>>, ChowError> {
    let n = fan.ambient();
    let e = axis(n, i);
    let image_index = |f: &RayVec| -> Result<usize, ChowError> {
        let img = delete_coord(f, i);
        d.ray_index(&img)
            .ok_or_else(|| ChowError::Internal(format!("{img:?} is not a ray of the restriction")))
    };
    let mut out = Vec::with_capacity(fan.rays().len());
    for f in fan.rays() {
        let images = match eps {
            0 => {
                if *f == e {
                    let mut sum = Vec::new();
                    for g in fan.rays() {
                        if g == f || g[i] == 0 {
                            continue;
                        }
                        if fan.generated_cone(&[g.clone(), e.clone()]).is_some() {
                            sum.push((image_index(g)?, -Int::from(g[i])));
                        }
                    }
                    sum
                } else if fan.generated_cone(&[f.clone(), e.clone()]).is_some() {
                    vec![(image_index(f)?, Int::one())]
                } else {
                    Vec::new()
                }
            }
            1 => {
                if f[i] == 0 {
                    vec![(image_index(f)?, Int::one())]
                } else {
                    Vec::new()
                }
            }
            _ => return Err(ChowError::BadParameter(format!("side {eps} is not 0 or 1"))),
        };
        out.push(images);
    }
    Ok(out)
}

// Expands the product of per-factor ray images into target monomial
// coordinates, dropping non-face products.
fn expand_monomial_image(
    d: &Fan,
    target: &FreeAbelianPresentation,
    ray_images: &[Vec<(usize, Int)>],
    monomial: &[usize],
) -> Result<Vec<(usize, Int)>, ChowError> {
    let mut acc: BTreeMap<Vec<usize>, Int> = BTreeMap::new();
    acc.insert(Vec::new(), Int::one());
    for &factor in monomial {
        let mut next: BTreeMap<Vec<usize>, Int> = BTreeMap::new();
        for (stem, c) in &acc {
            for (ray, cf) in &ray_images[factor] {
                let mut ms = stem.clone();
                let pos = ms.partition_point(|&x| x < *ray);
                ms.insert(pos, *ray);
                let mut support = ms.clone();
                support.dedup();
                // Non-face products vanish in the face ring.
                if !d.contains_rayset(&support) {
                    continue;
                }
                let entry = next.entry(ms).or_insert_with(Int::zero);
                *entry += c.clone() * cf.clone();
            }
        }
        acc = next;
    }
    let mut out = Vec::new();
    for (ms, c) in acc {
        if c.is_zero() {
            continue;
        }
        let idx = target.generator_index(&ms).ok_or_else(|| {
            ChowError::Internal(format!("face monomial {ms:?} is missing from the presentation"))
        })?;
        out.push((idx, c));
    }
    Ok(out)
}

/// Restriction of the degree-p Chow group to an axis stratum (eps = 0) or a
/// hyperplane slice (eps = 1) at a trailing coordinate, returned on the
/// face-ring presentations of cohomological degree n-p.
///
/// The map is built as the ring map on monomial generators and certified to
/// send relations into relations. It is then cross-checked against an
/// independent route: for eps = 0, the ordered-basis projection rule (a
/// basis class maps to the basis class of the image cone when the axis ray
/// lies in the cone, and to zero otherwise, under the inherited order); for
/// eps = 1, the chain-level restriction of the flat complex slice. Any
/// disagreement is a `RouteMismatch`.
pub fn delta_on_chow(
    of: &OrderedFan,
    i: usize,
    eps: u8,
    p: usize,
) -> Result<AbelianMap, ChowError> {
    let fan = of.fan();
    let n = fan.ambient();
    let r = of.r();
    if !(r..n).contains(&i) {
        return Err(ChowError::BadParameter(format!(
            "restriction coordinate {i} must be a trailing coordinate ({r}..{n})"
        )));
    }
    if p > n {
        return Err(ChowError::BadParameter(format!("degree {p} exceeds rank {n}")));
    }
    let d = delta_fan(fan, i, eps)?;
    let source = sr_graded_piece(fan, n - p)?;
    let target = sr_graded_piece(&d, n - p)?;
    let ray_images = restriction_ray_images(fan, &d, i, eps)?;
    let columns: Vec<Result<Vec<(usize, Int)>, ChowError>> =
        par::par_map(&source.generators, |mono| {
            expand_monomial_image(&d, &target, &ray_images, mono)
        });
    let mut matrix = IntMatrix::zeros(target.generators.len(), source.generators.len());
    for (c, col) in columns.into_iter().enumerate() {
        for (row, v) in col? {
            *matrix.at_mut(row, c) = v;
        }
    }
    let map = AbelianMap::new(source, target, matrix)?;

    if eps == 0 {
        cross_check_stratum_projection(of, i, p, &map)?;
    } else if p >= 1 {
        cross_check_slice_restriction(of, i, p, &map)?;
    }
    Ok(map)
}

// The ordered-basis route for the stratum restriction: basis classes whose
// cone contains the axis ray map to the basis class of the image cone under
// the inherited order, all others map to zero.
fn cross_check_stratum_projection(
    of: &OrderedFan,
    i: usize,
    p: usize,
    map: &AbelianMap,
) -> Result<(), ChowError> {
    let fan = of.fan();
    let n = fan.ambient();
    let quotient = fan.divisor_zero(i)?;
    let e_idx = fan
        .ray_index(&axis(n, i))
        .ok_or_else(|| ChowError::BadParameter(format!("coordinate {i} has no axis ray")))?;
    // Inherit the order on the cones containing the axis ray.
    let mut carriers: Vec<usize> = (0..fan.max_cones().len())
        .filter(|&mc| fan.max_cones()[mc].contains(&e_idx))
        .collect();
    carriers.sort_by_key(|&mc| of.rank(mc));
    let mut order = Vec::with_capacity(carriers.len());
    for &mc in &carriers {
        let img = quotient
            .cone_map
            .get(&fan.max_cones()[mc])
            .ok_or_else(|| ChowError::Internal("a carrier cone is missing its image".into()))?;
        let idx = quotient
            .fan
            .max_cone_index(img)
            .ok_or_else(|| ChowError::Internal("a carrier image is not maximal".into()))?;
        order.push(idx);
    }
    let qof = OrderedFan::new(quotient.fan.clone(), of.r(), order)?;
    for mc in 0..fan.max_cones().len() {
        let ess = of.ess(mc)?;
        if ess.len() != n - p {
            continue;
        }
        let src_vec = map.source.class_vector(ess).ok_or_else(|| {
            ChowError::Internal("an essence is missing from the monomial generators".into())
        })?;
        let lhs = map.apply(&src_vec);
        let rhs = if fan.max_cones()[mc].contains(&e_idx) {
            let img = quotient
                .cone_map
                .get(&fan.max_cones()[mc])
                .ok_or_else(|| ChowError::Internal("a carrier cone lost its image".into()))?;
            let qmc = quotient
                .fan
                .max_cone_index(img)
                .ok_or_else(|| ChowError::Internal("a carrier image is not maximal".into()))?;
            let qess = qof.ess(qmc)?;
            if qess.len() != n - p {
                return Err(ChowError::RouteMismatch(format!(
                    "the image essence of cone {mc} has dimension {} instead of {}",
                    qess.len(),
                    n - p
                )));
            }
            map.target.class_vector(qess).ok_or_else(|| {
                ChowError::Internal("an image essence is missing from the generators".into())
            })?
        } else {
            IntMatrix::zeros(map.target.generators.len(), 1)
        };
        if !map.target.classes_equal(&lhs, &rhs) {
            return Err(ChowError::RouteMismatch(format!(
                "stratum restriction at {i} disagrees with the ordered-basis rule on cone {mc}"
            )));
        }
    }
    Ok(())
}

// The chain-level route for the slice restriction: the flat complex maps
// restrict cone-by-cone, and the induced map on bottom homology must agree
// with the ring map on every flat generator.
fn cross_check_slice_restriction(
    of: &OrderedFan,
    i: usize,
    p: usize,
    map: &AbelianMap,
) -> Result<(), ChowError> {
    let fan = of.fan();
    let r = of.r();
    let d = fan.divisor_one(i)?.fan;
    let src_slice = build_z_slice(fan, p, Some(r))?;
    let dst_slice = build_z_slice(&d, p - 1, Some(r))?;
    let chain = delta_map(&src_slice, i, &dst_slice)?;
    let (src_gens, _) = h0_data(&src_slice);
    let (dst_gens, _) = h0_data(&dst_slice);
    for (col, sigma) in src_gens.iter().enumerate() {
        let monomial_vec = map.source.class_vector(sigma).ok_or_else(|| {
            ChowError::Internal("a flat cone is missing from the monomial generators".into())
        })?;
        let lhs = map.apply(&monomial_vec);
        let mut rhs = IntMatrix::zeros(map.target.generators.len(), 1);
        for (row, tau) in dst_gens.iter().enumerate() {
            let c = chain.per_q[0].at(row, col);
            if c.is_zero() {
                continue;
            }
            let idx = map.target.generator_index(tau).ok_or_else(|| {
                ChowError::Internal("a restricted cone is missing from the generators".into())
            })?;
            *rhs.at_mut(idx, 0) += c.clone();
        }
        if !map.target.classes_equal(&lhs, &rhs) {
            return Err(ChowError::RouteMismatch(format!(
                "slice restriction at {i} disagrees with the chain-level route on {sigma:?}"
            )));
        }
    }
    Ok(())
}

/// The boundary-killed degree-p Chow group, computed three ways and
/// reconciled: (a) the common kernel of the stratum restrictions at all
/// trailing coordinates, in ordered-basis coordinates; (b) the census of
/// maximal cones outside the extendable region whose essence has matching
/// dimension; (c) the bottom homology presentation of the flat complex
/// slice. The presentation of route (c) is returned.
pub fn chow_flat(
    of: &OrderedFan,
    r: usize,
    p: usize,
) -> Result<FreeAbelianPresentation, ChowError> {
    let fan = of.fan();
    let n = fan.ambient();
    if r != of.r() {
        return Err(ChowError::BadParameter(format!(
            "rank split {r} does not match the ordered fan ({})",
            of.r()
        )));
    }
    // Route (c): flat complex slice.
    let slice = build_z_slice(fan, p, Some(r))?;
    let (gens, rels) = h0_data(&slice);
    let pres = FreeAbelianPresentation::new(gens, rels)?;

    // Route (b): census over the non-extendable maximal cones.
    let split = sigma_split(fan, r)?;
    let mut census = 0usize;
    for mc in 0..fan.max_cones().len() {
        if split.circ.contains(&fan.max_cones()[mc]) {
            continue;
        }
        if of.ess(mc)?.len() == n - p {
            census += 1;
        }
    }

    // Route (a): nullity of the stacked stratum restrictions on the basis.
    let basis = fulton_basis(of)?;
    let source_classes: Vec<&FultonClass> = basis.degree(p).classes.iter().collect();
    let mut stacked = IntMatrix::zeros(0, source_classes.len());
    for i in r..n {
        // The projection rule is certified against the ring route first.
        delta_on_chow(of, i, 0, p)?;
        let quotient = fan.divisor_zero(i)?;
        let e_idx = fan
            .ray_index(&axis(n, i))
            .ok_or_else(|| ChowError::Internal(format!("coordinate {i} lost its axis ray")))?;
        let mut carriers: Vec<usize> = (0..fan.max_cones().len())
            .filter(|&mc| fan.max_cones()[mc].contains(&e_idx))
            .collect();
        carriers.sort_by_key(|&mc| of.rank(mc));
        let order: Vec<usize> = carriers
            .iter()
            .map(|&mc| {
                quotient
                    .fan
                    .max_cone_index(&quotient.cone_map[&fan.max_cones()[mc]])
                    .expect("carrier images are maximal")
            })
            .collect();
        let qof = OrderedFan::new(quotient.fan.clone(), r, order)?;
        let qbasis = fulton_basis(&qof)?;
        let target_classes = if p >= 1 { qbasis.degree(p - 1).classes.clone() } else { Vec::new() };
        let mut block = IntMatrix::zeros(target_classes.len(), source_classes.len());
        for (c, cl) in source_classes.iter().enumerate() {
            if !fan.max_cones()[cl.max_cone].contains(&e_idx) {
                continue;
            }
            let qmc = quotient
                .fan
                .max_cone_index(&quotient.cone_map[&fan.max_cones()[cl.max_cone]])
                .expect("carrier images are maximal");
            let row = target_classes.iter().position(|t| t.max_cone == qmc).ok_or_else(|| {
                ChowError::RouteMismatch(format!(
                    "the image of basis cone {} is not a basis class one degree down",
                    cl.max_cone
                ))
            })?;
            *block.at_mut(row, c) = Int::one();
        }
        stacked = stacked.vstack(&block);
    }
    let kernel_rank = source_classes.len() - crate::exactlin::rank(&stacked);

    if pres.rank() != census || pres.rank() != kernel_rank || !pres.is_free() {
        return Err(ChowError::MethodDisagreement(format!(
            "flat degree {p}: slice rank {} torsion {:?}, census {census}, kernel rank \
             {kernel_rank}",
            pres.rank(),
            pres.torsion().iter().map(|t| t.to_string()).collect::<Vec<_>>()
        )));
    }
    Ok(pres)
}

/// Per-degree outcome of the blow-up rank identity.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BlowupRow {
    pub d: usize,
    pub blowup_rank: usize,
    pub base_rank: usize,
    pub center_rank: usize,
    pub torsion_free: bool,
}

/// Report of the blow-up rank identity at one 2-cone center.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BlowupReport {
    pub center: Vec<RayVec>,
    pub rows: Vec<BlowupRow>,
    pub pass: bool,
}

/// Checks that blowing up the stratum of a 2-cone adds the Chow groups of
/// the stratum one degree down: rank CH_d of the star subdivision equals
/// rank CH_d of the fan plus rank CH_{d-1} of the quotient at the center,
/// with all three groups torsion-free, for every degree.
pub fn blowup_rank_check(fan: &Fan, sigma: &[usize]) -> Result<BlowupReport, ChowError> {
    if sigma.len() != 2 || !fan.contains_rayset(sigma) {
        return Err(ChowError::BadParameter("the center must be a 2-cone of the fan".into()));
    }
    let n = fan.ambient();
    let center: Vec<RayVec> = sigma.iter().map(|&ri| fan.ray(ri).clone()).collect();
    let star = star_subdivision(fan, &center)?;
    let stratum = fan.quotient(sigma)?.fan;
    let mut rows = Vec::with_capacity(n + 1);
    let mut pass = true;
    for d in 0..=n {
        let b = chow_presentation(&star, d)?;
        let x = chow_presentation(fan, d)?;
        let z = if d >= 1 {
            chow_presentation(&stratum, d - 1)?
        } else {
            FreeAbelianPresentation::trivial()
        };
        let torsion_free = b.is_free() && x.is_free() && z.is_free();
        let row = BlowupRow {
            d,
            blowup_rank: b.rank(),
            base_rank: x.rank(),
            center_rank: z.rank(),
            torsion_free,
        };
        pass &= torsion_free && row.blowup_rank == row.base_rank + row.center_rank;
        rows.push(row);
    }
    Ok(BlowupReport { center, rows, pass })
}

/// Lifts a cycle with vanishing trailing restrictions to a cylinder
/// subdivision with a fresh last coordinate: the lift is the ray-wise copy,
/// the slice restriction at the fresh coordinate recovers the cycle, and
/// the stratum restriction at the fresh coordinate vanishes. Preconditions
/// and every conclusion are verified; the subdivision order may be pinned.
pub fn cylinder_lift(
    fan: &Fan,
    x: &DivisorCycle,
    i0: &[usize],
    i1: &[usize],
    i2: &[usize],
    order: Option<&[RayVec]>,
) -> Result<(Fan, DivisorCycle), ChowError> {
    let n = fan.ambient();
    x.check_support(fan, i0)?;
    for &i in i0 {
        if !pullback_delta(fan, i, 0, x)?.is_zero() {
            return Err(ChowError::PreconditionFailed(format!(
                "the stratum restriction at {i} does not vanish"
            )));
        }
    }
    for &i in i1 {
        if !pullback_delta(fan, i, 1, x)?.is_zero() {
            return Err(ChowError::PreconditionFailed(format!(
                "the slice restriction at {i} does not vanish"
            )));
        }
    }
    let cylinder = cylinder_subdivision(fan, i0, i2, order)?;
    let t = n;
    let y = pullback_pi(x);
    let mut excluded: Vec<usize> = i0.to_vec();
    excluded.push(t);
    y.check_support(&cylinder, &excluded)
        .map_err(|e| ChowError::ConclusionFailed(format!("the lift is not supported: {e}")))?;
    let slice = cylinder.divisor_one(t)?.fan;
    if slice != *fan {
        return Err(ChowError::ConclusionFailed(
            "the slice at the fresh coordinate is not the original fan".into(),
        ));
    }
    if pullback_delta(&cylinder, t, 1, &y)? != *x {
        return Err(ChowError::ConclusionFailed(
            "the slice restriction of the lift is not the cycle".into(),
        ));
    }
    if !pullback_delta(&cylinder, t, 0, &y)?.is_zero() {
        return Err(ChowError::ConclusionFailed(
            "the stratum restriction at the fresh coordinate does not vanish".into(),
        ));
    }
    for &i in i0 {
        if !pullback_delta(&cylinder, i, 0, &y)?.is_zero() {
            return Err(ChowError::ConclusionFailed(format!(
                "the stratum restriction at {i} does not vanish on the lift"
            )));
        }
    }
    for &i in i1 {
        if !pullback_delta(&cylinder, i, 1, &y)?.is_zero() {
            return Err(ChowError::ConclusionFailed(format!(
                "the slice restriction at {i} does not vanish on the lift"
            )));
        }
    }
    Ok((cylinder, y))
}

/// Verifies that every degree-p class is an integer combination of degree-p
/// products of allowed divisor classes: each face monomial must be solvable
/// from the allowed face monomials and the relations.
pub fn verify_sr_surjectivity(fan: &Fan, i0: &[usize], p: usize) -> Result<(), ChowError> {
    let pres = sr_graded_piece(fan, p)?;
    let n = fan.ambient();
    let excluded: BTreeSet<usize> =
        i0.iter().filter_map(|&i| fan.ray_index(&axis(n, i))).collect();
    let allowed: Vec<usize> = (0..pres.generators.len())
        .filter(|&g| pres.generators[g].iter().all(|ray| !excluded.contains(ray)))
        .collect();
    let mut image = IntMatrix::zeros(pres.generators.len(), allowed.len());
    for (c, &g) in allowed.iter().enumerate() {
        *image.at_mut(g, c) = Int::one();
    }
    let combined = image.hstack(&pres.relations);
    for g in 0..pres.generators.len() {
        let target = IntMatrix::from_fn(pres.generators.len(), 1, |i, _| {
            if i == g {
                Int::one()
            } else {
                Int::zero()
            }
        });
        if solve(&combined, &target).is_none() {
            return Err(ChowError::NotSurjective(format!(
                "monomial {:?} is not generated by the allowed divisor classes",
                pres.generators[g]
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexes::build_z_slice;
    use crate::fan::Cone;
    use crate::ordering::build_admissible_ordering;
    use crate::subdivide::{affine, build_gamma, build_theta, p1n};

    fn binomial(n: usize, k: usize) -> usize {
        if k > n {
            return 0;
        }
        (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
    }

    fn ordered_p1n(n: usize, r: usize) -> OrderedFan {
        build_admissible_ordering(&p1n(n), r, &[]).unwrap()
    }

    fn ray_cycle(ambient: usize, ray: &[i64]) -> DivisorCycle {
        DivisorCycle::from_rays(ambient, &[(ray.to_vec(), Int::one())])
    }

    #[test]
    fn point_classes_on_the_line() {
        let fan = p1n(1);
        let ch0 = chow_presentation(&fan, 0).unwrap();
        assert_eq!(ch0.generators.len(), 2);
        assert_eq!(ch0.relations.cols(), 1);
        assert_eq!(ch0.rank(), 1);
        assert!(ch0.is_free());
        // The two point classes are identified by the single relation.
        let a = ch0.class_vector(&[0]).unwrap();
        let b = ch0.class_vector(&[1]).unwrap();
        assert!(ch0.classes_equal(&a, &b));
        let ch1 = chow_presentation(&fan, 1).unwrap();
        assert_eq!(ch1.generators, vec![Vec::<usize>::new()]);
        assert_eq!(ch1.relations.cols(), 0);
        assert_eq!(ch1.rank(), 1);
        assert_eq!(chow_presentation(&fan, 2).unwrap().rank(), 0);
    }

    #[test]
    fn product_fans_have_binomial_ranks() {
        for n in 1..=3 {
            let fan = p1n(n);
            for k in 0..=n {
                let pres = chow_presentation(&fan, k).unwrap();
                assert_eq!(pres.rank(), binomial(n, k), "cycle rank at n={n} k={k}");
                assert!(pres.is_free());
                let sr = sr_graded_piece(&fan, n - k).unwrap();
                assert_eq!(sr.rank(), pres.rank(), "face-ring rank at n={n} k={k}");
                assert!(sr.is_free());
            }
        }
    }

    #[test]
    fn presentation_matches_the_complex_boundary() {
        let (fan, _) = build_gamma(2, 1).unwrap();
        for p in 0..=2 {
            let pres = chow_presentation(&fan, p).unwrap();
            let slice = build_z_slice(&fan, p, None).unwrap();
            let (gens, rel) = h0_data(&slice);
            assert_eq!(pres.generators, gens);
            assert_eq!(pres.relations, rel);
        }
    }

    #[test]
    fn ordered_bases_are_certified() {
        let of1 = ordered_p1n(1, 1);
        let fb1 = fulton_basis(&of1).unwrap();
        assert_eq!(fb1.total_size(), 2);
        // The greatest cone keeps itself as essence: its class spans degree 0.
        let neg = of1.fan().ray_index(&vec![-1]).unwrap();
        assert_eq!(fb1.degree(0).classes.len(), 1);
        assert_eq!(fb1.degree(0).classes[0].ess, vec![neg]);
        assert_eq!(fb1.degree(1).classes[0].ess, Vec::<usize>::new());

        let of2 = ordered_p1n(2, 1);
        let fb2 = fulton_basis(&of2).unwrap();
        let sizes: Vec<usize> = fb2.degrees.iter().map(|d| d.classes.len()).collect();
        assert_eq!(sizes, vec![1, 2, 1]);
        assert_eq!(fb2.total_size(), 4);

        let (theta, steps) = build_theta(2, 1, &[1]).unwrap();
        let of3 = build_admissible_ordering(&theta, 1, &steps).unwrap();
        let fb3 = fulton_basis(&of3).unwrap();
        assert_eq!(fb3.total_size(), theta.max_cones().len());
    }

    #[test]
    fn coordinates_in_an_ordered_basis_are_recovered() {
        let of = ordered_p1n(2, 1);
        let fb = fulton_basis(&of).unwrap();
        let degree = fb.degree(1);
        // Every generator class has unique basis coordinates, and the basis
        // combination presents the same class.
        for g in 0..degree.presentation.generators.len() {
            let v = IntMatrix::from_fn(degree.presentation.generators.len(), 1, |i, _| {
                if i == g {
                    Int::one()
                } else {
                    Int::zero()
                }
            });
            let coords = degree.basis_coordinates(&v).unwrap();
            let recombined = degree.basis_matrix().mul(&coords);
            assert!(degree.presentation.classes_equal(&recombined, &v));
        }
    }

    #[test]
    fn ring_presentation_lists_minimal_non_faces() {
        let fan = p1n(2);
        let ring = graded_ring_presentation(&fan);
        // Exactly the two pairs of opposite rays fail to span a cone.
        assert_eq!(ring.minimal_non_faces.len(), 2);
        for nf in &ring.minimal_non_faces {
            assert_eq!(nf.len(), 2);
            let a = fan.ray(nf[0]).clone();
            let b = fan.ray(nf[1]).clone();
            assert_eq!(a, b.iter().map(|x| -x).collect::<Vec<_>>());
        }
        assert_eq!(ring.linear_coefficients.rows(), 4);
        assert_eq!(ring.linear_coefficients.cols(), 2);
    }

    #[test]
    fn divisor_pullback_along_a_star_subdivision() {
        let fan = affine(2);
        let e1 = vec![1, 0];
        let e2 = vec![0, 1];
        let center = [e1.clone(), e2.clone()];
        let pulled = pullback_star(&fan, &center, &ray_cycle(2, &e1)).unwrap();
        let mut expected = ray_cycle(2, &e1);
        expected.add_term(vec![vec![1, 1]], Int::one());
        assert_eq!(pulled, expected);

        // A ray away from the center is kept as it is.
        let fan2 = p1n(2);
        let kept = pullback_star(&fan2, &center, &ray_cycle(2, &[-1, 0])).unwrap();
        assert_eq!(kept, ray_cycle(2, &[-1, 0]));

        // Quadratic terms expand binomially.
        let sq = ray_cycle(2, &e1).mul(&ray_cycle(2, &e1));
        let pulled_sq = pullback_star(&fan, &center, &sq).unwrap();
        let lin = pullback_star(&fan, &center, &ray_cycle(2, &e1)).unwrap();
        assert_eq!(pulled_sq, lin.mul(&lin));
    }

    #[test]
    fn hyperplane_and_stratum_pullbacks_follow_the_coordinate_rules() {
        let fan = p1n(2);
        // Slice: rays with nonzero coordinate die, others drop it.
        let kept = pullback_delta(&fan, 1, 1, &ray_cycle(2, &[1, 0])).unwrap();
        assert_eq!(kept, ray_cycle(1, &[1]));
        let dead = pullback_delta(&fan, 1, 1, &ray_cycle(2, &[0, 1])).unwrap();
        assert!(dead.is_zero());
        // Stratum: rays coning with the axis survive, opposite rays die,
        // the axis itself is rejected.
        let kept0 = pullback_delta(&fan, 1, 0, &ray_cycle(2, &[1, 0])).unwrap();
        assert_eq!(kept0, ray_cycle(1, &[1]));
        let dead0 = pullback_delta(&fan, 1, 0, &ray_cycle(2, &[0, -1])).unwrap();
        assert!(dead0.is_zero());
        let err = pullback_delta(&fan, 1, 0, &ray_cycle(2, &[0, 1]));
        assert!(matches!(err, Err(ChowError::UnsupportedRay(_))));
    }

    #[test]
    fn projection_pullback_sections_both_face_maps() {
        // The torus fan on a line times the line fan: only the two fresh
        // rays, and the section identities hold on both of them.
        let torus = Fan::new(1, vec![Cone::zero(1)]).unwrap();
        let gm_p1 = torus.product_with_p1().unwrap();
        let rep = verify_pullback_identities(&gm_p1, &[], &[], &[]).unwrap();
        assert!(rep.pass(), "failures: {:?}", rep.failures);
        assert_eq!(rep.checks, 4);
    }

    #[test]
    fn pullback_identities_hold_on_products() {
        let fan = p1n(2);
        let rep = verify_pullback_identities(&fan, &[1], &[1], &[0]).unwrap();
        assert!(rep.pass(), "failures: {:?}", rep.failures);
        assert!(rep.checks > 0);
        let rep0 = verify_pullback_identities(&fan, &[0, 1], &[0, 1], &[]).unwrap();
        assert!(rep0.pass(), "failures: {:?}", rep0.failures);
    }

    #[test]
    fn face_maps_descend_to_chow_groups() {
        let of = ordered_p1n(2, 1);
        for p in 0..=2 {
            // Construction verifies well-definedness and both cross-routes.
            delta_on_chow(&of, 1, 0, p).unwrap();
            delta_on_chow(&of, 1, 1, p).unwrap();
        }
        // The vertical fiber class restricts to the point class of the slice.
        let map = delta_on_chow(&of, 1, 1, 1).unwrap();
        let fan = of.fan();
        let fiber = fan.generated_cone(&[vec![1, 0]]).unwrap();
        let image = map.apply(&map.source.class_vector(&fiber).unwrap());
        let slice = fan.divisor_one(1).unwrap().fan;
        let point = slice.generated_cone(&[vec![1]]).unwrap();
        let expected = map.target.class_vector(&point).unwrap();
        assert!(map.target.classes_equal(&image, &expected));
    }

    #[test]
    fn flat_groups_reconcile_three_ways() {
        let of = ordered_p1n(2, 1);
        // Per degree: the point class survives (the restriction lands in a
        // vanishing group), one of the two ruling classes survives, and the
        // fundamental class restricts onto the slice fundamental class. The
        // total matches the census of maximal cones avoiding the trailing
        // axis.
        let ranks: Vec<usize> =
            (0..=2).map(|p| chow_flat(&of, 1, p).unwrap().rank()).collect();
        assert_eq!(ranks, vec![1, 1, 0]);
        let e1 = of.fan().ray_index(&vec![0, 1]).unwrap();
        let census =
            of.fan().max_cones().iter().filter(|mc| !mc.contains(&e1)).count();
        assert_eq!(ranks.iter().sum::<usize>(), census);
        assert!(chow_flat(&of, 1, 0).unwrap().is_free());

        let (theta, steps) = build_theta(2, 1, &[1]).unwrap();
        let oft = build_admissible_ordering(&theta, 1, &steps).unwrap();
        for p in 0..=2 {
            chow_flat(&oft, 1, p).unwrap();
        }

        // With no trailing coordinates the flat group is the whole group.
        let of_full = ordered_p1n(2, 2);
        for p in 0..=2 {
            let flat = chow_flat(&of_full, 2, p).unwrap();
            let full = chow_presentation(of_full.fan(), p).unwrap();
            assert_eq!(flat.rank(), full.rank());
        }
    }

    #[test]
    fn blowup_ranks_add_up() {
        let fan = p1n(2);
        let sigma = fan.generated_cone(&[vec![1, 0], vec![0, 1]]).unwrap();
        let report = blowup_rank_check(&fan, &sigma).unwrap();
        assert!(report.pass);
        let by_d: Vec<(usize, usize, usize)> =
            report.rows.iter().map(|r| (r.blowup_rank, r.base_rank, r.center_rank)).collect();
        assert_eq!(by_d, vec![(1, 1, 0), (3, 2, 1), (1, 1, 0)]);
    }

    fn lifting_example_fan() -> Fan {
        let fan = p1n(2);
        let fan = star_subdivision(&fan, &[vec![-1, 0], vec![0, 1]]).unwrap();
        star_subdivision(&fan, &[vec![-1, 0], vec![0, -1]]).unwrap()
    }

    fn lifting_example_order() -> Vec<RayVec> {
        vec![vec![-1, 1], vec![-1, 0], vec![-1, -1], vec![0, -1]]
    }

    #[test]
    fn cylinder_lifting_verifies_its_conclusions() {
        let fan = lifting_example_fan();
        let order = lifting_example_order();
        // This difference of exceptional classes still meets the stratum of
        // the second axis, so it is rejected before any construction.
        let bad = ray_cycle(2, &[-1, 1]).add(&ray_cycle(2, &[-1, -1]).neg());
        let err = cylinder_lift(&fan, &bad, &[1], &[1], &[0], Some(&order));
        assert!(matches!(err, Err(ChowError::PreconditionFailed(_))));

        // Both restrictions of this difference vanish, and the ray-wise lift
        // passes every conclusion, in degree one and for its square.
        let good = ray_cycle(2, &[-1, -1]).add(&ray_cycle(2, &[0, -1]).neg());
        let (cyl, lift) = cylinder_lift(&fan, &good, &[1], &[1], &[0], Some(&order)).unwrap();
        assert_eq!(lift.degree(), 1);
        assert_eq!(cyl.ambient(), 3);
        let square = good.mul(&good);
        let (_, lift2) = cylinder_lift(&fan, &square, &[1], &[1], &[0], Some(&order)).unwrap();
        assert_eq!(lift2, lift.mul(&lift));

        // The zero cycle lifts to the zero cycle.
        let zero = DivisorCycle::zero(2, 1);
        let (_, lifted_zero) = cylinder_lift(&fan, &zero, &[1], &[1], &[0], Some(&order)).unwrap();
        assert!(lifted_zero.is_zero());
    }

    #[test]
    fn symmetric_powers_of_allowed_divisors_generate() {
        let fan = p1n(2);
        for p in 0..=2 {
            verify_sr_surjectivity(&fan, &[1], p).unwrap();
        }
        let theta = lifting_example_fan();
        for p in 0..=2 {
            verify_sr_surjectivity(&theta, &[1], p).unwrap();
        }
    }

    #[test]
    fn presentation_json_is_stable() {
        let fan = p1n(1);
        let pres = chow_presentation(&fan, 0).unwrap();
        let json = pres.to_json();
        assert_eq!(json, r#"{"generators":[[0],[1]],"rank":1,"torsion":[]}"#);
    }
}
