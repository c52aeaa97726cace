//! Total orderings of the maximal cones of smooth complete fans.
//!
//! The order is built along subdivision provenance. The orthant fan carries
//! the sign-vector order (all-positive least). Each excluded barycentric
//! step propagates the order: children of distinct parents inherit the
//! parent comparison, and children of one parent are compared through their
//! admissible permutations at the largest differing position, after labeling
//! the selected rays so that rays whose wall neighbor is greater come first.
//! A final stable partition moves the maximal cones containing a trailing
//! axis ray to the front.
//!
//! Each maximal cone has an essence: the intersection of the cone with its
//! greater wall neighbors, which equals the face spanned by the rays whose
//! wall neighbor is smaller. Both routes are computed and compared; the
//! face route indexes the Chow basis downstream.

use crate::fan::{cone_intersection, Cone, Fan, FanError, RayVec};
use crate::par;
use crate::subdivide::{p1n, t_admissible_permutations, BaryStep, SubdivideError};
use std::collections::BTreeMap;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OrderingError {
    #[error(transparent)]
    Fan(#[from] FanError),
    #[error(transparent)]
    Subdivide(#[from] SubdivideError),
    #[error("fan is not complete: facet {0:?} is not shared by exactly two maximal cones")]
    NotComplete(Vec<usize>),
    #[error("provenance does not chain: {0}")]
    MissingProvenance(String),
    #[error("order is not a permutation of the maximal cones")]
    NotPermutation,
    #[error("essence of cone {0} is not the face predicted by the order")]
    EssNotFace(usize),
    #[error("the marked subfan is not closed under faces: {0:?}")]
    NotSubfan(Vec<usize>),
}

/// Index of the unique maximal cone sharing the facet of `mc` opposite `ray`.
pub fn wall_neighbor(fan: &Fan, mc: usize, ray: usize) -> Result<usize, OrderingError> {
    let rayset = &fan.max_cones()[mc];
    debug_assert!(rayset.contains(&ray));
    let facet: Vec<usize> = rayset.iter().copied().filter(|&r| r != ray).collect();
    let containing = fan.max_cones_containing(&facet);
    let mut other = containing.into_iter().filter(|&i| i != mc);
    match (other.next(), other.next()) {
        (Some(tau), None) => Ok(tau),
        _ => Err(OrderingError::NotComplete(facet)),
    }
}

/// A fan with a total order on its maximal cones, wall-neighbor table, and
/// essence cache.
#[derive(Clone, Debug)]
pub struct OrderedFan {
    fan: Fan,
    r: usize,
    /// order[k] = maximal-cone index of the k-th smallest cone.
    order: Vec<usize>,
    /// position[mc] = rank of maximal cone mc in the order.
    position: Vec<usize>,
    /// neighbors[mc][j] = wall neighbor of mc opposite its j-th ray.
    neighbors: Vec<Vec<usize>>,
    /// Face-form essence: sorted ray indices {f in mc : neighbor(mc, f) < mc}.
    ess_face: Vec<Vec<usize>>,
    /// Whether the literal intersection of greater neighbors equals ess_face.
    ess_consistent: Vec<bool>,
}

impl OrderedFan {
    /// Wraps a fan with an explicit order (ranks aligned with
    /// `fan.max_cones()`), computing the neighbor table and both essence
    /// routes. Construction succeeds for any total order; divergence of the
    /// essence routes is recorded per cone and surfaced by [`OrderedFan::ess`].
    pub fn new(fan: Fan, r: usize, order: Vec<usize>) -> Result<OrderedFan, OrderingError> {
        let m = fan.max_cones().len();
        let mut position = vec![usize::MAX; m];
        if order.len() != m {
            return Err(OrderingError::NotPermutation);
        }
        for (rank, &mc) in order.iter().enumerate() {
            if mc >= m || position[mc] != usize::MAX {
                return Err(OrderingError::NotPermutation);
            }
            position[mc] = rank;
        }
        let idx: Vec<usize> = (0..m).collect();
        let neighbors: Vec<Result<Vec<usize>, OrderingError>> = par::par_map(&idx, |&mc| {
            fan.max_cones()[mc].iter().map(|&f| wall_neighbor(&fan, mc, f)).collect()
        });
        let mut nb = Vec::with_capacity(m);
        for r in neighbors {
            nb.push(r?);
        }
        let ess_face: Vec<Vec<usize>> = (0..m)
            .map(|mc| {
                fan.max_cones()[mc]
                    .iter()
                    .zip(&nb[mc])
                    .filter(|&(_, &tau)| position[tau] < position[mc])
                    .map(|(&f, _)| f)
                    .collect()
            })
            .collect();
        let ess_consistent: Vec<bool> = par::par_map(&idx, |&mc| {
            let greater: Vec<usize> = nb[mc]
                .iter()
                .copied()
                .filter(|&tau| position[tau] > position[mc])
                .collect();
            // The intersection runs over the cone itself and its greater
            // wall neighbors; an empty neighbor family leaves the cone.
            let mut acc =
                fan.face_cone(&fan.max_cones()[mc]).expect("maximal cone is cached").clone();
            for &tau in &greater {
                let rays = cone_intersection(
                    &acc,
                    fan.face_cone(&fan.max_cones()[tau]).expect("maximal cone is cached"),
                );
                acc = Cone::new(fan.ambient(), rays).expect("intersection cone is valid");
            }
            let mut literal = acc.rays().to_vec();
            literal.sort();
            let mut face: Vec<RayVec> =
                ess_face[mc].iter().map(|&f| fan.ray(f).clone()).collect();
            face.sort();
            literal == face
        });
        Ok(OrderedFan { fan, r, order, position, neighbors: nb, ess_face, ess_consistent })
    }

    pub fn fan(&self) -> &Fan {
        &self.fan
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Maximal-cone indices in ascending order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Rank of a maximal cone in the order.
    pub fn rank(&self, mc: usize) -> usize {
        self.position[mc]
    }

    /// Wall neighbor of mc opposite its j-th ray (position within the
    /// sorted rayset of the maximal cone).
    pub fn neighbor(&self, mc: usize, j: usize) -> usize {
        self.neighbors[mc][j]
    }

    /// Wall neighbor of mc opposite the ray with fan-wide index `ray`.
    pub fn neighbor_of_ray(&self, mc: usize, ray: usize) -> Option<usize> {
        let j = self.fan.max_cones()[mc].iter().position(|&f| f == ray)?;
        Some(self.neighbors[mc][j])
    }

    /// Essence of a maximal cone as a sorted set of ray indices; errors if
    /// the literal intersection of greater neighbors is not this face.
    pub fn ess(&self, mc: usize) -> Result<&[usize], OrderingError> {
        if !self.ess_consistent[mc] {
            return Err(OrderingError::EssNotFace(mc));
        }
        Ok(&self.ess_face[mc])
    }

    /// Face-form essence without the consistency guarantee (used by
    /// report-style verification).
    pub fn ess_face_form(&self, mc: usize) -> &[usize] {
        &self.ess_face[mc]
    }

    pub fn ess_is_consistent(&self, mc: usize) -> bool {
        self.ess_consistent[mc]
    }

    /// The order as a permutation array aligned with the fan's maximal-cone
    /// list (rank k holds the index of the k-th smallest cone).
    pub fn to_permutation(&self) -> Vec<usize> {
        self.order.clone()
    }
}

/// Sign-vector order of the orthant fan: orthants compared at their first
/// differing axis, the positive direction first. Returns raysets ascending.
pub fn sign_vector_order(fan: &Fan) -> Result<Vec<Vec<usize>>, OrderingError> {
    let n = fan.ambient();
    if *fan != p1n(n) {
        return Err(OrderingError::MissingProvenance(
            "sign-vector order applies to the orthant fan only".into(),
        ));
    }
    let mut keyed: Vec<(Vec<u8>, Vec<usize>)> = fan
        .max_cones()
        .iter()
        .map(|mc| {
            let mut key = vec![0u8; n];
            for &ri in mc {
                let ray = fan.ray(ri);
                let i = ray.iter().position(|&x| x != 0).expect("orthant ray");
                key[i] = if ray[i] > 0 { 0 } else { 1 };
            }
            (key, mc.clone())
        })
        .collect();
    keyed.sort();
    Ok(keyed.into_iter().map(|(_, mc)| mc).collect())
}

/// Propagates an ascending order through one excluded barycentric step.
fn propagate(before_order: &[Vec<usize>], step: &BaryStep) -> Result<Vec<Vec<usize>>, OrderingError> {
    let before = &step.before;
    let after = &step.after;
    let mut rank: BTreeMap<&Vec<usize>, usize> = BTreeMap::new();
    for (k, rs) in before_order.iter().enumerate() {
        rank.insert(rs, k);
    }
    if rank.len() != before.max_cones().len() {
        return Err(OrderingError::MissingProvenance(
            "order does not cover the step's input fan".into(),
        ));
    }
    let mut tags: BTreeMap<Vec<usize>, &crate::subdivide::ParentTag> = BTreeMap::new();
    for tag in &step.parents {
        let idxs = rayset_of(before, &tag.parent_rays)?;
        tags.insert(idxs, tag);
    }
    let mut out: Vec<Vec<usize>> = Vec::with_capacity(after.max_cones().len());
    for parent_rs in before_order {
        let tag = tags.get(parent_rs).ok_or_else(|| {
            OrderingError::MissingProvenance("step lacks a tag for a maximal cone".into())
        })?;
        let parent_rank = rank[parent_rs];
        // Label the selected rays: trailing-axis rays first, then the rest
        // split by whether the wall neighbor is greater (before) or smaller
        // (after), lexicographic within each group.
        let mut group_eta: Vec<RayVec> = tag.eta_a_rays.clone();
        group_eta.sort();
        let mut group_up: Vec<RayVec> = Vec::new();
        let mut group_down: Vec<RayVec> = Vec::new();
        let parent_idx = rayset_of(before, &tag.parent_rays)?;
        let parent_mc = before
            .max_cones()
            .iter()
            .position(|mc| mc == &parent_idx)
            .ok_or_else(|| OrderingError::MissingProvenance("parent is not maximal".into()))?;
        for f in &tag.a_rays {
            if group_eta.contains(f) {
                continue;
            }
            let fi = before.ray_index(f).expect("selected ray is in the fan");
            let tau = wall_neighbor(before, parent_mc, fi)?;
            let tau_rank = rank[&before.max_cones()[tau]];
            if tau_rank > parent_rank {
                group_up.push(f.clone());
            } else {
                group_down.push(f.clone());
            }
        }
        group_up.sort();
        group_down.sort();
        let t = group_eta.len();
        let mut labels = group_eta;
        labels.extend(group_up);
        labels.extend(group_down);
        let m = labels.len();
        let outside: Vec<RayVec> = tag
            .parent_rays
            .iter()
            .filter(|f| !tag.a_rays.contains(*f))
            .cloned()
            .collect();
        // Enumerate the children by their admissible permutations and order
        // them: smaller means larger value at the last differing position.
        let mut children: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for alpha in t_admissible_permutations(t, m) {
            let c = alpha.iter().position(|&v| v > t).unwrap_or(m);
            let mut rays: Vec<RayVec> = (0..c).map(|i| labels[alpha[i] - 1].clone()).collect();
            let mut sum = vec![0i64; after.ambient()];
            for (i, &v) in alpha.iter().enumerate() {
                for (s, x) in sum.iter_mut().zip(&labels[v - 1]) {
                    *s += x;
                }
                if i >= c {
                    rays.push(sum.clone());
                }
            }
            rays.extend(outside.iter().cloned());
            let child = rayset_of(after, &rays)?;
            children.push((alpha, child));
        }
        children.sort_by(|(a, _), (b, _)| {
            for j in (0..m).rev() {
                if a[j] != b[j] {
                    return b[j].cmp(&a[j]);
                }
            }
            std::cmp::Ordering::Equal
        });
        out.extend(children.into_iter().map(|(_, child)| child));
    }
    if out.len() != after.max_cones().len() {
        return Err(OrderingError::MissingProvenance(
            "propagated order does not cover the step's output fan".into(),
        ));
    }
    Ok(out)
}

fn rayset_of(fan: &Fan, rays: &[RayVec]) -> Result<Vec<usize>, OrderingError> {
    let mut idxs: Vec<usize> = rays
        .iter()
        .map(|r| fan.ray_index(r).ok_or_else(|| FanError::RayNotFound(r.clone())))
        .collect::<Result<_, _>>()?;
    idxs.sort_unstable();
    idxs.dedup();
    Ok(idxs)
}

/// Splits the cones of an r-standard fan into the trailing-axis subfan
/// (cones extending by some e_i, r < i <= n, inside the fan) and its
/// complement. The first component is verified to be closed under faces
/// whenever it is nonempty.
pub struct SigmaSplit {
    /// Cones extending by a trailing axis, as sorted raysets.
    pub circ: BTreeSet<Vec<usize>>,
    /// The remaining cones (not a fan in general).
    pub flat: BTreeSet<Vec<usize>>,
}

pub fn sigma_split(fan: &Fan, r: usize) -> Result<SigmaSplit, OrderingError> {
    let n = fan.ambient();
    let mut circ = BTreeSet::new();
    let mut flat = BTreeSet::new();
    let faces: Vec<Vec<usize>> = fan.faces().iter().cloned().collect();
    let verdicts: Vec<bool> = par::par_map(&faces, |f| {
        (r..n).any(|i| {
            let mut gens: Vec<RayVec> = f.iter().map(|&ri| fan.ray(ri).clone()).collect();
            let mut e = vec![0i64; n];
            e[i] = 1;
            gens.push(e);
            fan.generated_cone(&gens).is_some()
        })
    });
    for (f, in_circ) in faces.into_iter().zip(verdicts) {
        if in_circ {
            circ.insert(f);
        } else {
            flat.insert(f);
        }
    }
    // The marked set is closed under faces.
    for f in &circ {
        for k in 0..f.len() {
            let mut sub = f.clone();
            sub.remove(k);
            if !circ.contains(&sub) && !sub.is_empty() {
                return Err(OrderingError::NotSubfan(f.clone()));
            }
        }
    }
    Ok(SigmaSplit { circ, flat })
}

/// Builds the admissible order of a fan produced by the tower builders:
/// sign-vector base order, one propagation per recorded step, then a stable
/// partition moving maximal cones containing a trailing axis to the front.
pub fn build_admissible_ordering(
    fan: &Fan,
    r: usize,
    steps: &[BaryStep],
) -> Result<OrderedFan, OrderingError> {
    let n = fan.ambient();
    let base = p1n(n);
    match steps.first() {
        None => {
            if *fan != base {
                return Err(OrderingError::MissingProvenance(
                    "no steps were recorded but the fan is not the orthant fan".into(),
                ));
            }
        }
        Some(first) => {
            if first.before != base {
                return Err(OrderingError::MissingProvenance(
                    "the first step does not start at the orthant fan".into(),
                ));
            }
            for w in steps.windows(2) {
                if w[0].after != w[1].before {
                    return Err(OrderingError::MissingProvenance(
                        "consecutive steps do not chain".into(),
                    ));
                }
            }
            if &steps.last().expect("nonempty").after != fan {
                return Err(OrderingError::MissingProvenance(
                    "the last step does not end at the fan".into(),
                ));
            }
        }
    }
    let mut order_raysets = sign_vector_order(&base)?;
    for step in steps {
        order_raysets = propagate(&order_raysets, step)?;
    }
    // Stable partition: cones containing a trailing axis ray first.
    let axis_idx: Vec<usize> = (r..n)
        .filter_map(|i| {
            let mut e = vec![0i64; n];
            e[i] = 1;
            fan.ray_index(&e)
        })
        .collect();
    let (front, back): (Vec<Vec<usize>>, Vec<Vec<usize>>) = order_raysets
        .into_iter()
        .partition(|rs| rs.iter().any(|ri| axis_idx.contains(ri)));
    let mut order = Vec::with_capacity(fan.max_cones().len());
    for rs in front.iter().chain(back.iter()) {
        let mc = fan
            .max_cones()
            .iter()
            .position(|m| m == rs)
            .ok_or(OrderingError::NotPermutation)?;
        order.push(mc);
    }
    OrderedFan::new(fan.clone(), r, order)
}

/// Outcome of one ordering condition.
#[derive(Clone, Debug)]
pub struct ConditionReport {
    pub holds: bool,
    pub counterexample: Option<String>,
}

impl ConditionReport {
    fn ok() -> ConditionReport {
        ConditionReport { holds: true, counterexample: None }
    }

    fn fail(msg: String) -> ConditionReport {
        ConditionReport { holds: false, counterexample: Some(msg) }
    }
}

/// Report of the six ordering conditions plus the essence consistency check.
#[derive(Clone, Debug)]
pub struct OrderingReport {
    /// ess(sigma) inside tau forces sigma before tau.
    pub monotone: ConditionReport,
    /// The axis cone is least.
    pub least: ConditionReport,
    /// Every non-least cone has a smaller wall neighbor.
    pub connected: ConditionReport,
    /// Cones containing a trailing axis precede the neighbor opposite it.
    pub axis_up: ConditionReport,
    /// Missing trailing axes do not extend the essence inside the fan.
    pub no_extension: ConditionReport,
    /// Trailing-axis cones come before all others.
    pub partitioned: ConditionReport,
    /// Literal essence equals the face form for every maximal cone.
    pub ess_consistent: ConditionReport,
}

impl OrderingReport {
    pub fn pass(&self) -> bool {
        self.monotone.holds
            && self.least.holds
            && self.connected.holds
            && self.axis_up.holds
            && self.no_extension.holds
            && self.partitioned.holds
            && self.ess_consistent.holds
    }

    pub fn lines(&self) -> Vec<(&'static str, &ConditionReport)> {
        vec![
            ("(i) essence-monotone", &self.monotone),
            ("(ii) axis cone least", &self.least),
            ("(iii) smaller neighbor exists", &self.connected),
            ("(iv) axis cones precede opposite neighbors", &self.axis_up),
            ("(v) no essence extension by missing axes", &self.no_extension),
            ("(vi) trailing-axis cones first", &self.partitioned),
            ("essence routes agree", &self.ess_consistent),
        ]
    }
}

/// Checks all ordering conditions on an ordered fan; never errors, reporting
/// the first counterexample per condition instead.
pub fn verify_ordering(of: &OrderedFan) -> OrderingReport {
    let fan = of.fan();
    let n = fan.ambient();
    let r = of.r();
    let m = fan.max_cones().len();
    let describe = |mc: usize| -> String {
        let rays: Vec<&RayVec> = fan.max_cones()[mc].iter().map(|&ri| fan.ray(ri)).collect();
        format!("cone #{mc} {rays:?} (rank {})", of.rank(mc))
    };

    let mut monotone = ConditionReport::ok();
    'outer: for sigma in 0..m {
        let ess = of.ess_face_form(sigma);
        for tau in 0..m {
            if tau == sigma {
                continue;
            }
            let inside = ess.iter().all(|f| fan.max_cones()[tau].contains(f));
            if inside && of.rank(sigma) > of.rank(tau) {
                monotone = ConditionReport::fail(format!(
                    "essence of {} lies in {} but follows it",
                    describe(sigma),
                    describe(tau)
                ));
                break 'outer;
            }
        }
    }

    let axis_rayset: Option<Vec<usize>> = (0..n)
        .map(|i| {
            let mut e = vec![0i64; n];
            e[i] = 1;
            fan.ray_index(&e)
        })
        .collect::<Option<Vec<usize>>>()
        .map(|mut v| {
            v.sort_unstable();
            v
        });
    let least = match axis_rayset {
        Some(axis) => {
            let first = of.order()[0];
            if fan.max_cones()[first] == axis {
                ConditionReport::ok()
            } else {
                ConditionReport::fail(format!("least element is {}", describe(first)))
            }
        }
        None => ConditionReport::fail("the fan has no full axis cone".into()),
    };

    let mut connected = ConditionReport::ok();
    for (k, &sigma) in of.order().iter().enumerate().skip(1) {
        let has_smaller = fan.max_cones()[sigma]
            .iter()
            .enumerate()
            .any(|(j, _)| of.rank(of.neighbor(sigma, j)) < k);
        if !has_smaller {
            connected = ConditionReport::fail(format!(
                "{} has no smaller wall neighbor",
                describe(sigma)
            ));
            break;
        }
    }

    let mut axis_up = ConditionReport::ok();
    'axis: for sigma in 0..m {
        for i in r..n {
            let mut e = vec![0i64; n];
            e[i] = 1;
            let Some(ri) = fan.ray_index(&e) else { continue };
            if !fan.max_cones()[sigma].contains(&ri) {
                continue;
            }
            let tau = of.neighbor_of_ray(sigma, ri).expect("ray is in the cone");
            if of.rank(sigma) > of.rank(tau) {
                axis_up = ConditionReport::fail(format!(
                    "{} follows its neighbor opposite axis {}",
                    describe(sigma),
                    i
                ));
                break 'axis;
            }
        }
    }

    let mut no_extension = ConditionReport::ok();
    'ext: for sigma in 0..m {
        for i in r..n {
            let mut e = vec![0i64; n];
            e[i] = 1;
            let Some(ri) = fan.ray_index(&e) else { continue };
            if fan.max_cones()[sigma].contains(&ri) {
                continue;
            }
            let mut gens: Vec<RayVec> =
                of.ess_face_form(sigma).iter().map(|&f| fan.ray(f).clone()).collect();
            gens.push(e);
            if fan.generated_cone(&gens).is_some() {
                no_extension = ConditionReport::fail(format!(
                    "essence of {} extends by axis {} inside the fan",
                    describe(sigma),
                    i
                ));
                break 'ext;
            }
        }
    }

    let axis_idx: Vec<usize> = (r..n)
        .filter_map(|i| {
            let mut e = vec![0i64; n];
            e[i] = 1;
            fan.ray_index(&e)
        })
        .collect();
    let in_circ = |mc: usize| fan.max_cones()[mc].iter().any(|ri| axis_idx.contains(ri));
    let mut partitioned = ConditionReport::ok();
    let mut seen_flat = None;
    for &mc in of.order() {
        if in_circ(mc) {
            if let Some(prev) = seen_flat {
                partitioned = ConditionReport::fail(format!(
                    "{} follows {} across the partition",
                    describe(mc),
                    describe(prev)
                ));
                break;
            }
        } else {
            seen_flat = Some(mc);
        }
    }

    let ess_consistent = match (0..m).find(|&mc| !of.ess_is_consistent(mc)) {
        None => ConditionReport::ok(),
        Some(mc) => ConditionReport::fail(format!(
            "literal essence of {} exceeds the face form",
            describe(mc)
        )),
    };

    OrderingReport {
        monotone,
        least,
        connected,
        axis_up,
        no_extension,
        partitioned,
        ess_consistent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subdivide::{build_gamma, build_theta};

    fn ray(v: &[i64]) -> RayVec {
        v.to_vec()
    }

    #[test]
    fn sign_vector_order_small_cases() {
        let f1 = p1n(1);
        let order = sign_vector_order(&f1).unwrap();
        let rays: Vec<&RayVec> = order.iter().map(|rs| f1.ray(rs[0])).collect();
        assert_eq!(rays, vec![&ray(&[1]), &ray(&[-1])]);

        let f2 = p1n(2);
        let order = sign_vector_order(&f2).unwrap();
        let first: Vec<&RayVec> = order[0].iter().map(|&ri| f2.ray(ri)).collect();
        let last: Vec<&RayVec> = order[3].iter().map(|&ri| f2.ray(ri)).collect();
        assert_eq!(first, vec![&ray(&[0, 1]), &ray(&[1, 0])]);
        assert_eq!(last, vec![&ray(&[-1, 0]), &ray(&[0, -1])]);

        assert!(sign_vector_order(&build_gamma(2, 1).unwrap().0).is_err());
    }

    #[test]
    fn wall_neighbors_on_orthants() {
        let f = p1n(2);
        let sigma = f
            .max_cones()
            .iter()
            .position(|mc| mc.iter().map(|&ri| f.ray(ri).clone()).collect::<Vec<_>>()
                == vec![ray(&[0, 1]), ray(&[1, 0])])
            .unwrap();
        let e1 = f.ray_index(&ray(&[1, 0])).unwrap();
        let facet_partner = wall_neighbor(&f, sigma, e1).unwrap();
        let partner_rays: Vec<&RayVec> =
            f.max_cones()[facet_partner].iter().map(|&ri| f.ray(ri)).collect();
        assert_eq!(partner_rays, vec![&ray(&[-1, 0]), &ray(&[0, 1])]);
    }

    #[test]
    fn base_ordering_is_admissible_for_r_zero() {
        // For r = 0 the all-negative orthant is the only cone without a
        // positive axis, and it is already the greatest element.
        let fan = p1n(3);
        let of = build_admissible_ordering(&fan, 0, &[]).unwrap();
        let report = verify_ordering(&of);
        assert!(report.pass(), "{report:?}");
        // Essences are the faces spanned by the negative axes.
        for mc in 0..fan.max_cones().len() {
            let ess = of.ess(mc).unwrap();
            for &f in ess {
                assert!(fan.ray(f).iter().all(|&x| x <= 0));
            }
            let negatives = fan.max_cones()[mc]
                .iter()
                .filter(|&&ri| fan.ray(ri).iter().any(|&x| x < 0))
                .count();
            assert_eq!(ess.len(), negatives);
        }
        // Least has empty essence, greatest has full essence.
        assert_eq!(of.ess(of.order()[0]).unwrap().len(), 0);
        assert_eq!(of.ess(*of.order().last().unwrap()).unwrap().len(), 3);
    }

    #[test]
    fn base_ordering_needs_partition_for_positive_r() {
        // The raw sign-vector order violates the partition condition at
        // r = 1, and the stable partition fixes it without breaking the
        // other conditions.
        let fan = p1n(3);
        let raw = sign_vector_order(&fan).unwrap();
        let order: Vec<usize> = raw
            .iter()
            .map(|rs| fan.max_cones().iter().position(|mc| mc == rs).unwrap())
            .collect();
        let of_raw = OrderedFan::new(fan.clone(), 1, order).unwrap();
        let raw_report = verify_ordering(&of_raw);
        assert!(!raw_report.partitioned.holds);
        assert!(raw_report.monotone.holds);
        assert!(raw_report.least.holds);

        let of = build_admissible_ordering(&fan, 1, &[]).unwrap();
        let report = verify_ordering(&of);
        assert!(report.pass(), "{report:?}");
    }

    #[test]
    fn reversed_ordering_fails_least() {
        let fan = p1n(2);
        let raw = sign_vector_order(&fan).unwrap();
        let mut order: Vec<usize> = raw
            .iter()
            .map(|rs| fan.max_cones().iter().position(|mc| mc == rs).unwrap())
            .collect();
        order.reverse();
        let of = OrderedFan::new(fan, 0, order).unwrap();
        let report = verify_ordering(&of);
        assert!(!report.least.holds);
        assert!(!report.pass());
        // The essence routes still agree (a fan fact, independent of the
        // order), but the axis conditions fail alongside the least element.
        assert!(report.ess_consistent.holds);
        assert!(!report.axis_up.holds);
        assert!(!report.no_extension.holds);
    }

    #[test]
    fn tower_orderings_are_admissible() {
        for (n, r, d) in [
            (1usize, 1usize, vec![1u32]),
            (2, 1, vec![1]),
            (2, 1, vec![2]),
            (2, 2, vec![1]),
            (3, 1, vec![1]),
            (2, 1, vec![1, 1]),
            (3, 2, vec![1]),
        ] {
            let (theta, steps) = build_theta(n, r, &d).unwrap();
            let of = build_admissible_ordering(&theta, r, &steps).unwrap();
            let report = verify_ordering(&of);
            assert!(report.pass(), "n={n} r={r} d={d:?}: {report:?}");
        }
    }

    #[test]
    fn gamma_ordering_has_thirty_ranks() {
        let (gamma, steps) = build_theta(3, 1, &[1]).unwrap();
        assert_eq!(gamma.max_cones().len(), 30);
        let of = build_admissible_ordering(&gamma, 1, &steps).unwrap();
        assert!(verify_ordering(&of).pass());
        // Ranks are a permutation of 0..30.
        let mut seen: Vec<usize> = of.to_permutation();
        seen.sort_unstable();
        assert_eq!(seen, (0..30).collect::<Vec<_>>());
        // The least cone is the positive orthant.
        let least = of.order()[0];
        let rays: Vec<&RayVec> =
            gamma.max_cones()[least].iter().map(|&ri| gamma.ray(ri)).collect();
        assert_eq!(rays, vec![&ray(&[0, 0, 1]), &ray(&[0, 1, 0]), &ray(&[1, 0, 0])]);
    }

    #[test]
    fn provenance_mismatch_is_rejected() {
        let (theta, steps) = build_theta(2, 1, &[1]).unwrap();
        let (other, _) = build_theta(2, 1, &[2]).unwrap();
        assert!(matches!(
            build_admissible_ordering(&other, 1, &steps),
            Err(OrderingError::MissingProvenance(_))
        ));
        assert!(build_admissible_ordering(&theta, 1, &[]).is_err());
    }

    #[test]
    fn sigma_split_counts() {
        // Orthant fan at r = 1: the marked cones are those extending by the
        // second axis.
        let fan = p1n(2);
        let split = sigma_split(&fan, 1).unwrap();
        let e2 = fan.ray_index(&ray(&[0, 1])).unwrap();
        for f in &split.circ {
            let extended = f.contains(&e2) || {
                let mut gens: Vec<RayVec> = f.iter().map(|&ri| fan.ray(ri).clone()).collect();
                gens.push(ray(&[0, 1]));
                fan.generated_cone(&gens).is_some()
            };
            assert!(extended);
        }
        // Maximal marked cones are exactly those containing e2.
        let max_circ: Vec<&Vec<usize>> =
            fan.max_cones().iter().filter(|mc| mc.contains(&e2)).collect();
        assert_eq!(max_circ.len(), 2);
        // r = n: nothing extends by an axis beyond n.
        let split = sigma_split(&fan, 2).unwrap();
        assert!(split.circ.is_empty());
        assert_eq!(split.flat.len(), fan.faces().len());

        // Theta at r = 1: marked maximal cones are those containing e2.
        let (theta, _) = build_theta(2, 1, &[1]).unwrap();
        let split = sigma_split(&theta, 1).unwrap();
        let e2 = theta.ray_index(&ray(&[0, 1])).unwrap();
        let expect = theta.max_cones().iter().filter(|mc| mc.contains(&e2)).count();
        let got = theta
            .max_cones()
            .iter()
            .filter(|mc| split.circ.contains(*mc))
            .count();
        assert_eq!(got, expect);
    }
}
