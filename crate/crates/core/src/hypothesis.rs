//! Hypothesis space of object placements.
//!
//! A placement assigns every object to one box. In surjective mode every box
//! must receive at least one object, giving `K! * S(N, K)` placements; in
//! allow-empty mode there are `K^N`.

use thiserror::Error;

/// Default upper bound on the number of enumerated hypotheses.
pub const DEFAULT_HYPOTHESIS_CAP: u64 = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HypothesisError {
    #[error("integer overflow computing {0}")]
    Overflow(&'static str),
    #[error(
        "{count} hypotheses exceed the cap of {cap}; reduce the number of objects or boxes, \
         or switch between surjective and allow-empty modes"
    )]
    CapExceeded { count: String, cap: u64 },
    #[error("need at least one object and one box (got {n_objects} objects, {k_boxes} boxes)")]
    Empty { n_objects: usize, k_boxes: usize },
}

/// One complete assignment; `assignment[o]` is the box index of object `o`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Placement {
    assignment: Vec<usize>,
}

impl Placement {
    pub fn new(assignment: Vec<usize>) -> Self {
        Self { assignment }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn n_objects(&self) -> usize {
        self.assignment.len()
    }

    pub fn box_of(&self, object: usize) -> usize {
        self.assignment[object]
    }

    /// Object indices placed in `box_index`, ascending.
    pub fn box_contents(&self, box_index: usize) -> Vec<usize> {
        box_contents(self, box_index)
    }

    pub fn is_surjective(&self, k_boxes: usize) -> bool {
        let mut used = vec![false; k_boxes];
        for &b in &self.assignment {
            used[b] = true;
        }
        used.into_iter().all(|u| u)
    }
}

/// All valid placements for a problem size, sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HypothesisSet {
    placements: Vec<Placement>,
    n_objects: usize,
    k_boxes: usize,
    allow_empty: bool,
}

impl HypothesisSet {
    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    pub fn n_objects(&self) -> usize {
        self.n_objects
    }

    pub fn k_boxes(&self) -> usize {
        self.k_boxes
    }

    pub fn allow_empty(&self) -> bool {
        self.allow_empty
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Placement> {
        self.placements.iter()
    }
}

impl<'a> IntoIterator for &'a HypothesisSet {
    type Item = &'a Placement;
    type IntoIter = std::slice::Iter<'a, Placement>;

    fn into_iter(self) -> Self::IntoIter {
        self.placements.iter()
    }
}

/// Stirling number of the second kind, `S(n, k)`.
pub fn stirling2(n: usize, k: usize) -> Result<u64, HypothesisError> {
    if k > n {
        return Ok(0);
    }
    if n == 0 {
        return Ok(1);
    }
    if k == 0 {
        return Ok(0);
    }
    // row[j] holds S(i, j) for the current i.
    let mut row = vec![0u64; k + 1];
    row[0] = 1;
    for i in 1..=n {
        let upper = i.min(k);
        for j in (1..=upper).rev() {
            let grown = (j as u64)
                .checked_mul(row[j])
                .and_then(|v| v.checked_add(row[j - 1]))
                .ok_or(HypothesisError::Overflow("stirling2"))?;
            row[j] = grown;
        }
        row[0] = 0;
    }
    Ok(row[k])
}

fn factorial(k: usize) -> Result<u64, HypothesisError> {
    (1..=k as u64).try_fold(1u64, |acc, v| {
        acc.checked_mul(v)
            .ok_or(HypothesisError::Overflow("factorial"))
    })
}

/// Number of placements: `K! * S(N, K)` when surjective, `K^N` otherwise.
pub fn count_hypotheses(
    n_objects: usize,
    k_boxes: usize,
    allow_empty: bool,
) -> Result<u64, HypothesisError> {
    if n_objects == 0 || k_boxes == 0 {
        return Err(HypothesisError::Empty { n_objects, k_boxes });
    }
    if allow_empty {
        let exp = u32::try_from(n_objects).map_err(|_| HypothesisError::Overflow("K^N"))?;
        (k_boxes as u64)
            .checked_pow(exp)
            .ok_or(HypothesisError::Overflow("K^N"))
    } else {
        factorial(k_boxes)?
            .checked_mul(stirling2(n_objects, k_boxes)?)
            .ok_or(HypothesisError::Overflow("K! * S(N, K)"))
    }
}

pub fn enumerate_hypotheses(
    n_objects: usize,
    k_boxes: usize,
    allow_empty: bool,
) -> Result<HypothesisSet, HypothesisError> {
    enumerate_hypotheses_capped(n_objects, k_boxes, allow_empty, DEFAULT_HYPOTHESIS_CAP)
}

pub fn enumerate_hypotheses_capped(
    n_objects: usize,
    k_boxes: usize,
    allow_empty: bool,
    cap: u64,
) -> Result<HypothesisSet, HypothesisError> {
    let count = match count_hypotheses(n_objects, k_boxes, allow_empty) {
        Ok(c) => c,
        Err(HypothesisError::Overflow(what)) => {
            return Err(HypothesisError::CapExceeded {
                count: format!("more than u64::MAX ({what})"),
                cap,
            })
        }
        Err(e) => return Err(e),
    };
    if count > cap {
        return Err(HypothesisError::CapExceeded {
            count: count.to_string(),
            cap,
        });
    }
    let placements = if allow_empty {
        all_assignments(n_objects, k_boxes)
    } else {
        surjections(n_objects, k_boxes)
    };
    debug_assert_eq!(placements.len() as u64, count);
    Ok(HypothesisSet {
        placements,
        n_objects,
        k_boxes,
        allow_empty,
    })
}

/// Odometer over `K^N` index vectors, last object fastest, which yields
/// lexicographic order directly.
fn all_assignments(n: usize, k: usize) -> Vec<Placement> {
    let mut out = Vec::new();
    let mut current = vec![0usize; n];
    loop {
        out.push(Placement::new(current.clone()));
        let mut pos = n;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            current[pos] += 1;
            if current[pos] < k {
                break;
            }
            current[pos] = 0;
        }
    }
}

/// Depth-first generation of surjective assignments in lexicographic order,
/// pruning branches that can no longer cover every box.
fn surjections(n: usize, k: usize) -> Vec<Placement> {
    fn recurse(
        pos: usize,
        n: usize,
        k: usize,
        current: &mut Vec<usize>,
        counts: &mut [usize],
        unused: usize,
        out: &mut Vec<Placement>,
    ) {
        if pos == n {
            if unused == 0 {
                out.push(Placement::new(current.clone()));
            }
            return;
        }
        let remaining = n - pos;
        for b in 0..k {
            let newly = usize::from(counts[b] == 0);
            let still_unused = unused - newly;
            if still_unused > remaining - 1 {
                continue;
            }
            counts[b] += 1;
            current.push(b);
            recurse(pos + 1, n, k, current, counts, still_unused, out);
            current.pop();
            counts[b] -= 1;
        }
    }
    let mut out = Vec::new();
    if k <= n {
        recurse(
            0,
            n,
            k,
            &mut Vec::with_capacity(n),
            &mut vec![0; k],
            k,
            &mut out,
        );
    }
    out
}

/// Object indices placed in `box_index` by `placement`, ascending.
pub fn box_contents(placement: &Placement, box_index: usize) -> Vec<usize> {
    placement
        .assignment
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == box_index)
        .map(|(o, _)| o)
        .collect()
}
