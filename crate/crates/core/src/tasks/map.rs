//! Map task: small undirected road graphs and route questions.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::generators::MAX_RETRIES;
use super::{McqItem, TaskError};

const LOCATIONS: [&str; 16] = [
    "Library", "Bakery", "Harbor", "Museum", "Station", "Market", "Chapel", "School", "Farm",
    "Tower", "Garden", "Mill", "Bridge", "Castle", "Inn", "Quarry",
];

/// Probability of adding each non-tree edge on top of the spanning tree.
const EXTRA_EDGE_PROB: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteQuestion {
    pub start: usize,
    pub goal: usize,
    pub routes: Vec<Vec<usize>>,
    pub answer_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapInstance {
    pub locations: Vec<String>,
    /// Undirected edges stored as `(a, b)` with `a < b`.
    pub edges: Vec<(usize, usize)>,
    pub questions: Vec<RouteQuestion>,
}

impl MapInstance {
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        self.edges.contains(&key)
    }

    /// A route is valid when it visits distinct locations and every hop is a road.
    pub fn is_valid_route(&self, route: &[usize]) -> bool {
        let distinct: BTreeSet<_> = route.iter().collect();
        route.len() >= 2
            && distinct.len() == route.len()
            && route.windows(2).all(|w| self.adjacent(w[0], w[1]))
    }

    pub fn is_connected(&self) -> bool {
        let n = self.locations.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for w in 0..n {
                if !seen[w] && self.adjacent(v, w) {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        let fail = |m: String| Err(TaskError::GenerationFailed(m));
        if !self.is_connected() {
            return fail("map graph is disconnected".into());
        }
        for (i, q) in self.questions.iter().enumerate() {
            let valid: Vec<usize> = (0..q.routes.len())
                .filter(|&r| self.is_valid_route(&q.routes[r]))
                .collect();
            if valid != [q.answer_index] {
                return fail(format!("question {i} has valid options {valid:?}"));
            }
            let distinct: BTreeSet<_> = q.routes.iter().collect();
            if distinct.len() != q.routes.len() {
                return fail(format!("question {i} repeats an option"));
            }
            if q.routes.iter().any(|r| r.first() != Some(&q.start) || r.last() != Some(&q.goal)) {
                return fail(format!("question {i} has an option with wrong endpoints"));
            }
        }
        Ok(())
    }

    pub fn description(&self) -> String {
        let mut out = format!("Locations: {}.\nRoads:", self.locations.join(", "));
        for &(a, b) in &self.edges {
            out.push_str(&format!("\n{} <-> {}", self.locations[a], self.locations[b]));
        }
        out
    }

    fn render_route(&self, route: &[usize]) -> String {
        route
            .iter()
            .map(|&i| self.locations[i].as_str())
            .collect::<Vec<_>>()
            .join(" -> ")
    }

    pub fn mcq_items(&self) -> Vec<McqItem> {
        self.questions
            .iter()
            .map(|q| McqItem {
                prompt: format!(
                    "Which route travels from {} to {} using only the available roads?",
                    self.locations[q.start], self.locations[q.goal]
                ),
                options: q.routes.iter().map(|r| self.render_route(r)).collect(),
                answer_index: q.answer_index,
            })
            .collect()
    }

    /// Every simple path from `start` to `goal`.
    pub fn simple_paths(&self, start: usize, goal: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut path = vec![start];
        self.extend_paths(goal, &mut path, &mut out);
        out
    }

    fn extend_paths(&self, goal: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let last = *path.last().unwrap();
        if last == goal {
            out.push(path.clone());
            return;
        }
        for next in 0..self.locations.len() {
            if !path.contains(&next) && self.adjacent(last, next) {
                path.push(next);
                self.extend_paths(goal, path, out);
                path.pop();
            }
        }
    }
}

/// A connected map over `n_locations` places with `n_questions` route
/// questions of `n_options` candidates each, exactly one of them valid.
pub fn gen_map<R: Rng + ?Sized>(
    n_locations: usize,
    n_questions: usize,
    n_options: usize,
    rng: &mut R,
) -> Result<MapInstance, TaskError> {
    if !(4..=6).contains(&n_locations) {
        return Err(TaskError::GenerationFailed(format!(
            "maps have 4 to 6 locations, got {n_locations}"
        )));
    }
    for _ in 0..MAX_RETRIES {
        if let Some(map) = try_gen_map(n_locations, n_questions, n_options, rng) {
            map.validate()?;
            return Ok(map);
        }
    }
    Err(TaskError::GenerationFailed(format!(
        "no map over {n_locations} locations after {MAX_RETRIES} attempts"
    )))
}

fn try_gen_map<R: Rng + ?Sized>(
    n: usize,
    n_questions: usize,
    n_options: usize,
    rng: &mut R,
) -> Option<MapInstance> {
    let locations: Vec<String> = LOCATIONS
        .choose_multiple(rng, n)
        .map(|s| s.to_string())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = BTreeSet::new();
    for i in 1..n {
        let j = order[rng.gen_range(0..i)];
        let a = order[i];
        edges.insert((a.min(j), a.max(j)));
    }
    for a in 0..n {
        for b in a + 1..n {
            if !edges.contains(&(a, b)) && rng.gen_bool(EXTRA_EDGE_PROB) {
                edges.insert((a, b));
            }
        }
    }
    if edges.len() == n * (n - 1) / 2 {
        // complete graph: every route is valid, no distractors possible
        return None;
    }
    let mut map = MapInstance {
        locations,
        edges: edges.into_iter().collect(),
        questions: Vec::new(),
    };

    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    pairs.shuffle(rng);
    for (start, goal) in pairs {
        if map.questions.len() == n_questions {
            break;
        }
        if let Some(q) = route_question(&map, start, goal, n_options, rng) {
            map.questions.push(q);
        }
    }
    (map.questions.len() == n_questions).then_some(map)
}

fn route_question<R: Rng + ?Sized>(
    map: &MapInstance,
    start: usize,
    goal: usize,
    n_options: usize,
    rng: &mut R,
) -> Option<RouteQuestion> {
    let paths = map.simple_paths(start, goal);
    let correct = paths.choose(rng)?.clone();
    let mut routes = vec![correct.clone()];
    let n = map.locations.len();
    for _ in 0..200 {
        if routes.len() == n_options {
            break;
        }
        let candidate = perturb(&correct, n, start, goal, rng);
        if candidate.len() >= 2
            && candidate.first() == Some(&start)
            && candidate.last() == Some(&goal)
            && candidate.iter().collect::<BTreeSet<_>>().len() == candidate.len()
            && !map.is_valid_route(&candidate)
            && !routes.contains(&candidate)
        {
            routes.push(candidate);
        }
    }
    if routes.len() < n_options {
        return None;
    }
    routes.shuffle(rng);
    let answer_index = routes.iter().position(|r| *r == correct)?;
    Some(RouteQuestion {
        start,
        goal,
        routes,
        answer_index,
    })
}

/// Distractor by edge perturbation: swap, insert, or drop an interior stop.
fn perturb<R: Rng + ?Sized>(route: &[usize], n: usize, start: usize, goal: usize, rng: &mut R) -> Vec<usize> {
    let mut r = route.to_vec();
    let unused: Vec<usize> = (0..n).filter(|v| !r.contains(v)).collect();
    match rng.gen_range(0..3) {
        0 if r.len() > 2 && !unused.is_empty() => {
            let pos = rng.gen_range(1..r.len() - 1);
            r[pos] = *unused.choose(rng).unwrap();
        }
        1 if !unused.is_empty() => {
            let pos = rng.gen_range(1..r.len());
            r.insert(pos, *unused.choose(rng).unwrap());
        }
        2 if r.len() > 2 => {
            let pos = rng.gen_range(1..r.len() - 1);
            r.remove(pos);
        }
        _ => {
            // arbitrary interior stops between the endpoints
            let mut middle: Vec<usize> = (0..n).filter(|&v| v != start && v != goal).collect();
            middle.shuffle(rng);
            let k = rng.gen_range(1..=middle.len().max(1)).min(middle.len());
            r = std::iter::once(start)
                .chain(middle.into_iter().take(k))
                .chain(std::iter::once(goal))
                .collect();
        }
    }
    r
}
