//! Craft task: recipe DAGs and questions about how items combine.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::generators::MAX_RETRIES;
use super::{McqItem, TaskError};

const ITEMS: [&str; 16] = [
    "Wood", "Stone", "Iron", "Clay", "Sand", "Water", "Wool", "Coal", "Reed", "Salt", "Copper",
    "Resin", "Flint", "Hide", "Ash", "Amber",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub inputs: (usize, usize),
    pub output: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CraftQuestion {
    /// Which pair of items makes `target`?
    Recipe {
        target: usize,
        options: Vec<(usize, usize)>,
        answer_index: usize,
    },
    /// What do `inputs` make?
    Product {
        inputs: (usize, usize),
        options: Vec<usize>,
        answer_index: usize,
    },
    /// Which base materials does `target` ultimately require?
    BaseMaterials {
        target: usize,
        options: Vec<Vec<usize>>,
        answer_index: usize,
    },
}

impl CraftQuestion {
    pub fn answer_index(&self) -> usize {
        match self {
            CraftQuestion::Recipe { answer_index, .. }
            | CraftQuestion::Product { answer_index, .. }
            | CraftQuestion::BaseMaterials { answer_index, .. } => *answer_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CraftInstance {
    pub items: Vec<String>,
    /// Items `0..base` are raw materials; the rest are crafted.
    pub base: usize,
    pub rules: Vec<Rule>,
    pub questions: Vec<CraftQuestion>,
}

fn unordered(p: (usize, usize)) -> (usize, usize) {
    (p.0.min(p.1), p.0.max(p.1))
}

impl CraftInstance {
    pub fn rule_for(&self, output: usize) -> Option<&Rule> {
        self.rules.iter().find(|r| r.output == output)
    }

    pub fn product_of(&self, inputs: (usize, usize)) -> Option<usize> {
        let key = unordered(inputs);
        self.rules
            .iter()
            .find(|r| unordered(r.inputs) == key)
            .map(|r| r.output)
    }

    /// Base materials reached by expanding recipes from `item`.
    pub fn base_materials(&self, item: usize) -> BTreeSet<usize> {
        if item < self.base {
            return BTreeSet::from([item]);
        }
        match self.rule_for(item) {
            Some(r) => {
                let mut set = self.base_materials(r.inputs.0);
                set.extend(self.base_materials(r.inputs.1));
                set
            }
            None => BTreeSet::new(),
        }
    }

    /// Kahn's algorithm over the recipe graph; `None` when a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.items.len();
        let mut indegree = vec![0usize; n];
        for r in &self.rules {
            indegree[r.output] += 2;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop() {
            order.push(v);
            for r in &self.rules {
                for input in [r.inputs.0, r.inputs.1] {
                    if input == v {
                        indegree[r.output] -= 1;
                        if indegree[r.output] == 0 {
                            ready.push(r.output);
                        }
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    fn option_is_correct(&self, q: &CraftQuestion, i: usize) -> bool {
        match q {
            CraftQuestion::Recipe { target, options, .. } => {
                self.product_of(options[i]) == Some(*target)
            }
            CraftQuestion::Product { inputs, options, .. } => {
                self.product_of(*inputs) == Some(options[i])
            }
            CraftQuestion::BaseMaterials { target, options, .. } => {
                let want = self.base_materials(*target);
                options[i].iter().copied().collect::<BTreeSet<_>>() == want
            }
        }
    }

    fn option_count(q: &CraftQuestion) -> usize {
        match q {
            CraftQuestion::Recipe { options, .. } => options.len(),
            CraftQuestion::Product { options, .. } => options.len(),
            CraftQuestion::BaseMaterials { options, .. } => options.len(),
        }
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        let fail = |m: String| Err(TaskError::GenerationFailed(m));
        if self.topological_order().is_none() {
            return fail("craft rules contain a cycle".into());
        }
        for (i, q) in self.questions.iter().enumerate() {
            let correct: Vec<usize> = (0..Self::option_count(q))
                .filter(|&o| self.option_is_correct(q, o))
                .collect();
            if correct != [q.answer_index()] {
                return fail(format!("craft question {i} has correct options {correct:?}"));
            }
        }
        Ok(())
    }

    pub fn description(&self) -> String {
        let mut out = format!("Base materials: {}.\nCrafting rules:", self.items[..self.base].join(", "));
        for r in &self.rules {
            out.push_str(&format!(
                "\n{} + {} -> {}",
                self.items[r.inputs.0], self.items[r.inputs.1], self.items[r.output]
            ));
        }
        out
    }

    pub fn mcq_items(&self) -> Vec<McqItem> {
        let name = |i: usize| self.items[i].clone();
        self.questions
            .iter()
            .map(|q| match q {
                CraftQuestion::Recipe { target, options, answer_index } => McqItem {
                    prompt: format!("Which two items combine to make {}?", name(*target)),
                    options: options.iter().map(|p| format!("{} + {}", name(p.0), name(p.1))).collect(),
                    answer_index: *answer_index,
                },
                CraftQuestion::Product { inputs, options, answer_index } => McqItem {
                    prompt: format!("What do you get by combining {} and {}?", name(inputs.0), name(inputs.1)),
                    options: options.iter().map(|&o| name(o)).collect(),
                    answer_index: *answer_index,
                },
                CraftQuestion::BaseMaterials { target, options, answer_index } => McqItem {
                    prompt: format!("Which base materials are ultimately needed to make {}?", name(*target)),
                    options: options
                        .iter()
                        .map(|set| set.iter().map(|&i| name(i)).collect::<Vec<_>>().join(", "))
                        .collect(),
                    answer_index: *answer_index,
                },
            })
            .collect()
    }
}

/// Base-material count for a craft level.
fn base_count(n_items: usize) -> usize {
    if n_items >= 7 {
        4
    } else {
        3
    }
}

/// A recipe DAG over `n_items` items with `n_questions` questions.
pub fn gen_craft<R: Rng + ?Sized>(
    n_items: usize,
    n_questions: usize,
    n_options: usize,
    rng: &mut R,
) -> Result<CraftInstance, TaskError> {
    if !(5..=7).contains(&n_items) {
        return Err(TaskError::GenerationFailed(format!(
            "craft systems have 5 to 7 items, got {n_items}"
        )));
    }
    for _ in 0..MAX_RETRIES {
        if let Some(inst) = try_gen_craft(n_items, n_questions, n_options, rng) {
            inst.validate()?;
            return Ok(inst);
        }
    }
    Err(TaskError::GenerationFailed(format!(
        "no craft system over {n_items} items after {MAX_RETRIES} attempts"
    )))
}

fn try_gen_craft<R: Rng + ?Sized>(
    n: usize,
    n_questions: usize,
    n_options: usize,
    rng: &mut R,
) -> Option<CraftInstance> {
    let base = base_count(n);
    let items: Vec<String> = ITEMS.choose_multiple(rng, n).map(|s| s.to_string()).collect();
    let mut rules: Vec<Rule> = Vec::new();
    for output in base..n {
        // inputs come strictly from earlier items, so the graph is acyclic
        let mut tries = 0;
        loop {
            tries += 1;
            if tries > 100 {
                return None;
            }
            let a = rng.gen_range(0..output);
            let b = rng.gen_range(0..output);
            let pair = unordered((a, b));
            if a != b && !rules.iter().any(|r| unordered(r.inputs) == pair) {
                rules.push(Rule { inputs: pair, output });
                break;
            }
        }
    }
    let mut inst = CraftInstance {
        items,
        base,
        rules,
        questions: Vec::new(),
    };

    #[derive(Clone, Copy)]
    enum Kind {
        Recipe(usize),
        Product(usize),
        Base(usize),
    }
    let mut pool: Vec<Kind> = Vec::new();
    for (k, r) in inst.rules.iter().enumerate() {
        pool.push(Kind::Recipe(r.output));
        pool.push(Kind::Product(k));
        pool.push(Kind::Base(r.output));
    }
    pool.shuffle(rng);
    for kind in pool {
        if inst.questions.len() == n_questions {
            break;
        }
        let q = match kind {
            Kind::Recipe(target) => recipe_question(&inst, target, n_options, rng),
            Kind::Product(k) => product_question(&inst, k, n_options, rng),
            Kind::Base(target) => base_question(&inst, target, n_options, rng),
        };
        if let Some(q) = q {
            inst.questions.push(q);
        }
    }
    (inst.questions.len() == n_questions).then_some(inst)
}

fn place_answer<T: Clone + PartialEq, R: Rng + ?Sized>(correct: T, mut distractors: Vec<T>, n_options: usize, rng: &mut R) -> Option<(Vec<T>, usize)> {
    distractors.shuffle(rng);
    distractors.truncate(n_options - 1);
    if distractors.len() < n_options - 1 {
        return None;
    }
    let mut options = distractors;
    options.push(correct.clone());
    options.shuffle(rng);
    let idx = options.iter().position(|o| *o == correct)?;
    Some((options, idx))
}

fn recipe_question<R: Rng + ?Sized>(inst: &CraftInstance, target: usize, n_options: usize, rng: &mut R) -> Option<CraftQuestion> {
    let correct = inst.rule_for(target)?.inputs;
    let n = inst.items.len();
    let distractors: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&p| p != correct && p.0 != target && p.1 != target)
        .filter(|&p| inst.product_of(p) != Some(target))
        .collect();
    let (options, answer_index) = place_answer(correct, distractors, n_options, rng)?;
    Some(CraftQuestion::Recipe { target, options, answer_index })
}

fn product_question<R: Rng + ?Sized>(inst: &CraftInstance, rule: usize, n_options: usize, rng: &mut R) -> Option<CraftQuestion> {
    let r = inst.rules[rule];
    let distractors: Vec<usize> = (0..inst.items.len()).filter(|&i| i != r.output).collect();
    let (options, answer_index) = place_answer(r.output, distractors, n_options, rng)?;
    Some(CraftQuestion::Product { inputs: r.inputs, options, answer_index })
}

fn base_question<R: Rng + ?Sized>(inst: &CraftInstance, target: usize, n_options: usize, rng: &mut R) -> Option<CraftQuestion> {
    let correct: Vec<usize> = inst.base_materials(target).into_iter().collect();
    let distractors: Vec<Vec<usize>> = (1u32..(1 << inst.base))
        .map(|mask| (0..inst.base).filter(|b| mask & (1 << b) != 0).collect::<Vec<_>>())
        .filter(|s| *s != correct)
        .collect();
    let (options, answer_index) = place_answer(correct, distractors, n_options, rng)?;
    Some(CraftQuestion::BaseMaterials { target, options, answer_index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn craft_instances_are_dags_with_single_answers() {
        for n in 5..=7 {
            for seed in 0..40 {
                let inst = gen_craft(n, 5, 4, &mut substream(seed, "craft")).unwrap();
                assert_eq!(inst.items.len(), n);
                assert_eq!(inst.questions.len(), 5);
                let order = inst.topological_order().expect("DAG");
                assert_eq!(order.len(), n);
                inst.validate().unwrap();
            }
        }
    }

    #[test]
    fn cycle_is_detected() {
        let mut inst = gen_craft(5, 5, 4, &mut substream(1, "c")).unwrap();
        // make a base material depend on the last crafted item
        inst.rules.push(Rule { inputs: (4, 1), output: 0 });
        assert!(inst.topological_order().is_none());
        assert!(inst.validate().is_err());
    }

    #[test]
    fn description_lists_rules() {
        let inst = gen_craft(6, 5, 4, &mut substream(4, "c")).unwrap();
        assert_eq!(inst.description().matches("->").count(), inst.rules.len());
        assert_eq!(inst.mcq_items().len(), 5);
    }
}
