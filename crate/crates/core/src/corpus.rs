//! Recipe ingestion and ingredient counting.
//!
//! Counts are per-recipe presence: an ingredient listed twice in one recipe
//! counts once, and a pair counts once per recipe containing both tokens.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Default minimum occurrence for an ingredient to stay in the vocabulary.
pub const DEFAULT_MIN_OCCURRENCE: u64 = 21;
/// Default minimum co-occurrence for a pair to count as known.
pub const DEFAULT_MIN_COOCCURRENCE: u64 = 5;

/// Unordered ingredient pair, stored with the lexicographically smaller token first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    a: String,
    b: String,
}

impl PairKey {
    /// Returns `None` for a self-pair.
    pub fn new(x: &str, y: &str) -> Option<Self> {
        match x.cmp(y) {
            std::cmp::Ordering::Less => Some(Self {
                a: x.to_owned(),
                b: y.to_owned(),
            }),
            std::cmp::Ordering::Greater => Some(Self {
                a: y.to_owned(),
                b: x.to_owned(),
            }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn a(&self) -> &str {
        &self.a
    }

    pub fn b(&self) -> &str {
        &self.b
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecipeRecord {
    pub id: String,
    pub ingredients: BTreeSet<String>,
}

/// Lowercases and joins internal whitespace runs with `_`.
/// Returns `None` when nothing but whitespace remains.
pub fn normalize_token(raw: &str) -> Option<String> {
    let joined = raw
        .split_whitespace()
        .map(|part| part.to_lowercase())
        .collect::<Vec<_>>()
        .join("_");
    if joined.is_empty() {
        None
    } else {
        Some(joined)
    }
}

fn parse_recipe_line(line: &str, line_no: usize) -> Result<RecipeRecord> {
    let value: Value = serde_json::from_str(line).map_err(|e| Error::Malformed {
        line: line_no,
        message: e.to_string(),
    })?;
    let object = value.as_object().ok_or_else(|| Error::Malformed {
        line: line_no,
        message: "expected a JSON object".into(),
    })?;
    let id = match object.get("id") {
        None => {
            return Err(Error::MissingField {
                line: line_no,
                field: "id",
            })
        }
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            return Err(Error::Malformed {
                line: line_no,
                message: "field `id` must be a string".into(),
            })
        }
    };
    let raw = match object.get("ingredients") {
        None => {
            return Err(Error::MissingField {
                line: line_no,
                field: "ingredients",
            })
        }
        Some(Value::Array(items)) => items,
        Some(_) => {
            return Err(Error::Malformed {
                line: line_no,
                message: "field `ingredients` must be an array of strings".into(),
            })
        }
    };
    let mut ingredients = BTreeSet::new();
    for item in raw {
        let s = item.as_str().ok_or_else(|| Error::Malformed {
            line: line_no,
            message: "field `ingredients` must be an array of strings".into(),
        })?;
        if let Some(token) = normalize_token(s) {
            ingredients.insert(token);
        }
    }
    Ok(RecipeRecord { id, ingredients })
}

/// Streaming JSON-lines reader. Blank lines are skipped and recipes with fewer
/// than two distinct ingredients are dropped.
pub struct RecipeReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> RecipeReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
        }
    }
}

impl<R: BufRead> Iterator for RecipeReader<R> {
    type Item = Result<RecipeRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            match parse_recipe_line(&line, self.line_no) {
                Ok(record) if record.ingredients.len() < 2 => continue,
                other => return Some(other),
            }
        }
    }
}

pub fn load_recipes<R: BufRead>(source: R) -> Result<Vec<RecipeRecord>> {
    RecipeReader::new(source).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountTable {
    pub recipe_count: u64,
    pub occurrence: BTreeMap<String, u64>,
    pub cooccurrence: BTreeMap<PairKey, u64>,
}

impl CountTable {
    pub fn occurrence(&self, token: &str) -> u64 {
        self.occurrence.get(token).copied().unwrap_or(0)
    }

    /// Order of the two tokens does not matter.
    pub fn cooccurrence(&self, x: &str, y: &str) -> u64 {
        PairKey::new(x, y)
            .and_then(|key| self.cooccurrence.get(&key).copied())
            .unwrap_or(0)
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.occurrence.keys().map(String::as_str)
    }

    pub fn vocab_size(&self) -> usize {
        self.occurrence.len()
    }

    pub fn pair_count(&self) -> usize {
        self.cooccurrence.len()
    }

    /// Adds the counts of a disjoint corpus shard.
    pub fn merge(&mut self, other: &CountTable) {
        self.recipe_count += other.recipe_count;
        for (token, count) in &other.occurrence {
            *self.occurrence.entry(token.clone()).or_insert(0) += count;
        }
        for (key, count) in &other.cooccurrence {
            *self.cooccurrence.entry(key.clone()).or_insert(0) += count;
        }
    }
}

/// Incremental counter; tokens are interned so the per-pair hot path only
/// touches integer keys.
#[derive(Debug, Default)]
pub struct Counter {
    recipes: u64,
    ids: HashMap<String, u32>,
    tokens: Vec<String>,
    occurrence: Vec<u64>,
    pairs: HashMap<(u32, u32), u64>,
}

impl Counter {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_owned());
        self.occurrence.push(0);
        self.ids.insert(token.to_owned(), id);
        id
    }

    pub fn add(&mut self, recipe: &RecipeRecord) {
        self.recipes += 1;
        let ids: Vec<u32> = recipe
            .ingredients
            .iter()
            .map(|token| self.intern(token))
            .collect();
        for (i, &x) in ids.iter().enumerate() {
            self.occurrence[x as usize] += 1;
            for &y in &ids[i + 1..] {
                let key = if x < y { (x, y) } else { (y, x) };
                *self.pairs.entry(key).or_insert(0) += 1;
            }
        }
    }

    pub fn finish(self) -> CountTable {
        let occurrence = self
            .tokens
            .iter()
            .cloned()
            .zip(self.occurrence.iter().copied())
            .collect();
        let cooccurrence = self
            .pairs
            .into_iter()
            .map(|((x, y), count)| {
                let key = PairKey::new(&self.tokens[x as usize], &self.tokens[y as usize])
                    .expect("recipe ingredients are a set");
                (key, count)
            })
            .collect();
        CountTable {
            recipe_count: self.recipes,
            occurrence,
            cooccurrence,
        }
    }
}

pub fn count_corpus<'a, I>(recipes: I) -> CountTable
where
    I: IntoIterator<Item = &'a RecipeRecord>,
{
    let mut counter = Counter::new();
    for recipe in recipes {
        counter.add(recipe);
    }
    counter.finish()
}

/// Counts contiguous shards on separate threads and merges the results.
pub fn count_sharded(recipes: &[RecipeRecord], shards: usize) -> CountTable {
    let shards = shards.max(1);
    let chunk = recipes.len().div_ceil(shards).max(1);
    let partials: Vec<CountTable> = std::thread::scope(|scope| {
        let handles: Vec<_> = recipes
            .chunks(chunk)
            .map(|part| scope.spawn(move || count_corpus(part)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("counting thread panicked"))
            .collect()
    });
    let mut total = CountTable::default();
    for part in &partials {
        total.merge(part);
    }
    total
}

/// Drops rare tokens (and every pair touching them), then rare pairs.
pub fn filter_counts(
    table: &CountTable,
    min_occurrence: u64,
    min_cooccurrence: u64,
) -> Result<CountTable> {
    if min_occurrence < 1 || min_cooccurrence < 1 {
        return Err(Error::InvalidArgument(
            "filter thresholds must be at least 1".into(),
        ));
    }
    let occurrence: BTreeMap<String, u64> = table
        .occurrence
        .iter()
        .filter(|(_, &count)| count >= min_occurrence)
        .map(|(token, &count)| (token.clone(), count))
        .collect();
    let cooccurrence = table
        .cooccurrence
        .iter()
        .filter(|(key, &count)| {
            count >= min_cooccurrence
                && occurrence.contains_key(key.a())
                && occurrence.contains_key(key.b())
        })
        .map(|(key, &count)| (key.clone(), count))
        .collect();
    Ok(CountTable {
        recipe_count: table.recipe_count,
        occurrence,
        cooccurrence,
    })
}

pub fn write_counts_tsv<W: Write>(table: &CountTable, mut out: W) -> Result<()> {
    writeln!(out, "#recipes\t{}", table.recipe_count)?;
    for (token, count) in &table.occurrence {
        writeln!(out, "OCC\t{token}\t{count}")?;
    }
    for (key, count) in &table.cooccurrence {
        writeln!(out, "COOC\t{}\t{}\t{count}", key.a(), key.b())?;
    }
    Ok(())
}

fn parse_count(field: &str, line: usize) -> Result<u64> {
    field.parse().map_err(|_| Error::Malformed {
        line,
        message: format!("`{field}` is not a count"),
    })
}

pub fn read_counts_tsv<R: BufRead>(source: R) -> Result<CountTable> {
    let mut table = CountTable::default();
    let mut saw_header = false;
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            ["#recipes", n] => {
                table.recipe_count = parse_count(n, line_no)?;
                saw_header = true;
            }
            ["OCC", token, n] => {
                table
                    .occurrence
                    .insert((*token).to_owned(), parse_count(n, line_no)?);
            }
            ["COOC", a, b, n] => {
                let key = PairKey::new(a, b).ok_or_else(|| Error::Malformed {
                    line: line_no,
                    message: "self-pair in counts file".into(),
                })?;
                table.cooccurrence.insert(key, parse_count(n, line_no)?);
            }
            _ => {
                return Err(Error::Malformed {
                    line: line_no,
                    message: "unrecognized counts line".into(),
                })
            }
        }
    }
    if !saw_header {
        return Err(Error::MissingField {
            line: 1,
            field: "#recipes",
        });
    }
    Ok(table)
}
