//! Finite tuple universes for schedule generation.
//!
//! Tuples are abstract objects: a relation plus an index. Every foreign key
//! is a total mapping from the tuples of its domain relation to the tuples
//! of its range relation; instantiation constraints are checked against
//! these images.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;

use crate::workload::Schema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TupleId {
    pub relation: u32,
    pub index: u32,
}

/// Schema lookup tables shared by the oracle: relation ids, attribute bit
/// positions, and full attribute masks.
#[derive(Debug, Clone)]
pub struct SchemaIndex {
    names: Vec<String>,
    ids: HashMap<String, u32>,
    attr_bits: Vec<HashMap<String, u32>>,
    full_masks: Vec<u64>,
}

impl SchemaIndex {
    pub fn new(schema: &Schema) -> SchemaIndex {
        let mut names = Vec::new();
        let mut ids = HashMap::new();
        let mut attr_bits = Vec::new();
        let mut full_masks = Vec::new();
        for (i, rel) in schema.relations.iter().enumerate() {
            names.push(rel.name.clone());
            ids.insert(rel.name.clone(), i as u32);
            let bits: HashMap<String, u32> = rel
                .attributes
                .iter()
                .enumerate()
                .map(|(b, a)| (a.clone(), b as u32))
                .collect();
            full_masks.push(if rel.attributes.is_empty() {
                0
            } else {
                (1u64 << rel.attributes.len()) - 1
            });
            attr_bits.push(bits);
        }
        SchemaIndex {
            names,
            ids,
            attr_bits,
            full_masks,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, relation: &str) -> Option<u32> {
        self.ids.get(relation).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn full_mask(&self, id: u32) -> u64 {
        self.full_masks[id as usize]
    }

    pub fn attr_mask<'a, I: IntoIterator<Item = &'a String>>(&self, id: u32, attrs: I) -> u64 {
        let bits = &self.attr_bits[id as usize];
        let mut mask = 0;
        for a in attrs {
            if let Some(b) = bits.get(a) {
                mask |= 1 << b;
            }
        }
        mask
    }
}

#[derive(Debug, Clone)]
pub struct Universe {
    pub index: SchemaIndex,
    sizes: Vec<u32>,
    fk_images: HashMap<(String, TupleId), TupleId>,
}

impl Universe {
    /// A universe with `size` tuples per relation and every foreign-key
    /// image mapping tuple i to tuple i modulo the range size.
    pub fn uniform(schema: &Schema, size: u32) -> Universe {
        let index = SchemaIndex::new(schema);
        let sizes = vec![size; index.len()];
        let mut universe = Universe {
            index,
            sizes,
            fk_images: HashMap::new(),
        };
        for fk in &schema.foreign_keys {
            let (Some(from), Some(to)) = (
                universe.index.id(&fk.from_relation),
                universe.index.id(&fk.to_relation),
            ) else {
                continue;
            };
            for i in 0..size {
                universe.fk_images.insert(
                    (
                        fk.name.clone(),
                        TupleId {
                            relation: from,
                            index: i,
                        },
                    ),
                    TupleId {
                        relation: to,
                        index: i % size.max(1),
                    },
                );
            }
        }
        universe
    }

    /// A universe with random foreign-key images, for fuzzing.
    pub fn random<R: Rng>(schema: &Schema, size: u32, rng: &mut R) -> Universe {
        let mut universe = Universe::uniform(schema, size);
        let keys: Vec<(String, TupleId)> = universe.fk_images.keys().cloned().collect();
        for key in keys {
            let img = universe.fk_images.get_mut(&key).unwrap();
            img.index = rng.gen_range(0..size.max(1));
        }
        universe
    }

    pub fn size_of(&self, relation: u32) -> u32 {
        self.sizes[relation as usize]
    }

    pub fn tuples_of(&self, relation: u32) -> impl Iterator<Item = TupleId> + '_ {
        (0..self.size_of(relation)).map(move |index| TupleId { relation, index })
    }

    pub fn fk_image(&self, fk: &str, tuple: TupleId) -> Option<TupleId> {
        self.fk_images.get(&(fk.to_string(), tuple)).copied()
    }

    pub fn set_fk_image(&mut self, fk: &str, from: TupleId, to: TupleId) {
        self.fk_images.insert((fk.to_string(), from), to);
    }

    pub fn tuple(&self, relation: &str, idx: u32) -> TupleId {
        let relation = self
            .index
            .id(relation)
            .expect("relation must exist in the universe");
        TupleId {
            relation,
            index: idx,
        }
    }

    pub fn tuple_name(&self, t: TupleId) -> String {
        format!("{}{}", self.index.name(t.relation), t.index)
    }
}

impl fmt::Display for TupleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.relation, self.index)
    }
}
